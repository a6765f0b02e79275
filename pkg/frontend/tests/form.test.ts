import { describe, expect, it } from "vitest";

import { RatingForm, applyDigitKey, clamp } from "../src/form.js";
import type { WorkItem } from "../src/types.js";

const ITEM: WorkItem = {
  item_id: "item-r1",
  rule_id: "r1",
  phase: 2,
  rule_text: "?a /d/t/r ?b => ?a /d/t/r ?b",
  grounding_text: null,
  variable_types: { "?a": [], "?b": [] },
  label_segments: {},
  explanations: [
    { target: "zero_shot@m", text: "one" },
    { target: "typed_zero_shot@m", text: "two" },
  ],
};

function completedForm(phase = 2): RatingForm {
  const form = new RatingForm(phase, "zero_shot@m");
  form.setRating("correctness", 4);
  form.setRating("clarity", 5);
  form.setRating("logicalness", 2);
  return form;
}

describe("clamping", () => {
  it("keeps ratings inside their scales", () => {
    expect(clamp("correctness", 9)).toBe(5);
    expect(clamp("correctness", 0)).toBe(1);
    expect(clamp("clarity", 2.4)).toBe(2);
    expect(clamp("logicalness", 7)).toBe(3);
    expect(clamp("m_ent", -3)).toBe(0);
  });

  it("rejects unknown fields", () => {
    expect(() => clamp("sentiment", 1)).toThrow(/unknown field/);
  });
});

describe("RatingForm", () => {
  it("blocks submission until every rating is set", () => {
    const form = new RatingForm(2, "zero_shot@m");
    expect(form.isComplete()).toBe(false);
    form.setRating("correctness", 3);
    form.setRating("clarity", 3);
    expect(form.isComplete()).toBe(false);
    expect(form.missingFields()).toEqual(["logicalness"]);
    form.setRating("logicalness", 1);
    expect(form.isComplete()).toBe(true);
  });

  it("counts default to zero and never go negative", () => {
    const form = completedForm();
    expect(form.getCount("h_ent")).toBe(0);
    form.step("h_ent", -1);
    expect(form.getCount("h_ent")).toBe(0);
    form.step("h_ent", +1);
    form.step("h_ent", +1);
    expect(form.getCount("h_ent")).toBe(2);
  });

  it("phase-1 forms require a preference before completing", () => {
    const form = completedForm(1);
    expect(form.isComplete()).toBe(false);
    expect(form.missingFields()).toEqual(["preferred"]);
    form.setPreference("zero_shot@m");
    expect(form.isComplete()).toBe(true);
  });

  it("builds a payload matching the annotation schema", () => {
    const form = completedForm();
    form.step("m_rel", +1);
    const payload = form.toPayload("sess-1", ITEM);
    expect(payload).toEqual({
      session_id: "sess-1",
      item_id: "item-r1",
      target: "zero_shot@m",
      correctness: 4,
      clarity: 5,
      logicalness: 2,
      m_ent: 0,
      m_rel: 1,
      h_ent: 0,
      h_rel: 0,
    });
  });

  it("phase-1 payload carries the preference", () => {
    const form = completedForm(1);
    form.setPreference("typed_zero_shot@m");
    const payload = form.toPayload("sess-1", { ...ITEM, phase: 1 });
    expect(payload.preferred).toBe("typed_zero_shot@m");
  });

  it("refuses to build payloads from incomplete forms", () => {
    const form = new RatingForm(2, "zero_shot@m");
    expect(() => form.toPayload("sess", ITEM)).toThrow(/incomplete/);
  });
});

describe("keyboard entry", () => {
  it("digit keys set ratings, clamped to the scale", () => {
    const form = new RatingForm(2, "zero_shot@m");
    expect(applyDigitKey(form, "correctness", "4")).toBe(true);
    expect(form.getRating("correctness")).toBe(4);
    expect(applyDigitKey(form, "logicalness", "9")).toBe(true);
    expect(form.getRating("logicalness")).toBe(3);
    expect(applyDigitKey(form, "clarity", "x")).toBe(false);
  });
});
