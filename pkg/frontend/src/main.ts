// DOM wiring for the annotation workflow. Keyboard path: digit keys set
// the focused rating, arrows adjust steppers, Enter submits the focused
// panel (or advances once the item is finished).

import { ApiClient, ApiError } from "./api.js";
import {
  COUNT_FIELDS,
  RATING_FIELDS,
  RatingForm,
  SCALES,
  applyDigitKey,
  type CountField,
  type RatingField,
} from "./form.js";
import { tokenizeRule } from "./pretty.js";
import type { WorkItem } from "./types.js";

const storage: Storage | undefined =
  typeof localStorage === "undefined" ? undefined : localStorage;
const client = new ApiClient("", undefined as never, storage ?? undefined);

let sessionId = "";
let currentItem: WorkItem | null = null;
let forms = new Map<string, RatingForm>();

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function byId(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node;
}

function setStatus(text: string, isError = false): void {
  const status = byId("status");
  status.textContent = text;
  status.classList.toggle("error", isError);
}

function renderRule(item: WorkItem): HTMLElement {
  const container = el("div", "rule");
  for (const token of tokenizeRule(item.rule_text)) {
    const span = el("span", `token ${token.kind}`, token.text);
    if (token.title) span.title = token.title; // raw label on hover
    container.appendChild(span);
  }
  return container;
}

function renderTypes(item: WorkItem): HTMLElement {
  const wrap = el("div", "chips");
  for (const [variable, types] of Object.entries(item.variable_types)) {
    if (types.length === 0) {
      wrap.appendChild(el("span", "chip empty", `${variable}: no type data`));
    }
    for (const t of types) {
      wrap.appendChild(el("span", "chip", `${variable}: ${t}`));
    }
  }
  return wrap;
}

function ratingControl(form: RatingForm, field: RatingField): HTMLElement {
  const scale = SCALES[field];
  const wrap = el("div", "control");
  wrap.appendChild(el("label", undefined, field));
  const group = el("div", "scale");
  for (let v = scale.min; v <= scale.max; v++) {
    const button = el("button", "scale-btn", String(v));
    button.setAttribute("data-field", field);
    button.tabIndex = 0;
    button.addEventListener("click", () => {
      form.setRating(field, v);
      group
        .querySelectorAll(".scale-btn")
        .forEach((b) => b.classList.toggle("picked", b.textContent === String(v)));
      refreshSubmit();
    });
    button.addEventListener("keydown", (event) => {
      if (applyDigitKey(form, field, event.key)) {
        const picked = form.getRating(field);
        group
          .querySelectorAll(".scale-btn")
          .forEach((b) =>
            b.classList.toggle("picked", b.textContent === String(picked)),
          );
        refreshSubmit();
        event.preventDefault();
      }
    });
    group.appendChild(button);
  }
  wrap.appendChild(group);
  return wrap;
}

function stepperControl(form: RatingForm, field: CountField): HTMLElement {
  const wrap = el("div", "control");
  wrap.appendChild(el("label", undefined, field));
  const group = el("div", "stepper");
  const minus = el("button", "step-btn", "-");
  const value = el("span", "count", "0");
  const plus = el("button", "step-btn", "+");
  const update = (delta: number) => {
    value.textContent = String(form.step(field, delta));
  };
  minus.addEventListener("click", () => update(-1));
  plus.addEventListener("click", () => update(+1));
  group.append(minus, value, plus);
  wrap.appendChild(group);
  return wrap;
}

function refreshSubmit(): void {
  const item = currentItem;
  if (!item) return;
  for (const expl of item.explanations) {
    const button = document.querySelector<HTMLButtonElement>(
      `button[data-submit="${expl.target}"]`,
    );
    const form = forms.get(expl.target);
    if (button && form) button.disabled = !form.isComplete();
  }
}

async function submitPanel(target: string): Promise<void> {
  const item = currentItem;
  const form = forms.get(target);
  if (!item || !form) return;
  try {
    const result = await client.submit(form.toPayload(sessionId, item));
    if (result.queued) {
      setStatus("offline: submission queued, will flush on reconnect");
    } else if (result.duplicate) {
      setStatus("already submitted; advancing");
    } else {
      setStatus("saved");
    }
    forms.delete(target);
    const panel = document.querySelector(`[data-panel="${target}"]`);
    panel?.classList.add("done");
    if (forms.size === 0 || item.phase === 1) {
      await advance();
    }
  } catch (error) {
    if (error instanceof ApiError) {
      // surface the server's field-level message inline on the panel
      const panel = document.querySelector(`[data-panel="${target}"]`);
      const note = panel?.querySelector(".panel-error");
      if (note) note.textContent = error.detail;
      setStatus("the server rejected this submission", true);
    } else {
      setStatus(String(error), true);
    }
  }
}

function renderPanels(item: WorkItem): HTMLElement {
  const wrap = el("div", "panels");
  forms = new Map();
  const preferenceTargets: HTMLInputElement[] = [];
  for (const expl of item.explanations) {
    const form = new RatingForm(item.phase, expl.target);
    forms.set(expl.target, form);
    const panel = el("section", "panel");
    panel.setAttribute("data-panel", expl.target);
    panel.appendChild(el("h3", undefined, expl.target));
    panel.appendChild(el("p", "explanation", expl.text));

    if (item.phase === 1) {
      const label = el("label", "prefer");
      const radio = el("input") as HTMLInputElement;
      radio.type = "radio";
      radio.name = "preferred";
      radio.value = expl.target;
      radio.addEventListener("change", () => {
        for (const f of forms.values()) f.setPreference(expl.target);
        refreshSubmit();
      });
      preferenceTargets.push(radio);
      label.appendChild(radio);
      label.appendChild(document.createTextNode(" this explanation is better"));
      panel.appendChild(label);
    }

    for (const field of RATING_FIELDS) panel.appendChild(ratingControl(form, field));
    for (const field of COUNT_FIELDS) panel.appendChild(stepperControl(form, field));

    panel.appendChild(el("p", "panel-error"));
    const submit = el("button", "submit", "submit rating") as HTMLButtonElement;
    submit.setAttribute("data-submit", expl.target);
    submit.disabled = true;
    submit.addEventListener("click", () => void submitPanel(expl.target));
    panel.appendChild(submit);
    wrap.appendChild(panel);
  }
  return wrap;
}

function renderItem(item: WorkItem, position: number, total: number): void {
  currentItem = item;
  const root = byId("item");
  root.replaceChildren();
  root.appendChild(el("h2", undefined, `rule ${position + 1} of ${total}`));
  root.appendChild(el("span", "phase-tag", `phase ${item.phase}`));
  root.appendChild(renderRule(item));
  if (item.grounding_text) {
    root.appendChild(el("h4", undefined, "a concrete instance"));
    root.appendChild(renderRule({ ...item, rule_text: item.grounding_text }));
  }
  root.appendChild(el("h4", undefined, "variable types"));
  root.appendChild(renderTypes(item));
  root.appendChild(renderPanels(item));
  refreshSubmit();
}

async function advance(): Promise<void> {
  const next = await client.fetchNext(sessionId);
  if (next.done || !next.item) {
    currentItem = null;
    byId("item").replaceChildren(el("h2", undefined, "all items annotated, thank you"));
    setStatus("done");
    return;
  }
  renderItem(next.item, next.position ?? 0, next.total ?? 0);
}

async function start(): Promise<void> {
  const annotator = (byId("annotator") as HTMLInputElement).value.trim();
  const token = (byId("token") as HTMLInputElement).value.trim() || undefined;
  if (!annotator) {
    setStatus("enter an annotator id first", true);
    return;
  }
  try {
    const session = await client.openSession(annotator, token);
    sessionId = session.session_id;
    byId("login").hidden = true;
    setStatus(`session open (${session.total} items)`);
    await advance();
  } catch (error) {
    setStatus(String(error), true);
  }
}

export function boot(): void {
  byId("start").addEventListener("click", () => void start());
  window.addEventListener("online", () => {
    void client.flushQueue().then((n) => {
      if (n > 0) setStatus(`reconnected; flushed ${n} queued submissions`);
    });
  });
  window.addEventListener("keydown", (event) => {
    if (event.key === "Enter" && currentItem) {
      const firstOpen = currentItem.explanations.find((e) => forms.has(e.target));
      if (firstOpen && forms.get(firstOpen.target)?.isComplete()) {
        void submitPanel(firstOpen.target);
        event.preventDefault();
      }
    }
  });
}

if (typeof document !== "undefined" && document.getElementById("start")) {
  boot();
}
