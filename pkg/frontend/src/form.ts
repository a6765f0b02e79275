// Rating form state: discrete scales enforced at entry time.
//
// correctness/clarity run 1..5, logicalness 1..3, the four mention
// counters are non-negative steppers. Submission stays disabled until
// every required field is set, and phase-1 items additionally require a
// pairwise preference.

import type { AnnotationPayload, WorkItem } from "./types.js";

export interface Scale {
  min: number;
  max: number;
}

export const SCALES: Record<string, Scale> = {
  correctness: { min: 1, max: 5 },
  clarity: { min: 1, max: 5 },
  logicalness: { min: 1, max: 3 },
  m_ent: { min: 0, max: 99 },
  m_rel: { min: 0, max: 99 },
  h_ent: { min: 0, max: 99 },
  h_rel: { min: 0, max: 99 },
};

export const RATING_FIELDS = ["correctness", "clarity", "logicalness"] as const;
export const COUNT_FIELDS = ["m_ent", "m_rel", "h_ent", "h_rel"] as const;

export type RatingField = (typeof RATING_FIELDS)[number];
export type CountField = (typeof COUNT_FIELDS)[number];

export function clamp(field: string, value: number): number {
  const scale = SCALES[field];
  if (!scale) throw new Error(`unknown field: ${field}`);
  const rounded = Math.round(value);
  return Math.min(scale.max, Math.max(scale.min, rounded));
}

export class RatingForm {
  readonly phase: number;
  readonly target: string;
  private ratings: Partial<Record<RatingField, number>> = {};
  private counts: Record<CountField, number> = {
    m_ent: 0,
    m_rel: 0,
    h_ent: 0,
    h_rel: 0,
  };
  preferred: string | null = null;

  constructor(phase: number, target: string) {
    this.phase = phase;
    this.target = target;
  }

  setRating(field: RatingField, value: number): void {
    this.ratings[field] = clamp(field, value);
  }

  getRating(field: RatingField): number | undefined {
    return this.ratings[field];
  }

  step(field: CountField, delta: number): number {
    this.counts[field] = clamp(field, this.counts[field] + delta);
    return this.counts[field];
  }

  getCount(field: CountField): number {
    return this.counts[field];
  }

  setPreference(target: string): void {
    this.preferred = target;
  }

  /** Submission gate: all scales set, and a preference on phase-1 items. */
  isComplete(): boolean {
    for (const field of RATING_FIELDS) {
      if (this.ratings[field] === undefined) return false;
    }
    if (this.phase === 1 && this.preferred === null) return false;
    return true;
  }

  missingFields(): string[] {
    const missing: string[] = RATING_FIELDS.filter(
      (f) => this.ratings[f] === undefined,
    );
    if (this.phase === 1 && this.preferred === null) missing.push("preferred");
    return missing;
  }

  toPayload(sessionId: string, item: WorkItem): AnnotationPayload {
    if (!this.isComplete()) {
      throw new Error(`form incomplete: ${this.missingFields().join(", ")}`);
    }
    const payload: AnnotationPayload = {
      session_id: sessionId,
      item_id: item.item_id,
      target: this.target,
      correctness: this.ratings.correctness!,
      clarity: this.ratings.clarity!,
      logicalness: this.ratings.logicalness!,
      m_ent: this.counts.m_ent,
      m_rel: this.counts.m_rel,
      h_ent: this.counts.h_ent,
      h_rel: this.counts.h_rel,
    };
    if (this.phase === 1 && this.preferred) payload.preferred = this.preferred;
    return payload;
  }
}

/** Digit-key entry: 1..9 map onto the focused field's scale, clamped. */
export function applyDigitKey(
  form: RatingForm,
  field: RatingField,
  key: string,
): boolean {
  if (!/^[0-9]$/.test(key)) return false;
  form.setRating(field, Number(key));
  return true;
}
