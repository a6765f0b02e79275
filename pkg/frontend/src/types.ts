// Shared shapes matching the annotation API's JSON contracts.

export interface ExplanationView {
  target: string;
  text: string;
}

export interface WorkItem {
  item_id: string;
  rule_id: string;
  phase: number;
  rule_text: string;
  grounding_text: string | null;
  variable_types: Record<string, string[]>;
  label_segments: Record<string, string[]>;
  explanations: ExplanationView[];
}

export interface NextResponse {
  done: boolean;
  item?: WorkItem;
  position?: number;
  total?: number;
}

export interface SessionResponse {
  session_id: string;
  total: number;
}

export interface ProgressResponse {
  completed: number;
  total: number;
}

export interface AnnotationPayload {
  session_id: string;
  item_id: string;
  target: string;
  correctness: number;
  clarity: number;
  m_ent: number;
  m_rel: number;
  h_ent: number;
  h_rel: number;
  logicalness: number;
  preferred?: string;
}
