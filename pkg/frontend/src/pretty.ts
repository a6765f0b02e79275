// Display helpers: expand predicate-label paths into readable phrases
// while keeping the raw label available for hover titles.

export interface LabelView {
  raw: string;
  pretty: string;
  concatenated: boolean;
}

function segments(path: string): string[] | null {
  if (!path.startsWith("/")) return null;
  const parts = path.slice(1).split("/");
  if (parts.length < 3 || parts.slice(0, 3).some((p) => p.length === 0)) {
    return null;
  }
  return [parts[0], parts[1], parts.slice(2).join("/")];
}

function humanize(segment: string): string {
  return segment.replace(/_/g, " ");
}

export function prettyLabel(raw: string): LabelView {
  const marker = raw.indexOf("./");
  if (marker >= 0) {
    const first = segments(raw.slice(0, marker));
    const second = segments("/" + raw.slice(marker + 2));
    if (first && second) {
      return {
        raw,
        pretty: `${humanize(first[2])} → ${humanize(second[2])}`,
        concatenated: true,
      };
    }
  }
  const parts = segments(raw);
  if (parts) {
    return { raw, pretty: humanize(parts[2]), concatenated: false };
  }
  return { raw, pretty: humanize(raw), concatenated: false };
}

export interface RuleToken {
  text: string;
  kind: "variable" | "entity" | "relation" | "arrow";
  title?: string;
}

/** Tokenize a rule line for rendering; relations get pretty text + raw title. */
export function tokenizeRule(ruleText: string): RuleToken[] {
  const tokens = ruleText.split(/\s+/).filter((t) => t.length > 0);
  const out: RuleToken[] = [];
  let pos = 0; // position within the current (subject, predicate, object) atom
  for (const token of tokens) {
    if (token === "=>") {
      out.push({ text: "⇒", kind: "arrow" });
      pos = 0;
      continue;
    }
    if (pos === 1) {
      const view = prettyLabel(token);
      out.push({ text: view.pretty, kind: "relation", title: view.raw });
    } else if (token.startsWith("?")) {
      out.push({ text: token, kind: "variable" });
    } else {
      out.push({ text: token.replace(/_/g, " "), kind: "entity" });
    }
    pos = (pos + 1) % 3;
  }
  return out;
}
