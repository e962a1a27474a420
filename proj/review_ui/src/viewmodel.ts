// Pure view logic: decision gating, diff rows, progress, shortcuts. No DOM here.

import { CHECK_NAMES, type CheckName, type Checks, type DecisionPayload, type DiffHunk, type Progress } from "./api.js";

export type DecisionKind = "accept" | "reject" | "edit";

export interface DecisionForm {
  kind: DecisionKind;
  checks: Checks;
  reason: string;
  original: { vulnerable: string; fixed: string };
  vulnerable: string;
  fixed: string;
  reviewer?: string;
}

// Field a message belongs to, so errors render next to the right control.
export type FormField = "checks" | "reason" | "vulnerable" | "fixed" | "decision";

export type Gate = { ok: true; payload: DecisionPayload } | { ok: false; field: FormField; message: string };

export function emptyChecks(): Checks {
  return {
    classification_correct: { value: null, note: "" },
    fix_valid: { value: null, note: "" },
    realistic: { value: null, note: "" },
  };
}

export function checksRecorded(checks: Checks): boolean {
  return CHECK_NAMES.every((n) => checks[n].value !== null);
}

export function checksPass(checks: Checks): boolean {
  return CHECK_NAMES.every((n) => checks[n].value === true);
}

// Accept and edit stay disabled until every check is explicitly set; reject only needs a reason.
export function controlEnabled(kind: DecisionKind, checks: Checks): boolean {
  return kind === "reject" ? true : checksRecorded(checks) && checksPass(checks);
}

function checksPayload(checks: Checks): DecisionPayload["checks"] {
  const out: NonNullable<DecisionPayload["checks"]> = {};
  for (const n of CHECK_NAMES) {
    if (checks[n].value !== null || checks[n].note) out[n] = { value: checks[n].value, note: checks[n].note };
  }
  return out;
}

// Mirrors the server's gate so a payload it would refuse is never sent.
export function gateDecision(form: DecisionForm): Gate {
  const reviewer = form.reviewer?.trim() ? { reviewer: form.reviewer.trim() } : {};
  if (form.kind === "reject") {
    if (!form.reason.trim()) return { ok: false, field: "reason", message: "a reject needs a reason" };
    return { ok: true, payload: { checks: checksPayload(form.checks), decision: { kind: "reject", reason: form.reason, ...reviewer } } };
  }
  if (!checksRecorded(form.checks)) {
    const missing = CHECK_NAMES.filter((n) => form.checks[n].value === null).join(", ");
    return { ok: false, field: "checks", message: "record every check first (missing: " + missing + ")" };
  }
  if (!checksPass(form.checks)) {
    return { ok: false, field: "checks", message: "a failed check means reject, not " + form.kind };
  }
  if (form.kind === "accept") {
    return { ok: true, payload: { checks: checksPayload(form.checks), decision: { kind: "accept", ...reviewer } } };
  }
  const decision: DecisionPayload["decision"] = { kind: "edit", ...reviewer };
  for (const side of ["vulnerable", "fixed"] as const) {
    if (form[side] !== form.original[side]) {
      if (!form[side].trim()) return { ok: false, field: side, message: side + " snippet is empty" };
      decision[side] = form[side];
    }
  }
  if (decision.vulnerable === undefined && decision.fixed === undefined) {
    return { ok: false, field: "decision", message: "nothing was edited; use accept instead" };
  }
  if (form.vulnerable === form.fixed) return { ok: false, field: "fixed", message: "pair not distinct" };
  return { ok: true, payload: { checks: checksPayload(form.checks), decision } };
}

// Maps a server validation message onto the control it concerns.
export function fieldForServerError(message: string): FormField {
  if (/\(vulnerable snippet\)|^vulnerable snippet/.test(message)) return "vulnerable";
  if (/\(fixed snippet\)|^fixed snippet|not distinct/.test(message)) return "fixed";
  if (/reason/.test(message)) return "reason";
  if (/check/.test(message)) return "checks";
  return "decision";
}

export function errorLine(message: string): number | null {
  const m = /line (\d+)/.exec(message);
  return m ? Number(m[1]) : null;
}

export interface Segment {
  text: string;
  changed: boolean;
}

export interface DiffRow {
  kind: "hunk" | "equal" | "delete" | "insert";
  oldNo: number | null;
  newNo: number | null;
  segments: Segment[];
}

// Splits a replaced line pair into common prefix, changed middle and common suffix.
export function intraLine(before: string, after: string): [Segment[], Segment[]] {
  let p = 0;
  while (p < before.length && p < after.length && before[p] === after[p]) p++;
  let s = 0;
  while (s < before.length - p && s < after.length - p && before[before.length - 1 - s] === after[after.length - 1 - s]) s++;
  const split = (t: string): Segment[] =>
    [
      { text: t.slice(0, p), changed: false },
      { text: t.slice(p, t.length - s), changed: true },
      { text: t.slice(t.length - s), changed: false },
    ].filter((x) => x.text.length > 0);
  return [split(before), split(after)];
}

// Rows for rendering the server-provided hunks; deletions followed by insertions
// are paired line by line for intra-line highlighting.
export function diffRows(hunks: DiffHunk[]): DiffRow[] {
  const rows: DiffRow[] = [];
  for (const h of hunks) {
    rows.push({
      kind: "hunk",
      oldNo: null,
      newNo: null,
      segments: [{ text: `@@ -${h.old_start},${h.old_count} +${h.new_start},${h.new_count} @@`, changed: false }],
    });
    let oldNo = h.old_start;
    let newNo = h.new_start;
    let i = 0;
    while (i < h.lines.length) {
      const line = h.lines[i];
      if (line.op === "equal") {
        rows.push({ kind: "equal", oldNo: oldNo++, newNo: newNo++, segments: [{ text: line.text, changed: false }] });
        i++;
        continue;
      }
      const dels: string[] = [];
      const ins: string[] = [];
      while (i < h.lines.length && h.lines[i].op === "delete") dels.push(h.lines[i++].text);
      while (i < h.lines.length && h.lines[i].op === "insert") ins.push(h.lines[i++].text);
      const paired = Math.min(dels.length, ins.length);
      const delSegs: Segment[][] = dels.map((t) => [{ text: t, changed: true }]);
      const insSegs: Segment[][] = ins.map((t) => [{ text: t, changed: true }]);
      for (let k = 0; k < paired; k++) [delSegs[k], insSegs[k]] = intraLine(dels[k], ins[k]);
      for (const segs of delSegs) rows.push({ kind: "delete", oldNo: oldNo++, newNo: null, segments: segs });
      for (const segs of insSegs) rows.push({ kind: "insert", oldNo: null, newNo: newNo++, segments: segs });
    }
  }
  return rows;
}

export interface ProgressBar {
  label: string;
  done: number;
  total: number;
  percent: number;
}

export function progressBars(progress: Progress): { overall: ProgressBar; perCwe: ProgressBar[] } {
  const bar = (label: string, c: Progress["total"]): ProgressBar => {
    const done = c.accepted + c.edited_then_accepted + c.rejected;
    const total = done + c.pending;
    return { label, done, total, percent: total === 0 ? 100 : Math.round((1000 * done) / total) / 10 };
  };
  return {
    overall: bar("all", progress.total),
    perCwe: Object.entries(progress.per_cwe).map(([cwe, c]) => bar(cwe, c)),
  };
}

export type ShortcutAction =
  | { type: "decide"; kind: DecisionKind }
  | { type: "next" }
  | { type: "previous" }
  | { type: "toggle"; check: CheckName };

// Single-key shortcuts; ignored while typing into a field.
export function shortcutAction(key: string, typing: boolean): ShortcutAction | null {
  if (typing) return null;
  switch (key) {
    case "a":
      return { type: "decide", kind: "accept" };
    case "r":
      return { type: "decide", kind: "reject" };
    case "e":
      return { type: "decide", kind: "edit" };
    case "n":
    case "j":
      return { type: "next" };
    case "p":
    case "k":
      return { type: "previous" };
    case "1":
      return { type: "toggle", check: "classification_correct" };
    case "2":
      return { type: "toggle", check: "fix_valid" };
    case "3":
      return { type: "toggle", check: "realistic" };
    default:
      return null;
  }
}

// Unset -> yes -> no -> unset.
export function cycleCheck(value: boolean | null): boolean | null {
  return value === null ? true : value ? false : null;
}
