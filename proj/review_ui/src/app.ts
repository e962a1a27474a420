import { CHECK_NAMES, ReviewApi, type CheckName } from "./api.js";
import { ReviewController, type ReviewState } from "./controller.js";
import { controlEnabled, diffRows, progressBars, type FormField } from "./viewmodel.js";

const CHECK_LABELS: Record<CheckName, string> = {
  classification_correct: "(a) classification correct",
  fix_valid: "(b) fix valid",
  realistic: "(c) realistic",
};

function esc(s: string): string {
  return s.replace(/[&<>"']/g, (c) => ({ "&": "&amp;", "<": "&lt;", ">": "&gt;", '"': "&quot;", "'": "&#39;" })[c]!);
}

function inlineError(state: ReviewState, field: FormField): string {
  const e = state.errors[field];
  if (!e) return "";
  const where = e.line !== null ? ` <span class="err-line">line ${e.line}</span>` : "";
  return `<div class="inline-error" data-field="${field}">${esc(e.message)}${where}</div>`;
}

function renderProgress(state: ReviewState): string {
  if (!state.progress) return "";
  const { overall, perCwe } = progressBars(state.progress);
  const bar = (b: { label: string; done: number; total: number; percent: number }) =>
    `<div class="bar"><span class="bar-label">${esc(b.label)}</span>` +
    `<span class="bar-track"><span class="bar-fill" style="width:${b.percent}%"></span></span>` +
    `<span class="bar-count">${b.done}/${b.total}</span></div>`;
  return `<section class="progress">${bar(overall)}<details><summary>per CWE</summary>${perCwe.map(bar).join("")}</details></section>`;
}

function renderQueue(state: ReviewState, controller: ReviewController): string {
  const q = state.queue;
  if (!q) return `<section class="queue">loading...</section>`;
  if (controller.allReviewed && !state.filter) {
    return `<section class="queue empty"><h2>All reviewed</h2><p>Export the accepted pairs with <code>cwescan assemble</code>.</p></section>`;
  }
  const rows = q.items
    .map(
      (i) =>
        `<li class="${state.current?.id === i.id ? "selected" : ""}"><button data-open="${esc(i.id)}">` +
        `<span class="cwe">${esc(i.cwe)}</span> ${esc(i.id)} <span class="lines">${i.vulnerable_lines}/${i.fixed_lines} lines</span></button></li>`,
    )
    .join("");
  return (
    `<section class="queue"><div class="filter"><label>CWE <input id="filter" placeholder="e.g. CWE-22" value="${esc(state.filter)}"></label>` +
    `<span>${q.total_items} pending</span></div><ol>${rows}</ol>` +
    `<div class="pager"><button data-page="${q.page - 1}" ${q.page <= 1 ? "disabled" : ""}>prev</button>` +
    ` page ${q.page} of ${Math.max(1, q.total_pages)} ` +
    `<button data-page="${q.page + 1}" ${q.page >= q.total_pages ? "disabled" : ""}>next</button></div></section>`
  );
}

function renderDiff(state: ReviewState): string {
  const rows = diffRows(state.current?.diff ?? []);
  const body = rows
    .map((r) => {
      const text = r.segments.map((s) => (s.changed ? `<mark>${esc(s.text)}</mark>` : esc(s.text))).join("");
      return `<tr class="d-${r.kind}"><td class="no">${r.oldNo ?? ""}</td><td class="no">${r.newNo ?? ""}</td><td><pre>${text}</pre></td></tr>`;
    })
    .join("");
  return `<table class="diff">${body}</table>`;
}

function renderDetail(state: ReviewState): string {
  const item = state.current;
  const form = state.form;
  if (!item || !form) return `<section class="detail muted">Select an item from the queue.</section>`;
  const checks = CHECK_NAMES.map((n) => {
    const v = form.checks[n].value;
    const opt = (val: string, label: string, on: boolean) =>
      `<label><input type="radio" name="${n}" value="${val}" ${on ? "checked" : ""}>${label}</label>`;
    return `<div class="check"><span>${CHECK_LABELS[n]}</span>${opt("yes", "yes", v === true)}${opt("no", "no", v === false)}</div>`;
  }).join("");
  const disabled = (k: "accept" | "edit") => (controlEnabled(k, form.checks) && !state.busy ? "" : "disabled");
  return (
    `<section class="detail"><header><h2>${esc(item.cwe.id)} ${esc(item.cwe.name ?? "")}</h2>` +
    `<p class="summary">${esc(item.cwe.summary ?? "")}</p><p class="meta">${esc(item.id)} &middot; ${esc(item.provenance.backend)}</p></header>` +
    `<div class="side-by-side"><div><h3>Vulnerable</h3><textarea id="vulnerable" spellcheck="false">${esc(form.vulnerable)}</textarea>${inlineError(state, "vulnerable")}</div>` +
    `<div><h3>Fixed</h3><textarea id="fixed" spellcheck="false">${esc(form.fixed)}</textarea>${inlineError(state, "fixed")}</div></div>` +
    renderDiff(state) +
    `<div class="checks">${checks}${inlineError(state, "checks")}</div>` +
    `<div class="decide"><input id="reason" placeholder="reason (reject)" value="${esc(form.reason)}">${inlineError(state, "reason")}` +
    `<button data-decide="accept" ${disabled("accept")}>Accept (a)</button>` +
    `<button data-decide="reject" ${state.busy ? "disabled" : ""}>Reject (r)</button>` +
    `<button data-decide="edit" ${disabled("edit")}>Save edit (e)</button>` +
    `<button data-next>Next (n)</button>${inlineError(state, "decision")}</div></section>`
  );
}

function render(root: HTMLElement, state: ReviewState, controller: ReviewController): void {
  const banner = state.banner
    ? `<div class="banner">${esc(state.banner)} <button data-retry>Retry</button></div>`
    : "";
  const notice = state.notice ? `<div class="notice">${esc(state.notice)}</div>` : "";
  root.innerHTML = `${banner}${notice}${renderProgress(state)}<main>${renderQueue(state, controller)}${renderDetail(state)}</main>`;
}

export function mount(root: HTMLElement, base = ""): ReviewController {
  const reviewer = new URLSearchParams(location.search).get("reviewer") ?? "";
  const controller = new ReviewController(new ReviewApi(base), 20, reviewer);
  controller.subscribe((s) => render(root, s, controller));

  root.addEventListener("click", (ev) => {
    const t = (ev.target as HTMLElement).closest("button");
    if (!t) return;
    if (t.dataset.open) void controller.open(t.dataset.open);
    else if (t.dataset.page) void controller.setPage(Number(t.dataset.page));
    else if (t.dataset.decide) void controller.decide(t.dataset.decide as "accept" | "reject" | "edit");
    else if (t.hasAttribute("data-next")) void controller.next();
    else if (t.hasAttribute("data-retry")) void controller.retry();
  });
  root.addEventListener("change", (ev) => {
    const t = ev.target as HTMLInputElement;
    if (t.type === "radio") controller.setCheck(t.name as CheckName, t.value === "yes");
    else if (t.id === "filter") void controller.setFilter(t.value.trim().toUpperCase());
  });
  root.addEventListener("input", (ev) => {
    const t = ev.target as HTMLInputElement | HTMLTextAreaElement;
    // Stored without re-rendering so the caret stays put while typing.
    if (t.id === "reason" && controller.state.form) controller.state.form.reason = t.value;
    else if ((t.id === "vulnerable" || t.id === "fixed") && controller.state.form) controller.state.form[t.id] = t.value;
  });
  document.addEventListener("keydown", (ev) => {
    if (ev.ctrlKey || ev.metaKey || ev.altKey) return;
    const el = document.activeElement;
    const typing = el instanceof HTMLInputElement || el instanceof HTMLTextAreaElement;
    if (ev.key === "Escape" && typing) {
      (el as HTMLElement).blur();
      return;
    }
    void controller.handleKey(ev.key, typing).then((handled) => {
      if (handled) ev.preventDefault();
    });
  });

  void controller.loadQueue().then(() => {
    const first = controller.state.queue?.items[0];
    if (first) void controller.open(first.id);
  });
  return controller;
}

const root = document.getElementById("app");
if (root) mount(root);
