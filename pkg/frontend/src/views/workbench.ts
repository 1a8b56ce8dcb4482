/** Contrast workbench: sortable per-feature impact table plus the verdict
 * form. Submitting a tag POSTs to /v1/tags and re-lists tags on success;
 * failures render inline without touching state. */

import { ApiClient, ApiError } from "../api.js";
import { ViewState } from "../state.js";
import { ContrastReport, ContrastRow, ExpertTag, VERDICTS } from "../types.js";

type SortKey = keyof Pick<ContrastRow,
  "value" | "count" | "mean_distance" | "median_distance" | "rose" | "fell">;

const COLUMNS: { key: SortKey; label: string }[] = [
  { key: "value", label: "value" },
  { key: "count", label: "count" },
  { key: "mean_distance", label: "mean dist" },
  { key: "median_distance", label: "median dist" },
  { key: "rose", label: "rose" },
  { key: "fell", label: "fell" },
];

function sortRows(rows: ContrastRow[], key: SortKey | null,
                  descending: boolean): ContrastRow[] {
  if (key === null) return rows;  // server order (mean distance descending)
  const sorted = [...rows].sort((a, b) => {
    const av = a[key];
    const bv = b[key];
    const cmp = typeof av === "number" && typeof bv === "number"
      ? av - bv : String(av).localeCompare(String(bv));
    return descending ? -cmp : cmp;
  });
  return sorted;
}

function reportTable(report: ContrastReport, state: ViewState,
                     rerender: () => void,
                     sort: { key: SortKey | null; desc: boolean }): HTMLElement {
  const table = document.createElement("table");
  table.className = "contrast-table";
  const thead = document.createElement("thead");
  const headRow = document.createElement("tr");
  for (const col of COLUMNS) {
    const th = document.createElement("th");
    th.textContent = col.label + (sort.key === col.key ? (sort.desc ? " ↓" : " ↑") : "");
    th.dataset.key = col.key;
    th.addEventListener("click", () => {
      if (sort.key === col.key) {
        sort.desc = !sort.desc;
      } else {
        sort.key = col.key;
        sort.desc = true;
      }
      rerender();
    });
    headRow.appendChild(th);
  }
  thead.appendChild(headRow);
  table.appendChild(thead);

  const tbody = document.createElement("tbody");
  for (const row of sortRows(report.rows, sort.key, sort.desc)) {
    const tr = document.createElement("tr");
    tr.dataset.value = row.value;
    const cells = [row.value, String(row.count), row.mean_distance.toFixed(4),
                   row.median_distance.toFixed(4), String(row.rose), String(row.fell)];
    for (const text of cells) {
      const td = document.createElement("td");
      td.textContent = text;
      tr.appendChild(td);
    }
    tr.addEventListener("click", () => {
      state.tagDraft.key = `${report.meta.feature}=${row.value}`;
      rerender();
    });
    tbody.appendChild(tr);
  }
  table.appendChild(tbody);
  return table;
}

function tagList(tags: ExpertTag[]): HTMLElement {
  const wrap = document.createElement("div");
  wrap.className = "tag-list";
  const heading = document.createElement("h3");
  heading.textContent = `verdicts (${tags.length})`;
  wrap.appendChild(heading);
  const ul = document.createElement("ul");
  for (const tag of tags) {
    const li = document.createElement("li");
    li.className = "tag-item";
    const when = new Date(tag.ts_ms).toISOString();
    li.textContent = `[${tag.verdict}] ${tag.key} — ${tag.author} @ ${when}`
      + (tag.note ? ` — ${tag.note}` : "");
    ul.appendChild(li);
  }
  wrap.appendChild(ul);
  return wrap;
}

function tagForm(api: ApiClient, state: ViewState,
                 onRecorded: () => Promise<void>): HTMLElement {
  const form = document.createElement("form");
  form.className = "tag-form";

  const author = document.createElement("input");
  author.name = "author";
  author.placeholder = "analyst id";
  author.value = state.tagDraft.author;

  const key = document.createElement("input");
  key.name = "key";
  key.placeholder = "feature=value";
  key.value = state.tagDraft.key;

  const verdict = document.createElement("select");
  verdict.name = "verdict";
  const blank = document.createElement("option");
  blank.value = "";
  blank.textContent = "verdict…";
  verdict.appendChild(blank);
  for (const v of VERDICTS) {
    const opt = document.createElement("option");
    opt.value = v;
    opt.textContent = v;
    if (state.tagDraft.verdict === v) opt.selected = true;
    verdict.appendChild(opt);
  }

  const note = document.createElement("input");
  note.name = "note";
  note.placeholder = "note";
  note.value = state.tagDraft.note;

  const submit = document.createElement("button");
  submit.type = "submit";
  submit.textContent = "record verdict";

  const error = document.createElement("span");
  error.className = "form-error";

  form.append(author, key, verdict, note, submit, error);

  form.addEventListener("submit", async (ev) => {
    ev.preventDefault();
    state.tagDraft = {
      author: author.value, key: key.value,
      verdict: verdict.value as typeof state.tagDraft.verdict, note: note.value,
    };
    error.textContent = "";
    try {
      await api.postTag({ author: author.value, key: key.value,
                          verdict: verdict.value, note: note.value });
    } catch (err) {
      error.textContent = err instanceof ApiError
        ? `rejected: ${err.message}` : "tag submission failed";
      return;  // draft and list untouched
    }
    state.tagDraft = { author: author.value, key: "", verdict: "", note: "" };
    await onRecorded();
  });
  return form;
}

export async function renderWorkbench(container: HTMLElement, api: ApiClient,
                                      state: ViewState): Promise<void> {
  const sort: { key: SortKey | null; desc: boolean } = { key: null, desc: true };

  const draw = async () => {
    container.replaceChildren();
    let report: ContrastReport;
    try {
      report = await api.report(state.activeFeature);
    } catch (err) {
      const empty = document.createElement("div");
      empty.className = "empty-state";
      empty.textContent = err instanceof ApiError && err.status === 404
        ? `no contrast report for feature ${state.activeFeature}`
        : "contrast report unavailable";
      container.appendChild(empty);
      return;
    }
    const heading = document.createElement("h2");
    heading.textContent = `impact by ${report.meta.feature}`;
    container.appendChild(heading);
    container.appendChild(reportTable(report, state, () => void draw(), sort));

    const tagsHost = document.createElement("div");
    tagsHost.className = "tags-host";
    const refreshTags = async () => {
      const key = state.tagDraft.key || undefined;
      tagsHost.replaceChildren(tagList(await api.tags(key)));
    };
    container.appendChild(tagForm(api, state, async () => {
      await refreshTags();
    }));
    container.appendChild(tagsHost);
    await refreshTags();
  };
  await draw();
}
