// @vitest-environment happy-dom
import { afterEach, beforeEach, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { initialState, ViewState } from "../src/state.js";
import { renderWorkbench } from "../src/views/workbench.js";
import { pageTypeReport } from "./fixtures.js";
import { FIXTURE_TOKEN, FixtureServer, startFixtureServer } from "./server.js";

let server: FixtureServer;
let container: HTMLElement;
let state: ViewState;

beforeEach(async () => {
  server = await startFixtureServer();  // fresh tag log per test
  // same-origin so happy-dom's fetch forwards the Authorization header
  (window as unknown as { happyDOM: { setURL(u: string): void } })
    .happyDOM.setURL(server.url);
  container = document.createElement("div");
  document.body.replaceChildren(container);
  state = initialState();
});

afterEach(async () => {
  await server.close();
});

function waitFor(cond: () => boolean, ms = 2000): Promise<void> {
  const started = Date.now();
  return new Promise((resolve, reject) => {
    const tick = () => {
      if (cond()) return resolve();
      if (Date.now() - started > ms) return reject(new Error("waitFor timed out"));
      setTimeout(tick, 10);
    };
    tick();
  });
}

function fillForm(values: { author?: string; key?: string; verdict?: string;
                            note?: string }): void {
  const form = container.querySelector<HTMLFormElement>("form.tag-form")!;
  if (values.author !== undefined)
    form.querySelector<HTMLInputElement>("input[name=author]")!.value = values.author;
  if (values.key !== undefined)
    form.querySelector<HTMLInputElement>("input[name=key]")!.value = values.key;
  if (values.verdict !== undefined)
    form.querySelector<HTMLSelectElement>("select[name=verdict]")!.value = values.verdict;
  if (values.note !== undefined)
    form.querySelector<HTMLInputElement>("input[name=note]")!.value = values.note;
}

describe("contrast workbench", () => {
  it("renders the report rows in server order by default", async () => {
    await renderWorkbench(container, new ApiClient(server.url, FIXTURE_TOKEN), state);
    const values = [...container.querySelectorAll("tbody tr")]
      .map((tr) => (tr as HTMLElement).dataset.value);
    expect(values).toEqual(pageTypeReport.rows.map((r) => r.value));
  });

  it("sorts client-side when a column header is clicked", async () => {
    await renderWorkbench(container, new ApiClient(server.url, FIXTURE_TOKEN), state);
    const countHeader = [...container.querySelectorAll("th")]
      .find((th) => (th as HTMLElement).dataset.key === "count")! as HTMLElement;
    countHeader.click();
    await waitFor(() => {
      const values = [...container.querySelectorAll("tbody tr")]
        .map((tr) => (tr as HTMLElement).dataset.value);
      return values[0] === "Search";  // highest count first (descending)
    });
  });

  it("tag submission round-trips through the service", async () => {
    await renderWorkbench(container, new ApiClient(server.url, FIXTURE_TOKEN), state);
    fillForm({ author: "ana", key: "page_type=Error",
               verdict: "suspected-cause", note: "error page kills conversion" });
    container.querySelector<HTMLFormElement>("form.tag-form")!
      .dispatchEvent(new Event("submit"));
    await waitFor(() => server.tags.length === 1);
    expect(server.tags[0]).toMatchObject({
      author: "ana", key: "page_type=Error", verdict: "suspected-cause",
    });
    // the recorded verdict is re-listed from the server
    await waitFor(() =>
      (container.querySelector(".tag-list h3")?.textContent ?? "").includes("(1)"));
    const item = container.querySelector(".tag-item");
    expect(item?.textContent).toContain("page_type=Error");
    expect(item?.textContent).toContain("ana");
  });

  it("clicking a row prefills the grouping key", async () => {
    await renderWorkbench(container, new ApiClient(server.url, FIXTURE_TOKEN), state);
    const row = container.querySelector<HTMLElement>('tbody tr[data-value="Checkout"]')!;
    row.click();
    await waitFor(() => state.tagDraft.key === "page_type=Checkout");
    // the click also triggers an async re-render with the key prefilled
    await waitFor(() => container
      .querySelector<HTMLInputElement>("input[name=key]")?.value
      === "page_type=Checkout");
  });

  it("auth failure shows an inline error and records nothing", async () => {
    await renderWorkbench(container, new ApiClient(server.url, "wrong-token"), state);
    fillForm({ author: "ana", key: "page_type=Error", verdict: "benign" });
    container.querySelector<HTMLFormElement>("form.tag-form")!
      .dispatchEvent(new Event("submit"));
    await waitFor(() => {
      const err = container.querySelector(".form-error")?.textContent ?? "";
      return err.includes("rejected");
    });
    expect(server.tags.length).toBe(0);
    // form state is untouched so the analyst can fix and resubmit
    expect(container.querySelector<HTMLInputElement>("input[name=key]")!.value)
      .toBe("page_type=Error");
  });

  it("validation failure (missing verdict) is surfaced inline", async () => {
    await renderWorkbench(container, new ApiClient(server.url, FIXTURE_TOKEN), state);
    fillForm({ author: "ana", key: "page_type=Error", verdict: "" });
    container.querySelector<HTMLFormElement>("form.tag-form")!
      .dispatchEvent(new Event("submit"));
    await waitFor(() => {
      const err = container.querySelector(".form-error")?.textContent ?? "";
      return err.includes("verdict");
    });
    expect(server.tags.length).toBe(0);
  });

  it("missing report shows an empty state", async () => {
    state.activeFeature = "nonexistent";
    await renderWorkbench(container, new ApiClient(server.url, FIXTURE_TOKEN), state);
    expect(container.querySelector(".empty-state")?.textContent)
      .toContain("nonexistent");
  });
});
