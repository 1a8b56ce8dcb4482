// @vitest-environment happy-dom
import { afterAll, beforeAll, beforeEach, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { initialState, ViewState } from "../src/state.js";
import { renderTrajectoryView } from "../src/views/trajectory.js";
import { flatSession, SHOCK_INDEX, shockSession } from "./fixtures.js";
import { FixtureServer, startFixtureServer } from "./server.js";

let server: FixtureServer;
let api: ApiClient;
let container: HTMLElement;
let state: ViewState;

beforeAll(async () => {
  server = await startFixtureServer();
  api = new ApiClient(server.url);
});

afterAll(async () => {
  await server.close();
});

beforeEach(() => {
  container = document.createElement("div");
  document.body.replaceChildren(container);
  state = initialState();
});

describe("session trajectory view", () => {
  it("renders one chart point per click", async () => {
    state.selectedSession = shockSession.session_id;
    await renderTrajectoryView(container, api, state);
    const points = container.querySelectorAll("circle.series-point");
    expect(points.length).toBe(shockSession.probabilities.length);
  });

  it("marks the planted shock at the ground-truth index", async () => {
    state.selectedSession = shockSession.session_id;
    state.threshold = 0.2;
    await renderTrajectoryView(container, api, state);
    const markers = [...container.querySelectorAll("circle.impact-marker")];
    expect(markers.length).toBe(1);
    expect(markers[0].getAttribute("data-t")).toBe(String(SHOCK_INDEX));
  });

  it("labels each point with its event page type", async () => {
    state.selectedSession = shockSession.session_id;
    await renderTrajectoryView(container, api, state);
    const labels = [...container.querySelectorAll("text.event-label")]
      .map((n) => n.textContent);
    expect(labels).toEqual(shockSession.events.map((e) => e.page_type));
  });

  it("constant predictions draw a flat line with no marks", async () => {
    state.selectedSession = flatSession.session_id;
    state.threshold = 0.1;
    await renderTrajectoryView(container, api, state);
    expect(container.querySelectorAll("circle.impact-marker").length).toBe(0);
    const ys = [...container.querySelectorAll("circle.series-point")]
      .map((n) => n.getAttribute("cy"));
    expect(new Set(ys).size).toBe(1);
  });

  it("threshold slider re-filters impacts client-side", async () => {
    state.selectedSession = shockSession.session_id;
    state.threshold = 0.2;
    await renderTrajectoryView(container, api, state);
    expect(container.querySelectorAll("circle.impact-marker").length).toBe(1);
    const slider = container.querySelector<HTMLInputElement>("input[type=range]")!;
    slider.value = "0.005";
    slider.dispatchEvent(new Event("input"));
    // every distance >= 0.005 now flags its event (all five here)
    expect(container.querySelectorAll("circle.impact-marker").length)
      .toBe(shockSession.distances.length);
    slider.value = "0.9";
    slider.dispatchEvent(new Event("input"));
    expect(container.querySelectorAll("circle.impact-marker").length).toBe(0);
    expect(state.threshold).toBe(0.9);
  });

  it("unknown session shows an empty state, not a crash", async () => {
    state.selectedSession = "nope";
    await renderTrajectoryView(container, api, state);
    const empty = container.querySelector(".empty-state");
    expect(empty?.textContent).toContain("nope");
  });

  it("no selection prompts for a session", async () => {
    await renderTrajectoryView(container, api, state);
    expect(container.querySelector(".empty-state")).toBeTruthy();
  });
});
