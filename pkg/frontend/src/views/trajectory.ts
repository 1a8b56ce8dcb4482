/** Session trajectory view: per-click prediction chart with a client-side
 * threshold slider that re-marks impact events from the served distances. */

import { ApiClient, ApiError } from "../api.js";
import { trajectoryChart } from "../charts.js";
import { impactIndices, ViewState } from "../state.js";
import type { SessionAnalysis } from "../types.js";

function emptyState(message: string): HTMLElement {
  const div = document.createElement("div");
  div.className = "empty-state";
  div.textContent = message;
  return div;
}

function chartBlock(analysis: SessionAnalysis, state: ViewState): HTMLElement {
  const wrap = document.createElement("div");
  wrap.className = "chart-block";

  const meta = document.createElement("p");
  meta.className = "session-meta";
  const outcome = analysis.label === null ? "unlabeled"
    : analysis.label === 1 ? "converted" : "did not convert";
  meta.textContent = `session ${analysis.session_id} — ${analysis.events.length} clicks — ${outcome}`;
  wrap.appendChild(meta);

  const chartHost = document.createElement("div");
  chartHost.className = "chart-host";
  wrap.appendChild(chartHost);

  const controls = document.createElement("label");
  controls.className = "threshold-control";
  controls.textContent = "impact threshold ";
  const slider = document.createElement("input");
  slider.type = "range";
  slider.min = "0";
  slider.max = "1";
  slider.step = "0.01";
  slider.value = String(state.threshold);
  const readout = document.createElement("span");
  readout.className = "threshold-readout";
  controls.appendChild(slider);
  controls.appendChild(readout);
  wrap.appendChild(controls);

  const redraw = () => {
    state.threshold = Number(slider.value);
    readout.textContent = ` ${state.threshold.toFixed(2)} `
      + `(${impactIndices(analysis, state.threshold).length} impacts)`;
    chartHost.replaceChildren(trajectoryChart(analysis, { threshold: state.threshold }));
  };
  slider.addEventListener("input", redraw);
  redraw();
  return wrap;
}

export async function renderTrajectoryView(container: HTMLElement, api: ApiClient,
                                           state: ViewState): Promise<void> {
  container.replaceChildren();
  if (!state.selectedSession) {
    container.appendChild(emptyState("pick a session to see its trajectory"));
    return;
  }
  try {
    const analysis = await api.sessionAnalysis(state.selectedSession);
    container.appendChild(chartBlock(analysis, state));
  } catch (err) {
    if (err instanceof ApiError && err.status === 404) {
      container.appendChild(emptyState(
        `no analysis for session ${state.selectedSession}`));
      return;
    }
    throw err;
  }
}
