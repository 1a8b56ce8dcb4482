/** App shell: wires the three views to the service client and nav tabs. */

import { ApiClient } from "./api.js";
import { initialState } from "./state.js";
import { renderClusterExplorer } from "./views/clusters.js";
import { renderTrajectoryView } from "./views/trajectory.js";
import { renderWorkbench } from "./views/workbench.js";

type TabName = "trajectory" | "clusters" | "workbench";

export function startApp(root: HTMLElement): void {
  const params = new URLSearchParams(window.location.search);
  const baseUrl = params.get("api")
    ?? localStorage.getItem("sessionlens.api")
    ?? "http://127.0.0.1:8800";
  const token = params.get("token")
    ?? localStorage.getItem("sessionlens.token")
    ?? "";
  localStorage.setItem("sessionlens.api", baseUrl);
  if (token) localStorage.setItem("sessionlens.token", token);

  const api = new ApiClient(baseUrl, token);
  const state = initialState();

  const nav = document.createElement("nav");
  nav.className = "tabs";
  const content = document.createElement("main");
  content.className = "tab-content";
  root.replaceChildren(nav, content);

  const views: Record<TabName, () => Promise<void>> = {
    trajectory: () => renderTrajectoryView(content, api, state),
    clusters: () => renderClusterExplorer(content, api, state, (sid) => {
      state.selectedSession = sid;
      void show("trajectory");
    }),
    workbench: () => renderWorkbench(content, api, state),
  };

  const buttons = new Map<TabName, HTMLButtonElement>();
  const show = async (tab: TabName) => {
    for (const [name, btn] of buttons) btn.classList.toggle("active", name === tab);
    await views[tab]();
  };

  const sessionBox = document.createElement("input");
  sessionBox.placeholder = "session id";
  sessionBox.className = "session-box";
  sessionBox.addEventListener("change", () => {
    state.selectedSession = sessionBox.value.trim() || null;
    void show("trajectory");
  });

  for (const name of ["trajectory", "clusters", "workbench"] as TabName[]) {
    const btn = document.createElement("button");
    btn.textContent = name;
    btn.addEventListener("click", () => void show(name));
    buttons.set(name, btn);
    nav.appendChild(btn);
  }
  nav.appendChild(sessionBox);

  void show("clusters");
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  startApp(document.getElementById("app")!);
}
