/** Intent cluster explorer: one row per served cluster, member drill-down,
 * member click opens the session trajectory. */

import { ApiClient } from "../api.js";
import { ViewState } from "../state.js";
import type { IntentCluster } from "../types.js";

export type OpenSession = (sessionId: string) => void;

function clusterRow(cluster: IntentCluster, state: ViewState,
                    openSession: OpenSession): HTMLElement {
  const row = document.createElement("details");
  row.className = "cluster-row";
  row.dataset.clusterId = String(cluster.cluster_id);
  if (state.selectedCluster === cluster.cluster_id) row.open = true;

  const summary = document.createElement("summary");
  summary.textContent = `cluster ${cluster.cluster_id} — `
    + `${cluster.members.length} sessions — dispersion ${cluster.dispersion.toFixed(4)}`;
  summary.addEventListener("click", () => {
    state.selectedCluster = cluster.cluster_id;
  });
  row.appendChild(summary);

  const list = document.createElement("ul");
  list.className = "member-list";
  for (const sid of cluster.members) {
    const item = document.createElement("li");
    const link = document.createElement("a");
    link.href = "#";
    link.className = "member-link";
    link.dataset.sessionId = sid;
    link.textContent = sid;
    link.addEventListener("click", (ev) => {
      ev.preventDefault();
      openSession(sid);
    });
    item.appendChild(link);
    list.appendChild(item);
  }
  row.appendChild(list);
  return row;
}

export async function renderClusterExplorer(container: HTMLElement, api: ApiClient,
                                            state: ViewState,
                                            openSession: OpenSession): Promise<void> {
  container.replaceChildren();
  let clusters: IntentCluster[];
  try {
    clusters = await api.clusters();
  } catch {
    const banner = document.createElement("div");
    banner.className = "retry-banner";
    banner.textContent = "cluster service unreachable ";
    const retry = document.createElement("button");
    retry.textContent = "retry";
    retry.addEventListener("click", () =>
      renderClusterExplorer(container, api, state, openSession));
    banner.appendChild(retry);
    container.appendChild(banner);
    return;
  }
  if (clusters.length === 0) {
    const empty = document.createElement("div");
    empty.className = "empty-state";
    empty.textContent = "no mispredicted sessions were clustered";
    container.appendChild(empty);
    return;
  }
  for (const cluster of clusters) {
    container.appendChild(clusterRow(cluster, state, openSession));
  }
}
