/** Canned /v1 payloads mirroring the service's export shapes, including a
 * planted-shock session whose ground-truth shock index drives the chart
 * marker assertions. */

import type { ContrastReport, EventRecord, IntentCluster, SessionAnalysis } from "../src/types.js";

function ev(page: string, t: number): EventRecord {
  return { ts: 1000 + 900 * t, event_type: "click", page_type: page, category: "music" };
}

export const SHOCK_INDEX = 3;

const shockPages = ["Home", "Search", "Item", "Error", "Listing", "Home"];

export const shockSession: SessionAnalysis = {
  session_id: "s000042",
  label: 0,
  probabilities: [0.82, 0.84, 0.83, 0.07, 0.06, 0.05],
  distances: [0.02, 0.01, 0.76, 0.01, 0.01],
  metric: "absolute",
  events: shockPages.map(ev),
};

export const flatSession: SessionAnalysis = {
  session_id: "s000007",
  label: 1,
  probabilities: [0.5, 0.5, 0.5, 0.5],
  distances: [0.0, 0.0, 0.0],
  metric: "absolute",
  events: ["Home", "Search", "Item", "Cart"].map(ev),
};

export const clusters: IntentCluster[] = [
  { cluster_id: 0, members: ["s000042", "s000051"], centroid: [0.1, -0.2], dispersion: 0.04 },
  { cluster_id: 1, members: ["s000007"], centroid: [-0.4, 0.3], dispersion: 0.0 },
  { cluster_id: 2, members: ["s000090", "s000091", "s000092"], centroid: [0.6, 0.6], dispersion: 0.11 },
];

export const pageTypeReport: ContrastReport = {
  meta: { format: "sessionlens-contrast", version: 1, feature: "page_type",
          generated_at_ms: 1700000000000 },
  rows: [
    { value: "Error", count: 12, mean_distance: 0.71, median_distance: 0.74,
      rose: 0, fell: 12, examples: ["s000042", "s000051"] },
    { value: "Checkout", count: 30, mean_distance: 0.42, median_distance: 0.40,
      rose: 28, fell: 2, examples: ["s000007"] },
    { value: "Search", count: 55, mean_distance: 0.05, median_distance: 0.04,
      rose: 30, fell: 25, examples: ["s000090"] },
  ],
};
