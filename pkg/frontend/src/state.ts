/** Dashboard view state: selections, the threshold slider, a tag draft.
 *
 * The dashboard renders only data fetched from the service; the one piece
 * of client-side computation is re-filtering the served distance series
 * against the slider threshold, so the analyst can explore thresholds
 * without a server round-trip.
 */

import type { SessionAnalysis, Verdict } from "./types.js";

export interface TagDraft {
  author: string;
  key: string;
  verdict: Verdict | "";
  note: string;
}

export interface ViewState {
  selectedSession: string | null;
  selectedCluster: number | null;
  activeFeature: string;
  threshold: number;
  tagDraft: TagDraft;
}

export function initialState(): ViewState {
  return {
    selectedSession: null,
    selectedCluster: null,
    activeFeature: "page_type",
    threshold: 0.2,
    tagDraft: { author: "", key: "", verdict: "", note: "" },
  };
}

/** Indices of events whose arrival moved the prediction by >= threshold.
 * distances[j] sits between prefixes j and j+1, so the event index is j+1. */
export function impactIndices(analysis: SessionAnalysis, threshold: number): number[] {
  const out: number[] = [];
  analysis.distances.forEach((d, j) => {
    if (d >= threshold) out.push(j + 1);
  });
  return out;
}
