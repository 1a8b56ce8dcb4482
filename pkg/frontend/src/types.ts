/** Payload shapes served by the sessionlens /v1 API. */

export interface EventRecord {
  ts: number;
  event_type: string;
  page_type: string;
  category: string;
  [extra: string]: string | number;
}

export interface SessionAnalysis {
  session_id: string;
  label: number | null;
  probabilities: number[];
  distances: number[];
  metric: string;
  events: EventRecord[];
}

export interface IntentCluster {
  cluster_id: number;
  members: string[];
  centroid: number[];
  dispersion: number;
}

export interface ContrastRow {
  value: string;
  count: number;
  mean_distance: number;
  median_distance: number;
  rose: number;
  fell: number;
  examples: string[];
}

export interface ContrastReport {
  meta: { format: string; version: number; feature: string; generated_at_ms: number };
  rows: ContrastRow[];
}

export interface ExpertTag {
  author: string;
  key: string;
  verdict: string;
  note: string;
  ts_ms: number;
}

export type Verdict = "suspected-cause" | "benign" | "needs-data";

export const VERDICTS: Verdict[] = ["suspected-cause", "benign", "needs-data"];
