/** SVG trajectory chart: probability per click with event labels and
 * impact markers. Pure DOM construction, no chart library. */

import type { SessionAnalysis } from "./types.js";

const SVG_NS = "http://www.w3.org/2000/svg";

export interface ChartOptions {
  width?: number;
  height?: number;
  threshold: number;
}

const MARGIN = { top: 16, right: 16, bottom: 64, left: 44 };

function el(name: string, attrs: Record<string, string | number>): SVGElement {
  const node = document.createElementNS(SVG_NS, name);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, String(v));
  return node;
}

export function trajectoryChart(analysis: SessionAnalysis,
                                opts: ChartOptions): SVGSVGElement {
  const T = analysis.probabilities.length;
  const width = opts.width ?? Math.max(420, 46 * T);
  const height = opts.height ?? 260;
  const innerW = width - MARGIN.left - MARGIN.right;
  const innerH = height - MARGIN.top - MARGIN.bottom;
  const x = (t: number) => MARGIN.left + (T === 1 ? innerW / 2 : (t * innerW) / (T - 1));
  const y = (p: number) => MARGIN.top + (1 - p) * innerH;

  const svg = el("svg", { width, height, viewBox: `0 0 ${width} ${height}` }) as SVGSVGElement;
  svg.classList.add("trajectory-chart");

  // y gridlines at 0, .25, .5, .75, 1
  for (const p of [0, 0.25, 0.5, 0.75, 1]) {
    svg.appendChild(el("line", {
      x1: MARGIN.left, x2: width - MARGIN.right, y1: y(p), y2: y(p),
      class: "grid", stroke: "#e3e8ee", "stroke-width": 1,
    }));
    const label = el("text", {
      x: MARGIN.left - 6, y: y(p) + 3, class: "axis-label",
      "text-anchor": "end", "font-size": 9, fill: "#6a7684",
    });
    label.textContent = p.toFixed(2);
    svg.appendChild(label);
  }

  // probability line
  const points = analysis.probabilities.map((p, t) => `${x(t)},${y(p)}`).join(" ");
  svg.appendChild(el("polyline", {
    points, fill: "none", stroke: "#2a6fb0", "stroke-width": 1.6, class: "series-line",
  }));

  // one dot per click, page-type label underneath
  analysis.probabilities.forEach((p, t) => {
    const dot = el("circle", {
      cx: x(t), cy: y(p), r: 3.5, fill: "#2a6fb0", class: "series-point",
      "data-t": t, "data-probability": p,
    });
    svg.appendChild(dot);
    const label = el("text", {
      x: x(t), y: height - MARGIN.bottom + 14, class: "event-label",
      "font-size": 8, fill: "#4a5560", "text-anchor": "end",
      transform: `rotate(-45 ${x(t)} ${height - MARGIN.bottom + 14})`,
    });
    label.textContent = analysis.events[t]?.page_type ?? "";
    svg.appendChild(label);
  });

  // impact markers: distances[j] >= threshold flags event j+1
  analysis.distances.forEach((d, j) => {
    if (d < opts.threshold) return;
    const t = j + 1;
    svg.appendChild(el("circle", {
      cx: x(t), cy: y(analysis.probabilities[t]), r: 7.5,
      fill: "none", stroke: "#c23b22", "stroke-width": 2,
      class: "impact-marker", "data-t": t, "data-distance": d,
    }));
  });

  return svg;
}
