"""One executable for the whole lifecycle:

    sessionlens simulate  -> synthetic event log + ground truth + schema
    sessionlens ingest    -> parsed, sessionized, labeled dataset file
    sessionlens train     -> trained model + loss curve (csv and png)
    sessionlens eval      -> k-steps-before-outcome evaluation report
    sessionlens analyze   -> series/impacts/clusters exports + figures
    sessionlens contrast  -> per-feature impact report (jsonl, txt, png)
    sessionlens serve     -> HTTP service for clients and the dashboard

Every subcommand echoes its effective configuration (seed included) on
stdout. Exit codes: 0 ok, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import analyze as analyze_mod
from . import contrast as contrast_mod
from . import figures, ingest, simgen, train as train_mod
from .dataset import build_dataset, load_dataset, save_dataset
from .errors import SessionlensError
from .ingest import DEFAULT_MAX_EVENTS

log = logging.getLogger(__name__)


def _echo_config(args: argparse.Namespace) -> None:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    print("config: " + json.dumps(cfg, default=str))


def _parse_mix(text: str) -> dict:
    mix = {}
    for part in text.split(","):
        name, _, value = part.partition("=")
        mix[name.strip()] = float(value)
    return mix


def _parse_policy(text: str) -> analyze_mod.ThresholdPolicy:
    kind, _, value = text.partition(":")
    return analyze_mod.ThresholdPolicy(kind, float(value))


# ---------------------------------------------------------------------------
# simulate

def cmd_simulate(args) -> int:
    motif = None
    if args.motif:
        motif = simgen.MotifSpec(pages=tuple(args.motif.split(",")),
                                 insert_prob=args.motif_insert,
                                 conversion_prob=args.motif_conv)
    shock = None
    if args.shock:
        shock = simgen.ShockSpec(page_type=args.shock,
                                 insert_prob=args.shock_insert,
                                 suppression=args.shock_suppression)
    config = simgen.marketplace_config(
        seed=args.seed, n_sessions=args.sessions,
        mix=_parse_mix(args.mix) if args.mix else None,
        motif=motif, shock=shock,
        ts_span_ms=args.span_days * 24 * 3600 * 1000)
    result = simgen.generate(config)
    os.makedirs(args.out, exist_ok=True)
    events_path = os.path.join(args.out, "events.jsonl")
    truth_path = os.path.join(args.out, "truth.jsonl")
    schema_path = os.path.join(args.out, "schema.json")
    ingest.write_events(result.events, events_path)
    simgen.write_ground_truth(result, truth_path)
    ingest.save_schema(simgen.demo_schema(), schema_path)
    n_pos = sum(result.labels.values())
    print(f"simulate: {args.sessions} sessions, {len(result.events)} events, "
          f"{n_pos} conversions -> {events_path}")
    return 0


# ---------------------------------------------------------------------------
# ingest

def cmd_ingest(args) -> int:
    with open(args.events, "r", encoding="utf-8") as fh:
        events, report = ingest.parse_events(fh)
    schema = ingest.load_schema(args.schema)
    labels = {}
    if args.labels:
        truth = simgen.load_ground_truth(args.labels)
        labels = {sid: rec["label"] for sid, rec in truth.items()}
    sessions = ingest.sessionize(events)
    records, quality = build_dataset(sessions, schema, labels,
                                     max_events=args.max_events)
    save_dataset(args.out, schema, records, max_events=args.max_events)
    print(f"ingest: {report.accepted} events ({report.n_rejected} rejected), "
          f"{len(records)} sessions, {len(quality)} quality issues -> {args.out}")
    if report.rejects:
        for line_no, reason in report.rejects[:10]:
            print(f"  rejected line {line_no}: {reason}")
    return 0


# ---------------------------------------------------------------------------
# train

def _labeled(records):
    return [r for r in records if r.label is not None]


def cmd_train(args) -> int:
    schema, records, max_events = load_dataset(args.data)
    labeled = _labeled(records)
    if args.train_windows:
        wanted = set(args.train_windows.split(","))
        labeled, _ = train_mod.split_by_time(labeled, [r.window for r in labeled], wanted)
        windows = sorted(wanted)
    else:
        windows = sorted({r.window for r in labeled})
    sequences = [r.sequence for r in labeled]
    labels = [r.label for r in labeled]
    scaler = ingest.fit_scaler(sequences, schema)
    scaled = [ingest.apply_scaler(s, scaler) for s in sequences]
    hp = train_mod.Hyperparams(hidden_dim=args.hidden, epochs=args.epochs,
                               batch_size=args.batch, pos_weight=args.pos_weight)
    model, curve = train_mod.train_model(
        scaled, labels, hp, args.seed, scaler, schema,
        data_window={"train_windows": windows, "max_events": max_events})
    model = train_mod.TrainedModel(
        lstm=model.lstm, dense=model.dense, scaler=model.scaler,
        schema=model.schema,
        metadata={**model.metadata, "max_events": max_events})
    train_mod.save_model(model, args.out)
    curve_base = os.path.splitext(args.out)[0] + "_loss"
    with open(curve_base + ".csv", "w", encoding="utf-8") as fh:
        fh.write("epoch,mean_loss\n")
        for i, v in enumerate(curve, start=1):
            fh.write(f"{i},{v!r}\n")
    figures.plot_loss_curve(curve, curve_base + ".png")
    final = f"{curve[-1]:.4f}" if curve else "n/a"
    print(f"train: {len(scaled)} sequences, {args.epochs} epochs, "
          f"final loss {final} -> {args.out}")
    return 0


# ---------------------------------------------------------------------------
# eval

def _select_records(records, windows_arg):
    if not windows_arg:
        return records
    wanted = set(windows_arg.split(","))
    return [r for r in records if r.window in wanted]


def cmd_eval(args) -> int:
    model = train_mod.load_model(args.model)
    _, records, _ = load_dataset(args.data)
    records = _labeled(_select_records(records, args.windows))
    sequences = [r.sequence for r in records]
    labels = [r.label for r in records]
    report = train_mod.evaluate_at_k(model, sequences, labels, k=args.k,
                                     threshold=args.threshold)
    out = report.to_dict()
    try:
        scores = [model.predict_at_k(seq, args.k) for seq in sequences
                  if seq.length > args.k]
        kept_labels = [y for seq, y in zip(sequences, labels) if seq.length > args.k]
        out["auc"] = train_mod.roc_auc(kept_labels, scores)
    except SessionlensError:
        out["auc"] = None
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(out, fh, indent=2)
            fh.write("\n")
    print(f"eval: k={args.k} n={report.total} excluded={report.excluded} "
          f"accuracy={report.accuracy:.4f} precision={report.precision:.4f} "
          f"recall={report.recall:.4f} auc={out['auc']}")
    return 0


# ---------------------------------------------------------------------------
# analyze

def cmd_analyze(args) -> int:
    model = train_mod.load_model(args.model)
    _, records, _ = load_dataset(args.data)
    records = _select_records(records, args.windows)
    analyses = analyze_mod.analyze_sessions(model, records, metric=args.metric)
    policy = _parse_policy(args.threshold_policy)
    threshold = analyze_mod.resolve_threshold(analyses, policy)
    impacts = analyze_mod.rank_impacts(analyses, policy)

    os.makedirs(args.out, exist_ok=True)
    series_path = os.path.join(args.out, "series.jsonl")
    impacts_path = os.path.join(args.out, "impacts.jsonl")
    analyze_mod.write_series(analyses, series_path)
    analyze_mod.write_impacts(impacts, impacts_path, policy, threshold)

    labeled = _labeled(records)
    cluster_note = "no labeled sessions; clustering skipped"
    if labeled:
        part = analyze_mod.confusion_partition(
            model, [r.sequence for r in labeled], [r.label for r in labeled],
            threshold=args.decision_threshold)
        wrong = [r.sequence for r in labeled if r.session_id in part.mispredicted]
        if len(wrong) >= args.clusters:
            clusters = analyze_mod.cluster_mispredicted(
                model, wrong, k=args.clusters, seed=args.seed)
            analyze_mod.write_clusters(clusters, os.path.join(args.out, "clusters.jsonl"))
            cluster_note = (f"{len(wrong)} mispredictions -> {args.clusters} clusters")
            if args.clusters >= 2 and len(wrong) > args.clusters:
                points = np.vstack([model.embedding(s) for s in wrong])
                assign = np.concatenate([
                    np.full(len(c.members), c.cluster_id) for c in clusters])
                ordered = [m for c in clusters for m in c.members]
                lookup = {sid: i for i, sid in enumerate(s.session_id for s in wrong)}
                perm = [lookup[sid] for sid in ordered]
                sil = analyze_mod.silhouette_score(points[perm], assign)
                cluster_note += f" (silhouette {sil:.3f}; advisory for choosing k)"
        else:
            cluster_note = (f"only {len(wrong)} mispredictions; "
                            f"fewer than k={args.clusters}, clustering skipped")

    fig_dir = os.path.join(args.out, "figures")
    os.makedirs(fig_dir, exist_ok=True)
    figures.plot_distance_histogram(
        analyses, threshold, os.path.join(fig_dir, "distances.png"))
    by_peak = sorted([a for a in analyses if len(a.distances.distances)],
                     key=lambda a: -float(np.max(a.distances.distances)))
    for a in by_peak[:args.figures]:
        figures.plot_trajectory(
            a, os.path.join(fig_dir, f"session_{a.session_id}.png"),
            threshold=threshold)

    print(f"analyze: {len(analyses)} sessions, threshold {threshold:.4f} "
          f"({policy.kind}:{policy.value:g}), {len(impacts)} impact events; "
          f"{cluster_note} -> {args.out}")
    return 0


# ---------------------------------------------------------------------------
# contrast

def cmd_contrast(args) -> int:
    _, impacts = analyze_mod.read_impacts(args.impacts)
    report = contrast_mod.aggregate_impacts(impacts, args.feature)
    os.makedirs(args.out, exist_ok=True)
    base = os.path.join(args.out, f"contrast_{args.feature}")
    contrast_mod.write_report(report, base + ".jsonl")
    with open(base + ".txt", "w", encoding="utf-8") as fh:
        fh.write(contrast_mod.render_report(report, fmt="plain"))
    figures.plot_contrast(report, base + ".png")
    print(contrast_mod.render_report(report, fmt="plain"), end="")
    print(f"contrast: {len(report.rows)} groups -> {base}.jsonl")
    return 0


# ---------------------------------------------------------------------------
# serve

def cmd_serve(args) -> int:
    from . import serve as serve_mod

    token = args.token or os.environ.get("SESSIONLENS_TOKEN", "change-me")
    state = serve_mod.build_state(model_path=args.model, export_dir=args.exports,
                                  tags_path=args.tags, token=token)
    print(f"serve: listening on {args.host}:{args.port} "
          f"(model={args.model}, exports={args.exports})")
    serve_mod.run(args.host, args.port, state)
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sessionlens", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate a synthetic labeled event log")
    sim.add_argument("--out", required=True)
    sim.add_argument("--seed", type=int, default=7)
    sim.add_argument("--sessions", type=int, default=1000)
    sim.add_argument("--mix", default=None,
                     help="archetype mix, e.g. buyer=0.35,browser=0.45,undecided=0.2")
    sim.add_argument("--span-days", type=int, default=90)
    sim.add_argument("--motif", default="Item,Cart,Checkout",
                     help="comma-joined motif pages; empty string disables")
    sim.add_argument("--motif-insert", type=float, default=0.35)
    sim.add_argument("--motif-conv", type=float, default=0.9)
    sim.add_argument("--shock", default="Error",
                     help="shock page type; empty string disables")
    sim.add_argument("--shock-insert", type=float, default=0.25)
    sim.add_argument("--shock-suppression", type=float, default=0.1)
    sim.set_defaults(func=cmd_simulate)

    ing = sub.add_parser("ingest", help="parse + sessionize events into a dataset")
    ing.add_argument("--events", required=True)
    ing.add_argument("--schema", required=True)
    ing.add_argument("--labels", default=None, help="ground-truth sidecar file")
    ing.add_argument("--out", required=True)
    ing.add_argument("--max-events", type=int, default=DEFAULT_MAX_EVENTS)
    ing.set_defaults(func=cmd_ingest)

    tr = sub.add_parser("train", help="train the outcome predictor")
    tr.add_argument("--data", required=True)
    tr.add_argument("--out", required=True)
    tr.add_argument("--train-windows", default=None,
                    help="comma-joined month tags; default all labeled data")
    tr.add_argument("--seed", type=int, default=7)
    tr.add_argument("--hidden", type=int, default=32)
    tr.add_argument("--epochs", type=int, default=10)
    tr.add_argument("--batch", type=int, default=32)
    tr.add_argument("--pos-weight", type=float, default=1.0)
    tr.set_defaults(func=cmd_train)

    ev = sub.add_parser("eval", help="evaluate k steps before the outcome")
    ev.add_argument("--model", required=True)
    ev.add_argument("--data", required=True)
    ev.add_argument("--windows", default=None)
    ev.add_argument("--k", type=int, default=1)
    ev.add_argument("--threshold", type=float, default=0.5)
    ev.add_argument("--out", default=None)
    ev.set_defaults(func=cmd_eval)

    an = sub.add_parser("analyze", help="per-click series, impacts, clusters")
    an.add_argument("--model", required=True)
    an.add_argument("--data", required=True)
    an.add_argument("--windows", default=None)
    an.add_argument("--out", required=True)
    an.add_argument("--metric", default="absolute")
    an.add_argument("--threshold-policy", default="percentile:95",
                    help="absolute:X or percentile:P")
    an.add_argument("--decision-threshold", type=float, default=0.5)
    an.add_argument("--clusters", type=int, default=4)
    an.add_argument("--seed", type=int, default=7)
    an.add_argument("--figures", type=int, default=6,
                    help="trajectory figures for the N spikiest sessions")
    an.set_defaults(func=cmd_analyze)

    co = sub.add_parser("contrast", help="aggregate impacts by a feature")
    co.add_argument("--impacts", required=True)
    co.add_argument("--feature", required=True)
    co.add_argument("--out", required=True)
    co.set_defaults(func=cmd_contrast)

    sv = sub.add_parser("serve", help="run the prediction/analysis service")
    sv.add_argument("--model", default=None)
    sv.add_argument("--exports", default=None)
    sv.add_argument("--tags", default=None)
    sv.add_argument("--host", default="127.0.0.1")
    sv.add_argument("--port", type=int, default=8800)
    sv.add_argument("--token", default=None,
                    help="tag-write token; defaults to $SESSIONLENS_TOKEN")
    sv.set_defaults(func=cmd_serve)
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("SESSIONLENS_LOG", "WARNING"))
    parser = build_parser()
    args = parser.parse_args(argv)
    _echo_config(args)
    try:
        return args.func(args)
    except SessionlensError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
