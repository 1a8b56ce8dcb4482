"""Synthetic labeled session generator with planted, recoverable structure.

Sessions are drawn per-archetype from a first-order page-type transition
table with lognormal inter-event gaps. Two kinds of signal can be planted:

* a motif (contiguous page subsequence) whose presence overrides the
  archetype's conversion probability, and
* a shock page type that, when present, multiplies the conversion
  probability by a suppression factor.

Ground truth (archetype, final conversion probability, motif presence,
shock positions) is recorded per session for evaluation only; the training
pipeline never sees it. Every draw funnels through one root seed via
spawned per-session generators, so identical configs give byte-identical
output.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, FormatError
from .ingest import RawEvent

TRUTH_FORMAT = "sessionlens-truth"
FORMAT_VERSION = 1

_PROB_TOL = 1e-9


def _check_dist(name: str, dist: dict) -> None:
    if not dist:
        raise ConfigError(f"{name}: empty distribution")
    total = 0.0
    for key, p in dist.items():
        if not 0.0 <= p <= 1.0:
            raise ConfigError(f"{name}[{key!r}]: probability {p} outside [0,1]")
        total += p
    if abs(total - 1.0) > _PROB_TOL:
        raise ConfigError(f"{name}: probabilities sum to {total}, expected 1")


def _check_prob(name: str, p: float) -> None:
    if not 0.0 <= p <= 1.0:
        raise ConfigError(f"{name}: probability {p} outside [0,1]")


@dataclass(frozen=True)
class ArchetypeSpec:
    """Event-emission parameters for one intent archetype."""

    start: dict                    # initial page distribution
    transitions: dict              # page -> {next page: prob}
    conversion_prob: float
    dwell_log_mean: float = 7.0    # lognormal over gap milliseconds
    dwell_log_sigma: float = 0.8
    min_events: int = 3
    max_events: int = 20
    scroll_prob: float = 0.15      # event_type: scroll instead of click

    def validate(self, name: str) -> None:
        _check_dist(f"archetype {name}.start", self.start)
        for page, row in self.transitions.items():
            _check_dist(f"archetype {name}.transitions[{page!r}]", row)
        _check_prob(f"archetype {name}.conversion_prob", self.conversion_prob)
        _check_prob(f"archetype {name}.scroll_prob", self.scroll_prob)
        if not 1 <= self.min_events <= self.max_events:
            raise ConfigError(f"archetype {name}: bad event-count bounds")


@dataclass(frozen=True)
class MotifSpec:
    """Page subsequence that flips the conversion likelihood when present."""

    pages: tuple
    insert_prob: float
    conversion_prob: float

    def validate(self) -> None:
        if not self.pages:
            raise ConfigError("motif.pages must be non-empty")
        _check_prob("motif.insert_prob", self.insert_prob)
        _check_prob("motif.conversion_prob", self.conversion_prob)


@dataclass(frozen=True)
class ShockSpec:
    """Page type that suppresses conversion when it appears in a session."""

    page_type: str
    insert_prob: float
    suppression: float             # conversion prob multiplier

    def validate(self) -> None:
        _check_prob("shock.insert_prob", self.insert_prob)
        _check_prob("shock.suppression", self.suppression)


@dataclass(frozen=True)
class SimConfig:
    seed: int
    n_sessions: int
    mix: dict                      # archetype name -> probability
    archetypes: dict               # archetype name -> ArchetypeSpec
    motif: MotifSpec | None = None
    shock: ShockSpec | None = None
    categories: tuple = ("music", "sports", "theater", "family")
    base_ts: int = 1451606400000   # 2016-01-01T00:00:00Z
    ts_span_ms: int = 90 * 24 * 3600 * 1000
    shock_rule_enabled: bool = True

    def validate(self) -> None:
        if self.n_sessions < 1:
            raise ConfigError("n_sessions must be >= 1")
        _check_dist("mix", self.mix)
        missing = set(self.mix) - set(self.archetypes)
        if missing:
            raise ConfigError(f"mix references unknown archetypes: {sorted(missing)}")
        for name, spec in self.archetypes.items():
            spec.validate(name)
        if self.motif is not None:
            self.motif.validate()
        if self.shock is not None:
            self.shock.validate()
        if not self.categories:
            raise ConfigError("categories must be non-empty")


@dataclass
class SimResult:
    events: list                   # RawEvent, grouped by session in id order
    labels: dict                   # session_id -> 0/1
    archetypes: dict               # session_id -> archetype name
    shock_positions: dict          # session_id -> list of 0-based indices
    motif_present: dict            # session_id -> bool
    conversion_prob: dict          # session_id -> final probability used


class _Walker:
    """Pre-cumulated transition table for fast seeded page walks."""

    def __init__(self, spec: ArchetypeSpec):
        self.start_pages = sorted(spec.start)
        self.start_cum = np.cumsum([spec.start[p] for p in self.start_pages])
        self.rows = {}
        for page, row in spec.transitions.items():
            nxt = sorted(row)
            self.rows[page] = (nxt, np.cumsum([row[p] for p in nxt]))

    def walk(self, rng, n: int) -> list:
        u = rng.random(n)
        first = min(int(np.searchsorted(self.start_cum, u[0])), len(self.start_pages) - 1)
        pages = [self.start_pages[first]]
        for t in range(1, n):
            nxt, cum = self.rows[pages[-1]]
            pages.append(nxt[min(int(np.searchsorted(cum, u[t])), len(nxt) - 1)])
        return pages


def _contains(pages: list, motif: tuple) -> int:
    """Start index of the first motif occurrence, or -1."""
    m = len(motif)
    for i in range(len(pages) - m + 1):
        if tuple(pages[i:i + m]) == motif:
            return i
    return -1


def generate(config: SimConfig) -> SimResult:
    """Generate the configured sessions; deterministic given config.seed."""
    config.validate()
    names = sorted(config.mix)
    mix_cum = np.cumsum([config.mix[n] for n in names])
    walkers = {n: _Walker(config.archetypes[n]) for n in names}
    seeds = np.random.SeedSequence(config.seed).spawn(config.n_sessions)

    result = SimResult([], {}, {}, {}, {}, {})
    for i in range(config.n_sessions):
        rng = np.random.default_rng(seeds[i])
        sid = f"s{i:06d}"
        name = names[min(int(np.searchsorted(mix_cum, rng.random())), len(names) - 1)]
        spec = config.archetypes[name]
        n_events = int(rng.integers(spec.min_events, spec.max_events + 1))
        pages = walkers[name].walk(rng, n_events)

        if config.motif is not None:
            inserted = rng.random() < config.motif.insert_prob
            pos = int(rng.integers(0, len(pages) + 1))
            if inserted:
                pages = pages[:pos] + list(config.motif.pages) + pages[pos:]
        if config.shock is not None:
            shocked = rng.random() < config.shock.insert_prob
            pos = int(rng.integers(1, max(len(pages), 2)))
            if shocked and len(pages) >= 2:
                pages = pages[:pos] + [config.shock.page_type] + pages[pos:]

        n = len(pages)
        gaps = np.maximum(
            1, np.round(rng.lognormal(spec.dwell_log_mean, spec.dwell_log_sigma,
                                      size=n - 1))).astype(np.int64)
        start_ts = config.base_ts + (i * config.ts_span_ms) // config.n_sessions
        ts = start_ts + np.concatenate([[0], np.cumsum(gaps)])
        category = config.categories[int(rng.integers(0, len(config.categories)))]
        scroll = rng.random(n) < spec.scroll_prob

        motif_at = _contains(pages, config.motif.pages) if config.motif else -1
        shock_at = ([t for t, p in enumerate(pages) if p == config.shock.page_type]
                    if config.shock else [])

        prob = config.motif.conversion_prob if motif_at >= 0 else spec.conversion_prob
        if config.shock is not None and shock_at and config.shock_rule_enabled:
            prob = prob * config.shock.suppression
        label = int(rng.random() < prob)

        for t in range(n):
            result.events.append(RawEvent(
                session_id=sid, ts=int(ts[t]),
                event_type="scroll" if scroll[t] else "click",
                page_type=pages[t], category=category))
        result.labels[sid] = label
        result.archetypes[sid] = name
        result.shock_positions[sid] = shock_at
        result.motif_present[sid] = motif_at >= 0
        result.conversion_prob[sid] = float(prob)
    return result


def with_shock_rule_disabled(config: SimConfig) -> SimConfig:
    """Same stream, label rule off: only the conversion probabilities move."""
    return replace(config, shock_rule_enabled=False)


# ---------------------------------------------------------------------------
# Ground-truth sidecar (session_id keyed, newline-delimited)

def write_ground_truth(result: SimResult, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"format": TRUTH_FORMAT, "version": FORMAT_VERSION},
                            separators=(",", ":")) + "\n")
        for sid in sorted(result.labels):
            rec = {"session_id": sid,
                   "label": result.labels[sid],
                   "archetype": result.archetypes[sid],
                   "conversion_prob": result.conversion_prob[sid],
                   "motif_present": result.motif_present[sid],
                   "shock_positions": result.shock_positions[sid]}
            fh.write(json.dumps(rec, separators=(",", ":")) + "\n")


def load_ground_truth(path) -> dict:
    """session_id -> truth record dict."""
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        header = json.loads(fh.readline())
        if header.get("format") != TRUTH_FORMAT:
            raise FormatError(f"not a ground-truth file: {header.get('format')!r}")
        if header.get("version") != FORMAT_VERSION:
            raise FormatError(f"unsupported ground-truth version {header.get('version')!r}")
        for line in fh:
            line = line.strip()
            if line:
                rec = json.loads(line)
                out[rec["session_id"]] = rec
    return out


# ---------------------------------------------------------------------------
# Ready-made marketplace scenario

PAGES = ("Home", "Search", "Listing", "Item", "Cart", "Checkout",
         "Confirmation", "Help")


def _table(rows: dict) -> dict:
    """Fill one uniform self-loop row for any page missing an explicit row."""
    out = dict(rows)
    for page in PAGES:
        if page not in out:
            out[page] = {page: 1.0}
    return out


def _buyer() -> ArchetypeSpec:
    return ArchetypeSpec(
        start={"Home": 0.6, "Search": 0.4},
        transitions=_table({
            "Home": {"Search": 0.5, "Listing": 0.3, "Item": 0.2},
            "Search": {"Listing": 0.5, "Item": 0.4, "Search": 0.1},
            "Listing": {"Item": 0.6, "Listing": 0.2, "Search": 0.2},
            "Item": {"Cart": 0.45, "Item": 0.2, "Listing": 0.25, "Search": 0.1},
            "Cart": {"Checkout": 0.6, "Item": 0.25, "Listing": 0.15},
            "Checkout": {"Confirmation": 0.7, "Cart": 0.2, "Item": 0.1},
            "Confirmation": {"Home": 0.6, "Item": 0.4},
        }),
        conversion_prob=0.8)


def _browser() -> ArchetypeSpec:
    return ArchetypeSpec(
        start={"Home": 0.5, "Search": 0.3, "Listing": 0.2},
        transitions=_table({
            "Home": {"Search": 0.4, "Listing": 0.4, "Help": 0.2},
            "Search": {"Listing": 0.5, "Search": 0.3, "Home": 0.2},
            "Listing": {"Listing": 0.4, "Item": 0.3, "Search": 0.3},
            "Item": {"Listing": 0.5, "Search": 0.3, "Home": 0.2},
            "Help": {"Home": 0.6, "Search": 0.4},
        }),
        conversion_prob=0.05, scroll_prob=0.35)


def _undecided() -> ArchetypeSpec:
    return ArchetypeSpec(
        start={"Home": 0.4, "Search": 0.4, "Item": 0.2},
        transitions=_table({
            "Home": {"Search": 0.5, "Item": 0.3, "Help": 0.2},
            "Search": {"Item": 0.4, "Listing": 0.3, "Search": 0.3},
            "Listing": {"Item": 0.5, "Search": 0.5},
            "Item": {"Cart": 0.2, "Item": 0.3, "Search": 0.3, "Listing": 0.2},
            "Cart": {"Item": 0.5, "Checkout": 0.2, "Search": 0.3},
            "Checkout": {"Cart": 0.5, "Confirmation": 0.5},
            "Confirmation": {"Home": 1.0},
            "Help": {"Search": 0.5, "Home": 0.5},
        }),
        conversion_prob=0.3)


def marketplace_config(seed: int, n_sessions: int = 1000,
                       mix: dict | None = None,
                       motif: MotifSpec | None = None,
                       shock: ShockSpec | None = None,
                       **overrides) -> SimConfig:
    """Three-archetype ticketing-marketplace scenario used by the CLI demo."""
    return SimConfig(
        seed=seed, n_sessions=n_sessions,
        mix=mix or {"buyer": 0.35, "browser": 0.45, "undecided": 0.2},
        archetypes={"buyer": _buyer(), "browser": _browser(),
                    "undecided": _undecided()},
        motif=motif, shock=shock, **overrides)


def demo_schema():
    """Feature schema matching the marketplace generator's event stream."""
    from .ingest import FeatureSchema, FeatureSpec
    return FeatureSchema(features=(
        FeatureSpec(name="gap_ms", kind="numeric", source="ts", derived="gap"),
        FeatureSpec(name="event_type", kind="categorical", source="event_type",
                    vocabulary=("click", "scroll")),
        FeatureSpec(name="page_type", kind="categorical", source="page_type",
                    vocabulary=PAGES + ("Error",)),
        FeatureSpec(name="category", kind="categorical", source="category",
                    vocabulary=("music", "sports", "theater", "family")),
    ))
