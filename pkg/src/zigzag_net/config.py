"""Experiment configuration: JSON files, dotted overrides, validation.

Errors point at the line of the offending key in the source file so that
the command line can report ``line N: ...``.
"""

from __future__ import annotations

import copy
import json
import re
from typing import Any

from .analysis import decompose_rates
from .errors import ConfigError, NotAchievable, ZigZagError
from .network import Topology
from .policies import ACK_KINDS, CODINGS, TX_KINDS, AckPolicy, TransmissionPolicy
from .simulator import ArrivalConfig, SimConfig

EXPERIMENTS = ("delivery", "streaming", "stability_probe", "figure3", "region2d")

DEFAULTS: dict[str, Any] = {
    "experiment": "delivery",
    "seed": 0,
    "trials": 1000,
    "horizon": 1_000_000,
    "max_slots": 100_000,
    "topology": {"senders": 2, "receivers": 1, "edges": None},
    "p": 1 / 3,
    "policy": {
        "tx": "always_on", "q": 1.0, "C": None, "coding": "uncoded", "order": None,
        "ack": "unacked", "ack_order": None, "random_tie": False, "frame": 1000,
        "schedule": None, "inner": None,
    },
    "arrivals": {"kind": "bernoulli", "rates": [], "a_max": 1},
    "probe": {"ray": [1.0, 1.0], "resolution": 0.02},
    "field": "m61",
    "L": 16,
    "u_max": None,
    "random_gains": False,
    "payloads": False,
    "engine": "auto",
    "every": None,
    "scheme": None,
    "output": None,
    "preset": {},
}


class Source:
    """Raw config text, used to map keys back to line numbers."""

    def __init__(self, text: str = "", name: str = "<config>"):
        self.text = text
        self.name = name
        self.lines = text.splitlines()

    def line_of(self, path: str) -> int | None:
        key = path.split(".")[-1]
        pat = re.compile(r'"%s"\s*:' % re.escape(key))
        for n, line in enumerate(self.lines, start=1):
            if pat.search(line):
                return n
        return 1 if self.lines else None


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k not in ("p",):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def parse_text(text: str, name: str = "<config>") -> tuple[dict, Source]:
    src = Source(text, name)
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON: {e.msg}", e.lineno) from None
    if not isinstance(raw, dict):
        raise ConfigError("top level must be a JSON object", 1)
    raw.pop("_meta", None)
    unknown = sorted(set(raw) - set(DEFAULTS))
    if unknown:
        raise ConfigError(f"unknown key {unknown[0]!r}", src.line_of(unknown[0]))
    return raw, src


def load(path: str) -> tuple[dict, Source]:
    with open(path, encoding="utf-8") as fh:
        return parse_text(fh.read(), path)


def apply_overrides(cfg: dict, overrides: list[str]) -> dict:
    """Apply ``a.b.c=value`` overrides; values are parsed as JSON when possible."""
    cfg = copy.deepcopy(cfg)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, _, val = item.partition("=")
        try:
            value = json.loads(val)
        except json.JSONDecodeError:
            value = val
        parts = key.strip().split(".")
        if parts[0] not in DEFAULTS:
            raise ConfigError(f"override {item!r}: unknown key {parts[0]!r}")
        node = cfg
        for p in parts[:-1]:
            nxt = node.get(p)
            if not isinstance(nxt, dict):
                nxt = {}
                node[p] = nxt
            node = nxt
        node[parts[-1]] = value
    return cfg


def resolve(raw: dict, src: Source | None = None) -> dict:
    """Defaults merged with ``raw`` and validated. Returns the resolved dict."""
    src = src or Source()
    cfg = _merge(DEFAULTS, raw)
    validate(cfg, src)
    return cfg


def _fail(src: Source, path: str, msg: str):
    raise ConfigError(f"{path}: {msg}", src.line_of(path))


def _num(src, path, v, lo=None, hi=None, integer=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or (integer and not isinstance(v, int)):
        _fail(src, path, f"expected {'an integer' if integer else 'a number'}, got {v!r}")
    if (lo is not None and v < lo) or (hi is not None and v > hi):
        _fail(src, path, f"value {v} outside [{lo}, {hi}]")
    return v


def validate(cfg: dict, src: Source) -> None:
    if cfg["experiment"] not in EXPERIMENTS:
        _fail(src, "experiment", f"unknown experiment {cfg['experiment']!r}")
    _num(src, "seed", cfg["seed"], 0, integer=True)
    _num(src, "trials", cfg["trials"], 1, integer=True)
    _num(src, "horizon", cfg["horizon"], 1, integer=True)
    _num(src, "max_slots", cfg["max_slots"], 1, integer=True)
    pol = cfg["policy"]
    if pol["tx"] not in TX_KINDS:
        _fail(src, "policy.tx", f"unknown transmission policy {pol['tx']!r}")
    if pol["ack"] not in ACK_KINDS:
        _fail(src, "policy.ack", f"unknown ACK policy {pol['ack']!r}")
    if pol["coding"] not in CODINGS:
        _fail(src, "policy.coding", f"unknown coding {pol['coding']!r}")
    _num(src, "policy.q", pol["q"], 0, 1)
    if pol["C"] is not None:
        _num(src, "policy.C", pol["C"], 1, integer=True)
    _num(src, "policy.frame", pol["frame"], 1, integer=True)
    p = cfg["p"]
    if isinstance(p, list):
        for e in p:
            if not (isinstance(e, list) and len(e) == 3):
                _fail(src, "p", "per-link erasures must be [sender, receiver, p] triples")
            _num(src, "p", e[2], 0, 1)
    else:
        _num(src, "p", p, 0, 1)
    for r in cfg["arrivals"]["rates"]:
        _num(src, "rates", r, 0, 1)
    if cfg["experiment"] in ("delivery", "streaming", "stability_probe"):
        try:
            build_sim(cfg)
            if cfg["experiment"] == "streaming":
                build_arrivals(cfg)
        except ConfigError:
            raise
        except (ZigZagError, ValueError, TypeError, KeyError) as e:
            _fail(src, _blame(e), str(e))
    if cfg["experiment"] == "stability_probe":
        ray = cfg["probe"]["ray"]
        if len(ray) != topology_of(cfg).n_senders or any(r < 0 for r in ray) or sum(ray) <= 0:
            _fail(src, "probe.ray", "ray must be a nonzero nonnegative vector with one entry per sender")


def _blame(e: Exception) -> str:
    msg = str(e).lower()
    for word, path in (("arrival", "arrivals"), ("rate", "rates"), ("topolog", "topology"), ("edge", "edges"),
                       ("sender", "topology"), ("erasure", "p"), ("order", "order"), ("field", "field"),
                       ("offset", "u_max"), ("schedule", "schedule"), ("ack", "ack"), ("access", "q")):
        if word in msg:
            return path
    return "experiment"


def topology_of(cfg: dict) -> Topology:
    t = cfg["topology"]
    if t.get("edges"):
        edges = [tuple(e) for e in t["edges"]]
        ns = max(int(t.get("senders") or 0), 1 + max(i for i, _ in edges))
        nr = max(int(t.get("receivers") or 0), 1 + max(j for _, j in edges))
        return Topology.from_edges(edges, ns, nr)
    return Topology.complete(int(t["senders"]), int(t.get("receivers", 1)))


def _erasures(cfg: dict):
    p = cfg["p"]
    if isinstance(p, list):
        return {(int(i), int(j)): float(v) for i, j, v in p}
    return float(p)


def build_ack(cfg: dict) -> AckPolicy:
    pol = cfg["policy"]
    kind = pol["ack"]
    if kind == "time_shared":
        sched = pol["schedule"]
        if sched == "auto":
            rates = cfg["arrivals"]["rates"]
            if isinstance(cfg["p"], list):
                raise ConfigError("automatic schedule needs one shared erasure probability")
            try:
                parts = decompose_rates(rates, float(cfg["p"]))
            except NotAchievable as e:
                raise ValueError(f"schedule: {e}") from None
            sched = [[list(o), w] for o, w in parts] or [[list(range(len(rates))), 1.0]]
        return AckPolicy(kind, schedule=tuple((tuple(o), w) for o, w in (sched or ())),
                         frame=pol["frame"], random_tie=pol["random_tie"])
    inner = ()
    if kind == "code_ack" and pol["inner"]:
        inner = tuple(AckPolicy(k["kind"], order=tuple(k["order"]) if k.get("order") else None)
                      for k in pol["inner"])
    order = tuple(pol["ack_order"]) if pol["ack_order"] is not None else None
    return AckPolicy(kind, order=order, inner=inner, random_tie=pol["random_tie"], frame=pol["frame"])


def build_sim(cfg: dict) -> SimConfig:
    pol = cfg["policy"]
    tx = TransmissionPolicy(pol["tx"], pol["q"], tuple(pol["order"]) if pol["order"] is not None else None,
                            pol["coding"])
    return SimConfig(topology_of(cfg), _erasures(cfg), tx, build_ack(cfg), pol["C"], cfg["field"], cfg["L"],
                     cfg["u_max"], cfg["random_gains"], cfg["payloads"], cfg["seed"], cfg["max_slots"])


def build_arrivals(cfg: dict) -> ArrivalConfig:
    a = cfg["arrivals"]
    n = topology_of(cfg).n_senders
    if len(a["rates"]) != n:
        raise ValueError(f"arrival rates: expected {n}, got {len(a['rates'])}")
    return ArrivalConfig(tuple(a["rates"]), a["kind"], a["a_max"])
