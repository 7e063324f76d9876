"""Command-line front end.

    zigzag-net run CONFIG_OR_PRESET [key=value ...] [--out PATH]
    zigzag-net validate CONFIG [key=value ...]
    zigzag-net list-presets

Exit codes: 0 success, 2 invalid configuration, 3 horizon exceeded.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

from . import __version__, analysis
from .config import apply_overrides, build_arrivals, build_sim, load, parse_text, resolve
from .errors import ConfigError, Diverges, HorizonExceeded
from .presets import PRESETS, figure3_rows, region2d_rows
from .simulator import run_delivery, run_streaming, stability_probe

EXIT_OK, EXIT_CONFIG, EXIT_HORIZON = 0, 2, 3

DELIVERY_COLUMNS = ("scheme", "n", "p", "q", "C", "mean_T", "ci95", "formula_T")
STREAMING_COLUMNS = ("t", "sender", "queue_len")
PROBE_COLUMNS = ("ray", "boundary_scale", "resolution")
SCHEMAS = {"delivery": 1, "streaming": 1, "probe": 1}


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (tuple, list)):
        return ";".join(_fmt(x) for x in v)
    return str(v)


def write_csv(path: str, columns, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in columns])


# experiments ----------------------------------------------------------------


def _scheme_label(cfg: dict) -> str:
    if cfg["scheme"]:
        return str(cfg["scheme"])
    pol = cfg["policy"]
    if pol["tx"] == "centralized":
        return "centralized"
    if pol["tx"] == "random_access":
        return "random_access" if pol["C"] == 1 else "zigzag_ra"
    return "zigzag"


def _formula(cfg: dict, n: int) -> float | str:
    if isinstance(cfg["p"], list):
        return ""
    p, pol = float(cfg["p"]), cfg["policy"]
    try:
        if pol["tx"] == "centralized":
            return analysis.et_centralized(n, p)
        if pol["tx"] == "random_access":
            if pol["C"] == 1:
                return analysis.et_random_access(n, p, pol["q"])
            return analysis.et_zigzag_ra(n, p, pol["q"], pol["C"])
        if pol["C"] is None or pol["C"] >= n:
            return analysis.et_zigzag(n, p)
        return analysis.et_zigzag_ra(n, p, 1.0, pol["C"])
    except Diverges:
        return "inf"


def delivery_rows(cfg: dict, workers=None) -> list[dict]:
    sim = build_sim(cfg)
    st = run_delivery(sim, cfg["trials"], engine=cfg["engine"], workers=workers)
    topo = sim.topology
    rows = []
    for j in range(topo.n_receivers):
        n = len(topo.in_neighbors(j))
        label = _scheme_label(cfg) + (f"/r{j}" if topo.n_receivers > 1 else "")
        rows.append({"scheme": label, "n": n, "p": cfg["p"] if not isinstance(cfg["p"], list) else "links",
                     "q": sim.tx.access_prob, "C": "" if sim.C is None else sim.C,
                     "mean_T": st.mean(j), "ci95": st.ci95(j), "formula_T": _formula(cfg, n)})
    return rows


def streaming_rows(cfg: dict) -> list[dict]:
    st = run_streaming(build_sim(cfg), build_arrivals(cfg), cfg["horizon"], engine=cfg["engine"],
                       every=cfg["every"])
    rows = []
    for t, snap in zip(st.times, st.snapshots):
        for i, qlen in enumerate(snap):
            rows.append({"t": int(t), "sender": i, "queue_len": int(qlen)})
    return rows


def probe_rows(cfg: dict) -> list[dict]:
    res = float(cfg["probe"].get("resolution", 0.02))
    r = stability_probe(build_sim(cfg), cfg["probe"]["ray"], res, cfg["horizon"], engine=cfg["engine"])
    return [{"ray": [float(x) for x in r.ray], "boundary_scale": r.boundary_scale, "resolution": res}]


def execute(cfg: dict, out: str | None = None, workers=None) -> list[str]:
    """Run a resolved config; returns the written file paths (CSV files, then the manifest)."""
    kind = cfg["experiment"]
    path = out or cfg["output"] or f"{kind}.csv"
    stem = path[:-4] if path.endswith(".csv") else path
    written = []
    if kind == "delivery":
        write_csv(path, DELIVERY_COLUMNS, delivery_rows(cfg, workers))
        written.append(path)
    elif kind == "figure3":
        write_csv(path, DELIVERY_COLUMNS, figure3_rows(cfg, workers))
        written.append(path)
    elif kind == "streaming":
        write_csv(path, STREAMING_COLUMNS, streaming_rows(cfg))
        written.append(path)
    elif kind == "stability_probe":
        write_csv(path, PROBE_COLUMNS, probe_rows(cfg))
        written.append(path)
    elif kind == "region2d":
        for name, rows in region2d_rows(cfg).items():
            pth = f"{stem}_{name}.csv"
            write_csv(pth, PROBE_COLUMNS, rows)
            written.append(pth)
    manifest = dict(cfg)
    manifest["output"] = path
    manifest["_meta"] = {"version": __version__, "schemas": SCHEMAS,
                         "outputs": [os.path.basename(w) for w in written]}
    mpath = stem + ".manifest.json"
    with open(mpath, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    written.append(mpath)
    return written


# argument handling ----------------------------------------------------------


def _resolve_arg(target: str, overrides: list[str]) -> dict:
    if not os.path.exists(target) and target in PRESETS:
        raw, src = parse_text(json.dumps(PRESETS[target]["config"], indent=2), target)
    else:
        try:
            raw, src = load(target)
        except OSError as e:
            raise ConfigError(f"cannot read {target}: {e.strerror}") from None
    raw = apply_overrides(raw, overrides)
    return resolve(raw, src)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="zigzag-net", description="Collision-recovery MAC experiments.")
    sub = ap.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run", help="run an experiment config or a named preset")
    r.add_argument("config", help="JSON config file or preset name")
    r.add_argument("overrides", nargs="*", help="dotted key=value overrides")
    r.add_argument("--out", help="CSV output path (overrides the config's output)")
    r.add_argument("--workers", type=int, default=None, help="worker processes for delivery trials")
    v = sub.add_parser("validate", help="check a config without running it")
    v.add_argument("config")
    v.add_argument("overrides", nargs="*")
    sub.add_parser("list-presets", help="list named presets")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.cmd == "list-presets":
            for name, p in PRESETS.items():
                print(f"{name}\t{p['description']}")
            return EXIT_OK
        cfg = _resolve_arg(args.config, args.overrides)
        if args.cmd == "validate":
            print(f"ok: {cfg['experiment']}")
            return EXIT_OK
        for path in execute(cfg, args.out, args.workers):
            print(path)
        return EXIT_OK
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except HorizonExceeded as e:
        print(f"horizon exceeded: {e}", file=sys.stderr)
        return EXIT_HORIZON


if __name__ == "__main__":
    sys.exit(main())
