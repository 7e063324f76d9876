"""Named reproduction presets and the experiments behind them."""

from __future__ import annotations

import math

import numpy as np

from . import analysis
from .network import Topology
from .policies import AckPolicy, TransmissionPolicy
from .simulator import SimConfig, run_delivery, stability_probe

PRESETS = {
    "figure3": {
        "description": "delivery time against n for p = 1/3: random access, ZigZag with random access "
                       "(C = 2, 3, optimal q per point) and unlimited ZigZag",
        "config": {
            "experiment": "figure3", "p": 1 / 3, "seed": 2024, "trials": 2000, "max_slots": 1_000_000,
            "preset": {"n_max": 30},
        },
    },
    "region2d": {
        "description": "two senders, one receiver, p = 1/3: empirical stability boundary along rays "
                       "for ZigZag (longest-queue ACK) and the centralized scheduler",
        "config": {
            "experiment": "region2d", "p": 1 / 3, "seed": 7, "horizon": 200_000,
            "preset": {"rays": 9},
            "probe": {"resolution": 0.02},
        },
    },
}

FIGURE3_SCHEMES = (
    ("random_access", 1),
    ("zigzag_ra_C2", 2),
    ("zigzag_ra_C3", 3),
    ("zigzag", None),
)


def figure3_point(scheme: str, C: int | None, n: int, p: float, trials: int, seed: int,
                  max_slots: int, workers: int | None = None) -> dict:
    """One (scheme, n) point: optimal access probability, MC mean and closed form."""
    topo = Topology.single_receiver(n)
    if scheme == "zigzag":
        q = 1.0
        tx = TransmissionPolicy.always_on()
        formula = analysis.et_zigzag(n, p)
    else:
        q = analysis.optimal_q(n, p, C)
        tx = TransmissionPolicy.random_access(q)
        formula = analysis.et_random_access(n, p, q) if C == 1 else analysis.et_zigzag_ra(n, p, q, C)
    cfg = SimConfig(topo, p, tx, AckPolicy("unacked"), C, seed=seed, max_slots=max_slots)
    st = run_delivery(cfg, trials, workers=workers)
    return {"scheme": scheme, "n": n, "p": p, "q": q, "C": "" if C is None else C,
            "mean_T": st.mean(), "ci95": st.ci95(), "formula_T": formula}


def figure3_rows(cfg: dict, workers: int | None = None) -> list[dict]:
    n_max = int(cfg["preset"].get("n_max", 30))
    rows = []
    for n in range(1, n_max + 1):
        for scheme, C in FIGURE3_SCHEMES:
            rows.append(figure3_point(scheme, C, n, float(cfg["p"]), cfg["trials"], cfg["seed"],
                                      cfg["max_slots"], workers))
    return rows


def region_rays(count: int) -> list[tuple[float, float]]:
    out = []
    for th in np.linspace(0.0, math.pi / 2, count):
        x, y = math.cos(th), math.sin(th)
        out.append((0.0 if abs(x) < 1e-12 else x, 0.0 if abs(y) < 1e-12 else y))
    return out


REGION2D_SCHEMES = {
    "zigzag": (TransmissionPolicy.always_on(), AckPolicy("longest_queue")),
    "centralized": (TransmissionPolicy.centralized(), AckPolicy("arbitrary")),
}


def region2d_rows(cfg: dict) -> dict[str, list[dict]]:
    """Boundary estimates per scheme; ``boundary_scale`` is the total rate at the boundary."""
    p = float(cfg["p"])
    res = float(cfg["probe"].get("resolution", 0.02))
    rays = region_rays(int(cfg["preset"].get("rays", 9)))
    out = {}
    for name, (tx, ack) in REGION2D_SCHEMES.items():
        sim = SimConfig(Topology.single_receiver(2), p, tx, ack, seed=cfg["seed"])
        rows = []
        for ray in rays:
            r = stability_probe(sim, ray, res, cfg["horizon"])
            rows.append({"ray": ray, "boundary_scale": r.boundary_scale, "resolution": res})
        out[name] = rows
    return out
