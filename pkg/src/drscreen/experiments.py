"""Experiment drivers: screening-rate sweeps, screening cost, parameter shifts.

Weight balls follow the class-reweighting scheme: positive samples move from
weight 1 to ``a`` while negatives stay at 1, giving ``S = sqrt(n+) |a - 1|``
around ``w~ = 1``.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import logging
import math
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .kernels import gram_rbf, load_precomputed
from .libsvm import parse_libsvm
from .losses import hinge
from .problem import Dataset, ModelState, WeightBall, build_dataset, build_gram_dataset
from .screening import interval_mask, screen_dr, screen_per_weight
from .solver import ConvergenceError, SolverConfig, train

logger = logging.getLogger(__name__)

# name: (n, n+, d including the intercept)
DATASET_SHAPES = {
    "australian": (690, 307, 15),
    "breast-cancer": (683, 239, 11),
    "heart": (270, 120, 14),
    "ionosphere": (351, 225, 35),
    "sonar": (208, 97, 61),
    "splice": (1000, 517, 61),
    "svmguide1": (3089, 2000, 5),
    "phishing": (11055, 6157, 69),
}

# reference lambda per dataset for the cost experiment
COST_LAMBDA = {
    "sonar": 65.8, "heart": 27.0, "ionosphere": 111.0, "breast-cancer": 21.6,
    "australian": 218.2, "splice": 316.2, "svmguide1": 97.7, "phishing": 3495.9,
}

DEFAULT_A_GRID = tuple(round(0.95 + 0.01 * k, 2) for k in range(11))
SHIFT_TOL = 1e-13


def canonical_name(path) -> str:
    name = Path(path).name
    for suffix in (".txt", ".libsvm", ".svm"):
        if name.endswith(suffix):
            name = name[: -len(suffix)]
    for suffix in ("_scale", ".scale", ".tr", ".train"):
        if name.endswith(suffix):
            name = name[: -len(suffix)]
    return name


def check_shapes(name, n, n_pos, d) -> list[str]:
    """Compare shape statistics with the reference shapes; returns warning strings."""
    ref = DATASET_SHAPES.get(name)
    if ref is None:
        return []
    msgs = [f"{name}: {label} is {got}, expected {want}"
            for label, got, want in zip(("n", "n+", "d"), (n, n_pos, d), ref)
            if got != want]
    for m in msgs:
        logger.warning(m)
    return msgs


def lambda_grid(n, exponents=None):
    """``n * 10**k`` for ``k = 0, -0.5, ..., -3``."""
    if exponents is None:
        exponents = np.arange(0.0, -3.01, -0.5)
    return [float(n * 10.0 ** k) for k in exponents]


def nearest_grid_lambda(n, lam):
    grid = lambda_grid(n)
    return min(grid, key=lambda g: abs(math.log(g / lam)))


def make_rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def ball_from_class_shift(y, a) -> WeightBall:
    y = np.asarray(y)
    if not a > 0:
        raise ValueError(f"a must be positive, got {a}")
    n_pos = int(np.sum(y == 1))
    if n_pos == 0 and a != 1:
        raise ValueError("no positive samples to reweight")
    return WeightBall(np.ones(y.size), math.sqrt(n_pos) * abs(a - 1.0))


def random_weight(ball: WeightBall, rng: np.random.Generator) -> np.ndarray:
    """A uniformly oriented point on the sphere ``||w - center|| = S``."""
    if ball.radius == 0:
        return ball.center.copy()
    while True:
        v = rng.standard_normal(ball.center.size)
        nv = np.linalg.norm(v)
        if nv > 0:
            return ball.center + (ball.radius / nv) * v


@dataclass(frozen=True)
class ExperimentConfig:
    data: str
    kernel: str = "linear"
    rbf_mode: str = "squared"
    lambdas: tuple | None = None
    a_grid: tuple = DEFAULT_A_GRID
    trials: int = 1000
    random_reps: int = 10
    seed: int = 0
    out: str = "results"
    tol: float = 1e-9
    intercept: bool | None = None

    def __post_init__(self):
        if self.lambdas is not None and len(self.lambdas) == 0:
            raise ValueError("lambda grid is empty")
        if len(self.a_grid) == 0:
            raise ValueError("a grid is empty")
        if any(not lam > 0 for lam in self.lambdas or ()):
            raise ValueError("lambdas must be positive")
        if self.trials < 1 or self.random_reps < 1:
            raise ValueError("trial counts must be >= 1")
        kernel_kind(self.kernel)
        if self.rbf_mode not in ("squared", "unsquared"):
            raise ValueError(f"unknown rbf mode {self.rbf_mode!r}")

    @property
    def use_intercept(self) -> bool:
        # kernels define the full inner product, so no extra constant feature
        if self.intercept is None:
            return kernel_kind(self.kernel) == "linear"
        return self.intercept

    def config_hash(self) -> str:
        blob = json.dumps(dataclasses.asdict(self), sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:12]


def kernel_kind(spec: str) -> str:
    if spec in ("linear", "rbf"):
        return spec
    if spec.startswith("precomputed:") and len(spec) > len("precomputed:"):
        return "precomputed"
    raise ValueError(f"kernel must be linear, rbf or precomputed:<path>, got {spec!r}")


@dataclass
class Problem:
    ds: Dataset
    name: str
    kernel_label: str
    warnings: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)


def load_problem(cfg: ExperimentConfig) -> Problem:
    raw = parse_libsvm(cfg.data)
    name = canonical_name(cfg.data)
    n = raw.y.size
    n_pos = int(np.sum(raw.y == 1))
    d = raw.X.shape[1] + (1 if cfg.use_intercept else 0)
    warnings = check_shapes(name, n, n_pos, d) if kernel_kind(cfg.kernel) == "linear" else []
    kind = kernel_kind(cfg.kernel)
    meta = {"n": n, "n_pos": n_pos, "label_map": raw.label_map, "intercept": cfg.use_intercept}
    if kind == "linear":
        ds = build_dataset(raw.X, raw.y, hinge(), add_intercept=cfg.use_intercept, name=name)
        label = "linear"
    else:
        if kind == "rbf":
            gm = gram_rbf(raw.X, "auto", cfg.rbf_mode)
            label = f"rbf-{cfg.rbf_mode}"
        else:
            gm = load_precomputed(cfg.kernel.split(":", 1)[1], n)
            label = "precomputed"
        meta.update(gm.meta)
        ds = build_gram_dataset(gm.K, raw.y, hinge(), add_intercept=cfg.use_intercept, name=name)
    return Problem(ds, name, label, warnings, meta)


def _train_center(ds, lam, tol):
    cfg = SolverConfig(rel_gap_tol=tol)
    try:
        return train(ds, np.ones(ds.n), lam, cfg)
    except ConvergenceError as exc:
        logger.warning("%s lambda=%g: %s", ds.name, lam, exc)
        return exc.model


def _rel_gap(m: ModelState) -> float:
    return m.gap / max(1.0, abs(m.primal))


@dataclass
class SweepRow:
    dataset: str
    lam: float
    a: float
    S: float
    kernel: str
    rate: float
    R: float
    gap_center: float
    seconds: float
    n_removed: int
    converged: bool
    rel_gap: float


def sweep_screening_rate(cfg: ExperimentConfig, problem: Problem | None = None) -> list[SweepRow]:
    """DR screening rate for every (lambda, a) in the grids."""
    pb = problem or load_problem(cfg)
    ds = pb.ds
    lams = list(cfg.lambdas) if cfg.lambdas else lambda_grid(ds.n)
    rows = []
    for lam in lams:
        m = _train_center(ds, lam, cfg.tol)
        for a in cfg.a_grid:
            ball = ball_from_class_shift(ds.y, a)
            t0 = time.perf_counter()
            cert = screen_dr(ds, m, ball)
            dt = time.perf_counter() - t0
            rows.append(SweepRow(pb.name, float(lam), float(a), ball.radius, pb.kernel_label,
                                 cert.rate, cert.radius, cert.gap_at_center, dt,
                                 cert.n_removed, m.converged, _rel_gap(m)))
    rows.sort(key=lambda r: (r.lam, r.a))
    return rows


def _sub_model(m: ModelState, keep) -> ModelState:
    """The center model restricted to the kept rows (same primal vector)."""
    return dataclasses.replace(m, alpha=m.alpha[keep], margins=m.margins[keep],
                               weights=m.weights[keep])


def experiment_cost(cfg: ExperimentConfig, a: float = 0.95, lam: float | None = None,
                    problem: Problem | None = None) -> dict:
    """Remaining samples and screening time for ISSS alone versus DRSSS then ISSS.

    ISSS at a revealed weight vector applies the per-weight rule with the
    center model evaluated at that weight (no retraining).
    """
    pb = problem or load_problem(cfg)
    ds = pb.ds
    if lam is None:
        lam = COST_LAMBDA.get(pb.name)
        lam = nearest_grid_lambda(ds.n, lam) if lam else ds.n
    m = _train_center(ds, lam, cfg.tol)
    ball = ball_from_class_shift(ds.y, a)
    rng = make_rng(cfg.seed)
    weights = [random_weight(ball, rng) for _ in range(cfg.trials)]

    t0 = time.perf_counter()
    dr = screen_dr(ds, m, ball)
    t_dr = time.perf_counter() - t0
    keep = np.flatnonzero(~dr.mask)
    sub = ds.subset(keep)
    msub = _sub_model(m, keep)

    t0 = time.perf_counter()
    isss_masks = [screen_per_weight(ds, m, w).mask for w in weights]
    t_isss = time.perf_counter() - t0

    t0 = time.perf_counter()
    sub_masks = [screen_per_weight(sub, msub, w[keep]).mask for w in weights]
    t_after = time.perf_counter() - t0

    same = 0
    remained_isss = []
    for full, part in zip(isss_masks, sub_masks):
        combined = dr.mask.copy()
        combined[keep[part]] = True
        same += bool(np.array_equal(combined, full))
        remained_isss.append(1.0 - full.mean())
    return {
        "dataset": pb.name, "n": ds.n, "lam": float(lam), "a": a, "S": ball.radius,
        "kernel": pb.kernel_label, "trials": cfg.trials,
        "remained_drsss": 1.0 - dr.rate,
        "remained_isss": float(np.mean(remained_isss)),
        "time_isss": t_isss, "time_drsss": t_dr, "time_isss_after_drsss": t_after,
        "time_drsss_plus_isss": t_dr + t_after,
        "set_equal_trials": same, "R": dr.radius, "gap_center": dr.gap_at_center,
        "converged": m.converged, "rel_gap": _rel_gap(m),
    }


def beta_shift(ds: Dataset, lam, full: ModelState, part: ModelState, keep) -> float:
    """``||beta_full - beta_part||`` where ``part`` was trained on rows ``keep``."""
    if full.beta is not None and part.beta is not None:
        return float(np.linalg.norm(full.beta - part.beta))
    u = full.weights * full.alpha
    u_part = np.zeros(ds.n)
    u_part[keep] = part.weights * part.alpha
    diff = u - u_part
    return math.sqrt(max(float(diff @ (ds.kcheck @ diff)), 0.0)) / lam


def experiment_shift(cfg: ExperimentConfig, a: float = 0.99, lam: float | None = None,
                     trials: int = 100, problem: Problem | None = None,
                     solver_tol: float = SHIFT_TOL) -> dict:
    """Parameter shift caused by removing samples under three strategies.

    DRSSS removes the DR mask, Random removes the same number of uniformly
    chosen samples (``cfg.random_reps`` draws per weight), NaiveSS removes the
    per-weight mask computed at the center.  Each reduced problem is retrained
    at every random weight and compared with the full-data solution.
    """
    pb = problem or load_problem(cfg)
    ds = pb.ds
    lam = float(ds.n if lam is None else lam)
    scfg = SolverConfig(rel_gap_tol=solver_tol)
    m = _train_center(ds, lam, solver_tol)
    ball = ball_from_class_shift(ds.y, a)
    dr = screen_dr(ds, m, ball)
    naive = screen_per_weight(ds, m)
    rng = make_rng(cfg.seed)
    n_drop = dr.n_removed

    def fit(w, keep):
        sub = ds.subset(keep)
        return train(sub, w[keep], lam, scfg, alpha0=m.alpha[keep], raise_on_failure=False)

    shifts = {"drsss": [], "random": [], "naive": []}
    worst_gap = 0.0
    dr_keep = np.flatnonzero(~dr.mask)
    naive_keep = np.flatnonzero(~naive.mask)
    everything = np.arange(ds.n)
    for _ in range(trials):
        w = random_weight(ball, rng)
        full = fit(w, everything)
        worst_gap = max(worst_gap, _rel_gap(full))
        part = fit(w, dr_keep)
        shifts["drsss"].append(beta_shift(ds, lam, full, part, dr_keep))
        part = fit(w, naive_keep)
        shifts["naive"].append(beta_shift(ds, lam, full, part, naive_keep))
        for _ in range(cfg.random_reps):
            rnd_keep = np.sort(rng.permutation(ds.n)[n_drop:])
            part = fit(w, rnd_keep)
            shifts["random"].append(beta_shift(ds, lam, full, part, rnd_keep))

    out = {"dataset": pb.name, "n": ds.n, "lam": lam, "a": a, "S": ball.radius,
           "kernel": pb.kernel_label, "trials": trials,
           "remained_drsss": 1.0 - dr.rate, "remained_naive": 1.0 - naive.rate,
           "worst_rel_gap": worst_gap}
    for key, vals in shifts.items():
        vals = np.asarray(vals)
        out[f"{key}_mean"] = float(vals.mean())
        out[f"{key}_std"] = float(vals.std())
        out[f"{key}_max"] = float(vals.max())
        out[f"{key}_frac_below_1e-6"] = float(np.mean(vals <= 1e-6))
    return out


def write_outputs(path_stem, rows, cfg: ExperimentConfig, extra_meta=None):
    """CSV (one row per record, each stamped with seed and config hash) plus a JSON sidecar."""
    path_stem = Path(path_stem)
    os.makedirs(path_stem.parent, exist_ok=True)
    records = [dataclasses.asdict(r) if dataclasses.is_dataclass(r) else dict(r) for r in rows]
    h = cfg.config_hash()
    for r in records:
        r["seed"] = cfg.seed
        r["config_hash"] = h
        r["rbf_mode"] = cfg.rbf_mode if kernel_kind(cfg.kernel) == "rbf" else ""
    csv_path = path_stem.parent / (path_stem.name + ".csv")
    fields = list(records[0].keys()) if records else []
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.DictWriter(fh, fieldnames=fields)
        wr.writeheader()
        for r in records:
            wr.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    meta = {"config": dataclasses.asdict(cfg), "config_hash": h, "seed": cfg.seed,
            "version": __version__, "rows": len(records)}
    if extra_meta:
        meta.update(extra_meta)
    with open(path_stem.parent / (path_stem.name + ".json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, default=str)
    return csv_path
