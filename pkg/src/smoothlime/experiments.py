"""Experiment harness: equivalence, robustness, sensitivity and convergence curves.

Seeds
-----
Every explanation draws from its own stream
``derive_seed(base_seed, lane, repetition, i, n, k)`` where ``i`` indexes the
test instance, ``n`` is the perturbation count itself (not its grid position)
and ``k`` is 0 for the instance and ``1..K`` for its robustness neighbors. The
lanes keep SmoothGrad, C-LIME, the oracle and the neighbor draws independent.
Results are therefore identical for any ``n_jobs`` and any grid ordering.
"""

import csv
import io
import json
import os
import shutil
import subprocess
import tempfile
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field

import numpy as np
from joblib import Parallel, delayed

from .explainers import (
    clime_from_samples,
    explanation_distance,
    oracle_from_samples,
    smoothgrad_from_samples,
)
from .exceptions import RankDeficient
from .linalg import norm
from .model import estimate_grad_max, train
from .sampling import PerturbationConfig, SplitMixStream, derive_seed, gaussian_perturbations

LANE_SMOOTHGRAD = 1
LANE_CLIME = 2
LANE_ORACLE = 3
LANE_NEIGHBORS = 4
LANE_LIPSCHITZ = 5

METHOD_LANES = {"smoothgrad": LANE_SMOOTHGRAD, "clime": LANE_CLIME}
KINDS = ("equivalence", "robustness", "sigma-sweep", "accuracy-sweep", "convergence")


@dataclass(frozen=True)
class CurvePoint:
    perturbation_count: int
    value: float
    stderr: float

    def __post_init__(self):
        if self.perturbation_count < 1:
            raise ValueError("perturbation_count must be >= 1")
        if not (np.isfinite(self.value) and self.value >= 0):
            raise ValueError(f"curve values must be finite and >= 0, got {self.value}")


@dataclass(frozen=True)
class ExperimentConfig:
    sigma2: float = 1.0
    n_grid: tuple = (100, 200, 1000, 10000)
    neighbor_sigma2: float = 0.01
    neighbors_per_point: int = 10
    test_subset_size: int = 50
    base_seed: int = 0
    norm: str = "L1"
    epochs_list: tuple = (1, 15)
    sigma2_list: tuple = (0.01, 0.1, 1.0)
    convergence_grid: tuple = (100, 1000, 10000, 100000)
    oracle_n: int = 10**6
    convergence_norm: str = "L2"
    repetitions: int = 1
    n_jobs: int = 1

    def __post_init__(self):
        for name in ("n_grid", "epochs_list", "sigma2_list", "convergence_grid"):
            values = tuple(getattr(self, name))
            if not values:
                raise ValueError(f"{name} must be non-empty")
            object.__setattr__(self, name, values)
        if min(self.n_grid) < 1 or min(self.convergence_grid) < 1:
            raise ValueError("perturbation counts must be >= 1")
        if self.sigma2 <= 0 or self.neighbor_sigma2 <= 0 or min(self.sigma2_list) <= 0:
            raise ValueError("variances must be > 0")
        if self.test_subset_size < 1 or self.neighbors_per_point < 1:
            raise ValueError("test_subset_size and neighbors_per_point must be >= 1")
        if self.norm.upper() not in ("L1", "L2") or self.convergence_norm.upper() not in ("L1", "L2"):
            raise ValueError("norm must be L1 or L2")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")


@dataclass
class ConvergenceReport:
    n_grid: list
    mean_error: dict  # method -> list of mean distances to the oracle, one per n
    stderr: dict
    slope: dict  # method -> fitted log-log slope
    oracle_n: int

    def curves(self):
        return {
            f"convergence_{m}": [CurvePoint(n, e, s) for n, e, s in
                                 zip(self.n_grid, self.mean_error[m], self.stderr[m])]
            for m in self.mean_error
        }


def test_subset(data, cfg):
    if data.test_idx is None or len(data.test_idx) == 0:
        raise ValueError("dataset has no test split")
    return data.features[data.test_idx[:cfg.test_subset_size]]


def _seed(cfg, lane, rep, i, n=0, k=0):
    return derive_seed(cfg.base_seed, lane, rep, i, n, k)


def _explain(method, f, x, sigma2, n, seed):
    samples = gaussian_perturbations(PerturbationConfig(x, sigma2, n, seed))
    if method == "smoothgrad":
        return smoothgrad_from_samples(f, samples)
    if method == "clime":
        try:
            return clime_from_samples(f, samples)
        except RankDeficient as exc:
            raise RankDeficient(f"at x={x.tolist()}, n={n}: {exc}") from exc
    raise ValueError(f"unknown method {method!r}")


def _neighbors(x, cfg, rep, i):
    stream = SplitMixStream(_seed(cfg, LANE_NEIGHBORS, rep, i))
    z = stream.normal(cfg.neighbors_per_point * x.shape[0]).reshape(-1, x.shape[0])
    return x + np.sqrt(cfg.neighbor_sigma2) * z


def _map(cfg, fn, items):
    if cfg.n_jobs == 1:
        return [fn(*it) for it in items]
    return Parallel(n_jobs=cfg.n_jobs)(delayed(fn)(*it) for it in items)


def _curve(per_instance, grid):
    values = np.asarray(per_instance)  # (instances, len(grid))
    m = values.shape[0]
    return [CurvePoint(int(n), float(values[:, j].mean()),
                       float(values[:, j].std(ddof=1) / np.sqrt(m)) if m > 1 else 0.0)
            for j, n in enumerate(grid)]


def _equivalence_instance(f, x, i, cfg, sigma2, rep):
    out = []
    for n in cfg.n_grid:
        sg = _explain("smoothgrad", f, x, sigma2, n, _seed(cfg, LANE_SMOOTHGRAD, rep, i, n))
        cl = _explain("clime", f, x, sigma2, n, _seed(cfg, LANE_CLIME, rep, i, n))
        out.append(explanation_distance(sg, cl, cfg.norm))
    return out


def run_equivalence(model, data, cfg, repetition=0, sigma2=None):
    """Mean distance between SmoothGrad and C-LIME per grid point."""
    sigma2 = cfg.sigma2 if sigma2 is None else sigma2
    X = test_subset(data, cfg)
    rows = _map(cfg, _equivalence_instance,
                [(model, x, i, cfg, sigma2, repetition) for i, x in enumerate(X)])
    return _curve(rows, cfg.n_grid)


def _robustness_instance(method, f, x, i, cfg, sigma2, rep):
    lane = METHOD_LANES[method]
    neighbors = _neighbors(x, cfg, rep, i)
    out = []
    for n in cfg.n_grid:
        base = _explain(method, f, x, sigma2, n, _seed(cfg, lane, rep, i, n, 0))
        out.append(max(
            explanation_distance(base, _explain(method, f, xn, sigma2, n,
                                                _seed(cfg, lane, rep, i, n, k + 1)), cfg.norm)
            for k, xn in enumerate(neighbors)))
    return out


def run_robustness(method, model, data, cfg, repetition=0, sigma2=None):
    """Per grid point: mean over instances of the max distance to a neighbor's explanation."""
    if method not in METHOD_LANES:
        raise ValueError(f"method must be one of {sorted(METHOD_LANES)}")
    sigma2 = cfg.sigma2 if sigma2 is None else sigma2
    X = test_subset(data, cfg)
    rows = _map(cfg, _robustness_instance,
                [(method, model, x, i, cfg, sigma2, repetition) for i, x in enumerate(X)])
    return _curve(rows, cfg.n_grid)


def _standard_curves(model, data, cfg, repetition, sigma2=None):
    return {
        "equivalence": run_equivalence(model, data, cfg, repetition, sigma2),
        "robustness_smoothgrad": run_robustness("smoothgrad", model, data, cfg, repetition, sigma2),
        "robustness_clime": run_robustness("clime", model, data, cfg, repetition, sigma2),
    }


def run_sigma_sweep(model, data, cfg, repetition=0):
    """Equivalence and robustness curves for every variance in ``cfg.sigma2_list``."""
    return {s2: _standard_curves(model, data, cfg, repetition, s2) for s2 in cfg.sigma2_list}


def run_accuracy_sweep(data, cfg, train_cfg, repetition=0):
    """Train one model per epoch count (same init seed) and compute its curves."""
    from dataclasses import replace

    out = {}
    for epochs in cfg.epochs_list:
        net, metrics = train(data, replace(train_cfg, epochs=int(epochs)))
        curves = _standard_curves(net, data, cfg, repetition)
        curves["test_acc"] = metrics["test_acc"]
        out[int(epochs)] = curves
    return out


def _convergence_instance(f, x, i, cfg, rep):
    oracle = oracle_from_samples(
        f, gaussian_perturbations(PerturbationConfig(
            x, cfg.sigma2, cfg.oracle_n, _seed(cfg, LANE_ORACLE, rep, i))), cfg.sigma2)
    errs = {}
    for method, lane in METHOD_LANES.items():
        errs[method] = [
            norm(_explain(method, f, x, cfg.sigma2, n, _seed(cfg, lane, rep, i, n)) - oracle,
                 cfg.convergence_norm)
            for n in cfg.convergence_grid
        ]
    return errs


def loglog_slope(ns, errors):
    """Least-squares slope of log(error) against log(n)."""
    return float(np.polyfit(np.log(np.asarray(ns, float)), np.log(np.asarray(errors, float)), 1)[0])


def run_convergence(model, data, cfg, repetition=0):
    """Distance of each method to the large-sample oracle as n grows."""
    X = test_subset(data, cfg)
    rows = _map(cfg, _convergence_instance,
                [(model, x, i, cfg, repetition) for i, x in enumerate(X)])
    mean_error, stderr, slope = {}, {}, {}
    for method in METHOD_LANES:
        curve = _curve([r[method] for r in rows], cfg.convergence_grid)
        mean_error[method] = [p.value for p in curve]
        stderr[method] = [p.stderr for p in curve]
        slope[method] = loglog_slope(cfg.convergence_grid, mean_error[method])
    return ConvergenceReport(list(cfg.convergence_grid), mean_error, stderr, slope, cfg.oracle_n)


def lipschitz_check(f, points, sigma2, n_pairs=100, oracle_n=10**5, neighbor_sigma2=0.01,
                    probes=None, seed=0):
    """Compare oracle difference quotients with ``grad_max / (2 sigma)``.

    Each pair ``(x, x')`` uses the same standard-normal draws for both oracle
    estimates, so the quotient's Monte-Carlo noise is that of the difference;
    ``noise_floor`` is that standard error divided by ``||x - x'||``.
    """
    points = np.asarray(points, dtype=np.float64)
    d = points.shape[1]
    sigma = np.sqrt(sigma2)
    pick = SplitMixStream(derive_seed(seed, LANE_LIPSCHITZ, 0))
    rows = []
    for p in range(n_pairs):
        x = points[int(pick.uniform(1)[0] * len(points))]
        xp = x + np.sqrt(neighbor_sigma2) * pick.normal(d)
        z = SplitMixStream(derive_seed(seed, LANE_LIPSCHITZ, 1, p)).normal(oracle_n * d)
        z = z.reshape(oracle_n, d)
        A, Ap = x + sigma * z, xp + sigma * z
        ya, yb = np.asarray(f(A)), np.asarray(f(Ap))
        ea = (A - A.mean(0)) * (ya - ya.mean())[:, None] / sigma2
        eb = (Ap - Ap.mean(0)) * (yb - yb.mean())[:, None] / sigma2
        diff = ea - eb
        gap = norm(x - xp, "L2")
        se = norm(diff.std(axis=0) / np.sqrt(oracle_n), "L2")
        rows.append((norm(diff.mean(axis=0), "L2") / gap, se / gap, x, xp))
    if probes is None:
        probes = np.vstack([points] + [gaussian_perturbations(
            PerturbationConfig(x, sigma2, 200, derive_seed(seed, LANE_LIPSCHITZ, 2, j)))
            for j, x in enumerate(points)])
    bound = estimate_grad_max(f, probes).for_sigma(sigma).bound
    quotients = np.array([r[0] for r in rows])
    floors = np.array([r[1] for r in rows])
    return {
        "bound": float(bound),
        "quotients": quotients,
        "noise_floor": floors,
        "max_quotient": float(quotients.max()),
        "violations": int(np.sum(quotients > bound + 3 * floors)),
    }


def _git_describe():
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty"], capture_output=True,
                             text=True, timeout=5, cwd=os.path.dirname(__file__))
        return out.stdout.strip() or "unknown"
    except (OSError, subprocess.SubprocessError):
        return "unknown"


def curve_to_csv(curve):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "value", "stderr"])
    for p in curve:
        w.writerow([p.perturbation_count, repr(float(p.value)), repr(float(p.stderr))])
    return buf.getvalue()


def read_curve(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return [CurvePoint(int(r["n"]), float(r["value"]), float(r["stderr"])) for r in rows]


def flatten_results(results, prefix=""):
    """Nested ``{key: {...: [CurvePoint]}}`` to ``{"a__b": [CurvePoint]}``; scalars dropped."""
    flat = {}
    for key, value in results.items():
        name = f"{prefix}__{key}" if prefix else str(key)
        if isinstance(value, dict):
            flat.update(flatten_results(value, name))
        elif isinstance(value, list) and value and isinstance(value[0], CurvePoint):
            flat[name] = value
    return flat


def _config_doc(config):
    if config is None:
        return None
    return asdict(config) if hasattr(config, "__dataclass_fields__") else config


def write_report(results, path, config=None, seed=None, timings=None, extra=None):
    """Write ``<name>.csv`` per curve plus ``manifest.json`` under directory ``path``.

    Files are staged in a temporary directory and moved into place only after
    everything was written, so a failure leaves no partial output.
    """
    curves = flatten_results(results)
    if not curves:
        raise ValueError("no curves to write")
    os.makedirs(path, exist_ok=True)
    cfg_doc = _config_doc(config)
    if seed is None and isinstance(cfg_doc, dict):
        seed = cfg_doc.get("base_seed")
    manifest = {
        "config": cfg_doc,
        "seed": seed,
        "git_describe": _git_describe(),
        "timings": timings or {},
        "files": {name: f"{_safe(name)}.csv" for name in sorted(curves)},
    }
    if extra:
        manifest.update(extra)
    staging = tempfile.mkdtemp(prefix=".staging-", dir=path)
    try:
        for name, curve in curves.items():
            with open(os.path.join(staging, manifest["files"][name]), "w",
                      encoding="utf-8", newline="") as fh:
                fh.write(curve_to_csv(curve))
        with open(os.path.join(staging, "manifest.json"), "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, default=_json_default)
            fh.write("\n")
        for fname in os.listdir(staging):
            os.replace(os.path.join(staging, fname), os.path.join(path, fname))
    finally:
        shutil.rmtree(staging, ignore_errors=True)
    return os.path.join(path, "manifest.json")


def _safe(name):
    return "".join(c if c.isalnum() or c in "._-" else "_" for c in name)


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


@contextmanager
def timed(timings, name):
    t0 = time.perf_counter()
    try:
        yield
    finally:
        timings[name] = time.perf_counter() - t0
