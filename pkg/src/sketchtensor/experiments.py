"""Parameter-grid experiments producing flat metric tables (CSV + JSON).

A grid cell is one ``(backend, J, D, sigma, seed)`` combination.  Cells are
independent and deterministic given the ExperimentSpec; only timing columns vary
between runs.  Timings are medians over ``reps`` repetitions.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import compression as comp
from .cpd import AlsConfig, RtpmConfig, als, psnr, residual_norm, rtpm
from .estimators import EstimatorConfig, inner_estimates
from .hashing import make_families
from .synthetic import gen_synthetic_asymmetric, gen_synthetic_symmetric
from .tensor import densify

KINDS = ("rtpm-compare", "als-compare", "kron-compress", "contraction-compress", "variance-study")

DEFAULT_BACKENDS = {
    "rtpm-compare": ["plain", "TS", "FCS"],
    "als-compare": ["plain", "TS", "FCS"],
    "kron-compress": ["FCS", "HCS", "CS"],
    "contraction-compress": ["FCS", "HCS", "CS"],
    "variance-study": ["FCS-vs-TS"],
}

# Stable column order of the metrics table.
COLUMNS = (
    "experiment",
    "backend",
    "J",
    "D",
    "sigma",
    "seed",
    "residual",
    "relative_error",
    "psnr",
    "compression_ratio",
    "hash_memory",
    "var_fcs",
    "var_ts",
    "time_sketch",
    "time_iterations",
    "time_compress",
    "time_decompress",
)


@dataclass
class ExperimentSpec:
    kind: str
    backends: list = field(default_factory=list)
    hash_lens: list = field(default_factory=lambda: [100])
    sketch_counts: list = field(default_factory=lambda: [10])
    sigmas: list = field(default_factory=lambda: [0.01])
    seeds: list = field(default_factory=lambda: [0])
    size: int = 50
    rank: int = 10
    shapes: list = field(default_factory=lambda: [[30, 40], [40, 50]])
    contracted_dim: int = 10
    num_inits: int = 15
    num_iters: int = 20
    max_iters: int = 50
    trials: int = 2000
    reps: int = 3
    jobs: int = 1
    output: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}; choose from {KINDS}")
        if not self.backends:
            raise ValueError("backend list is empty")
        for name in ("hash_lens", "sketch_counts", "sigmas", "seeds"):
            if not getattr(self, name):
                raise ValueError(f"{name} sweep is empty")
        if self.reps < 1 or self.jobs < 1:
            raise ValueError("reps and jobs must be >= 1")

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown spec keys: {sorted(extra)}")
        d = dict(d)
        d.setdefault("backends", DEFAULT_BACKENDS.get(d.get("kind"), []))
        return cls(**d)

    def cells(self):
        return list(itertools.product(self.backends, self.hash_lens, self.sketch_counts, self.sigmas, self.seeds))


def _timed(fn, reps):
    """Result of the first call plus the median wall time over ``reps`` calls."""
    times = []
    out = None
    for r in range(reps):
        start = time.perf_counter()
        res = fn()
        times.append(time.perf_counter() - start)
        if r == 0:
            out = res
    return out, statistics.median(times)


def _median_phase(fn, reps):
    results = [fn() for _ in range(reps)]
    timings = {k: statistics.median(r.timings[k] for r in results) for k in results[0].timings}
    return results[0], timings


def _cpd_row(spec, backend, j, d, sigma, seed):
    est = EstimatorConfig(hash_len=j, sketch_count=d, seed=seed)
    if spec.kind == "rtpm-compare":
        t = gen_synthetic_symmetric(spec.size, spec.rank, sigma, seed)
        cfg = RtpmConfig(spec.rank, spec.num_inits, spec.num_iters, backend, est, seed=seed)
        res, timings = _median_phase(lambda: rtpm(t, cfg), spec.reps)
    else:
        t = gen_synthetic_asymmetric(spec.size, spec.rank, sigma, seed)
        cfg = AlsConfig(spec.rank, spec.max_iters, backend, est, seed=seed)
        res, timings = _median_phase(lambda: als(t, cfg), spec.reps)
    return {
        "residual": residual_norm(t, res.cp),
        "psnr": psnr(t, densify(res.cp)),
        "hash_memory": res.hash_memory,
        "time_sketch": timings["sketch"],
        "time_iterations": timings["iterations"],
    }


def matched_hash_len(method, dims, j):
    """Hash length for ``method`` giving the same sketch size as FCS with per-mode ``j``."""
    composed = len(dims) * j - len(dims) + 1
    if method == "FCS":
        return j
    if method == "CS":
        return composed
    return max(1, round(composed ** (1.0 / len(dims))))


def _compress_row(spec, method, j, d, sigma, seed):
    rng = np.random.default_rng(seed)
    (i1, i2), (i3, i4) = spec.shapes
    if spec.kind == "kron-compress":
        a = rng.uniform(-5, 5, (i1, i2))
        b = rng.uniform(-5, 5, (i3, i4))
        truth = np.multiply.outer(a, b)
        compress = comp.compress_kron
    else:
        a = rng.uniform(0, 10, (i1, i2, spec.contracted_dim))
        b = rng.uniform(0, 10, (spec.contracted_dim, i3, i4))
        truth = np.tensordot(a, b, axes=([2], [0]))
        compress = comp.compress_contraction
    dims = (i1, i2, i3, i4)
    length = matched_hash_len(method, dims, j)
    sk, t_comp = _timed(lambda: compress(a, b, length, d, seed, method), spec.reps)
    est, t_dec = _timed(lambda: comp.reconstruct(sk), spec.reps)
    return {
        "relative_error": comp.relative_error(est, truth),
        "compression_ratio": sk.compression_ratio,
        "hash_memory": sk.hash_memory,
        "time_compress": t_comp,
        "time_decompress": t_dec,
    }


def _variance_row(spec, backend, j, d, sigma, seed):
    rng = np.random.default_rng(seed)
    shape = (spec.size,) * 3
    m = rng.standard_normal(shape)
    n = rng.standard_normal(shape)
    fams = make_families(shape, j, seed, spec.trials * d)
    stats = {}
    for kind in ("FCS", "TS"):
        est = inner_estimates(m, n, fams, kind).reshape(spec.trials, d)
        stats[kind] = float(np.var(np.median(est, axis=1), ddof=1))
    return {
        "var_fcs": stats["FCS"],
        "var_ts": stats["TS"],
    }


def run_cell(spec: ExperimentSpec, cell):
    backend, j, d, sigma, seed = cell
    row = dict.fromkeys(COLUMNS)
    row.update(experiment=spec.kind, backend=backend, J=j, D=d, sigma=sigma, seed=seed)
    if spec.kind in ("rtpm-compare", "als-compare"):
        row.update(_cpd_row(spec, backend, j, d, sigma, seed))
    elif spec.kind == "variance-study":
        row.update(_variance_row(spec, backend, j, d, sigma, seed))
    else:
        row.update(_compress_row(spec, backend, j, d, sigma, seed))
    return row


def run_experiment(spec: ExperimentSpec) -> list[dict]:
    """Run every grid cell (in parallel up to ``spec.jobs``) and optionally write outputs.

    With ``spec.output`` set, ``<output>.csv`` and ``<output>.json`` are written.
    """
    cells = spec.cells()
    if spec.jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=spec.jobs) as pool:
            rows = list(pool.map(run_cell, [spec] * len(cells), cells))
    else:
        rows = [run_cell(spec, c) for c in cells]
    if spec.output:
        base = Path(spec.output)
        base.with_suffix(".csv").write_text(rows_to_csv(rows))
        base.with_suffix(".json").write_text(json.dumps(metrics_document(spec, rows), indent=2))
    return rows


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: "" if row.get(k) is None else row[k] for k in COLUMNS})
    return buf.getvalue()


def metrics_document(spec, rows):
    return {"kind": "experiment", "spec": asdict(spec), "columns": list(COLUMNS), "rows": rows}
