"""CP decomposition of 3rd-order tensors, plain or with sketched contractions.

Both solvers only touch the tensor through a
:class:`~sketchtensor.estimators.ContractionBackend`, so switching
``backend`` between ``plain``, ``CS``, ``TS``, ``HCS`` and ``FCS`` swaps
exact contractions for sketched estimates without changing the iteration.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .estimators import BACKENDS, EstimatorConfig, make_backend
from .tensor import CpTensor, as_tensor, densify

PSNR_CAP_DB = 99.0


@dataclass(frozen=True)
class RtpmConfig:
    """Robust tensor power method settings.

    ``num_inits`` random starts per component, ``num_iters`` power
    iterations per start (and again to refine the winner).  With
    ``symmetrize`` a sketched ``T(I,u,u)`` is the mean of the three
    placements ``T(I,u,u)``, ``T(u,I,u)``, ``T(u,u,I)``; they agree for a
    symmetric tensor but read different hash collisions.
    """

    rank: int
    num_inits: int = 15
    num_iters: int = 20
    backend: str = "plain"
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    seed: int = 0
    symmetrize: bool = True

    def __post_init__(self):
        if min(self.rank, self.num_inits, self.num_iters) < 1:
            raise ValueError("rank, num_inits and num_iters must be >= 1")
        if self.backend not in BACKENDS:
            raise ValueError(f"unknown backend {self.backend!r}")


@dataclass(frozen=True)
class AlsConfig:
    rank: int
    max_iters: int = 50
    backend: str = "plain"
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    tol: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.rank < 1 or self.max_iters < 1:
            raise ValueError("rank and max_iters must be >= 1")
        if self.backend not in BACKENDS:
            raise ValueError(f"unknown backend {self.backend!r}")


@dataclass
class CpdResult:
    cp: CpTensor
    eigenvalues: np.ndarray
    timings: dict
    iterations: int = 0
    hash_memory: int = 0

    @property
    def weights(self):
        return self.cp.weights


def residual_norm(t, cp: CpTensor) -> float:
    """Relative Frobenius residual ``||T - [[cp]]|| / ||T||``."""
    t = as_tensor(t)
    err = float(np.linalg.norm(t - densify(cp)))
    ref = float(np.linalg.norm(t))
    if ref == 0.0:
        return 0.0 if err == 0.0 else float("inf")
    return err / ref


def psnr(reference, estimate) -> float:
    """Peak signal-to-noise ratio in dB, peak = max |reference|, capped at 99 dB."""
    reference = as_tensor(reference)
    estimate = as_tensor(estimate)
    if reference.shape != estimate.shape:
        raise ValueError("shape mismatch")
    mse = float(np.mean((reference - estimate) ** 2))
    peak = float(np.abs(reference).max())
    if mse == 0.0:
        return PSNR_CAP_DB
    if peak == 0.0:
        return -PSNR_CAP_DB
    return float(min(PSNR_CAP_DB, 10.0 * np.log10(peak**2 / mse)))


def _normalize_columns(m, fallback):
    norms = np.linalg.norm(m, axis=0)
    ok = norms > 1e-300
    out = fallback.copy()
    out[:, ok] = m[:, ok] / norms[ok]
    return out


def _random_unit(rng, n, k):
    x = rng.standard_normal((n, k))
    return x / np.linalg.norm(x, axis=0)


def _build_backend(t, kind, estimator):
    start = time.perf_counter()
    backend = make_backend(kind, t, estimator)
    return backend, time.perf_counter() - start


def rtpm(t, cfg: RtpmConfig) -> CpdResult:
    """Symmetric robust tensor power method with deflation.

    For each component: ``num_inits`` random unit starts, ``num_iters`` power
    steps ``u <- T(I,u,u)/||T(I,u,u)||`` each, keep the start with the
    largest ``T(u,u,u)``, refine it, record ``lambda = T(u,u,u)`` and deflate.
    """
    t = as_tensor(t)
    if t.ndim != 3 or len(set(t.shape)) != 1:
        raise ValueError(f"rtpm needs a cubical 3rd-order tensor, got shape {t.shape}")
    size = t.shape[0]
    backend, sketch_time = _build_backend(t, cfg.backend, cfg.estimator)
    rng = np.random.default_rng(cfg.seed)

    placements = (0, 1, 2) if cfg.symmetrize and cfg.backend != "plain" else (0,)

    def step(u):
        y = sum(backend.contract_free([None if m == f else u for m in range(3)], f) for f in placements)
        return _normalize_columns(y, u)

    start = time.perf_counter()
    vectors, weights = [], []
    for _ in range(cfg.rank):
        u = _random_unit(rng, size, cfg.num_inits)
        for _ in range(cfg.num_iters):
            u = step(u)
        best = int(np.argmax(backend.contract_all(u, u, u)))
        u = u[:, best : best + 1]
        for _ in range(cfg.num_iters):
            u = step(u)
        lam = float(backend.contract_all(u, u, u)[0])
        u = u[:, 0]
        # A negative lambda from a noisy sketch is kept as is; the residual judges it.
        backend.deflate(lam, u, u, u)
        vectors.append(u)
        weights.append(lam)
    iter_time = time.perf_counter() - start
    factor = np.column_stack(vectors)
    weights = np.array(weights)
    return CpdResult(
        CpTensor(weights, (factor, factor, factor)),
        weights.copy(),
        {"sketch": sketch_time, "iterations": iter_time},
        cfg.rank * 2 * cfg.num_iters,
        backend.hash_memory,
    )


def rtpm_asym(t, cfg: RtpmConfig) -> CpdResult:
    """Asymmetric power method: alternating rank-1 updates of ``u``, ``v``, ``w``."""
    t = as_tensor(t)
    if t.ndim != 3:
        raise ValueError(f"rtpm_asym needs a 3rd-order tensor, got shape {t.shape}")
    backend, sketch_time = _build_backend(t, cfg.backend, cfg.estimator)
    rng = np.random.default_rng(cfg.seed)

    def sweep(u, v, w):
        u = _normalize_columns(backend.contract_free([None, v, w], 0), u)
        v = _normalize_columns(backend.contract_free([u, None, w], 1), v)
        w = _normalize_columns(backend.contract_free([u, v, None], 2), w)
        return u, v, w

    start = time.perf_counter()
    cols = ([], [], [])
    weights = []
    for _ in range(cfg.rank):
        uvw = tuple(_random_unit(rng, n, cfg.num_inits) for n in t.shape)
        for _ in range(cfg.num_iters):
            uvw = sweep(*uvw)
        best = int(np.argmax(np.abs(backend.contract_all(*uvw))))
        uvw = tuple(m[:, best : best + 1] for m in uvw)
        for _ in range(cfg.num_iters):
            uvw = sweep(*uvw)
        lam = float(backend.contract_all(*uvw)[0])
        u, v, w = (m[:, 0] for m in uvw)
        if lam < 0:
            lam, w = -lam, -w
        backend.deflate(lam, u, v, w)
        for store, vecn in zip(cols, (u, v, w)):
            store.append(vecn)
        weights.append(lam)
    iter_time = time.perf_counter() - start
    weights = np.array(weights)
    cp = CpTensor(weights, tuple(np.column_stack(c) for c in cols))
    return CpdResult(
        cp,
        weights.copy(),
        {"sketch": sketch_time, "iterations": iter_time},
        cfg.rank * 2 * cfg.num_iters,
        backend.hash_memory,
    )


def als(t, cfg: AlsConfig) -> CpdResult:
    """Alternating least squares for a rank-``cfg.rank`` CP model.

    Mode-``n`` update: ``U_n = M_n pinv(*_{m != n} U_m^T U_m)`` where column
    ``r`` of ``M_n`` is ``T`` contracted with the other factors' ``r``-th
    columns (exact or sketched).  Columns are normalized into the weights
    after every update.  Stops when the relative residual (exact for
    ``plain``, measured between sketches otherwise) changes by less than
    ``cfg.tol``.
    """
    t = as_tensor(t)
    if t.ndim != 3:
        raise ValueError(f"als needs a 3rd-order tensor, got shape {t.shape}")
    backend, sketch_time = _build_backend(t, cfg.backend, cfg.estimator)
    rng = np.random.default_rng(cfg.seed)
    factors = [_random_unit(rng, n, cfg.rank) for n in t.shape]
    weights = np.ones(cfg.rank)

    start = time.perf_counter()
    prev = np.inf
    it = 0
    for it in range(1, cfg.max_iters + 1):
        for n in range(3):
            mats = [None if m == n else factors[m] for m in range(3)]
            mttkrp = backend.contract_free(mats, n)
            gram = np.ones((cfg.rank, cfg.rank))
            for m in range(3):
                if m != n:
                    gram *= factors[m].T @ factors[m]
            update = mttkrp @ np.linalg.pinv(gram)
            weights = np.linalg.norm(update, axis=0)
            factors[n] = _normalize_columns(update, factors[n])
        fit = backend.sketch_fit(CpTensor(weights, tuple(factors)))
        if abs(prev - fit) < cfg.tol:
            break
        prev = fit
    iter_time = time.perf_counter() - start
    cp = CpTensor(weights, tuple(factors))
    return CpdResult(cp, weights.copy(), {"sketch": sketch_time, "iterations": iter_time}, it, backend.hash_memory)
