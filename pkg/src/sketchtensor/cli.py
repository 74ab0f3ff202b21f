"""``sketchtensor`` command line.

Every subcommand accepts ``--config FILE`` (one JSON object whose keys are
option names with dashes or underscores); explicit flags win over config
values.  ``--seed`` falls back to ``$SKETCHTENSOR_SEED`` and then to 0.

Exit codes: 0 success, 2 invalid arguments or unreadable input, 3 NaN/Inf
in an input or a result.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import compression as comp
from . import io as sio
from .cpd import AlsConfig, RtpmConfig, als, psnr, residual_norm, rtpm, rtpm_asym
from .estimators import BACKENDS, EstimatorConfig, est_inner, make_backend
from .experiments import KINDS, ExperimentSpec, metrics_document, rows_to_csv, run_experiment
from .hashing import make_families
from .sketches import KINDS as SKETCH_KINDS
from .sketches import sketch
from .synthetic import gen_synthetic_asymmetric, gen_synthetic_symmetric
from .tensor import CpTensor, contract_free, densify

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3

# Largest dense tensor for which `estimate` brute-forces the exact value.
ORACLE_LIMIT = 1 << 24


class UsageError(Exception):
    pass


class NumericError(Exception):
    pass


def _check_finite(x, what):
    arrays = [x.weights, *x.factors] if isinstance(x, CpTensor) else [np.asarray(x, dtype=np.float64)]
    if not all(np.all(np.isfinite(a)) for a in arrays):
        raise NumericError(f"{what} contains NaN or Inf")
    return x


def _seed(args):
    if args.seed is not None:
        return int(args.seed)
    env = os.environ.get("SKETCHTENSOR_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"SKETCHTENSOR_SEED must be an integer, got {env!r}") from None
    return 0


def _load(path, what="input"):
    return _check_finite(sio.load_array(path), what)


def _emit(doc, path):
    text = json.dumps(doc, indent=2, default=float)
    if path:
        Path(path).write_text(text + "\n")
    else:
        print(text)


def _hash_lens(value):
    parts = [int(p) for p in str(value).split(",") if p.strip()]
    if not parts or min(parts) < 1:
        raise argparse.ArgumentTypeError("hash length must be a positive integer or a comma list")
    return parts[0] if len(parts) == 1 else tuple(parts)


def _common(p, sketch=True):
    p.add_argument("--config", help="JSON file of option defaults")
    p.add_argument("--seed", type=int, help="master seed (default $SKETCHTENSOR_SEED or 0)")
    p.add_argument("--metrics", help="write metrics JSON here instead of stdout")
    if sketch:
        p.add_argument("--hash-len", "-J", type=_hash_lens, default=100, help="J, or one per mode as a comma list")
        p.add_argument("--count", "-D", type=int, default=1, help="independent sketches (median-combined)")


def build_parser():
    parser = argparse.ArgumentParser(prog="sketchtensor", description="Fast count sketches for tensors.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic tensor or operand")
    p.add_argument("kind", choices=["symmetric", "asymmetric", "uniform"])
    p.add_argument("--size", type=int, default=50, help="I (symmetric/asymmetric)")
    p.add_argument("--rank", type=int, default=10)
    p.add_argument("--sigma", type=float, default=0.01)
    p.add_argument("--shape", type=lambda s: tuple(int(x) for x in s.split(",")), help="uniform: comma dims")
    p.add_argument("--low", type=float, default=-5.0)
    p.add_argument("--high", type=float, default=5.0)
    p.add_argument("--out", "-o", required=True)
    p.add_argument("--cp-out", help="also write the noise-free CP ground truth")
    _common(p, sketch=False)

    p = sub.add_parser("sketch", help="sketch a tensor file into a bundle")
    p.add_argument("input")
    p.add_argument("--kind", choices=SKETCH_KINDS, default="FCS")
    p.add_argument("--out", "-o", required=True)
    p.add_argument("--sidecar", help="also write the hash families as a JSON sidecar")
    p.add_argument("--dump-maps", action="store_true", help="store hash tables verbatim (debug)")
    _common(p)

    p = sub.add_parser("estimate", help="sketched contraction or inner-product estimate")
    p.add_argument("tensor")
    p.add_argument("--vectors", help="I x k matrix whose columns are u[, v, w]; one column means u = v = w")
    p.add_argument("--other", help="second tensor file: estimate <T, other>")
    p.add_argument("--free-mode", type=int, choices=[0, 1, 2], help="leave this mode uncontracted")
    p.add_argument("--backend", choices=[b for b in BACKENDS if b != "plain"], default="FCS")
    p.add_argument("--no-oracle", action="store_true", help="skip the exact comparison")
    _common(p)

    for name, helptext in (("cpd-rtpm", "robust tensor power method"), ("cpd-als", "alternating least squares")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("tensor")
        p.add_argument("--rank", "-R", type=int, required=True)
        p.add_argument("--backend", choices=BACKENDS, default="FCS")
        p.add_argument("--out", "-o", help="CP result file")
        if name == "cpd-rtpm":
            p.add_argument("--inits", type=int, default=15)
            p.add_argument("--iters", type=int, default=20)
            p.add_argument("--asymmetric", action="store_true")
            p.add_argument("--no-symmetrize", action="store_true")
        else:
            p.add_argument("--max-iters", type=int, default=50)
            p.add_argument("--tol", type=float, default=1e-8)
        _common(p)

    for name in ("compress-kron", "compress-contraction"):
        p = sub.add_parser(name, help=f"{name.split('-')[1]} compression in the sketch domain")
        p.add_argument("a")
        p.add_argument("b")
        p.add_argument("--method", choices=comp.METHODS, default="FCS")
        p.add_argument("--cr", type=float, help="target compression ratio (overrides --hash-len)")
        p.add_argument("--out", "-o", required=True)
        p.add_argument("--dump-maps", action="store_true")
        _common(p)

    p = sub.add_parser("decompress", help="read entries back from a compressed bundle")
    p.add_argument("bundle")
    sel = p.add_mutually_exclusive_group(required=True)
    sel.add_argument("--index", nargs="+", type=int, action="append", help="row col, or i1 i2 i3 i4")
    sel.add_argument("--all", action="store_true", help="reconstruct everything")
    p.add_argument("--oracle", help="exact product file for the error report")
    p.add_argument("--out", "-o", help="write reconstructed values (with --all)")
    _common(p, sketch=False)

    p = sub.add_parser("bench", help="run an experiment grid or the kernel benchmark")
    p.add_argument("kind", choices=list(KINDS) + ["kernels"])
    p.add_argument("--backends", type=lambda s: [x for x in s.split(",") if x])
    p.add_argument("--hash-lens", type=lambda s: [int(x) for x in s.split(",")])
    p.add_argument("--sketch-counts", type=lambda s: [int(x) for x in s.split(",")])
    p.add_argument("--sigmas", type=lambda s: [float(x) for x in s.split(",")])
    p.add_argument("--seeds", type=lambda s: [int(x) for x in s.split(",")])
    p.add_argument("--size", type=int)
    p.add_argument("--rank", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--reps", type=int)
    p.add_argument("--jobs", type=int)
    p.add_argument("--output", help="base path for <output>.csv and <output>.json")
    _common(p, sketch=False)
    return parser


def _apply_config(parser, argv):
    """Parse ``argv``; config-file keys become defaults that explicit flags override."""
    args = parser.parse_args(argv)
    if not getattr(args, "config", None):
        return args
    try:
        conf = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {args.config}: {exc}") from None
    if not isinstance(conf, dict):
        raise UsageError("config must be a JSON object")
    conf = {k.replace("-", "_"): v for k, v in conf.items()}
    unknown = set(conf) - set(vars(args))
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    sub = parser._subparsers._group_actions[0].choices[args.command]
    sub.set_defaults(**conf)
    args = parser.parse_args(argv)
    if isinstance(getattr(args, "hash_len", None), (str, list)):
        args.hash_len = _hash_lens(",".join(map(str, np.ravel(args.hash_len))))
    return args


def cmd_gen(args):
    seed = _seed(args)
    cp = None
    if args.kind == "symmetric":
        t, cp = gen_synthetic_symmetric(args.size, args.rank, args.sigma, seed, return_cp=True)
    elif args.kind == "asymmetric":
        t, cp = gen_synthetic_asymmetric(args.size, args.rank, args.sigma, seed, return_cp=True)
    else:
        if not args.shape:
            raise UsageError("uniform generation needs --shape")
        if args.high <= args.low:
            raise UsageError("--high must exceed --low")
        t = np.random.default_rng(seed).uniform(args.low, args.high, args.shape)
    sio.save_array(args.out, t)
    if args.cp_out:
        if cp is None:
            raise UsageError("--cp-out only applies to symmetric/asymmetric")
        sio.write_cp(args.cp_out, cp)
    _emit({"kind": "gen", "generator": args.kind, "shape": list(t.shape), "seed": seed}, args.metrics)


def cmd_sketch(args):
    x = _load(args.input)
    shape = x.shape
    families = make_families(shape, args.hash_len, _seed(args), args.count)
    if args.kind == "CS":
        families = make_families((int(np.prod(shape)),), args.hash_len, _seed(args), args.count)
    start = time.perf_counter()
    sketches = [sketch(args.kind, x, f) for f in families]
    elapsed = time.perf_counter() - start
    for s in sketches:
        _check_finite(s.values, "sketch")
    sio.save_sketches(args.out, sketches, dump_maps=args.dump_maps)
    if args.sidecar:
        sio.write_families(args.sidecar, families, dump_maps=args.dump_maps)
    doc = {
        "kind": "sketch",
        "sketch_kind": args.kind,
        "input_shape": list(shape),
        "length": int(sketches[0].values.size),
        "count": args.count,
        "seed": _seed(args),
        "hash_memory": sum(f.nbytes for f in families),
        "timings": {"sketch": elapsed},
    }
    _emit(doc, args.metrics)


def _vectors(path, shape):
    m = _load(path, "vectors")
    m = m[:, None] if m.ndim == 1 else m
    if m.ndim != 2 or m.shape[1] not in (1, 2, 3):
        raise UsageError("vector file must be an I x 1, I x 2 or I x 3 matrix")
    cols = [m[:, min(k, m.shape[1] - 1)] for k in range(3)]
    if m.shape[1] == 2:
        cols = [m[:, 0], m[:, 1], m[:, 1]]
    for n, (c, i) in enumerate(zip(cols, shape)):
        if c.size != i:
            raise UsageError(f"vector for mode {n} has length {c.size}, tensor has {i}")
    return cols


def cmd_estimate(args):
    t = _load(args.tensor)
    if isinstance(t, CpTensor):
        t = densify(t)
    cfg = EstimatorConfig(args.hash_len, args.count, _seed(args))
    start = time.perf_counter()
    if args.other:
        other = _load(args.other, "other tensor")
        other = densify(other) if isinstance(other, CpTensor) else other
        if other.shape != t.shape:
            raise UsageError(f"shape mismatch {t.shape} vs {other.shape}")
        quantity = "inner"
        value = est_inner(t, other, cfg)
        exact = lambda: float(np.vdot(t, other))  # noqa: E731
    else:
        if not args.vectors:
            raise UsageError("estimate needs --vectors or --other")
        if t.ndim != 3:
            raise UsageError("vector contractions need a 3rd-order tensor")
        u, v, w = _vectors(args.vectors, t.shape)
        backend = make_backend(args.backend, t, cfg)
        if args.free_mode is None:
            quantity = "T(u,v,w)"
            value = float(backend.contract_all(u, v, w)[0])
            exact = lambda: float(np.einsum("ijk,i,j,k->", t, u, v, w))  # noqa: E731
        else:
            mats = [u, v, w]
            mats[args.free_mode] = None
            quantity = f"T(free mode {args.free_mode})"
            value = backend.contract_free(mats, args.free_mode).ravel()
            exact = lambda: contract_free(t, [u, v, w], args.free_mode)  # noqa: E731
    elapsed = time.perf_counter() - start
    _check_finite(value, "estimate")
    doc = {"kind": "estimate", "quantity": quantity, "backend": "FCS" if args.other else args.backend}
    doc["estimate"] = value if np.ndim(value) == 0 else np.asarray(value).tolist()
    doc["exact"] = None
    doc["error"] = None
    if not args.no_oracle and t.size <= ORACLE_LIMIT:
        ex = exact()
        doc["exact"] = ex if np.ndim(ex) == 0 else np.asarray(ex).tolist()
        denom = np.linalg.norm(ex)
        doc["error"] = float(np.linalg.norm(np.asarray(value) - ex) / denom) if denom > 0 else None
    doc["timings"] = {"estimate": elapsed}
    _emit(doc, args.metrics)


def cmd_cpd(args):
    t = _load(args.tensor)
    if isinstance(t, CpTensor):
        t = densify(t)
    est = EstimatorConfig(args.hash_len, args.count, _seed(args))
    if args.command == "cpd-rtpm":
        cfg = RtpmConfig(args.rank, args.inits, args.iters, args.backend, est, _seed(args), not args.no_symmetrize)
        res = (rtpm_asym if args.asymmetric else rtpm)(t, cfg)
    else:
        cfg = AlsConfig(args.rank, args.max_iters, args.backend, est, args.tol, _seed(args))
        res = als(t, cfg)
    _check_finite(res.cp, "CP result")
    if args.out:
        sio.write_cp(args.out, res.cp)
    doc = {
        "kind": "cpd",
        "method": "rtpm" if args.command == "cpd-rtpm" else "als",
        "backend": args.backend,
        "rank": args.rank,
        "J": args.hash_len if np.ndim(args.hash_len) == 0 else list(args.hash_len),
        "D": args.count,
        "seed": _seed(args),
        "residual": residual_norm(t, res.cp),
        "psnr": psnr(t, densify(res.cp)),
        "hash_memory": res.hash_memory,
        "iterations": res.iterations,
        "eigenvalues": res.eigenvalues.tolist(),
        "timings": dict(res.timings),
    }
    _emit(doc, args.metrics)


def cmd_compress(args):
    a = _load(args.a, "operand a")
    b = _load(args.b, "operand b")
    if isinstance(a, CpTensor) or isinstance(b, CpTensor):
        raise UsageError("compression operands must be dense")
    kron = args.command == "compress-kron"
    if kron and (a.ndim != 2 or b.ndim != 2):
        raise UsageError("compress-kron takes two matrices")
    if not kron and (a.ndim != 3 or b.ndim != 3 or a.shape[2] != b.shape[0]):
        raise UsageError("compress-contraction takes (I1,I2,L) and (L,I3,I4) tensors")
    dims = a.shape + b.shape if kron else a.shape[:2] + b.shape[1:]
    length = comp.hash_lengths_for_cr(dims, args.cr, args.method) if args.cr else args.hash_len
    if args.method == "HCS" and np.ndim(length) == 1 and len(length) == 1:
        length = length[0]
    fn = comp.compress_kron if kron else comp.compress_contraction
    start = time.perf_counter()
    sk = fn(a, b, length, args.count, _seed(args), args.method)
    elapsed = time.perf_counter() - start
    _check_finite(sk.values, "sketch")
    sio.save_compressed(args.out, sk, dump_maps=args.dump_maps)
    doc = {
        "kind": "compress",
        "operation": "kron" if kron else "contraction",
        "method": args.method,
        "shapes": list(sk.shapes),
        "hash_lens": [list(f.hash_lens) for f in sk.families[:1]][0],
        "D": args.count,
        "seed": _seed(args),
        "compression_ratio": sk.compression_ratio,
        "hash_memory": sk.hash_memory,
        "timings": {"compress": elapsed},
    }
    _emit(doc, args.metrics)


def cmd_decompress(args):
    sk = sio.load_compressed(args.bundle)
    kron = not isinstance(sk, comp.ContractionSketch)
    start = time.perf_counter()
    if args.all:
        full = comp.reconstruct_kron(sk) if kron else comp.reconstruct(sk)
        values = full
    else:
        want = 2 if kron else 4
        idx = np.array(args.index)
        if idx.ndim != 2 or idx.shape[1] != want:
            raise UsageError(f"each --index needs {want} integers")
        try:
            if kron:
                values = comp.decompress_kron(sk, idx[:, 0], idx[:, 1])
            else:
                values = comp.decompress_contraction(sk, *idx.T)
        except IndexError as exc:
            raise UsageError(str(exc)) from None
    elapsed = time.perf_counter() - start
    _check_finite(values, "decompressed values")
    doc = {"kind": "decompress", "bundle_type": "kron" if kron else "contraction", "count": int(np.size(values))}
    if args.all and args.out:
        sio.save_array(args.out, values)
    if not args.all:
        doc["values"] = np.atleast_1d(values).tolist()
    doc["relative_error"] = None
    if args.oracle:
        truth = _load(args.oracle, "oracle")
        if args.all:
            if truth.shape != values.shape:
                raise UsageError(f"oracle shape {truth.shape} does not match {values.shape}")
            doc["relative_error"] = comp.relative_error(values, truth)
        else:
            picked = truth[tuple(idx.T)]
            denom = np.linalg.norm(picked)
            doc["relative_error"] = float(np.linalg.norm(values - picked) / denom) if denom > 0 else None
    doc["timings"] = {"decompress": elapsed}
    _emit(doc, args.metrics)


def cmd_bench(args):
    if args.kind == "kernels":
        from .bench import kernel_benchmark

        rows = kernel_benchmark(reps=args.reps or 5, seed=_seed(args))
        doc = {"kind": "bench", "rows": rows}
        if args.output:
            Path(args.output).with_suffix(".json").write_text(json.dumps(doc, indent=2))
        _emit(doc, args.metrics)
        return
    conf = {"kind": args.kind}
    for key in ("backends", "hash_lens", "sketch_counts", "sigmas", "seeds", "size", "rank", "trials", "reps", "jobs", "output"):
        val = getattr(args, key)
        if val is not None:
            conf[key] = val
    if "seeds" not in conf:
        conf["seeds"] = [_seed(args)]
    spec = ExperimentSpec.from_dict(conf)
    rows = run_experiment(spec)
    for row in rows:
        for key, val in row.items():
            if isinstance(val, float) and not np.isfinite(val) and key != "psnr":
                raise NumericError(f"non-finite {key} in results")
    if args.output:
        _emit({"kind": "bench", "outputs": [str(Path(args.output).with_suffix(s)) for s in (".csv", ".json")]}, args.metrics)
    elif args.metrics:
        _emit(metrics_document(spec, rows), args.metrics)
    else:
        sys.stdout.write(rows_to_csv(rows))


COMMANDS = {
    "gen": cmd_gen,
    "sketch": cmd_sketch,
    "estimate": cmd_estimate,
    "cpd-rtpm": cmd_cpd,
    "cpd-als": cmd_cpd,
    "compress-kron": cmd_compress,
    "compress-contraction": cmd_compress,
    "decompress": cmd_decompress,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_USAGE
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        COMMANDS[args.command](args)
    except (NumericError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, ValueError, IndexError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
