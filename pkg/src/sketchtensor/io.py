"""Binary tensor/CP formats, sketch bundles and hash-family sidecars.

All integers and floats are little-endian; arrays are column-major.

* dense tensor: ``b"STEN1"``, u8 order ``N``, ``N`` x u64 dims, float64 data
* CP tensor: ``b"SCPT1"``, u8 ``N``, u64 rank ``R``, ``N`` x u64 dims,
  ``R`` float64 weights, then each ``I_n x R`` factor
* sketch bundle: ``b"SSKT1"``, u64 header length, UTF-8 JSON header, float64
  payload (shape recorded in the header)

Hash families travel as JSON sidecars holding the master seed and dims; the
maps are regenerated on load.  ``dump_maps=True`` adds the tables verbatim.
"""

from __future__ import annotations

import json
import struct
from importlib import resources
from pathlib import Path

import numpy as np

from .compression import ContractionSketch, KronSketch
from .hashing import HashFamily, family_from_json, family_to_json
from .sketches import SketchTensor, SketchVec
from .tensor import CpTensor, as_tensor, vec

TENSOR_MAGIC = b"STEN1"
CP_MAGIC = b"SCPT1"
SKETCH_MAGIC = b"SSKT1"
_F8 = np.dtype("<f8")


class FormatError(ValueError):
    """Raised for truncated files or a wrong magic string."""


def _read_exact(buf, n, what):
    data = buf.read(n)
    if len(data) != n:
        raise FormatError(f"truncated file while reading {what}")
    return data


def _read_floats(buf, count, what):
    return np.frombuffer(_read_exact(buf, 8 * count, what), dtype=_F8).astype(np.float64)


def _check_magic(buf, magic):
    got = buf.read(len(magic))
    if got != magic:
        raise FormatError(f"expected magic {magic!r}, got {got!r}")


def _expect_eof(buf):
    if buf.read(1):
        raise FormatError("trailing bytes after payload")


def write_tensor(path, t):
    t = as_tensor(t)
    if t.ndim > 255:
        raise ValueError("order must fit in one byte")
    with open(path, "wb") as f:
        f.write(TENSOR_MAGIC)
        f.write(struct.pack("<B", t.ndim))
        f.write(struct.pack(f"<{t.ndim}Q", *t.shape))
        f.write(vec(t).astype(_F8).tobytes())


def read_tensor(path) -> np.ndarray:
    with open(path, "rb") as f:
        _check_magic(f, TENSOR_MAGIC)
        (order,) = struct.unpack("<B", _read_exact(f, 1, "order"))
        dims = struct.unpack(f"<{order}Q", _read_exact(f, 8 * order, "dims"))
        data = _read_floats(f, int(np.prod(dims)), "tensor data")
        _expect_eof(f)
    return data.reshape(dims, order="F")


def write_cp(path, cp: CpTensor):
    with open(path, "wb") as f:
        f.write(CP_MAGIC)
        f.write(struct.pack("<BQ", cp.order, cp.rank))
        f.write(struct.pack(f"<{cp.order}Q", *cp.shape))
        f.write(cp.weights.astype(_F8).tobytes())
        for factor in cp.factors:
            f.write(factor.ravel(order="F").astype(_F8).tobytes())


def read_cp(path) -> CpTensor:
    with open(path, "rb") as f:
        _check_magic(f, CP_MAGIC)
        order, rank = struct.unpack("<BQ", _read_exact(f, 9, "header"))
        dims = struct.unpack(f"<{order}Q", _read_exact(f, 8 * order, "dims"))
        weights = _read_floats(f, rank, "weights")
        factors = tuple(
            _read_floats(f, i * rank, f"factor {n}").reshape((i, rank), order="F") for n, i in enumerate(dims)
        )
        _expect_eof(f)
    return CpTensor(weights, factors)


def load_array(path):
    """Dense tensor or CP tensor from ``.npy``/``STEN1``/``SCPT1``, sniffed by content."""
    path = Path(path)
    with open(path, "rb") as f:
        head = f.read(6)
    if head.startswith(TENSOR_MAGIC):
        return read_tensor(path)
    if head.startswith(CP_MAGIC):
        return read_cp(path)
    if head.startswith(b"\x93NUMPY"):
        return as_tensor(np.load(path, allow_pickle=False))
    raise FormatError(f"{path}: unrecognized tensor format")


def save_array(path, x):
    """Write by extension: ``.npy`` via numpy, anything else as STEN1/SCPT1."""
    path = Path(path)
    if isinstance(x, CpTensor):
        write_cp(path, x)
    elif path.suffix == ".npy":
        np.save(path, as_tensor(x))
    else:
        write_tensor(path, x)


def write_bundle(path, values, header: dict):
    """Sketch payload plus a JSON header (shape and dtype are filled in)."""
    values = np.asarray(values, dtype=np.float64)
    header = dict(header, shape=list(values.shape), dtype="<f8")
    raw = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(SKETCH_MAGIC)
        f.write(struct.pack("<Q", len(raw)))
        f.write(raw)
        f.write(values.ravel(order="F").astype(_F8).tobytes())


def read_bundle(path):
    """Return ``(values, header)``."""
    with open(path, "rb") as f:
        _check_magic(f, SKETCH_MAGIC)
        (n,) = struct.unpack("<Q", _read_exact(f, 8, "header length"))
        header = json.loads(_read_exact(f, n, "header").decode("utf-8"))
        shape = tuple(header["shape"])
        values = _read_floats(f, int(np.prod(shape)), "payload").reshape(shape, order="F")
        _expect_eof(f)
    return values, header


def write_families(path, families, dump_maps=False):
    text = family_to_json(list(families), dump_maps=dump_maps)
    Path(path).write_text(text)


def read_families(path) -> list[HashFamily]:
    return family_from_json(Path(path).read_text())


def _family_docs(families, dump_maps):
    return json.loads(family_to_json(list(families), dump_maps=dump_maps))


def save_sketches(path, sketches, dump_maps=False):
    """``D`` sketches of one tensor (same kind, one family each) in a bundle."""
    sketches = list(sketches)
    if not sketches:
        raise ValueError("nothing to save")
    kinds = {s.kind for s in sketches}
    if len(kinds) != 1:
        raise ValueError(f"mixed sketch kinds {sorted(kinds)}")
    header = {
        "type": "sketch",
        "kind": kinds.pop(),
        "families": _family_docs([s.family for s in sketches], dump_maps),
    }
    write_bundle(path, np.array([s.values for s in sketches]), header)


def load_sketches(path):
    values, header = read_bundle(path)
    if header.get("type") != "sketch":
        raise FormatError(f"{path}: not a sketch bundle")
    families = family_from_json(json.dumps(header["families"]))
    cls = SketchTensor if header["kind"] == "HCS" else SketchVec
    return [cls(v, f, header["kind"]) for v, f in zip(values, families)]


def save_compressed(path, sk, dump_maps=False):
    """Bundle for a :class:`KronSketch` or :class:`ContractionSketch`."""
    header = {
        "type": "contraction" if isinstance(sk, ContractionSketch) else "kron",
        "method": sk.method,
        "shapes": list(sk.shapes),
        "families": _family_docs(sk.families, dump_maps),
    }
    if isinstance(sk, ContractionSketch):
        header["contracted_dim"] = sk.contracted_dim
    write_bundle(path, sk.values, header)


def load_compressed(path):
    values, header = read_bundle(path)
    kind = header.get("type")
    if kind not in ("kron", "contraction"):
        raise FormatError(f"{path}: not a compressed-product bundle")
    families = tuple(family_from_json(json.dumps(header["families"])))
    shapes = tuple(header["shapes"])
    if kind == "kron":
        return KronSketch(values, families, shapes, header["method"])
    return ContractionSketch(values, families, shapes, header["method"], header["contracted_dim"])


def bundle_type(path) -> str:
    with open(path, "rb") as f:
        _check_magic(f, SKETCH_MAGIC)
        (n,) = struct.unpack("<Q", _read_exact(f, 8, "header length"))
        return json.loads(_read_exact(f, n, "header").decode("utf-8")).get("type", "")


def metrics_schema() -> dict:
    """The shipped JSON schema for metrics documents."""
    text = resources.files("sketchtensor").joinpath("schemas/metrics.schema.json").read_text()
    return json.loads(text)
