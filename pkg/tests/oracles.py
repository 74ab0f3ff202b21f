"""Brute-force reference implementations used only by the tests.

Everything here loops over explicit multi-indices and shares no code with
the package beyond the hash tables themselves.
"""

import itertools

import numpy as np


def indices(shape):
    """All multi-indices, first index fastest (column-major order)."""
    for rev in itertools.product(*[range(i) for i in reversed(shape)]):
        yield tuple(reversed(rev))


def cs(x, buckets, signs, J):
    out = np.zeros(J)
    for i, xi in enumerate(x):
        out[buckets[i]] += signs[i] * xi
    return out


def fcs(t, family):
    out = np.zeros(sum(p.hash_len for p in family.pairs) - len(family.pairs) + 1)
    for idx in indices(t.shape):
        b = sum(int(p.bucket_map[i]) for p, i in zip(family.pairs, idx))
        s = np.prod([int(p.sign_map[i]) for p, i in zip(family.pairs, idx)])
        out[b] += s * t[idx]
    return out


def ts(t, family):
    J = family.pairs[0].hash_len
    out = np.zeros(J)
    for idx in indices(t.shape):
        b = sum(int(p.bucket_map[i]) for p, i in zip(family.pairs, idx)) % J
        s = np.prod([int(p.sign_map[i]) for p, i in zip(family.pairs, idx)])
        out[b] += s * t[idx]
    return out


def hcs(t, family):
    out = np.zeros(tuple(p.hash_len for p in family.pairs))
    for idx in indices(t.shape):
        b = tuple(int(p.bucket_map[i]) for p, i in zip(family.pairs, idx))
        s = np.prod([int(p.sign_map[i]) for p, i in zip(family.pairs, idx)])
        out[b] += s * t[idx]
    return out


def densify(weights, factors):
    shape = tuple(f.shape[0] for f in factors)
    out = np.zeros(shape)
    for idx in indices(shape):
        out[idx] = sum(w * np.prod([f[i, r] for f, i in zip(factors, idx)]) for r, w in enumerate(weights))
    return out


def kron(a, b):
    rows = []
    for i in range(a.shape[0]):
        rows.append(np.hstack([a[i, j] * b for j in range(a.shape[1])]))
    return np.vstack(rows)


def contract_pair_31(a, b):
    i1, i2, L = a.shape
    _, i3, i4 = b.shape
    out = np.zeros((i1, i2, i3, i4))
    for idx in indices(out.shape):
        out[idx] = sum(a[idx[0], idx[1], l] * b[l, idx[2], idx[3]] for l in range(L))
    return out


def contract_free(t, u, v, w, free):
    vecs = [u, v, w]
    out = np.zeros(t.shape[free])
    for idx in indices(t.shape):
        c = t[idx]
        for m in range(3):
            if m != free:
                c *= vecs[m][idx[m]]
        out[idx[free]] += c
    return out


def contract_all(t, u, v, w):
    total = 0.0
    for i, j, k in indices(t.shape):
        total += t[i, j, k] * u[i] * v[j] * w[k]
    return total


def rel_err(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    scale = max(np.linalg.norm(b), 1e-300)
    return float(np.linalg.norm(a - b) / scale)
