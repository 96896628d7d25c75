"""Seeded instance generators shared by the unit and acceptance tests.

Every generator draws from ``np.random.default_rng(seed)`` in a fixed order,
so an instance is fully determined by its seed.
"""
import numpy as np

from tensorkit import Tensor, TensorDataset


def orthonormal(rng, rows, cols):
    q, r = np.linalg.qr(rng.standard_normal((rows, cols)))
    return q * np.sign(np.diag(r))


def cp_instance(seed, shape=(12, 10, 8), rank=2):
    rng = np.random.default_rng(seed)
    factors = [rng.standard_normal((i, rank)) for i in shape]
    x = np.einsum("ir,jr,kr->ijk", *factors) if len(shape) == 3 else None
    if x is None:
        x = np.zeros(shape)
        for r in range(rank):
            term = factors[0][:, r]
            for f in factors[1:]:
                term = np.multiply.outer(term, f[:, r])
            x = x + term
    return x, factors


def tucker_instance(seed, shape=(8, 7, 6), ranks=(3, 2, 4)):
    rng = np.random.default_rng(seed)
    core = rng.standard_normal(ranks)
    factors = [orthonormal(rng, i, r) for i, r in zip(shape, ranks)]
    x = np.einsum("abc,ia,jb,kc->ijk", core, *factors)
    return x, core, factors


def tt_instance(seed, shape=(5, 6, 4, 3), ranks=(2, 3, 2)):
    rng = np.random.default_rng(seed)
    bonds = (1, *ranks, 1)
    cores = [rng.standard_normal((bonds[n], i, bonds[n + 1])) for n, i in enumerate(shape)]
    x = cores[0]
    for c in cores[1:]:
        x = np.tensordot(x, c, axes=(-1, 0))
    return x.reshape(shape), cores


def cmtf_instance(seed, shape=(12, 10, 8), side_cols=6, rank=2):
    rng = np.random.default_rng(seed)
    a, b, c = (rng.standard_normal((i, rank)) for i in shape)
    v = rng.standard_normal((side_cols, rank))
    x = np.einsum("ir,jr,kr->ijk", a, b, c)
    return x, a @ v.T, (a, b, c, v)


def parafac2_instance(seed, rows=(5, 6, 7, 8), cols=4, rank=2):
    """Orthogonal H, Gaussian V, S ~ U[0.5, 1.5], Haar-distributed P_k."""
    rng = np.random.default_rng(seed)
    h = orthonormal(rng, rank, rank)
    v = rng.standard_normal((cols, rank))
    s = rng.uniform(0.5, 1.5, size=(len(rows), rank))
    slices = []
    for k, j in enumerate(rows):
        p = orthonormal(rng, j, rank)
        slices.append(p @ h @ np.diag(s[k]) @ v.T)
    return slices, (h, s, v)


def separable_dataset(seed=0, shape=(4, 3), n=20, noise=0.01):
    """``X_i = s_i u o v + noise``, label ``sign(s_i)``, with |s_i| ~ U[0.5, 1.5]."""
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(shape[0])
    v = rng.standard_normal(shape[1])
    s = rng.choice([-1.0, 1.0], size=n) * rng.uniform(0.5, 1.5, size=n)
    xs = tuple(Tensor(si * np.outer(u, v) + noise * rng.standard_normal(shape)) for si in s)
    return TensorDataset(xs, np.where(s > 0, 1, -1))


def class_direction_dataset(seed=0, shape=(4, 3), n=20, noise=0.01):
    """Rank-1 samples ``a_i u_y o v_y + noise`` with class-specific ``u_y, v_y``."""
    rng = np.random.default_rng(seed)
    dirs = {y: [rng.standard_normal(i) for i in shape] for y in (1, -1)}
    labels = np.where(np.arange(n) % 2 == 0, 1, -1)
    xs = []
    for y in labels:
        a = rng.uniform(0.5, 1.5)
        term = dirs[y][0]
        for d in dirs[y][1:]:
            term = np.multiply.outer(term, d)
        xs.append(Tensor(a * term + noise * rng.standard_normal(shape)))
    return TensorDataset(tuple(xs), labels)
