"""Exact low-lying spectrum of H(lambda) = diag(E_P) - lambda * sum_i X_i.

States are indexed by bitmask, bit i (1-based) <-> ``1 << (i - 1)``.  Small
systems are diagonalized densely; larger ones use a restarted block Krylov
(Lanczos-type) solver with full reorthogonalization that only needs
matrix-free products with H.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ConvergenceError, InvalidParameter, SizeError
from .instance import to_mask

MAX_APPLY_BITS = 28
MAX_ITERATIVE_BITS = 24
DENSE_MAX_BITS = 10
RESIDUAL_TOL = 1e-10


@dataclass
class SpectrumResult:
    lam: float
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray | None  # columns
    residual_norms: np.ndarray

    @property
    def gap(self):
        if len(self.eigenvalues) < 2:
            raise InvalidParameter("gap needs at least two eigenvalues")
        return float(max(self.eigenvalues[1] - self.eigenvalues[0], 0.0))


def cost_vector(instance):
    """E_P for every basis state, as an int array of length 2^N."""
    n = instance.n_bits
    if n > MAX_APPLY_BITS:
        raise SizeError(f"N={n} exceeds the {MAX_APPLY_BITS}-bit memory bound")
    idx = np.arange(1 << n, dtype=np.int64)
    energy = np.zeros(1 << n, dtype=np.int64)
    for c in instance.clauses:
        ones = ((idx >> (c.i - 1)) & 1) + ((idx >> (c.j - 1)) & 1) + ((idx >> (c.k - 1)) & 1)
        energy += (ones - 1) ** 2
    return energy


def _hop(v, n):
    """sum_i v[sigma xor e_i] for every sigma."""
    out = np.zeros_like(v)
    shape = v.shape[1:]
    for b in range(n):
        view = v.reshape((-1, 2, 1 << b) + shape)
        out.reshape((-1, 2, 1 << b) + shape)[...] += view[:, ::-1]
    return out


def apply_hamiltonian(instance, lam, v, diag=None):
    """(H v)_sigma = E_P(sigma) v_sigma - lam * sum_i v_{sigma xor e_i}.

    ``v`` may be a vector or a (2^N, k) block.
    """
    n = instance.n_bits
    if n > MAX_APPLY_BITS:
        raise SizeError(f"N={n} exceeds the {MAX_APPLY_BITS}-bit memory bound")
    if lam < 0:
        raise InvalidParameter("lambda must be non-negative")
    v = np.asarray(v, dtype=float)
    if v.shape[0] != 1 << n:
        raise InvalidParameter(f"state length {v.shape[0]} != 2^{n}")
    if diag is None:
        diag = cost_vector(instance)
    d = diag.astype(float)
    out = d.reshape((-1,) + (1,) * (v.ndim - 1)) * v
    if lam:
        out -= lam * _hop(v, n)
    return out


def dense_hamiltonian(instance, lam, diag=None):
    n = instance.n_bits
    if diag is None:
        diag = cost_vector(instance)
    dim = 1 << n
    h = np.diag(diag.astype(float))
    idx = np.arange(dim)
    for b in range(n):
        h[idx, idx ^ (1 << b)] = -lam
    return h


def _residuals(instance, lam, diag, values, vectors):
    hv = apply_hamiltonian(instance, lam, vectors, diag)
    return np.linalg.norm(hv - vectors * values[None, :], axis=0)


def _block_krylov(instance, lam, diag, k, tol, seed, max_iter=500, block=None):
    """Block Davidson iteration with diagonal preconditioning.

    The search space is kept fully orthonormal (two Gram-Schmidt passes) and
    restarted from the current Ritz vectors when it grows past ``max_basis``.
    """
    n = instance.n_bits
    dim = 1 << n
    block = min(block or k + 2, dim)
    max_basis = min(max(6 * block, 24), dim)
    rng = np.random.default_rng(seed)
    d = diag.astype(float)
    x = rng.standard_normal((dim, block)) * 1e-3
    low = np.argsort(diag, kind="stable")[:block]
    x[low, np.arange(block)] += 1.0
    basis, _ = np.linalg.qr(x)
    images = apply_hamiltonian(instance, lam, basis, diag)
    scale = max(float(d.max()) + lam * n, 1.0)
    residual = np.inf
    for _ in range(max_iter):
        t = basis.T @ images
        theta, s = np.linalg.eigh(0.5 * (t + t.T))
        ritz = basis @ s[:, :block]
        hritz = images @ s[:, :block]
        res = hritz - ritz * theta[None, :block]
        norms = np.linalg.norm(res, axis=0)
        residual = float(norms[:k].max())
        if residual <= tol * scale:
            vecs = ritz[:, :k] / np.linalg.norm(ritz[:, :k], axis=0)
            return theta[:k], vecs
        active = norms > tol * scale * 1e-2
        denom = theta[None, :block][:, active] - d[:, None]
        small = np.abs(denom) < 1e-2
        denom[small] = np.where(denom[small] >= 0, 1e-2, -1e-2)
        corr = res[:, active] / denom
        if basis.shape[1] + corr.shape[1] > max_basis:
            basis, _ = np.linalg.qr(ritz)
            images = apply_hamiltonian(instance, lam, basis, diag)
        for _ in range(2):
            corr = corr - basis @ (basis.T @ corr)
        q, r = np.linalg.qr(corr)
        keep = np.abs(np.diag(r)) > 1e-10 * np.linalg.norm(corr, axis=0).max()
        if not keep.any():
            q = rng.standard_normal((dim, 1))
            q -= basis @ (basis.T @ q)
            q /= np.linalg.norm(q)
        else:
            q = q[:, keep]
            q -= basis @ (basis.T @ q)
            q /= np.linalg.norm(q, axis=0)
        basis = np.hstack([basis, q])
        images = np.hstack([images, apply_hamiltonian(instance, lam, q, diag)])
    raise ConvergenceError(
        f"iterative eigensolver did not converge at lambda={lam}: residual {residual:.3e}",
        residual=residual,
    )


def lowest_eigenpairs(instance, lam, k=2, method="auto", vectors=True, diag=None,
                      tol=RESIDUAL_TOL, seed=12345):
    """Lowest ``k`` eigenpairs of H(lam).

    ``method``: "auto" (dense up to DENSE_MAX_BITS, iterative above),
    "dense" or "iterative".  At lam = 0 the diagonal is sorted directly.
    """
    n = instance.n_bits
    dim = 1 << n
    if not 1 <= k <= 8:
        raise InvalidParameter("k must be in 1..8")
    k = min(k, dim)
    if lam < 0:
        raise InvalidParameter("lambda must be non-negative")
    if diag is None:
        diag = cost_vector(instance)
    if lam == 0:
        order = np.argsort(diag, kind="stable")[:k]
        vals = diag[order].astype(float)
        vecs = None
        if vectors:
            vecs = np.zeros((dim, k))
            vecs[order, np.arange(k)] = 1.0
        return SpectrumResult(0.0, vals, vecs, np.zeros(k))
    if method == "auto":
        method = "dense" if n <= DENSE_MAX_BITS else "iterative"
    if method == "dense":
        if n > 12:
            raise SizeError(f"dense path limited to N <= 12, got {n}")
        h = dense_hamiltonian(instance, lam, diag)
        vals, vecs = scipy.linalg.eigh(h, subset_by_index=[0, k - 1])
    elif method == "iterative":
        if n > MAX_ITERATIVE_BITS:
            raise SizeError(f"iterative path limited to N <= {MAX_ITERATIVE_BITS}, got {n}")
        vals, vecs = _block_krylov(instance, lam, diag, k, tol, seed)
    else:
        raise InvalidParameter(f"unknown method {method!r}")
    res = _residuals(instance, lam, diag, vals, vecs)
    return SpectrumResult(float(lam), np.asarray(vals), vecs if vectors else None, res)


def gap_curve(instance, lambdas, method="auto"):
    """[(lam, gap, e0, e1), ...] over an ascending grid."""
    lambdas = [float(x) for x in lambdas]
    if not lambdas:
        raise InvalidParameter("lambda grid must be nonempty")
    if any(b < a for a, b in zip(lambdas, lambdas[1:])):
        raise InvalidParameter("lambda grid must be ascending")
    diag = cost_vector(instance)
    out = []
    for lam in lambdas:
        r = lowest_eigenpairs(instance, lam, 2, method=method, vectors=False, diag=diag)
        out.append((lam, r.gap, float(r.eigenvalues[0]), float(r.eigenvalues[1])))
    return out


_INV_PHI = (math.sqrt(5) - 1) / 2


def min_gap_scan(target, lo, hi, tol=1e-6, grid=64, method="auto"):
    """Minimise the gap over [lo, hi]: coarse grid, then golden-section on the best bracket.

    ``target`` is an ``Instance`` or any callable lam -> gap.  Returns
    ``(lam_min, gap_min)``.
    """
    if not 0 <= lo < hi or tol <= 0:
        raise InvalidParameter("need 0 <= lo < hi and tol > 0")
    if callable(target):
        fn = target
    else:
        diag = cost_vector(target)

        def fn(lam):
            return lowest_eigenpairs(target, lam, 2, method=method, vectors=False,
                                     diag=diag).gap

    xs = np.linspace(lo, hi, grid)
    ys = [fn(float(x)) for x in xs]
    best = int(np.argmin(ys))
    a = float(xs[max(best - 1, 0)])
    b = float(xs[min(best + 1, grid - 1)])
    seen = {float(x): y for x, y in zip(xs, ys)}
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = fn(c), fn(d)
    seen[c], seen[d] = fc, fd
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = fn(c)
            seen[c] = fc
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = fn(d)
            seen[d] = fd
    lam_min = min(seen, key=lambda x: (seen[x], x))
    return lam_min, float(seen[lam_min])


def ground_state_overlap(result, x):
    """|<x|GS>|^2 for a basis assignment x."""
    if result.eigenvectors is None:
        raise InvalidParameter("spectrum result carries no eigenvectors")
    v = result.eigenvectors[:, 0]
    return float(v[to_mask(x)] ** 2 / np.dot(v, v))


def level_overlaps(result, x):
    """|<x|v_j>|^2 for every returned eigenvector."""
    if result.eigenvectors is None:
        raise InvalidParameter("spectrum result carries no eigenvectors")
    v = result.eigenvectors
    return v[to_mask(x)] ** 2 / np.sum(v * v, axis=0)
