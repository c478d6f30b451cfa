"""Truncated symmetric eigendecomposition and spectral proximity columns.

The proximity operator sum_n alpha_n A^n is never formed; it is applied as
``U diag(rho(sigma)) U^T`` restricted to one column at a time.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import NumericError

JACOBI_TOL = 1e-10
JACOBI_SWEEPS = 30
# Jacobi costs O(n^3) numpy work per sweep; past this size "auto" hands the
# decomposition to LAPACK.
JACOBI_MAX_N = 500


@dataclass(frozen=True, eq=False)
class SpectralBasis:
    sigma: np.ndarray
    U: np.ndarray
    a_hash: str = ""

    def __post_init__(self):
        sigma = np.array(self.sigma, dtype=float).reshape(-1)
        U = np.array(self.U, dtype=float)
        if U.ndim != 2 or U.shape[1] != sigma.size:
            raise ValueError(f"U shape {U.shape} does not match {sigma.size} eigenvalues")
        sigma.setflags(write=False)
        U.setflags(write=False)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "U", U)

    @property
    def rank(self) -> int:
        return self.sigma.size

    @property
    def n(self) -> int:
        return self.U.shape[0]


def matrix_hash(a: np.ndarray) -> str:
    a = np.ascontiguousarray(a, dtype=np.float64)
    h = hashlib.sha256()
    h.update(str(a.shape).encode())
    h.update(a.tobytes())
    return h.hexdigest()


def normalized_adjacency(a: np.ndarray) -> np.ndarray:
    """D^{-1/2} A D^{-1/2}; isolated nodes keep zero rows."""
    deg = a.sum(axis=1)
    inv = np.zeros_like(deg)
    nz = deg > 0
    inv[nz] = 1.0 / np.sqrt(deg[nz])
    return a * inv[:, None] * inv[None, :]


def jacobi_eigh(a: np.ndarray, tol: float = JACOBI_TOL, max_sweeps: int = JACOBI_SWEEPS):
    """Cyclic Jacobi eigensolver for a dense symmetric matrix.

    Uses the round-robin (parallel) ordering: each round rotates m/2 disjoint
    index pairs at once. The working matrix is kept permuted so that the pairs
    of the current round sit at positions ``i`` and ``m-1-i``, which turns
    every row/column update into a slice operation. Returns unsorted
    ``(eigenvalues, eigenvectors)`` with eigenvectors as columns.
    """
    a = np.array(a, dtype=float)
    n = a.shape[0]
    if n == 1:
        return a.diagonal().copy(), np.eye(1)
    m = n + (n % 2)
    if m != n:
        # a decoupled zero row pads odd sizes; its pairs never rotate
        a = np.pad(a, ((0, 1), (0, 1)))
    v = np.eye(m)
    order = np.arange(m)
    h = m // 2
    # roundoff floor keeps the absolute tolerance reachable for large norms
    thresh = max(tol, 1e2 * np.finfo(float).eps * np.linalg.norm(a))
    shift = np.concatenate(([0, m - 1], np.arange(1, m - 1)))

    def off_norm():
        off = a.copy()
        np.fill_diagonal(off, 0.0)
        return np.linalg.norm(off)

    for _ in range(max_sweeps):
        if off_norm() <= thresh:
            break
        for _ in range(m - 1):
            top, bot = a[:h], a[h:][::-1]
            idx = np.arange(h)
            apq = top[idx, m - 1 - idx]
            app = top[idx, idx]
            aqq = bot[idx, m - 1 - idx]
            active = apq != 0.0
            if active.any():
                with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                    theta = (aqq - app) / (2.0 * apq)
                    t = np.where(theta >= 0, 1.0, -1.0) / (np.abs(theta) + np.hypot(theta, 1.0))
                c = np.where(active, 1.0 / np.sqrt(t * t + 1.0), 1.0)
                s = np.where(active, t * c, 0.0)

                new = c[:, None] * top - s[:, None] * bot
                bot[:] = s[:, None] * top + c[:, None] * bot
                top[:] = new
                left, right = a[:, :h], a[:, h:][:, ::-1]
                new = left * c - right * s
                right[:] = left * s + right * c
                left[:] = new
                a[idx, m - 1 - idx] = 0.0
                a[m - 1 - idx, idx] = 0.0
                left, right = v[:, :h], v[:, h:][:, ::-1]
                new = left * c - right * s
                right[:] = left * s + right * c
                left[:] = new
            a = a[np.ix_(shift, shift)]
            v = v[:, shift]
            order = order[shift]
    else:
        if off_norm() > thresh:
            raise NumericError(
                f"Jacobi did not converge in {max_sweeps} sweeps: off-diagonal norm "
                f"{off_norm():.3e} > {thresh:.3e}")
    inv = np.argsort(order)
    w = a.diagonal()[inv]
    v = v[:, inv]
    if m == n:
        return w.copy(), v.copy()
    return _drop_pad(w, v, n)


def _drop_pad(w, v, n):
    # the padding eigenpair is the one whose vector lives on the dummy index
    pad = int(np.argmax(np.abs(v[n])))
    keep = np.delete(np.arange(n + 1), pad)
    return w[keep].copy(), v[:n, keep].copy()


def _order(sigma, selection):
    if selection == "magnitude":
        # |sigma| is quantized so numerically tied pairs such as +-1 fall back
        # to descending algebraic order
        return np.lexsort((-sigma, -np.round(np.abs(sigma), 9)))
    if selection == "algebraic":
        return np.argsort(-sigma, kind="stable")
    raise ValueError(f"unknown selection {selection!r}")


def eigh_truncated(a: np.ndarray, r: int, method: str = "auto",
                   selection: str = "magnitude") -> SpectralBasis:
    """Keep the ``r`` eigenpairs of symmetric ``a`` with the largest |eigenvalue|.

    ``method`` is ``"jacobi"``, ``"lapack"`` or ``"auto"`` (Jacobi up to
    ``JACOBI_MAX_N`` nodes). Each eigenvector column is signed so that its
    largest-magnitude entry is non-negative.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    n = a.shape[0]
    if not 1 <= r <= n:
        raise ValueError(f"rank {r} outside [1, {n}]")
    if np.max(np.abs(a - a.T), initial=0.0) > 1e-12:
        raise ValueError("matrix is not symmetric")
    if method == "auto":
        method = "jacobi" if n <= JACOBI_MAX_N else "lapack"
    if method == "jacobi":
        sigma, U = jacobi_eigh(a)
    elif method == "lapack":
        sigma, U = np.linalg.eigh(a)
    else:
        raise ValueError(f"unknown eigensolver {method!r}")

    idx = _order(sigma, selection)[:r]
    sigma, U = sigma[idx], U[:, idx]
    pivot = np.argmax(np.abs(U), axis=0)
    signs = np.where(U[pivot, np.arange(r)] < 0, -1.0, 1.0)
    U = U * signs

    resid = np.max(np.abs(a @ U - U * sigma), axis=0)
    bound = 1e-7 * np.maximum(1.0, np.abs(sigma))
    if np.any(resid > bound):
        i = int(np.argmax(resid / bound))
        raise NumericError(f"eigenpair {i} residual {resid[i]:.3e} exceeds {bound[i]:.3e}")
    return SpectralBasis(sigma, U, matrix_hash(a))


def _check_len(basis, vec, name):
    if np.shape(vec) != (basis.rank,):
        raise ValueError(f"{name} has shape {np.shape(vec)}, expected ({basis.rank},)")


def proximity_column(basis: SpectralBasis, filt: np.ndarray, v: int) -> np.ndarray:
    """Column ``v`` of ``U diag(filt) U^T``."""
    _check_len(basis, filt, "filter")
    return basis.U @ (np.asarray(filt) * basis.U[v])


def proximity_column_grad(basis: SpectralBasis, v: int, upstream: np.ndarray) -> np.ndarray:
    """Gradient of ``<upstream, proximity_column(basis, f, v)>`` with respect to ``f``."""
    if np.shape(upstream) != (basis.n,):
        raise ValueError(f"upstream has shape {np.shape(upstream)}, expected ({basis.n},)")
    return (basis.U.T @ upstream) * basis.U[v]


def save_basis(basis: SpectralBasis, path) -> None:
    with open(path, "wb") as fh:
        np.savez(fh, sigma=basis.sigma, U=basis.U, a_hash=np.array(basis.a_hash),
                 r=np.array(basis.rank))


def load_basis(path) -> SpectralBasis:
    with np.load(path) as z:
        return SpectralBasis(z["sigma"], z["U"], str(z["a_hash"]))


def cached_basis(a: np.ndarray, r: int, cache_dir=None, method: str = "auto",
                 selection: str = "magnitude") -> SpectralBasis:
    """``eigh_truncated`` with an on-disk cache keyed by the matrix hash and rank."""
    if cache_dir is None:
        return eigh_truncated(a, r, method=method, selection=selection)
    key = matrix_hash(a)
    path = Path(cache_dir) / f"spectral-{key[:20]}-{selection}-r{r}.npz"
    if path.is_file():
        basis = load_basis(path)
        if basis.a_hash == key and basis.rank == r:
            return basis
    basis = eigh_truncated(a, r, method=method, selection=selection)
    path.parent.mkdir(parents=True, exist_ok=True)
    save_basis(basis, path)
    return basis
