"""Dense complex matrix kernel for bipartite operators.

Everything here works on plain ``numpy`` arrays.  Tolerances are always
passed explicitly; nothing compares floats with ``==``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

HERMITIAN_TOL = 1e-12
JACOBI_TOL = 1e-13
JACOBI_MAX_SWEEPS = 100


class DimensionError(ValueError):
    pass


class NotHermitianError(ValueError):
    pass


@dataclass(frozen=True)
class BipartiteDims:
    n: int
    m: int

    def __post_init__(self):
        if int(self.n) != self.n or int(self.m) != self.m:
            raise DimensionError(f"dimensions must be integers, got ({self.n}, {self.m})")
        if self.n < 2 or self.m < 2:
            raise DimensionError(f"both local dimensions must be >= 2, got ({self.n}, {self.m})")

    @property
    def d(self) -> int:
        return self.n * self.m

    def as_list(self) -> list[int]:
        return [self.n, self.m]


class HermitianEig(NamedTuple):
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def allclose(a: np.ndarray, b: np.ndarray, tol: float) -> bool:
    """Entrywise comparison with an explicit absolute tolerance."""
    a = np.asarray(a)
    b = np.asarray(b)
    return a.shape == b.shape and bool(np.all(np.abs(a - b) <= tol))


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.atleast_2d(np.asarray(a))
    b = np.atleast_2d(np.asarray(b))
    ra, ca = a.shape
    rb, cb = b.shape
    out = a[:, None, :, None] * b[None, :, None, :]
    return out.reshape(ra * rb, ca * cb)


def _check_square(rho: np.ndarray, dims: BipartiteDims) -> np.ndarray:
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape != (dims.d, dims.d):
        raise DimensionError(f"expected a {dims.d}x{dims.d} operator for dims {dims.as_list()}, got shape {rho.shape}")
    return rho


def partial_trace(rho: np.ndarray, dims: BipartiteDims, keep: str = "A") -> np.ndarray:
    rho = _check_square(rho, dims)
    t = rho.reshape(dims.n, dims.m, dims.n, dims.m)
    if keep == "A":
        return np.einsum("ijkj->ik", t)
    if keep == "B":
        return np.einsum("ijil->jl", t)
    raise ValueError(f"keep must be 'A' or 'B', got {keep!r}")


def partial_transpose(rho: np.ndarray, dims: BipartiteDims, side: str = "B") -> np.ndarray:
    rho = _check_square(rho, dims)
    t = rho.reshape(dims.n, dims.m, dims.n, dims.m)
    if side == "B":
        t = t.transpose(0, 3, 2, 1)
    elif side == "A":
        t = t.transpose(2, 1, 0, 3)
    else:
        raise ValueError(f"side must be 'A' or 'B', got {side!r}")
    return t.reshape(dims.d, dims.d)


def symmetrize(h: np.ndarray, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Return (H + H^dagger)/2, refusing inputs whose defect exceeds ``tol * d``."""
    h = np.asarray(h, dtype=complex)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {h.shape}")
    defect = np.max(np.abs(h - h.conj().T)) if h.size else 0.0
    if defect > tol * h.shape[0]:
        raise NotHermitianError(f"Hermiticity defect {defect:.3e} exceeds {tol * h.shape[0]:.3e}")
    return 0.5 * (h + h.conj().T)


def _off_norm(a: np.ndarray) -> float:
    off = a - np.diag(np.diag(a))
    return float(np.linalg.norm(off))


def jacobi_eigh(h: np.ndarray, tol: float = JACOBI_TOL, max_sweeps: int = JACOBI_MAX_SWEEPS) -> HermitianEig:
    """Cyclic complex Jacobi eigensolver for a Hermitian matrix.

    Each rotation first removes the phase of the pivot with a diagonal unitary,
    then applies the real symmetric Jacobi rotation.  Sweeps stop once the
    off-diagonal Hilbert-Schmidt norm is below ``tol * d * max(1, ||H||)``.
    """
    a = np.array(h, dtype=complex)
    d = a.shape[0]
    v = np.eye(d, dtype=complex)
    scale = max(1.0, float(np.linalg.norm(a)))
    target = tol * d * scale
    for _ in range(max_sweeps):
        if _off_norm(a) <= target:
            break
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = a[p, q]
                b = abs(apq)
                if b <= 1e-300:
                    continue
                phase = apq / b
                theta = 0.5 * np.arctan2(2.0 * b, a[p, p].real - a[q, q].real)
                c, s = np.cos(theta), np.sin(theta)
                # columns p, q of G = diag(1, conj(phase)) @ [[c, -s], [s, c]]
                g = np.array([[c, -s], [s * phase.conjugate(), c * phase.conjugate()]])
                idx = [p, q]
                a[:, idx] = a[:, idx] @ g
                a[idx, :] = g.conj().T @ a[idx, :]
                a[p, q] = a[q, p] = 0.0
                v[:, idx] = v[:, idx] @ g
    else:
        if _off_norm(a) > target:
            raise RuntimeError("Jacobi sweeps did not converge")
    w = np.real(np.diag(a))
    order = np.argsort(w, kind="stable")
    return HermitianEig(w[order], v[:, order])


def hermitian_eig(h: np.ndarray, tol: float = HERMITIAN_TOL, method: str = "jacobi") -> HermitianEig:
    """Ascending eigenvalues and orthonormal eigenvectors of a Hermitian matrix.

    ``method="lapack"`` routes through ``numpy.linalg.eigh``; it is used only in
    hot loops (projection iterations) and cross-checked against the Jacobi path
    in the tests.
    """
    hs = symmetrize(h, tol)
    if method == "jacobi":
        return jacobi_eigh(hs)
    if method == "lapack":
        w, v = np.linalg.eigh(hs)
        return HermitianEig(w, v)
    raise ValueError(f"unknown eigensolver {method!r}")


def hs_distance(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    diff = a - b
    return float(np.sqrt(max(0.0, np.real(np.vdot(diff, diff)))))


def _triu(d: int):
    return np.triu_indices(d, k=1)


def vectorize_hermitian(h: np.ndarray, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Isometric map Herm(d) -> R^(d^2).

    Layout: the d diagonal entries, then sqrt(2)*Re and sqrt(2)*Im of the
    strict upper triangle in row-major order.
    """
    h = symmetrize(h, tol)
    d = h.shape[0]
    iu = _triu(d)
    upper = h[iu]
    return np.concatenate([np.real(np.diag(h)), np.sqrt(2.0) * upper.real, np.sqrt(2.0) * upper.imag])


def vectorize_hermitian_batch(hs: np.ndarray) -> np.ndarray:
    """Unchecked batched variant of :func:`vectorize_hermitian` for stacks (k, d, d)."""
    hs = np.asarray(hs)
    d = hs.shape[-1]
    iu = _triu(d)
    diag = np.real(np.diagonal(hs, axis1=-2, axis2=-1))
    upper = hs[..., iu[0], iu[1]]
    return np.concatenate([diag, np.sqrt(2.0) * upper.real, np.sqrt(2.0) * upper.imag], axis=-1)


def unvectorize_hermitian(x: np.ndarray, d: int | None = None) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if d is None:
        d = int(round(np.sqrt(x.shape[-1])))
    if x.shape[-1] != d * d:
        raise DimensionError(f"vector of length {x.shape[-1]} is not d^2 for d={d}")
    iu = _triu(d)
    k = len(iu[0])
    h = np.zeros(x.shape[:-1] + (d, d), dtype=complex)
    idx = np.arange(d)
    h[..., idx, idx] = x[..., :d]
    upper = (x[..., d : d + k] + 1j * x[..., d + k :]) / np.sqrt(2.0)
    h[..., iu[0], iu[1]] = upper
    h[..., iu[1], iu[0]] = upper.conj()
    return h


def psd_projection(h: np.ndarray, method: str = "lapack") -> np.ndarray:
    """Nearest positive semidefinite matrix in Hilbert-Schmidt norm (no trace fix)."""
    w, v = hermitian_eig(h, tol=1e-8, method=method)
    w = np.clip(w, 0.0, None)
    return (v * w) @ v.conj().T
