"""Countable dense grid of product states and its enumeration order.

A factor of dimension ``n`` is addressed by ``n - 1`` rational coefficients
``(p/q) exp(2 pi i r/s)`` placed on basis vectors ``1..n-1`` plus a closing
phase ``(r, s)`` for basis vector ``0``; the closing modulus is fixed by
normalization.  A grid product state is a pair of such factors.

Order: indices are grouped by *level*, the largest denominator ``q`` or ``s``
appearing anywhere in the tuple.  Inside a level, tuples are ordered
lexicographically by the per-slot option rank, where options of a slot are
sorted by ``(level, p + q + r + s, tuple)``.  Level ``Q`` therefore ends at
index ``grid_size(dims, Q)``, the number of tuples with all denominators at
most ``Q``.

Canonical forms: fractions in lowest terms, ``0`` written ``0/1``, modulus
``1`` written ``1/1``, phase 0 written ``(0, 1)``; a coefficient with zero
modulus carries phase ``(0, 1)``.  Tuples that break the normalization budget,
or give a nonzero closing phase to a zero closing modulus, evaluate to
``None`` (skip).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import gcd, prod
from typing import Iterator, NamedTuple

import numpy as np

from .linalg import BipartiteDims, hermitian_eig
from .states import DensityMatrix, ProductState, PureState, reduced_purity

PRODUCT_TOL = 1e-8
RANK_CUTOFF = 1e-9
RANGE_TOL = 1e-8
ROOT_IMAG_TOL = 1e-3


class RationalPhaseCoeff(NamedTuple):
    p: int
    q: int
    r: int
    s: int

    @property
    def modulus(self) -> Fraction:
        return Fraction(self.p, self.q)

    @property
    def level(self) -> int:
        return max(self.q, self.s)

    def value(self) -> complex:
        return (self.p / self.q) * _phase(self.r, self.s)


def _phase(r: int, s: int) -> complex:
    return complex(np.exp(2j * np.pi * r / s))


# ---------------------------------------------------------------------------
# slot options


@lru_cache(maxsize=None)
def phase_options(level: int) -> tuple[tuple[int, int], ...]:
    out = [(0, 1)]
    for s in range(2, level + 1):
        out.extend((r, s) for r in range(1, s) if gcd(r, s) == 1)
    return tuple(sorted(out, key=lambda rs: (rs[1], rs[0] + rs[1], rs)))


@lru_cache(maxsize=None)
def coefficient_options(level: int) -> tuple[RationalPhaseCoeff, ...]:
    moduli = [(p, q) for q in range(1, level + 1) for p in range(1, q + 1) if gcd(p, q) == 1]
    out = [RationalPhaseCoeff(0, 1, 0, 1)]
    for p, q in moduli:
        out.extend(RationalPhaseCoeff(p, q, r, s) for r, s in phase_options(level))
    return tuple(sorted(out, key=lambda c: (c.level, sum(c), tuple(c))))


def _options(kind: str, level: int):
    return coefficient_options(level) if kind == "coef" else phase_options(level)


class _SlotSpace:
    """Level-blocked lexicographic ranking of tuples of slot options."""

    def __init__(self, kinds: tuple[str, ...]):
        self.kinds = kinds

    def sizes(self, level: int) -> list[int]:
        if level <= 0:
            return [0] * len(self.kinds)
        return [len(_options(k, level)) for k in self.kinds]

    def cumulative(self, level: int) -> int:
        if not self.kinds:
            return 1 if level >= 1 else 0
        return prod(self.sizes(level))

    def level_of_index(self, index: int) -> int | None:
        if not self.kinds:
            return 1 if index == 0 else None
        level = 1
        while self.cumulative(level) <= index:
            level += 1
        return level

    def _suffix_counts(self, lo, hi):
        k = len(self.kinds)
        p_hi = [1] * (k + 1)
        p_lo = [1] * (k + 1)
        for i in range(k - 1, -1, -1):
            p_hi[i] = p_hi[i + 1] * hi[i]
            p_lo[i] = p_lo[i + 1] * lo[i]
        return p_hi, p_lo

    def unrank(self, index: int) -> tuple[int, tuple[int, ...]] | None:
        level = self.level_of_index(index)
        if level is None:
            return None
        if not self.kinds:
            return 1, ()
        j = index - self.cumulative(level - 1)
        lo, hi = self.sizes(level - 1), self.sizes(level)
        p_hi, p_lo = self._suffix_counts(lo, hi)
        digits = []
        high = False
        for k in range(len(self.kinds)):
            if high:
                digit, j = divmod(j, p_hi[k + 1])
            else:
                c_low = p_hi[k + 1] - p_lo[k + 1]
                if j < lo[k] * c_low:
                    digit, j = divmod(j, c_low)
                else:
                    j -= lo[k] * c_low
                    off, j = divmod(j, p_hi[k + 1])
                    digit = lo[k] + off
                    high = True
            digits.append(digit)
        return level, tuple(digits)

    def rank(self, digits: tuple[int, ...]) -> int:
        if not self.kinds:
            return 0
        level = max(_digit_level(kind, dgt) for kind, dgt in zip(self.kinds, digits))
        lo, hi = self.sizes(level - 1), self.sizes(level)
        p_hi, p_lo = self._suffix_counts(lo, hi)
        j = 0
        high = False
        for k, dgt in enumerate(digits):
            if high:
                j += dgt * p_hi[k + 1]
            elif dgt < lo[k]:
                j += dgt * (p_hi[k + 1] - p_lo[k + 1])
            else:
                j += lo[k] * (p_hi[k + 1] - p_lo[k + 1]) + (dgt - lo[k]) * p_hi[k + 1]
                high = True
        return self.cumulative(level - 1) + j

    def iterate(self, start: int = 0, max_level: int | None = None) -> Iterator[tuple[int, int, tuple[int, ...]]]:
        """Yield ``(index, level, digits)`` in index order from ``start``."""
        first = self.unrank(start)
        if first is None:
            return
        if not self.kinds:
            yield 0, 1, ()
            return
        level, digits = first
        digits = list(digits)
        index = start
        while max_level is None or level <= max_level:
            lo, hi = self.sizes(level - 1), self.sizes(level)
            ok = True
            while ok:
                yield index, level, tuple(digits)
                index += 1
                ok = _advance(digits, lo, hi)
            level += 1
            digits = [0] * len(digits)
            lo, hi = self.sizes(level - 1), self.sizes(level)
            if not any(d >= l for d, l in zip(digits, lo)) and not _advance(digits, lo, hi):
                break


def _advance(digits: list[int], lo: list[int], hi: list[int]) -> bool:
    """Odometer step to the next tuple having at least one digit of the current level."""
    nk = len(digits)
    while True:
        k = nk - 1
        while k >= 0:
            digits[k] += 1
            if digits[k] < hi[k]:
                break
            digits[k] = 0
            k -= 1
        if k < 0:
            return False
        if any(d >= l for d, l in zip(digits, lo)):
            return True


def _digit_level(kind: str, digit: int) -> int:
    level = 1
    while len(_options(kind, level)) <= digit:
        level += 1
    return level


# ---------------------------------------------------------------------------
# full-rank grid


@dataclass(frozen=True)
class ProductIndex:
    index: int
    level: int
    a_coeffs: tuple[RationalPhaseCoeff, ...]
    a_phase: tuple[int, int]
    b_coeffs: tuple[RationalPhaseCoeff, ...]
    b_phase: tuple[int, int]

    @property
    def height(self) -> int:
        return self.level

    @property
    def weight(self) -> int:
        w = sum(sum(c) for c in self.a_coeffs + self.b_coeffs)
        return w + sum(self.a_phase) + sum(self.b_phase)

    def to_json(self) -> dict:
        return {
            "a_coeffs": [list(c) for c in self.a_coeffs],
            "a_phase": list(self.a_phase),
            "b_coeffs": [list(c) for c in self.b_coeffs],
            "b_phase": list(self.b_phase),
        }


@lru_cache(maxsize=None)
def _product_space(n: int, m: int) -> _SlotSpace:
    return _SlotSpace(("coef",) * (n - 1) + ("phase",) + ("coef",) * (m - 1) + ("phase",))


def _as_dims(dims) -> BipartiteDims:
    return dims if isinstance(dims, BipartiteDims) else BipartiteDims(*dims)


def grid_size(dims, level: int) -> int:
    """Number of indices whose denominators are all at most ``level``."""
    dims = _as_dims(dims)
    return _product_space(dims.n, dims.m).cumulative(level)


def _decode_digits(index: int, level: int, digits, dims: BipartiteDims) -> ProductIndex:
    q = coefficient_options(level)
    ph = phase_options(level)
    n, m = dims.n, dims.m
    a = tuple(q[d] for d in digits[: n - 1])
    b = tuple(q[d] for d in digits[n : n + m - 1])
    return ProductIndex(index, level, a, ph[digits[n - 1]], b, ph[digits[n + m - 1]])


def decode_product(index: int, dims) -> ProductIndex:
    dims = _as_dims(dims)
    if index < 0:
        raise ValueError("index must be non-negative")
    level, digits = _product_space(dims.n, dims.m).unrank(index)
    return _decode_digits(index, level, digits, dims)


def rank_product(a_coeffs, a_phase, b_coeffs, b_phase) -> int:
    """Inverse of :func:`decode_product`: the index of an explicit canonical tuple."""
    a_coeffs = tuple(RationalPhaseCoeff(*c) for c in a_coeffs)
    b_coeffs = tuple(RationalPhaseCoeff(*c) for c in b_coeffs)
    level = max([c.level for c in a_coeffs + b_coeffs] + [a_phase[1], b_phase[1]])
    q = coefficient_options(level)
    ph = phase_options(level)
    try:
        digits = (
            [q.index(c) for c in a_coeffs]
            + [ph.index(tuple(a_phase))]
            + [q.index(c) for c in b_coeffs]
            + [ph.index(tuple(b_phase))]
        )
    except ValueError as exc:
        raise ValueError("tuple is not in canonical form") from exc
    space = _product_space(len(a_coeffs) + 1, len(b_coeffs) + 1)
    return space.rank(tuple(digits))


@lru_cache(maxsize=200_000)
def _factor(coeffs: tuple[RationalPhaseCoeff, ...], closing_phase: tuple[int, int]):
    budget = sum((c.modulus**2 for c in coeffs), Fraction(0))
    if budget > 1:
        return None
    if budget == 1 and closing_phase != (0, 1):
        return None
    vec = np.empty(len(coeffs) + 1, dtype=complex)
    vec[0] = np.sqrt(float(1 - budget)) * _phase(*closing_phase)
    for j, c in enumerate(coeffs, start=1):
        vec[j] = c.value()
    vec.flags.writeable = False
    return vec


def build_product(pidx: ProductIndex) -> ProductState | None:
    a = _factor(pidx.a_coeffs, pidx.a_phase)
    if a is None:
        return None
    b = _factor(pidx.b_coeffs, pidx.b_phase)
    if b is None:
        return None
    return ProductState(a, b)


def enumerate_product(index: int, dims) -> ProductState | None:
    """The grid product state at ``index``, or ``None`` when the tuple is skipped."""
    return build_product(decode_product(index, dims))


def iter_products(dims, start: int = 0, max_level: int | None = None) -> Iterator[tuple[ProductIndex, ProductState | None]]:
    """Stream ``(ProductIndex, state-or-None)`` in index order."""
    dims = _as_dims(dims)
    space = _product_space(dims.n, dims.m)
    for index, level, digits in space.iterate(start, max_level):
        pidx = _decode_digits(index, level, digits, dims)
        yield pidx, build_product(pidx)


# ---------------------------------------------------------------------------
# distances and product tests


def _vec(x) -> np.ndarray:
    if isinstance(x, (PureState,)):
        return x.amplitudes
    if isinstance(x, ProductState):
        return x.vector
    return np.asarray(x)


def vector_distance(psi, phi) -> float:
    """Euclidean distance ||psi - phi||; sensitive to global phase."""
    u, v = _vec(psi), _vec(phi)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch {u.shape} vs {v.shape}")
    return float(np.linalg.norm(u - v))


def is_product(psi, dims, tol: float = PRODUCT_TOL) -> tuple[bool, float]:
    dims = _as_dims(dims)
    purity = reduced_purity(_vec(psi), dims)
    return purity >= 1.0 - tol, purity


def factorize(vec: np.ndarray, dims) -> ProductState:
    """Best product approximation of ``vec`` from its leading Schmidt pair."""
    dims = _as_dims(dims)
    u, s, vh = np.linalg.svd(np.asarray(vec).reshape(dims.n, dims.m))
    a = u[:, 0]
    b = vh[0]
    # fix the global phase so the largest entry of a is real positive
    k = int(np.argmax(np.abs(a)))
    ph = a[k] / abs(a[k])
    a = a / ph
    b = b * ph
    overlap = np.vdot(np.kron(a, b), vec)
    b = b * (overlap / abs(overlap) if abs(overlap) > 0 else 1.0)
    return ProductState(a / np.linalg.norm(a), b / np.linalg.norm(b))


# ---------------------------------------------------------------------------
# nearest grid point


@lru_cache(maxsize=64)
def _factor_grid(dim: int, level: int):
    """All non-skipped factors of one side with every denominator <= ``level``.

    Returns ``(coeff tuples, closing phases, vectors)``.
    """
    space = _SlotSpace(("coef",) * (dim - 1))
    coeffs, closings, vecs = [], [], []
    opts = coefficient_options(level)
    for _, _, digits in space.iterate(0, level):
        cs = tuple(opts[d] for d in digits)
        for ph in phase_options(level):
            v = _factor(cs, ph)
            if v is None:
                continue
            coeffs.append(cs)
            closings.append(ph)
            vecs.append(v)
    return coeffs, closings, np.array(vecs)


def _hull_vertices(z: np.ndarray) -> np.ndarray:
    """Indices of the planar convex hull of complex points (monotone chain)."""
    pts = np.stack([z.real, z.imag], axis=1)
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    if len(order) <= 2:
        return order

    def cross(o, a, b):
        return (pts[a, 0] - pts[o, 0]) * (pts[b, 1] - pts[o, 1]) - (pts[a, 1] - pts[o, 1]) * (pts[b, 0] - pts[o, 0])

    lower: list[int] = []
    for i in order:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], i) <= 0:
            lower.pop()
        lower.append(int(i))
    upper: list[int] = []
    for i in order[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], i) <= 0:
            upper.pop()
        upper.append(int(i))
    return np.array(lower[:-1] + upper[:-1])


def nearest_in_grid(psi: ProductState, height_budget: int) -> tuple[ProductState, float]:
    """Closest grid product state (by vector distance) among levels <= budget.

    The overlap factorizes as <a|a'><b|b'>; for each A-side overlap x the best
    B-side partner maximizes Re(x y), a linear functional in the plane, so only
    vertices of the convex hull of the B-side overlaps need to be scanned.
    """
    if height_budget < 1:
        raise ValueError("height_budget must be >= 1")
    n, m = len(psi.a), len(psi.b)
    ca, pa, va = _factor_grid(n, height_budget)
    cb, pb, vb = _factor_grid(m, height_budget)
    x = va @ psi.a.conj()
    y = vb @ psi.b.conj()
    hull = _hull_vertices(y)
    vals = (x[:, None] * y[hull][None, :]).real
    k = int(np.argmax(vals))
    i, j = divmod(k, len(hull))
    j = int(hull[j])
    state = ProductState(va[i], vb[j])
    return state, vector_distance(psi, state)


# ---------------------------------------------------------------------------
# range mode (rank-deficient states)


@dataclass(frozen=True)
class RangeIndex:
    index: int
    level: int
    coeffs: tuple[RationalPhaseCoeff, ...]
    root: int

    def to_json(self) -> dict:
        return {"coeffs": [list(c) for c in self.coeffs], "root": self.root}


@dataclass(frozen=True, eq=False)
class RangeBasis:
    """Eigenvectors of a state spanning its range, strongest first."""

    dims: BipartiteDims
    eigenvalues: np.ndarray
    vectors: np.ndarray  # columns

    @property
    def rank(self) -> int:
        return self.vectors.shape[1]

    def contains(self, vec: np.ndarray, tol: float = RANGE_TOL) -> bool:
        resid = vec - self.vectors @ (self.vectors.conj().T @ vec)
        return float(np.linalg.norm(resid)) <= tol

    def contains_batch(self, vecs: np.ndarray, tol: float = RANGE_TOL) -> np.ndarray:
        coef = vecs @ self.vectors.conj()
        resid = vecs - coef @ self.vectors.T
        return np.linalg.norm(resid, axis=1) <= tol


def numerical_rank(rho: DensityMatrix, cutoff: float = RANK_CUTOFF) -> int:
    return int(np.sum(hermitian_eig(rho.mat).eigenvalues > cutoff))


def range_basis(rho: DensityMatrix, cutoff: float = RANK_CUTOFF) -> RangeBasis:
    w, v = hermitian_eig(rho.mat)
    keep = np.nonzero(w > cutoff)[0][::-1]
    vecs = v[:, keep]
    # deterministic phase: largest-magnitude entry of each column real positive
    for k in range(vecs.shape[1]):
        col = vecs[:, k]
        j = int(np.argmax(np.abs(col) + 1e-12 * np.arange(len(col))[::-1]))
        vecs[:, k] = col * (abs(col[j]) / col[j])
    return RangeBasis(rho.dims, w[keep], vecs)


@lru_cache(maxsize=None)
def _range_space(r: int) -> _SlotSpace:
    return _SlotSpace(("coef",) * (r - 1))


def decode_range(index: int, rank: int) -> RangeIndex | None:
    """Range indices interleave four root selectors per coefficient tuple."""
    if rank < 1:
        raise ValueError("rank must be >= 1")
    tup, root = divmod(index, 4)
    got = _range_space(rank).unrank(tup)
    if got is None:
        return None
    level, digits = got
    opts = coefficient_options(level)
    return RangeIndex(index, level, tuple(opts[d] for d in digits), root)


def _closing_quartic(u: np.ndarray, c: np.ndarray, dims: BipartiteDims):
    """Purity condition along psi(theta) = u + exp(i theta) c.

    Returns (a0, c1, c2) with
    Tr[(Tr_B |psi><psi|)^2] - 1 = a0 + 2 Re(c1 e^{i theta}) + 2 Re(c2 e^{2 i theta}).
    """
    um = u.reshape(dims.n, dims.m)
    cm = c.reshape(dims.n, dims.m)
    k0 = um @ um.conj().T + cm @ cm.conj().T
    k1 = cm @ um.conj().T
    a0 = float(np.real(np.trace(k0 @ k0) + 2.0 * np.trace(k1 @ k1.conj().T))) - 1.0
    c1 = complex(2.0 * np.trace(k0 @ k1))
    c2 = complex(np.trace(k1 @ k1))
    return a0, c1, c2


def _quartic_in_t(a0: float, c1: complex, c2: complex) -> np.ndarray:
    """Coefficients (ascending) of f(theta) (1 + t^2)^2 with t = tan(theta / 2)."""
    sq = np.array([1.0, 0.0, 2.0, 0.0, 1.0])  # (1 + t^2)^2
    cos1 = np.array([1.0, 0.0, 0.0, 0.0, -1.0])  # cos(theta) (1 + t^2)^2
    sin1 = np.array([0.0, 2.0, 0.0, 2.0, 0.0])
    cos2 = np.array([1.0, 0.0, -6.0, 0.0, 1.0])
    sin2 = np.array([0.0, 4.0, 0.0, -4.0, 0.0])
    return a0 * sq + 2.0 * (c1.real * cos1 - c1.imag * sin1) + 2.0 * (c2.real * cos2 - c2.imag * sin2)


def _quartic_roots(coef: np.ndarray) -> list[complex | None]:
    """Four roots in ascending real part; ``None`` stands for t = infinity.

    Returns an empty list when the quartic vanishes identically.
    """
    scale = np.max(np.abs(coef))
    if scale <= 1e-12:
        return []
    trimmed = coef.copy()
    deg = 4
    while deg > 0 and abs(trimmed[deg]) <= 1e-12 * scale:
        deg -= 1
    roots = list(np.roots(trimmed[: deg + 1][::-1])) if deg > 0 else []
    roots.sort(key=lambda z: (z.real, z.imag))
    return roots + [None] * (4 - deg)


def _polish_theta(theta: float, c1: complex, c2: complex, steps: int = 8) -> float:
    for _ in range(steps):
        e1, e2 = np.exp(1j * theta), np.exp(2j * theta)
        g = 2.0 * (1j * c1 * e1).real + 2.0 * (2j * c2 * e2).real
        h = -2.0 * (c1 * e1).real - 8.0 * (c2 * e2).real
        if h >= 0 or not np.isfinite(h):
            break
        step = g / h
        theta -= step
        if abs(step) < 1e-15:
            break
    return theta


def range_tuple_products(
    rho: DensityMatrix,
    rank: int,
    coeffs: tuple[RationalPhaseCoeff, ...],
    basis: RangeBasis | None = None,
    tol: float = PRODUCT_TOL,
) -> list[ProductState | None]:
    """Product vectors for all four root selectors of one coefficient tuple.

    The first ``rank - 1`` coefficients along the eigenvectors are rational grid
    values, the last modulus closes the normalization, and its phase is a real
    root of the quartic purity condition.  Entry ``j`` belongs to selector ``j``.
    """
    if basis is None:
        basis = range_basis(rho)
    if basis.rank != rank:
        raise ValueError(f"rank mismatch: state has numerical rank {basis.rank}, got {rank}")
    dims = rho.dims
    budget = sum((c.modulus**2 for c in coeffs), Fraction(0))
    if budget > 1:
        return [None] * 4
    u = np.zeros(dims.d, dtype=complex)
    for k, c in enumerate(coeffs):
        u += c.value() * basis.vectors[:, k]
    closing = np.sqrt(float(1 - budget))
    cvec = closing * basis.vectors[:, rank - 1]
    a0, c1, c2 = _closing_quartic(u, cvec, dims)
    roots = _quartic_roots(_quartic_in_t(a0, c1, c2))
    if not roots:
        thetas = [0.0, None, None, None]
    else:
        thetas = []
        for t in roots:
            if t is None:
                theta = np.pi
            elif abs(t.imag) > ROOT_IMAG_TOL * (1.0 + abs(t)):
                thetas.append(None)
                continue
            else:
                theta = 2.0 * np.arctan(t.real)
            thetas.append(_polish_theta(theta, c1, c2))
    out = []
    for theta in thetas:
        if theta is None:
            out.append(None)
            continue
        psi = u + np.exp(1j * theta) * cvec
        psi = psi / np.linalg.norm(psi)
        ok, _ = is_product(psi, dims, tol)
        out.append(factorize(psi, dims) if ok else None)
    return out


def enumerate_range_product(
    rho: DensityMatrix,
    rank: int,
    index,
    basis: RangeBasis | None = None,
    tol: float = PRODUCT_TOL,
) -> ProductState | None:
    """Product vector in the range of ``rho`` addressed by a range index, or ``None``."""
    ridx = decode_range(index, rank) if isinstance(index, (int, np.integer)) else index
    if ridx is None:
        return None
    return range_tuple_products(rho, rank, ridx.coeffs, basis, tol)[ridx.root]
