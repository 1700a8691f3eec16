"""Convex-hull membership for finite sets of product projectors.

Three routes:

* :func:`facet_sign_membership` -- for every facet of a simplex, compare the
  side of the target with the side of the left-out vertex.
* :func:`barycentric_membership` -- solve for affine coordinates directly.
* :class:`GrowingHull` / :func:`growing_hull_check` -- Hilbert-Schmidt nearest
  point of the convex hull of an arbitrary (growing) point set, via Wolfe's
  minimum-norm-point iteration.

All geometry happens on :func:`~sepdecide.linalg.vectorize_hermitian` images,
so Euclidean distances equal Hilbert-Schmidt distances.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import hs_distance, unvectorize_hermitian, vectorize_hermitian, vectorize_hermitian_batch
from .states import DensityMatrix, ProductState

MEMBERSHIP_TOL = 1e-8
DEGENERATE_TOL = 1e-9
WEIGHT_TOL = 1e-10
INDEPENDENCE_TOL = 1e-9


class CertificateError(ValueError):
    pass


def _as_matrix(x) -> np.ndarray:
    if isinstance(x, ProductState):
        return x.projector
    if isinstance(x, DensityMatrix):
        return x.mat
    return np.asarray(x)


def as_vector(x) -> np.ndarray:
    """Real isometric coordinates of a Hermitian operator (or an existing vector)."""
    m = _as_matrix(x)
    if m.ndim == 1:
        return m.astype(float)
    return vectorize_hermitian(m, tol=1e-9)


def point_matrix(points) -> np.ndarray:
    if isinstance(points, np.ndarray) and points.ndim == 2 and np.isrealobj(points):
        return points
    mats = [_as_matrix(p) for p in points]
    if all(m.ndim == 1 for m in mats):
        return np.array(mats, dtype=float)
    return vectorize_hermitian_batch(np.array(mats))


@dataclass
class MembershipResult:
    verdict: str  # "In" | "Out" | "Degenerate"
    weights: np.ndarray | None = None
    normal: np.ndarray | None = None  # Hermitian operator xi
    offset: float | None = None  # facet is {x : Tr[xi x] = offset}
    left_out: int | None = None  # vertex opposite the reported facet
    off_span: float = 0.0

    def to_json(self) -> dict:
        out = {"verdict": self.verdict}
        if self.weights is not None:
            out["weights"] = [float(w) for w in self.weights]
        if self.normal is not None:
            out["facet"] = {
                "normal": {"re": self.normal.real.tolist(), "im": self.normal.imag.tolist()},
                "offset": float(self.offset),
                "left_out": self.left_out,
            }
        out["off_span"] = float(self.off_span)
        return out


def affinely_independent(points, tol: float = INDEPENDENCE_TOL) -> bool:
    x = point_matrix(points)
    if len(x) == 0:
        raise ValueError("empty tuple")
    if len(x) == 1:
        return True
    diffs = x[1:] - x[0]
    if diffs.shape[0] > diffs.shape[1]:
        return False
    sv = np.linalg.svd(diffs, compute_uv=False)
    return bool(sv[0] > 0 and sv[-1] >= tol * sv[0])


def _span_frame(x: np.ndarray):
    """Orthonormal basis (columns) of the direction space of the affine hull."""
    diffs = (x[1:] - x[0]).T
    if diffs.shape[1] == 0:
        return np.zeros((x.shape[1], 0))
    q, _ = np.linalg.qr(diffs)
    return q


def _facet_normal(coords: np.ndarray, left_out: int) -> tuple[np.ndarray, int]:
    """Unit normal (span coordinates) of the facet omitting ``left_out``, plus a facet vertex."""
    k = coords.shape[0]
    facet = [i for i in range(k) if i != left_out]
    h = facet[0]
    if k == 2:
        return np.ones(1), h
    diffs = coords[facet[1:]] - coords[h]
    _, _, vh = np.linalg.svd(diffs)
    return vh[-1], h


def _off_span_result(rho: np.ndarray, x: np.ndarray, frame: np.ndarray, d: int) -> MembershipResult | None:
    rel = rho - x[0]
    resid = rel - frame @ (frame.T @ rel)
    off = float(np.linalg.norm(resid))
    if off <= MEMBERSHIP_TOL:
        return None
    normal = resid / off
    return MembershipResult(
        "Out",
        normal=unvectorize_hermitian(-normal, d),
        offset=float(-normal @ x[0]),
        off_span=off,
    )


def facet_sign_membership(target, points, tol: float = DEGENERATE_TOL) -> MembershipResult:
    """Facet-by-facet side test of ``target`` against the simplex on ``points``.

    Points must be affinely independent.  A target off the affine span is Out
    (the reported facet is then the span itself).  Weights of an In verdict are
    ratios of the signed facet distances of the target and the left-out vertex.
    """
    x = point_matrix(points)
    rho = as_vector(target)
    d = int(round(np.sqrt(x.shape[1])))
    if not affinely_independent(x):
        raise ValueError("facet test needs affinely independent points")
    k = len(x)
    if k == 1:
        dist = float(np.linalg.norm(rho - x[0]))
        if dist <= MEMBERSHIP_TOL:
            return MembershipResult("In", weights=np.ones(1))
        return MembershipResult("Out", off_span=dist)
    frame = _span_frame(x)
    out = _off_span_result(rho, x, frame, d)
    if out is not None:
        return out
    coords = (x - x[0]) @ frame
    rc = (rho - x[0]) @ frame
    weights = np.empty(k)
    first_out = None
    degenerate = False
    for r in range(k):
        xi, h = _facet_normal(coords, r)
        s_vertex = float(xi @ (coords[r] - coords[h]))
        if s_vertex < 0:
            xi, s_vertex = -xi, -s_vertex
        s_rho = float(xi @ (rc - coords[h]))
        weights[r] = s_rho / s_vertex
        if abs(s_rho) < tol:
            degenerate = True
        elif s_rho < 0 and first_out is None:
            normal = frame @ xi
            first_out = MembershipResult(
                "Out",
                normal=unvectorize_hermitian(normal, d),
                offset=float(normal @ x[h]),
                left_out=r,
            )
    if first_out is not None:
        return first_out
    if degenerate:
        return MembershipResult("Degenerate")
    w = np.clip(weights, 0.0, None)
    return MembershipResult("In", weights=w / w.sum())


def barycentric_membership(target, points) -> MembershipResult:
    """Affine coordinates of ``target`` from a direct linear solve."""
    x = point_matrix(points)
    rho = as_vector(target)
    d = int(round(np.sqrt(x.shape[1])))
    k = len(x)
    a = np.vstack([x.T, np.ones((1, k))])
    sv = np.linalg.svd(a, compute_uv=False)
    if sv[-1] < INDEPENDENCE_TOL * sv[0]:
        raise np.linalg.LinAlgError("singular barycentric system: points are affinely dependent")
    pinv = np.linalg.pinv(a)
    w = pinv @ np.append(rho, 1.0)
    resid = float(np.linalg.norm(a @ w - np.append(rho, 1.0)))
    if resid > MEMBERSHIP_TOL:
        out = _off_span_result(rho, x, _span_frame(x), d)
        if out is not None:
            return out
    if np.all(w >= -WEIGHT_TOL):
        w = np.clip(w, 0.0, None)
        return MembershipResult("In", weights=w / w.sum())
    j = int(np.argmin(w))
    # row j of the pseudo-inverse is the affine functional giving coordinate j
    g = pinv[j, :-1]
    c = pinv[j, -1]
    scale = np.linalg.norm(g)
    return MembershipResult("Out", normal=unvectorize_hermitian(g / scale, d), offset=float(-c / scale), left_out=j)


# ---------------------------------------------------------------------------
# growing hull


def min_norm_point(y: np.ndarray, corral=None, gap_tol: float = 1e-16, max_iter: int = 10_000):
    """Wolfe's minimum-norm point of conv(rows of ``y``).

    ``corral`` optionally warm-starts with ``(indices, weights)``.  Returns
    ``(x, indices, weights, iterations)``.
    """
    if corral is None or len(corral[0]) == 0:
        j0 = int(np.argmin(np.einsum("ij,ij->i", y, y)))
        s = [j0]
        lam = np.ones(1)
    else:
        s = list(corral[0])
        lam = np.array(corral[1], dtype=float)
    x = lam @ y[s]
    it = 0
    while it < max_iter:
        it += 1
        if x @ x <= 1e-30:
            break
        g = y @ x
        j = int(np.argmin(g))
        if x @ x - g[j] <= gap_tol or j in s:
            break
        s.append(j)
        lam = np.append(lam, 0.0)
        while True:
            ys = y[s]
            k = len(s)
            kkt = np.zeros((k + 1, k + 1))
            kkt[:k, :k] = ys @ ys.T
            kkt[:k, k] = 1.0
            kkt[k, :k] = 1.0
            rhs = np.zeros(k + 1)
            rhs[k] = 1.0
            alpha = np.linalg.lstsq(kkt, rhs, rcond=None)[0][:k]
            if np.all(alpha > 1e-14):
                lam = alpha
                break
            mask = alpha <= 1e-14
            denom = lam[mask] - alpha[mask]
            with np.errstate(divide="ignore", invalid="ignore"):
                ratios = np.where(denom > 0, lam[mask] / denom, np.inf)
            theta = float(min(1.0, np.min(ratios)))
            lam = lam + theta * (alpha - lam)
            keep = lam > 1e-14
            if not np.any(keep):
                keep[int(np.argmax(lam))] = True
            s = [si for si, kk in zip(s, keep) if kk]
            lam = lam[keep]
            lam = lam / lam.sum()
            it += 1
            if it >= max_iter:
                break
        x = lam @ y[s]
    return x, s, lam, it


class GrowingHull:
    """Nearest point of conv(points) to a fixed target, maintained as points arrive.

    A new point can only lower the distance if it lies strictly on the target's
    side of the current supporting hyperplane; other points are stored without
    re-solving.  Duplicate points (equal after rounding) are dropped.
    """

    def __init__(self, target, tol: float = MEMBERSHIP_TOL, L: int | None = None, dedupe: bool = True):
        self.rho = as_vector(target)
        self.dim = self.rho.shape[0]
        self.tol = tol
        self.L = L if L is not None else self.dim
        self.dedupe = dedupe
        self._keys: set[bytes] = set()
        self._y = np.zeros((64, self.dim))
        self.count = 0
        self.states: list = []
        self.corral: tuple[list[int], np.ndarray] = ([], np.zeros(0))
        self.x = None
        self.distance = np.inf
        self.solves = 0

    def _key(self, v: np.ndarray) -> bytes:
        return (np.round(v, 9) + 0.0).tobytes()

    def add(self, point, state=None) -> bool:
        """Append a point; returns False when it was a duplicate."""
        v = as_vector(point)
        if self.dedupe:
            key = self._key(v)
            if key in self._keys:
                return False
            self._keys.add(key)
        if self.count == len(self._y):
            self._y = np.vstack([self._y, np.zeros_like(self._y)])
        self._y[self.count] = v - self.rho
        self.count += 1
        self.states.append(state if state is not None else point)
        y = self._y[self.count - 1]
        if self.x is None or self.x @ y < self.x @ self.x - self.tol**2:
            self._solve()
        return True

    def _solve(self):
        y = self._y[: self.count]
        cap = 10 * self.L * self.count
        x, s, lam, _ = min_norm_point(y, self.corral if self.x is not None else None, self.tol**2, cap)
        self.corral = (s, lam)
        self.x = x
        self.distance = float(np.linalg.norm(x))
        self.solves += 1

    @property
    def points(self) -> np.ndarray:
        return self._y[: self.count] + self.rho

    def weights(self) -> np.ndarray:
        w = np.zeros(self.count)
        s, lam = self.corral
        w[s] = lam
        return w

    @property
    def contains(self) -> bool:
        return self.distance <= self.tol


def growing_hull_check(target, points, tol: float = MEMBERSHIP_TOL) -> tuple[float, np.ndarray]:
    """Hilbert-Schmidt distance from ``target`` to conv(points) and optimal weights."""
    if len(points) == 0:
        raise ValueError("need at least one point")
    hull = GrowingHull(target, tol=tol, dedupe=False)
    for p in points:
        hull.add(p)
    hull._solve()
    return hull.distance, hull.weights()


# ---------------------------------------------------------------------------
# certificates


@dataclass
class SeparableDecomposition:
    weights: np.ndarray
    atoms: list = field(default_factory=list)
    residual: float = 0.0

    def reconstruct(self) -> np.ndarray:
        return sum(w * a.projector for w, a in zip(self.weights, self.atoms))

    def __len__(self) -> int:
        return len(self.atoms)

    def to_json(self) -> dict:
        return {
            "atoms": [{"weight": float(w), **a.to_json()} for w, a in zip(self.weights, self.atoms)],
            "residual": float(self.residual),
        }


def caratheodory_reduce(weights: np.ndarray, x: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Remove affine dependencies from the support, keeping sum w_i x_i fixed."""
    w = np.array(weights, dtype=float)
    while True:
        sup = np.nonzero(w > 0)[0]
        if len(sup) <= 1:
            break
        a = np.vstack([x[sup].T, np.ones((1, len(sup)))])
        _, sv, vh = np.linalg.svd(a)
        svf = np.zeros(len(sup))
        svf[: len(sv)] = sv
        if len(sup) <= a.shape[0] and svf[-1] > tol * svf[0]:
            break
        c = vh[-1]
        if not np.any(c > 1e-14):
            c = -c
        pos = c > 1e-14
        ratios = np.full(len(sup), np.inf)
        ratios[pos] = w[sup][pos] / c[pos]
        i = int(np.argmin(ratios))
        w[sup] = w[sup] - ratios[i] * c
        w[sup[i]] = 0.0
        w[w < 1e-15] = 0.0
    return w / w.sum()


def extract_certificate(weights, points, target, tol: float = MEMBERSHIP_TOL) -> SeparableDecomposition:
    """Prune, Caratheodory-reduce and verify a convex decomposition.

    ``points`` are :class:`ProductState` atoms aligned with ``weights``.
    """
    w = np.array(weights, dtype=float)
    w[w < 0] = 0.0
    if w.sum() <= 0:
        raise CertificateError("no positive weight")
    w /= w.sum()
    x = point_matrix(points)
    w = caratheodory_reduce(w, x)
    keep = np.nonzero(w > 0)[0]
    atoms = [points[i] for i in keep]
    dec = SeparableDecomposition(w[keep], atoms)
    dec.residual = hs_distance(dec.reconstruct(), _as_matrix(target))
    if dec.residual > tol:
        raise CertificateError(f"reconstruction residual {dec.residual:.3e} exceeds {tol:.1e}")
    return dec
