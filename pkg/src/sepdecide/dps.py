"""Entanglement detection: PPT test and symmetric-extension feasibility.

Level 1 is the exact PPT test.  Level ``k >= 2`` searches for a state on
``H_A (x) H_B^{(x)k}`` supported on the symmetric subspace of the B copies
whose two-party marginal is ``rho``, by Dykstra's alternating projections
between the PSD cone and the affine constraint set (optionally also the cones
of partially transposed operators).  Alternating projections can only certify
feasibility, so a level-k "entangled" verdict is a residual-plateau heuristic
and is labeled as such.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations_with_replacement, permutations

import numpy as np

from .linalg import (
    hermitian_eig,
    partial_transpose,
    psd_projection,
    unvectorize_hermitian,
    vectorize_hermitian_batch,
)
from .states import DensityMatrix

NPT_TOL = 1e-10
MAX_SYMMETRIC_DIM = 4096


@dataclass(frozen=True)
class DpsConfig:
    level: int = 1
    impose_ppt_on_extension: bool = False
    max_iterations: int = 2000
    feasibility_tol: float = 1e-6
    infeasibility_threshold: float = 1e-3
    plateau_window: int = 500
    plateau_rel_drop: float = 1e-2

    def __post_init__(self):
        if self.level < 1:
            raise ValueError("level must be >= 1")
        if self.feasibility_tol <= 0 or self.infeasibility_threshold <= 0:
            raise ValueError("tolerances must be positive")
        if self.infeasibility_threshold <= self.feasibility_tol:
            raise ValueError("infeasibility_threshold must exceed feasibility_tol")
        if self.max_iterations < 1 or self.plateau_window < 1:
            raise ValueError("iteration counts must be positive")


@dataclass
class PptResult:
    ppt: bool
    min_eigenvalue: float
    eigenvector: np.ndarray

    def to_json(self) -> dict:
        return {
            "ppt": self.ppt,
            "min_eigenvalue": self.min_eigenvalue,
            "eigenvector": {"re": self.eigenvector.real.tolist(), "im": self.eigenvector.imag.tolist()},
        }


@dataclass
class DpsOutcome:
    verdict: str  # "EntangledCertified" | "NotDetectedAtLevel" | "InProgress"
    level: int
    residual: float | None = None
    certificate: dict | None = None
    iterations: int = 0

    @property
    def final(self) -> bool:
        return self.verdict != "InProgress"

    @property
    def entangled(self) -> bool:
        return self.verdict == "EntangledCertified"


def _fix_phase(v: np.ndarray) -> np.ndarray:
    j = int(np.argmax(np.abs(v) - 1e-12 * np.arange(len(v))))
    return v * (abs(v[j]) / v[j])


def ppt_check(rho: DensityMatrix, tol: float = NPT_TOL) -> PptResult:
    """Smallest eigenpair of the partial transpose on B; NPT iff below ``-tol``."""
    pt = partial_transpose(rho.mat, rho.dims, "B")
    w, v = hermitian_eig(pt)
    lam = float(w[0])
    return PptResult(lam >= -tol, lam, _fix_phase(v[:, 0]))


# ---------------------------------------------------------------------------
# symmetric subspace


def _guard(m: int, k: int):
    if k < 1:
        raise ValueError("k must be >= 1")
    if m**k > MAX_SYMMETRIC_DIM:
        raise MemoryError(f"m^k = {m**k} exceeds the {MAX_SYMMETRIC_DIM} limit")


@lru_cache(maxsize=32)
def symmetric_isometry(m: int, k: int) -> np.ndarray:
    """Columns: orthonormal basis of Sym^k(C^m), one per multiset of basis labels."""
    _guard(m, k)
    cols = []
    for multiset in combinations_with_replacement(range(m), k):
        col = np.zeros(m**k)
        for perm in set(permutations(multiset)):
            idx = 0
            for i in perm:
                idx = idx * m + i
            col[idx] = 1.0
        cols.append(col / np.linalg.norm(col))
    return np.array(cols).T


def symmetric_projector(m: int, k: int) -> np.ndarray:
    v = symmetric_isometry(m, k)
    return (v @ v.T).astype(complex)


# ---------------------------------------------------------------------------
# extension feasibility


class ExtensionProblem:
    """Constraint sets for a k-copy symmetric extension of ``rho``."""

    def __init__(self, rho: DensityMatrix, k: int, impose_ppt: bool = False):
        if k < 2:
            raise ValueError("extension problems need k >= 2")
        n, m = rho.dims.n, rho.dims.m
        _guard(m, k)
        self.rho = rho
        self.n, self.m, self.k = n, m, k
        self.big = n * m**k
        iso = symmetric_isometry(m, k)
        self.w = np.kron(np.eye(n), iso).astype(complex)  # H_A (x) Sym -> H_A (x) H_B^k
        self.small = self.w.shape[1]
        # marginal map in isometric real coordinates of Y (operators on H_A (x) Sym)
        ns = self.small
        basis = unvectorize_hermitian(np.eye(ns * ns), ns)
        cols = vectorize_hermitian_batch(np.array([self._marginal(self.w @ e @ self.w.conj().T) for e in basis]))
        amat = cols.T
        self.pinv = np.linalg.pinv(amat)
        self.amat = amat
        self.target = vectorize_hermitian_batch(rho.mat[None])[0]
        self.ppt_dims = []
        if impose_ppt:
            # transpose the first j B copies, j = 1..k
            self.ppt_dims = list(range(1, k + 1))

    def _marginal(self, xi: np.ndarray) -> np.ndarray:
        n, m, rest = self.n, self.m, self.m ** (self.k - 1)
        t = xi.reshape(n, m, rest, n, m, rest)
        return np.einsum("abkcdk->abcd", t).reshape(n * m, n * m)

    def marginal(self, xi: np.ndarray) -> np.ndarray:
        return self._marginal(xi)

    def project_affine(self, xi: np.ndarray) -> np.ndarray:
        y = self.w.conj().T @ xi @ self.w
        yv = vectorize_hermitian_batch(y[None])[0]
        yv = yv - self.pinv @ (self.amat @ yv - self.target)
        y = unvectorize_hermitian(yv, self.small)
        return self.w @ y @ self.w.conj().T

    def _transpose_first(self, xi: np.ndarray, j: int) -> np.ndarray:
        n, m, k = self.n, self.m, self.k
        shape = (n,) + (m,) * k
        t = xi.reshape(shape + shape)
        axes = list(range(2 * (k + 1)))
        for c in range(1, j + 1):
            axes[c], axes[k + 1 + c] = axes[k + 1 + c], axes[c]
        return t.transpose(axes).reshape(self.big, self.big)

    def projections(self):
        projs = [self.project_affine, psd_projection]
        for j in self.ppt_dims:
            projs.append(lambda x, j=j: self._transpose_first(psd_projection(self._transpose_first(x, j)), j))
        return projs

    def start(self) -> np.ndarray:
        rest = np.eye(self.m ** (self.k - 1)) / self.m ** (self.k - 1)
        n, m = self.n, self.m
        t = np.einsum("abcd,kl->akbcld", self.rho.mat.reshape(n, m, n, m), rest)
        return self.project_affine(t.reshape(self.big, self.big))


@dataclass
class DpsCarry:
    problem: ExtensionProblem | None = None
    x: np.ndarray | None = None
    increments: list = field(default_factory=list)
    history: list = field(default_factory=list)
    outcome: DpsOutcome | None = None
    affine: np.ndarray | None = None  # latest affine-projection iterate

    @property
    def iterations(self) -> int:
        return len(self.history)


def _ppt_outcome(rho: DensityMatrix, level: int) -> DpsOutcome:
    res = ppt_check(rho)
    if res.ppt:
        return DpsOutcome("NotDetectedAtLevel", level, certificate={"label": "exact", "min_pt_eigenvalue": res.min_eigenvalue}, iterations=1)
    return DpsOutcome(
        "EntangledCertified",
        level,
        certificate={"label": "exact", "level": 1, **res.to_json()},
        iterations=1,
    )


def dykstra_pass(carry: DpsCarry) -> float:
    """One cyclic Dykstra pass; returns the largest gap between the affine iterate and the cone iterates."""
    projs = carry.problem.projections()
    if not carry.increments:
        carry.increments = [np.zeros_like(carry.x) for _ in projs]
    x = carry.x
    iterates = []
    for i, proj in enumerate(projs):
        z = proj(x + carry.increments[i])
        carry.increments[i] = x + carry.increments[i] - z
        x = z
        iterates.append(z)
    carry.x = x
    carry.affine = iterates[0]
    return max(float(np.linalg.norm(it - iterates[0])) for it in iterates[1:])


def _plateau(history: list[float], cfg: DpsConfig) -> bool:
    if len(history) < cfg.plateau_window:
        return False
    window = history[-cfg.plateau_window :]
    if min(window) < cfg.infeasibility_threshold:
        return False
    return (window[0] - window[-1]) <= cfg.plateau_rel_drop * window[0]


def dps_step(rho: DensityMatrix, cfg: DpsConfig, carry: DpsCarry | None = None) -> tuple[DpsOutcome, DpsCarry]:
    """Advance the detector by one unit of work.

    Level 1 settles in a single PPT check.  Higher levels run one projection
    pass per call and report ``InProgress`` until the residual drops below
    ``feasibility_tol`` (not detected), plateaus above
    ``infeasibility_threshold`` for ``plateau_window`` passes (heuristic
    entangled), or ``max_iterations`` passes elapse (not detected).
    """
    if carry is None:
        carry = DpsCarry()
    if carry.outcome is not None:
        return carry.outcome, carry
    if cfg.level == 1:
        carry.outcome = _ppt_outcome(rho, 1)
        carry.history.append(0.0)
        return carry.outcome, carry
    if carry.problem is None:
        carry.problem = ExtensionProblem(rho, cfg.level, cfg.impose_ppt_on_extension)
        carry.x = carry.problem.start()
    res = dykstra_pass(carry)
    carry.history.append(res)
    it = carry.iterations
    if res <= cfg.feasibility_tol:
        carry.outcome = DpsOutcome(
            "NotDetectedAtLevel", cfg.level, res, {"label": f"level-{cfg.level} feasible extension", "residual": res}, it
        )
    elif _plateau(carry.history, cfg):
        window = carry.history[-cfg.plateau_window :]
        carry.outcome = DpsOutcome(
            "EntangledCertified",
            cfg.level,
            res,
            {
                "label": f"level-{cfg.level} heuristic",
                "level": cfg.level,
                "plateau_window": cfg.plateau_window,
                "plateau_min_residual": min(window),
                "plateau_first": window[0],
                "plateau_last": window[-1],
            },
            it,
        )
    elif it >= cfg.max_iterations:
        carry.outcome = DpsOutcome(
            "NotDetectedAtLevel", cfg.level, res, {"label": f"level-{cfg.level} inconclusive", "residual": res}, it
        )
    else:
        return DpsOutcome("InProgress", cfg.level, res, None, it), carry
    return carry.outcome, carry


def run_dps(rho: DensityMatrix, cfg: DpsConfig) -> tuple[DpsOutcome, list[float]]:
    carry = None
    while True:
        out, carry = dps_step(rho, cfg, carry)
        if out.final:
            return out, list(carry.history)


def residual_history(rho: DensityMatrix, level: int, passes: int, impose_ppt: bool = False) -> list[float]:
    """Raw Dykstra residuals for ``passes`` passes, without any stopping rule."""
    carry = DpsCarry(problem=ExtensionProblem(rho, level, impose_ppt))
    carry.x = carry.problem.start()
    return [dykstra_pass(carry) for _ in range(passes)]
