"""Density matrices, product states, standard test families and the JSON format.

JSON state files look like::

    {"dims": [2, 2], "re": [[...], ...], "im": [[...], ...]}

with row-major ``d x d`` arrays of decimal literals.

Mixing conventions (they vary across the literature):

* ``isotropic(p, n) = p |Phi+><Phi+| + (1 - p) I / n^2`` with
  ``|Phi+> = sum_i |ii> / sqrt(n)``.
* ``werner(p, n) = p (I - F) / (n (n - 1)) + (1 - p) I / n^2`` where ``F`` is
  the swap operator; for qubits the first term is the singlet projector.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .linalg import (
    BipartiteDims,
    DimensionError,
    hermitian_eig,
    kron,
    partial_trace,
)

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
POSITIVITY_TOL = 1e-10
NORM_TOL = 1e-12


class StateValidationError(ValueError):
    """Raised with the full list of violated density-matrix invariants."""

    def __init__(self, problems: list[str], worst_eigenvalue: float | None = None):
        self.problems = problems
        self.worst_eigenvalue = worst_eigenvalue
        super().__init__("; ".join(problems))


class StateFormatError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    dims: BipartiteDims
    mat: np.ndarray

    @property
    def d(self) -> int:
        return self.dims.d

    def __array__(self, dtype=None, copy=None):
        return self.mat if dtype is None else self.mat.astype(dtype)


@dataclass(frozen=True, eq=False)
class PureState:
    dims: BipartiteDims
    amplitudes: np.ndarray

    def __post_init__(self):
        if self.amplitudes.shape != (self.dims.d,):
            raise DimensionError(f"expected {self.dims.d} amplitudes, got {self.amplitudes.shape}")
        if abs(np.linalg.norm(self.amplitudes) - 1.0) > NORM_TOL:
            raise ValueError("pure state is not normalized")

    def density(self) -> DensityMatrix:
        return DensityMatrix(self.dims, np.outer(self.amplitudes, self.amplitudes.conj()))


@dataclass(frozen=True, eq=False)
class ProductState:
    a: np.ndarray
    b: np.ndarray
    projector: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        for name, v in (("a", self.a), ("b", self.b)):
            if abs(np.linalg.norm(v) - 1.0) > 1e-10:
                raise ValueError(f"factor {name} is not unit norm")
        vec = np.outer(self.a, self.b).ravel()
        object.__setattr__(self, "projector", np.outer(vec, vec.conj()))

    @property
    def dims(self) -> BipartiteDims:
        return BipartiteDims(len(self.a), len(self.b))

    @property
    def vector(self) -> np.ndarray:
        return np.outer(self.a, self.b).ravel()

    def to_json(self) -> dict:
        return {
            "a": {"re": self.a.real.tolist(), "im": self.a.imag.tolist()},
            "b": {"re": self.b.real.tolist(), "im": self.b.imag.tolist()},
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ProductState":
        try:
            a = np.array(obj["a"]["re"], dtype=float) + 1j * np.array(obj["a"]["im"], dtype=float)
            b = np.array(obj["b"]["re"], dtype=float) + 1j * np.array(obj["b"]["im"], dtype=float)
        except (KeyError, TypeError) as exc:
            raise StateFormatError(f"product state needs a/b factors with re/im parts: {exc}") from exc
        return cls(a, b)


def _as_dims(dims) -> BipartiteDims:
    if isinstance(dims, BipartiteDims):
        return dims
    n, m = dims
    return BipartiteDims(int(n), int(m))


def validate(
    raw,
    dims,
    hermitian_tol: float = HERMITIAN_TOL,
    trace_tol: float = TRACE_TOL,
    positivity_tol: float = POSITIVITY_TOL,
) -> DensityMatrix:
    """Check a raw matrix against the density-matrix invariants.

    Every violated invariant is reported, not just the first one.  The stored
    matrix is the symmetrized input.
    """
    dims = _as_dims(dims)
    mat = np.array(raw, dtype=complex)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {mat.shape}")
    if mat.shape[0] != dims.d:
        raise DimensionError(f"{mat.shape[0]}x{mat.shape[1]} matrix does not match dims {dims.as_list()}")

    problems = []
    defect = float(np.max(np.abs(mat - mat.conj().T)))
    if defect > hermitian_tol * dims.d:
        problems.append(f"NotHermitian: defect {defect:.3e}")
    herm = 0.5 * (mat + mat.conj().T)
    tr = float(np.real(np.trace(herm)))
    if abs(tr - 1.0) > trace_tol:
        problems.append(f"TraceNotOne: trace {tr!r}")
    worst = float(hermitian_eig(herm).eigenvalues[0])
    if worst < -positivity_tol:
        problems.append(f"NotPositive: minimum eigenvalue {worst:.3e}")
    if problems:
        raise StateValidationError(problems, worst)
    return DensityMatrix(dims, herm)


# ---------------------------------------------------------------------------
# generators

_BELL = {
    "phi+": (np.array([1, 0, 0, 1]), "Phi+"),
    "phi-": (np.array([1, 0, 0, -1]), "Phi-"),
    "psi+": (np.array([0, 1, 1, 0]), "Psi+"),
    "psi-": (np.array([0, 1, -1, 0]), "Psi-"),
}


def _check_p(p: float) -> float:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"mixing parameter must lie in [0, 1], got {p}")
    return float(p)


def bell(which: str = "phi+") -> DensityMatrix:
    key = which.lower()
    if key not in _BELL:
        raise ValueError(f"unknown Bell state {which!r}; choose from {sorted(_BELL)}")
    v = _BELL[key][0].astype(complex) / np.sqrt(2.0)
    return validate(np.outer(v, v.conj()), (2, 2))


def max_mixed(dims=(2, 2)) -> DensityMatrix:
    dims = _as_dims(dims)
    return validate(np.eye(dims.d, dtype=complex) / dims.d, dims)


def isotropic(p: float, n: int = 2) -> DensityMatrix:
    p = _check_p(p)
    dims = BipartiteDims(n, n)
    phi = np.eye(n, dtype=complex).reshape(n * n) / np.sqrt(n)
    mat = p * np.outer(phi, phi.conj()) + (1.0 - p) * np.eye(n * n) / (n * n)
    return validate(mat, dims)


def swap_operator(n: int) -> np.ndarray:
    f = np.zeros((n * n, n * n), dtype=complex)
    for i in range(n):
        for j in range(n):
            f[i * n + j, j * n + i] = 1.0
    return f


def werner(p: float, n: int = 2) -> DensityMatrix:
    p = _check_p(p)
    dims = BipartiteDims(n, n)
    anti = (np.eye(n * n) - swap_operator(n)) / (n * (n - 1))
    mat = p * anti + (1.0 - p) * np.eye(n * n) / (n * n)
    return validate(mat, dims)


def rational_separable_atoms(seed: int, count: int = 3, dims=(2, 2), max_denominator: int = 4):
    """Random grid atoms and rational weights behind :func:`random_rational_separable`.

    Returns ``(weights, atoms)`` where weights are ``Fraction`` objects and
    atoms are ``(ProductState, index)`` pairs drawn from the enumeration grid
    with every denominator at most ``max_denominator``.
    """
    from .enumeration import grid_size, enumerate_product

    dims = _as_dims(dims)
    if count < 1:
        raise ValueError("count must be >= 1")
    if max_denominator < 1:
        raise ValueError("max_denominator must be >= 1")
    rng = np.random.default_rng(seed)
    n_idx = grid_size(dims, max_denominator)
    atoms = []
    while len(atoms) < count:
        idx = int(rng.integers(n_idx))
        st = enumerate_product(idx, dims)
        if st is not None:
            atoms.append((st, idx))
    raw = [int(k) for k in rng.integers(1, 5, size=count)]
    total = sum(raw)
    weights = [Fraction(k, total) for k in raw]
    return weights, atoms


def random_rational_separable(seed: int, count: int = 3, dims=(2, 2), max_denominator: int = 4) -> DensityMatrix:
    """Convex mixture of ``count`` grid product states with rational weights.

    Separable by construction, and every atom sits at a finite enumeration
    index, so the growing-hull search must eventually find it.
    """
    dims = _as_dims(dims)
    weights, atoms = rational_separable_atoms(seed, count, dims, max_denominator)
    mat = sum(float(w) * st.projector for w, (st, _) in zip(weights, atoms))
    return validate(mat, dims)


# ---------------------------------------------------------------------------
# JSON interchange


def state_to_json(rho: DensityMatrix) -> dict:
    return {"dims": rho.dims.as_list(), "re": rho.mat.real.tolist(), "im": rho.mat.imag.tolist()}


def write_state(rho: DensityMatrix) -> str:
    return json.dumps(state_to_json(rho)) + "\n"


def state_from_json(obj, **tolerances) -> DensityMatrix:
    if not isinstance(obj, dict):
        raise StateFormatError("state must be a JSON object")
    missing = [k for k in ("dims", "re", "im") if k not in obj]
    if missing:
        raise StateFormatError(f"missing field(s): {', '.join(missing)}")
    dims = obj["dims"]
    if not (isinstance(dims, list) and len(dims) == 2 and all(isinstance(x, int) for x in dims)):
        raise StateFormatError("dims must be a list of two integers")
    try:
        re = np.array(obj["re"], dtype=float)
        im = np.array(obj["im"], dtype=float)
    except (TypeError, ValueError) as exc:
        raise StateFormatError(f"re/im must be numeric 2-d arrays: {exc}") from exc
    if re.ndim != 2 or re.shape != im.shape:
        raise StateFormatError(f"re/im must be 2-d arrays of equal shape, got {re.shape} and {im.shape}")
    return validate(re + 1j * im, BipartiteDims(*dims), **tolerances)


def read_state(text: str, **tolerances) -> DensityMatrix:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise StateFormatError(f"invalid JSON: {exc}") from exc
    return state_from_json(obj, **tolerances)


def reduced_purity(vec: np.ndarray, dims: BipartiteDims) -> float:
    """Tr[(Tr_B |v><v|)^2] for a unit vector ``vec``."""
    mat = np.asarray(vec).reshape(dims.n, dims.m)
    red = mat @ mat.conj().T
    return float(np.real(np.vdot(red, red)))


def reduced_state(rho: DensityMatrix, keep: str = "A") -> np.ndarray:
    return partial_trace(rho.mat, rho.dims, keep)


def product_density(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return kron(np.outer(a, a.conj()), np.outer(b, b.conj()))
