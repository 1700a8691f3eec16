"""The combined two-sided decision procedure.

Each iteration does one unit of work in four streams:

1. entanglement detection on ``rho``
2. separability search on ``rho``
3. entanglement detection on ``rho_e = (1 + eta) rho - eta I/d``  (sets ``f1``)
4. separability search on ``rho_s = (1 - eta) rho + eta I/d``     (sets ``f2``)

and then checks, in this order: stream 1 fired (Entangled), stream 2 fired
(Separable), ``f1 and f2`` (Border).  The identity in the shifts is the
maximally mixed state ``I/d`` so that both shifted operators keep unit trace.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import comb

import numpy as np

from .config import SchedulerConfig
from .dps import DpsCarry, DpsConfig, DpsOutcome, dps_step
from .enumeration import (
    decode_range,
    iter_products,
    numerical_rank,
    range_basis,
    range_tuple_products,
)
from .hull import (
    CertificateError,
    GrowingHull,
    MEMBERSHIP_TOL,
    SeparableDecomposition,
    affinely_independent,
    extract_certificate,
    facet_sign_membership,
)
from .linalg import hermitian_eig
from .states import DensityMatrix

SHIFT_PSD_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class EtaShift:
    eta: float
    rho_e_matrix: np.ndarray
    rho_s: DensityMatrix
    valid: bool
    min_eigenvalue: float

    @property
    def rho_e(self) -> DensityMatrix | None:
        return DensityMatrix(self.rho_s.dims, self.rho_e_matrix) if self.valid else None


def make_shift(rho: DensityMatrix, eta: float) -> EtaShift:
    if not 0.0 < eta < 1.0:
        raise ValueError(f"eta must lie in (0, 1), got {eta}")
    mixed = np.eye(rho.d) / rho.d
    rho_e = (1.0 + eta) * rho.mat - eta * mixed
    rho_s = (1.0 - eta) * rho.mat + eta * mixed
    lam = float(hermitian_eig(rho_e).eigenvalues[0])
    return EtaShift(eta, rho_e, DensityMatrix(rho.dims, rho_s), lam >= -SHIFT_PSD_TOL, lam)


# ---------------------------------------------------------------------------
# separability stream


def unrank_combination(index: int, size: int) -> tuple[int, ...]:
    """The ``index``-th ``size``-subset of the naturals in colex order."""
    out = []
    rest = index
    for k in range(size, 0, -1):
        c = k - 1
        while comb(c + 1, k) <= rest:
            c += 1
        out.append(c)
        rest -= comb(c, k)
    return tuple(reversed(out))


class A2Stream:
    """Enumeration-driven separability search on one target state.

    Full-rank targets walk the product grid.  Rank-deficient targets use
    range mode: each step looks at the next grid state (kept only when it lies
    in the range of the target) and at the next range-enumerated product
    vector.  ``grow`` mode feeds the candidates into a growing hull;
    ``tuple`` mode walks L-subsets of the candidate list in colex order and
    runs the facet sign test on each affinely independent one.
    """

    def __init__(self, target: DensityMatrix, mode: str = "grow", tol: float = MEMBERSHIP_TOL,
                 rank_cutoff: float = 1e-9, cert_tol: float | None = None, candidates=None):
        if mode not in ("grow", "tuple"):
            raise ValueError(f"unknown mode {mode!r}")
        self.target = target
        self.mode = mode
        self.tol = tol
        self.cert_tol = tol if cert_tol is None else cert_tol
        dims = target.dims
        self.rank = numerical_rank(target, rank_cutoff)
        self.range_mode = self.rank < dims.d
        self.basis = range_basis(target, rank_cutoff) if self.range_mode else None
        self.L = self.rank**2
        self.steps = 0
        self.tests_run = 0
        self.tuple_index = 0
        self.skipped_tuples = 0
        self.result: SeparableDecomposition | None = None
        self._source = iter(candidates) if candidates is not None else self._candidates()
        self.pool: list = []
        self.hull = GrowingHull(target.mat, tol=tol, L=self.L) if mode == "grow" else None

    def _candidates(self):
        """Yield one list of new product states per enumeration position."""
        step = 0
        tuple_states = [None] * 4
        for _, st in iter_products(self.target.dims):
            found = []
            if st is not None and (self.basis is None or self.basis.contains(st.vector)):
                found.append(st)
            if self.range_mode:
                root = step % 4
                if root == 0:
                    ridx = decode_range(step, self.rank)
                    # rank one has a single (empty) coefficient tuple
                    tuple_states = (
                        [None] * 4
                        if ridx is None
                        else range_tuple_products(self.target, self.rank, ridx.coeffs, self.basis)
                    )
                if tuple_states[root] is not None:
                    found.append(tuple_states[root])
            step += 1
            yield found

    def _pull(self) -> list | None:
        """Next batch of candidates; ``None`` once an explicit candidate list is used up."""
        try:
            got = next(self._source)
        except StopIteration:
            return None
        return got if isinstance(got, list) else [got]

    def step(self) -> SeparableDecomposition | None:
        if self.result is not None:
            return self.result
        self.steps += 1
        if self.mode == "grow":
            return self._grow_step()
        return self._tuple_step()

    def _certify(self, weights, atoms):
        try:
            self.result = extract_certificate(weights, atoms, self.target.mat, self.cert_tol)
        except CertificateError:
            return None
        return self.result

    def _grow_step(self):
        fresh = self._pull() or []
        for st in fresh:
            if self.hull.add(st.projector, st):
                self.pool.append(st)
        if fresh and self.hull.contains:
            return self._certify(self.hull.weights(), self.hull.states)
        return None

    def _tuple_step(self):
        # one unit of work: either pull one enumeration position or test one tuple
        combo = unrank_combination(self.tuple_index, self.L)
        if len(self.pool) <= combo[-1]:
            fresh = self._pull()
            if fresh:
                self.pool.extend(fresh)
            return None
        self.tuple_index += 1
        atoms = [self.pool[i] for i in combo]
        if not affinely_independent(atoms):
            self.skipped_tuples += 1
            return None
        self.tests_run += 1
        res = facet_sign_membership(self.target.mat, atoms)
        if res.verdict != "In":
            return None
        return self._certify(res.weights, atoms)


def a2_step(stream: A2Stream) -> SeparableDecomposition | None:
    """One unit of separability-search work; returns the certificate on detection."""
    return stream.step()


# ---------------------------------------------------------------------------
# run loop


@dataclass
class A1Stream:
    target: DensityMatrix
    cfg: DpsConfig
    carry: DpsCarry | None = None
    outcome: DpsOutcome | None = None
    steps: int = 0

    def step(self) -> DpsOutcome:
        if self.outcome is not None and self.outcome.final:
            return self.outcome
        self.steps += 1
        self.outcome, self.carry = dps_step(self.target, self.cfg, self.carry)
        return self.outcome


@dataclass
class RunState:
    step: int = 0
    f1: bool = False
    f2: bool = False
    f1_step: int | None = None
    f2_step: int | None = None
    streams: dict = field(default_factory=dict)

    def raise_flags(self, f1: bool, f2: bool):
        # flags are monotone: once raised they stay raised
        if f1 and not self.f1:
            self.f1, self.f1_step = True, self.step
        if f2 and not self.f2:
            self.f2, self.f2_step = True, self.step


@dataclass
class Verdict:
    kind: str  # Entangled | Separable | Border | BudgetExhausted
    certificate: dict
    steps: dict
    tolerances: dict
    config: dict
    metadata: dict
    decomposition: SeparableDecomposition | None = field(default=None, repr=False)

    @property
    def exit_code(self) -> int:
        return {"Separable": 0, "Entangled": 1, "Border": 2, "BudgetExhausted": 3}[self.kind]

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "certificate": self.certificate,
            "steps": self.steps,
            "tolerances": self.tolerances,
            "config": self.config,
            "metadata": self.metadata,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


def _dps_cert(out: DpsOutcome) -> dict:
    return {"verdict": out.verdict, "level": out.level, "iterations": out.iterations, **(out.certificate or {})}


def run(rho: DensityMatrix, cfg: SchedulerConfig | None = None) -> Verdict:
    """Interleave the four streams until a termination criterion fires or the budget runs out."""
    cfg = cfg or SchedulerConfig()
    shift = make_shift(rho, cfg.eta)
    s1 = A1Stream(rho, cfg.dps)
    s2 = A2Stream(rho, cfg.mode, cfg.hull_tol, cfg.rank_cutoff, cfg.certificate_tol)
    s3 = A1Stream(shift.rho_e, cfg.dps) if shift.valid else None
    s4 = A2Stream(shift.rho_s, cfg.mode, cfg.hull_tol, cfg.rank_cutoff, cfg.certificate_tol) if shift.valid else None
    state = RunState(streams={"1": s1, "2": s2, "3": s3, "4": s4})
    metadata = {
        "identity_normalization": "shifts use the maximally mixed state I/d",
        "dims": rho.dims.as_list(),
        "rank": s2.rank,
        "a2_mode": "range" if s2.range_mode else "full-rank",
        "rho_e_valid": shift.valid,
        "rho_e_min_eigenvalue": shift.min_eigenvalue,
        "streams_3_4": "active" if shift.valid else "dropped",
    }

    def steps():
        return {
            "iterations": state.step,
            "stream1": s1.steps,
            "stream2": s2.steps,
            "stream3": s3.steps if s3 else 0,
            "stream4": s4.steps if s4 else 0,
        }

    def verdict(kind, cert, dec=None):
        return Verdict(kind, cert, steps(), cfg.tolerances(), cfg.to_json(), metadata, dec)

    while state.step < cfg.budget:
        state.step += 1
        out1 = s1.step()
        dec2 = s2.step()
        f1 = f2 = False
        if s3 is not None and not state.f1:
            f1 = s3.step().entangled
        if s4 is not None and not state.f2:
            f2 = s4.step() is not None
        state.raise_flags(f1, f2)

        if out1.entangled:
            return verdict("Entangled", {"stream": 1, **_dps_cert(out1)})
        if dec2 is not None:
            return verdict("Separable", {"stream": 2, "atom_count": len(dec2), **dec2.to_json()}, dec2)
        if state.f1 and state.f2:
            cert = {
                "eta": cfg.eta,
                "f1": True,
                "f2": True,
                "f1_step": state.f1_step,
                "f2_step": state.f2_step,
                "rho_e_entangled": _dps_cert(s3.outcome),
                "rho_s_separable": s4.result.to_json(),
            }
            return verdict("Border", cert)
    cert = {"steps": state.step, "f1": state.f1, "f2": state.f2}
    if s1.outcome is not None:
        cert["stream1"] = s1.outcome.verdict
    return verdict("BudgetExhausted", cert)
