"""Default settings, kept in one table.

Command-line flags override these values; nothing reads environment
variables.

=========================  ========  ==========================================
key                        default   meaning
=========================  ========  ==========================================
eta                        0.05      width of the border band, 0 < eta < 1
budget                     100000    scheduler iterations before giving up
dps_level                  1         1 = PPT, k >= 2 = k-copy symmetric extension
mode                       grow      separable search: ``grow`` or ``tuple``
hull_tol                   1e-8      HS distance counted as hull membership
certificate_tol            1e-8      max reconstruction residual of a certificate
npt_tol                    1e-10     PT eigenvalues below ``-npt_tol`` are NPT
rank_cutoff                1e-9      eigenvalues above this count toward the rank
dps_max_iterations         2000      projection passes per extension problem
dps_feasibility_tol        1e-6      residual counted as a feasible extension
dps_infeasibility          1e-3      plateau floor for the heuristic verdict
dps_plateau_window         500       passes the plateau must last
=========================  ========  ==========================================
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

from .dps import NPT_TOL, DpsConfig
from .enumeration import RANK_CUTOFF
from .hull import MEMBERSHIP_TOL

DEFAULTS = {
    "eta": 0.05,
    "budget": 100_000,
    "dps_level": 1,
    "mode": "grow",
    "hull_tol": MEMBERSHIP_TOL,
    "certificate_tol": MEMBERSHIP_TOL,
    "npt_tol": NPT_TOL,
    "rank_cutoff": RANK_CUTOFF,
    "dps_max_iterations": 2000,
    "dps_feasibility_tol": 1e-6,
    "dps_infeasibility": 1e-3,
    "dps_plateau_window": 500,
}

MODES = ("grow", "tuple")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SchedulerConfig:
    eta: float = DEFAULTS["eta"]
    budget: int = DEFAULTS["budget"]
    mode: str = DEFAULTS["mode"]
    hull_tol: float = DEFAULTS["hull_tol"]
    certificate_tol: float = DEFAULTS["certificate_tol"]
    rank_cutoff: float = DEFAULTS["rank_cutoff"]
    dps: DpsConfig = field(
        default_factory=lambda: DpsConfig(
            level=DEFAULTS["dps_level"],
            max_iterations=DEFAULTS["dps_max_iterations"],
            feasibility_tol=DEFAULTS["dps_feasibility_tol"],
            infeasibility_threshold=DEFAULTS["dps_infeasibility"],
            plateau_window=DEFAULTS["dps_plateau_window"],
        )
    )

    def __post_init__(self):
        if not 0.0 < self.eta < 1.0:
            raise ConfigError(f"eta must lie in (0, 1), got {self.eta}")
        if int(self.budget) != self.budget or self.budget < 0:
            raise ConfigError(f"budget must be a non-negative integer, got {self.budget}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        for name in ("hull_tol", "certificate_tol", "rank_cutoff"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")

    def tolerances(self) -> dict:
        return {
            "hull_tol": self.hull_tol,
            "certificate_tol": self.certificate_tol,
            "rank_cutoff": self.rank_cutoff,
            "npt_tol": NPT_TOL,
            "dps_feasibility_tol": self.dps.feasibility_tol,
            "dps_infeasibility_threshold": self.dps.infeasibility_threshold,
            "dps_plateau_window": self.dps.plateau_window,
        }

    def to_json(self) -> dict:
        return {
            "eta": self.eta,
            "budget": self.budget,
            "mode": self.mode,
            "dps": asdict(self.dps),
        }


def make_config(
    eta=None,
    budget=None,
    mode=None,
    dps_level=None,
    dps_max_iterations=None,
    impose_ppt=False,
    hull_tol=None,
) -> SchedulerConfig:
    """Build a validated config; ``None`` means "use the default"."""

    def pick(val, key):
        return DEFAULTS[key] if val is None else val

    try:
        dps = DpsConfig(
            level=pick(dps_level, "dps_level"),
            impose_ppt_on_extension=impose_ppt,
            max_iterations=pick(dps_max_iterations, "dps_max_iterations"),
            feasibility_tol=DEFAULTS["dps_feasibility_tol"],
            infeasibility_threshold=DEFAULTS["dps_infeasibility"],
            plateau_window=DEFAULTS["dps_plateau_window"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    tol = pick(hull_tol, "hull_tol")
    return SchedulerConfig(
        eta=pick(eta, "eta"),
        budget=pick(budget, "budget"),
        mode=pick(mode, "mode"),
        hull_tol=tol,
        certificate_tol=max(tol, DEFAULTS["certificate_tol"]),
        dps=dps,
    )
