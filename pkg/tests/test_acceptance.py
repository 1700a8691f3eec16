"""Acceptance criteria, one test per criterion.

Each test appends a PASS/FAIL line that is printed in the pytest terminal
summary.  Run this module alone with ``pytest tests/test_acceptance.py -v``.
"""

import time

import numpy as np

from sepdecide.config import make_config
from sepdecide.dps import DpsConfig, ppt_check, residual_history, run_dps
from sepdecide.enumeration import is_product, nearest_in_grid, vector_distance
from sepdecide.hull import barycentric_membership, facet_sign_membership
from sepdecide.linalg import hs_distance, kron
from sepdecide.scheduler import run
from sepdecide.states import ProductState, bell, isotropic, max_mixed, random_rational_separable, validate

from conftest import ACCEPTANCE_LINES, rand_density, rand_unit

SEED = 12345
FIRST_RUN: dict[str, str] = {}


def record(num, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {num}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def _check_decomposition(verdict, rho, tol=1e-8):
    dec = verdict.decomposition
    residual = hs_distance(dec.reconstruct(), rho.mat)
    products = all(is_product(a.vector, rho.dims)[0] for a in dec.atoms)
    return residual <= tol and products, residual


# --- verdict-producing cases, reused by the determinism check ---------------


def case_bell():
    return run(bell(), make_config(eta=0.05))


def case_max_mixed():
    return run(max_mixed())


def case_random_separable(seed):
    return run(random_rational_separable(seed, count=3, max_denominator=4))


def case_border():
    return run(isotropic(1 / 3), make_config(eta=0.2))


def verdict_suite():
    out = {"bell": case_bell().dumps(), "max_mixed": case_max_mixed().dumps(), "border": case_border().dumps()}
    for seed in range(100):
        out[f"random_separable_{seed}"] = case_random_separable(seed).dumps()
    return out


# --- criteria ----------------------------------------------------------------


def test_criterion_01_ppt_ground_truth():
    t0 = time.perf_counter()
    lam = ppt_check(bell()).min_eigenvalue
    mixed_flagged = not ppt_check(max_mixed()).ppt
    v = case_bell()
    elapsed = time.perf_counter() - t0
    FIRST_RUN["bell"] = v.dumps()
    ok = (
        abs(lam + 0.5) <= 1e-9
        and v.kind == "Entangled"
        and abs(v.certificate["min_eigenvalue"] + 0.5) <= 1e-9
        and not mixed_flagged
        and elapsed < 1.0
    )
    record(1, ok, f"Bell PT eigenvalue {lam:.12f}, verdict {v.kind}; I/4 flagged={mixed_flagged}; {elapsed:.3f} s")


def test_criterion_02_isotropic_sweep():
    ps = [0.30, 0.32, 0.34, 0.36]
    res = [ppt_check(isotropic(p)) for p in ps]
    errs = [abs(r.min_eigenvalue - (1 - 3 * p) / 4) for r, p in zip(res, ps)]
    flags = [not r.ppt for r in res]
    ok = max(errs) <= 1e-9 and flags == [False, False, True, True]
    record(2, ok, f"max |lambda - (1-3p)/4| = {max(errs):.2e}; NPT flags {flags}")


def test_criterion_03_max_mixed_separable():
    rho = max_mixed()
    t0 = time.perf_counter()
    v = case_max_mixed()
    elapsed = time.perf_counter() - t0
    FIRST_RUN["max_mixed"] = v.dumps()
    sound, residual = _check_decomposition(v, rho)
    ok = (
        v.kind == "Separable"
        and v.certificate["atom_count"] <= 16
        and sound
        and v.steps["iterations"] <= 10_000
        and elapsed < 60
    )
    record(
        3,
        ok,
        f"{v.kind} with {v.certificate.get('atom_count')} atoms, residual {residual:.1e}, "
        f"{v.steps['iterations']} steps, {elapsed:.2f} s",
    )


def test_criterion_04_constructed_separable_states():
    failures = []
    worst = 0.0
    max_steps = 0
    t0 = time.perf_counter()
    for seed in range(100):
        rho = random_rational_separable(seed, count=3, max_denominator=4)
        v = case_random_separable(seed)
        FIRST_RUN[f"random_separable_{seed}"] = v.dumps()
        if v.kind != "Separable":
            failures.append(seed)
            continue
        sound, residual = _check_decomposition(v, rho)
        worst = max(worst, residual)
        max_steps = max(max_steps, v.steps["iterations"])
        if not sound:
            failures.append(seed)
    elapsed = time.perf_counter() - t0
    ok = not failures
    record(
        4,
        ok,
        f"{100 - len(failures)}/100 Separable, worst residual {worst:.1e}, "
        f"max steps {max_steps}, {elapsed:.0f} s, failing seeds {failures[:10]}",
    )


def test_criterion_05_oracle_equivalence():
    rng = np.random.default_rng(SEED)
    disagreements = 0
    counts = {"In": 0, "Out": 0}
    n = 0
    while n < 1000:
        pts = [ProductState(rand_unit(rng, 2), rand_unit(rng, 2)).projector for _ in range(16)]
        if n % 2 == 0:
            w = rng.dirichlet(np.ones(16))
            target = sum(wi * p for wi, p in zip(w, pts))
        else:
            target = rand_density(rng, 4)
        f = facet_sign_membership(target, pts)
        if f.verdict == "Degenerate":
            continue
        b = barycentric_membership(target, pts)
        n += 1
        counts[f.verdict] += 1
        if f.verdict != b.verdict or (f.verdict == "In" and np.max(np.abs(f.weights - b.weights)) > 1e-8):
            disagreements += 1
    record(5, disagreements == 0, f"{n} instances ({counts['In']} In, {counts['Out']} Out), {disagreements} disagreements")


def test_criterion_06_projector_distance_bound():
    rng = np.random.default_rng(SEED)
    violations = 0
    worst = 0.0
    corrected_violations = 0
    pairs = 0
    while pairs < 10_000:
        u = rand_unit(rng, 4)
        v = u + rng.uniform(0.0, 0.5) * rand_unit(rng, 4)
        v /= np.linalg.norm(v)
        eps = vector_distance(u, v)
        if eps > 0.5:
            continue
        pairs += 1
        hs = hs_distance(np.outer(u, u.conj()), np.outer(v, v.conj()))
        excess = hs - eps * np.sqrt(2 - eps / 2)
        if excess > 1e-9:
            violations += 1
            worst = max(worst, excess)
        if hs > eps * np.sqrt(2 - eps**2 / 2) + 1e-9:
            corrected_violations += 1
    record(
        6,
        violations == 0,
        f"bound eps*sqrt(2 - eps/2): {violations}/{pairs} violations (worst excess {worst:.3e}); "
        f"eps*sqrt(2 - eps^2/2) holds with {corrected_violations} violations",
    )


def test_criterion_07_grid_density():
    rng = np.random.default_rng(SEED)
    worst = 0.0
    monotone = True
    for _ in range(100):
        psi = ProductState(rand_unit(rng, 2), rand_unit(rng, 2))
        dists = [nearest_in_grid(psi, q)[1] for q in range(1, 9)]
        monotone &= all(b <= a + 1e-12 for a, b in zip(dists, dists[1:]))
        worst = max(worst, dists[-1])
    record(7, worst <= 0.35 and monotone, f"max distance at budget 8 = {worst:.4f}; monotone={monotone}")


def test_criterion_08_border():
    t0 = time.perf_counter()
    v = case_border()
    elapsed = time.perf_counter() - t0
    FIRST_RUN["border"] = v.dumps()
    ok = v.kind == "Border" and v.certificate.get("eta") == 0.2 and elapsed < 300
    record(8, ok, f"{v.kind} eta={v.certificate.get('eta')} after {v.steps['iterations']} steps, {elapsed:.1f} s")


def test_criterion_09_symmetric_extension():
    rng = np.random.default_rng(SEED)
    hits = []
    for _ in range(10):
        rho = validate(kron(rand_density(rng, 2), rand_density(rng, 2)), (2, 2))
        hist = residual_history(rho, 2, 200)
        hits.append(next((i + 1 for i, r in enumerate(hist) if r < 1e-6), None))
    first_below = None if None in hits else max(hits)
    plateau = min(residual_history(bell(), 2, 1000)[99:])
    out, _ = run_dps(bell(), DpsConfig(level=2))
    ok = first_below is not None and plateau > 5e-2 and out.certificate["label"] == "level-2 heuristic"
    record(
        9,
        ok,
        f"10 product states reach residual < 1e-6 by iteration {first_below}; Bell plateau min {plateau:.4f} "
        f"over iterations 100-1000; verdict labeled {out.certificate['label']!r}",
    )


def test_criterion_10_determinism():
    first = dict(FIRST_RUN)
    if len(first) < 103:
        first = verdict_suite()
    second = verdict_suite()
    differing = sorted(k for k in second if first.get(k) != second[k])
    record(10, not differing, f"{len(second)} verdicts compared across two runs, {len(differing)} differ {differing[:5]}")
