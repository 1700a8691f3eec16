from itertools import combinations
from math import comb

import numpy as np
import pytest

from sepdecide.config import ConfigError, SchedulerConfig, make_config
from sepdecide.enumeration import grid_size, is_product
from sepdecide.linalg import allclose, hs_distance, partial_transpose
from sepdecide.scheduler import A2Stream, RunState, a2_step, make_shift, run, unrank_combination
from sepdecide.states import ProductState, bell, isotropic, max_mixed, random_rational_separable, validate

from conftest import rand_density, rand_unit


def test_shift_fixed_point():
    rho = max_mixed()
    for eta in (0.01, 0.3, 0.9):
        sh = make_shift(rho, eta)
        assert sh.valid
        assert allclose(sh.rho_e.mat, rho.mat, 1e-15)
        assert allclose(sh.rho_s.mat, rho.mat, 1e-15)


def test_shift_of_bell_is_invalid():
    for eta in (0.05, 0.2):
        sh = make_shift(bell(), eta)
        assert not sh.valid and sh.rho_e is None
        assert abs(sh.min_eigenvalue + eta / 4) < 1e-12
        w = np.linalg.eigvalsh(sh.rho_e_matrix)
        assert allclose(w, [-eta / 4] * 3 + [1 + 3 * eta / 4], 1e-12)


def test_shift_traces(rng):
    for _ in range(20):
        rho = validate(rand_density(rng, 6), (2, 3))
        sh = make_shift(rho, rng.uniform(0.01, 0.99))
        assert abs(np.trace(sh.rho_e_matrix).real - 1) < 1e-12
        assert abs(np.trace(sh.rho_s.mat).real - 1) < 1e-12
        assert np.linalg.eigvalsh(sh.rho_s.mat).min() > 0


@pytest.mark.parametrize("eta", [0.0, 1.0, -0.1])
def test_shift_rejects_eta(eta):
    with pytest.raises(ValueError):
        make_shift(max_mixed(), eta)


def test_config_validation():
    for bad in (dict(eta=0.0), dict(eta=1.5), dict(budget=-1), dict(mode="dfs"), dict(dps_level=0)):
        with pytest.raises(ConfigError):
            make_config(**bad)
    with pytest.raises(ConfigError):
        SchedulerConfig(hull_tol=0.0)
    cfg = make_config()
    assert cfg.eta == 0.05 and cfg.budget == 100_000 and cfg.dps.level == 1 and cfg.mode == "grow"


def test_bell_is_entangled_at_step_one():
    v = run(bell(), make_config(eta=0.05))
    assert v.kind == "Entangled" and v.exit_code == 1
    assert v.steps["iterations"] == 1
    assert abs(v.certificate["min_eigenvalue"] + 0.5) < 1e-12
    assert v.certificate["label"] == "exact"
    assert v.metadata["streams_3_4"] == "dropped"


def test_max_mixed_is_separable():
    v = run(max_mixed())
    assert v.kind == "Separable" and v.exit_code == 0
    assert v.certificate["atom_count"] == 4
    assert allclose([a["weight"] for a in v.certificate["atoms"]], [0.25] * 4, 1e-12)
    assert v.certificate["residual"] < 1e-12


def test_zero_budget():
    v = run(max_mixed(), make_config(budget=0))
    assert v.kind == "BudgetExhausted" and v.exit_code == 3
    assert v.certificate["steps"] == 0 and v.steps["iterations"] == 0


def test_separable_certificates_are_sound():
    for seed in range(3):
        rho = random_rational_separable(seed, count=2, max_denominator=2)
        v = run(rho)
        assert v.kind == "Separable"
        dec = v.decomposition
        assert hs_distance(dec.reconstruct(), rho.mat) <= 1e-8
        for atom in dec.atoms:
            assert is_product(atom.vector, rho.dims)[0]


def test_entangled_certificates_are_sound(rng):
    for _ in range(10):
        rho = validate(rand_density(rng, 4, rank=2), (2, 2))
        v = run(rho, make_config(budget=50))
        if v.kind != "Entangled":
            continue
        c = v.certificate
        vec = np.array(c["eigenvector"]["re"]) + 1j * np.array(c["eigenvector"]["im"])
        pt = partial_transpose(rho.mat, rho.dims)
        assert abs(np.vdot(vec, pt @ vec).real - c["min_eigenvalue"]) < 1e-9
        assert c["min_eigenvalue"] < 0


def test_flags_are_monotone():
    st = RunState()
    st.step = 3
    st.raise_flags(True, False)
    st.step = 5
    st.raise_flags(False, True)
    st.step = 9
    st.raise_flags(False, False)
    assert st.f1 and st.f2 and st.f1_step == 3 and st.f2_step == 5


def test_exclusivity_across_modes():
    states = [bell(), max_mixed(), isotropic(0.2), isotropic(0.5), random_rational_separable(1, count=2, max_denominator=2)]
    for rho in states:
        kinds = set()
        for mode in ("grow", "tuple"):
            for _ in range(2):
                kinds.add(run(rho, make_config(mode=mode, budget=400)).kind)
        assert not {"Entangled", "Separable"} <= kinds


def test_determinism():
    rho = random_rational_separable(7, count=2, max_denominator=3)
    a = run(rho, make_config(budget=20_000))
    b = run(rho, make_config(budget=20_000))
    assert a.dumps() == b.dumps()


def test_border_on_rank_deficient_never_emitted():
    rho = validate(np.diag([0.5, 0.5, 0, 0]), (2, 2))
    v = run(rho, make_config(eta=0.3, budget=30))
    assert v.metadata["streams_3_4"] == "dropped"
    assert v.kind != "Border"


def test_a2_target_first_pool_element():
    st = ProductState(np.array([1, 0], dtype=complex), np.array([1, 0], dtype=complex))
    target = validate(st.projector, (2, 2))
    stream = A2Stream(target)
    dec = a2_step(stream)
    assert dec is not None and stream.steps == 1
    assert allclose(dec.atoms[0].vector, st.vector, 1e-15)


def test_tuple_mode_skips_dependent_tuples():
    z, o = np.array([1, 0], dtype=complex), np.array([0, 1], dtype=complex)
    p, q = np.array([1, 1]) / np.sqrt(2), np.array([1, 1j]) / np.sqrt(2)
    atoms = [ProductState(z, b) for b in (z, o, p, q)]
    w = [0.1, 0.2, 0.3, 0.4]
    target = validate(sum(wi * a.projector for wi, a in zip(w, atoms)), (2, 2))
    # the repeated first atom makes the first three 4-subsets dependent
    stream = A2Stream(target, "tuple", candidates=[atoms[0]] + atoms)
    assert stream.L == 4
    # the pool fills lazily: pulls at steps 1-4 and 6, dependent tuples at steps 5, 7 and 8
    results = [a2_step(stream) for _ in range(8)]
    assert results == [None] * 8 and stream.tests_run == 0 and stream.skipped_tuples == 3
    dec = a2_step(stream)
    assert dec is not None and stream.tests_run == 1
    assert allclose(sorted(dec.weights), w, 1e-10)


def test_tuple_mode_runs_dry():
    stream = A2Stream(max_mixed(), "tuple", candidates=[])
    assert a2_step(stream) is None


def test_growing_mode_finds_generator_atoms():
    for seed in range(10):
        rho = random_rational_separable(seed, count=3, max_denominator=2)
        stream = A2Stream(rho)
        limit = grid_size(rho.dims, 3)
        dec = None
        while dec is None and stream.steps < limit:
            dec = a2_step(stream)
        assert dec is not None, seed
        assert dec.residual <= 1e-8


def test_colex_combinations():
    for size in (1, 2, 3):
        n = 6
        total = comb(n, size)
        got = [unrank_combination(i, size) for i in range(total)]
        assert sorted(got) == sorted(combinations(range(n), size))
        assert got == sorted(got, key=lambda c: c[::-1])
    assert unrank_combination(0, 4) == (0, 1, 2, 3)
