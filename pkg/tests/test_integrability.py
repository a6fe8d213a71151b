import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isospec import expr as ex
from isospec.euclid import ParamsError, make_params, vector_field_L
from isospec.integrability import (PRESETS, brute_force_admissible_c, check_n4, check_n5,
                                   check_pfaffian_conditions, preset_table1,
                                   random_admissible_params, solve_n4_translations,
                                   triple_identity_residual)



def _n4_c():
    # c12 = c34 = c13 = 1, c24 = 1 (so c42 = -1), c14 = c23 = 0
    c = np.zeros((4, 4))
    c[0, 1] = c[2, 3] = c[0, 2] = c[1, 3] = 1.0
    return c - c.T


N4_C = _n4_c()


def test_n2_is_always_integrable():
    rep = check_pfaffian_conditions(make_params(2, [1, 2], 5.0))
    assert rep.satisfied and rep.constraints == []


def test_n3_reduces_to_a_dot_c():
    good = check_pfaffian_conditions(make_params(3, [1, 0, 0], [0, 0, 1]))
    bad = check_pfaffian_conditions(make_params(3, [0, 0, 1], [0, 0, 1]))
    assert good.satisfied
    assert not bad.satisfied and bad.violated() == ["a.c"]


@pytest.mark.parametrize("row", PRESETS)
def test_presets_are_integrable_and_consistent(row):
    pre = preset_table1(row)
    p = pre.params
    assert check_pfaffian_conditions(p).satisfied
    names = ["x", "y", "z"]
    consts = {"a1": p.a[0], "a2": p.a[1], "a3": p.a[2],
              "c1": p.c_vector[0], "c2": p.c_vector[1], "c3": p.c_vector[2]}
    allowed = names + list(consts)
    pts = np.random.default_rng(row).uniform(-1.5, 1.5, (30, 3))
    bind = {**consts, "x": pts[:, 0], "y": pts[:, 1], "z": pts[:, 2]}
    beta = ex.evaluate(ex.parse(pre.beta, allowed), bind)
    np.testing.assert_allclose(beta, pts @ p.c_vector, atol=1e-12)
    # 2 gamma = 2 r.(a x c) + (c.r)^2 - c^2 r^2 for every row
    cv = p.c_vector
    want = 2 * pts @ np.cross(p.a, cv) + (pts @ cv) ** 2 - (cv @ cv) * np.sum(pts**2, axis=1)
    got = ex.evaluate(ex.parse(pre.two_gamma, allowed), bind)
    np.testing.assert_allclose(got, want, atol=1e-12)


def test_preset_row_range():
    with pytest.raises(ValueError):
        preset_table1(11)


def test_n4_rank_two_on_worked_example():
    basis = solve_n4_translations(N4_C)
    rep = check_n4(make_params(4, basis.sum(axis=0), N4_C))
    assert rep.satisfied
    assert rep.rank == 2
    assert basis.shape == (2, 4)
    for a in basis:
        assert check_n4(make_params(4, a, N4_C)).satisfied
    assert solve_n4_translations(np.zeros((4, 4))).shape == (4, 4)


def test_n4_detects_bad_translation():
    rep = check_n4(make_params(4, [1, 0, 0, 0], N4_C))
    assert not rep.satisfied


def test_n4_rejects_non_pfaffian_c():
    c = np.zeros((4, 4))
    c[0, 1], c[2, 3] = 1, 1
    c = c - c.T
    with pytest.raises(ParamsError):
        solve_n4_translations(c)


def test_n5_on_brute_force_c():
    c = brute_force_admissible_c(5)
    rep = check_n5(c)
    assert rep.satisfied
    assert rep.free_parameters == 5
    assert np.count_nonzero(np.triu(c)) >= 5


def test_n5_rejects_translations():
    with pytest.raises(ParamsError):
        check_n5(brute_force_admissible_c(5), a=[1, 0, 0, 0, 0])


@settings(max_examples=30, deadline=None)
@given(st.integers(3, 6), st.integers(0, 2**31 - 1))
def test_admissible_params_make_triple_identity_vanish(n, seed):
    rng = np.random.default_rng(seed)
    p = random_admissible_params(n, rng)
    assert check_pfaffian_conditions(p).satisfied
    pts = rng.uniform(-2, 2, (10, n))
    scale = 1 + np.max(np.abs(vector_field_L(p, pts))) * np.max(np.abs(p.c))
    assert triple_identity_residual(p, pts) <= 1e-12 * scale


def test_generic_params_fail_in_n4():
    rng = np.random.default_rng(5)
    c = rng.standard_normal((4, 4))
    p = make_params(4, rng.standard_normal(4), c - c.T)
    assert not check_pfaffian_conditions(p).satisfied
