import numpy as np
import pytest

from isospec import expr as ex
from isospec.fields import SingularPointError
from isospec.hierarchy import (NodeWarning, build_hierarchy, darboux_step, embed_2d,
                               missing_state, partner_residual, wronskian)
from isospec.numerics.eigen import Grid1D
from isospec.numerics.stencil import GaussianBump, convergence_study, node_lattice
from isospec.potentials import (gradient_identity_residual, sample_nonsingular,
                                shift_identity_residual)


def X(src):
    return ex.parse(src, ["x"])


def test_expression_seed_is_exact():
    g = Grid1D(-5, 5, 101)
    step = darboux_step(X("x^2"), X("exp(-x^2/2)"), 1.0, g)
    np.testing.assert_allclose(step.V_new, g.nodes**2 + 2, atol=1e-12)
    assert ex.evaluate(step.V_new_expr, {"x": 0.5}) == pytest.approx(2.25)
    assert not step.has_nodes


def test_state_map_annihilates_seed():
    g = Grid1D(-8, 8, 201)
    step = darboux_step(X("1 - 2*sech(x)^2"), X("sech(x)"), 0.0, g)
    np.testing.assert_allclose(step.V_new, 1.0, atol=1e-12)
    np.testing.assert_allclose(step.state_map(X("sech(x)")), 0.0, atol=1e-14)
    mapped = step.state_map_expr(X("x*sech(x)"))
    # psi' - (ln phi)' psi of x sech x is sech x
    np.testing.assert_allclose(ex.evaluate(mapped, {"x": g.nodes}), 1 / np.cosh(g.nodes),
                               atol=1e-13)


def test_nodal_seed_warns():
    g = Grid1D(-5, 5, 100)
    with pytest.warns(NodeWarning):
        step = darboux_step(X("x^2"), X("x*exp(-x^2/2)"), 3.0, g)
    assert step.has_nodes


def test_seed_zero_at_node_is_refused():
    with pytest.raises(SingularPointError):
        darboux_step(X("x^2"), X("x"), 0.0, Grid1D(-1, 1, 9))


def test_grid_seed_matches_expression_seed():
    g = Grid1D(-4, 4, 400)
    phi = np.exp(-g.nodes**2 / 2)
    step = darboux_step(X("x^2"), phi, 1.0, g)
    core = slice(5, -5)
    # central differences of phi'/phi: error ~ h^2 |x|^3 / 6
    np.testing.assert_allclose(step.V_new[core], g.nodes[core] ** 2 + 2, atol=1e-2)


def test_three_level_oscillator_chain():
    g = Grid1D(-10, 10, 1000)
    chain = build_hierarchy(X("x^2"), [0, 0, 0], g, k=4)
    heads = [lv.spectrum.values for lv in chain.levels]
    for m, head in enumerate(heads):
        np.testing.assert_allclose(head, 2 * m + 1 + 2 * np.arange(4), atol=2e-2)
    assert [lv.deleted for lv in chain.levels[1:]] == pytest.approx([1, 3, 5], abs=1e-2)
    assert not any(lv.singular for lv in chain.levels)
    text = chain.to_csv()
    assert text.splitlines()[0].startswith("level,deleted_eigenvalue")
    assert chain.to_json() == build_hierarchy(X("x^2"), [0, 0, 0], g, k=4).to_json()


def test_missing_state_sech():
    g = Grid1D(-10, 10, 4000)
    U = missing_state(X("sech(x)"), g)
    # partner of the Poschl-Teller well at its zero mode is the flat potential 1 at E = 0
    assert partner_residual(U, X("1"), 0.0, g) <= 1e-6
    # exact: -cosh(x) (tanh(x) - tanh(-10)), integral from the left edge
    x = g.nodes
    exact = -np.cosh(x) * (np.tanh(x) + np.tanh(10.0))
    assert np.max(np.abs(U - exact) / np.abs(exact)) < 1e-5


def test_wronskian_of_sine_and_cosine():
    g = Grid1D(0, 3, 3000)
    assert wronskian(np.sin(g.nodes), np.cos(g.nodes), g, 1.0) == pytest.approx(-1.0, abs=1e-6)


def test_missing_state_rejects_nodal_seed():
    with pytest.raises(ValueError):
        missing_state(X("x*exp(-x^2)"), Grid1D(-3, 3, 50))


def test_partner_residual_detects_wrong_potential():
    g = Grid1D(-10, 10, 2000)
    U = missing_state(X("sech(x)"), g)
    assert partner_residual(U, X("1.5"), 0.0, g) > 1e-2


def test_embed_2d_oscillator():
    pair = embed_2d(ex.parse("xi^2", ["xi"]), ex.parse("0", ["rho"]), 1.0,
                    ex.parse("exp(-xi^2/2)", ["xi"]), 1.0)
    assert float(pair.V1(np.array([[0.0, 0.0]]))[0]) == pytest.approx(2.0)
    pts = sample_nonsingular(pair, 20, box=(-0.5, 0.5))
    assert gradient_identity_residual(pair, pts) <= 1e-8
    assert shift_identity_residual(pair, pts) <= 1e-6
    c = (0.1, 0.2)
    t = convergence_study(pair, GaussianBump(c, 0.2), 0.05, node_lattice(c, 0.1, 2), halvings=2)
    assert abs(t.order - 2) < 0.2


def test_embed_2d_rejects_non_eigenfunction():
    with pytest.raises(ValueError):
        embed_2d(ex.parse("xi^2", ["xi"]), ex.parse("0", ["rho"]), 3.0,
                 ex.parse("exp(-xi^2/2)", ["xi"]), 1.0)
