import math

import numpy as np
import pytest

from dysonlab import heat


@pytest.fixture(scope="module")
def form_mid():
    return heat.assemble_form(0.5, 1.0, 512)


def test_uniform_unweighted_grid_recovers_laplacian_stencil():
    m = 128
    form = heat.assemble_form(0.0, 1.0, m, grading=1.0)
    h = 2.0 / m
    np.testing.assert_allclose(form.trans, 1.0 / h, rtol=1e-12)
    np.testing.assert_allclose(np.diff(form.nodes), h, rtol=1e-12)


def test_total_mass_exact():
    for beta in (0.5, 1.0, 2.2):
        form = heat.assemble_form(beta, 1.0, 256)
        assert form.mass.sum() == pytest.approx(2.0 / (beta + 1.0), rel=1e-12)
        assert np.all(form.mass > 0.0)


def test_grid_symmetric_and_avoids_origin():
    form = heat.assemble_form(0.7, 1.0, 256)
    assert np.all(form.nodes != 0.0)
    np.testing.assert_allclose(form.nodes, -form.nodes[::-1], atol=0.0)


def test_stiffness_rows_sum_to_zero_and_psd(form_mid):
    ones = np.ones(form_mid.m)
    assert np.max(np.abs(form_mid.stiffness_apply(ones))) == 0.0
    lam, _, _, _ = form_mid.spectral()
    assert lam[0] <= 1e-10 * lam[-1]  # zero mode present
    assert np.all(lam >= 0.0)


def test_central_edge_decouples_exactly_at_threshold():
    for beta in (1.0, 1.5, 3.0):
        form = heat.assemble_form(beta, 1.0, 128)
        k = form.m // 2 - 1  # edge between the two innermost nodes
        assert form.trans[k] == 0.0
    form = heat.assemble_form(0.99, 1.0, 128)
    assert form.trans[form.m // 2 - 1] > 0.0


def test_dirichlet_integral_quadratic_profile():
    form = heat.assemble_form(1.0, 1.0, 1024, grading=1.0)
    got = heat.dirichlet_integral(form, form.nodes**2)
    assert got == pytest.approx(2.0, rel=1e-3)
    assert heat.dirichlet_integral(form, np.full(form.m, 3.3)) == 0.0
    assert heat.energy(form, form.nodes**2) == pytest.approx(1.0, rel=1e-3)


def test_constants_are_invariant(form_mid):
    ones = np.ones(form_mid.m)
    for t in (1e-4, 0.05, 2.0):
        assert np.max(np.abs(heat.evolve(form_mid, ones, t) - 1.0)) <= 1e-10


def test_weighted_mean_conserved(form_mid):
    rng = np.random.default_rng(0)
    f = rng.normal(size=form_mid.m)
    w = form_mid.mass
    before = float(w @ f)
    after = float(w @ heat.evolve(form_mid, f, 0.07))
    assert after == pytest.approx(before, rel=1e-10)


def test_semigroup_self_adjoint(form_mid):
    rng = np.random.default_rng(1)
    f = rng.normal(size=form_mid.m)
    g = rng.normal(size=form_mid.m)
    w = form_mid.mass
    a = float(w @ (heat.evolve(form_mid, f, 0.03) * g))
    b = float(w @ (f * heat.evolve(form_mid, g, 0.03)))
    assert a == pytest.approx(b, rel=1e-8)


def test_maximum_principle(form_mid):
    rng = np.random.default_rng(2)
    for _ in range(5):
        f = rng.normal(size=form_mid.m)
        Tf = heat.evolve(form_mid, f, 0.02)
        assert Tf.max() <= f.max() + 1e-10
        assert Tf.min() >= f.min() - 1e-10


def test_energy_contraction(form_mid):
    rng = np.random.default_rng(3)
    f = rng.normal(size=form_mid.m)
    e0 = heat.dirichlet_integral(form_mid, f)
    for t in (1e-3, 0.05, 1.0):
        assert heat.dirichlet_integral(form_mid, heat.evolve(form_mid, f, t)) <= e0 * (1 + 1e-12)


def test_parity_preserved(form_mid):
    odd = np.tanh(form_mid.nodes / 0.1)
    T = heat.evolve(form_mid, odd, 0.02)
    assert np.max(np.abs(T + T[::-1])) <= 1e-10
    even = np.exp(-form_mid.nodes**2)
    T = heat.evolve(form_mid, even, 0.02)
    assert np.max(np.abs(T - T[::-1])) <= 1e-10


def test_crank_nicolson_agrees_with_spectral(form_mid):
    rng = np.random.default_rng(4)
    f = rng.normal(size=form_mid.m)
    spec = heat.evolve(form_mid, f, 0.03)
    cn = heat.evolve(form_mid, f, 0.03, steps=4000)
    assert np.max(np.abs(cn - spec)) <= 1e-6 * np.max(np.abs(f))


def test_evolve_validation(form_mid):
    with pytest.raises(ValueError):
        heat.evolve(form_mid, np.ones(7), 0.1)
    with pytest.raises(ValueError):
        heat.evolve(form_mid, np.ones(form_mid.m), -1.0)
    with pytest.raises(ValueError):
        heat.evolve(form_mid, np.ones(form_mid.m), 0.1, steps=0)


def test_margin_dichotomy_small_grids():
    for beta, grows in ((1.5, False), (0.5, True)):
        ff = heat.assemble_form(beta, 1.0, 1024)
        fc = heat.assemble_form(beta, 1.0, 512)
        odd = heat.margin_refinement(ff, fc, heat.DATUM_PROFILES["step-odd-0.1"], 0.01)
        even = heat.margin_refinement(ff, fc, heat.DATUM_PROFILES["gauss-even"], 0.01)
        assert even.trend == "vanishing"
        assert (odd.trend == "growing") == grows


def test_finite_dimension_margin_at_tensorized_bound():
    # N = 2 + beta, the two-particle bound carried by the 1-D factor
    beta = 1.5
    ff = heat.assemble_form(beta, 1.0, 1024)
    fc = heat.assemble_form(beta, 1.0, 512)
    for name, fn in heat.DATUM_PROFILES.items():
        rep = heat.margin_refinement(ff, fc, fn, 0.01, N=2.0 + beta, datum=name)
        assert rep.fine.margin <= 5.0 * rep.err_est


def test_margin_grows_toward_threshold_at_fixed_grid():
    # at fixed resolution the violation margin is larger for beta closer to
    # 1: the innermost-node amplification t1^(-2 beta) beats the shrinking
    # (1-beta)^2 flux prefactor (measured; both trends classify as growing)
    form = heat.assemble_form(0.5, 1.0, 512)
    form99 = heat.assemble_form(0.99, 1.0, 512)
    odd = heat.DATUM_PROFILES["step-odd-0.1"]
    m_05 = heat.be_margin(form, odd, 0.01).margin
    m_99 = heat.be_margin(form99, odd, 0.01).margin
    assert m_05 > 0.0 and m_99 > 0.0
    assert m_99 >= m_05


def test_counterexample_search_dichotomy():
    found = heat.counterexample_search(heat.assemble_form(0.5, 1.0, 1024), 0.01)
    assert found.best.trend == "growing"
    assert found.best.fine.margin >= 10.0 * found.best.err_est
    none_found = heat.counterexample_search(heat.assemble_form(1.5, 1.0, 1024), 0.01)
    assert none_found.best.trend == "vanishing"
    with pytest.raises(ValueError):
        heat.counterexample_search(heat.assemble_form(1.5, 1.0, 128), 0.01, candidates={})


def test_assemble_validation():
    with pytest.raises(ValueError):
        heat.assemble_form(0.5, 1.0, 63)  # too few cells
    with pytest.raises(ValueError):
        heat.assemble_form(0.5, 1.0, 129)  # odd cell count
    with pytest.raises(ValueError):
        heat.assemble_form(0.5, -1.0, 128)
