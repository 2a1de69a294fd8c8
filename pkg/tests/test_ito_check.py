import numpy as np
import pytest

from cvrlab import (
    EpsilonLadder,
    Functional,
    Path,
    UnsupportedCombinationError,
    brownian,
    ito_residual,
    make_functional,
    make_grid,
    reference_qv,
    sample,
)
from cvrlab.experiments import ito_experiment

G = make_grid(1.0, 256)
TAU = 0.25
QV_T = Path(G, G.times)


def ladder(ms=(8, 4, 2, 1), replicas=1):
    return EpsilonLadder(tuple(m * G.dt for m in ms), replicas=replicas)


def test_residual_exactly_zero_at_origin():
    w = sample(brownian(), G, 0)
    for name in ("endpoint:square", "integral-squared", "energy"):
        rep = ito_residual(make_functional(name), w, TAU, ladder(), qv=QV_T)
        for terms in rep.terms:
            assert terms.residual.values[0] == 0.0


def test_linear_functional_exact_on_linear_path():
    # F(eta) = eta(0) on X_t = t: X_t = X_0 + int 1 dX with no quadratic term
    F = make_functional("endpoint:linear")
    x = Path(G, G.times)
    rep = ito_residual(F, x, TAU, ladder(), qv=Path(G, np.zeros(G.N + 1)))
    for terms in rep.terms:
        keep = G.times <= G.T - terms.eps + 1e-12
        assert np.max(np.abs(terms.residual.values[keep])) < 1e-12


def test_linear_functional_exact_at_dt_on_any_path():
    # at eps = dt the forward sum telescopes exactly for F(eta) = eta(0)
    F = make_functional("endpoint:linear")
    w = sample(brownian(), G, 1)
    rep = ito_residual(F, w, TAU, ladder(ms=(1,)), qv=Path(G, np.zeros(G.N + 1)))
    assert np.max(np.abs(rep.terms[0].residual.values)) < 1e-12


def test_endpoint_square_residual_is_discrete_ito_identity_at_dt():
    # W_t^2 = 2 sum W dW + sum (dW)^2 exactly on the grid, so the residual at
    # eps = dt equals realized-qv minus t
    F = make_functional("endpoint:square")
    w = sample(brownian(), G, 2)
    rep = ito_residual(F, w, TAU, ladder(ms=(1,)), qv=QV_T)
    res = rep.terms[0].residual.values
    oracle = np.concatenate([[0.0], np.cumsum(np.diff(w.values) ** 2)]) - G.times
    assert np.allclose(res, oracle, rtol=1e-9, atol=1e-12)


def test_endpoint_square_on_brownian_converges():
    report, rep0 = ito_experiment(
        make_functional("endpoint:square"), brownian(), G.N, G.T, TAU,
        (8, 4, 2, 1), replicas=15, tolerance=0.15, seed=0)
    assert report.passed, report.rows
    assert rep0.terms[0].quad_term.values[-1] == pytest.approx(G.T, rel=1e-12)


def test_integral_squared_quadratic_term_vanishes_and_residual_converges():
    report, rep0 = ito_experiment(
        make_functional("integral-squared"), brownian(), G.N, G.T, TAU,
        (8, 4, 2, 1), replicas=10, tolerance=0.05, seed=10)
    assert report.passed, report.rows
    for terms in rep0.terms:
        assert np.array_equal(terms.quad_term.values, np.zeros(G.N + 1))


def test_energy_diag_quadratic_term_and_convergence():
    report, rep0 = ito_experiment(
        make_functional("energy"), brownian(), G.N, G.T, TAU,
        (8, 4, 2, 1), replicas=10, tolerance=0.05, seed=20)
    assert report.passed, report.rows
    # quadratic term = 1/2 * diag quadrature of g=2 against [X]=t:
    # t <= tau: t^2/2, beyond: saturates
    quad = rep0.terms[0].quad_term.values
    keep = G.times <= TAU
    assert np.allclose(quad[keep], G.times[keep] ** 2 / 2, atol=1e-10)


def test_estimated_qv_mode_runs_and_converges():
    w = sample(brownian(), G, 3)
    rep = ito_residual(make_functional("endpoint:square"), w, TAU,
                       ladder(ms=(4, 2, 1)), use_estimated_qv=True, tolerance=0.25)
    assert rep.report.verdict in ("pass", "fail")
    assert rep.terms[0].residual.values[0] == 0.0


def test_unsupported_chi_tag_raises():
    bogus = Functional(
        name="bogus",
        eval_fn=lambda eta: 0.0,
        d1_fn=lambda eta: None,
        d2_fn=lambda eta: None,
        chi_tag="weird",
    )
    w = sample(brownian(), G, 0)
    with pytest.raises(UnsupportedCombinationError):
        ito_residual(bogus, w, TAU, ladder(), qv=QV_T)


def test_missing_qv_raises():
    w = sample(brownian(), G, 0)
    with pytest.raises(ValueError):
        ito_residual(make_functional("endpoint:square"), w, TAU, ladder())


def test_time_dependent_term_integrates():
    # F(t, eta) = eta(0) + t: the dt term must absorb the drift exactly
    base = make_functional("endpoint:linear")
    F = Functional(
        name="endpoint:linear+t",
        eval_fn=base.eval_fn,  # spatial part only enters lhs via windows
        d1_fn=base.d1_fn,
        d2_fn=base.d2_fn,
        chi_tag=base.chi_tag,
        dt_term=lambda t, eta: 1.0,
    )
    x = Path(G, G.times)
    rep = ito_residual(F, x, TAU, ladder(ms=(1,)), qv=Path(G, np.zeros(G.N + 1)))
    # lhs lacks the +t piece, so the residual must now be exactly -t
    assert np.allclose(rep.terms[0].residual.values, -G.times, atol=1e-12)
