import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cvrlab import (
    EpsilonLadder,
    GridMismatchError,
    Path,
    brownian,
    converge,
    covariation_eps,
    default_ladder,
    forward_integral_eps,
    improper_value,
    make_grid,
    mutual_covariations,
    sample,
)

G = make_grid(1.0, 256)
T_NODES = Path(G, G.times, label="t")


def w_path(seed, grid=G):
    return sample(brownian(), grid, seed)


def ito_sum(Y: Path, X: Path) -> Path:
    """Non-anticipating Riemann-Ito sum on the grid (independent oracle)."""
    a = Y.values[:-1] * np.diff(X.values)
    return Path(Y.grid, np.concatenate([[0.0], np.cumsum(a)]))


# ------------------------------------------------------------ forward integral


def test_forward_integral_of_one_against_linear_is_identity():
    eps = 8 * G.dt
    out = forward_integral_eps(Path(G, np.ones(G.N + 1)), T_NODES, eps)
    keep = G.times <= G.T - eps + 1e-12
    assert np.allclose(out.values[keep], G.times[keep], rtol=1e-12, atol=1e-14)


def test_forward_integral_zero_integrand():
    out = forward_integral_eps(Path(G, np.zeros(G.N + 1)), w_path(0), 4 * G.dt)
    assert np.array_equal(out.values, np.zeros(G.N + 1))


def test_forward_integral_at_dt_equals_ito_sum():
    # at eps = dt the left sums coincide with the discrete Ito sum exactly
    w = w_path(1)
    out = forward_integral_eps(w, w, G.dt)
    assert np.allclose(out.values, ito_sum(w, w).values, rtol=1e-12, atol=1e-14)


def test_forward_integral_brownian_converges_to_ito_identity():
    # target (W_t^2 - t)/2, the Ito value of int W dW
    ladder = EpsilonLadder(tuple(m * G.dt for m in (8, 4, 2, 1)), replicas=20)
    report = converge(
        estimate=lambda s, eps: forward_integral_eps(w_path(s), w_path(s), eps),
        target=lambda s: Path(G, 0.5 * (w_path(s).values ** 2 - G.times)),
        ladder=ladder,
        tolerance=0.05,
        base_seed=100,
    )
    assert report.passed, report.rows


def test_forward_integral_grid_mismatch():
    other = sample(brownian(), make_grid(1.0, 128), 0)
    with pytest.raises(GridMismatchError):
        forward_integral_eps(w_path(0), other, G.dt)


def test_improper_value_linear_case():
    eps = 16 * G.dt
    out = forward_integral_eps(Path(G, np.ones(G.N + 1)), T_NODES, eps)
    assert improper_value(out, eps) == pytest.approx(G.T, rel=1e-10)


# ---------------------------------------------------------------- covariation


def test_covariation_linear_path_vanishes_like_eps():
    for m in (16, 8, 4):
        eps = m * G.dt
        est = covariation_eps(T_NODES, T_NODES, eps)
        keep = G.times <= G.T - eps + 1e-12
        assert np.allclose(est.values[keep], eps * G.times[keep], rtol=1e-10)


def test_covariation_symmetry_exact():
    x, y = w_path(2), w_path(3)
    a = covariation_eps(x, y, 4 * G.dt)
    b = covariation_eps(y, x, 4 * G.dt)
    assert np.array_equal(a.values, b.values)


def test_covariation_self_is_nondecreasing():
    est = covariation_eps(w_path(4), w_path(4), 8 * G.dt)
    assert np.all(np.diff(est.values) >= 0.0)


@settings(max_examples=20, deadline=None)
@given(a=st.floats(-5, 5), b=st.floats(-5, 5),
       seeds=st.tuples(st.integers(0, 1000), st.integers(0, 1000), st.integers(0, 1000)))
def test_covariation_bilinear(a, b, seeds):
    sx, sy, sz = seeds
    g = make_grid(1.0, 64)
    x, y, z = (sample(brownian(), g, s) for s in (sx, sy + 2000, sz + 4000))
    eps = 4 * g.dt
    lhs = covariation_eps(Path(g, a * x.values + b * y.values), z, eps)
    rhs = a * covariation_eps(x, z, eps).values + b * covariation_eps(y, z, eps).values
    scale = np.max(np.abs(rhs)) + 1e-12
    assert np.max(np.abs(lhs.values - rhs)) <= 1e-12 * max(scale, 1.0)


def test_brownian_qv_small_scale():
    # sup fluctuation at eps = dt scales like sqrt(2 dt T) ~ 0.09 at N = 256
    ladder = EpsilonLadder(tuple(m * G.dt for m in (8, 4, 2, 1)), replicas=20)
    report = converge(
        estimate=lambda s, eps: covariation_eps(w_path(s), w_path(s), eps),
        target=lambda s: T_NODES,
        ladder=ladder,
        tolerance=0.15,
        base_seed=0,
    )
    assert report.passed, report.rows


def test_shifted_sum_bracket_small_scale():
    # X = W + W_{.-tau/2} has bracket t + (t - tau/2)^+ ; the cross term dies
    tau_half = 0.25
    k = int(round(tau_half / G.dt))
    target = Path(G, G.times + np.maximum(G.times - tau_half, 0.0))

    def x_of(s):
        w = w_path(s)
        shifted = np.concatenate([np.full(k, w.values[0]), w.values[:-k]])
        return Path(G, w.values + shifted)

    # the summed increments double the estimator variance: ~2x the brownian sup
    ladder = EpsilonLadder(tuple(m * G.dt for m in (8, 4, 2, 1)), replicas=20)
    report = converge(
        estimate=lambda s, eps: covariation_eps(x_of(s), x_of(s), eps),
        target=lambda s: target,
        ladder=ladder,
        tolerance=0.3,
        base_seed=300,
    )
    assert report.passed, report.rows


# --------------------------------------------------------- mutual covariations


def test_mutual_covariations_matrix():
    x, y = w_path(5), w_path(6)
    mat = mutual_covariations([x, y], 2 * G.dt)
    assert mat[0][1] is mat[1][0]
    assert np.array_equal(mat[0][0].values, covariation_eps(x, x, 2 * G.dt).values)
    # independent Brownian motions: cross bracket near zero at fine eps
    cross = covariation_eps(x, y, G.dt)
    assert abs(cross.terminal) < 5 * np.sqrt(2 * G.dt * G.T)


def test_mutual_covariations_single():
    mat = mutual_covariations([w_path(7)], G.dt)
    assert len(mat) == 1 and len(mat[0]) == 1


# -------------------------------------------------------------------- harness


def test_ladder_validation():
    with pytest.raises(ValueError):
        EpsilonLadder((0.1, 0.2))  # not decreasing
    with pytest.raises(ValueError):
        EpsilonLadder((0.1,), replicas=0)
    lad = EpsilonLadder((0.25, 0.125))
    lad.validate(G)
    with pytest.raises(ValueError):
        lad.validate(G, tau=0.2)  # eps >= tau
    with pytest.raises(ValueError):
        EpsilonLadder((0.3,)).validate(G)  # not a node multiple
    assert default_ladder(G).steps(G) == (64, 32, 16, 8)


def test_converge_self_comparison_passes_with_zero_medians():
    ladder = EpsilonLadder((4 * G.dt, 2 * G.dt), replicas=5)
    report = converge(
        estimate=lambda s, eps: w_path(s),
        target=lambda s: w_path(s),
        ladder=ladder,
        tolerance=1e-6,
    )
    assert report.passed
    assert np.array_equal(report.medians, [0.0, 0.0])


def test_converge_wrong_target_fails():
    ladder = EpsilonLadder(tuple(m * G.dt for m in (8, 4, 2, 1)), replicas=10)
    report = converge(
        estimate=lambda s, eps: covariation_eps(w_path(s), w_path(s), eps),
        target=lambda s: Path(G, 2.0 * G.times),  # deliberately wrong: 2t
        ladder=ladder,
        tolerance=0.05,
    )
    assert not report.passed
    assert report.medians[-1] > 0.5  # roughly T


def test_converge_monotonicity_slack_rule():
    g = make_grid(1.0, 16)
    zero = Path(g, np.zeros(17))
    ladder = EpsilonLadder((4 * g.dt, 2 * g.dt, g.dt), replicas=3)

    def est_from(levels):
        return lambda s, eps: Path(g, np.full(17, levels[eps]))

    decaying = {4 * g.dt: 0.04, 2 * g.dt: 0.02, g.dt: 0.01}
    r = converge(est_from(decaying), lambda s: zero, ladder, tolerance=0.05)
    assert r.passed
    bump_within_slack = {4 * g.dt: 0.02, 2 * g.dt: 0.023, g.dt: 0.01}
    r = converge(est_from(bump_within_slack), lambda s: zero, ladder, tolerance=0.05)
    assert r.passed  # 15% bump sits inside the 20% slack
    bump_too_big = {4 * g.dt: 0.02, 2 * g.dt: 0.03, g.dt: 0.01}
    r = converge(est_from(bump_too_big), lambda s: zero, ladder, tolerance=0.05)
    assert not r.passed


def test_converge_terminal_statistic_and_workers():
    ladder = EpsilonLadder((4 * G.dt, G.dt), replicas=6)
    kw = dict(
        estimate=lambda s, eps: covariation_eps(w_path(s), w_path(s), eps),
        target=lambda s: T_NODES,
        ladder=ladder,
        tolerance=0.2,
        statistic="terminal",
    )
    seq = converge(**kw, workers=1)
    par = converge(**kw, workers=4)
    assert seq == par  # deterministic assembly regardless of scheduling
