import numpy as np
import pytest

from cvrlab import (
    Atomic00,
    DiagKernel,
    L2Kernel,
    WindowSegment,
    endpoint_functional,
    energy_functional,
    fd_check,
    integral_squared_functional,
    make_functional,
    make_grid,
    random_segment,
)
G = make_grid(1.0, 128)
TAU = 0.25
NLAG = int(TAU / G.dt) + 1


def seg(values):
    return WindowSegment(TAU, G.dt, np.asarray(values, dtype=float))


def ending_at(x0):
    v = np.zeros(NLAG)
    v[-1] = x0
    return seg(v)


SQUARE = endpoint_functional(lambda x: x ** 2, lambda x: 2 * x, lambda x: 2.0,
                             name="endpoint:square")


def test_endpoint_square_values_and_derivatives():
    eta = ending_at(3.0)
    assert SQUARE(eta) == 9.0
    mu = SQUARE.d1(eta)
    assert mu.atoms == ((0.0, 6.0),)
    phi = SQUARE.d2(eta)
    assert isinstance(phi, Atomic00) and phi.coefficient == 2.0


def test_endpoint_constant_and_linear():
    const = endpoint_functional(lambda x: 5.0, lambda x: 0.0, lambda x: 0.0)
    eta = ending_at(1.23)
    assert const(eta) == 5.0
    assert const.d1(eta).atoms == ((0.0, 0.0),)
    assert const.d2(eta).coefficient == 0.0
    linear = endpoint_functional(lambda x: x, lambda x: 1.0, lambda x: 0.0)
    assert linear.d2(eta).coefficient == 0.0


def test_endpoint_scaling_exact():
    eta = ending_at(1.7)
    for c in (-2.0, 0.5, 3.0):
        assert SQUARE(c * eta) == (c * 1.7) ** 2


def test_integral_squared_values():
    F = integral_squared_functional()
    g1 = make_grid(2.0, 64)
    n = int(1.0 / g1.dt) + 1
    ones = WindowSegment(1.0, g1.dt, np.full(n, 1.0))
    assert F(ones) == pytest.approx(1.0, rel=1e-13)
    zeros = WindowSegment(1.0, g1.dt, np.zeros(n))
    assert F(zeros) == 0.0
    assert np.all(F.d1(zeros).density == 0.0)
    ramp = WindowSegment(1.0, g1.dt, np.linspace(-1.0, 0.0, n))
    assert F(ramp) == pytest.approx(0.25, rel=1e-12)  # (-1/2)^2, trapezoid exact
    phi = F.d2(ramp)
    assert isinstance(phi, L2Kernel)
    assert np.all(phi.values == 2.0)


def test_energy_values():
    F = energy_functional()
    g1 = make_grid(2.0, 64)
    n = int(1.0 / g1.dt) + 1
    ones = WindowSegment(1.0, g1.dt, np.full(n, 1.0))
    assert F(ones) == pytest.approx(1.0, rel=1e-13)
    assert F(WindowSegment(1.0, g1.dt, np.zeros(n))) == 0.0
    ramp = WindowSegment(1.0, g1.dt, np.linspace(-1.0, 0.0, n))
    # trapezoid of u^2 on [-1,0]: 1/3 up to the h^2/6 quadrature correction
    u = np.linspace(-1.0, 0.0, n)
    oracle = np.trapezoid(u ** 2, u)
    assert F(ramp) == pytest.approx(oracle, rel=1e-13)
    assert oracle == pytest.approx(1.0 / 3.0, abs=g1.dt ** 2)
    phi = F.d2(ramp)
    assert isinstance(phi, DiagKernel)
    assert np.all(phi.values == 2.0)
    # d1 is the density 2 eta
    assert np.allclose(F.d1(ramp).density, 2.0 * ramp.values)


def test_registry():
    for name in ("endpoint:square", "endpoint:linear", "endpoint:cos",
                 "integral-squared", "energy"):
        F = make_functional(name)
        assert F.name == name
    with pytest.raises(ValueError):
        make_functional("endpoint:tan")
    with pytest.raises(ValueError):
        make_functional("nope")


def test_d2_variant_matches_declared_tag():
    eta = random_segment(TAU, G.dt, 0)
    for name in ("endpoint:square", "integral-squared", "energy"):
        F = make_functional(name)
        assert F.d2(eta).chi_tag == F.chi_tag


# -------------------------------------------------------- derivative checks


def test_fd_check_order_of_convergence():
    # central differences are O(h^2): before freezing the 1e-6 threshold at
    # h = 1e-4, verify the order on the cos endpoint functional
    F = make_functional("endpoint:cos")
    eta = random_segment(TAU, G.dt, 5, pinned=False)
    psi = [random_segment(TAU, G.dt, 6, pinned=False)]
    errs = [fd_check(F, eta, psi, h=h).first_order for h in (1e-2, 1e-3, 1e-4)]
    assert errs[1] < errs[0] * 0.05  # ~100x drop per decade of h
    assert errs[2] < 1e-6


def test_fd_check_example_square_tight():
    rep = fd_check(SQUARE, random_segment(TAU, G.dt, 7, pinned=False),
                   [random_segment(TAU, G.dt, 8, pinned=False)], h=1e-4)
    assert rep.first_order < 1e-6
    assert rep.second_order < 1e-6


def test_fd_check_integral_squared_at_zero_segment():
    F = integral_squared_functional()
    eta = seg(np.zeros(NLAG))
    rep = fd_check(F, eta, [random_segment(TAU, G.dt, 9)], h=1e-4)
    assert rep.first_order < 1e-12  # d1 = 0 matches differences to rounding


def test_fd_check_zero_direction_degenerates():
    rep = fd_check(SQUARE, random_segment(TAU, G.dt, 10), [seg(np.zeros(NLAG))])
    assert rep.first_order == 0.0 and rep.second_order == 0.0


def test_fd_check_rejects_bad_step():
    with pytest.raises(ValueError):
        fd_check(SQUARE, random_segment(TAU, G.dt, 0), [], h=0.0)


def test_all_examples_pass_fd_check_over_20_draws():
    for name in ("endpoint:square", "endpoint:cos", "integral-squared", "energy"):
        F = make_functional(name)
        for k in range(20):
            eta = random_segment(TAU, G.dt, 100 + k, pinned=False)
            psi = [random_segment(TAU, G.dt, 200 + k, pinned=False),
                   random_segment(TAU, G.dt, 300 + k, pinned=False)]
            rep = fd_check(F, eta, psi, h=1e-4)
            assert rep.passes(1e-5), (name, k, rep)
