import numpy as np
import pytest

from delaywave.errors import ConditionError, GridMismatchError
from delaywave.solver import laplacian
from delaywave.spaces import (
    ExponentField,
    GridFunction,
    check_sandwich,
    discrete_poincare_constant,
    gradient_energy,
    l2_norm,
    log_holder_modulus,
    luxemburg_norm,
    make_grid,
    modular,
    validate_exponent_pair,
)


def test_grid_weights_sum_to_measure():
    g1 = make_grid(1.0, 17)
    assert abs(g1.weights.sum() - 1.0) <= 1e-12
    g2 = make_grid((2.0, 3.0), (9, 11))
    assert abs(g2.weights.sum() - 6.0) <= 6e-12
    assert g2.boundary.sum() == 2 * 9 + 2 * 11 - 4


def test_grid_rejects_tiny_axes():
    with pytest.raises(ValueError):
        make_grid(1.0, 2)
    with pytest.raises(ValueError):
        make_grid(-1.0, 11)


def test_grid_function_shape_checked():
    g = make_grid(1.0, 11)
    with pytest.raises(GridMismatchError):
        GridFunction(g, np.zeros(7))


def test_exponent_field_bounds_cached():
    g = make_grid(1.0, 11)
    f = ExponentField.sample(g, lambda x: 2.0 + x)
    assert f.low == 2.0 and f.high == 3.0
    with pytest.raises(ConditionError):
        ExponentField.constant(g, 0.5)


# --- exponent pair validation -------------------------------------------------

def test_validate_constant_pair_passes():
    g = make_grid(1.0, 51)
    rep = validate_exponent_pair(ExponentField.constant(g, 2.0),
                                 ExponentField.constant(g, 3.0), 1)
    assert rep.chain_ok and rep.log_ok and rep.ok
    assert rep.log_modulus_damping == 0.0
    assert rep.log_modulus_source == 0.0


def test_validate_rejects_equal_bounds():
    # the chain requires m_high strictly below p_low
    g = make_grid(1.0, 51)
    rep = validate_exponent_pair(ExponentField.constant(g, 2.0),
                                 ExponentField.constant(g, 2.0), 1)
    assert not rep.chain_ok and not rep.ok


def test_validate_linear_fields_log_modulus():
    # q(x) linear with slope 0.4: pair modulus max_d 0.4 d |log d| over d < 1/2,
    # attained near d = 1/e (brute-force oracle over all node pairs)
    g = make_grid(1.0, 201)
    m = ExponentField.sample(g, lambda x: 2.0 + 0.4 * x)
    p = ExponentField.sample(g, lambda x: 3.5 + 0.4 * x)
    rep = validate_exponent_pair(m, p, 1, log_bound=1.0, log_delta=0.5)
    assert rep.ok
    assert rep.log_modulus_damping < 1.0
    assert rep.log_modulus_damping == pytest.approx(0.4 / np.e, rel=1e-3)


def test_validate_mismatched_grids_error():
    g1 = make_grid(1.0, 11)
    g2 = make_grid(1.0, 13)
    with pytest.raises(GridMismatchError):
        validate_exponent_pair(ExponentField.constant(g1, 2.0),
                               ExponentField.constant(g2, 3.0), 1)


def test_log_holder_delta_range():
    g = make_grid(1.0, 11)
    with pytest.raises(ValueError):
        log_holder_modulus(ExponentField.constant(g, 2.0), delta=1.5)


# --- modular -------------------------------------------------------------------

def test_modular_zero_and_constant():
    g = make_grid(1.0, 31)
    p = ExponentField.constant(g, 3.3)
    assert modular(GridFunction.zeros(g), p) == 0.0
    assert modular(GridFunction(g, np.ones(g.shape)), p) == pytest.approx(1.0, abs=1e-14)


def test_modular_piecewise_closed_form():
    # continuum value 0.5*2^2 + 0.5*2^4 = 10; the interface node carries an
    # O(h) quadrature smear, and the weighted-sum oracle is exact
    g = make_grid(1.0, 201)
    h = g.spacing[0]
    pvals = np.where(g.coords[0] < 0.5, 2.0, 4.0)
    p = ExponentField(g, pvals)
    u = GridFunction(g, np.full(g.shape, 2.0))
    got = modular(u, p)
    oracle = float(np.sum(g.weights * np.abs(u.values) ** pvals))
    assert got == pytest.approx(oracle, rel=1e-14)
    assert got == pytest.approx(10.0, abs=16.0 * h)


def test_modular_monotone_in_amplitude():
    g = make_grid(1.0, 31)
    rng = np.random.default_rng(5)
    u = rng.standard_normal(g.shape)
    p = ExponentField(g, rng.uniform(1.5, 4.0, g.shape))
    last = 0.0
    for amp in np.linspace(0.0, 3.0, 13):
        cur = modular(GridFunction(g, amp * u), p)
        assert cur >= last - 1e-15
        last = cur


# --- Luxemburg norm -------------------------------------------------------------

def test_luxemburg_zero_function():
    g = make_grid(1.0, 31)
    assert luxemburg_norm(GridFunction.zeros(g), ExponentField.constant(g, 2.5)) == 0.0


def test_luxemburg_requires_positive_tol():
    g = make_grid(1.0, 31)
    u = GridFunction(g, np.ones(g.shape))
    with pytest.raises(ValueError):
        luxemburg_norm(u, ExponentField.constant(g, 2.0), tol=0.0)


def test_luxemburg_iteration_cap_carries_bracket():
    from delaywave.errors import NumericalError

    g = make_grid(1.0, 31)
    p = ExponentField(g, np.where(g.coords[0] < 0.5, 2.0, 4.0))
    u = GridFunction(g, 3.0 * np.ones(g.shape))
    with pytest.raises(NumericalError) as err:
        luxemburg_norm(u, p, tol=1e-15, max_iter=1)
    assert "bracket" in err.value.context


def test_luxemburg_constant_exponent_is_classical():
    g = make_grid(1.0, 101)
    rng = np.random.default_rng(11)
    for _ in range(20):
        q = rng.uniform(1.2, 6.0)
        vals = rng.standard_normal(g.shape) * 10.0 ** rng.uniform(-2, 2)
        u = GridFunction(g, vals)
        classical = float(np.sum(g.weights * np.abs(vals) ** q)) ** (1.0 / q)
        got = luxemburg_norm(u, ExponentField.constant(g, q))
        assert got == pytest.approx(classical, rel=1e-10)


def test_luxemburg_piecewise_closed_form():
    # p = 2 below the midpoint and 4 above, u = 2: with r = (2/lam)^2 the
    # norm equation reads w2 r + w4 r^2 = 1, and w2 + w4 = 1 forces r = 1
    g = make_grid(1.0, 201)
    p = ExponentField(g, np.where(g.coords[0] < 0.5, 2.0, 4.0))
    u = GridFunction(g, np.full(g.shape, 2.0))
    assert luxemburg_norm(u, p) == pytest.approx(2.0, abs=1e-8)


def test_luxemburg_homogeneous():
    g = make_grid(1.0, 61)
    rng = np.random.default_rng(3)
    for _ in range(40):
        vals = rng.standard_normal(g.shape)
        p = ExponentField(g, rng.uniform(1.2, 5.0, g.shape))
        u = GridFunction(g, vals)
        a = 10.0 ** rng.uniform(-3, 3)
        lhs = luxemburg_norm(GridFunction(g, a * vals), p)
        rhs = a * luxemburg_norm(u, p)
        assert lhs == pytest.approx(rhs, rel=1e-8)


def test_unit_ball_property_both_sides():
    g = make_grid(1.0, 61)
    rng = np.random.default_rng(9)
    for _ in range(60):
        vals = rng.standard_normal(g.shape) * 10.0 ** rng.uniform(-1.5, 1.5)
        p = ExponentField(g, rng.uniform(1.3, 4.5, g.shape))
        u = GridFunction(g, vals)
        lam = luxemburg_norm(u, p)
        rho = modular(u, p)
        assert (lam <= 1.0) == (rho <= 1.0 + 1e-9)


def test_sandwich_constant_and_random():
    g = make_grid(1.0, 61)
    u = GridFunction(g, np.ones(g.shape))
    p = ExponentField.constant(g, 3.0)
    assert check_sandwich(u, p)
    rng = np.random.default_rng(13)
    for _ in range(200):
        vals = rng.standard_normal(g.shape) * 10.0 ** rng.uniform(-2, 2)
        split = rng.uniform(0.2, 0.8)
        lo, hi = np.sort(rng.uniform(1.2, 5.0, size=2))
        pp = ExponentField(g, np.where(g.coords[0] < split, lo, hi))
        assert check_sandwich(GridFunction(g, vals), pp)


# --- Poincare constant -----------------------------------------------------------

def test_poincare_matches_closed_form_eigenvalue():
    for n in (18, 34, 66, 130):
        g = make_grid(1.0, n)
        h = g.spacing[0]
        exact = 1.0 / np.sqrt((2.0 / h**2) * (1.0 - np.cos(np.pi * h)))
        assert discrete_poincare_constant(g) == pytest.approx(exact, rel=1e-10)


def test_poincare_dilation_scaling():
    g = make_grid(2.0, 201)
    # continuum value 2/pi, approached from above under refinement
    assert discrete_poincare_constant(g) == pytest.approx(2.0 / np.pi, rel=1e-3)


def test_poincare_refinement_monotone():
    # the 3-point stencil underestimates the eigenvalue, so the discrete
    # constant decreases monotonically toward the continuum 1/pi
    values = [discrete_poincare_constant(make_grid(1.0, n + 2))
              for n in (16, 32, 64, 128)]
    assert all(a > b for a, b in zip(values, values[1:]))
    assert values[-1] > 1.0 / np.pi


def test_poincare_2d_closed_form():
    g = make_grid((1.0, 1.0), (20, 20))
    h = g.spacing[0]
    lam1 = 2.0 * (2.0 / h**2) * (1.0 - np.cos(np.pi * h))
    assert discrete_poincare_constant(g) == pytest.approx(1.0 / np.sqrt(lam1), rel=1e-9)


def test_poincare_sharp_no_slack():
    g = make_grid(1.0, 40)
    cp = discrete_poincare_constant(g)
    rng = np.random.default_rng(17)
    for _ in range(500):
        vals = rng.standard_normal(g.shape)
        vals[g.boundary] = 0.0
        w = GridFunction(g, vals)
        assert l2_norm(w) <= cp * np.sqrt(gradient_energy(w)) * (1.0 + 1e-12)


def test_gradient_energy_matches_laplacian_pairing():
    # <w, -lap w> == gradient_energy(w) exactly for Dirichlet data; this is
    # the identity that makes the discrete energy balance exact
    rng = np.random.default_rng(23)
    for grid in (make_grid(1.0, 41), make_grid((1.0, 1.5), (17, 23))):
        for _ in range(20):
            vals = rng.standard_normal(grid.shape)
            vals[grid.boundary] = 0.0
            w = GridFunction(grid, vals)
            pairing = -float(np.sum(grid.weights * vals * laplacian(w).values))
            assert pairing == pytest.approx(gradient_energy(w), rel=1e-12)
