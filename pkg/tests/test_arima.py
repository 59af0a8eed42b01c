"""Model mechanics: differencing, simulation, residual recursion, admissibility."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polyarima import ModelSpec, difference, integrate, is_admissible, project_to_admissible, simulate
from polyarima.arima import ar_min_root_modulus, residuals
from polyarima.exceptions import AdmissibilityError, LengthError, ParameterError


def naive_simulate(model: ModelSpec, eps: np.ndarray) -> np.ndarray:
    """Reference loop implementation of the ARMA recursion (zero presample)."""
    p, q = model.p, model.q
    c = model.intercept or 0.0
    z = np.zeros(eps.size)
    for t in range(eps.size):
        acc = c + eps[t]
        for i, phi in enumerate(model.phi, start=1):
            if t - i >= 0:
                acc += phi * z[t - i]
        for j, th in enumerate(model.theta, start=1):
            if t - j >= 0:
                acc += th * eps[t - j]
        z[t] = acc
    return z


def naive_residuals(z: np.ndarray, model: ModelSpec) -> np.ndarray:
    """Reference loop for the inverse recursion with zero presample residuals."""
    m = max(model.p, model.q)
    c = model.intercept or 0.0
    eps_full = np.zeros(z.size)
    out = []
    for t in range(m, z.size):
        e = z[t] - c
        for i, phi in enumerate(model.phi, start=1):
            e -= phi * z[t - i]
        for j, th in enumerate(model.theta, start=1):
            e -= th * eps_full[t - j]
        eps_full[t] = e
        out.append(e)
    return np.asarray(out)


# ---------------------------------------------------------------------------
# differencing

def test_difference_lengths_and_values():
    y = np.array([1.0, 4.0, 9.0, 16.0])
    np.testing.assert_allclose(difference(y, 1), [3.0, 5.0, 7.0])
    np.testing.assert_allclose(difference(y, 2), [2.0, 2.0])
    np.testing.assert_array_equal(difference(y, 0), y)


def test_difference_errors():
    with pytest.raises(ParameterError):
        difference([1.0, 2.0], -1)
    with pytest.raises(LengthError):
        difference([1.0, 2.0], 2)


@settings(max_examples=50, deadline=None)
@given(
    z=st.lists(st.floats(min_value=-50, max_value=50), min_size=3, max_size=40),
    d=st.integers(min_value=0, max_value=2),
)
def test_difference_inverts_integrate(z, d):
    # cumulative sums start from zero initial levels, so differencing the
    # integral recovers everything past the first d entries
    z = np.asarray(z)
    np.testing.assert_allclose(difference(integrate(z, d), d), z[d:], atol=1e-8)


# ---------------------------------------------------------------------------
# simulation and residual recursion

def test_simulate_matches_naive_loop():
    rng = np.random.default_rng(3)
    eps = rng.standard_normal(60)
    model = ModelSpec(phi=(0.5, -0.2), theta=(0.4,), d=0, intercept=0.7)
    got = simulate(model, eps, burn_in=10)
    want = naive_simulate(model, eps)[10:]
    np.testing.assert_allclose(got, want, atol=1e-10)


def test_simulate_integrates_and_truncates():
    rng = np.random.default_rng(4)
    eps = rng.standard_normal(50)
    model = ModelSpec(phi=(0.3,), theta=(), d=2, intercept=None)
    y = simulate(model, eps, burn_in=20)
    assert y.shape == (30,)
    base = simulate(ModelSpec(phi=(0.3,), theta=(), d=0), eps, burn_in=20)
    np.testing.assert_allclose(difference(y, 2), base[2:], atol=1e-9)


def test_simulate_rejects_inadmissible_and_short_input():
    with pytest.raises(AdmissibilityError):
        simulate(ModelSpec(phi=(1.2,), theta=()), np.zeros(300))
    with pytest.raises(LengthError):
        simulate(ModelSpec(phi=(0.5,), theta=()), np.zeros(10), burn_in=10)


def test_residuals_match_naive_loop():
    rng = np.random.default_rng(5)
    z = rng.standard_normal(40)
    model = ModelSpec(phi=(0.6,), theta=(-0.3, 0.1), d=0, intercept=0.2)
    got = residuals(z, model)
    want = naive_residuals(z, model)
    assert got.shape == (40 - 2,)
    np.testing.assert_allclose(got, want, atol=1e-10)


def test_residuals_recover_innovations_after_simulate():
    """With zero presample on both sides the recursions are exact inverses."""
    rng = np.random.default_rng(6)
    eps = rng.standard_normal(400)
    # the inverse recursion assumes a zero presample innovation; granting it
    # one makes the identity exact instead of exact-up-to-theta^t decay
    eps[0] = 0.0
    model = ModelSpec(phi=(0.7,), theta=(0.35,), d=0, intercept=None)
    z = simulate(model, eps, burn_in=0)
    e = residuals(z, model)
    np.testing.assert_allclose(e, eps[1:], atol=1e-9)

    eps_ar = rng.standard_normal(300)
    model_ar = ModelSpec(phi=(0.4, 0.2), theta=(), d=0)
    z_ar = simulate(model_ar, eps_ar, burn_in=0)
    np.testing.assert_allclose(residuals(z_ar, model_ar), eps_ar[2:], atol=1e-9)


def test_residuals_pure_ar_closed_form():
    z = np.array([1.0, 2.0, 3.0, 5.0])
    model = ModelSpec(phi=(0.5,), theta=())
    np.testing.assert_allclose(residuals(z, model), [1.5, 2.0, 3.5])


def test_residuals_too_short():
    with pytest.raises(LengthError):
        residuals([1.0, 2.0], ModelSpec(phi=(0.1, 0.1), theta=()))


# ---------------------------------------------------------------------------
# admissibility and projection

def test_is_admissible_boundaries():
    assert is_admissible(ModelSpec(phi=(0.99,), theta=()))
    assert not is_admissible(ModelSpec(phi=(1.0,), theta=()))
    assert not is_admissible(ModelSpec(phi=(), theta=(-1.05,)))
    assert is_admissible(ModelSpec(phi=(), theta=()))  # white noise


def test_projection_scalar_oracle():
    # AR(1) at 1.2: smallest root 1/1.2 maps to (1 + m)/rho, so the
    # coefficient becomes 1/(1.2 * 1.01) for a 1% margin
    model = ModelSpec(phi=(1.2,), theta=())
    proj = project_to_admissible(model, margin=0.01)
    assert proj.phi[0] == pytest.approx(1.0 / (1.2 * 1.01), abs=1e-12)
    assert ar_min_root_modulus(proj) == pytest.approx(1.2 * 1.01, rel=1e-9)


def test_projection_leaves_admissible_untouched():
    model = ModelSpec(phi=(0.5,), theta=(0.2,))
    assert project_to_admissible(model) is model


def test_projection_handles_each_polynomial_independently():
    model = ModelSpec(phi=(0.5,), theta=(1.5,))
    proj = project_to_admissible(model, margin=0.01)
    assert proj.phi == model.phi
    assert abs(proj.theta[0]) < 1.0
    assert is_admissible(proj)


def test_projection_rejects_bad_margin():
    with pytest.raises(ParameterError):
        project_to_admissible(ModelSpec(phi=(1.5,), theta=()), margin=0.0)


@settings(max_examples=150, deadline=None)
@given(
    phi=st.lists(st.floats(min_value=-2.0, max_value=2.0), min_size=0, max_size=3),
    theta=st.lists(st.floats(min_value=-2.0, max_value=2.0), min_size=0, max_size=3),
)
def test_projection_always_admissible(phi, theta):
    proj = project_to_admissible(ModelSpec(phi=tuple(phi), theta=tuple(theta)), margin=1e-3)
    assert is_admissible(proj)


def test_from_orders_validates_counts():
    with pytest.raises(ParameterError):
        ModelSpec.from_orders(2, 0, 0, phi=(0.5,))
    spec = ModelSpec.from_orders(1, 1, 1, phi=(0.5,), theta=(0.1,), intercept=2.0)
    assert spec.label() == "ARIMA(1,1,1)"
    assert spec.k == 2
