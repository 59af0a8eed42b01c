"""Sandwich covariance and theoretical efficiency ratios."""
import warnings

import numpy as np
import pytest

import polyarima as pa
from polyarima.asymptotics import re_matrix, re_theoretical, sandwich
from polyarima.baseline import ols_ar
from polyarima.exceptions import DomainError
from polyarima.innovations import InnovationSpec, sample
from polyarima.moments import MomentSet
from polyarima.pmm2 import FitConfig, Pmm2Design, SolverConfig, newton_solve, second_stage


def fitted_ar1(law, n, seed, phi=0.5, **cfg_kwargs):
    eps = sample(InnovationSpec(*law), n + 200, seed)
    z = pa.simulate(pa.ModelSpec(phi=(phi,), theta=()), eps, burn_in=200)
    base = ols_ar(z, p=1)
    result = second_stage(z, base, FitConfig(**cfg_kwargs))
    return result, z


def test_sandwich_matches_classical_ar1_formula():
    # symmetric innovations with the gate disabled: the second-order weights
    # reduce to least squares, whose se is sqrt((1 - phi^2) / n)
    result, z = fitted_ar1(("gaussian", {}), 4000, 41, fallback_gamma3=0.0)
    assert not result.fallback_used
    cov = sandwich(result, result.design)
    classical = np.sqrt((1.0 - result.theta_hat[0] ** 2) / z.size)
    assert cov.se[0] == pytest.approx(classical, rel=0.10)


def test_sandwich_shrinks_at_root_n_rate():
    se = {}
    for n in (2000, 8000):
        result, _ = fitted_ar1(("gamma", {"shape": 2.0}), n, 42)
        cov = sandwich(result, result.design)
        se[n] = cov.se[0]
    # quadrupling n halves the standard error
    assert se[2000] / se[8000] == pytest.approx(2.0, rel=0.25)


def test_sandwich_reports_shape_and_spd():
    result, _ = fitted_ar1(("gamma", {"shape": 2.0}), 1500, 43)
    cov = sandwich(result, result.design)
    assert cov.A.shape == (1, 1)
    assert cov.B.shape == (1, 1)
    assert cov.sigma[0, 0] > 0
    assert not cov.ridge_used
    assert cov.n_eff == result.design.n_eff


def test_sandwich_ridge_on_singular_design():
    X = np.column_stack([np.ones(40), np.ones(40)])
    z = np.linspace(-1, 1, 40)
    design = Pmm2Design(X=X, z=z, p=2, q=0, intercept=False, names=("phi1", "phi2"))
    mom = MomentSet.from_central(1.0, 0.6, 4.0)
    result = newton_solve(np.zeros(2), design, mom, SolverConfig(project=False, max_iter=3))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # convergence state is irrelevant here
        cov = sandwich(result, design)
    assert cov.ridge_used
    assert np.all(np.isfinite(cov.se))


def test_sandwich_requires_moments():
    result, _ = fitted_ar1(("gamma", {"shape": 2.0}), 800, 44)
    result.moments = None
    with pytest.raises(DomainError):
        sandwich(result, result.design)


def test_sandwich_warns_on_nonconverged_fit():
    result, _ = fitted_ar1(("gamma", {"shape": 2.0}), 800, 45)
    result.converged = False
    with pytest.warns(UserWarning, match="non-converged"):
        sandwich(result, result.design)


# ---------------------------------------------------------------------------
# efficiency ratios

def test_re_theoretical_reference_points():
    assert re_theoretical(1.41, 3.0) == pytest.approx(5.0 / (5.0 - 1.41**2), abs=1e-12)
    assert 1.64 <= re_theoretical(1.41, 3.0) <= 1.67
    assert re_theoretical(-0.76, 5.89) == pytest.approx(1.079, abs=0.002)
    for g4 in (0.0, 1.5, 7.0):
        assert re_theoretical(0.0, g4) == 1.0


def test_re_theoretical_monotone_in_skewness():
    values = [re_theoretical(g3, 3.0) for g3 in (0.0, 0.5, 1.0, 1.5, 2.0)]
    assert values == sorted(values)
    assert values[0] == 1.0


def test_re_theoretical_domain_errors():
    with pytest.raises(DomainError):
        re_theoretical(3.0, 3.0)            # gamma3^2 > 2 + gamma4
    with pytest.raises(DomainError):
        re_theoretical(0.0, -2.5)           # impossible kurtosis
    with pytest.raises(DomainError):
        re_theoretical(1.0, 3.0, variant="other")


def test_re_theoretical_alternate_variant():
    # same shape with 4 + 2 gamma4 in the base: (4 + 6) / (10 - 1.41^2)
    val = re_theoretical(1.41, 3.0, variant="alternate")
    assert val == pytest.approx(10.0 / (10.0 - 1.41**2), abs=1e-12)
    assert val < re_theoretical(1.41, 3.0)


def test_re_matrix_hand_case():
    out = re_matrix(np.diag([1.0, 4.0]), np.diag([2.0, 2.0]))
    assert out["re_det"] == pytest.approx(1.0, abs=1e-12)     # det 4 vs det 4
    assert out["re_trace"] == pytest.approx(5.0 / 4.0, abs=1e-12)


def test_re_matrix_validation():
    with pytest.raises(DomainError):
        re_matrix(np.array([[1.0, 2.0], [0.0, 1.0]]), np.eye(2))
    with pytest.raises(DomainError):
        re_matrix(np.diag([1.0, -1.0]), np.eye(2))
    with pytest.raises(DomainError):
        re_matrix(np.eye(2), np.eye(3))
