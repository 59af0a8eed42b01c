"""Innovation laws: standardization, exact cumulants, deterministic sampling."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polyarima import InnovationSpec, sample, shape_cumulants, theoretical_cumulants
from polyarima.exceptions import ParameterError
from polyarima.innovations import KINDS, raw_mean_sd, standardize

ALL_SPECS = [
    InnovationSpec("gaussian", {}),
    InnovationSpec("gamma", {"shape": 2.0}),
    InnovationSpec("lognormal", {"sdlog": 0.4}),
    InnovationSpec("chisquare", {"df": 3.0}),
]


@pytest.mark.parametrize("spec", ALL_SPECS, ids=lambda s: s.kind)
def test_standardization_large_sample(spec):
    x = sample(spec, 1_000_000, seed=1)
    assert abs(x.mean()) < 0.005
    assert abs(x.var() - 1.0) < 0.01


def test_gaussian_cumulants_zero():
    assert shape_cumulants(InnovationSpec("gaussian", {})) == (0.0, 0.0)


def test_gamma_cumulants_closed_form():
    g3, g4 = shape_cumulants(InnovationSpec("gamma", {"shape": 2.0}))
    assert g3 == pytest.approx(math.sqrt(2.0), abs=1e-12)
    assert g4 == pytest.approx(3.0, abs=1e-12)
    # shape 4: both cumulants halve relative to shape 1 scaling rules
    g3b, g4b = shape_cumulants(InnovationSpec("gamma", {"shape": 4.0}))
    assert g3b == pytest.approx(1.0, abs=1e-12)
    assert g4b == pytest.approx(1.5, abs=1e-12)


def test_chisquare_cumulants_closed_form():
    g3, g4 = shape_cumulants(InnovationSpec("chisquare", {"df": 3.0}))
    assert g3 == pytest.approx(math.sqrt(8.0 / 3.0), abs=1e-12)
    assert g4 == pytest.approx(4.0, abs=1e-12)


def test_lognormal_cumulants_closed_form():
    # frozen from w = exp(0.16): g3 = (w+2) sqrt(w-1), g4 = w^4+2w^3+3w^2-6
    g3, g4 = shape_cumulants(InnovationSpec("lognormal", {"sdlog": 0.4}))
    assert g3 == pytest.approx(1.3219144054, abs=1e-9)
    assert g4 == pytest.approx(3.2600129767, abs=1e-9)


@pytest.mark.parametrize("spec", ALL_SPECS, ids=lambda s: s.kind)
def test_sample_cumulants_match_theory(spec):
    """Monte Carlo cross-check of the closed forms against raw draws."""
    x = sample(spec, 400_000, seed=7)
    g3_hat = float(np.mean(x**3))          # standardized, so mu3 = gamma3
    g4_hat = float(np.mean(x**4) - 3.0)
    g3, g4 = shape_cumulants(spec)
    assert g3_hat == pytest.approx(g3, abs=0.05)
    assert g4_hat == pytest.approx(g4, abs=0.35)


def test_theoretical_cumulants_momentset():
    ms = theoretical_cumulants(InnovationSpec("gamma", {"shape": 2.0}))
    assert ms.mu2 == 1.0
    assert ms.mu3 == pytest.approx(math.sqrt(2.0))
    assert ms.mu4 == pytest.approx(6.0)
    assert ms.delta > 0


def test_standardize_matches_raw_moments():
    spec = InnovationSpec("chisquare", {"df": 3.0})
    mean, sd = raw_mean_sd(spec)
    assert mean == 3.0
    assert sd == pytest.approx(math.sqrt(6.0))
    raw = np.array([0.0, 3.0, 9.0])
    np.testing.assert_allclose(standardize(raw, spec), (raw - 3.0) / sd)


def test_defaults_are_merged():
    spec = InnovationSpec("gamma", {})
    assert spec.params == {"shape": 2.0, "scale": 1.0}
    assert spec.label() == "gamma(scale=1,shape=2)"
    assert InnovationSpec("gaussian", {}).label() == "gaussian"


def test_invalid_specs_rejected():
    with pytest.raises(ParameterError):
        InnovationSpec("cauchy", {})
    with pytest.raises(ParameterError):
        InnovationSpec("gamma", {"shape": -1.0})
    with pytest.raises(ParameterError):
        InnovationSpec("gamma", {"rate": 2.0})
    with pytest.raises(ParameterError):
        InnovationSpec("lognormal", {"sdlog": 0.0})


def test_sampling_deterministic_and_seed_sensitive():
    spec = InnovationSpec("lognormal", {})
    a = sample(spec, 64, seed=5)
    b = sample(spec, 64, seed=5)
    c = sample(spec, 64, seed=6)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


@settings(max_examples=40, deadline=None)
@given(kind=st.sampled_from(KINDS), seed=st.integers(min_value=0, max_value=2**31))
def test_sample_always_finite(kind, seed):
    x = sample(InnovationSpec(kind, {}), 128, seed=seed)
    assert x.shape == (128,)
    assert np.all(np.isfinite(x))
