"""HTTP layer: payload contracts, error mapping, NaN hygiene."""
import numpy as np
import pytest
from fastapi.testclient import TestClient

import polyarima as pa
from polyarima.innovations import InnovationSpec, sample
from polyarima.service.app import app

client = TestClient(app)


def simulate_payload(**overrides):
    payload = {
        "order": {"p": 1, "d": 0, "q": 0},
        "phi": [0.5],
        "theta": [],
        "innovation": {"kind": "gamma", "params": {"shape": 2.0}},
        "n": 300,
        "seed": 42,
    }
    payload.update(overrides)
    return payload


def series(n=300, seed=42, law=("gamma", {"shape": 2.0})):
    eps = sample(InnovationSpec(*law), n + 200, seed)
    return pa.simulate(pa.ModelSpec(phi=(0.5,), theta=()), eps, burn_in=200).tolist()


def test_health():
    r = client.get("/health")
    assert r.status_code == 200
    body = r.json()
    assert body["status"] == "ok"
    assert body["version"] == pa.__version__


# ---------------------------------------------------------------------------
# /simulate

def test_simulate_matches_library_and_is_deterministic():
    r1 = client.post("/simulate", json=simulate_payload())
    r2 = client.post("/simulate", json=simulate_payload())
    assert r1.status_code == 200
    assert r1.json()["values"] == r2.json()["values"]
    assert len(r1.json()["values"]) == 300
    expected = series()
    assert r1.json()["values"] == pytest.approx(expected)


def test_simulate_coefficient_count_is_422():
    r = client.post("/simulate", json=simulate_payload(phi=[0.5, 0.1]))
    assert r.status_code == 422


def test_simulate_inadmissible_model_is_400():
    r = client.post("/simulate", json=simulate_payload(phi=[1.2]))
    assert r.status_code == 400
    detail = r.json()["detail"]
    assert detail["category"] == "admissibility"
    assert "message" in detail


def test_simulate_unknown_innovation_is_400_parameter():
    r = client.post("/simulate", json=simulate_payload(innovation={"kind": "cauchy", "params": {}}))
    assert r.status_code in (400, 422)
    if r.status_code == 400:
        assert r.json()["detail"]["category"] == "parameter"


# ---------------------------------------------------------------------------
# /fit

def test_fit_both_pure_ar_uses_ols():
    r = client.post("/fit", json={"values": series(), "order": {"p": 1, "d": 0, "q": 0}})
    assert r.status_code == 200
    body = r.json()
    assert body["method"] == "both"
    assert set(body["blocks"]) == {"ols", "pmm2"}
    assert body["n"] == 300
    assert body["n_eff"] == 299
    for block in body["blocks"].values():
        assert block["names"] == ["phi1"]
        assert len(block["estimates"]) == 1
        assert abs(block["estimates"][0] - 0.5) < 0.15
        assert block["diagnostics"]["ljung_box"]["p_value"] >= 0.0
        assert np.isfinite(block["ic"]["aic"]) and np.isfinite(block["ic"]["bic"])
        assert block["timing_seconds"] >= 0.0
    pmm2_block = body["blocks"]["pmm2"]
    assert pmm2_block["fallback_used"] is False
    assert pmm2_block["moments"]["gamma3"] > 0.5
    assert pmm2_block["se"][0] is not None
    assert pmm2_block["se"][0] < body["blocks"]["ols"]["se"][0]


def test_fit_both_arma_uses_css():
    eps = sample(InnovationSpec("gamma", {"shape": 2.0}), 600, 7)
    y = pa.simulate(pa.ModelSpec(phi=(0.5,), theta=(0.3,)), eps, burn_in=200).tolist()
    r = client.post("/fit", json={"values": y, "order": {"p": 1, "d": 0, "q": 1}})
    assert r.status_code == 200
    body = r.json()
    assert set(body["blocks"]) == {"css", "pmm2"}
    assert body["blocks"]["css"]["names"] == ["phi1", "theta1"]
    assert body["n_eff"] == 400 - 0 - 1


def test_fit_single_methods():
    y = series()
    for method, keys in (("ols", {"ols"}), ("css", {"css"}), ("pmm2", {"pmm2"})):
        r = client.post("/fit", json={"values": y, "order": {"p": 1, "d": 0, "q": 0},
                                      "method": method})
        assert r.status_code == 200, method
        assert set(r.json()["blocks"]) == keys


def test_fit_ols_with_ma_terms_is_400_parameter():
    r = client.post("/fit", json={"values": series(), "order": {"p": 1, "d": 0, "q": 1},
                                  "method": "ols"})
    assert r.status_code == 400
    assert r.json()["detail"]["category"] == "parameter"


def test_fit_gaussian_fallback_sanitizes_payload():
    # symmetric residuals retain the baseline; the payload must stay valid JSON
    y = series(law=("gaussian", {}))
    r = client.post("/fit", json={"values": y, "order": {"p": 1, "d": 0, "q": 0},
                                  "method": "pmm2"})
    assert r.status_code == 200
    block = r.json()["blocks"]["pmm2"]
    assert block["fallback_used"] is True
    assert block["score_norm"] is None          # no score was evaluated
    assert all(v is not None for v in block["se"])
    assert any("fell back" in note for note in block["notes"])


def test_fit_short_series_is_422():
    r = client.post("/fit", json={"values": [1.0, 2.0, 3.0], "order": {"p": 1, "d": 0, "q": 0}})
    assert r.status_code == 422


def test_fit_constant_series_is_400():
    r = client.post("/fit", json={"values": [5.0] * 50, "order": {"p": 1, "d": 0, "q": 0}})
    assert r.status_code == 400
    assert r.json()["detail"]["category"] in ("rank", "degeneracy")


# ---------------------------------------------------------------------------
# /select

def test_select_skewed_recommends_pmm2():
    r = client.post("/select", json={"values": series(n=600), "order": {"p": 1, "d": 0, "q": 0}})
    assert r.status_code == 200
    body = r.json()
    assert body["recommendation"] == "use_pmm2"
    assert body["gamma3_hat"] > 0.5
    assert body["re_theoretical"] > 1.2
    assert body["n"] == 600


def test_select_respects_thresholds():
    r = client.post("/select", json={
        "values": series(n=600),
        "order": {"p": 1, "d": 0, "q": 0},
        "thresholds": {"gamma3_symmetric": 10.0, "gamma4_normal": 50.0},
    })
    assert r.status_code == 200
    assert r.json()["recommendation"] == "use_baseline"


# ---------------------------------------------------------------------------
# /validate

def test_validate_fixed_mode():
    r = client.post("/validate", json={"values": series(n=140), "order": {"p": 1, "d": 0, "q": 0}})
    assert r.status_code == 200
    body = r.json()
    assert body["mode"] == "fixed"
    assert set(body["methods"]) == {"css", "pmm2"}
    for mv in body["methods"].values():
        assert mv["n_forecasts"] == 28
        assert len(mv["errors"]) == 28
    assert body["improvement_pct"] is not None


def test_validate_rolling_requires_window():
    r = client.post("/validate", json={"values": series(n=140),
                                       "order": {"p": 1, "d": 0, "q": 0},
                                       "mode": "rolling"})
    assert r.status_code == 400
    assert r.json()["detail"]["category"] == "parameter"


def test_validate_rolling_mode():
    r = client.post("/validate", json={"values": series(n=140),
                                       "order": {"p": 1, "d": 0, "q": 0},
                                       "mode": "rolling", "window": 60, "refit_every": 10})
    assert r.status_code == 200
    body = r.json()
    assert body["window"] == 60
    assert body["split"] is None


# ---------------------------------------------------------------------------
# /mc

def test_mc_endpoint_small_grid():
    config = {
        "models": [{"p": 1, "d": 0, "q": 0, "phi": [0.5]}],
        "sample_sizes": [60],
        "innovations": [{"kind": "gaussian", "params": {}},
                        {"kind": "gamma", "params": {"shape": 2.0}}],
        "replications": 30,
        "bootstrap_resamples": 100,
        "root_seed": 3,
    }
    r = client.post("/mc", json={"config": config, "workers": 2})
    assert r.status_code == 200
    payload = r.json()["report"]
    assert len(payload["report"]["cells"]) == 2
    assert payload["csv"].startswith("model_index,model,n,innovation,")
    assert "re_curve" in payload            # two laws -> curve present
    assert len(payload["re_curve"]) == 2
    assert payload["re_curve_csv"].startswith("model_index,")


def test_mc_single_law_has_no_curve():
    config = {
        "models": [{"p": 1, "d": 0, "q": 0, "phi": [0.5]}],
        "sample_sizes": [60],
        "innovations": [{"kind": "gamma", "params": {"shape": 2.0}}],
        "replications": 30,
        "bootstrap_resamples": 100,
    }
    r = client.post("/mc", json={"config": config})
    assert r.status_code == 200
    assert "re_curve" not in r.json()["report"]


def test_mc_invalid_config_is_400_config():
    config = {"models": [], "sample_sizes": [60],
              "innovations": [{"kind": "gamma"}], "replications": 30}
    r = client.post("/mc", json={"config": config})
    assert r.status_code == 400
    assert r.json()["detail"]["category"] == "config"


def test_mc_config_must_be_object():
    r = client.post("/mc", json={"config": [1, 2, 3]})
    assert r.status_code == 422
