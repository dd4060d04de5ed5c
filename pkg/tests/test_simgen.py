import math

import numpy as np
import pytest

from massmed.errors import InvalidArgumentError, UnknownScenarioError
from massmed.simgen import (
    SimScenario,
    exposure_moments,
    generate,
    get_scenario,
    catalog_scales,
    scenario_catalog,
)
from massmed.stochastics import RngStream, ar1_covariance


def test_catalog_keys():
    cat = scenario_catalog(n=100)
    for study in ("ci", "test"):
        for model in ("linear", "logistic"):
            for case in (1, 2, 3):
                assert f"{study}/{model}/case{case}" in cat
    for model in ("linear", "logistic"):
        for d in (5, 10, 20, 50, 100):
            assert cat[f"timing/{model}/d{d}"].params.d == d
    assert all(s.n == 100 for s in cat.values())


def test_lookup_forms_agree():
    a = get_scenario(("ci", "linear", 2), n=50)
    b = get_scenario("ci/linear/case2", n=50)
    assert a.to_config() == b.to_config()
    assert get_scenario(("timing", "logistic", 20)).params.d == 20
    assert get_scenario("ci/linear/case1").n == 100_000


def test_unknown_key():
    with pytest.raises(KeyError):
        get_scenario("ci/probit/case1")
    with pytest.raises(UnknownScenarioError):
        get_scenario(("test", "linear", 7))


def test_catalog_parameters():
    ci = get_scenario("ci/linear/case1").params
    assert ci.alpha.tolist() == [0, 0.2, 0, 0.1, 0.15]
    assert ci.beta.tolist() == [0, 0, 0.2, 0.1, 0.15]
    assert np.allclose(ci.products, [0, 0, 0, 0.01, 0.0225])
    t = get_scenario("test/logistic/case3").params
    assert t.outcome_kind == "binary" and t.c == 0.0
    assert t.beta.tolist() == [0, 0, 0.15, 0.035, 0.05]
    assert np.array_equal(ci.sigma_e, ar1_covariance(5, 0.5))
    assert catalog_scales("variance") == (math.sqrt(2.0), 2.0)
    assert catalog_scales("sd") == (2.0, 4.0)
    assert get_scenario("ci/linear/case1", reading="sd").sigma_eps == 4.0
    with pytest.raises(InvalidArgumentError):
        catalog_scales("precision")


@pytest.mark.parametrize("case", [1, 2, 3])
def test_exposure_moments(case):
    sc = get_scenario(("ci", "linear", case), n=100_000)
    data = generate(sc, RngStream(case, 0))
    mean, var = exposure_moments(case)
    assert abs(data.x.mean() - mean) < 0.03
    assert abs(data.x.var() - var) < 0.03
    if case == 3:
        assert data.x.min() >= 0


def test_residual_covariance_recovered():
    sc = get_scenario("ci/linear/case1", n=100_000)
    data = generate(sc, RngStream(4, 0))
    design = np.column_stack([np.ones(data.n), data.x, data.z])
    coef, *_ = np.linalg.lstsq(design, data.m, rcond=None)
    resid = data.m - design @ coef
    assert np.all(np.abs(np.cov(resid.T) - sc.params.sigma_e) < 0.02)
    assert np.allclose(coef[1], sc.params.alpha, atol=0.02)
    # mediators 1 and 3 carry no exposure effect
    for k in (0, 2):
        assert abs(np.corrcoef(data.x, data.m[:, k])[0, 1]) < 0.02


def test_mediator_moments():
    sc = get_scenario("ci/linear/case1", n=100_000)
    data = generate(sc, RngStream(9, 0))
    p = sc.params
    var = p.alpha**2 + 2 * sc.covariate_sd**2 + 1.0
    assert np.all(np.abs(data.m.mean(axis=0) - p.c_k) < 4 * np.sqrt(var / data.n))
    assert np.all(np.abs(data.m.var(axis=0) - var) < 4 * var * math.sqrt(2 / data.n))


def test_continuous_outcome_noise():
    sc = get_scenario("ci/linear/case1", n=100_000)
    data = generate(sc, RngStream(2, 0))
    p = sc.params
    lin = p.c + p.gamma * data.x + data.m @ p.beta + data.z @ p.theta
    assert abs(np.std(data.y - lin) - p.sigma_eps) < 0.02


def test_binary_outcome_prevalence():
    sc = get_scenario("ci/logistic/case1", n=100_000)
    data = generate(sc, RngStream(3, 0))
    p = sc.params
    lin = p.c + p.gamma * data.x + data.m @ p.beta + data.z @ p.theta
    prob = 1 / (1 + np.exp(-lin))
    assert set(np.unique(data.y)) == {0.0, 1.0}
    assert abs(data.y.mean() - prob.mean()) < 0.01
    assert data.kind == "binary"


def test_deterministic_and_seed_sensitive():
    sc = get_scenario("test/linear/case2", n=500)
    a, b = generate(sc, RngStream(1, 2)), generate(sc, RngStream(1, 2))
    assert np.array_equal(a.m, b.m) and np.array_equal(a.y, b.y)
    c = generate(sc, RngStream(1, 3))
    assert not np.array_equal(a.y, c.y)


def test_config_round_trip():
    for key in ("ci/logistic/case3", "timing/linear/d10"):
        sc = get_scenario(key, n=1234)
        back = SimScenario.from_config(sc.to_config())
        assert back.to_config() == sc.to_config()
        assert np.array_equal(back.params.sigma_e, sc.params.sigma_e)


def test_config_errors():
    cfg = get_scenario("ci/linear/case1").to_config()
    del cfg["alpha"]
    with pytest.raises(InvalidArgumentError):
        SimScenario.from_config(cfg)
    with pytest.raises(InvalidArgumentError):
        get_scenario("ci/linear/case1").with_n(0)


def test_dataset_names():
    data = generate(get_scenario("ci/linear/case1", n=10), RngStream(0, 0))
    assert data.mediator_names() == ["m1", "m2", "m3", "m4", "m5"]
    assert data.meta["covariates"] == ["z1", "z2"] and data.q == 2
