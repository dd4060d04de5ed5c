import math

import numpy as np
import pytest
from hypothesis import example, given
from hypothesis import strategies as st

from conftest import make_dataset
from massmed.errors import EffectRangeError, FitError, InvalidArgumentError, ValidationError
from massmed.mediation import (
    ASSUMPTIONS,
    Dataset,
    EffectQuery,
    ModelParams,
    effects_linear,
    effects_logistic_or,
    fit_mediation,
    rare_outcome_check,
    sobel_se,
)
from massmed.regression import fit_linear, fit_logistic
from massmed.simgen import generate, get_scenario
from massmed.stochastics import RngStream, ar1_covariance

ALPHA = np.array([0, 0.2, 0, 0.1, 0.15])
BETA = np.array([0, 0, 0.2, 0.1, 0.15])


def params(alpha=ALPHA, beta=BETA, gamma=0.5, kind="continuous"):
    d = len(alpha)
    return ModelParams(c=0.5, gamma=gamma, beta=beta, theta=np.ones(2), c_k=np.full(d, 0.5),
                       alpha=alpha, eta=np.ones((d, 2)), sigma_e=ar1_covariance(d, 0.5),
                       outcome_kind=kind)


finite = st.floats(-5, 5, allow_nan=False)


def random_params(draw_vals, kind):
    d = len(draw_vals) // 2
    return params(np.array(draw_vals[:d]), np.array(draw_vals[d:2 * d]), gamma=draw_vals[-1], kind=kind)


def test_sobel_se_examples():
    assert sobel_se(0.0, 0.3, 0.0, 0.7) == 0.0
    assert abs(sobel_se(0.2, 0.1, 0.5, 0.2) - 0.0640312) < 1e-7
    assert math.isclose(sobel_se(0.2, 0.1, 0.5, 0.2), math.sqrt(0.0041), rel_tol=1e-14)
    assert sobel_se(1.3, 0.0, -2.0, 0.0) == 0.0


def test_sobel_se_vectorised():
    out = sobel_se(np.array([0.2, 0.0]), np.array([0.1, 1.0]), np.array([0.5, 0.0]), np.array([0.2, 1.0]))
    assert out.shape == (2,) and out[1] == 0.0


def test_sobel_se_rejects_negative_se():
    with pytest.raises(InvalidArgumentError):
        sobel_se(0.1, -0.1, 0.2, 0.1)


@given(a=finite, sa=st.floats(0, 3), b=finite, sb=st.floats(0, 3))
def test_sobel_se_symmetric_and_nonnegative(a, sa, b, sb):
    assert sobel_se(a, sa, b, sb) == sobel_se(b, sb, a, sa)
    assert sobel_se(a, sa, b, sb) >= 0


def test_dataset_validates_lengths_and_binary():
    with pytest.raises(InvalidArgumentError):
        Dataset(x=np.zeros(3), m=np.zeros((2, 1)), y=np.zeros(3))
    with pytest.raises(ValidationError):
        Dataset(x=np.zeros(3), m=np.zeros((3, 1)), y=np.array([0.0, 1.0, 2.0]), kind="binary")
    with pytest.raises(InvalidArgumentError):
        Dataset(x=np.zeros(3), m=np.zeros((3, 1)), y=np.zeros(3), kind="count")


def test_fit_mediation_matches_separate_regressions(linear_data):
    fit = fit_mediation(linear_data)
    out = fit_linear(linear_data.outcome_design, linear_data.y)
    assert np.allclose(fit.beta, out.coefficients[2:5], atol=1e-13)
    assert np.allclose(fit.se_beta, out.std_errors[2:5], atol=1e-13)
    for k in range(3):
        mk = fit_linear(linear_data.mediator_design, linear_data.m[:, k])
        assert abs(fit.alpha[k] - mk.coefficients[1]) < 1e-13
        assert abs(fit.se_alpha[k] - mk.std_errors[1]) < 1e-13
    assert np.array_equal(fit.product, fit.alpha * fit.beta)
    assert np.allclose(fit.sobel_se, sobel_se(fit.alpha, fit.se_alpha, fit.beta, fit.se_beta), rtol=1e-15)
    assert fit.gamma == out.coefficients[1]


def test_fit_mediation_logistic_outcome(logistic_data):
    fit = fit_mediation(logistic_data)
    ref = fit_logistic(logistic_data.outcome_design, logistic_data.y)
    assert fit.kind == "binary"
    assert np.allclose(fit.beta, ref.coefficients[2:5], atol=1e-10)


def test_fit_mediation_rows_and_weights_agree_with_take(linear_data):
    rows = np.arange(0, 400, 3)
    w = np.random.default_rng(1).integers(0, 4, rows.size)
    w[0] = 1
    a = fit_mediation(linear_data, rows=rows, weights=w)
    expanded = linear_data.take(np.repeat(rows, w))
    b = fit_mediation(expanded)
    assert np.allclose(a.product, b.product, atol=1e-10)
    assert np.allclose(a.sobel_se, b.sobel_se, atol=1e-10)


def test_simulated_linear_recovers_paths():
    data = generate(get_scenario("ci/linear/case1", n=10**5), RngStream(31))
    fit = fit_mediation(data)
    assert abs(fit.gamma - 0.5) < 0.01
    assert abs(fit.alpha[1] - 0.2) < 4 * fit.se_alpha[1]
    assert abs(fit.beta[1]) < 4 * fit.se_beta[1]


def test_simulated_logistic_recovers_gamma():
    data = generate(get_scenario("ci/logistic/case1", n=10**5), RngStream(32))
    assert abs(fit_mediation(data).gamma - 0.5) < 0.05


def test_null_pathway_products_near_zero():
    gen = np.random.default_rng(4)
    n = 3000
    x = gen.standard_normal(n)
    m = gen.standard_normal((n, 2))
    y = 0.4 * x + gen.standard_normal(n)
    fit = fit_mediation(Dataset(x=x, m=m, y=y))
    assert np.all(np.abs(fit.product) < 3 * np.maximum(fit.sobel_se, 1e-12) + 1e-12)


def test_collinear_mediator_names_outcome_regression():
    x = np.arange(20, dtype=float)
    with pytest.raises(FitError) as info:
        fit_mediation(Dataset(x=x, m=x.copy(), y=np.sin(x)))
    assert info.value.component == "outcome"


def test_to_params_round_trip(linear_data):
    fit = fit_mediation(linear_data)
    p = fit.to_params()
    assert np.array_equal(p.alpha, fit.alpha) and np.array_equal(p.beta, fit.beta)
    assert p.gamma == fit.gamma and p.outcome_kind == "continuous"


def test_effects_linear_catalog_parameters():
    e = effects_linear(params())
    assert e.nde == 0.5
    assert math.isclose(e.nie, 0.0325, abs_tol=1e-15)
    assert math.isclose(e.te, 0.5325, abs_tol=1e-15)
    assert len(e.per_mediator_nie) == 5 and e.per_mediator_nie[3] == pytest.approx(0.01)


def test_effects_null_contrast():
    e = effects_linear(params(), EffectQuery(x=2.0, x_star=2.0))
    assert e.nde == 0 and e.nie == 0 and e.te == 0
    o = effects_logistic_or(params(kind="binary"), EffectQuery(x=2.0, x_star=2.0))
    assert o.nde_or == o.nie_or == o.te_or == 1.0


def test_effects_wrong_kind():
    with pytest.raises(InvalidArgumentError):
        effects_linear(params(kind="binary"))
    with pytest.raises(InvalidArgumentError):
        effects_logistic_or(params())


def test_effects_or_catalog_parameters():
    o = effects_logistic_or(params(kind="binary"))
    assert abs(o.nie_or - 1.033034) < 1e-6
    assert math.isclose(o.nde_or, math.exp(0.5))


def test_effects_or_overflow_guard():
    with pytest.raises(EffectRangeError):
        effects_logistic_or(params(kind="binary", gamma=800.0))


@given(vals=st.lists(finite, min_size=3, max_size=11), delta=st.floats(-10, 10))
@example(vals=[0.0, 0.0, 1.382191166048557e-156], delta=1.382191166048557e-156)
def test_effects_linear_scale_with_contrast(vals, delta):
    if len(vals) % 2 == 0:
        vals = vals[:-1]
    p = random_params(vals, "continuous")
    one = effects_linear(p, EffectQuery(x=delta, x_star=0.0))
    two = effects_linear(p, EffectQuery(x=2 * delta, x_star=0.0))
    assert one.te == one.nde + one.nie
    # doubling is exact except where subnormal products lose bits
    assert two.nde == pytest.approx(2 * one.nde, rel=0, abs=1e-300)
    assert two.nie == pytest.approx(2 * one.nie, rel=0, abs=1e-300)


@given(vals=st.lists(st.floats(-2, 2), min_size=3, max_size=11))
def test_effects_or_log_additive(vals):
    if len(vals) % 2 == 0:
        vals = vals[:-1]
    o = effects_logistic_or(random_params(vals, "binary"))
    assert abs(math.log(o.te_or) - (math.log(o.nde_or) + math.log(o.nie_or))) < 1e-12
    assert abs(o.te_or / (o.nde_or * o.nie_or) - 1) < 1e-12


def _binary(y):
    y = np.asarray(y, dtype=float)
    n = y.size
    return Dataset(x=np.zeros(n), m=np.zeros((n, 1)), y=y, kind="binary")


def test_rare_outcome_check():
    r = rare_outcome_check(_binary(np.zeros(10)))
    assert r.prevalence == 0 and not r.warning
    assert rare_outcome_check(_binary([0, 1] * 5)).warning
    r = rare_outcome_check(_binary([1] + [0] * 19))
    assert r.prevalence == 0.05 and not r.warning
    with pytest.raises(InvalidArgumentError):
        rare_outcome_check(Dataset(x=np.zeros(2), m=np.zeros((2, 1)), y=np.zeros(2)))


def test_assumptions_are_documented():
    assert len(ASSUMPTIONS) == 4
    assert all(a.startswith(f"C.{i + 1}") for i, a in enumerate(ASSUMPTIONS))


def test_model_params_validation():
    with pytest.raises(InvalidArgumentError):
        params(alpha=np.zeros(4))
    with pytest.raises(InvalidArgumentError):
        ModelParams(c=0, gamma=0, beta=[1.0, 1.0], theta=[1.0], c_k=0, alpha=[1.0, 1.0],
                    eta=[[1.0], [1.0]], sigma_e=[[1.0, 2.0], [2.0, 1.0]])


@pytest.mark.slow
def test_products_consistent_at_large_n():
    sc = get_scenario("ci/linear/case1", n=10**5)
    truth = sc.params.products
    hits = np.zeros(5)
    for rep in range(200):
        fit = fit_mediation(generate(sc, RngStream(900, rep)))
        hits += np.abs(fit.product - truth) <= 4 * np.maximum(fit.sobel_se, 1e-12)
    assert np.all(hits / 200 >= 0.95)


def test_small_dataset_helper_is_sane():
    data = make_dataset(50)
    assert data.n == 50 and data.d == 2 and data.q == 1
