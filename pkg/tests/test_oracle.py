import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mmo_fhn.oracle import (
    hit_prob_below,
    large_L_ratio,
    linearized_law,
    mc_checks,
    z0_deterministic,
    zeta,
)
from mmo_fhn.params import DerivedParams, derive_params, params_from_scaled
from mmo_fhn.stats import normal_cdf, phi_spike_prob


def _scaled(mu_t, s1, s2):
    base = derive_params(params_from_scaled(mu_t, 0.1, 1e-4))
    return DerivedParams(**{**base.__dict__, "mu_t": mu_t, "sigma1_t": s1, "sigma2_t": s2,
                            "sigma_t": math.hypot(s1, s2)})


def test_z0_trivial_cases():
    assert np.all(z0_deterministic(np.linspace(-3, 3, 7), 0.0, -3.0, 0.0) == 0.0)
    assert z0_deterministic(-2.0, 0.0, -2.0, 0.3) == 0.0
    assert z0_deterministic(-2.0, 0.7, -2.0, 0.3) == pytest.approx(0.7, rel=1e-14)


def test_z0_solves_the_ode():
    t, h = 0.4, 1e-4
    z = lambda s: z0_deterministic(s, 0.2, -1.5, 0.05)
    deriv = (z(t + h) - z(t - h)) / (2 * h)
    assert deriv == pytest.approx(0.05 + t * z(t), rel=1e-7)


def test_zeta_values():
    assert zeta(-2.0, -2.0) == 1.0
    assert zeta(0.0, -2.0) == pytest.approx(0.900397, abs=1e-6)
    with pytest.raises(ValueError):
        zeta(-3.0, -2.0)


def test_zeta_monotone():
    v = zeta(np.linspace(0, 3, 61), -2.0)
    assert np.all(np.diff(v) > 0)


def test_law_integrals_reach_their_limits():
    law = linearized_law(_scaled(0.05, 0.1, 0.1), 3.0)
    assert law.i_mean == pytest.approx(math.sqrt(2 * math.pi), rel=1e-3)
    assert law.i_s1 == pytest.approx(math.sqrt(math.pi) / 2, rel=1e-3)
    assert law.i_s2 == pytest.approx(math.sqrt(math.pi), rel=1e-3)


def test_law_variance_and_median():
    assert linearized_law(_scaled(0.05, 0.0, 0.0), 1.5).variance == 0.0
    law = linearized_law(_scaled(0.05, 0.007, 0.007), 1.5)
    assert law.variance > 0 and law.mean > 0
    assert hit_prob_below(law, -law.mean) == pytest.approx(0.5, abs=1e-9)
    assert linearized_law(_scaled(-0.05, 0.007, 0.007), 1.5).mean < 0
    with pytest.raises(ValueError):
        linearized_law(_scaled(0.05, 0.1, 0.1), 0.0)


def test_law_mean_matches_deterministic_solution():
    law = linearized_law(_scaled(0.05, 0.007, 0.007), 1.5, z0=0.01)
    assert law.mean == pytest.approx(z0_deterministic(3.0, 0.01, -3.0, 0.05), rel=1e-10)


def test_hit_prob_large_L_matches_gaussian_leading_term():
    d = _scaled(0.05, 0.1 / math.sqrt(2), 0.1 / math.sqrt(2))
    p = hit_prob_below(linearized_law(d, 3.0), 0.0)
    assert p == pytest.approx(phi_spike_prob(mu_t=0.05, sigma_t=0.1), rel=0.02)


def test_hit_prob_large_L_matches_its_own_limit():
    d = _scaled(0.05, 0.1 / math.sqrt(2), 0.1 / math.sqrt(2))
    p = hit_prob_below(linearized_law(d, 3.0), 0.0)
    assert p == pytest.approx(normal_cdf(-large_L_ratio(d)), rel=1e-3)


@settings(max_examples=40, deadline=None)
@given(mu=st.floats(-0.2, 0.2), s=st.floats(0.01, 0.3), h=st.floats(-0.05, 0.05), dh=st.floats(1e-4, 0.05))
def test_hit_prob_monotone_in_H(mu, s, h, dh):
    law = linearized_law(_scaled(mu, s, s), 1.5)
    assert hit_prob_below(law, h + dh) <= hit_prob_below(law, h)


def test_standardized_finite_when_exponent_overflows():
    d = _scaled(0.05, 0.1, 0.1)
    law = linearized_law(d, 14.0)
    assert 2 * law.log_scale > 709
    assert law.standardized(0.0) == pytest.approx(large_L_ratio(d), rel=1e-9)


@pytest.mark.parametrize("sigma", [0.007, 0.01])
def test_monte_carlo_against_gaussian_law(sigma):
    results = mc_checks(_scaled(0.05, sigma, sigma), 1.5, n_paths=100_000, master_seed=1)
    assert [r.name for r in results] == ["mean", "variance", "P(z_T<=-0)", "P(z_T<=-0.01)"]
    for r in results:
        assert r.passed, r
