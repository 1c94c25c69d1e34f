import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spikedelays.kernels import (
    KernelConfig,
    causal_conv,
    default_truncation,
    refractory_kernel,
    response_kernel,
)

from oracles import conv_reference


def test_response_kernel_closed_form_points():
    cfg = KernelConfig(tau_s=2.0, tau_r=2.0, theta_u=10.0, dt_ms=1.0, truncation=32)
    eps = response_kernel(cfg)
    assert eps[0] == 0.0
    assert eps[2] == pytest.approx(1.0, abs=1e-12)          # t = tau_s
    assert eps[4] == pytest.approx(2.0 / np.e, abs=1e-12)   # t = 2*tau_s


def test_refractory_kernel_closed_form_points():
    cfg = KernelConfig(tau_s=1.0, tau_r=3.0, theta_u=10.0, dt_ms=1.0, truncation=32)
    nu = refractory_kernel(cfg)
    assert nu[0] == 0.0
    assert nu[3] == pytest.approx(-20.0, abs=1e-12)         # t = tau_r -> -2*theta_u


def test_kernel_signs_and_peak_location():
    cfg = KernelConfig(tau_s=5.0, tau_r=5.0, theta_u=10.0, dt_ms=1.0, truncation=64)
    eps = response_kernel(cfg)
    nu = refractory_kernel(cfg)
    assert np.all(eps >= 0)
    assert np.all(nu <= 0)
    assert np.argmax(eps) == 5
    assert np.argmin(nu) == 5
    assert eps.max() == pytest.approx(1.0)
    assert nu.min() == pytest.approx(-20.0)


def test_default_truncation_caps_at_eight_taus():
    # the alpha shape needs ~10.2 tau to fall below 1e-3 of its peak,
    # so the 8*tau hard cap decides the length
    assert default_truncation(1.0, 1.0, 1.0) == 8
    assert default_truncation(5.0, 5.0, 1.0) == 40
    assert default_truncation(1.0, 5.0, 1.0) == 40
    assert default_truncation(1.0, 1.0, 0.5) == 16


def test_truncation_defaults_applied_in_config():
    cfg = KernelConfig(tau_s=5.0, tau_r=5.0)
    assert cfg.truncation == default_truncation(5.0, 5.0, 1.0)


def test_causal_conv_delta_copies_kernel():
    kernel = np.array([0.0, 1.0, 0.5, 0.25])
    sig = np.zeros((2, 10))
    sig[1, 6] = 1.0
    out = causal_conv(sig, kernel)
    np.testing.assert_allclose(out[0], 0.0)
    np.testing.assert_allclose(out[1, 6:10], kernel)
    np.testing.assert_allclose(out[1, :6], 0.0)


def test_causal_conv_matches_double_loop_reference():
    rng = np.random.default_rng(7)
    sig = rng.normal(size=(3, 32))
    kernel = rng.normal(size=8)
    out = causal_conv(sig, kernel)
    ref = np.array(conv_reference(sig.tolist(), kernel.tolist()))
    np.testing.assert_allclose(out, ref, rtol=1e-12, atol=1e-12)


def test_causal_conv_linear():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(2, 20))
    y = rng.normal(size=(2, 20))
    k = rng.normal(size=5)
    lhs = causal_conv(2.5 * x - 1.5 * y, k)
    rhs = 2.5 * causal_conv(x, k) - 1.5 * causal_conv(y, k)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-12)


@settings(deadline=None, max_examples=50)
@given(
    t_cut=st.integers(min_value=0, max_value=19),
    seed=st.integers(min_value=0, max_value=10_000),
)
def test_causal_conv_is_causal(t_cut, seed):
    rng = np.random.default_rng(seed)
    sig = rng.normal(size=(2, 20))
    kernel = rng.normal(size=6)
    full = causal_conv(sig, kernel)
    zeroed = sig.copy()
    zeroed[:, t_cut + 1 :] = 0.0
    cut = causal_conv(zeroed, kernel)
    np.testing.assert_allclose(cut[:, : t_cut + 1], full[:, : t_cut + 1])


def test_causal_conv_batched_shape():
    rng = np.random.default_rng(11)
    sig = rng.normal(size=(4, 3, 17))
    kernel = rng.normal(size=5)
    out = causal_conv(sig, kernel)
    assert out.shape == sig.shape
    np.testing.assert_allclose(out[2], causal_conv(sig[2], kernel))


def test_kernel_config_validation():
    with pytest.raises(ValueError):
        KernelConfig(tau_s=-1.0)
    with pytest.raises(ValueError):
        KernelConfig(dt_ms=0.0)
    with pytest.raises(ValueError):
        KernelConfig(theta_u=0.0)
