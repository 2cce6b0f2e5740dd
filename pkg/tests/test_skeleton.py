import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from liftstop.lift import MalformedRecordError
from liftstop.skeleton import (
    DiagnosticsConfig,
    DistStep,
    apply_flatten,
    apply_temperature,
    diagnose,
    dist_entropy,
    kl_divergence,
    validate_prob_vector,
)

from fixture_streams import (
    ACCEPT,
    ACCEPT_STATS,
    LOW_KL,
    WEAK_RHO,
    make_dist_steps,
)

logit_vectors = arrays(
    float,
    st.integers(min_value=2, max_value=16),
    elements=st.floats(min_value=-20, max_value=20),
)


# ---------------------------------------------------------------------------
# constructions


def test_temperature_softmax_reference_values():
    probs = apply_temperature([1.0, 0.0, 0.0], tau=1.0)
    # e/(e+2) and 1/(e+2), computed independently
    assert probs == pytest.approx([0.5761168847658291, 0.21194155761708547, 0.21194155761708547], abs=1e-12)


def test_temperature_flattens_toward_uniform():
    sharp = apply_temperature([3.0, 1.0, 0.0], tau=1.0)
    soft = apply_temperature([3.0, 1.0, 0.0], tau=50.0)
    assert soft.max() < sharp.max()
    assert soft == pytest.approx([1 / 3] * 3, abs=0.02)


def test_temperature_below_one_rejected():
    with pytest.raises(MalformedRecordError):
        apply_temperature([1.0, 0.0], tau=0.5)
    with pytest.raises(MalformedRecordError):
        apply_temperature([1.0, 0.0], tau=math.nan)


def test_temperature_rejects_bad_logits():
    with pytest.raises(MalformedRecordError):
        apply_temperature([1.0, math.inf], tau=2.0)
    with pytest.raises(MalformedRecordError):
        apply_temperature([[1.0, 2.0]], tau=2.0)


@given(logits=logit_vectors, taus=st.tuples(st.floats(1.0, 50.0), st.floats(1.0, 50.0)))
@settings(max_examples=80)
def test_temperature_entropy_monotone(logits, taus):
    """More softening never reduces entropy."""
    t_lo, t_hi = sorted(taus)
    h_lo = dist_entropy(apply_temperature(logits, t_lo))
    h_hi = dist_entropy(apply_temperature(logits, t_hi))
    assert h_hi >= h_lo - 1e-9


def test_flatten_reference_values():
    out = apply_flatten([0.9, 0.1], gamma=0.2)
    assert out == pytest.approx([0.82, 0.18], abs=1e-12)


def test_flatten_endpoints():
    p = [0.7, 0.2, 0.1]
    assert apply_flatten(p, 0.0) == pytest.approx(p)
    assert apply_flatten(p, 1.0) == pytest.approx([1 / 3] * 3)


def test_flatten_gamma_out_of_range():
    for gamma in (-0.1, 1.1):
        with pytest.raises(MalformedRecordError):
            apply_flatten([0.5, 0.5], gamma)


@given(
    probs=arrays(float, 6, elements=st.floats(0.01, 1.0)),
    gamma=st.floats(0.0, 1.0),
)
def test_flatten_preserves_simplex(probs, gamma):
    p = probs / probs.sum()
    out = apply_flatten(p, gamma)
    assert out.sum() == pytest.approx(1.0, abs=1e-9)
    assert np.all(out >= 0)


@given(
    probs=arrays(float, 8, elements=st.floats(0.01, 1.0)),
    gammas=st.tuples(st.floats(0.0, 1.0), st.floats(0.0, 1.0)),
)
@settings(max_examples=80)
def test_flatten_kl_monotone_in_gamma(probs, gammas):
    """A flatter skeleton sits further from the source in KL."""
    p = probs / probs.sum()
    g_lo, g_hi = sorted(gammas)
    kl_lo = kl_divergence(p, apply_flatten(p, g_lo))
    kl_hi = kl_divergence(p, apply_flatten(p, g_hi))
    assert kl_hi >= kl_lo - 1e-9


# ---------------------------------------------------------------------------
# divergence and entropy


def test_kl_reference_value():
    assert kl_divergence([1.0, 0.0], [0.5, 0.5]) == pytest.approx(math.log(2.0), abs=1e-12)


def test_kl_zero_iff_equal():
    assert kl_divergence([0.3, 0.7], [0.3, 0.7]) == 0.0


def test_kl_infinite_on_support_violation():
    assert kl_divergence([0.5, 0.5], [1.0, 0.0]) == math.inf


def test_kl_length_mismatch():
    with pytest.raises(MalformedRecordError):
        kl_divergence([1.0], [0.5, 0.5])


@given(
    a=arrays(float, 5, elements=st.floats(0.01, 1.0)),
    b=arrays(float, 5, elements=st.floats(0.01, 1.0)),
)
def test_kl_nonnegative(a, b):
    assert kl_divergence(a / a.sum(), b / b.sum()) >= 0.0


def test_entropy_uniform_and_point_mass():
    assert dist_entropy([0.25] * 4) == pytest.approx(math.log(4.0), abs=1e-12)
    assert dist_entropy([1.0, 0.0, 0.0]) == 0.0


@pytest.mark.parametrize(
    "bad",
    [[0.5, 0.6], [0.5, -0.1, 0.6], [[0.5, 0.5]], [0.5, math.nan], []],
)
def test_prob_vector_validation(bad):
    with pytest.raises(MalformedRecordError):
        validate_prob_vector(bad)


# ---------------------------------------------------------------------------
# diagnostics


def test_accept_fixture_passes_all_checks():
    rep = diagnose(make_dist_steps(**ACCEPT))
    kl, rho, sat = ACCEPT_STATS
    assert rep.accepted
    assert rep.rejection_reasons == ()
    assert rep.n_steps == 200
    assert rep.kl_full_skeleton == pytest.approx(kl, abs=0.01)
    assert rep.rho == pytest.approx(rho, abs=0.01)
    assert rep.saturation_rate == sat


def test_low_separation_asks_to_strengthen():
    rep = diagnose(make_dist_steps(**LOW_KL))
    assert not rep.accepted
    assert rep.rejection_reasons == ("strengthen-S",)
    assert rep.kl_full_skeleton == pytest.approx(1.064, abs=0.01)


def test_weak_correlation_asks_to_switch_families():
    rep = diagnose(make_dist_steps(**WEAK_RHO))
    assert not rep.accepted
    assert rep.rejection_reasons == ("switch-families",)
    assert rep.rho == pytest.approx(-0.319, abs=0.01)


def test_oversaturated_stream_asks_to_raise_the_bound():
    params = dict(ACCEPT)
    params["n_sat"] = 20
    rep = diagnose(make_dist_steps(**params))
    assert not rep.accepted
    assert "raise-clip-bound" in rep.rejection_reasons
    assert rep.saturation_rate == pytest.approx(0.1)


def test_excessive_separation_asks_to_weaken():
    # skeleton mass concentrated away from the emitted token
    v = 512
    full = np.full(v, 1e-3 / (v - 1))
    full[1] = 1.0 - 1e-3
    skel = np.full(v, 1e-3 / (v - 1))
    skel[0] = 1.0 - 1e-3
    steps = [DistStep(full=full, skeleton=skel, token=1) for _ in range(40)]
    rep = diagnose(steps)
    assert rep.kl_full_skeleton > 10.0
    assert "weaken-S" in rep.rejection_reasons


def test_constant_lift_has_undefined_correlation():
    v = 16
    full = np.full(v, 0.2 / (v - 1))
    full[3] = 0.8
    skel = np.full(v, 0.95 / (v - 1))
    skel[3] = 0.05
    steps = [DistStep(full=full, skeleton=skel, token=3, entropy=1.0 + 0.01 * i) for i in range(40)]
    rep = diagnose(steps)
    assert rep.rho is None
    assert "rho-undefined" in rep.rejection_reasons


def test_short_stream_flags_insufficient_data():
    rep = diagnose(make_dist_steps(**{**ACCEPT, "n": 10}))
    assert "insufficient-data" in rep.rejection_reasons
    assert not rep.accepted


def test_empty_stream_report():
    rep = diagnose([])
    assert rep.n_steps == 0
    assert not rep.accepted
    assert rep.rejection_reasons == ("insufficient-data",)


def test_spearman_method():
    rep = diagnose(make_dist_steps(**ACCEPT), DiagnosticsConfig(correlation="spearman"))
    assert rep.accepted
    assert rep.rho == pytest.approx(-0.596, abs=0.01)


def test_unknown_correlation_method():
    with pytest.raises(MalformedRecordError):
        diagnose([], DiagnosticsConfig(correlation="kendall"))


def test_diagnosis_is_permutation_invariant():
    steps = make_dist_steps(**ACCEPT)
    rep_fwd = diagnose(steps)
    rep_rev = diagnose(list(reversed(steps)))
    assert rep_rev.accepted == rep_fwd.accepted
    assert rep_rev.kl_full_skeleton == pytest.approx(rep_fwd.kl_full_skeleton, rel=1e-9)
    assert rep_rev.rho == pytest.approx(rep_fwd.rho, rel=1e-9)
    assert rep_rev.saturation_rate == rep_fwd.saturation_rate


def test_mismatched_vector_lengths_rejected():
    step = DistStep(full=np.array([0.5, 0.5]), skeleton=np.array([0.3, 0.3, 0.4]), token=0)
    with pytest.raises(MalformedRecordError):
        diagnose([step])


def test_token_out_of_range_rejected():
    step = DistStep(full=np.array([0.5, 0.5]), skeleton=np.array([0.5, 0.5]), token=2)
    with pytest.raises(MalformedRecordError):
        diagnose([step])
