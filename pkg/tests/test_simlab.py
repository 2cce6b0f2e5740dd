import math

import numpy as np
import pytest

from liftstop.controller import EngineConfig, run
from liftstop.lift import LiftConfig, compute_lift
from liftstop.simlab import (
    BetaScaled,
    ClippedGaussian,
    EntropySpec,
    SpecError,
    StreamSpec,
    TwoPoint,
    clopper_pearson,
    generate_stream,
    monte_carlo_risk,
    sensitivity_sweep,
)


def lift_values(records):
    cfg = LiftConfig()
    return [compute_lift(r, cfg).value for r in records]


# ---------------------------------------------------------------------------
# stream generation


def test_generation_is_deterministic():
    spec = StreamSpec(
        length=40,
        base_mean=0.5,
        entropy=EntropySpec(),
        boundary_every=7,
        verifier_pass_rate=0.8,
        seed=99,
    )
    a = generate_stream(spec, 3)
    b = generate_stream(spec, 3)
    for ra, rb in zip(a, b):
        assert ra == rb


def test_stream_index_separates_draws():
    spec = StreamSpec(length=40, base_mean=0.5, seed=99)
    a = generate_stream(spec, 0)
    b = generate_stream(spec, 1)
    assert any(ra.full_prob != rb.full_prob for ra, rb in zip(a, b))


def test_two_point_support_is_exact():
    spec = StreamSpec(
        length=300,
        base_mean=4.0,
        noise=TwoPoint(p=0.5, hi=8.0, lo=0.0),
        seed=11,
    )
    vals = lift_values(generate_stream(spec))
    los = [v for v in vals if v < 4.0]
    his = [v for v in vals if v >= 4.0]
    assert los and his
    # the zero branch back-solves to p == s, so the lift is bitwise zero
    assert all(v == 0.0 for v in los)
    assert all(abs(v - 8.0) < 1e-9 for v in his)


def test_degenerate_two_point_is_a_null_stream():
    spec = StreamSpec(length=50, base_mean=0.0, noise=TwoPoint(p=0.7), seed=4)
    cfg = LiftConfig()
    for rec in generate_stream(spec):
        assert rec.full_prob == rec.skeleton_prob
        inc = compute_lift(rec, cfg)
        assert inc.value == 0.0
        assert not inc.was_zeroed and not inc.was_clipped_high


def test_infeasible_two_point_rejected():
    spec = StreamSpec(base_mean=4.5, noise=TwoPoint(p=0.5, hi=8.0, lo=0.0))
    with pytest.raises(SpecError, match="exceeds clip bound"):
        spec.validate()


def test_sample_mean_approaches_true_mean():
    spec = StreamSpec(length=20000, base_mean=0.3, noise=ClippedGaussian(sigma=0.2), seed=5)
    sample = float(np.mean(lift_values(generate_stream(spec))))
    assert sample == pytest.approx(0.30617700538207987, abs=1e-9)
    assert spec.true_mean() == pytest.approx(0.3058613587525209, abs=1e-12)
    assert abs(sample - spec.true_mean()) < 0.005


def test_true_mean_gaussian_at_zero_floor():
    # mean 0 leaves the positive half-normal: E = sigma / sqrt(2 pi)
    spec = StreamSpec(base_mean=0.0, noise=ClippedGaussian(sigma=0.2))
    assert spec.true_mean() == pytest.approx(0.2 / math.sqrt(2.0 * math.pi), abs=1e-12)


def test_true_mean_gaussian_sigma_zero():
    spec = StreamSpec(base_mean=0.7, noise=ClippedGaussian(sigma=0.0))
    assert spec.true_mean() == 0.7


def test_true_mean_two_point_exact():
    # base equal to the nominal mean keeps the support at {0, 8}
    spec = StreamSpec(base_mean=2.4, noise=TwoPoint(p=0.3, hi=8.0, lo=0.0))
    assert spec.true_mean() == pytest.approx(0.3 * 8.0, abs=1e-12)


def test_true_mean_beta_matches_empirical():
    spec = StreamSpec(length=30000, base_mean=1.0, noise=BetaScaled(a=2.0, b=5.0), seed=8)
    sample = float(np.mean(lift_values(generate_stream(spec))))
    assert abs(sample - spec.true_mean()) < 0.02


def test_true_mean_undefined_under_drift():
    spec = StreamSpec(base_mean=0.1, drift=((50, 2.0),))
    with pytest.raises(SpecError, match="stationary"):
        spec.true_mean()


def test_mean_schedule_applies_jumps():
    spec = StreamSpec(length=10, base_mean=0.1, drift=((4, 2.0), (8, 0.5)))
    assert spec.mean_schedule().tolist() == [0.1] * 3 + [2.0] * 4 + [0.5] * 3


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(length=-1),
        dict(clip_bound=0.0),
        dict(clip_bound=math.inf),
        dict(base_mean=-0.1),
        dict(base_mean=9.0),
        dict(drift=((5, 1.0), (5, 2.0))),
        dict(drift=((0, 1.0),)),
        dict(drift=((5, 9.0),)),
        dict(noise=TwoPoint(p=1.5)),
        dict(noise=ClippedGaussian(sigma=-0.1)),
        dict(noise=BetaScaled(a=0.0)),
        dict(noise="gaussian"),
        dict(boundary_every=-1),
        dict(verifier_pass_rate=1.5),
        dict(entropy=EntropySpec(noise=-0.1)),
    ],
)
def test_spec_validation_errors(kwargs):
    with pytest.raises(SpecError):
        StreamSpec(**kwargs).validate()


def test_optional_channels():
    spec = StreamSpec(
        length=60,
        base_mean=1.0,
        entropy=EntropySpec(base=2.5, slope=0.5, noise=0.3),
        boundary_every=5,
        verifier_pass_rate=1.0,
        seed=2,
    )
    records = generate_stream(spec)
    assert all(r.entropy is not None and r.entropy >= 0.0 for r in records)
    assert all(r.is_boundary == (r.index % 5 == 0) for r in records)
    assert all(r.verifier_score >= 0.7 for r in records)

    failing = generate_stream(StreamSpec(length=60, verifier_pass_rate=0.0, seed=2))
    assert all(r.verifier_score < 0.7 for r in failing)

    bare = generate_stream(StreamSpec(length=10, seed=2))
    assert all(r.entropy is None and r.verifier_score is None for r in bare)
    assert not any(r.is_boundary for r in bare)


def test_spec_digest_tracks_content():
    a = StreamSpec(seed=1)
    assert a.digest() == StreamSpec(seed=1).digest()
    assert a.digest() != StreamSpec(seed=2).digest()
    assert len(a.digest()) == 64


# ---------------------------------------------------------------------------
# binomial intervals


def test_clopper_pearson_reference():
    lo, hi = clopper_pearson(5, 10)
    assert lo == pytest.approx(0.18708603, abs=1e-6)
    assert hi == pytest.approx(0.81291397, abs=1e-6)


def test_clopper_pearson_endpoints():
    assert clopper_pearson(0, 20)[0] == 0.0
    assert clopper_pearson(20, 20)[1] == 1.0
    lo, hi = clopper_pearson(0, 20)
    assert 0.0 < hi < 0.25


@pytest.mark.parametrize("k,n", [(-1, 10), (11, 10), (0, 0)])
def test_clopper_pearson_rejects_bad_counts(k, n):
    with pytest.raises(SpecError):
        clopper_pearson(k, n)


# ---------------------------------------------------------------------------
# Monte Carlo calibration


def test_risk_report_structure():
    # low alpha slows the running estimate enough for a constant
    # mean to register as sustained lift
    spec = StreamSpec(length=60, base_mean=2.0, noise=ClippedGaussian(sigma=0.2), seed=7)
    config = EngineConfig(alpha=0.05, eta=0.02)
    report = monte_carlo_risk(spec, config, 50)
    curve = np.array(report.risk_curve)
    assert report.length == 60
    assert len(curve) == 60
    assert np.all(np.diff(curve) >= 0.0)
    assert report.final_rate == report.crossed / 50
    assert report.final_ci_low <= report.final_rate <= report.final_ci_high
    assert report.config_digest == config.digest()
    assert report.spec_digest == spec.digest()
    assert report.mean_stop >= 1.0
    # strong signal: everything crosses early
    assert report.final_rate == 1.0
    assert report.mean_stop < 20.0


def test_risk_horizon_capped_by_config():
    spec = StreamSpec(length=60, base_mean=2.0, seed=7)
    report = monte_carlo_risk(spec, EngineConfig(max_steps=25, alpha=0.05, eta=0.02), 10)
    assert report.length == 25
    assert len(report.risk_curve) == 25


def test_null_streams_rarely_cross():
    spec = StreamSpec(length=150, base_mean=0.0, noise=ClippedGaussian(sigma=0.2), seed=3)
    report = monte_carlo_risk(spec, EngineConfig(), 200)
    assert report.crossed == 0
    assert report.mean_stop == 150.0


def test_risk_rejects_zero_streams():
    with pytest.raises(SpecError):
        monte_carlo_risk(StreamSpec(), EngineConfig(), 0)


def test_transient_segment_detection_needs_sensitive_config():
    spec = StreamSpec(
        length=150,
        base_mean=0.1,
        drift=((51, 2.0), (71, 0.1)),
        noise=ClippedGaussian(sigma=0.2),
        seed=13,
    )
    sensitive = EngineConfig(alpha=0.05, eta=0.02)

    def stops_in_window(config):
        hits = 0
        for i in range(200):
            cert = run(generate_stream(spec, i), config)
            if cert.stop_step is not None and 51 <= cert.stop_step <= 70:
                hits += 1
        return hits

    assert stops_in_window(sensitive) > 100
    assert stops_in_window(EngineConfig()) == 0


def test_sweep_orders_conservatism():
    spec = StreamSpec(length=150, base_mean=0.15, noise=ClippedGaussian(sigma=0.2), seed=17)
    config = EngineConfig(alpha=0.01, eta=0.001)
    grid = [(1.0, 1.0), (1.3, 1.5), (1.5, 2.0)]
    cells = sensitivity_sweep(spec, config, grid, 150)
    assert [(c.v_factor, c.eta_factor) for c in cells] == grid
    risks = [c.risk for c in cells]
    stops = [c.mean_stop for c in cells]
    # identical streams per cell, so inflation can only delay or drop crossings
    assert all(a >= b for a, b in zip(risks, risks[1:]))
    assert all(a <= b for a, b in zip(stops, stops[1:]))
    assert risks[0] > risks[-1]
