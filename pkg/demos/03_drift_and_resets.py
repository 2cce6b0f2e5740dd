"""Watch the drift detector split a shifting stream into segments.

Each segment gets its own slice of the total error budget, with the
threshold growing so the slices sum to delta over any number of
restarts. This demo prints the budget ladder, then runs a stream whose
mean jumps mid-way and shows where the detector reset the evidence.

Run: python demos/03_drift_and_resets.py
"""

from liftstop import (
    ClippedGaussian,
    EngineConfig,
    StreamSpec,
    generate_stream,
    run,
    segment_budget,
)
import math


def main():
    delta = 0.1

    print(f"budget ladder for delta={delta}:")
    print(f"  {'segment':>7}  {'delta_j':>9}  {'threshold u_j':>13}  {'ln u_j':>7}")
    for j in range(1, 6):
        d_j, u_j = segment_budget(delta, j)
        print(f"  {j:>7}  {d_j:>9.5f}  {u_j:>13.2f}  {math.log(u_j):>7.3f}")
    total = sum(segment_budget(delta, j)[0] for j in range(1, 200))
    print(f"  sum over 199 segments: {total:.5f} (never exceeds {delta})")

    # stream whose lift level jumps upward at step 80: the running
    # window mean pulls away from the overall mean and trips the reset
    spec = StreamSpec(
        length=200,
        base_mean=0.1,
        noise=ClippedGaussian(sigma=0.3),
        drift=((80, 0.8),),
        seed=3,
    )
    config = EngineConfig(delta=delta, max_steps=200)
    cert = run(generate_stream(spec), config, collect_trace=True)

    print()
    print("stream with a mean jump 0.1 -> 0.8 at t=80:")
    print(f"  outcome        {cert.outcome}")
    print(f"  reset_times    {list(cert.reset_times)}")
    print(f"  segments_used  {cert.segments_used}")
    print(f"  stop_step      {cert.stop_step}")

    if cert.reset_times:
        t0 = cert.reset_times[0]
        before = [r.segment for r in cert.trace if r.t == t0 - 1]
        after = [r.segment for r in cert.trace if r.t == t0 + 1]
        print(f"  segment before/after first reset: {before[0]} -> {after[0]}")

    print()
    print("A reset throws away accumulated evidence and restarts the")
    print("e-process under the next, stricter threshold. Validity is kept")
    print("because the per-segment budgets were reserved up front.")


if __name__ == "__main__":
    main()
