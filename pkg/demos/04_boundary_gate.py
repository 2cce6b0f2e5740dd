"""Defer a stop until a verified semantic boundary.

With the gate enabled, crossing the evidence threshold is necessary
but not sufficient: the controller keeps consuming tokens until it
reaches a boundary-flagged record whose verifier score clears tau_c.
This demo runs the same stream gated and ungated and measures the
deferral.

Run: python demos/04_boundary_gate.py
"""

from dataclasses import replace

from liftstop import (
    ClippedGaussian,
    EngineConfig,
    GateConfig,
    StreamSpec,
    generate_stream,
    run,
)


def main():
    # strong lift, a boundary every 7 tokens, verifier passing 80%
    spec = StreamSpec(
        length=150,
        base_mean=1.2,
        noise=ClippedGaussian(sigma=0.2),
        boundary_every=7,
        verifier_pass_rate=0.8,
        seed=29,
    )
    base = EngineConfig(delta=0.05, alpha=0.05, eta=0.02)

    records = generate_stream(spec)
    ungated = run(records, base)
    gated = run(records, replace(base, gate=GateConfig(enabled=True, tau_c=0.7)))

    print("same stream, same evidence, two stopping rules:")
    print(f"  {'':<22}{'ungated':>9}  {'gated':>7}")
    print(f"  {'crossing_step':<22}{ungated.crossing_step!s:>9}  {gated.crossing_step!s:>7}")
    print(f"  {'stop_step':<22}{ungated.stop_step!s:>9}  {gated.stop_step!s:>7}")
    print(f"  {'gate_delay_tokens':<22}{ungated.gate_delay_tokens!s:>9}  {gated.gate_delay_tokens!s:>7}")

    print()
    print("The crossing step is identical: the gate never changes what the")
    print("evidence says, only where the emission is allowed to end. The")
    print("gated stop lands on the first boundary at or after the crossing")
    print("whose verifier score is at least tau_c, so it can only be later.")


if __name__ == "__main__":
    main()
