"""Trade false-stop risk against stopping speed with penalty inflation.

The variance penalty inside each e-process can be inflated beyond its
minimal form. More inflation means a harder threshold to cross: fewer
false stops on near-null streams, later stops everywhere. This demo
sweeps three inflation settings over the same set of borderline
streams and prints the trade-off.

Run: python demos/06_inflation_sweep.py  (about 30 seconds)
"""

from liftstop import (
    ClippedGaussian,
    EngineConfig,
    StreamSpec,
    sensitivity_sweep,
)


def main():
    # borderline stream: slight positive mean, enough to cross sometimes
    spec = StreamSpec(
        length=150,
        base_mean=0.15,
        noise=ClippedGaussian(sigma=0.3),
        seed=17,
    )
    # slow estimator adaptation keeps the sweep in the sensitive regime
    # where the inflation term is a visible share of the penalty
    config = EngineConfig(delta=0.1, alpha=0.01, eta=0.001)

    grid = [(1.0, 1.0), (1.3, 1.5), (1.5, 2.0)]
    n = 600

    print(f"sweeping {len(grid)} inflation settings x {n} streams ...")
    cells = sensitivity_sweep(spec, config, grid, n_streams=n)

    print()
    print(f"  {'v_factor':>8}  {'eta_factor':>10}  {'stop rate':>9}  {'mean stop':>9}")
    for cell in cells:
        print(f"  {cell.v_factor:>8.1f}  {cell.eta_factor:>10.1f}  "
              f"{cell.risk:>9.4f}  {cell.mean_stop:>9.1f}")

    print()
    print("Every cell replays the identical streams, so the movement is")
    print("attributable to the inflation factors alone: risk falls and the")
    print("mean stopping time rises as the penalty grows. Pick the mildest")
    print("setting whose null calibration (demo 02) still clears your delta.")


if __name__ == "__main__":
    main()
