"""Time exponent and space gain of the averaged field across horizons.

The fixed-horizon gain is not a single number: at frequencies well below
T^(-H) averaging barely acts, far above it the gain saturates near 1/(2H).
This sweep shows where a given horizon lands between those regimes.

    python scripts/regularity_sweep.py 0.001 0.01 0.1 --samples 20
"""
import argparse

from nyv.experiments import config_for, regularity_ensemble

ap = argparse.ArgumentParser()
ap.add_argument("horizons", type=float, nargs="+")
ap.add_argument("--samples", type=int, default=20)
ap.add_argument("--hurst", type=float, default=1 / 3)
args = ap.parse_args()

print("T,gamma_hat,gain_hat")
for T in args.horizons:
    r = regularity_ensemble(config_for("regularity", horizon_t=T, samples=args.samples,
                                       hurst=args.hurst))
    print(f"{T:g},{r.gamma_hat:.4f},{r.gain_hat:.4f}", flush=True)
