"""Covariance and self-similarity checks for the LFSM sampler over several seeds.

    python scripts/lfsm_laws.py --seeds 5
"""
import argparse

from nyv.experiments import lfsm_covariance_check, self_similarity_exponent

ap = argparse.ArgumentParser()
ap.add_argument("--seeds", type=int, default=5)
ap.add_argument("--paths", type=int, default=4000)
args = ap.parse_args()

print("seed,cov_max_rel_err,qexp_2_0.3,qexp_1.5_0.4")
for s in range(args.seeds):
    base = s * args.paths
    c = lfsm_covariance_check(0.3, args.paths, seed_base=base).max_rel_error
    a = self_similarity_exponent(2.0, 0.3, args.paths, seed_base=base)[0]
    b = self_similarity_exponent(1.5, 0.4, args.paths, seed_base=base)[0]
    print(f"{s},{c:.4f},{a:.4f},{b:.4f}", flush=True)
