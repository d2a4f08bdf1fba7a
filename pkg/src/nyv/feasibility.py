"""Admissible input regularity for given noise roughness and Hurst index."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction


@dataclass(frozen=True)
class Verdict:
    vartheta: float
    hurst: float
    kappa_in: float
    threshold: float
    admissible: bool
    regime: str

    def describe(self) -> str:
        ok = "satisfies" if self.admissible else "violates"
        return (f"vartheta={self.vartheta:g} H={self.hurst:g}: need kappa > {self.threshold:g}; "
                f"kappa_in={self.kappa_in:g} {ok} it; regime: {self.regime}")


def _rational(x) -> Fraction:
    # Inputs such as 1/12 arrive as floats; recover the intended fraction.
    return Fraction(x).limit_denominator(10**6)


def kappa_threshold(vartheta, hurst) -> Fraction:
    v, h = _rational(vartheta), _rational(hurst)
    return 3 - (1 - v) / (2 * h)


def regime_of(threshold: float) -> str:
    # Lipschitz g needed above 1, continuous non-Lipschitz g between 0 and 1,
    # distributions at or below 0.
    if threshold > 1:
        return "classical Bony"
    if threshold > 0:
        return "non-Lipschitz"
    return "distributional"


def feasibility_report(vartheta: float, hurst: float, kappa_in: float) -> Verdict:
    if not 0 < vartheta < 1:
        raise ValueError(f"vartheta must lie in (0, 1), got {vartheta}")
    if not 0 < hurst < 1:
        raise ValueError(f"hurst must lie in (0, 1), got {hurst}")
    th = kappa_threshold(vartheta, hurst)
    return Verdict(vartheta, hurst, kappa_in, float(th), _rational(kappa_in) > th, regime_of(th))
