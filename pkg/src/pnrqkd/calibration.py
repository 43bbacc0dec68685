"""Rate-vs-distance checks and the calibration report against published targets.

The published curve's underlying link parameters are cited rather than
printed, so the targets are compared, not enforced.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .channel import ExperimentPreset
from .optimize import distance_optimal_mu, max_distance, optimal_mu

TARGETS = {
    "max_distance_mu_0.1_km": 140.2,
    "max_distance_opt_km": 164.1,
    "distance_gain_km": 23.9,
    "mu_star": 0.7,
    "perturbation_pct": 0.3,
}


@dataclass(frozen=True)
class RateDistanceChecks:
    preset: str
    mu_star_distance: float
    distance_at_mu_star: float
    distance_at_mu_01: float
    gain_km: float
    near_max_km: float
    mu_star_near_max: float
    tested_distances: tuple
    unimodal: tuple
    perturbation_pct: tuple

    @property
    def all_unimodal(self) -> bool:
        return all(self.unimodal)

    @property
    def max_perturbation_pct(self) -> float:
        return max(abs(p) for p in self.perturbation_pct)


def rate_distance_checks(
    preset: ExperimentPreset, n_distances: int = 6, near_max_fraction: float = 0.99
) -> RateDistanceChecks:
    best = distance_optimal_mu(preset)
    mu_star, l_star = best.mu, best.distance_km
    l_01 = max_distance(preset, 0.1).distance_km
    near = near_max_fraction * l_star
    distances = [float(x) for x in np.linspace(0.0, l_star, n_distances)[:-1]] + [near]
    reports = [optimal_mu(preset, L) for L in distances]
    pert = tuple(
        100.0 * (max_distance(preset, f * mu_star).distance_km - l_star) / l_star for f in (0.8, 1.2)
    )
    return RateDistanceChecks(
        preset=preset.name,
        mu_star_distance=mu_star,
        distance_at_mu_star=l_star,
        distance_at_mu_01=l_01,
        gain_km=l_star - l_01,
        near_max_km=near,
        mu_star_near_max=reports[-1].mu_star,
        tested_distances=tuple(distances),
        unimodal=tuple(r.unimodal for r in reports),
        perturbation_pct=pert,
    )


def calibration_report(preset: ExperimentPreset) -> dict:
    c = rate_distance_checks(preset)
    measured = {
        "max_distance_mu_0.1_km": c.distance_at_mu_01,
        "max_distance_opt_km": c.distance_at_mu_star,
        "distance_gain_km": c.gain_km,
        "mu_star": c.mu_star_distance,
        "perturbation_pct": c.max_perturbation_pct,
    }
    rows = [
        {"quantity": k, "target": TARGETS[k], "measured": measured[k], "deviation": measured[k] - TARGETS[k]}
        for k in TARGETS
    ]
    return {
        "config": {
            "preset": preset.name,
            "attenuation_db_per_km": preset.attenuation_db_per_km,
            "receiver_efficiency": preset.receiver_efficiency,
            "e0": preset.e0,
            "dark_per_pulse": preset.dark_per_pulse,
        },
        "rows": rows,
        "summary": asdict(c),
    }
