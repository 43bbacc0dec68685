"""Security analysis of photon-number-resolving decoy-state BB84.

Closed-form eavesdropper information and key rates, source-intensity
optimization, and a pulse-level Monte Carlo cross-check.
"""
from .attacks import (
    attack_info,
    binary_entropy,
    cmp_information,
    crossover_qber,
    pns_full_info_threshold,
    si_information,
)
from .channel import ChannelModel, ExperimentPreset, load_preset, transmittance
from .optimize import max_distance, optimal_mu, sweep
from .photon_stats import DetectorModel, SourceModel, detected_pmf, poisson_pmf
from .security_rate import (
    final_key_rate,
    gllp_rate,
    residual_tagged_fraction,
    sifted_rate,
    tagged_fraction,
    tagged_fraction_limit,
)

__version__ = "0.1.0"
