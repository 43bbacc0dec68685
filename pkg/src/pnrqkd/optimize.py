"""Source-intensity optimization, maximum-distance solving and sweep tables.

Every evaluation runs the full pipeline: fiber length -> transmittance ->
normalized dark rate -> total QBER -> final key rate. The dark-count term
grows as the transmittance shrinks, which is what ends the usable distance.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .channel import ExperimentPreset
from .errors import DomainError
from .security_rate import KeyRateReport, key_rate_report

logger = logging.getLogger(__name__)

MU_BRACKET = (1e-4, 2.0)
DISTANCE_CAP_KM = 500.0

INVPHI = (math.sqrt(5) - 1) / 2
INVPHI2 = (3 - math.sqrt(5)) / 2


def evaluate(preset: ExperimentPreset, mu: float, distance_km: float) -> KeyRateReport:
    eta = preset.eta(distance_km)
    d, _ = preset.normalized_dark(mu, eta)
    return key_rate_report(mu, eta, preset.e0, d, preset.resolving_power)


def pipeline_rate(preset: ExperimentPreset, mu: float, distance_km: float) -> float:
    """Final key rate in bits per emitted pulse, unclamped."""
    return evaluate(preset, mu, distance_km).r_final


def golden_section_max(
    f: Callable[[float], float], a: float, b: float, tol: float = 1e-4
) -> tuple[float, float, int]:
    """Maximize a unimodal ``f`` on [a, b]; returns (x, f(x), iterations)."""
    a, b = min(a, b), max(a, b)
    h = b - a
    c, d = a + INVPHI2 * h, a + INVPHI * h
    yc, yd = f(c), f(d)
    it = 0
    while h > tol:
        it += 1
        if yc > yd:
            b, d, yd = d, c, yc
            h = INVPHI * h
            c = a + INVPHI2 * h
            yc = f(c)
        else:
            a, c, yc = c, d, yd
            h = INVPHI * h
            d = a + INVPHI * h
            yd = f(d)
    x, y = (c, yc) if yc > yd else (d, yd)
    return x, y, it


def grid_argmax(
    f: Callable[[float], float], a: float, b: float, step: float
) -> tuple[float, float, np.ndarray, np.ndarray]:
    xs = np.arange(a, b + 0.5 * step, step)
    xs = xs[xs <= b + 1e-12]
    ys = np.array([f(float(x)) for x in xs])
    i = int(np.argmax(ys))
    return float(xs[i]), float(ys[i]), xs, ys


def is_unimodal_on_support(ys: Sequence[float]) -> bool:
    """True if the positive part of ``ys`` is one contiguous run that rises then falls."""
    ys = np.asarray(ys, dtype=float)
    pos = np.nonzero(ys > 0)[0]
    if len(pos) == 0:
        return False
    if pos[-1] - pos[0] + 1 != len(pos):
        return False
    seg = ys[pos[0] : pos[-1] + 1]
    steps = np.sign(np.diff(seg))
    steps = steps[steps != 0]
    # a falling step followed by a rising one would be a second mode
    return not np.any(np.diff(steps) > 0)


@dataclass(frozen=True)
class OptimumReport:
    mu_star: float
    rate_at_optimum: float
    distance_km: float
    bracket: tuple
    iterations: int
    positive: bool
    grid_mu: float
    grid_agrees: bool
    unimodal: bool

    @property
    def status(self) -> str:
        return "ok" if self.positive else "no_positive_rate"


def maximize_mu(
    rate: Callable[[float], float],
    bracket: tuple = MU_BRACKET,
    tol: float = 1e-4,
    grid_step: float = 1e-4,
    agree_tol: float = 2e-4,
    distance_km: float = math.nan,
) -> OptimumReport:
    """Golden-section maximization of ``rate`` checked against a grid scan.

    If the two disagree by more than ``agree_tol`` the grid result is used.
    """
    lo, hi = bracket
    x_gs, y_gs, it = golden_section_max(rate, lo, hi, tol)
    x_grid, y_grid, _, ys = grid_argmax(rate, lo, hi, grid_step)
    agrees = abs(x_gs - x_grid) <= agree_tol
    if not agrees:
        logger.warning(
            "golden-section optimum mu=%.6g disagrees with grid mu=%.6g; using the grid",
            x_gs,
            x_grid,
        )
        x_gs, y_gs = x_grid, y_grid
    positive = max(y_gs, y_grid) > 0
    return OptimumReport(
        mu_star=x_gs,
        rate_at_optimum=y_gs,
        distance_km=distance_km,
        bracket=(lo, hi),
        iterations=it,
        positive=positive,
        grid_mu=x_grid,
        grid_agrees=agrees,
        unimodal=is_unimodal_on_support(ys),
    )


def optimal_mu(
    preset: ExperimentPreset,
    distance_km: float,
    bracket: tuple = MU_BRACKET,
    tol: float = 1e-4,
    grid_step: float = 1e-4,
) -> OptimumReport:
    """Intensity maximizing the final key rate at a fixed distance."""
    return maximize_mu(
        lambda mu: pipeline_rate(preset, mu, distance_km),
        bracket=bracket,
        tol=tol,
        grid_step=grid_step,
        distance_km=distance_km,
    )


@dataclass(frozen=True)
class DistanceReport:
    mu: float
    distance_km: float
    positive: bool
    capped: bool
    iterations: int


def max_distance(
    preset: ExperimentPreset,
    mu: float,
    cap_km: float = DISTANCE_CAP_KM,
    tol_km: float = 0.01,
) -> DistanceReport:
    """Largest fiber length with a positive final key rate, by bisection.

    The rate's sign is monotone in length: the QBER only grows as the
    transmittance drops, and the sifted-key fraction falls with the QBER.
    """
    if pipeline_rate(preset, mu, 0.0) <= 0:
        return DistanceReport(mu, 0.0, positive=False, capped=False, iterations=0)
    if pipeline_rate(preset, mu, cap_km) > 0:
        return DistanceReport(mu, cap_km, positive=True, capped=True, iterations=0)
    lo, hi, it = 0.0, cap_km, 0
    while hi - lo > tol_km:
        it += 1
        mid = 0.5 * (lo + hi)
        if pipeline_rate(preset, mu, mid) > 0:
            lo = mid
        else:
            hi = mid
    return DistanceReport(mu, lo, positive=True, capped=False, iterations=it)


def distance_optimal_mu(
    preset: ExperimentPreset,
    bracket: tuple = (0.01, 2.0),
    tol: float = 1e-5,
    grid_step: float = 1e-2,
    tol_km: float = 0.01,
) -> DistanceReport:
    """Intensity that maximizes the reachable distance, with a coarse grid check."""

    def reach(mu):
        return max_distance(preset, mu, tol_km=1e-7).distance_km

    x, _, _ = golden_section_max(reach, *bracket, tol=tol)
    x_grid, y_grid, _, _ = grid_argmax(reach, *bracket, step=grid_step)
    if abs(x - x_grid) > grid_step:
        logger.warning("distance optimum mu=%.5g disagrees with grid mu=%.5g", x, x_grid)
        x = x_grid
    return max_distance(preset, x, tol_km=tol_km)


@dataclass
class SweepTable:
    variable: str
    columns: tuple
    rows: list
    flagged: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        i = self.columns.index(name)
        return np.array([r[i] for r in self.rows], dtype=float)

    def argmax(self, name: str = "r_final") -> int:
        return int(np.argmax(self.column(name)))

    def __len__(self):
        return len(self.rows)


DISTANCE_COLUMNS = ("distance_km", "eta", "e_total", "delta0", "r_final")
MU_COLUMNS = ("mu", "r_final")


def _distance_row(preset, mu, x):
    rep = evaluate(preset, mu, x)
    return (x, rep.eta, rep.e_total, rep.delta0, rep.r_final)


def _mu_row(preset, distance_km, x):
    return (x, pipeline_rate(preset, x, distance_km))


def sweep(
    preset: ExperimentPreset,
    variable: str,
    start: float,
    stop: float,
    steps: int,
    mu: Optional[float] = None,
    distance_km: float = 0.0,
    workers: int = 1,
) -> SweepTable:
    """Evaluate the pipeline along ``distance`` (at fixed mu) or ``mu`` (at fixed distance).

    Rows that hit a domain error are collected in ``flagged`` instead of aborting.
    """
    if steps < 2:
        raise DomainError(f"a sweep needs at least 2 steps, got {steps}")
    xs = [float(x) for x in np.linspace(start, stop, steps)]
    if variable == "distance":
        mu = preset.mu if mu is None else mu
        fn, columns = (lambda x: _distance_row(preset, mu, x)), DISTANCE_COLUMNS
        config = {"preset": preset.name, "mu": mu}
    elif variable == "mu":
        fn, columns = (lambda x: _mu_row(preset, distance_km, x)), MU_COLUMNS
        config = {"preset": preset.name, "distance_km": distance_km}
    else:
        raise DomainError(f"cannot sweep {variable!r}; use 'distance' or 'mu'")

    def safe(x):
        try:
            row = fn(x)
        except (DomainError, ArithmeticError) as exc:
            return x, None, str(exc)
        if not all(math.isfinite(v) for v in row):
            return x, None, "non-finite value"
        return x, row, None

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(safe, xs))
    else:
        results = [safe(x) for x in xs]

    table = SweepTable(variable=variable, columns=columns, rows=[], config=config)
    for x, row, err in sorted(results, key=lambda r: r[0]):
        if row is None:
            table.flagged.append((x, err))
        else:
            table.rows.append(row)
    return table
