"""Fiber channel transmittance and named experiment presets."""
from __future__ import annotations

import configparser
import dataclasses
import math
import os
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional

from .errors import ConfigError, DomainError, PresetNotFound
from .photon_stats import normalized_dark_rate

PRESET_DIR_ENV = "PNRQKD_PRESET_DIR"
PRESET_FILE = "presets.ini"


@dataclass(frozen=True)
class ChannelModel:
    attenuation_db_per_km: float
    length_km: float
    receiver_efficiency: float

    def __post_init__(self):
        if not self.attenuation_db_per_km >= 0:
            raise DomainError(f"attenuation must be >= 0 dB/km, got {self.attenuation_db_per_km}")
        if not self.length_km >= 0:
            raise DomainError(f"length must be >= 0 km, got {self.length_km}")
        if not 0 < self.receiver_efficiency <= 1:
            raise DomainError(f"receiver efficiency must lie in (0, 1], got {self.receiver_efficiency}")

    @property
    def eta(self) -> float:
        return transmittance(self)


def transmittance(channel: ChannelModel) -> float:
    loss_db = channel.attenuation_db_per_km * channel.length_km
    return channel.receiver_efficiency * 10.0 ** (-loss_db / 10.0)


def length_for_transmittance(
    eta: float, attenuation_db_per_km: float, receiver_efficiency: float
) -> float:
    """Fiber length at which the overall transmittance drops to ``eta``."""
    if not attenuation_db_per_km > 0:
        raise DomainError("a lossless fiber has no length-transmittance inverse")
    if not 0 < eta <= receiver_efficiency:
        raise DomainError(f"eta must lie in (0, {receiver_efficiency}], got {eta}")
    return -10.0 * math.log10(eta / receiver_efficiency) / attenuation_db_per_km


@dataclass(frozen=True)
class ExperimentPreset:
    name: str
    attenuation_db_per_km: float
    receiver_efficiency: float
    e0: float
    pulse_rate: float
    mu: float = 0.1
    dark_rate_hz: float = 0.0
    background_prob: Optional[float] = None
    resolving_power: Optional[int] = None
    length_km: float = 0.0
    description: str = ""

    def __post_init__(self):
        # reuse ChannelModel's range checks
        self.channel()
        if not 0 <= self.e0 <= 0.5:
            raise ConfigError(f"e0 must lie in [0, 0.5], got {self.e0}")
        if not self.pulse_rate > 0:
            raise ConfigError(f"pulse_rate must be > 0, got {self.pulse_rate}")
        if not 0 < self.mu <= 2:
            raise ConfigError(f"mu must lie in (0, 2], got {self.mu}")
        if not self.dark_rate_hz >= 0:
            raise ConfigError(f"dark_rate_hz must be >= 0, got {self.dark_rate_hz}")
        if self.background_prob is not None and not 0 <= self.background_prob <= 1:
            raise ConfigError(f"background_prob must lie in [0, 1], got {self.background_prob}")
        if self.resolving_power is not None and self.resolving_power < 1:
            raise ConfigError(f"resolving_power must be >= 1, got {self.resolving_power}")

    def channel(self, length_km: Optional[float] = None) -> ChannelModel:
        return ChannelModel(
            self.attenuation_db_per_km,
            self.length_km if length_km is None else length_km,
            self.receiver_efficiency,
        )

    def eta(self, length_km: Optional[float] = None) -> float:
        return transmittance(self.channel(length_km))

    @property
    def dark_per_pulse(self) -> float:
        """Background click probability per pulse window."""
        if self.background_prob is not None:
            return self.background_prob
        return self.dark_rate_hz / self.pulse_rate

    def normalized_dark(self, mu: float, eta: float) -> tuple[float, bool]:
        return normalized_dark_rate(self.dark_per_pulse * self.pulse_rate, self.pulse_rate, mu, eta)

    def with_overrides(self, **overrides) -> "ExperimentPreset":
        unknown = set(overrides) - {f.name for f in dataclasses.fields(self)}
        if unknown:
            raise ConfigError(f"unknown preset fields: {', '.join(sorted(unknown))}")
        return dataclasses.replace(self, **overrides)


_FLOAT_FIELDS = {
    "attenuation_db_per_km",
    "receiver_efficiency",
    "e0",
    "pulse_rate",
    "mu",
    "dark_rate_hz",
    "background_prob",
    "length_km",
}


def parse_fields(section) -> dict:
    """Convert raw key-value strings to typed preset fields."""
    out = {}
    for key, raw in section.items():
        raw = raw.strip()
        if key in _FLOAT_FIELDS:
            try:
                out[key] = float(raw)
            except ValueError:
                raise ConfigError(f"{key}: expected a number, got {raw!r}") from None
        elif key == "resolving_power":
            if raw.lower() in ("unbounded", "inf", "none"):
                out[key] = None
            else:
                try:
                    out[key] = int(raw)
                except ValueError:
                    raise ConfigError(f"resolving_power: expected an integer, got {raw!r}") from None
        elif key in ("description", "name"):
            out[key] = raw
        else:
            raise ConfigError(f"unknown preset field {key!r}")
    return out


def _read(paths) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None)
    for p in paths:
        p = Path(p) if isinstance(p, (str, os.PathLike)) else p
        with p.open("r", encoding="utf-8") as fh:
            cp.read_file(fh, source=str(p))
    return cp


def preset_files(preset_dir: Optional[os.PathLike] = None) -> list:
    """Shipped preset file, then any ``*.ini`` in ``preset_dir`` or $PNRQKD_PRESET_DIR."""
    files = [resources.files("pnrqkd").joinpath(PRESET_FILE)]
    extra = preset_dir or os.environ.get(PRESET_DIR_ENV)
    if extra:
        files.extend(sorted(Path(extra).glob("*.ini")))
    return files


def available_presets(preset_dir=None) -> list[str]:
    return _read(preset_files(preset_dir)).sections()


def load_preset(name: str, preset_dir=None) -> ExperimentPreset:
    cp = _read(preset_files(preset_dir))
    if not cp.has_section(name):
        raise PresetNotFound(name, cp.sections())
    fields = parse_fields(cp[name])
    fields.pop("name", None)
    try:
        return ExperimentPreset(name=name, **fields)
    except TypeError as exc:
        raise ConfigError(f"preset {name!r}: {exc}") from None


def load_overrides(path: os.PathLike) -> dict:
    """Read an override file: every section is merged, later keys win."""
    cp = _read([path])
    out = {}
    for section in cp.sections():
        out.update(parse_fields(cp[section]))
    out.pop("name", None)
    return out
