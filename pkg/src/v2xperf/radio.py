"""Log-distance propagation and link-level decision rules."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Calibration distances for the default link budget.
NOMINAL_TX_RANGE_M = 115.0
NOMINAL_SENSE_RANGE_M = 175.0
SINR_THRESHOLD_DB = 6.49825

# Boundary slack for power / distance comparisons (floating round-off only).
_EPS_DB = 1e-9


def db_to_mw(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0)


def mw_to_db(mw: float) -> float:
    return 10.0 * math.log10(mw)


@dataclass(frozen=True)
class PathLossModel:
    pl_d0: float = 46.6777
    d0: float = 1.0
    exponent: float = 3.0

    def __post_init__(self):
        if not (self.exponent > 0 and self.d0 > 0 and math.isfinite(self.pl_d0)):
            raise ValueError(f"invalid path loss model: {self}")


def path_loss(model: PathLossModel, d: float) -> float:
    """Path loss in dB at distance ``d`` metres; distances below d0 clamp to d0."""
    if not math.isfinite(d) or d <= 0:
        raise ValueError(f"distance must be finite and positive, got {d!r}")
    d = max(d, model.d0)
    return model.pl_d0 + 10.0 * model.exponent * math.log10(d / model.d0)


def _floor_at(distance: float, tx_power: float = 17.0) -> float:
    return tx_power - path_loss(PathLossModel(), distance)


@dataclass(frozen=True)
class LinkBudget:
    tx_power: float = 17.0
    sinr_threshold: float = SINR_THRESHOLD_DB
    # Unrounded so the default ranges come out at exactly 115 m / 175 m.
    rx_sensitivity: float = field(default_factory=lambda: _floor_at(NOMINAL_TX_RANGE_M))
    carrier_sense_floor: float = field(default_factory=lambda: _floor_at(NOMINAL_SENSE_RANGE_M))
    noise_floor: float = -99.0

    def __post_init__(self):
        if self.carrier_sense_floor > self.rx_sensitivity:
            raise ValueError("carrier_sense_floor must not exceed rx_sensitivity")


def rx_power(budget: LinkBudget, model: PathLossModel, d: float) -> float:
    return budget.tx_power - path_loss(model, d)


def invert_range(budget: LinkBudget, model: PathLossModel, floor: float) -> float:
    """Distance at which the received power drops to ``floor`` dBm."""
    headroom = budget.tx_power - model.pl_d0 - floor
    if headroom < 0:
        raise ValueError(
            f"floor {floor} dBm is above the received power at d0 "
            f"({budget.tx_power - model.pl_d0} dBm)"
        )
    return model.d0 * 10.0 ** (headroom / (10.0 * model.exponent))


def reception_ok(budget: LinkBudget, signal: float, interference_sum: float, noise: float) -> bool:
    """SINR test; ``interference_sum`` is linear mW, the rest dBm. Inclusive at threshold."""
    sinr = signal - mw_to_db(db_to_mw(noise) + interference_sum)
    return sinr >= budget.sinr_threshold - _EPS_DB


@dataclass(frozen=True)
class Radio:
    """Link budget plus propagation model, with the two derived ranges."""

    budget: LinkBudget = field(default_factory=LinkBudget)
    model: PathLossModel = field(default_factory=PathLossModel)

    @property
    def transmission_range(self) -> float:
        return invert_range(self.budget, self.model, self.budget.rx_sensitivity)

    @property
    def sensing_range(self) -> float:
        return invert_range(self.budget, self.model, self.budget.carrier_sense_floor)

    def rx_power(self, d: float) -> float:
        return rx_power(self.budget, self.model, d)

    def rx_power_matrix(self, xy):
        """Received power (dBm) between every pair of positions; diagonal uses d0."""
        xy = np.asarray(xy, dtype=float).reshape(-1, 2)
        diff = xy[:, None, :] - xy[None, :, :]
        d = np.sqrt((diff**2).sum(-1))
        d = np.maximum(d, self.model.d0)
        pl = self.model.pl_d0 + 10.0 * self.model.exponent * np.log10(d / self.model.d0)
        return self.budget.tx_power - pl

    def senses(self, power_dbm) -> bool:
        return power_dbm >= self.budget.carrier_sense_floor - _EPS_DB

    def decodable(self, power_dbm) -> bool:
        return power_dbm >= self.budget.rx_sensitivity - _EPS_DB
