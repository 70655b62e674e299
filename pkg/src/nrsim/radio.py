"""Log-distance pathloss, RSRP and propagation delay for a 1-D geometry."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InvariantViolation

SPEED_OF_LIGHT_M_PER_US = 299.792
MIN_DISTANCE_M = 1.0


@dataclass(frozen=True)
class PathlossModel:
    exponent: float = 2.7
    ref_loss_db: float = 40.0  # at 1 m

    def __post_init__(self):
        if not self.exponent > 0:
            raise InvariantViolation("pathloss exponent must be positive")

    def loss_db(self, distance_m: float) -> float:
        d = max(distance_m, MIN_DISTANCE_M)
        return self.ref_loss_db + 10.0 * self.exponent * math.log10(d / MIN_DISTANCE_M)

    def distance_for_loss(self, loss_db: float) -> float:
        """Inverse of ``loss_db``, clamped to the 1 m reference distance."""
        d = MIN_DISTANCE_M * 10.0 ** ((loss_db - self.ref_loss_db) / (10.0 * self.exponent))
        return max(d, MIN_DISTANCE_M)


def rsrp(tx_power_dbm: float, distance_m: float, model: PathlossModel = PathlossModel()) -> float:
    return tx_power_dbm - model.loss_db(distance_m)


def propagation_delay(distance_m: float) -> float:
    """One-way delay in microseconds."""
    if distance_m < 0:
        raise InvariantViolation(f"distance {distance_m} m is negative")
    return distance_m / SPEED_OF_LIGHT_M_PER_US
