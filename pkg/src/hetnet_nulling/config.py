"""System parameters for the two-tier downlink network.

Conventions: densities in nodes/m^2, powers linear (only the macro/pico
ratio matters because thermal noise is neglected), bandwidth in Hz, rate
thresholds in bit/s. Bias is linear at this layer; the CLI accepts dB.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

from .errors import ConfigError

MACRO = 1
PICO = 2


class UserClass(enum.Enum):
    """The four user classes a scheduled typical user can fall into."""

    MACRO = "macro"                      # served by its nearest macro-BS
    PICO_UNOFFLOADED = "pico_unoffloaded"  # pico wins even without bias
    OFFLOADED_IN = "offloaded_in"        # offloaded, selected for nulling
    OFFLOADED_NON_IN = "offloaded_non_in"  # offloaded, not selected


def db_to_linear(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


def linear_to_db(x: float) -> float:
    return 10.0 * math.log10(x)


@dataclass(frozen=True)
class TierParams:
    """One tier of base stations."""

    density: float        # BS density (nodes/m^2)
    pathloss: float       # path loss exponent, must exceed 2
    power: float          # total transmit power (linear)
    antennas: int         # transmit antennas per BS
    tx_snr: float = None  # transmit SNR (linear); defaults to `power`

    def __post_init__(self):
        if self.tx_snr is None:
            object.__setattr__(self, "tx_snr", float(self.power))
        if not self.density > 0:
            raise ConfigError("density", f"must be > 0, got {self.density}")
        if not self.pathloss > 2:
            raise ConfigError("pathloss", f"must be > 2, got {self.pathloss}")
        if not self.power > 0:
            raise ConfigError("power", f"must be > 0, got {self.power}")
        if not (isinstance(self.antennas, int) and self.antennas >= 1):
            raise ConfigError("antennas", f"must be a positive integer, got {self.antennas}")


@dataclass(frozen=True)
class NetworkConfig:
    """Full parameter set for the two-tier network with offloading.

    The pico tier carries the association bias ``bias`` (macro bias is
    fixed at 1), and ``in_dof`` is the number of beamforming degrees of
    freedom each macro-BS may spend on nulling its offloaded users.

    ``cell_shape`` and ``mean_load_slope`` are the fitted constants of the
    cell-size approximation behind the load / offloaded-user distributions;
    they are exposed for sensitivity experiments and should normally be
    left at their defaults.
    """

    macro: TierParams
    pico: TierParams
    user_density: float      # users/m^2
    bias: float              # pico association bias, linear, >= 1
    bandwidth: float         # Hz
    in_dof: int = 0          # U, nulling degrees of freedom, 0..N1-1
    cell_shape: float = 3.5
    mean_load_slope: float = 1.28

    def __post_init__(self):
        if not self.user_density > 0:
            raise ConfigError("user_density", f"must be > 0, got {self.user_density}")
        if not self.bias >= 1:
            raise ConfigError("bias", f"must be >= 1, got {self.bias}")
        if not self.bandwidth > 0:
            raise ConfigError("bandwidth", f"must be > 0, got {self.bandwidth}")
        if not self.macro.power > self.pico.power:
            raise ConfigError("macro.power", "macro power must exceed pico power")
        if not (isinstance(self.in_dof, int) and 0 <= self.in_dof <= self.macro.antennas - 1):
            raise ConfigError(
                "in_dof",
                f"must be an integer in [0, {self.macro.antennas - 1}], got {self.in_dof}",
            )

    def tier(self, j: int) -> TierParams:
        if j == MACRO:
            return self.macro
        if j == PICO:
            return self.pico
        raise ConfigError("tier", f"tier index must be 1 or 2, got {j}")

    def with_bias(self, bias: float) -> "NetworkConfig":
        return replace(self, bias=float(bias))

    def with_in_dof(self, in_dof: int) -> "NetworkConfig":
        return replace(self, in_dof=int(in_dof))
