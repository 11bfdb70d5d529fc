"""Filter-based conversion between the MIMO multiple access and broadcast channels.

Converted filters keep every per-stream SINR, every per-user rate and the
total transmit power. Both cancellation-based (SIC/DPC) and purely linear
transceivers are supported, plus a serial covariance-based baseline.
"""

from .duality_covariance import cross_validate, mac_to_bc_covariance
from .duality_linear import bc_to_mac_linear, mac_to_bc_linear
from .duality_sic import ConversionResult, bc_to_mac, mac_to_bc
from .exceptions import DualityError
from .model import (
    BcFilterSet,
    ChannelSet,
    CovarianceSet,
    Domain,
    MacFilterSet,
    RateReport,
    ScalingSolution,
    SystemDimensions,
    validate,
)
from .rates import InterferenceMode, report

__version__ = "0.1.0"

__all__ = [
    "BcFilterSet",
    "ChannelSet",
    "ConversionResult",
    "CovarianceSet",
    "Domain",
    "DualityError",
    "InterferenceMode",
    "MacFilterSet",
    "RateReport",
    "ScalingSolution",
    "SystemDimensions",
    "bc_to_mac",
    "bc_to_mac_linear",
    "cross_validate",
    "mac_to_bc",
    "mac_to_bc_covariance",
    "mac_to_bc_linear",
    "report",
    "validate",
]
