from .idm import idm_acceleration
from .vehicle import DriverDistributions, DriverParams, Mode, Vehicle

__all__ = [
    "idm_acceleration",
    "DriverDistributions",
    "DriverParams",
    "Mode",
    "Vehicle",
]
