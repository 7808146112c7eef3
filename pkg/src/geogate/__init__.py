"""Nonadiabatic geometric CZ-family gates on a tunable-coupler transmon pair."""

from . import bench, device, dynamics, geopath, qmath, zzcalc
from .device import DeviceParams, FluxDrive, mhz, reference_device
from .geopath import PulseSchedule, PulseSegment, Scheme, ideal_gate, synthesize

__all__ = [
    "bench",
    "device",
    "dynamics",
    "geopath",
    "qmath",
    "zzcalc",
    "DeviceParams",
    "FluxDrive",
    "PulseSchedule",
    "PulseSegment",
    "Scheme",
    "ideal_gate",
    "mhz",
    "reference_device",
    "synthesize",
]

__version__ = "0.1.0"
