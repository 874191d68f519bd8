"""Spectrum-sharing simulator for terrestrial downlinks next to LEO uplinks."""

__version__ = "0.1.0"
