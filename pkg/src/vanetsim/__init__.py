"""Deterministic discrete-event simulator and protocol library for warning
dissemination in urban vehicular/pedestrian ad hoc networks."""

__version__ = "0.1.0"
