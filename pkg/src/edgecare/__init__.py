"""Deterministic edge/cloud simulator and gateway for robot-assisted
therapy telemetry, risk monitoring and resource scheduling."""

__version__ = "0.1.0"
