"""Finite-size key rates and protocol simulation for device-independent QKD and
randomness expansion based on entropy accumulation."""

__version__ = "0.1.0"
