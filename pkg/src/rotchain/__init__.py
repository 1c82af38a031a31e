"""Simulation and entanglement accounting for instantaneous nonlocal
measurements built from teleportation-based Pauli rotation chains."""

__version__ = "0.1.0"
