"""Entanglement costs of one-shot state merging, splitting, and distributed
encoding/decoding over networks, certified by exhaustive protocol simulation."""

__version__ = "0.1.0"
