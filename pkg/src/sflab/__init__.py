"""Tight-binding and truncated-Dirac models of a flux-threaded graphene
tube, plus a generic partial-spectral-flow engine."""

__version__ = "0.1.0"
