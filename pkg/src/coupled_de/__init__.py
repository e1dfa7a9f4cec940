"""Density evolution and (G)EXIT analysis for joint decoding of correlated sources."""

__version__ = "0.1.0"
