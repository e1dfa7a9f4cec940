"""Correlated-source models: entropies and the correlation-node density map."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import densities as D

ERASURE = "erasure"
BSC_CORR = "bsc"


def binary_entropy(p: float) -> float:
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


@dataclass(frozen=True)
class SourceModel:
    """Two correlated uniform binary sources.

    ``erasure``: with probability p the sources are identical, otherwise
    independent (the decoder knows which). ``bsc``: U2 = U1 + Z with
    Z ~ Bernoulli(p); note this p is the error probability of the virtual
    correlation channel.
    """

    kind: str
    p: float

    def __post_init__(self):
        kind = self.kind.lower()
        if kind not in (ERASURE, BSC_CORR):
            raise ValueError(f"unknown source model {self.kind!r}")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"correlation probability {self.p} outside [0, 1]")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "p", float(self.p))

    def __str__(self):
        return f"{self.kind}:{self.p:g}"


def parse_source(text: str) -> SourceModel:
    kind, sep, val = text.partition(":")
    if not sep:
        raise ValueError(f"malformed source spec {text!r}; expected e.g. 'erasure:0.5'")
    try:
        return SourceModel(kind.strip(), float(val))
    except ValueError as exc:
        raise ValueError(f"malformed source spec {text!r}: {exc}") from None


def source_entropies(m: SourceModel) -> tuple[float, float]:
    """(H(U1|U2), H(U1,U2)); the model is symmetric so H(U2|U1) = H(U1|U2)."""
    if m.kind == ERASURE:
        return 1.0 - m.p, 2.0 - m.p
    h = binary_entropy(m.p)
    return h, 1.0 + h


def correlation_f(m: SourceModel, a: D.LDensity, grid: D.Grid = D.DEFAULT_GRID) -> D.LDensity:
    """Density sent from a correlation node to the other user's systematic bit.

    ``grid`` is only consulted when BSC correlation meets an ErasureMix input.
    """
    if m.kind == ERASURE:
        # check present with probability p, otherwise nothing is learned
        return D.mix([1.0 - m.p, m.p], [D.DELTA_0, a])
    if m.p in (0.0, 1.0):
        return a
    if m.p == 0.5:
        return D.DELTA_0
    mag = abs(math.log((1.0 - m.p) / m.p))
    if isinstance(a, D.ErasureMix):
        # erasure part stays Delta_0; the known part becomes the BSC density
        return D.mix([a.erasure, 1.0 - a.erasure], [D.DELTA_0, D.bsc_density(m.p, grid)])
    return D.Quantized(a.grid, D.cconv_point_packed(a.packed, mag, a.grid))


def correlation_f_rows(m: SourceModel, P: np.ndarray, grid: D.Grid) -> np.ndarray:
    """Row-wise correlation map on stacked packed densities."""
    if m.kind == ERASURE:
        return (1.0 - m.p) * D.erasure_packed(1.0, grid) + m.p * P
    if m.p in (0.0, 1.0):
        return P.copy()
    if m.p == 0.5:
        return np.broadcast_to(D.erasure_packed(1.0, grid), P.shape).copy()
    mag = abs(math.log((1.0 - m.p) / m.p))
    return np.stack([D.cconv_point_packed(row, mag, grid) for row in P])

