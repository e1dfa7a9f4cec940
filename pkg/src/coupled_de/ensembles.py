"""Degree distributions and ensemble bookkeeping for punctured LDPC ensembles."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

_SUM_TOL = 1e-12


class EnsembleError(ValueError):
    pass


def _clean(coeffs: Mapping[int, float], name: str) -> dict[int, float]:
    out = {}
    for deg, c in coeffs.items():
        deg = int(deg)
        c = float(c)
        if c < 0:
            raise EnsembleError(f"{name}: negative coefficient {c} for degree {deg}")
        if c == 0:
            continue
        if deg < 2:
            raise EnsembleError(f"{name}: degree {deg} < 2")
        out[deg] = c
    if not out:
        raise EnsembleError(f"{name}: empty distribution")
    total = sum(out.values())
    if abs(total - 1.0) > _SUM_TOL:
        raise EnsembleError(f"{name}: coefficients sum to {total}, not 1")
    return dict(sorted(out.items()))


@dataclass(frozen=True)
class DegreeDistribution:
    """Edge-perspective degree distribution pair (lambda, rho).

    ``lambda_coeffs[i]`` is the fraction of edges attached to variable nodes of
    degree ``i``; ``rho_coeffs`` likewise for check nodes.
    """

    lambda_coeffs: Mapping[int, float]
    rho_coeffs: Mapping[int, float]
    _node: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "lambda_coeffs", _clean(self.lambda_coeffs, "lambda"))
        object.__setattr__(self, "rho_coeffs", _clean(self.rho_coeffs, "rho"))
        w = {i: c / i for i, c in self.lambda_coeffs.items()}
        s = sum(w.values())
        object.__setattr__(self, "_node", {i: v / s for i, v in w.items()})

    @classmethod
    def regular(cls, l: int, r: int) -> "DegreeDistribution":
        return cls({l: 1.0}, {r: 1.0})

    @property
    def is_regular(self) -> bool:
        return len(self.lambda_coeffs) == 1 and len(self.rho_coeffs) == 1

    @property
    def node_coeffs(self) -> dict[int, float]:
        return dict(self._node)

    # polynomial evaluation on scalars or arrays (erasure arithmetic)
    def lam(self, x):
        x = np.asarray(x, dtype=float)
        return sum(c * x ** (i - 1) for i, c in self.lambda_coeffs.items())

    def rho(self, x):
        x = np.asarray(x, dtype=float)
        return sum(c * x ** (i - 1) for i, c in self.rho_coeffs.items())

    def node_full(self, x):
        """L(x) = sum_i L_i x^i (full variable-node degree)."""
        x = np.asarray(x, dtype=float)
        return sum(c * x**i for i, c in self._node.items())

    def lambda_integral(self) -> float:
        return sum(c / i for i, c in self.lambda_coeffs.items())

    def rho_integral(self) -> float:
        return sum(c / i for i, c in self.rho_coeffs.items())


def node_perspective(dd: DegreeDistribution) -> dict[int, float]:
    """Fraction ``L_i`` of variable nodes with degree ``i``."""
    return dd.node_coeffs


def design_rate(dd: DegreeDistribution) -> float:
    """Mother-code design rate ``1 - avg_var_degree / avg_check_degree``."""
    l_avg = sum(i * c for i, c in node_perspective(dd).items())
    rw = {i: c / i for i, c in dd.rho_coeffs.items()}
    s = sum(rw.values())
    r_avg = sum(i * v / s for i, v in rw.items())
    return 1.0 - l_avg / r_avg


def puncture_fraction(dd: DegreeDistribution) -> float:
    """Fraction of variable nodes that are punctured systematic bits.

    Raises EnsembleError when the ensemble has no systematic part to puncture.
    """
    g = 1.0 - dd.rho_integral() / dd.lambda_integral()
    if g <= 1e-12:  # rate-0 mother code up to round-off
        raise EnsembleError(f"ensemble is not puncturable (fraction {g:.6g} <= 0)")
    return g


def punctured_rate(dd: DegreeDistribution) -> float:
    """Rate of the transmitted code: k systematic bits over n sent bits."""
    g = puncture_fraction(dd)
    return g / (1.0 - g)


@dataclass(frozen=True)
class CoupledSpec:
    """The (l, r, L, w) spatially-coupled ensemble, positions -L..L."""

    l: int
    r: int
    L: int
    w: int

    def __post_init__(self):
        if self.l < 3:
            raise EnsembleError(f"coupled ensemble needs l >= 3, got {self.l}")
        if self.r <= self.l:
            raise EnsembleError(f"coupled ensemble needs r > l, got r={self.r}, l={self.l}")
        if self.L < 1:
            raise EnsembleError(f"coupled ensemble needs L >= 1, got {self.L}")
        if not 1 <= self.w <= 2 * self.L + 1:
            raise EnsembleError(f"smoothing width w={self.w} outside [1, 2L+1]")

    @property
    def n_positions(self) -> int:
        return 2 * self.L + 1

    @property
    def base(self) -> DegreeDistribution:
        return DegreeDistribution.regular(self.l, self.r)

    @property
    def gamma(self) -> float:
        return puncture_fraction(self.base)


def parse_ensemble(text: str) -> DegreeDistribution | CoupledSpec:
    """Parse ``"l,r"`` (regular) or ``"l,r,L,w"`` (coupled)."""
    parts = [p.strip() for p in text.split(",")]
    try:
        vals = [int(p) for p in parts]
    except ValueError:
        raise EnsembleError(f"malformed ensemble spec {text!r}") from None
    if len(vals) == 2:
        return DegreeDistribution.regular(*vals)
    if len(vals) == 4:
        return CoupledSpec(*vals)
    raise EnsembleError(f"malformed ensemble spec {text!r}: expected 'l,r' or 'l,r,L,w'")
