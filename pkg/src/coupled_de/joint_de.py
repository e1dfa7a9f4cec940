"""Density evolution for the joint decoder of two punctured-systematic LDPC codes."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

from . import densities as D
from .densities import ChannelSpec, LDensity
from .ensembles import DegreeDistribution, puncture_fraction
from .sources import ERASURE, SourceModel, correlation_f

log = logging.getLogger(__name__)


class ThresholdError(RuntimeError):
    pass


@dataclass(frozen=True)
class DESettings:
    max_iterations: int = 20000
    success_error_prob: float = 1e-10
    stall_delta: float = 1e-12

    def __post_init__(self):
        if self.max_iterations <= 0 or self.success_error_prob <= 0 or self.stall_delta <= 0:
            raise ValueError("DE settings must be positive")


@dataclass(frozen=True)
class JointDEState:
    a: LDensity
    b: LDensity
    iteration: int = 0


@dataclass(frozen=True)
class DEResult:
    converged: bool
    final: JointDEState
    iterations: int
    error_probs: tuple[float, float] = field(default=(0.5, 0.5))


def var_parts(dd: DegreeDistribution, r: LDensity) -> tuple[LDensity, LDensity]:
    """(lambda(r), L(r)) sharing the variable-node convolution powers of r."""
    top = max(dd.lambda_coeffs)
    powers = [D.DELTA_0, r]
    for _ in range(top - 1):
        powers.append(D.var_conv(powers[-1], r))
    lam = [(c, powers[i - 1]) for i, c in dd.lambda_coeffs.items()]
    node = [(c, powers[i]) for i, c in dd.node_coeffs.items()]

    def combine(terms):
        if len(terms) == 1:
            return terms[0][1]
        return D.mix([c for c, _ in terms], [t for _, t in terms])

    return combine(lam), combine(node)


def joint_update(a, b, c1, c2, m: SourceModel, dd: DegreeDistribution, gamma: float, grid: D.Grid):
    """One parallel DE iteration on densities; channel densities are given directly."""

    def new(own_parts, other_parts, ch):
        side = correlation_f(m, other_parts[1], grid)
        return D.normalize(D.var_conv(D.mix([gamma, 1.0 - gamma], [side, ch]), own_parts[0]))

    pa = var_parts(dd, D.edge_poly_chk(dd, a))
    if b is a and c1 is c2:
        out = new(pa, pa, c1)
        return out, out
    pb = var_parts(dd, D.edge_poly_chk(dd, b))
    return new(pa, pb, c1), new(pb, pa, c2)


def de_step(state: JointDEState, ch1: ChannelSpec, ch2: ChannelSpec, m: SourceModel,
            dd: DegreeDistribution, grid: D.Grid = D.DEFAULT_GRID) -> JointDEState:
    gamma = puncture_fraction(dd)
    c1 = D.channel_density(ch1, grid)
    c2 = c1 if ch2 == ch1 else D.channel_density(ch2, grid)
    a, b = joint_update(state.a, state.b, c1, c2, m, dd, gamma, grid)
    return JointDEState(a, b, state.iteration + 1)


def _bec_scalar_run(e1, e2, m, dd, gamma, settings):
    # same recursion as joint_update restricted to erasure masses, in plain floats
    p = m.p
    lam = list(dd.lambda_coeffs.items())
    rho = list(dd.rho_coeffs.items())
    node = list(dd.node_coeffs.items())
    x = y = 1.0
    prev = None
    for it in range(1, settings.max_iterations + 1):
        rx = 1.0 - sum(c * (1.0 - x) ** (i - 1) for i, c in rho)
        ry = 1.0 - sum(c * (1.0 - y) ** (i - 1) for i, c in rho)
        lx = sum(c * rx ** (i - 1) for i, c in lam)
        ly = sum(c * ry ** (i - 1) for i, c in lam)
        fx = (1.0 - p) + p * sum(c * ry**i for i, c in node)
        fy = (1.0 - p) + p * sum(c * rx**i for i, c in node)
        x, y = (gamma * fx + (1.0 - gamma) * e1) * lx, (gamma * fy + (1.0 - gamma) * e2) * ly
        pe = 0.5 * max(x, y)
        if pe < settings.success_error_prob:
            return True, x, y, it
        mean = 0.25 * (x + y)
        if prev is not None and abs(mean - prev) < settings.stall_delta:
            return False, x, y, it
        prev = mean
    return False, x, y, settings.max_iterations


def run_de(ch1: ChannelSpec, ch2: ChannelSpec, m: SourceModel, dd: DegreeDistribution,
           settings: DESettings = DESettings(), grid: D.Grid = D.DEFAULT_GRID,
           fast: bool = True) -> DEResult:
    """Iterate from total ignorance until success, stall or budget exhaustion."""
    gamma = puncture_fraction(dd)
    if fast and ch1.family == D.BEC and ch2.family == D.BEC and m.kind == ERASURE:
        ok, x, y, it = _bec_scalar_run(ch1.param, ch2.param, m, dd, gamma, settings)
        st = JointDEState(D.ErasureMix(x), D.ErasureMix(y), it)
        return DEResult(ok, st, it, (0.5 * x, 0.5 * y))

    c1 = D.channel_density(ch1, grid)
    c2 = c1 if ch2 == ch1 else D.channel_density(ch2, grid)
    a = b = D.DELTA_0
    prev = None
    for it in range(1, settings.max_iterations + 1):
        a, b = joint_update(a, b, c1, c2, m, dd, gamma, grid)
        pa = D.error_prob(a)
        pb = pa if b is a else D.error_prob(b)
        if max(pa, pb) < settings.success_error_prob:
            return DEResult(True, JointDEState(a, b, it), it, (pa, pb))
        mean = 0.5 * (pa + pb)
        if prev is not None and abs(mean - prev) < settings.stall_delta:
            return DEResult(False, JointDEState(a, b, it), it, (pa, pb))
        prev = mean
    return DEResult(False, JointDEState(a, b, settings.max_iterations), settings.max_iterations, (pa, pb))


def bisect_threshold(converges: Callable[[float], bool], lo: float, hi: float, tol: float,
                     better: str = "lower", check_ends: bool = True) -> float:
    """Bisection for the boundary between converging and failing parameters.

    ``better="lower"`` means small parameters are easier (erasure rate,
    entropy); ``"higher"`` is for gains such as fading coefficients.
    """
    good, bad = (lo, hi) if better == "lower" else (hi, lo)
    if check_ends:
        if not converges(good):
            raise ThresholdError(f"no threshold in range: DE fails at the good end {good}")
        if converges(bad):
            raise ThresholdError(f"no threshold in range: DE converges at the bad end {bad}")
    while abs(bad - good) >= tol:
        mid = 0.5 * (good + bad)
        if converges(mid):
            good = mid
        else:
            bad = mid
        log.debug("bracket [%g, %g]", min(good, bad), max(good, bad))
    return 0.5 * (good + bad)


def channel_at(family: str, h: float, grid: D.Grid) -> ChannelSpec:
    """Channel of ``family`` at entropy ``h`` (identity map for the BEC)."""
    return D.channel_from_entropy(family, h, grid)


def bp_threshold_symmetric(family: str, m: SourceModel, dd: DegreeDistribution,
                           settings: DESettings = DESettings(), tol: float | None = None,
                           grid: D.Grid = D.DEFAULT_GRID, bracket: tuple[float, float] = (0.0, 1.0)) -> float:
    """BP threshold on the symmetric line, in channel-entropy units (= erasure rate for the BEC)."""
    if tol is None:
        tol = 1e-4 if family == D.BEC else 1e-3

    def ok(h):
        ch = channel_at(family, h, grid)
        return run_de(ch, ch, m, dd, settings, grid).converged

    return bisect_threshold(ok, bracket[0], bracket[1], tol)


def bp_threshold_second(family: str, h1: float, m: SourceModel, dd: DegreeDistribution,
                        settings: DESettings = DESettings(), tol: float | None = None,
                        grid: D.Grid = D.DEFAULT_GRID, bracket: tuple[float, float] = (0.0, 1.0)) -> float:
    """Largest user-2 channel entropy that still decodes with user 1 fixed at ``h1``."""
    if tol is None:
        tol = 1e-4 if family == D.BEC else 1e-3
    ch1 = channel_at(family, h1, grid)

    def ok(h):
        return run_de(ch1, channel_at(family, h, grid), m, dd, settings, grid).converged

    return bisect_threshold(ok, bracket[0], bracket[1], tol)
