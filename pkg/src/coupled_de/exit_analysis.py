"""EBP (G)EXIT curves for the joint decoder and MAP upper bounds from the area theorem."""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import densities as D
from .densities import Grid, LDensity
from .ensembles import DegreeDistribution, puncture_fraction
from .joint_de import var_parts
from .sources import ERASURE, BSC_CORR, SourceModel, correlation_f, source_entropies

log = logging.getLogger(__name__)


class CurveError(RuntimeError):
    pass


@dataclass(frozen=True)
class CurvePoint:
    """One point of an EBP curve.

    ``x`` is the curve parameter (erasure mass for the BEC, message entropy for
    BMS channels), ``h_channel`` the channel parameter in entropy units and
    ``h_exit`` the (G)EXIT ordinate.
    """

    x: float
    h_channel: float
    h_exit: float


def area_target(m: SourceModel, dd: DegreeDistribution) -> float:
    """Area under the MAP (G)EXIT curve per user: gamma H(U1,U2) / (2 (1 - gamma))."""
    g = puncture_fraction(dd)
    return g * source_entropies(m)[1] / (2.0 * (1.0 - g))


# ---------------------------------------------------------------------------
# BEC: closed form

def ebp_exit_bec(dd: DegreeDistribution, m: SourceModel, samples: int = 2000) -> list[CurvePoint]:
    """Parametric EBP EXIT curve, x on the uniform grid k/samples, k = 1..samples."""
    if m.kind != ERASURE:
        raise ValueError("closed-form EBP EXIT curve needs the erasure correlation model")
    if samples < 2:
        raise ValueError("need at least two samples")
    g = puncture_fraction(dd)
    x = np.arange(1, samples + 1) / samples
    u = 1.0 - dd.rho(1.0 - x)
    h = dd.node_full(u)
    f = (1.0 - m.p) + m.p * h
    eps = (x / dd.lam(u) - g * f) / (1.0 - g)
    return [CurvePoint(float(a), float(b), float(c)) for a, b, c in zip(x, eps, h)]


def bp_threshold_from_curve(curve: Sequence[CurvePoint]) -> float:
    """Smallest channel parameter reached by the curve (the turning point of the upper branch)."""
    return min(p.h_channel for p in curve)


# ---------------------------------------------------------------------------
# area construction

def _segment_root(h_k, dh, dc, need):
    # partial trapezoid from point k towards k-1: 0.5 * (2 h_k + s dh) * s dc = need
    a, b = 0.5 * dh * dc, h_k * dc
    if abs(a) < 1e-15 * max(abs(b), 1e-300):
        return need / b
    disc = max(b * b + 4.0 * a * need, 0.0)
    roots = [(-b + math.sqrt(disc)) / (2 * a), (-b - math.sqrt(disc)) / (2 * a)]
    ok = [s for s in roots if -1e-12 <= s <= 1 + 1e-12]
    return min(ok) if ok else need / b


def _walk(curve: Sequence[CurvePoint], target: float | None):
    pts = list(curve)
    acc = 0.0
    for k in range(len(pts) - 1, 0, -1):
        c1, h1 = pts[k].h_channel, pts[k].h_exit
        c0, h0 = pts[k - 1].h_channel, pts[k - 1].h_exit
        seg = 0.5 * (h0 + h1) * (c1 - c0)
        if target is not None and acc + seg >= target and seg > 0:
            s = _segment_root(h1, h0 - h1, c1 - c0, target - acc)
            return c1 - s * (c1 - c0), k, s
        acc += seg
    return None, None, acc


def map_threshold_area(curve: Sequence[CurvePoint], m: SourceModel, dd: DegreeDistribution) -> float:
    """MAP upper bound: integrate h d(channel) from the end of the curve until the area theorem is met."""
    A = area_target(m, dd)
    c, _, total = _walk(curve, A)
    if c is None:
        raise CurveError(f"curve truncated: accumulated area {total:.6g} never reaches {A:.6g}")
    return float(c)


def area_from(curve: Sequence[CurvePoint], start: float) -> float:
    """Signed area of h d(channel) from the first curve crossing of ``start`` (walking backward) to the end."""
    pts = list(curve)
    acc = 0.0
    for k in range(len(pts) - 1, 0, -1):
        c1, h1 = pts[k].h_channel, pts[k].h_exit
        c0, h0 = pts[k - 1].h_channel, pts[k - 1].h_exit
        if (c0 - start) * (c1 - start) <= 0 and c0 != c1:
            s = (c1 - start) / (c1 - c0)
            hs = h1 + s * (h0 - h1)
            return acc + 0.5 * (h1 + hs) * (c1 - start)
        acc += 0.5 * (h0 + h1) * (c1 - c0)
    raise CurveError(f"curve never reaches channel parameter {start}")


# ---------------------------------------------------------------------------
# BMS: entropy-matching continuation on the quantized engine

@dataclass(frozen=True)
class ContinuationSettings:
    max_iterations: int = 3000
    l1_tol: float = 1e-6
    entropy_tol: float = 1e-7
    log_sigma_range: tuple[float, float] = (math.log(1e-2), math.log(1e3))


def _entropy_response(q: np.ndarray, grid: Grid) -> tuple[np.ndarray, float, float]:
    """Linear functional p -> entropy(p vconv q) as (finite weights, +inf weight, -inf weight)."""
    h, n = grid.half, grid.n
    idx = np.arange(2 * n - 1) - 2 * h  # LLR index of the full convolution
    E = np.where(idx > h, 0.0, np.where(idx < -h, 1.0, 0.0))
    inside = np.abs(idx) <= h
    E[inside] = grid.entropy_weights[idx[inside] + h]
    qf, qp, qn = q[:n], q[n], q[n + 1]
    w = np.correlate(E, qf, mode="valid") + qn
    # +inf meets finite or +inf: known; meets -inf: LLR 0
    return w, qn, 1.0


def _channel_weights(c: np.ndarray, resp) -> float:
    w, wp, wn = resp
    n = w.shape[0]
    return float(c[:n] @ w + c[n] * wp + c[n + 1] * wn)


class _Matcher:
    """Solve for the BAWGNC noise level making the next message entropy hit a target."""

    def __init__(self, grid: Grid, cs: ContinuationSettings):
        self.grid = grid
        self.cs = cs

    def solve(self, t: float, fixed_part: float, gamma: float, resp):
        lo, hi = self.cs.log_sigma_range
        g = self.grid

        def H(ls):
            c = D.bawgnc_density(math.exp(ls), g).packed
            return gamma * fixed_part + (1.0 - gamma) * _channel_weights(c, resp)

        hlo, hhi = H(lo), H(hi)
        if t <= hlo:
            return lo, False
        if t >= hhi:
            return hi, False
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            v = H(mid)
            if abs(v - t) < self.cs.entropy_tol:
                break
            if v < t:
                lo = mid
            else:
                hi = mid
        return mid, True


def _initial_density(t: float, grid: Grid) -> LDensity:
    return D.bawgnc_density(D.channel_from_entropy(D.BAWGNC, t, grid).param, grid)


def continuation_point(dd: DegreeDistribution, m: SourceModel, t: float, grid: Grid = D.COUPLED_BMS_GRID,
                       cs: ContinuationSettings = ContinuationSettings(), start: LDensity | None = None):
    """Fixed point of the symmetric joint DE with the message entropy pinned at ``t``.

    Returns (CurvePoint, density) or raises CurveError when the iteration does
    not settle or the target cannot be matched.
    """
    gamma = puncture_fraction(dd)
    matcher = _Matcher(grid, cs)
    a = start if start is not None else _initial_density(t, grid)
    ls, ok = None, False
    for it in range(1, cs.max_iterations + 1):
        lam, node = var_parts(dd, D.edge_poly_chk(dd, a))
        lam_q = D.to_quantized(lam, grid)
        side = D.to_quantized(correlation_f(m, node, grid), grid)
        resp = _entropy_response(lam_q.packed, grid)
        fixed = _channel_weights(side.packed, resp)
        ls, ok = matcher.solve(t, fixed, gamma, resp)
        ch = D.bawgnc_density(math.exp(ls), grid)
        new = D.normalize(D.var_conv(D.mix([gamma, 1.0 - gamma], [side, ch]), lam_q))
        diff = float(np.abs(D.to_quantized(new, grid).packed - D.to_quantized(a, grid).packed).sum())
        a = new
        if diff < cs.l1_tol:
            break
    else:
        raise CurveError(f"continuation at t={t:g} did not settle (last L1 step {diff:.3g})")
    if not ok:
        raise CurveError(f"message entropy {t:g} not reachable by any channel")
    sigma = math.exp(ls)
    ch = D.bawgnc_density(sigma, grid)
    kernel = D.gexit_kernel_sigma(sigma, grid)
    _, node = var_parts(dd, D.edge_poly_chk(dd, a))
    g_val = D.gexit_functional(kernel, D.to_quantized(node, grid))
    log.debug("t=%g sigma=%g iterations=%d", t, sigma, it)
    return CurvePoint(t, D.entropy(ch), g_val), a


def ebp_gexit_bms(dd: DegreeDistribution, m: SourceModel, targets: Iterable[float],
                  grid: Grid = D.COUPLED_BMS_GRID, cs: ContinuationSettings = ContinuationSettings(),
                  warm_start: bool = False, with_endpoint: bool = True) -> list[CurvePoint]:
    """EBP GEXIT curve over the BAWGNC family, one continuation per target message entropy.

    Points come back sorted by target; failed targets are dropped with a
    warning. ``with_endpoint`` appends the ignorance point (1, 1).
    """
    if m.kind != BSC_CORR:
        warnings.warn("BMS GEXIT curve with erasure correlation is experimental", stacklevel=2)
    out = []
    prev = None
    for t in sorted(float(v) for v in targets):
        try:
            pt, a = continuation_point(dd, m, t, grid, cs, prev if warm_start else None)
        except CurveError as exc:
            warnings.warn(str(exc), stacklevel=2)
            prev = None
            continue
        out.append(pt)
        prev = a
    if with_endpoint and (not out or out[-1].x < 1.0):
        out.append(CurvePoint(1.0, 1.0, 1.0))
    return out
