"""Joint density evolution for (l, r, L, w) spatially-coupled ensembles.

Positions run over -L..L (stored at indices 0..2L). Variable node i feeds the
checks at positions i..i+w-1 and check c reads variables c-w+1..c, so check
positions run over -L..L+w-1. Anything outside -L..L is a known bit (Delta_inf).

Three implementations share the recursion:

* ``g_op`` / ``gamma_op`` / ``coupled_de_step`` work on LDensity objects and
  follow the displayed operators literally (reference path).
* ``_ErasureEngine`` runs the BEC recursion on float arrays, batched over many
  channel pairs at once (used for thresholds and region sweeps).
* ``_QuantizedEngine`` runs on stacked packed rows and optionally exploits the
  mirror symmetry a_i = a_{-i} of symmetric runs.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import densities as D
from .densities import ChannelSpec, Grid, LDensity
from .ensembles import CoupledSpec
from .exit_analysis import (ContinuationSettings, CurveError, CurvePoint, _channel_weights,
                            _entropy_response, _initial_density)
from .joint_de import DESettings, ThresholdError, bisect_threshold, channel_at
from .sources import ERASURE, SourceModel, correlation_f, correlation_f_rows

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CoupledState:
    a: tuple
    b: tuple
    spec: CoupledSpec
    iteration: int = 0

    def __post_init__(self):
        n = self.spec.n_positions
        if len(self.a) != n or len(self.b) != n:
            raise ValueError(f"state needs {n} positions per user")

    @classmethod
    def initial(cls, spec: CoupledSpec) -> "CoupledState":
        row = (D.DELTA_0,) * spec.n_positions
        return cls(row, row, spec)

    def at(self, user: int, i: int) -> LDensity:
        """Density at position i in -L..L; Delta_inf outside."""
        L = self.spec.L
        if not -L <= i <= L:
            return D.DELTA_INF
        return (self.a if user == 1 else self.b)[i + L]

    def window(self, user: int, i: int) -> list:
        w = self.spec.w
        return [self.at(user, i + m) for m in range(-(w - 1), w)]


@dataclass(frozen=True)
class CoupledResult:
    converged: bool
    iterations: int
    pe1: np.ndarray
    pe2: np.ndarray
    state: object = field(default=None, repr=False)


# ---------------------------------------------------------------------------
# reference operators on LDensity objects

def _inner(window: Sequence[LDensity], spec: CoupledSpec) -> LDensity:
    w = spec.w
    if len(window) != 2 * w - 1:
        raise ValueError(f"window must hold 2w-1 = {2 * w - 1} densities")
    outer = []
    for j in range(w):
        mixed = D.mix([1.0 / w] * w, [window[j - k + w - 1] for k in range(w)])
        outer.append(D.chk_power(mixed, spec.r - 1))
    return D.mix([1.0 / w] * w, outer)


def g_op(window: Sequence[LDensity], spec: CoupledSpec) -> LDensity:
    """Variable-to-check density at the window centre, outer power l-1."""
    return D.var_power(_inner(window, spec), spec.l - 1)


def gamma_op(window: Sequence[LDensity], spec: CoupledSpec) -> LDensity:
    """Full-node density at the window centre, outer power l."""
    return D.var_power(_inner(window, spec), spec.l)


def coupled_de_step(state: CoupledState, ch1: ChannelSpec, ch2: ChannelSpec, m: SourceModel,
                    gamma: float | None = None, grid: Grid = D.COUPLED_BMS_GRID) -> CoupledState:
    """One flooding iteration over all positions, both users, from the previous state."""
    spec = state.spec
    gamma = spec.gamma if gamma is None else gamma
    c1, c2 = D.channel_density(ch1, grid), D.channel_density(ch2, grid)
    L = spec.L
    new_a, new_b = [], []
    for i in range(-L, L + 1):
        wa, wb = state.window(1, i), state.window(2, i)
        ga, gb = g_op(wa, spec), g_op(wb, spec)
        fa = correlation_f(m, gamma_op(wb, spec), grid)
        fb = correlation_f(m, gamma_op(wa, spec), grid)
        new_a.append(D.normalize(D.var_conv(D.mix([gamma, 1 - gamma], [fa, c1]), ga)))
        new_b.append(D.normalize(D.var_conv(D.mix([gamma, 1 - gamma], [fb, c2]), gb)))
    return CoupledState(tuple(new_a), tuple(new_b), spec, state.iteration + 1)


# ---------------------------------------------------------------------------
# batched erasure engine

class _ErasureEngine:
    """Coupled BEC recursion on arrays of shape (batch, 2L+1)."""

    def __init__(self, spec: CoupledSpec, p: float, gamma: float):
        self.spec, self.p, self.gamma = spec, p, gamma

    def _windows(self, x):
        spec = self.spec
        w = spec.w
        pad = np.zeros(x.shape[:-1] + (w - 1,))
        xp = np.concatenate([pad, x, pad], axis=-1)
        cs = np.concatenate([np.zeros(x.shape[:-1] + (1,)), np.cumsum(xp, axis=-1)], axis=-1)
        y = (cs[..., w:] - cs[..., :-w]) / w  # check positions -L..L+w-1
        z = 1.0 - (1.0 - y) ** (spec.r - 1)
        cz = np.concatenate([np.zeros(z.shape[:-1] + (1,)), np.cumsum(z, axis=-1)], axis=-1)
        u = (cz[..., w:] - cz[..., :-w]) / w
        return u

    def step(self, x, y, e1, e2):
        l, p, g = self.spec.l, self.p, self.gamma
        ux, uy = self._windows(x), self._windows(y)
        gx, gy = ux ** (l - 1), uy ** (l - 1)
        fx = (1.0 - p) + p * gy * uy
        fy = (1.0 - p) + p * gx * ux
        return (g * fx + (1 - g) * e1) * gx, (g * fy + (1 - g) * e2) * gy

    def run(self, e1, e2, settings: DESettings, progress=None):
        """Returns (converged, iterations, x, y) per batch entry.

        ``progress(it, pe1, pe2)`` is called for single-entry batches only.
        """
        e1 = np.atleast_1d(np.asarray(e1, dtype=float))[:, None]
        e2 = np.atleast_1d(np.asarray(e2, dtype=float))[:, None]
        B = max(e1.shape[0], e2.shape[0])
        e1, e2 = np.broadcast_to(e1, (B, 1)), np.broadcast_to(e2, (B, 1))
        n = self.spec.n_positions
        x = np.ones((B, n))
        y = np.ones((B, n))
        done = np.zeros(B, bool)
        ok = np.zeros(B, bool)
        iters = np.full(B, settings.max_iterations)
        prev = np.full(B, np.nan)
        X, Y = x.copy(), y.copy()
        active = np.arange(B)
        for it in range(1, settings.max_iterations + 1):
            x, y = self.step(x, y, e1[active], e2[active])
            if progress is not None and B == 1:
                progress(it, 0.5 * x[0], 0.5 * y[0])
            pe = 0.5 * np.maximum(x.max(axis=1), y.max(axis=1))
            mean = 0.25 * (x.mean(axis=1) + y.mean(axis=1))
            win = pe < settings.success_error_prob
            stall = ~win & (np.abs(mean - prev[active]) < settings.stall_delta)
            fin = win | stall
            if fin.any():
                idx = active[fin]
                ok[idx] = win[fin]
                done[idx] = True
                iters[idx] = it
                X[idx], Y[idx] = x[fin], y[fin]
                keep = ~fin
                active, x, y = active[keep], x[keep], y[keep]
                mean = mean[keep]
                if active.size == 0:
                    break
            prev[active] = mean
        if active.size:
            X[active], Y[active] = x, y
        return ok, iters, X, Y


# ---------------------------------------------------------------------------
# quantized engine on stacked rows

# rows whose +inf mass is within round-off of 1 are treated as Delta_inf
_KNOWN = 1.0 - 1e-15


def _chk_pow_row(p, k, grid):
    n = grid.n
    if p[n] >= _KNOWN:
        return p
    if k == 1:
        return p
    result, base = None, p
    while k:
        if k & 1:
            result = base if result is None else D.cconv_packed(result, base, grid)
        k >>= 1
        if k:
            base = D.cconv_packed(base, base, grid)
    return result


def coupled_parts(X: np.ndarray, spec: CoupledSpec, grid: Grid, mirror: bool = False):
    """(g rows, Gamma rows) for every position of stacked packed rows ``X``.

    ``mirror`` computes only positions 0..L and reflects, valid when X is
    symmetric about the centre.
    """
    w, N = spec.w, spec.n_positions
    pad = np.broadcast_to(D.erasure_packed(0.0, grid), (w - 1, X.shape[1]))
    Xp = np.concatenate([pad, X, pad])
    n_chk = N + w - 1
    # check row c averages padded rows c..c+w-1; it mirrors to n_chk-1-c
    need = range((n_chk - 1) // 2, n_chk) if mirror else range(n_chk)
    Z = np.empty((n_chk, X.shape[1]))
    for c in need:
        Z[c] = _chk_pow_row(Xp[c:c + w].mean(axis=0), spec.r - 1, grid)
    if mirror:
        for c in range((n_chk - 1) // 2):
            Z[c] = Z[n_chk - 1 - c]
    G = np.empty_like(X)
    Gam = np.empty_like(X)
    for i in (range(spec.L, N) if mirror else range(N)):
        u = Z[i:i + w].mean(axis=0)
        if u[grid.n] >= _KNOWN:
            G[i] = Gam[i] = u
            continue
        g = u
        for _ in range(spec.l - 2):
            g = D.vconv_packed(g, u, grid)
        G[i] = g
        Gam[i] = D.vconv_packed(g, u, grid)
    if mirror:
        G[:spec.L] = G[N - 1:spec.L:-1]
        Gam[:spec.L] = Gam[N - 1:spec.L:-1]
    return G, Gam


class _QuantizedEngine:
    def __init__(self, spec: CoupledSpec, m: SourceModel, gamma: float, grid: Grid):
        self.spec, self.m, self.gamma, self.grid = spec, m, gamma, grid

    def parts(self, X: np.ndarray, mirror: bool = False):
        return coupled_parts(X, self.spec, self.grid, mirror)

    def combine(self, G, Gam_other, c):
        grid, g = self.grid, self.gamma
        F = correlation_f_rows(self.m, Gam_other, grid)
        out = np.empty_like(G)
        for i in range(G.shape[0]):
            if G[i, grid.n] >= _KNOWN:
                out[i] = G[i]
                continue
            out[i] = D.vconv_packed(g * F[i] + (1 - g) * c, G[i], grid)
        return D.normalize_rows(out)

    def step(self, X, Y, c1, c2, shared: bool):
        if shared:
            G, Gam = self.parts(X, mirror=True)
            X2 = self.combine(G, Gam, c1)
            return X2, X2
        Ga, Gama = self.parts(X)
        Gb, Gamb = self.parts(Y)
        return self.combine(Ga, Gamb, c1), self.combine(Gb, Gama, c2)


def _packed_channel(ch: ChannelSpec, grid: Grid) -> np.ndarray:
    return D.to_quantized(D.channel_density(ch, grid), grid).packed


def run_coupled_de(spec: CoupledSpec, ch1: ChannelSpec, ch2: ChannelSpec, m: SourceModel,
                   settings: DESettings = DESettings(), grid: Grid = D.COUPLED_BMS_GRID,
                   gamma: float | None = None, progress=None) -> CoupledResult:
    """Flooding DE from all-Delta_0 until success, stall or budget exhaustion."""
    gamma = spec.gamma if gamma is None else gamma
    if ch1.family == D.BEC and ch2.family == D.BEC and m.kind == ERASURE:
        eng = _ErasureEngine(spec, m.p, gamma)
        ok, it, x, y = eng.run([ch1.param], [ch2.param], settings, progress)
        return CoupledResult(bool(ok[0]), int(it[0]), 0.5 * x[0], 0.5 * y[0], (x[0], y[0]))
    eng = _QuantizedEngine(spec, m, gamma, grid)
    c1 = _packed_channel(ch1, grid)
    c2 = c1 if ch2 == ch1 else _packed_channel(ch2, grid)
    shared = ch1 == ch2
    N = spec.n_positions
    X = np.broadcast_to(D.erasure_packed(1.0, grid), (N, grid.n + 2)).copy()
    Y = X
    prev = None
    for it in range(1, settings.max_iterations + 1):
        X, Y = eng.step(X, Y, c1, c2, shared)
        pe1 = D.rows_error_prob(X, grid)
        pe2 = pe1 if shared else D.rows_error_prob(Y, grid)
        if progress is not None:
            progress(it, pe1, pe2)
        if max(pe1.max(), pe2.max()) < settings.success_error_prob:
            return CoupledResult(True, it, pe1, pe2, (X, Y))
        mean = 0.5 * (pe1.mean() + pe2.mean())
        if prev is not None and abs(mean - prev) < settings.stall_delta:
            return CoupledResult(False, it, pe1, pe2, (X, Y))
        prev = mean
    return CoupledResult(False, settings.max_iterations, pe1, pe2, (X, Y))


def coupled_bec_converges(spec: CoupledSpec, eps1, eps2, m: SourceModel,
                          settings: DESettings = DESettings(), gamma: float | None = None) -> np.ndarray:
    """Convergence flags for a batch of BEC parameter pairs (erasure correlation)."""
    if m.kind != ERASURE:
        raise ValueError("the batched BEC engine needs erasure correlation")
    gamma = spec.gamma if gamma is None else gamma
    ok, _, _, _ = _ErasureEngine(spec, m.p, gamma).run(eps1, eps2, settings)
    return ok


def coupled_bp_threshold_symmetric(family: str, m: SourceModel, spec: CoupledSpec, gamma: float | None = None,
                                   settings: DESettings = DESettings(), tol: float | None = None,
                                   grid: Grid = D.COUPLED_BMS_GRID,
                                   bracket: tuple[float, float] = (0.0, 1.0)) -> float:
    if tol is None:
        tol = 1e-4 if family == D.BEC else 1e-3

    def ok(h):
        ch = channel_at(family, h, grid)
        res = run_coupled_de(spec, ch, ch, m, settings, grid, gamma)
        log.info("coupled %s h=%.6f converged=%s iterations=%d", family, h, res.converged, res.iterations)
        return res.converged

    return bisect_threshold(ok, bracket[0], bracket[1], tol)


def coupled_bp_threshold_second(family: str, h1: float, m: SourceModel, spec: CoupledSpec,
                                gamma: float | None = None, settings: DESettings = DESettings(),
                                tol: float | None = None, grid: Grid = D.COUPLED_BMS_GRID,
                                bracket: tuple[float, float] = (0.0, 1.0)) -> float:
    """Largest user-2 channel entropy that decodes with user 1 fixed at ``h1``."""
    if tol is None:
        tol = 1e-4 if family == D.BEC else 1e-3
    ch1 = channel_at(family, h1, grid)

    def ok(h):
        return run_coupled_de(spec, ch1, channel_at(family, h, grid), m, settings, grid, gamma).converged

    return bisect_threshold(ok, bracket[0], bracket[1], tol)


# ---------------------------------------------------------------------------
# position-averaged EBP GEXIT curve

def coupled_continuation_point(spec: CoupledSpec, m: SourceModel, t: float, grid: Grid = D.COUPLED_BMS_GRID,
                               cs: ContinuationSettings = ContinuationSettings(), gamma: float | None = None,
                               start: np.ndarray | None = None):
    """Fixed point of the symmetric coupled DE with the position-averaged entropy pinned at ``t``."""
    gamma = spec.gamma if gamma is None else gamma
    eng = _QuantizedEngine(spec, m, gamma, grid)
    N = spec.n_positions
    if start is None:
        row = D.to_quantized(_initial_density(t, grid), grid).packed
        X = np.broadcast_to(row, (N, grid.n + 2)).copy()
    else:
        X = start.copy()
    lo, hi = cs.log_sigma_range
    ok = False
    for it in range(1, cs.max_iterations + 1):
        G, Gam = eng.parts(X, mirror=True)
        F = correlation_f_rows(m, Gam, grid)
        resps = [_entropy_response(G[i], grid) for i in range(N)]
        fixed = np.mean([_channel_weights(F[i], resps[i]) for i in range(N)])
        w = np.mean([r[0] for r in resps], axis=0)
        resp = (w, float(np.mean([r[1] for r in resps])), 1.0)

        def H(ls):
            c = D.bawgnc_density(math.exp(ls), grid).packed
            return gamma * fixed + (1 - gamma) * _channel_weights(c, resp)

        a, b = lo, hi
        if t <= H(a):
            ls, ok = a, False
        elif t >= H(b):
            ls, ok = b, False
        else:
            ok = True
            for _ in range(200):
                ls = 0.5 * (a + b)
                v = H(ls)
                if abs(v - t) < cs.entropy_tol:
                    break
                a, b = (ls, b) if v < t else (a, ls)
        c = D.bawgnc_density(math.exp(ls), grid).packed
        new = eng.combine(G, Gam, c)
        diff = float(np.abs(new - X).sum(axis=1).max())
        X = new
        if diff < cs.l1_tol:
            break
    else:
        raise CurveError(f"coupled continuation at t={t:g} did not settle (last L1 step {diff:.3g})")
    if not ok:
        raise CurveError(f"average message entropy {t:g} not reachable by any channel")
    sigma = math.exp(ls)
    kernel = D.gexit_kernel_sigma(sigma, grid)
    _, Gam = eng.parts(X, mirror=True)
    G_avg = float(np.mean([Gam[i, :grid.n] @ kernel.values + Gam[i, grid.n + 1] * kernel.at_neg_inf
                           for i in range(N)]))
    ch = D.bawgnc_density(sigma, grid)
    return CurvePoint(t, D.entropy(ch), G_avg), X


def coupled_ebp_gexit(spec: CoupledSpec, m: SourceModel, targets: Iterable[float],
                      grid: Grid = D.COUPLED_BMS_GRID, cs: ContinuationSettings = ContinuationSettings(),
                      gamma: float | None = None, warm_start: bool = False,
                      with_endpoint: bool = True) -> list[CurvePoint]:
    """Position-averaged EBP GEXIT curve; failed targets are dropped with a warning."""
    out, prev = [], None
    for t in sorted(float(v) for v in targets):
        try:
            pt, X = coupled_continuation_point(spec, m, t, grid, cs, gamma, prev if warm_start else None)
        except CurveError as exc:
            warnings.warn(str(exc), stacklevel=2)
            prev = None
            continue
        out.append(pt)
        prev = X
    if with_endpoint and (not out or out[-1].x < 1.0):
        out.append(CurvePoint(1.0, 1.0, 1.0))
    return out


def error_profile(result: CoupledResult, spec: CoupledSpec):
    """Rows (position, pe1, pe2) for wave-front inspection."""
    L = spec.L
    return [(i - L, float(result.pe1[i]), float(result.pe2[i])) for i in range(spec.n_positions)]
