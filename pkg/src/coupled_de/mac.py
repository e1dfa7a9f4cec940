"""Joint DE for two LDPC-coded users on a real Gaussian multiple-access channel.

Y = h1 X1 + h2 X2 + Z with Z ~ N(0, 1). Each user's code is a random coset, so
the function node sees a uniformly distributed interferer symbol and its
output density is symmetric. The interferer's message density b is
conditioned on the interferer sending +1; when it actually sends -1 the
message is the negated draw.

The function node is realised either by Monte Carlo (``"mc"``) or by a
deterministic transition matrix computed from a fine noise quadrature
(``"quadrature"``); the matrix form is what makes coupled runs affordable.
"""
from __future__ import annotations

import functools
import logging
from dataclasses import dataclass
from typing import Union

import numpy as np

from . import densities as D
from .densities import Grid, LDensity
from .ensembles import CoupledSpec, DegreeDistribution
from .joint_de import DEResult, DESettings, JointDEState, bisect_threshold, var_parts
from .spatial_coupling import CoupledResult, coupled_parts

log = logging.getLogger(__name__)

MC = "mc"
QUADRATURE = "quadrature"
_BIG = 1e4  # stands in for an infinite interferer LLR inside logaddexp

MAC_GRID = Grid(25.0, 2048)
# coupled runs cost ~0.1 s per iteration here against ~0.35 s at 2048 bins; the
# uncoupled (3,6) threshold moves by under 1e-3 between the two
MAC_COUPLED_GRID = Grid(25.0, 1024)


def default_grid(system) -> Grid:
    return MAC_COUPLED_GRID if isinstance(system, CoupledSpec) else MAC_GRID


@dataclass(frozen=True)
class MacSpec:
    h1: float
    h2: float
    mc_samples: int = 200_000
    seed: int = 0

    def __post_init__(self):
        if not self.h1 > 0 or not self.h2 >= 0:
            raise ValueError(f"fading coefficients must be positive, got ({self.h1}, {self.h2})")
        if self.mc_samples < 10_000:
            raise ValueError("mc_samples must be at least 1e4")

    def gains(self, which_user: int) -> tuple[float, float]:
        """(own gain, interferer gain) for the given user."""
        if which_user == 1:
            return self.h1, self.h2
        if which_user == 2:
            return self.h2, self.h1
        raise ValueError("which_user must be 1 or 2")


def function_node_llr(y, m_other, h_own, h_other):
    """Extrinsic LLR for the own bit given the channel output and the interferer's LLR."""
    m = np.clip(m_other, -_BIG, _BIG)
    num = np.logaddexp(m - 0.5 * (y - h_own - h_other) ** 2, -0.5 * (y - h_own + h_other) ** 2)
    den = np.logaddexp(m - 0.5 * (y + h_own - h_other) ** 2, -0.5 * (y + h_own + h_other) ** 2)
    return num - den


def project_signed(values: np.ndarray, weights: np.ndarray, grid: Grid) -> np.ndarray:
    """Linear split of point masses at arbitrary LLRs onto the packed grid.

    Values above the grid go to +inf, values below saturate at the lowest bin.
    """
    h, n = grid.half, grid.n
    out = np.zeros(n + 2)
    pos = values / grid.delta + h
    top = pos > n - 1
    out[n] = weights[top].sum()
    pos = np.clip(pos[~top], 0.0, n - 1)
    wk = weights[~top]
    lo = np.minimum(np.floor(pos).astype(np.int64), n - 2)
    f = pos - lo
    out[:n] += np.bincount(lo, wk * (1 - f), minlength=n)[:n]
    out[:n] += np.bincount(lo + 1, wk * f, minlength=n)[:n]
    return out


def _noise_nodes(n_z: int, z_max: float = 9.0):
    z = -z_max + (np.arange(n_z) + 0.5) * (2 * z_max / n_z)
    w = np.exp(-0.5 * z * z)
    return z, w / w.sum()


@functools.lru_cache(maxsize=16)
def transition_matrix(h_own: float, h_other: float, grid: Grid, n_z: int = 3000) -> np.ndarray:
    """T[k, :] = packed output density when the interferer message sits at input point k.

    Input points are the grid values followed by +inf and -inf.
    """
    n = grid.n
    inputs = np.concatenate([grid.llr, [np.inf, -np.inf]])
    z, wz = _noise_nodes(n_z)
    T = np.zeros((n + 2, n + 2))
    chunk = max(1, 400_000 // n_z)
    for s in range(0, n + 2, chunk):
        M = inputs[s:s + chunk]
        rows = []
        for x2 in (1.0, -1.0):
            y = h_own + h_other * x2 + z
            rows.append(function_node_llr(y[None, :], x2 * M[:, None], h_own, h_other))
        vals = np.concatenate(rows, axis=1)
        wts = np.concatenate([wz, wz]) * 0.5
        for k in range(vals.shape[0]):
            T[s + k] = project_signed(vals[k], wts, grid)
    T.setflags(write=False)
    return T


def mac_node_density(b_other: LDensity, spec: MacSpec, which_user: int = 1, grid: Grid = MAC_GRID,
                     method: str = MC, stream: int = 0, symmetrize: bool = True) -> LDensity:
    """Density the function node sends to ``which_user`` given the interferer's message density.

    ``stream`` separates Monte-Carlo draws of successive iterations while
    keeping every call reproducible from (seed, stream).
    """
    h_own, h_other = spec.gains(which_user)
    b = D.to_quantized(b_other, grid).packed
    if method == QUADRATURE:
        out = b @ transition_matrix(h_own, h_other, grid)
    elif method == MC:
        rng = np.random.default_rng([spec.seed, which_user, stream])
        n = spec.mc_samples
        inputs = np.concatenate([grid.llr, [np.inf, -np.inf]])
        probs = np.clip(b, 0.0, None)
        idx = rng.choice(inputs.size, size=n, p=probs / probs.sum())
        x2 = rng.choice([-1.0, 1.0], size=n)
        z = rng.standard_normal(n)
        vals = function_node_llr(h_own + h_other * x2 + z, x2 * inputs[idx], h_own, h_other)
        out = project_signed(vals, np.full(n, 1.0 / n), grid)
    else:
        raise ValueError(f"unknown function-node method {method!r}")
    if symmetrize:
        out = D.symmetrize_packed(out, grid)
    return D.Quantized(grid, out / out.sum())


# ---------------------------------------------------------------------------
# uncoupled DE

def mac_de_step(a: LDensity, spec: MacSpec, dd: DegreeDistribution, grid: Grid = MAC_GRID,
                method: str = MC, stream: int = 0) -> LDensity:
    """Symmetric-fading update a' = f(L(rho(a))) vconv lambda(rho(a))."""
    lam, node = var_parts(dd, D.edge_poly_chk(dd, a))
    f = mac_node_density(node, spec, 1, grid, method, stream)
    return D.normalize(D.var_conv(f, lam))


def mac_de_step_pair(a: LDensity, b: LDensity, spec: MacSpec, dd: DegreeDistribution, grid: Grid = MAC_GRID,
                     method: str = MC, stream: int = 0) -> tuple[LDensity, LDensity]:
    """Asymmetric update; each user's function-node input is the other user's full-node message."""
    la, na = var_parts(dd, D.edge_poly_chk(dd, a))
    lb, nb = var_parts(dd, D.edge_poly_chk(dd, b))
    fa = mac_node_density(nb, spec, 1, grid, method, stream)
    fb = mac_node_density(na, spec, 2, grid, method, stream)
    return D.normalize(D.var_conv(fa, la)), D.normalize(D.var_conv(fb, lb))


class _Stall:
    """Stall rule for DE runs.

    Deterministic runs stop once the mean error probability moves by less
    than ``stall_delta``. Monte-Carlo runs never settle that finely, so they
    stop after ``patience`` iterations without a relative improvement of
    ``rel`` over the best mean seen so far.
    """

    def __init__(self, settings: DESettings, noisy: bool, patience: int = 50, rel: float = 1e-3):
        self.settings, self.noisy = settings, noisy
        self.patience, self.rel = patience, rel
        self.prev = None
        self.best = np.inf
        self.since = 0

    def __call__(self, mean: float) -> bool:
        if not self.noisy:
            stalled = self.prev is not None and abs(mean - self.prev) < self.settings.stall_delta
            self.prev = mean
            return stalled
        if mean < self.best * (1 - self.rel):
            self.best, self.since = mean, 0
        else:
            self.since += 1
        return self.since >= self.patience


def run_mac_de(spec: MacSpec, dd: DegreeDistribution, settings: DESettings = DESettings(),
               grid: Grid = MAC_GRID, method: str = MC) -> DEResult:
    a = b = D.DELTA_0
    symmetric = spec.h1 == spec.h2
    stall = _Stall(settings, method == MC)
    for it in range(1, settings.max_iterations + 1):
        if symmetric:
            a = b = mac_de_step(a, spec, dd, grid, method, it)
        else:
            a, b = mac_de_step_pair(a, b, spec, dd, grid, method, it)
        pa, pb = D.error_prob(a), D.error_prob(b)
        if max(pa, pb) < settings.success_error_prob:
            return DEResult(True, JointDEState(a, b, it), it, (pa, pb))
        if stall(0.5 * (pa + pb)):
            return DEResult(False, JointDEState(a, b, it), it, (pa, pb))
    return DEResult(False, JointDEState(a, b, settings.max_iterations), settings.max_iterations, (pa, pb))


# ---------------------------------------------------------------------------
# coupled DE

def _node_rows(Gam: np.ndarray, spec: MacSpec, which_user: int, grid: Grid, method: str, stream: int):
    if method == QUADRATURE:
        out = D.symmetrize_packed(Gam @ transition_matrix(*spec.gains(which_user), grid), grid)
        return D.normalize_rows(out)
    return np.stack([mac_node_density(D.Quantized(grid, row), spec, which_user, grid, method,
                                      stream * 100_003 + i).packed for i, row in enumerate(Gam)])


def _mac_combine(G, F, grid):
    out = np.empty_like(G)
    for i in range(G.shape[0]):
        out[i] = G[i] if G[i, grid.n] >= 1.0 - 1e-15 else D.vconv_packed(F[i], G[i], grid)
    return D.normalize_rows(out)


def run_mac_coupled(spec: MacSpec, cspec: CoupledSpec, settings: DESettings = DESettings(),
                    grid: Grid = MAC_COUPLED_GRID, method: str = QUADRATURE, progress=None) -> CoupledResult:
    """Coupled MAC DE: a_i' = f(Gamma(b-window)_i) vconv g(a-window)_i, flooding schedule."""
    N = cspec.n_positions
    X = np.broadcast_to(D.erasure_packed(1.0, grid), (N, grid.n + 2)).copy()
    Y = X
    symmetric = spec.h1 == spec.h2
    stall = _Stall(settings, method == MC)
    for it in range(1, settings.max_iterations + 1):
        if symmetric:
            G, Gam = coupled_parts(X, cspec, grid, mirror=True)
            X = Y = _mac_combine(G, _node_rows(Gam, spec, 1, grid, method, it), grid)
        else:
            Ga, Gama = coupled_parts(X, cspec, grid)
            Gb, Gamb = coupled_parts(Y, cspec, grid)
            X, Y = (_mac_combine(Ga, _node_rows(Gamb, spec, 1, grid, method, it), grid),
                    _mac_combine(Gb, _node_rows(Gama, spec, 2, grid, method, it), grid))
        pe1 = D.rows_error_prob(X, grid)
        pe2 = pe1 if symmetric else D.rows_error_prob(Y, grid)
        if progress is not None:
            progress(it, pe1, pe2)
        if max(pe1.max(), pe2.max()) < settings.success_error_prob:
            return CoupledResult(True, it, pe1, pe2, (X, Y))
        if stall(0.5 * (pe1.mean() + pe2.mean())):
            return CoupledResult(False, it, pe1, pe2, (X, Y))
    return CoupledResult(False, settings.max_iterations, pe1, pe2, (X, Y))


# ---------------------------------------------------------------------------
# thresholds

MacSystem = Union[DegreeDistribution, CoupledSpec]


def mac_converges(system: MacSystem, spec: MacSpec, settings: DESettings = DESettings(),
                  grid: Grid | None = None, method: str = MC) -> bool:
    grid = default_grid(system) if grid is None else grid
    if isinstance(system, CoupledSpec):
        return run_mac_coupled(spec, system, settings, grid, method).converged
    return run_mac_de(spec, system, settings, grid, method).converged


def mac_threshold_symmetric(system: MacSystem, settings: DESettings = DESettings(), tol: float = 5e-3,
                            grid: Grid | None = None, method: str = MC, mc_samples: int = 200_000,
                            seed: int = 0, votes: int = 3, bracket: tuple[float, float] = (0.5, 3.0)) -> float:
    """Smallest symmetric fading coefficient h1 = h2 = h for which DE converges.

    Monte-Carlo probes take a majority over ``votes`` independent seeds.
    """
    n_votes = votes if method == MC else 1

    def ok(h):
        wins = 0
        for v in range(n_votes):
            spec = MacSpec(h, h, mc_samples, seed + v)
            wins += mac_converges(system, spec, settings, grid, method)
            if wins > n_votes // 2 or (v + 1 - wins) > n_votes // 2:
                break
        res = wins > n_votes // 2
        log.info("mac h=%.5f converged=%s", h, res)
        return res

    return bisect_threshold(ok, bracket[0], bracket[1], tol, better="higher")
