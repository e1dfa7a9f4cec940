"""Slepian-Wolf regions and DE-computed achievable channel parameter regions (ACPR).

Regions live on a lattice of channel-parameter pairs. For the BEC the
parameters are erasure rates; for BMS families they are channel entropies;
for the MAC they are fading coefficients (where larger is better).
"""
from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from . import densities as D
from .densities import Grid
from .ensembles import CoupledSpec, DegreeDistribution
from .joint_de import DESettings, channel_at, run_de
from .sources import ERASURE, SourceModel, source_entropies

log = logging.getLogger(__name__)

System = Union[DegreeDistribution, CoupledSpec]
_EPS = 1e-12


def lattice(lo: float, hi: float, step: float) -> np.ndarray:
    """lo, lo+step, ... up to hi (inclusive within round-off); a step wider than the range gives [lo]."""
    if step <= 0:
        raise ValueError("lattice step must be positive")
    k = int(np.floor((hi - lo) / step + 1e-9))
    return np.round(lo + step * np.arange(k + 1), 12)


@dataclass
class Region:
    """Achievability on a lattice ``p1 x p2``; ``achievable[i, j]`` refers to (p1[i], p2[j])."""

    p1: np.ndarray
    p2: np.ndarray
    achievable: np.ndarray
    boundary: list = field(default_factory=list)
    better: str = "lower"
    violations: list = field(default_factory=list)

    def grid_rows(self):
        for i, a in enumerate(self.p1):
            for j, b in enumerate(self.p2):
                yield float(a), float(b), bool(self.achievable[i, j])

    def contains(self, other: "Region") -> bool:
        """Pointwise inclusion on a shared lattice."""
        if not (np.allclose(self.p1, other.p1) and np.allclose(self.p2, other.p2)):
            raise ValueError("regions live on different lattices")
        return bool(np.all(self.achievable[other.achievable]))


# ---------------------------------------------------------------------------
# Slepian-Wolf

def sw_bounds(m: SourceModel, R: float) -> tuple[float, float]:
    """(single-user bound, sum bound) on channel entropies: h_i <= 1 - R H(U_i|U_j), h1 + h2 <= 2 - R H(U1,U2)."""
    hc, hj = source_entropies(m)
    return 1.0 - R * hc, 2.0 - R * hj


def sw_symmetric_bound(m: SourceModel, R: float) -> float:
    single, total = sw_bounds(m, R)
    return min(single, 0.5 * total)


def sw_achievable(m: SourceModel, R: float, h1, h2):
    single, total = sw_bounds(m, R)
    h1, h2 = np.asarray(h1), np.asarray(h2)
    return (h1 <= single + _EPS) & (h2 <= single + _EPS) & (h1 + h2 <= total + _EPS)


def sw_region(m: SourceModel, family: str, R: float, p1: Sequence[float], p2: Sequence[float] | None = None) -> Region:
    """Slepian-Wolf region with capacity 1 - h (h = erasure rate for the BEC, channel entropy otherwise).

    The boundary is exact: for each row the largest admissible h2, plus the
    polygon corners and the symmetric point.
    """
    if family not in D.FAMILIES:
        raise ValueError(f"unknown channel family {family!r}")
    p1 = np.asarray(p1, dtype=float)
    p2 = p1 if p2 is None else np.asarray(p2, dtype=float)
    ach = sw_achievable(m, R, p1[:, None], p2[None, :])
    single, total = sw_bounds(m, R)
    sym = sw_symmetric_bound(m, R)
    xs = set(float(x) for x in p1 if x <= single + _EPS)
    for v in (total - single, single, sym):
        if 0.0 <= v <= 1.0:
            xs.add(round(v, 12))
    boundary = []
    for x in sorted(xs):
        y = min(single, total - x, 1.0)
        if y >= -_EPS and x <= single + _EPS:
            boundary.append((x, round(y, 12)))
    return Region(p1, p2, ach, boundary)


# ---------------------------------------------------------------------------
# point evaluation

def _converges_point(args) -> bool:
    system, m, family, h1, h2, settings, grid = args
    if isinstance(system, CoupledSpec):
        from .spatial_coupling import run_coupled_de
        return run_coupled_de(system, channel_at(family, h1, grid), channel_at(family, h2, grid),
                              m, settings, grid).converged
    return run_de(channel_at(family, h1, grid), channel_at(family, h2, grid), m, system, settings, grid).converged


def _mac_point(args) -> bool:
    from .mac import MacSpec, mac_converges
    system, h1, h2, settings, grid, method, mc_samples, seed = args
    return mac_converges(system, MacSpec(h1, h2, mc_samples, seed), settings, grid, method)


def _fan_out(fn: Callable, tasks: list, jobs: int) -> list:
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))


def default_jobs() -> int:
    return os.cpu_count() or 1


# ---------------------------------------------------------------------------
# sweeps

def _row_bisect(n1: int, n2: int, evaluate: Callable[[list], list]) -> np.ndarray:
    """Per row, the number of leading achievable entries (entries ordered easy -> hard)."""
    good = np.full(n1, -1)
    bad = np.full(n1, n2)
    while True:
        active = np.nonzero(bad - good > 1)[0]
        if active.size == 0:
            return good + 1
        mid = (good[active] + bad[active]) // 2
        res = np.asarray(evaluate(list(zip(active.tolist(), mid.tolist()))), dtype=bool)
        good[active[res]] = mid[res]
        bad[active[~res]] = mid[~res]


def audit_staircase(ach: np.ndarray, better: str = "lower") -> list:
    """Lattice points whose achievability contradicts monotonicity.

    Returns (i, j) pairs that are achievable while a componentwise-better
    neighbour is not.
    """
    a = ach if better == "lower" else ach[::-1, ::-1]
    bad = []
    n1, n2 = a.shape
    for i in range(n1):
        for j in range(n2):
            if not a[i, j]:
                continue
            if (i > 0 and not a[i - 1, j]) or (j > 0 and not a[i, j - 1]):
                bad.append((i, j) if better == "lower" else (n1 - 1 - i, n2 - 1 - j))
    return bad


def _assemble(p1, p2, counts, better, scan=None) -> Region:
    n1, n2 = len(p1), len(p2)
    if scan is not None:
        ach = scan
    else:
        ach = np.zeros((n1, n2), bool)
        for i, k in enumerate(counts):
            if better == "lower":
                ach[i, :k] = True
            else:
                ach[i, n2 - k:] = True
    boundary = []
    for i in range(n1):
        js = np.nonzero(ach[i])[0]
        if js.size:
            j = js[-1] if better == "lower" else js[0]
            boundary.append((float(p1[i]), float(p2[j])))
    violations = audit_staircase(ach, better)
    if violations:
        log.warning("staircase audit: %d violations", len(violations))
    return Region(np.asarray(p1), np.asarray(p2), ach, boundary, better, violations)


def acpr_sweep(system: System, m: SourceModel, family: str, p1: Sequence[float], p2: Sequence[float] | None = None,
               settings: DESettings = DESettings(), grid: Grid = D.COUPLED_BMS_GRID, jobs: int = 1,
               method: str = "bisect") -> Region:
    """DE-computed achievable region on the lattice ``p1 x p2``.

    ``method="bisect"`` bisects each row along p2 (relies on monotonicity,
    checked afterwards by the staircase audit); ``"scan"`` evaluates every point.
    """
    p1 = np.asarray(p1, dtype=float)
    p2 = p1 if p2 is None else np.asarray(p2, dtype=float)
    batched = family == D.BEC and m.kind == ERASURE and isinstance(system, CoupledSpec)

    def evaluate(pairs):
        if batched:
            from .spatial_coupling import coupled_bec_converges
            e1 = np.array([p1[i] for i, _ in pairs])
            e2 = np.array([p2[j] for _, j in pairs])
            return coupled_bec_converges(system, e1, e2, m, settings).tolist()
        tasks = [(system, m, family, float(p1[i]), float(p2[j]), settings, grid) for i, j in pairs]
        return _fan_out(_converges_point, tasks, jobs)

    if method == "scan":
        pairs = [(i, j) for i in range(len(p1)) for j in range(len(p2))]
        res = np.asarray(evaluate(pairs), bool).reshape(len(p1), len(p2))
        return _assemble(p1, p2, None, "lower", res)
    if method != "bisect":
        raise ValueError(f"unknown sweep method {method!r}")
    counts = _row_bisect(len(p1), len(p2), evaluate)
    return _assemble(p1, p2, counts, "lower")


def mac_acpr_sweep(system: System, p1: Sequence[float], p2: Sequence[float] | None = None,
                   settings: DESettings = DESettings(), grid: Grid | None = None, method: str = "quadrature",
                   mc_samples: int = 200_000, seed: int = 0, jobs: int = 1) -> Region:
    """Achievable fading-coefficient pairs; larger coefficients are better."""
    from .mac import default_grid
    grid = default_grid(system) if grid is None else grid
    p1 = np.asarray(p1, dtype=float)
    p2 = p1 if p2 is None else np.asarray(p2, dtype=float)
    n2 = len(p2)

    def evaluate(pairs):
        # easy -> hard order along p2 is descending fading coefficient
        tasks = [(system, float(p1[i]), float(p2[n2 - 1 - j]), settings, grid, method, mc_samples, seed)
                 for i, j in pairs]
        return _fan_out(_mac_point, tasks, jobs)

    counts = _row_bisect(len(p1), n2, evaluate)
    return _assemble(p1, p2, counts, "higher")


# ---------------------------------------------------------------------------
# CSV rows (writing and metadata are the caller's business)

REGION_HEADER = "param1,param2,achievable"
BOUNDARY_HEADER = "param1,param2"


def region_csv_lines(region: Region) -> list[str]:
    return [REGION_HEADER] + [f"{a:.12g},{b:.12g},{int(v)}" for a, b, v in region.grid_rows()]


def boundary_csv_lines(region: Region) -> list[str]:
    return [BOUNDARY_HEADER] + [f"{a:.12g},{b:.12g}" for a, b in region.boundary]
