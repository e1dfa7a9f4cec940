"""L-density algebra for density evolution.

Two representations are used:

* :class:`ErasureMix` -- ``e * Delta_0 + (1 - e) * Delta_inf``. Closed under every
  operation here, so BEC density evolution runs in exact scalar arithmetic.
* :class:`Quantized` -- masses on a uniform LLR grid ``k * delta``,
  ``k = -N..N``, plus point masses at +inf and -inf.

All densities are conditioned on transmission of +1. Check-node combination
works on the magnitude distribution and re-splits each grid magnitude ``m``
into signs with ratio ``e^m : 1``, so its output satisfies the symmetry
condition exactly on the grid.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Iterable, Sequence, TextIO, Union

import numpy as np
from scipy import optimize, special

from ._kernels import boxplus_magnitude, pair_project, projection_table
from .ensembles import DegreeDistribution

BEC = "bec"
BSC = "bsc"
BAWGNC = "bawgnc"
FAMILIES = (BEC, BSC, BAWGNC)

_LN2 = math.log(2.0)


@dataclass(frozen=True)
class Grid:
    """Uniform LLR quantization grid on ``[-grid_max, grid_max]``.

    ``bins`` sets the resolution: the grid holds ``2 * (bins // 2) + 1`` points
    so that LLR 0 is always a grid point.
    """

    grid_max: float = 30.0
    bins: int = 4096

    def __post_init__(self):
        if self.grid_max <= 0 or self.bins < 4:
            raise ValueError(f"invalid grid {self}")

    @property
    def half(self) -> int:
        return self.bins // 2

    @property
    def n(self) -> int:
        return 2 * self.half + 1

    @property
    def delta(self) -> float:
        return self.grid_max / self.half

    @cached_property
    def llr(self) -> np.ndarray:
        return (np.arange(self.n) - self.half) * self.delta

    @cached_property
    def magnitudes(self) -> np.ndarray:
        return np.arange(self.half + 1) * self.delta

    @cached_property
    def pos_fraction(self) -> np.ndarray:
        # P(sign = + | magnitude m) = 1 / (1 + e^-m)
        return special.expit(self.magnitudes)

    @cached_property
    def neg_fraction(self) -> np.ndarray:
        return special.expit(-self.magnitudes)

    @cached_property
    def entropy_weights(self) -> np.ndarray:
        return np.logaddexp(0.0, -self.llr) / _LN2


DEFAULT_GRID = Grid(30.0, 4096)
COUPLED_BMS_GRID = Grid(25.0, 2048)


@functools.lru_cache(maxsize=8)
def _table(half: int, delta: float):
    return projection_table(half + 1, delta)


@dataclass(frozen=True)
class ErasureMix:
    """``erasure * Delta_0 + (1 - erasure) * Delta_inf``."""

    erasure: float

    def __post_init__(self):
        e = float(self.erasure)
        if not -1e-12 <= e <= 1 + 1e-12:
            raise ValueError(f"erasure mass {e} outside [0, 1]")
        object.__setattr__(self, "erasure", min(max(e, 0.0), 1.0))


@dataclass(frozen=True, eq=False)
class Quantized:
    """Quantized L-density. ``packed`` = [grid masses..., mass(+inf), mass(-inf)]."""

    grid: Grid
    packed: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.packed, dtype=float)
        if p.shape != (self.grid.n + 2,):
            raise ValueError(f"packed length {p.shape} does not match grid ({self.grid.n + 2})")
        p.setflags(write=False)
        object.__setattr__(self, "packed", p)

    @classmethod
    def from_parts(cls, grid: Grid, mass, mass_pos_inf: float = 0.0, mass_neg_inf: float = 0.0):
        return cls(grid, np.concatenate([np.asarray(mass, dtype=float), [mass_pos_inf, mass_neg_inf]]))

    @property
    def mass(self) -> np.ndarray:
        return self.packed[: self.grid.n]

    @property
    def mass_pos_inf(self) -> float:
        return float(self.packed[self.grid.n])

    @property
    def mass_neg_inf(self) -> float:
        return float(self.packed[self.grid.n + 1])

    def __repr__(self):
        return (f"Quantized(grid={self.grid}, entropy={entropy(self):.6g}, "
                f"error_prob={error_prob(self):.3g}, +inf={self.mass_pos_inf:.3g})")


LDensity = Union[ErasureMix, Quantized]

DELTA_0 = ErasureMix(1.0)
DELTA_INF = ErasureMix(0.0)


# ---------------------------------------------------------------------------
# packed-array primitives (also used by the coupled engines on stacked rows)

def erasure_packed(e: float, grid: Grid) -> np.ndarray:
    p = np.zeros(grid.n + 2)
    p[grid.half] = e
    p[grid.n] = 1.0 - e
    return p


def fold(p: np.ndarray, grid: Grid) -> np.ndarray:
    """Distribution of |LLR| over grid magnitudes (finite part only)."""
    h = grid.half
    d = p[..., h: grid.n].copy()
    d[..., 1:] += p[..., h - 1:: -1][..., :h] if h > 0 else 0.0
    return d


def unfold(d: np.ndarray, pos_inf, neg_inf, grid: Grid) -> np.ndarray:
    """Symmetric signed density from a magnitude distribution."""
    h = grid.half
    shape = d.shape[:-1]
    out = np.empty(shape + (grid.n + 2,))
    pf = grid.pos_fraction
    out[..., h:grid.n] = d * pf
    out[..., h] = d[..., 0]
    out[..., :h] = (d[..., 1:] * grid.neg_fraction[1:])[..., ::-1]
    out[..., grid.n] = pos_inf
    out[..., grid.n + 1] = neg_inf
    return out


def symmetrize_packed(p: np.ndarray, grid: Grid) -> np.ndarray:
    n = grid.n
    return unfold(fold(p, grid), p[..., n] + p[..., n + 1], 0.0 * p[..., n], grid)


def vconv_packed(p: np.ndarray, q: np.ndarray, grid: Grid) -> np.ndarray:
    """Variable-node convolution of two packed densities (1-D)."""
    h, n = grid.half, grid.n
    fp, fq = p[:n], q[:n]
    full = np.convolve(fp, fq)  # index k <-> LLR (k - 2h) * delta
    out = np.empty(n + 2)
    out[:n] = full[h: h + n]
    pp, pn, qp, qn = p[n], p[n + 1], q[n], q[n + 1]
    P, Q = fp.sum(), fq.sum()
    out[n] = full[h + n:].sum() + pp * qp + pp * Q + P * qp
    # sums below -grid_max saturate at the lowest bin: sending them to -inf would
    # let a later meeting with +inf manufacture LLR 0 out of a confident state
    out[0] += full[:h].sum()
    out[n + 1] = pn * qn + pn * Q + P * qn
    out[h] += pp * qn + pn * qp  # +inf meets -inf: no information
    return out


def cconv_packed(p: np.ndarray, q: np.ndarray, grid: Grid) -> np.ndarray:
    """Check-node (box-plus) combination of two packed densities (1-D)."""
    n = grid.n
    lo, w = _table(grid.half, grid.delta)
    da, db = fold(p, grid), fold(q, grid)
    ia, ib = p[n] + p[n + 1], q[n] + q[n + 1]
    d = pair_project(da, db, lo, w)
    d += ia * db + ib * da  # an infinite operand is the identity
    pos = p[n] * q[n] + p[n + 1] * q[n + 1]
    neg = p[n] * q[n + 1] + p[n + 1] * q[n]
    return unfold(d, pos, neg, grid)


def _project_magnitudes(values: np.ndarray, weights: np.ndarray, grid: Grid):
    """Linear split of point masses at non-negative magnitudes onto the grid.

    Returns (magnitude distribution, mass beyond the grid).
    """
    h = grid.half
    pos = values / grid.delta
    over = pos > h
    lo = np.clip(np.floor(pos), 0, h - 1).astype(np.int64)
    f = np.clip(pos - lo, 0.0, 1.0)
    wk = np.where(over, 0.0, weights)
    d = np.bincount(lo, wk * (1.0 - f), minlength=h + 1) + np.bincount(lo + 1, wk * f, minlength=h + 1)
    return d[: h + 1], float(np.sum(np.where(over, weights, 0.0)))


def cconv_point_packed(p: np.ndarray, magnitude: float, grid: Grid) -> np.ndarray:
    """Box-plus with the symmetric two-point density at +-magnitude."""
    n = grid.n
    if magnitude == np.inf:
        return p.copy()
    d = fold(p, grid)
    inf_mass = p[n] + p[n + 1]
    vals = boxplus_magnitude(grid.magnitudes, magnitude)
    out, over = _project_magnitudes(np.append(vals, magnitude), np.append(d, inf_mass), grid)
    return unfold(out, over, 0.0, grid)


# ---------------------------------------------------------------------------
# representation handling

def to_quantized(a: LDensity, grid: Grid = DEFAULT_GRID) -> Quantized:
    if isinstance(a, Quantized):
        if a.grid != grid:
            raise ValueError("density lives on a different grid")
        return a
    return Quantized(grid, erasure_packed(a.erasure, grid))


def _common_grid(*ds: LDensity) -> Grid | None:
    grids = {d.grid for d in ds if isinstance(d, Quantized)}
    if len(grids) > 1:
        raise ValueError("densities on different grids")
    return grids.pop() if grids else None


def mix(weights: Sequence[float], densities: Sequence[LDensity]) -> LDensity:
    """Affine mixture ``sum_k weights[k] * densities[k]``."""
    weights = [float(w) for w in weights]
    grid = _common_grid(*densities)
    if grid is None:
        # fsum is correctly rounded, so the result does not depend on term order
        return ErasureMix(math.fsum(w * d.erasure for w, d in zip(weights, densities)))
    acc = np.zeros(grid.n + 2)
    for w, d in zip(weights, densities):
        if w != 0.0:
            acc += w * to_quantized(d, grid).packed
    return Quantized(grid, acc)


def var_conv(a: LDensity, b: LDensity) -> LDensity:
    """Density of the sum of two independent LLRs (variable node)."""
    if isinstance(a, ErasureMix) and isinstance(b, ErasureMix):
        return ErasureMix(a.erasure * b.erasure)
    if isinstance(a, ErasureMix):
        a, b = b, a
    if isinstance(b, ErasureMix):
        # Delta_0 is the identity, Delta_inf absorbs
        return Quantized(a.grid, b.erasure * a.packed + (1.0 - b.erasure) * erasure_packed(0.0, a.grid))
    _common_grid(a, b)
    return Quantized(a.grid, vconv_packed(a.packed, b.packed, a.grid))


def chk_conv(a: LDensity, b: LDensity) -> LDensity:
    """Density of the box-plus of two independent LLRs (check node)."""
    if isinstance(a, ErasureMix) and isinstance(b, ErasureMix):
        x, y = a.erasure, b.erasure
        return ErasureMix(x + y - x * y)
    if isinstance(a, ErasureMix):
        a, b = b, a
    if isinstance(b, ErasureMix):
        # Delta_inf is the identity, Delta_0 absorbs
        return Quantized(a.grid, (1.0 - b.erasure) * a.packed + b.erasure * erasure_packed(1.0, a.grid))
    _common_grid(a, b)
    return Quantized(a.grid, cconv_packed(a.packed, b.packed, a.grid))


def _power(a: LDensity, k: int, op: Callable, identity: LDensity) -> LDensity:
    if k < 0:
        raise ValueError("negative convolution power")
    result = None
    base = a
    while k:
        if k & 1:
            result = base if result is None else op(result, base)
        k >>= 1
        if k:
            base = op(base, base)
    return identity if result is None else result


def var_power(a: LDensity, k: int) -> LDensity:
    if isinstance(a, ErasureMix):
        return ErasureMix(a.erasure**k)
    return _power(a, k, var_conv, DELTA_0)


def chk_power(a: LDensity, k: int) -> LDensity:
    if isinstance(a, ErasureMix):
        return ErasureMix(1.0 - (1.0 - a.erasure) ** k)
    return _power(a, k, chk_conv, DELTA_INF)


def _poly(coeffs: dict[int, float], a: LDensity, power: Callable, shift: int) -> LDensity:
    terms = [(c, power(a, i - shift)) for i, c in coeffs.items()]
    if len(terms) == 1:
        return terms[0][1]
    return mix([c for c, _ in terms], [t for _, t in terms])


def edge_poly_var(dd: DegreeDistribution, a: LDensity) -> LDensity:
    """lambda(a) = sum_i lambda_i a^{var (i-1)}."""
    return _poly(dd.lambda_coeffs, a, var_power, 1)


def edge_poly_chk(dd: DegreeDistribution, a: LDensity) -> LDensity:
    """rho(a) = sum_i rho_i a^{chk (i-1)}."""
    return _poly(dd.rho_coeffs, a, chk_power, 1)


def node_poly_full(dd: DegreeDistribution, a: LDensity) -> LDensity:
    """L(a) = sum_i L_i a^{var i}: what a degree-i node gathers from all its edges."""
    return _poly(dd.node_coeffs, a, var_power, 0)


# ---------------------------------------------------------------------------
# functionals

def normalize(a: LDensity) -> LDensity:
    """Rescale to unit mass.

    Iterated DE multiplies masses (a check power of k raises a deficit to the
    k-th power), so round-off grows geometrically unless states are renormalized.
    """
    if isinstance(a, ErasureMix):
        return a
    return Quantized(a.grid, a.packed / a.packed.sum())


def normalize_rows(P: np.ndarray) -> np.ndarray:
    return P / P.sum(axis=-1, keepdims=True)


def total_mass(a: LDensity) -> float:
    if isinstance(a, ErasureMix):
        return 1.0
    return float(a.packed.sum())


def entropy(a: LDensity) -> float:
    """Conditional entropy functional, integral of a(x) log2(1 + e^-x)."""
    if isinstance(a, ErasureMix):
        return a.erasure
    g = a.grid
    return float(a.mass @ g.entropy_weights + a.mass_neg_inf)


def error_prob(a: LDensity) -> float:
    if isinstance(a, ErasureMix):
        return 0.5 * a.erasure
    h = a.grid.half
    m = a.mass
    return float(m[:h].sum() + 0.5 * m[h] + a.mass_neg_inf)


def symmetry_error(a: LDensity) -> float:
    """max_k |a(-x_k) - e^{-x_k} a(x_k)| over positive grid points."""
    if isinstance(a, ErasureMix):
        return 0.0
    g = a.grid
    h = g.half
    pos = a.mass[h + 1:]
    neg = a.mass[:h][::-1]
    return float(np.max(np.abs(neg - np.exp(-g.magnitudes[1:]) * pos), initial=0.0))


def rows_entropy(P: np.ndarray, grid: Grid) -> np.ndarray:
    return P[..., : grid.n] @ grid.entropy_weights + P[..., grid.n + 1]


def rows_error_prob(P: np.ndarray, grid: Grid) -> np.ndarray:
    h = grid.half
    return P[..., :h].sum(axis=-1) + 0.5 * P[..., h] + P[..., grid.n + 1]


# ---------------------------------------------------------------------------
# channels

@dataclass(frozen=True)
class ChannelSpec:
    """Binary-input memoryless symmetric channel.

    ``param`` is the erasure probability (bec), crossover probability (bsc) or
    noise standard deviation (bawgnc; 0 and inf are the noiseless and useless
    limits).
    """

    family: str
    param: float

    def __post_init__(self):
        fam = self.family.lower()
        object.__setattr__(self, "family", fam)
        p = float(self.param)
        if fam in (BEC, BSC):
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{fam} parameter {p} outside [0, 1]")
        elif fam == BAWGNC:
            if not p >= 0.0:
                raise ValueError(f"bawgnc sigma must be positive, got {p}")
        else:
            raise ValueError(f"unknown channel family {self.family!r}")
        object.__setattr__(self, "param", p)


def bsc_density(p: float, grid: Grid = DEFAULT_GRID) -> LDensity:
    if p in (0.0, 1.0):
        return DELTA_INF
    if p == 0.5:
        return DELTA_0
    m = abs(math.log((1.0 - p) / p))
    d, over = _project_magnitudes(np.array([m]), np.array([1.0]), grid)
    return Quantized(grid, unfold(d, over, 0.0, grid))


def bawgnc_density(sigma: float, grid: Grid = DEFAULT_GRID) -> LDensity:
    """Quantized BAWGNC L-density: Gaussian with mean 2/sigma^2, variance 4/sigma^2."""
    if sigma == 0.0:
        return DELTA_INF
    if sigma == np.inf:
        return DELTA_0
    mu = 2.0 / sigma**2
    sd = 2.0 / sigma
    g = grid
    edges = (np.arange(g.half + 1) + 0.5) * g.delta
    lower = np.concatenate([[0.0], edges[:-1]])
    upper = edges

    def interval(a, b):
        # P(a < X <= b) for X ~ N(mu, sd^2), evaluated on the accurate tail
        za, zb = (a - mu) / sd, (b - mu) / sd
        right = special.ndtr(-za) - special.ndtr(-zb)
        left = special.ndtr(zb) - special.ndtr(za)
        return np.where(za > 0, right, left)

    d = interval(lower, upper) + interval(-upper, -lower)
    over = float(special.ndtr(-(edges[-1] - mu) / sd) + special.ndtr((-edges[-1] - mu) / sd))
    return Quantized(g, unfold(d, over, 0.0, g))


def channel_density(spec: ChannelSpec, grid: Grid = DEFAULT_GRID) -> LDensity:
    if spec.family == BEC:
        return ErasureMix(spec.param)
    if spec.family == BSC:
        return bsc_density(spec.param, grid)
    return bawgnc_density(spec.param, grid)


def channel_entropy(spec: ChannelSpec, grid: Grid = DEFAULT_GRID) -> float:
    return entropy(channel_density(spec, grid))


def channel_from_entropy(family: str, h: float, grid: Grid = DEFAULT_GRID, tol: float = 1e-10) -> ChannelSpec:
    """Channel of the given family whose (quantized) L-density has entropy ``h``.

    ``tol`` bounds the root bracket width in the channel parameter (scaled by 1e-3).
    """
    family = family.lower()
    if not 0.0 <= h <= 1.0:
        raise ValueError(f"entropy {h} outside [0, 1]")
    if family == BEC:
        return ChannelSpec(BEC, h)
    if family == BSC:
        if h == 0.0:
            return ChannelSpec(BSC, 0.0)
        if h == 1.0:
            return ChannelSpec(BSC, 0.5)
        lo, hi = 0.0, 0.5
        f = lambda x: entropy(bsc_density(x, grid))
    elif family == BAWGNC:
        if h == 0.0:
            return ChannelSpec(BAWGNC, 0.0)
        if h == 1.0:
            return ChannelSpec(BAWGNC, np.inf)
        lo, hi = math.log(1e-2), math.log(1e4)
        f = lambda x: entropy(bawgnc_density(math.exp(x), grid))
        if not f(lo) <= h <= f(hi):
            raise ValueError(f"entropy {h} not attainable on this grid")
    else:
        raise ValueError(f"unknown channel family {family!r}")
    x = optimize.brentq(lambda x: f(x) - h, lo, hi, xtol=tol * 1e-3, rtol=4 * np.finfo(float).eps)
    return ChannelSpec(family, x if family == BSC else math.exp(x))


def bawgnc_entropy_exact(sigma: float) -> float:
    """Entropy of the continuous BAWGNC L-density (adaptive quadrature)."""
    from scipy import integrate

    mu, sd = 2.0 / sigma**2, 2.0 / sigma
    f = lambda x: np.exp(-0.5 * ((x - mu) / sd) ** 2) / (sd * math.sqrt(2 * math.pi)) * np.logaddexp(0, -x) / _LN2
    return integrate.quad(f, mu - 40 * sd, mu + 40 * sd, limit=400, points=[0.0, mu])[0]


# ---------------------------------------------------------------------------
# GEXIT

@dataclass(frozen=True, eq=False)
class GexitKernel:
    """BAWGNC GEXIT kernel sampled on a grid, with its limits at +-inf."""

    grid: Grid
    sigma: float
    values: np.ndarray
    at_neg_inf: float

    def __call__(self, y):
        return _gexit_kernel_eval(self.sigma, np.asarray(y, dtype=float))


_HERMITE = np.polynomial.hermite_e.hermegauss(160)


def _gexit_kernel_eval(sigma: float, y: np.ndarray) -> np.ndarray:
    # weight exp(-(z - 2/s^2)^2 s^2 / 8): the channel L-density, N(2/s^2, 4/s^2)
    mu, sd = 2.0 / sigma**2, 2.0 / sigma
    t, wts = _HERMITE
    wts = wts / wts.sum()
    z = mu + sd * t
    den = wts @ special.expit(-z)
    yy = np.atleast_1d(y)
    num = special.expit(-(z[None, :] + yy[:, None])) @ wts
    out = num / den
    return out.reshape(np.shape(y))


def gexit_kernel_bawgnc(h: float, grid: Grid = DEFAULT_GRID) -> GexitKernel:
    """GEXIT kernel of the BAWGNC whose L-density has entropy ``h``."""
    if not 0.0 < h < 1.0:
        raise ValueError("GEXIT kernel needs 0 < h < 1")
    sigma = channel_from_entropy(BAWGNC, h, grid).param
    return gexit_kernel_sigma(sigma, grid)


def gexit_kernel_sigma(sigma: float, grid: Grid = DEFAULT_GRID) -> GexitKernel:
    vals = _gexit_kernel_eval(sigma, grid.llr)
    mu, sd = 2.0 / sigma**2, 2.0 / sigma
    t, wts = _HERMITE
    den = (wts / wts.sum()) @ special.expit(-(mu + sd * t))
    return GexitKernel(grid, sigma, vals, 1.0 / den)


def gexit_functional(kernel: GexitKernel, a: LDensity) -> float:
    """G = integral a(y) l(y) dy; l(+inf) = 0 and l(-inf) is the kernel's upper limit."""
    if isinstance(a, ErasureMix):
        return a.erasure  # l(0) = 1, l(+inf) = 0
    if a.grid != kernel.grid:
        raise ValueError("kernel and density on different grids")
    return float(a.mass @ kernel.values + a.mass_neg_inf * kernel.at_neg_inf)


# ---------------------------------------------------------------------------
# text serialization (debug dumps)

def dump_density(a: LDensity, fh: TextIO, grid: Grid = DEFAULT_GRID) -> None:
    q = to_quantized(a, a.grid if isinstance(a, Quantized) else grid)
    g = q.grid
    fh.write(f"# grid_max={float(g.grid_max)!r}\n# bins={g.bins}\n")
    fh.write(f"# mass_pos_inf={float(q.mass_pos_inf)!r}\n# mass_neg_inf={float(q.mass_neg_inf)!r}\n")
    fh.write("bin_center,mass\n")
    for x, m in zip(g.llr, q.mass):
        fh.write(f"{float(x)!r},{float(m)!r}\n")


def load_density(lines: Iterable[str]) -> Quantized:
    header = {}
    xs, ms = [], []
    for line in lines:
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            k, _, v = line[1:].strip().partition("=")
            header[k.strip()] = v.strip()
        elif line.startswith("bin_center"):
            continue
        else:
            x, m = line.split(",")
            xs.append(float(x))
            ms.append(float(m))
    grid = Grid(float(header["grid_max"]), int(header["bins"]))
    if len(ms) != grid.n:
        raise ValueError("row count does not match grid")
    return Quantized.from_parts(grid, ms, float(header["mass_pos_inf"]), float(header["mass_neg_inf"]))
