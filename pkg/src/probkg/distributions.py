"""Closed-form algebra over probability distributions.

Three families are first-class values: diagonal Gaussian mixtures (a lone
Gaussian is the K=1 case), piecewise-uniform histograms, and Dirichlets.
Mixtures are closed under affine maps, convolution and normalized products
(Bayesian fusion), with component growth capped at :data:`K_MAX` by
moment-matched reduction.  Divergences use the Jensen-Shannon divergence in
natural log (bounded by ln 2); the only closed form is for histogram pairs
over identical edges, everything else goes through an adaptive Simpson
quadrature.  Coarsening onto a grid yields a histogram whose closed-form
divergence is a certified lower bound on the true one (data processing
inequality), which is what the similarity join uses to prune.

All values are immutable and hashable; every operation is a pure function.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Iterable, Sequence, Union

import numpy as np
from scipy import special as _special

from .errors import (
    BadDistribution,
    BadGrid,
    BadInterval,
    DimensionMismatch,
    EdgesMismatch,
    FamilyMismatch,
    NumericalUnderflow,
    UnsupportedFamily,
    UnsupportedMethod,
    ZeroScale,
)

#: Component cap applied after convolve/fuse.
K_MAX = 32

#: Natural-log bound of the Jensen-Shannon divergence.
LN2 = math.log(2.0)

#: Default absolute tolerance of the production quadrature.
QUAD_TOL = 1e-9

#: Quantile coverage used when building equal-probability grids: the grid
#: spans [q(eps), q(1-eps)] with eps = (1 - coverage) / 2.
DEFAULT_GRID_COVERAGE = 0.999

_SUM_TOL = 1e-12


def _as_float_tuple(xs: Iterable[float], what: str) -> tuple[float, ...]:
    try:
        out = tuple(float(x) for x in xs)
    except (TypeError, ValueError) as exc:
        raise BadDistribution(f"{what}: not numeric") from exc
    for x in out:
        if not math.isfinite(x):
            raise BadDistribution(f"{what}: non-finite value {x!r}")
    return out


@dataclass(frozen=True)
class Gaussian:
    """Diagonal Gaussian N(mean, var) in d >= 1 dimensions.

    ``mean`` and ``var`` are equal-length tuples; every variance must be
    strictly positive.
    """

    mean: tuple[float, ...]
    var: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "mean", _as_float_tuple(self.mean, "mean"))
        object.__setattr__(self, "var", _as_float_tuple(self.var, "var"))
        if len(self.mean) != len(self.var):
            raise BadDistribution("mean and var have different lengths")
        if not self.mean:
            raise BadDistribution("dimension must be >= 1")
        if any(v <= 0.0 for v in self.var):
            raise BadDistribution("variances must be strictly positive")

    @property
    def dim(self) -> int:
        return len(self.mean)


@dataclass(frozen=True)
class Gmm:
    """Gaussian mixture with positive weights summing to one.

    Weights are normalized on construction; components must share one
    dimension and their number is capped at :data:`K_MAX`.
    """

    weights: tuple[float, ...]
    components: tuple[Gaussian, ...]

    def __post_init__(self):
        w = _as_float_tuple(self.weights, "weights")
        comps = tuple(self.components)
        if len(w) != len(comps) or not comps:
            raise BadDistribution("weights/components mismatch or empty mixture")
        if len(comps) > K_MAX:
            raise BadDistribution(f"mixture exceeds the component cap {K_MAX}")
        if any(x <= 0.0 for x in w):
            raise BadDistribution("weights must be strictly positive")
        for c in comps:
            if not isinstance(c, Gaussian):
                raise BadDistribution("components must be Gaussian")
            if c.dim != comps[0].dim:
                raise DimensionMismatch("mixture components differ in dimension")
        total = math.fsum(w)
        object.__setattr__(self, "weights", tuple(x / total for x in w))
        object.__setattr__(self, "components", comps)

    @property
    def dim(self) -> int:
        return self.components[0].dim

    @cached_property
    def _w(self) -> np.ndarray:
        return np.array(self.weights)

    @cached_property
    def _mu(self) -> np.ndarray:
        return np.array([c.mean for c in self.components])  # (K, d)

    @cached_property
    def _var(self) -> np.ndarray:
        return np.array([c.var for c in self.components])  # (K, d)


@dataclass(frozen=True)
class Histogram:
    """Piecewise-uniform density on B bins with strictly increasing edges.

    Masses are nonnegative and normalized on construction.
    """

    edges: tuple[float, ...]
    masses: tuple[float, ...]

    def __post_init__(self):
        e = _as_float_tuple(self.edges, "edges")
        m = _as_float_tuple(self.masses, "masses")
        if len(e) < 2 or len(m) != len(e) - 1:
            raise BadDistribution("need B+1 edges and B masses, B >= 1")
        if any(b <= a for a, b in zip(e, e[1:])):
            raise BadDistribution("edges must be strictly increasing")
        if any(x < 0.0 for x in m):
            raise BadDistribution("masses must be nonnegative")
        total = math.fsum(m)
        if total <= 0.0:
            raise BadDistribution("total mass must be positive")
        object.__setattr__(self, "edges", e)
        object.__setattr__(self, "masses", tuple(x / total for x in m))

    @cached_property
    def _e(self) -> np.ndarray:
        return np.array(self.edges)

    @cached_property
    def _m(self) -> np.ndarray:
        return np.array(self.masses)

    @cached_property
    def _cum(self) -> np.ndarray:
        c = np.concatenate(([0.0], np.cumsum(self._m)))
        c[-1] = 1.0
        return c


@dataclass(frozen=True)
class Dirichlet:
    """Dirichlet over the (M-1)-simplex, M >= 2, all concentrations > 0."""

    alphas: tuple[float, ...]

    def __post_init__(self):
        a = _as_float_tuple(self.alphas, "alphas")
        if len(a) < 2:
            raise BadDistribution("Dirichlet needs at least 2 concentrations")
        if any(x <= 0.0 for x in a):
            raise BadDistribution("concentrations must be strictly positive")
        object.__setattr__(self, "alphas", a)


Distribution = Union[Gaussian, Gmm, Histogram, Dirichlet]


def as_gmm(d: Distribution) -> Gmm:
    """Promote a lone Gaussian to a one-component mixture."""
    if isinstance(d, Gmm):
        return d
    if isinstance(d, Gaussian):
        return Gmm((1.0,), (d,))
    raise UnsupportedFamily(f"not a Gaussian family value: {type(d).__name__}")


def dim_of(d: Distribution) -> int:
    if isinstance(d, (Gaussian, Gmm)):
        return d.dim
    if isinstance(d, Histogram):
        return 1
    if isinstance(d, Dirichlet):
        return len(d.alphas)
    raise UnsupportedFamily(f"not a distribution: {type(d).__name__}")


def family_of(d: Distribution) -> str:
    if isinstance(d, (Gaussian, Gmm)):
        return "gmm"
    if isinstance(d, Histogram):
        return "hist"
    if isinstance(d, Dirichlet):
        return "dir"
    raise UnsupportedFamily(f"not a distribution: {type(d).__name__}")


# --- lexical grammar ----------------------------------------------------------
#
#   gmm(w1:N(mu1,var1);...;wK:N(muK,varK))
#   hist(e0,e1,...,eB|m1,...,mB)
#   dir(a1,...,aM)
#
# Decimal numbers with optional exponent, no whitespace.  Serialization uses
# 17 significant digits so parse(format(d)) == d exactly.

_NUM = r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
_GMM_ITEM = re.compile(rf"({_NUM}):N\(({_NUM}),({_NUM})\)\Z")
_HIST_RE = re.compile(rf"hist\(({_NUM}(?:,{_NUM})*)\|({_NUM}(?:,{_NUM})*)\)\Z")
_DIR_RE = re.compile(rf"dir\(({_NUM}(?:,{_NUM})*)\)\Z")
_GMM_RE = re.compile(r"gmm\((.*)\)\Z", re.DOTALL)


def parse_distribution(text: str) -> Distribution:
    """Parse the exact lexical grammar shared with the graph format."""
    if text.startswith("gmm("):
        m = _GMM_RE.match(text)
        if m is None:
            raise BadDistribution(f"malformed mixture literal: {text!r}")
        weights: list[float] = []
        comps: list[Gaussian] = []
        for item in m.group(1).split(";"):
            im = _GMM_ITEM.match(item)
            if im is None:
                raise BadDistribution(f"malformed mixture component: {item!r}")
            weights.append(float(im.group(1)))
            comps.append(Gaussian((float(im.group(2)),), (float(im.group(3)),)))
        return Gmm(tuple(weights), tuple(comps))
    if text.startswith("hist("):
        m = _HIST_RE.match(text)
        if m is None:
            raise BadDistribution(f"malformed histogram literal: {text!r}")
        edges = tuple(float(x) for x in m.group(1).split(","))
        masses = tuple(float(x) for x in m.group(2).split(","))
        if len(edges) != len(masses) + 1:
            raise BadDistribution("histogram needs B+1 edges for B masses")
        return Histogram(edges, masses)
    if text.startswith("dir("):
        m = _DIR_RE.match(text)
        if m is None:
            raise BadDistribution(f"malformed Dirichlet literal: {text!r}")
        return Dirichlet(tuple(float(x) for x in m.group(1).split(",")))
    raise BadDistribution(f"unknown distribution literal: {text!r}")


def _fmt(x: float) -> str:
    return format(x, ".17g")


def format_distribution(d: Distribution) -> str:
    """Serialize back to the lexical grammar (1-d mixtures only)."""
    if isinstance(d, (Gaussian, Gmm)):
        g = as_gmm(d)
        if g.dim != 1:
            raise UnsupportedFamily(
                "the lexical grammar covers 1-d mixtures only"
            )
        items = (
            f"{_fmt(w)}:N({_fmt(c.mean[0])},{_fmt(c.var[0])})"
            for w, c in zip(g.weights, g.components)
        )
        return "gmm(" + ";".join(items) + ")"
    if isinstance(d, Histogram):
        return (
            "hist("
            + ",".join(_fmt(e) for e in d.edges)
            + "|"
            + ",".join(_fmt(m) for m in d.masses)
            + ")"
        )
    if isinstance(d, Dirichlet):
        return "dir(" + ",".join(_fmt(a) for a in d.alphas) + ")"
    raise UnsupportedFamily(f"not a distribution: {type(d).__name__}")


# --- densities, CDFs, quantiles -----------------------------------------------


def pdf_values(d: Distribution, xs: np.ndarray) -> np.ndarray:
    """Density of a 1-d distribution at the given points (vectorized)."""
    xs = np.asarray(xs, dtype=float)
    if isinstance(d, (Gaussian, Gmm)):
        g = as_gmm(d)
        if g.dim != 1:
            raise DimensionMismatch("densities are evaluated in 1-d only")
        mu = g._mu[:, 0]
        var = g._var[:, 0]
        z = xs[..., None] - mu
        return np.exp(-0.5 * z * z / var) @ (g._w / np.sqrt(2.0 * np.pi * var))
    if isinstance(d, Histogram):
        e = d._e
        idx = np.clip(np.searchsorted(e, xs, side="right") - 1, 0, len(e) - 2)
        dens = d._m[idx] / (e[idx + 1] - e[idx])
        inside = (xs >= e[0]) & (xs <= e[-1])
        return np.where(inside, dens, 0.0)
    raise UnsupportedFamily("densities exist for mixtures and histograms only")


def cdf_values(d: Distribution, xs: np.ndarray) -> np.ndarray:
    """CDF of a 1-d distribution at the given points (vectorized)."""
    xs = np.asarray(xs, dtype=float)
    if isinstance(d, (Gaussian, Gmm)):
        g = as_gmm(d)
        if g.dim != 1:
            raise DimensionMismatch("CDFs are evaluated in 1-d only")
        mu = g._mu[:, 0]
        sd = np.sqrt(g._var[:, 0])
        z = (xs[..., None] - mu) / (sd * math.sqrt(2.0))
        return 0.5 * (1.0 + _special.erf(z)) @ g._w
    if isinstance(d, Histogram):
        return np.interp(xs, d._e, d._cum, left=0.0, right=1.0)
    raise UnsupportedFamily("CDFs exist for mixtures and histograms only")


def cdf(d: Distribution, x: float) -> float:
    """Scalar CDF; accepts -inf/+inf."""
    if math.isinf(x):
        return 0.0 if x < 0 else 1.0
    return float(cdf_values(d, np.array([x]))[0])


def _support_bracket(d: Distribution) -> tuple[float, float]:
    if isinstance(d, (Gaussian, Gmm)):
        g = as_gmm(d)
        sd = np.sqrt(g._var[:, 0])
        return float(np.min(g._mu[:, 0] - 12.0 * sd)), float(
            np.max(g._mu[:, 0] + 12.0 * sd)
        )
    if isinstance(d, Histogram):
        return d.edges[0], d.edges[-1]
    raise UnsupportedFamily("no interval support for this family")


def quantiles(
    d: Distribution,
    probs: np.ndarray,
    tol: float = 1e-10,
    _cdf: Callable[[np.ndarray], np.ndarray] | None = None,
    _bracket: tuple[float, float] | None = None,
) -> np.ndarray:
    """Quantile function by bisection (vectorized over probability levels).

    Bisection runs to an absolute tolerance of ``tol`` on the abscissa;
    ``_cdf``/``_bracket`` let callers supply a pooled CDF that is not itself
    a Distribution value.
    """
    probs = np.asarray(probs, dtype=float)
    fn = _cdf if _cdf is not None else (lambda xs: cdf_values(d, xs))
    lo_v, hi_v = _bracket if _bracket is not None else _support_bracket(d)
    lo = np.full(probs.shape, lo_v)
    hi = np.full(probs.shape, hi_v)
    for _ in range(200):
        if float(np.max(hi - lo)) <= tol:
            break
        mid = 0.5 * (lo + hi)
        below = fn(mid) < probs
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


def equal_probability_grid(
    d: Distribution, bins: int = 32, coverage: float = DEFAULT_GRID_COVERAGE
) -> np.ndarray:
    """Grid of ``bins`` equal-probability cells spanning the coverage quantiles."""
    return pooled_grid(d, None, bins=bins, coverage=coverage)


def pooled_grid(
    a: Distribution,
    b: Distribution | None,
    bins: int = 32,
    coverage: float = DEFAULT_GRID_COVERAGE,
) -> np.ndarray:
    """Equal-probability grid of the pooled pair (a+b)/2 (or of a alone).

    This is the default grid of the similarity join's pruning bound: per
    pair, recomputed from the pooled quantiles so every cell carries equal
    pooled mass.
    """
    if bins < 1:
        raise BadGrid("need at least one bin")
    if not 0.0 < coverage < 1.0:
        raise BadGrid("coverage must be in (0,1)")
    eps = 0.5 * (1.0 - coverage)
    levels = eps + (1.0 - 2.0 * eps) * np.arange(bins + 1) / bins
    if b is None:
        edges = quantiles(a, levels)
    else:
        lo_a, hi_a = _support_bracket(a)
        lo_b, hi_b = _support_bracket(b)
        fn = lambda xs: 0.5 * (cdf_values(a, xs) + cdf_values(b, xs))
        edges = quantiles(
            a, levels, _cdf=fn, _bracket=(min(lo_a, lo_b), max(hi_a, hi_b))
        )
    if np.any(np.diff(edges) <= 0.0):
        raise BadGrid("pooled quantiles collapsed; grid not strictly increasing")
    return edges


# --- algebra ------------------------------------------------------------------


def _pair_arrays(a: Distribution, b: Distribution) -> tuple[Gmm, Gmm]:
    if not isinstance(a, (Gaussian, Gmm)) or not isinstance(b, (Gaussian, Gmm)):
        raise UnsupportedFamily("operation is defined for Gaussian mixtures only")
    ga, gb = as_gmm(a), as_gmm(b)
    if ga.dim != gb.dim:
        raise DimensionMismatch(f"dimensions differ: {ga.dim} vs {gb.dim}")
    return ga, gb


def _build_gmm(w: np.ndarray, mu: np.ndarray, var: np.ndarray) -> Gmm:
    comps = tuple(Gaussian(tuple(m), tuple(v)) for m, v in zip(mu, var))
    return Gmm(tuple(w), comps)


def convolve(a: Distribution, b: Distribution) -> Gmm:
    """Distribution of X + Y for independent mixtures.

    Pairwise closed form: weights multiply, means add, variances add; the
    K_a*K_b product mixture is then reduced to at most :data:`K_MAX`
    components.  Pre-reduction the output moments are exact.
    """
    ga, gb = _pair_arrays(a, b)
    w = (ga._w[:, None] * gb._w[None, :]).reshape(-1)
    mu = (ga._mu[:, None, :] + gb._mu[None, :, :]).reshape(-1, ga.dim)
    var = (ga._var[:, None, :] + gb._var[None, :, :]).reshape(-1, ga.dim)
    w, mu, var = _reduce_arrays(w, mu, var, K_MAX)
    return _build_gmm(w, mu, var)


def fuse(a: Distribution, b: Distribution) -> Gmm:
    """Bayesian fusion: the normalized pointwise product of two mixtures.

    Component pairs follow the Gaussian product identity — precisions add
    and means are precision-weighted — while each pair's weight picks up the
    normalization constant Z_ij, the Gaussian density of mu_i - mu_j under
    variance var_i + var_j (per dimension).  Weights are renormalized and
    the mixture reduced to :data:`K_MAX`.
    """
    if isinstance(a, Histogram) or isinstance(b, Histogram) or (
        isinstance(a, Dirichlet) or isinstance(b, Dirichlet)
    ):
        if family_of(a) != family_of(b):
            raise FamilyMismatch(
                f"cannot fuse {family_of(a)} with {family_of(b)}"
            )
        raise UnsupportedFamily("fusion is defined for Gaussian mixtures only")
    ga, gb = _pair_arrays(a, b)
    va, vb = ga._var[:, None, :], gb._var[None, :, :]
    ma, mb = ga._mu[:, None, :], gb._mu[None, :, :]
    s = va + vb
    diff = ma - mb
    log_z = np.sum(-0.5 * diff * diff / s - 0.5 * np.log(2.0 * np.pi * s), axis=2)
    var = va * vb / s
    mu = (ma * vb + mb * va) / s
    w = ga._w[:, None] * gb._w[None, :] * np.exp(log_z)
    total = float(np.sum(w))
    if total <= 0.0 or not math.isfinite(total):
        raise NumericalUnderflow("all pairwise product masses underflowed")
    k = ga._w.size * gb._w.size
    w, mu, var = _reduce_arrays(
        (w / total).reshape(-1), mu.reshape(k, -1), var.reshape(k, -1), K_MAX
    )
    return _build_gmm(w, mu, var)


def affine(d: Distribution, a: float, b: float) -> Distribution:
    """Distribution of aX + b (a != 0); Dirichlets are not transformable."""
    if a == 0.0:
        raise ZeroScale("affine scale must be nonzero")
    if isinstance(d, (Gaussian, Gmm)):
        g = as_gmm(d)
        comps = tuple(
            Gaussian(
                tuple(a * m + b for m in c.mean), tuple(a * a * v for v in c.var)
            )
            for c in g.components
        )
        return Gmm(g.weights, comps)
    if isinstance(d, Histogram):
        edges = tuple(a * e + b for e in d.edges)
        masses = d.masses
        if a < 0:
            edges = edges[::-1]
            masses = masses[::-1]
        return Histogram(edges, masses)
    raise UnsupportedFamily("affine maps are undefined for Dirichlet values")


def prob_mass(d: Distribution, lo: float, hi: float) -> float:
    """P(lo < X <= hi) for a 1-d mixture or histogram; bounds may be infinite."""
    if not lo < hi:
        raise BadInterval(f"need lo < hi, got ({lo!r}, {hi!r})")
    if isinstance(d, Dirichlet):
        raise UnsupportedFamily("interval masses are undefined for Dirichlets")
    if dim_of(d) != 1:
        raise DimensionMismatch("interval masses are 1-d only")
    p = cdf(d, hi) - cdf(d, lo)
    return min(1.0, max(0.0, p))


def moments(d: Distribution) -> tuple[tuple[float, ...], tuple[float, ...]]:
    """Exact (mean, variance) vectors per family.

    Mixtures use the law of total variance; histograms place each bin's
    mass at its midpoint; Dirichlets use alpha_i/alpha_0 means.
    """
    if isinstance(d, (Gaussian, Gmm)):
        g = as_gmm(d)
        mean = g._w @ g._mu
        var = g._w @ (g._var + g._mu**2) - mean**2
        return tuple(mean.tolist()), tuple(var.tolist())
    if isinstance(d, Histogram):
        mids = 0.5 * (d._e[:-1] + d._e[1:])
        mean = float(d._m @ mids)
        var = float(d._m @ mids**2) - mean * mean
        return (mean,), (max(var, 0.0),)
    if isinstance(d, Dirichlet):
        a = np.array(d.alphas)
        a0 = float(np.sum(a))
        mean = a / a0
        var = a * (a0 - a) / (a0 * a0 * (a0 + 1.0))
        return tuple(mean.tolist()), tuple(var.tolist())
    raise UnsupportedFamily(f"not a distribution: {type(d).__name__}")


def mean_of(d: Distribution) -> float:
    """Scalar mean of a 1-d distribution."""
    m, _ = moments(d)
    if len(m) != 1:
        raise DimensionMismatch("scalar mean requires a 1-d distribution")
    return m[0]


def variance_of(d: Distribution) -> float:
    """Scalar variance of a 1-d distribution."""
    _, v = moments(d)
    if len(v) != 1:
        raise DimensionMismatch("scalar variance requires a 1-d distribution")
    return v[0]


# --- component reduction --------------------------------------------------------


def _ise_merge_cost(
    w: np.ndarray, mu: np.ndarray, var: np.ndarray, i: np.ndarray, j: np.ndarray
) -> np.ndarray:
    """Integrated-squared-error cost of replacing pairs (i, j) by their
    moment-matched merge.

    Uses the closed-form Gaussian product integral
    J(a,b) = prod_dim N(mu_a - mu_b; 0, var_a + var_b):
    ISE = wi^2 J(i,i) + 2 wi wj J(i,j) + wj^2 J(j,j)
          - 2 (wi+wj)(wi J(i,m) + wj J(j,m)) + (wi+wj)^2 J(m,m).
    """

    def J(m1, v1, m2, v2):
        s = v1 + v2
        d = m1 - m2
        return np.exp(np.sum(-0.5 * d * d / s - 0.5 * np.log(2.0 * np.pi * s), axis=-1))

    wi, wj = w[i], w[j]
    wm = wi + wj
    fi, fj = (wi / wm)[:, None], (wj / wm)[:, None]
    mum = fi * mu[i] + fj * mu[j]
    varm = fi * (var[i] + mu[i] ** 2) + fj * (var[j] + mu[j] ** 2) - mum**2
    varm = np.maximum(varm, 1e-300)
    return (
        wi * wi * J(mu[i], var[i], mu[i], var[i])
        + 2.0 * wi * wj * J(mu[i], var[i], mu[j], var[j])
        + wj * wj * J(mu[j], var[j], mu[j], var[j])
        - 2.0 * wm * (wi * J(mu[i], var[i], mum, varm) + wj * J(mu[j], var[j], mum, varm))
        + wm * wm * J(mum, varm, mum, varm)
    )


def _reduce_arrays(
    w: np.ndarray, mu: np.ndarray, var: np.ndarray, k_max: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    k = w.size
    if k <= k_max:
        return w, mu, var
    w, mu, var = w.copy(), mu.copy(), var.copy()
    alive = np.ones(k, dtype=bool)
    ii, jj = np.triu_indices(k, 1)
    cost = np.full((k, k), np.inf)
    cost[ii, jj] = _ise_merge_cost(w, mu, var, ii, jj)
    for _ in range(k - k_max):
        flat = int(np.argmin(cost))  # first occurrence wins on ties
        i, j = divmod(flat, k)
        wm = w[i] + w[j]
        fi, fj = w[i] / wm, w[j] / wm
        mum = fi * mu[i] + fj * mu[j]
        var[i] = fi * (var[i] + mu[i] ** 2) + fj * (var[j] + mu[j] ** 2) - mum**2
        var[i] = np.maximum(var[i], 1e-300)
        mu[i] = mum
        w[i] = wm
        alive[j] = False
        w[j] = 0.0
        cost[j, :] = np.inf
        cost[:, j] = np.inf
        others = np.flatnonzero(alive)
        others = others[others != i]
        if others.size:
            lo = np.minimum(others, i)
            hi = np.maximum(others, i)
            cost[lo, hi] = _ise_merge_cost(w, mu, var, lo, hi)
    keep = np.flatnonzero(alive)
    return w[keep], mu[keep], var[keep]


def reduce_components(d: Distribution, k_max: int = K_MAX) -> Gmm:
    """Moment-matched mixture reduction to at most ``k_max`` components.

    Greedy pairwise merging; each step merges the pair whose moment-matched
    replacement minimizes the integrated squared density error.
    """
    if k_max < 1:
        raise BadDistribution("k_max must be >= 1")
    g = as_gmm(d)
    w, mu, var = _reduce_arrays(g._w, g._mu, g._var, k_max)
    return _build_gmm(w, mu, var)


# --- Jensen-Shannon divergence --------------------------------------------------


#: Densities below this are treated as zero inside divergence integrands.
#: Subnormal values otherwise make a/m overflow when m rounds to zero; the
#: mass dropped is < 1e-297 over any +-8 sigma envelope, orders below every
#: tolerance in use.
_DENSITY_FLOOR = 1e-300


def _jsd_integrand(
    pa: Callable[[np.ndarray], np.ndarray], pb: Callable[[np.ndarray], np.ndarray]
) -> Callable[[np.ndarray], np.ndarray]:
    def f(xs: np.ndarray) -> np.ndarray:
        a = pa(xs)
        b = pb(xs)
        a = np.where(a > _DENSITY_FLOOR, a, 0.0)
        b = np.where(b > _DENSITY_FLOOR, b, 0.0)
        m = 0.5 * (a + b)
        with np.errstate(divide="ignore", invalid="ignore"):
            ta = np.where(a > 0.0, a * np.log(np.where(a > 0.0, a / m, 1.0)), 0.0)
            tb = np.where(b > 0.0, b * np.log(np.where(b > 0.0, b / m, 1.0)), 0.0)
        return 0.5 * (ta + tb)

    return f


def adaptive_simpson(
    f: Callable[[np.ndarray], np.ndarray],
    breakpoints: Sequence[float],
    tol: float,
    max_depth: int = 45,
) -> float:
    """Adaptive Simpson quadrature over consecutive breakpoint segments.

    The interval stack is processed breadth-first with vectorized function
    evaluation; each segment receives an equal share of the absolute
    tolerance, halved on every split, and accepted intervals use the
    Richardson-extrapolated value.  Deterministic for deterministic ``f``.
    """
    pts = np.asarray(breakpoints, dtype=float)
    if pts.size < 2:
        return 0.0
    a = pts[:-1].copy()
    b = pts[1:].copy()
    m = 0.5 * (a + b)
    fa, fm, fb = f(a), f(m), f(b)
    s = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    tol_i = np.full(a.shape, tol / a.size)
    depth = np.zeros(a.shape, dtype=int)
    total = 0.0
    while a.size:
        if a.size > 1_000_000:
            raise NumericalUnderflow(
                "adaptive quadrature exceeded the subdivision budget; "
                "the integrand is numerically unstable on this input"
            )
        lm = 0.5 * (a + m)
        rm = 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        s_l = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
        s_r = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
        err = (s_l + s_r - s) / 15.0
        done = (np.abs(err) <= tol_i) | (depth >= max_depth)
        total += float(np.sum((s_l + s_r + err)[done]))
        keep = ~done
        a = np.concatenate([a[keep], m[keep]])
        b = np.concatenate([m[keep], b[keep]])
        fa = np.concatenate([fa[keep], fm[keep]])
        fb = np.concatenate([fm[keep], fb[keep]])
        m = np.concatenate([lm[keep], rm[keep]])
        fm = np.concatenate([flm[keep], frm[keep]])
        s = np.concatenate([s_l[keep], s_r[keep]])
        tol_i = np.concatenate([tol_i[keep] / 2.0, tol_i[keep] / 2.0])
        depth = np.concatenate([depth[keep] + 1, depth[keep] + 1])
    return total


def _gmm_breakpoints(a: Gmm, b: Gmm) -> np.ndarray:
    mus = np.concatenate([a._mu[:, 0], b._mu[:, 0]])
    sds = np.sqrt(np.concatenate([a._var[:, 0], b._var[:, 0]]))
    lo = float(np.min(mus - 8.0 * sds))
    hi = float(np.max(mus + 8.0 * sds))
    inner = np.unique(mus[(mus > lo) & (mus < hi)])
    return np.unique(np.concatenate([[lo], inner, [hi]]))


def _jsd_hist_pair_exact(a: Histogram, b: Histogram) -> float:
    """Exact divergence of two piecewise-constant densities.

    Both densities are constant on every cell of the merged edge partition,
    so the integral is a finite sum — no quadrature error.
    """
    edges = np.unique(np.concatenate([a._e, b._e]))
    mids = 0.5 * (edges[:-1] + edges[1:])
    widths = np.diff(edges)
    pa = pdf_values(a, mids)
    pb = pdf_values(b, mids)
    return float(np.dot(_jsd_integrand(lambda _: pa, lambda _: pb)(mids), widths))


def _jsd_closed_hist(a: Histogram, b: Histogram) -> float:
    if a.edges != b.edges:
        raise EdgesMismatch("closed-form divergence requires identical edges")
    p = np.where(a._m > _DENSITY_FLOOR, a._m, 0.0)
    q = np.where(b._m > _DENSITY_FLOOR, b._m, 0.0)
    m = 0.5 * (p + q)
    with np.errstate(divide="ignore", invalid="ignore"):
        tp = np.where(p > 0.0, p * np.log(np.where(p > 0.0, p / m, 1.0)), 0.0)
        tq = np.where(q > 0.0, q * np.log(np.where(q > 0.0, q / m, 1.0)), 0.0)
    return float(0.5 * (np.sum(tp) + np.sum(tq)))


def jsd(
    a: Distribution, b: Distribution, method: str = "quadrature", tol: float = QUAD_TOL
) -> float:
    """Jensen-Shannon divergence in natural log, bounded by ln 2.

    ``method`` is ``"closed"`` or ``"quadrature"``.  The closed form exists
    only for histogram pairs over identical edges; mixtures must use
    quadrature (adaptive Simpson over the union of per-component +-8 sigma
    envelopes).  Histogram "quadrature" integrates the merged-edge partition
    exactly.
    """
    fam_a, fam_b = family_of(a), family_of(b)
    if fam_a != fam_b:
        raise FamilyMismatch(f"cannot compare {fam_a} with {fam_b}")
    if fam_a == "dir":
        raise UnsupportedFamily("divergence is undefined for Dirichlets here")
    if method == "closed":
        if fam_a != "hist":
            raise UnsupportedMethod(
                "no closed-form divergence for mixtures; use quadrature"
            )
        return _jsd_closed_hist(a, b)
    if method != "quadrature":
        raise UnsupportedMethod(f"unknown method {method!r}")
    if fam_a == "hist":
        return _jsd_hist_pair_exact(a, b)
    ga, gb = as_gmm(a), as_gmm(b)
    if ga.dim != 1 or gb.dim != 1:
        raise DimensionMismatch("quadrature divergence is 1-d only")
    if ga == gb:
        return 0.0
    f = _jsd_integrand(lambda x: pdf_values(ga, x), lambda x: pdf_values(gb, x))
    return max(0.0, adaptive_simpson(f, _gmm_breakpoints(ga, gb), tol))


def jsd_auto(a: Distribution, b: Distribution) -> float:
    """Closed form when admissible (identical-edge histograms), else quadrature."""
    if isinstance(a, Histogram) and isinstance(b, Histogram) and a.edges == b.edges:
        return jsd(a, b, "closed")
    return jsd(a, b, "quadrature")


# --- coarsening and the pruning bound --------------------------------------------


def coarsen(d: Distribution, grid: Sequence[float]) -> Histogram:
    """Project a 1-d distribution onto a histogram over ``grid``.

    Cell masses are CDF differences; the two tails beyond the grid fold
    into the outermost bins, so the masses sum to one exactly (folding is
    itself a stochastic map, which keeps the pruning bound valid).
    """
    if isinstance(d, Dirichlet):
        raise UnsupportedFamily("coarsening is undefined for Dirichlets")
    if dim_of(d) != 1:
        raise DimensionMismatch("coarsening is 1-d only")
    edges = np.asarray(grid, dtype=float)
    if edges.ndim != 1 or edges.size < 2:
        raise BadGrid("grid needs at least two edges")
    if np.any(np.diff(edges) <= 0.0):
        raise BadGrid("grid edges must be strictly increasing")
    c = cdf_values(d, edges)
    masses = np.maximum(np.diff(c), 0.0)
    # the folds are clamped too: roundoff can push a CDF a few ulp past [0, 1]
    masses[0] += max(float(c[0]), 0.0)
    masses[-1] += max(1.0 - float(c[-1]), 0.0)
    return Histogram(tuple(edges), tuple(masses))


def jsd_lower_bound(a: Distribution, b: Distribution, grid: Sequence[float]) -> float:
    """Certified lower bound on jsd(a, b) via coarsening onto a shared grid.

    Coarsening is a stochastic map, so by the data processing inequality the
    closed-form divergence of the two grid histograms never exceeds the true
    divergence (up to the quadrature tolerance used on the other side).
    """
    return jsd(coarsen(a, grid), coarsen(b, grid), "closed")
