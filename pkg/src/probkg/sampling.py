"""Sampling baselines: draws, threshold decisions, divergence estimates.

These are the slow references the closed-form paths are benchmarked
against, plus the four threshold-decision strategies (naive, stratified,
sequential, cascade).

Randomness uses a counter-based generator (Philox) with explicit stream
derivation: :func:`derive_rng` hashes a root seed plus arbitrary key parts
into an independent stream, so parallel call sites derive per-task streams
from content rather than call order and results never depend on scheduling
or thread count.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .distributions import (
    Dirichlet,
    Distribution,
    Gaussian,
    Gmm,
    Histogram,
    as_gmm,
    dim_of,
    pdf_values,
    quantiles,
)
from .errors import DimensionMismatch, UnsupportedFamily

ABOVE = "Above"
BELOW = "Below"
UNDECIDED = "Undecided"


def derive_rng(seed: int, *parts) -> np.random.Generator:
    """Independent Philox stream for (seed, *parts).

    Each part is serialized and hashed; the digests feed the seed
    sequence's spawn key.  Streams for distinct keys are statistically
    independent, and the same key always yields the same stream.
    """
    words: list[int] = []
    for part in parts:
        digest = hashlib.sha256(repr(part).encode("utf-8")).digest()
        words.extend(
            int.from_bytes(digest[i : i + 4], "little") for i in range(0, 32, 4)
        )
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=tuple(words))
    return np.random.Generator(np.random.Philox(ss))


def _draw(d: Distribution, n: int, rng: np.random.Generator) -> np.ndarray:
    """n draws using the given stream; component indices are drawn before
    the values so the layout is reproducible."""
    if isinstance(d, (Gaussian, Gmm)):
        g = as_gmm(d)
        comp = rng.choice(len(g.weights), size=n, p=g._w)
        z = rng.standard_normal((n, g.dim))
        out = g._mu[comp] + np.sqrt(g._var[comp]) * z
        return out[:, 0] if g.dim == 1 else out
    if isinstance(d, Histogram):
        e = d._e
        idx = rng.choice(len(d.masses), size=n, p=d._m)
        u = rng.random(n)
        return e[idx] + u * (e[idx + 1] - e[idx])
    if isinstance(d, Dirichlet):
        a = np.array(d.alphas)
        g = rng.standard_gamma(a, size=(n, a.size))
        return g / g.sum(axis=1, keepdims=True)
    raise UnsupportedFamily(f"cannot sample {type(d).__name__}")


def sample(d: Distribution, n: int, seed: int) -> np.ndarray:
    """n i.i.d. draws, deterministic given (d, n, seed).

    Mixtures draw a categorical component then a Gaussian value; histograms
    draw a bin then a uniform point inside it; Dirichlets normalize Gamma
    draws.  1-d families return shape (n,), others (n, d).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    return _draw(d, n, derive_rng(seed, "sample"))


@dataclass(frozen=True)
class Decision:
    """Outcome of a threshold test: is P(X > c) >= theta?"""

    verdict: str  # ABOVE | BELOW | UNDECIDED
    samples_used: int
    estimate: float


@dataclass(frozen=True)
class SamplerConfig:
    strategy: str = "naive"  # naive | stratified | sprt | cascade
    budget: int = 10_000
    alpha: float = 0.05
    beta: float = 0.05
    strata: int = 8
    delta: float = 0.02  # SPRT indifference half-width
    seed: int = 0

    def __post_init__(self):
        if self.budget < 1:
            raise ValueError("budget must be >= 1")
        if not (0.0 < self.alpha < 0.5 and 0.0 < self.beta < 0.5):
            raise ValueError("alpha and beta must be in (0, 0.5)")
        if self.strata < 1:
            raise ValueError("strata must be >= 1")
        if self.strategy not in ("naive", "stratified", "sprt", "cascade"):
            raise ValueError(f"unknown strategy {self.strategy!r}")


def wilson_interval(k: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    """Wilson 95% score interval for a binomial proportion."""
    if n == 0:
        return 0.0, 1.0
    phat = k / n
    z2 = z * z
    denom = 1.0 + z2 / n
    center = (phat + z2 / (2 * n)) / denom
    half = z * math.sqrt(phat * (1 - phat) / n + z2 / (4 * n * n)) / denom
    return center - half, center + half


def _naive_counts(d, c, n, rng) -> int:
    return int(np.count_nonzero(_draw(d, n, rng) > c))


def _stratified_counts(d, c, n, strata, rng) -> int:
    """Proportional allocation over equal-probability strata.

    Stratum i covers the quantile band [i/S, (i+1)/S); draws invert the CDF
    at uniform levels inside the band (bisection, tol 1e-10).  With equal
    bands and proportional allocation, the pooled success count is an
    unbiased (variance-reduced) estimator of n * P(X > c).
    """
    per = np.full(strata, n // strata)
    per[: n % strata] += 1
    bands = np.repeat(np.arange(strata), per)
    u = (bands + rng.random(n)) / strata
    xs = quantiles(d, u, tol=1e-10)
    return int(np.count_nonzero(xs > c))


def _sprt(
    d, c, theta, delta, alpha, beta, budget, rng
) -> tuple[str, int, float]:
    """Wald sequential test of H0: p = theta-delta vs H1: p = theta+delta.

    Accept H1 (verdict "Above") when the log likelihood ratio reaches
    log((1-beta)/alpha); accept H0 ("Below") at log(beta/(1-alpha));
    exhausting the budget yields "Undecided".
    """
    p0 = max(theta - delta, 1e-12)
    p1 = min(theta + delta, 1.0 - 1e-12)
    thr_hi = math.log((1.0 - beta) / alpha)
    thr_lo = math.log(beta / (1.0 - alpha))
    inc_pos = math.log(p1 / p0)
    inc_neg = math.log((1.0 - p1) / (1.0 - p0))
    llr = 0.0
    used = 0
    hits = 0
    while used < budget:
        block = min(512, budget - used)
        ys = _draw(d, block, rng) > c
        cum = llr + np.cumsum(np.where(ys, inc_pos, inc_neg))
        crossed = np.flatnonzero((cum >= thr_hi) | (cum <= thr_lo))
        if crossed.size:
            k = int(crossed[0])
            used += k + 1
            hits += int(np.count_nonzero(ys[: k + 1]))
            verdict = ABOVE if cum[k] >= thr_hi else BELOW
            return verdict, used, hits / used
        llr = float(cum[-1])
        used += block
        hits += int(np.count_nonzero(ys))
    return UNDECIDED, used, hits / used if used else 0.0


def mc_threshold(
    d: Distribution, c: float, theta: float, cfg: SamplerConfig
) -> Decision:
    """Decide whether P(X > c) >= theta by the configured strategy.

    naive: spend the whole budget, compare the plain estimate.
    stratified: same budget over equal-probability strata.
    sprt: early-stopping sequential test (see :func:`_sprt`).
    cascade: naive at 10% of budget, stratified at a further 30%, then
    the sequential test on the remainder — escalating only while the
    Wilson 95% interval of the pooled counts still straddles theta.
    """
    if dim_of(d) != 1:
        raise DimensionMismatch("threshold decisions are 1-d only")
    if not 0.0 < theta < 1.0:
        raise ValueError("theta must be in (0,1)")
    if cfg.strategy == "naive":
        rng = derive_rng(cfg.seed, "mc_threshold", "naive")
        k = _naive_counts(d, c, cfg.budget, rng)
        est = k / cfg.budget
        return Decision(ABOVE if est >= theta else BELOW, cfg.budget, est)
    if cfg.strategy == "stratified":
        rng = derive_rng(cfg.seed, "mc_threshold", "stratified")
        k = _stratified_counts(d, c, cfg.budget, cfg.strata, rng)
        est = k / cfg.budget
        return Decision(ABOVE if est >= theta else BELOW, cfg.budget, est)
    if cfg.strategy == "sprt":
        rng = derive_rng(cfg.seed, "mc_threshold", "sprt")
        verdict, used, est = _sprt(
            d, c, theta, cfg.delta, cfg.alpha, cfg.beta, cfg.budget, rng
        )
        return Decision(verdict, used, est)
    # cascade
    b1 = max(1, int(round(0.1 * cfg.budget)))
    rng1 = derive_rng(cfg.seed, "mc_threshold", "cascade.naive")
    k = _naive_counts(d, c, b1, rng1)
    n = b1
    lo, hi = wilson_interval(k, n)
    if not lo <= theta <= hi:
        est = k / n
        return Decision(ABOVE if est >= theta else BELOW, n, est)
    b2 = max(1, int(round(0.3 * cfg.budget)))
    rng2 = derive_rng(cfg.seed, "mc_threshold", "cascade.stratified")
    k += _stratified_counts(d, c, b2, cfg.strata, rng2)
    n += b2
    lo, hi = wilson_interval(k, n)
    if not lo <= theta <= hi:
        est = k / n
        return Decision(ABOVE if est >= theta else BELOW, n, est)
    b3 = cfg.budget - n
    if b3 < 1:
        return Decision(UNDECIDED, n, k / n)
    rng3 = derive_rng(cfg.seed, "mc_threshold", "cascade.sprt")
    verdict, used, est3 = _sprt(
        d, c, theta, cfg.delta, cfg.alpha, cfg.beta, b3, rng3
    )
    return Decision(verdict, n + used, k / n if verdict == UNDECIDED else est3)


def mc_jsd(a: Distribution, b: Distribution, n: int, seed: int) -> float:
    """Jensen-Shannon divergence estimate by mixture sampling.

    Draws n//2 points from each side, evaluates both log densities, and
    averages the two KL estimators against the pointwise mixture density.
    Deterministic given (a, b, n, seed).
    """
    if dim_of(a) != 1 or dim_of(b) != 1:
        raise DimensionMismatch("divergence estimates are 1-d only")
    half = max(1, n // 2)
    xa = _draw(a, half, derive_rng(seed, "mc_jsd", "left"))
    xb = _draw(b, half, derive_rng(seed, "mc_jsd", "right"))
    pa_a, pb_a = pdf_values(a, xa), pdf_values(b, xa)
    pa_b, pb_b = pdf_values(a, xb), pdf_values(b, xb)
    kl_a = float(np.mean(np.log(pa_a / (0.5 * (pa_a + pb_a)))))
    kl_b = float(np.mean(np.log(pb_b / (0.5 * (pa_b + pb_b)))))
    return 0.5 * (kl_a + kl_b)
