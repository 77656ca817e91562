"""Concept-level statistical reasoning with axis-parallel box embeddings.

A concept is a box; the conditional probability of D given C is the volume
of their intersection over the volume of C.  Fitting runs plain gradient
descent on a smoothed (softplus-length) version of that ratio so degenerate
overlaps still carry gradient signal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .errors import (
    BadAxiom,
    DegenerateConditioningBox,
    EmptyAxioms,
    ProbKgError,
    UnknownConcept,
    UnknownIndividual,
)

DEFAULT_TAU = 0.1


@dataclass(frozen=True)
class Box:
    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self):
        if len(self.lo) != len(self.hi):
            raise ProbKgError("box corners disagree on dimension")
        if any(l > h for l, h in zip(self.lo, self.hi)):
            raise ProbKgError("box lower corner exceeds upper corner")

    @property
    def dim(self) -> int:
        return len(self.lo)


@dataclass(frozen=True)
class ConceptSpace:
    dim: int
    boxes: dict[str, Box] = field(default_factory=dict)
    tau: float = DEFAULT_TAU

    def __post_init__(self):
        if self.dim < 1:
            raise ProbKgError("space dimension must be at least 1")
        if self.tau < 0:
            raise ProbKgError("softness temperature must be non-negative")
        for name, box in self.boxes.items():
            if box.dim != self.dim:
                raise ProbKgError(
                    f"box for {name} has dimension {box.dim}, space has {self.dim}"
                )


@dataclass(frozen=True)
class StatAxiom:
    c: str
    d: str
    p: float = 1.0
    kind: str = "cond"  # "cond" or "subs"

    def __post_init__(self):
        if self.kind not in ("cond", "subs"):
            raise ProbKgError(f"unknown axiom kind {self.kind!r}")
        if not (0.0 <= self.p <= 1.0) or math.isnan(self.p):
            raise ProbKgError(f"axiom probability {self.p} outside [0, 1]")


def conditional(c: str, d: str, p: float) -> StatAxiom:
    return StatAxiom(c, d, p, "cond")


def subsumption(c: str, d: str) -> StatAxiom:
    return StatAxiom(c, d, 1.0, "subs")


# --- axiom files -------------------------------------------------------------


def parse_axioms(text: str) -> list[StatAxiom]:
    """One axiom per line: ``cond <C> <D> <p>`` or ``subs <C> <D>``."""
    axioms = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] == "cond":
            if len(parts) != 4:
                raise BadAxiom(line_no, "cond takes exactly <C> <D> <p>")
            try:
                p = float(parts[3])
            except ValueError:
                raise BadAxiom(line_no, f"{parts[3]!r} is not a number") from None
            if not (0.0 <= p <= 1.0) or math.isnan(p):
                raise BadAxiom(line_no, f"probability {parts[3]} outside [0, 1]")
            axioms.append(conditional(parts[1], parts[2], p))
        elif parts[0] == "subs":
            if len(parts) != 3:
                raise BadAxiom(line_no, "subs takes exactly <C> <D>")
            axioms.append(subsumption(parts[1], parts[2]))
        else:
            raise BadAxiom(line_no, f"unknown axiom kind {parts[0]!r}")
    return axioms


def format_axioms(axioms: list[StatAxiom]) -> str:
    lines = []
    for ax in axioms:
        if ax.kind == "subs":
            lines.append(f"subs {ax.c} {ax.d}")
        else:
            lines.append(f"cond {ax.c} {ax.d} {ax.p:.17g}")
    return "\n".join(lines) + ("\n" if lines else "")


def space_to_json(space: ConceptSpace) -> dict:
    return {
        "dim": space.dim,
        "tau": space.tau,
        "boxes": {
            name: {"lo": list(box.lo), "hi": list(box.hi)}
            for name, box in sorted(space.boxes.items())
        },
    }


def space_from_json(doc: dict) -> ConceptSpace:
    boxes = {
        name: Box(tuple(map(float, spec["lo"])), tuple(map(float, spec["hi"])))
        for name, spec in doc["boxes"].items()
    }
    return ConceptSpace(int(doc["dim"]), boxes, float(doc["tau"]))


# --- volumes and conditional probability --------------------------------------


def _soft_len(x: np.ndarray, tau: float) -> np.ndarray:
    # tau * softplus(x / tau), written to survive large |x| / tau.
    return np.maximum(x, 0.0) + tau * np.log1p(np.exp(-np.abs(x) / tau))


def _overlap(a: Box, b: Box) -> np.ndarray:
    return np.minimum(np.asarray(a.hi), np.asarray(b.hi)) - np.maximum(
        np.asarray(a.lo), np.asarray(b.lo)
    )


def box_volume(space: ConceptSpace, name: str) -> float:
    """Soft volume when tau > 0, exact volume when tau == 0."""
    if name not in space.boxes:
        raise UnknownConcept(f"no box for concept {name}")
    box = space.boxes[name]
    edges = np.asarray(box.hi) - np.asarray(box.lo)
    if space.tau > 0:
        return float(np.prod(_soft_len(edges, space.tau)))
    return float(np.prod(edges))


def cond_prob(space: ConceptSpace, c: str, d: str) -> float:
    """Overlap volume of D with C over the volume of C, in [0, 1]."""
    for name in (c, d):
        if name not in space.boxes:
            raise UnknownConcept(f"no box for concept {name}")
    bc, bd = space.boxes[c], space.boxes[d]
    ov = _overlap(bc, bd)
    edges = np.asarray(bc.hi) - np.asarray(bc.lo)
    if space.tau > 0:
        ratio = np.prod(_soft_len(ov, space.tau)) / np.prod(
            _soft_len(edges, space.tau)
        )
        return float(min(1.0, max(0.0, ratio)))
    vol_c = float(np.prod(edges))
    if vol_c == 0.0:
        raise DegenerateConditioningBox(
            f"concept {c} has zero volume; conditioning is undefined"
        )
    vol_ov = float(np.prod(np.maximum(ov, 0.0)))
    return min(1.0, max(0.0, vol_ov / vol_c))


def instance_prob(
    space: ConceptSpace,
    abox: list[tuple[str, str]],
    individual: str,
    d: str,
) -> float:
    """Instance-level estimate: condition on the most specific asserted concept.

    Most specific means smallest (soft) volume among the individual's
    asserted memberships; a direct assertion in the target concept wins
    outright.
    """
    asserted = [concept for ind, concept in abox if ind == individual]
    if not asserted:
        raise UnknownIndividual(f"{individual} has no concept assertions")
    if d in asserted:
        return 1.0
    best = min(asserted, key=lambda name: (box_volume(space, name), name))
    return cond_prob(space, best, d)


# --- fitting ------------------------------------------------------------------


def _loss_and_grad(
    centers: np.ndarray,
    loglens: np.ndarray,
    axiom_idx: list[tuple[int, int, float]],
    tau: float,
    floor: float = 0.0,
    floor_weight: float = 0.0,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean squared error over axioms, with analytic gradients.

    Ties in the min/max corners are broken toward the conditioning box so
    the subgradient choice is deterministic.
    """
    n = len(axiom_idx)
    g_c = np.zeros_like(centers)
    g_l = np.zeros_like(loglens)
    loss = 0.0
    for ci, di, p in axiom_idx:
        e_c = np.exp(loglens[ci])
        e_d = np.exp(loglens[di])
        hi_c = centers[ci] + e_c / 2
        lo_c = centers[ci] - e_c / 2
        hi_d = centers[di] + e_d / 2
        lo_d = centers[di] - e_d / 2
        ov = np.minimum(hi_c, hi_d) - np.maximum(lo_c, lo_d)
        s_ov = _soft_len(ov, tau)
        s_c = _soft_len(e_c, tau)
        prob = float(np.prod(s_ov / s_c))
        r = prob - p
        loss += r * r
        a = prob * expit(ov / tau) / s_ov
        b = prob * expit(e_c / tau) / s_c
        hi_side_c = (hi_c <= hi_d).astype(float)
        lo_side_c = (lo_c >= lo_d).astype(float)
        d_hi_c = a * hi_side_c
        d_hi_d = a * (1.0 - hi_side_c)
        d_lo_c = -a * lo_side_c
        d_lo_d = -a * (1.0 - lo_side_c)
        coeff = 2.0 * r / n
        g_c[ci] += coeff * (d_hi_c + d_lo_c)
        g_c[di] += coeff * (d_hi_d + d_lo_d)
        g_l[ci] += coeff * ((d_hi_c - d_lo_c) * e_c / 2 - b * e_c)
        g_l[di] += coeff * (d_hi_d - d_lo_d) * e_d / 2
    loss /= n
    if floor_weight > 0.0:
        deficit = np.maximum(0.0, math.log(floor) - loglens)
        loss += floor_weight * float(np.sum(deficit**2))
        g_l -= 2.0 * floor_weight * deficit
    return loss, g_c, g_l


def fit(
    axioms: list[StatAxiom],
    dim: int,
    *,
    lr: float = 0.1,
    iters: int = 500,
    tau: float = DEFAULT_TAU,
    seed: int = 0,
    floor: float = 0.0,
    floor_weight: float = 0.0,
) -> tuple[ConceptSpace, list[float]]:
    """Gradient-descent fit of boxes to the axioms' conditional targets.

    The step size halves whenever a step would increase the loss, so the
    returned trace is non-increasing.  Stops early once no step of any
    size improves the loss.
    """
    if not axioms:
        raise EmptyAxioms("fit needs at least one axiom")
    if dim < 1:
        raise ProbKgError("space dimension must be at least 1")
    if floor_weight > 0.0 and floor <= 0.0:
        raise ProbKgError("volume floor penalty needs a positive floor")
    names = sorted({n for ax in axioms for n in (ax.c, ax.d)})
    index = {n: i for i, n in enumerate(names)}
    axiom_idx = [(index[ax.c], index[ax.d], ax.p) for ax in axioms]
    rng = np.random.default_rng(seed)
    centers = rng.normal(0.0, 0.1, size=(len(names), dim))
    loglens = np.zeros((len(names), dim))

    loss, g_c, g_l = _loss_and_grad(
        centers, loglens, axiom_idx, tau, floor, floor_weight
    )
    trace = [loss]
    step = lr
    for _ in range(iters):
        while True:
            nc = centers - step * g_c
            nl = loglens - step * g_l
            n_loss, n_gc, n_gl = _loss_and_grad(
                nc, nl, axiom_idx, tau, floor, floor_weight
            )
            if n_loss <= loss or step < 1e-12:
                break
            step /= 2
        if n_loss > loss:
            break
        centers, loglens, loss, g_c, g_l = nc, nl, n_loss, n_gc, n_gl
        trace.append(loss)

    boxes = {}
    for name, i in index.items():
        e = np.exp(loglens[i])
        boxes[name] = Box(
            tuple((centers[i] - e / 2).tolist()),
            tuple((centers[i] + e / 2).tolist()),
        )
    return ConceptSpace(dim, boxes, tau), trace


def finite_diff_check(
    space: ConceptSpace,
    axioms: list[StatAxiom],
    step: float = 1e-5,
) -> float:
    """Max analytic-vs-central-difference gradient gap, relative to the
    largest gradient magnitude (floored at 1e-8)."""
    if space.tau <= 0:
        raise ProbKgError("gradient check requires a smooth space (tau > 0)")
    if not axioms:
        raise EmptyAxioms("gradient check needs at least one axiom")
    names = sorted(space.boxes)
    index = {n: i for i, n in enumerate(names)}
    for ax in axioms:
        for n in (ax.c, ax.d):
            if n not in index:
                raise UnknownConcept(f"no box for concept {n}")
    axiom_idx = [(index[ax.c], index[ax.d], ax.p) for ax in axioms]
    centers = np.zeros((len(names), space.dim))
    loglens = np.zeros((len(names), space.dim))
    for n, i in index.items():
        lo = np.asarray(space.boxes[n].lo)
        hi = np.asarray(space.boxes[n].hi)
        centers[i] = (lo + hi) / 2
        loglens[i] = np.log(np.maximum(hi - lo, 1e-12))

    _, g_c, g_l = _loss_and_grad(centers, loglens, axiom_idx, space.tau)
    analytic = np.concatenate([g_c.ravel(), g_l.ravel()])

    flat = np.concatenate([centers.ravel(), loglens.ravel()])
    n_center = centers.size

    def loss_at(v: np.ndarray) -> float:
        c = v[:n_center].reshape(centers.shape)
        l = v[n_center:].reshape(loglens.shape)
        return _loss_and_grad(c, l, axiom_idx, space.tau)[0]

    numeric = np.zeros_like(flat)
    for j in range(flat.size):
        up = flat.copy()
        dn = flat.copy()
        up[j] += step
        dn[j] -= step
        numeric[j] = (loss_at(up) - loss_at(dn)) / (2 * step)

    gap = float(np.max(np.abs(analytic - numeric)))
    scale = max(1e-8, float(np.max(np.abs(analytic))), float(np.max(np.abs(numeric))))
    return gap / scale
