"""Subcarrier demand classes derived from the ISR distribution.

A user with ISR ``I`` needs ``ceil(A / log10(1 + 1/I))`` subcarriers to carry
rate ``R`` on subcarriers of bandwidth ``W``, where ``A = (R/W) log10(2)``.
The demand switches from ``m`` to ``m + 1`` exactly at the ISR threshold
``I(m) = 1 / (10**(A/m) - 1)``, so demand ``m`` owns the ISR interval
``(I(m - 1), I(m)]`` with ``I(0) = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from .errors import EmptyClassRangeError, InvalidParameterError
from .interference import IsrModel, LinkKind, isr_cdf, isr_sf

LN10 = math.log(10.0)

TAIL_POLICIES = ("block", "truncate-renormalize")


@dataclass(frozen=True)
class RateSpec:
    rate: float  # bit/s
    subcarrier_bandwidth: float  # Hz

    def __post_init__(self):
        if not (self.rate > 0 and self.subcarrier_bandwidth > 0):
            raise InvalidParameterError("rate and subcarrier bandwidth must be positive")

    @property
    def A(self) -> float:
        return self.rate / self.subcarrier_bandwidth * math.log10(2.0)


@dataclass(frozen=True)
class ClassScheme:
    """Consecutive demands ``offset + 1, ..., offset + class_count``."""

    offset: int
    class_count: int

    def __post_init__(self):
        if self.offset < 0 or self.class_count < 1:
            raise InvalidParameterError("need offset >= 0 and class_count >= 1")

    @property
    def demands(self) -> np.ndarray:
        return np.arange(self.offset + 1, self.offset + self.class_count + 1)

    @classmethod
    def from_range(cls, min_demand: int, max_demand: int) -> "ClassScheme":
        return cls(offset=min_demand - 1, class_count=max_demand - min_demand + 1)


def isr_threshold(demand, A: float):
    """Largest ISR served by ``demand`` subcarriers; 0 for demand 0."""
    m = np.asarray(demand, dtype=float)
    with np.errstate(divide="ignore"):
        out = np.where(m > 0, 1.0 / np.expm1(A * LN10 / np.where(m > 0, m, 1.0)), 0.0)
    return float(out) if out.ndim == 0 else out


def subcarriers_required(isr, rate: RateSpec):
    """Integer subcarrier demand for ISR value(s) ``isr > 0``.

    The ceiling is evaluated directly; values within round-off of a switch
    point are then settled against :func:`isr_threshold` so the map and the
    class boundaries agree exactly.
    """
    x = np.asarray(isr, dtype=float)
    if np.any(x <= 0):
        raise InvalidParameterError("ISR must be positive")
    A = rate.A
    m = np.maximum(np.ceil(A * LN10 / np.log1p(1.0 / x)), 1.0)
    # ties: at most one step either way
    down = (m > 1) & (x <= isr_threshold(m - 1, A))
    m = np.where(down, m - 1, m)
    up = x > isr_threshold(m, A)
    m = np.where(up, m + 1, m)
    out = m.astype(np.int64)
    return int(out) if out.ndim == 0 else out


def class_boundaries(rate: RateSpec, scheme: ClassScheme) -> np.ndarray:
    """The ``l + 1`` ISR thresholds ``I(M^1 - 1) < I(M^1) < ... < I(M^l)``.

    Class ``r`` (demand ``M^r``) is the interval between entries ``r - 1``
    and ``r`` (right-closed).
    """
    demands = np.arange(scheme.offset, scheme.offset + scheme.class_count + 1)
    return isr_threshold(demands, rate.A)


def _cdf0(model: IsrModel, t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    if np.any(pos):
        out[pos] = isr_cdf(model, t[pos])
    return out


@dataclass(frozen=True)
class ClassDistribution:
    scheme: ClassScheme
    probabilities: np.ndarray
    tail_mass: float = 0.0
    head_mass: float = 0.0
    link: LinkKind | None = None

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=float)
        object.__setattr__(self, "probabilities", p)
        if p.shape != (self.scheme.class_count,):
            raise InvalidParameterError("one probability per class required")
        if np.any(p < -1e-15) or np.any(p > 1 + 1e-12):
            raise InvalidParameterError("class probabilities must lie in [0, 1]")

    @property
    def demands(self) -> np.ndarray:
        return self.scheme.demands

    @property
    def total_mass(self) -> float:
        return float(self.probabilities.sum() + self.tail_mass + self.head_mass)

    def pmf(self) -> dict[int, float]:
        return {int(d): float(p) for d, p in zip(self.demands, self.probabilities)}

    def conditional(self) -> np.ndarray:
        """Class probabilities given that the demand falls inside the scheme."""
        s = self.probabilities.sum()
        return self.probabilities / s if s > 0 else self.probabilities

    def mean_demand(self) -> float:
        return float(np.dot(self.demands, self.conditional()))

    def with_policy(self, policy: str) -> "ClassDistribution":
        """Fold head mass into the lowest class; handle the tail per ``policy``.

        ``"block"`` keeps ``tail_mass`` (those users are refused on arrival);
        ``"truncate-renormalize"`` serves them with the highest class demand.
        """
        if policy not in TAIL_POLICIES:
            raise InvalidParameterError(f"unknown tail policy {policy!r}")
        p = self.probabilities.copy()
        p[0] += self.head_mass
        tail = self.tail_mass
        if policy == "truncate-renormalize":
            p[-1] += tail
            tail = 0.0
        return replace(self, probabilities=p, head_mass=0.0, tail_mass=tail)

    @classmethod
    def from_pmf(cls, pmf: Mapping[int, float], link: LinkKind | None = None, tail_mass: float = 0.0):
        """Build from explicit ``{demand: probability}``; gaps become zero-probability classes."""
        items = {int(k): float(v) for k, v in pmf.items()}
        if not items or min(items) < 1:
            raise InvalidParameterError("demands must be integers >= 1")
        lo, hi = min(items), max(items)
        scheme = ClassScheme.from_range(lo, hi)
        probs = np.array([items.get(d, 0.0) for d in range(lo, hi + 1)])
        return cls(scheme, probs, tail_mass=tail_mass, link=link)


def class_distribution(
    model: IsrModel, rate: RateSpec, scheme: ClassScheme, link: LinkKind | None = None
) -> ClassDistribution:
    t = class_boundaries(rate, scheme)
    cdf = _cdf0(model, t)
    probs = np.clip(np.diff(cdf), 0.0, 1.0)
    tail = float(isr_sf(model, t[-1]))
    return ClassDistribution(scheme, probs, tail_mass=tail, head_mass=float(cdf[0]), link=link)


def demand_pmf(model: IsrModel, rate: RateSpec, tol: float = 1e-13, max_demand: int = 1_000_000) -> dict[int, float]:
    """Probability of every integer demand until the remaining tail is below ``tol``.

    Stops early at ``max_demand``; the mass beyond the last key is
    ``isr_sf(model, isr_threshold(last, A))`` either way.
    """
    pmf = {}
    lo = 0.0
    m = 1
    block = 256
    while m <= max_demand:
        d = np.arange(m, m + block)
        t = isr_threshold(d, rate.A)
        cdf = _cdf0(model, t)
        probs = np.diff(np.concatenate([[lo], cdf]))
        for k, p in zip(d, probs):
            pmf[int(k)] = float(max(p, 0.0))
        lo = float(cdf[-1])
        if isr_sf(model, t[-1]) < tol:
            break
        m += block
    return pmf


def detect_class_range(pmf: Mapping[int, float], epsilon: float) -> tuple[int, int]:
    """Smallest and largest demand whose probability is at least ``epsilon``."""
    if not 0 < epsilon < 1:
        raise InvalidParameterError("epsilon must lie in (0, 1)")
    hits = [d for d, p in pmf.items() if p >= epsilon]
    if not hits:
        raise EmptyClassRangeError(f"no demand has probability >= {epsilon}")
    return min(hits), max(hits)


def scheme_for(model: IsrModel, rate: RateSpec, epsilon: float = 1e-4, max_classes: int | None = None) -> ClassScheme:
    """Class grid from the detected demand range, optionally capped in size."""
    # once the remaining tail is below epsilon no later demand can reach it
    lo, hi = detect_class_range(demand_pmf(model, rate, tol=epsilon), epsilon)
    if max_classes:
        hi = min(hi, lo + max_classes - 1)
    return ClassScheme.from_range(lo, hi)


@dataclass(frozen=True)
class HoppedDemand:
    """Joint (BS-RS, RS-MS) demand of a hopped call, given both legs are in range."""

    pairs: dict[tuple[int, int], float] = field(default_factory=dict)

    def __post_init__(self):
        if any(p < 0 for p in self.pairs.values()):
            raise InvalidParameterError("pair probabilities must be >= 0")
        s = sum(self.pairs.values())
        if not math.isclose(s, 1.0, rel_tol=0, abs_tol=1e-10):
            raise InvalidParameterError(f"pair probabilities sum to {s}, expected 1")

    @property
    def totals(self) -> dict[int, float]:
        out: dict[int, float] = {}
        for (a, b), p in self.pairs.items():
            out[a + b] = out.get(a + b, 0.0) + p
        return dict(sorted(out.items()))

    def marginal_bs_rs(self) -> dict[int, float]:
        out: dict[int, float] = {}
        for (a, _), p in self.pairs.items():
            out[a] = out.get(a, 0.0) + p
        return dict(sorted(out.items()))

    def marginal_rs_ms(self) -> dict[int, float]:
        out: dict[int, float] = {}
        for (_, b), p in self.pairs.items():
            out[b] = out.get(b, 0.0) + p
        return dict(sorted(out.items()))

    def rs_ms_given(self, a: int) -> dict[int, float]:
        row = {b: p for (aa, b), p in self.pairs.items() if aa == a}
        s = sum(row.values())
        return {b: p / s for b, p in row.items()} if s > 0 else {}


def hopped_joint_distribution(p_bsrs: ClassDistribution, p_rsms: ClassDistribution) -> HoppedDemand:
    """Independent legs: ``P(a, b) = P_BS-RS(a) P_RS-MS(b)`` over in-range demands."""
    pa, pb = p_bsrs.conditional(), p_rsms.conditional()
    pairs = {
        (int(a), int(b)): float(x * y)
        for a, x in zip(p_bsrs.demands, pa)
        for b, y in zip(p_rsms.demands, pb)
        if x * y > 0
    }
    return HoppedDemand(pairs)
