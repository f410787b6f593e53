"""Multi-rate Erlang loss systems and the decoupled BS/RS blocking model.

A loss system has ``K`` subcarriers shared under complete sharing by classes
with demand ``M_c`` and offered load ``rho_c``.  Its stationary distribution
is the product form ``prod rho_c**U_c / U_c!`` over feasible states, which is
evaluated either by enumeration (small systems) or by the occupancy
recursion ``j q(j) = sum_c M_c rho_c q(j - M_c)``.

The relay and base station pools are analysed as separate loss systems: the
RS-MS system first, then the BS system whose hopped arrivals are thinned by
the RS-MS blocking.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .classes import ClassDistribution, HoppedDemand, hopped_joint_distribution
from .errors import InvalidParameterError, StateSpaceTooLargeError

DISCOUNT_MODES = ("aggregate", "per-pair")
DEFAULT_MAX_STATES = 200_000


@dataclass(frozen=True)
class TrafficSpec:
    lam: float
    mu: float = 1.0
    direct_fraction: float = 0.5
    per_rs_split: bool = True
    relay_count: int = 6

    def __post_init__(self):
        if self.lam < 0 or not self.mu > 0:
            raise InvalidParameterError("need lambda >= 0 and mu > 0")
        if not 0 <= self.direct_fraction <= 1:
            raise InvalidParameterError("direct fraction must lie in [0, 1]")
        if self.relay_count < 1:
            raise InvalidParameterError("relay_count must be >= 1")

    @property
    def lambda_direct(self) -> float:
        return self.direct_fraction * self.lam

    @property
    def lambda_hopped(self) -> float:
        return (1 - self.direct_fraction) * self.lam

    @property
    def lambda_hopped_per_rs(self) -> float:
        """Hopped arrival rate offered to one relay."""
        return self.lambda_hopped / self.relay_count if self.per_rs_split else self.lambda_hopped


@dataclass(frozen=True)
class LossClass:
    demand: int
    load: float
    label: str = ""

    def __post_init__(self):
        if self.demand < 1 or self.load < 0:
            raise InvalidParameterError(f"invalid loss class {self}")


@dataclass(frozen=True)
class LossSystem:
    capacity: int
    classes: tuple[LossClass, ...]

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(self.classes))
        if self.capacity < 0:
            raise InvalidParameterError("capacity must be >= 0")

    @property
    def demands(self) -> np.ndarray:
        return np.array([c.demand for c in self.classes], dtype=int)

    @property
    def loads(self) -> np.ndarray:
        return np.array([c.load for c in self.classes], dtype=float)


@dataclass(frozen=True)
class BlockingVector:
    per_class: np.ndarray
    average: float


def _mixture(per_class, weights, loads) -> float:
    """Average blocking under ``weights``; defaults to the share of offered load."""
    per_class = np.asarray(per_class, dtype=float)
    w = np.asarray(loads if weights is None else weights, dtype=float)
    s = w.sum()
    if weights is None:
        w = w / s if s > 0 else w
    return float(np.dot(per_class, w))


# -- enumeration ------------------------------------------------------------


def enumerate_states(sys: LossSystem, max_states: int = DEFAULT_MAX_STATES) -> list[tuple[int, ...]]:
    """All occupancy vectors ``U >= 0`` with ``sum M_c U_c <= K``.

    Classes whose demand exceeds ``K`` only ever appear with zero users.
    """
    demands = [int(d) for d in sys.demands]
    K = sys.capacity
    states: list[tuple[int, ...]] = []

    def rec(i, free, prefix):
        if i == len(demands):
            states.append(tuple(prefix))
            if len(states) > max_states:
                raise StateSpaceTooLargeError(f"more than {max_states} states")
            return
        for u in range(free // demands[i] + 1):
            prefix.append(u)
            rec(i + 1, free - u * demands[i], prefix)
            prefix.pop()

    rec(0, K, [])
    return states


def product_form_probabilities(sys: LossSystem, max_states: int = DEFAULT_MAX_STATES) -> dict[tuple[int, ...], float]:
    states = enumerate_states(sys, max_states)
    loads = sys.loads
    logw = np.empty(len(states))
    for k, s in enumerate(states):
        acc = 0.0
        for u, rho in zip(s, loads):
            if u == 0:
                continue
            if rho == 0:
                acc = -math.inf
                break
            acc += u * math.log(rho) - math.lgamma(u + 1)
        logw[k] = acc
    w = np.exp(logw - logw.max())
    w /= w.sum()
    return dict(zip(states, w.tolist()))


def blocking_set(sys: LossSystem, c: int, max_states: int = DEFAULT_MAX_STATES) -> set[tuple[int, ...]]:
    """States in which an arriving class-``c`` call finds fewer than ``M_c`` free subcarriers."""
    demands = sys.demands
    need = demands[c]
    return {s for s in enumerate_states(sys, max_states) if int(np.dot(demands, s)) + need > sys.capacity}


def per_class_blocking_enumerated(sys: LossSystem, weights=None, max_states: int = DEFAULT_MAX_STATES) -> BlockingVector:
    probs = product_form_probabilities(sys, max_states)
    demands = sys.demands
    used = {s: int(np.dot(demands, s)) for s in probs}
    per = np.array([sum(p for s, p in probs.items() if used[s] + m > sys.capacity) for m in demands])
    return BlockingVector(per, _mixture(per, weights, sys.loads))


# -- occupancy recursion ----------------------------------------------------


def occupancy_distribution(sys: LossSystem) -> np.ndarray:
    """Probability of ``j`` busy subcarriers, ``j = 0..K``."""
    K = sys.capacity
    a = np.zeros(K + 1)
    for c in sys.classes:
        if c.demand <= K:
            a[c.demand] += c.demand * c.load
    top = max((c.demand for c in sys.classes if c.demand <= K), default=0)
    q = np.zeros(K + 1)
    q[0] = 1.0
    for j in range(1, K + 1):
        m = min(j, top)
        q[j] = np.dot(a[1 : m + 1], q[j - 1 :: -1][:m]) / j
        if q[j] > 1e250:
            # rescale everything so far; early entries may underflow harmlessly
            q[: j + 1] /= q[j]
    return q / q.sum()


def per_class_blocking_recursion(sys: LossSystem, weights=None) -> BlockingVector:
    q = occupancy_distribution(sys)
    K = sys.capacity
    # upper[k] = P(occupancy > K - k) accumulated from the top
    upper = np.concatenate([[0.0], np.cumsum(q[::-1])])
    per = np.array([1.0 if m > K else min(1.0, upper[m]) for m in sys.demands])
    return BlockingVector(per, _mixture(per, weights, sys.loads))


def erlang_b(servers: int, load: float) -> float:
    """Erlang-B via the stable recurrence ``B_k = rho B_{k-1} / (k + rho B_{k-1})``."""
    b = 1.0
    for k in range(1, servers + 1):
        b = load * b / (k + load * b)
    return b


# -- decoupled BS / RS model ------------------------------------------------


def rsms_system(traffic: TrafficSpec, p_rsms: ClassDistribution, K_RS: int) -> LossSystem:
    rate = traffic.lambda_hopped_per_rs
    classes = [
        LossClass(int(d), rate * float(p) / traffic.mu, f"hopped:rs_ms:{int(d)}")
        for d, p in zip(p_rsms.demands, p_rsms.probabilities)
    ]
    return LossSystem(K_RS, classes)


def hopped_pass_probabilities(
    p_bsrs: ClassDistribution,
    p_rsms: ClassDistribution,
    rsms_blocking: BlockingVector,
    joint: HoppedDemand | None = None,
    discount_mode: str = "aggregate",
) -> np.ndarray:
    """Probability that a hopped call of each BS-RS demand gets past the relay.

    ``aggregate`` applies the average RS-MS blocking (tail included) to every
    BS-RS demand.  ``per-pair`` conditions on the BS-RS demand through the
    joint demand distribution, which matters when the two legs are dependent.
    """
    if discount_mode not in DISCOUNT_MODES:
        raise InvalidParameterError(f"unknown discount mode {discount_mode!r}")
    per_b = dict(zip((int(d) for d in p_rsms.demands), rsms_blocking.per_class))
    if discount_mode == "aggregate":
        p_hrm = p_rsms.tail_mass + float(np.dot(p_rsms.probabilities, rsms_blocking.per_class))
        return np.full(p_bsrs.scheme.class_count, 1.0 - p_hrm)
    if joint is None:
        joint = hopped_joint_distribution(p_bsrs, p_rsms)
    out = []
    for a in p_bsrs.demands:
        cond = joint.rs_ms_given(int(a))
        r = sum(p * per_b.get(b, 1.0) for b, p in cond.items()) if cond else 0.0
        out.append((1.0 - p_rsms.tail_mass) * (1.0 - r))
    return np.array(out)


def bs_system(
    traffic: TrafficSpec,
    p_bsms: ClassDistribution,
    p_bsrs: ClassDistribution,
    rsms_blocking: BlockingVector,
    K_BS: int,
    p_rsms: ClassDistribution,
    joint: HoppedDemand | None = None,
    discount_mode: str = "aggregate",
) -> LossSystem:
    """Direct and surviving hopped calls merged into one class per demand."""
    loads: dict[int, float] = {}
    for d, p in zip(p_bsms.demands, p_bsms.probabilities):
        loads[int(d)] = loads.get(int(d), 0.0) + traffic.lambda_direct * p
    passing = hopped_pass_probabilities(p_bsrs, p_rsms, rsms_blocking, joint, discount_mode)
    for d, p, s in zip(p_bsrs.demands, p_bsrs.probabilities, passing):
        loads[int(d)] = loads.get(int(d), 0.0) + traffic.lambda_hopped * p * s
    classes = [LossClass(d, lam / traffic.mu, f"bs:{d}") for d, lam in sorted(loads.items())]
    return LossSystem(K_BS, classes)


@dataclass
class BlockingReport:
    p_b_d: float
    p_b_hbr: float
    p_b_hrm: float
    p_b_h: float
    p_b_overall: float
    tail_block_bs_ms: float = 0.0
    tail_block_bs_rs: float = 0.0
    tail_block_rs_ms: float = 0.0
    inputs: dict = field(default_factory=dict)
    per_class: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return asdict(self)


def compose_report(
    traffic: TrafficSpec,
    p_b_d: float,
    p_b_hbr: float,
    p_b_hrm: float,
    tail_bs_ms: float = 0.0,
    tail_bs_rs: float = 0.0,
    tail_rs_ms: float = 0.0,
    inputs: dict | None = None,
    per_class: dict | None = None,
) -> BlockingReport:
    """Combine link blockings, each given for in-range demands, into the report.

    Tail-blocked users are refused on arrival, so each link's blocking is
    ``tail + (1 - tail) * in_range_blocking``.
    """
    for v in (p_b_d, p_b_hbr, p_b_hrm, tail_bs_ms, tail_bs_rs, tail_rs_ms):
        if not -1e-12 <= v <= 1 + 1e-12:
            raise InvalidParameterError(f"probability out of range: {v}")
    d = tail_bs_ms + (1 - tail_bs_ms) * p_b_d
    hbr = tail_bs_rs + (1 - tail_bs_rs) * p_b_hbr
    hrm = tail_rs_ms + (1 - tail_rs_ms) * p_b_hrm
    h = 1 - (1 - hbr) * (1 - hrm)
    f = traffic.direct_fraction
    return BlockingReport(
        p_b_d=d,
        p_b_hbr=hbr,
        p_b_hrm=hrm,
        p_b_h=h,
        p_b_overall=f * d + (1 - f) * h,
        tail_block_bs_ms=tail_bs_ms,
        tail_block_bs_rs=tail_bs_rs,
        tail_block_rs_ms=tail_rs_ms,
        inputs=inputs or {},
        per_class=per_class or {},
    )


@dataclass(frozen=True)
class AnalysisInputs:
    """Everything the loss model needs for one operating point."""

    traffic: TrafficSpec
    K_BS: int
    K_RS: int
    p_bsms: ClassDistribution
    p_bsrs: ClassDistribution
    p_rsms: ClassDistribution
    joint: HoppedDemand | None = None
    discount_mode: str = "aggregate"

    def hopped_demand(self) -> HoppedDemand:
        return self.joint if self.joint is not None else hopped_joint_distribution(self.p_bsrs, self.p_rsms)

    def fingerprint(self) -> str:
        blob = {
            "traffic": asdict(self.traffic),
            "K_BS": self.K_BS,
            "K_RS": self.K_RS,
            "discount_mode": self.discount_mode,
            "dists": [
                (list(map(int, d.demands)), d.probabilities.tolist(), d.tail_mass, d.head_mass)
                for d in (self.p_bsms, self.p_bsrs, self.p_rsms)
            ],
            "joint": None if self.joint is None else sorted((list(k), v) for k, v in self.joint.pairs.items()),
        }
        return hashlib.sha256(json.dumps(blob, sort_keys=True).encode()).hexdigest()[:16]


def _in_range_average(dist: ClassDistribution, per_class: Sequence[float], weights=None) -> float:
    w = dist.probabilities if weights is None else np.asarray(weights, dtype=float)
    s = w.sum()
    return float(np.dot(w, per_class) / s) if s > 0 else 0.0


def analyze(inputs: AnalysisInputs, scenario: str | None = None) -> BlockingReport:
    """Decoupled analysis: RS-MS system, then the BS system with discounted hopped load."""
    t = inputs.traffic
    rs = rsms_system(t, inputs.p_rsms, inputs.K_RS)
    rs_block = per_class_blocking_recursion(rs)
    passing = hopped_pass_probabilities(
        inputs.p_bsrs, inputs.p_rsms, rs_block, inputs.joint, inputs.discount_mode
    )
    bs = bs_system(
        t, inputs.p_bsms, inputs.p_bsrs, rs_block, inputs.K_BS, inputs.p_rsms, inputs.joint, inputs.discount_mode
    )
    bs_block = per_class_blocking_recursion(bs)
    by_demand = dict(zip((int(c.demand) for c in bs.classes), bs_block.per_class))
    b_direct = np.array([by_demand.get(int(d), 1.0 if d > inputs.K_BS else 0.0) for d in inputs.p_bsms.demands])
    b_bsrs = np.array([by_demand.get(int(d), 1.0 if d > inputs.K_BS else 0.0) for d in inputs.p_bsrs.demands])

    p_d = _in_range_average(inputs.p_bsms, b_direct)
    p_hrm = _in_range_average(inputs.p_rsms, rs_block.per_class)
    # BS-RS demands of the calls that reached the BS
    p_hbr = _in_range_average(inputs.p_bsrs, b_bsrs, inputs.p_bsrs.probabilities * passing)

    meta = {"scenario": scenario or inputs.fingerprint(), "lambda": t.lam, "mu": t.mu, "f": t.direct_fraction}
    per_class = {
        "rs_ms": {"demands": inputs.p_rsms.demands.tolist(), "blocking": rs_block.per_class.tolist()},
        "bs": {"demands": [int(c.demand) for c in bs.classes], "blocking": bs_block.per_class.tolist()},
    }
    return compose_report(
        t,
        p_d,
        p_hbr,
        p_hrm,
        inputs.p_bsms.tail_mass,
        inputs.p_bsrs.tail_mass,
        inputs.p_rsms.tail_mass,
        inputs=meta,
        per_class=per_class,
    )
