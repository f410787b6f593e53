"""Discrete-event simulation of the BS and relay subcarrier pools.

Arrivals are Poisson; each is direct with probability ``f`` or hopped and
routed to one of the relays uniformly.  Two admission modes:

``coupled``
    A hopped call is admitted only if both its relay and the BS have room,
    and seizes both at once.
``decoupled``
    The relay stage is decided alone and the relay leg is held for its
    holding time whatever happens at the BS; calls that pass the relay are
    then offered to the BS.  This is the independent-pools structure of the
    analytical model.

All random draws are made up front from per-purpose streams, so both modes
see the same arrivals, routes, demands and holding times (common random
numbers).
"""

from __future__ import annotations

import heapq
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy import stats

from .erlang import AnalysisInputs, BlockingReport, analyze
from .errors import InvalidParameterError

MODES = ("decoupled", "coupled")
HOLDING_MODELS = ("single", "split")
STREAMS = ("direct", "hopped", "hopped_bs_rs", "hopped_rs_ms", "overall")
REPORT_FIELDS = {
    "direct": "p_b_d",
    "hopped": "p_b_h",
    "hopped_bs_rs": "p_b_hbr",
    "hopped_rs_ms": "p_b_hrm",
    "overall": "p_b_overall",
}


@dataclass(frozen=True)
class SimConfig:
    mode: str = "decoupled"
    horizon: float = 1000.0
    warmup: float = 50.0
    replications: int = 20
    base_seed: int = 0
    holding_model: str = "single"
    audit: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise InvalidParameterError(f"unknown simulation mode {self.mode!r}")
        if self.holding_model not in HOLDING_MODELS:
            raise InvalidParameterError(f"unknown holding model {self.holding_model!r}")
        if not (self.warmup >= 0 and self.horizon > self.warmup):
            raise InvalidParameterError("need horizon > warmup >= 0")
        if self.replications < 1:
            raise InvalidParameterError("replications must be >= 1")


class PoolAuditError(AssertionError):
    pass


@dataclass(frozen=True)
class StreamEstimate:
    mean: float
    half_width: float
    offered: int
    blocked: int
    empty: bool = False

    def covers(self, value: float) -> bool:
        return abs(value - self.mean) <= self.half_width

    @property
    def carried(self) -> int:
        return self.offered - self.blocked


@dataclass
class ReplicationResult:
    replication: int
    counts: dict[str, tuple[int, int]]  # stream -> (offered, blocked)
    bs_occupancy_time: np.ndarray
    events: int


@dataclass
class BlockingEstimate:
    mode: str
    streams: dict[str, StreamEstimate]
    replications: list[ReplicationResult] = field(default_factory=list)

    def __getitem__(self, stream: str) -> StreamEstimate:
        return self.streams[stream]

    def bs_occupancy(self) -> np.ndarray:
        """Time-averaged BS occupancy distribution, pooled over replications."""
        tot = sum(r.bs_occupancy_time for r in self.replications)
        s = tot.sum()
        return tot / s if s > 0 else tot

    def rows(self):
        """Per-replication rows ``(replication, stream, offered, blocked, fraction)``."""
        for r in self.replications:
            for name, (off, blk) in r.counts.items():
                yield r.replication, name, off, blk, (blk / off if off else 0.0)


@dataclass(frozen=True)
class _Arrivals:
    times: np.ndarray
    direct: np.ndarray
    relay: np.ndarray
    bs_demand: np.ndarray  # -1 means beyond the class range
    rs_demand: np.ndarray  # -1 beyond range, 0 for direct calls
    hold: np.ndarray  # (n, 2): BS leg / RS leg (same value unless split)


def _categorical(u, demands, probs, tail):
    weights = np.append(np.asarray(probs, dtype=float), tail)
    cum = np.cumsum(weights)
    idx = np.searchsorted(cum / cum[-1], u, side="right")
    idx = np.minimum(idx, len(weights) - 1)
    out = np.append(np.asarray(demands, dtype=np.int64), -1)
    return out[idx]


def draw_arrivals(inputs: AnalysisInputs, sim: SimConfig, replication: int) -> _Arrivals:
    ss = np.random.SeedSequence(sim.base_seed + replication)
    arr_rng, route_rng, dem_rng, hold_rng = (np.random.default_rng(s) for s in ss.spawn(4))
    t = inputs.traffic
    if t.lam == 0:
        times = np.empty(0)
    else:
        chunks, now = [], 0.0
        size = max(16, int(t.lam * sim.horizon * 1.1) + 16)
        while now <= sim.horizon:
            c = now + np.cumsum(arr_rng.exponential(1.0 / t.lam, size))
            chunks.append(c)
            now = c[-1]
        times = np.concatenate(chunks)
        times = times[times < sim.horizon]
    n = len(times)
    direct = route_rng.random(n) < t.direct_fraction
    relay = route_rng.integers(0, t.relay_count, size=n)
    u = dem_rng.random((n, 4))

    joint = inputs.hopped_demand()
    pairs = sorted(joint.pairs.items())
    pair_a = np.array([k[0] for k, _ in pairs], dtype=np.int64)
    pair_b = np.array([k[1] for k, _ in pairs], dtype=np.int64)
    pair_cum = np.cumsum([p for _, p in pairs])
    pidx = np.minimum(np.searchsorted(pair_cum / pair_cum[-1], u[:, 3], side="right"), len(pairs) - 1)

    d_direct = _categorical(u[:, 0], inputs.p_bsms.demands, inputs.p_bsms.probabilities, inputs.p_bsms.tail_mass)
    a = np.where(u[:, 1] < inputs.p_bsrs.tail_mass, -1, pair_a[pidx])
    b = np.where(u[:, 2] < inputs.p_rsms.tail_mass, -1, pair_b[pidx])
    bs_demand = np.where(direct, d_direct, a)
    rs_demand = np.where(direct, 0, b)

    hold = hold_rng.exponential(1.0 / t.mu, size=(n, 2))
    if sim.holding_model == "single":
        hold[:, 1] = hold[:, 0]
    return _Arrivals(times, direct, relay, bs_demand, rs_demand, hold)


TraceFn = Callable[[float, str, int, tuple, int], None]


def _replicate(inputs: AnalysisInputs, sim: SimConfig, replication: int, trace: TraceFn | None = None) -> ReplicationResult:
    arr = draw_arrivals(inputs, sim, replication)
    K_BS, K_RS = inputs.K_BS, inputs.K_RS
    coupled = sim.mode == "coupled"
    warm, horizon = sim.warmup, sim.horizon

    bs_free = K_BS
    rs_free = [K_RS] * inputs.traffic.relay_count
    hopped_active = 0
    heap: list = []
    seq = 0
    occ = [0.0] * (K_BS + 1)
    last = warm
    events = 0

    counts = {s: [0, 0] for s in STREAMS}
    per_rs: dict[int, list[int]] = {}
    per_bs: dict[int, list[int]] = {}

    def audit():
        held_bs = sum(e[2] for e in heap)
        held_rs = [0] * len(rs_free)
        for e in heap:
            if e[3] >= 0:
                held_rs[e[3]] += e[4]
        if not (0 <= bs_free <= K_BS and bs_free + held_bs == K_BS):
            raise PoolAuditError(f"BS pool: free={bs_free} held={held_bs} K={K_BS}")
        for f, h in zip(rs_free, held_rs):
            if not (0 <= f <= K_RS and f + h == K_RS):
                raise PoolAuditError(f"RS pool: free={f} held={h} K={K_RS}")

    times = arr.times.tolist()
    direct = arr.direct.tolist()
    relay = arr.relay.tolist()
    bsd = arr.bs_demand.tolist()
    rsd = arr.rs_demand.tolist()
    h_bs = arr.hold[:, 0].tolist()
    h_rs = arr.hold[:, 1].tolist()
    split = sim.holding_model == "split"

    for i, t in enumerate(times):
        # departures first (ties included)
        while heap and heap[0][0] <= t:
            dt, _, nb, r, nr, hop = heapq.heappop(heap)
            if dt > last:
                occ[K_BS - bs_free] += dt - last
                last = dt
            bs_free += nb
            if r >= 0:
                rs_free[r] += nr
            hopped_active -= hop
            events += 1
            if sim.audit:
                audit()
            if trace is not None:
                trace(dt, "departure", bs_free, tuple(rs_free), hopped_active)
        if t > last:
            occ[K_BS - bs_free] += t - last
            last = t

        record = t >= warm
        a = bsd[i]
        events += 1
        if direct[i]:
            ok = a >= 0 and bs_free >= a
            if record:
                counts["direct"][0] += 1
                counts["overall"][0] += 1
                if a >= 0:
                    c = per_bs.setdefault(a, [0, 0])
                    c[0] += 1
                    c[1] += not ok
                if not ok:
                    counts["direct"][1] += 1
                    counts["overall"][1] += 1
            if ok:
                bs_free -= a
                heapq.heappush(heap, (t + h_bs[i], seq, a, -1, 0, 0))
                seq += 1
            kind = "direct-admitted" if ok else "direct-blocked"
        else:
            r, b = relay[i], rsd[i]
            rs_ok = b >= 0 and rs_free[r] >= b
            bs_ok = a >= 0 and bs_free >= a
            if coupled:
                admit_rs = admit_bs = rs_ok and bs_ok
            else:
                admit_rs = rs_ok
                admit_bs = rs_ok and bs_ok
            if record:
                counts["hopped"][0] += 1
                counts["overall"][0] += 1
                counts["hopped_rs_ms"][0] += 1
                if b >= 0:
                    c = per_rs.setdefault(b, [0, 0])
                    c[0] += 1
                    c[1] += not rs_ok
                if not rs_ok:
                    counts["hopped_rs_ms"][1] += 1
                else:
                    counts["hopped_bs_rs"][0] += 1
                    if a >= 0:
                        c = per_bs.setdefault(a, [0, 0])
                        c[0] += 1
                        c[1] += not bs_ok
                    if not bs_ok:
                        counts["hopped_bs_rs"][1] += 1
                if not admit_bs:
                    counts["hopped"][1] += 1
                    counts["overall"][1] += 1
            if admit_bs:
                hopped_active += 1
            if admit_rs:
                rs_free[r] -= b
            if admit_bs:
                bs_free -= a
            if admit_rs and admit_bs and not split:
                heapq.heappush(heap, (t + h_bs[i], seq, a, r, b, 1))
                seq += 1
            else:
                if admit_rs:
                    heapq.heappush(heap, (t + h_rs[i], seq, 0, r, b, 0))
                    seq += 1
                if admit_bs:
                    heapq.heappush(heap, (t + h_bs[i], seq, a, -1, 0, 1))
                    seq += 1
            kind = "hopped-admitted" if admit_bs else "hopped-blocked"
        if sim.audit:
            audit()
        if trace is not None:
            trace(t, kind, bs_free, tuple(rs_free), hopped_active)

    while heap and heap[0][0] <= horizon:
        dt, _, nb, r, nr, hop = heapq.heappop(heap)
        if dt > last:
            occ[K_BS - bs_free] += dt - last
            last = dt
        bs_free += nb
        if r >= 0:
            rs_free[r] += nr
        hopped_active -= hop
        events += 1
        if trace is not None:
            trace(dt, "departure", bs_free, tuple(rs_free), hopped_active)
    if horizon > last:
        occ[K_BS - bs_free] += horizon - last

    out = {s: (v[0], v[1]) for s, v in counts.items()}
    for d in sorted(per_rs):
        out[f"rs_ms:{d}"] = tuple(per_rs[d])
    for d in sorted(per_bs):
        out[f"bs:{d}"] = tuple(per_bs[d])
    return ReplicationResult(replication, out, np.array(occ), events)


def _half_width(fractions: np.ndarray, offered_total: int) -> float:
    n = len(fractions)
    if n < 2:
        return math.inf
    sd = float(np.std(fractions, ddof=1))
    if sd == 0:
        # every replication saw the same extreme value: rule-of-three bound
        if fractions[0] in (0.0, 1.0) and offered_total > 0:
            return 3.0 / offered_total
        return 0.0
    return float(stats.t.ppf(0.975, n - 1) * sd / math.sqrt(n))


def _merge(mode: str, reps: list[ReplicationResult]) -> BlockingEstimate:
    names: list[str] = []
    for r in reps:
        names.extend(k for k in r.counts if k not in names)
    streams = {}
    for name in names:
        off = np.array([r.counts.get(name, (0, 0))[0] for r in reps])
        blk = np.array([r.counts.get(name, (0, 0))[1] for r in reps])
        frac = np.where(off > 0, blk / np.maximum(off, 1), 0.0)
        total = int(off.sum())
        streams[name] = StreamEstimate(
            mean=float(frac.mean()),
            half_width=_half_width(frac, total) if total else 0.0,
            offered=total,
            blocked=int(blk.sum()),
            empty=total == 0,
        )
    return BlockingEstimate(mode, streams, reps)


def run(
    inputs: AnalysisInputs,
    sim: SimConfig,
    trace: TraceFn | None = None,
    workers: int = 1,
) -> BlockingEstimate:
    """Simulate ``sim.replications`` independent runs and merge them.

    Replication ``k`` is seeded with ``sim.base_seed + k``; results are
    identical for any ``workers`` count.  ``trace`` (serial runs only) is
    called after every event with ``(time, kind, bs_free, rs_free,
    hopped_in_service)``.
    """
    if inputs.K_BS < 0 or inputs.K_RS < 0:
        raise InvalidParameterError("capacities must be >= 0")
    idx = range(sim.replications)
    if workers > 1 and trace is None:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            reps = list(ex.map(_replicate, [inputs] * len(idx), [sim] * len(idx), idx))
    else:
        reps = [_replicate(inputs, sim, k, trace) for k in idx]
    return _merge(sim.mode, reps)


@dataclass
class ModeComparison:
    analytic: BlockingReport
    coupled: BlockingEstimate
    decoupled: BlockingEstimate

    def table(self):
        """Rows ``(stream, analytic, decoupled mean, hw, coupled mean, hw, gap, covers)``.

        ``gap`` is analytic minus coupled mean; ``covers`` says whether the
        decoupled CI contains the analytic value.
        """
        for s in STREAMS:
            a = getattr(self.analytic, REPORT_FIELDS[s])
            d, c = self.decoupled[s], self.coupled[s]
            yield s, a, d.mean, d.half_width, c.mean, c.half_width, a - c.mean, d.covers(a)


def compare_modes(inputs: AnalysisInputs, sim: SimConfig, workers: int = 1) -> ModeComparison:
    """Coupled and decoupled runs on common random numbers, next to the analysis."""
    report = analyze(inputs)
    coupled = run(inputs, replace(sim, mode="coupled"), workers=workers)
    decoupled = run(inputs, replace(sim, mode="decoupled"), workers=workers)
    return ModeComparison(report, coupled, decoupled)
