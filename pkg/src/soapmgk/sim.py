"""Event-driven M/G/k simulator for age-based scheduling policies.

The system has k servers of speed 1/k, Poisson arrivals, i.i.d. sizes, and
preempt-resume with no switching cost. At every decision event the k jobs
of minimal rank are served, ties broken by earliest arrival. Decision
events are arrivals, completions, rank crossings computed by inverting the
piecewise-linear rank function, and tie bookkeeping.

Ties get two treatments. Jobs at exactly equal age share service equally
(they have identical rank trajectories, so round-robin with a vanishing
quantum degenerates to processor sharing; we simulate that limit directly
as an equal-age cluster). Equal-rank ties at different ages cannot
leapfrog under a monotone rank function, so plain FCFS order settles them;
under a nonmonotonic rank function they can, and there the serving job is
granted a minimum service slice (the quantum) before re-evaluation.

A coupled mode runs a 1-server and a k-server system in lockstep on one
shared arrival sequence and traces the difference in relevant work for a
tagged size, which the theory bounds by (k-1) times the old-job cutoff.
"""

from __future__ import annotations

import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field
from heapq import heapify, heappop, heappush

import numpy as np

from .distributions import SizeDistribution, sample_batch
from .errors import ConfigError, NonconvergenceError, NotApplicableError, OverloadError
from .rank import RankFunction, build_rank_function

AGE_TIE_TOL = 1e-9
TIME_QUANTUM = 1e-12  # events closer than this are treated as simultaneous
WARMUP_FRACTION = 0.2
N_BATCHES = 20
T_CRIT_95 = 2.093  # two-sided 95% Student t, 19 dof

SIM_POLICIES = ("fcfs", "fb", "serpt", "m-serpt", "gittins", "m-gittins", "srpt")


@dataclass(frozen=True)
class JobRecord:
    """Schedulable job state; `rank` is the cached rank at age `age`."""

    id: int
    size: float
    age: float
    arrival_time: float
    rank: float


@dataclass(frozen=True)
class SimConfig:
    dist: SizeDistribution
    lam: float
    k: int
    policy: str
    n_jobs: int
    seed: int
    quantum: float | None = None

    def resolved_quantum(self) -> float:
        return self.quantum if self.quantum is not None else 1e-3 * self.dist.mean

    @property
    def rho(self) -> float:
        return self.lam * self.dist.mean

    @property
    def n_warmup(self) -> int:
        return int(self.n_jobs * WARMUP_FRACTION)

    @property
    def n_measured(self) -> int:
        return self.n_jobs - self.n_warmup

    def validate(self):
        if self.policy not in SIM_POLICIES:
            raise ConfigError(f"unknown policy {self.policy!r}")
        if self.rho >= 1.0:
            raise OverloadError(f"rho = {self.rho} >= 1")
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if self.n_measured < 10_000:
            raise ConfigError("need at least 10^4 measured jobs")
        if self.resolved_quantum() <= 0:
            raise ConfigError("quantum must be positive")


@dataclass(frozen=True)
class SimReport:
    policy: str
    dist_spec: str
    lam: float
    rho: float
    k: int
    n_jobs: int
    seed: int
    mean_T: float
    ci_half: float
    n_measured: int
    throughput: float
    max_queue: int
    bin_edges: tuple
    bin_mean_T: tuple
    bin_count: tuple


@dataclass(frozen=True)
class CoupledTrace:
    x: float
    z: float
    k: int
    n_events: int
    max_delta: float
    bound: float
    deltas: np.ndarray = field(compare=False, repr=False, default=None)


def next_crossing_time(rank_fn: RankFunction, serving: JobRecord, waiting_rank: float):
    """Service amount after which the serving job's rank reaches waiting_rank.

    Inverts the piecewise-linear rank representation; None when the rank
    never gets there (e.g. it only decreases ahead).
    """
    age = rank_fn.crossing_age(serving.age, waiting_rank, strict=False)
    if age is None:
        return None
    return max(age - serving.age, 0.0)


class _FastRank:
    """Scalar-friendly view of a RankFunction's knot table."""

    __slots__ = (
        "ages", "ranks", "n", "terminal_flat", "slope_end", "flat_starts",
        "sorted_vals", "tree", "p2",
    )

    def __init__(self, rf: RankFunction):
        self.ages = [float(a) for a in rf.ages]
        self.ranks = [float(r) for r in rf.ranks]
        self.n = len(self.ages)
        self.terminal_flat = rf.terminal_flat
        self.slope_end = rf._slope_end
        starts = []
        if rf.segments:
            starts = [a0 for a0, a1, flat in rf.segments if flat]
        self.flat_starts = starts
        self.sorted_vals = all(
            self.ranks[i + 1] >= self.ranks[i] for i in range(self.n - 1)
        )
        if not self.sorted_vals:
            # max segment tree over knot ranks for first-above queries
            p2 = 1
            while p2 < self.n:
                p2 <<= 1
            tree = [-math.inf] * (2 * p2)
            tree[p2 : p2 + self.n] = self.ranks
            for i in range(p2 - 1, 0, -1):
                tree[i] = max(tree[2 * i], tree[2 * i + 1])
            self.tree = tree
            self.p2 = p2
        else:
            self.tree = None
            self.p2 = 0

    def _first_above(self, j: int, target: float, strict: bool) -> int:
        """First knot index >= j whose rank passes target; -1 if none."""
        if j >= self.n:
            return -1
        t = self.tree
        p2 = self.p2
        i = j + p2
        while True:
            v = t[i]
            if (v > target) if strict else (v >= target):
                while i < p2:
                    left = 2 * i
                    lv = t[left]
                    if (lv > target) if strict else (lv >= target):
                        i = left
                    else:
                        i = left + 1
                idx = i - p2
                return idx if idx < self.n else -1
            while i & 1:
                i >>= 1
            if i <= 1:
                return -1
            i += 1

    def eval(self, a: float) -> float:
        ages, ranks = self.ages, self.ranks
        if a <= ages[0]:
            return ranks[0]
        if a >= ages[-1]:
            if self.terminal_flat:
                return ranks[-1]
            return ranks[-1] + (a - ages[-1]) * self.slope_end
        i = bisect_right(ages, a) - 1
        a0, a1 = ages[i], ages[i + 1]
        r0, r1 = ranks[i], ranks[i + 1]
        if a1 == a0:
            return r1
        return r0 + (a - a0) * (r1 - r0) / (a1 - a0)

    def is_rising(self, a: float) -> bool:
        ages, ranks = self.ages, self.ranks
        if a >= ages[-1]:
            return not self.terminal_flat and self.slope_end > 0
        i = bisect_right(ages, a) - 1
        i = max(i, 0)
        return ranks[i + 1] > ranks[i]

    def crossing(self, from_age: float, target: float, strict: bool):
        ages, ranks = self.ages, self.ranks
        n = self.n
        cur = self.eval(from_age)
        if (cur > target) or (not strict and cur >= target):
            return from_age
        if self.sorted_vals:
            # monotone table: locate the crossing segment by value
            i = bisect_right(ranks, target) if strict else bisect_left(ranks, target)
            if i >= n:
                if self.terminal_flat or self.slope_end <= 0:
                    return None
                return ages[-1] + (target - ranks[-1]) / self.slope_end
            a0 = max(ages[i - 1], from_age) if i > 0 else from_age
            r0 = self.eval(a0)
            a1, r1 = ages[i], ranks[i]
            if r1 == r0:
                return a0
            t = a0 + (target - r0) / (r1 - r0) * (a1 - a0)
            return min(max(t, a0), a1)
        j = bisect_right(ages, from_age) - 1
        j = max(j, 0)
        i = self._first_above(j + 1, target, strict)
        if i == -1:
            if self.terminal_flat or self.slope_end <= 0:
                return None
            a0 = max(from_age, ages[-1])
            r0 = self.eval(a0)
            if r0 >= target and not strict:
                return a0
            return a0 + max(target - r0, 0.0) / self.slope_end
        a0 = max(ages[i - 1], from_age) if i > 0 else from_age
        r0 = self.eval(a0)
        a1, r1 = ages[i], ranks[i]
        if r1 == r0:
            return a0
        t = a0 + (target - r0) / (r1 - r0) * (a1 - a0)
        return min(max(t, a0), a1)

    def next_flat_start(self, age: float):
        for s in self.flat_starts:
            if s > age + AGE_TIE_TOL:
                return s
        return None


class _Unit:
    """One schedulable unit: a job, or an equal-age cluster sharing service."""

    __slots__ = (
        "uid", "age", "jobs", "key_arr", "rank", "dead", "slots",
        "t_event", "age_target", "kind",
    )

    def __init__(self, uid, age, jobs, key_arr):
        self.uid = uid
        self.age = age
        self.jobs = jobs  # heap of (size, idx, arrival_time)
        self.key_arr = key_arr
        self.rank = 0.0
        self.dead = False
        self.slots = 0
        self.t_event = math.inf
        self.age_target = math.inf
        self.kind = ""


class _Stats:
    def __init__(self, cfg: SimConfig):
        self.warmup = cfg.n_warmup
        self.measured = cfg.n_measured
        self.batch_sum = np.zeros(N_BATCHES)
        self.batch_cnt = np.zeros(N_BATCHES, dtype=np.int64)
        qs = np.linspace(0.1, 0.9, 9)
        self.edges = [float(cfg.dist.quantile(q)) for q in qs]
        nb = len(self.edges) + 1
        self.bin_sum = np.zeros(nb)
        self.bin_cnt = np.zeros(nb, dtype=np.int64)
        self.done = 0
        self.t_last = 0.0

    def record(self, idx: int, size: float, t_arr: float, t_done: float):
        if idx < self.warmup or idx >= self.warmup + self.measured:
            return
        t = t_done - t_arr
        b = (idx - self.warmup) * N_BATCHES // self.measured
        self.batch_sum[b] += t
        self.batch_cnt[b] += 1
        i = bisect_right(self.edges, size)
        self.bin_sum[i] += t
        self.bin_cnt[i] += 1
        self.done += 1
        self.t_last = t_done

    @property
    def complete(self) -> bool:
        return self.done >= self.measured

    def mean_ci(self):
        means = self.batch_sum / np.maximum(self.batch_cnt, 1)
        mean = float(self.batch_sum.sum() / max(self.batch_cnt.sum(), 1))
        spread = float(np.std(means, ddof=1)) if len(means) > 1 else 0.0
        return mean, T_CRIT_95 * spread / math.sqrt(N_BATCHES)


class _ArrivalStream:
    """Deterministic chunked Poisson arrivals with i.i.d. sizes."""

    CHUNK = 1 << 14

    def __init__(self, dist: SizeDistribution, lam: float, seed: int):
        ss = np.random.SeedSequence([seed])
        gap_ss, size_ss = ss.spawn(2)
        self._gap_rng = np.random.Generator(np.random.PCG64(gap_ss))
        self._size_rng = np.random.Generator(np.random.PCG64(size_ss))
        self._dist = dist
        self._lam = lam
        self._t = 0.0
        self._times = np.empty(0)
        self._sizes = np.empty(0)
        self._i = 0
        self.index = 0  # global arrival index

    def _refill(self):
        gaps = -np.log1p(-self._gap_rng.random(self.CHUNK)) / self._lam
        self._times = self._t + np.cumsum(gaps)
        self._t = float(self._times[-1])
        self._sizes = sample_batch(self._dist, self._size_rng, self.CHUNK)
        self._i = 0

    def peek_time(self) -> float:
        if self._i >= len(self._times):
            self._refill()
        return float(self._times[self._i])

    def pop(self):
        t = self.peek_time()
        size = float(self._sizes[self._i])
        idx = self.index
        self._i += 1
        self.index += 1
        return t, size, idx


class _Engine:
    """One queueing system; the run loops below drive one or two of these."""

    def __init__(self, cfg: SimConfig, stats: _Stats | None):
        self.cfg = cfg
        self.k = cfg.k
        self.quantum = cfg.resolved_quantum()
        self.policy = cfg.policy
        self.srpt = cfg.policy == "srpt"
        if self.srpt or cfg.policy == "fcfs":
            self.frank = None if self.srpt else _FastRank(build_rank_function("fcfs", cfg.dist))
        else:
            self.frank = _FastRank(build_rank_function(cfg.policy, cfg.dist))
        self.stats = stats
        self.now = 0.0
        self.serving: list[_Unit] = []
        self.waiting: list = []
        self.n_jobs_in_system = 0
        self.max_queue = 0
        self._uid = 0
        self.work_done = 0.0
        self.busy_time = 0.0
        self._cap = max(20_000, cfg.n_jobs // 8)

    # -- rank helpers -------------------------------------------------------

    def _rank_of(self, u: _Unit) -> float:
        if self.srpt:
            return u.jobs[0][0] - u.age
        return self.frank.eval(u.age)

    # -- event computation ----------------------------------------------------

    def _compute_event(self, u: _Unit):
        m = len(u.jobs)
        rate = u.slots / (m * self.k)  # age progress per wall-time unit
        target = u.jobs[0][0]  # completion at min member size
        kind = "complete"
        if not self.srpt:
            # srpt rank only falls during service; completions are its only
            # internal events, preemption happens at arrivals
            if m > 1 and self.frank.flat_starts:
                fs = self.frank.next_flat_start(u.age)
                if fs is not None and fs < target:
                    target, kind = fs, "dissolve"
            w = self._peek_waiting()
            if w is not None:
                strict = w.key_arr > u.key_arr
                ca = self.frank.crossing(u.age, w.rank, strict)
                if ca is not None and ca < target:
                    tol = AGE_TIE_TOL * (1.0 + abs(ca))
                    if abs(ca - w.age) <= tol and self.frank.is_rising(ca):
                        target, kind = w.age, "merge"
                    elif ca <= u.age + tol:
                        target, kind = u.age + self.quantum, "slice"
                    else:
                        target, kind = ca, "cross"
        u.age_target = target
        u.kind = kind
        u.t_event = self.now + (target - u.age) / rate

    def _peek_waiting(self):
        w = self.waiting
        while w:
            top = w[0]
            if top[3].dead:
                heappop(w)
                continue
            return top[3]
        return None

    # -- scheduling -------------------------------------------------------------

    def _reschedule(self):
        for u in self.serving:
            if not u.dead and u.jobs:
                u.rank = self._rank_of(u)
                heappush(self.waiting, (u.rank, u.key_arr, u.uid, u))
        self.serving.clear()
        free = self.k
        w = self.waiting
        while free > 0:
            while w and w[0][3].dead:
                heappop(w)
            if not w:
                break
            u = heappop(w)[3]
            u.slots = min(free, len(u.jobs))
            free -= u.slots
            self.serving.append(u)
        for u in self.serving:
            self._compute_event(u)

    # -- public stepping interface -------------------------------------------------

    def next_internal_time(self) -> float:
        t = math.inf
        for u in self.serving:
            if u.t_event < t:
                t = u.t_event
        return t

    def advance_to(self, t: float):
        dt = t - self.now
        if dt > 0:
            if self.serving:
                self.busy_time += dt
            for u in self.serving:
                rate = u.slots / (len(u.jobs) * self.k)
                u.age += dt * rate
                self.work_done += dt * u.slots / self.k
            self.now = t

    def add_job(self, t: float, size: float, idx: int):
        # caller has advanced the engine to time t already
        self._uid += 1
        u = _Unit(self._uid, 0.0, [(size, idx, t)], idx)
        u.rank = size if self.srpt else self.frank.eval(0.0)
        heappush(self.waiting, (u.rank, u.key_arr, u.uid, u))
        self.n_jobs_in_system += 1
        if self.n_jobs_in_system > self.max_queue:
            self.max_queue = self.n_jobs_in_system
            if self.max_queue > self._cap:
                raise NonconvergenceError(
                    f"queue reached {self.max_queue} jobs; load appears unstable"
                )
        self._reschedule()

    def process_due(self, t: float):
        # handle every serving-unit event scheduled at (effectively) time t
        while True:
            due = None
            for u in self.serving:
                if u.t_event <= t + TIME_QUANTUM:
                    if due is None or (u.t_event, u.uid) < (due.t_event, due.uid):
                        due = u
            if due is None:
                return
            self._handle(due)

    def _handle(self, u: _Unit):
        kind = u.kind
        u.age = u.age_target
        if kind == "complete":
            size = u.jobs[0][0]
            while u.jobs and u.jobs[0][0] <= size:
                s, idx, t_arr = heappop(u.jobs)
                self.n_jobs_in_system -= 1
                if self.stats is not None:
                    self.stats.record(idx, s, t_arr, self.now)
            if not u.jobs:
                u.dead = True
        elif kind == "merge":
            w = self._peek_waiting()
            tol = AGE_TIE_TOL * (1.0 + abs(u.age))
            if w is not None and abs(w.age - u.age) <= tol and w is not u:
                u.age = w.age
                for job in w.jobs:
                    heappush(u.jobs, job)
                u.key_arr = min(u.key_arr, w.key_arr)
                w.dead = True
            # stale target (the tied unit moved): fall through to reschedule
        elif kind == "dissolve":
            u.dead = True
            for size, idx, t_arr in u.jobs:
                self._uid += 1
                nu = _Unit(self._uid, u.age, [(size, idx, t_arr)], idx)
                nu.rank = self._rank_of(nu)
                heappush(self.waiting, (nu.rank, nu.key_arr, nu.uid, nu))
        # "slice" and "cross" need no state change beyond the age advance
        self._reschedule()


def _drive_solo(engine: _Engine, stream: _ArrivalStream, stop) -> None:
    while not stop():
        t_int = engine.next_internal_time()
        t_arr = stream.peek_time()
        if t_int <= t_arr:
            engine.advance_to(t_int)
            engine.process_due(t_int)
        else:
            t, size, idx = stream.pop()
            engine.advance_to(t)
            engine.add_job(t, size, idx)


def run(config: SimConfig) -> SimReport:
    """Simulate to steady state and report mean response time with a 95% CI.

    The first 20% of arrivals warm the system up; the rest are measured
    with 20 batch means. Identical (config, seed) pairs give bit-identical
    reports.
    """
    config.validate()
    stats = _Stats(config)
    engine = _Engine(config, stats)
    stream = _ArrivalStream(config.dist, config.lam, config.seed)
    _drive_solo(engine, stream, lambda: stats.complete)
    mean, ci = stats.mean_ci()
    bin_means = tuple(
        float(s / c) if c else math.nan
        for s, c in zip(stats.bin_sum, stats.bin_cnt)
    )
    return SimReport(
        policy=config.policy,
        dist_spec=config.dist.spec_string(),
        lam=config.lam,
        rho=config.rho,
        k=config.k,
        n_jobs=config.n_jobs,
        seed=config.seed,
        mean_T=mean,
        ci_half=ci,
        n_measured=stats.done,
        throughput=stats.done / stats.t_last if stats.t_last > 0 else 0.0,
        max_queue=engine.max_queue,
        bin_edges=tuple(stats.edges),
        bin_mean_T=bin_means,
        bin_count=tuple(int(c) for c in stats.bin_cnt),
    )


def _relevant_work(engine: _Engine, z: float) -> float:
    total = 0.0
    for u in engine.serving:
        if u.dead:
            continue
        for size, _, _ in u.jobs:
            rem = min(z, size) - u.age
            if rem > 0:
                total += rem
    for entry in engine.waiting:
        u = entry[3]
        if u.dead:
            continue
        for size, _, _ in u.jobs:
            rem = min(z, size) - u.age
            if rem > 0:
                total += rem
    return total


def run_coupled(config: SimConfig, x: float, n_events: int | None = None) -> CoupledTrace:
    """Couple a 1-server and a k-server system on one arrival sequence.

    At every event, record the difference in work relevant to a tagged job
    of size x (relevant work truncates each job's remaining size at the
    old-job cutoff z_x). The trace's maximum is the quantity the (k-1) z_x
    coupling bound controls.
    """
    config.validate()
    if config.policy not in ("fcfs", "fb", "m-serpt", "m-gittins"):
        raise NotApplicableError("coupling requires a monotone rank policy")
    rf = build_rank_function(config.policy, config.dist)
    z = rf.cutoffs(x).z
    if math.isinf(z):
        raise NotApplicableError("tagged size has an unbounded old-job cutoff")
    if n_events is None:
        n_events = 5 * config.n_jobs
    cfg1 = SimConfig(
        dist=config.dist, lam=config.lam, k=1, policy=config.policy,
        n_jobs=config.n_jobs, seed=config.seed, quantum=config.quantum,
    )
    e1 = _Engine(cfg1, None)
    ek = _Engine(config, None)
    stream = _ArrivalStream(config.dist, config.lam, config.seed)
    deltas = np.empty(n_events)
    count = 0
    max_delta = 0.0
    while count < n_events:
        t_int = min(e1.next_internal_time(), ek.next_internal_time())
        t_arr = stream.peek_time()
        if t_int <= t_arr:
            t = t_int
            e1.advance_to(t)
            ek.advance_to(t)
            e1.process_due(t)
            ek.process_due(t)
        else:
            t, size, idx = stream.pop()
            e1.advance_to(t)
            ek.advance_to(t)
            e1.add_job(t, size, idx)
            ek.add_job(t, size, idx)
        d = _relevant_work(ek, z) - _relevant_work(e1, z)
        deltas[count] = d
        if d > max_delta:
            max_delta = d
        count += 1
    return CoupledTrace(
        x=x, z=z, k=config.k, n_events=count,
        max_delta=max_delta, bound=(config.k - 1) * z, deltas=deltas,
    )


__all__ = [
    "JobRecord",
    "SimConfig",
    "SimReport",
    "CoupledTrace",
    "next_crossing_time",
    "run",
    "run_coupled",
    "SIM_POLICIES",
]
