"""Synthetic streams, Monte Carlo trials and the runtime benchmark harness."""

import csv
import gc
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from joblib import Parallel, delayed
from scipy.stats import norm

from .baselines import EBH, ELOND, ETOAD, RLOND, OnlineEBH
from .closure import ClosedELOND, ClosedELONDAlt, ClosedRLOND
from .core import ConfigError, as_gamma, sup_fdp_from_times
from .donation import (
    DonationEBH,
    DonationELOND,
    DonationETOAD,
    DonationOnlineEBH,
    DonationRLOND,
    RandomizedDonationELOND,
)
from .validation import check_delta

# name -> (class, evidence kind, streaming?)
PROCEDURES = {
    "elond": (ELOND, "e", True),
    "rlond": (RLOND, "p", True),
    "closed-elond": (ClosedELOND, "e", True),
    "closed-elond-alt": (ClosedELONDAlt, "e", True),
    "closed-rlond": (ClosedRLOND, "p", True),
    "donation-elond": (DonationELOND, "e", True),
    "donation-rlond": (DonationRLOND, "p", True),
    "randomized-donation-elond": (RandomizedDonationELOND, "e", True),
    "online-ebh": (OnlineEBH, "e", True),
    "donation-online-ebh": (DonationOnlineEBH, "e", True),
    "etoad": (ETOAD, "e", True),
    "donation-etoad": (DonationETOAD, "e", True),
    "ebh": (EBH, "e", False),
    "donation-ebh": (DonationEBH, "e", False),
}

E_FAMILY = ("elond", "closed-elond", "donation-elond")
P_FAMILY = ("rlond", "closed-rlond", "donation-rlond")


def procedure_evidence(name):
    _lookup(name)
    return PROCEDURES[name][1]


def _lookup(name):
    if name not in PROCEDURES:
        raise ConfigError(f"unknown procedure {name!r}; choose from {', '.join(sorted(PROCEDURES))}")
    return PROCEDURES[name]


def make_procedure(name, delta=0.1, gamma="default", random_state=None):
    """Instantiate a registered procedure with shared settings."""
    cls, _, streaming = _lookup(name)
    if not streaming:
        return cls(delta=delta)
    if cls is RandomizedDonationELOND:
        return cls(delta=delta, gamma=gamma, random_state=random_state)
    return cls(delta=delta, gamma=gamma)


# -- streams ---------------------------------------------------------------


@dataclass
class Stream:
    e_values: np.ndarray
    p_values: np.ndarray
    is_null: np.ndarray
    deadlines: Optional[np.ndarray] = None

    def __len__(self):
        return self.is_null.size

    def evidence(self, kind):
        return self.e_values if kind == "e" else self.p_values


@dataclass
class GaussianLocalConfig:
    """Gaussian observations with autoregressive local dependence.

    ``lag = 0`` makes the latents independent; any positive lag uses the
    exact order-one recursion, whose correlations beyond the lag are below
    ``rho^(lag+1)``.
    """

    m: int = 200
    pi1: float = 0.3
    mu1: float = 3.0
    rho: float = 0.5
    lag: int = 100
    delta: float = 0.1
    seed: Optional[int] = 0

    def validate(self):
        if self.m < 0:
            raise ConfigError("m must be >= 0")
        if not 0.0 <= self.pi1 <= 1.0:
            raise ConfigError("pi1 must lie in [0, 1]")
        if not -1.0 < self.rho < 1.0:
            raise ConfigError("rho must lie in (-1, 1)")
        if self.lag < 0:
            raise ConfigError("lag must be >= 0")
        check_delta(self.delta)
        return self


def ar1_latents(m, rho, rng):
    """Stationary Gaussian vector with ``corr(Z_i, Z_j) = rho^|i-j|``."""
    eps = rng.standard_normal(m)
    z = np.empty(m)
    if m == 0:
        return z
    z[0] = eps[0]
    s = math.sqrt(1.0 - rho * rho)
    for i in range(1, m):
        z[i] = rho * z[i - 1] + s * eps[i]
    return z


def gen_gaussian_local(config, rng=None):
    """Draw one stream: likelihood-ratio e-values and upper-tail p-values."""
    cfg = config.validate()
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    nonnull = rng.random(cfg.m) < cfg.pi1
    z = ar1_latents(cfg.m, cfg.rho, rng) if cfg.lag > 0 else rng.standard_normal(cfg.m)
    x = z + cfg.mu1 * nonnull
    e = np.exp(cfg.mu1 * x - 0.5 * cfg.mu1 ** 2)
    p = norm.sf(x)
    return Stream(e_values=e, p_values=p, is_null=~nonnull)


@dataclass
class BoundedHoeffdingConfig:
    """Bounded observations from a rescaled Beta law, tested with a Hoeffding martingale.

    The null mean is 0; non-nulls have mean ``mu1``. The Beta shapes are
    ``a = a_plus_b (mean - lower) / (upper - lower)`` and ``b = a_plus_b - a``.
    """

    m: int = 200
    pi1: float = 0.3
    mu1: float = 1.0
    a_plus_b: float = 1e-2
    N: int = 100
    lower: float = -4.0
    upper: float = 4.0
    delta: float = 0.1
    gamma: object = "default"
    seed: Optional[int] = 0

    def validate(self):
        if self.m < 0:
            raise ConfigError("m must be >= 0")
        if not 0.0 <= self.pi1 <= 1.0:
            raise ConfigError("pi1 must lie in [0, 1]")
        if not self.a_plus_b > 0:
            raise ConfigError("a_plus_b must be > 0")
        if self.N < 1:
            raise ConfigError("N must be >= 1")
        if not self.lower < 0.0 < self.upper:
            raise ConfigError("support must contain 0 in its interior")
        if not self.lower < self.mu1 < self.upper:
            raise ConfigError("mu1 must lie strictly inside the support")
        check_delta(self.delta)
        return self


def hoeffding_lambda(delta, gamma_t, lower, upper, N):
    """Constant bet ``sqrt(8 log(1/(delta gamma_t)) / ((u - l)^2 N))``."""
    if gamma_t <= 0:
        return 0.0
    return math.sqrt(8.0 * math.log(1.0 / (delta * gamma_t)) / ((upper - lower) ** 2 * N))


def hoeffding_evalue(samples, lam, lower, upper):
    """Terminal martingale value and the p-value ``min(1, 1 / max_i M^i)``.

    ``lam`` is a scalar or a per-sample array of predictable bets.
    """
    x = np.asarray(samples, dtype=float)
    lam = np.broadcast_to(np.asarray(lam, dtype=float), x.shape)
    log_m = np.cumsum(lam * x - (lam * (upper - lower)) ** 2 / 8.0)
    e = float(np.exp(log_m[-1]))
    p = float(min(1.0, np.exp(-log_m.max())))
    return e, p


def gen_bounded_hoeffding(config, rng=None):
    """Draw one stream of Hoeffding e-values and maximal-inequality p-values."""
    cfg = config.validate()
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    width = cfg.upper - cfg.lower
    nonnull = rng.random(cfg.m) < cfg.pi1
    g = as_gamma(cfg.gamma)
    e = np.empty(cfg.m)
    p = np.empty(cfg.m)
    for t in range(1, cfg.m + 1):
        mean = cfg.mu1 if nonnull[t - 1] else 0.0
        a = cfg.a_plus_b * (mean - cfg.lower) / width
        b = cfg.a_plus_b - a
        x = cfg.lower + width * rng.beta(a, b, size=cfg.N)
        lam = hoeffding_lambda(cfg.delta, g(t), cfg.lower, cfg.upper, cfg.N)
        e[t - 1], p[t - 1] = hoeffding_evalue(x, lam, cfg.lower, cfg.upper)
    return Stream(e_values=e, p_values=p, is_null=~nonnull)


GENERATORS = {
    GaussianLocalConfig: gen_gaussian_local,
    BoundedHoeffdingConfig: gen_bounded_hoeffding,
}


# -- trials ----------------------------------------------------------------


def fdp_trajectory(rejection_time, is_null):
    """FDP of ``R_t`` for ``t = 1..len``."""
    rt = np.asarray(rejection_time)
    n = rt.size
    hit = rt > 0
    n_rej = np.bincount(rt[hit], minlength=n + 1)[1:].cumsum()
    n_false = np.bincount(rt[hit & is_null], minlength=n + 1)[1:].cumsum()
    return n_false / np.maximum(n_rej, 1)


@dataclass
class TrialReport:
    """Metrics of one procedure on one stream.

    ``power`` is NaN when the stream has no non-null hypotheses.
    """

    procedure: str
    trial: int
    power: float
    sup_fdp: float
    rejection_count: int
    wall_time: float
    fdp_trajectory: np.ndarray = field(repr=False, default=None)


def run_procedure(name, stream, delta=0.1, gamma="default", random_state=None):
    """Fit one registered procedure on a stream; returns ``(rejection_time, seconds)``."""
    est = make_procedure(name, delta, gamma, random_state)
    kind = PROCEDURES[name][1]
    x = stream.evidence(kind)
    t0 = time.perf_counter()
    if PROCEDURES[name][2]:
        kwargs = {"deadlines": stream.deadlines} if est.uses_deadlines else {}
        est.fit(x, **kwargs)
        rt = est.rejection_time_
    else:
        est.fit(x)
        rt = np.where(est.rejected_, len(stream), 0)
    return rt, time.perf_counter() - t0


def _one_trial(trial, seq, procedures, generator, config, delta, gamma):
    data_seq, proc_seq = seq.spawn(2)
    stream = generator(config, np.random.default_rng(data_seq))
    non_null = ~stream.is_null
    out = []
    for name, ps in zip(procedures, proc_seq.spawn(len(procedures))):
        rs = np.random.default_rng(ps)
        rt, secs = run_procedure(name, stream, delta, gamma, rs)
        rejected = rt > 0
        power = rejected[non_null].mean() if non_null.any() else math.nan
        out.append(TrialReport(
            procedure=name,
            trial=trial,
            power=float(power),
            sup_fdp=sup_fdp_from_times(rt, stream.is_null),
            rejection_count=int(rejected.sum()),
            wall_time=secs,
            fdp_trajectory=fdp_trajectory(rt, stream.is_null),
        ))
    return out


def _mean_se(v):
    v = np.asarray(v, dtype=float)
    v = v[~np.isnan(v)]
    if v.size == 0:
        return math.nan, math.nan
    se = v.std(ddof=1) / math.sqrt(v.size) if v.size > 1 else 0.0
    return float(v.mean()), float(se)


@dataclass
class AggregateReport:
    procedures: tuple
    trials: list
    setting: dict = field(default_factory=dict)

    def values(self, procedure, metric):
        """Per-trial values of one metric, in trial order."""
        return np.array([getattr(r, metric) for r in self.trials if r.procedure == procedure], dtype=float)

    def summary(self, procedure):
        out = {}
        for metric in ("power", "sup_fdp", "rejection_count", "wall_time"):
            out[metric], out[metric + "_se"] = _mean_se(self.values(procedure, metric))
        return out

    def paired_difference(self, a, b, metric="power"):
        """Mean and SE of the per-trial difference ``a - b``."""
        return _mean_se(self.values(a, metric) - self.values(b, metric))

    def rows(self):
        """``(procedure, setting, metric, mean, se)`` rows for CSV output."""
        tag = ";".join(f"{k}={v}" for k, v in self.setting.items())
        rows = []
        for name in self.procedures:
            s = self.summary(name)
            for metric in ("power", "sup_fdp", "rejection_count", "wall_time"):
                rows.append((name, tag, metric, s[metric], s[metric + "_se"]))
        return rows


def run_trials(procedures, generator, n_trials, seed=0, config=None, delta=None,
               gamma="default", n_jobs=1):
    """Run every procedure on ``n_trials`` independent streams.

    Parameters
    ----------
    procedures : sequence of str
        Registered procedure names.
    generator : config object or callable
        A :class:`GaussianLocalConfig` / :class:`BoundedHoeffdingConfig`, or a
        callable ``(config, rng) -> Stream`` used together with ``config``.
    seed : int
        Master seed; per-trial seeds are spawned from it.
    """
    if n_trials < 1:
        raise ConfigError("n_trials must be >= 1")
    if config is None and type(generator) in GENERATORS:
        config, generator = generator, GENERATORS[type(generator)]
    for name in procedures:
        _lookup(name)
    if delta is None:
        delta = getattr(config, "delta", 0.1)
    seqs = np.random.SeedSequence(seed).spawn(n_trials)
    jobs = (delayed(_one_trial)(i, s, tuple(procedures), generator, config, delta, gamma)
            for i, s in enumerate(seqs))
    if n_jobs == 1:
        results = [f(*a, **k) for f, a, k in jobs]
    else:
        results = Parallel(n_jobs=n_jobs)(jobs)
    trials = [r for batch in results for r in batch]
    setting = asdict(config) if config is not None and hasattr(config, "__dataclass_fields__") else {}
    return AggregateReport(tuple(procedures), trials, setting)


def write_rows(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


# -- benchmark -------------------------------------------------------------


def _warm_up(procedures, delta, gamma):
    cfg = GaussianLocalConfig(m=20, seed=0)
    stream = gen_gaussian_local(cfg)
    for name in procedures:
        run_procedure(name, stream, delta, gamma, np.random.default_rng(0))


def _time_once(name, stream, delta, gamma, k):
    gc.disable()
    try:
        return run_procedure(name, stream, delta, gamma, np.random.default_rng(k))[1]
    finally:
        gc.enable()


def bench(procedures, m_grid, n_trials=3, seed=0, pi1=0.3, delta=0.1, gamma="default", csv_path=None,
          repeat=5, min_time=0.5, max_repeat=200):
    """Mean single-threaded wall-clock time per procedure and stream length.

    Streams are generated outside the timed region and compiled kernels
    are warmed up first; garbage is collected before each round and collection is paused
    while timing.
    Each procedure is timed in rounds that visit every (length, stream)
    cell once, so all lengths see the same machine conditions. Rounds
    repeat at least ``repeat`` times and until every cell has spent
    ``min_time`` seconds (at most ``max_repeat`` rounds); each cell keeps
    its fastest run. Returns rows ``(procedure, m, mean_seconds,
    se_seconds)``, the mean and SE taken over streams.
    """
    m_grid = [int(m) for m in m_grid]
    if m_grid != sorted(m_grid):
        raise ConfigError("m_grid must be ascending")
    for name in procedures:
        _lookup(name)
    _warm_up(procedures, delta, gamma)
    seqs = np.random.SeedSequence(seed).spawn(len(m_grid))
    streams = {
        m: [gen_gaussian_local(GaussianLocalConfig(m=m, pi1=pi1, delta=delta, seed=None),
                               np.random.default_rng(s)) for s in sq.spawn(n_trials)]
        for m, sq in zip(m_grid, seqs)
    }
    cells = [(m, k) for m in m_grid for k in range(n_trials)]
    rows = []
    for name in procedures:
        best = {c: math.inf for c in cells}
        spent = {c: 0.0 for c in cells}
        rounds = 0
        while rounds < max(int(repeat), 1) or (
                min(spent.values()) < min_time and rounds < max_repeat):
            gc.collect()
            for m, k in cells:
                if rounds >= repeat and spent[m, k] >= min_time:
                    continue
                secs = _time_once(name, streams[m][k], delta, gamma, k)
                best[m, k] = min(best[m, k], secs)
                spent[m, k] += secs
            rounds += 1
        for m in m_grid:
            mean, se = _mean_se([best[m, k] for k in range(n_trials)])
            rows.append((name, m, mean, se))
    if csv_path is not None:
        write_rows(csv_path, ("procedure", "m", "mean_seconds", "se_seconds"), rows)
    return rows
