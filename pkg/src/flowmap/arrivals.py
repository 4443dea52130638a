"""Arrival-rate estimation and goodness-of-fit testing.

Each day is split into bins of length tau (default 15 minutes); within a bin
the airspace arrival process is modeled as homogeneous Poisson with rate
lambda^j, estimated as the mean arrival count over all days of the same
weekday.  Chi-square tests check the exponential inter-arrival and Poisson
counting hypotheses; the center rate is proportioned to flows by observed
traffic shares.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .errors import InvalidInputError

DEFAULT_TAU_S = 900.0
DEFAULT_CHI2_BIN_S = 2.0
DEFAULT_ALPHA = 0.05
MIN_EXPECTED_PER_BIN = 5.0

SECONDS_PER_DAY = 86400

OUTLIER_FLOW = -1


def bin_key(weekday: int, j: int) -> str:
    return f"{weekday}-{j}"


@dataclass(frozen=True)
class GofTestResult:
    """Chi-square goodness-of-fit outcome at significance alpha."""

    statistic: float
    dof: int
    p_value: float
    reject: bool
    alpha: float
    conclusive: bool = True


@dataclass
class BinCounts:
    """Arrival counts for one (weekday, bin) pair, summed over observed days."""

    total: int = 0
    per_flow: dict[int, int] = field(default_factory=dict)
    per_day: dict[int, int] = field(default_factory=dict)   # day index -> count
    entry_times: list[float] = field(default_factory=list)  # s within the bin, pooled


@dataclass
class RateSchedule:
    """Expected arrivals per (weekday, bin): lambda^j * tau = mean daily count."""

    tau: float
    first_day: int                      # epoch day index of the first observed day
    n_days: int                         # observed span in days
    weekday_days: dict[int, int]        # weekday -> number of days in the span
    bins: dict[str, BinCounts] = field(default_factory=dict)

    @property
    def bins_per_day(self) -> int:
        return int(round(SECONDS_PER_DAY / self.tau))

    def lam_tau(self, weekday: int, j: int) -> float:
        days = self.weekday_days.get(weekday, 0)
        if days == 0:
            return 0.0
        counts = self.bins.get(bin_key(weekday, j))
        return (counts.total / days) if counts else 0.0

    def lam_per_s(self, weekday: int, j: int) -> float:
        return self.lam_tau(weekday, j) / self.tau

    def per_day_counts(self, weekday: int, j: int) -> np.ndarray:
        """Counts for every observed day of this weekday (zeros included)."""
        days = self.weekday_days.get(weekday, 0)
        counts = self.bins.get(bin_key(weekday, j))
        per_day = counts.per_day if counts else {}
        day_ids = [d for d in range(self.first_day, self.first_day + self.n_days)
                   if (d + 3) % 7 == weekday]
        assert len(day_ids) == days
        return np.array([per_day.get(d, 0) for d in day_ids], dtype=float)


def weekday_of_epoch(t: float) -> int:
    """UTC weekday of an epoch timestamp, Monday = 0 (epoch day 0 was a Thursday)."""
    return (int(t // SECONDS_PER_DAY) + 3) % 7


def estimate_arrival_rates(entries, tau: float = DEFAULT_TAU_S) -> RateSchedule:
    """Build the rate schedule from (entry_epoch_s, flow_id) pairs.

    flow_id is a cluster id or OUTLIER_FLOW (-1).  The observation span is the
    full UTC day range covered by the entries; days without traffic still
    count toward the per-weekday means.
    """
    if tau <= 0 or SECONDS_PER_DAY % int(tau) != 0:
        raise InvalidInputError(f"tau={tau} must divide 24h")
    entries = sorted(entries)
    if not entries:
        return RateSchedule(tau, 0, 0, {})
    first_day = int(entries[0][0] // SECONDS_PER_DAY)
    last_day = int(entries[-1][0] // SECONDS_PER_DAY)
    n_days = last_day - first_day + 1
    weekday_days: dict[int, int] = {}
    for d in range(first_day, first_day + n_days):
        wd = (d + 3) % 7
        weekday_days[wd] = weekday_days.get(wd, 0) + 1
    schedule = RateSchedule(tau, first_day, n_days, weekday_days)
    for t, flow_id in entries:
        day = int(t // SECONDS_PER_DAY)
        sec = t - day * SECONDS_PER_DAY
        j = int(sec // tau)
        key = bin_key((day + 3) % 7, j)
        counts = schedule.bins.setdefault(key, BinCounts())
        counts.total += 1
        counts.per_flow[flow_id] = counts.per_flow.get(flow_id, 0) + 1
        counts.per_day[day] = counts.per_day.get(day, 0) + 1
        counts.entry_times.append(sec - j * tau)
    return schedule


@dataclass(frozen=True)
class RateShares:
    """Per-flow arrival shares pi for one (weekday, bin)."""

    flows: dict[int, float]
    outlier: float
    defined: bool


def proportion_rates(schedule: RateSchedule, flow_ids) -> dict[str, RateShares]:
    """pi_i^j = total flow-i arrivals / total arrivals, per (weekday, bin).

    Bins with no traffic report pi = 0 with defined=False.  Outliers absorb
    the remainder so shares always partition the counts.
    """
    out: dict[str, RateShares] = {}
    for wd in sorted(schedule.weekday_days):
        for j in range(schedule.bins_per_day):
            key = bin_key(wd, j)
            counts = schedule.bins.get(key)
            total = counts.total if counts else 0
            if total == 0:
                out[key] = RateShares({fid: 0.0 for fid in flow_ids}, 0.0, False)
                continue
            shares = {fid: counts.per_flow.get(fid, 0) / total for fid in flow_ids}
            outlier = counts.per_flow.get(OUTLIER_FLOW, 0) / total
            out[key] = RateShares(shares, outlier, True)
    return out


def _chi2_pvalue(statistic: float, dof: int) -> float:
    return float(special.gammaincc(dof / 2.0, statistic / 2.0))


def _merge_bins(observed: np.ndarray, expected: np.ndarray,
                min_expected: float = MIN_EXPECTED_PER_BIN) -> tuple[np.ndarray, np.ndarray]:
    """Merge adjacent bins left to right until each has expected >= min_expected;
    a deficient tail is merged into the last kept bin."""
    obs_out: list[float] = []
    exp_out: list[float] = []
    acc_o = acc_e = 0.0
    for o, e in zip(observed, expected):
        acc_o += o
        acc_e += e
        if acc_e >= min_expected:
            obs_out.append(acc_o)
            exp_out.append(acc_e)
            acc_o = acc_e = 0.0
    if acc_e > 0 and obs_out:
        obs_out[-1] += acc_o
        exp_out[-1] += acc_e
    return np.array(obs_out), np.array(exp_out)


def _chi2_from_bins(observed: np.ndarray, expected: np.ndarray, alpha: float) -> GofTestResult:
    if len(observed) < 3:
        return GofTestResult(0.0, 0, 1.0, False, alpha, conclusive=False)
    statistic = float(np.sum((observed - expected) ** 2 / expected))
    dof = len(observed) - 2
    p = _chi2_pvalue(statistic, dof)
    return GofTestResult(statistic, dof, p, p < alpha, alpha)


def chi2_exponential(inter_arrivals, lam: float, bin_width: float = DEFAULT_CHI2_BIN_S,
                     alpha: float = DEFAULT_ALPHA) -> GofTestResult:
    """Test inter-arrival times against Exponential(lam) with fixed-width bins.

    Bins of width bin_width (2 s by default) are merged until each carries an
    expected count of at least 5; dof = bins - 2.  Too few valid bins yield an
    inconclusive (non-rejecting) result.
    """
    x = np.asarray(inter_arrivals, dtype=float)
    if lam <= 0 or bin_width <= 0:
        raise InvalidInputError("lam and bin_width must be positive")
    n = x.size
    if n < 3:
        return GofTestResult(0.0, 0, 1.0, False, alpha, conclusive=False)
    n_edges = int(math.ceil(float(np.max(x)) / bin_width)) + 1
    edges = bin_width * np.arange(n_edges + 1)
    observed = np.histogram(x, bins=edges)[0].astype(float)
    cdf = 1.0 - np.exp(-lam * edges)
    expected = n * np.diff(cdf)
    # open final bin absorbs the analytic tail mass
    expected[-1] += n * float(np.exp(-lam * edges[-1]))
    obs_m, exp_m = _merge_bins(observed, expected)
    return _chi2_from_bins(obs_m, exp_m, alpha)


def _poisson_pmf(k: np.ndarray, mean: float) -> np.ndarray:
    if mean == 0:
        return np.where(k == 0, 1.0, 0.0)
    return np.exp(k * math.log(mean) - mean - special.gammaln(k + 1.0))


def chi2_poisson(counts, lam_tau: float, alpha: float = DEFAULT_ALPHA) -> GofTestResult:
    """Test per-interval arrival counts against Poisson(lam_tau).

    Count-value bins 0, 1, 2, ... with an open tail; merged and evaluated as
    in chi2_exponential.
    """
    c = np.asarray(counts, dtype=float)
    if lam_tau < 0:
        raise InvalidInputError("lam_tau must be nonnegative")
    n = c.size
    if n < 3:
        return GofTestResult(0.0, 0, 1.0, False, alpha, conclusive=False)
    kmax = int(max(float(np.max(c)), math.ceil(lam_tau + 10.0 * math.sqrt(lam_tau + 1.0))))
    ks = np.arange(kmax + 1, dtype=float)
    pmf = _poisson_pmf(ks, lam_tau)
    expected = n * pmf
    observed = np.array([float(np.sum(c == k)) for k in range(kmax + 1)])
    # open tail bin for counts > kmax
    tail_p = max(0.0, 1.0 - float(np.sum(pmf)))
    observed = np.append(observed, float(np.sum(c > kmax)))
    expected = np.append(expected, n * tail_p)
    obs_m, exp_m = _merge_bins(observed, expected)
    return _chi2_from_bins(obs_m, exp_m, alpha)


def pooled_inter_arrivals(schedule: RateSchedule, weekday: int, j: int) -> np.ndarray:
    """Inter-arrival times within bin j pooled over all days of the weekday."""
    counts = schedule.bins.get(bin_key(weekday, j))
    if counts is None:
        return np.array([])
    gaps: list[np.ndarray] = []
    by_day: dict[int, list[float]] = {}
    idx = 0
    # entry_times were appended in chronological order per day
    for day in sorted(counts.per_day):
        k = counts.per_day[day]
        times = np.sort(np.array(counts.entry_times[idx:idx + k]))
        idx += k
        if k >= 2:
            gaps.append(np.diff(times))
        by_day[day] = list(times)
    return np.concatenate(gaps) if gaps else np.array([])
