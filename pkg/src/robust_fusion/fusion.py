"""Fusion center: log-LR sum test, exact error probabilities, saddle-point
verification, threshold design and sensor-count sweeps.

The fusion rule adds the per-sensor LLR weights of the received levels and
compares against a log threshold (default log(prior0 / (1 - prior0))); ties
decide the null hypothesis, which makes every evaluation deterministic.
Error probabilities are exact: the distribution of the LLR sum is an exact
K-fold convolution of finite atom mass functions, cross-checked against
full enumeration when the joint level space is small enough.
"""

from __future__ import annotations

import itertools
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .distributions import AtomPmf, DiscretePmf
from .lfd import LfdPair
from .ordering import atoms_stochastically_larger, convolve_many
from .sensor import (
    Quantizer,
    SensorChannel,
    channel_from_quantizer,
    default_quantizer,
    llr_monotone_check,
)

Z_99 = 2.5758293035489004  # two-sided 99% normal quantile
_AGREEMENT_TOL = 1e-10


def _worker_count() -> int:
    raw = os.environ.get("ROBUST_FUSION_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


@dataclass(frozen=True, eq=False)
class NetworkModel:
    """K sensors plus the fusion threshold; enough to evaluate exactly.

    Each channel must either be LLR-monotone in its own labels or carry a
    repair permutation recorded by ``sensor.attach_repair`` (the fusion
    statistics themselves are label-invariant).
    """

    channels: tuple[SensorChannel, ...]
    prior0: float
    log_threshold: float | None = None

    def __post_init__(self) -> None:
        channels = tuple(self.channels)
        object.__setattr__(self, "channels", channels)
        if len(channels) < 1:
            raise ValueError("need at least one sensor channel")
        if not 0.0 < self.prior0 < 1.0:
            raise ValueError(f"prior0 must be in (0, 1), got {self.prior0}")
        if self.log_threshold is None:
            object.__setattr__(
                self, "log_threshold", math.log(self.prior0 / (1.0 - self.prior0))
            )
        for i, ch in enumerate(channels):
            if llr_monotone_check(ch):
                continue
            if ch.repair is None:
                raise ValueError(
                    f"channel {i} is not LLR-monotone and carries no repair "
                    "permutation (see sensor.permutation_repair)"
                )
            order = np.argsort([ch.repair[l] for l in ch.levels])
            if np.any(np.diff(ch.llr[order]) < 0.0):
                raise ValueError(f"channel {i} repair permutation does not sort its LLR")

    @property
    def num_sensors(self) -> int:
        return len(self.channels)


@dataclass(frozen=True)
class ErrorReport:
    """False alarm, miss and Bayes error of one network evaluation."""

    p_false_alarm: float
    p_miss: float
    p_error: float
    method: str
    n: int | None = None
    seed: int | None = None
    ci_halfwidth: float | None = None


def _decision_from_llrs(llrs: Sequence[float], log_threshold: float) -> int:
    has_pos = any(v == math.inf for v in llrs)
    has_neg = any(v == -math.inf for v in llrs)
    if has_pos and has_neg:
        return 0  # jointly impossible event; convention only
    if has_pos:
        return 1
    if has_neg:
        return 0
    total = 0.0
    for v in llrs:
        total += v
    return 1 if total > log_threshold else 0


def fuse(net: NetworkModel, u: Sequence[int]) -> int:
    """Fusion decision for one vector of sensor levels.

    Decides 1 iff the LLR sum strictly exceeds the log threshold; ties
    decide 0. An infinite-LLR level (impossible under one hypothesis)
    forces the decision.
    """
    if len(u) != net.num_sensors:
        raise ValueError(f"expected {net.num_sensors} levels, got {len(u)}")
    llrs = [ch.llr_of(int(level)) for ch, level in zip(net.channels, u)]
    return _decision_from_llrs(llrs, net.log_threshold)


def _law_parts(ch: SensorChannel, law: DiscretePmf):
    """Split a level law into (finite-LLR sub-pmf, +inf mass, -inf mass)."""
    if law.levels != ch.levels:
        raise ValueError(
            f"law levels {law.levels} do not match channel levels {ch.levels}"
        )
    finite = np.isfinite(ch.llr)
    plus = float(np.sum(law.probs[ch.llr == math.inf]))
    minus = float(np.sum(law.probs[ch.llr == -math.inf]))
    return AtomPmf(ch.llr[finite], law.probs[finite]), plus, minus


def llr_sum_distribution(
    channels: Sequence[SensorChannel], laws: Sequence[DiscretePmf]
) -> AtomPmf:
    """Exact distribution of the finite part of the LLR sum under ``laws``."""
    return convolve_many(
        [_law_parts(ch, law)[0] for ch, law in zip(channels, laws)]
    )


def _prob_decide_one_convolution(
    channels: Sequence[SensorChannel],
    laws: Sequence[DiscretePmf],
    log_threshold: float,
) -> float:
    parts = [_law_parts(ch, law) for ch, law in zip(channels, laws)]
    prob_no_minus = 1.0
    prob_all_finite = 1.0
    for finite, plus, minus in parts:
        prob_no_minus *= 1.0 - minus
        prob_all_finite *= finite.total_mass
    forced = prob_no_minus - prob_all_finite
    conv = convolve_many([finite for finite, _, _ in parts])
    return forced + conv.mass_above(log_threshold)


def _prob_decide_one_enumeration(
    channels: Sequence[SensorChannel],
    laws: Sequence[DiscretePmf],
    log_threshold: float,
) -> float:
    total = 0.0
    index_ranges = [range(len(ch.levels)) for ch in channels]
    for combo in itertools.product(*index_ranges):
        prob = 1.0
        for law, idx in zip(laws, combo):
            prob *= law.probs[idx]
        if prob == 0.0:
            continue
        llrs = [float(ch.llr[idx]) for ch, idx in zip(channels, combo)]
        if _decision_from_llrs(llrs, log_threshold):
            total += prob
    return total


def exact_error(
    net: NetworkModel,
    laws0: Sequence[DiscretePmf] | None = None,
    laws1: Sequence[DiscretePmf] | None = None,
    method: str = "convolution",
    cross_check: bool = True,
    enumeration_limit: int = 10**6,
) -> ErrorReport:
    """Exact P_F, P_M, P_E of the network under the given level laws.

    Laws default to the channels' own (least favorable) pmfs; pass member
    laws to probe the saddle. ``method`` picks the primary path
    ("convolution" or "enumeration"); with ``cross_check`` the other path
    is also run when the joint level space has at most
    ``enumeration_limit`` points, and a disagreement beyond 1e-10 raises.
    """
    if method not in ("convolution", "enumeration"):
        raise ValueError(f"unknown method {method!r}")
    laws0 = [ch.pmf0 for ch in net.channels] if laws0 is None else list(laws0)
    laws1 = [ch.pmf1 for ch in net.channels] if laws1 is None else list(laws1)
    if len(laws0) != net.num_sensors or len(laws1) != net.num_sensors:
        raise ValueError("need one law per sensor and hypothesis")

    joint_size = 1
    for ch in net.channels:
        joint_size *= len(ch.levels)

    def decide_one(laws, how: str) -> float:
        if how == "convolution":
            return _prob_decide_one_convolution(net.channels, laws, net.log_threshold)
        return _prob_decide_one_enumeration(net.channels, laws, net.log_threshold)

    if method == "enumeration" and joint_size > enumeration_limit:
        raise ValueError("joint level space too large for enumeration")
    p_f = decide_one(laws0, method)
    p_m = 1.0 - decide_one(laws1, method)
    if cross_check and joint_size <= enumeration_limit:
        other = "enumeration" if method == "convolution" else "convolution"
        p_f_other = decide_one(laws0, other)
        p_m_other = 1.0 - decide_one(laws1, other)
        if abs(p_f - p_f_other) > _AGREEMENT_TOL or abs(p_m - p_m_other) > _AGREEMENT_TOL:
            raise RuntimeError(
                "convolution and enumeration disagree beyond 1e-10: "
                f"P_F {p_f} vs {p_f_other}, P_M {p_m} vs {p_m_other}"
            )
    p_e = net.prior0 * p_f + (1.0 - net.prior0) * p_m
    tag = "exact-convolution" if method == "convolution" else "enumeration"
    return ErrorReport(p_false_alarm=p_f, p_miss=p_m, p_error=p_e, method=tag)


@dataclass(frozen=True)
class SaddleReport:
    """Outcome of probing the saddle inequalities over member-law grids."""

    holds: bool
    worst_side: str
    worst_combo: tuple[int, ...]
    worst_gap: float
    p_false_alarm_lfd: float
    p_miss_lfd: float
    dominance_ok: bool
    n_checked: int
    subset_seed: int | None = None
    tol: float = 1e-9


def _combo_iterator(counts: Sequence[int], max_combos: int, seed: int):
    total = 1
    for c in counts:
        total *= c
    if total <= max_combos:
        return itertools.product(*[range(c) for c in counts]), total, None
    rng = np.random.default_rng(seed)
    combos = [tuple(int(rng.integers(0, c)) for c in counts) for _ in range(max_combos)]
    return iter(combos), max_combos, seed


def saddle_verify(
    net: NetworkModel,
    member_laws0: Sequence[Sequence[DiscretePmf]],
    member_laws1: Sequence[Sequence[DiscretePmf]],
    tol: float = 1e-9,
    max_combos: int = 10**4,
    seed: int = 0,
    workers: int | None = None,
) -> SaddleReport:
    """Check that the LFD laws are worst cases for the fixed rules.

    For every member combination (or a seeded random subset when the
    product grid exceeds ``max_combos``), P_F under the members must not
    exceed P_F under the LFDs beyond ``tol``, and likewise for P_M. The
    stochastic dominance of the K-fold LLR sums (which implies the point
    inequalities for every threshold at once) is checked en route.

    Combinations are evaluated by a pure map, so they may run on a thread
    pool; ``workers`` defaults to the ROBUST_FUSION_THREADS cap.
    """
    if len(member_laws0) != net.num_sensors or len(member_laws1) != net.num_sensors:
        raise ValueError("need one member-law list per sensor and hypothesis")
    workers = _worker_count() if workers is None else max(1, workers)
    p_f_lfd = _prob_decide_one_convolution(
        net.channels, [ch.pmf0 for ch in net.channels], net.log_threshold
    )
    p_m_lfd = 1.0 - _prob_decide_one_convolution(
        net.channels, [ch.pmf1 for ch in net.channels], net.log_threshold
    )
    sum_lfd0 = llr_sum_distribution(net.channels, [ch.pmf0 for ch in net.channels])
    sum_lfd1 = llr_sum_distribution(net.channels, [ch.pmf1 for ch in net.channels])

    worst_gap = math.inf
    worst_side = "false-alarm"
    worst_combo: tuple[int, ...] = ()
    dominance_ok = True
    n_checked = 0
    subset_seed = None

    for side, member_lists, p_lfd, sum_lfd in (
        ("false-alarm", member_laws0, p_f_lfd, sum_lfd0),
        ("miss", member_laws1, p_m_lfd, sum_lfd1),
    ):
        combos, n_side, used_seed = _combo_iterator(
            [len(lst) for lst in member_lists], max_combos, seed
        )
        subset_seed = used_seed if used_seed is not None else subset_seed
        n_checked += n_side

        def check_combo(combo):
            laws = [member_lists[i][j] for i, j in enumerate(combo)]
            p1 = _prob_decide_one_convolution(net.channels, laws, net.log_threshold)
            p_member = p1 if side == "false-alarm" else 1.0 - p1
            sum_member = llr_sum_distribution(net.channels, laws)
            if side == "false-alarm":
                ok, _ = atoms_stochastically_larger(sum_lfd, sum_member, tol)
            else:
                ok, _ = atoms_stochastically_larger(sum_member, sum_lfd, tol)
            return tuple(combo), p_lfd - p_member, ok

        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(check_combo, combos, chunksize=16))
        else:
            results = [check_combo(c) for c in combos]
        for combo, gap, ok in results:
            if gap < worst_gap:
                worst_gap = gap
                worst_side = side
                worst_combo = combo
            dominance_ok = dominance_ok and ok
    holds = worst_gap >= -tol and dominance_ok
    return SaddleReport(
        holds=holds,
        worst_side=worst_side,
        worst_combo=worst_combo,
        worst_gap=worst_gap,
        p_false_alarm_lfd=p_f_lfd,
        p_miss_lfd=p_m_lfd,
        dominance_ok=dominance_ok,
        n_checked=n_checked,
        subset_seed=subset_seed,
        tol=tol,
    )


def best_fusion_threshold(
    conv0: AtomPmf,
    conv1: AtomPmf,
    prior0: float,
    forced_one0: float = 0.0,
    forced_one1: float = 0.0,
) -> tuple[float, float]:
    """Exact minimizer of P_E over the achievable LLR-sum atoms.

    Under the tie-to-null rule the error probability only changes at atom
    values, so scanning atoms (plus an always-decide-1 candidate below the
    smallest atom) is exhaustive. ``conv0``/``conv1`` are the finite parts
    of the LLR-sum laws; ``forced_one*`` carry the threshold-independent
    probability of a forced decide-1 (an infinite-LLR level observed).
    Returns (log_threshold, p_error).
    """
    atoms = np.union1d(conv0.atoms, conv1.atoms)
    candidates = np.concatenate([[atoms[0] - 1.0], atoms])
    idx0 = np.searchsorted(conv0.atoms, candidates, side="right")
    idx1 = np.searchsorted(conv1.atoms, candidates, side="right")
    tail0 = np.concatenate([np.cumsum(conv0.masses[::-1])[::-1], [0.0]])
    tail1 = np.concatenate([np.cumsum(conv1.masses[::-1])[::-1], [0.0]])
    p_f = forced_one0 + tail0[idx0]
    p_m = 1.0 - forced_one1 - tail1[idx1]
    p_e = prior0 * p_f + (1.0 - prior0) * p_m
    best = int(np.argmin(p_e))
    return float(candidates[best]), float(p_e[best])


@dataclass(frozen=True)
class DesignResult:
    quantizers: tuple[Quantizer, ...]
    log_threshold: float
    report: ErrorReport
    converged: bool


def _golden_section(fn, lo: float, hi: float, iters: int = 60) -> tuple[float, float]:
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fn(c), fn(d)
    for _ in range(iters):
        if b - a < 1e-10:
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fn(d)
    return (c, fc) if fc <= fd else (d, fd)


class _ThresholdObjective:
    """P_E of a threshold configuration, with per-sensor channel caching."""

    def __init__(self, pairs: Sequence[LfdPair], prior0: float):
        self.pairs = list(pairs)
        self.prior0 = prior0

    def channel(self, i: int, log_thresholds: Sequence[float]) -> SensorChannel | None:
        try:
            q = Quantizer(tuple(math.exp(t) for t in log_thresholds))
        except ValueError:
            return None
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return channel_from_quantizer(q, self.pairs[i])

    def evaluate(self, all_log_thresholds: Sequence[Sequence[float]]) -> tuple[float, float]:
        """Returns (p_error, best log fusion threshold); inf when invalid."""
        convs0, convs1 = [], []
        no_minus = [1.0, 1.0]
        all_finite = [1.0, 1.0]
        for i, coords in enumerate(all_log_thresholds):
            ch = self.channel(i, coords)
            if ch is None:
                return math.inf, 0.0
            for which, law in enumerate((ch.pmf0, ch.pmf1)):
                finite, plus, minus = _law_parts(ch, law)
                (convs0 if which == 0 else convs1).append(finite)
                no_minus[which] *= 1.0 - minus
                all_finite[which] *= finite.total_mass
        conv0 = convolve_many(convs0)
        conv1 = convolve_many(convs1)
        tau, p_e = best_fusion_threshold(
            conv0,
            conv1,
            self.prior0,
            forced_one0=no_minus[0] - all_finite[0],
            forced_one1=no_minus[1] - all_finite[1],
        )
        return p_e, tau


def optimize_thresholds(
    pairs: Sequence[LfdPair],
    num_levels: Sequence[int],
    prior0: float,
    max_sweeps: int = 40,
    seed: int = 0,
    ftol: float = 1e-12,
) -> DesignResult:
    """Design sensor thresholds and the fusion threshold to minimize P_E.

    Coordinate descent (golden section per threshold, in log-LR space)
    interleaved with exact fusion-threshold selection by atom scanning,
    restarted from three initial configurations: equal-mixture quantiles,
    LR = 1 centered, and seeded random. The objective is not convex, so
    the result is grid-validated local optimality, not a global claim.
    Non-convergence within ``max_sweeps`` returns best-found with a
    warning and ``converged=False``.
    """
    if len(pairs) > 10 or any(d > 4 for d in num_levels):
        raise ValueError("designed for K <= 10 sensors with at most 4 thresholds each")
    if len(pairs) != len(num_levels):
        raise ValueError("need one threshold count per sensor")
    objective = _ThresholdObjective(pairs, prior0)
    rng = np.random.default_rng(seed)
    brackets = []
    for pair in pairs:
        lo, hi = pair.support
        brackets.append((float(pair.log_lr(lo)), float(pair.log_lr(hi))))

    def quantile_start(i: int, d: int) -> list[float]:
        qz = default_quantizer(pairs[i], d)
        return [math.log(t) for t in qz.thresholds]

    def centered_start(i: int, d: int) -> list[float]:
        if d == 1:
            return [0.0]
        return list(np.linspace(-0.5, 0.5, d))

    def random_start(i: int, d: int) -> list[float]:
        lo, hi = brackets[i]
        return sorted(float(v) for v in rng.uniform(lo + 0.1, hi - 0.1, size=d))

    starts = []
    for maker in (quantile_start, centered_start, random_start):
        starts.append([maker(i, d) for i, d in enumerate(num_levels)])

    best_conf = None
    best_pe = math.inf
    best_tau = 0.0
    best_converged = False
    gap = 1e-6
    for conf in starts:
        conf = [list(c) for c in conf]
        pe, tau = objective.evaluate(conf)
        converged = False
        for _ in range(max_sweeps):
            improved = 0.0
            for i in range(len(pairs)):
                for d in range(len(conf[i])):
                    lo = conf[i][d - 1] + gap if d > 0 else brackets[i][0]
                    hi = conf[i][d + 1] - gap if d + 1 < len(conf[i]) else brackets[i][1]
                    if hi <= lo:
                        continue

                    def coord_fn(x: float) -> float:
                        trial = [list(c) for c in conf]
                        trial[i][d] = x
                        return objective.evaluate(trial)[0]

                    x_best, f_best = _golden_section(coord_fn, lo, hi)
                    if f_best < pe - 1e-15:
                        improved += pe - f_best
                        conf[i][d] = x_best
                        pe, tau = objective.evaluate(conf)
            if improved < ftol:
                converged = True
                break
        if pe < best_pe:
            best_pe, best_tau, best_conf, best_converged = pe, tau, conf, converged
    if not best_converged:
        warnings.warn("threshold optimizer hit the sweep limit; returning best found")
    quantizers = tuple(
        Quantizer(tuple(math.exp(t) for t in coords)) for coords in best_conf
    )
    channels = tuple(
        channel_from_quantizer(q, pair) for q, pair in zip(quantizers, pairs)
    )
    net = NetworkModel(channels, prior0, best_tau)
    report = exact_error(net)
    return DesignResult(
        quantizers=quantizers,
        log_threshold=best_tau,
        report=report,
        converged=best_converged,
    )


def grid_search_thresholds(
    pairs: Sequence[LfdPair],
    num_levels: Sequence[int],
    prior0: float,
    points: int = 101,
) -> tuple[tuple[tuple[float, ...], ...], float, float]:
    """Exhaustive grid-search oracle for :func:`optimize_thresholds`.

    Scans ``points`` values per coordinate (log-LR space) over all sorted
    combinations; returns (log thresholds per sensor, log fusion
    threshold, p_error). Intended for validation at desk scale.
    """
    objective = _ThresholdObjective(pairs, prior0)
    axes = []
    for pair, d in zip(pairs, num_levels):
        lo, hi = float(pair.log_lr(pair.support[0])), float(pair.log_lr(pair.support[1]))
        axes.extend([np.linspace(lo, hi, points)] * d)
    counts = list(num_levels)
    best = (math.inf, 0.0, None)
    for combo in itertools.product(*axes):
        conf = []
        pos = 0
        ok = True
        for c in counts:
            coords = list(combo[pos : pos + c])
            if any(b <= a for a, b in zip(coords, coords[1:])):
                ok = False
                break
            conf.append(coords)
            pos += c
        if not ok:
            continue
        pe, tau = objective.evaluate(conf)
        if pe < best[0]:
            best = (pe, tau, tuple(tuple(c) for c in conf))
    return best[2], best[1], best[0]


def k_sweep(
    template: SensorChannel,
    ks: Sequence[int],
    prior0: float,
    log_threshold: float | None = None,
) -> list[tuple[int, ErrorReport]]:
    """Exact P_E of K identical sensors for each K in ``ks``.

    The template must be informative (pmf0 != pmf1); the resulting decay
    of P_E with K is what the sweep exists to expose. Cross-checking is
    left to callers (the convolution path is exact on its own).
    """
    if np.max(np.abs(template.pmf0.probs - template.pmf1.probs)) <= 1e-12:
        raise ValueError("uninformative sensor template: pmf0 equals pmf1")
    results = []
    for k in ks:
        if k < 1:
            raise ValueError("sensor counts must be >= 1")
        net = NetworkModel((template,) * int(k), prior0, log_threshold)
        results.append((int(k), exact_error(net, cross_check=False)))
    return results


def monte_carlo(
    net: NetworkModel,
    n: int,
    seed: int,
    laws0: Sequence[DiscretePmf] | None = None,
    laws1: Sequence[DiscretePmf] | None = None,
) -> ErrorReport:
    """Monte Carlo estimate of the network error probabilities.

    Levels are sampled directly from the per-sensor laws (equal in law to
    sampling observations and quantizing). The generator is PCG64 seeded
    with ``seed`` and split per hypothesis, so reports are reproducible
    bit-for-bit. ``ci_halfwidth`` is a 99% half-width for p_error.
    """
    if n < 10**4:
        raise ValueError("need at least 1e4 samples for calibrated estimates")
    laws0 = [ch.pmf0 for ch in net.channels] if laws0 is None else list(laws0)
    laws1 = [ch.pmf1 for ch in net.channels] if laws1 is None else list(laws1)
    rng0, rng1 = np.random.default_rng(seed).spawn(2)

    def decide_rate(laws, rng) -> float:
        sums = np.zeros(n)
        has_pos = np.zeros(n, dtype=bool)
        has_neg = np.zeros(n, dtype=bool)
        for ch, law in zip(net.channels, laws):
            if law.levels != ch.levels:
                raise ValueError("law levels must match channel levels")
            idx = rng.choice(len(ch.levels), size=n, p=law.probs)
            vals = ch.llr[idx]
            has_pos |= vals == math.inf
            has_neg |= vals == -math.inf
            sums += np.where(np.isfinite(vals), vals, 0.0)
        decide1 = np.where(
            has_pos & has_neg, False, has_pos | (~has_neg & (sums > net.log_threshold))
        )
        return float(np.mean(decide1))

    p_f = decide_rate(laws0, rng0)
    p_m = 1.0 - decide_rate(laws1, rng1)
    hw_f = Z_99 * math.sqrt(p_f * (1.0 - p_f) / n)
    hw_m = Z_99 * math.sqrt(p_m * (1.0 - p_m) / n)
    hw_e = math.hypot(net.prior0 * hw_f, (1.0 - net.prior0) * hw_m)
    return ErrorReport(
        p_false_alarm=p_f,
        p_miss=p_m,
        p_error=net.prior0 * p_f + (1.0 - net.prior0) * p_m,
        method="monte-carlo",
        n=n,
        seed=seed,
        ci_halfwidth=hw_e,
    )
