"""Sensor decision rules: robust-LR front end, multilevel quantization,
per-level LLR weights, label repair, and randomized-binary admissibility.

A sensor maps its observation through the robust likelihood ratio and
quantizes that value with strictly increasing thresholds into levels
0..D. When the pair's log-likelihood ratio is monotone, the per-level LLR
weights are conditional expectations of the LR over the threshold
intervals, hence automatically nondecreasing in the level; this module
computes them exactly (half-line inversion plus closed-form cdfs) and
enforces that property as a postcondition.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from ._roots import leftmost_true, solve_increasing
from .distributions import DiscretePmf, pmf_from_weights, trapezoid
from .lfd import ContaminatedGaussian, LfdPair

_LLR_SLACK = 1e-12


@dataclass(frozen=True)
class Quantizer:
    """Strictly increasing thresholds on the likelihood-ratio axis.

    D = len(thresholds) thresholds partition the LR axis into D + 1 output
    levels 0..D; an empty threshold tuple is the single-level
    (uninformative) quantizer.
    """

    thresholds: tuple[float, ...]

    def __post_init__(self) -> None:
        thresholds = tuple(float(t) for t in self.thresholds)
        object.__setattr__(self, "thresholds", thresholds)
        if any(b <= a for a, b in zip(thresholds, thresholds[1:])):
            raise ValueError("thresholds must be strictly increasing")

    @property
    def num_levels(self) -> int:
        return len(self.thresholds) + 1


def quantize(q: Quantizer, x: float) -> int:
    """Output level for an LR-axis value.

    Intervals are left-closed: level d covers t_{d-1} <= x < t_d, level 0
    covers x < t_0 and the top level covers x >= t_{D-1}, so the map is
    total (the boundary convention costs zero probability for continuous
    laws).
    """
    return int(np.searchsorted(np.asarray(q.thresholds), x, side="right"))


@dataclass(frozen=True, eq=False)
class SensorChannel:
    """Per-hypothesis output laws of one sensor plus its LLR weights.

    ``repair`` optionally carries a fusion-center permutation (level ->
    ascending-LLR position) for channels whose own labeling is not
    LLR-monotone; fusion statistics are label-invariant, the permutation is
    bookkeeping that exhibits the equivalent monotone relabeling.
    """

    pmf0: DiscretePmf
    pmf1: DiscretePmf
    llr: np.ndarray = None
    repair: dict[int, int] | None = None

    def __post_init__(self) -> None:
        if self.pmf0.levels != self.pmf1.levels:
            raise ValueError("pmf0 and pmf1 must share the same level set")
        both_zero = (self.pmf0.probs == 0.0) & (self.pmf1.probs == 0.0)
        if np.any(both_zero):
            raise ValueError(
                "levels with zero mass under both hypotheses must be dropped"
            )
        with np.errstate(divide="ignore"):
            computed = np.log(self.pmf1.probs) - np.log(self.pmf0.probs)
        if self.llr is None:
            object.__setattr__(self, "llr", computed)
        else:
            llr = np.asarray(self.llr, dtype=float)
            finite = np.isfinite(computed) & np.isfinite(llr)
            if np.any(np.abs(llr[finite] - computed[finite]) > 1e-12) or np.any(
                llr[~finite] != computed[~finite]
            ):
                raise ValueError("llr inconsistent with log(pmf1/pmf0)")
            object.__setattr__(self, "llr", llr)

    @property
    def levels(self) -> tuple[int, ...]:
        return self.pmf0.levels

    def llr_of(self, level: int) -> float:
        try:
            return float(self.llr[self.levels.index(level)])
        except ValueError:
            raise ValueError(f"level {level} not in channel levels {self.levels}") from None


def _build_channel(
    levels: Sequence[int], mass0: np.ndarray, mass1: np.ndarray
) -> SensorChannel:
    mass0 = np.maximum(np.asarray(mass0, dtype=float), 0.0)
    mass1 = np.maximum(np.asarray(mass1, dtype=float), 0.0)
    keep = ~((mass0 == 0.0) & (mass1 == 0.0))
    if not np.all(keep):
        dropped = [int(l) for l, k in zip(levels, keep) if not k]
        warnings.warn(
            f"dropping levels {dropped} with zero mass under both hypotheses",
            RuntimeWarning,
            stacklevel=3,
        )
        levels = [l for l, k in zip(levels, keep) if k]
        mass0 = mass0[keep]
        mass1 = mass1[keep]
    return SensorChannel(
        pmf0=DiscretePmf(tuple(int(l) for l in levels), mass0),
        pmf1=DiscretePmf(tuple(int(l) for l in levels), mass1),
    )


def channel_from_pmfs(pmf0: DiscretePmf, pmf1: DiscretePmf) -> SensorChannel:
    """Channel from explicitly given per-hypothesis output laws."""
    if pmf0.levels != pmf1.levels:
        raise ValueError("pmf0 and pmf1 must share the same level set")
    return _build_channel(pmf0.levels, pmf0.probs, pmf1.probs)


def level_boundaries(pair: LfdPair, q: Quantizer) -> list[float]:
    """Observation-axis boundary for each threshold of a monotone pair.

    boundary[d] = inf{y : LR(y) >= t_d}; values are clamped to the pair's
    support (the mass outside is below 1e-15 of the total).
    """
    lo, hi = pair.support
    boundaries = []
    for t in q.thresholds:
        if t <= 0.0:
            boundaries.append(-math.inf)
            continue
        log_t = math.log(t)
        if float(pair.log_lr(lo)) >= log_t:
            boundaries.append(lo)
        elif float(pair.log_lr(hi)) < log_t:
            boundaries.append(hi)
        else:
            boundaries.append(
                leftmost_true(lambda y: float(pair.log_lr(y)) >= log_t, lo, hi)
            )
    return boundaries


def _interval_masses(cdf, boundaries: Sequence[float]) -> np.ndarray:
    cuts = [0.0]
    for b in boundaries:
        cuts.append(0.0 if b == -math.inf else cdf(b))
    cuts.append(1.0)
    return np.diff(np.asarray(cuts))


def channel_from_quantizer(
    q: Quantizer, pair: LfdPair, grid: np.ndarray | None = None
) -> SensorChannel:
    """Push the LFD pair through a quantizer on the robust-LR axis.

    For a monotone log-LR (all built-in constructions) the interval
    probabilities are exact: thresholds are inverted to observation-axis
    boundaries and evaluated with the pair's closed-form cdfs. A
    non-monotone log-LR is handled by locating every threshold crossing
    on the grid (sign-change bisection) and summing exact cdf differences
    per segment; crossings narrower than the grid step can be missed.

    Levels with zero mass under both LFDs are dropped with a warning;
    levels with zero mass under exactly one keep a +/-inf LLR sentinel.
    The per-level LLR must come out nondecreasing (the weight of level d
    is the LR's conditional mean over [t_{d-1}, t_d), whatever the
    preimage shape); a violation raises.
    """
    xs = pair.grid() if grid is None else np.asarray(grid, dtype=float)
    lr_vals = np.asarray(pair.log_lr(xs), dtype=float)
    monotone = bool(np.all(lr_vals[1:] >= lr_vals[:-1] - _LLR_SLACK))
    levels = list(range(q.num_levels))
    if monotone:
        bounds = level_boundaries(pair, q)
        mass0 = _interval_masses(pair.q0_cdf, bounds)
        mass1 = _interval_masses(pair.q1_cdf, bounds)
    else:
        mass0, mass1 = _piecewise_masses(pair, q, xs, lr_vals)
    channel = _build_channel(levels, mass0, mass1)
    if not llr_monotone_check(channel):
        raise RuntimeError("per-level LLR is not nondecreasing; quantizer is invalid")
    return channel


def _piecewise_masses(
    pair: LfdPair, q: Quantizer, xs: np.ndarray, lr_vals: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Level masses for a non-monotone log-LR via crossing detection.

    Cuts the support at every point where the log-LR crosses a threshold
    (bisected to machine precision inside each bracketing grid cell); each
    resulting segment maps into a single level, so its mass is an exact
    cdf difference.
    """
    cuts = [float(xs[0])]
    for t in q.thresholds:
        if t <= 0.0:
            continue
        log_t = math.log(t)
        diff = lr_vals - log_t
        for i in np.flatnonzero(np.diff(np.signbit(diff)) != 0):
            a, b = float(xs[i]), float(xs[i + 1])
            below = diff[i] < 0.0
            for _ in range(80):
                m = 0.5 * (a + b)
                if (float(pair.log_lr(m)) - log_t < 0.0) == below:
                    a = m
                else:
                    b = m
            cuts.append(0.5 * (a + b))
    cuts = sorted(set(cuts + [float(xs[-1])]))
    mass0 = np.zeros(q.num_levels)
    mass1 = np.zeros(q.num_levels)
    for a, b in zip(cuts, cuts[1:]):
        level = quantize(q, math.exp(float(pair.log_lr(0.5 * (a + b)))))
        mass0[level] += pair.q0_cdf(b) - pair.q0_cdf(a)
        mass1[level] += pair.q1_cdf(b) - pair.q1_cdf(a)
    # off-support tails (below 1e-15 of mass) follow their end segments
    first = quantize(q, math.exp(float(pair.log_lr(cuts[0]))))
    last = quantize(q, math.exp(float(pair.log_lr(cuts[-1]))))
    mass0[first] += pair.q0_cdf(cuts[0])
    mass1[first] += pair.q1_cdf(cuts[0])
    mass0[last] += 1.0 - pair.q0_cdf(cuts[-1])
    mass1[last] += 1.0 - pair.q1_cdf(cuts[-1])
    return mass0, mass1


def member_channel(
    member, pair: LfdPair, q: Quantizer, levels: tuple[int, ...] | None = None
) -> DiscretePmf:
    """Output law of a class member pushed through the same sensor rule.

    ``member`` exposes ``cdf``; point-contaminated members get their atom
    assigned exactly via :func:`quantize`. When ``levels`` restricts to a
    channel's kept level set, mass on dropped levels must be negligible.
    """
    bounds = level_boundaries(pair, q)
    if isinstance(member, ContaminatedGaussian):
        mass = (1.0 - member.eps) * _interval_masses(member.nominal.cdf, bounds)
        atom_level = quantize(q, math.exp(float(pair.log_lr(member.atom))))
        mass[atom_level] += member.eps
    else:
        mass = _interval_masses(member.cdf, bounds)
    mass = np.maximum(mass, 0.0)
    all_levels = tuple(range(q.num_levels))
    if levels is not None and levels != all_levels:
        keep = [all_levels.index(l) for l in levels]
        lost = mass.sum() - mass[keep].sum()
        if lost > 1e-12:
            raise ValueError(
                f"member places mass {lost:.3e} on levels dropped from the channel"
            )
        return pmf_from_weights(levels, mass[keep])
    return pmf_from_weights(all_levels, mass)


def default_quantizer(pair: LfdPair, num_thresholds: int) -> Quantizer:
    """Thresholds at equally spaced mixture quantiles of the robust LR.

    Places the d-th threshold at the LR value whose equal-mixture
    probability P[(Q0+Q1)/2 <= y] equals d / (D + 1).
    """
    if num_thresholds < 0:
        raise ValueError("num_thresholds must be >= 0")
    if num_thresholds == 0:
        return Quantizer(())
    lo, hi = pair.support
    mix_cdf = lambda y: 0.5 * (pair.q0_cdf(y) + pair.q1_cdf(y))
    thresholds = []
    for d in range(1, num_thresholds + 1):
        y = solve_increasing(mix_cdf, lo, hi, d / (num_thresholds + 1.0), tol=1e-12)
        thresholds.append(math.exp(float(pair.log_lr(y))))
    if any(b <= a for a, b in zip(thresholds, thresholds[1:])):
        raise ValueError(
            "could not place distinct default thresholds (flat LR region); "
            "supply explicit thresholds or reduce the level count"
        )
    return Quantizer(tuple(thresholds))


def llr_monotone_check(ch: SensorChannel) -> bool:
    """True when the per-level LLR weights are nondecreasing."""
    return bool(np.all(ch.llr[1:] >= ch.llr[:-1]))


def permutation_repair(ch: SensorChannel) -> tuple[dict[int, int], SensorChannel]:
    """Relabel a channel's levels into ascending-LLR order.

    Returns the permutation rho (original level -> ascending-LLR position,
    stable for ties) and the repaired channel, which passes
    :func:`llr_monotone_check`. Fusion error probabilities are invariant
    under the relabeling.
    """
    order = np.argsort(ch.llr, kind="stable")
    rho = {ch.levels[int(idx)]: pos for pos, idx in enumerate(order)}
    n = len(ch.levels)
    repaired = SensorChannel(
        pmf0=DiscretePmf(tuple(range(n)), ch.pmf0.probs[order]),
        pmf1=DiscretePmf(tuple(range(n)), ch.pmf1.probs[order]),
    )
    return rho, repaired


def attach_repair(ch: SensorChannel) -> SensorChannel:
    """Keep the channel's own labels but record the repair permutation."""
    rho, _ = permutation_repair(ch)
    return replace(ch, llr=ch.llr, repair=rho)


@dataclass(frozen=True, eq=False)
class RandomizedBinaryRule:
    """A randomized two-level sensor given by its acceptance probability.

    ``accept_prob(y)`` is the probability of transmitting level 1 on
    observation y; ``pmf0``/``pmf1`` are the Bernoulli output laws it
    induces under the least favorable pair. The rule itself is supplied by
    the caller (robust randomized designs come from outside this package);
    this type validates it and carries its induced laws to the
    admissibility check.
    """

    accept_prob: Callable[[float], float]
    pmf0: DiscretePmf
    pmf1: DiscretePmf

    @classmethod
    def from_accept_prob(
        cls, accept_prob, pair: LfdPair, grid: np.ndarray | None = None
    ) -> "RandomizedBinaryRule":
        """Induce the Bernoulli laws of a randomized rule under an LFD pair.

        P[U = 1 | H_j] is the integral of accept_prob against the j-th
        density, by trapezoid on the pair's grid; accuracy is grid-limited
        for discontinuous rules. The acceptance probability must stay
        within [0, 1] everywhere probed.
        """
        xs = pair.grid() if grid is None else np.asarray(grid, dtype=float)
        probs = np.asarray([float(accept_prob(float(y))) for y in xs])
        if np.any(probs < 0.0) or np.any(probs > 1.0):
            raise ValueError("accept_prob must map into [0, 1]")
        laws = []
        for logpdf in (pair.q0_logpdf, pair.q1_logpdf):
            density = np.exp(np.asarray(logpdf(xs)))
            p_one = min(max(trapezoid(xs, probs * density), 0.0), 1.0)
            laws.append(DiscretePmf((0, 1), np.array([1.0 - p_one, p_one])))
        return cls(accept_prob=accept_prob, pmf0=laws[0], pmf1=laws[1])

    def admissible(self) -> bool:
        return randomized_binary_admissible(self.pmf0, self.pmf1)


def randomized_binary_admissible(pmf0: DiscretePmf, pmf1: DiscretePmf) -> bool:
    """Admissibility of a randomized binary sensor from its induced laws.

    True iff q1(U=0) + q0(U=1) < 1 (strict). When admissible the two-level
    LLR is strictly increasing, which is re-asserted here.
    """
    if pmf0.levels != (0, 1) or pmf1.levels != (0, 1):
        raise ValueError("randomized binary laws must live on levels {0, 1}")
    q1_at_0 = float(pmf1.probs[0])
    q0_at_1 = float(pmf0.probs[1])
    admissible = q1_at_0 + q0_at_1 < 1.0
    if admissible:
        # cross-product form of llr(1) > llr(0), division-free
        if not pmf1.probs[1] * pmf0.probs[0] > pmf1.probs[0] * pmf0.probs[1]:
            raise RuntimeError("admissible laws must have strictly increasing LLR")
    return admissible


def block_sensor_llr(pair: LfdPair, observations: Sequence[float]) -> float:
    """Robust log-LR of a block of observations: the sum of per-sample values.

    Valid for censored-LR and mean-band pairs, where the product of the
    per-sample robust likelihood ratios retains the minimax property;
    divergence-ball (geometric-mixture) pairs are rejected because the
    product rule does not hold for them.
    """
    if pair.kind == "kl-dabak":
        raise ValueError("product rule invalid for divergence-ball classes")
    if pair.kind not in ("gaussian-band", "huber"):
        raise ValueError(f"unsupported pair kind for block sensing: {pair.kind!r}")
    obs = np.asarray(observations, dtype=float)
    if obs.size < 1:
        raise ValueError("need at least one observation")
    return float(np.sum(pair.log_lr(obs)))
