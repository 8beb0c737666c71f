"""Exact discrete distributions on the nonnegative integers.

Poisson truncation with certified tail mass, Poisson-binomial convolution,
value-weighted Bernoulli sums, total-variation distances, and the classical
Poisson-approximation inequalities (Barbour-Hall, Borisov-Ruzankin).
Everything is either exact or carries an explicit error bound so that
downstream inequality checks can be made truncation-safe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy import stats

from .errors import CapacityError, ConfigError, DomainError, PrecisionError

_NORM_TOL = 1e-12
_MERGE_TOL = 1e-12


def _readonly(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Pmf:
    """Finite distribution on the integers ``offset, offset+1, ...``.

    ``tail_mass`` is certified probability mass beyond the stored range; it is
    zero for exact constructions and positive only for truncations.
    ``poisson_mean`` records the parameter when the pmf is a truncated Poisson,
    which lets :func:`expect_over` certify tail contributions.
    """

    probs: np.ndarray
    offset: int = 0
    tail_mass: float = 0.0
    poisson_mean: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "probs", _readonly(self.probs))
        if self.probs.ndim != 1 or self.probs.size == 0:
            raise DomainError("pmf needs a one-dimensional, nonempty probability vector")
        if float(self.probs.min()) < -1e-15:
            raise DomainError("negative probability in pmf")
        if self.tail_mass < 0.0:
            raise DomainError("negative tail mass")
        total = float(self.probs.sum()) + self.tail_mass
        if abs(total - 1.0) > _NORM_TOL:
            raise DomainError(f"pmf is not normalized: total mass {total!r}")

    def __len__(self) -> int:
        return int(self.probs.size)

    @property
    def k_max(self) -> int:
        """Largest integer carried explicitly."""
        return self.offset + len(self) - 1

    def support(self) -> np.ndarray:
        return np.arange(self.offset, self.offset + len(self))

    def prob(self, k: int) -> float:
        j = k - self.offset
        if 0 <= j < len(self):
            return float(self.probs[j])
        return 0.0

    def mean(self) -> float:
        """Mean over the stored range (the truncated tail is ignored)."""
        return float(np.dot(self.support(), self.probs))

    def var(self) -> float:
        """Variance over the stored range."""
        m = self.mean()
        return float(np.dot((self.support() - m) ** 2, self.probs))

    def expect(self, h) -> float:
        """Plain truncated expectation of ``h``; see expect_over for certified tails."""
        return float(np.dot(_eval_on(h, self.support()), self.probs))

    def shifted(self, delta: int) -> "Pmf":
        return Pmf(self.probs, self.offset + delta, self.tail_mass, None)


@dataclass(frozen=True, eq=False)
class ValueDist:
    """Finite distribution over real values (point masses, sorted support)."""

    values: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _readonly(self.values))
        object.__setattr__(self, "masses", _readonly(self.masses))
        if self.values.shape != self.masses.shape or self.values.ndim != 1:
            raise DomainError("values and masses must be matching one-dimensional arrays")
        if float(self.masses.min()) < -1e-15:
            raise DomainError("negative mass")
        if abs(float(self.masses.sum()) - 1.0) > 1e-9:
            raise DomainError("value distribution is not normalized")
        if np.any(np.diff(self.values) < 0):
            raise DomainError("values must be sorted ascending")

    def __len__(self) -> int:
        return int(self.values.size)

    def mean(self) -> float:
        return float(np.dot(self.values, self.masses))

    def var(self) -> float:
        m = self.mean()
        return float(np.dot((self.values - m) ** 2, self.masses))

    def expect(self, h) -> float:
        return float(np.dot(_eval_on(h, self.values), self.masses))

    @classmethod
    def from_pmf(cls, pmf: Pmf, scale: float = 1.0, shift: float = 0.0) -> "ValueDist":
        if pmf.tail_mass > _NORM_TOL:
            raise PrecisionError("cannot convert a truncated pmf to an exact value distribution")
        vals = shift + scale * pmf.support().astype(float)
        keep = pmf.probs > 0.0
        vals, masses = vals[keep], pmf.probs[keep]
        if scale < 0:
            order = np.argsort(vals, kind="stable")
            return cls(vals[order], masses[order])
        return cls(vals, masses)


def _eval_on(h, ks: np.ndarray) -> np.ndarray:
    """Evaluate a scalar function on an array, falling back to a python loop."""
    try:
        out = np.asarray(h(ks), dtype=float)
        if out.shape == ks.shape:
            return out
    except Exception:
        pass
    return np.fromiter((float(h(k)) for k in ks), dtype=float, count=ks.size)


class Expectation(NamedTuple):
    value: float
    error: float  # certified bound on the truncated-tail contribution


class TvInterval(NamedTuple):
    lower: float
    upper: float


class PoissonTvBound(NamedTuple):
    tight: float  # 1 - exp(-|x - y|)
    weak: float  # |x - y|


class BarbourHallBound(NamedTuple):
    bound: float
    max_prob: float


# ---------------------------------------------------------------------------
# constructors


def poisson_pmf(mean: float, tail_tol: float = 1e-12) -> Pmf:
    """Truncated Poisson pmf with certified tail mass below ``tail_tol``.

    The cutoff is the smallest K whose exact remainder falls under tail_tol.
    """
    if mean < 0:
        raise DomainError("Poisson mean must be nonnegative")
    if not 0.0 < tail_tol < 1.0:
        raise DomainError("tail_tol must lie in (0, 1)")
    if mean == 0.0:
        return Pmf(np.array([1.0]), poisson_mean=0.0)
    if mean > 700.0:
        raise PrecisionError("Poisson mean too large for direct pmf recurrence")
    terms = [math.exp(-mean)]
    cum = terms[0]
    k = 0
    while 1.0 - cum >= tail_tol:
        k += 1
        terms.append(terms[-1] * mean / k)
        cum += terms[-1]
    return Pmf(np.array(terms), tail_mass=max(0.0, 1.0 - cum), poisson_mean=float(mean))


def bernoulli_sum_pmf(probs: Sequence[float]) -> Pmf:
    """Exact Poisson-binomial pmf of a sum of independent Bernoulli variables.

    Sequential O(n^2) convolution; the empty sum is a point mass at zero.
    """
    p = np.asarray(list(probs), dtype=float)
    if p.size and (float(p.min()) < -1e-15 or float(p.max()) > 1.0 + 1e-15):
        raise DomainError("Bernoulli probabilities must lie in [0, 1]")
    out = np.array([1.0])
    for pi in p:
        nxt = np.zeros(out.size + 1)
        nxt[:-1] = out * (1.0 - pi)
        nxt[1:] += out * pi
        out = nxt
    return Pmf(out)


def _merge_point_masses(values: np.ndarray, masses: np.ndarray,
                        tol: float = _MERGE_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Sorted-value sweep; points within tol of the group anchor are pooled."""
    order = np.argsort(values, kind="stable")
    v = values[order]
    m = masses[order]
    out_v: list[float] = []
    out_m: list[float] = []
    anchor = None
    for vi, mi in zip(v, m):
        if anchor is None or vi - anchor > tol:
            out_v.append(float(vi))
            out_m.append(float(mi))
            anchor = float(vi)
        else:
            j = len(out_v) - 1
            tot = out_m[j] + mi
            if tot > 0:
                out_v[j] = (out_v[j] * out_m[j] + vi * mi) / tot
            out_m[j] = tot
    return np.array(out_v), np.array(out_m)


def weighted_sum_distribution(weights: Sequence[float], probs: Sequence[float],
                              mode: str = "exact", *, seed: int | None = None,
                              samples: int = 1_000_000, stream: int = 0) -> ValueDist:
    """Distribution of ``sum_i w_i * Bernoulli(p_i)`` with independent terms.

    Exact mode enumerates all outcomes by sequential branching (requires
    n <= 20); monte_carlo mode draws ``samples`` realizations from a
    counter-based generator keyed by ``seed`` (and the optional stream id),
    so results are bit-reproducible.
    """
    w = np.asarray(list(weights), dtype=float)
    p = np.asarray(list(probs), dtype=float)
    if w.shape != p.shape:
        raise DomainError("weights and probs must have the same length")
    if w.size and float(w.min()) < 0:
        raise DomainError("weights must be nonnegative")
    if w.size and (float(p.min()) < -1e-15 or float(p.max()) > 1.0 + 1e-15):
        raise DomainError("probabilities must lie in [0, 1]")

    if mode == "exact":
        if w.size > 20:
            raise CapacityError(
                f"exact enumeration limited to 20 terms (got {w.size}); "
                "use mode='monte_carlo' with an explicit seed")
        vals = np.array([0.0])
        mass = np.array([1.0])
        for wi, pi in zip(w, p):
            if pi <= 0.0:
                continue
            if pi >= 1.0:
                vals = vals + wi
                continue
            vals2 = np.concatenate([vals, vals + wi])
            mass2 = np.concatenate([mass * (1.0 - pi), mass * pi])
            vals, mass = _merge_point_masses(vals2, mass2)
        return ValueDist(vals, mass)

    if mode == "monte_carlo":
        if seed is None:
            raise ConfigError("monte_carlo mode requires an explicit seed")
        bitgen = np.random.Philox(seed)
        if stream:
            bitgen = bitgen.jumped(stream)
        rng = np.random.Generator(bitgen)
        chunks: list[np.ndarray] = []
        remaining = int(samples)
        if remaining <= 0:
            raise DomainError("samples must be positive")
        while remaining > 0:
            m = min(remaining, 1 << 16)
            u = rng.random((m, w.size))
            chunks.append((u < p) @ w)
            remaining -= m
        draws = np.concatenate(chunks) if chunks else np.zeros(0)
        vals, counts = np.unique(draws, return_counts=True)
        vals, mass = _merge_point_masses(vals, counts / float(samples))
        return ValueDist(vals, mass)

    raise DomainError(f"unknown mode {mode!r}")


# ---------------------------------------------------------------------------
# distances and approximation bounds


def tv_distance(p: Pmf, q: Pmf) -> TvInterval:
    """Total-variation distance between two pmfs on the integers.

    Returns an interval: the point estimate over the stored ranges widened by
    half the combined tail masses, so the true distance is certified to lie
    inside it.  Callers checking an upper bound should compare ``upper``.
    """
    lo = min(p.offset, q.offset)
    hi = max(p.k_max, q.k_max)
    n = hi - lo + 1
    pa = np.zeros(n)
    qa = np.zeros(n)
    pa[p.offset - lo:p.offset - lo + len(p)] = p.probs
    qa[q.offset - lo:q.offset - lo + len(q)] = q.probs
    d0 = 0.5 * float(np.abs(pa - qa).sum())
    slack = 0.5 * (p.tail_mass + q.tail_mass)
    return TvInterval(max(0.0, d0 - slack), min(1.0, d0 + slack))


def tv_poisson_bound(x: float, y: float) -> PoissonTvBound:
    """Upper bounds on the TV distance between Poisson(x) and Poisson(y)."""
    if x < 0 or y < 0:
        raise DomainError("Poisson parameters must be nonnegative")
    gap = abs(x - y)
    return PoissonTvBound(-math.expm1(-gap), gap)


def barbour_hall_bound(probs: Sequence[float]) -> BarbourHallBound:
    """TV bound between a Bernoulli sum and the Poisson with the same mean.

    Returns ``(1 - e^{-x}) * x^{-1} * sum(p_i^2)`` with ``x = sum(p_i)``,
    together with ``max(p_i)``; the bound never exceeds the latter.
    """
    p = np.asarray(list(probs), dtype=float)
    if p.size == 0:
        raise DomainError("probability vector must be nonempty")
    if float(p.min()) < 0 or float(p.max()) > 1.0:
        raise DomainError("probabilities must lie in [0, 1]")
    x = float(p.sum())
    pmax = float(p.max())
    if x == 0.0:
        return BarbourHallBound(0.0, pmax)
    bound = -math.expm1(-x) / x * float(np.dot(p, p))
    return BarbourHallBound(bound, pmax)


def borisov_ruzankin_bound(mean: float, nu: float, max_prob: float) -> float:
    """Bound on ``|E h(S) - E h(Poisson(mean))|`` for a Bernoulli sum S.

    ``nu`` bounds the expected absolute second difference of h under the
    Poisson law and ``max_prob`` is the largest success probability.
    """
    if max_prob >= 1.0:
        raise DomainError("max_prob must be below 1")
    if max_prob < 0 or mean < 0 or nu < 0:
        raise DomainError("mean, nu and max_prob must be nonnegative")
    return 0.5 * mean * nu * max_prob * math.exp(max_prob) / (1.0 - max_prob) ** 2


# ---------------------------------------------------------------------------
# certified expectations under exponential growth envelopes


def exp_weighted_poisson_tail(mean: float, k_max: int, rate: float, scale: float) -> float:
    """Certified bound on ``sum_{k > k_max} scale * e^{rate k} * Poisson_mean(k)``.

    Uses the exponential tilt: the weighted tail equals
    ``scale * e^{mean (e^rate - 1)}`` times a Poisson(mean * e^rate) tail.
    """
    if mean < 0 or scale < 0 or rate < 0:
        raise DomainError("mean, rate and scale must be nonnegative")
    if scale == 0.0:
        return 0.0
    if rate * 1.0 > 50:
        raise PrecisionError("growth-envelope rate too large to certify tails")
    tilted = mean * math.exp(rate)
    factor = scale * math.exp(mean * math.expm1(rate))
    return factor * float(stats.poisson.sf(k_max, tilted))


def exp_weighted_poisson_survival_tail(mean: float, k_max: int, rate: float,
                                       scale: float) -> float:
    """Certified bound on ``sum_{k > k_max} scale * e^{rate k} * P(Poisson >= k+1)``."""
    if mean < 0 or scale < 0 or rate < 0:
        raise DomainError("mean, rate and scale must be nonnegative")
    if scale == 0.0:
        return 0.0
    if rate == 0.0:
        # sum_{k>K} P(Y >= k+1) = E[(Y-K-1)^+] <= mean * P(Y >= K)
        return scale * mean * float(stats.poisson.sf(k_max - 1, mean))
    tilted = mean * math.exp(rate)
    factor = scale * math.exp(-rate) / (-math.expm1(-rate))
    return factor * math.exp(mean * math.expm1(rate)) * float(stats.poisson.sf(k_max + 1, tilted))


def _poisson_terms(mean: float, k_max: int) -> np.ndarray:
    terms = np.empty(k_max + 1)
    terms[0] = math.exp(-mean)
    for k in range(1, k_max + 1):
        terms[k] = terms[k - 1] * mean / k
    return terms


def poisson_expect(mean: float, h, rate: float, scale: float,
                   tol: float = 1e-12) -> Expectation:
    """Certified ``E[h(X)]`` for ``X ~ Poisson(mean)``, with ``|h(k)| <= scale e^{rate k}``.

    The truncation point is grown until the envelope-weighted tail drops
    below ``tol``; the returned error is that certified tail bound.
    """
    if mean < 0:
        raise DomainError("Poisson mean must be nonnegative")
    if mean == 0.0:
        return Expectation(float(h(0)) if np.isscalar(h(0)) else float(np.asarray(h(0))), 0.0)
    k_max = int(mean + 10.0 * math.sqrt(mean + 1.0) + 20.0)
    while True:
        err = exp_weighted_poisson_tail(mean, k_max, rate, scale)
        if err < tol:
            break
        k_max *= 2
        if k_max > 1_000_000:
            raise PrecisionError("cannot certify Poisson expectation under this envelope")
    terms = _poisson_terms(mean, k_max)
    ks = np.arange(k_max + 1)
    value = float(np.dot(_eval_on(h, ks), terms))
    return Expectation(value, err)


def expect_over(pmf: Pmf, h, exp_envelope: tuple[float, float] | None = None) -> Expectation:
    """``sum h(k) p(k)`` with a certified error interval for truncated tails.

    For pmfs with positive tail mass the tail contribution is bounded through
    an exponential envelope ``|h(k)| <= scale * e^{rate k}`` (given as
    ``(rate, scale)``); this requires the pmf to be a Poisson truncation.
    """
    value = float(np.dot(_eval_on(h, pmf.support()), pmf.probs))
    if pmf.tail_mass <= 0.0:
        return Expectation(value, 0.0)
    if exp_envelope is None:
        raise PrecisionError("pmf has tail mass but no growth envelope was supplied")
    if pmf.poisson_mean is None:
        raise PrecisionError("tail certification is only available for Poisson truncations")
    rate, scale = exp_envelope
    err = exp_weighted_poisson_tail(pmf.poisson_mean, pmf.k_max, rate, scale)
    return Expectation(value, err)
