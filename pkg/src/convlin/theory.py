"""Probability calculators for the generalization analysis.

The limiting error of extreme-hinge conv training on the cls task splits
into two pieces: the chance that the training positions fail a
primitivity condition on the Gram matrix of the training average, and a
coverage term counting test positions farther than k-1 from every
training position (those get margin zero, hence half credit).  This
module has closed forms and Monte-Carlo estimators for both pieces, the
matching one-layer closed form, the sample-complexity consequences, and
the evenly-spaced training construction for which the conv advantage
provably vanishes.

Positions are 1-based throughout this module.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .linalg import is_primitive_bruteforce
from .tasks import TrainingSet


def has_adjacent_pair(positions, k, d):
    """Whether some adjacent position pair (i-1, i) with k <= i <= d is
    fully contained in ``positions`` (1-based).

    This is the easy-to-sample sufficient condition for the Gram matrix
    of the training average to be primitive: adjacent columns then share
    support, giving a positive diagonal plus an irreducible pattern.
    """
    s = set(int(p) for p in positions)
    return any(i - 1 in s and i in s for i in range(max(k, 2), d + 1))


def estimate_prob_no_adjacent_pair(d, k, n, trials, rng):
    """Monte-Carlo estimate of the adjacent-pair condition failing.

    Draws n positions uniformly with replacement per trial and reports
    the fraction of trials with no adjacent pair, plus the binomial
    standard error.  Vectorized over trials; requires trials >= 100 for
    a meaningful error bar.
    """
    if trials < 100:
        raise ConfigError(f"need at least 100 trials, got {trials}")
    _check_dk(d, k)
    hits = np.zeros((trials, d + 2), dtype=bool)
    pos = rng.integers(1, d + 1, size=(trials, n))
    hits[np.arange(trials)[:, None], pos] = True
    lo = max(k, 2)
    pair = hits[:, lo : d + 1] & hits[:, lo - 1 : d]
    p = float(np.mean(~pair.any(axis=1)))
    se = math.sqrt(p * (1.0 - p) / trials)
    return p, se


def estimate_prob_nonprimitive(d, k, n, trials, rng):
    """Monte-Carlo estimate of the Gram matrix not being primitive.

    The tighter, slower companion of `estimate_prob_no_adjacent_pair`:
    per trial it builds the exact integer zero pattern of the training
    average for n uniform positions and brute-forces primitivity of its
    Gram matrix.  Returns (estimate, binomial standard error).
    """
    if trials < 100:
        raise ConfigError(f"need at least 100 trials, got {trials}")
    _check_dk(d, k)
    misses = 0
    for _ in range(trials):
        pos = rng.integers(0, d, size=n)
        hist = np.bincount(pos, minlength=d)
        cols = np.zeros((d, k), dtype=np.int64)
        for j in range(k):
            cols[: d - j, j] = hist[j:]
        if not is_primitive_bruteforce(cols.T @ cols):
            misses += 1
    p = misses / trials
    se = math.sqrt(p * (1.0 - p) / trials)
    return p, se


def _check_dk(d, k):
    if d < 2:
        raise ConfigError(f"d must be at least 2, got {d}")
    if not 1 <= k <= d:
        raise ConfigError(f"need 1 <= k <= d, got k={k}, d={d}")


def coverage_term_exact(d, k, n):
    """Half the average probability that a position is uncovered.

    For each test position l the chance that all n uniform training
    positions stay at distance >= k is ((d - k - min(k, l, d-l+1) + 1)/d)^n
    (clamped at zero near small d); averaging over l and halving gives
    the exact coverage piece of the error bound.
    """
    _check_dk(d, k)
    if n < 0:
        raise ConfigError(f"n must be >= 0, got {n}")
    l = np.arange(1, d + 1)
    edge = np.minimum(k, np.minimum(l, d - l + 1))
    base = np.clip((d - k - edge + 1) / d, 0.0, None)
    return float(0.5 * np.mean(base ** n))


def coverage_term_approx(d, k, n):
    """Interior approximation 0.5 * ((d - 2k + 1)/d)^n.

    Ignores boundary positions, so it needs d >= 2k - 1 to stay in
    range; above that it upper-bounds every interior position's miss
    probability exactly.
    """
    _check_dk(d, k)
    if n < 0:
        raise ConfigError(f"n must be >= 0, got {n}")
    if d < 2 * k - 1:
        raise ConfigError(f"approximation needs d >= 2k - 1, got d={d}, k={k}")
    return 0.5 * ((d - 2 * k + 1) / d) ** n


def onelayer_error(d, n):
    """Expected one-layer error 0.5 * ((d - 1)/d)^n on cls.

    A trained one-layer model is correct exactly on sampled positions
    and coin-flips the rest, so the error is half the per-position miss
    probability.
    """
    if d < 2:
        raise ConfigError(f"d must be at least 2, got {d}")
    if n < 0:
        raise ConfigError(f"n must be >= 0, got {n}")
    return 0.5 * ((d - 1) / d) ** n


@dataclass
class SampleComplexity:
    """Samples needed to push the conv error bound below epsilon."""

    n_exact: float
    n_limit_per_d: float


def sample_complexity(d, k, epsilon):
    """Solve the coverage approximation for n at a target error.

    ``n_exact`` solves 0.5 * ((d-2k+1)/d)^n = epsilon; ``n_limit_per_d``
    is the large-d limit of n/d, namely log(1/(2 eps)) / (2k - 1).
    Requires 0 < epsilon < 1/2 (the bound starts at 1/2) and
    d - 2k + 1 >= 1 so the denominator is a finite positive log.
    """
    _check_dk(d, k)
    if not 0.0 < epsilon < 0.5:
        raise ConfigError(f"epsilon must lie in (0, 0.5), got {epsilon}")
    if d - 2 * k + 1 < 1:
        raise ConfigError(f"need d - 2k + 1 >= 1, got d={d}, k={k}")
    target = math.log(1.0 / (2.0 * epsilon))
    n_exact = target / (math.log(d) - math.log(d - 2 * k + 1))
    return SampleComplexity(n_exact=n_exact, n_limit_per_d=target / (2 * k - 1))


def sparse_training_set(d, k, n):
    """Evenly spaced cls training points with gaps too wide for width k.

    Positions k, 3k, 5k, ..., all labelled +1.  Any two are at least 2k
    apart, so the k columns of the training average have disjoint
    support, its Gram matrix is I/n, every init is already asymptotic,
    and conv training generalizes no better than one layer.  Requires
    k + (n-1) * 2k <= d.
    """
    _check_dk(d, k)
    if n < 1:
        raise ConfigError(f"n must be >= 1, got {n}")
    if k + (n - 1) * 2 * k > d:
        raise ConfigError(
            f"n={n} spaced points of width k={k} do not fit in d={d} "
            f"(need k + (n-1)*2k <= d)")
    pos_1b = k + 2 * k * np.arange(n)
    return TrainingSet(
        task="cls",
        d=d,
        positions=(pos_1b - 1)[:, None].astype(np.intp),
        values=np.ones((n, 1)),
        y=np.ones(n, dtype=np.int64),
        indices=2 * (pos_1b - 1),
        s_tr=frozenset(int(p) for p in pos_1b),
    )


@dataclass
class DecompositionReport:
    """Both pieces of the error bound at one (d, k, n), plus context."""

    d: int
    k: int
    n: int
    trials: int
    prob_no_adjacent_pair: float
    prob_stderr: float
    coverage_exact: float
    coverage_approx: float
    onelayer: float

    @property
    def upper_bound_sum(self):
        return self.prob_no_adjacent_pair + self.coverage_exact


def decomposition_report(d, k, n, trials, rng):
    """Estimate the two bound pieces and bundle the closed forms."""
    p, se = estimate_prob_no_adjacent_pair(d, k, n, trials, rng)
    return DecompositionReport(
        d=d, k=k, n=n, trials=trials,
        prob_no_adjacent_pair=p, prob_stderr=se,
        coverage_exact=coverage_term_exact(d, k, n),
        coverage_approx=coverage_term_approx(d, k, n),
        onelayer=onelayer_error(d, n),
    )
