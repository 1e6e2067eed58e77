"""Binary check-node testbed.

A check node aggregates d independent binary branches; the bit being
estimated is the XOR of the branch bits. The reference estimator combines
exact branch LLRs with the tanh rule; the estimator in training sees only
the min-sum statistic (min magnitude, sign product), quantized into bins.
Training data comes from BPSK over AWGN with per-branch noise levels, so
the unequal-variance case is a first-class input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import chains
from .errors import BinOutOfRange
from .probs import DEFAULT_FLOOR, Distribution, floor_rows, llrs_to_dists, soft_mi
from .rng import make_rng
from .train import PostTable, SampleBatch, empirical_ed

#: Finite LLRs saturate here before entering tanh; tanh(38/2) is still
#: strictly below 1 in double precision, keeping atanh finite.
LLR_SATURATION = 38.0


@dataclass(frozen=True)
class CheckNodeInput:
    """Incoming branch LLRs and the noise levels that generated them."""

    llrs: np.ndarray
    sigmas: np.ndarray

    def __post_init__(self):
        llrs = np.asarray(self.llrs, dtype=float)
        sigmas = np.asarray(self.sigmas, dtype=float)
        if llrs.ndim != 1 or llrs.size < 2:
            raise ValueError("need at least two incoming branches")
        if sigmas.shape != llrs.shape or np.any(sigmas <= 0):
            raise ValueError("need one positive sigma per branch")
        object.__setattr__(self, "llrs", llrs)
        object.__setattr__(self, "sigmas", sigmas)

    @property
    def degree(self) -> int:
        return self.llrs.size


@dataclass(frozen=True)
class MinSumStatistic:
    magnitude: float
    sign: int

    @property
    def llr(self) -> float:
        """The naive LLR view: sign times magnitude."""
        return self.sign * self.magnitude


def _input_llrs(node_input) -> np.ndarray:
    if isinstance(node_input, CheckNodeInput):
        return node_input.llrs
    return np.asarray(node_input, dtype=float)


def tanh_rule(node_input) -> float:
    """Exact LLR combination 2*atanh(prod_i tanh(l_i / 2)).

    A zero LLR annihilates the combination; an infinite LLR contributes
    only its sign, leaving the remaining branches to set the magnitude.
    """
    llrs = _input_llrs(node_input)
    sign = 1.0
    finite = []
    for l in llrs:
        if l == 0.0:
            return 0.0
        if math.isinf(l):
            sign = -sign if l < 0 else sign
        else:
            finite.append(min(max(l, -LLR_SATURATION), LLR_SATURATION))
    if not finite:
        return sign * math.inf
    if len(finite) == 1:
        return sign * finite[0]
    prod = math.prod(float(np.tanh(l / 2.0)) for l in finite)
    prod = min(max(prod, -_TANH_CEIL), _TANH_CEIL)  # saturated tanh can round to 1
    return sign * 2.0 * float(np.arctanh(prod))


#: Largest double below 1; keeps atanh finite when saturated tanh rounds to 1.
_TANH_CEIL = math.nextafter(1.0, 0.0)


def tanh_rule_rows(llrs: np.ndarray) -> np.ndarray:
    """Vectorized tanh rule over finite LLR rows, shape (N, d) -> (N,)."""
    l = np.clip(np.asarray(llrs, dtype=float), -LLR_SATURATION, LLR_SATURATION)
    prod = np.clip(np.prod(np.tanh(l / 2.0), axis=1), -_TANH_CEIL, _TANH_CEIL)
    return 2.0 * np.arctanh(prod)


def min_sum(node_input) -> MinSumStatistic:
    """The degraded statistic: (min_i |l_i|, prod_i sign l_i)."""
    llrs = _input_llrs(node_input)
    magnitude = float(np.min(np.abs(llrs)))
    neg = int(np.sum(llrs < 0))
    sign = -1 if neg % 2 else 1
    if magnitude == 0.0:
        sign = 1  # erasure: sign carries no information
    return MinSumStatistic(magnitude=magnitude, sign=sign)


@dataclass(frozen=True)
class ZQuantizer:
    """Uniform magnitude bins composed with the sign branch.

    Bin layout: [0, num_bins) for sign +1, [num_bins, 2*num_bins) for -1;
    magnitudes at or above ``max_magnitude`` clamp into the top bin.
    """

    num_bins: int = 64
    max_magnitude: float = 25.0

    def __post_init__(self):
        if self.num_bins < 1 or self.max_magnitude <= 0:
            raise ValueError("need positive bin count and magnitude range")

    @property
    def total_bins(self) -> int:
        return 2 * self.num_bins

    def bin_index(self, stat: MinSumStatistic) -> int:
        return int(self.bin_indices(np.array([stat.magnitude]), np.array([stat.sign]))[0])

    def bin_indices(self, magnitudes: np.ndarray, signs: np.ndarray) -> np.ndarray:
        mag = np.asarray(magnitudes, dtype=float)
        if np.any(mag < 0):
            raise BinOutOfRange("negative magnitude")
        width = self.max_magnitude / self.num_bins
        idx = np.minimum((mag / width).astype(int), self.num_bins - 1)
        return np.where(np.asarray(signs) < 0, idx + self.num_bins, idx)

    def bin_center_llr(self, b: int) -> float:
        """Representative LLR of a bin (sign applied to the magnitude midpoint)."""
        if not 0 <= b < self.total_bins:
            raise BinOutOfRange(f"bin {b} outside [0, {self.total_bins})")
        width = self.max_magnitude / self.num_bins
        mag = (b % self.num_bins + 0.5) * width
        return -mag if b >= self.num_bins else mag

    def spec(self) -> dict:
        return {
            "kind": "minsum",
            "num_bins": self.num_bins,
            "max_magnitude": self.max_magnitude,
        }


class MinsumBatch(SampleBatch):
    """Training samples plus the raw min-sum LLR each one was binned from."""

    def __init__(self, posteriors, bins, truths, minsum_llrs):
        super().__init__(posteriors, bins, truths)
        self.minsum_llrs = np.asarray(minsum_llrs, dtype=float)


def simulate_batch(d: int, sigmas, n: int, seed: int,
                   quantizer: ZQuantizer | None = None, stream: int = 0) -> MinsumBatch:
    """Draw n check-node trials and pair reference posteriors with Z bins.

    Each trial draws d independent branch bits, observes them over BPSK/AWGN
    with the given per-branch sigmas (exact branch LLR 2y/sigma^2), and
    emits the tanh-rule posterior for the XOR bit alongside the quantized
    min-sum statistic. Deterministic for a given (seed, stream).
    """
    if n < 1:
        raise ValueError("need at least one trial")
    sig = np.asarray(sigmas, dtype=float)
    if sig.shape != (d,) or np.any(sig <= 0):
        raise ValueError("need one positive sigma per branch")
    quantizer = quantizer or ZQuantizer()
    rng = make_rng(seed, 1, stream)
    bits = rng.integers(0, 2, size=(n, d))
    symbols = 1.0 - 2.0 * bits
    y = symbols + sig * rng.standard_normal((n, d))
    llrs = 2.0 * y / sig**2
    ref_llr = tanh_rule_rows(llrs)
    truths = np.bitwise_xor.reduce(bits, axis=1)
    mags = np.min(np.abs(llrs), axis=1)
    signs = np.where(np.sum(llrs < 0, axis=1) % 2 == 1, -1, 1)
    bins = quantizer.bin_indices(mags, signs)
    return MinsumBatch(
        posteriors=llrs_to_dists(ref_llr),
        bins=bins,
        truths=truths,
        minsum_llrs=signs * mags,
    )


def new_table(quantizer: ZQuantizer, fallback=None) -> PostTable:
    return PostTable(
        num_bins=quantizer.total_bins,
        alphabet_size=2,
        fallback=fallback,
        bin_spec=quantizer.spec(),
    )


def train_table(d: int, sigmas, n: int, seed: int,
                quantizer: ZQuantizer | None = None) -> PostTable:
    """Simulate a batch and ingest it into a fresh table."""
    quantizer = quantizer or ZQuantizer()
    table = new_table(quantizer)
    table.ingest_batch(simulate_batch(d, sigmas, n, seed, quantizer))
    return table


@dataclass(frozen=True)
class EvalReport:
    empirical_ed: float
    soft_mi: float
    baseline_ed: float
    count: int

    def summary(self) -> str:
        return (
            f"samples={self.count} empirical_ed={self.empirical_ed:.6f} bits "
            f"baseline_ed={self.baseline_ed:.6f} bits soft_mi={self.soft_mi:.6f} bits"
        )


def evaluate_table(table: PostTable, batch: MinsumBatch) -> EvalReport:
    """Score a trained table on a batch, against the naive min-sum baseline.

    The baseline treats the raw min-sum LLR as if it were the true LLR; its
    output rows are floored before the divergence since extreme LLRs
    produce exact zeros that the reference posteriors never have.
    """
    q = table.finalize()
    ed = empirical_ed(batch, q)
    baseline_rows = floor_rows(llrs_to_dists(batch.minsum_llrs), DEFAULT_FLOOR)
    post = batch.posteriors
    terms = np.where(post > 0, post * (np.log2(np.where(post > 0, post, 1.0)) - np.log2(baseline_rows)), 0.0)
    baseline = float(terms.sum() / post.shape[0])
    mi = soft_mi(batch.truths, q[batch.bins]) if batch.truths is not None else math.nan
    return EvalReport(empirical_ed=ed, soft_mi=mi, baseline_ed=baseline, count=len(batch))


# -- discretized surrogate chain ----------------------------------------


def _phi(x: float) -> float:
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


def _branch_level_probs(sigma: float, mag_edges: np.ndarray) -> np.ndarray:
    """(2, levels) table: P(level | bit) for one branch.

    Levels 0..M-1 are positive-LLR magnitude cells, M..2M-1 the negative
    mirror; LLR cell bounds map to observation bounds via y = l*sigma^2/2.
    """
    m = mag_edges.size - 1
    out = np.empty((2, 2 * m))
    for bit, mu in ((0, 1.0), (1, -1.0)):
        for cell in range(m):
            lo, hi = mag_edges[cell], mag_edges[cell + 1]
            y_lo, y_hi = lo * sigma**2 / 2.0, hi * sigma**2 / 2.0
            pos = _phi((y_hi - mu) / sigma) - _phi((y_lo - mu) / sigma)
            neg = _phi((-y_lo - mu) / sigma) - _phi((-y_hi - mu) / sigma)
            out[bit, cell] = pos
            out[bit, m + cell] = neg
    return out


@dataclass(frozen=True)
class SurrogateChain:
    """Exactly enumerable stand-in for the continuous check-node experiment.

    Y is the tuple of per-branch quantized LLR levels; Z applies the
    min-sum pairing (min magnitude level, sign product) to Y. The chain
    oracle can then evaluate trained tables and the divergence floor
    without Monte Carlo.
    """

    model: chains.ChainModel
    z_of_y: np.ndarray  # (ny,) bin index of each y tuple
    num_z: int
    levels_per_branch: int

    def divergence_floor(self) -> float:
        return chains.divergence_floor(self.model)

    def sample_batch(self, n: int, seed: int, stream: int = 0) -> SampleBatch:
        rng = make_rng(seed, 2, stream)
        post_xy = chains.posterior_table_xy(self.model)
        ys = rng.choice(self.model.ny, size=n, p=self.model.py())
        xs = (rng.random(n) >= post_xy[ys, 0]).astype(int)  # binary: P(x=0) first
        return SampleBatch(posteriors=post_xy[ys], bins=self.z_of_y[ys], truths=xs)

    def new_table(self) -> PostTable:
        return PostTable(num_bins=self.num_z, alphabet_size=2,
                         bin_spec={"kind": "surrogate-minsum", "num_bins": self.num_z})

    def exact_ed(self, q: np.ndarray) -> float:
        return chains.expected_divergence(self.model, q)


def surrogate_chain(sigmas, levels_per_branch: int = 8,
                    max_branch_magnitude: float = 8.0) -> SurrogateChain:
    """Build the discrete chain for branch LLRs quantized to a few levels."""
    sig = np.asarray(sigmas, dtype=float)
    d = sig.size
    if levels_per_branch % 2 or levels_per_branch < 2:
        raise ValueError("levels_per_branch must be even (sign * magnitude cells)")
    m = levels_per_branch // 2
    edges = np.linspace(0.0, max_branch_magnitude, m + 1)
    edges[-1] = math.inf  # top magnitude cell is open
    branch = [_branch_level_probs(s, edges) for s in sig]

    # P(level tuple | x) through the XOR mixture over branch bits
    even = branch[0][0]
    odd = branch[0][1]
    for a in branch[1:]:
        even, odd = (
            np.multiply.outer(even, a[0]) + np.multiply.outer(odd, a[1]),
            np.multiply.outer(even, a[1]) + np.multiply.outer(odd, a[0]),
        )
    scale = 2.0 ** (d - 1)
    ch1 = np.stack([even.ravel() / scale, odd.ravel() / scale])

    # Z = (sign product, min magnitude level) read directly off the levels
    grids = np.meshgrid(*([np.arange(levels_per_branch)] * d), indexing="ij")
    levels = np.stack([g.ravel() for g in grids], axis=1)  # (ny, d)
    mag_levels = levels % m
    negs = (levels >= m).sum(axis=1)
    z_of_y = np.where(negs % 2 == 1, m, 0) + mag_levels.min(axis=1)

    ny = levels.shape[0]
    ch2 = np.zeros((ny, 2 * m))
    ch2[np.arange(ny), z_of_y] = 1.0
    model = chains.ChainModel(px=np.array([0.5, 0.5]), ch1=ch1, ch2=ch2)
    return SurrogateChain(model=model, z_of_y=z_of_y, num_z=2 * m,
                          levels_per_branch=levels_per_branch)


def naive_table(quantizer: ZQuantizer) -> np.ndarray:
    """The untrained baseline as a conditional table: bin-center LLR posteriors."""
    centers = np.array([quantizer.bin_center_llr(b) for b in range(quantizer.total_bins)])
    return llrs_to_dists(centers)


def fallback_distribution(kind: str, batch: MinsumBatch | None = None) -> Distribution:
    """Empty-bin fallback: 'uniform' (default) or the batch's empirical prior."""
    if kind == "uniform":
        return Distribution.uniform(2)
    if kind == "prior":
        if batch is None or batch.truths is None:
            raise ValueError("empirical prior needs a batch with truths")
        counts = np.bincount(batch.truths, minlength=2).astype(float)
        return Distribution.from_weights(counts + 1.0)  # add-one smoothing
    raise ValueError(f"unknown fallback kind {kind!r}")
