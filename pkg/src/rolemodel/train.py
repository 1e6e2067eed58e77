"""Trainers for the estimator in training.

Non-parametric path: accumulate reference posteriors per degraded-statistic
bin and finalize to their per-bin average, which solves the per-bin convex
program exactly. Parametric path: derivative-free minimization of a frozen
empirical objective over a small vector of correction weights in [0,1].
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AbsoluteContinuityViolation, BinOutOfRange, DimensionMismatch
from .probs import Distribution

TABLE_FORMAT_VERSION = 1


@dataclass(frozen=True)
class TrainingSample:
    """One paired (reference posterior, degraded statistic) observation."""

    posterior: Distribution
    statistic: int
    k: int | None = None  # time index, diagnostic only
    truth: int | None = None  # true symbol, kept for information measures


class SampleBatch:
    """Column-wise batch of training samples.

    Stores posteriors as an (N, q) array plus parallel bin/truth vectors;
    behaves as a sequence of :class:`TrainingSample` so scalar and
    vectorized consumers share one type.
    """

    def __init__(self, posteriors, bins, truths=None):
        self.posteriors = np.asarray(posteriors, dtype=float)
        self.bins = np.asarray(bins, dtype=int)
        self.truths = None if truths is None else np.asarray(truths, dtype=int)
        if self.posteriors.ndim != 2 or self.posteriors.shape[0] != self.bins.size:
            raise DimensionMismatch("need one posterior row per bin index")
        if self.truths is not None and self.truths.size != self.bins.size:
            raise DimensionMismatch("need one truth per sample")

    @classmethod
    def from_samples(cls, samples) -> "SampleBatch":
        samples = list(samples)
        post = np.stack([np.asarray(s.posterior) for s in samples])
        bins = [s.statistic for s in samples]
        truths = [s.truth for s in samples]
        return cls(post, bins, None if any(t is None for t in truths) else truths)

    def __len__(self) -> int:
        return self.bins.size

    def __getitem__(self, k: int) -> TrainingSample:
        return TrainingSample(
            posterior=Distribution(self.posteriors[k]),
            statistic=int(self.bins[k]),
            k=k,
            truth=None if self.truths is None else int(self.truths[k]),
        )

    def __iter__(self):
        for k in range(len(self)):
            yield self[k]


class PostTable:
    """Per-bin accumulator of reference posteriors.

    Stores plain sums and counts (never running means) so shards can be
    merged exactly; ``finalize`` turns each non-empty bin into the average
    posterior and fills empty bins with the fallback distribution.
    Single-writer: share work by sharding samples across tables and merging.
    """

    def __init__(self, num_bins: int, alphabet_size: int, fallback=None, bin_spec=None):
        if num_bins < 1 or alphabet_size < 2:
            raise ValueError("need at least one bin and a binary alphabet")
        self.num_bins = num_bins
        self.alphabet_size = alphabet_size
        self.sums = np.zeros((num_bins, alphabet_size))
        self.counts = np.zeros(num_bins, dtype=np.int64)
        if fallback is None:
            fallback = Distribution.uniform(alphabet_size)
        elif not isinstance(fallback, Distribution):
            fallback = Distribution(np.asarray(fallback, dtype=float))
        if fallback.q != alphabet_size:
            raise DimensionMismatch("fallback alphabet differs from table alphabet")
        self.fallback = fallback
        self.bin_spec = dict(bin_spec) if bin_spec else {"kind": "index", "num_bins": num_bins}

    @property
    def count_total(self) -> int:
        return int(self.counts.sum())

    def _check_bin(self, b: int) -> int:
        b = int(b)
        if not 0 <= b < self.num_bins:
            raise BinOutOfRange(f"bin {b} outside [0, {self.num_bins})")
        return b

    def ingest(self, sample: TrainingSample) -> None:
        b = self._check_bin(sample.statistic)
        p = np.asarray(sample.posterior, dtype=float)
        if p.size != self.alphabet_size:
            raise DimensionMismatch("sample alphabet differs from table alphabet")
        self.sums[b] += p
        self.counts[b] += 1

    def ingest_batch(self, batch: SampleBatch) -> None:
        """Order-independent bulk accumulation of a whole batch."""
        if batch.posteriors.shape[1] != self.alphabet_size:
            raise DimensionMismatch("batch alphabet differs from table alphabet")
        if batch.bins.size and (batch.bins.min() < 0 or batch.bins.max() >= self.num_bins):
            bad = batch.bins[(batch.bins < 0) | (batch.bins >= self.num_bins)][0]
            raise BinOutOfRange(f"bin {bad} outside [0, {self.num_bins})")
        for x in range(self.alphabet_size):
            self.sums[:, x] += np.bincount(
                batch.bins, weights=batch.posteriors[:, x], minlength=self.num_bins
            )
        self.counts += np.bincount(batch.bins, minlength=self.num_bins)

    def merge(self, other: "PostTable") -> None:
        """Fold another shard into this one (sums and counts add exactly)."""
        if (other.num_bins, other.alphabet_size) != (self.num_bins, self.alphabet_size):
            raise DimensionMismatch("cannot merge tables with different geometry")
        self.sums += other.sums
        self.counts += other.counts

    def finalize(self) -> np.ndarray:
        """Conditional table, one pmf row per bin (fallback where count = 0)."""
        out = np.tile(np.asarray(self.fallback), (self.num_bins, 1))
        filled = self.counts > 0
        rows = self.sums[filled] / self.counts[filled, None]
        out[filled] = rows / rows.sum(axis=1, keepdims=True)
        return out

    # -- persistence ---------------------------------------------------

    def to_json(self) -> str:
        doc = {
            "version": TABLE_FORMAT_VERSION,
            "q": self.alphabet_size,
            "bin_spec": self.bin_spec,
            "fallback": list(np.asarray(self.fallback)),
            "bins": [
                {"sum": list(self.sums[b]), "count": int(self.counts[b])}
                for b in range(self.num_bins)
            ],
        }
        return json.dumps(doc, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "PostTable":
        doc = json.loads(text)
        if doc.get("version") != TABLE_FORMAT_VERSION:
            raise ValueError(f"unsupported table version {doc.get('version')!r}")
        table = cls(
            num_bins=len(doc["bins"]),
            alphabet_size=int(doc["q"]),
            fallback=np.asarray(doc["fallback"], dtype=float),
            bin_spec=doc["bin_spec"],
        )
        for b, entry in enumerate(doc["bins"]):
            table.sums[b] = np.asarray(entry["sum"], dtype=float)
            table.counts[b] = int(entry["count"])
        return table

    def write_csv(self, stream) -> None:
        """Finalized table as rows (bin_index, p_0..p_{q-1}) for plotting."""
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(["bin_index"] + [f"p_{x}" for x in range(self.alphabet_size)])
        final = self.finalize()
        for b in range(self.num_bins):
            writer.writerow([b] + [repr(float(v)) for v in final[b]])


def empirical_ed(samples, q: np.ndarray) -> float:
    """Time-averaged divergence (bits) of sample posteriors from table rows q.

    (1/N) sum_k D(posterior_k || q[statistic_k]); the finite-N approximation
    of the expected divergence being minimized.
    """
    q = np.asarray(q, dtype=float)
    if isinstance(samples, SampleBatch):
        post, bins = samples.posteriors, samples.bins
    else:
        batch = SampleBatch.from_samples(samples)
        post, bins = batch.posteriors, batch.bins
    if post.shape[0] == 0:
        raise ValueError("empty sample sequence")
    if bins.min() < 0 or bins.max() >= q.shape[0]:
        raise BinOutOfRange("sample statistic not covered by the table")
    rows = q[bins]
    bad = (post > 0) & (rows == 0)
    if np.any(bad):
        k = int(np.nonzero(bad.any(axis=1))[0][0])
        raise AbsoluteContinuityViolation(f"sample {k}: table row is zero where posterior has mass")
    terms = np.where(post > 0, post * (np.log2(np.where(post > 0, post, 1.0)) - np.log2(np.where(rows > 0, rows, 1.0))), 0.0)
    return float(terms.sum() / post.shape[0])


@dataclass(frozen=True)
class ParametricCorrector:
    """Vector of correction weights, one per slot, each in [0,1]."""

    alphas: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.alphas, dtype=float)
        if a.ndim != 1 or np.any(a < 0) or np.any(a > 1):
            raise ValueError("alphas must lie in [0,1]")
        a = a.copy()
        a.flags.writeable = False
        object.__setattr__(self, "alphas", a)


@dataclass
class TrainResult:
    corrector: ParametricCorrector
    objective_value: float
    evaluations: int
    budget_exhausted: bool
    trace: list = field(default_factory=list, repr=False)


_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def train_parametric(objective, slots: int, budget: int = 4000, *,
                     init=None, line_tol: float = 1e-4, cycle_tol: float = 1e-6) -> TrainResult:
    """Minimize a deterministic objective over [0,1]^slots.

    Cyclic coordinate descent, each coordinate minimized by golden-section
    search to ``line_tol``; stops when a full cycle improves by less than
    ``cycle_tol`` or the evaluation budget runs out (best-so-far returned
    with ``budget_exhausted`` set). The returned point is the best of every
    point evaluated along the search trace.
    """
    if slots < 1:
        raise ValueError("need at least one slot")
    alphas = np.full(slots, 0.5) if init is None else np.asarray(init, dtype=float).copy()

    state = {"evals": 0, "exhausted": False}
    best = {"x": alphas.copy(), "f": math.inf}
    trace: list[tuple[np.ndarray, float]] = []

    def evaluate(x: np.ndarray) -> float:
        if state["evals"] >= budget:
            state["exhausted"] = True
            raise _BudgetStop
        state["evals"] += 1
        f = float(objective(ParametricCorrector(x.copy())))
        trace.append((x.copy(), f))
        if f < best["f"]:
            best["x"], best["f"] = x.copy(), f
        return f

    def golden(i: int, current: float) -> float:
        incumbent = alphas[i]
        a, b = 0.0, 1.0
        c = b - _INVPHI * (b - a)
        d = a + _INVPHI * (b - a)
        x = alphas
        x[i] = c
        fc = evaluate(x)
        x[i] = d
        fd = evaluate(x)
        while b - a > line_tol:
            if fc < fd:
                b, d, fd = d, c, fc
                c = b - _INVPHI * (b - a)
                x[i] = c
                fc = evaluate(x)
            else:
                a, c, fc = c, d, fd
                d = a + _INVPHI * (b - a)
                x[i] = d
                fd = evaluate(x)
        mid = 0.5 * (a + b)
        x[i] = mid
        fm = evaluate(x)
        # never leave the coordinate worse than it started
        pos, val = min(((incumbent, current), (c, fc), (d, fd), (mid, fm)), key=lambda t: t[1])
        x[i] = pos
        return val

    try:
        current = evaluate(alphas)
        while True:
            start = current
            for i in range(slots):
                current = golden(i, current)
            if start - current < cycle_tol:
                break
    except _BudgetStop:
        pass

    return TrainResult(
        corrector=ParametricCorrector(best["x"]),
        objective_value=best["f"],
        evaluations=state["evals"],
        budget_exhausted=state["exhausted"],
        trace=trace,
    )


class _BudgetStop(Exception):
    pass
