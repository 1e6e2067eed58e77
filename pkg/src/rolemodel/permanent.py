"""Matrix permanents: exact kernels and the head/tail split.

Exact kernels are capped at n <= 16 (Ryser enumerates 2^n column subsets).
All values are computed in the linear domain; entries here are
probabilities, so products of up to 16 of them cannot overflow and
underflow is acceptable (results are compared relatively).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import permutations

import numpy as np

from .errors import DimensionTooLarge

BRUTEFORCE_MAX_N = 10
RYSER_MAX_N = 16


def _as_square(m) -> np.ndarray:
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"square matrix required, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix entries must be finite")
    return a


def permanent_bruteforce(m) -> float:
    """Sum over all n! permutations; the reference every kernel is checked against.

    Permutations are consumed in chunks so the row-gather product runs
    vectorized without materializing all n! index tuples at once.
    """
    a = _as_square(m)
    n = a.shape[0]
    if n > BRUTEFORCE_MAX_N:
        raise DimensionTooLarge(f"brute force capped at n={BRUTEFORCE_MAX_N}")
    rows = np.arange(n)
    total = 0.0
    chunk: list[tuple[int, ...]] = []
    for p in permutations(range(n)):
        chunk.append(p)
        if len(chunk) == 40320:
            total += a[rows, np.array(chunk)].prod(axis=1).sum()
            chunk.clear()
    if chunk:
        total += a[rows, np.array(chunk)].prod(axis=1).sum()
    return float(total)


def permanent_ryser(m) -> float:
    """Ryser inclusion-exclusion with Gray-code column-sum updates, O(2^n * n)."""
    a = _as_square(m)
    n = a.shape[0]
    if n > RYSER_MAX_N:
        raise DimensionTooLarge(f"Ryser kernel capped at n={RYSER_MAX_N}")
    col_sums = np.zeros(n)
    total = 0.0
    gray = 0
    size = 0
    for k in range(1, 1 << n):
        bit = (k & -k).bit_length() - 1  # column toggled between consecutive Gray codes
        gray ^= 1 << bit
        if gray >> bit & 1:
            col_sums += a[:, bit]
            size += 1
        else:
            col_sums -= a[:, bit]
            size -= 1
        sign = -1.0 if (n - size) & 1 else 1.0
        total += sign * col_sums.prod()
    return float(total)


def permanent_uniform_rows(tail_values, n: int | None = None) -> float:
    """Permanent of the matrix whose row i is constant tail_values[i]: n! * prod(t)."""
    t = np.asarray(tail_values, dtype=float)
    if n is None:
        n = t.size
    if t.size != n:
        raise ValueError("need one constant per row")
    if n == 0:
        return 1.0
    return float(math.factorial(n) * t.prod())


def _sparse_rows(a: np.ndarray) -> list[list[tuple[int, float]]]:
    return [[(j, v) for j, v in enumerate(row) if v != 0.0] for row in a]


def _permanent_sparse_rows(rows: list[list[tuple[int, float]]], used0: int = 0) -> float:
    """Row expansion with used-column masking, zero pruning, and state memoization."""
    order = sorted(rows, key=len)  # fewest options first
    m = len(order)
    memo: dict[tuple[int, int], float] = {}

    def rec(r: int, used: int) -> float:
        if r == m:
            return 1.0
        key = (r, used)
        hit = memo.get(key)
        if hit is not None:
            return hit
        total = 0.0
        for c, v in order[r]:
            if not used >> c & 1:
                total += v * rec(r + 1, used | 1 << c)
        memo[key] = total
        return total

    return rec(0, used0)


def permanent_sparse(m) -> float:
    """Exact permanent exploiting row sparsity; cheap when rows have few nonzeros."""
    a = _as_square(m)
    return float(_permanent_sparse_rows(_sparse_rows(a)))


# -- batched minors ----------------------------------------------------

_SUBSET_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _subsets(nm: int) -> tuple[np.ndarray, np.ndarray]:
    """Incidence matrix of the non-empty subsets of nm columns and Ryser signs."""
    cached = _SUBSET_CACHE.get(nm)
    if cached is not None:
        return cached
    count = (1 << nm) - 1
    ks = np.arange(1, count + 1, dtype=np.uint32)
    incidence = ((ks[:, None] >> np.arange(nm, dtype=np.uint32)) & 1).astype(float)
    sizes = incidence.sum(axis=1)
    signs = np.where((nm - sizes) % 2 == 0, 1.0, -1.0)
    _SUBSET_CACHE[nm] = (incidence, signs)
    return incidence, signs


def minor_permanents_ryser(m) -> np.ndarray:
    """Permanents of every (i,j) minor via batched Ryser, shape (n,n).

    One column-subset sweep per removed column j covers all removed rows i
    at once through prefix/suffix products over rows. Inclusion-exclusion
    cancels heavily when the true minors are many orders below the entry
    scale; prefer :func:`minor_permanents` for probability matrices.
    """
    a = _as_square(m)
    n = a.shape[0]
    if n < 2:
        raise ValueError("minors need n >= 2")
    if n - 1 > RYSER_MAX_N:
        raise DimensionTooLarge(f"Ryser kernel capped at n={RYSER_MAX_N}")
    incidence, signs = _subsets(n - 1)
    out = np.empty((n, n))
    cols = np.arange(n)
    for j in range(n):
        kept = cols[cols != j]
        row_sums = a[:, kept] @ incidence.T  # (n, subsets)
        pref = np.ones((n + 1, row_sums.shape[1]))
        np.cumprod(row_sums, axis=0, out=pref[1:])
        suf = np.ones_like(pref)
        suf[:-1] = np.cumprod(row_sums[::-1], axis=0)[::-1]
        out[:, j] = (pref[:-1] * suf[1:]) @ signs
    return out


_MASK_CACHE: dict[int, list[tuple[np.ndarray, np.ndarray]]] = {}


def _column_masks(n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    cached = _MASK_CACHE.get(n)
    if cached is not None:
        return cached
    all_masks = np.arange(1 << n)
    pairs = []
    for c in range(n):
        without = all_masks[(all_masks >> c) & 1 == 0]
        pairs.append((without, without | (1 << c)))
    _MASK_CACHE[n] = pairs
    return pairs


def minor_permanents(m) -> np.ndarray:
    """Permanents of every (i,j) minor by subset-sum dynamic programming.

    For each removed row i, a forward pass over the remaining rows builds
    g[S] = permanent of those rows restricted to column set S; dropping
    column j then reads off g at the complement mask. Only non-negative
    products are added, so (unlike inclusion-exclusion) tiny permanents of
    near-degenerate probability matrices keep full relative accuracy.
    """
    a = _as_square(m)
    n = a.shape[0]
    if n < 2:
        raise ValueError("minors need n >= 2")
    if n > 20:
        raise DimensionTooLarge("subset DP capped at n=20")
    masks = _column_masks(n)
    full = (1 << n) - 1
    out = np.empty((n, n))
    rows = list(range(n))
    for i in range(n):
        g = np.zeros(1 << n)
        g[0] = 1.0
        for r in rows[:i] + rows[i + 1 :]:
            g2 = np.zeros_like(g)
            for c in range(n):
                without, with_c = masks[c]
                g2[with_c] += g[without] * a[r, c]
            g = g2
        for j in range(n):
            out[i, j] = g[full ^ (1 << j)]
    return out


# -- head/tail split ---------------------------------------------------


@dataclass(frozen=True)
class HeadTailSplit:
    """Decomposition M' = H + T of a row-stochastic matrix.

    ``head`` keeps the h largest entries per row, reduced by that row's
    uniform tail constant; ``tail_values`` holds the per-row constants.
    Row sums of the reconstruction match the original matrix.
    """

    head: np.ndarray  # (n, n), at most h nonzeros per row
    tail_values: np.ndarray  # (n,)
    h: int

    @property
    def n(self) -> int:
        return self.tail_values.size

    def reconstruct(self) -> np.ndarray:
        return self.head + self.tail_values[:, None]


def head_tail_split(m, h: int = 3) -> HeadTailSplit:
    """Split each row into its h largest entries plus a uniform remainder.

    Ties in the selection break by (value desc, column asc). Head entries
    are clamped at 0; the h largest entries can never fall strictly below
    the mean of the remaining ones, so the clamp only absorbs rounding.
    """
    a = _as_square(m)
    n = a.shape[0]
    if not 0 < h < n:
        raise ValueError(f"head size must be in (0, {n})")
    head = np.zeros_like(a)
    tails = np.empty(n)
    cols = np.arange(n)
    for i in range(n):
        order = np.lexsort((cols, -a[i]))
        kept, rest = order[:h], order[h:]
        t = a[i, rest].sum() / (n - h)
        tails[i] = t
        head[i, kept] = np.maximum(a[i, kept] - t, 0.0)
    return HeadTailSplit(head=head, tail_values=tails, h=h)


def approx_permanent_minor(split: HeadTailSplit, i: int, j: int, alpha: float) -> float:
    """alpha * perm(H minor) + (1-alpha) * perm(T minor) for the (i,j) minor.

    T's minors stay uniform-row, so their permanent is the closed form over
    the remaining row constants; alpha = 0.5 is the plain (scaled) sum of
    the two permanents, which row normalization makes equivalent to the
    unweighted approximation.
    """
    n = split.n
    if not (0 <= i < n and 0 <= j < n):
        raise IndexError("minor indices out of range")
    ph = 0.0
    if alpha != 0.0:
        rows = _sparse_rows(split.head)
        del rows[i]
        ph = _permanent_sparse_rows(rows, used0=1 << j)
    pt = 0.0
    if alpha != 1.0:
        others = np.delete(split.tail_values, i)
        pt = permanent_uniform_rows(others, n - 1)
    return float(alpha * ph + (1.0 - alpha) * pt)


def minor_permanents_split(split: HeadTailSplit) -> tuple[np.ndarray, np.ndarray]:
    """All head-minor and tail-minor permanents at once: (PH, PT), each (n,n).

    PT rows are constant in j (a uniform-row minor does not depend on which
    column is dropped). Memoized row expansion is shared across j for each
    removed row i.
    """
    n = split.n
    sparse = _sparse_rows(split.head)
    ph = np.empty((n, n))
    for i in range(n):
        rows = sparse[:i] + sparse[i + 1 :]
        order = sorted(rows, key=len)
        m = len(order)
        memo: dict[tuple[int, int], float] = {}

        def rec(r: int, used: int) -> float:
            if r == m:
                return 1.0
            key = (r, used)
            hit = memo.get(key)
            if hit is not None:
                return hit
            total = 0.0
            for c, v in order[r]:
                if not used >> c & 1:
                    total += v * rec(r + 1, used | 1 << c)
            memo[key] = total
            return total

        for j in range(n):
            ph[i, j] = rec(0, 1 << j)

    fact = float(math.factorial(n - 1))
    prods = np.array([np.delete(split.tail_values, i).prod() for i in range(n)])
    pt = np.repeat((fact * prods)[:, None], n, axis=1)
    return ph, pt
