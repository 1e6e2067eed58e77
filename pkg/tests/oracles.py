"""Independent reference implementations used only to check the package.

Nothing here may share code with the paths under test: the convex solver
re-derives the per-bin optimum by projected gradient descent, and the
constraint-node oracle enumerates permutations explicitly.
"""

from itertools import permutations

import numpy as np

LN2 = np.log(2.0)


def simplex_project(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-based)."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    idx = np.arange(1, v.size + 1)
    rho = np.nonzero(u * idx > (css - 1.0))[0][-1]
    theta = (css[rho] - 1.0) / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def projected_gradient_table(posteriors: np.ndarray, bins: np.ndarray,
                             num_bins: int, iters: int = 100_000,
                             step0: float = 0.5) -> np.ndarray:
    """Minimize (1/N) sum_k D(p_k || Q[bin_k]) over row-stochastic Q.

    Projected gradient descent with diminishing steps on each bin's
    simplex; the guard floor keeps the log-gradient finite when the
    projection lands on a face.
    """
    n, q = posteriors.shape
    groups = [posteriors[bins == z] for z in range(num_bins)]
    table = np.full((num_bins, q), 1.0 / q)
    for t in range(1, iters + 1):
        step = step0 / np.sqrt(t)
        for z, group in enumerate(groups):
            if group.shape[0] == 0:
                continue
            grad = -(group / table[z]).sum(axis=0) / (n * LN2)
            row = simplex_project(table[z] - step * grad)
            row = np.maximum(row, 1e-12)
            table[z] = row / row.sum()
    return table


def empirical_objective(posteriors: np.ndarray, bins: np.ndarray,
                        table: np.ndarray) -> float:
    """The objective above, evaluated directly (bits)."""
    total = 0.0
    for p, b in zip(posteriors, bins):
        sup = p > 0
        total += float(np.sum(p[sup] * np.log2(p[sup] / table[b][sup])))
    return total / posteriors.shape[0]


def constraint_marginals(m: np.ndarray) -> np.ndarray:
    """Extrinsic symbol marginals of one all-different constraint.

    Enumerates every permutation assignment; the weight seen by variable i
    is the product of the OTHER rows' message entries, accumulated onto
    (i, assigned symbol) and row normalized.
    """
    n = m.shape[0]
    out = np.zeros((n, n))
    for perm in permutations(range(n)):
        factors = np.array([m[r, perm[r]] for r in range(n)])
        full = factors.prod()
        for i in range(n):
            others = full / factors[i] if factors[i] != 0 else np.prod(
                [factors[r] for r in range(n) if r != i]
            )
            out[i, perm[i]] += others
    return out / out.sum(axis=1, keepdims=True)


def joint_expected_divergence(pxyz: np.ndarray, q: np.ndarray) -> float:
    """ED(P_{X|Y} || Q_{X|Z}) by direct triple-loop enumeration (bits)."""
    nx, ny, nz = pxyz.shape
    py = pxyz.sum(axis=(0, 2))
    pyz = pxyz.sum(axis=0)
    total = 0.0
    for y in range(ny):
        if py[y] == 0:
            continue
        pxgy = pxyz[:, y, :].sum(axis=1) / py[y]
        for z in range(nz):
            if pyz[y, z] == 0:
                continue
            for x in range(nx):
                if pxgy[x] > 0:
                    total += pyz[y, z] * pxgy[x] * np.log2(pxgy[x] / q[z, x])
    return float(total)
