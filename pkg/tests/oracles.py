"""Independent reference implementations used only by the test suite.

Written before (and kept independent of) the library's tree builder: the
brute-force enumerator scores every candidate split with direct masked sums,
and the derivative oracle evaluates the cross-entropy in high precision so the
finite-difference quotients are limited by truncation, not float64 roundoff.
"""

from __future__ import annotations

import numpy as np
from mpmath import mp, mpf


def fd_grad_hess(logits, true_class, step=1e-5, dps=40):
    """Central finite differences of softmax cross-entropy w.r.t. logits."""
    logits = [float(z) for z in logits]
    c = len(logits)

    def loss(z):
        with mp.workdps(dps):
            exps = [mp.e ** mpf(v) for v in z]
            total = mp.fsum(exps)
            return -mp.log(exps[true_class] / total)

    base = loss(logits)
    g = np.empty(c)
    h = np.empty(c)
    for k in range(c):
        up = list(logits)
        dn = list(logits)
        up[k] += step
        dn[k] -= step
        lu, ld = loss(up), loss(dn)
        g[k] = float((lu - ld) / (2 * mpf(step)))
        h[k] = float((lu - 2 * base + ld) / (mpf(step) ** 2))
    return g, h


def split_gain_direct(gl, hl, gr, hr, l2_lambda, gain_gamma):
    def score(g, h):
        return g * g / (h + l2_lambda)

    return 0.5 * (score(gl, hl) + score(gr, hr) - score(gl + gr, hl + hr)) - gain_gamma


def brute_force_best_split(x, g, h, l2_lambda, gain_gamma):
    """Scan every feature and every midpoint between consecutive distinct values.

    Returns (gain, feature, threshold) or None when no candidate exists.
    Ties resolve to the lowest feature index, then the lowest threshold,
    because enumeration runs in that order and only strict improvement wins.
    """
    best = None
    for j in range(x.shape[1]):
        values = np.unique(x[:, j])
        for a, b in zip(values, values[1:]):
            t = (a + b) / 2.0
            left = x[:, j] < t
            gain = split_gain_direct(
                g[left].sum(), h[left].sum(), g[~left].sum(), h[~left].sum(),
                l2_lambda, gain_gamma,
            )
            if best is None or gain > best[0]:
                best = (gain, j, float(t))
    return best


def brute_force_tree(x, g, h, params, depth=0):
    """Reference exact-greedy regression tree matching the library's contract.

    Gate order: depth limit, then best gain must be strictly positive, then
    both children of the chosen split must carry at least min_hessian_sum.
    """
    from mixens.gbdt import Leaf, Split

    def leaf():
        return Leaf(float(-g.sum() / (h.sum() + params.l2_lambda)))

    if depth >= params.max_depth or x.shape[0] < 2:
        return leaf()
    found = brute_force_best_split(x, g, h, params.l2_lambda, params.gain_gamma)
    if found is None or found[0] <= 0.0:
        return leaf()
    gain, j, t = found
    left = x[:, j] < t
    if (
        h[left].sum() < params.min_hessian_sum
        or h[~left].sum() < params.min_hessian_sum
    ):
        return leaf()
    return Split(
        j,
        t,
        brute_force_tree(x[left], g[left], h[left], params, depth + 1),
        brute_force_tree(x[~left], g[~left], h[~left], params, depth + 1),
    )


def trees_equal(a, b, weight_tol=1e-12):
    """Structural equality: same splits and thresholds, leaf weights within tol."""
    from mixens.gbdt import Leaf, Split

    if isinstance(a, Leaf) and isinstance(b, Leaf):
        return abs(a.weight - b.weight) <= weight_tol
    if isinstance(a, Split) and isinstance(b, Split):
        return (
            a.feature_index == b.feature_index
            and a.threshold == b.threshold
            and trees_equal(a.left, b.left, weight_tol)
            and trees_equal(a.right, b.right, weight_tol)
        )
    return False
