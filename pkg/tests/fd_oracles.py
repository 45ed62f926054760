"""Finite-difference oracles for the exponent-measure derivatives.

Two routes, matched to what limits each family's precision:

- The closed-form families get a from-scratch high-precision evaluation
  of V (mpmath, 40 digits) built directly from the defining formulas,
  differentiated by Richardson-extrapolated mixed central differences.
  Double precision cannot resolve mixed differences of order >= 3 at
  sensible step sizes, so extended precision is not optional here.

- The Gaussian-type family has no closed V to re-derive, but its QMC
  evaluation runs on a fixed schedule with a fixed seed, making it a
  smooth function of z; plain double-precision Richardson differences of
  that smooth function converge to the analytic derivative.
"""

import itertools

import mpmath as mp
import numpy as np

from maxstable.models import (
    BrownResnickParams,
    LogisticParams,
    MixtureParams,
    ReichShabyParams,
    exponent_measure,
)

mp.mp.dps = 40


def mp_exponent_measure(model, z):
    """V(z) from the defining sum-of-powers formulas, in extended precision."""
    z = [mp.mpf(v) for v in z]
    if isinstance(model, LogisticParams):
        comps = [(mp.mpf(model.alpha), [mp.mpf(1)] * len(z))]
    elif isinstance(model, MixtureParams):
        comps = [
            (mp.mpf(a), [mp.mpf(w) ** (1 / mp.mpf(a))] * len(z))
            for w, a in zip(model.weights, model.alphas)
            if w > 0
        ]
    elif isinstance(model, ReichShabyParams):
        a = mp.mpf(model.alpha)
        comps = [
            (a, [mp.mpf(model.weights[i, l]) ** (1 / a) for i in range(model.Q)])
            for l in range(model.L)
        ]
    else:
        raise TypeError("mpmath oracle covers the closed-form families only")
    total = mp.mpf(0)
    for alpha, c in comps:
        T = mp.fsum(ci * zi ** (-1 / alpha) for ci, zi in zip(c, z))
        total += T ** alpha
    return total


def _mixed_central(f, z, idx, steps):
    """Mixed central difference of f in the 0-based coordinates idx."""
    total = 0
    for signs in itertools.product((1, -1), repeat=len(idx)):
        zz = list(z)
        for s, i, h in zip(signs, idx, steps):
            zz[i] = zz[i] + s * h
        term = f(zz)
        for s in signs:
            term = term * s
        total += term
    denom = 1
    for h in steps:
        denom = denom * (2 * h)
    return total / denom


def mp_fd_partial(model, z, members, h_rel="1e-3"):
    """Richardson-extrapolated V_S for a closed-form family, as a float."""
    idx = [m - 1 for m in members]
    zmp = [mp.mpf(v) for v in z]
    h = [mp.mpf(h_rel) * zmp[i] for i in idx]
    f = lambda zz: mp_exponent_measure(model, zz)
    coarse = _mixed_central(f, zmp, idx, h)
    fine = _mixed_central(f, zmp, idx, [hi / 2 for hi in h])
    return float((4 * fine - coarse) / 3)


def fd_partial_smooth(model, z, members, h_rel=1e-2, with_gap=False):
    """Richardson central differences of the package's own (smooth) V.

    With ``with_gap=True`` also returns the relative disagreement between
    the two step levels.  A large gap means the difference quotient has
    not converged at these steps (e.g. the derivative is orders of
    magnitude below the function scale, so the stencil measures noise)
    and the returned value is not trustworthy as a reference.
    """
    idx = [m - 1 for m in members]
    z = np.asarray(z, dtype=float)
    f = lambda zz: exponent_measure(model, np.asarray(zz))
    steps = [h_rel * z[i] for i in idx]
    coarse = _mixed_central(f, z, idx, steps)
    fine = _mixed_central(f, z, idx, [h / 2 for h in steps])
    value = (4 * fine - coarse) / 3
    if not with_gap:
        return value
    gap = abs(fine - coarse) / max(abs(value), 1e-300)
    return value, gap


def random_instance(family, rng, max_q=6, max_block=4, br_budget=131_072):
    """One (model, z, subset-members) triple for the derivative suite."""
    q = int(rng.integers(2, max_q + 1))
    size = int(rng.integers(1, min(max_block, q) + 1))
    members = tuple(sorted(rng.choice(np.arange(1, q + 1), size=size, replace=False)))
    z = rng.uniform(0.5, 3.0, size=q)
    if family == "logistic":
        model = LogisticParams(alpha=float(rng.uniform(0.15, 0.95)))
    elif family == "mixture":
        L = int(rng.integers(2, 4))
        w = rng.dirichlet(np.ones(L))
        w = w / w.sum()
        model = MixtureParams(weights=tuple(w),
                              alphas=tuple(rng.uniform(0.2, 0.95, size=L)))
    elif family == "reich_shaby":
        L = int(rng.integers(2, 7))
        model = ReichShabyParams(alpha=float(rng.uniform(0.25, 0.9)),
                                 tau=float(rng.uniform(0.2, 0.8)),
                                 knots=rng.uniform(0, 1, size=(L, 2)),
                                 locations=rng.uniform(0, 1, size=(q, 2)))
    elif family == "brown_resnick":
        model = BrownResnickParams(lam=float(rng.uniform(0.4, 1.2)),
                                   nu=float(rng.uniform(0.6, 1.8)),
                                   locations=rng.uniform(0, 1, size=(q, 2)),
                                   mvn_sample_budget=br_budget)
    else:
        raise ValueError(family)
    return model, z, members
