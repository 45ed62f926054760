"""Exact samplers for the supported max-stable families.

Every sampler is a pure function of an explicit RNG state: the same
`RngSpec` always reproduces the same `Dataset` bit for bit.  The
closed-form families use the scale-mixture construction (a positive
stable frailty shared across sites, times independent GEV noise); the
variogram family uses the extremal-functions algorithm, which is exact
and needs roughly one Gaussian draw per site on average.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .likelihood import Dataset
from .models import BrownResnickParams, MixtureParams, ReichShabyParams

MAX_SIMULATION_SITES = 30

_SUPPORTED_BIT_GENERATORS = {
    "pcg64": np.random.PCG64,
    "philox": np.random.Philox,
}


@dataclass(frozen=True)
class GevParams:
    """Location/scale/shape of a generalized extreme-value law."""

    mu: float = 0.0
    sigma: float = 1.0
    xi: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.sigma) and self.sigma > 0.0):
            raise DomainError(f"GEV scale must be positive, got {self.sigma}")


_GUMBEL_XI = 1e-10


def gev_cdf(params: GevParams, z):
    """P(Z <= z); the shape->0 limit switches to the Gumbel form."""
    z = np.asarray(z, dtype=float)
    s = (z - params.mu) / params.sigma
    if abs(params.xi) < _GUMBEL_XI:
        out = np.exp(-np.exp(-s))
    else:
        t = np.maximum(1.0 + params.xi * s, 0.0)
        with np.errstate(divide="ignore"):
            out = np.where(
                t > 0.0,
                np.exp(-np.power(t, -1.0 / params.xi, where=t > 0.0,
                                 out=np.ones_like(t))),
                1.0 if params.xi < 0.0 else 0.0,
            )
    return out if out.ndim else float(out)


def gev_quantile(params: GevParams, p):
    """Exact inverse of gev_cdf on p in (0, 1)."""
    p = np.asarray(p, dtype=float)
    if np.any(p <= 0.0) or np.any(p >= 1.0):
        raise DomainError("quantile level must lie strictly inside (0, 1)")
    ell = -np.log(p)
    if abs(params.xi) < _GUMBEL_XI:
        out = params.mu - params.sigma * np.log(ell)
    else:
        out = params.mu + params.sigma * (ell ** (-params.xi) - 1.0) / params.xi
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class RngSpec:
    """Deterministic RNG identity: bit generator, 64-bit seed, stream id."""

    seed: int
    stream: int = 0
    algorithm: str = "pcg64"

    def __post_init__(self):
        if self.algorithm not in _SUPPORTED_BIT_GENERATORS:
            raise DomainError(
                f"unknown rng algorithm {self.algorithm!r}; "
                f"choose from {sorted(_SUPPORTED_BIT_GENERATORS)}"
            )
        if not 0 <= int(self.seed) < (1 << 64):
            raise DomainError("seed must fit in 64 bits")

    def generator(self) -> np.random.Generator:
        bitgen = _SUPPORTED_BIT_GENERATORS[self.algorithm]
        return np.random.Generator(
            bitgen(np.random.SeedSequence((int(self.seed), int(self.stream))))
        )

    def substream(self, k: int) -> "RngSpec":
        return RngSpec(seed=self.seed, stream=self.stream + k,
                       algorithm=self.algorithm)


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngSpec):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise DomainError("rng must be an RngSpec or a numpy Generator")


def sample_positive_stable(alpha: float, rng, size=None):
    """Positive stable variates with Laplace transform exp(-s^alpha).

    Chambers-Mallows-Stuck transformation of a uniform angle and an
    exponential; alpha = 1 is the degenerate unit mass.
    """
    if not 0.0 < alpha <= 1.0:
        raise DomainError(f"stable index must be in (0, 1], got {alpha}")
    gen = _as_generator(rng)
    if alpha == 1.0:
        if size is None:
            gen.uniform(0.0, math.pi)
            gen.standard_exponential()
            return 1.0
        gen.uniform(0.0, math.pi, size=size)
        gen.standard_exponential(size=size)
        return np.ones(size)
    U = gen.uniform(0.0, math.pi, size=size)
    W = gen.standard_exponential(size=size)
    A = (np.sin((1.0 - alpha) * U) / W) ** ((1.0 - alpha) / alpha) \
        * np.sin(alpha * U) / np.sin(U) ** (1.0 / alpha)
    return A


def _gev_noise(alpha: float, m: int, Q: int, gen: np.random.Generator) -> np.ndarray:
    """i.i.d. GEV(1, alpha, alpha) noise by inverse transform."""
    p = gen.uniform(size=(m, Q))
    # clip away exact endpoints; probability ~2^-53 per draw
    np.clip(p, 1e-300, np.nextafter(1.0, 0.0), out=p)
    return np.asarray(gev_quantile(GevParams(1.0, alpha, alpha), p))


def sample_logistic(Q: int, alpha: float, m: int, rng) -> Dataset:
    """m replicates of the Q-variate symmetric logistic law.

    Z_q = U_q * A^alpha with A positive stable and U_q i.i.d.
    GEV(1, alpha, alpha); integrating out A yields
    P(Z <= z) = exp{-(sum z_q^(-1/alpha))^alpha}.
    """
    if Q < 1:
        raise DomainError(f"need at least one site, got Q={Q}")
    gen = _as_generator(rng)
    A = sample_positive_stable(alpha, gen, size=(m,))
    U = _gev_noise(alpha, m, Q, gen)
    Z = U * np.asarray(A).reshape(m, 1) ** alpha
    return Dataset(values=Z)


def sample_mixture(Q: int, params: MixtureParams, m: int, rng) -> Dataset:
    """Max-mixture of logistic laws: Z = max_l w_l Z^(l)."""
    if Q < 1:
        raise DomainError(f"need at least one site, got Q={Q}")
    gen = _as_generator(rng)
    Z = np.zeros((m, Q))
    for w, a in zip(params.weights, params.alphas):
        comp = sample_logistic(Q, a, m, gen).values
        np.maximum(Z, w * comp, out=Z)
    return Dataset(values=Z)


def sample_reich_shaby(params: ReichShabyParams, m: int, rng) -> Dataset:
    """Kernel-basis replicates: Z_q = U_q * (sum_l A_l w_l(x_q)^(1/alpha))^alpha.

    One positive stable variate per kernel, shared across sites, exactly
    reproduces the finite-L exponent measure.
    """
    gen = _as_generator(rng)
    alpha = params.alpha
    W_pow = params.weights ** (1.0 / alpha)  # (Q, L)
    A = sample_positive_stable(alpha, gen, size=(m, params.L))
    A = np.atleast_2d(np.asarray(A, dtype=float)).reshape(m, params.L)
    theta = (A @ W_pow.T) ** alpha  # (m, Q)
    U = _gev_noise(alpha, m, params.Q, gen)
    return Dataset(values=U * theta, locations=np.asarray(params.locations))


def _br_anchor_factors(params: BrownResnickParams):
    """Per-anchor mean and covariance factor of the log extremal function.

    Anchored at site k, the log field at the other sites is Gaussian with
    mean -Gamma[., k] and covariance Gamma_ik + Gamma_jk - Gamma_ij; the
    factor comes from an eigendecomposition so that degenerate (e.g.
    smooth nu = 2) covariances still simulate exactly.
    """
    G = params.gamma_matrix
    Q = G.shape[0]
    factors = []
    for k in range(Q):
        idx = np.array([i for i in range(Q) if i != k])
        if len(idx) == 0:
            factors.append((idx, np.empty(0), np.empty((0, 0))))
            continue
        mean = -G[idx, k]
        cov = G[idx, k][:, None] + G[idx, k][None, :] - G[np.ix_(idx, idx)]
        vals, vecs = np.linalg.eigh(cov)
        if vals.min() < -1e-8 * max(vals.max(), 1.0):
            raise DomainError("variogram covariance is not positive semidefinite")
        vals = np.clip(vals, 0.0, None)
        keep = vals > 0.0
        factors.append((idx, mean, vecs[:, keep] * np.sqrt(vals[keep])))
    return factors


def sample_brown_resnick(params: BrownResnickParams, m: int, rng) -> Dataset:
    """Exact replicates of the variogram-process law at the model's sites.

    Extremal-functions algorithm: sweep the sites in order, and at site k
    walk the Poisson points 1/zeta downward, drawing the log-Gaussian
    extremal function anchored at k; a draw contributes only if it does
    not modify the maximum at any earlier site.
    """
    Q = params.Q
    if Q > MAX_SIMULATION_SITES:
        raise DomainError(
            f"dense Gaussian simulation supports at most "
            f"{MAX_SIMULATION_SITES} sites, got {Q}"
        )
    gen = _as_generator(rng)
    factors = _br_anchor_factors(params)
    Z = np.empty((m, Q))
    for r in range(m):
        z = np.zeros(Q)
        for k in range(Q):
            idx, mean, factor = factors[k]
            zeta = gen.standard_exponential()
            while 1.0 / zeta > z[k]:
                y = np.empty(Q)
                y[k] = 1.0
                if len(idx):
                    eps = factor @ gen.standard_normal(factor.shape[1])
                    y[idx] = np.exp(mean + eps)
                if np.all(y[:k] / zeta < z[:k]):
                    np.maximum(z, y / zeta, out=z)
                zeta += gen.standard_exponential()
        Z[r] = z
    return Dataset(values=Z, locations=np.asarray(params.locations))
