"""Exponent measures V(z) and their partial derivatives V_S(z).

Four families are implemented.  Three of them — logistic, logistic
max-mixture, and the kernel-weights model — share one computational core:
each is a sum of components of the form T^alpha with T a weighted sum of
z_i^(-1/alpha), so every partial derivative has a closed chain-rule form.
The Brown--Resnick family goes through multivariate normal CDFs; its
partial derivatives factor into a Gaussian density on the differentiated
block and a conditional normal CDF on the rest.

All derivative values are handled as log(-V_S): every V_S of a valid
exponent measure is nonpositive, and products of many such terms underflow
double precision long before the dimensions of interest are reached.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import log_ndtr, logsumexp, ndtr

from .errors import DomainError, ModelValidityError, ResourceGuardError
from .mvn import MvnProblem, bvn_cdf, mvn_cdf
from .partitions import SubsetId

MAX_Q_CLOSED_FORM = 13
MAX_Q_BROWN_RESNICK = 11

_LOG_2PI = math.log(2.0 * math.pi)
_NEG_HUGE = -1e306  # stand-in for log(0) that survives sums and matmuls


# ---------------------------------------------------------------------------
# parameter types

@dataclass(frozen=True)
class LogisticParams:
    """Symmetric logistic dependence; alpha=1 is independence."""

    alpha: float

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise DomainError(f"alpha must be in (0, 1], got {self.alpha}")


@dataclass(frozen=True, eq=False)
class MixtureParams:
    """Max-mixture of logistic components with fixed weights."""

    weights: tuple
    alphas: tuple

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        a = np.asarray(self.alphas, dtype=float)
        if w.ndim != 1 or w.shape != a.shape or len(w) == 0:
            raise DomainError("weights and alphas must be equal-length vectors")
        if np.any(w < 0.0):
            raise DomainError("mixture weights must be nonnegative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise DomainError(f"mixture weights must sum to 1, got {w.sum()!r}")
        if np.any((a <= 0.0) | (a > 1.0)):
            raise DomainError("every mixture alpha must be in (0, 1]")
        object.__setattr__(self, "weights", tuple(float(x) for x in w))
        object.__setattr__(self, "alphas", tuple(float(x) for x in a))

    @property
    def L(self) -> int:
        return len(self.weights)


def rs_weight_matrix(locations, knots, tau: float) -> np.ndarray:
    """Gaussian-kernel weights w_l(x), one row per location, rows sum to 1.

    Normalization happens in the log domain, but a location where even the
    nearest knot's kernel underflows double precision is rejected: the
    weights there would be numerically meaningless.
    """
    X = np.atleast_2d(np.asarray(locations, dtype=float))
    V = np.atleast_2d(np.asarray(knots, dtype=float))
    if tau <= 0.0:
        raise DomainError(f"tau must be positive, got {tau}")
    if len(X) == 0 or len(V) == 0:
        raise DomainError("locations and knots must be non-empty")
    d2 = ((X[:, None, :] - V[None, :, :]) ** 2).sum(axis=2)
    logk = -d2 / (2.0 * tau * tau) - math.log(2.0 * math.pi * tau * tau)
    peak = logk.max(axis=1)
    if np.any(peak < -745.0 - math.log(2.0 * math.pi * tau * tau)):
        raise DomainError(
            "all kernels underflow at some location; increase tau or move knots"
        )
    return np.exp(logk - logsumexp(logk, axis=1, keepdims=True))


@dataclass(frozen=True, eq=False)
class ReichShabyParams:
    """Kernel-weights model: Gaussian-kernel knots, common noise alpha.

    Knots are fixed inputs, never estimated; the weight matrix is derived
    once at construction.
    """

    alpha: float
    tau: float
    knots: np.ndarray
    locations: np.ndarray
    weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise DomainError(f"alpha must be in (0, 1], got {self.alpha}")
        if self.tau <= 0.0:
            raise DomainError(f"tau must be positive, got {self.tau}")
        knots = np.atleast_2d(np.asarray(self.knots, dtype=float))
        locs = np.atleast_2d(np.asarray(self.locations, dtype=float))
        knots.setflags(write=False)
        locs.setflags(write=False)
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "locations", locs)
        W = rs_weight_matrix(locs, knots, self.tau)
        W.setflags(write=False)
        object.__setattr__(self, "weights", W)

    @property
    def Q(self) -> int:
        return len(self.locations)

    @property
    def L(self) -> int:
        return len(self.knots)


def variogram(lam: float, nu: float, h) -> np.ndarray:
    """Power-law semi-variogram gamma(h) = (|h| / lam)^nu with gamma(0)=0."""
    h = np.asarray(h, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(h == 0.0, 0.0, (h / lam) ** nu)


@dataclass(frozen=True, eq=False)
class BrownResnickParams:
    """Max-stable process of Gaussian type with power-law variogram.

    ``mvn_*`` control the normal-CDF evaluations its measure needs.  The
    randomization seed is derived once from (lam, nu, locations) and every
    evaluation runs on a fixed QMC schedule, so the measure is a smooth
    deterministic function of z across optimizer iterations and
    finite-difference stencils (common random numbers); adaptive per-call
    accuracy targeting would break that smoothness.
    """

    lam: float
    nu: float
    locations: np.ndarray
    mvn_accuracy: float = 1e-5
    mvn_sample_budget: int = 16_384
    mvn_seed: int | None = None

    def __post_init__(self):
        if self.lam <= 0.0:
            raise DomainError(f"lam must be positive, got {self.lam}")
        if not 0.0 < self.nu <= 2.0:
            raise DomainError(f"nu must be in (0, 2], got {self.nu}")
        locs = np.atleast_2d(np.asarray(self.locations, dtype=float))
        locs.setflags(write=False)
        object.__setattr__(self, "locations", locs)
        D = np.sqrt(((locs[:, None, :] - locs[None, :, :]) ** 2).sum(axis=2))
        if np.any(D[~np.eye(len(locs), dtype=bool)] == 0.0):
            raise DomainError("duplicate locations are not allowed")
        G = variogram(self.lam, self.nu, D)
        G.setflags(write=False)
        object.__setattr__(self, "_gamma", G)
        if self.mvn_seed is None:
            h = hashlib.blake2b(digest_size=8)
            h.update(np.float64(self.lam).tobytes())
            h.update(np.float64(self.nu).tobytes())
            h.update(np.ascontiguousarray(locs).tobytes())
            object.__setattr__(self, "mvn_seed", int.from_bytes(h.digest(), "little"))

    @property
    def Q(self) -> int:
        return len(self.locations)

    @property
    def gamma_matrix(self) -> np.ndarray:
        return self._gamma


# ---------------------------------------------------------------------------
# derivative vector

@dataclass
class DerivativeVector:
    """All 2^q - 1 partial derivatives V_S, addressed by subset rank.

    Stored as log(-V_S); the ``values`` view reconstitutes the signed
    numbers.  A valid exponent measure has V_S <= 0 for every non-empty S
    (each -V_S is a factor of a probability density), which is the sign
    check ``from_values`` enforces.
    """

    q: int
    log_neg: np.ndarray

    def __post_init__(self):
        expected = (1 << self.q) - 1
        if self.log_neg.shape != (expected,):
            raise DomainError(
                f"derivative vector for q={self.q} needs {expected} entries"
            )
        if np.any(np.isnan(self.log_neg)):
            raise ModelValidityError("derivative vector contains NaN")

    @property
    def values(self) -> np.ndarray:
        return -np.exp(self.log_neg)

    def value(self, S: SubsetId) -> float:
        return -math.exp(self.log_neg[S.rank - 1])

    def __len__(self) -> int:
        return len(self.log_neg)

    @classmethod
    def from_values(cls, q: int, values) -> "DerivativeVector":
        v = np.asarray(values, dtype=float)
        if np.any(np.isnan(v)):
            raise ModelValidityError("derivative vector contains NaN")
        scale = np.max(np.abs(v), initial=0.0)
        if np.any(v > 1e-12 * max(scale, 1.0)):
            bad = int(np.argmax(v))
            raise ModelValidityError(
                f"V_S must be <= 0 for every subset; entry for rank {bad + 1} "
                f"is {v[bad]!r}"
            )
        with np.errstate(divide="ignore"):
            return cls(q=q, log_neg=np.log(np.maximum(-v, 0.0)))


# ---------------------------------------------------------------------------
# shared closed-form core (logistic, mixture, kernel-weights)

def _components(model, q: int):
    """Per-component (alpha_l, log c_l) with V = sum_l (sum_i c_li z_i^(-1/a_l))^a_l."""
    if isinstance(model, LogisticParams):
        return np.array([model.alpha]), np.zeros((1, q))
    if isinstance(model, MixtureParams):
        w = np.asarray(model.weights)
        a = np.asarray(model.alphas)
        keep = w > 0.0
        w, a = w[keep], a[keep]
        logc = (np.log(w) / a)[:, None] * np.ones((1, q))
        return a, logc
    if isinstance(model, ReichShabyParams):
        if q != model.Q:
            raise DomainError(f"z has length {q} but the model has {model.Q} locations")
        with np.errstate(divide="ignore"):
            logc = np.log(model.weights.T) / model.alpha
        logc = np.maximum(logc, _NEG_HUGE)
        return np.full(model.L, model.alpha), logc
    raise TypeError(f"not a closed-form family: {type(model).__name__}")


def _check_z(Z: np.ndarray) -> np.ndarray:
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    if np.any(~np.isfinite(Z)) or np.any(Z <= 0.0):
        raise DomainError("z must be strictly positive and finite")
    return Z


@lru_cache(maxsize=16)
def _subset_tables(q: int):
    """Incidence matrix (q, 2^q-1) and per-rank block sizes."""
    ranks = np.arange(1, 1 << q)
    B = ((ranks[None, :] >> np.arange(q)[:, None]) & 1).astype(float)
    k = np.bitwise_count(ranks).astype(np.int64)
    return B, k


def _log_t_sums(alphas, logc, x):
    """log T_l for every component and replicate; (L, m)."""
    # log of sum_i exp(logc[l, i] - x[:, i] / alpha_l)
    terms = logc[:, None, :] - x[None, :, :] / alphas[:, None, None]
    return logsumexp(terms, axis=2)


def _closed_form_exponent_batch(model, Z) -> np.ndarray:
    Z = _check_z(Z)
    m, q = Z.shape
    x = np.log(Z)
    alphas, logc = _components(model, q)
    logT = _log_t_sums(alphas, logc, x)
    return np.exp(logsumexp(alphas[:, None] * logT, axis=0))


def _log_deriv_coeffs(alpha: float, q: int) -> np.ndarray:
    """log of alpha^(1-k) * prod_{j=1}^{k-1} (j - alpha), index k = 1..q."""
    out = np.empty(q + 1)
    out[0] = np.nan
    with np.errstate(divide="ignore"):
        steps = np.log(np.arange(1, q) - alpha)
    out[1] = -0.0
    for k in range(2, q + 1):
        out[k] = (1 - k) * math.log(alpha) + steps[: k - 1].sum()
    return out


def _closed_form_log_neg_partials_batch(model, Z) -> np.ndarray:
    """log(-V_S) for every subset rank; shape (m, 2^q - 1)."""
    Z = _check_z(Z)
    m, q = Z.shape
    x = np.log(Z)
    alphas, logc = _components(model, q)
    B, kvec = _subset_tables(q)
    logT = _log_t_sums(alphas, logc, x)
    acc = None
    for l, alpha in enumerate(alphas):
        coeff = _log_deriv_coeffs(alpha, q)[kvec]
        site = np.maximum(logc[l][None, :] - (1.0 + 1.0 / alpha) * x, _NEG_HUGE)
        term = coeff[None, :] + (alpha - kvec)[None, :] * logT[l][:, None] + site @ B
        acc = term if acc is None else np.logaddexp(acc, term)
    return acc


def _closed_form_log_neg_partial(model, z, S: SubsetId) -> float:
    """Single-subset log(-V_S) without building the full rank table."""
    z = _check_z(z)[0]
    q = len(z)
    x = np.log(z)
    alphas, logc = _components(model, q)
    logT = _log_t_sums(alphas, logc, x[None, :])[:, 0]
    idx = np.array(S.members) - 1
    k = len(idx)
    pieces = np.empty(len(alphas))
    for l, alpha in enumerate(alphas):
        coeff = _log_deriv_coeffs(alpha, q)[k]
        site = np.maximum(logc[l][idx] - (1.0 + 1.0 / alpha) * x[idx], _NEG_HUGE)
        pieces[l] = coeff + (alpha - k) * logT[l] + site.sum()
    return float(logsumexp(pieces))


# ---------------------------------------------------------------------------
# Brown--Resnick

class _BrGeometry:
    """Per-(params, q) Gaussian geometry, built once and reused across z.

    For anchor a the increment covariance is S_ij = g_ai + g_aj - g_ij
    (i, j != a).  A subset's derivative needs the Cholesky factor of its
    own block, the regression of the complement on it, and the conditional
    correlation; all of that is z-independent.
    """

    def __init__(self, params: BrownResnickParams):
        self.params = params
        self.gamma = params.gamma_matrix
        self.Q = params.Q
        self._anchor = {}
        self._subset = {}

    def anchor(self, a: int):
        """(others, scale, corr) standardizing the full anchored covariance."""
        got = self._anchor.get(a)
        if got is None:
            idx = np.array([i for i in range(self.Q) if i != a])
            S = self._sigma(a, idx)
            d = np.sqrt(np.diag(S))
            corr = S / np.outer(d, d)
            np.fill_diagonal(corr, 1.0)
            got = (idx, d, corr)
            self._anchor[a] = got
        return got

    def _sigma(self, a: int, idx: np.ndarray) -> np.ndarray:
        g = self.gamma
        return g[a, idx][:, None] + g[a, idx][None, :] - g[np.ix_(idx, idx)]

    def subset(self, rank: int):
        got = self._subset.get(rank)
        if got is None:
            members = [i - 1 for i in SubsetId.from_rank(rank).members]
            a = members[0]
            Sp = np.array(members[1:], dtype=int)
            C = np.array([i for i in range(self.Q) if i != a and i not in members],
                         dtype=int)
            if len(Sp):
                SS = self._sigma(a, Sp)
                try:
                    L = np.linalg.cholesky(SS)
                except np.linalg.LinAlgError:
                    raise DomainError(
                        "degenerate increment covariance (near-duplicate sites "
                        "or nu at its upper limit)"
                    ) from None
                logdet = 2.0 * np.log(np.diag(L)).sum()
            else:
                L = np.zeros((0, 0))
                logdet = 0.0
            if len(C):
                SC = self._sigma(a, C)
                if len(Sp):
                    cross = (self.gamma[a, C][:, None] + self.gamma[a, Sp][None, :]
                             - self.gamma[np.ix_(C, Sp)])
                    A = np.linalg.solve(SS, cross.T).T
                    Sc = SC - A @ cross.T
                else:
                    A = np.zeros((len(C), 0))
                    Sc = SC
                d = np.sqrt(np.maximum(np.diag(Sc), 1e-300))
                corr = Sc / np.outer(d, d)
                np.fill_diagonal(corr, 1.0)
            else:
                A = np.zeros((0, 0))
                d = np.zeros(0)
                corr = np.zeros((0, 0))
            got = (a, Sp, C, L, logdet, A, d, corr)
            self._subset[rank] = got
        return got


@lru_cache(maxsize=64)
def _br_geometry_cached(params: BrownResnickParams) -> _BrGeometry:
    return _BrGeometry(params)


def _log_mvn_cdf_rows(upper: np.ndarray, corr: np.ndarray,
                      params: BrownResnickParams) -> np.ndarray:
    """log Phi_k(upper_row; corr) for each row; exact through k = 2."""
    m, k = upper.shape
    if k == 0:
        return np.zeros(m)
    if k == 1:
        return log_ndtr(upper[:, 0])
    with np.errstate(divide="ignore"):
        if k == 2:
            return np.log(bvn_cdf(upper[:, 0], upper[:, 1], corr[0, 1]))
        out = np.empty(m)
        for i in range(m):
            p, _ = mvn_cdf(MvnProblem(upper[i], corr,
                                      accuracy=params.mvn_accuracy,
                                      sample_budget=params.mvn_sample_budget,
                                      seed=params.mvn_seed,
                                      fixed_schedule=True))
            out[i] = np.log(p) if p > 0.0 else -np.inf
    return out


def _br_check(params: BrownResnickParams, Z: np.ndarray) -> np.ndarray:
    Z = _check_z(Z)
    if Z.shape[1] != params.Q:
        raise DomainError(
            f"z has length {Z.shape[1]} but the model has {params.Q} locations"
        )
    return Z


def _br_exponent_batch(params: BrownResnickParams, Z) -> np.ndarray:
    Z = _br_check(params, Z)
    m, Q = Z.shape
    x = np.log(Z)
    geom = _br_geometry_cached(params)
    if Q == 1:
        return 1.0 / Z[:, 0]
    total = np.zeros(m)
    for a in range(Q):
        idx, d, corr = geom.anchor(a)
        u = x[:, idx] - x[:, a][:, None] + geom.gamma[a, idx][None, :]
        logphi = _log_mvn_cdf_rows(u / d[None, :], corr, params)
        total += np.exp(logphi - x[:, a])
    return total


def _br_log_neg_partial_rows(params: BrownResnickParams, x: np.ndarray,
                             rank: int, anchor: int | None = None) -> np.ndarray:
    """log(-V_S) for subset `rank` at each replicate row of x = log z."""
    geom = _br_geometry_cached(params)
    if anchor is None:
        a, Sp, C, L, logdet, A, d, corr = geom.subset(rank)
    else:
        a, Sp, C, L, logdet, A, d, corr = _anchored_subset(geom, rank, anchor)
    out = -2.0 * x[:, a] - x[:, Sp].sum(axis=1)
    if len(Sp):
        u = x[:, Sp] - x[:, a][:, None] + geom.gamma[a, Sp][None, :]
        w = solve_triangular(L, u.T, lower=True)
        quad = (w * w).sum(axis=0)
        out += -0.5 * (len(Sp) * _LOG_2PI + logdet + quad)
    else:
        u = np.zeros((x.shape[0], 0))
    if len(C):
        uC = x[:, C] - x[:, a][:, None] + geom.gamma[a, C][None, :]
        mean = u @ A.T
        out += _log_mvn_cdf_rows((uC - mean) / d[None, :], corr, params)
    return out


def _anchored_subset(geom: _BrGeometry, rank: int, anchor: int):
    """Subset geometry with an explicit anchor choice (testing hook)."""
    members = [i - 1 for i in SubsetId.from_rank(rank).members]
    if anchor not in members:
        raise DomainError("anchor must belong to the subset")
    Sp = np.array([i for i in members if i != anchor], dtype=int)
    C = np.array([i for i in range(geom.Q) if i not in members], dtype=int)
    g = geom.gamma
    a = anchor
    if len(Sp):
        SS = g[a, Sp][:, None] + g[a, Sp][None, :] - g[np.ix_(Sp, Sp)]
        L = np.linalg.cholesky(SS)
        logdet = 2.0 * np.log(np.diag(L)).sum()
    else:
        SS = np.zeros((0, 0))
        L = SS
        logdet = 0.0
    if len(C):
        SC = g[a, C][:, None] + g[a, C][None, :] - g[np.ix_(C, C)]
        if len(Sp):
            cross = g[a, C][:, None] + g[a, Sp][None, :] - g[np.ix_(C, Sp)]
            A = np.linalg.solve(SS, cross.T).T
            Sc = SC - A @ cross.T
        else:
            A = np.zeros((len(C), 0))
            Sc = SC
        d = np.sqrt(np.maximum(np.diag(Sc), 1e-300))
        corr = Sc / np.outer(d, d)
        np.fill_diagonal(corr, 1.0)
    else:
        A = np.zeros((0, 0))
        d = np.zeros(0)
        corr = np.zeros((0, 0))
    return a, Sp, C, L, logdet, A, d, corr


def _br_log_neg_partials_batch(params: BrownResnickParams, Z) -> np.ndarray:
    Z = _br_check(params, Z)
    m, Q = Z.shape
    x = np.log(Z)
    out = np.empty((m, (1 << Q) - 1))
    for rank in range(1, 1 << Q):
        out[:, rank - 1] = _br_log_neg_partial_rows(params, x, rank)
    return out


def br_eta_R(params: BrownResnickParams, q: int, z):
    """Standardized anchored quantities (eta_q, R_q) for anchor index q (1-based).

    V(z) = sum_q Phi_{Q-1}(eta_q; 0, R_q) / z_q reproduces the exponent
    measure; eta_j = a_qj/2 + log(z_j/z_q)/a_qj with a_qj = sqrt(2 gamma_qj).
    """
    z = _check_z(z)[0]
    Q = params.Q
    if len(z) != Q:
        raise DomainError(f"z has length {len(z)} but the model has {Q} locations")
    if not 1 <= q <= Q:
        raise DomainError(f"anchor index must be in 1..{Q}, got {q}")
    geom = _br_geometry_cached(params)
    idx, d, corr = geom.anchor(q - 1)
    a = d  # d = sqrt(2 gamma(q, j)) by construction
    eta = a / 2.0 + np.log(z[idx] / z[q - 1]) / a
    return eta, corr


# ---------------------------------------------------------------------------
# public dispatch

_CLOSED_FORM = (LogisticParams, MixtureParams, ReichShabyParams)


def _guard_dimension(model, q: int) -> None:
    cap = MAX_Q_BROWN_RESNICK if isinstance(model, BrownResnickParams) else MAX_Q_CLOSED_FORM
    if q > cap:
        raise ResourceGuardError(
            f"all_partials for {type(model).__name__} is capped at q <= {cap}, "
            f"got q={q}"
        )


def exponent_measure_batch(model, Z) -> np.ndarray:
    """V(z) for each row of Z; shape (m,)."""
    if isinstance(model, _CLOSED_FORM):
        return _closed_form_exponent_batch(model, Z)
    if isinstance(model, BrownResnickParams):
        return _br_exponent_batch(model, Z)
    raise TypeError(f"unknown model type: {type(model).__name__}")


def exponent_measure(model, z) -> float:
    """V(z): the exponent measure, P(Z <= z) = exp(-V(z))."""
    return float(exponent_measure_batch(model, np.atleast_2d(z))[0])


def log_neg_partials_batch(model, Z) -> np.ndarray:
    """log(-V_S) for every non-empty subset rank; shape (m, 2^q - 1)."""
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    _guard_dimension(model, Z.shape[1])
    if isinstance(model, _CLOSED_FORM):
        return _closed_form_log_neg_partials_batch(model, Z)
    if isinstance(model, BrownResnickParams):
        return _br_log_neg_partials_batch(model, Z)
    raise TypeError(f"unknown model type: {type(model).__name__}")


def all_partials(model, z) -> DerivativeVector:
    """Every V_S at once, sharing sub-expressions across subsets."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    _guard_dimension(model, len(z))
    log_neg = log_neg_partials_batch(model, z[None, :])[0]
    return DerivativeVector(q=len(z), log_neg=log_neg)


def exponent_measure_partial(model, z, S: SubsetId) -> float:
    """V_S(z): mixed partial derivative of V for the coordinates in S."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    q = len(z)
    if not S.members or S.members[-1] > q:
        raise DomainError(f"subset {S.members} is not within {{1..{q}}}")
    if isinstance(model, _CLOSED_FORM):
        return -math.exp(_closed_form_log_neg_partial(model, z, S))
    if isinstance(model, BrownResnickParams):
        Z = _br_check(model, z[None, :])
        val = _br_log_neg_partial_rows(model, np.log(Z), S.rank)[0]
        return -math.exp(val)
    raise TypeError(f"unknown model type: {type(model).__name__}")


def restrict_model(model, members: tuple):
    """The same family on the sub-vector of sites given by 1-based `members`.

    Exchangeable families are unchanged; spatial families keep the
    sub-locations (kernel weights depend only on each location, so rows
    restrict cleanly).
    """
    if isinstance(model, (LogisticParams, MixtureParams)):
        return model
    idx = np.array(members, dtype=int) - 1
    if isinstance(model, ReichShabyParams):
        return ReichShabyParams(alpha=model.alpha, tau=model.tau,
                                knots=model.knots,
                                locations=model.locations[idx])
    if isinstance(model, BrownResnickParams):
        return BrownResnickParams(lam=model.lam, nu=model.nu,
                                  locations=model.locations[idx],
                                  mvn_accuracy=model.mvn_accuracy,
                                  mvn_sample_budget=model.mvn_sample_budget,
                                  mvn_seed=model.mvn_seed)
    raise TypeError(f"unknown model type: {type(model).__name__}")
