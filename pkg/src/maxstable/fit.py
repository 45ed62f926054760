"""Derivative-free maximum (composite) likelihood fitting.

A self-contained Nelder--Mead simplex maximizer (reflection 1, expansion
2, contraction 1/2, shrink 1/2) runs on unconstrained transformed
coordinates: logit for interval-bounded parameters, log for positive
ones.  Convergence is declared when the simplex collapses to max-norm
diameter below the tolerance around the best vertex, after which
successive best iterates necessarily move by less than the tolerance.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InitializationError, MaxStableError
from .likelihood import CompositeScheme, Dataset, Telemetry, log_likelihood_replicates
from .models import (
    BrownResnickParams,
    LogisticParams,
    MixtureParams,
    ReichShabyParams,
)

MAX_FIT_DIMENSION = 4
DEFAULT_XTOL = 0.01
DEFAULT_MAX_ITERATIONS = 1000
DEFAULT_INITIAL_STEP = 0.1

# bounded parameters stop one part in 1e9 short of their endpoints so the
# logit transform stays finite
_BOUNDARY_GAP = 1e-9


@dataclass
class FitResult:
    theta_hat: np.ndarray
    objective: float
    iterations: int
    evaluations: int
    converged: bool
    wall_time: float
    telemetry: Telemetry | None = None


def _logit(p: float) -> float:
    p = min(max(p, _BOUNDARY_GAP), 1.0 - _BOUNDARY_GAP)
    return math.log(p / (1.0 - p))


def _sigmoid(x: float) -> float:
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def nelder_mead(objective, start, xtol: float = DEFAULT_XTOL,
                max_iterations: int = DEFAULT_MAX_ITERATIONS,
                initial_step: float = DEFAULT_INITIAL_STEP,
                callback=None) -> FitResult:
    """Maximize a black-box objective over 1-4 unconstrained coordinates.

    The initial simplex is the start plus `initial_step` along each axis.
    Non-finite objective values during the search are treated as minus
    infinity (the simplex retreats); a non-finite value at the start
    aborts with an initialization error.
    """
    x0 = np.atleast_1d(np.asarray(start, dtype=float))
    n = len(x0)
    if not 1 <= n <= MAX_FIT_DIMENSION:
        raise DomainError(f"optimizer handles 1..{MAX_FIT_DIMENSION} parameters, got {n}")
    if not np.all(np.isfinite(x0)):
        raise InitializationError(f"start point is not finite: {x0}")

    evaluations = 0

    def f(x):
        nonlocal evaluations
        evaluations += 1
        try:
            val = float(objective(x))
        except MaxStableError:
            return -np.inf
        return val if math.isfinite(val) else -np.inf

    t0 = time.perf_counter()
    simplex = np.vstack([x0] + [x0 + initial_step * np.eye(n)[i] for i in range(n)])
    values = np.array([f(x) for x in simplex])
    if values[0] == -np.inf:
        raise InitializationError("objective is not finite at the start point")

    converged = False
    iterations = 0
    for iterations in range(1, max_iterations + 1):
        order = np.argsort(-values, kind="stable")
        simplex, values = simplex[order], values[order]
        if callback is not None:
            callback(iterations, simplex[0].copy(), values[0])
        diameter = np.max(np.abs(simplex[1:] - simplex[0]))
        if diameter < xtol:
            converged = True
            break

        centroid = simplex[:-1].mean(axis=0)
        reflected = centroid + (centroid - simplex[-1])
        f_r = f(reflected)
        if f_r > values[0]:
            expanded = centroid + 2.0 * (centroid - simplex[-1])
            f_e = f(expanded)
            if f_e > f_r:
                simplex[-1], values[-1] = expanded, f_e
            else:
                simplex[-1], values[-1] = reflected, f_r
        elif f_r > values[-2]:
            simplex[-1], values[-1] = reflected, f_r
        else:
            if f_r > values[-1]:
                contracted = centroid + 0.5 * (reflected - centroid)
            else:
                contracted = centroid + 0.5 * (simplex[-1] - centroid)
            f_c = f(contracted)
            if f_c > max(f_r, values[-1]):
                simplex[-1], values[-1] = contracted, f_c
            else:
                simplex[1:] = simplex[0] + 0.5 * (simplex[1:] - simplex[0])
                values[1:] = [f(x) for x in simplex[1:]]

    order = np.argsort(-values, kind="stable")
    simplex, values = simplex[order], values[order]
    return FitResult(
        theta_hat=simplex[0],
        objective=float(values[0]),
        iterations=iterations,
        evaluations=evaluations,
        converged=converged,
        wall_time=time.perf_counter() - t0,
    )


@dataclass(frozen=True)
class FamilySpec:
    """Which family to fit and the structure held fixed during fitting.

    family: "logistic" (free: alpha), "mixture" (free: one alpha per
    component, weights fixed), "reich_shaby" (free: alpha, tau; knots
    fixed), or "brown_resnick" (free: lam, nu).  Site locations always
    come from the dataset.
    """

    family: str
    weights: tuple = ()
    knots: np.ndarray | None = None
    mvn_sample_budget: int = 16_384
    mvn_accuracy: float = 1e-5

    def __post_init__(self):
        known = ("logistic", "mixture", "reich_shaby", "brown_resnick")
        if self.family not in known:
            raise DomainError(f"unknown family {self.family!r}; choose from {known}")
        if self.family == "mixture" and len(self.weights) == 0:
            raise DomainError("mixture fitting requires fixed component weights")
        if self.family == "reich_shaby" and self.knots is None:
            raise DomainError("kernel-basis fitting requires a knot grid")

    @property
    def n_parameters(self) -> int:
        return {"logistic": 1, "mixture": len(self.weights),
                "reich_shaby": 2, "brown_resnick": 2}[self.family]

    def parameter_names(self) -> tuple:
        return {
            "logistic": ("alpha",),
            "mixture": tuple(f"alpha_{i + 1}" for i in range(len(self.weights))),
            "reich_shaby": ("alpha", "tau"),
            "brown_resnick": ("lam", "nu"),
        }[self.family]

    def to_transformed(self, theta) -> np.ndarray:
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        if len(theta) != self.n_parameters:
            raise DomainError(
                f"{self.family} takes {self.n_parameters} parameters, got {len(theta)}"
            )
        if self.family in ("logistic", "mixture"):
            if np.any(theta <= 0.0) or np.any(theta > 1.0):
                raise DomainError("alpha must lie in (0, 1]")
            return np.array([_logit(a) for a in theta])
        if self.family == "reich_shaby":
            alpha, tau = theta
            if not 0.0 < alpha <= 1.0:
                raise DomainError("alpha must lie in (0, 1]")
            if tau <= 0.0:
                raise DomainError("kernel bandwidth tau must be positive")
            return np.array([_logit(alpha), math.log(tau)])
        lam, nu = theta
        if lam <= 0.0:
            raise DomainError("range parameter lam must be positive")
        if not 0.0 < nu <= 2.0:
            raise DomainError("smoothness nu must lie in (0, 2]")
        return np.array([math.log(lam), _logit(nu / 2.0)])

    def to_natural(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if self.family in ("logistic", "mixture"):
            return np.array([_sigmoid(v) for v in x])
        if self.family == "reich_shaby":
            return np.array([_sigmoid(x[0]), math.exp(x[1])])
        return np.array([math.exp(x[0]), 2.0 * _sigmoid(x[1])])

    def build_model(self, theta, locations):
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        if self.family == "logistic":
            return LogisticParams(alpha=float(theta[0]))
        if self.family == "mixture":
            return MixtureParams(weights=tuple(self.weights),
                                 alphas=tuple(float(a) for a in theta))
        if self.family == "reich_shaby":
            if locations is None:
                raise DomainError("kernel-basis model requires site locations")
            return ReichShabyParams(alpha=float(theta[0]), tau=float(theta[1]),
                                    knots=self.knots, locations=locations)
        if locations is None:
            raise DomainError("variogram model requires site locations")
        return BrownResnickParams(lam=float(theta[0]), nu=float(theta[1]),
                                  locations=locations,
                                  mvn_sample_budget=self.mvn_sample_budget,
                                  mvn_accuracy=self.mvn_accuracy)


def fit_model(data: Dataset, spec: FamilySpec, scheme: CompositeScheme,
              start, xtol: float = DEFAULT_XTOL,
              max_iterations: int = DEFAULT_MAX_ITERATIONS) -> FitResult:
    """Maximize the composite log-likelihood over the family's free parameters.

    `start` is on the natural scale and must satisfy the parameter
    bounds; estimates are returned on the natural scale.  Non-convergence
    is reported through the `converged` flag, never as an exception.
    """
    x_start = spec.to_transformed(start)
    telemetry = Telemetry()
    locations = data.locations

    def objective(x):
        theta = spec.to_natural(x)
        model = spec.build_model(theta, locations)
        return log_likelihood_replicates(model, scheme, data, telemetry=telemetry)

    result = nelder_mead(objective, x_start, xtol=xtol,
                         max_iterations=max_iterations)
    result.theta_hat = spec.to_natural(result.theta_hat)
    result.telemetry = telemetry
    return result
