"""Full and composite likelihood inference for max-stable distributions.

Subpackages by responsibility:

- :mod:`maxstable.partitions` — set-partition enumeration and the packed table
- :mod:`maxstable.mvn` — multivariate normal CDF (quasi-Monte Carlo)
- :mod:`maxstable.models` — exponent measures and their partial derivatives
- :mod:`maxstable.likelihood` — full / composite log-likelihoods
- :mod:`maxstable.simulate` — exact samplers for each model family
- :mod:`maxstable.fit` — Nelder--Mead maximum (composite) likelihood
- :mod:`maxstable.study` — Monte Carlo efficiency and truncation studies
- :mod:`maxstable.cli` — command-line entry points
"""

from .errors import (
    ConfigError,
    DomainError,
    InitializationError,
    MaxStableError,
    ModelValidityError,
    ResourceGuardError,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DomainError",
    "InitializationError",
    "MaxStableError",
    "ModelValidityError",
    "ResourceGuardError",
    "__version__",
]
