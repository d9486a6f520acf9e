"""Railway GNSS local-error toolkit.

Turns train-journey GNSS recordings into per-satellite pseudorange residual
series, trains an environment classifier on per-epoch signal features, and
fits robust Gaussian error models that can be sampled to inject realistic
pseudorange errors into a signal simulator.
"""

from railgnss.errors import (
    ConfigError,
    IngestError,
    NoEphemerisError,
    NumericalError,
    RailGnssError,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "IngestError",
    "NoEphemerisError",
    "NumericalError",
    "RailGnssError",
    "__version__",
]
