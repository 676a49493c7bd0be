"""sigmatile: invariant tiles, spectral measures and MSE of sigma-delta modulators.

Modules
-------
core      quantization rules, the modulator map and the skew translation
simulate  the recursion, trajectories and the telescoping identities
tiling    grid certification of invariant tiles and the midpoint function
filters   rect / sinc^p averaging filters and their transfer functions
spectral  autocorrelation, pure-point and continuous spectral parts
mse       time-domain and spectral mean square error, decay fits
arith     fractional parts, continued fractions, Diophantine estimates
cli       the ``sigmatile`` command
"""

from .core import Modulator, QuantizerRule, RuleKind, modulator_map, rule_bank, skew_map
from .errors import (
    ConnectivityError,
    DegenerateError,
    DivergenceError,
    LengthError,
    MultiplicityError,
    OrderError,
    QuadratureError,
    RationalError,
    SigmaTileError,
    UnderSampledError,
)
from .simulate import Trajectory, run

__version__ = "0.1.0"

__all__ = [
    "Modulator",
    "QuantizerRule",
    "RuleKind",
    "Trajectory",
    "modulator_map",
    "rule_bank",
    "run",
    "skew_map",
    "ConnectivityError",
    "DegenerateError",
    "DivergenceError",
    "LengthError",
    "MultiplicityError",
    "OrderError",
    "QuadratureError",
    "RationalError",
    "SigmaTileError",
    "UnderSampledError",
]
