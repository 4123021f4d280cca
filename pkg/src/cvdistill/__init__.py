"""Heralded continuous-variable entanglement distillation on a truncated Fock space.

Modules:

* :mod:`cvdistill.fock_engine` -- states, beam splitters, heralding.
* :mod:`cvdistill.state_prep` -- Gaussian inputs, loss, ancilla preparation.
* :mod:`cvdistill.schemes` -- the distillation circuits and the Gaussification map.
* :mod:`cvdistill.analytics` -- closed-form amplitudes, variances, probabilities.
* :mod:`cvdistill.measures` -- covariance, squeezing, entropy, fidelity.
* :mod:`cvdistill.optimize` -- scalar optimization of the figures of merit.
* :mod:`cvdistill.cli` -- command-line front end (``cvdistill``).

Supporting modules: :mod:`cvdistill.figures` (figure data), :mod:`cvdistill.verify`
(circuit-versus-closed-form suites), :mod:`cvdistill.report` (CSV, JSON, SVG output).
"""

__version__ = "0.1.0"

from .fock_engine import (  # noqa: E402
    DensityOperator,
    FockError,
    FockState,
    HeraldedResult,
    HeraldImpossibleError,
    KindMismatchError,
)
from .state_prep import KappaRangeWarning, ProtocolParams  # noqa: E402

__all__ = [
    "__version__",
    "DensityOperator",
    "FockError",
    "FockState",
    "HeraldedResult",
    "HeraldImpossibleError",
    "KindMismatchError",
    "KappaRangeWarning",
    "ProtocolParams",
]
