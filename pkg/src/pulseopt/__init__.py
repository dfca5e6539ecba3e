"""Energy-minimal asymmetric coil-current pulse synthesis.

Optimises spline-parametrised coil-current waveforms for minimal ohmic
energy loss subject to an all-or-none neuron-activation constraint and
asymmetric coil voltage limits, and provides the waveform analyses used
to compare the optimised pulses against conventional pulse shapes.
"""

from ._backend import BACKEND
from .objective import CostBreakdown, ObjectiveConfig, cost
from .optimizer import (OptimizationRun, SwarmConfig, local_optimize,
                        run_optimization)
from .waveform import (CoilParams, SampledPulse, SplineWaveform,
                       VoltageLimits, energy_loss, resample_dof, sample)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "CoilParams",
    "CostBreakdown",
    "ObjectiveConfig",
    "OptimizationRun",
    "SampledPulse",
    "SplineWaveform",
    "SwarmConfig",
    "VoltageLimits",
    "cost",
    "energy_loss",
    "local_optimize",
    "resample_dof",
    "run_optimization",
    "sample",
    "__version__",
]
