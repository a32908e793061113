"""peakonlab: a numerical laboratory for Camassa-Holm peakon dynamics.

Submodules
----------
kernels      closed-form kernels, sigmoid/ramp weights, O(N) exponential
             convolution and mollification
field        grid states (u, y), invariants, mollified measure data
multipeakon  exact N-peakon Hamiltonian ODEs and speed prediction
chsolver     SSP-RK3 solver for the nonlocal weak form, flow map
diagnostics  modulation tracking, monotonicity functionals, decay audits
labcli       experiment configs, runs, sweeps and the command line
"""

from .grid import GridFunction, SpatialGrid
from .field import (FieldState, InvariantTriple, init_from_measure,
                    invariants, momentum_density)
from .kernels import (WeightSpec, eval_weight, exp_convolve, mollify,
                      peakon_profile)
from .multipeakon import (PeakonEnsemble, SpeedPrediction, ensemble_field,
                          ensemble_rhs, ensemble_step, predict_speeds)
from .chsolver import SolverConfig, flow_map, simulate, step, transport_check

__all__ = [
    "FieldState", "GridFunction", "InvariantTriple", "PeakonEnsemble",
    "SolverConfig", "SpatialGrid", "SpeedPrediction", "WeightSpec",
    "ensemble_field", "ensemble_rhs", "ensemble_step", "eval_weight",
    "exp_convolve", "flow_map", "init_from_measure", "invariants",
    "mollify", "momentum_density", "peakon_profile", "predict_speeds",
    "simulate", "step", "transport_check",
]

__version__ = "0.1.0"
