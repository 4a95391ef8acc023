"""Non-invasive current estimation for power delivery networks.

Build an admittance model of a two-port PDN (from lumped circuits,
Touchstone data, or both), compress it to a pole-residue rational model,
and reconstruct both port current waveforms from two measured port voltage
waveforms.
"""

from .circuits import (
    BranchSet,
    PiNetwork,
    RlcBranch,
    branch_admittance,
    deembed_2x_thru,
    fit_equivalent_circuit,
    pi_y_params,
)
from .estimator import (
    ComparisonReport,
    EstimationResult,
    compare,
    nice_freq_domain,
    nice_time_domain,
)
from .pdn_lab import (
    LabReport,
    LabScenario,
    LoadProfile,
    default_network,
    preset_scenario,
    run_lab,
    simulate_pdn,
)
from .spectra import (
    FrequencyResponse,
    capacitance_at,
    embed_shunt,
    interpolate,
    s_to_y,
    y_to_s,
)
from .state_space import DiscreteModel, StateSpaceModel, discretize, realize, simulate
from .touchstone import TouchstoneOptions, parse_touchstone, write_touchstone
from .vector_fit import (
    FitOptions,
    PassivityReport,
    RationalModel,
    evaluate,
    initial_poles,
    passivity_check,
    passivity_enforce,
    vector_fit,
)
from .waveform import Waveform, read_waveform_csv, resample, write_waveform_csv

__version__ = "0.1.0"
