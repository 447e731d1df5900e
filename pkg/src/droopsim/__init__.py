"""Control-design and time-domain simulation toolkit for droop-controlled
DC/DC converters feeding constant-power loads.

Modules follow the workflow: small-signal plants (plant), transfer-function
analysis (tf), PI loop shaping (tuning), scenario simulation (sim),
step-response identification (ident), and constant-power-load stability
analysis (stability).  The ``droopsim`` CLI ties them together over a flat
key=value scenario format (config) and can render report figures (plots).
"""

from .ident import CharacterizationReport, DroopFit, StepFit, characterize_model
from .plant import (
    DEFAULT_PARAMS,
    ConverterParams,
    OperatingPoint,
    current_to_voltage_tf,
    duty_to_current_tf,
    solve_operating_point,
)
from .sim import (
    Event,
    NetworkSpec,
    Scenario,
    SimTrace,
    run_current_step,
    run_scenario,
)
from .stability import (
    StabilityAssessment,
    assess,
    detect_oscillation,
    equivalent_cpl_impedance,
    max_inductance,
    min_capacitance,
    predict_instability_power,
)
from .tf import (
    FrequencyPoint,
    LoopMargins,
    TransferFunction,
    bode_sweep,
    close_unity_feedback,
    eval_freq,
    make_tf,
    margins,
    series,
)
from .tuning import (
    PiGains,
    TuneReport,
    check_hierarchy,
    simulation_gains,
    tune_pi,
)

__all__ = [
    "CharacterizationReport",
    "ConverterParams",
    "DEFAULT_PARAMS",
    "DroopFit",
    "Event",
    "FrequencyPoint",
    "LoopMargins",
    "NetworkSpec",
    "OperatingPoint",
    "PiGains",
    "Scenario",
    "SimTrace",
    "StabilityAssessment",
    "StepFit",
    "TransferFunction",
    "TuneReport",
    "assess",
    "bode_sweep",
    "characterize_model",
    "check_hierarchy",
    "close_unity_feedback",
    "current_to_voltage_tf",
    "detect_oscillation",
    "duty_to_current_tf",
    "equivalent_cpl_impedance",
    "eval_freq",
    "make_tf",
    "margins",
    "max_inductance",
    "min_capacitance",
    "predict_instability_power",
    "run_current_step",
    "run_scenario",
    "series",
    "simulation_gains",
    "solve_operating_point",
    "tune_pi",
]

__version__ = "0.1.0"
