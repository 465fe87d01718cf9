"""Steady-state grid analysis with phase-shifting transformer impedance correction."""

from .ac_powerflow import (
    ConvergenceError,
    PowerFlowError,
    PowerFlowSolution,
    SolveOptions,
    branch_flows,
    pst_angle_loss,
    solve,
)
from .correction import (
    CorrectionEvaluation,
    corrected_impedance,
    iec_correction_factor,
    interpolate_factor,
    per_unit_reactance,
)
from .dc_atc import AtcResult, DcSolution, TransferDefinition, compute_atc, dc_solve, ptdf
from .grid_model import (
    Branch,
    Bus,
    CaseError,
    CorrectionTable,
    Generator,
    Load,
    Network,
    TransformerExt,
    load_case,
    parse_case,
    serialize_case,
    to_per_unit,
    validate,
)
from .network_matrix import assemble_ybus, line_real_power, pst_branch_admittance
from .studies import angle_sweep, contingency_scan, scan_violations

__version__ = "0.1.0"
