"""Fully distributed consensus design and simulation for linear multi-agent
systems on directed leader-follower graphs."""

from .analysis import RunReport, compare_static_adaptive, summarize
from .containment import ContainmentAnalysis, containment_weights, verify_containment
from .design import (
    GainDesign,
    SystemDynamics,
    check_stabilizable,
    gains_from_P,
    solve_care,
    triple_integrator,
    verify_lmi_certificate,
)
from .graph import DirectedGraph, LaplacianPartition, build_laplacian, check_assumption
from .protocols import ProtocolConfig, consensus_error, control_adaptive, control_static, rho
from .scenario import ScenarioFile
from .sim import IntegratorSettings, Scenario, Trajectory, integrate, lyapunov_constants, lyapunov_value
from .spectra import MMatrixAnalysis, analyze_m_matrix, hurwitz

__version__ = "0.1.0"
