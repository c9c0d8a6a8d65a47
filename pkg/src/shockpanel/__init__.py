"""Revenue shocks and fiscal responses in municipal panels.

Local linear smoothing of a receipt series, k-standard-error shock
classification, distributed-lag models estimated by post-double-selection
LASSO with two-way fixed effects and cluster-robust inference, and a
synthetic panel generator with planted response regimes.
"""

__version__ = "0.1.0"

from .exceptions import *  # noqa: F401,F403
from .panel import PanelDataset, SeriesView, listwise_complete, load_csv, write_csv
from .smoother import SmootherResult, local_linear_fit, rot_bandwidth, smooth_panel
from .shocks import FlowClass, FlowLabel, classify, classify_panel, descriptives, exclusion_mask
from .regress import DesignMatrix, EstimateTable, lincom, ols_fe, wald_joint
from .lasso import LassoProblem, LassoSolution, fit as lasso_fit, plugin_lambda
from .pds import LambdaRule, PdsPlan, PdsResult, pds_estimate, select_controls
from .dlm import DlmOutput, DlmSpec, build_design, estimate, robustness_suite
from .synth import GroundTruth, SynthConfig, calibration_report, generate

__all__ = [
    "PanelDataset", "SeriesView", "listwise_complete", "load_csv", "write_csv",
    "SmootherResult", "local_linear_fit", "rot_bandwidth", "smooth_panel",
    "FlowClass", "FlowLabel", "classify", "classify_panel", "descriptives", "exclusion_mask",
    "DesignMatrix", "EstimateTable", "lincom", "ols_fe", "wald_joint",
    "LassoProblem", "LassoSolution", "lasso_fit", "plugin_lambda",
    "LambdaRule", "PdsPlan", "PdsResult", "pds_estimate", "select_controls",
    "DlmOutput", "DlmSpec", "build_design", "estimate", "robustness_suite",
    "GroundTruth", "SynthConfig", "calibration_report", "generate",
]
