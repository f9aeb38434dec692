"""Stylus pressure normalization and mismatch evaluation for online signatures."""

from .calib import (
    CalibrationPoint,
    EllipseModel,
    LogSaturationModel,
    NibSpec,
    Poly6Model,
    fit_ellipse,
    fit_log,
    fit_poly6,
    force_to_pressure,
    mass_to_force,
    nib_surface,
    r_squared,
)
from .dataio import Signature, SyntheticConfig, parse_signature, split_sections, synth_database, write_signature
from .evaluation import CostParams, DetCurve, ScoreSet, dcf, det_points, eer, far_frr_sweep, identification_rate, identify, min_dcf
from .scenarios import SCENARIOS, Scenario, ScenarioResult, mismatch_sweep, results_table, run_scenario
from .stylus import INK, PLASTIC, StylusProfile, denormalize, map_pressure, map_signature, normalize, pressure_weight, to_physical
from .vq import Codebook, MultiSectionModel, lbg_train, quantization_distortion, score, train_user_model, weighted_distance

__version__ = "0.1.0"
