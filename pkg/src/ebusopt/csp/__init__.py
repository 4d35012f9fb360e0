"""Charge scheduling over fixed rotations and the joint toy-scale model."""
from .cliques import bron_kerbosch, enumerate_overlap_cliques
from .models import (ChargeSchedule, CspError, build_cee_model, build_split_model, build_uniform_model,
                     charge_rate, finalize_schedule, solve_cee_milp, solve_clp_csp, solve_split_priority,
                     solve_uniform_priority, uniform_objective, validate_schedule)
from .joint import BruteForceResult, JointModel, SizeGuardError, brute_force_joint, build_joint_milp, decode_joint
from .opportunities import (CAG, CEE, DUAL, GAC, SINGLE, BusCharging, ChargingOpportunity, charge_free,
                            collapse, extract_opportunities)

__all__ = [
    "CAG", "CEE", "DUAL", "GAC", "SINGLE", "BusCharging", "ChargeSchedule", "ChargingOpportunity",
    "CspError", "bron_kerbosch", "build_cee_model", "build_split_model", "build_uniform_model",
    "charge_free", "charge_rate", "collapse", "enumerate_overlap_cliques", "extract_opportunities",
    "finalize_schedule", "solve_cee_milp", "solve_clp_csp", "solve_split_priority", "solve_uniform_priority",
    "uniform_objective", "validate_schedule", "BruteForceResult", "JointModel", "SizeGuardError",
    "brute_force_joint", "build_joint_milp", "decode_joint",
]
