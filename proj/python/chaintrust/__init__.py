"""Progressive trust evaluation of collaborator devices."""

from pathlib import Path

from ._chaintrust import (
    EvaluatorFailure,
    FleetParseError,
    Registry,
    RegistryError,
    RulePolicy,
    Task,
    Trace,
    cli,
    ground_truth,
    prompt_hash,
    reevaluate_rule_stage,
    run_replay_chain,
    run_rule_chain,
    validate_fleet,
    verify_trace,
)

DATA_DIR = Path(__file__).resolve().parent / "data"

__all__ = [
    "DATA_DIR",
    "EvaluatorFailure",
    "FleetParseError",
    "Registry",
    "RegistryError",
    "RulePolicy",
    "Task",
    "Trace",
    "cli",
    "ground_truth",
    "prompt_hash",
    "reevaluate_rule_stage",
    "run_replay_chain",
    "run_rule_chain",
    "validate_fleet",
    "verify_trace",
]
