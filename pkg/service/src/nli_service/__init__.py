"""HTTP sidecar serving three-way NLI classification.

POST /nli scores {"pairs": [{"premise", "hypothesis"}, ...]} and returns
contradiction/neutral/entailment probabilities per pair, in order, each
distribution summing to one. GET /health reports readiness; both
endpoints answer 503 until the checkpoint has loaded. Label order is
mapped from the checkpoint's own id2label config, never positionally.
"""
from .app import ModelHolder, create_app, serve
from .config import (
    ENV_PREFIX,
    ServiceConfig,
    config_from_env,
    config_from_file,
    load_config,
)
from .model import PROTOCOL_LABELS, ModelLoadError, NliModel

__all__ = [
    "ENV_PREFIX",
    "PROTOCOL_LABELS",
    "ModelHolder",
    "ModelLoadError",
    "NliModel",
    "ServiceConfig",
    "config_from_env",
    "config_from_file",
    "create_app",
    "load_config",
    "serve",
]

__version__ = "0.1.0"
