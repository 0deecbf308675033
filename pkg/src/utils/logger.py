import json
import logging
import os
import threading
import uuid
from datetime import datetime
from enum import Enum

# Chemin du fichier de télémétrie (surchargeable via SIM_LOG_FILE)
LOG_FILE = os.path.join("logs", "experiment_data.json")

_lock = threading.Lock()
_logger = logging.getLogger(__name__)


class ActionType(str, Enum):
    """
    Énumération des événements d'expérience enregistrés.
    """
    SWEEP_POINT = "SWEEP_POINT"  # Un point (L, schéma) d'un balayage sum-rate
    TRAINING = "TRAINING"        # Un entraînement DOA pour un L donné
    BASELINE = "BASELINE"        # Ligne de référence indépendante de L (ZF)
    EMIT = "EMIT"                # Écriture d'un fichier de résultats


_REQUIRED_KEYS = ("experiment", "layers")


def log_file_path() -> str:
    return os.environ.get("SIM_LOG_FILE", LOG_FILE)


def logging_enabled() -> bool:
    return os.environ.get("SIM_EXPERIMENT_LOG", "on").strip().lower() not in ("off", "0", "false", "no")


def log_experiment(component: str, action: ActionType, details: dict, status: str = "SUCCESS") -> None:
    """
    Enregistre un événement d'expérience dans le fichier JSON de télémétrie.

    Args:
        component (str): Composant émetteur (ex: "SumrateSweep", "joint").
        action (ActionType): Le type d'événement (utiliser l'Enum ActionType).
        details (dict): Détails. DOIT contenir 'experiment' et 'layers' sauf pour EMIT.
        status (str): "SUCCESS" ou "FAILURE".

    Raises:
        ValueError: Si l'action est invalide ou si des champs obligatoires manquent.
    """

    # --- 1. VALIDATION DU TYPE D'ACTION ---
    valid_actions = [a.value for a in ActionType]
    if isinstance(action, ActionType):
        action_str = action.value
    elif action in valid_actions:
        action_str = action
    else:
        raise ValueError(f"Invalid action '{action}'. Use ActionType (e.g. ActionType.SWEEP_POINT).")

    if status not in ("SUCCESS", "FAILURE"):
        raise ValueError(f"Invalid status '{status}' (expected SUCCESS or FAILURE)")

    # --- 2. VALIDATION DES DÉTAILS ---
    if action_str != ActionType.EMIT.value:
        missing_keys = [key for key in _REQUIRED_KEYS if key not in details]
        if missing_keys:
            raise ValueError(
                f"Logging error ({component}): details is missing required keys {missing_keys}"
            )

    if not logging_enabled():
        return

    entry = {
        "id": str(uuid.uuid4()),
        "timestamp": datetime.now().isoformat(),
        "component": component,
        "action": action_str,
        "details": details,
        "status": status,
    }

    # --- 3. LECTURE & ÉCRITURE SOUS VERROU ---
    path = log_file_path()
    with _lock:
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)

        data = []
        if os.path.exists(path):
            try:
                with open(path, 'r', encoding='utf-8-sig') as f:
                    content = f.read().strip()
                    if content:
                        data = json.loads(content)
            except (json.JSONDecodeError, UnicodeDecodeError):
                # Fichier corrompu : on repart à zéro
                _logger.warning("Telemetry file %s was corrupted. Starting fresh.", path)
                data = []

        data.append(entry)

        with open(path, 'w', encoding='utf-8') as f:
            json.dump(data, f, indent=4, ensure_ascii=False, default=str)
