"""
Result emission: CSV through pandas or JSON with the resolved spec for provenance.
A CSV written with a spec gets a `<path>.spec.json` sidecar so its header stays fixed.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional

import pandas as pd

from src.utils.logger import ActionType, log_experiment
from src.utils.result_aggregator import CSV_COLUMNS, ResultRow


logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.10g"


def rows_to_frame(rows: List[ResultRow]) -> pd.DataFrame:
    """Rows as a DataFrame with the fixed CSV column order."""
    return pd.DataFrame([row.to_dict() for row in rows], columns=list(CSV_COLUMNS))


def render_csv(rows: List[ResultRow]) -> str:
    """Header `L,scheme,metric,mean,stderr,trials,seconds`, 10 significant digits, LF endings."""
    return rows_to_frame(rows).to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


def render_json(rows: List[ResultRow], spec: Optional[Dict[str, Any]] = None) -> str:
    payload = {
        "columns": list(CSV_COLUMNS),
        "rows": [row.to_dict() for row in rows],
        "spec": spec or {},
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def spec_sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".spec.json")


def emit_results(rows: List[ResultRow], path, format: str = "csv",
                 spec: Optional[Dict[str, Any]] = None) -> Path:
    """
    Write rows to `path`.

    Args:
        rows: Result rows (may be empty: header-only CSV)
        path: Output file
        format: "csv" or "json"
        spec: Resolved ExperimentSpec as a dict, embedded in JSON output or
            written next to a CSV as `<path>.spec.json`

    Returns:
        The written path

    Raises:
        ValueError: Unknown format
    """
    if format == "csv":
        text = render_csv(rows)
    elif format == "json":
        text = render_json(rows, spec)
    else:
        raise ValueError(f"Unknown result format '{format}' (expected csv or json)")

    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(text)
    details = {"path": str(path), "format": format, "rows": len(rows)}
    if format == "csv" and spec is not None:
        sidecar = spec_sidecar_path(path)
        with open(sidecar, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(json.dumps(spec, indent=2, sort_keys=True) + "\n")
        details["spec_path"] = str(sidecar)

    log_experiment(
        component="ResultWriter",
        action=ActionType.EMIT,
        details=details,
        status="SUCCESS",
    )
    logger.info("wrote %d rows to %s", len(rows), path)
    return path


def load_results(path) -> List[ResultRow]:
    """Read rows back from a CSV or JSON result file."""
    path = Path(path)
    if path.suffix == ".json":
        payload = json.loads(path.read_text(encoding="utf-8"))
        return [ResultRow(**row) for row in payload["rows"]]
    frame = pd.read_csv(path, dtype={"scheme": str, "metric": str})
    return [
        ResultRow(L=int(r.L), scheme=r.scheme, metric=r.metric, mean=float(r.mean),
                  stderr=float(r.stderr), trials=int(r.trials), seconds=float(r.seconds))
        for r in frame.itertuples(index=False)
    ]
