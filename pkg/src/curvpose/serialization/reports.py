"""
Reports

Versioned JSON documents for centers, pose estimates and evaluation reports,
plus CSV tables for per-view errors and optimizer convergence traces. JSON is
written with a fixed key order and indentation so identical inputs produce
byte-identical files.
"""

import csv
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from ..core.errors import MalformedFileError
from ..scene.scene_io import check_version, read_json_document
from ..services.centers import Center3D
from ..services.metrics import REPORT_FORMAT_VERSION, EvaluationReport
from ..services.optimizer import ESTIMATE_FORMAT_VERSION, ConvergenceTrace, SceneEstimate

logger = logging.getLogger(__name__)

CENTERS_FORMAT_VERSION = 1

ERROR_COLUMNS = [
    "gt_index",
    "view_index",
    "class_id",
    "estimate_index",
    "mssd_m",
    "mspd_px",
    "diameter_m",
]
TRACE_COLUMNS = ["object_rank", "stage", "iteration", "best_cost"]


def write_json(path: Path, document: Dict[str, Any]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(document, indent=2) + "\n")


# -------------------- Centers --------------------


def write_centers(path: Path, centers: Sequence[Center3D]) -> None:
    write_json(
        path, {"version": CENTERS_FORMAT_VERSION, "centers": [c.to_dict() for c in centers]}
    )
    logger.info(f"Wrote {len(centers)} centers to {path}")


def read_centers(path: Path) -> List[Center3D]:
    document = read_json_document(path)
    check_version(document, CENTERS_FORMAT_VERSION, path)
    try:
        return [Center3D.from_dict(c) for c in document["centers"]]
    except (KeyError, TypeError, ValueError) as e:
        raise MalformedFileError(f"Invalid centers document {path}: {e}")


# -------------------- Estimates --------------------


def write_estimate(path: Path, estimate: SceneEstimate) -> None:
    write_json(path, estimate.to_dict())
    logger.info(f"Wrote {len(estimate)} pose estimates to {path}")


def read_estimate(path: Path) -> SceneEstimate:
    document = read_json_document(path)
    check_version(document, ESTIMATE_FORMAT_VERSION, path)
    try:
        return SceneEstimate.from_dict(document)
    except (KeyError, TypeError, ValueError) as e:
        raise MalformedFileError(f"Invalid estimate document {path}: {e}")


# -------------------- Evaluation --------------------


def _csv_value(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_report(
    json_path: Path, report: EvaluationReport, csv_path: Optional[Path] = None
) -> None:
    """Write the report JSON and, optionally, its per-view error table as CSV."""
    write_json(json_path, report.to_dict())
    if csv_path is not None:
        rows = [e.to_dict() for e in report.errors]
        _write_csv(csv_path, ERROR_COLUMNS, [[r[c] for c in ERROR_COLUMNS] for r in rows])
    logger.info(f"Wrote evaluation report to {json_path}")


def read_report(path: Path) -> Dict[str, Any]:
    document = read_json_document(path)
    check_version(document, REPORT_FORMAT_VERSION, path)
    return document


# -------------------- Trace --------------------


def write_trace(path: Path, trace: ConvergenceTrace) -> None:
    _write_csv(path, TRACE_COLUMNS, [list(row) for row in trace.rows])
    logger.info(f"Wrote {len(trace.rows)} trace rows to {path}")


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_csv_value(v) for v in row])
