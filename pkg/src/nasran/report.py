"""Run-directory outputs: report.json and the CSV files derived from it."""

from __future__ import annotations

import json
import os
from pathlib import Path

from .metrics import EvalReport
from .nas_rapp import TABLE_PARAMS, SearchOutcome, nominal_costs, table_mismatch
from .ric_sim import SimulationReport

TABLE1_HEADER = ["arch", "params_eq1", "params_table", "mae", "rmse", "mape", "r2_reg", "r2_crit",
                 "r2_overall", "efficiency", "eq1_mismatch"]
PREDICTIONS_HEADER = ["t", "predicted", "actual", "model", "version", "param_cost", "regime"]
DECISIONS_HEADER = ["t", "regime", "model", "switched", "reason", "param_cost"]
REPORT_FILES = ("report.json", "predictions.csv", "decisions.csv", "table1.csv")


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, int):
        return str(x)
    return f"{x:.9g}"


def _csv(rows) -> str:
    return "".join(",".join(fmt(v) if not isinstance(v, str) else v for v in row) + "\n"
                   for row in rows)


def table1_rows(evals: list[EvalReport]) -> list[list]:
    costs = nominal_costs()
    rows = []
    for e in evals:
        rows.append([e.arch, costs[e.arch], TABLE_PARAMS[e.arch], e.mae, e.rmse, e.mape_percent,
                     e.r2_regular, e.r2_critical, e.r2_overall, e.efficiency,
                     int(table_mismatch(e.arch))])
    return rows


def table1_csv(evals) -> str:
    return _csv([TABLE1_HEADER] + table1_rows(evals))


def predictions_csv(report: SimulationReport) -> str:
    return _csv([PREDICTIONS_HEADER] + [
        [p.t, p.predicted, p.actual, p.model, p.version, p.param_cost, p.regime.value]
        for p in report.predictions
    ])


def decisions_csv(report: SimulationReport) -> str:
    return _csv([DECISIONS_HEADER] + [
        [d.t, d.regime.value, d.chosen_model, d.switched, d.reason, d.param_cost]
        for d in report.decisions
    ])


def report_json(report: SimulationReport) -> str:
    return json.dumps(report.to_dict(), indent=1) + "\n"


def search_outcome_json(outcome: SearchOutcome) -> str:
    d = outcome.to_dict()
    for r in d["ranked"] + d["failed"]:
        r["params_table"] = TABLE_PARAMS.get(r["arch"])
        r["eq1_mismatch"] = table_mismatch(r["arch"]) if r["arch"] in TABLE_PARAMS else None
    return json.dumps(d, indent=1) + "\n"


def write_files(out_dir, files: dict[str, str]) -> list[Path]:
    """Write every file or none: on any failure already-written files are removed."""
    out_dir = Path(out_dir)
    written = []
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        for name, text in files.items():
            path = out_dir / name
            tmp = out_dir / (name + ".tmp")
            written.append(tmp)
            tmp.write_text(text)
        final = []
        for name in files:
            os.replace(out_dir / (name + ".tmp"), out_dir / name)
            final.append(out_dir / name)
            written.append(out_dir / name)
        return final
    except OSError:
        for p in written:
            try:
                p.unlink()
            except OSError:
                pass
        raise


def emit_report(report: SimulationReport, out_dir) -> list[Path]:
    return write_files(out_dir, {
        "report.json": report_json(report),
        "predictions.csv": predictions_csv(report),
        "decisions.csv": decisions_csv(report),
        "table1.csv": table1_csv(report.evals),
    })


def load_report(path) -> SimulationReport:
    path = Path(path)
    if path.is_dir():
        path = path / "report.json"
    return SimulationReport.from_dict(json.loads(path.read_text()))


def rerender(out_dir) -> list[Path]:
    """Regenerate the CSVs of a run directory from its report.json."""
    report = load_report(out_dir)
    return write_files(out_dir, {
        "predictions.csv": predictions_csv(report),
        "decisions.csv": decisions_csv(report),
        "table1.csv": table1_csv(report.evals),
    })
