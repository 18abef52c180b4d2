"""Line-delimited structured-text records (JSON objects, sorted keys).

Every CLI output starts with a meta record carrying the toolkit version and
the seeds/parameters that produced the file, so runs can be diffed and
reproduced byte for byte.
"""

from __future__ import annotations

import json
from typing import Iterable

from . import __version__
from .errors import BadArgs
from .metrics import MetricReport


def dumps(record: dict) -> str:
    return json.dumps(record, sort_keys=True, separators=(", ", ": "))


def meta_record(command: str, seed: int | None = None, **params) -> dict:
    rec = {"record": "meta", "tool": "heliometrics", "version": __version__,
           "command": command, "params": params}
    if seed is not None:
        rec["seed"] = seed
    return rec


def write_records(path, records: Iterable[dict]) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(dumps(rec) + "\n")


def read_records(path) -> list[dict]:
    records = []
    with open(path) as fh:
        for i, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise BadArgs(f"{path}:{i + 1}: not a JSON record: {exc}") from exc
    return records


def report_to_record(report: MetricReport) -> dict:
    return {
        "record": "metrics",
        "model_id": report.model_id,
        "values": report.values,
        "params": report.params,
    }


def record_to_report(rec: dict) -> MetricReport:
    if rec.get("record") != "metrics":
        raise BadArgs(f"not a metrics record: {rec.get('record')!r}")
    return MetricReport(
        model_id=rec["model_id"],
        values=dict(rec["values"]),
        params=dict(rec.get("params", {})),
    )


def load_metric_table(path):
    from .statlab import table_from_reports

    reports = [
        record_to_report(rec)
        for rec in read_records(path)
        if rec.get("record") == "metrics"
    ]
    if not reports:
        raise BadArgs(f"{path} holds no metrics records")
    return table_from_reports(reports)
