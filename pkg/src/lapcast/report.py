"""Metrics-report container and deterministic JSON / CSV emission."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

SIGNACC_FOOTER = ("signacc scores a zero actual change as correct only for an "
                  "exactly zero predicted change")


@dataclass
class MetricsReport:
    slices: dict                      # slice name -> {metric: value}
    meta: dict = field(default_factory=dict)
    footer: str = SIGNACC_FOOTER

    def to_dict(self) -> dict:
        doc = {name: dict(values) for name, values in self.slices.items()}
        doc["meta"] = dict(self.meta)
        doc["meta"]["footer"] = self.footer
        return doc


def emit_report(report: MetricsReport, path, fmt: str = "json") -> None:
    """Field order is fixed, so identical inputs give identical bytes."""
    if fmt == "json":
        doc = report.to_dict()
        ordered = {name: {k: doc[name][k] for k in sorted(doc[name])}
                   for name in sorted(doc) if name != "meta"}
        ordered["meta"] = {k: doc["meta"][k] for k in sorted(doc["meta"])}
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(ordered, fh, indent=2, sort_keys=False)
            fh.write("\n")
    elif fmt == "csv":
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["slice", "metric", "value"])
            for name in sorted(report.slices):
                for metric in sorted(report.slices[name]):
                    value = report.slices[name][metric]
                    writer.writerow([name, metric,
                                     "" if value is None else repr(float(value))
                                     if isinstance(value, float) else value])
    else:
        raise ValueError(f"unknown report format {fmt!r}")


def load_report(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)
