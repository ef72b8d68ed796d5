"""Replication reports: verdicts, data tables and plot series on disk."""
from __future__ import annotations

import os
from dataclasses import dataclass, field

from .csvio import fmt, write_table


@dataclass(frozen=True)
class Verdict:
    statistic: str
    estimate: float
    target: float
    tolerance: float
    rule: str
    passed: bool
    se: float = float("nan")


@dataclass
class ReplicationReport:
    experiment: str
    config_echo: dict
    verdicts: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)   # name -> (header, rows)
    series: dict = field(default_factory=dict)   # name -> (xlabel, ylabel, xs, ys)
    seeds: list = field(default_factory=list)    # (label, replication, seed)
    runtime: float = 0.0
    notes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    def check(self, statistic, estimate, target, tolerance, rule, passed, se=float("nan")):
        self.verdicts.append(Verdict(statistic, float(estimate), float(target), float(tolerance),
                                     rule, bool(passed), float(se)))
        return bool(passed)


def emit_report(report: ReplicationReport, out_dir) -> list[str]:
    """Write report.txt, data/*.csv and plotdata/*.csv; returns the written paths."""
    data_dir = os.path.join(out_dir, "data")
    plot_dir = os.path.join(out_dir, "plotdata")
    try:
        os.makedirs(data_dir, exist_ok=True)
        os.makedirs(plot_dir, exist_ok=True)
        written = []
        path = os.path.join(data_dir, "verdicts.csv")
        write_table(path, ["statistic", "estimate", "se", "target", "tolerance", "passed"],
                    [(v.statistic, v.estimate, v.se, v.target, v.tolerance, int(v.passed))
                     for v in report.verdicts])
        written.append(path)
        if report.seeds:
            path = os.path.join(data_dir, "seeds.csv")
            write_table(path, ["stream", "replication", "seed"], report.seeds)
            written.append(path)
        for name in sorted(report.tables):
            header, rows = report.tables[name]
            path = os.path.join(data_dir, f"{name}.csv")
            write_table(path, header, rows)
            written.append(path)
        for name in sorted(report.series):
            xl, yl, xs, ys = report.series[name]
            path = os.path.join(plot_dir, f"{name}.csv")
            write_table(path, [xl, yl], zip(xs, ys))
            written.append(path)
        path = os.path.join(out_dir, "report.txt")
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(render_report(report))
        written.append(path)
    except OSError as exc:
        raise OSError(f"writing report under {out_dir}: {exc}") from exc
    return written


def render_report(report: ReplicationReport) -> str:
    lines = [f"experiment: {report.experiment}"]
    for k in sorted(report.config_echo):
        lines.append(f"  {k} = {report.config_echo[k]}")
    lines.append(f"runtime_seconds: {report.runtime:.1f}")
    lines.append(f"verdicts: {len(report.verdicts)}")
    for v in report.verdicts:
        tag = "PASS" if v.passed else "FAIL"
        se = "" if v.se != v.se else f" se={fmt(v.se)}"
        lines.append(f"[{tag}] {v.statistic}: estimate={fmt(v.estimate)}{se} target={fmt(v.target)} "
                     f"tolerance={fmt(v.tolerance)} rule: {v.rule}")
    for note in report.notes:
        lines.append(f"note: {note}")
    lines.append(f"overall: {'PASS' if report.passed else 'FAIL'}")
    return "\n".join(lines) + "\n"
