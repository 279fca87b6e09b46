"""Experiment report: JSON summary plus the method/error/cost table."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path


@dataclass
class MethodRow:
    label: str
    name: str
    eps_u: float
    eps_sigma: float
    forward_runs: float
    data_checksum: str
    extras: dict = field(default_factory=dict)


@dataclass
class ExperimentReport:
    name: str
    model: str
    seed: int
    config_hash: str
    data_checksum: str
    gold: dict
    methods: list[MethodRow]
    forecast: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "model": self.model,
            "seed": self.seed,
            "config_hash": self.config_hash,
            "data_checksum": self.data_checksum,
            "gold": self.gold,
            "methods": [asdict(m) for m in self.methods],
            "forecast": self.forecast,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentReport":
        return cls(
            name=d["name"], model=d["model"], seed=d["seed"],
            config_hash=d["config_hash"], data_checksum=d["data_checksum"],
            gold=d["gold"],
            methods=[MethodRow(**m) for m in d["methods"]],
            forecast=d["forecast"],
        )


def emit_report(report: ExperimentReport, out: Path):
    """Write report.json and the fixed-layout table.csv."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    for row in report.methods:
        if row.data_checksum != report.data_checksum:
            raise RuntimeError(
                f"method {row.label} consumed different data "
                f"({row.data_checksum} != {report.data_checksum})")
    (out / "report.json").write_text(
        json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n")
    with open(out / "table.csv", "w") as fh:
        fh.write("method,eps_u,eps_sigma,forward_runs\n")
        fh.write(f"mcmc,0.0,0.0,{float(report.gold['forward_runs'])!r}\n")
        for row in report.methods:
            fh.write(f"{row.label},{float(row.eps_u)!r},{float(row.eps_sigma)!r},"
                     f"{float(row.forward_runs)!r}\n")


def load_report(out: Path) -> ExperimentReport:
    return ExperimentReport.from_dict(
        json.loads((Path(out) / "report.json").read_text()))
