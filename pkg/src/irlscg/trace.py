"""Per-iteration solver traces with JSON-lines and CSV serialization."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

from . import __version__ as _pkg_version

_CSV_FIELDS = [
    "iteration",
    "elapsed_s",
    "epsilon",
    "tol",
    "inner_iterations",
    "objective",
    "rel_error",
    "error_tau",
]


@dataclass
class TraceRecord:
    """One outer-iteration snapshot.

    ``epsilon``/``tol`` are None for solvers without a smoothing schedule
    (IHT, FISTA); ``rel_error``/``error_tau`` are None without a reference
    vector.  ``j_chain`` holds the surrogate values used by the
    monotonicity diagnostics, newest weights first.
    """

    iteration: int
    elapsed_s: float
    epsilon: float | None
    tol: float | None
    inner_iterations: int
    objective: float
    rel_error: float | None = None
    error_tau: float | None = None
    j_chain: tuple[float, ...] | None = None

    def to_dict(self) -> dict:
        d = {
            "iteration": self.iteration,
            "elapsed_s": self.elapsed_s,
            "epsilon": self.epsilon,
            "tol": self.tol,
            "inner_iterations": self.inner_iterations,
            "objective": self.objective,
            "rel_error": self.rel_error,
            "error_tau": self.error_tau,
        }
        if self.j_chain is not None:
            d["j_chain"] = list(self.j_chain)
        return d


@dataclass
class SolveTrace:
    solver: str
    config: dict = field(default_factory=dict)
    records: list[TraceRecord] = field(default_factory=list)
    precompute_s: float = 0.0
    version: str = _pkg_version

    def add(self, record: TraceRecord) -> None:
        self.records.append(record)

    def column(self, name: str) -> list:
        return [getattr(r, name) for r in self.records]

    def final_rel_error(self) -> float | None:
        return self.records[-1].rel_error if self.records else None

    def first_success(self, threshold: float) -> TraceRecord | None:
        """Earliest record whose relative error reaches the threshold."""
        for r in self.records:
            if r.rel_error is not None and r.rel_error <= threshold:
                return r
        return None

    def header(self) -> dict:
        return {
            "type": "header",
            "solver": self.solver,
            "config": self.config,
            "precompute_s": self.precompute_s,
            "version": self.version,
        }

    def to_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(json.dumps(self.header(), sort_keys=True) + "\n")
            for r in self.records:
                row = {"type": "row", **r.to_dict()}
                fh.write(json.dumps(row, sort_keys=True) + "\n")

    @classmethod
    def from_jsonl(cls, path) -> "SolveTrace":
        with open(path) as fh:
            header = json.loads(fh.readline())
            if header.get("type") != "header":
                raise ValueError("trace file must start with a header record")
            trace = cls(
                solver=header["solver"],
                config=header.get("config", {}),
                precompute_s=header.get("precompute_s", 0.0),
                version=header.get("version", "unknown"),
            )
            for line in fh:
                d = json.loads(line)
                if d.get("type") != "row":
                    continue
                chain = d.get("j_chain")
                trace.add(
                    TraceRecord(
                        iteration=d["iteration"],
                        elapsed_s=d["elapsed_s"],
                        epsilon=d["epsilon"],
                        tol=d["tol"],
                        inner_iterations=d["inner_iterations"],
                        objective=d["objective"],
                        rel_error=d.get("rel_error"),
                        error_tau=d.get("error_tau"),
                        j_chain=tuple(chain) if chain is not None else None,
                    )
                )
        return trace

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("# config: " + json.dumps(self.header(), sort_keys=True) + "\n")
            writer = csv.writer(fh)
            writer.writerow(_CSV_FIELDS)
            for r in self.records:
                d = r.to_dict()
                writer.writerow(
                    ["" if d[k] is None else repr(d[k]) if isinstance(d[k], float)
                     else d[k] for k in _CSV_FIELDS]
                )
