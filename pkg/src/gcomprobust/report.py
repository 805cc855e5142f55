"""JSON-serializable analysis report (``"schema": 1``)."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class ArmEstimate:
    arm: int
    label: str
    n: int
    theta: float
    se: float


@dataclass(frozen=True)
class GeEntry:
    se: float
    ci_low: float
    ci_high: float


@dataclass(frozen=True)
class ContrastEntry:
    contrast: str
    kind: str
    arm_t: int
    arm_s: int
    estimate: float
    se: float
    ci_low: float
    ci_high: float
    alpha: float
    reporting_estimate: float
    reporting_low: float
    reporting_high: float
    ge: GeEntry | None = None


@dataclass(frozen=True)
class Convergence:
    iterations: int
    converged: bool
    final_score_norm: float


@dataclass(frozen=True)
class AnalysisReport:
    n: int
    k: int
    p: int
    arm_labels: tuple[str, ...]
    covariates: tuple[str, ...]
    pi: tuple[float, ...]
    pi_source: str
    convergence: Convergence
    theta: tuple[ArmEstimate, ...]
    contrasts: tuple[ContrastEntry, ...]
    version: str
    schema: int = SCHEMA_VERSION

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    @classmethod
    def from_dict(cls, d: dict) -> AnalysisReport:
        if d.get("schema") != SCHEMA_VERSION:
            raise ValueError(f"unsupported report schema {d.get('schema')!r}")
        contrasts = []
        for c in d["contrasts"]:
            c = dict(c)
            ge = c.pop("ge", None)
            contrasts.append(ContrastEntry(**c, ge=GeEntry(**ge) if ge is not None else None))
        return cls(
            n=d["n"],
            k=d["k"],
            p=d["p"],
            arm_labels=tuple(d["arm_labels"]),
            covariates=tuple(d["covariates"]),
            pi=tuple(d["pi"]),
            pi_source=d["pi_source"],
            convergence=Convergence(**d["convergence"]),
            theta=tuple(ArmEstimate(**a) for a in d["theta"]),
            contrasts=tuple(contrasts),
            version=d["version"],
            schema=d["schema"],
        )

    @classmethod
    def from_json(cls, text: str) -> AnalysisReport:
        return cls.from_dict(json.loads(text))

    def to_text(self) -> str:
        lines = [
            f"n = {self.n}, arms = {self.k}, covariates = {self.p} ({', '.join(self.covariates) or 'none'})",
            f"pi ({self.pi_source}) = " + ", ".join(f"{p:.4f}" for p in self.pi),
            f"working model: {self.convergence.iterations} Newton iterations, "
            f"score max-norm {self.convergence.final_score_norm:.2e}",
            "",
        ]
        arm_rows = [("Arm", "Label", "n", "Theta", "SE")]
        for a in self.theta:
            arm_rows.append((str(a.arm), a.label, str(a.n), f"{a.theta:.4f}", f"{a.se:.4f}"))
        lines += align_rows(arm_rows)
        lines.append("")

        has_ge = any(c.ge is not None for c in self.contrasts)
        header = ["Contrast", "Estimate", "SE", "CI low", "CI high", "Reported", "Rep. low", "Rep. high"]
        if has_ge:
            header += ["Ge SE", "Ge CI low", "Ge CI high"]
        rows = [tuple(header)]
        for c in self.contrasts:
            row = [
                c.contrast,
                f"{c.estimate:.4f}",
                f"{c.se:.4f}",
                f"{c.ci_low:.4f}",
                f"{c.ci_high:.4f}",
                f"{c.reporting_estimate:.4f}",
                f"{c.reporting_low:.4f}",
                f"{c.reporting_high:.4f}",
            ]
            if has_ge:
                row += [f"{c.ge.se:.4f}", f"{c.ge.ci_low:.4f}", f"{c.ge.ci_high:.4f}"] if c.ge else ["", "", ""]
            rows.append(tuple(row))
        lines += align_rows(rows)
        return "\n".join(lines) + "\n"


def align_rows(rows) -> list[str]:
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    out = []
    for j, r in enumerate(rows):
        cells = [r[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(r[1:], widths[1:])]
        out.append("  ".join(cells).rstrip())
    return out
