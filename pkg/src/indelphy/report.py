"""Statistical verdicts and run reports."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path


def fmt(x) -> str:
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return repr(x)
    return str(x)


@dataclass
class Check:
    """One verdict.  ``kind`` is ``mean`` (|z| <= z_max), ``bound``, ``exact`` or ``trend``."""

    family: str
    params: str
    kind: str
    passed: bool
    value: float
    target: float
    se: float
    n: int
    detail: str = ""

    @property
    def z(self) -> float:
        if self.kind != "mean":
            return math.nan
        if self.se > 0:
            return (self.value - self.target) / self.se
        return 0.0 if self.value == self.target else math.inf

    @property
    def name(self) -> str:
        return f"{self.family}[{self.params}]" if self.params else self.family


def mean_check(family: str, params: str, value: float, target: float, se: float, n: int,
               z_max: float = 5.0, detail: str = "") -> Check:
    if se > 0:
        ok = abs(value - target) <= z_max * se
    else:
        ok = value == target
    return Check(family, params, "mean", bool(ok), float(value), float(target), float(se), int(n), detail)


def bound_check(family: str, params: str, value: float, bound: float, *, upper: bool = True, se: float = 0.0,
                n: int = 1, slack: float = 0.0, detail: str = "") -> Check:
    ok = value <= bound + slack if upper else value >= bound - slack
    return Check(family, params, "bound", bool(ok), float(value), float(bound), float(se), int(n), detail)


CHECK_FIELDS = ("family", "params", "kind", "passed", "value", "target", "se", "z", "n", "detail")


@dataclass
class RunReport:
    kind: str
    seed: int | None
    config: dict
    checks: list[Check] = field(default_factory=list)
    tables: dict[str, list[dict]] = field(default_factory=dict)
    timings: dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failed(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def checks_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CHECK_FIELDS)
        for c in self.checks:
            w.writerow([fmt(getattr(c, f)) for f in CHECK_FIELDS])
        return buf.getvalue()

    def table_csv(self, name: str) -> str:
        rows = self.tables[name]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if rows:
            cols = list(rows[0])
            w.writerow(cols)
            for r in rows:
                w.writerow([fmt(r[c]) for c in cols])
        return buf.getvalue()

    def to_text(self) -> str:
        out = [f"{self.kind} report", f"seed: {self.seed}", "config:"]
        out += [f"  {k} = {fmt(v)}" for k, v in self.config.items()]
        n_fail = len(self.failed())
        out.append(f"checks: {len(self.checks)} total, {len(self.checks) - n_fail} passed, {n_fail} failed")
        for c in self.checks:
            tag = "PASS" if c.passed else "FAIL"
            z = "" if math.isnan(c.z) else f" z={c.z:+.2f}"
            out.append(f"  {tag} {c.name}: value={c.value:.6g} target={c.target:.6g} se={c.se:.3g} n={c.n}{z}"
                       + (f" ({c.detail})" if c.detail else ""))
        for name, rows in self.tables.items():
            out.append(f"table {name}: {len(rows)} rows")
        return "\n".join(out) + "\n"

    def write(self, outdir: str | Path) -> None:
        """report.txt and CSVs (deterministic); wall-clock timings go to timings.txt."""
        d = Path(outdir)
        d.mkdir(parents=True, exist_ok=True)
        (d / "report.txt").write_text(self.to_text())
        (d / "checks.csv").write_text(self.checks_csv())
        for name in self.tables:
            (d / f"{name}.csv").write_text(self.table_csv(name))
        (d / "timings.txt").write_text("".join(f"{k}\t{v:.3f}\n" for k, v in self.timings.items()))
