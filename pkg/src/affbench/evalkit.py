"""Regression metrics with overall and per-protein reporting."""

from __future__ import annotations

from collections import defaultdict
from collections.abc import Sequence
from dataclasses import asdict, dataclass
import csv
import io
import json
import math

from .errors import UndefinedMetricError

UNDEFINED = "undefined"
OVERALL = "overall"
PER_PROTEIN = "per_protein"
REPORT_COLUMNS = ("model", "fraction", "fold", "scope", "uniprot", "n", "r2", "pearson", "rmse")


def _pair(x, y) -> tuple[list[float], list[float]]:
    x = [float(v) for v in x]
    y = [float(v) for v in y]
    if len(x) != len(y):
        raise ValueError(f"length mismatch: {len(x)} predictions vs {len(y)} actuals")
    return x, y


def _centered_sums(x: list[float], y: list[float]) -> tuple[float, float, float]:
    n = len(x)
    mx = math.fsum(x) / n
    my = math.fsum(y) / n
    dx = [v - mx for v in x]
    dy = [v - my for v in y]
    return (math.fsum(a * b for a, b in zip(dx, dy)), math.fsum(a * a for a in dx),
            math.fsum(b * b for b in dy))


def r2(x, y) -> float:
    """1 - SSE / SST with ``x`` the predictions and ``y`` the actual values."""
    x, y = _pair(x, y)
    if len(x) < 2:
        raise UndefinedMetricError("r2 needs at least 2 points")
    my = math.fsum(y) / len(y)
    sst = math.fsum((v - my) ** 2 for v in y)
    if sst == 0:
        raise UndefinedMetricError("r2 is undefined when the actual values have zero variance")
    sse = math.fsum((a - b) ** 2 for a, b in zip(x, y))
    return 1.0 - sse / sst


def pearson(x, y) -> float:
    x, y = _pair(x, y)
    if len(x) < 2:
        raise UndefinedMetricError("pearson needs at least 2 points")
    sxy, sxx, syy = _centered_sums(x, y)
    if sxx == 0 or syy == 0:
        raise UndefinedMetricError("pearson is undefined for a zero-variance input")
    r = sxy / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def rmse(x, y) -> float:
    x, y = _pair(x, y)
    if not x:
        raise UndefinedMetricError("rmse needs at least 1 point")
    return math.sqrt(math.fsum((a - b) ** 2 for a, b in zip(x, y)) / len(x))


def _safe(fn, x, y):
    try:
        return fn(x, y)
    except UndefinedMetricError:
        return None


@dataclass(frozen=True)
class MetricsReport:
    model: str
    fraction: float
    fold: int
    scope: str
    uniprot: str
    n: int
    r2: float | None
    pearson: float | None
    rmse: float | None

    def row(self) -> list[str]:
        def fmt(v):
            return UNDEFINED if v is None else repr(float(v))

        return [self.model, repr(float(self.fraction)), str(self.fold), self.scope, self.uniprot,
                str(self.n), fmt(self.r2), fmt(self.pearson), fmt(self.rmse)]

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("r2", "pearson", "rmse"):
            if d[k] is None:
                d[k] = UNDEFINED
        return d


def metrics_report(pred, actual, model: str = "", fraction: float = 0.0, fold: int = 0,
                   scope: str = OVERALL, uniprot: str = "") -> MetricsReport:
    pred, actual = _pair(pred, actual)
    return MetricsReport(model, fraction, fold, scope, uniprot, len(pred), _safe(r2, pred, actual),
                         _safe(pearson, pred, actual), _safe(rmse, pred, actual))


def stratify(pred, actual, uniprots: Sequence[str], model: str = "", fraction: float = 0.0,
             fold: int = 0) -> list[MetricsReport]:
    """One pooled report followed by one report per UniProt (sorted)."""
    pred, actual = _pair(pred, actual)
    if len(uniprots) != len(pred):
        raise ValueError("each prediction needs a UniProt tag")
    if not pred:
        return []
    out = [metrics_report(pred, actual, model, fraction, fold, OVERALL, "")]
    groups: dict[str, list[int]] = defaultdict(list)
    for k, u in enumerate(uniprots):
        groups[u].append(k)
    for u in sorted(groups):
        idx = groups[u]
        out.append(metrics_report([pred[i] for i in idx], [actual[i] for i in idx], model, fraction, fold,
                                  PER_PROTEIN, u))
    return out


def report_csv(reports: Sequence[MetricsReport]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REPORT_COLUMNS)
    for rep in reports:
        writer.writerow(rep.row())
    return buf.getvalue()


def report_json(reports: Sequence[MetricsReport]) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=1, sort_keys=True) + "\n"


def read_report_csv(text: str) -> list[MetricsReport]:
    def val(s):
        return None if s == UNDEFINED else float(s)

    rows = list(csv.DictReader(io.StringIO(text)))
    return [MetricsReport(r["model"], float(r["fraction"]), int(r["fold"]), r["scope"], r["uniprot"],
                          int(r["n"]), val(r["r2"]), val(r["pearson"]), val(r["rmse"])) for r in rows]


def plot_data_csv(reports: Sequence[MetricsReport], scope: str = OVERALL) -> str:
    """Per (model, fraction): mean and population sd of r2 across folds."""
    groups: dict[tuple[str, float], list[float]] = defaultdict(list)
    for rep in reports:
        if rep.scope == scope and rep.r2 is not None:
            groups[(rep.model, rep.fraction)].append(rep.r2)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["model", "fraction", "n_folds", "r2_mean", "r2_sd"])
    for (model, fraction) in sorted(groups):
        vals = groups[(model, fraction)]
        m = math.fsum(vals) / len(vals)
        sd = math.sqrt(math.fsum((v - m) ** 2 for v in vals) / len(vals))
        writer.writerow([model, repr(fraction), len(vals), repr(m), repr(sd)])
    return buf.getvalue()
