"""Report files derived from a run manifest.

Every report is a pure function of the manifest, so re-emitting overwrites
files with identical bytes. An empty manifest gives header-only CSVs.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from ..riskmetrics import RiskRecord, exceedance_counts, pearson, spearman_rank, write_risk_records
from ..uncertainty import decompose, format_report, write_report_csv, write_tensor_csv
from .manifest import RunManifest

__all__ = ["emit_reports", "epoch_risk_records"]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_rows(path: Path, header: list[str], rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(r.get(k)) for k in header])
    return path


def epoch_risk_records(manifest: RunManifest) -> dict[str, list[RiskRecord]]:
    """Per epoch and unit, the mean hazard and exposure over all scenario combinations."""
    acc: dict[tuple[str, str], list] = {}
    kinds = {}
    for r in manifest.risk:
        acc.setdefault((r["epoch"], r["unit_id"]), []).append((r["hazard_pct"], r["exposure_pct"]))
        kinds[r["unit_id"]] = r["class"]
    out: dict[str, list[RiskRecord]] = {e: [] for e in manifest.epochs}
    for (epoch, uid), vals in sorted(acc.items()):
        h = min(100.0, math.fsum(v[0] for v in vals) / len(vals))
        x = min(100.0, math.fsum(v[1] for v in vals) / len(vals))
        out.setdefault(epoch, []).append(RiskRecord(uid, h, x, epoch, kinds[uid]))
    return out


def _correlation(xs, ys, fn):
    try:
        return fn(xs, ys)
    except ValueError:
        return None


def emit_reports(manifest: RunManifest, directory, hazard_threshold: float | None = None) -> list[Path]:
    """Write every report for ``manifest`` under ``directory``; returns the paths."""
    out = Path(directory)
    reports = out / "reports"
    if hazard_threshold is None:
        hazard_threshold = float(manifest.config.get("hazard_threshold", 60.0))
    paths = []

    paths.append(_write_rows(
        reports / "return_levels.csv",
        ["member", "gage", "epoch", "year", "threshold", "n_events", "acceptance",
         "mean", "q05", "q95", "min", "max"],
        sorted(manifest.return_levels, key=lambda r: (r["member"], r["gage"], r["epoch"]))))
    paths.append(_write_rows(
        reports / "gage_peaks.csv",
        ["gage_id", "area_km2", "qp_m3s", "epoch", "climate", "hydrology"],
        manifest.gage_peaks))
    paths.append(_write_rows(
        reports / "scaling.csv",
        ["epoch", "climate", "hydrology", "beta", "alpha", "r", "n", "inflow_area_km2",
         "inflow_peak_m3s"],
        manifest.scaling))
    paths.append(_write_rows(
        reports / "extents.csv",
        ["epoch", "climate", "hydrology", "hydraulic", "peak_m3s", "area_km2", "converged",
         "steps", "sim_time_s", "mass_balance_error", "status", "note"],
        manifest.runs))
    paths.append(_write_rows(
        reports / "risk_runs.csv",
        ["epoch", "climate", "hydrology", "hydraulic", "unit_id", "class", "hazard_pct",
         "exposure_pct"],
        manifest.risk))

    by_epoch = epoch_risk_records(manifest)
    for epoch, recs in by_epoch.items():
        paths.append(write_risk_records(recs, reports / f"risk_{epoch}.csv"))

    # threshold counts over boroughs and cities alike, per metric
    rows = []
    for metric in ("hazard", "exposure"):
        counts = exceedance_counts([r for recs in by_epoch.values() for r in recs],
                                   hazard_threshold, metric)
        for epoch in manifest.epochs:
            rows.append({"epoch": epoch, "metric": metric, "threshold": hazard_threshold,
                         "count": counts.get(epoch, 0),
                         "units": len(by_epoch.get(epoch, []))})
    paths.append(_write_rows(reports / "threshold_counts.csv",
                             ["epoch", "metric", "threshold", "count", "units"], rows))

    # long-format scatter data
    long_rows = [{"epoch": r.epoch, "unit_id": r.unit_id, "class": r.kind,
                  "hazard_pct": r.hazard, "exposure_pct": r.exposure}
                 for recs in by_epoch.values() for r in recs]
    paths.append(_write_rows(reports / "hazard_vs_exposure.csv",
                             ["epoch", "unit_id", "class", "hazard_pct", "exposure_pct"], long_rows))
    rank_rows = []
    corr_rows = []
    for epoch, recs in by_epoch.items():
        for metric in ("hazard", "exposure"):
            vals = np.array([getattr(r, metric) for r in recs])
            order = np.argsort(np.argsort(-vals, kind="stable"), kind="stable") + 1
            for r, v, k in zip(recs, vals, order):
                rank_rows.append({"unit_id": r.unit_id, "class": r.kind, "metric": metric,
                                  "epoch": epoch, "value": float(v), "rank": int(k)})
        hz = [r.hazard for r in recs]
        ex = [r.exposure for r in recs]
        corr_rows.append({"comparison": "hazard_vs_exposure", "epoch_a": epoch, "epoch_b": epoch,
                          "n": len(recs), "pearson": _correlation(hz, ex, pearson),
                          "spearman": _correlation(hz, ex, spearman_rank)})
    epochs = list(by_epoch)
    for i, a in enumerate(epochs):
        for b in epochs[i + 1:]:
            ua = {r.unit_id: r for r in by_epoch[a]}
            ub = {r.unit_id: r for r in by_epoch[b]}
            common = sorted(set(ua) & set(ub))
            for metric in ("hazard", "exposure"):
                xa = [getattr(ua[u], metric) for u in common]
                xb = [getattr(ub[u], metric) for u in common]
                corr_rows.append({"comparison": f"{metric}_across_epochs", "epoch_a": a,
                                  "epoch_b": b, "n": len(common),
                                  "pearson": _correlation(xa, xb, pearson),
                                  "spearman": _correlation(xa, xb, spearman_rank)})
    paths.append(_write_rows(reports / "epoch_rank.csv",
                             ["unit_id", "class", "metric", "epoch", "value", "rank"], rank_rows))
    paths.append(_write_rows(reports / "correlations.csv",
                             ["comparison", "epoch_a", "epoch_b", "n", "pearson", "spearman"],
                             corr_rows))

    # uncertainty decomposition per epoch
    notes = []
    for epoch in manifest.epochs:
        try:
            tensor = manifest.tensor(epoch)
        except ValueError as exc:
            notes.append(f"{epoch}: {exc}")
            continue
        paths.append(write_tensor_csv(tensor, reports / f"tensor_{epoch}.csv"))
        reps = [decompose(tensor, m) for m in ("range", "std")]
        paths.append(write_report_csv(reps, reports / f"decomposition_{epoch}.csv"))
        text = "\n\n".join(format_report(r) for r in reps)
        p = reports / f"decomposition_{epoch}.txt"
        p.write_text(f"epoch {epoch} ({manifest.epochs[epoch]})\n\n{text}\n")
        paths.append(p)
    if not manifest.epochs:
        paths.append(write_report_csv([], reports / "decomposition.csv"))
    p = reports / "gaps.txt"
    gaps = [f"{f.get('stage')}: " + ", ".join(f"{k}={v}" for k, v in sorted(f.items())
                                               if k not in ("stage", "error")) + f": {f['error']}"
            for f in manifest.failures] + notes
    p.write_text("".join(g + "\n" for g in gaps))
    paths.append(p)
    return paths
