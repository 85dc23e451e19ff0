"""File formats: shot records (JSON lines), reports, CSV summaries, SVG plots.

A shot-record file starts with one header object carrying the config hash and
seed (plus the full config for self-description), followed by one record per
line.  Files written with the same config and seed are byte-identical;
timestamps live only in sidecar logs, never in data files.
"""

from __future__ import annotations

import csv
import json

from .sampler import MeasurementSetting, ShotRecord

RECORD_FIELDS = ("n1A", "n2A", "n1B", "n2B", "basis_A", "basis_B",
                 "theta_B", "delta_t_s", "shot_id", "seed")


def _record_to_dict(r: ShotRecord) -> dict:
    return {
        "n1A": r.n1a, "n2A": r.n2a, "n1B": r.n1b, "n2B": r.n2b,
        "basis_A": r.setting.basis_a, "basis_B": r.setting.basis_b,
        "theta_B": r.setting.theta_b, "delta_t_s": r.delta_t,
        "shot_id": r.shot_id, "seed": r.seed,
    }


def _record_from_dict(d: dict) -> ShotRecord:
    setting = MeasurementSetting(basis_a=d["basis_A"], basis_b=d["basis_B"],
                                 theta_b=d["theta_B"])
    return ShotRecord(
        n1a=d["n1A"], n2a=d["n2A"], n1b=d["n1B"], n2b=d["n2B"],
        setting=setting, delta_t=d["delta_t_s"],
        shot_id=d["shot_id"], seed=d["seed"],
    )


def write_shot_records(path, records, header: dict) -> None:
    """Line-delimited JSON: a header object, then one record per line."""
    head = {"record_type": "header", **header, "n_records": len(records)}
    with open(path, "w") as fh:
        fh.write(json.dumps(head, sort_keys=True) + "\n")
        for r in records:
            fh.write(json.dumps(_record_to_dict(r), sort_keys=True) + "\n")


def read_shot_records(path):
    """Returns (headers, records); raises ValueError with the line number on
    malformed input."""
    headers = []
    records = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}: malformed JSON on line {lineno}: {exc}") from exc
            if data.get("record_type") == "header":
                headers.append(data)
                continue
            missing = [f for f in RECORD_FIELDS if f not in data]
            if missing:
                raise ValueError(
                    f"{path}: record on line {lineno} is missing fields {missing}"
                )
            try:
                records.append(_record_from_dict(data))
            except (ValueError, TypeError) as exc:
                raise ValueError(f"{path}: invalid record on line {lineno}: {exc}") from exc
    if not headers and not records:
        raise ValueError(f"{path}: file contains no header and no records")
    return headers, records


def write_report_json(path, report, meta: dict | None = None) -> None:
    payload = report.to_json_dict()
    if meta:
        payload["meta"] = meta
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


REPORT_CSV_COLUMNS = ("row", "epr_a_to_b", "epr_b_to_a", "ent", "hei_a", "hei_b",
                      "epr_a_to_b_uncorrected", "epr_b_to_a_uncorrected",
                      "ent_reused_gains", "corr_zz")


def write_report_csv(path, report) -> None:
    """Flat summary: one row per block plus aggregate rows."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_CSV_COLUMNS)
        for i, pb in enumerate(report.per_block):
            writer.writerow([f"block_{i}"] + [pb[k] for k in REPORT_CSV_COLUMNS[1:]])
        means = {
            "epr_a_to_b": report.epr_a_to_b, "epr_b_to_a": report.epr_b_to_a,
            "ent": report.ent, "hei_a": report.hei_a, "hei_b": report.hei_b,
            "epr_a_to_b_uncorrected": report.epr_a_to_b_uncorrected,
            "epr_b_to_a_uncorrected": report.epr_b_to_a_uncorrected,
            "ent_reused_gains": report.ent_reused_gains, "corr_zz": report.corr_zz,
        }
        writer.writerow(["block_mean"] + [means[k] for k in REPORT_CSV_COLUMNS[1:]])
        writer.writerow(["single_block"]
                        + [report.single_block[k] for k in REPORT_CSV_COLUMNS[1:]])
        writer.writerow(["bootstrap_se"]
                        + [report.errors[k] for k in REPORT_CSV_COLUMNS[1:]])


SWEEP_CSV_COLUMNS = ("theta_rad", "ent", "ent_err", "epr_b_to_a", "epr_b_to_a_err",
                     "hei_a", "hei_a_err", "corr_zz")


def write_sweep_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_CSV_COLUMNS)
        for row in rows:
            writer.writerow([row[k] for k in SWEEP_CSV_COLUMNS])


def read_sweep_csv(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        return [{k: float(v) for k, v in row.items()} for row in reader]


def write_calibration_json(path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_selectivity_csv(path, rows) -> None:
    cols = ("transition", "rabi_hz", "detuning_hz", "peak_transfer",
            "transfer_at_duration")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(cols)
        for row in rows:
            writer.writerow([row[c] for c in cols])


# ---------------------------------------------------------------------------
# minimal SVG line plots (no plotting dependency)

def svg_line_plot(path, x, series: dict, xlabel: str = "", ylabel: str = "",
                  title: str = "", hline: float | None = None,
                  width: int = 640, height: int = 420) -> None:
    """Polyline plot of one or more series over a shared x axis."""
    margin = 60
    xs = list(x)
    all_y = [v for ys in series.values() for v in ys]
    if not xs or not all_y:
        raise ValueError("nothing to plot")
    x_lo, x_hi = min(xs), max(xs)
    y_lo = min(all_y + ([hline] if hline is not None else []))
    y_hi = max(all_y + ([hline] if hline is not None else []))
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    pad = 0.05 * (y_hi - y_lo) or 1.0
    y_lo, y_hi = y_lo - pad, y_hi + pad

    def px(v):
        return margin + (v - x_lo) / (x_hi - x_lo) * (width - 2 * margin)

    def py(v):
        return height - margin - (v - y_lo) / (y_hi - y_lo) * (height - 2 * margin)

    colors = ("#c0392b", "#2980b9", "#27ae60", "#8e44ad", "#d35400")
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{margin}" y1="{height-margin}" x2="{width-margin}" '
        f'y2="{height-margin}" stroke="black"/>',
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" '
        f'y2="{height-margin}" stroke="black"/>',
    ]
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        xv = x_lo + frac * (x_hi - x_lo)
        yv = y_lo + frac * (y_hi - y_lo)
        parts.append(f'<text x="{px(xv):.1f}" y="{height-margin+18}" font-size="11" '
                     f'text-anchor="middle">{xv:.3g}</text>')
        parts.append(f'<text x="{margin-8}" y="{py(yv)+4:.1f}" font-size="11" '
                     f'text-anchor="end">{yv:.3g}</text>')
    if hline is not None:
        parts.append(f'<line x1="{margin}" y1="{py(hline):.1f}" x2="{width-margin}" '
                     f'y2="{py(hline):.1f}" stroke="gray" stroke-dasharray="6 4"/>')
    for i, (label, ys) in enumerate(series.items()):
        color = colors[i % len(colors)]
        pts = " ".join(f"{px(a):.1f},{py(b):.1f}" for a, b in zip(xs, ys))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                     f'stroke-width="1.8"/>')
        for a, b in zip(xs, ys):
            parts.append(f'<circle cx="{px(a):.1f}" cy="{py(b):.1f}" r="3" '
                         f'fill="{color}"/>')
        parts.append(f'<text x="{width-margin+6}" y="{margin + 16*i}" font-size="12" '
                     f'fill="{color}">{label}</text>')
    if xlabel:
        parts.append(f'<text x="{width/2:.0f}" y="{height-16}" font-size="13" '
                     f'text-anchor="middle">{xlabel}</text>')
    if ylabel:
        parts.append(f'<text x="18" y="{height/2:.0f}" font-size="13" '
                     f'text-anchor="middle" transform="rotate(-90 18 {height/2:.0f})">'
                     f'{ylabel}</text>')
    if title:
        parts.append(f'<text x="{width/2:.0f}" y="24" font-size="14" '
                     f'text-anchor="middle">{title}</text>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")


def write_state_json(path, state) -> None:
    with open(path, "w") as fh:
        json.dump(state.to_json_dict(), fh)
        fh.write("\n")


def read_state_json(path):
    from .spin_core import DickeState
    with open(path) as fh:
        return DickeState.from_json_dict(json.load(fh))
