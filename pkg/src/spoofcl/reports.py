"""Writing and re-reading run artifacts.

A report directory holds one ``matrix_<strategy>_seed<k>.csv`` per run,
``summary.csv`` (strategies by tasks plus Avg and BWT, means over seeds)
and ``manifest.json``. Figures go in a ``figures/`` subdirectory.
Matrix cells are written with ``repr`` so a reload is exact.
"""

import csv
import io
import json
from pathlib import Path

import numpy as np

from .errors import ReportError
from .metrics import EvalMatrix, summarize

SUMMARY_FILE = "summary.csv"
MANIFEST_FILE = "manifest.json"
FIGURE_DIR = "figures"
SUMMARY_DECIMALS = 4


def matrix_filename(strategy: str, seed: int) -> str:
    return f"matrix_{strategy}_seed{seed}.csv"


def matrix_to_csv(matrix: EvalMatrix) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["trained_on", *matrix.task_names])
    for name, row in zip(matrix.task_names, matrix.eer):
        w.writerow([name, *(repr(float(v)) for v in row)])
    return buf.getvalue()


def matrix_from_csv(text: str, source: str = "<csv>") -> EvalMatrix:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or not rows[0] or rows[0][0] != "trained_on":
        raise ReportError(f"{source}: missing header row")
    names = tuple(rows[0][1:])
    body = rows[1:]
    if len(body) != len(names):
        raise ReportError(f"{source}: expected {len(names)} rows, found {len(body)}")
    eer = np.empty((len(names), len(names)))
    for i, row in enumerate(body):
        if len(row) != len(names) + 1 or row[0] != names[i]:
            raise ReportError(f"{source}: malformed row {i + 2}")
        try:
            eer[i] = [float(v) for v in row[1:]]
        except ValueError:
            raise ReportError(f"{source}: non-numeric cell in row {i + 2}") from None
    return EvalMatrix(eer, names)


def summary_rows(matrices_by_strategy: dict):
    """Summary rows: per-task final EER averaged over seeds, then Avg and BWT.

    Cells are rounded before Avg is taken so the written Avg is the mean
    of the written row.
    """
    rows = []
    for name, matrices in matrices_by_strategy.items():
        final = np.mean([m.eer[-1] for m in matrices], axis=0)
        cells = [round(float(v), SUMMARY_DECIMALS) for v in final]
        bwt = float(np.mean([summarize(m).backward_transfer for m in matrices]))
        rows.append((name, cells, round(float(np.mean(cells)), SUMMARY_DECIMALS), round(bwt, SUMMARY_DECIMALS)))
    return rows


def summary_to_csv(task_names, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["strategy", *task_names, "Avg", "BWT"])
    for name, cells, avg, bwt in rows:
        w.writerow([name, *(f"{v:.{SUMMARY_DECIMALS}f}" for v in cells),
                    f"{avg:.{SUMMARY_DECIMALS}f}", f"{bwt:.{SUMMARY_DECIMALS}f}"])
    return buf.getvalue()


def summary_text(task_names, rows, n_seeds: int) -> str:
    """Fixed-width rendering of the summary table for the terminal."""
    head = ["strategy", *task_names, "Avg", "BWT"]
    table = [head] + [[n, *(f"{v:.2f}" for v in c), f"{a:.2f}", f"{b:+.2f}"] for n, c, a, b in rows]
    widths = [max(len(r[i]) for r in table) for i in range(len(head))]
    lines = [f"EER (%) after the final task, mean over {n_seeds} seed(s)"]
    for r in table:
        lines.append("  ".join(c.rjust(wd) if i else c.ljust(wd) for i, (c, wd) in enumerate(zip(r, widths))))
    return "\n".join(lines)


def _group(matrices: dict):
    by_strategy = {}
    for (name, seed), m in matrices.items():
        by_strategy.setdefault(name, []).append((seed, m))
    return {n: [m for _, m in sorted(v, key=lambda p: p[0])] for n, v in by_strategy.items()}


def _write(path: Path, text: str):
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise ReportError(f"cannot write {path}: {exc}") from None


def write_report_files(out, manifest: dict, matrices: dict, figures: bool = True):
    out = Path(out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ReportError(f"cannot create report directory {out}: {exc}") from None
    names = tuple(manifest["task_names"])
    written = []
    for (strategy, seed), m in sorted(matrices.items(), key=lambda kv: (manifest["strategies"].index(kv[0][0]), kv[0][1])):
        if m.task_names != names:
            raise ReportError(f"matrix {strategy}/seed{seed} has tasks {m.task_names}, expected {names}")
        p = out / matrix_filename(strategy, seed)
        _write(p, matrix_to_csv(m))
        written.append(p)
    grouped = _group(matrices)
    grouped = {n: grouped[n] for n in manifest["strategies"]}
    rows = summary_rows(grouped)
    p = out / SUMMARY_FILE
    _write(p, summary_to_csv(names, rows))
    written.append(p)
    manifest = dict(manifest, files=[q.name for q in written] + [MANIFEST_FILE])
    p = out / MANIFEST_FILE
    _write(p, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    written.append(p)
    if figures:
        from .plotting import render_figures
        written += render_figures(out / FIGURE_DIR, grouped, names)
    return written, rows


def record_manifest(record) -> dict:
    from .config import serialize_config
    runs = []
    for (name, seed), run in record.runs.items():
        runs.append({
            "strategy": name, "seed": seed, "file": matrix_filename(name, seed),
            "avg_final": run.summary.avg_final, "backward_transfer": run.summary.backward_transfer,
            "state_digest": run.state_digest,
        })
    return {
        "version": record.version,
        "config_digest": record.config_digest,
        "config": serialize_config(record.config),
        "strategies": record.strategies,
        "seeds": record.seeds,
        "task_names": list(record.task_names),
        "runs": runs,
        # the only non-deterministic content in the directory
        "timings": {
            "runs": {f"{r['strategy']}/seed{r['seed']}": record.runs[(r["strategy"], r["seed"])].seconds for r in runs},
            "data": {str(k): v for k, v in record.data_seconds.items()},
        },
    }


def emit_reports(record, out, figures: bool = True):
    """Write matrices, summary, manifest and figures for ``record`` into ``out``."""
    matrices = {key: run.matrix for key, run in record.runs.items()}
    written, _ = write_report_files(out, record_manifest(record), matrices, figures)
    return written


def load_report(out):
    """(manifest, {(strategy, seed): EvalMatrix}) from an emitted directory."""
    out = Path(out)
    try:
        manifest = json.loads((out / MANIFEST_FILE).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ReportError(f"cannot read {out / MANIFEST_FILE}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ReportError(f"{out / MANIFEST_FILE}: invalid JSON: {exc}") from None
    for key in ("strategies", "seeds", "task_names", "runs"):
        if key not in manifest:
            raise ReportError(f"{out / MANIFEST_FILE}: missing field {key!r}")
    matrices = {}
    for run in manifest["runs"]:
        p = out / run["file"]
        try:
            text = p.read_text(encoding="utf-8")
        except OSError as exc:
            raise ReportError(f"cannot read {p}: {exc}") from None
        matrices[(run["strategy"], run["seed"])] = matrix_from_csv(text, str(p))
    return manifest, matrices


def rerender(out, figures: bool = True):
    """Regenerate summary, manifest and figures from the matrices on disk."""
    manifest, matrices = load_report(out)
    written, rows = write_report_files(out, manifest, matrices, figures)
    return manifest, rows, written
