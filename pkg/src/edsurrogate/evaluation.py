"""Model evaluation and the CSV surfaces: per-sample metrics, phase logs,
and the scatter export of (true ED, surrogate ED) pairs.

All writers are deterministic: same inputs give byte-identical files.
Floats are serialized with repr so every file round-trips losslessly.
"""

from __future__ import annotations

import math
from pathlib import Path

from .errors import ConfigError
from .recognizer import RecognizerNet, WordImage, load_recognizer, recognize
from .text_metrics import Alphabet, MetricsReport, decode_greedy, evaluate_set
from .training import PHASE_RECOGNIZER, PhaseLogRecord

LOG_HEADER = "epoch,phase,iteration,sample_index,e,e_hat,loss,gate_open"
METRICS_HEADER = "sample_index,gt,pred,ed"
SCATTER_HEADER = "e,e_hat,iteration"


def evaluate_model(
    model, images: list[WordImage], alphabet: Alphabet, dataset_id: str = ""
) -> MetricsReport:
    """Greedy-decode every image and score against its label."""
    net = model if isinstance(model, RecognizerNet) else load_recognizer(model)
    if net.config.alphabet_size != len(alphabet):
        raise ConfigError(
            f"model alphabet size {net.config.alphabet_size} != dataset {len(alphabet)}"
        )
    if not images:
        raise ConfigError("empty evaluation split")
    preds = [decode_greedy(recognize(image, net), alphabet) for image in images]
    return evaluate_set(preds, [image.label for image in images], dataset_id)


def relative_ted_improvement(ted_base: int, ted_tuned: int) -> float:
    """(base - tuned) / base; 0 when the baseline is already perfect."""
    if ted_base == 0:
        return 0.0
    return (ted_base - ted_tuned) / ted_base


def format_summary(report: MetricsReport) -> str:
    return (
        f"dataset: {report.dataset_id}\n"
        f"samples: {report.n_samples}\n"
        f"accuracy: {report.accuracy:.4f}\n"
        f"ned: {report.ned:.4f}\n"
        f"ted: {report.ted}\n"
    )


def write_metrics_csv(path, report: MetricsReport) -> None:
    lines = [METRICS_HEADER]
    for index, (gt, pred, ed) in enumerate(report.rows):
        lines.append(f"{index},{gt},{pred},{ed}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_metrics_csv(path) -> list[tuple[int, str, str, int]]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if lines[0] != METRICS_HEADER:
        raise ValueError(f"unexpected metrics header {lines[0]!r}")
    rows = []
    for line in lines[1:]:
        index, gt, pred, ed = line.split(",")
        rows.append((int(index), gt, pred, int(ed)))
    return rows


def write_log_csv(path, records: list[PhaseLogRecord]) -> None:
    lines = [LOG_HEADER]
    for r in records:
        lines.append(
            f"{r.epoch},{r.phase},{r.iteration},{r.sample_index},"
            f"{int(r.e)},{r.e_hat!r},{r.loss!r},{int(r.gate_open)}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_log_csv(path) -> list[PhaseLogRecord]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if lines[0] != LOG_HEADER:
        raise ValueError(f"unexpected log header {lines[0]!r}")
    records = []
    for line in lines[1:]:
        epoch, phase, iteration, sample_index, e, e_hat, loss, gate = line.split(",")
        records.append(
            PhaseLogRecord(
                epoch=int(epoch),
                phase=phase,
                iteration=int(iteration),
                sample_index=int(sample_index),
                e=int(e),
                e_hat=float(e_hat),
                loss=float(loss),
                gate_open=bool(int(gate)),
            )
        )
    return records


def scatter_rows(
    logs: list[PhaseLogRecord], first_epoch: int, last_epoch: int
) -> list[PhaseLogRecord]:
    """Recognizer-phase records with first_epoch <= epoch <= last_epoch."""
    if first_epoch > last_epoch:
        raise ValueError("empty epoch range")
    rows = [
        r
        for r in logs
        if r.phase == PHASE_RECOGNIZER and first_epoch <= r.epoch <= last_epoch
    ]
    if not rows:
        raise ValueError(f"no recognizer-phase records in epochs [{first_epoch}, {last_epoch}]")
    return rows


def export_scatter(
    path, logs: list[PhaseLogRecord], first_epoch: int, last_epoch: int, lam: float
) -> None:
    """One row per recognizer-phase sample; the gate band rides as metadata."""
    rows = scatter_rows(logs, first_epoch, last_epoch)
    lines = [f"# lambda={lam!r}", SCATTER_HEADER]
    for r in rows:
        lines.append(f"{int(r.e)},{r.e_hat!r},{r.iteration}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_scatter_csv(path) -> tuple[float, list[tuple[int, float, int]]]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines[0].startswith("# lambda="):
        raise ValueError("missing lambda metadata line")
    lam = float(lines[0].split("=", 1)[1])
    if lines[1] != SCATTER_HEADER:
        raise ValueError(f"unexpected scatter header {lines[1]!r}")
    rows = []
    for line in lines[2:]:
        e, e_hat, iteration = line.split(",")
        rows.append((int(e), float(e_hat), int(iteration)))
    return lam, rows


def in_band_fraction(
    logs: list[PhaseLogRecord], first_epoch: int, last_epoch: int, lam: float
) -> float:
    """Fraction of recognizer-phase samples with |e_hat - e| < lam."""
    rows = scatter_rows(logs, first_epoch, last_epoch)
    hits = sum(1 for r in rows if not math.isnan(r.e_hat) and abs(r.e_hat - r.e) < lam)
    return hits / len(rows)
