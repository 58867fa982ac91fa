"""Evaluation: micro-averaged F1, decision thresholds, ablation harness.

The metric pools TP/FP/FN over the three emotion classes only; the
"others" class contributes false positives and false negatives but is
never a true positive.  F1 is 2PR/(P+R), defined as 0 when P + R = 0.
"""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import model as model_mod
from .corpus import CLASS_ORDER, EMOTION_CLASSES, LABEL_TO_INDEX, Label, parse_label
from .errors import DataError
from .features import GROUP_ORDER, FeatureSpace
from .model import GbdtParams, train_gbdt
from .model.logreg import train_logreg

_OTHERS_INDEX = LABEL_TO_INDEX[Label.OTHERS]


class LengthMismatch(DataError):
    def __init__(self, golds: int, preds: int):
        super().__init__(f"got {golds} gold labels but {preds} predictions")


class EmptyInput(DataError):
    pass


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class EvalReport:
    """Confusion matrix (gold x predicted, class order happy/sad/angry/others)
    plus per-emotion and micro-averaged precision/recall/F1."""

    confusion: tuple[tuple[int, ...], ...]
    per_class: dict[Label, ClassMetrics]
    micro_precision: float
    micro_recall: float
    micro_f1: float
    examples: int

    def to_dict(self) -> dict:
        return {
            "format": "convemo-eval-report",
            "version": 1,
            "examples": self.examples,
            "class_order": [label.value for label in CLASS_ORDER],
            "confusion": [list(row) for row in self.confusion],
            "per_class": {
                label.value: {"precision": m.precision, "recall": m.recall, "f1": m.f1}
                for label, m in self.per_class.items()
            },
            "micro": {"precision": self.micro_precision, "recall": self.micro_recall,
                      "f1": self.micro_f1},
        }


def _f1(precision: float, recall: float) -> float:
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def _report_from_confusion(confusion: np.ndarray) -> EvalReport:
    per_class: dict[Label, ClassMetrics] = {}
    tp_sum = fp_sum = fn_sum = 0
    for label in EMOTION_CLASSES:
        k = LABEL_TO_INDEX[label]
        tp = int(confusion[k, k])
        fp = int(confusion[:, k].sum() - tp)
        fn = int(confusion[k, :].sum() - tp)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        per_class[label] = ClassMetrics(precision, recall, _f1(precision, recall))
        tp_sum += tp
        fp_sum += fp
        fn_sum += fn
    micro_p = tp_sum / (tp_sum + fp_sum) if tp_sum + fp_sum else 0.0
    micro_r = tp_sum / (tp_sum + fn_sum) if tp_sum + fn_sum else 0.0
    return EvalReport(confusion=tuple(tuple(int(v) for v in row) for row in confusion),
                      per_class=per_class, micro_precision=micro_p, micro_recall=micro_r,
                      micro_f1=_f1(micro_p, micro_r), examples=int(confusion.sum()))


def _confusion_from_ints(gold: np.ndarray, pred: np.ndarray) -> np.ndarray:
    return np.bincount(gold * 4 + pred, minlength=16).reshape(4, 4)


def _micro_f1_from_ints(gold: np.ndarray, pred: np.ndarray) -> float:
    confusion = _confusion_from_ints(gold, pred)
    tp = sum(int(confusion[k, k]) for k in range(3))
    fp = sum(int(confusion[:, k].sum() - confusion[k, k]) for k in range(3))
    fn = sum(int(confusion[k, :].sum() - confusion[k, k]) for k in range(3))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    return _f1(precision, recall)


def _as_label_ints(labels) -> np.ndarray:
    return np.asarray([LABEL_TO_INDEX[lab] if isinstance(lab, Label) else int(lab)
                       for lab in labels], dtype=np.int64)


def micro_f1(golds, preds) -> EvalReport:
    """Score predictions against gold labels (SemEval-style micro average)."""
    gold = _as_label_ints(golds)
    pred = _as_label_ints(preds)
    if len(gold) != len(pred):
        raise LengthMismatch(len(gold), len(pred))
    if len(gold) == 0:
        raise EmptyInput("cannot evaluate an empty prediction list")
    return _report_from_confusion(_confusion_from_ints(gold, pred))


@dataclass(frozen=True)
class Thresholds:
    """Per-emotion probability cutoffs deciding emotion vs others."""

    happy: float
    sad: float
    angry: float

    def __post_init__(self):
        for name in ("happy", "sad", "angry"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} threshold {value} outside [0, 1]")

    def as_array(self) -> np.ndarray:
        return np.array([self.happy, self.sad, self.angry])

    def to_dict(self) -> dict:
        return {"format": "convemo-thresholds", "version": 1,
                "happy": self.happy, "sad": self.sad, "angry": self.angry}

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> "Thresholds":
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        try:
            return cls(happy=float(doc["happy"]), sad=float(doc["sad"]),
                       angry=float(doc["angry"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed thresholds file {path}: {exc}") from None


def apply_thresholds(proba, thresholds: Thresholds) -> Label:
    """Pick the most probable emotion among those clearing their
    threshold; fall back to Others when none does.

    Probability ties break in fixed class order (happy, sad, angry).
    """
    p = np.asarray(proba, dtype=np.float64)
    cut = thresholds.as_array()
    candidates = p[:3] >= cut
    if not candidates.any():
        return Label.OTHERS
    masked = np.where(candidates, p[:3], -1.0)
    return CLASS_ORDER[int(np.argmax(masked))]


def apply_thresholds_batch(probas: np.ndarray, thresholds: Thresholds) -> np.ndarray:
    """Vectorized apply_thresholds; returns class indices."""
    p = np.asarray(probas, dtype=np.float64)
    candidates = p[:, :3] >= thresholds.as_array()
    masked = np.where(candidates, p[:, :3], -1.0)
    picks = np.argmax(masked, axis=1)
    picks[~candidates.any(axis=1)] = _OTHERS_INDEX
    return picks


def argmax_labels(probas: np.ndarray) -> np.ndarray:
    """Plain argmax over all four classes; returns class indices."""
    return np.argmax(np.asarray(probas, dtype=np.float64), axis=1)


def tune_thresholds(probas, golds, step: float = 0.01) -> Thresholds:
    """Coordinate ascent for the three thresholds on a fixed grid.

    Starts from (0, 0, 0), sweeps the classes in fixed order over the
    grid {0, step, ..., 1}, keeps the smallest threshold on score ties,
    and stops when a full sweep brings no micro-F1 improvement.  The
    result is never worse than the all-zeros baseline.
    """
    probas = np.asarray(probas, dtype=np.float64)
    gold = _as_label_ints(golds)
    if probas.ndim != 2 or probas.shape[1] != 4:
        raise DataError("probas must be an (n, 4) array")
    if len(gold) != len(probas):
        raise LengthMismatch(len(gold), len(probas))
    if len(gold) == 0:
        raise EmptyInput("cannot tune thresholds without data")
    steps = max(1, int(round(1.0 / step)))
    grid = [i / steps for i in range(steps + 1)]

    current = [0.0, 0.0, 0.0]
    best_f1 = _micro_f1_from_ints(
        gold, apply_thresholds_batch(probas, Thresholds(*current)))
    improved = True
    while improved:
        improved = False
        for class_pos in range(3):
            sweep_best_f1 = None
            sweep_best_value = None
            for value in grid:
                trial = list(current)
                trial[class_pos] = value
                f1 = _micro_f1_from_ints(
                    gold, apply_thresholds_batch(probas, Thresholds(*trial)))
                if sweep_best_f1 is None or f1 > sweep_best_f1:
                    sweep_best_f1 = f1
                    sweep_best_value = value
            if sweep_best_f1 > best_f1:
                best_f1 = sweep_best_f1
                current[class_pos] = sweep_best_value
                improved = True
    return Thresholds(*current)


def write_predictions(path: str | Path, ids, labels) -> None:
    """Submission format: ``id<TAB>label`` rows, no header."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for conv_id, label in zip(ids, labels):
            name = label.value if isinstance(label, Label) else CLASS_ORDER[int(label)].value
            fh.write(f"{conv_id}\t{name}\n")


def read_predictions(path: str | Path) -> list[tuple[str, Label]]:
    rows: list[tuple[str, Label]] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, raw_line in enumerate(fh, start=1):
            line = raw_line.rstrip("\n").rstrip("\r")
            if line == "":
                continue
            fields = line.split("\t")
            if line_no == 1 and fields[0].strip().lower() == "id":
                continue
            if len(fields) != 2:
                raise DataError(f"predictions line {line_no}: expected 2 columns, "
                                f"got {len(fields)}")
            rows.append((fields[0], parse_label(fields[1])))
    return rows


DEFAULT_ABLATIONS: tuple[tuple[str, tuple[str, ...], tuple[int, ...]], ...] = (
    tuple((f"drop_{group}", (group,), ()) for group in GROUP_ORDER)
    + (("drop_turn1", (), (1,)), ("drop_turn2", (), (2,)), ("drop_turn12", (), (1, 2)))
)


@dataclass(frozen=True)
class AblationRow:
    name: str
    dropped_groups: tuple[str, ...]
    dropped_turns: tuple[int, ...]
    dropped_columns: int
    remaining_columns: int
    micro_f1: float
    f1_happy: float
    f1_sad: float
    f1_angry: float
    gain: float


@dataclass(frozen=True)
class AblationReport:
    full_columns: int
    full_micro_f1: float
    full_f1: dict[Label, float]
    rows: tuple[AblationRow, ...]

    def to_dict(self) -> dict:
        return {
            "format": "convemo-ablation",
            "version": 1,
            "full": {"columns": self.full_columns, "micro_f1": self.full_micro_f1,
                     "f1": {label.value: v for label, v in self.full_f1.items()}},
            "rows": [{
                "name": row.name,
                "dropped_groups": list(row.dropped_groups),
                "dropped_turns": list(row.dropped_turns),
                "dropped_columns": row.dropped_columns,
                "remaining_columns": row.remaining_columns,
                "micro_f1": row.micro_f1,
                "f1_happy": row.f1_happy, "f1_sad": row.f1_sad, "f1_angry": row.f1_angry,
                "gain": row.gain,
            } for row in self.rows],
        }


def _train_and_score(X_train, y_train, X_eval, y_eval, params, model_kind,
                     logreg_kwargs) -> EvalReport:
    if model_kind == "logreg":
        kwargs = dict(logreg_kwargs or {})
        model = train_logreg(X_train, y_train, **kwargs)
    else:
        model = train_gbdt(X_train, y_train, params)
    proba = model_mod.predict_proba_matrix(model, X_eval)
    return micro_f1(y_eval, argmax_labels(proba))


def ablate(space: FeatureSpace, X_train: sp.spmatrix, y_train, X_eval: sp.spmatrix,
           y_eval, params: GbdtParams | None = None, *, model_kind: str = "gbdt",
           logreg_kwargs: dict | None = None, ablations=DEFAULT_ABLATIONS,
           threads: int = 1) -> AblationReport:
    """Hold-one-out ablation: retrain with each group / turn mask dropped.

    The training recipe (space, params, seed) is fixed across rows; each
    row reports the remaining column count, micro F1, per-class F1 and
    the F1 gain of the dropped features (full minus dropped).  Rows are
    evaluated with the plain 4-class argmax rule.
    """
    if params is None:
        params = GbdtParams()
    y_train = _as_label_ints(y_train)
    y_eval = _as_label_ints(y_eval)
    full_report = _train_and_score(X_train, y_train, X_eval, y_eval, params,
                                   model_kind, logreg_kwargs)
    total = space.dimension

    def run_row(spec) -> AblationRow:
        name, groups, turns = spec
        keep = space.kept_indices(drop_groups=groups, drop_turns=turns)
        report = _train_and_score(X_train.tocsr()[:, keep], y_train,
                                  X_eval.tocsr()[:, keep], y_eval, params,
                                  model_kind, logreg_kwargs)
        return AblationRow(
            name=name, dropped_groups=tuple(groups), dropped_turns=tuple(turns),
            dropped_columns=total - len(keep), remaining_columns=len(keep),
            micro_f1=report.micro_f1,
            f1_happy=report.per_class[Label.HAPPY].f1,
            f1_sad=report.per_class[Label.SAD].f1,
            f1_angry=report.per_class[Label.ANGRY].f1,
            gain=full_report.micro_f1 - report.micro_f1,
        )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = tuple(pool.map(run_row, ablations))
    else:
        rows = tuple(run_row(spec) for spec in ablations)

    return AblationReport(
        full_columns=total,
        full_micro_f1=full_report.micro_f1,
        full_f1={label: full_report.per_class[label].f1 for label in EMOTION_CLASSES},
        rows=rows,
    )


def format_ablation_table(report: AblationReport) -> str:
    """Aligned text rendering of an ablation report."""
    header = f"{'row':<18}{'dropped':>9}{'kept':>9}{'micro F1':>10}" \
             f"{'happy':>8}{'sad':>8}{'angry':>8}{'gain':>8}"
    lines = [header, "-" * len(header)]
    lines.append(f"{'full':<18}{0:>9}{report.full_columns:>9}{report.full_micro_f1:>10.4f}"
                 f"{report.full_f1[Label.HAPPY]:>8.4f}{report.full_f1[Label.SAD]:>8.4f}"
                 f"{report.full_f1[Label.ANGRY]:>8.4f}{0.0:>8.4f}")
    for row in report.rows:
        lines.append(f"{row.name:<18}{row.dropped_columns:>9}{row.remaining_columns:>9}"
                     f"{row.micro_f1:>10.4f}{row.f1_happy:>8.4f}{row.f1_sad:>8.4f}"
                     f"{row.f1_angry:>8.4f}{row.gain:>8.4f}")
    return "\n".join(lines)
