"""Experiment harness: fold plans, classification reports, label correlations,
and the ablation table.

Metrics work on plain dicts keyed by item id (any hashable: a tweet id, a
mention id, an args tuple), so the same code scores solver outputs, annotation
files, and hand-built fixtures. Anything that needs a trained model
(cross_validate, ablation_run) delegates to the training module and only
aggregates here.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from .inference import BOOLEAN_LABELS
from .rules import RuleProgram

BASE_RULE_IDS = ("r0", "r1", "r2", "r3", "r4")


class EvaluationError(ValueError):
    pass


class IdMismatch(EvaluationError):
    """Predictions and gold must cover exactly the same item ids."""


# ---------------------------------------------------------------------------
# fold plans

@dataclass(frozen=True)
class FoldPlan:
    """Train/test id lists per fold; folds partition the item set."""

    folds: tuple[tuple[tuple, tuple], ...]  # ((train_ids, test_ids), ...)
    seed: int

    def __post_init__(self):
        all_test = [i for _tr, te in self.folds for i in te]
        if len(all_test) != len(set(all_test)):
            raise EvaluationError("fold test sets overlap")
        if len(self.folds) > 1:
            universe = set(all_test)
            sizes = [len(te) for _tr, te in self.folds]
            if max(sizes) - min(sizes) > 1:
                raise EvaluationError("fold sizes differ by more than 1")
            for train, test in self.folds:
                if set(train) & set(test):
                    raise EvaluationError("a fold's train and test sets overlap")
                if set(train) | set(test) != universe:
                    raise EvaluationError("folds do not partition the item set")

    @property
    def n_folds(self) -> int:
        return len(self.folds)


def make_folds(item_ids, n_folds: int = 5, seed: int = 0) -> FoldPlan:
    """Shuffle ids with the given seed and split into near-equal folds.

    Ids are sorted before shuffling, so membership depends only on the id
    set and the seed, not on input order.
    """
    ids = sorted(set(item_ids))
    if n_folds < 2:
        raise EvaluationError("need at least 2 folds (use smoke_plan for in-sample runs)")
    if n_folds > len(ids):
        raise EvaluationError(f"{n_folds} folds over {len(ids)} items")
    rng = np.random.default_rng(seed)
    order = [ids[i] for i in rng.permutation(len(ids))]
    chunks = [list(c) for c in np.array_split(np.arange(len(order)), n_folds)]
    folds = []
    for chunk in chunks:
        test = tuple(order[i] for i in chunk)
        test_set = set(test)
        train = tuple(i for i in order if i not in test_set)
        folds.append((train, test))
    return FoldPlan(tuple(folds), seed)


def smoke_plan(item_ids) -> FoldPlan:
    """One fold with train == test: in-sample evaluation for quick checks."""
    ids = tuple(sorted(set(item_ids)))
    return FoldPlan(((ids, ids),), seed=0)


# ---------------------------------------------------------------------------
# classification reports

@dataclass(frozen=True)
class LabelMetrics:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class MetricReport:
    labels: tuple[str, ...]
    per_label: dict[str, LabelMetrics]
    macro_f1: float
    weighted_f1: float
    n_items: int

    def csv_rows(self):
        rows = [("label", "precision", "recall", "f1", "support")]
        for lab in self.labels:
            m = self.per_label[lab]
            rows.append((lab, f"{m.precision:.6f}", f"{m.recall:.6f}",
                         f"{m.f1:.6f}", str(m.support)))
        rows.append(("macro_f1", "", "", f"{self.macro_f1:.6f}", str(self.n_items)))
        rows.append(("weighted_f1", "", "", f"{self.weighted_f1:.6f}", str(self.n_items)))
        return rows

    def to_json(self) -> str:
        return json.dumps({
            "labels": list(self.labels),
            "per_label": {lab: vars(m) for lab, m in self.per_label.items()},
            "macro_f1": self.macro_f1,
            "weighted_f1": self.weighted_f1,
            "n_items": self.n_items,
        }, indent=2, sort_keys=True)


def _as_label(value) -> str:
    if isinstance(value, bool):
        return "True" if value else "False"
    return value


def f1_report(predictions: dict, gold: dict, label_space) -> MetricReport:
    """Per-label precision/recall/F1 plus macro and support-weighted F1.

    Labels missing from both sides still appear (F1 0, support 0): they count
    in the macro average but drop out of the weighted one.
    """
    if set(predictions) != set(gold):
        missing = set(gold) - set(predictions)
        extra = set(predictions) - set(gold)
        raise IdMismatch(f"id sets differ (missing={len(missing)}, extra={len(extra)})")
    labels = tuple(label_space)
    known = set(labels)
    pairs = []
    for item in gold:
        p, g = _as_label(predictions[item]), _as_label(gold[item])
        if p not in known:
            raise EvaluationError(f"predicted label {p!r} outside {labels}")
        if g not in known:
            raise EvaluationError(f"gold label {g!r} outside {labels}")
        pairs.append((p, g))
    per_label = {}
    for lab in labels:
        tp = sum(1 for p, g in pairs if p == lab and g == lab)
        fp = sum(1 for p, g in pairs if p == lab and g != lab)
        fn = sum(1 for p, g in pairs if p != lab and g == lab)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        per_label[lab] = LabelMetrics(precision, recall, f1, tp + fn)
    macro = sum(m.f1 for m in per_label.values()) / len(labels)
    total_support = sum(m.support for m in per_label.values())
    weighted = (sum(m.support * m.f1 for m in per_label.values()) / total_support
                if total_support else 0.0)
    return MetricReport(labels, per_label, macro, weighted, len(pairs))


def write_report_csv(report: MetricReport, path) -> None:
    with open(path, "w", newline="") as fh:
        csv.writer(fh).writerows(report.csv_rows())


# ---------------------------------------------------------------------------
# correlation matrices

@dataclass(frozen=True)
class CorrelationMatrix:
    row_labels: tuple[str, ...]
    col_labels: tuple[str, ...]
    r: np.ndarray  # (rows, cols); NaN marks a zero-variance pairing
    n_items: int

    @property
    def flagged(self) -> tuple[tuple[str, str], ...]:
        """Cells where a column had zero variance, left NaN on purpose."""
        out = []
        for i, row in enumerate(self.row_labels):
            for j, col in enumerate(self.col_labels):
                if math.isnan(self.r[i, j]):
                    out.append((row, col))
        return tuple(out)

    def cell(self, row: str, col: str) -> float:
        return float(self.r[self.row_labels.index(row), self.col_labels.index(col)])

    def csv_rows(self):
        rows = [("row", "col", "r")]
        for i, row in enumerate(self.row_labels):
            for j, col in enumerate(self.col_labels):
                v = self.r[i, j]
                rows.append((row, col, "nan" if math.isnan(v) else f"{v:.6f}"))
        return rows

    def to_json(self) -> str:
        return json.dumps({
            "row_labels": list(self.row_labels),
            "col_labels": list(self.col_labels),
            "r": [[None if math.isnan(v) else v for v in row] for row in self.r],
            "n_items": self.n_items,
        }, indent=2)


def pearson_r(x, y) -> float:
    """Pearson correlation of two equal-length vectors; NaN if either is constant."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise EvaluationError("pearson_r needs two equal-length vectors")
    xc = x - x.mean()
    yc = y - y.mean()
    denom = math.sqrt(float(xc @ xc)) * math.sqrt(float(yc @ yc))
    if denom == 0.0:
        return float("nan")
    r = float(xc @ yc) / denom
    return max(-1.0, min(1.0, r))


def pearson_matrix(labels_a: dict, labels_b: dict,
                   rows=None, cols=None) -> CorrelationMatrix:
    """Pearson r between the one-hot indicator columns of two labelings.

    Restricted to the ids both sides labeled (at least 2 required). A label
    that never varies on the shared set yields NaN in its cells; NaN is kept
    and surfaced via ``flagged`` rather than imputed.
    """
    shared = sorted(set(labels_a) & set(labels_b))
    if len(shared) < 2:
        raise EvaluationError("need at least 2 items labeled on both dimensions")
    row_labels = tuple(rows) if rows is not None else tuple(
        sorted({_as_label(labels_a[i]) for i in shared}))
    col_labels = tuple(cols) if cols is not None else tuple(
        sorted({_as_label(labels_b[i]) for i in shared}))
    a_col = {lab: np.array([1.0 if _as_label(labels_a[i]) == lab else 0.0 for i in shared])
             for lab in row_labels}
    b_col = {lab: np.array([1.0 if _as_label(labels_b[i]) == lab else 0.0 for i in shared])
             for lab in col_labels}
    r = np.empty((len(row_labels), len(col_labels)))
    for i, ra in enumerate(row_labels):
        for j, cb in enumerate(col_labels):
            r[i, j] = pearson_r(a_col[ra], b_col[cb])
    return CorrelationMatrix(row_labels, col_labels, r, len(shared))


def write_correlation_csv(matrix: CorrelationMatrix, path) -> None:
    with open(path, "w", newline="") as fh:
        csv.writer(fh).writerows(matrix.csv_rows())


# ---------------------------------------------------------------------------
# cross-validation and ablations

def task_label_space(program: RuleProgram, predicate: str) -> tuple[str, ...]:
    space = program.space_of(predicate)
    return BOOLEAN_LABELS if space is None else tuple(space.values)


def split_by_task(labels: dict) -> dict[str, dict]:
    """Group a {(predicate, args): label} dict into per-predicate dicts."""
    out: dict[str, dict] = {}
    for (pred, args), value in labels.items():
        out.setdefault(pred, {})[args] = value
    return out


def task_reports(predictions: dict, gold: dict, program: RuleProgram) -> dict[str, MetricReport]:
    """One MetricReport per decision predicate present in the gold labels."""
    pred_by_task = split_by_task(predictions)
    gold_by_task = split_by_task(gold)
    reports = {}
    for task in sorted(gold_by_task):
        space = task_label_space(program, task)
        task_preds = pred_by_task.get(task, {})
        task_preds = {k: task_preds[k] for k in gold_by_task[task] if k in task_preds}
        reports[task] = f1_report(task_preds, gold_by_task[task], space)
    return reports


@dataclass(frozen=True)
class FoldOutcome:
    fold: int
    reports: dict[str, MetricReport]
    predictions: dict


@dataclass(frozen=True)
class CrossValidation:
    folds: tuple[FoldOutcome, ...]
    pooled: dict[str, MetricReport]  # over predictions pooled across folds

    def weighted_f1(self, task: str) -> float:
        return self.pooled[task].weighted_f1

    def summary_rows(self):
        rows = [("task", "macro_f1", "weighted_f1", "n_items")]
        for task in sorted(self.pooled):
            rep = self.pooled[task]
            rows.append((task, f"{rep.macro_f1:.6f}", f"{rep.weighted_f1:.6f}",
                         str(rep.n_items)))
        return rows


def cross_validate(corpus, program: RuleProgram, config, plan: FoldPlan, *,
                   distant=None, store=None, run_dir=None) -> CrossValidation:
    """Train on each fold's train split, predict its test split, then pool.

    The pooled report concatenates test predictions from every fold and
    scores them in one pass, so each item is counted exactly once. ``corpus``
    is an AnnotatedCorpus; ``config`` an EMConfig; ``distant`` optional
    DistantCorpora applied before the EM loop on every fold.
    """
    from . import training  # local import: training pulls metrics from here

    outcomes = []
    pooled_preds: dict = {}
    pooled_gold: dict = {}
    for fold_no, (train_ids, test_ids) in enumerate(plan.folds):
        train_corpus = corpus.subset(train_ids)
        test_corpus = corpus.subset(test_ids)
        fold_dir = None
        if run_dir is not None:
            fold_dir = _fold_dir(run_dir, fold_no)
        suite = training.initial_suite(program, config, store=store,
                                       reasons=corpus.reason_ids())
        if distant is not None:
            suite = training.init_distant(suite, distant, program, config)
        suite, _trace = training.em_train(program, train_corpus, suite, config,
                                          run_dir=fold_dir)
        preds = training.predict(program, test_corpus, suite)
        reports = task_reports(preds.labels, test_corpus.gold, program)
        outcomes.append(FoldOutcome(fold_no, reports, dict(preds.labels)))
        for key, value in preds.labels.items():
            if key in test_corpus.gold:
                pooled_preds[key] = value
        pooled_gold.update(test_corpus.gold)
    pooled = task_reports(pooled_preds, pooled_gold, program)
    cv = CrossValidation(tuple(outcomes), pooled)
    if run_dir is not None:
        _write_cv_reports(cv, run_dir)
    return cv


def _fold_dir(run_dir, fold_no: int):
    import os
    path = os.path.join(str(run_dir), f"fold{fold_no}")
    os.makedirs(path, exist_ok=True)
    return path


def _write_cv_reports(cv: CrossValidation, run_dir) -> None:
    import os
    reports_dir = os.path.join(str(run_dir), "reports")
    os.makedirs(reports_dir, exist_ok=True)
    for task, report in cv.pooled.items():
        write_report_csv(report, os.path.join(reports_dir, f"{task}.csv"))
        with open(os.path.join(reports_dir, f"{task}.json"), "w") as fh:
            fh.write(report.to_json())


def default_ablation_subsets(program: RuleProgram):
    """Named rule subsets: the base classifiers, then each coupling on top."""
    base = BASE_RULE_IDS
    every = tuple(t.id for t in program.templates) + tuple(
        c.id for c in program.constraints)
    rows = [
        ("base", base),
        ("+RoleMF", base + ("r5",)),
        ("+MC", base + ("c0", "c1")),
        ("+StanceMF", base + ("r6",)),
        ("+ReasonMF", base + ("r7", "r8")),
        ("+ALL", every),
    ]
    return tuple((name, tuple(i for i in ids if i in every)) for name, ids in rows)


def ablation_run(corpus, program: RuleProgram, subsets, config, plan: FoldPlan, *,
                 distant=None, store=None, run_dir=None) -> dict[str, CrossValidation]:
    """One cross-validation per rule subset, keyed by the subset's name.

    Every subset must keep the base rules r0-r4 so each task still has a
    classifier attached.
    """
    results: dict[str, CrossValidation] = {}
    for name, ids in subsets:
        missing = [r for r in BASE_RULE_IDS if r not in ids]
        if missing:
            raise EvaluationError(f"subset {name!r} drops base rules {missing}")
        sub = program.subset(ids)
        cell_dir = None
        if run_dir is not None:
            import os
            cell_dir = os.path.join(str(run_dir), name.replace("+", "plus_"))
            os.makedirs(cell_dir, exist_ok=True)
        results[name] = cross_validate(corpus, sub, config, plan, distant=distant,
                                       store=store, run_dir=cell_dir)
    return results


def ablation_table(results: dict[str, CrossValidation], task: str = "HasMF"):
    rows = [("subset", f"{task}_weighted_f1")]
    for name, cv in results.items():
        rows.append((name, f"{cv.weighted_f1(task):.6f}"))
    return rows
