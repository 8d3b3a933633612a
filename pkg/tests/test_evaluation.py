import json
import math
from collections import Counter

import numpy as np
import pytest

from opinionlab.evaluation import (
    BASE_RULE_IDS,
    CorrelationMatrix,
    CrossValidation,
    EvaluationError,
    FoldPlan,
    IdMismatch,
    MetricReport,
    ablation_run,
    ablation_table,
    cross_validate,
    default_ablation_subsets,
    f1_report,
    make_folds,
    pearson_matrix,
    pearson_r,
    smoke_plan,
    split_by_task,
    task_label_space,
    task_reports,
    write_correlation_csv,
    write_report_csv,
)
from opinionlab.rules import default_program


def report_oracle(predictions, gold, labels):
    """Recompute the report from a (gold, pred) pair counter.

    Shares no loop structure with f1_report: counts every pair once, then
    reads TP/FP/FN off the counter.
    """
    def norm(v):
        return "True" if v is True else "False" if v is False else v

    pairs = Counter((norm(gold[k]), norm(predictions[k])) for k in gold)
    out = {}
    for lab in labels:
        tp = pairs[(lab, lab)]
        fp = sum(c for (g, p), c in pairs.items() if p == lab and g != lab)
        fn = sum(c for (g, p), c in pairs.items() if g == lab and p != lab)
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        out[lab] = (prec, rec, f1, tp + fn)
    macro = sum(v[2] for v in out.values()) / len(labels)
    total = sum(v[3] for v in out.values())
    weighted = sum(v[2] * v[3] for v in out.values()) / total if total else 0.0
    return out, macro, weighted


def pearson_oracle(x, y):
    """Raw-moment form of Pearson r: (nSxy - SxSy) / sqrt(...) ; nan if degenerate."""
    n = len(x)
    sx, sy = sum(x), sum(y)
    sxx = sum(v * v for v in x)
    syy = sum(v * v for v in y)
    sxy = sum(a * b for a, b in zip(x, y))
    den = math.sqrt(n * sxx - sx * sx) * math.sqrt(n * syy - sy * sy)
    if den == 0.0:
        return float("nan")
    return max(-1.0, min(1.0, (n * sxy - sx * sy) / den))


# ---------------------------------------------------------------------------
# fold plans

def test_make_folds_partitions():
    ids = [f"t{i}" for i in range(23)]
    plan = make_folds(ids, n_folds=5, seed=3)
    assert plan.n_folds == 5
    tests = [te for _tr, te in plan.folds]
    flat = [i for te in tests for i in te]
    assert sorted(flat) == sorted(ids)
    sizes = [len(te) for te in tests]
    assert max(sizes) - min(sizes) <= 1
    for train, test in plan.folds:
        assert not set(train) & set(test)
        assert sorted(set(train) | set(test)) == sorted(ids)


def test_make_folds_deterministic_and_order_free():
    ids = [f"t{i}" for i in range(40)]
    a = make_folds(ids, n_folds=4, seed=9)
    b = make_folds(list(reversed(ids)), n_folds=4, seed=9)
    assert a == b
    rng = np.random.default_rng(0)
    shuffled = [ids[i] for i in rng.permutation(len(ids))]
    assert make_folds(shuffled, n_folds=4, seed=9) == a


def test_make_folds_seed_changes_assignment():
    ids = [f"t{i}" for i in range(30)]
    assert make_folds(ids, seed=0) != make_folds(ids, seed=1)


def test_make_folds_rejects_bad_counts():
    with pytest.raises(EvaluationError):
        make_folds(["a", "b", "c"], n_folds=1)
    with pytest.raises(EvaluationError):
        make_folds(["a", "b", "c"], n_folds=4)


def test_smoke_plan_is_in_sample():
    plan = smoke_plan(["b", "a", "c"])
    assert plan.folds == ((("a", "b", "c"), ("a", "b", "c")),)


def test_fold_plan_validation():
    with pytest.raises(EvaluationError):  # test sets overlap
        FoldPlan(((("a",), ("b", "c")), (("b",), ("c", "a"))), seed=0)
    with pytest.raises(EvaluationError):  # sizes differ by 2
        FoldPlan(((("a", "b", "c"), ("d", "e", "f")), (("d", "e", "f"), ("a",))), seed=0)
    with pytest.raises(EvaluationError):  # train leaks into test
        FoldPlan(((("a", "b"), ("b", "c")), (("b", "c"), ("a", "d"))), seed=0)
    with pytest.raises(EvaluationError):  # train misses part of the universe
        FoldPlan(((("a",), ("c", "d")), (("c", "d"), ("a", "b"))), seed=0)


# ---------------------------------------------------------------------------
# classification reports

def test_f1_report_perfect():
    gold = {i: lab for i, lab in enumerate("AABBC")}
    rep = f1_report(dict(gold), gold, ("A", "B", "C"))
    assert rep.macro_f1 == 1.0
    assert rep.weighted_f1 == 1.0
    assert rep.n_items == 5
    for lab in "ABC":
        assert rep.per_label[lab].f1 == 1.0


def test_f1_report_hand_counts():
    # label A: TP=2, FP=1, FN=1 -> P=R=F1=2/3; label B: TP=0 -> F1=0
    gold = {1: "A", 2: "A", 3: "A", 4: "B"}
    preds = {1: "A", 2: "A", 3: "B", 4: "A"}
    rep = f1_report(preds, gold, ("A", "B"))
    a = rep.per_label["A"]
    assert a.precision == pytest.approx(2 / 3)
    assert a.recall == pytest.approx(2 / 3)
    assert a.f1 == pytest.approx(2 / 3)
    assert a.support == 3
    assert rep.per_label["B"].f1 == 0.0
    assert rep.per_label["B"].support == 1
    assert rep.macro_f1 == pytest.approx((2 / 3) / 2)
    assert rep.weighted_f1 == pytest.approx((3 * 2 / 3 + 0) / 4)


def test_f1_report_three_label_confusion():
    # gold A x4 (pred A,A,A,B), gold B x4 (pred B,B,C,C), gold C x4 (all C)
    gold = {}
    preds = {}
    for i, (g, p) in enumerate([("A", "A"), ("A", "A"), ("A", "A"), ("A", "B"),
                                ("B", "B"), ("B", "B"), ("B", "C"), ("B", "C"),
                                ("C", "C"), ("C", "C"), ("C", "C"), ("C", "C")]):
        gold[i], preds[i] = g, p
    rep = f1_report(preds, gold, ("A", "B", "C"))
    # A: P=3/3, R=3/4, F1=6/7. B: P=2/3, R=2/4, F1=4/7. C: P=4/6, R=4/4, F1=4/5.
    assert rep.per_label["A"].f1 == pytest.approx(6 / 7)
    assert rep.per_label["B"].f1 == pytest.approx(4 / 7)
    assert rep.per_label["C"].f1 == pytest.approx(4 / 5)
    assert rep.macro_f1 == pytest.approx((6 / 7 + 4 / 7 + 4 / 5) / 3)
    assert rep.weighted_f1 == pytest.approx((6 / 7 + 4 / 7 + 4 / 5) * 4 / 12)


def test_f1_report_matches_oracle_on_random_fixtures():
    rng = np.random.default_rng(42)
    labels = ("A", "B", "C", "D")
    for _ in range(100):
        n = int(rng.integers(2, 60))
        gold = {i: labels[int(rng.integers(4))] for i in range(n)}
        preds = {i: labels[int(rng.integers(4))] for i in range(n)}
        rep = f1_report(preds, gold, labels)
        per, macro, weighted = report_oracle(preds, gold, labels)
        for lab in labels:
            m = rep.per_label[lab]
            prec, rec, f1, support = per[lab]
            assert m.precision == pytest.approx(prec, abs=1e-9)
            assert m.recall == pytest.approx(rec, abs=1e-9)
            assert m.f1 == pytest.approx(f1, abs=1e-9)
            assert m.support == support
        assert rep.macro_f1 == pytest.approx(macro, abs=1e-9)
        assert rep.weighted_f1 == pytest.approx(weighted, abs=1e-9)


def test_f1_report_absent_label_counts_in_macro_only():
    gold = {1: "A", 2: "B", 3: "A", 4: "B"}
    rep = f1_report(dict(gold), gold, ("A", "B", "C"))
    assert rep.per_label["C"].f1 == 0.0
    assert rep.per_label["C"].support == 0
    assert rep.macro_f1 == pytest.approx(2 / 3)  # C drags the mean down
    assert rep.weighted_f1 == 1.0  # but has no weight


def test_f1_report_id_mismatch():
    with pytest.raises(IdMismatch):
        f1_report({1: "A"}, {1: "A", 2: "B"}, ("A", "B"))
    with pytest.raises(IdMismatch):
        f1_report({1: "A", 2: "B"}, {1: "A"}, ("A", "B"))


def test_f1_report_rejects_unknown_labels():
    with pytest.raises(EvaluationError):
        f1_report({1: "Z"}, {1: "A"}, ("A", "B"))
    with pytest.raises(EvaluationError):
        f1_report({1: "A"}, {1: "Z"}, ("A", "B"))


def test_f1_report_normalizes_bools():
    gold = {1: True, 2: False, 3: True}
    preds = {1: "True", 2: False, 3: True}
    rep = f1_report(preds, gold, ("False", "True"))
    assert rep.weighted_f1 == 1.0


def test_report_csv_and_json(tmp_path):
    gold = {1: "A", 2: "B"}
    rep = f1_report(dict(gold), gold, ("A", "B"))
    path = tmp_path / "rep.csv"
    write_report_csv(rep, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "label,precision,recall,f1,support"
    assert len(lines) == 1 + 2 + 2  # header, labels, macro + weighted rows
    blob = json.loads(rep.to_json())
    assert blob["macro_f1"] == 1.0
    assert blob["per_label"]["A"]["support"] == 1


# ---------------------------------------------------------------------------
# correlations

def test_pearson_r_basic_and_clipped():
    assert pearson_r([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0)
    assert pearson_r([1, 2, 3], [6, 4, 2]) == pytest.approx(-1.0)
    assert math.isnan(pearson_r([1, 1, 1], [1, 2, 3]))
    assert -1.0 <= pearson_r([1, 2, 3, 4], [1, 2, 3, 5]) <= 1.0


def test_pearson_r_affine_invariance():
    rng = np.random.default_rng(5)
    x = rng.normal(size=20)
    y = rng.normal(size=20)
    base = pearson_r(x, y)
    assert pearson_r(3.0 * x + 7.0, y) == pytest.approx(base, abs=1e-12)
    assert pearson_r(x, -2.0 * y + 1.0) == pytest.approx(-base, abs=1e-12)


def test_pearson_r_shape_errors():
    with pytest.raises(EvaluationError):
        pearson_r([1, 2], [1, 2, 3])
    with pytest.raises(EvaluationError):
        pearson_r([[1, 2]], [[1, 2]])


def test_pearson_matrix_identical_labelings():
    labels = {i: lab for i, lab in enumerate("AABBBACC")}
    m = pearson_matrix(labels, dict(labels))
    assert m.row_labels == m.col_labels == ("A", "B", "C")
    for lab in "ABC":
        assert m.cell(lab, lab) == pytest.approx(1.0)
    assert m.cell("A", "B") < 0  # indicators of disjoint labels anti-correlate


def test_pearson_matrix_matches_oracle_on_random_fixtures():
    rng = np.random.default_rng(17)
    for _ in range(100):
        n = int(rng.integers(5, 40))
        a = {i: "AB"[int(rng.integers(2))] for i in range(n)}
        b = {i: "XYZ"[int(rng.integers(3))] for i in range(n)}
        m = pearson_matrix(a, b)
        shared = sorted(set(a) & set(b))
        for i, ra in enumerate(m.row_labels):
            for j, cb in enumerate(m.col_labels):
                x = [1.0 if a[k] == ra else 0.0 for k in shared]
                y = [1.0 if b[k] == cb else 0.0 for k in shared]
                want = pearson_oracle(x, y)
                got = m.r[i, j]
                if math.isnan(want):
                    assert math.isnan(got)
                else:
                    assert got == pytest.approx(want, abs=1e-9)


def test_pearson_matrix_uses_shared_ids_only():
    a = {1: "A", 2: "A", 3: "B", 99: "B"}
    b = {1: "X", 2: "X", 3: "Y", 77: "Y"}
    m = pearson_matrix(a, b)
    assert m.n_items == 3
    assert m.cell("A", "X") == pytest.approx(1.0)


def test_pearson_matrix_requires_two_shared_items():
    with pytest.raises(EvaluationError):
        pearson_matrix({1: "A"}, {1: "X", 2: "Y"})


def test_pearson_matrix_nan_flagged_not_imputed(tmp_path):
    # "C" never occurs: its indicator has zero variance on the shared set
    a = {1: "A", 2: "A", 3: "B"}
    b = {1: "X", 2: "Y", 3: "X"}
    m = pearson_matrix(a, b, rows=("A", "B", "C"))
    assert ("C", "X") in m.flagged and ("C", "Y") in m.flagged
    assert math.isnan(m.cell("C", "X"))
    path = tmp_path / "corr.csv"
    write_correlation_csv(m, path)
    rows = [line.split(",") for line in path.read_text().strip().splitlines()]
    assert rows[0] == ["row", "col", "r"]
    by_key = {(r, c): v for r, c, v in rows[1:]}
    assert by_key[("C", "X")] == "nan"
    blob = json.loads(m.to_json())
    assert blob["r"][2][0] is None  # NaN serializes as null, not a number


# ---------------------------------------------------------------------------
# task plumbing

def test_split_by_task_groups_keys():
    labels = {("HasMF", ("t1",)): "Care/Harm", ("IsMoral", ("t1",)): True,
              ("HasMF", ("t2",)): "None"}
    by_task = split_by_task(labels)
    assert set(by_task) == {"HasMF", "IsMoral"}
    assert by_task["HasMF"] == {("t1",): "Care/Harm", ("t2",): "None"}


def test_task_label_space_boolean_fallback():
    prog = default_program()
    assert task_label_space(prog, "IsMoral") == ("False", "True")
    assert "Care/Harm" in task_label_space(prog, "HasMF")
    assert task_label_space(prog, "VaxStance") == ("Pro", "Anti", "Neutral")


def test_task_reports_per_predicate():
    prog = default_program()
    gold = {("IsMoral", ("t1",)): True, ("IsMoral", ("t2",)): False,
            ("VaxStance", ("t1",)): "Pro", ("VaxStance", ("t2",)): "Anti"}
    preds = dict(gold)
    preds[("VaxStance", ("t2",))] = "Pro"
    reports = task_reports(preds, gold, prog)
    assert reports["IsMoral"].weighted_f1 == 1.0
    assert reports["VaxStance"].weighted_f1 < 1.0
    assert reports["VaxStance"].n_items == 2


def test_task_reports_missing_prediction_raises():
    prog = default_program()
    gold = {("IsMoral", ("t1",)): True, ("IsMoral", ("t2",)): False}
    with pytest.raises(IdMismatch):
        task_reports({("IsMoral", ("t1",)): True}, gold, prog)


def test_task_reports_ignores_extra_predictions():
    prog = default_program()
    gold = {("IsMoral", ("t1",)): True}
    preds = {("IsMoral", ("t1",)): True, ("IsMoral", ("t9",)): False,
             ("HasMF", ("t9",)): "None"}
    reports = task_reports(preds, gold, prog)
    assert set(reports) == {"IsMoral"}
    assert reports["IsMoral"].n_items == 1


# ---------------------------------------------------------------------------
# ablation scaffolding

def test_default_ablation_subsets_cover_program():
    prog = default_program()
    subsets = dict(default_ablation_subsets(prog))
    assert set(subsets) == {"base", "+RoleMF", "+MC", "+StanceMF", "+ReasonMF", "+ALL"}
    for name, ids in subsets.items():
        for rid in BASE_RULE_IDS:
            assert rid in ids, f"{name} must keep {rid}"
    assert set(subsets["+ALL"]) == {t.id for t in prog.templates} | {
        c.id for c in prog.constraints}
    assert "r5" in subsets["+RoleMF"] and "r5" not in subsets["base"]
    assert set(subsets["+MC"]) - set(BASE_RULE_IDS) == {"c0", "c1"}


def test_ablation_run_rejects_subsets_missing_base_rules():
    prog = default_program()
    from opinionlab.training import EMConfig
    with pytest.raises(EvaluationError):
        ablation_run(None, prog, [("broken", ("r0", "r1", "r5"))], EMConfig(),
                     smoke_plan(["t1", "t2"]))


def test_ablation_table_formats_results():
    rep = f1_report({1: "A"}, {1: "A"}, ("A", "B"))
    cv = CrossValidation(folds=(), pooled={"HasMF": rep})
    rows = ablation_table({"base": cv, "+ALL": cv})
    assert rows[0] == ("subset", "HasMF_weighted_f1")
    assert ("base", "1.000000") in rows and ("+ALL", "1.000000") in rows
