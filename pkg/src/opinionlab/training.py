"""Low-supervision training: weak initialization from distant corpora, then
an alternating loop of exact inference (with a fraction of gold labels
clamped) and per-template local retraining.

The loop is deterministic given the config's rng seed: seeding, parameter
initialization, and the solver's tie-breaks are all derived from it or fixed.
"""

from __future__ import annotations

import csv
import math
import os
import warnings
from dataclasses import dataclass, field

import numpy as np

from .corpus import Tweet, embed
from .evaluation import task_reports
from .inference import BOOLEAN_LABELS, ScorerSuite, ground, solve_map
from .rules import RuleProgram
from .scorers import (GroundingContext, TrainConfig, featurize, random_params,
                      save_params, space_for_program, train_local)


class TrainingError(ValueError):
    pass


# ---------------------------------------------------------------------------
# annotated data

@dataclass(frozen=True)
class AnnotatedCorpus:
    """Tweets plus gold decision labels keyed like solver output:
    (predicate, args) -> label string, or bool for boolean predicates.
    ``reason_assignments`` (tweet id -> reason id) become observed facts."""

    tweets: tuple[Tweet, ...]
    gold: dict
    reason_assignments: dict = field(default_factory=dict)

    def __post_init__(self):
        owners = self._owner_map()
        for pred, args in self.gold:
            if not args or args[0] not in owners:
                raise TrainingError(f"gold atom {pred}{args} references an unknown id")

    def _owner_map(self) -> dict:
        owners = {t.id: t.id for t in self.tweets}
        for t in self.tweets:
            for m in t.mentions:
                owners[m.id] = t.id
        return owners

    def tweet_ids(self) -> tuple[str, ...]:
        return tuple(t.id for t in self.tweets)

    def reason_ids(self) -> tuple[str, ...]:
        return tuple(sorted(set(self.reason_assignments.values())))

    def task_gold(self, predicate: str) -> dict:
        return {args: v for (pred, args), v in self.gold.items() if pred == predicate}

    def subset(self, tweet_ids) -> "AnnotatedCorpus":
        keep = set(tweet_ids)
        tweets = tuple(t for t in self.tweets if t.id in keep)
        owners = {t.id: t.id for t in tweets}
        for t in tweets:
            for m in t.mentions:
                owners[m.id] = t.id
        gold = {(pred, args): v for (pred, args), v in self.gold.items()
                if args[0] in owners}
        reasons = {tid: r for tid, r in self.reason_assignments.items() if tid in keep}
        return AnnotatedCorpus(tweets, gold, reasons)


@dataclass(frozen=True)
class DistantCorpora:
    """Weakly labeled texts per base task. Tweet-level tasks hold (text,
    label) pairs; entity-level tasks hold (text, entity surface, label)."""

    morality: tuple = ()      # (text, "True" | "False")
    foundations: tuple = ()   # (text, moral foundation)
    stances: tuple = ()       # (text, stance)
    roles: tuple = ()         # (text, entity, role)
    polarities: tuple = ()    # (text, entity, polarity)


@dataclass(frozen=True)
class EMConfig:
    """Knobs for the alternating loop and the scorers underneath it."""

    seed_fraction: float = 0.25
    max_iters: int = 5
    convergence_tolerance: float = 0.01
    seed: int = 13
    scorer: TrainConfig = TrainConfig()
    hash_bits: int = 12
    embedding_dim: int = 0
    weight_mode: str = "log_softmax"
    refine_ties: bool = False  # E-steps only need one optimum, not the canonical one

    def __post_init__(self):
        if not 0.0 <= self.seed_fraction <= 1.0:
            raise TrainingError("seed_fraction must lie in [0, 1]")
        if self.max_iters < 1:
            raise TrainingError("max_iters must be >= 1")


def head_labels(program: RuleProgram, template) -> tuple[str, ...]:
    space = program.space_of(template.head.predicate)
    return BOOLEAN_LABELS if space is None else tuple(space.values)


def initial_suite(program: RuleProgram, config: EMConfig, *, store=None,
                  reasons=()) -> ScorerSuite:
    """Random small-scale parameters for every weighted template."""
    space = space_for_program(program, hash_bits=config.hash_bits,
                              embedding_dim=config.embedding_dim, reasons=reasons)
    params = {}
    for i, template in enumerate(sorted(program.templates, key=lambda t: t.id)):
        params[template.id] = random_params(
            template.id, head_labels(program, template), space.total_dim,
            seed=config.seed * 1000 + i)
    return ScorerSuite(space, params, store, config.weight_mode)


# ---------------------------------------------------------------------------
# distant initialization

_BASE_TASKS = (
    ("r0", "morality", False),
    ("r1", "foundations", False),
    ("r2", "stances", False),
    ("r3", "roles", True),
    ("r4", "polarities", True),
)


def init_distant(suite: ScorerSuite, corpora: DistantCorpora,
                 program: RuleProgram, config: EMConfig) -> ScorerSuite:
    """Train the base-rule scorers on the weak corpora; leave the rest alone.

    A base rule with an empty corpus keeps its random initialization (with a
    warning): the loop can still recover it from inferred labels later.
    """
    templates = {t.id: t for t in program.templates}
    params = dict(suite.params)
    for rule_id, fieldname, with_entity in _BASE_TASKS:
        template = templates.get(rule_id)
        if template is None:
            continue
        rows = getattr(corpora, fieldname)
        if not rows:
            warnings.warn(f"no distant corpus for {rule_id} ({fieldname}); "
                          f"leaving its random initialization")
            continue
        labels = head_labels(program, template)
        examples = []
        for row in rows:
            text, entity, label = (row if with_entity else (row[0], None, row[1]))
            if label not in labels:
                raise TrainingError(f"distant label {label!r} outside {labels} "
                                    f"for {rule_id}")
            ctx = GroundingContext(
                tweet_text=text, entity_surface=entity,
                embedding=(embed(text, suite.store)
                           if suite.space.embedding_dim else None))
            examples.append((featurize(suite.space, template, ctx, program.schema),
                             label))
        params[rule_id], _ = train_local(rule_id, examples, labels,
                                         suite.space.total_dim, config.scorer)
    return ScorerSuite(suite.space, params, suite.store, suite.weight_mode)


# ---------------------------------------------------------------------------
# seeding

def seed_labels(gold: dict, k: float, rng) -> dict:
    """Clamp set: ⌊k·N⌋ items per task, stratified by label where possible.

    Stratification uses largest-remainder quotas over the label counts, so a
    label never contributes more seeds than it has items; sampling within a
    label group is uniform without replacement.
    """
    if not 0.0 <= k <= 1.0:
        raise TrainingError("seed fraction must lie in [0, 1]")
    seeds: dict = {}
    by_task: dict[str, list] = {}
    for key in gold:
        by_task.setdefault(key[0], []).append(key)
    for task in sorted(by_task):
        keys = sorted(by_task[task])
        quota = math.floor(k * len(keys) + 1e-9)
        if quota == 0:
            continue
        groups: dict = {}
        for key in keys:
            groups.setdefault(str(gold[key]), []).append(key)
        names = sorted(groups)
        shares = {g: quota * len(groups[g]) / len(keys) for g in names}
        take = {g: math.floor(shares[g]) for g in names}
        leftover = quota - sum(take.values())
        for g in sorted(names, key=lambda g: (-(shares[g] - take[g]), g)):
            if leftover == 0:
                break
            if take[g] < len(groups[g]):
                take[g] += 1
                leftover -= 1
        for g in names:
            chosen = rng.choice(len(groups[g]), size=take[g], replace=False)
            for i in sorted(int(c) for c in chosen):
                key = groups[g][i]
                seeds[key] = gold[key]
    return seeds


# ---------------------------------------------------------------------------
# the loop

@dataclass(frozen=True)
class TraceRow:
    iteration: int
    label_change_fraction: float
    map_objective: float
    holdout_f1: dict = field(default_factory=dict)  # task -> weighted F1


def label_change_fraction(previous: dict | None, current: dict) -> float:
    """Share of decision atoms whose label moved since the last iteration."""
    if previous is None:
        return 1.0
    if not current:
        return 0.0
    changed = sum(1 for key, v in current.items() if previous.get(key) != v)
    return changed / len(current)


def stance_equalities_from(tweets, stance_of: dict,
                           clamped_polarities: dict | None = None
                           ) -> tuple[tuple[str, str], ...]:
    """Tweet pairs sharing an entity whose stances are both known and equal.

    These pairs feed the polarity-consistency constraint, which forces every
    mention of one entity within an equal-stance group to share a polarity.
    Stances taken from a previous iteration's guesses can be wrong, so any
    group where two clamped polarities disagree is dropped whole: evidence
    derived from guesses must never make the clamps infeasible.
    """
    clamped = clamped_polarities or {}
    by_key: dict[str, list] = {}
    for t in tweets:
        for m in t.mentions:
            by_key.setdefault(m.key, []).append((t.id, m.id))
    pairs = set()
    for members in by_key.values():
        groups: dict = {}
        for tid, mid in members:
            stance = stance_of.get(tid)
            if stance is not None:
                groups.setdefault(stance, []).append((tid, mid))
        for group in groups.values():
            seeded = {clamped[mid] for _tid, mid in group if mid in clamped}
            if len(seeded) > 1:
                continue
            tids = sorted({tid for tid, _mid in group})
            for a in range(len(tids)):
                for b in range(a + 1, len(tids)):
                    pairs.add((tids[a], tids[b]))
    return tuple(sorted(pairs))


def _stances_in(labels: dict) -> dict:
    return {args[0]: v for (pred, args), v in labels.items() if pred == "VaxStance"}


def training_examples(problem, x, suite: ScorerSuite, program: RuleProgram) -> dict:
    """Per-template (features, label) pairs read off a solved assignment.

    A grounding site contributes exactly when its body holds under x; the
    example's label is whatever the assignment gave the head block.
    """
    templates = {t.id: t for t in program.templates}
    out: dict[str, list] = {}
    for site in problem.sites:
        if not site.body_holds(x):
            continue
        feats = featurize(suite.space, templates[site.template_id],
                          site.ctx, program.schema)
        out.setdefault(site.template_id, []).append((feats, site.head_label(x)))
    return out


def em_train(program: RuleProgram, corpus: AnnotatedCorpus, suite: ScorerSuite,
             config: EMConfig, *, holdout: AnnotatedCorpus | None = None,
             run_dir=None):
    """Alternate exact inference and local retraining; returns (suite, trace).

    Each iteration solves the corpus-wide MAP problem with the seeded labels
    clamped, then retrains every template from scratch on the completed
    assignment. Stops when fewer than ``convergence_tolerance`` of the
    decision atoms changed since the previous iteration, or at ``max_iters``.
    Stance-agreement facts are derived from seeded stances first and from the
    previous iteration's stance predictions after that.
    """
    rng = np.random.default_rng(config.seed)
    seeds = seed_labels(corpus.gold, config.seed_fraction, rng)
    seeded_stances = _stances_in(seeds)
    clamped_pols = {args[0]: v for (pred, args), v in seeds.items()
                    if pred == "EntPolarity"}
    previous: dict | None = None
    trace: list[TraceRow] = []
    for iteration in range(1, config.max_iters + 1):
        stance_of = dict(_stances_in(previous or {}))
        stance_of.update(seeded_stances)  # seeds outrank last iteration's guesses
        equalities = stance_equalities_from(corpus.tweets, stance_of, clamped_pols)
        problem = ground(program, corpus.tweets, suite,
                         corpus.reason_assignments, equalities, seeds=seeds)
        result = solve_map(problem, refine_ties=config.refine_ties)
        change = label_change_fraction(previous, result.labels)
        previous = dict(result.labels)

        examples = training_examples(problem, result.indicator_vector, suite, program)
        params = dict(suite.params)
        for template in program.templates:
            rows = examples.get(template.id)
            if not rows:
                continue  # nothing grounded this template; keep its parameters
            params[template.id], _ = train_local(
                template.id, rows, head_labels(program, template),
                suite.space.total_dim, config.scorer)
        suite = ScorerSuite(suite.space, params, suite.store, suite.weight_mode)

        holdout_f1 = {}
        if holdout is not None:
            held = predict(program, holdout, suite, refine_ties=config.refine_ties)
            reports = task_reports(
                {k: v for k, v in held.labels.items() if k in holdout.gold},
                holdout.gold, program)
            holdout_f1 = {task: rep.weighted_f1 for task, rep in reports.items()}
        trace.append(TraceRow(iteration, change, result.objective, holdout_f1))
        if run_dir is not None:
            _save_checkpoint(suite, run_dir, iteration)
        if change < config.convergence_tolerance:
            break
    if run_dir is not None:
        write_trace(trace, os.path.join(str(run_dir), "trace.csv"))
    return suite, trace


def _save_checkpoint(suite: ScorerSuite, run_dir, iteration: int) -> None:
    folder = os.path.join(str(run_dir), "checkpoints", f"iter{iteration:02d}")
    os.makedirs(folder, exist_ok=True)
    for template_id, params in sorted(suite.params.items()):
        save_params(params, os.path.join(folder, f"{template_id}.scorer"))


def write_trace(trace, path) -> None:
    tasks = sorted({task for row in trace for task in row.holdout_f1})
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "label_change_fraction", "map_objective"]
                        + [f"{t}_weighted_f1" for t in tasks])
        for row in trace:
            writer.writerow([row.iteration, f"{row.label_change_fraction:.6f}",
                             f"{row.map_objective:.6f}"]
                            + [f"{row.holdout_f1[t]:.6f}" if t in row.holdout_f1 else ""
                               for t in tasks])


def load_trace(path) -> list[dict]:
    with open(path, newline="") as fh:
        return [dict(row) for row in csv.DictReader(fh)]


# ---------------------------------------------------------------------------
# prediction

def _references_same_stance(program: RuleProgram) -> bool:
    return any(atom.predicate == "SameStance"
               for rule in program.all_rules() for atom in rule.body)


def predict(program: RuleProgram, corpus, suite: ScorerSuite, *,
            reason_assignments=None, stance_equalities=None, seeds=None,
            refine_ties: bool = True):
    """Ground and solve a corpus with a trained suite.

    ``corpus`` may be an AnnotatedCorpus (its reason assignments ride along)
    or a plain iterable of tweets. When the program consults stance
    agreement and none is supplied, prediction runs twice: the first pass's
    stances decide which tweet pairs agree, the second pass enforces the
    consistency constraints over them.
    """
    if isinstance(corpus, AnnotatedCorpus):
        tweets = corpus.tweets
        if reason_assignments is None:
            reason_assignments = corpus.reason_assignments
    else:
        tweets = tuple(corpus)
    if stance_equalities is None and _references_same_stance(program):
        first = solve_map(ground(program, tweets, suite, reason_assignments,
                                 None, seeds=seeds), refine_ties=refine_ties)
        clamped = ({args[0]: v for (pred, args), v in seeds.items()
                    if pred == "EntPolarity"} if seeds else None)
        stance_equalities = stance_equalities_from(
            tweets, _stances_in(first.labels), clamped)
    problem = ground(program, tweets, suite, reason_assignments,
                     stance_equalities, seeds=seeds)
    return solve_map(problem, refine_ties=refine_ties)
