"""Grounding rule templates over a corpus and exact MAP inference.

A grounded problem is a 0-1 program: one indicator per (atom, label), an
exactly-one block per multi-class atom, a satisfaction variable per weighted
grounding tied to its clause by linear inequalities, and hard constraints as
inequalities without satisfaction variables.  Each connected component is
solved exactly as a 0-1 integer program (HiGHS, zero gap), then tie-broken
to the lexicographically smallest indicator vector.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp

from .corpus import embed
from .rules import (
    CONST,
    ENTITY_SORT,
    LABEL_VAR,
    TWEET_SORT,
    VAR,
    Atom,
    RuleProgram,
    RuleTemplate,
    Term,
)
from .scorers import (
    FeatureSpace,
    GroundingContext,
    ScorerParams,
    featurize,
    log_softmax,
    score,
)

BOOLEAN_LABELS = ("False", "True")

VALUE_TOL = 1e-9
DEFAULT_SIZE_LIMIT = 200_000


class InferenceError(Exception):
    pass


class MissingScorer(InferenceError):
    pass


class UnboundObservation(InferenceError):
    pass


class Infeasible(InferenceError):
    pass


class SizeLimit(InferenceError):
    pass


class TooLarge(InferenceError):
    pass


@dataclass(frozen=True)
class Literal:
    index: int
    negated: bool = False

    def value(self, x) -> float:
        v = x[self.index]
        return 1.0 - v if self.negated else v


@dataclass(frozen=True)
class GroundedRule:
    template_id: str
    key: str
    body: tuple[Literal, ...]
    head: Literal
    weight: float
    z_index: int

    def satisfied(self, x) -> bool:
        return any(lit.value(x) < 0.5 for lit in self.body) or self.head.value(x) > 0.5


@dataclass(frozen=True)
class GroundedConstraint:
    template_id: str
    key: str
    body: tuple[Literal, ...]
    head: Literal

    def satisfied(self, x) -> bool:
        return any(lit.value(x) < 0.5 for lit in self.body) or self.head.value(x) > 0.5


@dataclass(frozen=True)
class AtomBlock:
    predicate: str
    args: tuple[str, ...]
    labels: tuple[str, ...] | None  # None: single boolean indicator
    first: int

    @property
    def size(self) -> int:
        return 1 if self.labels is None else len(self.labels)

    @property
    def indices(self) -> range:
        return range(self.first, self.first + self.size)

    def index_of(self, label) -> int:
        if self.labels is None:
            return self.first
        return self.first + self.labels.index(label)


@dataclass(frozen=True)
class GroundingSite:
    """One weighted-template instantiation: a point where a scorer was asked.

    Kept on the problem so a training loop can turn a solved assignment back
    into supervision: every site whose body literals hold under the assignment
    yields one (context, head label) example for its template."""
    template_id: str
    key: str
    ctx: GroundingContext
    body: tuple[Literal, ...]
    head_block: AtomBlock

    def body_holds(self, x) -> bool:
        return all(lit.value(x) > 0.5 for lit in self.body)

    def head_label(self, x):
        blk = self.head_block
        if blk.labels is None:
            return "True" if x[blk.first] > 0.5 else "False"
        for i, lab in enumerate(blk.labels):
            if x[blk.first + i] > 0.5:
                return lab
        raise InferenceError(f"no active label in block {blk.predicate}{blk.args}")


@dataclass
class SolverStats:
    nodes_explored: int = 0
    wall_time: float = 0.0


@dataclass(frozen=True)
class AssignmentResult:
    labels: dict  # (predicate, args) -> label string or bool
    objective: float
    indicator_vector: tuple[int, ...]
    stats: SolverStats

    def label(self, predicate: str, *args):
        return self.labels[(predicate, tuple(args))]


@dataclass
class InferenceProblem:
    blocks: list[AtomBlock]
    rules: list[GroundedRule]
    constraints: list[GroundedConstraint]
    seeds: dict  # (predicate, args) -> label / bool
    n_atoms: int

    sites: list = field(default_factory=list)  # GroundingSite per weighted grounding
    block_of: dict = field(default_factory=dict)  # (predicate, args) -> AtomBlock

    def __post_init__(self):
        if not self.block_of:
            self.block_of = {(b.predicate, b.args): b for b in self.blocks}

    def atom_names(self) -> list[str]:
        names = [""] * self.n_atoms
        for b in self.blocks:
            if b.labels is None:
                names[b.first] = f"{b.predicate}({','.join(b.args)})"
            else:
                for i, lab in enumerate(b.labels):
                    names[b.first + i] = f"{b.predicate}({','.join(b.args)})={lab}"
        return names


# ---------------------------------------------------------------------------
# scorer bundle

class ScorerSuite:
    """Feature space + per-template parameters + embedding source.

    weight_mode selects whether grounded weights are raw logits or
    log-softmax values over the head block (default: log_softmax, so terms
    are comparable across templates). Log-softmax rows are centered to mean
    zero: an implication whose body is false is vacuously satisfied and
    still collects its weight, so without centering a rule with a
    decision-atom body would reward whichever body combo has the most
    peaked row (its forgone row sum is the largest), independent of the
    head label actually chosen. Centering makes that forgone mass the same
    for every combo while leaving within-row differences, and hence every
    head argmax, untouched."""

    def __init__(self, space: FeatureSpace, params: dict[str, ScorerParams],
                 store=None, weight_mode: str = "log_softmax"):
        if weight_mode not in ("raw", "log_softmax"):
            raise ValueError(f"unknown weight_mode {weight_mode!r}")
        if space.embedding_dim and store is None:
            raise ValueError("feature space declares an embedding block but no store given")
        if store is not None and space.embedding_dim and store.dimension != space.embedding_dim:
            raise ValueError("embedding store dimension disagrees with the feature space")
        self.space = space
        self.params = dict(params)
        self.store = store
        self.weight_mode = weight_mode

    def weights_for(self, template: RuleTemplate, ctx: GroundingContext, schema):
        params = self.params.get(template.id)
        if params is None:
            raise MissingScorer(f"no scorer for weighted template {template.id}")
        feats = featurize(self.space, template, ctx, schema)
        logits = score(params, feats).scores
        if self.weight_mode == "log_softmax":
            values = log_softmax(logits)
            return params.labels, values - values.mean()
        return params.labels, logits


# ---------------------------------------------------------------------------
# grounding

def observed_facts(corpus, reason_assignments=None, stance_equalities=None) -> dict:
    """Fact tables for the observed predicates.

    SameEntity holds distinct mention pairs sharing a canonical key;
    SameStance holds the given tweet pairs (both directions), restricted to
    pairs that share a canonical entity so the polarity-consistency
    constraint never ranges over unrelated tweets.
    """
    tweets = list(corpus)
    facts = {
        "Tweet": [(t.id,) for t in tweets],
        "Mentions": [(t.id, m.id) for t in tweets for m in t.mentions],
        "MentionsReason": [],
        "SameStance": [],
        "SameEntity": [],
    }
    if reason_assignments:
        for t in tweets:
            reason = reason_assignments.get(t.id)
            if reason is not None:
                facts["MentionsReason"].append((t.id, reason))
    by_key: dict[str, list] = {}
    keys_of_tweet: dict[str, set] = {}
    for t in tweets:
        for m in t.mentions:
            by_key.setdefault(m.key, []).append(m)
            keys_of_tweet.setdefault(t.id, set()).add(m.key)
    for mentions in by_key.values():
        for a in mentions:
            for b in mentions:
                if a.id != b.id:
                    facts["SameEntity"].append((a.id, b.id))
    if stance_equalities:
        for ti, tj in stance_equalities:
            if ti == tj:
                continue
            shared = keys_of_tweet.get(ti, set()) & keys_of_tweet.get(tj, set())
            if shared:
                facts["SameStance"].append((ti, tj))
                facts["SameStance"].append((tj, ti))
    return facts


class _Grounder:
    def __init__(self, program: RuleProgram, corpus, suite: ScorerSuite,
                 facts: dict, size_limit: int):
        self.program = program
        self.schema = program.schema
        self.suite = suite
        self.facts = facts
        self.size_limit = size_limit
        self.tweets = {t.id: t for t in corpus}
        self.mentions = {m.id: (t, m) for t in self.tweets.values() for m in t.mentions}
        self.blocks: list[AtomBlock] = []
        self.block_of: dict = {}
        self.n_atoms = 0
        self.rules: list[GroundedRule] = []
        self.constraints: list[GroundedConstraint] = []
        self.sites: list[GroundingSite] = []
        self._ctx_cache: dict = {}

    def block(self, predicate: str, args: tuple[str, ...]) -> AtomBlock:
        key = (predicate, args)
        blk = self.block_of.get(key)
        if blk is None:
            space = self.program.space_of(predicate)
            labels = None
            if space is not None:
                if not space.closed:
                    raise InferenceError(
                        f"decision predicate {predicate} ranges over the open space "
                        f"{space.name}; it cannot carry indicators")
                labels = space.values
            blk = AtomBlock(predicate, args, labels, self.n_atoms)
            self.n_atoms += blk.size
            if self.n_atoms > self.size_limit:
                raise SizeLimit(f"indicator count exceeded the cap of {self.size_limit}")
            self.blocks.append(blk)
            self.block_of[key] = blk
        return blk

    def _bind_observed(self, atoms, binding):
        """Join positive observed atoms against fact tables, depth-first.

        The next atom is chosen greedily (fewest unbound variables, then
        smallest fact table) so a pair rule joins through its linking atoms
        instead of building the full tweet-pair cross product first. The
        yielded binding set does not depend on this order."""
        if not atoms:
            yield dict(binding)
            return

        def cost(a):
            unbound = sum(1 for t in a.args if t.kind != CONST and t.text not in binding)
            return unbound, len(self.facts.get(a.predicate, ()))

        pick = min(range(len(atoms)), key=lambda i: cost(atoms[i]))
        atom, rest = atoms[pick], tuple(atoms[:pick]) + tuple(atoms[pick + 1:])
        table = self.facts.get(atom.predicate, [])
        for fact in table:
            new = dict(binding)
            ok = True
            for term, value in zip(atom.args, fact):
                if term.kind == CONST:
                    if term.text != value:
                        ok = False
                        break
                else:
                    bound = new.get(term.text)
                    if bound is None:
                        new[term.text] = value
                    elif bound != value:
                        ok = False
                        break
            if ok:
                yield from self._bind_observed(rest, new)

    def _check_negated_observed(self, atoms, binding) -> bool:
        for atom in atoms:
            values = []
            for term in atom.args:
                if term.kind == CONST:
                    values.append(term.text)
                else:
                    v = binding.get(term.text)
                    if v is None:
                        raise UnboundObservation(
                            f"negated observed atom {atom.render()} leaves "
                            f"{term.text} unbound")
                    values.append(v)
            if tuple(values) in set(self.facts.get(atom.predicate, [])):
                return False
        return True

    def _decision_atom_combos(self, atoms, binding):
        """Enumerate label choices for body decision atoms.

        Yields (literals, symbols) pairs: the chosen indicator literals and
        the label-space symbols they bind (for featurization)."""
        if not atoms:
            yield [], {}
            return
        atom, rest = atoms[0], atoms[1:]
        pred = self.schema[atom.predicate]
        args = []
        for term, sort in zip(atom.args, pred.arg_sorts):
            if sort in (TWEET_SORT, ENTITY_SORT):
                v = binding.get(term.text) if term.kind != CONST else term.text
                if v is None:
                    raise UnboundObservation(
                        f"variable {term.text} of {atom.render()} is not bound by "
                        f"any observed atom")
                args.append(v)
        args = tuple(args)
        space = self.program.space_of(atom.predicate)
        if space is None:  # boolean decision atom
            lit = Literal(self.block(atom.predicate, args).first, atom.negated)
            for lits, syms in self._decision_atom_combos(rest, binding):
                yield [lit] + lits, syms
            return
        label_term = atom.args[-1]
        if label_term.kind == CONST:
            choices = [label_term.text]
        elif label_term.kind == LABEL_VAR:
            choices = list(space.values)
        else:
            bound = binding.get(label_term.text)
            if bound is None:
                raise UnboundObservation(
                    f"label variable {label_term.text} of {atom.render()} is unbound")
            choices = [bound]
        blk = self.block(atom.predicate, args)
        for label in choices:
            lit = Literal(blk.index_of(label), atom.negated)
            for lits, syms in self._decision_atom_combos(rest, binding):
                yield [lit] + lits, {space.name: label, **syms}

    def _context(self, rule: RuleTemplate, binding, symbols) -> GroundingContext:
        tweet = None
        mention = None
        for atom in (rule.head,) + rule.body:
            pred = self.schema[atom.predicate]
            for term, sort in zip(atom.args, pred.arg_sorts):
                value = term.text if term.kind == CONST else binding.get(term.text)
                if value is None:
                    continue
                if sort == TWEET_SORT and tweet is None and value in self.tweets:
                    tweet = self.tweets[value]
                if sort == ENTITY_SORT and mention is None and value in self.mentions:
                    mention = self.mentions[value][1]
        if tweet is None and mention is not None:
            tweet = self.mentions[mention.id][0]
        if tweet is None:
            raise UnboundObservation(f"grounding of {rule.id} touches no tweet")
        embedding = None
        if self.suite.space.embedding_dim:
            embedding = embed(tweet.text, self.suite.store)
        return GroundingContext(
            tweet_text=tweet.text,
            entity_surface=mention.surface if mention is not None else None,
            embedding=embedding,
            symbols=symbols,
        )

    def _observed_symbol_bindings(self, rule: RuleTemplate, binding) -> dict:
        """Symbols bound by observed body atoms (e.g. an assigned reason id)."""
        out = {}
        for atom in rule.body:
            pred = self.schema[atom.predicate]
            if not pred.observed:
                continue
            for term, sort in zip(atom.args, pred.arg_sorts):
                if sort in (TWEET_SORT, ENTITY_SORT) or term.kind == CONST:
                    continue
                value = binding.get(term.text)
                if value is not None:
                    out[sort] = value
        return out

    def _with_domain_atoms(self, rule: RuleTemplate) -> RuleTemplate:
        """Close sort variables over their domains.

        A tweet or entity variable that no observed atom binds ranges over
        the whole corpus (Tweet facts) or all mentions (Mentions facts), as
        in `VaxStance(T, S?) => HasMF(T, M?)` where T means "every tweet"."""
        bound = {t.text for a in rule.body
                 if self.schema[a.predicate].observed and not a.negated
                 for t in a.args if t.kind == VAR}
        extra: list[Atom] = []
        fresh = 0
        for atom in rule.body + (rule.head,):
            pred = self.schema[atom.predicate]
            for term, sort in zip(atom.args, pred.arg_sorts):
                if term.kind != VAR or term.text in bound:
                    continue
                if sort == TWEET_SORT:
                    extra.append(Atom("Tweet", (Term(VAR, term.text),)))
                    bound.add(term.text)
                elif sort == ENTITY_SORT:
                    extra.append(Atom("Mentions",
                                      (Term(VAR, f"_dom{fresh}"), Term(VAR, term.text))))
                    fresh += 1
                    bound.add(term.text)
        if not extra:
            return rule
        return replace(rule, body=tuple(extra) + rule.body)

    def ground_rule(self, rule: RuleTemplate):
        rule = self._with_domain_atoms(rule)
        observed = [a for a in rule.body if self.schema[a.predicate].observed and not a.negated]
        negated_observed = [a for a in rule.body
                            if self.schema[a.predicate].observed and a.negated]
        decisions = [a for a in rule.body if not self.schema[a.predicate].observed]
        head_pred = self.schema[rule.head.predicate]
        if head_pred.observed:
            raise InferenceError(f"rule {rule.id} heads an observed predicate")

        for binding in self._bind_observed(observed, {}):
            if negated_observed and not self._check_negated_observed(negated_observed, binding):
                continue
            head_args = []
            for term, sort in zip(rule.head.args, head_pred.arg_sorts):
                if sort in (TWEET_SORT, ENTITY_SORT):
                    v = term.text if term.kind == CONST else binding.get(term.text)
                    if v is None:
                        raise UnboundObservation(
                            f"head variable {term.text} of {rule.id} is not bound by "
                            f"any observed atom")
                    head_args.append(v)
            head_args = tuple(head_args)
            head_space = self.program.space_of(rule.head.predicate)
            head_blk = self.block(rule.head.predicate, head_args)

            for body_lits, symbols in self._decision_atom_combos(decisions, binding):
                symbols = {**self._observed_symbol_bindings(rule, binding), **symbols}
                key_base = (f"{rule.id}[{','.join(head_args)}"
                            + (f"|{','.join(f'{k}={v}' for k, v in sorted(symbols.items()))}"
                               if symbols else "") + "]")
                if rule.weighted:
                    ctx = self._context(rule, binding, symbols)
                    labels, weights = self.suite.weights_for(rule, ctx, self.schema)
                    self.sites.append(GroundingSite(rule.id, key_base, ctx,
                                                    tuple(body_lits), head_blk))
                    if head_space is None:
                        if tuple(labels) != BOOLEAN_LABELS:
                            raise MissingScorer(
                                f"scorer for {rule.id} must have labels {BOOLEAN_LABELS}, "
                                f"got {tuple(labels)}")
                        for value, lab in ((False, "False"), (True, "True")):
                            head_lit = Literal(head_blk.first, negated=not value)
                            self._add_rule(rule.id, f"{key_base}={lab}", body_lits, head_lit,
                                           float(weights[labels.index(lab)]))
                    else:
                        if tuple(labels) != head_space.values:
                            raise MissingScorer(
                                f"scorer for {rule.id} labels {tuple(labels)} disagree with "
                                f"space {head_space.values}")
                        head_term = rule.head.args[-1]
                        if head_term.kind == CONST:
                            choices = [head_term.text]
                        elif head_term.kind == LABEL_VAR:
                            choices = list(head_space.values)
                        else:
                            bound = binding.get(head_term.text)
                            if bound is None:
                                raise UnboundObservation(
                                    f"head label {head_term.text} of {rule.id} is unbound")
                            choices = [bound]
                        for label in choices:
                            head_lit = Literal(head_blk.index_of(label), rule.head.negated)
                            self._add_rule(rule.id, f"{key_base}->{label}", body_lits, head_lit,
                                           float(weights[labels.index(label)]))
                else:
                    if head_space is None:
                        head_lit = Literal(head_blk.first, rule.head.negated)
                        self.constraints.append(GroundedConstraint(
                            rule.id, key_base, tuple(body_lits), head_lit))
                    else:
                        head_term = rule.head.args[-1]
                        if head_term.kind == CONST:
                            choices = [head_term.text]
                        elif head_term.kind == LABEL_VAR:
                            sym = symbols.get(head_space.name)
                            choices = [sym] if sym is not None else list(head_space.values)
                        else:
                            choices = [binding[head_term.text]]
                        for label in choices:
                            head_lit = Literal(head_blk.index_of(label), rule.head.negated)
                            self.constraints.append(GroundedConstraint(
                                rule.id, f"{key_base}->{label}", tuple(body_lits), head_lit))

    def _add_rule(self, template_id, key, body_lits, head_lit, weight):
        self.rules.append(GroundedRule(template_id, key, tuple(body_lits), head_lit,
                                       weight, z_index=-1))


def ground(program: RuleProgram, corpus, suite: ScorerSuite,
           reason_assignments: dict | None = None,
           stance_equalities=None,
           seeds: dict | None = None,
           size_limit: int = DEFAULT_SIZE_LIMIT) -> InferenceProblem:
    """Instantiate every template and constraint over the corpus facts."""
    tweets = list(corpus)
    facts = observed_facts(tweets, reason_assignments, stance_equalities)
    g = _Grounder(program, tweets, suite, facts, size_limit)
    for rule in program.templates:
        g.ground_rule(rule)
    for constraint in program.constraints:
        g.ground_rule(constraint)
    seeds = dict(seeds or {})
    for (pred, args), value in seeds.items():
        # seeded atoms the program never referenced are still materialized,
        # so the seed shows up in the result
        blk = g.block(pred, tuple(args))
        if blk.labels is not None and value not in blk.labels:
            raise InferenceError(f"seed {value!r} is not a label of {pred}")
    # satisfaction variables live after the atom indicators, one per grounding
    rules = [GroundedRule(r.template_id, r.key, r.body, r.head, r.weight, g.n_atoms + i)
             for i, r in enumerate(g.rules)]
    return InferenceProblem(g.blocks, rules, g.constraints, seeds, g.n_atoms,
                            g.sites, dict(g.block_of))


# ---------------------------------------------------------------------------
# linearization

def literal_expr(lit: Literal) -> tuple[float, dict[int, float]]:
    """Affine form of a literal's value: constant + coefficient on its var."""
    if lit.negated:
        return 1.0, {lit.index: -1.0}
    return 0.0, {lit.index: 1.0}


def horn_to_linear(body: tuple[Literal, ...], head: Literal,
                   z_index: int | None) -> list[tuple[dict[int, float], float]]:
    """Linear inequalities (coeffs, rhs) meaning sum(coef*x) >= rhs.

    With a satisfaction variable z: z <= h + sum(1-b_i), z >= h, and
    z >= 1-b_i for every body literal, which pins z to the clause's truth
    value at any 0/1 point.  Without z (hard constraint):
    sum(1-b_i) + h >= 1.
    """
    def add(expr_const, expr_coeffs, const, coeffs, sign=1.0):
        for k, v in coeffs.items():
            expr_coeffs[k] = expr_coeffs.get(k, 0.0) + sign * v
        return expr_const + sign * const

    h_const, h_coeffs = literal_expr(head)
    rows: list[tuple[dict[int, float], float]] = []
    if z_index is None:
        const, coeffs = 0.0, {}
        for b in body:
            b_const, b_coeffs = literal_expr(b)
            const = add(const, coeffs, 1.0 - b_const, {k: -v for k, v in b_coeffs.items()})
        const = add(const, coeffs, h_const, h_coeffs)
        rows.append((coeffs, 1.0 - const))
        return rows
    # z <= h + sum(1 - b_i)  ->  h + sum(1-b_i) - z >= 0
    const, coeffs = 0.0, {z_index: -1.0}
    const = add(const, coeffs, h_const, h_coeffs)
    for b in body:
        b_const, b_coeffs = literal_expr(b)
        const = add(const, coeffs, 1.0 - b_const, {k: -v for k, v in b_coeffs.items()})
    rows.append((coeffs, -const))
    # z >= h  ->  z - h >= 0
    coeffs = {z_index: 1.0}
    const = add(0.0, coeffs, -h_const, {k: -v for k, v in h_coeffs.items()})
    rows.append((coeffs, -const))
    # z >= 1 - b_i  ->  z + b_i >= 1
    for b in body:
        b_const, b_coeffs = literal_expr(b)
        coeffs = {z_index: 1.0}
        const = add(0.0, coeffs, b_const, b_coeffs)
        rows.append((coeffs, 1.0 - const))
    return rows


# ---------------------------------------------------------------------------
# exact solver

def _components(problem: InferenceProblem) -> list[list[int]]:
    parent = list(range(problem.n_atoms))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb

    for blk in problem.blocks:
        for i in blk.indices:
            union(blk.first, i)
    for r in problem.rules:
        indices = [lit.index for lit in r.body] + [r.head.index]
        for i in indices[1:]:
            union(indices[0], i)
    for c in problem.constraints:
        indices = [lit.index for lit in c.body] + [c.head.index]
        for i in indices[1:]:
            union(indices[0], i)
    groups: dict[int, list[int]] = {}
    for i in range(problem.n_atoms):
        groups.setdefault(find(i), []).append(i)
    return sorted(groups.values(), key=lambda g: g[0])


def evaluate_objective(problem: InferenceProblem, x) -> float:
    """Objective of an atom assignment, summing rules in problem order."""
    total = 0.0
    for r in problem.rules:
        total += r.weight * (1.0 if r.satisfied(x) else 0.0)
    return total


def check_hard_constraints(problem: InferenceProblem, x) -> list[str]:
    """Re-evaluate every grounded hard constraint; returns violated keys."""
    return [c.key for c in problem.constraints if not c.satisfied(x)]


def _seed_bounds(problem: InferenceProblem):
    fixed: dict[int, int] = {}
    for (pred, args), value in problem.seeds.items():
        blk = problem.block_of.get((pred, tuple(args)))
        if blk is None:
            continue
        if blk.labels is None:
            fixed[blk.first] = 1 if value else 0
        else:
            want = blk.index_of(value)
            for i in blk.indices:
                fixed[i] = 1 if i == want else 0
    return fixed


class _ComponentSolver:
    """Exact 0-1 optimization of one connected component (HiGHS backend)."""

    def __init__(self, problem: InferenceProblem, atom_ids: list[int], stats: SolverStats,
                 *, rules=None, constraints=None, blocks=None, seed_fixed=None):
        self.problem = problem
        self.atoms = atom_ids  # global indices, ascending
        self.stats = stats
        self.local = {g: i for i, g in enumerate(atom_ids)}
        if rules is None or constraints is None or blocks is None:
            atom_set = set(atom_ids)
            rules = [r for r in problem.rules if r.head.index in atom_set
                     or any(b.index in atom_set for b in r.body)]
            constraints = [c for c in problem.constraints if c.head.index in atom_set
                           or any(b.index in atom_set for b in c.body)]
            blocks = [b for b in problem.blocks if b.first in atom_set]
        self.rules = rules
        self.constraints = constraints
        self.blocks = blocks
        self.n_atoms = len(atom_ids)
        self.n_vars = self.n_atoms + len(self.rules)
        for zi, r in enumerate(self.rules):
            self.local[r.z_index] = self.n_atoms + zi

        rows_ub = []  # (coeffs dict over local vars, rhs) meaning >= rhs
        for zi, r in enumerate(self.rules):
            body = tuple(Literal(self.local[l.index], l.negated) for l in r.body)
            head = Literal(self.local[r.head.index], r.head.negated)
            rows_ub.extend(horn_to_linear(body, head, self.n_atoms + zi))
        for c in self.constraints:
            body = tuple(Literal(self.local[l.index], l.negated) for l in c.body)
            head = Literal(self.local[c.head.index], c.head.negated)
            rows_ub.extend(horn_to_linear(body, head, None))

        # scipy wants A_ub x <= b_ub; our rows are sum >= rhs
        self.A_ub = np.zeros((len(rows_ub), self.n_vars))
        self.b_ub = np.zeros(len(rows_ub))
        for ri, (coeffs, rhs) in enumerate(rows_ub):
            for var, coef in coeffs.items():
                self.A_ub[ri, var] = -coef
            self.b_ub[ri] = -rhs
        eq_rows = []
        for blk in self.blocks:
            if blk.labels is not None:
                row = np.zeros(self.n_vars)
                for i in blk.indices:
                    row[self.local[i]] = 1.0
                eq_rows.append(row)
        self.A_eq = np.vstack(eq_rows) if eq_rows else None
        self.b_eq = np.ones(len(eq_rows)) if eq_rows else None
        self.c = np.zeros(self.n_vars)
        for zi, r in enumerate(self.rules):
            self.c[self.n_atoms + zi] = -r.weight  # the solver minimizes

        if seed_fixed is None:
            seed_fixed = _seed_bounds(problem)
        self.base_fixed = {}
        for gidx, v in seed_fixed.items():
            if gidx in self.local:
                self.base_fixed[self.local[gidx]] = v

    def _witness_objective(self, witness) -> float:
        """Objective re-summed from the integer atom assignment, so values
        compared during tie refinement carry no solver arithmetic noise."""
        total = 0.0
        for r in self.rules:
            body_ok = all(
                (witness[self.local[l.index]] < 0.5 if l.negated
                 else witness[self.local[l.index]] > 0.5) for l in r.body)
            head_true = (witness[self.local[r.head.index]] < 0.5 if r.head.negated
                         else witness[self.local[r.head.index]] > 0.5)
            if not body_ok or head_true:
                total += r.weight
        return total

    def best_assignment(self, extra_fixed=None):
        """Exact 0-1 optimum of the component.

        Returns (value, witness) with the witness restricted to atoms, or
        (None, None) when the constraints plus fixes admit no assignment."""
        lb = np.zeros(self.n_vars)
        ub = np.ones(self.n_vars)
        fixed = dict(self.base_fixed)
        if extra_fixed:
            fixed.update(extra_fixed)
        for i, v in fixed.items():
            lb[i] = ub[i] = float(v)
        constraints = [LinearConstraint(self.A_ub, -np.inf, self.b_ub)]
        if self.A_eq is not None:
            constraints.append(LinearConstraint(self.A_eq, self.b_eq, self.b_eq))
        res = milp(c=self.c, constraints=constraints, bounds=Bounds(lb, ub),
                   integrality=np.ones(self.n_vars, dtype=int),
                   options={"mip_rel_gap": 0.0})
        self.stats.nodes_explored += int(getattr(res, "mip_node_count", 0) or 0) + 1
        if res.status == 2:
            return None, None
        if res.status != 0:
            raise InferenceError(
                f"MILP solve failed with status {res.status}: {res.message}")
        witness = np.round(res.x[:self.n_atoms]).astype(int)
        return self._witness_objective(witness), witness

    def solve(self, refine_ties: bool = True):
        value, witness = self.best_assignment()
        if witness is None:
            raise Infeasible("hard constraints and seeds admit no assignment")
        if refine_ties:
            # canonical tie-break: sweep atoms in index order, pinning each to
            # 0 whenever some equally good assignment allows it
            fixed = dict(self.base_fixed)
            for li in range(self.n_atoms):
                if li in fixed:
                    continue
                if witness[li] == 0:
                    fixed[li] = 0
                    continue
                trial = dict(fixed)
                trial[li] = 0
                t_value, t_witness = self.best_assignment(extra_fixed=trial)
                if t_witness is not None and t_value >= value - VALUE_TOL:
                    fixed[li] = 0
                    witness = t_witness
                else:
                    fixed[li] = 1
        return witness


def _assignment_from_vector(problem: InferenceProblem, x) -> dict:
    labels = {}
    for blk in problem.blocks:
        if blk.labels is None:
            labels[(blk.predicate, blk.args)] = bool(x[blk.first])
        else:
            chosen = [lab for i, lab in zip(blk.indices, blk.labels) if x[i] == 1]
            if len(chosen) != 1:
                raise InferenceError(
                    f"block {blk.predicate}{blk.args} has {len(chosen)} active labels")
            labels[(blk.predicate, blk.args)] = chosen[0]
    return labels


def solve_map(problem: InferenceProblem, refine_ties: bool = True) -> AssignmentResult:
    """Exact MAP, one integer solve per connected component, deterministic ties."""
    t0 = time.perf_counter()
    stats = SolverStats()
    x = np.zeros(problem.n_atoms, dtype=int)
    seed_fixed = _seed_bounds(problem)
    comps = _components(problem)
    comp_of = {}
    for ci, comp in enumerate(comps):
        for gidx in comp:
            comp_of[gidx] = ci
    # every literal of a grounded rule or constraint sits in one component by
    # construction (union-find joined them), so the head atom locates it
    rules_in: list[list] = [[] for _ in comps]
    for r in problem.rules:
        rules_in[comp_of[r.head.index]].append(r)
    constraints_in: list[list] = [[] for _ in comps]
    for c in problem.constraints:
        constraints_in[comp_of[c.head.index]].append(c)
    blocks_in: list[list] = [[] for _ in comps]
    for blk in problem.blocks:
        blocks_in[comp_of[blk.first]].append(blk)
    for ci, comp in enumerate(comps):
        if not rules_in[ci] and not constraints_in[ci]:
            # untouched blocks: honor seeds, otherwise the lexicographically
            # smallest exactly-one pattern (last label set, earlier zeros)
            for blk in blocks_in[ci]:
                if blk.labels is None:
                    x[blk.first] = seed_fixed.get(blk.first, 0)
                else:
                    seeded = [i for i in blk.indices if seed_fixed.get(i) == 1]
                    active = seeded[0] if seeded else blk.first + blk.size - 1
                    for i in blk.indices:
                        x[i] = 1 if i == active else 0
            continue
        solver = _ComponentSolver(problem, comp, stats, rules=rules_in[ci],
                                  constraints=constraints_in[ci],
                                  blocks=blocks_in[ci], seed_fixed=seed_fixed)
        local_solution = solver.solve(refine_ties=refine_ties)
        for gidx in comp:
            x[gidx] = int(local_solution[solver.local[gidx]])
    violated = check_hard_constraints(problem, x)
    if violated:
        raise InferenceError(f"solution violates hard constraints: {violated[:3]}")
    labels = _assignment_from_vector(problem, x)
    objective = evaluate_objective(problem, x)
    stats.wall_time = time.perf_counter() - t0
    return AssignmentResult(labels, objective, tuple(int(v) for v in x), stats)


# ---------------------------------------------------------------------------
# brute force oracle

BRUTE_FORCE_CAP = 1 << 20


def brute_force_map(problem: InferenceProblem) -> AssignmentResult:
    """Exhaustive MAP over exactly-one blocks; independent of the LP path."""
    t0 = time.perf_counter()
    seed_fixed = _seed_bounds(problem)
    choices_per_block: list[list[tuple[int, ...]]] = []
    total = 1
    for blk in problem.blocks:
        patterns = []
        if blk.labels is None:
            allowed = ([seed_fixed[blk.first]] if blk.first in seed_fixed else [0, 1])
            for v in allowed:
                patterns.append((v,))
        else:
            for pos in range(blk.size):
                pattern = tuple(1 if i == pos else 0 for i in range(blk.size))
                ok = all(seed_fixed.get(blk.first + i, pattern[i]) == pattern[i]
                         for i in range(blk.size))
                if ok:
                    patterns.append(pattern)
        if not patterns:
            raise Infeasible("seeds rule out every pattern of a block")
        choices_per_block.append(patterns)
        total *= len(patterns)
        if total > BRUTE_FORCE_CAP:
            raise TooLarge(f"{total} joint assignments exceed the brute-force cap")

    best_key = None
    best_x = None
    x = np.zeros(problem.n_atoms, dtype=int)

    def recurse(bi: int):
        nonlocal best_key, best_x
        if bi == len(problem.blocks):
            for c in problem.constraints:
                if not c.satisfied(x):
                    return
            value = 0.0
            for r in problem.rules:
                value += r.weight * (1.0 if r.satisfied(x) else 0.0)
            key = (-value, tuple(int(v) for v in x))
            if best_key is None or key < best_key:
                best_key = key
                best_x = tuple(int(v) for v in x)
            return
        blk = problem.blocks[bi]
        for pattern in choices_per_block[bi]:
            for off, v in enumerate(pattern):
                x[blk.first + off] = v
            recurse(bi + 1)

    recurse(0)
    if best_x is None:
        raise Infeasible("no assignment satisfies the hard constraints and seeds")
    labels = _assignment_from_vector(problem, best_x)
    stats = SolverStats(nodes_explored=total, wall_time=time.perf_counter() - t0)
    return AssignmentResult(labels, -best_key[0], best_x, stats)


# ---------------------------------------------------------------------------
# problem dump

def write_lp(problem: InferenceProblem) -> tuple[str, str]:
    """LP text rendering plus a JSON sidecar naming every variable."""
    names = [f"x{i}" for i in range(problem.n_atoms)] + \
            [f"z{j}" for j in range(len(problem.rules))]

    def render_row(coeffs: dict[int, float], rhs: float) -> str:
        parts = []
        for var in sorted(coeffs):
            coef = coeffs[var]
            sign = "+" if coef >= 0 else "-"
            parts.append(f"{sign} {abs(coef):g} {names[var]}")
        text = " ".join(parts).lstrip("+ ")
        return f"{text} >= {rhs:g}"

    lines = ["Maximize"]
    terms = []
    for j, r in enumerate(problem.rules):
        sign = "+" if r.weight >= 0 else "-"
        terms.append(f"{sign} {abs(r.weight):.12g} z{j}")
    lines.append(" obj: " + (" ".join(terms).lstrip("+ ") if terms else "0"))
    lines.append("Subject To")
    cid = 0
    for r in problem.rules:
        local_z = r.z_index
        for coeffs, rhs in horn_to_linear(r.body, r.head, local_z):
            lines.append(f" r{cid}: {render_row(coeffs, rhs)}")
            cid += 1
    for c in problem.constraints:
        for coeffs, rhs in horn_to_linear(c.body, c.head, None):
            lines.append(f" h{cid}: {render_row(coeffs, rhs)}")
            cid += 1
    for blk in problem.blocks:
        if blk.labels is not None:
            row = " + ".join(f"x{i}" for i in blk.indices)
            lines.append(f" b{cid}: {row} = 1")
            cid += 1
    seed_fixed = _seed_bounds(problem)
    lines.append("Bounds")
    for i in range(problem.n_atoms):
        if i in seed_fixed:
            lines.append(f" x{i} = {seed_fixed[i]}")
        else:
            lines.append(f" 0 <= x{i} <= 1")
    lines.append("Binaries")
    lines.append(" " + " ".join(names))
    lines.append("End")

    sidecar = {}
    atom_names = problem.atom_names()
    for i in range(problem.n_atoms):
        blk = next(b for b in problem.blocks if b.first <= i < b.first + b.size)
        sidecar[f"x{i}"] = {
            "predicate": blk.predicate,
            "args": list(blk.args),
            "label": None if blk.labels is None else blk.labels[i - blk.first],
            "display": atom_names[i],
        }
    for j, r in enumerate(problem.rules):
        sidecar[f"z{j}"] = {"template": r.template_id, "grounding": r.key,
                            "weight": r.weight}
    return "\n".join(lines) + "\n", json.dumps(sidecar, indent=2)
