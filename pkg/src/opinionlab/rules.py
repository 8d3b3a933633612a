"""Declarative rule programs: label spaces, predicate schema, and the rule DSL.

A rule program is a list of weighted horn-clause templates plus unweighted
hard constraints over a fixed predicate vocabulary.  The concrete syntax is
one clause per line::

    r1: Tweet(T) => HasMF(T, M?)
    c0: constraint: IsMoral(T) => !HasMF(T, None)

``X?`` marks a label variable that ranges over the label space of its
argument position; plain identifiers in label positions are either label
constants (``None``) or variables bound by observed facts.  Negation (``!``)
is only legal inside hard constraints.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace

TWEET_SORT = "Tweet"
ENTITY_SORT = "Entity"


class RuleError(Exception):
    """Raised when a program with error diagnostics is used anyway."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        lines = "; ".join(d.message for d in self.diagnostics[:5])
        super().__init__(f"{len(self.diagnostics)} error(s): {lines}")


@dataclass(frozen=True)
class LabelSpace:
    """A named, closed set of label values (case-insensitive-unique).

    ``values=None`` declares an open symbol space (e.g. reason ids) whose
    members are only known once data is loaded; such spaces admit variables
    but no constants in rule text.
    """

    name: str
    values: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.values is not None:
            lowered = [v.lower() for v in self.values]
            if len(set(lowered)) != len(lowered):
                raise ValueError(f"label space {self.name!r} has case-insensitive duplicates")

    @property
    def closed(self) -> bool:
        return self.values is not None

    def canonical(self, text: str) -> str | None:
        """Return the canonical spelling of ``text`` if it is a member."""
        if self.values is None:
            return None
        for v in self.values:
            if v.lower() == text.lower():
                return v
        return None


MORAL_FOUNDATIONS = LabelSpace(
    "moral_foundations",
    (
        "Care/Harm",
        "Fairness/Cheating",
        "Loyalty/Betrayal",
        "Authority/Subversion",
        "Purity/Degradation",
        "Liberty/Oppression",
        "None",
    ),
)
STANCES = LabelSpace("stances", ("Pro", "Anti", "Neutral"))
ROLES = LabelSpace("roles", ("Actor", "Target"))
POLARITIES = LabelSpace("polarities", ("Positive", "Negative"))
REASONS = LabelSpace("reasons", None)  # open: populated from the catalog

CORE_SPACES = {
    s.name: s for s in (MORAL_FOUNDATIONS, STANCES, ROLES, POLARITIES, REASONS)
}


@dataclass(frozen=True)
class Predicate:
    name: str
    arg_sorts: tuple[str, ...]  # Tweet | Entity | a label-space name
    observed: bool

    @property
    def label_space_name(self) -> str | None:
        """Name of the trailing label space for multi-class atoms."""
        last = self.arg_sorts[-1]
        if last in (TWEET_SORT, ENTITY_SORT):
            return None
        return last

    @property
    def arity(self) -> int:
        return len(self.arg_sorts)


def builtin_schema() -> dict[str, Predicate]:
    """The fixed tweet/entity predicate vocabulary."""
    preds = [
        Predicate("Tweet", (TWEET_SORT,), observed=True),
        Predicate("Mentions", (TWEET_SORT, ENTITY_SORT), observed=True),
        Predicate("SameStance", (TWEET_SORT, TWEET_SORT), observed=True),
        Predicate("SameEntity", (ENTITY_SORT, ENTITY_SORT), observed=True),
        Predicate("MentionsReason", (TWEET_SORT, "reasons"), observed=True),
        Predicate("IsMoral", (TWEET_SORT,), observed=False),
        Predicate("HasMF", (TWEET_SORT, "moral_foundations"), observed=False),
        Predicate("VaxStance", (TWEET_SORT, "stances"), observed=False),
        Predicate("HasRole", (ENTITY_SORT, "roles"), observed=False),
        Predicate("EntPolarity", (ENTITY_SORT, "polarities"), observed=False),
    ]
    return {p.name: p for p in preds}


# Terms: plain variables bind to tweets/entities/observed symbols, label
# variables (written X?) enumerate a closed label space, constants name a
# label value.
VAR = "var"
LABEL_VAR = "label_var"
CONST = "const"


@dataclass(frozen=True)
class Term:
    kind: str
    text: str

    def render(self) -> str:
        return self.text + "?" if self.kind == LABEL_VAR else self.text


@dataclass(frozen=True)
class Atom:
    predicate: str
    args: tuple[Term, ...]
    negated: bool = False

    def render(self) -> str:
        inner = f"{self.predicate}({', '.join(t.render() for t in self.args)})"
        return "!" + inner if self.negated else inner


@dataclass(frozen=True)
class RuleTemplate:
    id: str
    body: tuple[Atom, ...]
    head: Atom
    weighted: bool
    scorer_id: str | None = None

    def render(self) -> str:
        marker = "" if self.weighted else "constraint: "
        body = " & ".join(a.render() for a in self.body)
        return f"{self.id}: {marker}{body} => {self.head.render()}"


@dataclass(frozen=True)
class RuleProgram:
    templates: tuple[RuleTemplate, ...]
    constraints: tuple[RuleTemplate, ...]
    schema: dict[str, Predicate] = field(compare=False, default_factory=builtin_schema)
    spaces: dict[str, LabelSpace] = field(compare=False, default_factory=lambda: dict(CORE_SPACES))

    def all_rules(self) -> tuple[RuleTemplate, ...]:
        return self.templates + self.constraints

    def space_of(self, predicate: str) -> LabelSpace | None:
        name = self.schema[predicate].label_space_name
        return self.spaces[name] if name else None

    def subset(self, rule_ids) -> "RuleProgram":
        keep = set(rule_ids)
        return replace(
            self,
            templates=tuple(t for t in self.templates if t.id in keep),
            constraints=tuple(c for c in self.constraints if c.id in keep),
        )


@dataclass(frozen=True)
class Diagnostic:
    rule_id: str
    severity: str  # "error" | "warning"
    message: str
    line: int
    col: int
    code: str = ""

    def to_json(self) -> str:
        return json.dumps(
            {
                "rule_id": self.rule_id,
                "severity": self.severity,
                "message": self.message,
                "line": self.line,
                "col": self.col,
            }
        )


@dataclass
class ParseResult:
    program: RuleProgram
    diagnostics: list[Diagnostic]

    @property
    def ok(self) -> bool:
        return not any(d.severity == "error" for d in self.diagnostics)

    def program_or_raise(self) -> RuleProgram:
        if not self.ok:
            raise RuleError([d for d in self.diagnostics if d.severity == "error"])
        return self.program


_TOKEN = re.compile(r"[A-Za-z_][A-Za-z0-9_/\-]*|\?|[():,&!]|=>|\S")


def _tokenize(text: str, line_no: int):
    out = []
    i = 0
    while i < len(text):
        if text[i].isspace():
            i += 1
            continue
        if text[i] == "#":
            break
        m = _TOKEN.match(text, i)
        tok = m.group(0)
        out.append((tok, line_no, i + 1))
        i = m.end()
    return out


class _LineParser:
    """Recursive-descent parser for one clause; grammar is LL(1)."""

    def __init__(self, tokens, line_no):
        self.toks = tokens
        self.pos = 0
        self.line = line_no

    def peek(self):
        return self.toks[self.pos][0] if self.pos < len(self.toks) else None

    def loc(self):
        if self.pos < len(self.toks):
            return self.toks[self.pos][1], self.toks[self.pos][2]
        return self.line, (self.toks[-1][2] + len(self.toks[-1][0])) if self.toks else 1

    def take(self, expected=None):
        if self.pos >= len(self.toks):
            raise _SyntaxProblem(f"unexpected end of line (wanted {expected})", *self.loc())
        tok, ln, col = self.toks[self.pos]
        if expected is not None and tok != expected:
            raise _SyntaxProblem(f"expected {expected!r}, found {tok!r}", ln, col)
        self.pos += 1
        return tok, ln, col

    def parse_atom(self) -> Atom:
        negated = False
        if self.peek() == "!":
            self.take("!")
            negated = True
        name, ln, col = self.take()
        if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", name):
            raise _SyntaxProblem(f"expected predicate name, found {name!r}", ln, col)
        self.take("(")
        args = []
        while True:
            tok, tln, tcol = self.take()
            if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_/\-]*", tok):
                raise _SyntaxProblem(f"expected term, found {tok!r}", tln, tcol)
            if self.peek() == "?":
                self.take("?")
                args.append((Term(LABEL_VAR, tok), tln, tcol))
            else:
                args.append((Term(VAR, tok), tln, tcol))
            if self.peek() == ",":
                self.take(",")
                continue
            self.take(")")
            break
        return Atom(name, tuple(a for a, _, _ in args), negated), [(ln, col)] + [
            (tln, tcol) for _, tln, tcol in args
        ]

    def parse_clause(self):
        body = []
        positions = []
        atom, pos = self.parse_atom()
        body.append(atom)
        positions.append(pos)
        while self.peek() == "&":
            self.take("&")
            atom, pos = self.parse_atom()
            body.append(atom)
            positions.append(pos)
        self.take("=>")
        head, head_pos = self.parse_atom()
        if self.peek() is not None:
            raise _SyntaxProblem(f"trailing tokens after clause: {self.peek()!r}", *self.loc())
        return body, head, positions, head_pos


class _SyntaxProblem(Exception):
    def __init__(self, message, line, col):
        super().__init__(message)
        self.message = message
        self.line = line
        self.col = col


def _resolve_terms(atom: Atom, pred: Predicate, spaces, rule_id, line, col, diags, in_constraint):
    """Classify plain identifiers in label positions as constants or variables."""
    new_args = []
    for i, term in enumerate(atom.args):
        sort = pred.arg_sorts[i]
        if sort in (TWEET_SORT, ENTITY_SORT):
            if term.kind == LABEL_VAR:
                diags.append(
                    Diagnostic(
                        rule_id,
                        "error",
                        f"ArityMismatch: label variable {term.text}? in non-label "
                        f"position {i} of {atom.predicate}",
                        line,
                        col,
                        code="ArityMismatch",
                    )
                )
            new_args.append(term)
            continue
        space = spaces.get(sort)
        if term.kind == LABEL_VAR:
            if pred.observed or space is None or not space.closed:
                diags.append(
                    Diagnostic(
                        rule_id,
                        "error",
                        f"ArityMismatch: {term.text}? cannot enumerate "
                        f"{'observed' if pred.observed else 'open'} space of {atom.predicate}",
                        line,
                        col,
                        code="ArityMismatch",
                    )
                )
            new_args.append(term)
            continue
        canon = space.canonical(term.text) if space is not None else None
        if canon is not None:
            new_args.append(Term(CONST, canon))
        else:
            new_args.append(term)  # variable bound elsewhere
    return Atom(atom.predicate, tuple(new_args), atom.negated)


def parse_program(source: str, schema: dict[str, Predicate] | None = None,
                  spaces: dict[str, LabelSpace] | None = None) -> ParseResult:
    """Parse rule-DSL text into a validated :class:`RuleProgram`.

    Never raises on bad input; syntax and semantic problems come back as
    error diagnostics and the offending lines are skipped.
    """
    schema = dict(schema or builtin_schema())
    spaces = dict(spaces or CORE_SPACES)
    templates: list[RuleTemplate] = []
    constraints: list[RuleTemplate] = []
    diags: list[Diagnostic] = []
    seen_ids: dict[str, int] = {}
    auto_n = 0

    for line_no, raw in enumerate(source.splitlines(), start=1):
        tokens = _tokenize(raw, line_no)
        if not tokens:
            continue
        # optional "<id>:" prefix, then optional "constraint:" marker
        rule_id = None
        is_constraint = False
        p = _LineParser(tokens, line_no)
        if len(tokens) >= 2 and tokens[1][0] == ":" and tokens[0][0] != "constraint":
            rule_id = tokens[0][0]
            p.pos = 2
        if p.peek() == "constraint" and p.pos + 1 < len(tokens) and tokens[p.pos + 1][0] == ":":
            is_constraint = True
            p.pos += 2
        if rule_id is None:
            rule_id = f"anon{auto_n}"
            auto_n += 1
        try:
            body, head, body_pos, head_pos = p.parse_clause()
        except _SyntaxProblem as e:
            diags.append(Diagnostic(rule_id, "error", f"SyntaxError: {e.message}", e.line, e.col,
                                    code="SyntaxError"))
            continue

        if rule_id in seen_ids:
            diags.append(
                Diagnostic(rule_id, "error",
                           f"DuplicateRuleId: {rule_id!r} first defined on line {seen_ids[rule_id]}",
                           line_no, 1, code="DuplicateRuleId"))
            continue
        seen_ids[rule_id] = line_no

        ok = True
        resolved_body = []
        for atom, pos in zip(body, body_pos):
            ln, col = pos[0]
            if atom.predicate not in schema:
                diags.append(Diagnostic(rule_id, "error",
                                        f"UnknownPredicate: {atom.predicate}", ln, col,
                                        code="UnknownPredicate"))
                ok = False
                continue
            pred = schema[atom.predicate]
            if len(atom.args) != pred.arity:
                diags.append(Diagnostic(
                    rule_id, "error",
                    f"ArityMismatch: {atom.predicate} takes {pred.arity} args, got {len(atom.args)}",
                    ln, col, code="ArityMismatch"))
                ok = False
                continue
            resolved_body.append(_resolve_terms(atom, pred, spaces, rule_id, ln, col, diags,
                                                is_constraint))
        hln, hcol = head_pos[0]
        resolved_head = None
        if head.predicate not in schema:
            diags.append(Diagnostic(rule_id, "error", f"UnknownPredicate: {head.predicate}",
                                    hln, hcol, code="UnknownPredicate"))
            ok = False
        else:
            pred = schema[head.predicate]
            if len(head.args) != pred.arity:
                diags.append(Diagnostic(
                    rule_id, "error",
                    f"ArityMismatch: {head.predicate} takes {pred.arity} args, got {len(head.args)}",
                    hln, hcol, code="ArityMismatch"))
                ok = False
            else:
                resolved_head = _resolve_terms(head, pred, spaces, rule_id, hln, hcol, diags,
                                               is_constraint)
        if not ok or resolved_head is None or any(d.rule_id == rule_id and d.severity == "error"
                                                  for d in diags):
            continue

        if not is_constraint:
            negs = [a for a in resolved_body + [resolved_head] if a.negated]
            if negs:
                diags.append(Diagnostic(
                    rule_id, "error",
                    f"SyntaxError: negated atom {negs[0].render()} outside a constraint",
                    line_no, 1, code="SyntaxError"))
                continue

        # head variables must be bound in the body or range over a label space
        body_vars = {t.text for a in resolved_body for t in a.args if t.kind in (VAR, LABEL_VAR)}
        unbound = [t for t in resolved_head.args
                   if t.kind == VAR and t.text not in body_vars]
        if unbound:
            diags.append(Diagnostic(
                rule_id, "error",
                f"UnboundHeadVariable: {unbound[0].text} not bound in body",
                hln, hcol, code="UnboundHeadVariable"))
            continue

        rule = RuleTemplate(
            id=rule_id,
            body=tuple(resolved_body),
            head=resolved_head,
            weighted=not is_constraint,
            scorer_id=rule_id if not is_constraint else None,
        )
        (constraints if is_constraint else templates).append(rule)

    program = RuleProgram(tuple(templates), tuple(constraints), schema, spaces)
    diags.extend(validate_program(program, _structural_done=True))
    return ParseResult(program, diags)


def validate_program(program: RuleProgram, _structural_done: bool = False) -> list[Diagnostic]:
    """Check program invariants; returns diagnostics (empty means valid).

    Structural checks (arity, binding, negation placement) are re-run for
    hand-built programs; parse output skips them since parsing already did.
    """
    diags: list[Diagnostic] = []
    seen = {}
    for rule in program.all_rules():
        if rule.id in seen:
            diags.append(Diagnostic(rule.id, "error", f"DuplicateRuleId: {rule.id!r}", 0, 0,
                                    code="DuplicateRuleId"))
        seen[rule.id] = True
        if rule.weighted and not rule.scorer_id:
            diags.append(Diagnostic(rule.id, "error",
                                    "MissingScorer: weighted rule has no scorer reference", 0, 0,
                                    code="MissingScorer"))
        if not rule.weighted and rule.scorer_id:
            diags.append(Diagnostic(rule.id, "error",
                                    "ConstraintScorer: hard constraint references a scorer", 0, 0,
                                    code="ConstraintScorer"))
        if not _structural_done:
            body_vars = {t.text for a in rule.body for t in a.args if t.kind in (VAR, LABEL_VAR)}
            for atom in rule.body + (rule.head,):
                if atom.predicate not in program.schema:
                    diags.append(Diagnostic(rule.id, "error",
                                            f"UnknownPredicate: {atom.predicate}", 0, 0,
                                            code="UnknownPredicate"))
                elif len(atom.args) != program.schema[atom.predicate].arity:
                    diags.append(Diagnostic(rule.id, "error",
                                            f"ArityMismatch: {atom.predicate}", 0, 0,
                                            code="ArityMismatch"))
                if atom.negated and rule.weighted:
                    diags.append(Diagnostic(rule.id, "error",
                                            "SyntaxError: negation outside a constraint", 0, 0,
                                            code="SyntaxError"))
            for t in rule.head.args:
                if t.kind == VAR and t.text not in body_vars:
                    diags.append(Diagnostic(rule.id, "error",
                                            f"UnboundHeadVariable: {t.text}", 0, 0,
                                            code="UnboundHeadVariable"))

    # decision predicates referenced by constraints but scored by no weighted rule
    scored = {t.head.predicate for t in program.templates}
    for c in program.constraints:
        for atom in c.body + (c.head,):
            pred = program.schema.get(atom.predicate)
            if pred is not None and not pred.observed and atom.predicate not in scored:
                diags.append(Diagnostic(
                    c.id, "warning",
                    f"constraint references un-scored predicate {atom.predicate}", 0, 0,
                    code="UnscoredPredicate"))
    # decision predicates that never appear in any head
    headed = {t.head.predicate for t in program.all_rules()}
    for name, pred in program.schema.items():
        if not pred.observed and name not in headed and program.all_rules():
            diags.append(Diagnostic(
                "", "warning", f"decision predicate {name} never appears in any head", 0, 0,
                code="UnusedDecisionPredicate"))
    return diags


def render_program(program: RuleProgram) -> str:
    return "\n".join(r.render() for r in program.all_rules()) + ("\n" if program.all_rules() else "")


def load_space_file(path) -> dict[str, LabelSpace]:
    """Read a key-value schema declaration file: ``space.<name> = v1, v2``."""
    spaces = {}
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, _, value = line.partition("=")
            key = key.strip()
            if key.startswith("space."):
                name = key[len("space."):]
                values = tuple(v.strip() for v in value.split(",") if v.strip())
                spaces[name] = LabelSpace(name, values or None)
    return spaces


DEFAULT_RULES = """\
# base classifiers
r0: Tweet(T) => IsMoral(T)
r1: Tweet(T) => HasMF(T, M?)
r2: Tweet(T) => VaxStance(T, S?)
r3: Mentions(T, E) => HasRole(E, R?)
r4: Mentions(T, E) => EntPolarity(E, P?)
# dependencies
r5: Mentions(T, E) & HasRole(E, R?) & EntPolarity(E, P?) => HasMF(T, M?)
r6: VaxStance(T, S?) => HasMF(T, M?)
r7: MentionsReason(T, A) => HasMF(T, M?)
r8: MentionsReason(T, A) => VaxStance(T, S?)
# consistency constraints
c0: constraint: IsMoral(T) => !HasMF(T, None)
c1: constraint: !IsMoral(T) => HasMF(T, None)
c3: constraint: Mentions(T1, E1) & Mentions(T2, E2) & SameEntity(E1, E2) & SameStance(T1, T2) & EntPolarity(E1, P?) => EntPolarity(E2, P?)
"""

BASE_RULE_IDS = ("r0", "r1", "r2", "r3", "r4")
DEPENDENCY_RULE_IDS = ("r5", "r6", "r7", "r8")
CONSTRAINT_IDS = ("c0", "c1", "c3")


def default_program() -> RuleProgram:
    """The bundled program: base rules r0-r4, dependencies r5-r8, constraints c0/c1/c3."""
    result = parse_program(DEFAULT_RULES)
    return result.program_or_raise()
