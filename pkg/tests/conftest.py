"""Shared builders for hand-rolled and random 0-1 inference problems.

These construct InferenceProblem values directly, bypassing ground(), so the
solver tests do not depend on the grounding code they sit next to.
"""

import numpy as np

from opinionlab.inference import (
    AtomBlock,
    GroundedConstraint,
    GroundedRule,
    InferenceProblem,
    Literal,
)


def build_problem(blocks_spec, rules_spec, constraints_spec=(), seeds=None):
    """blocks_spec: list of (predicate, args, labels-or-None).

    rules_spec: (template_id, body literal specs, head spec, weight) with a
    literal spec = (atom index, negated).  Atom index refers to the flat
    indicator numbering implied by blocks_spec.
    """
    blocks = []
    first = 0
    for pred, args, labels in blocks_spec:
        blk = AtomBlock(pred, tuple(args), tuple(labels) if labels is not None else None, first)
        blocks.append(blk)
        first += blk.size
    n_atoms = first
    rules = []
    for i, (tid, body, head, weight) in enumerate(rules_spec):
        rules.append(GroundedRule(
            tid, f"{tid}#{i}",
            tuple(Literal(b[0], bool(b[1])) for b in body),
            Literal(head[0], bool(head[1])), float(weight), n_atoms + i))
    constraints = []
    for i, (tid, body, head) in enumerate(constraints_spec):
        constraints.append(GroundedConstraint(
            tid, f"{tid}#{i}",
            tuple(Literal(b[0], bool(b[1])) for b in body),
            Literal(head[0], bool(head[1]))))
    return InferenceProblem(blocks, rules, constraints, dict(seeds or {}), n_atoms)


def random_problem(rng: np.random.Generator, max_indicators: int = 12,
                   weight_range: float = 5.0):
    """A random mix of boolean and exactly-one blocks with random clauses."""
    blocks_spec = []
    n_atoms = 0
    while True:
        if blocks_spec and (n_atoms >= max_indicators - 1 or rng.random() < 0.25):
            break
        if rng.random() < 0.4:
            size = 1
            blocks_spec.append((f"B{len(blocks_spec)}", (f"a{len(blocks_spec)}",), None))
        else:
            size = int(rng.integers(2, min(5, max_indicators - n_atoms + 1)))
            labels = tuple(f"L{k}" for k in range(size))
            blocks_spec.append((f"M{len(blocks_spec)}", (f"a{len(blocks_spec)}",), labels))
        n_atoms += size

    def random_literal(negatable):
        idx = int(rng.integers(n_atoms))
        neg = bool(rng.random() < 0.3) if negatable else False
        return (idx, neg)

    rules_spec = []
    for i in range(int(rng.integers(1, 9))):
        body = [random_literal(False) for _ in range(int(rng.integers(0, 3)))]
        head = random_literal(False)
        weight = float(rng.uniform(-weight_range, weight_range))
        rules_spec.append((f"t{i}", body, head, weight))
    constraints_spec = []
    for i in range(int(rng.integers(0, 3))):
        body = [random_literal(True) for _ in range(int(rng.integers(1, 3)))]
        head = random_literal(True)
        constraints_spec.append((f"c{i}", body, head))
    return build_problem(blocks_spec, rules_spec, constraints_spec)
