"""Correlative sparsity: cliques from block supports, RIP check, objective split."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

from .model import PmiProblem
from .poly import Polynomial

log = logging.getLogger(__name__)

EXHAUSTIVE_LIMIT = 8
GREEDY_NODE_LIMIT = 200_000


class SparsityError(ValueError):
    pass


@dataclass(frozen=True)
class SparsityPattern:
    """Cliques are 0-based variable index sets."""

    cliques: tuple[frozenset[int], ...]
    block_assignment: tuple[int, ...]
    objective_split: tuple[Polynomial, ...]
    ordering: tuple[int, ...] | None = None

    def summary(self) -> str:
        lines = []
        for c, I in enumerate(self.cliques):
            blocks = [i + 1 for i, a in enumerate(self.block_assignment) if a == c]
            vars_ = ",".join(f"x{v + 1}" for v in sorted(I))
            lines.append(f"clique {c + 1}: {{{vars_}}} blocks {blocks} objective terms {len(self.objective_split[c])}")
        if self.ordering is not None:
            lines.append("RIP ordering: " + " ".join(str(i + 1) for i in self.ordering))
        return "\n".join(lines)


@dataclass(frozen=True)
class RipResult:
    ok: bool
    ordering: tuple[int, ...] | None
    violating_clique: int | None = None
    intersection: frozenset[int] | None = None


def extract_cliques(p: PmiProblem) -> SparsityPattern:
    """Variable sets of the blocks, merged when identical, plus objective split."""
    cliques: list[frozenset[int]] = []
    assignment: list[int] = []
    for b in p.blocks:
        sup = b.matrix.support()
        if sup not in cliques:
            cliques.append(sup)
        assignment.append(cliques.index(sup))
    covered = frozenset().union(*cliques)
    missing = set(range(p.n)) - covered
    split_terms: list[dict] = [{} for _ in cliques]
    for mono, c in p.objective.items():
        sup = {i for i, e in enumerate(mono) if e}
        for k, I in enumerate(cliques):
            if sup <= I:
                split_terms[k][mono] = c
                break
        else:
            raise SparsityError(f"objective term not covered by any clique: monomial {mono}")
    if missing:
        log.warning("variables %s appear in no block", sorted(v + 1 for v in missing))
    split = tuple(Polynomial(p.n, t) for t in split_terms)
    return SparsityPattern(tuple(cliques), tuple(assignment), split)


def _rip_violation(cliques, order) -> tuple[int, frozenset[int]] | None:
    seen: set[int] = set()
    for pos, i in enumerate(order):
        inter = frozenset(cliques[i] & seen)
        if pos > 0 and not any(inter <= cliques[order[k]] for k in range(pos)):
            return i, inter
        seen |= cliques[i]
    return None


def check_rip(pattern: SparsityPattern) -> RipResult:
    """Search for a clique ordering with the running intersection property."""
    cliques = pattern.cliques
    t = len(cliques)
    natural = tuple(range(t))
    first_fail = _rip_violation(cliques, natural)
    if first_fail is None:
        return RipResult(True, natural)
    greedy = t > EXHAUSTIVE_LIMIT
    budget = [GREEDY_NODE_LIMIT if greedy else float("inf")]

    def extend(order: list[int], seen: set[int]) -> list[int] | None:
        if len(order) == t:
            return order
        cands = [i for i in range(t) if i not in order]
        if greedy:
            cands.sort(key=lambda i: -len(cliques[i] & seen))
        for i in cands:
            budget[0] -= 1
            if budget[0] < 0:
                return None
            inter = cliques[i] & seen
            if any(inter <= cliques[k] for k in order):
                got = extend(order + [i], seen | cliques[i])
                if got is not None:
                    return got
        return None

    starts = sorted(range(t), key=lambda i: -len(cliques[i])) if greedy else range(t)
    for s in starts:
        got = extend([s], set(cliques[s]))
        if got is not None:
            return RipResult(True, tuple(got))
    i, inter = first_fail
    return RipResult(False, None, i, inter)


def validated_pattern(p: PmiProblem) -> SparsityPattern:
    pattern = extract_cliques(p)
    res = check_rip(pattern)
    if not res.ok:
        raise SparsityError(
            f"running intersection property fails at clique {res.violating_clique + 1}: "
            f"intersection {{{', '.join(f'x{v + 1}' for v in sorted(res.intersection))}}} "
            "is contained in no earlier clique"
        )
    log.info("per-clique compactness (and contraction for nonlinear blocks) is assumed, not checked")
    return replace(pattern, ordering=res.ordering)
