"""Truncated Kronecker-power cones as lists of PSD slots.

An element of an order-``m`` cone is ``lambda0 + sum_s <X_s, W_s(x)>`` with
``lambda0 >= 0`` and ``X_s`` PSD.  Every generator ``W_s`` is a word, i.e. a
Kronecker product of *letters* (the constraint blocks, or for nonlinear
problems the blocks and their complements ``I - G_i``).  The scalar
``lambda0`` is the slot with the empty word.
"""

from __future__ import annotations

import enum
import hashlib
import itertools
import json
from dataclasses import dataclass, field
from functools import cached_property
from math import comb, prod
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .model import BlockTag, PmiProblem, ProblemKind
from .poly import (PolyMatrix, Polynomial, batched_kron, block_diag, dilate,
                   monomials_up_to, trace_inner, word_eval)

if TYPE_CHECKING:
    from .sparsity import SparsityPattern

DEFAULT_MAX_BLOCK = 4096
DEFAULT_MAX_WORDS = 10**6


class ConeSizeError(ValueError):
    """The requested cone would be unreasonably large."""


class ConeForm(str, enum.Enum):
    DENSE = "dense"
    BLOCK = "block"
    MIXED = "mixed"
    SPARSE = "sparse"


@dataclass(frozen=True)
class Word:
    """A word over ``t`` noncommuting letters (0-based letter indices)."""

    letters: tuple[int, ...]

    def __post_init__(self):
        if len(self.letters) < 1:
            raise ValueError("words have length >= 1")

    def __len__(self) -> int:
        return len(self.letters)

    def frequencies(self, t: int) -> tuple[int, ...]:
        out = [0] * t
        for a in self.letters:
            out[a] += 1
        return tuple(out)

    def label(self, names: Sequence[str] | None = None) -> str:
        names = names or [f"X{i + 1}" for i in range(max(self.letters) + 1)]
        parts = []
        for a, grp in itertools.groupby(self.letters):
            k = len(list(grp))
            parts.append(names[a] + (f"^{k}" if k > 1 else ""))
        return "".join(parts)


def enumerate_words(t: int, max_len: int) -> list[Word]:
    """Words of length 1..max_len, length first then lexicographic."""
    return [Word(w) for k in range(1, max_len + 1) for w in itertools.product(range(t), repeat=k)]


@dataclass(frozen=True)
class ConeSlot:
    key: str
    word: tuple[int, ...]
    size: int
    degree: int
    letters: tuple[PolyMatrix, ...] = field(repr=False, compare=False)
    clique: int | None = None

    @property
    def is_scalar_slot(self) -> bool:
        return not self.word

    @cached_property
    def generator(self) -> PolyMatrix:
        """Symbolic generator; expensive for long words, computed on demand."""
        if not self.word:
            n = self.letters[0].n if self.letters else 0
            return PolyMatrix.scalar(Polynomial.constant(n, 1.0))
        return word_eval(self.word, self.letters)

    def evaluate(self, points: np.ndarray, letter_values: Sequence[np.ndarray] | None = None) -> np.ndarray:
        """Generator values at each point, shape ``(P, size, size)``."""
        pts = np.atleast_2d(points)
        if not self.word:
            return np.ones((pts.shape[0], 1, 1))
        if letter_values is None:
            letter_values = [L.evaluate_many(pts) for L in self.letters]
        out = letter_values[self.word[0]]
        for a in self.word[1:]:
            out = batched_kron(out, letter_values[a])
        return out


@dataclass(frozen=True)
class ConeSpec:
    form: ConeForm
    order: int
    n: int
    kind: ProblemKind
    letters: tuple[PolyMatrix, ...]
    letter_names: tuple[str, ...]
    slots: tuple[ConeSlot, ...]

    def __post_init__(self):
        if not self.slots or self.slots[0].word:
            raise ValueError("the scalar lambda0 slot must come first")

    @property
    def lambda0(self) -> ConeSlot:
        return self.slots[0]

    @property
    def sizes(self) -> list[int]:
        return [s.size for s in self.slots]

    @property
    def degree(self) -> int:
        return max(s.degree for s in self.slots)

    @property
    def total_dim(self) -> int:
        return sum(s.size * (s.size + 1) // 2 for s in self.slots)

    def keys(self) -> list[str]:
        return [s.key for s in self.slots]

    def letter_values(self, points: np.ndarray) -> list[np.ndarray]:
        return [L.evaluate_many(points) for L in self.letters]

    def evaluate_element(self, mats: Sequence[np.ndarray], points: np.ndarray) -> np.ndarray:
        """``lambda0 + sum <X_s, W_s(p)>`` at each point for given slot matrices."""
        pts = np.atleast_2d(points)
        lv = self.letter_values(pts)
        total = np.zeros(pts.shape[0])
        for slot, X in zip(self.slots, mats):
            W = slot.evaluate(pts, lv)
            total += np.einsum("pij,ij->p", W, np.asarray(X, dtype=float).reshape(slot.size, slot.size))
        return total

    def expand_element(self, mats: Sequence[np.ndarray]) -> Polynomial:
        """Symbolic expansion of a cone element (small cones only)."""
        out = Polynomial.zero(self.n)
        for slot, X in zip(self.slots, mats):
            out = out + trace_inner(np.asarray(X, dtype=float).reshape(slot.size, slot.size), slot.generator)
        return out

    @cached_property
    def content_hash(self) -> str:
        h = hashlib.sha256()
        head = {"form": self.form.value, "order": self.order, "n": self.n, "kind": self.kind.value}
        h.update(json.dumps(head, sort_keys=True).encode())
        for L in self.letters:
            for (i, j), p in L.upper_items():
                h.update(json.dumps([L.q, i, j, p.to_json()]).encode())
        for s in self.slots:
            h.update(json.dumps([s.key, list(s.word), s.size]).encode())
        return h.hexdigest()[:16]


def _lambda0(letters: tuple[PolyMatrix, ...]) -> ConeSlot:
    return ConeSlot("lambda0", (), 1, 0, letters)


def _word_slot(key: str, word: tuple[int, ...], letters: tuple[PolyMatrix, ...], clique=None) -> ConeSlot:
    size = prod(letters[a].q for a in word)
    deg = sum(letters[a].degree for a in word)
    return ConeSlot(key, word, size, deg, letters, clique)


def _check_size(size: int, cap: int, what: str) -> None:
    if size > cap:
        raise ConeSizeError(
            f"{what} needs a PSD block of size {size} > cap {cap}; use block/sparse form or lower m"
        )


def build_dense(p: PmiProblem, m: int, *, max_block_size: int = DEFAULT_MAX_BLOCK) -> ConeSpec:
    """One slot per Kronecker power of G (or of its dilation when nonlinear).

    Several blocks are merged into one block-diagonal G first.
    """
    if m < 1:
        raise ValueError("order m must be >= 1")
    G = p.merged()
    if p.kind is ProblemKind.NONLINEAR:
        letter, name = dilate(G), "Gd"
    else:
        letter, name = G, "G"
    _check_size(letter.q ** m, max_block_size, f"dense order {m}")
    letters = (letter,)
    slots = [_lambda0(letters)] + [_word_slot(f"k={k}", (0,) * k, letters) for k in range(1, m + 1)]
    return ConeSpec(ConeForm.DENSE, m, p.n, p.kind, letters, (name,), tuple(slots))


def _block_letters(p: PmiProblem) -> tuple[tuple[PolyMatrix, ...], tuple[str, ...]]:
    letters: list[PolyMatrix] = []
    names: list[str] = []
    nonlinear = p.kind is ProblemKind.NONLINEAR
    for i, b in enumerate(p.blocks):
        letters.append(b.matrix)
        names.append(f"G{i + 1}")
        if nonlinear:
            letters.append(PolyMatrix.identity(p.n, b.q) - b.matrix)
            names.append(f"I-G{i + 1}")
    return tuple(letters), tuple(names)


def build_block(
    p: PmiProblem,
    m: int,
    *,
    max_words: int = DEFAULT_MAX_WORDS,
    max_block_size: int = DEFAULT_MAX_BLOCK,
    commutative: bool = False,
) -> ConeSpec:
    """One slot per word of length 1..m over the blocks.

    Nonlinear problems use 2t letters: letter ``2i`` is ``G_i`` and letter
    ``2i + 1`` is ``I - G_i`` (0-based).

    With ``commutative=True`` only the sorted representative of each letter
    multiset is kept.  Reordering the factors of a Kronecker product is a
    permutation similarity, so the generated cone is unchanged.
    """
    if m < 1:
        raise ValueError("order m must be >= 1")
    letters, names = _block_letters(p)
    L = len(letters)
    if commutative:
        count = sum(comb(L + k - 1, k) for k in range(1, m + 1))
    else:
        count = sum(L ** k for k in range(1, m + 1))
    if count > max_words:
        raise ConeSizeError(f"{count} words exceed the cap {max_words}; lower m or use sparse form")
    _check_size(max(M.q for M in letters) ** m, max_block_size, f"block order {m}")
    slots = [_lambda0(letters)]
    words = ([Word(c) for k in range(1, m + 1) for c in itertools.combinations_with_replacement(range(L), k)]
             if commutative else enumerate_words(L, m))
    for w in words:
        slots.append(_word_slot(w.label(names), w.letters, letters))
    return ConeSpec(ConeForm.BLOCK, m, p.n, p.kind, letters, names, tuple(slots))


def build_scalar_mixed(p: PmiProblem, m: int, *, max_block_size: int = DEFAULT_MAX_BLOCK) -> ConeSpec:
    """Collapse scalar blocks by commutativity: one slot per exponent vector.

    Requires a linear problem with exactly one matrix block; the scalar
    blocks ``g_1..g_{t-1}`` come first and the matrix block last.
    """
    if m < 1:
        raise ValueError("order m must be >= 1")
    if p.kind is not ProblemKind.LINEAR:
        raise ValueError("mixed form requires a linear problem")
    mats = [b for b in p.blocks if b.tag is BlockTag.MATRIX]
    scalars = [b for b in p.blocks if b.tag is BlockTag.SCALAR]
    if len(mats) != 1:
        raise ValueError(f"mixed form requires exactly one matrix block, found {len(mats)}")
    _check_size(mats[0].q ** m, max_block_size, f"mixed order {m}")
    letters = tuple(b.matrix for b in scalars) + (mats[0].matrix,)
    names = tuple(f"g{i + 1}" for i in range(len(scalars))) + ("G",)
    t = len(letters)
    slots = [_lambda0(letters)]
    for gamma in monomials_up_to(t, m)[1:]:
        word = tuple(a for a in range(t) for _ in range(gamma[a]))
        slots.append(_word_slot("gamma=" + ",".join(map(str, gamma)), word, letters))
    return ConeSpec(ConeForm.MIXED, m, p.n, p.kind, letters, names, tuple(slots))


def build_sparse(
    p: PmiProblem,
    pattern: SparsityPattern,
    m: int,
    *,
    max_block_size: int = DEFAULT_MAX_BLOCK,
) -> ConeSpec:
    """Sum of per-clique dense cones sharing one scalar slot."""
    if m < 1:
        raise ValueError("order m must be >= 1")
    if pattern.ordering is None:
        raise ValueError("sparsity pattern has not been validated (running intersection unchecked)")
    nonlinear = p.kind is ProblemKind.NONLINEAR
    letters: list[PolyMatrix] = []
    names: list[str] = []
    owners: list[int] = []
    for c in range(len(pattern.cliques)):
        members = [p.blocks[i].matrix for i, a in enumerate(pattern.block_assignment) if a == c]
        if not members:
            continue
        G = block_diag(*members)
        letters.append(dilate(G) if nonlinear else G)
        names.append(f"C{c + 1}")
        owners.append(c)
    letters_t = tuple(letters)
    slots = [_lambda0(letters_t)]
    for li, (L, c) in enumerate(zip(letters_t, owners)):
        _check_size(L.q ** m, max_block_size, f"sparse order {m}")
        for k in range(1, m + 1):
            slots.append(_word_slot(f"clique{c + 1}:k={k}", (li,) * k, letters_t, clique=c))
    return ConeSpec(ConeForm.SPARSE, m, p.n, p.kind, letters_t, tuple(names), tuple(slots))


def build_cone(p: PmiProblem, m: int, form: ConeForm | str, pattern=None, **caps) -> ConeSpec:
    form = ConeForm(form)
    if form is ConeForm.DENSE:
        return build_dense(p, m, **{k: v for k, v in caps.items() if k == "max_block_size"})
    if form is ConeForm.BLOCK:
        return build_block(p, m, **caps)
    if form is ConeForm.MIXED:
        return build_scalar_mixed(p, m, **{k: v for k, v in caps.items() if k == "max_block_size"})
    if pattern is None:
        from .sparsity import validated_pattern
        pattern = validated_pattern(p)
    return build_sparse(p, pattern, m, **{k: v for k, v in caps.items() if k == "max_block_size"})
