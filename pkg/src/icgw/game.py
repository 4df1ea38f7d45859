"""Exact simulation of the Information Causality game.

Every run returns the full joint distribution over ``(a_1..a_N, b, x, beta)``
where ``b`` is stored zero-based (value ``i - 1`` stands for index ``i``).
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .boxes import BipartiteBox, is_no_signaling
from .gray_wyner import RatePoint
from .info import (
    Channel,
    DomainError,
    JointPmf,
    condition_on_event,
    conditional_entropy,
    entropy,
    marginal_tensor,
    mutual_information,
)

IC_TOL = 1e-9


@dataclass(frozen=True)
class BoxStrategy:
    """Nested XOR protocol over N = 2**k bits; ``level_boxes[0]`` is the bottom level."""

    level_boxes: tuple[BipartiteBox, ...]

    def __post_init__(self):
        boxes = tuple(self.level_boxes)
        if not boxes:
            raise DomainError("a box strategy needs at least one level")
        for b in boxes:
            if not b.is_binary:
                raise DomainError("nested protocol needs binary boxes")
            if not is_no_signaling(b):
                raise DomainError("nested protocol needs no-signaling boxes")
        object.__setattr__(self, "level_boxes", boxes)

    @property
    def k(self) -> int:
        return len(self.level_boxes)

    @classmethod
    def uniform(cls, box: BipartiteBox, k: int) -> "BoxStrategy":
        return cls((box,) * k)


@dataclass(frozen=True, eq=False)
class ClassicalStrategy:
    """Deterministic maps driven by a shared seed r.

    ``alice_table[a, r]`` is the message for flat source index ``a``;
    ``bob_table[x, b, r]`` is the guess for message ``x`` and zero-based index ``b``.
    """

    randomness: np.ndarray
    alice_table: np.ndarray
    bob_table: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.randomness, dtype=float).reshape(-1)
        if r.min() < 0 or abs(r.sum() - 1) > 1e-9:
            raise DomainError("shared randomness must be a probability vector")
        at = np.asarray(self.alice_table, dtype=int)
        bt = np.asarray(self.bob_table, dtype=int)
        if at.ndim != 2 or at.shape[1] != r.size:
            raise DomainError("alice_table must have shape (source alphabet, seed arity)")
        if bt.ndim != 3 or bt.shape[2] != r.size:
            raise DomainError("bob_table must have shape (messages, N, seed arity)")
        if at.min() < 0 or at.max() >= bt.shape[0]:
            raise DomainError("alice_table produces messages outside the message alphabet")
        if bt.min() < 0 or bt.max() > 1:
            raise DomainError("Bob's guesses must be bits")
        for a in (r, at, bt):
            a.setflags(write=False)
        object.__setattr__(self, "randomness", r)
        object.__setattr__(self, "alice_table", at)
        object.__setattr__(self, "bob_table", bt)

    @property
    def n_messages(self) -> int:
        return self.bob_table.shape[0]

    @property
    def n_bits(self) -> int:
        return self.bob_table.shape[1]

    @classmethod
    def from_maps(
        cls,
        n_bits: int,
        n_messages: int,
        alice_map: Callable[[tuple, int], int],
        bob_map: Callable[[int, int, int], int],
        randomness: Sequence[float] = (1.0,),
    ) -> "ClassicalStrategy":
        """Tabulate callables; ``alice_map(bits, r)``, ``bob_map(x, b, r)`` with zero-based b."""
        rs = range(len(randomness))
        at = [[alice_map(bits, r) for r in rs] for bits in itertools.product(range(2), repeat=n_bits)]
        bt = [[[bob_map(x, b, r) for r in rs] for b in range(n_bits)] for x in range(n_messages)]
        return cls(np.asarray(randomness), np.asarray(at), np.asarray(bt))

    def to_dict(self) -> dict:
        return {
            "randomness": self.randomness.tolist(),
            "alice_table": self.alice_table.tolist(),
            "bob_table": self.bob_table.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ClassicalStrategy":
        return cls(np.asarray(d.get("randomness", [1.0])), np.asarray(d["alice_table"]), np.asarray(d["bob_table"]))

    @classmethod
    def load(cls, path: str | Path) -> "ClassicalStrategy":
        with open(path) as f:
            return cls.from_dict(json.load(f))


@dataclass
class ICEvaluation:
    h_x: float
    mutual_infos: list[float]
    cond_entropies: list[float]
    success_probs: list[float]
    h_source: float
    eq1_lhs: float
    eq1_rhs: float
    eq2_lhs: float
    eq2_rhs: float
    eq1_holds: bool
    eq2_holds: bool
    rate_point: RatePoint = field(repr=False)

    @property
    def eq1_violated(self) -> bool:
        return not self.eq1_holds

    @property
    def eq2_violated(self) -> bool:
        return not self.eq2_holds

    def to_dict(self) -> dict:
        return {
            "H_x": self.h_x,
            "I": list(self.mutual_infos),
            "C": list(self.cond_entropies),
            "success_probs": list(self.success_probs),
            "H_source": self.h_source,
            "eq1_lhs": self.eq1_lhs,
            "eq1_rhs": self.eq1_rhs,
            "eq2_lhs": self.eq2_lhs,
            "eq2_rhs": self.eq2_rhs,
            "eq1_violated": self.eq1_violated,
            "eq2_violated": self.eq2_violated,
            "rate_point": self.rate_point.as_list(),
        }


def _check_binary_source(p: JointPmf):
    if any(a != 2 for a in p.arities):
        raise DomainError("the IC game needs a source of bits")


class _NestedProtocol:
    """Message and Bob-path distributions of the nested XOR protocol, memoized per subtree."""

    def __init__(self, boxes: Sequence[BipartiteBox]):
        self.boxes = [b.probs for b in boxes]
        self.alice = [b.alice_marginal() for b in boxes]
        self._msg: dict = {}
        self._path: dict = {}

    def message(self, bits: tuple) -> np.ndarray:
        """Distribution of the 1-bit message Alice produces for this subtree."""
        if bits in self._msg:
            return self._msg[bits]
        out = np.zeros(2)
        if len(bits) == 1:
            out[bits[0]] = 1.0
        else:
            half = len(bits) // 2
            pa = self.alice[half.bit_length() - 1]  # bottom pairs are level 1
            left, right = self.message(bits[:half]), self.message(bits[half:])
            for ml, mr, oa in itertools.product(range(2), repeat=3):
                out[ml ^ oa] += left[ml] * right[mr] * pa[oa, ml ^ mr]
        self._msg[bits] = out
        return out

    def bob_path(self, bits: tuple, address: tuple) -> np.ndarray:
        """``P[m, d]``: subtree message m and XOR d of Bob's box outputs along his address."""
        key = (bits, address)
        if key in self._path:
            return self._path[key]
        out = np.zeros((2, 2))
        if len(bits) == 1:
            out[bits[0], 0] = 1.0
        else:
            half = len(bits) // 2
            box = self.boxes[half.bit_length() - 1]
            c = address[0]
            children = (bits[:half], bits[half:])
            on_path = self.bob_path(children[c], address[1:])
            off_path = self.message(children[1 - c])
            for mc, dc, mo, oa, ob in itertools.product(range(2), repeat=5):
                w = on_path[mc, dc] * off_path[mo]
                if w == 0.0:
                    continue
                ml, mr = (mc, mo) if c == 0 else (mo, mc)
                out[ml ^ oa, ob ^ dc] += w * box[oa, ob, ml ^ mr, c]
        self._path[key] = out
        return out


def run_box_strategy(p: JointPmf, s: BoxStrategy) -> JointPmf:
    """Exact joint over (a_1..a_N, b, x, beta) for the nested protocol.

    Address bits of ``b - 1`` are consumed most-significant first, starting
    from the top-level box.
    """
    _check_binary_source(p)
    n = 2**s.k
    if p.n_vars != n:
        raise DomainError(f"nested protocol with k={s.k} needs {n} bits, source has {p.n_vars}")
    proto = _NestedProtocol(s.level_boxes)
    joint = np.zeros((2,) * n + (n, 2, 2))
    src = p.tensor
    for bits in itertools.product(range(2), repeat=n):
        pa = src[bits]
        if pa == 0.0:
            continue
        for b in range(n):
            address = tuple((b >> (s.k - 1 - j)) & 1 for j in range(s.k))
            md = proto.bob_path(bits, address)
            for m, d in itertools.product(range(2), repeat=2):
                joint[bits + (b, m, m ^ d)] += pa * md[m, d] / n
    return JointPmf.from_tensor(joint)


def run_classical_strategy(p: JointPmf, s: ClassicalStrategy) -> JointPmf:
    _check_binary_source(p)
    n = p.n_vars
    if s.n_bits != n or s.alice_table.shape[0] != p.alphabet_size:
        raise DomainError("strategy tables do not match the source")
    m = s.n_messages
    joint = np.zeros((p.alphabet_size, n, m, 2))
    for a, r in itertools.product(range(p.alphabet_size), range(s.randomness.size)):
        w = p.probs[a] * s.randomness[r]
        if w == 0.0:
            continue
        x = s.alice_table[a, r]
        for b in range(n):
            joint[a, b, x, s.bob_table[x, b, r]] += w / n
    return JointPmf.from_tensor(joint.reshape((2,) * n + (n, m, 2)))


def evaluate_ic(joint: JointPmf, p: JointPmf) -> ICEvaluation:
    """IC quantities of a game joint ``(a_1..a_N, b, x, beta)`` for source ``p``."""
    n = p.n_vars
    if joint.n_vars != n + 3 or joint.arities[:n] != p.arities or joint.arities[n] != n:
        raise DomainError("joint is not a game distribution over (a, b, x, beta) for this source")
    src = tuple(range(n))
    b_var, x_var, g_var = n, n + 1, n + 2
    ab = marginal_tensor(joint, src + (b_var,))
    if np.max(np.abs(ab - p.tensor[..., None] / n)) > 1e-9:
        raise DomainError("b must be uniform and independent of the source, with matching source marginal")

    h_x = entropy(joint, [x_var])
    infos, conds, success = [], [], []
    for i in range(n):
        cj = condition_on_event(joint, b_var, i)
        infos.append(mutual_information(cj, [i], [g_var]))
        conds.append(conditional_entropy(cj, [i], [g_var]))
        ag = marginal_tensor(cj, [i, g_var])
        success.append(float(ag[0, 0] + ag[1, 1]))
    h_src = entropy(p, src)
    eq1_rhs = float(sum(infos))
    eq2_lhs = h_x + float(sum(conds))
    return ICEvaluation(
        h_x=h_x,
        mutual_infos=infos,
        cond_entropies=conds,
        success_probs=success,
        h_source=h_src,
        eq1_lhs=h_x,
        eq1_rhs=eq1_rhs,
        eq2_lhs=eq2_lhs,
        eq2_rhs=h_src,
        eq1_holds=h_x >= eq1_rhs - IC_TOL,
        eq2_holds=eq2_lhs >= h_src - IC_TOL,
        rate_point=RatePoint(h_x, tuple(conds)),
    )


def induced_rate_point(e: ICEvaluation) -> RatePoint:
    return RatePoint(e.h_x, tuple(e.cond_entropies))


def message_witness(p: JointPmf, s: ClassicalStrategy):
    """Channel a -> (x, r) realizing a Gray-Wyner point that dominates the induced rate point."""
    m, nr = s.n_messages, s.randomness.size
    rows = np.zeros((p.alphabet_size, m * nr))
    for a, r in itertools.product(range(p.alphabet_size), range(nr)):
        rows[a, s.alice_table[a, r] * nr + r] += s.randomness[r]
    return Channel(rows)
