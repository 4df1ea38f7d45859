"""Bipartite no-signaling boxes p(o_A, o_B | i_A, i_B)."""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .info import NORM_TOL, DomainError

TSIRELSON = 2 * math.sqrt(2)


@dataclass(frozen=True, eq=False)
class BipartiteBox:
    """Dense box; ``probs[o_A, o_B, i_A, i_B]``.

    Normalization is enforced on construction. No-signaling is not, so that
    signaling boxes can be represented and rejected by :func:`is_no_signaling`.
    """

    probs: np.ndarray

    def __post_init__(self):
        probs = np.array(self.probs, dtype=float)
        if probs.ndim != 4:
            raise DomainError("box probabilities must be a 4-index array [o_A, o_B, i_A, i_B]")
        if not np.all(np.isfinite(probs)) or probs.min() < -1e-15:
            raise DomainError("box probabilities must be nonnegative")
        probs = np.clip(probs, 0.0, None)
        if np.max(np.abs(probs.sum(axis=(0, 1)) - 1.0)) > NORM_TOL:
            raise DomainError("box is not normalized for every input pair")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @property
    def output_arities(self) -> tuple[int, int]:
        return self.probs.shape[0], self.probs.shape[1]

    @property
    def input_arities(self) -> tuple[int, int]:
        return self.probs.shape[2], self.probs.shape[3]

    @property
    def is_binary(self) -> bool:
        return self.probs.shape == (2, 2, 2, 2)

    def alice_marginal(self) -> np.ndarray:
        """``m[o_A, i_A]``, read off at i_B = 0."""
        return self.probs.sum(axis=1)[:, :, 0]

    def to_dict(self) -> dict:
        return {
            "output_arities": list(self.output_arities),
            "input_arities": list(self.input_arities),
            "probs": self.probs.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BipartiteBox":
        box = cls(np.asarray(d["probs"], dtype=float))
        if "output_arities" in d and tuple(d["output_arities"]) != box.output_arities:
            raise DomainError("output_arities do not match the probability array")
        if "input_arities" in d and tuple(d["input_arities"]) != box.input_arities:
            raise DomainError("input_arities do not match the probability array")
        return box

    def __eq__(self, other):
        if not isinstance(other, BipartiteBox):
            return NotImplemented
        return np.array_equal(self.probs, other.probs)


def pr_box() -> BipartiteBox:
    p = np.zeros((2, 2, 2, 2))
    for oa, ob, ia, ib in itertools.product(range(2), repeat=4):
        if oa ^ ob == ia & ib:
            p[oa, ob, ia, ib] = 0.5
    return BipartiteBox(p)


def uniform_noise_box() -> BipartiteBox:
    return BipartiteBox(np.full((2, 2, 2, 2), 0.25))


def isotropic_box(eta: float) -> BipartiteBox:
    if not 0.0 <= eta <= 1.0:
        raise DomainError(f"eta must lie in [0, 1], got {eta}")
    return BipartiteBox(eta * pr_box().probs + (1 - eta) * uniform_noise_box().probs)


def local_deterministic_box(f_a: Sequence[int], f_b: Sequence[int], output_arities=(2, 2)) -> BipartiteBox:
    """Box with o_A = f_a[i_A] and o_B = f_b[i_B]."""
    p = np.zeros((output_arities[0], output_arities[1], len(f_a), len(f_b)))
    for ia, ib in itertools.product(range(len(f_a)), range(len(f_b))):
        p[f_a[ia], f_b[ib], ia, ib] = 1.0
    return BipartiteBox(p)


def all_local_deterministic_boxes() -> list[BipartiteBox]:
    """The 16 binary local deterministic boxes."""
    maps = list(itertools.product(range(2), repeat=2))
    return [local_deterministic_box(fa, fb) for fa in maps for fb in maps]


def mix(boxes: Sequence[BipartiteBox], weights: Sequence[float]) -> BipartiteBox:
    w = np.asarray(weights, dtype=float)
    if len(boxes) == 0 or len(boxes) != w.size:
        raise DomainError("need one weight per box")
    if w.min() < 0 or abs(w.sum() - 1.0) > NORM_TOL:
        raise DomainError("mixture weights must be nonnegative and sum to 1")
    shape = boxes[0].probs.shape
    if any(b.probs.shape != shape for b in boxes):
        raise DomainError("cannot mix boxes of different arities")
    return BipartiteBox(np.tensordot(w, np.stack([b.probs for b in boxes]), axes=1))


def correlators(box: BipartiteBox) -> np.ndarray:
    """``E[i_A, i_B] = E[(-1)^(o_A xor o_B) | i_A, i_B]``."""
    if not box.is_binary:
        raise DomainError("CHSH scoring needs a binary box")
    sign = np.array([[1.0, -1.0], [-1.0, 1.0]])
    return np.einsum("ab,abxy->xy", sign, box.probs)


def chsh_value(box: BipartiteBox) -> float:
    e = correlators(box)
    return float(e[0, 0] + e[0, 1] + e[1, 0] - e[1, 1])


def is_no_signaling(box: BipartiteBox, tol: float = NORM_TOL) -> bool:
    pa = box.probs.sum(axis=1)  # [o_A, i_A, i_B]
    pb = box.probs.sum(axis=0)  # [o_B, i_A, i_B]
    a_ok = np.max(np.abs(pa - pa[:, :, :1])) <= tol
    b_ok = np.max(np.abs(pb - pb[:, :1, :])) <= tol
    return bool(a_ok and b_ok)


def is_quantum_feasible(box: BipartiteBox) -> bool:
    """Tsirelson label only: |CHSH| <= 2*sqrt(2)."""
    return abs(chsh_value(box)) <= TSIRELSON + 4e-12


def parse_box(spec: str) -> BipartiteBox:
    """``pr``, ``isotropic:<eta>`` or ``file:<path>``."""
    kind, _, arg = spec.partition(":")
    if kind == "pr" and not arg:
        return pr_box()
    if kind == "isotropic":
        try:
            eta = float(arg)
        except ValueError:
            raise DomainError(f"bad isotropic parameter {arg!r}") from None
        return isotropic_box(eta)
    if kind == "file":
        with open(Path(arg)) as f:
            return BipartiteBox.from_dict(json.load(f))
    raise DomainError(f"unknown box spec {spec!r}; expected pr, isotropic:<eta> or file:<path>")
