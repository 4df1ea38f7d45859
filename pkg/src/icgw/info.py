"""Finite discrete joint distributions and Shannon quantities (in bits).

The canonical flat layout is row-major over the product alphabet with the
last variable varying fastest, i.e. ``probs.reshape(arities)`` is the joint
tensor.  This is also the serialized layout.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

NORM_TOL = 1e-9
ZERO_EPS = 1e-15


class DomainError(ValueError):
    """Invalid variable index, bad distribution, or a null conditioning event."""


@dataclass(frozen=True, eq=False)
class JointPmf:
    arities: tuple[int, ...]
    probs: np.ndarray
    names: tuple[str, ...] | None = None

    def __post_init__(self):
        arities = tuple(int(a) for a in self.arities)
        if not arities or any(a < 1 for a in arities):
            raise DomainError(f"arities must be a nonempty list of integers >= 1, got {arities}")
        probs = np.asarray(self.probs, dtype=float).reshape(-1)
        if probs.size != int(np.prod(arities)):
            raise DomainError(f"expected {int(np.prod(arities))} probabilities, got {probs.size}")
        if not np.all(np.isfinite(probs)) or probs.min() < -ZERO_EPS:
            raise DomainError("probabilities must be finite and nonnegative")
        probs = np.where(probs < 0, 0.0, probs)
        if abs(probs.sum() - 1.0) > NORM_TOL:
            raise DomainError(f"probabilities sum to {probs.sum()!r}, not 1")
        probs.setflags(write=False)
        if self.names is not None:
            names = tuple(self.names)
            if len(names) != len(arities):
                raise DomainError("one name per variable")
            object.__setattr__(self, "names", names)
        object.__setattr__(self, "arities", arities)
        object.__setattr__(self, "probs", probs)

    @property
    def n_vars(self) -> int:
        return len(self.arities)

    @property
    def tensor(self) -> np.ndarray:
        return self.probs.reshape(self.arities)

    @property
    def alphabet_size(self) -> int:
        return self.probs.size

    @classmethod
    def from_tensor(cls, tensor, names=None) -> "JointPmf":
        tensor = np.asarray(tensor, dtype=float)
        return cls(tensor.shape, tensor.reshape(-1), names)

    def to_dict(self) -> dict:
        d = {"arities": list(self.arities), "probs": [float(x) for x in self.probs]}
        if self.names is not None:
            d["names"] = list(self.names)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "JointPmf":
        return cls(tuple(d["arities"]), np.asarray(d["probs"], dtype=float), d.get("names"))

    def __eq__(self, other):
        if not isinstance(other, JointPmf):
            return NotImplemented
        return self.arities == other.arities and np.array_equal(self.probs, other.probs)

    def __repr__(self):
        return f"JointPmf(arities={self.arities}, probs={self.probs.tolist()})"


@dataclass(frozen=True, eq=False)
class Channel:
    """Conditional distribution ``rows[r, w] = p(w | input = r)``."""

    rows: np.ndarray
    input_arity: int = field(init=False)
    output_arity: int = field(init=False)

    def __post_init__(self):
        rows = np.array(self.rows, dtype=float)
        if rows.ndim != 2 or rows.shape[0] < 1 or rows.shape[1] < 1:
            raise DomainError("channel rows must form a nonempty 2-D matrix")
        if not np.all(np.isfinite(rows)) or rows.min() < -ZERO_EPS or rows.max() > 1 + NORM_TOL:
            raise DomainError("channel entries must lie in [0, 1]")
        rows = np.clip(rows, 0.0, 1.0)
        if np.max(np.abs(rows.sum(axis=1) - 1.0)) > NORM_TOL:
            raise DomainError("every channel row must sum to 1")
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "input_arity", rows.shape[0])
        object.__setattr__(self, "output_arity", rows.shape[1])

    @classmethod
    def deterministic(cls, labels: Sequence[int], output_arity: int | None = None) -> "Channel":
        labels = np.asarray(labels, dtype=int)
        k = int(labels.max()) + 1 if output_arity is None else output_arity
        rows = np.zeros((labels.size, k))
        rows[np.arange(labels.size), labels] = 1.0
        return cls(rows)

    @classmethod
    def identity(cls, n: int) -> "Channel":
        return cls(np.eye(n))

    @classmethod
    def constant(cls, n: int) -> "Channel":
        return cls(np.ones((n, 1)))

    def to_dict(self) -> dict:
        return {
            "input_arity": self.input_arity,
            "output_arity": self.output_arity,
            "rows": self.rows.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Channel":
        ch = cls(np.asarray(d["rows"], dtype=float))
        if "input_arity" in d and d["input_arity"] != ch.input_arity:
            raise DomainError("input_arity does not match the number of rows")
        if "output_arity" in d and d["output_arity"] != ch.output_arity:
            raise DomainError("output_arity does not match the row length")
        return ch


def _check_vars(p: JointPmf, vars_: Iterable[int], allow_empty=False) -> tuple[int, ...]:
    vs = tuple(int(v) for v in vars_)
    if not vs and not allow_empty:
        raise DomainError("variable set must be nonempty")
    for v in vs:
        if not 0 <= v < p.n_vars:
            raise DomainError(f"variable index {v} out of range for {p.n_vars} variables")
    if len(set(vs)) != len(vs):
        raise DomainError(f"repeated variable index in {vs}")
    return vs


def _disjoint(*sets):
    seen = set()
    for s in sets:
        if seen & set(s):
            raise DomainError("variable sets must be disjoint")
        seen |= set(s)


def _entropy_of(probs: np.ndarray) -> float:
    q = probs[probs > ZERO_EPS]
    return float(-np.sum(q * np.log2(q)))


def marginal_tensor(p: JointPmf, vars_: Sequence[int]) -> np.ndarray:
    """Marginal on ``vars_`` with axes in the given order."""
    vs = _check_vars(p, vars_, allow_empty=True)
    drop = tuple(i for i in range(p.n_vars) if i not in vs)
    m = p.tensor.sum(axis=drop)
    kept = sorted(vs)
    return np.transpose(m, [kept.index(v) for v in vs]) if vs else m


def entropy(p: JointPmf, vars_: Iterable[int]) -> float:
    vs = _check_vars(p, vars_)
    return _entropy_of(marginal_tensor(p, vs).reshape(-1))


def _h(p: JointPmf, vs) -> float:
    return _entropy_of(marginal_tensor(p, vs).reshape(-1)) if vs else 0.0


def conditional_entropy(p: JointPmf, target, given=()) -> float:
    t = _check_vars(p, target)
    g = _check_vars(p, given, allow_empty=True)
    _disjoint(t, g)
    return max(_h(p, t + g) - _h(p, g), 0.0)


def mutual_information(p: JointPmf, set_a, set_b) -> float:
    a = _check_vars(p, set_a)
    b = _check_vars(p, set_b)
    _disjoint(a, b)
    return max(_h(p, a) + _h(p, b) - _h(p, a + b), 0.0)


def conditional_mutual_information(p: JointPmf, set_a, set_b, given=()) -> float:
    a = _check_vars(p, set_a)
    b = _check_vars(p, set_b)
    c = _check_vars(p, given, allow_empty=True)
    _disjoint(a, b, c)
    return max(_h(p, a + c) + _h(p, b + c) - _h(p, a + b + c) - _h(p, c), 0.0)


def binary_entropy(x: float) -> float:
    return _entropy_of(np.array([x, 1.0 - x]))


def marginalize(p: JointPmf, keep_vars) -> JointPmf:
    vs = _check_vars(p, keep_vars)
    names = tuple(p.names[v] for v in vs) if p.names else None
    return JointPmf.from_tensor(marginal_tensor(p, vs), names)


def condition_on_event(p: JointPmf, var: int, value: int) -> JointPmf:
    """Distribution of all variables given ``var == value`` (``var`` is kept, as a point mass)."""
    (v,) = _check_vars(p, [var])
    if not 0 <= value < p.arities[v]:
        raise DomainError(f"value {value} out of range for variable {v}")
    t = np.zeros(p.arities)
    idx = [slice(None)] * p.n_vars
    idx[v] = value
    t[tuple(idx)] = p.tensor[tuple(idx)]
    mass = t.sum()
    if mass <= 1e-12:
        raise DomainError(f"conditioning on null event (variable {v} = {value})")
    return JointPmf.from_tensor(t / mass, p.names)


def product_of(ps: Sequence[JointPmf]) -> JointPmf:
    if not ps:
        raise DomainError("product of an empty list")
    t = ps[0].tensor
    for q in ps[1:]:
        t = np.multiply.outer(t, q.tensor)
    names = None
    if all(q.names for q in ps):
        names = sum((q.names for q in ps), ())
    return JointPmf.from_tensor(t, names)


def flat_index(p: JointPmf, vars_: Sequence[int]) -> np.ndarray:
    """Row-major index of ``vars_`` (in the given order) for every outcome, shaped like ``p.tensor``."""
    vs = _check_vars(p, vars_, allow_empty=True)
    idx = np.zeros(p.arities, dtype=int)
    grids = np.indices(p.arities)
    for v in vs:
        idx = idx * p.arities[v] + grids[v]
    return idx


def extend_with_channel(p: JointPmf, ch: Channel, conditioning_vars=None) -> JointPmf:
    """Append W ~ ch(. | flattened conditioning vars) as a new last variable."""
    cond = tuple(range(p.n_vars)) if conditioning_vars is None else tuple(conditioning_vars)
    idx = flat_index(p, cond)
    n_in = int(np.prod([p.arities[v] for v in cond])) if cond else 1
    if ch.input_arity != n_in:
        raise DomainError(f"channel input arity {ch.input_arity} != conditioning alphabet size {n_in}")
    t = p.tensor[..., None] * ch.rows[idx]
    names = p.names + ("W",) if p.names else None
    return JointPmf.from_tensor(t, names)


def is_product(p: JointPmf, tol: float = NORM_TOL) -> bool:
    margs = [marginal_tensor(p, [i]) for i in range(p.n_vars)]
    t = margs[0]
    for m in margs[1:]:
        t = np.multiply.outer(t, m)
    return bool(np.max(np.abs(t - p.tensor)) <= tol)


def random_pmf(arities: Sequence[int], rng: np.random.Generator, sparsity: float = 0.0) -> JointPmf:
    """Dirichlet(1) joint, optionally with a random fraction of entries zeroed."""
    n = int(np.prod(arities))
    x = rng.dirichlet(np.ones(n))
    if sparsity > 0:
        mask = rng.random(n) < sparsity
        if mask.all():
            mask[rng.integers(n)] = False
        x = np.where(mask, 0.0, x)
        x /= x.sum()
    return JointPmf(tuple(arities), x)


def load_pmf(path: str | Path) -> JointPmf:
    with open(path) as f:
        return JointPmf.from_dict(json.load(f))


def load_channel(path: str | Path) -> Channel:
    with open(path) as f:
        return Channel.from_dict(json.load(f))


# Named sources used throughout the CLI and sweeps.

def uniform_bits(n: int) -> JointPmf:
    return JointPmf((2,) * n, np.full(2**n, 2.0**-n))


def bernoulli_product(qs: Sequence[float]) -> JointPmf:
    """Independent bits with P(a_i = 1) = qs[i]."""
    for q in qs:
        if not 0 <= q <= 1:
            raise DomainError(f"Bernoulli parameter {q} outside [0, 1]")
    return product_of([JointPmf((2,), [1 - q, q]) for q in qs])


def dsbs(rho: float) -> JointPmf:
    """Doubly symmetric binary source: uniform a_1, a_2 = a_1 xor Bernoulli(rho)."""
    if not 0 <= rho <= 1:
        raise DomainError(f"flip probability {rho} outside [0, 1]")
    return JointPmf((2, 2), [(1 - rho) / 2, rho / 2, rho / 2, (1 - rho) / 2])
