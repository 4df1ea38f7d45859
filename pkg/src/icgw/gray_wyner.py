"""Gray-Wyner rate region of a discrete source.

Achievable points are parameterized by an auxiliary channel W = w(a):

    R_0 = I(a; W),    R_i = H(a_i | W).

The dual (support) function is

    T(lam) = min_W  I(a; W) + sum_i lam_i H(a_i | W),

so every rate point in the region satisfies R_0 + sum_i lam_i R_i >= T(lam).
Two routes bound T from opposite sides and are never mixed:

* upper bounds come from explicit channels (deterministic partitions of the
  source alphabet and projected-gradient descent over stochastic channels);
* certified lower bounds come only from the anchors T(1_S) = H(a_S),
  concavity and coordinatewise monotonicity of T.

Membership verdicts inherit this split: ``Inside`` carries a channel whose
point is re-evaluated exactly, ``Outside`` carries weights and a certified
bound, and anything else is ``Undetermined``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import linprog

from .info import (
    Channel,
    DomainError,
    JointPmf,
    ZERO_EPS,
    conditional_entropy,
    entropy,
    extend_with_channel,
    flat_index,
    is_product,
    mutual_information,
)

WITNESS_TOL = 1e-6
CERT_TOL = 1e-9
FACET_TOL = 1e-9


@dataclass(frozen=True)
class RatePoint:
    r0: float
    rs: tuple[float, ...]

    def __post_init__(self):
        vals = [float(self.r0), *map(float, self.rs)]
        if any(not math.isfinite(v) or v < -1e-12 for v in vals):
            raise DomainError(f"rates must be finite and nonnegative, got {vals}")
        vals = [max(v, 0.0) for v in vals]
        object.__setattr__(self, "r0", vals[0])
        object.__setattr__(self, "rs", tuple(vals[1:]))

    @property
    def n(self) -> int:
        return len(self.rs)

    def as_list(self) -> list[float]:
        return [self.r0, *self.rs]

    def as_array(self) -> np.ndarray:
        return np.array(self.as_list())

    @classmethod
    def from_list(cls, xs: Sequence[float]) -> "RatePoint":
        if len(xs) < 2:
            raise DomainError("a rate point needs R_0 and at least one private rate")
        return cls(xs[0], tuple(xs[1:]))


@dataclass(frozen=True)
class DualWeights:
    lambdas: tuple[float, ...]

    def __post_init__(self):
        lam = tuple(float(x) for x in self.lambdas)
        if not lam or any(not math.isfinite(x) or x < 0 for x in lam):
            raise DomainError(f"dual weights must be finite and nonnegative, got {lam}")
        object.__setattr__(self, "lambdas", lam)

    def as_array(self) -> np.ndarray:
        return np.array(self.lambdas)


def achievable_point(p: JointPmf, w: Channel) -> RatePoint:
    if w.input_arity != p.alphabet_size:
        raise DomainError(f"channel input arity {w.input_arity} != source alphabet {p.alphabet_size}")
    j = extend_with_channel(p, w)
    n = p.n_vars
    src = list(range(n))
    return RatePoint(
        mutual_information(j, src, [n]),
        tuple(conditional_entropy(j, [i], [n]) for i in range(n)),
    )


def subsets(n: int) -> list[tuple[int, ...]]:
    return [s for r in range(n + 1) for s in itertools.combinations(range(n), r)]


def subset_entropies(p: JointPmf) -> dict[tuple[int, ...], float]:
    return {s: (entropy(p, s) if s else 0.0) for s in subsets(p.n_vars)}


@dataclass
class FacetReport:
    slacks: dict[tuple[int, ...], float]
    inside: bool
    complete: bool  # product source: the facets characterize the region exactly
    boundary: bool

    @property
    def min_slack(self) -> float:
        return min(self.slacks.values())

    def to_dict(self) -> dict:
        return {
            "slacks": {"{" + ",".join(str(i + 1) for i in s) + "}": v for s, v in self.slacks.items()},
            "inside": self.inside,
            "complete": self.complete,
            "boundary": self.boundary,
        }


def entropy_facets_check(p: JointPmf, pt: RatePoint) -> FacetReport:
    """Slack of R_0 + sum_{i in S} R_i >= H(a_S) for every subset S (1-based labels in output)."""
    if pt.n != p.n_vars:
        raise DomainError(f"rate point has {pt.n} private rates, source has {p.n_vars} variables")
    hs = subset_entropies(p)
    slacks = {s: pt.r0 + sum(pt.rs[i] for i in s) - h for s, h in hs.items()}
    inside = all(v >= -FACET_TOL for v in slacks.values())
    boundary = inside and any(-FACET_TOL < v < WITNESS_TOL for v in slacks.values())
    return FacetReport(slacks, inside, is_product(p), boundary)


def product_region_membership(p: JointPmf, pt: RatePoint) -> bool:
    """Exact membership for a product source (facet test)."""
    if not is_product(p):
        raise DomainError("source does not factorize; facet test is not a complete characterization")
    return entropy_facets_check(p, pt).inside


# -- certified lower bounds ---------------------------------------------------


def certified_lower(p: JointPmf, lam: DualWeights, hs=None) -> tuple[float, dict]:
    """Best anchor-based lower bound on T(lam).

    Maximizes sum_S mu_S H(a_S) over mu >= 0, sum mu <= 1, sum_S mu_S 1_S <= lam:
    concavity gives T(sum mu_S 1_S) >= sum mu_S T(1_S) (with the rest of the
    weight on T(0) = 0), and monotonicity carries the bound up to lam.
    """
    n = p.n_vars
    lamv = lam.as_array()
    if lamv.size != n:
        raise DomainError(f"need {n} dual weights, got {lamv.size}")
    hs = subset_entropies(p) if hs is None else hs
    ss = [s for s in subsets(n) if s]
    h = np.array([hs[s] for s in ss])
    a = np.zeros((n + 1, len(ss)))
    for j, s in enumerate(ss):
        a[list(s), j] = 1.0
    a[n, :] = 1.0
    res = linprog(-h, A_ub=a, b_ub=np.append(lamv, 1.0), bounds=(0, None), method="highs")
    if res.status != 0:
        raise RuntimeError(f"anchor LP failed: {res.message}")
    mu = {s: float(m) for s, m in zip(ss, res.x) if m > 1e-12}
    # Rescore exactly from the chosen weights to avoid solver round-off.
    return float(sum(m * hs[s] for s, m in mu.items())), mu


# -- upper bounds: explicit channels ---------------------------------------------


def default_cap(p: JointPmf) -> int:
    return p.alphabet_size + p.n_vars


def _var_indicators(p: JointPmf) -> list[np.ndarray]:
    """One-hot ``M_i[a, v] = [a_i == v]`` over flat source indices."""
    grids = np.indices(p.arities).reshape(p.n_vars, -1)
    return [np.eye(k)[grids[i]] for i, k in enumerate(p.arities)]


def _h_axis(x: np.ndarray, axes) -> np.ndarray:
    safe = np.where(x > ZERO_EPS, x, 1.0)
    return -np.sum(np.where(x > ZERO_EPS, x * np.log2(safe), 0.0), axis=axes)


def _points_batch(p: JointPmf, q: np.ndarray, inds) -> np.ndarray:
    """Rate points (R_0, R_1..R_N) of a batch of channels ``q[r, a, w]``."""
    joint = p.probs[None, :, None] * q
    pw = joint.sum(axis=1)
    h_w = _h_axis(pw, 1)
    h_aw = _h_axis(joint, (1, 2))
    h_a = _h_axis(p.probs, 0)
    cols = [h_a + h_w - h_aw]
    for m in inds:
        cols.append(_h_axis(np.einsum("raw,av->rvw", joint, m), (1, 2)) - h_w)
    return np.maximum(np.stack(cols, axis=1), 0.0)


def _stirling_count(n: int, k: int) -> int:
    """Number of set partitions of n items into at most k blocks."""
    s = [[0] * (k + 1) for _ in range(n + 1)]
    s[0][0] = 1
    for i in range(1, n + 1):
        for j in range(1, min(i, k) + 1):
            s[i][j] = j * s[i - 1][j] + s[i - 1][j - 1]
    return sum(s[n][1:])


def _partitions(n: int, k: int) -> np.ndarray:
    """All restricted growth strings of length n with at most k distinct labels."""
    rows = np.zeros((1, 1), dtype=np.int8)
    top = np.zeros(1, dtype=np.int8)
    for _ in range(1, n):
        reps = np.minimum(top + 2, k)
        idx = np.repeat(np.arange(len(rows)), reps)
        new = np.concatenate([np.arange(r) for r in reps]).astype(np.int8)
        rows = np.hstack([rows[idx], new[:, None]])
        top = np.maximum(top[idx], new)
    return rows


@dataclass
class DeterministicSweep:
    labels: np.ndarray  # [n_partitions, alphabet] block label of each source outcome
    points: np.ndarray  # [n_partitions, N + 1]
    exhaustive: bool

    def channel(self, j: int, alphabet: int) -> Channel:
        return Channel.deterministic(self.labels[j], int(self.labels[j].max()) + 1)


def projection_labels(p: JointPmf) -> np.ndarray:
    """W = a_T for every subset T of the variables (the facet vertices of product sources).

    Largest subsets come first so that ties in the dual prefer the more informative witness.
    """
    return np.stack([flat_index(p, s).reshape(-1) for s in reversed(subsets(p.n_vars))])


def deterministic_sweep(p: JointPmf, cap: int, budget: int = 10**6, chunk: int = 20000) -> DeterministicSweep:
    """Points of all deterministic channels with at most ``cap`` outputs, up to relabeling.

    Outcomes with zero probability are lumped into block 0. Beyond ``budget``
    partitions only the subset projections W = a_T are evaluated.
    """
    support = np.flatnonzero(p.probs > 0)
    inds = _var_indicators(p)
    labels = projection_labels(p)
    exhaustive = _stirling_count(support.size, cap) <= budget
    if exhaustive:
        parts = _partitions(support.size, cap)
        full = np.zeros((len(parts), p.alphabet_size), dtype=np.int64)
        full[:, support] = parts
        labels = np.vstack([labels, full])
    pts = []
    for lo in range(0, len(labels), chunk):
        lab = labels[lo : lo + chunk]
        k = int(lab.max()) + 1
        pts.append(_points_batch(p, np.eye(k)[lab], inds))
    return DeterministicSweep(labels, np.vstack(pts), exhaustive)


@dataclass(frozen=True)
class DualOptions:
    cap: int | None = None  # default: alphabet size + N
    restarts: int = 64
    iterations: int = 500
    tol: float = 1e-8
    seed: int = 0
    partition_budget: int = 10**6

    def __post_init__(self):
        if self.cap is not None and self.cap < 1:
            raise DomainError(f"invalid auxiliary cardinality cap {self.cap}")
        if self.restarts < 0 or self.iterations < 0 or self.tol <= 0:
            raise DomainError("restarts and iterations must be >= 0 and tol > 0")


def _project_rows(v: np.ndarray) -> np.ndarray:
    """Euclidean projection of every last-axis row onto the probability simplex."""
    k = v.shape[-1]
    u = -np.sort(-v, axis=-1)
    css = np.cumsum(u, axis=-1) - 1.0
    ks = np.arange(1, k + 1)
    cond = u - css / ks > 0
    rho = k - 1 - np.argmax(cond[..., ::-1], axis=-1)
    theta = np.take_along_axis(css, rho[..., None], axis=-1) / (rho[..., None] + 1)
    return np.maximum(v - theta, 0.0)


def _objective_batch(p, q, inds, lamv):
    return _points_batch(p, q, inds) @ np.append(1.0, lamv)


def descend(p: JointPmf, lam: np.ndarray, k: int, q0: np.ndarray, iterations: int, tol: float):
    """Batched projected gradient with per-restart Armijo step control.

    ``q0[r, a, w]`` are the starting channels. Returns final channels and objectives.
    """
    inds = _var_indicators(p)
    lamv = np.asarray(lam, dtype=float)
    big = 1.0 - lamv.sum()
    pa = p.probs
    live_rows = (pa > 0)[None, :, None]
    q = q0.copy()
    f = _objective_batch(p, q, inds, lamv)
    step = np.ones(len(q))
    active = np.ones(len(q), dtype=bool)
    floor = -40.0
    for _ in range(iterations):
        if not active.any():
            break
        qa = q[active]
        joint = pa[None, :, None] * qa
        pw = joint.sum(axis=1)
        with np.errstate(divide="ignore"):
            g = np.maximum(np.log2(qa), floor) - big * np.maximum(np.log2(pw), floor)[:, None, :]
            for lv, m in zip(lamv, inds):
                if lv == 0:
                    continue
                pv = np.einsum("raw,av->rvw", joint, m)
                g -= lv * np.einsum("av,rvw->raw", m, np.maximum(np.log2(pv), floor))
        g = np.where(live_rows, g, 0.0)
        t = step[active][:, None, None]
        cand = _project_rows(qa - t * g)
        delta = cand - qa
        f_new = _objective_batch(p, cand, inds, lamv)
        decrease = np.einsum("raw,a,raw->r", g, pa, delta)
        ok = f_new <= f[active] + 1e-4 * decrease + 1e-15
        idx = np.flatnonzero(active)
        moved = np.max(np.abs(delta), axis=(1, 2))
        q[idx[ok]] = cand[ok]
        f[idx[ok]] = f_new[ok]
        step[idx[ok]] = np.minimum(step[idx[ok]] * 2.0, 1e4)
        step[idx[~ok]] *= 0.5
        done = (ok & (moved < tol)) | (step[idx] < 1e-14)
        active[idx[done]] = False
    return q, f


@dataclass
class DualResult:
    lam: DualWeights
    upper: float
    witness: Channel
    witness_point: RatePoint
    certified_lower: float
    certificate: dict  # anchor weights mu_S behind certified_lower
    exhaustive: bool

    @property
    def gap(self) -> float:
        return self.upper - self.certified_lower

    def to_dict(self) -> dict:
        return {
            "lambda": list(self.lam.lambdas),
            "upper": self.upper,
            "certified_lower": self.certified_lower,
            "gap": self.gap,
            "witness": self.witness.to_dict(),
            "witness_point": self.witness_point.as_list(),
            "anchor_weights": {"{" + ",".join(str(i + 1) for i in s) + "}": m for s, m in self.certificate.items()},
            "exhaustive_deterministic": self.exhaustive,
        }


def _restart_inits(p: JointPmf, k: int, restarts: int, seed: int) -> np.ndarray:
    out = np.empty((restarts, p.alphabet_size, k))
    for r in range(restarts):
        rng = np.random.default_rng([seed, r])
        out[r] = rng.dirichlet(np.ones(k), size=p.alphabet_size)
    return out


def _optimize_channels(p, lamv, cap, opts: DualOptions, sweep: DeterministicSweep | None = None):
    """Best deterministic partition and best descent channel for weights ``lamv``."""
    sweep = sweep or deterministic_sweep(p, cap, opts.partition_budget)
    scores = sweep.points @ np.append(1.0, lamv)
    j = int(np.argmin(scores))
    best_det = sweep.channel(j, p.alphabet_size)
    if opts.restarts == 0 or opts.iterations == 0:
        return best_det, None, sweep
    inits = _restart_inits(p, cap, opts.restarts, opts.seed)
    # Smoothed copies of the best partitions also seed the descent.
    top = np.argsort(scores)[: min(4, len(scores))]
    warm = []
    for t in top:
        lab = sweep.labels[t]
        if lab.max() < cap:
            warm.append(0.9 * np.eye(cap)[lab] + 0.1 / cap)
    q0 = np.concatenate([inits, np.array(warm)]) if warm else inits
    q, f = descend(p, lamv, cap, q0, opts.iterations, opts.tol)
    r = int(np.argmin(f))
    rows = q[r][:, q[r].max(axis=0) > 1e-15]
    return best_det, Channel(rows / rows.sum(axis=1, keepdims=True)), sweep


def dual_value(p: JointPmf, lam: DualWeights | Sequence[float], opts: DualOptions = DualOptions(), sweep=None) -> DualResult:
    if not isinstance(lam, DualWeights):
        lam = DualWeights(tuple(lam))
    lamv = lam.as_array()
    if lamv.size != p.n_vars:
        raise DomainError(f"need {p.n_vars} dual weights, got {lamv.size}")
    cap = opts.cap or default_cap(p)
    best_det, best_desc, sweep = _optimize_channels(p, lamv, cap, opts, sweep)
    coef = np.append(1.0, lamv)
    witness, wpt = best_det, achievable_point(p, best_det)
    upper = float(wpt.as_array() @ coef)
    if best_desc is not None:
        dpt = achievable_point(p, best_desc)
        dval = float(dpt.as_array() @ coef)
        if dval < upper - 1e-9:
            witness, wpt, upper = best_desc, dpt, dval
    lower, mu = certified_lower(p, lam)
    return DualResult(lam, upper, witness, wpt, lower, mu, sweep.exhaustive)


# -- membership -------------------------------------------------------------------


@dataclass(frozen=True)
class MembershipOptions:
    dual: DualOptions = DualOptions(restarts=16, iterations=300)
    max_rounds: int = 12
    witness_tol: float = WITNESS_TOL
    cert_tol: float = CERT_TOL


@dataclass
class MembershipVerdict:
    tag: str  # "Inside" | "Outside" | "Undetermined"
    witness: Channel | None = None
    witness_point: RatePoint | None = None
    certificate: DualWeights | None = None
    certified_bound: float | None = None
    gap: float | None = None
    boundary: bool = False
    facets: FacetReport | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        d: dict = {"verdict": self.tag, "boundary": self.boundary}
        if self.witness is not None:
            d["witness"] = self.witness.to_dict()
            d["witness_point"] = self.witness_point.as_list()
        if self.certificate is not None:
            d["certificate"] = list(self.certificate.lambdas)
            d["certified_bound"] = self.certified_bound
        if self.gap is not None:
            d["gap"] = self.gap
        if self.facets is not None:
            d["facets"] = self.facets.to_dict()
        return d


def _certificate_candidates(n: int) -> list[np.ndarray]:
    """All 0/1 vectors (including all-ones) and midpoints of pairs of them."""
    corners = [np.array(v, dtype=float) for v in itertools.product((0.0, 1.0), repeat=n)]
    chords = [(u + v) / 2 for u, v in itertools.combinations(corners, 2)]
    return corners + chords


def find_certificate(p: JointPmf, pt: RatePoint, cert_tol: float = CERT_TOL, hs=None):
    """Most violated certified supporting inequality, or ``None``."""
    hs = subset_entropies(p) if hs is None else hs
    r = pt.as_array()
    best = None
    for lamv in _certificate_candidates(p.n_vars):
        lam = DualWeights(tuple(lamv))
        bound, _ = certified_lower(p, lam, hs)
        margin = bound - (r[0] + lamv @ r[1:])
        if margin > cert_tol and (best is None or margin > best[2]):
            best = (lam, bound, margin)
    return best


def mixture_channel(channels: Sequence[Channel], weights: Sequence[float]) -> Channel:
    """Time sharing: W = (T, W_T) with T ~ weights independent of the source."""
    blocks = [w * ch.rows for ch, w in zip(channels, weights)]
    return Channel(np.hstack(blocks))


def _dominates(wpt: RatePoint, pt: RatePoint, tol: float) -> bool:
    return bool(np.all(wpt.as_array() <= pt.as_array() + tol))


def _cover_lp(points: np.ndarray, target: np.ndarray):
    """min s s.t. sum_j alpha_j P_j <= target + s, alpha in the simplex, s >= 0."""
    j = len(points)
    c = np.zeros(j + 1)
    c[-1] = 1.0
    a_ub = np.hstack([points.T, -np.ones((points.shape[1], 1))])
    a_eq = np.append(np.ones(j), 0.0)[None, :]
    res = linprog(c, A_ub=a_ub, b_ub=target, A_eq=a_eq, b_eq=[1.0], bounds=(0, None), method="highs")
    if res.status != 0:
        raise RuntimeError(f"covering LP failed: {res.message}")
    return res.x[:-1], float(res.x[-1]), -res.ineqlin.marginals


def membership_test(
    p: JointPmf,
    pt: RatePoint,
    opts: MembershipOptions = MembershipOptions(),
    hints: Iterable[Channel] = (),
) -> MembershipVerdict:
    """Place ``pt`` relative to the region.

    Certificates are tried first, from certified lower bounds only. Witnesses
    are time-sharing mixtures of explicit channels (the hints, all
    deterministic partitions within budget, and descent outputs in directions
    priced by the covering LP), re-evaluated exactly before acceptance.
    """
    if pt.n != p.n_vars:
        raise DomainError(f"rate point has {pt.n} private rates, source has {p.n_vars} variables")
    hs = subset_entropies(p)
    facets = entropy_facets_check(p, pt)
    cert = find_certificate(p, pt, opts.cert_tol, hs)
    if cert is not None:
        lam, bound, _ = cert
        return MembershipVerdict("Outside", certificate=lam, certified_bound=bound, facets=facets)

    target = pt.as_array()
    hints = list(hints)
    for h in hints:
        hp = achievable_point(p, h)
        if _dominates(hp, pt, opts.witness_tol):
            return MembershipVerdict("Inside", h, hp, boundary=facets.boundary, facets=facets)

    cap = opts.dual.cap or default_cap(p)
    sweep = deterministic_sweep(p, cap, opts.dual.partition_budget)
    points = [sweep.points]
    extra: list[Channel] = []
    if hints:
        extra.extend(hints)
        points.append(np.array([achievable_point(p, h).as_array() for h in hints]))

    best_gap = math.inf
    for rnd in range(opts.max_rounds + 1):
        allpts = np.vstack(points)
        alpha, s, y = _cover_lp(allpts, target)
        best_gap = min(best_gap, s)
        if s <= opts.witness_tol / 2:
            verdict = _assemble_witness(p, pt, sweep, extra, alpha, opts)
            if verdict is not None:
                verdict.boundary = facets.boundary
                verdict.facets = facets
                return verdict
        if rnd == opts.max_rounds:
            break
        y0 = max(y[0], 1e-3)
        lamv = np.minimum(y[1:] / y0, 1e3)
        dopts = DualOptions(cap, opts.dual.restarts, opts.dual.iterations, opts.dual.tol, opts.dual.seed + 7919 * (rnd + 1), opts.dual.partition_budget)
        _, ch, _ = _optimize_channels(p, lamv, cap, dopts, sweep)
        if ch is None:
            break
        cp = achievable_point(p, ch).as_array()
        # Stop once the priced direction yields no improving column.
        if y @ cp >= y @ (allpts.T @ alpha) - 1e-12:
            break
        extra.append(ch)
        points.append(cp[None, :])
    return MembershipVerdict("Undetermined", gap=best_gap, boundary=facets.boundary, facets=facets)


def _assemble_witness(p, pt, sweep, extra, alpha, opts) -> MembershipVerdict | None:
    n_det = len(sweep.points)
    used = [(j, a) for j, a in enumerate(alpha) if a > 1e-12]
    total = sum(a for _, a in used)
    comps, ws = [], []
    for j, a in used:
        comps.append(sweep.channel(j, p.alphabet_size) if j < n_det else extra[j - n_det])
        ws.append(a / total)
    w = comps[0] if len(comps) == 1 else mixture_channel(comps, ws)
    wpt = achievable_point(p, w)
    if _dominates(wpt, pt, opts.witness_tol):
        return MembershipVerdict("Inside", w, wpt)
    return None
