"""Sweeps over sources and strategies, placing IC rate points against the Gray-Wyner region."""
from __future__ import annotations

import csv
import itertools
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .boxes import TSIRELSON, isotropic_box, pr_box
from .game import (
    BoxStrategy,
    ClassicalStrategy,
    evaluate_ic,
    message_witness,
    run_box_strategy,
    run_classical_strategy,
)
from .gray_wyner import DualOptions, MembershipOptions, membership_test
from .info import DomainError, JointPmf, bernoulli_product, dsbs, is_product, random_pmf

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
QUANTUM_ETA = TSIRELSON / 4  # sqrt(2)/2
VERDICTS = ("Inside", "Outside", "Undetermined")
REGIMES = ("classical", "quantum", "superquantum")


class BudgetExceeded(DomainError):
    pass


def regime_label(eta: float | None) -> str:
    """``None`` marks a classical shared-randomness strategy."""
    if eta is None or eta <= 0.5 + 1e-12:
        return "classical"
    if eta <= QUANTUM_ETA + 1e-12:
        return "quantum"
    return "superquantum"


# -- configuration ----------------------------------------------------------------


@dataclass
class SweepConfig:
    sources: list[dict]
    strategies: list[dict]
    k: int = 1
    master_seed: int = 0
    membership: dict = field(default_factory=dict)
    jobs: int = 1

    def __post_init__(self):
        if isinstance(self.sources, dict):
            self.sources = [self.sources]
        if isinstance(self.strategies, dict):
            self.strategies = [self.strategies]
        if not self.sources or not self.strategies:
            raise DomainError("config needs at least one source family and one strategy family")
        if self.k < 1:
            raise DomainError("k must be >= 1")
        for s in self.sources:
            fam = s.get("family")
            if fam in ("dsbs", "product-bernoulli") and not s.get("grid"):
                raise DomainError(f"source family {fam!r} needs a nonempty grid")
            if fam == "dsbs" and any(not 0 <= r <= 0.5 for r in s["grid"]):
                raise DomainError("dsbs flip probabilities must lie in [0, 1/2]")
            if fam == "dsbs" and self.k != 1:
                raise DomainError("dsbs is a two-bit source; use k = 1")
            if fam not in ("dsbs", "product-bernoulli", "explicit", "random"):
                raise DomainError(f"unknown source family {fam!r}")
        for s in self.strategies:
            fam = s.get("family")
            if fam == "isotropic":
                if not s.get("grid"):
                    raise DomainError("isotropic strategy family needs a nonempty eta grid")
                if any(not 0 <= e <= 1 for e in s["grid"]):
                    raise DomainError("eta must lie in [0, 1]")
            elif fam == "classical":
                if self.k != 1:
                    raise DomainError("classical enumeration is defined for N = 2 (k = 1)")
            elif fam != "pr":
                raise DomainError(f"unknown strategy family {fam!r}")
        self.membership_options()

    def membership_options(self) -> MembershipOptions:
        m = dict(self.membership)
        dual = DualOptions(
            cap=m.pop("cap", None),
            restarts=m.pop("restarts", 16),
            iterations=m.pop("iterations", 300),
            tol=m.pop("tol", 1e-8),
            seed=m.pop("seed", 0),
            partition_budget=m.pop("partition_budget", 10**6),
        )
        try:
            return MembershipOptions(dual=dual, **m)
        except TypeError as e:
            raise DomainError(f"bad membership options: {e}") from None

    @classmethod
    def from_dict(cls, d: dict) -> "SweepConfig":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise DomainError(f"unknown config keys: {sorted(extra)}")
        return cls(**d)

    @classmethod
    def load(cls, path: str | Path) -> "SweepConfig":
        with open(path) as f:
            return cls.from_dict(json.load(f))

    def to_dict(self) -> dict:
        return asdict(self)


def _expand_sources(cfg: SweepConfig) -> list[tuple[str, dict, JointPmf]]:
    n = 2**cfg.k
    out = []
    for s in cfg.sources:
        fam = s["family"]
        if fam == "dsbs":
            out += [(f"dsbs:{r:g}", {"rho": r}, dsbs(r)) for r in s["grid"]]
        elif fam == "product-bernoulli":
            for q in s["grid"]:
                qs = list(q) if isinstance(q, (list, tuple)) else [q] * n
                out.append((f"bernoulli-product:{','.join(f'{x:g}' for x in qs)}", {"q": qs}, bernoulli_product(qs)))
        elif fam == "explicit":
            for i, d in enumerate(s.get("pmfs", [])):
                out.append((d.get("id", f"explicit:{i}"), {}, JointPmf.from_dict(d)))
        elif fam == "random":
            rng = np.random.default_rng([cfg.master_seed, s.get("seed", 0)])
            for i in range(s.get("count", 1)):
                out.append((f"random:{s.get('seed', 0)}:{i}", {}, random_pmf((2,) * n, rng)))
    for sid, _, p in out:
        if p.arities != (2,) * n:
            raise DomainError(f"source {sid} must have {n} binary variables for k={cfg.k}")
    return out


def deterministic_protocols(n_bits: int, n_messages: int):
    """All deterministic (alice, bob) table pairs, in a fixed order."""
    for at in itertools.product(range(n_messages), repeat=2**n_bits):
        for bt in itertools.product(range(2), repeat=n_messages * n_bits):
            yield ClassicalStrategy(
                np.ones(1),
                np.array(at).reshape(-1, 1),
                np.array(bt).reshape(n_messages, n_bits, 1),
            )


def _expand_strategies(cfg: SweepConfig) -> list[tuple[str, float | None, Any]]:
    out = []
    for s in cfg.strategies:
        fam = s["family"]
        if fam == "isotropic":
            out += [(f"box:isotropic:{e:g}", e, BoxStrategy.uniform(isotropic_box(e), cfg.k)) for e in s["grid"]]
        elif fam == "pr":
            out.append(("box:pr", 1.0, BoxStrategy.uniform(pr_box(), cfg.k)))
        elif fam == "classical":
            m = 2 ** s.get("message_bits", 1)
            for i, st in enumerate(deterministic_protocols(2, m)):
                out.append((f"classical:det:{i}", None, st))
    return out


# -- records ----------------------------------------------------------------------


@dataclass
class SweepRecord:
    cell: int
    source_id: str
    source_params: dict
    correlated: bool
    strategy_id: str
    eta: float | None
    regime: str
    evaluation: dict
    rate_point: list
    verdict: str
    verdict_detail: dict
    eq1_holds: bool
    eq2_holds: bool
    eq2_slack: float
    flagged: bool

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SweepRecord":
        return cls(**d)


def _cell_seed(master: int, cell: int) -> int:
    return int(np.random.SeedSequence([master, cell]).generate_state(1)[0])


def evaluate_cell(cell, sid, params, p, tid, eta, strategy, opts: MembershipOptions, master_seed=0) -> SweepRecord:
    if isinstance(strategy, ClassicalStrategy):
        joint = run_classical_strategy(p, strategy)
        hints = [message_witness(p, strategy)]
    else:
        joint = run_box_strategy(p, strategy)
        hints = []
    ev = evaluate_ic(joint, p)
    dual = DualOptions(**{**asdict(opts.dual), "seed": _cell_seed(master_seed, cell)})
    cell_opts = MembershipOptions(dual, opts.max_rounds, opts.witness_tol, opts.cert_tol)
    v = membership_test(p, ev.rate_point, cell_opts, hints)
    regime = regime_label(eta)
    correlated = not is_product(p)
    detail = v.to_dict()
    detail.pop("verdict")
    return SweepRecord(
        cell=cell,
        source_id=sid,
        source_params=params,
        correlated=correlated,
        strategy_id=tid,
        eta=eta,
        regime=regime,
        evaluation=ev.to_dict(),
        rate_point=ev.rate_point.as_list(),
        verdict=v.tag,
        verdict_detail=detail,
        eq1_holds=ev.eq1_holds,
        eq2_holds=ev.eq2_holds,
        eq2_slack=ev.eq2_lhs - ev.eq2_rhs,
        flagged=v.tag == "Outside" and correlated and regime != "superquantum",
    )


def summarize(records: Sequence[SweepRecord]) -> dict:
    counts = {r: {v: 0 for v in VERDICTS} for r in REGIMES}
    for rec in records:
        counts[rec.regime][rec.verdict] += 1
    return {
        "n_records": len(records),
        "counts": counts,
        "eq1_violations": sum(not r.eq1_holds for r in records),
        "eq2_violations": sum(not r.eq2_holds for r in records),
        "flagged_cells": [r.cell for r in records if r.flagged],
    }


@dataclass
class SweepResult:
    records: list[SweepRecord]
    summary: dict
    partial: bool = False

    @property
    def flagged(self) -> list[SweepRecord]:
        return [r for r in self.records if r.flagged]


def _cell_args(cfg: SweepConfig):
    opts = cfg.membership_options()
    cells = itertools.product(_expand_sources(cfg), _expand_strategies(cfg))
    for i, ((sid, params, p), (tid, eta, st)) in enumerate(cells):
        yield (i, sid, params, p, tid, eta, st, opts, cfg.master_seed)


def _run_cell(args):
    return evaluate_cell(*args)


def run_sweep(cfg: SweepConfig) -> SweepResult:
    """One record per (source, strategy) cell, ordered by cell index.

    A keyboard interrupt returns whatever finished, marked partial.
    """
    records: list[SweepRecord] = []
    partial = False
    try:
        if cfg.jobs > 1:
            with ProcessPoolExecutor(cfg.jobs) as pool:
                for rec in pool.map(_run_cell, _cell_args(cfg), chunksize=4):
                    records.append(rec)
        else:
            for args in _cell_args(cfg):
                records.append(_run_cell(args))
    except KeyboardInterrupt:
        log.warning("sweep interrupted after %d cells; returning partial results", len(records))
        partial = True
    result = SweepResult(records, summarize(records), partial)
    for rec in result.flagged:
        log.warning("candidate: Outside verdict in the %s regime for correlated source %s with %s",
                    rec.regime, rec.source_id, rec.strategy_id)
    return result


# -- classical-world regression ---------------------------------------------------


@dataclass
class ClassicalSuiteResult:
    n_deterministic: int
    n_mixtures: int
    violations: list[dict]
    min_eq2_slack: float
    verdict_counts: dict


def enumerate_classical_suite(
    p: JointPmf,
    message_bits: int = 1,
    seed_arity_cap: int = 4,
    n_mixtures: int = 64,
    seed: int = 0,
    budget: int = 10**5,
    opts: MembershipOptions = MembershipOptions(),
) -> ClassicalSuiteResult:
    """Every deterministic protocol plus random shared-randomness mixtures.

    A violation is a failure of H(x) + sum_i H(a_i | beta_i, b=i) < H(a)
    or an Outside verdict for the induced rate point.
    """
    n = p.n_vars
    m = 2**message_bits
    n_det = m ** (2**n) * 2 ** (m * n)
    if n_det > budget:
        raise BudgetExceeded(f"{n_det} deterministic protocols exceed the budget of {budget}")
    if seed_arity_cap < 1:
        raise DomainError("seed_arity_cap must be >= 1")
    violations: list[dict] = []
    counts = {v: 0 for v in VERDICTS}
    min_slack = math.inf

    def check(label, st):
        nonlocal min_slack
        ev = evaluate_ic(run_classical_strategy(p, st), p)
        v = membership_test(p, ev.rate_point, opts, hints=[message_witness(p, st)])
        counts[v.tag] += 1
        slack = ev.eq2_lhs - ev.eq2_rhs
        min_slack = min(min_slack, slack)
        if not ev.eq2_holds or v.tag == "Outside":
            violations.append({"protocol": label, "strategy": st.to_dict(), "eq2_slack": slack, "verdict": v.tag})

    for i, st in enumerate(deterministic_protocols(n, m)):
        check(f"det:{i}", st)

    rng = np.random.default_rng(seed)
    n_alpha = p.alphabet_size
    for j in range(n_mixtures):
        r = int(rng.integers(1, seed_arity_cap + 1))
        st = ClassicalStrategy(
            rng.dirichlet(np.ones(r)),
            rng.integers(0, m, size=(n_alpha, r)),
            rng.integers(0, 2, size=(m, n, r)),
        )
        check(f"mix:{j}", st)
    return ClassicalSuiteResult(n_det, n_mixtures, violations, min_slack, counts)


# -- reports ----------------------------------------------------------------------

CSV_COLUMNS = [
    "cell", "source_id", "correlated", "strategy_id", "eta", "regime",
    "H_x", "sum_I", "sum_C", "H_source", "R0", "R", "verdict",
    "eq1_holds", "eq2_holds", "eq2_slack", "flagged",
]


def _csv_row(r: SweepRecord) -> list:
    ev = r.evaluation
    return [
        r.cell, r.source_id, r.correlated, r.strategy_id, "" if r.eta is None else r.eta, r.regime,
        ev["H_x"], sum(ev["I"]), sum(ev["C"]), ev["H_source"], r.rate_point[0],
        ";".join(repr(x) for x in r.rate_point[1:]), r.verdict,
        r.eq1_holds, r.eq2_holds, r.eq2_slack, r.flagged,
    ]


def report_dict(result: SweepResult, config: dict | None = None) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "partial": result.partial,
        "config": config,
        "summary": result.summary,
        "records": [r.to_dict() for r in result.records],
    }


def write_report(result: SweepResult, out_dir: str | Path, formats=("json", "csv"), config: dict | None = None) -> list[Path]:
    out_dir = Path(out_dir)
    written = []
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        if "json" in formats:
            path = out_dir / "report.json"
            with open(path, "w") as f:
                json.dump(report_dict(result, config), f, indent=2)
                f.write("\n")
            written.append(path)
        if "csv" in formats:
            path = out_dir / "report.csv"
            with open(path, "w", newline="") as f:
                w = csv.writer(f)
                w.writerow(["schema_version", SCHEMA_VERSION, "partial", result.partial])
                w.writerow(CSV_COLUMNS)
                for r in result.records:
                    w.writerow(_csv_row(r))
            written.append(path)
    except OSError as e:
        raise OSError(f"cannot write report to {out_dir}: {e}") from e
    return written


def read_report(path: str | Path) -> SweepResult:
    with open(path) as f:
        d = json.load(f)
    if d.get("schema_version") != SCHEMA_VERSION:
        raise DomainError(f"{path}: unsupported report schema {d.get('schema_version')!r}")
    records = [SweepRecord.from_dict(r) for r in d["records"]]
    return SweepResult(records, d["summary"], d["partial"])


def validate_report(d: dict) -> None:
    """Structural check of a JSON report; raises DomainError on the first problem."""
    for key in ("schema_version", "partial", "summary", "records"):
        if key not in d:
            raise DomainError(f"report missing {key!r}")
    names = {f.name for f in fields(SweepRecord)}
    for r in d["records"]:
        if set(r) != names:
            raise DomainError(f"record {r.get('cell')} has fields {sorted(r)}")
        if r["verdict"] not in VERDICTS or r["regime"] not in REGIMES:
            raise DomainError(f"record {r['cell']} has bad verdict/regime")
    if d["summary"]["n_records"] != len(d["records"]):
        raise DomainError("summary record count does not match")
