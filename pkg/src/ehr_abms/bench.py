"""Micro-benchmarks for ABMS signing and verification.

Two sweeps are provided: attribute value length at a fixed count of one,
and attribute count at a fixed value length. Each point carries the mean and
standard deviation over its trials; the shape checks at the bottom turn a
report into pass/fail verdicts that do not depend on absolute speed.
"""

from __future__ import annotations

import gc
import json
import random
import statistics
import string
import time
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import abms, pairing
from .abms import AttributeDescriptor, AttributeRef
from .util import Entropy, os_entropy

SCHEMA_VERSION = 1
DEFAULT_LENGTHS = (10, 100, 1000, 10000)
DEFAULT_COUNTS = (1, 3, 5, 7, 9)
MIN_TRIALS = 30
FLATNESS_LIMIT = 1.25
R2_LIMIT = 0.98


@dataclass
class BenchPoint:
    x: int
    sign_ms: float
    sign_std: float
    verify_ms: float
    verify_std: float
    trials: int
    # per-attribute means; equal to the totals when x counts characters
    sign_per_attr_ms: float
    verify_per_attr_ms: float


@dataclass
class BenchReport:
    scenario: str  # "vary_length" | "vary_count"
    points: list[BenchPoint] = field(default_factory=list)
    schema_version: int = SCHEMA_VERSION

    def to_records(self) -> list[dict]:
        return [{"schema_version": self.schema_version, "scenario": self.scenario, **asdict(p)}
                for p in self.points]

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.to_records())

    @classmethod
    def from_jsonl(cls, text: str) -> "BenchReport":
        recs = [json.loads(line) for line in text.splitlines() if line.strip()]
        if not recs:
            raise ValueError("empty benchmark report")
        scenario = recs[0]["scenario"]
        version = recs[0]["schema_version"]
        pts = []
        for r in recs:
            r = dict(r)
            r.pop("scenario"), r.pop("schema_version")
            pts.append(BenchPoint(**r))
        return cls(scenario, pts, version)

    def table(self) -> str:
        head = "length" if self.scenario == "vary_length" else "count"
        lines = [f"{head:>8}  {'sign ms':>16}  {'verify ms':>16}  {'sign/attr':>10}  {'verify/attr':>11}  trials"]
        for p in self.points:
            lines.append(
                f"{p.x:>8}  {p.sign_ms:>8.3f} ± {p.sign_std:<5.3f}  {p.verify_ms:>8.3f} ± {p.verify_std:<5.3f}"
                f"  {p.sign_per_attr_ms:>10.3f}  {p.verify_per_attr_ms:>11.3f}  {p.trials}"
            )
        return "\n".join(lines)


class _Fixture:
    """Authorities, keys and extracted signing keys for ``count`` attributes."""

    gid = "gid-bench-patient"

    def __init__(self, params, keys: list[abms.AuthorityAttributeKeys]):
        self.params = params
        self.keys = keys
        self.vks = {ak.attribute: ak.verification_key for ak in keys}

    @classmethod
    def create(cls, params, count: int, entropy: Entropy) -> "_Fixture":
        refs = [AttributeRef(f"authority-{i}", f"attribute-{i}") for i in range(count)]
        return cls(params, [abms.authority_setup(params, ref, entropy) for ref in refs])

    def subset(self, count: int) -> "_Fixture":
        return _Fixture(self.params, self.keys[:count])

    def extract_all(self, values: Sequence[str]) -> list[abms.ExtractedSigningKey]:
        return [
            abms.extract(self.params, self.gid, AttributeDescriptor(ak.attribute.authority_id, ak.attribute.name, v), ak)
            for ak, v in zip(self.keys, values)
        ]


def _random_value(rng: random.Random, length: int) -> str:
    return "".join(rng.choices(string.ascii_letters + string.digits, k=length))


def _time_once(params, fixture: _Fixture, value_len: int, rng: random.Random) -> tuple[float, float]:
    values = [_random_value(rng, value_len) for _ in fixture.keys]
    skeys = fixture.extract_all(values)
    gc_was = gc.isenabled()
    gc.disable()
    try:
        t0 = time.perf_counter()
        sigs = [abms.sign_attribute(params, k, v) for k, v in zip(skeys, values)]
        t1 = time.perf_counter()
        ok = [abms.verify_attribute(params, s, fixture.vks[s.attribute]) for s in sigs]
        t2 = time.perf_counter()
    finally:
        if gc_was:
            gc.enable()
    if not all(ok):
        raise RuntimeError("benchmark signature failed to verify")
    return (t1 - t0) * 1e3, (t2 - t1) * 1e3


def _sweep(params, cells: list[tuple[_Fixture, int]], trials: int, rng: random.Random,
           warmup: int = 2) -> list[tuple[list[float], list[float]]]:
    """Time every cell once per round, round-robin, so slow drift hits all cells alike."""
    out: list[tuple[list[float], list[float]]] = [([], []) for _ in cells]
    for rnd in range(warmup + trials):
        for (fixture, value_len), (st, vt) in zip(cells, out):
            s, v = _time_once(params, fixture, value_len, rng)
            if rnd >= warmup:
                st.append(s)
                vt.append(v)
    return out


def _point(x: int, per_attr_div: int, sign_t: list[float], verify_t: list[float]) -> BenchPoint:
    sm, vm = statistics.fmean(sign_t), statistics.fmean(verify_t)
    return BenchPoint(
        x=x,
        sign_ms=sm,
        sign_std=statistics.stdev(sign_t) if len(sign_t) > 1 else 0.0,
        verify_ms=vm,
        verify_std=statistics.stdev(verify_t) if len(verify_t) > 1 else 0.0,
        trials=len(sign_t),
        sign_per_attr_ms=sm / per_attr_div,
        verify_per_attr_ms=vm / per_attr_div,
    )


def _check_trials(trials: int) -> None:
    if trials < MIN_TRIALS:
        raise ValueError(f"at least {MIN_TRIALS} trials per point are required, got {trials}")


def bench_length(lengths: Iterable[int] = DEFAULT_LENGTHS, trials: int = MIN_TRIALS, *,
                 entropy: Entropy = os_entropy, seed: int | None = None) -> BenchReport:
    """Sign/verify one attribute whose value has each of ``lengths`` characters."""
    _check_trials(trials)
    params = pairing.setup(128)
    rng = random.Random(seed)
    fixture = _Fixture.create(params, 1, entropy)
    lengths = list(lengths)
    if any(n < 1 for n in lengths):
        raise ValueError("attribute length must be positive")
    timings = _sweep(params, [(fixture, n) for n in lengths], trials, rng)
    return BenchReport("vary_length", [_point(n, 1, s, v) for n, (s, v) in zip(lengths, timings)])


def bench_count(counts: Iterable[int] = DEFAULT_COUNTS, trials: int = MIN_TRIALS, *,
                value_length: int = 10, entropy: Entropy = os_entropy, seed: int | None = None) -> BenchReport:
    """Sign/verify ``count`` attributes from distinct authorities; totals are summed."""
    _check_trials(trials)
    params = pairing.setup(128)
    rng = random.Random(seed)
    counts = list(counts)
    if any(c < 1 for c in counts):
        raise ValueError("attribute count must be positive")
    fixture = _Fixture.create(params, max(counts, default=0), entropy)
    timings = _sweep(params, [(fixture.subset(c), value_length) for c in counts], trials, rng)
    return BenchReport("vary_count", [_point(c, c, s, v) for c, (s, v) in zip(counts, timings)])


# -- shape checks


def flatness(report: BenchReport) -> tuple[float, float]:
    """max/min of the mean sign time and of the mean verify time across points."""
    s = [p.sign_ms for p in report.points]
    v = [p.verify_ms for p in report.points]
    return max(s) / min(s), max(v) / min(v)


def linear_r2(xs: Sequence[float], ys: Sequence[float]) -> float | None:
    """Coefficient of determination of a least-squares line; None for fewer than 3 points."""
    if len(xs) < 3:
        return None
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        return 1.0
    return 1.0 - float(np.sum(resid**2)) / ss_tot


def count_fit(report: BenchReport) -> tuple[float | None, float | None]:
    xs = [p.x for p in report.points]
    return linear_r2(xs, [p.sign_ms for p in report.points]), linear_r2(xs, [p.verify_ms for p in report.points])


def verify_exceeds_sign(report: BenchReport) -> bool:
    return all(p.verify_per_attr_ms > p.sign_per_attr_ms for p in report.points)


@dataclass
class ShapeVerdict:
    name: str
    value: float | None
    limit: float
    passed: bool

    def line(self) -> str:
        v = "n/a" if self.value is None else f"{self.value:.4f}"
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {v} (limit {self.limit})"


def shape_verdicts(report: BenchReport, *, flat_limit: float = FLATNESS_LIMIT,
                   r2_limit: float = R2_LIMIT) -> list[ShapeVerdict]:
    out = []
    if report.scenario == "vary_length":
        fs, fv = flatness(report)
        out.append(ShapeVerdict("sign max/min", fs, flat_limit, fs <= flat_limit))
        out.append(ShapeVerdict("verify max/min", fv, flat_limit, fv <= flat_limit))
    else:
        rs, rv = count_fit(report)
        if rs is not None:
            out.append(ShapeVerdict("sign total R^2", rs, r2_limit, rs >= r2_limit))
            out.append(ShapeVerdict("verify total R^2", rv, r2_limit, rv >= r2_limit))
    ok = verify_exceeds_sign(report)
    out.append(ShapeVerdict("verify > sign per attribute", 1.0 if ok else 0.0, 1.0, ok))
    return out
