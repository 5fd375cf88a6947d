"""Replication engine: power and level estimation from experiment configs."""

from __future__ import annotations

import csv
import itertools
import json
import math
import re
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import __version__
from .aggregation import (
    WeightedCollection,
    aggregated_test,
    dyadic_anisotropic_collection,
    dyadic_isotropic_collection,
    scaled_grid_collection,
)
from .datagen import MechanismSpec, gen_h0_split, generate, mechanism_from_dict, mechanism_to_dict
from .errors import ConfigError, HsicError, UndefinedError
from .kernels import Bandwidths, Sample, empirical_bandwidths
from .permutation import derive_seed, single_permuted_test
from .theoretical import NullSampler, calibrate_theoretical

REFERENCE_REPLICATIONS = 1000

TEST_KINDS = ("single", "aggregated", "theoretical")
COLLECTIONS = ("diagonal", "grid", "unit-grid", "dyadic", "anisotropic")


@dataclass
class ExperimentConfig:
    mechanism: dict
    n: int
    alpha: float
    test: dict
    replications: int
    seed: int
    grid: dict = field(default_factory=dict)
    h0: bool = False
    output: Optional[str] = None


@dataclass
class PowerRecord:
    grid_point: dict
    n: int
    rejections: int
    replications: int
    wall_clock: float = 0.0

    @property
    def power(self) -> float:
        return self.rejections / self.replications

    @property
    def se(self) -> float:
        p = self.power
        return math.sqrt(p * (1.0 - p) / self.replications)


# ---------------------------------------------------------------------------
# config loading
# ---------------------------------------------------------------------------


def _line_of(text: str, key: str) -> Optional[int]:
    m = re.search(r'"' + re.escape(key) + r'"\s*:', text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a JSON experiment config; errors carry line numbers."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(exc.msg, line=exc.lineno) from None
    if not isinstance(raw, dict):
        raise ConfigError("top level must be an object", line=1)

    def fail(key, msg):
        raise ConfigError(f"{key}: {msg}", line=_line_of(text, key))

    allowed = {"mechanism", "n", "alpha", "test", "replications", "seed", "grid", "h0", "output"}
    for key in raw:
        if key not in allowed:
            fail(key, "unknown key")
    for key in ("mechanism", "n", "test"):
        if key not in raw:
            raise ConfigError(f"missing required key {key!r}")
    cfg = ExperimentConfig(
        mechanism=raw["mechanism"],
        n=raw["n"],
        alpha=raw.get("alpha", 0.05),
        test=raw["test"],
        replications=raw.get("replications", 200),
        seed=raw.get("seed", 0),
        grid=raw.get("grid", {}),
        h0=raw.get("h0", False),
        output=raw.get("output"),
    )
    if not isinstance(cfg.n, int) or cfg.n < 4:
        fail("n", "must be an integer >= 4")
    if not isinstance(cfg.alpha, (int, float)) or not 0 < cfg.alpha < 1:
        fail("alpha", "must lie in (0, 1)")
    if not isinstance(cfg.replications, int) or cfg.replications < 1:
        fail("replications", "must be an integer >= 1")
    if not isinstance(cfg.seed, int) or not 0 <= cfg.seed < 2**64:
        fail("seed", "must be an integer in [0, 2**64)")
    if not isinstance(cfg.h0, bool):
        fail("h0", "must be true or false")
    if not isinstance(cfg.grid, dict):
        fail("grid", "must map parameter names to lists")
    for key, values in cfg.grid.items():
        if not isinstance(values, list) or not values:
            fail(key, "grid values must be a non-empty list")
    if not isinstance(cfg.mechanism, dict):
        fail("mechanism", "must be an object with a 'name'")
    try:
        for point in grid_points(cfg):
            mech = _mechanism_at(cfg, point)
            n = point.get("n", cfg.n)
            if not isinstance(n, int) or n < 4:
                fail("grid", "n values must be integers >= 4")
    except HsicError as exc:
        if isinstance(exc, ConfigError):
            raise
        fail("mechanism", str(exc))
    _validate_test(cfg.test, fail)
    return cfg


def _validate_test(test, fail) -> None:
    if not isinstance(test, dict):
        fail("test", "must be an object")
    kind = test.get("kind")
    if kind not in TEST_KINDS:
        fail("kind", f"must be one of {TEST_KINDS}")
    for key in ("b", "b1", "b2"):
        if key in test and (not isinstance(test[key], int) or test[key] < 1):
            fail(key, "must be an integer >= 1")
    if kind == "single":
        has_explicit = "lambda" in test or "mu" in test
        if has_explicit and not ("lambda" in test and "mu" in test):
            fail("test", "explicit bandwidths need both 'lambda' and 'mu'")
        if "scale" in test and (not isinstance(test["scale"], (int, float)) or test["scale"] <= 0):
            fail("scale", "must be positive")
    else:
        coll = test.get("collection", "diagonal")
        if coll not in COLLECTIONS:
            fail("collection", f"must be one of {COLLECTIONS}")
        if kind == "theoretical" and coll in ("diagonal", "grid"):
            fail("collection", "theoretical tests need an observation-independent collection")
        if test.get("weights", "exponential") not in ("uniform", "exponential"):
            fail("weights", "must be 'uniform' or 'exponential'")
        r = test.get("r", 5)
        if not isinstance(r, int) or r < 1:
            fail("r", "must be an integer >= 1")


def load_config(path: str) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config(fh.read())


def grid_points(cfg: ExperimentConfig) -> list[dict]:
    keys = list(cfg.grid)
    return [dict(zip(keys, combo)) for combo in itertools.product(*(cfg.grid[k] for k in keys))]


def _mechanism_at(cfg: ExperimentConfig, point: dict) -> MechanismSpec:
    d = dict(cfg.mechanism)
    d.update({k: v for k, v in point.items() if k != "n"})
    return mechanism_from_dict(d)


# ---------------------------------------------------------------------------
# test construction
# ---------------------------------------------------------------------------


def _fixed_collection(test: dict, p: int, q: int, n: int) -> Optional[WeightedCollection]:
    name = test.get("collection", "diagonal")
    r = test.get("r", 5)
    weights = test.get("weights", "exponential")
    if name == "dyadic":
        return dyadic_isotropic_collection(n, p, q)
    if name == "anisotropic":
        return dyadic_anisotropic_collection(n, p, q)
    if name == "unit-grid":
        return scaled_grid_collection(Bandwidths(np.ones(p), np.ones(q)), r, weights, "grid")
    return None


def sample_collection(test: dict, s: Sample) -> WeightedCollection:
    """Collection for ``s``; the diagonal and grid shapes scale the empirical widths."""
    fixed = _fixed_collection(test, s.p, s.q, s.n)
    if fixed is not None:
        return fixed
    shape = test.get("collection", "diagonal")
    return scaled_grid_collection(
        empirical_bandwidths(s), test.get("r", 5), test.get("weights", "exponential"), shape
    )


def single_bandwidths(test: dict, s: Sample) -> Bandwidths:
    if "lambda" in test:
        return Bandwidths(test["lambda"], test["mu"])
    return empirical_bandwidths(s).scaled(test.get("scale", 1.0))


def make_decision(
    test: dict, alpha: float, mech: MechanismSpec, n: int, p: int, q: int, seed: int
) -> Callable[[Sample, int], bool]:
    """Return ``decide(sample, seed) -> reject`` for the test described by ``test``."""
    kind = test["kind"]
    if kind == "single":
        b = test.get("b", 500)
        return lambda s, sd: single_permuted_test(s, single_bandwidths(test, s), alpha, b, sd).reject
    if kind == "aggregated":
        b1, b2 = test.get("b1", 3000), test.get("b2", 500)
        return lambda s, sd: aggregated_test(s, sample_collection(test, s), alpha, b1, b2, sd).reject
    coll = _fixed_collection(test, p, q, n)
    ns = NullSampler(lambda size, sd: gen_h0_split(mech, size, sd), n)
    counts = (test.get("count_a", 50_000), test.get("count_b", 1_000))
    cal = calibrate_theoretical(ns, coll, alpha, counts, derive_seed(seed, 0))
    return lambda s, sd: cal.test(s).reject


# ---------------------------------------------------------------------------
# estimation
# ---------------------------------------------------------------------------


def rejection_count(
    draw: Callable[[int], Sample],
    decide: Callable[[Sample, int], bool],
    replications: int,
    seed: int,
) -> int:
    """Number of rejections over ``replications`` independent trials."""
    count = 0
    for r in range(replications):
        s = draw(derive_seed(seed, r, 0))
        count += bool(decide(s, derive_seed(seed, r, 1)))
    return count


def estimate_power(cfg: ExperimentConfig) -> list[PowerRecord]:
    records = []
    for g, point in enumerate(grid_points(cfg) or [{}]):
        t0 = time.perf_counter()
        mech = _mechanism_at(cfg, point)
        n = point.get("n", cfg.n)
        gen = gen_h0_split if cfg.h0 else generate
        probe = gen(mech, n, 0)
        point_seed = derive_seed(cfg.seed, g)
        decide = make_decision(cfg.test, cfg.alpha, mech, n, probe.p, probe.q, point_seed)
        count = rejection_count(
            lambda sd: gen(mech, n, sd), decide, cfg.replications, derive_seed(point_seed, 1)
        )
        records.append(PowerRecord(point, n, count, cfg.replications, time.perf_counter() - t0))
    return records


def relative_error(pi_perm: float, pi_theo: float) -> float:
    if pi_theo <= 0:
        raise UndefinedError("relative error is undefined when the reference power is 0")
    return abs(pi_perm - pi_theo) / pi_theo


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


def write_power_csv(records: list[PowerRecord], path_or_file, grid_keys=None) -> None:
    """Deterministic CSV (no timings): grid keys, n, rejections, replications, power, se."""
    if isinstance(path_or_file, str):
        with open(path_or_file, "w", newline="") as fh:
            write_power_csv(records, fh, grid_keys)
        return
    if grid_keys is None:
        grid_keys = list(records[0].grid_point) if records else []
    grid_keys = [k for k in grid_keys if k != "n"]
    w = csv.writer(path_or_file, lineterminator="\n")
    w.writerow(grid_keys + ["n", "rejections", "replications", "power", "se"])
    for rec in records:
        w.writerow(
            [rec.grid_point[k] for k in grid_keys]
            + [rec.n, rec.rejections, rec.replications, repr(rec.power), repr(rec.se)]
        )


def read_power_csv(path: str) -> list[dict]:
    """Load a power table, including ones produced by external tools.

    Any columns are kept as strings except ``power`` (float) and the integer
    counts when present.
    """
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for row in rows:
        row["power"] = float(row["power"])
        for key in ("n", "rejections", "replications"):
            if row.get(key) not in (None, ""):
                row[key] = int(row[key])
    return rows


def run_metadata(cfg: ExperimentConfig, records: list[PowerRecord]) -> dict:
    meta = {
        "software": "hsicagg",
        "version": __version__,
        "config": {
            "mechanism": cfg.mechanism,
            "grid": cfg.grid,
            "n": cfg.n,
            "alpha": cfg.alpha,
            "test": cfg.test,
            "replications": cfg.replications,
            "seed": cfg.seed,
            "h0": cfg.h0,
        },
        "wall_clock_seconds": [rec.wall_clock for rec in records],
    }
    if cfg.replications < REFERENCE_REPLICATIONS:
        meta["deviation"] = (
            f"{cfg.replications} replications per grid point "
            f"(reference protocol uses {REFERENCE_REPLICATIONS})"
        )
    return meta


def describe_mechanism(spec: MechanismSpec) -> str:
    return json.dumps(mechanism_to_dict(spec), sort_keys=True)
