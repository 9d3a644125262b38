"""Monte Carlo estimation of ``U_n`` and single-trajectory execution.

Paths are generated in fixed-size blocks. Block ``b`` draws from its own
Philox stream seeded by ``SeedSequence(seed, spawn_key=(b,))`` and always
at full block width, so raising the path count only appends paths and
never reshuffles earlier ones. Blocks reduce in order, which keeps the
result bit-identical for any thread count.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Iterator

import numpy as np

from .arms import ArmSet
from .distributions import PayoffDistribution
from .exceptions import ConfigError, NumericalError
from .strategies import Strategy, check_arm_ids
from .utility import TrajectoryStatistics, UtilityIndex, eval_index

DEFAULT_BLOCK = 8192
# uniforms drawn per refill in the stage loop
_UNIFORM_CHUNK = 1 << 18
# smallest uniform handed to an inverse CDF, keeps ndtri finite
_U_FLOOR = 2.0 ** -54


@dataclass(frozen=True)
class SimulationConfig:
    horizon: int
    paths: int
    seed: int = 0
    antithetic: bool = False
    threads: int = 1
    block_size: int = DEFAULT_BLOCK

    def __post_init__(self):
        if self.horizon < 1:
            raise ConfigError("horizon must be a positive integer")
        if self.paths < 1:
            raise ConfigError("paths must be a positive integer")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if self.block_size < 2 or self.block_size % 2:
            raise ConfigError("block_size must be an even integer >= 2")
        if self.antithetic and self.paths % 2:
            raise ConfigError("antithetic sampling needs an even number of paths")


@dataclass(frozen=True)
class MonteCarloEstimate:
    mean: float
    std_error: float
    paths: int
    seed: int | None = None

    @property
    def ci95(self) -> tuple[float, float]:
        return (self.mean - 1.96 * self.std_error, self.mean + 1.96 * self.std_error)

    def to_record(self) -> dict:
        lo, hi = self.ci95
        return {"mean": self.mean, "se": self.std_error, "ci95": [lo, hi],
                "paths": self.paths, "seed": self.seed}


def block_rng(seed: int, block: int) -> np.random.Generator:
    """Generator for path block ``block``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(block,))))


def sample_payoff(dist: PayoffDistribution, rng: np.random.Generator) -> float:
    return float(dist.sample(rng))


# ---------------------------------------------------------------------------
# single trajectory

@dataclass(frozen=True)
class StageRecord:
    stage: int
    arm: int
    payoff: float
    deviation_sum: float


def run_strategy(arm_set: ArmSet, strategy: Strategy, n: int, rng: np.random.Generator,
                 record: bool = False):
    """Play one trajectory of ``n`` stages.

    Returns TrajectoryStatistics, or ``(stats, records)`` when ``record`` is
    set, with one StageRecord per stage.
    """
    if n < 1:
        raise ConfigError("horizon must be a positive integer")
    K = len(arm_set)
    means = arm_set.means
    pulls = np.zeros((1, K), dtype=np.int64)
    s = np.zeros(1)
    d = np.zeros(1)
    rows = []
    for i in range(1, n + 1):
        k_arr = np.asarray(strategy.choose(i, pulls, s.copy(), d.copy()))
        check_arm_ids(k_arr, K, i)
        k = int(k_arr.reshape(-1)[0])
        z = sample_payoff(arm_set[k].distribution, rng)
        s += z
        d += z - means[k]
        pulls[0, k] += 1
        if record:
            rows.append(StageRecord(i, k, z, float(d[0])))
    stats = TrajectoryStatistics(float(s[0]) / n, float(d[0]) / math.sqrt(n), n)
    return (stats, rows) if record else stats


def write_trajectory_csv(path, records) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["stage", "arm", "payoff", "deviation_sum"])
        for r in records:
            w.writerow([r.stage, r.arm, repr(r.payoff), repr(r.deviation_sum)])


# ---------------------------------------------------------------------------
# batched engine

def _block_sizes(paths: int, block: int) -> list[int]:
    full, rest = divmod(paths, block)
    return [block] * full + ([rest] if rest else [])


def _scheduled_sums(arm_set: ArmSet, counts: np.ndarray, rng, width: int):
    s = np.zeros(width)
    d = np.zeros(width)
    for k, c in enumerate(counts):
        if c == 0:
            continue
        arm = arm_set[k]
        sk = arm.distribution.sample_sum(rng, int(c), width)
        s += sk
        d += sk - c * float(arm.mean)
    return s, d


def _stage_loop(arm_set: ArmSet, strategy: Strategy, n: int, rng, width: int, antithetic: bool):
    K = len(arm_set)
    means = arm_set.means
    dists = [a.distribution for a in arm_set]
    half = width // 2 if antithetic else width
    pulls = np.zeros((width, K), dtype=np.int64) if strategy.needs_pulls else None
    s = np.zeros(width)
    d = np.zeros(width)
    rows = np.arange(width)
    per_refill = max(1, _UNIFORM_CHUNK // half)
    buf, pos = None, per_refill
    for i in range(1, n + 1):
        if pos == per_refill:
            buf = rng.random((min(per_refill, n - i + 1), half))
            np.maximum(buf, _U_FLOOR, out=buf)
            pos = 0
        u = buf[pos]
        pos += 1
        if antithetic:
            u = np.concatenate([u, 1.0 - u])
            np.maximum(u, _U_FLOOR, out=u)
        k = np.asarray(strategy.choose(i, pulls, s, d))
        check_arm_ids(k, K, i)
        k = k.astype(np.int64, copy=False)
        if K == 1:
            z = dists[0].ppf(u)
        elif K == 2:
            z = np.where(k == 0, dists[0].ppf(u), dists[1].ppf(u))
        else:
            z = np.empty(width)
            for j, dist in enumerate(dists):
                m = k == j
                if m.any():
                    z[m] = dist.ppf(u[m])
        s += z
        d += z - means[k]
        if pulls is not None:
            pulls[rows, k] += 1
    return s, d


def _simulate_block(arm_set, strategy, cfg: SimulationConfig, block: int, width: int):
    rng = block_rng(cfg.seed, block)
    n = cfg.horizon
    sched = None if cfg.antithetic else strategy.schedule(n)
    full = cfg.block_size
    if sched is not None:
        check_arm_ids(sched, len(arm_set))
        counts = np.bincount(sched, minlength=len(arm_set))
        s, d = _scheduled_sums(arm_set, counts, rng, full)
    else:
        s, d = _stage_loop(arm_set, strategy, n, rng, full, cfg.antithetic)
    if cfg.antithetic:
        h, w = full // 2, width // 2
        s = np.concatenate([s[:w], s[h:h + w]])
        d = np.concatenate([d[:w], d[h:h + w]])
    else:
        s, d = s[:width], d[:width]
    return s / n, d / math.sqrt(n)


def iter_blocks(arm_set: ArmSet, strategy: Strategy, cfg: SimulationConfig) -> Iterator[TrajectoryStatistics]:
    """Trajectory statistics block by block, in block order.

    In antithetic mode each block holds its ``m`` base paths followed by
    their ``m`` mirrored partners.
    """
    sizes = _block_sizes(cfg.paths, cfg.block_size)
    jobs = list(enumerate(sizes))

    def run(job):
        b, w = job
        x, y = _simulate_block(arm_set, strategy, cfg, b, w)
        return TrajectoryStatistics(x, y, cfg.horizon)

    if cfg.threads == 1 or len(jobs) == 1:
        for job in jobs:
            yield run(job)
    else:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            yield from pool.map(run, jobs)


def simulate_statistics(arm_set: ArmSet, strategy: Strategy, cfg: SimulationConfig) -> TrajectoryStatistics:
    """All paths' ``(S_n/n, S̄_n/sqrt(n))`` concatenated in path order."""
    blocks = list(iter_blocks(arm_set, strategy, cfg))
    return TrajectoryStatistics(np.concatenate([b.sample_mean for b in blocks]),
                                np.concatenate([b.scaled_deviation for b in blocks]), cfg.horizon)


def estimate_Un(arm_set: ArmSet, strategy: Strategy, u: UtilityIndex, cfg: SimulationConfig) -> MonteCarloEstimate:
    """Monte Carlo mean and standard error of ``u(S_n/n, S̄_n/sqrt(n))``.

    With antithetic pairs the standard error is computed from pair averages.
    """
    if strategy.max_arm() >= len(arm_set):
        check_arm_ids(np.array([strategy.max_arm()]), len(arm_set))
    # per-block (count, mean, centred sum of squares), merged pairwise in order
    count, mean, m2 = 0, 0.0, 0.0
    bad = 0
    for blk in iter_blocks(arm_set, strategy, cfg):
        vals = np.asarray(eval_index(u, blk.sample_mean, blk.scaled_deviation), dtype=float)
        vals = np.broadcast_to(vals, np.shape(blk.sample_mean))
        finite = np.isfinite(vals)
        if not finite.all():
            bad += int((~finite).sum())
            continue
        if cfg.antithetic:
            h = len(vals) // 2
            vals = 0.5 * (vals[:h] + vals[h:])
        nb = len(vals)
        mb = float(vals.mean())
        m2b = float(np.sum((vals - mb) ** 2))
        tot = count + nb
        delta = mb - mean
        mean += delta * nb / tot
        m2 += m2b + delta * delta * count * nb / tot
        count = tot
    if bad:
        raise NumericalError(f"utility was non-finite on {bad} of {cfg.paths} paths")
    se = math.sqrt(m2 / (count - 1) / count) if count > 1 else float("nan")
    return MonteCarloEstimate(mean, se, cfg.paths, cfg.seed)


def config_record(cfg: SimulationConfig) -> dict:
    return asdict(cfg)
