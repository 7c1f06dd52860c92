"""Bootstrap Matching driver: subsample, match, estimate, aggregate.

Each replicate draws its own generator from a seed derived from
``(master_seed, replicate_index)``, so results do not depend on how
replicates are scheduled across workers.
"""

import logging
import math
import multiprocessing as mp
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from threadpoolctl import threadpool_limits

from .data_model import subset, validate
from .errors import BootMatchError, ConfigInvalid, SampleTooSmall, TooManyFailures
from .inference import ESTIMATORS, ReplicateResult, matched_pre_gaps, signed_z
from .matching import balance_test, default_caliper, logit, nearest_neighbor_match_logits
from .multiplicity import DEFAULT_STOREY_LAMBDA, MultiplicitySummary, summarize
from .propensity import DesignSpec, build_design, fit_propensity, predict_propensity

log = logging.getLogger(__name__)

MIN_SUBSAMPLE = 4
THREADS_ENV = "BOOTMATCH_THREADS"


@dataclass(frozen=True)
class BootstrapConfig:
    """Run configuration.

    ``caliper_logit`` fixes an absolute caliper; otherwise
    ``caliper_scale`` times the replicate's logit sd is used, and
    ``caliper_scale=None`` disables the caliper. ``workers`` only affects
    scheduling, so it is excluded from equality and from reports.
    """

    replicates: int = 300
    ratio: float = 0.025
    with_replacement: bool = False
    master_seed: int = 0
    workers: int = field(default=1, compare=False)
    min_success_fraction: float = 0.9
    estimator: str = "did"
    design_spec: DesignSpec = DesignSpec()
    caliper_scale: float = 0.2
    caliper_logit: float = None
    storey_lambda: float = DEFAULT_STOREY_LAMBDA
    ridge: float = 1e-6
    max_iter: int = 50
    tol: float = 1e-8

    def check(self):
        if self.replicates < 1:
            raise ConfigInvalid("replicates must be >= 1")
        if not 0.0 < self.ratio <= 1.0:
            raise ConfigInvalid(f"ratio must lie in (0, 1], got {self.ratio}")
        if not 0.0 < self.min_success_fraction <= 1.0:
            raise ConfigInvalid("min_success_fraction must lie in (0, 1]")
        if self.estimator not in ESTIMATORS:
            raise ConfigInvalid(f"unknown estimator {self.estimator!r}; choose from {sorted(ESTIMATORS)}")
        if self.workers < 0:
            raise ConfigInvalid("workers must be >= 0")
        if self.caliper_logit is not None and not self.caliper_logit > 0:
            raise ConfigInvalid("caliper_logit must be positive")
        if self.caliper_scale is not None and not self.caliper_scale > 0:
            raise ConfigInvalid("caliper_scale must be positive")
        if not 0.0 < self.storey_lambda < 1.0:
            raise ConfigInvalid("storey_lambda must lie in (0, 1)")
        if self.ridge < 0:
            raise ConfigInvalid("ridge must be >= 0")


@dataclass(frozen=True)
class AggregateResult:
    effect: float
    effect_sd: float
    final_p: float
    multiplicity: MultiplicitySummary
    replicates: tuple
    failed_count: int
    config: BootstrapConfig
    dataset_fingerprint: str
    warnings: tuple = ()


def resolve_workers(workers):
    """0 means: $BOOTMATCH_THREADS if set, else the CPU count."""
    if workers and workers > 0:
        return workers
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            value = int(env)
        except ValueError:
            raise ConfigInvalid(f"{THREADS_ENV} must be an integer, got {env!r}") from None
        if value > 0:
            return value
    return os.cpu_count() or 1


def replicate_seed(master_seed, replicate_index):
    """Counter-based 64-bit seed for one replicate."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(replicate_index),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def subsample_size(total, q):
    # small epsilon so e.g. 100 * 0.29 does not floor to 28
    return int(math.floor(total * q + 1e-9))


def subsample_indices(total, q, with_replacement, seed):
    """``floor(total * q)`` row indices drawn uniformly, deterministically from ``seed``."""
    size = subsample_size(total, q)
    if size < MIN_SUBSAMPLE:
        raise SampleTooSmall(f"subsample of {size} subjects (< {MIN_SUBSAMPLE}) from {total} at ratio {q}")
    rng = np.random.default_rng(seed)
    if with_replacement:
        return rng.integers(0, total, size=size)
    return rng.choice(total, size=size, replace=False)


def _caliper_for(config, logits):
    if config.caliper_logit is not None:
        return config.caliper_logit
    if config.caliper_scale is None:
        return None
    cal = default_caliper(logits, config.caliper_scale)
    return None if math.isinf(cal) else cal


def run_replicate(dataset, config, replicate_index):
    """Run one replicate; failures come back as ``status="failed"``, never raised."""
    seed = replicate_seed(config.master_seed, replicate_index)
    notes = []
    try:
        idx = subsample_indices(len(dataset), config.ratio, config.with_replacement, seed)
        sample = subset(dataset, idx)
        design, std = build_design(sample, config.design_spec)
        if std.constant_columns:
            notes.append(f"constant covariate column(s) {list(std.constant_columns)} in propensity design")
        model = fit_propensity(
            design, sample.group, config.ridge, config.max_iter, config.tol,
            standardization=std, spec=config.design_spec,
        )
        if not model.converged:
            notes.append(f"propensity fit did not converge in {model.iterations} iterations")
        logits = logit(predict_propensity(model, design))
        matched = nearest_neighbor_match_logits(logits, sample.group, _caliper_for(config, logits))
        balance = balance_test(sample, matched)
        effect, test = ESTIMATORS[config.estimator](sample, matched)
    except (BootMatchError, np.linalg.LinAlgError, ValueError, ArithmeticError) as exc:
        return ReplicateResult(
            replicate_index=replicate_index,
            replicate_seed=seed,
            status="failed",
            reason=type(exc).__name__,
            warnings=tuple(notes) + (f"{type(exc).__name__}: {exc}",),
        )
    return ReplicateResult(
        replicate_index=replicate_index,
        replicate_seed=seed,
        effect=effect,
        p_value=test.p_value,
        z_value=signed_z(effect, test.p_value),
        pre_balance_p=balance.p_value,
        n_pairs=matched.n_pairs,
        unmatched_treated=matched.unmatched_treated,
        propensity_converged=model.converged,
        pre_gaps=matched_pre_gaps(sample, matched),
        warnings=tuple(notes),
    )


# Worker-process state, inherited through fork or set by the initializer.
_WORKER = {}


def _init_worker(dataset, config):
    threadpool_limits(1)
    _WORKER["dataset"] = dataset
    _WORKER["config"] = config


def _worker_replicate(i):
    return run_replicate(_WORKER["dataset"], _WORKER["config"], i)


def _pool_context():
    methods = mp.get_all_start_methods()
    return mp.get_context("fork" if "fork" in methods else methods[0])


def run_replicates(dataset, config, indices=None):
    """Execute replicates (all by default), returned in ascending index order."""
    indices = list(range(config.replicates)) if indices is None else sorted(indices)
    workers = min(resolve_workers(config.workers), max(1, len(indices)))
    if workers == 1:
        with threadpool_limits(1):
            return [run_replicate(dataset, config, i) for i in indices]
    chunk = max(1, len(indices) // (workers * 4))
    with ProcessPoolExecutor(
        max_workers=workers, mp_context=_pool_context(),
        initializer=_init_worker, initargs=(dataset, config),
    ) as pool:
        # map() yields in submission order whatever the completion order
        return list(pool.map(_worker_replicate, indices, chunksize=chunk))


def aggregate(dataset, config, results):
    """Combine index-ordered replicate results into an AggregateResult."""
    results = sorted(results, key=lambda r: r.replicate_index)
    ok = [r for r in results if r.ok]
    failed = len(results) - len(ok)
    notes = []
    for r in results:
        for w in r.warnings:
            notes.append(f"replicate {r.replicate_index}: {w}")
    if len(ok) == 0 or len(ok) < config.min_success_fraction * len(results):
        raise TooManyFailures(
            f"{failed} of {len(results)} replicates failed; "
            f"minimum success fraction is {config.min_success_fraction}",
            replicates=results,
        )
    if failed:
        notes.append(f"{failed} of {len(results)} replicates failed and were excluded")
    total = 0.0
    for r in ok:
        total += r.effect
    effect = total / len(ok)
    if len(ok) > 1:
        ss = 0.0
        for r in ok:
            ss += (r.effect - effect) ** 2
        effect_sd = math.sqrt(ss / (len(ok) - 1))
    else:
        effect_sd = 0.0
    summary = summarize([r.p_value for r in ok], [r.effect for r in ok], config.storey_lambda)
    notes.extend(summary.warnings)
    return AggregateResult(
        effect=effect,
        effect_sd=effect_sd,
        final_p=summary.final_p,
        multiplicity=summary,
        replicates=tuple(results),
        failed_count=failed,
        config=config,
        dataset_fingerprint=dataset.fingerprint(),
        warnings=tuple(notes),
    )


def run(dataset, config):
    """Run Bootstrap Matching end to end.

    Raises
    ------
    SampleTooSmall
        If ``floor(len(dataset) * ratio) < 4``.
    TooManyFailures
        If fewer than ``min_success_fraction`` of replicates succeed.
    """
    config.check()
    validate(dataset)
    size = subsample_size(len(dataset), config.ratio)
    if size < MIN_SUBSAMPLE:
        raise SampleTooSmall(f"subsample of {size} subjects (< {MIN_SUBSAMPLE}) at ratio {config.ratio}")
    log.info("running %d replicates of %d subjects", config.replicates, size)
    results = run_replicates(dataset, config)
    return aggregate(dataset, config, results)

