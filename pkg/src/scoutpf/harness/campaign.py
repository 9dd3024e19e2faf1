"""Monte Carlo campaigns: independent seeded runs per filter, then aggregation.

Every run ``r`` of a campaign with base seed ``s`` owns the random stream
``(s, r)``. Its first child drives the truth simulation, shared by all
filters of that run; the filter draws from a child keyed by the filter
name. Results are therefore independent of execution order and of the
number of worker processes.
"""

from __future__ import annotations

import os
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np

from ..filters import FilterConfig, make_filter
from ..scenarios import ScenarioSpec, build_scenario, dump_scenario, load_scenario, simulate_truth
from ..stochastic import RngStream

WORKERS_ENV = "SCOUTPF_WORKERS"
DIVERGENCE_SIGMAS = 5.0
DIVERGENCE_STEPS = 5


@dataclass(frozen=True)
class CampaignSpec:
    """What to run: a scenario, named filters with their configs, and the MC size."""

    scenario: ScenarioSpec
    filters: tuple                    # ((name, FilterConfig), ...)
    n_mc: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.n_mc < 1:
            raise ValueError("n_mc must be >= 1")
        if not self.filters:
            raise ValueError("at least one filter is required")
        object.__setattr__(self, "filters", tuple((str(n), c) for n, c in self.filters))


@dataclass
class StepRecord:
    step: int
    time: float
    mean: np.ndarray
    cov_diag: np.ndarray
    error: np.ndarray
    n_eff: float
    psi: float
    update_kind: str


@dataclass
class RunRecord:
    filter: str
    run: int
    seed: int
    steps: list = field(default_factory=list)
    status: str = "ok"
    failed_step: int | None = None

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    @property
    def diverged(self) -> bool:
        """Error beyond 5 reported sigmas on some axis for 5 consecutive steps."""
        run = 0
        for s in self.steps:
            sd = np.sqrt(np.clip(s.cov_diag, 0.0, None))
            if np.any(np.abs(s.error) > DIVERGENCE_SIGMAS * sd):
                run += 1
                if run >= DIVERGENCE_STEPS:
                    return True
            else:
                run = 0
        return False


def filter_stream_id(name: str) -> int:
    return zlib.crc32(name.encode())


@lru_cache(maxsize=8)
def _scenario_from_text(text: str):
    return build_scenario(load_scenario(text))


def run_single(spec: ScenarioSpec, filter_name: str, config: FilterConfig, seed: int,
               run: int) -> RunRecord:
    """One Monte Carlo run of one filter; failures are recorded, not raised."""
    scenario = _scenario_from_text(dump_scenario(spec))
    base = RngStream(seed, (run,))
    truth, observations = simulate_truth(scenario, base.child(0).generator())
    stream = base.child(1, filter_stream_id(filter_name))
    record = RunRecord(filter_name, run, stream.derived_seed())
    rng = stream.generator()
    filt = make_filter(filter_name, scenario, config)
    belief = filt.initial_belief()
    t_prev = scenario.t0
    for rec, x_true in zip(observations, truth):
        try:
            out, belief = filt.step(belief, rec.value, t_prev, rec.time,
                                    scenario.step_index(rec.step), rng)
        except Exception as exc:  # noqa: BLE001 - every failure mode is counted
            record.status = f"{type(exc).__name__}: {exc}"
            record.failed_step = rec.step
            break
        record.steps.append(StepRecord(rec.step, rec.time, out.mean, np.diag(out.cov),
                                       out.mean - x_true, out.n_eff, out.psi, out.update_kind))
        t_prev = rec.time
    return record


def _run_task(args):
    return run_single(*args)


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def execute(campaign: CampaignSpec, workers: int | None = None) -> list[RunRecord]:
    """All runs of every filter, sorted by (filter order, run id)."""
    workers = default_workers() if workers is None else max(1, workers)
    tasks = [(campaign.scenario, name, cfg, campaign.seed, run)
             for name, cfg in campaign.filters for run in range(campaign.n_mc)]
    if workers == 1:
        records = [_run_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    order = {name: i for i, (name, _) in enumerate(campaign.filters)}
    return sorted(records, key=lambda r: (order[r.filter], r.run))


@dataclass
class StepAggregate:
    step: int
    time: float
    n_runs: int
    rmse: float
    mean_psi: float
    mean_error: np.ndarray
    sigma_eff: np.ndarray
    sigma_est: np.ndarray
    scout_count: int
    gpf_count: int


@dataclass
class FilterSummary:
    filter: str
    config: dict
    n_runs: int
    n_ok: int
    n_failed: int
    n_diverged: int
    failures: dict
    steps: list


def aggregate(records: list[RunRecord], name: str, config: FilterConfig, times,
              n: int) -> FilterSummary:
    """Per-step statistics over the completed runs of one filter.

    ``rmse`` is the root mean squared error norm; ``sigma_eff`` is the per-axis
    root mean squared error and ``sigma_est`` the root of the mean reported
    variance. Runs that failed part-way contribute only to the failure
    counts and the update-selection histogram of the steps they reached.
    """
    mine = [r for r in records if r.filter == name]
    ok = [r for r in mine if r.ok]
    failures: dict = {}
    for r in mine:
        if not r.ok:
            key = r.status.split(":", 1)[0]
            failures[key] = failures.get(key, 0) + 1
    steps = []
    for i in range(len(times)):
        reached = [r.steps[i] for r in mine if len(r.steps) > i]
        scout = sum(s.update_kind == "scout" for s in reached)
        if ok:
            err = np.array([r.steps[i].error for r in ok])
            var = np.array([r.steps[i].cov_diag for r in ok])
            psi = np.array([r.steps[i].psi for r in ok])
            agg = StepAggregate(i + 1, float(times[i]), len(ok),
                                float(np.sqrt(np.mean(np.sum(err ** 2, axis=1)))),
                                float(np.mean(psi)), err.mean(axis=0),
                                np.sqrt(np.mean(err ** 2, axis=0)),
                                np.sqrt(np.mean(np.clip(var, 0.0, None), axis=0)),
                                scout, len(reached) - scout)
        else:
            nan = np.full(n, np.nan)
            agg = StepAggregate(i + 1, float(times[i]), 0, float("nan"), float("nan"),
                                nan, nan, nan, scout, len(reached) - scout)
        steps.append(agg)
    return FilterSummary(name, asdict(config), len(mine), len(ok), len(mine) - len(ok),
                         sum(r.diverged for r in ok), failures, steps)


@dataclass
class CampaignResult:
    campaign: CampaignSpec
    records: list
    summaries: list

    def summary(self, name: str) -> FilterSummary:
        for s in self.summaries:
            if s.filter == name:
                return s
        raise KeyError(name)


def run_campaign(campaign: CampaignSpec, workers: int | None = None) -> CampaignResult:
    records = execute(campaign, workers)
    scenario = _scenario_from_text(dump_scenario(campaign.scenario))
    summaries = [aggregate(records, name, cfg, scenario.times, scenario.n)
                 for name, cfg in campaign.filters]
    return CampaignResult(campaign, records, summaries)
