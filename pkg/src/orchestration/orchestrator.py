"""
Orchestration Logic
Runs the planned sweep tasks on a worker pool, aggregates per-trial values by
trial index and reports each sweep point to the experiment telemetry.
"""

import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Dict, Any, List, Optional, Tuple

from src.beamforming.optimizer import RefinementOptions, WbfOptions
from src.beamforming.schemes import RankDeficientChannelError, SchemeSettings, TrialContext, build_scheme
from src.doa.classifier import build_doa_model, save_phases
from src.doa.dataset import generate_samples
from src.doa.trainer import TrainOptions, train
from src.orchestration.execution_graph import ExecutionGraph, ExecutionState, SweepTask
from src.physics.channel import spatial_correlation, sim_user_channel
from src.physics.geometry import SimConfig, build_scenario, build_sim_geometry
from src.physics.propagation import build_transfer_stack
from src.physics.units import dbm_to_mw
from src.utils.config_manager import ExperimentSpec
from src.utils.logger import ActionType, log_experiment
from src.utils.metrics import MetricsCalculator
from src.utils.result_aggregator import ResultAggregator, ResultRow
from src.utils.rng import StreamTag, stream


logger = logging.getLogger(__name__)

SUM_RATE = "sum_rate"
TRAIN_ACCURACY = "train_accuracy"
TEST_ACCURACY = "test_accuracy"


@dataclass
class TaskOutcome:
    """Values produced by one SweepTask, keyed by row scheme and metric."""
    task: SweepTask
    values: Dict[Tuple[str, str], float] = field(default_factory=dict)
    seconds: Dict[Tuple[str, str], float] = field(default_factory=dict)
    skipped: List[str] = field(default_factory=list)
    details: Dict[str, Any] = field(default_factory=dict)


def scheme_settings(spec: ExperimentSpec) -> SchemeSettings:
    return SchemeSettings(
        wbf=WbfOptions(
            max_iters=spec.wbf["max_iters"],
            restarts=spec.wbf["restarts"],
            tolerance=spec.wbf["tolerance"],
        ),
        refinement=RefinementOptions(levels=spec.refinement["levels"], sweeps=spec.refinement["sweeps"]),
        codebook_size=spec.codebook_size,
    )


def train_options(spec: ExperimentSpec) -> TrainOptions:
    training = spec.training
    return TrainOptions(
        batch_size=training["batch_size"],
        max_epochs=training["max_epochs"],
        tolerance=training["tolerance"],
        patience=training["patience"],
        optimizer=training["optimizer"],
        spsa_perturbation=training["spsa_perturbation"],
        tx_power_dbm=spec.scenario["tx_power_dbm"],
        noise_power_dbm=spec.scenario["noise_power_dbm"],
    )


@lru_cache(maxsize=32)
def _sumrate_setup(sim_json: str, scenario_json: str, num_layers: int):
    config = SimConfig(num_layers=num_layers, **json.loads(sim_json))
    scenario = build_scenario("multiuser", config, json.loads(scenario_json))
    geometry = build_sim_geometry(config)
    stack = build_transfer_stack(geometry, config)
    corr = spatial_correlation(geometry.outer_layer, scenario.wavelength)
    return config, scenario, geometry, stack, corr


def _setup_for(spec: ExperimentSpec, num_layers: int):
    return _sumrate_setup(json.dumps(spec.sim, sort_keys=True), json.dumps(spec.scenario, sort_keys=True), num_layers)


def run_sumrate_task(spec: ExperimentSpec, task: SweepTask) -> TaskOutcome:
    """
    One Monte-Carlo trial: every SIM scheme of the task on one (L, trial) channel,
    or every baseline of a layer-independent task.
    """
    outcome = TaskOutcome(task=task)
    settings = scheme_settings(spec)
    num_layers = task.layers if task.layers is not None else spec.layers[0]
    config, scenario, geometry, stack, corr = _setup_for(spec, num_layers)
    channel = None
    if task.layers is not None:
        channel = sim_user_channel(stream(spec.master_seed, StreamTag.CHANNEL, task.trial), geometry, scenario, corr)
    context = TrialContext(
        config=config,
        scenario=scenario,
        stack=stack if task.layers is not None else None,
        channel=channel,
        master_seed=spec.master_seed,
        trial=task.trial,
        total_power=dbm_to_mw(scenario.tx_power_dbm),
    )

    for name in task.schemes:
        scheme = build_scheme(name, settings)
        started = time.perf_counter()
        try:
            reports = scheme.run(context)
        except RankDeficientChannelError as e:
            logger.warning("%s trial %d skipped: %s", name, task.trial, e)
            outcome.skipped.append(name)
            continue
        elapsed = time.perf_counter() - started
        for report in reports:
            key = (report.scheme, SUM_RATE)
            outcome.values[key] = report.sum_rate
            outcome.seconds[key] = elapsed
    return outcome


def run_doa_task(spec: ExperimentSpec, task: SweepTask) -> TaskOutcome:
    """Generate data, train and evaluate the receive-side SIM for one (L, trial)."""
    seed, layers, trial = spec.master_seed, task.layers, task.trial
    config = spec.sim_config(layers)
    scenario = build_scenario("doa", config, spec.scenario)
    model, geometry = build_doa_model(config, rng=stream(seed, StreamTag.DOA_INIT, layers, trial))
    train_samples = generate_samples(stream(seed, StreamTag.DOA_TRAIN, trial), scenario,
                                     spec.training["train_samples"], geometry)
    test_samples = generate_samples(stream(seed, StreamTag.DOA_TEST, trial), scenario,
                                    spec.training["test_samples"], geometry)

    options = train_options(spec)
    started = time.perf_counter()
    report = train(model, train_samples, options,
                   rng=stream(seed, StreamTag.DOA_BATCH, layers, trial),
                   test_samples=test_samples,
                   noise_rng=stream(seed, StreamTag.DOA_NOISE, layers, trial),
                   seed=seed)
    elapsed = time.perf_counter() - started

    outcome = TaskOutcome(task=task)
    for metric, value in ((TRAIN_ACCURACY, report.train_accuracy), (TEST_ACCURACY, report.test_accuracy)):
        outcome.values[(options.optimizer, metric)] = value
        outcome.seconds[(options.optimizer, metric)] = elapsed
    outcome.details = {
        "epochs": report.epochs,
        "final_loss": report.loss_trace[-1],
        "converged": report.converged,
        "phases": report.model.phases,
    }
    return outcome


_TASK_RUNNERS = {
    "sumrate": run_sumrate_task,
    "doa": run_doa_task,
}


class Orchestrator:
    """
    Executes a sweep:
    PLAN tasks -> RUN them on the pool -> AGGREGATE rows

    Responsibilities:
    - Dispatch tasks to a thread or process pool
    - Replicate layer-independent baselines across L
    - Reduce per-trial values in trial-index order
    - Report every sweep point to the telemetry log
    """

    def __init__(self, spec: ExperimentSpec):
        self.spec = spec
        self.graph = ExecutionGraph(spec)
        self.aggregator = ResultAggregator()

    def run(self) -> List[ResultRow]:
        """
        Execute the complete sweep.

        Returns:
            ResultRows in (L, scheme, metric) declaration order
        """
        spec = self.spec
        try:
            self.graph.advance()
            tasks = self.graph.plan()
            self._declare_points()
            self.graph.record_step(ExecutionState.PLAN, {"tasks": len(tasks)})

            self.graph.advance()
            outcomes = self._execute(tasks)
            self.graph.record_step(ExecutionState.RUN, {"completed": len(outcomes)})

            self.graph.advance()
            for outcome in sorted(outcomes, key=lambda o: (o.task.layers or 0, o.task.trial)):
                self._collect(outcome)
            rows = self.aggregator.get_rows(record_timing=spec.record_timing)
            if spec.experiment == "doa":
                rows = self._with_binomial_stderr(rows)
            self._report(rows, outcomes)
            self.graph.record_step(ExecutionState.AGGREGATE, {"rows": len(rows)})
            self.graph.advance()
            logger.info("sweep finished: %s", self.graph.get_execution_summary())
            return rows
        except Exception as e:
            self.graph.advance(succeeded=False)
            self.graph.record_step(ExecutionState.ERROR, {"message": str(e)})
            raise

    def _declare_points(self) -> None:
        spec = self.spec
        if spec.experiment == "doa":
            optimizer = spec.training["optimizer"]
            for layers in spec.layers:
                self.aggregator.declare(layers, optimizer, TRAIN_ACCURACY)
                self.aggregator.declare(layers, optimizer, TEST_ACCURACY)
            return
        levels = spec.sim.get("phase_levels")
        for layers in spec.layers:
            for name in spec.schemes:
                self.aggregator.declare(layers, name, SUM_RATE)
                if levels is not None and not name.startswith("zf-"):
                    self.aggregator.declare(layers, f"{name}-q{levels}", SUM_RATE)

    def _with_binomial_stderr(self, rows: List[ResultRow]) -> List[ResultRow]:
        """Single-trial accuracies carry the binomial spread of their sample count."""
        counts = {TRAIN_ACCURACY: self.spec.training["train_samples"],
                  TEST_ACCURACY: self.spec.training["test_samples"]}
        return [
            replace(row, stderr=MetricsCalculator.binomial_stderr(row.mean, counts[row.metric]))
            if row.trials == 1 else row
            for row in rows
        ]

    def _execute(self, tasks: List[SweepTask]) -> List[TaskOutcome]:
        runner = _TASK_RUNNERS[self.spec.experiment]
        workers = self.spec.max_workers
        if workers <= 1:
            return [runner(self.spec, task) for task in tasks]

        pool_class = ProcessPoolExecutor if self.spec.executor == "process" else ThreadPoolExecutor
        outcomes = []
        with pool_class(max_workers=workers) as executor:
            futures = [executor.submit(runner, self.spec, task) for task in tasks]
            for future in as_completed(futures):
                outcomes.append(future.result())
        return outcomes

    def _collect(self, outcome: TaskOutcome) -> None:
        task = outcome.task
        targets = self.spec.layers if task.layers is None else (task.layers,)
        for (scheme, metric), value in outcome.values.items():
            for layers in targets:
                self.aggregator.add(layers, scheme, metric, task.trial, value,
                                    outcome.seconds.get((scheme, metric), 0.0))
        if self.spec.experiment == "doa" and self.spec.model_out and task.trial == 0:
            path = save_phases(f"{self.spec.model_out}.L{task.layers}.txt", outcome.details["phases"])
            logger.info("saved trained phases for L=%d to %s", task.layers, path)

    def _report(self, rows: List[ResultRow], outcomes: List[TaskOutcome]) -> None:
        spec = self.spec
        skipped: Dict[str, int] = {}
        for outcome in outcomes:
            for name in outcome.skipped:
                skipped[name] = skipped.get(name, 0) + 1

        for row in rows:
            seconds = self.aggregator.seconds(row.L, row.scheme, row.metric)
            if spec.experiment == "doa":
                action = ActionType.TRAINING
            elif row.scheme.startswith("zf-"):
                action = ActionType.BASELINE
            else:
                action = ActionType.SWEEP_POINT
            details = {
                "experiment": spec.experiment,
                "layers": row.L,
                "scheme": row.scheme,
                "metric": row.metric,
                "mean": row.mean,
                "stderr": row.stderr,
                "trials": row.trials,
                "seconds": round(seconds, 6),
                "master_seed": spec.master_seed,
            }
            if row.scheme in skipped:
                details["skipped_trials"] = skipped[row.scheme]
            log_experiment(
                component="SumrateSweep" if spec.experiment == "sumrate" else "DoaSweep",
                action=action,
                details=details,
                status="SUCCESS" if row.trials > 0 else "FAILURE",
            )


def run_sumrate_sweep(spec: ExperimentSpec) -> List[ResultRow]:
    """Average sum-rate per (L, scheme) over spec.trials channel realizations."""
    if spec.experiment != "sumrate":
        raise ValueError(f"run_sumrate_sweep needs a sumrate spec, got '{spec.experiment}'")
    return Orchestrator(spec).run()


def run_doa_sweep(spec: ExperimentSpec) -> List[ResultRow]:
    """Train and test accuracy per L."""
    if spec.experiment != "doa":
        raise ValueError(f"run_doa_sweep needs a doa spec, got '{spec.experiment}'")
    return Orchestrator(spec).run()
