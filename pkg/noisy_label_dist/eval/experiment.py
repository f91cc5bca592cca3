"""
Multi-seed comparison of the proposed model against the regression baselines
on synthetic data, one run per (alpha_c1, seed) pair.
"""

from dataclasses import dataclass, field, replace
import logging
import os
import time
import numpy as np
from tqdm import tqdm
from tqdm.contrib.concurrent import process_map

from noisy_label_dist.baselines import MtenSolverConfig, buildPairs, mtenFit, regressPredictLabel, ridgeFit
from noisy_label_dist.datagen import GenConfig, generate, makeRng, sampleInstances
from noisy_label_dist.eval.cv import (
    CvSpec, crossValidate, defaultModelGrid, defaultMtenGrid, defaultRidgeGrid, modelProcedure,
    modelStrength, mtenProcedure, mtenStrength, ridgeProcedure, ridgeStrength
)
from noisy_label_dist.eval.metrics import accuracy
from noisy_label_dist.inference import FitConfig, fit, predict
from noisy_label_dist.model import Hyperparams
from noisy_label_dist.nlyfile import NlyBuilder
from noisy_label_dist.util import ConfigError, NlyError, NumericalError

log = logging.getLogger(__name__)

METHODS = ("proposed", "mten", "ridge")
SETTINGS = (1.0, 10.0, 100.0)
INDUCTIVE_STREAM = 1

@dataclass(frozen=True, kw_only=True)
class ExperimentGrids:
    model: list[Hyperparams] = field(default_factory=defaultModelGrid)
    ridge: list[float] = field(default_factory=defaultRidgeGrid)
    mten: list[tuple[float, float]] = field(default_factory=defaultMtenGrid)
    folds: int = 3

    useCv: bool = True
    """
    When False the first grid point of each method is used directly.
    """

@dataclass(frozen=True)
class RunJob:
    alphaC1: float
    seed: int
    methods: tuple[str, ...]
    gen: GenConfig
    grids: ExperimentGrids
    fitConfig: FitConfig
    mtenSolver: MtenSolverConfig
    inductiveCount: int

@dataclass
class RunRecord:
    method: str
    alphaC1: float
    seed: int
    accuracy: float
    inductiveAccuracy: float
    selected: str
    seconds: float
    elboTrace: list[float] = field(default_factory=list)

@dataclass
class ExperimentReport:
    methods: tuple[str, ...]
    settings: tuple[float, ...]
    seeds: tuple[int, ...]
    runs: list[RunRecord]

    def cell(self, method: str, alphaC1: float, inductive=False) -> tuple[float, float]:
        values = [r.inductiveAccuracy if inductive else r.accuracy for r in self.runs if r.method == method and r.alphaC1 == alphaC1]
        return float(np.mean(values)), float(np.std(values))

    def toBuilder(self) -> NlyBuilder:
        builder = NlyBuilder("report")
        builder.scalar("methods", ",".join(self.methods))
        builder.vector("settings", self.settings)
        builder.intvector("seeds", self.seeds)
        for kind, inductive in (("transductive", False), ("inductive", True)):
            means = np.array([[self.cell(m, a, inductive)[0] for a in self.settings] for m in self.methods])
            stds = np.array([[self.cell(m, a, inductive)[1] for a in self.settings] for m in self.methods])
            builder.matrix(f"{kind}_mean", means)
            builder.matrix(f"{kind}_std", stds)
        for k, run in enumerate(self.runs):
            builder.scalar(f"run{k}_method", run.method)
            builder.scalar(f"run{k}_alpha_c1", float(run.alphaC1))
            builder.scalar(f"run{k}_seed", int(run.seed))
            builder.scalar(f"run{k}_accuracy", float(run.accuracy))
            builder.scalar(f"run{k}_inductive_accuracy", float(run.inductiveAccuracy))
            builder.scalar(f"run{k}_selected", run.selected)
            builder.scalar(f"run{k}_seconds", float(run.seconds))
            if run.elboTrace:
                builder.vector(f"run{k}_elbo_trace", run.elboTrace)
        return builder

    def toText(self) -> str:
        lines = []
        for title, inductive in (("transductive accuracy", False), ("inductive accuracy", True)):
            header = ["method"] + [f"alpha_c1={a:g}" for a in self.settings]
            rows = [header]
            for method in self.methods:
                cells = [f"{mean:.3f} ± {std:.3f}" for mean, std in (self.cell(method, a, inductive) for a in self.settings)]
                rows.append([method] + cells)
            widths = [max(len(row[c]) for row in rows) for c in range(len(header))]
            lines.append(f"{title} over seeds {', '.join(map(str, self.seeds))}")
            for row in rows:
                lines.append("  ".join(cell.ljust(width) for cell, width in zip(row, widths)).rstrip())
            lines.append("")
        return "\n".join(lines)

def describe(point) -> str:
    if isinstance(point, Hyperparams):
        return ",".join(f"{k}={v:g}" for k, v in point.asDict().items())
    if isinstance(point, tuple):
        return f"alpha={point[0]:g},l1_ratio={point[1]:g}"
    return f"lambda={point:g}"

def runJob(job: RunJob) -> list[RunRecord]:
    gen = replace(job.gen, hyper=replace(job.gen.hyper, alphaC1=job.alphaC1), seed=job.seed)
    dataset, truth = generate(gen)
    observed = dataset.withoutLabels()
    heldX, heldY = sampleInstances(truth, job.inductiveCount, makeRng(job.seed, INDUCTIVE_STREAM))
    grids = job.grids

    def select(grid, procedure, strength):
        if not grids.useCv or len(grid) == 1:
            return grid[0]
        spec = CvSpec(grid=grid, folds=grids.folds, seed=job.seed, strength=strength)
        return crossValidate(observed, spec, procedure).best

    records = []
    for method in job.methods:
        start = time.perf_counter()
        trace = []
        try:
            match method:
                case "proposed":
                    point = select(grids.model, modelProcedure(job.fitConfig), modelStrength)
                    result = fit(observed, point, job.fitConfig)
                    transductive = result.predictedLabels
                    inductive = predict(result.params, heldX)
                    trace = list(result.elboTrace)
                case "ridge":
                    point = select(grids.ridge, ridgeProcedure(), ridgeStrength)
                    model = ridgeFit(buildPairs(observed), point)
                    transductive = regressPredictLabel(model, observed.features)
                    inductive = regressPredictLabel(model, heldX)
                case "mten":
                    point = select(grids.mten, mtenProcedure(job.mtenSolver), mtenStrength)
                    model = mtenFit(buildPairs(observed), point[0], point[1], job.mtenSolver)
                    transductive = regressPredictLabel(model, observed.features)
                    inductive = regressPredictLabel(model, heldX)
                case _:
                    raise ConfigError(f"unknown method: {method}")
        except NlyError as e:
            raise NumericalError(f"run method={method} alpha_c1={job.alphaC1:g} seed={job.seed} failed: {e}") from e

        records.append(RunRecord(
            method=method,
            alphaC1=job.alphaC1,
            seed=job.seed,
            accuracy=accuracy(transductive, truth.trueLabels),
            inductiveAccuracy=accuracy(inductive, heldY),
            selected=describe(point),
            seconds=time.perf_counter() - start,
            elboTrace=trace
        ))
    return records

def workerCount() -> int:
    raw = os.getenv("NLY_THREADS")
    if raw is None:
        return os.cpu_count() or 1
    try:
        count = int(raw)
    except ValueError:
        raise ConfigError(f"NLY_THREADS must be an integer, got {raw!r}")
    if count < 1:
        raise ConfigError("NLY_THREADS must be at least 1")
    return count

def compareMethods(
    seeds=(1, 2, 3, 4, 5),
    gen: GenConfig = GenConfig(),
    grids: ExperimentGrids = ExperimentGrids(),
    methods=METHODS,
    settings=SETTINGS,
    fitConfig: FitConfig = FitConfig(),
    mtenSolver: MtenSolverConfig = MtenSolverConfig(),
    inductiveCount: int = 1000,
    workers: int | None = None,
) -> ExperimentReport:
    seeds = tuple(int(s) for s in seeds)
    if len(seeds) == 0:
        raise ConfigError("need at least one seed")
    for method in methods:
        if method not in METHODS:
            raise ConfigError(f"unknown method: {method}")

    jobs = [
        RunJob(alphaC1=float(a), seed=s, methods=tuple(methods), gen=gen, grids=grids, fitConfig=fitConfig, mtenSolver=mtenSolver, inductiveCount=inductiveCount)
        for a in settings for s in seeds
    ]
    workers = workerCount() if workers is None else workers
    log.info(f"running {len(jobs)} experiment runs on {min(workers, len(jobs))} workers")

    if workers > 1 and len(jobs) > 1:
        results = process_map(runJob, jobs, max_workers=min(workers, len(jobs)), chunksize=1, desc="experiment runs")
    else:
        results = [runJob(job) for job in tqdm(jobs, "experiment runs")]

    runs = [record for records in results for record in records]
    runs.sort(key=lambda r: (methods.index(r.method), r.alphaC1, r.seed))
    return ExperimentReport(methods=tuple(methods), settings=tuple(float(a) for a in settings), seeds=seeds, runs=runs)
