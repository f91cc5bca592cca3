"""
Command line interface: nly generate | fit | baseline | verify | reproduce.

Data goes to files under --out, summaries to stdout and logs to stderr.
Exit codes: 0 success, 2 configuration error, 3 I/O or format error,
4 numerical failure.
"""

import argparse
from dataclasses import replace
import logging
import os
import sys
import commentjson

from noisy_label_dist.baselines import MtenSolverConfig, buildPairs, mtenFit, regressPredictLabel, ridgeFit
from noisy_label_dist.datagen import GenConfig, SyntheticTruth, generate
from noisy_label_dist.eval import accuracy, crossValidate, CvSpec, ExperimentGrids, compareMethods, verificationSuite
from noisy_label_dist.eval.cv import (
    defaultModelGrid, defaultMtenGrid, defaultRidgeGrid, modelProcedure, modelStrength,
    mtenProcedure, mtenStrength, ridgeProcedure, ridgeStrength
)
from noisy_label_dist.eval.experiment import METHODS
from noisy_label_dist.inference import FitConfig, fit
from noisy_label_dist.inference.updates import EtaInnerConfig, WeightOptimizerConfig
from noisy_label_dist.model import Dataset, Hyperparams
from noisy_label_dist.model.density import S_TERMS
from noisy_label_dist.nlyfile import NlyBuilder
from noisy_label_dist.util import ConfigError, FormatError, NlyError, NumericalError
from noisy_label_dist.util.logsetup import configureLogging

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERICAL = 4

# dests that never come from a config file
RESERVED = {"command", "config", "handler"}

def hyperFromArgs(args) -> Hyperparams:
    return Hyperparams(alphaW=args.alpha_w, alphaS=args.alpha_s, alphaC0=args.alpha_c0, alphaC1=args.alpha_c1)

def fitConfigFromArgs(args) -> FitConfig:
    return FitConfig(
        maxSweeps=args.max_sweeps,
        elboRelTol=args.tol,
        weightOptimizer=WeightOptimizerConfig(steps=args.weight_steps),
        etaInner=EtaInnerConfig(maxIters=args.eta_iters),
        initSeed=args.seed,
        checkGradients=getattr(args, "check_gradients", False),
        sTerm=args.s_term,
        auditSimplex=args.audit,
        auditMonotone=args.audit
    )

def genConfigFromArgs(args) -> GenConfig:
    return GenConfig(
        U=args.u,
        N=args.n,
        groupSize=args.group_size,
        M=args.m,
        D=args.d,
        hyper=hyperFromArgs(args),
        seed=args.seed,
        singletonGroups=args.singleton_groups,
        clampSimplex=args.clamp_simplex
    )

def outPath(args, name: str) -> str:
    return os.path.join(args.out, name)

def prepareOut(args):
    os.makedirs(args.out, exist_ok=True)
    if not os.access(args.out, os.W_OK):
        raise PermissionError(f"output directory {args.out} is not writable")

def requireFile(path: str):
    if not os.path.isfile(path):
        raise FileNotFoundError(f"no such file: {path}")

def emit(args, builder: NlyBuilder, text: str):
    match args.format:
        case "structured":
            sys.stdout.write(builder.toString())
        case _:
            sys.stdout.write(text if text.endswith("\n") else text + "\n")

def cmdGenerate(args) -> int:
    config = genConfigFromArgs(args)
    prepareOut(args)
    dataset, truth = generate(config)
    dataset.toBuilder().write(outPath(args, "dataset.nly"))
    truth.toBuilder().write(outPath(args, "truth.nly"))

    summary = (
        NlyBuilder("summary")
        .scalar("U", dataset.numInstances)
        .scalar("N", dataset.numGroups)
        .scalar("M", dataset.numClasses)
        .scalar("D", dataset.numFeatures)
        .scalar("seed", int(config.seed))
    )
    emit(args, summary, f"generated U={dataset.numInstances} N={dataset.numGroups} M={dataset.numClasses} D={dataset.numFeatures} seed={config.seed} -> {args.out}")
    return EXIT_OK

def loadDataset(args) -> Dataset:
    requireFile(args.dataset)
    return Dataset.from_file(args.dataset)

def scoringLabels(args, dataset: Dataset):
    if getattr(args, "truth", None) is not None:
        requireFile(args.truth)
        return SyntheticTruth.from_file(args.truth).trueLabels
    return dataset.trueLabels

def cmdFit(args) -> int:
    config = fitConfigFromArgs(args)
    hyper = hyperFromArgs(args)
    dataset = loadDataset(args)
    labels = scoringLabels(args, dataset)
    prepareOut(args)
    observed = dataset.withoutLabels()

    if args.cv:
        spec = CvSpec(grid=defaultModelGrid(hyper.alphaS, hyper.alphaC0), folds=args.folds, seed=args.seed, strength=modelStrength)
        hyper = crossValidate(observed, spec, modelProcedure(replace(config, checkGradients=False, auditSimplex=False, auditMonotone=False))).best
        log.info(f"cross-validation selected {hyper.asDict()}")

    def observer(sweep, value, change):
        log.info(f"sweep={sweep} elbo={value!r} change={change:.3e}")

    result = fit(observed, hyper, config, observer=observer)
    result.params.toBuilder(hyper).write(outPath(args, "model.nly"))

    report = (
        NlyBuilder("fit")
        .matrix("zeta", result.varparams.zeta)
        .intmatrix("pairs", result.varparams.pairs.reshape((-1, 2)))
        .matrix("eta", result.varparams.eta.reshape((-1, dataset.numClasses)))
        .vector("elbo_trace", result.elboTrace)
        .intvector("predicted_labels", result.predictedLabels)
        .scalar("converged", result.converged)
        .scalar("sweeps", int(result.sweeps))
        .intvector("flagged_sweeps", result.flaggedSweeps)
    )
    lines = [f"sweeps={result.sweeps} converged={'true' if result.converged else 'false'} elbo={result.elboTrace[-1]!r}"]
    if labels is not None:
        score = accuracy(result.predictedLabels, labels)
        report.scalar("accuracy", score)
        lines.append(f"accuracy={score!r}")
    for k, check in enumerate(result.gradientChecks):
        report.scalar(f"check{k}_name", check.name)
        report.scalar(f"check{k}_passed", check.passed)
        report.scalar(f"check{k}_measured", float(check.maxRelError))
        lines.append(f"{'PASS' if check.passed else 'FAIL'} {check.name}: measured {check.maxRelError:.3e} (tolerance {check.tolerance:.1e})")
    report.write(outPath(args, "fit.nly"))

    emit(args, report, "\n".join(lines))
    return EXIT_OK

def cmdBaseline(args) -> int:
    solver = MtenSolverConfig(maxIters=args.mten_iters, tol=args.mten_tol)
    dataset = loadDataset(args)
    labels = scoringLabels(args, dataset)
    prepareOut(args)
    observed = dataset.withoutLabels()

    match args.method:
        case "ridge":
            point = args.ridge_lambda
            if args.cv:
                point = crossValidate(observed, CvSpec(grid=defaultRidgeGrid(), folds=args.folds, seed=args.seed, strength=ridgeStrength), ridgeProcedure()).best
            model = ridgeFit(buildPairs(observed), point)
            selected = f"lambda={point:g}"
        case "mten":
            point = (args.mten_alpha, args.l1_ratio)
            if args.cv:
                point = crossValidate(observed, CvSpec(grid=defaultMtenGrid(), folds=args.folds, seed=args.seed, strength=mtenStrength), mtenProcedure(solver)).best
            model = mtenFit(buildPairs(observed), point[0], point[1], solver)
            selected = f"alpha={point[0]:g},l1_ratio={point[1]:g}"
        case _:
            raise ConfigError(f"unknown baseline method: {args.method}")

    predicted = regressPredictLabel(model, observed.features)
    builder = model.toBuilder(args.method).scalar("selected", selected).intvector("predicted_labels", predicted)
    text = f"method={args.method} {selected} converged={'true' if model.converged else 'false'}"
    if labels is not None:
        score = accuracy(predicted, labels)
        builder.scalar("accuracy", score)
        text += f" accuracy={score!r}"
    builder.write(outPath(args, "baseline.nly"))

    emit(args, builder, text)
    return EXIT_OK

def cmdVerify(args) -> int:
    prepareOut(args)
    report = verificationSuite(seed=args.seed)
    builder = report.toBuilder()
    builder.write(outPath(args, "verification.nly"))
    emit(args, builder, report.toText())
    if not report.passed:
        log.error("verification failed")
        return EXIT_NUMERICAL
    return EXIT_OK

def parseSeeds(raw: str) -> tuple[int, ...]:
    try:
        seeds = tuple(int(part) for part in str(raw).split(",") if part.strip())
    except ValueError:
        raise ConfigError(f"seeds must be a comma separated list of integers, got {raw!r}")
    if not seeds:
        raise ConfigError("need at least one seed")
    return seeds

def cmdReproduce(args) -> int:
    seeds = parseSeeds(args.seeds)
    methods = tuple(m.strip() for m in str(args.methods).split(",") if m.strip())
    for method in methods:
        if method not in METHODS:
            raise ConfigError(f"unknown method {method!r}, expected a subset of {','.join(METHODS)}")
    gen = genConfigFromArgs(args)
    fitConfig = fitConfigFromArgs(args)
    grids = ExperimentGrids(
        model=defaultModelGrid(gen.hyper.alphaS, gen.hyper.alphaC0),
        folds=args.folds,
        useCv=not args.no_cv
    )
    if args.no_cv:
        grids = replace(grids, model=[gen.hyper], ridge=[args.ridge_lambda], mten=[(args.mten_alpha, args.l1_ratio)])
    prepareOut(args)

    report = compareMethods(
        seeds=seeds,
        gen=gen,
        grids=grids,
        methods=methods,
        fitConfig=fitConfig,
        mtenSolver=MtenSolverConfig(maxIters=args.mten_iters, tol=args.mten_tol),
        inductiveCount=args.inductive_count,
        workers=args.workers
    )
    builder = report.toBuilder()
    builder.write(outPath(args, "report.nly"))
    text = report.toText()
    with open(outPath(args, "report.txt"), "w", newline="\n") as f:
        f.write(text)

    emit(args, builder, text)
    return EXIT_OK

def addShared(parser, seed: int):
    parser.add_argument("--seed", type=int, default=seed)
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--config", default=None, help="JSON file (comments allowed) of flag defaults")
    parser.add_argument("--format", choices=["text", "structured"], default="text", help="stdout summary format")
    parser.add_argument("--verbose", action="store_true")

def addHyper(parser):
    defaults = Hyperparams()
    parser.add_argument("--alpha-w", type=float, default=defaults.alphaW)
    parser.add_argument("--alpha-s", type=float, default=defaults.alphaS)
    parser.add_argument("--alpha-c0", type=float, default=defaults.alphaC0)
    parser.add_argument("--alpha-c1", type=float, default=defaults.alphaC1)

def addGen(parser):
    defaults = GenConfig()
    parser.add_argument("--u", type=int, default=defaults.U, help="number of instances")
    parser.add_argument("--n", type=int, default=defaults.N, help="number of groups")
    parser.add_argument("--group-size", type=int, default=defaults.groupSize)
    parser.add_argument("--m", type=int, default=defaults.M, help="number of classes")
    parser.add_argument("--d", type=int, default=defaults.D, help="feature dimension")
    parser.add_argument("--singleton-groups", action="store_true")
    parser.add_argument("--clamp-simplex", action="store_true")

def addFit(parser):
    defaults = FitConfig()
    parser.add_argument("--max-sweeps", type=int, default=defaults.maxSweeps)
    parser.add_argument("--tol", type=float, default=defaults.elboRelTol, help="relative ELBO change that ends the fit")
    parser.add_argument("--weight-steps", type=int, default=defaults.weightOptimizer.steps)
    parser.add_argument("--eta-iters", type=int, default=defaults.etaInner.maxIters)
    parser.add_argument("--s-term", choices=S_TERMS, default=defaults.sTerm)
    parser.add_argument("--audit", action="store_true", help="check simplex and monotonicity after every update")

def addBaseline(parser):
    defaults = MtenSolverConfig()
    parser.add_argument("--ridge-lambda", type=float, default=1.0)
    parser.add_argument("--mten-alpha", type=float, default=0.01)
    parser.add_argument("--l1-ratio", type=float, default=0.5)
    parser.add_argument("--mten-iters", type=int, default=defaults.maxIters)
    parser.add_argument("--mten-tol", type=float, default=defaults.tol)

def buildParser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser("nly", description="Learn a classifier from noisy group label distributions.")
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {}

    p = sub.add_parser("generate", help="generate a synthetic dataset")
    addShared(p, seed=1)
    addHyper(p)
    addGen(p)
    p.set_defaults(handler=cmdGenerate)
    commands["generate"] = p

    p = sub.add_parser("fit", help="fit the model to a dataset")
    p.add_argument("dataset")
    addShared(p, seed=0)
    addHyper(p)
    addFit(p)
    p.add_argument("--check-gradients", action="store_true")
    p.add_argument("--cv", action="store_true", help="select alpha_w and alpha_c1 by cross-validation")
    p.add_argument("--folds", type=int, default=3)
    p.add_argument("--truth", default=None, help="truth file used to score the predicted labels")
    p.set_defaults(handler=cmdFit)
    commands["fit"] = p

    p = sub.add_parser("baseline", help="fit a regression baseline to a dataset")
    p.add_argument("dataset")
    addShared(p, seed=0)
    p.add_argument("--method", choices=["ridge", "mten"], default="ridge")
    addBaseline(p)
    p.add_argument("--cv", action="store_true")
    p.add_argument("--folds", type=int, default=3)
    p.add_argument("--truth", default=None)
    p.set_defaults(handler=cmdBaseline)
    commands["baseline"] = p

    p = sub.add_parser("verify", help="run the numerical self-checks")
    addShared(p, seed=0)
    p.set_defaults(handler=cmdVerify)
    commands["verify"] = p

    p = sub.add_parser("reproduce", help="compare all methods over seeds and alpha_c1 settings")
    addShared(p, seed=1)
    addHyper(p)
    addGen(p)
    addFit(p)
    addBaseline(p)
    p.add_argument("--seeds", default="1,2,3,4,5", help="comma separated seeds")
    p.add_argument("--methods", default=",".join(METHODS), help="comma separated subset of " + ",".join(METHODS))
    p.add_argument("--folds", type=int, default=3)
    p.add_argument("--no-cv", action="store_true", help="use the given hyperparameters instead of cross-validation")
    p.add_argument("--inductive-count", type=int, default=1000)
    p.add_argument("--workers", type=int, default=None, help="worker processes, defaults to NLY_THREADS or the core count")
    p.set_defaults(handler=cmdReproduce)
    commands["reproduce"] = p

    return parser, commands

def loadConfig(path: str) -> dict:
    requireFile(path)
    with open(path, "r") as f:
        try:
            cfg = commentjson.load(f)
        except ValueError as e:
            raise ConfigError(f"cannot parse config file {path}: {e}") from e
    if not isinstance(cfg, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return cfg

def parseArgs(argv):
    parser, commands = buildParser()
    args = parser.parse_args(argv)
    if args.config is None:
        return args

    cfg = loadConfig(args.config)
    known = set(vars(args)) - RESERVED
    unknown = sorted(key for key in cfg if key not in known)
    if unknown:
        raise ConfigError(f"unknown config keys for {args.command}: {', '.join(unknown)}")

    # config values become defaults, so explicit flags still win
    commands[args.command].set_defaults(**cfg)
    return parser.parse_args(argv)

def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    configureLogging()
    try:
        args = parseArgs(argv)
        configureLogging(args.verbose)
        return args.handler(args)
    except ConfigError as e:
        log.error(f"configuration error: {e}")
        return EXIT_CONFIG
    except (FormatError, OSError) as e:
        log.error(f"i/o error: {e}")
        return EXIT_IO
    except NumericalError as e:
        log.error(f"numerical failure: {e}")
        return EXIT_NUMERICAL
    except NlyError as e:
        log.error(str(e))
        return EXIT_NUMERICAL
