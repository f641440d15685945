"""Batch front end: analyze, simulate and verify switching heat-equation models.

    hybridheat analyze --preset example-3.5
    hybridheat simulate --preset eq-16 --paths 200 --horizon 200
    hybridheat verify --random-trials 200 --seed 7

Exit codes: 0 success, 1 validation error, 2 numerical-agreement failure,
3 estimator warning under --strict.
"""

import argparse
import logging
import math
import os
import sys
import tomllib
from datetime import datetime
from importlib import resources
from pathlib import Path
from typing import Literal

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .plugins.lyapunov_plugin import LyapunovPlugin
from .tools import ctmc
from .tools.errors import AgreementFailure, ConfigError, HybridHeatError
from .tools.hybrid_solution import HybridHeatModel, norm_series
from .tools.montecarlo import EstimatorConfig
from .tools.spectral_basis import interval_basis, load_eigenpairs_csv, named_initial
from .tools.utils.export import write_csv, write_json

load_dotenv()

# Configure module-level logger
logger = logging.getLogger("cli.py")
logger.setLevel(logging.INFO)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_AGREEMENT = 2
EXIT_STRICT_WARNING = 3


class GeneratorSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    rates: list[list[float]]
    start_state: int | Literal["stationary"] = 0


class DynamicsSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    alpha: list[float]
    beta: list[list[float]] | list[float] = Field(default_factory=list)


class SpectralSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    length: float = Field(math.pi, gt=0)
    eigenpairs_csv: str | None = None
    n_modes: int = Field(64, ge=1)
    initial: str | list[float] = "sin1"
    quad_nodes: int | None = Field(None, ge=1)


class EstimatorSection(EstimatorConfig):
    p: list[float] = Field(default_factory=lambda: [2.0])

    @field_validator("p")
    @classmethod
    def _positive_orders(cls, values):
        if not values or any(not v > 0 for v in values):
            raise ValueError("every moment order p must be positive")
        return values


class MetaSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str = "custom"
    notes: list[str] = Field(default_factory=list)


class ModelConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    generator: GeneratorSection
    dynamics: DynamicsSection
    spectral: SpectralSection = Field(default_factory=SpectralSection)
    estimator: EstimatorSection = Field(default_factory=EstimatorSection)
    seed: int = 0
    meta: MetaSection = Field(default_factory=MetaSection)

    @model_validator(mode="after")
    def _consistent_dimensions(self):
        n = len(self.generator.rates)
        if any(len(row) != n for row in self.generator.rates):
            raise ValueError(f"generator.rates must be a square {n} x {n} matrix")
        if len(self.dynamics.alpha) != n:
            raise ValueError(f"dynamics.alpha has {len(self.dynamics.alpha)} entries for {n} states")
        beta = self.dynamics.beta
        if beta and len(beta) != n:
            raise ValueError(f"dynamics.beta has {len(beta)} rows for {n} states")
        if beta and isinstance(beta[0], list) and len({len(row) for row in beta}) != 1:
            raise ValueError("dynamics.beta rows must all have the same number of channels")
        start = self.generator.start_state
        if isinstance(start, int) and not 0 <= start < n:
            raise ValueError(f"generator.start_state {start} is outside 0..{n - 1}")
        return self

    def estimator_config(self) -> EstimatorConfig:
        data = self.estimator.model_dump(exclude={"p", "seed", "start_state"})
        start = self.generator.start_state
        return EstimatorConfig(
            **data,
            p=self.estimator.p[0],
            seed=self.seed,
            start_state=None if start == "stationary" else start,
        )

    def build_model(self) -> HybridHeatModel:
        spectral = self.spectral
        if spectral.eigenpairs_csv is not None:
            basis, initial = load_eigenpairs_csv(spectral.eigenpairs_csv)
        else:
            basis = interval_basis(spectral.length, spectral.n_modes)
            initial = None if spectral.initial == "none" else named_initial(spectral.initial, basis, spectral.quad_nodes)
        return HybridHeatModel(
            generator=ctmc.validate_generator(self.generator.rates),
            basis=basis,
            initial=initial,
            alpha=self.dynamics.alpha,
            beta=self.dynamics.beta,
        )


def list_presets() -> list[str]:
    folder = resources.files("hybridheat").joinpath("presets")
    return sorted(entry.name.removesuffix(".toml") for entry in folder.iterdir() if entry.name.endswith(".toml"))


def _read_toml(text: str, origin: str) -> dict:
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"Error loading config {origin}: {e}") from e


def load_raw_config(preset: str | None = None, path: str | None = None) -> dict:
    """TOML contents of a shipped preset or of a file, with relative CSV paths resolved."""
    if preset is not None:
        entry = resources.files("hybridheat").joinpath("presets", f"{preset}.toml")
        if not entry.is_file():
            raise ConfigError(f"Unknown preset {preset!r}; available: {', '.join(list_presets())}")
        return _read_toml(entry.read_text(encoding="utf-8"), preset)
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"Error loading config {path}: {e}") from e
    raw = _read_toml(text, path)
    csv_path = raw.get("spectral", {}).get("eigenpairs_csv")
    if csv_path and not Path(csv_path).is_absolute():
        raw["spectral"]["eigenpairs_csv"] = str(Path(path).parent / csv_path)
    return raw


def apply_overrides(raw: dict, args: argparse.Namespace) -> dict:
    """Command-line flags win over file values."""
    estimator = raw.setdefault("estimator", {})
    if getattr(args, "seed", None) is not None:
        raw["seed"] = args.seed
    if getattr(args, "paths", None) is not None:
        estimator["n_paths"] = args.paths
    if getattr(args, "horizon", None) is not None:
        estimator["horizon"] = args.horizon
    if getattr(args, "p", None) is not None:
        estimator["p"] = args.p
    return raw


def format_validation_error(error: ValidationError) -> str:
    lines = []
    for item in error.errors():
        where = ".".join(str(part) for part in item["loc"]) or "config"
        lines.append(f"{where}: {item['msg']}")
    return "\n".join(lines)


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of numbers, got {text!r}") from e


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hybridheat", description="Lyapunov exponents of switching stochastic heat equations.")
    parser.add_argument("--list-presets", action="store_true", help="print the shipped presets and exit")
    commands = parser.add_subparsers(dest="command", parser_class=_Parser)

    def common(sub):
        source = sub.add_mutually_exclusive_group()
        source.add_argument("--preset", help="shipped model configuration")
        source.add_argument("--config", help="TOML model configuration file")
        sub.add_argument("--seed", type=int)
        sub.add_argument("--p", type=_float_list, help="moment orders, e.g. 1,2")
        sub.add_argument("--out", help="run directory (default: timestamped under HYBRIDHEAT_OUTPUT_DIR)")
        sub.add_argument("--strict", action="store_true", help="turn estimator warnings into exit code 3")

    common(commands.add_parser("analyze", help="closed-form exponents and verdicts"))
    simulate = commands.add_parser("simulate", help="Monte Carlo estimates")
    common(simulate)
    simulate.add_argument("--paths", type=int)
    simulate.add_argument("--horizon", type=float)
    simulate.add_argument("--horizons", type=_float_list, help="convergence table horizons")
    verify = commands.add_parser("verify", help="variational supremum vs tilted eigenvalue")
    common(verify)
    verify.add_argument("--random-trials", type=int, dest="random_trials")
    return parser


def run_directory(command: str, name: str, out: str | None) -> Path:
    if out is not None:
        folder = Path(out)
    else:
        stamp = datetime.now().strftime("%Y%m%d-%H%M%S")
        folder = Path(os.environ.get("HYBRIDHEAT_OUTPUT_DIR", "runs")) / f"{stamp}-{command}-{name}"
    folder.mkdir(parents=True, exist_ok=True)
    return folder


def cmd_analyze(config: ModelConfig, folder_for) -> int:
    plugin = LyapunovPlugin(config.build_model(), config.estimator_config())
    report = plugin.analyze(config.estimator.p)
    report.notes.extend(config.meta.notes)
    folder = folder_for()
    write_json(folder / "report.json", {"command": "analyze", "config": config, "report": report})
    return EXIT_OK


def cmd_simulate(config: ModelConfig, folder_for, horizons=None, strict: bool = False) -> int:
    plugin = LyapunovPlugin(config.build_model(), config.estimator_config())
    result = plugin.simulate(config.estimator.p, horizons)
    solution = plugin.first_path()

    folder = folder_for()
    write_json(folder / "report.json", {"command": "simulate", "config": config, "report": result})
    write_csv(folder / "sample_exponent.csv", [{"path": k, "value": v} for k, v in enumerate(result.sample.per_path)])
    for report in result.moments:
        write_csv(folder / f"log_moment_p{report.p:g}.csv", report.curve_rows(), ["t", "log_moment", "se"])
    if result.convergence:
        write_csv(folder / "convergence.csv", result.convergence)
    write_csv(
        folder / "chain_path.csv",
        [{"tau": tau, "state": state} for tau, state in ctmc.path_rows(solution.path)],
        ["tau", "state"],
    )
    write_csv(folder / "norm_series.csv", norm_series(solution, plugin.estimator.time_grid()))

    if result.heavy_tail:
        logger.warning("At least one moment estimate is flagged heavy-tailed.")
        if strict:
            return EXIT_STRICT_WARNING
    return EXIT_OK


def cmd_verify(config: ModelConfig | None, folder_for, random_trials: int | None = None, seed: int = 0) -> int:
    if config is None:
        plugin = LyapunovPlugin(None)
        report = plugin.verify(random_trials=random_trials, seed=seed)
    else:
        plugin = LyapunovPlugin(config.build_model(), config.estimator_config())
        report = plugin.verify(config.estimator.p, random_trials=random_trials, seed=config.seed)

    folder = folder_for()
    write_json(folder / "report.json", {"command": "verify", "config": config, "report": report})
    write_csv(
        folder / "duality_trials.csv",
        [r.model_dump(exclude={"weights", "rates"}) for r in report.trials],
        ["trial", "n_states", "lambda_direct", "lambda_eigen", "gap", "rate_at_pi"],
    )
    if not report.passed:
        worst = report.worst_trial()
        error = AgreementFailure(worst.lambda_direct, worst.lambda_eigen, worst.gap, worst.model_dump())
        logger.error(f"{error} Offending trial: {error.data}")
        return EXIT_AGREEMENT
    return EXIT_OK


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("HYBRIDHEAT_LOG_LEVEL", "INFO").upper())
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.list_presets:
        print("\n".join(list_presets()))
        return EXIT_OK
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_VALIDATION

    random_trials = getattr(args, "random_trials", None)
    if random_trials is not None and random_trials < 1:
        parser.exit(EXIT_VALIDATION, "hybridheat: error: --random-trials must be at least 1\n")

    config = None
    try:
        if args.preset is not None or args.config is not None:
            raw = apply_overrides(load_raw_config(args.preset, args.config), args)
            config = ModelConfig.model_validate(raw)
        elif not (args.command == "verify" and random_trials is not None):
            parser.exit(EXIT_VALIDATION, "hybridheat: error: one of --preset or --config is required\n")
    except ValidationError as e:
        print(format_validation_error(e), file=sys.stderr)
        return EXIT_VALIDATION
    except ConfigError as e:
        print(str(e), file=sys.stderr)
        return EXIT_VALIDATION

    name = config.meta.name if config is not None else "random"

    def folder_for() -> Path:
        return run_directory(args.command, name, args.out)

    try:
        if args.command == "analyze":
            return cmd_analyze(config, folder_for)
        if args.command == "simulate":
            return cmd_simulate(config, folder_for, args.horizons, args.strict)
        seed = args.seed if args.seed is not None else 0
        return cmd_verify(config, folder_for, random_trials, seed)
    except AgreementFailure as e:
        logger.error(f"{e} Offending data: {e.data}")
        return EXIT_AGREEMENT
    except (HybridHeatError, ValueError) as e:
        logger.error(f"Error running {args.command}: {e}")
        return EXIT_VALIDATION


def run():
    sys.exit(main())


if __name__ == "__main__":
    run()
