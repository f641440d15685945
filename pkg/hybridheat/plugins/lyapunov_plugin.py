import logging
from dataclasses import asdict

from pydantic import BaseModel, Field

from ..tools import large_deviation, lyapunov_analytic, montecarlo
from ..tools.hybrid_solution import HybridHeatModel, PathSolution
from ..tools.lyapunov_analytic import ExponentReport
from ..tools.montecarlo import EstimateReport, EstimatorConfig
from ..tools.utils.log_report import log_report, summarize_report

# Configure module-level logger
logger = logging.getLogger("lyapunov_plugin.py")
logger.setLevel(logging.INFO)


class SimulationReport(BaseModel):
    sample: EstimateReport
    moments: list[EstimateReport] = Field(default_factory=list)
    convergence: list[dict] = Field(default_factory=list)

    @property
    def heavy_tail(self) -> bool:
        return any(report.heavy_tail for report in self.moments)


class DualityRecord(BaseModel):
    trial: int
    n_states: int
    lambda_direct: float
    lambda_eigen: float
    gap: float
    rate_at_pi: float
    weights: list[float] | None = None
    rates: list[list[float]] | None = None


class VerificationReport(BaseModel):
    tolerance: float
    trials: list[DualityRecord]
    worst_gap: float
    worst_rate_at_pi: float
    passed: bool

    def worst_trial(self) -> DualityRecord | None:
        return max(self.trials, key=lambda t: t.gap, default=None)


def _summarize(data):
    if "sample" in data:
        return "\n".join(summarize_report(r) for r in [data["sample"], *data.get("moments", [])])
    return summarize_report(data)


class LyapunovPlugin:

    def __init__(
        self,
        model: HybridHeatModel | None,
        estimator: EstimatorConfig | None = None,
        route: str = "eigen",
    ):
        """
        :param model: The switching heat-equation model every command runs on (None for random-trial verification).
        :param estimator: Monte Carlo settings for ``simulate``.
        :param route: "eigen" or "variational", how moment exponents compute the dual of the rate function.
        """
        self.model = model
        self.estimator = estimator or EstimatorConfig()
        self.route = route

    def _require_model(self) -> HybridHeatModel:
        if self.model is None:
            raise ValueError("This command needs a configured model.")
        return self.model

    @log_report(parser_function=summarize_report)
    def analyze(self, p_values=()) -> ExponentReport:
        """Closed-form exponents, pi lower bounds and stability verdicts."""
        return lyapunov_analytic.analyze(self._require_model(), p_values, self.route)

    @log_report(parser_function=_summarize)
    def simulate(self, p_values=(), horizons=None) -> SimulationReport:
        """Monte Carlo sample exponent, one moment estimate per p and an optional convergence table."""
        model = self._require_model()
        sample = montecarlo.estimate_sample_exponent(model, self.estimator)
        moments = [montecarlo.estimate_moment_exponent(model, p, self.estimator) for p in p_values]
        convergence = []
        if horizons:
            convergence = montecarlo.convergence_table(model, horizons, self.estimator)
        return SimulationReport(sample=sample, moments=moments, convergence=convergence)

    def first_path(self) -> PathSolution:
        return montecarlo.first_path_solution(self._require_model(), self.estimator)

    @log_report(parser_function=summarize_report)
    def verify(
        self,
        p_values=(),
        random_trials: int | None = None,
        seed: int = 0,
        tolerance: float = large_deviation.AGREEMENT_TOLERANCE,
    ) -> VerificationReport:
        """Variational supremum against the tilted principal eigenvalue.

        With ``random_trials`` the check runs on random generators and weights;
        otherwise on the model's moment weights g for each p.
        """
        records = []
        if random_trials is not None:
            for trial in large_deviation.duality_trials(random_trials, seed=seed):
                records.append(DualityRecord(**asdict(trial)))
        else:
            model = self._require_model()
            rate_at_pi = large_deviation.rate_function(model.generator, model.pi, seed=seed).value
            for trial, p in enumerate(p_values):
                weights = lyapunov_analytic.moment_weights(model, p)
                result = large_deviation.variational_sup(model.generator, weights, check=False, seed=seed)
                records.append(
                    DualityRecord(
                        trial=trial,
                        n_states=model.n_states,
                        lambda_direct=result.lambda_direct,
                        lambda_eigen=result.eigen_lambda,
                        gap=result.agreement_gap,
                        rate_at_pi=rate_at_pi,
                        weights=weights.tolist(),
                        rates=model.generator.rates.tolist(),
                    )
                )

        worst_gap = max((r.gap for r in records), default=0.0)
        worst_rate = max((r.rate_at_pi for r in records), default=0.0)
        passed = all(r.gap <= tolerance for r in records)
        if not passed:
            logger.error("Duality check failed: worst gap %.3e exceeds %.1e.", worst_gap, tolerance)
        return VerificationReport(
            tolerance=tolerance,
            trials=records,
            worst_gap=worst_gap,
            worst_rate_at_pi=worst_rate,
            passed=passed,
        )
