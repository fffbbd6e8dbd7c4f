"""
Task called via the `lcmito test` CLI command
"""

# Internal imports
from lcmito import lcmtest
from lcmito.data import emit_gamma_csv, emit_result_json
from lcmito.output import Symbol
from lcmito.tasks.base import BaseTask
from lcmito.ui import StageEnum
from lcmito.utils import derive_seed


# Seed tags
_FOLD_TAG = 2
_SPLIT_TAG = 3


# Class definition
class TestTask(BaseTask):

    # Not a test case
    __test__ = False

    def run(self) -> int:
        """
        Test the configured query and write the result JSON and the γ̂ path CSV
        """
        stage = StageEnum.TEST
        run = self.run_conf
        data, _ = self.load_data(stage)
        query = run.query_spec(data.dim)

        self.output_mgr.step(
            self.name,
            stage,
            f"Testing {query.alpha} -/-> {query.beta} given {list(query.cond_set)}...",
        )
        if run.test.crossfit:
            result = lcmtest.run_crossfit_test(
                data,
                query,
                run.test.K,
                run.estimation,
                run.test.level,
                derive_seed(run.seed, _FOLD_TAG),
                workers=run.workers,
                riccati_method=run.test.riccati_method,
            )
        else:
            result = lcmtest.run_test(
                data,
                query,
                lcmtest.half_split(data.n_traj, derive_seed(run.seed, _SPLIT_TAG)),
                run.estimation,
                run.test.level,
                riccati_method=run.test.riccati_method,
            )
        symbol = Symbol.FLAGGED if result.degenerate_variance else None
        self.output_mgr.done(
            self.name, stage, f"p-value {result.p_value:.4g}", symbol=symbol
        )

        out = self.output_dir
        gamma_path = emit_gamma_csv(result.gamma_path, data.grid, out / "gamma.csv")
        emit_result_json(
            result,
            out / "result.json",
            gamma_path_file=gamma_path.name,
            config_echo=self.conf,
            seed=run.seed,
        )
        self.output_mgr.print_summary(
            {
                "statistic": result.statistic,
                "p_value": result.p_value,
                "variance_T": result.variance_T,
                "rejected": result.rejected,
                "degenerate": result.degenerate_variance,
            },
            title=f"test ({result.method})",
        )
        return 0
