"""
Task called via the `lcmito experiment` CLI command
"""

# Internal imports
from lcmito import harness
from lcmito.data import emit_table_csv
from lcmito.tasks.base import BaseTask
from lcmito.ui import StageEnum


# Class definition
class ExperimentTask(BaseTask):

    def run(self) -> int:
        stage = StageEnum.EXPERIMENT
        run = self.run_conf
        if run.experiment is None:
            raise ValueError(f"`experiment` not found in `{self.name}`'s configuration!")  # noqa: E501
        if run.data is not None:
            raise ValueError("`experiment` simulates its own data...remove `data` and try again")  # noqa: E501

        self.output_mgr.step(
            self.name, stage, f"Running the `{run.experiment.mode}` experiment..."
        )
        result = harness.run_experiment(
            run.model,
            run.grid,
            run.estimation,
            run.test,
            run.experiment,
            run.seed,
            run.workers,
        )
        n_failed = int(result.runs["failed"].sum())
        self.output_mgr.done(
            self.name,
            stage,
            f"Finished {len(result.runs)} run(s), {n_failed} failed",
        )

        out = self.output_dir
        emit_table_csv(result.table, out / "experiment.csv")
        emit_table_csv(result.runs, out / "runs.csv")
        self.output_mgr.print_table(result.table, title=f"experiment ({run.experiment.mode})")  # noqa: E501
        return 0
