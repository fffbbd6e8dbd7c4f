"""
Task called via the `lcmito simulate` CLI command
"""

# Imports
import pandas as pd

# Internal imports
from lcmito.data import emit_csv, emit_table_csv
from lcmito.tasks.base import BaseTask
from lcmito.ui import StageEnum


# Class definition
class SimulateTask(BaseTask):

    def run(self) -> int:
        """
        Simulate trajectories from the `model` section and write them, together with
        the drift matrix used, to the output directory
        """
        stage = StageEnum.SIMULATE
        if self.run_conf.data is not None:
            raise ValueError("`simulate` does not read `data`...remove it and try again")  # noqa: E501
        data, phi = self.load_data(stage)
        assert phi is not None

        out = self.output_dir
        self.output_mgr.step(self.name, stage, "Writing trajectories...")
        traj_path = emit_csv(data, out / "trajectories.csv")
        phi_frame = pd.DataFrame(
            phi, columns=[f"x_{i + 1}" for i in range(phi.shape[1])]
        )
        phi_path = emit_table_csv(phi_frame, out / "phi.csv")
        self.output_mgr.done(self.name, stage, f"Wrote {traj_path} and {phi_path}")

        self.output_mgr.print_summary(
            {
                "trajectories": data.n_traj,
                "d": data.dim,
                "time points": data.grid.n_steps + 1,
                "delta": data.grid.delta,
                "generator": self.run_conf.model.generator,
            },
            title="simulate",
        )
        return 0
