"""
Task called via the `lcmito estimate` CLI command
"""

# Imports
import json

import numpy as np

# Internal imports
from lcmito import ouest
from lcmito.tasks.base import BaseTask
from lcmito.ui import StageEnum


# Class definition
class EstimateTask(BaseTask):

    def run(self) -> int:
        stage = StageEnum.ESTIMATE
        data, phi = self.load_data(stage)
        est = self.run_conf.estimation

        self.output_mgr.step(self.name, stage, "Fitting the OU model...")
        model = ouest.fit(data, est)
        self.output_mgr.done(
            self.name, stage, f"Fitted the OU model on {model.n_pairs} pairs"
        )

        payload = {
            "d": model.dim,
            "delta_c": model.delta_c,
            "u": model.u_used,
            "n_pairs": model.n_pairs,
            "phi_tilde": model.phi_tilde.tolist(),
            "sigma_hat": model.sigma_hat.tolist(),
            "f_hat": model.f_hat.tolist() if model.f_hat is not None else None,
            "seed": self.run_conf.seed,
        }
        if phi is not None:
            payload["phi_error"] = float(np.linalg.norm(model.phi_tilde - phi, 2))
        path = self.output_dir / "estimate.json"
        with open(path, "w") as f:
            json.dump(payload, f, indent=2)
            f.write("\n")

        self.output_mgr.print_table(
            [
                {"row": i, **{f"x_{j + 1}": v for j, v in enumerate(row)}}
                for i, row in enumerate(model.phi_tilde)
            ],
            title="estimated drift",
        )
        if phi is not None:
            self.output_mgr.log_output(
                self.name, stage, "info", f"spectral error {payload['phi_error']:.4f}"
            )
        return 0
