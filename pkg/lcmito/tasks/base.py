"""
Base task class
"""

# Imports
import argparse
import copy
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import numpy as np

# Internal imports
from lcmito import harness, sdesim
from lcmito.config import ConfigMixin, RunConfig
from lcmito.constants import DEFAULT_LOGGER_NAME
from lcmito.data import ingest_csv
from lcmito.lcm_logger import set_up_logger
from lcmito.output import OutputManager
from lcmito.parsers.yml import YmlParser
from lcmito.ui import StageEnum
from lcmito.utils import apply_overrides, derive_seed


# Logger
DEFAULT_LOGGER = logging.getLogger(DEFAULT_LOGGER_NAME)


# Seed tag of the dataset simulated by `simulate`, `estimate`, `test` and `discover`
_SIMULATE_TAG = 7


# Class definition
class BaseTask(ConfigMixin):

    def __init__(self,
        args: argparse.Namespace,
    ):
        self.args = args

        # Directory containing the configuration file
        self.wkdir = Path(self.args.wkdir)

        # Set up logger
        set_up_logger(self.args.log_level)

        # Args will definitely have a `file` attribute
        self.conf_fpath = Path(self.args.file)
        raw_conf = self.parse_conf_fpath(self.conf_fpath)
        if len(raw_conf) == 0:
            raise ValueError(f"no runs found in `{self.conf_fpath}`")

        # If the user specified a run in their args, then use that
        if getattr(self.args, "name", None) is not None:
            if self.args.name not in raw_conf:
                raise ValueError(
                    f"run `{self.args.name}` not found in `{self.conf_fpath}`"
                )
            self.name = self.args.name

        # Otherwise, the file should only hold one run
        else:
            all_names = list(raw_conf.keys())
            if len(all_names) > 1:
                msg1 = f"multiple runs found in `{self.conf_fpath}`"
                msg2 = "specify one with `--name` and try again"
                raise ValueError("...".join([msg1, msg2]))
            self.name = all_names[0]

        conf = raw_conf[self.name]
        if conf is None:
            conf = {}
        if not isinstance(conf, dict):
            raise ValueError(f"`{self.name}`'s configuration must be a mapping")
        self.conf = self.apply_cli_overrides(copy.deepcopy(conf))
        self.run_conf: RunConfig = self.parse_run_conf(
            self.conf, self.name, self.wkdir
        )

        # Output manager
        self.output_mgr: OutputManager = OutputManager(self.args)

    def parse_conf_fpath(self,
        conf_fpath: Path
    ) -> Dict[str, Any]:
        """
        Parse the configuration file path and return the configuration YAML as a
        dictionary

        args:
            conf_fpath: file path to configuration YML
        """
        parser = YmlParser(fpath=conf_fpath)
        return parser.parse()

    def apply_cli_overrides(self, conf: Dict[str, Any]) -> Dict[str, Any]:
        """
        Command-line values win over the configuration file
        """
        overrides = list(getattr(self.args, "overrides", None) or [])
        conf = apply_overrides(conf, overrides)
        if getattr(self.args, "seed", None) is not None:
            conf["seed"] = self.args.seed
        if getattr(self.args, "workers", None) is not None:
            conf["workers"] = self.args.workers
        if getattr(self.args, "out", None) is not None:
            conf["output"] = str(Path(self.args.out).resolve())
        return conf

    @property
    def output_dir(self) -> Path:
        out = self.run_conf.output
        out.mkdir(parents=True, exist_ok=True)
        return out

    def true_phi(self) -> np.ndarray:
        """
        Drift matrix of the simulated dataset: the configured `phi` or a random draw,
        with Φ_{βα} planted when `phi_beta_alpha` is set
        """
        model = self.run_conf.model
        phi = harness.replicate_phi(model, self.run_conf.seed, 0)
        if model.phi_beta_alpha is not None:
            phi = sdesim.plant_edge(phi, model.alpha, model.beta, model.phi_beta_alpha)
        return phi

    def load_data(
        self,
        stage: StageEnum,
    ) -> Tuple[sdesim.TrajectorySet, Optional[np.ndarray]]:
        """
        Read the `data` CSV, or simulate from the `model` section when there is none.

        returns:
            (trajectories, true drift matrix or None for real data)
        """
        run = self.run_conf
        if run.data is not None:
            self.output_mgr.step(self.name, stage, f"Reading trajectories from {run.data}...")  # noqa: E501
            data = ingest_csv(run.data)
            self.output_mgr.done(
                self.name,
                stage,
                f"Read {data.n_traj} trajectories (d={data.dim}, n={data.grid.n_steps})",  # noqa: E501
            )
            return data, None

        self.output_mgr.step(self.name, stage, "Simulating trajectories...")
        phi = self.true_phi()
        model = sdesim.OUModel(phi=phi, sigma=run.model.sigma)
        data = sdesim.simulate(
            model,
            run.grid,
            run.model.n_traj,
            derive_seed(run.seed, _SIMULATE_TAG),
            generator=run.model.generator,
            diffusion_diag=run.model.diffusion_diag,
            workers=run.workers,
        )
        self.output_mgr.done(
            self.name,
            stage,
            f"Simulated {data.n_traj} trajectories (d={data.dim}, n={data.grid.n_steps})",  # noqa: E501
        )
        return data, phi

    def run(self) -> int:
        raise NotImplementedError
