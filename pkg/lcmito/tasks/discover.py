"""
Task called via the `lcmito discover` CLI command
"""

# Imports
import json

# Internal imports
from lcmito import ligraph
from lcmito.data import emit_graph_json
from lcmito.output import Symbol
from lcmito.tasks.base import BaseTask
from lcmito.ui import StageEnum
from lcmito.utils import derive_seed


# Seed tag
_FOLD_TAG = 2


# Class definition
class DiscoverTask(BaseTask):

    def run(self) -> int:
        """
        Recover the local independence graph. With `n_splits` ≥ 2, also report the
        stability of the graph across fold seeds.
        """
        stage = StageEnum.DISCOVER
        run = self.run_conf
        data, phi = self.load_data(stage)
        fold_seed = derive_seed(run.seed, _FOLD_TAG)

        self.output_mgr.step(
            self.name, stage, f"Testing {data.dim * (data.dim - 1)} ordered pairs..."
        )
        graph = ligraph.recover_lig(
            data,
            run.test.K,
            run.estimation,
            run.test.level,
            fold_seed,
            bonferroni=run.test.bonferroni,
            workers=run.workers,
            riccati_method=run.test.riccati_method,
        )
        n_failed = len(graph.failed_pairs())
        self.output_mgr.done(
            self.name,
            stage,
            f"Recovered {graph.n_edges} edge(s)"
            + (f", {n_failed} pair(s) failed" if n_failed else ""),
            symbol=Symbol.FLAGGED if n_failed else None,
        )

        extra = {"seed": run.seed}
        if phi is not None:
            precision, recall, f1 = ligraph.edge_metrics(graph, ligraph.true_graph(phi))
            extra["metrics"] = {"precision": precision, "recall": recall, "f1": f1}
        out = self.output_dir
        emit_graph_json(graph, out / "graph.json", extra=extra)

        self.output_mgr.print_table(
            [
                {
                    "from": a,
                    "to": b,
                    "p_value": float(graph.p_values[a, b]),
                    "weight": float(graph.weights[b, a]) if graph.weights is not None else float("nan"),  # noqa: E501
                }
                for a, b in graph.edge_list()
            ],
            title="edges",
            columns=["from", "to", "p_value", "weight"],
        )
        if "metrics" in extra:
            self.output_mgr.print_summary(extra["metrics"], title="against the true graph")  # noqa: E501

        if run.test.n_splits >= 2:
            self.output_mgr.step(self.name, stage, "Checking stability across splits...")  # noqa: E501
            report = ligraph.stability_report(
                data,
                run.test.n_splits,
                run.test.K,
                run.estimation,
                run.test.level,
                fold_seed,
                bonferroni=run.test.bonferroni,
                workers=run.workers,
                riccati_method=run.test.riccati_method,
            )
            self.output_mgr.done(
                self.name, stage, f"Pairwise SHDs across splits: {report.shds}"
            )
            with open(out / "stability.json", "w") as f:
                json.dump(
                    {
                        "seeds": report.seeds,
                        "comparisons": report.comparisons,
                        "n_failed": report.n_failed,
                        "graphs": [g.to_dict() for g in report.graphs],
                    },
                    f,
                    indent=2,
                )
                f.write("\n")
        return 0
