"""
Local independence graph recovery: edge α→β iff the cross-fitted test rejects
α ↛ β | V∖{α}. Edge decisions are taken at `level` (Bonferroni-adjusted on request).

The leave-one-out query assumes a diagonal diffusion matrix; a full Σ̂ is accepted and
not checked.
"""

# Imports
from dataclasses import dataclass, field
import itertools
import logging
from typing import Any, Dict, List, Optional, Tuple

import networkx as nx
from joblib import Parallel, delayed
import numpy as np

# Internal imports
from lcmito import lcmtest, ouest
from lcmito.constants import DEFAULT_LOGGER_NAME
from lcmito.errors import NumericalError
from lcmito.filtering import QuerySpec
from lcmito.sdesim import TrajectorySet


# Logger
DEFAULT_LOGGER = logging.getLogger(DEFAULT_LOGGER_NAME)


# Class definition
@dataclass
class LIGraph:
    """
    `edges[α, β]` is the edge α→β. `weights` holds the fitted Φ̃_{βα} of each pair.
    `failed[α, β]` marks a pair whose test raised a numerical error; its p-value is 1.
    """
    d: int
    edges: np.ndarray
    p_values: np.ndarray
    level: float = 0.05
    weights: Optional[np.ndarray] = None
    degenerate: Optional[np.ndarray] = None
    failed: Optional[np.ndarray] = None

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=bool)
        self.p_values = np.asarray(self.p_values, dtype=float)
        if self.edges.shape != (self.d, self.d) or self.p_values.shape != (self.d, self.d):  # noqa: E501
            raise ValueError(f"edge and p-value matrices must be {self.d}x{self.d}")
        if np.any(np.diag(self.edges)):
            raise ValueError("local independence graphs have no self-loops")
        if self.degenerate is None:
            self.degenerate = np.zeros((self.d, self.d), dtype=bool)
        if self.failed is None:
            self.failed = np.zeros((self.d, self.d), dtype=bool)

    @property
    def n_edges(self) -> int:
        return int(self.edges.sum())

    def edge_list(self) -> List[Tuple[int, int]]:
        return [(int(a), int(b)) for a, b in zip(*np.nonzero(self.edges))]

    def failed_pairs(self) -> List[Tuple[int, int]]:
        assert self.failed is not None
        return [(int(a), int(b)) for a, b in zip(*np.nonzero(self.failed))]

    def to_networkx(self) -> nx.DiGraph:
        graph = nx.DiGraph()
        graph.add_nodes_from(range(self.d))
        for a, b in self.edge_list():
            graph.add_edge(
                a,
                b,
                p_value=float(self.p_values[a, b]),
                weight=float(self.weights[b, a]) if self.weights is not None else None,
            )
        return graph

    def to_dict(self) -> Dict[str, Any]:
        return {
            "d": self.d,
            "level": self.level,
            "edges": [
                [
                    a,
                    b,
                    float(self.p_values[a, b]),
                    float(self.weights[b, a]) if self.weights is not None else None,
                ]
                for a, b in self.edge_list()
            ],
            "failed": [list(pair) for pair in self.failed_pairs()],
        }


@dataclass
class StabilityReport:
    graphs: List[LIGraph]
    seeds: List[int]
    comparisons: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def shds(self) -> List[int]:
        return [c["shd"] for c in self.comparisons]

    @property
    def n_failed(self) -> List[int]:
        return [len(g.failed_pairs()) for g in self.graphs]


# Functions
def _pair_level(level: float, d: int, bonferroni: bool) -> float:
    if not bonferroni or d < 2:
        return level
    return level / (d * (d - 1))


def recover_lig(
    data: TrajectorySet,
    K: int,
    est_config: ouest.EstimationConfig,
    level: float,
    rng_seed: int,
    bonferroni: bool = False,
    workers: int = 1,
    riccati_method: str = "auto",
) -> LIGraph:
    """
    Run the cross-fitted test for every ordered pair α ≠ β with C = V∖{α}. A pair whose
    test raises a NumericalError keeps p = 1 and is marked in `failed`.

    The K per-fold fits do not depend on the query, so they are computed once and
    shared by all d(d-1) tests. Pairs are independent and may run concurrently;
    results land in disjoint cells.

    args:
        data: trajectories
        K: folds
        est_config: estimation settings
        level: significance level of each edge decision
        rng_seed: fold shuffle seed
        bonferroni: divide `level` by d(d-1)
        workers: concurrent pair tests
        riccati_method: passed to the filter
    returns:
        LIGraph
    """
    d = data.dim
    p_values = np.ones((d, d))
    weights = np.zeros((d, d))
    degenerate = np.zeros((d, d), dtype=bool)
    failed = np.zeros((d, d), dtype=bool)
    edge_level = _pair_level(level, d, bonferroni)
    if d < 2:
        return LIGraph(d, np.zeros((d, d), dtype=bool), p_values, edge_level, weights)

    folds = lcmtest.make_folds(data.n_traj, K, rng_seed)
    models = lcmtest.crossfit_models(data, folds, est_config, workers)
    for m in models:
        weights += m.phi_tilde / K

    pairs = [(a, b) for a in range(d) for b in range(d) if a != b]

    def _test(pair: Tuple[int, int]) -> Optional[lcmtest.TestResult]:
        alpha, beta = pair
        try:
            return lcmtest.run_crossfit_test(
                data,
                QuerySpec.leave_one_out(alpha, beta, d),
                K,
                est_config,
                edge_level,
                rng_seed,
                models=models,
                folds=folds,
                riccati_method=riccati_method,
            )
        except NumericalError as e:
            DEFAULT_LOGGER.warning(f"test of {alpha} -/-> {beta} failed: {e}")
            return None

    if workers > 1:
        results = Parallel(n_jobs=workers, backend="threading")(
            delayed(_test)(pair) for pair in pairs
        )
    else:
        results = [_test(pair) for pair in pairs]

    for (alpha, beta), result in zip(pairs, results):
        if result is None:
            failed[alpha, beta] = True
            continue
        p_values[alpha, beta] = result.p_value
        degenerate[alpha, beta] = result.degenerate_variance
    edges = p_values < edge_level
    np.fill_diagonal(edges, False)
    if degenerate.any():
        DEFAULT_LOGGER.warning(
            f"{int(degenerate.sum())} pair(s) had degenerate variance and were left out"
        )
    if failed.any():
        DEFAULT_LOGGER.warning(
            f"{int(failed.sum())} pair(s) failed numerically and were left out"
        )
    DEFAULT_LOGGER.debug(f"recovered graph with {int(edges.sum())} edge(s) over d={d}")
    return LIGraph(d, edges, p_values, edge_level, weights, degenerate, failed)


def shd(g1: LIGraph, g2: LIGraph) -> int:
    """
    Number of ordered pairs whose edge indicator differs
    """
    if g1.d != g2.d:
        raise ValueError(f"graphs have different dimensions ({g1.d} and {g2.d})")
    return int(np.sum(g1.edges != g2.edges))


def differing_edges(g1: LIGraph, g2: LIGraph) -> List[Tuple[int, int]]:
    if g1.d != g2.d:
        raise ValueError(f"graphs have different dimensions ({g1.d} and {g2.d})")
    return [(int(a), int(b)) for a, b in zip(*np.nonzero(g1.edges != g2.edges))]


def true_graph(phi: np.ndarray) -> LIGraph:
    """
    Edge α→β iff Φ_{βα} ≠ 0
    """
    phi = np.asarray(phi, dtype=float)
    d = phi.shape[0]
    edges = phi.T != 0
    np.fill_diagonal(edges, False)
    p_values = np.where(edges, 0.0, 1.0)
    return LIGraph(d, edges, p_values, weights=phi.copy())


def edge_metrics(estimated: LIGraph, truth: LIGraph) -> Tuple[float, float, float]:
    """
    (precision, recall, F1) of the estimated edges. Empty denominators give 0.
    """
    if estimated.d != truth.d:
        raise ValueError(
            f"graphs have different dimensions ({estimated.d} and {truth.d})"
        )
    tp = int(np.sum(estimated.edges & truth.edges))
    n_est = estimated.n_edges
    n_true = truth.n_edges
    precision = tp / n_est if n_est else 0.0
    recall = tp / n_true if n_true else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def stability_report(
    data: TrajectorySet,
    n_splits: int,
    K: int,
    est_config: ouest.EstimationConfig,
    level: float,
    rng_seed: int,
    bonferroni: bool = False,
    workers: int = 1,
    seeds: Optional[List[int]] = None,
    riccati_method: str = "auto",
) -> StabilityReport:
    """
    Recover one graph per fold seed and compare every pair of graphs.
    `seeds` overrides the seeds derived from `rng_seed`. Pairs that failed in either
    graph are listed with each comparison.
    """
    if n_splits < 2:
        raise ValueError(f"`n_splits` must be at least 2, got {n_splits}")
    if seeds is None:
        seeds = [int(rng_seed) + i for i in range(n_splits)]
    elif len(seeds) != n_splits:
        raise ValueError(f"expected {n_splits} seeds, got {len(seeds)}")

    graphs = [
        recover_lig(data, K, est_config, level, s, bonferroni, workers, riccati_method)
        for s in seeds
    ]
    report = StabilityReport(graphs=graphs, seeds=list(seeds))
    for i, j in itertools.combinations(range(n_splits), 2):
        report.comparisons.append(
            {
                "splits": [i, j],
                "seeds": [seeds[i], seeds[j]],
                "shd": shd(graphs[i], graphs[j]),
                "differing_edges": differing_edges(graphs[i], graphs[j]),
                "failed_pairs": sorted(
                    set(graphs[i].failed_pairs()) | set(graphs[j].failed_pairs())
                ),
            }
        )
    return report
