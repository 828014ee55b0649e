"""Network momentum research toolkit (C++ core)."""

from ._netmom import (
    ConfigError,
    DataError,
    SolverBudgetError,
    __version__,
    avg_degree,
    clustering_coeff,
    community_ratio,
    config_hash,
    edge_sparsity,
    generate_splits,
    graph_objective,
    jaccard_index,
    learn_graph,
    macd_response,
    max_drawdown,
    normalize_graph,
    perf_metrics,
    run_stage,
    sparsify,
    spectral_clustering,
    synth_market,
)

STAGES = ("synth", "ingest", "features", "graphs", "backtest", "report")


def run_pipeline(config, resume=False):
    """Runs every stage after synth in order."""
    for stage in STAGES[1:]:
        run_stage(stage, str(config), resume)
