"""Forum reply graphs as early warning signals for enterprise attacks."""

from ._core import (
    ThreatnetError,
    __version__,
    betweenness,
    communities,
    conductance,
    default_config,
    extract_cves,
    is_cve_id,
    min_distances,
    pagerank,
    run,
    sha256_file,
    stationary_distribution,
    subcommands,
    synth,
    welch_ttest,
)

__all__ = [
    "ThreatnetError",
    "__version__",
    "betweenness",
    "communities",
    "conductance",
    "default_config",
    "extract_cves",
    "is_cve_id",
    "min_distances",
    "pagerank",
    "run",
    "sha256_file",
    "stationary_distribution",
    "subcommands",
    "synth",
    "welch_ttest",
]
