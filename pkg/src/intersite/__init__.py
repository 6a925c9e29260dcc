"""Intersite clickstream preprocessing and chi-squared crossed clustering."""

from .aggregate import ContingencyTable, TimeSlice, build_crosstab, read_table, visit_matrix, write_table
from .cocluster import BlockModel, FitConfig, Partition, block_report, brute_force, chi2_of, collapse, fit
from .ingest import IngestConfig, IngestStats, NormalizedRequest, RawRequest, clean, fuse, normalize, parse_line
from .pages import Catalog, PageInfo, PageType, classify, load_catalog, resolve
from .pipeline import PipelineConfig, run_pipeline
from .sessions import (
    SessionizerConfig,
    VisitGroup,
    group_sessions,
    multi_shop_filter,
    reduction_ratio,
    session_partition,
)
from .synth import SynthSpec, generate, write_synth

__version__ = "0.1.0"
