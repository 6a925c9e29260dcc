"""End-to-end runs: raw logs -> normalized requests -> visits -> table -> model."""

from __future__ import annotations

import glob as _glob
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Union

from . import aggregate, cocluster, ingest, pages, sessions

PathLike = Union[str, Path]


def expand_inputs(patterns: Sequence[str]) -> list[str]:
    """Expand globs (sorted, de-duplicated); literal paths pass through."""
    out: list[str] = []
    for pat in patterns:
        hits = sorted(_glob.glob(pat))
        if not hits and Path(pat).is_file():
            hits = [pat]
        out.extend(h for h in hits if h not in out)
    return out


@dataclass
class PipelineConfig:
    ingest: ingest.IngestConfig = field(default_factory=ingest.IngestConfig)
    sessionizer: sessions.SessionizerConfig = field(default_factory=sessions.SessionizerConfig)
    fit: cocluster.FitConfig = field(default_factory=lambda: cocluster.FitConfig(k=7, l=5))
    input_glob: Sequence[str] = ()
    catalog_dir: PathLike | None = None
    output_dir: PathLike = "out"
    shop_id: int = 14
    page_type: str = "ls"
    variable: str = "product_id"

    def check_paths(self) -> list[str]:
        files = expand_inputs(self.input_glob)
        if not files:
            raise FileNotFoundError(f"no input files match {list(self.input_glob)}")
        if self.catalog_dir is not None and not Path(self.catalog_dir).is_dir():
            raise FileNotFoundError(f"catalog directory {self.catalog_dir} does not exist")
        return files


@dataclass
class PipelineResult:
    ingest_stats: ingest.IngestStats
    n_requests: int
    n_sessions: int
    groups: list
    table: aggregate.ContingencyTable
    model: cocluster.BlockModel
    paths: dict[str, Path]

    @property
    def reduction(self) -> float:
        return sessions.reduction_ratio(self.n_sessions, len(self.groups))


def run_pipeline(config: PipelineConfig) -> PipelineResult:
    """Run every stage, writing each stage's file under ``output_dir``."""
    files = config.check_paths()
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "requests": out / "requests.tsv",
        "visits": out / "visits.tsv",
        "all_visits": out / "all_visits.tsv",
        "multi_shop_visits": out / "multi_shop_visits.tsv",
        "table": out / "table.tsv",
        "model": out / "model.tsv",
        "report": out / "report.txt",
    }
    stats = ingest.IngestStats()
    requests = list(ingest.ingest(files, config.ingest, stats))
    ingest.write_normalized(requests, paths["requests"])

    groups = sessions.group_sessions(requests, config.sessionizer)
    sessions.write_visits(groups, paths["visits"])
    for kind in aggregate.VISIT_KINDS:
        aggregate.write_table(aggregate.visit_matrix(groups, kind).to_table(), paths[kind])

    catalog = pages.load_catalog_dir(config.catalog_dir) if config.catalog_dir else None
    table = aggregate.build_crosstab(
        ((r, pages.classify(r.path)) for r in requests),
        shop_id=config.shop_id,
        page_type=config.page_type,
        variable=config.variable,
        catalog=catalog,
        skipped=Counter(),
    )
    aggregate.write_table(table, paths["table"])

    model = cocluster.fit(table, config.fit)
    cocluster.write_model(model, paths["model"])
    paths["report"].write_text(cocluster.block_report(model, table).to_text(), encoding="utf-8")

    n_sessions = len({r.session_id for r in requests})
    return PipelineResult(stats, len(requests), n_sessions, groups, table, model, paths)
