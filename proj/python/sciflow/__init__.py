"""Science-technology interplay analysis: corpus, metrics, GCN patentability
and interplay layouts, backed by the C++ core."""

import json

from ._core import (
    IoError,
    ValidationError,
    auc,
    bin_of,
    hashed_title_embedding,
    parse_bins,
    percentile_ranks,
    running_mean,
    shannon_entropy,
    solve_layout,
    synth,
    target_order,
)
from ._core import Corpus as _Corpus
from . import _core

__all__ = [
    "Corpus",
    "IoError",
    "ValidationError",
    "auc",
    "bin_of",
    "hashed_title_embedding",
    "parse_bins",
    "percentile_ranks",
    "query",
    "run",
    "running_mean",
    "shannon_entropy",
    "solve_layout",
    "synth",
    "target_order",
]

STAGES = ("ingest", "metrics", "train", "predict", "layout")


class Corpus:
    """A validated, indexed corpus loaded from an ingest manifest."""

    def __init__(self, manifest, window=None):
        self._c = _Corpus.load(str(manifest), window)

    paper_count = property(lambda self: self._c.paper_count)
    patent_count = property(lambda self: self._c.patent_count)
    researcher_count = property(lambda self: self._c.researcher_count)
    paper_citation_count = property(lambda self: self._c.paper_citation_count)
    paper_patent_citation_count = property(lambda self: self._c.paper_patent_citation_count)

    def report(self):
        return json.loads(self._c.report_json())

    def snapshot(self):
        return json.loads(self._c.snapshot_json())

    def disruption(self, paper_id):
        return self._c.disruption(paper_id)

    def novelty(self, paper_id, shuffles=10, seed=0):
        return self._c.novelty(paper_id, shuffles, seed)

    def paper_facts(self, paper_id, shuffles=10, seed=0):
        return json.loads(self._c.paper_facts_json(paper_id, shuffles, seed))

    def researcher_metrics(self, researcher_id):
        return json.loads(self._c.researcher_metrics_json(researcher_id))

    def diversity(self, field_id):
        return self._c.diversity(field_id)

    def filter(self, **predicates):
        """Paper ids surviving a filter such as paper_year_range=[2010, 2015]."""
        return self._c.filtered_paper_ids(json.dumps(predicates))


def run(stages, manifest, out, seed=0, novelty_shuffles=10, k_groups=50, epochs=200, jobs=1,
        layout=None):
    """Runs batch stages in order; `stages` is a name or a list of names."""
    if isinstance(stages, str):
        stages = [stages]
    request = json.dumps(layout) if layout else ""
    for stage in stages:
        if stage not in STAGES:
            raise ValueError(f"unknown stage {stage!r}")
        _core.run_stage(stage, str(manifest), str(out), seed, novelty_shuffles, k_groups, epochs,
                        jobs, request)


def query(manifest, out, path, **params):
    """One API request against stage outputs; returns (status, decoded body)."""
    status, body = _core.query(str(manifest), str(out), path,
                               {k: v if isinstance(v, str) else json.dumps(v)
                                for k, v in params.items()})
    return status, json.loads(body) if body else None
