"""Hypothesis category classification and degradation accounting.

Given decodes of the same test set at a small and a large beam width, each
sentence lands in exactly one category:

  Improved   the large-beam output matches the reference at least as well,
  Prefix     it got worse and is a prefix of the small-beam output (modulo
             a trailing period),
  OtherDrop  it got worse some other way.

Per-category corpus metrics weighted by category fractions give the
contribution-to-degradation and contribution-to-shortening accounting, and
bucket_quality slices corpus quality by reference length.
"""

import math
from dataclasses import dataclass

from .errors import DataError
from .metrics import SENTENCE_EPS, corpus_bleu, corpus_wer, sentence_bleu, wer

CATEGORIES = ("Improved", "Prefix", "OtherDrop")

DEFAULT_BUCKET_EDGES = (10, 20, 30, 40, 50, 60)

_METRIC_ALIASES = {"bleu": "bleu", "sentence_bleu": "bleu", "wer": "wer"}


def _canon_metric(metric):
    try:
        return _METRIC_ALIASES[metric]
    except KeyError:
        raise ValueError("metric must be one of %s, got %r"
                         % (sorted(set(_METRIC_ALIASES)), metric)) from None


def _require_same_length(**named):
    lengths = {name: len(v) for name, v in named.items()}
    if len(set(lengths.values())) > 1:
        raise DataError("misaligned inputs: %s" % (lengths,))


# ------------------------------------------------------------ prefix relation

def is_prefix_modulo_eos(short, long):
    """True iff `short` is a prefix of `long` after forgiving at most one
    trailing period on the short side. Stored sentences never carry an EOS
    marker, so the period is the only sentence-final decoration to strip."""
    s = list(short)
    if s and s[-1] == ".":
        s = s[:-1]
    return s == list(long[:len(s)])


# -------------------------------------------------------------- classification

def _sentence_scores(hyps, refs, canon, eps):
    if canon == "bleu":
        return [sentence_bleu(h, r, eps=eps) for h, r in zip(hyps, refs)]
    return [wer(h, r).wer for h, r in zip(hyps, refs)]


def classify(hyps_small, hyps_large, refs, metric="bleu", eps=SENTENCE_EPS):
    """Assign each sentence to Improved, Prefix, or OtherDrop, in that
    precedence order. Improved means the large-beam hypothesis scores at
    least as well per sentence (BLEU: >=, WER: <=)."""
    canon = _canon_metric(metric)
    _require_same_length(hyps_small=hyps_small, hyps_large=hyps_large,
                         refs=refs)
    small_scores = _sentence_scores(hyps_small, refs, canon, eps)
    large_scores = _sentence_scores(hyps_large, refs, canon, eps)
    categories = []
    for hs, hl, s, l in zip(hyps_small, hyps_large, small_scores,
                            large_scores):
        improved = l >= s if canon == "bleu" else l <= s
        if improved:
            categories.append("Improved")
        elif is_prefix_modulo_eos(hl, hs):
            categories.append("Prefix")
        else:
            categories.append("OtherDrop")
    return categories


# ------------------------------------------------------------- category report

@dataclass(frozen=True)
class CategoryRow:
    category: str
    count: int
    fraction: float
    metric_small: float
    metric_large: float
    mean_len_small: float
    mean_len_large: float
    contribution: float
    length_contribution: float


@dataclass(frozen=True)
class CategoryReport:
    metric: str
    n_sentences: int
    rows: tuple


def contribution(metric_small, metric_large, fraction):
    """Weighted share of the corpus-level shift attributed to one category."""
    return (metric_large - metric_small) * fraction


def _corpus_metric(hyps, refs, canon):
    if canon == "bleu":
        return corpus_bleu(hyps, refs).score
    return corpus_wer(hyps, refs)


def category_report(categories, hyps_small, hyps_large, refs, metric="bleu"):
    """Per-category corpus metrics, mean hypothesis lengths, and weighted
    contributions. Empty categories report null metrics and contribution 0."""
    canon = _canon_metric(metric)
    _require_same_length(categories=categories, hyps_small=hyps_small,
                         hyps_large=hyps_large, refs=refs)
    bad = set(categories) - set(CATEGORIES)
    if bad:
        raise DataError("unknown categories: %s" % sorted(bad))
    n = len(refs)
    if n == 0:
        raise DataError("need at least one classified sentence")
    rows = []
    for cat in CATEGORIES:
        members = [i for i, c in enumerate(categories) if c == cat]
        count = len(members)
        fraction = count / n
        if count == 0:
            rows.append(CategoryRow(cat, 0, 0.0, None, None, None, None,
                                    0.0, 0.0))
            continue
        sub_small = [hyps_small[i] for i in members]
        sub_large = [hyps_large[i] for i in members]
        sub_refs = [refs[i] for i in members]
        metric_small = _corpus_metric(sub_small, sub_refs, canon)
        metric_large = _corpus_metric(sub_large, sub_refs, canon)
        mean_small = sum(len(h) for h in sub_small) / count
        mean_large = sum(len(h) for h in sub_large) / count
        rows.append(CategoryRow(
            cat, count, fraction, metric_small, metric_large,
            mean_small, mean_large,
            contribution(metric_small, metric_large, fraction),
            contribution(mean_small, mean_large, fraction)))
    return CategoryReport(canon, n, tuple(rows))


# --------------------------------------------------------------- length report

def length_report(hyps_by_beam, categories=None):
    """Mean hypothesis token length per beam, optionally split by category."""
    if not hyps_by_beam:
        raise DataError("no decoded beams given")
    sizes = {len(hyps) for hyps in hyps_by_beam.values()}
    if len(sizes) > 1 or sizes == {0}:
        raise DataError("beams decode different test sets: sizes %s"
                        % sorted(sizes))
    n = sizes.pop()
    report = {"means": {beam: sum(len(h) for h in hyps) / n
                        for beam, hyps in hyps_by_beam.items()}}
    if categories is not None:
        if len(categories) != n:
            raise DataError("classification covers %d sentences, beams have %d"
                            % (len(categories), n))
        by_category = {}
        for beam, hyps in hyps_by_beam.items():
            per = {}
            for cat in CATEGORIES:
                lens = [len(h) for h, c in zip(hyps, categories) if c == cat]
                per[cat] = sum(lens) / len(lens) if lens else None
            by_category[beam] = per
        report["by_category"] = by_category
    return report


# -------------------------------------------------------------------- buckets

@dataclass(frozen=True)
class Bucket:
    low: float
    high: float
    count: int
    metric: float


@dataclass(frozen=True)
class BucketReport:
    metric: str
    edges: tuple
    buckets: tuple


def bucket_quality(hyps, refs, edges=DEFAULT_BUCKET_EDGES, metric="bleu"):
    """Corpus metric per reference-length bucket. Buckets are (prev, edge]
    starting from 0, plus an open final bucket past the last finite edge."""
    canon = _canon_metric(metric)
    _require_same_length(hyps=hyps, refs=refs)
    if not refs:
        raise DataError("need at least one sentence pair")
    edges = tuple(edges)
    if not edges:
        raise ValueError("need at least one bucket edge")
    if edges[0] <= 0:
        raise ValueError("first bucket edge must be positive, got %r"
                         % (edges[0],))
    if any(a >= b for a, b in zip(edges, edges[1:])):
        raise ValueError("bucket edges must be strictly ascending: %r"
                         % (edges,))
    bounds = list(zip((0,) + edges, edges))
    if not math.isinf(edges[-1]):
        bounds.append((edges[-1], math.inf))
    buckets = []
    for low, high in bounds:
        members = [i for i, r in enumerate(refs) if low < len(r) <= high]
        if members:
            value = _corpus_metric([hyps[i] for i in members],
                                   [refs[i] for i in members], canon)
        else:
            value = None
        buckets.append(Bucket(low, high, len(members), value))
    return BucketReport(canon, edges, tuple(buckets))


# -------------------------------------------------------------- serialization

def _csv_cell(value):
    return "" if value is None else repr(value)


def category_report_to_csv(report):
    lines = ["category,count,fraction,metric_small,metric_large,"
             "mean_len_small,mean_len_large,contribution,length_contribution"]
    for r in report.rows:
        lines.append(",".join([
            r.category, "%d" % r.count, repr(r.fraction),
            _csv_cell(r.metric_small), _csv_cell(r.metric_large),
            _csv_cell(r.mean_len_small), _csv_cell(r.mean_len_large),
            repr(r.contribution), repr(r.length_contribution)]))
    return "\n".join(lines) + "\n"


def bucket_report_to_csv(report):
    lines = ["bucket_low,bucket_high,count,metric"]
    for b in report.buckets:
        lines.append(",".join([repr(b.low), repr(b.high), "%d" % b.count,
                               _csv_cell(b.metric)]))
    return "\n".join(lines) + "\n"


def _finite_or_none(value):
    return None if value is not None and math.isinf(value) else value


def category_report_blob(report):
    return {
        "metric": report.metric,
        "n_sentences": report.n_sentences,
        "categories": [{
            "category": r.category,
            "count": r.count,
            "fraction": r.fraction,
            "metric_small": r.metric_small,
            "metric_large": r.metric_large,
            "mean_len_small": r.mean_len_small,
            "mean_len_large": r.mean_len_large,
            "contribution": r.contribution,
            "length_contribution": r.length_contribution,
        } for r in report.rows],
    }


def bucket_report_blob(report):
    return {
        "metric": report.metric,
        "edges": [_finite_or_none(e) for e in report.edges],
        "buckets": [{
            "low": b.low,
            "high": _finite_or_none(b.high),
            "count": b.count,
            "metric": b.metric,
        } for b in report.buckets],
    }
