"""Declarative experiment pipeline: config file in, report bundle out.

One config drives the whole chain: generate a synthetic parallel corpus,
build augmented training variants (multi-sentence resampling and plain
length-proportional resampling), train one model per system, decode a shared
test set across beam widths and normalizations, then emit quality curves,
category and bucket reports, and training-length histograms as CSV + JSON.
A manifest records the config snapshot, its hash, and every artifact path.
"""

import hashlib
import os
from dataclasses import dataclass, replace
from datetime import datetime, timezone

import yaml

from . import __version__, analysis, augment, metrics, model as model_mod, search
from .corpus import (SynthConfig, generate_synthetic, length_histogram,
                     parse_length_law, save_corpus)
from .errors import DataError
from .fileio import write_bytes_atomic, write_json_atomic, write_text_atomic

SYSTEMS = ("baseline", "msr", "resample")

SYNTH_DEFAULTS = {
    "vocab_size": 48,
    "zipf_exponent": 1.3,
    "length_law": "negative_binomial(10, 0.35)",
    "test_length_law": "uniform(6, 44)",
    "terminal_token": ".",
    "noise_prob": 0.02,
    "train_size": 9000,
    "dev_size": 300,
    "test_size": 600,
}
_AUGMENT_DEFAULTS = {"n_max": 4, "multiplier": 10, "n_sweep": []}
_MODEL_DEFAULTS = {"order": 3, "add_k_lex": 0.1, "add_k_ngram": 0.1,
                   "lambda": 0.8, "min_count": 1}
_DECODE_DEFAULTS = {"widths": [1, 4, 32, 200],
                    "normalizations": ["none", "by_length:1.0"],
                    "max_len_a": 2.0, "max_len_b": 10, "topk": 1}
_EVALUATE_DEFAULTS = {"metric": "bleu"}
_ANALYSIS_DEFAULTS = {"category_pair": [4, 200],
                      "bucket_edges": [8, 16, 24, 32, 40, 48, 56],
                      "histogram_bucket_width": 4}
_SECTIONS = ("synth", "augment", "model", "decode", "evaluate", "analysis")


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int
    systems: tuple
    synth: SynthConfig
    n_max: int
    multiplier: float
    n_sweep: tuple
    order: int
    add_k_lex: float
    add_k_ngram: float
    lam: float
    min_count: int
    widths: tuple
    normalizations: tuple
    max_len_a: float
    max_len_b: int
    topk: int
    metric: str
    category_pair: tuple
    bucket_edges: tuple
    histogram_bucket_width: int


def _merge_section(name, given, defaults):
    if given is None:
        given = {}
    if not isinstance(given, dict):
        raise DataError("config section '%s' must be a mapping" % name)
    unknown = sorted(set(given) - set(defaults))
    if unknown:
        raise DataError("config section '%s': unknown key(s) %s"
                        % (name, ", ".join(unknown)))
    merged = dict(defaults)
    merged.update(given)
    return merged


def _require_int(name, value, minimum=None):
    if isinstance(value, bool) or not isinstance(value, int):
        raise DataError("config: %s must be an integer, got %r" % (name, value))
    if minimum is not None and value < minimum:
        raise DataError("config: %s must be >= %d, got %d"
                        % (name, minimum, value))
    return value


def _require_number(name, value):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise DataError("config: %s must be a number, got %r" % (name, value))
    return float(value)


def _parse_law(name, text):
    try:
        return parse_length_law(text)
    except (TypeError, ValueError) as exc:
        raise DataError("config: bad %s: %s" % (name, exc)) from None


def _config_from_blob(blob):
    if blob is None:
        blob = {}
    if not isinstance(blob, dict):
        raise DataError("config root must be a mapping of sections")
    known_top = set(_SECTIONS) | {"seed", "systems"}
    unknown = sorted(set(blob) - known_top)
    if unknown:
        raise DataError("config: unknown top-level key(s) %s"
                        % ", ".join(unknown))
    seed = _require_int("seed", blob.get("seed", 1234))

    systems = blob.get("systems", list(SYSTEMS))
    if not isinstance(systems, list) or not systems or \
            len(set(systems)) != len(systems) or \
            any(s not in SYSTEMS for s in systems):
        raise DataError("config: systems must be a non-repeating subset of %s"
                        % (list(SYSTEMS),))

    synth = _merge_section("synth", blob.get("synth"), SYNTH_DEFAULTS)
    aug = _merge_section("augment", blob.get("augment"), _AUGMENT_DEFAULTS)
    mdl = _merge_section("model", blob.get("model"), _MODEL_DEFAULTS)
    dec = _merge_section("decode", blob.get("decode"), _DECODE_DEFAULTS)
    ev = _merge_section("evaluate", blob.get("evaluate"), _EVALUATE_DEFAULTS)
    ana = _merge_section("analysis", blob.get("analysis"), _ANALYSIS_DEFAULTS)

    test_law = synth["test_length_law"]
    try:
        synth_cfg = SynthConfig(
            vocab_size=_require_int("synth.vocab_size", synth["vocab_size"]),
            zipf_exponent=_require_number("synth.zipf_exponent",
                                          synth["zipf_exponent"]),
            length_law=_parse_law("synth.length_law", synth["length_law"]),
            noise_prob=_require_number("synth.noise_prob", synth["noise_prob"]),
            train_size=_require_int("synth.train_size", synth["train_size"]),
            dev_size=_require_int("synth.dev_size", synth["dev_size"]),
            test_size=_require_int("synth.test_size", synth["test_size"]),
            seed=seed,
            test_length_law=None if test_law is None
            else _parse_law("synth.test_length_law", test_law),
            terminal_token=synth["terminal_token"])
    except ValueError as exc:
        raise DataError("config: %s" % exc) from None

    widths = dec["widths"]
    if not isinstance(widths, list) or not widths or \
            any(isinstance(w, bool) or not isinstance(w, int) or w < 1
                for w in widths):
        raise DataError("config: decode.widths must be positive integers")
    if any(a >= b for a, b in zip(widths, widths[1:])):
        raise DataError("config: decode.widths must be strictly ascending")

    norms = dec["normalizations"]
    if not isinstance(norms, list) or not norms:
        raise DataError("config: decode.normalizations must be a "
                        "non-empty list")
    parsed_norms = []
    for text in norms:
        try:
            parsed_norms.append(search.parse_normalization(text))
        except (TypeError, ValueError) as exc:
            raise DataError("config: bad normalization %r: %s"
                            % (text, exc)) from None

    metric = ev["metric"]
    if metric not in ("bleu", "wer"):
        raise DataError("config: evaluate.metric must be 'bleu' or 'wer', "
                        "got %r" % (metric,))

    pair = ana["category_pair"]
    if not isinstance(pair, list) or len(pair) != 2 or \
            any(w not in widths for w in pair) or pair[0] >= pair[1]:
        raise DataError("config: analysis.category_pair must name two "
                        "decoded widths, small before large")

    edges = ana["bucket_edges"]
    if not isinstance(edges, list) or not edges or edges[0] <= 0 or \
            any(a >= b for a, b in zip(edges, edges[1:])):
        raise DataError("config: analysis.bucket_edges must be ascending "
                        "positive thresholds")

    sweep = aug["n_sweep"]
    if not isinstance(sweep, list) or \
            any(isinstance(n, bool) or not isinstance(n, int) or n < 1
                for n in sweep):
        raise DataError("config: augment.n_sweep must be a list of "
                        "positive integers")

    return ExperimentConfig(
        seed=seed,
        systems=tuple(systems),
        synth=synth_cfg,
        n_max=_require_int("augment.n_max", aug["n_max"], minimum=1),
        multiplier=_require_number("augment.multiplier", aug["multiplier"]),
        n_sweep=tuple(sweep),
        order=_require_int("model.order", mdl["order"], minimum=1),
        add_k_lex=_require_number("model.add_k_lex", mdl["add_k_lex"]),
        add_k_ngram=_require_number("model.add_k_ngram", mdl["add_k_ngram"]),
        lam=_require_number("model.lambda", mdl["lambda"]),
        min_count=_require_int("model.min_count", mdl["min_count"], minimum=1),
        widths=tuple(widths),
        normalizations=tuple(parsed_norms),
        max_len_a=_require_number("decode.max_len_a", dec["max_len_a"]),
        max_len_b=_require_int("decode.max_len_b", dec["max_len_b"]),
        topk=_require_int("decode.topk", dec["topk"], minimum=1),
        metric=metric,
        category_pair=tuple(pair),
        bucket_edges=tuple(edges),
        histogram_bucket_width=_require_int(
            "analysis.histogram_bucket_width",
            ana["histogram_bucket_width"], minimum=1),
    )


def _read_config_bytes(path):
    try:
        with open(path, "rb") as handle:
            return handle.read()
    except OSError as exc:
        raise DataError("cannot read config %s: %s" % (path, exc)) from None


def load_experiment_config(path):
    """Parse and validate an experiment config file. Unknown keys anywhere
    are hard errors."""
    raw = _read_config_bytes(path)
    try:
        blob = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise DataError("config %s is not valid YAML: %s" % (path, exc)) \
            from None
    return _config_from_blob(blob)


# ------------------------------------------------------------------- pipeline

def _norm_slug(norm):
    return search.format_normalization(norm).replace(":", "_")


def _hash_comment(config_hash):
    return "# config_hash=%s\n" % config_hash


def _train_model(cfg, corpus):
    return model_mod.train(corpus, order=cfg.order, add_k_lex=cfg.add_k_lex,
                           add_k_ngram=cfg.add_k_ngram, lam=cfg.lam,
                           min_count=cfg.min_count)


def _augmented_corpora(cfg, base_train):
    """Training corpus per system. Augmentation seeds are fixed offsets from
    the global seed so stages stay independently reproducible."""
    corpora = {}
    for system in cfg.systems:
        if system == "baseline":
            corpora[system] = base_train
        elif system == "msr":
            corpora[system] = augment.msr(base_train, augment.MsrConfig(
                n_max=cfg.n_max, multiplier=cfg.multiplier,
                seed=cfg.seed + 1))
        else:
            size = augment.resolve_output_size(
                len(base_train),
                augment.MsrConfig(n_max=cfg.n_max, multiplier=cfg.multiplier,
                                  seed=cfg.seed + 2))
            corpora[system] = augment.simple_resample(base_train, size,
                                                      seed=cfg.seed + 2)
    return corpora


def _decode_grid(cfg, models, sources, jobs):
    """Decode once per (system, width) with raw scores, then rerank per
    normalization. Returns top-1 token lists and the full reranked results."""
    raw_config = {}
    top1 = {}
    results = {}
    for system in cfg.systems:
        vocab = models[system].target_vocab
        for width in cfg.widths:
            beam = search.BeamConfig(width=width,
                                     max_len_a=cfg.max_len_a,
                                     max_len_b=cfg.max_len_b)
            raw = search.decode_corpus(models[system], sources, beam,
                                       jobs=jobs)
            raw_config[(system, width)] = beam
            for norm in cfg.normalizations:
                reranked = [search.rerank(r, norm) for r in raw]
                results[(system, width, norm)] = reranked
                top1[(system, width, norm)] = [
                    vocab.decode(list(r.hypotheses[0].tokens))
                    for r in reranked]
    return top1, results


def _corpus_score(cfg, hyps, refs):
    if cfg.metric == "bleu":
        return metrics.corpus_bleu(hyps, refs).score
    return metrics.corpus_wer(hyps, refs)


def _mean_length(hyps):
    return sum(len(h) for h in hyps) / len(hyps)


def _quality_rows(cfg, top1, refs):
    rows = []
    for system in cfg.systems:
        for norm in cfg.normalizations:
            for width in cfg.widths:
                hyps = top1[(system, width, norm)]
                rows.append({
                    "system": system,
                    "normalization": search.format_normalization(norm),
                    "width": width,
                    "score": _corpus_score(cfg, hyps, refs),
                    "mean_hyp_len": _mean_length(hyps),
                })
    return rows


def _rows_to_csv(header, rows, keys, config_hash):
    lines = [_hash_comment(config_hash) + header]
    for row in rows:
        cells = []
        for key in keys:
            value = row[key]
            if isinstance(value, str):
                cells.append(value)
            elif isinstance(value, bool) or value is None:
                cells.append("" if value is None else repr(value))
            elif isinstance(value, int):
                cells.append("%d" % value)
            else:
                cells.append(repr(value))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def _bucket_rows(cfg, top1, refs):
    rows = []
    for system in cfg.systems:
        for norm in cfg.normalizations:
            for width in cfg.widths:
                report = analysis.bucket_quality(
                    top1[(system, width, norm)], refs,
                    edges=cfg.bucket_edges, metric=cfg.metric)
                for b in report.buckets:
                    rows.append({
                        "system": system,
                        "normalization": search.format_normalization(norm),
                        "width": width,
                        "bucket_low": b.low,
                        "bucket_high": None if b.high == float("inf")
                        else b.high,
                        "count": b.count,
                        "metric": b.metric,
                    })
    return rows


def _bucket_csv_rows(rows):
    # CSV spells the unbounded edge as inf so every cell stays numeric
    out = []
    for row in rows:
        fixed = dict(row)
        if fixed["bucket_high"] is None:
            fixed["bucket_high"] = float("inf")
        out.append(fixed)
    return out


def _sweep_rows(cfg, base_train, sources, refs, jobs):
    rows = []
    none_norm = search.parse_normalization("none")
    for n in cfg.n_sweep:
        corpus = augment.msr(base_train, augment.MsrConfig(
            n_max=n, multiplier=cfg.multiplier, seed=cfg.seed + 1))
        swept = _train_model(cfg, corpus)
        vocab = swept.target_vocab
        for width in cfg.widths:
            beam = search.BeamConfig(width=width, normalization=none_norm,
                                     max_len_a=cfg.max_len_a,
                                     max_len_b=cfg.max_len_b)
            results = search.decode_corpus(swept, sources, beam, jobs=jobs)
            hyps = [vocab.decode(list(r.hypotheses[0].tokens))
                    for r in results]
            rows.append({"n": n, "width": width,
                         "score": _corpus_score(cfg, hyps, refs),
                         "mean_hyp_len": _mean_length(hyps)})
    return rows


def _utc_now():
    return datetime.now(timezone.utc).isoformat()


def run_experiment(config_path, out_dir, jobs=1, seed_override=None):
    """Run the full pipeline under out_dir and return the manifest. Any
    stage failure writes failed/error.txt naming the stage, keeps whatever
    partial outputs exist, and re-raises."""
    raw = _read_config_bytes(config_path)
    try:
        cfg = _config_from_blob(yaml.safe_load(raw))
    except yaml.YAMLError as exc:
        raise DataError("config %s is not valid YAML: %s"
                        % (config_path, exc)) from None
    if seed_override is not None:
        cfg = replace(cfg, seed=seed_override,
                      synth=replace(cfg.synth, seed=seed_override))

    out = os.fspath(out_dir)
    for sub in ("data", "models", "decodes", "reports"):
        os.makedirs(os.path.join(out, sub), exist_ok=True)
    config_hash = hashlib.sha256(raw).hexdigest()
    write_bytes_atomic(os.path.join(out, "config.yaml"), raw)
    created = _utc_now()

    artifacts = {"data": {}, "models": {}, "decodes": [], "reports": []}
    stage = "gen-synth"
    try:
        splits = generate_synthetic(cfg.synth)
        for name, corpus in splits.items():
            src = "data/%s.src" % name
            tgt = "data/%s.tgt" % name
            save_corpus(corpus, os.path.join(out, src), os.path.join(out, tgt))
            artifacts["data"]["%s_src" % name] = src
            artifacts["data"]["%s_tgt" % name] = tgt

        stage = "augment"
        train_corpora = _augmented_corpora(cfg, splits["train"])
        for system in cfg.systems:
            if system == "baseline":
                continue
            stem = "data/train_%s" % system
            save_corpus(train_corpora[system],
                        os.path.join(out, stem + ".src"),
                        os.path.join(out, stem + ".tgt"))
            augment.save_provenance(train_corpora[system],
                                    os.path.join(out, stem + ".prov"))
            for ext in (".src", ".tgt", ".prov"):
                artifacts["data"]["train_%s%s"
                                  % (system, ext.lstrip("."))] = stem + ext

        stage = "train"
        models = {}
        for system in cfg.systems:
            models[system] = _train_model(cfg, train_corpora[system])
            rel = "models/%s.json" % system
            model_mod.save_model(models[system], os.path.join(out, rel))
            artifacts["models"][system] = rel

        stage = "decode"
        sources = [pair.source for pair in splits["test"]]
        refs = [pair.target for pair in splits["test"]]
        top1, results = _decode_grid(cfg, models, sources, jobs)
        for (system, width, norm), reranked in sorted(
                results.items(), key=lambda kv: (kv[0][0], kv[0][1],
                                                 _norm_slug(kv[0][2]))):
            rel = "decodes/%s_w%d_%s.tsv" % (system, width, _norm_slug(norm))
            text = search.format_decode_tsv(
                reranked, models[system].target_vocab, topk=cfg.topk)
            write_text_atomic(os.path.join(out, rel), text)
            artifacts["decodes"].append(rel)

        stage = "evaluate"
        quality = _quality_rows(cfg, top1, refs)
        rel = "reports/quality_curve.csv"
        write_text_atomic(os.path.join(out, rel), _rows_to_csv(
            "system,normalization,width,score,mean_hyp_len", quality,
            ("system", "normalization", "width", "score", "mean_hyp_len"),
            config_hash))
        artifacts["reports"].append(rel)
        rel = "reports/quality_curve.json"
        write_json_atomic(os.path.join(out, rel), {
            "config_hash": config_hash, "metric": cfg.metric,
            "rows": quality})
        artifacts["reports"].append(rel)

        stage = "analyze"
        small_w, large_w = cfg.category_pair
        for system in cfg.systems:
            for norm in cfg.normalizations:
                cats = analysis.classify(top1[(system, small_w, norm)],
                                         top1[(system, large_w, norm)],
                                         refs, metric=cfg.metric)
                report = analysis.category_report(
                    cats, top1[(system, small_w, norm)],
                    top1[(system, large_w, norm)], refs, metric=cfg.metric)
                stem = "reports/categories_%s_%s" % (system, _norm_slug(norm))
                write_text_atomic(
                    os.path.join(out, stem + ".csv"),
                    _hash_comment(config_hash)
                    + analysis.category_report_to_csv(report))
                write_json_atomic(os.path.join(out, stem + ".json"), {
                    "config_hash": config_hash,
                    "system": system,
                    "normalization": search.format_normalization(norm),
                    "width_small": small_w,
                    "width_large": large_w,
                    "report": analysis.category_report_blob(report)})
                artifacts["reports"].append(stem + ".csv")
                artifacts["reports"].append(stem + ".json")

        bucket_rows = _bucket_rows(cfg, top1, refs)
        rel = "reports/buckets.csv"
        write_text_atomic(os.path.join(out, rel), _rows_to_csv(
            "system,normalization,width,bucket_low,bucket_high,count,metric",
            _bucket_csv_rows(bucket_rows),
            ("system", "normalization", "width", "bucket_low", "bucket_high",
             "count", "metric"), config_hash))
        artifacts["reports"].append(rel)
        rel = "reports/buckets.json"
        write_json_atomic(os.path.join(out, rel), {
            "config_hash": config_hash, "metric": cfg.metric,
            "edges": list(cfg.bucket_edges), "rows": bucket_rows})
        artifacts["reports"].append(rel)

        for system in cfg.systems:
            hist = length_histogram(train_corpora[system], "target",
                                    cfg.histogram_bucket_width)
            rel = "reports/length_histogram_%s.csv" % system
            write_text_atomic(os.path.join(out, rel),
                              _hash_comment(config_hash) + hist.to_csv())
            artifacts["reports"].append(rel)

        if cfg.n_sweep:
            stage = "n-sweep"
            sweep = _sweep_rows(cfg, splits["train"], sources, refs, jobs)
            rel = "reports/n_sweep.csv"
            write_text_atomic(os.path.join(out, rel), _rows_to_csv(
                "n,width,score,mean_hyp_len", sweep,
                ("n", "width", "score", "mean_hyp_len"), config_hash))
            artifacts["reports"].append(rel)
            rel = "reports/n_sweep.json"
            write_json_atomic(os.path.join(out, rel), {
                "config_hash": config_hash, "metric": cfg.metric,
                "multiplier": cfg.multiplier, "rows": sweep})
            artifacts["reports"].append(rel)
    except BaseException as exc:
        failed_dir = os.path.join(out, "failed")
        os.makedirs(failed_dir, exist_ok=True)
        write_text_atomic(os.path.join(failed_dir, "error.txt"),
                          "stage: %s\nerror: %r\n" % (stage, exc))
        raise

    manifest = {
        "format": "beamlab.manifest",
        "format_version": 1,
        "tool_version": __version__,
        "created_utc": created,
        "completed_utc": _utc_now(),
        "seed": cfg.seed,
        "jobs": jobs,
        "config_hash": config_hash,
        "config_snapshot": "config.yaml",
        "systems": list(cfg.systems),
        "artifacts": artifacts,
    }
    write_json_atomic(os.path.join(out, "manifest.json"), manifest)
    return manifest
