"""Pipeline CLI: neutralize -> generate -> analyze -> attribute -> debias -> report.

Each stage writes its artifacts atomically into the run directory and
records its parameters in the run manifest; a stage refuses to run before
its predecessor (exit 2) or with parameters conflicting with what the
manifest recorded (exit 3). The API key is only ever read from an
environment variable.
"""
from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click

from . import analysis as an
from . import manifest as mf
from .attribution import AttributionParams, attribute_tokens
from .corpus import Biography, CorpusConfig, filter_and_sample, load_corpus, split_sentences
from .debias import DebiasParams, debias_baseline, debias_cot
from .errors import AuditError, StageError
from .llm import LlmClient, LlmParams
from .neutralize import anonymize, neutralize
from .prompts import Identity, build_prompts, identity_sort_key
from .regard import HttpRegardScorer, LexiconRegardScorer, group_diff
from .report import render_frequency_bars, render_markdown_summary, render_tsne_scatter
from .tsne import TsneParams, tsne

ALL_IDENTITIES = ",".join(i.value for i in Identity)


def _stage_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except StageError as err:
            click.echo(f"error: {err}", err=True)
            sys.exit(err.exit_code)
        except (AuditError, ValueError, OSError) as err:
            click.echo(f"error: {err}", err=True)
            sys.exit(1)
    return wrapper


def _regard_scorer(backend: str, endpoint: str | None):
    if backend == "lexicon":
        return LexiconRegardScorer()
    if backend == "http":
        if not endpoint:
            raise StageError("http regard backend requires --regard-endpoint", 1)
        return HttpRegardScorer(endpoint)
    raise StageError(f"unknown regard backend {backend!r}", 1)


def _parse_identities(spec: str) -> list[Identity]:
    try:
        return [Identity(v.strip()) for v in spec.split(",") if v.strip()]
    except ValueError as exc:
        raise StageError(f"unknown identity in --identities: {exc}", 1) from exc


def _sorted_generations(manifest: mf.RunManifest) -> list[dict]:
    records = mf.read_jsonl(manifest.path(mf.GENERATIONS_FILE))
    records.sort(key=lambda r: (r["bio_id"], identity_sort_key(r["identity"])))
    return records


@click.group()
def main() -> None:
    """Audit representational bias in LLM completions."""


# --------------------------------------------------------------------------
# neutralize


@main.command("neutralize")
@click.option("--corpus", "corpus_path", required=True, type=click.Path())
@click.option("--run-dir", required=True, type=click.Path())
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--min-sentences", default=4, show_default=True, type=int)
@click.option("--max-sentences", default=9, show_default=True, type=int)
@click.option("--sample-size", default=200, show_default=True, type=int)
@click.option("--annotations", "annotations_path", type=click.Path(), default=None,
              help="JSONL of person-name spans: {id, start, end} byte offsets.")
@_stage_errors
def neutralize_cmd(corpus_path, run_dir, seed, min_sentences, max_sentences,
                   sample_size, annotations_path):
    """Sample biographies, anonymize names, and gender-neutralize them."""
    bios = load_corpus(corpus_path)
    cfg = CorpusConfig(min_sentences=min_sentences, max_sentences=max_sentences,
                       sample_size=sample_size, seed=seed)
    sampled = filter_and_sample(bios, cfg)

    spans_by_id: dict[str, list[tuple[int, int]]] = {}
    if annotations_path:
        for rec in mf.read_jsonl(Path(annotations_path)):
            spans_by_id.setdefault(rec["id"], []).append((rec["start"], rec["end"]))

    config = {
        "seed": seed,
        "min_sentences": min_sentences,
        "max_sentences": max_sentences,
        "sample_size": sample_size,
        "annotations": annotations_path is not None,
    }
    run = Path(run_dir)
    run.mkdir(parents=True, exist_ok=True)
    existing = (run / mf.MANIFEST_FILE).is_file()
    if existing:
        manifest = mf.RunManifest.load(run, "neutralize")
        manifest.check_config("neutralize", config)
    else:
        manifest = mf.RunManifest.create(run, mf.file_digest(corpus_path), config)

    records = []
    for bio in sampled:
        masked = anonymize(bio.text, spans_by_id.get(bio.id))
        neutral = neutralize(masked.text)
        records.append({
            "id": bio.id,
            "text": neutral.text,
            "sentence_count": len(split_sentences(neutral.text)),
            "entities_masked": masked.entities_masked,
            "applied": {
                "anonymize": [vars(s) for s in masked.applied],
                "neutralize": [vars(s) for s in neutral.applied],
            },
        })
    mf.write_jsonl(manifest.path(mf.NEUTRAL_FILE), records, manifest.digest)
    manifest.record_stage("neutralize", config)
    click.echo(f"neutralize: {len(records)} biographies -> {manifest.path(mf.NEUTRAL_FILE)}")


# --------------------------------------------------------------------------
# generate


@main.command("generate")
@click.option("--run-dir", required=True, type=click.Path())
@click.option("--mode", type=click.Choice(["live", "record", "replay"]),
              default="replay", show_default=True)
@click.option("--endpoint", default="https://api.openai.com/v1/completions",
              show_default=True)
@click.option("--model", required=True)
@click.option("--temperature", default=0.7, show_default=True, type=float)
@click.option("--max-tokens", default=128, show_default=True, type=int)
@click.option("--cache-dir", type=click.Path(), default=None,
              help="Completion cache; defaults to <run-dir>/llm_cache.")
@click.option("--identities", default=ALL_IDENTITIES, show_default=True)
@click.option("--api-key-env", default="OPENAI_API_KEY", show_default=True)
@click.option("--max-in-flight", default=4, show_default=True, type=int)
@_stage_errors
def generate_cmd(run_dir, mode, endpoint, model, temperature, max_tokens,
                 cache_dir, identities, api_key_env, max_in_flight):
    """Build identity prompts and collect completions."""
    manifest = mf.RunManifest.load(run_dir, "generate")
    manifest.require_predecessor("generate")
    idents = _parse_identities(identities)

    params = LlmParams(model=model, temperature=temperature,
                       max_tokens=max_tokens, endpoint=endpoint)
    cache = Path(cache_dir) if cache_dir else manifest.path("llm_cache")
    client = LlmClient(params, mode=mode, cache_dir=cache,
                       api_key_env=api_key_env, max_in_flight=max_in_flight)

    prompts = []
    for rec in mf.read_jsonl(manifest.path(mf.NEUTRAL_FILE)):
        prompts.extend(build_prompts(rec["id"], rec["text"], idents))
    mf.write_jsonl(
        manifest.path(mf.PROMPTS_FILE),
        [{"bio_id": p.bio_id, "identity": p.identity.value, "text": p.text}
         for p in prompts],
        manifest.digest)

    generations = client.complete_many(prompts)
    mf.write_jsonl(
        manifest.path(mf.GENERATIONS_FILE),
        [vars(g) for g in generations],
        manifest.digest)

    config = {"model": model, "temperature": temperature,
              "max_tokens": max_tokens, "identities": identities}
    manifest.record_stage("generate", config, backends={
        "llm": {"model": model, "endpoint": endpoint, "mode": mode,
                "cache_dir": str(cache)}})
    cached = sum(1 for g in generations if g.from_cache)
    click.echo(f"generate: {len(generations)} completions ({cached} from cache)")


# --------------------------------------------------------------------------
# analyze


@main.command("analyze")
@click.option("--run-dir", required=True, type=click.Path())
@click.option("--regard-backend", type=click.Choice(["lexicon", "http"]),
              default="lexicon", show_default=True)
@click.option("--regard-endpoint", default=None)
@click.option("--perplexity", default=30.0, show_default=True, type=float)
@click.option("--tsne-iterations", default=1000, show_default=True, type=int)
@click.option("--tsne-learning-rate", default=200.0, show_default=True, type=float)
@click.option("--tsne-seed", default=0, show_default=True, type=int)
@click.option("--pmi-min-count", default=5, show_default=True, type=int)
@click.option("--pmi-alpha", default=1.0, show_default=True, type=float)
@_stage_errors
def analyze_cmd(run_dir, regard_backend, regard_endpoint, perplexity,
                tsne_iterations, tsne_learning_rate, tsne_seed,
                pmi_min_count, pmi_alpha):
    """Frequencies, PMI, TF-IDF cosine, t-SNE, and regard differences."""
    manifest = mf.RunManifest.load(run_dir, "analyze")
    manifest.require_predecessor("analyze")
    records = _sorted_generations(manifest)
    digest = manifest.digest
    out_dir = manifest.path(mf.ANALYSIS_DIR)
    out_dir.mkdir(parents=True, exist_ok=True)

    texts_by_label: dict[str, list[str]] = {}
    for rec in records:
        texts_by_label.setdefault(rec["identity"], []).append(rec["text"])
    labels = sorted(texts_by_label, key=identity_sort_key)

    table = an.frequencies(texts_by_label)
    rows = []
    for label in labels:
        ranked = sorted(table.counts[label].items(), key=lambda kv: (-kv[1], kv[0]))
        rows.extend((label, word, count) for word, count in ranked)
    mf.write_csv(out_dir / "frequencies.csv", ["label", "word", "count"], rows, digest)

    entries = an.pmi(texts_by_label, min_count=pmi_min_count, alpha=pmi_alpha)
    entries.sort(key=lambda e: (identity_sort_key(e.label), -e.pmi_bits, e.word))
    mf.write_csv(out_dir / "pmi.csv", ["label", "word", "pmi_bits"],
                 [(e.label, e.word, mf.fmt_float(e.pmi_bits)) for e in entries],
                 digest)

    docs = [((rec["bio_id"], rec["identity"]), rec["text"]) for rec in records]
    matrix = an.tfidf(docs)
    stats = an.mean_group_cosine(matrix)
    stats.sort(key=lambda s: identity_sort_key(s.identity))
    mf.write_csv(out_dir / "similarity.csv", ["identity", "mean_cosine", "n"],
                 [(s.identity, mf.fmt_float(s.mean_cosine), s.n) for s in stats],
                 digest)

    result = tsne(matrix.rows, TsneParams(
        perplexity=perplexity, learning_rate=tsne_learning_rate,
        iterations=tsne_iterations, seed=tsne_seed))
    mf.write_csv(
        out_dir / "tsne.csv", ["bio_id", "identity", "x", "y"],
        [(bio, ident, mf.fmt_float(x), mf.fmt_float(y))
         for (bio, ident), (x, y) in zip(matrix.doc_keys, result.coords)],
        digest)
    mf.write_csv(out_dir / "tsne_kl.csv", ["iteration", "kl"],
                 [(it, mf.fmt_float(kl)) for it, kl in result.checkpoints], digest)

    scorer = _regard_scorer(regard_backend, regard_endpoint)
    scores = scorer.score_many([rec["text"] for rec in records])
    diff_rows = group_diff([(rec["identity"], score)
                            for rec, score in zip(records, scores)])
    mf.write_csv(out_dir / "regard_diff.csv",
                 ["identity", "mean_scalar", "diff_vs_control", "n"],
                 [(r.identity, mf.fmt_float(r.mean_scalar),
                   mf.fmt_float(r.diff_vs_control), r.n) for r in diff_rows],
                 digest)

    config = {"regard_backend": regard_backend, "perplexity": perplexity,
              "tsne_iterations": tsne_iterations,
              "tsne_learning_rate": tsne_learning_rate, "tsne_seed": tsne_seed,
              "pmi_min_count": pmi_min_count, "pmi_alpha": pmi_alpha}
    manifest.record_stage("analyze", config, backends={
        "regard": {"backend": regard_backend, "endpoint": regard_endpoint}})
    click.echo(f"analyze: wrote {out_dir}/*.csv for {len(records)} completions")


# --------------------------------------------------------------------------
# attribute


@main.command("attribute")
@click.option("--run-dir", required=True, type=click.Path())
@click.option("--attribution-mode", type=click.Choice(["exact", "sampled"]),
              default="sampled", show_default=True)
@click.option("--samples", default=2000, show_default=True, type=int)
@click.option("--attribution-seed", default=0, show_default=True, type=int)
@click.option("--k", default=5, show_default=True, type=int)
@click.option("--mask-strategy", type=click.Choice(["delete", "mask_token"]),
              default="delete", show_default=True)
@click.option("--exact-cap", default=20, show_default=True, type=int)
@click.option("--regard-backend", type=click.Choice(["lexicon", "http"]),
              default="lexicon", show_default=True)
@click.option("--regard-endpoint", default=None)
@_stage_errors
def attribute_cmd(run_dir, attribution_mode, samples, attribution_seed, k,
                  mask_strategy, exact_cap, regard_backend, regard_endpoint):
    """Shapley attribution of negative regard to completion tokens."""
    manifest = mf.RunManifest.load(run_dir, "attribute")
    manifest.require_predecessor("attribute")
    records = _sorted_generations(manifest)
    scorer = _regard_scorer(regard_backend, regard_endpoint)
    params = AttributionParams(mode=attribution_mode, samples=samples,
                               seed=attribution_seed, mask_strategy=mask_strategy,
                               exact_cap=exact_cap)

    out = []
    for rec in records:
        tokens = rec["text"].split()
        if not tokens:
            continue
        attribs = attribute_tokens(tokens, scorer, params)
        selected = {a.index for a in sorted(
            (a for a in attribs if a.phi > 0), key=lambda a: (-a.phi, a.index))[:k]}
        sentence_id = f"{rec['bio_id']}:{rec['identity']}"
        out.extend({
            "sentence_id": sentence_id,
            "token": a.token,
            "index": a.index,
            "phi": a.phi,
            "selected": a.index in selected,
        } for a in attribs)
    mf.write_jsonl(manifest.path(mf.ATTRIBUTION_FILE), out, manifest.digest)

    config = {"attribution_mode": attribution_mode, "samples": samples,
              "attribution_seed": attribution_seed, "k": k,
              "mask_strategy": mask_strategy, "exact_cap": exact_cap,
              "regard_backend": regard_backend}
    manifest.record_stage("attribute", config)
    click.echo(f"attribute: {len(out)} token attributions")


# --------------------------------------------------------------------------
# debias


@main.command("debias")
@click.option("--run-dir", required=True, type=click.Path())
@click.option("--mode", type=click.Choice(["live", "record", "replay"]),
              default=None, help="Defaults to the generate stage's mode.")
@click.option("--endpoint", default=None)
@click.option("--model", default=None, help="Defaults to the generate stage's model.")
@click.option("--temperature", default=None, type=float)
@click.option("--max-tokens", default=None, type=int)
@click.option("--cache-dir", type=click.Path(), default=None)
@click.option("--api-key-env", default="OPENAI_API_KEY", show_default=True)
@click.option("--k", default=5, show_default=True, type=int)
@click.option("--skip-threshold", default=0.0, show_default=True, type=float)
@click.option("--min-gain", default=0.05, show_default=True, type=float)
@click.option("--min-similarity", default=0.5, show_default=True, type=float)
@click.option("--max-rounds", default=2, show_default=True, type=int)
@click.option("--attribution-mode", type=click.Choice(["exact", "sampled"]),
              default="sampled", show_default=True)
@click.option("--samples", default=2000, show_default=True, type=int)
@click.option("--attribution-seed", default=0, show_default=True, type=int)
@click.option("--regard-backend", type=click.Choice(["lexicon", "http"]),
              default="lexicon", show_default=True)
@click.option("--regard-endpoint", default=None)
@_stage_errors
def debias_cmd(run_dir, mode, endpoint, model, temperature, max_tokens,
               cache_dir, api_key_env, k, skip_threshold, min_gain,
               min_similarity, max_rounds, attribution_mode, samples,
               attribution_seed, regard_backend, regard_endpoint):
    """Rewrite low-regard completions (CoT loop and one-shot baseline)."""
    manifest = mf.RunManifest.load(run_dir, "debias")
    manifest.require_predecessor("debias")
    records = _sorted_generations(manifest)

    llm_info = manifest.data["backends"].get("llm", {})
    gen_cfg = manifest.stage_config("generate") or {}
    params = LlmParams(
        model=model or gen_cfg.get("model") or llm_info.get("model"),
        temperature=temperature if temperature is not None
        else gen_cfg.get("temperature", 0.7),
        max_tokens=max_tokens if max_tokens is not None
        else gen_cfg.get("max_tokens", 128),
        endpoint=endpoint or llm_info.get("endpoint"),
    )
    client = LlmClient(
        params,
        mode=mode or llm_info.get("mode", "replay"),
        cache_dir=cache_dir or llm_info.get("cache_dir"),
        api_key_env=api_key_env,
    )

    scorer = _regard_scorer(regard_backend, regard_endpoint)
    attr_params = AttributionParams(mode=attribution_mode, samples=samples,
                                    seed=attribution_seed)
    debias_params = DebiasParams(k=k, skip_threshold=skip_threshold,
                                 min_gain=min_gain, min_similarity=min_similarity,
                                 max_rounds=max_rounds)

    before = {(r["bio_id"], r["identity"]): s.scalar for r, s in zip(
        records, scorer.score_many([r["text"] for r in records]))}

    out_records = []
    effective = {"baseline": {}, "cot": {}}
    processed = 0
    for rec in records:
        key = (rec["bio_id"], rec["identity"])
        effective["baseline"][key] = before[key]
        effective["cot"][key] = before[key]
        if before[key] >= skip_threshold:
            continue
        processed += 1
        results = {
            "cot": debias_cot(rec["text"], client.complete_text, scorer,
                              attr_params, debias_params),
            "baseline": debias_baseline(rec["text"], client.complete_text,
                                        scorer, debias_params),
        }
        for method, res in results.items():
            if res.accepted:
                effective[method][key] = res.regard_after.scalar
            out_records.append({
                "bio_id": rec["bio_id"],
                "identity": rec["identity"],
                "method": method,
                "original": res.original,
                "low_words": list(res.low_words),
                "reason": res.reason,
                "rewritten": res.rewritten,
                "regard_before": res.regard_before.scalar,
                "regard_after": res.regard_after.scalar,
                "similarity": res.similarity,
                "accepted": res.accepted,
                "rounds_used": res.rounds_used,
                "skip_reason": res.skip_reason,
            })
    mf.write_jsonl(manifest.path(mf.DEBIAS_FILE), out_records, manifest.digest)

    identities = sorted({ident for _, ident in before}, key=identity_sort_key)

    def diff_for(scalars: dict, identity: str) -> float:
        control = [v for (b, i), v in scalars.items() if i == "control"]
        group = [v for (b, i), v in scalars.items() if i == identity]
        return sum(control) / len(control) - sum(group) / len(group)

    summary_rows = []
    for identity in identities:
        if identity == "control":
            continue
        summary_rows.append((
            identity,
            mf.fmt_float(diff_for(before, identity)),
            mf.fmt_float(diff_for(effective["baseline"], identity)),
            mf.fmt_float(diff_for(effective["cot"], identity)),
        ))
    mf.write_csv(manifest.path(mf.DEBIAS_SUMMARY_FILE),
                 ["identity", "original", "baseline", "cot"],
                 summary_rows, manifest.digest)

    config = {"k": k, "skip_threshold": skip_threshold, "min_gain": min_gain,
              "min_similarity": min_similarity, "max_rounds": max_rounds,
              "attribution_mode": attribution_mode, "samples": samples,
              "attribution_seed": attribution_seed,
              "regard_backend": regard_backend}
    manifest.record_stage("debias", config)
    accepted = sum(1 for r in out_records if r["accepted"])
    click.echo(f"debias: {processed} low-regard completions, "
               f"{accepted} accepted rewrites")


# --------------------------------------------------------------------------
# report


@main.command("report")
@click.option("--run-dir", required=True, type=click.Path())
@_stage_errors
def report_cmd(run_dir):
    """Render the markdown summary, SVG figures, and table CSVs."""
    manifest = mf.RunManifest.load(run_dir, "report")
    manifest.require_predecessor("report")
    digest = manifest.digest
    analysis_dir = manifest.path(mf.ANALYSIS_DIR)
    report_dir = manifest.path(mf.REPORT_DIR)
    report_dir.mkdir(parents=True, exist_ok=True)

    _, tsne_rows = mf.read_csv(analysis_dir / "tsne.csv")
    points = [(bio, ident, float(x), float(y)) for bio, ident, x, y in tsne_rows]
    render_tsne_scatter(points, report_dir / "tsne.svg", digest)

    _, freq_rows = mf.read_csv(analysis_dir / "frequencies.csv")
    top_words: dict[str, list[tuple[str, int]]] = {}
    for label, word, count in freq_rows:
        bucket = top_words.setdefault(label, [])
        if len(bucket) < 15:
            bucket.append((word, int(count)))
    render_frequency_bars(top_words, report_dir / "frequency_bars.svg", digest)

    _, sim_rows = mf.read_csv(analysis_dir / "similarity.csv")
    similarity = [(ident, float(c), int(n)) for ident, c, n in sim_rows]
    _, regard_rows_raw = mf.read_csv(analysis_dir / "regard_diff.csv")
    regard_rows = [(ident, float(m), float(d), int(n))
                   for ident, m, d, n in regard_rows_raw]

    sim_by_ident = {s[0]: s for s in similarity}
    table1 = []
    for ident, _, diff, n in regard_rows:
        if ident == "control":
            continue
        sim = sim_by_ident.get(ident)
        table1.append((ident,
                       mf.fmt_float(sim[1]) if sim else "",
                       mf.fmt_float(diff), n))
    mf.write_csv(report_dir / "table1.csv",
                 ["identity", "cosine_similarity", "regard_diff", "n"],
                 table1, digest)

    debias_records = mf.read_jsonl(manifest.path(mf.DEBIAS_FILE))
    _, summary_rows = mf.read_csv(manifest.path(mf.DEBIAS_SUMMARY_FILE))
    debias_summary = [(ident, float(o), float(b), float(c))
                      for ident, o, b, c in summary_rows]
    processed = len({(r["bio_id"], r["identity"]) for r in debias_records})
    accepted = sum(1 for r in debias_records if r["accepted"])
    if processed > 0:
        mf.write_csv(report_dir / "table3.csv",
                     ["identity", "original", "baseline", "cot"],
                     [(i, mf.fmt_float(o), mf.fmt_float(b), mf.fmt_float(c))
                      for i, o, b, c in debias_summary],
                     digest)

    generations = mf.read_jsonl(manifest.path(mf.GENERATIONS_FILE))
    counts: dict[str, int] = {}
    for rec in generations:
        counts[rec["identity"]] = counts.get(rec["identity"], 0) + 1
    n_bios = len({rec["bio_id"] for rec in generations})

    render_markdown_summary(
        report_dir / "summary.md", digest, n_bios, counts,
        regard_rows, similarity,
        debias_summary if processed > 0 else [],
        (processed, accepted))
    click.echo(f"report: wrote {report_dir}")


if __name__ == "__main__":
    main()
