"""Batch entry points. Each subcommand maps onto one library operation and
every run that trains or evaluates writes a manifest (config hash, input
hashes, library versions) plus its artifacts into runs/<timestamp>/.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import hashlib
import json
import os
import sys
from datetime import datetime, timezone

import click

from .agreement import (AgreementError, NominalAnnotations, char_level_alpha,
                        krippendorff_alpha, load_annotations)
from .corpus import (CorpusError, EmbeddingStore, default_weak_label_sets,
                     load_corpus, serialize_corpus, weak_label_liberty,
                     weak_label_stance)
from .evaluation import (EvaluationError, ablation_run, ablation_table,
                         cross_validate, default_ablation_subsets, make_folds,
                         pearson_matrix, smoke_plan, write_correlation_csv)
from .inference import InferenceError
from .reasons import DEFAULT_EMBED_DIM, CatalogError, final_catalog, initial_catalog
from .rules import RuleError, default_program, parse_program
from .scorers import ScorerError, load_params, save_params
from .training import (AnnotatedCorpus, EMConfig, TrainingError, em_train,
                       head_labels, init_distant, initial_suite, predict)

_RUNTIME_ERRORS = (CorpusError, RuleError, InferenceError, ScorerError,
                   TrainingError, EvaluationError, AgreementError,
                   CatalogError, OSError, ValueError, KeyError)


def _fail(message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(1)


def _run_guarded(fn):
    try:
        fn()
    except _RUNTIME_ERRORS as e:
        _fail(str(e))


# ---------------------------------------------------------------------------
# file formats

def read_label_atoms(path) -> dict:
    """JSONL of {"predicate": ..., "args": [...], "label": ...} records."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            obj = json.loads(raw)
            try:
                key = (str(obj["predicate"]), tuple(str(a) for a in obj["args"]))
                out[key] = obj["label"]
            except (KeyError, TypeError) as e:
                raise CorpusError(f"{path}:{line_no}: bad label record ({e})")
    return out


def write_label_atoms(labels: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for (pred, args), label in sorted(labels.items(), key=lambda kv: (kv[0][0], kv[0][1])):
            fh.write(json.dumps({"predicate": pred, "args": list(args),
                                 "label": label}, ensure_ascii=False) + "\n")


def read_reason_assignments(path) -> dict:
    """JSONL of {"tweet_id": ..., "reason_id": ...} records."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            if raw.strip():
                obj = json.loads(raw)
                out[str(obj["tweet_id"])] = str(obj["reason_id"])
    return out


def _load_annotated(corpus_path, labels_path, reasons_path) -> AnnotatedCorpus:
    corpus = load_corpus(corpus_path)
    if corpus.errors:
        _fail(f"{len(corpus.errors)} malformed corpus lines; run ingest for details")
    gold = read_label_atoms(labels_path) if labels_path else {}
    reasons = read_reason_assignments(reasons_path) if reasons_path else {}
    return AnnotatedCorpus(tuple(corpus.tweets), gold, reasons)


def _training_inputs(corpus_path, labels_path, reasons_path, synthetic, seed):
    """Either file-backed data or the planted generator, plus distant corpora."""
    from . import synthetic as syn

    if synthetic:
        if corpus_path or labels_path or reasons_path:
            raise click.UsageError("--synthetic excludes --corpus/--labels/--reasons")
        return syn.make_synthetic(synthetic, seed=seed), syn.make_distant()
    if not corpus_path or not labels_path:
        raise click.UsageError("need --corpus and --labels (or --synthetic N)")
    return _load_annotated(corpus_path, labels_path, reasons_path), None


def _load_rules(path):
    if not path:
        return default_program()
    with open(path, encoding="utf-8") as fh:
        return parse_program(fh.read())


# ---------------------------------------------------------------------------
# run directories

def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _versions() -> dict:
    import numpy
    import scipy
    try:
        from importlib.metadata import version
        own = version("opinionlab")
    except Exception:
        own = "unknown"
    return {"opinionlab": own, "python": sys.version.split()[0],
            "numpy": numpy.__version__, "scipy": scipy.__version__}


def start_run(runs_root, command: str, config: dict, inputs: dict) -> str:
    """Create runs/<timestamp>/ and write its manifest; returns the directory."""
    stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%S")
    run_dir = os.path.join(str(runs_root), stamp)
    n = 1
    while os.path.exists(run_dir):
        run_dir = os.path.join(str(runs_root), f"{stamp}-{n}")
        n += 1
    os.makedirs(run_dir)
    config_blob = json.dumps(config, sort_keys=True, default=str)
    manifest = {
        "command": command,
        "created": datetime.now(timezone.utc).isoformat(),
        "config": json.loads(config_blob),
        "config_hash": hashlib.sha256(config_blob.encode()).hexdigest(),
        "inputs": {name: {"path": str(p), "sha256": _sha256(p)}
                   for name, p in inputs.items() if p},
        "versions": _versions(),
    }
    with open(os.path.join(run_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return run_dir


def _write_suite_meta(run_dir, config: EMConfig, reasons) -> None:
    with open(os.path.join(run_dir, "suite.json"), "w") as fh:
        json.dump({"hash_bits": config.hash_bits,
                   "embedding_dim": config.embedding_dim,
                   "weight_mode": config.weight_mode,
                   "reasons": sorted(reasons)}, fh, indent=2)


def _load_suite(params_dir, program, config_overrides=None):
    """Rebuild a ScorerSuite from a train run's final checkpoint directory."""
    from .inference import ScorerSuite
    from .scorers import space_for_program

    meta_path = os.path.join(str(params_dir), "suite.json")
    if not os.path.exists(meta_path):
        meta_path = os.path.join(os.path.dirname(str(params_dir)), "suite.json")
    if not os.path.exists(meta_path):
        raise CorpusError(f"no suite.json next to {params_dir}")
    with open(meta_path) as fh:
        meta = json.load(fh)
    space = space_for_program(program, hash_bits=meta["hash_bits"],
                              embedding_dim=meta["embedding_dim"],
                              reasons=tuple(meta["reasons"]))
    params = {}
    for template in program.templates:
        path = os.path.join(str(params_dir), f"{template.id}.scorer")
        if not os.path.exists(path):
            raise CorpusError(f"missing scorer file {path}")
        params[template.id] = load_params(path, head_labels(program, template))
    return ScorerSuite(space, params, None, meta["weight_mode"])


# ---------------------------------------------------------------------------
# commands

@click.group()
@click.version_option(package_name="opinionlab")
def main():
    """Opinion analysis pipeline: rules, inference, training, workbench."""


@main.command()
@click.argument("corpus_path", type=click.Path(exists=True))
@click.option("--out", type=click.Path(), help="write the canonical JSONL here")
def ingest(corpus_path, out):
    """Parse and validate a tweet corpus; report malformed lines."""
    def run():
        corpus = load_corpus(corpus_path)
        for err in corpus.errors:
            click.echo(f"line {err.line_no}: {err.message}", err=True)
        if out:
            with open(out, "w", encoding="utf-8") as fh:
                fh.write(serialize_corpus(corpus.tweets))
        click.echo(json.dumps({"tweets": len(corpus.tweets),
                               "malformed": len(corpus.errors)}))
        if corpus.errors:
            sys.exit(1)
    _run_guarded(run)


@main.command("weak-label")
@click.argument("corpus_path", type=click.Path(exists=True))
@click.option("--out", type=click.Path(), help="write JSONL here instead of stdout")
def weak_label(corpus_path, out):
    """Hashtag stance and liberty-lexicon weak labels per tweet."""
    def run():
        corpus = load_corpus(corpus_path)
        sets = default_weak_label_sets()
        lines = []
        for t in corpus.tweets:
            lines.append(json.dumps({
                "tweet_id": t.id,
                "stance": weak_label_stance(t, sets),
                "liberty": weak_label_liberty(t, sets),
            }, ensure_ascii=False))
        text = "\n".join(lines) + ("\n" if lines else "")
        if out:
            with open(out, "w", encoding="utf-8") as fh:
                fh.write(text)
        else:
            click.echo(text, nl=False)
    _run_guarded(run)


def _data_options(fn):
    fn = click.option("--corpus", "corpus_path", type=click.Path(exists=True),
                      help="tweet corpus JSONL")(fn)
    fn = click.option("--labels", "labels_path", type=click.Path(exists=True),
                      help="gold label atoms JSONL")(fn)
    fn = click.option("--reasons", "reasons_path", type=click.Path(exists=True),
                      help="reason assignment JSONL")(fn)
    fn = click.option("--synthetic", type=int, default=0,
                      help="use the planted generator with this many tweets")(fn)
    fn = click.option("--rules", "rules_path", type=click.Path(exists=True),
                      help="rule program (default: the shipped one)")(fn)
    fn = click.option("--seed", type=int, default=13, show_default=True)(fn)
    fn = click.option("--runs-root", type=click.Path(), default="runs",
                      show_default=True)(fn)
    return fn


@main.command()
@_data_options
@click.option("--k", type=float, default=0.25, show_default=True,
              help="fraction of gold labels seeded during inference")
@click.option("--max-iters", type=int, default=5, show_default=True)
@click.option("--hash-bits", type=int, default=12, show_default=True)
def train(corpus_path, labels_path, reasons_path, synthetic, rules_path, seed,
          runs_root, k, max_iters, hash_bits):
    """Alternating inference/retraining on an annotated corpus."""
    def run():
        program = _load_rules(rules_path)
        corpus, distant = _training_inputs(corpus_path, labels_path,
                                           reasons_path, synthetic, seed)
        config = EMConfig(seed_fraction=k, max_iters=max_iters, seed=seed,
                          hash_bits=hash_bits)
        run_dir = start_run(runs_root, "train",
                            {"k": k, "max_iters": max_iters, "seed": seed,
                             "hash_bits": hash_bits, "synthetic": synthetic,
                             "rules": rules_path or "default"},
                            {"corpus": corpus_path, "labels": labels_path,
                             "reasons": reasons_path, "rules": rules_path})
        suite = initial_suite(program, config, reasons=corpus.reason_ids())
        if distant is not None:
            suite = init_distant(suite, distant, program, config)
        suite, trace = em_train(program, corpus, suite, config, run_dir=run_dir)
        final_dir = os.path.join(run_dir, "checkpoints", "final")
        os.makedirs(final_dir, exist_ok=True)
        for tid, params in sorted(suite.params.items()):
            save_params(params, os.path.join(final_dir, f"{tid}.scorer"))
        _write_suite_meta(final_dir, config, corpus.reason_ids())
        last = trace[-1]
        click.echo(json.dumps({"run_dir": run_dir, "iterations": last.iteration,
                               "label_change_fraction": last.label_change_fraction,
                               "map_objective": last.map_objective}))
    _run_guarded(run)


@main.command()
@click.option("--corpus", "corpus_path", type=click.Path(exists=True), required=True)
@click.option("--rules", "rules_path", type=click.Path(exists=True))
@click.option("--params", "params_dir", type=click.Path(exists=True),
              help="scorer directory from a train run (checkpoints/final)")
@click.option("--reasons", "reasons_path", type=click.Path(exists=True))
@click.option("--out", type=click.Path(), help="write nested JSON here")
@click.option("--atoms-out", type=click.Path(), help="also write flat label atoms")
def infer(corpus_path, rules_path, params_dir, reasons_path, out, atoms_out):
    """Joint MAP prediction over a corpus; prints per-tweet JSON."""
    def run():
        program = _load_rules(rules_path)
        corpus = load_corpus(corpus_path)
        if corpus.errors:
            _fail(f"{len(corpus.errors)} malformed corpus lines")
        reasons = read_reason_assignments(reasons_path) if reasons_path else {}
        if params_dir:
            suite = _load_suite(params_dir, program)
        else:
            click.echo("note: no --params given; using random scorers", err=True)
            suite = initial_suite(program, EMConfig(),
                                  reasons=tuple(sorted(set(reasons.values()))))
        result = predict(program, corpus.tweets, suite,
                         reason_assignments=reasons)
        owners = {m.id: t.id for t in corpus.tweets for m in t.mentions}
        nested: dict = {t.id: {"mentions": {m.id: {} for m in t.mentions}}
                        for t in corpus.tweets}
        for (pred, args), label in result.labels.items():
            target = args[0]
            if target in owners:
                nested[owners[target]]["mentions"][target][pred] = label
            else:
                nested[target][pred] = label
        blob = json.dumps(nested, indent=2, sort_keys=True, ensure_ascii=False)
        if out:
            with open(out, "w", encoding="utf-8") as fh:
                fh.write(blob + "\n")
        else:
            click.echo(blob)
        if atoms_out:
            write_label_atoms(result.labels, atoms_out)
    _run_guarded(run)


@main.command("eval")
@_data_options
@click.option("--folds", type=int, default=5, show_default=True,
              help="cross-validation folds; 1 means in-sample")
@click.option("--k", type=float, default=0.25, show_default=True)
@click.option("--max-iters", type=int, default=5, show_default=True)
def eval_cmd(corpus_path, labels_path, reasons_path, synthetic, rules_path,
             seed, runs_root, folds, k, max_iters):
    """Cross-validated training and pooled per-task reports."""
    def run():
        program = _load_rules(rules_path)
        corpus, distant = _training_inputs(corpus_path, labels_path,
                                           reasons_path, synthetic, seed)
        config = EMConfig(seed_fraction=k, max_iters=max_iters, seed=seed)
        plan = (smoke_plan(corpus.tweet_ids()) if folds == 1
                else make_folds(corpus.tweet_ids(), folds, seed))
        run_dir = start_run(runs_root, "eval",
                            {"folds": folds, "k": k, "max_iters": max_iters,
                             "seed": seed, "synthetic": synthetic,
                             "rules": rules_path or "default"},
                            {"corpus": corpus_path, "labels": labels_path,
                             "reasons": reasons_path, "rules": rules_path})
        cv = cross_validate(corpus, program, config, plan, distant=distant,
                            run_dir=run_dir)
        for row in cv.summary_rows():
            click.echo("\t".join(str(c) for c in row))
        click.echo(f"reports in {os.path.join(run_dir, 'reports')}")
    _run_guarded(run)


@main.command()
@_data_options
@click.option("--folds", type=int, default=1, show_default=True)
@click.option("--k", type=float, default=1.0, show_default=True)
@click.option("--max-iters", type=int, default=5, show_default=True)
@click.option("--task", default="HasMF", show_default=True)
def ablate(corpus_path, labels_path, reasons_path, synthetic, rules_path, seed,
           runs_root, folds, k, max_iters, task):
    """Cross-validate each rule subset and print the comparison table."""
    def run():
        program = _load_rules(rules_path)
        corpus, distant = _training_inputs(corpus_path, labels_path,
                                           reasons_path, synthetic, seed)
        config = EMConfig(seed_fraction=k, max_iters=max_iters, seed=seed)
        plan = (smoke_plan(corpus.tweet_ids()) if folds == 1
                else make_folds(corpus.tweet_ids(), folds, seed))
        run_dir = start_run(runs_root, "ablate",
                            {"folds": folds, "k": k, "max_iters": max_iters,
                             "seed": seed, "task": task, "synthetic": synthetic,
                             "rules": rules_path or "default"},
                            {"corpus": corpus_path, "labels": labels_path,
                             "reasons": reasons_path, "rules": rules_path})
        results = ablation_run(corpus, program, default_ablation_subsets(program),
                               config, plan, distant=distant, run_dir=run_dir)
        rows = ablation_table(results, task)
        with open(os.path.join(run_dir, "ablation.csv"), "w") as fh:
            fh.write("\n".join(",".join(r) for r in rows) + "\n")
        for row in rows:
            click.echo("\t".join(row))
    _run_guarded(run)


@main.command()
@click.argument("annotations_path", type=click.Path(exists=True))
@click.option("--spans", is_flag=True, help="char-level alpha over role/polarity spans")
@click.option("--drop-all-none", is_flag=True,
              help="ignore characters no annotator labeled")
@click.option("--corpus", "corpus_path", type=click.Path(exists=True),
              help="tweet corpus supplying item texts for span mode")
def agreement(annotations_path, spans, drop_all_none, corpus_path):
    """Krippendorff alpha for an annotation file."""
    def run():
        texts = None
        if corpus_path:
            corpus = load_corpus(corpus_path)
            texts = {t.id: t.text for t in corpus.tweets}
        anns = load_annotations(annotations_path, texts)
        if spans:
            if isinstance(anns, NominalAnnotations):
                _fail("--spans given but the file holds nominal records")
            report = char_level_alpha(anns, drop_all_none=drop_all_none)
        else:
            if not isinstance(anns, NominalAnnotations):
                _fail("file holds span records; pass --spans")
            report = krippendorff_alpha(anns)
        click.echo(report.to_json())
    _run_guarded(run)


@main.command()
@click.argument("labels_path", type=click.Path(exists=True))
@click.option("--rows", required=True, help="predicate for the matrix rows")
@click.option("--cols", required=True, help="predicate for the matrix columns")
@click.option("--out", type=click.Path(), help="write the CSV here")
def correlate(labels_path, rows, cols, out):
    """Pearson correlations between two tasks' one-hot label indicators."""
    def run():
        atoms = read_label_atoms(labels_path)
        a = {args[0]: v for (pred, args), v in atoms.items() if pred == rows}
        b = {args[0]: v for (pred, args), v in atoms.items() if pred == cols}
        if not a or not b:
            _fail(f"no {rows!r} or no {cols!r} labels in {labels_path}")
        matrix = pearson_matrix(a, b)
        if out:
            write_correlation_csv(matrix, out)
        else:
            for row in matrix.csv_rows():
                click.echo(",".join(str(c) for c in row))
    _run_guarded(run)


@main.command()
@click.option("--corpus", "corpus_path", type=click.Path(exists=True), required=True)
@click.option("--catalog", type=click.Choice(["initial", "final"]),
              default="final", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--data-dir", type=click.Path(), help="session log directory")
@click.option("--threshold", type=float, default=None,
              help="default assignment similarity threshold")
def serve(corpus_path, catalog, port, data_dir, threshold):
    """Run the reason-workbench HTTP service."""
    def run():
        from .service import serve as run_service

        corpus = load_corpus(corpus_path)
        if corpus.errors:
            _fail(f"{len(corpus.errors)} malformed corpus lines")
        store = EmbeddingStore(DEFAULT_EMBED_DIM)
        cat = initial_catalog(store) if catalog == "initial" else final_catalog(store)
        run_service(list(corpus.tweets), cat, store, port=port,
                    data_dir=data_dir, threshold=threshold)
    _run_guarded(run)


if __name__ == "__main__":
    main()
