"""Command-line entry point wiring all the pieces together.

Exit codes: 0 success, 1 domain error, 2 usage error. All randomness
flows from one --seed per subcommand, fanned out into named sub-seeds.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import plots
from .errors import WorkbenchError
from .manifest import write_manifest
from .explain import METHOD_NAMES, make_explainer
from .model.checkpoint import load_checkpoint, save_checkpoint
from .model.network import QAModel
from .model.params import ModelConfig
from .model.training import evaluate_accuracy, train
from .pointing import (
    binomial_significance,
    build_hybrid_instances,
    expected_random_accuracy,
    pointing_game,
)
from .seeds import subseed
from .store import load_database, retrieve_facts, save_database, save_provenance
from .study import build_report, generate_tasks, load_tasks, load_votes, save_tasks
from .synth import SynthConfig, generate_synthetic_corpus

logger = logging.getLogger("factqa")


def _parse_methods(spec: str) -> list[str]:
    methods = [m.strip() for m in spec.split(",") if m.strip()]
    for m in methods:
        if m not in METHOD_NAMES:
            raise WorkbenchError(f"unknown method {m!r}; choose from "
                                 f"{','.join(METHOD_NAMES)}")
    if not methods:
        raise WorkbenchError("no methods given")
    return methods


def _load_model(path: str) -> tuple[QAModel, dict]:
    params, extra = load_checkpoint(path)
    return params, extra


# -- subcommands -----------------------------------------------------------


def cmd_gen(args) -> int:
    cfg = SynthConfig(
        entities=args.entities, relations=args.relations,
        facts_per_entity=args.facts_per_entity,
        queries_per_entity=args.queries_per_entity,
        vocab_size=args.vocab, text_fraction=args.text_fraction,
    )
    corpus = generate_synthetic_corpus(cfg, subseed(args.seed, "corpus"))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    facts_path = out / "facts.jsonl"
    prov_path = out / "provenance.jsonl"
    save_database(corpus.db, facts_path)
    save_provenance(corpus.planted, prov_path)
    write_manifest(out, "gen", vars(args) | {"func": None}, args.seed,
                   {"corpus": subseed(args.seed, "corpus")},
                   inputs=[], outputs=[facts_path, prov_path])
    sizes = corpus.db.sizes()
    print(f"wrote {facts_path} ({sizes[0]} entities, {sizes[1]} KB facts, "
          f"{sizes[2]} text facts, {len(corpus.db.queries)} queries)")
    return 0


def cmd_train(args) -> int:
    db = load_database(args.db)
    if args.config:
        cfg = ModelConfig.from_dict(json.loads(Path(args.config).read_text()))
        if args.epochs is not None:
            cfg = ModelConfig.from_dict(cfg.to_dict() | {"epochs": args.epochs})
    else:
        cfg = ModelConfig(
            embed_dim=args.dim, hops=args.hops, learning_rate=args.lr,
            epochs=args.epochs if args.epochs is not None else 30,
            seed=args.seed, batch_size=args.batch_size,
            holdout_fraction=args.holdout, hop_weights=args.hop_weights,
            text_cap=args.text_cap,
        )
    result = train(db, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ckpt_path = out / "model.ckpt"
    save_checkpoint(ckpt_path, result.params, extra={
        "heldout_query_ids": list(result.heldout_query_ids),
        "db_path": str(args.db),
    })
    history_path = out / "history.csv"
    with history_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=["epoch", "loss", "train_accuracy",
                                                "heldout_accuracy"])
        writer.writeheader()
        writer.writerows(result.history)
    curve_path = out / "training_curve.png"
    outputs = [ckpt_path, history_path]
    if result.history:
        plots.plot_training_curve(result.history, curve_path)
        outputs.append(curve_path)
    write_manifest(out, "train", {k: v for k, v in vars(args).items() if k != "func"},
                   cfg.seed, {"init": subseed(cfg.seed, "init"),
                              "split": subseed(cfg.seed, "split"),
                              "batches": subseed(cfg.seed, "batches")},
                   inputs=[args.db], outputs=outputs)
    if result.history:
        final = result.history[-1]
        print(f"trained {cfg.epochs} epochs: train_acc={final['train_accuracy']:.3f} "
              f"heldout_acc={final['heldout_accuracy']:.3f} -> {ckpt_path}")
    else:
        print(f"trained 0 epochs (initialization saved) -> {ckpt_path}")
    return 0


def cmd_answer(args) -> int:
    db = load_database(args.db)
    params, _ = _load_model(args.model)
    if args.query_id not in db.queries:
        raise WorkbenchError(f"unknown query id {args.query_id!r}")
    q = db.queries[args.query_id]
    facts = retrieve_facts(q, db, params.config.text_cap)
    model = QAModel(params, db)
    result = model.answer(q, facts)
    obj = {
        "query_id": q.query_id,
        "prediction": result.prediction,
        "ground_truth": q.answer,
        "correct": result.prediction == q.answer,
        "n_facts": len(facts),
    }
    print(json.dumps(obj, ensure_ascii=False, sort_keys=True))
    return 0


def cmd_explain(args) -> int:
    db = load_database(args.db)
    params, _ = _load_model(args.model)
    if args.query_id not in db.queries:
        raise WorkbenchError(f"unknown query id {args.query_id!r}")
    q = db.queries[args.query_id]
    facts = retrieve_facts(q, db, params.config.text_cap)
    if len(facts) == 0:
        raise WorkbenchError(f"query {q.query_id!r} retrieves no facts")
    model = QAModel(params, db)
    a_q = model.answer(q, facts).prediction
    rows = []
    for method in _parse_methods(args.methods):
        explainer = make_explainer(method, lime_samples=args.lime_samples,
                                   seed=subseed(args.seed, f"{method}:{q.query_id}"))
        rv = explainer(q, a_q, facts, model)
        rows.append(rv.to_obj(q.query_id, a_q))
    text = "\n".join(json.dumps(r, ensure_ascii=False, sort_keys=True) for r in rows)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
        print(f"wrote {args.out}")
    else:
        print(text)
    return 0


def cmd_pointing_game(args) -> int:
    db = load_database(args.db)
    params, extra = _load_model(args.model)
    model = QAModel(params, db)
    methods = _parse_methods(args.methods)
    if args.split == "heldout":
        query_ids = extra.get("heldout_query_ids") or sorted(db.queries)
    else:
        query_ids = sorted(db.queries)
    instances, skipped = build_hybrid_instances(
        db, model, args.seed, query_ids=query_ids,
        max_retries=args.max_retries, text_cap=params.config.text_cap,
        max_instances=args.max_instances)
    if not instances:
        raise WorkbenchError(
            f"no hybrid instances were kept (skipped: {skipped})")
    logger.info("built %d hybrid instances (skipped %s)", len(instances), skipped)

    results = []
    hit_logs = {}
    for method in methods:
        res = pointing_game(instances, model, method, seed=args.seed,
                            lime_samples=args.lime_samples)
        results.append(res)
        hit_logs[method] = res.hit_log
        logger.info("%s: %d/%d = %.3f", method, res.hits, res.total, res.accuracy)

    # exact sign tests between accuracy-adjacent methods
    ordered = sorted(results, key=lambda r: (-r.accuracy, r.method))
    p_values = {}
    for hi, lo in zip(ordered, ordered[1:]):
        sig = binomial_significance([h for _, h in hi.hit_log],
                                    [h for _, h in lo.hit_log], args.alpha)
        p_values[f"{hi.method}_vs_{lo.method}"] = {
            "p_value": sig.p_value, "significant": sig.significant,
            "discordant": sig.n_discordant,
        }

    mean_frac, sigma_frac = expected_random_accuracy(instances)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    results_path = out / "results.json"
    results_obj = {
        "methods": {r.method: r.to_obj() for r in results},
        "instances": len(instances),
        "skipped": skipped,
        "mean_real_fraction": mean_frac,
        "random_sigma": sigma_frac,
        "alpha": args.alpha,
        "p_values": p_values,
    }
    results_path.write_text(json.dumps(results_obj, indent=2, sort_keys=True) + "\n",
                            encoding="utf-8")
    hits_path = out / "hits.jsonl"
    with hits_path.open("w", encoding="utf-8") as fh:
        for method in methods:
            for qid, h in hit_logs[method]:
                fh.write(json.dumps({"method": method, "query_id": qid, "hit": h},
                                    sort_keys=True) + "\n")
    csv_path = out / "accuracy.csv"
    with csv_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "hits", "total", "accuracy"])
        for r in sorted(results, key=lambda r: -r.accuracy):
            writer.writerow([r.method, r.hits, r.total, f"{r.accuracy:.6f}"])
    fig_path = out / "accuracy_by_method.png"
    plots.plot_pointing_game([r.to_obj() for r in results], fig_path)
    write_manifest(out, "pointing-game",
                   {k: v for k, v in vars(args).items() if k != "func"},
                   args.seed, {"fakefacts": subseed(args.seed, "fakefacts")},
                   inputs=[args.db, args.model],
                   outputs=[results_path, hits_path, csv_path, fig_path])
    for r in sorted(results, key=lambda r: -r.accuracy):
        print(f"{r.method:8s} {r.hits:5d}/{r.total} = {r.accuracy:.3f}")
    return 0


def cmd_make_study(args) -> int:
    db = load_database(args.db)
    params_a, extra_a = _load_model(args.model_a)
    params_b, _ = _load_model(args.model_b)
    heldout = extra_a.get("heldout_query_ids") or sorted(db.queries)
    acc_a = evaluate_accuracy(params_a, db, heldout)
    acc_b = evaluate_accuracy(params_b, db, heldout)
    if not acc_b < acc_a:
        raise WorkbenchError(
            f"model B (accuracy {acc_b:.3f}) is not strictly worse than "
            f"model A ({acc_a:.3f}); the study needs models of different quality")
    logger.info("model A heldout accuracy %.3f, model B %.3f", acc_a, acc_b)
    model_a = QAModel(params_a, db)
    model_b = QAModel(params_b, db)
    tasks = generate_tasks(model_a, model_b, db, _parse_methods(args.methods),
                           k=args.k, seed=args.seed,
                           text_cap=params_a.config.text_cap,
                           lime_samples=args.lime_samples)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    tasks_path = out / "tasks.jsonl"
    save_tasks(tasks, tasks_path)
    write_manifest(out, "make-study",
                   {k: v for k, v in vars(args).items() if k != "func"},
                   args.seed, {"sides": subseed(args.seed, "sides")},
                   inputs=[args.db, args.model_a, args.model_b],
                   outputs=[tasks_path])
    print(f"wrote {len(tasks)} tasks ({args.methods}) -> {tasks_path} "
          f"[model A acc {acc_a:.3f} vs B {acc_b:.3f}]")
    return 0


def cmd_serve(args) -> int:
    from .service import serve

    serve(args.tasks, args.votes, args.port, host=args.host, seed=args.seed,
          static_dir=args.static)
    return 0


def cmd_report(args) -> int:
    tasks = load_tasks(args.tasks)
    votes = load_votes(args.votes)
    report = build_report(tasks, votes)
    obj = report.to_obj()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report_path = out / "report.json"
    report_path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n",
                           encoding="utf-8")
    csv_path = out / "votes.csv"
    with csv_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "category", "count", "percentage"])
        for method in sorted(obj["methods"]):
            rep = obj["methods"][method]
            for cat, count in rep["counts"].items():
                writer.writerow([method, cat, count,
                                 f"{rep['percentages'][cat]:.4f}"])
    outputs = [report_path, csv_path]
    if obj["methods"]:
        fig_path = out / "vote_distribution.png"
        plots.plot_vote_distribution(obj, fig_path)
        outputs.append(fig_path)
    write_manifest(out, "report",
                   {k: v for k, v in vars(args).items() if k != "func"},
                   None, {}, inputs=[args.tasks], outputs=outputs)
    print(json.dumps(obj, indent=2, sort_keys=True))
    return 0


# -- parser ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="factqa",
        description="QA over KB + text facts: training, explanations, "
                    "pointing-game evaluation, and the annotation study.")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("gen", help="generate a synthetic corpus")
    p.add_argument("--entities", type=int, default=50)
    p.add_argument("--relations", type=int, default=5)
    p.add_argument("--facts-per-entity", type=int, default=5)
    p.add_argument("--queries-per-entity", type=int, default=10)
    p.add_argument("--vocab", type=int, default=30)
    p.add_argument("--text-fraction", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train the QA model")
    p.add_argument("--db", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="JSON file with a full model config")
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--hops", type=int, default=3)
    p.add_argument("--lr", type=float, default=0.2)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--holdout", type=float, default=0.2)
    p.add_argument("--hop-weights", choices=["per-hop", "shared"],
                   default="per-hop")
    p.add_argument("--text-cap", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("answer", help="answer one query")
    p.add_argument("--db", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--query-id", required=True)
    p.set_defaults(func=cmd_answer)

    p = sub.add_parser("explain", help="score facts for one query")
    p.add_argument("--db", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--query-id", required=True)
    p.add_argument("--methods", default="ip",
                   help="comma list: aw1,aw2,aw3,awavg,lime,ip,random")
    p.add_argument("--lime-samples", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("pointing-game", help="fake-fact evaluation of methods")
    p.add_argument("--db", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--methods", default="aw1,aw3,awavg,lime,ip,random")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--split", choices=["all", "heldout"], default="all")
    p.add_argument("--max-instances", type=int, default=None)
    p.add_argument("--max-retries", type=int, default=25)
    p.add_argument("--lime-samples", type=int, default=1000)
    p.add_argument("--alpha", type=float, default=0.05)
    p.set_defaults(func=cmd_pointing_game)

    p = sub.add_parser("make-study", help="generate annotation study tasks")
    p.add_argument("--db", required=True)
    p.add_argument("--model-a", required=True)
    p.add_argument("--model-b", required=True)
    p.add_argument("--methods", default="awavg,lime,ip")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--lime-samples", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_make_study)

    p = sub.add_parser("serve", help="run the annotation study service")
    p.add_argument("--tasks", required=True)
    p.add_argument("--votes", required=True)
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--static", help="directory with the annotation UI assets")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("report", help="aggregate the study votes")
    p.add_argument("--tasks", required=True)
    p.add_argument("--votes", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except WorkbenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
