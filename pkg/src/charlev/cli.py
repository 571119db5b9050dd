"""Command-line front end: attack, train, eval and oracle-check runs.

Every command is a pure function of its input files, flags and seed; reports
embed a manifest (flags, seed, input digests, tool version) sufficient to
reproduce them byte for byte. Exit codes: 0 success, 1 runtime error,
2 usage/config error; errors print a one-line JSON diagnostic to stderr.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import string
import sys
from dataclasses import asdict

import numpy as np

from . import __version__
from .attacks import (AttackConfig, ClassificationCE, EmbedDistance,
                      NegSelfSimilarity, TargetSimilarity, bruteforce_attack,
                      charmer_attack, leaf_attack)
from .dataio import load_jsonl, read_store
from .encoder import CharEncoder, CountingEncoder, load_params, save_params
from .evalsuite import (AnchorSet, RetrievalGallery, adversarial_accuracy,
                        bleu, clean_accuracy, invert_embedding, recall_at_k,
                        retrieval_attack, token_recall, word_recall)
from .lexicon import load_lexicon
from .textspace import Alphabet, load_alphabet
from .trainer import TrainConfig, train

_INIT_TAG = 303

PRESETS = {
    "desk": dict(epochs=10, batch_size=32, k=1, rho=20, lr_max=1e-3,
                 warmup_steps=100, weight_decay=1e-4),
    "paper": dict(epochs=30, batch_size=128, k=1, rho=50, lr_max=1e-5,
                  warmup_steps=1400, weight_decay=1e-4),
}


class ConfigError(Exception):
    """A usage or configuration problem (exit code 2)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def default_alphabet() -> Alphabet:
    """Printable ASCII: letters, digits, space and punctuation."""
    chars = (string.ascii_lowercase + string.ascii_uppercase + string.digits
             + " " + string.punctuation)
    return Alphabet(tuple(chars))


def _sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def _manifest(command: str, config: dict, seed: int | None,
              input_paths: dict[str, str]) -> dict:
    return {
        "command": command,
        "config": config,
        "seed": seed,
        "inputs": {name: {"path": path, "sha256": _sha256(path)}
                   for name, path in sorted(input_paths.items()) if path},
        "version": __version__,
    }


def _write_report(report: dict, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(report, f, indent=2, sort_keys=True, ensure_ascii=False)
        f.write("\n")


def _load_alphabet(args) -> Alphabet:
    return load_alphabet(args.alphabet) if args.alphabet else default_alphabet()


def _load_encoder(args, alphabet: Alphabet) -> CharEncoder:
    params = load_params(args.encoder)
    return CharEncoder(params, alphabet, workers=args.workers)


def _load_lexicon_if_constrained(args):
    if not getattr(args, "constrained", False):
        return None
    if not args.lexicon:
        raise ConfigError("--constrained requires --lexicon")
    return load_lexicon(args.lexicon)


def _require_seed(args) -> int:
    if args.seed is None:
        raise ConfigError("--seed is required")
    if args.seed < 0:
        raise ConfigError("--seed must be non-negative")
    return args.seed


def _attack_config(args, seed: int) -> AttackConfig:
    rho = None if args.rho in (None, "exhaustive") else int(args.rho)
    return AttackConfig(k=args.k, rho=rho, test_char=args.test_char,
                        constrained=args.constrained,
                        include_deletion=not args.no_deletion,
                        seed=seed, charmer_n=args.n)


def _attack_flags(p: _Parser) -> None:
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--rho", default=20,
                   help="candidates per stage, or 'exhaustive'")
    p.add_argument("--n", type=int, default=20, help="positions kept by charmer")
    p.add_argument("--test-char", default=" ")
    p.add_argument("--no-deletion", action="store_true",
                   help="exclude the filler character from the stage-2 pool")
    p.add_argument("--constrained", action="store_true")
    p.add_argument("--lexicon")


def _common_flags(p: _Parser) -> None:
    p.add_argument("--alphabet", help="alphabet file (default: printable ASCII)")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)


def _config_snapshot(args, exclude=("out", "out_trace", "workers")) -> dict:
    cfg = {k: v for k, v in vars(args).items()
           if k not in exclude and k != "func" and not k.startswith("_")}
    return cfg


def _build_objectives(args, enc: CharEncoder, records):
    kind = args.objective
    if kind == "embed-dist":
        return [EmbedDistance(enc.encode(r.text)) for r in records]
    if kind == "neg-sim":
        return [NegSelfSimilarity(enc.encode(r.text)) for r in records]
    if kind == "target-sim":
        if not args.target_text:
            raise ConfigError("--objective target-sim requires --target-text")
        target = enc.encode(args.target_text)
        return [TargetSimilarity(target) for _ in records]
    if kind == "class-ce":
        if not args.anchors:
            raise ConfigError("--objective class-ce requires --anchors")
        store = read_store(args.anchors)
        if any(r.label is None for r in records):
            raise ConfigError("--objective class-ce requires labelled input records")
        return [ClassificationCE(store.rows, r.label, logit_scale=args.logit_scale)
                for r in records]
    raise ConfigError(f"unknown objective {kind!r}")


def cmd_attack(args) -> int:
    seed = _require_seed(args)
    alphabet = _load_alphabet(args)
    enc = _load_encoder(args, alphabet)
    records = load_jsonl(args.input)
    lexicon = _load_lexicon_if_constrained(args)
    objectives = _build_objectives(args, enc, records)
    cfg = _attack_config(args, seed)

    texts = [r.text for r in records]
    if args.attack == "leaf":
        results = leaf_attack(enc, texts, objectives, cfg, alphabet, lexicon)
    elif args.attack == "charmer":
        lex = lexicon if cfg.constrained else None
        results = [charmer_attack(enc, s, obj, cfg.k, cfg.charmer_n, alphabet,
                                  lex, test_char=cfg.test_char,
                                  include_deletion=cfg.include_deletion)
                   for s, obj in zip(texts, objectives)]
    elif args.attack == "bruteforce":
        lex = lexicon if cfg.constrained else None
        results = [bruteforce_attack(enc, s, obj, cfg.k, alphabet, lex)
                   for s, obj in zip(texts, objectives)]
    else:
        raise ConfigError(f"unknown attack {args.attack!r}")

    report = {
        "manifest": _manifest("attack", _config_snapshot(args), seed,
                              {"input": args.input, "encoder": args.encoder,
                               "alphabet": args.alphabet or "",
                               "lexicon": args.lexicon or "",
                               "anchors": args.anchors or ""}),
        "results": [r.to_dict() for r in results],
    }
    _write_report(report, args.out)
    return 0


def cmd_train(args) -> int:
    seed = _require_seed(args)
    alphabet = _load_alphabet(args)
    records = load_jsonl(args.data)
    lexicon = _load_lexicon_if_constrained(args)

    base = dict(PRESETS[args.preset])
    overrides = {f: getattr(args, f) for f in
                 ("epochs", "batch_size", "k", "rho", "lr_max",
                  "warmup_steps", "weight_decay")
                 if getattr(args, f) is not None}
    base.update(overrides)
    cfg = TrainConfig(constrained=args.constrained, seed=seed, **base)

    frozen = load_params(args.frozen)
    if args.init == "fresh":
        from .encoder import params_for_alphabet
        init_seed = int(np.random.SeedSequence(
            [seed, _INIT_TAG]).generate_state(1)[0])
        init = params_for_alphabet(alphabet, init_seed,
                                   d_e=frozen.e.shape[1], m=frozen.b.shape[0],
                                   d_h=frozen.w1.shape[0], h=frozen.w2.shape[0])
    else:
        init = load_params(args.init)

    final, trace = train([r.text for r in records], cfg, frozen, init,
                         alphabet, lexicon, workers=args.workers)
    save_params(final, args.out)

    sidecar = {
        "epoch": cfg.epochs,
        "step": cfg.epochs * ((len(records) + cfg.batch_size - 1) // cfg.batch_size),
        "cfg": asdict(cfg),
        "loss": trace[-1] if trace else None,
    }
    _write_report(sidecar, args.out + ".json")

    report = {
        "manifest": _manifest("train", _config_snapshot(args), seed,
                              {"data": args.data, "frozen": args.frozen,
                               "init": "" if args.init == "fresh" else args.init,
                               "alphabet": args.alphabet or "",
                               "lexicon": args.lexicon or ""}),
        "loss_per_epoch": trace,
    }
    _write_report(report, args.out_trace)
    return 0


def cmd_eval(args) -> int:
    handler = {"zeroshot": _eval_zeroshot, "retrieval": _eval_retrieval,
               "invert": _eval_invert}[args.task]
    return handler(args)


def _eval_zeroshot(args) -> int:
    seed = _require_seed(args)
    alphabet = _load_alphabet(args)
    enc = _load_encoder(args, alphabet)
    records = load_jsonl(args.input)
    if any(r.label is None for r in records):
        raise ConfigError("zeroshot eval requires labelled records")
    lexicon = _load_lexicon_if_constrained(args)

    if args.anchors:
        store = read_store(args.anchors)
        anchors = AnchorSet(tuple(str(i) for i in range(store.count)), store.rows)
    elif args.labels:
        with open(args.labels, encoding="utf-8") as f:
            label_texts = json.load(f)
        anchors = AnchorSet.from_texts(enc, label_texts)
    else:
        raise ConfigError("zeroshot eval requires --anchors or --labels")

    dataset = [(r.text, r.label) for r in records]
    cfg = _attack_config(args, seed)
    clean = clean_accuracy(dataset, enc, anchors)
    adv = adversarial_accuracy(dataset, enc, anchors, args.attack, cfg, alphabet,
                               lexicon, logit_scale=args.logit_scale)

    report = {
        "task": "zeroshot",
        "model_checkpoint": args.encoder,
        "attack_cfg": _cfg_dict(cfg, args.attack),
        "metrics": {"clean_accuracy": clean, "adversarial_accuracy": adv},
        "seed": seed,
        "manifest": _manifest("eval-zeroshot", _config_snapshot(args), seed,
                              {"input": args.input, "encoder": args.encoder,
                               "anchors": args.anchors or "",
                               "labels": args.labels or "",
                               "alphabet": args.alphabet or "",
                               "lexicon": args.lexicon or ""}),
    }
    _write_report(report, args.out)
    return 0


def _eval_retrieval(args) -> int:
    seed = _require_seed(args)
    alphabet = _load_alphabet(args)
    enc = _load_encoder(args, alphabet)
    queries = [r.text for r in load_jsonl(args.input)]
    store = read_store(args.gallery)
    if store.count < len(queries):
        raise ConfigError("gallery has fewer items than queries")
    lexicon = _load_lexicon_if_constrained(args)
    gallery = RetrievalGallery(
        item_ids=tuple(str(i) for i in range(store.count)),
        vectors=store.rows,
        pairing={i: str(i) for i in range(len(queries))},
    )
    ks = [int(x) for x in str(args.metric_k).split(",")]
    cfg = _attack_config(args, seed)

    metrics = {"clean": {str(k): recall_at_k(queries, enc, gallery, k) for k in ks}}
    if args.targets:
        target_texts = [r.text for r in load_jsonl(args.targets)]
        per_target = []
        for target in target_texts:
            attacked = [retrieval_attack(q, target, enc, args.attack, cfg,
                                         alphabet, lexicon) for q in queries]
            embs = enc.encode_batch(attacked)
            per_target.append({
                "target": target,
                "recall": {str(k): recall_at_k(queries, enc, gallery, k,
                                               query_embs=embs) for k in ks},
            })
        metrics["attacked"] = {
            "per_target": per_target,
            "mean": {str(k): sum(t["recall"][str(k)] for t in per_target)
                     / len(per_target) for k in ks},
        }

    report = {
        "task": "retrieval",
        "model_checkpoint": args.encoder,
        "attack_cfg": _cfg_dict(cfg, args.attack),
        "metrics": metrics,
        "seed": seed,
        "manifest": _manifest("eval-retrieval", _config_snapshot(args), seed,
                              {"input": args.input, "encoder": args.encoder,
                               "gallery": args.gallery,
                               "targets": args.targets or "",
                               "alphabet": args.alphabet or "",
                               "lexicon": args.lexicon or ""}),
    }
    _write_report(report, args.out)
    return 0


def _eval_invert(args) -> int:
    seed = _require_seed(args)
    alphabet = _load_alphabet(args)
    enc = _load_encoder(args, alphabet)
    targets = [r.text for r in load_jsonl(args.targets)]

    per_sample = []
    for i, text in enumerate(targets):
        target_emb = enc.encode(text)
        res = invert_embedding(target_emb, enc, alphabet, steps=args.steps,
                               restarts=args.restarts,
                               seed=int(np.random.SeedSequence(
                                   [seed, i]).generate_state(1)[0]),
                               length_cap=args.length_cap)
        per_sample.append({
            "target": text,
            "reconstruction": res.sentence,
            "sim": res.similarity,
            "word_recall": word_recall(text, res.sentence),
            "token_recall": token_recall(text, res.sentence),
            "bleu": bleu(text, res.sentence),
        })

    def mean(key):
        return sum(x[key] for x in per_sample) / len(per_sample) if per_sample else 0.0

    report = {
        "task": "invert",
        "model_checkpoint": args.encoder,
        "attack_cfg": {"steps": args.steps, "restarts": args.restarts,
                       "length_cap": args.length_cap},
        "metrics": {k: mean(k) for k in ("sim", "word_recall", "token_recall", "bleu")},
        "per_sample": per_sample,
        "seed": seed,
        "manifest": _manifest("eval-invert", _config_snapshot(args), seed,
                              {"targets": args.targets, "encoder": args.encoder,
                               "alphabet": args.alphabet or ""}),
    }
    _write_report(report, args.out)
    return 0


def cmd_oracle_check(args) -> int:
    seed = _require_seed(args)
    if args.k != 1:
        raise ConfigError("oracle-check runs at --k 1")
    alphabet = _load_alphabet(args)
    enc = _load_encoder(args, alphabet)
    texts = [r.text for r in load_jsonl(args.input)]
    rhos = [x.strip() for x in args.rho_list.split(",") if x.strip()]

    per_sentence = []
    violation = None
    for i, s in enumerate(texts):
        obj = EmbedDistance(enc.encode(s))
        brute_out = bruteforce_attack(enc, s, obj, 1, alphabet).output
        charmer_out = charmer_attack(enc, s, obj, 1, args.n, alphabet,
                                     test_char=args.test_char).output
        leaf_outs = {}
        for rho in rhos:
            cfg = AttackConfig(k=1, rho=None if rho == "exhaustive" else int(rho),
                               test_char=args.test_char, seed=seed)
            leaf_outs[rho] = leaf_attack(enc, [s], [obj], cfg, alphabet)[0].output

        outs = [brute_out, charmer_out] + [leaf_outs[r] for r in rhos]
        scores = obj.scores(enc.encode_batch(outs))
        entry = {
            "input": s,
            "bruteforce": float(scores[0]),
            "charmer": float(scores[1]),
            "leaf": {r: float(scores[2 + j]) for j, r in enumerate(rhos)},
        }
        per_sentence.append(entry)
        for name, sc in [("charmer", entry["charmer"]),
                         *[(f"leaf rho={r}", v) for r, v in entry["leaf"].items()]]:
            if sc > entry["bruteforce"]:
                violation = f"sentence {i}: {name} score {sc} exceeds bruteforce"

    means = {
        "bruteforce": sum(e["bruteforce"] for e in per_sentence) / len(per_sentence),
        "charmer": sum(e["charmer"] for e in per_sentence) / len(per_sentence),
        "leaf": {r: sum(e["leaf"][r] for e in per_sentence) / len(per_sentence)
                 for r in rhos},
    }
    report = {
        "manifest": _manifest("oracle-check", _config_snapshot(args), seed,
                              {"input": args.input, "encoder": args.encoder,
                               "alphabet": args.alphabet or ""}),
        "per_sentence": per_sentence,
        "means": means,
        "dominance_ok": violation is None,
    }
    _write_report(report, args.out)
    if violation is not None:
        raise RuntimeError(f"bruteforce dominance violated: {violation}")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="charlev", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("attack", parents=[], help="run an attack over a JSONL corpus")
    p.add_argument("--input", required=True)
    p.add_argument("--encoder", required=True)
    p.add_argument("--objective", required=True,
                   choices=["embed-dist", "neg-sim", "target-sim", "class-ce"])
    p.add_argument("--attack", required=True,
                   choices=["leaf", "charmer", "bruteforce"])
    p.add_argument("--target-text")
    p.add_argument("--anchors")
    p.add_argument("--logit-scale", type=float, default=100.0)
    _attack_flags(p)
    _common_flags(p)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("train", help="adversarially finetune an encoder")
    p.add_argument("--data", required=True)
    p.add_argument("--frozen", required=True)
    p.add_argument("--init", default="fresh", help="checkpoint path or 'fresh'")
    p.add_argument("--preset", choices=sorted(PRESETS), default="desk")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--k", type=int)
    p.add_argument("--rho", type=int)
    p.add_argument("--lr-max", type=float, dest="lr_max")
    p.add_argument("--warmup", type=int, dest="warmup_steps")
    p.add_argument("--weight-decay", type=float, dest="weight_decay")
    p.add_argument("--constrained", action="store_true")
    p.add_argument("--lexicon")
    p.add_argument("--out-trace", required=True)
    _common_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="zero-shot, retrieval or inversion evaluation")
    p.add_argument("task", choices=["zeroshot", "retrieval", "invert"])
    p.add_argument("--input")
    p.add_argument("--encoder", required=True)
    p.add_argument("--anchors")
    p.add_argument("--labels", help="JSON list of label texts to encode as anchors")
    p.add_argument("--gallery")
    p.add_argument("--targets")
    p.add_argument("--metric-k", default="1,5", dest="metric_k")
    p.add_argument("--attack", default="leaf",
                   choices=["leaf", "charmer", "bruteforce"])
    p.add_argument("--logit-scale", type=float, default=100.0)
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--restarts", type=int, default=4)
    p.add_argument("--length-cap", type=int, default=64)
    _attack_flags(p)
    _common_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("oracle-check",
                       help="compare attacks against the exhaustive maximum")
    p.add_argument("--input", required=True)
    p.add_argument("--encoder", required=True)
    p.add_argument("--rho-list", default="1,5,20,exhaustive", dest="rho_list")
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--n", type=int, default=20)
    p.add_argument("--test-char", default=" ")
    _common_flags(p)
    p.set_defaults(func=cmd_oracle_check)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _check_eval_flags(args)
        return args.func(args)
    except ConfigError as exc:
        print(json.dumps({"error": str(exc), "kind": "config"}), file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(json.dumps({"error": str(exc), "kind": "runtime"}), file=sys.stderr)
        return 1


def _check_eval_flags(args) -> None:
    if getattr(args, "command", None) != "eval":
        return
    if args.task in ("zeroshot", "retrieval") and not args.input:
        raise ConfigError(f"{args.task} eval requires --input")
    if args.task == "retrieval" and not args.gallery:
        raise ConfigError("retrieval eval requires --gallery")
    if args.task == "invert" and not args.targets:
        raise ConfigError("invert eval requires --targets")


def _cfg_dict(cfg: AttackConfig, attack: str) -> dict:
    d = asdict(cfg)
    d["attack"] = attack
    return d


if __name__ == "__main__":
    sys.exit(main())
