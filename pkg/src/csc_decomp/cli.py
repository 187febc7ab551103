"""Command-line interface.

Every subcommand takes ``--config FILE`` (a JSON object whose keys are
option names).  Values resolve as command-line flag, then config file,
then built-in default, and the resolved settings are written into each
artifact the command produces.

Exit codes: 0 success, 1 other library error, 2 usage error (unknown flag,
bad config key), 3 missing input file, 4 hash or vocabulary mismatch,
5 malformed or inconsistent data, 6 training diverged.  Failures print one
line ``error: <ErrorClass>: <message>`` to stderr.
"""
import argparse
import json
import sys
from dataclasses import asdict, fields
from pathlib import Path

from . import corpus as cp
from .charkb import (SimilarityPolicy, Vocab, build_confusion_index, load_char_table, load_index,
                     merge_external_sets, save_index, write_char_table)
from .errors import CSCError, ParseError
from .evalsuite import evaluate_model, predict_outputs
from .model import init_model, load_checkpoint, save_checkpoint
from .plugplay import CorrectionModel, DRModule, transfer_predict
from .train import SentencePair, TrainConfig, fit

EXIT_USAGE = 2
EXIT_MISSING = 3


class UsageError(Exception):
    pass


# Each option: (flag, dest, type, default, help).  ``type`` of bool gives a
# --flag/--no-flag pair.  ``inputs`` lists dests that must name existing files.
_POLICY = [
    ("--pinyin-mode", "pinyin_mode", str, "exact", "pinyin similarity: 'exact' syllable or 'edit' distance"),
    ("--pinyin-k", "pinyin_k", int, 1, "max pinyin edit distance in 'edit' mode"),
    ("--stroke-tau", "stroke_tau", float, 0.25, "max normalized stroke edit distance"),
]
_ORACLE = [
    ("--use-gold-d", "use_gold_d", bool, False, "build masks from gold detection labels"),
    ("--use-gold-r", "use_gold_r", bool, False, "build masks from gold reasoning labels"),
    ("--mask", "mask", bool, True, "apply searching masks (--no-mask: all-ones matrix)"),
]
_TRAIN = [(f"--{f.name.replace('_', '-')}", f.name, bool if isinstance(f.default, bool) else type(f.default),
           f.default, f"training: {f.name}") for f in fields(TrainConfig)]

COMMANDS = {
    "gen-table": dict(
        help="write a synthetic character table (char, pinyin, strokes)",
        options=[
            ("--out", "out", str, None, "output TSV path"),
            ("--n-chars", "n_chars", int, 60, "number of characters"),
            ("--group-size", "group_size", int, 3, "characters per homophone / look-alike group"),
            ("--overlap", "overlap", float, 0.8, "share of characters whose look-alike group is their homophone group"),
            ("--seed", "seed", int, 0, "random seed"),
        ], inputs=[]),
    "build-confusion": dict(
        help="build a phonological/visual confusion index from a character table",
        options=[
            ("--table", "table", str, None, "character table TSV (char<TAB>pinyin<TAB>strokes)"),
            ("--out", "out", str, None, "output index JSON"),
            ("--external-pc", "external_pc", str, None, "extra phonological pairs, char<TAB>candidates"),
            ("--external-vc", "external_vc", str, None, "extra visual pairs, char<TAB>candidates"),
        ] + _POLICY, inputs=["table", "external_pc", "external_vc"]),
    "synth": dict(
        help="synthesize a parallel corpus by confusion-driven corruption",
        options=[
            ("--confusion", "confusion", str, None, "confusion index JSON"),
            ("--out", "out", str, None, "output corpus (src<TAB>tgt); a .json sidecar is written next to it"),
            ("--n-sentences", "n_sentences", int, 1000, "number of sentences"),
            ("--min-len", "min_len", int, 8, "minimum sentence length"),
            ("--max-len", "max_len", int, 24, "maximum sentence length"),
            ("--error-rate", "error_rate", float, 0.15, "per-position corruption probability"),
            ("--phonological-ratio", "phonological_ratio", float, cp.PHONOLOGICAL_SHARE,
             "share of corruptions drawn from the phonological side"),
            ("--successors", "successors", int, 3, "successors per character in the target bigram chain (0: uniform)"),
            ("--chain-seed", "chain_seed", int, 12345, "seed of the bigram chain (the 'language')"),
            ("--seed", "seed", int, 0, "sampling seed"),
        ], inputs=["confusion"]),
    "train": dict(
        help="train the three-head model and write a checkpoint",
        options=[
            ("--corpus", "corpus", str, None, "training corpus (src<TAB>tgt)"),
            ("--confusion", "confusion", str, None, "confusion index JSON"),
            ("--out", "out", str, None, "output checkpoint"),
            ("--log", "log", str, None, "optional per-epoch JSONL log"),
            ("--encoder", "encoder", str, "toy", "'toy' (trainable) or 'fixed' (frozen random features)"),
            ("--d-e", "d_e", int, 32, "embedding width"),
            ("--hidden", "hidden", int, 64, "hidden width"),
            ("--window", "window", int, 2, "context half-width"),
        ] + _TRAIN, inputs=["corpus", "confusion"]),
    "predict": dict(
        help="correct sentences; writes src<TAB>prediction lines",
        options=[
            ("--checkpoint", "checkpoint", str, None, "model checkpoint"),
            ("--input", "input", str, None, "one sentence per line, or src<TAB>tgt lines (needed by oracle flags)"),
            ("--output", "output", str, None, "output path (default stdout); a .config.json sidecar is written"),
        ] + _ORACLE, inputs=["checkpoint", "input"]),
    "evaluate": dict(
        help="sentence-level and per-subtask P/R/F plus audit counts, as JSON",
        options=[
            ("--checkpoint", "checkpoint", str, None, "model checkpoint"),
            ("--corpus", "corpus", str, None, "evaluation corpus (src<TAB>tgt)"),
            ("--report", "report", str, None, "report path (default stdout)"),
        ] + _ORACLE, inputs=["checkpoint", "corpus"]),
    "audit": dict(
        help="count how detected errors relate to the confusion sets, as JSON",
        options=[
            ("--checkpoint", "checkpoint", str, None, "model checkpoint"),
            ("--corpus", "corpus", str, None, "evaluation corpus (src<TAB>tgt)"),
            ("--report", "report", str, None, "report path (default stdout)"),
        ] + _ORACLE, inputs=["checkpoint", "corpus"]),
    "transfer": dict(
        help="correct with detection/reasoning from one checkpoint and the distribution of another",
        options=[
            ("--dr", "dr", str, None, "checkpoint supplying detection and reasoning"),
            ("--model", "model", str, None, "checkpoint supplying the correction distribution"),
            ("--input", "input", str, None, "one sentence per line, or src<TAB>tgt lines"),
            ("--output", "output", str, None, "output path (default stdout)"),
            ("--report", "report", str, None, "optional evaluation report (input must be parallel)"),
        ] + _ORACLE, inputs=["dr", "model", "input"]),
}
_REQUIRED = {
    "gen-table": ["out"], "build-confusion": ["table", "out"], "synth": ["confusion", "out"],
    "train": ["corpus", "confusion", "out"], "predict": ["checkpoint", "input"],
    "evaluate": ["checkpoint", "corpus"], "audit": ["checkpoint", "corpus"],
    "transfer": ["dr", "model", "input"],
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser():
    parser = _Parser(prog="csc-decomp", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True
    for name, spec in COMMANDS.items():
        p = sub.add_parser(name, help=spec["help"], description=spec["help"])
        p.add_argument("--config", default=None, help="JSON file of option values (flags override it)")
        for flag, dest, typ, default, text in spec["options"]:
            text = f"{text} (default: {default})"
            if typ is bool:
                p.add_argument(flag, dest=dest, action=argparse.BooleanOptionalAction, default=None, help=text)
            else:
                p.add_argument(flag, dest=dest, type=typ, default=None, help=text)
    return parser


def resolve(command, args):
    """Merge defaults, the config file and explicit flags into one dict."""
    spec = COMMANDS[command]
    types = {dest: typ for _, dest, typ, _, _ in spec["options"]}
    cfg = {dest: default for _, dest, _, default, _ in spec["options"]}
    if args.config is not None:
        if not Path(args.config).is_file():
            raise FileNotFoundError(f"config file not found: {args.config}")
        with open(args.config, encoding="utf-8") as f:
            try:
                doc = json.load(f)
            except json.JSONDecodeError as e:
                raise ParseError(f"{args.config}: invalid JSON ({e})") from None
        if not isinstance(doc, dict):
            raise ParseError(f"{args.config}: expected a JSON object")
        for key, value in doc.items():
            dest = key.replace("-", "_")
            if dest not in types:
                raise UsageError(f"unknown config key {key!r} for {command}")
            typ = types[dest]
            if value is not None and not (typ is float and isinstance(value, int)) and not isinstance(value, typ):
                raise UsageError(f"config key {key!r} should be {typ.__name__}")
            cfg[dest] = typ(value) if value is not None else None
    for dest in types:
        value = getattr(args, dest)
        if value is not None:
            cfg[dest] = value
    missing = [d for d in _REQUIRED[command] if cfg.get(d) is None]
    if missing:
        raise UsageError(f"{command}: missing required option(s) " + ", ".join("--" + m.replace("_", "-") for m in missing))
    for dest in spec["inputs"]:
        if cfg.get(dest) is not None and not Path(cfg[dest]).is_file():
            raise FileNotFoundError(f"input file not found: {cfg[dest]}")
    return cfg


def _write_json(doc, path, stdout):
    text = json.dumps(doc, ensure_ascii=False, sort_keys=True, indent=1) + "\n"
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        stdout.write(text)


def _read_sentences(path):
    """Sentences from a plain or parallel file, as ``(src, tgt-or-None)``."""
    rows = []
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) > 2:
                raise ParseError(f"{path}:{lineno}: expected 'src' or 'src<TAB>tgt'")
            rows.append((parts[0], parts[1] if len(parts) == 2 else None))
    return rows


def _as_pairs(rows, need_targets, path):
    """Parallel pairs, or source-only pairs when targets are not needed."""
    if any(t is None for _, t in rows):
        if need_targets:
            raise ParseError(f"{path}: oracle flags or reports need 'src<TAB>tgt' lines")
        return [SentencePair(s, s) for s, _ in rows]
    return [SentencePair(s, t) for s, t in rows]


def _write_predictions(pairs, outputs, cfg, stdout):
    lines = "".join(f"{p.src}\t{o.pred}\n" for p, o in zip(pairs, outputs))
    if cfg["output"]:
        Path(cfg["output"]).write_text(lines, encoding="utf-8")
        _write_json({"config": cfg}, cfg["output"] + ".config.json", None)
    else:
        stdout.write(lines)


def _policy(cfg):
    return SimilarityPolicy(cfg["pinyin_mode"], cfg["pinyin_k"], cfg["stroke_tau"])


def cmd_gen_table(cfg, stdout):
    records = cp.synthetic_char_table(cfg["n_chars"], cfg["group_size"], cfg["seed"], cfg["overlap"])
    write_char_table(records, cfg["out"])


def cmd_build_confusion(cfg, stdout):
    table = load_char_table(cfg["table"])
    vocab = Vocab.from_chars(r.ch for r in table)
    index = build_confusion_index(vocab, table, _policy(cfg))
    if cfg["external_pc"]:
        index = merge_external_sets(index, cfg["external_pc"], "pc")
    if cfg["external_vc"]:
        index = merge_external_sets(index, cfg["external_vc"], "vc")
    save_index(index, cfg["out"], provenance={"command": "build-confusion", "config": cfg})


def cmd_synth(cfg, stdout):
    index = load_index(cfg["confusion"])
    keys = [f.name for f in fields(cp.CorpusSpec)]
    spec = cp.CorpusSpec(**{k: cfg[k] for k in keys})
    pairs, stats = cp.synthesize(spec, index)
    cp.write_parallel(pairs, cfg["out"])
    cp.write_sidecar(spec, stats, cfg["out"] + ".json", extra={"config": cfg, "index_hash": index.digest()})


def cmd_train(cfg, stdout):
    index = load_index(cfg["confusion"])
    pairs = cp.load_parallel(cfg["corpus"])
    tc = TrainConfig(**{f.name: cfg[f.name] for f in fields(TrainConfig)})
    model = init_model(index, encoder=cfg["encoder"], d_e=cfg["d_e"], hidden=cfg["hidden"],
                       window=cfg["window"], seed=cfg["seed"])
    trained, history = fit(pairs, model, tc, log_path=cfg["log"])
    trained.config = {**trained.config, "cli": cfg}
    save_checkpoint(trained, cfg["out"])
    if history:
        last = history[-1]
        stdout.write(f"trained {len(history)} epochs; final loss {last['loss']:.6f}\n")


def _oracle_kwargs(cfg):
    return dict(gold_d=cfg["use_gold_d"], gold_r=cfg["use_gold_r"], use_mask=cfg["mask"])


def cmd_predict(cfg, stdout):
    model = load_checkpoint(cfg["checkpoint"])
    need = cfg["use_gold_d"] or cfg["use_gold_r"]
    pairs = _as_pairs(_read_sentences(cfg["input"]), need, cfg["input"])
    outputs = predict_outputs(model, pairs, **_oracle_kwargs(cfg))
    _write_predictions(pairs, outputs, cfg, stdout)


def cmd_evaluate(cfg, stdout):
    model = load_checkpoint(cfg["checkpoint"])
    pairs = cp.load_parallel(cfg["corpus"])
    report, _ = evaluate_model(model, pairs, config={"command": "evaluate", **cfg}, **_oracle_kwargs(cfg))
    _write_json(report.to_json(), cfg["report"], stdout)


def cmd_audit(cfg, stdout):
    model = load_checkpoint(cfg["checkpoint"])
    pairs = cp.load_parallel(cfg["corpus"])
    report, _ = evaluate_model(model, pairs, **_oracle_kwargs(cfg))
    counts = asdict(report.counts)
    counts["detected"] = report.counts.detected
    _write_json({"counts": counts, "n_sentences": len(pairs), "config": {"command": "audit", **cfg}},
                cfg["report"], stdout)


def cmd_transfer(cfg, stdout):
    dr_state = load_checkpoint(cfg["dr"])
    model = load_checkpoint(cfg["model"])
    dr, corr = DRModule.from_model(dr_state), CorrectionModel.from_model(model)
    need = cfg["use_gold_d"] or cfg["use_gold_r"] or cfg["report"] is not None
    pairs = _as_pairs(_read_sentences(cfg["input"]), need, cfg["input"])

    def predictor(xs, gd, gr, use_mask):
        return transfer_predict(xs, dr, corr, oracle_d=gd, oracle_r=gr, use_mask=use_mask)

    if cfg["report"]:
        report, outputs = evaluate_model(dr_state, pairs, config={"command": "transfer", **cfg},
                                         predictor=predictor, **_oracle_kwargs(cfg))
        _write_json(report.to_json(), cfg["report"], None)
    else:
        outputs = predict_outputs(dr_state, pairs, predictor=predictor, **_oracle_kwargs(cfg))
    _write_predictions(pairs, outputs, cfg, stdout)


HANDLERS = {
    "gen-table": cmd_gen_table, "build-confusion": cmd_build_confusion, "synth": cmd_synth,
    "train": cmd_train, "predict": cmd_predict, "evaluate": cmd_evaluate, "audit": cmd_audit,
    "transfer": cmd_transfer,
}


def _fail(stderr, name, message, code):
    stderr.write(f"error: {name}: {' '.join(str(message).split())}\n")
    return code


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = resolve(args.command, args)
        HANDLERS[args.command](cfg, stdout)
    except UsageError as e:
        return _fail(stderr, "UsageError", e, EXIT_USAGE)
    except FileNotFoundError as e:
        return _fail(stderr, "FileNotFoundError", e, EXIT_MISSING)
    except CSCError as e:
        return _fail(stderr, type(e).__name__, e, e.exit_code)
    except ValueError as e:
        return _fail(stderr, "ValueError", e, 5)
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
