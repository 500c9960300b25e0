"""Experiment runner.

Subcommands: train, sweep, metrics, analyze, transmit, correlate, fixtures.
Run configs are plain key=value text files; every default is echoed back into
the emitted record so a run is reproducible from its record alone.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .agents import ChannelSpec, FfnReceiver, GruReceiver, Sender, load_agent, save_agent
from .analysis import ABLATION_PROTOCOLS, ablate, cue_validity, mi_profile, vocab_usage
from .env import AttributeSpace, sample_with_density, split_inputs, split_unseen_combinations
from .errors import ConfigError, ResourceError
from .fixtures import miniature_languages
from .metrics import metric_report, read_corpus, write_corpus
from .numerics import RNG_ALGORITHM, make_rng
from .stats import spearman
from .training import TrainConfig, evaluate, extract_language, train
from .transmission import TransmissionConfig, run_transmission

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RESOURCE = 3
EXIT_NOT_CONVERGED = 4

OUT_DIR_ENV = "EMLAB_OUT_DIR"


@dataclass
class RunConfig:
    """One training run, fully self-describing."""

    n_att: int
    n_val: int
    c_voc: int
    c_len: int
    seed: int = 0
    hidden_sender: int = 500
    hidden_receiver: int = 500
    embed_dim: int = 50
    learning_rate: float = 0.001
    entropy_coeff: float = 0.5
    batch_size: int = 32
    max_epochs: int = 1000
    convergence_threshold: float = 0.999
    eval_every: int = 1
    test_fraction: float = 0.10
    sample_count: int = 0  # >0: train on a density-controlled sample (n_att must be 2)
    checkpoint_every: int = 0

    REQUIRED = ("n_att", "n_val", "c_voc", "c_len")

    def run_id(self) -> str:
        base = f"a{self.n_att}v{self.n_val}_voc{self.c_voc}len{self.c_len}_seed{self.seed}"
        if self.sample_count:
            base += f"_n{self.sample_count}"
        return base

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _parse_scalar(field_name: str, raw: str, lineno: int):
    types = {f.name: f.type for f in dataclasses.fields(RunConfig)}
    if field_name not in types:
        raise ConfigError(f"line {lineno}: unknown field {field_name!r}")
    caster = float if types[field_name] == "float" else int
    try:
        return caster(raw)
    except ValueError:
        raise ConfigError(
            f"line {lineno}: invalid {caster.__name__} for {field_name!r}: {raw!r}"
        ) from None


def parse_config_text(text: str) -> RunConfig:
    """key = value lines, '#' comments; unknown or malformed fields are named."""
    values: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        values[key] = _parse_scalar(key, raw, lineno)
    missing = [k for k in RunConfig.REQUIRED if k not in values]
    if missing:
        raise ConfigError(f"missing required field(s): {', '.join(missing)}")
    return RunConfig(**values)


def parse_grid_text(text: str) -> list[RunConfig]:
    """Like a run config, but any field may hold a comma-separated list; the
    cartesian product of all list fields defines the sweep."""
    lists: dict[str, list] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        lists[key] = [_parse_scalar(key, tok.strip(), lineno) for tok in raw.split(",")]
    missing = [k for k in RunConfig.REQUIRED if k not in lists]
    if missing:
        raise ConfigError(f"missing required field(s): {', '.join(missing)}")
    keys = sorted(lists)
    configs: list[RunConfig] = []

    def expand(i: int, acc: dict):
        if i == len(keys):
            configs.append(RunConfig(**acc))
            return
        for v in lists[keys[i]]:
            expand(i + 1, {**acc, keys[i]: v})

    expand(0, {})
    return configs


@dataclass
class RunRecord:
    config: dict
    rng_algorithm: str
    converged: bool
    epochs_run: int
    train_accuracy: float
    test_accuracy: float
    metrics: dict
    ambiguous_language: bool
    coverage_enforced: bool
    wall_clock_s: float
    artifacts: dict = field(default_factory=dict)
    error: str | None = None

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "RunRecord":
        return cls(**json.loads(text))


def _build_inputs(config: RunConfig, space: AttributeSpace):
    if config.sample_count:
        if config.n_att != 2:
            raise ConfigError("sample_count requires n_att = 2")
        inputs = sample_with_density(config.n_val, config.sample_count, config.seed)
        return split_inputs(inputs, space, config.test_fraction, config.seed)
    return split_unseen_combinations(space, config.test_fraction, config.seed)


def run_one(config: RunConfig, out_dir: Path) -> RunRecord:
    """Train, evaluate, extract the language, score it, persist artifacts."""
    t0 = time.perf_counter()
    space = AttributeSpace(config.n_att, config.n_val)
    channel = ChannelSpec(config.c_voc, config.c_len)
    split = _build_inputs(config, space)
    rng = make_rng(config.seed)
    sender = Sender(space, channel, config.hidden_sender, config.embed_dim, rng)
    receiver = GruReceiver(space, channel, config.hidden_receiver, config.embed_dim, rng)
    tc = TrainConfig(
        learning_rate=config.learning_rate,
        entropy_coeff=config.entropy_coeff,
        batch_size=config.batch_size,
        max_epochs=config.max_epochs,
        convergence_threshold=config.convergence_threshold,
        eval_every=config.eval_every,
    )
    run_id = config.run_id()
    out_dir.mkdir(parents=True, exist_ok=True)

    def checkpoint_hook(epoch, s, r):
        save_agent(out_dir / f"{run_id}_sender_ep{epoch}.npz", s)
        save_agent(out_dir / f"{run_id}_receiver_ep{epoch}.npz", r)

    result = train(
        space, split.train, channel, sender, receiver, tc, rng,
        on_checkpoint=checkpoint_hook if config.checkpoint_every else None,
        checkpoint_every=config.checkpoint_every,
    )
    train_acc = evaluate(sender, receiver, split.train).accuracy
    test_acc = evaluate(sender, receiver, split.test).accuracy
    corpus = extract_language(sender, split.train)
    report = metric_report(corpus)

    paths = {
        "sender": str(out_dir / f"{run_id}_sender.npz"),
        "receiver": str(out_dir / f"{run_id}_receiver.npz"),
        "corpus": str(out_dir / f"{run_id}_corpus.txt"),
        "history": str(out_dir / f"{run_id}_history.csv"),
        "record": str(out_dir / f"{run_id}_record.json"),
    }
    save_agent(paths["sender"], sender)
    save_agent(paths["receiver"], receiver)
    with open(paths["corpus"], "w") as fh:
        write_corpus(corpus, fh)
    with open(paths["history"], "w", newline="") as fh:
        result.history.write_csv(fh)

    record = RunRecord(
        config=config.to_dict(),
        rng_algorithm=RNG_ALGORITHM,
        converged=result.converged,
        epochs_run=result.epochs_run,
        train_accuracy=train_acc,
        test_accuracy=test_acc,
        metrics=report.to_dict(),
        ambiguous_language=corpus.ambiguous,
        coverage_enforced=split.coverage_enforced,
        wall_clock_s=time.perf_counter() - t0,
        artifacts=paths,
    )
    with open(paths["record"], "w") as fh:
        fh.write(record.to_json())
    return record


def _out_dir(args) -> Path:
    if args.out_dir:
        return Path(args.out_dir)
    return Path(os.environ.get(OUT_DIR_ENV, "."))


def cmd_train(args) -> int:
    config = parse_config_text(Path(args.config).read_text())
    if args.seed is not None:
        config.seed = args.seed
    record = run_one(config, _out_dir(args))
    print(record.to_json())
    if args.strict_convergence and not record.converged:
        return EXIT_NOT_CONVERGED
    return EXIT_OK


SWEEP_COLUMNS = [
    "n_att", "n_val", "c_voc", "c_len", "seed", "input_count", "capacity",
    "sample_count", "density", "converged", "epochs_run",
    "train_accuracy", "test_accuracy", "topsim", "posdis", "bosdis",
    "wall_clock_s", "error",
]


def _sweep_row(config: RunConfig, record: RunRecord | None, error: str | None) -> dict:
    row = {
        "n_att": config.n_att, "n_val": config.n_val,
        "c_voc": config.c_voc, "c_len": config.c_len, "seed": config.seed,
        "input_count": config.n_val ** config.n_att,
        "capacity": config.c_voc ** config.c_len,
        "sample_count": config.sample_count,
        "density": (config.sample_count / config.n_val**2) if config.sample_count else 1.0,
        "error": error or "",
    }
    if record is not None:
        row.update(
            converged=record.converged,
            epochs_run=record.epochs_run,
            train_accuracy=record.train_accuracy,
            test_accuracy=record.test_accuracy,
            topsim=record.metrics.get("topsim"),
            posdis=record.metrics.get("posdis"),
            bosdis=record.metrics.get("bosdis"),
            wall_clock_s=record.wall_clock_s,
        )
    return {k: row.get(k, "") for k in SWEEP_COLUMNS}


def _run_one_dict(config_dict: dict, out_dir: str) -> dict:
    # process-pool worker; returns a plain dict so it pickles cleanly
    record = run_one(RunConfig(**config_dict), Path(out_dir))
    return dataclasses.asdict(record)


def cmd_sweep(args) -> int:
    configs = parse_grid_text(Path(args.grid).read_text())
    out_dir = _out_dir(args)
    out_dir.mkdir(parents=True, exist_ok=True)

    pending = []
    records: dict[str, RunRecord | None] = {}
    errors: dict[str, str | None] = {}
    for config in configs:
        marker = out_dir / f"{config.run_id()}_record.json"
        if marker.exists():  # resume: completed runs are not repeated
            records[config.run_id()] = RunRecord.from_json(marker.read_text())
            errors[config.run_id()] = None
        else:
            pending.append(config)

    def note(config: RunConfig, record_dict: dict | None, err: str | None):
        records[config.run_id()] = RunRecord(**record_dict) if record_dict else None
        errors[config.run_id()] = err
        tag = "ok" if err is None else f"FAILED: {err}"
        print(f"[sweep] {config.run_id()}: {tag}", file=sys.stderr)

    if args.jobs > 1 and pending:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            futures = {
                pool.submit(_run_one_dict, c.to_dict(), str(out_dir)): c for c in pending
            }
            for future, config in futures.items():
                try:
                    note(config, future.result(), None)
                except Exception as exc:  # per-run failures don't stop the sweep
                    note(config, None, str(exc))
    else:
        for config in pending:
            try:
                note(config, _run_one_dict(config.to_dict(), str(out_dir)), None)
            except Exception as exc:
                note(config, None, str(exc))

    configs.sort(key=lambda c: (c.n_val**c.n_att, c.c_voc**c.c_len, c.seed))
    table = out_dir / args.table
    with open(table, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS)
        writer.writeheader()
        for config in configs:
            writer.writerow(
                _sweep_row(config, records[config.run_id()], errors[config.run_id()])
            )
    print(f"wrote {table}")
    failed = sum(1 for e in errors.values() if e)
    if failed:
        print(f"{failed} run(s) failed", file=sys.stderr)
    if args.strict_convergence and any(
        r is not None and not r.converged for r in records.values()
    ):
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_metrics(args) -> int:
    with open(args.corpus) as fh:
        corpus = read_corpus(fh)
    report = metric_report(corpus, seed=args.seed or 0)
    print(json.dumps(report.to_dict(), indent=2))
    return EXIT_OK


def cmd_analyze(args) -> int:
    with open(args.corpus) as fh:
        corpus = read_corpus(fh)
    out_dir = _out_dir(args)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = Path(args.corpus).stem

    if args.mi_profile:
        profile = mi_profile(corpus)
        path = out_dir / f"{stem}_mi_profile.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["position"] + [f"att{a+1}" for a in range(corpus.space.n_att)])
            for j, row in enumerate(profile.matrix):
                writer.writerow([j] + [f"{v:.6f}" for v in row])
        print(f"wrote {path}")

    if args.vocab_usage:
        usage = vocab_usage(corpus)
        path = out_dir / f"{stem}_vocab_usage.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["position", "distinct_symbols"])
            for j, v in enumerate(usage):
                writer.writerow([j, int(v)])
        print(f"wrote {path}")

    if args.cue_validity:
        pos, att = (int(tok) for tok in args.cue_validity.split(","))
        cv = cue_validity(corpus, pos, att)
        path = out_dir / f"{stem}_cue_validity_p{pos}_a{att}.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["symbol", "cue_validity"])
            if cv is not None:
                for sym, v in sorted(cv.per_symbol.items()):
                    writer.writerow([sym, f"{v:.6f}"])
                writer.writerow(["mean", f"{cv.corpus_mean:.6f}"])
            else:
                writer.writerow(["undefined", "constant position"])
        print(f"wrote {path}")

    if args.protocols:
        if not args.checkpoint:
            raise ConfigError("ablation protocols need --checkpoint (a trained receiver)")
        receiver = load_agent(args.checkpoint)
        if not isinstance(receiver, (GruReceiver, FfnReceiver)):
            raise ConfigError("--checkpoint must hold a receiver")
        rng = make_rng(args.seed or 0)
        path = out_dir / f"{stem}_ablations.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["protocol", "position"]
                + [f"att{a+1}" for a in range(corpus.space.n_att)]
                + ["all_correct", "std_all_correct"]
            )
            for protocol in args.protocols.split(","):
                protocol = protocol.strip()
                positions: list[int | None]
                if protocol in ("fix_one", "shuffle_one"):
                    positions = list(range(corpus.channel.msg_len))
                else:
                    positions = [None]
                for pos in positions:
                    res = ablate(corpus, receiver, protocol, pos, args.repetitions, rng)
                    writer.writerow(
                        [protocol, "" if pos is None else pos]
                        + [f"{v:.4f}" for v in res.per_attribute_mean]
                        + [f"{res.all_correct_mean:.4f}", f"{res.all_correct_std:.4f}"]
                    )
        print(f"wrote {path}")
    return EXIT_OK


def cmd_transmit(args) -> int:
    sender = load_agent(args.checkpoint)
    if not isinstance(sender, Sender):
        raise ConfigError("--checkpoint must hold a sender")
    split = split_unseen_combinations(sender.space, args.test_fraction, args.split_seed)
    config = TransmissionConfig(
        architectures=tuple(args.architectures.split(",")),
        seeds_per_sender=args.seeds,
        epochs=args.epochs,
    )
    rng = make_rng(args.seed or 0)
    results = run_transmission(sender, split, config, rng, sender_id=Path(args.checkpoint).stem)
    out_dir = _out_dir(args)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{Path(args.checkpoint).stem}_transmission.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["sender_id", "architecture", "seed", "learning_speed", "test_accuracy",
             "final_train_accuracy"]
        )
        for r in results:
            writer.writerow(
                [r.sender_id, r.architecture, r.seed, f"{r.learning_speed:.6f}",
                 f"{r.test_accuracy:.6f}", f"{r.final_train_accuracy:.6f}"]
            )
    print(f"wrote {path}")
    return EXIT_OK


def cmd_correlate(args) -> int:
    with open(args.records, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ConfigError(f"{args.records} holds no data rows")
    for col in (args.x, args.y):
        if col not in rows[0]:
            raise ConfigError(f"column {col!r} not in {args.records}")

    def grab(col):
        out = []
        for row in rows:
            raw = row[col].strip()
            out.append(float(raw) if raw not in ("", "None") else None)
        return out

    xs_raw, ys_raw = grab(args.x), grab(args.y)
    xs = [x for x, y in zip(xs_raw, ys_raw) if x is not None and y is not None]
    ys = [y for x, y in zip(xs_raw, ys_raw) if x is not None and y is not None]
    result = spearman(xs, ys)
    payload = {
        "x": args.x, "y": args.y, "n": len(xs),
        "rho": None if result is None else result.rho,
        "p_value": None if result is None else result.p_value,
        "significant": None if result is None else result.significant,
    }
    print(json.dumps(payload, indent=2))
    return EXIT_OK


def cmd_fixtures(args) -> int:
    out_dir = _out_dir(args)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, corpus in miniature_languages().items():
        path = out_dir / f"{name}.txt"
        with open(path, "w") as fh:
            write_corpus(corpus, fh)
        print(f"wrote {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="emlab")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out-dir", default=None, help=f"output root (default ${OUT_DIR_ENV} or .)")
        p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("train", help="run one training configuration")
    p.add_argument("config")
    p.add_argument("--strict-convergence", action="store_true")
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sweep", help="run a grid of configurations")
    p.add_argument("grid")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--table", default="sweep.csv")
    p.add_argument("--strict-convergence", action="store_true")
    common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("metrics", help="score a corpus file")
    p.add_argument("corpus")
    common(p)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("analyze", help="profiles and ablations for a corpus")
    p.add_argument("corpus")
    p.add_argument("--checkpoint", default=None, help="receiver checkpoint for ablations")
    p.add_argument("--protocols", default="", help=f"comma list of {ABLATION_PROTOCOLS}")
    p.add_argument("--repetitions", type=int, default=10)
    p.add_argument("--mi-profile", action="store_true")
    p.add_argument("--vocab-usage", action="store_true")
    p.add_argument("--cue-validity", default="", help="'position,attribute'")
    common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("transmit", help="retrain fresh receivers on a frozen sender")
    p.add_argument("checkpoint")
    p.add_argument("--architectures", default="gru-500,gru-50,ffn-500")
    p.add_argument("--seeds", type=int, default=3)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--test-fraction", type=float, default=0.10)
    p.add_argument("--split-seed", type=int, default=0)
    common(p)
    p.set_defaults(func=cmd_transmit)

    p = sub.add_parser("correlate", help="spearman between two record columns")
    p.add_argument("records")
    p.add_argument("x")
    p.add_argument("y")
    common(p)
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("fixtures", help="emit the miniature reference languages")
    common(p)
    p.set_defaults(func=cmd_fixtures)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ResourceError as exc:
        print(f"resource error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
