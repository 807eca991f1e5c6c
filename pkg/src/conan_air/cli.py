"""Command-line front end.

Exit codes: 0 success, 1 data error, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import sys
from collections import Counter
from typing import Iterator, Optional

from . import __version__
from .config import ConfigError, ServiceConfig, load_config, resolve, section
from .corpus import (
    CorpusError,
    CorpusSample,
    FrameLabel,
    LabelThresholds,
    SyntheticSpec,
    gen_synthetic,
    ingest,
    sample_from_record,
    serialize,
)
from .edas import (
    CurriculumSpec,
    EdiScore,
    InfeasibleQuota,
    PoolEntry,
    Stage,
    edi,
    sample_curriculum,
    scale_round_quota,
    stratum_of,
)
from .reasoner import MockReasoner, ReasonerError, RemoteReasoner
from .tracer import Stage as ExportStage
from .tracer import Trace, TracerConfig, build_traces, export_stage, round_count, stage_accepts

PROG = "conan-air"


class DataError(Exception):
    pass


# ---------------------------------------------------------------------------
# I/O helpers


@contextlib.contextmanager
def _output(path: Optional[str]):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            yield fh


def _summary(args, text: str):
    # keep stdout clean for data when no --out is given
    stream = sys.stderr if args.out in (None, "-") else sys.stdout
    print(text, file=stream)


def _read_jsonl(path: str) -> Iterator[tuple[int, dict]]:
    try:
        fh = sys.stdin if path == "-" else open(path, encoding="utf-8")
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror}") from None
    with fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                yield lineno, json.loads(line)
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: invalid JSON: {exc}") from None


def _load_corpus(path: str, thresholds: LabelThresholds) -> list[CorpusSample]:
    try:
        fh = sys.stdin if path == "-" else open(path, encoding="utf-8")
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror}") from None
    with fh:
        try:
            return ingest(fh, thresholds)
        except CorpusError as exc:
            raise DataError(f"{path}: {exc}") from None


def _thresholds(args, cfg) -> LabelThresholds:
    c = section(cfg, "corpus")
    try:
        return LabelThresholds(
            resolve(getattr(args, "t_evidence", None), c.get("t_evidence"), None, 0.7, float),
            resolve(getattr(args, "t_contextual", None), c.get("t_contextual"), None, 0.3, float),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _tracer_config(args, cfg) -> TracerConfig:
    t = section(cfg, "tracer")
    try:
        return TracerConfig(
            initial_frames=resolve(getattr(args, "initial_frames", None), t.get("initial_frames"), None, 16, int),
            frames_per_retrieval=resolve(
                getattr(args, "frames_per_retrieval", None), t.get("frames_per_retrieval"), None, 8, int
            ),
            retrieval_threshold=resolve(
                getattr(args, "retrieval_threshold", None), t.get("retrieval_threshold"), None, 0.5, float
            ),
            max_rounds=resolve(getattr(args, "max_rounds", None), t.get("max_rounds"), None, 3, int),
            seed=args.seed,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _manifest_line(sample_id: str, score: EdiScore, rounds: int, threshold: float) -> dict:
    return {
        "sample_id": sample_id,
        "p": score.p,
        "var_raw": score.var_raw,
        "edi_paper": score.edi_paper,
        "edi_norm": score.edi_norm,
        "round_count": rounds,
        "stratum": stratum_of(score, threshold),
    }


def _write_jsonl(fh, records):
    for r in records:
        fh.write(json.dumps(r, ensure_ascii=False) + "\n")


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen_synthetic(args, cfg):
    try:
        spec = SyntheticSpec(
            n_samples=args.n_samples,
            n_frames=args.n_frames,
            evidence_ratio_range=(args.ratio_min, args.ratio_max),
            seed=args.seed,
            free_form_fraction=args.free_form_fraction,
            max_clusters=args.max_clusters,
            spread_range=(args.spread_min, args.spread_max),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    samples = gen_synthetic(spec, _thresholds(args, cfg))
    with _output(args.out) as fh:
        fh.write(serialize(samples))
    _summary(args, f"gen-synthetic: {len(samples)} samples x {args.n_frames} frames (seed {args.seed})")


def cmd_ingest(args, cfg):
    samples = _load_corpus(args.input, _thresholds(args, cfg))
    counts = Counter(f.label for s in samples for f in s.frames)
    with _output(args.out) as fh:
        fh.write(serialize(samples))
    _summary(
        args,
        f"ingest: {len(samples)} samples; frames evidence={counts[FrameLabel.EVIDENCE]} "
        f"contextual={counts[FrameLabel.CONTEXTUAL]} irrelevant={counts[FrameLabel.IRRELEVANT]}",
    )


def _trace_rounds(path: str) -> dict[str, int]:
    out = {}
    for lineno, rec in _read_jsonl(path):
        try:
            out[rec["sample_id"]] = int(rec["round_count"])
        except (KeyError, TypeError, ValueError):
            raise DataError(f"{path}:{lineno}: trace record needs sample_id and round_count") from None
    return out


def cmd_edi(args, cfg):
    e = section(cfg, "edas")
    threshold = resolve(args.threshold, e.get("threshold"), None, 0.5, float)
    positions = resolve(args.positions, e.get("positions"), None, "index", str)
    samples = _load_corpus(args.input, _thresholds(args, cfg))
    tcfg = _tracer_config(args, cfg)
    rounds = _trace_rounds(args.traces) if args.traces else None
    lines = []
    for s in samples:
        if rounds is not None:
            if s.sample_id not in rounds:
                raise DataError(f"{args.traces}: no trace for sample {s.sample_id!r}")
            rc = rounds[s.sample_id]
        else:
            rc = round_count(s, tcfg)
        lines.append(_manifest_line(s.sample_id, edi(s, positions), rc, threshold))
    with _output(args.out) as fh:
        _write_jsonl(fh, lines)
    mean = sum(l["edi_norm"] for l in lines) / len(lines) if lines else 0.0
    easy = sum(1 for l in lines if l["stratum"] == "easy")
    _summary(args, f"edi: {len(lines)} samples; mean edi_norm={mean:.4f}; easy={easy} hard={len(lines) - easy}")


def _parse_quota(text: str) -> dict[int, int]:
    quota = {}
    try:
        for part in text.split(","):
            r, c = part.split(":")
            quota[int(r)] = int(c)
    except ValueError:
        raise ConfigError(f"bad --round-quota {text!r}; expected e.g. 1:25,2:25,3:10") from None
    return quota


def _pool_from_file(path: str, args, cfg) -> list[PoolEntry]:
    pool = []
    tcfg = None
    thresholds = _thresholds(args, cfg)
    for lineno, rec in _read_jsonl(path):
        try:
            if "edi_norm" in rec:
                score = EdiScore(float(rec["p"]), float(rec["var_raw"]), float(rec["edi_paper"]), float(rec["edi_norm"]))
                pool.append(PoolEntry(str(rec["sample_id"]), score, int(rec["round_count"])))
            else:
                s = sample_from_record(rec, thresholds)
                tcfg = tcfg or _tracer_config(args, cfg)
                pool.append(PoolEntry(s, edi(s), round_count(s, tcfg)))
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from None
    return pool


def cmd_sample(args, cfg):
    e = section(cfg, "edas")
    threshold = resolve(args.threshold, e.get("threshold"), None, 0.5, float)
    pool = _pool_from_file(args.input, args, cfg)
    quota = None
    if args.round_quota:
        quota = _parse_quota(args.round_quota)
    elif args.default_quotas:
        quota = scale_round_quota(args.size)
    try:
        spec = CurriculumSpec(
            stage=Stage(args.stage),
            target_size=args.size,
            easy_fraction=args.easy_fraction,
            edi_threshold=threshold,
            round_quota=quota,
            seed=args.seed,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    try:
        ids = sample_curriculum(pool, spec)
    except InfeasibleQuota as exc:
        raise DataError(f"{args.input}: {exc}") from None
    by_id = {p.sample_id: p for p in pool}
    lines = [_manifest_line(i, by_id[i].edi, by_id[i].round_count, threshold) for i in ids]
    with _output(args.out) as fh:
        _write_jsonl(fh, lines)
    easy = sum(1 for l in lines if l["stratum"] == "easy")
    _summary(args, f"sample: stage={args.stage} selected={len(lines)} easy={easy} hard={len(lines) - easy}")


def cmd_build_traces(args, cfg):
    samples = _load_corpus(args.input, _thresholds(args, cfg))
    tcfg = _tracer_config(args, cfg)
    if args.reasoner == "remote":
        try:
            reasoner = RemoteReasoner(max_in_flight=args.workers)
        except ReasonerError as exc:
            raise ConfigError(str(exc)) from None
    else:
        reasoner = MockReasoner()
    norms = [edi(s).edi_norm for s in samples]
    traces, failures = build_traces(samples, reasoner, tcfg, workers=args.workers, edi_norms=norms)
    with _output(args.out) as fh:
        _write_jsonl(fh, (t.to_dict() for t in traces))
    hist = Counter(t.round_count for t in traces)
    rounds = " ".join(f"{k}-round={hist[k]}" for k in sorted(hist))
    _summary(args, f"build-traces: {len(traces)} traces, {len(failures)} failed; {rounds}".rstrip("; "))
    if failures:
        for sid, reason in failures:
            print(f"failed {sid}: {reason}", file=sys.stderr)


def cmd_export_stage(args, cfg):
    samples = {s.sample_id: s for s in _load_corpus(args.corpus, _thresholds(args, cfg))}
    stage = ExportStage(args.stage)
    records = []
    skipped = 0
    for lineno, rec in _read_jsonl(args.input):
        try:
            trace = Trace.from_dict(rec)
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"{args.input}:{lineno}: invalid trace: {exc}") from None
        if trace.sample_id not in samples:
            raise DataError(f"{args.input}:{lineno}: sample {trace.sample_id!r} not in {args.corpus}")
        if not args.all_rounds and not stage_accepts(trace, stage):
            skipped += 1
            continue
        records.append(export_stage(trace, samples[trace.sample_id], stage))
    with _output(args.out) as fh:
        _write_jsonl(fh, records)
    _summary(args, f"export-stage: stage={stage.value} exported={len(records)} skipped={skipped}")


def cmd_score(args, cfg):
    from .service import score_item

    results = []
    for lineno, rec in _read_jsonl(args.input):
        res = score_item(rec)
        res["line"] = lineno
        results.append(res)
    with _output(args.out) as fh:
        _write_jsonl(fh, results)
    ok = [r for r in results if "error" not in r]
    mean = sum(r["r_total"] for r in ok) / len(ok) if ok else 0.0
    _summary(args, f"score: {len(results)} rollouts, {len(results) - len(ok)} errors; mean r_total={mean:.4f}")


def cmd_simulate(args, cfg):
    from .simenv import PolicyKind, SimConfig, default_corpus, run_policy

    s = section(cfg, "simulate")
    episodes = resolve(args.episodes, s.get("episodes"), None, 500, int)
    if episodes < 1:
        raise ConfigError("--episodes must be >= 1")
    corpus = _load_corpus(args.corpus, _thresholds(args, cfg)) if args.corpus else default_corpus()
    if not corpus:
        raise DataError("simulation corpus is empty")
    tcfg = _tracer_config(args, cfg)
    sim = SimConfig(tcfg.initial_frames, tcfg.frames_per_retrieval, tcfg.max_rounds, tcfg.retrieval_threshold)
    policies = list(PolicyKind) if args.policy == "all" else [PolicyKind(args.policy)]
    reports = [(p, run_policy(corpus, p, episodes, sim, args.seed)) for p in policies]
    with _output(args.out) as fh:
        for k, (_, rep) in enumerate(reports):
            fh.write(rep.to_csv(header=(k == 0)))
    for p, rep in reports:
        m = rep.summary()
        _summary(
            args,
            f"simulate: policy={p.value} episodes={m['episodes']} mean_r_total={m['mean_r_total']:.4f} "
            f"mean_r_ide={m['mean_r_ide']:.4f} mean_r_ret={m['mean_r_ret']:.4f} "
            f"mean_retrievals={m['mean_retrievals']:.4f} accuracy={m['accuracy']:.4f}",
        )


def cmd_serve(args, cfg):
    from .service import serve

    scfg = ServiceConfig.build(cfg, host=args.host, port=args.port, max_batch=args.max_batch, workers=args.workers)
    serve(scfg)


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="TOML config file")
    common.add_argument("--seed", type=int, help="random seed (default: 0)")
    common.add_argument("--out", metavar="PATH", help="output file (default: stdout)")

    labels = argparse.ArgumentParser(add_help=False)
    labels.add_argument("--t-evidence", type=float, help="evidence threshold on normalized scores (default: 0.7)")
    labels.add_argument("--t-contextual", type=float, help="contextual threshold on normalized scores (default: 0.3)")

    loop = argparse.ArgumentParser(add_help=False)
    loop.add_argument("--initial-frames", type=int, help="uniformly sampled frames in round 1 (default: 16)")
    loop.add_argument("--frames-per-retrieval", type=int, help="frames fetched per sampling/retrieval (default: 8)")
    loop.add_argument("--retrieval-threshold", type=float, help="evidence proportion needed to answer (default: 0.5)")
    loop.add_argument("--max-rounds", type=int, help="reasoning round cap (default: 3)")

    parser = argparse.ArgumentParser(prog=PROG, description="Evidence-grounded video reasoning traces, curricula and rewards.")
    parser.add_argument("--version", action="version", version=f"{PROG} {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("gen-synthetic", parents=[common, labels], help="generate a synthetic labeled corpus")
    p.add_argument("--n-samples", type=int, default=100, help="number of samples (default: 100)")
    p.add_argument("--n-frames", type=int, default=64, help="frames per sample (default: 64)")
    p.add_argument("--ratio-min", type=float, default=0.05, help="minimum evidence ratio (default: 0.05)")
    p.add_argument("--ratio-max", type=float, default=0.5, help="maximum evidence ratio (default: 0.5)")
    p.add_argument("--free-form-fraction", type=float, default=0.25, help="share of free-form questions (default: 0.25)")
    p.add_argument("--max-clusters", type=int, default=3, help="most evidence clusters per sample (default: 3)")
    p.add_argument("--spread-min", type=float, default=0.0, help="smallest span of the clusters as a video fraction (default: 0.0)")
    p.add_argument("--spread-max", type=float, default=1.0, help="largest span of the clusters as a video fraction (default: 1.0)")
    p.set_defaults(func=cmd_gen_synthetic)

    p = sub.add_parser("ingest", parents=[common, labels], help="validate, normalize and label a corpus")
    p.add_argument("--input", required=True, metavar="PATH", help="line-delimited corpus records")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("edi", parents=[common, labels, loop], help="compute evidence difficulty per sample")
    p.add_argument("--input", required=True, metavar="PATH", help="line-delimited corpus records")
    p.add_argument("--positions", choices=["index", "time"], help="evidence position normalization (default: index)")
    p.add_argument("--threshold", type=float, help="edi_norm threshold between easy and hard (default: 0.5)")
    p.add_argument("--traces", metavar="PATH", help="take round counts from built traces instead of replanning")
    p.set_defaults(func=cmd_edi)

    p = sub.add_parser("sample", parents=[common, labels, loop], help="draw an SFT or RLVR curriculum split")
    p.add_argument("--input", required=True, metavar="PATH", help="EDI manifest or corpus records")
    p.add_argument("--stage", required=True, choices=["sft", "rlvr"], help="curriculum stage")
    p.add_argument("--size", required=True, type=int, help="number of samples to select")
    p.add_argument("--threshold", type=float, help="edi_norm threshold between easy and hard (default: 0.5)")
    p.add_argument("--easy-fraction", type=float, help="share of easy samples (default: 0.7 sft, 0.3 rlvr)")
    q = p.add_mutually_exclusive_group()
    q.add_argument("--round-quota", metavar="R:N,...", help="exact round-count quotas, e.g. 1:25,2:25,3:10")
    q.add_argument("--default-quotas", action="store_true", help="scale the 25k/25k/10k round split to --size")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("build-traces", parents=[common, labels, loop], help="construct multi-round reasoning traces")
    p.add_argument("--input", required=True, metavar="PATH", help="line-delimited corpus records")
    p.add_argument("--reasoner", choices=["mock", "remote"], default="mock", help="reasoning text generator (default: mock)")
    p.add_argument("--workers", type=int, default=1, help="parallel traces / in-flight requests (default: 1)")
    p.set_defaults(func=cmd_build_traces)

    p = sub.add_parser("export-stage", parents=[common, labels], help="render traces for one cold-start stage")
    p.add_argument("--input", required=True, metavar="PATH", help="trace records")
    p.add_argument("--corpus", required=True, metavar="PATH", help="corpus the traces were built from")
    p.add_argument("--stage", required=True, choices=[s.value for s in ExportStage], help="cold-start stage")
    p.add_argument("--all-rounds", action="store_true", help="export every trace regardless of the stage's round limit")
    p.set_defaults(func=cmd_export_stage)

    p = sub.add_parser("score", parents=[common], help="score rollouts offline")
    p.add_argument("--input", required=True, metavar="PATH", help="line-delimited score items")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("simulate", parents=[common, labels, loop], help="roll out a policy in the episode simulator")
    p.add_argument("--policy", choices=["oracle", "greedy", "random", "all"], default="all", help="policy (default: all)")
    p.add_argument("--episodes", type=int, help="episodes per policy (default: 500)")
    p.add_argument("--corpus", metavar="PATH", help="corpus records (default: built-in synthetic corpus)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("serve", parents=[common], help="run the reward verifier service")
    p.add_argument("--host", help="bind address (default: 127.0.0.1)")
    p.add_argument("--port", type=int, help="port (default: 8080, env CONAN_PORT)")
    p.add_argument("--max-batch", type=int, help="largest accepted /v1/score batch (default: 512, env CONAN_MAX_BATCH)")
    p.add_argument("--workers", type=int, help="scoring threads per batch (default: 1)")
    p.set_defaults(func=cmd_serve)

    return parser


def help_texts(width: int = 100) -> dict[str, str]:
    """Rendered --help for the program and every subcommand at a fixed width."""
    import os

    saved = os.environ.get("COLUMNS")
    os.environ["COLUMNS"] = str(width)
    try:
        parser = build_parser()
        out = {PROG: parser.format_help()}
        sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
        for name, p in sub.choices.items():
            out[name] = p.format_help()
        return out
    finally:
        if saved is None:
            del os.environ["COLUMNS"]
        else:
            os.environ["COLUMNS"] = saved


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        args.seed = resolve(args.seed, cfg.get("seed"), None, 0, int)
        args.func(args, cfg)
    except ConfigError as exc:
        print(f"{PROG}: config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
