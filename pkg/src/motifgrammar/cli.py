"""Command-line pipeline: induce, rank, generate, eval, roundtrip-check."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .canon import is_isomorphic
from .config import ConfigError, RunConfig
from .decompose import DecompositionLog, decompose_full
from .generate import Limits, SampleRejected, replay_derivation, sample_many
from .hrg import Grammar, ProductionRule, degenerate_rule, extract_rules
from .metrics import MetricReport, evaluate
from .molecule import MoleculeError, parse_smiles, read_smiles_file, write_smiles
from .oracle.base import Oracle, OracleFailure
from .oracle.heuristic import make_oracle
from .oracle.remote import CassetteTransport, EndpointOracle, HttpJsonTransport, RemoteOracle
from .rank import (
    DesignStory,
    Judge,
    LengthJudge,
    RemoteJudge,
    TournamentResult,
    assemble_topk,
    build_story,
    rule_multiset,
    tournament,
)

log = logging.getLogger("motifgrammar")


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.chmod(tmp, 0o644)
    os.replace(tmp, path)


def _transport(endpoint: str, cassette: str, mode: str):
    inner = HttpJsonTransport(endpoint) if endpoint else None
    if cassette:
        return CassetteTransport(cassette, mode, inner)
    return inner


def build_oracle(cfg: RunConfig, seed: int, transport=None) -> Oracle:
    if cfg.oracle != "remote":
        return make_oracle(cfg.oracle, seed, cfg.motifs)
    if transport is None:
        transport = _transport(cfg.endpoint, cfg.cassette, cfg.cassette_mode)
    if cfg.remote_protocol == "selection":
        return EndpointOracle(transport)
    return RemoteOracle(transport, model=cfg.model)


def build_judge(cfg: RunConfig) -> Judge:
    if cfg.judge == "remote":
        return RemoteJudge(_transport(cfg.judge_endpoint, cfg.judge_cassette, cfg.cassette_mode))
    return LengthJudge()


def msg_path(cfg: RunConfig, i: int, p: int) -> Path:
    return cfg.out_dir / "msgs" / f"m{i:03d}_p{p}.json"


def log_path(cfg: RunConfig, i: int, p: int) -> Path:
    return cfg.out_dir / "logs" / f"m{i:03d}_p{p}.jsonl"


def msg_to_json(smiles: str, p: int, seed: int, rules: Sequence[ProductionRule]) -> str:
    data = {"molecule": smiles, "pass": p, "seed": seed, "rules": [r.to_json() for r in rules]}
    return json.dumps(data, sort_keys=True, indent=1) + "\n"


def load_msg(path: Path) -> tuple[str, list[ProductionRule]]:
    data = json.loads(path.read_text(encoding="utf-8"))
    return data["molecule"], [ProductionRule.from_json(r) for r in data["rules"]]


@dataclass
class MoleculeResult:
    index: int
    smiles: str
    msgs: list[list[ProductionRule]]
    logs: list[DecompositionLog]
    error: str = ""


def induce_molecule(cfg: RunConfig, i: int, smiles: str, transport=None) -> MoleculeResult:
    """All K passes for one molecule; files are written as each pass finishes."""
    result = MoleculeResult(i, smiles, [], [])
    try:
        g = parse_smiles(smiles)
        for p in range(cfg.passes):
            seed = cfg.derived_seed(i, p)
            if g.num_bonds == 0:
                rules, dlog = [degenerate_rule(g)], DecompositionLog(write_smiles(g), seed)
            else:
                d = decompose_full(g, build_oracle(cfg, seed, transport), seed)
                rules, dlog = extract_rules(d.tree, g, d.assignment), d.log
                if dlog.fallback_count:
                    log.warning("molecule %d pass %d: %d step(s) used the fallback oracle",
                                i, p, dlog.fallback_count)
            write_atomic(log_path(cfg, i, p), dlog.to_jsonl())
            write_atomic(msg_path(cfg, i, p), msg_to_json(smiles, p, seed, rules))
            result.msgs.append(rules)
            result.logs.append(dlog)
    except (MoleculeError, OracleFailure, RuntimeError, ValueError) as exc:
        result.error = f"{type(exc).__name__}: {exc}"
    return result


def _map(cfg: RunConfig, fn, items):
    if cfg.workers == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        return list(pool.map(fn, items))


def rank_molecule(
    cfg: RunConfig, i: int, msgs: Sequence[Sequence[ProductionRule]],
    logs: Sequence[DecompositionLog], client: Judge,
) -> TournamentResult:
    signatures = {rule_multiset(m) for m in msgs}
    if len(signatures) == 1:
        log.info("molecule %d: all passes agree, standings are trivial", i)
        stories: list[DesignStory | None] = [None] * len(msgs)
    else:
        stories = [build_story(lg, lg.molecule, p) for p, lg in enumerate(logs)]
    result = tournament(stories, msgs, client)
    write_atomic(cfg.out_dir / "rank" / f"m{i:03d}.json",
                 json.dumps(result.to_json(), sort_keys=True, indent=1) + "\n")
    return result


def _dataset(cfg: RunConfig) -> list[str]:
    if not cfg.dataset:
        raise ConfigError("no dataset given")
    return read_smiles_file(cfg.dataset)


def write_grammar(cfg: RunConfig, rankings: Sequence[Sequence[int]],
                  msgs: Sequence[Sequence[Sequence[ProductionRule]]]) -> Path:
    grammar = assemble_topk(rankings, msgs, cfg.k, cfg.mode)
    path = cfg.grammar_path()
    write_atomic(path, grammar.dumps())
    return path


def cmd_induce(cfg: RunConfig) -> int:
    smiles = _dataset(cfg)
    transport = None
    if cfg.oracle == "remote":
        # one transport for all workers so the cassette is shared
        transport = _transport(cfg.endpoint, cfg.cassette, cfg.cassette_mode)
    results = _map(cfg, lambda item: induce_molecule(cfg, item[0], item[1], transport),
                   list(enumerate(smiles)))
    failed = [r for r in results if r.error]
    for r in failed:
        log.error("molecule %d (%s) failed: %s", r.index, r.smiles, r.error)
    if failed:
        return 1
    msgs = [r.msgs for r in results]
    if cfg.mode == "topk" and cfg.k < cfg.passes:
        client = build_judge(cfg)
        rankings = _map(cfg, lambda r: rank_molecule(cfg, r.index, r.msgs, r.logs, client).ranking, results)
    else:
        rankings = [list(range(cfg.passes)) for _ in results]
    path = write_grammar(cfg, rankings, msgs)
    print(f"induced {len(results)} molecule(s) x {cfg.passes} pass(es); grammar written to {path}")
    return 0


def _load_outputs(cfg: RunConfig, n: int):
    msgs, logs = [], []
    for i in range(n):
        msgs.append([load_msg(msg_path(cfg, i, p))[1] for p in range(cfg.passes)])
        logs.append([DecompositionLog.from_jsonl(log_path(cfg, i, p).read_text(encoding="utf-8"))
                     for p in range(cfg.passes)])
    return msgs, logs


def cmd_rank(cfg: RunConfig) -> int:
    smiles = _dataset(cfg)
    msgs, logs = _load_outputs(cfg, len(smiles))
    client = build_judge(cfg)
    results = _map(cfg, lambda i: rank_molecule(cfg, i, msgs[i], logs[i], client), range(len(smiles)))
    standings = {f"m{i:03d}": r.ranking for i, r in enumerate(results)}
    write_atomic(cfg.out_dir / "rank" / "standings.json", json.dumps(standings, sort_keys=True, indent=1) + "\n")
    path = write_grammar(cfg.override(mode="topk"), [r.ranking for r in results], msgs)
    print(f"ranked {len(results)} molecule(s); top-{cfg.k} grammar written to {path}")
    return 0


def _pattern(cfg: RunConfig):
    return parse_smiles(cfg.membership_pattern) if cfg.membership_pattern else None


def _print_report(report: MetricReport, path: Path) -> None:
    write_atomic(path, json.dumps(report.to_json(), sort_keys=True, indent=1) + "\n")
    print(report.table())


def cmd_generate(cfg: RunConfig, grammar_path: Path | None = None) -> int:
    path = grammar_path or cfg.grammar_path()
    grammar = Grammar.loads(Path(path).read_text(encoding="utf-8"))
    batch = sample_many(grammar, cfg.n_samples, cfg.derived_seed("generate"), cfg.limits)
    samples = [write_smiles(s.molecule) for s in batch.accepted]
    stem = Path(path).stem.replace("grammar", "samples")
    write_atomic(cfg.out_dir / f"{stem}.smi", "".join(s + "\n" for s in samples))
    sidecar = {
        "grammar": str(path),
        "attempts": batch.attempts,
        "raw_valid_rate": batch.raw_valid_rate,
        "rejections": dict(sorted(batch.rejections.items())),
        "samples": [{"seed": s.seed, "smiles": smi, "trace": s.trace} for s, smi in zip(batch.accepted, samples)],
    }
    write_atomic(cfg.out_dir / f"{stem}_trace.json", json.dumps(sidecar, indent=1) + "\n")
    if not samples:
        log.error("no valid sample in %d attempts (%s)", batch.attempts, batch.rejections)
        return 1
    train = _dataset(cfg) if cfg.dataset else samples
    report = evaluate(samples, train, _pattern(cfg), sum(batch.rejections.values()))
    print(f"attempts {batch.attempts}, raw valid rate {batch.raw_valid_rate:.4f}, rejections {batch.rejections}")
    _print_report(report, cfg.out_dir / f"{stem}_report.json")
    return 0 if report.valid > 0 else 1


def cmd_eval(cfg: RunConfig, samples_path: Path) -> int:
    samples = read_smiles_file(samples_path)
    report = evaluate(samples, _dataset(cfg), _pattern(cfg))
    _print_report(report, Path(samples_path).with_suffix(".report.json"))
    return 0


def cmd_roundtrip(cfg: RunConfig) -> int:
    """Every stored MSG must derive back to its own molecule."""
    smiles = _dataset(cfg)
    limits = Limits(max_depth=10**6, max_bonds=10**6, match="typed")
    bad = 0
    for i, s in enumerate(smiles):
        g = parse_smiles(s)
        for p in range(cfg.passes):
            _, rules = load_msg(msg_path(cfg, i, p))
            try:
                ok = is_isomorphic(replay_derivation(rules, limits), g)
            except SampleRejected as exc:
                ok = False
                log.error("molecule %d pass %d: replay rejected (%s)", i, p, exc)
            if not ok:
                bad += 1
                print(f"FAIL m{i:03d} p{p} {s}")
    total = len(smiles) * cfg.passes
    print(f"round-trip: {total - bad}/{total} MSGs regenerate their molecule")
    return 1 if bad else 0


def parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="motifgrammar", description=__doc__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON run configuration")
    common.add_argument("--dataset", help="SMILES file, one molecule per line")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int)
    common.add_argument("--workers", type=int)
    common.add_argument("--oracle", help="heuristic preset name, motif, motif-merge or remote")
    common.add_argument("--endpoint", help="URL of the remote oracle")
    common.add_argument("--passes", type=int, help="decomposition passes per molecule (K)")
    common.add_argument("--k", type=int, help="passes pooled per molecule")
    common.add_argument("--mode", choices=("topk", "first_k"))
    common.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("induce", parents=[common], help="decompose the dataset and pool a grammar")
    sub.add_parser("rank", parents=[common], help="rank passes per molecule and pool the top k")
    gen = sub.add_parser("generate", parents=[common], help="sample molecules from a grammar")
    gen.add_argument("--grammar", type=Path)
    gen.add_argument("-n", "--n-samples", type=int)
    ev = sub.add_parser("eval", parents=[common], help="score a SMILES file against the dataset")
    ev.add_argument("samples", type=Path)
    sub.add_parser("roundtrip-check", parents=[common], help="replay each MSG and compare")
    return ap


def config_from_args(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    return cfg.override(
        dataset=args.dataset, out=args.out, seed=args.seed, workers=args.workers,
        oracle=args.oracle, endpoint=args.endpoint, passes=args.passes, k=args.k, mode=args.mode,
        n_samples=getattr(args, "n_samples", None),
    )


def main(argv: Sequence[str] | None = None) -> int:
    args = parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
        if args.command == "induce":
            return cmd_induce(cfg)
        if args.command == "rank":
            return cmd_rank(cfg)
        if args.command == "generate":
            return cmd_generate(cfg, args.grammar)
        if args.command == "eval":
            return cmd_eval(cfg, args.samples)
        return cmd_roundtrip(cfg)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
