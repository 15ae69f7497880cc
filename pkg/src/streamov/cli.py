"""Command line entry point: ``streamov <command> ...``.

Exit codes: 0 success, 2 invalid input or configuration, 3 backbone failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import oracle
from .backbone import make_backbone
from .config import load_config
from .errors import BackboneError, InputError
from .harness.engine import SessionTrace, run_session
from .harness.evaluation import eval_trigger, metrics_from_labels, quality_filter
from .harness.report import write_step_csv
from .harness.synthetic import SynthConfig, gen_synthetic_session
from .ingest import read_session, write_session
from .trigger import (
    DatasetConfig,
    TriggerParams,
    build_trigger_dataset,
    predict,
    train_trigger,
    trigger_backward,
)

log = logging.getLogger("streamov")

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_BACKBONE = 3

TRACE_SUFFIX = ".trace.jsonl"


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def cmd_run(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    script = read_session(args.session)
    params = TriggerParams.load(args.trigger) if args.trigger else None
    backbone = make_backbone(cfg)
    trace = run_session(script, cfg, backbone, params)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    trace.write(out / f"{script.meta.id}{TRACE_SUFFIX}")
    write_step_csv([trace], out / f"{script.meta.id}.steps.csv")
    n = len(trace.decisions)
    log.info("session %s: %d steps, %d decisions", script.meta.id, len(trace.steps), n)
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    paths = sorted(Path(args.traces).glob(f"*{TRACE_SUFFIX}"))
    if not paths:
        raise InputError(f"no *{TRACE_SUFFIX} files in {args.traces}")
    metrics = eval_trigger(SessionTrace.read(p) for p in paths)
    metrics.write(args.out)
    print(json.dumps(metrics.to_json(), sort_keys=True))
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    files = sorted(Path(args.sessions).glob("*.jsonl"))
    files = [f for f in files if not f.name.endswith(TRACE_SUFFIX)]
    if not files:
        raise InputError(f"no session files in {args.sessions}")
    backbone = make_backbone(cfg)
    data = build_trigger_dataset(
        (read_session(f) for f in files), backbone, cfg, DatasetConfig(args.n_pos, args.n_neg)
    )
    if len(data) == 0:
        raise InputError("sessions yielded no labeled queries")
    train, held = data.split(args.holdout, cfg.trigger.seed) if args.holdout > 0 else (data, None)
    params, history = train_trigger(train, cfg.trigger)
    params.meta["loss_history"] = history
    params.save(args.out)
    summary = {"examples": len(data), "final_loss": history[-1] if history else None}
    if held is not None and len(held):
        m = metrics_from_labels(predict(params, held, cfg.trigger.threshold), held.labels)
        summary["holdout_macro_f1"] = m.macro_f1
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def cmd_gen(args: argparse.Namespace) -> int:
    cfg = SynthConfig(
        n_obs=args.n_obs,
        n_queries=args.n_queries,
        pos_ratio=args.pos_ratio,
        distractor_ratio=args.distractor_ratio,
        emb_dim=args.emb_dim,
        embed_seed=args.embed_seed,
    )
    session = gen_synthetic_session(args.seed, cfg)
    write_session(session.script, args.out)
    return EXIT_OK


def cmd_filter(args: argparse.Namespace) -> int:
    verdict = quality_filter(args.scores)
    print(json.dumps({"total_score": verdict.total, "recommendation": verdict.recommendation}))
    return EXIT_OK


def cmd_oracle(args: argparse.Namespace) -> int:
    if args.check == "topk":
        history = [(i, float(i), b) for i, b in enumerate(args.scores)]
        print(json.dumps(sorted(oracle.global_topk(history, args.k))))
    elif args.check == "evidence":
        if len(args.raw) != 5:
            raise InputError("--raw takes five normalized scores: s_qv,s_v,s_qa,s_a,s_cob")
        ev = oracle.naive_fuse(*args.raw)
        names = ("s_qa_gated", "e_v", "e_a", "e_av", "e_v_hat", "e_a_hat", "base")
        out = {k: float(getattr(ev, k)) for k in names}
        out["route"] = ev.route
        print(json.dumps(out))
    else:
        rng = np.random.default_rng(args.seed)
        params = TriggerParams.init(args.d, args.h, args.seed)
        params.q_tr = rng.standard_normal(args.d)
        params.b1 = rng.standard_normal(args.h) * 0.1
        hs = rng.standard_normal((args.states, args.d))
        label = int(rng.integers(2))
        ana = trigger_backward(params, hs, label)
        num = oracle.fd_gradients(params, hs, label, args.eps)
        errs = {k: oracle.relative_error(ana[k], num[k]) for k in ana}
        print(json.dumps(errs, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="streamov", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="replay one session through the pipeline")
    r.add_argument("--session", required=True)
    r.add_argument("--config")
    r.add_argument("--trigger", help="trained trigger params (JSON); default answers every query")
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_run)

    e = sub.add_parser("eval", help="triggering metrics over a directory of traces")
    e.add_argument("--traces", required=True)
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_eval)

    t = sub.add_parser("train-trigger", help="harvest prefill states from sessions and train the trigger")
    t.add_argument("--sessions", required=True)
    t.add_argument("--config")
    t.add_argument("--out", required=True)
    t.add_argument("--n-pos", type=int, default=None)
    t.add_argument("--n-neg", type=int, default=None)
    t.add_argument("--holdout", type=float, default=0.2)
    t.set_defaults(func=cmd_train)

    g = sub.add_parser("gen", help="write a synthetic session file")
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--n-obs", type=int, required=True)
    g.add_argument("--n-queries", type=int, required=True)
    g.add_argument("--pos-ratio", type=float, default=0.5)
    g.add_argument("--distractor-ratio", type=int, default=7)
    g.add_argument("--emb-dim", type=int, default=64)
    g.add_argument("--embed-seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    f = sub.add_parser("filter", help="benchmark quality filter over five 0-10 scores")
    f.add_argument("--scores", type=_ints, required=True)
    f.set_defaults(func=cmd_filter)

    o = sub.add_parser("oracle", help="spot checks against the brute-force references")
    osub = o.add_subparsers(dest="check", required=True)
    ot = osub.add_parser("topk")
    ot.add_argument("--scores", type=_floats, required=True)
    ot.add_argument("--k", type=int, required=True)
    oe = osub.add_parser("evidence")
    oe.add_argument("--raw", type=_floats, required=True)
    og = osub.add_parser("gradcheck")
    og.add_argument("--seed", type=int, default=0)
    og.add_argument("--d", type=int, default=16)
    og.add_argument("--h", type=int, default=32)
    og.add_argument("--states", type=int, default=4)
    og.add_argument("--eps", type=float, default=1e-5)
    o.set_defaults(func=cmd_oracle)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except BackboneError as exc:
        step = getattr(exc, "step", None)
        print(f"backbone error{'' if step is None else f' at step {step}'}: {exc}", file=sys.stderr)
        return EXIT_BACKBONE
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc.filename or ''}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
