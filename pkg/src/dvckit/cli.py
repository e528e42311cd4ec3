"""Command-line entry point.

Subcommands: eval-dvc, eval-tvg, build-cotasks, build-mdpo-pairs, mdpo-loss,
toy-margin. Every run is idempotent; floats are written with fixed 6-decimal
rounding and all randomness flows through --seed. Report subcommands also
render a PNG figure next to each output file unless --no-figures is given.

Exit status: 0 on success, 1 on validation errors (including bad flags),
2 on I/O errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import cotasks, dvceval, formats, mdpo_data, mdpo_objective, toylab
from .core import CorpusParseError, parse_annotations, parse_predictions
from .textsim import MeteorParams


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad flags by default; the CLI contract wants 1
    def error(self, message):
        raise _UsageError(message)


def _float_list(text: str) -> tuple[float, ...]:
    try:
        values = tuple(float(part) for part in text.split(",") if part.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a comma-separated float list: {text!r}") from exc
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _path_list(text: str) -> tuple[cotasks.PathKind, ...]:
    try:
        return tuple(cotasks.PathKind(part.strip()) for part in text.split(",") if part.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _read(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def _write(path: str, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8")


def _figure_path(out: str, suffix: str) -> Path:
    out = Path(out)
    return out.with_name(f"{out.stem}_{suffix}.png")


def _meteor_params(args) -> MeteorParams:
    return MeteorParams(
        alpha=args.meteor_alpha,
        beta_frag=args.meteor_beta,
        gamma_frag=args.meteor_gamma,
        use_stemming=args.meteor_stemming,
    )


def _add_meteor_flags(parser) -> None:
    parser.add_argument("--meteor-alpha", type=float, default=0.9)
    parser.add_argument("--meteor-beta", type=float, default=3.0)
    parser.add_argument("--meteor-gamma", type=float, default=0.5)
    parser.add_argument(
        "--meteor-stemming", action=argparse.BooleanOptionalAction, default=False
    )


def _add_common_flags(parser) -> None:
    parser.add_argument("--out", required=True, help="output file path")
    parser.add_argument(
        "--figures", action=argparse.BooleanOptionalAction, default=True,
        help="render PNG figures next to the output",
    )


# ---------------------------------------------------------------------------
# Subcommand handlers
# ---------------------------------------------------------------------------


def _load_annotations(paths, strict):
    annotations = []
    for idx, path in enumerate(paths):
        annotations.extend(
            parse_annotations(_read(path), reference_set_id=str(idx), strict=strict)
        )
    return annotations


def _cmd_eval_dvc(args) -> int:
    annotations = _load_annotations(args.gt, args.strict)
    predictions = parse_predictions(_read(args.pred), strict=args.strict)
    config = dvceval.EvalConfig(
        taus=args.tious,
        recall_thresholds=args.recall_thresholds,
        meteor_params=_meteor_params(args),
        cider_max_n=args.cider_max_n,
        jobs=args.jobs,
    )
    scorecard = dvceval.evaluate_dvc_corpus(annotations, predictions, config)
    _write(args.out, formats.dump_json(scorecard))
    if args.figures:
        from . import report

        report.render_scorecard_figure(scorecard, _figure_path(args.out, "per_tau"))
    return 0


def _cmd_eval_tvg(args) -> int:
    annotations = _load_annotations(args.gt, args.strict)
    predictions = parse_predictions(_read(args.pred), strict=args.strict)
    scorecard = dvceval.evaluate_tvg_corpus(annotations, predictions, args.thresholds)
    _write(args.out, formats.dump_json(scorecard))
    if args.figures:
        from . import report

        report.render_tvg_figure(scorecard, _figure_path(args.out, "recall"))
    return 0


def _cmd_build_cotasks(args) -> int:
    annotations = _load_annotations(args.gt, args.strict)
    config = cotasks.CtDatasetConfig(
        include_single_turn=args.single_turn,
        include_tvg=args.tvg,
        include_clip_caption=args.clip_caption,
        paths=args.paths,
        quantization_max=args.quantization_max,
        seed=args.seed,
    )
    result = cotasks.build_ct_dataset(annotations, config)
    _write(
        args.out,
        formats.dump_jsonl(formats.conversation_to_dict(c) for c in result.conversations),
    )
    total = len(result.conversations)
    families = ", ".join(f"{k}={v}" for k, v in sorted(result.family_counts.items()))
    print(f"wrote {total} conversations ({families}) to {args.out}")
    return 0


def _cmd_build_mdpo_pairs(args) -> int:
    rows = formats.load_jsonl(_read(args.responses))
    samples = [formats.sampled_responses_from_dict(row, args.ns) for row in rows]
    similarity = dvceval.meteor_similarity(_meteor_params(args))
    all_pairs = mdpo_data.build_preference_pairs(samples, 0.0, similarity)
    kept = [p for p in all_pairs if p.gap > args.gamma]
    _write(args.out, formats.dump_jsonl(formats.preference_pair_to_dict(p) for p in kept))
    stats = mdpo_data.summarize_pair_stats(all_pairs, args.gamma_grid)
    summary = {
        "gamma": args.gamma,
        "pairs_scored": len(all_pairs),
        "pairs_kept": len(kept),
        **formats.pair_stats_to_dict(stats),
    }
    summary_path = Path(args.out).with_name(Path(args.out).stem + "_summary.json")
    _write(summary_path, formats.dump_json(summary))
    if args.figures:
        from . import report

        report.render_pair_stats_figure(stats, _figure_path(args.out, "gaps"))
    print(f"kept {len(kept)}/{len(all_pairs)} pairs at gamma={args.gamma:g} -> {args.out}")
    return 0


def _cmd_mdpo_loss(args) -> int:
    rows = formats.load_jsonl(_read(args.pairs))
    batch = [formats.pair_likelihoods_from_dict(row) for row in rows]
    if args.mode == "mdpo":
        mode = mdpo_objective.ObjectiveMode.mdpo(args.gamma)
    else:
        mode = mdpo_objective.ObjectiveMode(args.mode)
    result = mdpo_objective.batch_loss(batch, mode, args.beta)
    _write(args.out, formats.dump_json(formats.loss_result_to_dict(result)))
    return 0


def _cmd_toy_margin(args) -> int:
    pair_set = toylab.build_toy_pairs(args.videos, args.ns, args.seed)
    curves = toylab.run_margin_experiment(
        pair_set,
        modes=tuple(args.modes.split(",")),
        beta=args.beta,
        gamma=args.gamma,
        epochs=args.epochs,
        lr=args.lr,
        seed=args.seed,
    )
    _write(args.out, formats.margin_curves_to_csv(curves))
    if args.figures:
        from . import report

        report.render_margin_figure(curves, _figure_path(args.out, "margins"))
    finals = ", ".join(f"{c.mode}={c.mean_margins[-1]:.4f}" for c in curves)
    print(f"final margins over {len(pair_set.pairs)} pairs: {finals}")
    return 0


# ---------------------------------------------------------------------------
# Parser wiring
# ---------------------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="dvckit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval-dvc", help="score predictions with the captioning metrics")
    p.add_argument("--gt", action="append", required=True,
                   help="ground-truth JSON; repeat for extra reference sets")
    p.add_argument("--pred", required=True)
    p.add_argument("--tious", type=_float_list, default=dvceval.DEFAULT_TAUS)
    p.add_argument("--recall-thresholds", type=_float_list,
                   default=dvceval.DEFAULT_RECALL_THRESHOLDS)
    p.add_argument("--cider-max-n", type=int, default=4)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--strict", action="store_true")
    _add_meteor_flags(p)
    _add_common_flags(p)
    p.set_defaults(handler=_cmd_eval_dvc)

    p = sub.add_parser("eval-tvg", help="score one-prediction-per-query grounding")
    p.add_argument("--gt", action="append", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--thresholds", type=_float_list, default=dvceval.DEFAULT_RECALL_THRESHOLDS)
    p.add_argument("--strict", action="store_true")
    _add_common_flags(p)
    p.set_defaults(handler=_cmd_eval_tvg)

    p = sub.add_parser("build-cotasks", help="render the multi-turn training dataset")
    p.add_argument("--gt", action="append", required=True)
    p.add_argument("--paths", type=_path_list,
                   default=(cotasks.PathKind.T_THEN_C, cotasks.PathKind.C_THEN_T))
    p.add_argument("--single-turn", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--tvg", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--clip-caption", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--quantization-max", type=int, default=cotasks.MAX_TIME_TOKEN)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--strict", action="store_true")
    _add_common_flags(p)
    p.set_defaults(handler=_cmd_build_cotasks)

    p = sub.add_parser("build-mdpo-pairs", help="score sampled responses and gate pairs")
    p.add_argument("--responses", required=True, help="sampled-responses JSONL")
    p.add_argument("--gamma", type=float, default=mdpo_data.DEFAULT_GAMMA)
    p.add_argument("--ns", type=int, default=mdpo_data.DEFAULT_NUM_SAMPLES)
    p.add_argument("--similarity", choices=("meteor",), default="meteor")
    p.add_argument("--gamma-grid", type=_float_list, default=(0.0, 5.0, 10.0, 15.0))
    _add_meteor_flags(p)
    _add_common_flags(p)
    p.set_defaults(handler=_cmd_build_mdpo_pairs)

    p = sub.add_parser("mdpo-loss", help="evaluate a preference objective on a batch")
    p.add_argument("--pairs", required=True, help="pair-likelihoods JSONL")
    p.add_argument("--mode", choices=("dpo", "mdpo_minus", "mdpo"), default="mdpo")
    p.add_argument("--beta", type=float, default=mdpo_objective.DEFAULT_BETA)
    p.add_argument("--gamma", type=float, default=mdpo_objective.DEFAULT_GAMMA)
    _add_common_flags(p)
    p.set_defaults(handler=_cmd_mdpo_loss)

    p = sub.add_parser("toy-margin", help="run the tabular-policy margin experiment")
    p.add_argument("--videos", type=int, default=20)
    p.add_argument("--ns", type=int, default=3)
    p.add_argument("--epochs", type=int, default=toylab.DEFAULT_EPOCHS)
    p.add_argument("--lr", type=float, default=toylab.DEFAULT_LR)
    p.add_argument("--beta", type=float, default=mdpo_objective.DEFAULT_BETA)
    p.add_argument("--gamma", type=float, default=mdpo_objective.DEFAULT_GAMMA)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--modes", default=",".join(toylab.DEFAULT_MODES))
    _add_common_flags(p)
    p.set_defaults(handler=_cmd_toy_margin)

    return parser


def run_cli(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        return args.handler(args)
    except FileNotFoundError as exc:
        print(f"error: missing file: {exc.filename}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (CorpusParseError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
