"""Command-line surface: score, fid, diversity, compare, kappa."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import io, runner
from .baselines import (
    DEFAULT_COV_EPS,
    diversity,
    frechet_distance,
    gaussian_summary,
    population_fid_report,
)
from .errors import GridEvalError, IngestionError, PartialFailure
from .stats import DEFAULT_TIE_EPS, fleiss_kappa, ratings_to_count_table
from .types import MetricConfig


def _add_global_flags(parser) -> None:
    group = parser.add_argument_group("evaluation settings")
    group.add_argument("--seed", type=int, default=0,
                       help="run seed (default 0)")
    group.add_argument("--gamma", type=float, default=0.9,
                       help="patience discount in (0, 1] (default 0.9)")
    group.add_argument("--trajectories", type=int, default=100,
                       help="sampled viewing orders per case (default 100)")
    group.add_argument("--trajectory-dist",
                       choices=["saliency", "uniform", "reading-order"],
                       default=None,
                       help="viewing-order distribution; narrows score to "
                            "a single metric variant")
    group.add_argument("--novelty", action="store_true", default=None,
                       help="discount relevance by similarity to previously "
                            "seen images; narrows score to a single variant")
    group.add_argument("--user-model", choices=["position", "cascade"],
                       default=None,
                       help="browsing model; narrows score to a single variant")
    group.add_argument("--agg", choices=["max", "mean"], default="max",
                       help="relevance aggregation over targets (default max)")
    group.add_argument("--consensus-scale", choices=["3", "5"], default="3",
                       help="consensus over collapsed directions (3) or raw "
                            "ratings (5); default 3")


def _config_from(args) -> tuple:
    """Build the MetricConfig; report whether variant flags narrowed it."""
    narrowed = (
        args.user_model is not None
        or args.novelty is not None
        or args.trajectory_dist is not None
    )
    dist = (args.trajectory_dist or "saliency").replace("-", "_")
    config = MetricConfig(
        user_model=args.user_model or "position",
        novelty=bool(args.novelty),
        trajectory_dist=dist,
        gamma=args.gamma,
        relevance_agg=args.agg,
        num_trajectories=args.trajectories,
        seed=args.seed,
    )
    return config, narrowed


def _scale_from(args) -> str:
    return "three" if args.consensus_scale == "3" else "five"


def _emit(payload: dict, out_path) -> None:
    text = io.dumps_canonical(payload) + "\n"
    if out_path:
        Path(out_path).write_text(text, encoding="ascii")
    else:
        sys.stdout.write(text)


def _load_report(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise IngestionError(f"cannot read report {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise IngestionError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("kind") != "score":
        raise IngestionError(f"{path}: not a score report")
    return doc


def _sorted_vectors(store) -> list:
    return [store[key] for key in sorted(store)]


def _cmd_score(args) -> int:
    embeddings = io.load_embeddings(args.embeddings)
    manifests = io.load_manifests(args.manifest)
    config, narrowed = _config_from(args)
    variants = runner.SINGLE_VARIANT if narrowed else None
    report = runner.run_score(
        manifests, embeddings, config,
        variants=variants, max_workers=args.workers,
    )
    _emit(report, args.out)
    if args.markdown:
        Path(args.markdown).write_text(
            runner.render_score_markdown(report), encoding="utf-8"
        )
    if args.out:
        print(f"wrote {args.out}: {report['num_cases']} case(s), "
              f"{len(report['config']['variants'])} metric(s)")
    if report["failures"]:
        raise PartialFailure(
            f"{report['num_failed']} of {report['num_cases']} case(s) failed; "
            "see the report's failures section"
        )
    return 0


def _cmd_fid(args) -> int:
    side_a = io.load_embeddings(args.a)
    side_b = io.load_embeddings(args.b)
    if args.targets:
        targets = io.load_embeddings(args.targets)
        fid_a, fid_b = population_fid_report(
            _sorted_vectors(side_a), _sorted_vectors(side_b),
            _sorted_vectors(targets), eps=args.eps,
        )
        better = "a" if fid_a < fid_b else ("b" if fid_b < fid_a else "tie")
        payload = {
            "kind": "fid",
            "cov_eps": args.eps,
            "fid_targets_vs_a": fid_a,
            "fid_targets_vs_b": fid_b,
            "better": better,
        }
    else:
        value = frechet_distance(
            gaussian_summary(_sorted_vectors(side_a), args.eps),
            gaussian_summary(_sorted_vectors(side_b), args.eps),
        )
        payload = {"kind": "fid", "cov_eps": args.eps, "fid": value}
    _emit(payload, args.out)
    return 0


def _cmd_diversity(args) -> int:
    embeddings = io.load_embeddings(args.embeddings)
    manifests = io.load_manifests(args.manifest)
    per_prompt = {}
    warnings = []
    for manifest in manifests:
        case = io.build_case(manifest, embeddings)
        if case.size < 2:
            per_prompt[case.prompt_id] = None
            warnings.append(f"{case.prompt_id}: single image, diversity undefined")
        else:
            per_prompt[case.prompt_id] = diversity(case)
    values = [v for _, v in sorted(per_prompt.items()) if v is not None]
    payload = {
        "kind": "diversity",
        "per_prompt": per_prompt,
        "mean": float(sum(values) / len(values)) if values else None,
        "warnings": warnings,
    }
    _emit(payload, args.out)
    return 0


def _cmd_compare(args) -> int:
    report_x = _load_report(args.report_x)
    report_y = _load_report(args.report_y)
    records = io.load_annotations(args.annotations)
    report = runner.run_compare(
        report_x, report_y, records,
        scale=_scale_from(args), tie_eps=args.tie_eps,
    )
    _emit(report, args.out)
    if args.markdown:
        Path(args.markdown).write_text(
            runner.render_compare_markdown(report), encoding="utf-8"
        )
    return 0


def _cmd_kappa(args) -> int:
    records = io.load_annotations(args.annotations)
    scale = _scale_from(args)
    table = ratings_to_count_table(records, scale)
    value = fleiss_kappa(table, raters_per_item=3)
    payload = {
        "kind": "kappa",
        "scale": scale,
        "n_items": len(records),
        "raters_per_item": 3,
        "kappa": value,
    }
    _emit(payload, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="grideval",
        description="Evaluate grids of generated images against target "
                    "exemplars with browsing-model metrics, plus diversity "
                    "and distribution-distance baselines and an "
                    "annotation-agreement harness.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_score = sub.add_parser(
        "score",
        help="score every case in a manifest with the six metric variants",
    )
    p_score.add_argument("--manifest", required=True)
    p_score.add_argument("--embeddings", required=True)
    p_score.add_argument("--out", help="report JSON path (default stdout)")
    p_score.add_argument("--markdown", help="also render a markdown table here")
    p_score.add_argument("--workers", type=int, default=None,
                         help="thread count for per-case evaluation")
    _add_global_flags(p_score)
    p_score.set_defaults(func=_cmd_score)

    p_fid = sub.add_parser(
        "fid",
        help="Fréchet distance between two embedding populations",
    )
    p_fid.add_argument("--a", required=True, help="embedding file, side A")
    p_fid.add_argument("--b", required=True, help="embedding file, side B")
    p_fid.add_argument("--targets",
                       help="with targets: report distance from the targets "
                            "to each side instead")
    p_fid.add_argument("--eps", type=float, default=DEFAULT_COV_EPS,
                       help="covariance ridge (default 1e-6)")
    p_fid.add_argument("--out")
    _add_global_flags(p_fid)
    p_fid.set_defaults(func=_cmd_fid)

    p_div = sub.add_parser(
        "diversity",
        help="mean pairwise similarity within each grid (lower = more diverse)",
    )
    p_div.add_argument("--manifest", required=True)
    p_div.add_argument("--embeddings", required=True)
    p_div.add_argument("--out")
    _add_global_flags(p_div)
    p_div.set_defaults(func=_cmd_diversity)

    p_cmp = sub.add_parser(
        "compare",
        help="agreement of two score reports with human annotations",
    )
    p_cmp.add_argument("--report-x", required=True)
    p_cmp.add_argument("--report-y", required=True)
    p_cmp.add_argument("--annotations", required=True)
    p_cmp.add_argument("--tie-eps", type=float, default=DEFAULT_TIE_EPS,
                       help="score differences at or below this count as "
                            "ties (default 1e-9)")
    p_cmp.add_argument("--out")
    p_cmp.add_argument("--markdown")
    _add_global_flags(p_cmp)
    p_cmp.set_defaults(func=_cmd_compare)

    p_kappa = sub.add_parser(
        "kappa",
        help="Fleiss' kappa over the annotation file",
    )
    p_kappa.add_argument("--annotations", required=True)
    p_kappa.add_argument("--out")
    _add_global_flags(p_kappa)
    p_kappa.set_defaults(func=_cmd_kappa)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except GridEvalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
