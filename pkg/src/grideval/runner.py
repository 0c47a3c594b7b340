"""Run orchestration: score whole manifests, compare two runs against
human annotations, and render reports as markdown.

Reports are plain dicts shaped for canonical serialization. Per-case
work may run in a thread pool; every case derives its own generator
from (seed, prompt_id), and assembly walks prompts in sorted order, so
reports are byte-identical regardless of worker count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .baselines import diversity, frechet_distance, gaussian_summary
from .errors import EmptySampleError, GridEvalError, IngestionError, InvalidInputError
from .io import SCHEMA_VERSION, build_case
from .metrics import expected_metric
from .stats import (
    DEFAULT_TIE_EPS,
    Direction,
    agreement_rate,
    consensus,
    wilcoxon_signed_rank,
)
from .types import VARIANTS, MetricConfig

SINGLE_VARIANT = "single"


def _variant_configs(config: MetricConfig, variants):
    """Resolve the requested variants to (name, config) pairs.

    None means all six named variants; SINGLE_VARIANT means score just
    the combination carried by config itself (its canonical name when
    it has one).
    """
    if variants is None:
        return [(name, config.variant(name)) for name in VARIANTS]
    if variants == SINGLE_VARIANT:
        return [(config.metric_name, config)]
    if not variants:
        raise InvalidInputError("variant list must not be empty")
    return [(name, config.variant(name)) for name in variants]


def _evaluate_case(manifest, embeddings, pairs):
    case = build_case(manifest, embeddings)
    metrics = {}
    for name, cfg in pairs:
        result = expected_metric(case, cfg)
        metrics[name] = {
            "value": result.value,
            "std_error": result.std_error,
            "num_trajectories_used": result.num_trajectories_used,
        }
    div = diversity(case) if case.size >= 2 else None
    return case, metrics, div


def run_score(manifests, embeddings, config: MetricConfig,
              variants=None, max_workers=None) -> dict:
    """Score every manifest case and assemble the run report.

    Case failures are collected per prompt and the run continues; the
    caller decides how to surface them (the CLI maps any failure to the
    partial-failure exit code). The report carries the config echo,
    per-prompt metric values, per-metric means, the diversity baseline,
    and a whole-run Fréchet distance between the pooled generated and
    target populations.
    """
    manifests = list(manifests)
    if not manifests:
        raise InvalidInputError("no cases to score: empty manifest list")
    ids = [m.prompt_id for m in manifests]
    if len(set(ids)) != len(ids):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        raise IngestionError(f"duplicate prompt_ids in manifests: {dupes}")
    pairs = _variant_configs(config, variants)

    def job(manifest):
        try:
            return manifest.prompt_id, _evaluate_case(manifest, embeddings, pairs), None
        except GridEvalError as exc:
            return manifest.prompt_id, None, f"{type(exc).__name__}: {exc}"

    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        outcomes = list(pool.map(job, manifests))

    by_prompt = {prompt: (payload, error) for prompt, payload, error in outcomes}
    results = {}
    div_values = {}
    failures = {}
    warnings = []
    gen_vectors = []
    target_vectors = []
    for prompt in sorted(by_prompt):
        payload, error = by_prompt[prompt]
        if error is not None:
            failures[prompt] = error
            continue
        case, metrics, div = payload
        results[prompt] = metrics
        div_values[prompt] = div
        gen_vectors.extend(img.embedding.vector for img in case.images)
        target_vectors.extend(t.vector for t in case.targets)

    skipped_div = sorted(p for p, v in div_values.items() if v is None)
    if skipped_div:
        warnings.append(
            "diversity undefined for single-image grids: " + ", ".join(skipped_div)
        )

    aggregates = {}
    for name, _ in pairs:
        values = [results[p][name]["value"] for p in sorted(results)]
        if values:
            aggregates[name] = float(np.mean(values))
    div_present = [div_values[p] for p in sorted(div_values) if div_values[p] is not None]

    pooled_fid = None
    if len(gen_vectors) >= 2 and len(target_vectors) >= 2:
        try:
            pooled_fid = frechet_distance(
                gaussian_summary(target_vectors), gaussian_summary(gen_vectors)
            )
        except GridEvalError as exc:
            warnings.append(f"pooled distance unavailable: {exc}")
    elif results:
        warnings.append(
            "pooled distance needs at least two generated and two target embeddings"
        )

    base_cfg = pairs[0][1]
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "score",
        "config": {
            "gamma": base_cfg.gamma,
            "satiation": base_cfg.satiation,
            "relevance_agg": base_cfg.relevance_agg,
            "num_trajectories": base_cfg.num_trajectories,
            "seed": base_cfg.seed,
            "variants": {
                name: {
                    "user_model": cfg.user_model,
                    "novelty": cfg.novelty,
                    "trajectory_dist": cfg.trajectory_dist,
                }
                for name, cfg in pairs
            },
        },
        "num_cases": len(manifests),
        "num_failed": len(failures),
        "results": results,
        "aggregates": aggregates,
        "baselines": {
            "diversity": div_values,
            "diversity_mean": float(np.mean(div_present)) if div_present else None,
            "fid_generated_vs_targets": pooled_fid,
        },
        "failures": failures,
        "warnings": warnings,
    }


def _label_payload(label):
    value = label.label
    if isinstance(value, Direction):
        value = value.value
    direction = label.direction
    return {
        "label": value,
        "support": label.support,
        "direction": direction.value if direction is not None else None,
    }


def _metric_names(report_x, report_y):
    known_x = set(report_x["config"]["variants"])
    known_y = set(report_y["config"]["variants"])
    shared = known_x & known_y
    ordered = [name for name in VARIANTS if name in shared]
    ordered += sorted(shared - set(VARIANTS))
    return ordered


def _scores_from(report, metric, prompts):
    if metric == "diversity":
        values = report["baselines"]["diversity"]
    else:
        values = {p: report["results"][p][metric]["value"] for p in prompts}
    return [values.get(p) for p in prompts]


def run_compare(report_x, report_y, annotations, scale: str = "three",
                tie_eps: float = DEFAULT_TIE_EPS) -> dict:
    """Compare two score reports against human preference annotations.

    Computes, per metric, the agreement rate over fully-agreed
    directional prompts and a Wilcoxon signed-rank test on the per-
    prompt score pairs ordered preferred-system-first. Diversity joins
    with inverted orientation (lower is better). Raw pairs are kept in
    the report so the pairing construction is auditable.
    """
    prompts_x = set(report_x["results"])
    prompts_y = set(report_y["results"])
    if prompts_x != prompts_y:
        only_x = sorted(prompts_x - prompts_y)[:10]
        only_y = sorted(prompts_y - prompts_x)[:10]
        raise IngestionError(
            f"reports cover different prompts; only in x: {only_x}, "
            f"only in y: {only_y}"
        )
    records = list(annotations)
    ann_ids = [r.prompt_id for r in records]
    if len(set(ann_ids)) != len(ann_ids):
        dupes = sorted({i for i in ann_ids if ann_ids.count(i) > 1})
        raise IngestionError(f"duplicate prompt_ids in annotations: {dupes}")
    if set(ann_ids) != prompts_x:
        missing = sorted(prompts_x - set(ann_ids))[:10]
        extra = sorted(set(ann_ids) - prompts_x)[:10]
        raise IngestionError(
            f"annotations do not cover the report prompts; missing: {missing}, "
            f"unknown: {extra}"
        )
    system_pairs = {(r.system_x, r.system_y) for r in records}
    if len(system_pairs) != 1:
        raise IngestionError(
            f"annotations mix system pairs: {sorted(system_pairs)}"
        )
    (system_x, system_y), = system_pairs

    prompts = sorted(prompts_x)
    by_prompt = {r.prompt_id: r for r in records}
    labels = {p: consensus(by_prompt[p].ratings, scale) for p in prompts}
    support_counts = {"3of3": 0, "2of3": 0, "none": 0}
    for lab in labels.values():
        support_counts[lab.support] += 1

    warnings = []
    metrics_out = {}
    label_list = [labels[p] for p in prompts]
    for metric in _metric_names(report_x, report_y) + ["diversity"]:
        higher_is_better = metric != "diversity"
        xs = _scores_from(report_x, metric, prompts)
        ys = _scores_from(report_y, metric, prompts)
        keep = [i for i in range(len(prompts)) if xs[i] is not None and ys[i] is not None]
        if len(keep) < len(prompts):
            warnings.append(f"{metric}: skipped prompts without values")
        xa = np.array([xs[i] for i in keep], dtype=np.float64)
        ya = np.array([ys[i] for i in keep], dtype=np.float64)
        kept_labels = [label_list[i] for i in keep]
        kept_prompts = [prompts[i] for i in keep]
        sign = 1.0 if higher_is_better else -1.0
        entry = {"higher_is_better": higher_is_better}
        try:
            rate, n_used = agreement_rate(sign * xa, sign * ya, kept_labels, tie_eps)
            entry["agreement_rate"] = rate
            entry["n_used"] = n_used
        except EmptySampleError as exc:
            entry["agreement_rate"] = None
            entry["n_used"] = 0
            warnings.append(f"{metric}: {exc}")
        pairs = []
        for prompt, sx, sy, lab in zip(kept_prompts, xa, ya, kept_labels):
            if lab.support != "3of3":
                continue
            direction = lab.direction
            if direction is None or direction == Direction.SAME:
                continue
            if direction == Direction.X_BETTER:
                pairs.append((prompt, float(sx), float(sy)))
            else:
                pairs.append((prompt, float(sy), float(sx)))
        entry["pairs"] = [list(p) for p in pairs]
        if entry.get("n_used"):
            preferred = np.array([p[1] for p in pairs]) * sign
            other = np.array([p[2] for p in pairs]) * sign
            if np.all(np.abs(preferred - other) <= tie_eps):
                warnings.append(
                    f"{metric}: all used score differences within tie_eps; "
                    "the systems are indistinguishable at this tolerance"
                )
            try:
                w_stat, p_value = wilcoxon_signed_rank(preferred, other)
                entry["wilcoxon_w"] = w_stat
                entry["wilcoxon_p"] = p_value
            except GridEvalError as exc:
                entry["wilcoxon_w"] = None
                entry["wilcoxon_p"] = None
                warnings.append(f"{metric}: wilcoxon unavailable: {exc}")
        else:
            entry["wilcoxon_w"] = None
            entry["wilcoxon_p"] = None
        metrics_out[metric] = entry

    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "compare",
        "consensus_scale": scale,
        "tie_eps": tie_eps,
        "system_x": system_x,
        "system_y": system_y,
        "num_prompts": len(prompts),
        "consensus_counts": support_counts,
        "labels": {p: _label_payload(labels[p]) for p in prompts},
        "metrics": metrics_out,
        "warnings": warnings,
    }


def _fmt(value, digits=6):
    if value is None:
        return "-"
    return f"{value:.{digits}f}"


def render_score_markdown(report) -> str:
    """Human view of a score report: one row per prompt plus the mean."""
    names = list(report["config"]["variants"])
    header = ["prompt_id", *names, "diversity"]
    lines = [
        "| " + " | ".join(header) + " |",
        "|" + "|".join("---" for _ in header) + "|",
    ]
    divs = report["baselines"]["diversity"]
    for prompt in sorted(report["results"]):
        row = [prompt]
        row += [_fmt(report["results"][prompt][n]["value"]) for n in names]
        row.append(_fmt(divs.get(prompt)))
        lines.append("| " + " | ".join(row) + " |")
    mean_row = ["mean"]
    mean_row += [_fmt(report["aggregates"].get(n)) for n in names]
    mean_row.append(_fmt(report["baselines"]["diversity_mean"]))
    lines.append("| " + " | ".join(mean_row) + " |")
    if report["failures"]:
        lines.append("")
        lines.append(f"{len(report['failures'])} case(s) failed: "
                     + ", ".join(sorted(report["failures"])))
    return "\n".join(lines) + "\n"


def render_compare_markdown(report) -> str:
    """Human view of a compare report: one row per metric.

    The star column marks Wilcoxon p < 0.05, and agreement rates are
    percentages over the fully-agreed directional prompts.
    """
    header = ["metric", "agreement", "n", "W+", "p", "sig"]
    lines = [
        f"system X: {report['system_x']}  |  system Y: {report['system_y']}  "
        f"|  consensus scale: {report['consensus_scale']}",
        "",
        "| " + " | ".join(header) + " |",
        "|" + "|".join("---" for _ in header) + "|",
    ]
    for metric, entry in report["metrics"].items():
        rate = entry["agreement_rate"]
        rate_txt = "-" if rate is None else f"{100.0 * rate:.1f}%"
        p = entry["wilcoxon_p"]
        star = "*" if (p is not None and p < 0.05) else ""
        lines.append(
            "| " + " | ".join([
                metric,
                rate_txt,
                str(entry["n_used"]),
                _fmt(entry["wilcoxon_w"], 1),
                _fmt(p, 4),
                star,
            ]) + " |"
        )
    if report["warnings"]:
        lines.append("")
        for note in report["warnings"]:
            lines.append(f"- warning: {note}")
    return "\n".join(lines) + "\n"
