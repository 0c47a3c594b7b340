import argparse
import sys

from .extract import SALIENCY_MODES, AdapterConfig, AdapterError, extract


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="embed-adapter",
        description="Embed directories of images into the grid evaluator's "
        "interchange files (pooled Inception V3 features).",
    )
    parser.add_argument("--input", required=True,
                        help="directory of images; each subdirectory is one grid")
    parser.add_argument("--out-embeddings", required=True,
                        help="output JSONL embedding store")
    parser.add_argument("--out-manifest",
                        help="also write a case manifest (requires --targets)")
    parser.add_argument("--targets",
                        help="directory of exemplar images referenced as targets")
    parser.add_argument("--model", default="inception_v3")
    parser.add_argument("--weights",
                        help="local checkpoint (torchvision state dict)")
    parser.add_argument("--allow-random-init", action="store_true",
                        help="proceed without weights using a seeded random "
                        "initialization (recorded in run metadata)")
    parser.add_argument("--saliency", choices=list(SALIENCY_MODES),
                        default="uniform",
                        help="per-image saliency written to the manifest")
    parser.add_argument("--batch-size", type=int, default=8)
    parser.add_argument("--seed", type=int, default=0,
                        help="initialization seed when running without weights")
    args = parser.parse_args(argv)

    try:
        config = AdapterConfig(
            input_dir=args.input,
            out_embeddings=args.out_embeddings,
            out_manifest=args.out_manifest,
            targets_dir=args.targets,
            model_name=args.model,
            weights=args.weights,
            allow_random_init=args.allow_random_init,
            saliency=args.saliency,
            batch_size=args.batch_size,
            seed=args.seed,
        )
        summary = extract(config)
    except AdapterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    parts = [f"embedded {summary['images']} image(s) in {summary['grids']} grid(s)"]
    if summary["targets"]:
        parts.append(f"{summary['targets']} target(s)")
    if summary["skipped"]:
        parts.append(f"{summary['skipped']} skipped")
    print(", ".join(parts))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
