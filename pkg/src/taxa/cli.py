"""Command-line interface: sampling, serving, merging, metrics, clustering,
prediction, evaluation, and fallback embedding.

Exit codes: 0 success, 1 domain error (bad data, failed precondition),
2 usage error.  All outputs are deterministic given the same inputs and
seeds; results go to stdout unless -o is given.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import compare as cmp
from .assist import cluster_taxon, fallback_embed
from .errors import DuplicateImage, TaxaError
from .model import format_path, parse_path
from .predict import ancestor_closure, similarity_predict, zero_shot_predict
from .storage import (
    MERGED_FORMAT,
    FORMAT_VERSION,
    atomic_write,
    dumps_canonical,
    labeling_doc,
    load_embeddings,
    load_labeling,
    load_probabilities,
    load_table,
    read_session,
    sample_batches,
)


def render_report(report: cmp.MetricsReport) -> str:
    """Fixed-width metric table, three decimals, stable row order."""
    header = "Metric" + (f" (D={report.depth})" if report.depth else "")
    rows: list[tuple[str, str]] = [
        ("Match", f"{float(report.exact_match):.3f}"),
        ("Jaccard", f"{float(report.jaccard):.3f}"),
    ]
    if report.node_iou is not None:
        rows.append(("Node IoU", f"{float(report.node_iou):.3f}"))
    rows.append(("Images", str(report.n_images)))
    width = max(len(header), *(len(name) for name, _ in rows)) + 2
    lines = [f"{header:<{width}}Value"]
    lines += [f"{name:<{width}}{value}" for name, value in rows]
    return "\n".join(lines)


def _emit(data: bytes, out: str | None) -> None:
    if out:
        atomic_write(out, data)
    else:
        sys.stdout.buffer.write(data)


def _emit_text(text: str, out: str | None) -> None:
    _emit((text + "\n").encode("utf-8"), out)


def cmd_sample(args: argparse.Namespace) -> int:
    from .storage import load_dataset

    dataset = load_dataset(args.dataset)
    plan = sample_batches(dataset, args.batch_size, args.n_batches, args.seed)
    _emit(dumps_canonical(plan.doc()), args.output)
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import ServiceConfig, create_app

    config = ServiceConfig(
        data_dir=Path(args.data_dir),
        dataset_path=Path(args.dataset) if args.dataset else None,
        embeddings_path=Path(args.embeddings) if args.embeddings else None,
        captions_path=Path(args.captions) if args.captions else None,
        probs_path=Path(args.probs) if args.probs else None,
        images_dir=Path(args.images_dir) if args.images_dir else None,
        cors_origin=args.cors_origin,
        ui_dir=Path(args.ui_dir) if args.ui_dir else None,
    )
    uvicorn.run(
        create_app(config), host=args.host, port=args.port, log_level="warning"
    )
    return 0


def _merged_tree_doc(node) -> dict:
    return {
        "name": node.name,
        "children": [_merged_tree_doc(c) for c in node.children],
    }


def cmd_merge(args: argparse.Namespace) -> int:
    sessions = [read_session(p) for p in args.sessions]
    if args.strategy == "majority":
        tree, labels = cmp.majority_merge(sessions)
        doc = {
            "format": MERGED_FORMAT,
            "format_version": FORMAT_VERSION,
            "strategy": "majority",
            "coders": [s.coder_id for s in sessions],
            "tree": _merged_tree_doc(tree),
            "labels": {
                u: sorted(list(p) for p in paths)
                for u, paths in labels.items()
            },
        }
    else:
        merged = cmp.union_merge(sessions)
        doc = {
            "format": MERGED_FORMAT,
            "format_version": FORMAT_VERSION,
            "strategy": "union",
            "coders": merged.coders,
            "nodes": [
                {
                    "path": list(path),
                    "creators": node.creators,
                    "consensus_count": node.consensus_count,
                    "partial_count": node.partial_count,
                }
                for path, node in sorted(merged.nodes.items())
            ],
            "warnings": merged.warnings,
        }
    _emit(dumps_canonical(doc), args.output)
    return 0


def cmd_diff(args: argparse.Namespace) -> int:
    sessions = [read_session(p) for p in args.sessions]
    merged = cmp.union_merge(sessions)
    all_coders = set(merged.coders)
    lines = ["root"]

    def walk(path, depth):
        for name in merged.child_order.get(path, []):
            child = path + (name,)
            node = merged.nodes[child]
            creators = ""
            if set(node.creators) != all_coders:
                creators = "  [" + " ".join(node.creators) + "]"
            counts = f"  consensus={node.consensus_count} partial={node.partial_count}"
            lines.append("  " * depth + name + creators + counts)
            walk(child, depth + 1)

    walk((), 1)
    for warning in merged.warnings:
        lines.append(f"warning: {warning}")
    _emit_text("\n".join(lines), args.output)
    return 0


def cmd_metrics(args: argparse.Namespace) -> int:
    sessions = [read_session(p) for p in args.sessions]
    report = cmp.agreement_report(sessions, depth=args.depth)
    _emit_text(render_report(report), args.output)
    return 0


def cmd_cluster(args: argparse.Namespace) -> int:
    session = read_session(args.session)
    emb = load_embeddings(args.embeddings)
    captions = load_table("captions", args.captions) if args.captions else {}
    path = parse_path(args.path)
    partition = cluster_taxon(session, path, emb, captions, args.seed)
    doc = {
        "path": list(path),
        "seed": args.seed,
        "parts": [
            {
                "name": p.name,
                "members": sorted(p.members),
                "representative": p.representative,
                "caption": p.caption,
            }
            for p in partition.parts
        ],
    }
    _emit(dumps_canonical(doc), args.output)
    return 0


def cmd_predict(args: argparse.Namespace) -> int:
    if args.method == "similarity":
        if not args.labeled or not args.embeddings:
            raise TaxaError("similarity prediction needs --labeled and --embeddings")
        labeled = load_labeling(args.labeled)
        emb = load_embeddings(args.embeddings)
        if args.targets:
            targets = [
                line.strip()
                for line in Path(args.targets).read_text().splitlines()
                if line.strip()
            ]
        else:
            targets = sorted(set(emb.vectors) - set(labeled))
        predicted = similarity_predict(labeled, emb, targets)
    else:
        if not args.probs:
            raise TaxaError("zero-shot prediction needs --probs")
        rows = load_probabilities(args.probs)
        predicted = zero_shot_predict(rows, args.threshold)
    _emit(dumps_canonical(labeling_doc(predicted)), args.output)
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    from .predict import evaluate

    pred = load_labeling(args.pred)
    gold = load_labeling(args.gold)
    if args.close_pred:
        pred = {u: ancestor_closure(p) for u, p in pred.items()}
    if args.close_gold:
        gold = {u: ancestor_closure(p) for u, p in gold.items()}
    report = evaluate(pred, gold, depth=args.depth)
    _emit_text(render_report(report), args.output)
    return 0


def cmd_embed(args: argparse.Namespace) -> int:
    from PIL import Image

    lines = []
    seen: set[str] = set()
    for path in args.images:
        p = Path(path)
        uuid = p.stem
        if uuid in seen:
            raise DuplicateImage(f"duplicate image name {uuid!r}")
        seen.add(uuid)
        with Image.open(p) as img:
            arr = np.asarray(img.convert("RGB"))
        vec = fallback_embed(arr)
        lines.append(
            json.dumps(
                {"uuid": uuid, "vector": [float(v) for v in vec]},
                sort_keys=True,
            )
        )
    _emit(("\n".join(lines) + "\n").encode("utf-8"), args.output)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="taxa",
        description="Collaborative image-taxonomy workbench.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="sample disjoint random image batches")
    p.add_argument("--dataset", required=True)
    p.add_argument("--batch-size", type=int, required=True)
    p.add_argument("--n-batches", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--data-dir", required=True)
    p.add_argument("--dataset")
    p.add_argument("--embeddings")
    p.add_argument("--captions")
    p.add_argument("--probs")
    p.add_argument("--images-dir")
    p.add_argument("--cors-origin")
    p.add_argument("--ui-dir")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("merge", help="merge coder sessions")
    p.add_argument("--strategy", choices=("union", "majority"), default="majority")
    p.add_argument("sessions", nargs="+")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_merge)

    p = sub.add_parser("diff", help="render the union merge as a tree")
    p.add_argument("sessions", nargs="+")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_diff)

    p = sub.add_parser("metrics", help="agreement metrics across sessions")
    p.add_argument("sessions", nargs="+")
    p.add_argument("--depth", type=int)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("cluster", help="preview a machine division of a leaf")
    p.add_argument("--session", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--captions")
    p.add_argument("--path", required=True, help="'/'-joined leaf path")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("predict", help="predict labels for uncoded images")
    p.add_argument(
        "--method", choices=("similarity", "zeroshot"), default="similarity"
    )
    p.add_argument("--labeled", help="session/labeling/merged file")
    p.add_argument("--embeddings")
    p.add_argument("--targets", help="file with one target uuid per line")
    p.add_argument("--probs")
    p.add_argument("--threshold", type=float, default=0.3)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="score predictions against gold labels")
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--depth", type=int)
    p.add_argument("--close-pred", action="store_true")
    p.add_argument("--close-gold", action="store_true")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("embed", help="fallback-embed image files to JSONL")
    p.add_argument("images", nargs="+")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_embed)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TaxaError as exc:
        print(f"error [{exc.code}]: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error [FileNotFound]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
