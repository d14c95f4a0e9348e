#!/usr/bin/env python3
"""Run the whole pipeline against the repo fixtures and print the results:
agreement metrics across the three scripted coders, the majority-merged
tree, and a similarity-prediction evaluation on the uncoded images.
"""

from __future__ import annotations

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from taxa.cli import render_report
from taxa.compare import agreement_report, majority_merge, union_merge
from taxa.model import tree_paths
from taxa.predict import evaluate, similarity_predict
from taxa.storage import load_embeddings, read_session

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def main() -> None:
    sessions = [
        read_session(FIXTURES / f"session-{c}.json") for c in ("c1", "c2", "c3")
    ]
    coders = ", ".join(s.coder_id for s in sessions)
    print(f"sessions: {coders} ({len(sessions[0].labels)} images each)\n")

    merged = union_merge(sessions)
    print("union merge (creators where not unanimous):")
    all_coders = set(merged.coders)

    def walk(path, depth):
        for name in merged.child_order.get(path, []):
            child = path + (name,)
            node = merged.nodes[child]
            chips = (
                ""
                if set(node.creators) == all_coders
                else "  [" + " ".join(node.creators) + "]"
            )
            print(
                "  " * depth + f"{name}{chips}  "
                f"consensus={node.consensus_count} partial={node.partial_count}"
            )
            walk(child, depth + 1)

    walk((), 1)

    print("\nagreement (full depth):")
    print(render_report(agreement_report(sessions)))
    print("\nagreement (D=1):")
    print(render_report(agreement_report(sessions, depth=1)))

    tree, labels = majority_merge(sessions)
    print(f"\nmajority tree paths: {sorted(tree_paths(tree))}")

    embeddings = load_embeddings(FIXTURES / "embeddings.jsonl")
    targets = sorted(set(embeddings.vectors) - set(labels))
    predicted = similarity_predict(labels, embeddings, targets)
    families = ("map", "bar chart", "table", "non-visualization")
    truth = {u: {(families[int(u.split("-")[1]) % 4],)} for u in targets}
    print(f"\npredicted {len(targets)} uncoded images by similarity; "
          f"evaluation against the scripted families:")
    print(render_report(evaluate(predicted, truth)))


if __name__ == "__main__":
    main()
