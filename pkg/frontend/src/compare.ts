// Comparison view: the merged tree with creator chips and proportional
// consensus bars, the agreement metrics, and the per-image label table
// with Dissensus / Unsure selectors. Everything shown here was computed by
// the server; this module only lays it out.

import { AppController } from "./controller.js";
import { button, el } from "./dom.js";
import {
  ViewState,
  disputedPaths,
  pathKey,
  visibleCompareImages,
} from "./state.js";
import type { TaxonPath, UnionNodeDoc } from "./types.js";

export function renderCompare(
  container: HTMLElement,
  state: ViewState,
  controller: AppController,
): void {
  container.replaceChildren();
  const compare = state.compare;
  if (!compare) return;
  const { result } = compare;

  const head = el(
    "div",
    { class: "compare-header" },
    el("strong", {}, `comparison of ${result.coders.join(", ")}`),
  );
  head.append(button("close", () => controller.closeCompare()));
  container.append(head);

  for (const warning of result.warnings) {
    container.append(el("div", { class: "banner" }, warning));
  }

  if (result.metrics) {
    const m = result.metrics;
    container.append(
      el(
        "div",
        { class: "metrics" },
        metric("Match", m.exact_match),
        metric("Jaccard", m.jaccard),
        ...(m.node_iou !== null ? [metric("Node IoU", m.node_iou)] : []),
        el("span", { class: "metric" }, `images: ${m.n_images}`),
      ),
    );
  }

  container.append(el("h3", {}, "merged tree (union)"));
  const byPath = new Map(result.union.nodes.map((n) => [pathKey(n.path), n]));
  const treeBox = el("ul", { class: "tree-root compare-tree" });
  renderUnionLevel(treeBox, [], result.union.child_order, byPath, result.coders);
  container.append(treeBox);

  container.append(el("h3", {}, "label comparison"));
  container.append(selectors(state, controller));
  container.append(labelTable(state, controller));
}

function metric(name: string, value: number): HTMLElement {
  return el("span", { class: "metric" }, `${name}: ${value.toFixed(3)}`);
}

function renderUnionLevel(
  into: HTMLElement,
  prefix: TaxonPath,
  childOrder: Record<string, string[]>,
  byPath: Map<string, UnionNodeDoc>,
  coders: string[],
): void {
  for (const name of childOrder[pathKey(prefix)] ?? []) {
    const path = [...prefix, name];
    const node = byPath.get(pathKey(path));
    if (!node) continue;
    const item = el("li", {});
    item.append(unionRow(node, coders));
    const sub = el("ul", {});
    renderUnionLevel(sub, path, childOrder, byPath, coders);
    if (sub.childElementCount > 0) item.append(sub);
    into.append(item);
  }
}

function unionRow(node: UnionNodeDoc, coders: string[]): HTMLElement {
  const row = el(
    "div",
    { class: "tree-node compare-node", "data-path": pathKey(node.path) },
    el("span", { class: "node-name" }, node.path[node.path.length - 1]),
  );
  if (node.creators.length !== coders.length) {
    // taxon not created by all coders: list who has it
    const chips = el("span", { class: "creator-chips" });
    for (const coder of node.creators) {
      chips.append(el("span", { class: "chip creator" }, coder));
    }
    row.append(chips);
  }
  const total = node.consensus_count + node.partial_count;
  if (total > 0) {
    // highlighted portion = images not assigned by all creators
    const bar = el("span", {
      class: "agreement-bar",
      title: `${node.consensus_count} by all creators, ${node.partial_count} partial`,
    });
    const consensus = el("span", { class: "bar-consensus" });
    consensus.style.width = `${(node.consensus_count / total) * 100}%`;
    bar.append(consensus);
    row.append(bar, el("span", { class: "bar-text" }, `${node.consensus_count}/${total}`));
  }
  return row;
}

function selectors(state: ViewState, controller: AppController): HTMLElement {
  const compare = state.compare!;
  const box = el("div", { class: "selectors" });
  const dissensus = el("input", { type: "checkbox", id: "flt-dissensus" });
  (dissensus as HTMLInputElement).checked = compare.dissensusOnly;
  dissensus.addEventListener("change", () =>
    controller.setCompareFilters(
      (dissensus as HTMLInputElement).checked,
      compare.unsureOnly,
    ),
  );
  const unsure = el("input", { type: "checkbox", id: "flt-unsure" });
  (unsure as HTMLInputElement).checked = compare.unsureOnly;
  unsure.addEventListener("change", () =>
    controller.setCompareFilters(
      compare.dissensusOnly,
      (unsure as HTMLInputElement).checked,
    ),
  );
  box.append(
    dissensus,
    el("label", { for: "flt-dissensus" }, "Dissensus"),
    unsure,
    el("label", { for: "flt-unsure" }, "Unsure"),
  );
  return box;
}

function labelTable(state: ViewState, controller: AppController): HTMLElement {
  const compare = state.compare!;
  const sessions = compare.sessions;
  const shared = sessions
    .map((s) => new Set(s.image_order))
    .reduce((acc, set) => new Set([...acc].filter((u) => set.has(u))));
  const order = sessions[0].image_order.filter((u) => shared.has(u));
  const uuids = visibleCompareImages(order, compare);

  const table = el("table", { class: "label-table" });
  const head = el("tr", {}, el("th", {}, "image"));
  for (const s of sessions) head.append(el("th", {}, s.coder_id));
  table.append(head);

  for (const uuid of uuids) {
    const perCoder = sessions.map((s) => s.labels[uuid]?.paths ?? []);
    const disputed = disputedPaths(perCoder);
    const row = el("tr", { "data-uuid": uuid });
    const cell = el(
      "td",
      {},
      el("img", {
        src: controller.api.imageUrl(uuid),
        class: "thumb",
        loading: "lazy",
        alt: uuid,
      }),
      el("div", { class: "uuid" }, uuid),
    );
    row.append(cell);
    sessions.forEach((s, i) => {
      const td = el("td", {});
      for (const path of perCoder[i]) {
        td.append(
          el(
            "span",
            {
              class:
                "chip" + (disputed.has(pathKey(path)) ? " disputed" : ""),
            },
            pathKey(path),
          ),
        );
      }
      if (s.labels[uuid]?.unsure) {
        td.append(el("span", { class: "chip unsure-chip" }, "unsure"));
      }
      row.append(td);
    });
    table.append(row);
  }
  return table;
}
