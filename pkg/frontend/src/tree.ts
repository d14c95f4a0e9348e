// Taxonomy tree panel: node rows with context actions, selection, and
// drag-drop targets for labeling. Drops on internal nodes are rejected
// here, before any request is made.

import { AppController } from "./controller.js";
import { button, el } from "./dom.js";
import { ViewState, badgeCounts, pathKey, samePath } from "./state.js";
import type { TaxonPath, TreeNodeDoc } from "./types.js";

const UUID_MIME = "application/x-taxa-image";

export function imageDragData(event: DragEvent, uuid: string): void {
  event.dataTransfer?.setData(UUID_MIME, uuid);
  event.dataTransfer?.setData("text/plain", uuid);
}

function draggedUuid(event: DragEvent): string | null {
  const data =
    event.dataTransfer?.getData(UUID_MIME) ||
    event.dataTransfer?.getData("text/plain");
  return data || null;
}

export function renderTree(
  container: HTMLElement,
  state: ViewState,
  controller: AppController,
): void {
  container.replaceChildren();
  const session = state.session;
  if (!session) {
    container.append(el("p", { class: "hint" }, "open or create a session"));
    return;
  }
  const counts = badgeCounts(session);
  const list = el("ul", { class: "tree-root" });
  container.append(header(controller), list);
  renderChildren(list, session.tree, [], state, controller, counts);
}

function header(controller: AppController): HTMLElement {
  const row = el("div", { class: "tree-header" }, el("strong", {}, "taxonomy"));
  row.append(
    button("+ taxon", () => {
      const name = window.prompt("new root taxon name");
      if (name) void controller.createTaxon([], name);
    }),
  );
  return row;
}

function renderChildren(
  into: HTMLElement,
  node: TreeNodeDoc,
  prefix: TaxonPath,
  state: ViewState,
  controller: AppController,
  counts: Map<string, number>,
): void {
  for (const child of node.children) {
    const path = [...prefix, child.name];
    const item = el("li", {});
    item.append(nodeRow(child, path, state, controller, counts));
    if (child.children.length > 0) {
      const sub = el("ul", {});
      renderChildren(sub, child, path, state, controller, counts);
      item.append(sub);
    }
    into.append(item);
  }
}

function nodeRow(
  node: TreeNodeDoc,
  path: TaxonPath,
  state: ViewState,
  controller: AppController,
  counts: Map<string, number>,
): HTMLElement {
  const isLeaf = node.children.length === 0;
  const selected =
    state.selectedTaxon !== null && samePath(state.selectedTaxon, path);
  const row = el("div", {
    class:
      "tree-node" +
      (isLeaf ? " leaf" : " internal") +
      (selected ? " selected" : "") +
      (node.origin === "machine-cluster" ? " machine" : ""),
    "data-path": pathKey(path),
  });

  const label = el("span", { class: "node-name" }, node.name);
  if (node.note) label.title = node.note;
  const badge = el(
    "span",
    { class: "badge", "data-badge": pathKey(path) },
    String(counts.get(pathKey(path)) ?? 0),
  );
  row.append(label, badge);

  row.addEventListener("click", () => {
    if (state.pendingAction) {
      void controller.completeAction(path);
    } else {
      void controller.selectTaxon(selected ? null : path);
    }
  });

  // drop target for labeling; internal nodes refuse before any request
  row.addEventListener("dragover", (event) => {
    event.preventDefault();
    row.classList.add(isLeaf ? "drop-ok" : "drop-no");
  });
  row.addEventListener("dragleave", () => {
    row.classList.remove("drop-ok", "drop-no");
  });
  row.addEventListener("drop", (event) => {
    event.preventDefault();
    row.classList.remove("drop-ok", "drop-no");
    const uuid = draggedUuid(event);
    if (uuid) void controller.dropImageOnTaxon(uuid, path);
  });

  row.append(actions(node, path, isLeaf, controller));
  return row;
}

function actions(
  node: TreeNodeDoc,
  path: TaxonPath,
  isLeaf: boolean,
  controller: AppController,
): HTMLElement {
  const box = el("span", { class: "node-actions" });
  box.append(
    button("create", () => {
      const name = window.prompt(`new child of ${pathKey(path)}`);
      if (name) void controller.createTaxon(path, name);
    }),
    button("rename", () => {
      const name = window.prompt("new name", node.name);
      if (name) void controller.renameTaxon(path, name);
    }),
  );
  if (isLeaf) {
    box.append(
      button("divide", () => void controller.requestDivide(path)),
      button("merge into…", () => controller.armMerge(path)),
    );
  } else {
    box.append(button("flatten", () => void controller.flattenTaxon(path)));
  }
  box.append(
    button("move…", () => controller.armMove(path)),
    button("note", () => {
      const note = window.prompt("note for this taxon", node.note ?? "");
      if (note !== null) void controller.setNote(path, note || null);
    }),
    button("remove", () => void controller.removeTaxon(path), "action danger"),
  );
  return box;
}
