// Labeling panel: filter bar plus a lazy-loading thumbnail grid. Cards are
// drag sources; label chips unassign on click; the flag button toggles the
// unsure marker.

import { AppController } from "./controller.js";
import { button, el } from "./dom.js";
import { ViewState, pathKey } from "./state.js";
import { imageDragData } from "./tree.js";

export function renderLabeling(
  container: HTMLElement,
  state: ViewState,
  controller: AppController,
): void {
  container.replaceChildren();
  const session = state.session;
  if (!session) return;

  container.append(filterBar(state, controller));
  const grid = el("div", { class: "image-grid" });
  for (const uuid of state.visibleImages) {
    const assignment = session.labels[uuid];
    if (assignment) grid.append(card(uuid, assignment, controller));
  }
  container.append(grid);
  container.append(
    el(
      "div",
      { class: "panel-footer" },
      `${state.visibleImages.length} of ${session.image_order.length} images`,
    ),
  );
}

function filterBar(state: ViewState, controller: AppController): HTMLElement {
  const bar = el("div", { class: "filter-bar" });
  const input = el("input", {
    type: "search",
    placeholder: "keyword or uuid…",
    class: "filter-input",
  });
  const go = (kind: "keyword" | "uuid") => {
    const text = input.value.trim();
    if (!text) return void controller.applyFilter({ kind: "all" });
    void controller.applyFilter(
      kind === "keyword" ? { kind, text } : { kind, uuid: text },
    );
  };
  input.addEventListener("keydown", (event) => {
    if (event.key === "Enter") go("keyword");
  });
  bar.append(
    input,
    button("search", () => go("keyword")),
    button("uuid", () => go("uuid")),
    button("all", () => {
      input.value = "";
      void controller.selectTaxon(null);
    }),
  );
  if (state.filter.kind === "taxon") {
    bar.append(
      el(
        "span",
        { class: "filter-note" },
        `filtered by taxon: ${pathKey(state.filter.path)}`,
      ),
    );
  }
  return bar;
}

function card(
  uuid: string,
  assignment: { paths: string[][]; unsure: boolean },
  controller: AppController,
): HTMLElement {
  const node = el("figure", {
    class: "image-card" + (assignment.unsure ? " unsure" : ""),
    draggable: "true",
    "data-uuid": uuid,
  });
  node.addEventListener("dragstart", (event) =>
    imageDragData(event as DragEvent, uuid),
  );

  const img = el("img", {
    src: controller.api.imageUrl(uuid),
    loading: "lazy",
    alt: uuid,
  });
  node.append(img, el("figcaption", {}, uuid));

  const chips = el("div", { class: "chips" });
  for (const path of assignment.paths) {
    const chip = el(
      "span",
      { class: "chip", title: "click to unassign" },
      pathKey(path),
    );
    chip.addEventListener("click", () => {
      void controller.unlabelImage(uuid, path);
    });
    chips.append(chip);
  }
  node.append(chips);

  node.append(
    button(
      assignment.unsure ? "unsure ✓" : "unsure?",
      () => void controller.setUnsure(uuid, !assignment.unsure),
      "action flag",
    ),
  );
  return node;
}
