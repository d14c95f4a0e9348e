// Application shell: session bar, tree + labeling panels, divide dialog,
// comparison view, and the version-polling loop.

import { ApiClient } from "./api.js";
import { renderCompare } from "./compare.js";
import { AppController } from "./controller.js";
import { renderDivide } from "./divide.js";
import { button, el } from "./dom.js";
import { renderLabeling } from "./labeling.js";
import { Store, ViewState } from "./state.js";
import { renderTree } from "./tree.js";

const POLL_MS = 3000;

export function mountApp(root: HTMLElement, api: ApiClient): AppController {
  const store = new Store();
  const controller = new AppController(api, store);

  const sessionBar = el("div", { class: "session-bar" });
  const notice = el("div", { class: "notice hidden" });
  const treePanel = el("div", { class: "panel tree-panel" });
  const labelPanel = el("div", { class: "panel label-panel" });
  const dividePanel = el("div", { class: "panel divide-panel hidden" });
  const comparePanel = el("div", { class: "panel compare-panel" });
  const workspace = el(
    "div",
    { class: "workspace" },
    treePanel,
    labelPanel,
  );
  root.replaceChildren(sessionBar, notice, dividePanel, comparePanel, workspace);

  function renderSessionBar(state: ViewState): void {
    sessionBar.replaceChildren();
    const select = el("select", { class: "session-select" }) as HTMLSelectElement;
    select.append(el("option", { value: "" }, "— open session —"));
    for (const s of state.sessionList) {
      const option = el(
        "option",
        { value: s.session_id },
        `${s.coder_id} (${s.session_id}, v${s.version})`,
      );
      select.append(option);
    }
    if (state.session) select.value = state.session.session_id;
    select.addEventListener("change", () => {
      if (select.value) void controller.openSession(select.value);
    });

    const compareSelect = el("select", {
      class: "compare-select",
      multiple: "multiple",
      size: "1",
      title: "ctrl-click to pick sessions to compare",
    }) as HTMLSelectElement;
    for (const s of state.sessionList) {
      compareSelect.append(
        el("option", { value: s.session_id }, s.coder_id),
      );
    }

    sessionBar.append(
      el("strong", { class: "brand" }, "taxa"),
      select,
      button("new session", () => {
        const coder = window.prompt("coder id");
        if (coder) void controller.createSession(coder);
      }),
      compareSelect,
      button("compare", () => {
        const ids = [...compareSelect.selectedOptions].map((o) => o.value);
        if (ids.length >= 1) void controller.openCompare(ids);
      }),
    );
    if (state.session) {
      sessionBar.append(
        button("load batch", () => {
          // paste uuids from a batch plan (whitespace/comma separated)
          const text = window.prompt("image uuids for the next batch");
          const uuids = text?.split(/[\s,]+/).filter(Boolean) ?? [];
          if (uuids.length) void controller.loadBatch(uuids);
        }),
        el(
          "span",
          { class: "version-tag" },
          `v${state.session.version}`,
        ),
      );
    }
  }

  store.subscribe((state) => {
    renderSessionBar(state);
    if (state.notice) {
      notice.textContent = state.notice;
      notice.classList.remove("hidden");
    } else {
      notice.classList.add("hidden");
    }
    renderTree(treePanel, state, controller);
    renderLabeling(labelPanel, state, controller);
    renderDivide(dividePanel, state, controller);
    renderCompare(comparePanel, state, controller);
    workspace.classList.toggle("hidden", state.compare !== null);
  });

  void controller.refreshSessionList();
  return controller;
}

export function startPolling(
  controller: AppController,
  intervalMs = POLL_MS,
): () => void {
  const timer = setInterval(() => {
    void controller.pollVersion().catch(() => undefined);
  }, intervalMs);
  return () => clearInterval(timer);
}

declare global {
  interface Window {
    taxaController?: AppController;
  }
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  const api = new ApiClient("");
  const controller = mountApp(document.getElementById("app")!, api);
  startPolling(controller);
  window.taxaController = controller; // console access for power users
}
