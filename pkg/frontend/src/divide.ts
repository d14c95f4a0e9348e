// Divide preview: the machine-proposed clusters with representative
// thumbnails and captions. Part names are editable before committing.

import { AppController } from "./controller.js";
import { button, el } from "./dom.js";
import { ViewState, pathKey } from "./state.js";

export function renderDivide(
  container: HTMLElement,
  state: ViewState,
  controller: AppController,
): void {
  container.replaceChildren();
  const divide = state.divide;
  if (!divide) {
    container.classList.add("hidden");
    return;
  }
  container.classList.remove("hidden");

  container.append(
    el(
      "div",
      { class: "divide-header" },
      el("strong", {}, `divide ${pathKey(divide.path)}`),
      el(
        "span",
        { class: "hint" },
        ` into ${divide.preview.parts.length} clusters`,
      ),
    ),
  );

  const list = el("div", { class: "divide-parts" });
  divide.preview.parts.forEach((part, index) => {
    const nameInput = el("input", {
      type: "text",
      class: "part-name",
      value: part.name,
    }) as HTMLInputElement;
    nameInput.value = part.name;
    nameInput.addEventListener("change", () =>
      controller.renameDividePart(index, nameInput.value),
    );
    list.append(
      el(
        "div",
        { class: "divide-part", "data-part": String(index) },
        el("img", {
          src: controller.api.imageUrl(part.representative),
          class: "thumb",
          alt: part.representative,
        }),
        nameInput,
        el("span", { class: "caption" }, part.caption),
        el("span", { class: "members" }, `${part.members.length} images`),
      ),
    );
  });
  container.append(list);

  container.append(
    el(
      "div",
      { class: "divide-actions" },
      button("commit", () => void controller.commitDivide()),
      button("cancel", () => controller.cancelDivide()),
    ),
  );
}
