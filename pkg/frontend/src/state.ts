// View state and the pure helpers behind the panels. Anything that looks
// like taxonomy *logic* (merging, metrics, voting) lives on the server;
// these helpers only reshape fetched data for display.

import type {
  CompareResult,
  DividePreview,
  SessionDoc,
  TaxonPath,
  TreeNodeDoc,
} from "./types.js";

export type ImageFilter =
  | { kind: "all" }
  | { kind: "taxon"; path: TaxonPath }
  | { kind: "keyword"; text: string }
  | { kind: "uuid"; uuid: string };

export interface PendingAction {
  kind: "move" | "merge";
  source: TaxonPath;
}

export interface ViewState {
  session: SessionDoc | null;
  sessionList: { session_id: string; coder_id: string; version: number }[];
  selectedTaxon: TaxonPath | null;
  filter: ImageFilter;
  visibleImages: string[];
  pendingAction: PendingAction | null;
  divide: { path: TaxonPath; preview: DividePreview } | null;
  compare: {
    sessionIds: string[];
    sessions: SessionDoc[];
    result: CompareResult;
    dissensusOnly: boolean;
    unsureOnly: boolean;
  } | null;
  notice: string | null;
}

export function initialState(): ViewState {
  return {
    session: null,
    sessionList: [],
    selectedTaxon: null,
    filter: { kind: "all" },
    visibleImages: [],
    pendingAction: null,
    divide: null,
    compare: null,
    notice: null,
  };
}

export type Listener = (state: ViewState) => void;

export class Store {
  private state: ViewState = initialState();
  private listeners: Listener[] = [];

  get(): ViewState {
    return this.state;
  }

  update(patch: Partial<ViewState>): void {
    this.state = { ...this.state, ...patch };
    for (const listener of this.listeners) {
      listener(this.state);
    }
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }
}

// -- path helpers ------------------------------------------------------------

export function pathKey(path: TaxonPath): string {
  return path.join("/");
}

export function samePath(a: TaxonPath, b: TaxonPath): boolean {
  return a.length === b.length && a.every((seg, i) => seg === b[i]);
}

export function nodeAt(tree: TreeNodeDoc, path: TaxonPath): TreeNodeDoc | null {
  let node: TreeNodeDoc = tree;
  for (const seg of path) {
    const child = node.children.find((c) => c.name === seg);
    if (!child) return null;
    node = child;
  }
  return node;
}

export function isLeaf(tree: TreeNodeDoc, path: TaxonPath): boolean {
  const node = nodeAt(tree, path);
  return node !== null && node.children.length === 0;
}

export function isDescendant(path: TaxonPath, ancestor: TaxonPath): boolean {
  return (
    ancestor.length <= path.length &&
    ancestor.every((seg, i) => seg === path[i])
  );
}

// Images per node for tree badges: a label counts for every prefix, so
// internal nodes aggregate their descendants (same rule as the server's
// taxon query).
export function badgeCounts(doc: SessionDoc): Map<string, number> {
  const counts = new Map<string, number>();
  for (const uuid of Object.keys(doc.labels)) {
    const seen = new Set<string>();
    for (const path of doc.labels[uuid].paths) {
      for (let i = 1; i <= path.length; i++) {
        seen.add(pathKey(path.slice(0, i)));
      }
    }
    for (const key of seen) {
      counts.set(key, (counts.get(key) ?? 0) + 1);
    }
  }
  return counts;
}

// -- comparison display helpers --------------------------------------------------

// Paths not shared by every coder who holds the image; these get emphasis
// in the label comparison table.
export function disputedPaths(perCoder: TaxonPath[][]): Set<string> {
  const keyed = perCoder.map((paths) => new Set(paths.map(pathKey)));
  const union = new Set<string>();
  for (const set of keyed) {
    for (const key of set) union.add(key);
  }
  const disputed = new Set<string>();
  for (const key of union) {
    if (!keyed.every((set) => set.has(key))) disputed.add(key);
  }
  return disputed;
}

export function visibleCompareImages(
  order: string[],
  compare: NonNullable<ViewState["compare"]>,
): string[] {
  let uuids = order;
  if (compare.dissensusOnly) {
    const allowed = new Set(compare.result.dissensus);
    uuids = uuids.filter((u) => allowed.has(u));
  }
  if (compare.unsureOnly) {
    const allowed = new Set(compare.result.unsure);
    uuids = uuids.filter((u) => allowed.has(u));
  }
  return uuids;
}

export function renamePart(
  preview: DividePreview,
  index: number,
  name: string,
): DividePreview {
  return {
    ...preview,
    parts: preview.parts.map((part, i) =>
      i === index ? { ...part, name } : part,
    ),
  };
}
