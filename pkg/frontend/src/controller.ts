// The controller owns all server interaction. DOM handlers call these
// methods; the e2e suite drives the same methods against a live server.

import { ApiClient, ApiRequestError } from "./api.js";
import {
  ImageFilter,
  Store,
  isLeaf,
  renamePart,
  samePath,
} from "./state.js";
import type { DividePreview, TaxonPath } from "./types.js";

export class AppController {
  constructor(
    readonly api: ApiClient,
    readonly store: Store,
  ) {}

  // -- session lifecycle ----------------------------------------------------

  async refreshSessionList(): Promise<void> {
    const { sessions } = await this.api.listSessions();
    this.store.update({ sessionList: sessions });
  }

  async createSession(coderId: string): Promise<string> {
    const created = await this.api.createSession(coderId);
    await this.refreshSessionList();
    await this.openSession(created.session_id);
    return created.session_id;
  }

  async openSession(sessionId: string): Promise<void> {
    const doc = await this.api.getSession(sessionId);
    this.store.update({
      session: doc,
      selectedTaxon: null,
      filter: { kind: "all" },
      pendingAction: null,
      divide: null,
      compare: null,
      notice: null,
    });
    await this.applyFilter({ kind: "all" });
  }

  async refresh(): Promise<void> {
    const session = this.store.get().session;
    if (!session) return;
    const doc = await this.api.getSession(session.session_id);
    this.store.update({ session: doc });
    await this.applyFilter(this.store.get().filter);
  }

  /** Poll the server version; refetch when another tab moved the session. */
  async pollVersion(): Promise<void> {
    const session = this.store.get().session;
    if (!session) return;
    const doc = await this.api.getSession(session.session_id);
    if (doc.version !== session.version) {
      this.store.update({ session: doc });
      await this.applyFilter(this.store.get().filter);
    }
  }

  // -- mutations (all through the op envelope, with conflict retry) ------------

  private async op(op: string, args: Record<string, unknown>): Promise<void> {
    const session = this.store.get().session;
    if (!session) throw new Error("no session open");
    try {
      await this.api.sendOp(session.session_id, op, args, session.version);
    } catch (error) {
      if (error instanceof ApiRequestError) {
        this.store.update({ notice: `${error.body.code}: ${error.body.message}` });
      }
      await this.refresh();
      throw error;
    }
    await this.refresh();
  }

  loadBatch(uuids: string[]): Promise<void> {
    return this.op("load_batch", { uuids });
  }

  createTaxon(parent: TaxonPath, name: string): Promise<void> {
    return this.op("create_taxon", { parent, name });
  }

  renameTaxon(path: TaxonPath, newName: string): Promise<void> {
    return this.op("rename_taxon", { path, new_name: newName });
  }

  removeTaxon(path: TaxonPath): Promise<void> {
    return this.op("remove_taxon", { path });
  }

  flattenTaxon(path: TaxonPath): Promise<void> {
    return this.op("flatten_taxon", { path });
  }

  setNote(path: TaxonPath, note: string | null): Promise<void> {
    return this.op("set_note", { path, note });
  }

  setUnsure(uuid: string, flag: boolean): Promise<void> {
    return this.op("set_unsure", { uuid, flag });
  }

  unlabelImage(uuid: string, leaf: TaxonPath): Promise<void> {
    return this.op("unlabel_image", { uuid, leaf });
  }

  /**
   * Drop handler target. Rejects internal nodes before any request leaves
   * the browser; the server enforces the same rule.
   */
  async dropImageOnTaxon(uuid: string, path: TaxonPath): Promise<boolean> {
    const session = this.store.get().session;
    if (!session) return false;
    if (!isLeaf(session.tree, path)) {
      this.store.update({ notice: "leaf required: images attach to leaf taxa" });
      return false;
    }
    await this.op("label_image", { uuid, leaf: path });
    return true;
  }

  // move/merge run as two-click actions: arm on the source, fire on the target
  armMove(source: TaxonPath): void {
    this.store.update({ pendingAction: { kind: "move", source } });
  }

  armMerge(source: TaxonPath): void {
    this.store.update({ pendingAction: { kind: "merge", source } });
  }

  async completeAction(target: TaxonPath): Promise<void> {
    const pending = this.store.get().pendingAction;
    if (!pending) return;
    this.store.update({ pendingAction: null });
    if (pending.kind === "move") {
      if (samePath(pending.source, target)) return;
      await this.op("move_taxon", { path: pending.source, new_parent: target });
    } else {
      await this.op("merge_taxa", { source: pending.source, target });
    }
  }

  // -- filter / search ------------------------------------------------------------

  async applyFilter(filter: ImageFilter): Promise<void> {
    const session = this.store.get().session;
    if (!session) return;
    let uuids: string[];
    if (filter.kind === "all") {
      uuids = session.image_order;
    } else if (filter.kind === "taxon") {
      uuids = (
        await this.api.queryImages(session.session_id, {
          taxon: filter.path.join("/"),
        })
      ).uuids;
    } else if (filter.kind === "keyword") {
      uuids = (
        await this.api.queryImages(session.session_id, { q: filter.text })
      ).uuids;
    } else {
      uuids = (
        await this.api.queryImages(session.session_id, { uuid: filter.uuid })
      ).uuids;
    }
    this.store.update({ filter, visibleImages: uuids });
  }

  selectTaxon(path: TaxonPath | null): Promise<void> {
    this.store.update({ selectedTaxon: path });
    return this.applyFilter(
      path === null ? { kind: "all" } : { kind: "taxon", path },
    );
  }

  // -- machine-assisted divide ----------------------------------------------------

  async requestDivide(path: TaxonPath, seed = 0): Promise<DividePreview> {
    const session = this.store.get().session;
    if (!session) throw new Error("no session open");
    const preview = await this.api.dividePreview(session.session_id, path, seed);
    this.store.update({ divide: { path, preview } });
    return preview;
  }

  renameDividePart(index: number, name: string): void {
    const divide = this.store.get().divide;
    if (!divide) return;
    this.store.update({
      divide: { ...divide, preview: renamePart(divide.preview, index, name) },
    });
  }

  async commitDivide(): Promise<void> {
    const divide = this.store.get().divide;
    if (!divide) return;
    await this.op("apply_partition", {
      path: divide.path,
      parts: divide.preview.parts.map((p) => ({
        name: p.name,
        members: p.members,
      })),
      origin: "machine-cluster",
    });
    this.store.update({ divide: null });
  }

  cancelDivide(): void {
    this.store.update({ divide: null });
  }

  // -- comparison -------------------------------------------------------------------

  async openCompare(sessionIds: string[]): Promise<void> {
    const result = await this.api.compare(sessionIds);
    const sessions = await Promise.all(
      sessionIds.map((id) => this.api.getSession(id)),
    );
    this.store.update({
      compare: {
        sessionIds,
        sessions,
        result,
        dissensusOnly: false,
        unsureOnly: false,
      },
    });
  }

  setCompareFilters(dissensusOnly: boolean, unsureOnly: boolean): void {
    const compare = this.store.get().compare;
    if (!compare) return;
    this.store.update({ compare: { ...compare, dissensusOnly, unsureOnly } });
  }

  closeCompare(): void {
    this.store.update({ compare: null });
  }
}
