// Wire types for the service API. The UI renders these verbatim and never
// recomputes merges or metrics client-side.

export type TaxonPath = string[];

export interface TreeNodeDoc {
  name: string;
  origin: "manual" | "machine-cluster";
  note: string | null;
  children: TreeNodeDoc[];
}

export interface LabelDoc {
  paths: TaxonPath[];
  unsure: boolean;
}

export interface SessionDoc {
  session_id: string;
  coder_id: string;
  version: number;
  tree: TreeNodeDoc;
  labels: Record<string, LabelDoc>;
  image_order: string[];
  memos: string[];
}

export interface SessionSummary {
  session_id: string;
  coder_id: string;
  version: number;
  n_images: number;
}

export interface OpEnvelope {
  op: string;
  args: Record<string, unknown>;
  expected_version: number;
}

export interface OpResult {
  version: number;
  delta: {
    tree: TreeNodeDoc;
    labels: Record<string, LabelDoc>;
  };
}

export interface ApiError {
  code: string;
  message: string;
  details: Record<string, unknown>;
}

export interface DividePart {
  name: string;
  members: string[];
  representative: string;
  caption: string;
}

export interface DividePreview {
  version: number;
  parts: DividePart[];
}

export interface UnionNodeDoc {
  path: TaxonPath;
  creators: string[];
  consensus_count: number;
  partial_count: number;
  assigned: Record<string, string[]>;
}

export interface MetricsDoc {
  exact_match: number;
  jaccard: number;
  node_iou: number | null;
  depth: number | null;
  n_images: number;
}

export interface CompareResult {
  coders: string[];
  union: {
    nodes: UnionNodeDoc[];
    child_order: Record<string, string[]>;
  };
  majority: {
    tree: { name: string; children: unknown[] };
    labels: Record<string, TaxonPath[]>;
  };
  metrics: MetricsDoc | null;
  dissensus: string[];
  unsure: string[];
  warnings: string[];
}
