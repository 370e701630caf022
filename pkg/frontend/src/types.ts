/**
 * Wire-level shapes shared with the map server, plus the client's own
 * view-state record.  Field names on payloads that travel over HTTP use
 * snake_case to match the server's JSON exactly; purely client-side
 * structures use camelCase.
 */

/** One article row parsed from the points TSV. */
export type ArticleRecord = {
  pmid: string;
  date: string;
  journal: string;
  title: string;
  abstract: string;
  meshTerms: string[];
  x: number;
  y: number;
  citationCount: number;
  size: number;
  color: string;
  /** Four-digit year parsed from the date prefix, or null when unknown. */
  year: number | null;
};

/** Columnar point attributes decoded from the binary points block. */
export type PointsBlock = {
  n: number;
  xs: Float32Array;
  ys: Float32Array;
  /** Publication year per point; 0 means unknown. */
  years: Uint16Array;
  /** Finest cluster id per point; -1 means noise / unclustered. */
  clusters: Int32Array;
  sizes: Float32Array;
};

/** One node of the cluster hierarchy as served by /clusters. */
export type ClusterNode = {
  cluster_id: number;
  level: number;
  parent_id: number | null;
  member_pmids: string[];
  stability: number;
  label: string | null;
};

export type ClusterTree = {
  n_levels: number;
  nodes: ClusterNode[];
};

export type TopicLabel = {
  cluster_id: number;
  label: string;
  terms: { term: string; score: number }[];
};

export type LabelsDoc = {
  stopwords_version: string | null;
  labels: TopicLabel[];
};

/** One bundled citation edge: a polyline in map coordinates. */
export type BundledEdge = {
  source: string;
  target: string;
  weight: number;
  points: [number, number][];
};

/** An action the agent asks the UI to perform. */
export type UIAction = {
  action_type: string;
  parameters: Record<string, unknown>;
};

export type ProvenanceItem = {
  pmid: string;
  snippet: string;
  source_type: string;
};

export type AgentResponse = {
  text: string;
  actions: UIAction[];
  provenance: ProvenanceItem[];
  agent_trace: Record<string, unknown>[];
  data: Record<string, unknown>;
};

/** Selection portion of the context sent with an agent query. */
export type SelectionPayload = {
  pmids?: string[];
  polygon?: [number, number][];
  cluster_ids?: number[];
  year_range?: [number, number];
};

export type ContextPayload = {
  dataset_id: string;
  selection: SelectionPayload;
  query_text: string;
  interaction_state: Record<string, unknown>;
};

/** Map camera: world-space center plus pixels-per-world-unit zoom. */
export type Camera = {
  x: number;
  y: number;
  zoom: number;
};

/** Everything the UI needs to reconstruct what the user is looking at. */
export type ViewState = {
  camera: Camera;
  /** Inclusive [min, max] year filter, or null when no filter is active. */
  yearRange: [number, number] | null;
  /** Cluster ids currently highlighted (all others render dimmed). */
  highlighted: number[];
  /** Pmids in the current selection. */
  selected: string[];
  /** Pmids pinned by the user or an agent action. */
  pinned: string[];
  /** Lasso vertices not yet committed to a selection (world coordinates). */
  pendingPolygon: [number, number][];
};

export type DatasetInfo = {
  id: string;
  articles: number;
  clusters: number;
  has_labels: boolean;
  has_edges: boolean;
  has_embeddings: boolean;
};
