/**
 * Typed client for the map server's HTTP interface.  The fetch function is
 * injectable so tests can serve recorded responses without a network.
 */

import type {
  AgentResponse,
  BundledEdge,
  ClusterTree,
  ContextPayload,
  DatasetInfo,
  LabelsDoc,
} from './types.js';
import { assembleDataset, parseMapTsv, parsePointsBlock, type LoadedDataset } from './points.js';

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    message: string,
    readonly status: number,
    readonly body: unknown,
  ) {
    super(message);
  }
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = '',
    private readonly fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request(path: string, init?: RequestInit): Promise<Response> {
    const resp = await this.fetchImpl(this.baseUrl + path, init);
    if (!resp.ok) {
      let body: unknown = null;
      try {
        body = await resp.json();
      } catch {
        // non-JSON error body; keep null
      }
      throw new ApiError(`${init?.method ?? 'GET'} ${path} failed with ${resp.status}`, resp.status, body);
    }
    return resp;
  }

  private async getJson<T>(path: string): Promise<T> {
    const resp = await this.request(path);
    return (await resp.json()) as T;
  }

  private async postJson<T>(path: string, payload: unknown): Promise<T> {
    const resp = await this.request(path, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(payload),
    });
    return (await resp.json()) as T;
  }

  health(): Promise<{ status: string; datasets: number }> {
    return this.getJson('/api/health');
  }

  datasets(): Promise<DatasetInfo[]> {
    return this.getJson('/api/datasets');
  }

  async pointsBinary(datasetId: string): Promise<ArrayBuffer> {
    const resp = await this.request(`/api/datasets/${encodeURIComponent(datasetId)}/points?format=binary`);
    return resp.arrayBuffer();
  }

  async pointsTsv(datasetId: string): Promise<string> {
    const resp = await this.request(`/api/datasets/${encodeURIComponent(datasetId)}/points?format=tsv`);
    return resp.text();
  }

  clusters(datasetId: string): Promise<ClusterTree> {
    return this.getJson(`/api/datasets/${encodeURIComponent(datasetId)}/clusters`);
  }

  labels(datasetId: string): Promise<LabelsDoc> {
    return this.getJson(`/api/datasets/${encodeURIComponent(datasetId)}/labels`);
  }

  edges(datasetId: string): Promise<{ edges: BundledEdge[] }> {
    return this.getJson(`/api/datasets/${encodeURIComponent(datasetId)}/edges`);
  }

  articles(
    datasetId: string,
    pmids?: string[],
    page = 1,
  ): Promise<{ articles: Record<string, unknown>[]; total: number; page: number; missing: string[] }> {
    const params = new URLSearchParams();
    if (pmids && pmids.length > 0) params.set('pmids', pmids.join(','));
    params.set('page', String(page));
    return this.getJson(`/api/datasets/${encodeURIComponent(datasetId)}/articles?${params.toString()}`);
  }

  /** Server-side polygon selection; returns the matching pmids, sorted. */
  selectPolygon(datasetId: string, vertices: [number, number][]): Promise<{ pmids: string[]; count: number }> {
    return this.postJson(`/api/datasets/${encodeURIComponent(datasetId)}/selection/polygon`, { vertices });
  }

  agentQuery(payload: ContextPayload): Promise<AgentResponse> {
    return this.postJson('/api/agent/query', payload);
  }

  /**
   * Fetch both point payloads and zip them into a dataset.  The binary block
   * uploads to the GPU as-is; the picking structure builds from the TSV's
   * full-precision coordinates.  A row-count mismatch raises a load error.
   */
  async loadDataset(datasetId: string): Promise<LoadedDataset> {
    const [buf, tsv] = await Promise.all([this.pointsBinary(datasetId), this.pointsTsv(datasetId)]);
    return assembleDataset(datasetId, parsePointsBlock(buf), parseMapTsv(tsv));
  }
}
