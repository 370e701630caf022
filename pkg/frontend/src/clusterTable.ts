/**
 * Per-cluster display state.  The table has exactly one entry per cluster in
 * the dataset — its length scales with the number of clusters, never with
 * the number of points — and the renderer resolves each point's display
 * through its cluster's entry.  Writes are counted so tests can assert that
 * a highlight touches exactly one entry per cluster.
 */

export type ClusterDisplayState = 'normal' | 'highlighted' | 'dimmed';

export class UnknownClusterError extends Error {}

export class ClusterStateTable {
  /** Cluster ids in table order (ascending). */
  readonly ids: number[];
  private readonly indexOf: Map<number, number>;
  private readonly states: ClusterDisplayState[];
  /** Total entry writes since construction (test instrumentation). */
  writes = 0;

  constructor(clusterIds: Iterable<number>) {
    this.ids = Array.from(new Set(clusterIds)).sort((a, b) => a - b);
    this.indexOf = new Map(this.ids.map((cid, i) => [cid, i]));
    this.states = this.ids.map(() => 'normal');
  }

  get size(): number {
    return this.ids.length;
  }

  has(clusterId: number): boolean {
    return this.indexOf.has(clusterId);
  }

  get(clusterId: number): ClusterDisplayState {
    const i = this.indexOf.get(clusterId);
    if (i === undefined) {
      throw new UnknownClusterError(`cluster ${clusterId} is not in the table`);
    }
    return this.states[i];
  }

  set(clusterId: number, state: ClusterDisplayState): void {
    const i = this.indexOf.get(clusterId);
    if (i === undefined) {
      throw new UnknownClusterError(`cluster ${clusterId} is not in the table`);
    }
    this.states[i] = state;
    this.writes += 1;
  }

  /**
   * Highlight the given clusters and dim every other one: exactly one write
   * per table entry, regardless of how many are highlighted.
   */
  highlight(clusterIds: Iterable<number>): void {
    const wanted = new Set(clusterIds);
    for (const cid of wanted) {
      if (!this.indexOf.has(cid)) {
        throw new UnknownClusterError(`cluster ${cid} is not in the table`);
      }
    }
    for (let i = 0; i < this.ids.length; i++) {
      this.states[i] = wanted.has(this.ids[i]) ? 'highlighted' : 'dimmed';
      this.writes += 1;
    }
  }

  /** Return every entry to 'normal' (one write per entry). */
  clear(): void {
    for (let i = 0; i < this.ids.length; i++) {
      this.states[i] = 'normal';
      this.writes += 1;
    }
  }

  /** Snapshot of the table as an id -> state map (reads are not counted). */
  snapshot(): Map<number, ClusterDisplayState> {
    return new Map(this.ids.map((cid, i) => [cid, this.states[i]]));
  }
}
