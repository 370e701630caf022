/**
 * Cluster display-state table: sized by cluster count (never point count),
 * with instrumented writes proving a highlight touches exactly one entry
 * per cluster.
 */

import { describe, expect, it } from 'vitest';

import { ClusterStateTable, UnknownClusterError } from '../src/clusterTable.js';
import { fixtureJson, loadFixtureDataset, type FixtureMeta } from './helpers.js';

const meta = fixtureJson<FixtureMeta>('meta.json');
const dataset = loadFixtureDataset();

describe('ClusterStateTable', () => {
  it('holds one entry per cluster, not per point', () => {
    const table = new ClusterStateTable(dataset.clusterIds);
    expect(table.size).toBe(meta.cluster_ids.length);
    expect(table.size).toBeLessThan(meta.n);
    expect(table.ids).toEqual(meta.cluster_ids);
  });

  it('starts with every cluster in the normal state', () => {
    const table = new ClusterStateTable(dataset.clusterIds);
    for (const cid of table.ids) {
      expect(table.get(cid)).toBe('normal');
    }
    expect(table.writes).toBe(0);
  });

  it('highlight touches exactly |clusters| entries', () => {
    const table = new ClusterStateTable(dataset.clusterIds);
    const target = [dataset.clusterIds[0]];
    const before = table.writes;
    table.highlight(target);
    expect(table.writes - before).toBe(table.size);
    expect(table.get(target[0])).toBe('highlighted');
    for (const cid of table.ids) {
      if (!target.includes(cid)) {
        expect(table.get(cid)).toBe('dimmed');
      }
    }
  });

  it('highlighting several clusters still costs one write per entry', () => {
    const table = new ClusterStateTable(dataset.clusterIds);
    const target = dataset.clusterIds.slice(0, 2);
    table.highlight(target);
    expect(table.writes).toBe(table.size);
    for (const cid of target) {
      expect(table.get(cid)).toBe('highlighted');
    }
  });

  it('clear returns every entry to normal', () => {
    const table = new ClusterStateTable(dataset.clusterIds);
    table.highlight([dataset.clusterIds[0]]);
    table.clear();
    for (const cid of table.ids) {
      expect(table.get(cid)).toBe('normal');
    }
    expect(table.writes).toBe(2 * table.size);
  });

  it('rejects unknown ids without touching any entry', () => {
    const table = new ClusterStateTable(dataset.clusterIds);
    table.highlight([dataset.clusterIds[0]]);
    const writesBefore = table.writes;
    const snapshot = table.snapshot();
    expect(() => table.highlight([dataset.clusterIds[0], 999999])).toThrow(UnknownClusterError);
    expect(table.writes).toBe(writesBefore);
    expect(table.snapshot()).toEqual(snapshot);
  });

  it('deduplicates and sorts its cluster ids', () => {
    const table = new ClusterStateTable([5, 1, 5, 3, 1]);
    expect(table.ids).toEqual([1, 3, 5]);
    expect(table.size).toBe(3);
  });
});
