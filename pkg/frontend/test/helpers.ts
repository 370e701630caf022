/**
 * Shared test plumbing: fixture loading, a seeded generator for reproducible
 * "random" inputs, a recording fetch stub, and a ready-made action context.
 */

import { readFileSync } from 'node:fs';
import { dirname, join } from 'node:path';
import { fileURLToPath } from 'node:url';

import type { FetchLike } from '../src/api.js';
import { assembleDataset, parseMapTsv, parsePointsBlock, type LoadedDataset } from '../src/points.js';
import { ClusterStateTable } from '../src/clusterTable.js';
import { createViewState } from '../src/viewstate.js';
import { YearFilterController, type VisibilityMask } from '../src/yearFilter.js';
import type { ActionContext, Annotation } from '../src/actions.js';

const here = dirname(fileURLToPath(import.meta.url));
export const FIXTURES_DIR = join(here, 'fixtures');

export function fixtureBytes(name: string): ArrayBuffer {
  const b = readFileSync(join(FIXTURES_DIR, name));
  return b.buffer.slice(b.byteOffset, b.byteOffset + b.byteLength);
}

export function fixtureText(name: string): string {
  return readFileSync(join(FIXTURES_DIR, name), 'utf8');
}

export function fixtureJson<T>(name: string): T {
  return JSON.parse(fixtureText(name)) as T;
}

export type FixtureMeta = {
  dataset_id: string;
  n: number;
  pmids: string[];
  years: number[];
  clusters: number[];
  cluster_ids: number[];
};

export function loadFixtureDataset(): LoadedDataset {
  const meta = fixtureJson<FixtureMeta>('meta.json');
  return assembleDataset(
    meta.dataset_id,
    parsePointsBlock(fixtureBytes('points.bin')),
    parseMapTsv(fixtureText('points.tsv')),
  );
}

/** Small LCG so tests draw reproducible pseudo-random values. */
export class Lcg {
  private state: number;

  constructor(seed: number) {
    this.state = seed >>> 0;
  }

  /** Uniform float in [0, 1). */
  next(): number {
    this.state = (Math.imul(this.state, 1664525) + 1013904223) >>> 0;
    return this.state / 4294967296;
  }

  /** Uniform integer in [lo, hi] inclusive. */
  int(lo: number, hi: number): number {
    return lo + Math.floor(this.next() * (hi - lo + 1));
  }
}

export type RecordedCall = { url: string; method: string; body: unknown };

/**
 * Fetch stub: the handler maps a request to a response (JSON value, or a
 * Response for full control); every call is recorded for assertions.
 */
export function makeFetchStub(
  handler: (url: string, init?: RequestInit) => Response | object,
): { fetch: FetchLike; calls: RecordedCall[] } {
  const calls: RecordedCall[] = [];
  const fetchImpl: FetchLike = async (url, init) => {
    calls.push({
      url,
      method: init?.method ?? 'GET',
      body: typeof init?.body === 'string' ? JSON.parse(init.body) : null,
    });
    const out = handler(url, init);
    if (out instanceof Response) {
      return out;
    }
    return new Response(JSON.stringify(out), {
      status: 200,
      headers: { 'content-type': 'application/json' },
    });
  };
  return { fetch: fetchImpl, calls };
}

export function jsonResponse(value: unknown, status = 200): Response {
  return new Response(JSON.stringify(value), {
    status,
    headers: { 'content-type': 'application/json' },
  });
}

export type TestActionContext = ActionContext & {
  annotations: Annotation[];
  swaps: { mask: VisibilityMask; range: [number, number] | null }[];
};

/** Action context over the fixture dataset with a recording year filter. */
export function makeActionContext(dataset: LoadedDataset): TestActionContext {
  const swaps: TestActionContext['swaps'] = [];
  const table = new ClusterStateTable(dataset.clusterIds);
  const yearFilter = new YearFilterController(dataset.block.years, (mask, range) => {
    swaps.push({ mask, range });
  });
  return {
    view: createViewState(),
    table,
    yearFilter,
    annotations: [],
    swaps,
  };
}
