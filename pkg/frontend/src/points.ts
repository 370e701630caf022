/**
 * Decoders for the two point payloads the server exposes and the glue that
 * zips them into one client-side dataset.
 *
 * The binary block carries the GPU attributes (one upload, no per-row JSON
 * cost); the TSV carries the row metadata, including pmids and the
 * full-precision coordinates the picking structure is built from.  Both are
 * sorted by pmid on the server, so row i of the TSV describes point i of the
 * block — if the two disagree on length the dataset is unusable and loading
 * fails loudly rather than guessing at an alignment.
 */

import { Quadtree } from './quadtree.js';
import type { ArticleRecord, PointsBlock } from './types.js';

export class DatasetLoadError extends Error {}

const POINTS_MAGIC = 'PTS1';

/** Header (magic + u32 count) plus five columnar arrays per point. */
const HEADER_BYTES = 8;
const BYTES_PER_POINT = 4 + 4 + 2 + 4 + 4;

/**
 * Decode the binary points block: "PTS1", u32 little-endian count, then
 * columnar xs (f32), ys (f32), years (u16, 0 = unknown), cluster ids
 * (i32, -1 = noise), sizes (f32), all little-endian.
 */
export function parsePointsBlock(buf: ArrayBuffer): PointsBlock {
  if (buf.byteLength < HEADER_BYTES) {
    throw new DatasetLoadError(`points block too short (${buf.byteLength} bytes)`);
  }
  const view = new DataView(buf);
  const magic = String.fromCharCode(
    view.getUint8(0),
    view.getUint8(1),
    view.getUint8(2),
    view.getUint8(3),
  );
  if (magic !== POINTS_MAGIC) {
    throw new DatasetLoadError(`bad points magic ${JSON.stringify(magic)}`);
  }
  const n = view.getUint32(4, true);
  const expected = HEADER_BYTES + BYTES_PER_POINT * n;
  if (buf.byteLength !== expected) {
    throw new DatasetLoadError(
      `points block length ${buf.byteLength} does not match ${n} points (expected ${expected})`,
    );
  }
  // The columns are packed back to back, so for odd n the later arrays land
  // on unaligned offsets; slicing copies each column into its own aligned
  // buffer.  Typed arrays then read platform-endian, which is little-endian
  // everywhere we run — the DataView fallback covers the exotic case.
  let off = HEADER_BYTES;
  const slice = (bytes: number): ArrayBuffer => {
    const out = buf.slice(off, off + bytes);
    off += bytes;
    return out;
  };
  if (!PLATFORM_LITTLE_ENDIAN) {
    return parsePointsBlockPortable(view, n);
  }
  return {
    n,
    xs: new Float32Array(slice(4 * n)),
    ys: new Float32Array(slice(4 * n)),
    years: new Uint16Array(slice(2 * n)),
    clusters: new Int32Array(slice(4 * n)),
    sizes: new Float32Array(slice(4 * n)),
  };
}

const PLATFORM_LITTLE_ENDIAN = new Uint8Array(new Uint32Array([1]).buffer)[0] === 1;

function parsePointsBlockPortable(view: DataView, n: number): PointsBlock {
  const xs = new Float32Array(n);
  const ys = new Float32Array(n);
  const years = new Uint16Array(n);
  const clusters = new Int32Array(n);
  const sizes = new Float32Array(n);
  let off = HEADER_BYTES;
  for (let i = 0; i < n; i++) xs[i] = view.getFloat32(off + 4 * i, true);
  off += 4 * n;
  for (let i = 0; i < n; i++) ys[i] = view.getFloat32(off + 4 * i, true);
  off += 4 * n;
  for (let i = 0; i < n; i++) years[i] = view.getUint16(off + 2 * i, true);
  off += 2 * n;
  for (let i = 0; i < n; i++) clusters[i] = view.getInt32(off + 4 * i, true);
  off += 4 * n;
  for (let i = 0; i < n; i++) sizes[i] = view.getFloat32(off + 4 * i, true);
  return { n, xs, ys, years, clusters, sizes };
}

const YEAR_RE = /^(\d{4})($|[-/ ])/;

function parseYear(date: string): number | null {
  const m = YEAR_RE.exec(date.trim());
  return m ? parseInt(m[1], 10) : null;
}

/**
 * Parse the points TSV (header row first, tab-separated, one article per
 * line).  Columns are located by header name so extra columns and reordered
 * headers are tolerated; a header without "pmid" is rejected.
 */
export function parseMapTsv(text: string): ArticleRecord[] {
  const lines = text.split('\n');
  if (lines.length > 0 && lines[lines.length - 1] === '') {
    lines.pop();
  }
  if (lines.length === 0) {
    throw new DatasetLoadError('empty TSV: no header row');
  }
  const header = lines[0].split('\t');
  const col = new Map<string, number>();
  header.forEach((name, i) => {
    if (!col.has(name)) col.set(name, i);
  });
  if (!col.has('pmid')) {
    throw new DatasetLoadError('TSV header has no pmid column');
  }
  const records: ArticleRecord[] = [];
  for (let lineNo = 1; lineNo < lines.length; lineNo++) {
    const line = lines[lineNo];
    if (line === '') continue;
    const cells = line.split('\t');
    const cell = (name: string): string => {
      const i = col.get(name);
      return i !== undefined && i < cells.length ? cells[i] : '';
    };
    const pmid = cell('pmid').trim();
    if (pmid === '') {
      throw new DatasetLoadError(`line ${lineNo + 1}: empty pmid`);
    }
    const date = cell('date');
    const mesh = cell('mesh_terms');
    records.push({
      pmid,
      date,
      journal: cell('journal'),
      title: cell('title'),
      abstract: cell('abstract'),
      meshTerms: mesh === '' ? [] : mesh.split(';'),
      x: Number(cell('x')),
      y: Number(cell('y')),
      citationCount: parseInt(cell('citation_count') || '0', 10),
      size: Number(cell('size') || '0'),
      color: cell('color'),
      year: parseYear(date),
    });
  }
  return records;
}

/** A dataset ready to render and query. */
export type LoadedDataset = {
  id: string;
  block: PointsBlock;
  records: ArticleRecord[];
  /** records indexed by pmid. */
  byPmid: Map<string, ArticleRecord>;
  /** Picking structure over the TSV's full-precision coordinates. */
  tree: Quadtree;
  /** Cluster ids present on the points, ascending, noise (-1) excluded. */
  clusterIds: number[];
};

/**
 * Zip the binary attribute block and the TSV rows into one dataset.  The two
 * payloads must describe the same number of points; a mismatch means the
 * fetches raced a dataset swap (or the server is broken) and is a load error.
 */
export function assembleDataset(id: string, block: PointsBlock, records: ArticleRecord[]): LoadedDataset {
  if (block.n !== records.length) {
    throw new DatasetLoadError(
      `attribute count mismatch: binary block has ${block.n} points, TSV has ${records.length} rows`,
    );
  }
  const byPmid = new Map<string, ArticleRecord>();
  for (const r of records) {
    if (byPmid.has(r.pmid)) {
      throw new DatasetLoadError(`duplicate pmid ${r.pmid} in TSV`);
    }
    byPmid.set(r.pmid, r);
  }
  const tree = new Quadtree(records.map((r) => ({ pmid: r.pmid, x: r.x, y: r.y })));
  const present = new Set<number>();
  for (let i = 0; i < block.n; i++) {
    const cid = block.clusters[i];
    if (cid !== -1) present.add(cid);
  }
  const clusterIds = Array.from(present).sort((a, b) => a - b);
  return { id, block, records, byPmid, tree, clusterIds };
}
