/**
 * Year filtering.  Visibility is a pure function of the per-point year
 * column and the active range; the computation never touches the DOM or the
 * GL context, so it can run off the UI thread (in a worker) and the caller
 * swaps the finished mask in one step.  Points with an unknown year (0)
 * are visible only when no filter is active.
 */

export type VisibilityMask = {
  /** 1 = visible, 0 = hidden; one entry per point. */
  mask: Uint8Array;
  /** Number of visible points (sum of the mask). */
  visible: number;
};

/** Compute the visibility mask for an inclusive [min, max] year range. */
export function computeVisibility(years: Uint16Array, range: [number, number] | null): VisibilityMask {
  const mask = new Uint8Array(years.length);
  if (range === null) {
    mask.fill(1);
    return { mask, visible: years.length };
  }
  const [lo, hi] = range;
  if (lo > hi) throw new RangeError(`year range min ${lo} exceeds max ${hi}`);
  let visible = 0;
  for (let i = 0; i < years.length; i++) {
    const y = years[i];
    // y === 0 encodes "unknown year" and never matches an explicit range.
    const v = y !== 0 && y >= lo && y <= hi ? 1 : 0;
    mask[i] = v;
    visible += v;
  }
  return { mask, visible };
}

/**
 * Recompute visibility asynchronously and hand the finished mask to `swap`
 * exactly once.  The stale mask stays in place until the new one is ready —
 * the caller sees either the old complete state or the new complete state,
 * never a half-applied one.  Out-of-order completions are dropped: only the
 * most recently requested range ever swaps in.
 */
export class YearFilterController {
  private generation = 0;

  constructor(
    private readonly years: Uint16Array,
    private readonly swap: (result: VisibilityMask, range: [number, number] | null) => void,
  ) {}

  async apply(range: [number, number] | null): Promise<VisibilityMask | null> {
    const gen = ++this.generation;
    // Yield before computing so the caller's frame can present first; in a
    // browser build this hop is where a worker round-trip would slot in.
    await Promise.resolve();
    const result = computeVisibility(this.years, range);
    if (gen !== this.generation) {
      return null; // superseded by a newer request
    }
    this.swap(result, range);
    return result;
  }
}
