/**
 * Agent-action dispatch: strict response order, unknown or malformed actions
 * skipped with a console warning while the remainder applies, and each
 * handler's observable effect on the view.
 */

import { afterEach, describe, expect, it, vi } from 'vitest';

import { applyActions } from '../src/actions.js';
import { computeVisibility } from '../src/yearFilter.js';
import { loadFixtureDataset, makeActionContext } from './helpers.js';

const dataset = loadFixtureDataset();

afterEach(() => {
  vi.restoreAllMocks();
});

describe('applyActions', () => {
  it('applies a mixed batch in order', async () => {
    const ctx = makeActionContext(dataset);
    const result = await applyActions(ctx, [
      { action_type: 'set_year_filter', parameters: { year_range: [2000, 2010] } },
      { action_type: 'highlight_clusters', parameters: { cluster_ids: [dataset.clusterIds[0]] } },
      { action_type: 'annotate', parameters: { x: 1.5, y: -2, text: 'look here' } },
      { action_type: 'fly_to', parameters: { x: 0, y: 0, zoom: 40 } },
    ]);
    expect(result.applied).toBe(4);
    expect(result.skipped).toHaveLength(0);
    expect(ctx.view.yearRange).toEqual([2000, 2010]);
    expect(ctx.view.highlighted).toEqual([dataset.clusterIds[0]]);
    expect(ctx.annotations).toEqual([{ x: 1.5, y: -2, text: 'look here' }]);
    expect(ctx.view.camera).toEqual({ x: 0, y: 0, zoom: 40 });
  });

  it('skips unknown action types with a console warning and applies the rest', async () => {
    const warn = vi.spyOn(console, 'warn').mockImplementation(() => {});
    const ctx = makeActionContext(dataset);
    const result = await applyActions(ctx, [
      { action_type: 'highlight_clusters', parameters: { cluster_ids: [dataset.clusterIds[0]] } },
      { action_type: 'open_teleporter', parameters: {} },
      { action_type: 'annotate', parameters: { x: 0, y: 0, text: 'after the unknown one' } },
    ]);
    expect(result.applied).toBe(2);
    expect(result.skipped).toHaveLength(1);
    expect(result.skipped[0].action.action_type).toBe('open_teleporter');
    expect(warn).toHaveBeenCalledTimes(1);
    expect(String(warn.mock.calls[0][0])).toContain('open_teleporter');
    expect(ctx.annotations).toHaveLength(1); // the action after the unknown one still ran
  });

  it('skips malformed parameters the same way', async () => {
    const warn = vi.spyOn(console, 'warn').mockImplementation(() => {});
    const ctx = makeActionContext(dataset);
    const result = await applyActions(ctx, [
      { action_type: 'fly_to', parameters: { x: 1, y: 2, zoom: 0 } }, // zoom must be > 0
      { action_type: 'set_year_filter', parameters: { year_range: [2010, 2000] } }, // inverted
      { action_type: 'highlight_clusters', parameters: { cluster_ids: [999999] } }, // unknown cluster
      { action_type: 'pin_papers', parameters: { pmids: ['10000'] } },
    ]);
    expect(result.applied).toBe(1);
    expect(result.skipped).toHaveLength(3);
    expect(warn).toHaveBeenCalledTimes(3);
    expect(ctx.view.pinned).toEqual(['10000']);
    expect(ctx.view.yearRange).toBeNull();
    expect(ctx.view.camera.zoom).toBe(1);
  });

  it('dispatches highlight_clusters through the instrumented table', async () => {
    const ctx = makeActionContext(dataset);
    await applyActions(ctx, [
      { action_type: 'highlight_clusters', parameters: { cluster_ids: dataset.clusterIds.slice(0, 2) } },
    ]);
    expect(ctx.table.writes).toBe(ctx.table.size);
    expect(ctx.view.highlighted).toEqual(dataset.clusterIds.slice(0, 2));
  });

  it('recomputes visibility when the year filter changes and swaps once', async () => {
    const ctx = makeActionContext(dataset);
    await applyActions(ctx, [
      { action_type: 'set_year_filter', parameters: { year_range: [2003, 2007] } },
    ]);
    expect(ctx.swaps).toHaveLength(1);
    expect(ctx.swaps[0].range).toEqual([2003, 2007]);
    const want = computeVisibility(dataset.block.years, [2003, 2007]).visible;
    expect(ctx.swaps[0].mask.visible).toBe(want);
  });

  it('replaces the selection on select_pmids', async () => {
    const ctx = makeActionContext(dataset);
    ctx.view.selected = ['10010'];
    await applyActions(ctx, [{ action_type: 'select_pmids', parameters: { pmids: ['10001', '10002'] } }]);
    expect(ctx.view.selected).toEqual(['10001', '10002']);
  });

  it('pins without duplicating', async () => {
    const ctx = makeActionContext(dataset);
    ctx.view.pinned = ['10005'];
    await applyActions(ctx, [
      { action_type: 'pin_papers', parameters: { pmids: ['10005', '10006', '10006'] } },
    ]);
    expect(ctx.view.pinned).toEqual(['10005', '10006']);
  });

  it('clear_highlight resets the table and the view list', async () => {
    const ctx = makeActionContext(dataset);
    await applyActions(ctx, [
      { action_type: 'highlight_clusters', parameters: { cluster_ids: [dataset.clusterIds[0]] } },
      { action_type: 'clear_highlight', parameters: {} },
    ]);
    expect(ctx.view.highlighted).toEqual([]);
    for (const cid of ctx.table.ids) {
      expect(ctx.table.get(cid)).toBe('normal');
    }
  });

  it('does nothing for an empty batch', async () => {
    const ctx = makeActionContext(dataset);
    const result = await applyActions(ctx, []);
    expect(result.applied).toBe(0);
    expect(ctx.table.writes).toBe(0);
  });
});
