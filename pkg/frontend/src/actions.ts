/**
 * Dispatcher for UI actions returned by the agent endpoint.  Actions apply
 * strictly in response order.  An action with an unknown type — or one whose
 * parameters don't check out against the loaded dataset — is skipped with a
 * console warning and the remainder still applies, so one bad action never
 * poisons the batch.
 */

import type { Camera, UIAction, ViewState } from './types.js';
import { ClusterStateTable, UnknownClusterError } from './clusterTable.js';
import { YearFilterController } from './yearFilter.js';

export type Annotation = { x: number; y: number; text: string };

export type ActionContext = {
  view: ViewState;
  table: ClusterStateTable;
  yearFilter: YearFilterController;
  annotations: Annotation[];
  /** Notified when an action moves the camera. */
  onCamera?: (camera: Camera) => void;
  /** Notified when an action replaces the selection. */
  onSelection?: (pmids: string[]) => void;
};

export type ApplyResult = {
  applied: number;
  skipped: { action: UIAction; reason: string }[];
};

class ActionParameterError extends Error {}

/** Apply a batch of agent actions to the view, in order. */
export async function applyActions(ctx: ActionContext, actions: UIAction[]): Promise<ApplyResult> {
  const result: ApplyResult = { applied: 0, skipped: [] };
  for (const action of actions) {
    try {
      await applyOne(ctx, action);
      result.applied += 1;
    } catch (err) {
      if (err instanceof ActionParameterError || err instanceof UnknownClusterError) {
        console.warn(`skipping action ${action.action_type}: ${err.message}`);
        result.skipped.push({ action, reason: err.message });
      } else {
        throw err;
      }
    }
  }
  return result;
}

async function applyOne(ctx: ActionContext, action: UIAction): Promise<void> {
  const params = action.parameters ?? {};
  switch (action.action_type) {
    case 'highlight_clusters': {
      const ids = intList(params.cluster_ids, 'cluster_ids');
      // The table rejects unknown ids before writing anything, so a bad id
      // leaves the previous highlight fully intact.
      ctx.table.highlight(ids);
      ctx.view.highlighted = ids;
      return;
    }
    case 'clear_highlight': {
      ctx.table.clear();
      ctx.view.highlighted = [];
      return;
    }
    case 'select_pmids': {
      const pmids = stringList(params.pmids, 'pmids');
      ctx.view.selected = pmids;
      ctx.onSelection?.(pmids);
      return;
    }
    case 'pin_papers': {
      const pmids = stringList(params.pmids, 'pmids');
      const pinned = new Set(ctx.view.pinned);
      for (const p of pmids) {
        if (!pinned.has(p)) {
          pinned.add(p);
          ctx.view.pinned.push(p);
        }
      }
      return;
    }
    case 'set_year_filter': {
      const range = params.year_range;
      if (!Array.isArray(range) || range.length !== 2) {
        throw new ActionParameterError('year_range must be a [min, max] pair');
      }
      const lo = Number(range[0]);
      const hi = Number(range[1]);
      if (!Number.isInteger(lo) || !Number.isInteger(hi) || lo > hi) {
        throw new ActionParameterError(`year_range [${range}] is not an ordered integer pair`);
      }
      ctx.view.yearRange = [lo, hi];
      // Recompute off the critical path; the mask swaps in when finished.
      await ctx.yearFilter.apply([lo, hi]);
      return;
    }
    case 'annotate': {
      const { x, y, text } = params as { x?: unknown; y?: unknown; text?: unknown };
      if (typeof x !== 'number' || typeof y !== 'number' || typeof text !== 'string') {
        throw new ActionParameterError('annotate needs numeric x, y and string text');
      }
      ctx.annotations.push({ x, y, text });
      return;
    }
    case 'fly_to': {
      const { x, y, zoom } = params as { x?: unknown; y?: unknown; zoom?: unknown };
      if (typeof x !== 'number' || typeof y !== 'number' || typeof zoom !== 'number' || !(zoom > 0)) {
        throw new ActionParameterError('fly_to needs numeric x, y and zoom > 0');
      }
      ctx.view.camera = { x, y, zoom };
      ctx.onCamera?.(ctx.view.camera);
      return;
    }
    default:
      throw new ActionParameterError(`unknown action type ${JSON.stringify(action.action_type)}`);
  }
}

function intList(value: unknown, field: string): number[] {
  if (!Array.isArray(value) || value.length === 0) {
    throw new ActionParameterError(`${field} must be a non-empty list`);
  }
  return value.map((v) => {
    const n = Number(v);
    if (!Number.isInteger(n)) {
      throw new ActionParameterError(`${field} entries must be integers`);
    }
    return n;
  });
}

function stringList(value: unknown, field: string): string[] {
  if (!Array.isArray(value) || value.length === 0) {
    throw new ActionParameterError(`${field} must be a non-empty list`);
  }
  return value.map((v) => String(v));
}
