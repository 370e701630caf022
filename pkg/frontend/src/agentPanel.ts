/**
 * Agent panel plumbing: build the context payload that accompanies a
 * question, post it, and apply whatever actions come back.  Rendering is
 * left to the caller; this module owns the wire contract.
 */

import type { AgentResponse, ContextPayload, SelectionPayload, ViewState } from './types.js';
import { ApiClient, ApiError } from './api.js';
import { applyActions, type ActionContext, type ApplyResult } from './actions.js';
import { encodeViewState } from './viewstate.js';

/**
 * Snapshot the view into the selection the agent grounds its answer in:
 * selected pmids, highlighted clusters, the active year filter, and — when a
 * lasso is mid-gesture — the uncommitted polygon.  Empty facets are omitted
 * rather than sent as empty lists so the server treats them as "not
 * constrained" instead of "constrained to nothing".
 */
export function buildContextPayload(datasetId: string, view: ViewState, queryText: string): ContextPayload {
  const selection: SelectionPayload = {};
  if (view.selected.length > 0) {
    selection.pmids = view.selected.slice();
  }
  if (view.highlighted.length > 0) {
    selection.cluster_ids = view.highlighted.slice();
  }
  if (view.yearRange !== null) {
    selection.year_range = [view.yearRange[0], view.yearRange[1]];
  }
  if (view.pendingPolygon.length >= 3) {
    selection.polygon = view.pendingPolygon.map(([x, y]) => [x, y] as [number, number]);
  }
  return {
    dataset_id: datasetId,
    selection,
    query_text: queryText,
    interaction_state: { view: encodeViewState(view) },
  };
}

export type SubmitOutcome =
  | { kind: 'ok'; response: AgentResponse; applied: ApplyResult }
  | { kind: 'empty' }
  | { kind: 'error'; status: number | null; detail: string };

/**
 * Submit a question.  A blank question is a no-op (the submit control should
 * be disabled, but the guard keeps programmatic callers honest).  On success
 * the response's actions apply to the view in order; on failure the view is
 * left exactly as it was and the error surfaces for display.
 */
export async function submitQuestion(
  api: ApiClient,
  datasetId: string,
  ctx: ActionContext,
  queryText: string,
): Promise<SubmitOutcome> {
  const question = queryText.trim();
  if (question === '') {
    return { kind: 'empty' };
  }
  const payload = buildContextPayload(datasetId, ctx.view, question);
  let response: AgentResponse;
  try {
    response = await api.agentQuery(payload);
  } catch (err) {
    if (err instanceof ApiError) {
      return { kind: 'error', status: err.status, detail: describeApiError(err) };
    }
    return { kind: 'error', status: null, detail: (err as Error).message };
  }
  const applied = await applyActions(ctx, response.actions ?? []);
  return { kind: 'ok', response, applied };
}

function describeApiError(err: ApiError): string {
  const body = err.body as { errors?: unknown; detail?: unknown } | null;
  if (body && Array.isArray(body.errors)) {
    return body.errors.map(String).join('; ');
  }
  if (body && typeof body.detail === 'string') {
    return body.detail;
  }
  return err.message;
}
