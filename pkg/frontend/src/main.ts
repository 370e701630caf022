/**
 * Browser entry point: loads the first dataset from the server, wires the
 * renderer, hover card, lasso selection, year filter, and agent panel
 * together, and keeps the DOM overlays (labels, annotations) in sync with
 * the camera.
 */

import { ApiClient } from './api.js';
import { applyActions, type ActionContext, type Annotation } from './actions.js';
import { submitQuestion } from './agentPanel.js';
import { fitBounds, panned, screenToWorld, worldToScreen, zoomedAbout, type Viewport } from './camera.js';
import { ClusterStateTable } from './clusterTable.js';
import { hoverPick } from './hover.js';
import { commitLasso, LassoGesture } from './lasso.js';
import type { LoadedDataset } from './points.js';
import { MapRenderer } from './render.js';
import type { ClusterNode, TopicLabel, ViewState } from './types.js';
import { createViewState } from './viewstate.js';
import { YearFilterController } from './yearFilter.js';

type Overlay = { el: HTMLDivElement; wx: number; wy: number };

function el<K extends keyof HTMLElementTagNameMap>(tag: K, className?: string): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  return node;
}

function must<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id} in index.html`);
  return node as T;
}

async function boot(): Promise<void> {
  const api = new ApiClient('');
  const canvas = must<HTMLCanvasElement>('map');
  const overlayRoot = must<HTMLDivElement>('overlays');
  const hoverCard = must<HTMLDivElement>('hover-card');
  const notice = must<HTMLDivElement>('notice');

  const infos = await api.datasets();
  const requested = new URLSearchParams(location.search).get('dataset');
  const info = infos.find((d) => d.id === requested) ?? infos[0];
  if (!info) {
    notice.textContent = 'No datasets are loaded on the server.';
    return;
  }

  let dataset: LoadedDataset;
  try {
    dataset = await api.loadDataset(info.id);
  } catch (err) {
    notice.textContent = `Failed to load dataset ${info.id}: ${(err as Error).message}`;
    return;
  }
  if (dataset.block.n === 0) {
    notice.textContent = `Dataset ${info.id} is empty.`;
    // Fall through: an empty canvas with the notice is the correct render.
  }

  const [clusterTree, labelsDoc, edgesDoc] = await Promise.all([
    api.clusters(dataset.id),
    api.labels(dataset.id),
    api.edges(dataset.id),
  ]);

  const viewport: Viewport = { width: canvas.clientWidth, height: canvas.clientHeight };
  const resize = (): void => {
    viewport.width = canvas.clientWidth;
    viewport.height = canvas.clientHeight;
    canvas.width = Math.round(viewport.width * devicePixelRatio);
    canvas.height = Math.round(viewport.height * devicePixelRatio);
    dirty = true;
  };

  const view: ViewState = createViewState();
  if (dataset.block.n > 0) {
    const b = dataset.tree.bounds;
    view.camera = fitBounds(b[0], b[1], b[2], b[3], viewport);
  }

  const table = new ClusterStateTable(dataset.clusterIds);
  const renderer = new MapRenderer(canvas, dataset.block, table);
  renderer.setEdges(edgesDoc.edges);

  const annotations: Annotation[] = [];
  const annotationOverlays: Overlay[] = [];
  const yearFilter = new YearFilterController(dataset.block.years, (result) => {
    renderer.setVisibility(result.mask);
    dirty = true;
  });
  const ctx: ActionContext = {
    view,
    table,
    yearFilter,
    annotations,
    onCamera: () => {
      dirty = true;
    },
    onSelection: () => {
      dirty = true;
    },
  };

  // --- cluster labels: coarsest level (the root nodes), at member centroids ---
  const labelText = new Map<number, string>(labelsDoc.labels.map((l: TopicLabel) => [l.cluster_id, l.label]));
  const labelOverlays: Overlay[] = [];
  const coarse = clusterTree.nodes.filter((nd: ClusterNode) => nd.parent_id === null);
  for (const node of coarse) {
    const text = labelText.get(node.cluster_id) ?? node.label;
    if (!text) continue;
    let sx = 0;
    let sy = 0;
    let count = 0;
    for (const pmid of node.member_pmids) {
      const rec = dataset.byPmid.get(pmid);
      if (rec) {
        sx += rec.x;
        sy += rec.y;
        count += 1;
      }
    }
    if (count === 0) continue;
    const div = el('div', 'map-label');
    div.textContent = text;
    overlayRoot.appendChild(div);
    labelOverlays.push({ el: div, wx: sx / count, wy: sy / count });
  }

  const positionOverlays = (): void => {
    for (const group of [labelOverlays, annotationOverlays]) {
      for (const o of group) {
        const [sx, sy] = worldToScreen(view.camera, o.wx, o.wy, viewport);
        o.el.style.transform = `translate(${sx.toFixed(1)}px, ${sy.toFixed(1)}px)`;
        o.el.style.display = sx < -200 || sx > viewport.width + 200 || sy < -50 || sy > viewport.height + 50 ? 'none' : '';
      }
    }
  };

  const syncAnnotations = (): void => {
    while (annotationOverlays.length < annotations.length) {
      const a = annotations[annotationOverlays.length];
      const div = el('div', 'map-annotation');
      div.textContent = a.text;
      overlayRoot.appendChild(div);
      annotationOverlays.push({ el: div, wx: a.x, wy: a.y });
    }
  };

  // --- render loop: draw only when something changed -----------------------
  let dirty = true;
  const frame = (): void => {
    if (dirty) {
      dirty = false;
      renderer.syncClusterTexture();
      renderer.draw(view.camera);
      syncAnnotations();
      positionOverlays();
    }
    requestAnimationFrame(frame);
  };
  window.addEventListener('resize', resize);
  resize();
  requestAnimationFrame(frame);

  // --- pointer interaction: drag pans, wheel zooms, shift-drag lassos ------
  const lasso = new LassoGesture();
  let dragging = false;
  let lastX = 0;
  let lastY = 0;

  canvas.addEventListener('pointerdown', (ev) => {
    canvas.setPointerCapture(ev.pointerId);
    dragging = true;
    lastX = ev.offsetX;
    lastY = ev.offsetY;
    if (ev.shiftKey) {
      const [wx, wy] = screenToWorld(view.camera, ev.offsetX, ev.offsetY, viewport);
      lasso.begin(wx, wy);
    }
  });

  canvas.addEventListener('pointermove', (ev) => {
    if (dragging && lasso.isActive) {
      const step = Math.hypot(ev.offsetX - lastX, ev.offsetY - lastY);
      const [wx, wy] = screenToWorld(view.camera, ev.offsetX, ev.offsetY, viewport);
      lasso.extend(wx, wy, step);
      if (step >= 2) {
        lastX = ev.offsetX;
        lastY = ev.offsetY;
      }
      view.pendingPolygon = lasso.polygon;
      return;
    }
    if (dragging) {
      view.camera = panned(view.camera, ev.offsetX - lastX, ev.offsetY - lastY);
      lastX = ev.offsetX;
      lastY = ev.offsetY;
      dirty = true;
      return;
    }
    const hit = dataset.block.n > 0 ? hoverPick(dataset.tree, view.camera, ev.offsetX, ev.offsetY, viewport) : null;
    if (hit) {
      const rec = dataset.byPmid.get(hit.pmid);
      if (rec) {
        hoverCard.style.display = 'block';
        hoverCard.style.left = `${ev.offsetX + 14}px`;
        hoverCard.style.top = `${ev.offsetY + 14}px`;
        hoverCard.innerHTML = '';
        const title = el('div', 'hover-title');
        title.textContent = rec.title || rec.pmid;
        const meta = el('div', 'hover-meta');
        meta.textContent = `${rec.journal}${rec.year !== null ? ` · ${rec.year}` : ''} · ${rec.citationCount} citations`;
        hoverCard.append(title, meta);
      }
    } else {
      hoverCard.style.display = 'none';
    }
  });

  canvas.addEventListener('pointerup', (ev) => {
    dragging = false;
    canvas.releasePointerCapture(ev.pointerId);
    if (lasso.isActive) {
      void commitLasso(api, dataset.id, view, lasso).then((pmids) => {
        if (pmids !== null) {
          selectionSummary.textContent = `${pmids.length} selected`;
          dirty = true;
        }
      });
    }
  });

  canvas.addEventListener('wheel', (ev) => {
    ev.preventDefault();
    const factor = Math.exp(-ev.deltaY * 0.0015);
    view.camera = zoomedAbout(view.camera, factor, ev.offsetX, ev.offsetY, viewport);
    dirty = true;
  });

  // --- year filter controls -------------------------------------------------
  const yearMin = must<HTMLInputElement>('year-min');
  const yearMax = must<HTMLInputElement>('year-max');
  const yearApply = must<HTMLButtonElement>('year-apply');
  const yearClear = must<HTMLButtonElement>('year-clear');
  yearApply.addEventListener('click', () => {
    const lo = parseInt(yearMin.value, 10);
    const hi = parseInt(yearMax.value, 10);
    if (!Number.isInteger(lo) || !Number.isInteger(hi) || lo > hi) return;
    view.yearRange = [lo, hi];
    void yearFilter.apply(view.yearRange);
  });
  yearClear.addEventListener('click', () => {
    view.yearRange = null;
    void yearFilter.apply(null);
  });

  // --- edges toggle ---------------------------------------------------------
  const edgeToggle = must<HTMLInputElement>('edges-toggle');
  edgeToggle.checked = renderer.showEdges;
  edgeToggle.addEventListener('change', () => {
    renderer.showEdges = edgeToggle.checked;
    dirty = true;
  });

  // --- agent panel -----------------------------------------------------------
  const question = must<HTMLTextAreaElement>('agent-question');
  const ask = must<HTMLButtonElement>('agent-ask');
  const answer = must<HTMLDivElement>('agent-answer');
  const selectionSummary = must<HTMLDivElement>('selection-summary');
  const syncAskDisabled = (): void => {
    ask.disabled = question.value.trim() === '';
  };
  question.addEventListener('input', syncAskDisabled);
  syncAskDisabled();

  ask.addEventListener('click', async () => {
    ask.disabled = true;
    answer.textContent = '…';
    const outcome = await submitQuestion(api, dataset.id, ctx, question.value);
    syncAskDisabled();
    if (outcome.kind === 'empty') {
      answer.textContent = '';
      return;
    }
    if (outcome.kind === 'error') {
      answer.textContent = `Request failed${outcome.status !== null ? ` (${outcome.status})` : ''}: ${outcome.detail}`;
      return;
    }
    answer.innerHTML = '';
    const text = el('div', 'agent-text');
    text.textContent = outcome.response.text;
    answer.appendChild(text);
    if (outcome.response.provenance.length > 0) {
      const sources = el('ul', 'agent-sources');
      for (const p of outcome.response.provenance) {
        const li = el('li');
        li.textContent = `[${p.pmid}] ${p.snippet}`;
        sources.appendChild(li);
      }
      answer.appendChild(sources);
    }
    dirty = true;
  });

  // Apply nothing initially; the table starts all-normal.
  void applyActions(ctx, []);
}

boot().catch((err) => {
  const notice = document.getElementById('notice');
  if (notice) notice.textContent = `Startup failed: ${err.message}`;
  console.error(err);
});
