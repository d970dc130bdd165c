/**
 * Pure HTML/SVG string builders. Nothing here touches the DOM or the
 * network, so every view is unit-testable as a plain function of its data.
 *
 * Colors are the server's ColorBucket names used verbatim as class names and
 * looked up in a fixed presentation palette; the UI never rescores elements
 * to pick a bucket.
 */

import type { Candidate, Decision, Distribution, GraphMatch, KnnHit } from "./api.js";
import type { Iteration } from "./model.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

/** "848250" -> "8482.50" for display; unknown shapes pass through. */
export function formatCode(code: string): string {
  return /^\d{6}$/.test(code) ? `${code.slice(0, 4)}.${code.slice(4)}` : code;
}

const BUCKET_FILL: Record<string, string> = {
  Green: "#2e7d32",
  LightGreen: "#9ccc65",
  Yellow: "#fdd835",
  Blue: "#64b5f6",
};

function bucketFill(color: string): string {
  return BUCKET_FILL[color] ?? "#bdbdbd";
}

export function renderProbabilityBars(title: string, dist: Distribution): string {
  const entries = Object.entries(dist.probs).sort((a, b) => b[1] - a[1] || (a[0] < b[0] ? -1 : 1));
  const rows = entries
    .map(([label, p]) => {
      const pct = (p * 100).toFixed(1);
      const chosen = label === dist.chosen ? " chosen" : "";
      return (
        `<div class="prob-row${chosen}" data-label="${escapeHtml(label)}">` +
        `<span class="prob-label">${escapeHtml(label)}</span>` +
        `<span class="prob-bar"><span class="prob-fill" style="width:${pct}%"></span></span>` +
        `<span class="prob-pct">${pct}%</span>` +
        `</div>`
      );
    })
    .join("");
  return `<section class="probs"><h3>${escapeHtml(title)}</h3>${rows}</section>`;
}

/**
 * One knowledge graph as a compact SVG strip: node elements as circles,
 * edge elements as connecting bars, each filled with its server bucket.
 */
export function renderGraphPanel(match: GraphMatch): string {
  const nodes = match.elements.filter((el) => el.id.startsWith("n"));
  const edges = match.elements.filter((el) => !el.id.startsWith("n"));
  const step = 64;
  const width = Math.max(nodes.length, 1) * step + 16;

  const nodeShapes = nodes
    .map((el, i) => {
      const cx = 40 + i * step;
      return (
        `<circle class="kg-el bucket-${escapeHtml(el.color)}" cx="${cx}" cy="28" r="13" ` +
        `fill="${bucketFill(el.color)}" data-id="${escapeHtml(el.id)}">` +
        `<title>${escapeHtml(el.id)} similarity ${el.similarity.toFixed(3)}</title></circle>`
      );
    })
    .join("");
  const edgeShapes = edges
    .map((el, i) => {
      const x = 40 + (i % Math.max(nodes.length, 1)) * step;
      return (
        `<rect class="kg-el bucket-${escapeHtml(el.color)}" x="${x}" y="52" width="${step - 16}" height="8" rx="3" ` +
        `fill="${bucketFill(el.color)}" data-id="${escapeHtml(el.id)}">` +
        `<title>${escapeHtml(el.id)} similarity ${el.similarity.toFixed(3)}</title></rect>`
      );
    })
    .join("");

  return (
    `<figure class="kg-panel" data-code="${escapeHtml(match.code)}">` +
    `<figcaption>${escapeHtml(formatCode(match.code))}` +
    `<span class="kg-avg">avg ${match.average_similarity.toFixed(3)}</span></figcaption>` +
    `<svg viewBox="0 0 ${width} 68" width="${width}" height="68" role="img">` +
    `${nodeShapes}${edgeShapes}</svg></figure>`
  );
}

export function renderCandidateCard(
  candidate: Candidate,
  match: GraphMatch | undefined,
  selected: boolean,
): string {
  const classes = selected ? "candidate selected" : "candidate";
  return (
    `<article class="${classes}" data-rank="${candidate.rank}" data-code="${escapeHtml(candidate.code)}">` +
    `<header><span class="rank">#${candidate.rank}</span>` +
    `<span class="code">${escapeHtml(formatCode(candidate.code))}</span>` +
    `<span class="source">${escapeHtml(candidate.source)}</span>` +
    `<span class="score">${candidate.score.toFixed(4)}</span></header>` +
    (match ? renderGraphPanel(match) : "") +
    `</article>`
  );
}

export function renderKnnList(hits: KnnHit[]): string {
  if (hits.length === 0) {
    return "";
  }
  const rows = hits
    .map(
      (hit) =>
        `<li><span class="code">${escapeHtml(formatCode(hit.code))}</span> ` +
        `<span class="sim">${hit.similarity.toFixed(3)}</span> ` +
        `<span class="text">${escapeHtml(hit.text)}</span></li>`,
    )
    .join("");
  return `<section class="knn"><h3>Nearest training descriptions</h3><ul>${rows}</ul></section>`;
}

export function renderDecisions(decisions: Decision[]): string {
  if (decisions.length === 0) {
    return "";
  }
  const rows = decisions
    .map((d) => {
      const code = d.code ? ` ${escapeHtml(formatCode(d.code))}` : "";
      return `<li class="decision ${escapeHtml(d.action)}">${escapeHtml(d.action)}${code} <time>${escapeHtml(d.recorded_at)}</time></li>`;
    })
    .join("");
  return `<section class="decisions"><h3>Decisions</h3><ul>${rows}</ul></section>`;
}

export function renderErrorBanner(code: string, detail: string): string {
  return `<div class="banner error" role="alert"><strong>${escapeHtml(code)}</strong> ${escapeHtml(detail)}</div>`;
}

export function renderIterationColumn(iteration: Iteration, index: number, selectedRank: number | null): string {
  const byCode = new Map(iteration.trail.kg.map((m) => [m.code, m]));
  const cards = iteration.candidates
    .map((c) => renderCandidateCard(c, byCode.get(c.code), selectedRank === c.rank))
    .join("");
  return (
    `<section class="iteration" data-iteration="${index}" data-audit-id="${escapeHtml(iteration.auditId)}">` +
    `<h2>Run ${index + 1}: ${escapeHtml(iteration.input.description)}</h2>` +
    `<p class="cleaned">cleaned: ${escapeHtml(iteration.trail.cleaned_text)}</p>` +
    renderProbabilityBars("Chapter", iteration.trail.hs2) +
    renderProbabilityBars("Heading", iteration.trail.hs4) +
    `<div class="candidates">${cards}</div>` +
    renderKnnList(iteration.trail.knn) +
    renderDecisions(iteration.decisions) +
    `</section>`
  );
}

export interface ViewState {
  input: string;
  weight: string;
  value: string;
  busy: boolean;
  error: { code: string; detail: string } | null;
  notice: string | null;
  overrideCode: string;
  overrideError: string | null;
  iterations: Iteration[];
  selectedRank: number | null;
}

export function initialViewState(): ViewState {
  return {
    input: "",
    weight: "",
    value: "",
    busy: false,
    error: null,
    notice: null,
    overrideCode: "",
    overrideError: null,
    iterations: [],
    selectedRank: null,
  };
}

export function renderApp(state: ViewState): string {
  const submitDisabled = state.busy || state.input.trim().length === 0;
  const columns = state.iterations
    .map((it, i) => renderIterationColumn(it, i, i === state.iterations.length - 1 ? state.selectedRank : null))
    .join("");
  const decisionBox =
    state.iterations.length === 0
      ? ""
      : `<div class="decision-box">` +
        `<button id="accept" type="button"${state.busy ? " disabled" : ""}>Accept top candidate</button>` +
        `<input id="override-code" placeholder="override code e.g. 8482.50" value="${escapeHtml(state.overrideCode)}">` +
        `<button id="override" type="button"${state.busy ? " disabled" : ""}>Override</button>` +
        (state.overrideError ? `<span class="inline-error">${escapeHtml(state.overrideError)}</span>` : "") +
        `</div>`;
  return (
    `<form id="classify-form">` +
    `<input id="description" placeholder="goods description" value="${escapeHtml(state.input)}" autocomplete="off">` +
    `<input id="weight" placeholder="weight (kg)" value="${escapeHtml(state.weight)}" size="10">` +
    `<input id="value" placeholder="value" value="${escapeHtml(state.value)}" size="10">` +
    `<button id="submit" type="submit"${submitDisabled ? " disabled" : ""}>Classify</button>` +
    `</form>` +
    (state.error ? renderErrorBanner(state.error.code, state.error.detail) : "") +
    (state.notice ? `<div class="banner notice">${escapeHtml(state.notice)}</div>` : "") +
    decisionBox +
    `<div class="history">${columns}</div>`
  );
}
