/** Plan inspection panel: original vs refined query, per-modality weights and
 * sub-queries, detected landmarks, and the synthesized answer. Hidden (empty
 * string) when the response carries no plan. */

import { escapeHtml } from "./format.js";
import { SearchResponse, Weights } from "./types.js";

const MODALITIES: (keyof Weights)[] = ["semantic", "asr", "ocr", "object"];

export function renderPlanPanel(response: SearchResponse): string {
  const plan = response.plan;
  if (!plan) {
    return "";
  }
  const refined = response.refined_query ?? plan.semantic_query;
  const warnings = [...(plan.warnings ?? []), ...(response.warnings ?? [])];

  const weightRows = MODALITIES.map((name) => {
    const value = plan.weights[name];
    return `<tr><th>${name}</th><td><span class="weight" data-modality="${name}" data-weight="${String(value)}">${value}</span></td></tr>`;
  }).join("");

  const subQueries = [
    `<dt>ASR keywords</dt><dd>${plan.asr_keywords.map(escapeHtml).join(", ") || "—"}</dd>`,
    `<dt>OCR keywords</dt><dd>${plan.ocr_keywords.map(escapeHtml).join(", ") || "—"}</dd>`,
    `<dt>Object filter</dt><dd>${
      plan.object_query
        ? `${plan.object_query.mode}(${plan.object_query.labels.map(escapeHtml).join(", ")})`
        : "—"
    }</dd>`,
  ].join("");

  const landmarks = plan.detected_landmarks.length
    ? `<p class="landmarks">Detected landmarks: ${plan.detected_landmarks.map(escapeHtml).join("; ")}</p>`
    : "";

  const warningBadge = warnings.length
    ? `<div class="warning-badge" role="status">⚠ ${warnings.map(escapeHtml).join(" · ")}</div>`
    : "";

  const answer = response.answer
    ? `<section class="answer-panel">
         <h3>Answer</h3>
         <p>${escapeHtml(response.answer.text)}</p>
         <p class="cited">Cited frames: ${response.answer.cited_frames.map(escapeHtml).join(", ") || "none"}</p>
       </section>`
    : "";

  return `<section class="plan-panel">
    <h3>Search plan${plan.used_llm ? " (LLM)" : " (rule path)"}</h3>
    ${warningBadge}
    <p class="original-query">Original: ${escapeHtml(plan.original_query)}</p>
    <p class="refined-query">Refined: <em>${escapeHtml(refined)}</em></p>
    ${landmarks}
    <table class="weights">${weightRows}</table>
    <dl class="sub-queries">${subQueries}</dl>
    ${answer}
  </section>`;
}

/** Structured view of what the panel shows; used by contract tests. */
export function planPanelModel(response: SearchResponse) {
  const plan = response.plan;
  if (!plan) {
    return null;
  }
  return {
    refinedQuery: response.refined_query ?? plan.semantic_query,
    weights: MODALITIES.map((name) => ({ modality: name, value: plan.weights[name] })),
    landmarks: plan.detected_landmarks,
    hasWarnings: (plan.warnings ?? []).length + (response.warnings ?? []).length > 0,
    answerText: response.answer?.text ?? null,
    citedFrames: response.answer?.cited_frames ?? [],
  };
}
