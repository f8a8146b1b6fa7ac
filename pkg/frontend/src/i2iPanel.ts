/** Image-to-image mode: the three retrieval knobs plus the interpretation
 * panel (confirmed landmark, generated web queries, reference images). */

import { escapeHtml } from "./format.js";
import { ApiError, I2IParams, I2IResponse } from "./types.js";

export const I2I_FIELDS: (keyof I2IParams)[] = [
  "per_reference_top_k",
  "max_landmarks",
  "images_per_landmark",
];

export const I2I_LABELS: Record<keyof I2IParams, string> = {
  per_reference_top_k: "Per Reference Top-K",
  max_landmarks: "Max Landmarks",
  images_per_landmark: "Images/Landmark",
};

/** Same bounds the server enforces: every parameter is an integer >= 1. */
export function validateI2iParams(params: Partial<I2IParams>): string[] {
  const problems: string[] = [];
  for (const field of I2I_FIELDS) {
    const value = params[field];
    if (value === undefined || !Number.isInteger(value) || value < 1) {
      problems.push(`${I2I_LABELS[field]} must be an integer >= 1`);
    }
  }
  return problems;
}

export function renderI2iControls(params: I2IParams): string {
  const inputs = I2I_FIELDS.map(
    (field) =>
      `<label class="i2i-control">${I2I_LABELS[field]}
        <input type="number" min="1" step="1" id="${field}" name="${field}" value="${params[field]}">
      </label>`
  ).join("");
  return `<fieldset class="i2i-controls"><legend>Image-to-image settings</legend>${inputs}</fieldset>`;
}

export function renderI2iInterpretation(response: I2IResponse): string {
  const landmarks = response.image_queries
    .map(
      (entry) => `<section class="i2i-landmark">
        <h4>${escapeHtml(entry.landmark)}</h4>
        <ul class="generated-queries">${entry.queries.map((q) => `<li>${escapeHtml(q)}</li>`).join("")}</ul>
      </section>`
    )
    .join("");
  const references = response.references
    .map((ref) => `<li class="reference" data-ref="${escapeHtml(ref)}">${escapeHtml(ref)}</li>`)
    .join("");
  const warnings = response.warnings.length
    ? `<div class="warning-badge" role="status">⚠ ${response.warnings.map(escapeHtml).join(" · ")}</div>`
    : "";
  return `<section class="i2i-interpretation">
    ${warnings}
    ${landmarks}
    <ul class="references">${references}</ul>
  </section>`;
}

export function renderI2iError(error: ApiError): string {
  return `<div class="error-state" role="alert">${escapeHtml(error.error)}</div>`;
}

/** Values an on-screen form would submit; contract-test helper. */
export function i2iRequestBody(query: string, params: I2IParams, k?: number) {
  const problems = validateI2iParams(params);
  if (problems.length) {
    throw new Error(problems.join("; "));
  }
  return { query, k, ...params };
}
