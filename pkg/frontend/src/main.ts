/** Browser bootstrap: wires the DOM to the session state and render modules. */

import { renderI2iControls, renderI2iError, renderI2iInterpretation, validateI2iParams } from "./i2iPanel.js";
import { renderPlanPanel } from "./planPanel.js";
import { renderResultsGrid, renderTemporalResults } from "./resultsGrid.js";
import { MODES, Mode, SessionState } from "./state.js";
import { ApiError, I2IResponse, SearchResponse, TemporalResponse, Weights } from "./types.js";

const state = new SessionState();

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

function readWeights(): Weights | null {
  const names = ["semantic", "asr", "ocr", "object"] as const;
  const values = names.map((name) => Number((el<HTMLInputElement>(`weight-${name}`)).value));
  if (values.every((v) => v === 0) || values.some((v) => Number.isNaN(v) || v < 0)) {
    return null;
  }
  return { semantic: values[0], asr: values[1], ocr: values[2], object: values[3] };
}

function readLists(): void {
  state.include = el<HTMLInputElement>("include").value.split(",").map((s) => s.trim()).filter(Boolean);
  state.exclude = el<HTMLInputElement>("exclude").value.split(",").map((s) => s.trim()).filter(Boolean);
}

function renderResponse(payload: unknown): void {
  const plan = el("plan-panel");
  const results = el("results");
  const error = payload as ApiError;
  if (error && typeof error.error === "string") {
    plan.innerHTML = "";
    results.innerHTML = renderI2iError(error);
    return;
  }
  if (state.mode === "temporal") {
    plan.innerHTML = "";
    results.innerHTML = renderTemporalResults(payload as TemporalResponse);
    return;
  }
  if (state.mode === "i2i") {
    plan.innerHTML = renderI2iInterpretation(payload as I2IResponse);
    results.innerHTML = renderResultsGrid(payload as unknown as SearchResponse);
    return;
  }
  const response = payload as SearchResponse;
  plan.innerHTML = renderPlanPanel(response);
  results.innerHTML = renderResultsGrid(response);
}

async function submit(): Promise<void> {
  state.query = el<HTMLInputElement>("query").value;
  state.k = Number(el<HTMLInputElement>("k").value) || 20;
  state.setWeights(readWeights());
  state.translate = el<HTMLInputElement>("translate").checked;
  readLists();
  if (state.mode === "temporal") {
    state.temporalQueries = state.query.split("|").map((s) => s.trim()).filter(Boolean);
  }
  if (state.mode === "i2i") {
    const params = {
      per_reference_top_k: Number(el<HTMLInputElement>("per_reference_top_k").value),
      max_landmarks: Number(el<HTMLInputElement>("max_landmarks").value),
      images_per_landmark: Number(el<HTMLInputElement>("images_per_landmark").value),
    };
    const problems = validateI2iParams(params);
    const box = el("i2i-errors");
    box.textContent = problems.join("; ");
    if (problems.length) {
      return;
    }
    state.setI2iParams(params);
  }
  el("status").textContent = "searching…";
  try {
    const payload = await state.submit();
    renderResponse(payload);
    el("status").textContent = "";
  } catch (err) {
    if ((err as Error).name !== "AbortError") {
      el("status").textContent = String(err);
    }
  }
}

function switchMode(mode: Mode): void {
  state.setMode(mode);
  el("i2i-box").innerHTML = mode === "i2i" ? renderI2iControls(state.i2iParams) + '<div id="i2i-errors" class="error-inline"></div>' : "";
  el<HTMLInputElement>("query").placeholder =
    mode === "temporal" ? "step one | step two | step three" : "describe the scene…";
}

export function boot(): void {
  const select = el<HTMLSelectElement>("mode");
  for (const mode of MODES) {
    const option = document.createElement("option");
    option.value = mode;
    option.textContent = mode;
    select.appendChild(option);
  }
  select.addEventListener("change", () => switchMode(select.value as Mode));
  el<HTMLFormElement>("search-form").addEventListener("submit", (event) => {
    event.preventDefault();
    void submit();
  });
  el("results").addEventListener("click", (event) => {
    const card = (event.target as HTMLElement).closest<HTMLElement>(".card");
    if (card?.dataset.frameUrl) {
      void fetch(card.dataset.frameUrl)
        .then((r) => r.json())
        .then((info) => {
          el("status").textContent = `${info.key} @ ${info.seconds.toFixed(2)}s (fps ${info.fps})`;
        });
    }
  });
  switchMode("semantic");
}

if (typeof document !== "undefined") {
  boot();
}
