/** Session state: current query, mode, overrides, history, and the single
 * in-flight request (new submissions abort the previous one client-side). */

import { I2IParams, SearchRequestBody, Weights } from "./types.js";
import { validateI2iParams } from "./i2iPanel.js";

export const MODES = ["semantic", "ocr", "asr", "object", "llandmark", "i2i", "temporal"] as const;
export type Mode = (typeof MODES)[number];

export interface HistoryEntry {
  query: string;
  mode: Mode;
}

export type Fetcher = (url: string, init: RequestInit) => Promise<Response>;

export class SessionState {
  query = "";
  mode: Mode = "semantic";
  k = 20;
  weights: Weights | null = null;
  i2iParams: I2IParams = { per_reference_top_k: 50, max_landmarks: 2, images_per_landmark: 3 };
  include: string[] = [];
  exclude: string[] = [];
  translate = false;
  temporalQueries: string[] = [];
  lastResponse: unknown = null;
  history: HistoryEntry[] = [];

  private fetcher: Fetcher;
  private inFlight: AbortController | null = null;

  constructor(fetcher: Fetcher = (url, init) => fetch(url, init)) {
    this.fetcher = fetcher;
  }

  setMode(mode: Mode): void {
    this.mode = mode;
  }

  setWeights(weights: Weights | null): void {
    // Stored as given; the request body carries these exact numbers.
    this.weights = weights ? { ...weights } : null;
  }

  setI2iParams(params: I2IParams): void {
    const problems = validateI2iParams(params);
    if (problems.length) {
      throw new Error(problems.join("; "));
    }
    this.i2iParams = { ...params };
  }

  buildSearchBody(): SearchRequestBody {
    const body: SearchRequestBody = { mode: this.mode, query: this.query, k: this.k };
    if (this.weights) {
      body.weights = { ...this.weights };
    }
    if (this.include.length) {
      body.include = [...this.include];
    }
    if (this.exclude.length) {
      body.exclude = [...this.exclude];
    }
    if (this.translate) {
      body.translate = true;
    }
    if (this.mode === "temporal") {
      body.queries = [...this.temporalQueries];
    }
    return body;
  }

  /** POST the current state; a newer call aborts this one. */
  async submit(): Promise<unknown> {
    if (this.inFlight) {
      this.inFlight.abort();
    }
    const controller = new AbortController();
    this.inFlight = controller;

    const endpoint = this.mode === "i2i" ? "/api/i2i" : "/api/search";
    const body =
      this.mode === "i2i" ? { query: this.query, k: this.k, ...this.i2iParams } : this.buildSearchBody();

    try {
      const response = await this.fetcher(endpoint, {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(body),
        signal: controller.signal,
      });
      const payload = await response.json();
      if (this.inFlight === controller) {
        this.lastResponse = payload;
        this.history.push({ query: this.query, mode: this.mode });
        this.inFlight = null;
      }
      return payload;
    } finally {
      if (this.inFlight === controller) {
        this.inFlight = null;
      }
    }
  }

  get busy(): boolean {
    return this.inFlight !== null;
  }
}
