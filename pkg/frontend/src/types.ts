/** Response and request shapes of the retrieval API (mirrored, not computed). */

export interface Weights {
  semantic: number;
  asr: number;
  ocr: number;
  object: number;
}

export interface ObjectQueryView {
  labels: string[];
  mode: string;
  min_score: number;
}

export interface Plan {
  original_query: string;
  semantic_query: string;
  asr_keywords: string[];
  ocr_keywords: string[];
  object_query: ObjectQueryView | null;
  weights: Weights;
  detected_landmarks: string[];
  top_k_per_modality: number;
  used_llm: boolean;
  warnings: string[];
}

export interface FrameRow {
  key: string;
  group_id: string;
  video_id: string;
  frame_id: number;
  score: number;
  seconds: number | null;
  matched_count?: number;
}

export interface TextRow {
  doc_id: string;
  group_id: string;
  video_id: string;
  start_frame: number;
  end_frame: number;
  channel: string;
  text: string;
  score: number;
  highlights: [number, number][];
}

export interface ScoredFrameRow {
  key: string;
  group_id: string;
  video_id: string;
  frame_id: number;
  seconds: number | null;
  fused: number;
  per_modality: Record<string, number>;
}

export interface VideoPackage {
  group_id: string;
  video_id: string;
  best_fused: number;
  frames: ScoredFrameRow[];
  asr_snippets: TextRow[];
  ocr_texts: TextRow[];
  objects: { key: string; labels: string[] }[];
}

export interface Answer {
  text: string;
  cited_frames: string[];
  warnings: string[];
}

export interface SearchResponse {
  mode: string;
  query: string;
  k: number;
  results: (FrameRow | TextRow | ScoredFrameRow)[];
  capabilities: Record<string, boolean>;
  timing_ms: number;
  plan?: Plan;
  refined_query?: string;
  enhanced_plan?: Plan;
  per_modality?: Record<string, (FrameRow | TextRow)[]>;
  videos?: VideoPackage[];
  answer?: Answer | null;
  warnings?: string[];
}

export interface TemporalRow {
  group_id: string;
  video_id: string;
  video_name: string;
  score: number;
}

export interface TemporalResponse {
  mode: string;
  queries: string[];
  k_per_step: number;
  results: TemporalRow[];
  capabilities: Record<string, boolean>;
  timing_ms: number;
}

export interface I2IParams {
  per_reference_top_k: number;
  max_landmarks: number;
  images_per_landmark: number;
}

export interface I2IResponse {
  mode: string;
  query: string;
  params: I2IParams;
  image_queries: { landmark: string; queries: string[] }[];
  references: string[];
  results: FrameRow[];
  warnings: string[];
  capabilities: Record<string, boolean>;
  timing_ms: number;
}

export interface ApiError {
  error: string;
  allowed_modes?: string[];
  capabilities?: Record<string, boolean>;
}

export interface SearchRequestBody {
  mode: string;
  query: string;
  k?: number;
  weights?: Weights;
  include?: string[];
  exclude?: string[];
  translate?: boolean;
  queries?: string[];
}

export interface I2IRequestBody extends I2IParams {
  query: string;
  k?: number;
}
