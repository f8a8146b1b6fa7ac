/** Result grid: keyframe cards grouped by video, each card showing scores,
 * timestamp, OCR/ASR snippets, and object labels pulled from the response. */

import { escapeHtml, formatSeconds, highlightText, scoreSpan } from "./format.js";
import {
  FrameRow,
  ScoredFrameRow,
  SearchResponse,
  TemporalResponse,
  TextRow,
  VideoPackage,
} from "./types.js";

function isTextRow(row: FrameRow | TextRow | ScoredFrameRow): row is TextRow {
  return (row as TextRow).doc_id !== undefined;
}

function isScoredFrame(row: FrameRow | TextRow | ScoredFrameRow): row is ScoredFrameRow {
  return (row as ScoredFrameRow).fused !== undefined;
}

function frameCard(row: FrameRow | ScoredFrameRow, thumbnailBase: string | null): string {
  const scores = isScoredFrame(row)
    ? [scoreSpan(row.fused, "fused")]
        .concat(Object.entries(row.per_modality).map(([m, v]) => scoreSpan(v, m)))
        .join(" ")
    : scoreSpan((row as FrameRow).score);
  const thumbnail = thumbnailBase
    ? `<img class="thumb" src="${thumbnailBase}/${encodeURIComponent(row.group_id)}/${encodeURIComponent(
        row.video_id
      )}/${row.frame_id}.jpg" alt="${escapeHtml(row.key)}">`
    : `<div class="thumb placeholder">${escapeHtml(row.key)}</div>`;
  return `<article class="card" data-key="${escapeHtml(row.key)}" data-frame-url="/api/frame/${encodeURIComponent(
    row.group_id
  )}/${encodeURIComponent(row.video_id)}/${row.frame_id}">
    ${thumbnail}
    <div class="meta">
      <span class="key">${escapeHtml(row.key)}</span>
      <span class="time">${formatSeconds(row.seconds)}</span>
      <div class="scores">${scores}</div>
    </div>
  </article>`;
}

function textSnippet(row: TextRow): string {
  const label = row.channel === "asr" ? `ASR ${row.start_frame}–${row.end_frame}` : `OCR @${row.start_frame}`;
  const score = row.score > 0 ? ` ${scoreSpan(row.score)}` : "";
  return `<li class="snippet ${row.channel}">[${label}]${score} ${highlightText(row.text, row.highlights)}</li>`;
}

function videoGroup(pkg: VideoPackage, thumbnailBase: string | null): string {
  const cards = pkg.frames.map((frame) => frameCard(frame, thumbnailBase)).join("");
  const snippets = [...pkg.asr_snippets, ...pkg.ocr_texts].map(textSnippet).join("");
  const objects = pkg.objects
    .map((o) => `<li>${escapeHtml(o.key)}: ${o.labels.map(escapeHtml).join(", ")}</li>`)
    .join("");
  return `<section class="video-group" data-video="${escapeHtml(pkg.group_id)}/${escapeHtml(pkg.video_id)}">
    <h3>${escapeHtml(pkg.group_id)}/${escapeHtml(pkg.video_id)} ${scoreSpan(pkg.best_fused, "best")}</h3>
    <div class="cards">${cards}</div>
    ${snippets ? `<ul class="snippets">${snippets}</ul>` : ""}
    ${objects ? `<ul class="objects">${objects}</ul>` : ""}
  </section>`;
}

export function renderResultsGrid(response: SearchResponse, thumbnailBase: string | null = null): string {
  if (response.videos && response.videos.length) {
    return response.videos.map((pkg) => videoGroup(pkg, thumbnailBase)).join("");
  }
  const rows = response.results ?? [];
  if (!rows.length) {
    return `<p class="empty-state">No results. Adjust the query, mode, or filters.</p>`;
  }
  if (rows.every(isTextRow)) {
    return `<ul class="snippets standalone">${(rows as TextRow[]).map(textSnippet).join("")}</ul>`;
  }
  const groups = new Map<string, (FrameRow | ScoredFrameRow)[]>();
  for (const row of rows as (FrameRow | ScoredFrameRow)[]) {
    const video = `${row.group_id}/${row.video_id}`;
    if (!groups.has(video)) {
      groups.set(video, []);
    }
    groups.get(video)!.push(row);
  }
  const sections: string[] = [];
  for (const [video, members] of groups) {
    const cards = members.map((row) => frameCard(row, thumbnailBase)).join("");
    sections.push(
      `<section class="video-group" data-video="${escapeHtml(video)}"><h3>${escapeHtml(video)}</h3><div class="cards">${cards}</div></section>`
    );
  }
  return sections.join("");
}

export function renderTemporalResults(response: TemporalResponse): string {
  if (!response.results.length) {
    return `<p class="empty-state">No video contains the whole sequence.</p>`;
  }
  const rows = response.results
    .map(
      (row) =>
        `<li data-video="${escapeHtml(row.video_name)}">${escapeHtml(row.group_id)}/${escapeHtml(row.video_id)} ${scoreSpan(row.score)}</li>`
    )
    .join("");
  return `<ol class="temporal-results">${rows}</ol>`;
}

/** Count of video groups the grid renders; contract-test helper. */
export function gridGroupCount(response: SearchResponse): number {
  if (response.videos && response.videos.length) {
    return response.videos.length;
  }
  const rows = (response.results ?? []) as (FrameRow | ScoredFrameRow | TextRow)[];
  const frameRows = rows.filter((r) => !isTextRow(r)) as (FrameRow | ScoredFrameRow)[];
  return new Set(frameRows.map((r) => `${r.group_id}/${r.video_id}`)).size;
}
