/** Rendering helpers. Every score element carries its raw response value in a
 * data-score attribute, so rendered numbers are traceable to response fields. */

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

export function scoreSpan(value: number, label?: string): string {
  const display = value.toFixed(4);
  const prefix = label ? `${escapeHtml(label)} ` : "";
  return `<span class="score" data-score="${String(value)}">${prefix}${display}</span>`;
}

export function formatSeconds(seconds: number | null): string {
  if (seconds === null || seconds === undefined) {
    return "--:--";
  }
  const whole = Math.floor(seconds);
  const minutes = Math.floor(whole / 60);
  const rest = whole % 60;
  return `${String(minutes).padStart(2, "0")}:${String(rest).padStart(2, "0")}.${Math.round((seconds - whole) * 10)}`;
}

export function highlightText(text: string, highlights: [number, number][]): string {
  if (!highlights.length) {
    return escapeHtml(text);
  }
  const parts: string[] = [];
  let cursor = 0;
  for (const [start, end] of highlights) {
    parts.push(escapeHtml(text.slice(cursor, start)));
    parts.push(`<mark>${escapeHtml(text.slice(start, end))}</mark>`);
    cursor = end;
  }
  parts.push(escapeHtml(text.slice(cursor)));
  return parts.join("");
}

/** All raw score values embedded in a rendered HTML string. */
export function extractScores(html: string): number[] {
  const out: number[] = [];
  const pattern = /data-score="([^"]+)"/g;
  let match: RegExpExecArray | null;
  while ((match = pattern.exec(html)) !== null) {
    out.push(Number(match[1]));
  }
  return out;
}
