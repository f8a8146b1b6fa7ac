import { readFileSync } from "node:fs";

export interface Recorded<T> {
  status: number;
  body: T;
}

export function loadFixture<T>(name: string): Recorded<T> {
  const url = new URL(`../../fixtures/${name}`, import.meta.url);
  return JSON.parse(readFileSync(url, "utf-8")) as Recorded<T>;
}

/** Every numeric value reachable in a JSON payload. */
export function allNumbers(value: unknown, out: Set<number> = new Set()): Set<number> {
  if (typeof value === "number") {
    out.add(value);
  } else if (Array.isArray(value)) {
    for (const item of value) {
      allNumbers(item, out);
    }
  } else if (value && typeof value === "object") {
    for (const item of Object.values(value)) {
      allNumbers(item, out);
    }
  }
  return out;
}
