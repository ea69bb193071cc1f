/** Shared test scaffolding: fake clock, fake fetch routes, SSE bodies. */

import { vi } from "vitest";
import type { ViewerClock } from "../src/viewer";

export class FakeClock implements ViewerClock {
  now = 0;
  private timers = new Map<number, { at: number; fn: () => void }>();
  private nextId = 1;

  setTimeout(fn: () => void, ms: number): number {
    const id = this.nextId++;
    this.timers.set(id, { at: this.now + ms, fn });
    return id;
  }

  clearTimeout(id: number): void {
    this.timers.delete(id);
  }

  advance(ms: number): void {
    this.now += ms;
    for (const [id, timer] of [...this.timers]) {
      if (timer.at <= this.now) {
        this.timers.delete(id);
        timer.fn();
      }
    }
  }
}

export function sseBody(records: Array<[string, object]>): string {
  return records
    .map(([event, data], seq) => `event: ${event}\ndata: ${JSON.stringify({ ...data, seq })}\n\n`)
    .join("");
}

export function streamOf(text: string, chunkSize = 17): ReadableStream<Uint8Array> {
  const encoder = new TextEncoder();
  const chunks: Uint8Array[] = [];
  for (let i = 0; i < text.length; i += chunkSize) {
    chunks.push(encoder.encode(text.slice(i, i + chunkSize)));
  }
  return new ReadableStream({
    start(controller) {
      for (const chunk of chunks) controller.enqueue(chunk);
      controller.close();
    },
  });
}

export interface RecordedRequest {
  url: string;
  method: string;
  body: unknown;
}

/** Install a fetch stub with path-prefix routes; returns the request log. */
export function installFetch(
  routes: Record<string, (req: RecordedRequest) => Response | Promise<Response>>,
): RecordedRequest[] {
  const log: RecordedRequest[] = [];
  vi.stubGlobal("fetch", async (input: string | URL, init?: RequestInit) => {
    const url = String(input);
    const req: RecordedRequest = {
      url,
      method: init?.method ?? "GET",
      body: init?.body ? JSON.parse(String(init.body)) : null,
    };
    log.push(req);
    for (const [prefix, handler] of Object.entries(routes)) {
      if (url.startsWith(prefix)) return handler(req);
    }
    return new Response(JSON.stringify({ detail: "not found" }), { status: 404 });
  });
  return log;
}

export function jsonResponse(body: object, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

export const SAMPLE_META = {
  doc_id: "sample",
  pages: 3,
  page_sizes_pt: [
    [612, 792],
    [612, 792],
    [612, 396],
  ],
  dpi: 200,
};

export const SAMPLE_CONFIG = {
  prompt_templates: {
    summarize: 'Summarize the following passage: "{selection}"',
    eli10: 'Explain the following passage like I\'m 10 years old: "{selection}"',
  },
  docs: ["sample"],
  highlight_seconds: 3.0,
};

export function anchorOn(page: number): any {
  return { doc_id: "sample", page_index: page, bbox: [100, 200, 300, 350], kind: "figure" };
}
