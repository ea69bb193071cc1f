/** Typed client for the backend REST + SSE contract. */

import { SseParser } from "./sse";

export interface SourceAnchor {
  doc_id: string;
  page_index: number;
  bbox: [number, number, number, number]; // top-down PDF points
  kind: "figure" | "text_snippet";
}

export interface RenderedBlock {
  kind: "paragraph" | "figure";
  text: string;
  figure_id: string | null;
  caption: string | null;
  anchor: SourceAnchor | null;
  map_score: number | null;
  flagged: boolean;
}

export interface DocMeta {
  doc_id: string;
  pages: number;
  page_sizes_pt: [number, number][];
  dpi: number;
}

export interface UiConfig {
  prompt_templates: { summarize: string; eli10: string };
  docs: string[];
  highlight_seconds: number;
}

export type StreamEvent =
  | { type: "status"; seq: number; text: string }
  | { type: "token"; seq: number; text: string }
  | { type: "block"; seq: number; block_index: number; block: RenderedBlock }
  | { type: "anchors"; seq: number; anchors: { block_index: number; anchor: SourceAnchor }[] }
  | { type: "done"; seq: number; turn_id: string; flags: string[] }
  | { type: "error"; seq: number; message: string };

export class TurnInProgressError extends Error {
  constructor() {
    super("a response is already in progress");
  }
}

export class ApiClient {
  constructor(private baseUrl: string = "") {}

  private url(path: string): string {
    return this.baseUrl + path;
  }

  async config(): Promise<UiConfig> {
    const resp = await fetch(this.url("/api/config"));
    if (!resp.ok) throw new Error(`config fetch failed: ${resp.status}`);
    return resp.json();
  }

  async docMeta(docId: string): Promise<DocMeta> {
    const resp = await fetch(this.url(`/api/docs/${encodeURIComponent(docId)}/meta`));
    if (!resp.ok) throw new Error(`meta fetch failed: ${resp.status}`);
    return resp.json();
  }

  async createSession(docId: string): Promise<string> {
    const resp = await fetch(this.url("/api/sessions"), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ doc_id: docId }),
    });
    if (!resp.ok) throw new Error(`session create failed: ${resp.status}`);
    const body = await resp.json();
    return body.session_id;
  }

  async anchor(recordId: string): Promise<SourceAnchor> {
    const resp = await fetch(this.url(`/api/anchors/${encodeURIComponent(recordId)}`));
    if (!resp.ok) throw new Error(`anchor fetch failed: ${resp.status}`);
    return resp.json();
  }

  pageUrl(docId: string, pageIndex: number): string {
    return this.url(`/api/docs/${encodeURIComponent(docId)}/pages/${pageIndex}`);
  }

  figureUrl(figureId: string): string {
    return this.url(`/api/figures/${encodeURIComponent(figureId)}`);
  }

  /**
   * POST the message and forward each SSE record to onEvent as it
   * arrives. Resolves when the stream closes; rejects with
   * TurnInProgressError on a 409.
   */
  async sendMessage(
    sessionId: string,
    text: string,
    onEvent: (event: StreamEvent) => void,
  ): Promise<void> {
    const resp = await fetch(this.url(`/api/sessions/${encodeURIComponent(sessionId)}/messages`), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ text }),
    });
    if (resp.status === 409) throw new TurnInProgressError();
    if (!resp.ok || resp.body === null) throw new Error(`message failed: ${resp.status}`);
    const parser = new SseParser();
    const reader = resp.body.getReader();
    const decoder = new TextDecoder();
    for (;;) {
      const { done, value } = await reader.read();
      const chunk = value ? decoder.decode(value, { stream: !done }) : "";
      for (const record of parser.push(chunk, done)) {
        onEvent({ type: record.event, ...record.data } as StreamEvent);
      }
      if (done) break;
    }
  }
}
