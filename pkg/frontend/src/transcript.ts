/**
 * Chat pane: user bubbles, ephemeral status lines, live token text,
 * and final rendered blocks with click-to-navigate affordances.
 */

import { ApiClient, RenderedBlock, SourceAnchor, StreamEvent } from "./api";

export const CLICK_TOOLTIP = "Click to view the source in the document";

export type AnchorHandler = (anchor: SourceAnchor) => void;

export class Transcript {
  private streamedText = "";

  constructor(
    private container: HTMLElement,
    private api: ApiClient,
    private onAnchorClick: AnchorHandler,
  ) {}

  addUserMessage(text: string): void {
    const el = document.createElement("div");
    el.className = "msg user";
    el.textContent = text;
    this.container.appendChild(el);
    this.scrollToEnd();
  }

  addNotice(text: string): void {
    const el = document.createElement("div");
    el.className = "msg notice";
    el.textContent = text;
    this.container.appendChild(el);
    this.scrollToEnd();
  }

  /** Begin an assistant turn; feed the returned sink every stream event. */
  beginAssistantTurn(): (event: StreamEvent) => void {
    const wrap = document.createElement("div");
    wrap.className = "msg assistant";
    const status = document.createElement("div");
    status.className = "status-bubble";
    const body = document.createElement("div");
    body.className = "assistant-body";
    wrap.append(status, body);
    this.container.appendChild(wrap);
    this.streamedText = "";
    let streamEl: HTMLElement | null = null;

    return (event: StreamEvent) => {
      switch (event.type) {
        case "status":
          status.textContent = event.text;
          status.classList.add("visible");
          break;
        case "token":
          if (!streamEl) {
            streamEl = document.createElement("div");
            streamEl.className = "streaming-text";
            body.appendChild(streamEl);
          }
          this.streamedText += event.text;
          streamEl.textContent = this.streamedText;
          break;
        case "block":
          if (streamEl) {
            // Final blocks replace the provisional streamed text.
            streamEl.remove();
            streamEl = null;
          }
          body.appendChild(this.renderBlock(event.block));
          break;
        case "anchors":
          break; // anchors already ride on the blocks
        case "done":
          status.classList.remove("visible");
          status.textContent = "";
          wrap.dataset.turnId = event.turn_id;
          break;
        case "error":
          status.classList.remove("visible");
          this.renderError(body, event.message);
          break;
      }
      this.scrollToEnd();
    };
  }

  get lastStreamedText(): string {
    return this.streamedText;
  }

  private renderBlock(block: RenderedBlock): HTMLElement {
    if (block.kind === "figure") {
      const figure = document.createElement("figure");
      figure.className = "block figure clickable";
      const img = document.createElement("img");
      img.src = this.api.figureUrl(block.figure_id ?? "");
      img.alt = block.caption ?? "";
      const cap = document.createElement("figcaption");
      cap.textContent = block.caption ?? "";
      figure.append(img, cap);
      this.makeClickable(figure, block.anchor);
      return figure;
    }
    const p = document.createElement("p");
    p.className = "block paragraph" + (block.flagged ? " flagged" : "");
    p.textContent = block.text;
    if (block.anchor) {
      p.classList.add("clickable");
      this.makeClickable(p, block.anchor);
    }
    return p;
  }

  private makeClickable(el: HTMLElement, anchor: SourceAnchor | null): void {
    if (!anchor) return;
    el.title = CLICK_TOOLTIP;
    el.addEventListener("click", () => this.onAnchorClick(anchor));
  }

  private renderError(body: HTMLElement, message: string): void {
    const el = document.createElement("div");
    el.className = "error-bubble";
    el.textContent = `Something went wrong: ${message}`;
    body.appendChild(el);
  }

  private scrollToEnd(): void {
    this.container.scrollTop = this.container.scrollHeight;
  }
}
