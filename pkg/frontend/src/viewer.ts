/**
 * Document pane: stacked page images with scroll-to-anchor highlights.
 *
 * Pages render from the server's page rasters; geometry is computed
 * from the document metadata (never measured from the DOM), so bbox
 * math stays exact at any render width. A highlight is a translucent
 * rectangle over the anchored region that disappears after three
 * seconds; at most one is active at a time.
 */

import { ApiClient, DocMeta, SourceAnchor } from "./api";

const PAGE_GAP_PX = 10;

export const HIGHLIGHT_MS = 3000;

export interface ViewerClock {
  setTimeout(fn: () => void, ms: number): number;
  clearTimeout(id: number): void;
}

const realClock: ViewerClock = {
  setTimeout: (fn, ms) => window.setTimeout(fn, ms),
  clearTimeout: (id) => window.clearTimeout(id),
};

export class DocumentViewer {
  private meta: DocMeta | null = null;
  private pagesHost: HTMLElement;
  private highlightEl: HTMLElement | null = null;
  private highlightTimer: number | null = null;
  readonly widthPx: number;

  constructor(
    private container: HTMLElement,
    private api: ApiClient,
    opts: { widthPx?: number; clock?: ViewerClock } = {},
  ) {
    this.widthPx = opts.widthPx ?? Math.max(container.clientWidth, 400);
    this.clock = opts.clock ?? realClock;
    this.pagesHost = document.createElement("div");
    this.pagesHost.className = "pages";
    this.pagesHost.style.position = "relative";
    this.container.appendChild(this.pagesHost);
  }

  private clock: ViewerClock;

  async load(docId: string): Promise<void> {
    this.meta = await this.api.docMeta(docId);
    this.pagesHost.innerHTML = "";
    this.clearHighlight();
    this.meta.page_sizes_pt.forEach(([, hPt], i) => {
      const img = document.createElement("img");
      img.className = "page";
      img.src = this.api.pageUrl(docId, i);
      img.loading = "lazy";
      img.style.width = `${this.widthPx}px`;
      img.style.height = `${Math.round(hPt * this.pageScale(i))}px`;
      img.style.marginBottom = `${PAGE_GAP_PX}px`;
      img.dataset.pageIndex = String(i);
      this.pagesHost.appendChild(img);
    });
  }

  /** CSS pixels per PDF point for one page. */
  pageScale(pageIndex: number): number {
    if (!this.meta) return 1;
    const [wPt] = this.meta.page_sizes_pt[pageIndex];
    return this.widthPx / wPt;
  }

  /** Vertical offset of a page's top edge inside the scroll container. */
  pageTop(pageIndex: number): number {
    if (!this.meta) return 0;
    let top = 0;
    for (let i = 0; i < pageIndex; i++) {
      const [, hPt] = this.meta.page_sizes_pt[i];
      top += Math.round(hPt * this.pageScale(i)) + PAGE_GAP_PX;
    }
    return top;
  }

  /** Highlight rectangle for an anchor, in container CSS pixels. */
  rectFor(anchor: SourceAnchor): { left: number; top: number; width: number; height: number } {
    const scale = this.pageScale(anchor.page_index);
    const [x0, y0, x1, y1] = anchor.bbox;
    return {
      left: x0 * scale,
      top: this.pageTop(anchor.page_index) + y0 * scale,
      width: (x1 - x0) * scale,
      height: (y1 - y0) * scale,
    };
  }

  /** Scroll so the anchor is in view and flash its highlight. */
  showAnchor(anchor: SourceAnchor): void {
    if (!this.meta) return;
    const rect = this.rectFor(anchor);
    this.container.scrollTop = Math.max(0, rect.top - 40);
    this.clearHighlight();
    const el = document.createElement("div");
    el.className = "highlight";
    el.style.position = "absolute";
    el.style.left = `${rect.left}px`;
    el.style.top = `${rect.top}px`;
    el.style.width = `${rect.width}px`;
    el.style.height = `${rect.height}px`;
    this.pagesHost.appendChild(el);
    this.highlightEl = el;
    this.highlightTimer = this.clock.setTimeout(() => this.clearHighlight(), HIGHLIGHT_MS);
  }

  activeHighlight(): HTMLElement | null {
    return this.highlightEl;
  }

  clearHighlight(): void {
    if (this.highlightTimer !== null) {
      this.clock.clearTimeout(this.highlightTimer);
      this.highlightTimer = null;
    }
    if (this.highlightEl) {
      this.highlightEl.remove();
      this.highlightEl = null;
    }
  }
}
