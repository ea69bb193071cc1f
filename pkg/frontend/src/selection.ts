/**
 * Text-selection menu over the document pane: exactly two actions,
 * Summarize and ELI10. Picking one renders its prompt template into
 * the draft box for editing; nothing is sent automatically.
 */

export interface PromptTemplates {
  summarize: string;
  eli10: string;
}

export function fillTemplate(template: string, selection: string): string {
  return template.replace("{selection}", selection);
}

export class SelectionMenu {
  private menuEl: HTMLElement | null = null;

  constructor(
    private host: HTMLElement,
    private templates: () => PromptTemplates | null,
    private onPrompt: (promptText: string) => void,
    private selectionText: () => string = defaultSelectionText,
  ) {}

  attach(): void {
    this.host.addEventListener("mouseup", () => this.maybeShow());
    document.addEventListener("selectionchange", () => {
      if (!this.selectionText()) this.dismiss();
    });
  }

  maybeShow(): void {
    const text = this.selectionText().trim();
    this.dismiss();
    if (!text) return;
    const templates = this.templates();
    if (!templates) return;
    const menu = document.createElement("div");
    menu.className = "selection-menu";
    for (const [label, template] of [
      ["Summarize", templates.summarize],
      ["ELI10", templates.eli10],
    ] as const) {
      const btn = document.createElement("button");
      btn.textContent = label;
      btn.addEventListener("click", () => {
        this.onPrompt(fillTemplate(template, text));
        this.dismiss();
      });
      menu.appendChild(btn);
    }
    this.host.appendChild(menu);
    this.menuEl = menu;
  }

  dismiss(): void {
    if (this.menuEl) {
      this.menuEl.remove();
      this.menuEl = null;
    }
  }

  activeMenu(): HTMLElement | null {
    return this.menuEl;
  }
}

function defaultSelectionText(): string {
  return window.getSelection()?.toString() ?? "";
}
