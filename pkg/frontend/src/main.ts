/** Application bootstrap: wire the chat pane, viewer, and selection menu. */

import "./styles.css";
import { ApiClient, TurnInProgressError, UiConfig } from "./api";
import { SelectionMenu } from "./selection";
import { Transcript } from "./transcript";
import { DocumentViewer } from "./viewer";

async function boot(): Promise<void> {
  const api = new ApiClient("");
  const chatPane = document.getElementById("chat")!;
  const viewerPane = document.getElementById("viewer")!;
  const draftBox = document.getElementById("draft") as HTMLTextAreaElement;
  const sendBtn = document.getElementById("send") as HTMLButtonElement;
  const docPicker = document.getElementById("doc-picker") as HTMLSelectElement;

  let config: UiConfig | null = null;
  let sessionId: string | null = null;
  let turnActive = false;

  const viewer = new DocumentViewer(viewerPane, api);
  const transcript = new Transcript(chatPane, api, (anchor) => viewer.showAnchor(anchor));
  const menu = new SelectionMenu(
    viewerPane,
    () => config?.prompt_templates ?? null,
    (promptText) => {
      draftBox.value = promptText;
      draftBox.focus();
    },
  );
  menu.attach();

  config = await api.config();
  for (const doc of config.docs) {
    const opt = document.createElement("option");
    opt.value = doc;
    opt.textContent = doc;
    docPicker.appendChild(opt);
  }

  async function openDoc(docId: string): Promise<void> {
    sessionId = await api.createSession(docId);
    await viewer.load(docId);
  }

  docPicker.addEventListener("change", () => void openDoc(docPicker.value));
  if (config.docs.length > 0) {
    docPicker.value = config.docs[0];
    await openDoc(config.docs[0]);
  }

  function updateSendState(): void {
    sendBtn.disabled = turnActive || !draftBox.value.trim() || !sessionId;
  }
  draftBox.addEventListener("input", updateSendState);
  updateSendState();

  async function send(): Promise<void> {
    const text = draftBox.value.trim();
    if (!text || !sessionId || turnActive) return;
    transcript.addUserMessage(text);
    draftBox.value = "";
    turnActive = true;
    updateSendState();
    const sink = transcript.beginAssistantTurn();
    try {
      await api.sendMessage(sessionId, text, sink);
    } catch (err) {
      if (err instanceof TurnInProgressError) {
        transcript.addNotice("A response is already in progress.");
      } else {
        transcript.addNotice(`Send failed: ${err}`);
      }
    } finally {
      turnActive = false;
      updateSendState();
    }
  }

  sendBtn.addEventListener("click", () => void send());
  draftBox.addEventListener("keydown", (ev) => {
    if (ev.key === "Enter" && !ev.shiftKey) {
      ev.preventDefault();
      void send();
    }
  });
}

void boot();
