// Single-page wiring: mount the two panels and the log tail, poll every 5 s.

import * as controller from "./controller.js";
import { renderDialoguePanel } from "./dialoguePanel.js";
import { renderSummaryPanel } from "./summaryPanel.js";
import { initialState } from "./state.js";

const POLL_INTERVAL_MS = 5000;

const state = initialState();

function mount(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing mount point #${id}`);
  return node;
}

function rerender(): void {
  const dialogueMount = mount("dialogue");
  dialogueMount.replaceChildren(
    renderDialoguePanel(state, {
      onSelectAgent: (agent) => void controller.selectAgent(state, agent, rerender),
      onSend: (text) => void controller.sendMessage(state, text, rerender),
      onRetry: () => void controller.retryLastMessage(state, rerender),
      onConclude: () => void controller.concludeDialogue(state, rerender),
    }),
  );
  const summaryMount = mount("summary");
  summaryMount.replaceChildren(
    renderSummaryPanel(state, () => void controller.refreshSummary(state, rerender)),
  );
  const logMount = mount("log");
  logMount.textContent = state.logLines.slice(-200).join("\n");
  logMount.scrollTop = logMount.scrollHeight;
}

async function boot(): Promise<void> {
  await controller.loadAgents(state, rerender);
  await controller.refreshSummary(state, rerender);
  await controller.pollLog(state, rerender);
  setInterval(() => {
    void controller.refreshSummary(state, rerender);
    void controller.pollLog(state, rerender);
  }, POLL_INTERVAL_MS);
}

document.addEventListener("DOMContentLoaded", () => {
  void boot();
});
