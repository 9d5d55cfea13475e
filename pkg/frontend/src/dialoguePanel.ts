// Dialogue panel: agent dropdown, transcript, message input, and the
// Send / "Conclude the dialogue" buttons.

import type { UiState } from "./state.js";

export interface DialogueHandlers {
  onSelectAgent(agent: string): void;
  onSend(text: string): void;
  onRetry(): void;
  onConclude(): void;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderDialoguePanel(state: UiState, handlers: DialogueHandlers): HTMLElement {
  const panel = el("section", "dialogue-panel");
  panel.appendChild(el("h2", "panel-header", "Dialogue between researcher and agents"));

  if (!state.serviceUp) {
    panel.appendChild(el("div", "banner banner-error", "Service unreachable. Retrying soon."));
  }

  const select = el("select", "agent-select");
  select.disabled = !state.serviceUp;
  const placeholder = el("option", undefined, "Choose an agent…");
  placeholder.setAttribute("value", "");
  placeholder.toggleAttribute("disabled", true);
  select.appendChild(placeholder);
  for (const agent of state.agents) {
    const option = el("option", undefined, agent);
    option.setAttribute("value", agent);
    select.appendChild(option);
  }
  select.value = state.selectedAgent ?? "";
  select.addEventListener("change", () => {
    if (select.value) handlers.onSelectAgent(select.value);
  });
  panel.appendChild(select);

  const transcript = el("div", "transcript");
  for (const turn of state.transcript) {
    const row = el("p", turn.pendingFailed ? "turn turn-pending-failed" : "turn");
    row.appendChild(el("span", "speaker", `${turn.speaker}: `));
    row.appendChild(document.createTextNode(turn.text));
    transcript.appendChild(row);
  }
  panel.appendChild(transcript);

  const lastTurn = state.transcript[state.transcript.length - 1];
  if (lastTurn?.pendingFailed) {
    const note = el("div", "retry-row");
    note.appendChild(el("span", "retry-note", "The narrator did not answer. "));
    const retry = el("button", "retry-button", "Retry");
    retry.disabled = !state.serviceUp || state.pending.send;
    retry.addEventListener("click", () => handlers.onRetry());
    note.appendChild(retry);
    panel.appendChild(note);
  }

  const input = el("input", "message-input") as HTMLInputElement;
  input.type = "text";
  input.placeholder = state.sessionId ? "Say something…" : "Choose an agent to begin";
  input.disabled = !state.sessionId || !state.serviceUp || state.pending.send;
  panel.appendChild(input);

  const controls = el("div", "dialogue-controls");
  const conclude = el("button", "conclude-button", "Conclude the dialogue");
  conclude.disabled = !state.sessionId || !state.serviceUp || state.pending.conclude;
  conclude.addEventListener("click", () => handlers.onConclude());
  controls.appendChild(conclude);

  const send = el("button", "send-button", "Send");
  send.disabled = input.disabled;
  const submit = () => {
    const text = input.value.trim();
    if (text) {
      handlers.onSend(text);
      input.value = "";
    }
  };
  send.addEventListener("click", submit);
  input.addEventListener("keydown", (event) => {
    if ((event as KeyboardEvent).key === "Enter") submit();
  });
  controls.appendChild(send);
  panel.appendChild(controls);

  return panel;
}
