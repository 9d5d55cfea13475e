import { describe, expect, it, vi } from "vitest";

import { renderDialoguePanel, type DialogueHandlers } from "../src/dialoguePanel.js";
import { initialState } from "../src/state.js";

function handlers(): DialogueHandlers {
  return {
    onSelectAgent: vi.fn(),
    onSend: vi.fn(),
    onRetry: vi.fn(),
    onConclude: vi.fn(),
  };
}

// recorded fixture: a four-turn exchange as the service acknowledged it
function fixtureState() {
  const state = initialState();
  state.agents = ["Lex", "Tortugi"];
  state.selectedAgent = "Lex";
  state.sessionId = "abc123";
  state.transcript = [
    { speaker: "Grace", text: "Lex, I feel depleted. Is there no way for us to turn the world around?" },
    { speaker: "Lex", text: "I understand how you feel. We have made real progress together." },
    { speaker: "Grace", text: "What keeps you going?" },
    { speaker: "Lex", text: "Every small step counts towards our goal." },
  ];
  return state;
}

describe("dialogue panel", () => {
  it("renders the fixture transcript in order, styled Name: text", () => {
    const panel = renderDialoguePanel(fixtureState(), handlers());
    const turns = [...panel.querySelectorAll(".turn")];
    expect(turns).toHaveLength(4);
    expect(turns[0].textContent).toBe(
      "Grace: Lex, I feel depleted. Is there no way for us to turn the world around?",
    );
    expect(turns[1].textContent).toMatch(/^Lex: I understand how you feel/);
    expect(turns[2].textContent).toMatch(/^Grace: /);
    expect(turns[3].textContent).toMatch(/^Lex: /);
  });

  it("shows the interface layout: dropdown, input, send, conclude", () => {
    const panel = renderDialoguePanel(fixtureState(), handlers());
    const select = panel.querySelector("select.agent-select") as HTMLSelectElement;
    expect(select).not.toBeNull();
    expect([...select.options].map((o) => o.textContent)).toContain("Lex");
    expect(panel.querySelector("input.message-input")).not.toBeNull();
    const send = panel.querySelector("button.send-button");
    expect(send?.textContent).toBe("Send");
    const conclude = panel.querySelector("button.conclude-button");
    expect(conclude?.textContent).toBe("Conclude the dialogue");
    expect(panel.querySelector("h2")?.textContent).toBe("Dialogue between researcher and agents");
  });

  it("disables the input until an agent is chosen", () => {
    const state = initialState();
    state.agents = ["Lex"];
    const panel = renderDialoguePanel(state, handlers());
    const input = panel.querySelector("input.message-input") as HTMLInputElement;
    expect(input.disabled).toBe(true);
    const send = panel.querySelector("button.send-button") as HTMLButtonElement;
    expect(send.disabled).toBe(true);
  });

  it("preserves the human turn and offers a retry after a 503", () => {
    const state = fixtureState();
    state.transcript.push({ speaker: "Grace", text: "are you still there?", pendingFailed: true });
    const h = handlers();
    const panel = renderDialoguePanel(state, h);
    const turns = [...panel.querySelectorAll(".turn")];
    expect(turns[turns.length - 1].textContent).toBe("Grace: are you still there?");
    expect(turns[turns.length - 1].className).toContain("pending-failed");
    const retry = panel.querySelector("button.retry-button") as HTMLButtonElement;
    expect(retry).not.toBeNull();
    retry.click();
    expect(h.onRetry).toHaveBeenCalledTimes(1);
  });

  it("shows a banner and disables controls when the service is unreachable", () => {
    const state = fixtureState();
    state.serviceUp = false;
    const panel = renderDialoguePanel(state, handlers());
    expect(panel.querySelector(".banner-error")?.textContent).toMatch(/unreachable/i);
    expect((panel.querySelector("select.agent-select") as HTMLSelectElement).disabled).toBe(true);
    expect((panel.querySelector("input.message-input") as HTMLInputElement).disabled).toBe(true);
    expect((panel.querySelector("button.send-button") as HTMLButtonElement).disabled).toBe(true);
    expect((panel.querySelector("button.conclude-button") as HTMLButtonElement).disabled).toBe(true);
  });

  it("send passes the typed text through the handler", () => {
    const h = handlers();
    const panel = renderDialoguePanel(fixtureState(), h);
    const input = panel.querySelector("input.message-input") as HTMLInputElement;
    input.value = "  a new thought  ";
    (panel.querySelector("button.send-button") as HTMLButtonElement).click();
    expect(h.onSend).toHaveBeenCalledWith("a new thought");
    expect(input.value).toBe("");
  });

  it("conclude button fires its handler", () => {
    const h = handlers();
    const panel = renderDialoguePanel(fixtureState(), h);
    (panel.querySelector("button.conclude-button") as HTMLButtonElement).click();
    expect(h.onConclude).toHaveBeenCalledTimes(1);
  });
});
