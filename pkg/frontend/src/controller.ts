// Actions: each user gesture maps to exactly one API call (conclude is the
// sanctioned exception: conclude, then a summary refetch). State changes
// only reflect what the service acknowledged.

import * as api from "./api.js";
import type { UiState } from "./state.js";

export type Rerender = () => void;

export async function loadAgents(state: UiState, rerender: Rerender): Promise<void> {
  try {
    const agents = await api.getAgents();
    state.agents = agents.map((a) => a.name);
    state.serviceUp = true;
  } catch (error) {
    if (!(error instanceof api.ApiError)) state.serviceUp = false;
  }
  rerender();
}

export async function refreshSummary(state: UiState, rerender: Rerender): Promise<void> {
  state.pending.refresh = true;
  rerender();
  try {
    state.summary = await api.getSummary();
    state.summaryFetchedAt = new Date().toLocaleTimeString();
    state.serviceUp = true;
  } catch (error) {
    if (!(error instanceof api.ApiError)) state.serviceUp = false;
  } finally {
    state.pending.refresh = false;
  }
  rerender();
}

export async function selectAgent(state: UiState, agent: string, rerender: Rerender): Promise<void> {
  try {
    state.sessionId = await api.openDialogue(agent);
    state.selectedAgent = agent;
    state.transcript = [];
    state.serviceUp = true;
  } catch (error) {
    if (!(error instanceof api.ApiError)) state.serviceUp = false;
  }
  rerender();
}

export async function sendMessage(state: UiState, text: string, rerender: Rerender): Promise<void> {
  if (!state.sessionId || !state.selectedAgent) return;
  state.pending.send = true;
  rerender();
  try {
    const reply = await api.postMessage(state.sessionId, text);
    state.transcript.push({ speaker: state.humanLabel, text });
    state.transcript.push({ speaker: state.selectedAgent, text: reply });
    state.serviceUp = true;
  } catch (error) {
    if (error instanceof api.ApiError && error.status === 503) {
      // the service kept the human turn; mirror it and offer a retry
      state.transcript.push({ speaker: state.humanLabel, text, pendingFailed: true });
    } else if (!(error instanceof api.ApiError)) {
      state.serviceUp = false;
    }
  } finally {
    state.pending.send = false;
  }
  rerender();
}

export async function retryLastMessage(state: UiState, rerender: Rerender): Promise<void> {
  const last = state.transcript[state.transcript.length - 1];
  if (!last?.pendingFailed || !state.sessionId || !state.selectedAgent) return;
  state.pending.send = true;
  rerender();
  try {
    const reply = await api.postMessage(state.sessionId, last.text);
    last.pendingFailed = false;
    state.transcript.push({ speaker: state.selectedAgent, text: reply });
    state.serviceUp = true;
  } catch (error) {
    if (!(error instanceof api.ApiError)) state.serviceUp = false;
  } finally {
    state.pending.send = false;
  }
  rerender();
}

export async function concludeDialogue(state: UiState, rerender: Rerender): Promise<void> {
  if (!state.sessionId) return;
  state.pending.conclude = true;
  rerender();
  try {
    await api.concludeDialogue(state.sessionId);
    state.sessionId = null;
    state.selectedAgent = null;
    state.transcript = [];
    state.serviceUp = true;
  } catch (error) {
    if (!(error instanceof api.ApiError)) state.serviceUp = false;
  } finally {
    state.pending.conclude = false;
  }
  // the summary regenerates at each conclusion; always refetch
  await refreshSummary(state, rerender);
}

export async function pollLog(state: UiState, rerender: Rerender): Promise<void> {
  try {
    const chunk = await api.tailLog(state.logCursor);
    state.logLines.push(...chunk.lines);
    state.logCursor = chunk.next;
    state.serviceUp = true;
  } catch (error) {
    if (!(error instanceof api.ApiError)) state.serviceUp = false;
  }
  rerender();
}
