// Client-side mirror of what the service returned. The transcript holds
// exactly the turns the service acknowledged; nothing is fabricated here.

import type { Summary } from "./api.js";

export interface Turn {
  speaker: string;
  text: string;
  pendingFailed?: boolean;
}

export interface UiState {
  agents: string[];
  selectedAgent: string | null;
  sessionId: string | null;
  transcript: Turn[];
  summary: Summary | null;
  summaryFetchedAt: string | null;
  logCursor: number;
  logLines: string[];
  serviceUp: boolean;
  pending: { send: boolean; conclude: boolean; refresh: boolean };
  humanLabel: string;
}

export function initialState(): UiState {
  return {
    agents: [],
    selectedAgent: null,
    sessionId: null,
    transcript: [],
    summary: null,
    summaryFetchedAt: null,
    logCursor: 0,
    logLines: [],
    serviceUp: true,
    pending: { send: false, conclude: false, refresh: false },
    humanLabel: "Grace",
  };
}
