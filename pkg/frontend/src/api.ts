// Typed client for the simulation service. One function per endpoint;
// errors carry the service's {error, message} body when present.

export interface Summary {
  simulation_time: string;
  environment: string;
  last_narrative_shift: string;
  locations: [string, string][];
  agent_locations: Record<string, string>;
  character_descriptions: Record<string, string>;
}

export interface AgentInfo {
  name: string;
  location: string;
  description: string;
  mutation_count: number;
}

export interface LogChunk {
  lines: string[];
  next: number;
}

export class ApiError extends Error {
  status: number;
  code: string;

  constructor(status: number, code: string, message: string) {
    super(message);
    this.status = status;
    this.code = code;
  }
}

async function request<T>(method: string, path: string, body?: unknown): Promise<T> {
  const response = await fetch(path, {
    method,
    headers: body === undefined ? undefined : { "Content-Type": "application/json" },
    body: body === undefined ? undefined : JSON.stringify(body),
  });
  if (!response.ok) {
    let code = "http-error";
    let message = `HTTP ${response.status}`;
    try {
      const payload = await response.json();
      if (payload && payload.error) {
        code = payload.error;
        message = payload.message ?? message;
      }
    } catch {
      // non-JSON error body; keep the defaults
    }
    throw new ApiError(response.status, code, message);
  }
  return (await response.json()) as T;
}

export function getSummary(): Promise<Summary> {
  return request<Summary>("GET", "/summary");
}

export function getAgents(): Promise<AgentInfo[]> {
  return request<AgentInfo[]>("GET", "/agents");
}

export async function openDialogue(agent: string): Promise<string> {
  const body = await request<{ session_id: string }>("POST", "/dialogues", { agent });
  return body.session_id;
}

export async function postMessage(sessionId: string, text: string): Promise<string> {
  const body = await request<{ reply: string }>("POST", `/dialogues/${sessionId}/messages`, { text });
  return body.reply;
}

export async function concludeDialogue(sessionId: string): Promise<number[]> {
  const body = await request<{ memory_ids: number[] }>("POST", `/dialogues/${sessionId}/conclude`, {});
  return body.memory_ids;
}

export function tailLog(since: number): Promise<LogChunk> {
  return request<LogChunk>("GET", `/log?since=${since}`);
}
