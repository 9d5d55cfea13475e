// Summary panel: the six sections, in interface order.

import type { UiState } from "./state.js";

const SECTION_ORDER = [
  "Simulation Time",
  "Environment",
  "Last narrative shift",
  "Locations",
  "Agent Locations",
  "Character Descriptions",
] as const;

function section(title: string): HTMLElement {
  const wrapper = document.createElement("div");
  wrapper.className = "summary-section";
  const heading = document.createElement("h3");
  heading.textContent = title;
  wrapper.appendChild(heading);
  return wrapper;
}

function para(parent: HTMLElement, text: string): void {
  const p = document.createElement("p");
  p.textContent = text;
  parent.appendChild(p);
}

function pairs(parent: HTMLElement, items: [string, string][]): void {
  if (items.length === 0) {
    para(parent, "none");
    return;
  }
  for (const [name, value] of items) {
    para(parent, `${name}: ${value}`);
  }
}

export function renderSummaryPanel(state: UiState, onRefresh?: () => void): HTMLElement {
  const panel = document.createElement("section");
  panel.className = "summary-panel";
  const heading = document.createElement("h2");
  heading.className = "panel-header";
  heading.textContent = "Simulation Summary";
  panel.appendChild(heading);

  if (state.summaryFetchedAt) {
    const stale = document.createElement("div");
    stale.className = "fetched-at";
    stale.textContent = `fetched at ${state.summaryFetchedAt}`;
    panel.appendChild(stale);
  }
  if (onRefresh) {
    const refresh = document.createElement("button");
    refresh.className = "refresh-button";
    refresh.textContent = "Refresh";
    refresh.disabled = state.pending.refresh || !state.serviceUp;
    refresh.addEventListener("click", () => onRefresh());
    panel.appendChild(refresh);
  }

  const summary = state.summary;
  for (const title of SECTION_ORDER) {
    const block = section(title);
    if (summary === null) {
      para(block, "not loaded yet");
    } else if (title === "Simulation Time") {
      para(block, summary.simulation_time);
    } else if (title === "Environment") {
      para(block, summary.environment);
    } else if (title === "Last narrative shift") {
      para(block, summary.last_narrative_shift);
    } else if (title === "Locations") {
      pairs(block, summary.locations);
    } else if (title === "Agent Locations") {
      pairs(block, Object.entries(summary.agent_locations));
    } else {
      pairs(block, Object.entries(summary.character_descriptions));
    }
    panel.appendChild(block);
  }
  return panel;
}
