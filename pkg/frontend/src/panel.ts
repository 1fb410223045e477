/**
 * Panel rendering: labeled short descriptions first, long versions behind
 * real expansion buttons. Long text enters the DOM only after expansion,
 * and every description is a plain text node under a labeled heading so
 * screen readers can walk it.
 */

import type { DescribeResponse } from "./types";

export interface PanelErrorState {
  message: string;
  retryable: boolean;
}

export interface PanelState {
  status: "idle" | "loading" | "ready" | "error";
  response?: DescribeResponse;
  error?: PanelErrorState;
}

export interface PanelHandlers {
  onRetry?: () => void;
}

interface SectionSpec {
  slug: string;
  label: string;
  short: string;
  long: string;
}

function renderSection(doc: Document, spec: SectionSpec): HTMLElement {
  const section = doc.createElement("section");
  const headingId = `${spec.slug}-heading`;
  section.setAttribute("aria-labelledby", headingId);

  const heading = doc.createElement("h2");
  heading.id = headingId;
  heading.textContent = spec.label;
  section.appendChild(heading);

  const short = doc.createElement("p");
  short.className = "description-short";
  short.textContent = spec.short;
  section.appendChild(short);

  const toggle = doc.createElement("button");
  toggle.type = "button";
  toggle.textContent = `Show long ${spec.label.toLowerCase()}`;
  toggle.setAttribute("aria-expanded", "false");
  section.appendChild(toggle);

  toggle.addEventListener("click", () => {
    const expanded = toggle.getAttribute("aria-expanded") === "true";
    if (expanded) {
      section.querySelector(".description-long")?.remove();
      toggle.setAttribute("aria-expanded", "false");
      toggle.textContent = `Show long ${spec.label.toLowerCase()}`;
    } else {
      const long = doc.createElement("p");
      long.className = "description-long";
      long.textContent = spec.long;
      section.appendChild(long);
      toggle.setAttribute("aria-expanded", "true");
      toggle.textContent = `Hide long ${spec.label.toLowerCase()}`;
    }
  });

  return section;
}

export function renderPanel(
  root: HTMLElement,
  state: PanelState,
  handlers: PanelHandlers = {},
): void {
  const doc = root.ownerDocument;
  root.textContent = "";

  if (state.status === "idle") {
    const hint = doc.createElement("p");
    hint.textContent = "Click an image on the page to describe it.";
    root.appendChild(hint);
    return;
  }

  if (state.status === "loading") {
    const status = doc.createElement("p");
    status.setAttribute("role", "status");
    status.textContent = "Generating descriptions…";
    root.appendChild(status);
    return;
  }

  if (state.status === "error") {
    const card = doc.createElement("div");
    card.setAttribute("role", "alert");
    const message = doc.createElement("p");
    message.textContent = state.error?.message ?? "Something went wrong.";
    card.appendChild(message);
    if (state.error?.retryable && handlers.onRetry) {
      const retry = doc.createElement("button");
      retry.type = "button";
      retry.textContent = "Retry";
      retry.addEventListener("click", handlers.onRetry);
      card.appendChild(retry);
    }
    root.appendChild(card);
    return;
  }

  const response = state.response;
  if (!response) return;

  // Context-aware first, short before long, both labeled.
  root.appendChild(
    renderSection(doc, {
      slug: "context-aware",
      label: "Context-aware description",
      short: response.set.ca_short,
      long: response.set.ca_long,
    }),
  );
  root.appendChild(
    renderSection(doc, {
      slug: "context-free",
      label: "Context-free description",
      short: response.set.cf_short,
      long: response.set.cf_long,
    }),
  );

  if (response.cached) {
    const note = doc.createElement("p");
    note.className = "cached-note";
    note.textContent = "Served from cache.";
    root.appendChild(note);
  }
}
