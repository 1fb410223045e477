/** Panel bootstrap: wires runtime messages to the renderer and the service. */

import { DescribeClient, ServiceError } from "./api";
import { renderPanel } from "./panel";
import type { CaptureMessage, ExtensionMessage } from "./types";

const DEFAULT_BASE_URL = "http://127.0.0.1:8000";

async function baseUrl(): Promise<string> {
  const stored = await chrome.storage.sync.get({ serviceBaseUrl: DEFAULT_BASE_URL });
  return (stored.serviceBaseUrl as string) || DEFAULT_BASE_URL;
}

async function main(): Promise<void> {
  const root = document.getElementById("panel-root");
  if (!root) return;
  const client = new DescribeClient(await baseUrl());
  renderPanel(root, { status: "idle" });

  let lastCapture: CaptureMessage | null = null;

  async function describe(capture: CaptureMessage): Promise<void> {
    lastCapture = capture;
    renderPanel(root!, { status: "loading" });
    try {
      const response = await client.describe(capture.snapshot, capture.clickedImageSelector);
      renderPanel(root!, { status: "ready", response });
    } catch (err) {
      const retryable = err instanceof ServiceError ? err.retryable : true;
      renderPanel(
        root!,
        {
          status: "error",
          error: { message: err instanceof Error ? err.message : String(err), retryable },
        },
        { onRetry: () => lastCapture && void describe(lastCapture) },
      );
    }
  }

  chrome.runtime.onMessage.addListener((message, _sender, sendResponse) => {
    const msg = message as ExtensionMessage;
    if (msg?.type === "ctxdesc:capture") {
      void describe(msg);
    } else if (msg?.type === "ctxdesc:arm-error") {
      renderPanel(root, {
        status: "error",
        error: { message: msg.reason, retryable: false },
      });
    }
    sendResponse();
  });

  // Pick up an arm failure that happened before this window loaded.
  const reply = (await chrome.runtime.sendMessage({ type: "ctxdesc:panel-ready" })) as
    | { type?: string; reason?: string }
    | undefined;
  if (reply?.type === "ctxdesc:arm-error" && reply.reason) {
    renderPanel(root, { status: "error", error: { message: reply.reason, retryable: false } });
  }
}

void main();
