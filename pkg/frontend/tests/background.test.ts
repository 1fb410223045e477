// Background worker: panel opening, restricted-page errors, message relay.

import { beforeEach, describe, expect, it, vi } from "vitest";

type Listener = (...args: unknown[]) => void;

function installFakeChrome() {
  const actionListeners: Listener[] = [];
  const messageListeners: Listener[] = [];
  const sent: Array<Record<string, unknown>> = [];
  const executeScript = vi.fn<() => Promise<unknown>>(async () => ({}));
  const windowsCreate = vi.fn(async () => ({}));
  const fake = {
    action: { onClicked: { addListener: (cb: Listener) => actionListeners.push(cb) } },
    runtime: {
      onMessage: { addListener: (cb: Listener) => messageListeners.push(cb) },
      sendMessage: vi.fn(async (message: Record<string, unknown>) => {
        sent.push(message);
      }),
      getURL: (path: string) => `chrome-extension://fake/${path}`,
    },
    scripting: { executeScript },
    windows: { create: windowsCreate },
  };
  (globalThis as Record<string, unknown>).chrome = fake;
  return { actionListeners, messageListeners, sent, executeScript, windowsCreate };
}

async function loadBackground() {
  vi.resetModules();
  await import("../src/background");
}

const flush = () => new Promise((resolve) => setTimeout(resolve, 0));

describe("background worker", () => {
  beforeEach(() => {
    delete (globalThis as Record<string, unknown>).chrome;
  });

  it("opens the panel and injects the content script on action click", async () => {
    const fake = installFakeChrome();
    await loadBackground();
    fake.actionListeners[0]({ id: 7, url: "https://news.example/a" });
    await flush();
    expect(fake.windowsCreate).toHaveBeenCalledTimes(1);
    expect(fake.executeScript).toHaveBeenCalledWith({
      target: { tabId: 7 },
      files: ["dist/content.js"],
    });
  });

  it("surfaces an explanatory error when injection is refused", async () => {
    const fake = installFakeChrome();
    fake.executeScript.mockRejectedValue(new Error("Cannot access a chrome:// URL"));
    await loadBackground();
    fake.actionListeners[0]({ id: 9, url: "chrome://settings" });
    await flush();
    expect(fake.windowsCreate).toHaveBeenCalledTimes(1); // panel still opens, no crash
    const error = fake.sent.find((m) => m.type === "ctxdesc:arm-error");
    expect(error?.reason).toMatch(/does not allow/);
  });

  it("relays capture messages onto the runtime channel for the panel", async () => {
    const fake = installFakeChrome();
    await loadBackground();
    const capture = { type: "ctxdesc:capture", snapshot: {}, clickedImageSelector: "#x" };
    fake.messageListeners[0](capture, {}, vi.fn());
    await flush();
    expect(fake.sent).toContainEqual(capture);
  });

  it("answers the panel-ready handshake with a pending arm error", async () => {
    const fake = installFakeChrome();
    fake.executeScript.mockRejectedValue(new Error("no"));
    await loadBackground();
    fake.actionListeners[0]({ id: 3 });
    await flush();
    const sendResponse = vi.fn();
    fake.messageListeners[0]({ type: "ctxdesc:panel-ready" }, {}, sendResponse);
    expect(sendResponse).toHaveBeenCalledWith(
      expect.objectContaining({ type: "ctxdesc:arm-error" }),
    );
  });
});
