/**
 * Background service worker: the toolbar button arms the current page and
 * opens the panel window; capture messages from content scripts relay to
 * the panel. Pages that refuse script injection (browser-internal pages)
 * surface as an explanatory panel error instead of a crash.
 */

const PANEL_URL = "panel.html";

let panelOpen = false;
let pendingError: string | null = null;

function openPanel(): void {
  void chrome.windows.create({
    url: chrome.runtime.getURL(PANEL_URL),
    type: "popup",
    width: 480,
    height: 640,
  });
  panelOpen = true;
}

chrome.action.onClicked.addListener((tab) => {
  if (!panelOpen) openPanel();
  if (tab.id === undefined) {
    pendingError = "This page cannot be described.";
    return;
  }
  chrome.scripting
    .executeScript({ target: { tabId: tab.id }, files: ["dist/content.js"] })
    .catch(() => {
      // Restricted page: no injection allowed; tell the panel why.
      pendingError = "This page does not allow extensions to read its content.";
      void chrome.runtime.sendMessage({
        type: "ctxdesc:arm-error",
        reason: pendingError,
      });
    });
});

chrome.runtime.onMessage.addListener((message, _sender, sendResponse) => {
  const msg = message as { type?: string } | null;
  if (msg?.type === "ctxdesc:capture" || msg?.type === "ctxdesc:arm-error") {
    // Relay to the panel window; it listens on the same runtime channel.
    void chrome.runtime.sendMessage(message);
  }
  if (msg?.type === "ctxdesc:panel-ready" && pendingError) {
    sendResponse({ type: "ctxdesc:arm-error", reason: pendingError });
    pendingError = null;
    return;
  }
  sendResponse();
});

export {};
