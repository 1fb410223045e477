/**
 * Content script: armed by the toolbar action, it captures the page and
 * forwards a snapshot whenever the user clicks an image. Re-arming is
 * idempotent: one handler set per page, ever.
 */

import { buildSnapshot, readImageData, selectorFor } from "./capture";
import type { CaptureMessage } from "./types";

const ARMED_FLAG = "__ctxdescArmed";

export type MessageSender = (message: CaptureMessage) => void;

export function armPage(
  doc: Document,
  send: MessageSender,
): boolean {
  const win = doc.defaultView as (Window & { [ARMED_FLAG]?: boolean }) | null;
  if (!win) return false;
  if (win[ARMED_FLAG]) return false; // already armed: keep the single handler set
  win[ARMED_FLAG] = true;

  doc.addEventListener(
    "click",
    (event) => {
      const target = event.target as Element | null;
      if (!target || target.tagName !== "IMG") return;
      const image = target as HTMLImageElement;
      event.preventDefault();
      event.stopPropagation();
      const snapshot = buildSnapshot(doc, image, {
        imageData: sameOrigin(doc, image) ? readImageData(image) : null,
      });
      send({
        type: "ctxdesc:capture",
        snapshot,
        clickedImageSelector: selectorFor(image),
      });
    },
    true,
  );
  return true;
}

function sameOrigin(doc: Document, image: HTMLImageElement): boolean {
  const src = image.currentSrc || image.src;
  if (!src) return false;
  try {
    return new URL(src, doc.location.href).origin === doc.location.origin;
  } catch {
    return false;
  }
}

// Entry point when injected as the real content script.
if (typeof chrome !== "undefined" && chrome?.runtime?.sendMessage) {
  armPage(document, (message) => {
    void chrome.runtime.sendMessage(message);
  });
}
