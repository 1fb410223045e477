/**
 * Page capture: serialize the live page into the snapshot wire format.
 *
 * Geometry and visibility come from injectable resolvers so the same logic
 * runs against real layout (getBoundingClientRect) in the content script
 * and against pinned fixture geometry in tests. Overlapping text from
 * nested markup is allowed; the service deduplicates.
 */

import type { BBox, PageSnapshot, TextTag, WireSegment } from "./types";

export const TEXT_TAGS: readonly TextTag[] = [
  "a",
  "p",
  "span",
  "h1",
  "h2",
  "h3",
  "h4",
  "h5",
  "h6",
];

const TEXT_SELECTOR = TEXT_TAGS.join(",");

export type RectResolver = (el: Element) => BBox;
export type VisibilityResolver = (el: Element, rect: BBox) => boolean;

export interface CaptureConfig {
  rectFor?: RectResolver;
  visibleFor?: VisibilityResolver;
  viewport?: { w: number; h: number };
  /** Base64 image bytes when readable (same-origin); null otherwise. */
  imageData?: string | null;
}

export function normalizeText(text: string): string {
  return text.split(/\s+/).filter(Boolean).join(" ");
}

export function defaultRect(el: Element): BBox {
  const rect = el.getBoundingClientRect();
  return {
    x: Math.round(rect.x),
    y: Math.round(rect.y),
    w: Math.round(rect.width),
    h: Math.round(rect.height),
  };
}

export function defaultVisible(el: Element, rect: BBox): boolean {
  if (rect.w <= 0 || rect.h <= 0) return false;
  const win = el.ownerDocument.defaultView;
  if (!win) return true;
  const style = win.getComputedStyle(el);
  return style.display !== "none" && style.visibility !== "hidden";
}

export function collectSegments(
  doc: Document,
  rectFor: RectResolver = defaultRect,
  visibleFor: VisibilityResolver = defaultVisible,
): WireSegment[] {
  const segments: WireSegment[] = [];
  let nextId = 1;
  for (const el of Array.from(doc.querySelectorAll(TEXT_SELECTOR))) {
    const text = normalizeText(el.textContent ?? "");
    if (!text) continue;
    const bbox = rectFor(el);
    segments.push({
      id: nextId++,
      text,
      tag: el.tagName.toLowerCase() as TextTag,
      bbox,
      visible: visibleFor(el, bbox),
    });
  }
  return segments;
}

export function buildSnapshot(
  doc: Document,
  image: HTMLImageElement,
  config: CaptureConfig = {},
): PageSnapshot {
  const rectFor = config.rectFor ?? defaultRect;
  const visibleFor = config.visibleFor ?? defaultVisible;
  const win = doc.defaultView;
  const viewport = config.viewport ?? {
    w: win?.innerWidth ?? 0,
    h: win?.innerHeight ?? 0,
  };
  const src = image.currentSrc || image.getAttribute("src");
  return {
    version: 1,
    url: doc.location.href,
    title: normalizeText(doc.title),
    viewport: { x: 0, y: 0, w: viewport.w, h: viewport.h },
    image: {
      src: src || null,
      alt: image.getAttribute("alt"),
      bbox: rectFor(image),
      data: config.imageData ?? null,
    },
    segments: collectSegments(doc, rectFor, visibleFor),
  };
}

/**
 * Read image bytes through a canvas. Cross-origin images taint the canvas
 * and throw; those ship by URL only (data stays null).
 */
export function readImageData(image: HTMLImageElement): string | null {
  try {
    const canvas = image.ownerDocument.createElement("canvas");
    canvas.width = image.naturalWidth;
    canvas.height = image.naturalHeight;
    const ctx = canvas.getContext("2d");
    if (!ctx || canvas.width === 0 || canvas.height === 0) return null;
    ctx.drawImage(image, 0, 0);
    const dataUrl = canvas.toDataURL("image/png");
    const comma = dataUrl.indexOf(",");
    return comma >= 0 ? dataUrl.slice(comma + 1) : null;
  } catch {
    return null; // tainted canvas (cross-origin) or unsupported
  }
}

/** Stable-enough selector for coalescing repeat clicks on one image. */
export function selectorFor(image: HTMLImageElement): string {
  if (image.id) return `#${image.id}`;
  const src = image.currentSrc || image.src;
  if (src) return `img[src="${src}"]`;
  const siblings = Array.from(image.ownerDocument.images);
  return `img:nth-of-type(${siblings.indexOf(image) + 1})`;
}
