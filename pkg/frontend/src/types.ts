/** Wire types shared with the description service. */

export interface BBox {
  x: number;
  y: number;
  w: number;
  h: number;
}

export type TextTag = "a" | "p" | "span" | "h1" | "h2" | "h3" | "h4" | "h5" | "h6";

export interface WireSegment {
  id: number;
  text: string;
  tag: TextTag;
  bbox: BBox;
  visible: boolean;
}

export interface WireImage {
  src: string | null;
  alt: string | null;
  bbox: BBox;
  data: string | null;
}

export interface PageSnapshot {
  version: 1;
  url: string;
  title: string;
  viewport: BBox;
  image: WireImage;
  segments: WireSegment[];
}

export interface DescribeOptions {
  include_html_baseline?: boolean;
  bypass_cache?: boolean;
}

export interface DescriptionSet {
  ca_long: string;
  ca_short: string;
  cf_long: string;
  cf_short: string;
  html_long: string | null;
  html_short: string | null;
  [extra: string]: unknown;
}

export interface DescribeResponse {
  set: DescriptionSet;
  cached: boolean;
  key: string;
}

/** Message sent by the content script when the user clicks an image. */
export interface CaptureMessage {
  type: "ctxdesc:capture";
  snapshot: PageSnapshot;
  clickedImageSelector: string;
}

/** Message shown when a page cannot be armed (browser-internal pages). */
export interface ArmErrorMessage {
  type: "ctxdesc:arm-error";
  reason: string;
}

export type ExtensionMessage = CaptureMessage | ArmErrorMessage;
