// Gesture -> stroke payload quantization. The canvas renders the image
// flipped (row 0 of the stored image is the bottom scanline), so canvas y
// converts to image row as height - 1 - y, and the tilt's vertical
// component flips sign.

import type { StrokePayload } from "./api.js";

export interface CanvasGesture {
  // pointer-down and pointer-up positions in canvas pixels
  x0: number;
  y0: number;
  x1: number;
  y1: number;
}

export interface BrushSettings {
  radius: number; // pixels
  strength: number; // 0..1
  degreesPerPixel: number; // drag length -> tilt angle
  maxAngle: number; // degrees
}

export const DEFAULT_BRUSH: BrushSettings = {
  radius: 10,
  strength: 1.0,
  degreesPerPixel: 1.5,
  maxAngle: 45,
};

export interface MaskView {
  width: number;
  height: number;
  // row-major canvas-space foreground flags (already flipped for display)
  inside(x: number, y: number): boolean;
}

/** Foreground test from the normals preview: background pixels are pure black. */
export function maskFromImageData(data: {
  width: number;
  height: number;
  data: Uint8ClampedArray;
}): MaskView {
  return {
    width: data.width,
    height: data.height,
    inside(x: number, y: number): boolean {
      const xi = Math.round(x);
      const yi = Math.round(y);
      if (xi < 0 || yi < 0 || xi >= data.width || yi >= data.height) return false;
      const k = (yi * data.width + xi) * 4;
      return data.data[k] !== 0 || data.data[k + 1] !== 0 || data.data[k + 2] !== 0;
    },
  };
}

export type GestureResult =
  | { kind: "stroke"; payload: StrokePayload }
  | { kind: "empty" }
  | { kind: "outside-mask" };

/**
 * Quantize a drag gesture into a paint stroke.
 *
 * A zero-length gesture produces no request; a gesture starting outside
 * the object mask is rejected client-side so the caller can flash the
 * cursor instead of bothering the server.
 */
export function gestureToStroke(
  gesture: CanvasGesture,
  brush: BrushSettings,
  mask: MaskView,
  imageHeight: number,
): GestureResult {
  const dx = gesture.x1 - gesture.x0;
  const dy = gesture.y1 - gesture.y0;
  const length = Math.hypot(dx, dy);
  if (length < 1.0) return { kind: "empty" };
  if (!mask.inside(gesture.x0, gesture.y0)) return { kind: "outside-mask" };

  const row = imageHeight - 1 - Math.round(gesture.y0);
  const col = Math.round(gesture.x0);
  const angle = Math.min(brush.maxAngle, length * brush.degreesPerPixel);
  return {
    kind: "stroke",
    payload: {
      center: [row, col],
      radius: brush.radius,
      tilt: [dx / length, -dy / length],
      angle,
      strength: brush.strength,
    },
  };
}
