/**
 * Client-side window/level: maps raw float32 slice data to 8-bit
 * grayscale RGBA without a server round-trip.  The server sends the
 * slice min/max in headers; the user adjusts the window locally.
 */

export interface Window {
  lo: number;
  hi: number;
}

/** Clamp-and-scale one value to [0, 255]. */
export function windowValue(x: number, w: Window): number {
  const span = w.hi > w.lo ? w.hi - w.lo : 1;
  const t = (x - w.lo) / span;
  return Math.max(0, Math.min(255, Math.round(t * 255)));
}

/** Fill an RGBA buffer (4 bytes/pixel, opaque gray) from float data. */
export function toRgba(
  data: Float32Array,
  w: Window,
  out?: Uint8ClampedArray<ArrayBuffer>,
): Uint8ClampedArray<ArrayBuffer> {
  const rgba = out ?? new Uint8ClampedArray(4 * data.length);
  if (rgba.length !== 4 * data.length) {
    throw new Error("output buffer size mismatch");
  }
  const span = w.hi > w.lo ? w.hi - w.lo : 1;
  for (let i = 0; i < data.length; i++) {
    const t = (data[i] - w.lo) / span;
    const g = Math.max(0, Math.min(255, Math.round(t * 255)));
    const j = 4 * i;
    rgba[j] = g;
    rgba[j + 1] = g;
    rgba[j + 2] = g;
    rgba[j + 3] = 255;
  }
  return rgba;
}

/**
 * Artifact-energy metric used by the center-of-rotation calibration
 * workflow: anisotropic total variation (sum of absolute horizontal and
 * vertical neighbor differences).  Rotation-axis misalignment doubles
 * and smears every edge, inflating total variation, so a shift sweep is
 * minimized at the correct value.  Evaluate it on a noise-suppressed
 * reconstruction (e.g. Gaussian-filtered FBP); on a raw noisy slice the
 * pixel noise dominates the edge energy and the minimum is meaningless.
 */
export function totalVariation(
  data: Float32Array,
  width: number,
  height: number,
): number {
  if (width * height !== data.length) throw new Error("shape mismatch");
  let acc = 0;
  for (let r = 0; r < height; r++) {
    for (let c = 0; c < width; c++) {
      const i = r * width + c;
      if (c + 1 < width) acc += Math.abs(data[i + 1] - data[i]);
      if (r + 1 < height) acc += Math.abs(data[i + width] - data[i]);
    }
  }
  return acc;
}
