/**
 * Slice viewer controller: glues the orientation store, rate limiter,
 * sequence tracker, API client, and a canvas together.
 *
 * Flow: any orientation/method/shift change -> rate-limited request with
 * a fresh sequence number -> on response, render only if still current.
 * The UI never blocks on in-flight reconstructions.
 */

import { ApiClient, Method, SliceResult } from "./api.js";
import { RateLimiter } from "./debounce.js";
import { Orientation, OrientationStore } from "./orientation.js";
import { SequenceTracker } from "./sequence.js";
import { Window, toRgba } from "./window.js";

export interface ViewerState {
  method: Method;
  corShift: number;
  params: Record<string, number>;
  window: Window | null; // null = auto from each response
}

interface RequestSpec {
  orientation: Orientation;
  state: ViewerState;
  seq: number;
}

export class SliceViewer {
  readonly sequence = new SequenceTracker();
  readonly state: ViewerState = {
    method: "fbp",
    corShift: 0,
    params: {},
    window: null,
  };
  private limiter: RateLimiter<RequestSpec>;
  private lastResult: SliceResult | null = null;
  onError: (message: string) => void = () => {};
  onRender: (result: SliceResult) => void = () => {};

  constructor(
    private readonly api: ApiClient,
    readonly orientation: OrientationStore,
    private readonly canvas: HTMLCanvasElement | null,
    requestIntervalMs = 50,
  ) {
    this.limiter = new RateLimiter(
      (spec) => void this.execute(spec),
      requestIntervalMs,
    );
    this.orientation.subscribe(() => this.refresh());
  }

  /** Issue a (rate-limited) request for the current view. */
  refresh(): void {
    this.limiter.request({
      orientation: this.orientation.get(),
      state: { ...this.state, params: { ...this.state.params } },
      seq: this.sequence.issue(),
    });
  }

  setMethod(method: Method): void {
    this.state.method = method;
    this.refresh(); // same orientation, new method
  }

  setCorShift(shift: number): void {
    this.state.corShift = shift;
    this.refresh();
  }

  setWindow(w: Window | null): void {
    this.state.window = w;
    if (this.lastResult) this.draw(this.lastResult); // client-side only
  }

  private async execute(spec: RequestSpec): Promise<void> {
    try {
      const result = await this.api.slice(spec.orientation, spec.state.method, {
        corShift: spec.state.corShift,
        params: spec.state.params,
      });
      if (!this.sequence.accept(spec.seq)) return; // stale: never render
      this.lastResult = result;
      this.draw(result);
      this.onRender(result);
    } catch (err) {
      // Errors are surfaced but never block newer requests.
      this.onError(err instanceof Error ? err.message : String(err));
    }
  }

  private draw(result: SliceResult): void {
    if (!this.canvas) return;
    const w = this.state.window ?? { lo: result.min, hi: result.max };
    const rgba = toRgba(result.data, w);
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    this.canvas.width = result.width;
    this.canvas.height = result.height;
    ctx.putImageData(new ImageData(rgba, result.width, result.height), 0, 0);
  }
}

/** Attach pointer handlers: drag rotates, shift-drag pans, wheel scrolls. */
export function attachDragControls(
  canvas: HTMLCanvasElement,
  store: OrientationStore,
  radiansPerPixel = 0.01,
): void {
  let dragging = false;
  let lastX = 0;
  let lastY = 0;
  canvas.addEventListener("pointerdown", (e) => {
    dragging = true;
    lastX = e.clientX;
    lastY = e.clientY;
    canvas.setPointerCapture(e.pointerId);
  });
  canvas.addEventListener("pointermove", (e) => {
    if (!dragging) return;
    const dx = e.clientX - lastX;
    const dy = e.clientY - lastY;
    lastX = e.clientX;
    lastY = e.clientY;
    if (e.shiftKey) {
      store.translateInPlane(-dx, -dy);
    } else {
      store.rotate(dx * radiansPerPixel, dy * radiansPerPixel);
    }
  });
  canvas.addEventListener("pointerup", () => {
    dragging = false;
  });
  canvas.addEventListener("wheel", (e) => {
    e.preventDefault();
    store.translateAlongNormal(e.deltaY > 0 ? 1 : -1);
  });
}
