/**
 * Typed client for the /v1 slice reconstruction API.
 *
 * Slices are fetched as raw little-endian float32 (Accept:
 * application/octet-stream) so window/level stays client-side; the
 * server's own min/max arrive in the X-Min / X-Max headers.
 */

import type { Orientation } from "./orientation.js";

export type Method = "fbp" | "fbp_g" | "fbp_sc" | "n2f";

export interface ServiceInfo {
  geometry: Record<string, unknown>;
  cor_shift: number;
  methods: Method[];
  model: Record<string, unknown> | null;
  has_ground_truth: boolean;
  volume_shape: number[];
}

export interface SliceRequestBody {
  orientation: {
    origin: number[];
    u: number[];
    v: number[];
    width: number;
    height: number;
  };
  method: Method;
  params?: Record<string, number>;
  cor_shift?: number;
}

export interface SliceResult {
  data: Float32Array;
  width: number;
  height: number;
  min: number;
  max: number;
}

export interface TrainParams {
  splits: number;
  strategy: "x1" | "1x";
  n_train: number;
  seed: number;
}

export interface TrainStatus {
  id: string;
  status: "running" | "done" | "failed";
  phase: string;
  progress: number;
  error?: string;
  model?: Record<string, unknown>;
}

export interface SliceMetrics {
  slice: string;
  method: string;
  psnr: number;
  ssim: number;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    detail: string,
  ) {
    super(detail);
  }
}

async function okOrThrow(res: Response): Promise<Response> {
  if (res.ok) return res;
  let detail = `${res.status} ${res.statusText}`;
  try {
    const body = (await res.json()) as { detail?: string };
    if (body.detail) detail = body.detail;
  } catch {
    /* non-JSON error body */
  }
  throw new ApiError(res.status, detail);
}

export class ApiClient {
  constructor(
    private readonly base = "",
    private readonly doFetch: typeof fetch = fetch,
  ) {}

  async info(): Promise<ServiceInfo> {
    const res = await okOrThrow(await this.doFetch(`${this.base}/v1/info`));
    return (await res.json()) as ServiceInfo;
  }

  async slice(
    o: Orientation,
    method: Method,
    opts: { corShift?: number; params?: Record<string, number> } = {},
  ): Promise<SliceResult> {
    const body: SliceRequestBody = {
      orientation: {
        origin: [...o.origin],
        u: [...o.u],
        v: [...o.v],
        width: o.width,
        height: o.height,
      },
      method,
      params: opts.params ?? {},
      cor_shift: opts.corShift ?? 0,
    };
    const res = await okOrThrow(
      await this.doFetch(`${this.base}/v1/slice`, {
        method: "POST",
        headers: {
          "content-type": "application/json",
          accept: "application/octet-stream",
        },
        body: JSON.stringify(body),
      }),
    );
    const buf = await res.arrayBuffer();
    if (buf.byteLength !== 4 * o.width * o.height) {
      throw new ApiError(500, "slice payload size does not match orientation");
    }
    return {
      data: new Float32Array(buf),
      width: o.width,
      height: o.height,
      min: Number(res.headers.get("X-Min") ?? "0"),
      max: Number(res.headers.get("X-Max") ?? "1"),
    };
  }

  async startTraining(params: TrainParams): Promise<string> {
    const res = await okOrThrow(
      await this.doFetch(`${this.base}/v1/train`, {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(params),
      }),
    );
    const body = (await res.json()) as { id: string };
    return body.id;
  }

  async trainStatus(id: string): Promise<TrainStatus> {
    const res = await okOrThrow(
      await this.doFetch(`${this.base}/v1/train/${id}`),
    );
    return (await res.json()) as TrainStatus;
  }

  async metrics(
    slice: string,
    method: Method,
    corShift = 0,
  ): Promise<SliceMetrics> {
    const res = await okOrThrow(
      await this.doFetch(
        `${this.base}/v1/metrics/${slice}?method=${method}&cor_shift=${corShift}`,
      ),
    );
    return (await res.json()) as SliceMetrics;
  }
}
