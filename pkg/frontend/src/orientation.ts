/**
 * Client-side orientation state: the single source of truth for the
 * currently viewed plane.  The server is stateless per request, so every
 * slice request carries the full origin + two in-plane axes.
 *
 * Interactive rotation accumulates floating-point drift, so the axes are
 * re-orthonormalized (Gram-Schmidt) before every use.
 */

export type Vec3 = [number, number, number];

export interface Orientation {
  origin: Vec3;
  u: Vec3;
  v: Vec3;
  width: number;
  height: number;
}

export function dot(a: Vec3, b: Vec3): number {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

export function cross(a: Vec3, b: Vec3): Vec3 {
  return [
    a[1] * b[2] - a[2] * b[1],
    a[2] * b[0] - a[0] * b[2],
    a[0] * b[1] - a[1] * b[0],
  ];
}

export function norm(a: Vec3): number {
  return Math.sqrt(dot(a, a));
}

export function scale(a: Vec3, s: number): Vec3 {
  return [a[0] * s, a[1] * s, a[2] * s];
}

export function add(a: Vec3, b: Vec3): Vec3 {
  return [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
}

export function sub(a: Vec3, b: Vec3): Vec3 {
  return [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
}

export function normalize(a: Vec3): Vec3 {
  const n = norm(a);
  if (n === 0) throw new Error("cannot normalize a zero vector");
  return scale(a, 1 / n);
}

/** Gram-Schmidt: returns unit-length, mutually orthogonal copies of (u, v). */
export function orthonormalize(u: Vec3, v: Vec3): { u: Vec3; v: Vec3 } {
  const uu = normalize(u);
  const vProj = sub(v, scale(uu, dot(v, uu)));
  if (norm(vProj) < 1e-12) {
    throw new Error("slice axes are parallel");
  }
  return { u: uu, v: normalize(vProj) };
}

/** Rodrigues rotation of `p` about unit `axis` by `angle` radians. */
export function rotateAbout(p: Vec3, axis: Vec3, angle: number): Vec3 {
  const k = normalize(axis);
  const c = Math.cos(angle);
  const s = Math.sin(angle);
  const kxp = cross(k, p);
  const kdp = dot(k, p);
  return add(
    add(scale(p, c), scale(kxp, s)),
    scale(k, kdp * (1 - c)),
  );
}

export type OrientationListener = (o: Orientation) => void;

/**
 * Mutable orientation store with change notification.  All mutation goes
 * through methods that re-orthonormalize, so listeners always observe a
 * valid plane.
 */
export class OrientationStore {
  private state: Orientation;
  private listeners: OrientationListener[] = [];

  constructor(initial: Orientation) {
    const { u, v } = orthonormalize(initial.u, initial.v);
    this.state = { ...initial, u, v };
  }

  get(): Orientation {
    return this.state;
  }

  subscribe(fn: OrientationListener): () => void {
    this.listeners.push(fn);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== fn);
    };
  }

  private commit(next: Orientation): void {
    const { u, v } = orthonormalize(next.u, next.v);
    this.state = { ...next, u, v };
    for (const fn of this.listeners) fn(this.state);
  }

  /**
   * Drag rotation: horizontal drag spins the plane about its vertical
   * in-plane axis, vertical drag about the horizontal one.  `dx`/`dy`
   * are in radians (the viewer maps pixels to radians).
   */
  rotate(dx: number, dy: number): void {
    const { u, v } = this.state;
    let nu = u;
    let nv = v;
    if (dx !== 0) {
      nu = rotateAbout(nu, v, dx);
    }
    if (dy !== 0) {
      nv = rotateAbout(nv, nu, dy);
    }
    this.commit({ ...this.state, u: nu, v: nv });
  }

  /** Translate along the plane normal (slice scrolling). */
  translateAlongNormal(delta: number): void {
    const n = cross(this.state.u, this.state.v);
    this.commit({ ...this.state, origin: add(this.state.origin, scale(n, delta)) });
  }

  /** Translate within the plane. */
  translateInPlane(du: number, dv: number): void {
    const shift = add(scale(this.state.u, du), scale(this.state.v, dv));
    this.commit({ ...this.state, origin: add(this.state.origin, shift) });
  }

  reset(to: Orientation): void {
    this.commit(to);
  }
}

export function axialOrientation(size: number): Orientation {
  return {
    origin: [0, 0, 0],
    u: [1, 0, 0],
    v: [0, 1, 0],
    width: size,
    height: size,
  };
}
