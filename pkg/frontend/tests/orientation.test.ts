import { describe, expect, it } from "vitest";
import {
  OrientationStore,
  axialOrientation,
  cross,
  dot,
  norm,
  orthonormalize,
  rotateAbout,
  Vec3,
} from "../src/orientation.js";

describe("orthonormalize", () => {
  it("returns unit, orthogonal axes", () => {
    const { u, v } = orthonormalize([2, 0, 0], [1, 3, 0]);
    expect(norm(u)).toBeCloseTo(1, 12);
    expect(norm(v)).toBeCloseTo(1, 12);
    expect(dot(u, v)).toBeCloseTo(0, 12);
  });

  it("preserves already-orthonormal axes", () => {
    const { u, v } = orthonormalize([1, 0, 0], [0, 1, 0]);
    expect(u).toEqual([1, 0, 0]);
    expect(v).toEqual([0, 1, 0]);
  });

  it("rejects parallel axes", () => {
    expect(() => orthonormalize([1, 1, 0], [2, 2, 0])).toThrow(/parallel/);
  });
});

describe("rotateAbout", () => {
  it("matches a known quarter turn about z", () => {
    const r = rotateAbout([1, 0, 0], [0, 0, 1], Math.PI / 2);
    expect(r[0]).toBeCloseTo(0, 12);
    expect(r[1]).toBeCloseTo(1, 12);
    expect(r[2]).toBeCloseTo(0, 12);
  });

  it("preserves vector length", () => {
    const p: Vec3 = [0.3, -1.2, 2.5];
    const r = rotateAbout(p, [1, 2, 3], 0.7);
    expect(norm(r)).toBeCloseTo(norm(p), 12);
  });

  it("leaves vectors along the axis fixed", () => {
    const r = rotateAbout([0, 0, 2], [0, 0, 1], 1.1);
    expect(r[0]).toBeCloseTo(0, 12);
    expect(r[1]).toBeCloseTo(0, 12);
    expect(r[2]).toBeCloseTo(2, 12);
  });
});

describe("OrientationStore", () => {
  it("stays orthonormal after many small drag rotations", () => {
    const store = new OrientationStore(axialOrientation(128));
    // Simulate an erratic drag session: thousands of tiny rotations.
    let x = 12345;
    const rand = () => {
      // xorshift: deterministic pseudo-random drag deltas
      x ^= x << 13;
      x ^= x >>> 17;
      x ^= x << 5;
      return ((x >>> 0) / 0xffffffff - 0.5) * 0.05;
    };
    for (let i = 0; i < 5000; i++) {
      store.rotate(rand(), rand());
    }
    const { u, v } = store.get();
    expect(norm(u)).toBeCloseTo(1, 10);
    expect(norm(v)).toBeCloseTo(1, 10);
    expect(dot(u, v)).toBeCloseTo(0, 10);
  });

  it("translateAlongNormal moves along u x v", () => {
    const store = new OrientationStore(axialOrientation(64));
    store.translateAlongNormal(3);
    expect(store.get().origin).toEqual([0, 0, 3]);
    store.translateAlongNormal(-1);
    expect(store.get().origin).toEqual([0, 0, 2]);
  });

  it("translateInPlane moves within the plane only", () => {
    const store = new OrientationStore(axialOrientation(64));
    store.translateInPlane(2, -5);
    const o = store.get();
    const n = cross(o.u, o.v);
    expect(dot(o.origin, n)).toBeCloseTo(0, 12);
    expect(o.origin).toEqual([2, -5, 0]);
  });

  it("notifies subscribers on every change and supports unsubscribe", () => {
    const store = new OrientationStore(axialOrientation(64));
    let calls = 0;
    const unsub = store.subscribe(() => calls++);
    store.rotate(0.1, 0);
    store.translateAlongNormal(1);
    expect(calls).toBe(2);
    unsub();
    store.rotate(0.1, 0);
    expect(calls).toBe(2);
  });

  it("reset restores the initial plane", () => {
    const store = new OrientationStore(axialOrientation(64));
    store.rotate(0.5, 0.3);
    store.translateAlongNormal(7);
    store.reset(axialOrientation(64));
    expect(store.get()).toEqual(axialOrientation(64));
  });
});
