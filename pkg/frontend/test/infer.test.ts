import { describe, it, expect } from "vitest";
import { UNet3D } from "../src/unet.js";
import { makeConfig } from "../src/config.js";
import { makeImage } from "../src/volume.js";
import { inferProbabilities, inferMask } from "../src/infer.js";
import { Rng } from "../src/prng.js";

const cfg = makeConfig({ patchSize: [8, 8, 8], baseWidth: 4, inChannels: 1 });

function noisyImage(dims: [number, number, number], channels: number, seed: number) {
  const img = makeImage(dims, channels, [0.7, 0.7, 0.7], [1, 2, 3]);
  const rng = new Rng(seed);
  for (let i = 0; i < img.data.length; i++) img.data[i] = rng.normal();
  return img;
}

describe("inferMask", () => {
  it("output geometry equals input geometry", () => {
    const model = new UNet3D(1, 4, 4, 2);
    const img = noisyImage([13, 10, 8], 1, 5);
    const mask = inferMask(model, img, cfg);
    expect(mask.dims).toEqual(img.dims);
    expect(mask.spacing).toEqual(img.spacing);
    expect(mask.origin).toEqual(img.origin);
    expect(mask.channels).toBe(1);
    for (const v of mask.data) expect(v === 0 || v === 1).toBe(true);
    model.dispose();
  });

  it("window-averaged probabilities stay in [0,1] and cover every voxel", () => {
    const model = new UNet3D(1, 4, 4, 3);
    const img = noisyImage([13, 10, 8], 1, 6);
    const probs = inferProbabilities(model, img, cfg);
    expect(probs.length).toBe(13 * 10 * 8);
    for (const p of probs) {
      expect(p).toBeGreaterThan(0);
      expect(p).toBeLessThan(1);
    }
    model.dispose();
  });

  it("rejects a checkpoint/channel mismatch", () => {
    const model = new UNet3D(1, 4, 4, 2);
    const img = noisyImage([8, 8, 8], 7, 7);
    expect(() => inferMask(model, img, cfg)).toThrow(/channel mismatch/);
    model.dispose();
  });

  it("rejects a volume smaller than the patch", () => {
    const model = new UNet3D(1, 4, 4, 2);
    const img = noisyImage([6, 8, 8], 1, 8);
    expect(() => inferMask(model, img, cfg)).toThrow(/smaller than patch/);
    model.dispose();
  });
});
