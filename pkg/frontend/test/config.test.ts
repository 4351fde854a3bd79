import { describe, it, expect } from "vitest";
import {
  DEFAULT_CONFIG,
  makeConfig,
  strideOf,
  widthsOf,
  configHash,
  armHash,
} from "../src/config.js";

describe("defaults", () => {
  it("carry the published training figures", () => {
    const cfg = makeConfig();
    expect(cfg.patchSize).toEqual([64, 64, 64]);
    expect(cfg.overlap).toBe(0.25);
    expect(cfg.fgFraction).toBe(0.85);
    expect(cfg.depth).toBe(4);
    expect(widthsOf(cfg)).toEqual([16, 32, 64, 128]);
    expect(cfg.lr).toBe(1e-4);
    expect(cfg.diceWeight).toBe(0.5);
    expect(cfg.focalWeight).toBe(0.5);
    expect(cfg.focalGamma).toBe(2.0);
    expect(cfg.focalAlpha).toBe(0.25);
    expect(cfg.binarizeThreshold).toBe(0.5);
  });

  it("give a 48-voxel stride from 25% overlap", () => {
    expect(strideOf(makeConfig())).toEqual([48, 48, 48]);
  });
});

describe("makeConfig", () => {
  it("applies overrides without touching the rest", () => {
    const cfg = makeConfig({ inChannels: 7, seed: 3 });
    expect(cfg.inChannels).toBe(7);
    expect(cfg.seed).toBe(3);
    expect(cfg.lr).toBe(DEFAULT_CONFIG.lr);
  });

  it("rejects unknown keys", () => {
    expect(() => makeConfig({ batchSize: 2 } as never)).toThrow(/unknown config key/);
    expect(() => makeConfig({ augment: { blur: 1 } } as never)).toThrow(/augment\.blur/);
  });

  it("rejects a patch the pooling pyramid cannot divide", () => {
    expect(() => makeConfig({ patchSize: [20, 64, 64] })).toThrow(/not divisible/);
  });

  it("rejects nonsense values", () => {
    expect(() => makeConfig({ overlap: 1.0 })).toThrow();
    expect(() => makeConfig({ lr: 0 })).toThrow();
    expect(() => makeConfig({ inChannels: 0 })).toThrow();
  });

  it("does not share the patchSize array with the caller", () => {
    const patch: [number, number, number] = [32, 32, 32];
    const cfg = makeConfig({ patchSize: patch });
    patch[0] = 999;
    expect(cfg.patchSize[0]).toBe(32);
  });
});

describe("config hashing", () => {
  it("the two experiment arms differ only in channel count", () => {
    const raw = makeConfig({ inChannels: 1, seed: 42 });
    const fused = makeConfig({ inChannels: 7, seed: 42 });
    expect(configHash(raw)).not.toBe(configHash(fused));
    expect(armHash(raw)).toBe(armHash(fused));
  });

  it("armHash still sees every other field", () => {
    const a = makeConfig({ seed: 1 });
    const b = makeConfig({ seed: 1, lr: 2e-4 });
    expect(armHash(a)).not.toBe(armHash(b));
  });

  it("is stable across key order", () => {
    const a = makeConfig({ seed: 5, lr: 1e-3 });
    const b = makeConfig({ lr: 1e-3, seed: 5 });
    expect(configHash(a)).toBe(configHash(b));
  });
});
