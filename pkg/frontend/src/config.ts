/** Training configuration.
 *
 * The defaults are the published setup this harness miniaturizes: 64^3
 * patches with 25% overlap, at least 85% foreground patches, a 4-level
 * U-Net with widths doubling 16 to 128, Adam at 1e-4, and an equal-weight
 * dice + focal loss.  Tests and toy runs may override any field, but only
 * through explicit overrides passed to makeConfig; nothing is silently
 * rescaled.
 */
import { createHash } from "node:crypto";

export interface AugmentConfig {
  flip: boolean;
  rotate: boolean;
  smoothSigma: number; // voxels; 0 disables
  smoothProb: number;
}

export interface TrainConfig {
  patchSize: [number, number, number];
  overlap: number;
  fgFraction: number;
  depth: number;
  baseWidth: number;
  inChannels: number;
  lr: number;
  diceWeight: number;
  focalWeight: number;
  focalGamma: number;
  focalAlpha: number;
  binarizeThreshold: number;
  epochs: number;
  stepsPerEpoch: number;
  seed: number;
  augment: AugmentConfig;
}

export const DEFAULT_CONFIG: TrainConfig = {
  patchSize: [64, 64, 64],
  overlap: 0.25,
  fgFraction: 0.85,
  depth: 4,
  baseWidth: 16,
  inChannels: 1,
  lr: 1e-4,
  diceWeight: 0.5,
  focalWeight: 0.5,
  focalGamma: 2.0,
  focalAlpha: 0.25,
  binarizeThreshold: 0.5,
  epochs: 200,
  stepsPerEpoch: 1,
  seed: 0,
  augment: { flip: true, rotate: true, smoothSigma: 0.5, smoothProb: 0.15 },
};

export type ConfigOverrides = Partial<Omit<TrainConfig, "augment">> & {
  augment?: Partial<AugmentConfig>;
};

export function makeConfig(overrides: ConfigOverrides = {}): TrainConfig {
  const knownTop = new Set(Object.keys(DEFAULT_CONFIG));
  for (const k of Object.keys(overrides)) {
    if (!knownTop.has(k)) throw new Error(`unknown config key: ${k}`);
  }
  const aug = overrides.augment ?? {};
  const knownAug = new Set(Object.keys(DEFAULT_CONFIG.augment));
  for (const k of Object.keys(aug)) {
    if (!knownAug.has(k)) throw new Error(`unknown config key: augment.${k}`);
  }
  const cfg: TrainConfig = {
    ...DEFAULT_CONFIG,
    ...overrides,
    patchSize: (overrides.patchSize ?? DEFAULT_CONFIG.patchSize).slice() as [
      number,
      number,
      number,
    ],
    augment: { ...DEFAULT_CONFIG.augment, ...aug },
  };
  validateConfig(cfg);
  return cfg;
}

export function validateConfig(cfg: TrainConfig): void {
  if (cfg.patchSize.length !== 3 || cfg.patchSize.some((p) => p < 1)) {
    throw new Error(`bad patchSize ${cfg.patchSize}`);
  }
  const div = 1 << (cfg.depth - 1);
  for (const p of cfg.patchSize) {
    if (p % div !== 0) {
      throw new Error(`patch dim ${p} not divisible by ${div} (depth ${cfg.depth})`);
    }
  }
  if (!(cfg.overlap >= 0 && cfg.overlap < 1)) throw new Error(`overlap ${cfg.overlap} not in [0,1)`);
  if (!(cfg.fgFraction >= 0 && cfg.fgFraction <= 1)) {
    throw new Error(`fgFraction ${cfg.fgFraction} not in [0,1]`);
  }
  if (cfg.depth < 1) throw new Error("depth must be >= 1");
  if (cfg.baseWidth < 1) throw new Error("baseWidth must be >= 1");
  if (cfg.inChannels < 1) throw new Error("inChannels must be >= 1");
  if (!(cfg.lr > 0)) throw new Error("lr must be positive");
  if (cfg.epochs < 1 || cfg.stepsPerEpoch < 1) throw new Error("epochs/stepsPerEpoch must be >= 1");
  const ws = cfg.diceWeight + cfg.focalWeight;
  if (!(ws > 0)) throw new Error("loss weights must not both be zero");
}

/** Sliding-window stride per axis: patch * (1 - overlap), rounded. */
export function strideOf(cfg: TrainConfig): [number, number, number] {
  return cfg.patchSize.map((p) => Math.max(1, Math.round(p * (1 - cfg.overlap)))) as [
    number,
    number,
    number,
  ];
}

/** Encoder widths, shallow to deep: base, 2*base, ... */
export function widthsOf(cfg: TrainConfig): number[] {
  const ws: number[] = [];
  for (let i = 0; i < cfg.depth; i++) ws.push(cfg.baseWidth << i);
  return ws;
}

function canonical(v: unknown): unknown {
  if (Array.isArray(v)) return v.map(canonical);
  if (v !== null && typeof v === "object") {
    const out: Record<string, unknown> = {};
    for (const k of Object.keys(v as object).sort()) {
      out[k] = canonical((v as Record<string, unknown>)[k]);
    }
    return out;
  }
  return v;
}

export function configHash(cfg: TrainConfig): string {
  const blob = JSON.stringify(canonical(cfg));
  return createHash("sha256").update(blob).digest("hex");
}

/** Hash of everything except the input channel count.
 *
 * The two experiment arms (raw volume vs 7-channel stack) must differ in
 * nothing else; training logs this value so the claim is checkable.
 */
export function armHash(cfg: TrainConfig): string {
  const stripped = { ...cfg, inChannels: null };
  const blob = JSON.stringify(canonical(stripped));
  return createHash("sha256").update(blob).digest("hex");
}
