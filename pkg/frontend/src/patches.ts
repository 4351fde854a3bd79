/** Patch extraction: sliding grid plus foreground-biased sampling. */
import { Image, voxelIndex } from "./volume.js";
import { Rng } from "./prng.js";
import { TrainConfig, strideOf } from "./config.js";

/** Window starts along one axis with the given stride.
 *
 * The final window is shifted flush with the end when the stride does not
 * land there exactly, so every voxel is covered.
 */
export function axisStarts(n: number, patch: number, stride: number): number[] {
  if (patch > n) {
    throw new Error(`volume extent ${n} smaller than patch ${patch}`);
  }
  const starts: number[] = [];
  for (let s = 0; s + patch <= n; s += stride) starts.push(s);
  const last = starts[starts.length - 1];
  if (last + patch < n) starts.push(n - patch);
  return starts;
}

/** All patch origins of the sliding grid over a volume. */
export function gridOrigins(
  dims: [number, number, number],
  patch: [number, number, number],
  stride: [number, number, number],
): [number, number, number][] {
  const xs = axisStarts(dims[0], patch[0], stride[0]);
  const ys = axisStarts(dims[1], patch[1], stride[1]);
  const zs = axisStarts(dims[2], patch[2], stride[2]);
  const out: [number, number, number][] = [];
  for (const z of zs) for (const y of ys) for (const x of xs) out.push([x, y, z]);
  return out;
}

/** One training patch.
 *
 * x and y are laid out for tensor5d([1, px, py, pz, c]): row-major with
 * channels fastest, unlike the x-fastest volume they came from.
 */
export interface Patch {
  x: Float32Array;
  y: Float32Array;
  size: [number, number, number];
  channels: number;
  origin: [number, number, number];
  hasForeground: boolean;
}

export function extractPatch(
  img: Image,
  gt: Image,
  origin: [number, number, number],
  size: [number, number, number],
): Patch {
  const [px, py, pz] = size;
  const nc = img.channels;
  const x = new Float32Array(px * py * pz * nc);
  const y = new Float32Array(px * py * pz);
  let fg = false;
  for (let i = 0; i < px; i++) {
    for (let j = 0; j < py; j++) {
      for (let k = 0; k < pz; k++) {
        const row = ((i * py + j) * pz + k) * nc;
        for (let c = 0; c < nc; c++) {
          x[row + c] = img.data[voxelIndex(img, origin[0] + i, origin[1] + j, origin[2] + k, c)];
        }
        const g = gt.data[voxelIndex(gt, origin[0] + i, origin[1] + j, origin[2] + k)];
        y[(i * py + j) * pz + k] = g;
        if (g > 0) fg = true;
      }
    }
  }
  return { x, y, size: [px, py, pz], channels: nc, origin, hasForeground: fg };
}

function windowHasForeground(
  gt: Image,
  origin: [number, number, number],
  size: [number, number, number],
): boolean {
  for (let k = 0; k < size[2]; k++) {
    for (let j = 0; j < size[1]; j++) {
      const base = voxelIndex(gt, origin[0], origin[1] + j, origin[2] + k);
      for (let i = 0; i < size[0]; i++) {
        if (gt.data[base + i] > 0) return true;
      }
    }
  }
  return false;
}

/** Draw `count` patches from the sliding grid of one case.
 *
 * Background windows are admitted only while the emitted stream stays at
 * or above the configured foreground fraction; otherwise the draw is
 * rejected and repeated among foreground windows.  A ground truth with no
 * foreground at all cannot satisfy that constraint and is an error.
 */
export function samplePatches(
  img: Image,
  gt: Image,
  cfg: TrainConfig,
  rng: Rng,
  count: number,
): Patch[] {
  if (img.dims.some((d, i) => d !== gt.dims[i])) {
    throw new Error(`volume dims ${img.dims} != gt dims ${gt.dims}`);
  }
  if (img.channels !== cfg.inChannels) {
    throw new Error(`volume has ${img.channels} channels, config expects ${cfg.inChannels}`);
  }
  const stride = strideOf(cfg);
  const origins = gridOrigins(img.dims, cfg.patchSize, stride);
  const withFg: number[] = [];
  const fgAt: boolean[] = origins.map((o, idx) => {
    const has = windowHasForeground(gt, o, cfg.patchSize);
    if (has) withFg.push(idx);
    return has;
  });
  if (withFg.length === 0) {
    throw new Error("foreground constraint unsatisfiable: ground truth has no foreground voxel");
  }

  const out: Patch[] = [];
  let fgEmitted = 0;
  for (let n = 0; n < count; n++) {
    let idx = rng.int(origins.length);
    if (!fgAt[idx] && fgEmitted < cfg.fgFraction * (out.length + 1)) {
      idx = withFg[rng.int(withFg.length)];
    }
    const p = extractPatch(img, gt, origins[idx], cfg.patchSize);
    if (p.hasForeground) fgEmitted++;
    out.push(p);
  }
  return out;
}
