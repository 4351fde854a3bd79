/** Patch-level augmentation: flips, right-angle rotations, smoothing.
 *
 * Rotations are multiples of 90 degrees in a random axis pair, so images
 * and labels transform exactly with no resampling.  Magnitudes here are
 * harness choices; only the kinds are prescribed.
 */
import { Patch } from "./patches.js";
import { Rng } from "./prng.js";
import { AugmentConfig } from "./config.js";

type Dims = [number, number, number];

function at(dims: Dims, nc: number, i: number, j: number, k: number, c: number): number {
  return ((i * dims[1] + j) * dims[2] + k) * nc + c;
}

function mapVoxels(
  src: Float32Array,
  dims: Dims,
  nc: number,
  f: (i: number, j: number, k: number) => [number, number, number],
): Float32Array {
  const out = new Float32Array(src.length);
  for (let i = 0; i < dims[0]; i++) {
    for (let j = 0; j < dims[1]; j++) {
      for (let k = 0; k < dims[2]; k++) {
        const [si, sj, sk] = f(i, j, k);
        for (let c = 0; c < nc; c++) {
          out[at(dims, nc, i, j, k, c)] = src[at(dims, nc, si, sj, sk, c)];
        }
      }
    }
  }
  return out;
}

export function flipAxis(data: Float32Array, dims: Dims, nc: number, axis: number): Float32Array {
  const n = dims[axis] - 1;
  return mapVoxels(data, dims, nc, (i, j, k) => {
    const idx: Dims = [i, j, k];
    idx[axis] = n - idx[axis];
    return idx;
  });
}

/** Rotate 90 degrees in the (a,b) plane; requires dims[a] == dims[b]. */
export function rot90(data: Float32Array, dims: Dims, nc: number, a: number, b: number): Float32Array {
  if (dims[a] !== dims[b]) {
    throw new Error(`rot90 needs square plane, got ${dims[a]}x${dims[b]}`);
  }
  const n = dims[a] - 1;
  return mapVoxels(data, dims, nc, (i, j, k) => {
    const idx: Dims = [i, j, k];
    const u = idx[a];
    idx[a] = idx[b];
    idx[b] = n - u;
    return idx;
  });
}

/** Separable gaussian smoothing with reflect boundaries (image only). */
export function gaussianSmooth(
  data: Float32Array,
  dims: Dims,
  nc: number,
  sigma: number,
): Float32Array {
  if (sigma <= 0) return data.slice();
  const radius = Math.max(1, Math.ceil(2 * sigma));
  const kernel = new Float64Array(2 * radius + 1);
  let sum = 0;
  for (let t = -radius; t <= radius; t++) {
    const w = Math.exp(-(t * t) / (2 * sigma * sigma));
    kernel[t + radius] = w;
    sum += w;
  }
  for (let t = 0; t < kernel.length; t++) kernel[t] /= sum;

  let cur = data.slice();
  for (let axis = 0; axis < 3; axis++) {
    const next = new Float32Array(cur.length);
    const n = dims[axis];
    for (let i = 0; i < dims[0]; i++) {
      for (let j = 0; j < dims[1]; j++) {
        for (let k = 0; k < dims[2]; k++) {
          for (let c = 0; c < nc; c++) {
            let acc = 0;
            const idx: Dims = [i, j, k];
            for (let t = -radius; t <= radius; t++) {
              let p = idx[axis] + t;
              if (p < 0) p = -p - 1;
              if (p >= n) p = 2 * n - p - 1;
              const s: Dims = [i, j, k];
              s[axis] = p;
              acc += kernel[t + radius] * cur[at(dims, nc, s[0], s[1], s[2], c)];
            }
            next[at(dims, nc, i, j, k, c)] = acc;
          }
        }
      }
    }
    cur = next;
  }
  return cur;
}

/** Apply the configured augmentations to one patch, labels kept aligned. */
export function applyAugment(patch: Patch, cfg: AugmentConfig, rng: Rng): Patch {
  let x = patch.x;
  let y = patch.y;
  const dims = patch.size;
  const nc = patch.channels;

  if (cfg.flip) {
    for (let axis = 0; axis < 3; axis++) {
      if (rng.next() < 0.5) {
        x = flipAxis(x, dims, nc, axis);
        y = flipAxis(y, dims, 1, axis);
      }
    }
  }
  if (cfg.rotate) {
    const planes: [number, number][] = [
      [0, 1],
      [0, 2],
      [1, 2],
    ];
    const [a, b] = planes[rng.int(3)];
    if (dims[a] === dims[b]) {
      const turns = rng.int(4);
      for (let t = 0; t < turns; t++) {
        x = rot90(x, dims, nc, a, b);
        y = rot90(y, dims, 1, a, b);
      }
    }
  }
  if (cfg.smoothSigma > 0 && rng.next() < cfg.smoothProb) {
    x = gaussianSmooth(x, dims, nc, cfg.smoothSigma);
    // labels stay crisp
  }
  return { ...patch, x, y };
}
