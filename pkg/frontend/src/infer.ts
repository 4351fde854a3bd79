/** Sliding-window inference and NIfTI export.
 *
 * Uses the training patch geometry, averages probabilities where windows
 * overlap, binarizes at the configured threshold, and writes a uint8 mask
 * the evaluation CLI accepts directly.
 */
import * as tf from "@tensorflow/tfjs";
import { Image, voxelIndex } from "./volume.js";
import { TrainConfig, strideOf } from "./config.js";
import { gridOrigins } from "./patches.js";
import { UNet3D } from "./unet.js";
import { writeMaskFile } from "./nifti.js";

/** Probability map over a whole volume, window-averaged. */
export function inferProbabilities(model: UNet3D, img: Image, cfg: TrainConfig): Float32Array {
  if (img.channels !== model.inChannels) {
    throw new Error(
      `channel mismatch: checkpoint expects ${model.inChannels}, volume has ${img.channels}`,
    );
  }
  const [px, py, pz] = cfg.patchSize;
  const origins = gridOrigins(img.dims, cfg.patchSize, strideOf(cfg));
  const nvox = img.dims[0] * img.dims[1] * img.dims[2];
  const sum = new Float64Array(nvox);
  const hits = new Float64Array(nvox);

  const nc = img.channels;
  for (const [ox, oy, oz] of origins) {
    const flat = new Float32Array(px * py * pz * nc);
    for (let i = 0; i < px; i++) {
      for (let j = 0; j < py; j++) {
        for (let k = 0; k < pz; k++) {
          const row = ((i * py + j) * pz + k) * nc;
          for (let c = 0; c < nc; c++) {
            flat[row + c] = img.data[voxelIndex(img, ox + i, oy + j, oz + k, c)];
          }
        }
      }
    }
    const probs = tf.tidy(() => model.forward(tf.tensor5d(flat, [1, px, py, pz, nc])));
    const pdata = probs.dataSync() as Float32Array;
    probs.dispose();
    for (let i = 0; i < px; i++) {
      for (let j = 0; j < py; j++) {
        for (let k = 0; k < pz; k++) {
          const vi = voxelIndex(img, ox + i, oy + j, oz + k);
          sum[vi] += pdata[(i * py + j) * pz + k];
          hits[vi] += 1;
        }
      }
    }
  }

  const out = new Float32Array(nvox);
  for (let i = 0; i < nvox; i++) out[i] = hits[i] > 0 ? sum[i] / hits[i] : 0;
  return out;
}

/** Binary prediction with the source volume's geometry. */
export function inferMask(model: UNet3D, img: Image, cfg: TrainConfig): Image {
  const probs = inferProbabilities(model, img, cfg);
  const data = new Float32Array(probs.length);
  for (let i = 0; i < probs.length; i++) {
    data[i] = probs[i] >= cfg.binarizeThreshold ? 1 : 0;
  }
  return {
    data,
    dims: img.dims.slice() as [number, number, number],
    channels: 1,
    spacing: img.spacing.slice() as [number, number, number],
    origin: img.origin.slice() as [number, number, number],
  };
}

/** Predict and write a mask file next to whatever geometry came in. */
export function exportPrediction(model: UNet3D, img: Image, cfg: TrainConfig, path: string): Image {
  const mask = inferMask(model, img, cfg);
  writeMaskFile(mask, path);
  return mask;
}
