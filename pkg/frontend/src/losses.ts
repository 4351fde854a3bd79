/** Segmentation losses: soft dice, binary focal, and their mix.
 *
 * None of these tidy their intermediates: they run inside the gradient
 * scope of optimizer.minimize, which owns cleanup, and tidying there
 * would dispose tensors the tape still needs.
 */
import * as tf from "@tensorflow/tfjs";

export const DICE_SMOOTH = 1e-6;
export const FOCAL_EPS = 1e-7;

/** 1 - (2*sum(p*g)+s) / (sum(p)+sum(g)+s), computed over everything. */
export function diceLoss(p: tf.Tensor, g: tf.Tensor, smooth = DICE_SMOOTH): tf.Scalar {
  const inter = tf.sum(tf.mul(p, g));
  const denom = tf.add(tf.sum(p), tf.sum(g));
  const dice = tf.div(tf.add(tf.mul(inter, 2), smooth), tf.add(denom, smooth));
  return tf.sub(1, dice) as tf.Scalar;
}

/** Mean binary focal loss.
 *
 * Per voxel: -alpha*g*(1-p)^gamma*log(p) - (1-alpha)*(1-g)*p^gamma*log(1-p),
 * with p clamped away from 0 and 1.
 */
export function focalLoss(
  p: tf.Tensor,
  g: tf.Tensor,
  gamma = 2.0,
  alpha = 0.25,
  eps = FOCAL_EPS,
): tf.Scalar {
  const pc = tf.clipByValue(p, eps, 1 - eps);
  const pos = tf.mul(tf.mul(g, tf.pow(tf.sub(1, pc), gamma)), tf.log(pc)).mul(-alpha);
  const neg = tf
    .mul(tf.mul(tf.sub(1, g), tf.pow(pc, gamma)), tf.log(tf.sub(1, pc)))
    .mul(-(1 - alpha));
  return tf.mean(tf.add(pos, neg)) as tf.Scalar;
}

export interface LossParams {
  diceWeight: number;
  focalWeight: number;
  focalGamma: number;
  focalAlpha: number;
}

export function combinedLoss(p: tf.Tensor, g: tf.Tensor, params: LossParams): tf.Scalar {
  const d = diceLoss(p, g);
  const f = focalLoss(p, g, params.focalGamma, params.focalAlpha);
  return tf.add(tf.mul(d, params.diceWeight), tf.mul(f, params.focalWeight)) as tf.Scalar;
}

/** Hard dice between a probability map and 0/1 labels, plain arithmetic. */
export function hardDice(
  probs: Float32Array | number[],
  labels: Float32Array | number[],
  threshold = 0.5,
): number {
  let inter = 0;
  let np = 0;
  let ng = 0;
  for (let i = 0; i < probs.length; i++) {
    const p = probs[i] >= threshold ? 1 : 0;
    const g = labels[i] > 0 ? 1 : 0;
    np += p;
    ng += g;
    if (p && g) inter++;
  }
  if (np + ng === 0) return 1;
  return (2 * inter) / (np + ng);
}
