/** 3D U-Net built from op-level tfjs kernels.
 *
 * Encoder of `depth` levels, widths doubling from `baseWidth`, two 3^3
 * convolutions per level, 2x max pooling between levels, then a mirrored
 * decoder with nearest-neighbor upsampling, skip concatenation, and a
 * sigmoid 1^3 head.  Weights live in explicit tf.variables so training,
 * serialization, and determinism stay under our control.
 */
import * as tf from "@tensorflow/tfjs";
import { Rng } from "./prng.js";

interface Conv {
  w: tf.Variable;
  b: tf.Variable;
}

function heTensor(shape: number[], rng: Rng): tf.Tensor {
  const fanIn = shape[0] * shape[1] * shape[2] * shape[3];
  const std = Math.sqrt(2 / fanIn);
  const data = new Float32Array(shape.reduce((a, s) => a * s, 1));
  for (let i = 0; i < data.length; i++) data[i] = std * rng.normal();
  return tf.tensor(data, shape);
}

function makeConv(kIn: number, kOut: number, ksize: number, rng: Rng): Conv {
  return {
    w: tf.variable(heTensor([ksize, ksize, ksize, kIn, kOut], rng)),
    b: tf.variable(tf.zeros([kOut])),
  };
}

function conv3(x: tf.Tensor5D, c: Conv, relu = true): tf.Tensor5D {
  const y = tf.add(tf.conv3d(x, c.w as tf.Tensor5D, 1, "same"), c.b);
  return (relu ? tf.relu(y) : y) as tf.Tensor5D;
}

/** 2x max pooling per axis via reshape + max; dims must be even. */
function pool2(x: tf.Tensor5D): tf.Tensor5D {
  let [b, d, h, w, c] = x.shape;
  let r = x.reshape([b, d / 2, 2, h * w * c]).max(2).reshape([b, d / 2, h, w, c]);
  [b, d, h, w, c] = r.shape as [number, number, number, number, number];
  r = r.reshape([b * d, h / 2, 2, w * c]).max(2).reshape([b, d, h / 2, w, c]);
  [b, d, h, w, c] = r.shape as [number, number, number, number, number];
  r = r.reshape([b * d * h, w / 2, 2, c]).max(2).reshape([b, d, h, w / 2, c]);
  return r as tf.Tensor5D;
}

/** 2x nearest-neighbor upsampling per axis via reshape + tile. */
function up2(x: tf.Tensor5D): tf.Tensor5D {
  let [b, d, h, w, c] = x.shape;
  let r = x
    .reshape([b, d, 1, h * w * c])
    .tile([1, 1, 2, 1])
    .reshape([b, 2 * d, h, w, c]);
  [b, d, h, w, c] = r.shape as [number, number, number, number, number];
  r = r
    .reshape([b * d, h, 1, w * c])
    .tile([1, 1, 2, 1])
    .reshape([b, d, 2 * h, w, c]);
  [b, d, h, w, c] = r.shape as [number, number, number, number, number];
  r = r
    .reshape([b * d * h, w, 1, c])
    .tile([1, 1, 2, 1])
    .reshape([b, d, h, 2 * w, c]);
  return r as tf.Tensor5D;
}

export interface Checkpoint {
  inChannels: number;
  depth: number;
  baseWidth: number;
  shapes: number[][];
  /** All weights concatenated, float32 little-endian, base64. */
  weights: string;
}

export class UNet3D {
  readonly inChannels: number;
  readonly depth: number;
  readonly baseWidth: number;
  private encoder: [Conv, Conv][] = [];
  private decoder: [Conv, Conv][] = [];
  private head: Conv;

  constructor(inChannels: number, depth: number, baseWidth: number, seed = 0) {
    if (depth < 2) throw new Error("depth must be >= 2");
    this.inChannels = inChannels;
    this.depth = depth;
    this.baseWidth = baseWidth;
    const rng = new Rng(seed ^ 0x5eed);
    const widths: number[] = [];
    for (let i = 0; i < depth; i++) widths.push(baseWidth << i);

    let prev = inChannels;
    for (let i = 0; i < depth; i++) {
      this.encoder.push([makeConv(prev, widths[i], 3, rng), makeConv(widths[i], widths[i], 3, rng)]);
      prev = widths[i];
    }
    for (let i = depth - 2; i >= 0; i--) {
      const cat = widths[i + 1] + widths[i]; // upsampled deeper + skip
      this.decoder.push([makeConv(cat, widths[i], 3, rng), makeConv(widths[i], widths[i], 3, rng)]);
    }
    this.head = makeConv(widths[0], 1, 1, rng);
  }

  /** [kx, ky, kz, inChannels, baseWidth]; the channel count is visible here. */
  firstLayerShape(): number[] {
    return this.encoder[0][0].w.shape.slice();
  }

  variables(): tf.Variable[] {
    const vars: tf.Variable[] = [];
    for (const [a, b] of this.encoder) vars.push(a.w, a.b, b.w, b.b);
    for (const [a, b] of this.decoder) vars.push(a.w, a.b, b.w, b.b);
    vars.push(this.head.w, this.head.b);
    return vars;
  }

  paramCount(): number {
    return this.variables().reduce((n, v) => n + v.size, 0);
  }

  /** Probabilities in [0,1], same spatial shape as the input.
   *
   * Spatial dims must be divisible by 2^(depth-1) so pooling stays exact.
   */
  forward(x: tf.Tensor5D): tf.Tensor5D {
    const div = 1 << (this.depth - 1);
    for (const d of x.shape.slice(1, 4)) {
      if (d % div !== 0) {
        throw new Error(`input dim ${d} not divisible by ${div} (depth ${this.depth})`);
      }
    }
    if (x.shape[4] !== this.inChannels) {
      throw new Error(`channel mismatch: model expects ${this.inChannels}, input has ${x.shape[4]}`);
    }
    // no tf.tidy here: this runs inside optimizer.minimize's gradient
    // scope during training, and disposing intermediates there breaks
    // backprop; inference callers wrap the call in their own tidy
    const skips: tf.Tensor5D[] = [];
    let cur = x;
    for (let i = 0; i < this.depth; i++) {
      if (i > 0) cur = pool2(cur);
      cur = conv3(cur, this.encoder[i][0]);
      cur = conv3(cur, this.encoder[i][1]);
      if (i < this.depth - 1) skips.push(cur);
    }
    for (let d = 0; d < this.decoder.length; d++) {
      const skip = skips[skips.length - 1 - d];
      cur = tf.concat([up2(cur), skip], 4) as tf.Tensor5D;
      cur = conv3(cur, this.decoder[d][0]);
      cur = conv3(cur, this.decoder[d][1]);
    }
    return tf.sigmoid(conv3(cur, this.head, false)) as tf.Tensor5D;
  }

  dispose(): void {
    for (const v of this.variables()) v.dispose();
  }

  toCheckpoint(): Checkpoint {
    const vars = this.variables();
    const shapes = vars.map((v) => v.shape.slice());
    const total = vars.reduce((n, v) => n + v.size, 0);
    const flat = new Float32Array(total);
    let off = 0;
    for (const v of vars) {
      flat.set(v.dataSync() as Float32Array, off);
      off += v.size;
    }
    const weights = Buffer.from(flat.buffer, flat.byteOffset, flat.byteLength).toString("base64");
    return {
      inChannels: this.inChannels,
      depth: this.depth,
      baseWidth: this.baseWidth,
      shapes,
      weights,
    };
  }

  static fromCheckpoint(ckpt: Checkpoint): UNet3D {
    const model = new UNet3D(ckpt.inChannels, ckpt.depth, ckpt.baseWidth, 0);
    const vars = model.variables();
    if (vars.length !== ckpt.shapes.length) {
      throw new Error(`checkpoint has ${ckpt.shapes.length} tensors, model wants ${vars.length}`);
    }
    const raw = Buffer.from(ckpt.weights, "base64");
    // pooled Buffers are not 4-byte aligned in general, so copy first
    const aligned = new Uint8Array(raw.length);
    aligned.set(raw);
    const flat = new Float32Array(aligned.buffer);
    let off = 0;
    for (let i = 0; i < vars.length; i++) {
      const v = vars[i];
      if (v.shape.join(",") !== ckpt.shapes[i].join(",")) {
        throw new Error(`tensor ${i} shape ${ckpt.shapes[i]} does not match ${v.shape}`);
      }
      v.assign(tf.tensor(flat.slice(off, off + v.size), v.shape));
      off += v.size;
    }
    if (off !== flat.length) {
      throw new Error(`checkpoint weight count ${flat.length} != expected ${off}`);
    }
    return model;
  }
}
