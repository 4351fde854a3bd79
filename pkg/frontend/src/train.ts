/** Training loop: foreground-biased patches, Adam, dice + focal loss. */
import * as tf from "@tensorflow/tfjs";
import * as fs from "node:fs";
import { Image } from "./volume.js";
import { Rng } from "./prng.js";
import { TrainConfig, armHash, configHash } from "./config.js";
import { Patch, samplePatches } from "./patches.js";
import { applyAugment } from "./augment.js";
import { combinedLoss, hardDice } from "./losses.js";
import { UNet3D, Checkpoint } from "./unet.js";
import { inferProbabilities } from "./infer.js";

export class TrainingDiverged extends Error {
  epoch: number;
  lastLosses: number[];

  constructor(epoch: number, lastLosses: number[]) {
    super(
      `loss became non-finite at epoch ${epoch}; ` +
        `last losses: [${lastLosses.map((l) => l.toPrecision(4)).join(", ")}]`,
    );
    this.name = "TrainingDiverged";
    this.epoch = epoch;
    this.lastLosses = lastLosses;
  }
}

export interface EpochRecord {
  epoch: number;
  loss: number;
  dice: number;
}

export interface RunManifest {
  config: TrainConfig;
  configHash: string;
  armHash: string;
  epochsRun: number;
  finalLoss: number;
  /** Hard dice of the finished model over the whole training volume,
   *  measured through the same sliding-window path that exports use. */
  finalTrainDice: number;
  paramCount: number;
}

export interface TrainResult {
  model: UNet3D;
  curves: EpochRecord[];
  manifest: RunManifest;
}

function patchTensors(p: Patch): { xs: tf.Tensor5D; ys: tf.Tensor5D } {
  const [px, py, pz] = p.size;
  const xs = tf.tensor5d(p.x, [1, px, py, pz, p.channels]);
  const ys = tf.tensor5d(p.y, [1, px, py, pz, 1]);
  return { xs, ys };
}

export interface TrainOptions {
  /** Stop once the whole-volume training dice reaches this value.
   *
   * The cheap per-epoch patch dice acts as a trigger; the stop only
   * happens after a full sliding-window pass confirms it, since the
   * patch stream is foreground-biased and flatters the model.
   */
  stopAtDice?: number;
  quiet?: boolean;
}

/** Train a fresh U-Net on one (volume, ground truth) pair.
 *
 * Deterministic for a fixed config: the seed drives weight init, patch
 * draws, and augmentation.  A non-finite loss aborts immediately rather
 * than writing a poisoned checkpoint.
 */
export function train(img: Image, gt: Image, cfg: TrainConfig, opts: TrainOptions = {}): TrainResult {
  if (img.channels !== cfg.inChannels) {
    throw new Error(`volume has ${img.channels} channels, config expects ${cfg.inChannels}`);
  }
  const hash = configHash(cfg);
  const arm = armHash(cfg);
  if (!opts.quiet) {
    console.log(`train: config ${hash.slice(0, 12)} arm ${arm.slice(0, 12)} (channels excluded)`);
  }

  const rng = new Rng(cfg.seed);
  const model = new UNet3D(cfg.inChannels, cfg.depth, cfg.baseWidth, cfg.seed);
  const optimizer = tf.train.adam(cfg.lr);
  const curves: EpochRecord[] = [];
  const lossTail: number[] = [];

  const volumeDice = () =>
    hardDice(inferProbabilities(model, img, cfg), gt.data, cfg.binarizeThreshold);

  let epochsRun = 0;
  let nextConfirm = 0;
  for (let epoch = 0; epoch < cfg.epochs; epoch++) {
    const patches = samplePatches(img, gt, cfg, rng, cfg.stepsPerEpoch);
    let lossSum = 0;
    let diceSum = 0;
    for (let p of patches) {
      if (cfg.augment.flip || cfg.augment.rotate || cfg.augment.smoothSigma > 0) {
        p = applyAugment(p, cfg.augment, rng);
      }
      const { xs, ys } = patchTensors(p);
      const lossT = optimizer.minimize(
        () =>
          combinedLoss(model.forward(xs), ys, {
            diceWeight: cfg.diceWeight,
            focalWeight: cfg.focalWeight,
            focalGamma: cfg.focalGamma,
            focalAlpha: cfg.focalAlpha,
          }),
        true,
        model.variables(),
      ) as tf.Scalar;
      const lossVal = lossT.dataSync()[0];
      lossT.dispose();

      const probs = tf.tidy(() => model.forward(xs));
      const dice = hardDice(probs.dataSync() as Float32Array, p.y, cfg.binarizeThreshold);
      probs.dispose();
      xs.dispose();
      ys.dispose();

      lossTail.push(lossVal);
      if (lossTail.length > 5) lossTail.shift();
      if (!Number.isFinite(lossVal)) {
        model.dispose();
        throw new TrainingDiverged(epoch, lossTail);
      }
      lossSum += lossVal;
      diceSum += dice;
    }
    const rec = {
      epoch,
      loss: lossSum / patches.length,
      dice: diceSum / patches.length,
    };
    curves.push(rec);
    epochsRun = epoch + 1;
    if (opts.stopAtDice !== undefined && rec.dice >= opts.stopAtDice && epoch >= nextConfirm) {
      if (volumeDice() >= opts.stopAtDice) break;
      nextConfirm = epoch + 10; // not there yet; recheck later, not every epoch
    }
  }

  optimizer.dispose();
  const last = curves[curves.length - 1];
  const manifest: RunManifest = {
    config: cfg,
    configHash: hash,
    armHash: arm,
    epochsRun,
    finalLoss: last.loss,
    finalTrainDice: volumeDice(),
    paramCount: model.paramCount(),
  };
  return { model, curves, manifest };
}

export function saveCheckpoint(model: UNet3D, path: string): void {
  fs.writeFileSync(path, JSON.stringify(model.toCheckpoint()));
}

export function loadCheckpoint(path: string): UNet3D {
  const ckpt = JSON.parse(fs.readFileSync(path, "utf8")) as Checkpoint;
  for (const key of ["inChannels", "depth", "baseWidth", "shapes", "weights"]) {
    if (!(key in ckpt)) throw new Error(`checkpoint ${path} missing field ${key}`);
  }
  return UNet3D.fromCheckpoint(ckpt);
}

export function writeRunManifest(manifest: RunManifest, path: string): void {
  fs.writeFileSync(path, JSON.stringify(manifest, null, 2) + "\n");
}
