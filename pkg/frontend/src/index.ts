export type { Image } from "./volume.js";
export {
  makeImage,
  voxelIndex,
  getVoxel,
  setVoxel,
  voxelCount,
  sameGeometry,
  foregroundCount,
} from "./volume.js";
export {
  readNifti,
  readVolumeFile,
  readMaskFile,
  writeNifti,
  writeMaskFile,
  sidecarPath,
  readSidecar,
} from "./nifti.js";
export { Rng } from "./prng.js";
export type { AugmentConfig, TrainConfig, ConfigOverrides } from "./config.js";
export {
  DEFAULT_CONFIG,
  makeConfig,
  validateConfig,
  strideOf,
  widthsOf,
  configHash,
  armHash,
} from "./config.js";
export type { Patch } from "./patches.js";
export { axisStarts, gridOrigins, extractPatch, samplePatches } from "./patches.js";
export { flipAxis, rot90, gaussianSmooth, applyAugment } from "./augment.js";
export type { LossParams } from "./losses.js";
export { diceLoss, focalLoss, combinedLoss, hardDice, DICE_SMOOTH, FOCAL_EPS } from "./losses.js";
export type { Checkpoint } from "./unet.js";
export { UNet3D } from "./unet.js";
export type { EpochRecord, RunManifest, TrainResult, TrainOptions } from "./train.js";
export {
  TrainingDiverged,
  train,
  saveCheckpoint,
  loadCheckpoint,
  writeRunManifest,
} from "./train.js";
export type { Fold, FoldSpec } from "./folds.js";
export { makeFolds } from "./folds.js";
export { inferProbabilities, inferMask, exportPrediction } from "./infer.js";
