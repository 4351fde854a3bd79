/** Dense 3D image with an optional channel axis.
 *
 * Voxels are stored x-fastest (the on-disk NIfTI layout), channels last:
 * index = x + nx*(y + ny*(z + nz*c)).  Spacing and origin are millimeters.
 */
export interface Image {
  data: Float32Array;
  dims: [number, number, number];
  channels: number;
  spacing: [number, number, number];
  origin: [number, number, number];
  channelNames?: string[];
}

export function makeImage(
  dims: [number, number, number],
  channels = 1,
  spacing: [number, number, number] = [1, 1, 1],
  origin: [number, number, number] = [0, 0, 0],
): Image {
  const n = dims[0] * dims[1] * dims[2] * channels;
  return { data: new Float32Array(n), dims, channels, spacing, origin };
}

export function voxelIndex(img: Image, x: number, y: number, z: number, c = 0): number {
  const [nx, ny, nz] = img.dims;
  return x + nx * (y + ny * (z + nz * c));
}

export function getVoxel(img: Image, x: number, y: number, z: number, c = 0): number {
  return img.data[voxelIndex(img, x, y, z, c)];
}

export function setVoxel(img: Image, x: number, y: number, z: number, v: number, c = 0): void {
  img.data[voxelIndex(img, x, y, z, c)] = v;
}

/** Number of voxels per channel. */
export function voxelCount(img: Image): number {
  return img.dims[0] * img.dims[1] * img.dims[2];
}

export function sameGeometry(a: Image, b: Image, tol = 1e-5): boolean {
  for (let i = 0; i < 3; i++) {
    if (a.dims[i] !== b.dims[i]) return false;
    if (Math.abs(a.spacing[i] - b.spacing[i]) > tol) return false;
    if (Math.abs(a.origin[i] - b.origin[i]) > tol) return false;
  }
  return true;
}

/** Count of strictly positive voxels (foreground of a mask). */
export function foregroundCount(img: Image): number {
  let n = 0;
  for (let i = 0; i < img.data.length; i++) if (img.data[i] > 0) n++;
  return n;
}
