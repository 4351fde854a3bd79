/** NIfTI-1 codec for single-file .nii / .nii.gz volumes.
 *
 * Interoperates with the vesselkit CLI: reads the scans, masks, and
 * 4D hyper-volumes it writes (float32 / uint8 / int types, either byte
 * order, scl_slope scaling, channel names in descrip) and writes masks
 * and volumes it accepts back.  Orientation handling is translation-only,
 * matching the tool on the other side of the file boundary.
 */
import * as fs from "node:fs";
import * as zlib from "node:zlib";
import { Image } from "./volume.js";

const HDR_SIZE = 348;
const VOX_OFFSET = 352; // header + 4 empty extension bytes

interface DtypeSpec {
  size: number;
  get: (dv: DataView, off: number, le: boolean) => number;
}

const DTYPES: Record<number, DtypeSpec> = {
  2: { size: 1, get: (dv, o) => dv.getUint8(o) },
  4: { size: 2, get: (dv, o, le) => dv.getInt16(o, le) },
  8: { size: 4, get: (dv, o, le) => dv.getInt32(o, le) },
  16: { size: 4, get: (dv, o, le) => dv.getFloat32(o, le) },
  64: { size: 8, get: (dv, o, le) => dv.getFloat64(o, le) },
  256: { size: 1, get: (dv, o) => dv.getInt8(o) },
  512: { size: 2, get: (dv, o, le) => dv.getUint16(o, le) },
  768: { size: 4, get: (dv, o, le) => dv.getUint32(o, le) },
};

function loadBytes(path: string): Buffer {
  const raw = fs.readFileSync(path);
  if (raw.length >= 2 && raw[0] === 0x1f && raw[1] === 0x8b) {
    return zlib.gunzipSync(raw);
  }
  return raw;
}

export function readNifti(path: string): Image {
  const buf = loadBytes(path);
  if (buf.length < HDR_SIZE) {
    throw new Error(`truncated NIfTI header in ${path} (${buf.length} bytes)`);
  }
  const dv = new DataView(buf.buffer, buf.byteOffset, buf.byteLength);
  let le = true;
  if (dv.getInt32(0, true) !== HDR_SIZE) {
    le = false;
    if (dv.getInt32(0, false) !== HDR_SIZE) {
      throw new Error(`${path}: sizeof_hdr != 348 in either byte order`);
    }
  }
  const magic = buf.toString("latin1", 344, 348);
  if (magic === "ni1\x00") {
    throw new Error(`${path}: two-file NIfTI (.hdr/.img) is not supported`);
  }
  if (magic !== "n+1\x00") {
    throw new Error(`${path}: not a NIfTI-1 file`);
  }

  const ndim = dv.getInt16(40, le);
  if (ndim !== 3 && ndim !== 4) {
    throw new Error(`${path}: unsupported dimensionality dim[0]=${ndim}`);
  }
  const nx = dv.getInt16(42, le);
  const ny = dv.getInt16(44, le);
  const nz = dv.getInt16(46, le);
  const nc = ndim === 4 ? dv.getInt16(48, le) : 1;
  if (Math.min(nx, ny, nz, nc) < 1) {
    throw new Error(`${path}: malformed dims ${[nx, ny, nz, nc]}`);
  }

  const code = dv.getInt16(70, le);
  const dt = DTYPES[code];
  if (!dt) throw new Error(`${path}: unsupported NIfTI datatype code ${code}`);

  const spacing: [number, number, number] = [
    Math.abs(dv.getFloat32(80, le)),
    Math.abs(dv.getFloat32(84, le)),
    Math.abs(dv.getFloat32(88, le)),
  ];
  if (!spacing.every((s) => Number.isFinite(s) && s > 0)) {
    throw new Error(`${path}: non-positive pixdim ${spacing}`);
  }

  const offset = Math.trunc(dv.getFloat32(108, le));
  const slope = dv.getFloat32(112, le);
  const inter = dv.getFloat32(116, le);

  const count = nx * ny * nz * nc;
  if (buf.length < offset + count * dt.size) {
    throw new Error(`${path}: truncated data section`);
  }

  const data = new Float32Array(count);
  const applyScale = slope !== 0 && !(slope === 1 && inter === 0);
  for (let i = 0; i < count; i++) {
    let v = dt.get(dv, offset + i * dt.size, le);
    if (applyScale) v = v * slope + inter;
    if (!Number.isFinite(v)) {
      throw new Error(`${path}: non-finite voxel at linear index ${i}`);
    }
    data[i] = v;
  }

  let origin: [number, number, number] = [0, 0, 0];
  if (dv.getInt16(254, le) > 0) {
    origin = [dv.getFloat32(292, le), dv.getFloat32(308, le), dv.getFloat32(324, le)];
  } else if (dv.getInt16(252, le) > 0) {
    origin = [dv.getFloat32(268, le), dv.getFloat32(272, le), dv.getFloat32(276, le)];
  }

  const img: Image = { data, dims: [nx, ny, nz], channels: nc, spacing, origin };
  const descrip = buf.toString("latin1", 148, 228).split("\x00", 1)[0];
  if (nc > 1) {
    const parts = descrip.split(",");
    if (parts.length === nc && parts.every((p) => p.length > 0)) {
      img.channelNames = parts;
    }
  }
  return img;
}

/** Read a single-channel volume; multi-channel files are rejected. */
export function readVolumeFile(path: string): Image {
  const img = readNifti(path);
  if (img.channels !== 1) {
    throw new Error(`${path} has ${img.channels} channels, expected a scalar volume`);
  }
  return img;
}

/** Read a binary mask; values must be exactly 0 or 1. */
export function readMaskFile(path: string): Image {
  const img = readVolumeFile(path);
  for (let i = 0; i < img.data.length; i++) {
    const v = img.data[i];
    if (v !== 0 && v !== 1) {
      throw new Error(`${path}: mask values not binary (found ${v})`);
    }
  }
  return img;
}

function buildHeader(img: Image, datatype: 2 | 16, descrip: string): Buffer {
  const hdr = Buffer.alloc(VOX_OFFSET); // zero-filled, incl. 4 extension bytes
  const [nx, ny, nz] = img.dims;
  const nc = img.channels;
  const ndim = nc > 1 ? 4 : 3;

  hdr.writeInt32LE(HDR_SIZE, 0);
  hdr.write("r", 38, "latin1");
  const dim = [ndim, nx, ny, nz, ndim === 4 ? nc : 1, 1, 1, 1];
  dim.forEach((d, i) => hdr.writeInt16LE(d, 40 + 2 * i));
  hdr.writeInt16LE(datatype, 70);
  hdr.writeInt16LE(datatype === 2 ? 8 : 32, 72);
  const pixdim = [1, img.spacing[0], img.spacing[1], img.spacing[2], 0, 0, 0, 0];
  pixdim.forEach((p, i) => hdr.writeFloatLE(p, 76 + 4 * i));
  hdr.writeFloatLE(VOX_OFFSET, 108);
  hdr.writeFloatLE(1, 112); // scl_slope
  hdr.writeFloatLE(0, 116); // scl_inter
  hdr.writeUInt8(0x0a, 123); // mm | sec
  hdr.write(descrip.slice(0, 79), 148, "latin1");
  hdr.writeInt16LE(0, 252); // qform
  hdr.writeInt16LE(1, 254); // sform
  const srow = [
    [img.spacing[0], 0, 0, img.origin[0]],
    [0, img.spacing[1], 0, img.origin[1]],
    [0, 0, img.spacing[2], img.origin[2]],
  ];
  srow.forEach((row, r) => row.forEach((v, c) => hdr.writeFloatLE(v, 280 + 16 * r + 4 * c)));
  hdr.write("n+1\x00", 344, "latin1");
  return hdr;
}

function writeBytes(path: string, payload: Buffer): void {
  const out = path.endsWith(".gz") ? zlib.gzipSync(payload, { level: 6 }) : payload;
  fs.writeFileSync(path, out);
}

/** Write as float32, channels (if any) as the 4th dimension. */
export function writeNifti(img: Image, path: string): void {
  let descrip = "vesselkit-harness";
  if (img.channelNames && img.channelNames.length === img.channels) {
    const joined = img.channelNames.join(",");
    if (joined.length <= 79) descrip = joined;
  }
  const hdr = buildHeader(img, 16, descrip);
  const body = Buffer.alloc(img.data.length * 4);
  for (let i = 0; i < img.data.length; i++) body.writeFloatLE(img.data[i], 4 * i);
  writeBytes(path, Buffer.concat([hdr, body]));
}

/** Write a 0/1 mask as uint8; anything else is refused. */
export function writeMaskFile(img: Image, path: string): void {
  if (img.channels !== 1) {
    throw new Error(`mask must be single-channel, got ${img.channels}`);
  }
  const hdr = buildHeader(img, 2, "vesselkit-harness");
  const body = Buffer.alloc(img.data.length);
  for (let i = 0; i < img.data.length; i++) {
    const v = img.data[i];
    if (v !== 0 && v !== 1) throw new Error(`mask value ${v} at index ${i} is not 0/1`);
    body[i] = v;
  }
  writeBytes(path, Buffer.concat([hdr, body]));
}

/** Path of the JSON sidecar the CLI writes next to a .nii/.nii.gz product. */
export function sidecarPath(niftiPath: string): string {
  return niftiPath.replace(/\.nii(\.gz)?$/, ".json");
}

/** Load a product's sidecar, or null when there is none. */
export function readSidecar(niftiPath: string): Record<string, unknown> | null {
  const p = sidecarPath(niftiPath);
  if (!fs.existsSync(p)) return null;
  return JSON.parse(fs.readFileSync(p, "utf8"));
}
