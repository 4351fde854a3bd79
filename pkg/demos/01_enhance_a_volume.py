"""Walk a noisy synthetic scan through the enhancement pipeline.

Generates a tube phantom, resamples it to isotropic spacing, builds the
7-channel hyper-volume, and reports what each filter channel sees at the
centerline versus far background.
"""

import numpy as np
from scipy import ndimage as ndi

from vesselkit import phantoms
from vesselkit.hypervolume import CHANNEL_NAMES, build_hypervolume, enhanced_channel
from vesselkit.metrics import psnr
from vesselkit.resample import resample_isotropic
from vesselkit.vesselness import FilterParams

# a 2 mm vessel with contrast 1 and additive noise, on an anisotropic grid
ph = phantoms.tube(radius_mm=2.0, length_mm=40.0, spacing=0.5,
                   cross_half_mm=12.0, noise_sigma=0.1, seed=0)
print(f"phantom: {ph.volume.data.shape} voxels at {ph.volume.spacing} mm, "
      f"{ph.mask.count} foreground voxels")

# resampling is a no-op here (already isotropic) but shows the call
iso = resample_isotropic(ph.volume, 0.5)
print(f"isotropic: {iso.data.shape} at {iso.spacing} mm")

print("\nbuilding the hyper-volume (six filters + the standardized scan)...")
hv = build_hypervolume(iso, FilterParams())

cl = tuple(ph.centerline.T)
far = ndi.distance_transform_edt(~ph.mask.bool_data, sampling=ph.mask.spacing) > 2.0
print(f"\n{'channel':<12}{'centerline':>12}{'background':>12}")
for i, name in enumerate(CHANNEL_NAMES):
    ch = hv.channels[i].data
    print(f"{name:<12}{ch[cl].mean():>12.3f}{ch[far].mean():>12.3f}")

best = enhanced_channel(hv)
print(f"\nfused max-channel covers [{best.data.min():.2f}, {best.data.max():.2f}]")
print(f"raw volume PSNR     {psnr(ph.volume, ph.mask):6.2f} dB")
frangi = hv.channels[CHANNEL_NAMES.index('Frangi')]
print(f"Frangi channel PSNR {psnr(ph.volume.with_data(frangi.data), ph.mask):6.2f} dB")
