"""
Coarse bone-interface segmentation
==================================

Otsu threshold, depth Sobel, box averaging, fusion and dilation.
"""

import numpy as np

from usreg import PhantomSpec, SegmentationConfig, generate, otsu_threshold, segment_roi

vol, truth = generate(PhantomSpec(speckle_sigma=0.0))
print("Otsu threshold: %.4f" % otsu_threshold(vol))

# without dilation the mask hugs the bright band
thin = segment_roi(vol, SegmentationConfig(dilation_radius=0))
print("fused voxels: %d, inside the true band: %.1f%%"
      % (thin.bits.sum(), 100 * truth[thin.bits].mean()))

# the default margin of 16 voxels (4.5 mm) keeps the interface in view while the frame moves
roi = segment_roi(vol)
print("ROI fraction: %.3f, interface recall: %.2f%%" % (roi.fraction, 100 * roi.bits[truth].mean()))

# speckle does not break the pipeline
noisy, truth_n = generate(PhantomSpec())
roi_n = segment_roi(noisy)
print("speckled phantom: ROI fraction %.3f, recall %.2f%%" % (roi_n.fraction, 100 * roi_n.bits[truth_n].mean()))
assert np.all(roi.bits >= thin.bits)
