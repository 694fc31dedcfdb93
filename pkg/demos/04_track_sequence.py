"""
Tracking a sequence
===================

Each frame starts from the last successful result. A corrupted frame fails
and is skipped; the next frame starts from the last good attitude.
"""

import numpy as np

from usreg import (PhantomSpec, RigidTransform, SliceSet, extract_slices, generate,
                   orthogonal_layout, segment_roi, track_sequence)

vol, _ = generate(PhantomSpec(speckle_sigma=0.0))
roi = segment_roi(vol)
c = tuple(vol.center)
layout = orthogonal_layout(vol)

# slow drift: 1 mm and 0.5 degree per frame
truths = [RigidTransform((1.0 * k, 0.0, 0.0), (0.0, 0.0, 0.5 * k), c) for k in range(8)]
frames = [extract_slices(vol, T, layout) for T in truths]

# frame 3 is replaced by noise
rng = np.random.default_rng(0)
f = frames[3]
frames[3] = SliceSet(f.planes, f.points, tuple(rng.random(v.shape) for v in f.values), f.valid)

for name, warm in (("warm", True), ("cold", False)):
    res = track_sequence(vol, roi, frames, truths=truths, warm_start=warm)
    print(name, "".join("+" if r.success else "." for r in res),
          "evals", sum(r.evals for r in res))
