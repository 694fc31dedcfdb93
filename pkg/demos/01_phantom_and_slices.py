"""
A synthetic bone phantom and its orthogonal reslices
=====================================================

Beams run along z. Every beam column crosses soft tissue, a thin bright
bone interface and the acoustic shadow behind it.
"""

import numpy as np

from usreg import PhantomSpec, RigidTransform, extract_slices, generate, orthogonal_layout

# the default phantom: 199^3 voxels of 0.28 mm, speckled, seed 42
vol, interface = generate(PhantomSpec())
print("dims", vol.dims, "spacing", vol.spacing, "centre", vol.center)
print("interface voxels:", int(interface.sum()))

# mean intensity per depth slab of one column, to see the three bands
column = np.asarray(vol.data)[99, 99]
top = int(np.argmax(interface[99, 99]))
print("tissue %.3f  interface %.3f  shadow %.3f" % (column[:top].mean(), column[top:top + 3].mean(),
                                                    column[top + 3:].mean()))

# a 4D frame is two orthogonal planes that both contain the beam axis
layout = orthogonal_layout(vol)
frame = extract_slices(vol, RigidTransform.identity(), layout)
for plane, values in zip(frame.planes, frame.values):
    print("plane spanned by", plane.u, plane.v, "->", values.shape)

# moving the probe: the same planes resliced after a rigid motion
moved = extract_slices(vol, RigidTransform((2.0, 0.0, 1.0), (0.0, 0.0, 5.0)), layout)
print("valid samples after the move:", moved.n_valid, "of", sum(v.size for v in moved.values))
