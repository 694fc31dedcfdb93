"""
Registering one frame
=====================

A frame resliced at a known motion is registered back, starting from
identity, by minimizing 1 - NCC with the simplex method.
"""

from usreg import (PhantomSpec, RigidTransform, compose, error_of, extract_slices, generate,
                   is_success, orthogonal_layout, register_frame, segment_roi)

vol, _ = generate(PhantomSpec(speckle_sigma=0.0))
roi = segment_roi(vol)
c = tuple(vol.center)

truth = compose(RigidTransform.translate(3.0, 2.0, 0.0, center=c), RigidTransform.rotate(rz=4.0, center=c))
frame = extract_slices(vol, truth, orthogonal_layout(vol))

res = register_frame(vol, roi, frame)
err = error_of(truth, res.transform)
print("found      t=%s  r=%s" % (["%.3f" % x for x in res.transform.translation],
                                 ["%.3f" % x for x in res.transform.rotation_deg]))
print("residuals  t=%s  r=%s" % (["%.3f" % x for x in err.translation], ["%.3f" % x for x in err.angles]))
print("NCC %.4f after %d evaluations in %.2f s (%s)" % (res.ncc, res.evals, res.wall_time, res.reason))
print("success:", is_success(res, truth))
