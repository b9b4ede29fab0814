"""Exercises the Python bindings end to end; exits non-zero on failure."""

import math

import pymlocond as m


def main():
    right = m.HandModel.toy("right")
    left = m.HandModel.toy("left")
    assert right.joint_count == 16 and left.side == "left"

    theta = [0.0] * (3 * right.joint_count)
    theta[3] = 0.5  # bend index1
    rh = right.pose(theta=theta, translation=[0.06, -0.08, 0.5])
    lh = left.pose(translation=[-0.06, -0.08, 0.5])
    assert len(rh.keypoints()) == 21
    assert rh.part_faces("thumb")

    ball = m.Mesh.icosphere(2, 0.04).transformed([0.0, 0.0, 0.0, 1.0], [0.0, 0.0, 0.42])
    cam = m.Camera(64, 64, 50.0, near=0.05, far=2.0)
    stack = m.build_mlo(cam, left=lh, right=rh, object=ball)
    names = m.LayerStack.layer_names()
    assert len(names) == m.LAYER_COUNT == 13 and names[0] == "object"

    _, depth, mask = stack.layer(0)
    assert any(mask)
    conf = stack.confidence(0)
    assert all((c > 0.0) == on for c, on in zip(conf, mask))

    # compositing picks the nearest layer everywhere
    _, merged_depth, _ = stack.composite()
    for i in range(len(merged_depth)):
        nearest = min(stack.layer(k)[1][i] for k in range(13))
        assert merged_depth[i] == nearest

    shape, values = m.read_mlot(stack.to_mlot())
    assert shape == [13, 64, 64, 4] and len(values) == 13 * 64 * 64 * 4

    assert m.plan_windows(24, 16, 8) == [(0, 16), (8, 24)]
    outs = [[[1.0, 2.0]] * 16, [[3.0, 2.0]] * 16]
    avg = m.overlap_average(outs, 24, 16, 8)
    assert avg[0] == [1.0, 2.0] and avg[10] == [2.0, 2.0] and avg[20] == [3.0, 2.0]

    src = [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]]
    dst = [[x + 1.0, y, z] for x, y, z in src]
    q, t = m.kabsch(src, dst)
    assert abs(t[0] - 1.0) < 1e-12 and abs(abs(q[3]) - 1.0) < 1e-12

    rotations, translations = m.simulate_motion(3, 24)
    assert len(rotations) == len(translations) == 24
    assert all(abs(math.sqrt(sum(c * c for c in r)) - 1.0) < 1e-12 for r in rotations)

    pts, faces = ball.sample_surface(2048, 1)
    assert len(pts) == 2048 and max(faces) < len(ball.faces)

    try:
        m.plan_windows(25, 16, 8)
    except ValueError:
        pass
    else:
        raise AssertionError("indivisible strict plan accepted")

    text, passed = m.embed_check(1)
    assert passed, text
    print("smoke test passed")


if __name__ == "__main__":
    main()
