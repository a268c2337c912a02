"""Python-surface smoke tests against the compiled extension."""

import math

import numpy as np

import placekit as pk


def test_geometry():
    assert math.isclose(pk.scale_of_box((0, 0, 112, 112), 224, 224), 0.5)
    assert math.isclose(pk.iou((0, 0, 2, 2), (1, 1, 2, 2)), 1 / 7)
    g = pk.ScaleGrid.make_default()
    assert g.channels() == 16
    assert g.nearest(0.37) == 4
    box = pk.box_from_index(32, 32, 7, g, 64, 64, 1.0)
    assert np.allclose(box, (16, 16, 32, 32))
    assert pk.index_from_box(box, g, 64, 64) == (32, 32, 7)
    l, t, w, h = pk.clip_box((-4, -4, 8, 8), 64, 64)
    assert (l, t, w, h) == (0, 0, 4, 4)


def test_heatmap_ops():
    g = pk.ScaleGrid.make_default()
    rng = np.random.default_rng(0)
    h = rng.normal(size=(16, 16, 16)).astype(np.float32)
    hn = pk.normalize(h, g)
    assert hn.min() == 0.0 and hn.max() == 1.0
    boxes = pk.top_k_boxes(hn, g, 5, 1.0)
    assert len(boxes) == 5
    # top-1 is the global argmax
    y, x, z = np.unravel_index(np.argmax(hn), hn.shape)
    (bl, bt, bw, bh), score = boxes[0]
    assert math.isclose(bl + bw / 2, x, abs_tol=1e-6)
    assert math.isclose(bt + bh / 2, y, abs_tol=1e-6)

    sl = pk.slice_fixed_scale(h, g, 3)
    assert sl.shape == (16, 16)
    assert sl.min() == 0.0 and sl.max() == 1.0
    scores, argmax = pk.slice_fixed_location(h, g, 4, 9)
    assert len(scores) == 16
    assert argmax == int(np.argmax(h[9, 4, :]))


def test_losses():
    h = np.zeros((8, 8, 4), dtype=np.float64)
    h[3, 4, 1] = 1.0
    con, rng_loss, total = pk.sparse_contrastive_loss(h, 4, 3, 1, 2, 1, 0.1)
    assert con == 0.0
    assert rng_loss == 0.0
    assert total == 0.0


def test_synthworld():
    scene = pk.generate_scene(7, pk.OracleParams(), 64)
    assert scene.bg.shape == (64, 64, 3)
    assert pk.oracle_plausibility(scene, scene.gt_box)
    oh = pk.oracle_heatmap(scene, pk.ScaleGrid.make_default())
    x, y, z = scene.gt_index
    assert oh[y, x, z] == 1.0
    same = pk.generate_scene(7, pk.OracleParams(), 64)
    assert np.array_equal(scene.bg, same.bg)


def main():
    test_geometry()
    test_heatmap_ops()
    test_losses()
    test_synthworld()
    print("python smoke tests passed")


if __name__ == "__main__":
    main()
