import json
import os
import subprocess

import numpy as np
import pytest

import sketchedit as se


def test_blend_and_partials():
    rng = np.random.default_rng(0)
    x = rng.random((12, 10, 3), dtype=np.float32)
    y1 = rng.random((12, 10, 3), dtype=np.float32)
    m = rng.random((12, 10), dtype=np.float32)
    out = se.blend(y1, x, m)
    np.testing.assert_allclose(out, y1 * m[..., None] + x * (1 - m[..., None]), atol=1e-6)
    np.testing.assert_allclose(se.style_partial(x, m) + se.static_partial(x, m), x, atol=1e-6)
    np.testing.assert_array_equal(se.blend(y1, x, np.zeros((12, 10), np.float32)), x)


def test_shape_errors():
    x = np.zeros((12, 10, 3), np.float32)
    with pytest.raises(se.DimensionError):
        se.blend(x, x, np.zeros((11, 10), np.float32))
    with pytest.raises(se.DimensionError):
        se.l1_error(x, np.zeros((12, 10), np.float32))
    assert issubclass(se.DimensionError, se.Error)


def test_rasterize_strokes_forms():
    strokes = [{"points": [[2, 5], [14, 5]], "width": 1}]
    a = se.rasterize_strokes(strokes, 10, 16)
    b = se.rasterize_strokes(json.dumps({"strokes": strokes}), 10, 16)
    assert a.shape == (10, 16)
    np.testing.assert_array_equal(a, b)
    assert a[5, 8] == 1.0
    assert a[0, 0] == 0.0
    assert set(np.unique(a)) <= {0.0, 1.0}
    with pytest.raises(se.Error):
        se.rasterize_strokes([{"points": [], "width": 1}], 10, 16)


def test_warp_pair_and_edges():
    img = se.toy_image(5, 64)
    assert img.shape == (64, 64, 3)
    assert img.min() >= 0.0 and img.max() <= 1.0
    np.testing.assert_array_equal(img, se.toy_image(5, 64))

    pair = se.make_training_pair(img, seed=11, max_displacement_fraction=0.25)
    x0, y0, x1, y1 = pair["region"]
    outside = np.ones((64, 64), bool)
    outside[y0:y1 + 1, x0:x1 + 1] = False
    np.testing.assert_array_equal(pair["x_warped"][outside], img[outside])
    assert pair["field"].shape == (64, 64, 2)
    assert not pair["sketch"][outside].any()
    np.testing.assert_allclose(se.apply_warp(pair["field"], img), pair["x_warped"], atol=1e-6)
    np.testing.assert_array_equal(se.apply_warp(np.zeros((64, 64, 2), np.float32), img), img)

    edges = se.extract_edges(img)
    assert edges.shape == (64, 64)
    assert edges.sum() > 0
    assert se.extract_edges(np.full((16, 16, 3), 0.3, np.float32)).sum() == 0


def test_metrics():
    img = se.toy_image(6, 32)
    assert se.l1_error(img, img) == 0.0
    assert se.ssim(img, img) == pytest.approx(1.0)
    off = np.clip(img + 0.1, 0, 1).astype(np.float32)
    assert se.l1_error(img, off) == pytest.approx(float(np.abs(img - off).mean()), abs=1e-6)
    mse = float(((img.astype(np.float64) - off) ** 2).mean())
    assert se.psnr(img, off) == pytest.approx(10 * np.log10(1.0 / mse), rel=1e-5)


def test_model_load_errors(tmp_path):
    with pytest.raises(se.CheckpointError):
        se.Model.load(str(tmp_path / "missing.ckpt"))
    bad = tmp_path / "bad.ckpt"
    bad.write_bytes(b"garbage")
    with pytest.raises(se.CheckpointError):
        se.Model.load(str(bad))


@pytest.mark.skipif(not os.environ.get("SKETCHEDIT_CLI"), reason="needs the command line tool")
def test_model_edit(tmp_path):
    cli = os.environ["SKETCHEDIT_CLI"]
    subprocess.run([cli, "synth", "--out", str(tmp_path / "data"), "--count", "8", "--seed", "1"], check=True)
    subprocess.run([cli, "train", "--data", str(tmp_path / "data"), "--out", str(tmp_path / "run"),
                    "--steps", "1", "--set", "net.width=8", "--set", "net.resolution=32",
                    "--set", "train.batch_size=2"], check=True, capture_output=True)
    model = se.Model.load(str(tmp_path / "run" / "latest.ckpt"))
    assert model.step == 1
    assert model.resolution == 32

    img = se.toy_image(9, 48)[:40]
    strokes = [{"points": [[10, 10], [30, 20]], "width": 2}]
    out = model.edit(img, strokes=strokes)
    assert out["result"].shape == (40, 48, 3)
    assert out["mask"].shape == (40, 48)
    assert 0.0 <= out["mask"].min() and out["mask"].max() <= 1.0
    np.testing.assert_array_equal(out["result"], model.edit(img, strokes=strokes)["result"])
    sketch = se.rasterize_strokes(strokes, 40, 48)
    assert model.edit(img, sketch=sketch)["result"].shape == (40, 48, 3)
    with pytest.raises(se.Error):
        model.edit(img, strokes=strokes, sketch=sketch)
