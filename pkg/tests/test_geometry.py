import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stopeval import geometry as geo


def test_reference_rig_focal(rig):
    assert rig.focal_px == pytest.approx(640 / math.tan(math.radians(40)))
    assert rig.principal_point == (640.0, 512.0)


def test_principal_ray_hits_ground_at_expected_range(rig):
    # optical axis tilted 20 deg down from 2.2 m: ground at 2.2 / tan(20 deg) ahead
    p = geo.backproject(rig, rig.principal_point, 2.2 / math.sin(math.radians(20)))
    assert p.y == pytest.approx(0.0, abs=1e-12)
    assert p.z == pytest.approx(2.2 / math.tan(math.radians(20)))
    assert p.x == pytest.approx(0.0)


def test_rotation_is_orthonormal(rig):
    R = rig.rotation
    np.testing.assert_allclose(R @ R.T, np.eye(3), atol=1e-15)
    # camera frame (y down) is right-handed, vehicle frame (y up) is not
    assert np.linalg.det(R) == pytest.approx(-1.0)


def test_backproject_rejects_bad_input(rig):
    with pytest.raises(ValueError):
        geo.backproject(rig, (10, 10), 0.0)
    with pytest.raises(ValueError):
        geo.backproject(rig, (-1, 10), 5.0)
    with pytest.raises(ValueError):
        geo.backproject(rig, (10, 2000), 5.0)


def test_project_behind_camera(rig):
    with pytest.raises(geo.BehindCameraError):
        geo.project(rig, (0.0, 2.2, -1.0))


def test_ground_depth_nan_above_horizon(rig):
    # half the vertical field of view exceeds the 20 deg pitch: the top row sees sky
    top, bottom = rig.ground_depth(np.array([640.0, 640.0]), np.array([0.0, 1023.0]))
    assert np.isnan(top)
    assert np.isfinite(bottom) and bottom > 0


def test_level_projection_matches_level_rig(rig):
    level = geo.CameraRig(rig.focal_px, rig.principal_point, rig.image_size, 0.75, 2.2, 0.0)
    for x, y, z in [(0.5, 1.0, 4.0), (-1.2, 0.0, 7.0), (0.0, 2.2, 3.0)]:
        u, v, _ = geo.project(level, (x, y, z))
        lu, lv = geo.project_level(rig, x, y, z)
        assert (u, v) == pytest.approx((float(lu), float(lv)))


def test_rectification_maps_to_level_projection(rig):
    # a point projected by the tilted camera, then rectified, lands on its level projection
    pt = (0.8, 1.1, 5.0)
    u, v, _ = geo.project(rig, pt)
    ru, rv = geo.rectify_to_level(rig, (u, v))
    lu, lv = geo.project_level(rig, *pt)
    assert (ru, rv) == pytest.approx((float(lu), float(lv)), abs=1e-9)


def test_unrepresentable_pixel():
    # a very steep camera: top rows look above the level camera's horizon plane
    steep = geo.CameraRig(100.0, (100.0, 100.0), (200, 200), 0.5, 2.0, 80.0)
    with pytest.raises(geo.UnrepresentablePixelError):
        geo.rectify_to_level(steep, (100.0, 199.0))


def test_unproject_level_inverts_project_level(rig):
    u, v = geo.project_level(rig, 0.3, 1.4, 6.0)
    x, y = geo.unproject_level(rig, u, v, 6.0)
    assert (float(x), float(y)) == pytest.approx((0.3, 1.4))


def test_calibration_roundtrip(tmp_path, rig):
    rig.save(tmp_path / "c.json")
    assert geo.CameraRig.load(tmp_path / "c.json") == rig


@pytest.mark.parametrize(
    "kw",
    [dict(focal_px=0), dict(baseline_m=-1), dict(mount_height_m=0), dict(pitch_deg=90), dict(principal_point=(0, 5))],
)
def test_rig_validation(kw):
    base = dict(focal_px=100.0, principal_point=(50, 40), image_size=(100, 80), baseline_m=0.5, mount_height_m=1.0, pitch_deg=10)
    base.update(kw)
    with pytest.raises(ValueError):
        geo.CameraRig(**base)


def test_calibration_missing_field():
    with pytest.raises(KeyError, match="pitch_deg"):
        geo.CameraRig.from_dict({"focal_px": 1, "principal_point": [1, 1], "image_size": [2, 2], "baseline_m": 1, "mount_height_m": 1})


def test_backproject_map_matches_scalar(rig):
    small = geo.CameraRig.reference_rig(40, 32)
    depth = np.full((32, 40), np.nan)
    depth[5, 7] = 3.0
    depth[20, 30] = 8.5
    pts = geo.backproject_map(small, depth)
    assert pts.shape == (2, 3)
    np.testing.assert_allclose(pts[0], geo.backproject(small, (7, 5), 3.0))
    np.testing.assert_allclose(pts[1], geo.backproject(small, (30, 20), 8.5))


@settings(max_examples=200, deadline=None)
@given(
    u=st.floats(0, 1280),
    v=st.floats(0, 1024),
    depth=st.floats(0.1, 200.0),
    pitch=st.floats(0.0, 60.0),
)
def test_project_backproject_roundtrip(u, v, depth, pitch):
    rig = geo.CameraRig(900.0, (640.0, 512.0), (1280, 1024), 0.75, 2.2, pitch)
    p = geo.backproject(rig, (u, v), depth)
    pu, pv, pd = geo.project(rig, p)
    assert abs(pu - u) < 1e-6 and abs(pv - v) < 1e-6
    assert pd == pytest.approx(depth, rel=1e-12)


@settings(max_examples=200, deadline=None)
@given(u=st.floats(0, 1280), v=st.floats(0, 1024))
def test_rectify_roundtrip(u, v):
    rig = geo.CameraRig.reference_rig()
    back = geo.unrectify_from_level(rig, geo.rectify_to_level(rig, (u, v)))
    assert abs(back[0] - u) < 1e-9 and abs(back[1] - v) < 1e-9
