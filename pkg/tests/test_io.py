import struct

import numpy as np
import pytest

from cloudtwin import ParseError, PointCloud, load_cloud, save_cloud

from conftest import random_cloud


class TestXyz:
    def test_three_point_file(self, tmp_path):
        p = tmp_path / "tri.xyz"
        p.write_text("0 0 0\n1 0 0\n0 1 0\n")
        cloud = load_cloud(p, "xyz")
        assert len(cloud) == 3
        assert cloud.colors is None
        assert np.array_equal(cloud.points, [[0, 0, 0], [1, 0, 0], [0, 1, 0]])

    def test_comments_and_colors(self, tmp_path):
        p = tmp_path / "c.xyz"
        p.write_text("# header comment\n1 2 3 255 0 10\n\n4 5 6 0 128 255\n")
        cloud = load_cloud(p)
        assert len(cloud) == 2
        assert np.array_equal(cloud.colors, [[255, 0, 10], [0, 128, 255]])

    def test_nan_rejected_with_line(self, tmp_path):
        p = tmp_path / "bad.xyz"
        p.write_text("0 0 0\nnan 0 0\n")
        with pytest.raises(ParseError, match="line 2"):
            load_cloud(p)

    def test_bad_field_count(self, tmp_path):
        p = tmp_path / "bad.xyz"
        p.write_text("1 2\n")
        with pytest.raises(ParseError):
            load_cloud(p)

    def test_roundtrip_within_1e6(self, tmp_path, rng):
        cloud = random_cloud(rng, 500, colors=True)
        p = tmp_path / "rt.xyz"
        save_cloud(cloud, p, "xyz")
        back = load_cloud(p, "xyz")
        assert np.abs(back.points - cloud.points).max() < 1e-6
        assert np.array_equal(back.colors, cloud.colors)


class TestPly:
    def test_hand_written_golden_colored(self, tmp_path):
        # golden file: 4 colored vertices, values asserted literally
        p = tmp_path / "golden.ply"
        p.write_text(
            "ply\n"
            "format ascii 1.0\n"
            "comment hand-written fixture\n"
            "element vertex 4\n"
            "property float x\nproperty float y\nproperty float z\n"
            "property uchar red\nproperty uchar green\nproperty uchar blue\n"
            "end_header\n"
            "0 0 0 255 0 0\n"
            "1 0 0 0 255 0\n"
            "0 1 0 0 0 255\n"
            "0.5 0.5 1.25 10 20 30\n"
        )
        cloud = load_cloud(p, "ply-ascii")
        assert np.array_equal(
            cloud.points, [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0.5, 0.5, 1.25]])
        assert np.array_equal(
            cloud.colors, [[255, 0, 0], [0, 255, 0], [0, 0, 255], [10, 20, 30]])

    def test_binary_float32_vertices(self, tmp_path):
        header = (b"ply\nformat binary_little_endian 1.0\n"
                  b"element vertex 2\n"
                  b"property float x\nproperty float y\nproperty float z\n"
                  b"end_header\n")
        body = struct.pack("<3f", 1.0, 2.0, 3.0) + struct.pack("<3f", -1.0, 0.5, 0.0)
        p = tmp_path / "bin.ply"
        p.write_bytes(header + body)
        cloud = load_cloud(p, "ply-binary-le")
        assert np.array_equal(cloud.points, [[1, 2, 3], [-1, 0.5, 0]])

    def test_binary_roundtrip_bit_exact(self, tmp_path, rng):
        cloud = random_cloud(rng, 1000, colors=True)
        p = tmp_path / "rt.ply"
        save_cloud(cloud, p, "ply-binary-le")
        back = load_cloud(p, "ply-binary-le")
        assert np.array_equal(back.points, cloud.points)  # bit-exact f64
        assert np.array_equal(back.colors, cloud.colors)

    def test_ascii_roundtrip_within_1e6(self, tmp_path, rng):
        cloud = random_cloud(rng, 200)
        p = tmp_path / "rt_ascii.ply"
        save_cloud(cloud, p, "ply-ascii")
        back = load_cloud(p, "ply-ascii")
        assert np.abs(back.points - cloud.points).max() < 1e-6

    def test_empty_cloud_writes_zero_vertex_header(self, tmp_path):
        p = tmp_path / "empty.ply"
        save_cloud(PointCloud(np.empty((0, 3))), p, "ply-ascii")
        assert "element vertex 0" in p.read_text()
        assert len(load_cloud(p)) == 0

    def test_unknown_property_skipped_with_warning(self, tmp_path):
        p = tmp_path / "extra.ply"
        p.write_text(
            "ply\nformat ascii 1.0\nelement vertex 1\n"
            "property float x\nproperty float y\nproperty float z\n"
            "property float confidence\n"
            "end_header\n"
            "1 2 3 0.9\n")
        with pytest.warns(UserWarning, match="confidence"):
            cloud = load_cloud(p)
        assert np.array_equal(cloud.points, [[1, 2, 3]])

    def test_truncated_binary_reports_offset(self, tmp_path):
        header = (b"ply\nformat binary_little_endian 1.0\n"
                  b"element vertex 2\n"
                  b"property double x\nproperty double y\nproperty double z\n"
                  b"end_header\n")
        p = tmp_path / "trunc.ply"
        p.write_bytes(header + struct.pack("<3d", 1.0, 2.0, 3.0))
        with pytest.raises(ParseError, match="byte"):
            load_cloud(p)

    def test_nan_coordinate_rejected(self, tmp_path):
        p = tmp_path / "nan.ply"
        p.write_text(
            "ply\nformat ascii 1.0\nelement vertex 1\n"
            "property float x\nproperty float y\nproperty float z\n"
            "end_header\nnan 0 0\n")
        with pytest.raises(ParseError, match="non-finite"):
            load_cloud(p)

    def test_format_autodetect(self, tmp_path, rng):
        cloud = random_cloud(rng, 10)
        pb = tmp_path / "a.ply"
        save_cloud(cloud, pb, "ply-binary-le")
        assert np.array_equal(load_cloud(pb).points, cloud.points)
        pa = tmp_path / "b.ply"
        save_cloud(cloud, pa, "ply-ascii")
        assert np.abs(load_cloud(pa).points - cloud.points).max() < 1e-6


def test_order_stable_under_roundtrip(tmp_path, rng):
    cloud = random_cloud(rng, 300, colors=True)
    for fmt, ext in (("ply-binary-le", "a.ply"), ("ply-ascii", "b.ply"), ("xyz", "c.xyz")):
        p = tmp_path / ext
        save_cloud(cloud, p, fmt)
        back = load_cloud(p, fmt)
        # nearest-to-original pairing must be the identity permutation
        assert np.abs(back.points - cloud.points).max() < 1e-6
