import hashlib
import math
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from radar_aplanc import io, model
from radar_aplanc.dsp import TimeSeries
from radar_aplanc.errors import FormatError
from radar_aplanc.rangeproc import RangeMatrix
from radar_aplanc.sim import GroundTruth


def rand_matrix(seed=0, n=64, d=32):
    rng = np.random.default_rng(seed)
    return RangeMatrix(rng.standard_normal((n, d)) + 1j * rng.standard_normal((n, d)), 120.0, 0.0399723)


def rand_gt(seed=0, n=50):
    rng = np.random.default_rng(seed)
    return GroundTruth(
        TimeSeries(rng.standard_normal(n) * 1e-4, 120.0),
        TimeSeries(rng.uniform(50, 120, n), 120.0),
        float(rng.uniform(50, 120)),
    )


class TestRapm:
    def test_round_trip(self, tmp_path):
        m = rand_matrix()
        io.write_rapm(tmp_path / "a.rapm", m)
        back = io.read_rapm(tmp_path / "a.rapm")
        assert back.data.shape == (64, 32)
        assert back.chirp_rate_hz == m.chirp_rate_hz and back.range_res_m == m.range_res_m
        # f32 quantization only
        np.testing.assert_allclose(back.data.real, m.data.real, rtol=2 ** -23, atol=1e-30)
        np.testing.assert_allclose(back.data.imag, m.data.imag, rtol=2 ** -23, atol=1e-30)
        np.testing.assert_array_equal(back.data.real, m.data.real.astype(np.float32))

    def test_byte_layout(self, tmp_path):
        m = RangeMatrix(np.array([[1 + 2j, 3 - 4j]]), 120.0, 0.04)
        io.write_rapm(tmp_path / "a.rapm", m)
        expected = (
            b"RAPM" + struct.pack("<IQQdd", 1, 1, 2, 120.0, 0.04) + struct.pack("<4f", 1.0, 2.0, 3.0, -4.0)
        )
        assert (tmp_path / "a.rapm").read_bytes() == expected

    def test_identical_bytes_identical_hash(self, tmp_path):
        io.write_rapm(tmp_path / "a.rapm", rand_matrix(3))
        io.write_rapm(tmp_path / "b.rapm", io.read_rapm(tmp_path / "a.rapm"))
        h = [hashlib.sha256((tmp_path / n).read_bytes()).hexdigest() for n in ("a.rapm", "b.rapm")]
        assert h[0] == h[1]

    def test_truncated_by_one_byte(self, tmp_path):
        io.write_rapm(tmp_path / "a.rapm", rand_matrix())
        raw = (tmp_path / "a.rapm").read_bytes()
        (tmp_path / "t.rapm").write_bytes(raw[:-1])
        with pytest.raises(FormatError, match="offset") as err:
            io.read_rapm(tmp_path / "t.rapm")
        assert err.value.offset == len(raw) - 1

    def test_empty_file(self, tmp_path):
        (tmp_path / "e.rapm").write_bytes(b"")
        with pytest.raises(FormatError, match="missing magic"):
            io.read_rapm(tmp_path / "e.rapm")

    def test_bad_magic_and_version(self, tmp_path):
        io.write_rapm(tmp_path / "a.rapm", rand_matrix())
        raw = bytearray((tmp_path / "a.rapm").read_bytes())
        (tmp_path / "m.rapm").write_bytes(b"XXXX" + raw[4:])
        with pytest.raises(FormatError, match="bad magic") as err:
            io.read_rapm(tmp_path / "m.rapm")
        assert err.value.offset == 0
        raw[4:8] = struct.pack("<I", 2)
        (tmp_path / "v.rapm").write_bytes(bytes(raw))
        with pytest.raises(FormatError, match="version") as err:
            io.read_rapm(tmp_path / "v.rapm")
        assert err.value.offset == 4

    def test_trailing_bytes(self, tmp_path):
        io.write_rapm(tmp_path / "a.rapm", rand_matrix())
        (tmp_path / "x.rapm").write_bytes((tmp_path / "a.rapm").read_bytes() + b"\0")
        with pytest.raises(FormatError, match="trailing"):
            io.read_rapm(tmp_path / "x.rapm")

    def test_truncated_header(self, tmp_path):
        (tmp_path / "h.rapm").write_bytes(b"RAPM" + struct.pack("<I", 1) + b"\0" * 5)
        with pytest.raises(FormatError, match="header"):
            io.read_rapm(tmp_path / "h.rapm")


class TestRagt:
    def test_round_trip(self, tmp_path):
        gt = rand_gt()
        io.write_ragt(tmp_path / "a.ragt", gt)
        back = io.read_ragt(tmp_path / "a.ragt", 120.0)
        np.testing.assert_array_equal(back.displacement_m.samples, gt.displacement_m.samples.astype(np.float32))
        np.testing.assert_array_equal(back.hr_bpm_trace.samples, gt.hr_bpm_trace.samples.astype(np.float32))
        assert back.mean_hr_bpm == gt.mean_hr_bpm
        assert back.displacement_m.rate_hz == 120.0

    def test_corruption(self, tmp_path):
        io.write_ragt(tmp_path / "a.ragt", rand_gt())
        raw = (tmp_path / "a.ragt").read_bytes()
        (tmp_path / "t.ragt").write_bytes(raw[:-3])
        with pytest.raises(FormatError, match="offset"):
            io.read_ragt(tmp_path / "t.ragt")
        (tmp_path / "m.ragt").write_bytes(b"RAPM" + raw[4:])
        with pytest.raises(FormatError, match="bad magic"):
            io.read_ragt(tmp_path / "m.ragt")
        (tmp_path / "e.ragt").write_bytes(b"RA")
        with pytest.raises(FormatError, match="missing magic"):
            io.read_ragt(tmp_path / "e.ragt")


class TestRapw:
    @pytest.mark.parametrize("activation", ["tanh", "identity"])
    def test_bit_exact_round_trip(self, tmp_path, activation):
        p = model.init_extractor(np.random.default_rng(0), activation=activation)
        io.write_rapw(tmp_path / "w.rapw", p)
        back = io.read_rapw(tmp_path / "w.rapw")
        assert back.activation == activation
        for a, b in zip(p.arrays(), back.arrays()):
            assert a.shape == b.shape and a.tobytes() == b.tobytes()

    def test_layout(self, tmp_path):
        p = model.ExtractorParams([np.full((1, 2, 1), 0.5)], [np.array([-1.0])], "identity")
        io.write_rapw(tmp_path / "w.rapw", p)
        expected = b"RAPW" + struct.pack("<III", 1, 1, 1) + struct.pack("<3I", 1, 2, 1) + struct.pack("<3d", 0.5, 0.5, -1.0)
        assert (tmp_path / "w.rapw").read_bytes() == expected

    def test_corruption(self, tmp_path):
        p = model.init_extractor(np.random.default_rng(0), hidden=4, kernel=3)
        io.write_rapw(tmp_path / "w.rapw", p)
        raw = bytearray((tmp_path / "w.rapw").read_bytes())
        cases = {
            "t.rapw": bytes(raw[:-1]),
            "s.rapw": bytes(raw[:20]),
            "a.rapw": bytes(raw[:12]) + struct.pack("<I", 9) + bytes(raw[16:]),
            "n.rapw": bytes(raw[:8]) + struct.pack("<I", 0) + bytes(raw[12:]),
            "e.rapw": b"",
        }
        for name, data in cases.items():
            (tmp_path / name).write_bytes(data)
            with pytest.raises(FormatError):
                io.read_rapw(tmp_path / name)

    def test_inconsistent_shapes(self, tmp_path):
        p = model.init_extractor(np.random.default_rng(0), hidden=4, kernel=3)
        io.write_rapw(tmp_path / "w.rapw", p)
        raw = bytearray((tmp_path / "w.rapw").read_bytes())
        # first layer kernel length 3 -> 1 leaves the payload size inconsistent
        raw[16 + 8 : 16 + 12] = struct.pack("<I", 1)
        (tmp_path / "x.rapw").write_bytes(bytes(raw))
        with pytest.raises(FormatError):
            io.read_rapw(tmp_path / "x.rapw")


entries = st.builds(
    io.ManifestEntry,
    path=st.from_regex(r"[a-z0-9_/]{1,12}\.rapm", fullmatch=True),
    seed=st.integers(0, 2**31),
    mean_hr_bpm=st.floats(48, 180),
    snr_db=st.one_of(st.floats(-30, 40), st.just(math.inf)),
    split=st.sampled_from(io.SPLITS),
)


class TestManifest:
    def test_three_entry_round_trip(self, tmp_path):
        es = [
            io.ManifestEntry("scene_0000.rapm", 0, 72.5, -8.25, "train"),
            io.ManifestEntry("scene_0001.rapm", 1, 61.0, math.inf, "val"),
            io.ManifestEntry("sub/scene_0002.rapm", 2, 99.125, 12.0, "test"),
        ]
        io.write_manifest(tmp_path / "m.txt", es)
        assert io.read_manifest(tmp_path / "m.txt") == es

    @settings(max_examples=50, deadline=None)
    @given(st.lists(entries, max_size=6, unique_by=lambda e: e.path))
    def test_round_trip_property(self, tmp_path_factory, es):
        path = tmp_path_factory.mktemp("m") / "m.txt"
        io.write_manifest(path, es)
        assert io.read_manifest(path) == es

    def test_unknown_split_names_token(self, tmp_path):
        (tmp_path / "m.txt").write_text("a.rapm\t0\t70.0\t1.0\ttrain\nb.rapm\t1\t70.0\t1.0\tholdout\n")
        with pytest.raises(FormatError, match="line 2.*holdout"):
            io.read_manifest(tmp_path / "m.txt")

    @pytest.mark.parametrize("line", ["a.rapm\t0\t70.0\ttrain", "a.rapm\tx\t70.0\t1.0\ttrain", "a.rapm\t0\tfast\t1\ttest"])
    def test_malformed_line_number(self, tmp_path, line):
        (tmp_path / "m.txt").write_text("# header\n" + line + "\n")
        with pytest.raises(FormatError, match="line 2"):
            io.read_manifest(tmp_path / "m.txt")

    def test_duplicate_paths_warn(self, tmp_path):
        es = [io.ManifestEntry("a.rapm", 0, 70.0, 1.0), io.ManifestEntry("a.rapm", 1, 71.0, 1.0)]
        io.write_manifest(tmp_path / "m.txt", es)
        with pytest.warns(UserWarning, match="duplicate"):
            assert len(io.read_manifest(tmp_path / "m.txt")) == 2

    def test_resolve(self, tmp_path):
        e = io.ManifestEntry("x.rapm", 0, 70.0, 1.0)
        assert io.resolve(tmp_path / "m.txt", e) == tmp_path / "x.rapm"
        abs_e = io.ManifestEntry(str(tmp_path / "y.rapm"), 0, 70.0, 1.0)
        assert io.resolve("/elsewhere/m.txt", abs_e) == tmp_path / "y.rapm"
        assert e.ragt_path == "x.ragt"
