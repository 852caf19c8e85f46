import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from avfusion.core import (BadMagic, DuplicateClipId, DimensionMismatch,
                           EMOTION_NAMES, MalformedRow, Truncated, UnknownLabel,
                           emotion_index, emotion_name, load_manifest,
                           read_tensor, save_manifest, write_tensor,
                           write_tensor_array)


def test_label_bijection():
    assert len(EMOTION_NAMES) == 7
    for i, name in enumerate(EMOTION_NAMES):
        assert emotion_index(name) == i
        assert emotion_name(i) == name


def test_label_canonical_order():
    assert EMOTION_NAMES == ("Angry", "Disgust", "Fear", "Happy", "Neutral",
                             "Sad", "Surprise")


def test_unknown_label_rejected():
    with pytest.raises(UnknownLabel):
        emotion_index("Joy")
    with pytest.raises(UnknownLabel):
        emotion_name(7)


def test_tensor_roundtrip_2x2(tmp_path):
    path = tmp_path / "t.fvt"
    write_tensor(path, [2, 2], [1, 2, 3, 4])
    raw = path.read_bytes()
    assert raw[:4] == b"FVT1"
    assert len(raw) == 4 + 4 + 8 + 16  # magic + rank + two dims + payload
    dims, values = read_tensor(path)
    assert dims == [2, 2]
    assert values.tolist() == [1, 2, 3, 4]


def test_tensor_roundtrip_onehot(tmp_path):
    path = tmp_path / "t.fvt"
    write_tensor(path, [7], [0, 0, 0, 0, 0, 0, 1])
    dims, values = read_tensor(path)
    assert dims == [7]
    assert values.tolist() == [0, 0, 0, 0, 0, 0, 1]


def test_tensor_empty_dims(tmp_path):
    path = tmp_path / "t.fvt"
    write_tensor(path, [3, 0], [])
    dims, values = read_tensor(path)
    assert dims == [3, 0]
    assert values.size == 0


def test_tensor_length_mismatch(tmp_path):
    with pytest.raises(DimensionMismatch):
        write_tensor(tmp_path / "t.fvt", [2, 2], [1, 2, 3])


def test_tensor_rejects_nonfinite(tmp_path):
    with pytest.raises(ValueError):
        write_tensor(tmp_path / "t.fvt", [2], [1.0, np.nan])


def test_bad_magic(tmp_path):
    path = tmp_path / "t.fvt"
    path.write_bytes(b"XXXX" + struct.pack("<I", 1) + struct.pack("<I", 1) + b"\0" * 4)
    with pytest.raises(BadMagic):
        read_tensor(path)


def test_truncated_payload(tmp_path):
    path = tmp_path / "t.fvt"
    write_tensor(path, [3], [1, 2, 3])
    blob = path.read_bytes()
    path.write_bytes(blob[:-5])  # cut mid-payload
    with pytest.raises(Truncated):
        read_tensor(path)


def test_truncated_header(tmp_path):
    path = tmp_path / "t.fvt"
    path.write_bytes(b"FVT1\x02")
    with pytest.raises(Truncated):
        read_tensor(path)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(min_value=0, max_value=6), min_size=0, max_size=3),
       st.integers(min_value=0, max_value=2**31 - 1))
def test_tensor_roundtrip_property(dims, seed):
    n = int(np.prod(dims)) if dims else 1
    rng = np.random.default_rng(seed)
    # values must be f32-representable for the on-disk roundtrip to be exact
    values = rng.standard_normal(n).astype(np.float32).astype(np.float64)
    import tempfile, os
    fd, path = tempfile.mkstemp(suffix=".fvt")
    os.close(fd)
    try:
        write_tensor(path, dims, values)
        got_dims, got_values = read_tensor(path)
        assert got_dims == list(dims)
        assert np.array_equal(got_values, values)
    finally:
        os.unlink(path)


def _write_clip_files(tmp_path, clip_id):
    paths = {}
    for channel, suffix in (("audio", "audio"), ("lbptop", "lbptop"),
                            ("cnn", "cnn"), ("blstm", "blstm")):
        p = tmp_path / f"{clip_id}.{suffix}.fvt"
        write_tensor_array(p, np.zeros(3))
        paths[channel] = p
    return paths


def test_manifest_roundtrip(tmp_path):
    entries = [("c1", emotion_index("Happy"), _write_clip_files(tmp_path, "c1")),
               ("c2", emotion_index("Fear"), _write_clip_files(tmp_path, "c2"))]
    mpath = tmp_path / "manifest.csv"
    save_manifest(mpath, entries)
    manifest = load_manifest(mpath)
    assert [e.clip_id for e in manifest.entries] == ["c1", "c2"]
    assert manifest.labels() == [3, 2]
    assert all(set(e.paths) == {"audio", "lbptop", "cnn", "blstm"}
               for e in manifest.entries)


def test_manifest_unlabeled_and_missing_channels(tmp_path):
    paths = _write_clip_files(tmp_path, "c1")
    del paths["audio"]
    mpath = tmp_path / "manifest.csv"
    save_manifest(mpath, [("c1", None, paths)])
    manifest = load_manifest(mpath)
    assert manifest.entries[0].label is None
    assert "audio" not in manifest.entries[0].paths


def test_manifest_duplicate_clip_id(tmp_path):
    mpath = tmp_path / "manifest.csv"
    mpath.write_text("clip_id,label,audio,lbptop_video,cnn_scores,blstm_feat\n"
                     "c1,Happy,,,,\nc1,Fear,,,,\n")
    with pytest.raises(DuplicateClipId):
        load_manifest(mpath)


def test_manifest_unknown_label(tmp_path):
    mpath = tmp_path / "manifest.csv"
    mpath.write_text("clip_id,label,audio,lbptop_video,cnn_scores,blstm_feat\n"
                     "c1,Joy,,,,\n")
    with pytest.raises(UnknownLabel):
        load_manifest(mpath)


def test_manifest_malformed_row(tmp_path):
    mpath = tmp_path / "manifest.csv"
    mpath.write_text("clip_id,label,audio,lbptop_video,cnn_scores,blstm_feat\n"
                     "c1,Happy,x\n")
    with pytest.raises(MalformedRow):
        load_manifest(mpath)


def test_manifest_missing_file(tmp_path):
    mpath = tmp_path / "manifest.csv"
    mpath.write_text("clip_id,label,audio,lbptop_video,cnn_scores,blstm_feat\n"
                     "c1,Happy,nope.fvt,,,\n")
    with pytest.raises(MalformedRow):
        load_manifest(mpath)
