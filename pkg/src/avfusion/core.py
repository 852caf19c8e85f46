"""Shared domain types, the 7-class emotion label set, and file formats.

Tensors are exchanged in the FVT1 binary format: the magic bytes ``FVT1``,
a little-endian u32 rank, ``rank`` little-endian u32 dims, then
``prod(dims)`` little-endian f32 values with no padding.  Values are kept
as float64 in memory and stored as float32 on disk.

Dataset manifests are CSV files with the header
``clip_id,label,audio,lbptop_video,cnn_scores,blstm_feat``.  The label
cell may be empty (test-set mode), and any path cell may be empty when
that channel is absent.  Paths are resolved relative to the manifest's
directory.
"""

import csv
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

# Canonical label order: alphabetical over the AFEW folder names.  Index
# positions are load-bearing for CPTs and confusion matrices.
EMOTION_NAMES = ("Angry", "Disgust", "Fear", "Happy", "Neutral", "Sad", "Surprise")
N_CLASSES = 7

_NAME_TO_INDEX = {name: i for i, name in enumerate(EMOTION_NAMES)}

# Channel tags in their fixed fusion order.
CHANNELS = ("audio", "lbptop", "cnn", "blstm")

_MAGIC = b"FVT1"

# CSV columns of a dataset manifest; the last four hold per-channel paths.
MANIFEST_COLUMNS = ("clip_id", "label", "audio", "lbptop_video", "cnn_scores", "blstm_feat")
_PATH_COLUMN_TO_CHANNEL = {
    "audio": "audio",
    "lbptop_video": "lbptop",
    "cnn_scores": "cnn",
    "blstm_feat": "blstm",
}


class TensorFormatError(ValueError):
    """A tensor file is not valid FVT1."""


class BadMagic(TensorFormatError):
    """The file does not start with the FVT1 magic bytes."""


class Truncated(TensorFormatError):
    """The file ends before the header or payload is complete."""


class ManifestError(ValueError):
    """A dataset manifest violates its contract."""


class DuplicateClipId(ManifestError):
    pass


class UnknownLabel(ManifestError):
    pass


class MalformedRow(ManifestError):
    pass


class DimensionMismatch(ValueError):
    """An input's shape disagrees with what the operation requires."""


class LengthMismatch(ValueError):
    """Two parallel sequences differ in length."""


def emotion_index(name):
    """Map a canonical emotion name to its class index (0..6)."""
    try:
        return _NAME_TO_INDEX[name]
    except KeyError:
        raise UnknownLabel(f"unknown emotion label {name!r}; expected one of {EMOTION_NAMES}")


def emotion_name(index):
    """Map a class index (0..6) back to its canonical name."""
    if not 0 <= int(index) < N_CLASSES:
        raise UnknownLabel(f"emotion index {index} outside 0..{N_CLASSES - 1}")
    return EMOTION_NAMES[int(index)]


def check_volume(volume):
    """Validate a T×H×W grayscale volume and return it as float64."""
    vol = np.asarray(volume, dtype=np.float64)
    if vol.ndim != 3:
        raise DimensionMismatch(f"video volume must be rank 3 (T,H,W), got rank {vol.ndim}")
    if vol.size == 0:
        raise ValueError("empty video volume")
    if not np.all(np.isfinite(vol)):
        raise ValueError("video volume contains non-finite values")
    if vol.min() < 0 or vol.max() > 255:
        raise ValueError("video volume intensities must lie in [0, 255]")
    return vol


def check_scores(scores, probabilities=False):
    """Validate a T×7 per-frame score matrix and return it as float64.

    With ``probabilities=True`` every row must additionally be non-negative
    and sum to 1 within 1e-9.
    """
    mat = np.asarray(scores, dtype=np.float64)
    if mat.ndim != 2 or mat.shape[1] != N_CLASSES:
        raise DimensionMismatch(f"score matrix must be T×{N_CLASSES}, got shape {mat.shape}")
    if not np.all(np.isfinite(mat)):
        raise ValueError("score matrix contains non-finite values")
    if probabilities:
        if mat.min() < 0:
            raise ValueError("probability rows must be non-negative")
        row_sums = mat.sum(axis=1)
        if np.any(np.abs(row_sums - 1.0) > 1e-9):
            raise ValueError("probability rows must sum to 1 within 1e-9")
    return mat


def write_tensor(path, dims, values):
    """Write an FVT1 tensor file, byte-exact and deterministic.

    ``prod(dims)`` must equal ``len(values)`` and all values must be
    finite.  Values are stored as little-endian f32.
    """
    dims = [int(d) for d in dims]
    if any(d < 0 for d in dims):
        raise DimensionMismatch(f"negative dimension in {dims}")
    flat = np.asarray(values, dtype=np.float64).reshape(-1)
    n = int(np.prod(dims, dtype=np.int64)) if dims else 1
    if n != flat.size:
        raise DimensionMismatch(f"prod({dims}) = {n} but got {flat.size} values")
    if not np.all(np.isfinite(flat)):
        raise ValueError("tensor values must be finite")
    payload = flat.astype("<f4").tobytes()
    header = _MAGIC + struct.pack("<I", len(dims)) + struct.pack(f"<{len(dims)}I", *dims)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def read_tensor(path):
    """Read an FVT1 tensor file; returns ``(dims, values)``.

    ``values`` is a float64 array of ``prod(dims)`` entries.  Raises
    BadMagic on a wrong magic and Truncated when the file ends early.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 4:
        raise Truncated(f"{path}: file shorter than the magic")
    if blob[:4] != _MAGIC:
        raise BadMagic(f"{path}: expected magic {_MAGIC!r}, found {blob[:4]!r}")
    if len(blob) < 8:
        raise Truncated(f"{path}: missing rank field")
    (rank,) = struct.unpack_from("<I", blob, 4)
    header_end = 8 + 4 * rank
    if len(blob) < header_end:
        raise Truncated(f"{path}: header announces rank {rank} but dims are cut short")
    dims = list(struct.unpack_from(f"<{rank}I", blob, 8))
    n = int(np.prod(dims, dtype=np.int64)) if dims else 1
    expected = header_end + 4 * n
    if len(blob) < expected:
        raise Truncated(f"{path}: payload needs {expected} bytes, file has {len(blob)}")
    if len(blob) > expected:
        raise TensorFormatError(f"{path}: {len(blob) - expected} trailing bytes after payload")
    values = np.frombuffer(blob, dtype="<f4", count=n, offset=header_end).astype(np.float64)
    return dims, values


def read_tensor_array(path):
    """Read an FVT1 file and return the values reshaped to their dims."""
    dims, values = read_tensor(path)
    return values.reshape(dims)


def write_tensor_array(path, array):
    """Write an array as an FVT1 tensor, dims taken from its shape."""
    arr = np.asarray(array)
    write_tensor(path, list(arr.shape), arr.reshape(-1))


def save_tensor_bundle(path, kind, tensors, extra=None):
    """Write a model as a JSON sidecar plus sibling FVT1 tensor files.

    Each tensor is stored as ``<stem>.<name>.fvt`` next to the JSON file;
    the sidecar records the kind, the tensor file names, and any extra
    metadata.  Output is deterministic for identical inputs.
    """
    path = Path(path)
    names = {}
    for name, array in tensors.items():
        fname = f"{path.stem}.{name}.fvt"
        write_tensor_array(path.parent / fname, np.asarray(array, dtype=np.float64))
        names[name] = fname
    doc = {"kind": kind, "tensors": names}
    if extra:
        doc.update(extra)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_tensor_bundle(path, kind):
    """Read a JSON sidecar written by :func:`save_tensor_bundle`.

    Returns ``(doc, tensors)`` where tensors maps each recorded name to
    its array.  Raises ValueError when the sidecar's kind differs.
    """
    path = Path(path)
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("kind") != kind:
        raise ValueError(f"{path}: expected a {kind!r} bundle, found {doc.get('kind')!r}")
    tensors = {name: read_tensor_array(path.parent / fname)
               for name, fname in doc["tensors"].items()}
    return doc, tensors


@dataclass(frozen=True)
class ManifestEntry:
    clip_id: str
    label: int | None
    paths: dict  # channel tag -> resolved Path, only for channels present


@dataclass(frozen=True)
class DatasetManifest:
    entries: list

    def labels(self):
        """Label indices in entry order; raises if any entry is unlabeled."""
        out = []
        for e in self.entries:
            if e.label is None:
                raise ManifestError(f"clip {e.clip_id!r} has no label")
            out.append(e.label)
        return out


def load_manifest(path):
    """Load a dataset manifest CSV; validates labels, ids, and file paths."""
    path = Path(path)
    base = path.parent
    entries = []
    seen = set()
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedRow(f"{path}: empty manifest")
        if tuple(h.strip() for h in header) != MANIFEST_COLUMNS:
            raise MalformedRow(f"{path}: header must be {','.join(MANIFEST_COLUMNS)}")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(MANIFEST_COLUMNS):
                raise MalformedRow(f"{path}:{lineno}: expected {len(MANIFEST_COLUMNS)} cells, got {len(row)}")
            clip_id = row[0].strip()
            if not clip_id:
                raise MalformedRow(f"{path}:{lineno}: empty clip_id")
            if clip_id in seen:
                raise DuplicateClipId(f"{path}:{lineno}: clip_id {clip_id!r} repeats")
            seen.add(clip_id)
            label_cell = row[1].strip()
            label = emotion_index(label_cell) if label_cell else None
            paths = {}
            for col, cell in zip(MANIFEST_COLUMNS[2:], row[2:]):
                cell = cell.strip()
                if not cell:
                    continue
                resolved = base / cell
                if not resolved.exists():
                    raise MalformedRow(f"{path}:{lineno}: {col} file {resolved} does not exist")
                paths[_PATH_COLUMN_TO_CHANNEL[col]] = resolved
            entries.append(ManifestEntry(clip_id=clip_id, label=label, paths=paths))
    return DatasetManifest(entries=entries)


def save_manifest(path, entries):
    """Write a manifest CSV; per-channel cells hold paths relative to it.

    ``entries`` is a list of (clip_id, label index or None, channel->path).
    """
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_COLUMNS)
        for clip_id, label, paths in entries:
            row = [clip_id, "" if label is None else emotion_name(label)]
            for col in MANIFEST_COLUMNS[2:]:
                channel = _PATH_COLUMN_TO_CHANNEL[col]
                cell = paths.get(channel)
                row.append("" if cell is None else str(Path(cell).relative_to(path.parent)))
            writer.writerow(row)
