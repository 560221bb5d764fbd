"""Dataset model and the CCDS on-disk container.

A CSI tensor is a complex ndarray of shape (B, M_row, M_col, N_sub): one
snapshot seen by B rectangular arrays of M_row x M_col elements over N_sub
subcarriers. A dataset stacks L such snapshots together with ground-truth
positions and optional per-record timestamps and floor labels.

In memory CSI is complex64 and positions are float32, exactly the container
precision, so a save/load round trip is bit-exact. Numeric modules upcast to
double at their boundary.

CCDS container layout (little-endian, packed):

    magic b"CCDS" | u16 version=1 | u32 header_len | header JSON (UTF-8)
    CSI payload: L*B*M_row*M_col*N_sub complex64 (interleaved re/im float32),
                 row-major in index order [l][b][m_row][m_col][n]
    positions:   L*3 float32
    timestamps:  L float64   (present iff header has_timestamps)
    floors:      L uint16    (present iff header has_floor_labels)

Header JSON keys: carrier_hz, bandwidth_hz, n_sub, count, arrays (list of
{position, orientation, rows, cols, element_spacing}), has_timestamps,
has_floor_labels.
"""

import json
from dataclasses import dataclass, field

import numpy as np

SPEED_OF_LIGHT = 299792458.0

MAGIC = b"CCDS"
VERSION = 1

_ORTHO_TOL = 1e-9


class CcdsError(ValueError):
    """Base class for container format errors."""


class BadMagicError(CcdsError):
    pass


class VersionMismatchError(CcdsError):
    pass


class TruncatedPayloadError(CcdsError):
    pass


class NonFiniteValuesError(CcdsError):
    pass


class DatasetValidationError(ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("dataset validation failed:\n  " + "\n  ".join(self.violations))


@dataclass(frozen=True)
class RadioConfig:
    """OFDM radio parameters shared by every array in a dataset.

    Subcarrier n sits at baseband frequency n * subcarrier_spacing with
    subcarrier_spacing = bandwidth_hz / n_sub.
    """
    carrier_hz: float
    bandwidth_hz: float
    n_sub: int

    @property
    def subcarrier_spacing(self):
        return self.bandwidth_hz / self.n_sub

    @property
    def wavelength(self):
        return SPEED_OF_LIGHT / self.carrier_hz


@dataclass(frozen=True)
class ArrayGeometry:
    """Pose and layout of one rectangular antenna array.

    orientation columns are the array's local axes in world coordinates:
    local x is boresight, local y runs along element columns, local z along
    element rows. Element (r, c) sits at
    position + orientation @ offset(r, c) with offsets centered on the
    array and spaced element_spacing meters apart.
    """
    position: np.ndarray
    orientation: np.ndarray
    rows: int
    cols: int
    element_spacing: float

    def __post_init__(self):
        object.__setattr__(self, "position",
                           np.asarray(self.position, dtype=np.float64).reshape(3))
        object.__setattr__(self, "orientation",
                           np.asarray(self.orientation, dtype=np.float64).reshape(3, 3))

    def element_offsets(self):
        """Local-frame offsets, shape (rows, cols, 3). Columns step local y,
        rows step local z, grid centered at the array origin."""
        r = (np.arange(self.rows) - (self.rows - 1) / 2.0) * self.element_spacing
        c = (np.arange(self.cols) - (self.cols - 1) / 2.0) * self.element_spacing
        off = np.zeros((self.rows, self.cols, 3))
        off[:, :, 1] = c[None, :]
        off[:, :, 2] = r[:, None]
        return off


@dataclass
class SceneDataset:
    """L stacked CSI snapshots with ground truth.

    csi:          (L, B, M_row, M_col, N_sub) complex64
    positions:    (L, 3) float32
    timestamps:   (L,) float64 or None
    floor_labels: (L,) uint16 or None
    """
    config: RadioConfig
    arrays: list
    csi: np.ndarray
    positions: np.ndarray
    timestamps: np.ndarray = None
    floor_labels: np.ndarray = None

    def __post_init__(self):
        self.csi = np.asarray(self.csi, dtype=np.complex64)
        self.positions = np.asarray(self.positions, dtype=np.float32)
        if self.timestamps is not None:
            self.timestamps = np.asarray(self.timestamps, dtype=np.float64)
        if self.floor_labels is not None:
            self.floor_labels = np.asarray(self.floor_labels, dtype=np.uint16)

    def __len__(self):
        return self.csi.shape[0]

    @property
    def n_arrays(self):
        return self.csi.shape[1]

    def subset(self, indices):
        """New dataset restricted to the given record indices (copies)."""
        idx = np.asarray(indices, dtype=np.intp)
        return SceneDataset(
            config=self.config,
            arrays=list(self.arrays),
            csi=self.csi[idx].copy(),
            positions=self.positions[idx].copy(),
            timestamps=None if self.timestamps is None else self.timestamps[idx].copy(),
            floor_labels=None if self.floor_labels is None else self.floor_labels[idx].copy(),
        )


def _check_orientation(omega, label, out):
    gram = omega.T @ omega
    if not np.all(np.isfinite(omega)):
        out.append("%s: orientation has non-finite entries" % label)
        return
    if np.max(np.abs(gram - np.eye(3))) > _ORTHO_TOL:
        out.append("%s: orientation is not orthonormal within %g" % (label, _ORTHO_TOL))
    elif np.linalg.det(omega) < 0.0:
        out.append("%s: orientation is a reflection (det < 0), not a rotation" % label)


def validate_dataset(ds):
    """Return a list of human-readable invariant violations (empty if valid)."""
    out = []
    cfg = ds.config
    if not (np.isfinite(cfg.carrier_hz) and cfg.carrier_hz > 0):
        out.append("config: carrier_hz must be positive and finite")
    if not (np.isfinite(cfg.bandwidth_hz) and cfg.bandwidth_hz > 0):
        out.append("config: bandwidth_hz must be positive and finite")
    if int(cfg.n_sub) < 2:
        out.append("config: n_sub must be >= 2")

    if len(ds.arrays) == 0:
        out.append("arrays: at least one array is required")
    rows0 = cols0 = None
    for b, arr in enumerate(ds.arrays):
        label = "array %d" % b
        if arr.rows < 1 or arr.cols < 1:
            out.append("%s: rows and cols must be >= 1" % label)
        if not (np.isfinite(arr.element_spacing) and arr.element_spacing > 0):
            out.append("%s: element_spacing must be positive and finite" % label)
        if not np.all(np.isfinite(arr.position)):
            out.append("%s: position has non-finite entries" % label)
        _check_orientation(arr.orientation, label, out)
        if rows0 is None:
            rows0, cols0 = arr.rows, arr.cols
        elif (arr.rows, arr.cols) != (rows0, cols0):
            out.append("%s: all arrays must share the same rows x cols" % label)

    if ds.csi.ndim != 5:
        out.append("csi: expected 5 axes (L, B, M_row, M_col, N_sub), got %d" % ds.csi.ndim)
        return out
    L, B, mr, mc, n = ds.csi.shape
    if B != len(ds.arrays):
        out.append("csi: axis 1 is %d but %d arrays are declared" % (B, len(ds.arrays)))
    if rows0 is not None and (mr, mc) != (rows0, cols0):
        out.append("csi: spatial axes (%d, %d) do not match array shape (%d, %d)"
                   % (mr, mc, rows0, cols0))
    if n != int(cfg.n_sub):
        out.append("csi: subcarrier axis is %d but config.n_sub is %d" % (n, cfg.n_sub))
    if not np.all(np.isfinite(ds.csi.view(np.float32))):
        out.append("csi: non-finite values present")

    if ds.positions.shape != (L, 3):
        out.append("positions: expected shape (%d, 3), got %s" % (L, ds.positions.shape))
    elif not np.all(np.isfinite(ds.positions)):
        out.append("positions: non-finite values present")
    if ds.timestamps is not None:
        if ds.timestamps.shape != (L,):
            out.append("timestamps: expected shape (%d,), got %s" % (L, ds.timestamps.shape))
        elif not np.all(np.isfinite(ds.timestamps)):
            out.append("timestamps: non-finite values present")
    if ds.floor_labels is not None and ds.floor_labels.shape != (L,):
        out.append("floor_labels: expected shape (%d,), got %s" % (L, ds.floor_labels.shape))
    return out


def _header_dict(ds):
    return {
        "carrier_hz": float(ds.config.carrier_hz),
        "bandwidth_hz": float(ds.config.bandwidth_hz),
        "n_sub": int(ds.config.n_sub),
        "count": int(len(ds)),
        "arrays": [
            {
                "position": [float(v) for v in a.position],
                "orientation": [[float(v) for v in row] for row in a.orientation],
                "rows": int(a.rows),
                "cols": int(a.cols),
                "element_spacing": float(a.element_spacing),
            }
            for a in ds.arrays
        ],
        "has_timestamps": ds.timestamps is not None,
        "has_floor_labels": ds.floor_labels is not None,
    }


def save_dataset(ds, path):
    """Validate and write a dataset. Raises DatasetValidationError before
    touching the file if any invariant is violated."""
    violations = validate_dataset(ds)
    if violations:
        raise DatasetValidationError(violations)
    header = json.dumps(_header_dict(ds)).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(np.array([VERSION], dtype="<u2").tobytes())
        f.write(np.array([len(header)], dtype="<u4").tobytes())
        f.write(header)
        f.write(np.ascontiguousarray(ds.csi, dtype="<c8").tobytes())
        f.write(np.ascontiguousarray(ds.positions, dtype="<f4").tobytes())
        if ds.timestamps is not None:
            f.write(np.ascontiguousarray(ds.timestamps, dtype="<f8").tobytes())
        if ds.floor_labels is not None:
            f.write(np.ascontiguousarray(ds.floor_labels, dtype="<u2").tobytes())


def _take(buf, offset, dtype, count, what):
    dt = np.dtype(dtype)
    nbytes = dt.itemsize * count
    if offset + nbytes > len(buf):
        raise TruncatedPayloadError(
            "truncated %s: need %d bytes at offset %d, file has %d"
            % (what, nbytes, offset, len(buf)))
    arr = np.frombuffer(buf, dtype=dt, count=count, offset=offset)
    return arr, offset + nbytes


def load_dataset(path):
    with open(path, "rb") as f:
        buf = f.read()
    if buf[:4] != MAGIC:
        raise BadMagicError("bad magic %r, expected %r" % (buf[:4], MAGIC))
    if len(buf) < 10:
        raise TruncatedPayloadError("file ends inside the fixed header")
    version = int(np.frombuffer(buf, dtype="<u2", count=1, offset=4)[0])
    if version != VERSION:
        raise VersionMismatchError("container version %d, this reader handles %d"
                                   % (version, VERSION))
    header_len = int(np.frombuffer(buf, dtype="<u4", count=1, offset=6)[0])
    if 10 + header_len > len(buf):
        raise TruncatedPayloadError("file ends inside the JSON header")
    try:
        head = json.loads(buf[10:10 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CcdsError("unreadable header: %s" % e) from e

    config = RadioConfig(carrier_hz=head["carrier_hz"],
                         bandwidth_hz=head["bandwidth_hz"],
                         n_sub=int(head["n_sub"]))
    arrays = [ArrayGeometry(position=np.array(a["position"], dtype=np.float64),
                            orientation=np.array(a["orientation"], dtype=np.float64),
                            rows=int(a["rows"]), cols=int(a["cols"]),
                            element_spacing=float(a["element_spacing"]))
              for a in head["arrays"]]
    L = int(head["count"])
    B = len(arrays)
    mr = arrays[0].rows if arrays else 0
    mc = arrays[0].cols if arrays else 0
    n = int(head["n_sub"])

    off = 10 + header_len
    csi_flat, off = _take(buf, off, "<c8", L * B * mr * mc * n, "CSI payload")
    pos_flat, off = _take(buf, off, "<f4", L * 3, "positions")
    ts = fl = None
    if head.get("has_timestamps"):
        ts, off = _take(buf, off, "<f8", L, "timestamps")
    if head.get("has_floor_labels"):
        fl, off = _take(buf, off, "<u2", L, "floor labels")
    if off != len(buf):
        raise CcdsError("%d trailing bytes after payload" % (len(buf) - off))

    csi = csi_flat.reshape(L, B, mr, mc, n).copy()
    positions = pos_flat.reshape(L, 3).copy()
    if not np.all(np.isfinite(csi.view(np.float32))):
        raise NonFiniteValuesError("CSI payload contains non-finite values")
    if not np.all(np.isfinite(positions)):
        raise NonFiniteValuesError("positions contain non-finite values")
    if ts is not None:
        ts = ts.copy()
        if not np.all(np.isfinite(ts)):
            raise NonFiniteValuesError("timestamps contain non-finite values")
    return SceneDataset(config=config, arrays=arrays, csi=csi, positions=positions,
                        timestamps=ts, floor_labels=None if fl is None else fl.copy())


def datasets_equal(a, b):
    """Bit-exact equality of two datasets (used by round-trip checks)."""
    if len(a.arrays) != len(b.arrays):
        return False
    for x, y in zip(a.arrays, b.arrays):
        if (x.rows, x.cols) != (y.rows, y.cols):
            return False
        if x.element_spacing != y.element_spacing:
            return False
        if not (np.array_equal(x.position, y.position)
                and np.array_equal(x.orientation, y.orientation)):
            return False
    if (a.config.carrier_hz, a.config.bandwidth_hz, a.config.n_sub) != \
       (b.config.carrier_hz, b.config.bandwidth_hz, b.config.n_sub):
        return False
    if not (np.array_equal(a.csi, b.csi) and np.array_equal(a.positions, b.positions)):
        return False
    for u, v in ((a.timestamps, b.timestamps), (a.floor_labels, b.floor_labels)):
        if (u is None) != (v is None):
            return False
        if u is not None and not np.array_equal(u, v):
            return False
    return True
