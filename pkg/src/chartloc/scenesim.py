"""Synthetic multipath scenes: image-source ray model and CSI synthesis.

A scene is a set of rectangular arrays, axis-aligned reflector planes,
axis-aligned box blockers, and uniform UE sampling regions. Paths are the
line of sight (when no blocker cuts the segment) plus one specular bounce
per reflector plane (image-source construction, both legs unblocked, bounce
point inside the plane's bounds when given). Reflection order is capped
at one.

Free-space amplitude is wavelength / (4 pi d_total) scaled by the product of
reflection coefficients, with carrier phase exp(-j 2 pi d_total / wavelength).
Subcarrier n then adds exp(-j 2 pi f_n tau) at baseband frequency
f_n = n * subcarrier_spacing.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .tensors import (SPEED_OF_LIGHT, ArrayGeometry, RadioConfig, SceneDataset)

_EPS = 1e-12


class DegenerateGeometryError(ValueError):
    pass


@dataclass(frozen=True)
class Box:
    """Axis-aligned box given by its two extreme corners, lo < hi per axis."""
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lo", np.asarray(self.lo, dtype=np.float64).reshape(3))
        object.__setattr__(self, "hi", np.asarray(self.hi, dtype=np.float64).reshape(3))


@dataclass(frozen=True)
class Reflector:
    """Axis-aligned mirror plane coordinate[axis] == offset.

    coefficient is the amplitude reflection factor in (0, 1]. bounds, when
    set, restricts the plane to a rectangle: ((lo_a, hi_a), (lo_b, hi_b))
    over the two remaining axes in ascending axis order.
    """
    axis: int
    offset: float
    coefficient: float
    bounds: tuple = None


@dataclass(frozen=True)
class UeRegion:
    box: Box
    count: int


@dataclass(frozen=True)
class SceneSpec:
    config: RadioConfig
    arrays: list
    reflectors: list
    blockers: list
    ue_regions: list
    noise_std: float = 0.0
    inter_array_sync: bool = True
    max_reflection_order: int = 1
    rng_seed: int = 0


@dataclass(frozen=True)
class PropagationPath:
    """One resolved path at one array: complex gain at the carrier, absolute
    delay in seconds, and the world-frame unit vector pointing from the array
    toward where the wavefront arrives from."""
    gain: complex
    delay: float
    arrival_direction: np.ndarray
    kind: str
    reflector_index: int = -1


def validate_scene(scene):
    if not scene.arrays:
        raise ValueError("scene has no arrays")
    if not scene.ue_regions:
        raise ValueError("scene has no ue_regions")
    if scene.max_reflection_order not in (0, 1):
        raise ValueError("max_reflection_order must be 0 or 1")
    if scene.noise_std < 0:
        raise ValueError("noise_std must be >= 0")
    for i, r in enumerate(scene.reflectors):
        if r.axis not in (0, 1, 2):
            raise ValueError("reflector %d: axis must be 0, 1 or 2" % i)
        if not 0.0 < r.coefficient <= 1.0:
            raise ValueError("reflector %d: coefficient must be in (0, 1]" % i)
    for i, b in enumerate(scene.blockers):
        if not np.all(b.lo < b.hi):
            raise ValueError("blocker %d: lo must be < hi per axis" % i)
    for i, reg in enumerate(scene.ue_regions):
        if not np.all(reg.box.lo < reg.box.hi):
            raise ValueError("ue_region %d: lo must be < hi per axis" % i)
        if reg.count < 1:
            raise ValueError("ue_region %d: count must be >= 1" % i)


def segment_blocked(a, b, box):
    """True if the open segment a-b passes through the box interior.
    Touching a face or sliding along it does not block."""
    a = np.asarray(a, dtype=np.float64)
    d = np.asarray(b, dtype=np.float64) - a
    t0, t1 = 0.0, 1.0
    for k in range(3):
        if abs(d[k]) < _EPS:
            if a[k] <= box.lo[k] or a[k] >= box.hi[k]:
                return False
        else:
            ta = (box.lo[k] - a[k]) / d[k]
            tb = (box.hi[k] - a[k]) / d[k]
            if ta > tb:
                ta, tb = tb, ta
            t0 = max(t0, ta)
            t1 = min(t1, tb)
            if t0 >= t1:
                return False
    return (t1 - t0) > 1e-9


def _clear(a, b, blockers):
    return all(not segment_blocked(a, b, box) for box in blockers)


def trace_paths(scene, ue, array):
    """Resolve all propagation paths from a UE position to one array.

    Returns the LoS path first (if unblocked) followed by one path per
    reflector in list order (if the specular bounce exists and both legs are
    clear). Free space yields exactly one path of delay distance / c.
    """
    ue = np.asarray(ue, dtype=np.float64).reshape(3)
    p = array.position
    lam = scene.config.wavelength
    paths = []

    d_los = float(np.linalg.norm(ue - p))
    if d_los < 1e-9:
        raise DegenerateGeometryError("UE coincides with array position")
    if _clear(p, ue, scene.blockers):
        amp = lam / (4.0 * math.pi * d_los)
        phase = -2.0 * math.pi * d_los / lam
        paths.append(PropagationPath(
            gain=amp * complex(math.cos(phase), math.sin(phase)),
            delay=d_los / SPEED_OF_LIGHT,
            arrival_direction=(ue - p) / d_los,
            kind="los"))

    if scene.max_reflection_order >= 1:
        for ri, refl in enumerate(scene.reflectors):
            k = refl.axis
            sa = ue[k] - refl.offset
            sb = p[k] - refl.offset
            if sa * sb <= _EPS:
                continue  # on the plane or opposite sides: no specular bounce
            image = ue.copy()
            image[k] = 2.0 * refl.offset - ue[k]
            denom = image[k] - p[k]
            t = (refl.offset - p[k]) / denom
            if not 0.0 < t < 1.0:
                continue
            hit = p + t * (image - p)
            if refl.bounds is not None:
                axes = [a for a in range(3) if a != k]
                (lo0, hi0), (lo1, hi1) = refl.bounds
                if not (lo0 <= hit[axes[0]] <= hi0 and lo1 <= hit[axes[1]] <= hi1):
                    continue
            if not (_clear(p, hit, scene.blockers) and _clear(hit, ue, scene.blockers)):
                continue
            d_tot = float(np.linalg.norm(image - p))
            leg = float(np.linalg.norm(hit - p))
            if leg < 1e-9 or d_tot < 1e-9:
                continue
            amp = refl.coefficient * lam / (4.0 * math.pi * d_tot)
            phase = -2.0 * math.pi * d_tot / lam
            paths.append(PropagationPath(
                gain=amp * complex(math.cos(phase), math.sin(phase)),
                delay=d_tot / SPEED_OF_LIGHT,
                arrival_direction=(hit - p) / leg,
                kind="reflection",
                reflector_index=ri))
    return paths


def steering_vector(array, direction, wavelength):
    """Narrowband array response for a wave arriving from the given
    world-frame unit direction. Entry (r, c) is
    exp(j (2 pi / wavelength) <offset(r, c), local_direction>), flattened
    row-major to length rows * cols. Broadside (local +x) gives all ones."""
    local = array.orientation.T @ np.asarray(direction, dtype=np.float64).reshape(3)
    off = array.element_offsets()
    phase = (2.0 * math.pi / wavelength) * (off @ local)
    return np.exp(1j * phase).ravel()


def synthesize_snapshot(scene, ue, rng):
    """One CSI tensor (B, M_row, M_col, N_sub) complex128 for a UE position.

    Per array b, in index order: when inter_array_sync is off, draw a carrier
    phase offset phi_b ~ U[0, 2 pi) then a timing offset
    delta_b ~ U[0, 0.1 / subcarrier_spacing); with sync on both are zero and
    nothing is drawn. After all arrays, complex white noise of per-entry
    standard deviation noise_std is added (real then imaginary draws, skipped
    entirely when noise_std == 0). This fixed draw order makes a snapshot a
    pure function of (scene, ue, rng state).
    """
    cfg = scene.config
    b_count = len(scene.arrays)
    mr, mc = scene.arrays[0].rows, scene.arrays[0].cols
    n = int(cfg.n_sub)
    lam = cfg.wavelength
    df = cfg.subcarrier_spacing
    fgrid = np.arange(n) * df

    h = np.zeros((b_count, mr, mc, n), dtype=np.complex128)
    for b, arr in enumerate(scene.arrays):
        if scene.inter_array_sync:
            phi = 0.0
            delta = 0.0
        else:
            phi = rng.uniform(0.0, 2.0 * math.pi)
            delta = rng.uniform(0.0, 0.1 / df)
        acc = np.zeros((mr, mc, n), dtype=np.complex128)
        for path in trace_paths(scene, ue, arr):
            sv = steering_vector(arr, path.arrival_direction, lam).reshape(mr, mc)
            tone = np.exp(-2j * math.pi * fgrid * (path.delay + delta))
            acc += path.gain * sv[:, :, None] * tone[None, None, :]
        h[b] = acc * complex(math.cos(phi), math.sin(phi))
    if scene.noise_std > 0.0:
        scale = scene.noise_std / math.sqrt(2.0)
        h += scale * rng.standard_normal(h.shape)
        h += 1j * scale * rng.standard_normal(h.shape)
    return h


def generate_dataset(scene):
    """Sample UE positions uniformly per region and synthesize every record.

    Seeding: SeedSequence(rng_seed) spawns one child stream for positions
    plus one per record, so the output is a pure function of the scene and
    any record can be regenerated in isolation.
    """
    validate_scene(scene)
    total = sum(reg.count for reg in scene.ue_regions)
    children = np.random.SeedSequence(scene.rng_seed).spawn(1 + total)
    rng_pos = np.random.default_rng(children[0])

    positions = np.empty((total, 3), dtype=np.float64)
    floors = np.empty(total, dtype=np.uint16)
    at = 0
    for ridx, reg in enumerate(scene.ue_regions):
        positions[at:at + reg.count] = rng_pos.uniform(
            low=reg.box.lo, high=reg.box.hi, size=(reg.count, 3))
        floors[at:at + reg.count] = ridx
        at += reg.count

    mr, mc = scene.arrays[0].rows, scene.arrays[0].cols
    csi = np.empty((total, len(scene.arrays), mr, mc, int(scene.config.n_sub)),
                   dtype=np.complex64)
    for l in range(total):
        rng_l = np.random.default_rng(children[1 + l])
        csi[l] = synthesize_snapshot(scene, positions[l], rng_l)

    return SceneDataset(config=scene.config, arrays=list(scene.arrays),
                        csi=csi, positions=positions.astype(np.float32),
                        timestamps=None, floor_labels=floors)


def orientation_facing(position, target, up=(0.0, 0.0, 1.0)):
    """Rotation whose local x axis (boresight) points from position at
    target. Local y is horizontal when possible."""
    x = np.asarray(target, dtype=np.float64) - np.asarray(position, dtype=np.float64)
    nx = np.linalg.norm(x)
    if nx < 1e-12:
        raise DegenerateGeometryError("cannot face a coincident target")
    x = x / nx
    upv = np.asarray(up, dtype=np.float64)
    y = np.cross(upv, x)
    ny = np.linalg.norm(y)
    if ny < 1e-9:
        y = np.cross(np.array([1.0, 0.0, 0.0]), x)
        ny = np.linalg.norm(y)
    y = y / ny
    z = np.cross(x, y)
    return np.stack([x, y, z], axis=1)


def scene_to_dict(scene):
    return {
        "config": {
            "carrier_hz": float(scene.config.carrier_hz),
            "bandwidth_hz": float(scene.config.bandwidth_hz),
            "n_sub": int(scene.config.n_sub),
        },
        "arrays": [
            {
                "position": [float(v) for v in a.position],
                "orientation": [[float(v) for v in row] for row in a.orientation],
                "rows": int(a.rows),
                "cols": int(a.cols),
                "element_spacing": float(a.element_spacing),
            }
            for a in scene.arrays
        ],
        "reflectors": [
            {
                "axis": int(r.axis),
                "offset": float(r.offset),
                "coefficient": float(r.coefficient),
                "bounds": None if r.bounds is None else
                    [[float(r.bounds[0][0]), float(r.bounds[0][1])],
                     [float(r.bounds[1][0]), float(r.bounds[1][1])]],
            }
            for r in scene.reflectors
        ],
        "blockers": [{"lo": [float(v) for v in b.lo],
                      "hi": [float(v) for v in b.hi]} for b in scene.blockers],
        "ue_regions": [{"lo": [float(v) for v in reg.box.lo],
                        "hi": [float(v) for v in reg.box.hi],
                        "count": int(reg.count)} for reg in scene.ue_regions],
        "noise_std": float(scene.noise_std),
        "inter_array_sync": bool(scene.inter_array_sync),
        "max_reflection_order": int(scene.max_reflection_order),
        "rng_seed": int(scene.rng_seed),
    }


def scene_from_dict(d):
    cfg = RadioConfig(carrier_hz=d["config"]["carrier_hz"],
                      bandwidth_hz=d["config"]["bandwidth_hz"],
                      n_sub=int(d["config"]["n_sub"]))
    arrays = [ArrayGeometry(position=np.array(a["position"], dtype=np.float64),
                            orientation=np.array(a["orientation"], dtype=np.float64),
                            rows=int(a["rows"]), cols=int(a["cols"]),
                            element_spacing=float(a["element_spacing"]))
              for a in d["arrays"]]
    reflectors = [Reflector(axis=int(r["axis"]), offset=float(r["offset"]),
                            coefficient=float(r["coefficient"]),
                            bounds=None if r.get("bounds") is None else
                                ((r["bounds"][0][0], r["bounds"][0][1]),
                                 (r["bounds"][1][0], r["bounds"][1][1])))
                  for r in d.get("reflectors", [])]
    blockers = [Box(lo=b["lo"], hi=b["hi"]) for b in d.get("blockers", [])]
    regions = [UeRegion(box=Box(lo=r["lo"], hi=r["hi"]), count=int(r["count"]))
               for r in d["ue_regions"]]
    return SceneSpec(config=cfg, arrays=arrays, reflectors=reflectors,
                     blockers=blockers, ue_regions=regions,
                     noise_std=float(d.get("noise_std", 0.0)),
                     inter_array_sync=bool(d.get("inter_array_sync", True)),
                     max_reflection_order=int(d.get("max_reflection_order", 1)),
                     rng_seed=int(d.get("rng_seed", 0)))


def save_scene(scene, path):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(scene_to_dict(scene), f, indent=2)


def load_scene(path):
    with open(path, "r", encoding="utf-8") as f:
        return scene_from_dict(json.load(f))
