"""Built-in desk-scale scenes.

All presets share the radio setup (3.438 GHz carrier, 50 MHz over 64
subcarriers) and place arrays on the scene perimeter facing inward. The
factory and multistory presets use compact quarter-wavelength arrays: the
wider beams keep channel dissimilarities informative at walking-scale point
spacings, where half-wavelength beams are narrow enough that most pairs look
maximally dissimilar. The small convex room and the free-space hall keep the
classic half-wavelength spacing. Noise levels are set relative to the
free-space amplitude at a reference distance.
"""

import math

import numpy as np

from .scenesim import Box, Reflector, SceneSpec, UeRegion, orientation_facing
from .tensors import SPEED_OF_LIGHT, ArrayGeometry, RadioConfig

CARRIER_HZ = 3.438e9
BANDWIDTH_HZ = 50e6
N_SUB = 64


def _radio():
    return RadioConfig(carrier_hz=CARRIER_HZ, bandwidth_hz=BANDWIDTH_HZ, n_sub=N_SUB)


def _noise_std(snr_db, ref_distance):
    lam = SPEED_OF_LIGHT / CARRIER_HZ
    amp = lam / (4.0 * math.pi * ref_distance)
    return amp * 10.0 ** (-snr_db / 20.0)


def _spacing(fraction=0.5):
    return fraction * SPEED_OF_LIGHT / CARRIER_HZ


def _perimeter_arrays(radius, height, target, rows, cols, count=8,
                      spacing=None):
    """count arrays spread on a square of half-width radius at the given
    height, all facing the target point."""
    if count == 8:
        spots = [(-radius, -radius), (-radius, 0.0), (-radius, radius),
                 (0.0, radius), (radius, radius), (radius, 0.0),
                 (radius, -radius), (0.0, -radius)]
    elif count == 4:
        spots = [(-radius, 0.0), (0.0, radius), (radius, 0.0), (0.0, -radius)]
    else:
        raise ValueError("perimeter layout supports 4 or 8 arrays")
    if spacing is None:
        spacing = _spacing()
    out = []
    for x, y in spots:
        pos = np.array([x, y, height])
        out.append(ArrayGeometry(position=pos,
                                 orientation=orientation_facing(pos, target),
                                 rows=rows, cols=cols,
                                 element_spacing=spacing))
    return out


def _hall_reflectors(half, ceiling, coefficient=0.6):
    return [
        Reflector(axis=0, offset=-half, coefficient=coefficient),
        Reflector(axis=0, offset=half, coefficient=coefficient),
        Reflector(axis=1, offset=-half, coefficient=coefficient),
        Reflector(axis=1, offset=half, coefficient=coefficient),
        Reflector(axis=2, offset=0.0, coefficient=coefficient),
        Reflector(axis=2, offset=ceiling, coefficient=coefficient),
    ]


def _around_block(count, half=3.0, margin=0.6, block_top=7.0):
    """UE regions tiling the walkable space around a central block of the
    given half-width: four side slabs plus a thin cap above the block, with
    counts proportional to region volume. Keeping UEs out of the absorbing
    block matters: points inside it would receive pure noise and act as
    wormholes in any neighborhood graph built from channel dissimilarities."""
    ext = half + margin
    boxes = [
        Box(lo=[-8.0, -8.0, 2.0], hi=[-ext, 8.0, 8.0]),
        Box(lo=[ext, -8.0, 2.0], hi=[8.0, 8.0, 8.0]),
        Box(lo=[-ext, -8.0, 2.0], hi=[ext, -ext, 8.0]),
        Box(lo=[-ext, ext, 2.0], hi=[ext, 8.0, 8.0]),
        Box(lo=[-ext, -ext, block_top + margin], hi=[ext, ext, 8.0]),
    ]
    vols = [float(np.prod(np.array(b.hi) - np.array(b.lo))) for b in boxes]
    total = sum(vols)
    counts = [int(round(count * v / total)) for v in vols]
    counts[0] += count - sum(counts)
    # tiny totals can starve a region; empty regions are not representable
    return [UeRegion(box=b, count=c) for b, c in zip(boxes, counts) if c > 0]


def factory(seed=1, count=2000, n_row=8, n_col=8, snr_db=20.0, sync=True):
    """Single highly reflective hall, 16 x 16 m working area with UE heights
    2 to 8 m, a central 6 x 6 x 7 m absorbing block, and eight compact
    quarter-wave arrays just below the ceiling. UEs sample the walkable
    region around the block, so triangulation suffers from blocked and
    reflected paths while the space stays connected for charting."""
    arrays = _perimeter_arrays(radius=8.7, height=8.5,
                               target=np.array([0.0, 0.0, 5.0]),
                               rows=n_row, cols=n_col, count=8,
                               spacing=_spacing(0.25))
    return SceneSpec(
        config=_radio(),
        arrays=arrays,
        reflectors=_hall_reflectors(half=9.0, ceiling=9.0, coefficient=0.9),
        blockers=[Box(lo=[-3.0, -3.0, 0.0], hi=[3.0, 3.0, 7.0])],
        ue_regions=_around_block(count),
        noise_std=_noise_std(snr_db, ref_distance=8.0),
        inter_array_sync=sync,
        max_reflection_order=1,
        rng_seed=seed)


def los_hall(seed=4, count=200, n_row=8, n_col=8):
    """Free-space variant of the factory hall: no blocker, no reflectors, no
    noise. Every array sees every UE over an exact single path."""
    arrays = _perimeter_arrays(radius=8.7, height=8.5,
                               target=np.array([0.0, 0.0, 5.0]),
                               rows=n_row, cols=n_col, count=8)
    return SceneSpec(
        config=_radio(),
        arrays=arrays,
        reflectors=[],
        blockers=[],
        ue_regions=[UeRegion(box=Box(lo=[-8.0, -8.0, 2.0], hi=[8.0, 8.0, 8.0]),
                             count=count)],
        noise_std=0.0,
        inter_array_sync=True,
        max_reflection_order=0,
        rng_seed=seed)


def convex_hall(seed=3, count=200, snr_db=30.0):
    """Small convex single-room scene for neighborhood-structure checks:
    eight 4 x 4 arrays around a 6 x 6 m area, floor reflection only."""
    arrays = _perimeter_arrays(radius=4.0, height=2.8,
                               target=np.array([0.0, 0.0, 1.5]),
                               rows=4, cols=4, count=8)
    return SceneSpec(
        config=_radio(),
        arrays=arrays,
        reflectors=[Reflector(axis=2, offset=0.0, coefficient=0.6)],
        blockers=[],
        ue_regions=[UeRegion(box=Box(lo=[-3.0, -3.0, 1.0], hi=[3.0, 3.0, 2.0]),
                             count=count)],
        noise_std=_noise_std(snr_db, ref_distance=5.0),
        inter_array_sync=True,
        max_reflection_order=1,
        rng_seed=seed)


def sweep_rows(n_row, seed=5, count=1000, snr_db=20.0):
    """Row-count sweep scene: factory hall without the central block so
    angle errors are noise-driven and comparable across array sizes. Same
    quarter-wave spacing as the factory preset."""
    arrays = _perimeter_arrays(radius=8.7, height=8.5,
                               target=np.array([0.0, 0.0, 5.0]),
                               rows=n_row, cols=8, count=8,
                               spacing=_spacing(0.25))
    return SceneSpec(
        config=_radio(),
        arrays=arrays,
        reflectors=_hall_reflectors(half=9.0, ceiling=9.0),
        blockers=[],
        ue_regions=[UeRegion(box=Box(lo=[-8.0, -8.0, 2.0], hi=[8.0, 8.0, 8.0]),
                             count=count)],
        noise_std=_noise_std(snr_db, ref_distance=8.0),
        inter_array_sync=True,
        max_reflection_order=1,
        rng_seed=seed)


def sweep_density(density, seed=6, snr_db=20.0):
    """Point-density sweep scene (points per cubic meter over the
    16 x 16 x 6 m region), 4 x 8 arrays."""
    volume = 16.0 * 16.0 * 6.0
    count = max(2, int(round(density * volume)))
    scene = sweep_rows(n_row=4, seed=seed, count=count, snr_db=snr_db)
    return scene


def multistory(seed=2, per_floor=500, floors=5, snr_db=20.0):
    """Five stacked floors, 4.25 m apart, separated by absorbing slabs with
    a gap along the facades; four 2 x 4 quarter-wave arrays per floor height
    sit 11.5 m out from the center looking in. Cross-floor visibility exists
    only near the slab edges, which keeps the neighborhood graph sparse
    between floors (floors stay distinct) but connected (vertical order is
    recoverable). Quarter-wave spacing keeps within-floor dissimilarities
    below the cross-floor level out to useful ranges; half-wave beams
    saturate early enough that spurious cross-floor pairs outrank real
    neighbors."""
    cfg = _radio()
    floor_z = [1.5 + 4.25 * k for k in range(floors)]
    arrays = []
    for z in floor_z:
        for x, y in ((-11.5, 0.0), (0.0, 11.5), (11.5, 0.0), (0.0, -11.5)):
            pos = np.array([x, y, z])
            arrays.append(ArrayGeometry(position=pos,
                                        orientation=orientation_facing(
                                            pos, np.array([0.0, 0.0, z])),
                                        rows=2, cols=4,
                                        element_spacing=_spacing(0.25)))
    slabs = []
    reflectors = [Reflector(axis=2, offset=0.0, coefficient=0.5)]
    for k in range(floors - 1):
        lo_z = floor_z[k] + 2.0
        slabs.append(Box(lo=[-9.0, -9.0, lo_z], hi=[9.0, 9.0, lo_z + 0.3]))
        reflectors.append(Reflector(axis=2, offset=lo_z - 0.01, coefficient=0.5,
                                    bounds=((-9.0, 9.0), (-9.0, 9.0))))
    regions = [UeRegion(box=Box(lo=[-8.0, -8.0, z - 0.05],
                                hi=[8.0, 8.0, z + 0.05]), count=per_floor)
               for z in floor_z]
    return SceneSpec(
        config=cfg,
        arrays=arrays,
        reflectors=reflectors,
        blockers=slabs,
        ue_regions=regions,
        noise_std=_noise_std(snr_db, ref_distance=12.0),
        inter_array_sync=True,
        max_reflection_order=1,
        rng_seed=seed)


PRESETS = {
    "factory": factory,
    "los": los_hall,
    "convex": convex_hall,
    "multistory": multistory,
}
