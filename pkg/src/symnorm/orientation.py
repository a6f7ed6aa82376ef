"""Direction codebooks, orientation binning, Euler poses and view sampling."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import util

FULL_SPHERE = "full_sphere"
HEMISPHERE = "hemisphere"
HORIZONTAL_CIRCLE = "horizontal_circle"
SUPPORTS = (FULL_SPHERE, HEMISPHERE, HORIZONTAL_CIRCLE)

GOLDEN_CONJUGATE = (np.sqrt(5.0) - 1.0) / 2.0


def canonical_sign(vectors):
    """Flip signs so the first nonzero component among (z, y, x) is positive.

    Accepts a single 3-vector or an (n, 3) array; zero vectors pass through.
    """
    arr = np.asarray(vectors, dtype=np.float64)
    single = arr.ndim == 1
    out = arr.reshape(-1, 3).copy()
    key = np.where(
        out[:, 2] != 0.0,
        np.sign(out[:, 2]),
        np.where(out[:, 1] != 0.0, np.sign(out[:, 1]), np.sign(out[:, 0])),
    )
    key[key == 0.0] = 1.0
    out *= key[:, None]
    return out[0] if single else out


@dataclass(frozen=True)
class OrientationCodebook:
    """K approximately uniform unit directions used as classification bins."""

    directions: np.ndarray  # (K, 3)
    support: str

    def __post_init__(self):
        if self.support not in SUPPORTS:
            raise ValueError(f"unknown support {self.support!r}")
        dirs = np.ascontiguousarray(np.asarray(self.directions, dtype=np.float64)).reshape(-1, 3)
        if len(dirs) == 0:
            raise ValueError("codebook needs at least one direction")
        norms = np.linalg.norm(dirs, axis=1)
        if np.abs(norms - 1.0).max() > 1e-9:
            raise ValueError("codebook directions must be unit length")
        if self.support == HEMISPHERE and dirs[:, 2].min() < 0.0:
            raise ValueError("hemisphere codebook requires z >= 0")
        if self.support == HORIZONTAL_CIRCLE and np.abs(dirs[:, 2]).max() != 0.0:
            raise ValueError("horizontal codebook requires z == 0")
        if len(dirs) > 1:
            nearest, _ = cKDTree(dirs).query(dirs, k=2)
            if nearest[:, 1].min() <= 0.0:
                raise ValueError("codebook directions must be pairwise distinct")
        object.__setattr__(self, "directions", util.readonly(dirs))

    @property
    def K(self) -> int:
        return len(self.directions)


def fibonacci_codebook(K: int, support: str = FULL_SPHERE) -> OrientationCodebook:
    """Golden-angle lattice on the sphere or hemisphere, or an equal half-circle.

    full_sphere: z_k = 1 - (2k+1)/K.  hemisphere: z_k = 1 - (k+0.5)/K, all
    strictly front-facing.  horizontal_circle: azimuths pi*k/K in the z = 0
    plane, spanning a half circle because an orientation and its negation
    name the same plane.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    k = np.arange(K, dtype=np.float64)
    if support == FULL_SPHERE:
        z = 1.0 - (2.0 * k + 1.0) / K
        theta = 2.0 * np.pi * k * GOLDEN_CONJUGATE
        r = np.sqrt(np.maximum(1.0 - z * z, 0.0))
        dirs = np.column_stack([r * np.cos(theta), r * np.sin(theta), z])
    elif support == HEMISPHERE:
        z = 1.0 - (k + 0.5) / K
        theta = 2.0 * np.pi * k * GOLDEN_CONJUGATE
        r = np.sqrt(np.maximum(1.0 - z * z, 0.0))
        dirs = np.column_stack([r * np.cos(theta), r * np.sin(theta), z])
    elif support == HORIZONTAL_CIRCLE:
        az = np.pi * k / K
        dirs = np.column_stack([np.cos(az), np.sin(az), np.zeros(K)])
    else:
        raise ValueError(f"unknown support {support!r}")
    # the construction is unit to machine precision; renormalizing would
    # perturb the exact z_k values the formula promises
    return OrientationCodebook(dirs, support)


def _require_unit(vectors, tol=1e-6):
    norms = np.linalg.norm(vectors, axis=-1)
    if np.abs(norms - 1.0).max() > tol:
        raise ValueError("direction must be unit length")


def bin_orientation(codebook: OrientationCodebook, v, sign_invariant: bool = False) -> int:
    """Index of the codebook direction with maximal (optionally absolute) dot."""
    vec = np.asarray(v, dtype=np.float64).reshape(3)
    _require_unit(vec)
    scores = codebook.directions @ vec
    if sign_invariant:
        scores = np.abs(scores)
    # np.argmax returns the first maximum: ties break to the lowest index
    return int(np.argmax(scores))


def bin_orientations(codebook: OrientationCodebook, vectors, sign_invariant: bool = False) -> np.ndarray:
    """Vectorized bin_orientation over an (n, 3) array."""
    arr = np.asarray(vectors, dtype=np.float64).reshape(-1, 3)
    _require_unit(arr)
    scores = arr @ codebook.directions.T
    if sign_invariant:
        scores = np.abs(scores)
    return np.argmax(scores, axis=1).astype(np.int32)


def euler_to_rotation(azimuth_deg: float, elevation_deg: float, cyclo_deg: float) -> np.ndarray:
    """World-to-camera rotation R_z(cyclo) @ R_x(-elevation) @ R_y(azimuth).

    Right-handed frames, y-up world; the camera has +x right, +y up and
    looks along -z.  The camera translation is handled by the renderer.
    """
    ay, ax, az = np.radians([azimuth_deg, -elevation_deg, cyclo_deg])
    cy, sy = np.cos(ay), np.sin(ay)
    cx, sx = np.cos(ax), np.sin(ax)
    cz, sz = np.cos(az), np.sin(az)
    r_y = np.array([[cy, 0.0, sy], [0.0, 1.0, 0.0], [-sy, 0.0, cy]])
    r_x = np.array([[1.0, 0.0, 0.0], [0.0, cx, -sx], [0.0, sx, cx]])
    r_z = np.array([[cz, -sz, 0.0], [sz, cz, 0.0], [0.0, 0.0, 1.0]])
    return r_z @ r_x @ r_y


@dataclass(frozen=True)
class ViewPose:
    """Azimuth/elevation/cyclo-rotation triple with its cached rotation."""

    azimuth_deg: float
    elevation_deg: float
    cyclo_deg: float
    rotation: np.ndarray = field(init=False)

    def __post_init__(self):
        if not -180.0 < self.azimuth_deg <= 180.0:
            raise ValueError("azimuth must lie in (-180, 180]")
        if not -90.0 < self.cyclo_deg <= 90.0:
            raise ValueError("cyclo-rotation must lie in (-90, 90]")
        rot = euler_to_rotation(self.azimuth_deg, self.elevation_deg, self.cyclo_deg)
        object.__setattr__(self, "rotation", util.readonly(rot))


_CANONICAL_RANGES = {
    "V_N": ((-180.0, 180.0), (0.0, 10.0), (0.0, 0.0)),
    "V_D": ((-180.0, 180.0), (0.0, 50.0), (-30.0, 30.0)),
}


@dataclass(frozen=True)
class ViewDistribution:
    """Uniform box over (azimuth, elevation, cyclo); azimuth half-open above."""

    name: str
    azimuth_range: tuple
    elevation_range: tuple
    cyclo_range: tuple

    def __post_init__(self):
        expected = _CANONICAL_RANGES.get(self.name)
        if expected is None:
            raise ValueError(f"unknown view distribution {self.name!r}")
        if (self.azimuth_range, self.elevation_range, self.cyclo_range) != expected:
            raise ValueError(f"{self.name} ranges must be {expected}")


V_N = ViewDistribution("V_N", *_CANONICAL_RANGES["V_N"])
V_D = ViewDistribution("V_D", *_CANONICAL_RANGES["V_D"])


def view_distribution(name: str) -> ViewDistribution:
    if name == "V_N":
        return V_N
    if name == "V_D":
        return V_D
    raise ValueError(f"unknown view distribution {name!r}")


def sample_view(dist: ViewDistribution, seed: int) -> ViewPose:
    """One pose with each angle uniform over its interval, deterministic per seed."""
    rng = np.random.default_rng(seed)
    u = rng.random(3)
    azimuth = 180.0 - 360.0 * u[0]  # uniform over (-180, 180]
    lo, hi = dist.elevation_range
    elevation = lo + (hi - lo) * u[1]
    lo, hi = dist.cyclo_range
    cyclo = lo + (hi - lo) * u[2]  # exact lo when the interval is degenerate
    return ViewPose(float(azimuth), float(elevation), float(cyclo))


def rotate_orientations(normals, rotation) -> np.ndarray:
    """Rotate unit orientations and re-canonicalize their signs."""
    rot = np.asarray(rotation, dtype=np.float64)
    if rot.shape != (3, 3) or np.abs(rot @ rot.T - np.eye(3)).max() > 1e-9:
        raise ValueError("rotation must be a 3x3 orthonormal matrix")
    arr = np.asarray(normals, dtype=np.float64).reshape(-1, 3)
    return canonical_sign(arr @ rot.T)


def make_symmetry_label(normals, codebook: OrientationCodebook) -> np.ndarray:
    """Multilabel vector: bit k set iff some normal bins (sign-invariant) to k."""
    if codebook.support == HEMISPHERE:
        raise ValueError("symmetry labels need a sign-invariant codebook "
                         "(horizontal_circle or full_sphere)")
    label = np.zeros(codebook.K, dtype=bool)
    arr = np.asarray(normals, dtype=np.float64).reshape(-1, 3)
    if len(arr):
        label[bin_orientations(codebook, arr, sign_invariant=True)] = True
    return label
