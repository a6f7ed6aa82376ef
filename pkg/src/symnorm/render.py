"""Software perspective rasterizer for per-pixel camera-frame normal maps.

The camera auto-frames the posed mesh: it sits on the view axis at the
distance where the mesh's bounding sphere fills the vertical field of view
times a margin, looking at the bbox center along -z.  Shading is flat (face
normals), normals are flipped to face the viewer (z > 0), and coverage uses
a top-left fill rule at pixel centers (i + 0.5, j + 0.5) so output is
bit-exact reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import imgfmt, util
from .errors import GeometryError
from .mesh_io import TriangleMesh
from .orientation import HEMISPHERE, OrientationCodebook, ViewPose, bin_orientations

BACKGROUND_DEPTH = np.inf


@dataclass(frozen=True)
class CameraIntrinsics:
    width: int = 224
    height: int = 224
    fov_y_deg: float = 30.0
    auto_frame_margin: float = 1.1

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("image dimensions must be at least 1x1")
        if not 0.0 < self.fov_y_deg < 180.0:
            raise ValueError("vertical field of view must lie in (0, 180)")
        if self.auto_frame_margin < 1.0:
            raise ValueError("auto-frame margin must be >= 1")


@dataclass(frozen=True)
class CameraFrame:
    """Derived placement: posed-space center/distance plus pixel projection."""

    center: np.ndarray
    distance: float
    focal_px: float
    cx: float
    cy: float
    width: int
    height: int


@dataclass(frozen=True)
class NormalMap:
    """Per-pixel camera-frame unit normals with mask and depth channels."""

    normals: np.ndarray  # (h, w, 3), zero on background
    mask: np.ndarray     # (h, w) bool
    depth: np.ndarray    # (h, w), BACKGROUND_DEPTH on background

    def __post_init__(self):
        normals = np.ascontiguousarray(np.asarray(self.normals, dtype=np.float64))
        mask = np.ascontiguousarray(np.asarray(self.mask, dtype=bool))
        depth = np.ascontiguousarray(np.asarray(self.depth, dtype=np.float64))
        if normals.ndim != 3 or normals.shape[2] != 3 or normals.shape[:2] != mask.shape \
                or depth.shape != mask.shape:
            raise ValueError("normals, mask and depth shapes disagree")
        if mask.any():
            fg = normals[mask]
            if np.abs(np.linalg.norm(fg, axis=1) - 1.0).max() > 1e-6:
                raise ValueError("masked normals must be unit length")
            if fg[:, 2].min() <= 0.0:
                raise ValueError("masked normals must face the viewer (z > 0)")
        if (~mask).any():
            if np.any(normals[~mask] != 0.0) or not np.all(depth[~mask] == BACKGROUND_DEPTH):
                raise ValueError("background pixels must have zero normal and sentinel depth")
        object.__setattr__(self, "normals", util.readonly(normals))
        object.__setattr__(self, "mask", util.readonly(mask))
        object.__setattr__(self, "depth", util.readonly(depth))

    @property
    def height(self) -> int:
        return self.mask.shape[0]

    @property
    def width(self) -> int:
        return self.mask.shape[1]


@dataclass(frozen=True)
class LabelMap:
    """Per-pixel orientation bins in {0..K-1} plus BACKGROUND = K."""

    labels: np.ndarray  # (h, w) int32
    K: int

    def __post_init__(self):
        labels = np.ascontiguousarray(np.asarray(self.labels, dtype=np.int32))
        if labels.ndim != 2:
            raise ValueError("labels must be a 2-d array")
        if labels.size and (labels.min() < 0 or labels.max() > self.K):
            raise ValueError("labels must lie in {0..K}")
        object.__setattr__(self, "labels", util.readonly(labels))

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def background(self) -> int:
        return self.K


def frame_camera(mesh: TriangleMesh, pose: ViewPose, cam: CameraIntrinsics) -> CameraFrame:
    """Auto-framing camera placement for the rotated mesh."""
    rotated = mesh.vertices @ pose.rotation.T
    center = 0.5 * (rotated.min(axis=0) + rotated.max(axis=0))
    radius = float(np.linalg.norm(rotated - center, axis=1).max())
    if radius <= 0.0:
        raise GeometryError("mesh bounding sphere has zero radius")
    half_fov = 0.5 * np.radians(cam.fov_y_deg)
    distance = cam.auto_frame_margin * radius / np.sin(half_fov)
    focal_px = (cam.height / 2.0) / np.tan(half_fov)
    return CameraFrame(util.readonly(center), distance, focal_px,
                       cam.width / 2.0, cam.height / 2.0, cam.width, cam.height)


def _edge_includes_boundary(a, b):
    # top-left rule for a triangle wound so the interior is on the positive
    # side of every edge function: horizontal edges going right are "top",
    # edges going up in screen coordinates (dy < 0) are "left"
    dy = b[1] - a[1]
    return (dy == 0.0 and b[0] - a[0] > 0.0) or dy < 0.0


def rasterize(mesh: TriangleMesh, pose: ViewPose, cam: CameraIntrinsics | None = None) -> NormalMap:
    """Z-buffered flat-shaded render of camera-frame normals and depth.

    Depth is the distance along the view axis, found per pixel by
    intersecting the pixel-center ray with the face plane; the auto-framing
    guarantees the whole mesh sits strictly in front of the camera.
    """
    cam = cam if cam is not None else CameraIntrinsics()
    frame = frame_camera(mesh, pose, cam)
    verts = mesh.vertices @ pose.rotation.T - frame.center
    verts[:, 2] -= frame.distance
    w, h = frame.width, frame.height
    depth = np.full((h, w), BACKGROUND_DEPTH)
    normals = np.zeros((h, w, 3))
    inv_z = -1.0 / verts[:, 2]
    us = frame.cx + frame.focal_px * verts[:, 0] * inv_z
    vs = frame.cy - frame.focal_px * verts[:, 1] * inv_z
    for ia, ib, ic in mesh.faces:
        n = np.cross(verts[ib] - verts[ia], verts[ic] - verts[ia])
        length = np.linalg.norm(n)
        if length == 0.0:
            continue
        n /= length
        if n[2] < 0.0:
            n = -n
        elif n[2] == 0.0:
            continue  # edge-on face cannot carry a front-facing normal
        tri = np.array([[us[ia], vs[ia]], [us[ib], vs[ib]], [us[ic], vs[ic]]])
        area = (tri[1, 0] - tri[0, 0]) * (tri[2, 1] - tri[0, 1]) \
            - (tri[1, 1] - tri[0, 1]) * (tri[2, 0] - tri[0, 0])
        if area == 0.0:
            continue
        if area < 0.0:
            tri[[1, 2]] = tri[[2, 1]]
        x0 = max(int(np.ceil(tri[:, 0].min() - 0.5)), 0)
        x1 = min(int(np.floor(tri[:, 0].max() - 0.5)), w - 1)
        y0 = max(int(np.ceil(tri[:, 1].min() - 0.5)), 0)
        y1 = min(int(np.floor(tri[:, 1].max() - 0.5)), h - 1)
        if x1 < x0 or y1 < y0:
            continue
        px = np.arange(x0, x1 + 1) + 0.5
        py = np.arange(y0, y1 + 1) + 0.5
        X = px[None, :]
        Y = py[:, None]
        cover = np.ones((y1 - y0 + 1, x1 - x0 + 1), dtype=bool)
        for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            wv = (b[0] - a[0]) * (Y - a[1]) - (b[1] - a[1]) * (X - a[0])
            if _edge_includes_boundary(a, b):
                cover &= wv >= 0.0
            else:
                cover &= wv > 0.0
        if not cover.any():
            continue
        dx = (X - frame.cx) / frame.focal_px
        dy = (frame.cy - Y) / frame.focal_px
        denom = n[0] * dx + n[1] * dy - n[2]
        plane_const = float(n @ verts[ia])
        with np.errstate(divide="ignore", invalid="ignore"):
            t = plane_const / denom
        window = depth[y0:y1 + 1, x0:x1 + 1]
        sel = cover & (t > 0.0) & (t < window)
        if sel.any():
            window[sel] = t[sel]
            normals[y0:y1 + 1, x0:x1 + 1][sel] = n
    mask = np.isfinite(depth)
    return NormalMap(normals, mask, depth)


def discretize_normal_map(nm: NormalMap, codebook: OrientationCodebook) -> LabelMap:
    """Bin masked normals into the hemisphere codebook; background becomes K."""
    if codebook.support != HEMISPHERE:
        raise ValueError("label maps require a hemisphere codebook")
    labels = np.full((nm.height, nm.width), codebook.K, dtype=np.int32)
    if nm.mask.any():
        labels[nm.mask] = bin_orientations(codebook, nm.normals[nm.mask], sign_invariant=False)
    return LabelMap(labels, codebook.K)


def labels_to_normals(lm: LabelMap, codebook: OrientationCodebook) -> NormalMap:
    """Lift bins back to their codebook directions; depth stays unknown."""
    if codebook.K != lm.K:
        raise ValueError(f"label map has K={lm.K}, codebook has K={codebook.K}")
    if lm.labels.size and lm.labels.max() > codebook.K:
        raise ValueError("label exceeds the codebook size")
    mask = lm.labels < lm.K
    normals = np.zeros((lm.height, lm.width, 3))
    if mask.any():
        normals[mask] = codebook.directions[lm.labels[mask]]
    depth = np.full(mask.shape, BACKGROUND_DEPTH)
    return NormalMap(normals, mask, depth)


def save_normal_map(path_prefix, nm: NormalMap) -> tuple[str, str]:
    """Persist as <prefix>_normal.pfm (3-channel) and <prefix>_depth.pfm."""
    normal_path = f"{path_prefix}_normal.pfm"
    depth_path = f"{path_prefix}_depth.pfm"
    imgfmt.write_pfm(normal_path, nm.normals.astype(np.float32))
    imgfmt.write_pfm(depth_path, nm.depth.astype(np.float32))
    return normal_path, depth_path


def load_normal_map(path) -> NormalMap:
    """Rebuild a NormalMap from a 3-channel PFM; the mask comes from the
    zero-vector background convention and depth is left unknown."""
    arr = np.asarray(imgfmt.read_pfm(path), dtype=np.float64)
    if arr.ndim != 3:
        raise ValueError("normal maps are 3-channel PFM files")
    mask = np.linalg.norm(arr, axis=2) > 0.5
    arr[~mask] = 0.0
    depth = np.where(mask, 1.0, BACKGROUND_DEPTH)
    return NormalMap(arr, mask, depth)


def save_label_map(path, lm: LabelMap) -> None:
    imgfmt.write_pgm16(path, lm.labels)


def load_label_map(path, K: int) -> LabelMap:
    return LabelMap(imgfmt.read_pgm16(path).astype(np.int32), K)
