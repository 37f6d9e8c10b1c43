"""Shape-registration data augmentation with thin-plate splines.

Every mask boundary is approximated by an ellipse; the ellipse's four axis
endpoints are the landmarks. For each ordered pair (moving M, fixed F) a
thin-plate spline carries F's landmarks onto M's, and M is resampled into
F's frame (backward warping, nearest neighbour). Together with horizontal
flips this turns n labeled images into 2n(n-1) + n.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import raster
from .errors import DomainError, FitError, SolveError
from .raster import LabeledImage

CIRCLE_RATIO_TOL = 1e-3


@dataclass
class Ellipse:
    cx: float
    cy: float
    semi_major: float
    semi_minor: float
    angle: float  # major axis vs +x, in [0, pi)

    @property
    def center(self):
        return (self.cx, self.cy)


@dataclass
class TpsWarp:
    source: np.ndarray          # (4, 2) landmarks in the output frame
    kernel_weights: np.ndarray  # (4, 2)
    affine: np.ndarray          # (3, 2): rows for 1, x, y

    def __call__(self, pts) -> np.ndarray:
        """Map ``(..., 2)`` points through the spline."""
        pts = np.asarray(pts, dtype=np.float64)
        flat = pts.reshape(-1, 2)
        out = self.affine[0] + flat @ self.affine[1:]
        r2 = ((flat[:, None, :] - self.source[None, :, :]) ** 2).sum(axis=-1)
        out = out + tps_kernel_sq(r2) @ self.kernel_weights
        return out.reshape(pts.shape)


def tps_kernel_sq(r2):
    """U(r) = r^2 ln r written in terms of r^2, with U(0) = 0."""
    r2 = np.asarray(r2, dtype=np.float64)
    out = np.zeros_like(r2)
    nz = r2 > 0
    out[nz] = 0.5 * r2[nz] * np.log(r2[nz])
    return out


def fit_ellipse(points) -> Ellipse:
    """Direct least-squares ellipse fit (constraint 4AC - B^2 = 1).

    Uses the partitioned scatter-matrix form of the direct fit on centred and
    scaled coordinates, then converts the conic to centre, semi-axes and angle.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if len(pts) < 6:
        raise FitError(f"ellipse fit needs at least 6 points, got {len(pts)}")
    mean = pts.mean(axis=0)
    scale = np.sqrt(((pts - mean) ** 2).sum(axis=1).mean())
    if not scale > 0:
        raise FitError("all points coincide")
    x, y = ((pts - mean) / scale).T
    d1 = np.column_stack([x * x, x * y, y * y])
    d2 = np.column_stack([x, y, np.ones_like(x)])
    s1, s2, s3 = d1.T @ d1, d1.T @ d2, d2.T @ d2
    if np.linalg.cond(s3) > 1e12:
        raise FitError("degenerate point scatter (collinear points)")
    t = -np.linalg.solve(s3, s2.T)
    m = s1 + s2 @ t
    m = np.array([m[2] / 2.0, -m[1], m[0] / 2.0])
    try:
        vals, vecs = np.linalg.eig(m)
    except np.linalg.LinAlgError as exc:
        raise FitError(f"eigen-decomposition failed: {exc}") from None
    vecs = np.real(vecs)
    cond = 4 * vecs[0] * vecs[2] - vecs[1] ** 2
    ok = np.nonzero(cond > 0)[0]
    if len(ok) == 0:
        raise FitError("no elliptical solution (rank-deficient scatter)")
    a1 = vecs[:, ok[np.argmin(np.abs(np.real(vals[ok])))]]
    conic = np.concatenate([a1, t @ a1])
    e = conic_to_ellipse(conic)
    return Ellipse(float(e.cx * scale + mean[0]), float(e.cy * scale + mean[1]),
                   float(e.semi_major * scale), float(e.semi_minor * scale), e.angle)


def conic_to_ellipse(conic) -> Ellipse:
    conic = np.asarray(conic, dtype=np.float64)
    if conic[0] + conic[2] < 0:
        conic = -conic  # make the quadratic part positive definite
    a, b, c, d, e, f = conic
    q = np.array([[a, b / 2.0], [b / 2.0, c]])
    try:
        cx, cy = np.linalg.solve(2.0 * q, [-d, -e])
    except np.linalg.LinAlgError:
        raise FitError("conic has no centre") from None
    f0 = a * cx * cx + b * cx * cy + c * cy * cy + d * cx + e * cy + f
    lam, vec = np.linalg.eigh(q)
    if lam[0] <= 0 or f0 >= 0:
        raise FitError("conic is not a real ellipse")
    ax = np.sqrt(-f0 / lam)  # eigh sorts ascending: ax[0] is the major semi-axis
    major, minor = float(ax[0]), float(ax[1])
    if major - minor <= CIRCLE_RATIO_TOL * major:
        angle = 0.0
    else:
        angle = math.atan2(vec[1, 0], vec[0, 0]) % math.pi
        if angle >= math.pi - 1e-15:
            angle = 0.0
    return Ellipse(float(cx), float(cy), major, minor, float(angle))


def ellipse_vertices(e: Ellipse) -> np.ndarray:
    """Axis endpoints in the order +major, -major, +minor, -minor."""
    c = np.array([e.cx, e.cy])
    u = np.array([math.cos(e.angle), math.sin(e.angle)])
    v = np.array([-math.sin(e.angle), math.cos(e.angle)])
    return np.array([c + e.semi_major * u, c - e.semi_major * u,
                     c + e.semi_minor * v, c - e.semi_minor * v])


def match_landmarks(fixed: np.ndarray, moving: np.ndarray) -> np.ndarray:
    """Reorder ``moving`` so each axis pair pairs up with least squared travel."""
    out = np.array(moving, dtype=np.float64)
    for a, b in ((0, 1), (2, 3)):
        keep = ((fixed[a] - moving[a]) ** 2).sum() + ((fixed[b] - moving[b]) ** 2).sum()
        swap = ((fixed[a] - moving[b]) ** 2).sum() + ((fixed[b] - moving[a]) ** 2).sum()
        if swap < keep:
            out[a], out[b] = moving[b], moving[a]
    return out


def solve_tps(source, target) -> TpsWarp:
    """Solve the bordered system [[K, P], [P^T, 0]] W = [target; 0].

    ``K_ij = U(|s_i - s_j|)`` and ``P = [1 x y]`` at the source landmarks.
    """
    s = np.asarray(source, dtype=np.float64).reshape(-1, 2)
    t = np.asarray(target, dtype=np.float64).reshape(-1, 2)
    if s.shape != t.shape:
        raise DomainError("source and target landmark counts differ")
    n = len(s)
    p = np.column_stack([np.ones(n), s])
    if np.linalg.matrix_rank(p) < 3:
        raise SolveError("landmarks are collinear; the spline system is singular")
    k = tps_kernel_sq(((s[:, None] - s[None]) ** 2).sum(axis=-1))
    lhs = np.zeros((n + 3, n + 3))
    lhs[:n, :n] = k
    lhs[:n, n:] = p
    lhs[n:, :n] = p.T
    rhs = np.zeros((n + 3, 2))
    rhs[:n] = t
    try:
        sol = np.linalg.solve(lhs, rhs)
    except np.linalg.LinAlgError as exc:
        raise SolveError(f"spline system is singular: {exc}") from None
    return TpsWarp(s, sol[:n], sol[n:])


def apply_tps(warp: TpsWarp, moving: LabeledImage, out_w: int, out_h: int) -> LabeledImage:
    """Backward-warp ``moving`` into an ``out_w`` x ``out_h`` frame.

    Every output pixel centre is mapped into the moving image and takes the
    nearest pixel; samples falling outside are 0 / background.
    """
    ys, xs = np.mgrid[0:out_h, 0:out_w]
    src = warp(np.stack([xs, ys], axis=-1).astype(np.float64))
    ix = np.floor(src[..., 0] + 0.5).astype(np.int64)
    iy = np.floor(src[..., 1] + 0.5).astype(np.int64)
    h, w = moving.image.shape
    inside = (ix >= 0) & (ix < w) & (iy >= 0) & (iy < h)
    ixc, iyc = np.clip(ix, 0, w - 1), np.clip(iy, 0, h - 1)
    image = np.where(inside, moving.image[iyc, ixc], 0.0)
    mask = inside & moving.mask[iyc, ixc]
    return LabeledImage(image, mask)


def edge_points(mask) -> np.ndarray:
    """Midpoints of every foreground/background 4-neighbour pair, as (x, y).

    These sit on the pixel-edge outline of the mask; boundary pixel centres
    lie half a pixel inside it and would bias fitted axes low.
    """
    m = np.pad(np.asarray(mask, dtype=bool), 1)
    ys, xs = np.nonzero(m[:, :-1] != m[:, 1:])
    horiz = np.column_stack([xs - 0.5, ys - 1.0])
    ys, xs = np.nonzero(m[:-1] != m[1:])
    vert = np.column_stack([xs - 1.0, ys - 0.5])
    return np.concatenate([horiz, vert])


def landmarks_of(item: LabeledImage) -> np.ndarray:
    if not item.mask.any():
        raise FitError(f"ellipse fit failed for {item.name or 'item'}: empty mask")
    try:
        return ellipse_vertices(fit_ellipse(edge_points(item.mask)))
    except (FitError, DomainError) as exc:
        raise FitError(f"ellipse fit failed for {item.name or 'item'}: {exc}") from None


def register_pair(moving: LabeledImage, fixed: LabeledImage, fixed_marks=None, moving_marks=None):
    """Warp ``moving`` into ``fixed``'s frame so their fitted ellipses agree."""
    zf = landmarks_of(fixed) if fixed_marks is None else fixed_marks
    zm = landmarks_of(moving) if moving_marks is None else moving_marks
    warp = solve_tps(zf, match_landmarks(zf, zm))
    h, w = fixed.image.shape
    return apply_tps(warp, moving, w, h), warp


def augment_dataset(train) -> list[LabeledImage]:
    """Originals, then for each ordered pair (M, F), M != F: warped M, flipped warped M."""
    items = list(train)
    for i, item in enumerate(items):
        if not item.name:
            item.name = f"{i}"
    marks = [landmarks_of(item) for item in items]
    out = [LabeledImage(it.image.copy(), it.mask.copy(), it.name) for it in items]
    for m, moving in enumerate(items):
        for f, fixed in enumerate(items):
            if m == f:
                continue
            warped, _ = register_pair(moving, fixed, marks[f], marks[m])
            tag = f"aug_{moving.name}_{fixed.name}"
            warped.name = f"{tag}_warp"
            out.append(warped)
            out.append(LabeledImage(raster.flip_horizontal(warped.image),
                                    raster.flip_horizontal(warped.mask), f"{tag}_flip"))
    return out
