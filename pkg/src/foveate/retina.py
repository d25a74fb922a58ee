"""Log-polar retinotopic sampling.

Images are numpy arrays of shape (H, W, C) with intensities in [0, 1] and
C in {1, 3}. Spatial positions use normalized coordinates: both axes span
[-1, 1], x grows rightward, y grows downward (raster order), and the
center of pixel (i, j) sits at ((2j + 1) / W - 1, (2i + 1) / H - 1).
Azimuth is measured from +x toward +y, so pi/2 points to the bottom of
the image. All functions are pure; grids are immutable and safe to share.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = [
    "FixationPoint",
    "LogPolarGrid",
    "build_grid",
    "ensure_image",
    "from_logpolar",
    "logpolar_coords",
    "sample_bilinear",
    "to_logpolar",
]

FixationPoint = tuple[float, float]

TWO_PI = 2.0 * math.pi


def ensure_image(image) -> np.ndarray:
    """Coerce to a (H, W, C) float array and check the unit-interval invariant.

    2-D input is treated as single-channel. Raises ValueError on empty
    rasters, unsupported channel counts, or intensities outside [0, 1].
    """
    arr = np.asarray(image, dtype=float)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3 or arr.shape[2] not in (1, 3):
        raise ValueError(f"expected an (H, W, 1|3) image, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError("empty image")
    if not np.isfinite(arr).all():
        raise ValueError("image contains non-finite intensities")
    lo, hi = float(arr.min()), float(arr.max())
    if lo < -1e-9 or hi > 1.0 + 1e-9:
        raise ValueError(f"intensities outside [0, 1]: min={lo:g}, max={hi:g}")
    return np.clip(arr, 0.0, 1.0)


def _check_fixation(fixation) -> tuple[float, float]:
    x0, y0 = float(fixation[0]), float(fixation[1])
    if not (math.isfinite(x0) and math.isfinite(y0)):
        raise ValueError("fixation coordinates must be finite")
    if abs(x0) > 1.0 or abs(y0) > 1.0:
        raise ValueError(f"fixation outside [-1, 1]: ({x0:g}, {y0:g})")
    return x0, y0


def _check_fill(fill) -> float:
    fill = float(fill)
    if not 0.0 <= fill <= 1.0:
        raise ValueError(f"fill intensity must lie in [0, 1], got {fill:g}")
    return fill


def logpolar_coords(x: float, y: float, fixation: FixationPoint = (0.0, 0.0)) -> tuple[float, float]:
    """Map a normalized point to (log2 eccentricity, azimuth in [0, 2*pi)).

    Undefined at the fixation point itself (raises ValueError).
    """
    x0, y0 = _check_fixation(fixation)
    dx, dy = x - x0, y - y0
    if dx == 0.0 and dy == 0.0:
        raise ValueError("log-polar coordinates are undefined at the fixation point")
    rho = 0.5 * math.log2(dx * dx + dy * dy)
    theta = math.atan2(dy, dx) % TWO_PI
    return rho, theta


@dataclass(frozen=True)
class LogPolarGrid:
    """Regular lattice in (log2 rho, theta) space around a fixation point.

    `rows` holds the n_rho log2 radii, uniform from log_rmin to log_rmax
    inclusive; `cols` the n_theta azimuths j * 2*pi / n_theta covering
    [0, 2*pi) without duplicating 0 at 2*pi. Defaults give the 224x224
    grid spanning radii 2**-5 .. 1 (circle tangent to the image box).
    """

    n_rho: int = 224
    n_theta: int = 224
    log_rmin: float = -5.0
    log_rmax: float = 0.0
    fixation: FixationPoint = (0.0, 0.0)

    def __post_init__(self):
        if self.n_rho < 2 or self.n_theta < 2:
            raise ValueError("grid needs n_rho >= 2 and n_theta >= 2")
        if not self.log_rmin < self.log_rmax:
            raise ValueError("log_rmin must be strictly below log_rmax")
        _check_fixation(self.fixation)

    @cached_property
    def rows(self) -> np.ndarray:
        rows = np.linspace(self.log_rmin, self.log_rmax, self.n_rho)
        rows.setflags(write=False)
        return rows

    @cached_property
    def cols(self) -> np.ndarray:
        cols = np.arange(self.n_theta) * (TWO_PI / self.n_theta)
        cols.setflags(write=False)
        return cols

    @property
    def row_step(self) -> float:
        return (self.log_rmax - self.log_rmin) / (self.n_rho - 1)

    @property
    def col_step(self) -> float:
        return TWO_PI / self.n_theta

    @cached_property
    def cartesian_points(self) -> np.ndarray:
        """(n_rho, n_theta, 2) array of normalized (x, y) sample positions."""
        radii = np.exp2(self.rows)[:, None]
        x0, y0 = self.fixation
        x = x0 + radii * np.cos(self.cols)[None, :]
        y = y0 + radii * np.sin(self.cols)[None, :]
        pts = np.stack([x, y], axis=-1)
        pts.setflags(write=False)
        return pts


def build_grid(
    n_rho: int = 224,
    n_theta: int = 224,
    log_rmin: float = -5.0,
    log_rmax: float = 0.0,
    fixation: FixationPoint = (0.0, 0.0),
) -> LogPolarGrid:
    """Validated LogPolarGrid constructor."""
    return LogPolarGrid(
        int(n_rho),
        int(n_theta),
        float(log_rmin),
        float(log_rmax),
        (float(fixation[0]), float(fixation[1])),
    )


def sample_bilinear(image, points, fill: float = 0.5) -> np.ndarray:
    """Bilinear sample at normalized points; out-of-raster neighbors blend with fill.

    `points` is an array of shape (..., 2) holding (x, y); the result has
    shape (..., C). A point whose 4-neighborhood lies fully outside the
    raster returns fill; partial overlap blends the available pixels with
    fill weighted by the usual bilinear coefficients.
    """
    img = ensure_image(image)
    fill = _check_fill(fill)
    h, w, c = img.shape
    pts = np.asarray(points, dtype=float)
    if pts.shape[-1] != 2:
        raise ValueError("points must have a trailing axis of (x, y) pairs")
    lead = pts.shape[:-1]
    pts = pts.reshape(-1, 2)
    xp = (pts[:, 0] + 1.0) * (w / 2.0) - 0.5
    yp = (pts[:, 1] + 1.0) * (h / 2.0) - 0.5
    x0 = np.floor(xp).astype(np.int64)
    y0 = np.floor(yp).astype(np.int64)
    dx = xp - x0
    dy = yp - y0
    out = np.zeros((pts.shape[0], c))
    for ix, iy, wgt in (
        (x0, y0, (1 - dx) * (1 - dy)),
        (x0 + 1, y0, dx * (1 - dy)),
        (x0, y0 + 1, (1 - dx) * dy),
        (x0 + 1, y0 + 1, dx * dy),
    ):
        inside = (ix >= 0) & (ix < w) & (iy >= 0) & (iy < h)
        vals = np.where(
            inside[:, None],
            img[np.clip(iy, 0, h - 1), np.clip(ix, 0, w - 1)],
            fill,
        )
        out += wgt[:, None] * vals
    return out.reshape(*lead, c)


def to_logpolar(image, grid: LogPolarGrid, fill: float = 0.5) -> np.ndarray:
    """Resample an image onto the log-polar lattice.

    Output has shape (n_rho, n_theta, C); row i is the ring at radius
    2**rows[i], column j the azimuth cols[j].
    """
    return sample_bilinear(image, grid.cartesian_points, fill)


def from_logpolar(lp, grid: LogPolarGrid, out_height: int, out_width: int, fill: float = 0.5) -> np.ndarray:
    """Reconstruct a Cartesian raster from a log-polar image.

    Azimuth interpolation wraps circularly; the radial axis is clamped.
    Pixels beyond the outer radius get fill; pixels inside the inner
    blind disk take the azimuth-interpolated innermost ring.
    """
    lp = ensure_image(lp)
    fill = _check_fill(fill)
    if lp.shape[0] != grid.n_rho or lp.shape[1] != grid.n_theta:
        raise ValueError(
            f"log-polar image shape {lp.shape[:2]} does not match grid "
            f"({grid.n_rho}, {grid.n_theta})"
        )
    out_height, out_width = int(out_height), int(out_width)
    if out_height < 1 or out_width < 1:
        raise ValueError("output dimensions must be positive")
    x0, y0 = grid.fixation
    x = (2.0 * np.arange(out_width) + 1.0) / out_width - 1.0
    y = (2.0 * np.arange(out_height) + 1.0) / out_height - 1.0
    dx = x[None, :] - x0
    dy = y[:, None] - y0
    r = np.hypot(dx, dy)
    with np.errstate(divide="ignore"):
        rho = np.log2(r)
    theta = np.arctan2(dy, dx) % TWO_PI

    rf = np.clip((rho - grid.log_rmin) / grid.row_step, 0.0, grid.n_rho - 1.0)
    cf = theta / grid.col_step
    r0 = np.floor(rf).astype(np.int64)
    r1 = np.minimum(r0 + 1, grid.n_rho - 1)
    fr = (rf - r0)[:, :, None]
    c0 = np.floor(cf).astype(np.int64) % grid.n_theta
    c1 = (c0 + 1) % grid.n_theta
    fc = (cf - np.floor(cf))[:, :, None]

    top = (1 - fc) * lp[r0, c0] + fc * lp[r0, c1]
    bot = (1 - fc) * lp[r1, c0] + fc * lp[r1, c1]
    val = (1 - fr) * top + fr * bot
    return np.where((rho <= grid.log_rmax)[:, :, None], val, fill)
