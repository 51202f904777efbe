"""Piecewise-constant diffusion coefficients and the spectral mass weight.

Raster file format (UTF-8 text): first line "nx ny", then ny lines of nx
space-separated decimal values, rows ordered bottom (y=0) to top.
"""

import logging

import numpy as np

from .errors import MalformedRaster, NonPositiveValue

log = logging.getLogger(__name__)

__all__ = [
    "Medium",
    "SpectralWeight",
    "read_raster_array",
    "load_raster",
    "save_raster",
    "constant_medium",
    "synthesize_channels",
    "stilde_weights",
]


class Medium:
    """Per-fine-cell coefficient values (flat array, cell index = j*nx + i)."""

    def __init__(self, values, nx, ny, epsilon=None):
        values = np.asarray(values, dtype=float).ravel()
        if values.size != nx * ny:
            raise MalformedRaster(f"{values.size} values for a {nx}x{ny} raster")
        if np.any(values <= 0.0):
            raise NonPositiveValue("coefficient values must be positive")
        self.values = values
        self.nx = int(nx)
        self.ny = int(ny)
        if epsilon is None:
            # declared contrast: values {eps^2, 1} give back eps
            epsilon = float(np.sqrt(values.min() / values.max()))
        self.epsilon = float(epsilon)
        self._warn_if_not_binary()

    def _warn_if_not_binary(self):
        lo, hi = self.values.min(), self.values.max()
        binary = np.all(np.isclose(self.values, lo) | np.isclose(self.values, hi))
        if not binary:
            log.warning(
                "medium values are not two-level {eps^2, 1}; general positive "
                "rasters are accepted but the contrast diagnostic is approximate"
            )

    @property
    def contrast(self):
        return float(self.values.min() / self.values.max())


class SpectralWeight:
    """Per-fine-cell weight of the auxiliary mass form (units 1/length^2)."""

    def __init__(self, values, H):
        self.values = np.asarray(values, dtype=float).ravel()
        self.H = float(H)
        if np.any(self.values <= 0.0):
            raise NonPositiveValue("spectral weights must be positive")


def read_raster_array(path):
    """Raw raster read: returns (values, nx, ny) with no positivity check."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = [ln for ln in (s.strip() for s in fh) if ln]
    except OSError as exc:
        raise MalformedRaster(f"cannot read raster {path}: {exc}") from exc
    if not lines:
        raise MalformedRaster(f"{path}: empty file")
    header = lines[0].split()
    if len(header) != 2:
        raise MalformedRaster(f"{path}: header must be 'nx ny'")
    try:
        nx, ny = int(header[0]), int(header[1])
    except ValueError as exc:
        raise MalformedRaster(f"{path}: non-integer header") from exc
    if len(lines) - 1 != ny:
        raise MalformedRaster(f"{path}: expected {ny} data rows, found {len(lines) - 1}")
    rows = []
    for ln in lines[1:]:
        try:
            row = [float(tok) for tok in ln.split()]
        except ValueError as exc:
            raise MalformedRaster(f"{path}: non-numeric entry") from exc
        if len(row) != nx:
            raise MalformedRaster(f"{path}: row with {len(row)} values, expected {nx}")
        rows.append(row)
    return np.array(rows).ravel(), nx, ny


def load_raster(path, epsilon=None):
    values, nx, ny = read_raster_array(path)
    return Medium(values, nx, ny, epsilon=epsilon)


def save_raster(medium, path):
    """Write a medium in the text raster format (round-trips bit-exactly)."""
    vals = medium.values.reshape(medium.ny, medium.nx)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{medium.nx} {medium.ny}\n")
        for row in vals:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def constant_medium(nx, ny, value):
    if value <= 0.0:
        raise NonPositiveValue(f"constant coefficient must be positive, got {value}")
    return Medium(np.full(nx * ny, float(value)), nx, ny, epsilon=1.0)


def synthesize_channels(nx, ny, seed, contrast, channel_count):
    """Binary medium: long horizontal/vertical low-value channels in background 1.

    Deterministic for a given seed.  Channel value is `contrast` (so the
    min/max ratio of the raster equals `contrast`); declared epsilon is
    sqrt(contrast).  Parallel channels keep a minimum separation so no
    coarse element of the benchmark resolutions is crossed by two of them.
    """
    if not 0.0 < contrast <= 1.0:
        raise NonPositiveValue(f"contrast must lie in (0, 1], got {contrast}")
    rng = np.random.default_rng(seed)
    a = np.ones((ny, nx))
    thickness = max(1, round(min(nx, ny) / 100))
    gap = max(4 * thickness, round(min(nx, ny) / 16))
    used = {True: [], False: []}
    for c in range(channel_count):
        horizontal = c % 2 == 0
        span = nx if horizontal else ny
        width = ny if horizontal else nx
        length = int(span * rng.uniform(0.6, 0.95))
        start = int(rng.integers(0, span - length + 1))
        lane = None
        for _ in range(64):
            cand = int(rng.integers(2, width - 2 - thickness))
            if all(abs(cand - u) >= gap for u in used[horizontal]):
                lane = cand
                break
        if lane is None:
            continue  # no room for more parallel channels
        used[horizontal].append(lane)
        if horizontal:
            a[lane : lane + thickness, start : start + length] = contrast
        else:
            a[start : start + length, lane : lane + thickness] = contrast
    return Medium(a.ravel(), nx, ny, epsilon=float(np.sqrt(contrast)))


def stilde_weights(medium, coarse, rule="simplified"):
    """Spectral weight per fine cell.

    "simplified": 24 H^-2 A(cell), the constant-multiple rule used for the
    reproduction runs.  "lagrange": A(cell) times the sum of squared
    gradients of the four coarse-element hat functions, evaluated at the
    cell center.
    """
    A = medium.values
    H = coarse.H
    if rule == "simplified":
        w = 24.0 / (H * H) * A
    elif rule == "lagrange":
        fine = coarse.fine
        r = coarse.ratio
        # local coordinates of cell centers within their coarse element
        ci = np.arange(fine.nx) % r
        cj = np.arange(fine.ny) % r
        xi = (ci + 0.5) / r
        eta = (cj + 0.5) / r
        gx = 2.0 * (1.0 - xi) ** 2 + 2.0 * xi**2
        gy = 2.0 * (1.0 - eta) ** 2 + 2.0 * eta**2
        factor = (gx[None, :] + gy[:, None]).ravel() / (H * H)
        w = factor * A
    else:
        raise ValueError(f"unknown spectral-weight rule {rule!r}")
    return SpectralWeight(w, H)
