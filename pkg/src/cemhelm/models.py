"""The three bundled benchmark problems, ready to instantiate.

model1: homogeneous coefficient, zero source, impedance data that makes the
        plane wave exp(i*k*(0.6, 0.8).x) the exact solution.
model2: raster (or synthesized) medium, smooth bump source near the origin,
        zero boundary data.
model3: high-contrast raster (or synthesized channels, contrast 1e-3),
        piecewise-constant block source, zero boundary data.
"""

from enum import Enum

import numpy as np

from .errors import MissingRaster
from .grid import build_fine_grid
from .medium import Medium, constant_medium, load_raster, synthesize_channels
from .reference import ProblemSpec, bump_source, piecewise_source, robin_data_plane_wave

__all__ = ["ModelId", "instantiate", "block_source_raster"]

DEFAULT_NX = 200
DEFAULT_K = 16.0
MODEL3_CONTRAST = 1e-3
DEFAULT_CHANNELS = 8


class ModelId(str, Enum):
    model1 = "model1"
    model2 = "model2"
    model3 = "model3"
    custom = "custom"


def block_source_raster(nx, ny, side=0.3, amplitude=1.0):
    """Centered square block of constant amplitude (default model-3 source)."""
    vals = np.zeros((ny, nx))
    xc = (np.arange(nx) + 0.5) / nx
    yc = (np.arange(ny) + 0.5) / ny
    inx = np.abs(xc - 0.5) < side / 2.0
    iny = np.abs(yc - 0.5) < side / 2.0
    vals[np.ix_(iny, inx)] = amplitude
    return vals


def _medium_for(model, nx, medium_path, synthesize, seed, contrast, channels, epsilon):
    if medium_path is not None:
        return load_raster(medium_path, epsilon=epsilon)
    if synthesize:
        return synthesize_channels(nx, nx, seed, contrast, channels)
    raise MissingRaster(
        f"{model} needs a medium raster (--medium <path>) or --synthesize"
    )


def instantiate(
    model,
    nx=DEFAULT_NX,
    k=DEFAULT_K,
    medium_path=None,
    source_path=None,
    synthesize=False,
    seed=0,
    contrast=None,
    channels=DEFAULT_CHANNELS,
    epsilon=None,
):
    """Build the ProblemSpec of one benchmark model."""
    model = ModelId(model)
    grid = build_fine_grid(nx, nx)
    zero = np.zeros(grid.n_nodes, dtype=complex)

    if model is ModelId.model1:
        med = constant_medium(nx, nx, 1.0)
        f = zero
        g = robin_data_plane_wave(grid, k)
    elif model is ModelId.model2:
        med = _medium_for(
            model.value, nx, medium_path, synthesize, seed,
            contrast if contrast is not None else 0.25, channels, epsilon,
        )
        f = bump_source(grid)
        g = zero
    elif model is ModelId.model3:
        c3 = contrast if contrast is not None else MODEL3_CONTRAST
        med = _medium_for(model.value, nx, medium_path, synthesize, seed, c3, channels, epsilon)
        if medium_path is None:
            # synthesized channels act as stiff inclusions: value 1/contrast in
            # background 1 (same min/max ratio).  Low-coefficient channels at
            # k = 16 oscillate below the fine-grid scale; the stiff orientation
            # keeps every region wave-resolved on the reference grid.
            med = Medium(med.values / c3, nx, nx, epsilon=med.epsilon)
        if source_path is not None:
            f = piecewise_source(grid, source_path)
        else:
            f = piecewise_source(grid, block_source_raster(nx, nx))
        g = zero
    else:
        if medium_path is None:
            raise MissingRaster("custom model needs a medium raster path")
        med = load_raster(medium_path, epsilon=epsilon)
        f = piecewise_source(grid, source_path) if source_path else zero
        g = zero

    return ProblemSpec(grid=grid, medium=med, k=float(k), f=f, g=g, model=model.value)
