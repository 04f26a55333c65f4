"""Final image assembly: paste preserved and clothes pixels, fill the rest.

The generation region is filled by harmonic interpolation (discrete
Laplace equation with the surrounding pixels as Dirichlet data), a
deterministic stand-in for learned inpainting. Everything outside the
filled region passes through bit-exact.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .imaging import BinaryMask, Raster, _check_same_shape
from .layout import CompositeLayout

_CROSS = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)

DEFAULT_TOL = 1e-4
DEFAULT_MAX_ITERS = 10000


def _neighbor_data(height: int, width: int):
    """In-frame 4-neighbor count per pixel."""
    count = np.full((height, width), 4.0)
    count[0, :] -= 1
    count[-1, :] -= 1
    count[:, 0] -= 1
    count[:, -1] -= 1
    return count


def _neighbor_sum(f: np.ndarray) -> np.ndarray:
    """Sum of in-frame 4-neighbors, channels preserved."""
    out = np.zeros_like(f)
    out[1:, :] += f[:-1, :]
    out[:-1, :] += f[1:, :]
    out[:, 1:] += f[:, :-1]
    out[:, :-1] += f[:, 1:]
    return out


def diffusion_fill(
    img: Raster,
    region: BinaryMask,
    tol: float = DEFAULT_TOL,
    max_iters: int = DEFAULT_MAX_ITERS,
) -> Raster:
    """Replace region pixels by the harmonic interpolant of their surroundings.

    Red-black Gauss-Seidel sweeps on the float view until the largest
    Laplace residual inside the region drops below tol (or max_iters).
    Frame-edge pixels average over their existing neighbors. Pixels outside
    the region are returned bit-exact.
    """
    _check_same_shape(img, region, "diffusion_fill")
    if not tol > 0:
        raise ValueError(f"tol must be > 0, got {tol}")
    inside = region.as_bool()
    if not inside.any():
        return img

    components, n_components = ndimage.label(inside, structure=_CROSS)
    known = ~inside
    f = img.to_float()

    # Seed each hole with the mean of its surrounding known pixels; a hole
    # with no known pixel around it has no boundary data to interpolate.
    for comp_id in range(1, n_components + 1):
        comp = components == comp_id
        ring = ndimage.binary_dilation(comp, structure=_CROSS) & known
        if not ring.any():
            raise ValueError(
                "diffusion_fill: a fill region has no known neighboring pixels"
            )
        f[comp] = f[ring].mean(axis=0)

    height, width = inside.shape
    count = _neighbor_data(height, width)[:, :, None]
    yy, xx = np.indices((height, width))
    red = inside & ((yy + xx) % 2 == 0)
    black = inside & ((yy + xx) % 2 == 1)

    for _ in range(max_iters):
        f[red] = (_neighbor_sum(f) / count)[red]
        f[black] = (_neighbor_sum(f) / count)[black]
        residual = (_neighbor_sum(f) / count - f)[inside]
        if np.abs(residual).max() < tol:
            break

    out = img.data.copy()
    out[inside] = Raster.from_float(f).data[inside]
    return Raster(out)


def assemble_tryon(
    preserved: Raster,
    refined_clothes: Raster,
    comp: CompositeLayout,
    tol: float = DEFAULT_TOL,
    max_iters: int = DEFAULT_MAX_ITERS,
) -> Raster:
    """Compose the try-on image from the per-pixel plan.

    Preserved pixels and clothes pixels are copied byte-for-byte from their
    sources; the generation region is filled harmonically from whatever
    surrounds it after the paste.
    """
    _check_same_shape(preserved, refined_clothes, "assemble_tryon")
    _check_same_shape(preserved, comp.preserve, "assemble_tryon")
    canvas = preserved.data.copy()
    clothes = comp.clothes.as_bool()
    canvas[clothes] = refined_clothes.data[clothes]
    pasted = Raster(canvas)
    if not comp.generate.bits.any():
        return pasted
    return diffusion_fill(pasted, comp.generate, tol, max_iters)
