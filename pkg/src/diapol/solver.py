"""Rovibrational levels on a mapped sine-DVR grid.

The radial coordinate R is mapped onto x in [0, L] (L = R_max - R_min) with
Jacobian J(x) = dR/dx. On the uniform x grid the kinetic operator

    T = -1/(2 mu) J^{-1/2} d/dx J^{-1} d/dx J^{-1/2}

acts on sqrt(J) psi and is built in the particle-in-a-box sine basis, so the
wavefunctions vanish at R_min and R_max. Above threshold the box turns the
continuum into discrete levels.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg
from scipy.fft import dst
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import CubicSpline
from scipy.ndimage import gaussian_filter1d
from scipy.special import roots_legendre

from .curves import PotentialCurve, SpinOrbitCoupling

log = logging.getLogger(__name__)

DEFAULT_BETA = 3.0
DEFAULT_E_ABOVE = 0.05  # hartree above the asymptote


class GridError(ValueError):
    """Inconsistent grid configuration."""


class SolverError(ArithmeticError):
    """The eigensolver failed."""


@dataclass(frozen=True)
class GridConfig:
    N: int | None = None
    beta: float = DEFAULT_BETA
    R_min: float | None = None
    R_max: float | None = None
    mapping: str = "envelope"


@dataclass(frozen=True, eq=False)
class RadialGrid:
    R_min: float
    R_max: float
    N: int
    mapping: str
    beta: float
    E_max: float
    nodes: np.ndarray
    jacobian: np.ndarray
    _R_of_x: CubicSpline | None = field(default=None, repr=False)

    @property
    def length(self) -> float:
        return self.R_max - self.R_min

    @property
    def dx(self) -> float:
        return self.length / (self.N + 1)

    @property
    def weights(self) -> np.ndarray:
        """Quadrature weights in R: integral f dR = sum f(R_i) w_i."""
        return self.dx * self.jacobian

    def jacobian_at(self, x):
        if self._R_of_x is None:
            return np.ones_like(np.asarray(x, dtype=float))
        return self._R_of_x(x, 1)

    def same_as(self, other: "RadialGrid") -> bool:
        return self is other or (
            self.N == other.N and np.array_equal(self.nodes, other.nodes)
        )


def _local_density(curves, E_max, mu, beta, R):
    """Required points per bohr: beta per local de Broglie wavelength.

    V is replaced by its lower envelope seen from large R, so the inner wall
    gets the density of the well bottom instead of a notch at the turning
    point. A soft floor and a smooth maximum over the curves keep the
    Jacobian smooth on the scale of the grid spacing.
    """
    total = np.zeros_like(R)
    for curve, e_max in zip(curves, E_max):
        V = np.minimum.accumulate(curve(R)[::-1])[::-1]
        top = max(e_max - V[0], 1e-12)
        floor = 0.05 * top
        K = floor * (np.logaddexp(0.0, (e_max - V) / floor) + 1.0)
        rho = beta * np.sqrt(2.0 * mu * K) / (2.0 * math.pi)
        total = total + rho**4
    rho = total**0.25
    # the DVR needs J smooth on the scale of the node spacing
    width = 1.5 / rho.min()
    smooth = gaussian_filter1d(rho, width / (R[1] - R[0]), mode="nearest")
    return smooth * np.max(rho / smooth)


def build_grid(
    curve: PotentialCurve | Sequence[PotentialCurve],
    reduced_mass: float,
    E_max: float | Sequence[float] | None = None,
    config: GridConfig = GridConfig(),
) -> RadialGrid:
    """Grid whose node spacing resolves every given curve up to its E_max.

    Several curves may share one grid (needed for transition dipoles); the
    node density is then the largest of the individual requirements.
    """
    curves = [curve] if isinstance(curve, PotentialCurve) else list(curve)
    if reduced_mass <= 0:
        raise GridError("reduced mass must be positive")
    if E_max is None:
        E_max = [c.asymptote + DEFAULT_E_ABOVE for c in curves]
    elif np.ndim(E_max) == 0:
        E_max = [float(E_max)] * len(curves)
    E_max = [float(e) for e in E_max]
    if len(E_max) != len(curves):
        raise GridError("need one E_max per curve")

    R_min = config.R_min if config.R_min is not None else max(c.R_min for c in curves)
    R_max = config.R_max if config.R_max is not None else min(c.R_max for c in curves)
    if not 0 < R_min < R_max:
        raise GridError(f"bad radial range [{R_min}, {R_max}]")
    if config.mapping not in ("uniform", "envelope"):
        raise GridError(f"unknown mapping {config.mapping!r}")
    if config.beta < 2.0:
        raise GridError("beta below 2 points per wavelength cannot resolve E_max")

    for c, e in zip(curves, E_max):
        if e <= c.asymptote and float(c(R_max)) < e:
            raise GridError(
                f"R_max={R_max} lies inside the classically allowed region of "
                f"{c.label} at E_max; move it beyond the outer turning point"
            )

    n_fine = 20001
    R_fine = np.linspace(R_min, R_max, n_fine)
    rho = _local_density(curves, E_max, reduced_mass, config.beta, R_fine)
    L = R_max - R_min

    if config.mapping == "uniform":
        required = int(math.ceil(L * rho.max())) - 1
        N = config.N if config.N is not None else required
        if N < required:
            raise GridError(f"N={N} is below the density bound; need N >= {required}")
        dx = L / (N + 1)
        nodes = R_min + dx * np.arange(1, N + 1)
        return RadialGrid(
            R_min, R_max, N, "uniform", config.beta, max(E_max), nodes, np.ones(N)
        )

    X = cumulative_trapezoid(rho, R_fine, initial=0.0)
    total = X[-1]
    required = int(math.ceil(total))
    N = config.N if config.N is not None else required
    if N < required:
        raise GridError(f"N={N} is below the density bound; need N >= {required}")
    x_fine = L * X / total
    R_of_x = CubicSpline(x_fine, R_fine)
    dx = L / (N + 1)
    x_nodes = dx * np.arange(1, N + 1)
    nodes = R_of_x(x_nodes)
    jac = R_of_x(x_nodes, 1)
    return RadialGrid(
        R_min, R_max, N, "envelope", config.beta, max(E_max), nodes, jac, R_of_x
    )


def uniform_grid(R_min: float, R_max: float, N: int, E_max: float = math.inf) -> RadialGrid:
    """Equidistant grid with N interior nodes, for model problems."""
    dx = (R_max - R_min) / (N + 1)
    nodes = R_min + dx * np.arange(1, N + 1)
    return RadialGrid(R_min, R_max, N, "uniform", DEFAULT_BETA, E_max, nodes, np.ones(N))


def kinetic_matrix(grid: RadialGrid, reduced_mass: float) -> np.ndarray:
    """Kinetic energy in the DVR of the (sqrt(J)-scaled) mapped coordinate."""
    N, L = grid.N, grid.length
    k = np.arange(1, N + 1, dtype=float)
    if grid.mapping == "uniform":
        A = np.diag((math.pi * k / L) ** 2)
    else:
        # cosine moments of 1/J up to order 2N by Gauss-Legendre quadrature
        n_quad = 4 * N + 64
        t, w = roots_legendre(n_quad)
        xq = 0.5 * L * (t + 1.0)
        wq = 0.5 * w  # integral over [0, L] divided by L
        g = 1.0 / grid.jacobian_at(xq)
        n = np.arange(0, 2 * N + 1)
        ghat = np.cos(np.outer(n, math.pi * xq / L)) @ (wq * g)
        idx = np.arange(N)
        diff = np.abs(idx[:, None] - idx[None, :])
        summ = idx[:, None] + idx[None, :] + 2
        A = (math.pi / L) ** 2 * np.outer(k, k) * (ghat[diff] + ghat[summ])
    # sine basis -> DVR: the orthonormal DST-I matrix on both sides
    T = dst(dst(A, type=1, axis=0, norm="ortho"), type=1, axis=1, norm="ortho")
    T = 0.5 * (T + T.T) / (2.0 * reduced_mass)
    if grid.mapping != "uniform":
        s = 1.0 / np.sqrt(grid.jacobian)
        T = s[:, None] * T * s[None, :]
    return T


@dataclass(frozen=True, eq=False)
class LevelBasis:
    """Eigenlevels of one electronic state or of a coupled pair.

    ``vectors[v, c]`` holds the DVR coefficients of level v in channel c;
    they are orthonormal in the plain Euclidean sum. Amplitudes in
    bohr^-1/2 come from :meth:`psi`.
    """

    state: str
    channels: tuple[str, ...]
    reduced_mass: float
    grid: RadialGrid
    energies: np.ndarray
    vectors: np.ndarray
    asymptote: float
    B: np.ndarray
    kinds: tuple[str, ...]
    symmetries: tuple[str, ...] = ()

    def __len__(self) -> int:
        return len(self.energies)

    @property
    def n_bound(self) -> int:
        return int(np.sum(self.energies < self.asymptote))

    @property
    def channel_fraction(self) -> np.ndarray:
        return np.sum(self.vectors**2, axis=2)

    def channel_index(self, label: str) -> int:
        try:
            return self.channels.index(label)
        except ValueError:
            raise KeyError(f"{self.state} has no channel {label!r}") from None

    def psi(self, v: int, channel: int = 0) -> np.ndarray:
        """Wavefunction at the grid nodes, normalized as sum psi^2 w = 1."""
        return self.vectors[v, channel] / np.sqrt(self.grid.weights)

    def expectation(self, func, channel: int | None = None) -> np.ndarray:
        """<v|f(R)|v> for every level (summed over channels by default)."""
        f = np.asarray(func(self.grid.nodes), dtype=float)
        vec = self.vectors if channel is None else self.vectors[:, channel : channel + 1]
        return np.einsum("vci,i->v", vec**2, f)

    def overlap(self) -> np.ndarray:
        flat = self.vectors.reshape(len(self), -1)
        return flat @ flat.T


def _rotational_constants(vectors, nodes, mu):
    return np.einsum("vci,i->v", vectors**2, 1.0 / (2.0 * mu * nodes**2))


def _eigh(H: np.ndarray, E_max: float, what: str):
    try:
        if math.isfinite(E_max):
            E, C = scipy.linalg.eigh(H, subset_by_value=(-np.inf, E_max), driver="evr")
        else:
            E, C = scipy.linalg.eigh(H, driver="evr")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SolverError(
            f"{what}: eigensolver failed for a {H.shape[0]}x{H.shape[0]} matrix "
            f"(finite entries: {np.isfinite(H).all()}): {exc}"
        ) from exc
    # fix the overall sign so results are reproducible: largest component > 0
    flip = np.sign(C[np.argmax(np.abs(C), axis=0), np.arange(C.shape[1])])
    C = C * np.where(flip == 0, 1.0, flip)
    return E, C


def solve_single(
    curve: PotentialCurve,
    grid: RadialGrid,
    reduced_mass: float,
    E_max: float | None = None,
) -> LevelBasis:
    """All levels of one potential below E_max (default: the grid's)."""
    E_max = grid.E_max if E_max is None else E_max
    H = kinetic_matrix(grid, reduced_mass)
    H[np.diag_indices_from(H)] += curve(grid.nodes)
    E, C = _eigh(H, E_max, curve.label)
    vectors = C.T[:, None, :]
    kinds = tuple("bound" if e < curve.asymptote else "box-continuum" for e in E)
    log.debug("%s: %d levels, %d bound", curve.label, len(E), kinds.count("bound"))
    return LevelBasis(
        state=curve.label,
        channels=(curve.label,),
        reduced_mass=reduced_mass,
        grid=grid,
        energies=E,
        vectors=vectors,
        asymptote=curve.asymptote,
        B=_rotational_constants(vectors, grid.nodes, reduced_mass),
        kinds=kinds,
        symmetries=(curve.symmetry,),
    )


def solve_coupled(
    curve_a: PotentialCurve,
    curve_b: PotentialCurve,
    soc: SpinOrbitCoupling | float,
    grid: RadialGrid,
    reduced_mass: float,
    E_max: float | None = None,
    grid_b: RadialGrid | None = None,
) -> LevelBasis:
    """Levels of two channels coupled by a spin-orbit function W(R).

    ``soc`` may be a constant. Each level's weight in channel a is
    ``channel_fraction[:, 0]``.
    """
    if grid_b is not None and not grid.same_as(grid_b):
        raise GridError("coupled channels must share one radial grid")
    E_max = grid.E_max if E_max is None else E_max
    N = grid.N
    T = kinetic_matrix(grid, reduced_mass)
    W = soc(grid.nodes) if callable(soc) else np.full(N, float(soc))
    H = np.zeros((2 * N, 2 * N))
    H[:N, :N] = T
    H[N:, N:] = T
    H[np.arange(N), np.arange(N)] += curve_a(grid.nodes)
    H[np.arange(N, 2 * N), np.arange(N, 2 * N)] += curve_b(grid.nodes)
    H[np.arange(N), np.arange(N, 2 * N)] = W
    H[np.arange(N, 2 * N), np.arange(N)] = W
    E, C = _eigh(H, E_max, f"{curve_a.label}~{curve_b.label}")
    vectors = C.T.reshape(len(E), 2, N)
    threshold = min(curve_a.asymptote, curve_b.asymptote)
    kinds = tuple("bound" if e < threshold else "box-continuum" for e in E)
    return LevelBasis(
        state=f"{curve_a.label}~{curve_b.label}",
        channels=(curve_a.label, curve_b.label),
        reduced_mass=reduced_mass,
        grid=grid,
        energies=E,
        vectors=vectors,
        asymptote=threshold,
        B=_rotational_constants(vectors, grid.nodes, reduced_mass),
        kinds=kinds,
        symmetries=(curve_a.symmetry, curve_b.symmetry),
    )
