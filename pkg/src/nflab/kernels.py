"""Connectivity kernels and the nonlocal operator K.

``(Kv)_i = sum_j w_j J(x_i, y_j) v_j``: the field vanishes outside the
domain, so the integral over R^N is a quadrature over the grid nodes.

Translation-invariant kernels ``J(x, y) = g(x - y)`` are applied through a
zero-padded FFT (circulant embedding of length 2N per axis), which computes
the truncated convolution exactly up to rounding. Dense kernels use a
matrix-vector product.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate

from .field import Field, Grid, GridMismatchError

DENSE_CUTOFF = 8192
_ROW_BLOCK = 256


def conjugate_exponent(p: float) -> float:
    if p < 1:
        raise ValueError("p must be >= 1")
    if p == 1:
        return math.inf
    if math.isinf(p):
        return 1.0
    return p / (p - 1.0)


@dataclass(frozen=True)
class KernelNorms:
    """``r -> sup_x ||J(x, .)||_{L^r}`` for the requested exponents."""

    values: dict
    l1: float

    def __getitem__(self, r: float) -> float:
        return self.values[float(r)]


class Kernel:
    """Connectivity kernel sampled on a grid.

    Build one with the factory functions below rather than directly.
    """

    def __init__(self, grid: Grid, *, matrix: np.ndarray | None = None,
                 profile: Callable[[np.ndarray], np.ndarray] | None = None,
                 name: str = "dense", params: dict | None = None, method: str = "auto"):
        if (matrix is None) == (profile is None):
            raise ValueError("give exactly one of matrix or profile")
        self.grid = grid
        self.name = name
        self.params = dict(params or {})
        self._profile = profile
        self._norm_cache: dict[float, float] = {}
        if matrix is not None:
            if grid.size > DENSE_CUTOFF:
                raise ValueError(f"dense kernels are limited to {DENSE_CUTOFF} nodes")
            m = np.array(matrix, dtype=float)
            if m.shape != (grid.size, grid.size):
                raise ValueError(f"kernel matrix shape {m.shape} does not match grid")
            if not np.all(np.isfinite(m)):
                raise ValueError("kernel entries must be finite")
            m.flags.writeable = False
            self._matrix = m
            self.method = "dense"
        else:
            self._matrix = None
            if method == "auto":
                method = "fft"
            if method not in ("fft", "dense"):
                raise ValueError(f"unknown kernel method {method!r}")
            if method == "dense" and grid.size > DENSE_CUTOFF:
                raise ValueError(f"dense evaluation is limited to {DENSE_CUTOFF} nodes")
            self.method = method
        self._weighted = None
        self._spectrum = None

    @property
    def is_translation_invariant(self) -> bool:
        return self._profile is not None

    # -- sampling ---------------------------------------------------------

    def _offsets_rows(self, rows: np.ndarray) -> np.ndarray:
        nodes = self.grid.nodes
        return nodes[rows][:, None, :] - nodes[None, :, :]

    def _eval_profile(self, z: np.ndarray) -> np.ndarray:
        out = np.asarray(self._profile(z), dtype=float)
        return np.broadcast_to(out, z.shape[:-1])

    def row_block(self, rows: np.ndarray) -> np.ndarray:
        """Samples ``J(x_i, y_j)`` for the given row indices, all columns."""
        if self._matrix is not None:
            return self._matrix[rows]
        return self._eval_profile(self._offsets_rows(rows))

    def _row_blocks(self):
        n = self.grid.size
        for start in range(0, n, _ROW_BLOCK):
            rows = np.arange(start, min(start + _ROW_BLOCK, n))
            yield rows, self.row_block(rows)

    def to_dense(self) -> np.ndarray:
        if self._matrix is not None:
            return self._matrix
        if self.grid.size > DENSE_CUTOFF:
            raise ValueError(f"dense storage is limited to {DENSE_CUTOFF} nodes")
        return np.concatenate([blk for _, blk in self._row_blocks()])

    def dense(self) -> "Kernel":
        """Same kernel evaluated through the dense quadrature path."""
        if self._matrix is not None:
            return self
        return Kernel(self.grid, profile=self._profile, name=self.name,
                      params=self.params, method="dense")

    # -- application ------------------------------------------------------

    def _fft_setup(self):
        if self._spectrum is None:
            shape = self.grid.shape
            padded = tuple(2 * n for n in shape)
            # offsets k*h for k in [0, n) and -(n-k)*h in the upper half
            idx = [np.fft.fftfreq(m, d=1.0 / m) for m in padded]
            mesh = np.meshgrid(*[i * h for i, h in zip(idx, self.grid.spacing)], indexing="ij")
            z = np.stack(mesh, axis=-1)
            c = np.array(self._eval_profile(z))
            for axis, n in enumerate(shape):
                sl = [slice(None)] * len(shape)
                sl[axis] = n
                c[tuple(sl)] = 0.0
            self._spectrum = np.fft.rfftn(c, s=padded, axes=tuple(range(len(padded))))
            self._padded = padded
        return self._spectrum

    def apply(self, values: np.ndarray) -> np.ndarray:
        """Apply K along the last axis of ``values`` (batched)."""
        values = np.asarray(values, dtype=float)
        if values.shape[-1] != self.grid.size:
            raise GridMismatchError("field size does not match kernel grid")
        if self.method == "dense":
            if self._weighted is None:
                w = self.to_dense() * self.grid.weights[None, :]
                w.flags.writeable = False
                self._weighted = w
            return values @ self._weighted.T
        spectrum = self._fft_setup()
        shape = self.grid.shape
        lead = values.shape[:-1]
        y = (values * self.grid.weights).reshape(lead + shape)
        axes = tuple(range(-len(shape), 0))
        full = np.fft.irfftn(np.fft.rfftn(y, s=self._padded, axes=axes) * spectrum,
                             s=self._padded, axes=axes)
        out = full[(Ellipsis,) + tuple(slice(0, n) for n in shape)]
        return np.ascontiguousarray(out).reshape(lead + (self.grid.size,))

    # -- diagnostics ------------------------------------------------------

    def norm(self, r: float) -> float:
        """``max_i (sum_j w_j |J(x_i, y_j)|^r)^(1/r)``; ``r = inf`` is the max entry."""
        r = float(r)
        if r < 1:
            raise ValueError("kernel norm exponent must be >= 1")
        if r not in self._norm_cache:
            best = 0.0
            w = self.grid.weights
            for _, blk in self._row_blocks():
                a = np.abs(blk)
                if math.isinf(r):
                    row = a.max(axis=1)
                elif r == 1:
                    row = a @ w
                else:
                    m = a.max(axis=1, keepdims=True)
                    m = np.where(m > 0, m, 1.0)
                    row = m[:, 0] * ((a / m) ** r @ w) ** (1.0 / r)
                best = max(best, float(row.max()))
            self._norm_cache[r] = best
        return self._norm_cache[r]

    def norms(self, rs=(1, 2, 4, math.inf)) -> KernelNorms:
        return KernelNorms({float(r): self.norm(r) for r in rs}, self.norm(1))

    def row_integrals(self) -> np.ndarray:
        """Discrete ``int_Omega J(x_i, y) dy`` per row (signed)."""
        w = self.grid.weights
        return np.concatenate([blk @ w for _, blk in self._row_blocks()])

    def symmetry_defect(self, samples: int = 2000, seed: int = 0) -> float:
        """Max ``|J(x_i, y_j) - J(y_j, x_i)|`` over sampled pairs (all pairs
        for dense kernels up to 2048 nodes)."""
        n = self.grid.size
        if self._matrix is not None and n <= 2048:
            return float(np.max(np.abs(self._matrix - self._matrix.T)))
        rng = np.random.default_rng(seed)
        i = rng.integers(0, n, samples)
        j = rng.integers(0, n, samples)
        if self._matrix is not None:
            return float(np.max(np.abs(self._matrix[i, j] - self._matrix[j, i])))
        nodes = self.grid.nodes
        z = nodes[i] - nodes[j]
        return float(np.max(np.abs(self._eval_profile(z) - self._eval_profile(-z))))

    def __repr__(self) -> str:
        return f"Kernel({self.name}, {self.params}, method={self.method})"


def apply_K(kernel: Kernel, v: Field) -> Field:
    if not kernel.grid.same_as(v.grid):
        raise GridMismatchError("field and kernel live on different grids")
    return Field(v.grid, kernel.apply(v.values))


def kernel_norm(kernel: Kernel, r: float) -> float:
    return kernel.norm(r)


# -- profiles ---------------------------------------------------------------

def _sqnorm(z: np.ndarray) -> np.ndarray:
    return np.sum(z * z, axis=-1)


def gaussian_profile(sigma: float, amplitude: float = 1.0, dimension: int = 1):
    """``amplitude`` times the isotropic normal density with std ``sigma``
    (unit mass over R^d)."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    c = amplitude / (2.0 * np.pi * sigma**2) ** (dimension / 2.0)
    s2 = 2.0 * sigma**2
    return lambda z: c * np.exp(-_sqnorm(z) / s2)


def _bump_mass(dimension: int) -> float:
    f = lambda s: math.exp(-1.0 / (1.0 - s * s)) if abs(s) < 1 else 0.0
    if dimension == 1:
        return 2.0 * integrate.quad(f, 0.0, 1.0, epsabs=1e-14, epsrel=1e-13)[0]
    return 2.0 * np.pi * integrate.quad(lambda s: f(s) * s, 0.0, 1.0,
                                        epsabs=1e-14, epsrel=1e-13)[0]


def bump_profile(radius: float, amplitude: float = 1.0, dimension: int = 1):
    """Smooth compactly supported bump of unit mass (times ``amplitude``)."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    c = amplitude / (_bump_mass(dimension) * radius**dimension)

    def g(z):
        s2 = _sqnorm(z) / radius**2
        out = np.zeros_like(s2)
        inside = s2 < 1.0
        out[inside] = c * np.exp(-1.0 / (1.0 - s2[inside]))
        return out

    return g


def constant_kernel(grid: Grid, value: float = 1.0, method: str = "auto") -> Kernel:
    return Kernel(grid, profile=lambda z: np.full(z.shape[:-1], float(value)),
                  name="constant", params={"value": value}, method=method)


def gaussian_kernel(grid: Grid, sigma: float, amplitude: float = 1.0,
                    method: str = "auto") -> Kernel:
    return Kernel(grid, profile=gaussian_profile(sigma, amplitude, grid.dimension),
                  name="gaussian", params={"sigma": sigma, "amplitude": amplitude},
                  method=method)


def mexican_hat_kernel(grid: Grid, sigma_exc: float, sigma_inh: float,
                       amp_exc: float = 1.0, amp_inh: float = 0.5,
                       method: str = "auto") -> Kernel:
    """Difference of Gaussians: excitatory centre, inhibitory surround."""
    ge = gaussian_profile(sigma_exc, amp_exc, grid.dimension)
    gi = gaussian_profile(sigma_inh, amp_inh, grid.dimension)
    return Kernel(grid, profile=lambda z: ge(z) - gi(z), name="mexican_hat",
                  params={"sigma_exc": sigma_exc, "sigma_inh": sigma_inh,
                          "amp_exc": amp_exc, "amp_inh": amp_inh}, method=method)


def bump_kernel(grid: Grid, radius: float, amplitude: float = 1.0,
                method: str = "auto") -> Kernel:
    return Kernel(grid, profile=bump_profile(radius, amplitude, grid.dimension),
                  name="bump", params={"radius": radius, "amplitude": amplitude},
                  method=method)


def dense_kernel(grid: Grid, matrix: np.ndarray) -> Kernel:
    return Kernel(grid, matrix=matrix, name="dense")


def read_kernel_csv(path, grid: Grid) -> Kernel:
    """Row-major samples after a ``n_rows,n_cols`` header line."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    try:
        n_rows, n_cols = (int(v) for v in rows[0])
    except ValueError:
        raise ValueError(f"bad kernel header {rows[0]!r}, expected n_rows,n_cols") from None
    flat = np.array([float(v) for r in rows[1:] for v in r], dtype=float)
    if flat.size != n_rows * n_cols:
        raise ValueError(f"kernel file has {flat.size} values, header says {n_rows * n_cols}")
    return dense_kernel(grid, flat.reshape(n_rows, n_cols))


def write_kernel_csv(kernel: Kernel, path) -> None:
    m = kernel.to_dense()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(m.shape)
        for row in m:
            w.writerow([format(v, ".17g") for v in row])


# -- bound verification -------------------------------------------------------

INEQUALITIES = ("pointwise", "lp_by_l1_kernel", "lp_by_l1_field")


@dataclass
class KernelBoundsReport:
    p: float
    trials: int
    min_ratio: dict
    max_ratio: dict
    violations: list

    @property
    def passed(self) -> bool:
        return not self.violations


def verify_kernel_bounds(kernel: Kernel, trials: int = 100, p: float = 2.0,
                         seed: int = 0, fields: list[Field] | None = None) -> KernelBoundsReport:
    """Check the three operator inequalities on random fields.

    * ``max_i |(Kv)_i| <= ||J||_q ||v||_p``
    * ``||Kv||_p <= ||J||_1 ||v||_p``
    * ``||Kv||_p <= ||J||_p ||v||_1``

    With the same quadrature weights in every norm these are exact discrete
    Hölder/Minkowski inequalities, so no tolerance is applied. Trial ``k``
    draws from ``default_rng([seed, k])``; that pair is the witness seed.
    Ratios are ``bound / actual``.
    """
    if trials < 1 and not fields:
        raise ValueError("trials must be >= 1")
    grid = kernel.grid
    q = conjugate_exponent(p)
    Jq, J1, Jp = kernel.norm(q), kernel.norm(1), kernel.norm(p)
    if fields is None:
        samples = []
        for k in range(trials):
            rng = np.random.default_rng([seed, k])
            scale = rng.choice([1e-3, 1.0, 1e3])
            samples.append(scale * rng.standard_normal(grid.size))
        labels = [(seed, k) for k in range(trials)]
    else:
        samples = [f.values for f in fields]
        labels = [("field", k) for k in range(len(fields))]
    V = np.stack(samples)
    KV = kernel.apply(V)
    vp = grid.norm(V, p)
    v1 = grid.norm(V, 1)
    kvp = grid.norm(KV, p)
    kvsup = np.max(np.abs(KV), axis=1)
    checks = {
        "pointwise": (kvsup, Jq * vp),
        "lp_by_l1_kernel": (kvp, J1 * vp),
        "lp_by_l1_field": (kvp, Jp * v1),
    }
    min_ratio, max_ratio, violations = {}, {}, []
    for name, (actual, bound) in checks.items():
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(actual > 0, bound / actual, np.inf)
        min_ratio[name] = float(np.min(ratio))
        finite = ratio[np.isfinite(ratio)]
        max_ratio[name] = float(np.max(finite)) if finite.size else math.inf
        for k in np.flatnonzero(actual > bound):
            violations.append({"inequality": name, "witness": labels[k],
                               "actual": float(actual[k]), "bound": float(bound[k])})
    return KernelBoundsReport(p, len(samples), min_ratio, max_ratio, violations)

