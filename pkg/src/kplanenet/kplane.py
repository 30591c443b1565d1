"""Discrete plane-integral calculus on sampled functions.

Grid functions live on closed symmetric boxes [-X, X]^d; plane functions
live on a finite direction design (orthonormal-row matrices with
probability weights) times a uniform offset grid.  The forward transform
integrates over planes, backprojection averages over directions, and the
offset-domain filter makes the composition the identity.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import permutations, product

import numpy as np
from scipy import fft as sp_fft
from scipy.ndimage import map_coordinates

from . import fourier
from .operators import OperatorSpec, filter_constant

# ---------------------------------------------------------------------------
# sampled functions on boxes
# ---------------------------------------------------------------------------


@dataclass
class GridFunction:
    """Samples of a function of d variables on a closed symmetric box."""

    extents: tuple
    values: np.ndarray

    def __post_init__(self):
        self.extents = tuple(float(x) for x in np.atleast_1d(self.extents))
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != len(self.extents):
            raise ValueError("one extent per value-array axis required")

    @property
    def d(self) -> int:
        return self.values.ndim

    @property
    def counts(self) -> tuple:
        return self.values.shape

    def axes(self) -> list:
        return [fourier.axis(X, n) for X, n in zip(self.extents, self.counts)]

    def spacings(self) -> tuple:
        return tuple(fourier.spacing(X, n) for X, n in zip(self.extents, self.counts))

    def boundary_ratio(self) -> float:
        """Largest boundary-face magnitude relative to the peak."""
        peak = float(np.max(np.abs(self.values)))
        if peak == 0.0:
            return 0.0
        edge = 0.0
        for ax in range(self.d):
            sl = [slice(None)] * self.d
            for end in (0, -1):
                sl[ax] = end
                edge = max(edge, float(np.max(np.abs(self.values[tuple(sl)]))))
        return edge / peak

    def interp(self, points: np.ndarray, order: int = 1) -> np.ndarray:
        """Multilinear (default) interpolation at (..., d) points; 0 outside."""
        pts = np.asarray(points, dtype=float)
        coords = np.empty((self.d,) + pts.shape[:-1])
        for ax in range(self.d):
            h = fourier.spacing(self.extents[ax], self.counts[ax])
            coords[ax] = (pts[..., ax] + self.extents[ax]) / h
        return map_coordinates(self.values, coords, order=order, mode="constant", cval=0.0)

    @classmethod
    def from_callable(cls, fn, extents, counts) -> "GridFunction":
        extents = tuple(float(x) for x in np.atleast_1d(extents))
        counts = tuple(int(n) for n in np.atleast_1d(counts))
        if len(counts) == 1 and len(extents) > 1:
            counts = counts * len(extents)
        if len(extents) == 1 and len(counts) > 1:
            extents = extents * len(counts)
        mesh = np.meshgrid(*[fourier.axis(X, n) for X, n in zip(extents, counts)],
                           indexing="ij")
        pts = np.stack(mesh, axis=-1)
        return cls(extents=extents, values=fn(pts))

    @classmethod
    def gaussian(cls, d, extent, count, sigma=1.0, center=None) -> "GridFunction":
        center = np.zeros(d) if center is None else np.asarray(center, dtype=float)

        def fn(pts):
            return np.exp(-np.sum((pts - center) ** 2, axis=-1) / (2.0 * sigma ** 2))

        return cls.from_callable(fn, (extent,) * d, (count,) * d)


# ---------------------------------------------------------------------------
# direction designs
# ---------------------------------------------------------------------------


@dataclass
class DirectionDesign:
    """Orthonormal-row matrices A_i with quadrature weights summing to 1."""

    matrices: np.ndarray  # (N, r, d)
    weights: np.ndarray   # (N,)

    def __post_init__(self):
        self.matrices = np.asarray(self.matrices, dtype=float)
        if self.matrices.ndim == 2:
            self.matrices = self.matrices[None]
        self.weights = np.asarray(self.weights, dtype=float)
        n, r, d = self.matrices.shape
        eye = np.eye(r)
        worst = max(float(np.linalg.norm(A @ A.T - eye)) for A in self.matrices)
        if worst > 1e-12:
            raise ValueError(f"design rows not orthonormal (violation {worst:.2e})")
        if abs(float(self.weights.sum()) - 1.0) > 1e-12 or np.any(self.weights < 0):
            raise ValueError("weights must be nonnegative and sum to 1")

    def __len__(self) -> int:
        return self.matrices.shape[0]

    @property
    def r(self) -> int:
        return self.matrices.shape[1]

    @property
    def d(self) -> int:
        return self.matrices.shape[2]

    def find(self, A: np.ndarray, tol: float = 1e-9):
        """Index of the design matrix equal to A within tol, else None."""
        diffs = np.max(np.abs(self.matrices - A[None]), axis=(1, 2))
        j = int(np.argmin(diffs))
        return j if diffs[j] <= tol else None


def half_circle_design(count: int) -> DirectionDesign:
    """Uniform angles on the half circle (row vectors in R^2)."""
    theta = np.pi * np.arange(count) / count
    mats = np.stack([np.cos(theta), np.sin(theta)], axis=-1)[:, None, :]
    return DirectionDesign(mats, np.full(count, 1.0 / count))


def full_circle_design(count: int) -> DirectionDesign:
    """Uniform angles on the full circle; closed under negation for even count."""
    theta = 2.0 * np.pi * np.arange(count) / count
    mats = np.stack([np.cos(theta), np.sin(theta)], axis=-1)[:, None, :]
    return DirectionDesign(mats, np.full(count, 1.0 / count))


def signed_permutation_matrices(d: int) -> np.ndarray:
    """The lattice-preserving orthogonal matrices of R^d (2^d d! of them)."""
    out = []
    for perm in permutations(range(d)):
        base = np.eye(d)[list(perm)]
        for signs in product((1.0, -1.0), repeat=d):
            out.append(np.diag(signs) @ base)
    return np.array(out)


def signed_permutation_design(d: int) -> DirectionDesign:
    """Default evaluation design (k = 0): exact at grid nodes."""
    mats = signed_permutation_matrices(d)
    return DirectionDesign(mats, np.full(len(mats), 1.0 / len(mats)))


def fibonacci_sphere_design(count: int) -> DirectionDesign:
    """Quasi-uniform unit vectors in R^3 (rows of 1x3 matrices)."""
    i = np.arange(count) + 0.5
    phi = np.arccos(1.0 - 2.0 * i / count)
    golden = np.pi * (1.0 + np.sqrt(5.0))
    theta = golden * i
    mats = np.stack([np.sin(phi) * np.cos(theta),
                     np.sin(phi) * np.sin(theta),
                     np.cos(phi)], axis=-1)[:, None, :]
    mats /= np.linalg.norm(mats, axis=-1, keepdims=True)
    return DirectionDesign(mats, np.full(count, 1.0 / count))


def fibonacci_frame_design(count: int) -> DirectionDesign:
    """2-frames in R^3 whose row spans tile the set of 2-subspaces."""
    normals = fibonacci_sphere_design(count).matrices[:, 0, :]
    mats = np.stack([null_basis(n[None, :]) for n in normals])
    return DirectionDesign(mats, np.full(count, 1.0 / count))


def direction_design(d: int, k: int, count: int | None = None) -> DirectionDesign:
    """Default design for each supported (d, k)."""
    if k == 0:
        return signed_permutation_design(d)
    if d == 2 and k == 1:
        return half_circle_design(count or 180)
    if d == 3 and k == 2:
        return fibonacci_sphere_design(count or 256)
    if d == 3 and k == 1:
        return fibonacci_frame_design(count or 256)
    raise ValueError(f"no built-in design for d={d}, k={k}")


def null_basis(A: np.ndarray) -> np.ndarray:
    """Orthonormal basis (rows) of the null space of A (deterministic SVD)."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    r, d = A.shape
    _, _, vt = np.linalg.svd(A, full_matrices=True)
    return vt[r:]


# ---------------------------------------------------------------------------
# plane-domain functions
# ---------------------------------------------------------------------------


@dataclass
class PlaneFunction:
    """Values indexed by (direction, offset-grid point)."""

    design: DirectionDesign
    t_extents: tuple
    values: np.ndarray              # (N, *t_counts)
    warnings: list = field(default_factory=list)

    def __post_init__(self):
        self.t_extents = tuple(float(x) for x in np.atleast_1d(self.t_extents))
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape[0] != len(self.design):
            raise ValueError("leading axis must enumerate design directions")
        if self.values.ndim - 1 != len(self.t_extents):
            raise ValueError("one t-extent per offset axis required")

    @property
    def t_counts(self) -> tuple:
        return self.values.shape[1:]

    def t_axes(self) -> list:
        return [fourier.axis(X, n) for X, n in zip(self.t_extents, self.t_counts)]


def _transform_one(phi: GridFunction, A: np.ndarray, t_axes: list, s_axes: list,
                   order: int):
    """Integral of phi over the planes {x : A x = t} for one direction."""
    r, d = A.shape
    k = d - r
    t_mesh = np.meshgrid(*t_axes, indexing="ij") if r > 1 else [t_axes[0]]
    t_pts = np.stack([m.ravel() for m in t_mesh], axis=-1)      # (nt, r)
    if k == 0:
        # exact nodal evaluation: node-to-node maps stay exact at order 1
        vals = phi.interp(t_pts @ A, order=1)                    # A^T t, rows
        return vals.reshape(tuple(len(ax) for ax in t_axes))
    B = null_basis(A)
    s_mesh = np.meshgrid(*s_axes, indexing="ij") if k > 1 else [s_axes[0]]
    s_pts = np.stack([m.ravel() for m in s_mesh], axis=-1)       # (ns, k)
    base = t_pts @ A                                             # (nt, d)
    offs = s_pts @ B                                             # (ns, d)
    x = base[:, None, :] + offs[None, :, :]
    vals = phi.interp(x, order=order)                            # (nt, ns)
    ds = 1.0
    for ax in s_axes:
        ds *= ax[1] - ax[0]
    integ = vals.sum(axis=1) * ds
    return integ.reshape(tuple(len(ax) for ax in t_axes))


def kplane_transform(phi: GridFunction, design: DirectionDesign, t_extent,
                     t_counts, threads: int = 1, order: int = 3) -> PlaneFunction:
    """Sampled plane integrals of phi over every design direction.

    For k >= 1 each plane is parameterized as x = A^T t + B^T s with B an
    orthonormal null-space basis, and the s-integral is a trapezoid sum of
    spline-interpolated values (zero outside the box; `order` sets the
    spline degree).  For k = 0 the value is phi(A^T t), evaluated exactly
    at grid nodes whenever A^T t lands on one.
    """
    r = design.r
    if design.d != phi.d:
        raise ValueError("design and grid dimension mismatch")
    t_extents = tuple(float(x) for x in np.atleast_1d(t_extent))
    if len(t_extents) == 1:
        t_extents = t_extents * r
    t_counts = tuple(int(n) for n in np.atleast_1d(t_counts))
    if len(t_counts) == 1:
        t_counts = t_counts * r
    t_axes = [fourier.axis(X, n) for X, n in zip(t_extents, t_counts)]

    k = phi.d - r
    warnings = []
    if phi.boundary_ratio() > 1e-8:
        warnings.append("input grid boundary magnitude exceeds 1e-8 of peak; "
                        "plane integrals carry truncation error")
    s_axes = []
    if k > 0:
        s_extent = float(np.sqrt(sum(X ** 2 for X in phi.extents)))
        h_min = min(phi.spacings())
        ns = 2 * int(np.ceil(s_extent / h_min)) + 1
        s_axes = [fourier.axis(s_extent, ns)] * k

    out = np.empty((len(design),) + t_counts)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            slices = list(pool.map(
                lambda A: _transform_one(phi, A, t_axes, s_axes, order),
                design.matrices))
        for i, sl in enumerate(slices):
            out[i] = sl
    else:
        for i, A in enumerate(design.matrices):
            out[i] = _transform_one(phi, A, t_axes, s_axes, order)
    return PlaneFunction(design=design, t_extents=t_extents, values=out,
                         warnings=warnings)


def backproject(g: PlaneFunction, extents, counts, threads: int = 1,
                order: int | None = None) -> GridFunction:
    """Weighted direction average sum_i w_i g(A_i, A_i x) on a target box.

    Offset-grid lookups use spline interpolation of the given order; the
    default is cubic, except order 1 for full-rank directions (r = d),
    where nodal lookups should stay exact.
    """
    extents = tuple(float(x) for x in np.atleast_1d(extents))
    counts = tuple(int(n) for n in np.atleast_1d(counts))
    if len(counts) == 1:
        counts = counts * len(extents)
    d = g.design.d
    if len(extents) != d:
        raise ValueError("target box dimension must match the design")
    if order is None:
        order = 1 if g.design.r == d else 3
    mesh = np.meshgrid(*[fourier.axis(X, n) for X, n in zip(extents, counts)],
                       indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)          # (M, d)

    t_ext = np.array(g.t_extents)
    t_h = np.array([fourier.spacing(X, n) for X, n in zip(g.t_extents, g.t_counts)])

    def one(i):
        proj = pts @ g.design.matrices[i].T                      # (M, r)
        coords = ((proj + t_ext) / t_h).T
        return map_coordinates(g.values[i], coords, order=order,
                               mode="constant", cval=0.0)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(one, range(len(g.design))))
    else:
        parts = [one(i) for i in range(len(g.design))]
    acc = np.zeros(pts.shape[0])
    for w, part in zip(g.design.weights, parts):                 # fixed order
        acc += w * part
    return GridFunction(extents=extents, values=acc.reshape(counts))


def filter_K(g: PlaneFunction, spec: OperatorSpec) -> PlaneFunction:
    """Offset-domain frequency filter c |w|^k applied per direction.

    The constant is filter_constant(d, k), matched to the design's
    probability weights; k = 0 degenerates to multiplication by 1.
    """
    d, k = spec.d, spec.k
    if g.design.d != d or g.design.r != d - k:
        raise ValueError("plane function does not match the operator spec")
    c = filter_constant(d, k)
    if k == 0:
        return PlaneFunction(design=g.design, t_extents=g.t_extents,
                             values=c * g.values, warnings=list(g.warnings))
    axes = tuple(range(1, g.values.ndim))
    wnorm = fourier.radial_freq_grid(g.t_extents, g.t_counts)
    spec_vals = sp_fft.fftn(g.values, axes=axes)
    spec_vals *= (c * wnorm ** k)[None]
    out = sp_fft.ifftn(spec_vals, axes=axes).real
    return PlaneFunction(design=g.design, t_extents=g.t_extents, values=out,
                         warnings=list(g.warnings))


def _pad_double(phi: GridFunction) -> GridFunction:
    """Zero-embed into a roughly doubled box, keeping the node lattice.

    (n+1)//2 nodes are added on each side at the original spacing, so the
    original samples stay exactly on grid nodes.
    """
    pads = tuple((n + 1) // 2 for n in phi.counts)
    new_counts = tuple(n + 2 * p for n, p in zip(phi.counts, pads))
    new_extents = tuple(X + p * h for X, p, h
                        in zip(phi.extents, pads, phi.spacings()))
    vals = np.zeros(new_counts)
    sl = tuple(slice(p, p + n) for p, n in zip(pads, phi.counts))
    vals[sl] = phi.values
    return GridFunction(extents=new_extents, values=vals)


def fourier_slice_residual(phi: GridFunction, A: np.ndarray) -> float:
    """Relative L2 mismatch between the offset-domain spectrum of the plane
    transform and the box spectrum restricted to the row span of A."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    r, d = A.shape
    if d != phi.d:
        raise ValueError("direction matrix does not match the grid dimension")
    t_extent = float(np.sqrt(sum(X ** 2 for X in phi.extents)))
    h_min = min(phi.spacings())
    nt = 2 * int(np.ceil(t_extent / h_min)) + 1
    design = DirectionDesign(A[None], np.array([1.0]))
    g = kplane_transform(phi, design, t_extent, nt)
    lhs = fourier.forward(g.values[0], (t_extent,) * r)

    padded = _pad_double(phi)
    phat = fourier.forward(padded.values, padded.extents)
    phat = sp_fft.fftshift(phat)
    # offset-frequency comb in FFT order, mapped into the box spectrum
    w_fft = [fourier.freqs(t_extent, nt)] * r
    mesh = np.meshgrid(*w_fft, indexing="ij") if r > 1 else [w_fft[0]]
    w_pts = np.stack([m.ravel() for m in mesh], axis=-1)        # (nw, r)
    xi = w_pts @ A                                              # (nw, d)
    coords = np.empty((d, xi.shape[0]))
    for ax in range(d):
        wa = np.sort(fourier.freqs(padded.extents[ax], padded.counts[ax]))
        dw = wa[1] - wa[0]
        coords[ax] = (xi[:, ax] - wa[0]) / dw
    rhs_re = map_coordinates(phat.real, coords, order=3, mode="nearest")
    rhs_im = map_coordinates(phat.imag, coords, order=3, mode="nearest")
    rhs = (rhs_re + 1j * rhs_im).reshape(lhs.shape)
    return float(np.linalg.norm(lhs - rhs) / np.linalg.norm(rhs))


def fbp_identity_residual(phi: GridFunction, spec: OperatorSpec,
                          design: DirectionDesign, t_extent, t_counts,
                          threads: int = 1, order: int = 3) -> float:
    """Relative max error of backproject(filter(transform(phi))) against phi
    over the central half of the box (boundary ring excluded)."""
    g = kplane_transform(phi, design, t_extent, t_counts, threads=threads,
                         order=order)
    rec = backproject(filter_K(g, spec), phi.extents, phi.counts,
                      threads=threads, order=order)
    sl = tuple(slice(n // 4, n - n // 4) for n in phi.counts)
    err = np.max(np.abs(rec.values[sl] - phi.values[sl]))
    return float(err / np.max(np.abs(phi.values)))


# ---------------------------------------------------------------------------
# the isotropy projector
# ---------------------------------------------------------------------------


def _apply_orthogonal_to_offset_grid(values: np.ndarray, U: np.ndarray,
                                     t_extents, exact_tol: float = 1e-12):
    """Samples of t -> g(U t) on the same offset grid.

    Signed permutations of a symmetric equal-extent grid permute nodes, so
    the result is an exact axis permutation + flips; anything else falls
    back to multilinear interpolation.
    """
    r = U.shape[0]
    P = np.abs(U)
    is_perm = (np.allclose(P @ P.T, np.eye(r), atol=exact_tol)
               and np.all(np.abs(P - np.round(P)) < exact_tol)
               and len(set(t_extents)) == 1
               and len(set(values.shape)) == 1)
    if is_perm:
        # out[idx(t)] = values[idx(U t)] with (U t)_i = sign * t_{perm[i]}:
        # the input axis i reads output axis perm[i], so transpose by the
        # inverse permutation and flip the output axis perm[i] on a sign
        perm = [int(np.argmax(P[i])) for i in range(r)]
        out = np.transpose(values, axes=np.argsort(perm))
        for i in range(r):
            if U[i, perm[i]] < 0:
                out = np.flip(out, axis=perm[i])
        return out.copy()
    axes = [fourier.axis(X, n) for X, n in zip(t_extents, values.shape)]
    mesh = np.meshgrid(*axes, indexing="ij") if r > 1 else [axes[0]]
    t_pts = np.stack([m.ravel() for m in mesh], axis=-1)
    tu = t_pts @ U.T
    coords = np.empty((r, tu.shape[0]))
    for ax in range(r):
        h = axes[ax][1] - axes[ax][0]
        coords[ax] = (tu[:, ax] + t_extents[ax]) / h
    return map_coordinates(values, coords, order=1, mode="constant",
                           cval=0.0).reshape(values.shape)


def project_iso(g: PlaneFunction, u_samples=None) -> PlaneFunction:
    """Average of (A, t) -> g(U A, U t) over orthogonal U.

    Defaults: the full signed-permutation group of the offset dimension
    ({+1, -1} when it is 1).  Designs closed under the samples are handled
    exactly; otherwise the nearest design direction is used and a warning
    recorded.
    """
    r = g.design.r
    if u_samples is None:
        u_samples = signed_permutation_matrices(r)
    warnings = list(g.warnings)
    acc = np.zeros_like(g.values)
    for U in np.asarray(u_samples, dtype=float):
        U = np.atleast_2d(U)
        for i, A in enumerate(g.design.matrices):
            j = g.design.find(U @ A)
            if j is None:
                j = int(np.argmin(np.linalg.norm(
                    g.design.matrices - (U @ A)[None], axis=(1, 2))))
                msg = "isotropy average needed a direction outside the design; " \
                      "used nearest"
                if msg not in warnings:
                    warnings.append(msg)
            acc[i] += _apply_orthogonal_to_offset_grid(g.values[j], U, g.t_extents)
    acc /= len(u_samples)
    return PlaneFunction(design=g.design, t_extents=g.t_extents, values=acc,
                         warnings=warnings)


# ---------------------------------------------------------------------------
# binary serialization: one JSON header line + little-endian f64 payload
# ---------------------------------------------------------------------------


def save_grid(path, phi: GridFunction) -> None:
    header = {"kind": "grid", "extents": list(phi.extents),
              "counts": list(phi.counts)}
    with open(path, "wb") as fh:
        fh.write((json.dumps(header) + "\n").encode())
        fh.write(np.ascontiguousarray(phi.values, dtype="<f8").tobytes())


def load_grid(path) -> GridFunction:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode())
        if header.get("kind") != "grid":
            raise ValueError("not a grid file")
        counts = tuple(header["counts"])
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != int(np.prod(counts)):
        raise ValueError("payload length does not match the header counts")
    return GridFunction(extents=tuple(header["extents"]),
                        values=data.reshape(counts).astype(float))


def save_plane(path, g: PlaneFunction) -> None:
    header = {"kind": "plane", "t_extents": list(g.t_extents),
              "t_counts": list(g.t_counts),
              "matrices": g.design.matrices.tolist(),
              "weights": g.design.weights.tolist(),
              "warnings": list(g.warnings)}
    with open(path, "wb") as fh:
        fh.write((json.dumps(header) + "\n").encode())
        fh.write(np.ascontiguousarray(g.values, dtype="<f8").tobytes())


def load_plane(path) -> PlaneFunction:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode())
        if header.get("kind") != "plane":
            raise ValueError("not a plane file")
        data = np.frombuffer(fh.read(), dtype="<f8")
    design = DirectionDesign(np.array(header["matrices"]),
                             np.array(header["weights"]))
    shape = (len(design),) + tuple(header["t_counts"])
    if data.size != int(np.prod(shape)):
        raise ValueError("payload length does not match the header counts")
    return PlaneFunction(design=design, t_extents=tuple(header["t_extents"]),
                         values=data.reshape(shape).astype(float),
                         warnings=list(header.get("warnings", [])))
