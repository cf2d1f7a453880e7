"""Coefficient fields A(x, t) and their structure-class bookkeeping.

A field carries the triple (alpha, beta, L): ellipticity floor, upper bound,
and the Lipschitz modulus in the state variable t. Everything downstream
(assembly, Picard iteration, homogenization) consumes the same vectorized
evaluation contract: eval(points, t) with points of shape (m, dim) and t
scalar or shape (m,) returns an (m, dim, dim) array.
"""

from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError

__all__ = [
    "StructureConstants",
    "CoefficientField",
    "IsotropicField",
    "Region",
    "ball",
    "annulus",
    "constant_field",
    "identity_field",
    "piecewise_field",
    "validate_structure",
    "StructureReport",
]


@dataclass(frozen=True)
class StructureConstants:
    """Ellipticity and t-continuity constants of a coefficient field."""

    alpha: float
    beta: float
    lipschitz_l: float = 0.0

    def __post_init__(self):
        if not (0.0 < self.alpha <= self.beta):
            raise PreconditionError(
                f"need 0 < alpha <= beta, got alpha={self.alpha}, beta={self.beta}")
        if self.lipschitz_l < 0.0:
            raise PreconditionError("lipschitz_l must be nonnegative")

    @property
    def is_linear(self):
        return self.lipschitz_l == 0.0


def _as_points(x, dim):
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == 1
    if single:
        pts = pts[None, :]
    if pts.ndim != 2 or pts.shape[1] != dim:
        raise PreconditionError(f"points must have shape (m, {dim}), got {pts.shape}")
    return pts, single


def _as_states(t, m):
    tt = np.asarray(t, dtype=float)
    if tt.ndim == 0:
        tt = np.full(m, float(tt))
    if tt.shape != (m,):
        raise PreconditionError(f"state values must be scalar or shape ({m},)")
    return tt


class CoefficientField:
    """Matrix-valued coefficient with declared structure constants.

    Parameters
    ----------
    fn : callable
        fn(points, t) -> (m, dim, dim), with points (m, dim) and t (m,).
    constants : StructureConstants
    dim : int
        Spatial dimension, 2 or 3.
    """

    def __init__(self, fn, constants, dim=2, name=""):
        if dim not in (2, 3):
            raise PreconditionError("dim must be 2 or 3")
        self._fn = fn
        self.constants = constants
        self.dim = dim
        self.name = name

    def eval(self, x, t=0.0):
        pts, single = _as_points(x, self.dim)
        tt = _as_states(t, len(pts))
        out = np.asarray(self._fn(pts, tt), dtype=float)
        if out.shape != (len(pts), self.dim, self.dim):
            raise PreconditionError(
                f"field '{self.name}' returned shape {out.shape}, "
                f"expected {(len(pts), self.dim, self.dim)}")
        return out[0] if single else out

    @property
    def is_linear(self):
        return self.constants.is_linear

    def __repr__(self):
        c = self.constants
        return (f"CoefficientField({self.name or 'anonymous'}, dim={self.dim}, "
                f"alpha={c.alpha:g}, beta={c.beta:g}, L={c.lipschitz_l:g})")


class IsotropicField(CoefficientField):
    """Scalar coefficient sigma(x, t) * I."""

    def __init__(self, scalar_fn, constants, dim=2, name=""):
        self._scalar_fn = scalar_fn

        def fn(pts, tt):
            s = np.asarray(scalar_fn(pts, tt), dtype=float)
            eye = np.eye(dim)
            return s[:, None, None] * eye[None, :, :]

        super().__init__(fn, constants, dim=dim, name=name)

    def scalar(self, x, t=0.0):
        pts, single = _as_points(x, self.dim)
        tt = _as_states(t, len(pts))
        s = np.asarray(self._scalar_fn(pts, tt), dtype=float)
        return float(s[0]) if single else s


def constant_field(matrix, dim=None, name=""):
    """Field with a fixed symmetric matrix value."""
    mat = np.asarray(matrix, dtype=float)
    if mat.ndim == 0:
        if dim is None:
            dim = 2
        mat = float(mat) * np.eye(dim)
    if dim is None:
        dim = mat.shape[0]
    if mat.shape != (dim, dim):
        raise PreconditionError("matrix shape does not match dim")
    if not np.allclose(mat, mat.T, rtol=0, atol=1e-14 * max(1.0, np.abs(mat).max())):
        raise PreconditionError("constant coefficient must be symmetric")
    ev = np.linalg.eigvalsh(mat)
    if ev[0] <= 0:
        raise PreconditionError("constant coefficient must be positive definite")
    constants = StructureConstants(float(ev[0]), float(ev[-1]), 0.0)

    def fn(pts, tt):
        return np.broadcast_to(mat, (len(pts), dim, dim)).copy()

    return CoefficientField(fn, constants, dim=dim, name=name or "constant")


def identity_field(dim=2):
    return constant_field(np.eye(dim), dim=dim, name="identity")


class Region:
    """Radial region |x| in [r_lo, r_hi], used for sampling and dispatch."""

    def __init__(self, r_lo, r_hi, dim=2, name=""):
        if not (0.0 <= r_lo < r_hi):
            raise PreconditionError(f"need 0 <= r_lo < r_hi, got [{r_lo}, {r_hi}]")
        self.r_lo = float(r_lo)
        self.r_hi = float(r_hi)
        self.dim = dim
        self.name = name or f"annulus[{r_lo:g},{r_hi:g}]"

    def contains(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        r = np.linalg.norm(pts, axis=1)
        return (r >= self.r_lo) & (r <= self.r_hi)

    def sample_lattice(self, n=32):
        """Deterministic lattice over the bounding box, clipped to the region.

        Cell-centered so that r = 0 (where radial tensors may be undefined)
        is never sampled exactly.
        """
        b = self.r_hi
        axis = (np.arange(n) + 0.5) / n * 2.0 * b - b
        grids = np.meshgrid(*([axis] * self.dim), indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=1)
        return pts[self.contains(pts)]


def ball(radius, dim=2):
    return Region(0.0, radius, dim=dim, name=f"ball[{radius:g}]")


def annulus(r_lo, r_hi, dim=2):
    return Region(r_lo, r_hi, dim=dim)


def piecewise_field(pieces, dim=2, name="piecewise"):
    """Compose fields over disjoint radial regions, first match wins.

    pieces: list of (Region or None, CoefficientField); None matches
    everything and normally appears last. Combined constants are the
    componentwise worst case: min alpha, max beta, max L.
    """
    if not pieces:
        raise PreconditionError("piecewise_field needs at least one piece")
    regions = []
    fields = []
    for region, field in pieces:
        if field.dim != dim:
            raise PreconditionError("piece dimension mismatch")
        regions.append(region)
        fields.append(field)
    alpha = min(f.constants.alpha for f in fields)
    beta = max(f.constants.beta for f in fields)
    lip = max(f.constants.lipschitz_l for f in fields)

    def fn(pts, tt):
        out = np.empty((len(pts), dim, dim))
        done = np.zeros(len(pts), dtype=bool)
        for region, field in zip(regions, fields):
            if region is None:
                mask = ~done
            else:
                mask = region.contains(pts) & ~done
            if mask.any():
                out[mask] = field.eval(pts[mask], tt[mask])
                done |= mask
        if not done.all():
            bad = pts[~done][0]
            raise PreconditionError(f"point {bad} not covered by any piece")
        return out

    return CoefficientField(fn, StructureConstants(alpha, beta, lip), dim=dim, name=name)


@dataclass
class StructureReport:
    """Worst observed violations, each normalized by the declared scale."""

    ok: bool
    symmetry_defect: float
    ellipticity_defect: float
    bound_defect: float
    lipschitz_defect: float
    n_points: int
    n_states: int

    def summary(self):
        status = "ok" if self.ok else "VIOLATED"
        return (f"structure {status}: sym {self.symmetry_defect:.3e}, "
                f"ell {self.ellipticity_defect:.3e}, bound {self.bound_defect:.3e}, "
                f"lip {self.lipschitz_defect:.3e} "
                f"({self.n_points} points, {self.n_states} states)")


def _directions(n, dim):
    if dim == 2:
        ang = np.arange(n) * (np.pi / n)
        return np.stack([np.cos(ang), np.sin(ang)], axis=1)
    # golden-spiral points on the half sphere
    idx = np.arange(n) + 0.5
    z = idx / n
    theta = np.pi * (1 + 5 ** 0.5) * idx
    rho = np.sqrt(1 - z ** 2)
    return np.stack([rho * np.cos(theta), rho * np.sin(theta), z], axis=1)


def validate_structure(field, region, n_grid=None, t_values=None, n_dirs=16,
                       rel_tol=1e-12):
    """Sampling check of symmetry, ellipticity, boundedness, t-Lipschitz.

    Defects are reported relative to the declared constants; the check
    passes when every defect is <= rel_tol. Sampling cannot certify the
    constants, it can only refute them, which is what the report records.
    """
    if n_grid is None:
        n_grid = 32 if field.dim == 2 else 10
    if t_values is None:
        t_values = np.arange(-5.0, 5.0 + 0.25, 0.5)
    t_values = np.asarray(t_values, dtype=float)
    pts = region.sample_lattice(n_grid)
    if len(pts) == 0:
        raise PreconditionError("region sampling produced no points")
    dirs = _directions(n_dirs, field.dim)
    c = field.constants

    sym = ell = bnd = lip = 0.0
    prev = None
    prev_t = None
    for t in t_values:
        mats = field.eval(pts, float(t))
        scale = max(np.abs(mats).max(), c.beta)
        sym = max(sym, np.abs(mats - np.transpose(mats, (0, 2, 1))).max() / scale)
        # quadratic forms along each direction
        quad = np.einsum("pij,di,dj->pd", mats, dirs, dirs)
        ell = max(ell, float((c.alpha - quad.min()) / c.alpha))
        norms = np.linalg.norm(np.einsum("pij,dj->pdi", mats, dirs), axis=2)
        bnd = max(bnd, float((norms.max() - c.beta) / c.beta))
        if prev is not None:
            dt = abs(t - prev_t)
            allowed = c.lipschitz_l * dt
            diff = np.abs(mats - prev).max()
            lip = max(lip, (diff - allowed) / max(c.beta, 1.0))
        prev, prev_t = mats, t

    sym = max(sym, 0.0)
    ell = max(ell, 0.0)
    bnd = max(bnd, 0.0)
    lip = max(lip, 0.0)
    ok = max(sym, ell, bnd, lip) <= rel_tol
    return StructureReport(ok, sym, ell, bnd, lip, len(pts), len(t_values))
