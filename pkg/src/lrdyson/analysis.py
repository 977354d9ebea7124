"""Poles and residues of the response functions, absorption spectra, Stone's formula and exports."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import quad_vec

from .dyson import ZERO_TOL, CasidaOperator, chiF_freq, operator_scales
from .response import ResponseContext, chi0_freq, numerical_rank

POLE_HEADER = ("location_re", "location_im", "order", "rank", "residue_norm")


@dataclass(frozen=True)
class Pole:
    location: complex
    order: int
    rank: int
    residue_norm: float
    # singularity away from the real axis (negative Casida eigenvalue)
    off_axis: bool = False
    residue: np.ndarray | None = field(default=None, repr=False, compare=False)


@dataclass(frozen=True)
class PoleTable:
    rows: tuple

    def __len__(self):
        return len(self.rows)

    @property
    def locations(self) -> np.ndarray:
        return np.array([p.location for p in self.rows], dtype=complex)

    def real_axis(self) -> "PoleTable":
        return PoleTable(tuple(p for p in self.rows if not p.off_axis))

    def table(self):
        rows = [(p.location.real, p.location.imag, p.order, p.rank, p.residue_norm) for p in self.rows]
        return POLE_HEADER, rows

    def to_dict(self):
        return {"poles": [
            {"location_re": p.location.real, "location_im": p.location.imag, "order": p.order,
             "rank": p.rank, "residue_norm": p.residue_norm, "off_axis": p.off_axis}
            for p in self.rows
        ]}


def _sorted(rows):
    return PoleTable(tuple(sorted(rows, key=lambda p: (p.location.real, p.location.imag))))


def poles_chi0(ctx: ResponseContext, rank_tol: float = 1e-10) -> PoleTable:
    """Poles of chi_H^ at +-lambda for every bright eigenvalue cluster of H#.

    The residue at +lambda is B P_lambda B*; it is formed from the cached
    cluster products and compared with the projector built from eigenvectors.
    """
    scale = float(np.linalg.norm(ctx.W, 2)) if ctx.W.size else 0.0
    Bm = ctx.B.matrix
    V = ctx.hsharp.eigenvectors
    rows = []
    for k, idx in enumerate(ctx.clusters):
        res = ctx.cluster_products[k]
        rank = numerical_rank(ctx.W[:, idx], scale, rank_tol)
        if rank == 0:
            continue
        proj = V[:, idx] @ V[:, idx].conj().T
        check = Bm @ proj @ Bm.conj().T
        if np.max(np.abs(check - res), initial=0.0) > 1e-10 * max(1.0, scale**2):
            raise ArithmeticError("cluster residue disagrees with B P B*")
        lam = ctx.cluster_energy(k)
        norm = float(np.linalg.norm(res, 2))
        rows.append(Pole(complex(lam), 1, rank, norm, residue=res))
        rows.append(Pole(complex(-lam), 1, rank, norm, residue=-res))
    return _sorted(rows)


def casida_clusters(C: CasidaOperator, cluster_tol: float = 1e-9):
    """Group the eigenvalues of C; returns (mean value, index array) pairs.

    Clusters are formed relative to max|c| so values near zero do not split.
    """
    c = C.eigenvalues
    if not len(c):
        return []
    scale = float(np.max(np.abs(c)))
    groups, start = [], 0
    for k in range(1, len(c) + 1):
        if k == len(c) or c[k] - c[k - 1] > cluster_tol * scale:
            groups.append(np.arange(start, k))
            start = k
    return [(float(np.mean(c[g])), g) for g in groups]


def poles_chiF(ctx: ResponseContext, C: CasidaOperator, rank_tol: float = 1e-10,
               cluster_tol: float = 1e-9, zero_tol: float = ZERO_TOL) -> PoleTable:
    """Poles of chi_F^ from the spectral decomposition of C.

    chi_F^(z) = sum_c 2 R_c / (z^2 - c) with R_c = Y_c Y_c^H.  A positive c
    gives simple poles at +-sqrt(c) with residue +-R_c / sqrt(c); c = 0 gives a
    double pole at the origin with leading coefficient 2 R_c; c < 0 gives the
    off-axis pair +-i sqrt(-c).
    """
    if C.trivial:
        return poles_chi0(ctx, rank_tol)
    Y = C.Y
    scale = float(np.linalg.norm(Y, 2)) if Y.size else 0.0
    # zero is judged against the size of C's building blocks, not its spectrum
    c_scale = operator_scales(ctx, C.coupling_norm)[1] if len(C.eigenvalues) else 0.0
    rows = []
    for c, idx in casida_clusters(C, cluster_tol):
        rank = numerical_rank(Y[:, idx], scale, rank_tol)
        if rank == 0:
            continue
        R = Y[:, idx] @ Y[:, idx].conj().T
        if abs(c) <= zero_tol * c_scale:
            rows.append(Pole(0j, 2, rank, float(np.linalg.norm(2 * R, 2)), residue=2 * R))
            continue
        root = math.sqrt(abs(c))
        norm = float(np.linalg.norm(R, 2)) / root
        if c > 0:
            rows.append(Pole(complex(root), 1, rank, norm, residue=R / root))
            rows.append(Pole(complex(-root), 1, rank, norm, residue=-R / root))
        else:
            rows.append(Pole(complex(0, root), 1, rank, norm, off_axis=True, residue=-1j * R / root))
            rows.append(Pole(complex(0, -root), 1, rank, norm, off_axis=True, residue=1j * R / root))
    return _sorted(rows)


def contour_coefficient(fn, center: complex, radius: float, power: int = 0, nodes: int = 64) -> np.ndarray:
    """(1 / 2 pi i) times the contour integral of (z - center)^power fn(z) over a circle (trapezoid rule).

    power = 0 gives the residue; power = 1 the coefficient of (z - center)^-2.
    """
    theta = 2 * np.pi * np.arange(nodes) / nodes
    acc = 0
    for th in theta:
        dz = radius * np.exp(1j * th)
        acc = acc + fn(center + dz) * dz ** (power + 1)
    return acc / nodes


@dataclass(frozen=True)
class FrequencySeries:
    """Response matrices on supp(rho0) at a list of complex frequencies."""

    points: np.ndarray
    sites: np.ndarray
    values: np.ndarray

    def table(self):
        rows = []
        for z, m in zip(self.points, self.values):
            for a, ra in enumerate(self.sites):
                for b, rb in enumerate(self.sites):
                    rows.append((z.real, z.imag, ra, rb, m[a, b].real, m[a, b].imag))
        return ("z_re", "z_im", "row", "col", "value_re", "value_im"), rows

    def to_dict(self):
        return {"points": self.points, "sites": self.sites, "values": self.values}


@dataclass(frozen=True)
class TimeSeries:
    times: np.ndarray
    sites: np.ndarray
    values: np.ndarray

    def table(self):
        rows = []
        for t, m in zip(self.times, self.values):
            for a, ra in enumerate(self.sites):
                for b, rb in enumerate(self.sites):
                    rows.append((t, ra, rb, m[a, b]))
        return ("t", "row", "col", "value"), rows

    def to_dict(self):
        return {"times": self.times, "sites": self.sites, "values": self.values}


@dataclass(frozen=True)
class PolarizabilitySeries:
    omega: np.ndarray
    eta: float
    # values[w, j, k] = Im <x_j, chi^(omega_w + i eta) x_k>
    values: np.ndarray

    @property
    def dims(self) -> int:
        return self.values.shape[1]

    def trace(self) -> np.ndarray:
        return np.trace(self.values, axis1=1, axis2=2)

    def table(self):
        rows = []
        for w, om in enumerate(self.omega):
            for j in range(self.dims):
                for k in range(self.dims):
                    rows.append((om, j, k, self.values[w, j, k]))
        return ("omega", "j", "k", "value"), rows

    def to_dict(self):
        return {"eta": self.eta, "omega": self.omega, "values": self.values}


def polarizability(ctx: ResponseContext, positions, omega, eta: float, C: CasidaOperator | None = None) -> PolarizabilitySeries:
    """Absorption tensor A_jk(omega) = Im <x_j, chi^(omega + i eta) x_k> with site coordinates as dipoles.

    ``positions`` is the full (M, d) coordinate array; it is restricted to the
    support of the ground-state density.  Without ``C`` the bare response is used.
    """
    if not eta > 0:
        raise ValueError("damping eta must be positive")
    if positions is None:
        raise ValueError("polarizability needs site positions")
    x = np.asarray(positions, dtype=float)[ctx.ground.support]
    wx = ctx.weights[:, None] * x
    omega = np.asarray(omega, dtype=float)
    out = np.empty((len(omega), x.shape[1], x.shape[1]))
    for n, om in enumerate(omega):
        z = complex(om, eta)
        chi = chi0_freq(ctx, z) if C is None else chiF_freq(ctx, C, z)
        out[n] = np.imag(wx.T @ chi @ wx)
    return PolarizabilitySeries(np.array(omega), float(eta), out)


@dataclass(frozen=True)
class Bump:
    """C^2 bump (1 - u^2)^3 with u = (x - center) / width on |u| < 1."""

    center: float
    width: float

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError("bump width must be positive")

    @property
    def support(self):
        return self.center - self.width, self.center + self.width

    def __call__(self, x):
        u = (np.asarray(x, dtype=float) - self.center) / self.width
        return np.where(np.abs(u) < 1, (1 - u * u) ** 3, 0.0)


@dataclass(frozen=True)
class StoneReport:
    etas: np.ndarray
    errors: np.ndarray
    slope: float
    target_norm: float

    @property
    def monotone(self) -> bool:
        order = np.argsort(self.etas)
        return bool(np.all(np.diff(self.errors[order]) > 0))

    def table(self):
        return ("eta", "error"), list(zip(self.etas, self.errors))

    def to_dict(self):
        return {"etas": self.etas, "errors": self.errors, "slope": self.slope, "target_norm": self.target_norm}


def stone_check(eigs, projs, bump: Bump, etas, window=None) -> StoneReport:
    """Compare the smoothed resolvent jump with 2 pi i sum_k f(lambda_k) P_k for each eta.

    The resolvent is R(z) = sum_k P_k / (z - lambda_k); the integral runs over
    the bump support, which must lie inside ``window`` when one is given.
    """
    eigs = np.asarray(eigs, dtype=float)
    projs = np.asarray(projs)
    lo, hi = bump.support
    if window is not None and (lo < window[0] or hi > window[1]):
        raise ValueError("bump support extends past the integration window")
    target = 2j * np.pi * np.einsum("k,kab->ab", bump(eigs), projs)
    inside = sorted(float(l) for l in eigs if lo < l < hi)
    errors = []
    for eta in etas:
        if not eta > 0:
            raise ValueError("eta must be positive")

        def integrand(mu, eta=eta):
            jump = 2j * eta / ((mu - eigs) ** 2 + eta**2)
            return bump(mu) * np.einsum("k,kab->ab", jump, projs)

        val, _ = quad_vec(integrand, lo, hi, points=inside or None, epsabs=1e-13, epsrel=1e-11, limit=4000)
        errors.append(float(np.linalg.norm(val - target)))
    etas = np.asarray(etas, dtype=float)
    errors = np.asarray(errors)
    slope = float(np.polyfit(np.log(etas), np.log(errors), 1)[0]) if np.all(errors > 0) and len(etas) > 1 else float("nan")
    return StoneReport(etas, errors, slope, float(np.linalg.norm(target)))


def sigma1_table(report):
    header = ("energy", "multiplicity", "response_rank", "bright")
    return header, [(c.energy, c.multiplicity, c.response_rank, c.bright) for c in report.clusters]


def _jsonable(obj):
    if hasattr(obj, "to_dict"):
        return _jsonable(obj.to_dict())
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: _jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)
                if f.repr}
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": _jsonable(float(obj.real)), "im": _jsonable(float(obj.imag))}
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if obj is None or isinstance(obj, str):
        return obj
    raise TypeError(f"cannot export object of type {type(obj).__name__}")


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (complex, np.complexfloating)):
        raise TypeError("split complex values into real and imaginary columns")
    return str(v)


def render(obj, fmt: str) -> str:
    """Serialize a result: JSON with sorted keys, or CSV from the object's ``table()``."""
    if fmt == "json":
        return json.dumps(_jsonable(obj), sort_keys=True, indent=1, allow_nan=False) + "\n"
    if fmt == "csv":
        header, rows = obj.table() if hasattr(obj, "table") else obj
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])
        return buf.getvalue()
    raise ValueError(f"unknown export format {fmt!r}")


def export_results(obj, fmt: str, path) -> Path:
    path = Path(path)
    path.write_text(render(obj, fmt), encoding="utf-8")
    return path
