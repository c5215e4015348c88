"""Flux-qubit circuit model and schedule translation.

Two capacitively-shunted flux qubits, each reduced to its single phase
mode, couple inductively through a tunable element modeled as an
effective mutual-inductance curve M_eff(fc).  Per qubit, in the harmonic
basis of the (EC, EL) mode,

    H = sqrt(8 EC EL) (a^dag a + 1/2)
        + 2 EJ |cos(pi fx)| cos(phi_hat - 2 pi fz)

with the z-loop flux fz measured from the half-flux-quantum degeneracy
point, so fz = 0 is the symmetric double well (the barrier term carries
a + sign there; shifting fz by half a flux quantum recovers the raw-loop
convention).  The persistent-current operator is

    I_p = 2 EJ |cos(pi fx)| sin(phi_hat - 2 pi fz)

in GHz units, and the coupling term is M_eff(fc) * I_p1 (x) I_p2 with
M_eff in 1/GHz.

Ising coefficients are extracted with an exact (non-perturbative)
Schrieffer-Wolff reduction onto the lowest four two-qubit levels,
anchored to products of single-qubit computational states at the same
fluxes; `invert_schedule` solves the map backwards for flux-bias
schedules realizing a target Ising schedule.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from fluxgate.spin_model import SpinParams
from fluxgate.gate import GateWaveform, waveform_eval

#: coupler control at which M_eff vanishes
COUPLER_OFF = 0.25

FX_WINDOW = (0.5, 1.0)
FZ_WINDOW = (-0.05, 0.05)
FC_WINDOW = (0.0, 0.5)


class TruncationError(RuntimeError):
    """Oscillator-basis truncation is not converged."""


class SwValidityError(RuntimeError):
    """Lowest-4 manifold not separated well enough from level 5."""


class AnchoringError(RuntimeError):
    """Product anchor states nearly orthogonal to the exact manifold."""


class InversionError(RuntimeError):
    """Schedule inversion failed at one sample."""

    def __init__(self, sample_index, message, residual=None):
        self.sample_index = sample_index
        self.residual = residual
        super().__init__(f"sample {sample_index}: {message}")


@dataclass(frozen=True)
class CircuitParams:
    """Circuit energies (GHz), coupling scale (1/GHz), basis truncation.

    Defaults were validated against the dense eigensolve oracle: deep
    flux-qubit regime with a plasma gap large enough for the low-energy
    reduction to hold across the translated gate schedules.
    """

    ec1: float = 3.0
    el1: float = 100.0
    ej1: float = 400.0
    ec2: float = 3.0
    el2: float = 100.0
    ej2: float = 400.0
    m_scale: float = 2.0e-5
    n_levels: int = 64

    def __post_init__(self):
        for name in ("ec1", "el1", "ej1", "ec2", "el2", "ej2"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        if self.n_levels < 15:
            raise ValueError("n_levels must be >= 15")

    def qubit(self, i: int):
        """(EC, EL, EJ) of qubit i in {1, 2}."""
        if i == 1:
            return self.ec1, self.el1, self.ej1
        if i == 2:
            return self.ec2, self.el2, self.ej2
        raise ValueError(f"qubit index must be 1 or 2, got {i}")

    def m_eff(self, fc: float) -> float:
        """Effective mutual inductance (1/GHz); zero at COUPLER_OFF."""
        return self.m_scale * np.cos(2.0 * np.pi * fc)


@dataclass(frozen=True)
class FluxPoint:
    """The five flux controls, in units of the flux quantum.

    fz is measured from the half-flux degeneracy point of each z loop.
    """

    fx1: float
    fx2: float
    fz1: float
    fz2: float
    fc: float

    def __post_init__(self):
        for name, window in (("fx1", FX_WINDOW), ("fx2", FX_WINDOW),
                             ("fz1", FZ_WINDOW), ("fz2", FZ_WINDOW),
                             ("fc", FC_WINDOW)):
            v = getattr(self, name)
            if not window[0] - 1e-12 <= v <= window[1] + 1e-12:
                raise ValueError(
                    f"{name} = {v} outside principal window {window}")


@dataclass(frozen=True)
class IsingPoint:
    """Extracted (or target) Ising coefficients, GHz; `residual` is the
    norm of all non-Ising Pauli terms of the reduced Hamiltonian."""

    hx1: float
    hx2: float
    hz1: float
    hz2: float
    jzz: float
    residual: float = 0.0

    def as_array(self):
        return np.array([self.hx1, self.hx2, self.hz1, self.hz2, self.jzz])


@lru_cache(maxsize=64)
def _mode_operators(ec: float, el: float, n: int):
    """(cos phi, sin phi) in the n-level harmonic basis of (ec, el)."""
    phi_zpf = (2.0 * ec / el) ** 0.25
    off = phi_zpf * np.sqrt(np.arange(1, n))
    phi = np.diag(off, 1) + np.diag(off, -1)
    w, v = np.linalg.eigh(phi)
    cos_phi = (v * np.cos(w)) @ v.T
    sin_phi = (v * np.sin(w)) @ v.T
    return cos_phi, sin_phi


def _single_qubit_matrices(ec, el, ej, fx, fz, n):
    """(H, I_p) for one qubit at the given fluxes, n levels."""
    cos_phi, sin_phi = _mode_operators(ec, el, n)
    omega = np.sqrt(8.0 * ec * el)
    barrier = 2.0 * ej * abs(np.cos(np.pi * fx))
    cz, sz = np.cos(2.0 * np.pi * fz), np.sin(2.0 * np.pi * fz)
    h = np.diag(omega * (np.arange(n) + 0.5))
    h = h + barrier * (cz * cos_phi + sz * sin_phi)
    ip = barrier * (cz * sin_phi - sz * cos_phi)
    return h, ip


def qubit_hamiltonian(cp: CircuitParams, i: int, fx: float, fz: float,
                      n: int | None = None) -> np.ndarray:
    """Truncated single-qubit Hamiltonian (GHz) at flux bias (fx, fz)."""
    _check_flux_window(fx, fz)
    ec, el, ej = cp.qubit(i)
    return _single_qubit_matrices(ec, el, ej, fx, fz, n or cp.n_levels)[0]


def persistent_current_operator(cp: CircuitParams, i: int, fx: float,
                                fz: float,
                                n: int | None = None) -> np.ndarray:
    """Persistent-current operator (GHz units) at flux bias (fx, fz)."""
    _check_flux_window(fx, fz)
    ec, el, ej = cp.qubit(i)
    return _single_qubit_matrices(ec, el, ej, fx, fz, n or cp.n_levels)[1]


def _check_flux_window(fx, fz):
    if not FX_WINDOW[0] - 1e-12 <= fx <= FX_WINDOW[1] + 1e-12:
        raise ValueError(f"fx = {fx} outside window {FX_WINDOW}")
    if not FZ_WINDOW[0] - 1e-12 <= fz <= FZ_WINDOW[1] + 1e-12:
        raise ValueError(f"fz = {fz} outside window {FZ_WINDOW}")


@lru_cache(maxsize=100000)
def _qubit_solution(ec, el, ej, fx, fz, n, n_keep):
    """Low-energy single-qubit data at one flux point.

    Returns (levels, ip_kept, comp): the lowest `n_keep` eigenvalues, the
    persistent-current operator in that eigenbasis, and the two
    computational (persistent-current) basis states as columns in the
    kept eigenbasis.  The truncation is checked by doubling n; the lowest
    two eigenvalues must move by less than 1e-8 GHz.
    """
    h, ip = _single_qubit_matrices(ec, el, ej, fx, fz, n)
    levels, vecs = np.linalg.eigh(h)
    check = np.linalg.eigvalsh(
        _single_qubit_matrices(ec, el, ej, fx, fz, 2 * n)[0])
    shift = np.abs(check[:2] - levels[:2]).max()
    if shift >= 1e-8:
        raise TruncationError(
            f"lowest levels move by {shift:.2e} GHz when doubling n={n}")

    kept = vecs[:, :n_keep]
    ip_kept = kept.T @ ip @ kept
    ip_kept = 0.5 * (ip_kept + ip_kept.T)

    # computational basis: diagonalize I_p in the qubit doublet, order by
    # current (|0> = positive), remove the sigma_y part, make sigma_x >= 0
    ip2 = ip_kept[:2, :2]
    cur, u = np.linalg.eigh(ip2)
    u = u[:, ::-1]
    for k in range(2):
        a = int(np.argmax(np.abs(u[:, k])))
        u[:, k] = u[:, k] * np.sign(u[a, k])
    h2 = u.T @ np.diag(levels[:2]) @ u
    if (h2[0, 1] + h2[1, 0]) < 0.0:
        u[:, 1] = -u[:, 1]
    comp = np.zeros((n_keep, 2))
    comp[:2, :] = u
    return levels[:n_keep].copy(), ip_kept, comp


def _two_qubit_system(cp, flux, n_keep):
    """H_2q in the truncated product eigenbasis plus anchor columns."""
    l1, ip1, c1 = _qubit_solution(*cp.qubit(1), flux.fx1, flux.fz1,
                                  cp.n_levels, n_keep)
    l2, ip2, c2 = _qubit_solution(*cp.qubit(2), flux.fx2, flux.fz2,
                                  cp.n_levels, n_keep)
    eye = np.eye(n_keep)
    h2q = (np.kron(np.diag(l1), eye) + np.kron(eye, np.diag(l2))
           + cp.m_eff(flux.fc) * np.kron(ip1, ip2))
    anchors = np.kron(c1, c2)
    return h2q, anchors


_PAULI_1Q = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


def _pauli_coeff_matrix(h_eff):
    """coeff[a, b] of sigma_a (x) sigma_b for a Hermitian 4x4."""
    coeff = np.empty((4, 4))
    for a in range(4):
        for b in range(4):
            coeff[a, b] = np.real(
                np.trace(np.kron(_PAULI_1Q[a], _PAULI_1Q[b]) @ h_eff)) / 4.0
    return coeff


def pauli_coefficients(cp: CircuitParams, flux: FluxPoint,
                       n_keep: int = 16,
                       validity_factor: float = 10.0) -> IsingPoint:
    """Ising coefficients of the circuit at one flux point.

    Builds the coupled two-qubit Hamiltonian, takes its exact lowest-4
    eigenpairs, and block-diagonalizes onto the product-state anchor
    frame with the direct-rotation (des Cloizeaux) Schrieffer-Wolff
    construction: H_eff = (O O^dag)^(-1/2) O D O^dag (O O^dag)^(-1/2)
    with O the anchor/eigenvector overlap.  The result is decomposed in
    the two-qubit Pauli basis; the five Ising coefficients are returned
    with the norm of everything else as `residual`.

    Raises SwValidityError when the gap from level 4 to level 5 is not
    at least `validity_factor` times the lowest-4 spread, and
    AnchoringError when the anchor overlap is nearly singular.
    """
    h2q, anchors = _two_qubit_system(cp, flux, n_keep)
    levels, vecs = np.linalg.eigh(h2q)
    spread = levels[3] - levels[0]
    gap5 = levels[4] - levels[3]
    if gap5 <= validity_factor * spread:
        raise SwValidityError(
            f"level-5 separation {gap5:.3f} GHz <= {validity_factor} x "
            f"manifold spread {spread:.3f} GHz")
    overlap = anchors.T @ vecs[:, :4]
    ow, ov = np.linalg.eigh(overlap @ overlap.T)
    if ow[0] < 0.25:
        raise AnchoringError(
            f"anchor overlap nearly singular (min eigenvalue {ow[0]:.3e})")
    inv_sqrt = (ov / np.sqrt(ow)) @ ov.T
    core = overlap @ np.diag(levels[:4]) @ overlap.T
    h_eff = inv_sqrt @ core @ inv_sqrt
    h_eff = 0.5 * (h_eff + h_eff.T)
    coeff = _pauli_coeff_matrix(h_eff)
    rest = coeff.copy()
    for a, b in ((0, 0), (1, 0), (0, 1), (3, 0), (0, 3), (3, 3)):
        rest[a, b] = 0.0
    return IsingPoint(
        hx1=coeff[1, 0], hx2=coeff[0, 1],
        hz1=coeff[3, 0], hz2=coeff[0, 3],
        jzz=coeff[3, 3],
        residual=float(np.linalg.norm(rest)),
    )


def ising_targets(params: SpinParams, waveform: GateWaveform,
                  times) -> list:
    """Spin-model Ising coefficients along a gate waveform."""
    from fluxgate.spin_model import schedule_eval
    out = []
    for t in np.asarray(times, dtype=float):
        g = schedule_eval(params, float(waveform_eval(waveform, t)))
        out.append(IsingPoint(
            hx1=g.gd1 * params.h1x, hx2=g.gd2 * params.h2x,
            hz1=g.gp * params.h1z, hz2=g.gp * params.h2z,
            jzz=g.gp * params.J))
    return out


@lru_cache(maxsize=16)
def _reach_tables(cp: CircuitParams, n_keep: int):
    """Per-qubit hx(fx) and current scale Ip0(fx) at fz = 0, on a grid."""
    fx_grid = np.linspace(FX_WINDOW[0] + 0.02, FX_WINDOW[1], 81)
    tables = {}
    for i in (1, 2):
        hx = np.empty_like(fx_grid)
        ip0 = np.empty_like(fx_grid)
        for k, fx in enumerate(fx_grid):
            levels, ip_kept, comp = _qubit_solution(
                *cp.qubit(i), float(fx), 0.0, cp.n_levels, n_keep)
            hx[k] = 0.5 * (levels[1] - levels[0])
            ip0[k] = abs(comp[:, 0] @ ip_kept @ comp[:, 0])
        tables[i] = (fx_grid, hx, ip0)
    return tables


def _seed_tail(cp, target, coords, y1, y2, n_keep):
    """Algebraic guess for (fz1, fz2, fc) given the x-coordinates."""
    tables = _reach_tables(cp, n_keep)
    ip0 = {}
    for i, y in ((1, y1), (2, y2)):
        grid, _, ip = tables[i]
        ip0[i] = float(np.interp(coords[i].to_fx(y), grid, ip))
    fz = {}
    for i, hz_t in ((1, target.hz1), (2, target.hz2)):
        slope = 2.0 * np.pi * ip0[i]
        fz[i] = hz_t / slope if slope > 0 else 0.0
    denom = cp.m_scale * ip0[1] * ip0[2]
    if denom <= 0.0:
        fc = COUPLER_OFF
    else:
        arg = min(max(target.jzz / denom, -1.0), 1.0)
        fc = float(np.arccos(arg) / (2.0 * np.pi))
    return fz[1], fz[2], fc


_FD_STEPS = np.array([1e-3, 1e-3, 2e-6, 2e-6, 2e-5])
_TRUST = np.array([1.0, 1.0, 2e-4, 2e-4, 0.02])


class _XCoord:
    """Monotone map between fx and y = log(half-splitting at fz = 0).

    hx depends exponentially on fx, so the quasi-Newton solve runs in y,
    where steps are relative changes of the splitting and stay
    well-conditioned across the whole window.
    """

    def __init__(self, fx_grid, hx_grid):
        # hx decreases with fx; store increasing-y tables (floor protects
        # against a splitting that underflows to zero at fx = 1)
        self.y = np.log(np.maximum(hx_grid[::-1], 1e-30))
        self.fx = fx_grid[::-1]
        self.y_min = float(self.y[0])
        self.y_max = float(self.y[-1])

    def to_fx(self, y):
        return float(np.interp(np.clip(y, self.y_min, self.y_max),
                               self.y, self.fx))

    def from_target(self, hx_target):
        if hx_target <= 0.0:
            return self.y_min
        return float(np.clip(np.log(hx_target), self.y_min, self.y_max))


def _check_reachable(cp, targets, n_keep, tol):
    tables = _reach_tables(cp, n_keep)
    for k, t in enumerate(targets):
        for i, hx_t in ((1, t.hx1), (2, t.hx2)):
            grid, hx, _ = tables[i]
            if not hx[-1] - tol <= hx_t <= hx[0] + tol:
                raise InversionError(
                    k, f"hx{i} target {hx_t:.4f} GHz outside reachable "
                       f"range [{hx[-1]:.2e}, {hx[0]:.3f}]")
        jmax = cp.m_scale * tables[1][2].max() * tables[2][2].max()
        if abs(t.jzz) > jmax + tol:
            raise InversionError(
                k, f"jzz target {t.jzz:.4f} GHz outside reachable range "
                   f"+-{jmax:.4f}")


def invert_schedule(cp: CircuitParams, targets,
                    n_keep: int = 16,
                    validity_factor: float = 10.0,
                    tol: float = 1e-3,
                    max_iter: int = 40) -> list:
    """Flux schedules realizing a target Ising schedule.

    Solves pauli_coefficients(flux) = target per sample with a damped
    Broyden quasi-Newton iteration; each sample is seeded by the previous
    solution (continuation), the first by an algebraic seed from
    single-qubit tables.  Convergence demands every coefficient residual
    below `tol` (iterating further, to tol/4, when possible).  Raises
    InversionError with the failing sample index otherwise.
    """
    targets = list(targets)
    if not targets:
        return []
    _check_reachable(cp, targets, n_keep, tol)
    tables = _reach_tables(cp, n_keep)
    coords = {i: _XCoord(tables[i][0], tables[i][1]) for i in (1, 2)}
    lo = np.array([coords[1].y_min, coords[2].y_min,
                   FZ_WINDOW[0], FZ_WINDOW[0], FC_WINDOW[0]])
    hi = np.array([coords[1].y_max, coords[2].y_max,
                   FZ_WINDOW[1], FZ_WINDOW[1], FC_WINDOW[1]])

    def flux_of(x):
        return FluxPoint(fx1=coords[1].to_fx(x[0]),
                         fx2=coords[2].to_fx(x[1]),
                         fz1=float(x[2]), fz2=float(x[3]), fc=float(x[4]))

    def residual(x):
        pt = pauli_coefficients(cp, flux_of(x), n_keep=n_keep,
                                validity_factor=validity_factor)
        return pt.as_array()

    def try_residual(x):
        try:
            return residual(x)
        except (SwValidityError, AnchoringError):
            return None

    def fd_jacobian(x, r0):
        jac = np.empty((5, 5))
        for j in range(5):
            step = _FD_STEPS[j]
            xp = x.copy()
            xp[j] = min(xp[j] + step, hi[j])
            if xp[j] == x[j]:
                xp[j] = x[j] - step
            jac[:, j] = (residual(xp) - r0) / (xp[j] - x[j])
        return jac

    out = []
    tail = None
    jac = None
    for k, tgt in enumerate(targets):
        goal = tgt.as_array()
        y1 = coords[1].from_target(tgt.hx1)
        y2 = coords[2].from_target(tgt.hx2)
        if tail is None:
            tail = _seed_tail(cp, tgt, coords, y1, y2, n_keep)
        x = np.clip(np.array([y1, y2, *tail]), lo, hi)
        r = residual(x) - goal
        if jac is None or np.abs(r).max() > 0.2:
            jac = fd_jacobian(x, r + goal)
        best = (np.abs(r).max(), x.copy(), r.copy())
        fresh_jacobian = False
        for _ in range(max_iter):
            if np.abs(r).max() < tol / 4.0:
                break
            try:
                dx = np.linalg.solve(jac, -r)
            except np.linalg.LinAlgError:
                dx = np.linalg.lstsq(jac, -r, rcond=1e-10)[0]
            # trust region: hx targets of zero pin y at its boundary with
            # a vanishing gradient; clamp the step to stay in range
            scale = min(1.0, float(np.min(_TRUST / np.maximum(
                np.abs(dx), 1e-300))))
            dx = dx * scale
            improved = False
            for lam in (1.0, 0.5, 0.25, 0.1):
                x_new = np.clip(x + lam * dx, lo, hi)
                if np.allclose(x_new, x):
                    continue
                r_try = try_residual(x_new)
                if r_try is None:
                    continue
                r_new = r_try - goal
                if np.abs(r_new).max() < np.abs(r).max():
                    dxa = x_new - x
                    dr = r_new - r
                    jac = jac + np.outer(dr - jac @ dxa, dxa) / (dxa @ dxa)
                    x, r = x_new, r_new
                    improved = True
                    fresh_jacobian = False
                    break
            if improved:
                if np.abs(r).max() < best[0]:
                    best = (np.abs(r).max(), x.copy(), r.copy())
            else:
                if fresh_jacobian:
                    break
                jac = fd_jacobian(x, r + goal)
                fresh_jacobian = True
        if np.abs(r).max() > best[0]:
            x, r = best[1].copy(), best[2].copy()
        if np.abs(r).max() >= tol:
            raise InversionError(k, "no convergence, best residual "
                                 f"{np.abs(r).max():.3e} GHz",
                                 residual=float(np.abs(r).max()))
        tail = (float(x[2]), float(x[3]), float(x[4]))
        out.append(flux_of(x))
    return out


def roundtrip_check(cp: CircuitParams, fluxes, targets,
                    n_keep: int = 16) -> float:
    """Max per-coefficient error of re-extracted vs target coefficients."""
    fluxes = list(fluxes)
    targets = list(targets)
    if len(fluxes) != len(targets):
        raise ValueError("flux and target schedules differ in length")
    worst = 0.0
    for flux, tgt in zip(fluxes, targets):
        got = pauli_coefficients(cp, flux, n_keep=n_keep)
        worst = max(worst, float(np.abs(got.as_array()
                                        - tgt.as_array()).max()))
    return worst


def circuit_levels(cp: CircuitParams, fluxes, n_keep: int = 24) -> np.ndarray:
    """Lowest-4 two-qubit circuit levels per flux sample, (n, 4) GHz."""
    out = np.empty((len(list(fluxes)), 4))
    for k, flux in enumerate(fluxes):
        h2q, _ = _two_qubit_system(cp, flux, n_keep)
        out[k] = np.linalg.eigvalsh(h2q)[:4]
    return out
