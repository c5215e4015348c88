"""Anticrossing-excursion two-qubit gate.

A flattop-cosine excursion in reduced time from s = 1 down to s_min and
back sweeps the gadget past its second anticrossing, swapping the two
lowest computational states when the control spin sits in its ground
orientation.  This module extracts the gate unitary in a rotating
computational frame, fits the block canonical form, optimizes the
waveform against the conditional-iX target, dresses the result into a
CNOT, and computes its process matrix.

Basis convention: the propagator is computed in the physical product
basis (spin 1 first, |0> the sigma_z = +1 state), then permuted to the
gate basis ordered (|01>, |11>, |00>, |10>).  In that order the first
logical qubit is the control (spin 2, with its energetically preferred
label 1 mapped to logical 0) and the second is the target (spin 1,
labels unchanged); the gate's mixing block spans the first two entries,
which are the two lowest levels of H(1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from fluxgate.spin_model import SpinParams, hamiltonian, schedule_eval
from fluxgate.dynamics import TimePath, propagate_unitary, instantaneous_basis

TWO_PI = 2.0 * np.pi

#: gate-basis index -> physical-basis index
GATE_ORDER = (1, 3, 0, 2)

#: target unitary: i*X on the target qubit when the control qubit is in
#: its ground state, a -1 phase otherwise; locally equivalent to CNOT
GATE_TARGET = np.array([
    [0, 1j, 0, 0],
    [1j, 0, 0, 0],
    [0, 0, -1, 0],
    [0, 0, 0, -1],
], dtype=complex)

CNOT = np.array([
    [1, 0, 0, 0],
    [0, 1, 0, 0],
    [0, 0, 0, 1],
    [0, 0, 1, 0],
], dtype=complex)

_I2 = np.eye(2, dtype=complex)
_SX = np.array([[0, 1], [1, 0]], dtype=complex)
_SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
_SZ = np.array([[1, 0], [0, -1]], dtype=complex)

#: two-qubit Pauli operators and labels, first letter = first tensor factor
PAULI_LABELS = tuple(a + b for a in "IXYZ" for b in "IXYZ")
_PAULI_1Q = (_I2, _SX, _SY, _SZ)
PAULI_2Q = tuple(np.kron(a, b) for a in _PAULI_1Q for b in _PAULI_1Q)

_MAGIC = np.array([
    [1, 0, 0, 1j],
    [0, 1j, 1, 0],
    [0, 1j, -1, 0],
    [1, 0, 0, -1j],
], dtype=complex) / np.sqrt(2.0)

# positions outside the canonical sparsity pattern (the two off-diagonal
# 2x2 blocks); their Frobenius norm is the reported leakage
_LEAK_IDX = ([0, 0, 1, 1, 2, 2, 3, 3], [2, 3, 2, 3, 0, 1, 0, 1])


@dataclass(frozen=True)
class GateWaveform:
    """Flattop-cosine excursion: cosine ramp 1 -> s_min over t_ramp ns,
    hold for t_hold ns, mirrored ramp back to 1."""

    s_min: float
    t_ramp: float
    t_hold: float

    def __post_init__(self):
        if not 0.0 < self.s_min < 1.0:
            raise ValueError(f"s_min must lie in (0, 1), got {self.s_min}")
        if self.t_ramp < 0.0 or self.t_hold < 0.0:
            raise ValueError("ramp and hold durations must be >= 0")
        if self.t_f <= 0.0:
            raise ValueError("waveform has zero duration")

    @property
    def t_f(self) -> float:
        return 2.0 * self.t_ramp + self.t_hold


def waveform_eval(w: GateWaveform, t):
    """s(t) of the flattop-cosine excursion; t in [0, t_f] (ns)."""
    t = np.asarray(t, dtype=float)
    if np.any((t < 0.0) | (t > w.t_f)):
        raise ValueError("t outside [0, t_f]")
    depth = 1.0 - w.s_min
    if w.t_ramp == 0.0:
        s = np.where((t > 0.0) & (t < w.t_f), w.s_min, 1.0)
    else:
        down = 1.0 - depth * (1.0 - np.cos(np.pi * t / w.t_ramp)) / 2.0
        up = 1.0 - depth * (
            1.0 - np.cos(np.pi * (w.t_f - t) / w.t_ramp)) / 2.0
        s = np.select(
            [t <= w.t_ramp, t < w.t_ramp + w.t_hold],
            [down, w.s_min],
            default=up,
        )
    return s if s.ndim else float(s)


def waveform_path(w: GateWaveform) -> TimePath:
    return TimePath(t_f=w.t_f, fn=lambda t: waveform_eval(w, np.clip(t, 0.0, w.t_f)),
                    label="flattop-cosine")


@dataclass(frozen=True)
class CanonicalGateForm:
    """Parameters of the block form
    [[cos(eta) e^{i nu1}, sin(eta) e^{i theta}, 0, 0],
     [sin(eta) e^{i theta}, cos(eta) e^{i nu2}, 0, 0],
     [0, 0, e^{i phi1}, 0],
     [0, 0, 0, e^{i phi2}]]
    plus the Frobenius norm of the eight off-block elements."""

    eta: float
    theta: float
    nu1: float
    nu2: float
    phi1: float
    phi2: float
    leakage: float


@dataclass(frozen=True)
class GateReport:
    """Gate extraction result, all matrices in the gate basis."""

    raw: np.ndarray
    framed: np.ndarray
    canonical: CanonicalGateForm
    fidelity: float
    waveform: GateWaveform
    virtual_z: tuple
    global_phase: float


def canonical_fit(U) -> CanonicalGateForm:
    """Read the canonical-form parameters off a (near-)block unitary.

    Angles are reported in (-pi, pi]; the fit does not error on block
    structure violations, it quantifies them through the leakage norm.
    """
    U = np.asarray(U, dtype=complex)
    leak = float(np.linalg.norm(U[_LEAK_IDX]))
    off = 0.5 * (abs(U[0, 1]) + abs(U[1, 0]))
    diag = 0.5 * (abs(U[0, 0]) + abs(U[1, 1]))
    return CanonicalGateForm(
        eta=float(np.arctan2(off, diag)),
        theta=float(np.angle(0.5 * (U[0, 1] + U[1, 0]))),
        nu1=float(np.angle(U[0, 0])),
        nu2=float(np.angle(U[1, 1])),
        phi1=float(np.angle(U[2, 2])),
        phi2=float(np.angle(U[3, 3])),
        leakage=leak,
    )


def canonical_matrix(form: CanonicalGateForm) -> np.ndarray:
    """Exact matrix of the canonical form (zero leakage)."""
    c, s = np.cos(form.eta), np.sin(form.eta)
    return np.array([
        [c * np.exp(1j * form.nu1), s * np.exp(1j * form.theta), 0, 0],
        [s * np.exp(1j * form.theta), c * np.exp(1j * form.nu2), 0, 0],
        [0, 0, np.exp(1j * form.phi1), 0],
        [0, 0, 0, np.exp(1j * form.phi2)],
    ], dtype=complex)


def _check_unitary(U, name="matrix"):
    dev = np.abs(U.conj().T @ U - np.eye(len(U))).max()
    if dev >= 1e-6:
        raise ValueError(f"{name} is not unitary (deviation {dev:.2e})")


def fidelity(U, V) -> float:
    """Average gate fidelity (|Tr(U^dag V)|^2 + 4) / 20 for 4x4 unitaries."""
    U = np.asarray(U, dtype=complex)
    V = np.asarray(V, dtype=complex)
    _check_unitary(U, "U")
    _check_unitary(V, "V")
    tr = np.trace(U.conj().T @ V)
    return float((abs(tr) ** 2 + 4.0) / 20.0)


def _align_two_phases(V, target):
    """Maximize |Tr(target^dag Z V)| over per-qubit left phase factors.

    Z = diag(1, e^{i b}, e^{i a}, e^{i(a+b)}) puts angle a on the control
    and b on the target qubit.  A dense scan over b with the exact
    optimum over a, followed by exact coordinate ascent, finds the global
    maximum deterministically.  Returns (a, b, trace_at_optimum).
    """
    w = np.diag(V @ target.conj().T)
    beta_grid = np.linspace(-np.pi, np.pi, 1025)[:-1]
    eb = np.exp(1j * beta_grid)
    score = abs(w[0] + eb * w[1]) + abs(w[2] + eb * w[3])
    b = float(beta_grid[int(np.argmax(score))])
    a = 0.0
    for _ in range(100):
        head = w[0] + np.exp(1j * b) * w[1]
        tail = w[2] + np.exp(1j * b) * w[3]
        a = float(np.angle(head) - np.angle(tail)) if abs(tail) > 0 else a
        head = w[0] + np.exp(1j * a) * w[2]
        tail = w[1] + np.exp(1j * a) * w[3]
        b_new = float(np.angle(head) - np.angle(tail)) if abs(tail) > 0 else b
        if abs(np.exp(1j * b_new) - np.exp(1j * b)) < 1e-15:
            b = b_new
            break
        b = b_new
    tr = (w[0] + np.exp(1j * b) * w[1]
          + np.exp(1j * a) * (w[2] + np.exp(1j * b) * w[3]))
    return a, b, tr


def gate_unitary(params: SpinParams, w: GateWaveform,
                 tol: float = 1e-8,
                 target: np.ndarray = GATE_TARGET) -> GateReport:
    """Propagate the excursion and extract the framed gate unitary.

    The four computational columns are propagated at once; the raw
    unitary is reordered to the gate basis.  Framing removes the idle
    dynamical phases of H(1) via F = diag(exp(+i 2 pi E_k t_f)), then two
    virtual-Z angles and a global phase are chosen to maximize the
    average gate fidelity against `target` (the global phase makes the
    alignment trace real positive, which fixes the reported angles).
    """
    if not params.s1 < w.s_min < 1.0:
        raise ValueError(
            f"s_min must lie in (s1, 1) = ({params.s1}, 1), got {w.s_min}")
    res = propagate_unitary(params, waveform_path(w), tol=tol)
    perm = np.asarray(GATE_ORDER)
    raw = res.unitary[np.ix_(perm, perm)]
    energies = np.real(np.diag(hamiltonian(params, 1.0)))[perm]
    frame = np.exp(+1j * TWO_PI * energies * w.t_f)
    framed0 = frame[:, None] * raw
    a, b, tr = _align_two_phases(framed0, target)
    z = np.exp(1j * np.array([0.0, b, a, a + b]))
    phase = np.exp(-1j * np.angle(tr)) if abs(tr) > 0 else 1.0
    framed = phase * z[:, None] * framed0
    fid = float((abs(tr) ** 2 + 4.0) / 20.0)
    return GateReport(
        raw=raw,
        framed=framed,
        canonical=canonical_fit(framed),
        fidelity=fid,
        waveform=w,
        virtual_z=(a, b),
        global_phase=float(np.angle(phase)),
    )


def _waveform_from_box(params, t_f, u0, u1):
    s_lo = params.s1 + 0.01
    s_hi = 0.995
    s_min = s_lo + u0 * (s_hi - s_lo)
    t_ramp = (0.02 + 0.98 * u1) * (t_f / 2.0)
    return GateWaveform(s_min=s_min, t_ramp=t_ramp,
                        t_hold=max(t_f - 2.0 * t_ramp, 0.0))


def optimize_waveform(params: SpinParams, t_f: float, seed: int = 0,
                      restarts: int = 8,
                      target: np.ndarray = GATE_TARGET,
                      search_tol: float = 1e-6,
                      final_tol: float = 1e-8):
    """Maximize gate fidelity over (s_min, t_ramp) at fixed total time.

    Derivative-free simplex search with `restarts` deterministic seeded
    starts; the hold time is t_f - 2 t_ramp.  The search phase propagates
    at `search_tol`; every restart winner is re-scored at `final_tol` and
    the best (ties by restart index) is returned as
    (GateWaveform, GateReport).
    """
    if t_f <= 0.0:
        raise ValueError("time budget must be positive")
    rng = np.random.default_rng(seed)
    s_lo = params.s1 + 0.01
    s_hi = 0.995

    def to_u(s_min, t_ramp):
        u0 = (s_min - s_lo) / (s_hi - s_lo)
        u1 = (t_ramp / (t_f / 2.0) - 0.02) / 0.98
        return np.clip(np.array([u0, u1]), 0.0, 1.0)

    def score(rep):
        # fidelity, discounted when the off-block leakage exceeds the
        # canonical-form budget; keeps the search inside gates that are
        # actually of the two-level block form
        pen = 50.0 * max(0.0, rep.canonical.leakage - 8e-4)
        return rep.fidelity - min(pen, 0.2)

    def objective(u):
        u0, u1 = u
        pen = 0.0
        if not 0.0 <= u0 <= 1.0:
            pen += (min(abs(u0), abs(u0 - 1.0))) ** 2 * 100.0
            u0 = min(max(u0, 0.0), 1.0)
        if not 0.0 <= u1 <= 1.0:
            pen += (min(abs(u1), abs(u1 - 1.0))) ** 2 * 100.0
            u1 = min(max(u1, 0.0), 1.0)
        wf = _waveform_from_box(params, t_f, u0, u1)
        rep = gate_unitary(params, wf, tol=search_tol, target=target)
        return -score(rep) + pen

    # Deterministic coarse scan of the anticrossing-excursion region:
    # s_min a small detuning below (or slightly above) s*, ramps a
    # fraction of the half swap period.  The fidelity landscape carries
    # fine interference fringes, so the simplex restarts start from the
    # best scan points with a fringe-sized initial simplex.
    from fluxgate.spin_model import find_s_star, gap_tilde
    gap_rep = find_s_star(params)
    s_star, gap2 = gap_rep.s_star, gap_rep.gap_min2
    eps = min(1e-6, (1.0 - s_star) / 2, (s_star - params.s1) / 2)
    slope = (gap_tilde(params, s_star + eps)
             - gap_tilde(params, s_star - eps)) / (2 * eps)
    detune_len = gap2 / max(abs(slope), 1e-12)
    t_swap = 0.5 / gap2

    scan = []
    for frac in np.linspace(-0.1, 0.9, 9):
        s_min = min(max(s_star - frac * detune_len, s_lo + 1e-4),
                    s_hi - 1e-4)
        for tr_frac in np.linspace(0.3, 1.3, 8):
            t_ramp = min(max(tr_frac * t_swap, 0.021 * t_f / 2.0),
                         0.499 * t_f)
            u = to_u(s_min, t_ramp)
            scan.append((float(objective(u)), tuple(u)))
    scan.sort(key=lambda it: (it[0], it[1]))
    starts, seen = [], set()
    for val, u in scan:
        if u not in seen:
            seen.add(u)
            starts.append(np.array(u))
        if len(starts) == restarts:
            break

    candidates = []
    for idx, x0 in enumerate(starts):
        if idx > 0:
            x0 = x0 + rng.uniform(-1e-3, 1e-3, size=2)
        sim0 = np.array([x0, x0 + [0.005, 0.0], x0 + [0.0, 0.02]])
        out = minimize(objective, x0, method="Nelder-Mead",
                       options=dict(initial_simplex=sim0, xatol=1e-5,
                                    fatol=1e-10, maxiter=200, maxfev=220))
        u = np.clip(out.x, 0.0, 1.0)
        candidates.append((idx, _waveform_from_box(params, t_f, *u)))

    best = None
    for idx, wf in candidates:
        rep = gate_unitary(params, wf, tol=final_tol, target=target)
        if best is None or score(rep) > best[0]:
            best = (score(rep), idx, wf, rep)
    return best[2], best[3]


# single-qubit dressing rotations tried on each side of each qubit; z-axis
# rotations are omitted because the continuous phase alignment spans them
_HALF = 1.0 / np.sqrt(2.0)
_DRESS_FAMILY = (
    ("i", _I2),
    ("x90", _HALF * (_I2 - 1j * _SX)),
    ("x-90", _HALF * (_I2 + 1j * _SX)),
    ("x180", -1j * _SX),
    ("y90", _HALF * (_I2 - 1j * _SY)),
    ("y-90", _HALF * (_I2 + 1j * _SY)),
    ("y180", -1j * _SY),
)


def _phase_align_to(target, W, rounds=40):
    """Exact cyclic ascent of |Tr(target^dag Zl W Zr)| over four per-qubit
    diagonal phase angles.  Returns (score, (a, b, c, d))."""
    m = target.conj() * W
    row_c = np.array([0.0, 0.0, 1.0, 1.0])
    row_t = np.array([0.0, 1.0, 0.0, 1.0])
    a = b = c = d = 0.0
    for _ in range(rounds):
        changed = 0.0
        for which in range(4):
            pl = np.exp(1j * (a * row_c + b * row_t))
            pr = np.exp(1j * (c * row_c + d * row_t))
            phased = m * pl[:, None] * pr[None, :]
            if which == 0:
                grp = phased[2:, :].sum() * np.exp(-1j * a)
                rest = phased[:2, :].sum()
            elif which == 1:
                grp = phased[[1, 3], :].sum() * np.exp(-1j * b)
                rest = phased[[0, 2], :].sum()
            elif which == 2:
                grp = phased[:, 2:].sum() * np.exp(-1j * c)
                rest = phased[:, :2].sum()
            else:
                grp = phased[:, [1, 3]].sum() * np.exp(-1j * d)
                rest = phased[:, [0, 2]].sum()
            if abs(grp) == 0.0:
                continue
            new = float(np.angle(rest) - np.angle(grp))
            old = (a, b, c, d)[which]
            changed = max(changed, abs(np.exp(1j * new) - np.exp(1j * old)))
            if which == 0:
                a = new
            elif which == 1:
                b = new
            elif which == 2:
                c = new
            else:
                d = new
        if changed < 1e-15:
            break
    pl = np.exp(1j * (a * row_c + b * row_t))
    pr = np.exp(1j * (c * row_c + d * row_t))
    score = abs((m * pl[:, None] * pr[None, :]).sum())
    return score, (a, b, c, d)


def dress_to_cnot(U) -> np.ndarray:
    """Best CNOT dressing of U by single-qubit rotations and phases.

    Deterministic exhaustive search over x/y rotations (+-pi/2, pi) on
    either qubit on either side, with the per-qubit frame phases aligned
    exactly for each combination.  Returns the composed unitary with a
    global phase fixed so Tr(CNOT^dag W) is real positive.
    """
    U = np.asarray(U, dtype=complex)
    _check_unitary(U)
    best = None
    for ia, (_, Al) in enumerate(_DRESS_FAMILY):
        for ib, (_, Bl) in enumerate(_DRESS_FAMILY):
            left = np.kron(Al, Bl)
            lu = left @ U
            for ic, (_, Ar) in enumerate(_DRESS_FAMILY):
                for idx, (_, Br) in enumerate(_DRESS_FAMILY):
                    W = lu @ np.kron(Ar, Br)
                    score, angles = _phase_align_to(CNOT, W, rounds=6)
                    key = (ia, ib, ic, idx)
                    if best is None or score > best[0] + 1e-12:
                        best = (score, key, W, angles)
    _, _, W, _ = best
    score, (a, b, c, d) = _phase_align_to(CNOT, W, rounds=400)
    row_c = np.array([0.0, 0.0, 1.0, 1.0])
    row_t = np.array([0.0, 1.0, 0.0, 1.0])
    zl = np.exp(1j * (a * row_c + b * row_t))
    zr = np.exp(1j * (c * row_c + d * row_t))
    out = zl[:, None] * W * zr[None, :]
    tr = np.trace(CNOT.conj().T @ out)
    if abs(tr) > 0:
        out = out * np.exp(-1j * np.angle(tr))
    return out


def compose_cnot(report: GateReport) -> np.ndarray:
    """Dress the framed gate into a CNOT with single-qubit operations."""
    if report.canonical.leakage >= 0.05:
        raise ValueError(
            f"gate leakage {report.canonical.leakage:.3f} too large for a "
            "CNOT composition (need < 0.05)")
    return dress_to_cnot(report.framed)


def makhlin_invariants(U):
    """Local-equivalence invariants (complex G1, real G2) of a 4x4 unitary."""
    U = np.asarray(U, dtype=complex)
    _check_unitary(U)
    um = _MAGIC.conj().T @ U @ _MAGIC
    m = um.T @ um
    det = np.linalg.det(um)
    tr2 = np.trace(m) ** 2
    g1 = complex(tr2 / (16.0 * det))
    g2 = complex((tr2 - np.trace(m @ m)) / (4.0 * det))
    return g1, float(g2.real)


def qpt(U) -> np.ndarray:
    """Process matrix chi of the unitary channel in the two-qubit Pauli
    basis (normalized so that trace(chi) = 1); Hermitian PSD rank one."""
    U = np.asarray(U, dtype=complex)
    coeff = np.array([np.trace(p.conj().T @ U) / 4.0 for p in PAULI_2Q])
    return np.outer(coeff, coeff.conj())


def process_fidelity(chi_a, chi_b) -> float:
    """Tr(chi_a chi_b); equals ((d+1) F_avg - 1)/d for unitary channels."""
    return float(np.trace(np.asarray(chi_a) @ np.asarray(chi_b)).real)


def gate_level_trace(params: SpinParams, w: GateWaveform,
                     n_samples: int = 801, tol: float = 1e-8) -> dict:
    """Instantaneous levels and populations along the gate waveform.

    Returns {start_index: (n_samples, 9) array} keyed by the physical
    computational start state, columns t, E0..E3, P0..P3 with populations
    measured in the instantaneous eigenbasis of H(s(t)).
    """
    path = waveform_path(w)
    res = propagate_unitary(params, path, tol=tol)
    n_total = max(res.steps, n_samples)
    times = np.linspace(0.0, w.t_f, n_samples)
    from fluxgate.dynamics import _segment_unitary
    u = np.eye(4, dtype=complex)
    tables = {k: np.empty((n_samples, 9)) for k in range(4)}

    def record(i, u_now):
        s_now = waveform_eval(w, times[i])
        levels, vecs = instantaneous_basis(params, s_now)
        amps = vecs.conj().T @ u_now
        for k in range(4):
            tables[k][i, 0] = times[i]
            tables[k][i, 1:5] = levels
            tables[k][i, 5:] = np.abs(amps[:, k]) ** 2

    record(0, u)
    for i in range(1, n_samples):
        n_seg = max(1, int(round(n_total * (times[i] - times[i - 1]) / w.t_f)))
        u = _segment_unitary(params, path, times[i - 1], times[i], n_seg) @ u
        record(i, u)
    return tables
