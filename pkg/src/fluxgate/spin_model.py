"""Two-spin gadget: Hamiltonian, two-segment annealing schedule, gap structure.

All energies are in GHz (angular-frequency convention, hbar = 1); the 2*pi
needed by a time propagator is applied in `dynamics`, never here.  Reduced
time s runs over [0, 1].  Tensor convention: spin 1 is the first factor and
sigma_z is diagonal with |0> the +1 eigenstate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SX = np.array([[0.0, 1.0], [1.0, 0.0]])
SZ = np.array([[1.0, 0.0], [0.0, -1.0]])
ID2 = np.eye(2)

#: root tolerance used by `find_s_star` (GHz)
ROOT_TOL = 1e-12


class GapRootError(RuntimeError):
    """No sign change of the tilde gap was found on (s1, 1]."""

    def __init__(self, bracket, message="tilde gap has no sign change"):
        self.bracket = bracket
        super().__init__(f"{message}; scanned bracket {bracket}")


@dataclass(frozen=True)
class SpinParams:
    """Constant Ising coefficients and schedule constants of the gadget.

    Parameters
    ----------
    h1z, h2z : float
        Longitudinal fields of spins 1 and 2, GHz.  0 < h1z < h2z.
    h1x, h2x : float
        Transverse driver amplitudes, GHz.  0 <= h1x < h2x.  h1x = 0 is
        accepted as the documented degenerate case (no first anticrossing)
        and then requires dmin1 = 0.
    J : float
        Ising coupling, GHz.  h1z < J < h2z.
    s1 : float
        Reduced time of the first gap, in (0, 1).
    dmin1 : float
        Engineered first minimum gap, GHz, 0 < dmin1 < 2*h1x.
    """

    h1z: float = 0.3
    h2z: float = 2.0
    h1x: float = 0.05
    h2x: float = 1.0
    J: float = 0.5
    s1: float = 0.5
    dmin1: float = 0.06

    def __post_init__(self):
        if not 0.0 < self.h1z < self.h2z:
            raise ValueError(f"need 0 < h1z < h2z, got {self.h1z}, {self.h2z}")
        if not self.h1z < self.J < self.h2z:
            raise ValueError(f"need h1z < J < h2z, got J={self.J}")
        if self.h1x == 0.0:
            if self.dmin1 != 0.0:
                raise ValueError("h1x = 0 requires dmin1 = 0")
        elif not 0.0 < self.h1x < self.h2x:
            raise ValueError(f"need 0 < h1x < h2x, got {self.h1x}, {self.h2x}")
        elif not 0.0 < self.dmin1 < 2.0 * self.h1x:
            raise ValueError(f"need 0 < dmin1 < 2*h1x, got dmin1={self.dmin1}")
        if not 0.0 < self.s1 < 1.0:
            raise ValueError(f"need 0 < s1 < 1, got {self.s1}")

    @property
    def drive_ratio(self) -> float:
        """dmin1 / (2 h1x); the value of gamma_d1 at s1 (0 when h1x = 0)."""
        if self.h1x == 0.0:
            return 0.0
        return self.dmin1 / (2.0 * self.h1x)


@dataclass(frozen=True)
class ScheduleValues:
    """Schedule triple (gamma_d1, gamma_d2, gamma_p) at reduced time s."""

    gd1: float
    gd2: float
    gp: float
    s: float


@dataclass(frozen=True)
class GapReport:
    """Location and size of the second small gap plus the gap table.

    gap_curve columns: s, exact gap, approximate gap, tilde gap, sampled
    on (s1, 1].
    """

    s_star: float
    gap_min2: float
    gap_curve: np.ndarray


def _check_s(s):
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"reduced time s must lie in [0, 1], got {s}")


def schedule_eval(params: SpinParams, s: float) -> ScheduleValues:
    """Evaluate the two-segment annealing schedule at reduced time s.

    Segment one (s <= s1) ramps gamma_d1 linearly from 1 down to
    dmin1/(2 h1x) while gamma_d2 = 1 and gamma_p = 0; segment two ramps
    all three linearly to (0, 0, 1) at s = 1.  Continuous at s1.
    """
    _check_s(s)
    r = params.drive_ratio
    if s <= params.s1:
        gd1 = (r - 1.0) * (s / params.s1) + 1.0
        gd2 = 1.0
        gp = 0.0
    else:
        gd1 = r * (s - 1.0) / (params.s1 - 1.0)
        gd2 = (s - 1.0) / (params.s1 - 1.0)
        gp = (s - params.s1) / (1.0 - params.s1)
    return ScheduleValues(gd1=gd1, gd2=gd2, gp=gp, s=s)


def hamiltonian(params: SpinParams, s: float) -> np.ndarray:
    """Gadget Hamiltonian H(s) as a 4x4 complex Hermitian matrix (GHz).

    H(s) = gd1*h1x*(sx x I) + gd2*h2x*(I x sx)
         + gp*(h1z*(sz x I) + h2z*(I x sz) + J*(sz x sz))
    """
    g = schedule_eval(params, s)
    h = g.gd1 * params.h1x * np.kron(SX, ID2)
    h = h + g.gd2 * params.h2x * np.kron(ID2, SX)
    h = h + g.gp * (
        params.h1z * np.kron(SZ, ID2)
        + params.h2z * np.kron(ID2, SZ)
        + params.J * np.kron(SZ, SZ)
    )
    return h.astype(complex)


def gap_exact(params: SpinParams, s: float) -> float:
    """E1(s) - E0(s) from a dense Hermitian eigensolve; >= 0."""
    levels = np.linalg.eigvalsh(hamiltonian(params, s))
    return float(levels[1] - levels[0])


def _check_segment_two(params, s):
    if not params.s1 < s <= 1.0:
        raise ValueError(
            f"s must lie in (s1, 1] = ({params.s1}, 1], got {s}"
        )


def gap_tilde(params: SpinParams, s: float) -> float:
    """Gap of the system with the spin-1 driver removed (segment two only).

    Negative just above s1, positive 2*(J - h1z) at s = 1; its zero marks
    the second anticrossing.
    """
    _check_segment_two(params, s)
    g = schedule_eval(params, s)
    a = g.gp * g.gp * (params.h2z + params.J) ** 2
    b = g.gp * g.gp * (params.h2z - params.J) ** 2
    d2 = (g.gd2 * params.h2x) ** 2
    return float(np.sqrt(a + d2) - np.sqrt(b + d2) - 2.0 * g.gp * params.h1z)


def gap_approx(params: SpinParams, s: float) -> float:
    """Second-segment gap approximation sqrt(tilde^2 + (2 gd1 h1x)^2)."""
    _check_segment_two(params, s)
    g = schedule_eval(params, s)
    tilde = gap_tilde(params, s)
    return float(np.hypot(tilde, 2.0 * g.gd1 * params.h1x))


def find_s_star(params: SpinParams, curve_points: int = 512) -> GapReport:
    """Locate the second anticrossing by bisection on the tilde gap.

    The root bracket is taken from a scan of (s1, 1]; bisection runs until
    |tilde gap| < ROOT_TOL.  gap_min2 is gap_approx at the root.  Raises
    GapRootError when the scan finds no sign change.
    """
    scan = np.linspace(params.s1, 1.0, 4097)[1:]
    vals = np.array([gap_tilde(params, s) for s in scan])
    sign_change = np.nonzero(np.signbit(vals[:-1]) != np.signbit(vals[1:]))[0]
    if len(sign_change) == 0:
        raise GapRootError((float(scan[0]), float(scan[-1])))
    i = int(sign_change[0])
    lo, hi = float(scan[i]), float(scan[i + 1])
    flo = vals[i]
    mid = 0.5 * (lo + hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fmid = gap_tilde(params, mid)
        if abs(fmid) < ROOT_TOL:
            break
        if np.signbit(fmid) == np.signbit(flo):
            lo, flo = mid, fmid
        else:
            hi = mid
    s_star = float(mid)

    grid = np.linspace(params.s1, 1.0, curve_points + 1)[1:]
    curve = np.empty((len(grid), 4))
    curve[:, 0] = grid
    curve[:, 1] = [gap_exact(params, s) for s in grid]
    curve[:, 2] = [gap_approx(params, s) for s in grid]
    curve[:, 3] = [gap_tilde(params, s) for s in grid]
    return GapReport(
        s_star=s_star,
        gap_min2=gap_approx(params, s_star),
        gap_curve=curve,
    )


def spectrum_trace(params: SpinParams, s_grid) -> np.ndarray:
    """Sorted level curves over s_grid as a CSV-ready (n, 5) table.

    Columns: s, E0, E1, E2, E3 (ascending eigenvalues, GHz).
    """
    s_grid = np.asarray(s_grid, dtype=float)
    if s_grid.ndim != 1 or len(s_grid) == 0:
        raise ValueError("s_grid must be a non-empty 1-d array")
    if np.any(np.diff(s_grid) < 0.0):
        raise ValueError("s_grid must be sorted ascending")
    out = np.empty((len(s_grid), 5))
    out[:, 0] = s_grid
    for i, s in enumerate(s_grid):
        out[i, 1:] = np.linalg.eigvalsh(hamiltonian(params, s))
    return out
