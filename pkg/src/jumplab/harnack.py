"""Parabolic and elliptic Harnack constants of space-time boxes.

The nonnegative caloric functions on a window form a cone.  On a fixed time
grid every field produced by `caloric_solve` is a nonnegative combination of
finitely many extreme generators: initial point masses, one-step exterior
impulses at each tracked vertex, and one-step impulses on the aggregate
remainder channel.  Since a ratio of nonnegative mixtures is bounded by the
largest component ratio, the box constant of the cone equals the maximum
two-point ratio over the generators, which is what these routines compute.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ExteriorOutOfRange, NumericalFailure, WindowUnconverged
from .models import EXTERIOR_TRACKED, FiniteModel, KILLED, LatticeModel, truncate
from .semigroup import (
    CaloricField,
    generator,
    integrated_action,
    step_operators,
)

FLOOR = 1e-30


@dataclass(frozen=True)
class HarnackBox:
    """Q = (0,T) x B(x0,R) with T = lam * R^alpha and the two probe sub-boxes
    Q- = [T/4,T/2] x B(x0,R/2), Q+ = [3T/4,T] x B(x0,R/2)."""

    x0: tuple
    R: float
    alpha: float
    lam: float = 1.0
    m_steps: int = 256

    def __post_init__(self):
        if not (0.0 < self.lam <= 1.0):
            raise ValueError("lam must lie in (0, 1]")
        if self.R <= 0:
            raise ValueError("R must be positive")
        if self.m_steps % 4 != 0:
            raise ValueError("m_steps must be divisible by 4 so the grid "
                             "contains the quarter times exactly")

    @property
    def T(self) -> float:
        return self.lam * float(self.R) ** self.alpha

    def minus_steps(self) -> range:
        return range(self.m_steps // 4, self.m_steps // 2 + 1)

    def plus_steps(self) -> range:
        return range(3 * self.m_steps // 4, self.m_steps + 1)

    def to_dict(self):
        return {"x0": list(self.x0), "R": self.R, "alpha": self.alpha,
                "lam": self.lam, "T": self.T, "m_steps": self.m_steps}


@dataclass
class HarnackReport:
    box: dict
    constant: float
    witness: dict
    family_sizes: dict
    metadata: dict = field(default_factory=dict)

    def to_dict(self):
        c = self.constant
        return {"box": self.box, "constant": "inf" if math.isinf(c) else c,
                "witness": self.witness, "family_sizes": self.family_sizes,
                "metadata": self.metadata}


class _BoxStats:
    """Running sup over Q- and inf over Q+ for a batch of generator columns,
    with first-attained (time-then-lexicographic) witnesses."""

    def __init__(self, n_cols: int):
        self.max_minus = np.zeros(n_cols)
        self.min_plus = np.full(n_cols, np.inf)
        self.wit_minus = np.full((n_cols, 2), -1, dtype=np.int64)  # (step, half-slot)
        self.wit_plus = np.full((n_cols, 2), -1, dtype=np.int64)

    def see_minus(self, step: int, vals_half: np.ndarray):
        colmax = vals_half.max(axis=0)
        rows = vals_half.argmax(axis=0)
        upd = colmax > self.max_minus
        self.max_minus[upd] = colmax[upd]
        self.wit_minus[upd, 0] = step
        self.wit_minus[upd, 1] = rows[upd]

    def see_plus(self, step: int, vals_half: np.ndarray):
        colmin = vals_half.min(axis=0)
        rows = vals_half.argmin(axis=0)
        upd = colmin < self.min_plus
        self.min_plus[upd] = colmin[upd]
        self.wit_plus[upd, 0] = step
        self.wit_plus[upd, 1] = rows[upd]


def _half_ball_slots(fm: FiniteModel, x0, R) -> list[int]:
    return [i for i, v in enumerate(fm.window)
            if fm.model.distance(x0, v) <= R / 2]


def _scan_generators(fm: FiniteModel, box: HarnackBox, tol: float):
    """Stream all cone generators through the box and return per-generator
    (sup Q-, inf Q+) statistics."""
    m = box.m_steps
    dt = box.T / m
    ops = step_operators(fm, dt, tol)
    E = ops.E
    # exterior channels plus the aggregate remainder channel share the scan
    S_aug = np.concatenate([ops.S, ops.s_rem[:, None]], axis=1)
    half = _half_ball_slots(fm, box.x0, box.R)
    minus = set(box.minus_steps())
    plus = set(box.plus_steps())

    init_stats = _BoxStats(fm.n)
    U = np.diag(1.0 / fm.mu)
    for j in range(1, m + 1):
        U = E @ U
        if j in minus:
            init_stats.see_minus(j, U[half])
        if j in plus:
            init_stats.see_plus(j, U[half])

    # source generator launched at step si has value E^(j-si-1) S_aug[:, w]
    # at grid step j > si; stream by age and fan out to all launch steps
    n_chan = S_aug.shape[1]
    src_stats = [_BoxStats(n_chan) for _ in range(m)]
    W = S_aug.copy()
    for age in range(m):
        vals = W[half]
        for j in minus:
            si = j - 1 - age
            if 0 <= si < m:
                src_stats[si].see_minus(j, vals)
        for j in plus:
            si = j - 1 - age
            if 0 <= si < m:
                src_stats[si].see_plus(j, vals)
        if age < m - 1:
            W = E @ W
    return init_stats, src_stats, half, ops


def _collect(fm: FiniteModel, box: HarnackBox, init_stats, src_stats, half):
    """Fold the scan statistics into (constant, witness) with deterministic
    generator ordering: initial fields first (window order), then source
    impulses by (launch step, channel)."""
    channels = list(fm.exterior) + ["remainder"]
    times = np.linspace(0.0, box.T, box.m_steps + 1)

    best = -math.inf
    best_wit = None

    def witness(gen_id, stats, col):
        jm, rm = stats.wit_minus[col]
        jp, rp = stats.wit_plus[col]
        return {"generator": gen_id,
                "minus": (float(times[jm]), fm.window[half[rm]]) if jm >= 0 else None,
                "plus": (float(times[jp]), fm.window[half[rp]]) if jp >= 0 else None}

    def consider(gen_id, stats, col):
        nonlocal best, best_wit
        mm = stats.max_minus[col]
        if mm <= 0.0:
            return
        mp = stats.min_plus[col]
        ratio = math.inf if mp < FLOOR else mm / mp
        if ratio > best:
            best = ratio
            best_wit = witness(gen_id, stats, col)

    for zi, z in enumerate(fm.window):
        consider(("initial", z), init_stats, zi)
    for si in range(box.m_steps):
        for ci, ch in enumerate(channels):
            consider(("source", si, ch), src_stats[si], ci)
    return best, best_wit


def _phi_once(model: LatticeModel, box: HarnackBox, lam_ext: float, tol: float):
    fm = truncate(model, box.x0, 2 * box.R, EXTERIOR_TRACKED, lam_ext)
    init_stats, src_stats, half, ops = _scan_generators(fm, box, tol)
    best, wit = _collect(fm, box, init_stats, src_stats, half)
    return fm, max(best, 1.0), wit, ops.err


def phi_constant(model: LatticeModel, box: HarnackBox, lam_ext: float = 4.0,
                 tol: float = 1e-12, check_doubling: bool = True) -> HarnackReport:
    """Exact box constant of the nonnegative caloric cone on the time grid:
    C_P = max over generators of sup_{Q-} g / inf_{Q+} g.

    Exterior data beyond the tracked annulus enters through one aggregate
    remainder channel; `check_doubling` recomputes with twice the annulus and
    raises WindowUnconverged if the constant moves by more than 5%.
    """
    fm, c_p, wit, err = _phi_once(model, box, lam_ext, tol)
    doubled = None
    if check_doubling:
        _, c_p2, _, _ = _phi_once(model, box, 2 * lam_ext, tol)
        doubled = c_p2
        both_inf = math.isinf(c_p) and math.isinf(c_p2)
        if not both_inf:
            if math.isinf(c_p) != math.isinf(c_p2) or \
                    abs(c_p2 - c_p) > 0.05 * min(c_p, c_p2):
                raise WindowUnconverged(
                    f"C_P moved from {c_p} to {c_p2} when doubling the "
                    f"tracked exterior radius (lam_ext {lam_ext} -> {2 * lam_ext})")
    n_ext = len(fm.exterior)
    return HarnackReport(
        box=box.to_dict(), constant=c_p, witness=_clean_witness(wit),
        family_sizes={"initial": fm.n,
                      "source": box.m_steps * (n_ext + 1)},
        metadata={"window_radius": 2 * box.R, "lam_ext": lam_ext,
                  "exterior_radius": lam_ext * 2 * box.R,
                  "n_exterior": n_ext, "m_steps": box.m_steps,
                  "floor": FLOOR, "step_error": err,
                  "doubled_constant": doubled})


def _clean_witness(wit):
    if wit is None:
        return None
    def pt(p):
        if p is None:
            return None
        t, v = p
        return [t, list(v) if isinstance(v, tuple) else v]
    gen = wit["generator"]
    gen = [gen[0]] + [list(g) if isinstance(g, tuple) else g for g in gen[1:]]
    return {"generator": gen, "minus": pt(wit["minus"]), "plus": pt(wit["plus"])}


def caloric_box_ratio(fld: CaloricField, box: HarnackBox) -> float:
    """sup_{Q-} u / inf_{Q+} u for a caloric field on the box's grid."""
    fm = fld.fm
    half = _half_ball_slots(fm, box.x0, box.R)
    minus = list(box.minus_steps())
    plus = list(box.plus_steps())
    sup = float(fld.values[np.ix_(minus, half)].max())
    inf = float(fld.values[np.ix_(plus, half)].min())
    if sup <= 0.0:
        return 0.0
    if inf < FLOOR:
        return math.inf
    return sup / inf


# ---------------------------------------------------------------------------
# elliptic constant
# ---------------------------------------------------------------------------

def _ehi_once(model: LatticeModel, x0, R, lam_ext: float):
    fm = truncate(model, x0, 2 * R, EXTERIOR_TRACKED, lam_ext)
    gen = generator(fm)
    rhs = np.concatenate([fm.coupling / fm.mu[:, None],
                          fm.remainder_kill[:, None]], axis=1)
    try:
        H = np.linalg.solve(-gen.Q, rhs)
    except np.linalg.LinAlgError as e:
        raise NumericalFailure(str(e)) from e
    if not np.all(np.isfinite(H)):
        raise NumericalFailure("harmonic solve returned non-finite values")
    inner = [i for i, v in enumerate(fm.window)
             if fm.model.distance(x0, v) <= R]
    channels = list(fm.exterior) + ["remainder"]
    best = -math.inf
    wit = None
    sub = H[inner]
    for ci, ch in enumerate(channels):
        col = sub[:, ci]
        hi = float(col.max())
        if hi <= 0.0:
            continue
        lo = float(col.min())
        ratio = math.inf if lo < FLOOR else hi / lo
        if ratio > best:
            best = ratio
            wit = {"generator": ("exterior", ch),
                   "max_at": fm.window[inner[int(col.argmax())]],
                   "min_at": fm.window[inner[int(col.argmin())]]}
    return fm, max(best, 1.0), wit


def ehi_constant(model: LatticeModel, x0, R, lam_ext: float = 4.0,
                 check_doubling: bool = True) -> HarnackReport:
    """C_EHI = max over exterior-delta harmonic generators h_w of
    max_{B(x0,R)} h_w / min_{B(x0,R)} h_w, on the window B(x0,2R)."""
    fm, c, wit, = _ehi_once(model, x0, R, lam_ext)
    doubled = None
    if check_doubling:
        _, c2, _ = _ehi_once(model, x0, R, 2 * lam_ext)
        doubled = c2
        both_inf = math.isinf(c) and math.isinf(c2)
        if not both_inf:
            if math.isinf(c) != math.isinf(c2) or abs(c2 - c) > 0.05 * min(c, c2):
                raise WindowUnconverged(
                    f"C_EHI moved from {c} to {c2} when doubling the tracked "
                    f"exterior radius")
    if wit is not None:
        g = wit["generator"]
        wit = {"generator": [g[0], list(g[1]) if isinstance(g[1], tuple) else g[1]],
               "max_at": list(wit["max_at"]) if isinstance(wit["max_at"], tuple)
               else wit["max_at"],
               "min_at": list(wit["min_at"]) if isinstance(wit["min_at"], tuple)
               else wit["min_at"]}
    return HarnackReport(
        box={"x0": list(x0), "R": R, "elliptic": True},
        constant=c, witness=wit,
        family_sizes={"exterior": len(fm.exterior) + 1},
        metadata={"window_radius": 2 * R, "lam_ext": lam_ext,
                  "n_exterior": len(fm.exterior), "floor": FLOOR,
                  "doubled_constant": doubled})


def harmonic_partition_residual(model: LatticeModel, x0, R,
                                lam_ext: float = 4.0) -> float:
    """max_x |sum_w h_w(x) + h_rem(x) - 1| over B(x0,R): the harmonic
    generators of data == 1 must sum to the constant function."""
    fm, _, _ = _ehi_once(model, x0, R, lam_ext)
    gen = generator(fm)
    rhs = (fm.coupling / fm.mu[:, None]).sum(axis=1) + fm.remainder_kill
    h = np.linalg.solve(-gen.Q, rhs)
    return float(np.abs(h - 1.0).max())


# ---------------------------------------------------------------------------
# first-jump exit density
# ---------------------------------------------------------------------------

def first_jump_density(model: LatticeModel, x0, R, y0, T: float, h: float,
                       x=None, lam_ext: float = 4.0, tol: float = 1e-12):
    """h^{-1} P^x(X_{tau_B} = y0, tau_B in (T/2-h, T/2)) for B = B(x0,R).

    Computed exactly from the killed semigroup: the probability equals
    int_0^h [e^{sQ_B} kappa](x) ds with kappa(z) = J(z,y0)/mu_z, so the
    returned value converges to mu_x^{-1} J(x,y0) as h -> 0 (relative error
    O(h)).  Requires y0 outside B but within the tracked range lam_ext*R.
    """
    if not (0.0 < h <= T / 2):
        raise ValueError("need 0 < h <= T/2")
    dist = model.distance(x0, y0)
    if dist <= R:
        raise ValueError("y0 must lie outside the ball")
    if dist > lam_ext * R:
        raise ExteriorOutOfRange(
            f"y0 at distance {dist} exceeds the tracked range {lam_ext * R}")
    fm = truncate(model, x0, R, KILLED)
    gen = generator(fm)
    kappa = np.array([model.J(z, y0) for z in fm.window]) / fm.mu
    acc, _ = integrated_action(gen, kappa, h, tol)
    vals = acc / h
    if x is None:
        return vals
    return float(vals[fm.index[x]])
