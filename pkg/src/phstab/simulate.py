"""Time-domain cross-check: first-order Godunov finite volumes for
du/dt = -(P1 d/dx (H u) + P0 H u) with W [(Hu)(b); (Hu)(a)] = 0.

Unknowns are cell averages u_j; fluxes use z = H u.  At each interface the
left/right states are joined through the eigenvectors of H_j P1 (right-moving
waves come from the left cell, left-moving waves from the right cell), which
keeps P1 z continuous across jumps of H.  The boundary states solve the W
relation for the incoming waves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import BoundaryRowSingular, BudgetExceeded, GridMisaligned, SolveFailure
from .linalg import sqrtm_spd

DENSE_BUDGET = 4000


def wave_basis(h, p1):
    """Eigenvectors of H P1 split by the sign of the wave speed (S+, S-)."""
    r = sqrtm_spd(h)
    lam, q = np.linalg.eigh(r @ p1 @ r)  # H P1 = R (R P1 R) R^{-1}
    s = r @ q
    return s[:, lam > 0], s[:, lam < 0]


def _solve(mat, rhs, exc, what):
    if mat.size == 0:
        return np.zeros((0, rhs.shape[1]))
    sv = np.linalg.svd(mat, compute_uv=False)
    if sv[-1] < 1e-12 * max(sv[0], 1e-300):
        raise exc(f"{what} is singular (singular values {sv})")
    return np.linalg.solve(mat, rhs)


@dataclass(eq=False)
class DiscreteGenerator:
    n_cells: int
    dx: float
    matrix: sp.csr_matrix  # A_h, du/dt = -A_h u
    h_weights: sp.csr_matrix  # dx * blockdiag(H_j)
    d: int
    p1: np.ndarray
    trace_b: np.ndarray  # (d, dN): z_b = trace_b @ u
    trace_a: np.ndarray
    interfaces: list  # (j, G_L, G_R) with z*_{j+1/2} = G_L z_j + G_R z_{j+1}
    cell_h: np.ndarray

    @property
    def size(self):
        return self.n_cells * self.d

    def energy(self, u):
        u = np.asarray(u)
        return float(np.real(np.vdot(u, self.h_weights @ u)))

    def z(self, u):
        return np.einsum("jkl,jl->jk", self.cell_h, np.asarray(u).reshape(self.n_cells, self.d))

    def energy_rate_terms(self, u):
        """(boundary, numerical) with dE/dt = -(boundary + numerical).

        boundary = <P1 z_b, z_b> - <P1 z_a, z_a>; numerical >= 0 collects the
        upwind jump dissipation at interfaces and boundary cells.
        """
        p1 = self.p1
        q = lambda x: float(np.real(np.vdot(x, p1 @ x)))  # noqa: E731
        z = self.z(u)
        z_b, z_a = self.trace_b @ u, self.trace_a @ u
        num = -q(z[-1] - z_b) + q(z[0] - z_a)
        for j, g_l, g_r in self.interfaces:
            zs = g_l @ z[j] + g_r @ z[j + 1]
            num += -q(z[j] - zs) + q(z[j + 1] - zs)
        return q(z_b) - q(z_a), num


def _cell_values(problem, n_cells):
    h = problem.hamiltonian
    edges = np.linspace(h.a, h.b, n_cells + 1)
    dx = (h.b - h.a) / n_cells
    for x in h.breakpoints[1:-1]:
        k = (x - h.a) / dx
        if abs(k - round(k)) > 1e-9 * max(1.0, k):
            raise GridMisaligned(f"breakpoint {x} is not a cell edge of the {n_cells}-cell grid")
    mids = 0.5 * (edges[:-1] + edges[1:])
    return np.array([h.at(x) for x in mids]), dx


def discretize(problem, n_cells):
    p1, p0, w = problem.p1, problem.p0, problem.w
    d = problem.d
    cell_h, dx = _cell_values(problem, n_cells)
    n = n_cells * d
    bases = {}

    def basis(j):
        key = cell_h[j].tobytes()
        if key not in bases:
            bases[key] = wave_basis(cell_h[j], p1)
        return bases[key]

    # flux matrices F with P1 z* = F_L z_L + F_R z_R, assembled into A_h acting on z
    rows, cols, vals = [], [], []

    def add(bi, bj, block):
        r, c = np.nonzero(np.abs(block) > 0)
        rows.extend(bi * d + r)
        cols.extend(bj * d + c)
        vals.extend(block[r, c])

    interfaces = []
    eye = np.eye(d)
    for j in range(n_cells - 1):
        _, s_minus_l = basis(j)
        s_plus_r, _ = basis(j + 1)
        x = np.hstack([s_minus_l, s_plus_r])
        sol = _solve(x, eye, SolveFailure, "interface wave matrix")  # [alpha; beta] = sol (z_R - z_L)
        k_m = s_minus_l.shape[1]
        g_r = s_minus_l @ sol[:k_m]
        g_l = eye - g_r
        interfaces.append((j, g_l, g_r))
        # cell j loses P1 z*, cell j+1 gains it
        add(j, j, p1 @ g_l / dx)
        add(j, j + 1, p1 @ g_r / dx)
        add(j + 1, j, -p1 @ g_l / dx)
        add(j + 1, j + 1, -p1 @ g_r / dx)

    w1, w2 = w[:, :d], w[:, d:]
    _, s_minus_n = basis(n_cells - 1)
    s_plus_1, _ = basis(0)
    y = np.hstack([w1 @ s_minus_n, -w2 @ s_plus_1])
    coef = -_solve(y, np.hstack([w1, w2]), BoundaryRowSingular, "boundary wave matrix")
    k_m = s_minus_n.shape[1]
    # z_b = z_N + S_N^- alpha, z_a = z_1 - S_1^+ beta, [alpha; beta] = coef [z_N; z_1]
    bz_n = eye + s_minus_n @ coef[:k_m, :d]
    bz_1 = s_minus_n @ coef[:k_m, d:]
    az_n = -s_plus_1 @ coef[k_m:, :d]
    az_1 = eye - s_plus_1 @ coef[k_m:, d:]
    last, first = n_cells - 1, 0
    add(last, last, p1 @ bz_n / dx)
    add(last, first, p1 @ bz_1 / dx)
    add(first, last, -p1 @ az_n / dx)
    add(first, first, -p1 @ az_1 / dx)
    if np.any(p0):
        for j in range(n_cells):
            add(j, j, p0)

    flux = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    hblk = sp.block_diag(list(cell_h), format="csr")
    a_h = (flux @ hblk).tocsr()

    trace_b = np.zeros((d, n))
    trace_a = np.zeros((d, n))
    trace_b[:, last * d:] = bz_n @ cell_h[last]
    trace_b[:, :d] += bz_1 @ cell_h[first]
    trace_a[:, last * d:] = az_n @ cell_h[last]
    trace_a[:, :d] += az_1 @ cell_h[first]
    return DiscreteGenerator(n_cells, dx, a_h, (dx * hblk).tocsr(), d, p1, trace_b, trace_a, interfaces, cell_h)


def eigen_abscissa(gen, return_eigs=False):
    """max Re(lambda) over the spectrum of -A_h (dense; N d <= 4000)."""
    if gen.size > DENSE_BUDGET:
        raise BudgetExceeded(f"dense eigensolve of size {gen.size} exceeds {DENSE_BUDGET}")
    lam = np.linalg.eigvals(-gen.matrix.toarray())
    absc = float(lam.real.max())
    return (absc, lam) if return_eigs else absc


def slowest_mode(gen):
    """Eigenpair of -A_h with the largest real part (ties broken by |Im|)."""
    if gen.size > DENSE_BUDGET:
        raise BudgetExceeded(f"dense eigensolve of size {gen.size} exceeds {DENSE_BUDGET}")
    lam, vec = np.linalg.eig(-gen.matrix.toarray())
    order = np.lexsort((np.abs(lam.imag), -lam.real))
    i = order[0]
    return complex(lam[i]), vec[:, i]


def slowest_mode_sparse(gen, n_eigs=12):
    """Eigenpair near the imaginary axis by shift-invert (for large grids)."""
    a = -gen.matrix.tocsc()
    best = None
    for shift in np.linspace(0.0, 4.0 * math.pi, 5):
        try:
            lam, vec = spla.eigs(a, k=min(n_eigs, gen.size - 2), sigma=1j * shift, which="LM")
        except (spla.ArpackNoConvergence, RuntimeError):
            continue
        i = int(np.argmax(lam.real))
        if best is None or lam[i].real > best[0].real:
            best = (complex(lam[i]), vec[:, i])
    if best is None:
        raise SolveFailure("shift-invert eigensolve did not converge")
    return best


@dataclass(eq=False)
class EnergyTrajectory:
    times: np.ndarray
    energy: np.ndarray
    fitted_rate: float
    fit_r2: float

    def rows(self):
        return zip(self.times, self.energy)


def fit_tail(times, energy, frac=0.5):
    """Least-squares slope of log E over the last ``frac`` of the trajectory."""
    e = np.asarray(energy)
    if not np.any(e > 0):
        return 0.0, 1.0
    sel = times >= times[0] + (1 - frac) * (times[-1] - times[0])
    sel &= e > 1e-300
    if sel.sum() < 2:
        return 0.0, 1.0
    x, y = times[sel], np.log(e[sel])
    coef = np.polyfit(x, y, 1)
    resid = y - np.polyval(coef, x)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((resid ** 2).sum()) / ss_tot if ss_tot > 0 else 1.0
    return float(coef[0]), r2


def evolve(gen, u0, t_final, dt=None, record_every=1):
    """Implicit midpoint: (I + dt/2 A) u_{n+1} = (I - dt/2 A) u_n."""
    dt = gen.dx if dt is None else dt
    u = np.asarray(u0)
    dtype = complex if np.iscomplexobj(u) else float
    u = u.astype(dtype, copy=True)
    n_steps = max(int(math.ceil(t_final / dt - 1e-12)), 1)
    eye = sp.identity(gen.size, format="csc", dtype=dtype)
    lhs = (eye + 0.5 * dt * gen.matrix.astype(dtype)).tocsc()
    rhs_op = (eye - 0.5 * dt * gen.matrix.astype(dtype)).tocsr()
    try:
        lu = spla.splu(lhs)
    except RuntimeError as exc:
        raise SolveFailure(f"implicit midpoint system is singular: {exc}") from exc
    times = [0.0]
    energy = [gen.energy(u)]
    for k in range(1, n_steps + 1):
        u = lu.solve(rhs_op @ u)
        if k % record_every == 0 or k == n_steps:
            times.append(k * dt)
            energy.append(gen.energy(u))
    times, energy = np.array(times), np.array(energy)
    if energy[0] == 0:
        return EnergyTrajectory(times, energy, 0.0, 1.0)
    rate, r2 = fit_tail(times, energy)
    return EnergyTrajectory(times, energy, rate, r2)


def bump(gen, center=0.35, width=0.08):
    """Smooth initial state supported inside (a, b), same profile in every component."""
    x = (np.arange(gen.n_cells) + 0.5) / gen.n_cells
    prof = np.exp(-0.5 * ((x - center) / width) ** 2)
    return np.repeat(prof, gen.d) * np.tile(np.linspace(1.0, 0.5, gen.d), gen.n_cells)


def energy_step_identity(gen, u, dt):
    """(E(u_next) - E(u), -dt (boundary + numerical) at the midpoint state)."""
    eye = sp.identity(gen.size, format="csc")
    u_next = spla.spsolve((eye + 0.5 * dt * gen.matrix).tocsc(), (eye - 0.5 * dt * gen.matrix) @ u)
    mid = 0.5 * (u + u_next)
    bnd, num = gen.energy_rate_terms(mid)
    return gen.energy(u_next) - gen.energy(u), -dt * (bnd + num), mid


def write_triplets(gen, path):
    """Dump A_h as 'row col value' lines (0-based) after a size header."""
    coo = gen.matrix.tocoo()
    with open(path, "w") as fh:
        fh.write(f"{gen.size} {gen.size} {coo.nnz}\n")
        for r, c, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{r} {c} {v:.17g}\n")

