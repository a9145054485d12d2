"""Canonical phase spaces over R^n: systems, points, trajectories, flows.

A Hamiltonian system is a scalar expression h over declared position and
momentum coordinates (plus optionally the time variable).  The canonical
vector field is (dh/dp, -dh/dq); the reference flow is fixed-step
classical Runge-Kutta 4, which is deliberately not symplectic so it can
serve as an independent check against the structure-preserving maps.
"""

from __future__ import annotations

import re

import numpy as np

from .expr import Expr, parse, differentiate

__all__ = [
    "HamiltonianSystem", "PhasePoint", "Trajectory",
    "hamiltonian_vector_field", "symplectic_pairing", "symplectic_matrix",
    "flow_reference", "default_momentum_names",
]


def default_momentum_names(coords):
    """Momentum names paired to position names: q3 -> p3, q -> p, x -> p_x."""
    out = []
    for name in coords:
        m = re.fullmatch(r"q([0-9]+)", name)
        if m:
            out.append("p" + m.group(1))
        elif name == "q":
            out.append("p")
        else:
            out.append("p_" + name)
    return tuple(out)


class PhasePoint:
    """A point (q, p) of T*R^n, with an optional time stamp."""

    def __init__(self, q, p, t=None):
        self.q = np.atleast_1d(np.asarray(q, dtype=float))
        self.p = np.atleast_1d(np.asarray(p, dtype=float))
        if self.q.shape != self.p.shape or self.q.ndim != 1:
            raise ValueError("q and p must be 1-d arrays of equal length")
        self.t = None if t is None else float(t)

    @property
    def n(self):
        return self.q.size

    def flat(self):
        return np.concatenate([self.q, self.p])

    def __repr__(self):
        ts = "" if self.t is None else f", t={self.t}"
        return f"PhasePoint(q={self.q.tolist()}, p={self.p.tolist()}{ts})"


class HamiltonianSystem:
    """Hamiltonian h over coordinates q^1..q^n and momenta p_1..p_n."""

    def __init__(self, h, coords, momenta=None, t_var="t"):
        self.h = parse(h) if isinstance(h, str) else h
        self.coords = tuple(coords)
        self.momenta = tuple(momenta) if momenta is not None else default_momentum_names(self.coords)
        if len(self.momenta) != len(self.coords):
            raise ValueError("need one momentum name per coordinate")
        names = set(self.coords) | set(self.momenta)
        if len(names) != 2 * len(self.coords):
            raise ValueError("coordinate and momentum names must be distinct")
        self.t_var = t_var
        extra = self.h.free_vars() - names - {t_var}
        if extra:
            raise ValueError(f"hamiltonian uses undeclared variables: {sorted(extra)}")
        self.time_dependent = t_var in self.h.free_vars()
        self._dh_dq = tuple(differentiate(self.h, v) for v in self.coords)
        self._dh_dp = tuple(differentiate(self.h, v) for v in self.momenta)

    @property
    def n(self):
        return len(self.coords)

    def bindings(self, z, t=None):
        b = dict(zip(self.coords, z.q))
        b.update(zip(self.momenta, z.p))
        tv = t if t is not None else z.t
        if tv is not None:
            b[self.t_var] = tv
        return b

    def energy(self, z, t=None, singular_tol=0.0):
        return self.h.evaluate(self.bindings(z, t), singular_tol)

    def __repr__(self):
        return f"HamiltonianSystem({self.h}, coords={list(self.coords)})"


class Trajectory:
    """Uniformly sampled trajectory: times (N,), qs (N,n), ps (N,n)."""

    def __init__(self, times, qs, ps):
        self.times = np.asarray(times, dtype=float)
        self.qs = np.asarray(qs, dtype=float)
        self.ps = np.asarray(ps, dtype=float)
        if self.times.ndim != 1 or self.qs.shape != self.ps.shape \
                or self.qs.shape[0] != self.times.size:
            raise ValueError("inconsistent trajectory arrays")
        if self.times.size > 1:
            steps = np.diff(self.times)
            if not np.all(steps > 0):
                raise ValueError("sample times must be strictly increasing")
            self.dt = float(steps[0])
            if not np.allclose(steps, self.dt, rtol=1e-9, atol=1e-12):
                raise ValueError("sample times must be uniform")
        else:
            self.dt = 0.0

    def __len__(self):
        return self.times.size

    @property
    def n(self):
        return self.qs.shape[1]

    def point(self, i):
        return PhasePoint(self.qs[i], self.ps[i], t=self.times[i])

    def points(self):
        for i in range(len(self)):
            yield self.point(i)

    def energies(self, sys, singular_tol=0.0):
        return np.array([sys.energy(self.point(i), singular_tol=singular_tol)
                         for i in range(len(self))])


def hamiltonian_vector_field(sys, z, t=None, singular_tol=0.0):
    """Canonical vector field (dh/dp, -dh/dq) at z, as a flat 2n array."""
    b = sys.bindings(z, t)
    qdot = [e.evaluate(b, singular_tol) for e in sys._dh_dp]
    pdot = [-e.evaluate(b, singular_tol) for e in sys._dh_dq]
    return np.array(qdot + pdot)


def symplectic_pairing(u, v):
    """Canonical pairing omega(u, v) of two flat tangent vectors (dq, dp)."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape or u.ndim != 1 or u.size % 2:
        raise ValueError("tangent vectors must be flat arrays of equal even length")
    n = u.size // 2
    return float(u[:n] @ v[n:] - u[n:] @ v[:n])


def symplectic_matrix(n):
    """Matrix of the canonical pairing in the (dq, dp) basis."""
    omega = np.zeros((2 * n, 2 * n))
    omega[:n, n:] = np.eye(n)
    omega[n:, :n] = -np.eye(n)
    return omega


def _rk4(f, y0, t0, t_end, dt):
    """Fixed-step RK4.  The step is adjusted so that t_end is hit exactly."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    span = t_end - t0
    if span == 0.0:
        return np.array([t0]), np.asarray(y0, dtype=float)[None, :]
    if span < 0:
        raise ValueError("t_end must not precede t0")
    n_steps = max(1, int(round(span / dt)))
    h = span / n_steps
    times = t0 + h * np.arange(n_steps + 1)
    times[-1] = t_end
    y = np.asarray(y0, dtype=float).copy()
    out = np.empty((n_steps + 1, y.size))
    out[0] = y
    for i in range(n_steps):
        t = times[i]
        k1 = f(t, y)
        k2 = f(t + 0.5 * h, y + 0.5 * h * k1)
        k3 = f(t + 0.5 * h, y + 0.5 * h * k2)
        k4 = f(t + h, y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[i + 1] = y
    return times, out


def flow_reference(sys, z0, t_end, dt, singular_tol=1e-12):
    """Integrate the canonical equations with RK4 from t=0 to t_end.

    Steps that land within ``singular_tol`` of a division singularity
    raise a DomainError rather than continuing with garbage.
    """
    n = sys.n

    def field(t, y):
        z = PhasePoint(y[:n], y[n:])
        return hamiltonian_vector_field(sys, z, t=t, singular_tol=singular_tol)

    t0 = 0.0 if z0.t is None else z0.t
    times, ys = _rk4(field, z0.flat(), t0, t0 + t_end, dt)
    return Trajectory(times, ys[:, :n], ys[:, n:])
