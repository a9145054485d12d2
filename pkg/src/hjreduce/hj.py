"""Hamilton-Jacobi residuals and solvers.

This module carries the solution-side vocabulary: differential 1-forms
with closedness and Hamilton-Jacobi residual checks, one-degree-of-
freedom solutions by quadrature, the time extension that turns a fixed-
energy solution into a time-dependent one, the cyclic-variable ansatz,
complete-solution (generating-function) families with non-degeneracy
checks, and the additive splitting of generating functions over a
product of a reduced factor and a translation-group factor.

Quadrature-built solutions have no closed form.  They are represented
by numeric function objects (root solves and running integrals) that
know their own exact partial derivatives via implicit differentiation,
embedded into expression trees through :class:`hjreduce.expr.External`,
so all residual checks run through the same symbolic machinery as
closed-form inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _linalg
from .expr import (Const, DomainError, Expr, External, Var, differentiate,
                   evaluate, mul, parse, sub, substitute)

__all__ = [
    "PreconditionError", "SolveError", "TurningPointError",
    "BranchAmbiguityError", "NewtonDivergenceError", "SingularJacobianError",
    "OneForm", "QuadratureSolution", "GeneratingFunction",
    "HJReport", "CompletenessReport", "CyclicAnsatz", "HeavyTopSolution",
    "SplitReport",
    "closedness_residual", "hj_residual", "time_dependent_residual",
    "solve_reduced_1d", "time_extension", "quadrature_complete_solution",
    "check_complete", "cyclic_ansatz", "cyclic_complete_solution",
    "heavy_top_system", "solve_heavy_top", "additive_split_check",
    "ImplicitBranchRoot", "TabulatedAntiderivative", "RunningIntegral",
    "mesh_grid", "random_grid",
]


class PreconditionError(ValueError):
    """A stated precondition failed; carries a witness point when known."""

    def __init__(self, message, witness=None):
        if witness is not None:
            message = f"{message} (witness: {witness})"
        super().__init__(message)
        self.witness = witness


class SolveError(Exception):
    """Base class for numerical solver failures."""


class TurningPointError(SolveError):
    """No momentum root on the requested branch (radicand crossed zero)."""

    def __init__(self, location, message=None):
        super().__init__(message or f"turning point: no momentum root at {location}")
        self.location = location


class BranchAmbiguityError(SolveError):
    """The equation is not monotone in the momentum on the branch."""


class NewtonDivergenceError(SolveError):
    """Newton iteration failed to converge."""


class SingularJacobianError(SolveError):
    """Newton hit a singular Jacobian."""


# ---------------------------------------------------------------------------
# Grids.

def mesh_grid(bounds, counts):
    """Cartesian product grid.  bounds: [(lo, hi), ...]; returns (N, m)."""
    if isinstance(counts, int):
        counts = [counts] * len(bounds)
    axes = [np.linspace(lo, hi, c) for (lo, hi), c in zip(bounds, counts)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def random_grid(bounds, n, seed=42):
    """n uniform samples from a box.  bounds: [(lo, hi), ...]; (n, m)."""
    rng = np.random.default_rng(seed)
    lo = np.array([b[0] for b in bounds], dtype=float)
    hi = np.array([b[1] for b in bounds], dtype=float)
    return lo + (hi - lo) * rng.random((n, len(bounds)))


# ---------------------------------------------------------------------------
# Differential 1-forms.

class OneForm:
    """A 1-form sum_i c_i(y) dy^i over named base coordinates.

    ``potential`` optionally records a primitive S with dS equal to the
    form; when only the potential is given the components are derived
    from it symbolically.
    """

    def __init__(self, coords, components=None, potential=None):
        self.coords = tuple(coords)
        if isinstance(potential, str):
            potential = parse(potential)
        self.potential = potential
        if components is None:
            if potential is None:
                raise ValueError("need components or a potential")
            components = tuple(differentiate(potential, v) for v in self.coords)
        comps = []
        for c in components:
            comps.append(parse(c) if isinstance(c, str) else c)
        self.components = tuple(comps)
        if len(self.components) != len(self.coords):
            raise ValueError("need one component per coordinate")

    @classmethod
    def exact(cls, potential, coords):
        """The exact form dS of a potential S."""
        return cls(coords, potential=potential)

    @classmethod
    def zero(cls, coords):
        return cls(coords, components=[Const(0.0)] * len(coords))

    @property
    def m(self):
        return len(self.coords)

    def bindings(self, point):
        return dict(zip(self.coords, np.atleast_1d(point)))

    def values(self, point, singular_tol=0.0):
        """Component values at a base point (array in coordinate order)."""
        b = self.bindings(point)
        return np.array([c.evaluate(b, singular_tol) for c in self.components])

    def __repr__(self):
        inner = ", ".join(f"{c}" for c in self.components)
        return f"OneForm[{', '.join(self.coords)}]({inner})"


class QuadratureSolution(OneForm):
    """A 1-D solution form built by quadrature; keeps its table and root."""

    def __init__(self, coords, components, potential, table, root, energy, y_range):
        super().__init__(coords, components, potential)
        self.table = table
        self.root = root
        self.energy = float(energy)
        self.y_range = (float(y_range[0]), float(y_range[1]))


def closedness_residual(form, grid, singular_tol=0.0):
    """max over the grid of |d_i c_j - d_j c_i| for all coordinate pairs."""
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    m = form.m
    if m == 1:
        return 0.0
    pairs = []
    for i in range(m):
        for j in range(i + 1, m):
            dij = differentiate(form.components[j], form.coords[i])
            dji = differentiate(form.components[i], form.coords[j])
            pairs.append((dij, dji))
    worst = 0.0
    for point in grid:
        b = form.bindings(point)
        for dij, dji in pairs:
            r = abs(dij.evaluate(b, singular_tol) - dji.evaluate(b, singular_tol))
            if r > worst:
                worst = r
    return worst


@dataclass
class HJReport:
    """Energy estimate and residual of h restricted to the graph of a form."""
    e_est: float
    max_dev: float
    closedness: float


def hj_residual(sys, form, grid, closed_tol=1e-9, singular_tol=0.0,
                check_closed=True):
    """How far h is from constant along the graph of the form.

    The form must be (numerically) closed: a non-closed graph is not a
    lagrangian submanifold and the statistic would be meaningless, so
    that precondition is enforced first.
    """
    if tuple(form.coords) != tuple(sys.coords):
        raise ValueError("form coordinates must match the system's")
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    closedness = closedness_residual(form, grid, singular_tol)
    if check_closed and closedness > closed_tol:
        raise PreconditionError(
            f"form is not closed (residual {closedness:.3e} > {closed_tol:.1e})")
    vals = np.empty(grid.shape[0])
    for idx, point in enumerate(grid):
        b = form.bindings(point)
        pvals = [c.evaluate(b, singular_tol) for c in form.components]
        b.update(zip(sys.momenta, pvals))
        vals[idx] = sys.h.evaluate(b, singular_tol)
    e_est = float(np.mean(vals))
    max_dev = float(np.max(np.abs(vals - e_est))) if vals.size else 0.0
    return HJReport(e_est=e_est, max_dev=max_dev, closedness=closedness)


# ---------------------------------------------------------------------------
# Implicit momentum roots and running integrals.
#
# These numeric function objects satisfy the `External` protocol: they
# are callable on floats and expose partial(i).  Derivatives of a root
# come from implicit differentiation of the defining equation and are
# exact up to the root tolerance; derivatives of a running integral are
# the integrand (in the path variable) or another running integral (in
# a parameter).  Warm-start caches make repeated nearby solves cheap;
# use one object per thread.

_WARM_CAP = 20000


class ImplicitBranchRoot:
    """The momentum branch p(y, c_1, .., c_m) solving g(y, p, c) = 0.

    ``branch`` (+1/-1) selects the sign of p searched when no better
    starting guess is available.  Solves run safeguarded Newton inside a
    bracket and iterate to a fixed point, so the result is at machine
    precision whenever the equation allows it.
    """

    def __init__(self, g, y_var, p_var, params=(), branch=1, tol=1e-12,
                 max_iter=60, p_scale=1.0, name="pbranch"):
        if branch not in (1, -1):
            raise ValueError("branch must be +1 or -1")
        self.g = g
        self.y_var = y_var
        self.p_var = p_var
        self.params = tuple(params)
        self.arg_vars = (y_var,) + self.params
        self.arity = len(self.arg_vars)
        self.branch = branch
        self.tol = float(tol)
        self.max_iter = int(max_iter)
        self.p_scale = float(p_scale)
        self.name = name
        self.g_p = differentiate(g, p_var)
        self._warm = {}
        self._last = None
        self._anchors = None
        self._partials = {}

    def __call__(self, *args):
        return self.solve(args)

    def partial(self, i):
        if i not in self._partials:
            self._partials[i] = _RootPartial(self, self.arg_vars[i])
        return self._partials[i]

    def set_anchors(self, ys, ps):
        """Install a solved table used for warm starts at arbitrary y."""
        order = np.argsort(ys)
        self._anchors = (np.asarray(ys, dtype=float)[order],
                         np.asarray(ps, dtype=float)[order])

    def bindings_at(self, args):
        b = dict(zip(self.arg_vars, args))
        b[self.p_var] = self.solve(args)
        return b

    def solve(self, args, guess=None):
        if len(args) != self.arity:
            raise ValueError(f"{self.name} expects {self.arity} arguments")
        args = tuple(float(a) for a in args)
        b = dict(zip(self.arg_vars, args))
        y = args[0]
        candidates = []
        if guess is not None:
            candidates.append(float(guess))
        hit = self._warm.get(y)
        if hit is not None:
            candidates.append(hit)
        if self._anchors is not None:
            ys, ps = self._anchors
            i = int(np.clip(np.searchsorted(ys, y), 0, ps.size - 1))
            candidates.append(float(ps[i]))
        if self._last is not None:
            candidates.append(self._last)
        p = None
        for c in candidates:
            p = self._newton(b, c)
            # a warm start may converge on the wrong side of the axis;
            # the branch contract (search from 0 toward branch * inf)
            # must not depend on cache state
            if p is not None and self.branch * p < -1e-12 * self.p_scale:
                p = None
                continue
            if p is not None:
                break
        if p is None:
            p = self._bracket_solve(b, args)
        if len(self._warm) > _WARM_CAP:
            self._warm.clear()
        self._warm[y] = p
        self._last = p
        return p

    def _g_at(self, b, p):
        b[self.p_var] = p
        return evaluate(self.g, b)

    def _gp_at(self, b, p):
        b[self.p_var] = p
        return evaluate(self.g_p, b)

    def _newton(self, b, p):
        """Newton to a floating-point fixed point; None if it fails."""
        best_p, best_g = None, math.inf
        prev = None
        for _ in range(self.max_iter):
            try:
                gv = self._g_at(b, p)
            except DomainError:
                break
            ag = abs(gv)
            if ag < best_g:
                best_p, best_g = p, ag
            if gv == 0.0:
                return p
            try:
                gpv = self._gp_at(b, p)
            except DomainError:
                break
            if gpv == 0.0:
                break
            p_new = p - gv / gpv
            if p_new == p or p_new == prev:
                break
            prev = p
            p = p_new
        if best_p is not None and best_g <= self.tol:
            return best_p
        return None

    def _bracket_solve(self, b, args):
        s = float(self.branch)
        lo = 0.0
        try:
            g_lo = self._g_at(b, lo)
        except DomainError:
            lo = s * 1e-12
            g_lo = self._g_at(b, lo)
        if g_lo == 0.0:
            return lo
        hi = s * self.p_scale
        g_hi = None
        for _ in range(70):
            try:
                g_hi = self._g_at(b, hi)
            except DomainError:
                g_hi = None
                break
            if g_lo * g_hi <= 0.0:
                break
            lo, g_lo = hi, g_hi
            hi *= 2.0
        else:
            g_hi = None
        if g_hi is None or g_lo * g_hi > 0.0:
            raise TurningPointError(args)
        return self._rtsafe(b, lo, hi, g_lo, g_hi)

    def _rtsafe(self, b, a, c, g_a, g_c):
        """Bisection-safeguarded Newton inside the bracket [a, c]."""
        x = 0.5 * (a + c)
        for _ in range(200):
            gv = self._g_at(b, x)
            if gv == 0.0:
                return x
            if g_a * gv < 0.0:
                c, g_c = x, gv
            else:
                a, g_a = x, gv
            gpv = self._gp_at(b, x)
            x_new = x - gv / gpv if gpv != 0.0 else x
            if not (min(a, c) < x_new < max(a, c)):
                x_new = 0.5 * (a + c)
            if abs(gv) <= self.tol:
                polished = self._newton(b, x_new)
                return polished if polished is not None else x
            if x_new == x:
                x_new = 0.5 * (a + c)
                if x_new == x:
                    break
            x = x_new
        if abs(self._g_at(b, x)) <= self.tol:
            return x
        raise NewtonDivergenceError(
            f"{self.name}: no convergence to tol {self.tol:.1e}")


class _RootPartial:
    """First partial of an implicit root, by implicit differentiation."""

    def __init__(self, root, wrt):
        self.root = root
        self.wrt = wrt
        self.arity = root.arity
        self.name = f"{root.name}_d{wrt}"
        self.g_u = differentiate(root.g, wrt)
        self._partials = {}

    def __call__(self, *args):
        b = self.root.bindings_at(args)
        g_p = evaluate(self.root.g_p, b)
        if g_p == 0.0:
            raise TurningPointError(args, "implicit derivative at a turning point")
        return -evaluate(self.g_u, b) / g_p

    def partial(self, i):
        if i not in self._partials:
            self._partials[i] = _RootSecondPartial(self.root, self.wrt,
                                                   self.root.arg_vars[i])
        return self._partials[i]


class _RootSecondPartial:
    """Second partial of an implicit root.

    With g(y, p(u, w), ...) = 0 and first partials p_u, p_w:
      p_uw = -(g_uw + g_up p_w + g_pw p_u + g_pp p_u p_w) / g_p
    """

    def __init__(self, root, u, w):
        self.root = root
        self.u, self.w = u, w
        self.arity = root.arity
        self.name = f"{root.name}_d{u}_d{w}"
        g, p = root.g, root.p_var
        self.g_u = differentiate(g, u)
        self.g_w = differentiate(g, w)
        self.g_uw = differentiate(self.g_u, w)
        self.g_up = differentiate(self.g_u, p)
        self.g_pw = differentiate(differentiate(g, p), w)
        self.g_pp = differentiate(root.g_p, p)

    def __call__(self, *args):
        b = self.root.bindings_at(args)
        g_p = evaluate(self.root.g_p, b)
        if g_p == 0.0:
            raise TurningPointError(args, "implicit derivative at a turning point")
        p_u = -evaluate(self.g_u, b) / g_p
        p_w = -evaluate(self.g_w, b) / g_p
        num = (evaluate(self.g_uw, b) + evaluate(self.g_up, b) * p_w
               + evaluate(self.g_pw, b) * p_u + evaluate(self.g_pp, b) * p_u * p_w)
        return -num / g_p

    def partial(self, i):
        raise NotImplementedError(
            "third-order implicit derivatives are not supported")


class TabulatedAntiderivative:
    """Antiderivative on a fixed node grid, cubic Hermite in between.

    Node values come from composite Simpson accumulation of the root;
    node derivatives are the root values themselves, so the Hermite
    interpolant is accurate to O(step^4) and its derivative object (the
    root) is exact everywhere.
    """

    arity = 1

    def __init__(self, ys, values, derivs, root, name="W"):
        self.ys = np.asarray(ys, dtype=float)
        self.values = np.asarray(values, dtype=float)
        self.derivs = np.asarray(derivs, dtype=float)
        self.root = root
        self.name = name

    def __call__(self, y):
        ys = self.ys
        y = float(y)
        if y < ys[0] - 1e-12 or y > ys[-1] + 1e-12:
            raise DomainError(
                f"{self.name}: {y} outside tabulated range [{ys[0]}, {ys[-1]}]")
        i = int(np.clip(np.searchsorted(ys, y) - 1, 0, ys.size - 2))
        h = ys[i + 1] - ys[i]
        s = (y - ys[i]) / h
        h00 = (1 + 2 * s) * (1 - s) ** 2
        h10 = s * (1 - s) ** 2
        h01 = s * s * (3 - 2 * s)
        h11 = s * s * (s - 1)
        return (h00 * self.values[i] + h * h10 * self.derivs[i]
                + h01 * self.values[i + 1] + h * h11 * self.derivs[i + 1])

    def partial(self, i):
        if i != 0:
            raise IndexError("univariate antiderivative")
        return self.root


class RunningIntegral:
    """Signed integral of a root-backed integrand from a fixed base node.

    The integration path runs along the first argument on a fixed grid
    (the remaining arguments are parameters passed through), composite
    Simpson on full sub-intervals plus a Simpson closure on the partial
    one.  partial(0) recovers the integrand; a parameter partial is the
    running integral of the integrand's parameter partial.
    """

    def __init__(self, integrand, lo, hi, n_intervals=200, name="Wint"):
        if n_intervals % 2:
            n_intervals += 1
        self.integrand = integrand
        self.arity = integrand.arity
        self.nodes = np.linspace(float(lo), float(hi), n_intervals + 1)
        self.base_index = n_intervals // 2
        self.name = name
        self._partials = {}

    @property
    def base(self):
        return self.nodes[self.base_index]

    def _simpson(self, a, c, params):
        f = self.integrand
        m = 0.5 * (a + c)
        return (c - a) / 6.0 * (f(a, *params) + 4.0 * f(m, *params) + f(c, *params))

    def __call__(self, y, *params):
        nodes = self.nodes
        y = float(y)
        if y < nodes[0] - 1e-12 or y > nodes[-1] + 1e-12:
            raise DomainError(
                f"{self.name}: {y} outside quadrature range [{nodes[0]}, {nodes[-1]}]")
        b = self.base_index
        total = 0.0
        if y >= nodes[b]:
            j = int(np.clip(np.searchsorted(nodes, y) - 1, 0, nodes.size - 2))
            for i in range(b, j):
                total += self._simpson(nodes[i], nodes[i + 1], params)
            lo = nodes[max(j, b)]
            if y > lo:
                total += self._simpson(lo, y, params)
        else:
            j = int(np.clip(np.searchsorted(nodes, y), 0, nodes.size - 1))
            for i in range(b, j, -1):
                total -= self._simpson(nodes[i - 1], nodes[i], params)
            hi = nodes[min(j, b)]
            if y < hi:
                total -= self._simpson(y, hi, params)
        return total

    def partial(self, i):
        if i == 0:
            return self.integrand
        if i not in self._partials:
            self._partials[i] = RunningIntegral(
                self.integrand.partial(i), self.nodes[0], self.nodes[-1],
                self.nodes.size - 1, name=f"{self.name}_d{i}")
        return self._partials[i]


# ---------------------------------------------------------------------------
# One-degree-of-freedom solution by quadrature.

def solve_reduced_1d(h_reduced, y_var, p_var, energy, y_range, branch=1,
                     n_nodes=2001, tol=1e-12):
    """Solve h(y, W'(y)) = E for W on an interval, by quadrature.

    W'(y) is the momentum root on the chosen branch at each of the
    ``n_nodes`` uniformly spaced nodes (Newton warm-started from the
    neighboring node, bisection fallback); W accumulates by composite
    Simpson with midpoint roots.  Returns a :class:`QuadratureSolution`
    whose component evaluates the root exactly at any y (not just at
    the nodes) and whose potential interpolates the table.

    Raises TurningPointError if the branch root disappears or its
    momentum derivative falls below a safety margin anywhere on the
    range, and BranchAmbiguityError if h is not monotone in p there.
    """
    if n_nodes < 3:
        raise ValueError("need at least 3 nodes")
    lo, hi = float(y_range[0]), float(y_range[1])
    if not lo < hi:
        raise ValueError("empty range")
    g = sub(h_reduced, Const(float(energy)))
    root = ImplicitBranchRoot(g, y_var, p_var, branch=branch, tol=tol,
                              name="dW" if y_var != "dW" else "dW_")
    ys = np.linspace(lo, hi, int(n_nodes))
    ps = np.empty(ys.size)
    sign_ref = 0.0
    guess = None
    for i, y in enumerate(ys):
        p = root.solve((y,), guess=guess)
        gp = root._gp_at({y_var: y}, p)
        if abs(gp) < 1e-6 * (1.0 + abs(p)):
            raise TurningPointError(
                y, f"momentum derivative vanishes near y={y}: turning point margin hit")
        s = math.copysign(1.0, gp)
        if sign_ref == 0.0:
            sign_ref = s
        elif s != sign_ref:
            raise BranchAmbiguityError(
                f"equation is not monotone in {p_var} on the branch (y={y})")
        ps[i] = p
        guess = p
    # sampled monotonicity between the current root and the axis
    chk = np.linspace(lo, hi, 17)
    for y in chk:
        p_root = root.solve((y,))
        for frac in (0.25, 0.5, 0.75):
            try:
                gp = root._gp_at({y_var: y}, frac * p_root)
            except DomainError:
                continue
            if gp * sign_ref < 0.0:
                raise BranchAmbiguityError(
                    f"equation is not monotone in {p_var} between 0 and the root (y={y})")
    values = np.empty(ys.size)
    values[0] = 0.0
    for i in range(ys.size - 1):
        a, c = ys[i], ys[i + 1]
        pm = root.solve((0.5 * (a + c),), guess=ps[i])
        values[i + 1] = values[i] + (c - a) / 6.0 * (ps[i] + 4.0 * pm + ps[i + 1])
    root.set_anchors(ys, ps)
    table = TabulatedAntiderivative(ys, values, ps, root)
    potential = External(table, (Var(y_var),))
    component = External(root, (Var(y_var),))
    return QuadratureSolution((y_var,), (component,), potential, table, root,
                              energy, (lo, hi))


# ---------------------------------------------------------------------------
# Generating functions.

class GeneratingFunction:
    """S(t, q, c) with c the new coordinates: parameters of the family.

    kind "typeI": c are the new positions and the transform reads
    p = dS/dq, new momentum = -dS/dc.  kind "typeII": c are the new
    momenta and p = dS/dq, new position = dS/dc; the identity map has
    S = sum_i q^i c_i.  Second partials are built symbolically once and
    cached, so Jacobians of the induced implicit maps are exact.
    """

    KINDS = ("typeI", "typeII")

    def __init__(self, kind, s, q_vars, params, t_var="t", absent_ok=()):
        if kind not in self.KINDS:
            raise ValueError(f"kind must be one of {self.KINDS}")
        self.kind = kind
        self.s = parse(s) if isinstance(s, str) else s
        self.q_vars = tuple(q_vars)
        self.params = tuple(params)
        self.t_var = t_var
        declared = set(self.q_vars) | set(self.params) | {t_var}
        if len(self.q_vars) + len(self.params) + 1 != len(declared):
            raise ValueError("variable names must be distinct")
        free = self.s.free_vars()
        extra = free - declared
        if extra:
            raise ValueError(f"S uses undeclared variables: {sorted(extra)}")
        missing = (set(self.q_vars) | set(self.params)) - free - set(absent_ok)
        if missing:
            raise ValueError(
                f"declared variables absent from S: {sorted(missing)} "
                "(list them in absent_ok if intended)")
        self._cache = {}

    @property
    def n(self):
        return len(self.q_vars)

    def _d(self, key, base, var):
        full = (key, var)
        if full not in self._cache:
            self._cache[full] = differentiate(base, var)
        return self._cache[full]

    def s_t(self):
        return self._d("s", self.s, self.t_var)

    def s_q(self, i):
        return self._d("s", self.s, self.q_vars[i])

    def s_param(self, i):
        return self._d("s", self.s, self.params[i])

    def s_qq(self, i, j):
        return self._d(("q", i), self.s_q(i), self.q_vars[j])

    def s_qparam(self, i, j):
        """Mixed second partial d2 S / dq_i dparam_j."""
        return self._d(("q", i), self.s_q(i), self.params[j])

    def s_paramparam(self, i, j):
        return self._d(("c", i), self.s_param(i), self.params[j])

    def bindings(self, q, c, t=0.0):
        b = dict(zip(self.q_vars, np.atleast_1d(q)))
        b.update(zip(self.params, np.atleast_1d(c)))
        b[self.t_var] = float(t)
        return b

    def __repr__(self):
        return f"GeneratingFunction({self.kind}, {self.s})"


def time_extension(form, energy, t_var="t"):
    """Promote a fixed-energy solution W to a time-dependent one.

    Returns the generating function S = W - E t, which satisfies
    dS/dt + h(q, dS/dq) = 0 whenever h(q, dW/dq) = E.  (The additive
    constant freedom of W absorbs any other convention.)
    """
    if form.potential is None:
        raise ValueError("the form must carry a potential to extend")
    s = sub(form.potential, mul(Const(float(energy)), Var(t_var)))
    return GeneratingFunction("typeI", s, q_vars=form.coords, params=(),
                              t_var=t_var)


def _deviation_arrays(gf, sys, points, singular_tol=0.0):
    """|dS/dt + h(q, dS/dq)| sample by sample over a dict of columns."""
    if tuple(gf.q_vars) != tuple(sys.coords):
        raise ValueError("generating function and system coordinates differ")
    cols = {k: np.atleast_1d(np.asarray(v, dtype=float)) for k, v in points.items()}
    sizes = {v.size for v in cols.values()}
    if len(sizes) != 1:
        raise ValueError("all point columns must have equal length")
    n_pts = sizes.pop()
    if gf.t_var not in cols:
        cols[gf.t_var] = np.zeros(n_pts)
    s_t = gf.s_t()
    s_q = [gf.s_q(i) for i in range(gf.n)]
    devs = np.empty(n_pts)
    for idx in range(n_pts):
        b = {k: v[idx] for k, v in cols.items()}
        pvals = [e.evaluate(b, singular_tol) for e in s_q]
        hb = dict(b)
        hb.update(zip(sys.momenta, pvals))
        devs[idx] = s_t.evaluate(b, singular_tol) + sys.h.evaluate(hb, singular_tol)
    return np.abs(devs)


def time_dependent_residual(gf, sys, points, singular_tol=0.0):
    """max |dS/dt + h(q, dS/dq)| over sample points (a dict of columns)."""
    return float(np.max(_deviation_arrays(gf, sys, points, singular_tol)))


@dataclass
class CompletenessReport:
    hj_max_dev: float
    min_abs_det: float
    complete: bool


def check_complete(gf, sys, points, tol=1e-8, det_floor=1e-6, singular_tol=0.0):
    """Is S(t, q, c) a complete solution over the sampled points?

    Complete means the extended residual dS/dt + h(q, dS/dq) vanishes
    (within tol) and the family is non-degenerate: the mixed-partial
    determinant det(d2 S / dq dc) stays away from zero (above det_floor)
    at every sample, parameters included.
    """
    if not gf.params:
        raise ValueError("a complete solution needs at least one parameter")
    if len(gf.params) != gf.n:
        raise ValueError("need as many parameters as coordinates")
    devs = _deviation_arrays(gf, sys, points, singular_tol)
    cols = {k: np.atleast_1d(np.asarray(v, dtype=float)) for k, v in points.items()}
    n_pts = len(devs)
    if gf.t_var not in cols:
        cols[gf.t_var] = np.zeros(n_pts)
    n = gf.n
    mixed = [[gf.s_qparam(i, j) for j in range(n)] for i in range(n)]
    min_det = math.inf
    for idx in range(n_pts):
        b = {k: v[idx] for k, v in cols.items()}
        mat = np.array([[mixed[i][j].evaluate(b, singular_tol)
                         for j in range(n)] for i in range(n)])
        d = abs(float(np.linalg.det(mat)))
        if d < min_det:
            min_det = d
    hj_max = float(np.max(devs))
    return CompletenessReport(hj_max_dev=hj_max, min_abs_det=float(min_det),
                              complete=(hj_max <= tol and min_det >= det_floor))


def quadrature_complete_solution(sys, q_range, branch=1, n_quad=200,
                                 param="a1", tol=1e-12):
    """Complete solution family for a one-degree-of-freedom system.

    For each value of the parameter (the energy of the family member)
    the momentum solves h(q, p) = param on the chosen branch, and
    S(t, q, param) = W(q, param) - t param with W the running integral
    of that root from the middle of ``q_range``.  All partials needed
    by the transforms are exact implicit derivatives.
    """
    if sys.n != 1:
        raise ValueError("quadrature families are built for 1-d systems")
    qv, pv = sys.coords[0], sys.momenta[0]
    if param in (qv, pv, sys.t_var):
        raise ValueError("parameter name collides with a coordinate")
    g = sub(sys.h, Var(param))
    root = ImplicitBranchRoot(g, qv, pv, params=(param,), branch=branch,
                              tol=tol, name="dW_family")
    w = RunningIntegral(root, q_range[0], q_range[1], n_intervals=n_quad,
                        name="W_family")
    s = sub(External(w, (Var(qv), Var(param))), mul(Var(sys.t_var), Var(param)))
    return GeneratingFunction("typeI", s, q_vars=(qv,), params=(param,),
                              t_var=sys.t_var)


# ---------------------------------------------------------------------------
# Cyclic-variable ansatz and the symmetric heavy top.

@dataclass
class CyclicAnsatz:
    """W = sum_l q^l beta_l + V(rest) and the induced equation for V.

    ``equation`` is h with each cyclic momentum replaced by its beta
    and each remaining momentum replaced by the named slot standing for
    the corresponding partial dV/dq; a solution V must make it equal to
    the separation constant.
    """
    cyclic_vars: tuple
    remaining_vars: tuple
    slot_vars: tuple
    betas: tuple
    equation: Expr
    w_prefix: Expr


def cyclic_ansatz(sys, cyclic_vars, betas, tol=1e-9, samples=20, seed=42):
    """Separate cyclic variables with linear terms in W.

    Preconditions (sampled): every listed variable is genuinely cyclic,
    i.e. h does not change when it is varied.  ``betas`` may be numbers
    or variable names to keep symbolic.
    """
    cyclic_vars = tuple(sys.coords[v] if isinstance(v, int) else v
                        for v in cyclic_vars)
    for v in cyclic_vars:
        if v not in sys.coords:
            raise ValueError(f"'{v}' is not a coordinate of the system")
    if len(betas) != len(cyclic_vars):
        raise ValueError("need one beta per cyclic variable")
    rng = np.random.default_rng(seed)
    names = sorted(sys.h.free_vars())
    for v in cyclic_vars:
        done = 0
        attempts = 0
        while done < samples and attempts < 50 * samples:
            attempts += 1
            b = {nm: rng.uniform(-2.0, 2.0) for nm in names}
            b2 = dict(b)
            b2[v] = rng.uniform(-2.0, 2.0)
            try:
                f1 = sys.h.evaluate(b)
                f2 = sys.h.evaluate(b2)
            except DomainError:
                continue
            if abs(f1 - f2) > tol * (1.0 + abs(f1)):
                raise PreconditionError(
                    f"'{v}' is not cyclic in the hamiltonian", witness=b)
            done += 1
        if done < samples:
            raise PreconditionError(f"could not sample cyclicity of '{v}'")
    beta_exprs = tuple(Var(x) if isinstance(x, str) else Const(float(x))
                       for x in betas)
    remaining = tuple(v for v in sys.coords if v not in cyclic_vars)
    slots = tuple(f"dV_d{v}" for v in remaining)
    mapping = {}
    for v, be in zip(cyclic_vars, beta_exprs):
        mapping[sys.momenta[sys.coords.index(v)]] = be
    for v, slot in zip(remaining, slots):
        mapping[sys.momenta[sys.coords.index(v)]] = Var(slot)
    equation = substitute(sys.h, mapping)
    w_prefix = Const(0.0)
    for v, be in zip(cyclic_vars, beta_exprs):
        w_prefix = w_prefix + Var(v) * be
    return CyclicAnsatz(cyclic_vars, remaining, slots, beta_exprs,
                        equation, w_prefix)


def cyclic_complete_solution(sys, cyclic_vars, remaining_range, branch=1,
                             n_quad=200, tol=1e-12):
    """Complete-solution family from a cyclic separation.

    With all but one coordinate cyclic, W separates as
    sum_l q^l b_{l+1} + V(q_rest) and V's derivative solves the induced
    1-D equation with separation constant b1.  The returned family

        S = -t b1 + sum_l q^l b_{l+1} + V(q_rest, b1, b2, ...)

    is a new-momenta (typeII) generating function; its mixed-partial
    determinant reduces to dV'/db1, so non-degeneracy is exactly the
    implicit-root condition.  V is a running integral of the root over
    ``remaining_range`` with parameters kept symbolic.
    """
    cyclic_vars = tuple(sys.coords[v] if isinstance(v, int) else v
                        for v in cyclic_vars)
    remaining = tuple(v for v in sys.coords if v not in cyclic_vars)
    if len(remaining) != 1:
        raise ValueError("the family needs exactly one non-cyclic coordinate")
    params = tuple(f"b{i+1}" for i in range(len(cyclic_vars) + 1))
    taken = set(sys.coords) | set(sys.momenta) | {sys.t_var}
    clash = taken & set(params)
    if clash:
        raise ValueError(f"parameter names collide with the system: {sorted(clash)}")
    sym = cyclic_ansatz(sys, cyclic_vars, params[1:])
    rest = remaining[0]
    p_rest = sys.momenta[sys.coords.index(rest)]
    g_fam = sub(substitute(sym.equation, {sym.slot_vars[0]: Var(p_rest)}),
                Var(params[0]))
    root = ImplicitBranchRoot(g_fam, rest, p_rest, params=params,
                              branch=branch, tol=tol, name="dW_family")
    w_fam = RunningIntegral(root, remaining_range[0], remaining_range[1],
                            n_intervals=n_quad, name="W_family")
    s = External(w_fam, tuple(Var(v) for v in (rest,) + params))
    for v, b in zip(cyclic_vars, params[1:]):
        s = s + Var(v) * Var(b)
    s = s - Var(sys.t_var) * Var(params[0])
    return GeneratingFunction("typeII", s, q_vars=sys.coords, params=params,
                              t_var=sys.t_var)


@dataclass
class HeavyTopSolution:
    """Quadrature solution of the symmetric-top separated equation."""
    system: object
    ansatz: CyclicAnsatz
    solution: QuadratureSolution
    generating_function: GeneratingFunction
    energy: float


def heavy_top_system(i_moment, j_moment, mass, gravity, arm):
    """Symmetric top (two equal inertia moments) about a fixed point.

    Euler angles (theta, phi, psi) with conjugate momenta; the weight
    enters through mass * gravity * arm times cos(theta).
    """
    mgl = float(mass) * float(gravity) * float(arm)
    i_m, j_m = float(i_moment), float(j_moment)
    h = (f"0.5*(ptheta^2/{i_m!r}"
         f" + (pphi-ppsi*cos(theta))^2/({i_m!r}*sin(theta)^2)"
         f" + ppsi^2/{j_m!r})"
         f" + {mgl!r}*cos(theta)")
    from .phase_space import HamiltonianSystem
    return HamiltonianSystem(h, ("theta", "phi", "psi"),
                             ("ptheta", "pphi", "ppsi"))


def solve_heavy_top(i_moment, j_moment, mass, gravity, arm, beta2, beta3,
                    energy, theta_range, n_nodes=2001, n_quad=200):
    """Separated solution of the symmetric top by quadrature.

    phi and psi are cyclic; W = phi beta2 + psi beta3 + V(theta) where
    dV/dtheta solves
      (1/2)((dV/dtheta)^2/I + (beta2 - beta3 cos theta)^2/(I sin^2 theta)
            + beta3^2/J) + m g l cos theta = F
    on the positive branch.  Also builds the three-parameter family
    S = -t b1 + phi b2 + psi b3 + V(theta, b1, b2, b3) whose mixed
    partials witness non-degeneracy (b1 is the separation constant).

    A range containing sin(theta) = 0 surfaces the gimbal singularity
    as a domain error; energies too low for the effective potential
    raise TurningPointError.
    """
    sys = heavy_top_system(i_moment, j_moment, mass, gravity, arm)
    ans = cyclic_ansatz(sys, ("phi", "psi"), (float(beta2), float(beta3)))
    slot = ans.slot_vars[0]
    sol = solve_reduced_1d(ans.equation, "theta", slot, float(energy),
                           theta_range, branch=1, n_nodes=n_nodes)
    gf = cyclic_complete_solution(sys, ("phi", "psi"), theta_range,
                                  n_quad=n_quad)
    return HeavyTopSolution(system=sys, ansatz=ans, solution=sol,
                            generating_function=gf, energy=float(energy))


# ---------------------------------------------------------------------------
# Additive splitting over a product with a translation-group factor.

@dataclass
class SplitReport:
    """S = S_reduced + S_group + constant, with the sup residual."""
    s_reduced: Expr
    s_group: Expr
    mu: np.ndarray
    constant: float
    residual: float


def additive_split_check(s, coords, action, grid, mu=None, tol=1e-9):
    """Split a generating function over base x group coordinates.

    Precondition: the graph of dS sits inside one momentum level, i.e.
    G^T grad S is constant over the grid (within tol, witness reported
    otherwise).  Then S_group = sum_a mu_a x^a in the group coordinates
    x = (G^T G)^{-1} G^T q, S_reduced is S restricted to the zero fiber,
    and the residual of S = S_reduced + S_group + c is returned.
    """
    coords = tuple(coords)
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    g_mat = np.asarray(action.matrix, dtype=float)
    if g_mat.shape[0] != len(coords):
        raise ValueError("action dimension does not match the coordinates")
    grads = [differentiate(s, v) for v in coords]
    j_vals = np.empty((grid.shape[0], g_mat.shape[1]))
    for idx, point in enumerate(grid):
        b = dict(zip(coords, point))
        gv = np.array([e.evaluate(b) for e in grads])
        j_vals[idx] = g_mat.T @ gv
    ref = np.asarray(mu, dtype=float) if mu is not None else j_vals[0]
    scale = 1.0 + float(np.max(np.abs(j_vals))) if j_vals.size else 1.0
    dev = np.abs(j_vals - ref)
    if j_vals.size and float(np.max(dev)) > tol * scale:
        worst = int(np.argmax(np.max(dev, axis=1)))
        raise PreconditionError(
            "dS does not stay on one momentum level",
            witness={"point": grid[worst].tolist(),
                     "momentum": j_vals[worst].tolist(),
                     "expected": ref.tolist()})
    mu = ref
    x_block = _linalg.group_projection(g_mat)
    y_block = _linalg.left_null_basis(g_mat)
    t_mat = np.vstack([y_block, x_block])
    fiber_zero = np.linalg.inv(t_mat)[:, :y_block.shape[0]] @ y_block
    s_group = Const(0.0)
    for a in range(g_mat.shape[1]):
        x_a = Const(0.0)
        for i, v in enumerate(coords):
            x_a = x_a + Const(x_block[a, i]) * Var(v)
        s_group = s_group + Const(mu[a]) * x_a
    mapping = {}
    for i, v in enumerate(coords):
        repl = Const(0.0)
        for jj, w in enumerate(coords):
            repl = repl + Const(fiber_zero[i, jj]) * Var(w)
        mapping[v] = repl
    s_reduced = substitute(s, mapping)
    def total(point):
        b = dict(zip(coords, point))
        return (s.evaluate(b) - s_reduced.evaluate(b) - s_group.evaluate(b))
    constant = total(grid[0])
    residual = max(abs(total(pt) - constant) for pt in grid)
    return SplitReport(s_reduced=s_reduced, s_group=s_group, mu=np.array(mu),
                       constant=float(constant), residual=float(residual))
