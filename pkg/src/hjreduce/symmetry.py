"""Translation symmetries and their conserved momenta.

An action of R^k on configuration space R^n by commuting translations
q -> q + G g (G the n-by-k matrix of generator directions) lifts to
phase space leaving the momenta untouched.  The lift conserves the
linear momentum map J(q, p) = G^T p for any invariant hamiltonian.

Invariance of functions and 1-forms is checked by seeded sampling:
translate the configuration variables by random group elements and
compare.  ``check_invariance_lemma`` tests, on a concrete closed form,
the equivalence between invariance of the form and constancy of the
momentum map along its graph.
"""

from __future__ import annotations

import numpy as np

from .expr import DomainError, parse
from .phase_space import PhasePoint

__all__ = [
    "TranslationAction", "cotangent_lift", "momentum_map",
    "is_invariant", "invariance_report", "check_invariance_lemma",
]


class TranslationAction:
    """q -> q + G g for g in R^k.

    ``generators`` lists the k direction vectors (length n each); they
    become the columns of G and must be linearly independent.  k = 0 is
    allowed (trivial action) but then ``n`` must be given.
    """

    def __init__(self, generators, n=None):
        arr = np.asarray(generators, dtype=float)
        if arr.size == 0:
            if n is None:
                raise ValueError("an empty action needs an explicit n")
            self.matrix = np.zeros((int(n), 0))
        else:
            if arr.ndim == 1:
                arr = arr[None, :]
            if arr.ndim != 2:
                raise ValueError("generators must be vectors of equal length")
            if n is not None and arr.shape[1] != int(n):
                raise ValueError(
                    f"generators have length {arr.shape[1]}, expected {n}")
            self.matrix = arr.T.copy()
            if np.linalg.matrix_rank(self.matrix) < self.matrix.shape[1]:
                raise ValueError("generators are linearly dependent")
        self.matrix.setflags(write=False)

    @property
    def n(self):
        return self.matrix.shape[0]

    @property
    def k(self):
        return self.matrix.shape[1]

    def translate(self, q, g):
        """Apply the group element g to a configuration point."""
        q = np.asarray(q, dtype=float)
        g = np.atleast_1d(np.asarray(g, dtype=float))
        if g.size != self.k:
            raise ValueError(f"group element must have {self.k} entries")
        return q + self.matrix @ g

    def __repr__(self):
        return f"TranslationAction(n={self.n}, k={self.k})"


def cotangent_lift(action, g, z):
    """Lifted action on phase space: shifts q, leaves p unchanged."""
    return PhasePoint(action.translate(z.q, g), z.p, t=z.t)


def momentum_map(action, z):
    """Conserved momenta J = G^T p of the lifted action at a point."""
    if isinstance(z, PhasePoint):
        p = z.p
    else:
        flat = np.asarray(z, dtype=float)
        p = flat[flat.size // 2:]
    return action.matrix.T @ p


def invariance_report(action, f, coords, samples=50, tol=1e-9, seed=42,
                      box=2.0):
    """Sampled invariance of a scalar expression under the action.

    Every free variable of ``f`` is drawn uniformly from [-box, box];
    the variables listed in ``coords`` (the configuration block the
    action moves) are then translated by a random group element and the
    values compared with a relative-scaled tolerance.  Samples where
    either evaluation hits a domain error are redrawn.
    """
    f = parse(f) if isinstance(f, str) else f
    coords = tuple(coords)
    if len(coords) != action.n:
        raise ValueError("coords must list one name per action dimension")
    rng = np.random.default_rng(seed)
    names = sorted(f.free_vars())
    max_dev = 0.0
    witness = None
    done = 0
    attempts = 0
    while done < samples and attempts < 50 * max(samples, 1):
        attempts += 1
        b = {nm: rng.uniform(-box, box) for nm in names}
        g = rng.uniform(-1.0, 1.0, size=action.k)
        q = np.array([b.get(c, 0.0) for c in coords])
        q_shift = action.translate(q, g)
        b2 = dict(b)
        b2.update(zip(coords, q_shift))
        try:
            v1 = f.evaluate(b)
            v2 = f.evaluate(b2)
        except DomainError:
            continue
        dev = abs(v2 - v1) / (1.0 + abs(v1))
        if dev > max_dev:
            max_dev = dev
            if dev > tol:
                witness = {"point": b, "shift": g.tolist(),
                           "values": (v1, v2)}
        done += 1
    if done < samples:
        raise ValueError("could not draw enough domain-valid samples")
    return {"ok": max_dev <= tol, "max_rel_dev": float(max_dev),
            "witness": witness}


def is_invariant(action, f, coords, samples=50, tol=1e-9, seed=42):
    """True if sampled translates of f agree within a relative tol."""
    return invariance_report(action, f, coords, samples=samples, tol=tol,
                             seed=seed)["ok"]


def check_invariance_lemma(action, form, grid, tol=1e-9, seed=42):
    """Both sides of the momentum-level lemma for one closed form.

    Along the graph q -> (q, form(q)) the momenta J = G^T form(q) are
    computed over the grid; their spread (max minus min, per component,
    worst case) is one side.  The other side is sampled invariance of
    every component under random translations of the grid points.  The
    report records both numbers, the two booleans, and whether they
    agree.
    """
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    if grid.shape[1] != action.n:
        raise ValueError("grid points must match the action dimension")
    j_vals = np.empty((grid.shape[0], action.k))
    for idx, q in enumerate(grid):
        j_vals[idx] = action.matrix.T @ form.values(q)
    if j_vals.size:
        j_spread = float(np.max(np.max(j_vals, axis=0) - np.min(j_vals, axis=0)))
    else:
        j_spread = 0.0
    rng = np.random.default_rng(seed)
    inv_dev = 0.0
    for q in grid:
        g = rng.uniform(-1.0, 1.0, size=action.k)
        try:
            v1 = form.values(q)
            v2 = form.values(action.translate(q, g))
        except DomainError:
            continue
        dev = float(np.max(np.abs(v2 - v1))) if v1.size else 0.0
        if dev > inv_dev:
            inv_dev = dev
    j_constant = j_spread <= tol
    invariant = inv_dev <= tol
    return {
        "j_spread": j_spread,
        "invariance_dev": inv_dev,
        "j_constant": j_constant,
        "invariant": invariant,
        "consistent": j_constant == invariant,
    }
