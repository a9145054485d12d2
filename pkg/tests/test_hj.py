import math

import numpy as np
import pytest
from scipy.integrate import quad

from hjreduce.expr import (Const, DomainError, Var, call, parse)
from hjreduce.hj import (BranchAmbiguityError, GeneratingFunction,
                         ImplicitBranchRoot, OneForm, PreconditionError,
                         RunningIntegral, SolveError, TurningPointError,
                         additive_split_check, check_complete,
                         closedness_residual, cyclic_ansatz,
                         cyclic_complete_solution, heavy_top_system,
                         hj_residual, mesh_grid, quadrature_complete_solution,
                         random_grid, solve_heavy_top, solve_reduced_1d,
                         time_dependent_residual, time_extension)
from hjreduce.phase_space import HamiltonianSystem, PhasePoint
from hjreduce.symmetry import TranslationAction
from oracles import fd_derivative

REDUCED_PAIR_H = "p^2+1/q^2"


@pytest.fixture(scope="module")
def reduced_pair():
    return HamiltonianSystem(parse(REDUCED_PAIR_H), ["q"])


@pytest.fixture(scope="module")
def pair_solution(reduced_pair):
    return solve_reduced_1d(reduced_pair.h, "q", "p", 2.0, (0.8, 5.0))


class TestGrids:
    def test_mesh_grid(self):
        g = mesh_grid([(0, 1), (10, 12)], [3, 2])
        assert g.shape == (6, 2)
        assert g[0].tolist() == [0, 10]
        assert g[-1].tolist() == [1, 12]

    def test_mesh_grid_scalar_count(self):
        assert mesh_grid([(0, 1)], 5).shape == (5, 1)

    def test_random_grid_seeded(self):
        a = random_grid([(-1, 1), (2, 3)], 20, seed=5)
        b = random_grid([(-1, 1), (2, 3)], 20, seed=5)
        np.testing.assert_array_equal(a, b)
        assert a.shape == (20, 2)
        assert a[:, 1].min() >= 2 and a[:, 1].max() <= 3


class TestOneForm:
    def test_exact_components(self):
        f = OneForm.exact(parse("x*y^2"), ("x", "y"))
        np.testing.assert_allclose(f.values([2.0, 3.0]), [9.0, 12.0])
        assert f.potential is not None

    def test_component_strings(self):
        f = OneForm(("x",), components=("2*x",))
        assert f.values([3.0])[0] == 6.0

    def test_zero(self):
        f = OneForm.zero(("a", "b"))
        np.testing.assert_array_equal(f.values([1.0, 2.0]), [0.0, 0.0])

    def test_requires_something(self):
        with pytest.raises(ValueError):
            OneForm(("x",))


class TestClosedness:
    def test_exact_forms_closed(self):
        f = OneForm.exact(parse("sin(x*y)"), ("x", "y"))
        grid = random_grid([(-1, 1), (-1, 1)], 25, seed=1)
        assert closedness_residual(f, grid) < 1e-14

    def test_non_closed(self):
        f = OneForm(("x", "y"), components=(Var("y"), Const(0.0)))
        grid = random_grid([(-1, 1), (-1, 1)], 25, seed=1)
        assert closedness_residual(f, grid) == pytest.approx(1.0, abs=1e-12)


class TestHJResidual:
    def test_exact_solution(self, reduced_pair):
        # W'(q) = sqrt(2 - 1/q^2) solves p^2 + 1/q^2 = 2
        form = OneForm(("q",), components=("sqrt(2-1/q^2)",))
        grid = mesh_grid([(0.8, 5.0)], [80])
        rep = hj_residual(reduced_pair, form, grid)
        assert rep.e_est == pytest.approx(2.0, abs=1e-14)
        assert rep.max_dev < 1e-14

    def test_wrong_coords_rejected(self, reduced_pair):
        form = OneForm(("z",), components=("z",))
        with pytest.raises(ValueError):
            hj_residual(reduced_pair, form, mesh_grid([(0.8, 2.0)], [5]))

    def test_non_closed_precondition(self):
        s = HamiltonianSystem(parse("0.5*(p1^2+p2^2)"), ["q1", "q2"])
        form = OneForm(("q1", "q2"), components=(Var("q2"), Const(0.0)))
        with pytest.raises(PreconditionError):
            hj_residual(s, form, random_grid([(-1, 1), (-1, 1)], 10))


class TestImplicitBranchRoot:
    """Root of p^2 + y p - a = 0; closed form (-y + sqrt(y^2+4a))/2."""

    @staticmethod
    def closed(y, a):
        return 0.5 * (-y + math.sqrt(y * y + 4 * a))

    @pytest.fixture()
    def root(self):
        g = parse("p^2+y*p-a")
        return ImplicitBranchRoot(g, "y", "p", params=("a",), branch=1)

    def test_solve_matches_closed_form(self, root):
        rng = np.random.default_rng(6)
        for _ in range(40):
            y = float(rng.uniform(-2, 2))
            a = float(rng.uniform(0.5, 3.0))
            assert root.solve((y, a)) == pytest.approx(self.closed(y, a),
                                                       rel=1e-13)

    def test_negative_branch(self):
        g = parse("p^2-a")
        r = ImplicitBranchRoot(g, "y", "p", params=("a",), branch=-1)
        assert r.solve((0.0, 4.0)) == pytest.approx(-2.0, rel=1e-13)

    def test_call_protocol(self, root):
        assert root.arity == 2
        assert root(1.0, 2.0) == pytest.approx(self.closed(1.0, 2.0))

    def test_first_partials_vs_closed_form(self, root):
        dy = root.partial(0)
        da = root.partial(1)
        for y, a in ((0.3, 1.0), (-1.2, 2.5), (1.7, 0.8)):
            s = math.sqrt(y * y + 4 * a)
            assert dy(y, a) == pytest.approx(0.5 * (-1 + y / s), rel=1e-12)
            assert da(y, a) == pytest.approx(1.0 / s, rel=1e-12)

    def test_first_partials_vs_fd(self, root):
        dy = root.partial(0)
        assert dy(0.4, 1.3) == pytest.approx(
            fd_derivative(lambda y: root.solve((y, 1.3)), 0.4), abs=1e-8)

    def test_second_partials_vs_fd(self, root):
        dyy = root.partial(0).partial(0)
        dya = root.partial(0).partial(1)
        got = dyy(0.4, 1.3)
        num = fd_derivative(lambda y: root.partial(0)(y, 1.3), 0.4)
        assert got == pytest.approx(num, abs=1e-7)
        got = dya(0.4, 1.3)
        num = fd_derivative(lambda a: root.partial(0)(0.4, a), 1.3)
        assert got == pytest.approx(num, abs=1e-7)

    def test_third_partials_not_implemented(self, root):
        with pytest.raises(NotImplementedError):
            root.partial(0).partial(0).partial(0)

    def test_no_root_raises_turning_point(self):
        g = parse("p^2+1")
        r = ImplicitBranchRoot(g, "y", "p", branch=1)
        with pytest.raises(TurningPointError):
            r.solve((0.0,))

    def test_anchors_warm_start(self, root):
        ys = np.linspace(-1, 1, 11)
        root.set_anchors(ys, [self.closed(y, 1.0) for y in ys])
        assert root.solve((0.37, 1.0)) == pytest.approx(
            self.closed(0.37, 1.0), rel=1e-13)

    def test_explicit_guess(self, root):
        assert root.solve((0.5, 1.0), guess=0.6) == pytest.approx(
            self.closed(0.5, 1.0), rel=1e-13)


class FnIntegrand:
    """Plain-function integrand adapter for RunningIntegral tests."""

    def __init__(self, f, partials=()):
        self.f = f
        self.arity = 1 + len(partials)
        self.partials = partials

    def __call__(self, *args):
        return self.f(*args)

    def partial(self, i):
        return self.partials[i]


class TestRunningIntegral:
    def test_vs_scipy_quad(self):
        f = FnIntegrand(lambda y: math.exp(-y * y))
        w = RunningIntegral(f, 0.0, 2.0, n_intervals=200)
        base = w.base
        for y in (0.0, 0.31, 1.0, 1.73, 2.0):
            ref = quad(lambda s: math.exp(-s * s), base, y,
                       epsabs=1e-13)[0]
            assert w(y) == pytest.approx(ref, abs=1e-9)

    def test_signed_below_base(self):
        f = FnIntegrand(lambda y: 1.0 + 0.0 * y)
        w = RunningIntegral(f, -1.0, 1.0, n_intervals=100)
        assert w.base == 0.0
        assert w(-0.5) == pytest.approx(-0.5, abs=1e-13)
        assert w(0.5) == pytest.approx(0.5, abs=1e-13)

    def test_outside_range(self):
        f = FnIntegrand(lambda y: y)
        w = RunningIntegral(f, 0.0, 1.0)
        with pytest.raises(DomainError):
            w(1.5)

    def test_partial_zero_is_integrand(self):
        f = FnIntegrand(lambda y: y)
        w = RunningIntegral(f, 0.0, 1.0)
        assert w.partial(0) is f

    def test_parameter_partial(self):
        # root of p^2 = a gives W(y, a) = (y - base) sqrt(a);
        # dW/da = (y - base) / (2 sqrt(a)), again a running integral
        root = ImplicitBranchRoot(parse("p^2-a"), "y", "p", params=("a",),
                                  branch=1)
        w = RunningIntegral(root, 0.0, 2.0, n_intervals=100)
        wa = w.partial(1)
        y, a = 1.5, 2.2
        expect = (y - w.base) / (2 * math.sqrt(a))
        assert wa(y, a) == pytest.approx(expect, rel=1e-10)
        assert w(y, a) == pytest.approx((y - w.base) * math.sqrt(a),
                                        rel=1e-12)


class TestSolveReduced1D:
    def test_node_residual(self, reduced_pair, pair_solution):
        sol = pair_solution
        worst = 0.0
        for y, p in zip(sol.table.ys, sol.table.derivs):
            worst = max(worst, abs(p * p + 1 / y ** 2 - 2.0))
        assert worst <= 1e-10

    def test_root_off_node_frozen(self, pair_solution):
        assert pair_solution.root.solve((2.0,)) == pytest.approx(
            math.sqrt(2 - 0.25), rel=1e-14)
        assert pair_solution.root.solve((3.0,)) == pytest.approx(
            math.sqrt(2 - 1 / 9), rel=1e-14)

    def test_table_vs_scipy_quad(self, pair_solution):
        def integrand(s):
            return math.sqrt(2.0 - 1.0 / (s * s))

        for y in (1.0, 2.35, 4.9):
            ref = quad(integrand, 0.8, y, epsabs=1e-13)[0]
            assert pair_solution.table(y) == pytest.approx(ref, abs=1e-9)

    def test_solution_is_one_form(self, pair_solution, reduced_pair):
        grid = mesh_grid([(0.9, 4.8)], [50])
        rep = hj_residual(reduced_pair, pair_solution, grid)
        assert rep.max_dev < 1e-12
        assert rep.e_est == pytest.approx(2.0, abs=1e-13)

    def test_energy_and_range_recorded(self, pair_solution):
        assert pair_solution.energy == 2.0
        assert pair_solution.y_range == (0.8, 5.0)

    def test_negative_branch(self, reduced_pair):
        sol = solve_reduced_1d(reduced_pair.h, "q", "p", 2.0, (0.8, 5.0),
                               branch=-1, n_nodes=201)
        assert sol.root.solve((2.0,)) == pytest.approx(
            -math.sqrt(2 - 0.25), rel=1e-13)

    def test_turning_point_raises(self):
        h = parse("0.5*(p^2+q^2)")
        with pytest.raises(TurningPointError):
            solve_reduced_1d(h, "q", "p", 0.5, (-2.0, 2.0), n_nodes=101)

    def test_branch_ambiguity_raises(self):
        # h = p^2 - 2 y p is not monotone in p between 0 and the root
        h = parse("p^2-2*y*p")
        with pytest.raises(BranchAmbiguityError):
            solve_reduced_1d(h, "y", "p", 1.0, (1.0, 2.0), n_nodes=51)

    def test_bad_range(self, reduced_pair):
        with pytest.raises(ValueError):
            solve_reduced_1d(reduced_pair.h, "q", "p", 2.0, (5.0, 0.8))


class TestGeneratingFunction:
    def test_free_vars_must_be_declared(self):
        with pytest.raises(ValueError):
            GeneratingFunction("typeI", parse("q*a+z"), ("q",), ("a",))

    def test_unused_param_needs_absent_ok(self):
        with pytest.raises(ValueError):
            GeneratingFunction("typeI", parse("q*a"), ("q",), ("a", "b"))
        gf = GeneratingFunction("typeI", parse("q*a"), ("q",), ("a", "b"),
                                absent_ok=("b",))
        assert gf.params == ("a", "b")

    def test_duplicate_names_rejected(self):
        with pytest.raises(ValueError):
            GeneratingFunction("typeI", parse("q*a"), ("q",), ("q",))

    def test_kind_validated(self):
        with pytest.raises(ValueError):
            GeneratingFunction("typeIII", parse("q*a"), ("q",), ("a",))

    def test_partial_caching(self):
        gf = GeneratingFunction("typeII", parse("q*b+t*b^2"), ("q",), ("b",))
        assert gf.s_q(0) is gf.s_q(0)
        assert gf.s_qparam(0, 0).evaluate({"q": 1, "b": 1, "t": 0}) == 1.0
        assert gf.s_t().evaluate({"q": 0, "b": 3, "t": 0}) == 9.0


class TestTimeExtension:
    def test_reduced_pair_solution(self, reduced_pair, pair_solution):
        gf = time_extension(pair_solution, 2.0)
        pts = {"q": np.linspace(1.0, 4.5, 40),
               "t": np.linspace(0.0, 1.0, 40)}
        assert time_dependent_residual(gf, reduced_pair, pts) < 1e-12

    def test_requires_potential(self):
        form = OneForm(("q",), components=("q",))
        with pytest.raises(ValueError):
            time_extension(form, 1.0)


class TestCheckComplete:
    def test_free_particle_family(self):
        s = HamiltonianSystem(parse("0.5*p^2"), ["q"])
        gf = GeneratingFunction("typeI", parse("q*a1-t*a1^2/2"), ("q",),
                                ("a1",))
        pts = {"q": np.linspace(-2, 2, 30), "t": np.linspace(0, 1, 30),
               "a1": np.linspace(0.5, 2, 30)}
        rep = check_complete(gf, s, pts)
        assert rep.complete
        assert rep.hj_max_dev < 1e-14
        assert rep.min_abs_det == pytest.approx(1.0)

    def test_degenerate_family_rejected(self):
        s = HamiltonianSystem(parse("0.5*p^2"), ["q"])
        # S does not couple q and the parameter: mixed partial is zero
        gf = GeneratingFunction("typeI", parse("0.5*q^2+a1"), ("q",), ("a1",))
        pts = {"q": np.linspace(-1, 1, 5), "a1": np.zeros(5)}
        rep = check_complete(gf, s, pts)
        assert not rep.complete
        assert rep.min_abs_det == 0.0

    def test_needs_full_parameter_count(self):
        s = HamiltonianSystem(parse("0.5*(p1^2+p2^2)"), ["q1", "q2"])
        gf = GeneratingFunction("typeI", parse("q1*a1+q2*a1"),
                                ("q1", "q2"), ("a1",))
        with pytest.raises(ValueError):
            check_complete(gf, s, {"q1": [0.0], "q2": [0.0], "a1": [1.0]})


@pytest.fixture(scope="module")
def oscillator():
    return HamiltonianSystem(parse("0.5*(p^2+q^2)"), ["q"])


class TestQuadratureCompleteSolution:
    def test_family_is_complete(self, oscillator):
        gf = quadrature_complete_solution(oscillator, (-0.95, 0.95))
        pts = {"q": np.linspace(-0.9, 0.9, 50),
               "t": np.linspace(0, 1, 50),
               "a1": np.full(50, 0.5)}
        rep = check_complete(gf, oscillator, pts, tol=1e-10)
        assert rep.complete
        assert rep.min_abs_det >= 1.0  # 1/p >= 1 on this energy shell

    def test_w_values_vs_scipy(self, oscillator):
        gf = quadrature_complete_solution(oscillator, (-0.95, 0.95),
                                          n_quad=400)
        # S(t=0, q, a) = W(q, a) = int sqrt(2a - s^2) from the base point
        w = gf.s  # External(W) - t*a1; at t=0 only W contributes
        for q in (-0.7, 0.0, 0.42, 0.9):
            ref = quad(lambda s: math.sqrt(1.0 - s * s), 0.0, q,
                       epsabs=1e-13)[0]
            got = w.evaluate({"q": q, "a1": 0.5, "t": 0.0})
            assert got == pytest.approx(ref, abs=1e-9)

    def test_param_collision(self, oscillator):
        with pytest.raises(ValueError):
            quadrature_complete_solution(oscillator, (-1, 1), param="q")

    def test_needs_1d(self):
        s = HamiltonianSystem(parse("0.5*(p1^2+p2^2)"), ["q1", "q2"])
        with pytest.raises(ValueError):
            quadrature_complete_solution(s, (-1, 1))


HEAVY_TOP_H = ("0.5*(ptheta^2+(pphi-ppsi*cos(theta))^2/sin(theta)^2"
               "+ppsi^2)+cos(theta)")


@pytest.fixture(scope="module")
def top():
    return HamiltonianSystem(parse(HEAVY_TOP_H), ["theta", "phi", "psi"],
                             ["ptheta", "pphi", "ppsi"])


class TestCyclicAnsatz:
    def test_slots_and_equation(self, top):
        ans = cyclic_ansatz(top, ["phi", "psi"], [0.3, 0.2])
        assert ans.remaining_vars == ("theta",)
        assert ans.slot_vars == ("dV_dtheta",)
        got = ans.equation.evaluate({"theta": math.pi / 2,
                                     "dV_dtheta": 2.0})
        assert got == pytest.approx(0.5 * (4 + 0.09 + 0.04), rel=1e-14)

    def test_integer_indices(self, top):
        ans = cyclic_ansatz(top, [1, 2], [0.3, 0.2])
        assert ans.cyclic_vars == ("phi", "psi")

    def test_non_cyclic_claim_rejected(self, top):
        with pytest.raises(PreconditionError) as ei:
            cyclic_ansatz(top, ["theta"], [0.5])
        assert ei.value.witness is not None

    def test_prefix_momenta(self, top):
        # d(prefix)/d(cyclic coordinate) recovers the frozen momentum
        ans = cyclic_ansatz(top, ["phi", "psi"], [0.3, 0.2])
        from hjreduce.expr import differentiate
        dphi = differentiate(ans.w_prefix, "phi")
        assert dphi.evaluate({}) == 0.3


class TestHeavyTop:
    def test_system_energy(self):
        s = heavy_top_system(1.0, 1.0, 1.0, 1.0, 1.0)
        z = PhasePoint([math.pi / 2, 0.0, 0.0], [2.0, 0.3, 0.2])
        expect = 0.5 * (4 + 0.09 + 0.04)
        assert s.energy(z) == pytest.approx(expect, rel=1e-14)

    def test_free_case_frozen_root(self):
        # no gravity and zero cyclic momenta: slope is sqrt(2 E I) = 2
        out = solve_heavy_top(1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 2.0,
                              (math.pi / 6, 5 * math.pi / 6), n_nodes=101)
        assert out.solution.root.solve((1.0,)) == pytest.approx(2.0,
                                                                rel=1e-13)

    def test_criterion_parameters(self):
        out = solve_heavy_top(1.0, 1.0, 1.0, 1.0, 1.0, 0.3, 0.2, 3.0,
                              (math.pi / 6, 5 * math.pi / 6), n_nodes=401)
        # V'(pi/2)^2 = 2E - beta-part = 6 - 0.13 = 5.87
        assert out.solution.root.solve((math.pi / 2,)) == pytest.approx(
            math.sqrt(5.87), rel=1e-12)
        assert out.energy == 3.0

    def test_family_complete(self):
        out = solve_heavy_top(1.0, 1.0, 1.0, 1.0, 1.0, 0.3, 0.2, 3.0,
                              (math.pi / 6, 5 * math.pi / 6), n_nodes=101,
                              n_quad=100)
        gf = out.generating_function
        n = 40
        pts = {"theta": np.linspace(math.pi / 6 + 0.05,
                                    5 * math.pi / 6 - 0.05, n),
               "phi": np.linspace(-2, 2, n),
               "psi": np.linspace(-2, 2, n),
               "t": np.linspace(0, 1, n),
               "b1": np.full(n, 3.0),
               "b2": np.full(n, 0.3),
               "b3": np.full(n, 0.2)}
        rep = check_complete(gf, out.system, pts, tol=1e-8)
        assert rep.complete
        assert rep.min_abs_det >= 1e-6


class TestCyclicCompleteSolution:
    def test_name_clash_rejected(self):
        h = parse("0.5*(pb1^2+pq^2)+cos(b1)")
        s = HamiltonianSystem(h, ["b1", "q"], ["pb1", "pq"])
        with pytest.raises(ValueError):
            cyclic_complete_solution(s, ["q"], (0.5, 1.0))

    def test_needs_single_remaining(self):
        s = HamiltonianSystem(parse("0.5*(p1^2+p2^2+p3^2)+q1^2+q2^2"),
                              ["q1", "q2", "q3"])
        with pytest.raises(ValueError):
            cyclic_complete_solution(s, ["q3"], (0.5, 1.0))


class TestAdditiveSplit:
    def test_exact_split(self):
        action = TranslationAction([[1, 1]])
        s = (call("sin", Var("q1") - Var("q2"))
             + Const(1.5) * (Const(0.5) * Var("q1") + Const(0.5) * Var("q2")))
        grid = random_grid([(0.5, 2.5), (-2.0, -0.5)], 30, seed=7)
        rep = additive_split_check(s, ("q1", "q2"), action, grid)
        assert rep.residual <= 1e-12
        np.testing.assert_allclose(rep.mu, [1.5], atol=1e-12)
        # reassemble: s == s_reduced + s_group + constant on the grid
        for pt in grid[:5]:
            b = {"q1": pt[0], "q2": pt[1]}
            total = (rep.s_reduced.evaluate(b) + rep.s_group.evaluate(b)
                     + rep.constant)
            assert total == pytest.approx(s.evaluate(b), rel=1e-12)

    def test_perturbed_input_rejected_with_witness(self):
        action = TranslationAction([[1, 1]])
        s = (call("sin", Var("q1") - Var("q2"))
             + Const(0.01) * Var("q1") ** Const(2.0))
        grid = random_grid([(0.5, 2.5), (-2.0, -0.5)], 30, seed=7)
        with pytest.raises(PreconditionError) as ei:
            additive_split_check(s, ("q1", "q2"), action, grid)
        assert ei.value.witness is not None

    def test_explicit_mu(self):
        action = TranslationAction([[1, 1]])
        s = call("cos", Var("q1") - Var("q2"))
        grid = random_grid([(0.5, 2.5), (-2.0, -0.5)], 20, seed=8)
        rep = additive_split_check(s, ("q1", "q2"), action, grid,
                                   mu=np.zeros(1))
        assert rep.residual <= 1e-12
