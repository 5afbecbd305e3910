import numpy as np
import pytest

from conftest import pair_instance, square_instance
from oblivious_ellipsoid import (
    CertifiedBounds,
    certify_slab_bound,
    derive_state,
    gamma,
    normalize_columns,
    procedure_1,
    type_l_from_bound_violation,
    verify_type_e,
    verify_type_l,
)
from oblivious_ellipsoid.certificates import TypeQResult, TypeQShortcut, type_q_steps
from oblivious_ellipsoid.ellipsoid import rescale_unit_f
from oblivious_ellipsoid.errors import NotACertificate, PreconditionF, PreconditionTypeQ
from oblivious_ellipsoid.problem import ProblemData


def unit_square_state():
    inst = square_instance()
    return inst, rescale_unit_f(derive_state(inst.problem, np.ones(4), inst.bounds.l))


class TestSlabBound:
    def test_square(self):
        inst, s = unit_square_state()
        np.testing.assert_allclose(s.d, 0.25)
        bc = certify_slab_bound(s, inst.bounds, 0)
        np.testing.assert_allclose(bc.lambda_hat, [-0.5, 0, 0.5, 0], atol=1e-15)
        np.testing.assert_allclose(bc.lambda_tilde, [0, 0, 1, 0], atol=1e-15)
        assert bc.L_i == pytest.approx(-np.sqrt(2))
        assert -bc.lambda_tilde @ inst.problem.u == pytest.approx(-1.0)
        assert -bc.lambda_tilde @ inst.problem.u >= bc.L_i

    def test_needs_unit_f(self):
        inst = square_instance()
        s = derive_state(inst.problem, np.ones(4), inst.bounds.l)
        with pytest.raises(PreconditionF):
            certify_slab_bound(s, inst.bounds, 0)

    def test_lift_is_a_bound_certificate(self):
        # random states on a random instance: lifted multipliers certify L_i
        rng = np.random.default_rng(3)
        inst = square_instance()
        p, b = inst.problem, inst.bounds
        for _ in range(20):
            s = rescale_unit_f(derive_state(p, rng.uniform(0.2, 2, 4), b.l))
            for i in range(4):
                bc = certify_slab_bound(s, b, i)
                np.testing.assert_allclose(p.A @ bc.lambda_tilde, -p.A[:, i], atol=1e-12)
                assert bc.lambda_tilde.min() >= 0
                assert -bc.lambda_tilde @ p.u >= bc.L_i - 1e-12


class TestTypeLFromBound:
    def test_pair(self):
        p = pair_instance().problem
        cert = type_l_from_bound_violation(p, np.array([0.0, 1.0]), 0)
        np.testing.assert_allclose(cert.lambda_bar, [1.0, 1.0])
        assert p.u @ cert.lambda_bar == pytest.approx(-1.0)

    def test_square_with_fabricated_rhs(self):
        inst = square_instance()
        u = inst.problem.u.copy()
        u[0] = -1.5
        p = ProblemData(inst.problem.A, u)
        cert = type_l_from_bound_violation(p, np.array([0.0, 0, 1, 0]), 0)
        np.testing.assert_allclose(cert.lambda_bar, [1, 0, 1, 0])
        assert verify_type_l(p, cert.lambda_bar).passed

    def test_rejects_bad_multiplier(self):
        p = pair_instance().problem
        with pytest.raises(NotACertificate):
            type_l_from_bound_violation(p, np.array([0.5, 0.0]), 0)


class TestVerifyTypeL:
    def test_cases(self):
        p = pair_instance().problem
        assert verify_type_l(p, [1.0, 1.0]).passed
        zero = verify_type_l(p, [0.0, 0.0])
        assert not zero.passed and zero.u_dot == 0.0
        neg = verify_type_l(p, [-0.5, -0.5])
        assert not neg.passed and neg.min_entry == -0.5


class TestTypeE:
    def test_square_never(self):
        inst, s = unit_square_state()
        assert not any(verify_type_e(s, inst.bounds, j) for j in range(4))

    def test_fabricated(self):
        inst, s = unit_square_state()
        A = inst.problem.A
        edge = float(A[:, 0] @ s.y - gamma(s, 0))
        for rhs, want in ((edge - 0.1, True), (edge, False)):
            u = inst.problem.u.copy()
            u[0] = rhs
            p = ProblemData(A, u)
            st = derive_state(p, s.d, s.l)
            # same (d, l) so the same center and f apart from u's effect on r, v
            st = rescale_unit_f(st)
            edge_st = float(A[:, 0] @ st.y - gamma(st, 0))
            u2 = u.copy()
            u2[0] = edge_st - 0.1 if want else edge_st
            st2 = st.__class__(**{**st.__dict__, "problem": ProblemData(A, u2)})
            assert verify_type_e(st2, inst.bounds, 0) is want


class TestProcedure1:
    def test_step1_shortcut(self):
        inst = pair_instance(l=(-0.1, -0.1))
        s = derive_state(inst.problem, np.ones(2), inst.bounds.l)
        assert s.f == pytest.approx(-0.1)
        assert isinstance(type_q_steps(s), TypeQShortcut)
        cert = procedure_1(s, inst.bounds)
        np.testing.assert_allclose(cert.lambda_bar, [1.0, 1.0])

    def test_full_construction(self):
        inst = pair_instance()
        s = derive_state(inst.problem, np.ones(2), inst.bounds.l)
        res = type_q_steps(s)
        assert isinstance(res, TypeQResult)
        assert res.L_k > inst.problem.u[res.k]
        cert = procedure_1(s, inst.bounds)
        rep = verify_type_l(inst.problem, cert.lambda_bar)
        assert rep.eq_residual <= 1e-9 and rep.min_entry >= 0 and rep.u_dot <= -1e-10

    def test_random_type_q_states(self):
        # two opposing slabs in random directions, starting from f <= 0
        rng = np.random.default_rng(0)
        done = 0
        for _ in range(200):
            n = int(rng.integers(1, 4))
            a = rng.standard_normal(n)
            a /= np.linalg.norm(a)
            others = rng.standard_normal((n, n))
            others /= np.linalg.norm(others, axis=0)
            A = np.column_stack([a, -a, others, -others])
            g = rng.uniform(0.1, 1.0)
            u = np.concatenate([[-g / 2, -g / 2], np.full(2 * n, 0.5)])
            try:
                p = normalize_columns(A, u)
            except Exception:
                continue
            m = p.m
            Lam = np.zeros((m, m))
            Lam[1, 0] = Lam[0, 1] = 1.0
            for k in range(n):
                Lam[2 + n + k, 2 + k] = Lam[2 + k, 2 + n + k] = 1.0
            l = np.concatenate([-g / 2 - rng.uniform(0, 1, 2), np.full(2 * n, -0.5)])
            b = CertifiedBounds(l, Lam)
            d = np.exp(rng.uniform(-3, 3, m))
            s = derive_state(p, d, l)
            if s.f > 0 or s.violations().max() <= 0:
                continue
            cert = procedure_1(s, b)
            assert verify_type_l(p, cert.lambda_bar).passed
            done += 1
        assert done >= 10

    def test_rejects_positive_f(self):
        inst, s = unit_square_state()
        with pytest.raises(PreconditionTypeQ):
            procedure_1(s, inst.bounds)
