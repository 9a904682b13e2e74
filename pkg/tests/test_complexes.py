"""Finite Hilbert complexes: structure, mixed-order Laplacians, conversions.

Frozen oracles:
  * structural random complexes multiply to exact float zeros, so collection
    anticommutation defects are exactly 0.0;
  * three-step complex with orders (1,2,1), grouped as {0,2},{1}: the total
    mixed-order Laplacian equals D1^4 + D2^2 and the attached bounding matrix
    is [[0,0],[1,1/2]];
  * contact-style weight chain lambda_j = lambda^{c_j} with c_j = j+n+1 for
    j <= n and j+n+2 above passes compatibility and collapses the conformal
    factor to the single scalar lambda^{-tau};
  * Betti numbers from Hodge projectors match rank-nullity via SVD and the
    alternating sums of Betti and space dimensions agree.
"""

import numpy as np
import pytest
from fractions import Fraction

from st2.complexes import (
    ConformalFactorSpec,
    FiniteHilbertComplex,
    assembled_formula_check,
    complex_from_json,
    complex_to_json,
    conformal_factor_assemble,
    hodge_decomposition,
    random_complex,
    rumin_laplacians,
    signed_power_identity_check,
    to_collection,
    validate,
)
from st2.tropical import BoundingMatrix, complex_bounding_matrix


def block_diag(mats):
    total = sum(m.shape[0] for m in mats)
    out = np.zeros((total, total), dtype=complex)
    pos = 0
    for m in mats:
        k = m.shape[0]
        out[pos : pos + k, pos : pos + k] = m
        pos += k
    return out


@pytest.fixture
def three_step(rng):
    """Orders (1,2,1) on dims (2,5,5,3), all differentials nonzero."""
    return random_complex(rng, dims=(2, 5, 5, 3), orders=(1, 2, 1), ranks=(2, 2, 2))


class TestValidate:
    def test_zero_differentials_valid(self):
        c = FiniteHilbertComplex(
            dims=(2, 3),
            differentials=(np.zeros((3, 2)),),
            orders=(1,),
        )
        assert validate(c).passed

    def test_explicit_two_step(self):
        d0 = np.array([[1.0], [0.0]])
        d1 = np.array([[0.0, 1.0]])
        c = FiniteHilbertComplex(dims=(1, 2, 1), differentials=(d0, d1), orders=(1, 1))
        rep = validate(c)
        assert rep.passed

    def test_random_complex_composition_exactly_zero(self, rng):
        c = random_complex(rng, dims=(3, 6, 6, 4), orders=(1, 2, 1))
        for i in range(len(c.differentials) - 1):
            prod = c.differentials[i + 1] @ c.differentials[i]
            assert np.abs(prod).max() == 0.0
        assert validate(c).passed

    def test_projector_composed_complex_valid_within_tolerance(self, rng):
        # second differential built as (random map) . (projector onto the
        # orthogonal complement of Ran d0): zero only up to roundoff
        d0 = rng.standard_normal((5, 3)) + 1j * rng.standard_normal((5, 3))
        q, _ = np.linalg.qr(d0)
        proj_coker = np.eye(5) - q @ q.conj().T
        d1 = (rng.standard_normal((4, 5)) + 1j * rng.standard_normal((4, 5))) @ proj_coker
        c = FiniteHilbertComplex(dims=(3, 5, 4), differentials=(d0, d1), orders=(1, 1))
        rep = validate(c)
        assert rep.passed
        comp = next(ch for ch in rep.checks if ch.name == "composition-zero")
        assert comp.value > 0.0  # genuinely inexact, caught by the tolerance

    def test_broken_complex_reported_with_max_entry(self):
        d0 = np.array([[1.0], [0.0]])
        d1 = np.array([[2.0, 0.0]])  # d1 d0 = 2
        c = FiniteHilbertComplex(dims=(1, 2, 1), differentials=(d0, d1), orders=(1, 1))
        rep = validate(c)
        assert not rep.passed
        comp = next(ch for ch in rep.checks if ch.name == "composition-zero")
        assert comp.value == pytest.approx(2.0)

    def test_shape_chain_enforced(self):
        with pytest.raises(ValueError):
            FiniteHilbertComplex(
                dims=(2, 3, 2),
                differentials=(np.zeros((3, 2)), np.zeros((2, 4))),
                orders=(1, 1),
            )

    def test_orders_must_be_at_least_one(self):
        with pytest.raises(ValueError):
            FiniteHilbertComplex(
                dims=(2, 2),
                differentials=(np.zeros((2, 2)),),
                orders=(Fraction(1, 2),),
            )


class TestRuminLaplacians:
    def test_unit_orders_give_hodge_laplacians(self, rng):
        c = random_complex(rng, dims=(3, 5, 4), orders=(1, 1))
        laps = rumin_laplacians(c)
        d0, d1 = c.differentials
        expect = [
            d0.conj().T @ d0,
            d1.conj().T @ d1 + d0 @ d0.conj().T,
            d1 @ d1.conj().T,
        ]
        for got, want in zip(laps, expect):
            assert np.abs(got - want).max() < 1e-12 * max(1.0, np.abs(want).max())

    def test_psd_and_kernel_matches_harmonics(self, three_step):
        laps = rumin_laplacians(three_step)
        for i, lap in enumerate(laps):
            w = np.linalg.eigvalsh(lap)
            assert w.min() > -1e-10
            betti = hodge_decomposition(three_step, i).betti
            assert int((w < 1e-10 * max(1.0, w.max())).sum()) == betti

    def test_three_step_total_laplacian_identity(self, three_step):
        # grouped collection (first-plus-last, middle): total mixed-order
        # Laplacian is the quartic power of the first plus the square of the
        # second
        coll = to_collection(three_step, partition=[[0, 2], [1]])
        d1, d2 = coll.operators
        total = block_diag(rumin_laplacians(three_step))
        lhs = np.linalg.matrix_power(d1, 4) + d2 @ d2
        assert np.abs(lhs - total).max() < 1e-9 * max(1.0, np.abs(total).max())

    def test_kernels_are_exponent_independent(self, three_step):
        # harmonic spaces of the mixed-order Laplacians do not move when the
        # orders vector is replaced by another admissible one
        laps_a = rumin_laplacians(three_step)
        other = FiniteHilbertComplex(
            dims=three_step.dims,
            differentials=three_step.differentials,
            orders=(2, 3, 1),
        )
        laps_b = rumin_laplacians(other)
        for la, lb in zip(laps_a, laps_b):
            wa, va = np.linalg.eigh(la)
            wb, vb = np.linalg.eigh(lb)
            ka = va[:, wa < 1e-10 * max(1.0, wa.max())]
            kb = vb[:, wb < 1e-10 * max(1.0, wb.max())]
            assert ka.shape[1] == kb.shape[1]
            if ka.shape[1]:
                overlap = np.linalg.svd(ka.conj().T @ kb, compute_uv=False)
                assert overlap.min() > 1.0 - 1e-8


class TestToCollection:
    def test_singleton_partition_defect_exactly_zero(self, three_step):
        coll = to_collection(three_step)
        assert coll.n_ops == 3
        assert coll.max_anticommutation_defect() == 0.0

    def test_grading_anticommutes_and_squares_to_identity(self, three_step):
        coll = to_collection(three_step)
        g = coll.grading
        assert g is not None
        assert np.abs(g @ g - np.eye(coll.dim)).max() == 0.0

    def test_bounding_matrix_attached_singleton(self, three_step):
        coll = to_collection(three_step)
        assert coll.eps is not None
        expect = complex_bounding_matrix((1, 2, 1))
        assert coll.eps.entries == expect.entries

    def test_grouped_three_step_matches_contact_matrix(self, three_step):
        coll = to_collection(three_step, partition=[[0, 2], [1]])
        assert coll.n_ops == 2
        assert coll.eps.entries == (
            (Fraction(0), Fraction(0)),
            (Fraction(1), Fraction(1, 2)),
        )
        d1, d2 = coll.operators
        assert np.abs(d1 @ d2).max() == 0.0
        assert np.abs(d2 @ d1).max() == 0.0

    def test_partition_mixing_orders_rejected(self, three_step):
        with pytest.raises(ValueError, match="order"):
            to_collection(three_step, partition=[[0, 1], [2]])

    def test_partition_must_cover_all_indices(self, three_step):
        with pytest.raises(ValueError):
            to_collection(three_step, partition=[[0], [2]])

    def test_single_differential_spectrum_is_signed_singular_values(self, rng):
        c = random_complex(rng, dims=(3, 4), orders=(1,), ranks=(2,))
        coll = to_collection(c, grading=False)
        eig = np.sort(np.linalg.eigvalsh(coll.operators[0]))
        s = np.linalg.svd(c.differentials[0], compute_uv=False)
        s = s[s > 1e-12 * max(1.0, s.max())]
        expect = np.sort(np.concatenate([s, -s, np.zeros(coll.dim - 2 * len(s))]))
        assert np.abs(eig - expect).max() < 1e-10 * max(1.0, s.max())

    def test_grouped_and_ungrouped_squares_agree(self, three_step):
        from st2.opcalc import delta_form

        grouped = to_collection(three_step, partition=[[0, 2], [1]])
        singleton = to_collection(three_step)
        ta, tb = 1.0, 0.5
        dg = delta_form(grouped, (ta, tb))
        ds = delta_form(singleton, (ta, tb, ta))
        assert np.abs(dg - ds).max() < 1e-9 * max(1.0, np.abs(ds).max())


class TestSignedPowerIdentity:
    @pytest.mark.parametrize("alpha", [0.0, 0.5, 2.0])
    def test_identity_all_degrees(self, three_step, alpha):
        for i in range(len(three_step.differentials)):
            rep = signed_power_identity_check(three_step, i, alpha)
            assert rep.passed, rep.failures()

    def test_identity_on_unit_order_complex(self, rng):
        c = random_complex(rng, dims=(4, 7, 5), orders=(1, 1))
        for i in range(2):
            assert signed_power_identity_check(c, i, 0.5).passed


class TestAssembledFormula:
    def test_uniform_first_order_reduces_to_sum(self, rng):
        c = random_complex(rng, dims=(3, 6, 4), orders=(1, 1))
        rep = assembled_formula_check(c, tau=1)
        assert rep.passed
        # both sides literally equal the sum of differentials plus adjoints
        assert rep.data["max_difference"] < 1e-10

    def test_three_step_mixed_orders(self, three_step):
        for tau in (1.0, 2.0):
            rep = assembled_formula_check(three_step, tau=tau)
            assert rep.passed, rep.failures()

    def test_rejects_nonpositive_tau(self, three_step):
        with pytest.raises(ValueError):
            assembled_formula_check(three_step, tau=0)


class TestHodge:
    def test_zero_differentials_all_harmonic(self):
        c = FiniteHilbertComplex(
            dims=(2, 3), differentials=(np.zeros((3, 2)),), orders=(1,)
        )
        h0 = hodge_decomposition(c, 0)
        assert h0.betti == 2
        assert np.abs(h0.harmonic - np.eye(2)).max() == 0.0

    def test_identity_differential_kills_cohomology(self):
        c = FiniteHilbertComplex(
            dims=(2, 2), differentials=(np.eye(2),), orders=(1,)
        )
        assert hodge_decomposition(c, 0).betti == 0
        assert hodge_decomposition(c, 1).betti == 0

    def test_projectors_orthogonal_and_complete(self, three_step):
        for i in range(len(three_step.dims)):
            h = hodge_decomposition(three_step, i)
            eye = np.eye(three_step.dims[i])
            total = h.harmonic + h.exact + h.coexact
            assert np.abs(total - eye).max() < 1e-10
            for p in (h.harmonic, h.exact, h.coexact):
                assert np.abs(p @ p - p).max() < 1e-10
            assert np.abs(h.exact @ h.coexact).max() < 1e-10

    def test_betti_matches_prescribed_ranks(self, rng):
        dims = (4, 7, 6, 3)
        ranks = (3, 2, 2)
        c = random_complex(rng, dims=dims, orders=(1, 1, 1), ranks=ranks)
        padded = (0,) + ranks + (0,)
        for i in range(4):
            expect = dims[i] - padded[i] - padded[i + 1]
            assert hodge_decomposition(c, i).betti == expect

    def test_euler_characteristic_identity(self, rng):
        for dims, orders in (((3, 5, 4), (1, 2)), ((2, 6, 6, 2), (1, 2, 1))):
            c = random_complex(rng, dims=dims, orders=orders)
            chi_dims = sum((-1) ** i * d for i, d in enumerate(dims))
            chi_betti = sum(
                (-1) ** i * hodge_decomposition(c, i).betti for i in range(len(dims))
            )
            assert chi_dims == chi_betti


class TestConformalFactor:
    def test_unit_factors_give_identity(self, three_step):
        spec = ConformalFactorSpec(lambdas=(1.0, 1.0, 1.0, 1.0), s=(1, 0.5, 1))
        mu, rep = conformal_factor_assemble(three_step, spec, tau=1.0)
        assert rep.passed
        assert np.abs(mu - np.eye(three_step.total_dim)).max() < 1e-12

    def test_contact_weight_chain_collapses_to_scalar(self, three_step):
        # weights j+n+1 below the middle and j+n+2 above, here with n = 1
        lam = 1.7
        c_j = (2, 3, 5, 6)
        spec = ConformalFactorSpec(
            lambdas=tuple(lam**c for c in c_j), s=(1, 0.5, 1)
        )
        tau = 0.8
        mu, rep = conformal_factor_assemble(three_step, spec, tau=tau)
        assert rep.passed, rep.failures()
        assert rep.data["mu_scalar"] == pytest.approx(lam**-tau, rel=1e-12)
        # off the harmonic space, mu acts by the square root of the scalar
        from st2.complexes import hodge_decomposition as hd

        for j in range(4):
            h = hd(three_step, j)
            block = mu[
                sum(three_step.dims[:j]) : sum(three_step.dims[: j + 1]),
                sum(three_step.dims[:j]) : sum(three_step.dims[: j + 1]),
            ]
            nonharm = np.eye(three_step.dims[j]) - h.harmonic
            expect = h.harmonic + (lam**-tau) ** 0.5 * nonharm
            assert np.abs(block - expect).max() < 1e-10

    def test_incompatible_family_reports_degree(self, three_step):
        spec = ConformalFactorSpec(lambdas=(1.0, 2.0, 1.0, 5.0), s=(1, 0.5, 1))
        mu, rep = conformal_factor_assemble(three_step, spec, tau=1.0)
        assert not rep.passed
        failed = rep.failures()
        assert any("compatibility" in ch.name for ch in failed)
        detail = " ".join(ch.detail or "" for ch in failed)
        assert any(f"j={j}" in detail for j in (1, 2))

    def test_degenerate_differential_flagged(self, rng):
        c = random_complex(rng, dims=(3, 4, 3), orders=(1, 1), ranks=(0, 2))
        spec = ConformalFactorSpec(lambdas=(1.0, 1.0, 1.0), s=(1, 1))
        mu, rep = conformal_factor_assemble(c, spec, tau=1.0)
        assert rep.data["degenerate_degrees"] == [0]

    def test_diagonal_factors_on_equal_dims(self, rng):
        c = random_complex(rng, dims=(4, 4, 4), orders=(1, 1), ranks=(2, 1))
        base = 1.0 + rng.random(4)
        spec = ConformalFactorSpec(
            lambdas=(base, base**2, base**3), s=(1, 1)
        )
        mu, rep = conformal_factor_assemble(c, spec, t=(1.0, 1.0))
        # ratio of consecutive factors is base^-1 at every degree; the factor
        # powers the diagonal first, then compresses by the range projectors
        h = [hodge_decomposition(c, j) for j in range(3)]
        root = np.diag(base**-0.5)
        expect = block_diag(
            [
                h[0].harmonic + h[0].coexact @ root @ h[0].coexact,
                h[1].harmonic + h[1].exact @ root @ h[1].exact + h[1].coexact @ root @ h[1].coexact,
                h[2].harmonic + h[2].exact @ root @ h[2].exact,
            ]
        )
        assert np.abs(mu - expect).max() < 1e-9

    def test_diagonal_factors_unequal_dims_rejected(self, three_step):
        with pytest.raises(ValueError, match="dimension"):
            ConformalFactorSpec(
                lambdas=(np.ones(2), np.ones(5), np.ones(5), np.ones(3)),
                s=(1, 0.5, 1),
            ).bind(three_step)

    def test_exponents_outside_cone_rejected(self, three_step):
        spec = ConformalFactorSpec(lambdas=(1.0, 1.0, 1.0, 1.0), s=(0.1, 1.0, 0.1))
        with pytest.raises(ValueError, match="cone"):
            conformal_factor_assemble(three_step, spec, tau=1.0)


class TestSerialization:
    def test_roundtrip(self, three_step):
        blob = complex_to_json(three_step)
        back = complex_from_json(blob)
        assert back.dims == three_step.dims
        assert back.orders == three_step.orders
        for a, b in zip(back.differentials, three_step.differentials):
            assert np.abs(a - b).max() == 0.0
