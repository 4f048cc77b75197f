import itertools
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from volkit.mixing import (
    MixTerm,
    canonicalize_index,
    canonicalize_kernel_args,
    count_terms,
    enumerate_kernels_for_order,
    enumerate_output_indices,
    input_coefficient,
    term_multiplicity,
    terms_at_index,
    terms_up_to_order,
)


def brute_force_indices(m, m0):
    """Independent enumeration: full cube, l1 filter, dedup by +/- pair."""
    seen = set()
    out = set()
    for k in itertools.product(range(-m0, m0 + 1), repeat=m):
        tot = sum(abs(v) for v in k)
        if not 1 <= tot <= m0:
            continue
        pair = frozenset([k, tuple(-v for v in k)])
        if pair in seen:
            continue
        seen.add(pair)
        for v in k:
            if v > 0:
                out.add(k)
                break
            if v < 0:
                out.add(tuple(-x for x in k))
                break
    return out


class TestEnumerateOutputIndices:
    def test_three_tone_third_order_has_31_frequencies(self):
        assert len(enumerate_output_indices(3, 3)) == 31

    def test_single_tone(self):
        assert enumerate_output_indices(1, 1) == [(1,)]

    def test_two_tone_second_order_matches_brute_force(self):
        got = enumerate_output_indices(2, 2)
        assert set(got) == {(1, 0), (0, 1), (2, 0), (0, 2), (1, 1), (1, -1)}
        assert len(got) == 6

    @pytest.mark.parametrize("m,m0", [(1, 3), (2, 3), (3, 3), (3, 2), (4, 2)])
    def test_matches_brute_force(self, m, m0):
        assert set(enumerate_output_indices(m, m0)) == brute_force_indices(m, m0)

    def test_sorted_by_total_order_then_lex(self):
        idx = enumerate_output_indices(3, 3)
        key = [(sum(abs(v) for v in k), k) for k in idx]
        assert key == sorted(key)
        assert len(set(idx)) == len(idx)

    def test_include_dc_prepends_zero_vector(self):
        idx = enumerate_output_indices(3, 3, include_dc=True)
        assert idx[0] == (0, 0, 0)
        assert len(idx) == 32

    def test_invalid_arguments(self):
        with pytest.raises(ValueError):
            enumerate_output_indices(0, 3)
        with pytest.raises(ValueError):
            enumerate_output_indices(3, 0)


class TestKernelTables:
    def test_first_order_counts(self):
        table = enumerate_kernels_for_order(3, 3, 1)
        assert len(table) == 3
        assert sum(len(v) for v in table.values()) == 3

    def test_second_order_counts(self):
        table = enumerate_kernels_for_order(3, 3, 2)
        assert len(table) == 9
        assert sum(len(v) for v in table.values()) == 9

    def test_third_order_counts(self):
        table = enumerate_kernels_for_order(3, 3, 3)
        assert len(table) == 22
        assert sum(len(v) for v in table.values()) == 28

    def test_dc_gains_three_second_order_terms(self):
        table = enumerate_kernels_for_order(3, 3, 2, include_dc=True)
        assert len(table[(0, 0, 0)]) == 3
        args = {t.argument_tones() for t in table[(0, 0, 0)]}
        assert args == {(1, -1), (2, -2), (3, -3)}

    def test_fundamental_third_order_membership(self):
        table = enumerate_kernels_for_order(3, 3, 3)
        args = {t.argument_tones() for t in table[(1, 0, 0)]}
        assert args == {(1, 1, -1), (1, 2, -2), (1, 3, -3)}

    def test_triple_sum_index_has_four_terms_across_signs(self):
        table = enumerate_kernels_for_order(3, 3, 3)
        quads = [k for k in table if tuple(abs(v) for v in k) == (1, 1, 1)]
        assert len(quads) == 4
        assert all(len(table[k]) == 1 for k in quads)


class TestCanonicalization:
    def test_sign_flip_on_trailing_tone(self):
        assert canonicalize_index((0, 0, -1)) == ((0, 0, 1), True)

    def test_already_canonical_mixed_signs(self):
        assert canonicalize_index((1, -2, 0)) == ((1, -2, 0), False)

    def test_flip_restores_mixed_signs(self):
        assert canonicalize_index((-1, 2, 0)) == ((1, -2, 0), True)

    def test_zero_vector_is_canonical(self):
        assert canonicalize_index((0, 0, 0)) == ((0, 0, 0), False)

    def test_kernel_args_permutation_collapse(self):
        # (w2, -w2, w1) is the same kernel as (w1, w2, -w2)
        assert canonicalize_kernel_args((2, -2, 1), 3) == ((1, 2, -2), False)

    def test_kernel_args_identity_first_order(self):
        assert canonicalize_kernel_args((1,), 3) == ((1,), False)

    def test_kernel_args_conjugate_flip(self):
        assert canonicalize_kernel_args((-1, -2, 3), 3) == ((1, 2, -3), True)

    def test_kernel_args_rejects_bad_tones(self):
        with pytest.raises(ValueError):
            canonicalize_kernel_args((0, 1), 2)
        with pytest.raises(ValueError):
            canonicalize_kernel_args((4,), 3)
        with pytest.raises(ValueError):
            canonicalize_kernel_args((), 3)


class TestMultiplicity:
    def test_compression_term_collects_three(self):
        # H3(w1, w1, -w1)
        assert term_multiplicity(MixTerm(k=(1, 0, 0), r=(1, 0, 0))) == 3

    def test_desensitization_term_collects_six(self):
        # H3(w1, w2, -w2)
        assert term_multiplicity(MixTerm(k=(1, 0, 0), r=(0, 1, 0))) == 6

    def test_linear_term(self):
        assert term_multiplicity(MixTerm(k=(0, 0, 1), r=(0, 0, 0))) == 1

    def test_matches_distinct_permutations(self):
        for k, r in [((1, 0, 0), (1, 0, 0)), ((1, -1, 1), (0, 0, 0)),
                     ((0, 2, 0), (1, 0, 1)), ((0, 0, 0), (2, 1, 0))]:
            term = MixTerm(k=k, r=r)
            perms = set(itertools.permutations(term.argument_tones()))
            assert term_multiplicity(term) == len(perms)


class TestCountTerms:
    @pytest.mark.parametrize("m,n,expected", [(3, 3, 216), (3, 2, 36), (3, 1, 6), (1, 1, 2)])
    def test_values(self, m, n, expected):
        assert count_terms(m, n) == expected

    @pytest.mark.parametrize("m,n", [(1, 2), (2, 2), (3, 2), (2, 3), (3, 3)])
    def test_multiplicities_account_for_all_summands(self, m, n):
        # Summing collected-term multiplicities over every index in the order-n
        # ball (both signs, DC once) must recover the raw summand count.
        total = 0
        for k in itertools.product(range(-n, n + 1), repeat=m):
            if sum(abs(v) for v in k) > n:
                continue
            for term in terms_at_index(k, n):
                total += term_multiplicity(term)
        assert total == count_terms(m, n)


class TestInputCoefficient:
    def test_linear_coefficient_is_half_amplitude(self):
        c = input_coefficient(MixTerm(k=(0, 0, 1), r=(0, 0, 0)), (0.2, 0.3, 0.8))
        assert c == pytest.approx(0.4)

    def test_compression_coefficient(self):
        # (V3/2)^3 / (2! 1!) = V3^3 / 16
        c = input_coefficient(MixTerm(k=(0, 0, 1), r=(0, 0, 1)), (1.0, 1.0, 2.0))
        assert c == pytest.approx(2.0**3 / 16)

    def test_cross_tone_coefficient(self):
        # V2 * V3^2 / 16 for the (w2, -w3, -w3) kernel
        c = input_coefficient(MixTerm(k=(0, 1, -2), r=(0, 0, 0)), (0.5, 0.6, 0.7))
        assert c == pytest.approx(0.6 * 0.7**2 / 16)

    def test_fifth_order_diagonal_coefficient(self):
        # (V3/2)^5 / (3! 2!) = V3^5 / 384
        c = input_coefficient(MixTerm(k=(0, 0, 1), r=(0, 0, 2)), (1.0, 1.0, 1.0))
        assert c == pytest.approx(1.0 / 384)


class TestTermsUpToOrder:
    def test_fundamental_unknowns_truncation_3(self):
        terms = terms_up_to_order((0, 0, 1), 3)
        assert [t.argument_tones() for t in terms] == [
            (3,), (3, 3, -3), (2, -2, 3), (1, -1, 3)]

    def test_pure_cube_has_single_term(self):
        terms = terms_up_to_order((0, 0, 3), 3)
        assert len(terms) == 1
        assert terms[0].argument_tones() == (3, 3, 3)

    def test_truncation_5_adds_fifth_order(self):
        terms = terms_up_to_order((0, 0, 1), 5)
        assert len(terms) == 10
        assert (0, 0, 2) in {t.r for t in terms if t.order == 5}
        diag5 = MixTerm(k=(0, 0, 1), r=(0, 0, 2))
        assert diag5.argument_tones() == (3, 3, 3, -3, -3)

    def test_dc_has_no_order_zero_term(self):
        terms = terms_up_to_order((0, 0, 0), 3)
        assert all(t.order == 2 for t in terms)
        assert len(terms) == 3


# ---------------------------------------------------------------------------
# Randomized properties

index_vectors = st.lists(
    st.integers(min_value=-3, max_value=3), min_size=1, max_size=4
).map(tuple).filter(lambda k: sum(abs(v) for v in k) <= 3)


@settings(max_examples=1000, derandomize=True, deadline=None)
@given(index_vectors)
def test_canonicalize_idempotent(k):
    canon, _ = canonicalize_index(k)
    again, flag = canonicalize_index(canon)
    assert again == canon
    assert flag is False


@settings(max_examples=1000, derandomize=True, deadline=None)
@given(index_vectors)
def test_exactly_one_of_pair_is_canonical(k):
    canon, flag = canonicalize_index(k)
    neg = tuple(-v for v in k)
    canon_neg, flag_neg = canonicalize_index(neg)
    assert canon == canon_neg
    if any(v != 0 for v in k):
        assert flag != flag_neg
    else:
        assert flag is False and flag_neg is False


@settings(max_examples=1000, derandomize=True, deadline=None)
@given(
    st.integers(min_value=1, max_value=4),
    st.data(),
)
def test_multiplicity_is_positive_and_exact(m, data):
    n = data.draw(st.integers(min_value=1, max_value=4))
    k = data.draw(
        st.lists(st.integers(min_value=-n, max_value=n), min_size=m, max_size=m)
        .map(tuple)
        .filter(lambda k: sum(abs(v) for v in k) <= n
                and (sum(abs(v) for v in k) - n) % 2 == 0)
    )
    for term in terms_at_index(k, n):
        mult = term_multiplicity(term)
        assert mult >= 1
        assert mult == len(set(itertools.permutations(term.argument_tones())))
        assert math.factorial(term.order) % mult == 0


@settings(max_examples=1000, derandomize=True, deadline=None)
@given(st.lists(
    st.integers(min_value=-3, max_value=3).filter(lambda t: t != 0),
    min_size=1, max_size=5).map(tuple))
def test_kernel_args_canonicalization_properties(args):
    canon, flag = canonicalize_kernel_args(args, 3)
    # canonical form is invariant under permutation of the inputs
    for perm in itertools.islice(itertools.permutations(args), 6):
        assert canonicalize_kernel_args(tuple(perm), 3) == (canon, flag)
    # conjugating the input flips the flag and lands on the same form
    neg = tuple(-t for t in args)
    canon2, flag2 = canonicalize_kernel_args(neg, 3)
    assert canon2 == canon
    if any(sum(1 for t in args if t == m) != sum(1 for t in args if t == -m)
           for m in (1, 2, 3)):
        assert flag2 != flag
    # canonicalizing the canonical form is a fixed point
    assert canonicalize_kernel_args(canon, 3) == (canon, False)
