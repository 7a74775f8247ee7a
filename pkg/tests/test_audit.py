import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from app.models.atdm import BlaParams
from app.services.atdm import build_compact
from app.services.audit import (
    AttackHints,
    control_mapping_exposure,
    count_inference,
    empirical_attack,
    heatmap_triplets,
    masking_distance,
    structural_counts,
)
from app.services.masking import generate_keys, identity_keys, mask, mask_insecure
from app.utils.exceptions import InvalidArgumentError
from conftest import bla_one


@pytest.mark.parametrize(
    ("scheme", "equations", "unknowns", "verdict"),
    [
        ("full", 13968, 20736, "under_determined"),
        ("no_cet", 6984, 5837, "over_determined"),
        ("no_crt", 1800, 1229, "over_determined"),
    ],
)
def test_day_ahead_counts(scheme, equations, unknowns, verdict):
    report = count_inference(24, 1, scheme)
    assert (report.equations, report.unknowns, report.verdict) == (equations, unknowns, verdict)


def test_count_inventory():
    report = count_inference(24, 1, "no_cet")
    assert report.inventory["V"] == 72 * 72
    assert sum(report.inventory.values()) == report.unknowns
    assert count_inference(24, 1, "no_crt").inventory["V2"] == 24


@pytest.mark.parametrize(
    ("args", "kwargs"),
    [((0, 1), {}), ((4, 0), {}), ((4, 1), {"duplication": 0}), ((4, 1), {"scheme": "no_te"})],
)
def test_count_rejects_bad_arguments(args, kwargs):
    with pytest.raises(InvalidArgumentError):
        count_inference(*args, **kwargs)


@given(T=st.integers(min_value=1, max_value=96), M=st.integers(min_value=1, max_value=6),
       q=st.integers(min_value=2, max_value=4))
def test_full_scheme_is_always_under_determined(T, M, q):
    assert count_inference(T, M, "full", q).verdict == "under_determined"


@given(M=st.integers(min_value=1, max_value=6), extra=st.integers(min_value=0, max_value=60))
def test_no_cet_is_over_determined_on_valid_horizons(M, extra):
    assert count_inference(M + 2 + extra, M, "no_cet").verdict == "over_determined"


@given(T=st.integers(min_value=1, max_value=48), M=st.integers(min_value=1, max_value=6))
def test_no_crt_verdict(T, M):
    over = count_inference(T, M, "no_crt").verdict == "over_determined"
    assert over == (T * T > 2 * M + 3)


@pytest.mark.parametrize("scheme", ["full", "no_cet", "no_crt"])
@pytest.mark.parametrize(("T", "M"), [(4, 1), (6, 2), (12, 3)])
def test_structural_counts_follow_block_shapes(scheme, T, M):
    report = count_inference(T, M, scheme)
    equations, unknowns = structural_counts(T, M, scheme)
    assert equations == report.equations
    # V² of the unrelaxed variant holds one scale per period, not per bound row
    expected = report.unknowns - T if scheme == "no_crt" else report.unknowns
    assert unknowns == expected


def compact_for(T):
    return build_compact(BlaParams.model_validate(bla_one(T)))


def test_attack_recovers_an_unmasked_model():
    T = 8
    c = compact_for(T)
    report = empirical_attack(mask(c, identity_keys(T)), AttackHints(T, 1), attempts=3, truth=c)
    assert report.attempt_successes[0]
    assert report.success
    assert report.attempt_r_errors[0] <= 1e-9


def test_alternating_attack_fails_against_the_full_scheme():
    T = 8
    c = compact_for(T)
    masked = mask(c, generate_keys(T, seed=21))
    report = empirical_attack(masked, AttackHints(T, 1), attempts=50, seed=3, truth=c)
    assert report.scheme == "full"
    assert len(report.attempt_successes) == 50
    assert report.residual <= 1e-6
    assert not report.success
    assert not any(report.attempt_successes)
    # every start already fits, so no template step is taken
    assert set(report.attempt_iterations) == {1}
    # many templates fit the blocks; almost none of them is the true model
    assert sum(r < 0.1 for r in report.attempt_r_errors) <= 3
    assert report.masked_rank < report.masked_rows


def test_row_space_fit_recovers_the_full_scheme():
    T = 8
    c = compact_for(T)
    report = empirical_attack(mask(c, generate_keys(T, seed=21)), AttackHints(T, 1), attempts=1, truth=c)
    # V keeps the row space of the plain constraints, duplicated or not
    assert report.structured_residual <= 1e-6
    assert report.structured_r_error <= 1e-6
    assert report.structured_success


def test_attack_breaks_the_scheme_without_duplication():
    T = 8
    c = compact_for(T)
    masked = mask_insecure(c, generate_keys(T, seed=21), "no_cet")
    report = empirical_attack(masked, AttackHints(T, 1, duplication=1), attempts=50, seed=3, truth=c)
    assert report.scheme == "no_cet"
    assert report.success
    assert sum(s <= 0.01 for s in report.attempt_s_errors) > len(report.attempt_s_errors) / 2
    assert max(report.attempt_iterations) >= 2


def test_attack_without_truth_reports_fit_only():
    T = 8
    masked = mask(compact_for(T), generate_keys(T, seed=2))
    report = empirical_attack(masked, AttackHints(T, 1), attempts=2)
    assert not report.success
    assert all(np.isnan(report.attempt_r_errors))
    assert len(report.attempt_residuals) == 2
    assert np.isnan(report.structured_r_error)
    assert not report.structured_success


def test_attack_rejects_wrong_hints():
    T = 8
    masked = mask(compact_for(T), generate_keys(T, seed=2))
    with pytest.raises(InvalidArgumentError):
        empirical_attack(masked, AttackHints(T + 1, 1))
    with pytest.raises(InvalidArgumentError):
        empirical_attack(masked, AttackHints(T, 1), attempts=0)


def test_masking_distance():
    T = 8
    c = compact_for(T)
    same = masking_distance(c.R, c.R)
    assert same.max_abs_correlation == pytest.approx(1.0)
    assert same.original_range == same.masked_range
    masked = mask(c, generate_keys(T, seed=5)).f1
    distance = masking_distance(c.R, masked, heatmap_rows=4)
    assert 0.0 <= distance.max_abs_correlation <= 1.0
    assert distance.heatmap_original.shape == (4, T)
    assert distance.heatmap_masked.shape == (4, T)
    with pytest.raises(InvalidArgumentError):
        masking_distance(c.R, np.ones((2, T + 1)))


def test_heatmap_triplets_are_row_major():
    grid = np.arange(6.0).reshape(2, 3)
    triplets = heatmap_triplets(grid)
    assert triplets.shape == (6, 3)
    np.testing.assert_array_equal(triplets[5], [1, 2, 5.0])
    np.testing.assert_array_equal(triplets[:, 2], grid.ravel())


def test_mapping_the_control_does_not_hide_it():
    T = 6
    c = compact_for(T)
    exposure = control_mapping_exposure(c, generate_keys(T, seed=8), seed=9)
    assert exposure.bla_id == "BLA1"
    assert exposure.exposed
    assert exposure.recovery_error <= 1e-8
