import math

import numpy as np
import pytest
from scipy import integrate

from thermalize.hamiltonian import ChainConfig, build_hamiltonian, sample_disorder
from thermalize.initial import BlochAngles, spin_coherent
from thermalize.spectra import (
    REFLECTION_WARNING,
    Histogram,
    LevelStatistics,
    density_of_states,
    diagonalize,
    diagonalize_chain,
    free_fermion_spectrum,
    goe_bin_density,
    goe_mean_r,
    goe_pdf,
    goe_pdf_folded,
    goe_total_variation,
    level_spacing_ratios,
    many_body_energies,
    normalize_energies,
    normalized_energy,
)
from thermalize.utils.errors import DegenerateSpectrumError, DomainError


@pytest.fixture
def sector_chain():
    return ChainConfig(n_sites=6, seed=11)


def test_sector_path_matches_plain_diagonalization(sector_chain):
    g = sample_disorder(sector_chain, 1)[0]
    plain = diagonalize_chain(sector_chain, g, resolve_sectors=False)
    blocked = diagonalize_chain(sector_chain, g, resolve_sectors=True)
    assert plain.sectors is None
    np.testing.assert_allclose(blocked.eigenvalues, plain.eigenvalues, atol=1e-10)
    H = build_hamiltonian(sector_chain, g).dense()
    vectors = blocked.eigenvectors
    np.testing.assert_allclose(H @ vectors, vectors * blocked.eigenvalues, atol=1e-10)
    assert sorted(np.unique(blocked.sectors)) == [-1, 1]
    assert np.count_nonzero(blocked.sectors == 1) == 32


def test_sector_path_is_skipped_without_symmetry(sector_chain):
    spec = diagonalize_chain(sector_chain.updated(field_phase=0.4))
    assert spec.sectors is None


@pytest.mark.parametrize("n_sites", [2, 5, 8])
def test_free_fermion_spectrum_matches_exact_diagonalization(n_sites):
    cfg = ChainConfig(n_sites=n_sites, field_g_mean=0.0, field_disorder_W=0.0)
    expected = many_body_energies(free_fermion_spectrum(cfg))
    for resolve in (False, True):
        spec = diagonalize_chain(cfg, resolve_sectors=resolve)
        np.testing.assert_allclose(spec.eigenvalues, expected, atol=1e-9)


def test_free_fermion_spectrum_needs_the_integrable_limit(sector_chain):
    with pytest.raises(DomainError):
        free_fermion_spectrum(sector_chain)
    with pytest.raises(DomainError):
        free_fermion_spectrum(ChainConfig(n_sites=3, field_g_mean=0.0, field_disorder_W=0.0,
                                          coupling_J=[10.0, 11.0]))


def test_many_body_energies_are_subset_sums():
    np.testing.assert_allclose(many_body_energies([1.0, 2.0]), [0.0, 1.0, 2.0, 3.0])


def test_all_excited_state_sits_at_zero_energy(sector_chain):
    g = sample_disorder(sector_chain, 1)[0]
    spec = diagonalize_chain(sector_chain, g)
    H = build_hamiltonian(sector_chain, g)
    psi = spin_coherent(BlochAngles(theta0=math.pi, phi0=0.0), 6)
    expected = -spec.e_min / (spec.e_max - spec.e_min)
    assert normalized_energy(psi, spec, H) == pytest.approx(expected, abs=1e-12)


def test_extreme_eigenstates_have_extreme_normalized_energy(small_chain):
    H = build_hamiltonian(small_chain)
    spec = diagonalize(H)
    assert normalized_energy(spec.ground_state(), spec, H) == pytest.approx(0.0, abs=1e-10)
    assert normalized_energy(spec.top_state(), spec, H) == pytest.approx(1.0, abs=1e-10)


def test_degenerate_extremes_are_rejected():
    with pytest.raises(DegenerateSpectrumError):
        normalize_energies([1.0], 2.0, 2.0)


def test_density_of_states_is_normalized(small_chain):
    spec = diagonalize_chain(small_chain)
    histogram = density_of_states(spec, 10)
    assert histogram.probabilities().sum() == pytest.approx(1.0)
    assert histogram.centers[0] == pytest.approx(0.05)
    with pytest.raises(DomainError):
        density_of_states(spec, 1)


def test_equally_spaced_levels_have_unit_ratios():
    stats = level_spacing_ratios(np.arange(20.0))
    assert stats.n_levels == 16
    np.testing.assert_allclose(stats.ratios, 1.0)
    assert stats.mean_r == pytest.approx(1.0)


def test_degenerate_spacings_are_dropped():
    levels = np.concatenate([[0.0, 0.0], np.arange(1.0, 15.0)])
    stats = level_spacing_ratios(levels, trim_fraction=0.0)
    assert stats.n_degenerate_dropped == 1
    assert stats.ratios.size == 13
    np.testing.assert_allclose(stats.ratios, 1.0)


def test_ratio_analysis_needs_enough_levels():
    with pytest.raises(DomainError):
        level_spacing_ratios(np.arange(8.0), trim_fraction=0.0)
    with pytest.raises(DomainError):
        level_spacing_ratios(np.arange(30.0), trim_fraction=0.5)


def test_ratios_are_pooled_over_sectors(sector_chain):
    spec = diagonalize_chain(sector_chain)
    stats = level_spacing_ratios(spec)
    assert stats.n_sectors == 2
    assert np.all((stats.ratios >= 0) & (stats.ratios <= 1))
    pooled = LevelStatistics.pooled([stats, stats])
    assert pooled.ratios.size == 2 * stats.ratios.size
    assert pooled.mean_r == pytest.approx(stats.mean_r)


def test_goe_surmise_normalization():
    total, _ = integrate.quad(goe_pdf, 0.0, np.inf)
    assert total == pytest.approx(1.0, abs=1e-8)
    folded, _ = integrate.quad(goe_pdf_folded, 0.0, 1.0)
    assert folded == pytest.approx(1.0, abs=1e-8)
    assert goe_mean_r() == pytest.approx(4 - 2 * math.sqrt(3), abs=1e-8)
    with pytest.raises(DomainError):
        goe_pdf(-0.1)
    with pytest.raises(DomainError):
        goe_pdf_folded(1.5)


def test_goe_bins_have_zero_distance_to_the_surmise():
    edges = np.linspace(0.0, 1.0, 21)
    histogram = Histogram(edges=edges, density=goe_bin_density(edges))
    assert histogram.probabilities().sum() == pytest.approx(1.0, abs=1e-10)
    assert goe_total_variation(histogram) == pytest.approx(0.0, abs=1e-12)


def test_random_goe_matrix_follows_the_surmise(rng):
    a = rng.normal(size=(1000, 1000))
    eigenvalues = np.linalg.eigvalsh((a + a.T) / 2)
    stats = level_spacing_ratios(eigenvalues)
    assert 0.50 <= stats.mean_r <= 0.56
    assert goe_total_variation(stats.histogram(10)) < 0.1


def test_mirror_symmetric_chain_gets_a_ratio_warning():
    clean = ChainConfig(n_sites=8, field_disorder_W=0.0)
    spec = diagonalize_chain(clean)
    assert spec.reflection_symmetric
    stats = level_spacing_ratios(spec)
    assert stats.warnings == [REFLECTION_WARNING]
    assert LevelStatistics.pooled([stats, stats]).warnings == [REFLECTION_WARNING]
    assert level_spacing_ratios(diagonalize_chain(clean, resolve_sectors=False)).warnings == [REFLECTION_WARNING]


def test_disordered_chain_has_no_ratio_warning(sector_chain):
    spec = diagonalize_chain(sector_chain)
    assert not spec.reflection_symmetric
    assert level_spacing_ratios(spec).warnings == []
    assert level_spacing_ratios(spec.eigenvalues).warnings == []


def test_normalized_energy_is_affine_invariant(small_chain, random_state):
    H = build_hamiltonian(small_chain)
    psi = random_state(4)
    scaled = (H * 2.5).plus_identity(-3.0)
    assert normalized_energy(psi, diagonalize(scaled), scaled) == pytest.approx(
        normalized_energy(psi, diagonalize(H), H), abs=1e-10)


def test_level_ratios_are_affine_invariant(rng):
    levels = np.sort(rng.normal(size=200))
    stats = level_spacing_ratios(levels)
    np.testing.assert_allclose(level_spacing_ratios(3.0 * levels + 7.0).ratios, stats.ratios, atol=1e-12)


def test_density_of_states_ignores_level_order(rng):
    levels = rng.normal(size=64)
    reference = density_of_states(np.sort(levels), 8)
    shuffled = density_of_states(rng.permutation(levels), 8)
    np.testing.assert_array_equal(shuffled.density, reference.density)
