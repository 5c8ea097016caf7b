//! Closed-form expectation values: single-site Pauli operators, two-body
//! `σ^z σ^z` correlators, the averaged ferromagnetic correlator, and the
//! half-system 2-Rényi entropy.
//!
//! Each expectation is a pair contraction
//! `⟨O⟩ = (Σ_{m,m'} c_m c_{m'} C^{mm'} O^{mm'}) / Z`
//! served by the overlap caches in [`crate::state::PairMatrices`].

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpsError};
use crate::state::{PairMatrices, SpsState, NULL_NORM_EPS};
use crate::util::kahan_sum;

/// A split of the sites into an ordered kept region `A` and its complement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bipartition {
    sites: usize,
    region_a: Vec<usize>,
    region_b: Vec<usize>,
}

impl Bipartition {
    /// Validates that `region_a` is within range and duplicate-free; the
    /// complement keeps ascending site order.
    pub fn new(sites: usize, region_a: Vec<usize>) -> Result<Self> {
        if region_a.is_empty() || region_a.len() >= sites {
            return Err(SpsError::config(format!(
                "kept region must be a strict non-empty subset of {sites} sites"
            )));
        }
        let mut seen = vec![false; sites];
        for &s in &region_a {
            if s >= sites {
                return Err(SpsError::SiteOutOfRange { index: s, sites });
            }
            if seen[s] {
                return Err(SpsError::config(format!("site {s} repeated in region")));
            }
            seen[s] = true;
        }
        let region_b = (0..sites).filter(|&s| !seen[s]).collect();
        Ok(Bipartition {
            sites,
            region_a,
            region_b,
        })
    }

    /// Default split: the first `⌈L/2⌉` sites in native ordering (for 3D
    /// lattices that is the x-fastest flattening used by the builders).
    pub fn half_chain(sites: usize) -> Self {
        let half = sites.div_ceil(2);
        Bipartition::new(sites, (0..half).collect()).expect("half split is always valid")
    }

    pub fn site_count(&self) -> usize {
        self.sites
    }

    pub fn region_a(&self) -> &[usize] {
        &self.region_a
    }

    pub fn region_b(&self) -> &[usize] {
        &self.region_b
    }

    /// Upper bound `min(ln M, |A| ln 2)` on the 2-Rényi entropy any state
    /// with `M` product terms can reach on this split.
    pub fn renyi2_bound(&self, products: usize) -> f64 {
        (products as f64).ln().min(self.region_a.len() as f64 * std::f64::consts::LN_2)
    }
}

fn checked_norm(pm: &PairMatrices) -> Result<f64> {
    let z = pm.norm();
    if z <= NULL_NORM_EPS {
        return Err(SpsError::NullState {
            norm: z,
            limit: NULL_NORM_EPS,
        });
    }
    Ok(z)
}

/// `⟨σ^x_k⟩`, in `[-1, 1]` up to round-off.
pub fn expect_sigma_x(state: &SpsState, k: usize) -> Result<f64> {
    let pm = PairMatrices::compute(state);
    expect_sigma_x_with(state, &pm, k)
}

/// [`expect_sigma_x`] with a caller-provided overlap cache.
pub fn expect_sigma_x_with(state: &SpsState, pm: &PairMatrices, k: usize) -> Result<f64> {
    state.validate_site(k)?;
    let z = checked_norm(pm)?;
    let m = state.product_count();
    let mut block = Array2::zeros((m, m));
    pm.weighted_pauli_x(k, &mut block);
    Ok(PairMatrices::amplitude_form(state.amplitudes(), &block) / z)
}

/// `⟨σ^z_k⟩`.
pub fn expect_sigma_z(state: &SpsState, k: usize) -> Result<f64> {
    let pm = PairMatrices::compute(state);
    expect_sigma_z_with(state, &pm, k)
}

/// [`expect_sigma_z`] with a caller-provided overlap cache.
pub fn expect_sigma_z_with(state: &SpsState, pm: &PairMatrices, k: usize) -> Result<f64> {
    state.validate_site(k)?;
    let z = checked_norm(pm)?;
    let m = state.product_count();
    let mut block = Array2::zeros((m, m));
    pm.weighted_pauli_z(k, &mut block);
    Ok(PairMatrices::amplitude_form(state.amplitudes(), &block) / z)
}

/// `⟨σ^z_k σ^z_l⟩`; symmetric in `(k, l)`.
pub fn expect_zz(state: &SpsState, k: usize, l: usize) -> Result<f64> {
    let pm = PairMatrices::compute(state);
    expect_zz_with(state, &pm, k, l)
}

/// [`expect_zz`] with a caller-provided overlap cache.
pub fn expect_zz_with(state: &SpsState, pm: &PairMatrices, k: usize, l: usize) -> Result<f64> {
    state.validate_site(k)?;
    state.validate_site(l)?;
    if k == l {
        return Err(SpsError::EqualSites(k));
    }
    let z = checked_norm(pm)?;
    let m = state.product_count();
    let mut block = Array2::zeros((m, m));
    // Canonical site order makes the evaluation bitwise symmetric in (k, l).
    let (a, b) = if k < l { (k, l) } else { (l, k) };
    pm.weighted_pauli_zz(a, b, &mut block);
    Ok(PairMatrices::amplitude_form(state.amplitudes(), &block) / z)
}

/// Averaged connected correlator from the central reference site `⌊L/2⌋`:
/// `C_F = (1/(L-1)) Σ_{l≠ref} (⟨σ^z_ref σ^z_l⟩ − ⟨σ^z_ref⟩⟨σ^z_l⟩)`.
pub fn ferro_correlator(state: &SpsState) -> Result<f64> {
    let sites = state.site_count();
    if sites < 2 {
        return Err(SpsError::config(
            "ferromagnetic correlator needs at least 2 sites",
        ));
    }
    let pm = PairMatrices::compute(state);
    let reference = sites / 2;
    let z_ref = expect_sigma_z_with(state, &pm, reference)?;
    let mut acc = Vec::with_capacity(sites - 1);
    for l in 0..sites {
        if l != reference {
            let zz = expect_zz_with(state, &pm, reference, l)?;
            let zl = expect_sigma_z_with(state, &pm, l)?;
            acc.push(zz - z_ref * zl);
        }
    }
    Ok(kahan_sum(acc.into_iter()) / (sites - 1) as f64)
}

/// Half-system 2-Rényi entropy `S₂ = −ln Tr ρ_A²` via the pair contraction
/// `Tr ρ_A² = Tr(𝒞_B 𝒞_A 𝒞_B 𝒞_A) / Z²` with the region-restricted overlap
/// matrices `𝒞_A^{mn} = Π_{l∈A} cos(θ_l^m − θ_l^n)` and
/// `𝒞_B^{mn} = c_m c_n Π_{l∈B} cos(θ_l^m − θ_l^n)`. Cost `O(M²(L + M))`.
pub fn renyi2_entropy(state: &SpsState, part: &Bipartition) -> Result<f64> {
    if part.site_count() != state.site_count() {
        return Err(SpsError::dimension(format!(
            "bipartition over {} sites but state has {}",
            part.site_count(),
            state.site_count()
        )));
    }
    let pm = PairMatrices::compute(state);
    renyi2_entropy_with(state, &pm, part)
}

/// [`renyi2_entropy`] with a caller-provided overlap cache.
pub fn renyi2_entropy_with(
    state: &SpsState,
    pm: &PairMatrices,
    part: &Bipartition,
) -> Result<f64> {
    let z = checked_norm(pm)?;
    let m = state.product_count();
    let c = state.amplitudes();
    let theta = state.angles();

    // Region-restricted overlaps by direct products; no ratios, so the
    // near-singular bookkeeping is not needed here.
    let restricted = |region: &[usize]| {
        let mut out = Array2::<f64>::zeros((m, m));
        for a in 0..m {
            out[[a, a]] = 1.0;
            for b in (a + 1)..m {
                let mut prod = 1.0;
                for &site in region {
                    prod *= (theta[[site, a]] - theta[[site, b]]).cos();
                }
                out[[a, b]] = prod;
                out[[b, a]] = prod;
            }
        }
        out
    };
    let c_a = restricted(part.region_a());
    let mut c_b = restricted(part.region_b());
    for a in 0..m {
        for b in 0..m {
            c_b[[a, b]] *= c[a] * c[b];
        }
    }

    let r = c_b.dot(&c_a);
    let r = &r;
    let trace = kahan_sum((0..m).flat_map(|i| (0..m).map(move |j| r[[i, j]] * r[[j, i]])));
    let purity = trace / (z * z);
    if purity <= 0.0 {
        if purity <= -1e-12 {
            return Err(SpsError::Degeneracy(format!(
                "squared-density trace {purity:.3e} below -1e-12"
            )));
        }
        return Err(SpsError::Degeneracy(format!(
            "squared-density trace {purity:.3e} is not positive"
        )));
    }
    Ok(-purity.ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{
        dense_expect_x, dense_expect_z, dense_expect_zz, dense_ferro_correlator, dense_renyi2,
        expand_statevector,
    };
    use crate::state::{sample_random_sps, ParameterDomain};
    use ndarray::array;

    const QUARTER_PI: f64 = std::f64::consts::FRAC_PI_4;
    const HALF_PI: f64 = std::f64::consts::FRAC_PI_2;

    fn bell_state() -> SpsState {
        let inv = std::f64::consts::FRAC_1_SQRT_2;
        SpsState::new(array![inv, inv], array![[0.0, HALF_PI], [0.0, HALF_PI]]).unwrap()
    }

    #[test]
    fn x_polarized_product_state() {
        let s = SpsState::new(array![1.0], array![[QUARTER_PI], [QUARTER_PI]]).unwrap();
        assert!((expect_sigma_x(&s, 0).unwrap() - 1.0).abs() < 1e-14);
        assert!(expect_sigma_z(&s, 0).unwrap().abs() < 1e-14);
    }

    #[test]
    fn z_basis_product_state() {
        let s = SpsState::new(array![1.0], array![[0.0], [0.0]]).unwrap();
        assert!(expect_sigma_x(&s, 0).unwrap().abs() < 1e-14);
        assert!((expect_sigma_z(&s, 0).unwrap() - 1.0).abs() < 1e-14);
        assert!((expect_zz(&s, 0, 1).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn bell_state_correlations() {
        let s = bell_state();
        assert!((expect_zz(&s, 0, 1).unwrap() - 1.0).abs() < 1e-13);
        assert!(expect_sigma_z(&s, 0).unwrap().abs() < 1e-13);
    }

    #[test]
    fn equal_sites_rejected() {
        let s = bell_state();
        assert!(matches!(expect_zz(&s, 1, 1), Err(SpsError::EqualSites(1))));
    }

    #[test]
    fn site_out_of_range_rejected() {
        let s = bell_state();
        assert!(matches!(
            expect_sigma_x(&s, 2),
            Err(SpsError::SiteOutOfRange { .. })
        ));
    }

    #[test]
    fn null_state_is_an_error() {
        let s = SpsState::new(array![0.0], array![[0.1], [0.2]]).unwrap();
        assert!(matches!(
            expect_sigma_x(&s, 0),
            Err(SpsError::NullState { .. })
        ));
    }

    #[test]
    fn zz_is_symmetric() {
        let s = sample_random_sps(6, 4, &ParameterDomain::default().with_seed(9)).unwrap();
        let a = expect_zz(&s, 1, 4).unwrap();
        let b = expect_zz(&s, 4, 1).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn observables_match_dense_oracle() {
        for seed in 0..30 {
            let s =
                sample_random_sps(10, 5, &ParameterDomain::default().with_seed(seed)).unwrap();
            let dense = expand_statevector(&s).unwrap();
            for k in [0, 4, 9] {
                let x = expect_sigma_x(&s, k).unwrap();
                assert!((x - dense_expect_x(&dense, k)).abs() <= 1e-12);
                let z = expect_sigma_z(&s, k).unwrap();
                assert!((z - dense_expect_z(&dense, k)).abs() <= 1e-12);
                assert!(x.abs() <= 1.0 + 1e-10);
                assert!(z.abs() <= 1.0 + 1e-10);
            }
            let zz = expect_zz(&s, 2, 7).unwrap();
            assert!((zz - dense_expect_zz(&dense, 2, 7)).abs() <= 1e-12);
        }
    }

    #[test]
    fn product_states_have_no_connected_correlations() {
        let s = sample_random_sps(7, 1, &ParameterDomain::default().with_seed(1)).unwrap();
        assert!(ferro_correlator(&s).unwrap().abs() < 1e-12);
    }

    #[test]
    fn ghz_has_unit_ferro_correlator() {
        let inv = std::f64::consts::FRAC_1_SQRT_2;
        let s = SpsState::new(
            array![inv, inv],
            array![
                [0.0, HALF_PI],
                [0.0, HALF_PI],
                [0.0, HALF_PI],
                [0.0, HALF_PI]
            ],
        )
        .unwrap();
        assert!((ferro_correlator(&s).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ferro_correlator_matches_dense_oracle() {
        for seed in 40..48 {
            let s = sample_random_sps(8, 4, &ParameterDomain::default().with_seed(seed)).unwrap();
            let dense = expand_statevector(&s).unwrap();
            let cf = ferro_correlator(&s).unwrap();
            let oracle = dense_ferro_correlator(&dense, 4);
            assert!((cf - oracle).abs() <= 1e-11, "{cf} vs {oracle}");
        }
    }

    #[test]
    fn product_state_entropy_is_zero() {
        let s = sample_random_sps(6, 1, &ParameterDomain::default().with_seed(3)).unwrap();
        let part = Bipartition::half_chain(6);
        assert!(renyi2_entropy(&s, &part).unwrap().abs() < 1e-12);
    }

    #[test]
    fn bell_entropy_is_ln_two() {
        let part = Bipartition::new(2, vec![0]).unwrap();
        let s2 = renyi2_entropy(&bell_state(), &part).unwrap();
        assert!((s2 - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn entropy_matches_dense_partial_trace() {
        for seed in 100..110 {
            let s =
                sample_random_sps(12, 6, &ParameterDomain::default().with_seed(seed)).unwrap();
            let part = Bipartition::half_chain(12);
            let s2 = renyi2_entropy(&s, &part).unwrap();
            let dense = expand_statevector(&s).unwrap();
            let oracle = dense_renyi2(&dense, &part).unwrap();
            assert!((s2 - oracle).abs() <= 1e-10, "seed {seed}: {s2} vs {oracle}");
            let bound = part.renyi2_bound(6);
            assert!(s2 >= -1e-10 && s2 <= bound + 1e-8);
        }
    }

    #[test]
    fn bipartition_validation() {
        assert!(Bipartition::new(4, vec![]).is_err());
        assert!(Bipartition::new(4, vec![0, 1, 2, 3]).is_err());
        assert!(Bipartition::new(4, vec![0, 0]).is_err());
        assert!(Bipartition::new(4, vec![5]).is_err());
        let p = Bipartition::half_chain(5);
        assert_eq!(p.region_a(), &[0, 1, 2]);
        assert_eq!(p.region_b(), &[3, 4]);
    }
}
