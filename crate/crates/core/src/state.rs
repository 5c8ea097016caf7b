//! Variational parameter set and pairwise overlap caches.
//!
//! A state is a weighted superposition of `M` spin-1/2 product states over
//! `L` sites; each single-site factor is `(cos θ, sin θ)` with a real angle,
//! giving `(L + 1)·M` real parameters in total. All observables reduce to
//! contractions of the pair overlap matrix
//! `C^{mm'} = Π_l cos(θ_l^m − θ_l^{m'})` with per-site trigonometric factors,
//! which [`PairMatrices`] caches and serves.

use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpsError};
use crate::rng::stream_rng;
use crate::util::kahan_sum;

/// Cosine overlap factors with magnitude below this are routed through
/// leave-one-out products instead of ratio cancellation: the ratio forms of
/// the Pauli tensors divide by `cos(θ_k^m − θ_k^{m'})`, which vanishes when
/// two angles differ by π/2, while the physical products stay finite.
pub const SINGULAR_COS_EPS: f64 = 1e-12;

/// States with norm at or below this threshold are treated as numerically null.
pub const NULL_NORM_EPS: f64 = 1e-14;

/// Sampling box for random states: amplitudes uniform on `[c_low, c_high]`,
/// angles uniform on `[theta_low, theta_high]`, drawn from the stream keyed
/// by `seed`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterDomain {
    pub c_low: f64,
    pub c_high: f64,
    pub theta_low: f64,
    pub theta_high: f64,
    pub seed: u64,
}

impl Default for ParameterDomain {
    fn default() -> Self {
        ParameterDomain {
            c_low: -1.0,
            c_high: 1.0,
            theta_low: -std::f64::consts::FRAC_PI_2,
            theta_high: std::f64::consts::FRAC_PI_2,
            seed: 0,
        }
    }
}

impl ParameterDomain {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c_low < self.c_high) {
            return Err(SpsError::config(format!(
                "amplitude bounds must satisfy low < high, got [{}, {}]",
                self.c_low, self.c_high
            )));
        }
        if !(self.theta_low < self.theta_high) {
            return Err(SpsError::config(format!(
                "angle bounds must satisfy low < high, got [{}, {}]",
                self.theta_low, self.theta_high
            )));
        }
        if !(self.c_low.is_finite()
            && self.c_high.is_finite()
            && self.theta_low.is_finite()
            && self.theta_high.is_finite())
        {
            return Err(SpsError::config("domain bounds must be finite".to_string()));
        }
        Ok(())
    }
}

/// Superposition of product states: amplitudes `c` (length `M`) and angles
/// `theta` (shape `L × M`, radians). Column `m` of `theta` holds the angles
/// of the m-th product state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpsState {
    c: Array1<f64>,
    theta: Array2<f64>,
}

impl SpsState {
    /// Builds a state from raw parameters, checking shapes and finiteness.
    pub fn new(c: Array1<f64>, theta: Array2<f64>) -> Result<Self> {
        let m = c.len();
        if m == 0 {
            return Err(SpsError::dimension("amplitude vector is empty"));
        }
        if theta.nrows() == 0 {
            return Err(SpsError::dimension("angle matrix has zero sites"));
        }
        if theta.ncols() != m {
            return Err(SpsError::dimension(format!(
                "angle matrix has {} columns but there are {} amplitudes",
                theta.ncols(),
                m
            )));
        }
        if c.iter().any(|x| !x.is_finite()) || theta.iter().any(|x| !x.is_finite()) {
            return Err(SpsError::NonFinite("state parameters".to_string()));
        }
        Ok(SpsState { c, theta })
    }

    /// Number of sites `L`.
    pub fn site_count(&self) -> usize {
        self.theta.nrows()
    }

    /// Number of product states `M`.
    pub fn product_count(&self) -> usize {
        self.c.len()
    }

    /// Total parameter count `(L + 1)·M`.
    pub fn parameter_count(&self) -> usize {
        (self.site_count() + 1) * self.product_count()
    }

    pub fn amplitudes(&self) -> &Array1<f64> {
        &self.c
    }

    /// Angle matrix, shape `L × M`.
    pub fn angles(&self) -> &Array2<f64> {
        &self.theta
    }

    pub fn amplitude(&self, m: usize) -> f64 {
        self.c[m]
    }

    pub fn angle(&self, l: usize, m: usize) -> f64 {
        self.theta[[l, m]]
    }

    /// Flattens parameters as `[c_0..c_{M-1}, θ_{0,0}..θ_{0,M-1}, θ_{1,0}..]`
    /// (amplitudes first, then angles site-major). [`Self::from_flat`] and the
    /// optimizer index moments with the same layout.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.parameter_count());
        flat.extend(self.c.iter());
        flat.extend(self.theta.iter());
        flat
    }

    /// Inverse of [`Self::to_flat`].
    pub fn from_flat(sites: usize, products: usize, flat: &[f64]) -> Result<Self> {
        let expected = (sites + 1) * products;
        if flat.len() != expected {
            return Err(SpsError::dimension(format!(
                "flat parameter vector has length {}, expected {}",
                flat.len(),
                expected
            )));
        }
        let c = Array1::from_iter(flat[..products].iter().copied());
        let theta = Array2::from_shape_vec((sites, products), flat[products..].to_vec())
            .expect("shape checked above");
        SpsState::new(c, theta)
    }

    pub(crate) fn validate_site(&self, k: usize) -> Result<()> {
        if k >= self.site_count() {
            return Err(SpsError::SiteOutOfRange {
                index: k,
                sites: self.site_count(),
            });
        }
        Ok(())
    }
}

/// Draws a random state with i.i.d. uniform parameters from `domain`.
/// Identical `(L, M, domain)` inputs produce bit-identical states. Draw
/// order: all amplitudes by ascending `m`, then angles site-major.
pub fn sample_random_sps(sites: usize, products: usize, domain: &ParameterDomain) -> Result<SpsState> {
    if sites == 0 || products == 0 {
        return Err(SpsError::config(format!(
            "site and product counts must be positive, got L={sites}, M={products}"
        )));
    }
    domain.validate()?;
    let mut rng = stream_rng(domain.seed, "sps/sample", 0);
    let c = Array1::from_iter((0..products).map(|_| rng.random_range(domain.c_low..domain.c_high)));
    let theta = Array2::from_shape_fn((sites, products), |_| {
        rng.random_range(domain.theta_low..domain.theta_high)
    });
    SpsState::new(c, theta)
}

/// A pair `(m, m')` with at least one near-singular cosine factor, together
/// with the data needed to form exact leave-one-out products: the product of
/// all regular factors and the sites whose factors are small.
#[derive(Debug, Clone)]
pub(crate) struct SingularPair {
    pub m: usize,
    pub mp: usize,
    pub small_sites: Vec<usize>,
}

/// Overlap matrix and per-site Pauli tensor access for one state.
///
/// Stored data is `O(L·M + M²)`: per-site sines/cosines of the angles, the
/// full overlap matrix, and the norm. Per-site `M × M` tensor blocks are
/// materialized on demand; users supply the output buffer so hot loops can
/// reuse allocations. All accessors route near-singular pairs through exact
/// leave-one-out products (see [`SINGULAR_COS_EPS`]).
#[derive(Debug, Clone)]
pub struct PairMatrices {
    sites: usize,
    products: usize,
    /// cos θ and sin θ, transposed to `M × L` so per-pair site loops are contiguous.
    cos_ml: Array2<f64>,
    sin_ml: Array2<f64>,
    overlap: Array2<f64>,
    z_norm: f64,
    singular: Vec<SingularPair>,
}

/// Builds the overlap matrix, norm, and tensor caches for `state`.
pub fn compute_overlap_matrix(state: &SpsState) -> PairMatrices {
    PairMatrices::compute(state)
}

/// Norm `Z = Σ_{m,m'} c_m c_{m'} C^{mm'}`; non-negative up to round-off.
pub fn norm(state: &SpsState) -> f64 {
    let l = state.site_count();
    let m = state.product_count();
    let theta = state.angles();
    let c = state.amplitudes();
    // Direct products over sites; no ratios involved, so no singular handling.
    let mut terms = Vec::with_capacity(m * (m + 1) / 2);
    for a in 0..m {
        terms.push(c[a] * c[a]);
        for b in (a + 1)..m {
            let mut prod = 1.0;
            for site in 0..l {
                prod *= (theta[[site, a]] - theta[[site, b]]).cos();
            }
            terms.push(2.0 * c[a] * c[b] * prod);
        }
    }
    kahan_sum(terms.iter().copied())
}

impl PairMatrices {
    pub fn compute(state: &SpsState) -> PairMatrices {
        let l = state.site_count();
        let m = state.product_count();
        let theta = state.angles();

        let mut cos_ml = Array2::zeros((m, l));
        let mut sin_ml = Array2::zeros((m, l));
        for prod in 0..m {
            for site in 0..l {
                let t = theta[[site, prod]];
                cos_ml[[prod, site]] = t.cos();
                sin_ml[[prod, site]] = t.sin();
            }
        }

        let mut overlap = Array2::zeros((m, m));
        let mut singular = Vec::new();
        for a in 0..m {
            overlap[[a, a]] = 1.0;
            for b in (a + 1)..m {
                let mut regular = 1.0;
                let mut smalls: Vec<usize> = Vec::new();
                for site in 0..l {
                    let cd = cos_ml[[a, site]] * cos_ml[[b, site]]
                        + sin_ml[[a, site]] * sin_ml[[b, site]];
                    if cd.abs() < SINGULAR_COS_EPS {
                        smalls.push(site);
                    } else {
                        regular *= cd;
                    }
                }
                let full = if smalls.is_empty() {
                    regular
                } else {
                    let mut v = regular;
                    for &site in &smalls {
                        v *= cos_ml[[a, site]] * cos_ml[[b, site]]
                            + sin_ml[[a, site]] * sin_ml[[b, site]];
                    }
                    singular.push(SingularPair {
                        m: a,
                        mp: b,
                        small_sites: smalls,
                    });
                    v
                };
                overlap[[a, b]] = full;
                overlap[[b, a]] = full;
            }
        }

        let c = state.amplitudes();
        let z_norm = kahan_sum((0..m).flat_map(|a| {
            let overlap = &overlap;
            (0..m).map(move |b| c[a] * c[b] * overlap[[a, b]])
        }));

        PairMatrices {
            sites: l,
            products: m,
            cos_ml,
            sin_ml,
            overlap,
            z_norm,
            singular,
        }
    }

    pub fn site_count(&self) -> usize {
        self.sites
    }

    pub fn product_count(&self) -> usize {
        self.products
    }

    /// Full overlap matrix `C`.
    pub fn overlap(&self) -> &Array2<f64> {
        &self.overlap
    }

    /// Norm `Z = cᵀ C c`.
    pub fn norm(&self) -> f64 {
        self.z_norm
    }

    pub(crate) fn singular_pairs(&self) -> &[SingularPair] {
        &self.singular
    }

    pub(crate) fn cos_diff_entry(&self, site: usize, a: usize, b: usize) -> f64 {
        self.cos_ml[[a, site]] * self.cos_ml[[b, site]]
            + self.sin_ml[[a, site]] * self.sin_ml[[b, site]]
    }

    pub(crate) fn sin_diff_entry(&self, site: usize, a: usize, b: usize) -> f64 {
        self.sin_ml[[a, site]] * self.cos_ml[[b, site]]
            - self.cos_ml[[a, site]] * self.sin_ml[[b, site]]
    }

    pub(crate) fn sin_sum_entry(&self, site: usize, a: usize, b: usize) -> f64 {
        self.sin_ml[[a, site]] * self.cos_ml[[b, site]]
            + self.cos_ml[[a, site]] * self.sin_ml[[b, site]]
    }

    pub(crate) fn cos_sum_entry(&self, site: usize, a: usize, b: usize) -> f64 {
        self.cos_ml[[a, site]] * self.cos_ml[[b, site]]
            - self.sin_ml[[a, site]] * self.sin_ml[[b, site]]
    }

    /// Exact `Π_{l ∉ excluded} cos(θ_l^a − θ_l^b)` by direct multiplication.
    /// Used to patch the rare near-singular pairs; O(L) per call.
    pub(crate) fn product_excluding(&self, a: usize, b: usize, excluded: &[usize]) -> f64 {
        if a == b {
            return 1.0;
        }
        let mut prod = 1.0;
        for site in 0..self.sites {
            if !excluded.contains(&site) {
                prod *= self.cos_diff_entry(site, a, b);
            }
        }
        prod
    }

    /// Writes `cos(θ_k^m − θ_k^{m'})` into `out`.
    pub(crate) fn fill_cos_diff(&self, k: usize, out: &mut Array2<f64>) {
        self.fill_site_block(k, out, |c1, s1, c2, s2| c1 * c2 + s1 * s2);
    }

    /// Writes `sin(θ_k^m − θ_k^{m'})` into `out` (antisymmetric).
    pub(crate) fn fill_sin_diff(&self, k: usize, out: &mut Array2<f64>) {
        self.fill_site_block(k, out, |c1, s1, c2, s2| s1 * c2 - c1 * s2);
    }

    /// Writes `sin(θ_k^m + θ_k^{m'})` into `out`.
    pub(crate) fn fill_sin_sum(&self, k: usize, out: &mut Array2<f64>) {
        self.fill_site_block(k, out, |c1, s1, c2, s2| s1 * c2 + c1 * s2);
    }

    /// Writes `cos(θ_k^m + θ_k^{m'})` into `out`.
    pub(crate) fn fill_cos_sum(&self, k: usize, out: &mut Array2<f64>) {
        self.fill_site_block(k, out, |c1, s1, c2, s2| c1 * c2 - s1 * s2);
    }

    fn fill_site_block<F>(&self, k: usize, out: &mut Array2<f64>, f: F)
    where
        F: Fn(f64, f64, f64, f64) -> f64,
    {
        debug_assert_eq!(out.dim(), (self.products, self.products));
        for a in 0..self.products {
            let (ca, sa) = (self.cos_ml[[a, k]], self.sin_ml[[a, k]]);
            for b in 0..self.products {
                out[[a, b]] = f(ca, sa, self.cos_ml[[b, k]], self.sin_ml[[b, k]]);
            }
        }
    }

    /// Writes the leave-one-out overlap `Π_{l ≠ k} cos(θ_l^m − θ_l^{m'})`
    /// into `out`. Regular pairs use `C / cos_k`; near-singular pairs are
    /// recomputed exactly.
    pub(crate) fn fill_leave_one_out(&self, k: usize, out: &mut Array2<f64>) {
        debug_assert_eq!(out.dim(), (self.products, self.products));
        for a in 0..self.products {
            out[[a, a]] = 1.0;
            for b in 0..self.products {
                if a != b {
                    out[[a, b]] = self.overlap[[a, b]] / self.cos_diff_entry(k, a, b);
                }
            }
        }
        for sp in &self.singular {
            let v = self.product_excluding(sp.m, sp.mp, &[k]);
            out[[sp.m, sp.mp]] = v;
            out[[sp.mp, sp.m]] = v;
        }
    }

    /// Writes the leave-two-out overlap `Π_{l ∉ {k, q}} cos(θ_l^m − θ_l^{m'})`.
    pub(crate) fn fill_leave_two_out(&self, k: usize, q: usize, out: &mut Array2<f64>) {
        debug_assert_ne!(k, q);
        for a in 0..self.products {
            out[[a, a]] = 1.0;
            for b in 0..self.products {
                if a != b {
                    out[[a, b]] = self.overlap[[a, b]]
                        / (self.cos_diff_entry(k, a, b) * self.cos_diff_entry(q, a, b));
                }
            }
        }
        for sp in &self.singular {
            let v = self.product_excluding(sp.m, sp.mp, &[k, q]);
            out[[sp.m, sp.mp]] = v;
            out[[sp.mp, sp.m]] = v;
        }
    }

    /// Writes `Π_{l ∉ excluded} cos(θ_l^m − θ_l^{m'})` for an arbitrary
    /// exclusion set.
    pub(crate) fn fill_leave_out(&self, excluded: &[usize], out: &mut Array2<f64>) {
        for a in 0..self.products {
            out[[a, a]] = 1.0;
            for b in 0..self.products {
                if a != b {
                    let mut denom = 1.0;
                    for &site in excluded {
                        denom *= self.cos_diff_entry(site, a, b);
                    }
                    out[[a, b]] = self.overlap[[a, b]] / denom;
                }
            }
        }
        for sp in &self.singular {
            let v = self.product_excluding(sp.m, sp.mp, excluded);
            out[[sp.m, sp.mp]] = v;
            out[[sp.mp, sp.m]] = v;
        }
    }

    /// Writes `C^{mm'} X_k^{mm'}` (overlap-weighted Pauli-X tensor) into `out`.
    /// Always finite: equals `sin(θ_k^m + θ_k^{m'}) · Π_{l≠k} cos(θ_l^m − θ_l^{m'})`.
    pub fn weighted_pauli_x(&self, k: usize, out: &mut Array2<f64>) {
        self.fill_leave_one_out(k, out);
        for a in 0..self.products {
            for b in 0..self.products {
                out[[a, b]] *= self.sin_sum_entry(k, a, b);
            }
        }
    }

    /// Writes `C^{mm'} Z_k^{mm'}` (overlap-weighted Pauli-Z tensor) into `out`.
    pub fn weighted_pauli_z(&self, k: usize, out: &mut Array2<f64>) {
        self.fill_leave_one_out(k, out);
        for a in 0..self.products {
            for b in 0..self.products {
                out[[a, b]] *= self.cos_sum_entry(k, a, b);
            }
        }
    }

    /// Writes `C^{mm'} Z_k^{mm'} Z_q^{mm'}` into `out`.
    pub fn weighted_pauli_zz(&self, k: usize, q: usize, out: &mut Array2<f64>) {
        self.fill_leave_two_out(k, q, out);
        for a in 0..self.products {
            for b in 0..self.products {
                out[[a, b]] *= self.cos_sum_entry(k, a, b) * self.cos_sum_entry(q, a, b);
            }
        }
    }

    /// Quadratic form `xᵀ B y` for the amplitude vector, used by the
    /// observable and gradient contractions.
    pub(crate) fn amplitude_form(c: &Array1<f64>, block: &Array2<f64>) -> f64 {
        let m = c.len();
        kahan_sum((0..m).flat_map(|a| (0..m).map(move |b| c[a] * c[b] * block[[a, b]])))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn bell_state() -> SpsState {
        let inv = std::f64::consts::FRAC_1_SQRT_2;
        let half_pi = std::f64::consts::FRAC_PI_2;
        SpsState::new(
            array![inv, inv],
            array![[0.0, half_pi], [0.0, half_pi]],
        )
        .unwrap()
    }

    #[test]
    fn sampling_is_deterministic() {
        let domain = ParameterDomain::default().with_seed(42);
        let a = sample_random_sps(1, 1, &domain).unwrap();
        let b = sample_random_sps(1, 1, &domain).unwrap();
        assert_eq!(a, b);

        let big_a = sample_random_sps(9, 5, &domain).unwrap();
        let big_b = sample_random_sps(9, 5, &domain).unwrap();
        assert_eq!(big_a, big_b);
    }

    #[test]
    fn sampling_respects_bounds() {
        let domain = ParameterDomain {
            c_low: 0.25,
            c_high: 0.5,
            theta_low: -0.1,
            theta_high: 0.1,
            seed: 3,
        };
        let s = sample_random_sps(6, 4, &domain).unwrap();
        assert!(s.amplitudes().iter().all(|&c| (0.25..0.5).contains(&c)));
        assert!(s.angles().iter().all(|&t| (-0.1..0.1).contains(&t)));
    }

    #[test]
    fn invalid_domain_is_config_error() {
        let domain = ParameterDomain {
            c_low: 1.0,
            c_high: -1.0,
            ..ParameterDomain::default()
        };
        let err = sample_random_sps(2, 2, &domain).unwrap_err();
        assert!(matches!(err, SpsError::Config(_)));
    }

    #[test]
    fn mismatched_shapes_rejected() {
        let err = SpsState::new(array![1.0, 2.0], array![[0.0], [0.0]]).unwrap_err();
        assert!(matches!(err, SpsError::Dimension(_)));
    }

    #[test]
    fn single_product_state_overlap() {
        let s = SpsState::new(array![1.0], array![[0.3], [1.1], [-0.4]]).unwrap();
        let pm = PairMatrices::compute(&s);
        assert_eq!(pm.overlap()[[0, 0]], 1.0);
        assert_eq!(pm.norm(), 1.0);
    }

    #[test]
    fn identical_columns_give_all_ones() {
        let s = SpsState::new(array![1.0, 1.0], array![[0.7, 0.7], [-0.2, -0.2]]).unwrap();
        let pm = PairMatrices::compute(&s);
        for a in 0..2 {
            for b in 0..2 {
                assert!((pm.overlap()[[a, b]] - 1.0).abs() < 1e-15);
            }
        }
        assert!((pm.norm() - 4.0).abs() < 1e-14);
    }

    #[test]
    fn bell_state_overlap_is_identity() {
        let pm = PairMatrices::compute(&bell_state());
        let c = pm.overlap();
        assert!((c[[0, 0]] - 1.0).abs() < 1e-15);
        assert!((c[[1, 1]] - 1.0).abs() < 1e-15);
        assert!(c[[0, 1]].abs() < 1e-15);
        assert!((pm.norm() - 1.0).abs() < 1e-14);
        // Both sites of the cross pair are singular.
        assert_eq!(pm.singular_pairs().len(), 1);
        assert_eq!(pm.singular_pairs()[0].small_sites, vec![0, 1]);
    }

    #[test]
    fn norm_of_scalar_amplitude() {
        let s = SpsState::new(array![0.5], array![[0.9]]).unwrap();
        assert!((norm(&s) - 0.25).abs() < 1e-15);
        assert!((PairMatrices::compute(&s).norm() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn norm_agrees_with_pair_matrices_on_random_states() {
        for seed in 0..20 {
            let s = sample_random_sps(8, 4, &ParameterDomain::default().with_seed(seed)).unwrap();
            let direct = norm(&s);
            let cached = PairMatrices::compute(&s).norm();
            assert!((direct - cached).abs() <= 1e-12, "{direct} vs {cached}");
        }
    }

    #[test]
    fn flat_round_trip() {
        let s = sample_random_sps(5, 3, &ParameterDomain::default().with_seed(11)).unwrap();
        let flat = s.to_flat();
        assert_eq!(flat.len(), s.parameter_count());
        let back = SpsState::from_flat(5, 3, &flat).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn weighted_tensors_match_direct_products_near_singularities() {
        // One site at exactly π/2 difference, another close to it.
        let half_pi = std::f64::consts::FRAC_PI_2;
        let s = SpsState::new(
            array![0.8, -0.6],
            array![[0.2, 0.2 + half_pi], [0.1, 0.1 + half_pi - 5e-13], [0.4, -0.3]],
        )
        .unwrap();
        let pm = PairMatrices::compute(&s);
        let mprod = s.product_count();
        let mut out = Array2::zeros((mprod, mprod));
        for k in 0..s.site_count() {
            pm.weighted_pauli_x(k, &mut out);
            for a in 0..mprod {
                for b in 0..mprod {
                    let mut expect =
                        (s.angle(k, a) + s.angle(k, b)).sin();
                    for l in 0..s.site_count() {
                        if l != k {
                            expect *= (s.angle(l, a) - s.angle(l, b)).cos();
                        }
                    }
                    assert!(
                        (out[[a, b]] - expect).abs() < 1e-12,
                        "site {k} pair ({a},{b}): {} vs {expect}",
                        out[[a, b]]
                    );
                }
            }
        }
    }

    #[test]
    fn mean_norm_matches_prediction_at_scale() {
        // 10,000 draws at L = 20, M = 64: sample mean of Z within three
        // standard errors of M/3, per the closed-form norm statistics.
        let samples = 10_000;
        let (l, m) = (20, 64);
        let mut acc = 0.0;
        for i in 0..samples {
            let domain = ParameterDomain::default().with_seed(900_000 + i as u64);
            let s = sample_random_sps(l, m, &domain).unwrap();
            acc += norm(&s);
        }
        let mean = acc / samples as f64;
        let predicted = m as f64 / 3.0;
        let var = 4.0 * m as f64 / 45.0
            + (m * (m - 1)) as f64 / (9.0 * (1u64 << l) as f64);
        let se = (var / samples as f64).sqrt();
        assert!(
            (mean - predicted).abs() <= 3.0 * se,
            "mean {mean} vs predicted {predicted} (3·SE = {})",
            3.0 * se
        );
    }
}
