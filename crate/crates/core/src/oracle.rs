//! Brute-force dense verification backend.
//!
//! Everything here works on explicit `2^L` statevectors and serves as ground
//! truth for the closed-form evaluation paths: statevector expansion of a
//! superposition state, exact minimal eigenpairs of the Hamiltonian (a dense
//! full eigensolve and an independent restarted Lanczos route), partial
//! traces, and central finite differences for gradient checks.
//!
//! Basis convention: site `l` maps to bit `L - 1 - l` of the basis index, so
//! site 0 is the most significant bit; spin value `s = 0` is the `σ^z = +1`
//! component `(cos θ)` and `s = 1` the `σ^z = -1` component `(sin θ)`.

use nalgebra::DMatrix;
use ndarray::Array2;
use rand::Rng;

use crate::error::{Result, SpsError};
use crate::gradients::GradientVector;
use crate::hamiltonian::CouplingGraph;
use crate::observables::Bipartition;
use crate::rng::stream_rng;
use crate::state::SpsState;
use crate::util::kahan_sum;

/// Hard cap on dense vector length (2^20 doubles = 8 MiB per vector).
pub const MAX_DENSE_SITES: usize = 20;

/// Largest system the dense full eigensolve accepts; beyond this the matrix
/// itself (2^L squared) stops being practical and the iterative path takes
/// over.
pub const MAX_DENSE_EIG_SITES: usize = 12;

/// Sites above which [`exact_ground_state`] switches to the Lanczos path.
const DENSE_EIG_AUTO_LIMIT: usize = 10;

const LANCZOS_SEED: u64 = 0x5054_1a2c_0ffe_e500;

/// Explicit real statevector of `2^L` amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseState {
    sites: usize,
    amplitudes: Vec<f64>,
}

impl DenseState {
    pub fn new(sites: usize, amplitudes: Vec<f64>) -> Result<Self> {
        if sites > MAX_DENSE_SITES {
            return Err(SpsError::Capacity(format!(
                "dense states capped at {MAX_DENSE_SITES} sites, got {sites}"
            )));
        }
        if amplitudes.len() != 1 << sites {
            return Err(SpsError::dimension(format!(
                "dense state over {sites} sites needs {} amplitudes, got {}",
                1usize << sites,
                amplitudes.len()
            )));
        }
        if amplitudes.iter().any(|a| !a.is_finite()) {
            return Err(SpsError::NonFinite("dense amplitudes".to_string()));
        }
        Ok(DenseState { sites, amplitudes })
    }

    pub fn site_count(&self) -> usize {
        self.sites
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    /// Squared Euclidean norm; equals the superposition norm `Z` when the
    /// state came from [`expand_statevector`].
    pub fn norm_sq(&self) -> f64 {
        kahan_sum(self.amplitudes.iter().map(|a| a * a))
    }

    /// Unit-norm copy.
    pub fn normalized(&self) -> Result<DenseState> {
        let n = self.norm_sq().sqrt();
        if n <= 0.0 || !n.is_finite() {
            return Err(SpsError::Degeneracy("cannot normalize null vector".to_string()));
        }
        DenseState::new(self.sites, self.amplitudes.iter().map(|a| a / n).collect())
    }
}

fn site_mask(l: usize, sites: usize) -> usize {
    1 << (sites - 1 - l)
}

/// Sign of `σ^z` at site `l` for basis index `b`: +1 for bit 0, -1 for bit 1.
fn z_sign(b: usize, l: usize, sites: usize) -> f64 {
    if b & site_mask(l, sites) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Expands the superposition into its full statevector: the sum of `M`
/// Kronecker products weighted by the amplitudes. No normalization applied.
pub fn expand_statevector(state: &SpsState) -> Result<DenseState> {
    let sites = state.site_count();
    if sites > MAX_DENSE_SITES {
        return Err(SpsError::Capacity(format!(
            "statevector expansion capped at {MAX_DENSE_SITES} sites, got {sites}"
        )));
    }
    let dim = 1usize << sites;
    let mut out = vec![0.0; dim];
    let mut work = Vec::with_capacity(dim);
    for m in 0..state.product_count() {
        work.clear();
        work.push(state.amplitude(m));
        for l in 0..sites {
            let (cos_t, sin_t) = (state.angle(l, m).cos(), state.angle(l, m).sin());
            let half = work.len();
            for i in 0..half {
                work.push(work[i] * sin_t);
                work[i] *= cos_t;
            }
            // Interleave: index grows as b = 2·b_prev + s with s the new bit.
            let mut next = Vec::with_capacity(2 * half);
            for i in 0..half {
                next.push(work[i]);
                next.push(work[half + i]);
            }
            work = next;
        }
        for (o, w) in out.iter_mut().zip(&work) {
            *o += w;
        }
    }
    DenseState::new(sites, out)
}

/// Diagonal of the Hamiltonian in the computational basis.
fn hamiltonian_diagonal(graph: &CouplingGraph) -> Vec<f64> {
    let sites = graph.site_count();
    let dim = 1usize << sites;
    let mut diag = vec![0.0; dim];
    for b in 0..dim {
        let mut v = 0.0;
        for e in graph.edges() {
            v += e.strength * z_sign(b, e.k, sites) * z_sign(b, e.l, sites);
        }
        if graph.h_z != 0.0 {
            for l in 0..sites {
                v -= graph.h_z * z_sign(b, l, sites);
            }
        }
        diag[b] = v;
    }
    diag
}

/// `out = H v` without forming the matrix; `O(L · 2^L)`.
pub fn apply_hamiltonian(graph: &CouplingGraph, diag: &[f64], v: &[f64], out: &mut [f64]) {
    let sites = graph.site_count();
    for (o, (d, x)) in out.iter_mut().zip(diag.iter().zip(v)) {
        *o = d * x;
    }
    if graph.h_x != 0.0 {
        for l in 0..sites {
            let mask = site_mask(l, sites);
            for b in 0..v.len() {
                out[b] -= graph.h_x * v[b ^ mask];
            }
        }
    }
}

fn check_capacity(graph: &CouplingGraph) -> Result<usize> {
    let sites = graph.site_count();
    if sites > MAX_DENSE_SITES {
        return Err(SpsError::Capacity(format!(
            "exact diagonalization capped at {MAX_DENSE_SITES} sites, got {sites}"
        )));
    }
    Ok(sites)
}

fn residual_norm(graph: &CouplingGraph, diag: &[f64], energy: f64, v: &[f64]) -> f64 {
    let mut hv = vec![0.0; v.len()];
    apply_hamiltonian(graph, diag, v, &mut hv);
    let num = kahan_sum(hv.iter().zip(v).map(|(h, x)| (h - energy * x) * (h - energy * x)));
    let den = kahan_sum(v.iter().map(|x| x * x));
    (num / den).sqrt()
}

/// Minimal eigenpair of the Hamiltonian. Dispatches to the dense full
/// eigensolve for small systems and the restarted Lanczos solver beyond;
/// both routes verify the residual `‖Hv − Ev‖ ≤ 1e-9 ‖v‖` before returning.
pub fn exact_ground_state(graph: &CouplingGraph) -> Result<(f64, DenseState)> {
    let sites = check_capacity(graph)?;
    if sites <= DENSE_EIG_AUTO_LIMIT {
        exact_ground_state_dense(graph)
    } else {
        exact_ground_state_iterative(graph)
    }
}

/// Dense route: assembles the full matrix and takes the full symmetric
/// eigendecomposition. Quadratic memory in `2^L`; capped at
/// [`MAX_DENSE_EIG_SITES`].
pub fn exact_ground_state_dense(graph: &CouplingGraph) -> Result<(f64, DenseState)> {
    let sites = check_capacity(graph)?;
    if sites > MAX_DENSE_EIG_SITES {
        return Err(SpsError::Capacity(format!(
            "dense eigensolve capped at {MAX_DENSE_EIG_SITES} sites, got {sites}"
        )));
    }
    let dim = 1usize << sites;
    let diag = hamiltonian_diagonal(graph);
    let mut h = DMatrix::<f64>::zeros(dim, dim);
    for b in 0..dim {
        h[(b, b)] = diag[b];
    }
    if graph.h_x != 0.0 {
        for l in 0..sites {
            let mask = site_mask(l, sites);
            for b in 0..dim {
                h[(b, b ^ mask)] -= graph.h_x;
            }
        }
    }
    let eig = h.symmetric_eigen();
    let mut best = 0;
    for i in 1..dim {
        if eig.eigenvalues[i] < eig.eigenvalues[best] {
            best = i;
        }
    }
    let energy = eig.eigenvalues[best];
    let v: Vec<f64> = eig.eigenvectors.column(best).iter().copied().collect();
    let res = residual_norm(graph, &diag, energy, &v);
    if res > 1e-9 {
        return Err(SpsError::NoConvergence(format!(
            "dense eigensolve residual {res:.3e} exceeds 1e-9"
        )));
    }
    Ok((energy, DenseState::new(sites, v)?))
}

/// Iterative route: restarted Lanczos with full reorthogonalization on the
/// matrix-free Hamiltonian product; restarts from the best Ritz vector until
/// the residual drops below `1e-9`.
pub fn exact_ground_state_iterative(graph: &CouplingGraph) -> Result<(f64, DenseState)> {
    let sites = check_capacity(graph)?;
    let dim = 1usize << sites;
    let diag = hamiltonian_diagonal(graph);
    let max_basis = dim.min(40);
    let tol = 1e-9;
    let max_restarts = 500;

    let mut rng = stream_rng(LANCZOS_SEED, "oracle/lanczos", 0);
    let mut v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    normalize(&mut v);

    let mut hw = vec![0.0; dim];
    for _ in 0..max_restarts {
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(max_basis);
        let mut alphas: Vec<f64> = Vec::with_capacity(max_basis);
        let mut betas: Vec<f64> = Vec::with_capacity(max_basis);

        basis.push(v.clone());
        apply_hamiltonian(graph, &diag, &basis[0], &mut hw);
        let mut w = hw.clone();
        let a0 = dot(&basis[0], &w);
        alphas.push(a0);
        axpy(&mut w, -a0, &basis[0]);

        while basis.len() < max_basis {
            reorthogonalize(&mut w, &basis);
            let beta = dot(&w, &w).sqrt();
            if beta < 1e-12 {
                break;
            }
            for x in w.iter_mut() {
                *x /= beta;
            }
            betas.push(beta);
            basis.push(w.clone());
            let j = basis.len() - 1;
            apply_hamiltonian(graph, &diag, &basis[j], &mut hw);
            w = hw.clone();
            let aj = dot(&basis[j], &w);
            alphas.push(aj);
            axpy(&mut w, -aj, &basis[j]);
            axpy(&mut w, -betas[j - 1], &basis[j - 1]);
        }

        // Small tridiagonal eigenproblem for the Ritz pair.
        let k = alphas.len();
        let mut t = DMatrix::<f64>::zeros(k, k);
        for i in 0..k {
            t[(i, i)] = alphas[i];
            if i + 1 < k {
                t[(i, i + 1)] = betas[i];
                t[(i + 1, i)] = betas[i];
            }
        }
        let eig = t.symmetric_eigen();
        let mut best = 0;
        for i in 1..k {
            if eig.eigenvalues[i] < eig.eigenvalues[best] {
                best = i;
            }
        }
        let lambda = eig.eigenvalues[best];
        let y = eig.eigenvectors.column(best);
        let mut x = vec![0.0; dim];
        for (i, base) in basis.iter().enumerate() {
            axpy(&mut x, y[i], base);
        }
        normalize(&mut x);
        let res = residual_norm(graph, &diag, lambda, &x);
        if res <= tol {
            return Ok((lambda, DenseState::new(sites, x)?));
        }
        v = x;
    }
    Err(SpsError::NoConvergence(format!(
        "Lanczos residual above {tol:.1e} after {max_restarts} restarts"
    )))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    kahan_sum(a.iter().zip(b).map(|(x, y)| x * y))
}

fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn normalize(v: &mut [f64]) {
    let n = dot(v, v).sqrt();
    for x in v.iter_mut() {
        *x /= n;
    }
}

fn reorthogonalize(w: &mut [f64], basis: &[Vec<f64>]) {
    // Two classical Gram-Schmidt passes keep the basis orthogonal to
    // working precision.
    for _ in 0..2 {
        for b in basis {
            let proj = dot(w, b);
            axpy(w, -proj, b);
        }
    }
}

/// Reduced density matrix of `dense` over `part.region_a()`. Expects a
/// normalized input vector.
pub fn reduced_density(dense: &DenseState, part: &Bipartition) -> Result<Array2<f64>> {
    let sites = dense.site_count();
    if part.site_count() != sites {
        return Err(SpsError::dimension(format!(
            "bipartition is over {} sites but state has {}",
            part.site_count(),
            sites
        )));
    }
    let region_a = part.region_a();
    let region_b = part.region_b();
    if region_a.len() > 13 {
        return Err(SpsError::Capacity(format!(
            "reduced density matrix capped at 13 kept sites, got {}",
            region_a.len()
        )));
    }
    let na = 1usize << region_a.len();
    let nb = 1usize << region_b.len();

    // offset_a[ia] scatters the bits of the kept-region index into the full
    // basis index, in region order; same for the traced region.
    let offsets = |region: &[usize]| -> Vec<usize> {
        let n = 1usize << region.len();
        (0..n)
            .map(|idx| {
                let mut off = 0usize;
                for (pos, &site) in region.iter().enumerate() {
                    if idx & (1 << (region.len() - 1 - pos)) != 0 {
                        off |= site_mask(site, sites);
                    }
                }
                off
            })
            .collect()
    };
    let offset_a = offsets(region_a);
    let offset_b = offsets(region_b);

    let amps = dense.amplitudes();
    let mut rho = Array2::<f64>::zeros((na, na));
    let mut col = vec![0.0; na];
    for &ob in &offset_b {
        for (ia, &oa) in offset_a.iter().enumerate() {
            col[ia] = amps[oa | ob];
        }
        for i in 0..na {
            for j in 0..na {
                rho[[i, j]] += col[i] * col[j];
            }
        }
    }
    let _ = nb;
    Ok(rho)
}

/// Central-difference gradient of `f` with step `h`, coordinate by
/// coordinate over the flattened parameters.
pub fn finite_difference_gradient<F>(f: F, state: &SpsState, h: f64) -> Result<GradientVector>
where
    F: Fn(&SpsState) -> f64,
{
    if !(h > 0.0) {
        return Err(SpsError::config(format!("step must be positive, got {h}")));
    }
    let sites = state.site_count();
    let products = state.product_count();
    let mut flat = state.to_flat();
    let mut grad = vec![0.0; flat.len()];
    for i in 0..flat.len() {
        let orig = flat[i];
        flat[i] = orig + h;
        let plus = f(&SpsState::from_flat(sites, products, &flat)?);
        flat[i] = orig - h;
        let minus = f(&SpsState::from_flat(sites, products, &flat)?);
        flat[i] = orig;
        grad[i] = (plus - minus) / (2.0 * h);
    }
    GradientVector::from_flat(sites, products, &grad)
}

// Dense expectation helpers used as oracles for the closed-form paths.

/// `⟨v|σ^x_k|v⟩ / ⟨v|v⟩`.
pub fn dense_expect_x(dense: &DenseState, k: usize) -> f64 {
    let sites = dense.site_count();
    let mask = site_mask(k, sites);
    let amps = dense.amplitudes();
    let num = kahan_sum((0..amps.len()).map(|b| amps[b] * amps[b ^ mask]));
    num / dense.norm_sq()
}

/// `⟨v|σ^z_k|v⟩ / ⟨v|v⟩`.
pub fn dense_expect_z(dense: &DenseState, k: usize) -> f64 {
    let sites = dense.site_count();
    let amps = dense.amplitudes();
    let num = kahan_sum(
        (0..amps.len()).map(|b| amps[b] * amps[b] * z_sign(b, k, sites)),
    );
    num / dense.norm_sq()
}

/// `⟨v|σ^z_k σ^z_l|v⟩ / ⟨v|v⟩`.
pub fn dense_expect_zz(dense: &DenseState, k: usize, l: usize) -> f64 {
    let sites = dense.site_count();
    let amps = dense.amplitudes();
    let num = kahan_sum(
        (0..amps.len())
            .map(|b| amps[b] * amps[b] * z_sign(b, k, sites) * z_sign(b, l, sites)),
    );
    num / dense.norm_sq()
}

/// `⟨v|H|v⟩ / ⟨v|v⟩`.
pub fn dense_energy(graph: &CouplingGraph, dense: &DenseState) -> f64 {
    let diag = hamiltonian_diagonal(graph);
    let mut hv = vec![0.0; dense.amplitudes().len()];
    apply_hamiltonian(graph, &diag, dense.amplitudes(), &mut hv);
    dot(dense.amplitudes(), &hv) / dense.norm_sq()
}

/// Averaged connected `⟨σ^z σ^z⟩` correlator from the central site, same
/// convention as the closed-form path.
pub fn dense_ferro_correlator(dense: &DenseState, reference: usize) -> f64 {
    let sites = dense.site_count();
    let z_ref = dense_expect_z(dense, reference);
    let mut acc = 0.0;
    for l in 0..sites {
        if l != reference {
            acc += dense_expect_zz(dense, reference, l) - z_ref * dense_expect_z(dense, l);
        }
    }
    acc / (sites - 1) as f64
}

/// `−ln Tr ρ_A²` from the explicit reduced density matrix.
pub fn dense_renyi2(dense: &DenseState, part: &Bipartition) -> Result<f64> {
    let normalized = dense.normalized()?;
    let rho = reduced_density(&normalized, part)?;
    let purity = kahan_sum(rho.iter().map(|x| x * x));
    if purity <= 0.0 {
        return Err(SpsError::Degeneracy(format!(
            "purity {purity:.3e} is not positive"
        )));
    }
    Ok(-purity.ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{build_chain_1d, CouplingGraph};
    use crate::state::{norm, sample_random_sps, ParameterDomain};
    use ndarray::array;

    fn bell_state() -> SpsState {
        let inv = std::f64::consts::FRAC_1_SQRT_2;
        let half_pi = std::f64::consts::FRAC_PI_2;
        SpsState::new(array![inv, inv], array![[0.0, half_pi], [0.0, half_pi]]).unwrap()
    }

    #[test]
    fn single_site_expansion() {
        let s = SpsState::new(array![1.0], array![[0.0]]).unwrap();
        let dense = expand_statevector(&s).unwrap();
        assert_eq!(dense.amplitudes(), &[1.0, 0.0]);
    }

    #[test]
    fn bell_expansion() {
        let dense = expand_statevector(&bell_state()).unwrap();
        let inv = std::f64::consts::FRAC_1_SQRT_2;
        let expect = [inv, 0.0, 0.0, inv];
        for (a, e) in dense.amplitudes().iter().zip(&expect) {
            assert!((a - e).abs() < 1e-15);
        }
    }

    #[test]
    fn expansion_norm_matches_closed_form() {
        for seed in 0..10 {
            let s =
                sample_random_sps(10, 7, &ParameterDomain::default().with_seed(seed)).unwrap();
            let dense = expand_statevector(&s).unwrap();
            assert!(
                (dense.norm_sq() - norm(&s)).abs() <= 1e-12,
                "seed {seed}: {} vs {}",
                dense.norm_sq(),
                norm(&s)
            );
        }
    }

    #[test]
    fn expansion_is_linear_in_amplitudes() {
        let theta = array![[0.3, -0.8], [1.0, 0.2], [-0.5, 0.9]];
        let a = SpsState::new(array![0.7, -0.2], theta.clone()).unwrap();
        let b = SpsState::new(array![-0.1, 0.5], theta.clone()).unwrap();
        let sum = SpsState::new(array![0.6, 0.3], theta).unwrap();
        let da = expand_statevector(&a).unwrap();
        let db = expand_statevector(&b).unwrap();
        let ds = expand_statevector(&sum).unwrap();
        for i in 0..da.amplitudes().len() {
            let lhs = da.amplitudes()[i] + db.amplitudes()[i];
            assert!((lhs - ds.amplitudes()[i]).abs() <= 1e-13);
        }
    }

    #[test]
    fn capacity_errors() {
        let s = sample_random_sps(21, 1, &ParameterDomain::default()).unwrap();
        assert!(matches!(
            expand_statevector(&s),
            Err(SpsError::Capacity(_))
        ));
    }

    #[test]
    fn single_spin_closed_form() {
        let g = CouplingGraph::new(1, vec![], 0.8, 0.6, "single").unwrap();
        let (e, _) = exact_ground_state(&g).unwrap();
        assert!((e + (0.8f64 * 0.8 + 0.6 * 0.6).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn two_site_ising_spectrum() {
        let g = build_chain_1d(2, -1.0, 0.0, 0.0).unwrap();
        let (e, _) = exact_ground_state(&g).unwrap();
        assert!((e + 1.0).abs() < 1e-12);
    }

    #[test]
    fn dense_and_iterative_paths_agree_small() {
        let g = build_chain_1d(8, -1.0, 1.3, 0.25).unwrap();
        let (ed, vd) = exact_ground_state_dense(&g).unwrap();
        let (ei, vi) = exact_ground_state_iterative(&g).unwrap();
        assert!((ed - ei).abs() <= 1e-9, "dense {ed} vs iterative {ei}");
        // Eigenvectors may differ by sign.
        let overlap: f64 = vd
            .amplitudes()
            .iter()
            .zip(vi.amplitudes())
            .map(|(a, b)| a * b)
            .sum();
        assert!((overlap.abs() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn reduced_density_of_product_state_is_rank_one() {
        let s = SpsState::new(array![1.0], array![[0.4], [-0.7], [1.1], [0.3]]).unwrap();
        let dense = expand_statevector(&s).unwrap().normalized().unwrap();
        let part = Bipartition::half_chain(4);
        let rho = reduced_density(&dense, &part).unwrap();
        let trace: f64 = (0..rho.nrows()).map(|i| rho[[i, i]]).sum();
        assert!((trace - 1.0).abs() < 1e-12);
        let purity: f64 = rho.iter().map(|x| x * x).sum();
        assert!((purity - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reduced_density_of_bell_is_maximally_mixed() {
        let dense = expand_statevector(&bell_state()).unwrap().normalized().unwrap();
        let part = Bipartition::new(2, vec![0]).unwrap();
        let rho = reduced_density(&dense, &part).unwrap();
        assert!((rho[[0, 0]] - 0.5).abs() < 1e-14);
        assert!((rho[[1, 1]] - 0.5).abs() < 1e-14);
        assert!(rho[[0, 1]].abs() < 1e-14);
    }

    #[test]
    fn finite_difference_of_constant_is_zero() {
        let s = sample_random_sps(4, 3, &ParameterDomain::default().with_seed(2)).unwrap();
        let grad = finite_difference_gradient(|_| 0.75, &s, 1e-5).unwrap();
        assert!(grad.d_c.iter().all(|&x| x == 0.0));
        assert!(grad.d_theta.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn finite_difference_of_norm_single_product() {
        let s = SpsState::new(array![1.0], array![[0.2], [0.5]]).unwrap();
        let grad = finite_difference_gradient(norm, &s, 1e-5).unwrap();
        assert!((grad.d_c[0] - 2.0).abs() < 1e-8);
    }

    #[test]
    fn invalid_step_rejected() {
        let s = sample_random_sps(2, 1, &ParameterDomain::default()).unwrap();
        assert!(finite_difference_gradient(norm, &s, 0.0).is_err());
    }
}
