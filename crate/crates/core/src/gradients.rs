//! Analytic derivatives of the norm, unnormalized local observables, and the
//! variational energy with respect to every parameter.
//!
//! All derivatives are pair contractions over the same caches the observables
//! use. For an unnormalized pair functional `Σ c_m c_{m'} F^{mm'}` with `F`
//! symmetric, the amplitude derivative is `2 Σ_{m'} c_{m'} F^{mm'}`; an angle
//! derivative at an operator site swaps the site's Pauli tensor for its
//! partner (`X → Z`, `Z → −X`), and at any other site multiplies the pair by
//! `−tan(θ_l^m − θ_l^{m'})`. The energy gradient accumulates the tangent
//! environment once per site from the total Hamiltonian pair matrix, which
//! keeps the full evaluation at `O((L + |edges|) M²)`.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpsError};
use crate::hamiltonian::CouplingGraph;
use crate::state::{PairMatrices, SpsState, NULL_NORM_EPS};

/// Gradient with the same layout as the parameters: `d_c` per amplitude and
/// `d_theta` per `(site, product)` angle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientVector {
    pub d_c: Array1<f64>,
    pub d_theta: Array2<f64>,
}

impl GradientVector {
    pub fn zeros(sites: usize, products: usize) -> Self {
        GradientVector {
            d_c: Array1::zeros(products),
            d_theta: Array2::zeros((sites, products)),
        }
    }

    pub fn site_count(&self) -> usize {
        self.d_theta.nrows()
    }

    pub fn product_count(&self) -> usize {
        self.d_c.len()
    }

    /// Flattened view matching [`SpsState::to_flat`].
    pub fn to_flat(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity((self.site_count() + 1) * self.product_count());
        flat.extend(self.d_c.iter());
        flat.extend(self.d_theta.iter());
        flat
    }

    /// Inverse of [`Self::to_flat`].
    pub fn from_flat(sites: usize, products: usize, flat: &[f64]) -> Result<Self> {
        if flat.len() != (sites + 1) * products {
            return Err(SpsError::dimension(format!(
                "flat gradient has length {}, expected {}",
                flat.len(),
                (sites + 1) * products
            )));
        }
        Ok(GradientVector {
            d_c: Array1::from_iter(flat[..products].iter().copied()),
            d_theta: Array2::from_shape_vec((sites, products), flat[products..].to_vec())
                .expect("shape checked"),
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.d_c
            .iter()
            .chain(self.d_theta.iter())
            .fold(0.0f64, |acc, &x| acc.max(x.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.d_c.iter().all(|x| x.is_finite()) && self.d_theta.iter().all(|x| x.is_finite())
    }
}

/// `y[a] = Σ_b block[a,b] c[b]`.
fn row_contract(block: &Array2<f64>, c: &Array1<f64>) -> Array1<f64> {
    block.dot(c)
}

/// Gradient of the norm `Z`.
pub fn grad_norm(state: &SpsState) -> GradientVector {
    let pm = PairMatrices::compute(state);
    grad_norm_with(state, &pm)
}

pub(crate) fn grad_norm_with(state: &SpsState, pm: &PairMatrices) -> GradientVector {
    let (sites, products) = (state.site_count(), state.product_count());
    let c = state.amplitudes();
    let mut grad = GradientVector::zeros(sites, products);
    grad.d_c = 2.0 * row_contract(pm.overlap(), c);

    let mut sd = Array2::zeros((products, products));
    let mut loo = Array2::zeros((products, products));
    for l in 0..sites {
        pm.fill_sin_diff(l, &mut sd);
        pm.fill_leave_one_out(l, &mut loo);
        sd *= &loo; // C^{mm'} tan_l, in its always-finite product form
        let contracted = row_contract(&sd, c);
        for m in 0..products {
            grad.d_theta[[l, m]] = -2.0 * c[m] * contracted[m];
        }
    }
    grad
}

/// Gradient of the unnormalized expectation `⟨σ^x_k⟩_u = Σ c c' C X_k`.
pub fn grad_unnormalized_x(state: &SpsState, k: usize) -> Result<GradientVector> {
    state.validate_site(k)?;
    let pm = PairMatrices::compute(state);
    Ok(grad_unnormalized_site(state, &pm, k, SiteOp::X))
}

/// Gradient of `⟨σ^z_k⟩_u`.
pub fn grad_unnormalized_z(state: &SpsState, k: usize) -> Result<GradientVector> {
    state.validate_site(k)?;
    let pm = PairMatrices::compute(state);
    Ok(grad_unnormalized_site(state, &pm, k, SiteOp::Z))
}

#[derive(Clone, Copy)]
enum SiteOp {
    X,
    Z,
}

fn grad_unnormalized_site(
    state: &SpsState,
    pm: &PairMatrices,
    k: usize,
    op: SiteOp,
) -> GradientVector {
    let (sites, products) = (state.site_count(), state.product_count());
    let c = state.amplitudes();
    let mut grad = GradientVector::zeros(sites, products);

    let mut block = Array2::zeros((products, products));
    match op {
        SiteOp::X => pm.weighted_pauli_x(k, &mut block),
        SiteOp::Z => pm.weighted_pauli_z(k, &mut block),
    }
    grad.d_c = 2.0 * row_contract(&block, c);

    // Operator site: the tensor swaps within the family.
    match op {
        SiteOp::X => pm.weighted_pauli_z(k, &mut block),
        SiteOp::Z => {
            pm.weighted_pauli_x(k, &mut block);
            block *= -1.0;
        }
    }
    let contracted = row_contract(&block, c);
    for m in 0..products {
        grad.d_theta[[k, m]] = 2.0 * c[m] * contracted[m];
    }

    // Every other site appends the tangent factor; assembled in product form
    // `numerator_k · sin_diff_l · Π_{p∉{k,l}} cos_diff_p`, which is finite
    // even at singular pairs.
    let mut numer = Array2::zeros((products, products));
    let mut sd = Array2::zeros((products, products));
    for l in 0..sites {
        if l == k {
            continue;
        }
        pm.fill_leave_two_out(k, l, &mut block);
        match op {
            SiteOp::X => pm.fill_sin_sum(k, &mut numer),
            SiteOp::Z => pm.fill_cos_sum(k, &mut numer),
        }
        pm.fill_sin_diff(l, &mut sd);
        block *= &numer;
        block *= &sd;
        let contracted = row_contract(&block, c);
        for m in 0..products {
            grad.d_theta[[l, m]] = -2.0 * c[m] * contracted[m];
        }
    }
    grad
}

/// Gradient of `⟨σ^z_k σ^z_l⟩_u`.
pub fn grad_unnormalized_zz(state: &SpsState, k: usize, q: usize) -> Result<GradientVector> {
    state.validate_site(k)?;
    state.validate_site(q)?;
    if k == q {
        return Err(SpsError::EqualSites(k));
    }
    let pm = PairMatrices::compute(state);
    let (sites, products) = (state.site_count(), state.product_count());
    let c = state.amplitudes();
    let mut grad = GradientVector::zeros(sites, products);

    let mut block = Array2::zeros((products, products));
    pm.weighted_pauli_zz(k.min(q), k.max(q), &mut block);
    grad.d_c = 2.0 * row_contract(&block, c);

    let mut fac_a = Array2::zeros((products, products));
    let mut fac_b = Array2::zeros((products, products));

    // Operator sites: Z at the differentiated site becomes -X.
    for (site, other) in [(k, q), (q, k)] {
        pm.fill_leave_two_out(site, other, &mut block);
        pm.fill_sin_sum(site, &mut fac_a);
        pm.fill_cos_sum(other, &mut fac_b);
        block *= &fac_a;
        block *= &fac_b;
        let contracted = row_contract(&block, c);
        for m in 0..products {
            grad.d_theta[[site, m]] = -2.0 * c[m] * contracted[m];
        }
    }

    // Remaining sites append the tangent factor.
    let mut sd = Array2::zeros((products, products));
    for l in 0..sites {
        if l == k || l == q {
            continue;
        }
        pm.fill_leave_out(&[k, q, l], &mut block);
        pm.fill_cos_sum(k, &mut fac_a);
        pm.fill_cos_sum(q, &mut fac_b);
        pm.fill_sin_diff(l, &mut sd);
        block *= &fac_a;
        block *= &fac_b;
        block *= &sd;
        let contracted = row_contract(&block, c);
        for m in 0..products {
            grad.d_theta[[l, m]] = -2.0 * c[m] * contracted[m];
        }
    }
    Ok(grad)
}

/// Gradient of the normalized observable `⟨σ^x_k⟩ = ⟨σ^x_k⟩_u / Z`.
pub fn grad_expect_sigma_x(state: &SpsState, k: usize) -> Result<GradientVector> {
    state.validate_site(k)?;
    let pm = PairMatrices::compute(state);
    let z = pm.norm();
    if z <= NULL_NORM_EPS {
        return Err(SpsError::NullState {
            norm: z,
            limit: NULL_NORM_EPS,
        });
    }
    let mut block = Array2::zeros((state.product_count(), state.product_count()));
    pm.weighted_pauli_x(k, &mut block);
    let value = PairMatrices::amplitude_form(state.amplitudes(), &block) / z;

    let grad_u = grad_unnormalized_site(state, &pm, k, SiteOp::X);
    let grad_z = grad_norm_with(state, &pm);
    let mut grad = GradientVector::zeros(state.site_count(), state.product_count());
    grad.d_c = (&grad_u.d_c - &(value * &grad_z.d_c)) / z;
    grad.d_theta = (&grad_u.d_theta - &(value * &grad_z.d_theta)) / z;
    Ok(grad)
}

/// Variational energy and its full gradient in one pass, sharing a single
/// overlap build; `O((L + |edges|) M²)`.
pub fn energy_and_grad(state: &SpsState, graph: &CouplingGraph) -> Result<(f64, GradientVector)> {
    if graph.site_count() != state.site_count() {
        return Err(SpsError::dimension(format!(
            "graph has {} sites but state has {}",
            graph.site_count(),
            state.site_count()
        )));
    }
    let pm = PairMatrices::compute(state);
    let z = pm.norm();
    if z <= NULL_NORM_EPS {
        return Err(SpsError::NullState {
            norm: z,
            limit: NULL_NORM_EPS,
        });
    }
    let (sites, products) = (state.site_count(), state.product_count());
    let c = state.amplitudes();
    let (h_x, h_z) = (graph.h_x, graph.h_z);

    let mut adjacency: Vec<Vec<(usize, f64)>> = vec![Vec::new(); sites];
    for e in graph.edges() {
        adjacency[e.k].push((e.l, e.strength));
        adjacency[e.l].push((e.k, e.strength));
    }

    // Total Hamiltonian pair matrix G = Σ_T w_T F_T.
    let mut g = Array2::<f64>::zeros((products, products));
    let mut block = Array2::zeros((products, products));
    for e in graph.edges() {
        pm.weighted_pauli_zz(e.k, e.l, &mut block);
        g.scaled_add(e.strength, &block);
    }
    for k in 0..sites {
        if h_x != 0.0 {
            pm.weighted_pauli_x(k, &mut block);
            g.scaled_add(-h_x, &block);
        }
        if h_z != 0.0 {
            pm.weighted_pauli_z(k, &mut block);
            g.scaled_add(-h_z, &block);
        }
    }

    let energy_u = PairMatrices::amplitude_form(c, &g);
    let energy = energy_u / z;

    let mut grad = GradientVector::zeros(sites, products);
    let dz_dc = 2.0 * row_contract(pm.overlap(), c);
    let de_dc_u = 2.0 * row_contract(&g, c);
    grad.d_c = (&de_dc_u - &(energy * &dz_dc)) / z;

    let mut loo = Array2::zeros((products, products));
    let mut cd = Array2::zeros((products, products));
    let mut sd = Array2::zeros((products, products));
    let mut ss = Array2::zeros((products, products));
    let mut cs = Array2::zeros((products, products));
    let mut nb = Array2::zeros((products, products));
    let mut touching = Array2::zeros((products, products));
    let mut op_deriv = Array2::zeros((products, products));
    let mut r = Array2::zeros((products, products));

    for l in 0..sites {
        pm.fill_cos_diff(l, &mut cd);
        pm.fill_sin_diff(l, &mut sd);
        pm.fill_sin_sum(l, &mut ss);
        pm.fill_cos_sum(l, &mut cs);
        pm.fill_leave_one_out(l, &mut loo);

        // Terms touching site l and their operator-site derivatives.
        touching.fill(0.0);
        op_deriv.fill(0.0);
        if h_x != 0.0 || h_z != 0.0 {
            for a in 0..products {
                for b in 0..products {
                    let weighted_x = ss[[a, b]] * loo[[a, b]];
                    let weighted_z = cs[[a, b]] * loo[[a, b]];
                    touching[[a, b]] -= h_x * weighted_x + h_z * weighted_z;
                    op_deriv[[a, b]] -= h_x * weighted_z - h_z * weighted_x;
                }
            }
        }
        for &(q, strength) in &adjacency[l] {
            pm.fill_leave_two_out(l, q, &mut block);
            pm.fill_cos_sum(q, &mut nb);
            for a in 0..products {
                for b in 0..products {
                    let env = nb[[a, b]] * block[[a, b]];
                    touching[[a, b]] += strength * cs[[a, b]] * env;
                    op_deriv[[a, b]] -= strength * ss[[a, b]] * env;
                }
            }
        }

        // r = op_deriv − (G − touching) ⊙ tan_l; every term of G − touching
        // carries the cos factor of site l, so the ratio is finite away from
        // singular pairs, which are patched exactly below.
        for a in 0..products {
            for b in 0..products {
                r[[a, b]] = op_deriv[[a, b]]
                    - (g[[a, b]] - touching[[a, b]]) * sd[[a, b]] / cd[[a, b]];
            }
        }
        for a in 0..products {
            r[[a, a]] = op_deriv[[a, a]];
        }
        for sp in pm.singular_pairs() {
            if sp.small_sites.contains(&l) {
                let env = tangent_environment_exact(&pm, graph, l, sp.m, sp.mp);
                r[[sp.m, sp.mp]] = op_deriv[[sp.m, sp.mp]] - env;
                r[[sp.mp, sp.m]] = op_deriv[[sp.mp, sp.m]] + env;
            }
        }

        let contracted = row_contract(&r, c);
        sd *= &loo; // C tan_l in product form for the norm derivative
        let z_contracted = row_contract(&sd, c);
        for m in 0..products {
            let de_u = 2.0 * c[m] * contracted[m];
            let dz = -2.0 * c[m] * z_contracted[m];
            grad.d_theta[[l, m]] = (de_u - energy * dz) / z;
        }
    }
    Ok((energy, grad))
}

/// `Σ_{T: l ∉ sites(T)} w_T F_T` with the cos factor of site `l` replaced by
/// its sine, evaluated exactly for one pair. Only used at near-singular
/// pairs, where the ratio form would divide by ~0.
fn tangent_environment_exact(
    pm: &PairMatrices,
    graph: &CouplingGraph,
    l: usize,
    a: usize,
    b: usize,
) -> f64 {
    let sd_l = pm.sin_diff_entry(l, a, b);
    let mut acc = 0.0;
    for e in graph.edges() {
        if e.k != l && e.l != l {
            acc += e.strength
                * pm.cos_sum_entry(e.k, a, b)
                * pm.cos_sum_entry(e.l, a, b)
                * sd_l
                * pm.product_excluding(a, b, &[e.k, e.l, l]);
        }
    }
    for k in 0..graph.site_count() {
        if k == l {
            continue;
        }
        let base = sd_l * pm.product_excluding(a, b, &[k, l]);
        if graph.h_x != 0.0 {
            acc -= graph.h_x * pm.sin_sum_entry(k, a, b) * base;
        }
        if graph.h_z != 0.0 {
            acc -= graph.h_z * pm.cos_sum_entry(k, a, b) * base;
        }
    }
    acc
}

/// Gradient of the variational energy.
pub fn grad_energy(state: &SpsState, graph: &CouplingGraph) -> Result<GradientVector> {
    energy_and_grad(state, graph).map(|(_, g)| g)
}
