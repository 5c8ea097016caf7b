//! Tilted Ising coupling graphs and the variational energy.
//!
//! The Hamiltonian is
//! `H = Σ_{(k,l)} J_kl σ^z_k σ^z_l − h_x Σ_k σ^x_k − h_z Σ_k σ^z_k`
//! over an arbitrary weighted interaction graph. Builders cover open-boundary
//! 1D chains, 3D cubic lattices, power-law long-range couplings, and seeded
//! Erdős–Rényi random graphs.

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpsError};
use crate::rng::stream_rng;
use crate::state::{PairMatrices, SpsState, NULL_NORM_EPS};
use crate::util::kahan_sum;

/// One weighted interaction `J σ^z_k σ^z_l` with `k < l`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    pub k: usize,
    pub l: usize,
    pub strength: f64,
}

/// Weighted undirected interaction graph plus field strengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingGraph {
    sites: usize,
    edges: Vec<Coupling>,
    pub h_x: f64,
    pub h_z: f64,
    pub tag: String,
    /// Integer lattice coordinates per site, when the geometry defines them.
    pub coordinates: Option<Vec<[i64; 3]>>,
}

impl CouplingGraph {
    /// Builds a graph from raw edges, enforcing the canonical form:
    /// `k < l`, no duplicates, finite weights, indices in range.
    pub fn new(
        sites: usize,
        mut edges: Vec<Coupling>,
        h_x: f64,
        h_z: f64,
        tag: impl Into<String>,
    ) -> Result<Self> {
        if sites == 0 {
            return Err(SpsError::config("graph must have at least one site"));
        }
        if !h_x.is_finite() || !h_z.is_finite() {
            return Err(SpsError::NonFinite("field strengths".to_string()));
        }
        for e in &edges {
            if e.k >= e.l {
                return Err(SpsError::config(format!(
                    "edge ({}, {}) is not in canonical k < l order",
                    e.k, e.l
                )));
            }
            if e.l >= sites {
                return Err(SpsError::SiteOutOfRange {
                    index: e.l,
                    sites,
                });
            }
            if !e.strength.is_finite() {
                return Err(SpsError::NonFinite(format!("coupling ({}, {})", e.k, e.l)));
            }
        }
        edges.sort_by_key(|e| (e.k, e.l));
        if edges.windows(2).any(|w| w[0].k == w[1].k && w[0].l == w[1].l) {
            return Err(SpsError::config("duplicate edge in graph"));
        }
        Ok(CouplingGraph {
            sites,
            edges,
            h_x,
            h_z,
            tag: tag.into(),
            coordinates: None,
        })
    }

    pub fn site_count(&self) -> usize {
        self.sites
    }

    /// Edges in canonical `(k, l)` lexicographic order.
    pub fn edges(&self) -> &[Coupling] {
        &self.edges
    }

    /// Dense 0/1 adjacency matrix.
    pub fn adjacency_matrix(&self) -> Array2<u8> {
        let mut adj = Array2::zeros((self.sites, self.sites));
        for e in &self.edges {
            adj[[e.k, e.l]] = 1;
            adj[[e.l, e.k]] = 1;
        }
        adj
    }

    /// Serializes to the exchange text format: a header line
    /// `L h_x h_z tag` followed by one `k l J` line per edge in canonical
    /// order. Floats use shortest round-trip formatting, so a write/read
    /// cycle is bit-exact.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let tag = if self.tag.is_empty() { "untagged" } else { &self.tag };
        out.push_str(&format!("{} {} {} {}\n", self.sites, self.h_x, self.h_z, tag));
        for e in &self.edges {
            out.push_str(&format!("{} {} {}\n", e.k, e.l, e.strength));
        }
        out
    }

    /// Parses the format written by [`Self::to_text`].
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| SpsError::config("empty graph file"))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(SpsError::config(format!(
                "graph header must be 'L h_x h_z tag', got '{header}'"
            )));
        }
        let sites: usize = fields[0]
            .parse()
            .map_err(|_| SpsError::config(format!("bad site count '{}'", fields[0])))?;
        let h_x: f64 = fields[1]
            .parse()
            .map_err(|_| SpsError::config(format!("bad h_x '{}'", fields[1])))?;
        let h_z: f64 = fields[2]
            .parse()
            .map_err(|_| SpsError::config(format!("bad h_z '{}'", fields[2])))?;
        let tag = fields[3].to_string();
        let mut edges = Vec::new();
        for line in lines {
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.len() != 3 {
                return Err(SpsError::config(format!("bad edge line '{line}'")));
            }
            let k: usize = cols[0]
                .parse()
                .map_err(|_| SpsError::config(format!("bad edge index '{}'", cols[0])))?;
            let l: usize = cols[1]
                .parse()
                .map_err(|_| SpsError::config(format!("bad edge index '{}'", cols[1])))?;
            let strength: f64 = cols[2]
                .parse()
                .map_err(|_| SpsError::config(format!("bad coupling '{}'", cols[2])))?;
            edges.push(Coupling { k, l, strength });
        }
        CouplingGraph::new(sites, edges, h_x, h_z, tag)
    }

    /// Adjacency matrix as CSV rows of 0/1 values.
    pub fn adjacency_csv(&self) -> String {
        let adj = self.adjacency_matrix();
        let mut out = String::new();
        for row in adj.rows() {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }
}

/// Power-law long-range coupling family `J_kl = J / d(k, l)^α` with `d` the
/// Euclidean distance on the integer lattice (nearest neighbors at unit
/// distance). `α = 0` is the uniform all-to-all limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongRangeSpec {
    pub j: f64,
    pub alpha: f64,
    pub dims: LatticeDims,
}

/// Lattice shape for geometry-aware builders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LatticeDims {
    Line(usize),
    Cubic(usize, usize, usize),
}

impl LatticeDims {
    pub fn site_count(&self) -> usize {
        match *self {
            LatticeDims::Line(l) => l,
            LatticeDims::Cubic(nx, ny, nz) => nx * ny * nz,
        }
    }

    /// Integer coordinates of every site; 3D lattices are flattened
    /// x-fastest: `site = x + nx·(y + ny·z)`.
    pub fn coordinates(&self) -> Vec<[i64; 3]> {
        match *self {
            LatticeDims::Line(l) => (0..l as i64).map(|x| [x, 0, 0]).collect(),
            LatticeDims::Cubic(nx, ny, nz) => {
                let mut coords = Vec::with_capacity(nx * ny * nz);
                for z in 0..nz as i64 {
                    for y in 0..ny as i64 {
                        for x in 0..nx as i64 {
                            coords.push([x, y, z]);
                        }
                    }
                }
                coords
            }
        }
    }
}

/// Seeded Erdős–Rényi `G(L, p)` coupling family with uniform strength.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomGraphSpec {
    pub sites: usize,
    pub p: f64,
    pub j: f64,
    pub seed: u64,
}

/// Open-boundary nearest-neighbor chain: edges `(i, i+1)` with uniform `J`.
pub fn build_chain_1d(sites: usize, j: f64, h_x: f64, h_z: f64) -> Result<CouplingGraph> {
    if sites < 2 {
        return Err(SpsError::config(format!(
            "chain needs at least 2 sites, got {sites}"
        )));
    }
    let edges = (0..sites - 1)
        .map(|i| Coupling {
            k: i,
            l: i + 1,
            strength: j,
        })
        .collect();
    let mut g = CouplingGraph::new(sites, edges, h_x, h_z, "chain-1d")?;
    g.coordinates = Some(LatticeDims::Line(sites).coordinates());
    Ok(g)
}

/// Open-boundary cubic lattice with nearest-neighbor bonds; sites are
/// flattened x-fastest.
pub fn build_cubic_3d(
    nx: usize,
    ny: usize,
    nz: usize,
    j: f64,
    h_x: f64,
    h_z: f64,
) -> Result<CouplingGraph> {
    if nx == 0 || ny == 0 || nz == 0 || nx * ny * nz < 2 {
        return Err(SpsError::config(format!(
            "degenerate lattice dimensions {nx}x{ny}x{nz}"
        )));
    }
    let index = |x: usize, y: usize, z: usize| x + nx * (y + ny * z);
    let mut edges = Vec::new();
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let here = index(x, y, z);
                if x + 1 < nx {
                    edges.push((here, index(x + 1, y, z)));
                }
                if y + 1 < ny {
                    edges.push((here, index(x, y + 1, z)));
                }
                if z + 1 < nz {
                    edges.push((here, index(x, y, z + 1)));
                }
            }
        }
    }
    let edges = edges
        .into_iter()
        .map(|(a, b)| Coupling {
            k: a.min(b),
            l: a.max(b),
            strength: j,
        })
        .collect();
    let mut g = CouplingGraph::new(nx * ny * nz, edges, h_x, h_z, "cubic-3d")?;
    g.coordinates = Some(LatticeDims::Cubic(nx, ny, nz).coordinates());
    Ok(g)
}

/// All-to-all graph with `J_kl = J / d(k,l)^α`.
pub fn build_long_range(spec: &LongRangeSpec, h_x: f64, h_z: f64) -> Result<CouplingGraph> {
    if spec.alpha < 0.0 || !spec.alpha.is_finite() {
        return Err(SpsError::config(format!(
            "decay exponent must be >= 0, got {}",
            spec.alpha
        )));
    }
    let sites = spec.dims.site_count();
    if sites < 2 {
        return Err(SpsError::config("long-range lattice needs at least 2 sites"));
    }
    let coords = spec.dims.coordinates();
    let mut edges = Vec::with_capacity(sites * (sites - 1) / 2);
    for a in 0..sites {
        for b in (a + 1)..sites {
            let dx = (coords[a][0] - coords[b][0]) as f64;
            let dy = (coords[a][1] - coords[b][1]) as f64;
            let dz = (coords[a][2] - coords[b][2]) as f64;
            let dist = (dx * dx + dy * dy + dz * dz).sqrt();
            edges.push(Coupling {
                k: a,
                l: b,
                strength: spec.j / dist.powf(spec.alpha),
            });
        }
    }
    let mut g = CouplingGraph::new(sites, edges, h_x, h_z, "long-range")?;
    g.coordinates = Some(coords);
    Ok(g)
}

/// Erdős–Rényi graph: pairs visited in lexicographic `(i, j)` order with
/// `i < j`, each kept with probability `p` at uniform strength `J`.
/// Deterministic for a fixed spec.
pub fn build_random_graph(spec: &RandomGraphSpec, h_x: f64, h_z: f64) -> Result<CouplingGraph> {
    if !(0.0..=1.0).contains(&spec.p) {
        return Err(SpsError::config(format!(
            "edge probability must be in [0, 1], got {}",
            spec.p
        )));
    }
    if spec.sites < 2 {
        return Err(SpsError::config("random graph needs at least 2 sites"));
    }
    let mut rng = stream_rng(spec.seed, "graph/erdos-renyi", 0);
    let mut edges = Vec::new();
    for a in 0..spec.sites {
        for b in (a + 1)..spec.sites {
            if rng.random_range(0.0..1.0) < spec.p {
                edges.push(Coupling {
                    k: a,
                    l: b,
                    strength: spec.j,
                });
            }
        }
    }
    CouplingGraph::new(spec.sites, edges, h_x, h_z, "random-graph")
}

/// Variational energy `E = (Σ J_kl ⟨zz⟩_u − h_x Σ ⟨x⟩_u − h_z Σ ⟨z⟩_u) / Z`,
/// sharing a single overlap build across all terms.
pub fn energy(state: &SpsState, graph: &CouplingGraph) -> Result<f64> {
    let pm = PairMatrices::compute(state);
    energy_with(state, &pm, graph)
}

/// [`energy`] with a caller-provided overlap cache.
pub fn energy_with(state: &SpsState, pm: &PairMatrices, graph: &CouplingGraph) -> Result<f64> {
    if graph.site_count() != state.site_count() {
        return Err(SpsError::dimension(format!(
            "graph has {} sites but state has {}",
            graph.site_count(),
            state.site_count()
        )));
    }
    let z = pm.norm();
    if z <= NULL_NORM_EPS {
        return Err(SpsError::NullState {
            norm: z,
            limit: NULL_NORM_EPS,
        });
    }
    let m = state.product_count();
    let c = state.amplitudes();
    let mut block = Array2::zeros((m, m));
    let mut terms = Vec::with_capacity(graph.edges().len() + 2 * state.site_count());
    for e in graph.edges() {
        pm.weighted_pauli_zz(e.k, e.l, &mut block);
        terms.push(e.strength * PairMatrices::amplitude_form(c, &block));
    }
    if graph.h_x != 0.0 {
        for k in 0..state.site_count() {
            pm.weighted_pauli_x(k, &mut block);
            terms.push(-graph.h_x * PairMatrices::amplitude_form(c, &block));
        }
    }
    if graph.h_z != 0.0 {
        for k in 0..state.site_count() {
            pm.weighted_pauli_z(k, &mut block);
            terms.push(-graph.h_z * PairMatrices::amplitude_form(c, &block));
        }
    }
    Ok(kahan_sum(terms.into_iter()) / z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{sample_random_sps, ParameterDomain};
    use ndarray::array;

    #[test]
    fn chain_edge_sets() {
        let g = build_chain_1d(4, -1.0, 0.0, 0.0).unwrap();
        let pairs: Vec<(usize, usize)> = g.edges().iter().map(|e| (e.k, e.l)).collect();
        assert_eq!(pairs, vec![(0, 1), (1, 2), (2, 3)]);

        assert_eq!(build_chain_1d(2, -1.0, 0.0, 0.0).unwrap().edges().len(), 1);
        assert!(build_chain_1d(1, -1.0, 0.0, 0.0).is_err());

        let long = build_chain_1d(40, -1.0, 0.5, 0.25).unwrap();
        assert_eq!(long.edges().len(), 39);
        assert!(long.edges().iter().all(|e| e.strength == -1.0));
    }

    #[test]
    fn cubic_edge_counts() {
        assert_eq!(build_cubic_3d(2, 2, 2, -1.0, 0.0, 0.0).unwrap().edges().len(), 12);
        assert_eq!(
            build_cubic_3d(4, 4, 4, -1.0, 0.0, 0.0).unwrap().edges().len(),
            144
        );
        assert!(build_cubic_3d(1, 1, 1, -1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn degenerate_cubic_reduces_to_chain() {
        let cubic = build_cubic_3d(1, 1, 4, -0.7, 0.1, 0.2).unwrap();
        let chain = build_chain_1d(4, -0.7, 0.1, 0.2).unwrap();
        assert_eq!(cubic.edges(), chain.edges());
    }

    #[test]
    fn long_range_strengths() {
        let spec = LongRangeSpec {
            j: -1.0,
            alpha: 1.0,
            dims: LatticeDims::Line(3),
        };
        let g = build_long_range(&spec, 0.0, 0.0).unwrap();
        let find = |k, l| {
            g.edges()
                .iter()
                .find(|e| e.k == k && e.l == l)
                .unwrap()
                .strength
        };
        assert!((find(0, 1) + 1.0).abs() < 1e-15);
        assert!((find(1, 2) + 1.0).abs() < 1e-15);
        assert!((find(0, 2) + 0.5).abs() < 1e-15);

        // Diagonal neighbor on a plane: d = sqrt(2), alpha = 2 halves J.
        let spec = LongRangeSpec {
            j: -1.0,
            alpha: 2.0,
            dims: LatticeDims::Cubic(2, 2, 1),
        };
        let g = build_long_range(&spec, 0.0, 0.0).unwrap();
        let diag = g
            .edges()
            .iter()
            .find(|e| e.k == 0 && e.l == 3)
            .unwrap()
            .strength;
        assert!((diag + 0.5).abs() < 1e-15);
    }

    #[test]
    fn long_range_alpha_zero_is_complete_uniform() {
        let spec = LongRangeSpec {
            j: -0.3,
            alpha: 0.0,
            dims: LatticeDims::Line(40),
        };
        let g = build_long_range(&spec, 0.0, 0.0).unwrap();
        assert_eq!(g.edges().len(), 780);
        assert!(g.edges().iter().all(|e| (e.strength + 0.3).abs() < 1e-15));
    }

    #[test]
    fn random_graph_extremes_and_determinism() {
        let zero = RandomGraphSpec {
            sites: 12,
            p: 0.0,
            j: -1.0,
            seed: 1,
        };
        assert_eq!(build_random_graph(&zero, 0.0, 0.0).unwrap().edges().len(), 0);

        let one = RandomGraphSpec { p: 1.0, ..zero.clone() };
        assert_eq!(
            build_random_graph(&one, 0.0, 0.0).unwrap().edges().len(),
            12 * 11 / 2
        );

        let spec = RandomGraphSpec {
            sites: 10,
            p: 0.4,
            j: -1.0,
            seed: 77,
        };
        let a = build_random_graph(&spec, 3.0, 0.25).unwrap();
        let b = build_random_graph(&spec, 3.0, 0.25).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn random_graph_edge_count_is_binomial() {
        // Mean edge count over seeds near p·C(40,2) = 312, sigma ~ 13.7.
        let mut counts = Vec::new();
        for seed in 0..40 {
            let spec = RandomGraphSpec {
                sites: 40,
                p: 0.4,
                j: -1.0,
                seed,
            };
            counts.push(build_random_graph(&spec, 0.0, 0.0).unwrap().edges().len() as f64);
        }
        let mean = counts.iter().sum::<f64>() / counts.len() as f64;
        let expected = 0.4 * 780.0;
        let sigma = (780.0 * 0.4 * 0.6f64).sqrt();
        let se = sigma / (counts.len() as f64).sqrt();
        assert!(
            (mean - expected).abs() < 3.0 * se.max(sigma / 3.0),
            "mean {mean} too far from {expected}"
        );
        for &c in &counts {
            assert!((c - expected).abs() < 4.0 * sigma);
        }
    }

    #[test]
    fn classical_chain_energy() {
        // θ = 0 product state on a 3-site chain with (J, h_x, h_z) = (-1, 1, 0.5).
        let s = SpsState::new(array![1.0], array![[0.0], [0.0], [0.0]]).unwrap();
        let g = build_chain_1d(3, -1.0, 1.0, 0.5).unwrap();
        let e = energy(&s, &g).unwrap();
        assert!((e + 3.5).abs() < 1e-13, "E = {e}");
    }

    #[test]
    fn bell_state_energy() {
        let inv = std::f64::consts::FRAC_1_SQRT_2;
        let half_pi = std::f64::consts::FRAC_PI_2;
        let s = SpsState::new(array![inv, inv], array![[0.0, half_pi], [0.0, half_pi]]).unwrap();
        let g = build_chain_1d(2, -1.0, 0.0, 0.0).unwrap();
        let e = energy(&s, &g).unwrap();
        assert!((e + 1.0).abs() < 1e-13);
    }

    #[test]
    fn energy_is_linear_in_couplings_and_fields() {
        let s = sample_random_sps(6, 4, &ParameterDomain::default().with_seed(5)).unwrap();
        let g1 = build_chain_1d(6, -1.0, 0.7, 0.2).unwrap();
        let g2 = build_chain_1d(6, 0.4, -0.3, 0.9).unwrap();
        let combined_edges: Vec<Coupling> = g1
            .edges()
            .iter()
            .zip(g2.edges())
            .map(|(a, b)| Coupling {
                k: a.k,
                l: a.l,
                strength: a.strength + b.strength,
            })
            .collect();
        let combined = CouplingGraph::new(
            6,
            combined_edges,
            g1.h_x + g2.h_x,
            g1.h_z + g2.h_z,
            "sum",
        )
        .unwrap();
        let e1 = energy(&s, &g1).unwrap();
        let e2 = energy(&s, &g2).unwrap();
        let es = energy(&s, &combined).unwrap();
        assert!((e1 + e2 - es).abs() < 1e-11, "{e1} + {e2} != {es}");
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let s = SpsState::new(array![1.0], array![[0.0], [0.0]]).unwrap();
        let g = build_chain_1d(3, -1.0, 0.0, 0.0).unwrap();
        assert!(matches!(energy(&s, &g), Err(SpsError::Dimension(_))));
    }

    #[test]
    fn graph_text_round_trip() {
        let spec = RandomGraphSpec {
            sites: 9,
            p: 0.5,
            j: -1.25,
            seed: 4,
        };
        let g = build_random_graph(&spec, 3.0, 0.25).unwrap();
        let text = g.to_text();
        let back = CouplingGraph::from_text(&text).unwrap();
        assert_eq!(g.site_count(), back.site_count());
        assert_eq!(g.edges(), back.edges());
        assert_eq!(g.h_x, back.h_x);
        assert_eq!(g.h_z, back.h_z);

        let lr = build_long_range(
            &LongRangeSpec {
                j: -1.0,
                alpha: 1.5,
                dims: LatticeDims::Line(7),
            },
            3.0,
            0.25,
        )
        .unwrap();
        let back = CouplingGraph::from_text(&lr.to_text()).unwrap();
        assert_eq!(lr.edges(), back.edges());
    }

    #[test]
    fn adjacency_csv_shape() {
        let g = build_chain_1d(3, -1.0, 0.0, 0.0).unwrap();
        assert_eq!(g.adjacency_csv(), "0,1,0\n1,0,1\n0,1,0\n");
    }
}
