//! Variational ground-state engine for spin-1/2 tilted Ising models built on
//! a superposition-of-product-states ansatz (a rank-M canonical polyadic
//! decomposition of the state tensor).
//!
//! The crate provides:
//!
//! - [`state`]: the variational parameter set, uniform random initialization,
//!   and the pairwise overlap caches every evaluation shares;
//! - [`observables`]: closed-form Pauli expectations, correlators, and the
//!   half-system 2-Rényi entropy;
//! - [`gradients`]: analytic derivatives of the norm, local observables, and
//!   the variational energy in `O((L + |edges|) M²)`;
//! - [`hamiltonian`]: tilted Ising coupling graphs (1D/3D nearest-neighbor,
//!   power-law long-range, seeded random graphs) and the energy;
//! - [`optimizer`]: AdamW with low-weight resampling and parallel restarts;
//! - [`oracle`]: a dense statevector backend (expansion, exact
//!   diagonalization, partial traces, finite differences) used as ground
//!   truth at small sizes;
//! - [`experiments`]: the statistical scans (norm distribution, observable
//!   and gradient variances, entropy typicality) and ground-state sweeps;
//! - [`verify`]: randomized oracle-equivalence and gradient-check suites.
//!
//! Everything randomized draws from seeded, platform-independent streams
//! ([`rng`]), so runs are reproducible bit for bit from their recorded seeds.

pub mod error;
pub mod experiments;
pub mod gradients;
pub mod hamiltonian;
pub mod observables;
pub mod optimizer;
pub mod oracle;
pub mod rng;
pub mod state;
pub mod util;
pub mod verify;

pub use error::{Result, SpsError};
pub use gradients::{energy_and_grad, grad_energy, GradientVector};
pub use hamiltonian::{
    build_chain_1d, build_cubic_3d, build_long_range, build_random_graph, energy, CouplingGraph,
    LatticeDims, LongRangeSpec, RandomGraphSpec,
};
pub use observables::{
    expect_sigma_x, expect_sigma_z, expect_zz, ferro_correlator, renyi2_entropy, Bipartition,
};
pub use optimizer::{
    adamw_step, resample_low_weight, run_ground_state_search, AdamMoments, AdamWConfig,
    RunRecord, TrainSchedule,
};
pub use oracle::{exact_ground_state, expand_statevector, DenseState};
pub use state::{
    compute_overlap_matrix, norm, sample_random_sps, PairMatrices, ParameterDomain, SpsState,
};
