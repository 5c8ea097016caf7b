//! AdamW minimization of the variational energy with low-weight resampling
//! and a multi-restart driver.
//!
//! Each restart samples a fresh random state, runs bias-corrected AdamW on
//! the analytic energy gradient, and periodically reinitializes product
//! terms whose amplitude magnitude fell below a threshold (their optimizer
//! moments are zeroed, everything else is untouched). The driver runs
//! restarts in parallel on independent derived seeds and keeps the best
//! final energy; ties break on the lower restart index, so the outcome does
//! not depend on scheduling.

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpsError};
use crate::gradients::energy_and_grad;
use crate::hamiltonian::{energy, CouplingGraph};
use crate::rng::{derive_seed, stream_rng};
use crate::state::{sample_random_sps, ParameterDomain, SpsState};

/// AdamW hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamWConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 0.0,
        }
    }
}

impl AdamWConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(SpsError::config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        for (name, beta) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&beta) {
                return Err(SpsError::config(format!(
                    "{name} must be in [0, 1), got {beta}"
                )));
            }
        }
        if !(self.epsilon > 0.0) {
            return Err(SpsError::config(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(SpsError::config(format!(
                "weight decay must be non-negative, got {}",
                self.weight_decay
            )));
        }
        Ok(())
    }
}

/// Training schedule: epoch budget, resampling policy, restart count, and
/// optional early stop against a provided reference energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSchedule {
    pub epochs: usize,
    pub resample_threshold: f64,
    pub resample_every: usize,
    pub restarts: usize,
    /// Early-stop bound on `|E − E_ref| / |E_ref|`; requires `reference_energy`.
    pub target_rel_error: Option<f64>,
    /// Reference energy used for the early stop and the reported relative error.
    pub reference_energy: Option<f64>,
    pub seed: u64,
    /// Record every n-th epoch energy in the trace (1 = every epoch).
    pub trace_stride: usize,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        TrainSchedule {
            epochs: 20_000,
            resample_threshold: 1e-5,
            resample_every: 5_000,
            restarts: 20,
            target_rel_error: None,
            reference_energy: None,
            seed: 0,
            trace_stride: 1,
        }
    }
}

impl TrainSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(SpsError::config("epochs must be >= 1"));
        }
        if !(self.resample_threshold >= 0.0) {
            return Err(SpsError::config(format!(
                "resample threshold must be >= 0, got {}",
                self.resample_threshold
            )));
        }
        if self.resample_every == 0 {
            return Err(SpsError::config("resample cadence must be >= 1"));
        }
        if self.restarts == 0 {
            return Err(SpsError::config("restart count must be >= 1"));
        }
        if self.trace_stride == 0 {
            return Err(SpsError::config("trace stride must be >= 1"));
        }
        if self.target_rel_error.is_some() && self.reference_energy.is_none() {
            return Err(SpsError::config(
                "target_rel_error needs a reference_energy to compare against",
            ));
        }
        Ok(())
    }
}

/// First and second moment estimates, indexed like the flat parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamMoments {
    pub first: Vec<f64>,
    pub second: Vec<f64>,
}

impl AdamMoments {
    pub fn zeros(n: usize) -> Self {
        AdamMoments {
            first: vec![0.0; n],
            second: vec![0.0; n],
        }
    }
}

/// One bias-corrected AdamW update, with decoupled weight decay applied
/// multiplicatively before the adaptive step. `t` is the 1-based step index.
pub fn adamw_step(
    params: &mut [f64],
    grads: &[f64],
    moments: &mut AdamMoments,
    t: usize,
    cfg: &AdamWConfig,
) -> Result<()> {
    if grads.len() != params.len()
        || moments.first.len() != params.len()
        || moments.second.len() != params.len()
    {
        return Err(SpsError::dimension(format!(
            "parameter/gradient/moment lengths disagree: {} / {} / {}",
            params.len(),
            grads.len(),
            moments.first.len()
        )));
    }
    if t == 0 {
        return Err(SpsError::config("step index must be >= 1"));
    }
    let bias1 = 1.0 - cfg.beta1.powi(t as i32);
    let bias2 = 1.0 - cfg.beta2.powi(t as i32);
    for i in 0..params.len() {
        if cfg.weight_decay != 0.0 {
            params[i] *= 1.0 - cfg.learning_rate * cfg.weight_decay;
        }
        let g = grads[i];
        moments.first[i] = cfg.beta1 * moments.first[i] + (1.0 - cfg.beta1) * g;
        moments.second[i] = cfg.beta2 * moments.second[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = moments.first[i] / bias1;
        let v_hat = moments.second[i] / bias2;
        params[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
    Ok(())
}

/// Redraws every product term whose amplitude magnitude is below `threshold`
/// (both the amplitude and its full angle column) from `domain`, zeroing the
/// optimizer moments of the redrawn coordinates. Retained terms are returned
/// bit-identical.
pub fn resample_low_weight(
    state: &SpsState,
    threshold: f64,
    domain: &ParameterDomain,
    moments: &mut AdamMoments,
) -> Result<(SpsState, Vec<usize>)> {
    domain.validate()?;
    let (sites, products) = (state.site_count(), state.product_count());
    let flagged: Vec<usize> = (0..products)
        .filter(|&m| state.amplitude(m).abs() < threshold)
        .collect();
    if flagged.is_empty() {
        return Ok((state.clone(), flagged));
    }
    let mut c = state.amplitudes().clone();
    let mut theta = state.angles().clone();
    let mut rng = stream_rng(domain.seed, "sps/resample", 0);
    for &m in &flagged {
        c[m] = rng.random_range(domain.c_low..domain.c_high);
        for l in 0..sites {
            theta[[l, m]] = rng.random_range(domain.theta_low..domain.theta_high);
        }
        moments.first[m] = 0.0;
        moments.second[m] = 0.0;
        for l in 0..sites {
            let idx = products + l * products + m;
            moments.first[idx] = 0.0;
            moments.second[idx] = 0.0;
        }
    }
    Ok((SpsState::new(c, theta)?, flagged))
}

/// Outcome of a single restart.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RestartRecord {
    pub restart: usize,
    pub seed: u64,
    pub final_energy: f64,
    pub epochs_run: usize,
    /// Energies at the start of each recorded epoch.
    pub energy_trace: Vec<f64>,
    /// `(epoch, redrawn product indices)` per resampling event.
    pub resample_events: Vec<(usize, Vec<usize>)>,
    /// Set when the restart hit non-finite parameters or gradients and was
    /// abandoned.
    pub aborted: bool,
}

/// Result of a ground-state search: the best restart plus per-restart records.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub final_state: SpsState,
    pub final_energy: f64,
    /// Signed relative error `(E − E_ref) / E_ref` when a reference was given.
    pub rel_error: Option<f64>,
    pub best_restart: usize,
    pub energy_trace: Vec<f64>,
    pub trace_stride: usize,
    pub resample_events: Vec<(usize, Vec<usize>)>,
    pub restarts: Vec<RestartRecord>,
    pub wall_time_s: f64,
    pub master_seed: u64,
}

impl RunRecord {
    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }
}

struct RestartOutcome {
    record: RestartRecord,
    state: Option<SpsState>,
}

fn run_single_restart(
    graph: &CouplingGraph,
    products: usize,
    schedule: &TrainSchedule,
    cfg: &AdamWConfig,
    restart: usize,
) -> RestartOutcome {
    let sites = graph.site_count();
    let restart_seed = derive_seed(schedule.seed, "gs/restart", restart as u64);
    let domain = ParameterDomain::default().with_seed(restart_seed);
    let mut record = RestartRecord {
        restart,
        seed: restart_seed,
        final_energy: f64::INFINITY,
        epochs_run: 0,
        energy_trace: Vec::new(),
        resample_events: Vec::new(),
        aborted: false,
    };

    let state = match sample_random_sps(sites, products, &domain) {
        Ok(s) => s,
        Err(_) => {
            record.aborted = true;
            return RestartOutcome {
                record,
                state: None,
            };
        }
    };
    let mut params = state.to_flat();
    let mut moments = AdamMoments::zeros(params.len());
    let mut current = state;
    let mut resample_count = 0u64;

    for t in 1..=schedule.epochs {
        let (e, grad) = match energy_and_grad(&current, graph) {
            Ok(v) => v,
            Err(_) => {
                record.aborted = true;
                return RestartOutcome {
                    record,
                    state: None,
                };
            }
        };
        if !e.is_finite() || !grad.all_finite() {
            record.aborted = true;
            return RestartOutcome {
                record,
                state: None,
            };
        }
        if (t - 1) % schedule.trace_stride == 0 {
            record.energy_trace.push(e);
        }
        record.epochs_run = t;

        // Early-stop check every 10 epochs once the target is reachable.
        if let (Some(target), Some(e_ref)) = (schedule.target_rel_error, schedule.reference_energy)
        {
            if t % 10 == 0 && ((e - e_ref) / e_ref).abs() <= target {
                break;
            }
        }

        let flat_grad = grad.to_flat();
        if adamw_step(&mut params, &flat_grad, &mut moments, t, cfg).is_err() {
            record.aborted = true;
            return RestartOutcome {
                record,
                state: None,
            };
        }
        current = match SpsState::from_flat(sites, products, &params) {
            Ok(s) => s,
            Err(_) => {
                record.aborted = true;
                return RestartOutcome {
                    record,
                    state: None,
                };
            }
        };

        if t % schedule.resample_every == 0 && t < schedule.epochs {
            let event_domain = domain.with_seed(derive_seed(
                restart_seed,
                "gs/resample-event",
                resample_count,
            ));
            resample_count += 1;
            match resample_low_weight(
                &current,
                schedule.resample_threshold,
                &event_domain,
                &mut moments,
            ) {
                Ok((next, indices)) => {
                    if !indices.is_empty() {
                        record.resample_events.push((t, indices));
                        current = next;
                        params = current.to_flat();
                    }
                }
                Err(_) => {
                    record.aborted = true;
                    return RestartOutcome {
                        record,
                        state: None,
                    };
                }
            }
        }
    }

    match energy(&current, graph) {
        Ok(e) if e.is_finite() => {
            record.final_energy = e;
            RestartOutcome {
                record,
                state: Some(current),
            }
        }
        _ => {
            record.aborted = true;
            RestartOutcome {
                record,
                state: None,
            }
        }
    }
}

/// Multi-restart ground-state search. Restarts run in parallel on seeds
/// derived from `schedule.seed`; the returned record holds the best restart
/// (lowest final energy, ties to the lower index) plus every restart's
/// summary.
pub fn run_ground_state_search(
    graph: &CouplingGraph,
    products: usize,
    schedule: &TrainSchedule,
    cfg: &AdamWConfig,
) -> Result<RunRecord> {
    if products == 0 {
        return Err(SpsError::config("product count must be >= 1"));
    }
    schedule.validate()?;
    cfg.validate()?;

    let started = Instant::now();
    let mut outcomes: Vec<RestartOutcome> = (0..schedule.restarts)
        .into_par_iter()
        .map(|r| run_single_restart(graph, products, schedule, cfg, r))
        .collect();

    let best = outcomes
        .iter()
        .enumerate()
        .filter(|(_, o)| !o.record.aborted)
        .min_by(|(ia, a), (ib, b)| {
            a.record
                .final_energy
                .partial_cmp(&b.record.final_energy)
                .unwrap()
                .then(ia.cmp(ib))
        })
        .map(|(i, _)| i)
        .ok_or_else(|| {
            SpsError::NonFinite("every restart aborted on non-finite values".to_string())
        })?;

    let best_outcome = &mut outcomes[best];
    let final_state = best_outcome.state.take().expect("non-aborted restart keeps its state");
    let final_energy = best_outcome.record.final_energy;
    let energy_trace = best_outcome.record.energy_trace.clone();
    let resample_events = best_outcome.record.resample_events.clone();

    Ok(RunRecord {
        final_state,
        final_energy,
        rel_error: schedule
            .reference_energy
            .map(|e_ref| (final_energy - e_ref) / e_ref),
        best_restart: best,
        energy_trace,
        trace_stride: schedule.trace_stride,
        resample_events,
        restarts: outcomes.into_iter().map(|o| o.record).collect(),
        wall_time_s: started.elapsed().as_secs_f64(),
        master_seed: schedule.seed,
    })
}
