//! Monte Carlo engine for the interchange process on the tree.
//!
//! Convention: `mapping[v]` is the card sitting on node `v`; swapping along
//! edge `(u, v)` exchanges `mapping[u]` and `mapping[v]`. `F(σ)` is evaluated
//! as `Σ_v f(v) f(mapping[v])`. Reading the permutation the other way round
//! gives `F(σ⁻¹)`, which has the same law because `f` sits on both factors.
//!
//! Randomness: ChaCha8 seeded with the user seed via `seed_from_u64`, one
//! ChaCha stream per trial (`set_stream(i)` for trajectory `i`, and
//! `set_stream(UNIFORM_STREAM_BASE + i)` for the `i`-th uniform comparison
//! sample). Trials run in parallel in fixed-size chunks whose partial
//! statistics are merged in chunk order, so results do not depend on the
//! thread count.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mixing::f_statistic;
use crate::tree::TreeGeometry;

/// Stream offset for the uniform-permutation population.
pub const UNIFORM_STREAM_BASE: u64 = 1 << 63;
const CHUNK: usize = 256;
/// Minimum number of trials for a total-variation estimate.
pub const MIN_TV_TRIALS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Permutation {
    mapping: Vec<usize>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Self {
            mapping: (0..n).collect(),
        }
    }

    pub fn from_mapping(mapping: Vec<usize>) -> Result<Self> {
        let p = Self { mapping };
        if !p.is_bijection() {
            return Err(Error::InvalidConfig("mapping is not a bijection".into()));
        }
        Ok(p)
    }

    pub fn len(&self) -> usize {
        self.mapping.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mapping.is_empty()
    }

    pub fn mapping(&self) -> &[usize] {
        &self.mapping
    }

    pub fn is_bijection(&self) -> bool {
        let mut seen = vec![false; self.mapping.len()];
        self.mapping
            .iter()
            .all(|&c| c < seen.len() && !std::mem::replace(&mut seen[c], true))
    }

    /// Node currently holding `card`.
    pub fn position_of(&self, card: usize) -> Option<usize> {
        self.mapping.iter().position(|&c| c == card)
    }

    pub fn swap(&mut self, u: usize, v: usize) {
        self.mapping.swap(u, v);
    }

    pub fn uniform<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut mapping: Vec<usize> = (0..n).collect();
        mapping.shuffle(rng);
        Self { mapping }
    }
}

/// Generator for stream `stream` of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// One step: a uniform edge, then a fair coin; on heads the two cards on
/// the edge are exchanged. Returns the swapped edge, if any.
pub fn step<R: Rng + ?Sized>(
    sigma: &mut Permutation,
    g: &TreeGeometry,
    rng: &mut R,
) -> Option<(usize, usize)> {
    let child = rng.gen_range(1..g.n());
    let parent = (child - 1) / g.d();
    let heads: bool = rng.gen();
    if heads {
        sigma.swap(parent, child);
        debug_assert!(sigma.is_bijection());
        Some((parent, child))
    } else {
        None
    }
}

/// Exact `E[F(σ₁) | σ₀ = sigma] / F(sigma)` by enumerating all `2(n-1)`
/// equally likely moves and recomputing `F` from scratch for each.
pub fn exact_contraction_check(g: &TreeGeometry, f: &[f64], sigma: &Permutation) -> Result<f64> {
    let f_sigma = f_statistic(f, sigma);
    let scale: f64 = f.iter().map(|v| v * v).sum();
    if f_sigma.abs() <= 1e-12 * scale {
        return Err(Error::UndefinedRatio(f_sigma));
    }
    let mut total = 0.0;
    for (u, v) in g.edge_list().edges {
        let mut moved = sigma.clone();
        moved.swap(u, v);
        total += f_statistic(f, &moved) + f_sigma;
    }
    Ok(total / (2.0 * (g.n() as f64 - 1.0)) / f_sigma)
}

/// Exact `E[(F(σ₁) - F(σ₀))² | σ₀ = sigma]` by enumeration.
pub fn exact_step_second_moment(g: &TreeGeometry, f: &[f64], sigma: &Permutation) -> f64 {
    let f_sigma = f_statistic(f, sigma);
    let mut total = 0.0;
    for (u, v) in g.edge_list().edges {
        let mut moved = sigma.clone();
        moved.swap(u, v);
        total += (f_statistic(f, &moved) - f_sigma).powi(2);
    }
    total / (2.0 * (g.n() as f64 - 1.0))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Observers {
    /// Keep the full `F(σ_t)` trace of every trial.
    pub f_trace: bool,
    /// Record the final node of this card in every trial.
    pub card_position: Option<usize>,
    /// Keep the final permutation of every trial.
    pub final_state: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationConfig {
    pub d: usize,
    pub h: usize,
    pub steps: usize,
    pub trials: usize,
    pub seed: u64,
    pub observers: Observers,
}

impl SimulationConfig {
    pub fn new(d: usize, h: usize, steps: usize, trials: usize, seed: u64) -> Self {
        Self {
            d,
            h,
            steps,
            trials,
            seed,
            observers: Observers::default(),
        }
    }

    fn validate(&self, g: &TreeGeometry) -> Result<()> {
        if self.trials < 1 {
            return Err(Error::InvalidConfig("trials must be >= 1".into()));
        }
        if let Some(card) = self.observers.card_position {
            if card >= g.n() {
                return Err(Error::InvalidConfig(format!(
                    "card {card} not in deck of {}",
                    g.n()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryStats {
    pub f_mean_per_step: Vec<f64>,
    /// Unbiased sample variance across trials (0 for a single trial).
    pub f_var_per_step: Vec<f64>,
    pub final_f_samples: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub traces: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub card_positions: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_states: Option<Vec<Permutation>>,
}

/// Per-step running moments (count, mean, M2), mergeable across chunks.
#[derive(Clone)]
struct Moments {
    count: f64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Moments {
    fn new(len: usize) -> Self {
        Self {
            count: 0.0,
            mean: vec![0.0; len],
            m2: vec![0.0; len],
        }
    }

    fn push(&mut self, trace: &[f64]) {
        self.count += 1.0;
        for ((m, s), &x) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(trace) {
            let delta = x - *m;
            *m += delta / self.count;
            *s += delta * (x - *m);
        }
    }

    fn merge(&mut self, other: &Moments) {
        if other.count == 0.0 {
            return;
        }
        let total = self.count + other.count;
        for i in 0..self.mean.len() {
            let delta = other.mean[i] - self.mean[i];
            self.mean[i] += delta * other.count / total;
            self.m2[i] += other.m2[i] + delta * delta * self.count * other.count / total;
        }
        self.count = total;
    }
}

struct TrialOutput {
    trace: Option<Vec<f64>>,
    final_f: f64,
    card_position: Option<usize>,
    final_state: Option<Permutation>,
}

fn run_trial(
    g: &TreeGeometry,
    f: &[f64],
    cfg: &SimulationConfig,
    trial: usize,
    moments: &mut Moments,
) -> TrialOutput {
    let mut rng = stream_rng(cfg.seed, trial as u64);
    let mut sigma = Permutation::identity(g.n());
    let mut current = f_statistic(f, &sigma);
    let mut trace = Vec::with_capacity(cfg.steps + 1);
    trace.push(current);
    for _ in 0..cfg.steps {
        if let Some((u, v)) = step(&mut sigma, g, &mut rng) {
            // after the swap sigma[u], sigma[v] hold the exchanged cards
            let (cu, cv) = (sigma.mapping[v], sigma.mapping[u]);
            current -= (f[u] - f[v]) * (f[cu] - f[cv]);
        }
        trace.push(current);
    }
    assert!(sigma.is_bijection(), "trial {trial} lost bijectivity");
    moments.push(&trace);
    TrialOutput {
        final_f: current,
        card_position: cfg
            .observers
            .card_position
            .and_then(|c| sigma.position_of(c)),
        final_state: cfg.observers.final_state.then(|| sigma.clone()),
        trace: cfg.observers.f_trace.then_some(trace),
    }
}

/// Independent trajectories from the identity, recording `F(σ_t)`.
pub fn run_trajectories(cfg: &SimulationConfig, f: &[f64]) -> Result<TrajectoryStats> {
    let g = TreeGeometry::new(cfg.d, cfg.h)?;
    cfg.validate(&g)?;
    if f.len() != g.n() {
        return Err(Error::InvalidConfig(format!(
            "f has {} entries, tree has {} nodes",
            f.len(),
            g.n()
        )));
    }
    let len = cfg.steps + 1;
    let chunks: Vec<(Moments, Vec<TrialOutput>)> = (0..cfg.trials.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut moments = Moments::new(len);
            let outputs = (c * CHUNK..((c + 1) * CHUNK).min(cfg.trials))
                .map(|trial| run_trial(&g, f, cfg, trial, &mut moments))
                .collect();
            (moments, outputs)
        })
        .collect();

    let mut total = Moments::new(len);
    let mut outputs = Vec::with_capacity(cfg.trials);
    for (moments, out) in chunks {
        total.merge(&moments);
        outputs.extend(out);
    }
    let denom = (total.count - 1.0).max(1.0);
    let f_var_per_step = if cfg.trials > 1 {
        total.m2.iter().map(|s| s / denom).collect()
    } else {
        vec![0.0; len]
    };

    Ok(TrajectoryStats {
        f_mean_per_step: total.mean,
        f_var_per_step,
        final_f_samples: outputs.iter().map(|o| o.final_f).collect(),
        traces: cfg.observers.f_trace.then(|| {
            outputs
                .iter_mut()
                .map(|o| o.trace.take().unwrap())
                .collect()
        }),
        card_positions: cfg
            .observers
            .card_position
            .map(|_| outputs.iter().map(|o| o.card_position.unwrap()).collect()),
        final_states: cfg.observers.final_state.then(|| {
            outputs
                .iter_mut()
                .map(|o| o.final_state.take().unwrap())
                .collect()
        }),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TvEstimate {
    pub t: usize,
    /// `|P̂(F(σ_t) > c) - P̂(F(U) > c)|`.
    pub lower_bound: f64,
    /// `c`, midpoint of the two sample means.
    pub threshold: f64,
    pub stderr: f64,
    pub p_process: f64,
    pub p_uniform: f64,
}

/// Empirical lower bound on the total-variation distance at time `t`, from
/// the event `{F > c}` compared between the process and uniform permutations.
pub fn estimate_tv_lower_bound(cfg: &SimulationConfig, f: &[f64], t: usize) -> Result<TvEstimate> {
    if cfg.trials < MIN_TV_TRIALS {
        return Err(Error::InvalidConfig(format!(
            "need at least {MIN_TV_TRIALS} trials, got {}",
            cfg.trials
        )));
    }
    let run = SimulationConfig {
        steps: t,
        observers: Observers::default(),
        ..cfg.clone()
    };
    let g = TreeGeometry::new(cfg.d, cfg.h)?;
    run.validate(&g)?;
    if f.len() != g.n() {
        return Err(Error::InvalidConfig(format!(
            "f has {} entries, tree has {} nodes",
            f.len(),
            g.n()
        )));
    }
    let process: Vec<f64> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = stream_rng(cfg.seed, trial as u64);
            let mut sigma = Permutation::identity(g.n());
            for _ in 0..t {
                step(&mut sigma, &g, &mut rng);
            }
            assert!(sigma.is_bijection());
            f_statistic(f, &sigma)
        })
        .collect();
    let uniform: Vec<f64> = (0..cfg.trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(cfg.seed, UNIFORM_STREAM_BASE + i as u64);
            f_statistic(f, &Permutation::uniform(g.n(), &mut rng))
        })
        .collect();

    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let threshold = 0.5 * (mean(&process) + mean(&uniform));
    let tail = |v: &[f64]| v.iter().filter(|&&x| x > threshold).count() as f64 / v.len() as f64;
    let (p_process, p_uniform) = (tail(&process), tail(&uniform));
    let m = cfg.trials as f64;
    let stderr = (p_process * (1.0 - p_process) / m + p_uniform * (1.0 - p_uniform) / m).sqrt();
    Ok(TvEstimate {
        t,
        lower_bound: (p_process - p_uniform).abs(),
        threshold,
        stderr,
        p_process,
        p_uniform,
    })
}
