//! Monte Carlo photodetection of the splitting cascade and the nulling
//! hierarchy.
//!
//! Every stage is an `N`-step cascade of beam splitters whose reflectivities
//! `η_p = 1/(N - p + 1)` send the same fraction `1/N` of the incoming energy
//! to an on-off detector at each step. A reference amplitude passed through
//! the same splitters is subtracted before detection (displacement), so a
//! matching hypothesis never clicks. A detector facing mean photon number `ε`
//! stays dark with probability `e^{-ε}`.
//!
//! Trials are split into shards of fixed size. Shard `s` of input row `m`
//! draws from a ChaCha8 stream selected by `(m << 32) | s` under the user
//! seed, so counts do not depend on the number of threads.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::detection::{binary_success, helstrom_row, ConfusionKind, ConfusionMatrix};
use crate::error::{check_energy, check_index, check_phases, Error, Result};

/// Trials per RNG stream.
pub const SHARD_SIZE: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    /// VP cascade followed by a draw from the Helstrom distribution at the
    /// residual energy (no physical receiver is known for `M > 2`).
    VpHelstromProxy,
    /// VP cascade followed by the nulling hierarchy.
    VpRealistic,
    /// Nulling hierarchy on the full pulse, without the VP stage.
    RealisticPskOnly,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Self::VpHelstromProxy, Self::VpRealistic, Self::RealisticPskOnly];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::VpHelstromProxy => "vp-helstrom-proxy",
            Self::VpRealistic => "vp-realistic",
            Self::RealisticPskOnly => "realistic-psk-only",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown scenario '{s}'"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub phases: usize,
    pub pulse_energy: f64,
    /// Splitting steps per stage.
    pub steps: usize,
    /// Trials per input phase.
    pub trials: u64,
    pub seed: u64,
    pub scenario: Scenario,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        check_phases(self.phases)?;
        check_energy(self.pulse_energy)?;
        if self.steps == 0 {
            return Err(Error::InvalidSteps);
        }
        if self.trials == 0 {
            return Err(Error::InvalidTrials);
        }
        if self.scenario != Scenario::VpHelstromProxy && !(2..=4).contains(&self.phases) {
            return Err(Error::Unsupported {
                kind: "nulling hierarchy",
                phases: self.phases,
            });
        }
        Ok(())
    }
}

/// One `N`-step splitting stage acting on a signal and a nulling reference.
#[derive(Debug, Clone)]
pub struct SplittingCascade {
    steps: usize,
    done: usize,
    signal: Complex64,
    reference: Complex64,
    transmission: f64,
}

impl SplittingCascade {
    pub fn new(signal: Complex64, reference: Complex64, steps: usize) -> Self {
        Self {
            steps,
            done: 0,
            signal,
            reference,
            transmission: 1.0,
        }
    }

    /// Reflectivity of step `p` (1-based).
    pub fn reflectivity(&self, p: usize) -> f64 {
        1.0 / (self.steps - p + 1) as f64
    }

    pub fn steps_done(&self) -> usize {
        self.done
    }

    /// Amplitude still travelling down the cascade.
    pub fn signal(&self) -> Complex64 {
        self.signal
    }

    pub fn reference(&self) -> Complex64 {
        self.reference
    }

    /// Amplitude factor accumulated by the transmitted beam so far.
    pub fn transmission(&self) -> f64 {
        self.transmission
    }

    /// Advances one step and returns `(reflected signal energy, mean photon
    /// number at the detector after displacement)`, or `None` once all
    /// steps are used.
    pub fn advance(&mut self) -> Option<(f64, f64)> {
        if self.done == self.steps {
            return None;
        }
        let eta = self.reflectivity(self.done + 1);
        let (r, t) = (eta.sqrt(), (1.0 - eta).sqrt());
        let reflected = self.signal * r;
        let displaced = reflected - self.reference * r;
        self.signal *= t;
        self.reference *= t;
        self.transmission *= t;
        self.done += 1;
        Some((reflected.norm_sqr(), displaced.norm_sqr()))
    }

    /// Runs until the first click; returns its step or `None` if the
    /// detectors stay dark throughout.
    pub fn first_click(&mut self, rng: &mut ChaCha8Rng) -> Option<usize> {
        while let Some((_, mean)) = self.advance() {
            if rng.random::<f64>() < -(-mean).exp_m1() {
                return Some(self.done);
            }
        }
        None
    }
}

/// PSK stage run after the VP cascade has located the pulse.
pub trait InnerStage: Sync {
    fn phases(&self) -> usize;

    /// Guess for a pulse of phase `sent` carrying `energy` photons.
    fn decide(&self, sent: usize, energy: f64, rng: &mut ChaCha8Rng) -> Result<usize>;
}

/// Samples the guess from the Helstrom distribution.
#[derive(Debug, Clone, Copy)]
pub struct HelstromDraw {
    pub phases: usize,
}

impl InnerStage for HelstromDraw {
    fn phases(&self) -> usize {
        self.phases
    }

    fn decide(&self, sent: usize, energy: f64, rng: &mut ChaCha8Rng) -> Result<usize> {
        let mut row = vec![0.0; self.phases];
        helstrom_row(self.phases, sent, energy, &mut row)?;
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (l, p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                return Ok(l);
            }
        }
        Ok(self.phases - 1)
    }
}

/// Nulls phase 0 (then phase 2 for `M = 4`) and ends with a binary stage
/// drawn at the Helstrom success probability.
#[derive(Debug, Clone, Copy)]
pub struct NullingHierarchy {
    pub phases: usize,
    pub steps: usize,
}

impl NullingHierarchy {
    fn plan(&self) -> Result<(&'static [usize], [usize; 2])> {
        match self.phases {
            2 => Ok((&[], [0, 1])),
            3 => Ok((&[0], [1, 2])),
            4 => Ok((&[0, 2], [1, 3])),
            phases => Err(Error::Unsupported {
                kind: "nulling hierarchy",
                phases,
            }),
        }
    }
}

impl InnerStage for NullingHierarchy {
    fn phases(&self) -> usize {
        self.phases
    }

    fn decide(&self, sent: usize, energy: f64, rng: &mut ChaCha8Rng) -> Result<usize> {
        let (nulls, pair) = self.plan()?;
        let m = self.phases as f64;
        let amp = |j: usize| Complex64::from_polar(energy.sqrt(), 2.0 * PI * j as f64 / m);
        let mut scale = 1.0;
        for &null in nulls {
            let mut stage = SplittingCascade::new(amp(sent) * scale, amp(null) * scale, self.steps);
            if stage.first_click(rng).is_none() {
                return Ok(null);
            }
            scale *= stage.transmission();
        }
        let distance_sq = ((amp(pair[0]) - amp(pair[1])) * scale).norm_sqr();
        let other = if sent == pair[0] { pair[1] } else { pair[0] };
        Ok(if rng.random::<f64>() < binary_success(distance_sq) {
            sent
        } else {
            other
        })
    }
}

/// Counts over `M` input rows and `M + 1` outcomes (last = vacuum).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmpiricalConfusion {
    phases: usize,
    trials_per_row: u64,
    counts: Vec<u64>,
}

/// Agreement between an empirical and an analytic table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoodnessOfFit {
    pub chi2: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Largest `|p̂ - p| / σ` with the binomial `σ` of the analytic `p`.
    pub max_sigma: f64,
    pub cells_beyond_3sigma: usize,
}

impl GoodnessOfFit {
    pub fn passes(&self, significance: f64) -> bool {
        self.p_value > significance && self.cells_beyond_3sigma == 0
    }
}

impl EmpiricalConfusion {
    pub fn new(phases: usize, trials_per_row: u64, counts: Vec<u64>) -> Result<Self> {
        let cols = phases + 1;
        if counts.len() != phases * cols {
            return Err(Error::DimensionMismatch {
                expected: phases * cols,
                actual: counts.len(),
            });
        }
        for (row, chunk) in counts.chunks(cols).enumerate() {
            let sum: u64 = chunk.iter().sum();
            if sum != trials_per_row {
                return Err(Error::NotRowStochastic {
                    row,
                    sum: sum as f64,
                    tolerance: 0.0,
                });
            }
        }
        Ok(Self {
            phases,
            trials_per_row,
            counts,
        })
    }

    pub fn phases(&self) -> usize {
        self.phases
    }

    pub fn trials_per_row(&self) -> u64 {
        self.trials_per_row
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn count(&self, sent: usize, col: usize) -> u64 {
        self.counts[sent * (self.phases + 1) + col]
    }

    pub fn probs(&self) -> Vec<f64> {
        let t = self.trials_per_row as f64;
        self.counts.iter().map(|&c| c as f64 / t).collect()
    }

    /// Binomial standard errors `√(p̂(1-p̂)/T)`.
    pub fn std_errors(&self) -> Vec<f64> {
        let t = self.trials_per_row as f64;
        self.probs().iter().map(|p| (p * (1.0 - p) / t).sqrt()).collect()
    }

    pub fn to_confusion(&self, pulse_energy: f64) -> Result<ConfusionMatrix> {
        ConfusionMatrix::from_rows(ConfusionKind::MonteCarlo, self.phases, pulse_energy, self.probs())
    }

    /// χ² test (uniform over rows) and per-cell binomial deviations against
    /// `analytic`. Cells with an expected count below `1e-9` must be empty.
    pub fn compare(&self, analytic: &ConfusionMatrix) -> Result<GoodnessOfFit> {
        if analytic.phases() != self.phases {
            return Err(Error::DimensionMismatch {
                expected: self.phases,
                actual: analytic.phases(),
            });
        }
        let t = self.trials_per_row as f64;
        let cols = self.phases + 1;
        let (mut chi2, mut dof, mut max_sigma, mut beyond) = (0.0, 0usize, 0.0f64, 0usize);
        for sent in 0..self.phases {
            let mut cells = 0usize;
            for col in 0..cols {
                let p = analytic.get(sent, col);
                let observed = self.count(sent, col) as f64;
                let expected = t * p;
                if expected < 1e-9 {
                    if observed > 0.0 {
                        chi2 = f64::INFINITY;
                        max_sigma = f64::INFINITY;
                        beyond += 1;
                    }
                    continue;
                }
                cells += 1;
                chi2 += (observed - expected).powi(2) / expected;
                let sigma = (p * (1.0 - p) / t).sqrt();
                let dev = (observed / t - p).abs();
                let z = if sigma > 0.0 {
                    dev / sigma
                } else if dev == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                };
                max_sigma = max_sigma.max(z);
                if z > 3.0 {
                    beyond += 1;
                }
            }
            dof += cells.saturating_sub(1);
        }
        let p_value = if dof == 0 {
            if chi2 == 0.0 { 1.0 } else { 0.0 }
        } else if chi2.is_finite() {
            ChiSquared::new(dof as f64).map_err(|_| Error::InvalidTrials)?.sf(chi2)
        } else {
            0.0
        };
        Ok(GoodnessOfFit {
            chi2,
            dof,
            p_value,
            max_sigma,
            cells_beyond_3sigma: beyond,
        })
    }
}

/// Runs `trial` for every input row and merges per-shard counts in shard
/// order.
fn run_rows<F>(phases: usize, trials: u64, seed: u64, trial: F) -> Result<EmpiricalConfusion>
where
    F: Fn(usize, &mut ChaCha8Rng) -> Result<usize> + Sync,
{
    let cols = phases + 1;
    let shards = trials.div_ceil(SHARD_SIZE);
    let jobs: Vec<(usize, u64)> = (0..phases).flat_map(|m| (0..shards).map(move |s| (m, s))).collect();
    let partial: Vec<(usize, Vec<u64>)> = jobs
        .par_iter()
        .map(|&(sent, shard)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(((sent as u64) << 32) | shard);
            let len = SHARD_SIZE.min(trials - shard * SHARD_SIZE);
            let mut counts = vec![0u64; cols];
            for _ in 0..len {
                let outcome = trial(sent, &mut rng)?;
                check_index("outcome", outcome, cols)?;
                counts[outcome] += 1;
            }
            Ok((sent, counts))
        })
        .collect::<Result<_>>()?;
    let mut counts = vec![0u64; phases * cols];
    for (sent, shard_counts) in partial {
        for (c, v) in counts[sent * cols..(sent + 1) * cols].iter_mut().zip(shard_counts) {
            *c += v;
        }
    }
    EmpiricalConfusion::new(phases, trials, counts)
}

fn pulse(phases: usize, sent: usize, energy: f64) -> Complex64 {
    Complex64::from_polar(energy.sqrt(), 2.0 * PI * sent as f64 / phases as f64)
}

/// VP cascade on a pulse of energy `ℰ`; the first click hands the residual
/// pulse to `inner`, no click records the vacuum outcome.
pub fn simulate_vp(config: &SimConfig, inner: &dyn InnerStage) -> Result<EmpiricalConfusion> {
    config.validate()?;
    let phases = config.phases;
    if inner.phases() != phases {
        return Err(Error::DimensionMismatch {
            expected: phases,
            actual: inner.phases(),
        });
    }
    run_rows(phases, config.trials, config.seed, |sent, rng| {
        let mut cascade = SplittingCascade::new(pulse(phases, sent, config.pulse_energy), Complex64::new(0.0, 0.0), config.steps);
        match cascade.first_click(rng) {
            None => Ok(phases),
            Some(_) => inner.decide(sent, cascade.signal().norm_sqr(), rng),
        }
    })
}

/// Nulling hierarchy alone on a pulse of energy `ℰ`.
pub fn simulate_nulling_hierarchy(phases: usize, energy: f64, steps: usize, trials: u64, seed: u64) -> Result<EmpiricalConfusion> {
    let config = SimConfig {
        phases,
        pulse_energy: energy,
        steps,
        trials,
        seed,
        scenario: Scenario::RealisticPskOnly,
    };
    simulate(&config)
}

pub fn simulate(config: &SimConfig) -> Result<EmpiricalConfusion> {
    config.validate()?;
    let nulling = NullingHierarchy {
        phases: config.phases,
        steps: config.steps,
    };
    match config.scenario {
        Scenario::VpHelstromProxy => simulate_vp(config, &HelstromDraw { phases: config.phases }),
        Scenario::VpRealistic => simulate_vp(config, &nulling),
        Scenario::RealisticPskOnly => run_rows(config.phases, config.trials, config.seed, |sent, rng| {
            nulling.decide(sent, config.pulse_energy, rng)
        }),
    }
}
