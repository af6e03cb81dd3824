//! Conditional detection probabilities and confusion tables.
//!
//! After the Hadamard transform a codeword is a single pulse of energy `ℰ` on
//! one of `n` modes. The vacuum-or-pulse (VP) receiver splits every mode into
//! `N` pieces of equal energy `ℰ/N` and photodetects them in turn; the first
//! click reveals the pulse position and the remaining energy is handed to a
//! PSK detector. No click at all is reported as a separate vacuum outcome.
//!
//! Two PSK detectors are provided: the Helstrom bound (optimal, not known to
//! be realizable for `M > 2`) and a nulling hierarchy that displaces one
//! hypothesis to the vacuum per stage and finishes with a binary Dolinar
//! stage. Together they bracket what the VP receiver can achieve.
//!
//! Tables are `M × (M+1)`: column `ℓ < M` is the probability of guessing
//! phase `ℓ`, column `M` the vacuum outcome.
//!
//! Continuous-splitting integrals `∫_{e^{-D}}^1 dt f(D + ln t)` are evaluated
//! in the variable `u = √(D + ln t)`, i.e. `∫_0^{√D} 2u e^{u²-D} f(u²) du`.
//! The PSK probabilities behave like `√s` at vanishing residual energy `s`;
//! in `u` they are smooth, so Gauss–Kronrod converges quickly and no
//! negative residual energy is ever evaluated.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{check_energy, check_index, check_phases, Error, Result};
use crate::quadrature::{try_integrate_vec, QuadratureConfig};
use crate::spectra::psk_eigenvalues;

/// Row-sum tolerance for analytic tables.
pub const ROW_TOLERANCE: f64 = 1e-9;
/// Row-sum tolerance for tables estimated by sampling.
pub const MONTE_CARLO_ROW_TOLERANCE: f64 = 1e-2;
/// Entries this far outside `[0, 1]` are quadrature or rounding noise and
/// get clamped.
const ENTRY_SLACK: f64 = ROW_TOLERANCE;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConfusionKind {
    Helstrom,
    VpHelstrom,
    VpRealistic,
    RealisticPsk,
    Separable,
    MonteCarlo,
}

impl ConfusionKind {
    pub const ALL: [ConfusionKind; 6] = [
        Self::Helstrom,
        Self::VpHelstrom,
        Self::VpRealistic,
        Self::RealisticPsk,
        Self::Separable,
        Self::MonteCarlo,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Helstrom => "helstrom",
            Self::VpHelstrom => "vp-helstrom",
            Self::VpRealistic => "vp-realistic",
            Self::RealisticPsk => "realistic-psk",
            Self::Separable => "separable",
            Self::MonteCarlo => "monte-carlo",
        }
    }

    /// Kinds whose vacuum column is the no-click probability `e^{-ℰ}`.
    pub fn is_vp(self) -> bool {
        matches!(self, Self::VpHelstrom | Self::VpRealistic)
    }
}

impl fmt::Display for ConfusionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ConfusionKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown confusion kind '{s}'"))
    }
}

/// Row-stochastic `M × (M+1)` table of conditional probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionMatrix {
    kind: ConfusionKind,
    phases: usize,
    pulse_energy: f64,
    probs: Vec<f64>,
}

impl ConfusionMatrix {
    /// Builds a table from row-major entries, checking shape, entry range
    /// and row sums (tolerance depends on `kind`).
    pub fn from_rows(kind: ConfusionKind, phases: usize, pulse_energy: f64, mut probs: Vec<f64>) -> Result<Self> {
        check_phases(phases)?;
        let cols = phases + 1;
        if probs.len() != phases * cols {
            return Err(Error::DimensionMismatch {
                expected: phases * cols,
                actual: probs.len(),
            });
        }
        for (i, p) in probs.iter_mut().enumerate() {
            if !(-ENTRY_SLACK..=1.0 + ENTRY_SLACK).contains(p) {
                return Err(Error::InvalidProbability {
                    row: i / cols,
                    col: i % cols,
                    value: *p,
                });
            }
            *p = p.clamp(0.0, 1.0);
        }
        let tolerance = match kind {
            ConfusionKind::MonteCarlo => MONTE_CARLO_ROW_TOLERANCE,
            _ => ROW_TOLERANCE,
        };
        for (row, chunk) in probs.chunks(cols).enumerate() {
            let sum: f64 = chunk.iter().sum();
            if (sum - 1.0).abs() > tolerance {
                return Err(Error::NotRowStochastic { row, sum, tolerance });
            }
        }
        Ok(Self {
            kind,
            phases,
            pulse_energy,
            probs,
        })
    }

    pub fn kind(&self) -> ConfusionKind {
        self.kind
    }

    pub fn phases(&self) -> usize {
        self.phases
    }

    pub fn cols(&self) -> usize {
        self.phases + 1
    }

    pub fn pulse_energy(&self) -> f64 {
        self.pulse_energy
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn row(&self, sent: usize) -> &[f64] {
        let cols = self.cols();
        &self.probs[sent * cols..(sent + 1) * cols]
    }

    pub fn get(&self, sent: usize, col: usize) -> f64 {
        self.probs[sent * self.cols() + col]
    }

    pub fn vacuum(&self, sent: usize) -> f64 {
        self.get(sent, self.phases)
    }

    /// Largest `|Σ_col P - 1|` over rows.
    pub fn max_row_deviation(&self) -> f64 {
        self.probs
            .chunks(self.cols())
            .map(|r| (r.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Mean diagonal `(1/M) Σ_m P(m|m)`.
    pub fn average_success(&self) -> f64 {
        (0..self.phases).map(|m| self.get(m, m)).sum::<f64>() / self.phases as f64
    }
}

/// Success probability `½(1 + √(1 - e^{-d}))` for two equiprobable coherent
/// states at squared distance `d`.
pub fn binary_success(distance_sq: f64) -> f64 {
    0.5 * (1.0 + (-(-distance_sq.max(0.0)).exp_m1()).sqrt())
}

/// Helstrom row `P(·|sent)` for `M` PSK states of energy `ℰ`; depends only on
/// `(ℓ - sent) mod M`.
pub fn helstrom_row(phases: usize, sent: usize, energy: f64, out: &mut [f64]) -> Result<()> {
    check_phases(phases)?;
    check_index("phase", sent, phases)?;
    if out.len() < phases {
        return Err(Error::DimensionMismatch {
            expected: phases,
            actual: out.len(),
        });
    }
    let spectrum = psk_eigenvalues(phases, energy)?;
    let roots: Vec<f64> = spectrum.lambdas().iter().map(|l| l.sqrt()).collect();
    let m = phases as f64;
    for d in 0..phases {
        let amp: Complex64 = roots
            .iter()
            .enumerate()
            .map(|(j, r)| r * Complex64::from_polar(1.0, -2.0 * PI * (j * d) as f64 / m))
            .sum::<Complex64>()
            / m;
        out[(sent + d) % phases] = amp.norm_sqr().clamp(0.0, 1.0);
    }
    Ok(())
}

pub fn helstrom_prob(phases: usize, guess: usize, sent: usize, energy: f64) -> Result<f64> {
    check_phases(phases)?;
    check_index("guess", guess, phases)?;
    let mut row = vec![0.0; phases];
    helstrom_row(phases, sent, energy, &mut row)?;
    Ok(row[guess])
}

/// Weight given to a first click at step `p` of an `N`-step cascade.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClickWeights {
    /// `e^{-D(p-1)/N}(1 - e^{-D/N})`: no click in the first `p-1` steps,
    /// then a click. Sums to `1 - e^{-D}` with the no-click outcome.
    #[default]
    FirstClick,
    /// `e^{-Dp/N}(1 - e^{-D/N})`; rows lose the mass `(e^{D/N} - 1)` times
    /// smaller. Kept for comparison with that convention.
    Discounted,
}

impl ClickWeights {
    pub fn weight(self, step: usize, steps: usize, distance_sq: f64) -> f64 {
        let slice = distance_sq / steps as f64;
        let survived = match self {
            Self::FirstClick => step - 1,
            Self::Discounted => step,
        };
        (-slice * survived as f64).exp() * -(-slice).exp_m1()
    }
}

/// Number of splitting steps per stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Splitting {
    #[default]
    Limit,
    Finite { steps: usize, weights: ClickWeights },
}

impl Splitting {
    pub fn finite(steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidSteps);
        }
        Ok(Self::Finite {
            steps,
            weights: ClickWeights::FirstClick,
        })
    }

    fn validate(self) -> Result<()> {
        match self {
            Self::Finite { steps: 0, .. } => Err(Error::InvalidSteps),
            _ => Ok(()),
        }
    }
}

/// A PSK detector: conditional guess probabilities as a function of the
/// energy left in the pulse.
pub trait PskDetector: Sync {
    fn phases(&self) -> usize;

    /// Writes `P(ℓ|sent; energy)` for `ℓ = 0..M` into `row[..M]`.
    fn fill_row(&self, sent: usize, energy: f64, row: &mut [f64]) -> Result<()>;
}

#[derive(Debug, Clone, Copy)]
pub struct Helstrom {
    pub phases: usize,
}

impl PskDetector for Helstrom {
    fn phases(&self) -> usize {
        self.phases
    }

    fn fill_row(&self, sent: usize, energy: f64, row: &mut [f64]) -> Result<()> {
        helstrom_row(self.phases, sent, energy, row)
    }
}

/// Nulling hierarchy for `M ∈ {2, 3, 4}`; `M = 2` is the Dolinar receiver.
#[derive(Debug, Clone, Copy)]
pub struct Realistic {
    phases: usize,
    splitting: Splitting,
    quad: QuadratureConfig,
}

impl Realistic {
    pub fn new(phases: usize, splitting: Splitting, quad: QuadratureConfig) -> Result<Self> {
        if !(2..=4).contains(&phases) {
            return Err(Error::Unsupported {
                kind: "realistic detection",
                phases,
            });
        }
        splitting.validate()?;
        quad.validate()?;
        Ok(Self {
            phases,
            splitting,
            quad,
        })
    }
}

impl PskDetector for Realistic {
    fn phases(&self) -> usize {
        self.phases
    }

    fn fill_row(&self, sent: usize, energy: f64, row: &mut [f64]) -> Result<()> {
        realistic_row(self.phases, sent, energy, self.splitting, &self.quad, row)
    }
}

/// Adapts a closure `(sent, energy, row) -> Result<()>` to [`PskDetector`].
pub struct FnDetector<F> {
    phases: usize,
    f: F,
}

impl<F> FnDetector<F>
where
    F: Fn(usize, f64, &mut [f64]) -> Result<()> + Sync,
{
    pub fn new(phases: usize, f: F) -> Self {
        Self { phases, f }
    }
}

impl<F> PskDetector for FnDetector<F>
where
    F: Fn(usize, f64, &mut [f64]) -> Result<()> + Sync,
{
    fn phases(&self) -> usize {
        self.phases
    }

    fn fill_row(&self, sent: usize, energy: f64, row: &mut [f64]) -> Result<()> {
        (self.f)(sent, energy, row)
    }
}

/// `∫_{e^{-D}}^1 dt f(D + ln t)` for a vector-valued `f` of the residual
/// squared distance, integrated in `u = √(D + ln t)`.
fn click_integral<F>(distance_sq: f64, dim: usize, quad: &QuadratureConfig, mut f: F) -> Result<Vec<f64>>
where
    F: FnMut(f64, &mut [f64]) -> Result<()>,
{
    if distance_sq <= 0.0 {
        return Ok(vec![0.0; dim]);
    }
    try_integrate_vec(
        |u, out| {
            let s = u * u;
            f(s, out)?;
            let w = 2.0 * u * (s - distance_sq).exp();
            out.iter_mut().for_each(|v| *v *= w);
            Ok(())
        },
        0.0,
        distance_sq.sqrt(),
        dim,
        quad,
    )
}

/// Discrete counterpart of [`click_integral`]: `Σ_p w_p f(D(N-p)/N)`.
fn click_sum<F>(distance_sq: f64, steps: usize, weights: ClickWeights, dim: usize, mut f: F) -> Result<Vec<f64>>
where
    F: FnMut(f64, &mut [f64]) -> Result<()>,
{
    let mut total = vec![0.0; dim];
    if distance_sq <= 0.0 {
        return Ok(total);
    }
    let mut buf = vec![0.0; dim];
    for p in 1..=steps {
        let w = weights.weight(p, steps, distance_sq);
        buf.iter_mut().for_each(|v| *v = 0.0);
        f(distance_sq * (steps - p) as f64 / steps as f64, &mut buf)?;
        total.iter_mut().zip(&buf).for_each(|(t, b)| *t += w * b);
    }
    Ok(total)
}

fn click_stage<F>(distance_sq: f64, splitting: Splitting, quad: &QuadratureConfig, dim: usize, f: F) -> Result<Vec<f64>>
where
    F: FnMut(f64, &mut [f64]) -> Result<()>,
{
    match splitting {
        Splitting::Limit => click_integral(distance_sq, dim, quad, f),
        Splitting::Finite { steps, weights } => click_sum(distance_sq, steps, weights, dim, f),
    }
}

fn check_row_args(phases: usize, sent: usize, energy: f64, out: &[f64], width: usize) -> Result<()> {
    check_phases(phases)?;
    check_index("phase", sent, phases)?;
    check_energy(energy)?;
    if out.len() < width {
        return Err(Error::DimensionMismatch {
            expected: width,
            actual: out.len(),
        });
    }
    Ok(())
}

/// VP row `(P(0|sent), .., P(M-1|sent), e^{-ℰ})` in the continuous-splitting
/// limit.
pub fn vp_row_limit(inner: &dyn PskDetector, sent: usize, energy: f64, quad: &QuadratureConfig, out: &mut [f64]) -> Result<()> {
    let phases = inner.phases();
    check_row_args(phases, sent, energy, out, phases + 1)?;
    let row = click_integral(energy, phases, quad, |s, buf| inner.fill_row(sent, s, buf))?;
    out[..phases].copy_from_slice(&row);
    out[phases] = (-energy).exp();
    Ok(())
}

/// VP row with `N` splitting steps: a first click at step `p` leaves the
/// energy `ℰ(N-p)/N` for the PSK stage.
pub fn vp_row_finite(
    inner: &dyn PskDetector,
    sent: usize,
    energy: f64,
    steps: usize,
    weights: ClickWeights,
    out: &mut [f64],
) -> Result<()> {
    let phases = inner.phases();
    check_row_args(phases, sent, energy, out, phases + 1)?;
    if steps == 0 {
        return Err(Error::InvalidSteps);
    }
    let row = click_sum(energy, steps, weights, phases, |s, buf| inner.fill_row(sent, s, buf))?;
    out[..phases].copy_from_slice(&row);
    out[phases] = (-energy).exp();
    Ok(())
}

fn vp_entry(guess: usize, row: &[f64]) -> Result<f64> {
    check_index("outcome", guess, row.len())?;
    Ok(row[guess])
}

/// `𝔓_vp(ℓ|m; ℰ)` in the limit; `guess == M` selects the vacuum outcome.
pub fn vp_conditional_limit(guess: usize, sent: usize, energy: f64, inner: &dyn PskDetector, quad: &QuadratureConfig) -> Result<f64> {
    let mut row = vec![0.0; inner.phases() + 1];
    vp_row_limit(inner, sent, energy, quad, &mut row)?;
    vp_entry(guess, &row)
}

/// `P_vp(ℓ|m; ℰ, N)`; `guess == M` selects the vacuum outcome.
pub fn vp_conditional_finite(
    guess: usize,
    sent: usize,
    energy: f64,
    steps: usize,
    weights: ClickWeights,
    inner: &dyn PskDetector,
) -> Result<f64> {
    let mut row = vec![0.0; inner.phases() + 1];
    vp_row_finite(inner, sent, energy, steps, weights, &mut row)?;
    vp_entry(guess, &row)
}

/// Probability that the three-phase hierarchy identifies phase 1 when it was
/// sent: after nulling phase 0 (squared distance `3ℰ`), the binary stage
/// separates phases 1 and 2 at the residual squared distance.
fn m3_binary_success(energy: f64, splitting: Splitting, quad: &QuadratureConfig) -> Result<f64> {
    let v = click_stage(3.0 * energy, splitting, quad, 1, |s, out| {
        out[0] = binary_success(s);
        Ok(())
    })?;
    Ok(v[0])
}

/// Four-phase hierarchy with phase 1 sent: `(P(1|1), P(2|1))`. Stage one
/// nulls phase 0 (squared distance `2ℰ`), stage two nulls phase 2 at the
/// same residual distance, the binary stage separates phases 1 and 3 at
/// twice the remaining one.
fn m4_stages(energy: f64, splitting: Splitting, quad: &QuadratureConfig) -> Result<(f64, f64)> {
    let inner_quad = quad.inner();
    let v = click_stage(2.0 * energy, splitting, quad, 2, |s1, out| {
        let binary = click_stage(s1, splitting, &inner_quad, 1, |s2, o| {
            o[0] = binary_success(2.0 * s2);
            Ok(())
        })?;
        out[0] = binary[0];
        out[1] = (-s1).exp();
        Ok(())
    })?;
    let guess_two = match splitting {
        Splitting::Limit => 2.0 * energy * (-2.0 * energy).exp(),
        Splitting::Finite { .. } => v[1],
    };
    Ok((v[0], guess_two))
}

/// Row of the nulling hierarchy (`M ∈ {2,3,4}`) at pulse energy `ℰ`.
pub fn realistic_row(
    phases: usize,
    sent: usize,
    energy: f64,
    splitting: Splitting,
    quad: &QuadratureConfig,
    out: &mut [f64],
) -> Result<()> {
    check_row_args(phases, sent, energy, out, phases)?;
    splitting.validate()?;
    let row = &mut out[..phases];
    row.iter_mut().for_each(|v| *v = 0.0);
    match (phases, sent) {
        (2, _) => {
            let p = binary_success(4.0 * energy);
            row[sent] = p;
            row[1 - sent] = 1.0 - p;
        }
        (3, 0) | (4, 0) => row[0] = 1.0,
        (3, _) => {
            let a = m3_binary_success(energy, splitting, quad)?;
            row[0] = (-3.0 * energy).exp();
            row[sent] = a;
            row[3 - sent] = (-(-3.0 * energy).exp_m1() - a).max(0.0);
        }
        (4, 2) => {
            row[0] = (-4.0 * energy).exp();
            row[2] = -(-4.0 * energy).exp_m1();
        }
        (4, _) => {
            let (a, b) = m4_stages(energy, splitting, quad)?;
            row[0] = (-2.0 * energy).exp();
            row[sent] = a;
            row[2] = b;
            row[4 - sent] = (-(-2.0 * energy).exp_m1() - a - b).max(0.0);
        }
        _ => {
            return Err(Error::Unsupported {
                kind: "realistic detection",
                phases,
            })
        }
    }
    Ok(())
}

pub fn realistic_psk_prob_m3(guess: usize, sent: usize, energy: f64, quad: &QuadratureConfig) -> Result<f64> {
    check_index("guess", guess, 3)?;
    let mut row = [0.0; 3];
    realistic_row(3, sent, energy, Splitting::Limit, quad, &mut row)?;
    Ok(row[guess])
}

pub fn realistic_psk_prob_m4(guess: usize, sent: usize, energy: f64, quad: &QuadratureConfig) -> Result<f64> {
    check_index("guess", guess, 4)?;
    let mut row = [0.0; 4];
    realistic_row(4, sent, energy, Splitting::Limit, quad, &mut row)?;
    Ok(row[guess])
}

/// Assembles the `M × (M+1)` table of the given kind at pulse energy `ℰ`.
/// `splitting` applies to the VP stage and to every nulling stage.
pub fn build_confusion(
    kind: ConfusionKind,
    phases: usize,
    energy: f64,
    splitting: Splitting,
    quad: &QuadratureConfig,
) -> Result<ConfusionMatrix> {
    check_phases(phases)?;
    check_energy(energy)?;
    splitting.validate()?;
    quad.validate()?;
    let cols = phases + 1;
    let mut probs = vec![0.0; phases * cols];
    let helstrom = Helstrom { phases };
    for (sent, row) in probs.chunks_mut(cols).enumerate() {
        match kind {
            ConfusionKind::Helstrom | ConfusionKind::Separable => helstrom_row(phases, sent, energy, row)?,
            ConfusionKind::RealisticPsk => realistic_row(phases, sent, energy, splitting, quad, row)?,
            ConfusionKind::VpHelstrom => vp_row(&helstrom, sent, energy, splitting, quad, row)?,
            ConfusionKind::VpRealistic => {
                let inner = Realistic::new(phases, splitting, quad.inner())?;
                vp_row(&inner, sent, energy, splitting, quad, row)?
            }
            ConfusionKind::MonteCarlo => {
                return Err(Error::Unsupported {
                    kind: "analytic monte-carlo table",
                    phases,
                })
            }
        }
    }
    ConfusionMatrix::from_rows(kind, phases, energy, probs)
}

fn vp_row(inner: &dyn PskDetector, sent: usize, energy: f64, splitting: Splitting, quad: &QuadratureConfig, row: &mut [f64]) -> Result<()> {
    match splitting {
        Splitting::Limit => vp_row_limit(inner, sent, energy, quad, row),
        Splitting::Finite { steps, weights } => vp_row_finite(inner, sent, energy, steps, weights, row),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn quad() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    fn binary_closed(e: f64) -> f64 {
        0.5 * (1.0 + (1.0 - (-4.0 * e).exp()).sqrt())
    }

    /// Composite Simpson on [a, b] with `n` (even) panels.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let inner: f64 = (1..n)
            .map(|i| f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 })
            .sum();
        (f(a) + f(b) + inner) * h / 3.0
    }

    #[test]
    fn helstrom_zero_energy_is_uniform() {
        for m in 1..=6 {
            for l in 0..m {
                let p = helstrom_prob(m, l, 0, 0.0).unwrap();
                assert!((p - 1.0 / m as f64).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn helstrom_binary_closed_form() {
        for e in [0.0, 1e-6, 0.01, 0.3, 1.0, 5.0] {
            let p = helstrom_prob(2, 1, 1, e).unwrap();
            assert!((p - binary_closed(e)).abs() < 1e-12);
            let q = helstrom_prob(2, 0, 1, e).unwrap();
            assert!((q - (1.0 - binary_closed(e))).abs() < 1e-12);
            assert!((binary_success(4.0 * e) - binary_closed(e)).abs() < 1e-12);
        }
    }

    #[test]
    fn helstrom_row_sums_to_one() {
        let mut row = [0.0; 5];
        helstrom_row(5, 2, 0.7, &mut row).unwrap();
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn helstrom_index_errors() {
        assert!(helstrom_prob(3, 3, 0, 1.0).is_err());
        assert!(helstrom_prob(3, 0, 5, 1.0).is_err());
        assert!(helstrom_prob(0, 0, 0, 1.0).is_err());
    }

    #[test]
    fn vp_zero_energy_never_clicks() {
        let h = Helstrom { phases: 3 };
        for l in 0..3 {
            assert_eq!(vp_conditional_limit(l, 1, 0.0, &h, &quad()).unwrap(), 0.0);
            assert_eq!(vp_conditional_finite(l, 1, 0.0, 10, ClickWeights::FirstClick, &h).unwrap(), 0.0);
        }
        assert_eq!(vp_conditional_limit(3, 1, 0.0, &h, &quad()).unwrap(), 1.0);
    }

    #[test]
    fn vp_single_step_discounted() {
        let h = Helstrom { phases: 2 };
        let e: f64 = 0.8;
        for l in 0..2 {
            let p = vp_conditional_finite(l, 0, e, 1, ClickWeights::Discounted, &h).unwrap();
            let expected = (-e).exp() * (1.0 - (-e).exp()) * helstrom_prob(2, l, 0, 0.0).unwrap();
            assert!((p - expected).abs() < 1e-15);
        }
        let p = vp_conditional_finite(0, 0, e, 1, ClickWeights::FirstClick, &h).unwrap();
        assert!((p - 0.5 * (1.0 - (-e).exp())).abs() < 1e-15);
    }

    #[test]
    fn vp_perfect_inner_detection() {
        let perfect = FnDetector::new(3, |sent, _e, row: &mut [f64]| {
            row.iter_mut().for_each(|v| *v = 0.0);
            row[sent] = 1.0;
            Ok(())
        });
        for e in [0.1, 1.0, 7.0] {
            let p = vp_conditional_limit(2, 2, e, &perfect, &quad()).unwrap();
            assert!((p - (1.0 - (-e).exp())).abs() < 1e-12);
        }
    }

    #[test]
    fn vp_finite_converges_to_limit() {
        let h = Helstrom { phases: 2 };
        let limit = vp_conditional_limit(0, 0, 2.0, &h, &quad()).unwrap();
        let finite = vp_conditional_finite(0, 0, 2.0, 10_000, ClickWeights::FirstClick, &h).unwrap();
        assert!((finite - limit).abs() < 1e-4, "{finite} vs {limit}");
    }

    #[test]
    fn vp_finite_error_shrinks_with_steps() {
        for m in [3, 4] {
            let h = Helstrom { phases: m };
            for e in [0.5, 2.0, 5.0] {
                let limit = vp_conditional_limit(1, 1, e, &h, &quad()).unwrap();
                let errs: Vec<f64> = [10, 30, 100]
                    .iter()
                    .map(|&n| (vp_conditional_finite(1, 1, e, n, ClickWeights::FirstClick, &h).unwrap() - limit).abs())
                    .collect();
                assert!(errs[2] < errs[1] && errs[1] < errs[0], "M={m} ℰ={e}: {errs:?}");
            }
        }
    }

    #[test]
    fn vp_limit_matches_simpson_in_t() {
        // Independent rule in the original variable t on [e^{-ℰ}, 1].
        let e: f64 = 1.0;
        let h = Helstrom { phases: 2 };
        let a = vp_conditional_limit(1, 1, e, &h, &quad()).unwrap();
        let b = simpson(|t| binary_closed((e + t.ln()).max(0.0)), (-e).exp(), 1.0, 1_000_000);
        assert!((a - b).abs() < 1e-8, "{a} vs {b}");
    }

    #[test]
    fn realistic_m3_cases() {
        let q = quad();
        for e in [0.0, 0.2, 1.5] {
            assert_eq!(realistic_psk_prob_m3(0, 0, e, &q).unwrap(), 1.0);
            assert_eq!(realistic_psk_prob_m3(1, 0, e, &q).unwrap(), 0.0);
            assert_eq!(realistic_psk_prob_m3(2, 0, e, &q).unwrap(), 0.0);
            assert!((realistic_psk_prob_m3(0, 1, e, &q).unwrap() - (-3.0 * e).exp()).abs() < 1e-15);
            assert!((realistic_psk_prob_m3(0, 2, e, &q).unwrap() - (-3.0 * e).exp()).abs() < 1e-15);
            let a = realistic_psk_prob_m3(1, 1, e, &q).unwrap();
            assert!((realistic_psk_prob_m3(2, 2, e, &q).unwrap() - a).abs() < 1e-15);
            let b = realistic_psk_prob_m3(2, 1, e, &q).unwrap();
            assert!((realistic_psk_prob_m3(1, 2, e, &q).unwrap() - b).abs() < 1e-15);
        }
        let mut row = [0.0; 3];
        realistic_row(3, 1, 0.0, Splitting::Limit, &q, &mut row).unwrap();
        assert_eq!(row, [1.0, 0.0, 0.0]);
    }

    #[test]
    fn realistic_m3_matches_s_form() {
        // P(1|1) = ∫_0^D e^{s-D} binary(s) ds with D = 3ℰ.
        for e in [0.05, 0.5, 2.0] {
            let d = 3.0 * e;
            let oracle = simpson(|s| (s - d).exp() * binary_success(s), 0.0, d, 2_000_000);
            let a = realistic_psk_prob_m3(1, 1, e, &quad()).unwrap();
            assert!((a - oracle).abs() < 1e-8, "ℰ={e}: {a} vs {oracle}");
        }
    }

    #[test]
    fn realistic_m4_cases() {
        let q = quad();
        let p = realistic_psk_prob_m4(2, 1, 1.0, &q).unwrap();
        assert!((p - 2.0 * (-2.0f64).exp()).abs() < 1e-15);
        assert!((p - 0.270_670_566_473_225_4).abs() < 1e-12);
        for e in [0.0, 0.4, 3.0] {
            assert_eq!(realistic_psk_prob_m4(1, 2, e, &q).unwrap(), 0.0);
            assert_eq!(realistic_psk_prob_m4(3, 2, e, &q).unwrap(), 0.0);
            assert!((realistic_psk_prob_m4(0, 2, e, &q).unwrap() - (-4.0 * e).exp()).abs() < 1e-15);
            assert_eq!(realistic_psk_prob_m4(0, 0, e, &q).unwrap(), 1.0);
            let a = realistic_psk_prob_m4(1, 1, e, &q).unwrap();
            assert!((realistic_psk_prob_m4(3, 3, e, &q).unwrap() - a).abs() < 1e-15);
        }
    }

    #[test]
    fn realistic_m4_nested_matches_single_integral() {
        // Collapsing the two stages: P(1|1) = ∫_0^{2ℰ} s e^{-s} binary(2(2ℰ - s)) ds.
        for e in [0.05, 0.5, 2.0] {
            let d = 2.0 * e;
            let oracle = simpson(|s| s * (-s).exp() * binary_success(2.0 * (d - s)), 0.0, d, 2_000_000);
            let a = realistic_psk_prob_m4(1, 1, e, &quad()).unwrap();
            assert!((a - oracle).abs() < 1e-8, "ℰ={e}: {a} vs {oracle}");
        }
    }

    #[test]
    fn realistic_rows_stochastic() {
        for m in 2..=4 {
            for sent in 0..m {
                let mut row = vec![0.0; m];
                realistic_row(m, sent, 0.5, Splitting::Limit, &quad(), &mut row).unwrap();
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                realistic_row(m, sent, 0.5, Splitting::finite(20).unwrap(), &quad(), &mut row).unwrap();
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
        assert!(Realistic::new(5, Splitting::Limit, quad()).is_err());
    }

    #[test]
    fn realistic_finite_approaches_limit() {
        let q = quad();
        for m in [3, 4] {
            let mut limit = vec![0.0; m];
            realistic_row(m, 1, 0.7, Splitting::Limit, &q, &mut limit).unwrap();
            let mut prev = f64::INFINITY;
            for n in [10, 100, 1000] {
                let mut row = vec![0.0; m];
                realistic_row(m, 1, 0.7, Splitting::finite(n).unwrap(), &q, &mut row).unwrap();
                let err = row.iter().zip(&limit).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                assert!(err < prev);
                prev = err;
            }
            assert!(prev < 2e-3);
        }
    }

    #[test]
    fn confusion_examples() {
        let q = quad();
        let c = build_confusion(ConfusionKind::Helstrom, 3, 0.0, Splitting::Limit, &q).unwrap();
        for m in 0..3 {
            assert_eq!(c.vacuum(m), 0.0);
            for l in 0..3 {
                assert!((c.get(m, l) - 1.0 / 3.0).abs() < 1e-15);
            }
        }
        let c = build_confusion(ConfusionKind::VpHelstrom, 2, 5.0, Splitting::Limit, &q).unwrap();
        assert!((c.vacuum(0) - 6.737_946_999_085_467e-3).abs() < 1e-15);
        let c = build_confusion(ConfusionKind::VpRealistic, 4, 1.0, Splitting::Limit, &q).unwrap();
        assert!(c.max_row_deviation() < 1e-8);
        assert!(build_confusion(ConfusionKind::VpRealistic, 5, 1.0, Splitting::Limit, &q).is_err());
        assert!(build_confusion(ConfusionKind::MonteCarlo, 2, 1.0, Splitting::Limit, &q).is_err());
        assert!(build_confusion(ConfusionKind::VpHelstrom, 2, 1.0, Splitting::Finite { steps: 0, weights: ClickWeights::FirstClick }, &q).is_err());
    }

    #[test]
    fn vp_realistic_m2_equals_vp_helstrom() {
        let q = quad();
        let a = build_confusion(ConfusionKind::VpRealistic, 2, 0.9, Splitting::Limit, &q).unwrap();
        let b = build_confusion(ConfusionKind::VpHelstrom, 2, 0.9, Splitting::Limit, &q).unwrap();
        for (x, y) in a.probs().iter().zip(b.probs()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn average_success_ordering() {
        let q = quad();
        for m in [3, 4] {
            for e in [0.01, 0.3, 1.0, 4.0] {
                let hel = build_confusion(ConfusionKind::VpHelstrom, m, e, Splitting::Limit, &q).unwrap();
                let real = build_confusion(ConfusionKind::VpRealistic, m, e, Splitting::Limit, &q).unwrap();
                assert!(hel.average_success() >= real.average_success() - 1e-12);
            }
        }
    }

    #[test]
    fn from_rows_validation() {
        let k = ConfusionKind::Helstrom;
        assert!(ConfusionMatrix::from_rows(k, 1, 0.0, vec![1.0, 0.0]).is_ok());
        assert!(matches!(
            ConfusionMatrix::from_rows(k, 1, 0.0, vec![0.5, 0.0]),
            Err(Error::NotRowStochastic { .. })
        ));
        assert!(matches!(
            ConfusionMatrix::from_rows(k, 1, 0.0, vec![1.5, -0.5]),
            Err(Error::InvalidProbability { .. })
        ));
        assert!(ConfusionMatrix::from_rows(k, 2, 0.0, vec![1.0, 0.0]).is_err());
        assert!(ConfusionMatrix::from_rows(ConfusionKind::MonteCarlo, 1, 0.0, vec![0.995, 0.0]).is_ok());
    }

    #[test]
    fn kind_round_trip() {
        for k in ConfusionKind::ALL {
            assert_eq!(k.as_str().parse::<ConfusionKind>().unwrap(), k);
        }
        assert!("dolinar".parse::<ConfusionKind>().is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn helstrom_is_circulant(m in 1usize..=7, e in 0.0f64..10.0, s in 0usize..7) {
            for sent in 0..m {
                for guess in 0..m {
                    let a = helstrom_prob(m, guess, sent, e).unwrap();
                    let b = helstrom_prob(m, (guess + s) % m, (sent + s) % m, e).unwrap();
                    prop_assert_eq!(a, b);
                }
            }
        }

        #[test]
        fn analytic_tables_are_stochastic(m in 2usize..=4, e in 0.0f64..30.0, finite in proptest::bool::ANY) {
            let splitting = if finite { Splitting::finite(25).unwrap() } else { Splitting::Limit };
            for kind in [ConfusionKind::Helstrom, ConfusionKind::VpHelstrom, ConfusionKind::VpRealistic, ConfusionKind::RealisticPsk] {
                let c = build_confusion(kind, m, e, splitting, &quad()).unwrap();
                prop_assert!(c.max_row_deviation() < 1e-9);
                for sent in 0..m {
                    if kind.is_vp() {
                        prop_assert!((c.vacuum(sent) - (-e).exp()).abs() < 1e-12);
                    } else {
                        prop_assert_eq!(c.vacuum(sent), 0.0);
                    }
                }
            }
        }
    }
}
