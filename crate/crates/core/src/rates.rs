//! Information rates of the VP receiver, the separable receiver and their
//! envelopes over code lengths.
//!
//! A Hadamard codeword `(k, m)` reaches the receiver as a pulse on mode `k`
//! with phase `m`. A click always identifies `k`, so a `(k, m)` input can only
//! be confused with `(k, ℓ)` or with the vacuum outcome. The full `Mn`-input
//! channel therefore reduces to the `M × (M+1)` table of one mode, with the
//! vacuum outcome shared by all `n` modes.

use std::fmt;

use rayon::prelude::*;

use crate::detection::{build_confusion, helstrom_row, ConfusionKind, ConfusionMatrix, Splitting, ROW_TOLERANCE};
use crate::error::{check_energy, Error, Result};
use crate::hadamard::CodeParams;
use crate::quadrature::QuadratureConfig;
use crate::spectra::{classical_capacity, entropy_term, optimal_rate};

/// Code lengths `2^1 ..= 2^10` used for envelopes unless told otherwise.
pub fn default_lengths() -> Vec<usize> {
    (1..=10).map(|i| 1usize << i).collect()
}

/// Mutual information in bits of a channel with uniform inputs, given the
/// row-major `inputs × outputs` transition table.
pub fn channel_mutual_information(table: &[f64], inputs: usize, outputs: usize) -> Result<f64> {
    if table.len() != inputs * outputs || inputs == 0 {
        return Err(Error::DimensionMismatch {
            expected: inputs * outputs,
            actual: table.len(),
        });
    }
    let mut marginal = vec![0.0; outputs];
    for row in table.chunks(outputs) {
        marginal.iter_mut().zip(row).for_each(|(q, p)| *q += p / inputs as f64);
    }
    let info: f64 = table
        .chunks(outputs)
        .flat_map(|row| row.iter().zip(&marginal))
        .filter(|(p, _)| **p > 0.0)
        .map(|(p, q)| p * (p / q).log2())
        .sum();
    Ok(info / inputs as f64)
}

/// Rate in bits per mode of a length-`n` code read out through `confusion`.
pub fn mutual_info_rate(confusion: &ConfusionMatrix, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidOrder(n));
    }
    let tolerance = match confusion.kind() {
        ConfusionKind::MonteCarlo => crate::detection::MONTE_CARLO_ROW_TOLERANCE,
        _ => ROW_TOLERANCE,
    };
    let deviation = confusion.max_row_deviation();
    if deviation > tolerance {
        return Err(Error::NotRowStochastic {
            row: 0,
            sum: 1.0 + deviation,
            tolerance,
        });
    }
    let phases = confusion.phases();
    let (m, nf) = (phases as f64, n as f64);
    let mut info = 0.0;
    for col in 0..=phases {
        let colsum: f64 = (0..phases).map(|s| confusion.get(s, col)).sum();
        // Phase outcomes belong to one mode; the vacuum outcome to all n.
        let scale = if col < phases { m * nf } else { m };
        for sent in 0..phases {
            let p = confusion.get(sent, col);
            if p > 0.0 {
                info += p * (scale * p / colsum).log2();
            }
        }
    }
    Ok((info / (m * nf)).max(0.0))
}

/// Rate of the receiver `kind` for a length-`n`, `M`-phase code at `E`
/// photons per mode.
pub fn receiver_rate(
    kind: ConfusionKind,
    n: usize,
    phases: usize,
    energy: f64,
    splitting: Splitting,
    quad: &QuadratureConfig,
) -> Result<f64> {
    if !kind.is_vp() {
        return Err(Error::Unsupported {
            kind: "receiver rate of a non-VP table",
            phases,
        });
    }
    let params = CodeParams::new(n, phases, energy)?;
    let confusion = build_confusion(kind, phases, params.pulse_energy(), splitting, quad)?;
    mutual_info_rate(&confusion, n)
}

/// Symbol-by-symbol Helstrom detection of `M`-PSK at `E` photons per mode.
pub fn separable_rate(phases: usize, energy: f64) -> Result<f64> {
    check_energy(energy)?;
    let mut table = vec![0.0; phases * phases];
    for (sent, row) in table.chunks_mut(phases).enumerate() {
        helstrom_row(phases, sent, energy, row)?;
    }
    Ok(channel_mutual_information(&table, phases, phases)?.max(0.0))
}

fn vp_realistic_success(phases: usize, pulse_energy: f64, quad: &QuadratureConfig) -> Result<f64> {
    let c = build_confusion(ConfusionKind::VpRealistic, phases, pulse_energy, Splitting::Limit, quad)?;
    Ok(c.get(1, 1))
}

/// Closed-form VP rate of the three-phase nulling receiver.
pub fn closed_form_real_rate_m3(n: usize, energy: f64, quad: &QuadratureConfig) -> Result<f64> {
    let params = CodeParams::new(n, 3, energy)?;
    let pulse = params.pulse_energy();
    if pulse == 0.0 {
        return Ok(0.0);
    }
    let nf = n as f64;
    let (e1, e3) = ((-pulse).exp(), (-3.0 * pulse).exp());
    let b = vp_realistic_success(3, pulse, quad)?;
    let h = entropy_term;
    let wrong = (2.0 - 3.0 * e1 + e3) / 2.0;
    Ok(h((1.0 - e3) / (3.0 * nf)) + 2.0 * h(wrong / (3.0 * nf))
        - h(-(-pulse).exp_m1()) / (3.0 * nf)
        - 2.0 / (3.0 * nf) * (h((e1 - e3) / 2.0) + h(b) + h(wrong - b)))
}

/// Closed-form VP rate of the four-phase nulling receiver.
pub fn closed_form_real_rate_m4(n: usize, energy: f64, quad: &QuadratureConfig) -> Result<f64> {
    let params = CodeParams::new(n, 4, energy)?;
    let pulse = params.pulse_energy();
    if pulse == 0.0 {
        return Ok(0.0);
    }
    let nf = n as f64;
    let (e1, e2, e4) = ((-pulse).exp(), (-2.0 * pulse).exp(), (-4.0 * pulse).exp());
    let b = vp_realistic_success(4, pulse, quad)?;
    let h = entropy_term;
    let side = 1.0 - 4.0 * e1 + (3.0 + 2.0 * pulse) * e2;
    let col0 = (3.0 + 4.0 * e1 - 6.0 * e2 - e4) / (12.0 * nf);
    let col2 = (3.0 + 8.0 * e1 - 12.0 * (1.0 + pulse) * e2 + e4) / (12.0 * nf);
    Ok(h(col0) + h(col2) + 2.0 * h(side / (4.0 * nf))
        - (h(-(-pulse).exp_m1()) + h((e1 - e4) / 3.0) + h((3.0 - 4.0 * e1 + e4) / 3.0)) / (4.0 * nf)
        - (h(e1 - e2) + h(2.0 * (e1 - (1.0 + pulse) * e2)) + h(b) + h(side - b)) / (2.0 * nf))
}

fn check_lengths(lengths: &[usize]) -> Result<()> {
    if lengths.is_empty() {
        return Err(Error::EmptyLengthSet);
    }
    match lengths.iter().find(|n| !n.is_power_of_two()) {
        Some(&n) => Err(Error::InvalidOrder(n)),
        None => Ok(()),
    }
}

/// Best rate over code lengths and the length attaining it; ties go to the
/// shorter code.
pub fn envelope_rate(
    kind: ConfusionKind,
    lengths: &[usize],
    phases: usize,
    energy: f64,
    splitting: Splitting,
    quad: &QuadratureConfig,
) -> Result<(f64, usize)> {
    check_lengths(lengths)?;
    let mut sorted = lengths.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut best = (f64::NEG_INFINITY, sorted[0]);
    for n in sorted {
        let r = receiver_rate(kind, n, phases, energy, splitting, quad)?;
        if r > best.0 {
            best = (r, n);
        }
    }
    Ok(best)
}

/// Relative gain of the `M`-phase envelope over the binary one. `None` where
/// the binary envelope vanishes (below `1e-30`).
pub fn delta_rate(
    kind: ConfusionKind,
    lengths: &[usize],
    phases: usize,
    energy: f64,
    splitting: Splitting,
    quad: &QuadratureConfig,
) -> Result<Option<f64>> {
    if !(3..=4).contains(&phases) {
        return Err(Error::Unsupported {
            kind: "relative gain",
            phases,
        });
    }
    let (base, _) = envelope_rate(kind, lengths, 2, energy, splitting, quad)?;
    if base < 1e-30 {
        return Ok(None);
    }
    let (rate, _) = envelope_rate(kind, lengths, phases, energy, splitting, quad)?;
    Ok(Some((rate - base) / base))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RateKind {
    Optimal,
    Capacity,
    VpHelstrom,
    VpRealistic,
    Separable,
    EnvelopeHel,
    EnvelopeReal,
    DeltaHel,
    DeltaReal,
    ClosedFormReal,
}

impl RateKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Optimal => "optimal",
            Self::Capacity => "capacity",
            Self::VpHelstrom => "vp-helstrom",
            Self::VpRealistic => "vp-realistic",
            Self::Separable => "separable",
            Self::EnvelopeHel => "envelope-hel",
            Self::EnvelopeReal => "envelope-real",
            Self::DeltaHel => "delta-hel",
            Self::DeltaReal => "delta-real",
            Self::ClosedFormReal => "closed-form-real",
        }
    }

    pub fn is_delta(self) -> bool {
        matches!(self, Self::DeltaHel | Self::DeltaReal)
    }
}

impl fmt::Display for RateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Sampled `(E, value)` curve with its metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct RateCurve {
    pub kind: RateKind,
    pub n: Option<usize>,
    pub phases: Option<usize>,
    samples: Vec<(f64, f64)>,
}

impl RateCurve {
    /// Checks that energies increase strictly and, except for relative
    /// gains, that values are non-negative.
    pub fn new(kind: RateKind, n: Option<usize>, phases: Option<usize>, samples: Vec<(f64, f64)>) -> Result<Self> {
        if samples.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidGrid("energies must increase strictly"));
        }
        if !kind.is_delta() && samples.iter().any(|s| s.1 < 0.0 || s.1.is_nan()) {
            return Err(Error::InvalidGrid("rates must be non-negative"));
        }
        Ok(Self {
            kind,
            n,
            phases,
            samples,
        })
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    pub fn energies(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.0)
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.1)
    }
}

/// Evaluates `f` on every grid point in parallel; output order follows the
/// grid.
pub fn sweep<T, F>(grid: &[f64], f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(f64) -> Result<T> + Sync + Send,
{
    grid.par_iter().map(|&e| f(e)).collect()
}

fn zip_curve(kind: RateKind, n: Option<usize>, phases: Option<usize>, grid: &[f64], values: Vec<f64>) -> Result<RateCurve> {
    RateCurve::new(kind, n, phases, grid.iter().copied().zip(values).collect())
}

pub fn optimal_curve(n: usize, phases: usize, grid: &[f64]) -> Result<RateCurve> {
    let values = sweep(grid, |e| optimal_rate(&CodeParams::new(n, phases, e)?))?;
    zip_curve(RateKind::Optimal, Some(n), Some(phases), grid, values)
}

pub fn capacity_curve(grid: &[f64]) -> Result<RateCurve> {
    let values = sweep(grid, |e| Ok(classical_capacity(check_energy(e)?)))?;
    zip_curve(RateKind::Capacity, None, None, grid, values)
}

pub fn separable_curve(phases: usize, grid: &[f64]) -> Result<RateCurve> {
    let values = sweep(grid, |e| separable_rate(phases, e))?;
    zip_curve(RateKind::Separable, None, Some(phases), grid, values)
}

fn receiver_rate_kind(kind: ConfusionKind) -> Result<RateKind> {
    match kind {
        ConfusionKind::VpHelstrom => Ok(RateKind::VpHelstrom),
        ConfusionKind::VpRealistic => Ok(RateKind::VpRealistic),
        _ => Err(Error::Unsupported {
            kind: "receiver curve of a non-VP table",
            phases: 0,
        }),
    }
}

pub fn receiver_curve(
    kind: ConfusionKind,
    n: usize,
    phases: usize,
    splitting: Splitting,
    grid: &[f64],
    quad: &QuadratureConfig,
) -> Result<RateCurve> {
    let rate_kind = receiver_rate_kind(kind)?;
    let values = sweep(grid, |e| receiver_rate(kind, n, phases, e, splitting, quad))?;
    zip_curve(rate_kind, Some(n), Some(phases), grid, values)
}

/// Receiver curve with `N` splitting steps per stage.
pub fn finite_n_rate_curve(
    kind: ConfusionKind,
    phases: usize,
    n: usize,
    steps: usize,
    grid: &[f64],
    quad: &QuadratureConfig,
) -> Result<RateCurve> {
    receiver_curve(kind, n, phases, Splitting::finite(steps)?, grid, quad)
}

pub fn envelope_curve(
    kind: ConfusionKind,
    lengths: &[usize],
    phases: usize,
    splitting: Splitting,
    grid: &[f64],
    quad: &QuadratureConfig,
) -> Result<(RateCurve, Vec<usize>)> {
    let rate_kind = match receiver_rate_kind(kind)? {
        RateKind::VpHelstrom => RateKind::EnvelopeHel,
        _ => RateKind::EnvelopeReal,
    };
    let points = sweep(grid, |e| envelope_rate(kind, lengths, phases, e, splitting, quad))?;
    let (values, argmax): (Vec<f64>, Vec<usize>) = points.into_iter().unzip();
    Ok((zip_curve(rate_kind, None, Some(phases), grid, values)?, argmax))
}

/// Relative gains on the grid; points where the gain is undefined are left
/// out.
pub fn delta_curve(
    kind: ConfusionKind,
    lengths: &[usize],
    phases: usize,
    splitting: Splitting,
    grid: &[f64],
    quad: &QuadratureConfig,
) -> Result<RateCurve> {
    let rate_kind = match receiver_rate_kind(kind)? {
        RateKind::VpHelstrom => RateKind::DeltaHel,
        _ => RateKind::DeltaReal,
    };
    let values = sweep(grid, |e| delta_rate(kind, lengths, phases, e, splitting, quad))?;
    let samples = grid
        .iter()
        .zip(values)
        .filter_map(|(&e, d)| d.map(|d| (e, d)))
        .collect();
    RateCurve::new(rate_kind, None, Some(phases), samples)
}

pub fn closed_form_curve(phases: usize, n: usize, grid: &[f64], quad: &QuadratureConfig) -> Result<RateCurve> {
    let values = sweep(grid, |e| match phases {
        3 => closed_form_real_rate_m3(n, e, quad),
        4 => closed_form_real_rate_m4(n, e, quad),
        _ => Err(Error::Unsupported {
            kind: "closed-form rate",
            phases,
        }),
    })?;
    zip_curve(RateKind::ClosedFormReal, Some(n), Some(phases), grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::log_grid_points;

    fn quad() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    fn h2(p: f64) -> f64 {
        entropy_term(p) + entropy_term(1.0 - p)
    }

    #[test]
    fn perfect_detection_rate() {
        for (m, n) in [(2, 4), (3, 8), (1, 2)] {
            let mut probs = vec![0.0; m * (m + 1)];
            for s in 0..m {
                probs[s * (m + 1) + s] = 1.0;
            }
            let c = ConfusionMatrix::from_rows(ConfusionKind::VpHelstrom, m, 50.0, probs).unwrap();
            let r = mutual_info_rate(&c, n).unwrap();
            assert!((r - ((m * n) as f64).log2() / n as f64).abs() < 1e-14);
        }
    }

    #[test]
    fn all_vacuum_rate_is_zero() {
        let c = build_confusion(ConfusionKind::VpHelstrom, 3, 0.0, Splitting::Limit, &quad()).unwrap();
        assert_eq!(mutual_info_rate(&c, 16).unwrap(), 0.0);
    }

    #[test]
    fn separable_examples() {
        assert!(separable_rate(3, 0.0).unwrap().abs() < 1e-15);
        assert!((separable_rate(4, 60.0).unwrap() - 2.0).abs() < 1e-9);
        let p = 0.5 * (1.0 - (1.0 - (-0.4f64).exp()).sqrt());
        assert!((separable_rate(2, 0.1).unwrap() - (1.0 - h2(p))).abs() < 1e-13);
    }

    #[test]
    fn closed_forms_at_zero_and_large_energy() {
        assert_eq!(closed_form_real_rate_m3(4, 0.0, &quad()).unwrap(), 0.0);
        assert_eq!(closed_form_real_rate_m4(4, 0.0, &quad()).unwrap(), 0.0);
        let r3 = closed_form_real_rate_m3(2, 40.0, &quad()).unwrap();
        assert!((r3 - 6f64.log2() / 2.0).abs() < 1e-6);
        let r4 = closed_form_real_rate_m4(2, 40.0, &quad()).unwrap();
        assert!((r4 - 3.0 / 2.0).abs() < 1e-6);
    }

    #[test]
    fn closed_forms_match_pipeline() {
        let q = quad();
        for e in log_grid_points(1e-3, 1.0, 20).unwrap() {
            for n in [2, 8] {
                let a = closed_form_real_rate_m3(n, e, &q).unwrap();
                let b = receiver_rate(ConfusionKind::VpRealistic, n, 3, e, Splitting::Limit, &q).unwrap();
                assert!((a - b).abs() < 1e-8, "M=3 n={n} E={e}: {a} vs {b}");
                let a = closed_form_real_rate_m4(n, e, &q).unwrap();
                let b = receiver_rate(ConfusionKind::VpRealistic, n, 4, e, Splitting::Limit, &q).unwrap();
                assert!((a - b).abs() < 1e-8, "M=4 n={n} E={e}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn envelope_singleton_and_ties() {
        let q = quad();
        let (r, n) = envelope_rate(ConfusionKind::VpHelstrom, &[2], 3, 0.05, Splitting::Limit, &q).unwrap();
        assert_eq!(n, 2);
        assert_eq!(r, receiver_rate(ConfusionKind::VpHelstrom, 2, 3, 0.05, Splitting::Limit, &q).unwrap());
        let (_, n) = envelope_rate(ConfusionKind::VpHelstrom, &[8, 4, 4], 3, 0.0, Splitting::Limit, &q).unwrap();
        assert_eq!(n, 4);
        assert_eq!(
            envelope_rate(ConfusionKind::VpHelstrom, &[], 3, 0.1, Splitting::Limit, &q),
            Err(Error::EmptyLengthSet)
        );
        assert!(envelope_rate(ConfusionKind::VpHelstrom, &[3], 3, 0.1, Splitting::Limit, &q).is_err());
    }

    #[test]
    fn envelope_prefers_short_codes_at_high_energy() {
        let (_, n) = envelope_rate(ConfusionKind::VpHelstrom, &default_lengths(), 2, 5.0, Splitting::Limit, &quad()).unwrap();
        assert_eq!(n, 2);
    }

    #[test]
    fn delta_guards() {
        let q = quad();
        assert_eq!(delta_rate(ConfusionKind::VpHelstrom, &[2], 3, 0.0, Splitting::Limit, &q).unwrap(), None);
        assert!(delta_rate(ConfusionKind::VpHelstrom, &[2], 2, 0.1, Splitting::Limit, &q).is_err());
    }

    #[test]
    fn finite_steps_approach_limit() {
        let q = quad();
        let limit = receiver_rate(ConfusionKind::VpHelstrom, 8, 3, 0.02, Splitting::Limit, &q).unwrap();
        let devs: Vec<f64> = [10, 30, 100]
            .iter()
            .map(|&s| {
                let r = receiver_rate(ConfusionKind::VpHelstrom, 8, 3, 0.02, Splitting::finite(s).unwrap(), &q).unwrap();
                (r - limit).abs()
            })
            .collect();
        assert!(devs[2] < devs[1] && devs[1] < devs[0], "{devs:?}");
    }

    #[test]
    fn curve_validation() {
        assert!(RateCurve::new(RateKind::Optimal, None, None, vec![(1.0, 0.1), (1.0, 0.2)]).is_err());
        assert!(RateCurve::new(RateKind::Optimal, None, None, vec![(1.0, -0.1)]).is_err());
        assert!(RateCurve::new(RateKind::DeltaHel, None, None, vec![(1.0, -0.1)]).is_ok());
    }

    #[test]
    fn sweep_keeps_grid_order() {
        let grid: Vec<f64> = (1..200).map(|i| i as f64).collect();
        let out = sweep(&grid, |e| Ok(e * 2.0)).unwrap();
        assert!(out.iter().zip(&grid).all(|(a, b)| *a == 2.0 * b));
    }
}
