//! Fast invariant suite run by `pskhad selftest`.

use pskhad::detection::{build_confusion, helstrom_prob, ConfusionKind, Splitting};
use pskhad::hadamard::{fwht_in_place, hadamard_matrix};
use pskhad::rates::{closed_form_real_rate_m3, closed_form_real_rate_m4, receiver_rate};
use pskhad::simulator::{simulate, Scenario, SimConfig};
use pskhad::spectra::{classical_capacity, holevo_rate_oracle, optimal_rate, ppm_spectrum};
use pskhad::{CodeParams, Complex64, QuadratureConfig, Result};

pub struct Property {
    pub name: &'static str,
    /// Worst observed violation; zero means exact.
    pub measured: f64,
    pub tolerance: f64,
}

impl Property {
    pub fn passes(&self, scale: f64) -> bool {
        self.measured.is_finite() && self.measured <= self.tolerance * scale
    }
}

const ENERGIES: [f64; 6] = [0.0, 1e-4, 0.01, 0.3, 2.0, 12.0];

fn params() -> impl Iterator<Item = CodeParams> {
    [(1, 1), (2, 3), (4, 4), (8, 2), (16, 1), (64, 5)]
        .into_iter()
        .flat_map(|(n, m)| ENERGIES.into_iter().map(move |e| CodeParams::new(n, m, e).expect("valid parameters")))
}

fn hadamard_orthogonality() -> Result<f64> {
    let mut worst = 0.0f64;
    for n in [1, 2, 8, 64] {
        let h = hadamard_matrix(n)?;
        for j in 0..n {
            for k in 0..n {
                let dot: i64 = (0..n).map(|i| i64::from(h.entry(j, i)) * i64::from(h.entry(k, i))).sum();
                let expected = if j == k { n as i64 } else { 0 };
                worst = worst.max((dot - expected).abs() as f64);
            }
        }
        let mut x: Vec<_> = (0..n).map(|i| Complex64::new(i as f64, -0.5 * i as f64)).collect();
        let original = x.clone();
        fwht_in_place(&mut x);
        fwht_in_place(&mut x);
        for (a, b) in x.iter().zip(&original) {
            worst = worst.max((a / n as f64 - b).norm());
        }
    }
    Ok(worst)
}

fn trace_normalization() -> Result<f64> {
    let mut worst = 0.0f64;
    for p in params() {
        worst = worst.max((ppm_spectrum(&p)?.trace() - 1.0).abs());
    }
    Ok(worst)
}

fn spectrum_nonnegative() -> Result<f64> {
    let mut worst = 0.0f64;
    for p in params() {
        for (nu, _) in ppm_spectrum(&p)?.eigenvalues() {
            if nu < 0.0 {
                worst = worst.max(-nu);
            }
        }
    }
    Ok(worst)
}

fn holevo_oracle() -> Result<f64> {
    let mut worst = 0.0f64;
    for (n, m) in [(1, 3), (2, 4), (4, 2), (8, 1), (16, 1)] {
        for e in [0.01, 0.5] {
            let p = CodeParams::new(n, m, e)?;
            worst = worst.max((optimal_rate(&p)? - holevo_rate_oracle(&p)?).abs());
        }
    }
    Ok(worst)
}

fn tables(quad: &QuadratureConfig) -> Result<Vec<pskhad::detection::ConfusionMatrix>> {
    let mut out = Vec::new();
    for m in 2..=4 {
        for e in ENERGIES {
            for kind in [
                ConfusionKind::Helstrom,
                ConfusionKind::Separable,
                ConfusionKind::RealisticPsk,
                ConfusionKind::VpHelstrom,
                ConfusionKind::VpRealistic,
            ] {
                for splitting in [Splitting::Limit, Splitting::finite(7)?] {
                    out.push(build_confusion(kind, m, e, splitting, quad)?);
                }
            }
        }
    }
    Ok(out)
}

fn row_stochasticity(quad: &QuadratureConfig) -> Result<f64> {
    Ok(tables(quad)?.iter().map(|c| c.max_row_deviation()).fold(0.0, f64::max))
}

fn vacuum_column(quad: &QuadratureConfig) -> Result<f64> {
    let mut worst = 0.0f64;
    for c in tables(quad)?.iter().filter(|c| c.kind().is_vp()) {
        for sent in 0..c.phases() {
            worst = worst.max((c.vacuum(sent) - (-c.pulse_energy()).exp()).abs());
        }
    }
    Ok(worst)
}

fn binary_helstrom() -> Result<f64> {
    let mut worst = 0.0f64;
    for e in ENERGIES {
        let closed = 0.5 * (1.0 + (1.0 - (-4.0 * e).exp()).sqrt());
        worst = worst.max((helstrom_prob(2, 1, 1, e)? - closed).abs());
    }
    Ok(worst)
}

fn bracketing(quad: &QuadratureConfig) -> Result<f64> {
    let mut worst = 0.0f64;
    for m in [3, 4] {
        for n in [2, 16] {
            for e in [1e-4, 1e-2, 0.5, 5.0] {
                let real = receiver_rate(ConfusionKind::VpRealistic, n, m, e, Splitting::Limit, quad)?;
                let hel = receiver_rate(ConfusionKind::VpHelstrom, n, m, e, Splitting::Limit, quad)?;
                let opt = optimal_rate(&CodeParams::new(n, m, e)?)?;
                for gap in [real - hel, hel - opt, opt - classical_capacity(e)] {
                    worst = worst.max(gap);
                }
            }
        }
    }
    Ok(worst)
}

fn closed_forms(quad: &QuadratureConfig) -> Result<f64> {
    let mut worst = 0.0f64;
    for n in [2, 8] {
        for e in [1e-3, 0.05, 1.0] {
            let a = closed_form_real_rate_m3(n, e, quad)? - receiver_rate(ConfusionKind::VpRealistic, n, 3, e, Splitting::Limit, quad)?;
            let b = closed_form_real_rate_m4(n, e, quad)? - receiver_rate(ConfusionKind::VpRealistic, n, 4, e, Splitting::Limit, quad)?;
            worst = worst.max(a.abs()).max(b.abs());
        }
    }
    Ok(worst)
}

fn monte_carlo(quad: &QuadratureConfig) -> Result<f64> {
    let config = SimConfig {
        phases: 3,
        pulse_energy: 1.0,
        steps: 20,
        trials: 20_000,
        seed: 1,
        scenario: Scenario::VpRealistic,
    };
    let analytic = build_confusion(ConfusionKind::VpRealistic, 3, 1.0, Splitting::finite(20)?, quad)?;
    Ok(simulate(&config)?.compare(&analytic)?.max_sigma)
}

/// Evaluates every property. An evaluation error is reported as an
/// infinite violation.
pub fn run(quad: &QuadratureConfig) -> Vec<Property> {
    type Check<'a> = Box<dyn Fn() -> Result<f64> + 'a>;
    let checks: Vec<(&'static str, f64, Check)> = vec![
        ("hadamard orthogonality", 1e-12, Box::new(hadamard_orthogonality)),
        ("trace normalization", 1e-12, Box::new(trace_normalization)),
        ("spectrum non-negative", 0.0, Box::new(spectrum_nonnegative)),
        ("holevo rate vs dense oracle", 1e-9, Box::new(holevo_oracle)),
        ("row stochasticity", 1e-9, Box::new(|| row_stochasticity(quad))),
        ("vacuum column e^-E", 1e-12, Box::new(|| vacuum_column(quad))),
        ("binary helstrom closed form", 1e-12, Box::new(binary_helstrom)),
        ("rate bracketing", 1e-10, Box::new(|| bracketing(quad))),
        ("closed-form rates", 1e-8, Box::new(|| closed_forms(quad))),
        ("monte carlo within 5 sigma", 5.0, Box::new(|| monte_carlo(quad))),
    ];
    checks
        .into_iter()
        .map(|(name, tolerance, check)| Property {
            name,
            measured: check().unwrap_or(f64::INFINITY),
            tolerance,
        })
        .collect()
}
