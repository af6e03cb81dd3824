//! Spectrum of the average codeword state and the rates derived from it.
//!
//! The Hadamard transform maps the average state of a PSK Hadamard code to
//! `ρ̄ = (1/n) Σ_k ρ_k^loc ⊗ |0⟩⟨0|^{⊗(n-1)}`, with `ρ_k^loc` the uniform
//! mixture of the `M` phase-rotated pulses `|√n α_m⟩` on mode `k`. Its
//! spectrum has three families:
//!
//! | eigenvalue | value                          | multiplicity |
//! |------------|--------------------------------|--------------|
//! | `ν⁰₀`      | `[λ₀ + (n-1)M e^{-ℰ}] / (Mn)`  | 1            |
//! | `ν⁰₊`      | `[λ₀ - M e^{-ℰ}] / (Mn)`       | n - 1        |
//! | `ν^ℓ`      | `λ_ℓ / (Mn)`, `ℓ = 1..M-1`     | n each       |
//!
//! where `λ_ℓ(ℰ) = Σ_h exp[-(1 - e^{i2πh/M})ℰ - i2πℓh/M]` are the
//! eigenvalues of the single-mode PSK Gram matrix. [`holevo_rate_oracle`]
//! recomputes the same entropy from the dense `Mn × Mn` codebook Gram matrix
//! without using any of these formulas.

use std::f64::consts::{LN_2, PI};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use statrs::function::gamma::ln_gamma;

use crate::error::{check_energy, check_phases, Error, Result};
use crate::hadamard::{codeword, CodeParams, CoherentCodeword};

/// Negative PSK eigenvalues above `-CLAMP_TOLERANCE` are rounding noise and
/// are set to zero; anything more negative is reported as an error.
pub const CLAMP_TOLERANCE: f64 = 1e-10;

/// Largest codebook (`Mn`) accepted by the dense oracle.
pub const ORACLE_CAP: usize = 256;

/// `-p·log2(p)`, zero for `p <= 0`.
#[inline]
pub fn entropy_term(p: f64) -> f64 {
    if p > 0.0 {
        -p * p.log2()
    } else {
        0.0
    }
}

/// Eigenvalues `λ_ℓ(ℰ)` of the Gram matrix of `M` symmetric PSK coherent
/// states of energy `ℰ`.
#[derive(Debug, Clone, PartialEq)]
pub struct PskSpectrum {
    phases: usize,
    pulse_energy: f64,
    lambdas: Vec<f64>,
}

impl PskSpectrum {
    pub fn phases(&self) -> usize {
        self.phases
    }

    pub fn pulse_energy(&self) -> f64 {
        self.pulse_energy
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn lambda(&self, ell: usize) -> f64 {
        self.lambdas[ell]
    }

    /// Overlap `⟨0|d_ℓ⟩` of the `ℓ`-th Fourier eigenvector with the vacuum.
    /// Only `ℓ = 0` has vacuum support.
    pub fn vacuum_overlap(&self, ell: usize) -> f64 {
        if ell == 0 {
            (-self.pulse_energy / 2.0).exp() * (self.phases as f64 / self.lambdas[0]).sqrt()
        } else {
            0.0
        }
    }
}

/// Above this pulse energy `λ_ℓ` comes from the exponential sum; below it
/// from the Poisson residues, whose cost grows linearly with `ℰ`.
pub const SERIES_ENERGY_LIMIT: f64 = 1000.0;

/// Evaluates `λ_ℓ(ℰ)` for `ℓ = 0..M-1`.
///
/// The exponential sum cancels catastrophically for the small eigenvalues
/// at low energy, leaving noise of order `1e-16` that `√λ` (as used by the
/// Helstrom probabilities) amplifies to `1e-8`. Below
/// [`SERIES_ENERGY_LIMIT`] the identical quantity
/// `M · P[Poisson(ℰ) ≡ ℓ mod M]` is summed instead, which involves only
/// positive terms.
pub fn psk_eigenvalues(phases: usize, pulse_energy: f64) -> Result<PskSpectrum> {
    check_phases(phases)?;
    check_energy(pulse_energy)?;
    if pulse_energy > SERIES_ENERGY_LIMIT {
        return psk_eigenvalues_fourier(phases, pulse_energy);
    }
    let mut residues = vec![0.0; phases];
    if pulse_energy == 0.0 {
        residues[0] = 1.0;
    } else {
        let mode = pulse_energy.floor() as usize;
        let peak = (-pulse_energy + mode as f64 * pulse_energy.ln() - ln_gamma(mode as f64 + 1.0)).exp();
        residues[mode % phases] += peak;
        let mut p = peak;
        for k in (0..mode).rev() {
            p *= (k + 1) as f64 / pulse_energy;
            residues[k % phases] += p;
            if p < 1e-300 {
                break;
            }
        }
        p = peak;
        for k in mode + 1.. {
            p *= pulse_energy / k as f64;
            if p < 1e-300 {
                break;
            }
            residues[k % phases] += p;
        }
    }
    let m = phases as f64;
    Ok(PskSpectrum {
        phases,
        pulse_energy,
        lambdas: residues.into_iter().map(|r| (m * r).min(m)).collect(),
    })
}

/// `λ_ℓ(ℰ) = Σ_h exp[-(1 - e^{i2πh/M})ℰ - i2πℓh/M]` evaluated literally.
/// Real parts below `-CLAMP_TOLERANCE` are reported as errors, smaller
/// negative values are clamped to zero.
pub fn psk_eigenvalues_fourier(phases: usize, pulse_energy: f64) -> Result<PskSpectrum> {
    check_phases(phases)?;
    check_energy(pulse_energy)?;
    let m = phases as f64;
    let terms: Vec<Complex64> = (0..phases)
        .map(|h| {
            let theta = 2.0 * PI * h as f64 / m;
            let z = Complex64::from_polar(1.0, theta);
            (-(1.0 - z) * pulse_energy).exp()
        })
        .collect();
    let lambdas = (0..phases)
        .map(|ell| {
            let sum: Complex64 = terms
                .iter()
                .enumerate()
                .map(|(h, t)| t * Complex64::from_polar(1.0, -2.0 * PI * (ell * h) as f64 / m))
                .sum();
            if sum.re < -CLAMP_TOLERANCE {
                return Err(Error::NegativeEigenvalue {
                    index: ell,
                    value: sum.re,
                });
            }
            Ok(sum.re.clamp(0.0, m))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PskSpectrum {
        phases,
        pulse_energy,
        lambdas,
    })
}

/// Eigenvalues `(μ₀, μ₊)` of the `n × n` Gram matrix of the vacuum-supported
/// states `|e_k⁰⟩` (unit diagonal, constant off-diagonal `M e^{-ℰ}/λ₀`).
/// `μ₀` has multiplicity one, `μ₊` multiplicity `n - 1`.
pub fn gram_eigenvalues_analytic(params: &CodeParams) -> Result<(f64, f64)> {
    let spectrum = psk_eigenvalues(params.phases(), params.pulse_energy())?;
    let off = params.phases() as f64 * (-params.pulse_energy()).exp() / spectrum.lambda(0);
    let n = params.n() as f64;
    Ok((1.0 + (n - 1.0) * off, 1.0 - off))
}

/// Full spectrum of the average state, grouped by multiplicity.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumPpm {
    pub n: usize,
    pub phases: usize,
    pub pulse_energy: f64,
    /// `ν⁰₀`, multiplicity 1.
    pub nu0_0: f64,
    /// `ν⁰₊`, multiplicity `n - 1`.
    pub nu0_plus: f64,
    /// `ν^ℓ` for `ℓ = 1..M-1`, multiplicity `n` each.
    pub nu_ell: Vec<f64>,
}

impl SpectrumPpm {
    /// `(value, multiplicity)` pairs; multiplicities add up to `Mn`.
    pub fn eigenvalues(&self) -> Vec<(f64, usize)> {
        let mut out = vec![(self.nu0_0, 1), (self.nu0_plus, self.n - 1)];
        out.extend(self.nu_ell.iter().map(|&v| (v, self.n)));
        out
    }

    /// Every eigenvalue repeated by multiplicity, sorted ascending.
    pub fn to_sorted_multiset(&self) -> Vec<f64> {
        let mut all: Vec<f64> = self
            .eigenvalues()
            .into_iter()
            .flat_map(|(v, k)| std::iter::repeat_n(v, k))
            .collect();
        all.sort_by(f64::total_cmp);
        all
    }

    pub fn trace(&self) -> f64 {
        self.eigenvalues()
            .into_iter()
            .map(|(v, k)| v * k as f64)
            .sum()
    }

    /// Von Neumann entropy in bits.
    pub fn entropy(&self) -> f64 {
        self.eigenvalues()
            .into_iter()
            .map(|(v, k)| k as f64 * entropy_term(v))
            .sum()
    }
}

pub fn ppm_spectrum(params: &CodeParams) -> Result<SpectrumPpm> {
    let pulse_energy = params.pulse_energy();
    let spectrum = psk_eigenvalues(params.phases(), pulse_energy)?;
    let (m, n) = (params.phases() as f64, params.n() as f64);
    let vac = m * (-pulse_energy).exp();
    let lambda0 = spectrum.lambda(0);
    let norm = m * n;
    Ok(SpectrumPpm {
        n: params.n(),
        phases: params.phases(),
        pulse_energy,
        nu0_0: (lambda0 + (n - 1.0) * vac) / norm,
        // λ₀ ≥ M e^{-ℰ} analytically; the difference can round below zero.
        nu0_plus: ((lambda0 - vac) / norm).max(0.0),
        nu_ell: spectrum.lambdas()[1..].iter().map(|l| l / norm).collect(),
    })
}

/// Holevo rate `S(ρ̄)/n` of the code in bits per mode.
pub fn optimal_rate(params: &CodeParams) -> Result<f64> {
    Ok(ppm_spectrum(params)?.entropy() / params.n() as f64)
}

/// Gram matrix `G[(k,m),(h,l)] = ⟨v_k(α_m)|v_h(α_l)⟩` of the whole codebook,
/// indexed `m·n + k`.
pub fn codebook_gram(params: &CodeParams) -> Result<DMatrix<Complex64>> {
    let (n, phases) = (params.n(), params.phases());
    let words: Vec<CoherentCodeword> = (0..phases)
        .flat_map(|m| (0..n).map(move |k| (k, m)))
        .map(|(k, m)| codeword(params, k, m, 0.0))
        .collect::<Result<_>>()?;
    let size = words.len();
    let mut gram = DMatrix::from_element(size, size, Complex64::new(0.0, 0.0));
    for i in 0..size {
        for j in i..size {
            let g = words[i].overlap(&words[j])?;
            gram[(i, j)] = g;
            gram[(j, i)] = g.conj();
        }
    }
    Ok(gram)
}

/// Eigenvalues of a Hermitian matrix, ascending. Solved through the real
/// symmetric embedding `[[Re, -Im], [Im, Re]]`, which doubles every eigenvalue.
pub fn hermitian_eigenvalues(matrix: &DMatrix<Complex64>) -> Result<Vec<f64>> {
    let size = matrix.nrows();
    if matrix.ncols() != size {
        return Err(Error::DimensionMismatch {
            expected: size,
            actual: matrix.ncols(),
        });
    }
    let embedded = DMatrix::from_fn(2 * size, 2 * size, |r, c| {
        let z = matrix[(r % size, c % size)];
        match (r < size, c < size) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    });
    let mut values: Vec<f64> = SymmetricEigen::new(embedded).eigenvalues.iter().copied().collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::EigenFailure);
    }
    values.sort_by(f64::total_cmp);
    Ok(values.into_iter().step_by(2).collect())
}

/// Brute-force Holevo rate: entropy of the normalized codebook Gram matrix.
/// Independent of the closed-form spectrum; limited to `Mn <= ORACLE_CAP`.
pub fn holevo_rate_oracle(params: &CodeParams) -> Result<f64> {
    let size = params.codebook_size();
    if size > ORACLE_CAP {
        return Err(Error::OracleTooLarge {
            size,
            cap: ORACLE_CAP,
        });
    }
    let gram = codebook_gram(params)?;
    let entropy: f64 = hermitian_eigenvalues(&gram)?
        .into_iter()
        .map(|g| entropy_term(g / size as f64))
        .sum();
    Ok(entropy / params.n() as f64)
}

/// Classical capacity `(E+1)log2(E+1) - E log2 E` of the pure-loss channel
/// at mean photon number `E` per mode.
pub fn classical_capacity(energy: f64) -> f64 {
    if energy <= 0.0 {
        return 0.0;
    }
    (energy + 1.0) * energy.ln_1p() / LN_2 + entropy_term(energy)
}

/// First-order expansion of [`optimal_rate`] for `ℰ = nE ≪ 1`:
/// `-[(1-ℰ)log2(1-ℰ) + ℰ log2(ℰ/n)]/n`. For `M = 1` the second term is absent
/// because no `ν^{ℓ>0}` eigenvalues exist.
pub fn low_energy_rate(params: &CodeParams) -> f64 {
    let pulse = params.pulse_energy();
    let n = params.n() as f64;
    let mut rate = entropy_term((1.0 - pulse).max(0.0));
    if params.phases() > 1 && pulse > 0.0 {
        rate -= pulse * (pulse / n).log2();
    }
    rate / n
}

/// Leading-order form `E - E log2 E` of the low-energy expansion.
pub fn leading_order_rate(energy: f64) -> f64 {
    energy + entropy_term(energy)
}
