//! Hadamard matrices, PSK Hadamard codewords and the passive receiver transform.
//!
//! The matrix of order `n = 2^i` is defined entrywise by
//! `H[j][k] = (-1)^(j·k)` where `j·k` is the bitwise scalar product of the
//! binary expansions of `j` and `k`. This ordering is already symmetric.
//! Entries are evaluated on demand, so very large orders cost no memory.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;

use crate::error::{check_energy, check_index, check_phases, Error, Result};

/// Largest supported Hadamard order.
pub const MAX_ORDER: usize = 1 << 20;

/// Sign `(-1)^(j·k)` of the natural-order Hadamard matrix.
#[inline]
pub fn hadamard_sign(j: usize, k: usize) -> i8 {
    if (j & k).count_ones().is_multiple_of(2) {
        1
    } else {
        -1
    }
}

fn is_valid_order(n: usize) -> bool {
    n.is_power_of_two() && n <= MAX_ORDER
}

/// Symmetric ±1 Hadamard matrix of power-of-two order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HadamardMatrix {
    order: usize,
}

impl HadamardMatrix {
    pub fn new(order: usize) -> Result<Self> {
        if is_valid_order(order) {
            Ok(Self { order })
        } else {
            Err(Error::InvalidOrder(order))
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// `log2(order)`.
    pub fn log_order(&self) -> u32 {
        self.order.trailing_zeros()
    }

    /// Entry `(j, k)`. Panics if either index is out of range.
    pub fn entry(&self, j: usize, k: usize) -> i8 {
        assert!(j < self.order && k < self.order, "Hadamard index out of range");
        hadamard_sign(j, k)
    }

    /// Row `j` as signs. Equal to column `j` since the matrix is symmetric.
    pub fn sign_row(&self, j: usize) -> Result<Vec<i8>> {
        check_index("row", j, self.order)?;
        Ok((0..self.order).map(|k| hadamard_sign(j, k)).collect())
    }

    /// Dense row-major sign array. Intended for small orders.
    pub fn to_signs(&self) -> Vec<i8> {
        let n = self.order;
        let mut out = Vec::with_capacity(n * n);
        for j in 0..n {
            out.extend((0..n).map(|k| hadamard_sign(j, k)));
        }
        out
    }
}

impl fmt::Display for HadamardMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for j in 0..self.order {
            let row: Vec<&str> = (0..self.order)
                .map(|k| if hadamard_sign(j, k) > 0 { "+" } else { "-" })
                .collect();
            writeln!(f, "{}", row.join(" "))?;
        }
        Ok(())
    }
}

/// Builds the Hadamard matrix of order `n`.
pub fn hadamard_matrix(n: usize) -> Result<HadamardMatrix> {
    HadamardMatrix::new(n)
}

/// Code instance: `n` modes, `M` phases, mean photon number `E` per mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CodeParams {
    n: usize,
    phases: usize,
    energy: f64,
}

impl CodeParams {
    pub fn new(n: usize, phases: usize, energy: f64) -> Result<Self> {
        if !is_valid_order(n) {
            return Err(Error::InvalidOrder(n));
        }
        check_phases(phases)?;
        check_energy(energy)?;
        Ok(Self { n, phases, energy })
    }

    /// Codeword length `n`.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Phase count `M`.
    pub fn phases(&self) -> usize {
        self.phases
    }

    /// Mean photon number per mode `E`.
    pub fn energy(&self) -> f64 {
        self.energy
    }

    /// Energy `ℰ = nE` of the pulse produced by the receiver transform.
    pub fn pulse_energy(&self) -> f64 {
        self.n as f64 * self.energy
    }

    /// Number of codewords `Mn`.
    pub fn codebook_size(&self) -> usize {
        self.n * self.phases
    }

    pub fn with_energy(&self, energy: f64) -> Result<Self> {
        Self::new(self.n, self.phases, energy)
    }
}

/// Product coherent state described by its per-mode complex amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherentCodeword {
    amplitudes: Vec<Complex64>,
}

impl CoherentCodeword {
    pub fn new(amplitudes: Vec<Complex64>) -> Self {
        Self { amplitudes }
    }

    pub fn vacuum(modes: usize) -> Self {
        Self::new(vec![Complex64::new(0.0, 0.0); modes])
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn total_energy(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn mean_energy_per_mode(&self) -> f64 {
        if self.amplitudes.is_empty() {
            0.0
        } else {
            self.total_energy() / self.amplitudes.len() as f64
        }
    }

    /// `⟨self|other⟩`.
    pub fn overlap(&self, other: &CoherentCodeword) -> Result<Complex64> {
        coherent_overlap(&self.amplitudes, &other.amplitudes)
    }
}

/// Inner product `⟨bra|ket⟩` of two product coherent states,
/// `exp(Σ_j (-|b_j|²/2 - |k_j|²/2 + conj(b_j) k_j))`.
pub fn coherent_overlap(bra: &[Complex64], ket: &[Complex64]) -> Result<Complex64> {
    if bra.len() != ket.len() {
        return Err(Error::DimensionMismatch {
            expected: bra.len(),
            actual: ket.len(),
        });
    }
    let exponent: Complex64 = bra
        .iter()
        .zip(ket)
        .map(|(b, k)| b.conj() * k - 0.5 * (b.norm_sqr() + k.norm_sqr()))
        .sum();
    Ok(exponent.exp())
}

/// Phase rotation `e^{i2πm/M}`.
pub fn phase_factor(m: usize, phases: usize) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * m as f64 / phases as f64)
}

/// Codeword `|v_k(α_m)⟩`: amplitude `H[j][k]·α_m` on mode `j`, where
/// `α_m = e^{i2πm/M}·α` and `α = √E·e^{i·phase_of_alpha}`.
pub fn codeword(
    params: &CodeParams,
    k: usize,
    m: usize,
    phase_of_alpha: f64,
) -> Result<CoherentCodeword> {
    check_index("mode", k, params.n)?;
    check_index("phase", m, params.phases)?;
    let alpha = Complex64::from_polar(params.energy.sqrt(), phase_of_alpha);
    let alpha_m = phase_factor(m, params.phases) * alpha;
    let amplitudes = (0..params.n)
        .map(|j| alpha_m * f64::from(hadamard_sign(j, k)))
        .collect();
    Ok(CoherentCodeword::new(amplitudes))
}

/// In-place unnormalized Walsh–Hadamard transform in natural order,
/// `x ← H·x`. The length must be a power of two.
pub fn fwht_in_place(x: &mut [Complex64]) {
    let n = x.len();
    debug_assert!(n.is_power_of_two());
    let mut half = 1;
    while half < n {
        for block in x.chunks_mut(2 * half) {
            let (lo, hi) = block.split_at_mut(half);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (u, v) = (*a, *b);
                *a = u + v;
                *b = u - v;
            }
        }
        half *= 2;
    }
}

/// Applies the receiver transform with symplectic matrix `H/√n` to the
/// codeword amplitudes. A Hadamard codeword `|v_k(α_m)⟩` maps to the
/// pulse-position state with amplitude `√n·α_m` on mode `k`.
pub fn apply_hadamard_transform(
    codeword: &CoherentCodeword,
    h: &HadamardMatrix,
) -> Result<CoherentCodeword> {
    if codeword.len() != h.order() {
        return Err(Error::DimensionMismatch {
            expected: h.order(),
            actual: codeword.len(),
        });
    }
    let mut amps = codeword.amplitudes.clone();
    fwht_in_place(&mut amps);
    let scale = 1.0 / (h.order() as f64).sqrt();
    amps.iter_mut().for_each(|a| *a *= scale);
    Ok(CoherentCodeword::new(amps))
}
