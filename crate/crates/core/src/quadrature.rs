//! Globally adaptive Gauss–Kronrod (G10/K21) integration.
//!
//! The interval with the largest error estimate is bisected until the summed
//! estimate meets `max(abs_tol, rel_tol * |I|)`. Vector-valued integrands share
//! one subdivision, so linear relations between components (such as a row of
//! probabilities summing to a known total) survive integration up to rounding.

use crate::error::{Error, Result};

/// Kronrod abscissae on [-1, 1]; odd indices are the Gauss nodes.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_245_924_713,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// Gauss weights for `XGK[1], XGK[3], .., XGK[9]`.
#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Hard cap on subintervals, independent of the depth limit.
const MAX_INTERVALS: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Maximum number of bisections of any subinterval.
    pub max_depth: u32,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            max_depth: 40,
        }
    }
}

impl QuadratureConfig {
    pub fn new(rel_tol: f64, abs_tol: f64, max_depth: u32) -> Result<Self> {
        let cfg = Self {
            rel_tol,
            abs_tol,
            max_depth,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol.is_finite() && self.rel_tol > 0.0) {
            return Err(Error::InvalidQuadrature("rel_tol must be positive"));
        }
        if !(self.abs_tol.is_finite() && self.abs_tol > 0.0) {
            return Err(Error::InvalidQuadrature("abs_tol must be positive"));
        }
        if self.max_depth < 1 {
            return Err(Error::InvalidQuadrature("max_depth must be at least 1"));
        }
        Ok(())
    }

    /// Configuration for an integral nested inside another one: both
    /// tolerances shrink by `factor`.
    pub fn tightened(&self, factor: f64) -> Self {
        Self {
            rel_tol: self.rel_tol / factor,
            abs_tol: self.abs_tol / factor,
            max_depth: self.max_depth,
        }
    }

    /// The configuration used one nesting level deeper (10x tighter).
    pub fn inner(&self) -> Self {
        self.tightened(10.0)
    }
}

struct Segment {
    a: f64,
    b: f64,
    depth: u32,
    value: Vec<f64>,
    error: f64,
}

fn kronrod<F>(f: &mut F, a: f64, b: f64, buf: &mut [f64], value: &mut [f64]) -> Result<f64>
where
    F: FnMut(f64, &mut [f64]) -> Result<()>,
{
    let dim = value.len();
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut gauss = vec![0.0; dim];
    value.iter_mut().for_each(|v| *v = 0.0);
    for (i, (&x, &wk)) in XGK.iter().zip(WGK.iter()).enumerate() {
        let nodes: &[f64] = if x == 0.0 { &[0.0] } else { &[-x, x] };
        for &s in nodes {
            buf.iter_mut().for_each(|v| *v = 0.0);
            f(center + half * s, buf)?;
            for d in 0..dim {
                value[d] += wk * buf[d];
                if i % 2 == 1 {
                    gauss[d] += WG[i / 2] * buf[d];
                }
            }
        }
    }
    let mut error = 0.0f64;
    for d in 0..dim {
        value[d] *= half;
        gauss[d] *= half;
        error = error.max((value[d] - gauss[d]).abs());
    }
    if value.iter().any(|v| !v.is_finite()) {
        return Err(Error::QuadratureNonConvergence {
            estimate: f64::INFINITY,
            tolerance: 0.0,
        });
    }
    Ok(error)
}

/// Integrates a vector-valued function over `[a, b]`. The integrand writes
/// `dim` values into the slice it receives and may fail, which aborts the
/// integration with its error.
pub fn try_integrate_vec<F>(mut f: F, a: f64, b: f64, dim: usize, cfg: &QuadratureConfig) -> Result<Vec<f64>>
where
    F: FnMut(f64, &mut [f64]) -> Result<()>,
{
    cfg.validate()?;
    if a == b || dim == 0 {
        return Ok(vec![0.0; dim]);
    }
    if b < a {
        return try_integrate_vec(f, b, a, dim, cfg).map(|v| v.into_iter().map(|x| -x).collect());
    }
    let mut buf = vec![0.0; dim];
    let mut value = vec![0.0; dim];
    let error = kronrod(&mut f, a, b, &mut buf, &mut value)?;
    let mut segments = vec![Segment {
        a,
        b,
        depth: 0,
        value,
        error,
    }];
    loop {
        let mut total = vec![0.0; dim];
        let mut total_error = 0.0;
        let mut worst = 0;
        for (i, s) in segments.iter().enumerate() {
            total.iter_mut().zip(&s.value).for_each(|(t, v)| *t += v);
            total_error += s.error;
            if s.error > segments[worst].error {
                worst = i;
            }
        }
        let magnitude = total.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tolerance = cfg.abs_tol.max(cfg.rel_tol * magnitude);
        if total_error <= tolerance {
            return Ok(total);
        }
        let seg = &segments[worst];
        if seg.depth >= cfg.max_depth || segments.len() >= MAX_INTERVALS {
            return Err(Error::QuadratureNonConvergence {
                estimate: total_error,
                tolerance,
            });
        }
        let Segment { a, b, depth, .. } = segments.swap_remove(worst);
        let mid = 0.5 * (a + b);
        for (lo, hi) in [(a, mid), (mid, b)] {
            let mut value = vec![0.0; dim];
            let error = kronrod(&mut f, lo, hi, &mut buf, &mut value)?;
            segments.push(Segment {
                a: lo,
                b: hi,
                depth: depth + 1,
                value,
                error,
            });
        }
    }
}

/// Scalar fallible integrand.
pub fn try_integrate<F>(mut f: F, a: f64, b: f64, cfg: &QuadratureConfig) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let v = try_integrate_vec(
        |x, out| {
            out[0] = f(x)?;
            Ok(())
        },
        a,
        b,
        1,
        cfg,
    )?;
    Ok(v[0])
}

pub fn integrate<F>(mut f: F, a: f64, b: f64, cfg: &QuadratureConfig) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    try_integrate(|x| Ok(f(x)), a, b, cfg)
}
