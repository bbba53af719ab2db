//! Numerical checkers for the Gagliardo-Nirenberg and Caffarelli-Kohn-Nirenberg
//! inequalities, the weight-power step between CKN levels, and the weighted
//! interpolation estimate used with `e^{psi}`.
//!
//! All checks report ratios; constants are empirical suprema over a corpus.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::quadrature::{radial_power, simpson_weights, sphere_area, GaussRule};
use crate::smoothstep;
use crate::weights::WeightFunction;

pub const NORM_NODES: usize = 4097;

/// Compactly supported radial test function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Entry {
    /// `a exp(1 - 1/(1 - (r/w)^2))`.
    Bump { amplitude: f64, width: f64 },
    /// Annular plateau: `a` on `|r - c| <= h`, quintic descent to 0 at `|r - c| = 2h`.
    Plateau { amplitude: f64, center: f64, half_width: f64 },
    /// `a sin(m r) exp(1 - 1/(1 - (r/w)^2))`.
    Oscillatory { amplitude: f64, width: f64, frequency: f64 },
    /// `a exp(-r^2/(2 s^2))` cut off smoothly between `0.875 L` and `L`.
    TruncatedGaussian { amplitude: f64, sigma: f64, cutoff: f64 },
}

fn bump_jet(s: f64) -> (f64, f64) {
    if s >= 1.0 {
        return (0.0, 0.0);
    }
    let q = 1.0 - s * s;
    let g = (1.0 - 1.0 / q).exp();
    (g, g * (-2.0 * s) / (q * q))
}

impl Entry {
    /// `(u(r), u'(r))`.
    pub fn jet(&self, r: f64) -> (f64, f64) {
        match *self {
            Entry::Bump { amplitude, width } => {
                let (g, dg) = bump_jet(r / width);
                (amplitude * g, amplitude * dg / width)
            }
            Entry::Plateau {
                amplitude,
                center,
                half_width,
            } => {
                let d = r - center;
                let w = smoothstep::window(d.abs(), half_width, 2.0 * half_width);
                (amplitude * w.value, amplitude * w.d1 * d.signum())
            }
            Entry::Oscillatory {
                amplitude,
                width,
                frequency,
            } => {
                let (g, dg) = bump_jet(r / width);
                let (s, c) = (frequency * r).sin_cos();
                (
                    amplitude * s * g,
                    amplitude * (frequency * c * g + s * dg / width),
                )
            }
            Entry::TruncatedGaussian {
                amplitude,
                sigma,
                cutoff,
            } => {
                let g = (-r * r / (2.0 * sigma * sigma)).exp();
                let dg = -r / (sigma * sigma) * g;
                let w = smoothstep::window(r, 0.875 * cutoff, cutoff);
                (amplitude * g * w.value, amplitude * (dg * w.value + g * w.d1))
            }
        }
    }

    pub fn support(&self) -> f64 {
        match *self {
            Entry::Bump { width, .. } | Entry::Oscillatory { width, .. } => width,
            Entry::Plateau {
                center, half_width, ..
            } => center + 2.0 * half_width,
            Entry::TruncatedGaussian { cutoff, .. } => cutoff,
        }
    }

    /// Radii in `(0, support)` where the profile is only finitely smooth.
    fn joints(&self) -> Vec<f64> {
        match *self {
            Entry::Bump { .. } | Entry::Oscillatory { .. } => Vec::new(),
            Entry::Plateau {
                center, half_width, ..
            } => [center - 2.0 * half_width, center - half_width, center + half_width]
                .into_iter()
                .filter(|&r| r > 0.0)
                .collect(),
            Entry::TruncatedGaussian { cutoff, .. } => vec![0.875 * cutoff],
        }
    }

    /// `x -> u(lambda x)`.
    pub fn dilated(&self, lambda: f64) -> Self {
        match *self {
            Entry::Bump { amplitude, width } => Entry::Bump {
                amplitude,
                width: width / lambda,
            },
            Entry::Plateau {
                amplitude,
                center,
                half_width,
            } => Entry::Plateau {
                amplitude,
                center: center / lambda,
                half_width: half_width / lambda,
            },
            Entry::Oscillatory {
                amplitude,
                width,
                frequency,
            } => Entry::Oscillatory {
                amplitude,
                width: width / lambda,
                frequency: frequency * lambda,
            },
            Entry::TruncatedGaussian {
                amplitude,
                sigma,
                cutoff,
            } => Entry::TruncatedGaussian {
                amplitude,
                sigma: sigma / lambda,
                cutoff: cutoff / lambda,
            },
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        match *self {
            Entry::Bump { amplitude, width } => Entry::Bump {
                amplitude: c * amplitude,
                width,
            },
            Entry::Plateau {
                amplitude,
                center,
                half_width,
            } => Entry::Plateau {
                amplitude: c * amplitude,
                center,
                half_width,
            },
            Entry::Oscillatory {
                amplitude,
                width,
                frequency,
            } => Entry::Oscillatory {
                amplitude: c * amplitude,
                width,
                frequency,
            },
            Entry::TruncatedGaussian {
                amplitude,
                sigma,
                cutoff,
            } => Entry::TruncatedGaussian {
                amplitude: c * amplitude,
                sigma,
                cutoff,
            },
        }
    }

    /// The Gaussian `e^{-x^2/2}` cut off at `|x| = 8`.
    pub fn standard_gaussian() -> Self {
        Entry::TruncatedGaussian {
            amplitude: 1.0,
            sigma: 1.0,
            cutoff: 8.0,
        }
    }
}

/// Samples of an entry on a uniform radial grid with Simpson-times-surface weights.
#[derive(Debug, Clone)]
pub struct Sampled {
    pub dim: usize,
    pub r: Vec<f64>,
    pub u: Vec<f64>,
    pub du: Vec<f64>,
    pub w: Vec<f64>,
}

impl Sampled {
    pub fn new(entry: &Entry, dim: usize) -> Self {
        let n = NORM_NODES;
        let h = entry.support() / (n - 1) as f64;
        let omega = sphere_area(dim);
        let r: Vec<f64> = (0..n).map(|j| j as f64 * h).collect();
        let (u, du) = r.iter().map(|&x| entry.jet(x)).unzip();
        let w = simpson_weights(n, h)
            .into_iter()
            .zip(&r)
            .map(|(s, &x)| s * omega * radial_power(x, dim))
            .collect();
        Self { dim, r, u, du, w }
    }

    fn integral(&self, f: impl Fn(usize) -> f64) -> f64 {
        (0..self.r.len()).map(|j| self.w[j] * f(j)).sum()
    }

    pub fn l2(&self) -> f64 {
        self.integral(|j| self.u[j] * self.u[j]).sqrt()
    }

    pub fn grad_l2(&self) -> f64 {
        self.integral(|j| self.du[j] * self.du[j]).sqrt()
    }

    pub fn lq(&self, q: f64) -> f64 {
        self.integral(|j| self.u[j].abs().powf(q)).powf(1.0 / q)
    }

    /// `|| |x|^gamma u ||_2`.
    pub fn moment(&self, gamma: f64) -> f64 {
        self.integral(|j| {
            let rg = if gamma == 0.0 { 1.0 } else { self.r[j].powf(gamma) };
            rg * rg * self.u[j] * self.u[j]
        })
        .sqrt()
    }
}

fn nonzero(value: f64, which: &'static str) -> Result<f64> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(Error::ZeroNorm { which })
    }
}

/// `theta = N(p-1)/(2(p+1))`.
pub fn gn_theta(dim: usize, p: f64) -> f64 {
    dim as f64 * (p - 1.0) / (2.0 * (p + 1.0))
}

/// `||u||_{p+1} / (||grad u||^theta ||u||^{1-theta})`.
pub fn gn_ratio(entry: &Entry, p: f64, dim: usize) -> Result<f64> {
    if !(p >= 1.0) || (dim >= 3 && p > (dim as f64 + 2.0) / (dim as f64 - 2.0)) {
        return Err(invalid("p", format!("outside the admissible range for N = {dim}: {p}")));
    }
    let s = Sampled::new(entry, dim);
    gn_ratio_sampled(&s, p)
}

fn gn_ratio_sampled(s: &Sampled, p: f64) -> Result<f64> {
    let theta = gn_theta(s.dim, p);
    let l2 = nonzero(s.l2(), "u")?;
    let g = nonzero(s.grad_l2(), "grad u")?;
    Ok(s.lq(p + 1.0) / (g.powf(theta) * l2.powf(1.0 - theta)))
}

/// `||u|| / (||grad u||^{1 - 2^{-k}} || |x|^{2^k - 1} u ||^{2^{-k}})`.
pub fn ckn_ratio(entry: &Entry, k: u32, dim: usize) -> Result<f64> {
    if k == 0 {
        return Err(invalid("k", "must be at least 1"));
    }
    ckn_ratio_sampled(&Sampled::new(entry, dim), k)
}

fn ckn_ratio_sampled(s: &Sampled, k: u32) -> Result<f64> {
    let e = 0.5f64.powi(k as i32);
    let l2 = nonzero(s.l2(), "u")?;
    let g = nonzero(s.grad_l2(), "grad u")?;
    let m = nonzero(s.moment(2f64.powi(k as i32) - 1.0), "|x|^(2^k-1) u")?;
    Ok(l2 / (g.powf(1.0 - e) * m.powf(e)))
}

/// `|| |x|^{gamma/2} u ||^2 / (||grad u|| || |x|^{gamma+1} u ||)`.
pub fn gamma_step_ratio(entry: &Entry, gamma: f64, dim: usize) -> Result<f64> {
    if !(gamma >= 0.0) {
        return Err(invalid("gamma", "must be non-negative"));
    }
    gamma_step_sampled(&Sampled::new(entry, dim), gamma)
}

fn gamma_step_sampled(s: &Sampled, gamma: f64) -> Result<f64> {
    let a = nonzero(s.moment(gamma / 2.0), "|x|^(gamma/2) u")?;
    let g = nonzero(s.grad_l2(), "grad u")?;
    let b = nonzero(s.moment(gamma + 1.0), "|x|^(gamma+1) u")?;
    Ok(a * a / (g * b))
}

const IBP_PANELS: usize = 256;
const IBP_GRADING: usize = 48;

/// `int_{R^N} f(r, u, u') dx` by composite Gauss-Legendre on the support, with
/// panels halving toward the origin so that `r^gamma` factors stay resolved.
fn radial_integral(entry: &Entry, dim: usize, rule: &GaussRule, f: impl Fn(f64, f64, f64) -> f64) -> f64 {
    let support = entry.support();
    let mut edges: Vec<f64> = (0..=IBP_PANELS).map(|i| support * i as f64 / IBP_PANELS as f64).collect();
    edges.extend(entry.joints().into_iter().filter(|&r| r < support));
    let first = edges[1];
    edges.extend((1..IBP_GRADING).map(|k| first * 0.5f64.powi(k as i32)));
    edges.sort_by(f64::total_cmp);
    edges.dedup();
    let g = |r: f64| {
        let (u, du) = entry.jet(r);
        radial_power(r, dim) * f(r, u, du)
    };
    sphere_area(dim) * edges.windows(2).map(|w| rule.integrate(w[0], w[1], g)).sum::<f64>()
}

/// Normalized residual of `int div(|x|^gamma x) u^2 = -2 int |x|^gamma (x . grad u) u`.
pub fn ibp_residual(entry: &Entry, gamma: f64, dim: usize) -> Result<f64> {
    if !(gamma >= 0.0) {
        return Err(invalid("gamma", "must be non-negative"));
    }
    let rule = GaussRule::new(12);
    let n = dim as f64;
    let pw = |r: f64| if gamma == 0.0 { 1.0 } else { r.powf(gamma) };
    let lhs = (n + gamma) * radial_integral(entry, dim, &rule, |r, u, _| pw(r) * u * u);
    let rhs = -2.0 * radial_integral(entry, dim, &rule, |r, u, du| pw(r) * r * du * u);
    let grad = radial_integral(entry, dim, &rule, |_, _, du| du * du).sqrt();
    let moment = radial_integral(entry, dim, &rule, |r, u, _| pw(r) * pw(r) * r * r * u * u).sqrt();
    let scale = nonzero(lhs.abs() + 2.0 * grad * moment, "ibp scale")?;
    Ok((lhs - rhs).abs() / scale)
}

/// All ratios of one entry.
#[derive(Debug, Clone, Serialize)]
pub struct EntryReport {
    pub index: usize,
    pub entry: Entry,
    pub gn: f64,
    /// `ckn[k-1]` for `k = 1, 2, 3`.
    pub ckn: [f64; 3],
    /// `gamma_step` at `gamma = 0, 2, 6`, the steps linking consecutive CKN levels.
    pub gamma_step: [f64; 3],
    pub ibp_residual: f64,
}

/// Weight powers `gamma_k = 2^k - 2` joining level `k-1` to level `k`.
pub const CHAIN_GAMMAS: [f64; 3] = [0.0, 2.0, 6.0];

#[derive(Debug, Clone, Serialize)]
pub struct TestFunctionCorpus {
    pub dim: usize,
    pub seed: u64,
    pub entries: Vec<Entry>,
}

impl TestFunctionCorpus {
    /// Deterministic mix of bumps, shifted plateaus and oscillatory bumps.
    pub fn generate(dim: usize, n: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (dim as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let entries = (0..n)
            .map(|i| match i % 3 {
                0 => Entry::Bump {
                    amplitude: rng.gen_range(0.5..2.0),
                    width: rng.gen_range(0.5..3.0),
                },
                1 => Entry::Plateau {
                    amplitude: rng.gen_range(0.5..2.0),
                    center: rng.gen_range(0.0..2.0),
                    half_width: rng.gen_range(0.3..1.5),
                },
                _ => Entry::Oscillatory {
                    amplitude: rng.gen_range(0.5..2.0),
                    width: rng.gen_range(1.0..3.0),
                    frequency: rng.gen_range(1.0..8.0),
                },
            })
            .collect();
        Self { dim, seed, entries }
    }

    pub fn evaluate(&self, p: f64) -> Result<Vec<EntryReport>> {
        self.entries
            .par_iter()
            .enumerate()
            .map(|(index, entry)| {
                let s = Sampled::new(entry, self.dim);
                let mut ckn = [0.0; 3];
                let mut gamma_step = [0.0; 3];
                for k in 0..3 {
                    ckn[k] = ckn_ratio_sampled(&s, k as u32 + 1)?;
                    gamma_step[k] = gamma_step_sampled(&s, CHAIN_GAMMAS[k])?;
                }
                let ibp = CHAIN_GAMMAS
                    .iter()
                    .map(|&g| ibp_residual(entry, g, self.dim))
                    .collect::<Result<Vec<_>>>()?
                    .into_iter()
                    .fold(0.0, f64::max);
                Ok(EntryReport {
                    index,
                    entry: *entry,
                    gn: gn_ratio_sampled(&s, p)?,
                    ckn,
                    gamma_step,
                    ibp_residual: ibp,
                })
            })
            .collect()
    }
}

/// Corpus-wide suprema.
#[derive(Debug, Clone, Serialize)]
pub struct CorpusSummary {
    pub dim: usize,
    pub p: f64,
    pub entries: usize,
    pub sup_gn: f64,
    pub sup_ckn: [f64; 3],
    pub sup_gamma_step: [f64; 3],
    pub max_ibp_residual: f64,
    /// `sup ckn_{k-1} * (sup gamma_step_k)^{2^{-k}}`, with `ckn_0 = 1`.
    pub chain_bound: [f64; 3],
}

pub fn summarize_corpus(dim: usize, p: f64, reports: &[EntryReport]) -> CorpusSummary {
    let sup = |f: &dyn Fn(&EntryReport) -> f64| reports.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
    let mut sup_ckn = [0.0; 3];
    let mut sup_gs = [0.0; 3];
    for k in 0..3 {
        sup_ckn[k] = sup(&|r| r.ckn[k]);
        sup_gs[k] = sup(&|r| r.gamma_step[k]);
    }
    let mut chain = [0.0; 3];
    for k in 0..3 {
        let prev = if k == 0 { 1.0 } else { sup_ckn[k - 1] };
        chain[k] = prev * sup_gs[k].powf(0.5f64.powi(k as i32 + 1));
    }
    CorpusSummary {
        dim,
        p,
        entries: reports.len(),
        sup_gn: sup(&|r| r.gn),
        sup_ckn,
        sup_gamma_step: sup_gs,
        max_ibp_residual: sup(&|r| r.ibp_residual),
        chain_bound: chain,
    }
}

/// Smallest admissible `k` with `2^k - 1 >= -alpha/2`.
pub fn min_chain_level(alpha: f64) -> u32 {
    let mut k = 1;
    while 2f64.powi(k as i32) - 1.0 < -alpha / 2.0 {
        k += 1;
    }
    k
}

/// `(LHS, RHS)` of the weighted interpolation estimate with unit constant:
/// `LHS = ||e^{2psi/(p+1)} u||_{p+1}` and
/// `RHS = ((1+t)^{-1/2} ||e^psi sqrt(a) u|| + ||e^psi grad u||)^{theta + (1-2^{-k})(1-theta)}
///        * ((1+t)^{(2^k - 1 + alpha/2)/(2-alpha)} ||e^psi sqrt(a) u||)^{(1-theta)/2^k}`.
pub fn weighted_interpolation_check(
    entry: &Entry,
    weight: &WeightFunction,
    t: f64,
    p: f64,
    k: u32,
) -> Result<(f64, f64)> {
    let alpha = weight.spec().alpha;
    if 2f64.powi(k as i32) - 1.0 < -alpha / 2.0 {
        return Err(invalid("k", format!("2^k - 1 must be at least -alpha/2 = {}", -alpha / 2.0)));
    }
    let dim = weight.dim();
    let s = Sampled::new(entry, dim);
    if entry.support() > weight.r_max() {
        return Err(Error::OutOfRange {
            r: entry.support(),
            r_max: weight.r_max(),
        });
    }
    let psi: Vec<f64> = s.r.iter().map(|&r| weight.psi(t, r)).collect::<Result<_>>()?;
    let a: Vec<f64> = s.r.iter().map(|&r| weight.spec().spatial(r)).collect();
    let q = p + 1.0;
    let lhs = s
        .integral(|j| (2.0 * psi[j] / q).exp().powf(q) * s.u[j].abs().powf(q))
        .powf(1.0 / q);
    if lhs == 0.0 {
        return Ok((0.0, 0.0));
    }
    let e2 = |j: usize| (2.0 * psi[j]).exp();
    let damped = s.integral(|j| e2(j) * a[j] * s.u[j] * s.u[j]).sqrt();
    let grad = s.integral(|j| e2(j) * s.du[j] * s.du[j]).sqrt();
    let theta = gn_theta(dim, p);
    let e = 0.5f64.powi(k as i32);
    let first = ((1.0 + t).powf(-0.5) * damped + grad).powf(theta + (1.0 - e) * (1.0 - theta));
    let tpow = (2f64.powi(k as i32) - 1.0 + alpha / 2.0) / (2.0 - alpha);
    let second = ((1.0 + t).powf(tpow) * damped).powf((1.0 - theta) * e);
    Ok((lhs, first * second))
}

/// `max (1+t)^{1/2} |grad psi| e^{2psi/(p+1) - psi} / sqrt(a)` over the given nodes.
pub fn gradient_bound_constant(weight: &WeightFunction, p: f64, radii: &[f64], times: &[f64]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &t in times {
        for &r in radii {
            let psi = weight.psi(t, r)?;
            let g = weight.psi_r(t, r)?.abs();
            let a = weight.spec().spatial(r);
            let q = (1.0 + t).sqrt() * g * (2.0 * psi / (p + 1.0) - psi).exp() / a.sqrt();
            worst = worst.max(q);
        }
    }
    Ok(worst)
}
