//! Weighted energies along solver trajectories and the running supremum `M(t)`.
//!
//! `e^{2 psi}` overflows `f64` far outside the numerical support, so every weighted
//! integral is accumulated as a log-sum-exp and stored as a natural logarithm.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::problem::DampingSpec;
use crate::quadrature::{radial_power, simpson_weights, sphere_area};
use crate::solver::{RadialGrid, StateView};
use crate::weights::WeightFunction;

/// Natural logs of `E_w = int e^{2psi}(u_t^2 + |grad u|^2)`, `V_w = int e^{2psi} a u^2`
/// and `F_w = int e^{2psi} |u|^{p+1}/(p+1)`. Zero integrals are `-inf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightedEnergies {
    pub log_e: f64,
    pub log_v: f64,
    pub log_f: f64,
}

impl WeightedEnergies {
    pub fn e(&self) -> f64 {
        self.log_e.exp()
    }

    pub fn v(&self) -> f64 {
        self.log_v.exp()
    }

    pub fn f(&self) -> f64 {
        self.log_f.exp()
    }
}

#[derive(Default)]
struct LogSum {
    terms: Vec<f64>,
}

impl LogSum {
    fn push(&mut self, log_weight: f64, value: f64) {
        if value > 0.0 {
            self.terms.push(log_weight + value.ln());
        }
    }

    fn finish(&self) -> f64 {
        let m = self.terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if m == f64::NEG_INFINITY {
            return m;
        }
        m + self.terms.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
    }
}

/// Per-node data of a weight on a fixed solver grid.
#[derive(Debug, Clone)]
pub struct WeightCache {
    /// `mu B(r_j)`.
    scaled_bracket: Vec<f64>,
    spatial: Vec<f64>,
    quad: Vec<f64>,
    dr: f64,
    beta: f64,
}

impl WeightCache {
    /// `beta` selects `psi^{(beta)} = mu B(r) (1+beta) / (1+t)^{1+beta}`; `beta = 0` is `psi`.
    pub fn new(weight: &WeightFunction, grid: &RadialGrid, beta: f64) -> Result<Self> {
        if grid.r_max() > weight.r_max() {
            return Err(Error::OutOfRange {
                r: grid.r_max(),
                r_max: weight.r_max(),
            });
        }
        if !(beta > -1.0 && beta <= 1.0) {
            return Err(invalid("beta", format!("must lie in (-1, 1], got {beta}")));
        }
        let mu = weight.params().mu;
        let nodes = grid.nodes();
        let scaled_bracket = nodes.iter().map(|&r| mu * weight.bracket_unchecked(r)).collect();
        let spatial = nodes.iter().map(|&r| weight.spec().spatial(r)).collect();
        let omega = sphere_area(grid.dim);
        let quad = simpson_weights(grid.n_r, grid.dr)
            .into_iter()
            .zip(&nodes)
            .map(|(w, &r)| w * omega * radial_power(r, grid.dim))
            .collect();
        Ok(Self {
            scaled_bracket,
            spatial,
            quad,
            dr: grid.dr,
            beta,
        })
    }

    fn psi(&self, t: f64, j: usize) -> f64 {
        self.scaled_bracket[j] * (1.0 + self.beta) / (1.0 + t).powf(1.0 + self.beta)
    }

    pub fn energies(&self, view: &StateView<'_>, p: f64) -> WeightedEnergies {
        let u = view.u_curr;
        let up = view.u_prev;
        let n = u.len();
        let (mut e, mut v, mut f) = (LogSum::default(), LogSum::default(), LogSum::default());
        for j in 0..n {
            if u[j] == 0.0 && up[j] == 0.0 {
                continue;
            }
            if self.quad[j] <= 0.0 {
                continue;
            }
            let lw = 2.0 * self.psi(view.t, j) + self.quad[j].ln();
            let ut = (u[j] - up[j]) / view.dt;
            let grad = if j == 0 {
                0.0
            } else if j + 1 == n {
                (u[j] - u[j - 1]) / self.dr
            } else {
                (u[j + 1] - u[j - 1]) / (2.0 * self.dr)
            };
            e.push(lw, ut * ut + grad * grad);
            v.push(lw, self.spatial[j] * u[j] * u[j]);
            f.push(lw, u[j].abs().powf(p + 1.0) / (p + 1.0));
        }
        WeightedEnergies {
            log_e: e.finish(),
            log_v: v.finish(),
            log_f: f.finish(),
        }
    }
}

/// Weighted energies of one state. Builds a cache; use [`WeightCache`] along a run.
pub fn weighted_energies(
    view: &StateView<'_>,
    weight: &WeightFunction,
    spec: &DampingSpec,
    p: f64,
) -> Result<WeightedEnergies> {
    if spec.a0 != weight.spec().a0 || spec.alpha != weight.spec().alpha {
        return Err(invalid("spec", "damping differs from the one the weight was calibrated for"));
    }
    let cache = WeightCache::new(weight, view.grid, 0.0)?;
    Ok(cache.energies(view, p))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyRecord {
    pub t: f64,
    pub energies: WeightedEnergies,
}

/// Exponent convention of `M^{(beta)}` for `beta != 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MConvention {
    /// `(N-alpha)(1+beta)/(2(2-alpha)) + beta + 1 - delta0` and `(N-alpha)(1+beta)/(2(2-alpha)) - delta0`.
    Printed,
    /// `(1+beta)((N-alpha)/(2-alpha) + 1) - delta0` and `(1+beta)(N-alpha)/(2-alpha) - delta0`,
    /// which reduce to the `beta = 0` exponents.
    Consistent,
}

impl MConvention {
    pub fn name(&self) -> &'static str {
        match self {
            MConvention::Printed => "printed",
            MConvention::Consistent => "consistent",
        }
    }
}

/// Powers `(a_E, a_V)` multiplying `E_w` and `V_w` inside `M`.
pub fn m_exponents(dim: usize, alpha: f64, beta: f64, delta0: f64, convention: MConvention) -> (f64, f64) {
    let rate = (dim as f64 - alpha) / (2.0 - alpha);
    if beta == 0.0 {
        return (rate + 1.0 - delta0, rate - delta0);
    }
    match convention {
        MConvention::Printed => {
            let r = rate * (1.0 + beta) / 2.0;
            (r + beta + 1.0 - delta0, r - delta0)
        }
        MConvention::Consistent => {
            let r = rate * (1.0 + beta);
            (r + 1.0 + beta - delta0, r - delta0)
        }
    }
}

/// `log M(t_i) = log max_{tau <= t_i} [ (s+tau)^{a_E} E_w + (s+tau)^{a_V} V_w ]`.
pub fn m_of_t(records: &[EnergyRecord], exponents: (f64, f64), shift: f64) -> Vec<(f64, f64)> {
    let mut running = f64::NEG_INFINITY;
    records
        .iter()
        .map(|rec| {
            let ls = (shift + rec.t).ln();
            let a = exponents.0 * ls + rec.energies.log_e;
            let b = exponents.1 * ls + rec.energies.log_v;
            let m = log_add(a, b);
            if m > running {
                running = m;
            }
            (rec.t, running)
        })
        .collect()
}

fn log_add(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Collects weighted energies at recorded times of one run.
#[derive(Debug, Clone)]
pub struct EnergyTracker {
    cache: WeightCache,
    p: f64,
    pub t0: f64,
    pub delta0: f64,
    records: Vec<EnergyRecord>,
}

impl EnergyTracker {
    pub fn new(weight: &WeightFunction, grid: &RadialGrid, beta: f64, p: f64) -> Result<Self> {
        Ok(Self {
            cache: WeightCache::new(weight, grid, beta)?,
            p,
            t0: weight.params().ladder.t0,
            delta0: weight.params().delta0,
            records: Vec::new(),
        })
    }

    pub fn observe(&mut self, view: &StateView<'_>) -> WeightedEnergies {
        let e = self.cache.energies(view, self.p);
        self.records.push(EnergyRecord { t: view.t, energies: e });
        e
    }

    pub fn records(&self) -> &[EnergyRecord] {
        &self.records
    }

    /// `M` with the `(t0 + tau)` shift.
    pub fn m_series(&self, exponents: (f64, f64)) -> Vec<(f64, f64)> {
        m_of_t(&self.records, exponents, self.t0)
    }

    /// `M` with the `(1 + tau)` shift.
    pub fn m_series_unit_shift(&self, exponents: (f64, f64)) -> Vec<(f64, f64)> {
        m_of_t(&self.records, exponents, 1.0)
    }
}

/// Least-squares slope of `log value` against `log(1+t)` over the trailing `window`
/// fraction of the series.
pub fn fit_decay_rate(series: &[(f64, f64)], window: f64) -> Result<f64> {
    const MIN_POINTS: usize = 8;
    if !(window > 0.0 && window <= 1.0) {
        return Err(invalid("window", "must lie in (0, 1]"));
    }
    let take = ((series.len() as f64) * window).ceil() as usize;
    let tail = &series[series.len() - take.min(series.len())..];
    if tail.len() < MIN_POINTS {
        return Err(Error::TooFewPoints {
            needed: MIN_POINTS,
            found: tail.len(),
        });
    }
    if let Some(&(t, v)) = tail.iter().find(|(_, v)| !(*v > 0.0)) {
        return Err(Error::NonPositive { t, value: v });
    }
    let pts: Vec<(f64, f64)> = tail.iter().map(|&(t, v)| ((1.0 + t).ln(), v.ln())).collect();
    Ok(least_squares_slope(&pts))
}

pub(crate) fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// Half of `min((N-alpha)/(2-alpha), 2/(2-alpha) (N - alpha - 2/(p-1)))`; requires `p > p_c`.
pub fn default_delta0(dim: usize, alpha: f64, p: f64) -> Result<f64> {
    let rate = (dim as f64 - alpha) / (2.0 - alpha);
    let gap = 2.0 / (2.0 - alpha) * (dim as f64 - alpha - 2.0 / (p - 1.0));
    if !(gap > 0.0) {
        return Err(invalid(
            "p",
            format!("weighted decay offset needs p above the critical exponent, got p = {p}"),
        ));
    }
    Ok(0.5 * rate.min(gap))
}
