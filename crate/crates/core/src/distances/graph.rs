//! Graph distances: edge-set Jaccard, degree-distribution divergence and the
//! Ipsen–Mikhailov spectral distance.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;

use nalgebra::DMatrix;

use super::quadrature::integrate;
use super::sequence::jaccard_from_counts;
use crate::data::Graph;
use crate::error::{Error, Result};

pub fn graph_jaccard(g: &Graph, h: &Graph) -> f64 {
    let (a, b) = (g.edges(), h.edges());
    let (mut i, mut j, mut common) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                common += 1;
                i += 1;
                j += 1;
            }
        }
    }
    jaccard_from_counts(common, a.len() + b.len() - common)
}

/// Empirical degree distribution: degree -> fraction of nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeHistogram(BTreeMap<usize, f64>);

impl DegreeHistogram {
    pub fn of(g: &Graph) -> Self {
        let mut counts = BTreeMap::new();
        for d in g.degrees() {
            *counts.entry(d).or_insert(0usize) += 1;
        }
        let n = g.node_count() as f64;
        DegreeHistogram(counts.into_iter().map(|(d, c)| (d, c as f64 / n)).collect())
    }

    pub fn probabilities(&self) -> &BTreeMap<usize, f64> {
        &self.0
    }

    /// Base-2 Jensen–Shannon divergence.
    pub fn divergence(&self, other: &DegreeHistogram) -> f64 {
        match (self.0.is_empty(), other.0.is_empty()) {
            (true, true) => return 0.0,
            (true, false) | (false, true) => return 1.0,
            _ => {}
        }
        let mut support: Vec<usize> = self.0.keys().chain(other.0.keys()).copied().collect();
        support.sort_unstable();
        support.dedup();
        let term = |p: f64, m: f64| if p > 0.0 { p * (p / m).log2() } else { 0.0 };
        let total: f64 = support
            .into_iter()
            .map(|d| {
                let p = self.0.get(&d).copied().unwrap_or(0.0);
                let q = other.0.get(&d).copied().unwrap_or(0.0);
                let m = 0.5 * (p + q);
                0.5 * term(p, m) + 0.5 * term(q, m)
            })
            .sum();
        total.clamp(0.0, 1.0)
    }
}

pub fn degree_divergence(g: &Graph, h: &Graph) -> f64 {
    DegreeHistogram::of(g).divergence(&DegreeHistogram::of(h))
}

const TAIL_PANELS: usize = 8;

/// Lorentzian smoothing and quadrature settings for the spectral distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralConfig {
    /// Half-width at half-maximum of each Lorentzian.
    pub gamma: f64,
    /// The integral is split at `max mode + tail_widths * gamma`; the rest
    /// of the half-line is integrated after a change of variables.
    pub tail_widths: f64,
    /// Relative tolerance of the adaptive quadrature.
    pub rel_tol: f64,
}

impl SpectralConfig {
    pub const DEFAULT: SpectralConfig = SpectralConfig {
        gamma: 0.08,
        tail_widths: 10.0,
        rel_tol: 1e-12,
    };
}

impl Default for SpectralConfig {
    fn default() -> Self {
        SpectralConfig::DEFAULT
    }
}

/// Vibrational modes `sqrt(lambda_k)` of the graph Laplacian with the single
/// trivial zero eigenvalue removed, plus the normalization of their
/// Lorentzian density over `[0, inf)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    modes: Vec<f64>,
    norm: f64,
    gamma: f64,
}

impl Spectrum {
    pub fn of(g: &Graph, gamma: f64) -> Result<Self> {
        let n = g.node_count();
        if n < 2 {
            return Err(Error::TooFewNodes(n));
        }
        let mut lap = DMatrix::<f64>::zeros(n, n);
        for &(u, v) in g.edges() {
            lap[(u, v)] -= 1.0;
            lap[(v, u)] -= 1.0;
            lap[(u, u)] += 1.0;
            lap[(v, v)] += 1.0;
        }
        let mut eig: Vec<f64> = lap.symmetric_eigenvalues().iter().copied().collect();
        eig.sort_by(f64::total_cmp);
        let modes: Vec<f64> = eig[1..].iter().map(|l| l.abs().sqrt()).collect();
        let mass: f64 = modes.iter().map(|w| FRAC_PI_2 + (w / gamma).atan()).sum();
        Ok(Spectrum {
            modes,
            norm: 1.0 / mass,
            gamma,
        })
    }

    pub fn modes(&self) -> &[f64] {
        &self.modes
    }

    pub fn density(&self, w: f64) -> f64 {
        let g = self.gamma;
        self.norm * self.modes.iter().map(|m| g / ((w - m) * (w - m) + g * g)).sum::<f64>()
    }

    fn max_mode(&self) -> f64 {
        self.modes.iter().copied().fold(0.0, f64::max)
    }

    /// L2 distance between the two spectral densities over `[0, inf)`.
    pub fn distance(&self, other: &Spectrum, cfg: &SpectralConfig) -> f64 {
        if self.modes == other.modes {
            return 0.0;
        }
        let upper = self.max_mode().max(other.max_mode()) + cfg.tail_widths * cfg.gamma;
        let panels = (upper / cfg.gamma).ceil() as usize;
        let sq_diff = |w: f64| {
            let d = self.density(w) - other.density(w);
            d * d
        };
        let body = integrate(sq_diff, 0.0, upper, panels, cfg.rel_tol);
        // w = upper + u / (1 - u) maps the tail onto [0, 1)
        let tail = integrate(
            |u| {
                let s = 1.0 - u;
                sq_diff(upper + u / s) / (s * s)
            },
            0.0,
            1.0,
            TAIL_PANELS,
            cfg.rel_tol,
        );
        (body + tail).max(0.0).sqrt()
    }
}

pub fn ipsen_mikhailov(g: &Graph, h: &Graph, cfg: &SpectralConfig) -> Result<f64> {
    let a = Spectrum::of(g, cfg.gamma)?;
    let b = Spectrum::of(h, cfg.gamma)?;
    Ok(a.distance(&b, cfg))
}
