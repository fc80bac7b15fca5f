//! Random inputs and reference implementations shared by the integration
//! tests.
#![allow(dead_code)]

use rand::seq::IndexedRandom;
use rand::Rng as _;
use rsf::data::{DistanceMatrix, FeatureValue, Graph, ItemSet};
use rsf::rng::Rng;

pub fn random_graph(rng: &mut Rng, max_nodes: usize) -> Graph {
    let n = rng.random_range(2..=max_nodes);
    let density: f64 = rng.random_range(0.0..1.0);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random_bool(density) {
                edges.push((u, v));
            }
        }
    }
    Graph::new(n, edges).unwrap()
}

pub fn random_series(rng: &mut Rng, len: usize) -> Vec<f64> {
    // a coarse grid makes exact ties and repeated series likely
    (0..len)
        .map(|_| {
            if rng.random_bool(0.3) {
                rng.random_range(-3..=3) as f64
            } else {
                rng.random_range(-10.0..10.0)
            }
        })
        .collect()
}

pub fn random_set_sequence(rng: &mut Rng, max_len: usize) -> Vec<ItemSet> {
    const ITEMS: [&str; 6] = ["a", "b", "c", "d", "e", "f"];
    let len = rng.random_range(0..=max_len);
    (0..len)
        .map(|_| {
            let size = rng.random_range(1..=3);
            ItemSet::new(ITEMS.choose_multiple(rng, size).copied())
        })
        .collect()
}

/// Symmetric matrix with a zero diagonal and non-negative entries.
pub fn random_matrix(rng: &mut Rng, n: usize) -> DistanceMatrix {
    let mut rows = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = rng.random_range(0.0..5.0);
            rows[i][j] = d;
            rows[j][i] = d;
        }
    }
    DistanceMatrix::from_rows(rows).unwrap()
}

pub fn seq_len(v: &FeatureValue) -> usize {
    match v {
        FeatureValue::SetSequence(s) => s.len(),
        _ => panic!("not a set sequence"),
    }
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    eig.sort_by(f64::total_cmp);
    eig
}

/// Spectral graph distance evaluated independently of the library: Jacobi
/// eigenvalues of the Laplacian, closed-form Lorentzian normalization and a
/// fine composite Simpson rule over a long range.
pub fn ipsen_mikhailov_reference(g: &Graph, h: &Graph, gamma: f64) -> f64 {
    let modes = |g: &Graph| -> Vec<f64> {
        let n = g.node_count();
        let mut lap = vec![vec![0.0; n]; n];
        for &(u, v) in g.edges() {
            lap[u][v] -= 1.0;
            lap[v][u] -= 1.0;
            lap[u][u] += 1.0;
            lap[v][v] += 1.0;
        }
        let eig = jacobi_eigenvalues(lap);
        eig[1..].iter().map(|&l| if l.abs() < 1e-12 { 0.0 } else { l.sqrt() }).collect()
    };
    let (a, b) = (modes(g), modes(h));
    let norm = |m: &[f64]| {
        1.0 / m
            .iter()
            .map(|w| std::f64::consts::FRAC_PI_2 + (w / gamma).atan())
            .sum::<f64>()
    };
    let (ka, kb) = (norm(&a), norm(&b));
    let rho = |m: &[f64], k: f64, w: f64| k * m.iter().map(|x| gamma / ((w - x) * (w - x) + gamma * gamma)).sum::<f64>();
    let f = |w: f64| {
        let d = rho(&a, ka, w) - rho(&b, kb, w);
        d * d
    };
    // dense near the modes, coarser in the tail
    let top = a.iter().chain(&b).copied().fold(0.0, f64::max) + 2.0;
    let sq = simpson(&f, 0.0, top, 400_000) + simpson(&f, top, top + 1e3, 400_000) + simpson(&f, top + 1e3, top + 1e5, 100_000);
    sq.sqrt()
}

pub fn simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let n = intervals + intervals % 2;
    let h = (b - a) / n as f64;
    let mut sum = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + h * i as f64);
    }
    sum * h / 3.0
}
