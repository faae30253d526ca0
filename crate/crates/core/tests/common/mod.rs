#![allow(dead_code)]

use std::collections::BTreeMap;

use fgalgebra::folded::{parse_folded, FrameNormalizer};
use fgalgebra::{FlameGraph, Stack, Unit};
use proptest::prelude::*;
use rand::Rng;

pub const FRAMES: [&str; 3] = ["a", "b", "c"];
pub const MAX_DEPTH: usize = 4;
pub const MAX_SUPPORT: usize = 64;

pub fn st(s: &str) -> Stack {
    s.parse().unwrap()
}

pub fn graph(text: &str) -> FlameGraph {
    parse_folded(text, &FrameNormalizer::Identity, Unit::Samples).unwrap()
}

fn stack_from_indices(idx: &[usize]) -> Stack {
    let labels: Vec<&str> = idx.iter().map(|i| FRAMES[*i]).collect();
    st(&labels.join(";"))
}

/// Stacks over a 3-letter alphabet with depth <= 4 (120 distinct stacks),
/// so random pairs overlap often.
pub fn stack_strategy() -> impl Strategy<Value = Stack> {
    prop::collection::vec(0..FRAMES.len(), 1..=MAX_DEPTH).prop_map(|v| stack_from_indices(&v))
}

pub fn graph_strategy(max_support: usize) -> impl Strategy<Value = FlameGraph> {
    prop::collection::btree_map(stack_strategy(), 1e-3f64..=1e6, 0..=max_support)
        .prop_map(|m| FlameGraph::from_entries(Unit::Samples, m).unwrap())
}

/// Same distribution as [`graph_strategy`], drawn from a plain RNG.
pub fn random_graph(rng: &mut impl Rng, max_support: usize) -> FlameGraph {
    let size = rng.random_range(0..=max_support);
    let mut m = BTreeMap::new();
    for _ in 0..size {
        let depth = rng.random_range(1..=MAX_DEPTH);
        let idx: Vec<usize> = (0..depth)
            .map(|_| rng.random_range(0..FRAMES.len()))
            .collect();
        let v: f64 = rng.random_range(1e-3..=1e6);
        m.insert(stack_from_indices(&idx), v);
    }
    FlameGraph::from_entries(Unit::Samples, m).unwrap()
}

/// Plain map view, used by the brute-force oracles.
pub fn as_map(g: &FlameGraph) -> BTreeMap<String, f64> {
    g.iter().map(|(s, v)| (s.to_string(), *v)).collect()
}

/// Runs over `stacks`, each stack drawn with mean `means[k]` and uniform
/// relative jitter `noise`; a stack is dropped from a run with
/// probability `drop`.
pub fn random_runs(
    rng: &mut impl Rng,
    n: usize,
    stacks: &[Stack],
    means: &[f64],
    noise: f64,
    drop: f64,
) -> Vec<FlameGraph> {
    (0..n)
        .map(|_| {
            let mut m = BTreeMap::new();
            for (s, mu) in stacks.iter().zip(means) {
                if rng.random_bool(drop) {
                    continue;
                }
                let j: f64 = rng.random_range(-noise..=noise);
                m.insert(s.clone(), mu * (1.0 + j));
            }
            FlameGraph::from_entries(Unit::Samples, m).unwrap()
        })
        .collect()
}

fn minor(a: &[Vec<f64>], row: usize, col: usize) -> Vec<Vec<f64>> {
    a.iter()
        .enumerate()
        .filter(|(i, _)| *i != row)
        .map(|(_, r)| {
            r.iter()
                .enumerate()
                .filter(|(j, _)| *j != col)
                .map(|(_, v)| *v)
                .collect()
        })
        .collect()
}

/// Laplace expansion along the first row.
pub fn det(a: &[Vec<f64>]) -> f64 {
    match a.len() {
        0 => 1.0,
        1 => a[0][0],
        n => (0..n)
            .map(|j| {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                sign * a[0][j] * det(&minor(a, 0, j))
            })
            .sum(),
    }
}

/// Inverse through the adjugate; only sensible for tiny matrices.
pub fn cofactor_inverse(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let d = det(a);
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                    sign * det(&minor(a, j, i)) / d
                })
                .collect()
        })
        .collect()
}

/// Textbook two-pass pooled covariance of two samples of coordinate rows.
pub fn naive_pooled_cov(x1: &[Vec<f64>], x2: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let p = x1[0].len();
    let mean = |x: &[Vec<f64>]| -> Vec<f64> {
        (0..p)
            .map(|j| x.iter().map(|r| r[j]).sum::<f64>() / x.len() as f64)
            .collect()
    };
    let (m1, m2) = (mean(x1), mean(x2));
    let dof = (x1.len() + x2.len() - 2) as f64;
    let mut s = vec![vec![0.0; p]; p];
    for (x, m) in [(x1, &m1), (x2, &m2)] {
        for r in x {
            for i in 0..p {
                for j in 0..p {
                    s[i][j] += (r[i] - m[i]) * (r[j] - m[j]) / dof;
                }
            }
        }
    }
    s
}

/// Unnormalized F density after `x = u²` and `u = t / (1 - t)`, as a
/// function of `t ∈ [0, 1)`. Both substitutions keep the integrand bounded
/// for `d1 >= 1, d2 >= 2`.
fn f_integrand(t: f64, d1: f64, d2: f64) -> f64 {
    if t >= 1.0 {
        return 0.0;
    }
    let u = t / (1.0 - t);
    let du = 1.0 / ((1.0 - t) * (1.0 - t));
    let x = u * u;
    let body = if d1 == 1.0 { 1.0 } else { u.powf(d1 - 1.0) };
    2.0 * body * (1.0 + d1 * x / d2).powf(-(d1 + d2) / 2.0) * du
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// F CDF by numerical integration of the density, normalized by the
/// integral over the whole half-line. Independent of any gamma or beta code.
pub fn quadrature_f_cdf(x: f64, d1: f64, d2: f64) -> f64 {
    partial_integral(x, d1, d2) / total_integral(d1, d2)
}

const QUAD_POINTS: usize = 20_000;

fn total_integral(d1: f64, d2: f64) -> f64 {
    simpson(|t| f_integrand(t, d1, d2), 0.0, 1.0, QUAD_POINTS)
}

fn partial_integral(x: f64, d1: f64, d2: f64) -> f64 {
    let u = x.sqrt();
    simpson(|t| f_integrand(t, d1, d2), 0.0, u / (1.0 + u), QUAD_POINTS)
}

/// Quantile of [`quadrature_f_cdf`] by bisection.
pub fn quadrature_f_quantile(prob: f64, d1: f64, d2: f64) -> f64 {
    let target = prob * total_integral(d1, d2);
    let (mut lo, mut hi) = (0.0, 1.0);
    while partial_integral(hi, d1, d2) < target {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if partial_integral(mid, d1, d2) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
