//! Sequential minimal optimisation for the soft-margin dual.
//!
//! Second-choice heuristic follows Platt: the partner with the largest error
//! gap among unbound multipliers, then a scan over unbound multipliers, then a
//! scan over everything. Scans start at a seeded random offset.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{KernelSpec, SvmModel};
use crate::error::{Error, Result};

/// Largest training set whose Gram matrix is cached in full.
const FULL_CACHE_LIMIT: usize = 6000;
/// Hard stop on optimisation sweeps.
const MAX_SWEEPS: usize = 100_000;
const STEP_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Box constraint for text samples.
    pub c_positive: f64,
    /// Box constraint for non-text samples.
    pub c_negative: f64,
    pub kkt_tolerance: f64,
    /// Consecutive full sweeps without an update before stopping.
    pub max_passes: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig::with_c(1.0)
    }
}

impl TrainConfig {
    /// `c_negative = c`, `c_positive = 2c` to offset the 1:2 class ratio.
    pub fn with_c(c: f64) -> Self {
        TrainConfig {
            c_positive: 2.0 * c,
            c_negative: c,
            kkt_tolerance: 1e-3,
            max_passes: 10,
            seed: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.c_positive > 0.0 && self.c_negative > 0.0) {
            return Err(Error::Argument("box constraints must be positive".into()));
        }
        if !(self.kkt_tolerance > 0.0) {
            return Err(Error::Argument("kkt_tolerance must be positive".into()));
        }
        if self.max_passes == 0 {
            return Err(Error::Argument("max_passes must be at least 1".into()));
        }
        Ok(())
    }
}

/// A trained model together with the full multiplier vector.
#[derive(Debug, Clone)]
pub struct Trained {
    pub model: SvmModel,
    /// One multiplier per training sample, in input order.
    pub alphas: Vec<f64>,
    /// Box constraint applied to each sample.
    pub bounds: Vec<f64>,
    pub sweeps: usize,
}

pub fn train(
    samples: &[(Vec<f64>, i8)],
    kernel: KernelSpec,
    cfg: &TrainConfig,
) -> Result<SvmModel> {
    train_detailed(samples, kernel, cfg).map(|t| t.model)
}

pub fn train_detailed(
    samples: &[(Vec<f64>, i8)],
    kernel: KernelSpec,
    cfg: &TrainConfig,
) -> Result<Trained> {
    kernel.validate()?;
    cfg.validate()?;
    let Some((first, _)) = samples.first() else {
        return Err(Error::Training("no training samples".into()));
    };
    let dim = first.len();
    if dim == 0 {
        return Err(Error::Argument("feature vectors are empty".into()));
    }
    if let Some(i) = samples.iter().position(|(x, _)| x.len() != dim) {
        return Err(Error::Argument(format!(
            "sample {i} has length {}, expected {dim}",
            samples[i].0.len()
        )));
    }
    if let Some(i) = samples.iter().position(|&(_, y)| y != 1 && y != -1) {
        return Err(Error::Argument(format!(
            "sample {i} has label {}, expected +1 or -1",
            samples[i].1
        )));
    }
    let positives = samples.iter().filter(|s| s.1 == 1).count();
    if positives == 0 || positives == samples.len() {
        return Err(Error::Training(
            "training needs at least one sample of each class".into(),
        ));
    }

    let xs: Vec<&[f64]> = samples.iter().map(|(x, _)| x.as_slice()).collect();
    let ys: Vec<f64> = samples.iter().map(|&(_, y)| f64::from(y)).collect();
    let bounds: Vec<f64> = ys
        .iter()
        .map(|&y| {
            if y > 0.0 {
                cfg.c_positive
            } else {
                cfg.c_negative
            }
        })
        .collect();
    let mut solver = Solver::new(&xs, ys, bounds, kernel, cfg);
    solver.run();

    let mut support_vectors = Vec::new();
    let mut dual_coefs = Vec::new();
    for (i, &a) in solver.alpha.iter().enumerate() {
        if a > 0.0 {
            support_vectors.push(samples[i].0.clone());
            dual_coefs.push(a * solver.y[i]);
        }
    }
    let model = SvmModel {
        kernel,
        dim,
        support_vectors,
        dual_coefs,
        bias: solver.b,
        features: None,
    };
    model.validate()?;
    Ok(Trained {
        model,
        alphas: solver.alpha,
        bounds: solver.c,
        sweeps: solver.sweeps,
    })
}

enum Gram {
    Full(Vec<f64>),
    OnDemand,
}

struct Solver<'a> {
    x: &'a [&'a [f64]],
    y: Vec<f64>,
    c: Vec<f64>,
    alpha: Vec<f64>,
    /// `f(x_i) - y_i` for the current multipliers.
    err: Vec<f64>,
    b: f64,
    kernel: KernelSpec,
    gram: Gram,
    diag: Vec<f64>,
    tol: f64,
    max_passes: usize,
    rng: ChaCha8Rng,
    sweeps: usize,
}

impl<'a> Solver<'a> {
    fn new(
        x: &'a [&'a [f64]],
        y: Vec<f64>,
        c: Vec<f64>,
        kernel: KernelSpec,
        cfg: &TrainConfig,
    ) -> Self {
        let n = x.len();
        let gram = if n <= FULL_CACHE_LIMIT {
            let mut g = vec![0.0; n * n];
            g.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = kernel.eval(x[i], x[j]);
                }
            });
            Gram::Full(g)
        } else {
            Gram::OnDemand
        };
        let diag = (0..n).map(|i| kernel.eval(x[i], x[i])).collect();
        let err = y.iter().map(|&v| -v).collect();
        Solver {
            x,
            y,
            c,
            alpha: vec![0.0; n],
            err,
            b: 0.0,
            kernel,
            gram,
            diag,
            tol: cfg.kkt_tolerance,
            max_passes: cfg.max_passes,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            sweeps: 0,
        }
    }

    fn n(&self) -> usize {
        self.x.len()
    }

    #[inline]
    fn k(&self, i: usize, j: usize) -> f64 {
        match &self.gram {
            Gram::Full(g) => g[i * self.n() + j],
            Gram::OnDemand if i == j => self.diag[i],
            Gram::OnDemand => self.kernel.eval(self.x[i], self.x[j]),
        }
    }

    fn row(&self, i: usize) -> std::borrow::Cow<'_, [f64]> {
        let n = self.n();
        match &self.gram {
            Gram::Full(g) => std::borrow::Cow::Borrowed(&g[i * n..(i + 1) * n]),
            Gram::OnDemand => {
                std::borrow::Cow::Owned((0..n).into_par_iter().map(|j| self.k(i, j)).collect())
            }
        }
    }

    fn unbound(&self, i: usize) -> bool {
        self.alpha[i] > 0.0 && self.alpha[i] < self.c[i]
    }

    fn run(&mut self) {
        let n = self.n();
        let mut examine_all = true;
        let mut idle_full_sweeps = 0usize;
        while self.sweeps < MAX_SWEEPS {
            self.sweeps += 1;
            let mut changed = 0usize;
            if examine_all {
                for i in 0..n {
                    changed += usize::from(self.examine(i));
                }
            } else {
                for i in 0..n {
                    if self.unbound(i) {
                        changed += usize::from(self.examine(i));
                    }
                }
            }
            if examine_all {
                if changed == 0 {
                    idle_full_sweeps += 1;
                    if idle_full_sweeps >= self.max_passes {
                        break;
                    }
                } else {
                    idle_full_sweeps = 0;
                    examine_all = false;
                }
            } else if changed == 0 {
                examine_all = true;
            }
        }
    }

    fn violates_kkt(&self, i: usize) -> bool {
        let r = self.err[i] * self.y[i];
        (r < -self.tol && self.alpha[i] < self.c[i]) || (r > self.tol && self.alpha[i] > 0.0)
    }

    fn examine(&mut self, i2: usize) -> bool {
        if !self.violates_kkt(i2) {
            return false;
        }
        let n = self.n();
        let e2 = self.err[i2];

        let mut best: Option<(usize, f64)> = None;
        for i in 0..n {
            if i != i2 && self.unbound(i) {
                let gap = (self.err[i] - e2).abs();
                if best.map_or(true, |(_, g)| gap > g) {
                    best = Some((i, gap));
                }
            }
        }
        if let Some((i1, _)) = best {
            if self.take_step(i1, i2) {
                return true;
            }
        }

        let start = self.rng.gen_range(0..n);
        for k in 0..n {
            let i1 = (start + k) % n;
            if self.unbound(i1) && self.take_step(i1, i2) {
                return true;
            }
        }
        let start = self.rng.gen_range(0..n);
        for k in 0..n {
            let i1 = (start + k) % n;
            if self.take_step(i1, i2) {
                return true;
            }
        }
        false
    }

    fn take_step(&mut self, i1: usize, i2: usize) -> bool {
        if i1 == i2 {
            return false;
        }
        let (a1, a2) = (self.alpha[i1], self.alpha[i2]);
        let (y1, y2) = (self.y[i1], self.y[i2]);
        let (c1, c2) = (self.c[i1], self.c[i2]);
        let (e1, e2) = (self.err[i1], self.err[i2]);
        let s = y1 * y2;
        let (lo, hi) = if s < 0.0 {
            let k = a2 - a1;
            (k.max(0.0), c2.min(c1 + k))
        } else {
            let k = a1 + a2;
            ((k - c1).max(0.0), c2.min(k))
        };
        if hi - lo <= 0.0 {
            return false;
        }
        let k11 = self.diag[i1];
        let k22 = self.diag[i2];
        let k12 = self.k(i1, i2);
        let eta = k11 + k22 - 2.0 * k12;

        let mut new2 = if eta > 0.0 {
            (a2 + y2 * (e1 - e2) / eta).clamp(lo, hi)
        } else {
            // Objective at both ends of the feasible segment.
            let f1 = y1 * (e1 - self.b) - a1 * k11 - s * a2 * k12;
            let f2 = y2 * (e2 - self.b) - s * a1 * k12 - a2 * k22;
            let objective = |a2v: f64| {
                let a1v = a1 + s * (a2 - a2v);
                a1v * f1
                    + a2v * f2
                    + 0.5 * a1v * a1v * k11
                    + 0.5 * a2v * a2v * k22
                    + s * a2v * a1v * k12
            };
            let (ol, oh) = (objective(lo), objective(hi));
            if ol < oh - STEP_EPS {
                lo
            } else if ol > oh + STEP_EPS {
                hi
            } else {
                a2
            }
        };
        if (new2 - a2).abs() < STEP_EPS * (new2 + a2 + STEP_EPS) {
            return false;
        }
        let mut new1 = a1 + s * (a2 - new2);
        if new1 < 0.0 {
            new2 += s * new1;
            new1 = 0.0;
        } else if new1 > c1 {
            new2 += s * (new1 - c1);
            new1 = c1;
        }

        let d1 = y1 * (new1 - a1);
        let d2 = y2 * (new2 - a2);
        let b1 = self.b - e1 - d1 * k11 - d2 * k12;
        let b2 = self.b - e2 - d1 * k12 - d2 * k22;
        let new_b = if new1 > 0.0 && new1 < c1 {
            b1
        } else if new2 > 0.0 && new2 < c2 {
            b2
        } else {
            0.5 * (b1 + b2)
        };
        let db = new_b - self.b;

        let n = self.n();
        match &self.gram {
            Gram::Full(g) => {
                let (row1, row2) = (&g[i1 * n..(i1 + 1) * n], &g[i2 * n..(i2 + 1) * n]);
                for (k, e) in self.err.iter_mut().enumerate() {
                    *e += d1 * row1[k] + d2 * row2[k] + db;
                }
            }
            Gram::OnDemand => {
                let row1 = self.row(i1).into_owned();
                let row2 = self.row(i2).into_owned();
                for (k, e) in self.err.iter_mut().enumerate() {
                    *e += d1 * row1[k] + d2 * row2[k] + db;
                }
            }
        }
        self.alpha[i1] = new1;
        self.alpha[i2] = new2;
        self.b = new_b;
        true
    }
}
