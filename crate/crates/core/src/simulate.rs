//! Sampling from an equilibrium, a discretized IPFP oracle that solves the
//! matching problem without any Gaussian assumption, and a bootstrap-calibrated energy test of
//! the Gaussian specification.
//!
//! Every random draw comes from a `ChaCha20Rng` seeded with a `u64`; replication
//! `r` of an experiment uses stream `r` of the same seed (see [`replication_rng`]),
//! so results do not depend on how replications are scheduled.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::identification::{empirical_moments, estimate_from_moments, fitted_model};
use crate::matcalc::{Matrix, SymmetricMatrix, Vector};
use crate::model::{Equilibrium, MatchedSample, MatchingModel};
use crate::policy::NumericPolicy;

/// Generator for replication `r` under `seed`.
pub fn replication_rng(seed: u64, r: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(r);
    rng
}

/// A factor `L` with `L L^T = cov`: Cholesky when positive definite, otherwise
/// the eigen factor with clamped eigenvalues.
pub fn covariance_factor(cov: &SymmetricMatrix, policy: &NumericPolicy) -> Result<Matrix> {
    if let Some(ch) = cov.as_matrix().clone().cholesky() {
        return Ok(ch.l());
    }
    let root = crate::matcalc::sym_sqrt(cov, policy)?;
    Ok(root.into_inner())
}

/// `n` i.i.d. matched pairs from the equilibrium `N(0, joint_cov)`.
pub fn sample_joint(eq: &Equilibrium, n: usize, seed: u64) -> Result<MatchedSample> {
    sample_joint_with(eq, n, &mut replication_rng(seed, 0))
}

pub fn sample_joint_with<R: Rng>(eq: &Equilibrium, n: usize, rng: &mut R) -> Result<MatchedSample> {
    let (m, k) = (eq.m(), eq.m() + eq.n());
    let l = covariance_factor(&eq.joint_cov, &NumericPolicy::default())?;
    let z = Matrix::from_fn(k, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let draws = (l * z).transpose();
    MatchedSample::new(
        draws.columns(0, m).into_owned(),
        draws.columns(m, k - m).into_owned(),
        None,
    )
}

/// Finite approximation of the two Gaussian populations on tensor grids.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizedMarket {
    /// Worker types, one per row.
    pub x_points: Matrix,
    /// Firm types, one per row.
    pub y_points: Matrix,
    /// Worker masses, summing to one.
    pub p: Vector,
    /// Firm masses, summing to one.
    pub q: Vector,
    /// `s_ij = x_i^T A y_j`.
    pub surplus: Matrix,
    /// Gaussian mass captured by the worker grid before renormalization.
    pub x_mass: f64,
    pub y_mass: f64,
}

impl DiscretizedMarket {
    /// A market from explicit support points and masses (each normalized to sum to one).
    pub fn new(x_points: Matrix, y_points: Matrix, p: Vector, q: Vector, affinity: &Matrix) -> Result<Self> {
        if x_points.nrows() != p.len() || y_points.nrows() != q.len() {
            return Err(Error::dim("DiscretizedMarket", "one mass per support point", format!("{} and {}", p.len(), q.len())));
        }
        if affinity.shape() != (x_points.ncols(), y_points.ncols()) {
            return Err(Error::dim(
                "DiscretizedMarket affinity",
                format!("{}x{}", x_points.ncols(), y_points.ncols()),
                format!("{}x{}", affinity.nrows(), affinity.ncols()),
            ));
        }
        for w in [&p, &q] {
            if w.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(Error::InvalidConfig("masses must be positive and finite".into()));
            }
        }
        let (ps, qs) = (p.sum(), q.sum());
        let surplus = &x_points * affinity * y_points.transpose();
        Ok(Self {
            x_points,
            y_points,
            p: p / ps,
            q: q / qs,
            surplus,
            x_mass: 1.0,
            y_mass: 1.0,
        })
    }

    pub fn x_len(&self) -> usize {
        self.p.len()
    }

    pub fn y_len(&self) -> usize {
        self.q.len()
    }
}

fn gaussian_grid(cov: &SymmetricMatrix, points: usize, truncation: f64) -> Result<(Matrix, Vector, f64)> {
    let d = cov.order();
    let inv = cov.inverse()?;
    let log_norm = -0.5 * (d as f64 * (2.0 * std::f64::consts::PI).ln() + cov.log_det()?);
    let axes: Vec<Vec<f64>> = (0..d)
        .map(|i| {
            let half = truncation * cov[(i, i)].sqrt();
            (0..points)
                .map(|k| -half + 2.0 * half * k as f64 / (points - 1) as f64)
                .collect()
        })
        .collect();
    let cell: f64 = axes.iter().map(|a| a[1] - a[0]).product();
    let total = points.pow(d as u32);
    let mut grid = Matrix::zeros(total, d);
    let mut w = Vector::zeros(total);
    for idx in 0..total {
        let mut rem = idx;
        let mut v = Vector::zeros(d);
        for (i, axis) in axes.iter().enumerate() {
            v[i] = axis[rem % points];
            rem /= points;
        }
        grid.set_row(idx, &v.transpose());
        w[idx] = (log_norm - 0.5 * inv.quad_form(&v)).exp() * cell;
    }
    let mass = w.sum();
    Ok((grid, w / mass, mass))
}

/// Tensor grids of `points_per_dim` equally spaced points per coordinate over
/// `±truncation` marginal standard deviations, weighted by the Gaussian density.
pub fn discretize(model: &MatchingModel, points_per_dim: usize, truncation: f64) -> Result<DiscretizedMarket> {
    let (m, n) = (model.m(), model.n());
    if m > 2 || n > 2 {
        return Err(Error::DimensionTooLarge { m, n });
    }
    if points_per_dim < 21 {
        return Err(Error::InvalidConfig(format!("points per dimension must be at least 21, got {points_per_dim}")));
    }
    if !(truncation.is_finite() && truncation > 0.0) {
        return Err(Error::InvalidConfig(format!("truncation must be positive, got {truncation}")));
    }
    let (xg, p, x_mass) = gaussian_grid(&model.sigma_x, points_per_dim, truncation)?;
    let (yg, q, y_mass) = gaussian_grid(&model.sigma_y, points_per_dim, truncation)?;
    let surplus = &xg * &model.affinity * yg.transpose();
    Ok(DiscretizedMarket {
        x_points: xg,
        y_points: yg,
        p,
        q,
        surplus,
        x_mass,
        y_mass,
    })
}

/// An entropic optimal coupling `pi_ij = p_i q_j exp((s_ij - a_i - b_j) / sigma)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    pub pi: Matrix,
    /// Worker potentials.
    pub a: Vector,
    /// Firm potentials.
    pub b: Vector,
    pub sigma: f64,
    pub iterations: usize,
    /// Largest absolute row-marginal error, per iteration.
    pub residual_history: Vec<f64>,
}

impl Coupling {
    /// A coupling given directly as a plan; potentials are left at zero.
    pub fn from_plan(pi: Matrix) -> Self {
        let (r, c) = pi.shape();
        Self {
            pi,
            a: Vector::zeros(r),
            b: Vector::zeros(c),
            sigma: f64::NAN,
            iterations: 0,
            residual_history: Vec::new(),
        }
    }

    /// `ln pi_ij` from the potentials, accurate where `pi_ij` itself underflows.
    pub fn log_pi(&self, market: &DiscretizedMarket, i: usize, j: usize) -> f64 {
        market.p[i].ln() + market.q[j].ln() + (market.surplus[(i, j)] - self.a[i] - self.b[j]) / self.sigma
    }

    pub fn final_residual(&self) -> f64 {
        self.residual_history.last().copied().unwrap_or(f64::NAN)
    }

    pub fn row_sums(&self) -> Vector {
        self.pi.column_sum()
    }

    pub fn col_sums(&self) -> Vector {
        self.pi.row_sum().transpose()
    }
}

fn log_sum_exp(it: impl Iterator<Item = f64> + Clone) -> f64 {
    let mx = it.clone().fold(f64::NEG_INFINITY, f64::max);
    if !mx.is_finite() {
        return mx;
    }
    mx + it.map(|v| (v - mx).exp()).sum::<f64>().ln()
}

struct Sinkhorn<'a> {
    market: &'a DiscretizedMarket,
    sigma: f64,
    a: Vector,
    b: Vector,
    u: Vector,
    v: Vector,
    kernel: Matrix,
}

impl<'a> Sinkhorn<'a> {
    const ABSORB: f64 = 30.0;

    fn new(market: &'a DiscretizedMarket, sigma: f64) -> Self {
        let mut s = Self {
            market,
            sigma,
            a: Vector::zeros(market.x_len()),
            b: Vector::zeros(market.y_len()),
            u: Vector::from_element(market.x_len(), 1.0),
            v: Vector::from_element(market.y_len(), 1.0),
            kernel: Matrix::zeros(0, 0),
        };
        s.log_update_a();
        s.log_update_b();
        s.rebuild_kernel();
        s
    }

    /// Exact row update in the log domain: `a_i = sigma ln sum_j q_j exp((s_ij - b_j) / sigma)`.
    fn log_update_a(&mut self) {
        let (mk, sg) = (self.market, self.sigma);
        for i in 0..mk.x_len() {
            let it = (0..mk.y_len()).map(|j| mk.q[j].ln() + (mk.surplus[(i, j)] - self.b[j]) / sg);
            self.a[i] = sg * log_sum_exp(it);
        }
    }

    fn log_update_b(&mut self) {
        let (mk, sg) = (self.market, self.sigma);
        for j in 0..mk.y_len() {
            let it = (0..mk.x_len()).map(|i| mk.p[i].ln() + (mk.surplus[(i, j)] - self.a[i]) / sg);
            self.b[j] = sg * log_sum_exp(it);
        }
    }

    fn absorb(&mut self) {
        for (a, u) in self.a.iter_mut().zip(self.u.iter_mut()) {
            *a -= self.sigma * u.ln();
            *u = 1.0;
        }
        for (b, v) in self.b.iter_mut().zip(self.v.iter_mut()) {
            *b -= self.sigma * v.ln();
            *v = 1.0;
        }
    }

    fn rebuild_kernel(&mut self) {
        let mk = self.market;
        self.kernel = Matrix::from_fn(mk.x_len(), mk.y_len(), |i, j| {
            ((mk.surplus[(i, j)] - self.a[i] - self.b[j]) / self.sigma).exp()
        });
    }

    fn needs_absorb(&self) -> bool {
        self.u.iter().chain(self.v.iter()).any(|w| !(w.ln().abs() < Self::ABSORB))
    }

    /// One full sweep: exact row update, then exact column update.
    fn sweep(&mut self) {
        let mk = self.market;
        let t = &self.kernel * mk.q.component_mul(&self.v);
        if t.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            self.absorb();
            self.log_update_a();
            self.log_update_b();
            self.rebuild_kernel();
            return;
        }
        self.u = t.map(|x| 1.0 / x);
        let r = self.kernel.tr_mul(&mk.p.component_mul(&self.u));
        if r.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            self.absorb();
            self.log_update_b();
            self.rebuild_kernel();
            return;
        }
        self.v = r.map(|x| 1.0 / x);
        if self.needs_absorb() {
            self.absorb();
            self.rebuild_kernel();
        }
    }

    fn row_residual(&self) -> f64 {
        let mk = self.market;
        let t = &self.kernel * mk.q.component_mul(&self.v);
        (0..mk.x_len())
            .map(|i| (mk.p[i] * (self.u[i] * t[i] - 1.0)).abs())
            .fold(0.0, f64::max)
    }

    fn into_coupling(mut self, iterations: usize, history: Vec<f64>) -> Coupling {
        self.absorb();
        let mk = self.market;
        let pi = Matrix::from_fn(mk.x_len(), mk.y_len(), |i, j| {
            mk.p[i] * mk.q[j] * ((mk.surplus[(i, j)] - self.a[i] - self.b[j]) / self.sigma).exp()
        });
        Coupling {
            pi,
            a: self.a,
            b: self.b,
            sigma: self.sigma,
            iterations,
            residual_history: history,
        }
    }
}

/// Iterative proportional fitting for the entropic matching problem on a discretized market.
///
/// Runs until the largest absolute row-marginal error is below `tol` (column
/// marginals are exact after each sweep). On failure the error carries the last coupling.
pub fn ipfp_solve(market: &DiscretizedMarket, sigma: f64, tol: f64, max_iter: usize) -> Result<Coupling> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::InvalidConfig(format!("sigma must be positive, got {sigma}")));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidConfig(format!("tolerance must be positive, got {tol}")));
    }
    let mut state = Sinkhorn::new(market, sigma);
    let mut history = Vec::new();
    for it in 1..=max_iter {
        state.sweep();
        let residual = state.row_residual();
        history.push(residual);
        if residual < tol {
            log::debug!("IPFP converged after {it} sweeps (residual {residual:e})");
            return Ok(state.into_coupling(it, history));
        }
    }
    let residual = history.last().copied().unwrap_or(f64::INFINITY);
    Err(Error::MaxIterExceeded {
        iterations: max_iter,
        residual,
        best: Box::new(state.into_coupling(max_iter, history)),
    })
}

/// `E_pi[X Y^T] - E_pi[X] E_pi[Y]^T`.
pub fn coupling_cross_cov(market: &DiscretizedMarket, coupling: &Coupling) -> Matrix {
    let pi = &coupling.pi;
    let mx = market.x_points.tr_mul(&pi.column_sum());
    let my = market.y_points.tr_mul(&pi.row_sum().transpose());
    market.x_points.tr_mul(&(pi * &market.y_points)) - mx * my.transpose()
}

/// Energy statistic used by [`overid_test`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum EnergyStatistic {
    /// Exact pairwise distances; `O(N^2)` per replication.
    Exact,
    /// Average of one-dimensional energy statistics over fixed projection
    /// directions, rescaled to estimate the multivariate one; `O(K N)` per permutation after one sort.
    Projected { directions: usize },
}

impl Default for EnergyStatistic {
    fn default() -> Self {
        EnergyStatistic::Projected { directions: 64 }
    }
}

/// How the null distribution of the energy statistic is approximated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Calibration {
    /// Parametric bootstrap: draw a sample from the fitted equilibrium,
    /// re-estimate, simulate from the refit and recompute the statistic.
    /// Accounts for the estimation step, so the size is close to nominal.
    #[default]
    Bootstrap,
    /// Shuffle the data/simulation labels. Cheap, but conservative because
    /// the simulation comes from a model fitted to the same data.
    Permutation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OverIdConfig {
    pub n_sim: usize,
    /// Bootstrap replications or label permutations.
    pub replications: usize,
    pub seed: u64,
    pub statistic: EnergyStatistic,
    pub calibration: Calibration,
}

impl Default for OverIdConfig {
    fn default() -> Self {
        Self {
            n_sim: 0,
            replications: 199,
            seed: 0,
            statistic: EnergyStatistic::default(),
            calibration: Calibration::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverIdResult {
    /// `N M / (N + M)` times the energy distance between data and simulated draws.
    pub statistic: f64,
    pub p_value: f64,
    pub replications: usize,
    pub calibration: Calibration,
    pub n_sim: usize,
}

/// Specification test of the Gaussian model: estimate `A`, simulate the
/// fitted equilibrium, and compare the demeaned data with the simulation by energy distance.
///
/// `n_sim = 0` simulates as many pairs as there are observations. The data
/// draw uses stream 0 of `seed`; calibration replicate `r` uses stream `r + 1`.
pub fn overid_test(sample: &MatchedSample, config: &OverIdConfig) -> Result<OverIdResult> {
    if config.replications == 0 {
        return Err(Error::InvalidConfig("the number of replications must be positive".into()));
    }
    if let EnergyStatistic::Projected { directions: 0 } = config.statistic {
        return Err(Error::InvalidConfig("projection count must be positive".into()));
    }
    let eq = fit(sample)?;
    let n_data = sample.n_obs();
    let n_sim = if config.n_sim == 0 { n_data } else { config.n_sim };
    let sim = sample_joint_with(&eq, n_sim, &mut replication_rng(config.seed, 0))?;
    let pooled = pool(&stacked(sample, true), &stacked(&sim, false));
    let mut labels: Vec<bool> = (0..n_data + n_sim).map(|r| r < n_data).collect();
    let observed = EnergyEngine::new(&pooled, config.statistic).statistic(&labels, n_data, n_sim);

    let mut exceed = 0usize;
    match config.calibration {
        Calibration::Permutation => {
            let mut engine = EnergyEngine::new(&pooled, config.statistic);
            let mut rng = replication_rng(config.seed, 1);
            for _ in 0..config.replications {
                labels.shuffle(&mut rng);
                if engine.statistic(&labels, n_data, n_sim) >= observed {
                    exceed += 1;
                }
            }
        }
        Calibration::Bootstrap => {
            for r in 0..config.replications {
                let mut rng = replication_rng(config.seed, r as u64 + 1);
                let boot = sample_joint_with(&eq, n_data, &mut rng)?;
                let refit = fit(&boot)?;
                let boot_sim = sample_joint_with(&refit, n_sim, &mut rng)?;
                if split_energy(&stacked(&boot, true), &stacked(&boot_sim, false), config.statistic) >= observed {
                    exceed += 1;
                }
            }
        }
    }
    Ok(OverIdResult {
        statistic: observed,
        p_value: (1 + exceed) as f64 / (1 + config.replications) as f64,
        replications: config.replications,
        calibration: config.calibration,
        n_sim,
    })
}

fn fit(sample: &MatchedSample) -> Result<Equilibrium> {
    let moments = empirical_moments(sample)?;
    let est = estimate_from_moments(&moments)?;
    crate::equilibrium::solve(&fitted_model(&est, &moments)?)
}

fn pool(top: &Matrix, bottom: &Matrix) -> Matrix {
    let n_top = top.nrows();
    Matrix::from_fn(n_top + bottom.nrows(), top.ncols(), |r, c| {
        if r < n_top {
            top[(r, c)]
        } else {
            bottom[(r - n_top, c)]
        }
    })
}

fn stacked(sample: &MatchedSample, demean: bool) -> Matrix {
    let (n_obs, m, n) = (sample.n_obs(), sample.m(), sample.n());
    let mut z = Matrix::zeros(n_obs, m + n);
    z.view_mut((0, 0), (n_obs, m)).copy_from(&sample.x);
    z.view_mut((0, m), (n_obs, n)).copy_from(&sample.y);
    if demean {
        for mut col in z.column_iter_mut() {
            let mean = col.mean();
            col.add_scalar_mut(-mean);
        }
    }
    z
}

/// `E|theta^T z|` over the unit sphere in `d` dimensions is `|z| / c_d`.
fn sphere_constant(d: usize) -> f64 {
    let (mut c, mut k) = if d % 2 == 1 { (1.0, 1) } else { (std::f64::consts::FRAC_PI_2, 2) };
    while k < d {
        c *= (k + 1) as f64 / k as f64;
        k += 2;
    }
    c
}

/// Fixed directions: equally spaced half-circle angles in two dimensions,
/// otherwise normalized Gaussian draws from a constant seed.
fn directions(d: usize, count: usize) -> Vec<Vector> {
    if d == 1 {
        return vec![Vector::from_element(1, 1.0)];
    }
    if d == 2 {
        return (0..count)
            .map(|k| {
                let t = std::f64::consts::PI * (k as f64 + 0.5) / count as f64;
                Vector::from_column_slice(&[t.cos(), t.sin()])
            })
            .collect();
    }
    let mut rng = ChaCha20Rng::seed_from_u64(0x5eed_d1ec);
    (0..count)
        .map(|_| {
            let v = Vector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
            let norm = v.norm();
            v / norm
        })
        .collect()
}

enum EnergyEngine<'a> {
    Exact(&'a Matrix),
    Projected {
        /// Per direction: projected values in ascending order with their pooled indices.
        sorted: Vec<(Vec<f64>, Vec<usize>)>,
        /// Per direction: sum of all pairwise distances in the pool.
        totals: Vec<f64>,
        scale: f64,
    },
}

impl<'a> EnergyEngine<'a> {
    fn new(pooled: &'a Matrix, stat: EnergyStatistic) -> Self {
        match stat {
            EnergyStatistic::Exact => EnergyEngine::Exact(pooled),
            EnergyStatistic::Projected { directions: k } => {
                let d = pooled.ncols();
                let dirs = directions(d, k);
                let mut sorted = Vec::with_capacity(dirs.len());
                let mut totals = Vec::with_capacity(dirs.len());
                for dir in &dirs {
                    let proj = pooled * dir;
                    let mut order: Vec<usize> = (0..proj.len()).collect();
                    order.sort_by(|&i, &j| proj[i].total_cmp(&proj[j]));
                    let vals: Vec<f64> = order.iter().map(|&i| proj[i]).collect();
                    totals.push(pair_sum_sorted(vals.iter().copied(), vals.len()));
                    sorted.push((vals, order));
                }
                EnergyEngine::Projected {
                    sorted,
                    totals,
                    scale: sphere_constant(d) / dirs.len() as f64,
                }
            }
        }
    }

    /// `N M / (N + M) * (2 E|X-Y| - E|X-X'| - E|Y-Y'|)` for the split given by `labels`.
    fn statistic(&mut self, labels: &[bool], n1: usize, n2: usize) -> f64 {
        let (f1, f2) = (n1 as f64, n2 as f64);
        let combine = |s1: f64, s2: f64, total: f64| {
            let between = total - s1 - s2;
            2.0 * between / (f1 * f2) - 2.0 * s1 / (f1 * f1) - 2.0 * s2 / (f2 * f2)
        };
        let energy = match self {
            EnergyEngine::Exact(pooled) => {
                let (mut s1, mut s2, mut total) = (0.0, 0.0, 0.0);
                let rows = pooled.nrows();
                for i in 0..rows {
                    for j in (i + 1)..rows {
                        let d = (pooled.row(i) - pooled.row(j)).norm();
                        total += d;
                        match (labels[i], labels[j]) {
                            (true, true) => s1 += d,
                            (false, false) => s2 += d,
                            _ => {}
                        }
                    }
                }
                combine(s1, s2, total)
            }
            EnergyEngine::Projected { sorted, totals, scale } => {
                let mut acc = 0.0;
                for ((vals, order), total) in sorted.iter().zip(totals.iter()) {
                    let (mut s1, mut s2) = (0.0, 0.0);
                    let (mut k1, mut k2) = (0usize, 0usize);
                    for (v, &idx) in vals.iter().zip(order) {
                        if labels[idx] {
                            s1 += (2.0 * k1 as f64 - (n1 as f64 - 1.0)) * v;
                            k1 += 1;
                        } else {
                            s2 += (2.0 * k2 as f64 - (n2 as f64 - 1.0)) * v;
                            k2 += 1;
                        }
                    }
                    acc += combine(s1, s2, *total);
                }
                acc * *scale
            }
        };
        energy * f1 * f2 / (f1 + f2)
    }
}

/// Energy statistic between two fixed samples; avoids the pooled index sort.
fn split_energy(first: &Matrix, second: &Matrix, stat: EnergyStatistic) -> f64 {
    let (n1, n2) = (first.nrows(), second.nrows());
    let EnergyStatistic::Projected { directions: k } = stat else {
        let labels: Vec<bool> = (0..n1 + n2).map(|r| r < n1).collect();
        return EnergyEngine::new(&pool(first, second), stat).statistic(&labels, n1, n2);
    };
    let d = first.ncols();
    let dirs = directions(d, k);
    let (f1, f2) = (n1 as f64, n2 as f64);
    let project = |z: &Matrix, dir: &Vector| {
        let mut v: Vec<f64> = (z * dir).iter().copied().collect();
        v.sort_unstable_by(f64::total_cmp);
        v
    };
    let mut acc = 0.0;
    for dir in &dirs {
        let (a, b) = (project(first, dir), project(second, dir));
        let s1 = pair_sum_sorted(a.iter().copied(), n1);
        let s2 = pair_sum_sorted(b.iter().copied(), n2);
        let b_total: f64 = b.iter().sum();
        // Merge pass: for each a_i, the b values below it and their sum.
        let (mut below, mut below_sum, mut between) = (0usize, 0.0, 0.0);
        for &x in &a {
            while below < n2 && b[below] < x {
                below_sum += b[below];
                below += 1;
            }
            between += x * below as f64 - below_sum + (b_total - below_sum) - x * (n2 - below) as f64;
        }
        acc += 2.0 * between / (f1 * f2) - 2.0 * s1 / (f1 * f1) - 2.0 * s2 / (f2 * f2);
    }
    acc * sphere_constant(d) / dirs.len() as f64 * f1 * f2 / (f1 + f2)
}

/// `sum_{i<j} |v_i - v_j|` for ascending `v`.
fn pair_sum_sorted(v: impl Iterator<Item = f64>, n: usize) -> f64 {
    v.enumerate().map(|(k, x)| (2.0 * k as f64 - (n as f64 - 1.0)) * x).sum()
}
