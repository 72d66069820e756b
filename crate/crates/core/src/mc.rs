//! Monte Carlo cross-checks for the closed-form machinery.
//!
//! Every transform and policy value in this crate has an independent
//! estimator here: hitting-time Laplace transforms by direct simulation of
//! the state until the barrier, policy values by simulating until the
//! policy set is entered and discounting per rate node with common random
//! numbers. GBM paths use exact log-normal increments; the Bessel process
//! of dimension 3 is simulated exactly as the norm of a 3-dimensional
//! Brownian motion; everything else falls back to Euler steps.
//!
//! First passage is detected at step resolution, which biases hitting times
//! late by about 0.583 sigma sqrt(dt); callers validate with the bias
//! sentinel (halve dt, compare) and keep dt small enough that the shift
//! hides inside the statistical tolerance. Opting into
//! [`McConfig::with_barrier_correction`] instead shifts every detection
//! level toward the path by that amount (the standard continuity
//! correction for discretely monitored barriers), cancelling the
//! leading-order bias so coarser steps stay within tolerance. Paths
//! still unstopped at the horizon are censored; the reported
//! `truncation_bound` bounds the resulting underestimate.
//!
//! Determinism: one counter-based generator seeded from the config, one
//! stream per path index, so estimates are bit-identical across runs and
//! thread schedules.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::diffusion::{DiffusionKind, DiffusionSpec};
use crate::error::{Result, SolverError};
use crate::valuation::{Policy, ValuationContext};

/// Discount factor below which a path's remaining contribution is ignored.
const DISCOUNT_FLOOR: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Euler,
    ExactGbmIncrement,
    ExactBessel3,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct McConfig {
    pub n_paths: usize,
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    pub scheme: Scheme,
    /// Continuity-corrected barrier monitoring: detection levels are shifted
    /// toward the path by 0.5826 sigma sqrt(dt), cancelling the leading-order
    /// late-detection bias of step-resolution monitoring. Off by default.
    pub barrier_correction: bool,
}

impl McConfig {
    pub fn new(n_paths: usize, dt: f64, horizon: f64, seed: u64, scheme: Scheme) -> Result<Self> {
        if n_paths < 1000 {
            return Err(SolverError::Argument(format!(
                "n_paths must be >= 1000, got {n_paths}"
            )));
        }
        if !(dt > 0.0) || !(horizon >= 100.0 * dt) {
            return Err(SolverError::Argument(format!(
                "need dt > 0 and horizon >= 100 dt, got dt={dt}, horizon={horizon}"
            )));
        }
        Ok(McConfig {
            n_paths,
            dt,
            horizon,
            seed,
            scheme,
            barrier_correction: false,
        })
    }

    pub fn with_barrier_correction(mut self) -> Self {
        self.barrier_correction = true;
        self
    }
}

/// Broadie-Glasserman-Kou continuity-correction constant, -zeta(1/2)/sqrt(2 pi).
const BGK_BETA: f64 = 0.582_597_480_423_405_5;

/// Local diffusion coefficient in the stepper's internal coordinate at `pos`.
fn monitoring_sigma(model: &DiffusionSpec<f64>, scheme: Scheme, pos: f64) -> f64 {
    match scheme {
        // log coordinate: constant volatility sigma
        Scheme::ExactGbmIncrement => model.gbm_params().map(|(_, s)| s).unwrap_or(0.0),
        Scheme::ExactBessel3 => 1.0,
        Scheme::Euler => match &model.kind {
            DiffusionKind::Gbm { sigma, .. } => sigma * pos,
            DiffusionKind::Bessel { .. } => 1.0,
            DiffusionKind::Generic { diffusion, .. } => diffusion(pos),
        },
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    /// Paths that stopped before the horizon.
    pub n_effective: usize,
    /// Upper bound on the mean lost to censoring at the horizon.
    pub truncation_bound: f64,
}

impl McEstimate {
    fn exact(value: f64, n: usize) -> Self {
        McEstimate {
            mean: value,
            std_error: 0.0,
            n_effective: n,
            truncation_bound: 0.0,
        }
    }
}

/// Per-path stepper abstracting the scheme; `advance` returns the new state.
enum Stepper {
    GbmLog { c1: f64, c2: f64 },
    Bessel3 { sdt: f64, xc: f64, y: f64, z: f64 },
    Euler { model: DiffusionSpec<f64>, sdt: f64 },
}

impl Stepper {
    fn new(model: &DiffusionSpec<f64>, scheme: Scheme, dt: f64) -> Result<Self> {
        match scheme {
            Scheme::ExactGbmIncrement => {
                let (mu, sigma) = model.gbm_params().ok_or_else(|| {
                    SolverError::Unsupported("exact GBM scheme needs a GBM model".into())
                })?;
                Ok(Stepper::GbmLog {
                    c1: (mu - 0.5 * sigma * sigma) * dt,
                    c2: sigma * dt.sqrt(),
                })
            }
            Scheme::ExactBessel3 => {
                let nu = model.bessel_order().ok_or_else(|| {
                    SolverError::Unsupported("exact Bessel scheme needs a Bessel model".into())
                })?;
                if (nu - 0.5).abs() > 1e-12 {
                    return Err(SolverError::Unsupported(
                        "exact Bessel scheme covers nu = 1/2 (dimension 3) only".into(),
                    ));
                }
                Ok(Stepper::Bessel3 {
                    sdt: dt.sqrt(),
                    xc: 0.0,
                    y: 0.0,
                    z: 0.0,
                })
            }
            Scheme::Euler => Ok(Stepper::Euler {
                model: model.clone(),
                sdt: dt.sqrt(),
            }),
        }
    }

    /// Internal coordinate representation of the start state.
    fn start(&mut self, x0: f64) -> f64 {
        match self {
            Stepper::GbmLog { .. } => x0.ln(),
            Stepper::Bessel3 { xc, y, z, .. } => {
                *xc = x0;
                *y = 0.0;
                *z = 0.0;
                x0
            }
            Stepper::Euler { .. } => x0,
        }
    }

    fn advance(&mut self, state: f64, rng: &mut ChaCha8Rng, dt: f64) -> f64 {
        match self {
            Stepper::GbmLog { c1, c2 } => {
                let g: f64 = StandardNormal.sample(rng);
                state + *c1 + *c2 * g
            }
            // the radial state is not the x-coordinate: keep the Cartesian
            // driver in the stepper and return the norm
            Stepper::Bessel3 { sdt, xc, y, z } => {
                let g1: f64 = StandardNormal.sample(rng);
                let g2: f64 = StandardNormal.sample(rng);
                let g3: f64 = StandardNormal.sample(rng);
                let _ = state;
                *xc += *sdt * g1;
                *y += *sdt * g2;
                *z += *sdt * g3;
                (*xc * *xc + *y * *y + *z * *z).sqrt()
            }
            Stepper::Euler { model, sdt } => {
                let g: f64 = StandardNormal.sample(rng);
                let (a, b) = match &model.kind {
                    DiffusionKind::Gbm { mu, sigma } => (sigma * state, mu * state),
                    DiffusionKind::Bessel { nu } => (1.0, (nu + 0.5) / state),
                    DiffusionKind::Generic { diffusion, drift, .. } => {
                        (diffusion(state), drift(state))
                    }
                };
                (state + b * dt + a * *sdt * g).max(1e-12)
            }
        }
    }

    /// Actual state from the internal coordinate.
    fn position(&self, state: f64) -> f64 {
        match self {
            Stepper::GbmLog { .. } => state.exp(),
            _ => state,
        }
    }
}

/// MC estimate of E[e^{-r tau_a^x}] for the downward hit of `a` from `x`.
pub fn estimate_hit_transform(
    model: &DiffusionSpec<f64>,
    r: f64,
    x: f64,
    a: f64,
    cfg: &McConfig,
) -> Result<McEstimate> {
    let mut v = estimate_hit_transforms(model, &[r], x, a, cfg)?;
    Ok(v.pop().expect("one rate in, one estimate out"))
}

/// MC estimates of E[e^{-r tau_a^x}] for several rates at once.
///
/// The hitting time does not depend on the rate, so one shared path ensemble
/// prices every rate line (common random numbers across rates); this is the
/// cheap way to cross-check a whole transform column.
pub fn estimate_hit_transforms(
    model: &DiffusionSpec<f64>,
    rates: &[f64],
    x: f64,
    a: f64,
    cfg: &McConfig,
) -> Result<Vec<McEstimate>> {
    if rates.is_empty() {
        return Err(SolverError::Argument("need at least one rate".into()));
    }
    if rates.iter().any(|&r| !(r > 0.0)) {
        return Err(SolverError::Unsupported(
            "r = 0 transforms are not estimable under truncation".into(),
        ));
    }
    if a > x {
        return Err(SolverError::Argument(format!(
            "hit estimate requires a <= x, got a={a}, x={x}"
        )));
    }
    if a == x {
        return Ok(rates
            .iter()
            .map(|_| McEstimate::exact(1.0, cfg.n_paths))
            .collect());
    }
    let r_min = rates.iter().cloned().fold(f64::INFINITY, f64::min);
    // beyond t_censor the whole remaining contribution is < DISCOUNT_FLOOR
    let t_censor = cfg.horizon.min(-DISCOUNT_FLOOR.ln() / r_min);
    let max_steps = (t_censor / cfg.dt).ceil() as u64;
    let m = rates.len();
    let dt = cfg.dt;
    let scheme = cfg.scheme;
    let seed = cfg.seed;
    let shift = if cfg.barrier_correction {
        BGK_BETA * monitoring_sigma(model, scheme, a) * dt.sqrt()
    } else {
        0.0
    };
    let init = || (vec![0.0; m], vec![0.0; m], 0u64);
    // barrier compared in the stepper's internal coordinate; tau < 0 = censored
    let (sum, sumsq, censored) = (0..cfg.n_paths)
        .into_par_iter()
        .map(|p| -> Result<f64> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(p as u64);
            let mut stepper = Stepper::new(model, scheme, dt)?;
            let mut s = stepper.start(x);
            let target = match &stepper {
                Stepper::GbmLog { .. } => a.ln() + shift,
                _ => a + shift,
            };
            for n in 1..=max_steps {
                s = stepper.advance(s, &mut rng, dt);
                if s <= target {
                    return Ok(n as f64 * dt);
                }
            }
            Ok(-1.0)
        })
        .try_fold(init, |mut acc, tau| -> Result<_> {
            let tau = tau?;
            if tau < 0.0 {
                acc.2 += 1;
            } else {
                for (i, &r) in rates.iter().enumerate() {
                    let v = (-r * tau).exp();
                    acc.0[i] += v;
                    acc.1[i] += v * v;
                }
            }
            Ok(acc)
        })
        .try_reduce(init, |mut l, r| {
            for (a, b) in l.0.iter_mut().zip(&r.0) {
                *a += b;
            }
            for (a, b) in l.1.iter_mut().zip(&r.1) {
                *a += b;
            }
            Ok((l.0, l.1, l.2 + r.2))
        })?;
    let n = cfg.n_paths as f64;
    Ok((0..m)
        .map(|i| {
            let mean = sum[i] / n;
            let var = (sumsq[i] / n - mean * mean).max(0.0);
            McEstimate {
                mean,
                std_error: (var / n).sqrt(),
                n_effective: cfg.n_paths - censored as usize,
                truncation_bound: (-rates[i] * t_censor).exp() * censored as f64 / n,
            }
        })
        .collect())
}

/// Bias sentinel: true when halving dt moves the mean by more than
/// 2 joint standard errors (the step size is too coarse).
pub fn hit_transform_bias_flag(
    model: &DiffusionSpec<f64>,
    r: f64,
    x: f64,
    a: f64,
    cfg: &McConfig,
) -> Result<bool> {
    let coarse = estimate_hit_transform(model, r, x, a, cfg)?;
    let mut fine_cfg = *cfg;
    fine_cfg.dt = cfg.dt / 2.0;
    fine_cfg.seed = cfg.seed.wrapping_add(1);
    let fine = estimate_hit_transform(model, r, x, a, &fine_cfg)?;
    let joint = (coarse.std_error.powi(2) + fine.std_error.powi(2)).sqrt();
    Ok((coarse.mean - fine.mean).abs() > 2.0 * joint)
}

/// Per-node and aggregated MC estimates of J(x, R).
#[derive(Clone, Debug, Serialize)]
pub struct JEstimate {
    pub per_node: Vec<(f64, McEstimate)>,
    pub aggregated: McEstimate,
}

/// Estimate J(x, R) by simulating until the policy set is entered.
///
/// One set of paths serves every rate node (common random numbers); the
/// aggregated standard error uses the delta method with the empirical
/// covariance across nodes.
pub fn estimate_j(
    ctx: &ValuationContext<f64>,
    x: f64,
    policy: &Policy<f64>,
    cfg: &McConfig,
) -> Result<JEstimate> {
    let rates: Vec<f64> = ctx.rate_law().nodes().map(|n| n.rate).collect();
    let weights: Vec<f64> = ctx.rate_law().nodes().map(|n| n.weight).collect();
    if rates.iter().any(|&r| r <= 0.0) {
        return Err(SolverError::Unsupported(
            "policy-value estimation requires strictly positive rates".into(),
        ));
    }
    let m = rates.len();
    if policy.contains(x) {
        let v = ctx.stopped_value(x)?;
        let node = |r: f64| (r, McEstimate::exact(ctx.payoff_g(x), cfg.n_paths));
        return Ok(JEstimate {
            per_node: rates.iter().map(|&r| node(r)).collect(),
            aggregated: McEstimate::exact(v, cfg.n_paths),
        });
    }
    let r_min = rates.iter().cloned().fold(f64::INFINITY, f64::min);
    let t_censor = cfg.horizon.min(-(DISCOUNT_FLOOR / ctx.strike).ln() / r_min);
    let max_steps = (t_censor / cfg.dt).ceil() as u64;
    let dt = cfg.dt;
    let scheme = cfg.scheme;
    let seed = cfg.seed;
    let beta = if cfg.barrier_correction {
        BGK_BETA * dt.sqrt()
    } else {
        0.0
    };
    let nat_sigma = |b: f64| match &ctx.model.kind {
        DiffusionKind::Gbm { sigma, .. } => sigma * b,
        DiffusionKind::Bessel { .. } => 1.0,
        DiffusionKind::Generic { diffusion, .. } => diffusion(b),
    };
    // detection intervals expanded toward the path by the monitoring shift;
    // the payoff is read at the true boundary (clamp), not at the overshoot
    let detect: Vec<(f64, f64, f64, f64)> = policy
        .intervals()
        .iter()
        .map(|&(l, u)| {
            (
                (l - beta * nat_sigma(l)).max(0.0),
                u + beta * nat_sigma(u),
                l,
                u,
            )
        })
        .collect();
    // accumulate per-node sums and the full cross-product matrix
    let acc = (0..cfg.n_paths)
        .into_par_iter()
        .map(|p| -> Result<(Vec<f64>, Vec<f64>, u64)> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(p as u64);
            let mut stepper = Stepper::new(&ctx.model, scheme, dt)?;
            let mut s = stepper.start(x);
            let mut hit: Option<(f64, f64)> = None; // (tau, payoff)
            for n in 1..=max_steps {
                s = stepper.advance(s, &mut rng, dt);
                let pos = stepper.position(s);
                if let Some(&(_, _, l, u)) = detect.iter().find(|d| d.0 <= pos && pos <= d.1) {
                    hit = Some((n as f64 * dt, ctx.payoff_g(pos.clamp(l, u))));
                    break;
                }
            }
            let mut vals = vec![0.0; m];
            if let Some((tau, g)) = hit {
                for (v, &r) in vals.iter_mut().zip(&rates) {
                    *v = (-r * tau).exp() * g;
                }
            }
            let mut cross = vec![0.0; m * m];
            for i in 0..m {
                for j in 0..m {
                    cross[i * m + j] = vals[i] * vals[j];
                }
            }
            Ok((vals, cross, u64::from(hit.is_none())))
        })
        .try_reduce(
            || (vec![0.0; m], vec![0.0; m * m], 0u64),
            |mut l, r| {
                for (a, b) in l.0.iter_mut().zip(&r.0) {
                    *a += b;
                }
                for (a, b) in l.1.iter_mut().zip(&r.1) {
                    *a += b;
                }
                Ok((l.0, l.1, l.2 + r.2))
            },
        )?;
    let (sums, cross, censored) = acc;
    let n = cfg.n_paths as f64;
    let means: Vec<f64> = sums.iter().map(|s| s / n).collect();
    let frac_censored = censored as f64 / n;
    let per_node: Vec<(f64, McEstimate)> = (0..m)
        .map(|i| {
            let var = (cross[i * m + i] / n - means[i] * means[i]).max(0.0);
            (
                rates[i],
                McEstimate {
                    mean: means[i],
                    std_error: (var / n).sqrt(),
                    n_effective: cfg.n_paths - censored as usize,
                    truncation_bound: ctx.strike * (-rates[i] * t_censor).exp() * frac_censored,
                },
            )
        })
        .collect();
    // J = sum_i w_i phi(mean_i); delta method with gradient w_i phi'(mean_i)
    let mut agg_mean = 0.0;
    let mut grad = vec![0.0; m];
    let mut agg_bound = 0.0;
    for i in 0..m {
        let (phi, dphi) = ctx.att.eval(means[i])?;
        agg_mean += weights[i] * phi;
        grad[i] = weights[i] * dphi;
        agg_bound += grad[i] * per_node[i].1.truncation_bound;
    }
    let mut agg_var = 0.0;
    for i in 0..m {
        for j in 0..m {
            let cov = cross[i * m + j] / n - means[i] * means[j];
            agg_var += grad[i] * grad[j] * cov;
        }
    }
    Ok(JEstimate {
        per_node,
        aggregated: McEstimate {
            mean: agg_mean,
            std_error: (agg_var.max(0.0) / n).sqrt(),
            n_effective: cfg.n_paths - censored as usize,
            truncation_bound: agg_bound,
        },
    })
}

/// One drift row of the payoff-submartingale check.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DriftRow {
    pub t0: f64,
    pub t1: f64,
    pub drift: f64,
    pub std_error: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SubmartingaleReport {
    pub passes: bool,
    pub rows: Vec<DriftRow>,
}

/// Estimate E[(K - X_{t_{k+1}})^+ - (K - X_{t_k})^+] along `t_grid` from
/// paths started at K, and flag any drift significantly below zero.
pub fn check_submartingale(
    model: &DiffusionSpec<f64>,
    strike: f64,
    cfg: &McConfig,
    t_grid: &[f64],
) -> Result<SubmartingaleReport> {
    if t_grid.len() < 2 || t_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(SolverError::Argument(
            "t_grid must be increasing with at least two points".into(),
        ));
    }
    let m = t_grid.len();
    let dt = cfg.dt;
    let seed = cfg.seed;
    let scheme = cfg.scheme;
    let steps_at: Vec<u64> = t_grid.iter().map(|t| (t / dt).round() as u64).collect();
    let (sums, sumsqs) = (0..cfg.n_paths)
        .into_par_iter()
        .map(|p| -> Result<(Vec<f64>, Vec<f64>)> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(p as u64);
            let mut stepper = Stepper::new(model, scheme, dt)?;
            let mut s = stepper.start(strike);
            let mut payoff_at = vec![0.0; m];
            let mut k = 0usize;
            let mut n = 0u64;
            while k < m {
                if steps_at[k] == n {
                    payoff_at[k] = (strike - stepper.position(s)).max(0.0);
                    k += 1;
                    continue;
                }
                s = stepper.advance(s, &mut rng, dt);
                n += 1;
            }
            let mut d = vec![0.0; m - 1];
            let mut d2 = vec![0.0; m - 1];
            for i in 0..m - 1 {
                d[i] = payoff_at[i + 1] - payoff_at[i];
                d2[i] = d[i] * d[i];
            }
            Ok((d, d2))
        })
        .try_reduce(
            || (vec![0.0; m - 1], vec![0.0; m - 1]),
            |mut l, r| {
                for (a, b) in l.0.iter_mut().zip(&r.0) {
                    *a += b;
                }
                for (a, b) in l.1.iter_mut().zip(&r.1) {
                    *a += b;
                }
                Ok(l)
            },
        )?;
    let n = cfg.n_paths as f64;
    let mut rows = Vec::with_capacity(m - 1);
    let mut passes = true;
    for i in 0..m - 1 {
        let mean = sums[i] / n;
        let var = (sumsqs[i] / n - mean * mean).max(0.0);
        let se = (var / n).sqrt();
        if mean < -3.0 * se {
            passes = false;
        }
        rows.push(DriftRow {
            t0: t_grid[i],
            t1: t_grid[i + 1],
            drift: mean,
            std_error: se,
        });
    }
    Ok(SubmartingaleReport { passes, rows })
}
