//! Fundamental solutions of one-dimensional diffusions and the hitting /
//! exit Laplace transforms built from them.
//!
//! For a diffusion with generator (1/2) a^2(x) u'' + b(x) u' - c(x) u, the
//! resolvent ODE (1/2) a^2 u'' + b u' - c u = r u has a decreasing positive
//! solution phi_r and an increasing one psi_r. Downward hitting transforms
//! are phi ratios, E[e^{-r tau_a}] = phi_r(x) / phi_r(a); two-sided exit
//! transforms combine both solutions. The log-derivative m_r = phi_r'/phi_r
//! solves a Riccati equation and carries the model monotonicity conditions
//! checked by [`DiffusionSpec::check_model_conditions`].
//!
//! GBM and Bessel models use closed forms; generic coefficient models are
//! solved by backward integration of the Riccati equation from a far-out
//! start point, which is the stable direction for the decreasing branch.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::error::{Result, SolverError};
use crate::scalar::{linspace, Real};
use crate::special::{bessel_i, bessel_k};

/// Coefficient function of state for generic models.
pub type CoefFn<F> = Arc<dyn Fn(F) -> F + Send + Sync>;

#[derive(Clone)]
pub enum DiffusionKind<F: Real> {
    /// dX = mu X dt + sigma X dW.
    Gbm { mu: F, sigma: F },
    /// Bessel process of degree nu (dimension n = 2 nu + 2).
    Bessel { nu: F },
    /// Generator coefficients a (diffusion), b (drift), c (killing).
    Generic {
        diffusion: CoefFn<F>,
        drift: CoefFn<F>,
        kill: CoefFn<F>,
    },
}

/// Where a transform value came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformSource {
    ClosedForm,
    OdeNumeric,
}

/// E[e^{-r tau}] together with its logarithm.
#[derive(Clone, Copy, Debug)]
pub struct HittingTransform<F> {
    pub value: F,
    pub log_value: F,
    pub source: TransformSource,
}

/// Outcome of the (a'') / (b'') monotonicity scans on m_r(x).
#[derive(Clone, Debug)]
pub struct ConditionReport<F> {
    pub cii_a_holds: bool,
    pub cii_b_holds: bool,
    /// (r, x) witnesses where m_r(x) fails to increase in x.
    pub violations_a: Vec<(F, F)>,
    /// (r, x) witnesses where -m_r(x) fails to increase in r.
    pub violations_b: Vec<(F, F)>,
    pub r_grid: Vec<F>,
    pub x_grid: Vec<F>,
}

#[derive(Clone)]
pub struct DiffusionSpec<F: Real> {
    pub kind: DiffusionKind<F>,
    pub state_floor: F,
    pub state_cap: F,
    /// Start abscissa for the backward Riccati integration (generic models).
    solver_start: F,
    cache: Arc<Mutex<HashMap<u64, Arc<GenericSolution<F>>>>>,
}

/// GBM exponent f(r) = sqrt((mu/sigma^2 - 1/2)^2 + 2r/sigma^2) + mu/sigma^2 - 1/2.
pub fn f_gbm<F: Real>(r: F, mu: F, sigma: F) -> Result<F> {
    if !r.is_finite() || !mu.is_finite() || !sigma.is_finite() || sigma <= F::zero() {
        return Err(SolverError::Domain(format!(
            "f_gbm requires finite inputs and sigma > 0 (r={r}, mu={mu}, sigma={sigma})"
        )));
    }
    if r < F::zero() {
        return Err(SolverError::Domain(format!("f_gbm requires r >= 0, got {r}")));
    }
    let m = mu / (sigma * sigma) - F::half();
    Ok((m * m + F::two() * r / (sigma * sigma)).sqrt() + m)
}

/// Exponent of the increasing GBM solution x^{theta_plus}.
pub fn theta_plus_gbm<F: Real>(r: F, mu: F, sigma: F) -> Result<F> {
    let m = mu / (sigma * sigma) - F::half();
    Ok(f_gbm(r, mu, sigma)? - F::two() * m)
}

impl<F: Real> DiffusionSpec<F> {
    pub fn gbm(mu: F, sigma: F) -> Result<Self> {
        if !(sigma > F::zero()) {
            return Err(SolverError::Domain(format!(
                "GBM requires sigma > 0, got {sigma}"
            )));
        }
        Ok(Self::with_kind(DiffusionKind::Gbm { mu, sigma }))
    }

    pub fn bessel(nu: F) -> Result<Self> {
        if !(nu >= F::zero()) {
            return Err(SolverError::Domain(format!(
                "Bessel requires nu >= 0, got {nu}"
            )));
        }
        Ok(Self::with_kind(DiffusionKind::Bessel { nu }))
    }

    pub fn generic(diffusion: CoefFn<F>, drift: CoefFn<F>, kill: CoefFn<F>) -> Self {
        Self::with_kind(DiffusionKind::Generic {
            diffusion,
            drift,
            kill,
        })
    }

    fn with_kind(kind: DiffusionKind<F>) -> Self {
        let cap = F::of(10.0);
        DiffusionSpec {
            kind,
            state_floor: F::zero(),
            state_cap: cap,
            solver_start: cap * F::of(50.0),
            cache: Arc::new(Mutex::new(HashMap::new())),
        }
    }

    pub fn with_state_cap(mut self, cap: F) -> Self {
        self.state_cap = cap;
        self.solver_start = cap * F::of(50.0);
        self
    }

    pub fn gbm_params(&self) -> Option<(F, F)> {
        match self.kind {
            DiffusionKind::Gbm { mu, sigma } => Some((mu, sigma)),
            _ => None,
        }
    }

    pub fn bessel_order(&self) -> Option<F> {
        match self.kind {
            DiffusionKind::Bessel { nu } => Some(nu),
            _ => None,
        }
    }

    /// ln phi_r(x) in the per-model normalization.
    pub fn log_phi_dec(&self, r: F, x: F) -> Result<F> {
        self.check_rx(r, x)?;
        match &self.kind {
            DiffusionKind::Gbm { mu, sigma } => Ok(-f_gbm(r, *mu, *sigma)? * x.ln()),
            DiffusionKind::Bessel { nu } => {
                if r == F::zero() {
                    if *nu > F::zero() {
                        // K_nu(z) ~ z^{-nu} as z -> 0, so phi ~ x^{-2 nu}
                        Ok(-F::two() * *nu * x.ln())
                    } else {
                        Err(SolverError::Domain(
                            "Bessel nu = 0 has no power-law r = 0 limit".into(),
                        ))
                    }
                } else {
                    let z = x * (F::two() * r).sqrt();
                    Ok(-*nu * x.ln() + bessel_k(*nu, z)?.ln())
                }
            }
            DiffusionKind::Generic { .. } => {
                let sol = self.generic_solution(r)?;
                sol.log_phi(x)
            }
        }
    }

    /// The decreasing positive solution phi_r(x).
    pub fn phi_dec(&self, r: F, x: F) -> Result<F> {
        Ok(self.log_phi_dec(r, x)?.exp())
    }

    /// ln psi_r(x) for the increasing partner solution.
    pub fn log_psi_inc(&self, r: F, x: F) -> Result<F> {
        self.check_rx(r, x)?;
        match &self.kind {
            DiffusionKind::Gbm { mu, sigma } => Ok(theta_plus_gbm(r, *mu, *sigma)? * x.ln()),
            DiffusionKind::Bessel { nu } => {
                if r == F::zero() {
                    // increasing solution degenerates to a constant
                    Ok(F::zero())
                } else {
                    let z = x * (F::two() * r).sqrt();
                    let half = F::half();
                    if (*nu - half).abs() < F::of(1e-12) {
                        Ok((z.sinh() / x).ln())
                    } else {
                        Ok(-*nu * x.ln() + bessel_i(*nu, z)?.ln())
                    }
                }
            }
            DiffusionKind::Generic { .. } => {
                let sol = self.generic_solution(r)?;
                sol.log_psi(x)
            }
        }
    }

    pub fn psi_inc(&self, r: F, x: F) -> Result<F> {
        Ok(self.log_psi_inc(r, x)?.exp())
    }

    /// m_r(x) = phi_r'(x) / phi_r(x) < 0.
    pub fn m_log_derivative(&self, r: F, x: F) -> Result<F> {
        self.check_rx(r, x)?;
        match &self.kind {
            DiffusionKind::Gbm { mu, sigma } => Ok(-f_gbm(r, *mu, *sigma)? / x),
            DiffusionKind::Bessel { nu } => {
                if r == F::zero() {
                    if *nu > F::zero() {
                        Ok(-F::two() * *nu / x)
                    } else {
                        Err(SolverError::Domain(
                            "Bessel nu = 0 has no power-law r = 0 limit".into(),
                        ))
                    }
                } else {
                    let s = (F::two() * r).sqrt();
                    let z = x * s;
                    Ok(-s * bessel_k(*nu + F::one(), z)? / bessel_k(*nu, z)?)
                }
            }
            DiffusionKind::Generic { .. } => {
                let sol = self.generic_solution(r)?;
                sol.m_at(x)
            }
        }
    }

    /// E[e^{-r tau_a^x}] for a downward hit, state_floor <= a <= x.
    pub fn hit_transform(&self, r: F, x: F, a: F) -> Result<HittingTransform<F>> {
        if a > x {
            return Err(SolverError::Argument(format!(
                "hit_transform requires a <= x, got a={a}, x={x}"
            )));
        }
        if a < self.state_floor {
            return Err(SolverError::Argument(format!(
                "barrier {a} below state floor {}",
                self.state_floor
            )));
        }
        if x == a {
            return Ok(HittingTransform {
                value: F::one(),
                log_value: F::zero(),
                source: self.source(),
            });
        }
        let log_value = self.log_phi_dec(r, x)? - self.log_phi_dec(r, a)?;
        Ok(HittingTransform {
            value: log_value.exp(),
            log_value,
            source: self.source(),
        })
    }

    /// E[e^{-r tau_l^x}] for an upward hit, x <= l (psi ratio).
    pub fn up_transform(&self, r: F, x: F, l: F) -> Result<HittingTransform<F>> {
        if x > l {
            return Err(SolverError::Argument(format!(
                "up_transform requires x <= l, got x={x}, l={l}"
            )));
        }
        if x == l {
            return Ok(HittingTransform {
                value: F::one(),
                log_value: F::zero(),
                source: self.source(),
            });
        }
        let log_value = self.log_psi_inc(r, x)? - self.log_psi_inc(r, l)?;
        Ok(HittingTransform {
            value: log_value.exp(),
            log_value,
            source: self.source(),
        })
    }

    /// Two-sided exit transforms from the gap (l, u):
    /// (E[e^{-r tau_l}; tau_l < tau_u], E[e^{-r tau_u}; tau_u < tau_l]).
    pub fn exit_transform(&self, r: F, x: F, l: F, u: F) -> Result<(F, F)> {
        let res = (self.state_cap - self.state_floor) * F::of(1e-9);
        if u - l < res {
            return Err(SolverError::Argument(format!(
                "degenerate bracket (l={l}, u={u})"
            )));
        }
        if !(l < x && x < u) {
            if x == l {
                return Ok((F::one(), F::zero()));
            }
            if x == u {
                return Ok((F::zero(), F::one()));
            }
            return Err(SolverError::Argument(format!(
                "exit_transform requires l < x < u, got l={l}, x={x}, u={u}"
            )));
        }
        let lphi_x = self.log_phi_dec(r, x)?;
        let lpsi_x = self.log_psi_inc(r, x)?;
        // ratios against the values at x keep everything O(1)
        let a = (self.log_phi_dec(r, l)? - lphi_x).exp(); // phi(l)/phi(x) >= 1
        let b = (self.log_phi_dec(r, u)? - lphi_x).exp(); // phi(u)/phi(x) <= 1
        let c = (self.log_psi_inc(r, l)? - lpsi_x).exp(); // psi(l)/psi(x) <= 1
        let d = (self.log_psi_inc(r, u)? - lpsi_x).exp(); // psi(u)/psi(x) >= 1
        let den = a * d - c * b;
        if !(den > F::zero()) {
            return Err(SolverError::Numeric(format!(
                "singular exit system on ({l}, {u}) at r={r}"
            )));
        }
        Ok(((d - b) / den, (a - c) / den))
    }

    /// Finite-difference scan of conditions (a'') and (b'') on m_r(x).
    pub fn check_model_conditions(&self, r_grid: &[F], x_grid: &[F]) -> Result<ConditionReport<F>> {
        let slack = F::of(1e-10);
        let mut violations_a = Vec::new();
        let mut violations_b = Vec::new();
        // (a''): m_r(x) increasing in x for each fixed r
        for &r in r_grid {
            let mut prev: Option<(F, F)> = None;
            for &x in x_grid {
                let m = self.m_log_derivative(r, x)?;
                if let Some((_, pm)) = prev {
                    if m < pm - slack {
                        violations_a.push((r, x));
                    }
                }
                prev = Some((x, m));
            }
        }
        // (b''): -m_r(x) increasing in r for each fixed x
        for &x in x_grid {
            let mut prev: Option<(F, F)> = None;
            for &r in r_grid {
                let m = self.m_log_derivative(r, x)?;
                if let Some((_, pm)) = prev {
                    if -m < -pm - slack {
                        violations_b.push((r, x));
                    }
                }
                prev = Some((r, m));
            }
        }
        Ok(ConditionReport {
            cii_a_holds: violations_a.is_empty(),
            cii_b_holds: violations_b.is_empty(),
            violations_a,
            violations_b,
            r_grid: r_grid.to_vec(),
            x_grid: x_grid.to_vec(),
        })
    }

    fn source(&self) -> TransformSource {
        match self.kind {
            DiffusionKind::Generic { .. } => TransformSource::OdeNumeric,
            _ => TransformSource::ClosedForm,
        }
    }

    fn check_rx(&self, r: F, x: F) -> Result<()> {
        if !r.is_finite() || r < F::zero() {
            return Err(SolverError::Domain(format!("rate must be finite and >= 0, got {r}")));
        }
        if !x.is_finite() || x <= self.state_floor {
            return Err(SolverError::Domain(format!(
                "state must lie above the floor {}, got {x}",
                self.state_floor
            )));
        }
        Ok(())
    }

    fn generic_solution(&self, r: F) -> Result<Arc<GenericSolution<F>>> {
        let key = r.to_f64().unwrap_or(f64::NAN).to_bits();
        if let Some(sol) = self.cache.lock().unwrap().get(&key) {
            return Ok(sol.clone());
        }
        let (af, bf, cf) = match &self.kind {
            DiffusionKind::Generic {
                diffusion,
                drift,
                kill,
            } => (diffusion.clone(), drift.clone(), kill.clone()),
            _ => unreachable!("generic_solution called on a closed-form model"),
        };
        let x_lo = self.state_floor + (self.state_cap - self.state_floor) * F::of(1e-4);
        let sol = Arc::new(GenericSolution::solve(
            af,
            bf,
            cf,
            r,
            x_lo,
            self.solver_start,
        )?);
        self.cache.lock().unwrap().insert(key, sol.clone());
        Ok(sol)
    }
}

/// Dense output of the generic-model Riccati integrations for one rate.
struct GenericSolution<F> {
    xs: Vec<F>,
    m: Vec<F>,       // phi'/phi
    ln_phi: Vec<F>,  // ln phi, zero at the last node
    p: Vec<F>,       // psi'/psi
    ln_psi: Vec<F>,  // ln psi, zero at the first node
    rhs: RiccatiRhs<F>,
}

struct RiccatiRhs<F> {
    af: CoefFn<F>,
    bf: CoefFn<F>,
    cf: CoefFn<F>,
    r: F,
}

impl<F: Real> RiccatiRhs<F> {
    /// m' = 2 (c + r - b m) / a^2 - m^2
    fn eval(&self, x: F, m: F) -> F {
        let a2 = (self.af)(x) * (self.af)(x);
        F::two() * ((self.cf)(x) + self.r - (self.bf)(x) * m) / a2 - m * m
    }

    /// Root of the stationary quadratic (m' = 0): sign = -1 decreasing, +1 increasing branch.
    fn asymptotic_root(&self, x: F, sign: F) -> F {
        let a2 = (self.af)(x) * (self.af)(x);
        let b = (self.bf)(x);
        let q = (self.cf)(x) + self.r;
        (-b + sign * (b * b + F::two() * a2 * q).sqrt()) / a2
    }
}

impl<F: Real> GenericSolution<F> {
    fn solve(af: CoefFn<F>, bf: CoefFn<F>, cf: CoefFn<F>, r: F, x_lo: F, x_hi: F) -> Result<Self> {
        if !((af)(x_lo) > F::zero()) || !((af)(x_hi) > F::zero()) {
            return Err(SolverError::Domain(
                "generic model requires a(x) > 0 on the solve range".into(),
            ));
        }
        let rhs = RiccatiRhs { af, bf, cf, r };
        let n = 16_000usize;
        let ratio = (x_hi / x_lo).ln() / F::from_usize(n).unwrap();
        let xs: Vec<F> = (0..=n)
            .map(|k| x_lo * (ratio * F::from_usize(k).unwrap()).exp())
            .collect();

        // decreasing branch, integrated backward from x_hi
        let mut m = vec![F::zero(); n + 1];
        let mut ln_phi = vec![F::zero(); n + 1];
        m[n] = rhs.asymptotic_root(x_hi, -F::one());
        for k in (0..n).rev() {
            let (mk, dl) = rk4_step(&rhs, xs[k + 1], m[k + 1], xs[k] - xs[k + 1]);
            if !mk.is_finite() {
                return Err(SolverError::Numeric(format!(
                    "Riccati blow-up near x = {} (r = {r})",
                    xs[k]
                )));
            }
            m[k] = mk;
            ln_phi[k] = ln_phi[k + 1] + dl;
        }

        // increasing branch, integrated forward from x_lo
        let mut p = vec![F::zero(); n + 1];
        let mut ln_psi = vec![F::zero(); n + 1];
        p[0] = rhs.asymptotic_root(x_lo, F::one());
        for k in 0..n {
            let (pk, dl) = rk4_step(&rhs, xs[k], p[k], xs[k + 1] - xs[k]);
            if !pk.is_finite() {
                return Err(SolverError::Numeric(format!(
                    "Riccati blow-up (increasing branch) near x = {} (r = {r})",
                    xs[k + 1]
                )));
            }
            p[k + 1] = pk;
            ln_psi[k + 1] = ln_psi[k] + dl;
        }

        Ok(GenericSolution {
            xs,
            m,
            ln_phi,
            p,
            ln_psi,
            rhs,
        })
    }

    fn bracket(&self, x: F) -> Result<usize> {
        let lo = self.xs[0];
        let hi = *self.xs.last().unwrap();
        if x < lo || x > hi {
            return Err(SolverError::Domain(format!(
                "query x = {x} outside the solved range [{lo}, {hi}]"
            )));
        }
        let idx = self
            .xs
            .partition_point(|&v| v <= x)
            .min(self.xs.len() - 1);
        Ok(idx.saturating_sub(1))
    }

    fn m_at(&self, x: F) -> Result<F> {
        let k = self.bracket(x)?;
        Ok(hermite(
            x,
            self.xs[k],
            self.xs[k + 1],
            self.m[k],
            self.m[k + 1],
            self.rhs.eval(self.xs[k], self.m[k]),
            self.rhs.eval(self.xs[k + 1], self.m[k + 1]),
        ))
    }

    fn log_phi(&self, x: F) -> Result<F> {
        let k = self.bracket(x)?;
        Ok(hermite(
            x,
            self.xs[k],
            self.xs[k + 1],
            self.ln_phi[k],
            self.ln_phi[k + 1],
            self.m[k],
            self.m[k + 1],
        ))
    }

    fn log_psi(&self, x: F) -> Result<F> {
        let k = self.bracket(x)?;
        Ok(hermite(
            x,
            self.xs[k],
            self.xs[k + 1],
            self.ln_psi[k],
            self.ln_psi[k + 1],
            self.p[k],
            self.p[k + 1],
        ))
    }
}

/// One RK4 step of the coupled system (m, ln phi): returns (m_next, delta ln phi).
fn rk4_step<F: Real>(rhs: &RiccatiRhs<F>, x: F, m: F, h: F) -> (F, F) {
    let k1 = rhs.eval(x, m);
    let k2 = rhs.eval(x + h * F::half(), m + h * k1 * F::half());
    let k3 = rhs.eval(x + h * F::half(), m + h * k2 * F::half());
    let k4 = rhs.eval(x + h, m + h * k3);
    let six = F::of(6.0);
    let m_next = m + h * (k1 + F::two() * k2 + F::two() * k3 + k4) / six;
    // Simpson on ln phi' = m over the step
    let m_mid = m + h * F::half() * (k1 + k2) * F::half();
    let dl = h * (m + F::of(4.0) * m_mid + m_next) / six;
    (m_next, dl)
}

/// Cubic Hermite interpolation on [x0, x1] with values v and derivatives d.
fn hermite<F: Real>(x: F, x0: F, x1: F, v0: F, v1: F, d0: F, d1: F) -> F {
    let h = x1 - x0;
    if h == F::zero() {
        return v0;
    }
    let t = (x - x0) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    let h00 = F::two() * t3 - F::of(3.0) * t2 + F::one();
    let h10 = t3 - F::two() * t2 + t;
    let h01 = -F::two() * t3 + F::of(3.0) * t2;
    let h11 = t3 - t2;
    h00 * v0 + h10 * h * d0 + h01 * v1 + h11 * h * d1
}

/// A generic-coefficient clone of a GBM model, for cross-checks.
pub fn gbm_as_generic<F: Real>(mu: F, sigma: F) -> DiffusionSpec<F> {
    DiffusionSpec::generic(
        Arc::new(move |x| sigma * x),
        Arc::new(move |x| mu * x),
        Arc::new(|_| F::zero()),
    )
}

/// Uniform grids for condition scans, avoiding the endpoints.
pub fn interior_grid<F: Real>(lo: F, hi: F, n: usize) -> Vec<F> {
    let pad = (hi - lo) * F::of(1e-3);
    linspace(lo + pad, hi - pad, n)
}
