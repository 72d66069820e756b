//! Value of a stopping policy under the aggregated preference.
//!
//! A policy is a union of closed intervals; the agent stops the first time
//! the state enters it. From x the stopping payoff decomposes by where x
//! sits: inside the policy the value is phi(g(x)) immediately; in a gap
//! (l, u) between intervals the inner expectation is a two-sided exit mix
//! g(l) E[e^{-r tau_l}; down first] + g(u) E[e^{-r tau_u}; up first];
//! above the last interval only the downward hit contributes. Aggregation
//! then applies the attitude function per rate node and averages:
//! J(x, R) = int phi(inner_r(x, R)) dF_rho(r).
//!
//! On the event {tau = infinity} the inner expectation contributes zero.
//! Rate laws with a genuine r = 0 atom are only accepted under the
//! transform-limit convention, where e^{-0 tau} is read as the hitting
//! probability; laws given in exponent space for GBM take that route
//! automatically through the exponent-to-rate map.

use std::sync::Arc;

use crate::diffusion::DiffusionSpec;
use crate::error::{Result, SolverError};
use crate::preference::{AttitudeFunction, DiscountLaw};
use crate::scalar::Real;

/// Payoff override; `None` means the put (K - x)^+.
pub type PayoffFn<F> = Arc<dyn Fn(F) -> F + Send + Sync>;

/// A stopping region: sorted, disjoint closed intervals.
#[derive(Clone, Debug, PartialEq)]
pub struct Policy<F> {
    intervals: Vec<(F, F)>,
    pub grid_aligned: bool,
}

/// Where a state sits relative to a policy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Location<F> {
    Inside,
    /// Between two intervals; stops at l (down) or u (up).
    Gap { l: F, u: F },
    /// Below the lowest interval; stops at its left endpoint from below.
    BelowFirst { u: F },
    /// Above the highest interval; stops at its right endpoint from above.
    AboveLast { l: F },
    /// Empty policy: never stops.
    Never,
}

impl<F: Real> Policy<F> {
    pub fn new(mut intervals: Vec<(F, F)>) -> Result<Self> {
        intervals.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        for &(l, u) in &intervals {
            if !(l.is_finite() && u.is_finite() && l <= u) {
                return Err(SolverError::Argument(format!(
                    "bad policy interval [{l}, {u}]"
                )));
            }
        }
        if intervals.windows(2).any(|w| !(w[1].0 > w[0].1)) {
            return Err(SolverError::Argument(
                "policy intervals must be disjoint with positive gaps".into(),
            ));
        }
        Ok(Policy {
            intervals,
            grid_aligned: false,
        })
    }

    pub fn empty() -> Self {
        Policy {
            intervals: Vec::new(),
            grid_aligned: false,
        }
    }

    /// The one-barrier policy [floor, a].
    pub fn one_barrier(floor: F, a: F) -> Result<Self> {
        Self::new(vec![(floor, a)])
    }

    pub fn intervals(&self) -> &[(F, F)] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn contains(&self, x: F) -> bool {
        self.intervals.iter().any(|&(l, u)| l <= x && x <= u)
    }

    pub fn locate(&self, x: F) -> Location<F> {
        if self.intervals.is_empty() {
            return Location::Never;
        }
        if self.contains(x) {
            return Location::Inside;
        }
        if x < self.intervals[0].0 {
            return Location::BelowFirst {
                u: self.intervals[0].0,
            };
        }
        let last = self.intervals[self.intervals.len() - 1];
        if x > last.1 {
            return Location::AboveLast { l: last.1 };
        }
        for w in self.intervals.windows(2) {
            if w[0].1 < x && x < w[1].0 {
                return Location::Gap {
                    l: w[0].1,
                    u: w[1].0,
                };
            }
        }
        unreachable!("locate: x = {x} escaped all cases")
    }

    /// Union with another policy, merging touching or overlapping intervals.
    pub fn union(&self, other: &Policy<F>) -> Policy<F> {
        let mut ivs: Vec<(F, F)> = self
            .intervals
            .iter()
            .chain(&other.intervals)
            .copied()
            .collect();
        ivs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut merged: Vec<(F, F)> = Vec::with_capacity(ivs.len());
        for (l, u) in ivs {
            match merged.last_mut() {
                Some(prev) if l <= prev.1 => {
                    if u > prev.1 {
                        prev.1 = u;
                    }
                }
                _ => merged.push((l, u)),
            }
        }
        Policy {
            intervals: merged,
            grid_aligned: self.grid_aligned && other.grid_aligned,
        }
    }
}

/// Everything needed to value policies: model, rate law, attitude, payoff.
#[derive(Clone)]
pub struct ValuationContext<F: Real> {
    pub model: DiffusionSpec<F>,
    /// The law as declared (possibly in exponent space).
    pub law: DiscountLaw<F>,
    /// The same law mapped to rate space; all integrals run over this.
    rate_law: DiscountLaw<F>,
    pub att: AttitudeFunction<F>,
    pub strike: F,
    payoff: Option<PayoffFn<F>>,
    pub zero_rate_transform_limit: bool,
}

/// Rate whose decreasing GBM solution is x^{-f}: r = sigma^2 f (f + 1) / 2 - mu f.
pub fn rate_for_exponent_gbm<F: Real>(f: F, mu: F, sigma: F) -> F {
    sigma * sigma * f * (f + F::one()) * F::half() - mu * f
}

impl<F: Real> ValuationContext<F> {
    pub fn new(
        model: DiffusionSpec<F>,
        law: DiscountLaw<F>,
        att: AttitudeFunction<F>,
        strike: F,
    ) -> Result<Self> {
        Self::with_options(model, law, att, strike, None, false)
    }

    pub fn with_options(
        model: DiffusionSpec<F>,
        law: DiscountLaw<F>,
        att: AttitudeFunction<F>,
        strike: F,
        payoff: Option<PayoffFn<F>>,
        zero_rate_transform_limit: bool,
    ) -> Result<Self> {
        if !(strike > F::zero()) {
            return Err(SolverError::Argument(format!(
                "strike must be > 0, got {strike}"
            )));
        }
        let rate_law = if law.f_space {
            let (mu, sigma) = model.gbm_params().ok_or_else(|| {
                SolverError::Unsupported(
                    "exponent-space laws require a GBM model".into(),
                )
            })?;
            let pairs: Vec<(F, F)> = law
                .atoms()
                .iter()
                .chain(law.density_nodes())
                .map(|a| (rate_for_exponent_gbm(a.rate, mu, sigma), a.weight))
                .collect();
            for (i, &(r, _)) in pairs.iter().enumerate() {
                if r < F::zero() {
                    return Err(SolverError::Domain(format!(
                        "exponent node f = {} maps to negative rate {r} (mu/sigma^2 > 1/2?)",
                        law.atoms()[i].rate
                    )));
                }
            }
            DiscountLaw::from_atoms(&pairs, false)?
        } else {
            if law.has_zero_atom() && !zero_rate_transform_limit {
                return Err(SolverError::Convention(
                    "law has an r = 0 atom; enable the transform-limit convention \
                     or declare the law in exponent space"
                        .into(),
                ));
            }
            law.clone()
        };
        Ok(ValuationContext {
            model,
            law,
            rate_law,
            att,
            strike,
            payoff,
            zero_rate_transform_limit,
        })
    }

    pub fn rate_law(&self) -> &DiscountLaw<F> {
        &self.rate_law
    }

    /// True when the default put payoff is in force (fast paths allowed).
    pub fn is_put_payoff(&self) -> bool {
        self.payoff.is_none()
    }

    /// g(x), default (K - x)^+.
    pub fn payoff_g(&self, x: F) -> F {
        match &self.payoff {
            Some(f) => f(x),
            None => (self.strike - x).max(F::zero()),
        }
    }

    /// phi(g(x)), the value of stopping immediately.
    pub fn stopped_value(&self, x: F) -> Result<F> {
        self.att.value(self.payoff_g(x))
    }

    /// Inner expectation E[e^{-r tau(x,R)} g(X_tau)] for one rate node.
    fn inner_expectation(&self, r: F, x: F, loc: &Location<F>) -> Result<F> {
        Ok(match *loc {
            Location::Inside => self.payoff_g(x),
            Location::Never => F::zero(),
            Location::AboveLast { l } => {
                if l <= self.model.state_floor {
                    // the floor is unattainable: tau = infinity
                    F::zero()
                } else {
                    self.payoff_g(l) * self.model.hit_transform(r, x, l)?.value
                }
            }
            Location::BelowFirst { u } => {
                self.payoff_g(u) * self.model.up_transform(r, x, u)?.value
            }
            Location::Gap { l, u } => {
                let (down, up) = self.model.exit_transform(r, x, l, u)?;
                self.payoff_g(l) * down + self.payoff_g(u) * up
            }
        })
    }

    /// Aggregated continuation value J(x, R).
    pub fn j_value(&self, x: F, policy: &Policy<F>) -> Result<F> {
        let loc = policy.locate(x);
        if loc == Location::Inside {
            return self.stopped_value(x);
        }
        self.rate_law
            .try_integrate(|r| Ok(self.att.value(self.inner_expectation(r, x, &loc)?)?))
    }

    /// Barrier value Lambda(x, a), extended below the barrier by phi(g(x)).
    pub fn lambda(&self, x: F, a: F) -> Result<F> {
        if !(a >= self.model.state_floor && a <= self.strike) {
            return Err(SolverError::Argument(format!(
                "barrier must lie in [floor, K] = [{}, {}], got {a}",
                self.model.state_floor, self.strike
            )));
        }
        if x < a {
            return self.stopped_value(x);
        }
        let gain = (self.strike - a).max(F::zero());
        if a <= self.model.state_floor {
            return self.att.value(F::zero());
        }
        self.rate_law
            .try_integrate(|r| {
                let t = if x == a {
                    F::one()
                } else {
                    self.model.hit_transform(r, x, a)?.value
                };
                self.att.value(gain * t)
            })
    }

    /// V(x, R) = phi(g(x)) v J(x, R).
    pub fn v_value(&self, x: F, policy: &Policy<F>) -> Result<F> {
        Ok(self.stopped_value(x)?.max(self.j_value(x, policy)?))
    }

    /// Round-off guard used when comparing phi(g(x)) with J(x, R).
    pub fn classification_eps(&self, stopped: F) -> F {
        F::of(1e-9) * (F::one() + stopped.abs())
    }

    /// Label every grid point as stop / indifferent / continue.
    pub fn classify(&self, policy: &Policy<F>, x_grid: &[F]) -> Result<Classification<F>> {
        let mut labels = Vec::with_capacity(x_grid.len());
        for &x in x_grid {
            let s = self.stopped_value(x)?;
            let j = self.j_value(x, policy)?;
            let eps = self.classification_eps(s);
            labels.push(if s > j + eps {
                RegionLabel::Stop
            } else if (s - j).abs() <= eps {
                RegionLabel::Indifferent
            } else {
                RegionLabel::Continue
            });
        }
        Ok(Classification {
            grid: x_grid.to_vec(),
            labels,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionLabel {
    Stop,
    Indifferent,
    Continue,
}

/// Grid labels from [`ValuationContext::classify`].
#[derive(Clone, Debug)]
pub struct Classification<F> {
    pub grid: Vec<F>,
    pub labels: Vec<RegionLabel>,
}

impl<F: Real> Classification<F> {
    fn points(&self, want: RegionLabel) -> Vec<F> {
        self.grid
            .iter()
            .zip(&self.labels)
            .filter(|(_, &l)| l == want)
            .map(|(&x, _)| x)
            .collect()
    }

    pub fn stop_points(&self) -> Vec<F> {
        self.points(RegionLabel::Stop)
    }

    pub fn indifference_points(&self) -> Vec<F> {
        self.points(RegionLabel::Indifferent)
    }

    pub fn continuation_points(&self) -> Vec<F> {
        self.points(RegionLabel::Continue)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::f_gbm;

    /// GBM with mu/sigma^2 < 1/2, capped attitude 1/4, exponent atoms {1, 2}.
    fn capped_gbm_ctx() -> ValuationContext<f64> {
        let model = DiffusionSpec::gbm(0.02, 0.3).unwrap();
        let law = DiscountLaw::from_atoms(&[(1.0, 0.5), (2.0, 0.5)], true).unwrap();
        let att = AttitudeFunction::capped(0.25).unwrap();
        ValuationContext::new(model, law, att, 1.0).unwrap()
    }

    fn linear_gbm_ctx() -> ValuationContext<f64> {
        let model = DiffusionSpec::gbm(0.05, 0.2).unwrap();
        let law = DiscountLaw::from_atoms(&[(0.02, 0.5), (0.08, 0.5)], false).unwrap();
        ValuationContext::new(model, law, AttitudeFunction::Linear, 1.0).unwrap()
    }

    /// min((1-a)(a/x)^f, 1/4) averaged over f in {1, 2}.
    fn capped_lambda_reference(x: f64, a: f64) -> f64 {
        if x < a {
            return (1.0 - x).min(0.25);
        }
        let mut acc = 0.0;
        for f in [1.0, 2.0] {
            acc += 0.5 * ((1.0 - a) * (a / x).powf(f)).min(0.25);
        }
        acc
    }

    #[test]
    fn policy_construction_and_location() {
        let p = Policy::new(vec![(0.6, 0.9), (0.0, 0.4)]).unwrap();
        assert_eq!(p.intervals(), &[(0.0, 0.4), (0.6, 0.9)]);
        assert!(p.contains(0.4) && p.contains(0.6) && !p.contains(0.5));
        assert_eq!(p.locate(0.5), Location::Gap { l: 0.4, u: 0.6 });
        assert_eq!(p.locate(1.2), Location::AboveLast { l: 0.9 });
        assert_eq!(p.locate(0.2), Location::Inside);
        let q = Policy::new(vec![(0.3, 0.5)]).unwrap();
        assert_eq!(q.locate(0.1), Location::BelowFirst { u: 0.3 });
        assert_eq!(Policy::<f64>::empty().locate(1.0), Location::Never);
        // overlapping intervals rejected
        assert!(Policy::new(vec![(0.0, 0.5), (0.5, 0.9)]).is_err());
        assert!(Policy::new(vec![(0.4, 0.2)]).is_err());
    }

    #[test]
    fn policy_union_merges() {
        let p = Policy::new(vec![(0.0, 0.4)]).unwrap();
        let q = Policy::new(vec![(0.3, 0.6), (0.8, 0.9)]).unwrap();
        let u = p.union(&q);
        assert_eq!(u.intervals(), &[(0.0, 0.6), (0.8, 0.9)]);
    }

    #[test]
    fn payoff_is_the_put() {
        let ctx = linear_gbm_ctx();
        assert_eq!(ctx.payoff_g(0.4), 0.6);
        assert_eq!(ctx.payoff_g(1.5), 0.0);
        assert_eq!(ctx.payoff_g(1.0), 0.0);
        assert!(ctx.is_put_payoff());
    }

    #[test]
    fn j_inside_is_stopped_value() {
        let ctx = capped_gbm_ctx();
        let policy = Policy::one_barrier(0.0, 0.7).unwrap();
        for &x in &[0.1, 0.4, 0.7] {
            let j = ctx.j_value(x, &policy).unwrap();
            let s = ctx.stopped_value(x).unwrap();
            assert_eq!(j, s);
        }
    }

    #[test]
    fn j_matches_lambda_for_one_barrier() {
        for ctx in [capped_gbm_ctx(), linear_gbm_ctx()] {
            let a = 0.65;
            let policy = Policy::one_barrier(0.0, a).unwrap();
            for &x in &[0.7, 0.9, 1.3, 2.0] {
                let j = ctx.j_value(x, &policy).unwrap();
                let l = ctx.lambda(x, a).unwrap();
                assert!((j - l).abs() < 1e-12, "x={x}: {j} vs {l}");
            }
        }
    }

    #[test]
    fn capped_gbm_reference_point() {
        let ctx = capped_gbm_ctx();
        let policy = Policy::one_barrier(0.0, 0.7).unwrap();
        let j = ctx.j_value(0.8, &policy).unwrap();
        assert!((j - 0.23984375).abs() < 1e-10, "{j}");
    }

    #[test]
    fn capped_gbm_region_formulas() {
        let ctx = capped_gbm_ctx();
        // both-capped (small x/a ratio branch): Lambda = 1/4
        // one-capped: 1/8 + (1-a) a^2 / (2 x^2); none-capped: (1-a)/2 (a/x + (a/x)^2)
        let l = ctx.lambda(1.0, 0.7).unwrap();
        assert!((l - 0.1785).abs() < 1e-12, "{l}");
        // sweep all regions against the direct reference
        for i in 0..60 {
            let a = 0.05 + 0.015 * i as f64;
            if a >= 1.0 {
                break;
            }
            for j in 0..60 {
                let x = 0.05 + 0.04 * j as f64;
                let got = ctx.lambda(x, a).unwrap();
                let want = capped_lambda_reference(x, a);
                assert!((got - want).abs() < 1e-10, "x={x} a={a}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn lambda_continuous_at_barrier() {
        for ctx in [capped_gbm_ctx(), linear_gbm_ctx()] {
            let a = 0.6;
            let at = ctx.lambda(a, a).unwrap();
            let above = ctx.lambda(a + 1e-6, a).unwrap();
            let stopped = ctx.stopped_value(a).unwrap();
            assert!((at - stopped).abs() < 1e-14);
            assert!((above - stopped).abs() < 1e-5);
        }
    }

    #[test]
    fn lambda_rejects_bad_barrier() {
        let ctx = linear_gbm_ctx();
        assert!(ctx.lambda(0.5, 1.2).is_err());
        assert!(ctx.lambda(0.5, -0.1).is_err());
        // a at the floor: tau infinite, inner expectation zero
        assert_eq!(ctx.lambda(0.5, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn empty_policy_value_and_v() {
        let ctx = linear_gbm_ctx();
        let j = ctx.j_value(0.5, &Policy::empty()).unwrap();
        assert_eq!(j, 0.0);
        let v = ctx.v_value(0.5, &Policy::empty()).unwrap();
        assert_eq!(v, ctx.stopped_value(0.5).unwrap());
    }

    #[test]
    fn two_interval_gap_mixes_both_endpoints() {
        let ctx = linear_gbm_ctx();
        let policy = Policy::new(vec![(0.0, 0.4), (0.6, 0.7)]).unwrap();
        let x = 0.5;
        let j = ctx.j_value(x, &policy).unwrap();
        // manual recomputation from the exit transforms
        let mut want = 0.0;
        for &(r, w) in &[(0.02, 0.5), (0.08, 0.5)] {
            let (down, up) = ctx.model.exit_transform(r, x, 0.4, 0.6).unwrap();
            want += w * (0.6 * down + 0.4 * up);
        }
        assert!((j - want).abs() < 1e-14);
        // the mix beats stopping only if close enough to the richer side
        assert!(j > 0.0);
    }

    #[test]
    fn monotone_aggregation_in_attitude() {
        // replacing min(v, 1/4) by v (pointwise larger) never lowers J
        let capped = capped_gbm_ctx();
        let linear = ValuationContext::new(
            capped.model.clone(),
            capped.law.clone(),
            AttitudeFunction::Linear,
            1.0,
        )
        .unwrap();
        let policy = Policy::one_barrier(0.0, 0.55).unwrap();
        for i in 0..30 {
            let x = 0.6 + 0.05 * i as f64;
            let jc = capped.j_value(x, &policy).unwrap();
            let jl = linear.j_value(x, &policy).unwrap();
            assert!(jl >= jc - 1e-14, "x={x}: {jl} < {jc}");
        }
    }

    #[test]
    fn zero_rate_convention_gate() {
        let model = DiffusionSpec::gbm(0.02, 0.3).unwrap();
        let law = DiscountLaw::from_atoms(&[(0.0, 0.5), (0.1, 0.5)], false).unwrap();
        match ValuationContext::new(model.clone(), law.clone(), AttitudeFunction::Linear, 1.0) {
            Err(SolverError::Convention(_)) => {}
            other => panic!("expected a convention error, got {:?}", other.err()),
        }
        let ctx = ValuationContext::with_options(
            model,
            law,
            AttitudeFunction::Linear,
            1.0,
            None,
            true,
        )
        .unwrap();
        // r = 0 node contributes the hitting probability (1 here, mu/sigma^2 < 1/2)
        let j = ctx.lambda(1.0, 0.5).unwrap();
        let f0 = f_gbm(0.1, 0.02, 0.3).unwrap();
        let want = 0.5 * 0.5 + 0.5 * 0.5 * 0.5f64.powf(f0);
        assert!((j - want).abs() < 1e-12);
    }

    #[test]
    fn exponent_space_requires_gbm_and_valid_rates() {
        let law = DiscountLaw::from_atoms(&[(1.0, 0.5), (2.0, 0.5)], true).unwrap();
        let bes = DiffusionSpec::bessel(0.5).unwrap();
        assert!(matches!(
            ValuationContext::new(bes, law.clone(), AttitudeFunction::Linear, 1.0),
            Err(SolverError::Unsupported(_))
        ));
        // mu/sigma^2 > 1/2 makes small exponents map to negative rates
        let law_small = DiscountLaw::from_atoms(&[(0.5, 1.0)], true).unwrap();
        let drifty = DiffusionSpec::gbm(0.05, 0.2).unwrap();
        assert!(ValuationContext::new(drifty, law_small, AttitudeFunction::Linear, 1.0).is_err());
    }

    #[test]
    fn exponent_rate_roundtrip() {
        let (mu, sigma) = (0.02, 0.3);
        for &f in &[0.0f64, 0.5, 1.0, 2.0, 3.7] {
            let r = rate_for_exponent_gbm(f, mu, sigma);
            assert!(r >= 0.0);
            let back = f_gbm(r, mu, sigma).unwrap();
            assert!((back - f).abs() < 1e-12, "f={f}: roundtrip {back}");
        }
    }

    #[test]
    fn classify_regions() {
        let ctx = linear_gbm_ctx();
        // empty policy: everything in the money is better stopped
        let grid: Vec<f64> = (1..40).map(|i| 0.025 * i as f64).collect();
        let cls = ctx.classify(&Policy::empty(), &grid).unwrap();
        for (&x, &l) in cls.grid.iter().zip(&cls.labels) {
            if x < 1.0 - 1e-9 {
                assert_eq!(l, RegionLabel::Stop, "x={x}");
            } else {
                assert_eq!(l, RegionLabel::Indifferent, "x={x}");
            }
        }
        // points inside a policy are indifferent
        let policy = Policy::one_barrier(0.0, 0.5).unwrap();
        let cls = ctx.classify(&policy, &grid).unwrap();
        for (&x, &l) in cls.grid.iter().zip(&cls.labels) {
            if x <= 0.5 {
                assert_eq!(l, RegionLabel::Indifferent, "x={x}");
            }
        }
        assert_eq!(
            cls.stop_points().len() + cls.indifference_points().len()
                + cls.continuation_points().len(),
            grid.len()
        );
    }
}
