//! Discount-rate laws and attitude functions.
//!
//! The agent's preference aggregates discounted payoffs across a random
//! exponential rate rho ~ F_rho through a non-decreasing attitude function
//! phi: the value of stopping at tau from x is
//! int phi(E[e^{-r tau} g(X_tau)]) dF_rho(r).
//!
//! Laws are finite node lists: point masses plus (optionally) quadrature
//! nodes that stand in for a continuous density. Continuous parts are
//! discretized once, at construction, with Gauss-Legendre nodes, so every
//! downstream integral is a weighted sum.
//!
//! The monotonicity condition on phi that drives the threshold theory is
//! that v |-> phi'(v) v is non-decreasing and phi strictly increasing;
//! [`check_attitude_condition`] scans it on a grid. The capped attitude
//! phi(v) = min(v, alpha) deliberately fails it and is handled downstream
//! by dedicated solvers.

use std::path::Path;

use crate::error::{Result, SolverError};
use crate::quad::gauss_legendre_on;
use crate::scalar::Real;

/// One point mass of the rate law.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateAtom<F> {
    pub rate: F,
    pub weight: F,
}

/// Distribution of the discount rate, reduced to a finite node list.
///
/// When `f_space` is set the node values are exponents f(rho) of the
/// decreasing GBM solution x^{-f}, not raw rates; GBM routines then skip
/// the rate-to-exponent map.
#[derive(Clone, Debug)]
pub struct DiscountLaw<F> {
    atoms: Vec<RateAtom<F>>,
    density_nodes: Vec<RateAtom<F>>,
    pub f_space: bool,
}

impl<F: Real> DiscountLaw<F> {
    /// Purely atomic law. Weights must already sum to one.
    pub fn from_atoms(pairs: &[(F, F)], f_space: bool) -> Result<Self> {
        Self::build(pairs, &[], f_space, false)
    }

    /// Atomic law with weights normalized to one on construction.
    pub fn from_atoms_normalized(pairs: &[(F, F)], f_space: bool) -> Result<Self> {
        Self::build(pairs, &[], f_space, true)
    }

    pub fn dirac(rate: F) -> Result<Self> {
        Self::from_atoms(&[(rate, F::one())], false)
    }

    /// Discretize a density on `[lo, hi]` into `n` Gauss-Legendre nodes,
    /// normalizing the node weights to total mass one.
    pub fn from_density(density: impl Fn(F) -> F, lo: F, hi: F, n: usize) -> Result<Self> {
        if !(lo >= F::zero() && hi > lo) {
            return Err(SolverError::Argument(format!(
                "density support must satisfy 0 <= lo < hi, got [{lo}, {hi}]"
            )));
        }
        let (xs, ws) = gauss_legendre_on(n, lo, hi);
        let nodes: Vec<(F, F)> = xs
            .iter()
            .zip(&ws)
            .map(|(&r, &w)| (r, w * density(r)))
            .collect();
        Self::build(&[], &nodes, false, true)
    }

    /// Two-column CSV (rate, weight); weights are normalized on load.
    pub fn from_csv_path(path: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_path(path)
            .map_err(|e| SolverError::Config(format!("cannot read law file: {e}")))?;
        let mut pairs = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| SolverError::Config(format!("bad law row: {e}")))?;
            if rec.len() != 2 {
                return Err(SolverError::Config(format!(
                    "law rows need exactly two columns, got {}",
                    rec.len()
                )));
            }
            let r: f64 = rec[0]
                .parse()
                .map_err(|e| SolverError::Config(format!("bad rate {:?}: {e}", &rec[0])))?;
            let w: f64 = rec[1]
                .parse()
                .map_err(|e| SolverError::Config(format!("bad weight {:?}: {e}", &rec[1])))?;
            pairs.push((F::of(r), F::of(w)));
        }
        Self::build(&pairs, &[], false, true)
    }

    fn build(pairs: &[(F, F)], nodes: &[(F, F)], f_space: bool, normalize: bool) -> Result<Self> {
        if pairs.is_empty() && nodes.is_empty() {
            return Err(SolverError::Argument("empty discount law".into()));
        }
        let check = |(r, w): &(F, F)| -> Result<()> {
            if !r.is_finite() || *r < F::zero() {
                return Err(SolverError::Domain(format!(
                    "law support must be finite and >= 0, got {r}"
                )));
            }
            if !(*w > F::zero()) {
                return Err(SolverError::Domain(format!(
                    "law weights must be > 0, got {w} at r = {r}"
                )));
            }
            Ok(())
        };
        pairs.iter().chain(nodes.iter()).try_for_each(check)?;
        let total: F = pairs.iter().chain(nodes.iter()).map(|&(_, w)| w).sum();
        let scale = if normalize {
            F::one() / total
        } else {
            if (total - F::one()).abs() > F::of(1e-12) {
                return Err(SolverError::Domain(format!(
                    "law weights must sum to 1, got {total}"
                )));
            }
            F::one()
        };
        let mut atoms: Vec<RateAtom<F>> = pairs
            .iter()
            .map(|&(rate, weight)| RateAtom {
                rate,
                weight: weight * scale,
            })
            .collect();
        atoms.sort_by(|a, b| a.rate.partial_cmp(&b.rate).unwrap());
        if atoms.windows(2).any(|w| w[0].rate == w[1].rate) {
            return Err(SolverError::Domain("duplicate atom in discount law".into()));
        }
        let density_nodes: Vec<RateAtom<F>> = nodes
            .iter()
            .map(|&(rate, weight)| RateAtom {
                rate,
                weight: weight * scale,
            })
            .collect();
        Ok(DiscountLaw {
            atoms,
            density_nodes,
            f_space,
        })
    }

    pub fn atoms(&self) -> &[RateAtom<F>] {
        &self.atoms
    }

    pub fn density_nodes(&self) -> &[RateAtom<F>] {
        &self.density_nodes
    }

    /// All (support point, weight) nodes, atoms first.
    pub fn nodes(&self) -> impl Iterator<Item = RateAtom<F>> + '_ {
        self.atoms.iter().chain(&self.density_nodes).copied()
    }

    /// Largest support point (rho* in rate space, f(rho*) in f-space).
    pub fn rho_star(&self) -> F {
        self.nodes()
            .map(|a| a.rate)
            .fold(F::zero(), |acc, r| if r > acc { r } else { acc })
    }

    pub fn has_zero_atom(&self) -> bool {
        self.nodes().any(|a| a.rate == F::zero())
    }

    /// int fn(r) dF_rho(r) over the node list.
    pub fn integrate(&self, f: impl Fn(F) -> F) -> Result<F> {
        let mut acc = F::zero();
        for node in self.nodes() {
            let v = f(node.rate);
            if !v.is_finite() {
                return Err(SolverError::Numeric(format!(
                    "integrand is {v} at r = {}",
                    node.rate
                )));
            }
            acc += node.weight * v;
        }
        Ok(acc)
    }

    /// Fallible-integrand variant of [`Self::integrate`].
    pub fn try_integrate(&self, f: impl Fn(F) -> Result<F>) -> Result<F> {
        let mut acc = F::zero();
        for node in self.nodes() {
            let v = f(node.rate)?;
            if !v.is_finite() {
                return Err(SolverError::Numeric(format!(
                    "integrand is {v} at r = {}",
                    node.rate
                )));
            }
            acc += node.weight * v;
        }
        Ok(acc)
    }
}

/// The attitude function phi applied to discounted payoffs.
#[derive(Clone, Debug)]
pub enum AttitudeFunction<F> {
    /// phi(v) = v.
    Linear,
    /// phi(v) = v^p / p, p <= 1, p != 0.
    Power { p: F },
    /// phi(v) = ln v.
    Log,
    /// phi(v) = min(v, alpha), alpha in (0, 1).
    Capped { alpha: F },
    /// Monotone table with piecewise-cubic interpolation.
    Tabulated(MonotoneTable<F>),
}

impl<F: Real> AttitudeFunction<F> {
    pub fn power(p: F) -> Result<Self> {
        if !(p <= F::one()) || p == F::zero() || !p.is_finite() {
            return Err(SolverError::Argument(format!(
                "power attitude requires p <= 1, p != 0, got {p}"
            )));
        }
        Ok(AttitudeFunction::Power { p })
    }

    pub fn capped(alpha: F) -> Result<Self> {
        if !(alpha > F::zero() && alpha < F::one()) {
            return Err(SolverError::Argument(format!(
                "capped attitude requires alpha in (0, 1), got {alpha}"
            )));
        }
        Ok(AttitudeFunction::Capped { alpha })
    }

    pub fn tabulated(xs: Vec<F>, ys: Vec<F>) -> Result<Self> {
        Ok(AttitudeFunction::Tabulated(MonotoneTable::new(xs, ys)?))
    }

    pub fn is_capped(&self) -> bool {
        matches!(self, AttitudeFunction::Capped { .. })
    }

    pub fn cap_level(&self) -> Option<F> {
        match self {
            AttitudeFunction::Capped { alpha } => Some(*alpha),
            _ => None,
        }
    }

    /// (phi(v), phi'(v)). At the capped kink the left derivative (1) is
    /// reported; threshold logic for the capped case never consumes it.
    pub fn eval(&self, v: F) -> Result<(F, F)> {
        if !(v >= F::zero()) || !v.is_finite() {
            return Err(SolverError::Domain(format!(
                "attitude argument must be finite and >= 0, got {v}"
            )));
        }
        match self {
            AttitudeFunction::Linear => Ok((v, F::one())),
            AttitudeFunction::Power { p } => {
                if v == F::zero() {
                    if *p > F::zero() {
                        // phi(0+) = 0 for p > 0; slope blows up for p < 1
                        let d = if *p == F::one() { F::one() } else { F::infinity() };
                        return Ok((F::zero(), d));
                    }
                    return Err(SolverError::Domain(
                        "power attitude with p < 0 diverges at v = 0".into(),
                    ));
                }
                Ok((v.powf(*p) / *p, v.powf(*p - F::one())))
            }
            AttitudeFunction::Log => {
                if v == F::zero() {
                    return Err(SolverError::Domain(
                        "log attitude undefined at v = 0; guard the call".into(),
                    ));
                }
                Ok((v.ln(), F::one() / v))
            }
            AttitudeFunction::Capped { alpha } => {
                if v <= *alpha {
                    Ok((v, F::one()))
                } else {
                    Ok((*alpha, F::zero()))
                }
            }
            AttitudeFunction::Tabulated(tab) => tab.eval(v),
        }
    }

    pub fn value(&self, v: F) -> Result<F> {
        Ok(self.eval(v)?.0)
    }

    /// Aggregation-attitude coefficient zeta(v) = -phi''(v) / phi(v).
    pub fn aggregation_coefficient(&self, v: F) -> Result<F> {
        let phi = self.value(v)?;
        if phi == F::zero() {
            return Err(SolverError::Domain(format!(
                "aggregation coefficient undefined where phi vanishes (v = {v})"
            )));
        }
        let d2 = match self {
            AttitudeFunction::Linear | AttitudeFunction::Capped { .. } => F::zero(),
            AttitudeFunction::Power { p } => (*p - F::one()) * v.powf(*p - F::two()),
            AttitudeFunction::Log => -F::one() / (v * v),
            AttitudeFunction::Tabulated(tab) => {
                let h = F::of(1e-5) * (F::one() + v.abs());
                let vm = (v - h).max(tab.x_min());
                let dp = tab.eval(v + h)?.1;
                let dm = tab.eval(vm)?.1;
                (dp - dm) / (v + h - vm)
            }
        };
        Ok(-d2 / phi)
    }
}

/// Witnesses where v |-> phi'(v) v fails to increase or phi fails to be
/// strictly increasing, as consecutive grid pairs.
#[derive(Clone, Debug)]
pub struct AttitudeConditionReport<F> {
    pub holds: bool,
    pub witnesses: Vec<(F, F)>,
}

/// Scan the grid for the condition "phi'(v) v non-decreasing and phi
/// strictly increasing" with slack 1e-10.
pub fn check_attitude_condition<F: Real>(
    att: &AttitudeFunction<F>,
    v_grid: &[F],
) -> Result<AttitudeConditionReport<F>> {
    let slack = F::of(1e-10);
    let mut witnesses = Vec::new();
    let mut prev: Option<(F, F, F)> = None; // (v, phi, phi' v)
    for &v in v_grid {
        if !(v > F::zero()) {
            return Err(SolverError::Argument(format!(
                "condition grid must be positive, got {v}"
            )));
        }
        let (phi, dphi) = att.eval(v)?;
        let elas = dphi * v;
        if let Some((pv, pphi, pelas)) = prev {
            if !(v > pv) {
                return Err(SolverError::Argument("condition grid must be sorted".into()));
            }
            if elas < pelas - slack || phi <= pphi + slack * pphi.abs() {
                witnesses.push((pv, v));
            }
        }
        prev = Some((v, phi, elas));
    }
    Ok(AttitudeConditionReport {
        holds: witnesses.is_empty(),
        witnesses,
    })
}

/// Monotone value table with Fritsch-Carlson piecewise-cubic interpolation.
#[derive(Clone, Debug)]
pub struct MonotoneTable<F> {
    xs: Vec<F>,
    ys: Vec<F>,
    tangents: Vec<F>,
}

impl<F: Real> MonotoneTable<F> {
    pub fn new(xs: Vec<F>, ys: Vec<F>) -> Result<Self> {
        if xs.len() != ys.len() || xs.len() < 2 {
            return Err(SolverError::Argument(
                "table needs matching x/y lists of length >= 2".into(),
            ));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(SolverError::Argument("table abscissae must be strictly increasing".into()));
        }
        if ys.windows(2).any(|w| w[1] < w[0]) {
            return Err(SolverError::Argument("table values must be non-decreasing".into()));
        }
        let n = xs.len();
        let secants: Vec<F> = (0..n - 1)
            .map(|i| (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]))
            .collect();
        let mut tangents = vec![F::zero(); n];
        tangents[0] = secants[0];
        tangents[n - 1] = secants[n - 2];
        for i in 1..n - 1 {
            tangents[i] = if secants[i - 1] * secants[i] <= F::zero() {
                F::zero()
            } else {
                (secants[i - 1] + secants[i]) * F::half()
            };
        }
        // clamp tangents into the monotone region |t| <= 3 |secant|
        for i in 0..n - 1 {
            if secants[i] == F::zero() {
                tangents[i] = F::zero();
                tangents[i + 1] = F::zero();
                continue;
            }
            let three = F::of(3.0);
            for t in [i, i + 1] {
                let ratio = tangents[t] / secants[i];
                if ratio > three {
                    tangents[t] = three * secants[i];
                } else if ratio < F::zero() {
                    tangents[t] = F::zero();
                }
            }
        }
        Ok(MonotoneTable { xs, ys, tangents })
    }

    pub fn x_min(&self) -> F {
        self.xs[0]
    }

    fn eval(&self, v: F) -> Result<(F, F)> {
        let n = self.xs.len();
        if v < self.xs[0] || v > self.xs[n - 1] {
            return Err(SolverError::Domain(format!(
                "tabulated attitude queried at {v} outside [{}, {}]",
                self.xs[0],
                self.xs[n - 1]
            )));
        }
        let k = self
            .xs
            .partition_point(|&x| x <= v)
            .min(n - 1)
            .saturating_sub(1);
        let h = self.xs[k + 1] - self.xs[k];
        let t = (v - self.xs[k]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let three = F::of(3.0);
        let h00 = F::two() * t3 - three * t2 + F::one();
        let h10 = t3 - F::two() * t2 + t;
        let h01 = -F::two() * t3 + three * t2;
        let h11 = t3 - t2;
        let val = h00 * self.ys[k]
            + h10 * h * self.tangents[k]
            + h01 * self.ys[k + 1]
            + h11 * h * self.tangents[k + 1];
        let d00 = (F::of(6.0) * t2 - F::of(6.0) * t) / h;
        let d10 = three * t2 - F::of(4.0) * t + F::one();
        let d01 = -(F::of(6.0) * t2 - F::of(6.0) * t) / h;
        let d11 = three * t2 - F::two() * t;
        let der = d00 * self.ys[k]
            + d10 * self.tangents[k]
            + d01 * self.ys[k + 1]
            + d11 * self.tangents[k + 1];
        Ok((val, der))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::linspace;

    #[test]
    fn atomic_law_integrates_exactly() {
        let law = DiscountLaw::from_atoms(&[(1.0f64, 0.5), (2.0, 0.5)], false).unwrap();
        assert!((law.integrate(|r| r).unwrap() - 1.5).abs() < 1e-15);
        assert!((law.integrate(|_| 1.0).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(law.rho_star(), 2.0);
        assert!(!law.has_zero_atom());
        let dirac = DiscountLaw::dirac(0.7f64).unwrap();
        assert!((dirac.integrate(|r| r.exp()).unwrap() - 0.7f64.exp()).abs() < 1e-15);
    }

    #[test]
    fn f_space_half_half_law() {
        let fstar = 3.0f64;
        let law = DiscountLaw::from_atoms(&[(0.0, 0.5), (fstar, 0.5)], true).unwrap();
        assert!(law.f_space);
        assert!(law.has_zero_atom());
        assert!((law.integrate(|f| f).unwrap() - fstar / 2.0).abs() < 1e-15);
    }

    #[test]
    fn law_validation() {
        assert!(DiscountLaw::from_atoms(&[(1.0f64, 0.4), (2.0, 0.4)], false).is_err());
        assert!(DiscountLaw::from_atoms(&[(-0.1f64, 1.0)], false).is_err());
        assert!(DiscountLaw::from_atoms(&[(1.0f64, -0.5), (2.0, 1.5)], false).is_err());
        assert!(DiscountLaw::from_atoms(&[(1.0f64, 0.5), (1.0, 0.5)], false).is_err());
        assert!(DiscountLaw::<f64>::from_atoms(&[], false).is_err());
        // normalization path
        let law = DiscountLaw::from_atoms_normalized(&[(1.0f64, 2.0), (3.0, 6.0)], false).unwrap();
        assert!((law.atoms()[0].weight - 0.25).abs() < 1e-15);
        // sorted ascending
        let law = DiscountLaw::from_atoms(&[(2.0f64, 0.5), (1.0, 0.5)], false).unwrap();
        assert!(law.atoms()[0].rate < law.atoms()[1].rate);
    }

    #[test]
    fn density_law_mass_and_mean() {
        // Exp(lambda) truncated to [0, 3], lambda = 2
        let law = DiscountLaw::from_density(|r: f64| 2.0 * (-2.0 * r).exp(), 0.0, 3.0, 64).unwrap();
        assert!((law.integrate(|_| 1.0).unwrap() - 1.0).abs() < 1e-12);
        // truncated-exponential mean: 1/lambda - 3 e^{-6}/(1 - e^{-6})
        let mean = law.integrate(|r| r).unwrap();
        let expect = 0.5 - 3.0 * (-6.0f64).exp() / (1.0 - (-6.0f64).exp());
        assert!((mean - expect).abs() < 1e-10, "{mean} vs {expect}");
        assert!(law.atoms().is_empty() && !law.density_nodes().is_empty());
    }

    #[test]
    fn integrand_errors_carry_rate() {
        let law = DiscountLaw::from_atoms(&[(0.0f64, 0.5), (2.0, 0.5)], false).unwrap();
        let err = law.integrate(|r| 1.0 / r).unwrap_err();
        assert!(err.to_string().contains("r = 0"));
    }

    #[test]
    fn csv_load_normalizes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("law.csv");
        std::fs::write(&path, "# rate, weight\n0.05, 2\n0.10, 6\n").unwrap();
        let law: DiscountLaw<f64> = DiscountLaw::from_csv_path(&path).unwrap();
        assert_eq!(law.atoms().len(), 2);
        assert!((law.atoms()[0].weight - 0.25).abs() < 1e-15);
        assert!((law.rho_star() - 0.10).abs() < 1e-15);
        std::fs::write(&path, "0.05\n").unwrap();
        assert!(DiscountLaw::<f64>::from_csv_path(&path).is_err());
    }

    #[test]
    fn attitude_eval_reference_values() {
        let lin = AttitudeFunction::<f64>::Linear;
        assert_eq!(lin.eval(0.3).unwrap(), (0.3, 1.0));
        let cap = AttitudeFunction::capped(0.25f64).unwrap();
        assert_eq!(cap.eval(0.3).unwrap(), (0.25, 0.0));
        assert_eq!(cap.eval(0.25).unwrap(), (0.25, 1.0)); // left derivative at the kink
        assert_eq!(cap.eval(0.1).unwrap(), (0.1, 1.0));
        // phi(v) = v^p / p
        let pow = AttitudeFunction::power(0.5f64).unwrap();
        let (v, d) = pow.eval(4.0).unwrap();
        assert!((v - 4.0).abs() < 1e-15);
        assert!((d - 0.5).abs() < 1e-15);
        let log = AttitudeFunction::<f64>::Log;
        let (v, d) = log.eval(std::f64::consts::E).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
        assert!((d - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn attitude_domain_errors() {
        assert!(AttitudeFunction::<f64>::Log.eval(0.0).is_err());
        assert!(AttitudeFunction::<f64>::Linear.eval(-0.1).is_err());
        assert!(AttitudeFunction::power(-1.0f64).unwrap().eval(0.0).is_err());
        assert!(AttitudeFunction::power(0.0f64).is_err());
        assert!(AttitudeFunction::power(1.5f64).is_err());
        assert!(AttitudeFunction::capped(0.0f64).is_err());
        assert!(AttitudeFunction::capped(1.0f64).is_err());
        // p in (0, 1): value 0 at 0, infinite slope
        let (v, d) = AttitudeFunction::power(0.5f64).unwrap().eval(0.0).unwrap();
        assert_eq!(v, 0.0);
        assert!(d.is_infinite());
    }

    #[test]
    fn aggregation_coefficient_values() {
        let lin = AttitudeFunction::<f64>::Linear;
        assert_eq!(lin.aggregation_coefficient(0.7).unwrap(), 0.0);
        // phi = v^p / p: zeta(1) = -(p - 1) / (1 / p) = p (1 - p) -> 0.25 at p = 1/2
        let pow = AttitudeFunction::power(0.5f64).unwrap();
        assert!((pow.aggregation_coefficient(1.0).unwrap() - 0.25).abs() < 1e-14);
        let log = AttitudeFunction::<f64>::Log;
        let z = log.aggregation_coefficient(std::f64::consts::E).unwrap();
        assert!((z - (-2.0f64).exp()).abs() < 1e-14);
        // phi = 0 rejected
        assert!(lin.aggregation_coefficient(0.0).is_err());
    }

    #[test]
    fn condition_scan_results() {
        let grid = linspace(0.05f64, 3.0, 400);
        for att in [
            AttitudeFunction::Linear,
            AttitudeFunction::Log,
            AttitudeFunction::power(0.3).unwrap(),
            AttitudeFunction::power(0.5).unwrap(),
            AttitudeFunction::power(1.0).unwrap(),
        ] {
            let rep = check_attitude_condition(&att, &grid).unwrap();
            assert!(rep.holds, "{att:?} should pass");
        }
        // phi' v = v^p decreases for p < 0
        let rep =
            check_attitude_condition(&AttitudeFunction::power(-1.0f64).unwrap(), &grid).unwrap();
        assert!(!rep.holds);
        // capped: fails with a witness straddling alpha
        let cap = AttitudeFunction::capped(0.25f64).unwrap();
        let rep = check_attitude_condition(&cap, &grid).unwrap();
        assert!(!rep.holds);
        assert!(rep
            .witnesses
            .iter()
            .any(|&(lo, hi)| lo <= 0.25 && 0.25 <= hi));
    }

    #[test]
    fn condition_scan_tabulated_saturating() {
        // phi(v) = -e^{-2v}: increasing but phi' v = 2 v e^{-2v} humps at v = 1/2
        let xs = linspace(0.05f64, 3.0, 300);
        let ys: Vec<f64> = xs.iter().map(|&v| -(-2.0 * v).exp()).collect();
        let att = AttitudeFunction::tabulated(xs.clone(), ys).unwrap();
        let inner = linspace(0.1f64, 2.9, 200);
        let rep = check_attitude_condition(&att, &inner).unwrap();
        assert!(!rep.holds);
    }

    #[test]
    fn tabulated_tracks_smooth_function() {
        let xs = linspace(0.0f64, 2.0, 400);
        let ys: Vec<f64> = xs.iter().map(|&v| v * v).collect();
        let att = AttitudeFunction::tabulated(xs, ys).unwrap();
        for &v in &[0.31f64, 0.77, 1.23, 1.9] {
            let (val, der) = att.eval(v).unwrap();
            assert!((val - v * v).abs() < 1e-5);
            assert!((der - 2.0 * v).abs() < 1e-3);
        }
        assert!(att.eval(2.5).is_err());
    }

    #[test]
    fn tabulated_validation() {
        assert!(AttitudeFunction::tabulated(vec![0.0f64, 1.0], vec![1.0, 0.5]).is_err());
        assert!(AttitudeFunction::tabulated(vec![0.0f64, 0.0], vec![0.0, 1.0]).is_err());
        assert!(AttitudeFunction::tabulated(vec![0.0f64], vec![0.0]).is_err());
    }
}
