//! Gauss-Legendre quadrature nodes.
//!
//! Used once, at discount-law construction, to discretize a continuous
//! density of discount rates into a finite node list. Nodes are the roots
//! of the Legendre polynomial P_n found by Newton iteration from the
//! Chebyshev-like initial guess; weights are 2 / ((1 - x^2) P'_n(x)^2).

use crate::scalar::Real;

/// Nodes and weights of the `n`-point rule on `[-1, 1]`.
pub fn gauss_legendre<F: Real>(n: usize) -> (Vec<F>, Vec<F>) {
    assert!(n >= 1);
    let mut nodes = vec![F::zero(); n];
    let mut weights = vec![F::zero(); n];
    let nf = F::from_usize(n).unwrap();
    for i in 0..n {
        let k = F::from_usize(i).unwrap();
        let mut x = ((k + F::of(0.75)) * F::of(std::f64::consts::PI) / (nf + F::half())).cos();
        let mut dp = F::zero();
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x = x - dx;
            if dx.abs() < F::of(1e-15) {
                break;
            }
        }
        nodes[i] = -x; // ascending order
        weights[i] = F::two() / ((F::one() - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// The `n`-point rule mapped onto `[a, b]`.
pub fn gauss_legendre_on<F: Real>(n: usize, a: F, b: F) -> (Vec<F>, Vec<F>) {
    let (xs, ws) = gauss_legendre::<F>(n);
    let mid = (a + b) * F::half();
    let hw = (b - a) * F::half();
    (
        xs.iter().map(|&x| mid + hw * x).collect(),
        ws.iter().map(|&w| w * hw).collect(),
    )
}

fn legendre_with_derivative<F: Real>(n: usize, x: F) -> (F, F) {
    let mut p0 = F::one();
    let mut p1 = x;
    for k in 2..=n {
        let kf = F::from_usize(k).unwrap();
        let p2 = ((F::two() * kf - F::one()) * x * p1 - (kf - F::one()) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (F::one(), F::zero());
    }
    if n == 1 {
        return (x, F::one());
    }
    let nf = F::from_usize(n).unwrap();
    let d = nf * (x * p1 - p0) / (x * x - F::one());
    (p1, d)
}
