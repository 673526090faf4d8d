//! Gauss rules on the unit segment and collapsed (Duffy) product rules on the
//! reference triangle `(0,0), (1,0), (0,1)`.

use crate::error::{Error, Result};

/// Highest polynomial exactness handed out by [`TriangleRule::new`] and
/// [`SegmentRule::new`].
pub const MAX_EXACTNESS: usize = 40;

/// Gauss-Legendre nodes and weights on `[0, 1]`.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Chebyshev-like initial guess for the i-th root on [-1, 1].
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = 0.5 * (1.0 - x);
        weights[i] = 0.5 * w;
    }
    (nodes, weights)
}

#[derive(Debug, Clone)]
pub struct SegmentRule {
    /// Parameters in `[0, 1]`.
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    pub exactness: usize,
}

impl SegmentRule {
    pub fn new(exactness: usize) -> Result<Self> {
        if exactness > MAX_EXACTNESS {
            return Err(Error::QuadratureUnavailable { requested: exactness, max: MAX_EXACTNESS });
        }
        let n = (exactness + 2) / 2;
        let (points, weights) = gauss_legendre(n.max(1));
        Ok(Self { points, weights, exactness })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct TriangleRule {
    /// Barycentric coordinates `(1 - x - y, x, y)` of the points.
    pub points: Vec<[f64; 3]>,
    /// Weights summing to the reference area 1/2.
    pub weights: Vec<f64>,
    pub exactness: usize,
}

impl TriangleRule {
    /// Rule exact for all polynomials of total degree `<= exactness`.
    ///
    /// Built from the map `x = u (1 - v), y = v`; the Jacobian `1 - v` raises
    /// the degree in `v` by one, hence `ceil((d + 2) / 2)` points per direction.
    pub fn new(exactness: usize) -> Result<Self> {
        if exactness == 0 || exactness > MAX_EXACTNESS {
            return Err(Error::QuadratureUnavailable { requested: exactness, max: MAX_EXACTNESS });
        }
        let n = (exactness + 3) / 2;
        let (gp, gw) = gauss_legendre(n);
        let mut points = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for (&v, &wv) in gp.iter().zip(&gw) {
            for (&u, &wu) in gp.iter().zip(&gw) {
                let x = u * (1.0 - v);
                let y = v;
                points.push([1.0 - x - y, x, y]);
                weights.push(wu * wv * (1.0 - v));
            }
        }
        Ok(Self { points, weights, exactness })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    /// int_T x^a y^b = a! b! / (a + b + 2)!
    fn monomial_exact(a: u32, b: u32) -> f64 {
        factorial(a) * factorial(b) / factorial(a + b + 2)
    }

    #[test]
    fn unit_integrand_gives_reference_area() {
        for d in 1..=12 {
            let rule = TriangleRule::new(d).unwrap();
            let s: f64 = rule.weights.iter().sum();
            assert!((s - 0.5).abs() < 1e-14, "degree {d}: {s}");
            assert!(rule.weights.iter().all(|&w| w > 0.0));
        }
    }

    #[test]
    fn x2y2_with_degree_four_rule() {
        let rule = TriangleRule::new(4).unwrap();
        let v: f64 = rule.points.iter().zip(&rule.weights).map(|(p, w)| w * p[1].powi(2) * p[2].powi(2)).sum();
        assert!((v - 1.0 / 180.0).abs() < 1e-15);
    }

    #[test]
    fn all_monomials_up_to_exactness() {
        for d in 1..=10u32 {
            let rule = TriangleRule::new(d as usize).unwrap();
            for a in 0..=d {
                for b in 0..=(d - a) {
                    let v: f64 = rule
                        .points
                        .iter()
                        .zip(&rule.weights)
                        .map(|(p, w)| w * p[1].powi(a as i32) * p[2].powi(b as i32))
                        .sum();
                    let exact = monomial_exact(a, b);
                    assert!((v - exact).abs() < 1e-14 * exact.max(1.0), "d={d} a={a} b={b}");
                }
            }
        }
    }

    #[test]
    fn segment_cubic() {
        let rule = SegmentRule::new(3).unwrap();
        let v: f64 = rule.points.iter().zip(&rule.weights).map(|(t, w)| w * t.powi(3)).sum();
        assert!((v - 0.25).abs() < 1e-15);
        for d in 0..=15 {
            let rule = SegmentRule::new(d).unwrap();
            let v: f64 = rule.points.iter().zip(&rule.weights).map(|(t, w)| w * t.powi(d as i32)).sum();
            assert!((v - 1.0 / (d as f64 + 1.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn unavailable_degree_is_an_error() {
        assert!(matches!(TriangleRule::new(MAX_EXACTNESS + 1), Err(Error::QuadratureUnavailable { .. })));
        assert!(SegmentRule::new(MAX_EXACTNESS + 1).is_err());
        assert!(TriangleRule::new(0).is_err());
    }
}
