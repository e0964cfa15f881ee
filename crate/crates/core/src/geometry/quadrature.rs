//! Tensor-product Gauss–Legendre rules on the reference square `[0, 1]^2`.

/// Quadrature points and weights on the reference square. Weights sum to
/// the reference area, 1.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The 3x3 rule used for stiffness and area integrals.
    pub fn default_shell() -> Self {
        quadrature(5)
    }

    /// Map the rule onto the axis-aligned box `[lo, hi]`; weights are scaled
    /// by the box area relative to the reference square.
    pub fn mapped(&self, lo: [f64; 2], hi: [f64; 2]) -> Self {
        let d = [hi[0] - lo[0], hi[1] - lo[1]];
        Self {
            points: self
                .points
                .iter()
                .map(|p| [lo[0] + d[0] * p[0], lo[1] + d[1] * p[1]])
                .collect(),
            weights: self.weights.iter().map(|w| w * d[0] * d[1]).collect(),
            degree: self.degree,
        }
    }
}

/// Tensor-product Gauss rule integrating polynomials of degree `order` in
/// each variable exactly. Panics if `order == 0`.
pub fn quadrature(order: usize) -> QuadratureRule {
    assert!(order >= 1, "quadrature order must be at least 1");
    let n = order / 2 + 1;
    let (x, w) = gauss_legendre(n);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for b in 0..n {
        for a in 0..n {
            points.push([x[a], x[b]]);
            weights.push(w[a] * w[b]);
        }
    }
    QuadratureRule {
        points,
        weights,
        degree: 2 * n - 1,
    }
}

/// Gauss–Legendre nodes and weights on `[0, 1]` via Newton iteration on the
/// Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        if d != 0.0 {
            dp = d;
        }
        let weight = 2.0 / ((1.0 - z * z) * dp * dp);
        // map from [-1, 1] to [0, 1]
        x[i] = 0.5 * (1.0 - z);
        x[n - 1 - i] = 0.5 * (1.0 + z);
        w[i] = 0.5 * weight;
        w[n - 1 - i] = 0.5 * weight;
    }
    (x, w)
}

fn legendre(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, dp)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_one_is_midpoint() {
        let r = quadrature(1);
        assert_eq!(r.len(), 1);
        assert!((r.weights[0] - 1.0).abs() < 1e-15);
        assert!((r.points[0][0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn order_five_is_three_by_three() {
        let r = quadrature(5);
        assert_eq!(r.len(), 9);
        let s: f64 = r.weights.iter().sum();
        assert!((s - 1.0).abs() < 1e-14);
        assert!(r.weights.iter().all(|&w| w > 0.0));
    }

    #[test]
    fn integrates_bilinear_monomial() {
        // int_0^1 int_0^1 x y = 1/4
        let r = quadrature(2);
        let v: f64 = r
            .points
            .iter()
            .zip(&r.weights)
            .map(|(p, w)| w * p[0] * p[1])
            .sum();
        assert!((v - 0.25).abs() < 1e-15);
    }

    #[test]
    fn exact_up_to_declared_degree() {
        for order in 1..=9 {
            let r = quadrature(order);
            for a in 0..=order {
                for b in 0..=order {
                    let v: f64 = r
                        .points
                        .iter()
                        .zip(&r.weights)
                        .map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32))
                        .sum();
                    let exact = 1.0 / ((a + 1) * (b + 1)) as f64;
                    assert!((v - exact).abs() < 1e-13, "order {order}: x^{a} y^{b}");
                }
            }
        }
    }

    #[test]
    fn mapped_rule_area() {
        let r = quadrature(3).mapped([0.2, 0.1], [0.5, 0.3]);
        let s: f64 = r.weights.iter().sum();
        assert!((s - 0.06).abs() < 1e-15);
    }
}
