/// Quadrature rule on the reference simplex {x_i >= 0, sum x_i <= 1}.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    pub dim: usize,
    pub order: usize,
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

/// Gauss-Legendre nodes and weights on [0, 1].
pub fn gauss_legendre01(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        // Newton on P_n starting from the Chebyshev-like guess
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = z;
            for m in 2..=n {
                let m = m as f64;
                let p2 = ((2.0 * m - 1.0) * z * p1 - (m - 1.0) * p0) / m;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[n - 1 - i] = 0.5 * (z + 1.0);
        w[n - 1 - i] = 1.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// Collapsed-coordinate Gauss rule exact for total degree `order`.
pub fn simplex_quadrature(dim: usize, order: usize) -> QuadratureRule {
    assert!((1..=3).contains(&dim), "unsupported dimension {dim}");
    if order <= 1 {
        let c = 1.0 / (dim as f64 + 1.0);
        let mut p = [0.0; 3];
        for v in p.iter_mut().take(dim) {
            *v = c;
        }
        let w = match dim {
            1 => 1.0,
            2 => 0.5,
            _ => 1.0 / 6.0,
        };
        return QuadratureRule { dim, order, points: vec![p], weights: vec![w] };
    }
    let n = (order + dim).div_ceil(2);
    let (gx, gw) = gauss_legendre01(n);
    let mut points = Vec::new();
    let mut weights = Vec::new();
    match dim {
        1 => {
            for i in 0..n {
                points.push([gx[i], 0.0, 0.0]);
                weights.push(gw[i]);
            }
        }
        2 => {
            for i in 0..n {
                for j in 0..n {
                    let u = gx[i];
                    let v = gx[j];
                    points.push([u, v * (1.0 - u), 0.0]);
                    weights.push(gw[i] * gw[j] * (1.0 - u));
                }
            }
        }
        _ => {
            for i in 0..n {
                for j in 0..n {
                    for l in 0..n {
                        let u = gx[i];
                        let v = gx[j];
                        let s = gx[l];
                        points.push([u, v * (1.0 - u), s * (1.0 - u) * (1.0 - v)]);
                        weights.push(gw[i] * gw[j] * gw[l] * (1.0 - u) * (1.0 - u) * (1.0 - v));
                    }
                }
            }
        }
    }
    QuadratureRule { dim, order, points, weights }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(|i| i as f64).product()
    }

    // integral of x^a y^b z^c over the reference simplex
    fn exact(dim: usize, e: [u32; 3]) -> f64 {
        let s: u32 = e.iter().take(dim).sum();
        let num: f64 = e.iter().take(dim).map(|&a| factorial(a)).product();
        num / factorial(s + dim as u32)
    }

    #[test]
    fn centroid_rule() {
        let q = simplex_quadrature(2, 1);
        assert_eq!(q.points.len(), 1);
        assert!((q.points[0][0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((q.weights[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn x2y_on_triangle() {
        for order in 3..8 {
            let q = simplex_quadrature(2, order);
            let s: f64 = q.points.iter().zip(&q.weights).map(|(p, w)| w * p[0] * p[0] * p[1]).sum();
            assert!((s - 1.0 / 60.0).abs() < 1e-15);
        }
    }

    #[test]
    fn exactness_all_monomials() {
        for dim in 1..=3 {
            for order in 0..=12 {
                let q = simplex_quadrature(dim, order);
                let wsum: f64 = q.weights.iter().sum();
                assert!((wsum - exact(dim, [0, 0, 0])).abs() < 1e-14);
                assert!(q.weights.iter().all(|&w| w > 0.0));
                let set = crate::polybasis::poly::MonomialSet::new(dim, order as u32);
                for e in &set.exps {
                    let s: f64 = q
                        .points
                        .iter()
                        .zip(&q.weights)
                        .map(|(p, w)| w * (0..dim).map(|i| p[i].powi(e[i] as i32)).product::<f64>())
                        .sum();
                    assert!((s - exact(dim, *e)).abs() < 1e-13, "dim {dim} order {order} {e:?}");
                }
            }
        }
    }
}
