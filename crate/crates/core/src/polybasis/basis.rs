use nalgebra::DMatrix;

use super::poly::{dim_p, MonomialSet, Poly};
use super::quadrature::{simplex_quadrature, QuadratureRule};

/// Scalar polynomial basis on a reference simplex, stored as monomial coefficients.
#[derive(Clone, Debug)]
pub struct ScalarBasis {
    pub dim: usize,
    pub degree: u32,
    pub mono: MonomialSet,
    /// one coefficient row per basis function
    pub coeffs: Vec<Vec<f64>>,
}

/// Basis values and reference derivatives at one point.
#[derive(Clone, Debug, Default)]
pub struct BasisTab {
    pub val: Vec<f64>,
    pub grad: Vec<[f64; 3]>,
    pub hess: Vec<[[f64; 3]; 3]>,
}

/// Equispaced lattice points of degree r on the reference simplex.
pub fn lattice_points(dim: usize, r: u32) -> Vec<[f64; 3]> {
    if r == 0 {
        let c = 1.0 / (dim as f64 + 1.0);
        let mut p = [0.0; 3];
        for v in p.iter_mut().take(dim) {
            *v = c;
        }
        return vec![p];
    }
    let set = MonomialSet::new(dim, r);
    set.exps
        .iter()
        .map(|e| {
            let mut p = [0.0; 3];
            for i in 0..dim {
                p[i] = e[i] as f64 / r as f64;
            }
            p
        })
        .collect()
}

impl ScalarBasis {
    pub fn from_polys(dim: usize, polys: &[Poly]) -> Self {
        let degree = polys.iter().map(|p| p.degree()).max().unwrap_or(0);
        let mono = MonomialSet::new(dim, degree);
        let coeffs = polys.iter().map(|p| p.coeffs_in(&mono)).collect();
        ScalarBasis { dim, degree, mono, coeffs }
    }

    /// Nodal Lagrange basis on equispaced points. Dimension 0 gives the constant 1.
    pub fn lagrange(dim: usize, degree: u32) -> Self {
        if dim == 0 {
            return ScalarBasis {
                dim,
                degree: 0,
                mono: MonomialSet::new(0, 0),
                coeffs: vec![vec![1.0]],
            };
        }
        let mono = MonomialSet::new(dim, degree);
        let nodes = lattice_points(dim, degree);
        let n = mono.len();
        let mut v = DMatrix::<f64>::zeros(n, n);
        for (i, x) in nodes.iter().enumerate() {
            let vals = mono.values(x);
            for m in 0..n {
                v[(i, m)] = vals[m];
            }
        }
        // C V^T = I
        let inv = v.transpose().try_inverse().expect("singular Vandermonde");
        let coeffs = (0..n).map(|i| (0..n).map(|m| inv[(i, m)]).collect()).collect();
        ScalarBasis { dim, degree, mono, coeffs }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn values(&self, x: &[f64]) -> Vec<f64> {
        let m = self.mono.values(x);
        self.coeffs.iter().map(|c| dot(c, &m)).collect()
    }

    pub fn tabulate(&self, x: &[f64]) -> BasisTab {
        let t = self.mono.tabulate(x);
        let mut out = BasisTab {
            val: Vec::with_capacity(self.len()),
            grad: Vec::with_capacity(self.len()),
            hess: Vec::with_capacity(self.len()),
        };
        for c in &self.coeffs {
            out.val.push(dot(c, &t.val));
            let mut g = [0.0; 3];
            let mut h = [[0.0; 3]; 3];
            for (m, cm) in c.iter().enumerate() {
                if *cm == 0.0 {
                    continue;
                }
                for a in 0..3 {
                    g[a] += cm * t.grad[m][a];
                    for b in 0..3 {
                        h[a][b] += cm * t.hess[m][a][b];
                    }
                }
            }
            out.grad.push(g);
            out.hess.push(h);
        }
        out
    }

    /// Gram matrix on the reference simplex.
    pub fn gram(&self) -> DMatrix<f64> {
        let q = simplex_quadrature(self.dim.max(1), 2 * self.degree as usize);
        let n = self.len();
        let mut g = DMatrix::zeros(n, n);
        for (p, w) in q.points.iter().zip(&q.weights) {
            let v = self.values(p);
            for i in 0..n {
                for j in 0..n {
                    g[(i, j)] += w * v[i] * v[j];
                }
            }
        }
        g
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// L2 projection onto P^r of a facet, computed on the reference facet simplex.
#[derive(Clone, Debug)]
pub struct FacetProjector {
    pub facet_dim: usize,
    pub basis: ScalarBasis,
    pub mass: DMatrix<f64>,
    pub mass_inv: DMatrix<f64>,
}

impl FacetProjector {
    pub fn new(facet_dim: usize, degree: u32) -> Self {
        let basis = ScalarBasis::lagrange(facet_dim, degree);
        let mass = if facet_dim == 0 {
            DMatrix::from_element(1, 1, 1.0)
        } else {
            basis.gram()
        };
        let mass_inv = mass.clone().try_inverse().expect("singular facet mass");
        FacetProjector { facet_dim, basis, mass, mass_inv }
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    /// Coefficients of the projection of `f`, integrated with `quad` on the reference facet.
    pub fn project(&self, quad: &QuadratureRule, f: impl Fn(&[f64; 3]) -> f64) -> Vec<f64> {
        let n = self.len();
        let mut rhs = vec![0.0; n];
        for (p, w) in quad.points.iter().zip(&quad.weights) {
            let fv = f(p);
            let b = self.basis.values(p);
            for i in 0..n {
                rhs[i] += w * fv * b[i];
            }
        }
        (0..n).map(|i| (0..n).map(|j| self.mass_inv[(i, j)] * rhs[j]).sum()).collect()
    }

    pub fn eval(&self, coeffs: &[f64], x: &[f64]) -> f64 {
        dot(coeffs, &self.basis.values(x))
    }
}

/// dim of P^r on a d-simplex.
pub fn poly_dim(d: usize, r: i64) -> usize {
    dim_p(d, r)
}
