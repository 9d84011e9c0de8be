use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

/// Multivariate polynomial in up to three variables, stored as sparse monomial terms.
#[derive(Clone, Debug, PartialEq)]
pub struct Poly {
    pub dim: usize,
    pub terms: BTreeMap<[u32; 3], f64>,
}

impl Poly {
    pub fn zero(dim: usize) -> Self {
        Poly { dim, terms: BTreeMap::new() }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        let mut p = Poly::zero(dim);
        if c != 0.0 {
            p.terms.insert([0, 0, 0], c);
        }
        p
    }

    /// The coordinate function x_i.
    pub fn var(dim: usize, i: usize) -> Self {
        let mut e = [0u32; 3];
        e[i] = 1;
        let mut p = Poly::zero(dim);
        p.terms.insert(e, 1.0);
        p
    }

    pub fn monomial(dim: usize, e: [u32; 3]) -> Self {
        let mut p = Poly::zero(dim);
        p.terms.insert(e, 1.0);
        p
    }

    /// Barycentric coordinates of the reference simplex: lambda_0 = 1 - sum x, lambda_i = x_i.
    pub fn barycentric(dim: usize, i: usize) -> Self {
        if i == 0 {
            let mut p = Poly::constant(dim, 1.0);
            for j in 0..dim {
                p = p - Poly::var(dim, j);
            }
            p
        } else {
            Poly::var(dim, i - 1)
        }
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|e| e[0] + e[1] + e[2]).max().unwrap_or(0)
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut p = self.clone();
        for v in p.terms.values_mut() {
            *v *= s;
        }
        p.prune();
        p
    }

    fn prune(&mut self) {
        self.terms.retain(|_, v| *v != 0.0);
    }

    pub fn deriv(&self, i: usize) -> Self {
        let mut p = Poly::zero(self.dim);
        for (e, c) in &self.terms {
            if e[i] > 0 {
                let mut f = *e;
                f[i] -= 1;
                *p.terms.entry(f).or_insert(0.0) += c * e[i] as f64;
            }
        }
        p.prune();
        p
    }

    pub fn pow(&self, n: u32) -> Self {
        let mut r = Poly::constant(self.dim, 1.0);
        for _ in 0..n {
            r = &r * self;
        }
        r
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for (e, c) in &self.terms {
            let mut t = *c;
            for i in 0..self.dim {
                t *= x[i].powi(e[i] as i32);
            }
            s += t;
        }
        s
    }

    /// Coefficients with respect to a monomial set that contains every term.
    pub fn coeffs_in(&self, set: &MonomialSet) -> Vec<f64> {
        let mut c = vec![0.0; set.len()];
        for (e, v) in &self.terms {
            let i = set
                .index_of(*e)
                .unwrap_or_else(|| panic!("monomial {:?} outside set of degree {}", e, set.degree));
            c[i] += v;
        }
        c
    }
}

impl Add for Poly {
    type Output = Poly;
    fn add(self, rhs: Poly) -> Poly {
        &self + &rhs
    }
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        let mut p = self.clone();
        for (e, c) in &rhs.terms {
            *p.terms.entry(*e).or_insert(0.0) += c;
        }
        p.prune();
        p
    }
}

impl Sub for Poly {
    type Output = Poly;
    fn sub(self, rhs: Poly) -> Poly {
        &self - &rhs
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        self + &rhs.scale(-1.0)
    }
}

impl Neg for Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        self.scale(-1.0)
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        let mut p = Poly::zero(self.dim.max(rhs.dim));
        for (a, ca) in &self.terms {
            for (b, cb) in &rhs.terms {
                let e = [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
                *p.terms.entry(e).or_insert(0.0) += ca * cb;
            }
        }
        p.prune();
        p
    }
}

impl Mul for Poly {
    type Output = Poly;
    fn mul(self, rhs: Poly) -> Poly {
        &self * &rhs
    }
}

/// Legendre polynomial P_n evaluated on a polynomial argument.
pub fn legendre_of(n: u32, arg: &Poly) -> Poly {
    let dim = arg.dim;
    let mut p0 = Poly::constant(dim, 1.0);
    if n == 0 {
        return p0;
    }
    let mut p1 = arg.clone();
    for m in 1..n {
        let m = m as f64;
        let next = (&(arg * &p1).scale((2.0 * m + 1.0) / (m + 1.0))) - &p0.scale(m / (m + 1.0));
        p0 = p1;
        p1 = next;
    }
    p1
}

/// All monomials of total degree at most `degree` in `dim` variables.
#[derive(Clone, Debug)]
pub struct MonomialSet {
    pub dim: usize,
    pub degree: u32,
    pub exps: Vec<[u32; 3]>,
}

/// Monomial values and derivatives at one point.
#[derive(Clone, Debug)]
pub struct MonoTab {
    pub val: Vec<f64>,
    pub grad: Vec<[f64; 3]>,
    pub hess: Vec<[[f64; 3]; 3]>,
}

impl MonomialSet {
    pub fn new(dim: usize, degree: u32) -> Self {
        let mut exps = Vec::new();
        for total in 0..=degree {
            match dim {
                0 => {
                    if total == 0 {
                        exps.push([0, 0, 0]);
                    }
                }
                1 => exps.push([total, 0, 0]),
                2 => {
                    for a in (0..=total).rev() {
                        exps.push([a, total - a, 0]);
                    }
                }
                3 => {
                    for a in (0..=total).rev() {
                        for b in (0..=total - a).rev() {
                            exps.push([a, b, total - a - b]);
                        }
                    }
                }
                _ => panic!("unsupported dimension {dim}"),
            }
        }
        MonomialSet { dim, degree, exps }
    }

    pub fn len(&self) -> usize {
        self.exps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exps.is_empty()
    }

    pub fn index_of(&self, e: [u32; 3]) -> Option<usize> {
        self.exps.iter().position(|f| *f == e)
    }

    pub fn values(&self, x: &[f64]) -> Vec<f64> {
        let pw = self.powers(x);
        self.exps
            .iter()
            .map(|e| (0..self.dim).map(|i| pw[i][e[i] as usize]).product())
            .collect()
    }

    fn powers(&self, x: &[f64]) -> Vec<Vec<f64>> {
        (0..self.dim)
            .map(|i| {
                let mut v = vec![1.0; self.degree as usize + 1];
                for p in 1..v.len() {
                    v[p] = v[p - 1] * x[i];
                }
                v
            })
            .collect()
    }

    /// Values, gradients and Hessians of all monomials at `x`.
    pub fn tabulate(&self, x: &[f64]) -> MonoTab {
        let pw = self.powers(x);
        let d = self.dim;
        // derivative of x^e of order r in one variable
        let dp = |i: usize, e: u32, r: u32| -> f64 {
            if e < r {
                return 0.0;
            }
            let mut c = 1.0;
            for j in 0..r {
                c *= (e - j) as f64;
            }
            c * pw[i][(e - r) as usize]
        };
        let n = self.exps.len();
        let mut tab = MonoTab {
            val: vec![0.0; n],
            grad: vec![[0.0; 3]; n],
            hess: vec![[[0.0; 3]; 3]; n],
        };
        for (m, e) in self.exps.iter().enumerate() {
            let f = |orders: [u32; 3]| -> f64 { (0..d).map(|i| dp(i, e[i], orders[i])).product() };
            tab.val[m] = f([0, 0, 0]);
            for a in 0..d {
                let mut o = [0; 3];
                o[a] = 1;
                tab.grad[m][a] = f(o);
                for b in a..d {
                    let mut o = [0; 3];
                    o[a] += 1;
                    o[b] += 1;
                    let h = f(o);
                    tab.hess[m][a][b] = h;
                    tab.hess[m][b][a] = h;
                }
            }
        }
        tab
    }
}

/// Number of monomials of degree at most `p` in `d` variables.
pub fn dim_p(d: usize, p: i64) -> usize {
    if p < 0 {
        return 0;
    }
    let p = p as usize;
    match d {
        0 => 1,
        1 => p + 1,
        2 => (p + 1) * (p + 2) / 2,
        3 => (p + 1) * (p + 2) * (p + 3) / 6,
        _ => panic!("unsupported dimension {d}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_and_derivatives() {
        let x = Poly::var(2, 0);
        let y = Poly::var(2, 1);
        let p = &(&x * &x) * &y;
        assert_eq!(p.degree(), 3);
        assert_eq!(p.eval(&[2.0, 3.0]), 12.0);
        assert_eq!(p.deriv(0).eval(&[2.0, 3.0]), 12.0);
        assert_eq!(p.deriv(1).eval(&[2.0, 3.0]), 4.0);
        let q = &p - &p;
        assert!(q.terms.is_empty());
    }

    #[test]
    fn legendre_values() {
        let t = Poly::var(1, 0);
        let p3 = legendre_of(3, &t);
        let x: f64 = 0.3;
        let exact = 0.5 * (5.0 * x.powi(3) - 3.0 * x);
        assert!((p3.eval(&[x]) - exact).abs() < 1e-14);
    }

    #[test]
    fn monomial_tabulation_matches_poly() {
        let set = MonomialSet::new(3, 3);
        assert_eq!(set.len(), dim_p(3, 3));
        let x = [0.2, 0.3, 0.4];
        let tab = set.tabulate(&x);
        for (m, e) in set.exps.iter().enumerate() {
            let p = Poly::monomial(3, *e);
            assert!((tab.val[m] - p.eval(&x)).abs() < 1e-14);
            for a in 0..3 {
                assert!((tab.grad[m][a] - p.deriv(a).eval(&x)).abs() < 1e-13);
                for b in 0..3 {
                    assert!((tab.hess[m][a][b] - p.deriv(a).deriv(b).eval(&x)).abs() < 1e-12);
                }
            }
        }
    }
}
