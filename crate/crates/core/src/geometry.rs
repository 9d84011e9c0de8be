//! Small fixed-size helpers for affine simplex maps. 2D data is padded to 3D with z = 0.

pub type Point = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

pub fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn dot3(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm3(a: &Point) -> f64 {
    dot3(a, a).sqrt()
}

pub fn cross(a: &Point, b: &Point) -> Point {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub fn det3(m: &Mat3) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

pub fn inv3(m: &Mat3) -> Mat3 {
    let d = det3(m);
    let mut r = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let (a, b) = ((j + 1) % 3, (j + 2) % 3);
            let (c, e) = ((i + 1) % 3, (i + 2) % 3);
            r[i][j] = (m[a][c] * m[b][e] - m[a][e] * m[b][c]) / d;
        }
    }
    r
}

pub fn matvec(m: &Mat3, x: &Point) -> Point {
    [dot3(&m[0], x), dot3(&m[1], x), dot3(&m[2], x)]
}

pub fn transpose(m: &Mat3) -> Mat3 {
    let mut r = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            r[i][j] = m[j][i];
        }
    }
    r
}

pub fn matmul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut r = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            r[i][j] = (0..3).map(|l| a[i][l] * b[l][j]).sum();
        }
    }
    r
}

/// x = x0 + J xi for a simplex with vertices v_0..v_dim.
#[derive(Clone, Debug)]
pub struct AffineMap {
    pub dim: usize,
    pub x0: Point,
    pub jac: Mat3,
    pub inv: Mat3,
    pub det: f64,
}

impl AffineMap {
    pub fn new(vertices: &[Point]) -> Self {
        let dim = vertices.len() - 1;
        let x0 = vertices[0];
        let mut jac = [[0.0; 3]; 3];
        for c in 0..3 {
            if c < dim {
                let d = sub(&vertices[c + 1], &x0);
                for r in 0..3 {
                    jac[r][c] = d[r];
                }
            } else {
                jac[c][c] = 1.0;
            }
        }
        let det = det3(&jac);
        let inv = inv3(&jac);
        AffineMap { dim, x0, jac, inv, det }
    }

    pub fn to_phys(&self, xi: &Point) -> Point {
        let d = matvec(&self.jac, xi);
        [self.x0[0] + d[0], self.x0[1] + d[1], self.x0[2] + d[2]]
    }

    pub fn to_ref(&self, x: &Point) -> Point {
        let mut r = matvec(&self.inv, &sub(x, &self.x0));
        for v in r.iter_mut().skip(self.dim) {
            *v = 0.0;
        }
        r
    }

    /// Physical gradient from a reference gradient: J^{-T} g.
    pub fn grad(&self, g: &Point) -> Point {
        let mut r = [0.0; 3];
        for i in 0..self.dim {
            r[i] = (0..self.dim).map(|l| self.inv[l][i] * g[l]).sum();
        }
        r
    }

    /// Physical Hessian from a reference Hessian: J^{-T} H J^{-1}.
    pub fn hess(&self, h: &Mat3) -> Mat3 {
        let t = matmul(&transpose(&self.inv), &matmul(h, &self.inv));
        let mut r = [[0.0; 3]; 3];
        for i in 0..self.dim {
            for j in 0..self.dim {
                r[i][j] = t[i][j];
            }
        }
        r
    }

    pub fn volume(&self) -> f64 {
        let f: f64 = (1..=self.dim).map(|i| i as f64).product();
        self.det.abs() / f
    }

    /// Contravariant Piola transform of a 2D reference value and Jacobian.
    pub fn piola(&self, v: &[f64; 2], jac: &[[f64; 2]; 2]) -> ([f64; 2], [[f64; 2]; 2]) {
        let j = &self.jac;
        let d = self.det;
        let val = [(j[0][0] * v[0] + j[0][1] * v[1]) / d, (j[1][0] * v[0] + j[1][1] * v[1]) / d];
        // J * jac_ref * J^{-1} / det
        let mut tmp = [[0.0; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                tmp[a][b] = (0..2).map(|l| jac[a][l] * self.inv[l][b]).sum();
            }
        }
        let mut out = [[0.0; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                out[a][b] = (0..2).map(|l| j[a][l] * tmp[l][b]).sum::<f64>() / d;
            }
        }
        (val, out)
    }
}
