use nalgebra::DMatrix;

use super::basis::dot;
use super::poly::{dim_p, legendre_of, MonomialSet, Poly};
use super::quadrature::simplex_quadrature;
use crate::error::{Error, Result};

/// Endpoints of reference edge i (opposite vertex i), lower local index first.
pub const REF_EDGES: [[usize; 2]; 3] = [[1, 2], [0, 2], [0, 1]];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HdivFamily {
    /// lowest-order Raviart-Thomas facet function
    FacetLowest,
    /// divergence-free higher-order facet function
    FacetCurl,
    /// divergence-free interior bubble
    InteriorCurl,
    /// interior bubble with non-zero divergence
    InteriorDiv,
}

/// Hierarchical BDM_k basis on the reference triangle.
#[derive(Clone, Debug)]
pub struct HdivBasis {
    pub k: u32,
    pub mono: MonomialSet,
    /// per function: x and y component coefficients
    pub funcs: Vec<[Vec<f64>; 2]>,
    pub family: Vec<HdivFamily>,
    /// owning reference edge for facet families
    pub edge: Vec<Option<usize>>,
    /// sign picked up when the owning edge is traversed in the opposite direction
    pub flip_sign: Vec<f64>,
}

/// Values and Jacobians (jac[i][j] = d v_i / d x_j) at one point.
#[derive(Clone, Debug, Default)]
pub struct VectorTab {
    pub val: Vec<[f64; 2]>,
    pub jac: Vec<[[f64; 2]; 2]>,
}

impl VectorTab {
    pub fn div(&self, i: usize) -> f64 {
        self.jac[i][0][0] + self.jac[i][1][1]
    }
}

/// Rotated gradient (dy, -dx) of a scalar polynomial.
pub fn curl(p: &Poly) -> [Poly; 2] {
    [p.deriv(1), p.deriv(0).scale(-1.0)]
}

/// H1 edge bubble of degree j+2 on reference edge (a, b).
pub fn edge_bubble(a: usize, b: usize, j: u32) -> Poly {
    let la = Poly::barycentric(2, a);
    let lb = Poly::barycentric(2, b);
    let arg = &lb - &la;
    &(&la * &lb) * &legendre_of(j, &arg)
}

/// Interior H1 bubbles of degree up to p (count (p-1)(p-2)/2).
pub fn interior_bubbles(p: u32) -> Vec<Poly> {
    let b = &(&Poly::barycentric(2, 0) * &Poly::barycentric(2, 1)) * &Poly::barycentric(2, 2);
    let mut out = Vec::new();
    if p < 3 {
        return out;
    }
    let set = MonomialSet::new(2, p - 3);
    for e in &set.exps {
        out.push(&b * &Poly::monomial(2, *e));
    }
    out
}

impl HdivBasis {
    pub fn n_facet_per_edge(&self) -> usize {
        self.k as usize + 1
    }

    pub fn n_curl_bubbles(&self) -> usize {
        (self.k as usize) * (self.k as usize - 1) / 2
    }

    pub fn n_div_bubbles(&self) -> usize {
        (self.k as usize - 1) * (self.k as usize + 2) / 2
    }

    pub fn len(&self) -> usize {
        self.funcs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.funcs.is_empty()
    }

    /// Indices of all facet-family functions on reference edge e: lowest first, then by degree.
    pub fn edge_functions(&self, e: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.edge[i] == Some(e)).collect()
    }

    pub fn tabulate(&self, x: &[f64]) -> VectorTab {
        let t = self.mono.tabulate(x);
        let mut out = VectorTab { val: Vec::with_capacity(self.len()), jac: Vec::with_capacity(self.len()) };
        for f in &self.funcs {
            let mut v = [0.0; 2];
            let mut j = [[0.0; 2]; 2];
            for c in 0..2 {
                v[c] = dot(&f[c], &t.val);
                for (m, cm) in f[c].iter().enumerate() {
                    if *cm != 0.0 {
                        j[c][0] += cm * t.grad[m][0];
                        j[c][1] += cm * t.grad[m][1];
                    }
                }
            }
            out.val.push(v);
            out.jac.push(j);
        }
        out
    }
}

fn vec_coeffs(p: &[Poly; 2], mono: &MonomialSet) -> [Vec<f64>; 2] {
    [p[0].coeffs_in(mono), p[1].coeffs_in(mono)]
}

/// Build the hierarchical H(div) basis of degree k on the reference triangle.
pub fn build_hdiv_basis(k: u32) -> Result<HdivBasis> {
    if k == 0 {
        return Err(Error::InvalidArgument("H(div) basis needs k >= 1".into()));
    }
    let mono = MonomialSet::new(2, k);
    let mut funcs = Vec::new();
    let mut family = Vec::new();
    let mut edge = Vec::new();
    let mut flip_sign = Vec::new();
    for (e, &[a, b]) in REF_EDGES.iter().enumerate() {
        let la = Poly::barycentric(2, a);
        let lb = Poly::barycentric(2, b);
        let ca = curl(&la);
        let cb = curl(&lb);
        let w = [&(&la * &cb[0]) - &(&lb * &ca[0]), &(&la * &cb[1]) - &(&lb * &ca[1])];
        funcs.push(vec_coeffs(&w, &mono));
        family.push(HdivFamily::FacetLowest);
        edge.push(Some(e));
        flip_sign.push(-1.0);
    }
    for (e, &[a, b]) in REF_EDGES.iter().enumerate() {
        for j in 0..k {
            funcs.push(vec_coeffs(&curl(&edge_bubble(a, b, j)), &mono));
            family.push(HdivFamily::FacetCurl);
            edge.push(Some(e));
            flip_sign.push(if j % 2 == 0 { 1.0 } else { -1.0 });
        }
    }
    for bub in interior_bubbles(k + 1) {
        funcs.push(vec_coeffs(&curl(&bub), &mono));
        family.push(HdivFamily::InteriorCurl);
        edge.push(None);
        flip_sign.push(1.0);
    }
    let n_curl = funcs.len() - 3 * (k as usize + 1);
    for psi in div_bubbles(k, &mono, &funcs[funcs.len() - n_curl..])? {
        funcs.push(psi);
        family.push(HdivFamily::InteriorDiv);
        edge.push(None);
        flip_sign.push(1.0);
    }
    Ok(HdivBasis { k, mono, funcs, family, edge, flip_sign })
}

// Complement of the curl bubbles inside the normal-trace-free subspace of [P_k]^2.
fn div_bubbles(k: u32, mono: &MonomialSet, curl_bubbles: &[[Vec<f64>; 2]]) -> Result<Vec<[Vec<f64>; 2]>> {
    let nm = mono.len();
    let target = ((k as usize) - 1) * (k as usize + 2) / 2;
    if target == 0 {
        return Ok(Vec::new());
    }
    // normal trace constraints at k+1 points per edge
    let normals = [[1.0, 1.0], [-1.0, 0.0], [0.0, -1.0]];
    let mut rows = Vec::new();
    for (e, &[a, b]) in REF_EDGES.iter().enumerate() {
        let pa = ref_vertex(a);
        let pb = ref_vertex(b);
        for q in 0..=k {
            let s = (q as f64 + 0.5) / (k as f64 + 1.0);
            let x = [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])];
            let m = mono.values(&x);
            let mut row = vec![0.0; 2 * nm];
            for i in 0..nm {
                row[i] = normals[e][0] * m[i];
                row[nm + i] = normals[e][1] * m[i];
            }
            rows.push(row);
        }
    }
    // work in L2-orthonormal coordinates y = R c, where R comes from a QR of the weighted values
    let q = simplex_quadrature(2, 2 * k as usize);
    let vals = DMatrix::from_fn(q.points.len(), nm, |i, j| q.weights[i].sqrt() * mono.values(&q.points[i])[j]);
    let r = vals.qr().r();
    let to_mono = |y: &DMatrix<f64>| -> Result<DMatrix<f64>> {
        let mut c = y.clone();
        for blk in 0..2 {
            let mut v = c.rows_mut(blk * nm, nm);
            if !r.solve_upper_triangular_mut(&mut v) {
                return Err(Error::Numerical("monomial Gram is singular".into()));
            }
        }
        Ok(c)
    };
    let to_orth = |c: &DMatrix<f64>| -> DMatrix<f64> {
        let mut y = c.clone();
        for blk in 0..2 {
            let v = &r * c.rows(blk * nm, nm);
            y.rows_mut(blk * nm, nm).copy_from(&v);
        }
        y
    };

    // constraints in y coordinates: C R^{-1} = (R^{-T} C^T)^T
    let ct = DMatrix::from_fn(2 * nm, rows.len(), |i, j| rows[j][i]);
    let mut cy_t = ct.clone();
    for blk in 0..2 {
        let mut v = cy_t.rows_mut(blk * nm, nm);
        if !r.tr_solve_upper_triangular_mut(&mut v) {
            return Err(Error::Numerical("monomial Gram is singular".into()));
        }
    }
    // pad to square so the SVD returns a full set of right singular vectors
    let cy = DMatrix::from_fn(2 * nm, 2 * nm, |i, j| if i < rows.len() { cy_t[(j, i)] } else { 0.0 });
    let svd = cy.svd(false, true);
    let vt = svd.v_t.expect("right singular vectors");
    // the normal-trace-free subspace has dimension k^2 - 1; take that many smallest singular values
    let nz = (k * k - 1) as usize;
    let mut order: Vec<usize> = (0..2 * nm).collect();
    order.sort_by(|&a, &b| svd.singular_values[a].partial_cmp(&svd.singular_values[b]).unwrap());
    let smax = svd.singular_values.max();
    if svd.singular_values[order[nz - 1]] > 1e-8 * smax || svd.singular_values[order[nz]] < 1e-6 * smax {
        return Err(Error::Numerical("normal trace constraints have unexpected rank".into()));
    }
    let mut z = DMatrix::from_fn(2 * nm, nz, |i, j| vt[(order[j], i)]);

    // remove the curl bubbles
    let nc = curl_bubbles.len();
    if nc > 0 {
        let phi = DMatrix::from_fn(2 * nm, nc, |i, j| {
            if i < nm {
                curl_bubbles[j][0][i]
            } else {
                curl_bubbles[j][1][i - nm]
            }
        });
        let qphi = to_orth(&phi).qr().q();
        z -= &qphi * (qphi.transpose() * &z);
    }
    let sz = z.svd(true, false);
    let u = sz.u.expect("left singular vectors");
    let mut keep: Vec<usize> = (0..nz).collect();
    keep.sort_by(|&a, &b| sz.singular_values[b].partial_cmp(&sz.singular_values[a]).unwrap());
    // the complement directions keep unit size, the curl directions collapse
    let last = sz.singular_values[keep[target - 1]];
    let next = keep.get(target).map_or(0.0, |&i| sz.singular_values[i]);
    if last < 0.5 || next > 1e-6 {
        return Err(Error::Numerical(format!("bubble complement is ill-defined ({last:e} vs {next:e})")));
    }
    keep.truncate(target);
    let basis = to_mono(&DMatrix::from_fn(2 * nm, target, |i, j| u[(i, keep[j])]))?;

    let mut out = Vec::new();
    for j in 0..target {
        let v = basis.column(j);
        // fix the sign by the largest entry
        let imax = (0..v.len()).max_by(|&a, &b| v[a].abs().partial_cmp(&v[b].abs()).unwrap()).unwrap();
        let sg = if v[imax] < 0.0 { -1.0 } else { 1.0 };
        let mut f = [vec![0.0; nm], vec![0.0; nm]];
        for i in 0..nm {
            f[0][i] = sg * clean(v[i]);
            f[1][i] = sg * clean(v[nm + i]);
        }
        out.push(f);
    }
    Ok(out)
}

fn clean(x: f64) -> f64 {
    if x.abs() < 1e-14 {
        0.0
    } else {
        x
    }
}

pub fn ref_vertex(i: usize) -> [f64; 2] {
    match i {
        0 => [0.0, 0.0],
        1 => [1.0, 0.0],
        _ => [0.0, 1.0],
    }
}

impl HdivFamily {
    pub fn is_interior(&self) -> bool {
        matches!(self, HdivFamily::InteriorCurl | HdivFamily::InteriorDiv)
    }
}

/// Count of BDM_k on a triangle.
pub fn bdm_dim(k: u32) -> usize {
    2 * dim_p(2, k as i64)
}
