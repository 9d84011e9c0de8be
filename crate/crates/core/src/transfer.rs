//! Prolongations from auxiliary spaces into the HDG skeleton spaces and the curl embedding.

use nalgebra::{DMatrix, DVector};

use crate::assembly::{volume_full_indices, Assembled, AuxP1, VolumeEvaluator};
use crate::error::{Error, Result};
use crate::fespace::{Entity, Space, SpaceKind};
use crate::mesh::Mesh;
use crate::polybasis::{simplex_quadrature, FacetProjector};
use crate::sparse::{CsrAssembler, SparseCholesky, SparseMatrix};

/// Poisson-based map (u, u_hat) -> (phi, w_hat) between full coefficient vectors.
#[derive(Debug)]
pub struct BiharmonicTransfer {
    poisson: SparseCholesky,
    /// int u_j . curl psi_i, rows over X, cols over the aux volume space
    c: SparseMatrix,
    /// tangential facet average of curl phi
    g: SparseMatrix,
    /// tangential facet average of u
    h: SparseMatrix,
    pub n_x: usize,
    pub n_u: usize,
    pub n_hat: usize,
}

#[derive(Debug)]
pub enum TransferKind {
    Matrix(SparseMatrix),
    Biharmonic(Box<BiharmonicTransfer>),
}

#[derive(Debug)]
pub struct Prolongation {
    pub source: String,
    pub target: String,
    pub kind: TransferKind,
}

impl Prolongation {
    pub fn from_matrix(p: SparseMatrix, source: &str, target: &str) -> Self {
        Prolongation { source: source.into(), target: target.into(), kind: TransferKind::Matrix(p) }
    }

    pub fn n_source(&self) -> usize {
        match &self.kind {
            TransferKind::Matrix(p) => p.ncols,
            TransferKind::Biharmonic(b) => b.n_u + b.n_hat,
        }
    }

    pub fn n_target(&self) -> usize {
        match &self.kind {
            TransferKind::Matrix(p) => p.nrows,
            TransferKind::Biharmonic(b) => b.n_x + b.n_hat,
        }
    }

    pub fn matrix(&self) -> Option<&SparseMatrix> {
        match &self.kind {
            TransferKind::Matrix(p) => Some(p),
            TransferKind::Biharmonic(_) => None,
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        match &self.kind {
            TransferKind::Matrix(p) => p.mul_vec(x),
            TransferKind::Biharmonic(b) => b.prolong(x),
        }
    }

    pub fn apply_transpose(&self, r: &[f64]) -> Vec<f64> {
        match &self.kind {
            TransferKind::Matrix(p) => {
                let mut y = vec![0.0; p.ncols];
                p.matvec_transpose(r, &mut y);
                y
            }
            TransferKind::Biharmonic(b) => b.restrict(r),
        }
    }
}

/// Residual-side action of the prolongation: P^T r.
pub fn apply_adjoint(p: &Prolongation, residual: &[f64]) -> Result<Vec<f64>> {
    if residual.len() != p.n_target() {
        return Err(Error::DimensionMismatch(format!(
            "residual has {} entries, prolongation target has {}",
            residual.len(),
            p.n_target()
        )));
    }
    Ok(p.apply_transpose(residual))
}

impl BiharmonicTransfer {
    fn prolong(&self, x: &[f64]) -> Vec<f64> {
        let (u, uhat) = x.split_at(self.n_u);
        let mut phi = self.c.mul_vec(u);
        self.poisson.solve_in_place(&mut phi);
        let gphi = self.g.mul_vec(&phi);
        let hu = self.h.mul_vec(u);
        let mut out = phi;
        out.extend(uhat.iter().zip(gphi.iter().zip(&hu)).map(|(a, (b, c))| a + b - c));
        out
    }

    fn restrict(&self, r: &[f64]) -> Vec<f64> {
        let (rphi, rhat) = r.split_at(self.n_x);
        let mut t = vec![0.0; self.n_x];
        self.g.matvec_transpose(rhat, &mut t);
        for (a, b) in t.iter_mut().zip(rphi) {
            *a += b;
        }
        self.poisson.solve_in_place(&mut t);
        let mut u = vec![0.0; self.n_u];
        self.c.matvec_transpose(&t, &mut u);
        let mut hu = vec![0.0; self.n_u];
        self.h.matvec_transpose(rhat, &mut hu);
        for (a, b) in u.iter_mut().zip(&hu) {
            *a -= b;
        }
        u.extend_from_slice(rhat);
        u
    }
}

fn first_facet_dof(space: &Space, mesh: &Mesh) -> Vec<usize> {
    crate::assembly::facet_dof_base(space, mesh)
}

/// Facet quadrature points mapped into the reference coordinates of element e.
fn facet_points_in(mesh: &Mesh, f: usize, e: usize, order: usize) -> (Vec<[f64; 3]>, Vec<[f64; 3]>, Vec<f64>) {
    let q = simplex_quadrature(mesh.dim - 1, order);
    let map = mesh.element_map(e);
    let mut s_pts = Vec::new();
    let mut xi = Vec::new();
    for s in &q.points {
        let x = mesh.facet_point(f, s);
        xi.push(map.to_ref(&x));
        s_pts.push(*s);
    }
    (s_pts, xi, q.weights)
}

/// Scalar L2 projection of continuous P1 traces onto the facet space, facet by facet.
pub fn build_scalar_prolongation(p1: &AuxP1, facet_space: &Space, mesh: &Mesh) -> Result<Prolongation> {
    if p1.ncomp != 1 || facet_space.kind != SpaceKind::ScalarFacet {
        return Err(Error::InvalidArgument("scalar prolongation needs a P1 and a scalar facet space".into()));
    }
    let proj = FacetProjector::new(mesh.dim - 1, facet_space.degree);
    let nf = proj.len();
    let base = first_facet_dof(facet_space, mesh);
    let q = simplex_quadrature(mesh.dim - 1, facet_space.degree as usize + 2);
    let mut trip = Vec::new();
    for f in 0..mesh.n_facets() {
        let verts = mesh.facet_vertices(f);
        for (vi, &v) in verts.iter().enumerate() {
            let Some(col) = p1.col(0, v) else { continue };
            // facet barycentric of vertex vi
            let mut rhs = vec![0.0; nf];
            for (s, w) in q.points.iter().zip(&q.weights) {
                let lam = if vi == 0 { 1.0 - s[..mesh.dim - 1].iter().sum::<f64>() } else { s[vi - 1] };
                let mu = proj.basis.values(s);
                for a in 0..nf {
                    rhs[a] += w * lam * mu[a];
                }
            }
            for a in 0..nf {
                if let Some(row) = facet_space.global_index[base[f] + a] {
                    let c: f64 = (0..nf).map(|b| proj.mass_inv[(a, b)] * rhs[b]).sum();
                    trip.push((row, col, c));
                }
            }
        }
    }
    let p = SparseMatrix::from_triplets(facet_space.n_global, p1.n, &trip);
    Ok(Prolongation::from_matrix(p, "P1", "facet"))
}

/// Positions in an element's basis list of the H(div) functions attached to facet f.
fn edge_positions(space: &Space, e: usize, f: usize) -> Vec<usize> {
    space.element_dofs[e]
        .iter()
        .enumerate()
        .filter(|(_, (d, _))| space.dofs[*d].entity == Entity::Facet(f))
        .map(|(i, _)| i)
        .collect()
}

/// Vector P1 -> (facet-family H(div) DOFs, tangential facet DOFs), both free globals.
pub fn build_vector_prolongation(p1: &AuxP1, target: &Assembled, mesh: &Mesh) -> Result<Prolongation> {
    let vs = &target.volume_space;
    let fs = &target.facet_space;
    if p1.ncomp != 2 || !matches!(vs.kind, SpaceKind::HdivFull | SpaceKind::HdivCst) {
        return Err(Error::InvalidArgument("vector prolongation needs vector P1 and an H(div) target".into()));
    }
    let ng0 = vs.n_global;
    let ev = VolumeEvaluator::for_space(vs)?;
    let proj = FacetProjector::new(1, fs.degree);
    let nf = proj.len();
    let fbase = first_facet_dof(fs, mesh);
    let order = 2 * vs.degree as usize + 2;
    let mut trip = Vec::new();
    for f in 0..mesh.n_facets() {
        let fa = &mesh.facets[f];
        let e = fa.owners[0];
        let map = mesh.element_map(e);
        let n = fa.normal;
        let t = mesh.facet_tangent(f);
        let signs: Vec<f64> = vs.element_dofs[e].iter().map(|x| x.1).collect();
        let pos = edge_positions(vs, e, f);
        let rows: Vec<Option<usize>> = pos.iter().map(|&i| vs.global_index[vs.element_dofs[e][i].0]).collect();
        let (s_pts, xi, w) = facet_points_in(mesh, f, e, order);
        let verts = mesh.facet_vertices(f);
        let np_ = pos.len();
        let mut gram = DMatrix::<f64>::zeros(np_, np_);
        // moments against the two facet hat functions
        let mut mom = DMatrix::<f64>::zeros(np_, 2);
        let mut tmom = DMatrix::<f64>::zeros(nf, 2);
        for q in 0..w.len() {
            let tab = ev.eval(&map, &xi[q], &signs);
            let vn: Vec<f64> = pos.iter().map(|&i| tab.val[i][0] * n[0] + tab.val[i][1] * n[1]).collect();
            let lam = [1.0 - s_pts[q][0], s_pts[q][0]];
            let mu = proj.basis.values(&s_pts[q]);
            for a in 0..np_ {
                for b in 0..np_ {
                    gram[(a, b)] += w[q] * vn[a] * vn[b];
                }
                for v in 0..2 {
                    mom[(a, v)] += w[q] * vn[a] * lam[v];
                }
            }
            for a in 0..nf {
                for v in 0..2 {
                    tmom[(a, v)] += w[q] * mu[a] * lam[v];
                }
            }
        }
        if rows.iter().any(|r| r.is_some()) {
            let chol = gram.clone().cholesky().ok_or_else(|| {
                Error::Numerical(format!("singular normal-trace Gram on facet {f}"))
            })?;
            let coef = chol.solve(&mom);
            for (vi, &v) in verts.iter().enumerate() {
                for c in 0..2 {
                    let Some(col) = p1.col(c, v) else { continue };
                    for (a, r) in rows.iter().enumerate() {
                        if let Some(r) = r {
                            trip.push((*r, col, coef[(a, vi)] * n[c]));
                        }
                    }
                }
            }
        }
        let tcoef = &proj.mass_inv * tmom;
        for (vi, &v) in verts.iter().enumerate() {
            for a in 0..nf {
                if let Some(r) = fs.global_index[fbase[f] + a] {
                    for c in 0..2 {
                        if let Some(col) = p1.col(c, v) {
                            trip.push((ng0 + r, col, tcoef[(a, vi)] * t[c]));
                        }
                    }
                }
            }
        }
    }
    let p = SparseMatrix::from_triplets(ng0 + fs.n_global, p1.n, &trip);
    Ok(Prolongation::from_matrix(p, "P1 vector", "H(div) facet x tangential facet"))
}

/// Rows: tangential P_{k-1} facet average of the volume field of `asm` (curl of the potential
/// for X spaces); columns: full volume coefficients. Boundary facets take the one-sided value.
fn facet_average_matrix(mesh: &Mesh, asm: &Assembled, fs: &Space) -> Result<SparseMatrix> {
    let vs = &asm.volume_space;
    let ev = VolumeEvaluator::for_space(vs)?;
    let proj = FacetProjector::new(1, fs.degree);
    let nf = proj.len();
    let fbase = first_facet_dof(fs, mesh);
    let order = 2 * vs.degree as usize + 2;
    let ncols = asm.problem.n_local + vs.n_global;
    let mut trip = Vec::new();
    for f in 0..mesh.n_facets() {
        let fa = &mesh.facets[f];
        let rows: Vec<Option<usize>> = (0..nf).map(|a| fs.global_index[fbase[f] + a]).collect();
        if rows.iter().all(|r| r.is_none()) {
            continue;
        }
        let t = mesh.facet_tangent(f);
        let wgt = 1.0 / fa.n_owners as f64;
        for o in 0..fa.n_owners {
            let e = fa.owners[o];
            let map = mesh.element_map(e);
            let signs: Vec<f64> = vs.element_dofs[e].iter().map(|x| x.1).collect();
            let cols = volume_full_indices(vs, asm.problem.n_local, e);
            let (s_pts, xi, w) = facet_points_in(mesh, f, e, order);
            let nb = ev.len();
            let mut mom = DMatrix::<f64>::zeros(nf, nb);
            for q in 0..w.len() {
                let tab = ev.eval(&map, &xi[q], &signs);
                let mu = proj.basis.values(&s_pts[q]);
                for j in 0..nb {
                    let vt = tab.val[j][0] * t[0] + tab.val[j][1] * t[1];
                    for a in 0..nf {
                        mom[(a, j)] += w[q] * mu[a] * vt;
                    }
                }
            }
            let coef = &proj.mass_inv * mom;
            for (a, r) in rows.iter().enumerate() {
                let Some(r) = r else { continue };
                for (j, c) in cols.iter().enumerate() {
                    if let Some(c) = c {
                        trip.push((*r, *c, wgt * coef[(a, j)]));
                    }
                }
            }
        }
    }
    Ok(SparseMatrix::from_triplets(fs.n_global, ncols, &trip))
}

/// Transfer from the full auxiliary vector problem (V^{k,cst} x V_hat) to the full
/// biharmonic problem (X^{k+1} x V_hat).
pub fn build_biharmonic_prolongation(aux: &Assembled, target: &Assembled, mesh: &Mesh) -> Result<Prolongation> {
    let xs = &target.volume_space;
    let us = &aux.volume_space;
    if xs.kind != SpaceKind::ScalarH1Kp1 || us.kind != SpaceKind::HdivCst {
        return Err(Error::InvalidArgument("biharmonic transfer needs X^{k+1} target and V^{k,cst} aux".into()));
    }
    if aux.facet_space.n_global != target.facet_space.n_global {
        return Err(Error::DimensionMismatch("auxiliary and target facet spaces differ".into()));
    }
    let n_x = target.problem.n_local + xs.n_global;
    let n_u = aux.problem.n_local + us.n_global;
    let ex = VolumeEvaluator::for_space(xs)?;
    let eu = VolumeEvaluator::for_space(us)?;
    let q = simplex_quadrature(2, 2 * xs.degree as usize);
    let xlists: Vec<Vec<usize>> = (0..mesh.n_elements())
        .map(|e| volume_full_indices(xs, target.problem.n_local, e).into_iter().flatten().collect())
        .collect();
    let mut stiff = CsrAssembler::new(n_x, xlists.iter().map(|v| v.as_slice()));
    let mut ctrip = Vec::new();
    for e in 0..mesh.n_elements() {
        let map = mesh.element_map(e);
        let sx: Vec<f64> = xs.element_dofs[e].iter().map(|x| x.1).collect();
        let su: Vec<f64> = us.element_dofs[e].iter().map(|x| x.1).collect();
        let ix = volume_full_indices(xs, target.problem.n_local, e);
        let iu = volume_full_indices(us, aux.problem.n_local, e);
        let (nx, nu) = (ex.len(), eu.len());
        let mut kxx = vec![0.0; nx * nx];
        let mut kxu = vec![0.0; nx * nu];
        for (xi, w) in q.points.iter().zip(&q.weights) {
            let wt = w * map.det.abs();
            let tx = ex.eval(&map, xi, &sx);
            let tu = eu.eval(&map, xi, &su);
            for i in 0..nx {
                for j in 0..nx {
                    kxx[i * nx + j] += wt * (tx.val[i][0] * tx.val[j][0] + tx.val[i][1] * tx.val[j][1]);
                }
                for j in 0..nu {
                    kxu[i * nu + j] += wt * (tx.val[i][0] * tu.val[j][0] + tx.val[i][1] * tu.val[j][1]);
                }
            }
        }
        let kept: Vec<usize> = (0..nx).filter(|&i| ix[i].is_some()).collect();
        let m = kept.len();
        let mut blk = vec![0.0; m * m];
        for (a, &i) in kept.iter().enumerate() {
            for (b, &j) in kept.iter().enumerate() {
                blk[a * m + b] = kxx[i * nx + j];
            }
        }
        stiff.add_block(&xlists[e], &blk);
        for i in 0..nx {
            let Some(r) = ix[i] else { continue };
            for j in 0..nu {
                if let Some(c) = iu[j] {
                    ctrip.push((r, c, kxu[i * nu + j]));
                }
            }
        }
    }
    let poisson = stiff.finish().cholesky()?;
    let c = SparseMatrix::from_triplets(n_x, n_u, &ctrip);
    let g = facet_average_matrix(mesh, target, &target.facet_space)?;
    let h = facet_average_matrix(mesh, aux, &aux.facet_space)?;
    let n_hat = target.facet_space.n_global;
    Ok(Prolongation {
        source: "V^{k,cst} x V_hat".into(),
        target: "X^{k+1} x V_hat".into(),
        kind: TransferKind::Biharmonic(Box::new(BiharmonicTransfer { poisson, c, g, h, n_x, n_u, n_hat })),
    })
}

/// Coefficients of curl phi in the V^{k,cst} space, as a map between full volume vectors.
pub fn curl_embedding_matrix(target: &Assembled, aux: &Assembled, mesh: &Mesh) -> Result<SparseMatrix> {
    let xs = &target.volume_space;
    let us = &aux.volume_space;
    let ex = VolumeEvaluator::for_space(xs)?;
    let eu = VolumeEvaluator::for_space(us)?;
    let n_x = target.problem.n_local + xs.n_global;
    let n_u = aux.problem.n_local + us.n_global;
    let q = simplex_quadrature(2, 2 * xs.degree as usize);
    let mut rows_done = vec![false; n_u];
    let mut trip = Vec::new();
    for e in 0..mesh.n_elements() {
        let map = mesh.element_map(e);
        let sx: Vec<f64> = xs.element_dofs[e].iter().map(|x| x.1).collect();
        let su: Vec<f64> = us.element_dofs[e].iter().map(|x| x.1).collect();
        let ix = volume_full_indices(xs, target.problem.n_local, e);
        let iu = volume_full_indices(us, aux.problem.n_local, e);
        let (nx, nu) = (ex.len(), eu.len());
        let mut guu = DMatrix::<f64>::zeros(nu, nu);
        let mut gux = DMatrix::<f64>::zeros(nu, nx);
        for (xi, w) in q.points.iter().zip(&q.weights) {
            let tx = ex.eval(&map, xi, &sx);
            let tu = eu.eval(&map, xi, &su);
            for i in 0..nu {
                for j in 0..nu {
                    guu[(i, j)] += w * (tu.val[i][0] * tu.val[j][0] + tu.val[i][1] * tu.val[j][1]);
                }
                for j in 0..nx {
                    gux[(i, j)] += w * (tu.val[i][0] * tx.val[j][0] + tu.val[i][1] * tx.val[j][1]);
                }
            }
        }
        let coef = guu.lu().solve(&gux).ok_or_else(|| Error::Numerical("singular element Gram".into()))?;
        for i in 0..nu {
            let Some(r) = iu[i] else { continue };
            if rows_done[r] {
                continue;
            }
            rows_done[r] = true;
            for j in 0..nx {
                if let Some(c) = ix[j] {
                    if coef[(i, j)] != 0.0 {
                        trip.push((r, c, coef[(i, j)]));
                    }
                }
            }
        }
    }
    Ok(SparseMatrix::from_triplets(n_u, n_x, &trip))
}

/// Map (phi, u_hat) full biharmonic vector to the (curl phi, u_hat) full auxiliary vector.
/// Both vectors use the [locals, volume globals, facet globals] layout of their problems.
pub fn curl_embedding(target: &Assembled, aux: &Assembled, mesh: &Mesh, x: &[f64]) -> Result<Vec<f64>> {
    let e = curl_embedding_matrix(target, aux, mesh)?;
    let n_x = e.ncols;
    let mut out = e.mul_vec(&x[..n_x]);
    out.extend_from_slice(&x[n_x..]);
    // interpolation residual check
    let back = interpolation_residual(target, aux, mesh, &x[..n_x], &out[..e.nrows])?;
    if back > 1e-10 {
        return Err(Error::Numerical(format!("curl embedding residual {back:e}")));
    }
    Ok(out)
}

fn interpolation_residual(target: &Assembled, aux: &Assembled, mesh: &Mesh, phi: &[f64], u: &[f64]) -> Result<f64> {
    let xs = &target.volume_space;
    let us = &aux.volume_space;
    let ex = VolumeEvaluator::for_space(xs)?;
    let eu = VolumeEvaluator::for_space(us)?;
    let q = simplex_quadrature(2, 2 * xs.degree as usize);
    let mut err: f64 = 0.0;
    let mut nrm: f64 = 0.0;
    for e in 0..mesh.n_elements() {
        let map = mesh.element_map(e);
        let sx: Vec<f64> = xs.element_dofs[e].iter().map(|x| x.1).collect();
        let su: Vec<f64> = us.element_dofs[e].iter().map(|x| x.1).collect();
        let ix = volume_full_indices(xs, target.problem.n_local, e);
        let iu = volume_full_indices(us, aux.problem.n_local, e);
        for xi in &q.points {
            let tx = ex.eval(&map, xi, &sx);
            let tu = eu.eval(&map, xi, &su);
            for c in 0..2 {
                let a: f64 = ix.iter().enumerate().map(|(j, i)| i.map_or(0.0, |i| phi[i] * tx.val[j][c])).sum();
                let b: f64 = iu.iter().enumerate().map(|(j, i)| i.map_or(0.0, |i| u[i] * tu.val[j][c])).sum();
                err = err.max((a - b).abs());
                nrm = nrm.max(a.abs());
            }
        }
    }
    Ok(err / nrm.max(1.0))
}

/// Dense coefficients of a small vector for convenience in tests.
pub fn to_dvector(x: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{
        assemble_aux_p1, assemble_cip_biharmonic, assemble_scalar_rd, assemble_vector_rd, assemble_vector_rd_bc,
        AuxBc, BiharmonicBc, TauField, VectorVariant,
    };
    use crate::fespace::Bc;
    use crate::mesh::build_structured_mesh;

    #[test]
    fn scalar_hat_function_edge_averages() {
        let m = build_structured_mesh(2, 2).unwrap();
        let asm = assemble_scalar_rd(&m, 1, TauField::uniform(1.0), 4.0).unwrap();
        let (_, p1) = assemble_aux_p1(&m, TauField::uniform(1.0), false, AuxBc::Dirichlet).unwrap();
        let p = build_scalar_prolongation(&p1, &asm.facet_space, &m).unwrap();
        let y = p.apply(&[1.0]);
        assert_eq!(y.len(), 8);
        let centre = 4;
        let base = crate::assembly::facet_dof_base(&asm.facet_space, &m);
        let mut touching = 0;
        for f in 0..m.n_facets() {
            let Some(g) = asm.facet_space.global_index[base[f]] else { continue };
            let expect = if m.facet_vertices(f).contains(&centre) { 0.5 } else { 0.0 };
            touching += (expect > 0.0) as usize;
            assert!((y[g] - expect).abs() < 1e-14);
        }
        assert_eq!(touching, 6);
    }

    #[test]
    fn scalar_reproduces_p1_traces() {
        let m = build_structured_mesh(2, 3).unwrap();
        let asm = assemble_scalar_rd(&m, 2, TauField::uniform(1.0), 4.0).unwrap();
        let (_, p1) = assemble_aux_p1(&m, TauField::uniform(1.0), false, AuxBc::Dirichlet).unwrap();
        let p = build_scalar_prolongation(&p1, &asm.facet_space, &m).unwrap();
        let lin = |x: &[f64; 3]| 0.3 + 1.7 * x[0] - 0.4 * x[1];
        let mut u = vec![0.0; p1.n];
        for (v, g) in p1.columns[0].iter().enumerate() {
            if let Some(g) = g {
                u[*g] = lin(&m.vertices[v]);
            }
        }
        // field does not vanish on the boundary, compare only facets away from it
        let y = p.apply(&u);
        let base = crate::assembly::facet_dof_base(&asm.facet_space, &m);
        for f in 0..m.n_facets() {
            let fv = m.facet_vertices(f);
            let touches = fv.iter().any(|&v| p1.col(0, v).is_none());
            if touches {
                continue;
            }
            let pts = m.facet_points(f);
            for (a, node) in [0.0, 1.0].iter().enumerate() {
                let x = [
                    pts[0][0] + node * (pts[1][0] - pts[0][0]),
                    pts[0][1] + node * (pts[1][1] - pts[0][1]),
                    0.0,
                ];
                let g = asm.facet_space.global_index[base[f] + a].unwrap();
                assert!((y[g] - lin(&x)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn vector_constant_field_reproduced() {
        let m = build_structured_mesh(2, 3).unwrap();
        let k = 2;
        let asm = assemble_vector_rd(&m, k, TauField::uniform(1.0), 4.0, VectorVariant::Full).unwrap();
        let (_, p1) = assemble_aux_p1(&m, TauField::uniform(1.0), true, AuxBc::Dirichlet).unwrap();
        let p = build_vector_prolongation(&p1, &asm, &m).unwrap();
        let mut u = vec![0.0; p1.n];
        for g in p1.columns[0].iter().flatten() {
            u[*g] = 1.0;
        }
        let y = p.apply(&u);
        let ng0 = asm.volume_space.n_global;
        let fbase = crate::assembly::facet_dof_base(&asm.facet_space, &m);
        let vbase = crate::assembly::facet_dof_base(&asm.volume_space, &m);
        for f in 0..m.n_facets() {
            let fv = m.facet_vertices(f);
            if fv.iter().any(|&v| p1.col(0, v).is_none()) {
                continue;
            }
            let t = m.facet_tangent(f);
            for a in 0..k as usize {
                let g = asm.facet_space.global_index[fbase[f] + a].unwrap();
                assert!((y[ng0 + g] - t[0]).abs() < 1e-12);
            }
            // normal flux of the projected field equals (1,0).n |F|: only the lowest-order function carries flux
            let e = m.facets[f].owners[0];
            let pos = edge_positions(&asm.volume_space, e, f);
            let ev = VolumeEvaluator::for_space(&asm.volume_space).unwrap();
            let signs: Vec<f64> = asm.volume_space.element_dofs[e].iter().map(|x| x.1).collect();
            let map = m.element_map(e);
            let n = m.facets[f].normal;
            let (_, xi, w) = facet_points_in(&m, f, e, 6);
            let mut flux = 0.0;
            for q in 0..w.len() {
                let tab = ev.eval(&map, &xi[q], &signs);
                for &i in &pos {
                    let g = asm.volume_space.global_index[asm.volume_space.element_dofs[e][i].0].unwrap();
                    flux += w[q] * m.facets[f].measure * y[g] * (tab.val[i][0] * n[0] + tab.val[i][1] * n[1]);
                }
            }
            assert!((flux - n[0] * m.facets[f].measure).abs() < 1e-12);
            let _ = vbase[f];
        }
    }

    #[test]
    fn vector_tangential_constant_on_free_boundary() {
        // (1,0) satisfies u.n = 0 on the horizontal sides, so every tangential DOF sees it there too
        let m = build_structured_mesh(2, 3).unwrap();
        let asm =
            assemble_vector_rd_bc(&m, 2, TauField::uniform(1.0), 4.0, VectorVariant::Cst, Bc::None, &|_| [0.0, 0.0])
                .unwrap();
        let (_, p1) = assemble_aux_p1(&m, TauField::uniform(1.0), true, AuxBc::NormalComponent).unwrap();
        let p = build_vector_prolongation(&p1, &asm, &m).unwrap();
        let mut u = vec![0.0; p1.n];
        for g in p1.columns[0].iter().flatten() {
            u[*g] = 1.0;
        }
        let y = p.apply(&u);
        let ng0 = asm.volume_space.n_global;
        let fbase = crate::assembly::facet_dof_base(&asm.facet_space, &m);
        let mut boundary = 0;
        for f in 0..m.n_facets() {
            if m.facet_vertices(f).iter().any(|&v| p1.col(0, v).is_none()) {
                continue;
            }
            let t = m.facet_tangent(f);
            boundary += m.facets[f].is_boundary as usize;
            let g = asm.facet_space.global_index[fbase[f]].unwrap();
            assert!((y[ng0 + g] - t[0]).abs() < 1e-12);
        }
        assert_eq!(boundary, 2);
    }

    #[test]
    fn adjoint_is_transpose() {
        let m = build_structured_mesh(2, 3).unwrap();
        let asm = assemble_vector_rd(&m, 1, TauField::uniform(1.0), 4.0, VectorVariant::Cst).unwrap();
        let (_, p1) = assemble_aux_p1(&m, TauField::uniform(1.0), true, AuxBc::Dirichlet).unwrap();
        let p = build_vector_prolongation(&p1, &asm, &m).unwrap();
        for s in 0..10 {
            let r: Vec<f64> = (0..p.n_target()).map(|i| ((i * 13 + s * 7) as f64).sin()).collect();
            let w: Vec<f64> = (0..p.n_source()).map(|i| ((i * 5 + s * 3) as f64).cos()).collect();
            let a: f64 = apply_adjoint(&p, &r).unwrap().iter().zip(&w).map(|(x, y)| x * y).sum();
            let b: f64 = p.apply(&w).iter().zip(&r).map(|(x, y)| x * y).sum();
            assert!((a - b).abs() < 1e-13 * (1.0 + a.abs()));
        }
        assert!(apply_adjoint(&p, &vec![0.0; p.n_target()]).unwrap().iter().all(|x| *x == 0.0));
        assert!(apply_adjoint(&p, &[1.0]).is_err());
    }

    fn bih_pair(n: usize, k: u32, bc: BiharmonicBc) -> (crate::mesh::Mesh, Assembled, Assembled) {
        let m = build_structured_mesh(2, n).unwrap();
        let t = TauField::uniform(1.0);
        let target = assemble_cip_biharmonic(&m, k, t, 4.0, bc).unwrap();
        let aux = assemble_vector_rd_bc(&m, k, t, 4.0, VectorVariant::Cst, bc.facet_bc(), &|_| [1.0, 1.0]).unwrap();
        (m, target, aux)
    }

    #[test]
    fn right_inverse_property() {
        for k in 1..=3 {
            for bc in [BiharmonicBc::SimplySupported, BiharmonicBc::Clamped] {
                let (m, target, aux) = bih_pair(3, k, bc);
                let p = build_biharmonic_prolongation(&aux, &target, &m).unwrap();
                let x: Vec<f64> = (0..target.problem.n_total()).map(|i| ((i * 3 + 1) as f64).sin()).collect();
                let u = curl_embedding(&target, &aux, &m, &x).unwrap();
                let y = p.apply(&u);
                let err = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                assert!(err < 1e-11, "k={k} {bc:?} {err}");
                assert!(p.apply(&vec![0.0; p.n_source()]).iter().all(|v| *v == 0.0));
            }
        }
    }

    #[test]
    fn biharmonic_adjoint_is_transpose() {
        let (m, target, aux) = bih_pair(2, 1, BiharmonicBc::SimplySupported);
        let p = build_biharmonic_prolongation(&aux, &target, &m).unwrap();
        let r: Vec<f64> = (0..p.n_target()).map(|i| ((i * 13) as f64).sin()).collect();
        let w: Vec<f64> = (0..p.n_source()).map(|i| ((i * 5) as f64).cos()).collect();
        let a: f64 = p.apply_transpose(&r).iter().zip(&w).map(|(x, y)| x * y).sum();
        let b: f64 = p.apply(&w).iter().zip(&r).map(|(x, y)| x * y).sum();
        assert!((a - b).abs() < 1e-12 * (1.0 + a.abs()));
    }

    #[test]
    fn form_equivalence() {
        for k in 1..=3 {
            let (m, target, aux) = bih_pair(2, k, BiharmonicBc::SimplySupported);
            for s in 0..5 {
                let x: Vec<f64> = (0..target.problem.n_total()).map(|i| ((i * 7 + s) as f64).sin()).collect();
                let y: Vec<f64> = (0..target.problem.n_total()).map(|i| ((i * 11 + 2 * s) as f64).cos()).collect();
                let ux = curl_embedding(&target, &aux, &m, &x).unwrap();
                let uy = curl_embedding(&target, &aux, &m, &y).unwrap();
                let a = target.problem.bilinear(&x, &y);
                let b = aux.problem.bilinear(&ux, &uy);
                assert!((a - b).abs() < 1e-12 * a.abs().max(1.0), "k={k} {a} {b}");
            }
        }
    }
}
