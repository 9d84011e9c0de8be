//! Additive auxiliary space preconditioners, the fictitious space preconditioner and the
//! coarse solvers.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::assembly::{
    assemble_aux_p1, assemble_vector_rd_bc, AuxBc, Assembled, BiharmonicBc, TauField, VectorVariant,
};
use crate::condense::{condense, CondensedSystem};
use crate::error::{Error, Result};
use crate::fespace::Bc;
use crate::mesh::Mesh;
use crate::smoother::{block_sgs, jacobi, BlockPartition};
use crate::sparse::{SparseCholesky, SparseMatrix};
use crate::transfer::{
    build_biharmonic_prolongation, build_scalar_prolongation, build_vector_prolongation, Prolongation,
};

/// Symmetric linear map y = B x.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
    fn is_symmetric(&self) -> bool {
        true
    }
}

impl LinearOperator for SparseMatrix {
    fn dim(&self) -> usize {
        self.nrows
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.matvec(x, y)
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        (**self).apply(x, y)
    }

    fn is_symmetric(&self) -> bool {
        (**self).is_symmetric()
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        (**self).apply(x, y)
    }

    fn is_symmetric(&self) -> bool {
        (**self).is_symmetric()
    }
}

/// Dense matrix of an operator, column by column.
pub fn materialize(op: &dyn LinearOperator) -> DMatrix<f64> {
    let n = op.dim();
    let mut m = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    let mut y = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        op.apply(&e, &mut y);
        e[j] = 0.0;
        for i in 0..n {
            m[(i, j)] = y[i];
        }
    }
    m
}

/// The zero map.
#[derive(Clone, Debug)]
pub struct ZeroOperator(pub usize);

impl LinearOperator for ZeroOperator {
    fn dim(&self) -> usize {
        self.0
    }

    fn apply(&self, _x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
    }
}

/// Exact coarse solve with a sparse Cholesky factor.
#[derive(Debug)]
pub struct DirectSolve {
    chol: SparseCholesky,
}

pub fn aux_direct(a0: &SparseMatrix) -> Result<DirectSolve> {
    Ok(DirectSolve { chol: a0.cholesky()? })
}

impl LinearOperator for DirectSolve {
    fn dim(&self) -> usize {
        self.chol.dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(x);
        self.chol.solve_in_place(y);
    }
}

/// B = R + P B0 P^T.
pub struct Asp {
    r: Box<dyn LinearOperator>,
    p: Prolongation,
    b0: Box<dyn LinearOperator>,
}

pub fn make_asp(r: Box<dyn LinearOperator>, p: Prolongation, b0: Box<dyn LinearOperator>) -> Result<Asp> {
    if r.dim() != p.n_target() || b0.dim() != p.n_source() {
        return Err(Error::DimensionMismatch(format!(
            "smoother {} / prolongation {}x{} / coarse {}",
            r.dim(),
            p.n_target(),
            p.n_source(),
            b0.dim()
        )));
    }
    Ok(Asp { r, p, b0 })
}

impl LinearOperator for Asp {
    fn dim(&self) -> usize {
        self.r.dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.r.apply(x, y);
        let rc = self.p.apply_transpose(x);
        let mut zc = vec![0.0; rc.len()];
        self.b0.apply(&rc, &mut zc);
        for (a, b) in y.iter_mut().zip(self.p.apply(&zc)) {
            *a += b;
        }
    }
}

/// Full-space inverse of a condensable problem built from a Schur complement solver:
/// block elimination with the exact local solves.
pub struct FullSpaceInverse {
    sys: CondensedSystem,
    schur_solver: Box<dyn LinearOperator>,
}

impl FullSpaceInverse {
    pub fn new(sys: CondensedSystem, schur_solver: Box<dyn LinearOperator>) -> Result<Self> {
        if schur_solver.dim() != sys.n_global {
            return Err(Error::DimensionMismatch("Schur solver does not match condensed system".into()));
        }
        Ok(FullSpaceInverse { sys, schur_solver })
    }
}

impl LinearOperator for FullSpaceInverse {
    fn dim(&self) -> usize {
        self.sys.n_local + self.sys.n_global
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let g = self.sys.condense_rhs(x);
        let mut zg = vec![0.0; g.len()];
        self.schur_solver.apply(&g, &mut zg);
        let z = self.sys.recover_with(&zg, x);
        y.copy_from_slice(&z);
    }
}

/// M = E^T P B P^T E on the global DOFs of the target, E the injection of globals into the
/// full target vector (locals set to zero).
pub struct Fictitious {
    p: Prolongation,
    b: Box<dyn LinearOperator>,
    n_local: usize,
}

pub fn make_fictitious(p: Prolongation, b: Box<dyn LinearOperator>, n_target_local: usize) -> Result<Fictitious> {
    if b.dim() != p.n_source() || n_target_local > p.n_target() {
        return Err(Error::DimensionMismatch("fictitious space operator sizes".into()));
    }
    Ok(Fictitious { p, b, n_local: n_target_local })
}

impl LinearOperator for Fictitious {
    fn dim(&self) -> usize {
        self.p.n_target() - self.n_local
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let mut full = vec![0.0; self.p.n_target()];
        full[self.n_local..].copy_from_slice(x);
        let r = self.p.apply_transpose(&full);
        let mut z = vec![0.0; r.len()];
        self.b.apply(&r, &mut z);
        let out = self.p.apply(&z);
        y.copy_from_slice(&out[self.n_local..]);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SmootherKind {
    Jacobi,
    Bgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AuxKind {
    Direct,
    Asp,
}

/// Which discrete problem a condensed system comes from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ProblemKind {
    ScalarRd,
    VectorRd(VectorVariant),
    Biharmonic(BiharmonicBc),
}

/// Everything a preconditioner needs about the target problem.
pub struct PreconditionerInput<'a> {
    pub mesh: &'a Mesh,
    pub problem: ProblemKind,
    pub assembled: &'a Assembled,
    pub schur: Arc<SparseMatrix>,
    pub tau: TauField,
    pub alpha: f64,
}

fn smoother(kind: SmootherKind, mesh: &Mesh, asm: &Assembled, a: Arc<SparseMatrix>) -> Result<Box<dyn LinearOperator>> {
    Ok(match kind {
        SmootherKind::Jacobi => Box::new(jacobi(&a)?),
        SmootherKind::Bgs => {
            let bp = BlockPartition::facet_patches(mesh, asm);
            Box::new(block_sgs(a, &bp)?)
        }
    })
}

/// Smoother plus P1 coarse solve for the scalar and vector skeleton problems.
pub fn rd_asp(
    mesh: &Mesh,
    asm: &Assembled,
    schur: Arc<SparseMatrix>,
    tau: TauField,
    vector: bool,
    smoother_kind: SmootherKind,
) -> Result<Asp> {
    // a free tangential trace leaves the tangential P1 component free on the boundary
    let bc = if vector && asm.facet_space.bc == Bc::None { AuxBc::NormalComponent } else { AuxBc::Dirichlet };
    let (a0, p1) = assemble_aux_p1(mesh, tau, vector, bc)?;
    let p = if vector {
        build_vector_prolongation(&p1, asm, mesh)?
    } else {
        build_scalar_prolongation(&p1, &asm.facet_space, mesh)?
    };
    let r = smoother(smoother_kind, mesh, asm, schur)?;
    make_asp(r, p, Box::new(aux_direct(&a0)?))
}

/// JAC-ASP, BGS-ASP for the reaction-diffusion problems; ASP-DIR and ASP-ASP for the
/// biharmonic problem (the smoother then acts inside the auxiliary vector preconditioner).
pub fn build_preconditioner(
    input: &PreconditionerInput,
    smoother_kind: SmootherKind,
    aux: AuxKind,
) -> Result<Box<dyn LinearOperator>> {
    let mesh = input.mesh;
    match input.problem {
        ProblemKind::ScalarRd | ProblemKind::VectorRd(_) => {
            if aux != AuxKind::Direct {
                return Err(Error::InvalidArgument(
                    "reaction-diffusion problems use a direct P1 coarse solve".into(),
                ));
            }
            let vector = matches!(input.problem, ProblemKind::VectorRd(_));
            Ok(Box::new(rd_asp(mesh, input.assembled, input.schur.clone(), input.tau, vector, smoother_kind)?))
        }
        ProblemKind::Biharmonic(bc) => {
            let k = input.assembled.k;
            let aux_asm = assemble_vector_rd_bc(
                mesh,
                k,
                input.tau,
                input.alpha,
                VectorVariant::Cst,
                bc.facet_bc(),
                &|_| [0.0, 0.0],
            )?;
            let p = build_biharmonic_prolongation(&aux_asm, input.assembled, mesh)?;
            let sys = condense(&aux_asm.problem, &aux_asm.rhs)?;
            let schur_solver: Box<dyn LinearOperator> = match aux {
                AuxKind::Direct => Box::new(aux_direct(&sys.schur)?),
                AuxKind::Asp => {
                    let s = Arc::new(sys.schur.clone());
                    Box::new(rd_asp(mesh, &aux_asm, s, input.tau, true, smoother_kind)?)
                }
            };
            let b = FullSpaceInverse::new(sys, schur_solver)?;
            Ok(Box::new(make_fictitious(p, Box::new(b), input.assembled.problem.n_local)?))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble_cip_biharmonic, assemble_scalar_rd};
    use crate::krylov::{dense_condition, pcg};
    use crate::mesh::build_structured_mesh;
    use crate::sparse::SparseMatrix;

    fn kappa(a: &SparseMatrix, b: &dyn LinearOperator) -> f64 {
        dense_condition(&a.to_dense(), &materialize(b)).unwrap()
    }

    #[test]
    fn direct_coarse_solve() {
        let m = build_structured_mesh(2, 4).unwrap();
        let (a0, _) = assemble_aux_p1(&m, TauField::uniform(1.0), false, AuxBc::Dirichlet).unwrap();
        let d = aux_direct(&a0).unwrap();
        let r: Vec<f64> = (0..a0.nrows).map(|i| (i as f64).cos()).collect();
        let mut y = vec![0.0; r.len()];
        d.apply(&r, &mut y);
        let dense = a0.to_dense().try_inverse().unwrap() * nalgebra::DVector::from_vec(r.clone());
        for (a, b) in y.iter().zip(dense.iter()) {
            assert!((a - b).abs() < 1e-10);
        }
        let (_, rep) = pcg(&a0, &d, &r, 1e-10, 10).unwrap();
        assert_eq!(rep.iterations, 1);
    }

    #[test]
    fn trivial_asp_is_exact() {
        let m = build_structured_mesh(2, 3).unwrap();
        let asm = assemble_scalar_rd(&m, 1, TauField::uniform(1.0), 4.0).unwrap();
        let s = condense(&asm.problem, &asm.rhs).unwrap().schur;
        let n = s.nrows;
        let p = Prolongation::from_matrix(SparseMatrix::identity(n), "id", "id");
        let b = make_asp(Box::new(ZeroOperator(n)), p, Box::new(aux_direct(&s).unwrap())).unwrap();
        let (_, rep) = pcg(&s, &b, &vec![1.0; n], 1e-10, 10).unwrap();
        assert_eq!(rep.iterations, 1);
        let p = Prolongation::from_matrix(SparseMatrix::identity(n), "id", "id");
        assert!(make_asp(Box::new(ZeroOperator(n + 1)), p, Box::new(ZeroOperator(n))).is_err());
    }

    #[test]
    fn scalar_asp_kappa_is_flat() {
        // the Jacobi variant is still pre-asymptotic at N = 2
        for (sm, ns) in [(SmootherKind::Bgs, [2, 4, 8]), (SmootherKind::Jacobi, [4, 8, 16])] {
            let mut ks = Vec::new();
            for n in ns {
                let m = build_structured_mesh(2, n).unwrap();
                let t = TauField::uniform(1.0);
                let asm = assemble_scalar_rd(&m, 1, t, 4.0).unwrap();
                let s = Arc::new(condense(&asm.problem, &asm.rhs).unwrap().schur);
                let b = rd_asp(&m, &asm, s.clone(), t, false, sm).unwrap();
                if n == 2 {
                    let d = materialize(&b);
                    assert!((&d - d.transpose()).abs().max() < 1e-11 * d.abs().max());
                    assert!(d.symmetric_eigen().eigenvalues.min() > 0.0);
                }
                ks.push(kappa(&s, &b));
            }
            let mx = ks.iter().cloned().fold(0.0, f64::max);
            let mn = ks.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!((mx - mn) / mx <= 0.25, "{sm:?} {ks:?}");
        }
    }

    #[test]
    fn fictitious_space_kappa() {
        let mut ss = Vec::new();
        let mut cl = Vec::new();
        for n in [2, 4, 8] {
            for bc in [BiharmonicBc::SimplySupported, BiharmonicBc::Clamped] {
                let m = build_structured_mesh(2, n).unwrap();
                let t = TauField::uniform(1.0);
                let asm = assemble_cip_biharmonic(&m, 1, t, 4.0, bc).unwrap();
                let s = Arc::new(condense(&asm.problem, &asm.rhs).unwrap().schur);
                let input = PreconditionerInput {
                    mesh: &m,
                    problem: ProblemKind::Biharmonic(bc),
                    assembled: &asm,
                    schur: s.clone(),
                    tau: t,
                    alpha: 4.0,
                };
                let b = build_preconditioner(&input, SmootherKind::Bgs, AuxKind::Direct).unwrap();
                if n == 2 {
                    let mut y = vec![1.0; b.dim()];
                    b.apply(&vec![0.0; b.dim()], &mut y);
                    assert!(y.iter().all(|v| *v == 0.0));
                }
                let k = kappa(&s, &b);
                match bc {
                    BiharmonicBc::SimplySupported => ss.push(k),
                    BiharmonicBc::Clamped => cl.push(k),
                }
            }
        }
        let mx = ss.iter().cloned().fold(0.0, f64::max);
        let mn = ss.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!((mx - mn) / mx <= 0.25, "{ss:?}");
        assert!(cl[2] >= 1.3 * cl[0], "{cl:?}");
    }
}
