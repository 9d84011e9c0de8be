//! Static condensation of local DOFs and recovery of the full solution.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::assembly::ProblemMatrix;
use crate::error::{Error, Result};
use crate::sparse::{CsrAssembler, SparseMatrix};

#[derive(Clone, Debug)]
struct ElementElim {
    local: Vec<usize>,
    global: Vec<usize>,
    factor: Option<Cholesky<f64, Dyn>>,
    /// A_lg, nl x ng
    coupling: DMatrix<f64>,
}

/// Schur complement on the global DOFs plus the data to lift global values to the full space.
#[derive(Clone, Debug)]
pub struct CondensedSystem {
    pub schur: SparseMatrix,
    pub lifted_rhs: Vec<f64>,
    pub n_local: usize,
    pub n_global: usize,
    elems: Vec<ElementElim>,
}

/// Eliminate local DOFs element by element.
pub fn condense(problem: &ProblemMatrix, rhs: &[f64]) -> Result<CondensedSystem> {
    let nl_tot = problem.n_local;
    let ng_tot = problem.n_global;
    if rhs.len() != problem.n_total() {
        return Err(Error::DimensionMismatch(format!("rhs has {} entries, expected {}", rhs.len(), problem.n_total())));
    }
    let mut asm = CsrAssembler::new(ng_tot, problem.elements.iter().map(|b| b.global.as_slice()));
    let mut elems = Vec::with_capacity(problem.elements.len());
    for (e, b) in problem.elements.iter().enumerate() {
        let nl = b.local.len();
        let ng = b.global.len();
        let n = nl + ng;
        let a = DMatrix::from_row_slice(n, n, &b.matrix);
        let agg = a.view((nl, nl), (ng, ng)).into_owned();
        if nl == 0 {
            asm.add_block(&b.global, agg.transpose().as_slice());
            elems.push(ElementElim { local: Vec::new(), global: b.global.clone(), factor: None, coupling: DMatrix::zeros(0, ng) });
            continue;
        }
        let all = a.view((0, 0), (nl, nl)).into_owned();
        let alg = a.view((0, nl), (nl, ng)).into_owned();
        let chol = Cholesky::new(all).ok_or(Error::SingularLocalBlock { element: e })?;
        let x = chol.solve(&alg);
        let s = agg - alg.transpose() * x;
        // row-major slice of s
        asm.add_block(&b.global, s.transpose().as_slice());
        elems.push(ElementElim { local: b.local.clone(), global: b.global.clone(), factor: Some(chol), coupling: alg });
    }
    let mut sys =
        CondensedSystem { schur: asm.finish(), lifted_rhs: vec![0.0; ng_tot], n_local: nl_tot, n_global: ng_tot, elems };
    sys.lifted_rhs = sys.condense_rhs(rhs);
    Ok(sys)
}

impl CondensedSystem {
    /// b_g - A_gl A_ll^{-1} b_l for a full vector b = [b_l, b_g].
    pub fn condense_rhs(&self, full: &[f64]) -> Vec<f64> {
        let mut g = full[self.n_local..].to_vec();
        for el in &self.elems {
            if let Some(f) = &el.factor {
                let bl = DVector::from_iterator(el.local.len(), el.local.iter().map(|&i| full[i]));
                let y = f.solve(&bl);
                let c = el.coupling.tr_mul(&y);
                for (j, &gi) in el.global.iter().enumerate() {
                    g[gi] -= c[j];
                }
            }
        }
        g
    }

    /// Full vector [A_ll^{-1}(b_l - A_lg u_g), u_g] for given local loads.
    pub fn recover_with(&self, global: &[f64], full_rhs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_local + self.n_global];
        out[self.n_local..].copy_from_slice(global);
        for el in &self.elems {
            if let Some(f) = &el.factor {
                let ug = DVector::from_iterator(el.global.len(), el.global.iter().map(|&i| global[i]));
                let mut r = DVector::from_iterator(el.local.len(), el.local.iter().map(|&i| full_rhs[i]));
                r -= &el.coupling * ug;
                let ul = f.solve(&r);
                for (j, &li) in el.local.iter().enumerate() {
                    out[li] = ul[j];
                }
            }
        }
        out
    }

    /// Harmonic lift (zero local load) of a global vector.
    pub fn lift(&self, global: &[f64]) -> Vec<f64> {
        let zero = vec![0.0; self.n_local + self.n_global];
        self.recover_with(global, &zero)
    }
}

/// Full solution from the global part, using the loads the system was condensed with.
pub fn recover(system: &CondensedSystem, global_solution: &[f64], rhs: &[f64]) -> Vec<f64> {
    system.recover_with(global_solution, rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble_scalar_rd, TauField};
    use crate::mesh::build_structured_mesh;

    fn dense_schur(a: &DMatrix<f64>, nl: usize) -> DMatrix<f64> {
        let n = a.nrows();
        let ng = n - nl;
        let all = a.view((0, 0), (nl, nl)).into_owned();
        let alg = a.view((0, nl), (nl, ng)).into_owned();
        let agg = a.view((nl, nl), (ng, ng)).into_owned();
        agg - alg.transpose() * all.try_inverse().unwrap() * alg
    }

    #[test]
    fn schur_matches_dense_elimination() {
        let m = build_structured_mesh(2, 1).unwrap();
        let asm = assemble_scalar_rd(&m, 1, TauField::uniform(1.0), 4.0).unwrap();
        let sys = condense(&asm.problem, &asm.rhs).unwrap();
        let full = asm.problem.to_sparse().to_dense();
        let s = dense_schur(&full, asm.problem.n_local);
        let diff = (sys.schur.to_dense() - &s).norm() / s.norm();
        assert!(diff < 1e-12, "{diff}");
    }

    #[test]
    fn recovered_solution_solves_full_system() {
        let m = build_structured_mesh(2, 2).unwrap();
        let asm = assemble_scalar_rd(&m, 2, TauField::uniform(1.0), 4.0).unwrap();
        let sys = condense(&asm.problem, &asm.rhs).unwrap();
        let ug = sys.schur.cholesky().unwrap().solve(&sys.lifted_rhs);
        let u = recover(&sys, &ug, &asm.rhs);
        let a = asm.problem.to_sparse();
        let r: Vec<f64> = a.mul_vec(&u).iter().zip(&asm.rhs).map(|(x, b)| x - b).collect();
        let rn = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        let bn = asm.rhs.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(rn / bn < 1e-9);
        let dense = a.to_dense().lu().solve(&DVector::from_vec(asm.rhs.clone())).unwrap();
        for (x, y) in u.iter().zip(dense.iter()) {
            assert!((x - y).abs() < 1e-9 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let m = build_structured_mesh(2, 2).unwrap();
        let asm = assemble_scalar_rd(&m, 1, TauField::uniform(1.0), 4.0).unwrap();
        let z = vec![0.0; asm.rhs.len()];
        let sys = condense(&asm.problem, &z).unwrap();
        assert!(sys.lifted_rhs.iter().all(|x| *x == 0.0));
        let u = recover(&sys, &vec![0.0; sys.n_global], &z);
        assert!(u.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn energy_identity() {
        let m = build_structured_mesh(2, 2).unwrap();
        let asm = assemble_scalar_rd(&m, 2, TauField::uniform(1.0), 4.0).unwrap();
        let sys = condense(&asm.problem, &asm.rhs).unwrap();
        let g: Vec<f64> = (0..sys.n_global).map(|i| ((i * 7 + 3) as f64).sin()).collect();
        let full = sys.lift(&g);
        let e1 = asm.problem.bilinear(&full, &full);
        let sg = sys.schur.mul_vec(&g);
        let e2: f64 = sg.iter().zip(&g).map(|(a, b)| a * b).sum();
        assert!((e1 - e2).abs() < 1e-11 * e2.abs());
    }
}
