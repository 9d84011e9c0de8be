//! Point Jacobi and overlapping facet-patch block symmetric Gauss-Seidel.

use std::sync::Arc;

use nalgebra::{Cholesky, DVector, Dyn};

use crate::asp::LinearOperator;
use crate::assembly::Assembled;
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::sparse::SparseMatrix;

#[derive(Clone, Debug)]
pub struct Jacobi {
    inv_diag: Vec<f64>,
}

pub fn jacobi(a: &SparseMatrix) -> Result<Jacobi> {
    let d = a.diag();
    if let Some(i) = d.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::NotSpd(format!("diagonal entry {i} is {}", d[i])));
    }
    Ok(Jacobi { inv_diag: d.iter().map(|v| 1.0 / v).collect() })
}

impl LinearOperator for Jacobi {
    fn dim(&self) -> usize {
        self.inv_diag.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for ((yi, xi), di) in y.iter_mut().zip(x).zip(&self.inv_diag) {
            *yi = xi * di;
        }
    }
}

/// Overlapping blocks of global DOFs, one per facet carrying free DOFs, in facet order.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockPartition {
    pub blocks: Vec<Vec<usize>>,
    pub keys: Vec<usize>,
}

impl BlockPartition {
    /// Patch of the facets sharing an element with F, over both global blocks of `asm`.
    pub fn facet_patches(mesh: &Mesh, asm: &Assembled) -> Self {
        let vs = &asm.volume_space;
        let fs = &asm.facet_space;
        let ng0 = vs.n_global;
        let attached = |f: usize| -> Vec<usize> {
            let mut v: Vec<usize> = vs.facet_attached[f].iter().filter_map(|&d| vs.global_index[d]).collect();
            v.extend(fs.facet_attached[f].iter().filter_map(|&d| fs.global_index[d]).map(|g| g + ng0));
            v
        };
        let mut blocks = Vec::new();
        let mut keys = Vec::new();
        for f in 0..mesh.n_facets() {
            let own = attached(f);
            // keyed on facets carrying free DOFs of their own
            let carries = vs.facet_attached[f]
                .iter()
                .filter(|&&d| matches!(vs.dofs[d].entity, crate::fespace::Entity::Facet(_)))
                .any(|&d| vs.global_index[d].is_some())
                || fs.facet_attached[f].iter().any(|&d| fs.global_index[d].is_some());
            if !carries || own.is_empty() {
                continue;
            }
            let fa = &mesh.facets[f];
            let mut b = Vec::new();
            for o in 0..fa.n_owners {
                for &g in &mesh.element_facets[fa.owners[o]][..=mesh.dim] {
                    b.extend(attached(g));
                }
            }
            b.sort_unstable();
            b.dedup();
            blocks.push(b);
            keys.push(f);
        }
        BlockPartition { blocks, keys }
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn covers(&self, n: usize) -> bool {
        let mut seen = vec![false; n];
        for b in &self.blocks {
            for &i in b {
                seen[i] = true;
            }
        }
        seen.iter().all(|s| *s)
    }
}

/// Symmetric multiplicative Schwarz over the blocks: forward sweep then backward sweep.
#[derive(Clone, Debug)]
pub struct BlockSgs {
    a: Arc<SparseMatrix>,
    blocks: Vec<Vec<usize>>,
    factors: Vec<Cholesky<f64, Dyn>>,
}

pub fn block_sgs(a: Arc<SparseMatrix>, blocks: &BlockPartition) -> Result<BlockSgs> {
    if !blocks.covers(a.nrows) {
        return Err(Error::InvalidArgument("blocks do not cover all DOFs".into()));
    }
    let mut pos = vec![usize::MAX; a.nrows];
    let mut factors = Vec::with_capacity(blocks.len());
    for (i, b) in blocks.blocks.iter().enumerate() {
        let sub = a.principal_submatrix(b, &mut pos);
        let c = Cholesky::new(sub).ok_or_else(|| Error::NotSpd(format!("block {i} is not SPD")))?;
        factors.push(c);
    }
    Ok(BlockSgs { a, blocks: blocks.blocks.clone(), factors })
}

impl BlockSgs {
    fn correct(&self, bi: usize, r: &[f64], x: &mut [f64]) {
        let b = &self.blocks[bi];
        let mut loc = DVector::<f64>::zeros(b.len());
        for (p, &i) in b.iter().enumerate() {
            let (cols, vals) = self.a.row(i);
            let mut s = r[i];
            for (c, v) in cols.iter().zip(vals) {
                s -= v * x[*c];
            }
            loc[p] = s;
        }
        self.factors[bi].solve_mut(&mut loc);
        for (p, &i) in b.iter().enumerate() {
            x[i] += loc[p];
        }
    }
}

impl LinearOperator for BlockSgs {
    fn dim(&self) -> usize {
        self.a.nrows
    }

    fn apply(&self, r: &[f64], x: &mut [f64]) {
        x.iter_mut().for_each(|v| *v = 0.0);
        for bi in 0..self.blocks.len() {
            self.correct(bi, r, x);
        }
        for bi in (0..self.blocks.len()).rev() {
            self.correct(bi, r, x);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asp::materialize;
    use crate::assembly::{assemble_scalar_rd, TauField};
    use crate::condense::condense;
    use crate::krylov::pcg;
    use crate::mesh::build_structured_mesh;

    fn scalar_schur(n: usize) -> (Mesh, Assembled, SparseMatrix) {
        let m = build_structured_mesh(2, n).unwrap();
        let asm = assemble_scalar_rd(&m, 1, TauField::uniform(1.0), 4.0).unwrap();
        let s = condense(&asm.problem, &asm.rhs).unwrap().schur;
        (m, asm, s)
    }

    #[test]
    fn jacobi_on_diagonal_is_exact() {
        let a = SparseMatrix::from_triplets(3, 3, &[(0, 0, 2.0), (1, 1, 5.0), (2, 2, 0.5)]);
        let j = jacobi(&a).unwrap();
        let (_, rep) = pcg(&a, &j, &[1.0, 2.0, 3.0], 1e-10, 10).unwrap();
        assert_eq!(rep.iterations, 1);
        let a2 = a.scale(3.0);
        let j2 = jacobi(&a2).unwrap();
        let mut y1 = vec![0.0; 3];
        let mut y2 = vec![0.0; 3];
        j.apply(&[1.0, 1.0, 1.0], &mut y1);
        j2.apply(&[1.0, 1.0, 1.0], &mut y2);
        for (a, b) in y1.iter().zip(&y2) {
            assert!((a / 3.0 - b).abs() < 1e-15);
        }
        let bad = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 1, -1.0)]);
        assert!(jacobi(&bad).is_err());
    }

    #[test]
    fn block_counts_and_symmetry() {
        let (m, asm, s) = scalar_schur(2);
        let bp = BlockPartition::facet_patches(&m, &asm);
        assert_eq!(bp.len(), 8);
        let sgs = block_sgs(Arc::new(s), &bp).unwrap();
        let d = materialize(&sgs);
        let asym = (&d - d.transpose()).abs().max();
        assert!(asym < 1e-12 * d.abs().max());
        assert!(d.symmetric_eigen().eigenvalues.min() > 0.0);
    }

    #[test]
    fn single_block_is_exact() {
        let (_, _, s) = scalar_schur(3);
        let bp = BlockPartition { blocks: vec![(0..s.nrows).collect()], keys: vec![0] };
        let sgs = block_sgs(Arc::new(s.clone()), &bp).unwrap();
        let b: Vec<f64> = (0..s.nrows).map(|i| (i as f64).sin() + 1.0).collect();
        let (_, rep) = pcg(&s, &sgs, &b, 1e-10, 10).unwrap();
        assert_eq!(rep.iterations, 1);
    }

    #[test]
    fn jacobi_spectrum_bracket() {
        let mut ratios = Vec::new();
        for n in [2, 4, 8] {
            let (_, _, s) = scalar_schur(n);
            let j = jacobi(&s).unwrap();
            let d = materialize(&j);
            let a = s.to_dense();
            let l = a.clone().cholesky().unwrap().l();
            let ev = (l.transpose() * d * l).symmetric_eigen().eigenvalues;
            assert!(ev.min() > 0.0);
            // at most max row count of nonzeros
            let rho = (0..s.nrows).map(|i| s.row(i).0.len()).max().unwrap() as f64;
            assert!(ev.max() <= rho + 1e-12);
            ratios.push(ev.max() / ev.min());
        }
        // kappa of the Jacobi-scaled Schur complement grows like h^-2
        assert!(ratios[2] / ratios[1] > 2.0 && ratios[2] / ratios[1] < 8.0);
    }
}
