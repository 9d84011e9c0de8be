use std::sync::Arc;

use asphdg::asp::{build_preconditioner, materialize, AuxKind, PreconditionerInput, ProblemKind, SmootherKind};
use asphdg::assembly::{assemble_scalar_rd, assemble_vector_rd, Assembled, TauField, VectorVariant};
use asphdg::condense::condense;
use asphdg::krylov::{dense_condition, estimate_condition, pcg, ConditionMode};
use asphdg::mesh::{build_structured_mesh, Mesh};
use asphdg::smoother::jacobi;
use asphdg::sparse::SparseMatrix;

fn scalar(n: usize, tau: f64, alpha: f64) -> (Mesh, Assembled, SparseMatrix) {
    let m = build_structured_mesh(2, n).unwrap();
    let asm = assemble_scalar_rd(&m, 1, TauField::uniform(tau), alpha).unwrap();
    let s = condense(&asm.problem, &asm.rhs).unwrap().schur;
    (m, asm, s)
}

fn bgs(m: &Mesh, asm: &Assembled, s: &SparseMatrix, problem: ProblemKind, tau: f64) -> Box<dyn asphdg::asp::LinearOperator> {
    let input = PreconditionerInput {
        mesh: m,
        problem,
        assembled: asm,
        schur: Arc::new(s.clone()),
        tau: TauField::uniform(tau),
        alpha: 4.0,
    };
    build_preconditioner(&input, SmootherKind::Bgs, AuxKind::Direct).unwrap()
}

#[test]
fn doubling_alpha_keeps_spd() {
    for alpha in [4.0, 8.0, 16.0, 32.0] {
        let (_, asm, s) = scalar(3, 1.0, alpha);
        assert!(asm.problem.to_sparse().to_dense().cholesky().is_some());
        assert!(s.to_dense().cholesky().is_some());
    }
}

#[test]
fn condition_number_grows_like_inverse_h_squared() {
    let ev: Vec<(f64, f64)> = [2usize, 4, 8]
        .iter()
        .map(|&n| {
            let e = scalar(n, 1.0, 4.0).2.to_dense().symmetric_eigen().eigenvalues;
            (e.min(), e.max())
        })
        .collect();
    for w in ev.windows(2) {
        // 2D skeleton entries are h-independent: the top stays put, the bottom drops like h^2
        assert!(w[1].1 > 0.5 * w[0].1 && w[1].1 < 2.0 * w[0].1, "{ev:?}");
        let growth = (w[1].1 / w[1].0) / (w[0].1 / w[0].0);
        assert!((2.0..=8.0).contains(&growth), "{growth}");
    }
}

#[test]
fn pcg_iterations_respect_classical_bound() {
    for n in [2usize, 4, 8] {
        for tau in [1.0, 1e4] {
            let (m, asm, s) = scalar(n, tau, 4.0);
            let b = bgs(&m, &asm, &s, ProblemKind::ScalarRd, tau);
            let kappa = dense_condition(&s.to_dense(), &materialize(&*b)).unwrap();
            let rhs: Vec<f64> = (0..s.nrows).map(|i| 1.0 + (i as f64).sin()).collect();
            let tol: f64 = 1e-10;
            let (_, rep) = pcg(&s, &*b, &rhs, tol, 1000).unwrap();
            let bound = (kappa.sqrt() * (2.0 / tol).ln() / 2.0).ceil() as usize + 1;
            assert!(rep.iterations <= bound, "N={n} tau={tau}: {} > {bound}", rep.iterations);
        }
    }
}

#[test]
fn iterative_condition_estimate_matches_dense() {
    let (m, asm, s) = scalar(4, 1.0, 4.0);
    let b = bgs(&m, &asm, &s, ProblemKind::ScalarRd, 1.0);
    let dense = dense_condition(&s.to_dense(), &materialize(&*b)).unwrap();
    let iter = estimate_condition(&s, &*b, ConditionMode::Iterative { probes: 3, seed: 7 }).unwrap();
    assert!((iter - dense).abs() <= 0.15 * dense, "{iter} vs {dense}");
    let again = estimate_condition(&s, &*b, ConditionMode::Iterative { probes: 3, seed: 7 }).unwrap();
    assert_eq!(iter, again);
}

#[test]
fn iteration_count_invariant_under_scaling() {
    let (_, _, s) = scalar(6, 1.0, 4.0);
    let rhs = vec![1.0; s.nrows];
    let j1 = jacobi(&s).unwrap();
    let s3 = s.scale(3.0);
    let j3 = jacobi(&s3).unwrap();
    let (_, r1) = pcg(&s, &j1, &rhs, 1e-10, 1000).unwrap();
    let (_, r3) = pcg(&s3, &j3, &rhs, 1e-10, 1000).unwrap();
    assert_eq!(r1.iterations, r3.iterations);
    assert!((r1.kappa - r3.kappa).abs() < 1e-6 * r1.kappa);
}

#[test]
fn large_reaction_makes_jacobi_optimal() {
    for n in [2usize, 4, 8] {
        let (_, _, s) = scalar(n, 1e4, 4.0);
        let k = dense_condition(&s.to_dense(), &materialize(&jacobi(&s).unwrap())).unwrap();
        assert!(k <= 50.0, "N={n}: {k}");
    }
    let m = build_structured_mesh(2, 4).unwrap();
    let asm = assemble_vector_rd(&m, 1, TauField::uniform(1e4), 4.0, VectorVariant::Full).unwrap();
    let s = condense(&asm.problem, &asm.rhs).unwrap().schur;
    let k = dense_condition(&s.to_dense(), &materialize(&jacobi(&s).unwrap())).unwrap();
    assert!(k <= 50.0, "vector: {k}");
}

#[test]
fn preconditioners_are_spd() {
    let (m, asm, s) = scalar(3, 1.0, 4.0);
    let b = materialize(&*bgs(&m, &asm, &s, ProblemKind::ScalarRd, 1.0));
    assert!((&b - b.transpose()).abs().max() <= 1e-12 * b.abs().max());
    assert!(b.symmetric_eigen().eigenvalues.min() > 0.0);
    let m = build_structured_mesh(2, 3).unwrap();
    let asm = assemble_vector_rd(&m, 2, TauField::uniform(1.0), 4.0, VectorVariant::Full).unwrap();
    let s = condense(&asm.problem, &asm.rhs).unwrap().schur;
    let b = materialize(&*bgs(&m, &asm, &s, ProblemKind::VectorRd(VectorVariant::Full), 1.0));
    assert!((&b - b.transpose()).abs().max() <= 1e-12 * b.abs().max());
    assert!(b.symmetric_eigen().eigenvalues.min() > 0.0);
}
