//! Experiment pipeline, table reproduction, CSV/JSON output and dense oracles.

use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::asp::{build_preconditioner, materialize, AuxKind, PreconditionerInput, ProblemKind, SmootherKind};
use crate::assembly::{
    assemble_cip_biharmonic, assemble_scalar_rd, assemble_vector_rd, Assembled, BiharmonicBc, TauField,
    VectorVariant,
};
use crate::condense::{condense, CondensedSystem};
use crate::error::{Error, Result};
use crate::krylov::{dense_condition, pcg, SolveReport};
use crate::mesh::{build_structured_mesh, Mesh};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Problem {
    #[serde(rename = "scalar-rd")]
    ScalarRd,
    #[serde(rename = "vector-rd")]
    VectorRd,
    #[serde(rename = "biharmonic")]
    Biharmonic,
}

impl Problem {
    pub fn as_str(&self) -> &'static str {
        match self {
            Problem::ScalarRd => "scalar-rd",
            Problem::VectorRd => "vector-rd",
            Problem::Biharmonic => "biharmonic",
        }
    }
}

impl std::str::FromStr for Problem {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scalar-rd" => Ok(Problem::ScalarRd),
            "vector-rd" => Ok(Problem::VectorRd),
            "biharmonic" => Ok(Problem::Biharmonic),
            _ => Err(Error::InvalidArgument(format!("unknown problem {s}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub problem: Problem,
    pub dim: usize,
    pub k: u32,
    #[serde(rename = "N")]
    pub n: usize,
    pub tau1: f64,
    pub tau2: f64,
    pub smoother: SmootherKind,
    pub aux: AuxKind,
    /// biharmonic only
    pub bc: Option<BiharmonicBc>,
    pub alpha: f64,
    pub tol: f64,
    pub seed: u64,
    pub maxit: usize,
    /// record wall-clock times; off gives byte-identical output across runs
    pub timings: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            problem: Problem::ScalarRd,
            dim: 2,
            k: 1,
            n: 8,
            tau1: 1.0,
            tau2: 1.0,
            smoother: SmootherKind::Bgs,
            aux: AuxKind::Direct,
            bc: None,
            alpha: 4.0,
            tol: 1e-10,
            seed: 0,
            maxit: 2000,
            timings: true,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if self.n < 1 {
            return bad("N must be at least 1");
        }
        if self.k < 1 {
            return bad("k must be at least 1");
        }
        if !(self.tau1 >= 0.0 && self.tau2 >= 0.0) {
            return bad("reaction coefficients must be non-negative");
        }
        if !(self.alpha > 0.0) || !(self.tol > 0.0) {
            return bad("alpha and tol must be positive");
        }
        match self.problem {
            Problem::ScalarRd if self.dim != 2 && self.dim != 3 => bad("scalar-rd needs dim 2 or 3"),
            Problem::VectorRd | Problem::Biharmonic if self.dim != 2 => bad("vector-rd and biharmonic need dim 2"),
            Problem::ScalarRd | Problem::VectorRd if self.aux != AuxKind::Direct => {
                bad("reaction-diffusion problems use aux = direct")
            }
            _ => Ok(()),
        }
    }

    pub fn tau(&self) -> TauField {
        TauField { tau1: self.tau1, tau2: self.tau2 }
    }

    pub fn biharmonic_bc(&self) -> BiharmonicBc {
        self.bc.unwrap_or(BiharmonicBc::SimplySupported)
    }

    fn problem_kind(&self) -> ProblemKind {
        match self.problem {
            Problem::ScalarRd => ProblemKind::ScalarRd,
            Problem::VectorRd => ProblemKind::VectorRd(VectorVariant::Full),
            Problem::Biharmonic => ProblemKind::Biharmonic(self.biharmonic_bc()),
        }
    }

    /// Smoother label: the direct fictitious space preconditioner has none.
    pub fn smoother_label(&self) -> &'static str {
        if self.problem == Problem::Biharmonic && self.aux == AuxKind::Direct {
            return "none";
        }
        match self.smoother {
            SmootherKind::Jacobi => "jacobi",
            SmootherKind::Bgs => "bgs",
        }
    }

    pub fn bc_label(&self) -> &'static str {
        match self.problem {
            Problem::Biharmonic => match self.biharmonic_bc() {
                BiharmonicBc::SimplySupported => "simply-supported",
                BiharmonicBc::Clamped => "clamped",
            },
            _ => "dirichlet",
        }
    }

    /// Preconditioner name as used in the tables.
    pub fn preconditioner_name(&self) -> &'static str {
        match (self.problem, self.aux, self.smoother) {
            (Problem::Biharmonic, AuxKind::Direct, _) => "ASP-DIR",
            (Problem::Biharmonic, AuxKind::Asp, _) => "ASP-ASP",
            (_, _, SmootherKind::Jacobi) => "JAC-ASP",
            (_, _, SmootherKind::Bgs) => "BGS-ASP",
        }
    }
}

/// One CSV row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub problem: String,
    pub dim: usize,
    pub k: u32,
    #[serde(rename = "N")]
    pub n: usize,
    pub tau1: f64,
    pub tau2: f64,
    pub smoother: String,
    pub aux: String,
    pub bc: String,
    pub dofs_global: usize,
    pub iters: usize,
    pub kappa_est: f64,
    pub setup_ms: f64,
    pub solve_ms: f64,
    pub converged: bool,
}

pub const CSV_HEADER: &str =
    "problem,dim,k,N,tau1,tau2,smoother,aux,bc,dofs_global,iters,kappa_est,setup_ms,solve_ms,converged";

/// Mesh, assembly and condensation of a configuration.
pub struct Discretization {
    pub mesh: Mesh,
    pub assembled: Assembled,
    pub condensed: CondensedSystem,
}

pub fn discretize(cfg: &ExperimentConfig) -> Result<Discretization> {
    cfg.validate()?;
    let mesh = build_structured_mesh(cfg.dim, cfg.n)?;
    let tau = cfg.tau();
    let assembled = match cfg.problem {
        Problem::ScalarRd => assemble_scalar_rd(&mesh, cfg.k, tau, cfg.alpha)?,
        Problem::VectorRd => assemble_vector_rd(&mesh, cfg.k, tau, cfg.alpha, VectorVariant::Full)?,
        Problem::Biharmonic => assemble_cip_biharmonic(&mesh, cfg.k, tau, cfg.alpha, cfg.biharmonic_bc())?,
    };
    let condensed = condense(&assembled.problem, &assembled.rhs)?;
    Ok(Discretization { mesh, assembled, condensed })
}

/// Build the preconditioner of a configuration for an existing discretization.
pub fn preconditioner_for(
    cfg: &ExperimentConfig,
    d: &Discretization,
    schur: Arc<crate::sparse::SparseMatrix>,
) -> Result<Box<dyn crate::asp::LinearOperator>> {
    let input = PreconditionerInput {
        mesh: &d.mesh,
        problem: cfg.problem_kind(),
        assembled: &d.assembled,
        schur,
        tau: cfg.tau(),
        alpha: cfg.alpha,
    };
    build_preconditioner(&input, cfg.smoother, cfg.aux)
}

/// Full pipeline; returns the row and the solver report.
pub fn run_experiment_report(cfg: &ExperimentConfig) -> Result<(ResultRow, SolveReport)> {
    let t0 = Instant::now();
    let d = discretize(cfg)?;
    let schur = Arc::new(d.condensed.schur.clone());
    let b = preconditioner_for(cfg, &d, schur.clone())?;
    let setup_ms = t0.elapsed().as_secs_f64() * 1e3;
    let (_, mut rep) = pcg(&*schur, &*b, &d.condensed.lifted_rhs, cfg.tol, cfg.maxit)?;
    rep.setup_ms = setup_ms;
    if !cfg.timings {
        rep.setup_ms = 0.0;
        rep.solve_ms = 0.0;
    }
    let row = ResultRow {
        problem: cfg.problem.as_str().into(),
        dim: cfg.dim,
        k: cfg.k,
        n: cfg.n,
        tau1: cfg.tau1,
        tau2: cfg.tau2,
        smoother: cfg.smoother_label().into(),
        aux: match cfg.aux {
            AuxKind::Direct => "direct".into(),
            AuxKind::Asp => "asp".into(),
        },
        bc: cfg.bc_label().into(),
        dofs_global: schur.nrows,
        iters: rep.iterations,
        kappa_est: rep.kappa,
        setup_ms: rep.setup_ms,
        solve_ms: rep.solve_ms,
        converged: rep.converged,
    };
    Ok((row, rep))
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultRow> {
    run_experiment_report(cfg).map(|r| r.0)
}

pub const TAU_COMBOS: [(f64, f64); 4] = [(1.0, 1.0), (1.0, 1e4), (1e4, 1.0), (1e4, 1e4)];

/// Configurations of a table in row order: k, then N, then tau combination, then preconditioner
/// (table column order).
pub fn table_configs(table: u32, n_max: usize, k_set: &[u32], base: &ExperimentConfig) -> Result<Vec<ExperimentConfig>> {
    let (problem, dim, bc) = match table {
        1 => (Problem::ScalarRd, 3, None),
        2 => (Problem::VectorRd, 2, None),
        3 => (Problem::Biharmonic, 2, Some(BiharmonicBc::SimplySupported)),
        4 => (Problem::Biharmonic, 2, Some(BiharmonicBc::Clamped)),
        _ => return Err(Error::InvalidArgument(format!("unknown table {table}"))),
    };
    let precs: [(SmootherKind, AuxKind); 2] = if problem == Problem::Biharmonic {
        [(SmootherKind::Bgs, AuxKind::Asp), (SmootherKind::Bgs, AuxKind::Direct)]
    } else {
        [(SmootherKind::Jacobi, AuxKind::Direct), (SmootherKind::Bgs, AuxKind::Direct)]
    };
    let mut ns: Vec<usize> = std::iter::successors(Some(8usize), |n| Some(n * 2)).take_while(|n| *n <= n_max).collect();
    if ns.is_empty() {
        ns.push(n_max.max(1));
    }
    let mut out = Vec::new();
    for &k in k_set {
        for &n in &ns {
            for (tau1, tau2) in TAU_COMBOS {
                for (smoother, aux) in precs {
                    out.push(ExperimentConfig { problem, dim, k, n, tau1, tau2, smoother, aux, bc, ..base.clone() });
                }
            }
        }
    }
    Ok(out)
}

pub fn reproduce_table_rows(table: u32, n_max: usize, k_set: &[u32], base: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    table_configs(table, n_max, k_set, base)?.iter().map(run_experiment).collect()
}

/// CSV text of a table.
pub fn reproduce_table(table: u32, n_max: usize, k_set: &[u32], base: &ExperimentConfig) -> Result<String> {
    rows_to_csv(&reproduce_table_rows(table, n_max, k_set, base)?)
}

pub fn rows_to_csv(rows: &[ResultRow]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let body = String::from_utf8(w.into_inner().map_err(|e| Error::Numerical(e.to_string()))?)
        .map_err(|e| Error::Numerical(e.to_string()))?;
    Ok(format!("{CSV_HEADER}\n{body}"))
}

pub fn rows_from_csv(text: &str) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for row in r.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

/// JSON array with one object per line.
pub fn rows_to_json(rows: &[ResultRow]) -> Result<String> {
    let mut s = String::from("[\n");
    for (i, r) in rows.iter().enumerate() {
        s.push_str("  ");
        s.push_str(&serde_json::to_string(r)?);
        if i + 1 < rows.len() {
            s.push(',');
        }
        s.push('\n');
    }
    s.push_str("]\n");
    Ok(s)
}

/// Dense brute-force quantities of a small configuration.
pub struct DenseOracle {
    pub full: DMatrix<f64>,
    /// Schur complement by dense elimination
    pub schur: DMatrix<f64>,
    /// eigenvalues of the Schur complement, ascending
    pub eigenvalues: DVector<f64>,
    /// condition number of the preconditioned Schur complement
    pub kappa: f64,
    /// condition number of the Schur complement itself
    pub kappa_schur: f64,
    /// Schur complement from the sparse condensation
    pub sparse_schur: DMatrix<f64>,
    pub n_local: usize,
}

pub const DENSE_CAP: usize = 2000;

pub fn dense_schur(full: &DMatrix<f64>, n_local: usize) -> Result<DMatrix<f64>> {
    let n = full.nrows();
    let ng = n - n_local;
    let agg = full.view((n_local, n_local), (ng, ng)).into_owned();
    if n_local == 0 {
        return Ok(agg);
    }
    let all = full.view((0, 0), (n_local, n_local)).into_owned();
    let alg = full.view((0, n_local), (n_local, ng)).into_owned();
    let x = all.lu().solve(&alg).ok_or_else(|| Error::Numerical("singular local block".into()))?;
    Ok(agg - alg.transpose() * x)
}

pub fn dense_oracle(cfg: &ExperimentConfig) -> Result<DenseOracle> {
    let d = discretize(cfg)?;
    let n = d.assembled.problem.n_total();
    if n > DENSE_CAP {
        return Err(Error::SizeCap(format!("{n} DOFs exceed the dense cap {DENSE_CAP}")));
    }
    let full = d.assembled.problem.to_sparse().to_dense();
    let schur = dense_schur(&full, d.assembled.problem.n_local)?;
    let mut ev: Vec<f64> = schur.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let kappa_schur = ev[ev.len() - 1] / ev[0];
    let sp = Arc::new(d.condensed.schur.clone());
    let b = preconditioner_for(cfg, &d, sp.clone())?;
    let kappa = dense_condition(&schur, &materialize(&*b))?;
    Ok(DenseOracle {
        full,
        schur,
        eigenvalues: DVector::from_vec(ev),
        kappa,
        kappa_schur,
        sparse_schur: sp.to_dense(),
        n_local: d.assembled.problem.n_local,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_row_counts_and_order() {
        let base = ExperimentConfig::default();
        let c = table_configs(1, 16, &[1], &base).unwrap();
        assert_eq!(c.len(), 16);
        let taus: Vec<(f64, f64)> = c.iter().step_by(2).take(4).map(|c| (c.tau1, c.tau2)).collect();
        assert_eq!(taus, TAU_COMBOS.to_vec());
        assert_eq!(c[0].preconditioner_name(), "JAC-ASP");
        assert_eq!(c[1].preconditioner_name(), "BGS-ASP");
        let c = table_configs(3, 8, &[1, 2], &base).unwrap();
        assert_eq!(c.len(), 16);
        assert_eq!(c[0].preconditioner_name(), "ASP-ASP");
        assert!(table_configs(5, 8, &[1], &base).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let cfg = ExperimentConfig { n: 2, ..Default::default() };
        let rows = vec![run_experiment(&cfg).unwrap()];
        let text = rows_to_csv(&rows).unwrap();
        assert!(text.starts_with(CSV_HEADER));
        assert_eq!(rows_from_csv(&text).unwrap(), rows);
        let json = rows_to_json(&rows).unwrap();
        let back: Vec<ResultRow> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, rows);
    }

    #[test]
    fn validation() {
        let bad = ExperimentConfig { problem: Problem::VectorRd, dim: 3, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = ExperimentConfig { k: 0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = ExperimentConfig { aux: AuxKind::Asp, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn oracle_schur_agrees() {
        let cfg = ExperimentConfig { n: 1, ..Default::default() };
        let o = dense_oracle(&cfg).unwrap();
        let diff = (&o.sparse_schur - &o.schur).norm() / o.schur.norm();
        assert!(diff <= 1e-12);
        assert!(o.eigenvalues[0] > 0.0);
        let big = ExperimentConfig { n: 64, ..Default::default() };
        assert!(matches!(dense_oracle(&big), Err(Error::SizeCap(_))));
    }
}
