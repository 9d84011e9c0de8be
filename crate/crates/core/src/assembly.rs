//! HDG bilinear forms with projected jumps, right-hand sides, P1 auxiliary operators and
//! the weighted inner products on the skeleton spaces.

use crate::error::{Error, Result};
use crate::fespace::{build_space, Bc, Entity, Space, SpaceKind};
use crate::geometry::{AffineMap, Point};
use crate::mesh::Mesh;
use crate::polybasis::basis::{BasisTab, ScalarBasis};
use crate::polybasis::hdiv::VectorTab;
use crate::polybasis::{
    build_h1_hierarchical, build_hdiv_basis, simplex_quadrature, FacetProjector, H1HierBasis, HdivBasis, HdivFamily,
    QuadratureRule,
};
pub use crate::sparse::SparseMatrix;
use crate::sparse::CsrAssembler;

/// Piecewise constant reaction coefficient: tau1 on subdomain tag 1, tau2 elsewhere.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TauField {
    pub tau1: f64,
    pub tau2: f64,
}

impl TauField {
    pub fn new(tau1: f64, tau2: f64) -> Result<Self> {
        if !(tau1 >= 0.0 && tau2 >= 0.0) {
            return Err(Error::InvalidArgument("reaction coefficients must be non-negative".into()));
        }
        Ok(TauField { tau1, tau2 })
    }

    pub fn uniform(tau: f64) -> Self {
        TauField { tau1: tau, tau2: tau }
    }

    pub fn at(&self, tag: u8) -> f64 {
        if tag == 1 {
            self.tau1
        } else {
            self.tau2
        }
    }
}

/// Dense element matrix over the element's kept DOFs: local ones first, then global ones.
#[derive(Clone, Debug)]
pub struct ElementBlock {
    pub local: Vec<usize>,
    pub global: Vec<usize>,
    pub matrix: Vec<f64>,
}

impl ElementBlock {
    pub fn size(&self) -> usize {
        self.local.len() + self.global.len()
    }
}

/// Element-wise representation of a problem over (local, global) DOFs.
/// Full vectors are laid out as [locals, globals]; globals are concatenated blocks.
#[derive(Clone, Debug)]
pub struct ProblemMatrix {
    pub n_local: usize,
    pub n_global: usize,
    /// offsets of the global blocks, block 0 first
    pub global_blocks: Vec<usize>,
    pub elements: Vec<ElementBlock>,
}

impl ProblemMatrix {
    pub fn n_total(&self) -> usize {
        self.n_local + self.n_global
    }

    fn full_dofs(&self, b: &ElementBlock) -> Vec<usize> {
        b.local.iter().copied().chain(b.global.iter().map(|g| self.n_local + g)).collect()
    }

    /// Materialize the full sparse matrix.
    pub fn to_sparse(&self) -> SparseMatrix {
        let lists: Vec<Vec<usize>> = self.elements.iter().map(|b| self.full_dofs(b)).collect();
        let mut asm = CsrAssembler::new(self.n_total(), lists.iter().map(|v| v.as_slice()));
        for (b, d) in self.elements.iter().zip(&lists) {
            asm.add_block(d, &b.matrix);
        }
        asm.finish()
    }

    /// x^T A y for full vectors.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut s = 0.0;
        for b in &self.elements {
            let d = self.full_dofs(b);
            let n = d.len();
            for i in 0..n {
                for j in 0..n {
                    s += x[d[i]] * b.matrix[i * n + j] * y[d[j]];
                }
            }
        }
        s
    }
}

/// Output of an HDG assembly.
#[derive(Clone, Debug)]
pub struct Assembled {
    pub problem: ProblemMatrix,
    pub rhs: Vec<f64>,
    pub volume_space: Space,
    pub facet_space: Space,
    pub k: u32,
}

impl Assembled {
    /// Full-vector index of every volume basis function of element e (None if constrained).
    pub fn volume_full_indices(&self, e: usize) -> Vec<Option<usize>> {
        volume_full_indices(&self.volume_space, self.problem.n_local, e)
    }
}

pub fn volume_full_indices(space: &Space, n_local: usize, e: usize) -> Vec<Option<usize>> {
    space.element_dofs[e]
        .iter()
        .map(|&(d, _)| {
            if let Some(l) = space.local_index[d] {
                Some(l)
            } else {
                space.global_index[d].map(|g| n_local + g)
            }
        })
        .collect()
}

/// Values, gradients and load pairing of volume basis functions at one physical point.
/// grad[i][c][j] = d u_c / d x_j
#[derive(Clone, Debug, Default)]
pub struct FieldTab {
    pub val: Vec<[f64; 2]>,
    pub grad: Vec<[[f64; 3]; 2]>,
    /// quantity paired with the forcing in the load vector
    pub load: Vec<[f64; 2]>,
}

#[derive(Clone, Debug)]
pub enum RefTab {
    Scalar(BasisTab),
    Vector(VectorTab),
}

#[derive(Clone, Debug)]
enum EvalKind {
    Lagrange(ScalarBasis),
    Hdiv(HdivBasis, Vec<usize>),
    Curl(H1HierBasis),
}

/// Evaluates the element basis of a volume space in physical coordinates.
#[derive(Clone, Debug)]
pub struct VolumeEvaluator {
    kind: EvalKind,
    n: usize,
    pub ncomp: usize,
}

impl VolumeEvaluator {
    pub fn for_space(space: &Space) -> Result<Self> {
        Ok(match space.kind {
            SpaceKind::ScalarDg | SpaceKind::ScalarP1 => {
                let b = ScalarBasis::lagrange(space.dim, space.degree);
                let n = b.len();
                VolumeEvaluator { kind: EvalKind::Lagrange(b), n, ncomp: 1 }
            }
            SpaceKind::HdivFull | SpaceKind::HdivCst => {
                let b = build_hdiv_basis(space.degree)?;
                let keep: Vec<usize> = (0..b.len())
                    .filter(|&i| space.kind == SpaceKind::HdivFull || b.family[i] != HdivFamily::InteriorDiv)
                    .collect();
                let n = keep.len();
                VolumeEvaluator { kind: EvalKind::Hdiv(b, keep), n, ncomp: 2 }
            }
            SpaceKind::ScalarH1Kp1 => {
                let b = build_h1_hierarchical(space.degree);
                let n = b.len();
                VolumeEvaluator { kind: EvalKind::Curl(b), n, ncomp: 2 }
            }
            _ => return Err(Error::InvalidArgument(format!("{:?} is not a volume space", space.kind))),
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn ref_tab(&self, xi: &Point) -> RefTab {
        match &self.kind {
            EvalKind::Lagrange(b) => RefTab::Scalar(b.tabulate(xi)),
            EvalKind::Curl(b) => RefTab::Scalar(b.basis.tabulate(xi)),
            EvalKind::Hdiv(b, _) => RefTab::Vector(b.tabulate(xi)),
        }
    }

    pub fn map_tab(&self, rt: &RefTab, map: &AffineMap, signs: &[f64], out: &mut FieldTab) {
        out.val.clear();
        out.grad.clear();
        out.load.clear();
        match (&self.kind, rt) {
            (EvalKind::Lagrange(_), RefTab::Scalar(t)) => {
                for i in 0..self.n {
                    let s = signs[i];
                    let g = map.grad(&t.grad[i]);
                    out.val.push([s * t.val[i], 0.0]);
                    out.grad.push([[s * g[0], s * g[1], s * g[2]], [0.0; 3]]);
                    out.load.push([s * t.val[i], 0.0]);
                }
            }
            (EvalKind::Curl(_), RefTab::Scalar(t)) => {
                for i in 0..self.n {
                    let s = signs[i];
                    let g = map.grad(&t.grad[i]);
                    let h = map.hess(&t.hess[i]);
                    out.val.push([s * g[1], -s * g[0]]);
                    out.grad.push([[s * h[1][0], s * h[1][1], 0.0], [-s * h[0][0], -s * h[0][1], 0.0]]);
                    out.load.push([s * t.val[i], 0.0]);
                }
            }
            (EvalKind::Hdiv(_, keep), RefTab::Vector(t)) => {
                for (i, &r) in keep.iter().enumerate() {
                    let s = signs[i];
                    let (v, j) = map.piola(&t.val[r], &t.jac[r]);
                    out.val.push([s * v[0], s * v[1]]);
                    out.grad.push([[s * j[0][0], s * j[0][1], 0.0], [s * j[1][0], s * j[1][1], 0.0]]);
                    out.load.push([s * v[0], s * v[1]]);
                }
            }
            _ => unreachable!("tabulation does not match basis"),
        }
    }

    pub fn eval(&self, map: &AffineMap, xi: &Point, signs: &[f64]) -> FieldTab {
        let mut out = FieldTab::default();
        self.map_tab(&self.ref_tab(xi), map, signs, &mut out);
        out
    }

    /// Scalar values of an H1 curl basis (the potentials themselves).
    pub fn potential_values(&self, xi: &Point, signs: &[f64]) -> Vec<f64> {
        let v = match &self.kind {
            EvalKind::Curl(b) => b.basis.values(xi),
            EvalKind::Lagrange(b) => b.values(xi),
            EvalKind::Hdiv(..) => panic!("potential values need a scalar space"),
        };
        v.iter().zip(signs).map(|(v, s)| v * s).collect()
    }
}

/// Physical integration weight factor of a facet reference rule.
pub fn facet_jacobian(mesh: &Mesh, f: usize) -> f64 {
    if mesh.dim == 2 {
        mesh.facets[f].measure
    } else {
        2.0 * mesh.facets[f].measure
    }
}

/// Length scale in the penalty: min over the owners of |K|/|F|.
pub fn penalty_h(mesh: &Mesh, f: usize) -> f64 {
    let fa = &mesh.facets[f];
    (0..fa.n_owners)
        .map(|i| mesh.element_map(fa.owners[i]).volume() / fa.measure)
        .fold(f64::INFINITY, f64::min)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TraceMode {
    Scalar,
    Tangential,
}

pub type Forcing<'a> = &'a dyn Fn(&Point) -> [f64; 2];

struct KernelData<'a> {
    vol: &'a VolumeEvaluator,
    vol_ref: Vec<RefTab>,
    qv: QuadratureRule,
    qf: QuadratureRule,
    proj: FacetProjector,
    mode: TraceMode,
    alpha: f64,
    kpen: f64,
}

fn element_kernel(
    mesh: &Mesh,
    e: usize,
    kd: &KernelData,
    signs: &[f64],
    tau: f64,
    forcing: Forcing,
    tab: &mut FieldTab,
) -> (Vec<f64>, Vec<f64>) {
    let d = mesh.dim;
    let nv = kd.vol.len();
    let nf = kd.proj.len();
    let n = nv + (d + 1) * nf;
    let mut a = vec![0.0; n * n];
    let mut b = vec![0.0; n];
    let map = mesh.element_map(e);
    let detabs = map.det.abs();
    for (q, (xi, w)) in kd.qv.points.iter().zip(&kd.qv.weights).enumerate() {
        let wt = w * detabs;
        kd.vol.map_tab(&kd.vol_ref[q], &map, signs, tab);
        let x = map.to_phys(xi);
        let fx = forcing(&x);
        for i in 0..nv {
            b[i] += wt * (fx[0] * tab.load[i][0] + fx[1] * tab.load[i][1]);
            for j in 0..=i {
                let mut s = 0.0;
                for c in 0..kd.vol.ncomp {
                    s += tab.grad[i][c][0] * tab.grad[j][c][0]
                        + tab.grad[i][c][1] * tab.grad[j][c][1]
                        + tab.grad[i][c][2] * tab.grad[j][c][2]
                        + tau * tab.val[i][c] * tab.val[j][c];
                }
                a[i * n + j] += wt * s;
            }
        }
    }
    for i in 0..nv {
        for j in 0..i {
            a[j * n + i] = a[i * n + j];
        }
    }
    let mut tr = vec![0.0; nv];
    let mut fl = vec![0.0; nv];
    for lf in 0..=d {
        let f = mesh.element_facets[e][lf];
        let nrm = mesh.outward_normal(e, lf);
        let jf = facet_jacobian(mesh, f);
        let gamma = kd.alpha * kd.kpen * kd.kpen / penalty_h(mesh, f);
        let t = if kd.mode == TraceMode::Tangential { mesh.facet_tangent(f) } else { [0.0; 3] };
        let off = nv + lf * nf;
        let mut mm = vec![0.0; nf * nf];
        let mut cm = vec![0.0; nf * nv];
        let mut fm = vec![0.0; nf * nv];
        let mut kk = vec![0.0; nv * nv];
        for (s, w) in kd.qf.points.iter().zip(&kd.qf.weights) {
            let wt = w * jf;
            let x = mesh.facet_point(f, s);
            let xi = map.to_ref(&x);
            let rt = kd.vol.ref_tab(&xi);
            kd.vol.map_tab(&rt, &map, signs, tab);
            for i in 0..nv {
                match kd.mode {
                    TraceMode::Scalar => {
                        tr[i] = tab.val[i][0];
                        fl[i] = (0..d).map(|l| tab.grad[i][0][l] * nrm[l]).sum();
                    }
                    TraceMode::Tangential => {
                        tr[i] = tab.val[i][0] * t[0] + tab.val[i][1] * t[1];
                        let gn0 = tab.grad[i][0][0] * nrm[0] + tab.grad[i][0][1] * nrm[1];
                        let gn1 = tab.grad[i][1][0] * nrm[0] + tab.grad[i][1][1] * nrm[1];
                        fl[i] = gn0 * t[0] + gn1 * t[1];
                    }
                }
            }
            let mu = kd.proj.basis.values(s);
            for a_ in 0..nf {
                for b_ in 0..nf {
                    mm[a_ * nf + b_] += wt * mu[a_] * mu[b_];
                }
                for j in 0..nv {
                    cm[a_ * nv + j] += wt * mu[a_] * tr[j];
                    fm[a_ * nv + j] += wt * mu[a_] * fl[j];
                }
            }
            for i in 0..nv {
                for j in 0..nv {
                    kk[i * nv + j] -= wt * (fl[j] * tr[i] + fl[i] * tr[j]);
                }
            }
        }
        // M^{-1} C
        let mut mic = vec![0.0; nf * nv];
        for a_ in 0..nf {
            for j in 0..nv {
                let mut s = 0.0;
                for b_ in 0..nf {
                    s += kd.proj.mass_inv[(a_, b_)] / jf * cm[b_ * nv + j];
                }
                mic[a_ * nv + j] = s;
            }
        }
        for i in 0..nv {
            for j in 0..nv {
                let mut p = 0.0;
                for a_ in 0..nf {
                    p += cm[a_ * nv + i] * mic[a_ * nv + j];
                }
                a[i * n + j] += kk[i * nv + j] + gamma * p;
            }
        }
        for a_ in 0..nf {
            for j in 0..nv {
                let v = fm[a_ * nv + j] - gamma * cm[a_ * nv + j];
                a[(off + a_) * n + j] += v;
                a[j * n + off + a_] += v;
            }
            for b_ in 0..nf {
                a[(off + a_) * n + off + b_] += gamma * mm[a_ * nf + b_];
            }
        }
    }
    (a, b)
}

#[derive(Clone, Copy)]
enum Slot {
    Local(usize),
    Global(usize),
    Dropped,
}

fn assemble_hdg(
    mesh: &Mesh,
    vol_space: Space,
    facet_space: Space,
    k: u32,
    kpen: f64,
    tau: TauField,
    alpha: f64,
    mode: TraceMode,
    forcing: Forcing,
    extra_order: usize,
) -> Result<Assembled> {
    if alpha <= 0.0 {
        return Err(Error::InvalidArgument("penalty parameter must be positive".into()));
    }
    let vol = VolumeEvaluator::for_space(&vol_space)?;
    let qv = simplex_quadrature(mesh.dim, 2 * k as usize + 2 + extra_order);
    let vol_ref = qv.points.iter().map(|p| vol.ref_tab(p)).collect();
    let kd = KernelData {
        vol: &vol,
        vol_ref,
        qv,
        qf: simplex_quadrature(mesh.dim - 1, 2 * k as usize + 2),
        proj: FacetProjector::new(mesh.dim - 1, facet_space.degree),
        mode,
        alpha,
        kpen,
    };
    let ng0 = vol_space.n_global;
    let n_local = vol_space.n_local;
    let n_global = ng0 + facet_space.n_global;
    let mut rhs = vec![0.0; n_local + n_global];
    let mut elements = Vec::with_capacity(mesh.n_elements());
    let mut tab = FieldTab::default();
    for e in 0..mesh.n_elements() {
        let vd = &vol_space.element_dofs[e];
        let signs: Vec<f64> = vd.iter().map(|x| x.1).collect();
        let (a, b) = element_kernel(mesh, e, &kd, &signs, tau.at(mesh.subdomain[e]), forcing, &mut tab);
        let n = b.len();
        let mut slots = Vec::with_capacity(n);
        for &(dof, _) in vd {
            slots.push(if let Some(l) = vol_space.local_index[dof] {
                Slot::Local(l)
            } else if let Some(g) = vol_space.global_index[dof] {
                Slot::Global(g)
            } else {
                Slot::Dropped
            });
        }
        for &(dof, _) in &facet_space.element_dofs[e] {
            slots.push(match facet_space.global_index[dof] {
                Some(g) => Slot::Global(ng0 + g),
                None => Slot::Dropped,
            });
        }
        let mut order = Vec::new();
        let mut local = Vec::new();
        let mut global = Vec::new();
        for (i, s) in slots.iter().enumerate() {
            if let Slot::Local(l) = s {
                order.push(i);
                local.push(*l);
            }
        }
        for (i, s) in slots.iter().enumerate() {
            if let Slot::Global(g) = s {
                order.push(i);
                global.push(*g);
            }
        }
        let m = order.len();
        let mut matrix = vec![0.0; m * m];
        for (p, &i) in order.iter().enumerate() {
            for (q, &j) in order.iter().enumerate() {
                matrix[p * m + q] = a[i * n + j];
            }
        }
        for (p, &i) in order.iter().enumerate() {
            let idx = if p < local.len() { local[p] } else { n_local + global[p - local.len()] };
            rhs[idx] += b[i];
        }
        elements.push(ElementBlock { local, global, matrix });
    }
    Ok(Assembled {
        problem: ProblemMatrix { n_local, n_global, global_blocks: vec![0, ng0, n_global], elements },
        rhs,
        volume_space: vol_space,
        facet_space,
        k,
    })
}

fn check_k(k: u32) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidArgument("polynomial degree k must be at least 1".into()));
    }
    Ok(())
}

fn check_2d(mesh: &Mesh) -> Result<()> {
    if mesh.dim != 2 {
        return Err(Error::InvalidArgument("this problem is only implemented in 2D".into()));
    }
    Ok(())
}

/// Scalar reaction-diffusion on W^k x W^{k-1}_{h,0} with f = 1.
pub fn assemble_scalar_rd(mesh: &Mesh, k: u32, tau: TauField, alpha: f64) -> Result<Assembled> {
    assemble_scalar_rd_with(mesh, k, tau, alpha, &|_| [1.0, 0.0])
}

pub fn assemble_scalar_rd_with(mesh: &Mesh, k: u32, tau: TauField, alpha: f64, f: Forcing) -> Result<Assembled> {
    assemble_scalar_rd_bc(mesh, k, tau, alpha, Bc::Dirichlet, f)
}

/// Variant with a chosen facet boundary condition (`Bc::None` keeps boundary facets).
pub fn assemble_scalar_rd_bc(mesh: &Mesh, k: u32, tau: TauField, alpha: f64, bc: Bc, f: Forcing) -> Result<Assembled> {
    check_k(k)?;
    let vs = build_space(mesh, SpaceKind::ScalarDg, k, Bc::None)?;
    let fs = build_space(mesh, SpaceKind::ScalarFacet, k - 1, bc)?;
    assemble_hdg(mesh, vs, fs, k, k as f64, tau, alpha, TraceMode::Scalar, f, 4)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VectorVariant {
    Full,
    Cst,
}

/// Divergence-conforming vector reaction-diffusion on V^k_{h,0} x V^{k-1}_{h,0} with f = (1,1).
pub fn assemble_vector_rd(mesh: &Mesh, k: u32, tau: TauField, alpha: f64, variant: VectorVariant) -> Result<Assembled> {
    assemble_vector_rd_bc(mesh, k, tau, alpha, variant, Bc::Dirichlet, &|_| [1.0, 1.0])
}

/// Vector problem with explicit boundary handling of the tangential facet space.
pub fn assemble_vector_rd_bc(
    mesh: &Mesh,
    k: u32,
    tau: TauField,
    alpha: f64,
    variant: VectorVariant,
    facet_bc: Bc,
    f: Forcing,
) -> Result<Assembled> {
    check_k(k)?;
    check_2d(mesh)?;
    let kind = match variant {
        VectorVariant::Full => SpaceKind::HdivFull,
        VectorVariant::Cst => SpaceKind::HdivCst,
    };
    let vs = build_space(mesh, kind, k, Bc::Dirichlet)?;
    let fs = build_space(mesh, SpaceKind::TangentialFacet, k - 1, facet_bc)?;
    assemble_hdg(mesh, vs, fs, k, k as f64, tau, alpha, TraceMode::Tangential, f, 0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum BiharmonicBc {
    #[serde(rename = "simply-supported")]
    SimplySupported,
    #[serde(rename = "clamped")]
    Clamped,
}

impl BiharmonicBc {
    /// Boundary condition of the tangential facet space.
    pub fn facet_bc(&self) -> Bc {
        match self {
            BiharmonicBc::SimplySupported => Bc::None,
            BiharmonicBc::Clamped => Bc::Dirichlet,
        }
    }
}

/// CIP-HDG biharmonic problem on X^{k+1}_{h,0} x V^{k-1} with f = 1.
pub fn assemble_cip_biharmonic(mesh: &Mesh, k: u32, tau: TauField, alpha: f64, bc: BiharmonicBc) -> Result<Assembled> {
    assemble_cip_biharmonic_with(mesh, k, tau, alpha, bc, &|_| [1.0, 0.0])
}

pub fn assemble_cip_biharmonic_with(
    mesh: &Mesh,
    k: u32,
    tau: TauField,
    alpha: f64,
    bc: BiharmonicBc,
    f: Forcing,
) -> Result<Assembled> {
    check_k(k)?;
    check_2d(mesh)?;
    let vs = build_space(mesh, SpaceKind::ScalarH1Kp1, k + 1, Bc::Dirichlet)?;
    let fs = build_space(mesh, SpaceKind::TangentialFacet, k - 1, bc.facet_bc())?;
    assemble_hdg(mesh, vs, fs, k, k as f64, tau, alpha, TraceMode::Tangential, f, 4)
}

/// Boundary constraints of the continuous P1 auxiliary space.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AuxBc {
    /// every component vanishes on the boundary
    Dirichlet,
    /// only the normal component vanishes (axis-aligned boundaries)
    NormalComponent,
}

/// Column numbering of the (vector) P1 auxiliary space: components stacked, vertices ascending.
#[derive(Clone, Debug, PartialEq)]
pub struct AuxP1 {
    pub ncomp: usize,
    /// per component, per vertex
    pub columns: Vec<Vec<Option<usize>>>,
    pub n: usize,
}

impl AuxP1 {
    pub fn col(&self, c: usize, v: usize) -> Option<usize> {
        self.columns[c][v]
    }

    /// Vertex and component of each column.
    pub fn column_owner(&self) -> Vec<(usize, usize)> {
        let mut out = vec![(0, 0); self.n];
        for (c, cols) in self.columns.iter().enumerate() {
            for (v, col) in cols.iter().enumerate() {
                if let Some(i) = col {
                    out[*i] = (c, v);
                }
            }
        }
        out
    }
}

fn aux_columns(mesh: &Mesh, ncomp: usize, bc: AuxBc) -> Result<AuxP1> {
    let nv = mesh.vertices.len();
    let mut fixed = vec![vec![false; nv]; ncomp];
    for (f, fa) in mesh.facets.iter().enumerate() {
        if !fa.is_boundary {
            continue;
        }
        for c in 0..ncomp {
            let hit = match bc {
                AuxBc::Dirichlet => true,
                AuxBc::NormalComponent => {
                    let nc = fa.normal[c].abs();
                    if nc > 1e-12 && (nc - 1.0).abs() > 1e-12 {
                        return Err(Error::InvalidArgument(format!("boundary facet {f} is not axis-aligned")));
                    }
                    nc > 0.5
                }
            };
            if hit {
                for &v in mesh.facet_vertices(f) {
                    fixed[c][v] = true;
                }
            }
        }
    }
    let mut n = 0;
    let columns = fixed
        .iter()
        .map(|fx| {
            fx.iter()
                .map(|&x| {
                    (!x).then(|| {
                        n += 1;
                        n - 1
                    })
                })
                .collect()
        })
        .collect();
    Ok(AuxP1 { ncomp, columns, n })
}

/// Continuous P1 stiffness plus tau-weighted mass. The vector version stacks the components.
pub fn assemble_aux_p1(mesh: &Mesh, tau: TauField, vector: bool, bc: AuxBc) -> Result<(SparseMatrix, AuxP1)> {
    if !vector && bc != AuxBc::Dirichlet {
        return Err(Error::InvalidArgument("scalar P1 space takes Dirichlet conditions".into()));
    }
    let space = build_space(mesh, SpaceKind::ScalarP1, 1, Bc::None)?;
    let ev = VolumeEvaluator::for_space(&space)?;
    let q = simplex_quadrature(mesh.dim, 2);
    let ncomp = if vector { mesh.dim } else { 1 };
    let aux = aux_columns(mesh, ncomp, bc)?;
    let nl = mesh.dim + 1;
    let vertex_of = |d: usize| match space.dofs[d].entity {
        Entity::Vertex(v) => v,
        _ => unreachable!("P1 DOFs sit on vertices"),
    };
    let lists: Vec<Vec<usize>> = (0..mesh.n_elements())
        .map(|e| {
            let mut v = Vec::new();
            for c in 0..ncomp {
                for &(d, _) in &space.element_dofs[e] {
                    if let Some(g) = aux.col(c, vertex_of(d)) {
                        v.push(g);
                    }
                }
            }
            v
        })
        .collect();
    let mut asm = CsrAssembler::new(aux.n, lists.iter().map(|v| v.as_slice()));
    let signs = vec![1.0; nl];
    for e in 0..mesh.n_elements() {
        let map = mesh.element_map(e);
        let t = tau.at(mesh.subdomain[e]);
        let mut ke = vec![0.0; nl * nl];
        for (xi, w) in q.points.iter().zip(&q.weights) {
            let tab = ev.eval(&map, xi, &signs);
            let wt = w * map.det.abs();
            for i in 0..nl {
                for j in 0..nl {
                    let g: f64 = (0..3).map(|l| tab.grad[i][0][l] * tab.grad[j][0][l]).sum();
                    ke[i * nl + j] += wt * (g + t * tab.val[i][0] * tab.val[j][0]);
                }
            }
        }
        // local index of each kept (component, basis function), in list order
        let mut kept = Vec::new();
        for c in 0..ncomp {
            for i in 0..nl {
                if aux.col(c, vertex_of(space.element_dofs[e][i].0)).is_some() {
                    kept.push((c, i));
                }
            }
        }
        let m = kept.len();
        let mut blk = vec![0.0; m * m];
        for (p, &(c, i)) in kept.iter().enumerate() {
            for (r, &(d, j)) in kept.iter().enumerate() {
                if c == d {
                    blk[p * m + r] = ke[i * nl + j];
                }
            }
        }
        asm.add_block(&lists[e], &blk);
    }
    Ok((asm.finish(), aux))
}

/// Facet-local weighted mass sum_F h_F int_F lambda mu on the free DOFs of a facet space.
pub fn facet_inner_product(mesh: &Mesh, facet_space: &Space) -> SparseMatrix {
    let proj = FacetProjector::new(mesh.dim - 1, facet_space.degree);
    let nf = proj.len();
    let mut trip = Vec::new();
    let done_base = facet_base_of(facet_space, mesh);
    for f in 0..mesh.n_facets() {
        let w = mesh.facet_h(f) * facet_jacobian(mesh, f);
        let base = done_base[f];
        for a in 0..nf {
            for b in 0..nf {
                if let (Some(i), Some(j)) = (facet_space.global_index[base + a], facet_space.global_index[base + b]) {
                    trip.push((i, j, w * proj.mass[(a, b)]));
                }
            }
        }
    }
    SparseMatrix::from_triplets(facet_space.n_global, facet_space.n_global, &trip)
}

fn facet_base_of(space: &Space, mesh: &Mesh) -> Vec<usize> {
    let mut base = vec![usize::MAX; mesh.n_facets()];
    for (i, d) in space.dofs.iter().enumerate() {
        if let crate::fespace::Entity::Facet(f) = d.entity {
            if base[f] == usize::MAX {
                base[f] = i;
            }
        }
    }
    base
}

/// First DOF of each facet in a space carrying facet DOFs.
pub fn facet_dof_base(space: &Space, mesh: &Mesh) -> Vec<usize> {
    facet_base_of(space, mesh)
}

/// (1 + tau h^2) int u.v over the free global DOFs of an H(div) space.
pub fn hdiv_inner_product(mesh: &Mesh, space: &Space, tau: TauField) -> Result<SparseMatrix> {
    let ev = VolumeEvaluator::for_space(space)?;
    let q = simplex_quadrature(2, 2 * space.degree as usize + 2);
    let h = mesh.h;
    let mut trip = Vec::new();
    for e in 0..mesh.n_elements() {
        let map = mesh.element_map(e);
        let signs: Vec<f64> = space.element_dofs[e].iter().map(|x| x.1).collect();
        let idx: Vec<Option<usize>> = space.element_dofs[e].iter().map(|x| space.global_index[x.0]).collect();
        let c = 1.0 + tau.at(mesh.subdomain[e]) * h * h;
        let n = ev.len();
        let mut m = vec![0.0; n * n];
        for (xi, w) in q.points.iter().zip(&q.weights) {
            let t = ev.eval(&map, xi, &signs);
            for i in 0..n {
                for j in 0..n {
                    m[i * n + j] += w * map.det.abs() * (t.val[i][0] * t.val[j][0] + t.val[i][1] * t.val[j][1]);
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                if let (Some(a), Some(b)) = (idx[i], idx[j]) {
                    trip.push((a, b, c * m[i * n + j]));
                }
            }
        }
    }
    Ok(SparseMatrix::from_triplets(space.n_global, space.n_global, &trip))
}

/// Inner product realizing (.,.)_{0,h} on the condensed global space of an assembled problem.
pub fn assemble_inner_product_matrices(mesh: &Mesh, asm: &Assembled, tau: TauField) -> Result<SparseMatrix> {
    let fm = facet_inner_product(mesh, &asm.facet_space);
    let vm = if asm.volume_space.n_global > 0 && matches!(asm.volume_space.kind, SpaceKind::HdivFull | SpaceKind::HdivCst) {
        Some(hdiv_inner_product(mesh, &asm.volume_space, tau)?)
    } else if asm.volume_space.n_global > 0 {
        return Err(Error::InvalidArgument("no skeleton inner product for this volume space".into()));
    } else {
        None
    };
    let n0 = asm.volume_space.n_global;
    let mut trip = Vec::new();
    if let Some(vm) = vm {
        for r in 0..vm.nrows {
            let (c, v) = vm.row(r);
            for (cc, vv) in c.iter().zip(v) {
                trip.push((r, *cc, *vv));
            }
        }
    }
    for r in 0..fm.nrows {
        let (c, v) = fm.row(r);
        for (cc, vv) in c.iter().zip(v) {
            trip.push((n0 + r, n0 + *cc, *vv));
        }
    }
    let n = n0 + fm.nrows;
    Ok(SparseMatrix::from_triplets(n, n, &trip))
}

/// L2 error of the volume unknown against an exact field. For curl-based spaces the
/// scalar potential is compared with the first component of `exact`.
pub fn l2_error(mesh: &Mesh, asm: &Assembled, full: &[f64], exact: &dyn Fn(&Point) -> [f64; 2]) -> Result<f64> {
    let vs = &asm.volume_space;
    let ev = VolumeEvaluator::for_space(vs)?;
    let q = simplex_quadrature(mesh.dim, 2 * vs.degree as usize + 6);
    let potential = vs.kind == SpaceKind::ScalarH1Kp1;
    let mut err = 0.0;
    for e in 0..mesh.n_elements() {
        let map = mesh.element_map(e);
        let signs: Vec<f64> = vs.element_dofs[e].iter().map(|x| x.1).collect();
        let idx = asm.volume_full_indices(e);
        let coef: Vec<f64> = idx.iter().map(|i| i.map_or(0.0, |i| full[i])).collect();
        for (xi, w) in q.points.iter().zip(&q.weights) {
            let x = map.to_phys(xi);
            let ex = exact(&x);
            let wt = w * map.det.abs();
            if potential {
                let v = ev.potential_values(xi, &signs);
                let uh: f64 = v.iter().zip(&coef).map(|(a, b)| a * b).sum();
                err += wt * (uh - ex[0]).powi(2);
            } else {
                let t = ev.eval(&map, xi, &signs);
                for c in 0..ev.ncomp {
                    let uh: f64 = t.val.iter().zip(&coef).map(|(a, b)| a[c] * b).sum();
                    err += wt * (uh - ex[c]).powi(2);
                }
            }
        }
    }
    Ok(err.sqrt())
}
