//! DOF maps, boundary restriction and local/global classification.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::polybasis::basis::poly_dim;
use crate::polybasis::hdiv::{HdivFamily, REF_EDGES};
use crate::polybasis::{build_h1_hierarchical, build_hdiv_basis, H1Entity};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpaceKind {
    ScalarDg,
    ScalarFacet,
    ScalarP1,
    ScalarH1Kp1,
    HdivFull,
    HdivCst,
    TangentialFacet,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bc {
    None,
    Dirichlet,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DofClass {
    Local,
    Global,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Entity {
    Vertex(usize),
    Facet(usize),
    Element(usize),
}

#[derive(Clone, Debug)]
pub struct DofInfo {
    pub entity: Entity,
    pub class: DofClass,
    pub on_boundary: bool,
}

/// Surjective renumbering from unconstrained to constrained DOFs.
#[derive(Clone, Debug, PartialEq)]
pub struct DofRestriction {
    pub map: Vec<Option<usize>>,
    pub n_constrained: usize,
}

#[derive(Clone, Debug)]
pub struct Space {
    pub kind: SpaceKind,
    pub degree: u32,
    pub bc: Bc,
    pub dim: usize,
    /// unconstrained DOFs
    pub dofs: Vec<DofInfo>,
    /// per element, in element basis order: (unconstrained DOF, orientation sign)
    pub element_dofs: Vec<Vec<(usize, f64)>>,
    /// per facet: DOFs whose entity touches the facet
    pub facet_attached: Vec<Vec<usize>>,
    pub restriction: DofRestriction,
    /// per unconstrained DOF: index among local DOFs
    pub local_index: Vec<Option<usize>>,
    /// per unconstrained DOF: index among unconstrained-free global DOFs
    pub global_index: Vec<Option<usize>>,
    pub n_local: usize,
    pub n_global: usize,
}

impl Space {
    pub fn n_dofs(&self) -> usize {
        self.dofs.len()
    }

    /// Number of DOFs after boundary restriction.
    pub fn n_free(&self) -> usize {
        self.restriction.n_constrained
    }
}

/// DOFs per facet for facet spaces and per edge for H(div) facet families.
pub fn dofs_per_facet(kind: SpaceKind, dim: usize, degree: u32) -> usize {
    match kind {
        SpaceKind::ScalarFacet => poly_dim(dim - 1, degree as i64),
        SpaceKind::TangentialFacet => degree as usize + 1,
        SpaceKind::HdivFull | SpaceKind::HdivCst => degree as usize + 1,
        SpaceKind::ScalarH1Kp1 => degree as usize - 1,
        _ => 0,
    }
}

pub fn build_space(mesh: &Mesh, kind: SpaceKind, degree: u32, bc: Bc) -> Result<Space> {
    let d = mesh.dim;
    let two_d_only = matches!(
        kind,
        SpaceKind::ScalarH1Kp1 | SpaceKind::HdivFull | SpaceKind::HdivCst | SpaceKind::TangentialFacet
    );
    if two_d_only && d != 2 {
        return Err(Error::InvalidArgument(format!("{kind:?} is only available in 2D")));
    }
    match kind {
        SpaceKind::HdivFull | SpaceKind::HdivCst if degree < 1 => {
            return Err(Error::InvalidArgument("H(div) spaces need degree >= 1".into()))
        }
        SpaceKind::ScalarP1 if degree != 1 => {
            return Err(Error::InvalidArgument("continuous P1 space has degree 1".into()))
        }
        SpaceKind::ScalarH1Kp1 if degree < 1 => {
            return Err(Error::InvalidArgument("H1 space needs degree >= 1".into()))
        }
        _ => {}
    }
    let nel = mesh.n_elements();
    let nf = mesh.n_facets();
    let bverts = mesh.boundary_vertices();
    let mut dofs: Vec<DofInfo> = Vec::new();
    let mut element_dofs: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nel];
    let mut facet_attached: Vec<Vec<usize>> = vec![Vec::new(); nf];

    // entity DOF ranges
    let mut vertex_base = Vec::new();
    let mut facet_base = Vec::new();
    let mut n_per_vertex = 0;
    let mut n_per_facet = 0;
    match kind {
        SpaceKind::ScalarP1 => n_per_vertex = 1,
        SpaceKind::ScalarH1Kp1 => {
            n_per_vertex = 1;
            n_per_facet = dofs_per_facet(kind, d, degree);
        }
        SpaceKind::ScalarFacet | SpaceKind::TangentialFacet | SpaceKind::HdivFull | SpaceKind::HdivCst => {
            n_per_facet = dofs_per_facet(kind, d, degree)
        }
        SpaceKind::ScalarDg => {}
    }
    if n_per_vertex > 0 {
        for (v, &b) in bverts.iter().enumerate() {
            vertex_base.push(dofs.len());
            for _ in 0..n_per_vertex {
                dofs.push(DofInfo { entity: Entity::Vertex(v), class: DofClass::Global, on_boundary: b });
            }
        }
    }
    if n_per_facet > 0 {
        for (f, fa) in mesh.facets.iter().enumerate() {
            facet_base.push(dofs.len());
            for _ in 0..n_per_facet {
                dofs.push(DofInfo { entity: Entity::Facet(f), class: DofClass::Global, on_boundary: fa.is_boundary });
            }
        }
    }

    match kind {
        SpaceKind::ScalarDg => {
            let n = poly_dim(d, degree as i64);
            for (e, ed) in element_dofs.iter_mut().enumerate() {
                for _ in 0..n {
                    ed.push((dofs.len(), 1.0));
                    dofs.push(DofInfo { entity: Entity::Element(e), class: DofClass::Local, on_boundary: false });
                }
            }
        }
        SpaceKind::ScalarFacet | SpaceKind::TangentialFacet => {
            for (e, ed) in element_dofs.iter_mut().enumerate() {
                for lf in 0..=d {
                    let f = mesh.element_facets[e][lf];
                    for i in 0..n_per_facet {
                        ed.push((facet_base[f] + i, 1.0));
                    }
                }
            }
        }
        SpaceKind::ScalarP1 => {
            for (e, ed) in element_dofs.iter_mut().enumerate() {
                for &v in mesh.element_vertices(e) {
                    ed.push((vertex_base[v], 1.0));
                }
            }
        }
        SpaceKind::ScalarH1Kp1 => {
            let b = build_h1_hierarchical(degree);
            let n_int = b.entity.iter().filter(|x| **x == H1Entity::Interior).count();
            for e in 0..nel {
                let verts = mesh.element_vertices(e).to_vec();
                let mut edge_count = [0usize; 3];
                let base = dofs.len();
                for i in 0..b.len() {
                    let entry = match b.entity[i] {
                        H1Entity::Vertex(v) => (vertex_base[verts[v]], 1.0),
                        H1Entity::Edge(le) => {
                            let f = mesh.element_facets[e][le];
                            let [a, c] = REF_EDGES[le];
                            let sign = if verts[a] < verts[c] { 1.0 } else { b.flip_sign[i] };
                            let pos = edge_count[le];
                            edge_count[le] += 1;
                            (facet_base[f] + pos, sign)
                        }
                        H1Entity::Interior => {
                            let j = element_dofs[e].iter().filter(|(x, _)| *x >= base).count();
                            (base + j, 1.0)
                        }
                    };
                    element_dofs[e].push(entry);
                }
                for _ in 0..n_int {
                    dofs.push(DofInfo { entity: Entity::Element(e), class: DofClass::Local, on_boundary: false });
                }
            }
        }
        SpaceKind::HdivFull | SpaceKind::HdivCst => {
            let b = build_hdiv_basis(degree)?;
            let keep = |fam: HdivFamily| kind == SpaceKind::HdivFull || fam != HdivFamily::InteriorDiv;
            let n_int = (0..b.len()).filter(|&i| b.family[i].is_interior() && keep(b.family[i])).count();
            for e in 0..nel {
                let verts = mesh.element_vertices(e).to_vec();
                let mut edge_count = [0usize; 3];
                let base = dofs.len();
                let mut n_bub = 0;
                for i in 0..b.len() {
                    if !keep(b.family[i]) {
                        continue;
                    }
                    let entry = match b.edge[i] {
                        Some(le) => {
                            let f = mesh.element_facets[e][le];
                            let [a, c] = REF_EDGES[le];
                            let sign = if verts[a] < verts[c] { 1.0 } else { b.flip_sign[i] };
                            let pos = edge_count[le];
                            edge_count[le] += 1;
                            (facet_base[f] + pos, sign)
                        }
                        None => {
                            n_bub += 1;
                            (base + n_bub - 1, 1.0)
                        }
                    };
                    element_dofs[e].push(entry);
                }
                for _ in 0..n_int {
                    dofs.push(DofInfo { entity: Entity::Element(e), class: DofClass::Local, on_boundary: false });
                }
            }
        }
    }

    for (f, fa) in mesh.facets.iter().enumerate() {
        if n_per_vertex > 0 {
            for &v in &fa.vertices[..d] {
                for i in 0..n_per_vertex {
                    facet_attached[f].push(vertex_base[v] + i);
                }
            }
        }
        for i in 0..n_per_facet {
            facet_attached[f].push(facet_base[f] + i);
        }
    }

    let mut space = Space {
        kind,
        degree,
        bc,
        dim: d,
        dofs,
        element_dofs,
        facet_attached,
        restriction: DofRestriction { map: Vec::new(), n_constrained: 0 },
        local_index: Vec::new(),
        global_index: Vec::new(),
        n_local: 0,
        n_global: 0,
    };
    space.restriction = restrict_dirichlet(&space, mesh);
    let mut nl = 0;
    let mut ng = 0;
    for (i, dof) in space.dofs.iter().enumerate() {
        let free = space.restriction.map[i].is_some();
        match dof.class {
            DofClass::Local => {
                space.local_index.push(Some(nl));
                space.global_index.push(None);
                nl += 1;
            }
            DofClass::Global => {
                space.local_index.push(None);
                if free {
                    space.global_index.push(Some(ng));
                    ng += 1;
                } else {
                    space.global_index.push(None);
                }
            }
        }
    }
    space.n_local = nl;
    space.n_global = ng;
    Ok(space)
}

/// Remove boundary DOFs when the space carries a Dirichlet flag.
pub fn restrict_dirichlet(space: &Space, _mesh: &Mesh) -> DofRestriction {
    let mut map = Vec::with_capacity(space.dofs.len());
    let mut n = 0;
    for d in &space.dofs {
        if space.bc == Bc::Dirichlet && d.on_boundary {
            map.push(None);
        } else {
            map.push(Some(n));
            n += 1;
        }
    }
    DofRestriction { map, n_constrained: n }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_structured_mesh;

    #[test]
    fn spec_counts() {
        let m = build_structured_mesh(2, 2).unwrap();
        let s = build_space(&m, SpaceKind::ScalarFacet, 0, Bc::Dirichlet).unwrap();
        assert_eq!((s.n_global, s.n_local), (8, 0));
        let m1 = build_structured_mesh(2, 1).unwrap();
        let s = build_space(&m1, SpaceKind::ScalarDg, 1, Bc::None).unwrap();
        assert_eq!((s.n_local, s.n_global), (6, 0));
        let s = build_space(&m1, SpaceKind::HdivFull, 1, Bc::Dirichlet).unwrap();
        assert_eq!((s.n_global, s.n_local), (2, 0));
        assert!(build_space(&m1, SpaceKind::HdivFull, 0, Bc::None).is_err());
        let m3 = build_structured_mesh(3, 1).unwrap();
        assert!(build_space(&m3, SpaceKind::TangentialFacet, 0, Bc::None).is_err());
    }

    #[test]
    fn restricted_dimensions() {
        for n in 1..5 {
            let m = build_structured_mesh(2, n).unwrap();
            let p1 = build_space(&m, SpaceKind::ScalarP1, 1, Bc::Dirichlet).unwrap();
            assert_eq!(p1.n_free(), (n - 1) * (n - 1));
            let interior = m.facets.iter().filter(|f| !f.is_boundary).count();
            assert_eq!(interior, 3 * n * n - 2 * n);
            for k in 1..4 {
                let f = build_space(&m, SpaceKind::ScalarFacet, k - 1, Bc::Dirichlet).unwrap();
                assert_eq!(f.n_free(), k as usize * interior);
                let t = build_space(&m, SpaceKind::TangentialFacet, k - 1, Bc::None).unwrap();
                assert_eq!(t.n_free(), k as usize * m.n_facets());
            }
        }
    }

    #[test]
    fn counts_consistent() {
        let m = build_structured_mesh(2, 3).unwrap();
        for k in 1..4u32 {
            let full = build_space(&m, SpaceKind::HdivFull, k, Bc::None).unwrap();
            let per_el = ((k + 1) * (k + 2)) as usize;
            assert!(full.element_dofs.iter().all(|e| e.len() == per_el));
            let bub = (k * (k - 1) / 2 + (k - 1) * (k + 2) / 2) as usize;
            assert_eq!(full.n_local, bub * m.n_elements());
            assert_eq!(full.n_global, (k as usize + 1) * m.n_facets());
            let x = build_space(&m, SpaceKind::ScalarH1Kp1, k + 1, Bc::Dirichlet).unwrap();
            let nint = (k * (k - 1) / 2) as usize;
            assert_eq!(x.n_local, nint * m.n_elements());
            let interior_edges = m.facets.iter().filter(|f| !f.is_boundary).count();
            assert_eq!(x.n_global, 4 + k as usize * interior_edges);
            // every DOF index referenced, no gaps
            let mut seen = vec![false; x.n_dofs()];
            for ed in &x.element_dofs {
                for (d, _) in ed {
                    seen[*d] = true;
                }
            }
            assert!(seen.iter().all(|s| *s));
        }
    }
}
