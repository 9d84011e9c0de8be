//! Structured simplicial meshes of the unit square and cube.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::geometry::{cross, dot3, norm3, sub, AffineMap, Point};

#[derive(Clone, Debug, PartialEq)]
pub struct Facet {
    /// vertex ids sorted ascending (first `dim` entries used)
    pub vertices: [usize; 3],
    pub owners: [usize; 2],
    /// local facet index inside each owner (local facet i is opposite local vertex i)
    pub owner_local: [usize; 2],
    pub n_owners: usize,
    /// unit normal, outward from owners[0]
    pub normal: Point,
    pub measure: f64,
    pub is_boundary: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    pub dim: usize,
    pub n: usize,
    pub vertices: Vec<Point>,
    /// first dim+1 entries used, positively oriented
    pub elements: Vec<[usize; 4]>,
    pub element_facets: Vec<[usize; 4]>,
    pub facets: Vec<Facet>,
    pub element_diameters: Vec<f64>,
    pub subdomain: Vec<u8>,
    pub h: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FacetGeometry {
    pub normal: Point,
    pub measure: f64,
    pub local_facets: [Option<usize>; 2],
    /// for each owner: owner-local vertex index of each canonical facet vertex
    pub vertex_maps: [Option<[usize; 3]>; 2],
}

pub fn build_structured_mesh(dim: usize, n: usize) -> Result<Mesh> {
    if n == 0 {
        return Err(Error::InvalidArgument("N must be positive".into()));
    }
    let (vertices, elements) = match dim {
        2 => grid2(n),
        3 => grid3(n),
        _ => return Err(Error::InvalidArgument(format!("dimension {dim} not supported"))),
    };
    let mut mesh = Mesh {
        dim,
        n,
        vertices,
        elements,
        element_facets: Vec::new(),
        facets: Vec::new(),
        element_diameters: Vec::new(),
        subdomain: Vec::new(),
        h: 0.0,
    };
    mesh.build_facets();
    mesh.element_diameters = (0..mesh.elements.len()).map(|e| mesh.diameter(e)).collect();
    mesh.h = mesh.element_diameters.iter().cloned().fold(0.0, f64::max);
    mesh.subdomain = tag_subdomains(&mesh);
    Ok(mesh)
}

fn grid2(n: usize) -> (Vec<Point>, Vec<[usize; 4]>) {
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            vertices.push([i as f64 / n as f64, j as f64 / n as f64, 0.0]);
        }
    }
    let vid = |i: usize, j: usize| i + j * (n + 1);
    let mut elements = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let v00 = vid(i, j);
            let v10 = vid(i + 1, j);
            let v11 = vid(i + 1, j + 1);
            let v01 = vid(i, j + 1);
            elements.push([v00, v10, v11, usize::MAX]);
            elements.push([v00, v11, v01, usize::MAX]);
        }
    }
    (vertices, elements)
}

fn grid3(n: usize) -> (Vec<Point>, Vec<[usize; 4]>) {
    let m = n + 1;
    let mut vertices = Vec::with_capacity(m * m * m);
    for l in 0..=n {
        for j in 0..=n {
            for i in 0..=n {
                vertices.push([i as f64 / n as f64, j as f64 / n as f64, l as f64 / n as f64]);
            }
        }
    }
    let vid = |c: [usize; 3]| c[0] + c[1] * m + c[2] * m * m;
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut elements = Vec::with_capacity(6 * n * n * n);
    for l in 0..n {
        for j in 0..n {
            for i in 0..n {
                for p in &perms {
                    let mut c = [i, j, l];
                    let mut tet = [vid(c), 0, 0, 0];
                    for (s, &ax) in p.iter().enumerate() {
                        c[ax] += 1;
                        tet[s + 1] = vid(c);
                    }
                    let pts: Vec<Point> = tet.iter().map(|&v| vertices[v]).collect();
                    if AffineMap::new(&pts).det < 0.0 {
                        tet.swap(2, 3);
                    }
                    elements.push(tet);
                }
            }
        }
    }
    (vertices, elements)
}

impl Mesh {
    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn n_facets(&self) -> usize {
        self.facets.len()
    }

    pub fn element_vertices(&self, e: usize) -> &[usize] {
        &self.elements[e][..=self.dim]
    }

    pub fn element_points(&self, e: usize) -> Vec<Point> {
        self.element_vertices(e).iter().map(|&v| self.vertices[v]).collect()
    }

    pub fn element_map(&self, e: usize) -> AffineMap {
        AffineMap::new(&self.element_points(e))
    }

    pub fn facet_vertices(&self, f: usize) -> &[usize] {
        &self.facets[f].vertices[..self.dim]
    }

    pub fn facet_points(&self, f: usize) -> Vec<Point> {
        self.facet_vertices(f).iter().map(|&v| self.vertices[v]).collect()
    }

    /// Facet length scale measure^(1/(dim-1)).
    pub fn facet_h(&self, f: usize) -> f64 {
        let m = self.facets[f].measure;
        if self.dim == 2 {
            m
        } else {
            m.sqrt()
        }
    }

    /// Physical point of canonical facet coordinates s (sorted global vertex order).
    pub fn facet_point(&self, f: usize, s: &[f64]) -> Point {
        let p = self.facet_points(f);
        let mut x = p[0];
        for i in 1..self.dim {
            let d = sub(&p[i], &p[0]);
            for c in 0..3 {
                x[c] += s[i - 1] * d[c];
            }
        }
        x
    }

    /// Unit tangent of a 2D facet, from the lower to the higher global vertex.
    pub fn facet_tangent(&self, f: usize) -> Point {
        let p = self.facet_points(f);
        let d = sub(&p[1], &p[0]);
        let l = norm3(&d);
        [d[0] / l, d[1] / l, 0.0]
    }

    pub fn boundary_vertices(&self) -> Vec<bool> {
        let mut b = vec![false; self.vertices.len()];
        for f in self.facets.iter().filter(|f| f.is_boundary) {
            for &v in &f.vertices[..self.dim] {
                b[v] = true;
            }
        }
        b
    }

    pub fn barycenter(&self, e: usize) -> Point {
        let pts = self.element_points(e);
        let mut c = [0.0; 3];
        for p in &pts {
            for i in 0..3 {
                c[i] += p[i] / pts.len() as f64;
            }
        }
        c
    }

    fn diameter(&self, e: usize) -> f64 {
        let p = self.element_points(e);
        let mut h: f64 = 0.0;
        for a in 0..p.len() {
            for b in a + 1..p.len() {
                h = h.max(norm3(&sub(&p[a], &p[b])));
            }
        }
        h
    }

    /// Radius of the inscribed sphere.
    pub fn inradius(&self, e: usize) -> f64 {
        let vol = self.element_map(e).volume();
        let surf: f64 = self.element_facets[e][..=self.dim].iter().map(|&f| self.facets[f].measure).sum();
        self.dim as f64 * vol / surf
    }

    fn build_facets(&mut self) {
        let d = self.dim;
        let mut lookup: HashMap<[usize; 3], usize> = HashMap::new();
        let mut facets: Vec<Facet> = Vec::new();
        let mut element_facets = vec![[usize::MAX; 4]; self.elements.len()];
        for (e, el) in self.elements.iter().enumerate() {
            for lf in 0..=d {
                let mut key = [usize::MAX; 3];
                let mut c = 0;
                for (lv, &v) in el[..=d].iter().enumerate() {
                    if lv != lf {
                        key[c] = v;
                        c += 1;
                    }
                }
                key[..d].sort_unstable();
                match lookup.get(&key) {
                    Some(&f) => {
                        let fa = &mut facets[f];
                        fa.owners[1] = e;
                        fa.owner_local[1] = lf;
                        fa.n_owners = 2;
                        fa.is_boundary = false;
                        element_facets[e][lf] = f;
                    }
                    None => {
                        let id = facets.len();
                        lookup.insert(key, id);
                        facets.push(Facet {
                            vertices: key,
                            owners: [e, usize::MAX],
                            owner_local: [lf, usize::MAX],
                            n_owners: 1,
                            normal: [0.0; 3],
                            measure: 0.0,
                            is_boundary: true,
                        });
                        element_facets[e][lf] = id;
                    }
                }
            }
        }
        for f in facets.iter_mut() {
            let p: Vec<Point> = f.vertices[..d].iter().map(|&v| self.vertices[v]).collect();
            let (mut nrm, meas) = if d == 2 {
                let t = sub(&p[1], &p[0]);
                let l = norm3(&t);
                ([t[1] / l, -t[0] / l, 0.0], l)
            } else {
                let c = cross(&sub(&p[1], &p[0]), &sub(&p[2], &p[0]));
                let l = norm3(&c);
                ([c[0] / l, c[1] / l, c[2] / l], 0.5 * l)
            };
            // outward from the first owner: away from its opposite vertex
            let el = &self.elements[f.owners[0]];
            let opp = self.vertices[el[f.owner_local[0]]];
            if dot3(&nrm, &sub(&p[0], &opp)) < 0.0 {
                nrm = [-nrm[0], -nrm[1], -nrm[2]];
            }
            f.normal = nrm;
            f.measure = meas;
        }
        self.facets = facets;
        self.element_facets = element_facets;
    }

    /// Outward unit normal of local facet lf of element e.
    pub fn outward_normal(&self, e: usize, lf: usize) -> Point {
        let f = &self.facets[self.element_facets[e][lf]];
        if f.owners[0] == e {
            f.normal
        } else {
            [-f.normal[0], -f.normal[1], -f.normal[2]]
        }
    }

    /// Plain-text listing of vertices, elements and facets.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "dim {} N {}", self.dim, self.n);
        let _ = writeln!(s, "vertices {}", self.vertices.len());
        for v in &self.vertices {
            let _ = writeln!(s, "{} {} {}", v[0], v[1], v[2]);
        }
        let _ = writeln!(s, "elements {}", self.elements.len());
        for (e, el) in self.elements.iter().enumerate() {
            let ids: Vec<String> = el[..=self.dim].iter().map(|v| v.to_string()).collect();
            let _ = writeln!(s, "{} tag {}", ids.join(" "), self.subdomain[e]);
        }
        let _ = writeln!(s, "facets {}", self.facets.len());
        for f in &self.facets {
            let ids: Vec<String> = f.vertices[..self.dim].iter().map(|v| v.to_string()).collect();
            let o2 = if f.n_owners == 2 { f.owners[1].to_string() } else { "-".into() };
            let _ = writeln!(s, "{} owners {} {}", ids.join(" "), f.owners[0], o2);
        }
        s
    }
}

/// Tag 1 inside [0.25,0.5]^d or [0.5,0.75]^d (by barycenter), else 2.
pub fn tag_subdomains(mesh: &Mesh) -> Vec<u8> {
    (0..mesh.n_elements())
        .map(|e| {
            let c = mesh.barycenter(e);
            let inside = |lo: f64, hi: f64| (0..mesh.dim).all(|i| c[i] >= lo && c[i] <= hi);
            if inside(0.25, 0.5) || inside(0.5, 0.75) {
                1
            } else {
                2
            }
        })
        .collect()
}

pub fn facet_geometry(mesh: &Mesh, facet: usize) -> FacetGeometry {
    let f = &mesh.facets[facet];
    let mut local_facets = [None, None];
    let mut vertex_maps = [None, None];
    for o in 0..f.n_owners {
        let e = f.owners[o];
        local_facets[o] = Some(f.owner_local[o]);
        let el = mesh.element_vertices(e);
        let mut map = [usize::MAX; 3];
        for (i, v) in f.vertices[..mesh.dim].iter().enumerate() {
            map[i] = el.iter().position(|w| w == v).expect("facet vertex not in owner");
        }
        vertex_maps[o] = Some(map);
    }
    FacetGeometry { normal: f.normal, measure: f.measure, local_facets, vertex_maps }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn interior(m: &Mesh) -> usize {
        m.facets.iter().filter(|f| !f.is_boundary).count()
    }

    #[test]
    fn counts() {
        let m = build_structured_mesh(2, 1).unwrap();
        assert_eq!((m.n_elements(), m.n_facets(), interior(&m)), (2, 5, 1));
        let m = build_structured_mesh(2, 2).unwrap();
        assert_eq!((m.n_elements(), m.n_facets(), interior(&m)), (8, 16, 8));
        let m = build_structured_mesh(3, 1).unwrap();
        assert_eq!((m.n_elements(), m.n_facets(), interior(&m)), (6, 18, 6));
        assert_eq!(m.facets.iter().filter(|f| f.is_boundary).count(), 12);
        assert!(build_structured_mesh(2, 0).is_err());
        assert!(build_structured_mesh(4, 1).is_err());
    }

    #[test]
    fn orientation_volume_and_normals() {
        for (dim, n) in [(2, 3), (3, 2)] {
            let m = build_structured_mesh(dim, n).unwrap();
            let mut vol = 0.0;
            for e in 0..m.n_elements() {
                let a = m.element_map(e);
                assert!(a.det > 0.0);
                vol += a.volume();
            }
            assert!((vol - 1.0).abs() < 1e-12);
            let bmeas: f64 = m.facets.iter().filter(|f| f.is_boundary).map(|f| f.measure).sum();
            assert!((bmeas - 2.0 * dim as f64).abs() < 1e-12);
            for (fi, f) in m.facets.iter().enumerate() {
                assert!((norm3(&f.normal) - 1.0).abs() < 1e-14);
                if f.n_owners == 2 {
                    assert!(f.owners[0] < f.owners[1]);
                    // normal points toward the second owner
                    let c1 = m.barycenter(f.owners[1]);
                    let c0 = m.barycenter(f.owners[0]);
                    assert!(dot3(&f.normal, &sub(&c1, &c0)) > 0.0);
                }
                let g = facet_geometry(&m, fi);
                assert_eq!(g.local_facets[0], Some(f.owner_local[0]));
            }
        }
    }

    #[test]
    fn boundary_normal_and_diagonal() {
        let m = build_structured_mesh(2, 1).unwrap();
        for f in &m.facets {
            let p: Vec<Point> = f.vertices[..2].iter().map(|&v| m.vertices[v]).collect();
            if f.is_boundary && p[0][0] == 0.0 && p[1][0] == 0.0 {
                assert!((f.normal[0] + 1.0).abs() < 1e-15 && f.normal[1].abs() < 1e-15);
            }
            if !f.is_boundary {
                assert!((f.measure - 2f64.sqrt()).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn subdomain_tags() {
        let m = build_structured_mesh(2, 8).unwrap();
        assert_eq!(m.subdomain.iter().filter(|&&t| t == 1).count(), 16);
        let m = build_structured_mesh(3, 4).unwrap();
        assert_eq!(m.subdomain.iter().filter(|&&t| t == 1).count(), 12);
    }

    #[test]
    fn shape_regularity_and_determinism() {
        for (dim, n) in [(2, 4), (3, 3)] {
            let m = build_structured_mesh(dim, n).unwrap();
            let ratio = (0..m.n_elements())
                .map(|e| m.element_diameters[e] / m.inradius(e))
                .fold(0.0, f64::max);
            assert!(ratio < 10.0);
            assert_eq!(m, build_structured_mesh(dim, n).unwrap());
        }
    }

    #[test]
    fn facet_points_agree_from_both_owners() {
        let m = build_structured_mesh(3, 2).unwrap();
        for (fi, f) in m.facets.iter().enumerate() {
            if f.n_owners < 2 {
                continue;
            }
            let g = facet_geometry(&m, fi);
            let s = [0.2, 0.3];
            let x = m.facet_point(fi, &s);
            for o in 0..2 {
                let pts = m.element_points(f.owners[o]);
                let map = g.vertex_maps[o].unwrap();
                let mut y = pts[map[0]];
                for i in 1..3 {
                    for c in 0..3 {
                        y[c] += s[i - 1] * (pts[map[i]][c] - pts[map[0]][c]);
                    }
                }
                for c in 0..3 {
                    assert!((x[c] - y[c]).abs() < 1e-13);
                }
            }
        }
    }
}
