use super::basis::ScalarBasis;
use super::hdiv::{edge_bubble, interior_bubbles, REF_EDGES};
use super::poly::Poly;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum H1Entity {
    Vertex(usize),
    Edge(usize),
    Interior,
}

/// Hierarchical H1 basis of degree p on the reference triangle:
/// vertex hats, edge bubbles lambda_a lambda_b L_j(lambda_b - lambda_a), interior bubbles.
#[derive(Clone, Debug)]
pub struct H1HierBasis {
    pub degree: u32,
    pub basis: ScalarBasis,
    pub entity: Vec<H1Entity>,
    pub flip_sign: Vec<f64>,
}

pub fn build_h1_hierarchical(p: u32) -> H1HierBasis {
    assert!(p >= 1);
    let mut polys = Vec::new();
    let mut entity = Vec::new();
    let mut flip_sign = Vec::new();
    for v in 0..3 {
        polys.push(Poly::barycentric(2, v));
        entity.push(H1Entity::Vertex(v));
        flip_sign.push(1.0);
    }
    for (e, &[a, b]) in REF_EDGES.iter().enumerate() {
        for j in 0..p.saturating_sub(1) {
            polys.push(edge_bubble(a, b, j));
            entity.push(H1Entity::Edge(e));
            flip_sign.push(if j % 2 == 0 { 1.0 } else { -1.0 });
        }
    }
    for bub in interior_bubbles(p) {
        polys.push(bub);
        entity.push(H1Entity::Interior);
        flip_sign.push(1.0);
    }
    let basis = ScalarBasis::from_polys(2, &polys);
    H1HierBasis { degree: p, basis, entity, flip_sign }
}

impl H1HierBasis {
    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polybasis::poly::dim_p;

    #[test]
    fn counts_and_independence() {
        for p in 1..=6 {
            let b = build_h1_hierarchical(p);
            assert_eq!(b.len(), dim_p(2, p as i64));
            let g = b.basis.gram();
            assert!(g.symmetric_eigen().eigenvalues.min() > 0.0);
        }
    }

    #[test]
    fn edge_functions_vanish_on_other_edges() {
        let b = build_h1_hierarchical(5);
        let pts = [[0.0, 0.3], [0.4, 0.0], [0.7, 0.3]];
        // pts[0] on edge 1, pts[1] on edge 2, pts[2] on edge 0
        let on = [1usize, 2, 0];
        for (x, e) in pts.iter().zip(on) {
            let v = b.basis.values(x);
            for i in 0..b.len() {
                match b.entity[i] {
                    H1Entity::Edge(f) if f != e => assert!(v[i].abs() < 1e-14),
                    H1Entity::Interior => assert!(v[i].abs() < 1e-14),
                    _ => {}
                }
            }
        }
    }
}
