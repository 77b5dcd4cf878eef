use super::mesh::{FormDegree, StructuredMesh};
use crate::sparse::CsrMatrix;
use alloc::vec::Vec;

/// 1D mass of the two linear hats on the unit interval, by two-point Gauss
/// quadrature (exact for quadratics).
fn reference_mass() -> [[f64; 2]; 2] {
    let s = 0.5 / libm::sqrt(3.0);
    let pts = [0.5 - s, 0.5 + s];
    let mut m = [[0.0; 2]; 2];
    for t in pts {
        let phi = [1.0 - t, t];
        for a in 0..2 {
            for b in 0..2 {
                m[a][b] += 0.5 * phi[a] * phi[b];
            }
        }
    }
    m
}

/// Galerkin mass matrix of the degree-`d` space on the active entities.
pub fn assemble_mass(mesh: &StructuredMesh, d: FormDegree) -> CsrMatrix {
    let h = mesh.h;
    let m1 = reference_mass();
    let mut trip: Vec<(usize, usize, f64)> = Vec::new();
    let local = |lat: usize| mesh.local_index(d, lat).expect("cell entities are active");
    mesh.for_each_active_cell(|i, j, k| {
        let e = mesh.cell_entities(i, j, k);
        match d {
            FormDegree::Node => {
                let h3 = h * h * h;
                for a in 0..8 {
                    for b in 0..8 {
                        let v = h3
                            * m1[a & 1][b & 1]
                            * m1[(a >> 1) & 1][(b >> 1) & 1]
                            * m1[(a >> 2) & 1][(b >> 2) & 1];
                        trip.push((local(e.nodes[a]), local(e.nodes[b]), v));
                    }
                }
            }
            FormDegree::Edge => {
                for dir in e.edges {
                    for s in 0..4 {
                        for t in 0..4 {
                            let v = h * m1[s & 1][t & 1] * m1[s >> 1][t >> 1];
                            trip.push((local(dir[s]), local(dir[t]), v));
                        }
                    }
                }
            }
            FormDegree::Face => {
                for dir in e.faces {
                    for s in 0..2 {
                        for t in 0..2 {
                            trip.push((local(dir[s]), local(dir[t]), m1[s][t] / h));
                        }
                    }
                }
            }
            FormDegree::Cell => {
                let c = local(mesh.cell(i, j, k));
                trip.push((c, c, 1.0 / (h * h * h)));
            }
        }
    });
    let n = mesh.count(d);
    CsrMatrix::from_triplets(&trip, n, n).expect("local indices in range")
}
