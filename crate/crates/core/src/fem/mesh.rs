//! Uniform cubic meshes of `[0, π]³`, optionally perforated by a tunnel or
//! an interior void, with lattice numbering of nodes, edges, faces and cells.

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Cube,
    /// The cube minus `[π/4, 3π/4]² × [0, π]`.
    CubeTunnel,
    /// The cube minus `[π/4, 3π/4]³`.
    CubeVoid,
}

impl Shape {
    pub fn name(self) -> &'static str {
        match self {
            Shape::Cube => "cube",
            Shape::CubeTunnel => "tunnel",
            Shape::CubeVoid => "void",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "cube" => Some(Shape::Cube),
            "tunnel" => Some(Shape::CubeTunnel),
            "void" => Some(Shape::CubeVoid),
            _ => None,
        }
    }

    /// Betti numbers `(b₁, b₂)` of the domain.
    pub fn betti(self) -> (usize, usize) {
        match self {
            Shape::Cube => (0, 0),
            Shape::CubeTunnel => (1, 0),
            Shape::CubeVoid => (0, 1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainSpec {
    pub shape: Shape,
    pub side: f64,
    pub cells_per_axis: usize,
}

impl DomainSpec {
    pub fn new(shape: Shape, cells_per_axis: usize) -> Self {
        Self {
            shape,
            side: core::f64::consts::PI,
            cells_per_axis,
        }
    }
}

/// Form degree of a lattice entity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum FormDegree {
    Node = 0,
    Edge = 1,
    Face = 2,
    Cell = 3,
}

impl FormDegree {
    pub fn from_index(k: usize) -> Option<Self> {
        match k {
            0 => Some(FormDegree::Node),
            1 => Some(FormDegree::Edge),
            2 => Some(FormDegree::Face),
            3 => Some(FormDegree::Cell),
            _ => None,
        }
    }
}

/// Lattice numbering, x fastest. Edges and faces are grouped by direction
/// (x, then y, then z); a face's direction is its normal.
#[derive(Debug, Clone)]
pub struct StructuredMesh {
    pub shape: Shape,
    pub n: usize,
    pub h: f64,
    /// Mask over the `n³` lattice cells.
    pub active_cells: Vec<bool>,
    /// Lattice indices of the active entities, per degree, ascending.
    active: [Vec<usize>; 4],
    /// Lattice index → active index.
    local: [Vec<Option<usize>>; 4],
}

impl StructuredMesh {
    pub fn lattice_len(&self, d: FormDegree) -> usize {
        lattice_len(self.n, d)
    }

    pub fn count(&self, d: FormDegree) -> usize {
        self.active[d as usize].len()
    }

    /// Lattice indices of the active entities of degree `d`.
    pub fn active(&self, d: FormDegree) -> &[usize] {
        &self.active[d as usize]
    }

    pub fn local_index(&self, d: FormDegree, lattice: usize) -> Option<usize> {
        self.local[d as usize][lattice]
    }

    pub fn inactive_cells(&self) -> usize {
        self.active_cells.iter().filter(|a| !**a).count()
    }

    pub fn node(&self, i: usize, j: usize, k: usize) -> usize {
        let p = self.n + 1;
        i + p * (j + p * k)
    }

    /// Edge along `axis` starting at lattice point `(i, j, k)`.
    pub fn edge(&self, axis: usize, i: usize, j: usize, k: usize) -> usize {
        let (n, p) = (self.n, self.n + 1);
        let block = n * p * p;
        match axis {
            0 => i + n * (j + p * k),
            1 => block + i + p * (j + n * k),
            _ => 2 * block + i + p * (j + p * k),
        }
    }

    /// Face with normal `axis` whose lowest corner is `(i, j, k)`.
    pub fn face(&self, axis: usize, i: usize, j: usize, k: usize) -> usize {
        let (n, p) = (self.n, self.n + 1);
        let block = p * n * n;
        match axis {
            0 => i + p * (j + n * k),
            1 => block + i + n * (j + p * k),
            _ => 2 * block + i + n * (j + n * k),
        }
    }

    pub fn cell(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.n * (j + self.n * k)
    }

    /// Lattice indices of the 8 nodes, 12 edges and 6 faces of a cell, in
    /// local tensor order.
    pub fn cell_entities(&self, i: usize, j: usize, k: usize) -> CellEntities {
        let mut nodes = [0; 8];
        for (t, node) in nodes.iter_mut().enumerate() {
            *node = self.node(i + (t & 1), j + ((t >> 1) & 1), k + ((t >> 2) & 1));
        }
        let mut edges = [[0; 4]; 3];
        for (a, slot) in edges.iter_mut().enumerate() {
            for (t, e) in slot.iter_mut().enumerate() {
                let (s0, s1) = (t & 1, (t >> 1) & 1);
                // (s0, s1) are offsets along the two axes transverse to `a`, in cyclic order
                *e = match a {
                    0 => self.edge(0, i, j + s0, k + s1),
                    1 => self.edge(1, i + s1, j, k + s0),
                    _ => self.edge(2, i + s0, j + s1, k),
                };
            }
        }
        let mut faces = [[0; 2]; 3];
        for (a, slot) in faces.iter_mut().enumerate() {
            for (t, f) in slot.iter_mut().enumerate() {
                *f = match a {
                    0 => self.face(0, i + t, j, k),
                    1 => self.face(1, i, j + t, k),
                    _ => self.face(2, i, j, k + t),
                };
            }
        }
        CellEntities {
            nodes,
            edges,
            faces,
        }
    }

    /// Active faces that touch exactly one active cell.
    pub fn boundary_faces(&self) -> Vec<bool> {
        let mut touches = vec![0u8; self.lattice_len(FormDegree::Face)];
        self.for_each_active_cell(|i, j, k| {
            for slot in self.cell_entities(i, j, k).faces {
                for f in slot {
                    touches[f] += 1;
                }
            }
        });
        touches.iter().map(|&t| t == 1).collect()
    }

    /// Lattice masks of the boundary entities of every degree: the closure
    /// of the boundary faces.
    pub fn boundary_masks(&self) -> [Vec<bool>; 4] {
        let bf = self.boundary_faces();
        let mut nodes = vec![false; self.lattice_len(FormDegree::Node)];
        let mut edges = vec![false; self.lattice_len(FormDegree::Edge)];
        let inc = incidence_lattice(self.n);
        for (f, _) in bf.iter().enumerate().filter(|(_, b)| **b) {
            let (cols, _) = inc.curl.row(f);
            for &e in cols {
                edges[e] = true;
                let (ends, _) = inc.grad.row(e);
                for &v in ends {
                    nodes[v] = true;
                }
            }
        }
        let cells = vec![false; self.lattice_len(FormDegree::Cell)];
        [nodes, edges, bf, cells]
    }

    pub(crate) fn for_each_active_cell(&self, mut f: impl FnMut(usize, usize, usize)) {
        let n = self.n;
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    if self.active_cells[self.cell(i, j, k)] {
                        f(i, j, k);
                    }
                }
            }
        }
    }
}

/// Entities of one cell. `edges[a][t]`: edge along axis `a`, transverse
/// offsets `(t & 1, t >> 1)` along axes `a+1`, `a+2` (cyclic).
/// `faces[a][t]`: face with normal `a` at offset `t` along `a`.
#[derive(Debug, Clone, Copy)]
pub struct CellEntities {
    pub nodes: [usize; 8],
    pub edges: [[usize; 4]; 3],
    pub faces: [[usize; 2]; 3],
}

pub(crate) fn lattice_len(n: usize, d: FormDegree) -> usize {
    let p = n + 1;
    match d {
        FormDegree::Node => p * p * p,
        FormDegree::Edge => 3 * n * p * p,
        FormDegree::Face => 3 * n * n * p,
        FormDegree::Cell => n * n * n,
    }
}

pub fn build_mesh(spec: &DomainSpec) -> Result<StructuredMesh> {
    let n = spec.cells_per_axis;
    if n == 0 {
        return Err(Error::Config("mesh needs at least one cell per axis".into()));
    }
    if spec.shape != Shape::Cube && !n.is_multiple_of(4) {
        return Err(Error::Config(format!(
            "{} domain needs cells per axis divisible by 4, got {n}",
            spec.shape.name()
        )));
    }
    if !(spec.side > 0.0) {
        return Err(Error::Config("domain side must be positive".into()));
    }
    let inside = |i: usize| i >= n / 4 && i < 3 * n / 4;
    let mut active_cells = vec![true; n * n * n];
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                let hole = match spec.shape {
                    Shape::Cube => false,
                    Shape::CubeTunnel => inside(i) && inside(j),
                    Shape::CubeVoid => inside(i) && inside(j) && inside(k),
                };
                active_cells[i + n * (j + n * k)] = !hole;
            }
        }
    }
    let mut mesh = StructuredMesh {
        shape: spec.shape,
        n,
        h: spec.side / n as f64,
        active_cells,
        active: Default::default(),
        local: Default::default(),
    };
    let mut marks: [Vec<bool>; 4] = [
        vec![false; lattice_len(n, FormDegree::Node)],
        vec![false; lattice_len(n, FormDegree::Edge)],
        vec![false; lattice_len(n, FormDegree::Face)],
        vec![false; lattice_len(n, FormDegree::Cell)],
    ];
    mesh.for_each_active_cell(|i, j, k| {
        let e = mesh.cell_entities(i, j, k);
        e.nodes.iter().for_each(|&v| marks[0][v] = true);
        e.edges.iter().flatten().for_each(|&v| marks[1][v] = true);
        e.faces.iter().flatten().for_each(|&v| marks[2][v] = true);
        marks[3][mesh.cell(i, j, k)] = true;
    });
    for d in 0..4 {
        let mut local = vec![None; marks[d].len()];
        let mut active = Vec::new();
        for (idx, &m) in marks[d].iter().enumerate() {
            if m {
                local[idx] = Some(active.len());
                active.push(idx);
            }
        }
        mesh.active[d] = active;
        mesh.local[d] = local;
    }
    Ok(mesh)
}

/// Signed incidence matrices between active entities.
#[derive(Debug, Clone)]
pub struct IncidenceMatrices {
    /// edges × nodes
    pub grad: CsrMatrix,
    /// faces × edges
    pub curl: CsrMatrix,
    /// cells × faces
    pub div: CsrMatrix,
}

impl IncidenceMatrices {
    /// Incidence from degree `k` to `k + 1`.
    pub fn d(&self, k: FormDegree) -> Option<&CsrMatrix> {
        match k {
            FormDegree::Node => Some(&self.grad),
            FormDegree::Edge => Some(&self.curl),
            FormDegree::Face => Some(&self.div),
            FormDegree::Cell => None,
        }
    }
}

/// Incidence matrices restricted to the active entities of `mesh`.
pub fn incidence(mesh: &StructuredMesh) -> IncidenceMatrices {
    let full = incidence_lattice(mesh.n);
    let restrict = |m: &CsrMatrix, rows: FormDegree, cols: FormDegree| {
        m.submatrix(mesh.active(rows), mesh.active(cols))
            .expect("active entity lists are in range")
    };
    IncidenceMatrices {
        grad: restrict(&full.grad, FormDegree::Edge, FormDegree::Node),
        curl: restrict(&full.curl, FormDegree::Face, FormDegree::Edge),
        div: restrict(&full.div, FormDegree::Cell, FormDegree::Face),
    }
}

/// Incidence matrices of the full `n³` lattice.
pub(crate) fn incidence_lattice(n: usize) -> IncidenceMatrices {
    let probe = StructuredMesh {
        shape: Shape::Cube,
        n,
        h: 1.0,
        active_cells: Vec::new(),
        active: Default::default(),
        local: Default::default(),
    };
    let p = n + 1;
    let mut grad = Vec::new();
    for k in 0..p {
        for j in 0..p {
            for i in 0..p {
                let v = probe.node(i, j, k);
                if i < n {
                    grad.push((probe.edge(0, i, j, k), v, -1.0));
                    grad.push((probe.edge(0, i, j, k), probe.node(i + 1, j, k), 1.0));
                }
                if j < n {
                    grad.push((probe.edge(1, i, j, k), v, -1.0));
                    grad.push((probe.edge(1, i, j, k), probe.node(i, j + 1, k), 1.0));
                }
                if k < n {
                    grad.push((probe.edge(2, i, j, k), v, -1.0));
                    grad.push((probe.edge(2, i, j, k), probe.node(i, j, k + 1), 1.0));
                }
            }
        }
    }
    let mut curl = Vec::new();
    for k in 0..p {
        for j in 0..p {
            for i in 0..p {
                if j < n && k < n {
                    let f = probe.face(0, i, j, k);
                    curl.push((f, probe.edge(1, i, j, k), 1.0));
                    curl.push((f, probe.edge(2, i, j + 1, k), 1.0));
                    curl.push((f, probe.edge(1, i, j, k + 1), -1.0));
                    curl.push((f, probe.edge(2, i, j, k), -1.0));
                }
                if i < n && k < n {
                    let f = probe.face(1, i, j, k);
                    curl.push((f, probe.edge(2, i, j, k), 1.0));
                    curl.push((f, probe.edge(0, i, j, k + 1), 1.0));
                    curl.push((f, probe.edge(2, i + 1, j, k), -1.0));
                    curl.push((f, probe.edge(0, i, j, k), -1.0));
                }
                if i < n && j < n {
                    let f = probe.face(2, i, j, k);
                    curl.push((f, probe.edge(0, i, j, k), 1.0));
                    curl.push((f, probe.edge(1, i + 1, j, k), 1.0));
                    curl.push((f, probe.edge(0, i, j + 1, k), -1.0));
                    curl.push((f, probe.edge(1, i, j, k), -1.0));
                }
            }
        }
    }
    let mut div = Vec::new();
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                let c = probe.cell(i, j, k);
                div.push((c, probe.face(0, i, j, k), -1.0));
                div.push((c, probe.face(0, i + 1, j, k), 1.0));
                div.push((c, probe.face(1, i, j, k), -1.0));
                div.push((c, probe.face(1, i, j + 1, k), 1.0));
                div.push((c, probe.face(2, i, j, k), -1.0));
                div.push((c, probe.face(2, i, j, k + 1), 1.0));
            }
        }
    }
    let nn = lattice_len(n, FormDegree::Node);
    let ne = lattice_len(n, FormDegree::Edge);
    let nf = lattice_len(n, FormDegree::Face);
    let nc = lattice_len(n, FormDegree::Cell);
    IncidenceMatrices {
        grad: CsrMatrix::from_triplets(&grad, ne, nn).expect("lattice indices in range"),
        curl: CsrMatrix::from_triplets(&curl, nf, ne).expect("lattice indices in range"),
        div: CsrMatrix::from_triplets(&div, nc, nf).expect("lattice indices in range"),
    }
}
