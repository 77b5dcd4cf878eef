//! Lazy symmetric operator expressions.
//!
//! Terms such as `B U Bᵀ` and the low-rank harmonic term `M H Hᵀ M` are never
//! materialized: they are applied factor by factor. Only symmetric leaves and
//! symmetry-preserving combinators can be built, so every expression is a
//! symmetric operator on ℝⁿ.

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;
use crate::vector::{self, dot};
use alloc::boxed::Box;
use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

/// The SPD weight `U` between the two factors of `B U Bᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub enum Weight {
    /// `α I`
    Scalar(f64),
    /// `diag(d)`
    Diagonal(Arc<Vec<f64>>),
    /// A general symmetric positive definite sparse matrix.
    Matrix(Arc<CsrMatrix>),
}

impl Weight {
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            Weight::Scalar(a) => Ok(x.iter().map(|v| a * v).collect()),
            Weight::Diagonal(d) => {
                vector::check_len(x, d.len(), "diagonal weight")?;
                Ok(x.iter().zip(d.iter()).map(|(v, w)| v * w).collect())
            }
            Weight::Matrix(u) => u.spmv(x),
        }
    }

    /// `Some(α)` when the weight is a multiple of the identity.
    pub fn as_scalar(&self) -> Option<f64> {
        match self {
            Weight::Scalar(a) => Some(*a),
            _ => None,
        }
    }

    /// Dimension the weight acts on, if it is fixed by the weight itself.
    pub fn dim(&self) -> Option<usize> {
        match self {
            Weight::Scalar(_) => None,
            Weight::Diagonal(d) => Some(d.len()),
            Weight::Matrix(u) => Some(u.nrows()),
        }
    }

    /// Explicit `B U Bᵀ`.
    pub fn sandwich(&self, b: &CsrMatrix) -> Result<CsrMatrix> {
        let bt = b.transpose();
        match self {
            Weight::Scalar(a) => Ok(b.matmul(&bt)?.scaled(*a)),
            Weight::Diagonal(d) => b.scale_columns(d)?.matmul(&bt),
            Weight::Matrix(u) => b.matmul(u)?.matmul(&bt),
        }
    }

    pub(crate) fn validate(&self, m: usize) -> Result<()> {
        match self {
            Weight::Scalar(a) if !(*a > 0.0 && a.is_finite()) => {
                Err(Error::Config(format!("scalar weight must be positive, got {a}")))
            }
            Weight::Diagonal(d) if d.iter().any(|v| !(*v > 0.0 && v.is_finite())) => {
                Err(Error::Config("diagonal weight must be positive".into()))
            }
            Weight::Matrix(u) if !u.is_symmetric(1e-12) => {
                Err(Error::Config("matrix weight must be symmetric".into()))
            }
            _ => match self.dim() {
                Some(d) if d != m => Err(Error::Dimension(format!(
                    "weight acts on dimension {d}, B has {m} columns"
                ))),
                _ => Ok(()),
            },
        }
    }
}

#[derive(Debug, Clone)]
enum Node {
    Csr(Arc<CsrMatrix>),
    Diagonal(Arc<Vec<f64>>),
    Identity { alpha: f64 },
    LowRankSym { m: Arc<CsrMatrix>, h: Arc<Vec<Vec<f64>>> },
    TripleProduct { b: Arc<CsrMatrix>, u: Weight },
    Sum(Vec<OperatorExpr>),
    Scale(f64, Box<OperatorExpr>),
}

/// A symmetric linear operator assembled from sparse and low-rank pieces.
#[derive(Debug, Clone)]
pub struct OperatorExpr {
    node: Node,
    dim: usize,
}

impl OperatorExpr {
    /// Leaf wrapping a symmetric CSR matrix (checked to `1e-12` relative).
    pub fn csr(a: Arc<CsrMatrix>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::Dimension(format!(
                "operator leaf must be square, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if !a.is_symmetric(1e-12) {
            return Err(Error::Structure("operator leaf is not symmetric".into()));
        }
        let dim = a.nrows();
        Ok(Self {
            node: Node::Csr(a),
            dim,
        })
    }

    /// Leaf for a matrix already known to be square and symmetric.
    pub(crate) fn csr_trusted(a: Arc<CsrMatrix>) -> Self {
        let dim = a.nrows();
        Self {
            node: Node::Csr(a),
            dim,
        }
    }

    pub fn diagonal(d: Vec<f64>) -> Self {
        let dim = d.len();
        Self {
            node: Node::Diagonal(Arc::new(d)),
            dim,
        }
    }

    pub fn identity(n: usize, alpha: f64) -> Self {
        Self {
            node: Node::Identity { alpha },
            dim: n,
        }
    }

    /// `M H Hᵀ M`, where `h` holds the columns of `H`.
    pub fn low_rank_sym(m: Arc<CsrMatrix>, h: Arc<Vec<Vec<f64>>>) -> Result<Self> {
        let dim = m.nrows();
        if m.ncols() != dim {
            return Err(Error::Dimension("low-rank term needs a square M".into()));
        }
        if let Some(col) = h.iter().find(|c| c.len() != dim) {
            return Err(Error::Dimension(format!(
                "harmonic column of length {} for M of size {dim}",
                col.len()
            )));
        }
        Ok(Self {
            node: Node::LowRankSym { m, h },
            dim,
        })
    }

    /// `B U Bᵀ`
    pub fn triple_product(b: Arc<CsrMatrix>, u: Weight) -> Result<Self> {
        u.validate(b.ncols())?;
        let dim = b.nrows();
        Ok(Self {
            node: Node::TripleProduct { b, u },
            dim,
        })
    }

    pub fn sum(terms: Vec<OperatorExpr>) -> Result<Self> {
        let dim = match terms.first() {
            Some(t) => t.dim,
            None => return Err(Error::Dimension("empty operator sum".into())),
        };
        if let Some(t) = terms.iter().find(|t| t.dim != dim) {
            return Err(Error::Dimension(format!(
                "operator sum mixes dimensions {dim} and {}",
                t.dim
            )));
        }
        Ok(Self {
            node: Node::Sum(terms),
            dim,
        })
    }

    pub fn scaled(self, alpha: f64) -> Self {
        let dim = self.dim;
        Self {
            node: Node::Scale(alpha, Box::new(self)),
            dim,
        }
    }

    pub fn plus(self, other: OperatorExpr) -> Result<Self> {
        Self::sum(vec![self, other])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        vector::check_len(x, self.dim, "operator apply")?;
        match &self.node {
            Node::Csr(a) => a.spmv(x),
            Node::Diagonal(d) => Ok(x.iter().zip(d.iter()).map(|(v, w)| v * w).collect()),
            Node::Identity { alpha, .. } => Ok(x.iter().map(|v| alpha * v).collect()),
            Node::LowRankSym { m, h } => {
                // M (H (Hᵀ (M x))), one factor at a time
                let mx = m.spmv(x)?;
                let coeffs: Vec<f64> = h.iter().map(|col| dot(col, &mx)).collect();
                let mut hc = vec![0.0; self.dim];
                for (col, c) in h.iter().zip(&coeffs) {
                    vector::axpy(*c, col, &mut hc);
                }
                m.spmv(&hc)
            }
            Node::TripleProduct { b, u } => {
                let btx = b.spmv_t(x)?;
                let ubtx = u.apply(&btx)?;
                b.spmv(&ubtx)
            }
            Node::Sum(terms) => {
                let mut y = vec![0.0; self.dim];
                for t in terms {
                    let ti = t.apply(x)?;
                    vector::axpy(1.0, &ti, &mut y);
                }
                Ok(y)
            }
            Node::Scale(a, inner) => {
                let mut y = inner.apply(x)?;
                vector::scale(*a, &mut y);
                Ok(y)
            }
        }
    }
}

/// M-orthonormalizes `block` by twice-iterated modified Gram–Schmidt.
///
/// A vector whose M-norm after projection falls below `drop_tol` times its
/// initial M-norm is discarded; the span of the survivors equals the span of
/// the input up to those dropped directions.
pub fn m_orthonormalize(
    m: &OperatorExpr,
    block: Vec<Vec<f64>>,
    drop_tol: f64,
) -> Result<Vec<Vec<f64>>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(block.len());
    let mut m_basis: Vec<Vec<f64>> = Vec::with_capacity(block.len());
    for mut v in block {
        let mv0 = m.apply(&v)?;
        let norm0 = libm::sqrt(dot(&v, &mv0).max(0.0));
        if norm0 == 0.0 || !norm0.is_finite() {
            continue;
        }
        for _ in 0..2 {
            for (q, mq) in basis.iter().zip(&m_basis) {
                let c = dot(mq, &v);
                vector::axpy(-c, q, &mut v);
            }
        }
        let mv = m.apply(&v)?;
        let norm = libm::sqrt(dot(&v, &mv).max(0.0));
        if norm <= drop_tol * norm0 {
            continue;
        }
        let inv = 1.0 / norm;
        vector::scale(inv, &mut v);
        let mut mv = mv;
        vector::scale(inv, &mut mv);
        basis.push(v);
        m_basis.push(mv);
    }
    Ok(basis)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;

    fn spd_matrix() -> Arc<CsrMatrix> {
        let t = [
            (0, 0, 4.0),
            (0, 1, 1.0),
            (1, 0, 1.0),
            (1, 1, 3.0),
            (1, 2, -1.0),
            (2, 1, -1.0),
            (2, 2, 2.0),
        ];
        Arc::new(CsrMatrix::from_triplets(&t, 3, 3).unwrap())
    }

    fn rect_b() -> Arc<CsrMatrix> {
        let t = [(0, 0, 1.0), (1, 0, -1.0), (1, 1, 2.0), (2, 1, 0.5)];
        Arc::new(CsrMatrix::from_triplets(&t, 3, 2).unwrap())
    }

    fn all_exprs() -> Vec<OperatorExpr> {
        let a = spd_matrix();
        let b = rect_b();
        let h = Arc::new(vec![vec![0.3, -0.2, 0.7], vec![1.0, 0.0, 0.5]]);
        vec![
            OperatorExpr::csr(a.clone()).unwrap(),
            OperatorExpr::diagonal(vec![1.0, 2.0, 3.0]),
            OperatorExpr::identity(3, 2.5),
            OperatorExpr::low_rank_sym(a.clone(), h).unwrap(),
            OperatorExpr::triple_product(b.clone(), Weight::Scalar(3.0)).unwrap(),
            OperatorExpr::triple_product(b.clone(), Weight::Diagonal(Arc::new(vec![1.0, 4.0])))
                .unwrap(),
            OperatorExpr::sum(vec![
                OperatorExpr::csr(a.clone()).unwrap(),
                OperatorExpr::triple_product(b, Weight::Scalar(2.0)).unwrap().scaled(0.5),
            ])
            .unwrap(),
        ]
    }

    #[test]
    fn sum_of_csr_and_scaled_mass() {
        let a = spd_matrix();
        let m = Arc::new(CsrMatrix::from_diagonal(&[1.0, 2.0, 3.0]));
        let e = OperatorExpr::csr(a.clone())
            .unwrap()
            .plus(OperatorExpr::csr(m.clone()).unwrap().scaled(0.5))
            .unwrap();
        let x = [1.0, -1.0, 2.0];
        let ax = a.spmv(&x).unwrap();
        let mx = m.spmv(&x).unwrap();
        let y = e.apply(&x).unwrap();
        for i in 0..3 {
            assert!((y[i] - (ax[i] + 0.5 * mx[i])).abs() < 1e-14);
        }
    }

    #[test]
    fn triple_product_with_scalar_weight_matches_dense() {
        let b = rect_b();
        let e = OperatorExpr::triple_product(b.clone(), Weight::Scalar(2.0)).unwrap();
        let x = [0.5, 1.0, -2.0];
        // dense αBBᵀx
        let mut bd = [[0.0; 2]; 3];
        for (i, j, v) in b.to_triplets() {
            bd[i][j] = v;
        }
        let mut want = [0.0; 3];
        for i in 0..3 {
            for k in 0..3 {
                let bbt: f64 = (0..2).map(|j| bd[i][j] * bd[k][j]).sum();
                want[i] += 2.0 * bbt * x[k];
            }
        }
        let got = e.apply(&x).unwrap();
        let scale = vector::norm2(&want);
        for i in 0..3 {
            assert!((got[i] - want[i]).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn rank_one_low_rank_term() {
        let m = spd_matrix();
        let mut h = vec![1.0, 2.0, -1.0];
        let mh = m.spmv(&h).unwrap();
        let s = 1.0 / libm::sqrt(dot(&h, &mh));
        vector::scale(s, &mut h);
        let mh = m.spmv(&h).unwrap();
        let e = OperatorExpr::low_rank_sym(m.clone(), Arc::new(vec![h.clone()])).unwrap();
        let x = [0.2, -0.4, 1.0];
        let coeff = dot(&h, &m.spmv(&x).unwrap());
        let y = e.apply(&x).unwrap();
        for i in 0..3 {
            assert!((y[i] - coeff * mh[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn shape_errors_are_reported() {
        let a = spd_matrix();
        let rect = rect_b();
        assert!(OperatorExpr::csr(rect.clone()).is_err());
        assert!(OperatorExpr::triple_product(rect, Weight::Diagonal(Arc::new(vec![1.0]))).is_err());
        assert!(OperatorExpr::low_rank_sym(a.clone(), Arc::new(vec![vec![1.0]])).is_err());
        assert!(OperatorExpr::sum(vec![
            OperatorExpr::identity(2, 1.0),
            OperatorExpr::identity(3, 1.0)
        ])
        .is_err());
        let e = OperatorExpr::csr(a).unwrap();
        assert!(e.apply(&[1.0]).is_err());
        let nonsym = CsrMatrix::from_triplets(&[(0, 1, 1.0)], 2, 2).unwrap();
        assert!(OperatorExpr::csr(Arc::new(nonsym)).is_err());
    }

    #[test]
    fn orthonormalize_identity_metric() {
        let m = OperatorExpr::identity(2, 1.0);
        let out = m_orthonormalize(&m, vec![vec![2.0, 0.0], vec![0.0, 3.0]], 1e-12).unwrap();
        assert_eq!(out, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let out = m_orthonormalize(&m, vec![vec![1.0, 0.0], vec![1.0, 1e-16]], 1e-12).unwrap();
        assert_eq!(out.len(), 1);
    }

    #[test]
    fn orthonormalize_in_spd_metric() {
        let m = OperatorExpr::csr(spd_matrix()).unwrap();
        let mut r = rng::seeded(3);
        let block: Vec<_> = (0..3).map(|_| rng::uniform_vec(&mut r, 3)).collect();
        let q = m_orthonormalize(&m, block, 1e-12).unwrap();
        assert_eq!(q.len(), 3);
        for i in 0..3 {
            let mqi = m.apply(&q[i]).unwrap();
            for j in 0..3 {
                let g = dot(&q[j], &mqi);
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g - want).abs() < 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn every_expression_is_symmetric_and_linear(
            seed in 0u64..1000, a in -3.0f64..3.0, b in -3.0f64..3.0
        ) {
            let mut r = rng::seeded(seed);
            let x = rng::uniform_vec(&mut r, 3);
            let y = rng::uniform_vec(&mut r, 3);
            for e in all_exprs() {
                let ex = e.apply(&x).unwrap();
                let ey = e.apply(&y).unwrap();
                let lhs = dot(&x, &ey);
                let rhs = dot(&y, &ex);
                let scale = vector::norm2(&ex) * vector::norm2(&y) + vector::norm2(&ey) * vector::norm2(&x);
                prop_assert!((lhs - rhs).abs() <= 1e-12 * scale.max(1e-300));

                let comb = vector::lincomb(a, &x, b, &y);
                let ec = e.apply(&comb).unwrap();
                let want = vector::lincomb(a, &ex, b, &ey);
                let tol = 1e-12 * (vector::norm2(&want) + vector::norm2(&ec)).max(1e-300);
                prop_assert!(vector::norm2(&vector::sub(&ec, &want)) <= tol);
            }
        }
    }
}
