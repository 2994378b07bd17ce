//! Darboux-chart index conventions, the manifold presentation, the adapted
//! frame, and Lie brackets of frame fields.
//!
//! Coordinates are ordered `(x1..xn, y1..y{kn})` with flat indices
//! `0..n(k+1)`. The adapted frame is `{X_1..X_n, Y_{1,1}..Y_{k,n}}` with
//!
//! ```text
//! X_i = d/dx_i - sum_{a,j} t_i^{aj} d/dy_{(a-1)n+j},   Y_{ai} = d/dy_{(a-1)n+i}
//! ```
//!
//! Frame indices share the coordinate flat layout: `X_i` sits at slot `i-1`
//! and `Y_{ai}` at slot `n + (a-1)n + i - 1`, so the X block always precedes
//! the Y blocks in every matrix in this crate.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::expr::{eval_jet2, EvalError, Jet2, ScalarField};

/// A point of the chart, in coordinate components.
pub type Point = DVector<f64>;
/// A tangent vector, in coordinate components unless stated otherwise.
pub type TangentVector = DVector<f64>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ChartError {
    #[error("coordinate index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Chart dimensions `(n, k)`; the total dimension is `n(k+1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChartSpec {
    pub n: usize,
    pub k: usize,
}

/// Coordinate labels of the chart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoordLabel {
    /// `x_i`, `1 <= i <= n`.
    X(usize),
    /// `y_{(alpha-1)n+i}`, addressed as the pair `(alpha, i)`.
    Y { alpha: usize, i: usize },
}

impl ChartSpec {
    pub fn new(n: usize, k: usize) -> ChartSpec {
        assert!(n > 0 && k > 0, "chart dimensions must be positive");
        ChartSpec { n, k }
    }

    pub fn dim(&self) -> usize {
        self.n * (self.k + 1)
    }

    /// Flat index of a coordinate label: `x_i` at `i-1`, `y(alpha,i)` at
    /// `n + (alpha-1)n + i - 1`.
    pub fn flat_index(&self, label: CoordLabel) -> Result<usize, ChartError> {
        match label {
            CoordLabel::X(i) => {
                if i == 0 || i > self.n {
                    return Err(ChartError::IndexOutOfRange(format!("x{i}")));
                }
                Ok(i - 1)
            }
            CoordLabel::Y { alpha, i } => {
                if alpha == 0 || alpha > self.k || i == 0 || i > self.n {
                    return Err(ChartError::IndexOutOfRange(format!("y({alpha},{i})")));
                }
                Ok(self.n + (alpha - 1) * self.n + i - 1)
            }
        }
    }

    /// Inverse of [`flat_index`](Self::flat_index).
    pub fn label_of(&self, flat: usize) -> Result<CoordLabel, ChartError> {
        if flat < self.n {
            Ok(CoordLabel::X(flat + 1))
        } else if flat < self.dim() {
            let off = flat - self.n;
            Ok(CoordLabel::Y {
                alpha: off / self.n + 1,
                i: off % self.n + 1,
            })
        } else {
            Err(ChartError::IndexOutOfRange(format!("flat index {flat}")))
        }
    }

    /// Frame index of `X_i` (same slot as the coordinate `x_i`).
    pub fn x_frame(&self, i: usize) -> usize {
        debug_assert!((1..=self.n).contains(&i));
        i - 1
    }

    /// Frame index of `Y_{alpha,i}` (same slot as `y_{(alpha-1)n+i}`).
    pub fn y_frame(&self, alpha: usize, i: usize) -> usize {
        debug_assert!((1..=self.k).contains(&alpha) && (1..=self.n).contains(&i));
        self.n + (alpha - 1) * self.n + i - 1
    }

    /// True when the frame slot belongs to the transversal (X) block.
    pub fn is_x_slot(&self, frame_idx: usize) -> bool {
        frame_idx < self.n
    }

    /// Leaf block `alpha` of a frame slot in the Y range, 1-based.
    pub fn y_block_of(&self, frame_idx: usize) -> Option<usize> {
        if frame_idx >= self.n && frame_idx < self.dim() {
            Some((frame_idx - self.n) / self.n + 1)
        } else {
            None
        }
    }
}

/// How the metric entries of a [`ManifoldSpec`] are interpreted.
///
/// Entries are the pairwise inner products of the adapted frame fields,
/// `g(e_a, e_b)`, as scalar fields on the chart. The default is the identity,
/// which makes the adapted frame orthonormal and the distributions
/// `L_1, ..., L_k, Q` mutually orthogonal at every point.
#[derive(Debug, Clone)]
pub enum MetricSpec {
    Identity,
    /// Symmetric matrix of scalar fields over adapted-frame indices.
    FrameMatrix(Vec<ScalarField>),
}

impl MetricSpec {
    /// Gram matrix of the adapted frame at `p`.
    pub fn frame_gram(&self, p: &Point, dim: usize) -> Result<DMatrix<f64>, EvalError> {
        match self {
            MetricSpec::Identity => Ok(DMatrix::identity(dim, dim)),
            MetricSpec::FrameMatrix(fields) => {
                let mut g = DMatrix::zeros(dim, dim);
                for a in 0..dim {
                    for b in a..dim {
                        let v = fields[a * dim + b].eval_value(p.as_slice())?;
                        g[(a, b)] = v;
                        g[(b, a)] = v;
                    }
                }
                Ok(g)
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            MetricSpec::Identity => true,
            MetricSpec::FrameMatrix(fields) => fields.iter().all(ScalarField::is_constant),
        }
    }
}

/// A Darboux-chart presentation of a k-symplectic manifold with transversal
/// distribution `Q = span{X_1..X_n}` given by the coefficient table `t`.
#[derive(Debug, Clone)]
pub struct ManifoldSpec {
    pub chart: ChartSpec,
    /// Complete table `t_i^{alpha j}`, indexed `(i, alpha, j)`, 1-based.
    t: Vec<ScalarField>,
    pub metric: MetricSpec,
    pub base_point: Point,
}

impl ManifoldSpec {
    /// The flat model: all `t` entries zero, identity metric, origin base point.
    pub fn flat(n: usize, k: usize) -> ManifoldSpec {
        let chart = ChartSpec::new(n, k);
        let zero = ScalarField::constant(0.0, n, k);
        ManifoldSpec {
            chart,
            t: vec![zero; n * k * n],
            metric: MetricSpec::Identity,
            base_point: DVector::zeros(chart.dim()),
        }
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    fn t_slot(&self, i: usize, alpha: usize, j: usize) -> usize {
        let (n, k) = (self.chart.n, self.chart.k);
        assert!(
            (1..=n).contains(&i) && (1..=k).contains(&alpha) && (1..=n).contains(&j),
            "t index ({i},{alpha},{j}) out of range for n={n}, k={k}"
        );
        ((i - 1) * k + (alpha - 1)) * n + (j - 1)
    }

    pub fn t_field(&self, i: usize, alpha: usize, j: usize) -> &ScalarField {
        &self.t[self.t_slot(i, alpha, j)]
    }

    pub fn set_t(&mut self, i: usize, alpha: usize, j: usize, field: ScalarField) {
        assert_eq!(field.n, self.chart.n);
        assert_eq!(field.k, self.chart.k);
        let slot = self.t_slot(i, alpha, j);
        self.t[slot] = field;
    }

    /// Parse `src` and install it as `t_i^{alpha j}`.
    pub fn set_t_src(&mut self, i: usize, alpha: usize, j: usize, src: &str) {
        let field = crate::expr::parse_scalar_field(src, self.chart.n, self.chart.k)
            .expect("t entry parses");
        self.set_t(i, alpha, j, field);
    }

    /// Values of the whole `t` table at `p`, in `(i, alpha, j)` row-major order.
    pub fn t_values(&self, p: &Point) -> Result<Vec<f64>, EvalError> {
        self.t.iter().map(|f| f.eval_value(p.as_slice())).collect()
    }

    /// Jets of the whole `t` table at `p`.
    pub fn t_jets(&self, p: &Point) -> Result<TJets, EvalError> {
        let jets = self
            .t
            .iter()
            .map(|f| eval_jet2(f, p.as_slice()))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(TJets {
            n: self.chart.n,
            k: self.chart.k,
            jets,
        })
    }

    pub fn t_value(&self, i: usize, alpha: usize, j: usize, p: &Point) -> Result<f64, EvalError> {
        self.t_field(i, alpha, j).eval_value(p.as_slice())
    }
}

/// Evaluated jets of the `t` table at a point.
pub struct TJets {
    n: usize,
    k: usize,
    jets: Vec<Jet2>,
}

impl TJets {
    pub fn get(&self, i: usize, alpha: usize, j: usize) -> &Jet2 {
        &self.jets[((i - 1) * self.k + (alpha - 1)) * self.n + (j - 1)]
    }
}

/// The adapted frame at a point: columns are `X_1..X_n, Y_{1,1}..Y_{k,n}`
/// expressed in the coordinate basis.
#[derive(Debug, Clone)]
pub struct AdaptedFrame {
    chart: ChartSpec,
    columns: DMatrix<f64>,
}

impl AdaptedFrame {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.columns
    }

    /// Coordinate components of the frame field with the given frame index.
    pub fn column(&self, frame_idx: usize) -> TangentVector {
        self.columns.column(frame_idx).into_owned()
    }

    /// Express a coordinate-basis vector in the adapted frame.
    ///
    /// The frame matrix is unit block-triangular, so the solve is exact
    /// forward substitution: the X components are the x components, and the
    /// Y components absorb the `t` corrections.
    pub fn to_frame(&self, v: &TangentVector) -> TangentVector {
        let n = self.chart.n;
        let dim = self.chart.dim();
        let mut w = v.clone();
        for col in 0..n {
            let c = w[col];
            if c != 0.0 {
                for row in n..dim {
                    w[row] -= self.columns[(row, col)] * c;
                }
            }
        }
        w
    }

    /// Coordinate components of a vector given in frame components.
    pub fn from_frame(&self, w: &TangentVector) -> TangentVector {
        &self.columns * w
    }

    pub fn det(&self) -> f64 {
        self.columns.clone().lu().determinant()
    }
}

/// The frame `{X_i, Y_{alpha i}}` at `p`.
pub fn adapted_frame_at(spec: &ManifoldSpec, p: &Point) -> Result<AdaptedFrame, EvalError> {
    let chart = spec.chart;
    let (n, k) = (chart.n, chart.k);
    let dim = chart.dim();
    let mut columns = DMatrix::identity(dim, dim);
    for i in 1..=n {
        for alpha in 1..=k {
            for j in 1..=n {
                let row = chart.y_frame(alpha, j);
                columns[(row, i - 1)] = -spec.t_value(i, alpha, j, p)?;
            }
        }
    }
    Ok(AdaptedFrame { chart, columns })
}

/// The adapted frame assembled from already-evaluated `t` jets.
pub fn adapted_frame_from_jets(chart: ChartSpec, jets: &TJets) -> AdaptedFrame {
    let (n, k) = (chart.n, chart.k);
    let dim = chart.dim();
    let mut columns = DMatrix::identity(dim, dim);
    for i in 1..=n {
        for alpha in 1..=k {
            for j in 1..=n {
                columns[(chart.y_frame(alpha, j), i - 1)] = -jets.get(i, alpha, j).value;
            }
        }
    }
    AdaptedFrame { chart, columns }
}

/// Coordinate components of the frame field `e_a` as jets: constants for the
/// Y fields, constants and `-t` jets for the X fields.
pub fn frame_field_jets(chart: ChartSpec, jets: &TJets, frame_idx: usize) -> Vec<Jet2> {
    let dim = chart.dim();
    let mut comps = vec![Jet2::constant(0.0, dim); dim];
    if chart.is_x_slot(frame_idx) {
        let i = frame_idx + 1;
        comps[frame_idx] = Jet2::constant(1.0, dim);
        for alpha in 1..=chart.k {
            for j in 1..=chart.n {
                comps[chart.y_frame(alpha, j)] = -jets.get(i, alpha, j);
            }
        }
    } else {
        comps[frame_idx] = Jet2::constant(1.0, dim);
    }
    comps
}

/// Lie bracket `[e_a, e_b]` of two adapted-frame fields at `p`, returned in
/// adapted-frame components.
///
/// Brackets of frame fields have no `d/dx` part, so the X components are
/// always zero; the Y components are first derivatives of the `t` table:
///
/// ```text
/// [Y_{ai}, Y_{bj}] = 0
/// [Y_{ai}, X_j]    = - sum_{b,h} dt_j^{bh}/dy_{(a-1)n+i} Y_{bh}
/// [X_i, X_j]       = sum_{b,h} (X_j(t_i^{bh}) - X_i(t_j^{bh})) Y_{bh}
/// ```
pub fn frame_bracket_at(
    spec: &ManifoldSpec,
    p: &Point,
    a: usize,
    b: usize,
) -> Result<TangentVector, EvalError> {
    let jets = spec.t_jets(p)?;
    Ok(frame_bracket_from_jets(spec.chart, &jets, a, b))
}

/// Same as [`frame_bracket_at`] with the `t` jets already evaluated.
pub fn frame_bracket_from_jets(
    chart: ChartSpec,
    jets: &TJets,
    a: usize,
    b: usize,
) -> TangentVector {
    let (n, k) = (chart.n, chart.k);
    let dim = chart.dim();
    let mut out = DVector::zeros(dim);

    let a_is_x = chart.is_x_slot(a);
    let b_is_x = chart.is_x_slot(b);

    match (a_is_x, b_is_x) {
        (false, false) => {} // coordinate fields commute
        (false, true) | (true, false) => {
            // [Y_{alpha i}, X_j] = -sum dt_j^{bh}/dy_{(alpha-1)n+i} Y_{bh}
            let (y_slot, x_slot, sign) = if a_is_x { (b, a, 1.0) } else { (a, b, -1.0) };
            let j = x_slot + 1;
            for beta in 1..=k {
                for h in 1..=n {
                    let d = jets.get(j, beta, h).grad[y_slot];
                    out[chart.y_frame(beta, h)] = sign * d;
                }
            }
        }
        (true, true) => {
            let (i, j) = (a + 1, b + 1);
            let t_at = |r: usize, beta: usize, h: usize| jets.get(r, beta, h).value;
            // X_r(f) = df/dx_r - sum_{g,l} t_r^{gl} df/dy_{(g-1)n+l}
            let x_dir = |r: usize, f: &Jet2| -> f64 {
                let mut acc = f.grad[r - 1];
                for gamma in 1..=k {
                    for l in 1..=n {
                        acc -= t_at(r, gamma, l) * f.grad[chart.y_frame(gamma, l)];
                    }
                }
                acc
            };
            for beta in 1..=k {
                for h in 1..=n {
                    let fi = jets.get(i, beta, h);
                    let fj = jets.get(j, beta, h);
                    out[chart.y_frame(beta, h)] = x_dir(j, fi) - x_dir(i, fj);
                }
            }
        }
    }
    out
}
