//! The k-symplectic two-forms, the hypothesis checks C1..C7 over a sampling
//! plan, and k-symplectic group membership.
//!
//! Two-form normalization: with coefficients `c_lm` over flat indices `l < m`,
//! evaluation is the alternating sum `sum_{l<m} c_lm (u_l v_m - u_m v_l)`.
//! The standard forms carry `c = 1/2` on the `(x_i, y_{(a-1)n+i})` slots, so
//! `omega_a(Y_{bi}, X_j) = -(1/2) delta_ab delta_ij`. The alternative
//! convention `(dx ^ dy)(d/dx, d/dy) = 1` is common elsewhere; everything
//! here, including the reported constants, uses the `1/2` convention.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::chart::{
    adapted_frame_from_jets, frame_bracket_from_jets, frame_field_jets, ChartSpec, ManifoldSpec,
    Point, TangentVector,
};
use crate::expr::{eval_jet2, EvalError, Jet2, ScalarField};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum StructuresError {
    #[error("form index out of range: ({0}, {1})")]
    IndexOutOfRange(usize, usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// A two-form given by scalar-field coefficients `c_lm` on slots `l < m`;
/// the antisymmetric extension is implied.
#[derive(Debug, Clone)]
pub struct TwoFormField {
    chart: ChartSpec,
    /// Upper-triangle coefficients, row-major over `l < m`.
    coeffs: Vec<ScalarField>,
}

impl TwoFormField {
    pub fn zero(chart: ChartSpec) -> TwoFormField {
        let dim = chart.dim();
        let zero = ScalarField::constant(0.0, chart.n, chart.k);
        TwoFormField {
            chart,
            coeffs: vec![zero; dim * (dim - 1) / 2],
        }
    }

    fn slot(&self, l: usize, m: usize) -> Result<usize, StructuresError> {
        let dim = self.chart.dim();
        if l >= m || m >= dim {
            return Err(StructuresError::IndexOutOfRange(l, m));
        }
        Ok(l * dim - l * (l + 1) / 2 + (m - l - 1))
    }

    pub fn coeff(&self, l: usize, m: usize) -> &ScalarField {
        &self.coeffs[self.slot(l, m).expect("slot in range")]
    }

    pub fn set_coeff(
        &mut self,
        l: usize,
        m: usize,
        field: ScalarField,
    ) -> Result<(), StructuresError> {
        let slot = self.slot(l, m)?;
        self.coeffs[slot] = field;
        Ok(())
    }

    pub fn chart(&self) -> ChartSpec {
        self.chart
    }

    /// The full antisymmetric coefficient matrix at `p`.
    pub fn full_matrix(&self, p: &Point) -> Result<DMatrix<f64>, EvalError> {
        let dim = self.chart.dim();
        let mut w = DMatrix::zeros(dim, dim);
        for l in 0..dim {
            for m in (l + 1)..dim {
                let c = self.coeff(l, m).eval_value(p.as_slice())?;
                w[(l, m)] = c;
                w[(m, l)] = -c;
            }
        }
        Ok(w)
    }

    /// Residual of closedness at `p`: the largest coefficient of the exterior
    /// derivative, `|d_l c_mq - d_m c_lq + d_q c_lm|` over `l < m < q`.
    pub fn closedness_residual(&self, p: &Point) -> Result<f64, EvalError> {
        let dim = self.chart.dim();
        let mut grads = vec![DVector::zeros(dim); dim * dim];
        for l in 0..dim {
            for m in (l + 1)..dim {
                let jet = eval_jet2(self.coeff(l, m), p.as_slice())?;
                grads[l * dim + m] = jet.grad;
            }
        }
        let grad = |l: usize, m: usize, dir: usize| grads[l * dim + m][dir];
        let mut worst = 0.0f64;
        for l in 0..dim {
            for m in (l + 1)..dim {
                for q in (m + 1)..dim {
                    let r = grad(m, q, l) - grad(l, q, m) + grad(l, m, q);
                    worst = worst.max(r.abs());
                }
            }
        }
        Ok(worst)
    }
}

/// `omega_alpha = sum_i dx_i ^ dy_{(alpha-1)n+i}` with the `1/2` coefficients.
pub fn standard_omega(chart: ChartSpec, alpha: usize) -> Result<TwoFormField, StructuresError> {
    if alpha == 0 || alpha > chart.k {
        return Err(StructuresError::IndexOutOfRange(alpha, chart.k));
    }
    let mut omega = TwoFormField::zero(chart);
    for i in 1..=chart.n {
        let l = i - 1;
        let m = chart.y_frame(alpha, i);
        omega.set_coeff(l, m, ScalarField::constant(0.5, chart.n, chart.k))?;
    }
    Ok(omega)
}

/// All standard forms `omega_1..omega_k` of a chart.
pub fn standard_forms(chart: ChartSpec) -> Vec<TwoFormField> {
    (1..=chart.k)
        .map(|alpha| standard_omega(chart, alpha).expect("alpha in range"))
        .collect()
}

/// `omega(u, v)` at `p` for coordinate-basis vectors.
pub fn eval_two_form(
    omega: &TwoFormField,
    p: &Point,
    u: &TangentVector,
    v: &TangentVector,
) -> Result<f64, StructuresError> {
    let dim = omega.chart.dim();
    if u.len() != dim || v.len() != dim {
        return Err(StructuresError::DimensionMismatch {
            expected: dim,
            got: u.len().max(v.len()),
        });
    }
    let mut acc = 0.0;
    for l in 0..dim {
        for m in (l + 1)..dim {
            let field = omega.coeff(l, m);
            if field.is_zero_literal() {
                continue;
            }
            let c = field.eval_value(p.as_slice())?;
            acc += c * (u[l] * v[m] - u[m] * v[l]);
        }
    }
    Ok(acc)
}

/// `omega(U, V)` as a jet when the arguments are vector fields given by
/// component jets; used for directional derivatives of form evaluations.
pub fn two_form_pair_jet(
    omega: &TwoFormField,
    p: &Point,
    u: &[Jet2],
    v: &[Jet2],
) -> Result<Jet2, StructuresError> {
    let dim = omega.chart.dim();
    let mut acc = Jet2::constant(0.0, dim);
    for l in 0..dim {
        for m in (l + 1)..dim {
            let field = omega.coeff(l, m);
            if field.is_zero_literal() {
                continue;
            }
            let c = eval_jet2(field, p.as_slice())?;
            let pair = &u[l] * &v[m] - &u[m] * &v[l];
            acc = acc + c * pair;
        }
    }
    Ok(acc)
}

/// Deterministic sampling plan for the hypothesis checks.
#[derive(Debug, Clone)]
pub struct SamplingPlan {
    pub sample_count: usize,
    pub seed: u64,
    pub box_min: Vec<f64>,
    pub box_max: Vec<f64>,
    pub tolerance: f64,
}

impl SamplingPlan {
    pub fn default_for(dim: usize) -> SamplingPlan {
        SamplingPlan {
            sample_count: 100,
            seed: 0,
            box_min: vec![-1.0; dim],
            box_max: vec![1.0; dim],
            tolerance: 1e-9,
        }
    }

    /// The seeded point stream: `sample_count` points uniform in the box.
    pub fn sample_points(&self) -> Vec<Point> {
        let dim = self.box_min.len();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..self.sample_count)
            .map(|_| {
                DVector::from_fn(dim, |i, _| {
                    if self.box_max[i] > self.box_min[i] {
                        rng.gen_range(self.box_min[i]..self.box_max[i])
                    } else {
                        self.box_min[i]
                    }
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

/// Witness of the worst sampled violation: the point, any vectors involved,
/// and a short description of the offending quantity.
#[derive(Debug, Clone, Serialize)]
pub struct Witness {
    pub point: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckRecord {
    pub id: String,
    pub description: String,
    pub status: CheckStatus,
    pub max_residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
}

impl CheckRecord {
    pub fn passed(&self) -> bool {
        self.status != CheckStatus::Fail
    }
}

/// Outcome of [`validate_spec`]: one record per check C1..C7, in order.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<CheckRecord>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(CheckRecord::passed)
    }

    pub fn check(&self, id: &str) -> Option<&CheckRecord> {
        self.checks.iter().find(|c| c.id == id)
    }
}

/// Per-point residual with the sample index for deterministic reduction.
#[derive(Debug, Clone)]
struct PointResidual {
    value: f64,
    sample: usize,
    witness: Option<Witness>,
}

impl PointResidual {
    fn zero(sample: usize) -> PointResidual {
        PointResidual {
            value: 0.0,
            sample,
            witness: None,
        }
    }

    fn update(&mut self, value: f64, witness: impl FnOnce() -> Witness) {
        if value > self.value {
            self.value = value;
            self.witness = Some(witness());
        }
    }

    /// Keep the larger residual; ties resolve to the lower sample index.
    fn merge(self, other: PointResidual) -> PointResidual {
        if other.value > self.value || (other.value == self.value && other.sample < self.sample) {
            other
        } else {
            self
        }
    }
}

struct PointChecks {
    residuals: Vec<PointResidual>, // indexed by check 0..7
}

const CHECK_DESCRIPTIONS: [(&str, &str); 7] = [
    ("C1", "closedness: d omega_alpha = 0"),
    (
        "C2",
        "characteristic intersection: joint kernel of the omega_alpha is trivial",
    ),
    ("C3", "isotropy: omega_alpha vanishes on L x L and Q x Q"),
    ("C4", "bracket condition: [Y_{beta i}, X_j] lies in L_beta + Q"),
    (
        "C5",
        "t-compatibility: cross-block dt = 0 and per-block slopes agree across alpha",
    ),
    ("C6", "Frobenius for Q: [X_i, X_j] has no vertical component"),
    (
        "C7",
        "Lie derivative: L_X omega_alpha = 0 for X in L_beta, alpha != beta",
    ),
];

/// Run the checks C1..C7 at each sampled point and reduce to one record per
/// check. A falsified check is reported as failed, never as an error;
/// evaluation errors in the supplied fields do propagate.
pub fn validate_spec(
    spec: &ManifoldSpec,
    plan: &SamplingPlan,
) -> Result<ValidationReport, StructuresError> {
    let chart = spec.chart;
    let points = plan.sample_points();
    let forms = standard_forms(chart);

    let per_point: Vec<PointChecks> = points
        .par_iter()
        .enumerate()
        .map(|(s, p)| point_checks(spec, &forms, s, p))
        .collect::<Result<_, _>>()?;

    let k = chart.k;
    let mut checks = Vec::with_capacity(7);
    for (idx, (id, description)) in CHECK_DESCRIPTIONS.iter().enumerate() {
        // C5 is vacuous on a single leaf block.
        if idx == 4 && k == 1 {
            checks.push(CheckRecord {
                id: (*id).to_string(),
                description: format!("{description} (vacuous for k = 1)"),
                status: CheckStatus::Skipped,
                max_residual: 0.0,
                witness: None,
            });
            continue;
        }
        let reduced = per_point
            .iter()
            .map(|pc| pc.residuals[idx].clone())
            .fold(PointResidual::zero(usize::MAX), PointResidual::merge);
        let pass = reduced.value <= plan.tolerance;
        checks.push(CheckRecord {
            id: (*id).to_string(),
            description: (*description).to_string(),
            status: if pass {
                CheckStatus::Pass
            } else {
                CheckStatus::Fail
            },
            max_residual: reduced.value,
            witness: if pass { None } else { reduced.witness },
        });
    }
    Ok(ValidationReport { checks })
}

fn point_checks(
    spec: &ManifoldSpec,
    forms: &[TwoFormField],
    sample: usize,
    p: &Point,
) -> Result<PointChecks, StructuresError> {
    let chart = spec.chart;
    let (n, k) = (chart.n, chart.k);
    let dim = chart.dim();
    let jets = spec.t_jets(p)?;
    let frame = adapted_frame_from_jets(chart, &jets);
    let mut residuals = vec![PointResidual::zero(sample); 7];
    let point_vec = p.as_slice().to_vec();

    // C1: closedness of each form.
    for (ai, omega) in forms.iter().enumerate() {
        let r = omega.closedness_residual(p)?;
        residuals[0].update(r, || Witness {
            point: point_vec.clone(),
            vectors: vec![],
            detail: format!("d omega_{} has a coefficient of size {r:e}", ai + 1),
        });
    }

    // C2: joint kernel of the stacked coefficient matrices, as a
    // scale-invariant singular-value test with threshold 1e-10.
    {
        let mut stacked = DMatrix::zeros(k * dim, dim);
        for (ai, omega) in forms.iter().enumerate() {
            stacked
                .view_mut((ai * dim, 0), (dim, dim))
                .copy_from(&omega.full_matrix(p)?);
        }
        let svd = stacked.svd(false, false);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        let ratio = if smax > 0.0 { smin / smax } else { 0.0 };
        let defect = (1e-10 - ratio).max(0.0);
        residuals[1].update(defect, || Witness {
            point: point_vec.clone(),
            vectors: vec![],
            detail: format!("singular value ratio {ratio:e} below 1e-10"),
        });
    }

    // Frame fields in coordinate components, and pairwise form jets.
    let frame_cols: Vec<TangentVector> = (0..dim).map(|a| frame.column(a)).collect();
    let field_jets: Vec<Vec<Jet2>> = (0..dim)
        .map(|a| frame_field_jets(chart, &jets, a))
        .collect();
    let mut pair_jets: Vec<Vec<Vec<Jet2>>> = Vec::with_capacity(k);
    for omega in forms {
        let mut per_a = Vec::with_capacity(dim);
        for a in 0..dim {
            let mut per_b = Vec::with_capacity(dim);
            for b in 0..dim {
                per_b.push(two_form_pair_jet(omega, p, &field_jets[a], &field_jets[b])?);
            }
            per_a.push(per_b);
        }
        pair_jets.push(per_a);
    }

    // C3: isotropy of L and Q for every form.
    for alpha in 1..=k {
        for a in 0..dim {
            for b in 0..dim {
                let both_vertical = !chart.is_x_slot(a) && !chart.is_x_slot(b);
                let both_horizontal = chart.is_x_slot(a) && chart.is_x_slot(b);
                if both_vertical || both_horizontal {
                    let v = pair_jets[alpha - 1][a][b].value.abs();
                    residuals[2].update(v, || Witness {
                        point: point_vec.clone(),
                        vectors: vec![
                            frame_cols[a].as_slice().to_vec(),
                            frame_cols[b].as_slice().to_vec(),
                        ],
                        detail: format!("omega_{alpha}(e_{a}, e_{b}) = {v:e}"),
                    });
                }
            }
        }
    }

    // Brackets [Y_{beta i}, X_j] in frame components.
    let mut yx_brackets = vec![DVector::zeros(dim); dim * n];
    for b_slot in n..dim {
        for j in 0..n {
            yx_brackets[b_slot * n + j] = frame_bracket_from_jets(chart, &jets, b_slot, j);
        }
    }

    // C4: the bracket stays in L_beta + Q, per beta.
    for b_slot in n..dim {
        let beta = chart.y_block_of(b_slot).expect("vertical slot");
        for j in 0..n {
            let w = &yx_brackets[b_slot * n + j];
            for gamma in 1..=k {
                if gamma == beta {
                    continue;
                }
                for h in 1..=n {
                    let v = w[chart.y_frame(gamma, h)].abs();
                    residuals[3].update(v, || Witness {
                        point: point_vec.clone(),
                        vectors: vec![w.as_slice().to_vec()],
                        detail: format!(
                            "[Y slot {b_slot}, X_{}] has L_{gamma} component {v:e}",
                            j + 1
                        ),
                    });
                }
            }
        }
    }

    // C5: cross-block derivatives vanish and slopes agree across alpha.
    if k >= 2 {
        for i in 1..=n {
            for alpha in 1..=k {
                for j in 1..=n {
                    let jet = jets.get(i, alpha, j);
                    for beta in 1..=k {
                        if beta == alpha {
                            continue;
                        }
                        for h in 1..=n {
                            let d = jet.grad[chart.y_frame(beta, h)];
                            residuals[4].update(d.abs(), || Witness {
                                point: point_vec.clone(),
                                vectors: vec![],
                                detail: format!(
                                    "d t[{i}][{alpha}][{j}] / d y({beta},{h}) = {d:e} != 0"
                                ),
                            });
                        }
                    }
                }
            }
        }
        for i in 1..=n {
            for j in 1..=n {
                for h in 1..=n {
                    let base = jets.get(i, 1, j).grad[chart.y_frame(1, h)];
                    for alpha in 2..=k {
                        let d = jets.get(i, alpha, j).grad[chart.y_frame(alpha, h)];
                        let spread = (d - base).abs();
                        residuals[4].update(spread, || Witness {
                            point: point_vec.clone(),
                            vectors: vec![],
                            detail: format!(
                                "slope mismatch: d t[{i}][{alpha}][{j}]/d y({alpha},{h}) = {d:e} \
                                 vs d t[{i}][1][{j}]/d y(1,{h}) = {base:e}"
                            ),
                        });
                    }
                }
            }
        }
    }

    // C6: integrability of Q; the vertical part of [X_i, X_j].
    for i in 0..n {
        for j in (i + 1)..n {
            let w = frame_bracket_from_jets(chart, &jets, i, j);
            for slot in n..dim {
                let v = w[slot].abs();
                residuals[5].update(v, || Witness {
                    point: point_vec.clone(),
                    vectors: vec![w.as_slice().to_vec()],
                    detail: format!("[X_{}, X_{}] has vertical component {v:e}", i + 1, j + 1),
                });
            }
        }
    }

    // C7: (L_X omega_alpha)(V, W) for X = Y_{beta i}, beta != alpha,
    // with V, W ranging over the frame fields.
    for alpha in 1..=k {
        let omega = &forms[alpha - 1];
        for beta in 1..=k {
            if beta == alpha {
                continue;
            }
            for i in 1..=n {
                let x_slot = chart.y_frame(beta, i);
                for a in 0..dim {
                    for b in 0..dim {
                        let term1 = pair_jets[alpha - 1][a][b].grad[x_slot];
                        // Brackets with a Y field vanish unless the other
                        // argument is an X field; [X, V] = -[V, X].
                        let bracket_with = |v_slot: usize| -> TangentVector {
                            if chart.is_x_slot(v_slot) {
                                let w = &yx_brackets[x_slot * n + v_slot];
                                frame.from_frame(w)
                            } else {
                                DVector::zeros(dim)
                            }
                        };
                        let xa = bracket_with(a);
                        let xb = bracket_with(b);
                        let term2 = eval_two_form(omega, p, &xa, &frame_cols[b])?;
                        let term3 = eval_two_form(omega, p, &frame_cols[a], &xb)?;
                        let r = (term1 - term2 - term3).abs();
                        residuals[6].update(r, || Witness {
                            point: point_vec.clone(),
                            vectors: vec![
                                frame_cols[a].as_slice().to_vec(),
                                frame_cols[b].as_slice().to_vec(),
                            ],
                            detail: format!(
                                "(L_(Y({beta},{i})) omega_{alpha})(e_{a}, e_{b}) = {r:e}"
                            ),
                        });
                    }
                }
            }
        }
    }

    Ok(PointChecks { residuals })
}

/// Result of the k-symplectic group membership test.
#[derive(Debug, Clone)]
pub struct GroupMembership {
    pub is_member: bool,
    pub detail: String,
}

/// Block-pattern test for the k-symplectic group: diagonal blocks equal to an
/// invertible `T`, last block-column `S_1..S_k` with `T S_a^T` symmetric, the
/// bottom-right block `(T^-1)^T`, zeros elsewhere. Tolerance `1e-10`.
pub fn is_group_element(
    m: &DMatrix<f64>,
    n: usize,
    k: usize,
) -> Result<GroupMembership, StructuresError> {
    let dim = n * (k + 1);
    if m.nrows() != dim || m.ncols() != dim {
        return Err(StructuresError::DimensionMismatch {
            expected: dim,
            got: m.nrows().max(m.ncols()),
        });
    }
    const TOL: f64 = 1e-10;
    let block = |r: usize, c: usize| m.view((r * n, c * n), (n, n)).into_owned();

    let t = block(0, 0);
    for a in 1..k {
        let d = (&block(a, a) - &t).amax();
        if d > TOL {
            return Ok(GroupMembership {
                is_member: false,
                detail: format!("diagonal block {a} differs from block 0 by {d:e}"),
            });
        }
    }
    for r in 0..=k {
        for c in 0..k {
            if r == c {
                continue;
            }
            let d = block(r, c).amax();
            if d > TOL {
                return Ok(GroupMembership {
                    is_member: false,
                    detail: format!("block ({r}, {c}) must vanish but has magnitude {d:e}"),
                });
            }
        }
    }
    let t_inv = match t.clone().try_inverse() {
        Some(inv) => inv,
        None => {
            return Ok(GroupMembership {
                is_member: false,
                detail: "T block is singular".to_string(),
            })
        }
    };
    let d = (&block(k, k) - t_inv.transpose()).amax();
    if d > TOL {
        return Ok(GroupMembership {
            is_member: false,
            detail: format!("bottom-right block differs from (T^-1)^T by {d:e}"),
        });
    }
    for a in 0..k {
        let s = block(a, k);
        let sym = &t * s.transpose() - &s * t.transpose();
        let d = sym.amax();
        if d > TOL {
            return Ok(GroupMembership {
                is_member: false,
                detail: format!("T S_{}^T is not symmetric (residual {d:e})", a + 1),
            });
        }
    }
    Ok(GroupMembership {
        is_member: true,
        detail: "matches the k-symplectic block pattern".to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit(dim: usize, i: usize) -> TangentVector {
        let mut v = DVector::zeros(dim);
        v[i] = 1.0;
        v
    }

    #[test]
    fn standard_omega_coefficients() {
        let c = ChartSpec::new(1, 1);
        let w = standard_omega(c, 1).unwrap();
        assert_eq!(w.coeff(0, 1).eval_value(&[0.0, 0.0]).unwrap(), 0.5);

        let c = ChartSpec::new(2, 2);
        let w = standard_omega(c, 2).unwrap();
        let p = DVector::zeros(6);
        let full = w.full_matrix(&p).unwrap();
        let mut expected = DMatrix::zeros(6, 6);
        expected[(0, 4)] = 0.5;
        expected[(4, 0)] = -0.5;
        expected[(1, 5)] = 0.5;
        expected[(5, 1)] = -0.5;
        assert_eq!(full, expected);

        assert!(standard_omega(c, 3).is_err());
    }

    #[test]
    fn standard_omega_vanishes_on_vertical_pairs() {
        let c = ChartSpec::new(2, 2);
        let p = DVector::zeros(6);
        for alpha in 1..=2 {
            let w = standard_omega(c, alpha).unwrap();
            for a in 2..6 {
                for b in 2..6 {
                    let v = eval_two_form(&w, &p, &unit(6, a), &unit(6, b)).unwrap();
                    assert_eq!(v, 0.0);
                }
            }
        }
    }

    #[test]
    fn frame_pairing_normalization() {
        // omega_1(d/dy1, d/dx1) = -1/2 at n = k = 1.
        let c = ChartSpec::new(1, 1);
        let w = standard_omega(c, 1).unwrap();
        let p = DVector::zeros(2);
        let v = eval_two_form(&w, &p, &unit(2, 1), &unit(2, 0)).unwrap();
        assert_eq!(v, -0.5);

        // alpha != beta blocks pair to zero.
        let c = ChartSpec::new(1, 2);
        let w2 = standard_omega(c, 2).unwrap();
        let p = DVector::zeros(3);
        let v = eval_two_form(&w2, &p, &unit(3, 1), &unit(3, 0)).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn two_form_antisymmetry_and_bilinearity() {
        let c = ChartSpec::new(2, 1);
        let w = standard_omega(c, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..50 {
            let p = DVector::from_fn(4, |_, _| rng.gen_range(-1.0..1.0));
            let u = DVector::from_fn(4, |_, _| rng.gen_range(-1.0..1.0));
            let v = DVector::from_fn(4, |_, _| rng.gen_range(-1.0..1.0));
            let z = DVector::from_fn(4, |_, _| rng.gen_range(-1.0..1.0));
            let (a, b) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let uv = eval_two_form(&w, &p, &u, &v).unwrap();
            let vu = eval_two_form(&w, &p, &v, &u).unwrap();
            assert_relative_eq!(uv, -vu, epsilon = 1e-14);
            let uu = eval_two_form(&w, &p, &u, &u).unwrap();
            assert_eq!(uu, 0.0);
            let combo = eval_two_form(&w, &p, &(&u * a + &z * b), &v).unwrap();
            let parts = a * uv + b * eval_two_form(&w, &p, &z, &v).unwrap();
            assert_relative_eq!(combo, parts, epsilon = 1e-13);
        }
    }

    #[test]
    fn validate_standard_flat_spec() {
        for (n, k) in [(1, 1), (2, 1), (1, 2), (2, 2)] {
            let spec = ManifoldSpec::flat(n, k);
            let plan = SamplingPlan {
                sample_count: 25,
                ..SamplingPlan::default_for(spec.dim())
            };
            let report = validate_spec(&spec, &plan).unwrap();
            assert!(report.all_passed(), "flat spec n={n} k={k}: {report:?}");
            for check in &report.checks {
                if check.status == CheckStatus::Pass {
                    assert_eq!(check.max_residual, 0.0, "{}", check.id);
                }
            }
        }
    }

    #[test]
    fn validate_flags_cross_block_dependence() {
        // t_1^{11} = y2 depends on the second leaf block: C5 must fail.
        let mut spec = ManifoldSpec::flat(1, 2);
        spec.set_t_src(1, 1, 1, "y2");
        let plan = SamplingPlan {
            sample_count: 10,
            ..SamplingPlan::default_for(spec.dim())
        };
        let report = validate_spec(&spec, &plan).unwrap();
        let c5 = report.check("C5").unwrap();
        assert_eq!(c5.status, CheckStatus::Fail);
        assert_relative_eq!(c5.max_residual, 1.0, epsilon = 1e-12);
        let witness = c5.witness.as_ref().unwrap();
        assert!(witness.detail.contains("t[1][1][1]"), "{}", witness.detail);
        // C4 sees the same defect through the brackets.
        assert_eq!(report.check("C4").unwrap().status, CheckStatus::Fail);
    }

    #[test]
    fn validate_curved_k1_spec_passes() {
        let mut spec = ManifoldSpec::flat(1, 1);
        spec.set_t_src(1, 1, 1, "y1^2/2");
        let plan = SamplingPlan {
            sample_count: 50,
            ..SamplingPlan::default_for(2)
        };
        let report = validate_spec(&spec, &plan).unwrap();
        assert!(report.all_passed(), "{report:?}");
        assert_eq!(report.check("C5").unwrap().status, CheckStatus::Skipped);
        for id in ["C1", "C2", "C3", "C4", "C6", "C7"] {
            assert_eq!(report.check(id).unwrap().status, CheckStatus::Pass, "{id}");
        }
    }

    #[test]
    fn validation_is_deterministic() {
        let mut spec = ManifoldSpec::flat(2, 2);
        spec.set_t_src(1, 1, 1, "y1");
        let plan = SamplingPlan::default_for(spec.dim());
        let a = serde_json::to_string(&validate_spec(&spec, &plan).unwrap()).unwrap();
        let b = serde_json::to_string(&validate_spec(&spec, &plan).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn group_membership_cases() {
        // Identity.
        let id = DMatrix::identity(2, 2);
        assert!(is_group_element(&id, 1, 1).unwrap().is_member);

        // Scalar case: [[2, 3], [0, 0.5]] with 0.5 = 1/T.
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 3.0, 0.0, 0.5]);
        assert!(is_group_element(&m, 1, 1).unwrap().is_member);

        // Nonzero lower-left block.
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 1.0]);
        let r = is_group_element(&m, 1, 1).unwrap();
        assert!(!r.is_member);
        assert!(r.detail.contains("(1, 0)"), "{}", r.detail);

        // k = 2: diagonal blocks must agree.
        let mut m = DMatrix::identity(3, 3);
        m[(1, 1)] = 2.0;
        let r = is_group_element(&m, 1, 2).unwrap();
        assert!(!r.is_member);

        // n = 2: T S^T symmetry is a real constraint.
        let mut m = DMatrix::identity(4, 4);
        // T = I, so S must be symmetric; an antisymmetric S violates it.
        m[(0, 3)] = 1.0;
        m[(1, 2)] = -1.0;
        let r = is_group_element(&m, 2, 1).unwrap();
        assert!(!r.is_member, "{}", r.detail);
        // A symmetric S is accepted.
        let mut m = DMatrix::identity(4, 4);
        m[(0, 3)] = 1.0;
        m[(1, 2)] = 1.0;
        assert!(is_group_element(&m, 2, 1).unwrap().is_member);

        assert!(is_group_element(&DMatrix::identity(3, 3), 1, 1).is_err());
    }
}
