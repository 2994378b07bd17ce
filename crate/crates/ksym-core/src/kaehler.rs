//! Almost k-Kaehler tensors: the structure operator `A_a` relating
//! `omega_a` to the metric on `L_a + Q`, the almost complex structure from
//! its polar decomposition, the Nijenhuis tensor of the pointwise `J` field,
//! and a Levi-Civita comparison for flat specs with constant metrics.
//!
//! Subspace convention: everything on `L_a + Q` is expressed in the frame
//! `(Y_{a,1}..Y_{a,n}, X_1..X_n)`, Y block first.
//!
//! The metric of a [`ManifoldSpec`] gives the inner products of the adapted
//! frame fields (see [`crate::chart::MetricSpec`]); with the identity default the frame is
//! orthonormal and the distributions are mutually orthogonal everywhere.
//!
//! The compatibility identity `omega_a(u, v) = ghat(u, J_a v)` is verified
//! against the derived metric `ghat(u, v) := omega_a(J_a u, v)`, which is the
//! polar-decomposition-compatible metric; with a generic input metric `g`
//! itself the identity only holds when `sqrt(A A*) = I`, so `ghat` (equal to
//! `g(sqrt(A A*) . , .)`) is the metric the properties are checked against.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::chart::{
    adapted_frame_at, adapted_frame_from_jets, frame_field_jets, ManifoldSpec, Point,
    TangentVector,
};
use crate::connection::{coeffs_from_jets, curvature_at, ConnectionError};
use crate::expr::{EvalError, Jet2};
use crate::structures::{eval_two_form, standard_omega, SamplingPlan, StructuresError};

#[derive(Debug, Clone, Error)]
pub enum KaehlerError {
    #[error("distributions are not mutually orthogonal at the point: {detail}")]
    Orthogonality { detail: String },
    #[error("metric restricted to L_alpha + Q is singular or not positive definite")]
    SingularMetric,
    #[error("matrix is not symmetric positive definite: {detail}")]
    NotSpd { detail: String },
    #[error("property violated: {identity} (residual {residual:e})")]
    PropertyViolation { identity: String, residual: f64 },
    #[error("spec is not flat: curvature residual {0:e}")]
    NotFlat(f64),
    #[error("metric must be constant for the Levi-Civita comparison")]
    NonConstantMetric,
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Structures(#[from] StructuresError),
    #[error(transparent)]
    Connection(#[from] ConnectionError),
}

/// The operator `A` on `L_a + Q` with `omega_a(u, v) = g(u, A v)`, in the
/// subspace frame `(Y_{a,1}..Y_{a,n}, X_1..X_n)`.
#[derive(Debug, Clone)]
pub struct StructureOperator {
    pub alpha: usize,
    pub a: DMatrix<f64>,
    /// Metric Gram matrix on the subspace, in the same frame.
    pub gram: DMatrix<f64>,
}

/// The almost complex structure on `L_a + Q` and its derived metric.
#[derive(Debug, Clone)]
pub struct AlmostComplex {
    pub alpha: usize,
    pub j: DMatrix<f64>,
    pub ghat: DMatrix<f64>,
}

/// Subspace-to-frame slot map for `L_a + Q`: Y block first, then X block.
fn subspace_slots(spec: &ManifoldSpec, alpha: usize) -> Vec<usize> {
    let chart = spec.chart;
    let mut slots: Vec<usize> = (1..=chart.n).map(|i| chart.y_frame(alpha, i)).collect();
    slots.extend(0..chart.n);
    slots
}

/// `A` solving `omega_a(u, v) = g(u, A v)` on `L_a + Q` at `p`.
///
/// Preconditions checked: the frame metric leaves `L_1..L_k, Q` mutually
/// orthogonal at `p` (to `1e-9`) and restricts positive definite.
pub fn structure_operator(
    spec: &ManifoldSpec,
    alpha: usize,
    p: &Point,
) -> Result<StructureOperator, KaehlerError> {
    let chart = spec.chart;
    let (n, k) = (chart.n, chart.k);
    let dim = chart.dim();
    let full_gram = spec.metric.frame_gram(p, dim)?;

    // Mutual orthogonality of the blocks (including L_a vs Q).
    let block_of = |slot: usize| -> usize {
        if chart.is_x_slot(slot) {
            0
        } else {
            chart.y_block_of(slot).expect("vertical")
        }
    };
    for a in 0..dim {
        for b in 0..dim {
            if block_of(a) != block_of(b) && full_gram[(a, b)].abs() > 1e-9 {
                return Err(KaehlerError::Orthogonality {
                    detail: format!(
                        "g(e_{a}, e_{b}) = {:e} across distinct blocks",
                        full_gram[(a, b)]
                    ),
                });
            }
        }
    }
    let _ = k;

    let slots = subspace_slots(spec, alpha);
    let two_n = 2 * n;
    let mut gram = DMatrix::zeros(two_n, two_n);
    for (r, &sr) in slots.iter().enumerate() {
        for (c, &sc) in slots.iter().enumerate() {
            gram[(r, c)] = full_gram[(sr, sc)];
        }
    }
    // Positive definiteness of the restriction.
    let chol = gram.clone().cholesky().ok_or(KaehlerError::SingularMetric)?;
    let _ = chol;

    let frame = adapted_frame_at(spec, p)?;
    let omega = standard_omega(chart, alpha)?;
    let mut w = DMatrix::zeros(two_n, two_n);
    for (r, &sr) in slots.iter().enumerate() {
        for (c, &sc) in slots.iter().enumerate() {
            w[(r, c)] = eval_two_form(&omega, p, &frame.column(sr), &frame.column(sc))?;
        }
    }

    let a = gram
        .clone()
        .lu()
        .solve(&w)
        .ok_or(KaehlerError::SingularMetric)?;
    Ok(StructureOperator {
        alpha,
        a,
        gram,
    })
}

/// Unique symmetric-positive-definite square root via symmetric
/// eigendecomposition.
pub fn sqrt_spd(m: &DMatrix<f64>) -> Result<DMatrix<f64>, KaehlerError> {
    let sym_defect = (m - m.transpose()).amax();
    let scale = m.amax().max(1.0);
    if sym_defect > 1e-10 * scale {
        return Err(KaehlerError::NotSpd {
            detail: format!("asymmetry {sym_defect:e}"),
        });
    }
    let eig = m.clone().symmetric_eigen();
    let lambda_max = eig.eigenvalues.amax();
    for &l in eig.eigenvalues.iter() {
        if l <= 1e-12 * lambda_max.max(1.0) {
            return Err(KaehlerError::NotSpd {
                detail: format!("eigenvalue {l:e} not positive"),
            });
        }
    }
    let sqrt_diag = DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt));
    Ok(&eig.eigenvectors * sqrt_diag * eig.eigenvectors.transpose())
}

/// `J_a` by polar decomposition of the structure operator, with the derived
/// metric `ghat(u, v) = omega_a(J u, v)`. The defining identities are
/// verified to `1e-10` before returning.
pub fn almost_complex(
    spec: &ManifoldSpec,
    alpha: usize,
    p: &Point,
) -> Result<AlmostComplex, KaehlerError> {
    let op = structure_operator(spec, alpha, p)?;
    let n = spec.chart.n;
    let two_n = 2 * n;

    // Work in a g-orthonormal basis: G = C^T C with C upper triangular, so
    // g-skewness of A becomes plain antisymmetry of C A C^-1.
    let chol = op
        .gram
        .clone()
        .cholesky()
        .ok_or(KaehlerError::SingularMetric)?;
    let c = chol.l().transpose();
    let c_inv = c
        .clone()
        .try_inverse()
        .ok_or(KaehlerError::SingularMetric)?;
    let a_tilde = &c * &op.a * &c_inv;
    let m = &a_tilde * a_tilde.transpose();
    let s = sqrt_spd(&m)?;
    let s_inv = s.try_inverse().ok_or(KaehlerError::NotSpd {
        detail: "sqrt(A A*) not invertible".to_string(),
    })?;
    let j_tilde = s_inv * &a_tilde;
    let j = &c_inv * j_tilde * &c;

    // ghat(u, v) = omega(J u, v) = u^T J^T W v with W = G A.
    let w = &op.gram * &op.a;
    let ghat = j.transpose() * &w;

    let check = |identity: &str, residual: f64| -> Result<(), KaehlerError> {
        if residual > 1e-10 {
            return Err(KaehlerError::PropertyViolation {
                identity: identity.to_string(),
                residual,
            });
        }
        Ok(())
    };
    let id = DMatrix::identity(two_n, two_n);
    check("J^2 = -I", (&j * &j + &id).amax())?;
    // Block swap: J(L_a) = Q and J(Q) = L_a, so both diagonal blocks vanish.
    check("J maps L_a onto Q", j.view((0, 0), (n, n)).amax())?;
    check("J maps Q onto L_a", j.view((n, n), (n, n)).amax())?;
    check("ghat symmetric", (&ghat - ghat.transpose()).amax())?;
    if ghat.clone().cholesky().is_none() {
        return Err(KaehlerError::PropertyViolation {
            identity: "ghat positive definite".to_string(),
            residual: f64::NAN,
        });
    }
    check("omega(u, v) = ghat(u, J v)", (&ghat * &j - &w).amax())?;
    check(
        "ghat(J u, J v) = ghat(u, v)",
        (j.transpose() * &ghat * &j - &ghat).amax(),
    )?;

    Ok(AlmostComplex { alpha, j, ghat })
}

/// Coordinate-basis matrix of the `J_a` field at `q`: the subspace `J` on
/// `L_a + Q`, zero on the other leaf blocks.
pub fn j_field_matrix(
    spec: &ManifoldSpec,
    alpha: usize,
    q: &Point,
) -> Result<DMatrix<f64>, KaehlerError> {
    let chart = spec.chart;
    let dim = chart.dim();
    let ac = almost_complex(spec, alpha, q)?;
    let slots = subspace_slots(spec, alpha);
    let mut j_frame = DMatrix::zeros(dim, dim);
    for (r, &sr) in slots.iter().enumerate() {
        for (c, &sc) in slots.iter().enumerate() {
            j_frame[(sr, sc)] = ac.j[(r, c)];
        }
    }
    let frame = adapted_frame_at(spec, q)?;
    let f = frame.matrix();
    let f_inv = f.clone().try_inverse().expect("unit triangular frame");
    Ok(f * j_frame * f_inv)
}

/// Nijenhuis tensor `N(u, v) = J^2 [u,v] + [Ju, Jv] - J [Ju, v] - J [u, Jv]`
/// of the pointwise `J_a` field, evaluated at `p` for two adapted-frame
/// fields. Brackets of the point-dependent fields use central finite
/// differences with the given step on the coordinate component functions.
pub fn nijenhuis_at_with_step(
    spec: &ManifoldSpec,
    alpha: usize,
    p: &Point,
    u_slot: usize,
    v_slot: usize,
    step: f64,
) -> Result<TangentVector, KaehlerError> {
    let dim = spec.dim();

    let u_field = |q: &Point| -> Result<TangentVector, KaehlerError> {
        Ok(adapted_frame_at(spec, q)?.column(u_slot))
    };
    let v_field = |q: &Point| -> Result<TangentVector, KaehlerError> {
        Ok(adapted_frame_at(spec, q)?.column(v_slot))
    };
    let ju_field = |q: &Point| -> Result<TangentVector, KaehlerError> {
        Ok(j_field_matrix(spec, alpha, q)? * u_field(q)?)
    };
    let jv_field = |q: &Point| -> Result<TangentVector, KaehlerError> {
        Ok(j_field_matrix(spec, alpha, q)? * v_field(q)?)
    };

    // [a, b]^l = sum_m a^m d_m b^l - b^m d_m a^l via central differences.
    let bracket = |a: &dyn Fn(&Point) -> Result<TangentVector, KaehlerError>,
                   b: &dyn Fn(&Point) -> Result<TangentVector, KaehlerError>|
     -> Result<TangentVector, KaehlerError> {
        let a0 = a(p)?;
        let b0 = b(p)?;
        let mut out = DVector::zeros(dim);
        for m in 0..dim {
            let mut plus = p.clone();
            plus[m] += step;
            let mut minus = p.clone();
            minus[m] -= step;
            let da = (a(&plus)? - a(&minus)?) / (2.0 * step);
            let db = (b(&plus)? - b(&minus)?) / (2.0 * step);
            out += &db * a0[m] - &da * b0[m];
        }
        Ok(out)
    };

    let j_at_p = j_field_matrix(spec, alpha, p)?;
    let uv = bracket(&u_field, &v_field)?;
    let jujv = bracket(&ju_field, &jv_field)?;
    let juv = bracket(&ju_field, &v_field)?;
    let ujv = bracket(&u_field, &jv_field)?;
    Ok(&j_at_p * (&j_at_p * uv) + jujv - &j_at_p * juv - &j_at_p * ujv)
}

/// [`nijenhuis_at_with_step`] at the default step `1e-5`.
pub fn nijenhuis_at(
    spec: &ManifoldSpec,
    alpha: usize,
    p: &Point,
    u_slot: usize,
    v_slot: usize,
) -> Result<TangentVector, KaehlerError> {
    nijenhuis_at_with_step(spec, alpha, p, u_slot, v_slot, 1e-5)
}

/// Assemble the global frame metric from the per-alpha derived metrics:
/// `Y_a` blocks from `ghat_a`, the `Q` block and its cross terms from
/// `ghat_1`, zeros across distinct leaf blocks.
fn assembled_ghat_frame(spec: &ManifoldSpec, p: &Point) -> Result<DMatrix<f64>, KaehlerError> {
    let chart = spec.chart;
    let (n, k) = (chart.n, chart.k);
    let dim = chart.dim();
    let mut out = DMatrix::zeros(dim, dim);
    for alpha in 1..=k {
        let ac = almost_complex(spec, alpha, p)?;
        let slots = subspace_slots(spec, alpha);
        for (r, &sr) in slots.iter().enumerate() {
            for (c, &sc) in slots.iter().enumerate() {
                let vertical = r < n || c < n;
                if alpha == 1 || vertical {
                    out[(sr, sc)] = ac.ghat[(r, c)];
                }
            }
        }
    }
    Ok(out)
}

/// Largest deviation between the Levi-Civita coefficients of the assembled
/// `ghat` metric (Koszul formula in coordinates) and the canonical
/// connection, over adapted-frame index triples at `p`.
///
/// Requires a constant metric and a flat spec; flatness is certified by
/// sampling the curvature at 50 seeded points of the default box.
pub fn levi_civita_comparison(spec: &ManifoldSpec, p: &Point) -> Result<f64, KaehlerError> {
    if !spec.metric.is_constant() {
        return Err(KaehlerError::NonConstantMetric);
    }
    let chart = spec.chart;
    let dim = chart.dim();
    let plan = SamplingPlan {
        sample_count: 50,
        ..SamplingPlan::default_for(dim)
    };
    let mut worst = 0.0f64;
    for q in plan.sample_points() {
        worst = worst.max(curvature_at(spec, &q)?.max_abs());
    }
    if worst > 1e-9 {
        return Err(KaehlerError::NotFlat(worst));
    }

    let ghat_frame = assembled_ghat_frame(spec, p)?;
    let jets = spec.t_jets(p)?;
    let frame = adapted_frame_from_jets(chart, &jets);
    let gamma = coeffs_from_jets(chart, &jets, p)?;

    // Coordinate metric g_c = (F^-1)^T Ghat F^-1 as jets, with
    // F^-1[y(a,j), i-1] = t_i^{aj} and unit diagonal.
    let f_inv_entry = |r: usize, c: usize| -> Jet2 {
        if r == c {
            Jet2::constant(1.0, dim)
        } else if !chart.is_x_slot(r) && chart.is_x_slot(c) {
            let off = r - chart.n;
            let (alpha, j) = (off / chart.n + 1, off % chart.n + 1);
            jets.get(c + 1, alpha, j).clone()
        } else {
            Jet2::constant(0.0, dim)
        }
    };
    let mut g_coord = vec![Jet2::constant(0.0, dim); dim * dim];
    for a in 0..dim {
        for b in 0..dim {
            let mut acc = Jet2::constant(0.0, dim);
            for r in 0..dim {
                for s in 0..dim {
                    let scale = ghat_frame[(r, s)];
                    if scale == 0.0 {
                        continue;
                    }
                    acc = acc + (f_inv_entry(r, a) * f_inv_entry(s, b)) * scale;
                }
            }
            g_coord[a * dim + b] = acc;
        }
    }

    let g_values = DMatrix::from_fn(dim, dim, |a, b| g_coord[a * dim + b].value);
    let g_inv = g_values
        .clone()
        .try_inverse()
        .ok_or(KaehlerError::SingularMetric)?;

    // Koszul: LC^l_{mq} = 1/2 g^{lr} (d_m g_{rq} + d_q g_{rm} - d_r g_{mq}).
    let mut lc = vec![0.0; dim * dim * dim];
    for m in 0..dim {
        for q in 0..dim {
            for l in 0..dim {
                let mut acc = 0.0;
                for r in 0..dim {
                    let term = g_coord[r * dim + q].grad[m] + g_coord[r * dim + m].grad[q]
                        - g_coord[m * dim + q].grad[r];
                    acc += g_inv[(l, r)] * term;
                }
                lc[(m * dim + q) * dim + l] = 0.5 * acc;
            }
        }
    }

    // Compare nabla^LC_{e_a} e_b with the canonical coefficients, in frame
    // components.
    let field_jets: Vec<Vec<Jet2>> = (0..dim)
        .map(|a| frame_field_jets(chart, &jets, a))
        .collect();
    let mut deviation = 0.0f64;
    for a in 0..dim {
        let ea = frame.column(a);
        for b in 0..dim {
            let mut cov = DVector::zeros(dim);
            for l in 0..dim {
                let mut acc = field_jets[b][l].directional(&ea);
                for m in 0..dim {
                    if ea[m] == 0.0 {
                        continue;
                    }
                    for q in 0..dim {
                        let eb_q = field_jets[b][q].value;
                        if eb_q == 0.0 {
                            continue;
                        }
                        acc += ea[m] * lc[(m * dim + q) * dim + l] * eb_q;
                    }
                }
                cov[l] = acc;
            }
            let cov_frame = frame.to_frame(&cov);
            for c in 0..dim {
                deviation = deviation.max((cov_frame[c] - gamma.get(a, b, c)).abs());
            }
        }
    }
    Ok(deviation)
}
