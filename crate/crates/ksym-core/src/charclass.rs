//! The curvature 2-form matrix, wedge powers, and trace-power forms, all in
//! an exact exterior-algebra representation: a form of degree `d` is a
//! coefficient table over strictly increasing index tuples of coordinate
//! differentials, so a wedge power that exceeds the available `dx` slots
//! vanishes identically, not approximately.
//!
//! The `1/2` two-form convention rides inside the coefficients: evaluation
//! is the alternating sum without combinatorial factors, matching the
//! two-form evaluation elsewhere in the crate, and the wedge is the plain
//! shuffle product on that representation.

use std::collections::BTreeMap;

use nalgebra::DVector;
use serde::Serialize;
use thiserror::Error;

use crate::chart::{ChartSpec, ManifoldSpec, Point};
use crate::connection::{curvature_at, ConnectionError};
use crate::expr::EvalError;

#[derive(Debug, Clone, Error)]
pub enum CharClassError {
    #[error("wedge or trace power must be positive")]
    DegreeOverflow,
    #[error("curvature coefficient of size {value:e} on the forbidden slot d{slot_a} ^ d{slot_b}")]
    StructureViolation {
        slot_a: String,
        slot_b: String,
        value: f64,
    },
    #[error(transparent)]
    Connection(#[from] ConnectionError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// An alternating form of fixed degree at a point: coefficients over
/// strictly increasing tuples of coordinate indices.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FormValue {
    pub degree: usize,
    /// Strictly increasing index tuples with nonzero coefficients.
    #[serde(serialize_with = "serialize_coeffs")]
    pub coeffs: BTreeMap<Vec<u8>, f64>,
}

fn serialize_coeffs<S: serde::Serializer>(
    coeffs: &BTreeMap<Vec<u8>, f64>,
    serializer: S,
) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    #[derive(Serialize)]
    struct Term<'a> {
        slots: &'a [u8],
        coeff: f64,
    }
    let mut seq = serializer.serialize_seq(Some(coeffs.len()))?;
    for (slots, &coeff) in coeffs {
        seq.serialize_element(&Term { slots, coeff })?;
    }
    seq.end()
}

impl FormValue {
    pub fn zero(degree: usize) -> FormValue {
        FormValue {
            degree,
            coeffs: BTreeMap::new(),
        }
    }

    /// Adds `value` on the (not necessarily sorted) index tuple, with the
    /// sign of the sorting permutation; a repeated index contributes nothing.
    pub fn add_term(&mut self, indices: &[u8], value: f64) {
        debug_assert_eq!(indices.len(), self.degree);
        if value == 0.0 {
            return;
        }
        let mut sorted: Vec<u8> = indices.to_vec();
        // Insertion sort, counting inversions for the sign.
        let mut sign = 1.0;
        for i in 1..sorted.len() {
            let mut j = i;
            while j > 0 && sorted[j - 1] > sorted[j] {
                sorted.swap(j - 1, j);
                sign = -sign;
                j -= 1;
            }
        }
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return;
        }
        let slot = self.coeffs.entry(sorted).or_insert(0.0);
        *slot += sign * value;
        if *slot == 0.0 {
            let key: Vec<u8> = indices.to_vec();
            let mut key = key;
            key.sort_unstable();
            self.coeffs.remove(&key);
        }
    }

    pub fn scale(&self, factor: f64) -> FormValue {
        if factor == 0.0 {
            return FormValue::zero(self.degree);
        }
        FormValue {
            degree: self.degree,
            coeffs: self
                .coeffs
                .iter()
                .map(|(k, v)| (k.clone(), v * factor))
                .collect(),
        }
    }

    pub fn add(&self, other: &FormValue) -> FormValue {
        debug_assert_eq!(self.degree, other.degree);
        let mut out = self.clone();
        for (k, v) in &other.coeffs {
            let slot = out.coeffs.entry(k.clone()).or_insert(0.0);
            *slot += v;
            if *slot == 0.0 {
                out.coeffs.remove(k);
            }
        }
        out
    }

    /// Shuffle-product wedge; exact on the coefficient representation.
    pub fn wedge(&self, other: &FormValue) -> FormValue {
        let mut out = FormValue::zero(self.degree + other.degree);
        let mut scratch = Vec::with_capacity(out.degree);
        for (ka, va) in &self.coeffs {
            for (kb, vb) in &other.coeffs {
                scratch.clear();
                scratch.extend_from_slice(ka);
                scratch.extend_from_slice(kb);
                out.add_term(&scratch, va * vb);
            }
        }
        out
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.values().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Evaluation on coordinate-basis vectors via the determinant expansion.
    pub fn eval(&self, vectors: &[DVector<f64>]) -> f64 {
        debug_assert_eq!(vectors.len(), self.degree);
        let d = self.degree;
        let mut acc = 0.0;
        for (tuple, &c) in &self.coeffs {
            // det of the d x d minor picked by the tuple.
            let mut minor = nalgebra::DMatrix::zeros(d, d);
            for (r, &idx) in tuple.iter().enumerate() {
                for (col, v) in vectors.iter().enumerate() {
                    minor[(r, col)] = v[idx as usize];
                }
            }
            acc += c * minor.determinant();
        }
        acc
    }
}

/// A matrix of forms of common degree over adapted-frame indices.
#[derive(Debug, Clone, Serialize)]
pub struct MatrixOfForms {
    pub dim: usize,
    pub degree: usize,
    /// Row-major `dim x dim` entries.
    pub entries: Vec<FormValue>,
}

impl MatrixOfForms {
    pub fn zero(dim: usize, degree: usize) -> MatrixOfForms {
        MatrixOfForms {
            dim,
            degree,
            entries: vec![FormValue::zero(degree); dim * dim],
        }
    }

    pub fn get(&self, row: usize, col: usize) -> &FormValue {
        &self.entries[row * self.dim + col]
    }

    pub fn get_mut(&mut self, row: usize, col: usize) -> &mut FormValue {
        &mut self.entries[row * self.dim + col]
    }

    /// Matrix product with the wedge as scalar multiplication.
    pub fn wedge_mul(&self, other: &MatrixOfForms) -> MatrixOfForms {
        debug_assert_eq!(self.dim, other.dim);
        let mut out = MatrixOfForms::zero(self.dim, self.degree + other.degree);
        for r in 0..self.dim {
            for c in 0..self.dim {
                let mut acc = FormValue::zero(out.degree);
                for m in 0..self.dim {
                    let term = self.get(r, m).wedge(other.get(m, c));
                    acc = acc.add(&term);
                }
                *out.get_mut(r, c) = acc;
            }
        }
        out
    }

    pub fn trace(&self) -> FormValue {
        let mut acc = FormValue::zero(self.degree);
        for r in 0..self.dim {
            acc = acc.add(self.get(r, r));
        }
        acc
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.entries
            .iter()
            .map(FormValue::max_abs_coeff)
            .fold(0.0, f64::max)
    }
}

/// The curvature 2-form matrix at `p`:
/// `Omega^a_b(u, v) = (1/2) (R(u, v) e_b)^a` expanded in coordinate
/// differentials. Every coefficient must sit on a `dx_i ^ dy` slot;
/// coefficients elsewhere above `1e-10` are a structure violation, and the
/// sub-tolerance remainder on forbidden slots is dropped so the returned
/// matrix carries the slot structure exactly.
pub fn curvature_two_form_at(
    spec: &ManifoldSpec,
    p: &Point,
) -> Result<MatrixOfForms, CharClassError> {
    let chart = spec.chart;
    let dim = chart.dim();
    let r = curvature_at(spec, p)?;
    let t_values = spec.t_values(p)?;
    let t_at = |i: usize, alpha: usize, j: usize| -> f64 {
        t_values[((i - 1) * chart.k + (alpha - 1)) * chart.n + (j - 1)]
    };

    // Coordinate vectors in frame components: d/dx_i = X_i + sum t_i^{aj} Y_{aj},
    // d/dy = Y.
    let coord_in_frame = |l: usize| -> DVector<f64> {
        let mut w = DVector::zeros(dim);
        w[l] = 1.0;
        if chart.is_x_slot(l) {
            for alpha in 1..=chart.k {
                for j in 1..=chart.n {
                    w[chart.y_frame(alpha, j)] = t_at(l + 1, alpha, j);
                }
            }
        }
        w
    };
    let coords_in_frame: Vec<DVector<f64>> = (0..dim).map(coord_in_frame).collect();

    let slot_name = |l: usize| -> String {
        if chart.is_x_slot(l) {
            format!("x{}", l + 1)
        } else {
            format!("y{}", l + 1 - chart.n)
        }
    };

    let mut out = MatrixOfForms::zero(dim, 2);
    for l in 0..dim {
        for m in (l + 1)..dim {
            let allowed = chart.is_x_slot(l) != chart.is_x_slot(m);
            for c in 0..dim {
                let image = r.apply(&coords_in_frame[l], &coords_in_frame[m], c);
                for a in 0..dim {
                    let value = 0.5 * image[a];
                    if value == 0.0 {
                        continue;
                    }
                    if !allowed {
                        if value.abs() > 1e-10 {
                            return Err(CharClassError::StructureViolation {
                                slot_a: slot_name(l),
                                slot_b: slot_name(m),
                                value,
                            });
                        }
                        // Sub-tolerance rounding noise on a forbidden slot.
                        continue;
                    }
                    out.get_mut(a, c).add_term(&[l as u8, m as u8], value);
                }
            }
        }
    }
    Ok(out)
}

/// Largest coefficient of the matrix wedge power `Omega^h` at `p`. Exactly
/// zero whenever `h > n` thanks to the slot structure (each factor carries
/// one `dx`, and there are only `n` of them).
pub fn wedge_power_residual(
    spec: &ManifoldSpec,
    p: &Point,
    h: usize,
) -> Result<f64, CharClassError> {
    if h == 0 {
        return Err(CharClassError::DegreeOverflow);
    }
    let omega = curvature_two_form_at(spec, p)?;
    let mut power = omega.clone();
    for _ in 1..h {
        power = omega.wedge_mul(&power);
    }
    Ok(power.max_abs_coeff())
}

/// Largest coefficient of the trace-power form `tr(Omega^m)` at `p`. For
/// `2m > 2n` the value is the vanishing residual; for `2m <= 2n` it is
/// informational.
pub fn invariant_polynomial_residual(
    spec: &ManifoldSpec,
    p: &Point,
    m: usize,
) -> Result<f64, CharClassError> {
    if m == 0 {
        return Err(CharClassError::DegreeOverflow);
    }
    Ok(trace_power(spec, p, m)?.max_abs_coeff())
}

/// The trace-power form `tr(Omega^m)` itself.
pub fn trace_power(spec: &ManifoldSpec, p: &Point, m: usize) -> Result<FormValue, CharClassError> {
    if m == 0 {
        return Err(CharClassError::DegreeOverflow);
    }
    let omega = curvature_two_form_at(spec, p)?;
    let mut power = omega.clone();
    for _ in 1..m {
        power = omega.wedge_mul(&power);
    }
    Ok(power.trace())
}

/// Chart accessor used by the report assembly.
pub fn form_chart(spec: &ManifoldSpec) -> ChartSpec {
    spec.chart
}
