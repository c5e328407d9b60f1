//! Temperature softmax and the cross-entropy / distillation losses.
//!
//! The temperature softmax maps logits z to q_i = exp(z_i/T) / sum_j exp(z_j/T);
//! higher T yields a smoother distribution. The distillation loss is the
//! cross-entropy between the teacher's and the student's tempered
//! distributions, with temperature applied on both sides.

use crate::error::{Error, Result};

/// Log clamp floor for cross-entropy; keeps -ln(p) finite.
pub(crate) const LOG_CLAMP: f64 = 1e-12;

/// Strictly positive softmax temperature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Temperature(f64);

impl Temperature {
    pub fn new(t: f64) -> Result<Self> {
        if !t.is_finite() || t <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "temperature must be a positive finite number, got {t}"
            )));
        }
        Ok(Temperature(t))
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// One logit per class; at least two classes, all finite.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitVector(Vec<f64>);

impl LogitVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "logit vector needs at least 2 classes, got {}",
                values.len()
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("non-finite logit".into()));
        }
        Ok(LogitVector(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }
}

/// Entries in [0, 1] summing to 1 within 1e-9.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "probability vector needs at least 2 classes, got {}",
                values.len()
            )));
        }
        if !values.iter().all(|v| v.is_finite() && (0.0..=1.0).contains(v)) {
            return Err(Error::InvalidInput(
                "probability entries must lie in [0, 1]".into(),
            ));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!(
                "probabilities sum to {sum}, expected 1"
            )));
        }
        Ok(ProbabilityVector(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Max-subtracted temperature softmax on raw slices.
pub(crate) fn softmax_t_into(logits: &[f64], t: f64, out: &mut [f64]) {
    debug_assert_eq!(logits.len(), out.len());
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &z) in out.iter_mut().zip(logits) {
        let e = ((z - max) / t).exp();
        *o = e;
        sum += e;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

pub(crate) fn softmax_t_vec(logits: &[f64], t: f64) -> Vec<f64> {
    let mut out = vec![0.0; logits.len()];
    softmax_t_into(logits, t, &mut out);
    out
}

/// Temperature softmax: q_i = exp(z_i/T) / sum_j exp(z_j/T), computed with
/// max subtraction so large logits cannot overflow.
pub fn softmax_t(logits: &LogitVector, temp: Temperature) -> ProbabilityVector {
    ProbabilityVector(softmax_t_vec(logits.values(), temp.get()))
}

pub(crate) fn cross_entropy_raw(target: &[f64], predicted: &[f64]) -> f64 {
    let mut loss = 0.0;
    for (&t, &p) in target.iter().zip(predicted) {
        loss -= t * p.clamp(LOG_CLAMP, 1.0).ln();
    }
    loss
}

/// -sum_i target_i ln(predicted_i), with predicted entries clamped to
/// [1e-12, 1] before the log.
pub fn cross_entropy(target: &ProbabilityVector, predicted: &ProbabilityVector) -> Result<f64> {
    if target.len() != predicted.len() {
        return Err(Error::InvalidInput(format!(
            "cross_entropy length mismatch: {} vs {}",
            target.len(),
            predicted.len()
        )));
    }
    Ok(cross_entropy_raw(target.values(), predicted.values()))
}

/// Shannon entropy of a distribution, -sum p ln p.
pub fn entropy(p: &ProbabilityVector) -> f64 {
    cross_entropy_raw(p.values(), p.values())
}

pub(crate) fn kd_loss_raw(teacher: &[f64], student: &[f64], t: f64, t2_scaling: bool) -> f64 {
    let q_teacher = softmax_t_vec(teacher, t);
    let q_student = softmax_t_vec(student, t);
    let loss = cross_entropy_raw(&q_teacher, &q_student);
    if t2_scaling {
        loss * t * t
    } else {
        loss
    }
}

/// Gradient of `kd_loss_raw` w.r.t. the student logits: (q_student - q_teacher) / T,
/// times T^2 when `t2_scaling` is set. Accumulated into `out` with `scale`.
pub(crate) fn kd_grad_acc(
    teacher: &[f64],
    student: &[f64],
    t: f64,
    t2_scaling: bool,
    scale: f64,
    out: &mut [f64],
) {
    let q_teacher = softmax_t_vec(teacher, t);
    let q_student = softmax_t_vec(student, t);
    let factor = if t2_scaling { t } else { 1.0 / t };
    for ((o, qs), qt) in out.iter_mut().zip(&q_student).zip(&q_teacher) {
        *o += scale * factor * (qs - qt);
    }
}

/// Distillation loss: cross-entropy between the tempered teacher and student
/// distributions. Temperature is applied to both sides.
pub fn kd_loss(teacher: &LogitVector, student: &LogitVector, temp: Temperature) -> Result<f64> {
    if teacher.len() != student.len() {
        return Err(Error::InvalidInput(format!(
            "kd_loss length mismatch: {} vs {}",
            teacher.len(),
            student.len()
        )));
    }
    Ok(kd_loss_raw(
        teacher.values(),
        student.values(),
        temp.get(),
        false,
    ))
}

/// Analytic gradient of `kd_loss` w.r.t. the student logits.
pub fn kd_loss_grad(
    teacher: &LogitVector,
    student: &LogitVector,
    temp: Temperature,
) -> Result<Vec<f64>> {
    if teacher.len() != student.len() {
        return Err(Error::InvalidInput(format!(
            "kd_loss length mismatch: {} vs {}",
            teacher.len(),
            student.len()
        )));
    }
    let mut out = vec![0.0; student.len()];
    kd_grad_acc(
        teacher.values(),
        student.values(),
        temp.get(),
        false,
        1.0,
        &mut out,
    );
    Ok(out)
}

/// Cross-entropy against a hard label: -ln softmax(logits)[label].
pub(crate) fn ce_hard_loss(logits: &[f64], label: usize) -> f64 {
    let p = softmax_t_vec(logits, 1.0);
    -p[label].clamp(LOG_CLAMP, 1.0).ln()
}

/// Gradient of `ce_hard_loss` w.r.t. logits: p - onehot(label), accumulated
/// into `out` with `scale`.
pub(crate) fn ce_hard_grad_acc(logits: &[f64], label: usize, scale: f64, out: &mut [f64]) {
    let p = softmax_t_vec(logits, 1.0);
    for (j, (o, pj)) in out.iter_mut().zip(&p).enumerate() {
        let y = if j == label { 1.0 } else { 0.0 };
        *o += scale * (pj - y);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn logits(v: &[f64]) -> LogitVector {
        LogitVector::new(v.to_vec()).unwrap()
    }

    fn temp(t: f64) -> Temperature {
        Temperature::new(t).unwrap()
    }

    #[test]
    fn softmax_symmetry() {
        let q = softmax_t(&logits(&[0.0, 0.0]), temp(2.0));
        assert!((q.values()[0] - 0.5).abs() < 1e-15);
        assert!((q.values()[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn softmax_analytic_t1() {
        let q = softmax_t(&logits(&[4.0f64.ln(), 0.0]), temp(1.0));
        assert!((q.values()[0] - 0.8).abs() < 1e-12);
        assert!((q.values()[1] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn softmax_analytic_t2() {
        let q = softmax_t(&logits(&[4.0f64.ln(), 0.0]), temp(2.0));
        assert!((q.values()[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((q.values()[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn non_finite_logit_rejected() {
        assert!(LogitVector::new(vec![f64::INFINITY, 0.0]).is_err());
        assert!(LogitVector::new(vec![f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn temperature_must_be_positive() {
        assert!(Temperature::new(0.0).is_err());
        assert!(Temperature::new(-1.0).is_err());
        assert!(Temperature::new(f64::NAN).is_err());
    }

    #[test]
    fn ce_perfect_prediction_is_zero() {
        let t = ProbabilityVector::new(vec![1.0, 0.0]).unwrap();
        let ce = cross_entropy(&t, &t).unwrap();
        assert!(ce.abs() < 1e-12);
    }

    #[test]
    fn ce_uniform_is_ln2() {
        let u = ProbabilityVector::new(vec![0.5, 0.5]).unwrap();
        let ce = cross_entropy(&u, &u).unwrap();
        assert!((ce - 2.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn ce_analytic() {
        let t = ProbabilityVector::new(vec![1.0, 0.0]).unwrap();
        let p = ProbabilityVector::new(vec![0.8, 0.2]).unwrap();
        let ce = cross_entropy(&t, &p).unwrap();
        assert!((ce + 0.8f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn ce_length_mismatch() {
        let t = ProbabilityVector::new(vec![1.0, 0.0]).unwrap();
        let p = ProbabilityVector::new(vec![0.5, 0.3, 0.2]).unwrap();
        assert!(cross_entropy(&t, &p).is_err());
    }

    #[test]
    fn kd_fixed_point_equals_teacher_entropy() {
        let z = logits(&[4.0f64.ln(), 0.0]);
        let loss = kd_loss(&z, &z, temp(1.0)).unwrap();
        let h = -(0.8f64 * 0.8f64.ln() + 0.2 * 0.2f64.ln());
        assert!((loss - h).abs() < 1e-12);
        assert!((h - 0.500402).abs() < 1e-6);
    }

    #[test]
    fn kd_uniform_student_analytic() {
        let loss = kd_loss(&logits(&[4.0f64.ln(), 0.0]), &logits(&[0.0, 0.0]), temp(1.0)).unwrap();
        assert!((loss - 2.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn kd_gradient_matches_finite_differences() {
        let teacher = [1.0, -1.0];
        let student = [0.3, 0.7];
        let t = 2.0;
        let grad = kd_loss_grad(
            &logits(&teacher),
            &logits(&student),
            temp(t),
        )
        .unwrap();
        let eps = 1e-6;
        for j in 0..student.len() {
            let mut plus = student.to_vec();
            let mut minus = student.to_vec();
            plus[j] += eps;
            minus[j] -= eps;
            let num = (kd_loss_raw(&teacher, &plus, t, false)
                - kd_loss_raw(&teacher, &minus, t, false))
                / (2.0 * eps);
            let rel = (grad[j] - num).abs() / num.abs().max(1e-8);
            assert!(rel < 1e-6, "coord {j}: analytic {} vs fd {num}", grad[j]);
        }
    }

    #[test]
    fn kd_gradient_zero_at_fixed_point() {
        let z = logits(&[0.4, -0.2, 1.1]);
        let g = kd_loss_grad(&z, &z, temp(2.0)).unwrap();
        let norm: f64 = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm < 1e-12);
    }

    #[test]
    fn t2_scaling_multiplies_loss_and_grad() {
        let teacher = [0.9, -0.4, 0.1];
        let student = [0.0, 0.3, -0.2];
        let t = 3.0;
        let base = kd_loss_raw(&teacher, &student, t, false);
        let scaled = kd_loss_raw(&teacher, &student, t, true);
        assert!((scaled - base * t * t).abs() < 1e-12);
        let mut g = vec![0.0; 3];
        let mut g2 = vec![0.0; 3];
        kd_grad_acc(&teacher, &student, t, false, 1.0, &mut g);
        kd_grad_acc(&teacher, &student, t, true, 1.0, &mut g2);
        for (a, b) in g.iter().zip(&g2) {
            assert!((b - a * t * t).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn softmax_normalizes_and_bounds(v in proptest::collection::vec(-50.0..50.0f64, 2..8),
                                         t in 0.1..10.0f64) {
            let q = softmax_t_vec(&v, t);
            let sum: f64 = q.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-9);
            prop_assert!(q.iter().all(|&p| p > 0.0 && p < 1.0));
        }

        #[test]
        fn softmax_shift_invariant(v in proptest::collection::vec(-20.0..20.0f64, 2..6),
                                   c in -10.0..10.0f64, t in 0.5..5.0f64) {
            let shifted: Vec<f64> = v.iter().map(|z| z + c).collect();
            let a = softmax_t_vec(&v, t);
            let b = softmax_t_vec(&shifted, t);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn softmax_temperature_rescales_logits(v in proptest::collection::vec(-20.0..20.0f64, 2..6),
                                               t in 0.5..8.0f64) {
            let scaled: Vec<f64> = v.iter().map(|z| z / t).collect();
            let a = softmax_t_vec(&v, t);
            let b = softmax_t_vec(&scaled, 1.0);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn gibbs_inequality(p_raw in proptest::collection::vec(0.01..1.0f64, 3),
                            q_raw in proptest::collection::vec(0.01..1.0f64, 3)) {
            let ps: f64 = p_raw.iter().sum();
            let qs: f64 = q_raw.iter().sum();
            let p: Vec<f64> = p_raw.iter().map(|x| x / ps).collect();
            let q: Vec<f64> = q_raw.iter().map(|x| x / qs).collect();
            let ce_pq = cross_entropy_raw(&p, &q);
            let ce_pp = cross_entropy_raw(&p, &p);
            prop_assert!(ce_pq >= ce_pp - 1e-12);
        }
    }

    #[test]
    fn high_temperature_approaches_uniform() {
        let v = [3.0, -2.0, 0.5, 1.0];
        let q = softmax_t_vec(&v, 1e6);
        for &p in &q {
            assert!((p - 0.25).abs() < 1e-4);
        }
    }
}
