//! Decay models and a-priori error bounds.
//!
//! A matrix `f(A)` decays exponentially with constants `(C, q)` when
//! `|[f(A)]_ij| <= C q^{d(i,j)}`. Every bound here is a closed form in
//! `ε = C q^d`, the size of the neglected entries.

use crate::{Error, Result};

/// Crouzeix-type constant: 1 for normal matrices, `1 + √2` otherwise.
pub fn crouzeix_constant(normal: bool) -> f64 {
    if normal {
        1.0
    } else {
        1.0 + std::f64::consts::SQRT_2
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayModel {
    pub c: f64,
    pub q: f64,
    pub k: f64,
    /// The decay follows from polynomial approximation of `f` on a set
    /// containing the numerical range, which some bounds require.
    pub from_polynomial_property: bool,
    /// Constants were fitted to data; bounds are estimates, not guarantees.
    pub fitted: bool,
}

impl DecayModel {
    pub fn new(c: f64, q: f64, k: f64, from_polynomial_property: bool) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidArgument(format!("decay constant C must be positive, got {c}")));
        }
        if !(0.0..1.0).contains(&q) {
            return Err(Error::InvalidArgument(format!("decay rate q must lie in [0, 1), got {q}")));
        }
        if !(k.is_finite() && k >= 1.0) {
            return Err(Error::InvalidArgument(format!("constant K must be at least 1, got {k}")));
        }
        Ok(Self { c, q, k, from_polynomial_property, fitted: false })
    }

    /// Replaces `C`, keeping everything else.
    pub fn with_c(self, c: f64) -> Result<Self> {
        let mut m = Self::new(c, self.q, self.k, self.from_polynomial_property)?;
        m.fitted = self.fitted;
        Ok(m)
    }

    /// `ε = C q^d`.
    pub fn epsilon(&self, d: usize) -> f64 {
        self.c * pow(self.q, d)
    }

    /// CSV label of bounds computed from this model.
    pub fn bound_label(&self) -> &'static str {
        if self.fitted {
            "estimate"
        } else {
            "rigorous"
        }
    }
}

fn pow(q: f64, d: usize) -> f64 {
    q.powi(i32::try_from(d).unwrap_or(i32::MAX))
}

/// `q = (√κ − 1)/(√κ + 1)` for `κ = b/a`.
fn condition_rate(a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::Domain(format!("spectrum lower bound must be positive, got {a}")));
    }
    if !(b >= a && b.is_finite()) {
        return Err(Error::InvalidArgument(format!("spectrum interval [{a}, {b}] is empty")));
    }
    let sk = (b / a).sqrt();
    Ok((sk - 1.0) / (sk + 1.0))
}

/// Inverse of a Hermitian positive definite matrix with spectrum in
/// `[a, b]`: `q = (√κ − 1)/(√κ + 1)`, `C = 1/a`, `K = 1`. Use
/// [`DecayModel::with_c`] to substitute a different constant.
pub fn decay_model_inverse_hpd(a: f64, b: f64) -> Result<DecayModel> {
    let q = condition_rate(a, b)?;
    DecayModel::new(1.0 / a, q, 1.0, true)
}

/// Inverse square root of `tridiag(−1, 4, −1)` (spectrum in `[2, 6]`):
/// `C = √2` and the same `q` as the inverse. This decay is not derived from a
/// polynomial approximation property.
pub fn inverse_sqrt_preset() -> DecayModel {
    let q = condition_rate(2.0, 6.0).expect("valid interval");
    DecayModel::new(std::f64::consts::SQRT_2, q, 1.0, false).expect("valid constants")
}

/// Parameters of one bound. All counts must be positive.
#[derive(Clone, Debug, PartialEq)]
pub enum BoundRequest {
    /// `Σ_ℓ |V_ℓ|(|V_ℓ| − 1) ε`.
    TraceGeneric { class_sizes: Vec<usize>, d: usize },
    /// `2n ε / (1 − q^d)` for a banded matrix.
    TraceBanded { n: usize, d: usize },
    /// `2 C D n Li_{1−D}(q^d)` on a D-dimensional lattice.
    TraceLattice { n: usize, d: usize, dim: usize },
    /// `2 K n ε`; needs the polynomial property.
    TracePoly { n: usize, d: usize },
    /// `2 K √n ε` for the Frobenius norm; needs the polynomial property.
    SparseFrobeniusPoly { n: usize, d: usize },
    /// `n max(γ − 1, 1) ε` for the 1-, 2- and Frobenius norms, `γ = max_ℓ |V_ℓ|`.
    /// The floor of 1 covers the truncated entries when every class is a
    /// singleton.
    SparseNormsGeneric { n: usize, d: usize, gamma: usize },
    /// `2 β q (2 + 2dβ)/(1 − q) ε` for the 1-norm of a banded matrix.
    Sparse1NormBanded { d: usize, beta: usize },
    /// `2 K C √n (q^d + q^{s−1})`: probing plus Arnoldi error, Frobenius norm.
    KrylovCombinedFrobenius { n: usize, d: usize, s: usize },
    /// `2 K C n q^d`.
    KrylovTrace { n: usize, d: usize },
}

impl BoundRequest {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::TraceGeneric { .. } => "trace_generic",
            Self::TraceBanded { .. } => "trace_banded",
            Self::TraceLattice { .. } => "trace_lattice",
            Self::TracePoly { .. } => "trace_poly",
            Self::SparseFrobeniusPoly { .. } => "sparse_frobenius_poly",
            Self::SparseNormsGeneric { .. } => "sparse_norms_generic",
            Self::Sparse1NormBanded { .. } => "sparse_1norm_banded",
            Self::KrylovCombinedFrobenius { .. } => "krylov_combined_frobenius",
            Self::KrylovTrace { .. } => "krylov_trace",
        }
    }

    fn distance(&self) -> usize {
        match *self {
            Self::TraceGeneric { d, .. }
            | Self::TraceBanded { d, .. }
            | Self::TraceLattice { d, .. }
            | Self::TracePoly { d, .. }
            | Self::SparseFrobeniusPoly { d, .. }
            | Self::SparseNormsGeneric { d, .. }
            | Self::Sparse1NormBanded { d, .. }
            | Self::KrylovCombinedFrobenius { d, .. }
            | Self::KrylovTrace { d, .. } => d,
        }
    }

    fn check(&self) -> Result<()> {
        let positive = |name: &str, v: usize| {
            if v == 0 {
                Err(Error::InvalidArgument(format!("{}: parameter {name} must be positive", self.kind())))
            } else {
                Ok(())
            }
        };
        positive("d", self.distance())?;
        match self {
            Self::TraceGeneric { class_sizes, .. } => {
                if class_sizes.is_empty() {
                    return Err(Error::InvalidArgument("trace_generic: class sizes missing".into()));
                }
                class_sizes.iter().try_for_each(|&v| positive("class size", v))
            }
            Self::TraceBanded { n, .. }
            | Self::TracePoly { n, .. }
            | Self::SparseFrobeniusPoly { n, .. }
            | Self::KrylovTrace { n, .. } => positive("n", *n),
            Self::TraceLattice { n, dim, .. } => positive("n", *n).and(positive("D", *dim)),
            Self::SparseNormsGeneric { n, gamma, .. } => positive("n", *n).and(positive("gamma", *gamma)),
            Self::Sparse1NormBanded { beta, .. } => positive("beta", *beta),
            Self::KrylovCombinedFrobenius { n, s, .. } => positive("n", *n).and(positive("s", *s)),
        }
    }
}

/// Value of the requested bound under `model`.
pub fn evaluate_bound(model: &DecayModel, req: &BoundRequest) -> Result<f64> {
    req.check()?;
    if matches!(req, BoundRequest::TracePoly { .. } | BoundRequest::SparseFrobeniusPoly { .. })
        && !model.from_polynomial_property
    {
        return Err(Error::InvalidArgument(format!(
            "{} needs a decay model derived from a polynomial approximation property",
            req.kind()
        )));
    }
    let d = req.distance();
    if model.q == 0.0 {
        log::warn!("q = 0: the {} bound vanishes; exactness is only guaranteed for polynomial f", req.kind());
    }
    let (c, q, k) = (model.c, model.q, model.k);
    let eps = model.epsilon(d);
    let qd = pow(q, d);
    let value = match *req {
        BoundRequest::TraceGeneric { ref class_sizes, .. } => {
            class_sizes.iter().map(|&v| (v * (v - 1)) as f64).sum::<f64>() * eps
        }
        BoundRequest::TraceBanded { n, .. } => eps * 2.0 * n as f64 / (1.0 - qd),
        BoundRequest::TraceLattice { n, dim, .. } => 2.0 * c * dim as f64 * n as f64 * polylog_neg_int(dim - 1, qd)?,
        BoundRequest::TracePoly { n, .. } => 2.0 * k * n as f64 * eps,
        BoundRequest::SparseFrobeniusPoly { n, .. } => 2.0 * k * (n as f64).sqrt() * eps,
        BoundRequest::SparseNormsGeneric { n, gamma, .. } => n as f64 * (gamma - 1).max(1) as f64 * eps,
        BoundRequest::Sparse1NormBanded { beta, .. } => {
            let beta = beta as f64;
            2.0 * beta * q * (2.0 + 2.0 * d as f64 * beta) / (1.0 - q) * eps
        }
        BoundRequest::KrylovCombinedFrobenius { n, s, .. } => 2.0 * k * c * (n as f64).sqrt() * (qd + pow(q, s - 1)),
        BoundRequest::KrylovTrace { n, .. } => 2.0 * k * c * n as f64 * qd,
    };
    Ok(value)
}

/// Eulerian numbers `A(s, k)` for `k = 0..s` (empty for `s = 0`).
pub fn eulerian_numbers(s: usize) -> Vec<f64> {
    let mut row = vec![1.0];
    if s == 0 {
        return Vec::new();
    }
    for m in 2..=s {
        let mut next = vec![0.0; m];
        for (k, slot) in next.iter_mut().enumerate() {
            let keep = if k < row.len() { (k + 1) as f64 * row[k] } else { 0.0 };
            let shift = if k >= 1 { (m - k) as f64 * row[k - 1] } else { 0.0 };
            *slot = keep + shift;
        }
        row = next;
    }
    row
}

/// `Li_{−s}(z) = Σ_{i≥1} i^s z^i = p_s(z)/(1 − z)^{s+1}` with
/// `p_0(z) = z` and `p_s(z) = Σ_k A(s,k) z^{k+1}`.
pub fn polylog_neg_int(s: usize, z: f64) -> Result<f64> {
    if !z.is_finite() || z >= 1.0 || z <= -1.0 {
        return Err(Error::Domain(format!("Li_-{s}(z) needs |z| < 1, got {z}")));
    }
    let numerator = if s == 0 { z } else { eulerian_numbers(s).iter().rev().fold(0.0, |acc, &a| acc * z + a) * z };
    Ok(numerator / (1.0 - z).powi(s as i32 + 1))
}

/// Entries below this magnitude are ignored when fitting.
pub const FIT_FLOOR: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayFit {
    pub model: DecayModel,
    /// The raw rate was at least 1 and was pulled below 1.
    pub clamped: bool,
    pub points_used: usize,
}

fn clamp_rate(q: f64) -> (f64, bool) {
    const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;
    if q >= 1.0 || q.is_nan() {
        log::warn!("fitted decay rate {q} is not below 1; clamping");
        (BELOW_ONE, true)
    } else {
        (q.max(0.0), false)
    }
}

fn usable_points(magnitudes: &[f64], distances: &[usize]) -> Result<Vec<(usize, f64)>> {
    if magnitudes.len() != distances.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} magnitudes but {} distances",
            magnitudes.len(),
            distances.len()
        )));
    }
    let points: Vec<(usize, f64)> = distances
        .iter()
        .zip(magnitudes)
        .filter(|(_, &m)| m.is_finite() && m.abs() > FIT_FLOOR)
        .map(|(&d, &m)| (d, m.abs()))
        .collect();
    let first = points.first().map(|p| p.0);
    if !points.iter().any(|p| Some(p.0) != first) {
        return Err(Error::Fit(format!("need entries above {FIT_FLOOR} at two or more distinct distances")));
    }
    Ok(points)
}

/// Least-squares fit of `log|x| = log C + δ log q` over entries above
/// [`FIT_FLOOR`]. The result is flagged as fitted and not polynomial.
pub fn fit_decay_model(magnitudes: &[f64], distances: &[usize], normal: bool) -> Result<DecayFit> {
    let points = usable_points(magnitudes, distances)?;
    let m = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0 as f64).sum::<f64>() / m;
    let mean_y = points.iter().map(|p| p.1.ln()).sum::<f64>() / m;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(d, v) in &points {
        let dx = d as f64 - mean_x;
        sxy += dx * (v.ln() - mean_y);
        sxx += dx * dx;
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let (q, clamped) = clamp_rate(slope.exp());
    let mut model = DecayModel::new(intercept.exp(), q, crouzeix_constant(normal), false)?;
    model.fitted = true;
    Ok(DecayFit { model, clamped, points_used: points.len() })
}

const ENVELOPE_SLACK: f64 = 1e-12;

/// Envelope fit that majorizes every sample: `M(δ)` is the largest magnitude
/// at distance `δ`, `q` the largest per-step ratio between consecutive
/// distances with `M(δ)` above [`FIT_FLOOR`], and `C = max_δ M(δ)/q^δ`.
pub fn fit_decay_envelope(magnitudes: &[f64], distances: &[usize], normal: bool) -> Result<DecayFit> {
    let points = usable_points(magnitudes, distances)?;
    let top = distances.iter().copied().max().unwrap_or(0);
    let mut envelope = vec![0.0f64; top + 1];
    for (&d, &v) in distances.iter().zip(magnitudes) {
        envelope[d] = envelope[d].max(v.abs());
    }
    let present: Vec<usize> = (0..=top).filter(|&d| envelope[d] > FIT_FLOOR).collect();
    let raw = present
        .windows(2)
        .map(|w| (envelope[w[1]] / envelope[w[0]]).powf(1.0 / (w[1] - w[0]) as f64))
        .fold(0.0, f64::max);
    let (q, clamped) = clamp_rate(raw);
    let c = envelope
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 0.0)
        .map(|(d, &v)| if q > 0.0 { v / q.powi(d as i32) } else { v })
        .fold(0.0, f64::max);
    // Relative slack so C q^δ still majorizes the tight samples after rounding.
    let c = c * (1.0 + ENVELOPE_SLACK);
    let mut model = DecayModel::new(c, q, crouzeix_constant(normal), false)?;
    model.fitted = true;
    Ok(DecayFit { model, clamped, points_used: points.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q3() -> f64 {
        (3f64.sqrt() - 1.0) / (3f64.sqrt() + 1.0)
    }

    fn series(s: usize, z: f64, terms: usize) -> f64 {
        (1..=terms).map(|i| (i as f64).powi(s as i32) * z.powi(i as i32)).sum()
    }

    #[test]
    fn trace_poly_example() {
        let m = decay_model_inverse_hpd(2.0, 6.0).unwrap();
        let v = evaluate_bound(&m, &BoundRequest::TracePoly { n: 1000, d: 5 }).unwrap();
        let expected = 2.0 * 1000.0 * 0.5 * q3().powi(5);
        assert!((v - expected).abs() < 1e-12);
        assert!((v - 1.381).abs() < 1e-3, "{v}");
    }

    #[test]
    fn inverse_hpd_models() {
        let m = decay_model_inverse_hpd(2.0, 6.0).unwrap();
        assert!((m.q - 0.2679).abs() < 1e-4);
        assert_eq!(m.c, 0.5);
        let m2 = decay_model_inverse_hpd(4.0, 12.0).unwrap();
        assert!((m2.q - m.q).abs() < 1e-15);
        assert_eq!(m2.c, 0.25);
        let m3 = decay_model_inverse_hpd(3.0, 3.0).unwrap();
        assert_eq!((m3.q, m3.c), (0.0, 1.0 / 3.0));
        assert!(matches!(decay_model_inverse_hpd(0.0, 1.0), Err(Error::Domain(_))));
        assert_eq!(m.with_c(7.0).unwrap().c, 7.0);
    }

    #[test]
    fn inverse_sqrt_preset_is_not_polynomial() {
        let m = inverse_sqrt_preset();
        assert_eq!(m.c, std::f64::consts::SQRT_2);
        assert!(!m.from_polynomial_property);
        assert!(evaluate_bound(&m, &BoundRequest::TracePoly { n: 10, d: 2 }).is_err());
        assert!(evaluate_bound(&m, &BoundRequest::SparseFrobeniusPoly { n: 10, d: 2 }).is_err());
    }

    #[test]
    fn banded_trace_vanishes_for_large_d() {
        let m = decay_model_inverse_hpd(2.0, 6.0).unwrap();
        let v = evaluate_bound(&m, &BoundRequest::TraceBanded { n: 1000, d: 400 }).unwrap();
        assert!(v < 1e-200);
    }

    #[test]
    fn lattice_d1_agrees_with_banded() {
        let m = decay_model_inverse_hpd(2.0, 6.0).unwrap();
        for d in 1..12 {
            let a = evaluate_bound(&m, &BoundRequest::TraceLattice { n: 500, d, dim: 1 }).unwrap();
            let b = evaluate_bound(&m, &BoundRequest::TraceBanded { n: 500, d }).unwrap();
            assert!((a - b).abs() <= 1e-13 * b.max(1e-300), "d={d}: {a} vs {b}");
        }
    }

    #[test]
    fn banded_over_poly_ratio() {
        let m = decay_model_inverse_hpd(2.0, 6.0).unwrap();
        for d in 1..10 {
            let a = evaluate_bound(&m, &BoundRequest::TraceBanded { n: 77, d }).unwrap();
            let b = evaluate_bound(&m, &BoundRequest::TracePoly { n: 77, d }).unwrap();
            assert!((a / b - 1.0 / (1.0 - m.q.powi(d as i32))).abs() < 1e-13);
        }
    }

    #[test]
    fn remaining_formulas() {
        let m = DecayModel::new(2.0, 0.5, 1.0 + std::f64::consts::SQRT_2, true).unwrap();
        let eps = 2.0 * 0.125;
        let k = m.k;
        let close = |a: f64, b: f64| assert!((a - b).abs() <= 1e-14 * b.abs(), "{a} vs {b}");
        close(evaluate_bound(&m, &BoundRequest::TraceGeneric { class_sizes: vec![3, 2, 1], d: 3 }).unwrap(), 8.0 * eps);
        close(evaluate_bound(&m, &BoundRequest::SparseFrobeniusPoly { n: 16, d: 3 }).unwrap(), 2.0 * k * 4.0 * eps);
        close(evaluate_bound(&m, &BoundRequest::SparseNormsGeneric { n: 10, d: 3, gamma: 4 }).unwrap(), 30.0 * eps);
        close(evaluate_bound(&m, &BoundRequest::SparseNormsGeneric { n: 10, d: 3, gamma: 1 }).unwrap(), 10.0 * eps);
        close(
            evaluate_bound(&m, &BoundRequest::Sparse1NormBanded { d: 3, beta: 2 }).unwrap(),
            2.0 * 2.0 * 0.5 * 14.0 / 0.5 * eps,
        );
        close(
            evaluate_bound(&m, &BoundRequest::KrylovCombinedFrobenius { n: 9, d: 3, s: 2 }).unwrap(),
            2.0 * k * 2.0 * 3.0 * (0.125 + 0.5),
        );
        close(evaluate_bound(&m, &BoundRequest::KrylovTrace { n: 9, d: 3 }).unwrap(), 2.0 * k * 2.0 * 9.0 * 0.125);
    }

    #[test]
    fn zero_rate_gives_zero_bound() {
        let m = DecayModel::new(1.0, 0.0, 1.0, true).unwrap();
        assert_eq!(evaluate_bound(&m, &BoundRequest::TracePoly { n: 10, d: 1 }).unwrap(), 0.0);
        assert_eq!(evaluate_bound(&m, &BoundRequest::TraceLattice { n: 10, d: 1, dim: 3 }).unwrap(), 0.0);
    }

    #[test]
    fn missing_parameters_are_rejected() {
        let m = decay_model_inverse_hpd(2.0, 6.0).unwrap();
        assert!(evaluate_bound(&m, &BoundRequest::TraceBanded { n: 0, d: 2 }).is_err());
        assert!(evaluate_bound(&m, &BoundRequest::TraceBanded { n: 5, d: 0 }).is_err());
        assert!(evaluate_bound(&m, &BoundRequest::TraceGeneric { class_sizes: vec![], d: 2 }).is_err());
        assert!(DecayModel::new(1.0, 1.0, 1.0, true).is_err());
        assert!(DecayModel::new(-1.0, 0.5, 1.0, true).is_err());
    }

    #[test]
    fn eulerian_rows() {
        assert_eq!(eulerian_numbers(1), vec![1.0]);
        assert_eq!(eulerian_numbers(3), vec![1.0, 4.0, 1.0]);
        assert_eq!(eulerian_numbers(4), vec![1.0, 11.0, 11.0, 1.0]);
        assert_eq!(eulerian_numbers(5), vec![1.0, 26.0, 66.0, 26.0, 1.0]);
    }

    #[test]
    fn polylog_examples() {
        assert!((polylog_neg_int(1, 0.5).unwrap() - 2.0).abs() < 1e-15);
        assert!((polylog_neg_int(2, 0.5).unwrap() - 6.0).abs() < 1e-14);
        assert!((polylog_neg_int(3, 0.3).unwrap() - series(3, 0.3, 200)).abs() < 1e-12);
        assert!(matches!(polylog_neg_int(2, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn lattice_bound_rational_forms() {
        let m = decay_model_inverse_hpd(2.0, 6.0).unwrap();
        let rational = |dim: usize, z: f64| match dim {
            2 => z / (1.0 - z).powi(2),
            3 => (z + z * z) / (1.0 - z).powi(3),
            4 => (z + 4.0 * z * z + z.powi(3)) / (1.0 - z).powi(4),
            _ => unreachable!(),
        };
        for dim in 2..=4 {
            for d in 1..8 {
                let v = evaluate_bound(&m, &BoundRequest::TraceLattice { n: 100, d, dim }).unwrap();
                let expected = 2.0 * m.c * dim as f64 * 100.0 * rational(dim, m.q.powi(d as i32));
                assert!((v - expected).abs() <= 1e-13 * expected);
            }
        }
    }

    #[test]
    fn fit_recovers_exact_data() {
        let d: Vec<usize> = (0..30).collect();
        let x: Vec<f64> = d.iter().map(|&k| 0.05 * 0.85f64.powi(k as i32)).collect();
        let fit = fit_decay_model(&x, &d, true).unwrap();
        assert!((fit.model.c - 0.05).abs() < 1e-10);
        assert!((fit.model.q - 0.85).abs() < 1e-10);
        assert!(fit.model.fitted && !fit.model.from_polynomial_property && !fit.clamped);
        assert_eq!(fit.model.bound_label(), "estimate");
    }

    #[test]
    fn constant_column_is_clamped() {
        let fit = fit_decay_model(&[1.0; 5], &[0, 1, 2, 3, 4], false).unwrap();
        assert!(fit.clamped);
        assert!(fit.model.q < 1.0);
        assert_eq!(fit.model.k, crouzeix_constant(false));
    }

    #[test]
    fn fit_needs_two_distances() {
        assert!(matches!(fit_decay_model(&[1e-20, 1e-30], &[0, 1], true), Err(Error::Fit(_))));
        assert!(matches!(fit_decay_model(&[1.0, 2.0], &[3, 3], true), Err(Error::Fit(_))));
    }

    #[test]
    fn envelope_majorizes_samples() {
        let d = vec![0, 1, 1, 2, 3, 3, 5];
        let x = vec![1.0, 0.4, 0.6, 0.1, 0.09, 0.01, 0.001];
        let fit = fit_decay_envelope(&x, &d, true).unwrap();
        for (&k, &v) in d.iter().zip(&x) {
            assert!(v <= fit.model.epsilon(k));
        }
    }

    proptest! {
        #[test]
        fn bounds_nonnegative_and_monotone(c in 0.01f64..10.0, q in 0.0f64..0.99, n in 1usize..5000, d in 1usize..30) {
            let m = DecayModel::new(c, q, 1.0, true).unwrap();
            let reqs = |d: usize| vec![
                BoundRequest::TraceGeneric { class_sizes: vec![3, 4], d },
                BoundRequest::TraceBanded { n, d },
                BoundRequest::TraceLattice { n, d, dim: 3 },
                BoundRequest::TracePoly { n, d },
                BoundRequest::SparseFrobeniusPoly { n, d },
                BoundRequest::SparseNormsGeneric { n, d, gamma: 3 },
                BoundRequest::KrylovCombinedFrobenius { n, d, s: 4 },
                BoundRequest::KrylovTrace { n, d },
            ];
            for (a, b) in reqs(d).iter().zip(reqs(d + 1).iter()) {
                let va = evaluate_bound(&m, a).unwrap();
                let vb = evaluate_bound(&m, b).unwrap();
                prop_assert!(va >= 0.0 && vb >= 0.0);
                prop_assert!(vb <= va * (1.0 + 1e-12), "{} not monotone", a.kind());
            }
        }

        #[test]
        fn polylog_matches_series(s in 0usize..5, z in 0.0f64..0.6) {
            let exact = polylog_neg_int(s, z).unwrap();
            let approx = series(s, z, 400);
            prop_assert!((exact - approx).abs() <= 1e-12 * exact.abs().max(1.0));
        }
    }
}
