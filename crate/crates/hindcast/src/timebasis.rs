//! Legendre polynomial-exponential time basis.
//!
//! The basis functions are `Ψ_n(t) = e^t Q_n(t)` on `(0, T)`, where
//! `Q_n(t) = sqrt((2n+1)/T) P_n(2t/T - 1)` are shifted, normalized Legendre
//! polynomials. The family `{Ψ_n}` is orthonormal under the weighted inner
//! product `<u, v> = ∫_0^T e^{-2t} u v dt`, and its derivative couplings
//!
//! ```text
//! s_mn = ∫ e^{-2t} Ψ_n'  Ψ_m dt        (upper triangular, unit diagonal)
//! r_mn = ∫ e^{-2t} Ψ_n'' Ψ_m dt
//! c_mkn = ∫ e^{-2t} Ψ_n' Ψ_k Ψ_m dt
//! ```
//!
//! are what turns a time-dependent problem into a coupled system for the
//! expansion coefficients. All three reduce to unweighted integrals of
//! `Q`-products (times `e^t` for the tensor), which a single Gauss-Legendre
//! rule integrates exactly or to near machine precision.

use crate::{Error, Result};
use nalgebra::DMatrix;

/// Which time derivative of the expansion to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeDerivative {
    Zeroth,
    First,
    Second,
}

/// Legendre polynomial-exponential basis truncated at `order`, with a
/// Gauss-Legendre rule on `(0, T)` and tables of `Q_n, Q_n', Q_n''` at the
/// quadrature nodes.
#[derive(Debug, Clone)]
pub struct BasisSet {
    order: usize,
    t_final: f64,
    quad_nodes: Vec<f64>,
    quad_weights: Vec<f64>,
    /// `q[j][n] = Q_n(t_j)`; same layout for the derivative tables.
    q: Vec<Vec<f64>>,
    dq: Vec<Vec<f64>>,
    d2q: Vec<Vec<f64>>,
}

/// Derivative coupling matrices `S`, `R` and tensor `c_mkn` of a basis.
#[derive(Debug, Clone)]
pub struct ReductionMatrices {
    pub s: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub c: CoeffTensor,
}

/// Dense `(N+1)³` tensor of the trilinear couplings `c_mkn`.
#[derive(Debug, Clone)]
pub struct CoeffTensor {
    order: usize,
    data: Vec<f64>,
}

impl CoeffTensor {
    /// Basis truncation order `N`.
    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    pub fn get(&self, m: usize, k: usize, n: usize) -> f64 {
        let d = self.order + 1;
        self.data[(m * d + k) * d + n]
    }
}

/// Recommended Gauss-Legendre node count for a given truncation order: exact
/// for the polynomial integrands of `S` and `R`, and ample margin for the
/// `e^t`-weighted tensor integrand.
pub fn recommended_quad_order(order: usize) -> usize {
    (4 * order + 20).max(64)
}

impl BasisSet {
    /// Builds the basis with the recommended quadrature order.
    pub fn new(order: usize, t_final: f64) -> Result<Self> {
        Self::with_quad_order(order, t_final, recommended_quad_order(order))
    }

    /// Builds the basis with an explicit quadrature order. Orders below
    /// [`recommended_quad_order`] are accepted (useful as a negative control
    /// in diagnostics) but void the accuracy guarantees.
    pub fn with_quad_order(order: usize, t_final: f64, quad_order: usize) -> Result<Self> {
        if !(t_final.is_finite() && t_final > 0.0) {
            return Err(Error::config(format!(
                "final time must be positive and finite, got {t_final}"
            )));
        }
        if quad_order == 0 {
            return Err(Error::config("quadrature order must be at least 1"));
        }
        let (xs, ws) = gauss_legendre(quad_order);
        let half = 0.5 * t_final;
        let quad_nodes: Vec<f64> = xs.iter().map(|&x| half * (x + 1.0)).collect();
        let quad_weights: Vec<f64> = ws.iter().map(|&w| half * w).collect();

        let scale_d1 = 2.0 / t_final;
        let scale_d2 = scale_d1 * scale_d1;
        let mut q = Vec::with_capacity(quad_order);
        let mut dq = Vec::with_capacity(quad_order);
        let mut d2q = Vec::with_capacity(quad_order);
        for &x in &xs {
            let (p, p1, p2) = legendre_table(order, x);
            let mut qr = vec![0.0; order + 1];
            let mut dqr = vec![0.0; order + 1];
            let mut d2qr = vec![0.0; order + 1];
            for n in 0..=order {
                let norm = ((2 * n + 1) as f64 / t_final).sqrt();
                qr[n] = norm * p[n];
                dqr[n] = norm * p1[n] * scale_d1;
                d2qr[n] = norm * p2[n] * scale_d2;
            }
            q.push(qr);
            dq.push(dqr);
            d2q.push(d2qr);
        }

        Ok(BasisSet {
            order,
            t_final,
            quad_nodes,
            quad_weights,
            q,
            dq,
            d2q,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn quad_nodes(&self) -> &[f64] {
        &self.quad_nodes
    }

    pub fn quad_weights(&self) -> &[f64] {
        &self.quad_weights
    }

    /// Closed form `Q_n(0) = (-1)^n sqrt((2n+1)/T)`.
    pub fn q_at_zero(&self, n: usize) -> f64 {
        let v = ((2 * n + 1) as f64 / self.t_final).sqrt();
        if n % 2 == 0 {
            v
        } else {
            -v
        }
    }

    /// Closed form `Q_n(T) = sqrt((2n+1)/T)`.
    pub fn q_at_t_final(&self, n: usize) -> f64 {
        ((2 * n + 1) as f64 / self.t_final).sqrt()
    }

    /// `Q_n(t)` together with its first two derivatives, for all `n` up to
    /// `order`, evaluated by the recurrence (O(order) per call).
    pub fn q_all(&self, t: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let x = 2.0 * t / self.t_final - 1.0;
        let (p, p1, p2) = legendre_table(self.order, x);
        let scale_d1 = 2.0 / self.t_final;
        let scale_d2 = scale_d1 * scale_d1;
        let mut q = vec![0.0; self.order + 1];
        let mut dq = vec![0.0; self.order + 1];
        let mut d2q = vec![0.0; self.order + 1];
        for n in 0..=self.order {
            let norm = ((2 * n + 1) as f64 / self.t_final).sqrt();
            q[n] = norm * p[n];
            dq[n] = norm * p1[n] * scale_d1;
            d2q[n] = norm * p2[n] * scale_d2;
        }
        (q, dq, d2q)
    }

    /// `Ψ_n^{(d)}(t)` for all `n = 0..=order`, using
    /// `Ψ_n' = e^t (Q_n' + Q_n)` and `Ψ_n'' = e^t (Q_n'' + 2 Q_n' + Q_n)`.
    pub fn psi_all(&self, t: f64, deriv: TimeDerivative) -> Result<Vec<f64>> {
        if !(0.0..=self.t_final).contains(&t) {
            return Err(Error::domain(format!(
                "t = {t} outside [0, {}]",
                self.t_final
            )));
        }
        let (q, dq, d2q) = self.q_all(t);
        let et = t.exp();
        let vals = (0..=self.order)
            .map(|n| match deriv {
                TimeDerivative::Zeroth => et * q[n],
                TimeDerivative::First => et * (dq[n] + q[n]),
                TimeDerivative::Second => et * (d2q[n] + 2.0 * dq[n] + q[n]),
            })
            .collect();
        Ok(vals)
    }

    /// Largest deviation of the quadrature Gram matrix
    /// `<Ψ_n, Ψ_m>_{e^{-2t}}` from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        let d = self.order + 1;
        let mut worst: f64 = 0.0;
        for m in 0..d {
            for n in 0..d {
                let mut acc = 0.0;
                for (j, (&t, &w)) in self.quad_nodes.iter().zip(&self.quad_weights).enumerate() {
                    let psi_n = t.exp() * self.q[j][n];
                    let psi_m = t.exp() * self.q[j][m];
                    acc += w * (-2.0 * t).exp() * psi_n * psi_m;
                }
                let target = if m == n { 1.0 } else { 0.0 };
                worst = worst.max((acc - target).abs());
            }
        }
        worst
    }
}

/// Assembles `S`, `R` and the tensor `c_mkn` by quadrature on the basis rule.
///
/// The weighted integrands simplify to `(Q_n' + Q_n) Q_m`,
/// `(Q_n'' + 2 Q_n' + Q_n) Q_m` and `e^t (Q_n' + Q_n) Q_k Q_m`; the first two
/// are polynomials of degree at most `2 * order`, integrated exactly.
pub fn build_reduction_matrices(basis: &BasisSet) -> ReductionMatrices {
    let d = basis.order + 1;
    let nq = basis.quad_nodes.len();

    let mut s = DMatrix::zeros(d, d);
    let mut r = DMatrix::zeros(d, d);
    for m in 0..d {
        for n in 0..d {
            let mut acc_s = 0.0;
            let mut acc_r = 0.0;
            for j in 0..nq {
                let w = basis.quad_weights[j];
                let qm = basis.q[j][m];
                acc_s += w * (basis.dq[j][n] + basis.q[j][n]) * qm;
                acc_r += w * (basis.d2q[j][n] + 2.0 * basis.dq[j][n] + basis.q[j][n]) * qm;
            }
            s[(m, n)] = acc_s;
            r[(m, n)] = acc_r;
        }
    }

    let mut data = vec![0.0; d * d * d];
    for j in 0..nq {
        let w_et = basis.quad_weights[j] * basis.quad_nodes[j].exp();
        for m in 0..d {
            let wm = w_et * basis.q[j][m];
            for k in 0..d {
                let wmk = wm * basis.q[j][k];
                let row = (m * d + k) * d;
                for n in 0..d {
                    data[row + n] += wmk * (basis.dq[j][n] + basis.q[j][n]);
                }
            }
        }
    }

    ReductionMatrices {
        s,
        r,
        c: CoeffTensor {
            order: basis.order,
            data,
        },
    }
}

/// Precomputed projection of uniformly sampled time signals onto the basis,
/// `w_n = ∫_0^T e^{-2t} w(t) Ψ_n(t) dt = ∫_0^T e^{-t} w(t) Q_n(t) dt`,
/// by composite Simpson on the sample grid (one trapezoid panel closes an
/// odd interval count).
#[derive(Debug, Clone)]
pub struct TimeProjector {
    /// `weights[n][i]` so that `w_n = Σ_i weights[n][i] * samples[i]`.
    weights: Vec<Vec<f64>>,
    n_samples: usize,
}

impl TimeProjector {
    pub fn new(basis: &BasisSet, n_samples: usize, sample_dt: f64) -> Result<Self> {
        if n_samples < 2 {
            return Err(Error::data("need at least 2 time samples"));
        }
        if !(sample_dt.is_finite() && sample_dt > 0.0) {
            return Err(Error::data(format!("invalid sample spacing {sample_dt}")));
        }
        let span = (n_samples - 1) as f64 * sample_dt;
        if (span - basis.t_final).abs() > 1e-6 * basis.t_final {
            return Err(Error::data(format!(
                "sample grid spans [0, {span}], basis expects [0, {}]",
                basis.t_final
            )));
        }

        let rule = simpson_weights(n_samples, sample_dt);
        let mut weights = vec![vec![0.0; n_samples]; basis.order + 1];
        for i in 0..n_samples {
            let t = i as f64 * sample_dt;
            let (q, _, _) = basis.q_all(t);
            let kernel = rule[i] * (-t).exp();
            for n in 0..=basis.order {
                weights[n][i] = kernel * q[n];
            }
        }
        Ok(TimeProjector { weights, n_samples })
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn apply(&self, samples: &[f64]) -> Result<Vec<f64>> {
        if samples.len() != self.n_samples {
            return Err(Error::data(format!(
                "expected {} samples, got {}",
                self.n_samples,
                samples.len()
            )));
        }
        Ok(self
            .weights
            .iter()
            .map(|row| row.iter().zip(samples).map(|(w, s)| w * s).sum())
            .collect())
    }
}

/// One-shot projection of a sampled signal; see [`TimeProjector`].
pub fn project_signal(samples: &[f64], sample_dt: f64, basis: &BasisSet) -> Result<Vec<f64>> {
    TimeProjector::new(basis, samples.len(), sample_dt)?.apply(samples)
}

/// Evaluates `Σ_n coeffs[n] Ψ_n^{(deriv)}(t)`.
pub fn eval_expansion(
    coeffs: &[f64],
    t: f64,
    basis: &BasisSet,
    deriv: TimeDerivative,
) -> Result<f64> {
    let psi = basis.psi_all(t, deriv)?;
    if coeffs.len() > psi.len() {
        return Err(Error::data(format!(
            "coefficient vector of length {} exceeds basis order {}",
            coeffs.len(),
            basis.order
        )));
    }
    Ok(coeffs.iter().zip(&psi).map(|(c, p)| c * p).sum())
}

/// Composite Simpson weights on `n` uniform samples with spacing `dt`; an odd
/// interval count is closed with one trapezoid panel at the end.
fn simpson_weights(n_samples: usize, dt: f64) -> Vec<f64> {
    let mut w = vec![0.0; n_samples];
    let intervals = n_samples - 1;
    let simpson_intervals = if intervals % 2 == 0 {
        intervals
    } else {
        intervals - 1
    };
    let mut i = 0;
    while i + 2 <= simpson_intervals {
        w[i] += dt / 3.0;
        w[i + 1] += 4.0 * dt / 3.0;
        w[i + 2] += dt / 3.0;
        i += 2;
    }
    if simpson_intervals < intervals {
        w[n_samples - 2] += 0.5 * dt;
        w[n_samples - 1] += 0.5 * dt;
    }
    w
}

/// Values of `P_n, P_n', P_n''` for `n = 0..=n_max` at `x` in `[-1, 1]`.
///
/// `P` by the three-term recurrence; `P'` by `(1-x²) P_n' = n (P_{n-1} - x P_n)`
/// with the closed form `P_n'(±1) = (±1)^{n-1} n(n+1)/2` at the endpoints;
/// `P''` by the twice-differentiated three-term recurrence.
fn legendre_table(n_max: usize, x: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let d = n_max + 1;
    let mut p = vec![0.0; d];
    let mut p1 = vec![0.0; d];
    let mut p2 = vec![0.0; d];

    p[0] = 1.0;
    if n_max >= 1 {
        p[1] = x;
        for k in 1..n_max {
            let kf = k as f64;
            p[k + 1] = ((2.0 * kf + 1.0) * x * p[k] - kf * p[k - 1]) / (kf + 1.0);
        }
    }

    let one_minus_x2 = 1.0 - x * x;
    if one_minus_x2.abs() < 1e-13 {
        let sign = if x > 0.0 { 1.0 } else { -1.0 };
        for n in 1..d {
            let nf = n as f64;
            // sign^(n-1) = sign^(n+1)
            let s = if (n + 1) % 2 == 0 { 1.0 } else { sign };
            p1[n] = s * nf * (nf + 1.0) / 2.0;
        }
    } else {
        for n in 1..d {
            let nf = n as f64;
            p1[n] = nf * (p[n - 1] - x * p[n]) / one_minus_x2;
        }
    }

    if n_max >= 1 {
        for k in 1..n_max {
            let kf = k as f64;
            p2[k + 1] = ((2.0 * kf + 1.0) * (2.0 * p1[k] + x * p2[k]) - kf * p2[k - 1]) / (kf + 1.0);
        }
    }

    (p, p1, p2)
}

/// Gauss-Legendre nodes and weights on `(-1, 1)` by Newton iteration on `P_n`.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (pn, dpn) = legendre_single(n, x);
            let dx = pn / dpn;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_single(n, x);
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    nodes.reverse();
    weights.reverse();
    (nodes, weights)
}

/// `(P_n(x), P_n'(x))` for a single degree, for the Newton iteration.
fn legendre_single(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut pm = 1.0;
    let mut pc = x;
    for k in 1..n {
        let kf = k as f64;
        let pn = ((2.0 * kf + 1.0) * x * pc - kf * pm) / (kf + 1.0);
        pm = pc;
        pc = pn;
    }
    let nf = n as f64;
    let dp = nf * (pm - x * pc) / (1.0 - x * x);
    (pc, dp)
}

/// Adaptive Simpson quadrature, used as an independent reference when
/// checking the Gauss-rule assembly (see `pipeline::basis_check`).
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    adaptive_simpson_rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn adaptive_simpson_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        adaptive_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + adaptive_simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const T: f64 = 0.4;

    fn q_fn(basis: &BasisSet, n: usize) -> impl Fn(f64) -> f64 + '_ {
        move |t| basis.q_all(t).0[n]
    }

    #[test]
    fn degree_zero_is_constant() {
        let basis = BasisSet::new(0, T).unwrap();
        let expect = (1.0 / T).sqrt();
        for &t in &[0.0, 0.13, 0.4] {
            assert_abs_diff_eq!(basis.q_all(t).0[0], expect, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(expect, 2.5f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn endpoint_closed_forms() {
        let basis = BasisSet::new(6, T).unwrap();
        assert_eq!(basis.q_at_zero(3), -(7.0f64 / T).sqrt());
        assert_abs_diff_eq!(basis.q_at_zero(3), -17.5f64.sqrt(), epsilon = 1e-15);
        for n in 0..=6 {
            let (q, _, _) = basis.q_all(0.0);
            assert_abs_diff_eq!(q[n], basis.q_at_zero(n), epsilon = 1e-13);
            let (q, _, _) = basis.q_all(T);
            assert_abs_diff_eq!(q[n], basis.q_at_t_final(n), epsilon = 1e-13);
        }
    }

    #[test]
    fn gram_matrix_is_identity() {
        let basis = BasisSet::new(5, T).unwrap();
        assert!(basis.orthonormality_defect() <= 1e-12);

        // Cross-check a few Gram entries against adaptive quadrature of the
        // weighted product e^{-2t} Ψ_n Ψ_m.
        for (m, n, want) in [(0, 0, 1.0), (2, 2, 1.0), (1, 4, 0.0), (3, 2, 0.0)] {
            let val = adaptive_simpson(
                &|t: f64| {
                    let q = basis.q_all(t).0;
                    (-2.0 * t).exp() * (t.exp() * q[n]) * (t.exp() * q[m])
                },
                0.0,
                T,
                1e-14,
            );
            assert_abs_diff_eq!(val, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn s_matrix_structure_and_closed_form() {
        let basis = BasisSet::new(8, T).unwrap();
        let mats = build_reduction_matrices(&basis);
        for m in 0..=8 {
            for n in 0..=8 {
                if m == n {
                    assert_abs_diff_eq!(mats.s[(m, n)], 1.0, epsilon = 1e-11);
                } else if m > n {
                    assert_abs_diff_eq!(mats.s[(m, n)], 0.0, epsilon = 1e-11);
                } else {
                    // Integration by parts gives, for m < n,
                    // s_mn = Q_n(T) Q_m(T) - Q_n(0) Q_m(0), which vanishes
                    // for even n+m and doubles for odd n+m.
                    let expect = if (n + m) % 2 == 1 {
                        2.0 * (((2 * n + 1) * (2 * m + 1)) as f64).sqrt() / T
                    } else {
                        0.0
                    };
                    assert_abs_diff_eq!(mats.s[(m, n)], expect, epsilon = 1e-9);
                }
            }
        }
    }

    #[test]
    fn r_equals_s_squared() {
        // Ψ_n' lies in span{Ψ_0..Ψ_n}, so the second-derivative coupling must
        // be the square of the first-derivative coupling.
        let basis = BasisSet::new(10, T).unwrap();
        let mats = build_reduction_matrices(&basis);
        let s2 = &mats.s * &mats.s;
        let diff = (&mats.r - &s2).abs().max();
        assert!(diff <= 1e-7 * mats.r.abs().max().max(1.0), "diff = {diff}");
    }

    #[test]
    fn tensor_matches_adaptive_quadrature() {
        let basis = BasisSet::new(2, T).unwrap();
        let mats = build_reduction_matrices(&basis);
        let oracle = |m: usize, k: usize, n: usize| {
            adaptive_simpson(
                &|t: f64| {
                    let (q, dq, _) = basis.q_all(t);
                    t.exp() * (dq[n] + q[n]) * q[k] * q[m]
                },
                0.0,
                T,
                1e-14,
            )
        };
        assert_abs_diff_eq!(mats.c.get(0, 0, 0), oracle(0, 0, 0), epsilon = 1e-10);
        assert_abs_diff_eq!(mats.c.get(1, 2, 0), oracle(1, 2, 0), epsilon = 1e-10);
        assert_abs_diff_eq!(mats.c.get(2, 1, 2), oracle(2, 1, 2), epsilon = 1e-10);
    }

    #[test]
    fn projection_recovers_basis_function() {
        let basis = BasisSet::new(5, T).unwrap();
        let n_samples = 4001;
        let dt = T / (n_samples - 1) as f64;
        let samples: Vec<f64> = (0..n_samples)
            .map(|i| {
                let t = i as f64 * dt;
                t.exp() * basis.q_all(t).0[2]
            })
            .collect();
        let coeffs = project_signal(&samples, dt, &basis).unwrap();
        for (n, &c) in coeffs.iter().enumerate() {
            let want = if n == 2 { 1.0 } else { 0.0 };
            assert_abs_diff_eq!(c, want, epsilon = 1e-6);
        }
    }

    #[test]
    fn projection_of_zero_is_zero() {
        let basis = BasisSet::new(4, T).unwrap();
        let samples = vec![0.0; 101];
        let coeffs = project_signal(&samples, T / 100.0, &basis).unwrap();
        assert!(coeffs.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn projection_of_exponential_matches_oracle() {
        let basis = BasisSet::new(5, T).unwrap();
        let n_samples = 4001;
        let dt = T / (n_samples - 1) as f64;
        let samples: Vec<f64> = (0..n_samples).map(|i| (i as f64 * dt).exp()).collect();
        let coeffs = project_signal(&samples, dt, &basis).unwrap();
        for n in 0..=5 {
            // w(t) = e^t and e^{-t} w(t) = 1, so the oracle integrand is Q_n.
            let want = adaptive_simpson(&|t: f64| basis.q_all(t).0[n], 0.0, T, 1e-14);
            assert_abs_diff_eq!(coeffs[n], want, epsilon = 1e-8);
        }
    }

    #[test]
    fn projection_rejects_wrong_span() {
        let basis = BasisSet::new(3, T).unwrap();
        let samples = vec![1.0; 100];
        assert!(matches!(
            project_signal(&samples, 1e-3, &basis),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn odd_interval_count_is_handled() {
        let basis = BasisSet::new(3, T).unwrap();
        // 100 samples -> 99 intervals; last panel is a trapezoid.
        let n_samples = 100;
        let dt = T / (n_samples - 1) as f64;
        let samples: Vec<f64> = (0..n_samples)
            .map(|i| {
                let t = i as f64 * dt;
                t.exp() * basis.q_all(t).0[1]
            })
            .collect();
        let coeffs = project_signal(&samples, dt, &basis).unwrap();
        assert_abs_diff_eq!(coeffs[1], 1.0, epsilon = 1e-4);
    }

    #[test]
    fn expansion_endpoint_values() {
        let basis = BasisSet::new(6, T).unwrap();
        let mut coeffs = vec![0.0; 7];
        coeffs[0] = 1.0;
        let v = eval_expansion(&coeffs, 0.0, &basis, TimeDerivative::Zeroth).unwrap();
        assert_abs_diff_eq!(v, (1.0 / T).sqrt(), epsilon = 1e-14);

        for n in 0..=6 {
            let mut coeffs = vec![0.0; 7];
            coeffs[n] = 1.0;
            let v = eval_expansion(&coeffs, 0.0, &basis, TimeDerivative::Zeroth).unwrap();
            let want = (if n % 2 == 0 { 1.0 } else { -1.0 }) * ((2 * n + 1) as f64 / T).sqrt();
            assert_abs_diff_eq!(v, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn expansion_out_of_range_is_rejected() {
        let basis = BasisSet::new(2, T).unwrap();
        let coeffs = vec![1.0, 0.0, 0.0];
        assert!(matches!(
            eval_expansion(&coeffs, -0.01, &basis, TimeDerivative::Zeroth),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            eval_expansion(&coeffs, T + 0.01, &basis, TimeDerivative::Zeroth),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let basis = BasisSet::new(7, T).unwrap();
        let coeffs: Vec<f64> = (0..8).map(|i| ((i * 37 + 11) % 17) as f64 / 7.0 - 1.0).collect();
        let norm: f64 = coeffs.iter().map(|c| c * c).sum::<f64>().sqrt();
        let h = 1e-5;
        let t = 0.2;
        let f = |t| eval_expansion(&coeffs, t, &basis, TimeDerivative::Zeroth).unwrap();
        let d1 = eval_expansion(&coeffs, t, &basis, TimeDerivative::First).unwrap();
        let fd1 = (f(t + h) - f(t - h)) / (2.0 * h);
        assert!((d1 - fd1).abs() <= 1e-6 * norm, "d1={d1} fd1={fd1}");

        let d2 = eval_expansion(&coeffs, t, &basis, TimeDerivative::Second).unwrap();
        let fd2 = (f(t + h) - 2.0 * f(t) + f(t - h)) / (h * h);
        assert!((d2 - fd2).abs() <= 1e-4 * norm.max(1.0), "d2={d2} fd2={fd2}");
    }

    #[test]
    fn insufficient_quadrature_is_detectable() {
        // Negative control: a too-short rule must visibly break the S
        // structure so that diagnostics can catch misconfiguration.
        let basis = BasisSet::with_quad_order(5, T, 3).unwrap();
        let mats = build_reduction_matrices(&basis);
        let mut defect: f64 = 0.0;
        for m in 0..=5 {
            for n in 0..=5 {
                if m == n {
                    defect = defect.max((mats.s[(m, n)] - 1.0).abs());
                } else if m > n {
                    defect = defect.max(mats.s[(m, n)].abs());
                }
            }
        }
        assert!(defect > 1e-10, "defect = {defect}");
    }

    #[test]
    fn invalid_construction_is_rejected() {
        assert!(matches!(BasisSet::new(3, 0.0), Err(Error::Config(_))));
        assert!(matches!(BasisSet::new(3, -1.0), Err(Error::Config(_))));
        assert!(matches!(
            BasisSet::with_quad_order(3, T, 0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn gauss_rule_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(12);
        // Degree 23 is the highest exactly integrated by 12 nodes.
        let int: f64 = x
            .iter()
            .zip(&w)
            .map(|(&x, &w)| w * (x.powi(22) + 3.0 * x.powi(5)))
            .sum();
        assert_abs_diff_eq!(int, 2.0 / 23.0, epsilon = 1e-14);
        let total: f64 = w.iter().sum();
        assert_abs_diff_eq!(total, 2.0, epsilon = 1e-13);
    }
}
