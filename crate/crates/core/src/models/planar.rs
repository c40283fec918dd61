//! Planar serial backbones: piecewise-constant-curvature soft arms and
//! chains of rigid rods with elastic revolute joints.
//!
//! Positions live in the `(x, z)` plane and are handled as complex numbers
//! `x + i z`. The rest backbone points along `−z` (tangent `−i`). A segment
//! whose tangent starts at angle `Θ` and bends uniformly through `φ` over its
//! length `a` contributes the chord `−i e^{iΘ} a g(φ)` with
//! `g(φ) = (e^{iφ} − 1)/(iφ)`.
//!
//! Mass, Coriolis and gravity terms are built from a line-density integral
//! evaluated by Gauss–Legendre quadrature on every segment, i.e. the model
//! behaves as a set of point masses rigidly attached to the backbone, and
//! `c(q, q̇) = Σ m_k J_kᵀ J̇_k q̇` is the exact Coriolis vector of that system.

use nalgebra::{DMatrix, DVector, Vector3};
use num_complex::Complex64;

use crate::dynamics::MechanicalModel;
use crate::quadrature::GaussLegendre;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Below this `|φ|` the arc function is evaluated by its power series.
const SERIES_THRESHOLD: f64 = 1.0;
const SERIES_TERMS: usize = 18;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainKind {
    /// One constant-curvature segment per DoF; `q_i` is the angle it subtends.
    ConstantCurvature,
    /// Straight rods; `q_i` is the relative angle of joint `i`.
    Rigid,
}

#[derive(Debug, Clone)]
pub struct PlanarChain {
    kind: ChainKind,
    n: usize,
    segment_length: f64,
    /// Elastic potential `½ Σ k_i q_i²`.
    stiffness: Vec<f64>,
    /// Gravitational acceleration as `g_x + i g_z`.
    gravity: Complex64,
    /// `(segment, arc length within segment, mass)` for each quadrature point.
    points: Vec<(usize, f64, f64)>,
    potential_offset: f64,
    label: String,
    fingerprint: String,
}

/// Taylor coefficients of `g`, `g'`, `g''` in `φ`: `g = Σ (iφ)^n/(n+1)!`.
/// Entry `n` holds the (re, im) coefficient of `φ^n`.
const SERIES: [[[f64; 2]; SERIES_TERMS]; 3] = series_tables();

const fn series_tables() -> [[[f64; 2]; SERIES_TERMS]; 3] {
    let mut base = [[0.0; 2]; SERIES_TERMS + 2];
    let mut fact = 1.0;
    let mut n = 0;
    while n < SERIES_TERMS + 2 {
        fact *= (n + 1) as f64;
        let sign = if n % 4 < 2 { 1.0 } else { -1.0 };
        base[n][n % 2] = sign / fact;
        n += 1;
    }
    let mut out = [[[0.0; 2]; SERIES_TERMS]; 3];
    let mut k = 0;
    while k < SERIES_TERMS {
        let (d1, d2) = ((k + 1) as f64, ((k + 1) * (k + 2)) as f64);
        let mut c = 0;
        while c < 2 {
            out[0][k][c] = base[k][c];
            out[1][k][c] = d1 * base[k + 1][c];
            out[2][k][c] = d2 * base[k + 2][c];
            c += 1;
        }
        k += 1;
    }
    out
}

#[inline]
fn horner(coeffs: &[[f64; 2]; SERIES_TERMS], phi: f64) -> Complex64 {
    let (mut re, mut im) = (0.0, 0.0);
    for c in coeffs.iter().rev() {
        re = re * phi + c[0];
        im = im * phi + c[1];
    }
    Complex64::new(re, im)
}

/// `g(φ)`, `g'(φ)`, `g''(φ)` for `g(φ) = (e^{iφ} − 1)/(iφ)`.
pub(crate) fn arc_function(phi: f64) -> (Complex64, Complex64, Complex64) {
    if phi.abs() < SERIES_THRESHOLD {
        (horner(&SERIES[0], phi), horner(&SERIES[1], phi), horner(&SERIES[2], phi))
    } else {
        let u = I * phi;
        let e = u.exp();
        let g = (e - 1.0) / u;
        let dg = (u * e - e + 1.0) / (u * u);
        let d2g = (u * u * e - 2.0 * u * e + 2.0 * e - 2.0) / (u * u * u);
        (g, I * dg, -d2g)
    }
}

impl PlanarChain {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn new(
        kind: ChainKind,
        n: usize,
        segment_length: f64,
        stiffness: Vec<f64>,
        line_density: f64,
        gravity: Complex64,
        quadrature_points: usize,
        label: String,
        fingerprint: String,
    ) -> Self {
        let rule = GaussLegendre::new(quadrature_points);
        let mut points = Vec::with_capacity(n * quadrature_points);
        for seg in 0..n {
            for (sigma, w) in rule.on_interval(0.0, segment_length) {
                points.push((seg, sigma, w * line_density));
            }
        }
        Self {
            kind,
            n,
            segment_length,
            stiffness,
            gravity,
            points,
            potential_offset: 0.0,
            label,
            fingerprint,
        }
    }

    pub(crate) fn set_potential_offset(&mut self, offset: f64) {
        self.potential_offset = offset;
    }

    pub(crate) fn set_fingerprint(&mut self, fingerprint: String) {
        self.fingerprint = fingerprint;
    }

    pub fn kind(&self) -> ChainKind {
        self.kind
    }

    pub fn segment_length(&self) -> f64 {
        self.segment_length
    }

    pub fn joint_stiffness(&self) -> &[f64] {
        &self.stiffness
    }

    pub fn total_mass(&self) -> f64 {
        self.points.iter().map(|p| p.2).sum()
    }

    /// Unshifted potential (gravity plus elastic).
    pub(crate) fn raw_potential(&self, q: &DVector<f64>) -> f64 {
        let elastic: f64 = (0..self.n).map(|i| 0.5 * self.stiffness[i] * q[i] * q[i]).sum();
        let mut gravity = 0.0;
        for &(seg, sigma, mass) in &self.points {
            let p = self.point(q.as_slice(), seg, sigma);
            gravity -= mass * dot(self.gravity, p);
        }
        elastic + gravity
    }

    /// Segment index and local arc length of the backbone point at `s`.
    fn locate(&self, s: f64) -> (usize, f64) {
        let seg = ((s / self.segment_length).floor() as usize).min(self.n - 1);
        (seg, s - seg as f64 * self.segment_length)
    }

    /// Backbone point at local arc length `sigma` of segment `seg`.
    fn point(&self, q: &[f64], seg: usize, sigma: f64) -> Complex64 {
        let l = self.segment_length;
        let mut pos = Complex64::new(0.0, 0.0);
        let mut theta = 0.0;
        for (m, &qm) in q.iter().enumerate().take(seg + 1) {
            let a = if m < seg { l } else { sigma };
            match self.kind {
                ChainKind::ConstantCurvature => {
                    let (g, _, _) = arc_function(a / l * qm);
                    pos += -I * Complex64::from_polar(a, theta) * g;
                    theta += qm;
                }
                ChainKind::Rigid => {
                    theta += qm;
                    pos += -I * Complex64::from_polar(a, theta);
                }
            }
        }
        pos
    }

    /// Mass matrix and `J̇ᵀ`-bias plus potential forces. The bias part is
    /// omitted when `qd` is `None`.
    fn assemble(&self, q: &DVector<f64>, qd: Option<&DVector<f64>>) -> (DMatrix<f64>, DVector<f64>) {
        let n = self.n;
        let l = self.segment_length;
        let zero = Complex64::new(0.0, 0.0);
        let rate = |m: usize| qd.map_or(0.0, |v| v[m]);

        // per full segment: start tangent −i e^{iΘ} and rate, chord, bend data, bias
        let mut dir = vec![zero; n];
        let mut omega = vec![0.0; n];
        let mut prefix = vec![zero; n + 1]; // Σ_{k<m} T_k
        let mut prefix_bias = vec![zero; n + 1];
        let mut bend = vec![zero; n]; // e_m g'_m
        let (mut th, mut om) = (0.0, 0.0);
        for m in 0..n {
            let (t, b) = match self.kind {
                ChainKind::ConstantCurvature => {
                    dir[m] = -I * Complex64::from_polar(1.0, th);
                    omega[m] = om;
                    let (g, gp, gpp) = arc_function(q[m]);
                    let e = dir[m] * l;
                    let t = e * g;
                    bend[m] = e * gp;
                    let w = rate(m);
                    let b = -t * om * om + 2.0 * I * e * gp * om * w + e * gpp * w * w;
                    th += q[m];
                    om += rate(m);
                    (t, b)
                }
                ChainKind::Rigid => {
                    th += q[m];
                    om += rate(m);
                    dir[m] = -I * Complex64::from_polar(1.0, th);
                    omega[m] = om;
                    let t = dir[m] * l;
                    (t, -t * om * om)
                }
            };
            prefix[m + 1] = prefix[m] + t;
            prefix_bias[m + 1] = prefix_bias[m] + b;
        }

        // Every Jacobian column j of a point on a later segment is i·tip + c_j;
        // the point's own column is `own`. Per-segment moments of the points
        // then give M and f in O(points + n²).
        let c: Vec<Complex64> = (0..n)
            .map(|j| match self.kind {
                ChainKind::ConstantCurvature => bend[j] - I * prefix[j + 1],
                ChainKind::Rigid => -I * prefix[j],
            })
            .collect();
        let mut s0 = vec![0.0; n]; // Σ m
        let mut s1 = vec![zero; n]; // Σ m i·tip
        let mut s2 = vec![0.0; n]; // Σ m |tip|²
        let mut own_sum = vec![zero; n]; // Σ m own
        let mut own_sq = vec![0.0; n]; // Σ m |own|²
        let mut own_tip = vec![0.0; n]; // Σ m (i·tip)·own
        let mut load = vec![zero; n]; // Σ m (bias − g)
        let mut load_tip = vec![0.0; n]; // Σ m (i·tip)·(bias − g)
        let mut load_own = vec![0.0; n]; // Σ m own·(bias − g)
        for &(seg, sigma, mass) in &self.points {
            let (tp, bias_p, own) = match self.kind {
                ChainKind::ConstantCurvature => {
                    let beta = sigma / l;
                    let (g, gp, gpp) = arc_function(beta * q[seg]);
                    let e = dir[seg] * sigma;
                    let t = e * g;
                    let (om, w) = (omega[seg], rate(seg));
                    let b = -t * om * om + 2.0 * I * e * beta * gp * om * w + e * beta * beta * gpp * w * w;
                    (t, b, e * beta * gp)
                }
                ChainKind::Rigid => {
                    let t = dir[seg] * sigma;
                    let om = omega[seg];
                    (t, -t * om * om, I * t)
                }
            };
            let it = I * (prefix[seg] + tp);
            let rhs = prefix_bias[seg] + bias_p - self.gravity;
            s0[seg] += mass;
            s1[seg] += mass * it;
            s2[seg] += mass * it.norm_sqr();
            own_sum[seg] += mass * own;
            own_sq[seg] += mass * own.norm_sqr();
            own_tip[seg] += mass * dot(it, own);
            load[seg] += mass * rhs;
            load_tip[seg] += mass * dot(it, rhs);
            load_own[seg] += mass * dot(own, rhs);
        }

        let mut m_mat = DMatrix::zeros(n, n);
        let mut f = DVector::zeros(n);
        // moments of all points beyond segment j
        let (mut t0, mut t1, mut t2, mut tl, mut tlt) = (0.0, zero, 0.0, zero, 0.0);
        for j in (0..n).rev() {
            for i in 0..j {
                let generic = t2 + dot(t1, c[i] + c[j]) + t0 * dot(c[i], c[j]);
                let v = generic + own_tip[j] + dot(c[i], own_sum[j]);
                m_mat[(i, j)] = v;
                m_mat[(j, i)] = v;
            }
            m_mat[(j, j)] = t2 + 2.0 * dot(t1, c[j]) + t0 * c[j].norm_sqr() + own_sq[j];
            f[j] = tlt + dot(c[j], tl) + load_own[j] + self.stiffness[j] * q[j];
            t0 += s0[j];
            t1 += s1[j];
            t2 += s2[j];
            tl += load[j];
            tlt += load_tip[j];
        }
        (m_mat, f)
    }
}

#[inline]
fn dot(a: Complex64, b: Complex64) -> f64 {
    a.re * b.re + a.im * b.im
}

impl MechanicalModel for PlanarChain {
    fn n_dofs(&self) -> usize {
        self.n
    }

    fn rest_length(&self) -> f64 {
        self.segment_length * self.n as f64
    }

    fn mass_matrix(&self, q: &DVector<f64>) -> DMatrix<f64> {
        self.assemble(q, None).0
    }

    fn potential(&self, q: &DVector<f64>) -> f64 {
        self.raw_potential(q) - self.potential_offset
    }

    fn potential_gradient(&self, q: &DVector<f64>) -> DVector<f64> {
        self.assemble(q, None).1
    }

    fn coriolis(&self, q: &DVector<f64>, qd: &DVector<f64>) -> DVector<f64> {
        let with = self.assemble(q, Some(qd)).1;
        let without = self.assemble(q, None).1;
        with - without
    }

    fn dynamics_terms(&self, q: &DVector<f64>, qd: &DVector<f64>) -> (DMatrix<f64>, DVector<f64>) {
        self.assemble(q, Some(qd))
    }

    fn backbone_point(&self, q: &DVector<f64>, s: f64) -> Vector3<f64> {
        let (seg, sigma) = self.locate(s);
        let p = self.point(q.as_slice(), seg, sigma);
        Vector3::new(p.re, 0.0, p.im)
    }

    fn label(&self) -> String {
        self.label.clone()
    }

    fn fingerprint(&self) -> String {
        self.fingerprint.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(phi: f64) -> (Complex64, Complex64, Complex64) {
        // direct high-order series, independent of the branch switch
        let mut g = Complex64::new(0.0, 0.0);
        let mut g1 = g;
        let mut g2 = g;
        let mut fact = 1.0;
        for n in 0..60usize {
            fact *= (n + 1) as f64;
            let c = I.powu(n as u32) / fact;
            g += c * phi.powi(n as i32);
            if n >= 1 {
                g1 += c * n as f64 * phi.powi(n as i32 - 1);
            }
            if n >= 2 {
                g2 += c * (n * (n - 1)) as f64 * phi.powi(n as i32 - 2);
            }
        }
        (g, g1, g2)
    }

    #[test]
    fn arc_function_branches_agree() {
        for &phi in &[1.0, 1.0 + 1e-12, 1.3, -1.7, 2.5, -3.0] {
            let (g, g1, g2) = arc_function(phi);
            let (s, s1, s2) = series(phi);
            assert!((g - s).norm() < 1e-13, "g at {phi}");
            assert!((g1 - s1).norm() < 1e-12, "g' at {phi}");
            assert!((g2 - s2).norm() < 1e-11, "g'' at {phi}");
        }
    }

    #[test]
    fn arc_function_is_continuous_at_zero() {
        let (g0, g10, g20) = arc_function(0.0);
        assert_eq!(g0, Complex64::new(1.0, 0.0));
        assert!((g10 - I * 0.5).norm() < 1e-16);
        assert!((g20 + Complex64::new(1.0 / 3.0, 0.0)).norm() < 1e-16);
        for phi in [1e-12, -1e-12] {
            let (g, g1, g2) = arc_function(phi);
            assert!((g - g0).norm() < 1e-11);
            assert!((g1 - g10).norm() < 1e-11);
            assert!((g2 - g20).norm() < 1e-11);
        }
    }

    #[test]
    fn arc_function_derivatives_match_finite_differences() {
        for &phi in &[0.3, 0.999, 1.001, 2.0] {
            let h = 1e-6;
            let (gp, _, _) = arc_function(phi + h);
            let (gm, _, _) = arc_function(phi - h);
            let (_, g1, _) = arc_function(phi);
            assert!(((gp - gm) / (2.0 * h) - g1).norm() < 1e-8);
            let (_, g1p, _) = arc_function(phi + h);
            let (_, g1m, _) = arc_function(phi - h);
            let (_, _, g2) = arc_function(phi);
            assert!(((g1p - g1m) / (2.0 * h) - g2).norm() < 1e-8);
        }
    }
}
