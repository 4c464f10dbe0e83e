//! Linear stability of the semi-implicit scheme on the model problem
//! `D^α u = (λ + ρ) u`, with `ρ u` treated by extrapolation and a
//! perturbation of strength `κ`.
//!
//! The step size `τ` is stable iff `τ^α` is not a value of
//! `φ(z) = ω(p, α, 1, z) / ((λ + ρ) - (ρ + κ)(1 - z)^q)` on the closed unit
//! disk. Values on the disk are counted through the argument principle:
//! for real `c > 0` the number of solutions of `φ(z) = c` is the number of
//! poles of `φ` in the disk plus the signed crossings of the boundary locus
//! with the ray `(c, ∞)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::linalg::{complex_det, Matrix};
use crate::weights::{Family, GeneratingFunction};

/// Relative band used for "zero" and "positive real" tests.
pub const BAND: f64 = 1e-12;

/// Scalar model problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarProblem {
    gf: GeneratingFunction,
    q: usize,
    pub lambda: Complex64,
    pub rho: Complex64,
    pub kappa: Complex64,
}

fn check_q(q: usize) -> Result<()> {
    if q == 1 || q == 2 {
        Ok(())
    } else {
        Err(Error::UnsupportedOrder {
            what: "perturbation",
            order: q,
            supported: "1 or 2",
        })
    }
}

impl ScalarProblem {
    pub fn new(family: Family, order: usize, alpha: f64, q: usize, lambda: f64, rho: f64, kappa: f64) -> Result<Self> {
        Self::complex(
            family,
            order,
            alpha,
            q,
            Complex64::new(lambda, 0.0),
            Complex64::new(rho, 0.0),
            Complex64::new(kappa, 0.0),
        )
    }

    pub fn complex(
        family: Family,
        order: usize,
        alpha: f64,
        q: usize,
        lambda: Complex64,
        rho: Complex64,
        kappa: Complex64,
    ) -> Result<Self> {
        check_q(q)?;
        Ok(Self {
            gf: GeneratingFunction::new(family, order, alpha, 1.0)?,
            q,
            lambda,
            rho,
            kappa,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.gf.alpha()
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn generating_function(&self) -> &GeneratingFunction {
        &self.gf
    }

    fn is_real(&self) -> bool {
        self.lambda.im == 0.0 && self.rho.im == 0.0 && self.kappa.im == 0.0
    }

    pub fn denominator(&self, z: Complex64) -> Complex64 {
        let d = (Complex64::new(1.0, 0.0) - z).powu(self.q as u32);
        (self.lambda + self.rho) - (self.rho + self.kappa) * d
    }

    /// `φ(z)`, or `None` at a pole.
    pub fn locus_value(&self, z: Complex64) -> Option<Complex64> {
        let den = self.denominator(z);
        let scale = (self.lambda + self.rho).norm() + (self.rho + self.kappa).norm() * 2f64.powi(self.q as i32);
        if den.norm() <= BAND * scale {
            None
        } else {
            Some(self.gf.symbol(z) / den)
        }
    }

    /// Roots of the denominator.
    pub fn poles(&self) -> Vec<Complex64> {
        let a = self.rho + self.kappa;
        if a.norm() == 0.0 {
            return Vec::new();
        }
        let r = (self.lambda + self.rho) / a;
        let root = if self.q == 1 { r } else { r.sqrt() };
        let one = Complex64::new(1.0, 0.0);
        if self.q == 1 {
            vec![one - root]
        } else {
            vec![one - root, one + root]
        }
    }

    /// Number of poles strictly inside the unit disk.
    pub fn poles_inside(&self) -> usize {
        self.poles().iter().filter(|z| z.norm() < 1.0 - BAND).count()
    }
}

/// One sample of the boundary locus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocusPoint {
    pub z: Complex64,
    /// `None` marks a pole.
    pub value: Option<Complex64>,
}

/// `boundary_locus`: `φ` at `z = r e^{2πik/M}`, `k = 0..M`, for each radius.
pub fn boundary_locus(prob: &ScalarProblem, z_samples: usize, radii: &[f64]) -> Vec<LocusPoint> {
    let mut out = Vec::with_capacity(z_samples * radii.len());
    for &r in radii {
        for k in 0..z_samples {
            let z = Complex64::from_polar(r, 2.0 * PI * k as f64 / z_samples as f64);
            out.push(LocusPoint {
                z,
                value: prob.locus_value(z),
            });
        }
    }
    out
}

/// Maps a locus value to the `ξ` plane, `ξ = value^{1/α}` (principal branch).
pub fn to_xi(value: Complex64, alpha: f64) -> Complex64 {
    value.powf(1.0 / alpha)
}

/// A crossing of the boundary locus with the positive real axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub theta: f64,
    pub x: f64,
    /// `+1` when the locus crosses upward as `θ` increases.
    pub sign: i32,
}

fn im_at(prob: &ScalarProblem, theta: f64) -> Option<Complex64> {
    prob.locus_value(Complex64::from_polar(1.0, theta))
}

/// Positive-real crossings of `φ(e^{iθ})`, `θ ∈ (0, 2π)`.
pub fn positive_real_crossings(prob: &ScalarProblem, samples: usize) -> Vec<Crossing> {
    let m = samples.max(16) & !1;
    let thetas: Vec<f64> = (1..m).map(|k| 2.0 * PI * k as f64 / m as f64).collect();
    let values: Vec<Option<Complex64>> = thetas.par_iter().map(|&t| im_at(prob, t)).collect();
    let mut out = Vec::new();
    let sgn = |v: f64| {
        if v > 0.0 {
            1
        } else if v < 0.0 {
            -1
        } else {
            0
        }
    };
    let mut k = 0;
    while k + 1 < thetas.len() {
        let (Some(a), Some(b)) = (values[k], values[k + 1]) else {
            k += 1;
            continue;
        };
        let (sa, sb) = (sgn(a.im), sgn(b.im));
        if sa != 0 && sb == 0 {
            // A sample sits on the axis: look one step further.
            if k + 2 < thetas.len() {
                if let Some(c) = values[k + 2] {
                    let sc = sgn(c.im);
                    if sc == -sa && b.re > 0.0 {
                        out.push(Crossing {
                            theta: thetas[k + 1],
                            x: b.re,
                            sign: sc,
                        });
                    }
                }
            }
            k += 1;
            continue;
        }
        if sa != 0 && sb == -sa {
            let (mut lo, mut hi) = (thetas[k], thetas[k + 1]);
            let mut v = b;
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                match im_at(prob, mid) {
                    Some(w) => {
                        v = w;
                        if sgn(w.im) == sa {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    None => break,
                }
            }
            if v.re > 0.0 {
                out.push(Crossing {
                    theta: 0.5 * (lo + hi),
                    x: v.re,
                    sign: sb,
                });
            }
        }
        k += 1;
    }
    out
}

/// Number of solutions of `φ(z) = c` in the closed disk for real `c > 0`.
/// `None` when `c` lies on the locus.
pub fn solution_count(prob: &ScalarProblem, crossings: &[Crossing], c: f64) -> Option<i64> {
    if crossings.iter().any(|x| (x.x - c).abs() <= BAND * c.max(x.x)) {
        return None;
    }
    let winding: i64 = crossings.iter().filter(|x| x.x > c).map(|x| x.sign as i64).sum();
    Some(prob.poles_inside() as i64 + winding)
}

/// Outcome of a stability-interval search.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityInterval {
    /// Largest stable step, `f64::INFINITY` when unbounded.
    pub tau_star: f64,
    pub unbounded: bool,
    pub warnings: Vec<String>,
}

/// Predicate: is the step `tau` stable?
pub fn is_stable(prob: &ScalarProblem, crossings: &[Crossing], tau: f64) -> bool {
    solution_count(prob, crossings, tau.powf(prob.alpha())) == Some(0)
}

const LOCUS_SAMPLES: usize = 1 << 14;
const TAU_FLOOR: f64 = 1e-300;

/// `stability_interval`: bisection in `log τ` for the largest `τ*` such that
/// `(0, τ*)` is stable, up to relative tolerance `tol`. When `τ_hi` is stable
/// the interval is reported as unbounded.
pub fn stability_interval(prob: &ScalarProblem, tau_hi: f64, tol: f64) -> Result<StabilityInterval> {
    if !prob.is_real() {
        return Err(invalid("lambda", "stability intervals need real coefficients"));
    }
    if !(prob.lambda.re < 0.0) {
        return Err(Error::Domain(format!("need lambda < 0, got {}", prob.lambda.re)));
    }
    if !(tau_hi > 0.0) || !(tol > 0.0) {
        return Err(invalid("tau_hi", "search bounds must be positive"));
    }
    let crossings = positive_real_crossings(prob, LOCUS_SAMPLES);
    let stable = |t: f64| is_stable(prob, &crossings, t);
    let mut warnings = Vec::new();
    if stable(tau_hi) {
        // Check that nothing below tau_hi is unstable.
        let bad = crossings
            .iter()
            .map(|c| c.x.powf(1.0 / prob.alpha()))
            .filter(|&t| t < tau_hi && !stable(t * (1.0 + 1e-9)) && !stable(t * (1.0 - 1e-9)))
            .count();
        if bad > 0 {
            warnings.push(format!("stable at tau_hi = {tau_hi} but unstable below it"));
        } else {
            return Ok(StabilityInterval {
                tau_star: f64::INFINITY,
                unbounded: true,
                warnings,
            });
        }
    }
    if !stable(TAU_FLOOR) {
        warnings.push("unstable for arbitrarily small steps".into());
        return Ok(StabilityInterval {
            tau_star: 0.0,
            unbounded: false,
            warnings,
        });
    }
    let (mut lo, mut hi) = (TAU_FLOOR.ln(), tau_hi.ln());
    while hi - lo > tol * 0.5 {
        let mid = 0.5 * (lo + hi);
        if !stable(lo.exp()) || stable(hi.exp()) {
            warnings.push("bracket lost during bisection".into());
            break;
        }
        if stable(mid.exp()) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tau_star = lo.exp();
    // The stable set should be an interval: every crossing below τ* must
    // leave the predicate stable on both sides.
    let mut conservative = tau_star;
    for c in &crossings {
        let t = c.x.powf(1.0 / prob.alpha());
        if t < tau_star * (1.0 - tol) && !(stable(t * (1.0 - 1e-9)) && stable(t * (1.0 + 1e-9))) {
            conservative = conservative.min(t);
        }
    }
    if conservative < tau_star {
        warnings.push(format!(
            "stable set is not an interval; returning conservative bound {conservative:e}"
        ));
    }
    Ok(StabilityInterval {
        tau_star: conservative,
        unbounded: false,
        warnings,
    })
}

/// `unconditional_criterion`: the `κ` threshold above which the scheme is
/// stable for every `τ > 0`.
pub fn unconditional_criterion(lambda: f64, rho: f64, q: usize) -> Result<f64> {
    if !(lambda < 0.0) {
        return Err(Error::Domain(format!("need lambda < 0, got {lambda}")));
    }
    if !(rho <= 0.0) {
        return Err(Error::Domain(format!("need rho <= 0, got {rho}")));
    }
    match q {
        1 => Ok((lambda - rho) / 2.0),
        2 => Ok((lambda - 3.0 * rho) / 4.0),
        _ => Err(Error::Domain(format!("perturbation order must be 1 or 2, got {q}"))),
    }
}

/// Counts samples where `φ` is positive real on circles of the given radii.
pub fn positive_real_hits(prob: &ScalarProblem, radii: &[f64], samples: usize) -> usize {
    boundary_locus(prob, samples, radii)
        .par_iter()
        .filter(|p| p.z != Complex64::new(1.0, 0.0))
        .filter(|p| match p.value {
            None => true,
            Some(v) => {
                let s = v.norm().max(f64::MIN_POSITIVE);
                v.im.abs() < BAND * s && v.re > BAND * s
            }
        })
        .count()
}

/// Winding number of the closed curve `θ ↦ f(e^{iθ})` around 0, with
/// adaptive refinement where the argument changes quickly.
pub fn winding_number<F>(f: F, samples: usize) -> Option<i64>
where
    F: Fn(Complex64) -> Complex64,
{
    let at = |t: f64| f(Complex64::from_polar(1.0, t));
    let m = samples.max(64);
    let mut total = 0.0;
    let mut prev_t = 0.0;
    let mut prev = at(0.0);
    if prev.norm() == 0.0 || !prev.norm().is_finite() {
        return None;
    }
    for k in 1..=m {
        let t = 2.0 * PI * k as f64 / m as f64;
        let v = at(t);
        total += arg_increment(&at, prev_t, prev, t, v, 0)?;
        prev_t = t;
        prev = v;
    }
    Some((total / (2.0 * PI)).round() as i64)
}

fn arg_increment<F>(at: &F, t0: f64, v0: Complex64, t1: f64, v1: Complex64, depth: u32) -> Option<f64>
where
    F: Fn(f64) -> Complex64,
{
    if v1.norm() == 0.0 || !v1.norm().is_finite() {
        return None;
    }
    let d = (v1 / v0).arg();
    if d.abs() < 0.25 || depth >= 40 {
        return Some(d);
    }
    let tm = 0.5 * (t0 + t1);
    let vm = at(tm);
    Some(arg_increment(at, t0, v0, tm, vm, depth + 1)? + arg_increment(at, tm, vm, t1, v1, depth + 1)?)
}

/// System version: `D^{α_i} u = (A + B) u` with `B u` extrapolated and a
/// perturbation matrix `κ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemProblem {
    pub family: Family,
    pub order: usize,
    pub alphas: Vec<f64>,
    pub q: usize,
    pub a: Matrix,
    pub b: Matrix,
    pub kappa: Matrix,
}

impl SystemProblem {
    pub fn new(family: Family, order: usize, alphas: Vec<f64>, q: usize, a: Matrix, b: Matrix, kappa: Matrix) -> Result<Self> {
        check_q(q)?;
        let d = alphas.len();
        for (name, m) in [("A", &a), ("B", &b), ("kappa", &kappa)] {
            if m.rows() != d || m.cols() != d {
                return Err(invalid("matrix", format!("{name} must be {d}x{d}")));
            }
        }
        for &al in &alphas {
            if !(al > 0.0 && al <= 1.0) {
                return Err(invalid("alpha", format!("orders must lie in (0, 1], got {al}")));
            }
            GeneratingFunction::new(family, order, al, 1.0)?;
        }
        Ok(Self {
            family,
            order,
            alphas,
            q,
            a,
            b,
            kappa,
        })
    }

    pub fn dim(&self) -> usize {
        self.alphas.len()
    }

    /// `det(diag(ω(z)) - diag(τ^α)[(A + B) - (B + κ)(1 - z)^q])`.
    pub fn determinant(&self, tau: f64, z: Complex64) -> Complex64 {
        let d = self.dim();
        let pz = (Complex64::new(1.0, 0.0) - z).powu(self.q as u32);
        let mut m = vec![Complex64::new(0.0, 0.0); d * d];
        for i in 0..d {
            let ta = tau.powf(self.alphas[i]);
            for j in 0..d {
                let lin = self.a[(i, j)] + self.b[(i, j)];
                let pert = self.b[(i, j)] + self.kappa[(i, j)];
                m[i * d + j] = -ta * (lin - pert * pz);
            }
            let gf = GeneratingFunction::new(self.family, self.order, self.alphas[i], 1.0).expect("validated");
            m[i * d + i] += gf.symbol(z);
        }
        complex_det(d, m)
    }
}

/// `system_stability_check`: no zero of the determinant in the closed disk.
pub fn system_stability_check(prob: &SystemProblem, tau: f64, z_samples: usize) -> Result<bool> {
    if !(tau > 0.0) {
        return Err(invalid("tau", "step size must be positive"));
    }
    let scale = (0..prob.dim())
        .map(|i| 1.0 + tau.powf(prob.alphas[i]) * (prob.a.norm_inf() + 2.0 * prob.b.norm_inf() + prob.kappa.norm_inf()) * 4.0)
        .product::<f64>();
    let floor = BAND * scale;
    let f = |z: Complex64| prob.determinant(tau, z);
    let min_abs = (0..z_samples.max(64))
        .into_par_iter()
        .map(|k| f(Complex64::from_polar(1.0, 2.0 * PI * k as f64 / z_samples.max(64) as f64)).norm())
        .reduce(|| f64::INFINITY, f64::min);
    if !(min_abs > floor) {
        return Ok(false);
    }
    Ok(winding_number(f, z_samples) == Some(0))
}

/// One raster cell of a stability region plot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RasterCell {
    pub re_xi: f64,
    pub im_xi: f64,
    pub stable: bool,
}

/// Stability region in the `ξ = τ^α λ` plane for `ρ = γλ`, `κ = -θρ`.
#[allow(clippy::too_many_arguments)]
pub fn region_raster(
    gf: &GeneratingFunction,
    q: usize,
    gamma: f64,
    theta: f64,
    re_range: (f64, f64),
    im_range: (f64, f64),
    nx: usize,
    ny: usize,
    z_samples: usize,
) -> Result<Vec<RasterCell>> {
    check_q(q)?;
    if nx < 2 || ny < 2 {
        return Err(invalid("grid", "raster needs at least 2x2 cells"));
    }
    let gf = gf.with_tau(1.0)?;
    let den = move |z: Complex64| {
        Complex64::new(1.0 + gamma, 0.0) - gamma * (1.0 - theta) * (Complex64::new(1.0, 0.0) - z).powu(q as u32)
    };
    let cells: Vec<(f64, f64)> = (0..ny)
        .flat_map(|j| {
            (0..nx).map(move |i| {
                let re = re_range.0 + (re_range.1 - re_range.0) * i as f64 / (nx - 1) as f64;
                let im = im_range.0 + (im_range.1 - im_range.0) * j as f64 / (ny - 1) as f64;
                (re, im)
            })
        })
        .collect();
    Ok(cells
        .into_par_iter()
        .map(|(re, im)| {
            let xi = Complex64::new(re, im);
            // Zeros of ω(z) - ξ den(z) inside the disk.
            let count = winding_number(|z| gf.symbol(z) - xi * den(z), z_samples);
            RasterCell {
                re_xi: re,
                im_xi: im,
                stable: count == Some(0),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model_problem(alpha: f64, kappa: f64) -> ScalarProblem {
        ScalarProblem::new(Family::Gngf, 2, alpha, 2, -1.0, -2.0, kappa).unwrap()
    }

    #[test]
    fn criterion_examples() {
        assert_eq!(unconditional_criterion(-1.0, -2.0, 2).unwrap(), 1.25);
        assert_eq!(unconditional_criterion(-1.0, -1.0, 1).unwrap(), 0.0);
        assert_eq!(unconditional_criterion(-1.0, 0.0, 2).unwrap(), -0.25);
        assert!(unconditional_criterion(1.0, 0.0, 2).is_err());
        assert!(unconditional_criterion(-1.0, 0.5, 2).is_err());
        assert!(unconditional_criterion(-1.0, -1.0, 3).is_err());
    }

    #[test]
    fn locus_passes_through_origin() {
        let p = model_problem(0.5, 0.0);
        let v = p.locus_value(Complex64::new(1.0, 0.0)).unwrap();
        assert_eq!(v.norm(), 0.0);
    }

    #[test]
    fn threshold_locus_never_positive_real() {
        let p = model_problem(0.5, 1.3);
        assert_eq!(positive_real_hits(&p, &[1.0], 100_000), 0);
    }

    #[test]
    fn closed_form_crossing_at_minus_one() {
        for (alpha, kappa) in [(0.5, 0.0), (0.9, 0.4), (0.1, 1.0)] {
            let p = model_problem(alpha, kappa);
            let x = 2f64.powf(alpha) * (1.0 + alpha) / (5.0 - 4.0 * kappa);
            let s = stability_interval(&p, 1e30, 1e-10).unwrap();
            assert!((s.tau_star / x.powf(1.0 / alpha) - 1.0).abs() < 1e-8, "{s:?}");
        }
    }

    #[test]
    fn unbounded_at_threshold() {
        let s = stability_interval(&model_problem(0.2, 1.25), 1e30, 1e-8).unwrap();
        assert!(s.unbounded);
    }

    #[test]
    fn winding_counts_simple_zeros() {
        assert_eq!(winding_number(|z| z - 0.5, 256), Some(1));
        assert_eq!(winding_number(|z| (z - 0.5) * (z + 0.3), 256), Some(2));
        assert_eq!(winding_number(|z| z - 2.0, 256), Some(0));
    }

    #[test]
    fn scalar_system_matches_scalar_locus() {
        let alpha = 0.5;
        let sys = SystemProblem::new(
            Family::Gngf,
            2,
            vec![alpha],
            2,
            Matrix::from_diag(&[-1.0]),
            Matrix::from_diag(&[-2.0]),
            Matrix::from_diag(&[0.0]),
        )
        .unwrap();
        let tau_star = model_problem(alpha, 0.0);
        let s = stability_interval(&tau_star, 1e30, 1e-10).unwrap().tau_star;
        assert!(system_stability_check(&sys, 0.9 * s, 4096).unwrap());
        assert!(!system_stability_check(&sys, 1.1 * s, 4096).unwrap());
    }
}
