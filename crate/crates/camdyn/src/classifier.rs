//! Canonical-form reduction of the local piecewise-linear map and the
//! Feigin eigenvalue-parity classification of its border collision, plus
//! direct iteration of the local map for its own bifurcation diagram.

use crate::cam::Side;
use crate::corner_map::{selector_h, LocalPwlMap};
use crate::error::ClassifyError;
use nalgebra::{Matrix2, RowVector2, Vector2};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::io::Write;

/// Eigenvalues of a real 2x2 matrix via the characteristic quadratic.
pub fn eigenvalues_2x2(a: &Matrix2<f64>) -> [Complex64; 2] {
    let tr = a.trace();
    let det = a.determinant();
    let disc = tr * tr - 4.0 * det;
    if disc >= 0.0 {
        let root = disc.sqrt();
        // stable quadratic: avoid cancellation in the smaller root
        let q = -0.5 * (tr + tr.signum() * root);
        let (l1, l2) = if q != 0.0 { (-q, det / -q) } else { (0.5 * tr + 0.5 * root, 0.5 * tr - 0.5 * root) };
        [Complex64::new(l1.max(l2), 0.0), Complex64::new(l1.min(l2), 0.0)]
    } else {
        let im = (-disc).sqrt() * 0.5;
        [Complex64::new(0.5 * tr, im), Complex64::new(0.5 * tr, -im)]
    }
}

/// The map after eliminating the parameter from the switching function and
/// applying the observability similarity transform.
#[derive(Debug, Clone)]
pub struct CanonicalizedMap {
    /// Companion-form branch matrices `[[tr, 1], [-det, 0]]`.
    pub a_bar_minus: Matrix2<f64>,
    pub a_bar_plus: Matrix2<f64>,
    /// Parameter vector after the switching-plane shift, branch independent.
    pub b_tilde: Vector2<f64>,
    /// Parameter vector in the canonical basis, `W b_tilde`.
    pub b_bar: Vector2<f64>,
    /// Switching row in the canonical basis (`[1, 0]`).
    pub c_bar: RowVector2<f64>,
    /// The similarity transform `W = T- O-`.
    pub w: Matrix2<f64>,
    /// Coefficient `D/c1` of the shift `dx1 -> dx1 + (D/c1) dT`.
    pub shift_coefficient: f64,
}

/// Feigin verdicts distinguished by the parity test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    /// Odd total count of real eigenvalues beyond +1: the colliding fixed
    /// points merge and disappear (nonsmooth saddle node).
    NonsmoothFold,
    /// Even total count: the fixed point persists across the border.
    Persistence,
    /// An eigenvalue sits numerically on +1; the parity test is meaningless.
    UndeterminedByEigenvalueTest,
}

/// Eigenvalue inventory and the parity verdict.
#[derive(Debug, Clone)]
pub struct ClassificationResult {
    pub eig_minus: [Complex64; 2],
    pub eig_plus: [Complex64; 2],
    pub real_gt_one_minus: usize,
    pub real_gt_one_plus: usize,
    pub real_lt_minus_one_minus: usize,
    pub real_lt_minus_one_plus: usize,
    pub verdict: Verdict,
}

const REAL_EIG_IMAG_TOL: f64 = 1e-12;
const MARGINAL_EIG_TOL: f64 = 1e-8;

/// Recasts the map into the border-collision canonical form.
///
/// First the parameter is removed from the switching function by the shift
/// `dx1 -> dx1 + (D/c1) dT`, giving the branch-independent parameter vector
/// with entries `b_i - (a_i1/c1) d`; then the similarity `x = W^{-1} x~`
/// with `W = T- O-`, `O- = [C; C A-]`, `T- = [[1, 0], [d1-, 1]]` puts the
/// branch matrices into companion form and the switching row into `[1, 0]`.
pub fn canonicalize(map: &LocalPwlMap) -> Result<CanonicalizedMap, ClassifyError> {
    let c1 = map.c[0];
    if c1.abs() <= 1e-14 * map.c.norm().max(1e-300) {
        return Err(ClassifyError::UnobservableBoundary { c1 });
    }
    let shift = map.d / c1;
    let tilde = |a: &Matrix2<f64>, b: &Vector2<f64>| {
        Vector2::new(b[0] - a[(0, 0)] * shift, b[1] - a[(1, 0)] * shift)
    };
    let b_tilde_minus = tilde(&map.a_minus, &map.b_minus);
    let b_tilde_plus = tilde(&map.a_plus, &map.b_plus);
    let agree = (b_tilde_minus - b_tilde_plus).norm();
    if agree > 1e-6 * b_tilde_minus.norm().max(1e-12) {
        return Err(ClassifyError::SingularObservability { det: agree });
    }

    let o_minus = Matrix2::from_rows(&[map.c, map.c * map.a_minus]);
    let det = o_minus.determinant();
    if det.abs() <= 1e-14 * o_minus.norm().powi(2).max(1e-300) {
        return Err(ClassifyError::SingularObservability { det });
    }
    let d1_minus = -map.a_minus.trace();
    let t_minus = Matrix2::new(1.0, 0.0, d1_minus, 1.0);
    let w = t_minus * o_minus;
    let w_inv = w.try_inverse().ok_or(ClassifyError::SingularObservability { det })?;
    Ok(CanonicalizedMap {
        a_bar_minus: w * map.a_minus * w_inv,
        a_bar_plus: w * map.a_plus * w_inv,
        b_tilde: b_tilde_minus,
        b_bar: w * b_tilde_minus,
        c_bar: map.c * w_inv,
        w,
        shift_coefficient: shift,
    })
}

/// Applies Feigin's parity test to the branch eigenvalues.
pub fn classify(map: &LocalPwlMap) -> ClassificationResult {
    let eig_minus = eigenvalues_2x2(&map.a_minus);
    let eig_plus = eigenvalues_2x2(&map.a_plus);
    let reals = |eig: &[Complex64; 2]| -> Vec<f64> {
        eig.iter()
            .filter(|l| l.im.abs() <= REAL_EIG_IMAG_TOL * l.norm().max(1.0))
            .map(|l| l.re)
            .collect()
    };
    let rm = reals(&eig_minus);
    let rp = reals(&eig_plus);
    let marginal = rm.iter().chain(rp.iter()).any(|l| (l - 1.0).abs() < MARGINAL_EIG_TOL);
    let count_gt = |v: &[f64]| v.iter().filter(|l| **l > 1.0).count();
    let count_lt = |v: &[f64]| v.iter().filter(|l| **l < -1.0).count();
    let real_gt_one_minus = count_gt(&rm);
    let real_gt_one_plus = count_gt(&rp);
    let verdict = if marginal {
        Verdict::UndeterminedByEigenvalueTest
    } else if (real_gt_one_minus + real_gt_one_plus) % 2 == 1 {
        Verdict::NonsmoothFold
    } else {
        Verdict::Persistence
    };
    ClassificationResult {
        eig_minus,
        eig_plus,
        real_gt_one_minus,
        real_gt_one_plus,
        real_lt_minus_one_minus: count_lt(&rm),
        real_lt_minus_one_plus: count_lt(&rp),
        verdict,
    }
}

/// One branch fixed point of the local map at a parameter offset.
#[derive(Debug, Clone, Copy)]
pub struct BranchFixedPoint {
    pub side: Side,
    pub point: Vector2<f64>,
    /// Lies on its own side of the switching plane.
    pub admissible: bool,
    /// Spectral radius of its branch matrix below one.
    pub stable: bool,
}

/// One parameter slice of the local-map bifurcation diagram.
#[derive(Debug, Clone)]
pub struct LocalMapSlice {
    pub delta_t: f64,
    pub fixed_points: Vec<BranchFixedPoint>,
    /// First components of surviving orbit iterates.
    pub orbit: Vec<f64>,
    /// All random seeds escaped the linearization neighbourhood.
    pub escaped: bool,
}

/// Bifurcation diagram of the local map under direct iteration.
#[derive(Debug, Clone)]
pub struct LocalMapDiagram {
    pub slices: Vec<LocalMapSlice>,
    pub escape_radius_factor: f64,
}

/// Iterates the local map across a `delta_T` range, recording surviving
/// orbits and the admissible branch fixed points.
pub fn iterate_local_map(
    map: &LocalPwlMap,
    delta_t_range: (f64, f64),
    n_points: usize,
    iterations: usize,
    transient: usize,
    seed: u64,
) -> LocalMapDiagram {
    let b_scale = canonicalize(map).map(|c| c.b_tilde.norm()).unwrap_or_else(|_| map.b_minus.norm());
    let escape_factor = 1e4;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut slices = Vec::with_capacity(n_points);
    for i in 0..n_points {
        let delta_t = if n_points == 1 {
            delta_t_range.0
        } else {
            delta_t_range.0 + (delta_t_range.1 - delta_t_range.0) * i as f64 / (n_points - 1) as f64
        };
        let mut fixed_points = Vec::new();
        for side in [Side::Left, Side::Right] {
            let (a, b) = map.branch(side);
            if let Some(inv) = (Matrix2::identity() - a).try_inverse() {
                let fp = inv * (b * delta_t);
                let s = map.switching(&fp, delta_t);
                let admissible = s == 0.0 || map.active_side(&fp, delta_t) == side;
                let stable = eigenvalues_2x2(a).iter().all(|l| l.norm() < 1.0);
                fixed_points.push(BranchFixedPoint { side, point: fp, admissible, stable });
            }
        }
        let escape = escape_factor * b_scale * delta_t.abs();
        let seed_scale = fixed_points
            .iter()
            .map(|f| f.point.norm())
            .fold(b_scale * delta_t.abs(), f64::max);
        let mut orbit = Vec::new();
        let mut any_survived = false;
        for _ in 0..4 {
            let mut x = Vector2::new(
                seed_scale * 1e-2 * (rng.gen::<f64>() * 2.0 - 1.0),
                seed_scale * 1e-2 * (rng.gen::<f64>() * 2.0 - 1.0),
            );
            let mut alive = true;
            for k in 0..iterations {
                x = map.apply(&x, delta_t);
                if !x[0].is_finite() || (escape > 0.0 && x.norm() > escape) {
                    alive = false;
                    break;
                }
                if k >= transient {
                    orbit.push(x[0]);
                }
            }
            if alive {
                any_survived = true;
            } else {
                orbit.truncate(orbit.len().saturating_sub(0));
            }
        }
        if !any_survived {
            orbit.clear();
        }
        slices.push(LocalMapSlice { delta_t, fixed_points, orbit, escaped: !any_survived });
    }
    LocalMapDiagram { slices, escape_radius_factor: escape_factor }
}

impl LocalMapDiagram {
    /// CSV rows `delta_T,branch,value,stability`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "delta_T,branch,value,stability")?;
        for s in &self.slices {
            for f in &s.fixed_points {
                if !f.admissible {
                    continue;
                }
                let branch = match f.side {
                    Side::Left => "minus",
                    Side::Right => "plus",
                };
                let st = if f.stable { "stable" } else { "unstable" };
                writeln!(w, "{},{},{},{}", s.delta_t, branch, f.point[0], st)?;
            }
            for v in &s.orbit {
                writeln!(w, "{},orbit,{},bounded", s.delta_t, v)?;
            }
            if s.escaped {
                writeln!(w, "{},orbit,,escaped", s.delta_t)?;
            }
        }
        Ok(())
    }
}

/// Serializable mirror of [`ClassificationResult`] for report files.
#[derive(Debug, Serialize)]
pub struct ClassificationReport {
    pub eig_minus: [[f64; 2]; 2],
    pub eig_plus: [[f64; 2]; 2],
    pub real_gt_one_minus: usize,
    pub real_gt_one_plus: usize,
    pub real_lt_minus_one_minus: usize,
    pub real_lt_minus_one_plus: usize,
    pub verdict: Verdict,
}

impl ClassificationResult {
    pub fn report(&self) -> ClassificationReport {
        let pack = |e: &[Complex64; 2]| [[e[0].re, e[0].im], [e[1].re, e[1].im]];
        ClassificationReport {
            eig_minus: pack(&self.eig_minus),
            eig_plus: pack(&self.eig_plus),
            real_gt_one_minus: self.real_gt_one_minus,
            real_gt_one_plus: self.real_gt_one_plus,
            real_lt_minus_one_minus: self.real_lt_minus_one_minus,
            real_lt_minus_one_plus: self.real_lt_minus_one_plus,
            verdict: self.verdict,
        }
    }

    pub fn text(&self) -> String {
        let fmt = |e: &Complex64| {
            if e.im == 0.0 {
                format!("{}", e.re)
            } else {
                format!("{} {} j{}", e.re, if e.im >= 0.0 { "+" } else { "-" }, e.im.abs())
            }
        };
        let verdict = match self.verdict {
            Verdict::NonsmoothFold => "nonsmooth fold (saddle node): the colliding fixed point ceases to exist",
            Verdict::Persistence => "persistence: the fixed point crosses the border and survives",
            Verdict::UndeterminedByEigenvalueTest => "undetermined: an eigenvalue sits on +1",
        };
        format!(
            "eigenvalues of A-: {}, {}\neigenvalues of A+: {}, {}\n\
             real eigenvalues > +1: {} (A-) + {} (A+) = {}\n\
             real eigenvalues < -1: {} (A-) + {} (A+)\nverdict: {}\n",
            fmt(&self.eig_minus[0]),
            fmt(&self.eig_minus[1]),
            fmt(&self.eig_plus[0]),
            fmt(&self.eig_plus[1]),
            self.real_gt_one_minus,
            self.real_gt_one_plus,
            self.real_gt_one_minus + self.real_gt_one_plus,
            self.real_lt_minus_one_minus,
            self.real_lt_minus_one_plus,
            verdict
        )
    }
}
