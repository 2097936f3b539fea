//! Independent verification of certificates and sampling-based falsification.
//!
//! Verification rebuilds every constraint from the scene, the segment and
//! the certificate's concrete hyperplane using plain coefficient-vector
//! arithmetic, never the symbolic builder. For a decomposition
//! `C(t) = w_λ(t) Λ(t) + w_ν(t) N(t) + γ I + R(t)` the remainder satisfies
//! `‖R(t)‖₂ ≤ Σ_k ‖R_k‖_∞` on `[0, 1]` (row-sum norm of each coefficient
//! matrix), so `Σ_k ‖R_k‖_∞ ≤ γ` together with PSD Gram matrices proves
//! `C(t) ⪰ 0` on the whole interval. Scalar constraints are the `1 × 1` case.
//!
//! Exact mode converts every float to a rational, composes the kinematics
//! with the plan exactly, proves each projected Gram matrix PSD by exact
//! elimination (after a tiny identity shift when rounding left it
//! indefinite) and repeats the residual comparison without rounding.

use nalgebra::DMatrix;
use num::{BigRational, Num, One, Signed, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{min_distance, CollisionPair, Shape};
use crate::kinematics::{KinematicChain, KinematicsError};
use crate::plan::{MotionPlan, PlanSegment};
use crate::polynomial::{Polynomial, Var};
use crate::scene::Scene;
use crate::soscert::{decomposition_template, ConstraintCertificate, ConstraintKind, Certificate, GramMatrix, Side};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckOptions {
    /// Gram eigenvalues below `-psd_tol` reject; smaller negative ones are
    /// projected to zero.
    pub psd_tol: f64,
    pub exact: bool,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self { psd_tol: 1e-9, exact: false }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Verified,
    Rejected,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintCheck {
    pub body: usize,
    pub side: Side,
    #[serde(flatten)]
    pub kind: ConstraintKind,
    /// `Σ_k ‖R_k‖_∞` after projection.
    pub residual: f64,
    pub gamma: f64,
    pub lambda_min_eigenvalue: f64,
    pub nu_min_eigenvalue: Option<f64>,
    /// Total negative eigenvalue mass removed by the projection.
    pub projected_mass: f64,
    /// Exact-mode residual (rounded for display).
    pub exact_residual: Option<f64>,
    pub passed: bool,
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub verdict: Verdict,
    pub exact: bool,
    pub constraints: Vec<ConstraintCheck>,
    pub message: Option<String>,
}

impl CheckReport {
    fn structural(message: String, exact: bool) -> Self {
        Self { verdict: Verdict::Rejected, exact, constraints: Vec::new(), message: Some(message) }
    }

    pub fn is_verified(&self) -> bool {
        self.verdict == Verdict::Verified
    }
}

fn conv<T: Num + Clone>(a: &[T], b: &[T]) -> Vec<T> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![T::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            out[i + j] = out[i + j].clone() + x.clone() * y.clone();
        }
    }
    out
}

fn add_into<T: Num + Clone>(acc: &mut Vec<T>, v: &[T], s: &T) {
    if acc.len() < v.len() {
        acc.resize(v.len(), T::zero());
    }
    for (a, x) in acc.iter_mut().zip(v) {
        *a = a.clone() + s.clone() * x.clone();
    }
}

/// Concrete data of one point along the segment: `f / g`.
struct PointData<T> {
    f: [Vec<T>; 3],
    g: Vec<T>,
}

/// Coefficient vectors of the `m × m` constraint matrix, row-major.
fn target_matrix<T: Num + Clone + Signed>(
    point: &PointData<T>,
    a: &[Vec<T>; 3],
    b: &[T],
    side: Side,
    radius: Option<&T>,
) -> (usize, Vec<Vec<T>>) {
    let mut lin = conv(b, &point.g);
    for w in 0..3 {
        add_into(&mut lin, &conv(&a[w], &point.f[w]), &T::one());
    }
    let sign = if side == Side::Positive { T::one() } else { -T::one() };
    let mut h: Vec<T> = lin.into_iter().map(|v| sign.clone() * v).collect();
    add_into(&mut h, &point.g, &-T::one());
    match radius {
        None => (1, vec![h]),
        Some(r) => {
            let mut out = vec![Vec::new(); 16];
            for i in 0..4 {
                out[i * 4 + i] = h.clone();
            }
            for i in 0..3 {
                let rga: Vec<T> = conv(&a[i], &point.g).into_iter().map(|v| r.clone() * v).collect();
                out[i * 4 + 3] = rga.clone();
                out[3 * 4 + i] = rga;
            }
            (4, out)
        }
    }
}

/// `Σ_e w_e Σ_{a+b=k-e} Q[(a,i),(b,j)]` for the Gram basis `t^a y_i`.
fn decomposition_coeff<T: Num + Clone>(q: &[T], half: usize, m: usize, w: &[T], k: usize, i: usize, j: usize) -> T {
    let size = half * m;
    let mut acc = T::zero();
    for (e, we) in w.iter().enumerate() {
        if e > k || we.is_zero() {
            continue;
        }
        let s = k - e;
        let mut inner = T::zero();
        for a in 0..half.min(s + 1) {
            let b = s - a;
            if b < half {
                inner = inner + q[(a * m + i) * size + b * m + j].clone();
            }
        }
        acc = acc + we.clone() * inner;
    }
    acc
}

struct Decomposition<'a, T> {
    m: usize,
    n: usize,
    lambda: (&'a [T], usize, Vec<T>),
    nu: Option<(&'a [T], usize, Vec<T>)>,
    gamma: T,
}

/// `Σ_k max_i Σ_j |R_k[i][j]|`.
fn residual_bound<T: Num + Clone + Signed + PartialOrd>(target: &[Vec<T>], d: &Decomposition<T>) -> T {
    let m = d.m;
    let kmax = target.iter().map(Vec::len).max().unwrap_or(0).max(d.n + 1);
    let mut total = T::zero();
    for k in 0..kmax {
        let mut worst = T::zero();
        for i in 0..m {
            let mut row = T::zero();
            for j in 0..m {
                let mut r = target[i * m + j].get(k).cloned().unwrap_or_else(T::zero);
                let (q, half, w) = &d.lambda;
                r = r - decomposition_coeff(q, *half, m, w, k, i, j);
                if let Some((q, half, w)) = &d.nu {
                    r = r - decomposition_coeff(q, *half, m, w, k, i, j);
                }
                if k == 0 && i == j {
                    r = r - d.gamma.clone();
                }
                row = row + r.abs();
            }
            if row > worst {
                worst = row;
            }
        }
        total = total + worst;
    }
    total
}

/// Symmetrizes, rejects eigenvalues below `-psd_tol` and clips the rest.
/// Returns `(projected, min eigenvalue, clipped mass)`.
fn project_gram(g: &GramMatrix, psd_tol: f64) -> Result<(DMatrix<f64>, f64, f64), String> {
    if g.entries.len() != g.size * g.size || g.entries.iter().any(|v| !v.is_finite()) {
        return Err("malformed Gram matrix".into());
    }
    if g.size == 0 {
        return Ok((DMatrix::zeros(0, 0), 0.0, 0.0));
    }
    let m = g.to_matrix();
    let sym = (&m + m.transpose()) * 0.5;
    let eig = sym.clone().symmetric_eigen();
    let min = eig.eigenvalues.min();
    if min < -psd_tol {
        return Err(format!("Gram eigenvalue {min:e} below -{psd_tol:e}"));
    }
    if min >= 0.0 {
        return Ok((sym, min, 0.0));
    }
    let mass: f64 = eig.eigenvalues.iter().filter(|&&l| l < 0.0).map(|l| -l).sum();
    let clipped = eig.eigenvalues.map(|l| l.max(0.0));
    let proj = &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
    Ok(((&proj + proj.transpose()) * 0.5, min, mass))
}

fn rat(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite value")
}

/// Positive semidefiniteness by exact symmetric elimination: a zero pivot
/// must come with a zero column.
fn exact_positive_semidefinite(mut a: Vec<Vec<BigRational>>) -> bool {
    let n = a.len();
    for k in 0..n {
        let pivot = a[k][k].clone();
        if pivot.is_negative() {
            return false;
        }
        if pivot.is_zero() {
            if (k + 1..n).any(|i| !a[i][k].is_zero()) {
                return false;
            }
            continue;
        }
        for i in k + 1..n {
            if a[i][k].is_zero() {
                continue;
            }
            let f = &a[i][k] / &pivot;
            for j in k + 1..n {
                let delta = &f * &a[k][j];
                a[i][j] -= delta;
            }
        }
    }
    true
}

/// Exact row-major Gram matrix proven PSD: the projected matrix itself when
/// it is, otherwise `Q + ηI` with a tiny `η`.
fn exact_gram(proj: &DMatrix<f64>) -> Option<Vec<BigRational>> {
    let n = proj.nrows();
    let rows = |eta: f64| -> Vec<Vec<BigRational>> {
        (0..n)
            .map(|i| (0..n).map(|j| if i == j { rat(proj[(i, j)]) + rat(eta) } else { rat(proj[(i, j)]) }).collect())
            .collect()
    };
    let plain = rows(0.0);
    if exact_positive_semidefinite(plain.clone()) {
        return Some(plain.into_iter().flatten().collect());
    }
    let shifted = rows(1e-12 * proj.amax().max(1.0));
    exact_positive_semidefinite(shifted.clone()).then(|| shifted.into_iter().flatten().collect())
}

fn exact_compose(p: &Polynomial, segment: &PlanSegment) -> Vec<BigRational> {
    let coords: Vec<Vec<BigRational>> = (0..segment.dim()).map(|k| segment.coeffs(k).into_iter().map(rat).collect()).collect();
    let mut out: Vec<BigRational> = Vec::new();
    for (mono, c) in p.terms() {
        let mut term = vec![rat(c)];
        for &(v, e) in mono.exponents() {
            if let Var::Config(k) = v {
                for _ in 0..e {
                    term = conv(&term, &coords[k as usize]);
                }
            }
        }
        add_into(&mut out, &term, &BigRational::one());
    }
    out
}

/// Constraint layout a certificate must follow for `pair`.
fn expected_layout(scene: &Scene, pair: CollisionPair) -> Result<Vec<(usize, Side, ConstraintKind)>, String> {
    let mut out = Vec::new();
    for (body, side) in [(pair.a, Side::Positive), (pair.b, Side::Negative)] {
        let b = scene.bodies.get(body).ok_or_else(|| format!("pair references unknown body {body}"))?;
        match &b.shape {
            Shape::Polytope { vertices } => {
                out.extend((0..vertices.len()).map(|index| (body, side, ConstraintKind::Vertex { index })));
            }
            Shape::Sphere { .. } => out.push((body, side, ConstraintKind::Sphere)),
        }
    }
    Ok(out)
}

fn check_structure(cc: &ConstraintCertificate) -> Result<(), String> {
    let t = cc.template();
    if t != decomposition_template(cc.target_degree) {
        return Err(format!("multiplier degrees are not canonical for degree {}", cc.target_degree));
    }
    let expected_m = cc.matrix_size;
    if expected_m == 0 || (matches!(cc.kind, ConstraintKind::Vertex { .. }) && expected_m != 1) {
        return Err(format!("matrix size {expected_m} does not fit a {:?} constraint", cc.kind));
    }
    if cc.lambda.size != t.lambda_basis_size() * expected_m {
        return Err("λ Gram size does not match its basis".into());
    }
    match (&cc.nu, t.nu_basis_size()) {
        (None, None) => {}
        (Some(g), Some(s)) if g.size == s * expected_m => {}
        _ => return Err("ν Gram size does not match its basis".into()),
    }
    if !(cc.gamma.is_finite() && cc.gamma >= 0.0) {
        return Err("slack margin must be finite and nonnegative".into());
    }
    Ok(())
}

/// Re-derives every positivity claim of `cert` for `segment` of `scene`.
pub fn verify_certificate(cert: &Certificate, scene: &Scene, segment: &PlanSegment, opts: &CheckOptions) -> CheckReport {
    let chain = &scene.chain;
    let layout = match expected_layout(scene, cert.pair) {
        Ok(l) => l,
        Err(e) => return CheckReport::structural(e, opts.exact),
    };
    let got: Vec<(usize, Side, ConstraintKind)> = cert.constraints.iter().map(|c| (c.body, c.side, c.kind)).collect();
    if got != layout {
        return CheckReport::structural("constraint list does not match the collision pair".into(), opts.exact);
    }
    if cert.constraints.iter().any(|c| c.kind == ConstraintKind::Sphere && c.matrix_size != 4) {
        return CheckReport::structural("sphere constraints must carry a 4 x 4 certificate".into(), opts.exact);
    }
    let nh = cert.degree as usize + 1;
    if cert.a.iter().chain(std::iter::once(&cert.b)).any(|v| v.len() != nh || v.iter().any(|x| !x.is_finite())) {
        return CheckReport::structural("hyperplane coefficients do not match the stated degree".into(), opts.exact);
    }
    if segment.dim() != chain.dof() {
        return CheckReport::structural("segment dimension does not match the chain".into(), opts.exact);
    }

    let mut checks = Vec::with_capacity(cert.constraints.len());
    for cc in &cert.constraints {
        let body = &scene.bodies[cc.body];
        let (point, radius) = match (&body.shape, cc.kind) {
            (Shape::Polytope { vertices }, ConstraintKind::Vertex { index }) => (vertices[index], None),
            (Shape::Sphere { center, radius }, ConstraintKind::Sphere) => (*center, Some(*radius)),
            _ => unreachable!("layout checked above"),
        };
        checks.push(check_constraint(cert, cc, chain, segment, body.link, &point, radius, opts));
    }
    let verdict = if checks.iter().all(|c| c.passed) { Verdict::Verified } else { Verdict::Rejected };
    CheckReport { verdict, exact: opts.exact, constraints: checks, message: None }
}

#[allow(clippy::too_many_arguments)]
fn check_constraint(
    cert: &Certificate,
    cc: &ConstraintCertificate,
    chain: &KinematicChain,
    segment: &PlanSegment,
    link: usize,
    point: &nalgebra::Point3<f64>,
    radius: Option<f64>,
    opts: &CheckOptions,
) -> ConstraintCheck {
    let composed = chain
        .forward_kinematics_rational(KinematicChain::WORLD, link, point)
        .and_then(|fk| Ok((chain.compose_with_plan(&fk, segment)?, fk)));
    let (composed, fk) = match composed {
        Ok(v) => v,
        Err(e) => {
            let mut out = empty_check(cc);
            out.note = Some(e.to_string());
            return out;
        }
    };
    let point_f = PointData { f: [0, 1, 2].map(|w| composed.numerator_coeffs(w)), g: composed.denominator_coeffs() };
    let (_, target) = target_matrix(&point_f, &cert.a, &cert.b, cc.side, radius.as_ref());
    let exact_target = || {
        let point_q = PointData {
            f: [0, 1, 2].map(|w| exact_compose(fk.components[w].numerator(), segment)),
            g: exact_compose(fk.denominator(), segment),
        };
        let a_q = cert.a.clone().map(|v| v.into_iter().map(rat).collect::<Vec<_>>());
        let b_q: Vec<BigRational> = cert.b.iter().copied().map(rat).collect();
        target_matrix(&point_q, &a_q, &b_q, cc.side, radius.map(rat).as_ref()).1
    };
    check_decomposition(cc, &target, exact_target, opts)
}

fn empty_check(cc: &ConstraintCertificate) -> ConstraintCheck {
    ConstraintCheck {
        body: cc.body,
        side: cc.side,
        kind: cc.kind,
        residual: f64::INFINITY,
        gamma: cc.gamma,
        lambda_min_eigenvalue: f64::NAN,
        nu_min_eigenvalue: None,
        projected_mass: 0.0,
        exact_residual: None,
        passed: false,
        note: None,
    }
}

/// Checks the multipliers of `cc` against a given constraint: `target` holds
/// the coefficient vectors of the `m × m` matrix in row-major order (a
/// single vector for scalar constraints).
pub fn verify_decomposition(cc: &ConstraintCertificate, target: &[Vec<f64>], opts: &CheckOptions) -> ConstraintCheck {
    let exact_target = || target.iter().map(|v| v.iter().copied().map(rat).collect()).collect();
    check_decomposition(cc, target, exact_target, opts)
}

fn check_decomposition(
    cc: &ConstraintCertificate,
    target: &[Vec<f64>],
    exact_target: impl FnOnce() -> Vec<Vec<BigRational>>,
    opts: &CheckOptions,
) -> ConstraintCheck {
    let mut out = empty_check(cc);
    if let Err(e) = check_structure(cc) {
        out.note = Some(e);
        return out;
    }
    let m = cc.matrix_size;
    if target.len() != m * m || target.iter().flatten().any(|v| !v.is_finite()) {
        out.note = Some("constraint data does not match the matrix size".into());
        return out;
    }
    let (lam, lam_min, lam_mass) = match project_gram(&cc.lambda, opts.psd_tol) {
        Ok(v) => v,
        Err(e) => {
            out.note = Some(format!("λ: {e}"));
            return out;
        }
    };
    out.lambda_min_eigenvalue = lam_min;
    out.projected_mass = lam_mass;
    let nu = match cc.nu.as_ref().map(|g| project_gram(g, opts.psd_tol)).transpose() {
        Ok(v) => v,
        Err(e) => {
            out.note = Some(format!("ν: {e}"));
            return out;
        }
    };
    if let Some((_, min, mass)) = &nu {
        out.nu_min_eigenvalue = Some(*min);
        out.projected_mass += mass;
    }

    let t = cc.template();
    let n = t.target_degree as usize;
    let lam_half = t.lambda_basis_size();
    let nu_half = t.nu_basis_size().unwrap_or(0);
    let row_major = |q: &DMatrix<f64>| -> Vec<f64> { q.transpose().iter().copied().collect() };

    let lam_v = row_major(&lam);
    let nu_v: Option<Vec<f64>> = nu.as_ref().map(|(q, _, _)| row_major(q));
    let d = Decomposition {
        m,
        n,
        lambda: (&lam_v[..], lam_half, t.lambda_weight()),
        nu: nu_v.as_deref().map(|q| (q, nu_half, t.nu_weight())),
        gamma: cc.gamma,
    };
    out.residual = residual_bound(target, &d);

    // projection moves each coefficient by at most the clipped mass times the weights
    if out.projected_mass > 0.0 {
        let raw_l = row_major(&cc.lambda.to_matrix());
        let raw_n: Option<Vec<f64>> = cc.nu.as_ref().map(|g| row_major(&g.to_matrix()));
        let raw = Decomposition {
            m,
            n,
            lambda: (&raw_l[..], lam_half, t.lambda_weight()),
            nu: raw_n.as_deref().map(|q| (q, nu_half, t.nu_weight())),
            gamma: cc.gamma,
        };
        let before = residual_bound(target, &raw);
        let basis = (lam_half.max(nu_half) * m) as f64;
        let bound = 4.0 * basis * basis * out.projected_mass * (n as f64 + 2.0) + 1e-15 * before.max(1.0);
        if (out.residual - before).abs() > bound {
            out.note = Some("projection changed the residual more than the clipped mass allows".into());
            return out;
        }
    }
    if !(out.residual <= cc.gamma) {
        out.note = Some(format!("residual {:e} exceeds slack {:e}", out.residual, cc.gamma));
        return out;
    }

    if opts.exact {
        let Some(lam_q) = exact_gram(&lam) else {
            out.note = Some("λ is not exactly PSD after the identity shift".into());
            return out;
        };
        let nu_q = match &nu {
            Some((q, _, _)) => match exact_gram(q) {
                Some(v) => Some(v),
                None => {
                    out.note = Some("ν is not exactly PSD after the identity shift".into());
                    return out;
                }
            },
            None => None,
        };
        let weights = |w: Vec<f64>| w.into_iter().map(rat).collect::<Vec<_>>();
        let dq = Decomposition {
            m,
            n,
            lambda: (&lam_q[..], lam_half, weights(t.lambda_weight())),
            nu: nu_q.as_deref().map(|q| (q, nu_half, weights(t.nu_weight()))),
            gamma: rat(cc.gamma),
        };
        let exact = residual_bound(&exact_target(), &dq);
        out.exact_residual = Some(num::ToPrimitive::to_f64(&exact).unwrap_or(f64::INFINITY));
        if exact > dq.gamma {
            out.note = Some("exact residual exceeds slack".into());
            return out;
        }
    }
    out.passed = true;
    out
}

/// A sampled configuration at which two bodies of a pair touch or overlap.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Collision {
    pub segment: usize,
    pub t: f64,
    pub pair: CollisionPair,
    pub configuration: Vec<f64>,
    pub min_distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum FalsifyOutcome {
    CollisionFound(Collision),
    NoneFound { samples: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FalsifyReport {
    pub samples_per_segment: usize,
    #[serde(flatten)]
    pub outcome: FalsifyOutcome,
}

impl FalsifyReport {
    pub fn collision(&self) -> Option<&Collision> {
        match &self.outcome {
            FalsifyOutcome::CollisionFound(c) => Some(c),
            FalsifyOutcome::NoneFound { .. } => None,
        }
    }
}

/// First colliding sample of `segment` at `t_k = k / (n - 1)`, in scan order.
pub fn falsify_segment(
    segment: &PlanSegment,
    index: usize,
    scene: &Scene,
    n: usize,
) -> Result<Option<Collision>, KinematicsError> {
    let chain = &scene.chain;
    if segment.dim() != chain.dof() {
        return Err(KinematicsError::Dimension { expected: chain.dof(), got: segment.dim() });
    }
    if scene.pairs.is_empty() {
        return Ok(None);
    }
    let n = n.max(2);
    let found = (0..n).into_par_iter().find_map_first(|k| {
        let t = k as f64 / (n - 1) as f64;
        let s = segment.eval(t);
        let poses = chain.link_poses(&s).ok()?;
        scene.pairs.iter().find_map(|pair| {
            let a = &scene.bodies[pair.a];
            let b = &scene.bodies[pair.b];
            let d = min_distance(&a.place(&poses[a.link]), &b.place(&poses[b.link]));
            (d <= 0.0).then(|| Collision { segment: index, t, pair: *pair, configuration: s.clone(), min_distance: d })
        })
    });
    Ok(found)
}

/// Scans every segment of `plan` at `n` uniform parameters.
pub fn sample_falsify(plan: &MotionPlan, scene: &Scene, n: usize) -> Result<FalsifyReport, KinematicsError> {
    let n = n.max(2);
    for (i, seg) in plan.segments().iter().enumerate() {
        if let Some(c) = falsify_segment(seg, i, scene, n)? {
            return Ok(FalsifyReport { samples_per_segment: n, outcome: FalsifyOutcome::CollisionFound(c) });
        }
    }
    Ok(FalsifyReport { samples_per_segment: n, outcome: FalsifyOutcome::NoneFound { samples: n * plan.segments().len() } })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plan::linear_segment;
    use crate::soscert::Parity;

    fn t_certificate(lambda: f64) -> ConstraintCertificate {
        ConstraintCertificate {
            body: 0,
            side: Side::Positive,
            kind: ConstraintKind::Vertex { index: 0 },
            target_degree: 1,
            parity: Parity::Odd,
            lambda_degree: 0,
            nu_degree: Some(0),
            matrix_size: 1,
            lambda: GramMatrix { size: 1, basis: "t^a, a = 0..0".into(), entries: vec![lambda] },
            nu: Some(GramMatrix { size: 1, basis: "t^a, a = 0..0".into(), entries: vec![0.0] }),
            gamma: 1e-6,
        }
    }

    #[test]
    fn hand_built_scalar_certificates() {
        let target = vec![vec![0.0, 1.0]];
        for exact in [false, true] {
            let opts = CheckOptions { exact, ..Default::default() };
            let ok = verify_decomposition(&t_certificate(1.0), &target, &opts);
            assert!(ok.passed, "{ok:?}");
            assert!((ok.residual - 1e-6).abs() < 1e-18);
            let bad = verify_decomposition(&t_certificate(-1.0), &target, &opts);
            assert!(!bad.passed);
            assert!(bad.note.unwrap().contains("eigenvalue"));
        }
        // a residual the slack cannot absorb
        let off = verify_decomposition(&t_certificate(1.0 + 1e-5), &target, &CheckOptions::default());
        assert!(!off.passed);
    }

    #[test]
    fn structural_mismatch_is_rejected() {
        let mut cc = t_certificate(1.0);
        cc.lambda_degree = 2;
        assert!(!verify_decomposition(&cc, &[vec![0.0, 1.0]], &CheckOptions::default()).passed);
        let mut cc = t_certificate(1.0);
        cc.nu = None;
        assert!(!verify_decomposition(&cc, &[vec![0.0, 1.0]], &CheckOptions::default()).passed);
    }

    fn two_spheres(offset: f64) -> Scene {
        let doc = format!(
            r#"{{"version": 1,
              "links": [{{"name": "slider", "parent": "world",
                         "joint": {{"kind": "prismatic", "axis": [1, 0, 0], "limits": [-5, 5]}}}}],
              "geometries": [
                {{"name": "moving", "link": "slider", "kind": "sphere", "center": [0, 0, 0], "radius": 0.5}},
                {{"name": "fixed", "link": "world", "kind": "sphere", "center": [{offset}, 0, 0], "radius": 0.5}}],
              "collision_pairs": [{{"geomA": 0, "geomB": 1}}]}}"#
        );
        Scene::from_json(&doc).unwrap()
    }

    #[test]
    fn falsifier() {
        let scene = two_spheres(2.0);
        let through = MotionPlan::new(vec![linear_segment(&[0.0], &[4.0]).unwrap()]).unwrap();
        let report = sample_falsify(&through, &scene, 101).unwrap();
        let c = report.collision().expect("collision");
        assert!(c.min_distance <= 0.0);
        assert_eq!(c.pair, CollisionPair { a: 0, b: 1 });
        // deterministic first hit: contact at slider = 1
        assert!((c.t - 0.25).abs() < 1e-12);

        let parked = MotionPlan::new(vec![PlanSegment::constant(&[-1.0])]).unwrap();
        let report = sample_falsify(&parked, &scene, 1000).unwrap();
        assert_eq!(report.outcome, FalsifyOutcome::NoneFound { samples: 1000 });
    }
}
