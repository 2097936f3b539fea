//! Separating-hyperplane feasibility programs for one collision pair along
//! one plan segment, and their lowering to semidefinite constraints.
//!
//! The hyperplane `a(t)ᵀx + b(t) = 0` has polynomial coefficients of degree
//! `d_h` in the segment parameter `t ∈ [0, 1]`. Body `a` of a pair must stay
//! on the side `a(t)ᵀx + b(t) ≥ 1`, body `b` on `a(t)ᵀx + b(t) ≤ -1`.
//! Positions are rational in `t`, so every condition is cleared of its
//! (positive) denominator `g(t)` and becomes a polynomial or polynomial
//! matrix required nonnegative (PSD) on `[0, 1]`.
//!
//! A scalar `c(t) ≥ 0` on `[0, 1]` is certified by
//!
//! ```text
//!   even deg c = 2d:      c = λ + t(1-t) ν + γ,   deg λ ≤ 2d, deg ν ≤ 2d-2
//!   odd  deg c = 2d+1:    c = t λ + (1-t) ν + γ,  deg λ ≤ 2d, deg ν ≤ 2d
//! ```
//!
//! with `λ, ν` sums of squares written through Gram matrices in the monomial
//! basis and an explicit slack `γ ≥ γ_min`. A matrix `M(t) ⪰ 0` is handled
//! through its scalarization `yᵀM(t)y` with Gram bases `t^a y_i` and slack
//! `γ‖y‖²`.

use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conic::{BlockKind, BlockValue, Entry, SdpProblem, Solution};
use crate::geometry::{CollisionPair, Shape};
use crate::kinematics::{ComposedFK, KinematicChain, KinematicsError};
use crate::plan::PlanSegment;
use crate::polynomial::{PolyError, PolyMatrix, Polynomial, Var};
use crate::scene::Scene;

pub const CERTIFICATE_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SosError {
    #[error("template targets degree {template} but the constraint has degree {found}")]
    TemplateMismatch { template: u32, found: u32 },
    #[error("template degrees are not the canonical ones for degree {0}")]
    NonCanonicalTemplate(u32),
    #[error("constraint is not affine in the hyperplane coefficients: {0}")]
    NotAffine(PolyError),
    #[error("constraint matrix is not symmetric")]
    Asymmetric,
    #[error("constraint references hyperplane coefficients but the program has none")]
    MissingHyperplane,
    #[error("collision pair references body {0}, which does not exist")]
    UnknownBody(usize),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}

/// Hyperplane with polynomial coefficients `a_c(t) = Σ_p u[c(d+1)+p] t^p`
/// (`c = 0, 1, 2`) and `b(t)` stored as component 3.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HyperplaneTemplate {
    pub degree: u32,
}

impl HyperplaneTemplate {
    pub fn new(degree: u32) -> Self {
        Self { degree }
    }

    pub fn num_coefficients(&self) -> usize {
        4 * (self.degree as usize + 1)
    }

    pub fn unknown(&self, component: usize, power: u32) -> Var {
        Var::Unknown((component * (self.degree as usize + 1)) as u32 + power)
    }

    fn component(&self, c: usize) -> Polynomial {
        (0..=self.degree).fold(Polynomial::zero(), |acc, p| {
            acc + &Polynomial::var(self.unknown(c, p)) * &Polynomial::univariate(Var::Time, &power(p))
        })
    }

    /// Symbolic `a(t)`.
    pub fn a(&self) -> [Polynomial; 3] {
        [0, 1, 2].map(|c| self.component(c))
    }

    /// Symbolic `b(t)`.
    pub fn b(&self) -> Polynomial {
        self.component(3)
    }

    /// Splits solved coefficient values into `(a, b)` coefficient vectors.
    pub fn instantiate(&self, values: &[f64]) -> ([Vec<f64>; 3], Vec<f64>) {
        let n = self.degree as usize + 1;
        let comp = |c: usize| values[c * n..(c + 1) * n].to_vec();
        ([comp(0), comp(1), comp(2)], comp(3))
    }
}

fn power(p: u32) -> Vec<f64> {
    let mut v = vec![0.0; p as usize + 1];
    v[p as usize] = 1.0;
    v
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

/// Markov–Lukács multiplier layout for a target degree on `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalDecompTemplate {
    pub target_degree: u32,
    pub parity: Parity,
    pub lambda_degree: u32,
    /// `None` when the `ν` term vanishes (`n = 0`).
    pub nu_degree: Option<u32>,
}

impl IntervalDecompTemplate {
    /// Coefficients of `w_λ` (ascending powers of `t`).
    pub fn lambda_weight(&self) -> Vec<f64> {
        match self.parity {
            Parity::Even => vec![1.0],
            Parity::Odd => vec![0.0, 1.0],
        }
    }

    /// Coefficients of `w_ν`.
    pub fn nu_weight(&self) -> Vec<f64> {
        match self.parity {
            Parity::Even => vec![0.0, 1.0, -1.0],
            Parity::Odd => vec![1.0, -1.0],
        }
    }

    pub fn lambda_basis_size(&self) -> usize {
        self.lambda_degree as usize / 2 + 1
    }

    pub fn nu_basis_size(&self) -> Option<usize> {
        self.nu_degree.map(|d| d as usize / 2 + 1)
    }
}

pub fn decomposition_template(n: u32) -> IntervalDecompTemplate {
    let d = n / 2;
    if n % 2 == 0 {
        IntervalDecompTemplate {
            target_degree: n,
            parity: Parity::Even,
            lambda_degree: 2 * d,
            nu_degree: (d > 0).then(|| 2 * d - 2),
        }
    } else {
        IntervalDecompTemplate { target_degree: n, parity: Parity::Odd, lambda_degree: 2 * d, nu_degree: Some(2 * d) }
    }
}

/// Which side of the hyperplane a body must stay on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// `a(t)ᵀx + b(t) ≥ 1`
    Positive,
    /// `a(t)ᵀx + b(t) ≤ -1`
    Negative,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Positive => 1.0,
            Side::Negative => -1.0,
        }
    }
}

/// `poly(t, u) ≥ 0` on `[0, 1]`; `degree` bounds the degree in `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarConstraint {
    pub poly: Polynomial,
    pub degree: u32,
}

/// `matrix(t, u) ⪰ 0` on `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixConstraint {
    pub matrix: PolyMatrix,
    pub degree: u32,
}

fn univariate_from(coeffs: &[f64]) -> Polynomial {
    Polynomial::univariate(Var::Time, coeffs)
}

/// `sign·(a(t)ᵀf(t) + b(t)g(t)) - g(t)` for a point at `f/g`.
fn offset_value(point: &ComposedFK, hp: &HyperplaneTemplate, side: Side) -> (Polynomial, Polynomial) {
    let g = univariate_from(&point.denominator_coeffs());
    let a = hp.a();
    let mut lin = &hp.b() * &g;
    for (w, aw) in a.iter().enumerate() {
        lin = lin + aw * &univariate_from(&point.numerator_coeffs(w));
    }
    (lin.scale(side.sign()) - g.clone(), g)
}

fn constraint_degree(point: &ComposedFK, hp: &HyperplaneTemplate, poly_degree: u32) -> u32 {
    (hp.degree + point.degree_bound).max(poly_degree)
}

/// One scalar constraint per vertex: `a(t)ᵀf + (b(t) - 1)g ≥ 0` on the
/// positive side, `-a(t)ᵀf - (b(t) + 1)g ≥ 0` on the negative side.
pub fn build_polytope_side(vertices: &[ComposedFK], hp: &HyperplaneTemplate, side: Side) -> Vec<ScalarConstraint> {
    vertices
        .iter()
        .map(|v| {
            let (poly, _) = offset_value(v, hp, side);
            let degree = constraint_degree(v, hp, poly.degree_in(Var::Time));
            ScalarConstraint { poly, degree }
        })
        .collect()
}

/// `[[h I, r g a], [r g aᵀ, h]] ⪰ 0` with `h = sign·(aᵀf + b g) - g`, which is
/// `sign·(aᵀc + b) ≥ 1 + r‖a‖` by a Schur complement.
pub fn build_sphere_side(center: &ComposedFK, radius: f64, hp: &HyperplaneTemplate, side: Side) -> MatrixConstraint {
    let (h, g) = offset_value(center, hp, side);
    let a = hp.a();
    let rga: Vec<Polynomial> = a.iter().map(|aw| (aw * &g).scale(radius)).collect();
    let matrix = PolyMatrix::symmetric_from_fn(4, |i, j| match (i, j) {
        (3, 3) => h.clone(),
        (i, 3) => rga[i].clone(),
        (i, j) if i == j => h.clone(),
        _ => Polynomial::zero(),
    });
    let poly_degree = matrix.degree_in(Var::Time);
    MatrixConstraint { matrix, degree: constraint_degree(center, hp, poly_degree) }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoweringOptions {
    /// Floor on the slack `γ`.
    pub gamma_min: f64,
    /// Adds an objective maximizing every slack (each capped at 1).
    pub maximize_margin: bool,
}

impl Default for LoweringOptions {
    fn default() -> Self {
        Self { gamma_min: 1e-6, maximize_margin: false }
    }
}

/// Blocks and rows created for one lowered constraint.
#[derive(Clone, Debug, PartialEq)]
pub struct LoweredConstraint {
    pub template: IntervalDecompTemplate,
    /// 1 for scalar constraints.
    pub matrix_size: usize,
    pub lambda_block: usize,
    pub nu_block: Option<usize>,
    /// Nonnegative block holding `γ - γ_min` (and its cap in margin mode).
    pub slack_block: usize,
    pub rows: Range<usize>,
}

/// Coefficient vectors (length `n + 1`) of the constant part and of every
/// hyperplane unknown.
type AffineCoeffs = (Vec<f64>, Vec<(Var, Vec<f64>)>);

fn affine_coefficients(poly: &Polynomial, n: u32) -> Result<AffineCoeffs, SosError> {
    let (constant, linear) = poly.split_affine().map_err(SosError::NotAffine)?;
    let pad = |p: &Polynomial| -> Result<Vec<f64>, SosError> {
        let mut v = p.univariate_coeff_vector(Var::Time).map_err(SosError::NotAffine)?;
        if v.len() > n as usize + 1 {
            return Err(SosError::TemplateMismatch { template: n, found: v.len() as u32 - 1 });
        }
        v.resize(n as usize + 1, 0.0);
        Ok(v)
    };
    let c = pad(&constant)?;
    let lin = linear.iter().map(|(v, p)| Ok((*v, pad(p)?))).collect::<Result<Vec<_>, SosError>>()?;
    Ok((c, lin))
}

/// Entries for the `t^k y_i y_j` coefficient of `-w(t)·z(t,y)ᵀQ z(t,y)` with
/// `z = (t^a y_i)` indexed `a·m + i`, `a < half`.
fn gram_entries(block: usize, weight: &[f64], half: usize, m: usize, k: usize, i: usize, j: usize) -> Vec<Entry> {
    let mut out = Vec::new();
    for (e, &w) in weight.iter().enumerate() {
        if w == 0.0 || e > k {
            continue;
        }
        let s = k - e;
        for a in 0..half.min(s + 1) {
            let b = s - a;
            if b >= half || (i == j && a > b) {
                continue;
            }
            out.push(Entry::new(block, a * m + i, b * m + j, -w));
        }
    }
    out
}

fn check_template(template: &IntervalDecompTemplate, degree: u32) -> Result<(), SosError> {
    if *template != decomposition_template(template.target_degree) {
        return Err(SosError::NonCanonicalTemplate(template.target_degree));
    }
    if template.target_degree < degree {
        return Err(SosError::TemplateMismatch { template: template.target_degree, found: degree });
    }
    Ok(())
}

fn unknown_entry(hyperplane_block: Option<usize>, v: Var, value: f64) -> Result<Entry, SosError> {
    match (hyperplane_block, v) {
        (Some(b), Var::Unknown(k)) => Ok(Entry::scalar(b, k as usize, value)),
        _ => Err(SosError::MissingHyperplane),
    }
}

struct MultiplierBlocks {
    lambda: usize,
    nu: Option<usize>,
    slack: usize,
}

fn add_multiplier_blocks(problem: &mut SdpProblem, template: &IntervalDecompTemplate, m: usize, opts: &LoweringOptions) -> MultiplierBlocks {
    let lambda = problem.add_block(BlockKind::Psd, template.lambda_basis_size() * m);
    let nu = template.nu_basis_size().map(|s| problem.add_block(BlockKind::Psd, s * m));
    let slack = problem.add_block(BlockKind::NonNeg, if opts.maximize_margin { 2 } else { 1 });
    MultiplierBlocks { lambda, nu, slack }
}

fn add_margin_rows(problem: &mut SdpProblem, slack: usize, opts: &LoweringOptions) {
    if opts.maximize_margin {
        problem.add_constraint(vec![Entry::scalar(slack, 0, 1.0), Entry::scalar(slack, 1, 1.0)], 1.0);
        problem.objective.get_or_insert_with(Vec::new).push(Entry::scalar(slack, 0, -1.0));
    }
}

/// Appends the coefficient-matching equalities for `c(t) ≥ 0` on `[0, 1]`.
/// Produces exactly `n + 1` rows (plus one cap row in margin mode).
pub fn lower_scalar_constraint(
    problem: &mut SdpProblem,
    hyperplane_block: Option<usize>,
    c: &ScalarConstraint,
    template: &IntervalDecompTemplate,
    opts: &LoweringOptions,
) -> Result<LoweredConstraint, SosError> {
    check_template(template, c.degree.max(c.poly.degree_in(Var::Time)))?;
    let n = template.target_degree;
    let (constant, linear) = affine_coefficients(&c.poly, n)?;
    let blocks = add_multiplier_blocks(problem, template, 1, opts);
    let (w_l, w_n) = (template.lambda_weight(), template.nu_weight());
    let start = problem.num_constraints();
    for k in 0..=n as usize {
        let mut entries = Vec::new();
        for (v, coeffs) in &linear {
            if coeffs[k] != 0.0 {
                entries.push(unknown_entry(hyperplane_block, *v, coeffs[k])?);
            }
        }
        entries.extend(gram_entries(blocks.lambda, &w_l, template.lambda_basis_size(), 1, k, 0, 0));
        if let (Some(nb), Some(size)) = (blocks.nu, template.nu_basis_size()) {
            entries.extend(gram_entries(nb, &w_n, size, 1, k, 0, 0));
        }
        let mut rhs = -constant[k];
        if k == 0 {
            entries.push(Entry::scalar(blocks.slack, 0, -1.0));
            rhs += opts.gamma_min;
        }
        problem.add_constraint(entries, rhs);
    }
    let rows = start..problem.num_constraints();
    add_margin_rows(problem, blocks.slack, opts);
    Ok(LoweredConstraint {
        template: *template,
        matrix_size: 1,
        lambda_block: blocks.lambda,
        nu_block: blocks.nu,
        slack_block: blocks.slack,
        rows,
    })
}

/// Appends the equalities for `M(t) ⪰ 0` on `[0, 1]`: one row per power of
/// `t` and per `i ≤ j`, i.e. `(n + 1)·m(m + 1)/2` rows.
pub fn lower_matrix_constraint(
    problem: &mut SdpProblem,
    hyperplane_block: Option<usize>,
    c: &MatrixConstraint,
    template: &IntervalDecompTemplate,
    opts: &LoweringOptions,
) -> Result<LoweredConstraint, SosError> {
    if !c.matrix.is_symmetric() || c.matrix.rows() != c.matrix.cols() {
        return Err(SosError::Asymmetric);
    }
    check_template(template, c.degree.max(c.matrix.degree_in(Var::Time)))?;
    let n = template.target_degree;
    let m = c.matrix.rows();
    let blocks = add_multiplier_blocks(problem, template, m, opts);
    let (w_l, w_n) = (template.lambda_weight(), template.nu_weight());
    let start = problem.num_constraints();
    for i in 0..m {
        for j in i..m {
            let scale = if i == j { 1.0 } else { 2.0 };
            let (constant, linear) = affine_coefficients(c.matrix.get(i, j), n)?;
            for k in 0..=n as usize {
                let mut entries = Vec::new();
                for (v, coeffs) in &linear {
                    if coeffs[k] != 0.0 {
                        entries.push(unknown_entry(hyperplane_block, *v, scale * coeffs[k])?);
                    }
                }
                entries.extend(gram_entries(blocks.lambda, &w_l, template.lambda_basis_size(), m, k, i, j));
                if let (Some(nb), Some(size)) = (blocks.nu, template.nu_basis_size()) {
                    entries.extend(gram_entries(nb, &w_n, size, m, k, i, j));
                }
                let mut rhs = -scale * constant[k];
                if k == 0 && i == j {
                    entries.push(Entry::scalar(blocks.slack, 0, -1.0));
                    rhs += opts.gamma_min;
                }
                problem.add_constraint(entries, rhs);
            }
        }
    }
    let rows = start..problem.num_constraints();
    add_margin_rows(problem, blocks.slack, opts);
    Ok(LoweredConstraint {
        template: *template,
        matrix_size: m,
        lambda_block: blocks.lambda,
        nu_block: blocks.nu,
        slack_block: blocks.slack,
        rows,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ConstraintKind {
    Vertex { index: usize },
    Sphere,
}

/// One lowered constraint of a pair program and the body it came from.
#[derive(Clone, Debug, PartialEq)]
pub struct ProgramConstraint {
    pub body: usize,
    pub side: Side,
    pub kind: ConstraintKind,
    pub lowered: LoweredConstraint,
}

/// Feasibility program for one (segment, pair) cell plus the symbol table
/// needed to read a certificate back from a solution.
#[derive(Clone, Debug, PartialEq)]
pub struct PairProgram {
    pub problem: SdpProblem,
    pub pair: CollisionPair,
    pub segment: usize,
    pub hyperplane: HyperplaneTemplate,
    pub hyperplane_block: usize,
    pub gamma_min: f64,
    pub constraints: Vec<ProgramConstraint>,
}

/// A scalar (`Ok`) or matrix (`Err`) condition and where it came from.
pub type BodyConstraint = (ConstraintKind, Result<ScalarConstraint, MatrixConstraint>);

/// Symbolic conditions keeping `body` on `side`, in world coordinates.
pub fn body_constraints(
    chain: &KinematicChain,
    body: &crate::geometry::ConvexBody,
    segment: &PlanSegment,
    hp: &HyperplaneTemplate,
    side: Side,
) -> Result<Vec<BodyConstraint>, SosError> {
    let compose = |p: &nalgebra::Point3<f64>| -> Result<ComposedFK, SosError> {
        let fk = chain.forward_kinematics_rational(KinematicChain::WORLD, body.link, p)?;
        Ok(chain.compose_with_plan(&fk, segment)?)
    };
    Ok(match &body.shape {
        Shape::Polytope { vertices } => {
            let composed = vertices.iter().map(compose).collect::<Result<Vec<_>, _>>()?;
            build_polytope_side(&composed, hp, side)
                .into_iter()
                .enumerate()
                .map(|(index, c)| (ConstraintKind::Vertex { index }, Ok(c)))
                .collect()
        }
        Shape::Sphere { center, radius } => {
            vec![(ConstraintKind::Sphere, Err(build_sphere_side(&compose(center)?, *radius, hp, side)))]
        }
    })
}

pub fn assemble_pair_program(
    scene: &Scene,
    pair: CollisionPair,
    segment_index: usize,
    segment: &PlanSegment,
    degree: u32,
    opts: &LoweringOptions,
) -> Result<PairProgram, SosError> {
    let hyperplane = HyperplaneTemplate::new(degree);
    let mut problem = SdpProblem::new();
    let hyperplane_block = problem.add_block(BlockKind::Free, hyperplane.num_coefficients());
    let mut constraints = Vec::new();
    for (body_index, side) in [(pair.a, Side::Positive), (pair.b, Side::Negative)] {
        let body = scene.bodies.get(body_index).ok_or(SosError::UnknownBody(body_index))?;
        for (kind, c) in body_constraints(&scene.chain, body, segment, &hyperplane, side)? {
            let lowered = match c {
                Ok(s) => {
                    let t = decomposition_template(s.degree);
                    lower_scalar_constraint(&mut problem, Some(hyperplane_block), &s, &t, opts)?
                }
                Err(mc) => {
                    let t = decomposition_template(mc.degree);
                    lower_matrix_constraint(&mut problem, Some(hyperplane_block), &mc, &t, opts)?
                }
            };
            constraints.push(ProgramConstraint { body: body_index, side, kind, lowered });
        }
    }
    problem.canonicalize();
    Ok(PairProgram {
        problem,
        pair,
        segment: segment_index,
        hyperplane,
        hyperplane_block,
        gamma_min: opts.gamma_min,
        constraints,
    })
}

/// Symmetric matrix stored row-major with a description of its basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GramMatrix {
    pub size: usize,
    pub basis: String,
    pub entries: Vec<f64>,
}

impl GramMatrix {
    pub fn from_matrix(m: &nalgebra::DMatrix<f64>, basis: String) -> Self {
        let size = m.nrows();
        let entries = (0..size).flat_map(|i| (0..size).map(move |j| (i, j))).map(|(i, j)| m[(i, j)]).collect();
        Self { size, basis, entries }
    }

    pub fn to_matrix(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.size, self.size, &self.entries)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.size + j]
    }
}

/// Describes the Gram basis `t^a y_i` (index `a·m + i`).
pub fn basis_descriptor(half: usize, m: usize) -> String {
    if m == 1 {
        format!("t^a, a = 0..{}", half - 1)
    } else {
        format!("t^a y_i at index a*{m}+i, a = 0..{}, i = 0..{}", half - 1, m - 1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintCertificate {
    pub body: usize,
    pub side: Side,
    #[serde(flatten)]
    pub kind: ConstraintKind,
    pub target_degree: u32,
    pub parity: Parity,
    pub lambda_degree: u32,
    pub nu_degree: Option<u32>,
    pub matrix_size: usize,
    pub lambda: GramMatrix,
    pub nu: Option<GramMatrix>,
    pub gamma: f64,
}

impl ConstraintCertificate {
    pub fn template(&self) -> IntervalDecompTemplate {
        IntervalDecompTemplate {
            target_degree: self.target_degree,
            parity: self.parity,
            lambda_degree: self.lambda_degree,
            nu_degree: self.nu_degree,
        }
    }
}

/// Separating hyperplane and positivity multipliers for one cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub version: u32,
    pub pair: CollisionPair,
    pub segment: usize,
    pub degree: u32,
    pub a: [Vec<f64>; 3],
    pub b: Vec<f64>,
    pub constraints: Vec<ConstraintCertificate>,
}

impl PairProgram {
    /// Reads the certificate out of a solution of `self.problem`.
    pub fn certificate(&self, sol: &Solution) -> Certificate {
        let coeffs: Vec<f64> = match &sol.blocks[self.hyperplane_block] {
            BlockValue::Vector(v) => v.iter().copied().collect(),
            BlockValue::Psd(_) => unreachable!("hyperplane block is free"),
        };
        let (a, b) = self.hyperplane.instantiate(&coeffs);
        let constraints = self
            .constraints
            .iter()
            .map(|pc| {
                let l = &pc.lowered;
                let m = l.matrix_size;
                let gram = |block: usize, half: usize| {
                    let mat = sol.blocks[block].matrix();
                    let sym = (mat + mat.transpose()) * 0.5;
                    GramMatrix::from_matrix(&sym, basis_descriptor(half, m))
                };
                let slack = sol.blocks[l.slack_block].vector()[0];
                ConstraintCertificate {
                    body: pc.body,
                    side: pc.side,
                    kind: pc.kind,
                    target_degree: l.template.target_degree,
                    parity: l.template.parity,
                    lambda_degree: l.template.lambda_degree,
                    nu_degree: l.template.nu_degree,
                    matrix_size: m,
                    lambda: gram(l.lambda_block, l.template.lambda_basis_size()),
                    nu: l.nu_block.zip(l.template.nu_basis_size()).map(|(nb, s)| gram(nb, s)),
                    gamma: self.gamma_min + slack.max(0.0),
                }
            })
            .collect();
        Certificate {
            version: CERTIFICATE_VERSION,
            pair: self.pair,
            segment: self.segment,
            degree: self.hyperplane.degree,
            a,
            b,
            constraints,
        }
    }
}
