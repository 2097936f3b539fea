//! Algebraic kinematic chains and their TC-space rational forward kinematics.
//!
//! Every non-root link hangs off its parent through a rigid origin transform
//! followed by a one-DOF joint: a rotation about `axis` (revolute) or a
//! translation along `axis` (prismatic). Revolute joints are parametrized by
//! `τ = tan(θ/2)`, under which
//!
//! ```text
//! R(τ) = [(1 - τ²) I + 2τ [k]ₓ + 2τ² k kᵀ] / (1 + τ²)
//! ```
//!
//! so positions of points fixed in a link are rational functions whose
//! denominators are products of `1 + τᵢ²` factors.

use std::collections::BTreeMap;

use nalgebra::{Isometry3, Point3, Translation3, UnitQuaternion, Vector3};
use thiserror::Error;

use crate::plan::PlanSegment;
use crate::polynomial::{Polynomial, RationalFunction, Var};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("link index {0} out of range")]
    InvalidLink(usize),
    #[error("joint axis of link `{0}` is not a unit vector")]
    NonUnitAxis(String),
    #[error("revolute limits of link `{0}` must lie strictly inside (-pi, pi)")]
    RevoluteLimits(String),
    #[error("limits of link `{0}` are not ordered")]
    UnorderedLimits(String),
    #[error("parent of link `{0}` must precede it")]
    BadParent(String),
    #[error("plan segment does not bind chain variable {0}")]
    UnboundVariable(Var),
    #[error("configuration has {got} values, chain has {expected} joints")]
    Dimension { expected: usize, got: usize },
}

pub const AXIS_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum JointKind {
    Revolute,
    Prismatic,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Joint {
    pub kind: JointKind,
    pub axis: Vector3<f64>,
    pub origin: Isometry3<f64>,
    /// C-space limits: radians for revolute joints, meters for prismatic.
    pub limits: [f64; 2],
}

impl Joint {
    /// Numeric joint motion for a TC-space value.
    fn motion(&self, s: f64) -> Isometry3<f64> {
        match self.kind {
            JointKind::Revolute => {
                let axis = nalgebra::Unit::new_normalize(self.axis);
                Isometry3::from_parts(
                    Translation3::identity(),
                    UnitQuaternion::from_axis_angle(&axis, 2.0 * s.atan()),
                )
            }
            JointKind::Prismatic => Isometry3::from_parts(
                Translation3::from(self.axis * s),
                UnitQuaternion::identity(),
            ),
        }
    }

    /// Joint limits mapped to TC-space (`tan(θ/2)` for revolute joints).
    pub fn tc_limits(&self) -> [f64; 2] {
        match self.kind {
            JointKind::Revolute => [(self.limits[0] / 2.0).tan(), (self.limits[1] / 2.0).tan()],
            JointKind::Prismatic => self.limits,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Link {
    pub name: String,
    pub parent: Option<usize>,
    pub joint: Option<Joint>,
    /// Index of this link's TC-space variable, if it has a joint.
    pub var: Option<usize>,
}

/// Tree of links rooted at a fixed world frame (link 0).
#[derive(Clone, Debug, PartialEq)]
pub struct KinematicChain {
    links: Vec<Link>,
    joint_links: Vec<usize>,
}

impl Default for KinematicChain {
    fn default() -> Self {
        Self::new()
    }
}

impl KinematicChain {
    pub const WORLD: usize = 0;

    /// A chain containing only the world link.
    pub fn new() -> Self {
        Self {
            links: vec![Link { name: "world".into(), parent: None, joint: None, var: None }],
            joint_links: Vec::new(),
        }
    }

    /// Appends a link below `parent`, returning its index. The joint's TC
    /// variable is `Var::Config(k)` where `k` counts joints in insertion order.
    pub fn add_link(&mut self, name: &str, parent: usize, mut joint: Joint) -> Result<usize, KinematicsError> {
        if parent >= self.links.len() {
            return Err(KinematicsError::BadParent(name.to_string()));
        }
        if (joint.axis.norm() - 1.0).abs() > AXIS_TOLERANCE {
            return Err(KinematicsError::NonUnitAxis(name.to_string()));
        }
        let [lo, hi] = joint.limits;
        if !(lo <= hi) {
            return Err(KinematicsError::UnorderedLimits(name.to_string()));
        }
        if joint.kind == JointKind::Revolute
            && !(lo > -std::f64::consts::PI && hi < std::f64::consts::PI)
        {
            return Err(KinematicsError::RevoluteLimits(name.to_string()));
        }
        joint.axis = joint.axis.normalize();
        let index = self.links.len();
        let var = self.joint_links.len();
        self.links.push(Link { name: name.to_string(), parent: Some(parent), joint: Some(joint), var: Some(var) });
        self.joint_links.push(index);
        Ok(index)
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn link(&self, i: usize) -> Result<&Link, KinematicsError> {
        self.links.get(i).ok_or(KinematicsError::InvalidLink(i))
    }

    pub fn link_index(&self, name: &str) -> Option<usize> {
        self.links.iter().position(|l| l.name == name)
    }

    /// Number of joints, which is also the TC-space dimension.
    pub fn dof(&self) -> usize {
        self.joint_links.len()
    }

    pub fn variables(&self) -> Vec<Var> {
        (0..self.dof()).map(|k| Var::Config(k as u32)).collect()
    }

    /// Joint of the `k`-th TC variable.
    pub fn joint(&self, k: usize) -> &Joint {
        self.links[self.joint_links[k]].joint.as_ref().expect("joint link")
    }

    pub fn variable_name(&self, k: usize) -> &str {
        &self.links[self.joint_links[k]].name
    }

    pub fn variable_names(&self) -> Vec<String> {
        (0..self.dof()).map(|k| self.variable_name(k).to_string()).collect()
    }

    pub fn variable_kind(&self, var: Var) -> Option<JointKind> {
        match var {
            Var::Config(k) if (k as usize) < self.dof() => Some(self.joint(k as usize).kind),
            _ => None,
        }
    }

    /// Links from the world down to `link`, inclusive.
    fn root_path(&self, link: usize) -> Vec<usize> {
        let mut path = vec![link];
        let mut cur = link;
        while let Some(p) = self.links[cur].parent {
            path.push(p);
            cur = p;
        }
        path.reverse();
        path
    }

    /// World pose of every link at the TC-space configuration `s`.
    pub fn link_poses(&self, s: &[f64]) -> Result<Vec<Isometry3<f64>>, KinematicsError> {
        if s.len() != self.dof() {
            return Err(KinematicsError::Dimension { expected: self.dof(), got: s.len() });
        }
        let mut poses = Vec::with_capacity(self.links.len());
        for link in &self.links {
            let pose = match (link.parent, &link.joint, link.var) {
                (Some(p), Some(j), Some(k)) => poses[p] * j.origin * j.motion(s[k]),
                _ => Isometry3::identity(),
            };
            poses.push(pose);
        }
        Ok(poses)
    }

    /// Numeric position of `point` (fixed in `link`) expressed in `frame`.
    pub fn point_position(
        &self,
        frame: usize,
        link: usize,
        point: &Point3<f64>,
        s: &[f64],
    ) -> Result<Point3<f64>, KinematicsError> {
        self.link(frame)?;
        self.link(link)?;
        let poses = self.link_poses(s)?;
        Ok(poses[frame].inverse_transform_point(&(poses[link] * point)))
    }

    /// Symbolic position of `point` (fixed in `link`) expressed in `frame`,
    /// as rational functions of the TC variables on the connecting path.
    pub fn forward_kinematics_rational(
        &self,
        frame: usize,
        link: usize,
        point: &Point3<f64>,
    ) -> Result<RationalFK, KinematicsError> {
        self.link(frame)?;
        self.link(link)?;
        let up = self.root_path(link);
        let down = self.root_path(frame);
        let common = up.iter().zip(&down).take_while(|(a, b)| a == b).count();

        let mut p = RationalPoint::constant(point);
        for &l in up[common..].iter().rev() {
            let link = &self.links[l];
            p = p.apply_joint(link.joint.as_ref().expect("non-root"), link.var.expect("non-root"));
        }
        for &l in &down[common..] {
            let link = &self.links[l];
            p = p.apply_joint_inverse(link.joint.as_ref().expect("non-root"), link.var.expect("non-root"));
        }
        let den = p.den;
        let components = p.num.map(|n| {
            RationalFunction::new(n, den.clone(), true).expect("denominator is a product of 1 + τ² factors")
        });
        Ok(RationalFK { frame, link, point: *point, components })
    }

    /// Composes a symbolic position with a plan segment, yielding univariate
    /// rationals in `t`.
    pub fn compose_with_plan(&self, fk: &RationalFK, segment: &PlanSegment) -> Result<ComposedFK, KinematicsError> {
        let mut bindings = BTreeMap::new();
        let mut degree_bound = 0;
        for v in fk.variables() {
            let Var::Config(k) = v else { continue };
            let k = k as usize;
            if k >= segment.dim() {
                return Err(KinematicsError::UnboundVariable(v));
            }
            let per_var = match self.joint(k).kind {
                JointKind::Revolute => 2,
                JointKind::Prismatic => 1,
            };
            degree_bound += per_var * segment.degree(k);
            bindings.insert(v, segment.coord(k).clone());
        }
        let components = fk.components.clone().map(|c| c.compose(&bindings));
        Ok(ComposedFK { components, degree_bound })
    }
}

/// Point with a shared polynomial denominator.
#[derive(Clone, Debug)]
struct RationalPoint {
    num: [Polynomial; 3],
    den: Polynomial,
}

impl RationalPoint {
    fn constant(p: &Point3<f64>) -> Self {
        Self {
            num: [0, 1, 2].map(|i| Polynomial::constant(p[i])),
            den: Polynomial::constant(1.0),
        }
    }

    fn rotate_const(&self, r: &nalgebra::Matrix3<f64>) -> [Polynomial; 3] {
        [0, 1, 2].map(|i| {
            (0..3).fold(Polynomial::zero(), |acc, j| acc + self.num[j].scale(r[(i, j)]))
        })
    }

    fn translate_const(num: [Polynomial; 3], den: &Polynomial, t: &Vector3<f64>) -> [Polynomial; 3] {
        let mut i = 0;
        num.map(|n| {
            let out = n + den.scale(t[i]);
            i += 1;
            out
        })
    }

    /// Rotation about unit `k` by the TC value `tau`, with `sign = -1` for the
    /// inverse rotation.
    fn rotate_tau(&self, k: &Vector3<f64>, tau: Var, sign: f64) -> Self {
        let t = Polynomial::var(tau);
        let one_minus = Polynomial::univariate(tau, &[1.0, 0.0, -1.0]);
        let two_t = t.scale(2.0 * sign);
        let two_t2 = Polynomial::univariate(tau, &[0.0, 0.0, 2.0]);
        let n = &self.num;
        let cross = [
            &n[2].scale(k[1]) - &n[1].scale(k[2]),
            &n[0].scale(k[2]) - &n[2].scale(k[0]),
            &n[1].scale(k[0]) - &n[0].scale(k[1]),
        ];
        let dot = n[0].scale(k[0]) + n[1].scale(k[1]) + n[2].scale(k[2]);
        let par = &two_t2 * &dot;
        let num = [0, 1, 2].map(|i| &(&one_minus * &n[i]) + &(&two_t * &cross[i]) + par.scale(k[i]));
        let den = &self.den * &Polynomial::univariate(tau, &[1.0, 0.0, 1.0]);
        Self { num, den }
    }

    fn apply_joint(&self, joint: &Joint, var: usize) -> Self {
        let v = Var::Config(var as u32);
        let moved = match joint.kind {
            JointKind::Revolute => self.rotate_tau(&joint.axis, v, 1.0),
            JointKind::Prismatic => {
                let dz = &Polynomial::var(v) * &self.den;
                let mut i = 0;
                let num = self.num.clone().map(|n| {
                    let out = n + dz.scale(joint.axis[i]);
                    i += 1;
                    out
                });
                Self { num, den: self.den.clone() }
            }
        };
        let rot = joint.origin.rotation.to_rotation_matrix().into_inner();
        let num = moved.rotate_const(&rot);
        let num = Self::translate_const(num, &moved.den, &joint.origin.translation.vector);
        Self { num, den: moved.den }
    }

    fn apply_joint_inverse(&self, joint: &Joint, var: usize) -> Self {
        let v = Var::Config(var as u32);
        let inv = joint.origin.inverse();
        let rot = inv.rotation.to_rotation_matrix().into_inner();
        let shifted = Self { num: self.rotate_const(&rot), den: self.den.clone() };
        let num = Self::translate_const(shifted.num, &shifted.den, &inv.translation.vector);
        let base = Self { num, den: shifted.den };
        match joint.kind {
            JointKind::Revolute => base.rotate_tau(&joint.axis, v, -1.0),
            JointKind::Prismatic => {
                let dz = &Polynomial::var(v) * &base.den;
                let mut i = 0;
                let num = base.num.map(|n| {
                    let out = &n - &dz.scale(joint.axis[i]);
                    i += 1;
                    out
                });
                Self { num, den: base.den }
            }
        }
    }
}

/// Position of a point fixed in `link`, expressed in `frame`, as three
/// rational functions of the TC variables sharing one positive denominator.
#[derive(Clone, Debug, PartialEq)]
pub struct RationalFK {
    pub frame: usize,
    pub link: usize,
    pub point: Point3<f64>,
    pub components: [RationalFunction; 3],
}

impl RationalFK {
    pub fn denominator(&self) -> &Polynomial {
        self.components[0].denominator()
    }

    pub fn variables(&self) -> Vec<Var> {
        let mut vars = self.denominator().vars();
        for c in &self.components {
            vars.extend(c.numerator().vars());
        }
        vars.into_iter().collect()
    }

    pub fn eval(&self, s: &[f64]) -> Result<Point3<f64>, crate::polynomial::PolyError> {
        let value = |v: Var| match v {
            Var::Config(k) => s.get(k as usize).copied(),
            _ => None,
        };
        Ok(Point3::new(
            self.components[0].eval_with(value)?,
            self.components[1].eval_with(value)?,
            self.components[2].eval_with(value)?,
        ))
    }
}

/// Position along a plan segment: univariate rationals in `t` and the
/// a-priori degree bound derived from the segment degrees.
#[derive(Clone, Debug, PartialEq)]
pub struct ComposedFK {
    pub components: [RationalFunction; 3],
    pub degree_bound: u32,
}

impl ComposedFK {
    pub fn numerator_coeffs(&self, w: usize) -> Vec<f64> {
        self.components[w]
            .numerator()
            .univariate_coeff_vector(Var::Time)
            .expect("composed FK is univariate in t")
    }

    pub fn denominator_coeffs(&self) -> Vec<f64> {
        self.components[0]
            .denominator()
            .univariate_coeff_vector(Var::Time)
            .expect("composed FK is univariate in t")
    }

    pub fn eval(&self, t: f64) -> Point3<f64> {
        let value = |v: Var| (v == Var::Time).then_some(t);
        Point3::new(
            self.components[0].eval_with(value).expect("positive denominator"),
            self.components[1].eval_with(value).expect("positive denominator"),
            self.components[2].eval_with(value).expect("positive denominator"),
        )
    }
}
