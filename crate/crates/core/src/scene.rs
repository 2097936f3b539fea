//! Scene and plan documents (JSON, schema version 1).
//!
//! ```json
//! {
//!   "version": 1,
//!   "links": [
//!     {"name": "rail", "parent": "world",
//!      "joint": {"kind": "prismatic", "axis": [1, 0, 0],
//!                "origin": {"rpy": [0, 0, 0], "xyz": [0, 0, 0]},
//!                "limits": [-2, 2]}}
//!   ],
//!   "geometries": [
//!     {"name": "tip", "link": "rail", "kind": "sphere", "center": [0, 1, 0], "radius": 0.1},
//!     {"name": "wall", "link": "world", "kind": "polytope", "vertices": [[1, 0, 0], [1, 1, 0]]}
//!   ],
//!   "collision_pairs": [{"geomA": "tip", "geomB": "wall"}]
//! }
//! ```
//!
//! Geometry references in `collision_pairs` may be names or indices. The
//! implicit root link is called `world`. Lengths are meters, angles radians.

use std::path::Path;

use nalgebra::{Isometry3, Point3, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{CollisionPair, ConvexBody, GeometryError};
use crate::kinematics::{Joint, JointKind, KinematicChain, KinematicsError};
use crate::plan::{hermite_cubic_segment, linear_segment, MotionPlan, PlanError, PlanSegment};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("cannot read {path}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported schema version {0}")]
    Version(u32),
    #[error("duplicate link name `{0}`")]
    DuplicateLink(String),
    #[error("link `{link}` references unknown parent `{parent}`")]
    UnknownParent { link: String, parent: String },
    #[error("geometry references unknown link `{0}`")]
    UnknownLink(String),
    #[error("collision pair references unknown geometry `{0}`")]
    UnknownGeometry(String),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Plan(#[from] PlanError),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SceneDocument {
    pub version: u32,
    #[serde(default)]
    pub links: Vec<LinkSpec>,
    #[serde(default)]
    pub geometries: Vec<GeometrySpec>,
    #[serde(default)]
    pub collision_pairs: Vec<PairSpec>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LinkSpec {
    pub name: String,
    pub parent: String,
    pub joint: JointSpec,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum JointKindSpec {
    Revolute,
    Prismatic,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JointSpec {
    pub kind: JointKindSpec,
    pub axis: [f64; 3],
    #[serde(default)]
    pub origin: OriginSpec,
    pub limits: [f64; 2],
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct OriginSpec {
    #[serde(default)]
    pub rpy: [f64; 3],
    #[serde(default)]
    pub xyz: [f64; 3],
}

impl OriginSpec {
    pub fn isometry(&self) -> Isometry3<f64> {
        let [r, p, y] = self.rpy;
        Isometry3::from_parts(
            Translation3::new(self.xyz[0], self.xyz[1], self.xyz[2]),
            UnitQuaternion::from_euler_angles(r, p, y),
        )
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GeometrySpec {
    #[serde(default)]
    pub name: Option<String>,
    pub link: String,
    #[serde(flatten)]
    pub shape: ShapeSpec,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ShapeSpec {
    Sphere { center: [f64; 3], radius: f64 },
    Polytope { vertices: Vec<[f64; 3]> },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GeomRef {
    Index(usize),
    Name(String),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PairSpec {
    #[serde(rename = "geomA")]
    pub geom_a: GeomRef,
    #[serde(rename = "geomB")]
    pub geom_b: GeomRef,
}

/// A kinematic chain with attached collision bodies and the pairs to certify.
#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub chain: KinematicChain,
    pub bodies: Vec<ConvexBody>,
    pub pairs: Vec<CollisionPair>,
}

impl Scene {
    pub fn new(chain: KinematicChain, bodies: Vec<ConvexBody>, pairs: Vec<CollisionPair>) -> Self {
        let mut pairs = pairs;
        pairs.sort();
        pairs.dedup();
        Self { chain, bodies, pairs }
    }

    pub fn from_document(doc: &SceneDocument) -> Result<Self, SceneError> {
        if doc.version != SCHEMA_VERSION {
            return Err(SceneError::Version(doc.version));
        }
        let mut chain = KinematicChain::new();
        for l in &doc.links {
            if chain.link_index(&l.name).is_some() {
                return Err(SceneError::DuplicateLink(l.name.clone()));
            }
            let parent = chain.link_index(&l.parent).ok_or_else(|| SceneError::UnknownParent {
                link: l.name.clone(),
                parent: l.parent.clone(),
            })?;
            let joint = Joint {
                kind: match l.joint.kind {
                    JointKindSpec::Revolute => JointKind::Revolute,
                    JointKindSpec::Prismatic => JointKind::Prismatic,
                },
                axis: Vector3::from(l.joint.axis),
                origin: l.joint.origin.isometry(),
                limits: l.joint.limits,
            };
            chain.add_link(&l.name, parent, joint)?;
        }

        let mut bodies = Vec::with_capacity(doc.geometries.len());
        for (k, g) in doc.geometries.iter().enumerate() {
            let link = chain.link_index(&g.link).ok_or_else(|| SceneError::UnknownLink(g.link.clone()))?;
            let name = g.name.clone().unwrap_or_else(|| format!("geom{k}"));
            let body = match &g.shape {
                ShapeSpec::Sphere { center, radius } => {
                    ConvexBody::sphere(&name, link, Point3::from(*center), *radius)?
                }
                ShapeSpec::Polytope { vertices } => {
                    ConvexBody::polytope(&name, link, vertices.iter().map(|v| Point3::from(*v)).collect())?
                }
            };
            bodies.push(body);
        }

        let resolve = |r: &GeomRef| -> Result<usize, SceneError> {
            match r {
                GeomRef::Index(i) if *i < bodies.len() => Ok(*i),
                GeomRef::Index(i) => Err(SceneError::UnknownGeometry(i.to_string())),
                GeomRef::Name(n) => bodies
                    .iter()
                    .position(|b| &b.name == n)
                    .ok_or_else(|| SceneError::UnknownGeometry(n.clone())),
            }
        };
        let mut pairs = Vec::with_capacity(doc.collision_pairs.len());
        for p in &doc.collision_pairs {
            pairs.push(CollisionPair::new(resolve(&p.geom_a)?, resolve(&p.geom_b)?)?);
        }
        Ok(Scene::new(chain, bodies, pairs))
    }

    pub fn from_json(text: &str) -> Result<Self, SceneError> {
        Self::from_document(&serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, SceneError> {
        Self::from_json(&read(path)?)
    }
}

/// Parses a scene document into its kinematic chain.
pub fn load_chain(text: &str) -> Result<KinematicChain, SceneError> {
    Ok(Scene::from_json(text)?.chain)
}

fn read(path: &Path) -> Result<String, SceneError> {
    std::fs::read_to_string(path).map_err(|source| SceneError::Io { path: path.display().to_string(), source })
}

/// Plan document: segments keyed by joint (link) name, ascending coefficients
/// on `t ∈ [0, 1]`, or `linear` / `hermite` sugar with endpoint data.
///
/// ```json
/// {"version": 1, "segments": [
///   {"coeffs": {"rail": [0.0, 1.0], "pendulum": [0.2]}},
///   {"kind": "linear", "start": {"rail": 1.0, "pendulum": 0.2}, "end": {"rail": 1.0, "pendulum": 0.5}}
/// ]}
/// ```
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PlanDocument {
    pub version: u32,
    pub segments: Vec<SegmentSpec>,
}

type NamedValues = std::collections::BTreeMap<String, f64>;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SegmentSpec {
    Coeffs { coeffs: std::collections::BTreeMap<String, Vec<f64>> },
    Sugar(SegmentSugar),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SegmentSugar {
    Linear { start: NamedValues, end: NamedValues },
    Hermite { start: NamedValues, end: NamedValues, v0: NamedValues, v1: NamedValues },
}

impl PlanDocument {
    pub fn to_plan(&self, chain: &KinematicChain) -> Result<MotionPlan, SceneError> {
        if self.version != SCHEMA_VERSION {
            return Err(SceneError::Version(self.version));
        }
        let names = chain.variable_names();
        let check_keys = |keys: &mut dyn Iterator<Item = &String>| -> Result<(), PlanError> {
            for k in keys {
                if !names.contains(k) {
                    return Err(PlanError::UnknownVariable(k.clone()));
                }
            }
            Ok(())
        };
        let dense = |segment: usize, m: &NamedValues| -> Result<Vec<f64>, PlanError> {
            check_keys(&mut m.keys())?;
            names
                .iter()
                .map(|n| {
                    m.get(n)
                        .copied()
                        .ok_or_else(|| PlanError::MissingVariable { segment, name: n.clone() })
                })
                .collect()
        };
        let mut segments = Vec::with_capacity(self.segments.len());
        for (i, s) in self.segments.iter().enumerate() {
            let seg = match s {
                SegmentSpec::Coeffs { coeffs } => {
                    check_keys(&mut coeffs.keys())?;
                    let dense: Result<Vec<Vec<f64>>, PlanError> = names
                        .iter()
                        .map(|n| {
                            coeffs
                                .get(n)
                                .cloned()
                                .ok_or_else(|| PlanError::MissingVariable { segment: i, name: n.clone() })
                        })
                        .collect();
                    PlanSegment::from_coeffs(&dense?)
                }
                SegmentSpec::Sugar(SegmentSugar::Linear { start, end }) => {
                    linear_segment(&dense(i, start)?, &dense(i, end)?)?
                }
                SegmentSpec::Sugar(SegmentSugar::Hermite { start, end, v0, v1 }) => {
                    hermite_cubic_segment(&dense(i, start)?, &dense(i, end)?, &dense(i, v0)?, &dense(i, v1)?)?
                }
            };
            segments.push(seg);
        }
        Ok(MotionPlan::new(segments)?)
    }

    pub fn from_plan(plan: &MotionPlan, chain: &KinematicChain) -> Self {
        let names = chain.variable_names();
        let segments = plan
            .segments()
            .iter()
            .map(|s| SegmentSpec::Coeffs {
                coeffs: names.iter().enumerate().map(|(k, n)| (n.clone(), s.coeffs(k))).collect(),
            })
            .collect();
        Self { version: SCHEMA_VERSION, segments }
    }
}

pub fn load_plan(path: &Path, chain: &KinematicChain) -> Result<MotionPlan, SceneError> {
    let doc: PlanDocument = serde_json::from_str(&read(path)?)?;
    doc.to_plan(chain)
}

/// Warns about plan segments whose sampled TC values leave the joint limits.
/// Returns the number of offending `(segment, joint)` combinations.
pub fn warn_joint_limits(plan: &MotionPlan, chain: &KinematicChain) -> usize {
    let mut offenders = 0;
    for (i, seg) in plan.segments().iter().enumerate() {
        for k in 0..chain.dof() {
            let [lo, hi] = chain.joint(k).tc_limits();
            let outside = (0..=64).any(|j| {
                let v = seg.eval(j as f64 / 64.0)[k];
                v < lo - 1e-12 || v > hi + 1e-12
            });
            if outside {
                log::warn!("segment {i} leaves the limits of joint `{}`", chain.variable_name(k));
                offenders += 1;
            }
        }
    }
    offenders
}
