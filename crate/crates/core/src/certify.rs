//! Plan-level certification: one feasibility program per (segment, pair)
//! cell, solved and independently checked in parallel.
//!
//! A plan is SAFE only if every cell is solver-feasible and its certificate
//! passes the checker; every other outcome makes the plan NSAFE.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::checker::{falsify_segment, CheckOptions, CheckReport, Collision};
use crate::conic::{solve_feasibility, Diagnostics, SolveStatus, SolverOptions};
use crate::geometry::CollisionPair;
use crate::kinematics::KinematicsError;
use crate::plan::MotionPlan;
use crate::scene::Scene;
use crate::soscert::{assemble_pair_program, Certificate, LoweringOptions};

pub const REPORT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertifyOptions {
    /// Hyperplane degree `d_h`.
    pub degree: u32,
    /// Worker threads; 0 uses the ambient rayon pool.
    pub jobs: usize,
    /// Stops a segment at its first failing pair.
    pub early_stop: bool,
    pub lowering: LoweringOptions,
    pub solver: SolverOptions,
    pub check: CheckOptions,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self {
            degree: 1,
            jobs: 0,
            early_stop: false,
            lowering: LoweringOptions::default(),
            solver: SolverOptions::default(),
            check: CheckOptions::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PlanVerdict {
    Safe,
    Nsafe,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Certified,
    Infeasible,
    Unknown,
    CheckRejected,
    BuildFailed,
    /// Not attempted because an earlier pair of the segment failed.
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub segment: usize,
    pub pair_index: usize,
    pub pair: CollisionPair,
    pub status: CellStatus,
    pub solver: Option<Diagnostics>,
    pub check: Option<CheckReport>,
    pub certificate: Option<Certificate>,
    pub constraints: usize,
    pub build_ms: f64,
    pub solve_ms: f64,
    pub verify_ms: f64,
    pub message: Option<String>,
}

impl CellReport {
    pub fn is_safe(&self) -> bool {
        self.status == CellStatus::Certified
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanReport {
    pub version: u32,
    pub verdict: PlanVerdict,
    pub degree: u32,
    pub segments: usize,
    pub pairs: usize,
    /// Sorted by `(segment, pair_index)`; always `segments × pairs` long.
    pub cells: Vec<CellReport>,
    pub total_ms: f64,
}

impl PlanReport {
    pub fn failing_cells(&self) -> impl Iterator<Item = &CellReport> {
        self.cells.iter().filter(|c| !c.is_safe())
    }

    /// Segments containing at least one failing cell.
    pub fn failing_segments(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.failing_cells().map(|c| c.segment).collect();
        s.dedup();
        s
    }

    pub fn certified_cells(&self) -> usize {
        self.cells.iter().filter(|c| c.is_safe()).count()
    }
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

/// Builds, solves and verifies a single cell.
pub fn certify_cell(plan: &MotionPlan, scene: &Scene, segment: usize, pair_index: usize, opts: &CertifyOptions) -> CellReport {
    let pair = scene.pairs[pair_index];
    let seg = &plan.segments()[segment];
    let mut report = CellReport {
        segment,
        pair_index,
        pair,
        status: CellStatus::BuildFailed,
        solver: None,
        check: None,
        certificate: None,
        constraints: 0,
        build_ms: 0.0,
        solve_ms: 0.0,
        verify_ms: 0.0,
        message: None,
    };
    let start = Instant::now();
    let program = match assemble_pair_program(scene, pair, segment, seg, opts.degree, &opts.lowering) {
        Ok(p) => p,
        Err(e) => {
            report.message = Some(e.to_string());
            return report;
        }
    };
    report.build_ms = ms(start);
    report.constraints = program.problem.num_constraints();

    let start = Instant::now();
    let outcome = match solve_feasibility(&program.problem, &opts.solver) {
        Ok(o) => o,
        Err(e) => {
            report.message = Some(e.to_string());
            return report;
        }
    };
    report.solve_ms = ms(start);
    report.status = match outcome.status {
        SolveStatus::Feasible => CellStatus::CheckRejected,
        SolveStatus::Infeasible => CellStatus::Infeasible,
        SolveStatus::Unknown => CellStatus::Unknown,
    };
    report.solver = Some(outcome.diagnostics);
    let Some(sol) = outcome.solution else { return report };

    let start = Instant::now();
    let cert = program.certificate(&sol);
    let check = crate::checker::verify_certificate(&cert, scene, seg, &opts.check);
    report.verify_ms = ms(start);
    if check.is_verified() {
        report.status = CellStatus::Certified;
    }
    report.check = Some(check);
    report.certificate = Some(cert);
    report
}

fn skipped(scene: &Scene, segment: usize, pair_index: usize) -> CellReport {
    CellReport {
        segment,
        pair_index,
        pair: scene.pairs[pair_index],
        status: CellStatus::Skipped,
        solver: None,
        check: None,
        certificate: None,
        constraints: 0,
        build_ms: 0.0,
        solve_ms: 0.0,
        verify_ms: 0.0,
        message: None,
    }
}

fn run_cells(plan: &MotionPlan, scene: &Scene, opts: &CertifyOptions) -> Vec<CellReport> {
    let (ns, np) = (plan.segments().len(), scene.pairs.len());
    if opts.early_stop {
        (0..ns)
            .into_par_iter()
            .flat_map_iter(|s| {
                let mut out = Vec::with_capacity(np);
                let mut failed = false;
                for p in 0..np {
                    if failed {
                        out.push(skipped(scene, s, p));
                        continue;
                    }
                    let cell = certify_cell(plan, scene, s, p, opts);
                    failed = !cell.is_safe();
                    out.push(cell);
                }
                out
            })
            .collect()
    } else {
        (0..ns * np).into_par_iter().map(|k| certify_cell(plan, scene, k / np, k % np, opts)).collect()
    }
}

/// Certifies every (segment, pair) cell of `plan`.
pub fn certify_plan(plan: &MotionPlan, scene: &Scene, opts: &CertifyOptions) -> PlanReport {
    let start = Instant::now();
    let cells = if opts.jobs > 0 {
        match rayon::ThreadPoolBuilder::new().num_threads(opts.jobs).build() {
            Ok(pool) => pool.install(|| run_cells(plan, scene, opts)),
            Err(e) => {
                log::warn!("cannot build a pool of {} workers ({e}); using the global pool", opts.jobs);
                run_cells(plan, scene, opts)
            }
        }
    } else {
        run_cells(plan, scene, opts)
    };
    let verdict = if cells.iter().all(CellReport::is_safe) { PlanVerdict::Safe } else { PlanVerdict::Nsafe };
    PlanReport {
        version: REPORT_VERSION,
        verdict,
        degree: opts.degree,
        segments: plan.segments().len(),
        pairs: scene.pairs.len(),
        cells,
        total_ms: ms(start),
    }
}

/// Outcome of densely sampling the segments that failed certification.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "confirmation", rename_all = "snake_case")]
pub enum Confirmation {
    /// The plan was certified; nothing to confirm.
    NotNeeded,
    Collision(Collision),
    /// No collision found; a higher hyperplane degree may still certify.
    Unconfirmed { samples_per_segment: usize, hint: String },
}

/// Samples `n` configurations on every failing segment of `report`.
pub fn confirm_nsafe(report: &PlanReport, plan: &MotionPlan, scene: &Scene, n: usize) -> Result<Confirmation, KinematicsError> {
    if report.verdict == PlanVerdict::Safe {
        return Ok(Confirmation::NotNeeded);
    }
    for s in report.failing_segments() {
        if let Some(c) = falsify_segment(&plan.segments()[s], s, scene, n)? {
            return Ok(Confirmation::Collision(c));
        }
    }
    Ok(Confirmation::Unconfirmed {
        samples_per_segment: n.max(2),
        hint: format!(
            "no collision found by sampling; retrying with a higher hyperplane degree (--degree {}) may certify the remaining cells",
            report.degree + 1
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checker::{sample_falsify, verify_certificate};
    use crate::plan::linear_segment;
    use crate::scene::tests::PENDULUM;
    use crate::soscert::ConstraintKind;

    fn plan(start: [f64; 2], end: [f64; 2]) -> MotionPlan {
        MotionPlan::new(vec![linear_segment(&start, &end).unwrap()]).unwrap()
    }

    #[test]
    fn pendulum_clearing_plan_is_safe() {
        let scene = Scene::from_json(PENDULUM).unwrap();
        let p = plan([0.0, 0.2], [1.0, 0.2]);
        let report = certify_plan(&p, &scene, &CertifyOptions::default());
        assert_eq!(report.verdict, PlanVerdict::Safe, "{:#?}", report.cells[0]);
        assert_eq!(report.cells.len(), 1);
        assert!(sample_falsify(&p, &scene, 1000).unwrap().collision().is_none());

        let cert = report.cells[0].certificate.clone().unwrap();
        let exact = verify_certificate(&cert, &scene, &p.segments()[0], &CheckOptions { exact: true, ..Default::default() });
        assert!(exact.is_verified(), "{exact:?}");

        // every certified constraint holds pointwise
        let seg = &p.segments()[0];
        for k in 0..1000 {
            let t = k as f64 / 999.0;
            let poses = scene.chain.link_poses(&seg.eval(t)).unwrap();
            let eval = |c: &[f64]| c.iter().rev().fold(0.0, |acc, x| acc * t + x);
            let (a, b) = ([0, 1, 2].map(|w| eval(&cert.a[w])), eval(&cert.b));
            for cc in &cert.constraints {
                let body = &scene.bodies[cc.body];
                let value = match (&body.shape, cc.kind) {
                    (crate::geometry::Shape::Sphere { center, radius }, ConstraintKind::Sphere) => {
                        let c = poses[body.link] * center;
                        let norm = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
                        cc.side.sign() * (a[0] * c.x + a[1] * c.y + a[2] * c.z + b) - 1.0 - radius * norm
                    }
                    (crate::geometry::Shape::Polytope { vertices }, ConstraintKind::Vertex { index }) => {
                        let v = poses[body.link] * vertices[index];
                        cc.side.sign() * (a[0] * v.x + a[1] * v.y + a[2] * v.z + b) - 1.0
                    }
                    _ => unreachable!(),
                };
                assert!(value >= -1e-12, "t = {t}: {value}");
            }
        }
    }

    #[test]
    fn pendulum_colliding_plan_is_nsafe_and_confirmed() {
        let scene = Scene::from_json(PENDULUM).unwrap();
        let p = plan([2.0, 0.0], [3.5, 0.0]);
        let report = certify_plan(&p, &scene, &CertifyOptions { early_stop: true, ..Default::default() });
        assert_eq!(report.verdict, PlanVerdict::Nsafe);
        assert!(matches!(confirm_nsafe(&report, &p, &scene, 1000).unwrap(), Confirmation::Collision(_)));
    }

    #[test]
    fn no_pairs_is_vacuously_safe() {
        let mut scene = Scene::from_json(PENDULUM).unwrap();
        scene.pairs.clear();
        let report = certify_plan(&plan([0.0, 0.0], [1.0, 0.0]), &scene, &CertifyOptions { jobs: 2, ..Default::default() });
        assert_eq!(report.verdict, PlanVerdict::Safe);
        assert!(report.cells.is_empty());
    }
}
