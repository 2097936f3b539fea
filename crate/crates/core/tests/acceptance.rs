//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line and
//! the process exits nonzero if any of them fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use nalgebra::{DMatrix, DVector, Isometry3, Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use pathcert::certify::{certify_cell, certify_plan, CellStatus, CertifyOptions, PlanVerdict};
use pathcert::checker::{sample_falsify, verify_certificate, verify_decomposition, CheckOptions};
use pathcert::conic::{
    export_standard, import_standard, solve_feasibility, BlockKind, BlockValue, Entry, SdpProblem, Solution,
    SolveStatus, SolverOptions,
};
use pathcert::geometry::{min_distance, CollisionPair, ConvexBody};
use pathcert::kinematics::{Joint, JointKind, KinematicChain};
use pathcert::plan::{hermite_cubic_segment, linear_segment, MotionPlan, PlanSegment};
use pathcert::polynomial::{PolyMatrix, Polynomial, Var};
use pathcert::scene::Scene;
use pathcert::soscert::{
    assemble_pair_program, basis_descriptor, body_constraints, decomposition_template, lower_matrix_constraint,
    lower_scalar_constraint, ConstraintCertificate, ConstraintKind, GramMatrix, HyperplaneTemplate,
    LoweringOptions, MatrixConstraint, Parity, ScalarConstraint, Side,
};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------- oracles

fn conv(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len().max(b.len())];
    for (k, o) in out.iter_mut().enumerate() {
        *o = a.get(k).unwrap_or(&0.0) + b.get(k).unwrap_or(&0.0);
    }
    out
}

fn padded(mut v: Vec<f64>, len: usize) -> Vec<f64> {
    assert!(v.len() <= len, "degree bound exceeded: {} > {}", v.len() - 1, len - 1);
    v.resize(len, 0.0);
    v
}

/// `(deg λ, deg ν)` for a nonnegative polynomial of degree `n` on `[0, 1]`.
fn multiplier_degrees(n: u32) -> (u32, Option<u32>) {
    if n % 2 == 0 {
        (n, n.checked_sub(2))
    } else {
        (n - 1, Some(n - 1))
    }
}

/// Interval weights multiplying λ and ν.
fn interval_weights(n: u32) -> (Vec<f64>, Vec<f64>) {
    if n % 2 == 0 {
        (vec![1.0], vec![0.0, 1.0, -1.0])
    } else {
        (vec![0.0, 1.0], vec![1.0, -1.0])
    }
}

/// Coefficients of `Σ_{a,b} Q[a m + i, b m + j] t^(a+b)`.
fn gram_entry_poly(q: &DMatrix<f64>, half: usize, m: usize, i: usize, j: usize) -> Vec<f64> {
    let mut out = vec![0.0; 2 * half - 1];
    for a in 0..half {
        for b in 0..half {
            out[a + b] += q[(a * m + i, b * m + j)];
        }
    }
    out
}

fn random_psd(rng: &mut ChaCha8Rng, n: usize, floor: f64) -> DMatrix<f64> {
    let l = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    &l * l.transpose() / n as f64 + DMatrix::identity(n, n) * floor
}

fn symmetric(q: &DMatrix<f64>) -> DMatrix<f64> {
    (q + q.transpose()) * 0.5
}

fn unit(v: Vector3<f64>) -> Vector3<f64> {
    v.normalize()
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
        if v.norm() > 0.2 {
            return unit(v);
        }
    }
}

fn box_vertices(center: Vector3<f64>, half: Vector3<f64>) -> Vec<Point3<f64>> {
    let mut out = Vec::with_capacity(8);
    for sx in [-1.0, 1.0] {
        for sy in [-1.0, 1.0] {
            for sz in [-1.0, 1.0] {
                out.push(Point3::from(center + Vector3::new(sx * half.x, sy * half.y, sz * half.z)));
            }
        }
    }
    out
}

// ------------------------------------------------------------------ scenes

fn joint(kind: JointKind, axis: Vector3<f64>, offset: Vector3<f64>) -> Joint {
    let limits = match kind {
        JointKind::Revolute => [-2.5, 2.5],
        JointKind::Prismatic => [-2.0, 2.0],
    };
    Joint { kind, axis, origin: Isometry3::translation(offset.x, offset.y, offset.z), limits }
}

fn random_body(rng: &mut ChaCha8Rng, name: &str, link: usize, spread: f64, size: (f64, f64)) -> ConvexBody {
    let center = Vector3::from_fn(|_, _| rng.gen_range(-spread..spread));
    if rng.gen_bool(0.5) {
        ConvexBody::sphere(name, link, Point3::from(center), rng.gen_range(size.0..size.1)).unwrap()
    } else if rng.gen_bool(0.5) {
        let half = Vector3::from_fn(|_, _| rng.gen_range(size.0..size.1));
        ConvexBody::polytope(name, link, box_vertices(center, half)).unwrap()
    } else {
        let r = rng.gen_range(size.0..size.1);
        let vertices = (0..4).map(|_| Point3::from(center + random_unit(rng) * r)).collect();
        ConvexBody::polytope(name, link, vertices).unwrap()
    }
}

/// Random serial chain with robot bodies, world obstacles and a plan of
/// linear or cubic segments.
fn random_scene(seed: u64) -> (Scene, MotionPlan) {
    let mut rng = rng(seed);
    let dof = rng.gen_range(1..=3);
    let mut chain = KinematicChain::new();
    let mut parent = KinematicChain::WORLD;
    let mut kinds = Vec::new();
    for k in 0..dof {
        let kind = if rng.gen_bool(0.6) { JointKind::Revolute } else { JointKind::Prismatic };
        let offset = Vector3::from_fn(|_, _| rng.gen_range(-0.4..0.4));
        let axis = random_unit(&mut rng);
        parent = chain.add_link(&format!("l{k}"), parent, joint(kind, axis, offset)).unwrap();
        kinds.push(kind);
    }

    let mut bodies = Vec::new();
    let robot = rng.gen_range(1..=2);
    for r in 0..robot {
        let link = rng.gen_range(1..=dof);
        bodies.push(random_body(&mut rng, &format!("r{r}"), link, 0.4, (0.05, 0.15)));
    }
    for o in 0..rng.gen_range(1..=3) {
        bodies.push(random_body(&mut rng, &format!("o{o}"), KinematicChain::WORLD, 0.6, (0.15, 0.45)));
    }
    let mut candidates = Vec::new();
    for a in 0..robot {
        for b in a + 1..bodies.len() {
            if bodies[a].link != bodies[b].link {
                candidates.push(CollisionPair::new(a, b).unwrap());
            }
        }
    }
    let mut pairs = Vec::new();
    let want = rng.gen_range(1..=4usize);
    while pairs.len() < want && !candidates.is_empty() {
        let i = rng.gen_range(0..candidates.len());
        pairs.push(candidates.swap_remove(i));
    }

    let waypoint = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        kinds
            .iter()
            .map(|k| match k {
                JointKind::Revolute => rng.gen_range(-0.7..0.7),
                JointKind::Prismatic => rng.gen_range(-0.5..0.5),
            })
            .collect()
    };
    let mut points = vec![waypoint(&mut rng)];
    let mut segments = Vec::new();
    for _ in 0..rng.gen_range(1..=2) {
        let next = waypoint(&mut rng);
        let start = points.last().unwrap().clone();
        let seg = if rng.gen_bool(0.5) {
            linear_segment(&start, &next).unwrap()
        } else {
            let v0: Vec<f64> = (0..dof).map(|_| rng.gen_range(-0.5..0.5)).collect();
            let v1: Vec<f64> = (0..dof).map(|_| rng.gen_range(-0.5..0.5)).collect();
            hermite_cubic_segment(&start, &next, &v0, &v1).unwrap()
        };
        segments.push(seg);
        points.push(next);
    }
    (Scene::new(chain, bodies, pairs), MotionPlan::new(segments).unwrap())
}

/// Planar 3R arm with two robot bodies and two obstacles out of reach.
fn arm_scene() -> Scene {
    let z = Vector3::z();
    let mut chain = KinematicChain::new();
    let l1 = chain.add_link("shoulder", KinematicChain::WORLD, joint(JointKind::Revolute, z, Vector3::zeros())).unwrap();
    let l2 = chain.add_link("elbow", l1, joint(JointKind::Revolute, z, Vector3::new(0.5, 0.0, 0.0))).unwrap();
    let l3 = chain.add_link("wrist", l2, joint(JointKind::Revolute, z, Vector3::new(0.5, 0.0, 0.0))).unwrap();
    let bodies = vec![
        ConvexBody::sphere("hand", l3, Point3::new(0.3, 0.0, 0.0), 0.08).unwrap(),
        ConvexBody::polytope("forearm", l2, box_vertices(Vector3::new(0.25, 0.0, 0.0), Vector3::new(0.2, 0.04, 0.04))).unwrap(),
        ConvexBody::polytope("pillar", KinematicChain::WORLD, box_vertices(Vector3::new(2.2, 0.0, 0.0), Vector3::new(0.2, 0.2, 1.0))).unwrap(),
        ConvexBody::sphere("lamp", KinematicChain::WORLD, Point3::new(0.0, 0.0, 0.8), 0.25).unwrap(),
    ];
    let pairs = [(0, 2), (0, 3), (1, 2), (1, 3)].map(|(a, b)| CollisionPair::new(a, b).unwrap()).to_vec();
    Scene::new(chain, bodies, pairs)
}

fn arm_plan(seed: u64, segments: usize) -> MotionPlan {
    let mut rng = rng(seed);
    let mut q: Vec<f64> = (0..3).map(|_| rng.gen_range(-0.6..0.6)).collect();
    let mut out = Vec::with_capacity(segments);
    for _ in 0..segments {
        let next: Vec<f64> = (0..3).map(|_| rng.gen_range(-0.6..0.6)).collect();
        out.push(linear_segment(&q, &next).unwrap());
        q = next;
    }
    MotionPlan::new(out).unwrap()
}

fn pendulum_scene(length: f64, radius: f64, wall_x: f64) -> Scene {
    let doc = format!(
        r#"{{
          "version": 1,
          "links": [
            {{"name": "rail", "parent": "world",
             "joint": {{"kind": "prismatic", "axis": [1, 0, 0], "limits": [-5, 5]}}}},
            {{"name": "pendulum", "parent": "rail",
             "joint": {{"kind": "revolute", "axis": [0, 0, -1], "limits": [-3, 3]}}}}
          ],
          "geometries": [
            {{"name": "tip", "link": "pendulum", "kind": "sphere", "center": [0, {length}, 0], "radius": {radius}}},
            {{"name": "wall", "link": "world", "kind": "polytope",
             "vertices": [[{wall_x}, -2, -1], [{wall_x}, 2, -1], [{wall_x}, -2, 1], [{wall_x}, 2, 1],
                          [{far}, -2, -1], [{far}, 2, -1], [{far}, -2, 1], [{far}, 2, 1]]}}
          ],
          "collision_pairs": [{{"geomA": "tip", "geomB": "wall"}}]
        }}"#,
        far = wall_x + 1.0
    );
    Scene::from_json(&doc).unwrap()
}

// ---------------------------------------------------------------- criteria

fn soundness_fuzzing() -> Outcome {
    let scenes = 200u64;
    let results: Vec<(PlanVerdict, bool)> = (0..scenes)
        .into_par_iter()
        .map(|seed| {
            let (scene, plan) = random_scene(1000 + seed);
            let report = certify_plan(&plan, &scene, &CertifyOptions { early_stop: true, ..Default::default() });
            let falsified = sample_falsify(&plan, &scene, 10_000).unwrap().collision().is_some();
            (report.verdict, falsified)
        })
        .collect();
    let safe = results.iter().filter(|r| r.0 == PlanVerdict::Safe).count();
    let hit = results.iter().filter(|r| r.1).count();
    let violations: Vec<usize> = (0..results.len()).filter(|&i| results[i] == (PlanVerdict::Safe, true)).collect();
    ensure!(violations.is_empty(), "SAFE plans with sampled collisions: scenes {violations:?}");
    ensure!(safe >= 20, "only {safe} SAFE verdicts; the fuzz exercises too little");
    Ok(format!("{scenes} scenes, {safe} SAFE, {} NSAFE ({hit} with sampled collisions), 0 violations", scenes as usize - safe))
}

fn discrimination() -> Outcome {
    let (length, radius, delta) = (0.5, 0.05, 0.02);
    let (start, end) = ([0.0, 0.0], [1.0, 0.2]);
    // tip x = z + l·2τ/(1+τ²) increases along the plan, so the closest
    // approach is at t = 1
    let tip_x = |z: f64, tau: f64| {
        let theta = 2.0 * tau.atan();
        z + length * theta.sin()
    };
    let wall_x = tip_x(end[0], end[1]) + radius + delta / 2.0;
    let scene = pendulum_scene(length, radius, wall_x);
    let plan_a = MotionPlan::new(vec![linear_segment(&start, &end).unwrap()]).unwrap();
    let plan_b = MotionPlan::new(vec![linear_segment(&[start[0] + delta, start[1]], &[end[0] + delta, end[1]]).unwrap()]).unwrap();

    // geometry oracle: clearance of the sphere to the wall face
    let clearance = |plan: &MotionPlan| {
        let seg = &plan.segments()[0];
        (0..=10_000)
            .map(|k| {
                let s = seg.eval(k as f64 / 10_000.0);
                wall_x - tip_x(s[0], s[1]) - radius
            })
            .fold(f64::INFINITY, f64::min)
    };
    let (ca, cb) = (clearance(&plan_a), clearance(&plan_b));
    ensure!((ca - delta / 2.0).abs() < 1e-12 && (cb + delta / 2.0).abs() < 1e-12, "oracle clearances {ca} / {cb}");
    let placed = |plan: &MotionPlan| {
        let poses = scene.chain.link_poses(&plan.segments()[0].eval(1.0)).unwrap();
        min_distance(&scene.bodies[0].place(&poses[2]), &scene.bodies[1].place(&poses[0]))
    };
    ensure!((placed(&plan_a) - ca).abs() < 1e-9, "library distance {} vs oracle {ca}", placed(&plan_a));
    ensure!(placed(&plan_b) <= 0.0, "library distance {} for the colliding plan", placed(&plan_b));

    let opts = CertifyOptions { degree: 1, ..Default::default() };
    let a = certify_plan(&plan_a, &scene, &opts);
    ensure!(a.verdict == PlanVerdict::Safe, "plan A: {:?}", a.cells[0].status);
    let b = certify_plan(&plan_b, &scene, &opts);
    ensure!(b.verdict == PlanVerdict::Nsafe, "plan B certified");
    ensure!(sample_falsify(&plan_a, &scene, 100_000).unwrap().collision().is_none(), "plan A falsified");
    let hit = sample_falsify(&plan_b, &scene, 100_000).unwrap();
    let collision = hit.collision().ok_or("plan B not falsified")?;
    Ok(format!("clearance +{ca:.3} SAFE, {cb:.3} NSAFE, collision at t = {:.4}", collision.t))
}

fn pendulum_fk() -> Outcome {
    let length = 0.7;
    let scene = pendulum_scene(length, 0.1, 3.0);
    let chain = &scene.chain;
    let tip = Point3::new(0.0, length, 0.0);
    let fk = chain.forward_kinematics_rational(KinematicChain::WORLD, 2, &tip).map_err(|e| e.to_string())?;
    let (z, tau) = (Polynomial::var(Var::Config(0)), Polynomial::var(Var::Config(1)));
    let tau2 = &tau * &tau;
    let den = Polynomial::constant(1.0) + tau2.clone();
    let px = tau.scale(2.0 * length) + &z * &den;
    let py = Polynomial::constant(length) - tau2.scale(length);
    for (w, expected) in [px, py, Polynomial::zero()].iter().enumerate() {
        let got = fk.components[w].numerator();
        ensure!(got == expected, "component {w}: {got:?} != {expected:?}");
        ensure!(fk.components[w].denominator() == &den, "denominator of component {w}");
    }
    let mut worst = 0.0f64;
    for i in 0..10 {
        for j in 0..10 {
            let z = -1.0 + 0.2 * i as f64;
            let theta = -2.5 + 5.0 * j as f64 / 9.0;
            let s = [z, (theta / 2.0).tan()];
            let rational = fk.eval(&s).map_err(|e| e.to_string())?;
            let rigid = chain.point_position(KinematicChain::WORLD, 2, &tip, &s).map_err(|e| e.to_string())?;
            let closed = Point3::new(length * theta.sin() + z, length * theta.cos(), 0.0);
            worst = worst.max((rational - rigid).amax()).max((rational - closed).amax());
        }
    }
    ensure!(worst <= 1e-9, "max deviation {worst:e}");
    Ok(format!("coefficients exact, max deviation {worst:.1e} on 100 points"))
}

fn round_trip_scalar() -> Outcome {
    let mut rng = rng(4);
    let lowering = LoweringOptions::default();
    let mut worst = 0.0f64;
    for case in 0..100u32 {
        let n = 1 + case % 15;
        let t = decomposition_template(n);
        let (ld, nd) = multiplier_degrees(n);
        ensure!(t.lambda_degree == ld && t.nu_degree == nd, "degree {n}: template {t:?}");
        ensure!(t.parity == if n % 2 == 0 { Parity::Even } else { Parity::Odd }, "degree {n}: parity");
        let (lh, nh) = (ld as usize / 2 + 1, nd.map(|d| d as usize / 2 + 1));
        ensure!(t.lambda_basis_size() == lh && t.nu_basis_size() == nh, "degree {n}: basis sizes");

        let (wl, wn) = interval_weights(n);
        let lam = random_psd(&mut rng, lh, 0.05);
        let nu = nh.map(|h| random_psd(&mut rng, h, 0.05));
        let mut p = conv(&wl, &gram_entry_poly(&lam, lh, 1, 0, 0));
        if let (Some(nu), Some(h)) = (&nu, nh) {
            p = add(&p, &conv(&wn, &gram_entry_poly(nu, h, 1, 0, 0)));
        }
        let p = padded(p, n as usize + 1);

        let c = ScalarConstraint { poly: Polynomial::univariate(Var::Time, &p), degree: n };
        let mut problem = SdpProblem::new();
        let l = lower_scalar_constraint(&mut problem, None, &c, &t, &lowering).map_err(|e| e.to_string())?;
        ensure!(l.rows.len() == n as usize + 1, "degree {n}: {} rows", l.rows.len());
        let out = solve_feasibility(&problem, &SolverOptions::default()).map_err(|e| e.to_string())?;
        ensure!(out.status == SolveStatus::Feasible, "case {case} (degree {n}): {:?}, {}", out.status, out.diagnostics.message);
        let sol = out.solution.unwrap();

        let lam_r = symmetric(sol.blocks[l.lambda_block].matrix());
        let mut rec = conv(&wl, &gram_entry_poly(&lam_r, lh, 1, 0, 0));
        if let (Some(b), Some(h)) = (l.nu_block, nh) {
            rec = add(&rec, &conv(&wn, &gram_entry_poly(&symmetric(sol.blocks[b].matrix()), h, 1, 0, 0)));
        }
        let mut rec = padded(rec, n as usize + 1);
        rec[0] += lowering.gamma_min + sol.blocks[l.slack_block].vector()[0];
        let residual = p.iter().zip(&rec).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        ensure!(residual <= 1e-6, "case {case} (degree {n}): residual {residual:e}");
        worst = worst.max(residual);
    }
    Ok(format!("100 decompositions (degrees 1-15), max residual {worst:.1e}"))
}

fn round_trip_matrix() -> Outcome {
    let mut rng = rng(5);
    let lowering = LoweringOptions::default();
    let mut worst = 0.0f64;
    for case in 0..50u32 {
        let m = 2 + case as usize % 3;
        let n = 1 + (case / 3) % 6;
        let t = decomposition_template(n);
        let (lh, nh) = (t.lambda_basis_size(), t.nu_basis_size());
        let (wl, wn) = interval_weights(n);
        let lam = random_psd(&mut rng, lh * m, 0.05);
        let nu = nh.map(|h| random_psd(&mut rng, h * m, 0.05));
        let entry = |i: usize, j: usize| {
            let mut p = conv(&wl, &gram_entry_poly(&lam, lh, m, i, j));
            if let (Some(nu), Some(h)) = (&nu, nh) {
                p = add(&p, &conv(&wn, &gram_entry_poly(nu, h, m, i, j)));
            }
            padded(p, n as usize + 1)
        };
        let upper: Vec<Vec<Vec<f64>>> = (0..m).map(|i| (0..m).map(|j| entry(i.min(j), i.max(j))).collect()).collect();
        let target: Vec<Vec<f64>> = upper.iter().flatten().cloned().collect();
        let matrix = PolyMatrix::symmetric_from_fn(m, |i, j| Polynomial::univariate(Var::Time, &upper[i][j]));

        let mut problem = SdpProblem::new();
        let mc = MatrixConstraint { matrix, degree: n };
        let l = lower_matrix_constraint(&mut problem, None, &mc, &t, &lowering).map_err(|e| e.to_string())?;
        let out = solve_feasibility(&problem, &SolverOptions::default()).map_err(|e| e.to_string())?;
        ensure!(out.status == SolveStatus::Feasible, "case {case} (m = {m}, degree {n}): {:?}, {}", out.status, out.diagnostics.message);
        let sol = out.solution.unwrap();
        let gram = |block: usize, half: usize| GramMatrix::from_matrix(&symmetric(sol.blocks[block].matrix()), basis_descriptor(half, m));
        let cc = ConstraintCertificate {
            body: 0,
            side: Side::Positive,
            kind: ConstraintKind::Sphere,
            target_degree: n,
            parity: t.parity,
            lambda_degree: t.lambda_degree,
            nu_degree: t.nu_degree,
            matrix_size: m,
            lambda: gram(l.lambda_block, lh),
            nu: l.nu_block.zip(nh).map(|(b, h)| gram(b, h)),
            gamma: lowering.gamma_min + sol.blocks[l.slack_block].vector()[0],
        };
        let exact = case % 5 == 0;
        let check = verify_decomposition(&cc, &target, &CheckOptions { exact, ..Default::default() });
        ensure!(check.passed, "case {case} (m = {m}, degree {n}): {:?}", check.note);
        worst = worst.max(check.residual);
    }
    Ok(format!("50 matrix certificates (sizes 2-4, degrees 1-6) verified, max residual {worst:.1e}"))
}

fn static_reduction() -> Outcome {
    let hp = HyperplaneTemplate::new(0);
    let (a, b) = (hp.a(), hp.b());
    let affine = |x: &Point3<f64>| a[0].scale(x.x) + a[1].scale(x.y) + a[2].scale(x.z) + b.clone();
    let one = Polynomial::constant(1.0);
    let close = |p: &Polynomial, q: &Polynomial, tol: f64| {
        let diff = p.clone() - q.clone();
        diff.max_abs_coeff() <= tol
    };
    let mut checked = 0;

    // world-frame bodies: denominators are 1 and the forms match exactly
    let mut chain = KinematicChain::new();
    chain.add_link("rail", KinematicChain::WORLD, joint(JointKind::Prismatic, Vector3::x(), Vector3::zeros())).unwrap();
    let segment = PlanSegment::constant(&[0.3]);
    let cube = box_vertices(Vector3::new(1.0, -2.0, 0.5), Vector3::new(0.5, 0.25, 0.75));
    let poly_body = ConvexBody::polytope("cube", KinematicChain::WORLD, cube.clone()).unwrap();
    for side in [Side::Positive, Side::Negative] {
        for (k, (kind, c)) in body_constraints(&chain, &poly_body, &segment, &hp, side).map_err(|e| e.to_string())?.into_iter().enumerate() {
            ensure!(kind == ConstraintKind::Vertex { index: k }, "vertex order");
            let c = c.map_err(|_| "polytope produced a matrix constraint")?;
            let expected = affine(&cube[k]).scale(side.sign()) - one.clone();
            ensure!(c.poly == expected && c.degree == 0, "vertex {k} {side:?}: {:?}", c.poly);
            checked += 1;
        }
    }
    let center = Point3::new(-0.5, 0.25, 2.0);
    let ball = ConvexBody::sphere("ball", KinematicChain::WORLD, center, 0.4).unwrap();
    let sphere_form = |center: &Point3<f64>, radius: f64, side: Side| {
        let h = affine(center).scale(side.sign()) - one.clone();
        PolyMatrix::symmetric_from_fn(4, |i, j| match (i, j) {
            (3, 3) => h.clone(),
            (i, 3) => a[i].scale(radius),
            (i, j) if i == j => h.clone(),
            _ => Polynomial::zero(),
        })
    };
    for side in [Side::Positive, Side::Negative] {
        let (_, c) = body_constraints(&chain, &ball, &segment, &hp, side).map_err(|e| e.to_string())?.remove(0);
        let c = c.err().ok_or("sphere produced a scalar constraint")?;
        ensure!(c.matrix == sphere_form(&center, 0.4, side) && c.degree == 0, "sphere {side:?}");
        checked += 1;
    }

    // moving bodies at a parked configuration: equal after dividing by g
    let scene = pendulum_scene(0.8, 0.1, 3.0);
    let s = [0.4, 0.3];
    let g = 1.0 + s[1] * s[1];
    let parked = PlanSegment::constant(&s);
    let poses = scene.chain.link_poses(&s).unwrap();
    let tip = &scene.bodies[0];
    let pathcert::geometry::Shape::Sphere { center, radius } = tip.shape.clone() else { unreachable!() };
    let world_center = poses[tip.link] * center;
    for side in [Side::Positive, Side::Negative] {
        let (_, c) = body_constraints(&scene.chain, tip, &parked, &hp, side).map_err(|e| e.to_string())?.remove(0);
        let c = c.err().ok_or("sphere produced a scalar constraint")?;
        let expected = sphere_form(&world_center, radius, side);
        for i in 0..4 {
            for j in 0..4 {
                ensure!(close(&c.matrix.get(i, j).scale(1.0 / g), expected.get(i, j), 1e-12), "parked sphere ({i}, {j}) {side:?}");
            }
        }
        ensure!(c.degree == 0, "parked sphere degree {}", c.degree);
        checked += 1;
    }
    let tip_box = box_vertices(Vector3::new(0.0, 0.8, 0.0), Vector3::new(0.05, 0.1, 0.05));
    let tool = ConvexBody::polytope("tool", 2, tip_box.clone()).unwrap();
    for side in [Side::Positive, Side::Negative] {
        for (k, (_, c)) in body_constraints(&scene.chain, &tool, &parked, &hp, side).map_err(|e| e.to_string())?.into_iter().enumerate() {
            let c = c.map_err(|_| "polytope produced a matrix constraint")?;
            let expected = affine(&(poses[2] * tip_box[k])).scale(side.sign()) - one.clone();
            ensure!(close(&c.poly.scale(1.0 / g), &expected, 1e-12) && c.degree == 0, "parked vertex {k} {side:?}");
            checked += 1;
        }
    }
    Ok(format!("{checked} static constraints match the unit-offset forms"))
}

#[derive(Clone, Copy, PartialEq, Debug)]
enum Expect {
    Feasible,
    Infeasible,
}

fn random_program(seed: u64) -> (SdpProblem, Expect) {
    let mut rng = rng(seed);
    let mut problem = SdpProblem::new();
    let mut point = Vec::new();
    for _ in 0..rng.gen_range(1..=3) {
        match rng.gen_range(0..3) {
            0 => {
                let n = rng.gen_range(1..=4);
                problem.add_block(BlockKind::Psd, n);
                point.push(BlockValue::Psd(random_psd(&mut rng, n, 0.3)));
            }
            1 => {
                let n = rng.gen_range(1..=3);
                problem.add_block(BlockKind::NonNeg, n);
                point.push(BlockValue::Vector(DVector::from_fn(n, |_, _| rng.gen_range(0.3..2.0))));
            }
            _ => {
                let n = rng.gen_range(1..=2);
                problem.add_block(BlockKind::Free, n);
                point.push(BlockValue::Vector(DVector::from_fn(n, |_, _| rng.gen_range(-2.0..2.0))));
            }
        }
    }
    let coords: Vec<(usize, usize, usize)> = problem
        .blocks
        .iter()
        .enumerate()
        .flat_map(|(b, blk)| {
            let psd = blk.kind == BlockKind::Psd;
            (0..blk.size).flat_map(move |i| (i..if psd { blk.size } else { i + 1 }).map(move |j| (b, i, j)))
        })
        .collect();
    let rows = rng.gen_range(1..=coords.len().min(6));
    for _ in 0..rows {
        let mut entries: Vec<Entry> = coords
            .iter()
            .filter_map(|&(b, i, j)| rng.gen_bool(0.6).then(|| Entry::new(b, i, j, rng.gen_range(-1.0..1.0))))
            .collect();
        if entries.is_empty() {
            let (b, i, j) = coords[rng.gen_range(0..coords.len())];
            entries.push(Entry::new(b, i, j, 1.0));
        }
        problem.add_constraint(entries, 0.0);
    }
    let values = problem.residuals(&Solution { blocks: point });
    for (c, v) in problem.constraints.iter_mut().zip(values) {
        c.rhs = v;
    }

    if rng.gen_bool(0.5) {
        return (problem, Expect::Feasible);
    }
    let diagonal: Vec<(usize, usize)> = coords.iter().filter(|c| c.1 == c.2).map(|c| (c.0, c.1)).collect();
    let conic: Vec<(usize, usize)> = diagonal.iter().copied().filter(|d| problem.blocks[d.0].kind != BlockKind::Free).collect();
    if !conic.is_empty() && rng.gen_bool(0.5) {
        // a cone diagonal pinned to a negative value
        let (b, i) = conic[rng.gen_range(0..conic.len())];
        problem.add_constraint(vec![Entry::scalar(b, i, 1.0)], -rng.gen_range(0.1..1.0));
    } else {
        // the same diagonal pinned to two different values
        let (b, i) = diagonal[rng.gen_range(0..diagonal.len())];
        let v = rng.gen_range(-1.0..1.0);
        let gap = rng.gen_range(0.1..1.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        problem.add_constraint(vec![Entry::scalar(b, i, 1.0)], v);
        problem.add_constraint(vec![Entry::scalar(b, i, 1.0)], v + gap);
    }
    (problem, Expect::Infeasible)
}

fn solver_reliability() -> Outcome {
    let results: Vec<Result<Expect, String>> = (0..1000u64)
        .into_par_iter()
        .map(|seed| {
            let (problem, expect) = random_program(seed);
            let out = solve_feasibility(&problem, &SolverOptions::default()).map_err(|e| e.to_string())?;
            match (expect, out.status) {
                (Expect::Feasible, SolveStatus::Feasible) => {
                    let sol = out.solution.ok_or("feasible without a point")?;
                    let res = problem.residuals(&sol).iter().fold(0.0f64, |m, r| m.max(r.abs()));
                    if res > 1e-7 || problem.cone_floor(&sol) < -1e-9 {
                        return Err(format!("seed {seed}: residual {res:e}, cone floor {:e}", problem.cone_floor(&sol)));
                    }
                    Ok(expect)
                }
                (Expect::Infeasible, SolveStatus::Infeasible) => Ok(expect),
                (e, s) => Err(format!("seed {seed}: expected {e:?}, got {s:?} ({})", out.diagnostics.message)),
            }
        })
        .collect();
    let errors: Vec<&String> = results.iter().filter_map(|r| r.as_ref().err()).collect();
    ensure!(errors.is_empty(), "{} wrong decisions, first: {}", errors.len(), errors[0]);
    let feasible = results.iter().filter(|r| matches!(r, Ok(Expect::Feasible))).count();
    Ok(format!("1000 programs ({feasible} feasible, {} infeasible), accuracy 100%", 1000 - feasible))
}

fn timing() -> Outcome {
    let scene = arm_scene();
    let plan = arm_plan(8, 30);
    let single = MotionPlan::new(vec![plan.segments()[0].clone()]).unwrap();
    let opts = CertifyOptions::default();
    let mut times = Vec::with_capacity(20);
    for _ in 0..20 {
        let start = Instant::now();
        let cell = certify_cell(&single, &scene, 0, 0, &opts);
        times.push(start.elapsed().as_secs_f64());
        ensure!(cell.status == CellStatus::Certified, "single cell: {:?} {:?}", cell.status, cell.message);
    }
    times.sort_by(f64::total_cmp);
    let median = (times[9] + times[10]) / 2.0;
    ensure!(median < 1.0, "single cell median {median:.3} s");

    let start = Instant::now();
    let report = certify_plan(&plan, &scene, &CertifyOptions { jobs: 4, ..Default::default() });
    let total = start.elapsed().as_secs_f64();
    ensure!(report.cells.len() == 120, "{} cells", report.cells.len());
    ensure!(total < 60.0, "30 x 4 plan took {total:.1} s");
    Ok(format!("single cell median {:.0} ms; 30 segments x 4 pairs in {total:.1} s ({:?})", median * 1e3, report.verdict))
}

fn tamper_resistance() -> Outcome {
    let scene = arm_scene();
    let plan = arm_plan(9, 3);
    let report = certify_plan(&plan, &scene, &CertifyOptions::default());
    let certs: Vec<_> = report.cells.iter().filter_map(|c| c.certificate.clone().map(|cert| (c.segment, cert))).collect();
    ensure!(certs.len() == 12, "only {} certified cells to tamper with", certs.len());
    let mut rng = rng(10);
    for trial in 0..100 {
        let (segment, mut cert) = certs[rng.gen_range(0..certs.len())].clone();
        let ci = rng.gen_range(0..cert.constraints.len());
        let cc = &mut cert.constraints[ci];
        let gamma = cc.gamma;
        let gram = match (&mut cc.nu, rng.gen_bool(0.5)) {
            (Some(nu), true) => nu,
            _ => &mut cc.lambda,
        };
        let k = rng.gen_range(0..gram.entries.len());
        let magnitude = gamma * rng.gen_range(10.0..100.0);
        gram.entries[k] += if rng.gen_bool(0.5) { magnitude } else { -magnitude };
        let exact = trial % 10 == 0;
        let check = verify_certificate(&cert, &scene, &plan.segments()[segment], &CheckOptions { exact, ..Default::default() });
        ensure!(!check.is_verified(), "trial {trial}: mutated entry {k} of constraint {ci} still verifies");
    }
    Ok("100 mutated certificates, all rejected".into())
}

fn bits(p: &SdpProblem) -> Vec<(usize, usize, usize, u64)> {
    let row = |entries: &[Entry]| entries.iter().map(|e| (e.block, e.i, e.j, e.value.to_bits())).collect::<Vec<_>>();
    let mut out: Vec<_> = p.constraints.iter().flat_map(|c| {
        let mut r = row(&c.entries);
        r.push((usize::MAX, 0, 0, c.rhs.to_bits()));
        r
    }).collect();
    if let Some(obj) = &p.objective {
        out.extend(row(obj));
    }
    out
}

fn sdpa_round_trip() -> Outcome {
    let mut rng = rng(11);
    let value = |rng: &mut ChaCha8Rng| -> f64 {
        let mantissa: f64 = rng.gen_range(0.1..1.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        match rng.gen_range(0..3) {
            0 => mantissa,
            1 => mantissa * 10f64.powi(rng.gen_range(-300..300)),
            _ => rng.gen_range(-50..50) as f64,
        }
    };
    let mut programs = Vec::with_capacity(100);
    for _ in 0..99 {
        let mut p = SdpProblem::new();
        for _ in 0..rng.gen_range(0..=4) {
            let kind = [BlockKind::Psd, BlockKind::NonNeg, BlockKind::Free][rng.gen_range(0..3)];
            p.add_block(kind, rng.gen_range(1..=5));
        }
        let random_entries = |rng: &mut ChaCha8Rng, p: &SdpProblem| -> Vec<Entry> {
            if p.blocks.is_empty() {
                return Vec::new();
            }
            (0..rng.gen_range(0..8))
                .map(|_| {
                    let b = rng.gen_range(0..p.blocks.len());
                    let blk = p.blocks[b];
                    let i = rng.gen_range(0..blk.size);
                    let j = if blk.kind == BlockKind::Psd { rng.gen_range(0..blk.size) } else { i };
                    Entry::new(b, i, j, value(rng))
                })
                .collect()
        };
        for _ in 0..rng.gen_range(0..6) {
            let entries = random_entries(&mut rng, &p);
            let rhs = value(&mut rng);
            p.add_constraint(entries, rhs);
        }
        if rng.gen_bool(0.4) {
            p.objective = Some(random_entries(&mut rng, &p));
        }
        programs.push(p);
    }
    let scene = pendulum_scene(0.5, 0.05, 3.0);
    let seg = linear_segment(&[0.0, 0.0], &[1.0, 0.3]).unwrap();
    programs.push(assemble_pair_program(&scene, scene.pairs[0], 0, &seg, 1, &LoweringOptions::default()).map_err(|e| e.to_string())?.problem);

    for (k, p) in programs.iter().enumerate() {
        let back = import_standard(&export_standard(p)).map_err(|e| format!("program {k}: {e}"))?;
        let (a, b) = (p.canonical(), back.canonical());
        ensure!(a == b && bits(&a) == bits(&b) && a.blocks == b.blocks, "program {k} changed in the round trip");
    }
    Ok(format!("{} programs reproduced bit-identically", programs.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("soundness fuzzing", soundness_fuzzing),
        ("safe/unsafe discrimination", discrimination),
        ("pendulum-on-rail kinematics", pendulum_fk),
        ("interval decomposition round trip", round_trip_scalar),
        ("matrix interval certificates", round_trip_matrix),
        ("static reduction", static_reduction),
        ("solver reliability", solver_reliability),
        ("timing", timing),
        ("certificate tamper resistance", tamper_resistance),
        ("SDPA round trip", sdpa_round_trip),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{secs:.1} s]", k + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail} [{secs:.1} s]", k + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
