//! Primal-dual interior-point method on the homogeneous self-dual embedding
//!
//! ```text
//!   A x - b τ = 0,   -Aᵀ y - s + c τ = 0,   bᵀ y - cᵀ x - κ = 0,
//!   x ∈ K, s ∈ K*, τ, κ ≥ 0
//! ```
//!
//! with Nesterov–Todd scaling on PSD blocks and a dense Schur complement.
//! Free variables stay in the Newton system as a saddle-point block, so they
//! are never split. Outcomes are only reported after independent checks on
//! the original data: `Feasible` carries a point whose equality residual and
//! cone floor are within tolerance, `Infeasible` carries a Farkas ray `y`
//! with `bᵀy = 1` and `-Aᵀy ∈ K*` up to tolerance. Everything else is
//! `Unknown`.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{BlockKind, BlockValue, ConicError, SdpProblem, Solution};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub max_iterations: usize,
    /// Absolute equality residual accepted for `Feasible` and for the Farkas
    /// certificate behind `Infeasible`.
    pub eq_tol: f64,
    /// Eigenvalue floor accepted on PSD blocks.
    pub psd_tol: f64,
    pub time_limit: Option<Duration>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { max_iterations: 200, eq_tol: 1e-8, psd_tol: 1e-9, time_limit: None }
    }
}

impl SolverOptions {
    /// Defaults overridden by `PATHCERT_SDP_MAXITER` and `PATHCERT_SDP_TOL`.
    pub fn from_env() -> Self {
        let mut o = Self::default();
        if let Some(n) = std::env::var("PATHCERT_SDP_MAXITER").ok().and_then(|v| v.parse().ok()) {
            o.max_iterations = n;
        }
        if let Some(t) = std::env::var("PATHCERT_SDP_TOL").ok().and_then(|v| v.parse().ok()) {
            o.eq_tol = t;
        }
        o
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Feasible,
    Infeasible,
    Unknown,
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    pub iterations: usize,
    /// Max-abs equality residual of the returned point.
    pub primal_residual: f64,
    pub cone_floor: f64,
    /// Residual of the infeasibility ray, when one was found.
    pub farkas_residual: Option<f64>,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    pub solution: Option<Solution>,
    /// Farkas ray for `Infeasible`, normalized to `bᵀy = 1`.
    pub witness: Option<Vec<f64>>,
    pub diagnostics: Diagnostics,
}

impl SolveOutcome {
    fn unknown(iterations: usize, message: impl Into<String>) -> Self {
        Self {
            status: SolveStatus::Unknown,
            solution: None,
            witness: None,
            diagnostics: Diagnostics { iterations, message: message.into(), ..Default::default() },
        }
    }
}

/// Decides feasibility of `problem` (or minimizes its objective).
pub fn solve_feasibility(problem: &SdpProblem, opts: &SolverOptions) -> Result<SolveOutcome, ConicError> {
    problem.validate()?;
    Ok(Ipm::new(problem, opts).run())
}

/// Cone part of a primal or dual vector.
#[derive(Clone, Debug)]
struct Cone {
    l: DVector<f64>,
    p: Vec<DMatrix<f64>>,
}

impl Cone {
    fn identity(nl: usize, sizes: &[usize]) -> Self {
        Self { l: DVector::from_element(nl, 1.0), p: sizes.iter().map(|&n| DMatrix::identity(n, n)).collect() }
    }

    fn zeros(nl: usize, sizes: &[usize]) -> Self {
        Self { l: DVector::zeros(nl), p: sizes.iter().map(|&n| DMatrix::zeros(n, n)).collect() }
    }

    fn dot(&self, o: &Cone) -> f64 {
        self.l.dot(&o.l) + self.p.iter().zip(&o.p).map(|(a, b)| a.dot(b)).sum::<f64>()
    }

    fn axpy(&mut self, a: f64, o: &Cone) {
        self.l.axpy(a, &o.l, 1.0);
        for (x, y) in self.p.iter_mut().zip(&o.p) {
            *x += y * a;
        }
    }

    fn scaled(&self, a: f64) -> Cone {
        Cone { l: &self.l * a, p: self.p.iter().map(|m| m * a).collect() }
    }

    fn sub(&self, o: &Cone) -> Cone {
        let mut out = self.clone();
        out.axpy(-1.0, o);
        out
    }

    fn amax(&self) -> f64 {
        self.p.iter().map(|m| m.amax()).fold(self.l.amax(), f64::max)
    }
}

/// Where a problem block lives inside the solver's variable layout.
#[derive(Clone, Copy, Debug)]
enum Slot {
    Free(usize),
    Lp(usize),
    Psd(usize),
}

/// Sparse rows restricted to one PSD block: `(row, [(i, j, v)])`.
type PsdRows = Vec<(usize, Vec<(usize, usize, f64)>)>;

struct Ipm<'a> {
    problem: &'a SdpProblem,
    opts: &'a SolverOptions,
    slots: Vec<Slot>,
    m: usize,
    nf: usize,
    nl: usize,
    sizes: Vec<usize>,
    row_scale: DVector<f64>,
    a_f: DMatrix<f64>,
    a_l: DMatrix<f64>,
    psd_rows: Vec<PsdRows>,
    b: DVector<f64>,
    c_f: DVector<f64>,
    c: Cone,
    has_objective: bool,
    gram_lu: Option<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
}

/// Per-iteration scaling data.
struct Scaling {
    d: DVector<f64>,
    w: Vec<DMatrix<f64>>,
    s_inv: Vec<DMatrix<f64>>,
    chol_x: Vec<DMatrix<f64>>,
    chol_s: Vec<DMatrix<f64>>,
}

struct Direction {
    xf: DVector<f64>,
    xc: Cone,
    y: DVector<f64>,
    s: Cone,
    tau: f64,
    kappa: f64,
}

struct Linear {
    k: DMatrix<f64>,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl Linear {
    fn solve(&self, rhs: &DVector<f64>) -> Option<DVector<f64>> {
        let mut x = self.lu.solve(rhs)?;
        for _ in 0..3 {
            let r = rhs - &self.k * &x;
            if r.amax() <= 1e-15 * rhs.amax().max(1.0) {
                break;
            }
            x += self.lu.solve(&r)?;
        }
        x.iter().all(|v| v.is_finite()).then_some(x)
    }
}

impl<'a> Ipm<'a> {
    fn new(problem: &'a SdpProblem, opts: &'a SolverOptions) -> Self {
        let (mut nf, mut nl) = (0, 0);
        let mut sizes = Vec::new();
        let slots: Vec<Slot> = problem
            .blocks
            .iter()
            .map(|b| match b.kind {
                BlockKind::Free => {
                    nf += b.size;
                    Slot::Free(nf - b.size)
                }
                BlockKind::NonNeg => {
                    nl += b.size;
                    Slot::Lp(nl - b.size)
                }
                BlockKind::Psd => {
                    sizes.push(b.size);
                    Slot::Psd(sizes.len() - 1)
                }
            })
            .collect();
        let m = problem.constraints.len();

        let mut row_scale = DVector::from_element(m, 1.0);
        for (r, c) in problem.constraints.iter().enumerate() {
            let norm2: f64 = c
                .entries
                .iter()
                .map(|e| {
                    let w = if matches!(slots[e.block], Slot::Psd(_)) && e.i != e.j { 2.0 } else { 1.0 };
                    w * e.value * e.value
                })
                .sum();
            if norm2 > 0.0 {
                row_scale[r] = 1.0 / norm2.sqrt();
            }
        }

        let mut a_f = DMatrix::zeros(m, nf);
        let mut a_l = DMatrix::zeros(m, nl);
        let mut psd_rows: Vec<PsdRows> = vec![Vec::new(); sizes.len()];
        let mut b = DVector::zeros(m);
        for (r, c) in problem.constraints.iter().enumerate() {
            let sc = row_scale[r];
            b[r] = c.rhs * sc;
            for e in &c.entries {
                match slots[e.block] {
                    Slot::Free(o) => a_f[(r, o + e.i)] += e.value * sc,
                    Slot::Lp(o) => a_l[(r, o + e.i)] += e.value * sc,
                    Slot::Psd(k) => {
                        let rows = &mut psd_rows[k];
                        if rows.last().map(|(rr, _)| *rr) != Some(r) {
                            rows.push((r, Vec::new()));
                        }
                        rows.last_mut().unwrap().1.push((e.i, e.j, e.value * sc));
                    }
                }
            }
        }

        let mut c_f = DVector::zeros(nf);
        let mut c = Cone::zeros(nl, &sizes);
        if let Some(obj) = &problem.objective {
            for e in obj {
                match slots[e.block] {
                    Slot::Free(o) => c_f[o + e.i] += e.value,
                    Slot::Lp(o) => c.l[o + e.i] += e.value,
                    Slot::Psd(k) => {
                        c.p[k][(e.i, e.j)] += e.value;
                        if e.i != e.j {
                            c.p[k][(e.j, e.i)] += e.value;
                        }
                    }
                }
            }
        }

        let mut ipm = Self {
            problem,
            opts,
            slots,
            m,
            nf,
            nl,
            sizes,
            row_scale,
            a_f,
            a_l,
            psd_rows,
            b,
            c_f,
            c,
            has_objective: problem.objective.is_some(),
            gram_lu: None,
        };
        ipm.gram_lu = ipm.constraint_gram();
        ipm
    }

    fn degree(&self) -> f64 {
        (self.nl + self.sizes.iter().sum::<usize>()) as f64
    }

    fn apply_a(&self, xf: &DVector<f64>, xc: &Cone) -> DVector<f64> {
        let mut out = &self.a_f * xf + &self.a_l * &xc.l;
        for (k, rows) in self.psd_rows.iter().enumerate() {
            let x = &xc.p[k];
            for (r, ents) in rows {
                out[*r] += ents
                    .iter()
                    .map(|&(i, j, v)| if i == j { v * x[(i, j)] } else { 2.0 * v * x[(i, j)] })
                    .sum::<f64>();
            }
        }
        out
    }

    fn apply_at(&self, y: &DVector<f64>) -> (DVector<f64>, Cone) {
        let f = self.a_f.tr_mul(y);
        let l = self.a_l.tr_mul(y);
        let p = self
            .psd_rows
            .iter()
            .zip(&self.sizes)
            .map(|(rows, &n)| {
                let mut z = DMatrix::zeros(n, n);
                for (r, ents) in rows {
                    for &(i, j, v) in ents {
                        z[(i, j)] += y[*r] * v;
                        if i != j {
                            z[(j, i)] += y[*r] * v;
                        }
                    }
                }
                z
            })
            .collect();
        (f, Cone { l, p })
    }

    /// `A Aᵀ` over all variables, used to project iterates onto `Ax = b`.
    fn constraint_gram(&self) -> Option<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>> {
        let m = self.m;
        if m == 0 {
            return None;
        }
        let mut g = &self.a_f * self.a_f.transpose() + &self.a_l * self.a_l.transpose();
        for (rows, &n) in self.psd_rows.iter().zip(&self.sizes) {
            let mats: Vec<(usize, DMatrix<f64>)> = rows
                .iter()
                .map(|(r, ents)| {
                    let mut z = DMatrix::zeros(n, n);
                    for &(i, j, v) in ents {
                        z[(i, j)] += v;
                        if i != j {
                            z[(j, i)] += v;
                        }
                    }
                    (*r, z)
                })
                .collect();
            for (a, (ra, za)) in mats.iter().enumerate() {
                for (rb, zb) in &mats[a..] {
                    let v = za.dot(zb);
                    g[(*ra, *rb)] += v;
                    if ra != rb {
                        g[(*rb, *ra)] += v;
                    }
                }
            }
        }
        let reg = 1e-13 * (1.0 + g.diagonal().amax());
        for i in 0..m {
            g[(i, i)] += reg;
        }
        Some(g.lu())
    }

    fn scaling(&self, xc: &Cone, s: &Cone) -> Option<Scaling> {
        let d = xc.l.component_div(&s.l);
        let mut w = Vec::new();
        let mut s_inv = Vec::new();
        let mut chol_x = Vec::new();
        let mut chol_s = Vec::new();
        for (x, sm) in xc.p.iter().zip(&s.p) {
            let lx = x.clone().cholesky()?.l();
            let cs = sm.clone().cholesky()?;
            let ls = cs.l();
            s_inv.push(cs.inverse());
            let svd = (ls.transpose() * &lx).svd(false, true);
            let vt = svd.v_t?;
            let mut g = &lx * vt.transpose();
            for (k, sv) in svd.singular_values.iter().enumerate() {
                if !(*sv > 0.0) {
                    return None;
                }
                g.column_mut(k).scale_mut(1.0 / sv.sqrt());
            }
            let wk = &g * g.transpose();
            w.push((&wk + wk.transpose()) * 0.5);
            chol_x.push(lx);
            chol_s.push(ls);
        }
        Some(Scaling { d, w, s_inv, chol_x, chol_s })
    }

    /// `G(v)`: `d ∘ v` on LP entries and `W V W` on PSD blocks.
    fn apply_g(&self, sc: &Scaling, v: &Cone) -> Cone {
        Cone {
            l: sc.d.component_mul(&v.l),
            p: v.p.iter().zip(&sc.w).map(|(vk, wk)| wk * vk * wk).collect(),
        }
    }

    fn schur(&self, sc: &Scaling) -> DMatrix<f64> {
        let mut m = &self.a_l * DMatrix::from_diagonal(&sc.d) * self.a_l.transpose();
        for (k, rows) in self.psd_rows.iter().enumerate() {
            let w = &sc.w[k];
            let n = self.sizes[k];
            let cols: Vec<DVector<f64>> = (0..n).map(|i| w.column(i).into_owned()).collect();
            for (rj, ents_j) in rows {
                let mut bmat = DMatrix::zeros(n, n);
                for &(i, j, v) in ents_j {
                    bmat.ger(v, &cols[i], &cols[j], 1.0);
                    if i != j {
                        bmat.ger(v, &cols[j], &cols[i], 1.0);
                    }
                }
                for (ri, ents_i) in rows {
                    let val: f64 = ents_i
                        .iter()
                        .map(|&(i, j, v)| if i == j { v * bmat[(i, j)] } else { 2.0 * v * bmat[(i, j)] })
                        .sum();
                    m[(*ri, *rj)] += val;
                }
            }
        }
        (&m + m.transpose()) * 0.5
    }

    fn linear_system(&self, sc: &Scaling) -> Option<Linear> {
        let (m, nf) = (self.m, self.nf);
        let schur = self.schur(sc);
        let mut k = DMatrix::zeros(m + nf, m + nf);
        k.view_mut((0, 0), (m, m)).copy_from(&schur);
        k.view_mut((0, m), (m, nf)).copy_from(&self.a_f);
        k.view_mut((m, 0), (nf, m)).copy_from(&self.a_f.transpose());
        let scale = schur.diagonal().iter().fold(1.0f64, |a, &b| a.max(b.abs()));
        let reg = 1e-12 * scale;
        let mut kreg = k.clone();
        for i in 0..m {
            kreg[(i, i)] += reg;
        }
        for i in m..m + nf {
            kreg[(i, i)] -= reg;
        }
        Some(Linear { k, lu: kreg.lu() })
    }

    /// Max step in `[0, ∞)` keeping `x + α dx` in the cone.
    fn max_step(&self, x: &Cone, dx: &Cone, chol: &[DMatrix<f64>]) -> f64 {
        let mut alpha = f64::INFINITY;
        for (xi, di) in x.l.iter().zip(dx.l.iter()) {
            if *di < 0.0 {
                alpha = alpha.min(-xi / di);
            }
        }
        for (l, d) in chol.iter().zip(&dx.p) {
            let Some(t) = l.solve_lower_triangular(d) else { return 0.0 };
            let Some(t) = l.solve_lower_triangular(&t.transpose()) else { return 0.0 };
            let t = (&t + t.transpose()) * 0.5;
            let lmin = t.symmetric_eigenvalues().min();
            if lmin < 0.0 {
                alpha = alpha.min(-1.0 / lmin);
            }
        }
        alpha
    }

    #[allow(clippy::too_many_arguments)]
    fn direction(
        &self,
        lin: &Linear,
        sc: &Scaling,
        state: &State,
        res: &Residuals,
        v: &DVector<f64>,
        q: &Cone,
        sigma: f64,
        mu: f64,
    ) -> Option<Direction> {
        let (m, nf) = (self.m, self.nf);
        let eta = 1.0 - sigma;
        // G(R) = σμ S⁻¹ - X on PSD blocks, σμ/s - x on LP entries
        let gr = Cone {
            l: DVector::from_iterator(
                self.nl,
                state.xc.l.iter().zip(state.s.l.iter()).map(|(x, s)| sigma * mu / s - x),
            ),
            p: sc.s_inv.iter().zip(&state.xc.p).map(|(si, x)| si * (sigma * mu) - x).collect(),
        };
        let mut h = gr;
        h.axpy(-eta, &self.apply_g(sc, &res.dc));
        let mut rhs = DVector::zeros(m + nf);
        rhs.rows_mut(0, m).copy_from(&(-(&res.p * eta) - self.apply_a(&DVector::zeros(nf), &h)));
        rhs.rows_mut(m, nf).copy_from(&(&res.df * eta));
        let u = lin.solve(&rhs)?;
        let (u_y, u_f) = (u.rows(0, m).into_owned(), u.rows(m, nf).into_owned());
        let (v_y, v_f) = (v.rows(0, m), v.rows(m, nf));

        let (_, at_uy) = self.apply_at(&u_y);
        let mut p = h;
        p.axpy(1.0, &self.apply_g(sc, &at_uy));

        let (tau, kappa) = (state.tau, state.kappa);
        let num = -eta * res.g - self.b.dot(&u_y) + self.c_f.dot(&u_f) + self.c.dot(&p) + (sigma * mu - tau * kappa) / tau;
        let den = self.b.dot(&v_y) - self.c_f.dot(&v_f) - self.c.dot(q) + kappa / tau;
        if !(den.abs() > 0.0) {
            return None;
        }
        let dtau = num / den;
        let dy = &u_y + v_y * dtau;
        let dxf = &u_f + v_f * dtau;
        let mut dxc = p;
        dxc.axpy(dtau, q);
        let (_, at_dy) = self.apply_at(&dy);
        let mut ds = res.dc.scaled(eta);
        ds.axpy(-1.0, &at_dy);
        ds.axpy(dtau, &self.c);
        let dkappa = (sigma * mu - tau * kappa - kappa * dtau) / tau;
        Some(Direction { xf: dxf, xc: dxc, y: dy, s: ds, tau: dtau, kappa: dkappa })
    }

    fn step_length(&self, state: &State, sc: &Scaling, dir: &Direction) -> f64 {
        let mut a = self.max_step(&state.xc, &dir.xc, &sc.chol_x);
        a = a.min(self.max_step(&state.s, &dir.s, &sc.chol_s));
        if dir.tau < 0.0 {
            a = a.min(-state.tau / dir.tau);
        }
        if dir.kappa < 0.0 {
            a = a.min(-state.kappa / dir.kappa);
        }
        a
    }

    fn residuals(&self, st: &State) -> Residuals {
        let p = self.apply_a(&st.xf, &st.xc) - &self.b * st.tau;
        let (atf, atc) = self.apply_at(&st.y);
        let df = -atf + &self.c_f * st.tau;
        let mut dc = atc.scaled(-1.0);
        dc.axpy(-1.0, &st.s);
        dc.axpy(st.tau, &self.c);
        let g = self.b.dot(&st.y) - self.c_f.dot(&st.xf) - self.c.dot(&st.xc) - st.kappa;
        Residuals { p, df, dc, g }
    }

    /// Packs solver-space primal values into problem blocks.
    fn to_solution(&self, xf: &DVector<f64>, xc: &Cone) -> Solution {
        let blocks = self
            .problem
            .blocks
            .iter()
            .zip(&self.slots)
            .map(|(b, slot)| match *slot {
                Slot::Free(o) => BlockValue::Vector(xf.rows(o, b.size).into_owned()),
                Slot::Lp(o) => BlockValue::Vector(xc.l.rows(o, b.size).into_owned()),
                Slot::Psd(k) => BlockValue::Psd(xc.p[k].clone()),
            })
            .collect();
        Solution { blocks }
    }

    /// Projects `(xf, xc)` onto `Ax = b` (minimum-norm correction) and checks
    /// the result on the original data.
    fn polish(&self, xf: &DVector<f64>, xc: &Cone) -> Option<(Solution, f64, f64)> {
        let mut xf = xf.clone();
        let mut xc = xc.clone();
        if let Some(lu) = &self.gram_lu {
            for _ in 0..3 {
                let r = self.apply_a(&xf, &xc) - &self.b;
                if r.amax() == 0.0 {
                    break;
                }
                let dy = lu.solve(&r)?;
                let (atf, atc) = self.apply_at(&dy);
                xf -= atf;
                xc.axpy(-1.0, &atc);
            }
        }
        let sol = self.to_solution(&xf, &xc);
        let resid = self.problem.residuals(&sol).iter().fold(0.0f64, |m, r| m.max(r.abs()));
        let floor = self.problem.cone_floor(&sol);
        (resid <= self.opts.eq_tol && floor >= -self.opts.psd_tol).then_some((sol, resid, floor))
    }

    /// Checks `y` (solver row scaling) as a Farkas ray on the original data.
    fn farkas(&self, y: &DVector<f64>) -> Option<(Vec<f64>, f64)> {
        let y_orig = y.component_mul(&self.row_scale);
        let by: f64 = self.problem.constraints.iter().zip(y_orig.iter()).map(|(c, yi)| c.rhs * yi).sum();
        if !(by > 0.0) {
            return None;
        }
        let y_hat = y_orig / by;
        // Aᵀŷ on the original rows: undo the row scaling inside apply_at
        let (f, c) = self.apply_at(&y_hat.component_div(&self.row_scale));
        let mut resid = f.amax();
        for &v in c.l.iter() {
            resid = resid.max(v);
        }
        for z in &c.p {
            resid = resid.max(z.symmetric_eigenvalues().max());
        }
        (resid <= self.opts.eq_tol).then(|| (y_hat.iter().copied().collect(), resid))
    }

    fn run(&self) -> SolveOutcome {
        let start = Instant::now();
        let nu = self.degree();
        let mut st = State {
            xf: DVector::zeros(self.nf),
            xc: Cone::identity(self.nl, &self.sizes),
            y: DVector::zeros(self.m),
            s: Cone::identity(self.nl, &self.sizes),
            tau: 1.0,
            kappa: 1.0,
        };
        let b_norm = self.b.amax();
        let mut stalls = 0;

        for iter in 0..=self.opts.max_iterations {
            if let Some(limit) = self.opts.time_limit {
                if start.elapsed() > limit {
                    return SolveOutcome::unknown(iter, "time limit reached");
                }
            }
            let res = self.residuals(&st);
            let mu = (st.xc.dot(&st.s) + st.tau * st.kappa) / (nu + 1.0);

            // feasible candidate
            let xf_hat = &st.xf / st.tau;
            let xc_hat = st.xc.scaled(1.0 / st.tau);
            let p_rel = res.p.amax() / st.tau / (1.0 + b_norm);
            let optimal_enough = !self.has_objective || {
                let pobj = self.c_f.dot(&st.xf) + self.c.dot(&st.xc);
                let dobj = self.b.dot(&st.y);
                let d_rel = res.df.amax().max(res.dc.amax()) / st.tau / (1.0 + self.c.amax().max(self.c_f.amax()));
                let gap = (pobj - dobj).abs() / st.tau / (1.0 + (pobj / st.tau).abs());
                d_rel <= 1e-7 && gap <= 1e-7
            };
            if p_rel <= 1e-5 && optimal_enough {
                if let Some((sol, resid, floor)) = self.polish(&xf_hat, &xc_hat) {
                    return SolveOutcome {
                        status: SolveStatus::Feasible,
                        solution: Some(sol),
                        witness: None,
                        diagnostics: Diagnostics {
                            iterations: iter,
                            primal_residual: resid,
                            cone_floor: floor,
                            farkas_residual: None,
                            message: "feasible".into(),
                        },
                    };
                }
            }
            // infeasibility ray
            if st.kappa > st.tau {
                if let Some((ray, resid)) = self.farkas(&st.y) {
                    return SolveOutcome {
                        status: SolveStatus::Infeasible,
                        solution: None,
                        witness: Some(ray),
                        diagnostics: Diagnostics {
                            iterations: iter,
                            farkas_residual: Some(resid),
                            message: "primal infeasible".into(),
                            ..Default::default()
                        },
                    };
                }
            }
            if iter == self.opts.max_iterations {
                break;
            }
            if !mu.is_finite() || mu < 1e-300 {
                return SolveOutcome::unknown(iter, "complementarity collapsed without a certificate");
            }

            let Some(sc) = self.scaling(&st.xc, &st.s) else {
                return SolveOutcome::unknown(iter, "lost positive definiteness");
            };
            let Some(lin) = self.linear_system(&sc) else {
                return SolveOutcome::unknown(iter, "singular Newton system");
            };
            let mut rhs_v = DVector::zeros(self.m + self.nf);
            let gc = self.apply_g(&sc, &self.c);
            let a_gc = self.apply_a(&DVector::zeros(self.nf), &gc);
            rhs_v.rows_mut(0, self.m).copy_from(&(a_gc + &self.b));
            rhs_v.rows_mut(self.m, self.nf).copy_from(&self.c_f);
            let Some(v) = lin.solve(&rhs_v) else {
                return SolveOutcome::unknown(iter, "singular Newton system");
            };
            let (_, at_vy) = self.apply_at(&v.rows(0, self.m).into_owned());
            let q = self.apply_g(&sc, &at_vy).sub(&gc);

            let Some(aff) = self.direction(&lin, &sc, &st, &res, &v, &q, 0.0, mu) else {
                return SolveOutcome::unknown(iter, "degenerate homogeneous direction");
            };
            let a_aff = self.step_length(&st, &sc, &aff).min(1.0);
            let sigma = (1.0 - a_aff).powi(3).clamp(1e-4, 1.0);
            let Some(dir) = self.direction(&lin, &sc, &st, &res, &v, &q, sigma, mu) else {
                return SolveOutcome::unknown(iter, "degenerate homogeneous direction");
            };
            let alpha = (0.95 * self.step_length(&st, &sc, &dir)).min(1.0);
            if !(alpha > 1e-10) {
                stalls += 1;
                if stalls > 3 {
                    return SolveOutcome::unknown(iter, "step length stalled");
                }
                continue;
            }
            st.xf.axpy(alpha, &dir.xf, 1.0);
            st.xc.axpy(alpha, &dir.xc);
            st.y.axpy(alpha, &dir.y, 1.0);
            st.s.axpy(alpha, &dir.s);
            st.tau += alpha * dir.tau;
            st.kappa += alpha * dir.kappa;
            for m in st.xc.p.iter_mut().chain(st.s.p.iter_mut()) {
                let sym = (&*m + m.transpose()) * 0.5;
                *m = sym;
            }
            // renormalize the homogeneous scale to keep magnitudes moderate
            let scale = st.tau + st.kappa;
            if !(scale > 1e-100) || !scale.is_finite() {
                return SolveOutcome::unknown(iter, "homogeneous scale degenerated");
            }
            if !(1e-3..=1e3).contains(&scale) {
                st.xf /= scale;
                st.xc = st.xc.scaled(1.0 / scale);
                st.y /= scale;
                st.s = st.s.scaled(1.0 / scale);
                st.tau /= scale;
                st.kappa /= scale;
            }
        }
        SolveOutcome::unknown(self.opts.max_iterations, "iteration limit reached")
    }
}

struct State {
    xf: DVector<f64>,
    xc: Cone,
    y: DVector<f64>,
    s: Cone,
    tau: f64,
    kappa: f64,
}

struct Residuals {
    p: DVector<f64>,
    df: DVector<f64>,
    dc: Cone,
    g: f64,
}
