//! Convergence studies: walk against limit, the fixed-coin counterexample,
//! and Klein-Gordon residual orders.

use std::f64::consts::{PI, TAU};
use std::io::{self, Write};

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;
use thiserror::Error;

use crate::coin::{instantiate_walk, CoinError, FixedAngleWalk, WalkJet};
use crate::continuum::{
    integrate_dirac, kg_residual, transport_solution, ContinuumError, ContinuumGrid, IntegrateOptions,
};
use crate::dqw::run_walk;
use crate::expr::{EvalError, Expr};
use crate::lattice::{
    check_positive, l2_distance, sample_on_positions, GridSpec, InitialProfile, LatticeError, SpinorField,
};

/// Largest walk probability drift accepted inside a study.
pub const WALK_DRIFT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HarnessError {
    #[error("invalid ladder: {0}")]
    Ladder(String),
    #[error("{0}")]
    Precondition(String),
    #[error("walk probability drifted by {drift:e} at epsilon = {epsilon}")]
    Drift { epsilon: f64, drift: f64 },
    #[error(transparent)]
    Coin(#[from] CoinError),
    #[error(transparent)]
    Continuum(#[from] ContinuumError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    Analytic,
    #[default]
    FineContinuum,
}

/// Strictly decreasing scales and a comparison time.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonLadder {
    pub eps: Vec<f64>,
    pub t_physical: f64,
    pub reference: Reference,
}

impl Default for EpsilonLadder {
    fn default() -> Self {
        EpsilonLadder {
            eps: vec![0.02, 0.01, 0.005, 0.0025, 0.00125],
            t_physical: 1.0,
            reference: Reference::FineContinuum,
        }
    }
}

impl EpsilonLadder {
    pub fn new(eps: Vec<f64>, t_physical: f64, reference: Reference) -> Result<Self, HarnessError> {
        let ladder = EpsilonLadder { eps, t_physical, reference };
        ladder.validate()?;
        Ok(ladder)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.eps.is_empty() {
            return Err(HarnessError::Ladder("no rungs".into()));
        }
        for e in &self.eps {
            check_positive("epsilon", *e)?;
        }
        if self.eps.windows(2).any(|w| w[1] >= w[0]) {
            return Err(HarnessError::Ladder("epsilon values must strictly decrease".into()));
        }
        check_positive("t_physical", self.t_physical)?;
        Ok(())
    }

    /// Step count per rung; `t_physical` must be a whole number of steps `tau * eps`.
    pub fn steps(&self, tau: f64) -> Result<Vec<usize>, HarnessError> {
        self.validate()?;
        self.eps
            .iter()
            .map(|&e| {
                let ratio = self.t_physical / (tau * e);
                let steps = ratio.round();
                if steps < 1.0 || (steps - ratio).abs() > 1e-9 * ratio.max(1.0) {
                    Err(HarnessError::Ladder(format!(
                        "t_physical = {} is not a multiple of tau * epsilon = {}",
                        self.t_physical,
                        tau * e
                    )))
                } else {
                    Ok(steps as usize)
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    /// `epsilon` for walk studies, grid spacing for grid studies.
    pub scale: f64,
    pub error: f64,
    pub n_sites: usize,
    pub steps: usize,
    pub drift: f64,
    /// Errors restricted to the two checkerboard classes, when applicable.
    pub error_even: Option<f64>,
    pub error_odd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    /// `orders[i]` compares rows `i` and `i + 1`.
    pub orders: Vec<f64>,
    /// Median of `orders`, `NaN` with fewer than two rows.
    pub summary_order: f64,
}

impl ConvergenceReport {
    pub fn from_rows(rows: Vec<ConvergenceRow>) -> Self {
        let orders: Vec<f64> = rows
            .windows(2)
            .map(|w| observed_order(w[0].error, w[1].error, w[0].scale, w[1].scale))
            .collect();
        let summary_order = median(&orders);
        ConvergenceReport { rows, orders, summary_order }
    }

    /// Pairwise orders among the last three rows.
    pub fn tail_orders(&self) -> &[f64] {
        let k = self.orders.len();
        &self.orders[k.saturating_sub(2)..]
    }

    pub fn errors(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.error).collect()
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "epsilon,error,observed_order")?;
        for (i, r) in self.rows.iter().enumerate() {
            let order = if i == 0 { String::new() } else { format!("{:e}", self.orders[i - 1]) };
            writeln!(out, "{:e},{:e},{}", r.scale, r.error, order)?;
        }
        Ok(())
    }
}

/// `log(e1 / e2) / log(s1 / s2)`.
pub fn observed_order(e1: f64, e2: f64, s1: f64, s2: f64) -> f64 {
    (e1 / e2).ln() / (s1 / s2).ln()
}

fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let k = s.len();
    if k % 2 == 1 {
        s[k / 2]
    } else {
        0.5 * (s[k / 2 - 1] + s[k / 2])
    }
}

/// Trigonometric interpolant of a periodic sampled field.
pub struct FourierInterpolant {
    x0: f64,
    period: f64,
    modes: Vec<(f64, Complex64, Complex64)>,
}

impl FourierInterpolant {
    /// Keeps modes above `1e-15` of the largest coefficient.
    pub fn new(f: &SpinorField, x0: f64, period: f64) -> Self {
        let n = f.n_sites();
        let fft = FftPlanner::new().plan_fft_forward(n);
        let mut a = f.minus.clone();
        let mut b = f.plus.clone();
        fft.process(&mut a);
        fft.process(&mut b);
        let biggest = a.iter().chain(&b).map(|z| z.norm()).fold(0.0, f64::max);
        let mut modes = Vec::new();
        for idx in 0..n {
            if a[idx].norm().max(b[idx].norm()) <= 1e-15 * biggest {
                continue;
            }
            let k = if idx <= n / 2 { idx as f64 } else { idx as f64 - n as f64 };
            modes.push((TAU * k / period, a[idx] / n as f64, b[idx] / n as f64));
        }
        FourierInterpolant { x0, period, modes }
    }

    pub fn eval(&self, x: f64) -> (Complex64, Complex64) {
        let y = (x - self.x0).rem_euclid(self.period);
        let mut s = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        for &(k, a, b) in &self.modes {
            let ph = Complex64::from_polar(1.0, k * y);
            s.0 += a * ph;
            s.1 += b * ph;
        }
        s
    }

    pub fn sample(&self, xs: &[f64], time: f64) -> SpinorField {
        let (minus, plus) = xs.iter().map(|&x| self.eval(x)).unzip();
        SpinorField { minus, plus, time }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyOptions {
    /// `(x0, period)`; by default `2 (c t + 10 width)` centred on the packet.
    pub domain: Option<(f64, f64)>,
    pub cfl: f64,
    /// Reference grid spacing as a fraction of the coarsest rung's spacing.
    pub reference_refinement: f64,
}

impl Default for StudyOptions {
    fn default() -> Self {
        StudyOptions {
            domain: None,
            cfl: 0.5,
            reference_refinement: 4.0,
        }
    }
}

impl StudyOptions {
    fn domain(&self, speed: f64, t: f64, profile: &InitialProfile) -> (f64, f64) {
        self.domain.unwrap_or_else(|| {
            let len = 2.0 * (speed * t + 10.0 * profile.width);
            (profile.center - 0.5 * len, len)
        })
    }
}

/// `L^2`-normalised packet as a function of position.
fn continuum_packet(profile: &InitialProfile) -> impl Fn(f64) -> (Complex64, Complex64) + '_ {
    let (wm, wp) = profile.weights;
    let norm = ((wm.norm_sqr() + wp.norm_sqr()) * profile.width * PI.sqrt()).sqrt();
    move |x| {
        let (a, b) = profile.raw(x);
        (a / norm, b / norm)
    }
}

/// Reference continuum state at `t_physical`, evaluable anywhere.
enum ReferenceField<'a> {
    Analytic {
        jet: &'a WalkJet,
        profile: &'a InitialProfile,
        t: f64,
        x0: f64,
        period: f64,
    },
    Fine(FourierInterpolant),
}

impl ReferenceField<'_> {
    fn sample(&self, xs: &[f64], time: f64) -> Result<SpinorField, HarnessError> {
        match self {
            ReferenceField::Analytic { jet, profile, t, x0, period } => {
                Ok(transport_solution(jet, continuum_packet(profile), 0.0, *t, xs, *x0, *period)?)
            }
            ReferenceField::Fine(interp) => Ok(interp.sample(xs, time)),
        }
    }
}

fn build_reference<'a>(
    jet: &'a WalkJet,
    ladder: &EpsilonLadder,
    profile: &'a InitialProfile,
    opts: &StudyOptions,
    x0: f64,
    period: f64,
) -> Result<ReferenceField<'a>, HarnessError> {
    match ladder.reference {
        Reference::Analytic => Ok(ReferenceField::Analytic {
            jet,
            profile,
            t: ladder.t_physical,
            x0,
            period,
        }),
        Reference::FineContinuum => {
            let h = jet.lambda * ladder.eps[0] / opts.reference_refinement;
            let n = (period / h).ceil() as usize;
            let grid = ContinuumGrid::with_cfl(n, n as f64 * h, 0.0, x0, jet.speed(), opts.cfl)?;
            let packet = continuum_packet(profile);
            let (minus, plus) = grid.positions().iter().map(|&x| packet(x)).unzip();
            let init = SpinorField { minus, plus, time: 0.0 };
            let run = integrate_dirac(&init, jet, &grid, ladder.t_physical, &IntegrateOptions::default())?;
            Ok(ReferenceField::Fine(FourierInterpolant::new(run.last(), x0, grid.period())))
        }
    }
}

fn sublattice_error(a: &SpinorField, b: &SpinorField, dx: f64, j: usize, parity: usize) -> f64 {
    let s: f64 = (0..a.n_sites())
        .filter(|m| (j + m) % 2 == parity)
        .map(|m| (a.minus[m] - b.minus[m]).norm_sqr() + (a.plus[m] - b.plus[m]).norm_sqr())
        .sum();
    (2.0 * dx * s).sqrt()
}

/// Runs the jet's walk at every rung and measures its distance to the
/// continuum solution at `t_physical`.
///
/// Walk amplitudes are turned into densities (divided by `sqrt(dx)`) before
/// comparison with the unit-norm continuum reference.
pub fn convergence_study(
    jet: &WalkJet,
    ladder: &EpsilonLadder,
    profile: &InitialProfile,
    opts: &StudyOptions,
) -> Result<ConvergenceReport, HarnessError> {
    if !jet.is_linear_scaling() {
        return Err(HarnessError::Precondition(
            "continuum comparison needs alpha = beta = delta = 1".into(),
        ));
    }
    let steps = ladder.steps(jet.tau)?;
    let (x0, period) = opts.domain(jet.speed(), ladder.t_physical, profile);
    let reference = build_reference(jet, ladder, profile, opts, x0, period)?;
    let mut rows = Vec::with_capacity(ladder.eps.len());
    for (&eps, &j_steps) in ladder.eps.iter().zip(&steps) {
        let dx = jet.lambda * eps;
        let n = (period / dx).ceil() as usize;
        let (walk, grid) = instantiate_walk(jet, eps, n, 0.0, x0, j_steps)?;
        let init = sample_on_positions(profile, &grid.positions(), grid.dx, 0.0)?;
        let run = run_walk(&init, &walk, j_steps, 0)?;
        if run.max_drift > WALK_DRIFT_TOL {
            return Err(HarnessError::Drift { epsilon: eps, drift: run.max_drift });
        }
        let walk_density = run.last().to_density_amplitude(grid.dx);
        let exact = reference.sample(&grid.positions(), ladder.t_physical)?;
        rows.push(ConvergenceRow {
            scale: eps,
            error: l2_distance(&walk_density, &exact, grid.dx)?,
            n_sites: n,
            steps: j_steps,
            drift: run.max_drift,
            error_even: Some(sublattice_error(&walk_density, &exact, grid.dx, j_steps, 0)),
            error_odd: Some(sublattice_error(&walk_density, &exact, grid.dx, j_steps, 1)),
        });
    }
    Ok(ConvergenceReport::from_rows(rows))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HadamardReport {
    pub eps: Vec<f64>,
    pub n_sites: Vec<usize>,
    /// Successive distances of the fixed-coin walk.
    pub distances: Vec<f64>,
    /// Successive distances of the scaled control walk.
    pub control_distances: Vec<f64>,
    pub insufficient_rungs: bool,
    pub factor: f64,
    pub passed: bool,
}

impl HadamardReport {
    pub fn min_distance(&self) -> f64 {
        self.distances.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn control_last(&self) -> f64 {
        self.control_distances.last().copied().unwrap_or(f64::NAN)
    }
}

/// Distance between a coarse and a fine density, the coarse one read at the
/// nearest coarse site of every fine site.
fn restricted_distance(coarse: &SpinorField, gc: &GridSpec, fine: &SpinorField, gf: &GridSpec) -> f64 {
    let nc = coarse.n_sites();
    let s: f64 = (0..fine.n_sites())
        .map(|m| {
            let pos = (gf.x(m) - gc.x0) / gc.dx;
            let k = (pos.round() as i64).rem_euclid(nc as i64) as usize;
            (coarse.minus[k] - fine.minus[m]).norm_sqr() + (coarse.plus[k] - fine.plus[m]).norm_sqr()
        })
        .sum();
    (gf.dx * s).sqrt()
}

fn final_densities<S: crate::coin::CoinSchedule>(
    walk: &S,
    grid: &GridSpec,
    profile: &InitialProfile,
    steps: usize,
) -> Result<SpinorField, HarnessError> {
    let init = sample_on_positions(profile, &grid.positions(), grid.dx, 0.0)?;
    let run = run_walk(&init, walk, steps, 0)?;
    Ok(run.last().to_density_amplitude(grid.dx))
}

/// The fixed coin `theta = pi/4` (no epsilon scaling) against the jet with
/// `theta_bar = pi/4`, `alpha = 1`, on the same ladder with `tau = lambda = 1`.
pub fn hadamard_nolimit_demo(
    ladder: &EpsilonLadder,
    profile: &InitialProfile,
    opts: &StudyOptions,
    factor: f64,
) -> Result<HadamardReport, HarnessError> {
    let steps = ladder.steps(1.0)?;
    let (x0, period) = opts.domain(1.0, ladder.t_physical, profile);
    let control_jet = WalkJet::linear(
        0,
        1.0,
        1.0,
        Expr::binary(crate::expr::BinOp::Div, Expr::Const(crate::expr::Constant::Pi), Expr::Num(4.0)),
        Expr::Num(0.0),
        Expr::Num(0.0),
    )?;
    let mut fixed = Vec::new();
    let mut control = Vec::new();
    let mut n_sites = Vec::new();
    for (&eps, &j) in ladder.eps.iter().zip(&steps) {
        let n = (period / eps).ceil() as usize;
        n_sites.push(n);
        let (cw, grid) = instantiate_walk(&control_jet, eps, n, 0.0, x0, j)?;
        control.push((final_densities(&cw, &grid, profile, j)?, grid.clone()));
        let hw = FixedAngleWalk::constant(PI / 4.0, 0.0, 0.0, grid.clone());
        fixed.push((final_densities(&hw, &grid, profile, j)?, grid));
    }
    let pairs = |v: &[(SpinorField, GridSpec)]| -> Vec<f64> {
        v.windows(2)
            .map(|w| restricted_distance(&w[0].0, &w[0].1, &w[1].0, &w[1].1))
            .collect()
    };
    let distances = pairs(&fixed);
    let control_distances = pairs(&control);
    let insufficient_rungs = distances.is_empty();
    let mut report = HadamardReport {
        eps: ladder.eps.clone(),
        n_sites,
        distances,
        control_distances,
        insufficient_rungs,
        factor,
        passed: false,
    };
    report.passed = !insufficient_rungs && report.min_distance() > factor * report.control_last();
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KgStudyOptions {
    pub x0: f64,
    pub period: f64,
    pub t_final: f64,
    pub cfl: f64,
    pub profile: InitialProfile,
}

/// Integrates the limit system on each grid and records the largest
/// unmasked Klein-Gordon residual at `t_final`.
pub fn kg_order_study(jet: &WalkJet, grids: &[usize], opts: &KgStudyOptions) -> Result<ConvergenceReport, HarnessError> {
    let mut rows = Vec::with_capacity(grids.len());
    for &n in grids {
        let grid = ContinuumGrid::with_cfl(n, opts.period, 0.0, opts.x0, jet.speed(), opts.cfl)?;
        let init = sample_on_positions(&opts.profile, &grid.positions(), grid.dx, 0.0)?.scaled(1.0 / grid.dx.sqrt());
        let run = integrate_dirac(
            &init,
            jet,
            &grid,
            opts.t_final,
            &IntegrateOptions { snapshot_every: 0, keep_tail: 3 },
        )?;
        if run.tail.len() < 3 {
            return Err(HarnessError::Precondition("need at least two time steps".into()));
        }
        let k = run.tail.len();
        let window = [run.tail[k - 3].clone(), run.tail[k - 2].clone(), run.tail[k - 1].clone()];
        let res = kg_residual(&window, jet, &grid)?;
        rows.push(ConvergenceRow {
            scale: grid.dx,
            error: res.max_unmasked(),
            n_sites: n,
            steps: run.steps,
            drift: run.max_drift,
            error_even: None,
            error_odd: None,
        });
    }
    Ok(ConvergenceReport::from_rows(rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn profile() -> InitialProfile {
        InitialProfile::gaussian(8.0, 0.5, 0.0, c(1.0, 0.0), c(0.0, 0.7))
    }

    fn jet(tb: &str, xb: &str, z: &str) -> WalkJet {
        WalkJet::parse_linear(1, 1.0, 1.0, tb, xb, z).unwrap()
    }

    fn short_ladder(reference: Reference) -> EpsilonLadder {
        EpsilonLadder::new(vec![1.0 / 25.0, 1.0 / 50.0, 1.0 / 100.0], 1.0, reference).unwrap()
    }

    #[test]
    fn ladder_validation() {
        assert!(EpsilonLadder::new(vec![0.01, 0.02], 1.0, Reference::Analytic).is_err());
        assert!(EpsilonLadder::new(vec![], 1.0, Reference::Analytic).is_err());
        let l = EpsilonLadder::default();
        assert_eq!(l.steps(1.0).unwrap(), vec![50, 100, 200, 400, 800]);
        assert_eq!(l.steps(0.5).unwrap(), vec![100, 200, 400, 800, 1600]);
        assert!(l.steps(3.0).is_err());
        let odd = EpsilonLadder::new(vec![1.0 / 50.0, 1.0 / 99.0, 1.0 / 201.0], 1.0, Reference::Analytic).unwrap();
        assert_eq!(odd.steps(1.0).unwrap(), vec![50, 99, 201]);
    }

    #[test]
    fn orders_and_csv() {
        let rows = [0.1, 0.05, 0.025]
            .iter()
            .map(|&s| ConvergenceRow { scale: s, error: 3.0 * s, n_sites: 1, steps: 1, drift: 0.0, error_even: None, error_odd: None })
            .collect();
        let r = ConvergenceReport::from_rows(rows);
        assert!(r.orders.iter().all(|o| (o - 1.0).abs() < 1e-12));
        assert!((r.summary_order - 1.0).abs() < 1e-12);
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("epsilon,error,observed_order\n1e-1,3.0000000000000004e-1,\n"));
        assert_eq!(median(&[3.0, 1.0, 2.0, 10.0]), 2.5);
    }

    #[test]
    fn fourier_interpolant_is_exact_on_band_limited_data() {
        let n = 32;
        let period = 3.0;
        let mut f = SpinorField::zeros(n, 0.0);
        let g = |x: f64| c((TAU * 2.0 * x / period).cos(), (TAU * 3.0 * x / period).sin() * 0.5);
        for m in 0..n {
            let x = 1.0 + m as f64 * period / n as f64;
            f.minus[m] = g(x);
            f.plus[m] = g(x) * 2.0;
        }
        let interp = FourierInterpolant::new(&f, 1.0, period);
        for x in [1.01, 2.37, 3.99, 0.2] {
            let (a, b) = interp.eval(x);
            assert!((a - g(x)).norm() < 1e-13);
            assert!((b - g(x) * 2.0).norm() < 1e-13);
        }
    }

    #[test]
    fn rejects_nonlinear_scaling() {
        let mut j = jet("1", "0", "0");
        j.delta = 2.0;
        assert!(matches!(
            convergence_study(&j, &short_ladder(Reference::FineContinuum), &profile(), &StudyOptions::default()),
            Err(HarnessError::Precondition(_))
        ));
    }

    #[test]
    fn free_walk_is_exact_transport() {
        let j = jet("0", "0", "0");
        let r = convergence_study(&j, &short_ladder(Reference::Analytic), &profile(), &StudyOptions::default()).unwrap();
        // only the Riemann-sum normalisation of the packet separates them
        assert!(r.errors().iter().all(|e| *e < 1e-12), "{:?}", r.errors());
    }

    #[test]
    fn constant_phase_walk_is_exact_transport() {
        let j = jet("0", "1", "0.3");
        let r = convergence_study(&j, &short_ladder(Reference::Analytic), &profile(), &StudyOptions::default()).unwrap();
        assert!(r.errors().iter().all(|e| *e < 1e-12), "{:?}", r.errors());
    }

    #[test]
    fn constant_jet_converges_at_first_order() {
        let j = jet("1", "0.5", "0.3");
        let r = convergence_study(&j, &short_ladder(Reference::FineContinuum), &profile(), &StudyOptions::default()).unwrap();
        let e = r.errors();
        assert!(e.windows(2).all(|w| w[1] < w[0]), "{e:?}");
        for o in &r.orders {
            assert!((0.8..=1.2).contains(o), "{:?}", r.orders);
        }
        let last = r.rows.last().unwrap();
        let (ev, od) = (last.error_even.unwrap(), last.error_odd.unwrap());
        assert!(ev / od < 2.0 && od / ev < 2.0);
    }

    #[test]
    fn single_rung_hadamard_flags_insufficient() {
        let l = EpsilonLadder::new(vec![0.02], 1.0, Reference::FineContinuum).unwrap();
        let r = hadamard_nolimit_demo(&l, &profile(), &StudyOptions::default(), 10.0).unwrap();
        assert!(r.insufficient_rungs && !r.passed);
        assert!(r.distances.is_empty());
    }

    #[test]
    fn hadamard_aliases_on_halving_ladders() {
        // B(pi/4, 0, 0)^8 = 1: once the step counts are multiples of 8 the
        // fixed-coin states nearly coincide
        let b = crate::coin::build_coin(PI / 4.0, 0.0, 0.0).matrix();
        let b8 = b.pow(8);
        assert!((b8 - nalgebra::Matrix2::identity()).norm() < 1e-14);
        let halving = EpsilonLadder::new(vec![0.02, 0.01, 0.005, 0.0025], 1.0, Reference::FineContinuum).unwrap();
        let r = hadamard_nolimit_demo(&halving, &profile(), &StudyOptions::default(), 10.0).unwrap();
        assert!(r.distances[2] < 0.05, "{:?}", r.distances);
        let generic = EpsilonLadder::new(vec![1.0 / 50.0, 1.0 / 99.0, 1.0 / 201.0, 1.0 / 403.0], 1.0, Reference::FineContinuum).unwrap();
        let r = hadamard_nolimit_demo(&generic, &profile(), &StudyOptions::default(), 10.0).unwrap();
        assert!(r.passed, "{r:?}");
        let cd = &r.control_distances;
        assert!(cd.windows(2).all(|w| w[1] < 0.7 * w[0]), "{cd:?}");
    }

    #[test]
    fn kg_study_constant_mass() {
        let mut p = profile();
        p.weights = (c(1.0, 0.0), c(0.0, 0.0));
        let j = jet("1", "0", "0");
        let opts = KgStudyOptions { x0: 0.0, period: 16.0, t_final: 0.5, cfl: 0.5, profile: p };
        let r = kg_order_study(&j, &[256, 512, 1024], &opts).unwrap();
        for o in &r.orders {
            assert!(*o > 1.8, "{:?}", r.orders);
        }
    }
}
