//! The continuum limit of a linear jet and its Klein-Gordon consequences.
//!
//! With `d_t`, `d_x` ordinary partials, `c = lambda / tau` and
//! `kappa = (-1)^(p+1)` the limit system reads
//!
//! ```text
//! tau d_t psi- =  lambda d_x psi- + i xi psi- - kappa theta e^{ i zeta} psi+
//! tau d_t psi+ = -lambda d_x psi+ - i xi psi+ + kappa theta e^{-i zeta} psi-
//! ```
//!
//! It is integrated by the method of lines: fourth-order central differences
//! in space and classical RK4 in time on a periodic grid.

use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use num_complex::Complex64;
use thiserror::Error;

use crate::coin::WalkJet;
use crate::expr::{EvalError, Expr};
use crate::lattice::{check_positive, weighted_probability, LatticeError, SpinorField};

/// Threshold below which `|theta_bar|` is treated as vanishing.
pub const THETA_MIN: f64 = 1e-8;

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ContinuumError {
    #[error("CFL violated: speed * dt = {lhs} exceeds dx = {dx}")]
    Cfl { lhs: f64, dx: f64 },
    #[error("non-finite value in psi at t = {t}, site {site}")]
    NonFinite { t: f64, site: usize },
    #[error("snapshot window is not uniformly spaced: steps {0} and {1}")]
    NonUniformWindow(f64, f64),
    #[error("field has {got} sites, grid has {expected}")]
    SizeMismatch { got: usize, expected: usize },
    #[error("{0}")]
    Unsupported(String),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Light-cone coordinates `u-+ = (t/tau -+ x/lambda) / 2` with
/// `d-+ = tau d_t -+ lambda d_x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NullCoords {
    pub tau: f64,
    pub lambda: f64,
}

impl NullCoords {
    pub fn new(tau: f64, lambda: f64) -> Result<Self, LatticeError> {
        check_positive("tau", tau)?;
        check_positive("lambda", lambda)?;
        Ok(NullCoords { tau, lambda })
    }

    pub fn of_jet(jet: &WalkJet) -> Self {
        NullCoords {
            tau: jet.tau,
            lambda: jet.lambda,
        }
    }

    pub fn u_minus(&self, t: f64, x: f64) -> f64 {
        0.5 * (t / self.tau - x / self.lambda)
    }

    pub fn u_plus(&self, t: f64, x: f64) -> f64 {
        0.5 * (t / self.tau + x / self.lambda)
    }

    pub fn speed(&self) -> f64 {
        self.lambda / self.tau
    }

    /// `d-` from the partials `(f_t, f_x)`.
    pub fn d_minus<T>(&self, ft: T, fx: T) -> T
    where
        T: std::ops::Mul<f64, Output = T> + std::ops::Sub<Output = T>,
    {
        ft * self.tau - fx * self.lambda
    }

    pub fn d_plus<T>(&self, ft: T, fx: T) -> T
    where
        T: std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
    {
        ft * self.tau + fx * self.lambda
    }

    /// `lambda^2 box f = tau^2 f_tt - lambda^2 f_xx`.
    pub fn lambda2_box<T>(&self, ftt: T, fxx: T) -> T
    where
        T: std::ops::Mul<f64, Output = T> + std::ops::Sub<Output = T>,
    {
        ftt * (self.tau * self.tau) - fxx * (self.lambda * self.lambda)
    }
}

/// Central-difference partials of a scalar field at one point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Partials {
    pub v: f64,
    pub t: f64,
    pub x: f64,
    pub tt: f64,
    pub xx: f64,
}

impl Partials {
    /// Second-order central differences of `e` with step `h` in both directions.
    pub fn of(e: &Expr, t: f64, x: f64, h: f64) -> Result<Self, EvalError> {
        if e.is_constant() {
            return Ok(Partials {
                v: e.eval(t, x)?,
                ..Default::default()
            });
        }
        let v = e.eval(t, x)?;
        let (tp, tm) = (e.eval(t + h, x)?, e.eval(t - h, x)?);
        let (xp, xm) = (e.eval(t, x + h)?, e.eval(t, x - h)?);
        Ok(Partials {
            v,
            t: (tp - tm) / (2.0 * h),
            x: (xp - xm) / (2.0 * h),
            tt: (tp - 2.0 * v + tm) / (h * h),
            xx: (xp - 2.0 * v + xm) / (h * h),
        })
    }

    pub fn d_minus(&self, nc: &NullCoords) -> f64 {
        nc.d_minus(self.t, self.x)
    }

    pub fn d_plus(&self, nc: &NullCoords) -> f64 {
        nc.d_plus(self.t, self.x)
    }

    pub fn lambda2_box(&self, nc: &NullCoords) -> f64 {
        nc.lambda2_box(self.tt, self.xx)
    }
}

/// Periodic method-of-lines grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuumGrid {
    pub n_sites: usize,
    pub dx: f64,
    pub dt: f64,
    pub t0: f64,
    pub x0: f64,
}

impl ContinuumGrid {
    pub fn new(n_sites: usize, dx: f64, dt: f64, t0: f64, x0: f64) -> Result<Self, LatticeError> {
        if n_sites < 5 {
            return Err(LatticeError::TooFewSites(n_sites));
        }
        check_positive("dx", dx)?;
        check_positive("dt", dt)?;
        Ok(ContinuumGrid {
            n_sites,
            dx,
            dt,
            t0,
            x0,
        })
    }

    /// Time step `cfl * dx / speed`.
    pub fn with_cfl(n_sites: usize, period: f64, t0: f64, x0: f64, speed: f64, cfl: f64) -> Result<Self, LatticeError> {
        check_positive("period", period)?;
        check_positive("cfl", cfl)?;
        check_positive("speed", speed)?;
        let dx = period / n_sites as f64;
        ContinuumGrid::new(n_sites, dx, cfl * dx / speed, t0, x0)
    }

    pub fn x(&self, m: usize) -> f64 {
        self.x0 + m as f64 * self.dx
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.n_sites).map(|m| self.x(m)).collect()
    }

    pub fn period(&self) -> f64 {
        self.n_sites as f64 * self.dx
    }

    pub fn check_cfl(&self, speed: f64) -> Result<(), ContinuumError> {
        let lhs = speed * self.dt;
        if lhs > self.dx * (1.0 + 1e-12) {
            return Err(ContinuumError::Cfl { lhs, dx: self.dx });
        }
        Ok(())
    }
}

/// Per-site 2x2 matrix `G` of the zeroth-order part, `tau d_t psi = lambda sigma3 d_x psi + G psi`.
pub type SiteMatrix = [Complex64; 4];

enum Coefficients<'a> {
    Static(Vec<SiteMatrix>),
    Jet(&'a WalkJet),
}

/// A linear first-order system `tau d_t psi = lambda sigma3 d_x psi + G(t, x) psi`.
pub struct DiracSystem<'a> {
    pub tau: f64,
    pub lambda: f64,
    grid: ContinuumGrid,
    coefficients: Coefficients<'a>,
}

/// Zeroth-order matrix of the limit system at one point.
pub fn jet_matrix(jet: &WalkJet, t: f64, x: f64) -> Result<SiteMatrix, EvalError> {
    let (th, xi, z) = jet.fields_at(t, x)?;
    let k = jet.coupling_sign() * th;
    Ok([
        I * xi,
        -Complex64::from_polar(k, z),
        Complex64::from_polar(k, -z),
        -I * xi,
    ])
}

impl<'a> DiracSystem<'a> {
    pub fn from_jet(jet: &'a WalkJet, grid: &ContinuumGrid) -> Result<Self, ContinuumError> {
        let coefficients = if jet.depends_on_t() {
            // evaluate once to surface domain errors early
            jet_matrix(jet, grid.t0, grid.x0)?;
            Coefficients::Jet(jet)
        } else {
            Coefficients::Static(
                grid.positions()
                    .iter()
                    .map(|&x| jet_matrix(jet, grid.t0, x))
                    .collect::<Result<_, _>>()?,
            )
        };
        Ok(DiracSystem {
            tau: jet.tau,
            lambda: jet.lambda,
            grid: grid.clone(),
            coefficients,
        })
    }

    /// A system with time-independent zeroth-order matrices, one per site.
    pub fn from_matrices(tau: f64, lambda: f64, grid: &ContinuumGrid, g: Vec<SiteMatrix>) -> Result<Self, ContinuumError> {
        if g.len() != grid.n_sites {
            return Err(ContinuumError::SizeMismatch {
                got: g.len(),
                expected: grid.n_sites,
            });
        }
        Ok(DiracSystem {
            tau,
            lambda,
            grid: grid.clone(),
            coefficients: Coefficients::Static(g),
        })
    }

    pub fn grid(&self) -> &ContinuumGrid {
        &self.grid
    }

    fn fill_matrices(&self, t: f64, buf: &mut Vec<SiteMatrix>) -> Result<(), EvalError> {
        if let Coefficients::Jet(jet) = self.coefficients {
            buf.clear();
            for m in 0..self.grid.n_sites {
                buf.push(jet_matrix(jet, t, self.grid.x(m))?);
            }
        }
        Ok(())
    }

    fn rhs_with(&self, f: &SpinorField, mats: &[SiteMatrix], out: &mut SpinorField) {
        let n = self.grid.n_sites;
        let c = self.lambda / (12.0 * self.grid.dx);
        let inv_tau = 1.0 / self.tau;
        out.minus.resize(n, ZERO);
        out.plus.resize(n, ZERO);
        let g = match &self.coefficients {
            Coefficients::Static(v) => v.as_slice(),
            Coefficients::Jet(_) => mats,
        };
        for m in 0..n {
            let mp1 = (m + 1) % n;
            let mp2 = (m + 2) % n;
            let mm1 = (m + n - 1) % n;
            let mm2 = (m + n - 2) % n;
            let dm = (f.minus[mm2] - f.minus[mp2] + (f.minus[mp1] - f.minus[mm1]) * 8.0) * c;
            let dp = (f.plus[mm2] - f.plus[mp2] + (f.plus[mp1] - f.plus[mm1]) * 8.0) * c;
            let [g11, g12, g21, g22] = g[m];
            let (a, b) = (f.minus[m], f.plus[m]);
            out.minus[m] = (dm + g11 * a + g12 * b) * inv_tau;
            out.plus[m] = (-dp + g21 * a + g22 * b) * inv_tau;
        }
        out.time = f.time;
    }

    /// `d_t psi` at time `t`.
    pub fn rhs(&self, f: &SpinorField, t: f64) -> Result<SpinorField, ContinuumError> {
        self.check_size(f)?;
        let mut mats = Vec::new();
        self.fill_matrices(t, &mut mats)?;
        let mut out = SpinorField::zeros(f.n_sites(), t);
        self.rhs_with(f, &mats, &mut out);
        out.time = t;
        Ok(out)
    }

    fn check_size(&self, f: &SpinorField) -> Result<(), ContinuumError> {
        if f.n_sites() != self.grid.n_sites {
            return Err(ContinuumError::SizeMismatch {
                got: f.n_sites(),
                expected: self.grid.n_sites,
            });
        }
        Ok(())
    }

    /// Integrates from `init.time` to `t_final` (which may lie in the past)
    /// with the largest uniform step not exceeding the grid's `dt`.
    pub fn integrate(&self, init: &SpinorField, t_final: f64, opts: &IntegrateOptions) -> Result<DiracRun, ContinuumError> {
        self.check_size(init)?;
        self.grid.check_cfl(self.lambda / self.tau)?;
        let span = t_final - init.time;
        let steps = if span == 0.0 {
            0
        } else {
            (span.abs() / self.grid.dt - 1e-9).ceil().max(1.0) as usize
        };
        let h = if steps == 0 { 0.0 } else { span / steps as f64 };
        let p0 = weighted_probability(init, self.grid.dx);
        let mut run = DiracRun {
            steps,
            dt: h,
            times: vec![init.time],
            snapshots: vec![init.clone()],
            drift: vec![0.0],
            max_drift: 0.0,
            tail: Vec::new(),
        };
        let n = self.grid.n_sites;
        let mut cur = init.clone();
        let mut k = [
            SpinorField::zeros(n, 0.0),
            SpinorField::zeros(n, 0.0),
            SpinorField::zeros(n, 0.0),
            SpinorField::zeros(n, 0.0),
        ];
        let mut stage = SpinorField::zeros(n, 0.0);
        let mut mats = [Vec::new(), Vec::new(), Vec::new()];
        let keep = opts.keep_tail;
        if keep > 0 && steps < keep {
            run.tail.push(cur.clone());
        }
        for s in 0..steps {
            let t = init.time + s as f64 * h;
            self.fill_matrices(t, &mut mats[0])?;
            self.fill_matrices(t + 0.5 * h, &mut mats[1])?;
            self.fill_matrices(t + h, &mut mats[2])?;
            self.rhs_with(&cur, &mats[0], &mut k[0]);
            axpy_into(&cur, &k[0], 0.5 * h, &mut stage);
            self.rhs_with(&stage, &mats[1], &mut k[1]);
            axpy_into(&cur, &k[1], 0.5 * h, &mut stage);
            self.rhs_with(&stage, &mats[1], &mut k[2]);
            axpy_into(&cur, &k[2], h, &mut stage);
            self.rhs_with(&stage, &mats[2], &mut k[3]);
            for m in 0..n {
                cur.minus[m] += (k[0].minus[m] + (k[1].minus[m] + k[2].minus[m]) * 2.0 + k[3].minus[m]) * (h / 6.0);
                cur.plus[m] += (k[0].plus[m] + (k[1].plus[m] + k[2].plus[m]) * 2.0 + k[3].plus[m]) * (h / 6.0);
            }
            let done = s + 1;
            cur.time = if done == steps { t_final } else { init.time + done as f64 * h };
            if let Err(LatticeError::NonFinite(site)) = cur.check_finite() {
                return Err(ContinuumError::NonFinite { t: cur.time, site });
            }
            let drift = (weighted_probability(&cur, self.grid.dx) - p0).abs();
            run.max_drift = run.max_drift.max(drift);
            if done == steps || (opts.snapshot_every > 0 && done % opts.snapshot_every == 0) {
                run.times.push(cur.time);
                run.snapshots.push(cur.clone());
                run.drift.push(drift);
            }
            if keep > 0 && done + keep > steps {
                run.tail.push(cur.clone());
            }
        }
        Ok(run)
    }
}

fn axpy_into(x: &SpinorField, k: &SpinorField, a: f64, out: &mut SpinorField) {
    out.minus.clear();
    out.plus.clear();
    out.minus.extend(x.minus.iter().zip(&k.minus).map(|(u, v)| u + v * a));
    out.plus.extend(x.plus.iter().zip(&k.plus).map(|(u, v)| u + v * a));
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IntegrateOptions {
    /// Record every this many steps (0: only the first and last state).
    pub snapshot_every: usize,
    /// Keep this many trailing consecutive states in [`DiracRun::tail`].
    pub keep_tail: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiracRun {
    pub steps: usize,
    /// Step actually used (negative for backward runs).
    pub dt: f64,
    pub times: Vec<f64>,
    pub snapshots: Vec<SpinorField>,
    /// `|P(t) - P(t0)|` with `P = dx * sum |psi|^2`, at each snapshot.
    pub drift: Vec<f64>,
    pub max_drift: f64,
    pub tail: Vec<SpinorField>,
}

impl DiracRun {
    pub fn last(&self) -> &SpinorField {
        self.snapshots.last().expect("a run always holds its initial state")
    }
}

/// `d_t psi` for the jet's limit system.
pub fn dirac_rhs(f: &SpinorField, jet: &WalkJet, t: f64, grid: &ContinuumGrid) -> Result<SpinorField, ContinuumError> {
    DiracSystem::from_jet(jet, grid)?.rhs(f, t)
}

/// Integrates the jet's limit system from `init.time` to `t_final` with RK4.
pub fn integrate_dirac(
    init: &SpinorField,
    jet: &WalkJet,
    grid: &ContinuumGrid,
    t_final: f64,
    opts: &IntegrateOptions,
) -> Result<DiracRun, ContinuumError> {
    DiracSystem::from_jet(jet, grid)?.integrate(init, t_final, opts)
}

fn wrap(x: f64, x0: f64, period: f64) -> f64 {
    x0 + (x - x0).rem_euclid(period)
}

fn integrate_phase(rule: &GaussLegendre, xi: &Expr, t0: f64, t: f64, path: impl Fn(f64) -> f64) -> Result<f64, EvalError> {
    if t == t0 {
        return Ok(0.0);
    }
    let panels = ((t - t0).abs() / 0.25).ceil().max(1.0) as usize;
    let w = (t - t0) / panels as f64;
    let mut err = None;
    let mut total = 0.0;
    for p in 0..panels {
        let a = t0 + p as f64 * w;
        total += rule.integrate(a, a + w, |s| match xi.eval(s, path(s)) {
            Ok(v) => v,
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        });
    }
    match err {
        Some(e) => Err(e),
        None => Ok(total),
    }
}

/// Closed-form solution of the decoupled (`theta_bar = 0`) system at time
/// `t` and positions `xs`, given the state at `t0` as a function of position.
///
/// Each component is transported along its characteristic and picks up the
/// phase `(+-i / tau) * integral of xi_bar`; the phase integral is evaluated by
/// composite Gauss-Legendre quadrature. Positions wrap into `[x0, x0 + period)`.
pub fn transport_solution<F>(
    jet: &WalkJet,
    init: F,
    t0: f64,
    t: f64,
    xs: &[f64],
    x0: f64,
    period: f64,
) -> Result<SpinorField, ContinuumError>
where
    F: Fn(f64) -> (Complex64, Complex64),
{
    match jet.theta_bar.constant_value() {
        Some(Ok(v)) if v == 0.0 => {}
        _ => {
            return Err(ContinuumError::Unsupported(
                "transport solution requires theta_bar = 0".into(),
            ))
        }
    }
    let rule = GaussLegendre::new(NonZeroUsize::new(20).expect("nonzero"));
    let c = jet.speed();
    let mut out = SpinorField::zeros(xs.len(), t);
    for (m, &x) in xs.iter().enumerate() {
        let pm = integrate_phase(&rule, &jet.xi_bar, t0, t, |s| wrap(x + c * (t - s), x0, period))?;
        let pp = integrate_phase(&rule, &jet.xi_bar, t0, t, |s| wrap(x - c * (t - s), x0, period))?;
        let a = init(wrap(x + c * (t - t0), x0, period)).0;
        let b = init(wrap(x - c * (t - t0), x0, period)).1;
        out.minus[m] = a * Complex64::from_polar(1.0, pm / jet.tau);
        out.plus[m] = b * Complex64::from_polar(1.0, -pp / jet.tau);
    }
    Ok(out)
}

/// An exact plane-wave solution `(a, b) e^{i(k x - omega t)}` for a jet with
/// constant fields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneWave {
    pub k: f64,
    pub omega: f64,
    pub a: Complex64,
    pub b: Complex64,
}

impl PlaneWave {
    /// Positive-frequency mode, `tau^2 omega^2 = (lambda k + xi_bar)^2 + theta_bar^2`.
    pub fn of_jet(jet: &WalkJet, k: f64) -> Result<Self, ContinuumError> {
        let value = |e: &Expr| match e.constant_value() {
            Some(r) => Ok(r?),
            None => Err(ContinuumError::Unsupported(
                "plane waves need constant jet fields".into(),
            )),
        };
        let th = value(&jet.theta_bar)?;
        let xi = value(&jet.xi_bar)?;
        let z = value(&jet.zeta)?;
        let q = jet.lambda * k + xi;
        let big = (q * q + th * th).sqrt();
        let omega = big / jet.tau;
        let (a, b) = if th.abs() > THETA_MIN {
            let coupling = Complex64::from_polar(jet.coupling_sign() * th, z);
            (Complex64::new(1.0, 0.0), I * (q + big) / coupling)
        } else if q >= 0.0 {
            (ZERO, Complex64::new(1.0, 0.0))
        } else {
            (Complex64::new(1.0, 0.0), ZERO)
        };
        let norm = (a.norm_sqr() + b.norm_sqr()).sqrt();
        Ok(PlaneWave {
            k,
            omega,
            a: a / norm,
            b: b / norm,
        })
    }

    pub fn at(&self, t: f64, x: f64) -> (Complex64, Complex64) {
        let ph = Complex64::from_polar(1.0, self.k * x - self.omega * t);
        (self.a * ph, self.b * ph)
    }

    pub fn sample(&self, grid: &ContinuumGrid, t: f64) -> SpinorField {
        let (minus, plus) = grid.positions().iter().map(|&x| self.at(t, x)).unzip();
        SpinorField { minus, plus, time: t }
    }
}

/// Frequency estimate from the overlap phase between `initial` and `later`,
/// unwrapped to the branch nearest `omega_guess`.
pub fn measured_frequency(initial: &SpinorField, later: &SpinorField, omega_guess: f64) -> f64 {
    let span = later.time - initial.time;
    let z: Complex64 = initial
        .minus
        .iter()
        .zip(&later.minus)
        .chain(initial.plus.iter().zip(&later.plus))
        .map(|(a, b)| a.conj() * b)
        .sum();
    let base = -z.arg();
    let turns = ((omega_guess * span - base) / std::f64::consts::TAU).round();
    (base + turns * std::f64::consts::TAU) / span
}

/// Klein-Gordon residuals at the middle slice of a three-slice window.
#[derive(Debug, Clone, PartialEq)]
pub struct KgResidual {
    pub time: f64,
    pub minus: Vec<Complex64>,
    pub plus: Vec<Complex64>,
    /// Sites where `|theta_bar| < THETA_MIN`.
    pub masked: Vec<bool>,
}

impl KgResidual {
    pub fn max_unmasked(&self) -> f64 {
        (0..self.minus.len())
            .filter(|&m| !self.masked[m])
            .map(|m| self.minus[m].norm().max(self.plus[m].norm()))
            .fold(0.0, f64::max)
    }

    pub fn write_csv<W: std::io::Write>(&self, out: &mut W, grid: &ContinuumGrid) -> std::io::Result<()> {
        writeln!(out, "t,x,abs_residual_minus,abs_residual_plus,masked")?;
        for m in 0..self.minus.len() {
            writeln!(
                out,
                "{:e},{:e},{:e},{:e},{}",
                self.time,
                grid.x(m),
                self.minus[m].norm(),
                self.plus[m].norm(),
                u8::from(self.masked[m])
            )?;
        }
        Ok(())
    }
}

/// Checks that three snapshots are equally spaced and returns the spacing.
pub fn window_step(window: &[SpinorField; 3]) -> Result<f64, ContinuumError> {
    let h1 = window[1].time - window[0].time;
    let h2 = window[2].time - window[1].time;
    if h1 == 0.0 || (h1 - h2).abs() > 1e-9 * h1.abs().max(h2.abs()) {
        return Err(ContinuumError::NonUniformWindow(h1, h2));
    }
    Ok(0.5 * (h1 + h2))
}

/// Second-order partials `(f_t, f_tt, f_x, f_xx)` of both components at the middle slice.
pub(crate) struct WindowPartials {
    pub t: [Complex64; 2],
    pub tt: [Complex64; 2],
    pub x: [Complex64; 2],
    pub xx: [Complex64; 2],
    pub v: [Complex64; 2],
}

pub(crate) fn window_partials(w: &[SpinorField; 3], m: usize, ht: f64, dx: f64) -> WindowPartials {
    let n = w[1].n_sites();
    let (mp, mm) = ((m + 1) % n, (m + n - 1) % n);
    let comp = |f: &SpinorField, c: usize, i: usize| if c == 0 { f.minus[i] } else { f.plus[i] };
    let mut p = WindowPartials {
        t: [ZERO; 2],
        tt: [ZERO; 2],
        x: [ZERO; 2],
        xx: [ZERO; 2],
        v: [ZERO; 2],
    };
    for c in 0..2 {
        let (a, b, d) = (comp(&w[0], c, m), comp(&w[1], c, m), comp(&w[2], c, m));
        let (l, r) = (comp(&w[1], c, mm), comp(&w[1], c, mp));
        p.v[c] = b;
        p.t[c] = (d - a) / (2.0 * ht);
        p.tt[c] = (d - b * 2.0 + a) / (ht * ht);
        p.x[c] = (r - l) / (2.0 * dx);
        p.xx[c] = (r - b * 2.0 + l) / (dx * dx);
    }
    p
}

/// Residuals of the two second-order equations implied by the limit system.
///
/// With `L = d+ theta / theta + i d+ zeta` and `M = d- theta / theta - i d- zeta`:
///
/// ```text
/// lambda^2 box psi- = (L - i xi) d- psi- + i xi d+ psi-
///                     - (theta^2 + xi^2 + i xi L - i d+ xi) psi-
/// lambda^2 box psi+ = -i xi d- psi+ + (M + i xi) d+ psi+
///                     - (theta^2 + xi^2 + i xi (-d- theta / theta + i d- zeta) + i d- xi) psi+
/// ```
///
/// All derivatives are second-order central differences; jet fields are
/// differentiated with step `grid.dx`.
pub fn kg_residual(window: &[SpinorField; 3], jet: &WalkJet, grid: &ContinuumGrid) -> Result<KgResidual, ContinuumError> {
    let ht = window_step(window)?;
    let n = grid.n_sites;
    for f in window {
        if f.n_sites() != n {
            return Err(ContinuumError::SizeMismatch {
                got: f.n_sites(),
                expected: n,
            });
        }
    }
    let nc = NullCoords::of_jet(jet);
    let t = window[1].time;
    let h = grid.dx;
    let mut res = KgResidual {
        time: t,
        minus: vec![ZERO; n],
        plus: vec![ZERO; n],
        masked: vec![false; n],
    };
    for m in 0..n {
        let x = grid.x(m);
        let th = Partials::of(&jet.theta_bar, t, x, h)?;
        if th.v.abs() < THETA_MIN {
            res.masked[m] = true;
            continue;
        }
        let xi = Partials::of(&jet.xi_bar, t, x, h)?;
        let z = Partials::of(&jet.zeta, t, x, h)?;
        let p = window_partials(window, m, ht, grid.dx);
        let xiv = xi.v;
        let mass = th.v * th.v + xiv * xiv;

        let dm = nc.d_minus(p.t[0], p.x[0]);
        let dp = nc.d_plus(p.t[0], p.x[0]);
        let boxed = nc.lambda2_box(p.tt[0], p.xx[0]);
        let l = th.d_plus(&nc) / th.v + I * z.d_plus(&nc);
        let rhs = (l - I * xiv) * dm + I * xiv * dp
            - (mass + I * xiv * l - I * xi.d_plus(&nc)) * p.v[0];
        res.minus[m] = boxed - rhs;

        let dm = nc.d_minus(p.t[1], p.x[1]);
        let dp = nc.d_plus(p.t[1], p.x[1]);
        let boxed = nc.lambda2_box(p.tt[1], p.xx[1]);
        let mm = th.d_minus(&nc) / th.v - I * z.d_minus(&nc);
        let inner = -th.d_minus(&nc) / th.v + I * z.d_minus(&nc);
        let rhs = -I * xiv * dm + (mm + I * xiv) * dp
            - (mass + I * xiv * inner + I * xi.d_minus(&nc)) * p.v[1];
        res.plus[m] = boxed - rhs;
    }
    Ok(res)
}
