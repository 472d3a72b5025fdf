//! The operator family `D(B) = Gamma^mu (d_mu + i sum_j B^j_mu sigma_j)`.
//!
//! `Gamma^- = diag(1, 0)` goes with `d-` and `Gamma^+ = diag(0, 1)` with
//! `d+`, so the minus row of `D(B) Psi` only sees `B_-` and the plus row only
//! sees `B_+`. Writing `K = Gamma^- B_- . sigma + Gamma^+ B_+ . sigma`,
//!
//! ```text
//! (D Psi)-  = d- psi- + i (B3_- psi- + (B1_- - i B2_-) psi+)
//! (D Psi)+  = d+ psi+ + i ((B1_+ + i B2_+) psi- - B3_+ psi+)
//! ```
//!
//! and `D(B) Psi = 0` is the evolution `tau d_t Psi = lambda sigma3 d_x Psi - i K Psi`.
//! Operators act on three-slice windows and return the middle slice.

use nalgebra::Matrix2;
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::coin::WalkJet;
use crate::continuum::{
    window_partials, window_step, ContinuumError, ContinuumGrid, DiracSystem, IntegrateOptions, NullCoords, Partials,
    SiteMatrix,
};
use crate::expr::{EvalError, Expr};
use crate::lattice::{LatticeError, SpinorField};

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Tolerance of the algebraic conservation test.
pub const CONSERVATION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SymmetryError {
    #[error("generator index must be 1, 2 or 3, got {0}")]
    BadGenerator(u8),
    #[error("connection is given at t = {connection}, window centre is t = {window}")]
    WindowMismatch { connection: f64, window: f64 },
    #[error("expected {expected} sites, got {got}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("connection component is not finite at site {0}")]
    NonFinite(usize),
    #[error(transparent)]
    Continuum(#[from] ContinuumError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

/// Pauli matrices `sigma_1..3` and the projectors `Gamma-+ = (1 +- sigma3) / 2`.
pub struct PauliAlgebra;

impl PauliAlgebra {
    pub fn sigma(j: u8) -> Matrix2<Complex64> {
        match j {
            1 => Matrix2::new(ZERO, ONE, ONE, ZERO),
            2 => Matrix2::new(ZERO, -I, I, ZERO),
            3 => Matrix2::new(ONE, ZERO, ZERO, -ONE),
            _ => panic!("no sigma_{j}"),
        }
    }

    pub fn gamma_minus() -> Matrix2<Complex64> {
        (Matrix2::identity() + Self::sigma(3)) * Complex64::new(0.5, 0.0)
    }

    pub fn gamma_plus() -> Matrix2<Complex64> {
        (Matrix2::identity() - Self::sigma(3)) * Complex64::new(0.5, 0.0)
    }
}

fn check_generator(j: u8) -> Result<(), SymmetryError> {
    if (1..=3).contains(&j) {
        Ok(())
    } else {
        Err(SymmetryError::BadGenerator(j))
    }
}

/// `sigma_j (a, b)`.
#[inline]
fn sigma_apply(j: u8, a: Complex64, b: Complex64) -> (Complex64, Complex64) {
    match j {
        1 => (b, a),
        2 => (-I * b, I * a),
        _ => (a, -b),
    }
}

/// Index of the null direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Null {
    Minus = 0,
    Plus = 1,
}

/// The six real fields `B^j_mu` sampled on the grid at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeConnection {
    pub time: f64,
    /// `b[j - 1][mu]`, `mu = 0` for `-`, `1` for `+`.
    pub b: [[Vec<f64>; 2]; 3],
}

impl GaugeConnection {
    pub fn zero(n: usize, time: f64) -> Self {
        GaugeConnection {
            time,
            b: std::array::from_fn(|_| [vec![0.0; n], vec![0.0; n]]),
        }
    }

    pub fn n_sites(&self) -> usize {
        self.b[0][0].len()
    }

    pub fn get(&self, j: u8, mu: Null, m: usize) -> f64 {
        self.b[j as usize - 1][mu as usize][m]
    }

    pub fn field(&self, j: u8, mu: Null) -> &[f64] {
        &self.b[j as usize - 1][mu as usize]
    }

    pub fn field_mut(&mut self, j: u8, mu: Null) -> &mut Vec<f64> {
        &mut self.b[j as usize - 1][mu as usize]
    }

    /// Samples `exprs[j - 1][mu]` at `time` on the grid.
    pub fn from_exprs(exprs: &[[Expr; 2]; 3], grid: &ContinuumGrid, time: f64) -> Result<Self, SymmetryError> {
        let mut c = GaugeConnection::zero(grid.n_sites, time);
        for (j, pair) in exprs.iter().enumerate() {
            for (mu, e) in pair.iter().enumerate() {
                for m in 0..grid.n_sites {
                    c.b[j][mu][m] = e.eval(time, grid.x(m))?;
                }
            }
        }
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), SymmetryError> {
        let n = self.n_sites();
        for comp in self.b.iter().flatten() {
            if comp.len() != n {
                return Err(SymmetryError::SizeMismatch { expected: n, got: comp.len() });
            }
            if let Some(m) = comp.iter().position(|v| !v.is_finite()) {
                return Err(SymmetryError::NonFinite(m));
            }
        }
        Ok(())
    }

    /// Row-wise zeroth-order matrix `K` at site `m`.
    pub fn k_matrix(&self, m: usize) -> SiteMatrix {
        let b = |j: u8, mu: Null| self.get(j, mu, m);
        [
            Complex64::new(b(3, Null::Minus), 0.0),
            Complex64::new(b(1, Null::Minus), -b(2, Null::Minus)),
            Complex64::new(b(1, Null::Plus), b(2, Null::Plus)),
            Complex64::new(-b(3, Null::Plus), 0.0),
        ]
    }
}

/// The connection whose operator is the jet's limit system:
/// `B3 = -xi_bar`, `B2 = kappa theta_bar cos zeta`, `B1 = kappa theta_bar sin zeta` on both sides.
pub fn connection_from_jet(jet: &WalkJet, grid: &ContinuumGrid, time: f64) -> Result<GaugeConnection, SymmetryError> {
    let mut c = GaugeConnection::zero(grid.n_sites, time);
    let kappa = jet.coupling_sign();
    for m in 0..grid.n_sites {
        let (th, xi, z) = jet.fields_at(time, grid.x(m))?;
        for mu in 0..2 {
            c.b[2][mu][m] = -xi;
            c.b[1][mu][m] = kappa * th * z.cos();
            c.b[0][mu][m] = kappa * th * z.sin();
        }
    }
    Ok(c)
}

fn check_window(b: &GaugeConnection, window: &[SpinorField; 3], grid: &ContinuumGrid) -> Result<f64, SymmetryError> {
    let ht = window_step(window)?;
    for f in window {
        if f.n_sites() != grid.n_sites {
            return Err(SymmetryError::SizeMismatch { expected: grid.n_sites, got: f.n_sites() });
        }
    }
    if b.n_sites() != grid.n_sites {
        return Err(SymmetryError::SizeMismatch { expected: grid.n_sites, got: b.n_sites() });
    }
    if (b.time - window[1].time).abs() > 1e-9 * (1.0 + b.time.abs()) {
        return Err(SymmetryError::WindowMismatch { connection: b.time, window: window[1].time });
    }
    Ok(ht)
}

/// `D(B) Psi` at the middle slice of `window`, with second-order central differences.
pub fn apply_db(
    b: &GaugeConnection,
    window: &[SpinorField; 3],
    coords: &NullCoords,
    grid: &ContinuumGrid,
) -> Result<SpinorField, SymmetryError> {
    let ht = check_window(b, window, grid)?;
    let n = grid.n_sites;
    let mut out = SpinorField::zeros(n, window[1].time);
    for m in 0..n {
        let p = window_partials(window, m, ht, grid.dx);
        let [k11, k12, k21, k22] = b.k_matrix(m);
        let (a, c) = (p.v[0], p.v[1]);
        out.minus[m] = coords.d_minus(p.t[0], p.x[0]) + I * (k11 * a + k12 * c);
        out.plus[m] = coords.d_plus(p.t[1], p.x[1]) + I * (k21 * a + k22 * c);
    }
    Ok(out)
}

/// `(d- alpha, d+ alpha)` by central differences with step `h`.
fn null_gradient(alpha: &Expr, coords: &NullCoords, t: f64, x: f64, h: f64) -> Result<(f64, f64), EvalError> {
    let p = Partials::of(alpha, t, x, h)?;
    Ok((p.d_minus(coords), p.d_plus(coords)))
}

/// `B^k_mu + delta_jk d_mu alpha` at the connection's time.
pub fn gauge_transform(
    b: &GaugeConnection,
    j: u8,
    alpha: &Expr,
    coords: &NullCoords,
    grid: &ContinuumGrid,
) -> Result<GaugeConnection, SymmetryError> {
    check_generator(j)?;
    let mut out = b.clone();
    for m in 0..b.n_sites() {
        let (dm, dp) = null_gradient(alpha, coords, b.time, grid.x(m), grid.dx)?;
        out.field_mut(j, Null::Minus)[m] += dm;
        out.field_mut(j, Null::Plus)[m] += dp;
    }
    Ok(out)
}

fn multiply_window(window: &[SpinorField; 3], grid: &ContinuumGrid, f: impl Fn(f64, f64, Complex64, Complex64) -> Result<(Complex64, Complex64), EvalError>) -> Result<[SpinorField; 3], EvalError> {
    let mut out = window.clone();
    for (k, slice) in window.iter().enumerate() {
        for m in 0..slice.n_sites() {
            let (a, b) = f(slice.time, grid.x(m), slice.minus[m], slice.plus[m])?;
            out[k].minus[m] = a;
            out[k].plus[m] = b;
        }
    }
    Ok(out)
}

fn max_diff(a: &SpinorField, b: &SpinorField) -> f64 {
    a.minus
        .iter()
        .zip(&b.minus)
        .chain(a.plus.iter().zip(&b.plus))
        .map(|(u, v)| (u - v).norm())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaugeIdentityReport {
    /// `max |D(B)_{j,alpha} Psi - D(B(j, alpha)) Psi|`.
    pub error: f64,
    /// `max |D(B)_{j,alpha} Psi - D(B) Psi - i sigma_j (Gamma^mu d_mu alpha) Psi|`.
    pub intermediate_error: f64,
}

/// Compares the transformed operator, built from its definition
/// `e^{-i alpha sigma_j} [D(B)(cos alpha Psi) + i sigma_j D(B)(sin alpha Psi)]`,
/// with the operator of the transformed connection.
pub fn gauge_identity_check(
    b: &GaugeConnection,
    j: u8,
    alpha: &Expr,
    window: &[SpinorField; 3],
    coords: &NullCoords,
    grid: &ContinuumGrid,
) -> Result<GaugeIdentityReport, SymmetryError> {
    check_generator(j)?;
    check_window(b, window, grid)?;
    let cos_w = multiply_window(window, grid, |t, x, a, c| {
        let s = alpha.eval(t, x)?.cos();
        Ok((a * s, c * s))
    })?;
    let sin_w = multiply_window(window, grid, |t, x, a, c| {
        let s = alpha.eval(t, x)?.sin();
        Ok((a * s, c * s))
    })?;
    let d_cos = apply_db(b, &cos_w, coords, grid)?;
    let d_sin = apply_db(b, &sin_w, coords, grid)?;
    let t = window[1].time;
    let n = grid.n_sites;
    let mut lhs = SpinorField::zeros(n, t);
    for m in 0..n {
        let (sa, sc) = sigma_apply(j, d_sin.minus[m], d_sin.plus[m]);
        let (ua, uc) = (d_cos.minus[m] + I * sa, d_cos.plus[m] + I * sc);
        let al = alpha.eval(t, grid.x(m))?;
        let (ra, rc) = sigma_apply(j, ua, uc);
        lhs.minus[m] = ua * al.cos() - I * al.sin() * ra;
        lhs.plus[m] = uc * al.cos() - I * al.sin() * rc;
    }
    let transformed = gauge_transform(b, j, alpha, coords, grid)?;
    let rhs = apply_db(&transformed, window, coords, grid)?;

    let base = apply_db(b, window, coords, grid)?;
    let mut intermediate = base.clone();
    for m in 0..n {
        let (dm, dp) = null_gradient(alpha, coords, t, grid.x(m), grid.dx)?;
        let (a, c) = (window[1].minus[m] * dm, window[1].plus[m] * dp);
        let (sa, sc) = sigma_apply(j, a, c);
        intermediate.minus[m] += I * sa;
        intermediate.plus[m] += I * sc;
    }
    Ok(GaugeIdentityReport {
        error: max_diff(&lhs, &rhs),
        intermediate_error: max_diff(&lhs, &intermediate),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConservationReport {
    pub conserving: bool,
    pub max_violation: f64,
}

/// Probability is conserved for every state exactly when `K` is Hermitian,
/// i.e. `B1_- = B1_+` and `B2_- = B2_+` at every site.
pub fn probability_form_check(b: &GaugeConnection) -> ConservationReport {
    let mut worst: f64 = 0.0;
    for j in [1, 2] {
        for (u, v) in b.field(j, Null::Minus).iter().zip(b.field(j, Null::Plus)) {
            worst = worst.max((u - v).abs());
        }
    }
    ConservationReport {
        conserving: worst <= CONSERVATION_TOL,
        max_violation: worst,
    }
}

/// Evolves two probe packets under `D(B) Psi = 0` with `B` frozen and returns
/// the largest change in `dx`-weighted probability.
///
/// The probes have `psi+ = psi-` and `psi+ = i psi-`; a non-Hermitian `K`
/// changes the norm of at least one of them.
pub fn dynamic_drift(
    b: &GaugeConnection,
    coords: &NullCoords,
    grid: &ContinuumGrid,
    t_final: f64,
) -> Result<f64, SymmetryError> {
    b.validate()?;
    let g: Vec<SiteMatrix> = (0..b.n_sites())
        .map(|m| b.k_matrix(m).map(|k| -I * k))
        .collect();
    let sys = DiracSystem::from_matrices(coords.tau, coords.lambda, grid, g)?;
    let centre = grid.x0 + 0.5 * grid.period();
    let width = grid.period() / 12.0;
    let mut worst: f64 = 0.0;
    for second in [ONE, I] {
        let mut f = SpinorField::zeros(grid.n_sites, b.time);
        for m in 0..grid.n_sites {
            let d = (grid.x(m) - centre) / width;
            let v = Complex64::new((-0.5 * d * d).exp(), 0.0);
            f.minus[m] = v;
            f.plus[m] = second * v;
        }
        let p = crate::lattice::weighted_probability(&f, grid.dx);
        f.scale(1.0 / p.sqrt());
        let run = sys.integrate(&f, b.time + t_final, &IntegrateOptions::default())?;
        worst = worst.max(run.max_drift);
    }
    Ok(worst)
}

/// `max |D(B)(sigma_j Psi) - sigma_j D(B) Psi|`.
pub fn commutator_norm(
    b: &GaugeConnection,
    j: u8,
    window: &[SpinorField; 3],
    coords: &NullCoords,
    grid: &ContinuumGrid,
) -> Result<f64, SymmetryError> {
    check_generator(j)?;
    let rotated = multiply_window(window, grid, |_, _, a, c| Ok(sigma_apply(j, a, c)))?;
    let lhs = apply_db(b, &rotated, coords, grid)?;
    let mut rhs = apply_db(b, window, coords, grid)?;
    for m in 0..grid.n_sites {
        let (a, c) = sigma_apply(j, rhs.minus[m], rhs.plus[m]);
        rhs.minus[m] = a;
        rhs.plus[m] = c;
    }
    Ok(max_diff(&lhs, &rhs))
}

/// Result of [`phase_fix`].
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseFix {
    /// Connection with `B3_- = B3_+`.
    pub connection: GaugeConnection,
    /// `d_t phi` at each site, where `Psi = e^{i phi} Psi'`.
    pub phase_rate: Vec<f64>,
}

/// Removes the difference between `B3_-` and `B3_+` by a time-dependent
/// rephasing of `Psi`.
///
/// With `S = B3_- + B3_+` and `A = B3_- - B3_+` the new connection has
/// `B3'_-+ = S / 2` and `D(B) Psi = e^{i phi} D(B')(e^{-i phi} Psi)` for any
/// `phi` whose gradient at the connection's time is `d_t phi = -A / (2 tau)`,
/// `d_x phi = 0`.
pub fn phase_fix(b: &GaugeConnection, coords: &NullCoords) -> PhaseFix {
    let mut c = b.clone();
    let mut rate = Vec::with_capacity(b.n_sites());
    for m in 0..b.n_sites() {
        let (u, v) = (b.get(3, Null::Minus, m), b.get(3, Null::Plus, m));
        let s = 0.5 * (u + v);
        c.field_mut(3, Null::Minus)[m] = s;
        c.field_mut(3, Null::Plus)[m] = s;
        rate.push(-(u - v) / (2.0 * coords.tau));
    }
    PhaseFix { connection: c, phase_rate: rate }
}

/// Applies `e^{i s r_m (t - t_c)}` to every slice of a window.
pub fn rephase_window(window: &[SpinorField; 3], rate: &[f64], t_c: f64, sign: f64) -> [SpinorField; 3] {
    let mut out = window.clone();
    for slice in out.iter_mut() {
        for (m, r) in rate.iter().enumerate() {
            let ph = Complex64::from_polar(1.0, sign * r * (slice.time - t_c));
            slice.minus[m] *= ph;
            slice.plus[m] *= ph;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianReport {
    /// `Psi^dagger D Psi` at each site.
    pub density: Vec<Complex64>,
    /// `max |Psi^dagger D Psi - Psi^dagger (i gamma^mu D_mu - xi_bar) Psi|`.
    pub dirac_form_gap: f64,
    /// `max |Psi^dagger (-i sigma3) D Psi - Psi^dagger (i gamma^mu D_mu - xi_bar) Psi|`.
    pub rotated_gap: f64,
}

impl LagrangianReport {
    pub fn max_density(&self) -> f64 {
        self.density.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Lagrangian density `Psi^dagger D Psi` and its Dirac-like rewriting
/// `Psi^dagger (i gamma^mu D_mu - xi_bar) Psi` with `gamma^mu = -sigma3 Gamma^mu`
/// and `D_mu = d_mu + i (B1_mu sigma1 + B2_mu sigma2)`.
pub fn lagrangian_density(
    window: &[SpinorField; 3],
    b: &GaugeConnection,
    jet: &WalkJet,
    coords: &NullCoords,
    grid: &ContinuumGrid,
) -> Result<LagrangianReport, SymmetryError> {
    let ht = check_window(b, window, grid)?;
    let dpsi = apply_db(b, window, coords, grid)?;
    let t = window[1].time;
    let n = grid.n_sites;
    let mut report = LagrangianReport {
        density: Vec::with_capacity(n),
        dirac_form_gap: 0.0,
        rotated_gap: 0.0,
    };
    for m in 0..n {
        let (a, c) = (window[1].minus[m], window[1].plus[m]);
        let density = a.conj() * dpsi.minus[m] + c.conj() * dpsi.plus[m];

        let p = window_partials(window, m, ht, grid.dx);
        let bm = |j| b.get(j, Null::Minus, m);
        let bp = |j| b.get(j, Null::Plus, m);
        // Gamma^mu D_mu Psi, row by row
        let gd_minus = coords.d_minus(p.t[0], p.x[0]) + I * Complex64::new(bm(1), -bm(2)) * c;
        let gd_plus = coords.d_plus(p.t[1], p.x[1]) + I * Complex64::new(bp(1), bp(2)) * a;
        let xi = jet.xi_bar.eval(t, grid.x(m))?;
        // i gamma^mu D_mu = -i sigma3 Gamma^mu D_mu
        let form_minus = -I * gd_minus - xi * a;
        let form_plus = I * gd_plus - xi * c;
        let dirac_form = a.conj() * form_minus + c.conj() * form_plus;

        let rotated = a.conj() * (-I * dpsi.minus[m]) + c.conj() * (I * dpsi.plus[m]);
        report.dirac_form_gap = report.dirac_form_gap.max((density - dirac_form).norm());
        report.rotated_gap = report.rotated_gap.max((rotated - dirac_form).norm());
        report.density.push(density);
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Minus,
    Plus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariationalOptions {
    /// Number of time levels sampled, spread over one light crossing of the grid.
    pub time_levels: usize,
    pub tol: f64,
}

impl Default for VariationalOptions {
    fn default() -> Self {
        VariationalOptions {
            time_levels: 9,
            tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariationalReport {
    pub side: Side,
    /// `max |d+ theta_bar|` (minus side) or `max |d- theta_bar|` (plus side).
    pub dissipative_violation: f64,
    /// `max |lambda^2 box zeta - (d- + d+) xi_bar|`.
    pub constraint_violation: f64,
    /// `max |d- A+ - d+ A-|`, from nested differences of the potentials.
    pub curvature: f64,
    /// Potentials `(A-, A+)` and mass `|theta_bar|` at the first time level.
    pub potential_minus: Vec<f64>,
    pub potential_plus: Vec<f64>,
    pub mass: Vec<f64>,
    pub admits_variational_principle: bool,
    pub tol: f64,
}

fn potentials(jet: &WalkJet, side: Side, coords: &NullCoords, t: f64, x: f64, h: f64) -> Result<(f64, f64), EvalError> {
    let xi = jet.xi_bar.eval(t, x)?;
    let z = Partials::of(&jet.zeta, t, x, h)?;
    Ok(match side {
        Side::Minus => (xi, z.d_plus(coords) - xi),
        Side::Plus => (-(z.d_minus(coords) - xi), -xi),
    })
}

/// Conditions under which one component's second-order equation follows
/// from a Klein-Gordon Lagrangian with an abelian potential.
///
/// Both sides need `lambda^2 box zeta = (d- + d+) xi_bar`; the potentials'
/// curvature equals the difference of the two sides identically, so it
/// vanishes exactly when the constraint holds.
pub fn variational_check(
    jet: &WalkJet,
    grid: &ContinuumGrid,
    side: Side,
    opts: &VariationalOptions,
) -> Result<VariationalReport, SymmetryError> {
    let coords = NullCoords::of_jet(jet);
    let h = grid.dx;
    let levels = opts.time_levels.max(1);
    let span = grid.period() / coords.speed();
    let mut report = VariationalReport {
        side,
        dissipative_violation: 0.0,
        constraint_violation: 0.0,
        curvature: 0.0,
        potential_minus: Vec::new(),
        potential_plus: Vec::new(),
        mass: Vec::new(),
        admits_variational_principle: false,
        tol: opts.tol,
    };
    for k in 0..levels {
        let t = if levels == 1 { grid.t0 } else { grid.t0 + span * k as f64 / (levels - 1) as f64 };
        for m in 0..grid.n_sites {
            let x = grid.x(m);
            let th = Partials::of(&jet.theta_bar, t, x, h)?;
            let xi = Partials::of(&jet.xi_bar, t, x, h)?;
            let z = Partials::of(&jet.zeta, t, x, h)?;
            let diss = match side {
                Side::Minus => th.d_plus(&coords),
                Side::Plus => th.d_minus(&coords),
            };
            report.dissipative_violation = report.dissipative_violation.max(diss.abs());
            let constraint = z.lambda2_box(&coords) - (xi.d_minus(&coords) + xi.d_plus(&coords));
            report.constraint_violation = report.constraint_violation.max(constraint.abs());

            // nested differences: d- A+ - d+ A-
            let (_, ap_t1) = potentials(jet, side, &coords, t + h, x, h)?;
            let (_, ap_t0) = potentials(jet, side, &coords, t - h, x, h)?;
            let (_, ap_x1) = potentials(jet, side, &coords, t, x + h, h)?;
            let (_, ap_x0) = potentials(jet, side, &coords, t, x - h, h)?;
            let (am_t1, _) = potentials(jet, side, &coords, t + h, x, h)?;
            let (am_t0, _) = potentials(jet, side, &coords, t - h, x, h)?;
            let (am_x1, _) = potentials(jet, side, &coords, t, x + h, h)?;
            let (am_x0, _) = potentials(jet, side, &coords, t, x - h, h)?;
            let d_minus_ap = coords.d_minus((ap_t1 - ap_t0) / (2.0 * h), (ap_x1 - ap_x0) / (2.0 * h));
            let d_plus_am = coords.d_plus((am_t1 - am_t0) / (2.0 * h), (am_x1 - am_x0) / (2.0 * h));
            report.curvature = report.curvature.max((d_minus_ap - d_plus_am).abs());

            if k == 0 {
                let (am, ap) = potentials(jet, side, &coords, t, x, h)?;
                report.potential_minus.push(am);
                report.potential_plus.push(ap);
                report.mass.push(th.v.abs());
            }
        }
    }
    report.admits_variational_principle =
        report.dissipative_violation <= opts.tol && report.constraint_violation <= opts.tol;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridInfo {
    pub n: usize,
    pub h: f64,
}

/// One line of the NDJSON check log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRecord {
    pub check: String,
    pub passed: bool,
    pub max_violation: f64,
    pub grid: GridInfo,
    pub details: serde_json::Value,
}

impl CheckRecord {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("check records always serialize")
    }
}
