//! SU(2) coins and the epsilon-scaled walk families built from them.

use std::f64::consts::PI;

use nalgebra::Matrix2;
use num_complex::Complex64;
use thiserror::Error;

use crate::expr::{EvalError, Expr, Var};
use crate::lattice::{check_positive, GridSpec, LatticeError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoinError {
    #[error("parity p must be 0 or 1, got {0}")]
    BadParity(u8),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// `[[b11, b12], [b21, b22]]` acting on `(psi_minus, psi_plus)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SU2Coin {
    pub b11: Complex64,
    pub b12: Complex64,
    pub b21: Complex64,
    pub b22: Complex64,
}

impl SU2Coin {
    pub const IDENTITY: SU2Coin = SU2Coin {
        b11: Complex64::new(1.0, 0.0),
        b12: Complex64::new(0.0, 0.0),
        b21: Complex64::new(0.0, 0.0),
        b22: Complex64::new(1.0, 0.0),
    };

    pub fn matrix(&self) -> Matrix2<Complex64> {
        Matrix2::new(self.b11, self.b12, self.b21, self.b22)
    }

    #[inline]
    pub fn apply(&self, a: Complex64, b: Complex64) -> (Complex64, Complex64) {
        (self.b11 * a + self.b12 * b, self.b21 * a + self.b22 * b)
    }

    /// Largest entry of `|B^dagger B - I|`.
    pub fn unitarity_defect(&self) -> f64 {
        let m = self.matrix();
        let d = m.adjoint() * m - Matrix2::identity();
        d.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn det(&self) -> Complex64 {
        self.matrix().determinant()
    }

    pub fn det_defect(&self) -> f64 {
        (self.det() - Complex64::new(1.0, 0.0)).norm()
    }
}

/// The Euler-angle coin
/// `[[e^{i xi} cos theta, e^{i zeta} sin theta], [-e^{-i zeta} sin theta, e^{-i xi} cos theta]]`.
pub fn build_coin(theta: f64, xi: f64, zeta: f64) -> SU2Coin {
    let (s, c) = theta.sin_cos();
    SU2Coin {
        b11: Complex64::from_polar(c, xi),
        b12: Complex64::from_polar(s, zeta),
        b21: -Complex64::from_polar(s, -zeta),
        b22: Complex64::from_polar(c, -xi),
    }
}

/// First-order data of an epsilon-indexed family of walks.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkJet {
    pub p: u8,
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
    pub tau: f64,
    pub lambda: f64,
    pub theta_bar: Expr,
    pub xi_bar: Expr,
    pub zeta: Expr,
}

impl WalkJet {
    /// A jet with `alpha = beta = delta = 1`.
    pub fn linear(p: u8, tau: f64, lambda: f64, theta_bar: Expr, xi_bar: Expr, zeta: Expr) -> Result<Self, CoinError> {
        WalkJet {
            p,
            alpha: 1.0,
            beta: 1.0,
            delta: 1.0,
            tau,
            lambda,
            theta_bar,
            xi_bar,
            zeta,
        }
        .validated()
    }

    /// Parses the three angle fields and builds a linear jet.
    pub fn parse_linear(p: u8, tau: f64, lambda: f64, theta_bar: &str, xi_bar: &str, zeta: &str) -> Result<Self, crate::Error> {
        Ok(WalkJet::linear(
            p,
            tau,
            lambda,
            theta_bar.parse()?,
            xi_bar.parse()?,
            zeta.parse()?,
        )?)
    }

    pub fn validated(self) -> Result<Self, CoinError> {
        if self.p > 1 {
            return Err(CoinError::BadParity(self.p));
        }
        check_positive("alpha", self.alpha)?;
        check_positive("beta", self.beta)?;
        check_positive("delta", self.delta)?;
        check_positive("tau", self.tau)?;
        check_positive("lambda", self.lambda)?;
        Ok(self)
    }

    /// `(-1)^(p+1)`, the sign of the coupling between the two components.
    pub fn coupling_sign(&self) -> f64 {
        if self.p == 1 {
            1.0
        } else {
            -1.0
        }
    }

    /// Signal speed `lambda / tau`.
    pub fn speed(&self) -> f64 {
        self.lambda / self.tau
    }

    pub fn is_linear_scaling(&self) -> bool {
        self.alpha == 1.0 && self.beta == 1.0 && self.delta == 1.0
    }

    pub fn depends_on_t(&self) -> bool {
        [&self.theta_bar, &self.xi_bar, &self.zeta]
            .iter()
            .any(|e| e.depends_on(Var::T))
    }

    /// `(theta_bar, xi_bar, zeta)` at a point.
    pub fn fields_at(&self, t: f64, x: f64) -> Result<(f64, f64, f64), EvalError> {
        Ok((
            self.theta_bar.eval(t, x)?,
            self.xi_bar.eval(t, x)?,
            self.zeta.eval(t, x)?,
        ))
    }
}

/// Anything that can hand out one coin per space-time site.
pub trait CoinSchedule {
    fn grid(&self) -> &GridSpec;

    fn coin_at_point(&self, t: f64, x: f64) -> Result<SU2Coin, EvalError>;

    /// Whether coins change from one step to the next.
    fn depends_on_t(&self) -> bool;

    fn coin_at(&self, j: usize, m: usize) -> Result<SU2Coin, EvalError> {
        let g = self.grid();
        self.coin_at_point(g.t(j), g.x(m))
    }

    fn fill_row(&self, j: usize, row: &mut Vec<SU2Coin>) -> Result<(), EvalError> {
        let g = self.grid();
        let t = g.t(j);
        row.clear();
        for m in 0..g.n_sites {
            row.push(self.coin_at_point(t, g.x(m))?);
        }
        Ok(())
    }
}

/// One member of a jet's family at a definite epsilon.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcreteWalk {
    pub jet: WalkJet,
    pub epsilon: f64,
    pub grid: GridSpec,
    theta_scale: f64,
    xi_scale: f64,
}

impl ConcreteWalk {
    pub fn dt(&self) -> f64 {
        self.grid.dt
    }

    pub fn dx(&self) -> f64 {
        self.grid.dx
    }

    /// `(theta, xi, zeta)` with the scaling applied.
    pub fn angles_at(&self, t: f64, x: f64) -> Result<(f64, f64, f64), EvalError> {
        let offset = self.jet.p as f64 * PI;
        let (tb, xb, z) = self.jet.fields_at(t, x)?;
        Ok((offset + tb * self.theta_scale, offset + xb * self.xi_scale, z))
    }
}

impl CoinSchedule for ConcreteWalk {
    fn grid(&self) -> &GridSpec {
        &self.grid
    }

    fn coin_at_point(&self, t: f64, x: f64) -> Result<SU2Coin, EvalError> {
        let (th, xi, z) = self.angles_at(t, x)?;
        Ok(build_coin(th, xi, z))
    }

    fn depends_on_t(&self) -> bool {
        self.jet.depends_on_t()
    }
}

/// Builds the walk at scale `epsilon` on `n_sites` sites and checks that all
/// three angle fields evaluate on every site of every step.
pub fn instantiate_walk(
    jet: &WalkJet,
    epsilon: f64,
    n_sites: usize,
    t0: f64,
    x0: f64,
    j_steps: usize,
) -> Result<(ConcreteWalk, GridSpec), CoinError> {
    check_positive("epsilon", epsilon)?;
    let jet = jet.clone().validated()?;
    let grid = GridSpec::new(
        n_sites,
        j_steps,
        jet.tau * epsilon,
        jet.lambda * epsilon.powf(jet.delta),
        t0,
        x0,
    )?;
    let walk = ConcreteWalk {
        theta_scale: epsilon.powf(jet.alpha),
        xi_scale: epsilon.powf(jet.beta),
        jet,
        epsilon,
        grid: grid.clone(),
    };
    prescan(&walk)?;
    Ok((walk, grid))
}

fn prescan(walk: &ConcreteWalk) -> Result<(), EvalError> {
    let g = &walk.grid;
    let exprs = [&walk.jet.theta_bar, &walk.jet.xi_bar, &walk.jet.zeta];
    for e in exprs {
        if e.is_constant() {
            e.eval(g.t0, g.x0)?;
            continue;
        }
        let steps = if e.depends_on(Var::T) { g.j_steps + 1 } else { 1 };
        let sites = if e.depends_on(Var::X) { g.n_sites } else { 1 };
        for j in 0..steps {
            for m in 0..sites {
                e.eval(g.t(j), g.x(m))?;
            }
        }
    }
    Ok(())
}

/// A walk whose Euler angles are given directly, with no epsilon scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedAngleWalk {
    pub theta: Expr,
    pub xi: Expr,
    pub zeta: Expr,
    pub grid: GridSpec,
}

impl FixedAngleWalk {
    pub fn new(theta: Expr, xi: Expr, zeta: Expr, grid: GridSpec) -> Self {
        FixedAngleWalk { theta, xi, zeta, grid }
    }

    pub fn constant(theta: f64, xi: f64, zeta: f64, grid: GridSpec) -> Self {
        FixedAngleWalk::new(Expr::Num(theta), Expr::Num(xi), Expr::Num(zeta), grid)
    }
}

impl CoinSchedule for FixedAngleWalk {
    fn grid(&self) -> &GridSpec {
        &self.grid
    }

    fn coin_at_point(&self, t: f64, x: f64) -> Result<SU2Coin, EvalError> {
        Ok(build_coin(
            self.theta.eval(t, x)?,
            self.xi.eval(t, x)?,
            self.zeta.eval(t, x)?,
        ))
    }

    fn depends_on_t(&self) -> bool {
        [&self.theta, &self.xi, &self.zeta]
            .iter()
            .any(|e| e.depends_on(Var::T))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn jet(p: u8, tb: &str, xb: &str, z: &str) -> WalkJet {
        WalkJet::parse_linear(p, 1.0, 1.0, tb, xb, z).unwrap()
    }

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    // Independent oracle: plain complex arithmetic, no nalgebra.
    fn oracle_defects(b: &SU2Coin) -> (f64, f64) {
        let m = [[b.b11, b.b12], [b.b21, b.b22]];
        let mut worst: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                let mut s = Complex64::new(0.0, 0.0);
                for k in 0..2 {
                    s += m[k][i].conj() * m[k][j];
                }
                let id = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((s - id).norm());
            }
        }
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        (worst, (det - 1.0).norm())
    }

    #[test]
    fn coin_examples() {
        assert_eq!(build_coin(0.0, 0.0, 0.0), SU2Coin::IDENTITY);
        let b = build_coin(PI / 2.0, 0.0, 0.0);
        assert!(close(b.b11, 0.0.into(), 1e-16));
        assert!(close(b.b12, 1.0.into(), 1e-16));
        assert!(close(b.b21, (-1.0).into(), 1e-16));
        assert!(close(b.b22, 0.0.into(), 1e-16));
        let b = build_coin(0.3, 0.7, 1.1);
        let (u, d) = oracle_defects(&b);
        assert!(u <= 1e-14 && d <= 1e-14);
        assert!(b.unitarity_defect() <= 1e-14 && b.det_defect() <= 1e-14);
        assert!(close(b.b11, Complex64::from_polar(0.3f64.cos(), 0.7), 1e-16));
        assert!(close(b.b21, -Complex64::from_polar(0.3f64.sin(), -1.1), 1e-16));
    }

    #[test]
    fn free_jets_give_identity_coins() {
        for p in [0, 1] {
            let (w, _) = instantiate_walk(&jet(p, "0", "0", "0.7*x"), 0.1, 16, 0.0, 0.0, 4).unwrap();
            for m in 0..16 {
                let b = w.coin_at(2, m).unwrap();
                assert!(close(b.b11, 1.0.into(), 1e-15));
                assert!(close(b.b22, 1.0.into(), 1e-15));
                assert!(b.b12.norm() < 1e-15 && b.b21.norm() < 1e-15);
            }
        }
    }

    #[test]
    fn small_angle_coin_is_near_identity() {
        let (w, g) = instantiate_walk(&jet(0, "1", "0", "0"), 0.01, 8, 0.0, 0.0, 3).unwrap();
        assert!((g.dt - 0.01).abs() < 1e-18 && (g.dx - 0.01).abs() < 1e-18);
        let (th, _, _) = w.angles_at(0.0, 0.0).unwrap();
        assert!((th - 0.01).abs() < 1e-16);
        let b = w.coin_at(1, 3).unwrap();
        // diagonal deviates by 1 - cos(eps) ~ eps^2 / 2, off-diagonal by sin(eps) ~ eps
        assert!(close(b.b11, 1.0.into(), 1e-4));
        assert!(close(b.b22, 1.0.into(), 1e-4));
        assert!((b.b12.norm() - 0.01f64.sin()).abs() < 1e-16);
        assert!((b.b21.norm() - 0.01f64.sin()).abs() < 1e-16);
    }

    #[test]
    fn parity_flips_the_off_diagonals() {
        let (w0, _) = instantiate_walk(&jet(0, "1", "0.5", "0.3"), 0.05, 4, 0.0, 0.0, 0).unwrap();
        let (w1, _) = instantiate_walk(&jet(1, "1", "0.5", "0.3"), 0.05, 4, 0.0, 0.0, 0).unwrap();
        let a = w0.coin_at(0, 0).unwrap();
        let b = w1.coin_at(0, 0).unwrap();
        assert!(close(a.b11, b.b11, 1e-14));
        assert!(close(a.b22, b.b22, 1e-14));
        assert!(close(a.b12, -b.b12, 1e-14));
        assert!(close(a.b21, -b.b21, 1e-14));
        assert_eq!(w0.jet.coupling_sign(), -1.0);
        assert_eq!(w1.jet.coupling_sign(), 1.0);
    }

    #[test]
    fn instantiation_reports_domain_errors() {
        let j = jet(0, "ln(x)", "0", "0");
        let err = instantiate_walk(&j, 0.1, 10, 0.0, -0.5, 2).unwrap_err();
        match err {
            CoinError::Eval(e) => {
                assert_eq!(e.subexpr, "ln(x)");
                assert!(e.x <= 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(instantiate_walk(&j, 0.1, 10, 0.0, 0.5, 2).is_ok());
        assert!(instantiate_walk(&j, 0.0, 10, 0.0, 0.5, 2).is_err());
        let mut bad = jet(0, "0", "0", "0");
        bad.p = 2;
        assert_eq!(bad.validated(), Err(CoinError::BadParity(2)));
    }

    #[test]
    fn coins_tend_to_identity_as_epsilon_shrinks() {
        let j = jet(1, "1 + 0.3*sin(x)", "0.5*cos(t)", "x");
        let mut last = f64::INFINITY;
        for eps in [0.1, 0.01, 0.001] {
            let (w, _) = instantiate_walk(&j, eps, 8, 0.0, 0.0, 1).unwrap();
            let b = w.coin_at(1, 5).unwrap();
            let dist = (b.matrix() - Matrix2::identity()).iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!(dist < last);
            last = dist;
        }
        assert!(last < 3e-3);
    }

    proptest! {
        #[test]
        fn coins_are_special_unitary(th in -10.0f64..10.0, xi in -10.0f64..10.0, z in -10.0f64..10.0) {
            let b = build_coin(th, xi, z);
            let (u, d) = oracle_defects(&b);
            prop_assert!(u <= 1e-14);
            prop_assert!(d <= 1e-14);
        }
    }
}
