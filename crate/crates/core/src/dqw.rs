//! The walk engine: one coin, then one shift per chirality, each step.
//!
//! ```text
//! psi-_{j+1,m} = b11 psi-_{j,m+1} + b12 psi+_{j,m-1}
//! psi+_{j+1,m} = b21 psi-_{j,m+1} + b22 psi+_{j,m-1}
//! ```

use num_complex::Complex64;

use crate::coin::{CoinSchedule, SU2Coin};
use crate::expr::EvalError;
use crate::lattice::{total_probability, SpinorField};

/// Applies one step with an explicit coin row. Indices wrap periodically.
pub fn step_with_row(input: &SpinorField, row: &[SU2Coin], dt: f64, out: &mut SpinorField) {
    let n = input.n_sites();
    debug_assert_eq!(row.len(), n);
    out.minus.resize(n, Complex64::new(0.0, 0.0));
    out.plus.resize(n, Complex64::new(0.0, 0.0));
    for m in 0..n {
        let right = if m + 1 == n { 0 } else { m + 1 };
        let left = if m == 0 { n - 1 } else { m - 1 };
        let (a, b) = row[m].apply(input.minus[right], input.plus[left]);
        out.minus[m] = a;
        out.plus[m] = b;
    }
    out.time = input.time + dt;
}

/// One step of the walk from step index `j`.
pub fn step_walk<S: CoinSchedule + ?Sized>(
    f: &SpinorField,
    walk: &S,
    j: usize,
) -> Result<SpinorField, EvalError> {
    let mut row = Vec::with_capacity(f.n_sites());
    walk.fill_row(j, &mut row)?;
    let mut out = SpinorField::zeros(f.n_sites(), f.time);
    step_with_row(f, &row, walk.grid().dt, &mut out);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WalkRun {
    /// Step index of each snapshot.
    pub steps: Vec<usize>,
    pub snapshots: Vec<SpinorField>,
    /// `|pi_j - pi_0|` at each snapshot.
    pub drift: Vec<f64>,
    /// Largest `|pi_j - pi_0|` over every step, recorded or not.
    pub max_drift: f64,
}

impl WalkRun {
    pub fn last(&self) -> &SpinorField {
        self.snapshots.last().expect("a run always holds its initial state")
    }
}

/// Iterates the walk `j_steps` times from step 0 of `walk`'s grid.
///
/// Snapshots are kept at step 0, every `snapshot_every` steps (0 disables
/// intermediate snapshots) and at the final step.
pub fn run_walk<S: CoinSchedule + ?Sized>(
    init: &SpinorField,
    walk: &S,
    j_steps: usize,
    snapshot_every: usize,
) -> Result<WalkRun, EvalError> {
    let p0 = total_probability(init);
    let mut run = WalkRun {
        steps: vec![0],
        snapshots: vec![init.clone()],
        drift: vec![0.0],
        max_drift: 0.0,
    };
    let mut cur = init.clone();
    let mut next = SpinorField::zeros(init.n_sites(), init.time);
    let mut row = Vec::with_capacity(init.n_sites());
    let static_row = !walk.depends_on_t();
    let dt = walk.grid().dt;
    for j in 0..j_steps {
        if j == 0 || !static_row {
            walk.fill_row(j, &mut row)?;
        }
        step_with_row(&cur, &row, dt, &mut next);
        std::mem::swap(&mut cur, &mut next);
        let drift = (total_probability(&cur) - p0).abs();
        run.max_drift = run.max_drift.max(drift);
        let done = j + 1;
        if done == j_steps || (snapshot_every > 0 && done % snapshot_every == 0) {
            run.steps.push(done);
            run.snapshots.push(cur.clone());
            run.drift.push(drift);
        }
    }
    Ok(run)
}

/// Zeroes every site whose `(j + m)` parity differs from `parity`.
///
/// The walk only couples site `m` at step `j + 1` to sites `m +- 1` at
/// step `j`, so the two classes evolve independently.
pub fn restrict_to_sublattice(f: &SpinorField, j: usize, parity: usize) -> SpinorField {
    let mut out = f.clone();
    for m in 0..f.n_sites() {
        if (j + m) % 2 != parity % 2 {
            out.minus[m] = Complex64::new(0.0, 0.0);
            out.plus[m] = Complex64::new(0.0, 0.0);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coin::{build_coin, instantiate_walk, FixedAngleWalk, WalkJet};
    use crate::expr::Expr;
    use crate::lattice::GridSpec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_field(rng: &mut ChaCha8Rng, n: usize) -> SpinorField {
        let mut f = SpinorField::zeros(n, 0.0);
        for m in 0..n {
            f.minus[m] = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            f.plus[m] = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
        let p = total_probability(&f);
        f.scale(1.0 / p.sqrt());
        f
    }

    fn grid(n: usize) -> GridSpec {
        GridSpec::new(n, 0, 0.1, 0.1, 0.0, 0.0).unwrap()
    }

    #[test]
    fn identity_coin_shifts() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = random_field(&mut rng, 9);
        let w = FixedAngleWalk::constant(0.0, 0.0, 0.0, grid(9));
        let g = step_walk(&f, &w, 0).unwrap();
        for m in 0..9 {
            assert_eq!(g.minus[m], f.minus[(m + 1) % 9]);
            assert_eq!(g.plus[m], f.plus[(m + 8) % 9]);
        }
        assert!((g.time - 0.1).abs() < 1e-16);
    }

    #[test]
    fn quarter_turn_coin_swaps() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = random_field(&mut rng, 7);
        let w = FixedAngleWalk::constant(PI / 2.0, 0.0, 0.0, grid(7));
        let g = step_walk(&f, &w, 0).unwrap();
        for m in 0..7 {
            assert!((g.minus[m] - f.plus[(m + 6) % 7]).norm() < 1e-15);
            assert!((g.plus[m] + f.minus[(m + 1) % 7]).norm() < 1e-15);
        }
    }

    #[test]
    fn one_step_preserves_probability_for_random_coins() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let n = 64;
            let f = random_field(&mut rng, n);
            let row: Vec<_> = (0..n)
                .map(|_| build_coin(rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0)))
                .collect();
            let mut out = SpinorField::zeros(n, 0.0);
            step_with_row(&f, &row, 0.1, &mut out);
            assert!((total_probability(&out) - 1.0).abs() <= 1e-13);
        }
    }

    #[test]
    fn zero_steps_returns_init() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = random_field(&mut rng, 5);
        let w = FixedAngleWalk::constant(0.4, 0.1, 0.2, grid(5));
        let run = run_walk(&f, &w, 0, 1).unwrap();
        assert_eq!(run.snapshots, vec![f]);
        assert_eq!(run.steps, vec![0]);
    }

    #[test]
    fn identity_walk_wraps_after_n_steps() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = random_field(&mut rng, 12);
        let w = FixedAngleWalk::constant(0.0, 0.0, 0.0, grid(12));
        let run = run_walk(&f, &w, 12, 0).unwrap();
        assert_eq!(run.last().minus, f.minus);
        assert_eq!(run.last().plus, f.plus);
        assert_eq!(run.steps, vec![0, 12]);
    }

    #[test]
    fn snapshots_follow_the_schedule() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let f = random_field(&mut rng, 6);
        let w = FixedAngleWalk::constant(0.3, 0.0, 0.0, grid(6));
        let run = run_walk(&f, &w, 10, 4).unwrap();
        assert_eq!(run.steps, vec![0, 4, 8, 10]);
        assert_eq!(run.drift.len(), 4);
    }

    #[test]
    fn long_run_conserves_probability() {
        let jet = WalkJet::parse_linear(1, 1.0, 1.0, "1 + 0.5*sin(t - 3*x)", "cos(x + t)", "2*sin(x)").unwrap();
        let (w, g) = instantiate_walk(&jet, 0.05, 200, 0.0, 0.0, 10_000).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let f = random_field(&mut rng, g.n_sites);
        let run = run_walk(&f, &w, 10_000, 1000).unwrap();
        assert!(run.max_drift <= 1e-12, "drift {}", run.max_drift);
        assert!(run.drift.iter().all(|d| *d <= 1e-12));
    }

    #[test]
    fn checkerboard_decoupling() {
        let n = 16;
        let mut f = SpinorField::zeros(n, 0.0);
        for m in (0..n).step_by(2) {
            f.minus[m] = c(1.0, 0.5);
            f.plus[m] = c(-0.2, 0.3);
        }
        let w = FixedAngleWalk::new(
            Expr::parse("0.4 + 0.3*sin(x)").unwrap(),
            Expr::parse("t").unwrap(),
            Expr::parse("x").unwrap(),
            grid(n),
        );
        let g = step_walk(&f, &w, 0).unwrap();
        for m in (0..n).step_by(2) {
            assert_eq!(g.minus[m], c(0.0, 0.0));
            assert_eq!(g.plus[m], c(0.0, 0.0));
        }
        assert_eq!(restrict_to_sublattice(&g, 1, 0), g);
        let r = restrict_to_sublattice(&f, 0, 1);
        assert!(r.minus.iter().all(|z| *z == c(0.0, 0.0)));
    }

    #[test]
    fn stepping_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 32;
        let f = random_field(&mut rng, n);
        let g = random_field(&mut rng, n);
        let (a, b) = (c(0.3, -1.2), c(2.0, 0.7));
        let w = FixedAngleWalk::new(
            Expr::parse("sin(x)").unwrap(),
            Expr::parse("cos(2*x)").unwrap(),
            Expr::parse("x^2").unwrap(),
            grid(n),
        );
        let mut comb = SpinorField::zeros(n, 0.0);
        for m in 0..n {
            comb.minus[m] = a * f.minus[m] + b * g.minus[m];
            comb.plus[m] = a * f.plus[m] + b * g.plus[m];
        }
        let sc = step_walk(&comb, &w, 0).unwrap();
        let sf = step_walk(&f, &w, 0).unwrap();
        let sg = step_walk(&g, &w, 0).unwrap();
        for m in 0..n {
            assert!((sc.minus[m] - (a * sf.minus[m] + b * sg.minus[m])).norm() <= 1e-13);
            assert!((sc.plus[m] - (a * sf.plus[m] + b * sg.plus[m])).norm() <= 1e-13);
        }
    }
}
