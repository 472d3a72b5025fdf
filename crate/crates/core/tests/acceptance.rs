//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.
//!
//! Lines go straight to the stderr handle so they show up even when the
//! harness captures test output.

use std::f64::consts::{PI, TAU};
use std::io::Write;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qwalk::coin::{build_coin, instantiate_walk, WalkJet};
use qwalk::continuum::{integrate_dirac, ContinuumGrid, IntegrateOptions, NullCoords};
use qwalk::dqw::run_walk;
use qwalk::expr::Expr;
use qwalk::harness::{
    convergence_study, hadamard_nolimit_demo, kg_order_study, observed_order, EpsilonLadder, KgStudyOptions,
    Reference, StudyOptions,
};
use qwalk::lattice::{l2_distance, total_probability, InitialProfile, SpinorField};
use qwalk::symmetry::{
    connection_from_jet, dynamic_drift, gauge_identity_check, gauge_transform, lagrangian_density,
    probability_form_check, variational_check, GaugeConnection, Side, VariationalOptions,
};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn report(n: u32, passed: bool, detail: &str) {
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "{} criterion {n}: {detail}", if passed { "PASS" } else { "FAIL" });
}

fn e(s: &str) -> Expr {
    s.parse().unwrap()
}

fn jet(p: u8, tb: &str, xb: &str, z: &str) -> WalkJet {
    WalkJet::parse_linear(p, 1.0, 1.0, tb, xb, z).unwrap()
}

/// `a0 + a1 sin(k x + w t + phi)` with `k` an integer, so the field is
/// `2 pi`-periodic in `x`.
fn smooth(rng: &mut ChaCha8Rng, base: f64, amp: f64) -> String {
    let a0 = base + rng.gen_range(-amp..amp);
    let a1 = rng.gen_range(-amp..amp);
    let k = rng.gen_range(1..=3);
    let w = rng.gen_range(-2.0..2.0);
    let ph = rng.gen_range(0.0..TAU);
    format!("({a0}) + ({a1})*sin({k}*x + ({w})*t + {ph})")
}

fn orders(errors: &[f64], scales: &[f64]) -> Vec<f64> {
    errors
        .windows(2)
        .zip(scales.windows(2))
        .map(|(e, h)| observed_order(e[0], e[1], h[0], h[1]))
        .collect()
}

fn unit_packet(grid: &ContinuumGrid, center: f64, width: f64, w_minus: Complex64, w_plus: Complex64) -> SpinorField {
    let mut f = SpinorField::zeros(grid.n_sites, grid.t0);
    for m in 0..grid.n_sites {
        let d = (grid.x(m) - center) / width;
        let env = (-0.5 * d * d).exp();
        f.minus[m] = w_minus * env;
        f.plus[m] = w_plus * env;
    }
    let norm = (grid.dx * total_probability(&f)).sqrt();
    f.scaled(1.0 / norm)
}

fn dirac_window(jet: &WalkJet, grid: &ContinuumGrid, init: &SpinorField, t: f64) -> [SpinorField; 3] {
    let run = integrate_dirac(init, jet, grid, t, &IntegrateOptions { snapshot_every: 0, keep_tail: 3 }).unwrap();
    let k = run.tail.len();
    [run.tail[k - 3].clone(), run.tail[k - 2].clone(), run.tail[k - 1].clone()]
}

#[test]
fn criterion_01_unitarity() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let p = rng.gen_range(0..=1);
        let j = jet(p, &smooth(&mut rng, 1.0, 1.0), &smooth(&mut rng, 0.0, 1.0), &smooth(&mut rng, 0.0, 2.0));
        let n = rng.gen_range(16..=512);
        let eps = rng.gen_range(0.005..0.05);
        let (walk, grid) = instantiate_walk(&j, eps, n, 0.0, 0.0, 1000).unwrap();
        let mut f = SpinorField::zeros(grid.n_sites, 0.0);
        for m in 0..n {
            f.minus[m] = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            f.plus[m] = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
        f.scale(1.0 / total_probability(&f).sqrt());
        let run = run_walk(&f, &walk, 1000, 0).unwrap();
        worst = worst.max(run.max_drift);
    }
    let secs = start.elapsed().as_secs_f64();
    let passed = worst <= 1e-12 && secs < 30.0;
    report(1, passed, &format!("max |pi_j - pi_0| = {worst:e} over 50 scenarios, {secs:.2} s"));
    assert!(passed);
}

#[test]
fn criterion_02_su2_validity() {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let (mut unit, mut det): (f64, f64) = (0.0, 0.0);
    for _ in 0..10_000 {
        let b = build_coin(rng.gen_range(-TAU..TAU), rng.gen_range(-TAU..TAU), rng.gen_range(-TAU..TAU));
        unit = unit.max(b.unitarity_defect());
        det = det.max(b.det_defect());
    }
    let passed = unit <= 1e-14 && det <= 1e-14;
    report(2, passed, &format!("max |B^dag B - I| = {unit:e}, max |det B - 1| = {det:e}"));
    assert!(passed);
}

#[test]
fn criterion_03_transport_oracle() {
    let j = jet(1, "0", "1", "0");
    let grid = ContinuumGrid::with_cfl(512, 16.0, 0.0, -8.0, 1.0, 0.5).unwrap();
    let (wm, wp) = (c(1.0, 0.0), c(0.0, 0.7));
    let width = 1.0;
    let init = unit_packet(&grid, 0.0, width, wm, wp);
    let run = integrate_dirac(&init, &j, &grid, 1.0, &IntegrateOptions::default()).unwrap();
    // each component rides its characteristic and turns its phase at rate xi_bar / tau
    let norm = init.minus[256] / wm;
    let mut exact = SpinorField::zeros(512, 1.0);
    for m in 0..512 {
        let x = grid.x(m);
        let env = |y: f64| (-0.5 * (y / width).powi(2)).exp();
        exact.minus[m] = norm * wm * env(x + 1.0) * Complex64::from_polar(1.0, 1.0);
        exact.plus[m] = norm * wp * env(x - 1.0) * Complex64::from_polar(1.0, -1.0);
    }
    let err = l2_distance(run.last(), &exact, grid.dx).unwrap();
    let passed = err <= 1e-6;
    report(3, passed, &format!("L2 error {err:e} at n = 512, CFL 0.5, t = 1"));
    assert!(passed);
}

#[test]
fn criterion_04_dispersion() {
    let theta = 1.0;
    let k = 3.0;
    let j = jet(1, "1", "0", "0.4");
    let zeta: f64 = 0.4;
    let kappa = 1.0;
    // symbol of the system: tau omega psi = M psi
    let q = k;
    let m11 = c(-q, 0.0);
    let m12 = -Complex64::i() * kappa * theta * Complex64::from_polar(1.0, zeta);
    let m21 = Complex64::i() * kappa * theta * Complex64::from_polar(1.0, -zeta);
    let m22 = c(q, 0.0);
    let det = m11 * m22 - m12 * m21;
    let omega = (-det.re).sqrt();
    let expected = (k * k + theta * theta).sqrt();
    assert!((omega - expected).abs() < 1e-14);
    // eigenvector from the first row of M - omega
    let (va, vb) = (m12, c(omega, 0.0) - m11);
    let grid = ContinuumGrid::with_cfl(512, TAU, 0.0, 0.0, 1.0, 0.5).unwrap();
    let mut init = SpinorField::zeros(512, 0.0);
    for m in 0..512 {
        let ph = Complex64::from_polar(1.0, k * grid.x(m));
        init.minus[m] = va * ph;
        init.plus[m] = vb * ph;
    }
    let run = integrate_dirac(&init, &j, &grid, 1.0, &IntegrateOptions::default()).unwrap();
    let later = run.last();
    let overlap: Complex64 = init
        .minus
        .iter()
        .zip(&later.minus)
        .chain(init.plus.iter().zip(&later.plus))
        .map(|(a, b)| a.conj() * b)
        .sum();
    let mut measured = -overlap.arg();
    measured += TAU * ((expected - measured) / TAU).round();
    let err = (measured - expected).abs();
    let passed = err <= 1e-4;
    report(4, passed, &format!("omega = {measured:.10}, exact {expected:.10}, error {err:e}"));
    assert!(passed);
}

#[test]
fn criterion_05_walk_to_continuum() {
    let profile = InitialProfile::gaussian(0.0, 0.5, 0.0, c(1.0, 0.0), c(0.0, 0.7));
    let cases = [
        ("transport-phase", jet(1, "0", "1 + 0.5*sin(x)", "0"), Reference::Analytic),
        ("constant", jet(1, "1", "0.5", "0.3"), Reference::FineContinuum),
        ("space-time", jet(1, "1 + 0.1*sin(t - x)", "0.3*cos(x)", "0.2*sin(x)"), Reference::FineContinuum),
    ];
    let mut all = true;
    let mut lines = Vec::new();
    for (name, j, reference) in cases {
        let start = Instant::now();
        let ladder = EpsilonLadder { reference, ..EpsilonLadder::default() };
        let r = convergence_study(&j, &ladder, &profile, &StudyOptions::default()).unwrap();
        let secs = start.elapsed().as_secs_f64();
        let tail = r.tail_orders();
        let ok = tail.len() == 2 && tail.iter().all(|o| (0.8..=1.2).contains(o)) && secs < 120.0;
        all &= ok;
        lines.push(format!("{name}: tail orders {:.4}, {:.4} ({secs:.1} s)", tail[0], tail[1]));
    }
    report(5, all, &lines.join("; "));
    assert!(all);
}

#[test]
fn criterion_06_hadamard_nonconvergence() {
    let profile = InitialProfile::gaussian(0.0, 0.5, 0.0, c(1.0, 0.0), c(0.0, 0.7));
    let eps = [50.0, 99.0, 201.0, 403.0, 805.0].map(|n: f64| 1.0 / n).to_vec();
    let ladder = EpsilonLadder::new(eps, 1.0, Reference::FineContinuum).unwrap();
    let r = hadamard_nolimit_demo(&ladder, &profile, &StudyOptions::default(), 10.0).unwrap();
    let cd = &r.control_distances;
    let halving = cd.windows(2).all(|w| (0.35..=0.65).contains(&(w[1] / w[0])));
    let passed = r.passed && halving;
    report(
        6,
        passed,
        &format!(
            "min d(fixed) = {:e}, 10 x d_last(control) = {:e}, control ratios {:?}",
            r.min_distance(),
            10.0 * r.control_last(),
            cd.windows(2).map(|w| (w[1] / w[0] * 1000.0).round() / 1000.0).collect::<Vec<_>>()
        ),
    );
    assert!(passed);
}

#[test]
fn criterion_07_kg_residual() {
    let profile = InitialProfile::gaussian(0.0, 0.7, 0.0, c(1.0, 0.0), c(0.0, 0.5));
    let opts = KgStudyOptions { x0: -8.0, period: 16.0, t_final: 0.5, cfl: 0.5, profile };
    let mut all = true;
    let mut lines = Vec::new();
    for (name, j) in [
        ("constant", jet(1, "1", "0.3", "0.5")),
        ("space-time", jet(0, "1 + 0.2*sin(t + 2*x)", "0.3*cos(x)", "0.2*sin(x)")),
    ] {
        let r = kg_order_study(&j, &[256, 512, 1024, 2048], &opts).unwrap();
        let ok = r.orders.iter().all(|o| *o >= 1.8) && r.errors().windows(2).all(|w| w[1] < w[0]);
        all &= ok;
        lines.push(format!("{name}: orders {:?}", r.orders.iter().map(|o| (o * 1000.0).round() / 1000.0).collect::<Vec<_>>()));
    }
    report(7, all, &lines.join("; "));
    assert!(all);
}

fn random_connection(rng: &mut ChaCha8Rng, conserving: bool) -> [[Expr; 2]; 3] {
    std::array::from_fn(|j| {
        let minus = smooth(rng, 0.0, 1.0);
        let plus = if j < 2 && conserving { minus.clone() } else { smooth(rng, 0.0, 1.0) };
        [e(&minus), e(&plus)]
    })
}

/// A smooth, `2 pi`-periodic spinor sampled at `t - h, t, t + h`.
fn random_window(rng: &mut ChaCha8Rng, grid: &ContinuumGrid, t: f64, h: f64) -> [SpinorField; 3] {
    let (k1, k2) = (rng.gen_range(1..=3) as f64, rng.gen_range(1..=3) as f64);
    let (w1, w2) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
    let (a, b) = (rng.gen_range(0.1..0.5), rng.gen_range(0.1..0.5));
    std::array::from_fn(|s| {
        let time = t + (s as f64 - 1.0) * h;
        let mut f = SpinorField::zeros(grid.n_sites, time);
        for m in 0..grid.n_sites {
            let x = grid.x(m);
            f.minus[m] = Complex64::from_polar(1.0 + a * (x - time).cos(), k1 * x + w1 * time);
            f.plus[m] = Complex64::from_polar(1.0 + b * (2.0 * x + time).sin(), -k2 * x + w2 * time);
        }
        f
    })
}

#[test]
fn criterion_08_gauge_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(108);
    let coords = NullCoords::new(1.0, 1.0).unwrap();
    let ns = [1024, 2048, 4096, 8192];
    let mut all = true;
    let mut lines = Vec::new();
    for case in 0..6 {
        let gen = (case % 3 + 1) as u8;
        let exprs = random_connection(&mut rng, false);
        let alpha = e(&smooth(&mut rng, 0.0, 1.0));
        let seed = rng.gen();
        let t = 0.3;
        let (mut errs, mut inter, mut hs) = (Vec::new(), Vec::new(), Vec::new());
        for &n in &ns {
            let grid = ContinuumGrid::with_cfl(n, TAU, 0.0, 0.0, 1.0, 0.5).unwrap();
            let b = GaugeConnection::from_exprs(&exprs, &grid, t).unwrap();
            let window = random_window(&mut ChaCha8Rng::seed_from_u64(seed), &grid, t, grid.dt);
            let r = gauge_identity_check(&b, gen, &alpha, &window, &coords, &grid).unwrap();
            errs.push(r.error);
            inter.push(r.intermediate_error);
            hs.push(grid.dx);
        }
        let ords = orders(&errs, &hs);
        let ok = ords.iter().all(|o| *o >= 1.8) && errs[3] <= 1e-5;
        all &= ok;
        lines.push(format!(
            "j={gen}: finest {:.2e}, min order {:.2} (intermediate identity: finest {:.2e}, min order {:.2})",
            errs[3],
            ords.iter().copied().fold(f64::INFINITY, f64::min),
            inter[3],
            orders(&inter, &hs).iter().copied().fold(f64::INFINITY, f64::min)
        ));
    }
    report(8, all, &lines.join("; "));
    assert!(all, "the stated identity fails for j = 1, 2 when alpha depends on x");
}

#[test]
fn criterion_09_conservation_characterization() {
    let mut rng = ChaCha8Rng::seed_from_u64(109);
    let coords = NullCoords::new(1.0, 1.0).unwrap();
    let grid = ContinuumGrid::with_cfl(128, TAU, 0.0, 0.0, 1.0, 0.1).unwrap();
    let mut agree = 0;
    let mut worst_conserving: f64 = 0.0;
    let mut least_broken = f64::INFINITY;
    for i in 0..20 {
        let conserving = i % 2 == 0;
        let b = GaugeConnection::from_exprs(&random_connection(&mut rng, conserving), &grid, 0.0).unwrap();
        let form = probability_form_check(&b);
        let drift = dynamic_drift(&b, &coords, &grid, 0.5).unwrap();
        if form.conserving == (drift <= 1e-8) && form.conserving == conserving {
            agree += 1;
        }
        if conserving {
            worst_conserving = worst_conserving.max(drift);
        } else {
            least_broken = least_broken.min(drift);
        }
    }
    let passed = agree == 20;
    report(
        9,
        passed,
        &format!("{agree}/20 agree; largest conserving drift {worst_conserving:e}, smallest broken drift {least_broken:e}"),
    );
    assert!(passed);
}

#[test]
fn criterion_10_gauge_conservation_compatibility() {
    let mut rng = ChaCha8Rng::seed_from_u64(110);
    let coords = NullCoords::new(1.0, 1.0).unwrap();
    let grid = ContinuumGrid::with_cfl(128, TAU, 0.0, 0.0, 1.0, 0.1).unwrap();
    let mut ok = true;
    let mut lines = Vec::new();
    for gen in [1u8, 2] {
        let b = GaugeConnection::from_exprs(&random_connection(&mut rng, true), &grid, 0.0).unwrap();
        for (alpha, expect) in [("0.4*sin(t) + 0.2", true), ("0.4*sin(x + t)", false)] {
            let moved = gauge_transform(&b, gen, &e(alpha), &coords, &grid).unwrap();
            let form = probability_form_check(&moved).conserving;
            let dynamic = dynamic_drift(&moved, &coords, &grid, 0.5).unwrap() <= 1e-8;
            ok &= form == expect && dynamic == expect;
            lines.push(format!("j={gen}, alpha={alpha}: conserving {form}/{dynamic}"));
        }
    }
    report(10, ok, &lines.join("; "));
    assert!(ok);
}

#[test]
fn criterion_11_lagrangian_forms() {
    let mut rng = ChaCha8Rng::seed_from_u64(111);
    let j = jet(1, "1 + 0.1*sin(t - x)", "0.3*cos(x)", "0.2*sin(x)");
    let coords = NullCoords::of_jet(&j);
    let ns = [128, 256, 512, 1024];

    // random fields on the finest grid
    let grid = ContinuumGrid::with_cfl(ns[3], TAU, 0.0, 0.0, 1.0, 0.5).unwrap();
    let mut random_gap: f64 = 0.0;
    let mut rotated_gap: f64 = 0.0;
    for _ in 0..5 {
        let window = random_window(&mut rng, &grid, 0.2, grid.dt);
        let b = connection_from_jet(&j, &grid, 0.2).unwrap();
        let r = lagrangian_density(&window, &b, &j, &coords, &grid).unwrap();
        random_gap = random_gap.max(r.dirac_form_gap);
        rotated_gap = rotated_gap.max(r.rotated_gap);
    }

    // on shell
    let (mut dens, mut hs) = (Vec::new(), Vec::new());
    for &n in &ns {
        let grid = ContinuumGrid::with_cfl(n, TAU, 0.0, 0.0, 1.0, 0.5).unwrap();
        let init = unit_packet(&grid, PI, 0.6, c(1.0, 0.0), c(0.0, 0.5));
        let window = dirac_window(&j, &grid, &init, 0.5);
        let b = connection_from_jet(&j, &grid, window[1].time).unwrap();
        let r = lagrangian_density(&window, &b, &j, &coords, &grid).unwrap();
        dens.push(r.max_density());
        hs.push(grid.dx);
    }
    let on_shell_orders = orders(&dens, &hs);
    let on_shell = on_shell_orders.iter().all(|o| *o >= 1.8);
    let random_ok = random_gap <= 1e-6;
    let passed = random_ok && on_shell;
    report(
        11,
        passed,
        &format!(
            "random-field gap {random_gap:e} (rotated form {rotated_gap:e}); on-shell density {:e} with orders {:?}",
            dens[3],
            on_shell_orders.iter().map(|o| (o * 100.0).round() / 100.0).collect::<Vec<_>>()
        ),
    );
    assert!(on_shell, "on-shell density does not vanish under refinement");
    assert!(random_ok, "the two Lagrangian forms differ off shell");
}

#[test]
fn criterion_12_variational_curvature() {
    let opts = VariationalOptions::default();
    let ns = [64, 128, 256, 512, 1024];
    let mut ok = true;
    let mut lines = Vec::new();
    for (side, theta) in [(Side::Minus, "1 + 0.2*sin(t - x)"), (Side::Plus, "1 + 0.2*sin(t + x)")] {
        let j = jet(1, theta, "0.3*sin(t)*cos(2*x)", "0.2*cos(t)*cos(2*x)");
        let (mut curv, mut hs) = (Vec::new(), Vec::new());
        let mut admits = true;
        for &n in &ns {
            let grid = ContinuumGrid::with_cfl(n, PI, 0.0, 0.0, 1.0, 0.5).unwrap();
            let r = variational_check(&j, &grid, side, &opts).unwrap();
            curv.push(r.curvature);
            hs.push(grid.dx);
            admits &= r.admits_variational_principle;
        }
        let ords = orders(&curv, &hs);
        let side_ok = admits && ords.iter().all(|o| *o >= 1.8) && curv[ns.len() - 1] <= 1e-5;
        ok &= side_ok;
        lines.push(format!("{side:?}: finest |F| {:e}, min order {:.2}", curv[ns.len() - 1], ords.iter().copied().fold(f64::INFINITY, f64::min)));
    }
    // lambda^2 box zeta = 1 and d_t xi_bar = 0, so the violation is exactly 1
    let bad = jet(1, "1", "0.5", "0.5*t^2 + 0.3*x*t");
    let grid = ContinuumGrid::with_cfl(256, PI, 0.0, 0.0, 1.0, 0.5).unwrap();
    for side in [Side::Minus, Side::Plus] {
        let r = variational_check(&bad, &grid, side, &opts).unwrap();
        let matches = (r.curvature - 1.0).abs() <= 0.05 && (r.constraint_violation - 1.0).abs() <= 0.05;
        ok &= !r.admits_variational_principle && matches;
        lines.push(format!(
            "violating jet {side:?}: flagged {}, |F| {:.6}, constraint {:.6}",
            !r.admits_variational_principle,
            r.curvature,
            r.constraint_violation
        ));
    }
    report(12, ok, &lines.join("; "));
    assert!(ok);
}

#[test]
fn criterion_13_determinism() {
    let exe = env!("CARGO_BIN_EXE_qwalk");
    let config = concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/reference.cfg");
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let status = std::process::Command::new(exe)
            .args(["all-checks", "--quiet", "--config", config, "--out"])
            .arg(d.path())
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(0));
    }
    let mut names: Vec<_> = std::fs::read_dir(dirs[0].path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    let mut identical = !names.is_empty();
    for name in &names {
        let a = std::fs::read(dirs[0].path().join(name)).unwrap();
        let b = std::fs::read(dirs[1].path().join(name)).ok();
        identical &= Some(a) == b;
    }
    let count_b = std::fs::read_dir(dirs[1].path()).unwrap().count();
    identical &= count_b == names.len();
    report(13, identical, &format!("{} output files compared byte for byte", names.len()));
    assert!(identical);
}
