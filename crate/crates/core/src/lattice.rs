//! Two-component spinor fields on a periodic one-dimensional lattice.

use std::io::{self, Write};

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LatticeError {
    #[error("n_sites must be at least 2, got {0}")]
    TooFewSites(usize),
    #[error("{name} must be finite and positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("field lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("packet width {width} is below two lattice spacings ({min})")]
    UnresolvedPacket { width: f64, min: f64 },
    #[error("both chirality weights are zero")]
    ZeroWeights,
    #[error("field contains a non-finite entry at site {0}")]
    NonFinite(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Boundary {
    #[default]
    Periodic,
}

/// Space-time lattice of a walk: `t_j = t0 + j dt`, `x_m = x0 + m dx`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub n_sites: usize,
    pub j_steps: usize,
    pub dt: f64,
    pub dx: f64,
    pub t0: f64,
    pub x0: f64,
    pub boundary: Boundary,
}

impl GridSpec {
    pub fn new(
        n_sites: usize,
        j_steps: usize,
        dt: f64,
        dx: f64,
        t0: f64,
        x0: f64,
    ) -> Result<Self, LatticeError> {
        if n_sites < 2 {
            return Err(LatticeError::TooFewSites(n_sites));
        }
        check_positive("dt", dt)?;
        check_positive("dx", dx)?;
        Ok(GridSpec {
            n_sites,
            j_steps,
            dt,
            dx,
            t0,
            x0,
            boundary: Boundary::Periodic,
        })
    }

    pub fn x(&self, m: usize) -> f64 {
        self.x0 + m as f64 * self.dx
    }

    pub fn t(&self, j: usize) -> f64 {
        self.t0 + j as f64 * self.dt
    }

    pub fn period(&self) -> f64 {
        self.n_sites as f64 * self.dx
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.n_sites).map(|m| self.x(m)).collect()
    }
}

pub(crate) fn check_positive(name: &'static str, value: f64) -> Result<(), LatticeError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(LatticeError::NonPositive { name, value })
    }
}

/// The pair `(psi_minus, psi_plus)` sampled at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinorField {
    pub minus: Vec<Complex64>,
    pub plus: Vec<Complex64>,
    pub time: f64,
}

impl SpinorField {
    pub fn zeros(n: usize, time: f64) -> Self {
        SpinorField {
            minus: vec![Complex64::new(0.0, 0.0); n],
            plus: vec![Complex64::new(0.0, 0.0); n],
            time,
        }
    }

    pub fn new(
        minus: Vec<Complex64>,
        plus: Vec<Complex64>,
        time: f64,
    ) -> Result<Self, LatticeError> {
        if minus.len() != plus.len() {
            return Err(LatticeError::LengthMismatch(minus.len(), plus.len()));
        }
        let f = SpinorField { minus, plus, time };
        f.check_finite()?;
        Ok(f)
    }

    pub fn n_sites(&self) -> usize {
        self.minus.len()
    }

    pub fn check_finite(&self) -> Result<(), LatticeError> {
        for (m, (a, b)) in self.minus.iter().zip(&self.plus).enumerate() {
            if !(a.re.is_finite() && a.im.is_finite() && b.re.is_finite() && b.im.is_finite()) {
                return Err(LatticeError::NonFinite(m));
            }
        }
        Ok(())
    }

    pub fn scale(&mut self, s: f64) {
        for z in self.minus.iter_mut().chain(self.plus.iter_mut()) {
            *z *= s;
        }
    }

    pub fn scaled(&self, s: f64) -> SpinorField {
        let mut out = self.clone();
        out.scale(s);
        out
    }

    /// `|psi_-|^2 + |psi_+|^2` at each site.
    pub fn density(&self) -> Vec<f64> {
        self.minus
            .iter()
            .zip(&self.plus)
            .map(|(a, b)| a.norm_sqr() + b.norm_sqr())
            .collect()
    }

    /// Walk amplitudes carry probability per site; dividing by `sqrt(dx)`
    /// turns them into a density comparable to a continuum field.
    pub fn to_density_amplitude(&self, dx: f64) -> SpinorField {
        self.scaled(1.0 / dx.sqrt())
    }

    pub fn from_density_amplitude(&self, dx: f64) -> SpinorField {
        self.scaled(dx.sqrt())
    }

    pub fn max_abs(&self) -> f64 {
        self.minus
            .iter()
            .chain(&self.plus)
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }
}

/// Raw sum of squared moduli, the walk's probability.
pub fn total_probability(f: &SpinorField) -> f64 {
    f.minus
        .iter()
        .zip(&f.plus)
        .map(|(a, b)| a.norm_sqr() + b.norm_sqr())
        .sum()
}

/// `dx`-weighted probability, the continuum norm.
pub fn weighted_probability(f: &SpinorField, dx: f64) -> f64 {
    dx * total_probability(f)
}

pub fn l2_distance(a: &SpinorField, b: &SpinorField, dx: f64) -> Result<f64, LatticeError> {
    if a.n_sites() != b.n_sites() {
        return Err(LatticeError::LengthMismatch(a.n_sites(), b.n_sites()));
    }
    let s: f64 = (0..a.n_sites())
        .map(|m| (a.minus[m] - b.minus[m]).norm_sqr() + (a.plus[m] - b.plus[m]).norm_sqr())
        .sum();
    Ok((dx * s).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProfileKind {
    #[default]
    GaussianPacket,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialProfile {
    pub kind: ProfileKind,
    pub center: f64,
    pub width: f64,
    pub wavenumber: f64,
    pub weights: (Complex64, Complex64),
}

impl InitialProfile {
    pub fn gaussian(center: f64, width: f64, wavenumber: f64, w_minus: Complex64, w_plus: Complex64) -> Self {
        InitialProfile {
            kind: ProfileKind::GaussianPacket,
            center,
            width,
            wavenumber,
            weights: (w_minus, w_plus),
        }
    }

    /// Unnormalized envelope at `x` for both components.
    pub fn raw(&self, x: f64) -> (Complex64, Complex64) {
        let d = x - self.center;
        let env = (-d * d / (2.0 * self.width * self.width)).exp();
        let phase = Complex64::from_polar(env, self.wavenumber * x);
        (self.weights.0 * phase, self.weights.1 * phase)
    }

    fn validate(&self, dx: f64) -> Result<(), LatticeError> {
        check_positive("width", self.width)?;
        if self.width < 2.0 * dx {
            return Err(LatticeError::UnresolvedPacket {
                width: self.width,
                min: 2.0 * dx,
            });
        }
        if self.weights.0.norm_sqr() == 0.0 && self.weights.1.norm_sqr() == 0.0 {
            return Err(LatticeError::ZeroWeights);
        }
        Ok(())
    }
}

/// Samples the packet on the grid and rescales so the raw probability is 1.
pub fn sample_initial(profile: &InitialProfile, grid: &GridSpec) -> Result<SpinorField, LatticeError> {
    sample_on_positions(profile, &grid.positions(), grid.dx, grid.t0)
}

pub(crate) fn sample_on_positions(
    profile: &InitialProfile,
    xs: &[f64],
    dx: f64,
    time: f64,
) -> Result<SpinorField, LatticeError> {
    profile.validate(dx)?;
    let (minus, plus): (Vec<_>, Vec<_>) = xs.iter().map(|&x| profile.raw(x)).unzip();
    let mut f = SpinorField { minus, plus, time };
    let p = total_probability(&f);
    if p == 0.0 {
        // packet lies entirely outside the grid
        return Err(LatticeError::ZeroWeights);
    }
    f.scale(1.0 / p.sqrt());
    Ok(f)
}

pub const SNAPSHOT_HEADER: &str = "t,x,re_psi_minus,im_psi_minus,re_psi_plus,im_psi_plus,prob_density";

/// Appends the rows of one snapshot. `dx` is the weight used to turn raw
/// probability into a density; pass 1.0 for fields that are already densities.
pub fn write_snapshot_rows<W: Write>(
    out: &mut W,
    f: &SpinorField,
    x0: f64,
    dx: f64,
    density_dx: f64,
) -> io::Result<()> {
    for m in 0..f.n_sites() {
        let a = f.minus[m];
        let b = f.plus[m];
        writeln!(
            out,
            "{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            f.time,
            x0 + m as f64 * dx,
            a.re,
            a.im,
            b.re,
            b.im,
            (a.norm_sqr() + b.norm_sqr()) / density_dx
        )?;
    }
    Ok(())
}

pub fn write_snapshots_csv<W: Write>(
    out: &mut W,
    snapshots: &[SpinorField],
    x0: f64,
    dx: f64,
    density_dx: f64,
) -> io::Result<()> {
    writeln!(out, "{SNAPSHOT_HEADER}")?;
    for f in snapshots {
        write_snapshot_rows(out, f, x0, dx, density_dx)?;
    }
    Ok(())
}
