//! Bilinear pseudodifferential operators on the line, via the discrete Fourier
//! transform of the window with a frequency cutoff.

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::MeshFunction;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SymbolClass {
    /// `S^0_{1,0}`: bounded, not compact in general.
    S,
    /// Decays in `x` and in frequency.
    K,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Symbol {
    /// `sigma = 1`, the pointwise product.
    Unit,
    /// `e^{-x^2 - xi^2 - eta^2}`.
    Gaussian,
    /// `e^{-((xi - c_1)/w_1)^2 - ((eta - c_2)/w_2)^2}`.
    GaussianBumps { center: [f64; 2], width: [f64; 2] },
    /// `e^{-x^2} e^{-(xi^2 + xi eta + eta^2)/w^2}`.
    Coupled { width: f64 },
}

impl Symbol {
    pub fn name(&self) -> &'static str {
        match self {
            Symbol::Unit => "unit",
            Symbol::Gaussian => "gaussian",
            Symbol::GaussianBumps { .. } => "gaussian-bumps",
            Symbol::Coupled { .. } => "coupled",
        }
    }

    pub fn class(&self) -> SymbolClass {
        match self {
            Symbol::Unit | Symbol::GaussianBumps { .. } => SymbolClass::S,
            Symbol::Gaussian | Symbol::Coupled { .. } => SymbolClass::K,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Symbol::GaussianBumps { width, .. } if width.iter().any(|w| !(*w > 0.0)) => {
                Err(Error::config("bump widths must be positive"))
            }
            Symbol::Coupled { width } if !(width > 0.0) => Err(Error::config("coupling width must be positive")),
            _ => Ok(()),
        }
    }

    fn x_part(&self, x: f64) -> f64 {
        match self {
            Symbol::Gaussian | Symbol::Coupled { .. } => (-x * x).exp(),
            _ => 1.0,
        }
    }

    /// Frequency factor in one slot, when the frequency part splits.
    fn marginal(&self, slot: usize, xi: f64) -> Option<f64> {
        match *self {
            Symbol::Unit => Some(1.0),
            Symbol::Gaussian => Some((-xi * xi).exp()),
            Symbol::GaussianBumps { center, width } => Some((-((xi - center[slot]) / width[slot]).powi(2)).exp()),
            Symbol::Coupled { .. } => None,
        }
    }

    fn freq(&self, xi: f64, eta: f64) -> f64 {
        match *self {
            Symbol::Coupled { width } => (-(xi * xi + xi * eta + eta * eta) / (width * width)).exp(),
            _ => self.marginal(0, xi).unwrap() * self.marginal(1, eta).unwrap(),
        }
    }

    pub fn eval(&self, x: f64, xi: f64, eta: f64) -> f64 {
        self.x_part(x) * self.freq(xi, eta)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PseudodiffOperator {
    pub symbol: Symbol,
    /// Frequencies `|xi| <= cutoff` are kept.
    pub cutoff: f64,
}

/// Signed frequency of DFT bin `b`.
fn signed(b: usize, w: usize) -> i64 {
    if b <= w / 2 {
        b as i64
    } else {
        b as i64 - w as i64
    }
}

struct Spectrum {
    w: usize,
    period: f64,
    bins: Vec<usize>,
    f1: Vec<Complex64>,
    f2: Vec<Complex64>,
}

fn fft(values: &[f64], inverse: bool) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut planner = FftPlanner::new();
    let plan = if inverse { planner.plan_fft_inverse(buf.len()) } else { planner.plan_fft_forward(buf.len()) };
    plan.process(&mut buf);
    buf
}

fn ifft(mut buf: Vec<Complex64>) -> Vec<Complex64> {
    let mut planner = FftPlanner::new();
    planner.plan_fft_inverse(buf.len()).process(&mut buf);
    buf
}

/// Share of the energy of `f` at frequencies above `cutoff`.
pub fn out_of_band_fraction(f: &MeshFunction, cutoff: f64) -> Result<f64> {
    let grid = f.grid();
    if grid.n() != 1 {
        return Err(Error::Unsupported("spectral cutoffs are implemented in one dimension".into()));
    }
    let w = grid.width();
    let period = 2f64.powi(grid.window_exp() + 1);
    let spec = fft(f.values(), false);
    let total: f64 = spec.iter().map(|c| c.norm_sqr()).sum();
    if total == 0.0 {
        return Ok(0.0);
    }
    let out: f64 = (0..w).filter(|&b| signed(b, w).abs() as f64 / period > cutoff).map(|b| spec[b].norm_sqr()).sum();
    Ok(out / total)
}

impl PseudodiffOperator {
    fn spectrum(&self, f1: &MeshFunction, f2: &MeshFunction) -> Result<Spectrum> {
        f1.check_same(f2)?;
        self.symbol.validate()?;
        let grid = f1.grid();
        if grid.n() != 1 {
            return Err(Error::Unsupported("pseudodifferential operators are implemented in one dimension".into()));
        }
        let w = grid.width();
        let period = 2f64.powi(grid.window_exp() + 1);
        let nyquist = 0.5 / grid.cell_side();
        if !(self.cutoff > 0.0) || self.cutoff > nyquist {
            return Err(Error::resolution(format!("cutoff {} outside (0, {nyquist}]", self.cutoff)));
        }
        let bins = (0..w).filter(|&b| signed(b, w).abs() as f64 / period <= self.cutoff).collect();
        let norm = 1.0 / w as f64;
        let scale = |v: Vec<Complex64>| v.into_iter().map(|c| c * norm).collect::<Vec<_>>();
        Ok(Spectrum { w, period, bins, f1: scale(fft(f1.values(), false)), f2: scale(fft(f2.values(), false)) })
    }

    pub fn apply(&self, f1: &MeshFunction, f2: &MeshFunction) -> Result<MeshFunction> {
        let sp = self.spectrum(f1, f2)?;
        let Spectrum { w, period, ref bins, .. } = sp;
        let xi = |b: usize| signed(b, w) as f64 / period;
        let out: Vec<Complex64> = if self.symbol.marginal(0, 0.0).is_some() {
            let side = |slot: usize, f: &[Complex64]| {
                let mut buf = vec![Complex64::new(0.0, 0.0); w];
                for &b in bins {
                    buf[b] = f[b] * self.symbol.marginal(slot, xi(b)).unwrap();
                }
                ifft(buf)
            };
            let g1 = side(0, &sp.f1);
            let g2 = side(1, &sp.f2);
            g1.iter().zip(&g2).map(|(a, b)| a * b).collect()
        } else {
            let mut grouped = vec![Complex64::new(0.0, 0.0); w];
            for &b1 in bins {
                for &b2 in bins {
                    grouped[(b1 + b2) % w] += sp.f1[b1] * sp.f2[b2] * self.symbol.freq(xi(b1), xi(b2));
                }
            }
            ifft(grouped)
        };
        let values = out.iter().enumerate().map(|(j, c)| c.re * self.symbol.x_part(f1.cell_center(j)[0])).collect();
        MeshFunction::from_values(f1.grid(), values)
    }

    /// The defining double sum evaluated point by point.
    pub fn apply_direct(&self, f1: &MeshFunction, f2: &MeshFunction) -> Result<MeshFunction> {
        let sp = self.spectrum(f1, f2)?;
        let Spectrum { w, period, ref bins, .. } = sp;
        let tau = std::f64::consts::TAU;
        let values = (0..w)
            .into_par_iter()
            .map(|j| {
                let x = f1.cell_center(j)[0];
                let mut s = Complex64::new(0.0, 0.0);
                for &b1 in bins {
                    for &b2 in bins {
                        let (k1, k2) = (signed(b1, w), signed(b2, w));
                        let phase = Complex64::from_polar(1.0, tau * ((k1 + k2) * j as i64) as f64 / w as f64);
                        let sig = self.symbol.eval(x, k1 as f64 / period, k2 as f64 / period);
                        s += sp.f1[b1] * sp.f2[b2] * phase * sig;
                    }
                }
                s.re
            })
            .collect();
        MeshFunction::from_values(f1.grid(), values)
    }
}
