use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform nodes `x_j = j h`, `h = ℓ / (n − 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub n: usize,
    pub ell: f64,
}

impl Grid {
    pub fn new(n: usize, ell: f64) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidParams(format!("grid needs at least 3 nodes, got {n}")));
        }
        if !(ell.is_finite() && ell > 0.0) {
            return Err(Error::InvalidParams(format!("domain length must be > 0, got {ell}")));
        }
        Ok(Self { n, ell })
    }

    pub fn h(&self) -> f64 {
        self.ell / (self.n - 1) as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        j as f64 * self.h()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.x(j)).collect()
    }

    /// Eigenvalue of `−Δ_h` for the cosine mode `cos(kπ x / ℓ)` sampled at the nodes.
    pub fn discrete_eigenvalue(&self, k: u32) -> f64 {
        let h = self.h();
        2.0 / (h * h) * (1.0 - (k as f64 * PI / (self.n - 1) as f64).cos())
    }

    pub fn cosine(&self, k: u32) -> Vec<f64> {
        (0..self.n).map(|j| (k as f64 * PI * j as f64 / (self.n - 1) as f64).cos()).collect()
    }

    /// Three-point Laplacian with reflected ghost nodes `φ_{−1} = φ_1`,
    /// `φ_n = φ_{n−2}`.
    pub fn laplacian(&self, phi: &[f64], out: &mut [f64]) {
        let n = self.n;
        let inv = 1.0 / (self.h() * self.h());
        out[0] = 2.0 * (phi[1] - phi[0]) * inv;
        for j in 1..n - 1 {
            out[j] = (phi[j - 1] - 2.0 * phi[j] + phi[j + 1]) * inv;
        }
        out[n - 1] = 2.0 * (phi[n - 2] - phi[n - 1]) * inv;
    }

    /// Trapezoid quadrature of nodal values.
    pub fn integrate(&self, f: impl Fn(usize) -> f64) -> f64 {
        let n = self.n;
        let inner: f64 = (1..n - 1).map(&f).sum();
        self.h() * (inner + 0.5 * (f(0) + f(n - 1)))
    }
}

/// Nodal densities of both species.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measures {
    pub v0: f64,
    pub u_l2: f64,
    pub v_l2: f64,
    pub u_min: f64,
    pub u_max: f64,
    pub v_min: f64,
    pub v_max: f64,
}

impl StateVector {
    pub fn homogeneous(n: usize, u: f64, v: f64) -> Self {
        Self { u: vec![u; n], v: vec![v; n] }
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    /// Unknowns in the solver ordering `(u_0, v_0, u_1, v_1, …)`.
    pub fn to_interleaved(&self) -> Vec<f64> {
        self.u.iter().zip(&self.v).flat_map(|(a, b)| [*a, *b]).collect()
    }

    pub fn from_interleaved(x: &[f64]) -> Self {
        Self { u: x.iter().step_by(2).copied().collect(), v: x.iter().skip(1).step_by(2).copied().collect() }
    }

    pub fn is_finite(&self) -> bool {
        self.u.iter().chain(&self.v).all(|x| x.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.u.iter().chain(&self.v).fold(0.0, |m, x| m.max(x.abs()))
    }

    /// `x ↦ ℓ − x`.
    pub fn mirrored(&self) -> Self {
        Self { u: self.u.iter().rev().copied().collect(), v: self.v.iter().rev().copied().collect() }
    }

    /// Smallest entry below `−tau`, if any.
    pub fn undershoot(&self, tau: f64) -> Option<f64> {
        let m = self.u.iter().chain(&self.v).fold(f64::INFINITY, |m, x| m.min(*x));
        (m < -tau).then_some(m)
    }

    pub fn measures(&self, grid: &Grid) -> Measures {
        let fold = |xs: &[f64]| {
            xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(*x), hi.max(*x)))
        };
        let (u_min, u_max) = fold(&self.u);
        let (v_min, v_max) = fold(&self.v);
        Measures {
            v0: self.v[0],
            u_l2: grid.integrate(|j| self.u[j] * self.u[j]).sqrt(),
            v_l2: grid.integrate(|j| self.v[j] * self.v[j]).sqrt(),
            u_min,
            u_max,
            v_min,
            v_max,
        }
    }

    /// Index of the cosine mode carrying the largest share of `u − mean(u)`.
    pub fn dominant_mode(&self, grid: &Grid) -> u32 {
        let mean = grid.integrate(|j| self.u[j]) / grid.ell;
        (1..grid.n as u32)
            .map(|k| {
                let c = grid.cosine(k);
                (k, grid.integrate(|j| (self.u[j] - mean) * c[j]).abs())
            })
            .fold((0, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best })
            .0
    }
}
