//! Polyhedral conic functions and the acceptance regions they induce.
//!
//! Everything here uses the original sign convention: a point is accepted
//! when `f(x) ≤ 0`, boundary included. The model's tilde form is related by
//! `w̃ = −w`, `γ̃ = −γ`, `g = −f` (see [`crate::model::ConicHead::region`]).

use alloc::vec::Vec;

use rand::Rng as _;

use crate::error::{check_dim, Error, Result};
use crate::util::{all_finite, rng};

/// Largest dimension [`ConicRegion::halfspace_membership`] will enumerate.
pub const MAX_ENUMERATION_DIM: usize = 12;

/// Parameters `(s, w, γ, b)` of an extended polyhedral conic function.
#[derive(Debug, Clone, PartialEq)]
pub struct ConicRegion {
    s: Vec<f64>,
    w: Vec<f64>,
    gamma: Vec<f64>,
    b: f64,
}

/// Closed interval of a region along one coordinate axis through the vertex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extent {
    pub lo: f64,
    pub hi: f64,
}

impl Extent {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Monte Carlo volume estimate with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolumeEstimate {
    pub volume: f64,
    pub std_error: f64,
    pub box_volume: f64,
    pub inside: usize,
    pub samples: usize,
}

impl ConicRegion {
    pub fn new(s: Vec<f64>, w: Vec<f64>, gamma: Vec<f64>, b: f64) -> Result<Self> {
        if s.is_empty() {
            return Err(Error::Empty("region dimension"));
        }
        check_dim(s.len(), w.len())?;
        check_dim(s.len(), gamma.len())?;
        if !all_finite(&s) || !all_finite(&w) || !all_finite(&gamma) || !b.is_finite() {
            return Err(Error::NonFinite("conic region parameters"));
        }
        Ok(Self { s, w, gamma, b })
    }

    /// PCF with a scalar cone weight, stored as a constant `γ` vector.
    pub fn pcf(s: Vec<f64>, w: Vec<f64>, gamma: f64, b: f64) -> Result<Self> {
        let g = alloc::vec![gamma; s.len()];
        Self::new(s, w, g, b)
    }

    pub fn dim(&self) -> usize {
        self.s.len()
    }

    pub fn vertex(&self) -> &[f64] {
        &self.s
    }

    pub fn slope(&self) -> &[f64] {
        &self.w
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn offset(&self) -> f64 {
        self.b
    }

    /// `wᵀ(x − s) + γᵀ|x − s| − b`.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        let mut acc = 0.0;
        for i in 0..self.dim() {
            let u = x[i] - self.s[i];
            acc += self.w[i] * u + self.gamma[i] * libm::fabs(u);
        }
        Ok(acc - self.b)
    }

    /// Acceptance test `f(x) ≤ 0`.
    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        Ok(self.eval(x)? <= 0.0)
    }

    /// Bounded and convex iff `b > 0` and `|wᵢ| < γᵢ` with `γᵢ > 0` on every axis.
    pub fn is_bounded(&self) -> bool {
        self.b > 0.0 && self.w.iter().zip(&self.gamma).all(|(&w, &g)| g > 0.0 && libm::fabs(w) < g)
    }

    /// Interval of the region along each axis line through the vertex:
    /// `[sᵢ − b/(γᵢ − wᵢ), sᵢ + b/(γᵢ + wᵢ)]`.
    ///
    /// Because `f` is a sum of per-axis terms that are each non-negative on a
    /// bounded region, the box spanned by these intervals contains the whole
    /// region.
    pub fn axis_extents(&self) -> Result<Vec<Extent>> {
        if !self.is_bounded() {
            return Err(Error::Unbounded);
        }
        Ok((0..self.dim())
            .map(|i| {
                let (s, w, g) = (self.s[i], self.w[i], self.gamma[i]);
                Extent { lo: s - self.b / (g - w), hi: s + self.b / (g + w) }
            })
            .collect())
    }

    /// Monte Carlo estimate of the region's volume: uniform samples in the
    /// axis-extents bounding box, hit fraction times box volume.
    ///
    /// The box is loose for strongly skewed `w`, which only costs variance;
    /// estimates are meant for relative comparisons.
    pub fn mc_volume(&self, samples: usize, seed: u64) -> Result<VolumeEstimate> {
        if samples == 0 {
            return Err(Error::InvalidArgument("mc_volume needs at least one sample".into()));
        }
        let extents = self.axis_extents()?;
        let box_volume: f64 = extents.iter().map(Extent::width).product();
        let mut rng = rng(seed);
        let mut point = alloc::vec![0.0; self.dim()];
        let mut inside = 0usize;
        for _ in 0..samples {
            for (p, e) in point.iter_mut().zip(&extents) {
                *p = e.lo + (e.hi - e.lo) * rng.random::<f64>();
            }
            if self.eval(&point)? <= 0.0 {
                inside += 1;
            }
        }
        let n = samples as f64;
        let p = inside as f64 / n;
        Ok(VolumeEstimate {
            volume: p * box_volume,
            std_error: box_volume * libm::sqrt(p * (1.0 - p) / n),
            box_volume,
            inside,
            samples,
        })
    }

    /// Membership by explicit enumeration of the `2^d` half-spaces
    /// `wᵀ(x − s) + Σᵢ γᵢσᵢ(xᵢ − sᵢ) ≤ b`, one per sign pattern `σ`.
    ///
    /// With `γ > 0`, `f` is the maximum of these linear pieces, so the point
    /// is accepted iff every half-space holds. Test device; exponential in `d`.
    pub fn halfspace_membership(&self, x: &[f64]) -> Result<bool> {
        let d = self.dim();
        if d > MAX_ENUMERATION_DIM {
            return Err(Error::DimensionTooLarge { dim: d, max: MAX_ENUMERATION_DIM });
        }
        check_dim(d, x.len())?;
        if self.gamma.iter().any(|&g| g <= 0.0) {
            return Err(Error::InvalidArgument("half-space enumeration requires γᵢ > 0 on every axis".into()));
        }
        for pattern in 0u32..(1u32 << d) {
            let mut acc = 0.0;
            for i in 0..d {
                let u = x[i] - self.s[i];
                let sigma = if pattern & (1 << i) != 0 { 1.0 } else { -1.0 };
                acc += self.w[i] * u + self.gamma[i] * (sigma * u);
            }
            if acc - self.b > 0.0 {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// PCF value `wᵀ(x − s) + γ‖x − s‖₁ − b` with a scalar cone weight.
pub fn eval_pcf(s: &[f64], w: &[f64], gamma: f64, b: f64, x: &[f64]) -> Result<f64> {
    check_dim(s.len(), w.len())?;
    check_dim(s.len(), x.len())?;
    let mut acc = 0.0;
    for i in 0..s.len() {
        let u = x[i] - s[i];
        acc += w[i] * u + gamma * libm::fabs(u);
    }
    Ok(acc - b)
}
