//! The standard normal restricted to an interval `(lower, upper)`.
//!
//! Moments use the usual closed forms in terms of `pdf(lower) / Z` and
//! `pdf(upper) / Z`, where `Z` is the interval's mass. Those ratios are
//! formed without dividing two tiny numbers:
//!
//! * intervals are first mirrored so that `lower + upper >= 0`;
//! * if the whole interval sits on the right of zero, `Z / pdf(lower)` is
//!   written through Mills ratios, which stay well scaled deep in the tail;
//! * intervals straddling zero get `Z` as a sum of two `erf` terms;
//! * short intervals, over which the density changes by a bounded factor,
//!   are integrated directly with 20-point Gauss–Legendre about their
//!   midpoint; there the closed forms lose relative accuracy to
//!   cancellation.

use alloc::vec::Vec;

use rand::distributions::Open01;
use rand::Rng;
use rand_distr::Exp1;

use crate::error::{Error, Result};
use crate::quadrature;
use crate::special::{self, ln_pdf, mills_ratio, pdf};

/// Intervals narrower than this may be integrated numerically...
pub const NARROW_WIDTH: f64 = 0.25;
/// ...provided `width * max(|lower|, |upper|)` stays below this.
pub const NARROW_SPREAD: f64 = 8.0;
/// Smallest acceptance probability treated as representable.
pub const MIN_ACCEPTANCE: f64 = 1e-300;
/// Below this acceptance probability the sampler switches from inverse-CDF to
/// rejection.
pub const INVERSE_CDF_MIN_ACCEPTANCE: f64 = 1e-3;
/// Where the quadrature oracle cuts off infinite tails.
pub const ORACLE_TAIL: f64 = 40.0;
/// Absolute accuracy targeted by the quadrature oracle.
pub const ORACLE_TOLERANCE: f64 = 1e-12;

const LN_MIN_ACCEPTANCE: f64 = -690.775_527_898_213_7;

/// A standardized truncation interval; either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    lower: f64,
    upper: f64,
}

impl Bounds {
    pub const UNBOUNDED: Bounds = Bounds {
        lower: f64::NEG_INFINITY,
        upper: f64::INFINITY,
    };

    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        // also rejects NaN
        if !(lower < upper) {
            return Err(Error::InvalidBounds { lower, upper });
        }
        Ok(Bounds { lower, upper })
    }

    /// `(-half_width, half_width)`.
    pub fn symmetric(half_width: f64) -> Result<Self> {
        Bounds::new(-half_width, half_width)
    }

    #[inline]
    pub fn lower(&self) -> f64 {
        self.lower
    }

    #[inline]
    pub fn upper(&self) -> f64 {
        self.upper
    }

    #[inline]
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn is_finite(&self) -> bool {
        self.lower.is_finite() && self.upper.is_finite()
    }

    /// Midpoint of a finite interval.
    pub fn midpoint(&self) -> Option<f64> {
        self.is_finite().then_some(0.5 * (self.lower + self.upper))
    }

    pub fn contains(&self, z: f64) -> bool {
        self.lower <= z && z <= self.upper
    }

    /// `(lower - x, upper - x)`: the bounds seen by noise around a generator at `x`.
    pub fn shifted(&self, x: f64) -> Result<Self> {
        Bounds::new(self.lower - x, self.upper - x)
    }

    /// `(-upper, -lower)`.
    pub fn mirrored(&self) -> Self {
        Bounds {
            lower: -self.upper,
            upper: -self.lower,
        }
    }
}

/// Mean shift, variance factor and third central moment of the truncated
/// standard normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
}

impl Moments {
    pub const STANDARD: Moments = Moments {
        m1: 0.0,
        m2: 1.0,
        m3: 0.0,
    };

    fn mirrored(self) -> Self {
        Moments {
            m1: -self.m1,
            m2: self.m2,
            m3: -self.m3,
        }
    }
}

/// Bounds reduced to `lower + upper >= 0`, plus the quantities every closed
/// form needs.
struct Canonical {
    flipped: bool,
    lower: f64,
    upper: f64,
    form: Form,
}

enum Form {
    /// `pdf(lower) / Z`, `pdf(upper) / Z` and `ln Z`.
    Ratios {
        at_lower: f64,
        at_upper: f64,
        ln_mass: f64,
    },
    Narrow,
}

impl Canonical {
    fn new(bounds: Bounds) -> Self {
        let width = bounds.width();
        let reach = bounds.lower.abs().max(bounds.upper.abs());
        Canonical::with_form(bounds, width < NARROW_WIDTH && width * reach <= NARROW_SPREAD)
    }

    fn with_form(bounds: Bounds, narrow: bool) -> Self {
        let (flipped, b) = if bounds.lower + bounds.upper < 0.0 {
            (true, bounds.mirrored())
        } else {
            (false, bounds)
        };
        let (lower, upper) = (b.lower, b.upper);
        if narrow {
            return Canonical {
                flipped,
                lower,
                upper,
                form: Form::Narrow,
            };
        }
        let form = if lower >= 0.0 {
            // Z / pdf(lower) = R(lower) - e * R(upper), e = pdf(upper) / pdf(lower)
            let e = if upper.is_infinite() {
                0.0
            } else {
                libm::exp(-0.5 * (upper - lower) * (upper + lower))
            };
            let scaled = mills_ratio(lower) - e * mills_ratio(upper);
            Form::Ratios {
                at_lower: 1.0 / scaled,
                at_upper: e / scaled,
                ln_mass: ln_pdf(lower) + libm::log(scaled),
            }
        } else {
            // straddles zero: two positive erf halves, no cancellation
            let mass = 0.5 * (special::central_mass(upper) + special::central_mass(-lower));
            Form::Ratios {
                at_lower: pdf(lower) / mass,
                at_upper: pdf(upper) / mass,
                ln_mass: libm::log(mass),
            }
        };
        Canonical {
            flipped,
            lower,
            upper,
            form,
        }
    }

    fn ln_mass(&self) -> f64 {
        match self.form {
            Form::Ratios { ln_mass, .. } => ln_mass,
            Form::Narrow => narrow_integrals(self.lower, self.upper).ln_mass,
        }
    }

    fn moments(&self) -> Moments {
        let (lo, hi) = (self.lower, self.upper);
        let m = match self.form {
            Form::Ratios {
                at_lower: pa,
                at_upper: pb,
                ..
            } => {
                let m1 = pa - pb;
                // x * pdf(x) / Z with the infinite ends dropped
                let xa = if lo.is_infinite() { 0.0 } else { lo * pa };
                let xb = if hi.is_infinite() { 0.0 } else { hi * pb };
                let m2 = 1.0 + xa - xb - m1 * m1;
                let qa = if lo.is_infinite() {
                    0.0
                } else {
                    (lo * lo - 1.0) * pa
                };
                let qb = if hi.is_infinite() {
                    0.0
                } else {
                    (hi * hi - 1.0) * pb
                };
                let d = pb - pa;
                let m3 = -(qb - qa) - 3.0 * d * (xb - xa) - 2.0 * d * d * d;
                Moments { m1, m2, m3 }
            }
            Form::Narrow => narrow_integrals(lo, hi).moments,
        };
        if self.flipped {
            m.mirrored()
        } else {
            m
        }
    }
}

// 20-point Gauss–Legendre on [-1, 1]; positive nodes, matching weights.
const GL_NODES: [f64; 10] = [
    0.076_526_521_133_497_33,
    0.227_785_851_141_645_08,
    0.373_706_088_715_419_56,
    0.510_867_001_950_827_1,
    0.636_053_680_726_515,
    0.746_331_906_460_150_8,
    0.839_116_971_822_218_8,
    0.912_234_428_251_325_9,
    0.963_971_927_277_913_8,
    0.993_128_599_185_094_9,
];
const GL_WEIGHTS: [f64; 10] = [
    0.152_753_387_130_725_85,
    0.149_172_986_472_603_75,
    0.142_096_109_318_382_05,
    0.131_688_638_449_176_63,
    0.118_194_531_961_518_42,
    0.101_930_119_817_240_44,
    0.083_276_741_576_704_75,
    0.062_672_048_334_109_06,
    0.040_601_429_800_386_94,
    0.017_614_007_139_152_118,
];

struct NarrowIntegrals {
    moments: Moments,
    ln_mass: f64,
}

fn narrow_integrals(lower: f64, upper: f64) -> NarrowIntegrals {
    let centre = 0.5 * (lower + upper);
    let half = 0.5 * (upper - lower);
    // density relative to pdf(centre), as a function of the offset t = z - centre
    let mut nodes = [(0.0f64, 0.0f64); 20];
    for (i, (&x, &w)) in GL_NODES.iter().zip(GL_WEIGHTS.iter()).enumerate() {
        for (slot, t) in [(2 * i, -half * x), (2 * i + 1, half * x)] {
            let g = libm::exp(-0.5 * t * (2.0 * centre + t));
            nodes[slot] = (t, w * g);
        }
    }
    let mass: f64 = nodes.iter().map(|&(_, wg)| wg).sum();
    let shift = nodes.iter().map(|&(t, wg)| t * wg).sum::<f64>() / mass;
    let (mut c2, mut c3) = (0.0, 0.0);
    for &(t, wg) in &nodes {
        let d = t - shift;
        c2 += d * d * wg;
        c3 += d * d * d * wg;
    }
    NarrowIntegrals {
        moments: Moments {
            m1: centre + shift,
            m2: c2 / mass,
            m3: c3 / mass,
        },
        ln_mass: libm::log(half * mass) + ln_pdf(centre),
    }
}

fn check_representable(bounds: Bounds, ln_mass: f64) -> Result<()> {
    if ln_mass < LN_MIN_ACCEPTANCE || ln_mass.is_nan() {
        return Err(Error::Degenerate {
            lower: bounds.lower,
            upper: bounds.upper,
        });
    }
    Ok(())
}

/// `m1`, `m2`, `m3` of the standard normal truncated to `bounds`.
pub fn std_moments(bounds: Bounds) -> Result<Moments> {
    if bounds == Bounds::UNBOUNDED {
        return Ok(Moments::STANDARD);
    }
    let canonical = Canonical::new(bounds);
    check_representable(bounds, canonical.ln_mass())?;
    Ok(canonical.moments())
}

/// Mean and variance of `N(mu, sigma^2)` truncated to `(a, b)`.
pub fn shifted_moments(mu: f64, sigma: f64, a: f64, b: f64) -> Result<(f64, f64)> {
    if !(sigma > 0.0) {
        return Err(Error::invalid("sigma", "must be positive"));
    }
    let bounds = Bounds::new((a - mu) / sigma, (b - mu) / sigma)?;
    let m = std_moments(bounds)?;
    Ok((mu + sigma * m.m1, sigma * sigma * m.m2))
}

/// `Phi(upper) - Phi(lower)`.
pub fn acceptance_probability(bounds: Bounds) -> Result<f64> {
    if bounds == Bounds::UNBOUNDED {
        return Ok(1.0);
    }
    let canonical = Canonical::new(bounds);
    let ln_mass = canonical.ln_mass();
    check_representable(bounds, ln_mass)?;
    let p = match canonical.form {
        Form::Ratios { at_lower, .. } if (0.0..37.0).contains(&canonical.lower) => {
            pdf(canonical.lower) / at_lower
        }
        _ => libm::exp(ln_mass),
    };
    Ok(p.min(1.0))
}

/// Draws from the standard normal restricted to a fixed interval.
///
/// Intervals holding at least [`INVERSE_CDF_MIN_ACCEPTANCE`] of the mass use
/// the inverse CDF on an open uniform, evaluated from whichever tail keeps
/// the target probability below one half. Thinner intervals use rejection:
/// a translated-exponential proposal in the tail, or a uniform proposal when
/// the interval is too short for the exponential to pay off.
#[derive(Debug, Clone, Copy)]
pub struct TruncatedSampler {
    flipped: bool,
    lower: f64,
    upper: f64,
    method: Method,
}

#[derive(Debug, Clone, Copy)]
enum Method {
    /// `lower >= 0`: invert the upper tail, `Q(z) = Q(lower) - u * mass`.
    UpperTail { sf_lower: f64, mass: f64 },
    /// Straddles zero.
    Inverse {
        cdf_lower: f64,
        sf_upper: f64,
        mass: f64,
    },
    /// Uniform proposal, accepted with `exp((anchor^2 - z^2) / 2)`.
    Uniform { anchor: f64 },
    /// `lower + Exp(rate)` proposal.
    Exponential { rate: f64 },
}

impl TruncatedSampler {
    pub fn new(bounds: Bounds) -> Result<Self> {
        let probability = acceptance_probability(bounds)?;
        let (flipped, b) = if bounds.lower + bounds.upper < 0.0 {
            (true, bounds.mirrored())
        } else {
            (false, bounds)
        };
        let (lower, upper) = (b.lower, b.upper);
        let method = if probability >= INVERSE_CDF_MIN_ACCEPTANCE {
            if lower >= 0.0 {
                Method::UpperTail {
                    sf_lower: special::sf(lower),
                    mass: probability,
                }
            } else {
                Method::Inverse {
                    cdf_lower: special::cdf(lower),
                    sf_upper: special::sf(upper),
                    mass: probability,
                }
            }
        } else if lower < 0.0 {
            // thin interval around zero
            Method::Uniform { anchor: 0.0 }
        } else {
            let root = libm::sqrt(lower * lower + 4.0);
            let uniform_cutoff = 2.0 * libm::sqrt(core::f64::consts::E) / (lower + root)
                * libm::exp(0.25 * (lower * lower - lower * root));
            if upper - lower <= uniform_cutoff {
                Method::Uniform { anchor: lower }
            } else {
                Method::Exponential {
                    rate: 0.5 * (lower + root),
                }
            }
        };
        Ok(TruncatedSampler {
            flipped,
            lower,
            upper,
            method,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z = match self.method {
            Method::UpperTail { sf_lower, mass } => {
                let u: f64 = rng.sample(Open01);
                -special::inv_cdf(sf_lower - u * mass)
            }
            Method::Inverse {
                cdf_lower,
                sf_upper,
                mass,
            } => {
                let u: f64 = rng.sample(Open01);
                let p = cdf_lower + u * mass;
                if p <= 0.5 {
                    special::inv_cdf(p)
                } else {
                    -special::inv_cdf(sf_upper + (1.0 - u) * mass)
                }
            }
            Method::Uniform { anchor } => loop {
                let u: f64 = rng.sample(Open01);
                let z = self.lower + u * (self.upper - self.lower);
                let accept: f64 = rng.sample(Open01);
                if accept <= libm::exp(0.5 * (anchor - z) * (anchor + z)) {
                    break z;
                }
            },
            Method::Exponential { rate } => loop {
                let e: f64 = rng.sample(Exp1);
                let z = self.lower + e / rate;
                if z > self.upper {
                    continue;
                }
                let accept: f64 = rng.sample(Open01);
                let d = z - rate;
                if accept <= libm::exp(-0.5 * d * d) {
                    break z;
                }
            },
        };
        let z = z.clamp(self.lower, self.upper);
        if self.flipped {
            -z
        } else {
            z
        }
    }

    /// Sum of `count` independent draws, accumulated in draw order.
    pub fn sum<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> f64 {
        (0..count).map(|_| self.sample(rng)).sum()
    }
}

/// `count` i.i.d. draws from the standard normal truncated to `bounds`.
pub fn sample_truncated<R: Rng + ?Sized>(bounds: Bounds, count: usize, rng: &mut R) -> Result<Vec<f64>> {
    let sampler = TruncatedSampler::new(bounds)?;
    Ok((0..count).map(|_| sampler.sample(rng)).collect())
}

/// Moments by adaptive quadrature of the truncated density.
///
/// The density is integrated relative to its value at the point of the
/// interval closest to zero; infinite ends are cut [`ORACLE_TAIL`] standard
/// units beyond that point (at `|z| = 40` for the usual case). Each integral
/// is driven to [`ORACLE_TOLERANCE`] times the interval mass, so the moments
/// themselves carry that absolute accuracy.
pub fn quadrature_moments(bounds: Bounds) -> Result<Moments> {
    let lower = if bounds.lower.is_finite() {
        bounds.lower
    } else {
        (-ORACLE_TAIL).min(bounds.upper - ORACLE_TAIL)
    };
    let upper = if bounds.upper.is_finite() {
        bounds.upper
    } else {
        ORACLE_TAIL.max(bounds.lower + ORACLE_TAIL)
    };
    let anchor = 0.0f64.clamp(lower, upper);
    let density = |z: f64| libm::exp(-0.5 * (z - anchor) * (z + anchor));

    // rough mass first, to turn the absolute target on the moments into a
    // target on each raw integral
    let rough = quadrature::integrate(density, lower, upper, 1e-6 * (upper - lower))?;
    let tol = ORACLE_TOLERANCE * rough;
    let mass = quadrature::integrate(density, lower, upper, tol)?;
    let mean = quadrature::integrate(|z| z * density(z), lower, upper, tol)? / mass;
    let c2 = quadrature::integrate(
        |z| {
            let d = z - mean;
            d * d * density(z)
        },
        lower,
        upper,
        tol,
    )?;
    let c3 = quadrature::integrate(
        |z| {
            let d = z - mean;
            d * d * d * density(z)
        },
        lower,
        upper,
        tol,
    )?;
    if !(mass > 0.0) {
        return Err(Error::Degenerate {
            lower: bounds.lower,
            upper: bounds.upper,
        });
    }
    Ok(Moments {
        m1: mean,
        m2: c2 / mass,
        m3: c3 / mass,
    })
}
