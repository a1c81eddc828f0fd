//! Univariate and bivariate Gaussian kernels.
//!
//! The bivariate CDF follows Genz's reduction of Drezner and Wesolowsky's
//! single-integral form, evaluated with Gauss-Legendre rules of order 6, 12
//! or 20 depending on |rho|. Rectangle probabilities are assembled from
//! orthant probabilities so that half-open regions never go through
//! `1 - Phi(..)` style cancellation.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TWO_PI: f64 = 2.0 * PI;
const LN_TWO_PI: f64 = 1.837_877_066_409_345_3;

/// Standard normal density.
pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (TWO_PI).sqrt()
}

/// Standard normal CDF. Saturates to 0 / 1 at the infinities.
pub fn std_normal_cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Inverse of [`std_normal_cdf`] on the open unit interval.
///
/// Wichura's AS 241 rational approximation followed by one Halley step.
#[allow(clippy::excessive_precision)]
pub fn std_normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!(
            "quantile requires 0 < p < 1, got {p}"
        )));
    }
    let q = p - 0.5;
    let mut x = if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        q * poly(
            r,
            &[
                3.387_132_872_796_366_608,
                1.331_416_678_917_843_774_5e2,
                1.971_590_950_306_551_442_7e3,
                1.373_169_376_550_946_112_5e4,
                4.592_195_393_154_987_145_7e4,
                6.726_577_092_700_870_085_3e4,
                3.343_057_558_358_812_810_5e4,
                2.509_080_928_730_122_672_7e3,
            ],
        ) / poly(
            r,
            &[
                1.0,
                4.231_333_070_160_091_125_2e1,
                6.871_870_074_920_579_083e2,
                5.394_196_021_424_751_107_7e3,
                2.121_379_430_158_659_586_7e4,
                3.930_789_580_009_271_061e4,
                2.872_908_573_572_194_267_4e4,
                5.226_495_278_852_854_561e3,
            ],
        )
    } else {
        let tail = if q < 0.0 { p } else { 1.0 - p };
        let mut r = (-tail.ln()).sqrt();
        let v = if r <= 5.0 {
            r -= 1.6;
            poly(
                r,
                &[
                    1.423_437_110_749_683_577_34,
                    4.630_337_846_156_545_295_9,
                    5.769_497_221_460_691_405_5,
                    3.647_848_324_763_204_605_04,
                    1.270_458_252_452_368_382_58,
                    2.417_807_251_774_506_117_7e-1,
                    2.272_384_498_926_918_458_33e-2,
                    7.745_450_142_783_414_076_4e-4,
                ],
            ) / poly(
                r,
                &[
                    1.0,
                    2.053_191_626_637_758_821_87,
                    1.676_384_830_183_803_849_4,
                    6.897_673_349_851_000_045_5e-1,
                    1.481_039_764_274_800_745_9e-1,
                    1.519_866_656_361_645_719_66e-2,
                    5.475_938_084_995_344_946e-4,
                    1.050_750_071_644_416_843_24e-9,
                ],
            )
        } else {
            r -= 5.0;
            poly(
                r,
                &[
                    6.657_904_643_501_103_777_2,
                    5.463_784_911_164_114_369_9,
                    1.784_826_539_917_291_335_8,
                    2.965_605_718_285_048_912_3e-1,
                    2.653_218_952_657_612_309_3e-2,
                    1.242_660_947_388_078_438_6e-3,
                    2.711_555_568_743_487_578_15e-5,
                    2.010_334_399_292_288_132_65e-7,
                ],
            ) / poly(
                r,
                &[
                    1.0,
                    5.998_322_065_558_879_376_9e-1,
                    1.369_298_809_227_358_053_1e-1,
                    1.487_536_129_085_061_485_25e-2,
                    7.868_691_311_456_132_591e-4,
                    1.846_318_317_510_054_681_8e-5,
                    1.421_511_758_316_445_888_7e-7,
                    2.044_263_103_389_939_785_64e-15,
                ],
            )
        };
        if q < 0.0 {
            -v
        } else {
            v
        }
    };
    // Halley refinement against the erfc-based CDF.
    let e = if x < 0.0 {
        std_normal_cdf(x) - p
    } else {
        (1.0 - p) - std_normal_cdf(-x)
    };
    let u = e * (TWO_PI).sqrt() * (0.5 * x * x).exp();
    if u.is_finite() {
        x -= u / (1.0 + 0.5 * x * u);
    }
    Ok(x)
}

fn poly(x: f64, coef: &[f64]) -> f64 {
    coef.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

// Gauss-Legendre abscissae (negative half) and weights for 6, 12 and 20 points.
const GL6_X: [f64; 3] = [
    -0.932_469_514_203_152_2,
    -0.661_209_386_466_264_7,
    -0.238_619_186_083_197,
];
const GL6_W: [f64; 3] = [
    0.171_324_492_379_170_5,
    0.360_761_573_048_138_4,
    0.467_913_934_572_690_4,
];
const GL12_X: [f64; 6] = [
    -0.981_560_634_246_719_1,
    -0.904_117_256_370_475,
    -0.769_902_674_194_305,
    -0.587_317_954_286_617_1,
    -0.367_831_498_998_180_2,
    -0.125_233_408_511_469_2,
];
const GL12_W: [f64; 6] = [
    0.047_175_336_386_511_77,
    0.106_939_325_995_318_3,
    0.160_078_328_543_346_4,
    0.203_167_426_723_065_9,
    0.233_492_536_538_354_7,
    0.249_147_045_813_402_9,
];
#[allow(clippy::excessive_precision)]
const GL20_X: [f64; 10] = [
    -0.993_128_599_185_094_9,
    -0.963_971_927_277_913_8,
    -0.912_234_428_251_325_9,
    -0.839_116_971_822_218_8,
    -0.746_331_906_460_150_8,
    -0.636_053_680_726_515,
    -0.510_867_001_950_827_1,
    -0.373_706_088_715_419_6,
    -0.227_785_851_141_645_1,
    -0.076_526_521_133_497_33,
];
const GL20_W: [f64; 10] = [
    0.017_614_007_139_152_12,
    0.040_601_429_800_386_94,
    0.062_672_048_334_109_06,
    0.083_276_741_576_704_75,
    0.101_930_119_817_240_4,
    0.118_194_531_961_518_4,
    0.131_688_638_449_176_6,
    0.142_096_109_318_382_1,
    0.149_172_986_472_603_7,
    0.152_753_387_130_725_9,
];

/// P(X > h, Y > k) for standard bivariate normal with correlation `r`, |r| < 1.
fn bvn_upper(h: f64, k: f64, r: f64) -> f64 {
    if h == f64::INFINITY || k == f64::INFINITY {
        return 0.0;
    }
    if h == f64::NEG_INFINITY {
        return if k == f64::NEG_INFINITY {
            1.0
        } else {
            std_normal_cdf(-k)
        };
    }
    if k == f64::NEG_INFINITY {
        return std_normal_cdf(-h);
    }
    if r == 0.0 {
        return std_normal_cdf(-h) * std_normal_cdf(-k);
    }
    let (xs, ws): (&[f64], &[f64]) = if r.abs() < 0.3 {
        (&GL6_X, &GL6_W)
    } else if r.abs() < 0.75 {
        (&GL12_X, &GL12_W)
    } else {
        (&GL20_X, &GL20_W)
    };
    let mut k = k;
    let mut hk = h * k;
    let mut bvn = 0.0;
    if r.abs() < 0.925 {
        let hs = (h * h + k * k) / 2.0;
        let asr = r.asin();
        for (x, w) in xs.iter().zip(ws) {
            for t in [x + 1.0, -x + 1.0] {
                let sn = (asr * t / 2.0).sin();
                bvn += w * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
            }
        }
        bvn * asr / (2.0 * TWO_PI) + std_normal_cdf(-h) * std_normal_cdf(-k)
    } else {
        if r < 0.0 {
            k = -k;
            hk = -hk;
        }
        let as_ = (1.0 - r) * (1.0 + r);
        let mut a = as_.sqrt();
        let bs = (h - k) * (h - k);
        let c = (4.0 - hk) / 8.0;
        let d = (12.0 - hk) / 16.0;
        bvn = a
            * (-(bs / as_ + hk) / 2.0).exp()
            * (1.0 - c * (bs - as_) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as_ * as_ / 5.0);
        if hk > -160.0 {
            let b = bs.sqrt();
            bvn -= (-hk / 2.0).exp()
                * TWO_PI.sqrt()
                * std_normal_cdf(-b / a)
                * b
                * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
        }
        a /= 2.0;
        for (x, w) in xs.iter().zip(ws) {
            let xs1 = (a * (x + 1.0)).powi(2);
            let rs1 = (1.0 - xs1).sqrt();
            bvn += a
                * w
                * ((-bs / (2.0 * xs1) - hk / (1.0 + rs1)).exp() / rs1
                    - (-(bs / xs1 + hk) / 2.0).exp() * (1.0 + c * xs1 * (1.0 + d * xs1)));
            let xs2 = as_ * (1.0 - x).powi(2) / 4.0;
            let rs2 = (1.0 - xs2).sqrt();
            bvn += a
                * w
                * (-(bs / xs2 + hk) / 2.0).exp()
                * ((-hk * xs2 / (2.0 * (1.0 + rs2).powi(2))).exp() / rs2
                    - (1.0 + c * xs2 * (1.0 + d * xs2)));
        }
        bvn = -bvn / TWO_PI;
        if r > 0.0 {
            bvn + std_normal_cdf(-h.max(k))
        } else {
            -bvn + (std_normal_cdf(-h) - std_normal_cdf(-k)).max(0.0)
        }
    }
}

/// P(Z1 <= x, Z2 <= y) for a standard bivariate normal with correlation `rho`.
pub fn bvn_cdf(x: f64, y: f64, rho: f64) -> Result<f64> {
    if !(rho.abs() < 1.0) {
        return Err(Error::Domain(format!(
            "bivariate normal CDF requires |rho| < 1, got {rho}"
        )));
    }
    if x.is_nan() || y.is_nan() {
        return Err(Error::Domain("bivariate normal CDF at NaN".into()));
    }
    Ok(bvn_lower(x, y, rho))
}

fn bvn_lower(x: f64, y: f64, rho: f64) -> f64 {
    if x == f64::NEG_INFINITY || y == f64::NEG_INFINITY {
        return 0.0;
    }
    if x == f64::INFINITY {
        return std_normal_cdf(y);
    }
    if y == f64::INFINITY {
        return std_normal_cdf(x);
    }
    bvn_upper(-x, -y, rho).clamp(0.0, 1.0)
}

/// Standard bivariate normal density.
pub fn bvn_pdf(x: f64, y: f64, rho: f64) -> f64 {
    let q = 1.0 - rho * rho;
    (-(x * x - 2.0 * rho * x * y + y * y) / (2.0 * q)).exp() / (TWO_PI * q.sqrt())
}

/// Parameters of one class-conditional bivariate Gaussian score distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct BivNormParams {
    mu1: f64,
    mu2: f64,
    var1: f64,
    var2: f64,
    rho: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    mu1: f64,
    mu2: f64,
    var1: f64,
    var2: f64,
    rho: f64,
}

impl TryFrom<RawParams> for BivNormParams {
    type Error = Error;
    fn try_from(r: RawParams) -> Result<Self> {
        BivNormParams::new(r.mu1, r.mu2, r.var1, r.var2, r.rho)
    }
}

impl From<BivNormParams> for RawParams {
    fn from(p: BivNormParams) -> Self {
        RawParams {
            mu1: p.mu1,
            mu2: p.mu2,
            var1: p.var1,
            var2: p.var2,
            rho: p.rho,
        }
    }
}

impl BivNormParams {
    pub fn new(mu1: f64, mu2: f64, var1: f64, var2: f64, rho: f64) -> Result<Self> {
        if !(mu1.is_finite() && mu2.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "means must be finite, got ({mu1}, {mu2})"
            )));
        }
        if !(var1 > 0.0 && var2 > 0.0 && var1.is_finite() && var2.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "variances must be positive and finite, got ({var1}, {var2})"
            )));
        }
        if !(rho.abs() < 1.0) {
            return Err(Error::InvalidParams(format!(
                "correlation must satisfy |rho| < 1, got {rho}"
            )));
        }
        Ok(Self {
            mu1,
            mu2,
            var1,
            var2,
            rho,
        })
    }

    /// Independent standard normals.
    pub fn standard() -> Self {
        Self {
            mu1: 0.0,
            mu2: 0.0,
            var1: 1.0,
            var2: 1.0,
            rho: 0.0,
        }
    }

    pub fn mu1(&self) -> f64 {
        self.mu1
    }
    pub fn mu2(&self) -> f64 {
        self.mu2
    }
    pub fn mean(&self, test: usize) -> f64 {
        [self.mu1, self.mu2][test]
    }
    pub fn var1(&self) -> f64 {
        self.var1
    }
    pub fn var2(&self) -> f64 {
        self.var2
    }
    pub fn var(&self, test: usize) -> f64 {
        [self.var1, self.var2][test]
    }
    pub fn sd(&self, test: usize) -> f64 {
        self.var(test).sqrt()
    }
    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn with_rho(self, rho: f64) -> Result<Self> {
        Self::new(self.mu1, self.mu2, self.var1, self.var2, rho)
    }

    pub fn shifted(self, c1: f64, c2: f64) -> Result<Self> {
        Self::new(self.mu1 + c1, self.mu2 + c2, self.var1, self.var2, self.rho)
    }

    /// Log density at one score pair.
    pub fn log_pdf(&self, x: [f64; 2]) -> f64 {
        let (s1, s2) = (self.var1.sqrt(), self.var2.sqrt());
        let z1 = (x[0] - self.mu1) / s1;
        let z2 = (x[1] - self.mu2) / s2;
        let q = 1.0 - self.rho * self.rho;
        -LN_TWO_PI
            - s1.ln()
            - s2.ln()
            - 0.5 * q.ln()
            - (z1 * z1 - 2.0 * self.rho * z1 * z2 + z2 * z2) / (2.0 * q)
    }
}

/// Axis-aligned rectangle; bounds may be infinite. Membership is lo <= x < hi,
/// matching the quadrant convention where a score at a threshold is "at or above".
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
}

impl Rect {
    pub fn new(lo: [f64; 2], hi: [f64; 2]) -> Result<Self> {
        for j in 0..2 {
            if lo[j].is_nan() || hi[j].is_nan() || !(lo[j] < hi[j]) {
                return Err(Error::Precondition(format!(
                    "rectangle bounds must satisfy lo < hi on axis {}, got [{}, {})",
                    j + 1,
                    lo[j],
                    hi[j]
                )));
            }
        }
        Ok(Self { lo, hi })
    }

    pub fn plane() -> Self {
        Self {
            lo: [f64::NEG_INFINITY; 2],
            hi: [f64::INFINITY; 2],
        }
    }

    pub fn contains(&self, x: [f64; 2]) -> bool {
        (0..2).all(|j| x[j] >= self.lo[j] && (x[j] < self.hi[j] || self.hi[j] == f64::INFINITY))
    }

    pub fn translated(&self, c: [f64; 2]) -> Self {
        Self {
            lo: [self.lo[0] + c[0], self.lo[1] + c[1]],
            hi: [self.hi[0] + c[0], self.hi[1] + c[1]],
        }
    }

    pub fn is_plane(&self) -> bool {
        self.lo.iter().all(|v| *v == f64::NEG_INFINITY)
            && self.hi.iter().all(|v| *v == f64::INFINITY)
    }
}

/// One axis of an orthant term, in standardized units.
#[derive(Debug, Clone, Copy)]
enum Side {
    Free,
    /// x < h
    Below(f64),
    /// x >= h
    Above(f64),
}

/// Probability of the rectangle and its gradient with respect to
/// (mu1, mu2, log sd1, log sd2, rho).
#[derive(Debug, Clone, Copy)]
pub(crate) struct RegionMass {
    pub prob: f64,
    pub grad: [f64; 5],
}

pub(crate) fn region_mass(params: &BivNormParams, rect: &Rect) -> RegionMass {
    let sd = [params.var1.sqrt(), params.var2.sqrt()];
    let mu = [params.mu1, params.mu2];
    // Expand each axis into signed orthant sides.
    let axis_terms = |j: usize| -> Vec<(f64, Side)> {
        let lo = rect.lo[j];
        let hi = rect.hi[j];
        let z = |c: f64| (c - mu[j]) / sd[j];
        match (lo == f64::NEG_INFINITY, hi == f64::INFINITY) {
            (true, true) => vec![(1.0, Side::Free)],
            (true, false) => vec![(1.0, Side::Below(z(hi)))],
            (false, true) => vec![(1.0, Side::Above(z(lo)))],
            (false, false) => vec![(1.0, Side::Below(z(hi))), (-1.0, Side::Below(z(lo)))],
        }
    };
    let t1 = axis_terms(0);
    let t2 = axis_terms(1);
    let rho = params.rho;
    let srho = (1.0 - rho * rho).sqrt();
    let mut prob = 0.0;
    let mut grad = [0.0; 5];
    for (c1, s1) in &t1 {
        for (c2, s2) in &t2 {
            let coef = c1 * c2;
            let (val, dh, dk, dr, h, k) = orthant(*s1, *s2, rho, srho);
            prob += coef * val;
            // chain rule: dh/dmu = -1/sd, dh/dlog sd = -h
            if dh != 0.0 {
                grad[0] += coef * dh * (-1.0 / sd[0]);
                grad[2] += coef * dh * (-h);
            }
            if dk != 0.0 {
                grad[1] += coef * dk * (-1.0 / sd[1]);
                grad[3] += coef * dk * (-k);
            }
            grad[4] += coef * dr;
        }
    }
    RegionMass { prob, grad }
}

/// Value and partials (d/dh, d/dk, d/drho) of one orthant probability.
fn orthant(s1: Side, s2: Side, rho: f64, srho: f64) -> (f64, f64, f64, f64, f64, f64) {
    let sign_of = |s: Side| match s {
        Side::Free => (0.0, 0.0),
        Side::Below(h) => (1.0, h),
        Side::Above(h) => (-1.0, h),
    };
    let (g1, h) = sign_of(s1);
    let (g2, k) = sign_of(s2);
    match (g1 != 0.0, g2 != 0.0) {
        (false, false) => (1.0, 0.0, 0.0, 0.0, 0.0, 0.0),
        (true, false) => (
            std_normal_cdf(g1 * h),
            g1 * std_normal_pdf(h),
            0.0,
            0.0,
            h,
            0.0,
        ),
        (false, true) => (
            std_normal_cdf(g2 * k),
            0.0,
            g2 * std_normal_pdf(k),
            0.0,
            0.0,
            k,
        ),
        (true, true) => {
            let val = bvn_lower(g1 * h, g2 * k, g1 * g2 * rho);
            let dh = g1 * std_normal_pdf(h) * std_normal_cdf(g2 * (k - rho * h) / srho);
            let dk = g2 * std_normal_pdf(k) * std_normal_cdf(g1 * (h - rho * k) / srho);
            let dr = g1 * g2 * bvn_pdf(h, k, rho);
            (val, dh, dk, dr, h, k)
        }
    }
}

/// Log of the probability mass `params` assigns to `rect`.
pub fn rect_log_prob(params: &BivNormParams, rect: &Rect) -> Result<f64> {
    if rect.is_plane() {
        return Ok(0.0);
    }
    let p = region_mass(params, rect).prob;
    if !(p > 0.0) {
        return Err(Error::DegenerateRegion);
    }
    Ok(p.min(1.0).ln())
}

/// Untruncated bivariate normal log-likelihood.
pub fn full_bvn_loglik(params: &BivNormParams, data: &[[f64; 2]]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Precondition(
            "log-likelihood of an empty sample".into(),
        ));
    }
    Ok(data.iter().map(|x| params.log_pdf(*x)).sum())
}

/// Log-likelihood of `data` under `params` truncated to `rect`.
pub fn truncated_bvn_loglik(params: &BivNormParams, data: &[[f64; 2]], rect: &Rect) -> Result<f64> {
    if let Some(x) = data.iter().find(|x| !rect.contains(**x)) {
        return Err(Error::Precondition(format!(
            "point ({}, {}) lies outside the truncation region",
            x[0], x[1]
        )));
    }
    let ll = full_bvn_loglik(params, data)?;
    let norm = rect_log_prob(params, rect)?;
    Ok(ll - data.len() as f64 * norm)
}

/// Sufficient statistics of a sample of score pairs: count, means, and
/// n-denominator second central moments (s11, s22, s12).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PairSummary {
    pub n: usize,
    pub mean: [f64; 2],
    pub m2: [f64; 3],
}

impl PairSummary {
    pub fn from_points(points: &[[f64; 2]]) -> Self {
        Self::from_point_iter(points.iter().copied())
    }

    /// Two passes over `points`, so the iterator must be cheap to clone.
    pub fn from_point_iter<I>(points: I) -> Self
    where
        I: Iterator<Item = [f64; 2]> + Clone,
    {
        let mut n = 0usize;
        let mut mean = [0.0; 2];
        for p in points.clone() {
            n += 1;
            mean[0] += p[0];
            mean[1] += p[1];
        }
        if n == 0 {
            return Self::default();
        }
        let nf = n as f64;
        mean[0] /= nf;
        mean[1] /= nf;
        let mut m2 = [0.0; 3];
        for p in points {
            let d0 = p[0] - mean[0];
            let d1 = p[1] - mean[1];
            m2[0] += d0 * d0;
            m2[1] += d1 * d1;
            m2[2] += d0 * d1;
        }
        for v in &mut m2 {
            *v /= nf;
        }
        Self { n, mean, m2 }
    }

    /// Sample (n - 1) variance of one test.
    pub fn sample_var(&self, test: usize) -> f64 {
        if self.n < 2 {
            return f64::NAN;
        }
        self.m2[test] * self.n as f64 / (self.n as f64 - 1.0)
    }

    pub fn sample_sd(&self, test: usize) -> f64 {
        self.sample_var(test).sqrt()
    }

    /// Pearson correlation; NaN when either variance is zero.
    pub fn corr(&self) -> f64 {
        let d = (self.m2[0] * self.m2[1]).sqrt();
        if d > 0.0 {
            (self.m2[2] / d).clamp(-1.0, 1.0)
        } else {
            f64::NAN
        }
    }

    /// Per-observation full log-likelihood and its gradient with respect to
    /// (mu1, mu2, log sd1, log sd2, rho).
    pub(crate) fn mean_loglik_grad(&self, p: &BivNormParams) -> (f64, [f64; 5]) {
        let (s1, s2) = (p.var1.sqrt(), p.var2.sqrt());
        let rho = p.rho;
        let q = 1.0 - rho * rho;
        let d1 = self.mean[0] - p.mu1;
        let d2 = self.mean[1] - p.mu2;
        let a = (self.m2[0] + d1 * d1) / (s1 * s1);
        let b = (self.m2[1] + d2 * d2) / (s2 * s2);
        let c = (self.m2[2] + d1 * d2) / (s1 * s2);
        let quad = a + b - 2.0 * rho * c;
        let ll = -LN_TWO_PI - s1.ln() - s2.ln() - 0.5 * q.ln() - quad / (2.0 * q);
        let g_mu1 = (d1 / (s1 * s1) - rho * d2 / (s1 * s2)) / q;
        let g_mu2 = (d2 / (s2 * s2) - rho * d1 / (s1 * s2)) / q;
        let g_ls1 = -1.0 + (a - rho * c) / q;
        let g_ls2 = -1.0 + (b - rho * c) / q;
        let g_rho = rho / q + c / q - rho * quad / (q * q);
        (ll, [g_mu1, g_mu2, g_ls1, g_ls2, g_rho])
    }

    /// Per-observation full log-likelihood.
    pub fn mean_loglik(&self, p: &BivNormParams) -> f64 {
        self.mean_loglik_grad(p).0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn cdf_basics() {
        assert_eq!(std_normal_cdf(0.0), 0.5);
        assert_eq!(std_normal_cdf(f64::INFINITY), 1.0);
        assert_eq!(std_normal_cdf(f64::NEG_INFINITY), 0.0);
        assert_abs_diff_eq!(std_normal_cdf(1.96), 0.975_002_104_851_780, epsilon = 1e-12);
    }

    #[test]
    fn quantile_domain() {
        assert!(std_normal_quantile(0.0).is_err());
        assert!(std_normal_quantile(1.0).is_err());
        assert!(std_normal_quantile(f64::NAN).is_err());
        assert_eq!(std_normal_quantile(0.5).unwrap(), 0.0);
    }

    #[test]
    fn bvn_trivial_values() {
        assert_abs_diff_eq!(bvn_cdf(0.0, 0.0, 0.0).unwrap(), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(
            bvn_cdf(0.3, f64::INFINITY, 0.7).unwrap(),
            std_normal_cdf(0.3),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(bvn_cdf(0.0, 0.0, 0.5).unwrap(), 1.0 / 3.0, epsilon = 1e-12);
        assert!(bvn_cdf(0.0, 0.0, 1.0).is_err());
        assert!(bvn_cdf(0.0, 0.0, -1.2).is_err());
    }

    #[test]
    fn params_reject_invalid() {
        assert!(BivNormParams::new(0.0, 0.0, 0.0, 1.0, 0.0).is_err());
        assert!(BivNormParams::new(0.0, 0.0, 1.0, -1.0, 0.0).is_err());
        assert!(BivNormParams::new(0.0, 0.0, 1.0, 1.0, 1.0).is_err());
        assert!(BivNormParams::new(f64::NAN, 0.0, 1.0, 1.0, 0.0).is_err());
        let json = r#"{"mu1":0,"mu2":0,"var1":1,"var2":1,"rho":1.5}"#;
        assert!(serde_json::from_str::<BivNormParams>(json).is_err());
    }

    #[test]
    fn rect_log_prob_examples() {
        let std = BivNormParams::standard();
        assert_eq!(rect_log_prob(&std, &Rect::plane()).unwrap(), 0.0);
        let quad = Rect::new([0.0, 0.0], [f64::INFINITY; 2]).unwrap();
        assert_abs_diff_eq!(
            rect_log_prob(&std, &quad).unwrap(),
            0.25f64.ln(),
            epsilon = 1e-14
        );
        let far = Rect::new([60.0, 60.0], [f64::INFINITY; 2]).unwrap();
        assert_eq!(rect_log_prob(&std, &far), Err(Error::DegenerateRegion));
    }

    #[test]
    fn loglik_at_mode() {
        let p = BivNormParams::new(1.0, -2.0, 4.0, 0.25, 0.6).unwrap();
        let ll = full_bvn_loglik(&p, &[[1.0, -2.0]]).unwrap();
        let expect = -(TWO_PI * 2.0 * 0.5 * (1.0f64 - 0.36).sqrt()).ln();
        assert_abs_diff_eq!(ll, expect, epsilon = 1e-13);
        assert!(full_bvn_loglik(&p, &[]).is_err());
    }

    #[test]
    fn truncated_rejects_outside_points() {
        let p = BivNormParams::standard();
        let quad = Rect::new([0.0, 0.0], [f64::INFINITY; 2]).unwrap();
        assert!(matches!(
            truncated_bvn_loglik(&p, &[[-1.0, 1.0]], &quad),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn summary_gradient_matches_finite_differences() {
        let pts: Vec<[f64; 2]> = (0..40)
            .map(|i| [(i as f64 * 0.37).sin() * 2.0, (i as f64 * 0.11).cos() + 0.3])
            .collect();
        let s = PairSummary::from_points(&pts);
        let p = BivNormParams::new(0.2, 0.1, 1.3, 0.7, 0.25).unwrap();
        let (_, g) = s.mean_loglik_grad(&p);
        let f = |t: [f64; 5]| {
            let q = BivNormParams::new(t[0], t[1], (2.0 * t[2]).exp(), (2.0 * t[3]).exp(), t[4])
                .unwrap();
            s.mean_loglik(&q)
        };
        let t0 = [0.2, 0.1, 0.5 * 1.3f64.ln(), 0.5 * 0.7f64.ln(), 0.25];
        for i in 0..5 {
            let mut tp = t0;
            let mut tm = t0;
            tp[i] += 1e-6;
            tm[i] -= 1e-6;
            let fd = (f(tp) - f(tm)) / 2e-6;
            assert_abs_diff_eq!(g[i], fd, epsilon = 1e-7);
        }
    }

    #[test]
    fn region_gradient_matches_finite_differences() {
        let rects = [
            Rect::new([0.5, -0.2], [f64::INFINITY; 2]).unwrap(),
            Rect::new([0.5, f64::NEG_INFINITY], [f64::INFINITY, -0.2]).unwrap(),
            Rect::new([f64::NEG_INFINITY, -0.2], [0.5, f64::INFINITY]).unwrap(),
            Rect::new([f64::NEG_INFINITY; 2], [0.5, -0.2]).unwrap(),
            Rect::new([-0.5, -1.0], [1.5, 0.4]).unwrap(),
            Rect::new([-0.5, f64::NEG_INFINITY], [1.5, f64::INFINITY]).unwrap(),
        ];
        let t0 = [0.3, -0.4, 0.1, -0.2, -0.45];
        let mk = |t: [f64; 5]| {
            BivNormParams::new(t[0], t[1], (2.0 * t[2]).exp(), (2.0 * t[3]).exp(), t[4]).unwrap()
        };
        for r in &rects {
            let m = region_mass(&mk(t0), r);
            for i in 0..5 {
                let mut tp = t0;
                let mut tm = t0;
                tp[i] += 1e-6;
                tm[i] -= 1e-6;
                let fd = (region_mass(&mk(tp), r).prob - region_mass(&mk(tm), r).prob) / 2e-6;
                assert_abs_diff_eq!(m.grad[i], fd, epsilon = 1e-7);
            }
        }
    }
}
