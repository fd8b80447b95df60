//! Half-distributions used as hyperpriors for the global and local scales,
//! plus the improper reference prior for the noise variance and seeded,
//! stream-splittable RNG plumbing.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Hyperprior family for a positive scale parameter.
///
/// `Fixed` is a point mass; `HalfCauchy` is `HalfT` with one degree of
/// freedom but kept as its own variant since it is the horseshoe default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HyperpriorFamily {
    Fixed,
    HalfNormal,
    HalfCauchy,
    HalfT,
}

impl HyperpriorFamily {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "fixed" => Ok(HyperpriorFamily::Fixed),
            "half-normal" | "half_normal" => Ok(HyperpriorFamily::HalfNormal),
            "half-cauchy" | "half_cauchy" => Ok(HyperpriorFamily::HalfCauchy),
            "half-t" | "half_t" => Ok(HyperpriorFamily::HalfT),
            other => Err(Error::invalid(format!("unknown hyperprior family {other:?}"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            HyperpriorFamily::Fixed => "fixed",
            HyperpriorFamily::HalfNormal => "half-normal",
            HyperpriorFamily::HalfCauchy => "half-cauchy",
            HyperpriorFamily::HalfT => "half-t",
        }
    }
}

/// A half-distribution prior for a positive scale parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperpriorSpec {
    pub family: HyperpriorFamily,
    /// Scale of the symmetric parent distribution; for `Fixed`, the point mass.
    pub scale: f64,
    /// Degrees of freedom; meaningful only for `HalfT` (1 = half-Cauchy).
    pub df: f64,
}

impl HyperpriorSpec {
    fn validated(family: HyperpriorFamily, scale: f64, df: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::invalid(format!(
                "hyperprior scale must be positive, got {scale}"
            )));
        }
        if family == HyperpriorFamily::HalfT && !(df.is_finite() && df > 0.0) {
            return Err(Error::invalid(format!(
                "half-t degrees of freedom must be positive, got {df}"
            )));
        }
        Ok(HyperpriorSpec { family, scale, df })
    }

    /// Point mass at `scale`.
    pub fn fixed(scale: f64) -> Result<Self> {
        Self::validated(HyperpriorFamily::Fixed, scale, 1.0)
    }

    pub fn half_normal(scale: f64) -> Result<Self> {
        Self::validated(HyperpriorFamily::HalfNormal, scale, 1.0)
    }

    pub fn half_cauchy(scale: f64) -> Result<Self> {
        Self::validated(HyperpriorFamily::HalfCauchy, scale, 1.0)
    }

    pub fn half_t(df: f64, scale: f64) -> Result<Self> {
        Self::validated(HyperpriorFamily::HalfT, scale, df)
    }

    /// Builds a spec for a named family; `df` is required for half-t.
    pub fn from_family(family: HyperpriorFamily, scale: f64, df: Option<f64>) -> Result<Self> {
        match family {
            HyperpriorFamily::HalfT => Self::half_t(df.ok_or(Error::MissingDegreesOfFreedom)?, scale),
            HyperpriorFamily::Fixed => Self::fixed(scale),
            HyperpriorFamily::HalfNormal => Self::half_normal(scale),
            HyperpriorFamily::HalfCauchy => Self::half_cauchy(scale),
        }
    }

    pub fn is_fixed(&self) -> bool {
        self.family == HyperpriorFamily::Fixed
    }

    /// The same spec with its scale multiplied by `factor` (used to couple
    /// the global scale to the current noise level).
    pub fn scaled_by(&self, factor: f64) -> HyperpriorSpec {
        HyperpriorSpec {
            scale: self.scale * factor,
            ..*self
        }
    }

    /// One draw from the half-distribution. `Fixed` returns the point mass.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.family {
            HyperpriorFamily::Fixed => self.scale,
            HyperpriorFamily::HalfNormal => {
                let z: f64 = rng.sample(StandardNormal);
                self.scale * z.abs()
            }
            HyperpriorFamily::HalfCauchy => {
                // Inverse CDF of the symmetric parent: exact, no rejection.
                let u: f64 = rng.gen();
                self.scale * (std::f64::consts::PI * (u - 0.5)).tan().abs()
            }
            HyperpriorFamily::HalfT => {
                // |normal| / sqrt(chi^2_df / df), the gamma-mixture construction.
                let z: f64 = rng.sample(StandardNormal);
                let w = Gamma::new(self.df / 2.0, 2.0 / self.df)
                    .expect("validated df")
                    .sample(rng);
                self.scale * z.abs() / w.sqrt()
            }
        }
    }

    /// Log density at `x > 0`, including normalization.
    ///
    /// Errors for `Fixed` (a point mass has no density) and for `x <= 0`.
    pub fn log_density(&self, x: f64) -> Result<f64> {
        if self.is_fixed() {
            return Err(Error::FixedFamilyDensity);
        }
        if !(x.is_finite() && x > 0.0) {
            return Err(Error::invalid(format!(
                "half-distribution density requires x > 0, got {x}"
            )));
        }
        Ok(self.log_density_unchecked(x))
    }

    #[inline]
    pub(crate) fn log_density_unchecked(&self, x: f64) -> f64 {
        let s = self.scale;
        let r = x / s;
        match self.family {
            HyperpriorFamily::Fixed => f64::NAN,
            HyperpriorFamily::HalfNormal => {
                0.5 * (2.0 / std::f64::consts::PI).ln() - s.ln() - 0.5 * r * r
            }
            HyperpriorFamily::HalfCauchy => {
                (2.0 / std::f64::consts::PI).ln() - s.ln() - r.mul_add(r, 1.0).ln()
            }
            HyperpriorFamily::HalfT => {
                let nu = self.df;
                std::f64::consts::LN_2 + ln_gamma((nu + 1.0) / 2.0) - ln_gamma(nu / 2.0)
                    - 0.5 * (nu * std::f64::consts::PI).ln()
                    - s.ln()
                    - (nu + 1.0) / 2.0 * (r * r / nu).ln_1p()
            }
        }
    }

    /// d/dx log density at `x > 0`; 0 for `Fixed` (never a sampled parameter).
    #[inline]
    pub(crate) fn dlog_density_dx(&self, x: f64) -> f64 {
        let s = self.scale;
        match self.family {
            HyperpriorFamily::Fixed => 0.0,
            HyperpriorFamily::HalfNormal => -x / (s * s),
            HyperpriorFamily::HalfCauchy => -2.0 * x / (s * s + x * x),
            HyperpriorFamily::HalfT => -(self.df + 1.0) * x / (self.df * s * s + x * x),
        }
    }

    /// Median of the half-distribution (the point mass for `Fixed`).
    pub fn median(&self) -> f64 {
        match self.family {
            HyperpriorFamily::Fixed => self.scale,
            // Phi^-1(0.75)
            HyperpriorFamily::HalfNormal => self.scale * 0.6744897501960817,
            HyperpriorFamily::HalfCauchy => self.scale,
            HyperpriorFamily::HalfT => {
                let t = StudentsT::new(0.0, 1.0, self.df).expect("validated df");
                self.scale * t.inverse_cdf(0.75)
            }
        }
    }
}

/// Log density of the improper reference prior `p(sigma^2) proportional to
/// 1/sigma^2`, with the arbitrary constant fixed at zero.
pub fn log_density_sigma2_reference(sigma2: f64) -> Result<f64> {
    if !(sigma2.is_finite() && sigma2 > 0.0) {
        return Err(Error::invalid(format!(
            "sigma^2 must be positive, got {sigma2}"
        )));
    }
    Ok(-sigma2.ln())
}

/// A reproducible RNG handle: the same `(seed, stream)` pair always yields
/// the same draw sequence, and distinct streams never overlap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        RngStream { seed, stream }
    }

    /// A stream with the same seed and a shifted stream id.
    pub fn substream(&self, offset: u64) -> Self {
        RngStream {
            seed: self.seed,
            stream: self.stream.wrapping_add(offset),
        }
    }

    /// Instantiates the generator. ChaCha streams are non-overlapping by
    /// construction, so per-chain and per-shard streams need no coordination.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{Cauchy, Normal};

    #[test]
    fn fixed_family_is_deterministic() {
        let spec = HyperpriorSpec::fixed(0.01).unwrap();
        let mut rng = RngStream::new(1, 0).rng();
        for _ in 0..100 {
            assert_eq!(spec.sample(&mut rng), 0.01);
        }
        assert!(matches!(
            spec.log_density(1.0),
            Err(Error::FixedFamilyDensity)
        ));
    }

    #[test]
    fn half_normal_mean_matches_closed_form() {
        let spec = HyperpriorSpec::half_normal(1.0).unwrap();
        let mut rng = RngStream::new(42, 0).rng();
        let n = 1_000_000usize;
        let draws: Vec<f64> = (0..n).map(|_| spec.sample(&mut rng)).collect();
        let mean = crate::stats::mean(&draws);
        let expected = (2.0 / std::f64::consts::PI).sqrt();
        let se = (crate::stats::sample_variance(&draws) / n as f64).sqrt();
        assert!((mean - expected).abs() < 4.0 * se, "{mean} vs {expected}");
    }

    #[test]
    fn half_cauchy_median_matches_scale() {
        let spec = HyperpriorSpec::half_cauchy(1.0).unwrap();
        let mut rng = RngStream::new(43, 0).rng();
        let n = 1_000_000usize;
        let draws: Vec<f64> = (0..n).map(|_| spec.sample(&mut rng)).collect();
        let med = crate::stats::quantile(&draws, 0.5);
        // SE of the sample median: 1/(2 f(med) sqrt(n)); f(1) = 1/pi.
        let se = std::f64::consts::PI / (2.0 * (n as f64).sqrt());
        assert!((med - 1.0).abs() < 4.0 * se, "median {med}");
    }

    #[test]
    fn log_density_closed_forms() {
        // Half-Cauchy at x -> 0 approaches log(2/pi).
        let hc = HyperpriorSpec::half_cauchy(1.0).unwrap();
        assert!((hc.log_density(1e-12).unwrap() - (2.0 / std::f64::consts::PI).ln()).abs() < 1e-9);
        // Half-normal scale 1 at x = 1: log(sqrt(2/pi)) - 1/2.
        let hn = HyperpriorSpec::half_normal(1.0).unwrap();
        let expected = (2.0 / std::f64::consts::PI).sqrt().ln() - 0.5;
        assert!((hn.log_density(1.0).unwrap() - expected).abs() < 1e-14);
        // Frozen arbitrary-precision value for half-t(3), scale 1.4 at 0.8.
        let ht = HyperpriorSpec::half_t(3.0, 1.4).unwrap();
        assert!((ht.log_density(0.8).unwrap() - (-0.8508491337408294)).abs() < 1e-13);
    }

    #[test]
    fn half_t_df1_is_half_cauchy_pointwise() {
        for &scale in &[0.5, 1.0, 3.0] {
            let ht = HyperpriorSpec::half_t(1.0, scale).unwrap();
            let hc = HyperpriorSpec::half_cauchy(scale).unwrap();
            for &x in &[0.5, 1.0, 2.0] {
                let a = ht.log_density(x).unwrap();
                let b = hc.log_density(x).unwrap();
                assert!((a - b).abs() < 1e-12, "x={x}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn log_density_rejects_nonpositive_x() {
        let hn = HyperpriorSpec::half_normal(1.0).unwrap();
        assert!(hn.log_density(0.0).is_err());
        assert!(hn.log_density(-1.0).is_err());
    }

    #[test]
    fn sigma2_reference_prior_values() {
        assert_eq!(log_density_sigma2_reference(1.0).unwrap(), 0.0);
        assert!((log_density_sigma2_reference(std::f64::consts::E).unwrap() + 1.0).abs() < 1e-15);
        assert!((log_density_sigma2_reference(0.25).unwrap() - 4.0f64.ln()).abs() < 1e-15);
        assert!(log_density_sigma2_reference(0.0).is_err());
    }

    /// Trapezoid integration of exp(log_density) over (0, upper) plus an
    /// analytic tail bound check; total mass must be 1 within 1e-6.
    fn integrates_to_one(spec: &HyperpriorSpec, upper: f64, tail: f64) {
        let steps = 4_000_000usize;
        let h = upper / steps as f64;
        let mut mass = 0.0;
        for i in 0..steps {
            let a = (i as f64 + 0.5) * h;
            mass += spec.log_density(a).unwrap().exp() * h;
        }
        assert!(
            (mass + tail - 1.0).abs() < 1e-6,
            "{:?}: mass {mass} + tail {tail}",
            spec.family
        );
    }

    #[test]
    fn densities_are_normalized() {
        // Half-normal tail beyond 10 is ~1.5e-23: negligible.
        integrates_to_one(&HyperpriorSpec::half_normal(1.0).unwrap(), 12.0, 0.0);
        // Half-Cauchy tail beyond T is 1 - (2/pi) atan(T).
        let t = 40_000.0;
        let tail = 1.0 - 2.0 / std::f64::consts::PI * (t as f64).atan();
        integrates_to_one(&HyperpriorSpec::half_cauchy(1.0).unwrap(), t, tail);
        // Half-t(3): tail bound from the survival function via statrs.
        let st = StudentsT::new(0.0, 1.0, 3.0).unwrap();
        let t = 2000.0;
        let tail = 2.0 * (1.0 - st.cdf(t));
        integrates_to_one(&HyperpriorSpec::half_t(3.0, 1.0).unwrap(), t, tail);
    }

    /// Empirical CDF at deciles vs analytic CDF, within the
    /// Dvoretzky-Kiefer-Wolfowitz band at confidence 0.999.
    #[test]
    fn sampled_cdf_within_dkw_band() {
        let n = 100_000usize;
        let eps = ((2.0f64 / 0.001).ln() / (2.0 * n as f64)).sqrt();
        let cases: Vec<(HyperpriorSpec, Box<dyn Fn(f64) -> f64>)> = vec![
            (HyperpriorSpec::half_normal(1.3).unwrap(), {
                let d = Normal::new(0.0, 1.3).unwrap();
                Box::new(move |x| 2.0 * d.cdf(x) - 1.0)
            }),
            (HyperpriorSpec::half_cauchy(0.7).unwrap(), {
                let d = Cauchy::new(0.0, 0.7).unwrap();
                Box::new(move |x| 2.0 * d.cdf(x) - 1.0)
            }),
            (HyperpriorSpec::half_t(4.0, 1.0).unwrap(), {
                let d = StudentsT::new(0.0, 1.0, 4.0).unwrap();
                Box::new(move |x| 2.0 * d.cdf(x) - 1.0)
            }),
        ];
        for (i, (spec, cdf)) in cases.iter().enumerate() {
            let mut rng = RngStream::new(11, i as u64).rng();
            let mut draws: Vec<f64> = (0..n).map(|_| spec.sample(&mut rng)).collect();
            draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for k in 1..10 {
                let q = k as f64 / 10.0;
                let x = crate::stats::quantile_sorted(&draws, q);
                let f = cdf(x);
                assert!(
                    (f - q).abs() <= eps + 1.0 / n as f64,
                    "{:?} decile {q}: |{f} - {q}| > {eps}",
                    spec.family
                );
            }
        }
    }

    #[test]
    fn identical_streams_reproduce_and_distinct_streams_decorrelate() {
        let spec = HyperpriorSpec::half_normal(1.0).unwrap();
        let a: Vec<f64> = {
            let mut rng = RngStream::new(5, 1).rng();
            (0..1000).map(|_| spec.sample(&mut rng)).collect()
        };
        let b: Vec<f64> = {
            let mut rng = RngStream::new(5, 1).rng();
            (0..1000).map(|_| spec.sample(&mut rng)).collect()
        };
        assert_eq!(a, b);

        let n = 100_000usize;
        let mut r0 = RngStream::new(5, 0).rng();
        let mut r1 = RngStream::new(5, 1).rng();
        let x: Vec<f64> = (0..n).map(|_| spec.sample(&mut r0)).collect();
        let y: Vec<f64> = (0..n).map(|_| spec.sample(&mut r1)).collect();
        let mx = crate::stats::mean(&x);
        let my = crate::stats::mean(&y);
        let mut num = 0.0;
        let mut dx = 0.0;
        let mut dy = 0.0;
        for i in 0..n {
            num += (x[i] - mx) * (y[i] - my);
            dx += (x[i] - mx) * (x[i] - mx);
            dy += (y[i] - my) * (y[i] - my);
        }
        let corr = num / (dx.sqrt() * dy.sqrt());
        assert!(corr.abs() < 0.01, "lag-0 cross-correlation {corr}");
    }
}
