//! Closed-form distortion bounds for the release mechanism and its
//! estimators, plus the standard normal cdf they need.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::exp_neg_epsilon;

/// Default Berry–Esseen constant.
pub const BERRY_ESSEEN_C: f64 = 0.56;

/// Inputs shared by the bound evaluators.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundInputs {
    pub n: f64,
    pub l: u32,
    pub epsilon: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub lipschitz: Option<f64>,
    pub berry_esseen_c: f64,
}

impl BoundInputs {
    pub fn new(n: f64, l: u32, epsilon: f64, a: f64, b: f64, c: f64) -> Result<Self> {
        let inputs = BoundInputs {
            n,
            l,
            epsilon,
            a,
            b,
            c,
            lipschitz: None,
            berry_esseen_c: BERRY_ESSEEN_C,
        };
        inputs.validate()?;
        Ok(inputs)
    }

    /// The normalized query-class corner `a = 0`, `b = c = 1`.
    pub fn normalized(n: f64, l: u32, epsilon: f64) -> Result<Self> {
        BoundInputs::new(n, l, epsilon, 0.0, 1.0, 1.0)
    }

    pub fn with_lipschitz(mut self, lipschitz: f64) -> Result<Self> {
        self.lipschitz = Some(lipschitz);
        self.validate()?;
        Ok(self)
    }

    pub fn with_berry_esseen(mut self, constant: f64) -> Result<Self> {
        self.berry_esseen_c = constant;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.n >= 1.0) || !self.n.is_finite() {
            return bad(format!("n must be >= 1, got {}", self.n));
        }
        if self.l == 0 || self.l > 62 {
            return bad(format!("l must lie in [1, 62], got {}", self.l));
        }
        if !(self.epsilon > 0.0) {
            return bad(format!("privacy level must be > 0, got {}", self.epsilon));
        }
        if !(self.a.is_finite() && self.b.is_finite() && self.b > self.a) {
            return bad(format!("need finite a < b, got a = {}, b = {}", self.a, self.b));
        }
        if !(self.c > 0.0) || !self.c.is_finite() {
            return bad(format!("c must be > 0, got {}", self.c));
        }
        if let Some(lip) = self.lipschitz {
            if !(lip > 0.0) || !lip.is_finite() {
                return bad(format!("Lipschitz constant must be > 0, got {lip}"));
            }
        }
        if !(self.berry_esseen_c > 0.0) {
            return bad(format!("Berry–Esseen constant must be > 0, got {}", self.berry_esseen_c));
        }
        Ok(())
    }

    fn exp_neg(&self) -> f64 {
        exp_neg_epsilon(self.epsilon)
    }

    fn g(&self) -> f64 {
        1.0 + ((2f64).powi(self.l as i32) - 1.0) * self.exp_neg()
    }

    /// `e^eps / (2^l - 1)`.
    fn odds(&self) -> f64 {
        self.epsilon.exp() / ((2f64).powi(self.l as i32) - 1.0)
    }
}

/// `erf(x)` for `x >= 0` by the positive-term series
/// `2/sqrt(pi) e^{-x^2} sum_k 2^k x^{2k+1} / (2k+1)!!`.
fn erf_series(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut k = 0.0;
    while term > sum * 1e-17 {
        k += 1.0;
        term *= 2.0 * x2 / (2.0 * k + 1.0);
        sum += term;
    }
    std::f64::consts::FRAC_2_SQRT_PI * (-x2).exp() * sum
}

/// `erfc(x)` for `x > 0` by the continued fraction
/// `e^{-x^2}/sqrt(pi) / (x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))`,
/// evaluated with the modified Lentz method.
fn erfc_continued_fraction(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for k in 1..500 {
        let a = k as f64 / 2.0;
        d = x + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        d = 1.0 / d;
        c = x + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x * x).exp() / std::f64::consts::PI.sqrt() / f
}

const ERF_SWITCH: f64 = 3.0;

pub fn erf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        return -erf(-x);
    }
    if x <= ERF_SWITCH {
        erf_series(x)
    } else {
        1.0 - erfc_continued_fraction(x)
    }
}

pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x <= ERF_SWITCH {
        1.0 - erf_series(x)
    } else {
        erfc_continued_fraction(x)
    }
}

/// Standard normal cdf `Phi(t)`.
pub fn std_normal_cdf(t: f64) -> f64 {
    0.5 * erfc(-t / std::f64::consts::SQRT_2)
}

/// Expected squared error bound of the unbiased estimator,
/// `(b-a)^2 g^2 / (c^2 (1-e^{-eps})^2 n)`, times 4 for the proper estimator.
pub fn upper_bound_squared(inputs: &BoundInputs, proper: bool) -> f64 {
    let e = inputs.exp_neg();
    let span = (inputs.b - inputs.a) * inputs.g() / (inputs.c * (1.0 - e));
    let bound = span * span / inputs.n;
    if proper {
        4.0 * bound
    } else {
        bound
    }
}

/// Expected absolute error bound, `(b-a) g / (c (1-e^{-eps})) / sqrt(n)`,
/// doubled for the proper estimator.
pub fn upper_bound_absolute(inputs: &BoundInputs, proper: bool) -> f64 {
    let e = inputs.exp_neg();
    let bound = (inputs.b - inputs.a) * inputs.g() / (inputs.c * (1.0 - e)) / inputs.n.sqrt();
    if proper {
        2.0 * bound
    } else {
        bound
    }
}

/// Leading `1/n` term of the minimax lower bound,
/// `(1 - Phi(1))^2 / (2^{l+4} (1 + e^eps/(2^l - 1))^3) / n`.
/// Evaluated at the normalized corner; `a`, `b`, `c` are not used.
pub fn lower_bound_squared_asymptotic(inputs: &BoundInputs) -> f64 {
    let tail = 1.0 - std_normal_cdf(1.0);
    let denom = (2f64).powi(inputs.l as i32 + 4) * (1.0 + inputs.odds()).powi(3);
    tail * tail / denom / inputs.n
}

/// Finite-`n` lower bound
/// `(1/(4n^2)) max(0, (1-Phi(1)) sigma gamma^{3/2} sqrt(n) - C rho gamma / sigma^3)^2`
/// with `gamma = 1/(2(1 + e^eps/(2^l-1)))` and `sigma^2 = rho = 2^{-(l-1)}`.
/// Evaluated at the normalized corner; `a`, `b`, `c` are not used.
pub fn lower_bound_finite_n(inputs: &BoundInputs) -> f64 {
    let gamma = 1.0 / (2.0 * (1.0 + inputs.odds()));
    let rho = (2f64).powi(-(inputs.l as i32 - 1));
    let sigma = rho.sqrt();
    let tail = 1.0 - std_normal_cdf(1.0);
    let inner = tail * sigma * gamma.powf(1.5) * inputs.n.sqrt()
        - inputs.berry_esseen_c * rho * gamma / sigma.powi(3);
    if inner <= 0.0 {
        return 0.0;
    }
    inner * inner / (4.0 * inputs.n * inputs.n)
}

/// Leading term for Lipschitz queries on `[0, 1]` rows,
/// `(L^2/c^2 + 4 (b-a)^2 e^{-2 eps} / (c^2 (1-e^{-eps})^2)) / sqrt(n)`.
pub fn continuous_bound(inputs: &BoundInputs) -> Result<f64> {
    let lip = inputs.lipschitz.ok_or_else(|| {
        Error::InvalidParameter("continuous bound needs a Lipschitz constant".into())
    })?;
    Ok(continuous_bound_with(inputs, lip))
}

pub(crate) fn continuous_bound_with(inputs: &BoundInputs, lip: f64) -> f64 {
    let e = inputs.exp_neg();
    let c2 = inputs.c * inputs.c;
    let span = inputs.b - inputs.a;
    (lip * lip / c2 + 4.0 * span * span * e * e / (c2 * (1.0 - e) * (1.0 - e))) / inputs.n.sqrt()
}

/// `(1 + e^{-eps}) / (1 - e^{-eps})`.
pub fn cut_factor(epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "privacy level must be > 0, got {epsilon}"
        )));
    }
    let e = exp_neg_epsilon(epsilon);
    Ok((1.0 + e) / (1.0 - e))
}

/// Expected absolute error bound of the cut estimator,
/// `(1 + e^{-eps}) / (1 - e^{-eps}) sqrt(|S| |T|)`.
pub fn cut_bound(s_size: usize, t_size: usize, epsilon: f64) -> Result<f64> {
    if s_size == 0 || t_size == 0 {
        return Err(Error::InvalidParameter("cut sides must be nonempty".into()));
    }
    Ok(cut_factor(epsilon)? * ((s_size as f64) * (t_size as f64)).sqrt())
}

/// Bound over all cuts of a graph, using `|S| |T| <= |V|^2`.
pub fn cut_bound_global(vertex_count: usize, epsilon: f64) -> Result<f64> {
    cut_bound(vertex_count, vertex_count, epsilon)
}

/// Every bound that applies to the given inputs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundTable {
    pub upper_squared: f64,
    pub upper_squared_proper: f64,
    pub upper_absolute: f64,
    pub upper_absolute_proper: f64,
    pub lower_asymptotic: f64,
    pub lower_finite_n: f64,
    pub continuous: Option<f64>,
}

impl BoundTable {
    pub fn evaluate(inputs: &BoundInputs) -> Self {
        BoundTable {
            upper_squared: upper_bound_squared(inputs, false),
            upper_squared_proper: upper_bound_squared(inputs, true),
            upper_absolute: upper_bound_absolute(inputs, false),
            upper_absolute_proper: upper_bound_absolute(inputs, true),
            lower_asymptotic: lower_bound_squared_asymptotic(inputs),
            lower_finite_n: lower_bound_finite_n(inputs),
            continuous: inputs.lipschitz.map(|lip| continuous_bound_with(inputs, lip)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    /// Independent reference: composite Simpson on the normal density.
    fn simpson_cdf(t: f64) -> f64 {
        let density = |u: f64| (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let (lo, hi) = if t >= 0.0 { (0.0, t) } else { (t, 0.0) };
        let steps = 200_000;
        let h = (hi - lo) / steps as f64;
        let mut s = density(lo) + density(hi);
        for k in 1..steps {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            s += w * density(lo + k as f64 * h);
        }
        let area = s * h / 3.0;
        if t >= 0.0 {
            0.5 + area
        } else {
            0.5 - area
        }
    }

    #[test]
    fn cdf_against_frozen_values() {
        let frozen = [
            (1.0, 0.841_344_746_068_542_9),
            (-8.0, 6.220_960_574_271_784e-16),
            (-5.0, 2.866_515_718_791_939e-7),
            (-3.0, 0.001_349_898_031_630_095),
            (-1.5, 0.066_807_201_268_858_07),
            (0.3, 0.617_911_422_188_952_6),
            (2.0, 0.977_249_868_051_820_8),
            (4.0, 0.999_968_328_758_166_9),
            (7.0, 0.999_999_999_998_720_2),
        ];
        for (t, want) in frozen {
            close(std_normal_cdf(t), want, 1e-13);
        }
        // Deep tail keeps relative precision.
        assert!((std_normal_cdf(-8.0) / 6.220_960_574_271_784e-16 - 1.0).abs() < 1e-10);
        assert_eq!(std_normal_cdf(0.0), 0.5);
        close(std_normal_cdf(-1.0), 1.0 - std_normal_cdf(1.0), 1e-15);
    }

    #[test]
    fn cdf_against_quadrature() {
        let mut t = -6.0;
        while t <= 6.0 {
            close(std_normal_cdf(t), simpson_cdf(t), 1e-12);
            t += 0.37;
        }
        // Continuity across the series/continued-fraction switch.
        let s = ERF_SWITCH;
        close(erf(s - 1e-12), erf(s + 1e-12), 1e-13);
        close(erfc(s - 1e-12), erfc(s + 1e-12), 1e-13);
    }

    #[test]
    fn upper_bound_examples() {
        let i = BoundInputs::normalized(1000.0, 1, 1.0).unwrap();
        close(upper_bound_squared(&i, false), 4.682_694_376_831_169e-3, 1e-15);
        close(upper_bound_squared(&i, true), 1.873_077_750_732_468e-2, 1e-14);
        let big = BoundInputs::normalized(1000.0, 1, 800.0).unwrap();
        close(upper_bound_squared(&big, false), 1e-3, 1e-18);
        let i4 = BoundInputs::normalized(1e4, 1, 1.0).unwrap();
        close(upper_bound_squared(&i4, false), 4.682_694_376_831_169e-4, 1e-16);
        close(upper_bound_absolute(&i4, false), 2.163_953_413_738_653e-2, 1e-15);
        close(upper_bound_absolute(&i4, true), 2.0 * upper_bound_absolute(&i4, false), 0.0);
    }

    #[test]
    fn lower_bound_examples() {
        let i = BoundInputs::normalized(1e6, 1, 1.0).unwrap();
        close(lower_bound_squared_asymptotic(&i), 1.530_143_022_199_57e-11, 1e-20);
        let i8 = BoundInputs::normalized(1e8, 1, 1.0).unwrap();
        let finite = lower_bound_finite_n(&i8);
        close(finite, 1.527_198_785_806_867e-13, 1e-21);
        let asym = lower_bound_squared_asymptotic(&i8);
        assert!((finite / asym - 1.0).abs() < 0.01);
        assert!(finite <= asym * 1.01);
        // Berry–Esseen penalty dominates at small n.
        let small = BoundInputs::normalized(10.0, 3, 1.0).unwrap();
        assert_eq!(lower_bound_finite_n(&small), 0.0);
    }

    #[test]
    fn continuous_and_cut_examples() {
        let i = BoundInputs::normalized(1e4, 1, 1.0).unwrap();
        assert!(continuous_bound(&i).is_err());
        let with = i.with_lipschitz(1.0).unwrap();
        close(continuous_bound(&with).unwrap(), 2.354_787_549_353_864e-2, 1e-15);
        let e = (-1.0f64).exp();
        close(
            continuous_bound_with(&i, 0.0),
            4.0 * e * e / ((1.0 - e) * (1.0 - e)) / 100.0,
            1e-16,
        );
        close(cut_bound(1, 1, 1.0).unwrap(), 2.163_953_413_738_653, 1e-14);
        close(cut_bound(2, 6, 1.0).unwrap(), 2.0 * cut_bound(1, 3, 1.0).unwrap(), 1e-12);
        assert_eq!(cut_bound(3, 12, 700.0).unwrap(), 6.0);
        assert!(cut_bound(0, 1, 1.0).is_err());
        assert!(cut_bound(1, 1, 0.0).is_err());
        close(cut_bound_global(10, 1.0).unwrap(), 21.639_534_137_386_53, 1e-12);
    }

    #[test]
    fn input_validation() {
        assert!(BoundInputs::normalized(0.5, 1, 1.0).is_err());
        assert!(BoundInputs::normalized(10.0, 0, 1.0).is_err());
        assert!(BoundInputs::normalized(10.0, 1, 0.0).is_err());
        assert!(BoundInputs::new(10.0, 1, 1.0, 1.0, 1.0, 1.0).is_err());
        assert!(BoundInputs::new(10.0, 1, 1.0, 0.0, 1.0, 0.0).is_err());
        let i = BoundInputs::normalized(10.0, 1, 1.0).unwrap();
        assert!(i.with_lipschitz(-1.0).is_err());
        assert!(i.with_berry_esseen(0.0).is_err());
    }

    #[test]
    fn monotonicity_and_ordering_on_grid() {
        let eps_grid = [0.1, 0.25, 0.5, 1.0, 2.0, 3.0, 5.0];
        let n_grid = [100.0, 1e3, 1e4, 1e5, 1e6, 1e8];
        for l in 1..=8 {
            for (k, &eps) in eps_grid.iter().enumerate() {
                let mut prev = f64::INFINITY;
                let mut prev_lo = f64::INFINITY;
                for &n in &n_grid {
                    let i = BoundInputs::normalized(n, l, eps).unwrap();
                    let up = upper_bound_squared(&i, false);
                    let lo = lower_bound_squared_asymptotic(&i);
                    let fin = lower_bound_finite_n(&i);
                    assert!(up.is_finite() && up > 0.0 && lo > 0.0);
                    assert!(lo <= up && fin <= upper_bound_squared(&i, true));
                    assert!(up <= prev && lo <= prev_lo);
                    let abs = upper_bound_absolute(&i, false);
                    assert!((abs * abs - up).abs() <= 1e-12 * up.max(1e-300) + 1e-12);
                    prev = up;
                    prev_lo = lo;
                    if k + 1 < eps_grid.len() {
                        let next = BoundInputs::normalized(n, l, eps_grid[k + 1]).unwrap();
                        assert!(upper_bound_squared(&next, false) <= up);
                    }
                }
            }
        }
    }
}
