//! Loss models: value, subgradient, curvature minorant `Δ̲`, smoothness
//! majorant `Δ̄` and the conjugate offset `Γ*`.

use serde::{Deserialize, Serialize};

use crate::{Error, ExtReal, Result};

/// Slack allowed when checking that an argument lies in a closed interval.
const RANGE_SLACK: f64 = 1e-12;

/// Grid spacing used to locate the logistic curvature infimum.
const LOGISTIC_GRID_STEP: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        assert!(lo <= hi, "interval [{lo}, {hi}] is empty");
        Interval { lo, hi }
    }

    pub fn symmetric(b: f64) -> Self {
        Interval::new(-b, b)
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo - RANGE_SLACK && x <= self.hi + RANGE_SLACK
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }

    /// The difference set `I − I`.
    pub fn differences(&self) -> Interval {
        Interval::new(self.lo - self.hi, self.hi - self.lo)
    }

    pub fn max_abs(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    pub(crate) fn check(&self, what: &'static str, x: f64) -> Result<()> {
        if x.is_finite() && self.contains(x) {
            Ok(())
        } else {
            Err(Error::Domain {
                what,
                value: x,
                interval: self.to_string(),
            })
        }
    }
}

impl std::fmt::Display for Interval {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum LossKind {
    Square,
    Absolute,
    QLoss { q: f64 },
    Logistic,
}

/// Configuration record for a loss model.
///
/// Unset curvature fields take the built-in defaults of the named loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub name: String,
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prediction_range: Option<[f64; 2]>,
}

/// The restricted-smoothness set `S` together with its two-point witnesses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SmoothnessSet {
    /// `S` is the whole prediction range.
    PredictionRange,
    /// `S = {κ}`.
    Point(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossModel {
    pub kind: LossKind,
    pub outcome_range: Interval,
    pub prediction_range: Interval,
    /// Uniform bound `G` on `|∂ℓ(ŷ, y)|`.
    pub grad_bound: f64,
    /// `K` in `Δ̲(t) = K |t|^r`.
    pub curvature_const: f64,
    /// `r ≥ 2` in `Δ̲(t) = K |t|^r`.
    pub curvature_power: f64,
}

impl LossModel {
    pub fn square(b: f64) -> Self {
        Self::build(LossKind::Square, b, None, None, None).expect("valid square loss")
    }

    pub fn absolute(b: f64) -> Self {
        Self::build(LossKind::Absolute, b, None, None, None).expect("valid absolute loss")
    }

    pub fn q_loss(q: f64, b: f64) -> Result<Self> {
        Self::build(LossKind::QLoss { q }, b, None, None, None)
    }

    pub fn logistic(b: f64) -> Self {
        Self::build(LossKind::Logistic, b, None, None, None).expect("valid logistic loss")
    }

    /// Restricts predictions to `range`, recomputing `G` and any
    /// range-dependent curvature default.
    pub fn with_prediction_range(&self, range: Interval) -> Result<Self> {
        Self::build(
            self.kind,
            self.outcome_range.hi,
            Some(range),
            None,
            None,
        )
    }

    pub fn from_config(cfg: &LossConfig) -> Result<Self> {
        let kind = match cfg.name.as_str() {
            "square" => LossKind::Square,
            "absolute" => LossKind::Absolute,
            "q_loss" | "q" => LossKind::QLoss {
                q: cfg
                    .q
                    .ok_or_else(|| Error::Config("q_loss requires field `q`".into()))?,
            },
            "logistic" => LossKind::Logistic,
            other => return Err(Error::Config(format!("unknown loss {other:?}"))),
        };
        let pred = cfg
            .prediction_range
            .map(|[lo, hi]| {
                if lo <= hi {
                    Ok(Interval::new(lo, hi))
                } else {
                    Err(Error::Config(format!("empty prediction range [{lo}, {hi}]")))
                }
            })
            .transpose()?;
        Self::build(kind, cfg.b, pred, cfg.k, cfg.r)
    }

    pub fn to_config(&self) -> LossConfig {
        let (name, q) = match self.kind {
            LossKind::Square => ("square", None),
            LossKind::Absolute => ("absolute", None),
            LossKind::QLoss { q } => ("q_loss", Some(q)),
            LossKind::Logistic => ("logistic", None),
        };
        LossConfig {
            name: name.into(),
            b: self.outcome_range.hi,
            q,
            k: Some(self.curvature_const),
            r: Some(self.curvature_power),
            prediction_range: Some([self.prediction_range.lo, self.prediction_range.hi]),
        }
    }

    fn build(
        kind: LossKind,
        b: f64,
        prediction_range: Option<Interval>,
        k: Option<f64>,
        r: Option<f64>,
    ) -> Result<Self> {
        if !(b > 0.0 && b.is_finite()) {
            return Err(Error::InvalidArgument(format!("outcome bound B = {b} must be > 0")));
        }
        if let LossKind::QLoss { q } = kind {
            if !(q > 1.0 && q.is_finite()) {
                return Err(Error::InvalidArgument(format!("q-loss needs q > 1, got {q}")));
            }
        }
        let outcome_range = Interval::symmetric(b);
        let prediction_range = prediction_range.unwrap_or(outcome_range);
        // sup |ŷ − y| over the rectangle
        let spread = (prediction_range.hi + b).max(b - prediction_range.lo);
        let grad_bound = match kind {
            LossKind::Square => 2.0 * spread,
            LossKind::Absolute => 1.0,
            LossKind::QLoss { q } => q * spread.powf(q - 1.0),
            LossKind::Logistic => {
                let p = prediction_range.max_abs();
                b / (1.0 + (-b * p).exp())
            }
        };
        let (default_k, default_r) = match kind {
            LossKind::Square => (1.0, 2.0),
            LossKind::Absolute => (0.0, 2.0),
            LossKind::QLoss { q } if q < 2.0 => (q * (q - 1.0) / 2.0, 2.0),
            LossKind::QLoss { q } => (1.0 / (2f64.powf(q - 1.0) - 1.0), q),
            LossKind::Logistic => (0.5 * logistic_curvature_infimum(prediction_range, outcome_range), 2.0),
        };
        let curvature_const = k.unwrap_or(default_k);
        let curvature_power = r.unwrap_or(default_r);
        if curvature_const < 0.0 || curvature_power < 2.0 {
            return Err(Error::InvalidArgument(format!(
                "curvature needs K >= 0 and r >= 2, got K = {curvature_const}, r = {curvature_power}"
            )));
        }
        Ok(LossModel {
            kind,
            outcome_range,
            prediction_range,
            grad_bound,
            curvature_const,
            curvature_power,
        })
    }

    /// The outcome bound `B`.
    pub fn bound(&self) -> f64 {
        self.outcome_range.hi
    }

    pub fn is_square(&self) -> bool {
        matches!(self.kind, LossKind::Square)
    }

    fn check_args(&self, yhat: f64, y: f64) -> Result<()> {
        self.prediction_range.check("prediction", yhat)?;
        self.outcome_range.check("outcome", y)
    }

    /// `ℓ(ŷ, y)` without range checks; used in inner loops whose arguments
    /// were validated up front.
    pub fn value_unchecked(&self, yhat: f64, y: f64) -> f64 {
        match self.kind {
            LossKind::Square => (yhat - y) * (yhat - y),
            LossKind::Absolute => (yhat - y).abs(),
            LossKind::QLoss { q } => (yhat - y).abs().powf(q),
            LossKind::Logistic => softplus(-yhat * y),
        }
    }

    pub fn subgradient_unchecked(&self, yhat: f64, y: f64) -> f64 {
        let d = yhat - y;
        match self.kind {
            LossKind::Square => 2.0 * d,
            // midpoint of [-1, 1] at the kink
            LossKind::Absolute => sign0(d),
            LossKind::QLoss { q } => q * d.abs().powf(q - 1.0) * sign0(d),
            LossKind::Logistic => -y / (1.0 + (yhat * y).exp()),
        }
    }

    pub fn value(&self, yhat: f64, y: f64) -> Result<f64> {
        self.check_args(yhat, y)?;
        Ok(self.value_unchecked(yhat, y))
    }

    pub fn subgradient(&self, yhat: f64, y: f64) -> Result<f64> {
        self.check_args(yhat, y)?;
        Ok(self.subgradient_unchecked(yhat, y))
    }

    /// `Δ^y_{a,b} = ℓ(b,y) − ℓ(a,y) − ∂ℓ(a,y)(b − a)`.
    pub fn taylor_residual(&self, a: f64, b: f64, y: f64) -> Result<f64> {
        self.check_args(a, y)?;
        self.prediction_range.check("prediction", b)?;
        Ok(self.taylor_residual_unchecked(a, b, y))
    }

    pub fn taylor_residual_unchecked(&self, a: f64, b: f64, y: f64) -> f64 {
        if let LossKind::Square = self.kind {
            return (b - a) * (b - a);
        }
        self.value_unchecked(b, y) - self.value_unchecked(a, y) - self.subgradient_unchecked(a, y) * (b - a)
    }

    /// The curvature minorant `Δ̲(x) = K |x|^r`.
    pub fn delta_lower(&self, x: f64) -> Result<f64> {
        self.prediction_range.differences().check("difference", x)?;
        Ok(self.delta_lower_unchecked(x))
    }

    pub fn delta_lower_unchecked(&self, x: f64) -> f64 {
        self.curvature_const * x.abs().powf(self.curvature_power)
    }

    /// The restricted-smoothness set `S` configured for this model, if any.
    pub fn smoothness_set(&self) -> Option<SmoothnessSet> {
        match self.kind {
            LossKind::Square => Some(SmoothnessSet::PredictionRange),
            LossKind::QLoss { q } if q < 2.0 => Some(SmoothnessSet::Point(0.0)),
            _ => None,
        }
    }

    /// Two outcomes `(y₁, y₂)` such that `s` minimizes the average loss
    /// `½(ℓ(·, y₁) + ℓ(·, y₂))` over the prediction range.
    pub fn two_point_witness(&self, s: f64) -> Option<(f64, f64)> {
        if !self.prediction_range.contains(s) || !self.outcome_range.contains(s) {
            return None;
        }
        let b = self.bound();
        match self.kind {
            // symmetric losses: any pair centred at s
            LossKind::Square | LossKind::QLoss { .. } => {
                let delta = b - s.abs();
                Some((s - delta, s + delta))
            }
            // every point of [y₁, y₂] is a median
            LossKind::Absolute => Some((-b, b)),
            LossKind::Logistic if s == 0.0 => Some((-b, b)),
            LossKind::Logistic => None,
        }
    }

    /// The smoothness majorant `Δ̄_S(x)` for the configured set `S`.
    pub fn delta_upper(&self, x: f64) -> Result<f64> {
        match (self.kind, self.smoothness_set()) {
            (LossKind::Square, Some(_)) => {
                self.prediction_range.differences().check("difference", x)?;
                Ok(x * x)
            }
            (LossKind::QLoss { q }, Some(SmoothnessSet::Point(kappa))) => {
                let domain = Interval::new(
                    self.prediction_range.lo - kappa,
                    self.prediction_range.hi - kappa,
                );
                domain.check("difference", x)?;
                let b = self.bound();
                // binomial-series bound at |a − y| = B, valid for |x| ≤ B
                if x.abs() > b + RANGE_SLACK {
                    return Err(Error::Domain {
                        what: "difference",
                        value: x,
                        interval: Interval::symmetric(b).to_string(),
                    });
                }
                Ok(2.0 * q * (q - 1.0) * b.powf(q - 2.0) * x * x)
            }
            _ => Err(Error::Capability(format!(
                "no smoothness majorant configured for {:?}",
                self.kind
            ))),
        }
    }

    /// `Γ*(s)`: conjugate of `u ↦ Δ̲(√u)` over `u ≥ 0`, for `s ≥ 0`.
    pub fn gamma_star(&self, s: f64) -> Result<ExtReal> {
        gamma_star_power(self.curvature_const, self.curvature_power, s)
    }
}

/// Conjugate of `u ↦ K u^{r/2}` over `u ≥ 0`, evaluated at `s ≥ 0`.
///
/// For `r = 2` this is the indicator-style function `0` on `[0, K]` and `+∞`
/// beyond; for `r > 2` it is `(K/2)(r−2)(2s/(Kr))^{r/(r−2)}`.
pub fn gamma_star_power(k: f64, r: f64, s: f64) -> Result<ExtReal> {
    if !(s >= 0.0) {
        return Err(Error::Domain {
            what: "conjugate argument",
            value: s,
            interval: "[0, inf)".into(),
        });
    }
    if k == 0.0 {
        return Ok(if s == 0.0 { ExtReal::ZERO } else { ExtReal::PosInfinity });
    }
    if r == 2.0 {
        return Ok(if s <= k { ExtReal::ZERO } else { ExtReal::PosInfinity });
    }
    let value = 0.5 * k * (r - 2.0) * (2.0 * s / (k * r)).powf(r / (r - 2.0));
    Ok(ExtReal::Finite(value))
}

/// The looser closed form `((r−2)/(2e)) s^{r/(r−2)} / K^{2/(r−2)}` that
/// dominates [`gamma_star_power`] for `r > 2`.
pub fn gamma_star_power_bound(k: f64, r: f64, s: f64) -> Result<ExtReal> {
    if r == 2.0 || k == 0.0 {
        return gamma_star_power(k, r, s);
    }
    if !(s >= 0.0) {
        return Err(Error::Domain {
            what: "conjugate argument",
            value: s,
            interval: "[0, inf)".into(),
        });
    }
    let e = std::f64::consts::E;
    Ok(ExtReal::Finite(
        (r - 2.0) / (2.0 * e) * s.powf(r / (r - 2.0)) / k.powf(2.0 / (r - 2.0)),
    ))
}

fn logistic_curvature_infimum(pred: Interval, outcome: Interval) -> f64 {
    let steps = |i: Interval| ((i.width() / LOGISTIC_GRID_STEP).round() as usize).max(1);
    let (np, ny) = (steps(pred), steps(outcome));
    let mut inf = f64::INFINITY;
    for i in 0..=np {
        let a = pred.lo + pred.width() * i as f64 / np as f64;
        for j in 0..=ny {
            let y = outcome.lo + outcome.width() * j as f64 / ny as f64;
            let e = (a * y).exp();
            inf = inf.min(y * y * e / ((1.0 + e) * (1.0 + e)));
        }
    }
    inf
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sign0(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::linspace;

    const GRID: usize = 201;

    fn models() -> Vec<LossModel> {
        vec![
            LossModel::square(1.0),
            LossModel::absolute(1.0),
            LossModel::q_loss(1.5, 1.0).unwrap(),
            LossModel::q_loss(3.0, 1.0).unwrap(),
            LossModel::logistic(1.0),
            LossModel::square(2.0),
        ]
    }

    #[test]
    fn values_from_examples() {
        assert_eq!(LossModel::square(1.0).value(0.5, 1.0).unwrap(), 0.25);
        for x in [-0.7, 0.0, 0.4] {
            assert_eq!(LossModel::absolute(1.0).value(x, x).unwrap(), 0.0);
        }
        assert_eq!(LossModel::q_loss(1.5, 1.0).unwrap().value(0.0, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn out_of_range_names_the_interval() {
        let err = LossModel::square(1.0).value(1.5, 0.0).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("prediction") && msg.contains("[-1, 1]"), "{msg}");
        assert!(LossModel::square(1.0).subgradient(0.0, -2.0).is_err());
    }

    #[test]
    fn subgradients_from_examples() {
        assert_eq!(LossModel::square(1.0).subgradient(0.5, 1.0).unwrap(), -1.0);
        let abs = LossModel::absolute(2.0);
        assert_eq!(abs.subgradient(2.0, 1.0).unwrap(), 1.0);
        assert_eq!(abs.subgradient(0.3, 0.3).unwrap(), 0.0);
        assert!((LossModel::logistic(1.0).subgradient(0.0, 1.0).unwrap() + 0.5).abs() < 1e-15);
    }

    #[test]
    fn taylor_residual_examples() {
        let sq = LossModel::square(1.0);
        assert!((sq.taylor_residual(-0.3, 0.8, 0.1).unwrap() - 1.21).abs() < 1e-12);
        for m in models() {
            assert_eq!(m.taylor_residual(0.2, 0.2, -0.5).unwrap(), 0.0);
        }
        // two evaluation orders of the q = 1.5 residual at (0, 0.5, 1)
        let q = LossModel::q_loss(1.5, 1.0).unwrap();
        let direct = q.taylor_residual(0.0, 0.5, 1.0).unwrap();
        let expanded = 0.5f64.powf(1.5) - 1.0 + 1.5 * 0.5;
        assert!((direct - expanded).abs() < 1e-12, "{direct} vs {expanded}");
    }

    #[test]
    fn delta_lower_examples() {
        assert!((LossModel::square(1.0).delta_lower(0.3).unwrap() - 0.09).abs() < 1e-15);
        assert_eq!(LossModel::absolute(1.0).delta_lower(0.7).unwrap(), 0.0);
        assert!((LossModel::q_loss(1.5, 1.0).unwrap().delta_lower(0.2).unwrap() - 0.015).abs() < 1e-15);
    }

    #[test]
    fn delta_upper_examples() {
        assert!((LossModel::square(1.0).delta_upper(0.3).unwrap() - 0.09).abs() < 1e-15);
        let q = LossModel::q_loss(1.5, 1.0).unwrap();
        assert!((q.delta_upper(0.2).unwrap() - 0.06).abs() < 1e-15);
        assert_eq!(q.delta_upper(0.0).unwrap(), 0.0);
        assert!(matches!(
            LossModel::absolute(1.0).delta_upper(0.1),
            Err(Error::Capability(_))
        ));
    }

    #[test]
    fn gamma_star_examples() {
        let sq = LossModel::square(1.0);
        assert_eq!(sq.gamma_star(0.5).unwrap(), ExtReal::ZERO);
        assert_eq!(sq.gamma_star(1.0).unwrap(), ExtReal::ZERO);
        assert_eq!(sq.gamma_star(1.5).unwrap(), ExtReal::PosInfinity);
        assert!(sq.gamma_star(-0.1).is_err());

        // Δ(t) = t⁴: brute-force sup over u of s·u − u²
        let brute = linspace(0.0, 10.0, 1_000_001)
            .into_iter()
            .map(|u| 2.0 * u - u * u)
            .fold(f64::NEG_INFINITY, f64::max);
        let exact = gamma_star_power(1.0, 4.0, 2.0).unwrap().to_f64();
        assert!((brute - 1.0).abs() < 1e-9);
        assert!((exact - brute).abs() < 1e-9);
        let bound = gamma_star_power_bound(1.0, 4.0, 2.0).unwrap().to_f64();
        assert!((bound - 4.0 / std::f64::consts::E).abs() < 1e-12);
        assert!(exact <= bound);
    }

    #[test]
    fn gamma_star_is_monotone_and_a_conjugate() {
        let cases = [(1.0, 2.0), (1.0, 4.0), (0.3, 3.0), (2.0, 6.0), (0.375, 2.0)];
        let us = linspace(0.0, 100.0, 100_001);
        for (k, r) in cases {
            let mut prev = ExtReal::ZERO;
            for s in linspace(0.0, 3.0, 61) {
                let g = gamma_star_power(k, r, s).unwrap();
                assert!(g >= prev, "K={k} r={r} s={s}");
                prev = g;
                let sup = us
                    .iter()
                    .map(|&u| s * u - k * u.powf(r / 2.0))
                    .fold(f64::NEG_INFINITY, f64::max);
                match g {
                    ExtReal::Finite(v) => {
                        assert!(v >= sup - 1e-12);
                        assert!(v - sup <= 1e-6, "K={k} r={r} s={s}: {v} vs {sup}");
                        let b = gamma_star_power_bound(k, r, s).unwrap().to_f64();
                        assert!(v <= b + 1e-12);
                    }
                    ExtReal::PosInfinity => assert!(sup > 0.0),
                }
            }
        }
    }

    #[test]
    fn subgradients_are_bounded_valid_and_match_finite_differences() {
        let h = 1e-5;
        for m in models() {
            let preds = linspace(m.prediction_range.lo, m.prediction_range.hi, GRID);
            let outs = linspace(m.outcome_range.lo, m.outcome_range.hi, 41);
            for &a in &preds {
                for &y in &outs {
                    let g = m.subgradient(a, y).unwrap();
                    assert!(g.abs() <= m.grad_bound + 1e-12, "{:?} a={a} y={y}", m.kind);
                    let kink = matches!(m.kind, LossKind::Absolute | LossKind::QLoss { .. })
                        && (a - y).abs() < 2.0 * h;
                    if !kink && a - h >= m.prediction_range.lo && a + h <= m.prediction_range.hi {
                        let fd = (m.value_unchecked(a + h, y) - m.value_unchecked(a - h, y)) / (2.0 * h);
                        assert!((g - fd).abs() <= 10.0 * h, "{:?} a={a} y={y}: {g} vs {fd}", m.kind);
                    }
                }
            }
            for &a in preds.iter().step_by(10) {
                for &b in preds.iter().step_by(10) {
                    for &y in &outs {
                        let lhs = m.value_unchecked(b, y);
                        let rhs = m.value_unchecked(a, y) + m.subgradient_unchecked(a, y) * (b - a);
                        assert!(lhs >= rhs - 1e-12, "{:?}", m.kind);
                        let mid = 0.5 * (a + b);
                        assert!(
                            m.value_unchecked(mid, y)
                                <= 0.5 * (m.value_unchecked(a, y) + m.value_unchecked(b, y)) + 1e-12
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn two_point_witnesses_are_minimizers() {
        for m in models() {
            let preds = linspace(m.prediction_range.lo, m.prediction_range.hi, GRID);
            for &s in preds.iter().step_by(20) {
                let Some((y1, y2)) = m.two_point_witness(s) else { continue };
                let avg = |a: f64| 0.5 * (m.value_unchecked(a, y1) + m.value_unchecked(a, y2));
                let min = preds.iter().map(|&a| avg(a)).fold(f64::INFINITY, f64::min);
                assert!(avg(s) <= min + 1e-12, "{:?} s={s}", m.kind);
            }
        }
    }

    fn min_residual_excess(m: &LossModel) -> f64 {
        let preds = linspace(m.prediction_range.lo, m.prediction_range.hi, GRID);
        let outs = linspace(m.outcome_range.lo, m.outcome_range.hi, GRID);
        let mut worst = f64::INFINITY;
        for &a in &preds {
            for &b in &preds {
                for &y in outs.iter().step_by(4) {
                    let r = m.taylor_residual_unchecked(a, b, y);
                    worst = worst.min(r - m.delta_lower_unchecked(b - a));
                }
            }
        }
        worst
    }

    #[test]
    fn minorant_sandwich_holds_on_grid() {
        for m in [
            LossModel::square(1.0),
            LossModel::absolute(1.0),
            LossModel::q_loss(3.0, 1.0).unwrap(),
            LossModel::q_loss(2.5, 2.0).unwrap(),
            LossModel::logistic(1.0),
        ] {
            assert!(min_residual_excess(&m) >= -1e-10, "{:?}", m.kind);
        }
    }

    #[test]
    fn q_loss_below_two_minorant_needs_the_certified_constant() {
        // ℓ'' ≥ q(q−1)(2B)^{q−2} on the rectangle, hence Δ̲(x) ≥ ½ of that times x².
        let q = 1.5;
        let paper = LossModel::q_loss(q, 1.0).unwrap();
        assert!(min_residual_excess(&paper) < -0.05);
        let certified = LossModel::from_config(&LossConfig {
            name: "q_loss".into(),
            b: 1.0,
            q: Some(q),
            k: Some(0.5 * q * (q - 1.0) * 2f64.powf(q - 2.0)),
            r: None,
            prediction_range: None,
        })
        .unwrap();
        assert!(min_residual_excess(&certified) >= -1e-10);
    }

    #[test]
    fn majorant_sandwich_holds_at_witnesses() {
        for m in [
            LossModel::square(1.0),
            LossModel::q_loss(1.5, 1.0).unwrap(),
            LossModel::q_loss(1.2, 2.0).unwrap(),
        ] {
            let preds = linspace(m.prediction_range.lo, m.prediction_range.hi, GRID);
            let anchors: Vec<f64> = match m.smoothness_set().unwrap() {
                SmoothnessSet::PredictionRange => preds.iter().step_by(10).copied().collect(),
                SmoothnessSet::Point(k) => vec![k],
            };
            for s in anchors {
                let (y1, y2) = m.two_point_witness(s).unwrap();
                for &b in &preds {
                    let bound = match m.delta_upper(b - s) {
                        Ok(v) => v,
                        Err(_) => continue,
                    };
                    for y in [y1, y2] {
                        assert!(m.taylor_residual_unchecked(s, b, y) <= bound + 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn logistic_curvature_vanishes_when_zero_is_an_outcome() {
        let m = LossModel::logistic(1.0);
        assert_eq!(m.curvature_const, 0.0);
        let cfg = LossConfig {
            name: "logistic".into(),
            b: 1.0,
            q: None,
            k: Some(0.1),
            r: None,
            prediction_range: None,
        };
        assert_eq!(LossModel::from_config(&cfg).unwrap().curvature_const, 0.1);
    }

    #[test]
    fn config_round_trip() {
        let m = LossModel::q_loss(1.5, 2.0).unwrap();
        let json = serde_json::to_string(&m.to_config()).unwrap();
        let back = LossModel::from_config(&serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back, m);
        assert!(LossModel::from_config(&LossConfig {
            name: "hinge".into(),
            b: 1.0,
            q: None,
            k: None,
            r: None,
            prediction_range: None
        })
        .is_err());
    }
}
