use serde::{Deserialize, Serialize};

use super::{TimeDistribution, UtilityError};

/// Prototypical time-dependent utility curves.
///
/// Time is the duration of the pathological process in minutes. The urgency
/// kinds (linear, exponential and both deadline kinds) are non-increasing in
/// time once validated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum UtilityCurve {
    Constant {
        value: f64,
    },
    /// `max(start + slope * t, floor)`.
    LinearUrgency {
        start: f64,
        slope: f64,
        floor: f64,
    },
    /// `amplitude * exp(-rate * t) + offset`.
    ExponentialUrgency {
        amplitude: f64,
        rate: f64,
        #[serde(default)]
        offset: f64,
    },
    /// `pre` before the deadline, `post` from the deadline on (right-closed).
    HardDeadline {
        pre: f64,
        post: f64,
        deadline: f64,
    },
    /// A hard deadline whose position is uncertain.
    UncertainDeadline {
        pre: f64,
        post: f64,
        deadline: TimeDistribution,
    },
    /// Linear interpolation between knots, flat outside the knot range.
    PiecewiseLinear {
        knots: Vec<(f64, f64)>,
    },
}

impl UtilityCurve {
    pub fn kind(&self) -> &'static str {
        match self {
            UtilityCurve::Constant { .. } => "constant",
            UtilityCurve::LinearUrgency { .. } => "linear_urgency",
            UtilityCurve::ExponentialUrgency { .. } => "exponential_urgency",
            UtilityCurve::HardDeadline { .. } => "hard_deadline",
            UtilityCurve::UncertainDeadline { .. } => "uncertain_deadline",
            UtilityCurve::PiecewiseLinear { .. } => "piecewise_linear",
        }
    }

    /// Checks the parameter invariants of the curve kind.
    pub fn validate(&self) -> Result<(), String> {
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(format!("{name} must be finite"))
            }
        };
        match *self {
            UtilityCurve::Constant { value } => finite("value", value),
            UtilityCurve::LinearUrgency { start, slope, floor } => {
                finite("start", start)?;
                finite("slope", slope)?;
                finite("floor", floor)?;
                if slope > 0.0 {
                    return Err(format!("slope {slope} must be <= 0"));
                }
                Ok(())
            }
            UtilityCurve::ExponentialUrgency {
                amplitude,
                rate,
                offset,
            } => {
                finite("amplitude", amplitude)?;
                finite("rate", rate)?;
                finite("offset", offset)?;
                if rate < 0.0 {
                    return Err(format!("rate {rate} must be >= 0"));
                }
                if amplitude < 0.0 {
                    return Err(format!("amplitude {amplitude} must be >= 0"));
                }
                Ok(())
            }
            UtilityCurve::HardDeadline { pre, post, deadline } => {
                finite("pre", pre)?;
                finite("post", post)?;
                finite("deadline", deadline)?;
                if deadline < 0.0 {
                    return Err(format!("deadline {deadline} must be >= 0"));
                }
                if pre < post {
                    return Err(format!("pre value {pre} must be >= post value {post}"));
                }
                Ok(())
            }
            UtilityCurve::UncertainDeadline { pre, post, .. } => {
                finite("pre", pre)?;
                finite("post", post)?;
                if pre < post {
                    return Err(format!("pre value {pre} must be >= post value {post}"));
                }
                Ok(())
            }
            UtilityCurve::PiecewiseLinear { ref knots } => {
                if knots.is_empty() {
                    return Err("piecewise_linear needs at least one knot".to_string());
                }
                for &(t, v) in knots {
                    finite("knot time", t)?;
                    finite("knot value", v)?;
                }
                if knots.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return Err("knot times must be strictly increasing".to_string());
                }
                Ok(())
            }
        }
    }

    /// Evaluates the curve at `t` minutes.
    pub fn eval(&self, t: f64) -> Result<f64, UtilityError> {
        if t.is_nan() || t < 0.0 {
            return Err(UtilityError::NegativeTime(t));
        }
        Ok(self.eval_unchecked(t))
    }

    pub(crate) fn eval_unchecked(&self, t: f64) -> f64 {
        match *self {
            UtilityCurve::Constant { value } => value,
            UtilityCurve::LinearUrgency { start, slope, floor } => (start + slope * t).max(floor),
            UtilityCurve::ExponentialUrgency {
                amplitude,
                rate,
                offset,
            } => amplitude * (-rate * t).exp() + offset,
            UtilityCurve::HardDeadline { pre, post, deadline } => step(pre, post, deadline, t),
            UtilityCurve::UncertainDeadline {
                pre,
                post,
                ref deadline,
            } => deadline.expect(|d| step(pre, post, d, t)),
            UtilityCurve::PiecewiseLinear { ref knots } => interpolate(knots, t),
        }
    }

    /// True when the curve is non-increasing in time.
    pub fn is_non_increasing(&self) -> bool {
        match self {
            UtilityCurve::PiecewiseLinear { knots } => knots.windows(2).all(|w| w[1].1 <= w[0].1),
            _ => self.validate().is_ok(),
        }
    }

    /// Applies the positive affine map `u -> scale * u + shift` to the curve.
    pub fn affine(&self, scale: f64, shift: f64) -> UtilityCurve {
        let map = |v: f64| scale * v + shift;
        match *self {
            UtilityCurve::Constant { value } => UtilityCurve::Constant { value: map(value) },
            UtilityCurve::LinearUrgency { start, slope, floor } => UtilityCurve::LinearUrgency {
                start: map(start),
                slope: scale * slope,
                floor: map(floor),
            },
            UtilityCurve::ExponentialUrgency {
                amplitude,
                rate,
                offset,
            } => UtilityCurve::ExponentialUrgency {
                amplitude: scale * amplitude,
                rate,
                offset: map(offset),
            },
            UtilityCurve::HardDeadline { pre, post, deadline } => UtilityCurve::HardDeadline {
                pre: map(pre),
                post: map(post),
                deadline,
            },
            UtilityCurve::UncertainDeadline {
                pre,
                post,
                ref deadline,
            } => UtilityCurve::UncertainDeadline {
                pre: map(pre),
                post: map(post),
                deadline: deadline.clone(),
            },
            UtilityCurve::PiecewiseLinear { ref knots } => UtilityCurve::PiecewiseLinear {
                knots: knots.iter().map(|&(t, v)| (t, map(v))).collect(),
            },
        }
    }
}

fn step(pre: f64, post: f64, deadline: f64, t: f64) -> f64 {
    if t < deadline {
        pre
    } else {
        post
    }
}

fn interpolate(knots: &[(f64, f64)], t: f64) -> f64 {
    let first = knots[0];
    let last = knots[knots.len() - 1];
    if t <= first.0 {
        return first.1;
    }
    if t >= last.0 {
        return last.1;
    }
    // first index whose knot time is > t; guaranteed in 1..len
    let hi = knots.partition_point(|&(kt, _)| kt <= t);
    let (t0, v0) = knots[hi - 1];
    let (t1, v1) = knots[hi];
    if t == t0 {
        return v0;
    }
    v0 + (v1 - v0) * (t - t0) / (t1 - t0)
}
