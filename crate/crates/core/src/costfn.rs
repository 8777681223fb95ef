//! Edge cost-function families.
//!
//! Five closed-form families cover the two regimes the solvers care about:
//! nondecreasing latencies (`Constant`, `Affine`, `Polynomial`) and
//! cost-sharing latencies whose total cost `x * l(x)` is nondecreasing and
//! concave (`SharedFixed`, `PowerShare`). Classification is structural, read
//! off the family and its parameters, never guessed from samples.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A congestion cost function `l(x)` for one edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "wire::CostFnWire", into = "wire::CostFnWire")]
pub enum CostFn {
    /// `l(x) = b`.
    Constant { b: f64 },
    /// `l(x) = a*x + b`.
    Affine { a: f64, b: f64 },
    /// `l(x) = sum_j coeffs[j] * x^j`.
    Polynomial { coeffs: Vec<f64> },
    /// `l(x) = c/x + l` above `w_min`, held at `c/w_min + l` below it.
    SharedFixed { c: f64, l: f64, w_min: f64 },
    /// `l(x) = c * x^(beta-1)` for `x > 0`; `l(0) = l(w_floor)`.
    ///
    /// A missing floor is filled with the smallest source demand when the
    /// function is attached to an [`Instance`](crate::Instance).
    PowerShare { c: f64, beta: f64, w_floor: Option<f64> },
}

mod wire {
    use serde::{Deserialize, Serialize};

    use super::CostFn;

    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Constant {
        b: f64,
    }

    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Affine {
        a: f64,
        b: f64,
    }

    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct Polynomial {
        coeffs: Vec<f64>,
    }

    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct SharedFixed {
        c: f64,
        l: f64,
        w_min: f64,
    }

    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct PowerShare {
        c: f64,
        beta: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        w_floor: Option<f64>,
    }

    #[derive(Serialize, Deserialize)]
    #[serde(tag = "kind", content = "params", rename_all = "snake_case", deny_unknown_fields)]
    pub enum CostFnWire {
        Constant(Constant),
        Affine(Affine),
        Polynomial(Polynomial),
        SharedFixed(SharedFixed),
        PowerShare(PowerShare),
    }

    impl From<CostFnWire> for CostFn {
        fn from(w: CostFnWire) -> Self {
            match w {
                CostFnWire::Constant(Constant { b }) => CostFn::Constant { b },
                CostFnWire::Affine(Affine { a, b }) => CostFn::Affine { a, b },
                CostFnWire::Polynomial(Polynomial { coeffs }) => CostFn::Polynomial { coeffs },
                CostFnWire::SharedFixed(SharedFixed { c, l, w_min }) => CostFn::SharedFixed { c, l, w_min },
                CostFnWire::PowerShare(PowerShare { c, beta, w_floor }) => CostFn::PowerShare { c, beta, w_floor },
            }
        }
    }

    impl From<CostFn> for CostFnWire {
        fn from(f: CostFn) -> Self {
            match f {
                CostFn::Constant { b } => CostFnWire::Constant(Constant { b }),
                CostFn::Affine { a, b } => CostFnWire::Affine(Affine { a, b }),
                CostFn::Polynomial { coeffs } => CostFnWire::Polynomial(Polynomial { coeffs }),
                CostFn::SharedFixed { c, l, w_min } => CostFnWire::SharedFixed(SharedFixed { c, l, w_min }),
                CostFn::PowerShare { c, beta, w_floor } => CostFnWire::PowerShare(PowerShare { c, beta, w_floor }),
            }
        }
    }
}

/// Structural class of a cost function on `[0, W]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum FnClass {
    /// Nondecreasing and `a`-Lipschitz on `[0, W]`.
    NondecreasingLipschitz { a: f64 },
    /// Nonincreasing with `x * l(x)` nondecreasing and concave.
    Good,
    /// Parameters outside every supported family.
    Neither,
}

impl FnClass {
    pub fn is_good(&self) -> bool {
        matches!(self, FnClass::Good)
    }

    pub fn lipschitz(&self) -> Option<f64> {
        match self {
            FnClass::NondecreasingLipschitz { a } => Some(*a),
            _ => None,
        }
    }
}

fn nonneg(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be a finite nonnegative number, got {v}")))
    }
}

fn check_x(x: f64) -> Result<()> {
    if x.is_nan() || x < 0.0 {
        Err(Error::Domain(format!("cost functions are defined on x >= 0, got {x}")))
    } else {
        Ok(())
    }
}

impl CostFn {
    /// Checks the parameter invariants of the family.
    pub fn check(&self) -> Result<()> {
        match self {
            CostFn::Constant { b } => nonneg("b", *b),
            CostFn::Affine { a, b } => {
                nonneg("a", *a)?;
                nonneg("b", *b)
            }
            CostFn::Polynomial { coeffs } => {
                coeffs.iter().try_for_each(|c| nonneg("polynomial coefficient", *c))
            }
            CostFn::SharedFixed { c, l, w_min } => {
                nonneg("c", *c)?;
                nonneg("l", *l)?;
                if !(w_min.is_finite() && *w_min > 0.0) {
                    return Err(Error::Domain(format!("w_min must be positive, got {w_min}")));
                }
                Ok(())
            }
            CostFn::PowerShare { c, beta, w_floor } => {
                nonneg("c", *c)?;
                if !(*beta > 0.0 && *beta <= 1.0) {
                    return Err(Error::Domain(format!("beta must lie in (0, 1], got {beta}")));
                }
                if let Some(f) = w_floor {
                    if !(f.is_finite() && *f > 0.0) {
                        return Err(Error::Domain(format!("w_floor must be positive, got {f}")));
                    }
                }
                Ok(())
            }
        }
    }

    /// `l(x)`.
    pub fn eval_cost(&self, x: f64) -> Result<f64> {
        check_x(x)?;
        Ok(match self {
            CostFn::Constant { b } => *b,
            CostFn::Affine { a, b } => a * x + b,
            CostFn::Polynomial { coeffs } => horner(coeffs, x),
            CostFn::SharedFixed { c, l, w_min } => {
                if x >= *w_min {
                    c / x + l
                } else {
                    c / w_min + l
                }
            }
            CostFn::PowerShare { c, beta, w_floor } => {
                if x > 0.0 {
                    c * x.powf(beta - 1.0)
                } else if *beta == 1.0 {
                    *c
                } else {
                    let f = w_floor.ok_or_else(|| {
                        Error::Domain("power-share floor is unresolved at x = 0".into())
                    })?;
                    c * f.powf(beta - 1.0)
                }
            }
        })
    }

    /// `x * l(x)`, exactly zero at `x = 0`.
    pub fn eval_total(&self, x: f64) -> Result<f64> {
        check_x(x)?;
        if x == 0.0 {
            return Ok(0.0);
        }
        Ok(match self {
            CostFn::SharedFixed { c, l, w_min } => {
                if x >= *w_min {
                    c + x * l
                } else {
                    x * (c / w_min + l)
                }
            }
            CostFn::PowerShare { c, beta, .. } => c * x.powf(*beta),
            _ => x * self.eval_cost(x)?,
        })
    }

    /// Structural classification on `[0, w]`.
    pub fn classify(&self, w: f64) -> FnClass {
        if self.check().is_err() {
            return FnClass::Neither;
        }
        match self {
            CostFn::Constant { .. } => FnClass::NondecreasingLipschitz { a: 0.0 },
            CostFn::Affine { a, .. } => FnClass::NondecreasingLipschitz { a: *a },
            CostFn::Polynomial { coeffs } => {
                // derivative is nondecreasing on [0, w], so its value at w bounds it
                let a = coeffs
                    .iter()
                    .enumerate()
                    .skip(1)
                    .map(|(j, c)| j as f64 * c * w.powi(j as i32 - 1))
                    .sum();
                FnClass::NondecreasingLipschitz { a }
            }
            CostFn::SharedFixed { .. } | CostFn::PowerShare { .. } => FnClass::Good,
        }
    }

    /// `\int_0^x l(t) dt` for the nondecreasing families.
    pub fn integral(&self, x: f64) -> Result<f64> {
        check_x(x)?;
        match self {
            CostFn::Constant { b } => Ok(b * x),
            CostFn::Affine { a, b } => Ok(a * x * x / 2.0 + b * x),
            CostFn::Polynomial { coeffs } => Ok(coeffs
                .iter()
                .enumerate()
                .map(|(j, c)| c * x.powi(j as i32 + 1) / (j as f64 + 1.0))
                .sum()),
            _ => Err(Error::Unsupported(
                "the potential is only defined for nondecreasing families".into(),
            )),
        }
    }

    /// `d/dx [x * l(x)]` for the nondecreasing families.
    pub fn marginal_total(&self, x: f64) -> Result<f64> {
        check_x(x)?;
        match self {
            CostFn::Constant { b } => Ok(*b),
            CostFn::Affine { a, b } => Ok(2.0 * a * x + b),
            CostFn::Polynomial { coeffs } => Ok(coeffs
                .iter()
                .enumerate()
                .map(|(j, c)| (j as f64 + 1.0) * c * x.powi(j as i32))
                .sum()),
            _ => Err(Error::Unsupported(
                "marginal costs are only used for nondecreasing families".into(),
            )),
        }
    }

    pub(crate) fn resolve_floor(&mut self, floor: f64) {
        if let CostFn::PowerShare { w_floor, .. } = self {
            if w_floor.is_none() {
                *w_floor = Some(floor);
            }
        }
    }

    /// Short family name, as used in the instance format.
    pub fn kind(&self) -> &'static str {
        match self {
            CostFn::Constant { .. } => "constant",
            CostFn::Affine { .. } => "affine",
            CostFn::Polynomial { .. } => "polynomial",
            CostFn::SharedFixed { .. } => "shared_fixed",
            CostFn::PowerShare { .. } => "power_share",
        }
    }
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}
