//! Serializable one-argument function presets.
//!
//! Drift, volatility, cost and reward functions arrive from config files as
//! [`FunctionSpec`] values and are compiled into shared closures
//! ([`RealFn`]) before being handed to the solvers.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::real::Real;

/// Shared evaluable function of one scalar.
pub type RealFn<F> = Arc<dyn Fn(F) -> F + Send + Sync>;

/// Wraps a plain closure into a [`RealFn`].
pub fn real_fn<F: Real>(f: impl Fn(F) -> F + Send + Sync + 'static) -> RealFn<F> {
    Arc::new(f)
}

/// Config-level description of a scalar function.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FunctionSpec {
    /// `value`
    Constant { value: f64 },
    /// `intercept + slope * x`
    Affine {
        #[serde(default)]
        intercept: f64,
        slope: f64,
    },
    /// `coeff * x^exponent` (uses `powf` semantics; meant for `x >= 0`)
    Power { coeff: f64, exponent: f64 },
    /// Piecewise-linear interpolation of `(xs, ys)`, clamped outside.
    Table { xs: Vec<f64>, ys: Vec<f64> },
    /// Arbitrary expression in `x`, see the `expr` module for the grammar.
    Expr { formula: String },
}

impl FunctionSpec {
    /// Compiles the spec into an evaluable closure.
    pub fn compile<F: Real>(&self) -> Result<RealFn<F>> {
        match self {
            FunctionSpec::Constant { value } => {
                let v = *value;
                Ok(real_fn(move |_x: F| F::of(v)))
            }
            FunctionSpec::Affine { intercept, slope } => {
                let (a, b) = (*intercept, *slope);
                Ok(real_fn(move |x: F| F::of(a) + F::of(b) * x))
            }
            FunctionSpec::Power { coeff, exponent } => {
                let (c, e) = (*coeff, *exponent);
                Ok(real_fn(move |x: F| F::of(c) * x.powf(F::of(e))))
            }
            FunctionSpec::Table { xs, ys } => {
                if xs.len() != ys.len() || xs.len() < 2 {
                    return Err(Error::FunctionSpec(
                        "table needs matching xs/ys with at least two points".into(),
                    ));
                }
                if xs.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::FunctionSpec(
                        "table xs must be strictly increasing".into(),
                    ));
                }
                let xs = xs.clone();
                let ys = ys.clone();
                Ok(real_fn(move |x: F| table_eval(&xs, &ys, x)))
            }
            FunctionSpec::Expr { formula } => {
                let ast = Expr::parse(formula)?;
                Ok(real_fn(move |x: F| ast.eval(x)))
            }
        }
    }
}

fn table_eval<F: Real>(xs: &[f64], ys: &[f64], x: F) -> F {
    let xf = x.to_f64();
    if xf <= xs[0] {
        return F::of(ys[0]);
    }
    if xf >= xs[xs.len() - 1] {
        return F::of(ys[ys.len() - 1]);
    }
    let i = match xs.binary_search_by(|v| v.partial_cmp(&xf).unwrap()) {
        Ok(i) => return F::of(ys[i]),
        Err(i) => i,
    };
    let (x0, x1) = (xs[i - 1], xs[i]);
    let (y0, y1) = (ys[i - 1], ys[i]);
    let t = (xf - x0) / (x1 - x0);
    F::of(y0 + t * (y1 - y0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_evaluate() {
        let c: RealFn<f64> = FunctionSpec::Constant { value: 2.5 }.compile().unwrap();
        assert_eq!(c(10.0), 2.5);

        let a: RealFn<f64> = FunctionSpec::Affine {
            intercept: 1.0,
            slope: -2.0,
        }
        .compile()
        .unwrap();
        assert_eq!(a(3.0), -5.0);

        let p: RealFn<f64> = FunctionSpec::Power {
            coeff: 3.0,
            exponent: 2.0,
        }
        .compile()
        .unwrap();
        assert_eq!(p(2.0), 12.0);

        let e: RealFn<f64> = FunctionSpec::Expr {
            formula: "exp(-x)".into(),
        }
        .compile()
        .unwrap();
        assert!((e(1.0) - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn table_interpolates_and_clamps() {
        let t: RealFn<f64> = FunctionSpec::Table {
            xs: vec![0.0, 1.0, 2.0],
            ys: vec![0.0, 10.0, 0.0],
        }
        .compile()
        .unwrap();
        assert_eq!(t(0.5), 5.0);
        assert_eq!(t(1.5), 5.0);
        assert_eq!(t(-3.0), 0.0);
        assert_eq!(t(9.0), 0.0);
    }

    #[test]
    fn bad_tables_rejected() {
        assert!(FunctionSpec::Table {
            xs: vec![0.0, 0.0],
            ys: vec![1.0, 2.0],
        }
        .compile::<f64>()
        .is_err());
    }
}
