//! Polynomial surrogates of model dynamics with certified error bounds.

mod bernstein;
mod taylor;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{IntervalError, SystemModel};
use crate::poly::{PolyDoc, Polynomial, Vars};

pub use bernstein::{
    bernstein_error_bound, bernstein_expand, binomial, BernsteinComponent, BernsteinErrorMode,
    BernsteinSurrogate,
};
pub use taylor::{
    taylor_expand, taylor_remainder_bounds, taylor_surrogate, RemainderMode, TaylorComponent,
    TaylorSurrogate,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ApproxError {
    #[error("not differentiable over the region: {0}")]
    NotDifferentiable(String),
    #[error("not continuous over the region: {0}")]
    NotContinuous(String),
    #[error("variable `{0}` needs a bounded range")]
    Unbounded(String),
    #[error("the Bernstein operator needs a pure box region")]
    NonBox,
    #[error("invalid order {0}")]
    BadOrder(u32),
    #[error("component depends on `{0}` but its Bernstein degree is 0")]
    ZeroDegree(String),
    #[error("expected {expected} degrees, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("interval evaluation failed: {0}")]
    Interval(IntervalError),
}

/// Surrogate of an already-polynomial model.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactSurrogate {
    pub vars: Vars,
    pub n: usize,
    pub m: usize,
    pub f: Vec<Polynomial>,
    pub h: Vec<Polynomial>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ApproxKind {
    Taylor,
    Bernstein,
    ExactPolynomial,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ApproxModel {
    Taylor(TaylorSurrogate),
    Bernstein(BernsteinSurrogate),
    Exact(ExactSurrogate),
}

impl ApproxModel {
    pub fn kind(&self) -> ApproxKind {
        match self {
            ApproxModel::Taylor(_) => ApproxKind::Taylor,
            ApproxModel::Bernstein(_) => ApproxKind::Bernstein,
            ApproxModel::Exact(_) => ApproxKind::ExactPolynomial,
        }
    }

    /// Serializable summary.
    pub fn to_doc(&self) -> SurrogateDoc {
        let mut meta = BTreeMap::new();
        let mut components = Vec::new();
        let (kind, vars) = match self {
            ApproxModel::Exact(s) => {
                for (name, p) in named(&s.f, &s.h) {
                    components.push(ComponentDoc {
                        name,
                        poly: p.to_doc(),
                        error_monomials: vec![],
                        error_bounds: vec![],
                    });
                }
                (ApproxKind::ExactPolynomial, &s.vars)
            }
            ApproxModel::Taylor(s) => {
                meta.insert("order".into(), serde_json::json!(s.order));
                meta.insert("remainder_mode".into(), serde_json::json!(s.mode));
                let polys: Vec<&TaylorComponent> = s.f.iter().chain(&s.h).collect();
                for (k, c) in polys.into_iter().enumerate() {
                    components.push(ComponentDoc {
                        name: component_name(k, s.n),
                        poly: c.poly.to_doc(),
                        error_monomials: c.remainder_monomials.iter().map(|b| b.0.clone()).collect(),
                        error_bounds: c.remainder_bounds.clone(),
                    });
                }
                (ApproxKind::Taylor, &s.vars)
            }
            ApproxModel::Bernstein(s) => {
                meta.insert("error_mode".into(), serde_json::json!(s.error_mode));
                meta.insert("scale".into(), serde_json::json!(s.to_canonical.scale));
                meta.insert("offset".into(), serde_json::json!(s.to_canonical.offset));
                meta.insert(
                    "degrees".into(),
                    serde_json::json!(s.f.iter().chain(&s.h).map(|c| &c.degrees).collect::<Vec<_>>()),
                );
                for (k, c) in s.f.iter().chain(&s.h).enumerate() {
                    components.push(ComponentDoc {
                        name: component_name(k, s.n),
                        poly: c.poly.to_doc(),
                        error_monomials: vec![vec![0; s.vars.len()]],
                        error_bounds: vec![c.error_bound],
                    });
                }
                (ApproxKind::Bernstein, &s.vars)
            }
        };
        SurrogateDoc {
            kind,
            variables: vars.to_vec(),
            components,
            metadata: meta,
        }
    }
}

fn component_name(k: usize, n: usize) -> String {
    if k < n {
        format!("f{}", k + 1)
    } else {
        format!("h{}", k - n + 1)
    }
}

fn named<'a>(f: &'a [Polynomial], h: &'a [Polynomial]) -> Vec<(String, &'a Polynomial)> {
    f.iter()
        .chain(h)
        .enumerate()
        .map(|(k, p)| (component_name(k, f.len()), p))
        .collect()
}

/// JSON form of a surrogate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurrogateDoc {
    pub kind: ApproxKind,
    pub variables: Vec<String>,
    pub components: Vec<ComponentDoc>,
    pub metadata: BTreeMap<String, serde_json::Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentDoc {
    pub name: String,
    #[serde(flatten)]
    pub poly: PolyDoc,
    pub error_monomials: Vec<Vec<u32>>,
    pub error_bounds: Vec<f64>,
}

/// Exact surrogate when every `f_i` and `h_j` is a polynomial expression.
pub fn detect_polynomial(model: &SystemModel) -> Option<ApproxModel> {
    let vars = model.vars();
    let f = model
        .f
        .iter()
        .map(|e| e.to_polynomial(&vars))
        .collect::<Option<Vec<_>>>()?;
    let h = model
        .h
        .iter()
        .map(|e| e.to_polynomial(&vars))
        .collect::<Option<Vec<_>>>()?;
    Some(ApproxModel::Exact(ExactSurrogate {
        vars,
        n: model.n(),
        m: model.m(),
        f,
        h,
    }))
}
