//! Operator expressions as JSON trees, e.g.
//! `{"sum":[{"prod":[{"toeplitz":{"symbol":"1-abs2(z)"}},{"scalar":[2,0]}]}]}`.

use berezin_core::operators::{decompose_product, Factor, OperatorExpr};
use berezin_core::symbol::Symbol;
use berezin_core::C64;
use serde::{Deserialize, Serialize};

use crate::LabError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum OpNode {
    Sum(Vec<OpNode>),
    Prod(Vec<OpNode>),
    Toeplitz { symbol: String },
    /// `H*_{ψ̄} H_φ`.
    HankelPair { psi: String, phi: String },
    Identity {},
    Scalar([f64; 2]),
    /// `T_{φ_m} ⋯ T_{φ_1}` rewritten by the product decomposition.
    Decompose { symbols: Vec<String> },
}

fn parse(src: &str) -> Result<Symbol, LabError> {
    Symbol::parse(src).map_err(|e| LabError::Config(format!("symbol `{src}`: {e}")))
}

impl OpNode {
    pub fn to_expr(&self) -> Result<OperatorExpr, LabError> {
        Ok(match self {
            OpNode::Sum(items) => {
                let mut it = items.iter();
                let first = it
                    .next()
                    .ok_or_else(|| LabError::Config("empty `sum`".into()))?
                    .to_expr()?;
                it.try_fold(first, |acc, n| Ok::<_, LabError>(acc.plus(n.to_expr()?)))?
            }
            OpNode::Prod(items) => {
                let mut it = items.iter();
                let first = it
                    .next()
                    .ok_or_else(|| LabError::Config("empty `prod`".into()))?
                    .to_expr()?;
                it.try_fold(first, |acc, n| Ok::<_, LabError>(acc.times(&n.to_expr()?)))?
            }
            OpNode::Toeplitz { symbol } => OperatorExpr::toeplitz(parse(symbol)?),
            OpNode::HankelPair { psi, phi } => OperatorExpr::factor(Factor::HankelPair {
                psi: parse(psi)?,
                phi: parse(phi)?,
            }),
            OpNode::Identity {} => OperatorExpr::identity(),
            OpNode::Scalar([re, im]) => OperatorExpr::factor(Factor::Scalar(C64::new(*re, *im))),
            OpNode::Decompose { symbols } => {
                let list = symbols.iter().map(|s| parse(s)).collect::<Result<Vec<_>, _>>()?;
                decompose_product(&list)?
            }
        })
    }

    /// The symbol of a bare Toeplitz operator.
    pub fn single_symbol(&self) -> Option<&str> {
        match self {
            OpNode::Toeplitz { symbol } => Some(symbol),
            OpNode::Sum(v) | OpNode::Prod(v) if v.len() == 1 => v[0].single_symbol(),
            _ => None,
        }
    }
}
