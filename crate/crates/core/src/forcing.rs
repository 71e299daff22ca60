//! The right-hand side `A` of `S(u) = A`: a constant or an expression in `x`, `y`.

use std::fmt;

use evalexpr::{build_operator_tree, ContextWithMutableVariables, DefaultNumericTypes, HashMapContext, Node, Value};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::Vec2;

#[derive(Clone)]
pub enum Forcing {
    Constant(f64),
    Expression { source: String, tree: Node<DefaultNumericTypes> },
}

impl fmt::Debug for Forcing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Forcing::Constant(a) => write!(f, "Constant({a})"),
            Forcing::Expression { source, .. } => write!(f, "Expression({source:?})"),
        }
    }
}

impl PartialEq for Forcing {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Forcing::Constant(a), Forcing::Constant(b)) => a == b,
            (Forcing::Expression { source: a, .. }, Forcing::Expression { source: b, .. }) => a == b,
            _ => false,
        }
    }
}

impl Forcing {
    /// A bare number becomes a constant; anything else is parsed as an
    /// expression in `x` and `y` (e.g. `4 + 0.1*(x-0.5)*(y-0.5)`).
    pub fn parse(text: &str) -> Result<Self> {
        let t = text.trim();
        if let Ok(a) = t.parse::<f64>() {
            return Self::constant(a);
        }
        let tree = build_operator_tree::<DefaultNumericTypes>(t).map_err(|e| Error::Expression(format!("{t:?}: {e}")))?;
        let f = Forcing::Expression { source: t.to_string(), tree };
        let probe = f.eval([0.0, 0.0])?;
        if !probe.is_finite() {
            return Err(Error::Expression(format!("{t:?} is not finite at the origin")));
        }
        Ok(f)
    }

    pub fn constant(a: f64) -> Result<Self> {
        if !a.is_finite() {
            return Err(Error::Input(format!("A must be finite, got {a}")));
        }
        Ok(Forcing::Constant(a))
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self {
            Forcing::Constant(a) => Some(*a),
            Forcing::Expression { .. } => None,
        }
    }

    pub fn eval(&self, x: Vec2) -> Result<f64> {
        match self {
            Forcing::Constant(a) => Ok(*a),
            Forcing::Expression { source, tree } => {
                let mut ctx = HashMapContext::<DefaultNumericTypes>::new();
                let err = |e: evalexpr::EvalexprError| Error::Expression(format!("{source:?}: {e}"));
                ctx.set_value("x".into(), Value::Float(x[0])).map_err(err)?;
                ctx.set_value("y".into(), Value::Float(x[1])).map_err(err)?;
                tree.eval_number_with_context(&ctx).map_err(err)
            }
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Forcing::Constant(a) => format!("{a}"),
            Forcing::Expression { source, .. } => source.clone(),
        }
    }
}

impl Serialize for Forcing {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Forcing::Constant(a) => s.serialize_f64(*a),
            Forcing::Expression { source, .. } => s.serialize_str(source),
        }
    }
}

impl<'de> Deserialize<'de> for Forcing {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(a) => Forcing::constant(a),
            Raw::Text(t) => Forcing::parse(&t),
        }
        .map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_and_expressions() {
        assert_eq!(Forcing::parse("4").unwrap().as_constant(), Some(4.0));
        let f = Forcing::parse("4 + 0.1*(x-0.5)*(y-0.5)").unwrap();
        assert!(f.as_constant().is_none());
        assert!((f.eval([1.0, 1.0]).unwrap() - 4.025).abs() < 1e-15);
        assert!(Forcing::parse("4 +* x").is_err());
        assert!(Forcing::parse("z").is_err());
        assert!(Forcing::parse("nan").is_err());
    }

    #[test]
    fn json_round_trip() {
        for f in [Forcing::parse("6").unwrap(), Forcing::parse("x*y + 1").unwrap()] {
            let s = serde_json::to_string(&f).unwrap();
            let g: Forcing = serde_json::from_str(&s).unwrap();
            assert_eq!(f, g);
        }
    }
}
