//! Number formatting shared by every serialized artifact: 17 significant digits.

use std::str::FromStr;

use serde_json::{Number, Value};

pub fn sig17(x: f64) -> String {
    format!("{:.16e}", x)
}

/// JSON number carrying exactly the [`sig17`] text; non-finite values become `null`.
pub fn json_number(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    Number::from_str(&sig17(x)).map(Value::Number).unwrap_or(Value::Null)
}

pub fn json_array(xs: impl IntoIterator<Item = f64>) -> Value {
    Value::Array(xs.into_iter().map(json_number).collect())
}

pub fn value_to_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Number(n) => n.as_f64().or_else(|| n.to_string().parse().ok()),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0] {
            let s = sig17(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            let v = json_number(x);
            assert_eq!(serde_json::to_string(&v).unwrap().parse::<f64>().unwrap(), x);
            assert_eq!(value_to_f64(&v).unwrap(), x);
        }
        assert_eq!(json_number(f64::NAN), Value::Null);
    }
}
