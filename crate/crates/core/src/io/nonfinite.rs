//! Serde adapter for `Vec<f64>` columns that may hold `inf` or `NaN`, which JSON
//! numbers cannot represent; those values are written as the strings
//! `"inf"`, `"-inf"` and `"NaN"`.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Serialize)]
#[serde(untagged)]
enum Out {
    Num(f64),
    Text(&'static str),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum In {
    Num(f64),
    Text(String),
}

pub fn serialize<S: Serializer>(values: &[f64], serializer: S) -> Result<S::Ok, S::Error> {
    serializer.collect_seq(values.iter().map(|&x| {
        if x.is_finite() {
            Out::Num(x)
        } else if x.is_nan() {
            Out::Text("NaN")
        } else if x > 0.0 {
            Out::Text("inf")
        } else {
            Out::Text("-inf")
        }
    }))
}

pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Vec<f64>, D::Error> {
    Vec::<In>::deserialize(deserializer)?
        .into_iter()
        .map(|v| match v {
            In::Num(x) => Ok(x),
            In::Text(s) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "NaN" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("{other:?} is not a number"))),
            },
        })
        .collect()
}
