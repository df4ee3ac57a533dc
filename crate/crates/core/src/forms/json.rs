use serde::{Deserialize, Serialize};

use super::Form;
use crate::error::{Error, Result};

/// On-disk representation of a form.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct FormJson {
    pub n_vars: usize,
    pub degree: u32,
    pub terms: Vec<TermJson>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TermJson {
    pub exponents: Vec<u32>,
    pub coeff: f64,
}

impl TryFrom<FormJson> for Form {
    type Error = Error;

    fn try_from(j: FormJson) -> Result<Form> {
        Form::from_terms(
            j.n_vars,
            j.degree,
            j.terms.into_iter().map(|t| (t.exponents, t.coeff)),
        )
    }
}

impl From<&Form> for FormJson {
    fn from(f: &Form) -> FormJson {
        FormJson {
            n_vars: f.n_vars(),
            degree: f.degree(),
            terms: f
                .terms()
                .map(|(a, c)| TermJson {
                    exponents: a.exponents().to_vec(),
                    coeff: c,
                })
                .collect(),
        }
    }
}

impl From<Form> for FormJson {
    fn from(f: Form) -> FormJson {
        FormJson::from(&f)
    }
}

impl Form {
    pub fn from_json_str(s: &str) -> Result<Form> {
        let j: FormJson = serde_json::from_str(s)?;
        Form::try_from(j)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&FormJson::from(self)).expect("form serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_writes() {
        let s = r#"{"n_vars": 2, "degree": 2, "terms": [
            {"exponents": [2, 0], "coeff": 1.0},
            {"exponents": [0, 2], "coeff": 1.5}]}"#;
        let f = Form::from_json_str(s).unwrap();
        assert_eq!(f.coeff_of(&[0, 2]), 1.5);
        let back = Form::from_json_str(&f.to_json_string()).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn non_homogeneous_error_names_the_term() {
        let s = r#"{"n_vars": 2, "degree": 2, "terms": [
            {"exponents": [2, 0], "coeff": 1.0},
            {"exponents": [3, 0], "coeff": 1.0}]}"#;
        let err = Form::from_json_str(s).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("term 1"), "{msg}");
        assert!(msg.contains("[3, 0]"), "{msg}");
    }
}
