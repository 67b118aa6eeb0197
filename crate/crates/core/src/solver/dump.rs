//! Plain-text dense dump of a program for offline cross-checking.
//!
//! ```text
//! quadprog <n> <m>
//! Q
//! <n rows of n values>
//! q
//! <n values>
//! A
//! <m rows of n values>
//! b
//! <m values>
//! lower
//! <n values, -inf for none>
//! upper
//! <n values, inf for none>
//! ```

use std::fmt::Write;

use super::{QuadProgram, SparseMatrix};
use crate::error::{Error, Result};

impl QuadProgram {
    pub fn to_text(&self) -> String {
        let n = self.n_vars();
        let m = self.n_cons();
        let mut out = String::new();
        writeln!(out, "quadprog {n} {m}").unwrap();
        let mut section = |name: &str, rows: Vec<Vec<f64>>| {
            writeln!(out, "{name}").unwrap();
            for row in rows {
                let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
                writeln!(out, "{}", line.join(" ")).unwrap();
            }
        };
        section("Q", self.quad.to_dense());
        section("q", vec![self.linear.clone()]);
        section("A", self.cons.to_dense());
        section("b", vec![self.rhs.clone()]);
        section(
            "lower",
            vec![self.lower.clone().unwrap_or_else(|| vec![f64::NEG_INFINITY; n])],
        );
        section(
            "upper",
            vec![self.upper.clone().unwrap_or_else(|| vec![f64::INFINITY; n])],
        );
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::data(format!("program dump: {msg}"));
        let mut tokens = text.split_whitespace();
        if tokens.next() != Some("quadprog") {
            return Err(bad("missing header".into()));
        }
        let mut dim = |what: &str| -> Result<usize> {
            tokens
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| bad(format!("bad {what}")))
        };
        let n = dim("n")?;
        let m = dim("m")?;
        let mut section = |name: &str, count: usize| -> Result<Vec<f64>> {
            match tokens.next() {
                Some(tag) if tag == name => {}
                other => return Err(bad(format!("expected section {name}, found {other:?}"))),
            }
            (0..count)
                .map(|_| {
                    tokens
                        .next()
                        .ok_or_else(|| bad(format!("section {name} truncated")))?
                        .parse::<f64>()
                        .map_err(|_| bad(format!("non-numeric entry in {name}")))
                })
                .collect()
        };
        let dense = |flat: Vec<f64>, rows: usize| -> Vec<Vec<f64>> {
            (0..rows).map(|i| flat[i * n..(i + 1) * n].to_vec()).collect()
        };
        let quad = SparseMatrix::from_dense(&dense(section("Q", n * n)?, n), n);
        let linear = section("q", n)?;
        let cons = SparseMatrix::from_dense(&dense(section("A", m * n)?, m), n);
        let rhs = section("b", m)?;
        let lower = section("lower", n)?;
        let upper = section("upper", n)?;
        Ok(QuadProgram {
            quad,
            linear,
            cons,
            rhs,
            lower: lower.iter().any(|v| v.is_finite()).then_some(lower),
            upper: upper.iter().any(|v| v.is_finite()).then_some(upper),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dump_round_trips() {
        let p = QuadProgram {
            quad: SparseMatrix::from_dense(&[vec![2.0, 0.5], vec![0.5, 1.0]], 2),
            linear: vec![-1.0, 0.25],
            cons: SparseMatrix::from_dense(&[vec![1.0, 1.0]], 2),
            rhs: vec![0.125],
            lower: Some(vec![0.0, f64::NEG_INFINITY]),
            upper: None,
        };
        let text = p.to_text();
        assert!(text.starts_with("quadprog 2 1\nQ\n"));
        let back = QuadProgram::from_text(&text).unwrap();
        assert_eq!(back.quad.to_dense(), p.quad.to_dense());
        assert_eq!(back.linear, p.linear);
        assert_eq!(back.cons.to_dense(), p.cons.to_dense());
        assert_eq!(back.rhs, p.rhs);
        assert_eq!(back.lower, p.lower);
        assert_eq!(back.upper, None);
    }

    #[test]
    fn dump_without_constraints_round_trips() {
        let p = QuadProgram {
            quad: SparseMatrix::identity(1, 2.0),
            linear: vec![1.0],
            cons: SparseMatrix::new(0, 1),
            rhs: vec![],
            lower: None,
            upper: Some(vec![3.0]),
        };
        let back = QuadProgram::from_text(&p.to_text()).unwrap();
        assert_eq!(back.upper, Some(vec![3.0]));
        assert_eq!(back.n_cons(), 0);
    }

    #[test]
    fn garbage_is_rejected() {
        assert!(QuadProgram::from_text("").is_err());
        assert!(QuadProgram::from_text("quadprog x 1").is_err());
    }
}
