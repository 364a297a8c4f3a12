//! JSON output with every float written to 17 significant digits.

use std::io;
use std::path::Path;

use anyhow::{Context, Result};
use capax_core::{Check, EquilibriumSummary, Outcome, Report, SolveReport, SolveStatus};
use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::{json, Value};

/// `x` as a JSON number; `null` if not finite.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

pub fn nums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| num(x)).collect())
}

pub fn status(s: SolveStatus) -> &'static str {
    match s {
        SolveStatus::Converged => "converged",
        SolveStatus::MaxIter => "max_iter",
        SolveStatus::Infeasible => "infeasible",
        SolveStatus::Unbounded => "unbounded",
        SolveStatus::Skipped => "skipped",
    }
}

pub fn outcome(o: Outcome) -> &'static str {
    match o {
        Outcome::Pass => "pass",
        Outcome::Fail => "fail",
        Outcome::Skipped => "skipped",
    }
}

fn check(c: &Check) -> Value {
    json!({ "name": c.name, "outcome": outcome(c.outcome), "detail": c.detail })
}

pub fn report(r: &Report) -> Value {
    json!({
        "title": r.title,
        "passed": r.all_passed(),
        "failed": r.count(Outcome::Fail),
        "skipped": r.count(Outcome::Skipped),
        "checks": r.checks.iter().map(check).collect::<Vec<_>>(),
        "flags": r.flags,
    })
}

pub fn solve_report(r: &SolveReport) -> Value {
    json!({
        "status": status(r.status),
        "objective": num(r.objective),
        "kkt_residual": num(r.kkt_residual),
        "iterations": r.iterations,
        "tikhonov_shift": num(r.tikhonov_shift),
    })
}

pub fn summary(s: &EquilibriumSummary) -> Value {
    json!({
        "capacity": num(s.capacity),
        "robin": num(s.robin),
        "mass": num(s.mass),
        "energy": num(s.energy),
        "potential_min_on_A": num(s.potential_min_on_a),
        "potential_max_on_support": num(s.potential_max_on_support),
        "formulation": s.formulation.name(),
        "kkt_residual": num(s.kkt_residual),
    })
}

/// Pretty printer writing every float with 17 significant digits.
struct Digits17(PrettyFormatter<'static>);

macro_rules! delegate {
    ($($name:ident($($arg:ident: $ty:ty),*);)*) => {$(
        fn $name<W: ?Sized + io::Write>(&mut self, w: &mut W $(, $arg: $ty)*) -> io::Result<()> {
            self.0.$name(w $(, $arg)*)
        }
    )*};
}

impl Formatter for Digits17 {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, x: f64) -> io::Result<()> {
        write!(w, "{x:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, x: f32) -> io::Result<()> {
        self.write_f64(w, f64::from(x))
    }

    delegate! {
        begin_array();
        end_array();
        begin_array_value(first: bool);
        end_array_value();
        begin_object();
        end_object();
        begin_object_key(first: bool);
        begin_object_value();
        end_object_value();
    }
}

pub fn to_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Digits17(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(buf)?)
}

pub fn write(path: &Path, value: &Value) -> Result<()> {
    let text = to_string(value)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [2.0 / 3.0, 0.1, 1.0, -1e-300, 123456.789, f64::MAX] {
            let s = to_string(&num(x)).unwrap();
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
            let digits = s.split('e').next().unwrap().chars().filter(|c| c.is_ascii_digit()).count();
            assert_eq!(digits, 17, "{s}");
        }
        assert_eq!(num(f64::INFINITY), Value::Null);
        let nested = to_string(&json!({"a": [0.5, 1], "b": {}})).unwrap();
        let back: Value = serde_json::from_str(&nested).unwrap();
        assert_eq!(back, json!({"a": [0.5, 1], "b": {}}));
        assert!(nested.contains("5.0000000000000000e-1"));
    }
}
