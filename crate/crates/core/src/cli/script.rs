//! Flight scripts for `simulate` and `rollout`.
//!
//! One command per line, applied one per stride; `#` starts a comment and a
//! trailing `* N` repeats the line `N` times.
//!
//! ```text
//! command <altitude m> <time factor> <float flag>
//! action  <u0> <u1> <u2>        # policy space, each in [-1, 1]
//! rate    <m/s>
//! vent    <mol>
//! ballast <kg>
//! float
//! hold
//! ```

use std::str::FromStr;
use thiserror::Error;

use crate::controller::CommandTriple;
use crate::environment::StepCommand;

#[derive(Debug, Error, PartialEq)]
#[error("script line {line}: {message}")]
pub struct ScriptError {
    pub line: usize,
    pub message: String,
}

fn numbers(line: usize, args: &[&str], n: usize) -> Result<Vec<f64>, ScriptError> {
    if args.len() != n {
        return Err(ScriptError {
            line,
            message: format!("expected {n} numbers, got {}", args.len()),
        });
    }
    args.iter()
        .map(|a| match f64::from_str(a) {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(ScriptError {
                line,
                message: format!("{a:?} is not a finite number"),
            }),
        })
        .collect()
}

pub fn parse(text: &str) -> Result<Vec<StepCommand>, ScriptError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (body, repeat) = match body.split_once('*') {
            Some((b, n)) => {
                let n: usize = n.trim().parse().map_err(|_| ScriptError {
                    line,
                    message: format!("bad repeat count {:?}", n.trim()),
                })?;
                (b.trim(), n)
            }
            None => (body, 1),
        };
        let mut words = body.split_whitespace();
        let verb = words.next().expect("non-empty line");
        let args: Vec<&str> = words.collect();
        let err = |message: String| ScriptError { line, message };
        let command = match verb {
            "command" => {
                let v = numbers(line, &args, 3)?;
                StepCommand::Command(CommandTriple::new(v[0], v[1], v[2]).map_err(|e| err(e.to_string()))?)
            }
            "action" => {
                let v = numbers(line, &args, 3)?;
                if v.iter().any(|u| u.abs() > 1.0) {
                    return Err(err("policy actions must lie in [-1, 1]".into()));
                }
                StepCommand::Command(CommandTriple::from_normalized([v[0], v[1], v[2]]))
            }
            "rate" => StepCommand::Rate(numbers(line, &args, 1)?[0]),
            "vent" | "ballast" => {
                let v = numbers(line, &args, 1)?[0];
                if v < 0.0 {
                    return Err(err(format!("{verb} amount must be non-negative")));
                }
                if verb == "vent" {
                    StepCommand::Vent(v)
                } else {
                    StepCommand::Ballast(v)
                }
            }
            "float" | "hold" => {
                numbers(line, &args, 0)?;
                if verb == "float" {
                    StepCommand::Float
                } else {
                    StepCommand::Hold
                }
            }
            other => return Err(err(format!("unknown command {other:?}"))),
        };
        out.extend(std::iter::repeat_n(command, repeat));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_every_form() {
        let s = parse(
            "# header\ncommand 18000 2 -1\naction 0 0 1\nrate -1.5\nvent 2\nballast 0.05 # note\nfloat\nhold * 3\n\n",
        )
        .unwrap();
        assert_eq!(s.len(), 9);
        assert_eq!(
            s[0],
            StepCommand::Command(CommandTriple::new(18_000.0, 2.0, -1.0).unwrap())
        );
        assert_eq!(
            s[1],
            StepCommand::Command(CommandTriple::new(17_500.0, 3.0, 1.0).unwrap())
        );
        assert_eq!(s[2], StepCommand::Rate(-1.5));
        assert_eq!(s[8], StepCommand::Hold);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = parse("hold\nrate fast\n").unwrap_err();
        assert_eq!(e.line, 2);
        assert_eq!(parse("\n\ncommand 30000 1 -1").unwrap_err().line, 3);
        assert_eq!(parse("jump").unwrap_err().line, 1);
        assert_eq!(parse("vent -1").unwrap_err().line, 1);
        assert_eq!(parse("hold * many").unwrap_err().line, 1);
        assert_eq!(parse("action 2 0 0").unwrap_err().line, 1);
    }
}
