//! Flat key-value problem files.
//!
//! A problem file is a sequence of `key = value` lines with `#` comments:
//!
//! ```text
//! f.kind = cubic
//! f.params = 1, 1
//! q.kind = power
//! q.params = 2
//! A.kind = affine-exp
//! A.params = 1, -1
//! b0 = 1
//! gamma = 0
//! domain.kind = ball
//! domain.N = 3
//! domain.params = 1
//! ```
//!
//! Parameter lists are comma-separated; numbers are written back with 17
//! significant digits so a parse/format round trip is exact.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::geometry::DomainGeometry;
use crate::nonlinearity::{NonlocalProblem, ScalarFamily};

const KEYS: [&str; 11] = [
    "f.kind",
    "f.params",
    "q.kind",
    "q.params",
    "A.kind",
    "A.params",
    "b0",
    "gamma",
    "domain.kind",
    "domain.N",
    "domain.params",
];

/// Parses a problem document into its problem and domain, validating both.
pub fn parse(text: &str) -> Result<(NonlocalProblem, DomainGeometry)> {
    let mut map: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: lineno + 1,
            msg: format!("expected `key = value`, got `{line}`"),
        })?;
        let key = key.trim();
        let value = value.trim();
        if !KEYS.contains(&key) {
            return Err(Error::Parse {
                line: lineno + 1,
                msg: format!("unknown key `{key}`"),
            });
        }
        if map.insert(key, (lineno + 1, value)).is_some() {
            return Err(Error::Parse {
                line: lineno + 1,
                msg: format!("duplicate key `{key}`"),
            });
        }
    }

    let get = |key: &str| -> Result<(usize, &str)> {
        map.get(key).copied().ok_or_else(|| Error::Parse {
            line: 0,
            msg: format!("missing key `{key}`"),
        })
    };
    let scalar = |key: &str| -> Result<f64> {
        let (line, v) = get(key)?;
        v.parse::<f64>().map_err(|_| Error::Parse {
            line,
            msg: format!("`{key}` must be a number, got `{v}`"),
        })
    };
    let list = |key: &str| -> Result<Vec<f64>> {
        let (line, v) = get(key)?;
        v.split(',')
            .map(|tok| {
                tok.trim().parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    msg: format!("`{key}` must be a comma-separated number list, got `{v}`"),
                })
            })
            .collect()
    };
    let family = |kind_key: &str, params_key: &str| -> Result<ScalarFamily> {
        let (_, kind) = get(kind_key)?;
        ScalarFamily::from_kind(kind, &list(params_key)?)
    };

    let f = family("f.kind", "f.params")?;
    let q = family("q.kind", "q.params")?;
    let a = family("A.kind", "A.params")?;
    let b0 = scalar("b0")?;
    let gamma = scalar("gamma")?;

    let (_, dom_kind) = get("domain.kind")?;
    let dim = scalar("domain.N")?;
    if dim.fract() != 0.0 || dim < 1.0 {
        return Err(Error::Parse {
            line: get("domain.N")?.0,
            msg: format!("`domain.N` must be a positive integer, got {dim}"),
        });
    }
    let dom = DomainGeometry::from_kind(dom_kind, dim as usize, &list("domain.params")?)?;

    let problem = NonlocalProblem::new(f, q, a, b0, gamma);
    let report = problem.validate();
    if !report.ok {
        return Err(Error::Validation(report.messages.join("; ")));
    }
    Ok((problem, dom))
}

/// Serializes a problem and domain back to the document format.
pub fn format(p: &NonlocalProblem, dom: &DomainGeometry) -> String {
    let nums = |v: &[f64]| {
        v.iter()
            .map(|x| format!("{x:.16e}"))
            .collect::<Vec<_>>()
            .join(", ")
    };
    format!(
        "f.kind = {}\nf.params = {}\nq.kind = {}\nq.params = {}\nA.kind = {}\nA.params = {}\n\
         b0 = {:.16e}\ngamma = {:.16e}\ndomain.kind = {}\ndomain.N = {}\ndomain.params = {}\n",
        p.f.kind_name(),
        nums(&p.f.params()),
        p.q.kind_name(),
        nums(&p.q.params()),
        p.a.kind_name(),
        nums(&p.a.params()),
        p.b0,
        p.gamma,
        dom.kind_name(),
        dom.dim,
        nums(&dom.params()),
    )
}
