//! Plain-text channel and distribution files.
//!
//! ```text
//! # comment lines and blank lines are ignored
//! 2 2
//! 0.7 0.3
//! 0.3 0.7
//! ```
//!
//! The header gives `nx ny`; each following line is one row of `W(·|x)`.
//! A distribution is a file with `nx = 1`.

use crate::channel::{Channel, ProbVector};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

/// Rows of the matrix with the 1-based line number each came from.
fn parse_matrix(text: &str) -> Result<Vec<(usize, Vec<f64>)>> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let (hline, header) = lines.next().ok_or_else(|| parse_err(0, "missing `nx ny` header"))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>().map_err(|_| parse_err(hline, format!("bad dimension `{t}`"))))
        .collect::<Result<_>>()?;
    let [nx, ny] = dims[..] else {
        return Err(parse_err(hline, "header must be `nx ny`"));
    };
    if nx == 0 || ny == 0 {
        return Err(parse_err(hline, "dimensions must be positive"));
    }
    let mut rows = Vec::with_capacity(nx);
    for (ln, l) in lines {
        if rows.len() == nx {
            return Err(parse_err(ln, format!("more than {nx} rows")));
        }
        let row: Vec<f64> = l
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<f64>().map_err(|_| parse_err(ln, format!("bad number `{t}`"))))
            .collect::<Result<_>>()?;
        if row.len() != ny {
            return Err(parse_err(ln, format!("expected {ny} entries, found {}", row.len())));
        }
        rows.push((ln, row));
    }
    if rows.len() != nx {
        return Err(parse_err(0, format!("expected {nx} rows, found {}", rows.len())));
    }
    Ok(rows)
}

pub fn parse_channel<T: Scalar>(text: &str) -> Result<Channel<T>> {
    let rows = parse_matrix(text)?;
    let conv: Vec<Vec<T>> = rows.iter().map(|(_, r)| r.iter().map(|&v| T::lit(v)).collect()).collect();
    let tol = crate::channel::TolerancePolicy::<T>::default().tol_eq.max(T::lit(1e-9));
    Channel::new(&conv, tol).map_err(|e| match e {
        Error::NonStochasticRow { row, .. } | Error::NegativeEntry { row, .. } if row < rows.len() => {
            parse_err(rows[row].0, e.to_string())
        }
        e => e,
    })
}

pub fn parse_distribution<T: Scalar>(text: &str) -> Result<ProbVector<T>> {
    let rows = parse_matrix(text)?;
    let (ln, row) = match &rows[..] {
        [one] => one,
        _ => return Err(parse_err(0, "a distribution file has exactly one row")),
    };
    let tol = crate::channel::TolerancePolicy::<T>::default().tol_eq.max(T::lit(1e-9));
    ProbVector::new(row.iter().map(|&v| T::lit(v)).collect(), tol).map_err(|e| parse_err(*ln, e.to_string()))
}

pub fn write_channel<T: Scalar>(w: &Channel<T>) -> String {
    let mut s = format!("{} {}\n", w.nx(), w.ny());
    for row in w.rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{}", v.to_f64_lossy())).collect();
        s.push_str(&cells.join(" "));
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let w = Channel::<f64>::from_rows(&[[0.2, 0.5, 0.3], [0.6, 0.1, 0.3]]).unwrap();
        let back: Channel<f64> = parse_channel(&write_channel(&w)).unwrap();
        assert_eq!(back, w);
    }

    #[test]
    fn comments_and_commas() {
        let w: Channel<f64> = parse_channel("# bsc\n\n2 2\n0.7, 0.3 # first\n0.3 0.7\n").unwrap();
        assert_eq!(w, Channel::bsc(0.3));
        let p: ProbVector<f64> = parse_distribution("1 3\n0.2 0.3 0.5").unwrap();
        assert_eq!(p.len(), 3);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = parse_channel::<f64>("2 2\n0.7 0.3\n0.3 oops\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }), "{e:?}");
        let e = parse_channel::<f64>("2 2\n0.7 0.3\n0.3 0.6\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }), "{e:?}");
        let e = parse_channel::<f64>("2 2\n0.7 0.3\n0.3\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }), "{e:?}");
        assert!(matches!(parse_channel::<f64>("2\n"), Err(Error::Parse { line: 1, .. })));
        assert!(parse_distribution::<f64>("2 2\n0.5 0.5\n0.5 0.5\n").is_err());
    }
}
