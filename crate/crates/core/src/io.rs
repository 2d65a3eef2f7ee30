//! CSV readers for firm lists and correlation matrices.
//!
//! Two firm layouts are accepted, told apart by their header:
//!
//! ```text
//! ticker,d_over_v0,sigma,q,lambda_mode,mu_mode
//! ticker,market_cap,debt_pv,equity_vol,dividend_yield
//! ```
//!
//! In the first, `lambda_mode` is `r` or a number and `mu_mode` is
//! `risk_neutral`, `r` or a number. Mixing `r` with a number needs the
//! risk-free rate. Market rows go through [`calibrate`] in risk-neutral mode.
//!
//! A correlation file is a square matrix with a ticker header and a ticker in
//! the first column of each row; it is reordered to match the firm list.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::firm_model::{calibrate, FirmParams, MarketInputs, Rate};
use crate::numerics::{Real, SquareMatrix};

pub const FIRM_COLUMNS: [&str; 6] = ["ticker", "d_over_v0", "sigma", "q", "lambda_mode", "mu_mode"];
pub const MARKET_COLUMNS: [&str; 5] = ["ticker", "market_cap", "debt_pv", "equity_vol", "dividend_yield"];

fn parse_err(source: &str, line: u64, reason: impl Into<String>) -> Error {
    Error::Parse {
        path: source.to_string(),
        line: line as usize,
        reason: reason.into(),
    }
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(input)
}

fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}

fn number<F: Real>(field: &str, column: &str, source: &str, line: u64) -> Result<F> {
    field
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .map(F::lit)
        .ok_or_else(|| parse_err(source, line, format!("{column}: '{field}' is not a number")))
}

fn lambda_mode<F: Real>(field: &str, source: &str, line: u64) -> Result<Rate<F>> {
    match field {
        "r" => Ok(Rate::RiskFree),
        other => number(other, "lambda_mode", source, line).map(Rate::Value),
    }
}

fn mu_mode<F: Real>(field: &str, source: &str, line: u64) -> Result<Rate<F>> {
    match field {
        "r" | "risk_neutral" => Ok(Rate::RiskFree),
        other => number(other, "mu_mode", source, line).map(Rate::Value),
    }
}

/// Reads a firm list in either layout. `source` names the input in errors.
pub fn parse_firms<F: Real, R: Read>(input: R, source: &str, risk_free: Option<F>) -> Result<Vec<FirmParams<F>>> {
    let mut rdr = reader(input);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| parse_err(source, 1, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let market = if header == FIRM_COLUMNS {
        false
    } else if header == MARKET_COLUMNS {
        true
    } else {
        return Err(parse_err(
            source,
            1,
            format!(
                "header must be '{}' or '{}'",
                FIRM_COLUMNS.join(","),
                MARKET_COLUMNS.join(",")
            ),
        ));
    };
    let width = header.len();
    let mut firms: Vec<FirmParams<F>> = Vec::new();
    let mut seen: HashMap<String, u64> = HashMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(source, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != width {
            return Err(parse_err(source, line, format!("expected {width} fields, got {}", rec.len())));
        }
        let ticker = rec[0].to_string();
        if ticker.is_empty() {
            return Err(parse_err(source, line, "empty ticker"));
        }
        if let Some(first) = seen.insert(ticker.clone(), line) {
            return Err(parse_err(source, line, format!("ticker {ticker} already given on line {first}")));
        }
        let firm = if market {
            let m = MarketInputs::risk_neutral(
                ticker,
                number(&rec[1], "market_cap", source, line)?,
                number(&rec[2], "debt_pv", source, line)?,
                number(&rec[3], "equity_vol", source, line)?,
                number(&rec[4], "dividend_yield", source, line)?,
            );
            calibrate(&m)
        } else {
            FirmParams::new(
                ticker,
                number(&rec[1], "d_over_v0", source, line)?,
                number(&rec[2], "sigma", source, line)?,
                number(&rec[3], "q", source, line)?,
                mu_mode(&rec[5], source, line)?,
                lambda_mode(&rec[4], source, line)?,
                risk_free,
            )
        };
        firms.push(firm.map_err(|e| parse_err(source, line, e.to_string()))?);
    }
    Ok(firms)
}

pub fn read_firms<F: Real>(path: &Path, risk_free: Option<F>) -> Result<Vec<FirmParams<F>>> {
    parse_firms(open(path)?, &path.display().to_string(), risk_free)
}

/// Reads a labelled correlation matrix and reorders it to `tickers`.
pub fn parse_correlation<F: Real, R: Read>(input: R, source: &str, tickers: &[&str]) -> Result<SquareMatrix<F>> {
    let mut rdr = reader(input);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| parse_err(source, 1, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.first().map(String::as_str) != Some("ticker") || header.len() < 2 {
        return Err(parse_err(source, 1, "header must be 'ticker,<T1>,<T2>,...'"));
    }
    let cols = &header[1..];
    let n = cols.len();
    let mut col_index = HashMap::new();
    for (k, c) in cols.iter().enumerate() {
        if col_index.insert(c.as_str(), k).is_some() {
            return Err(parse_err(source, 1, format!("ticker {c} repeated in header")));
        }
    }
    let mut rows: Vec<Option<Vec<F>>> = vec![None; n];
    let mut count = 0;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(source, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != n + 1 {
            return Err(parse_err(source, line, format!("expected {} fields, got {}", n + 1, rec.len())));
        }
        let Some(&k) = col_index.get(&rec[0]) else {
            return Err(parse_err(source, line, format!("row ticker {} not in header", &rec[0])));
        };
        if rows[k].is_some() {
            return Err(parse_err(source, line, format!("row {} repeated", &rec[0])));
        }
        let values = (1..=n)
            .map(|j| number(&rec[j], &cols[j - 1], source, line))
            .collect::<Result<Vec<F>>>()?;
        rows[k] = Some(values);
        count += 1;
    }
    if count != n {
        return Err(parse_err(source, 0, format!("matrix has {count} rows for {n} columns")));
    }
    if tickers.len() != n {
        return Err(Error::Dimension {
            expected: tickers.len(),
            got: n,
        });
    }
    let order = tickers
        .iter()
        .map(|t| {
            col_index
                .get(t)
                .copied()
                .ok_or_else(|| parse_err(source, 1, format!("firm {t} missing from matrix")))
        })
        .collect::<Result<Vec<usize>>>()?;
    let mut m = SquareMatrix::zeros(n);
    for (a, &i) in order.iter().enumerate() {
        let row = rows[i].as_ref().expect("every row present");
        for (b, &j) in order.iter().enumerate() {
            m[(a, b)] = row[j];
        }
    }
    for i in 0..n {
        if (m[(i, i)] - F::one()).abs() > F::lit(1e-12) {
            return Err(parse_err(source, 0, format!("diagonal entry for {} is {}, not 1", tickers[i], m[(i, i)])));
        }
    }
    Ok(m)
}

pub fn read_correlation<F: Real>(path: &Path, tickers: &[&str]) -> Result<SquareMatrix<F>> {
    parse_correlation(open(path)?, &path.display().to_string(), tickers)
}
