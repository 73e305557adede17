//! Line-oriented plan document:
//!
//! ```text
//! robots=3 agreements=4
//! 1 1 0
//! 0 1 1
//! 1 0 1
//! 1 1 0
//! 50 50 0
//! 0 50 100
//! 90 0 40
//! 50 100 0
//! sync=3
//! ```
//!
//! `K` rows may also be written without separators (`110`). Blank lines and
//! lines starting with `#` are ignored. The `sync=` line is optional.

use std::fmt;
use std::str::FromStr;

use super::{AgreementMatrix, PlanError, StepsMatrix};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanDocument {
    pub k: AgreementMatrix,
    pub w: StepsMatrix,
    pub sync_row: Option<usize>,
}

fn parse_err(line: usize, message: impl Into<String>) -> PlanError {
    PlanError::Parse {
        line,
        message: message.into(),
    }
}

fn header_value(line: usize, token: Option<&str>, key: &str) -> Result<usize, PlanError> {
    let token = token.ok_or_else(|| parse_err(line, format!("missing `{key}=` in header")))?;
    let value = token
        .strip_prefix(key)
        .and_then(|t| t.strip_prefix('='))
        .ok_or_else(|| parse_err(line, format!("expected `{key}=<n>`, found {token:?}")))?;
    value
        .parse()
        .map_err(|_| parse_err(line, format!("`{key}` must be a non-negative integer")))
}

impl PlanDocument {
    pub fn parse(text: &str) -> Result<Self, PlanError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

        let (hline, header) = lines.next().ok_or_else(|| parse_err(1, "empty plan document"))?;
        let mut tokens = header.split_whitespace();
        let robots = header_value(hline, tokens.next(), "robots")?;
        let agreements = header_value(hline, tokens.next(), "agreements")?;
        if tokens.next().is_some() {
            return Err(parse_err(hline, "unexpected trailing header fields"));
        }
        if robots == 0 || agreements == 0 {
            return Err(parse_err(hline, "robots and agreements must be positive"));
        }

        let mut krows = Vec::with_capacity(agreements);
        let mut kline = Vec::with_capacity(agreements);
        for _ in 0..agreements {
            let (n, l) = lines
                .next()
                .ok_or_else(|| parse_err(hline, format!("expected {agreements} agreement rows")))?;
            let compact = !l.contains(char::is_whitespace);
            let bits: Result<Vec<bool>, PlanError> = if compact {
                l.chars()
                    .map(|c| match c {
                        '0' => Ok(false),
                        '1' => Ok(true),
                        other => Err(parse_err(n, format!("agreement bit must be 0 or 1, found {other:?}"))),
                    })
                    .collect()
            } else {
                l.split_whitespace()
                    .map(|t| match t {
                        "0" => Ok(false),
                        "1" => Ok(true),
                        other => Err(parse_err(n, format!("agreement bit must be 0 or 1, found {other:?}"))),
                    })
                    .collect()
            };
            let bits = bits?;
            if bits.len() != robots {
                return Err(parse_err(n, format!("expected {robots} bits, found {}", bits.len())));
            }
            krows.push(bits);
            kline.push(n);
        }

        let mut wrows = Vec::with_capacity(agreements);
        let mut wline = Vec::with_capacity(agreements);
        for _ in 0..agreements {
            let (n, l) = lines
                .next()
                .ok_or_else(|| parse_err(hline, format!("expected {agreements} step rows")))?;
            let steps: Vec<u32> = l
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| parse_err(n, format!("invalid step count {t:?}"))))
                .collect::<Result<_, _>>()?;
            if steps.len() != robots {
                return Err(parse_err(n, format!("expected {robots} step counts, found {}", steps.len())));
            }
            wrows.push(steps);
            wline.push(n);
        }

        let mut sync_row = None;
        if let Some((n, l)) = lines.next() {
            let v = l
                .strip_prefix("sync=")
                .ok_or_else(|| parse_err(n, format!("unexpected line {l:?}")))?;
            let row: usize = v
                .trim()
                .parse()
                .map_err(|_| parse_err(n, "sync row must be an integer"))?;
            if row >= agreements || krows[row].iter().any(|&b| !b) {
                return Err(parse_err(n, format!("sync row {row} must include every robot")));
            }
            sync_row = Some(row);
        }
        if let Some((n, _)) = lines.next() {
            return Err(parse_err(n, "trailing content after plan"));
        }

        // Attribute matrix-level violations to the line holding the offending row.
        let k = AgreementMatrix::new(robots, krows).map_err(|e| match e {
            PlanError::TooFewParticipants { row, .. } => parse_err(kline[row], e.to_string()),
            PlanError::UncoveredRobot { .. } => parse_err(kline[0], e.to_string()),
            other => other,
        })?;
        let w = StepsMatrix::new(&k, wrows).map_err(|e| match e {
            PlanError::Steps { row, .. } => parse_err(wline[row], e.to_string()),
            other => other,
        })?;
        Ok(PlanDocument { k, w, sync_row })
    }
}

impl FromStr for PlanDocument {
    type Err = PlanError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

impl fmt::Display for PlanDocument {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "robots={} agreements={}", self.k.robots(), self.k.agreements())?;
        for row in self.k.rows() {
            let bits: Vec<&str> = row.iter().map(|&b| if b { "1" } else { "0" }).collect();
            writeln!(f, "{}", bits.join(" "))?;
        }
        for row in self.w.rows() {
            let steps: Vec<String> = row.iter().map(u32::to_string).collect();
            writeln!(f, "{}", steps.join(" "))?;
        }
        if let Some(row) = self.sync_row {
            writeln!(f, "sync={row}")?;
        }
        Ok(())
    }
}
