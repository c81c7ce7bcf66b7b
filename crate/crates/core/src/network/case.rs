//! Case-file readers: a MATPOWER `.m` subset and the native JSON schema.

use std::collections::HashMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Branch, Bus, BusBranchNetwork};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseFormat {
    MatpowerM,
    NativeJson,
}

impl CaseFormat {
    /// Guess the format from a file extension.
    pub fn from_path(path: &std::path::Path) -> CaseFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => CaseFormat::NativeJson,
            _ => CaseFormat::MatpowerM,
        }
    }
}

impl FromStr for CaseFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "matpower" | "matpower-m" | "m" => Ok(CaseFormat::MatpowerM),
            "json" | "native-json" => Ok(CaseFormat::NativeJson),
            other => Err(format!("unknown case format '{other}'")),
        }
    }
}

pub fn parse_case(text: &str, format: CaseFormat) -> Result<BusBranchNetwork> {
    match format {
        CaseFormat::MatpowerM => parse_matpower(text),
        CaseFormat::NativeJson => parse_native_json(text),
    }
}

#[derive(Serialize, Deserialize)]
struct NativeCase {
    base_mva: f64,
    buses: Vec<Bus>,
    branches: Vec<NativeBranch>,
}

/// Branch record with endpoints given as external bus ids.
#[derive(Serialize, Deserialize)]
struct NativeBranch {
    from_bus: i64,
    to_bus: i64,
    r: f64,
    x: f64,
    #[serde(default)]
    b_charging: f64,
    #[serde(default = "super::default_tap")]
    tap: f64,
    #[serde(default)]
    shift: f64,
    #[serde(default = "super::default_true")]
    in_service: bool,
}

fn parse_native_json(text: &str) -> Result<BusBranchNetwork> {
    let case: NativeCase = serde_json::from_str(text).map_err(|e| Error::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let ids: HashMap<i64, usize> = case
        .buses
        .iter()
        .enumerate()
        .map(|(i, b)| (b.id, i))
        .collect();
    let mut branches = Vec::with_capacity(case.branches.len());
    for (k, br) in case.branches.into_iter().enumerate() {
        let lookup = |id: i64| {
            ids.get(&id)
                .copied()
                .ok_or(Error::UnknownBus { bus: id, branch: k })
        };
        branches.push(Branch {
            from_bus: lookup(br.from_bus)?,
            to_bus: lookup(br.to_bus)?,
            r: br.r,
            x: br.x,
            b_charging: br.b_charging,
            tap: br.tap,
            shift: br.shift,
            in_service: br.in_service,
        });
    }
    BusBranchNetwork::new(case.base_mva, case.buses, branches)
}

/// Serialize to the native JSON schema. Parsing the output reproduces `net`.
pub fn to_native_json(net: &BusBranchNetwork) -> String {
    let case = NativeCase {
        base_mva: net.base_mva,
        buses: net.buses.clone(),
        branches: net
            .branches
            .iter()
            .map(|br| NativeBranch {
                from_bus: net.buses[br.from_bus].id,
                to_bus: net.buses[br.to_bus].id,
                r: br.r,
                x: br.x,
                b_charging: br.b_charging,
                tap: br.tap,
                shift: br.shift,
                in_service: br.in_service,
            })
            .collect(),
    };
    serde_json::to_string_pretty(&case).expect("case serializes")
}

struct Scanner<'a> {
    bytes: &'a [u8],
    pos: usize,
    line: usize,
    col: usize,
}

impl<'a> Scanner<'a> {
    fn new(text: &'a str) -> Self {
        Scanner {
            bytes: text.as_bytes(),
            pos: 0,
            line: 1,
            col: 1,
        }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek()?;
        self.pos += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn error(&self, message: impl Into<String>) -> Error {
        Error::Syntax {
            line: self.line,
            column: self.col,
            message: message.into(),
        }
    }

    fn skip_comment(&mut self) {
        while let Some(c) = self.peek() {
            if c == b'\n' {
                break;
            }
            self.bump();
        }
    }

    /// Skips blanks, comments and newlines.
    fn skip_trivia(&mut self) {
        while let Some(c) = self.peek() {
            match c {
                b'%' | b'#' => self.skip_comment(),
                c if c.is_ascii_whitespace() => {
                    self.bump();
                }
                _ => break,
            }
        }
    }

    fn ident(&mut self) -> String {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_ascii_alphanumeric() || c == b'_' || c == b'.' {
                self.bump();
            } else {
                break;
            }
        }
        String::from_utf8_lossy(&self.bytes[start..self.pos]).into_owned()
    }

    fn skip_statement(&mut self) {
        while let Some(c) = self.bump() {
            if c == b';' || c == b'\n' {
                break;
            }
        }
    }

    fn skip_balanced(&mut self, open: u8, close: u8) -> Result<()> {
        let mut depth = 0usize;
        while let Some(c) = self.bump() {
            if c == open {
                depth += 1;
            } else if c == close {
                depth -= 1;
                if depth == 0 {
                    return Ok(());
                }
            } else if c == b'%' {
                self.skip_comment();
            }
        }
        Err(self.error(format!("unterminated '{}'", open as char)))
    }

    fn matrix(&mut self) -> Result<Vec<Vec<f64>>> {
        debug_assert_eq!(self.peek(), Some(b'['));
        self.bump();
        let mut rows = Vec::new();
        let mut row = Vec::new();
        loop {
            let Some(c) = self.peek() else {
                return Err(self.error("unterminated matrix literal"));
            };
            match c {
                b']' => {
                    self.bump();
                    if !row.is_empty() {
                        rows.push(row);
                    }
                    return Ok(rows);
                }
                b';' | b'\n' => {
                    self.bump();
                    if !row.is_empty() {
                        rows.push(std::mem::take(&mut row));
                    }
                }
                b'%' => self.skip_comment(),
                b'.' if self.bytes[self.pos..].starts_with(b"...") => {
                    self.skip_comment();
                    self.bump();
                }
                b',' | b' ' | b'\t' | b'\r' => {
                    self.bump();
                }
                _ => row.push(self.number()?),
            }
        }
    }

    fn number(&mut self) -> Result<f64> {
        let (line, col) = (self.line, self.col);
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_ascii_alphanumeric() || matches!(c, b'.' | b'-' | b'+') {
                self.bump();
            } else {
                break;
            }
        }
        let token = String::from_utf8_lossy(&self.bytes[start..self.pos]).into_owned();
        let value = match token.as_str() {
            "Inf" | "inf" => Some(f64::INFINITY),
            "-Inf" | "-inf" => Some(f64::NEG_INFINITY),
            "NaN" => Some(f64::NAN),
            t => t.parse::<f64>().ok(),
        };
        value.ok_or_else(|| Error::Syntax {
            line,
            column: col,
            message: if token.is_empty() {
                format!(
                    "unexpected character '{}'",
                    self.peek().map(|c| c as char).unwrap_or(' ')
                )
            } else {
                format!("invalid number '{token}'")
            },
        })
    }
}

fn parse_matpower(text: &str) -> Result<BusBranchNetwork> {
    let mut sc = Scanner::new(text);
    let mut base_mva = None;
    let mut bus_rows = None;
    let mut branch_rows = None;

    loop {
        sc.skip_trivia();
        let Some(c) = sc.peek() else { break };
        if !(c.is_ascii_alphabetic() || c == b'_') {
            return Err(sc.error(format!("unexpected character '{}'", c as char)));
        }
        let name = sc.ident();
        if name == "function" {
            sc.skip_comment();
            continue;
        }
        while matches!(sc.peek(), Some(b' ' | b'\t')) {
            sc.bump();
        }
        if sc.peek() != Some(b'=') {
            return Err(sc.error(format!("expected '=' after '{name}'")));
        }
        sc.bump();
        while matches!(sc.peek(), Some(b' ' | b'\t')) {
            sc.bump();
        }
        let field = name.rsplit('.').next().unwrap_or(&name).to_string();
        match sc.peek() {
            Some(b'[') => {
                let m = sc.matrix()?;
                match field.as_str() {
                    "bus" => bus_rows = Some((m, sc.line)),
                    "branch" => branch_rows = Some((m, sc.line)),
                    _ => {}
                }
                sc.skip_statement();
            }
            Some(b'{') => {
                sc.skip_balanced(b'{', b'}')?;
                sc.skip_statement();
            }
            _ if field == "baseMVA" => {
                sc.skip_trivia();
                base_mva = Some(sc.number()?);
                sc.skip_statement();
            }
            _ => sc.skip_statement(),
        }
    }

    let eof = |what: &str| Error::Syntax {
        line: sc.line,
        column: sc.col,
        message: format!("missing {what} section"),
    };
    let base_mva = base_mva.ok_or_else(|| eof("baseMVA"))?;
    let (bus_rows, bus_line) = bus_rows.ok_or_else(|| eof("bus"))?;
    let (branch_rows, branch_line) = branch_rows.ok_or_else(|| eof("branch"))?;

    let mut buses = Vec::with_capacity(bus_rows.len());
    for row in &bus_rows {
        if row.len() < 10 {
            return Err(Error::Syntax {
                line: bus_line,
                column: 1,
                message: format!("bus row has {} columns, expected at least 10", row.len()),
            });
        }
        buses.push(Bus {
            id: row[0] as i64,
            base_kv: row[9],
            gs: row[4] / base_mva,
            bs: row[5] / base_mva,
            is_slack: row[1] as i64 == 3,
            vm_true: row[7],
            va_true: row[8].to_radians(),
        });
    }
    let ids: HashMap<i64, usize> = buses.iter().enumerate().map(|(i, b)| (b.id, i)).collect();

    let mut branches = Vec::with_capacity(branch_rows.len());
    for (k, row) in branch_rows.iter().enumerate() {
        if row.len() < 5 {
            return Err(Error::Syntax {
                line: branch_line,
                column: 1,
                message: format!("branch row has {} columns, expected at least 5", row.len()),
            });
        }
        let lookup = |v: f64| {
            let id = v as i64;
            ids.get(&id)
                .copied()
                .ok_or(Error::UnknownBus { bus: id, branch: k })
        };
        let ratio = row.get(8).copied().unwrap_or(0.0);
        branches.push(Branch {
            from_bus: lookup(row[0])?,
            to_bus: lookup(row[1])?,
            r: row[2],
            x: row[3],
            b_charging: row[4],
            tap: if ratio == 0.0 { 1.0 } else { ratio },
            shift: row.get(9).copied().unwrap_or(0.0).to_radians(),
            in_service: row.get(10).copied().unwrap_or(1.0) != 0.0,
        });
    }
    BusBranchNetwork::new(base_mva, buses, branches)
}
