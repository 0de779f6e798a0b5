//! CSV tables with a comment header echoing the configuration and a hash of the body.

use std::io::Write;

use sha2::{Digest, Sha256};

use crate::config::Config;

/// Column names plus rows of already formatted cells.
#[derive(Clone, Debug, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// RFC 4180 body.
    pub fn body(&self) -> Vec<u8> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }
}

/// Shortest round-trip representation; identical bits give identical text.
pub fn num(v: f64) -> String {
    format!("{v:e}")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Header (`# key = value` lines and `# sha256 = ...`) followed by the CSV body.
pub fn render(subcommand: &str, config: &Config, table: &Table) -> Vec<u8> {
    let body = table.body();
    let mut out = Vec::new();
    writeln!(out, "# qha {subcommand}").unwrap();
    for (k, v) in config.echo() {
        writeln!(out, "# {k} = {v}").unwrap();
    }
    writeln!(out, "# sha256 = {}", sha256_hex(&body)).unwrap();
    out.extend_from_slice(&body);
    out
}

/// Split a rendered file into echoed config pairs, declared hash and body; `None` if malformed.
pub fn parse_rendered(bytes: &[u8]) -> Option<(Vec<(String, String)>, String, Vec<u8>)> {
    let mut pos = 0;
    let mut pairs = Vec::new();
    let mut hash = None;
    while pos < bytes.len() && bytes[pos] == b'#' {
        let end = bytes[pos..].iter().position(|&b| b == b'\n')? + pos;
        let line = std::str::from_utf8(&bytes[pos + 1..end]).ok()?.trim();
        if let Some((k, v)) = line.split_once(" = ") {
            if k == "sha256" {
                hash = Some(v.to_string());
            } else {
                pairs.push((k.to_string(), v.to_string()));
            }
        }
        pos = end + 1;
    }
    Some((pairs, hash?, bytes[pos..].to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_hash_matches_body() {
        let c = Config::parse("seed = 4").unwrap();
        c.get("seed", 0u64).unwrap();
        let mut t = Table::new(&["name", "value"]);
        t.push(vec!["a, \"quoted\"".into(), num(0.1)]);
        let bytes = render("moyal", &c, &t);
        let (pairs, hash, body) = parse_rendered(&bytes).unwrap();
        assert_eq!(pairs, vec![("seed".to_string(), "4".to_string())]);
        assert_eq!(hash, sha256_hex(&body));
        assert_eq!(String::from_utf8(body).unwrap(), "name,value\r\n\"a, \"\"quoted\"\"\",1e-1\r\n");
    }
}
