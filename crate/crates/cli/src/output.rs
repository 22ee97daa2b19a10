//! CSV assembly: one header, constant column count, LF endings, floats at
//! nine significant digits.

use std::path::Path;

use crate::CliError;

pub struct Csv {
    buf: String,
    columns: usize,
}

impl Csv {
    pub fn new(header: &[String]) -> Self {
        let mut buf = String::new();
        buf.push_str(&header.join(","));
        buf.push('\n');
        Csv { buf, columns: header.len() }
    }

    pub fn row(&mut self, cells: &[String]) {
        assert_eq!(cells.len(), self.columns, "column count drift");
        self.buf.push_str(&cells.join(","));
        self.buf.push('\n');
    }

    pub fn into_text(self) -> String {
        self.buf
    }
}

pub fn header(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

pub fn float(x: f64) -> String {
    format!("{x:.8e}")
}

pub fn integer(n: u64) -> String {
    n.to_string()
}

pub fn boolean(b: bool) -> String {
    b.to_string()
}

/// Writes to `--out` when given, otherwise standard output.
pub fn deliver(text: &str, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
