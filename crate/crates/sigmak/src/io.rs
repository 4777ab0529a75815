//! CSV and JSON reports, the HCL1 field dump, and the key=value problem file.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::solver::TraceRow;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{path}: not an HCL1 dump ({reason})")]
    BadDump { path: PathBuf, reason: String },
}

/// Real number with 17 significant digits (exact round trip).
pub fn fmt_real(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

pub fn fmt_reals(v: &[f64]) -> Vec<String> {
    v.iter().map(|&x| fmt_real(x)).collect()
}

/// A homogeneous record set: one header row and string-formatted cells.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len(), "row width must match header");
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn to_csv_bytes(&self) -> Result<Vec<u8>, csv::Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.into_inner().map_err(|e| csv::Error::from(e.into_error()))
    }
}

fn create(path: &Path) -> Result<File, IoError> {
    File::create(path).map_err(|source| IoError::File { path: path.to_path_buf(), source })
}

pub fn emit_csv(table: &Table, path: &Path) -> Result<(), IoError> {
    let bytes = table.to_csv_bytes().map_err(|source| IoError::Csv { path: path.to_path_buf(), source })?;
    let mut f = create(path)?;
    f.write_all(&bytes).map_err(|source| IoError::File { path: path.to_path_buf(), source })
}

pub fn read_csv(path: &Path) -> Result<Table, IoError> {
    let mut r = csv::Reader::from_path(path).map_err(|source| IoError::Csv { path: path.to_path_buf(), source })?;
    let header = r
        .headers()
        .map_err(|source| IoError::Csv { path: path.to_path_buf(), source })?
        .iter()
        .map(String::from)
        .collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|source| IoError::Csv { path: path.to_path_buf(), source })?;
        rows.push(rec.iter().map(String::from).collect());
    }
    Ok(Table { header, rows })
}

/// Pretty JSON; struct fields keep declaration order and maps are sorted.
pub fn emit_json<T: Serialize>(value: &T, path: &Path) -> Result<(), IoError> {
    let f = create(path)?;
    let mut w = BufWriter::new(f);
    serde_json::to_writer_pretty(&mut w, value).map_err(|source| IoError::Json { path: path.to_path_buf(), source })?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|source| IoError::File { path: path.to_path_buf(), source })
}

/// One row per accepted Newton iterate.
pub fn trace_table(trace: &[TraceRow]) -> Table {
    let mut t =
        Table::new(["iteration", "residual_sup", "step", "c", "lambda_max", "psh_margin", "linear_iterations", "mean_u"]);
    for r in trace {
        t.push(vec![
            r.iteration.to_string(),
            fmt_real(r.residual_sup),
            fmt_real(r.step),
            fmt_real(r.c),
            fmt_real(r.lambda_max),
            fmt_real(r.psh_margin),
            r.linear_iterations.to_string(),
            fmt_real(r.mean_u),
        ]);
    }
    t
}

const MAGIC: &[u8; 4] = b"HCL1";

/// Field dump: `"HCL1"`, `N` and the field count as little-endian `u32`,
/// then every field's `N^4` values as little-endian `f64` in row-major order.
pub fn write_dump(path: &Path, n: usize, fields: &[&[f64]]) -> Result<(), IoError> {
    let err = |source| IoError::File { path: path.to_path_buf(), source };
    let mut w = BufWriter::new(create(path)?);
    w.write_all(MAGIC).map_err(err)?;
    w.write_all(&(n as u32).to_le_bytes()).map_err(err)?;
    w.write_all(&(fields.len() as u32).to_le_bytes()).map_err(err)?;
    for f in fields {
        for v in f.iter() {
            w.write_all(&v.to_le_bytes()).map_err(err)?;
        }
    }
    w.flush().map_err(err)
}

pub fn read_dump(path: &Path) -> Result<(usize, Vec<Vec<f64>>), IoError> {
    let bad = |reason: &str| IoError::BadDump { path: path.to_path_buf(), reason: reason.to_string() };
    let f = File::open(path).map_err(|source| IoError::File { path: path.to_path_buf(), source })?;
    let mut bytes = Vec::new();
    BufReader::new(f).read_to_end(&mut bytes).map_err(|source| IoError::File { path: path.to_path_buf(), source })?;
    if bytes.len() < 12 || &bytes[..4] != MAGIC {
        return Err(bad("missing magic"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
    let (n, count) = (word(4), word(8));
    let len = n.pow(4);
    if bytes.len() != 12 + 8 * len * count {
        return Err(bad("length does not match header"));
    }
    let fields = (0..count)
        .map(|f| {
            (0..len)
                .map(|i| {
                    let o = 12 + 8 * (f * len + i);
                    f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap())
                })
                .collect()
        })
        .collect();
    Ok((n, fields))
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("config syntax: {0}")]
    Syntax(String),
    #[error("unknown key [{section}] {key}")]
    UnknownKey { section: String, key: String },
    #[error("[{section}] {key} = {value:?}: {reason}")]
    BadValue { section: String, key: String, value: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ChiMode {
    Identity,
    Scaled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PsiMode {
    /// `psi* = F(chi + ddbar u*)` for `u* = A sum cos`.
    Manufactured,
    /// `psi = value`.
    Constant,
    /// `psi = value exp(amplitude cos x1)`.
    Cosine,
}

/// Problem file for `solve` and `diagnose`.
///
/// ```text
/// [grid]
/// n = 16
/// [operator]
/// k = 2
/// b = 1            # comma-separated, empty for pure sigma_k
/// [chi]
/// mode = identity  # identity | scaled
/// scale = 1
/// epsilon = 1
/// [psi]
/// mode = manufactured  # manufactured | constant | cosine
/// amplitude = 0.1
/// value = 3
/// [solver]
/// tol = 1e-9
/// max_iterations = 50
/// max_halvings = 30
/// linear_tol = 1e-8
/// restart = 40
/// delta = 0.01
/// seed = 42
/// [diagnose]
/// n_test = 5
/// k_test = 50
/// ```
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProblemFile {
    pub n: usize,
    pub k: usize,
    pub b: Vec<f64>,
    pub chi: ChiMode,
    pub chi_scale: f64,
    pub epsilon: f64,
    pub psi: PsiMode,
    pub amplitude: f64,
    pub value: f64,
    pub tol: f64,
    pub max_iterations: usize,
    pub max_halvings: usize,
    pub linear_tol: f64,
    pub restart: usize,
    pub delta: f64,
    pub seed: u64,
    pub n_test: f64,
    pub k_test: f64,
}

impl Default for ProblemFile {
    fn default() -> Self {
        Self {
            n: 16,
            k: 2,
            b: vec![1.0],
            chi: ChiMode::Identity,
            chi_scale: 1.0,
            epsilon: 1.0,
            psi: PsiMode::Manufactured,
            amplitude: 0.1,
            value: 3.0,
            tol: 1e-9,
            max_iterations: 50,
            max_halvings: 30,
            linear_tol: 1e-8,
            restart: 40,
            delta: 0.01,
            seed: 42,
            n_test: 5.0,
            k_test: 50.0,
        }
    }
}

fn parse<T: std::str::FromStr>(section: &str, key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.trim().parse().map_err(|e: T::Err| ConfigError::BadValue {
        section: section.into(),
        key: key.into(),
        value: value.into(),
        reason: e.to_string(),
    })
}

pub fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').map(str::trim).filter(|t| !t.is_empty()).map(|t| t.parse::<f64>().map_err(|e| format!("{t:?}: {e}"))).collect()
}

impl ProblemFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let ini = ini::Ini::load_from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
        let mut p = Self::default();
        for (section, props) in ini.iter() {
            let sec = section.unwrap_or("");
            for (key, raw) in props.iter() {
                // inline comments
                let value = raw.split('#').next().unwrap_or("").trim();
                let bad = |reason: &str| ConfigError::BadValue {
                    section: sec.into(),
                    key: key.into(),
                    value: value.into(),
                    reason: reason.into(),
                };
                match (sec, key) {
                    ("grid", "n") => p.n = parse(sec, key, value)?,
                    ("operator", "k") => p.k = parse(sec, key, value)?,
                    ("operator", "b") => p.b = parse_list(value).map_err(|e| bad(&e))?,
                    ("chi", "mode") => {
                        p.chi = match value {
                            "identity" => ChiMode::Identity,
                            "scaled" => ChiMode::Scaled,
                            _ => return Err(bad("expected identity or scaled")),
                        }
                    }
                    ("chi", "scale") => p.chi_scale = parse(sec, key, value)?,
                    ("chi", "epsilon") => p.epsilon = parse(sec, key, value)?,
                    ("psi", "mode") => {
                        p.psi = match value {
                            "manufactured" => PsiMode::Manufactured,
                            "constant" => PsiMode::Constant,
                            "cosine" => PsiMode::Cosine,
                            _ => return Err(bad("expected manufactured, constant or cosine")),
                        }
                    }
                    ("psi", "amplitude") => p.amplitude = parse(sec, key, value)?,
                    ("psi", "value") => p.value = parse(sec, key, value)?,
                    ("solver", "tol") => p.tol = parse(sec, key, value)?,
                    ("solver", "max_iterations") => p.max_iterations = parse(sec, key, value)?,
                    ("solver", "max_halvings") => p.max_halvings = parse(sec, key, value)?,
                    ("solver", "linear_tol") => p.linear_tol = parse(sec, key, value)?,
                    ("solver", "restart") => p.restart = parse(sec, key, value)?,
                    ("solver", "delta") => p.delta = parse(sec, key, value)?,
                    ("solver", "seed") => p.seed = parse(sec, key, value)?,
                    ("diagnose", "n_test") => p.n_test = parse(sec, key, value)?,
                    ("diagnose", "k_test") => p.k_test = parse(sec, key, value)?,
                    _ => return Err(ConfigError::UnknownKey { section: sec.into(), key: key.into() }),
                }
            }
        }
        Ok(p)
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    /// The resolved configuration in problem-file syntax.
    pub fn to_text(&self) -> String {
        let b: Vec<String> = self.b.iter().map(|v| v.to_string()).collect();
        let chi = match self.chi {
            ChiMode::Identity => "identity",
            ChiMode::Scaled => "scaled",
        };
        let psi = match self.psi {
            PsiMode::Manufactured => "manufactured",
            PsiMode::Constant => "constant",
            PsiMode::Cosine => "cosine",
        };
        format!(
            "[grid]\nn = {}\n[operator]\nk = {}\nb = {}\n[chi]\nmode = {chi}\nscale = {:?}\nepsilon = {:?}\n\
             [psi]\nmode = {psi}\namplitude = {:?}\nvalue = {:?}\n[solver]\ntol = {:?}\nmax_iterations = {}\n\
             max_halvings = {}\nlinear_tol = {:?}\nrestart = {}\ndelta = {:?}\nseed = {}\n[diagnose]\nn_test = {:?}\nk_test = {:?}\n",
            self.n,
            self.k,
            b.join(", "),
            self.chi_scale,
            self.epsilon,
            self.amplitude,
            self.value,
            self.tol,
            self.max_iterations,
            self.max_halvings,
            self.linear_tol,
            self.restart,
            self.delta,
            self.seed,
            self.n_test,
            self.k_test,
        )
    }
}
