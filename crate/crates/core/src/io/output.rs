use std::io::Write;
use std::path::{Path, PathBuf};

use tempfile::NamedTempFile;

use super::config::{Format, OutputKind, OutputSpec};
use super::OutputError;
use crate::bloch::{bloch_vector, Trajectory};
use crate::ensemble::{EchoEvent, EnsembleResult, ScanRow};

pub const TIMESERIES_COLUMNS: [&str; 7] = ["t_us", "re_P", "im_P", "intensity", "rho11", "rho22", "rho33"];
pub const ECHO_COLUMNS: [&str; 5] = ["label", "t_peak_us", "re_amp", "im_amp", "intensity"];
pub const SCAN_COLUMNS: [&str; 11] = [
    "t_r1_us",
    "status",
    "pred_e1_us",
    "pred_e2_us",
    "e1_t_us",
    "e1_abs",
    "e1_energy",
    "e2_t_us",
    "e2_abs",
    "e2_energy",
    "message",
];
pub const BLOCH_COLUMNS: [&str; 7] = ["t_us", "u", "v", "w", "rho11", "rho22", "rho33"];

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Text(String),
    Empty,
}

impl Cell {
    fn opt(v: Option<f64>) -> Cell {
        v.map_or(Cell::Empty, Cell::Num)
    }

    fn csv(&self) -> String {
        match self {
            Cell::Num(v) => format_number(*v),
            Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> String {
        match self {
            Cell::Num(v) if v.is_finite() => format_number(*v),
            Cell::Num(_) | Cell::Empty => "null".into(),
            Cell::Text(s) => serde_json::to_string(s).expect("string serializes"),
        }
    }
}

/// Rounds to 9 significant digits.
pub fn round_sig9(v: f64) -> f64 {
    if !v.is_finite() || v == 0.0 {
        return v;
    }
    format!("{v:.8e}").parse().expect("formatted float parses")
}

/// Shortest text that reads back as `round_sig9(v)`; at most 9 significant digits.
pub fn format_number(v: f64) -> String {
    match serde_json::Number::from_f64(round_sig9(v)) {
        Some(n) => n.to_string(),
        None => format!("{v}"),
    }
}

/// A named table with fixed columns.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: &'static str,
    pub columns: &'static [&'static str],
    rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &'static str, columns: &'static [&'static str]) -> Self {
        Table {
            name,
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width of table {}", self.name);
        self.rows.push(row);
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::csv).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self, meta: &Metadata) -> String {
        let cols: Vec<String> = self.columns.iter().map(|c| format!("\"{c}\"")).collect();
        let mut out = format!(
            "{{\n  \"metadata\": {},\n  \"table\": \"{}\",\n  \"columns\": [{}],\n  \"length\": {},\n  \"rows\": [",
            meta.to_json(),
            self.name,
            cols.join(", "),
            self.rows.len()
        );
        for (i, row) in self.rows.iter().enumerate() {
            let fields: Vec<String> = self
                .columns
                .iter()
                .zip(row)
                .map(|(c, v)| format!("\"{c}\": {}", v.json()))
                .collect();
            out.push_str(if i == 0 { "\n    {" } else { ",\n    {" });
            out.push_str(&fields.join(", "));
            out.push('}');
        }
        out.push_str(if self.rows.is_empty() { "]\n}\n" } else { "\n  ]\n}\n" });
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Metadata {
    pub job_hash: String,
    pub version: String,
    pub wall_time_s: f64,
}

impl Metadata {
    pub fn new(job_hash: String, wall_time_s: f64) -> Self {
        Metadata {
            job_hash,
            version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_s,
        }
    }

    fn to_json(&self) -> String {
        format!(
            "{{\"job_hash\": \"{}\", \"version\": \"{}\", \"wall_time_s\": {}}}",
            self.job_hash,
            self.version,
            format_number(self.wall_time_s)
        )
    }
}

/// Everything a command produced.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultBundle {
    pub metadata: Metadata,
    pub timeseries: Option<Table>,
    pub echoes: Option<Table>,
    pub scan: Option<Table>,
    pub bloch: Option<Table>,
}

impl ResultBundle {
    pub fn new(metadata: Metadata) -> Self {
        ResultBundle {
            metadata,
            timeseries: None,
            echoes: None,
            scan: None,
            bloch: None,
        }
    }

    pub fn table(&self, kind: OutputKind) -> Option<&Table> {
        match kind {
            OutputKind::Timeseries => self.timeseries.as_ref(),
            OutputKind::Echoes => self.echoes.as_ref(),
            OutputKind::Scan => self.scan.as_ref(),
            OutputKind::Bloch => self.bloch.as_ref(),
        }
    }

    pub fn render(&self, kind: OutputKind, format: Format) -> Option<String> {
        let table = self.table(kind)?;
        Some(match format {
            Format::Csv => table.to_csv(),
            Format::Json => table.to_json(&self.metadata),
        })
    }
}

pub fn timeseries_table(result: &EnsembleResult) -> Table {
    let mut t = Table::new("timeseries", &TIMESERIES_COLUMNS);
    for ((time, p), pops) in result.times.iter().zip(&result.polarization).zip(&result.populations) {
        t.push(vec![
            Cell::Num(*time),
            Cell::Num(p.re),
            Cell::Num(p.im),
            Cell::Num(p.norm_sqr()),
            Cell::Num(pops[0]),
            Cell::Num(pops[1]),
            Cell::Num(pops[2]),
        ]);
    }
    t
}

pub fn echo_table(events: &[EchoEvent]) -> Table {
    let mut t = Table::new("echoes", &ECHO_COLUMNS);
    for e in events {
        t.push(vec![
            Cell::Text(e.window_label.clone()),
            Cell::Num(e.t_peak),
            Cell::Num(e.amplitude.re),
            Cell::Num(e.amplitude.im),
            Cell::Num(e.intensity),
        ]);
    }
    t
}

pub fn scan_table(rows: &[ScanRow]) -> Table {
    let mut t = Table::new("scan", &SCAN_COLUMNS);
    for r in rows {
        let row = match &r.outcome {
            Ok(p) => {
                let ev = |e: &Option<EchoEvent>| {
                    [
                        Cell::opt(e.as_ref().map(|e| e.t_peak)),
                        Cell::opt(e.as_ref().map(|e| e.amplitude.norm())),
                        Cell::opt(e.as_ref().map(|e| e.energy)),
                    ]
                };
                let mut row = vec![
                    Cell::Num(r.t_r1),
                    Cell::Text("ok".into()),
                    Cell::Num(p.predicted_e1),
                    Cell::opt(p.predicted_e2),
                ];
                row.extend(ev(&p.e1));
                row.extend(ev(&p.e2));
                row.push(Cell::Empty);
                row
            }
            Err(e) => {
                let mut row = vec![Cell::Num(r.t_r1), Cell::Text("error".into())];
                row.extend(std::iter::repeat(Cell::Empty).take(8));
                row.push(Cell::Text(e.to_string()));
                row
            }
        };
        t.push(row);
    }
    t
}

pub fn bloch_table(traj: &Trajectory) -> Table {
    let mut t = Table::new("bloch", &BLOCH_COLUMNS);
    for (time, rho) in traj.times.iter().zip(&traj.states) {
        let b = bloch_vector(rho);
        let [p1, p2, p3] = rho.populations();
        t.push(vec![
            Cell::Num(*time),
            Cell::Num(b.u),
            Cell::Num(b.v),
            Cell::Num(b.w),
            Cell::Num(p1),
            Cell::Num(p2),
            Cell::Num(p3),
        ]);
    }
    t
}

/// Writes `contents` to a temporary file beside `path`, then renames it
/// into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), OutputError> {
    let staged = stage(path, contents)?;
    staged.persist(path).map_err(|e| OutputError::Write {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}

fn stage(path: &Path, contents: &[u8]) -> Result<NamedTempFile, OutputError> {
    let err = |source| OutputError::Write {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = NamedTempFile::new_in(dir).map_err(err)?;
    tmp.write_all(contents).map_err(err)?;
    tmp.as_file().sync_all().map_err(err)?;
    Ok(tmp)
}

/// Writes every requested output whose table the bundle holds. All files
/// are staged first and renamed only once every one has been written.
/// Outputs for tables the command did not produce are skipped.
pub fn emit_results(bundle: &ResultBundle, outputs: &[OutputSpec]) -> Result<Vec<PathBuf>, OutputError> {
    let mut staged = Vec::new();
    for o in outputs {
        if let Some(text) = bundle.render(o.kind, o.format) {
            let path = PathBuf::from(&o.path);
            staged.push((stage(&path, text.as_bytes())?, path));
        }
    }
    let mut written = Vec::with_capacity(staged.len());
    for (tmp, path) in staged {
        tmp.persist(&path).map_err(|e| OutputError::Write {
            path: path.clone(),
            source: e.error,
        })?;
        written.push(path);
    }
    Ok(written)
}
