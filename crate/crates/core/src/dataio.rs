//! Reading pair data from CSV, peak-over-threshold excesses, empirical survival
//! curves and density grids for plotting.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dist::{pdf_gbb, standardize, ModelParams, RegionTag};
use crate::error::{Error, Result};

/// Column names of the UCI abalone file, which ships without a header row.
pub const ABALONE_COLUMNS: [&str; 9] = [
    "Sex", "Length", "Diameter", "Height", "Whole", "Shucked", "Viscera", "Shell", "Rings",
];

/// How the first row of a file is interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schema {
    /// The first row is a header when none of its cells parse as numbers.
    #[default]
    Auto,
    /// Treat every row as data and address columns by 0-based position.
    Headerless,
    /// Headerless nine-column abalone layout, addressed by [`ABALONE_COLUMNS`].
    Abalone,
}

/// Keep only rows whose `column` cell equals `value` (after trimming).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowFilter {
    pub column: String,
    pub value: String,
}

impl std::str::FromStr for RowFilter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once('=') {
            Some((c, v)) if !c.trim().is_empty() => Ok(Self {
                column: c.trim().to_string(),
                value: v.trim().to_string(),
            }),
            _ => Err(Error::Config(format!("filter must look like column=value, got {s:?}"))),
        }
    }
}

/// What [`read_pairs`] should extract.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairSpec {
    pub col1: String,
    pub col2: String,
    #[serde(default)]
    pub filter: Option<RowFilter>,
    #[serde(default)]
    pub schema: Schema,
}

impl PairSpec {
    pub fn new(col1: impl Into<String>, col2: impl Into<String>) -> Self {
        Self {
            col1: col1.into(),
            col2: col2.into(),
            filter: None,
            schema: Schema::Auto,
        }
    }

    pub fn with_filter(mut self, filter: RowFilter) -> Self {
        self.filter = Some(filter);
        self
    }

    pub fn with_schema(mut self, schema: Schema) -> Self {
        self.schema = schema;
        self
    }
}

fn is_number(cell: &str) -> bool {
    cell.trim().parse::<f64>().is_ok()
}

fn resolve(names: &[String], wanted: &str) -> Result<usize> {
    if let Some(i) = names.iter().position(|n| n == wanted) {
        return Ok(i);
    }
    if let Ok(i) = wanted.parse::<usize>() {
        if i < names.len() {
            return Ok(i);
        }
    }
    Err(Error::Schema(format!(
        "no column {wanted:?}; available columns: {}",
        names.join(", ")
    )))
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.kind() {
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => Error::Schema(format!(
            "line {line} has {len} fields, expected {expected_len}"
        )),
        _ => Error::Parse {
            line,
            column: String::new(),
            message: e.to_string(),
        },
    }
}

/// Read `(col1, col2)` pairs from CSV text, preserving row order.
pub fn read_pairs_from<R: Read>(input: R, spec: &PairSpec) -> Result<Vec<(f64, f64)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut records = reader.records();
    let first = match records.next() {
        Some(r) => r.map_err(csv_error)?,
        None => return Err(Error::Schema("input is empty".into())),
    };
    let width = first.len();
    let has_header = match spec.schema {
        Schema::Auto => first.iter().all(|c| !is_number(c)),
        Schema::Headerless | Schema::Abalone => false,
    };
    let names: Vec<String> = match spec.schema {
        Schema::Abalone => {
            if width != ABALONE_COLUMNS.len() {
                return Err(Error::Schema(format!(
                    "abalone layout has {} columns, file has {width}",
                    ABALONE_COLUMNS.len()
                )));
            }
            ABALONE_COLUMNS.iter().map(|s| s.to_string()).collect()
        }
        _ if has_header => first.iter().map(str::to_string).collect(),
        _ => (0..width).map(|i| i.to_string()).collect(),
    };
    let c1 = resolve(&names, &spec.col1)?;
    let c2 = resolve(&names, &spec.col2)?;
    let filter = spec
        .filter
        .as_ref()
        .map(|f| resolve(&names, &f.column).map(|i| (i, f.value.as_str())))
        .transpose()?;

    let mut pairs = Vec::new();
    let data_rows = (!has_header).then_some(Ok(first)).into_iter().chain(records);
    for row in data_rows {
        let row = row.map_err(csv_error)?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        if let Some((i, v)) = filter {
            if row.get(i) != Some(v) {
                continue;
            }
        }
        let cell = |i: usize| -> Result<f64> {
            let raw = row.get(i).unwrap_or("");
            raw.parse::<f64>().map_err(|_| Error::Parse {
                line,
                column: names[i].clone(),
                message: format!("{raw:?} is not a number"),
            })
        };
        pairs.push((cell(c1)?, cell(c2)?));
    }
    Ok(pairs)
}

/// Read `(col1, col2)` pairs from a CSV file.
pub fn read_pairs(path: impl AsRef<Path>, spec: &PairSpec) -> Result<Vec<(f64, f64)>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_pairs_from(file, spec)
}

/// Write pairs as CSV with header `y1,y2`.
pub fn write_pairs<W: Write>(out: W, pairs: &[(f64, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Schema(format!("cannot write pairs: {e}"));
    w.write_record(["y1", "y2"]).map_err(io)?;
    for &(a, b) in pairs {
        w.write_record([a.to_string(), b.to_string()]).map_err(io)?;
    }
    w.flush().map_err(|e| Error::Schema(format!("cannot write pairs: {e}")))
}

/// Thresholds for the peak-over-threshold step. A pair is kept only when both
/// components strictly exceed their thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotConfig {
    pub threshold1: f64,
    pub threshold2: f64,
}

impl PotConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.threshold1.is_finite() || !self.threshold2.is_finite() {
            return Err(Error::Config("thresholds must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotResult {
    /// `(y1 - t1, y2 - t2)` for the retained pairs, in input order
    pub excesses: Vec<(f64, f64)>,
    pub retained: usize,
    pub discarded: usize,
    pub mode: String,
}

pub fn pot_transform(pairs: &[(f64, f64)], cfg: &PotConfig) -> Result<PotResult> {
    cfg.validate()?;
    let excesses: Vec<(f64, f64)> = pairs
        .iter()
        .filter(|&&(a, b)| a > cfg.threshold1 && b > cfg.threshold2)
        .map(|&(a, b)| (a - cfg.threshold1, b - cfg.threshold2))
        .collect();
    Ok(PotResult {
        retained: excesses.len(),
        discarded: pairs.len() - excesses.len(),
        excesses,
        mode: "both components strictly exceed; excess = value - threshold".into(),
    })
}

/// Step-function survival estimate `S(y) = #{x_i > y} / n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalSurvival {
    /// distinct sample values, ascending, with `S` evaluated at each
    pub points: Vec<(f64, f64)>,
    pub n: usize,
    pub convention: String,
    #[serde(skip)]
    sorted: Vec<f64>,
}

impl EmpiricalSurvival {
    pub fn eval(&self, y: f64) -> f64 {
        let above = self.sorted.len() - self.sorted.partition_point(|&x| x <= y);
        above as f64 / self.n as f64
    }
}

pub fn empirical_survival(values: &[f64]) -> Result<EmpiricalSurvival> {
    if values.is_empty() {
        return Err(Error::Domain("empirical survival of an empty sample".into()));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::Domain("sample contains NaN".into()));
    }
    let sorted = crate::stats::sorted_copy(values);
    let n = sorted.len();
    let mut points: Vec<(f64, f64)> = Vec::new();
    for (i, &x) in sorted.iter().enumerate() {
        let s = (n - i - 1) as f64 / n as f64;
        match points.last_mut() {
            Some(last) if last.0 == x => last.1 = s,
            _ => points.push((x, s)),
        }
    }
    Ok(EmpiricalSurvival {
        points,
        n,
        convention: "right-continuous: S(y) is the fraction of the sample strictly greater than y".into(),
        sorted,
    })
}

/// Rectangle `[y1_lo, y1_hi] x [y2_lo, y2_hi]` sampled on an evenly spaced grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub y1_lo: f64,
    pub y1_hi: f64,
    pub y2_lo: f64,
    pub y2_hi: f64,
    pub steps1: usize,
    pub steps2: usize,
}

impl GridSpec {
    pub fn square(lo: f64, hi: f64, steps: usize) -> Self {
        Self {
            y1_lo: lo,
            y1_hi: hi,
            y2_lo: lo,
            y2_hi: hi,
            steps1: steps,
            steps2: steps,
        }
    }

    fn axis(lo: f64, hi: f64, steps: usize) -> impl Iterator<Item = f64> {
        let h = (hi - lo) / (steps - 1) as f64;
        (0..steps).map(move |i| if i + 1 == steps { hi } else { lo + i as f64 * h })
    }
}

/// One grid node; `density` is `None` on the diagonal, where no density exists.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub y1: f64,
    pub y2: f64,
    pub density: Option<f64>,
}

/// Evaluate `pdf_gbb` on a row-major grid (outer index over `y1`).
pub fn density_grid(p: &ModelParams, grid: &GridSpec) -> Result<Vec<GridCell>> {
    p.validate()?;
    if grid.steps1 < 2 || grid.steps2 < 2 {
        return Err(Error::Config("grid needs at least 2 steps per axis".into()));
    }
    let ls = p.loc_scale;
    if !(grid.y1_lo >= ls.mu1 && grid.y2_lo >= ls.mu2 && grid.y1_hi > grid.y1_lo && grid.y2_hi > grid.y2_lo) {
        return Err(Error::Domain("grid box must be a nonempty rectangle inside the support".into()));
    }
    let mut cells = Vec::with_capacity(grid.steps1 * grid.steps2);
    for y1 in GridSpec::axis(grid.y1_lo, grid.y1_hi, grid.steps1) {
        for y2 in GridSpec::axis(grid.y2_lo, grid.y2_hi, grid.steps2) {
            let density = match standardize((y1, y2), &ls).region {
                RegionTag::Diagonal => None,
                _ => Some(pdf_gbb((y1, y2), p)?),
            };
            cells.push(GridCell { y1, y2, density });
        }
    }
    Ok(cells)
}

/// Grid CSV: header `y1,y2,density`, `NA` for diagonal nodes.
pub fn write_grid<W: Write>(mut out: W, cells: &[GridCell]) -> std::io::Result<()> {
    writeln!(out, "y1,y2,density")?;
    for c in cells {
        match c.density {
            Some(d) => writeln!(out, "{},{},{}", c.y1, c.y2, d)?,
            None => writeln!(out, "{},{},NA", c.y1, c.y2)?,
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const ABALONE_SNIPPET: &str = "\
M,0.455,0.365,0.095,0.514,0.2245,0.101,0.15,15
M,0.35,0.265,0.09,0.2255,0.0995,0.0485,0.07,7
F,0.53,0.42,0.135,0.677,0.2565,0.1415,0.21,9
M,0.44,0.365,0.125,0.516,0.2155,0.114,0.155,10
I,0.33,0.255,0.08,0.205,0.0895,0.0395,0.055,7
F,0.545,0.425,0.125,0.768,0.294,0.1495,0.26,16
";

    #[test]
    fn abalone_preset_with_filter() {
        let spec = PairSpec::new("Length", "Diameter")
            .with_schema(Schema::Abalone)
            .with_filter("Sex=F".parse().unwrap());
        let pairs = read_pairs_from(ABALONE_SNIPPET.as_bytes(), &spec).unwrap();
        assert_eq!(pairs, vec![(0.53, 0.42), (0.545, 0.425)]);
    }

    #[test]
    fn header_detection_and_positional_fallback() {
        let with_header = "a,b\n1,2\n3,4\n";
        let got = read_pairs_from(with_header.as_bytes(), &PairSpec::new("b", "a")).unwrap();
        assert_eq!(got, vec![(2.0, 1.0), (4.0, 3.0)]);
        let bare = "1,2\n3,4\n";
        let got = read_pairs_from(bare.as_bytes(), &PairSpec::new("0", "1")).unwrap();
        assert_eq!(got, vec![(1.0, 2.0), (3.0, 4.0)]);
        // reading twice gives the same pairs
        assert_eq!(got, read_pairs_from(bare.as_bytes(), &PairSpec::new("0", "1")).unwrap());
    }

    #[test]
    fn schema_and_parse_errors() {
        assert!(matches!(read_pairs_from("".as_bytes(), &PairSpec::new("a", "b")), Err(Error::Schema(_))));
        match read_pairs_from("a,b\n1,2\n".as_bytes(), &PairSpec::new("a", "zzz")) {
            Err(Error::Schema(msg)) => assert!(msg.contains("a, b"), "{msg}"),
            other => panic!("{other:?}"),
        }
        match read_pairs_from("a,b\n1,2\n3,x\n".as_bytes(), &PairSpec::new("a", "b")) {
            Err(Error::Parse { line, column, .. }) => {
                assert_eq!(line, 3);
                assert_eq!(column, "b");
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            read_pairs_from("a,b\n1,2\n3\n".as_bytes(), &PairSpec::new("a", "b")),
            Err(Error::Schema(_))
        ));
        assert!("nofilter".parse::<RowFilter>().is_err());
    }

    #[test]
    fn pot_examples() {
        let pairs = [(1.0, 2.0), (3.0, 5.0), (2.0, 0.5)];
        let all = pot_transform(&pairs, &PotConfig { threshold1: 0.0, threshold2: 0.0 }).unwrap();
        assert_eq!(all.excesses, pairs.to_vec());
        let none = pot_transform(&pairs, &PotConfig { threshold1: 10.0, threshold2: 10.0 }).unwrap();
        assert_eq!((none.retained, none.discarded), (0, 3));
        let strict = pot_transform(&pairs, &PotConfig { threshold1: 1.0, threshold2: 0.5 }).unwrap();
        assert_eq!(strict.excesses, vec![(2.0, 4.5)]);
        assert!(strict.excesses.iter().all(|&(a, b)| a > 0.0 && b > 0.0));
    }

    #[test]
    fn empirical_survival_examples() {
        let s = empirical_survival(&[3.0, 1.0, 2.0]).unwrap();
        assert!((s.eval(1.5) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.eval(1.0 - 1e-9), 1.0);
        assert_eq!(s.eval(3.0), 0.0);
        assert_eq!(s.points, vec![(1.0, 2.0 / 3.0), (2.0, 1.0 / 3.0), (3.0, 0.0)]);
        let ties = empirical_survival(&[1.0, 1.0, 2.0]).unwrap();
        assert_eq!(ties.points, vec![(1.0, 1.0 / 3.0), (2.0, 0.0)]);
        assert!(empirical_survival(&[]).is_err());
    }

    #[test]
    fn grid_examples() {
        let p = ModelParams::new(0.2, 0.1, 0.2, 0.4).unwrap();
        let cells = density_grid(&p, &GridSpec { y1_lo: 0.5, y1_hi: 1.0, y2_lo: 0.25, y2_hi: 2.0, steps1: 2, steps2: 2 }).unwrap();
        assert_eq!(cells.len(), 4);
        for c in &cells {
            assert_eq!(c.density.unwrap(), pdf_gbb((c.y1, c.y2), &p).unwrap());
        }
        assert_eq!((cells[1].y1, cells[1].y2), (0.5, 2.0));
        let sq = density_grid(&p, &GridSpec::square(0.0, 1.0, 3)).unwrap();
        assert_eq!(sq.iter().filter(|c| c.density.is_none()).count(), 3);
        let mut buf = Vec::new();
        write_grid(&mut buf, &sq).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("y1,y2,density\n"));
        assert_eq!(text.matches(",NA").count(), 3);
        assert!(density_grid(&p, &GridSpec::square(0.0, 1.0, 1)).is_err());
        assert!(density_grid(&p, &GridSpec::square(-1.0, 1.0, 3)).is_err());
    }
}
