//! Text formats: loops, real forms, grid frames, factor diagnostics and
//! surface exports (CSV, OBJ). Files are written atomically.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::integrable::{Grid, GridFrame, Immersion, SurfaceSample};
use crate::involutions::{builtin_form, FiniteAutomorphism, InvolutionSpec, Kind, RealFormSpec};
use crate::linalg::{CMat, C64};
use crate::loops::LaurentLoop;

#[derive(Serialize, Deserialize)]
struct TermFile {
    deg: i64,
    matrix: Vec<Vec<[f64; 2]>>,
}

#[derive(Serialize, Deserialize)]
struct LoopFile {
    size: usize,
    terms: Vec<TermFile>,
}

fn matrix_to_rows(m: &CMat) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

fn rows_to_matrix(size: usize, rows: &[Vec<[f64; 2]>]) -> Result<CMat> {
    if rows.len() != size || rows.iter().any(|r| r.len() != size) {
        return Err(Error::Parse(format!("matrix is not {size} x {size}")));
    }
    Ok(CMat::from_fn(size, size, |i, j| C64::new(rows[i][j][0], rows[i][j][1])))
}

fn loop_file(x: &LaurentLoop) -> LoopFile {
    let mut terms: Vec<TermFile> = x
        .terms()
        .filter(|(_, c)| c.iter().any(|z| *z != C64::new(0.0, 0.0)))
        .map(|(deg, c)| TermFile {
            deg,
            matrix: matrix_to_rows(c),
        })
        .collect();
    if terms.is_empty() {
        let d = if x.window().contains(0) { 0 } else { x.window().min };
        terms.push(TermFile {
            deg: d,
            matrix: matrix_to_rows(&x.coeff_or_zero(d)),
        });
    }
    LoopFile {
        size: x.size(),
        terms,
    }
}

fn loop_from_file(f: LoopFile) -> Result<LaurentLoop> {
    if f.size == 0 {
        return Err(Error::Parse("loop size must be positive".into()));
    }
    let mut degs: Vec<i64> = f.terms.iter().map(|t| t.deg).collect();
    degs.sort_unstable();
    if degs.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Parse("duplicate degree in loop file".into()));
    }
    let terms = f
        .terms
        .iter()
        .map(|t| Ok((t.deg, rows_to_matrix(f.size, &t.matrix)?)))
        .collect::<Result<Vec<_>>>()?;
    LaurentLoop::from_terms(f.size, &terms)
}

pub fn loop_to_json(x: &LaurentLoop) -> String {
    serde_json::to_string(&loop_file(x)).expect("serializable")
}

pub fn loop_to_json_pretty(x: &LaurentLoop) -> String {
    serde_json::to_string_pretty(&loop_file(x)).expect("serializable")
}

pub fn loop_from_json(s: &str) -> Result<LaurentLoop> {
    loop_from_file(serde_json::from_str(s)?)
}

pub fn read_loop(path: &Path) -> Result<LaurentLoop> {
    loop_from_json(&fs::read_to_string(path)?)
}

/// Writes `contents` to a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_loop(path: &Path, x: &LaurentLoop) -> Result<()> {
    let mut s = loop_to_json_pretty(x);
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

// ---- real forms ----

fn auto_to_json(a: &FiniteAutomorphism) -> Value {
    match a {
        FiniteAutomorphism::AdQ { q, .. } => {
            serde_json::json!({"auto": "adq", "matrix": matrix_to_rows(q)})
        }
        FiniteAutomorphism::Conj => serde_json::json!({"auto": "conj"}),
        FiniteAutomorphism::Ict => serde_json::json!({"auto": "ict"}),
        FiniteAutomorphism::Compose(parts) => serde_json::json!({
            "auto": "compose",
            "parts": parts.iter().map(auto_to_json).collect::<Vec<_>>(),
        }),
    }
}

fn auto_from_json(size: usize, v: &Value) -> Result<FiniteAutomorphism> {
    let kind = v
        .get("auto")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::Parse("involution entry lacks 'auto'".into()))?;
    match kind {
        "adq" => {
            let rows: Vec<Vec<[f64; 2]>> = serde_json::from_value(
                v.get("matrix")
                    .cloned()
                    .ok_or_else(|| Error::Parse("'adq' needs 'matrix'".into()))?,
            )?;
            FiniteAutomorphism::ad(rows_to_matrix(size, &rows)?)
        }
        "conj" => Ok(FiniteAutomorphism::Conj),
        "ict" => Ok(FiniteAutomorphism::Ict),
        "compose" => {
            let parts = v
                .get("parts")
                .and_then(Value::as_array)
                .ok_or_else(|| Error::Parse("'compose' needs 'parts'".into()))?;
            Ok(FiniteAutomorphism::Compose(
                parts.iter().map(|p| auto_from_json(size, p)).collect::<Result<_>>()?,
            ))
        }
        other => Err(Error::Parse(format!("unknown automorphism '{other}'"))),
    }
}

fn spec_to_json(s: &InvolutionSpec) -> Value {
    let mut v = auto_to_json(s.automorphism());
    let obj = v.as_object_mut().expect("object");
    match s.kind() {
        Kind::First { rotation } => {
            obj.insert("kind".into(), "first".into());
            obj.insert("rotation".into(), serde_json::json!([rotation.re, rotation.im]));
        }
        Kind::Second => {
            obj.insert("kind".into(), "second".into());
        }
    }
    v
}

fn spec_from_json(size: usize, v: &Value) -> Result<InvolutionSpec> {
    let auto = auto_from_json(size, v)?;
    let kind = match v.get("kind").and_then(Value::as_str) {
        Some("first") => {
            let rot = match v.get("rotation") {
                Some(r) => {
                    let [re, im]: [f64; 2] = serde_json::from_value(r.clone())?;
                    C64::new(re, im)
                }
                None => C64::new(1.0, 0.0),
            };
            Kind::First { rotation: rot }
        }
        Some("second") => Kind::Second,
        _ => return Err(Error::Parse("involution 'kind' must be 'first' or 'second'".into())),
    };
    InvolutionSpec::new(auto, kind, size)
}

pub fn form_to_json(form: &RealFormSpec) -> String {
    let mut invs: Vec<Value> = form.involutions().iter().map(spec_to_json).collect();
    if let Some(t) = form.tau() {
        invs.push(spec_to_json(t));
    }
    let v = serde_json::json!({"name": form.name(), "size": form.size(), "involutions": invs});
    serde_json::to_string_pretty(&v).expect("serializable")
}

/// Parses a form file. The first first-kind entry is the base involution,
/// later first-kind entries are extras, and a second-kind entry (at most
/// one) becomes the partner.
pub fn form_from_json(s: &str) -> Result<RealFormSpec> {
    let v: Value = serde_json::from_str(s)?;
    let name = v.get("name").and_then(Value::as_str).unwrap_or("custom").to_string();
    let size = v
        .get("size")
        .and_then(Value::as_u64)
        .ok_or_else(|| Error::Parse("form file lacks 'size'".into()))? as usize;
    let entries = v
        .get("involutions")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Parse("form file lacks 'involutions'".into()))?;
    let mut first = Vec::new();
    let mut tau = None;
    for e in entries {
        let spec = spec_from_json(size, e)?;
        if spec.kind().is_first() {
            first.push(spec);
        } else if tau.replace(spec).is_some() {
            return Err(Error::Parse("more than one second-kind involution".into()));
        }
    }
    if first.is_empty() {
        return Err(Error::Parse("form needs a first-kind base involution".into()));
    }
    let base = first.remove(0);
    RealFormSpec::new(name, size, base, first, tau)
}

/// Resolves `--form`: a catalog name or a path to a form file.
pub fn resolve_form(name: &str, n: Option<usize>, k: Option<usize>) -> Result<RealFormSpec> {
    let path = Path::new(name);
    if name.ends_with(".json") && path.exists() {
        return form_from_json(&fs::read_to_string(path)?);
    }
    builtin_form(name, n, k)
}

// ---- frames ----

#[derive(Serialize, Deserialize)]
struct FrameHeader {
    n: usize,
    origin: Vec<f64>,
    h: f64,
    counts: Vec<usize>,
    form: String,
    tau: String,
}

const PARTNER: &str = "partner";

/// Header line followed by one loop per grid point, row-major.
pub fn frame_to_jsonl(frame: &GridFrame) -> String {
    let header = FrameHeader {
        n: frame.n,
        origin: frame.grid.origin.clone(),
        h: frame.grid.h,
        counts: frame.grid.counts.clone(),
        form: frame.form.name().to_string(),
        tau: PARTNER.to_string(),
    };
    let mut out = serde_json::to_string(&header).expect("serializable");
    out.push('\n');
    for v in &frame.values {
        out.push_str(&loop_to_json(v));
        out.push('\n');
    }
    out
}

pub fn frame_from_jsonl(s: &str) -> Result<GridFrame> {
    let mut lines = s.lines().filter(|l| !l.trim().is_empty());
    let header: FrameHeader = serde_json::from_str(
        lines.next().ok_or_else(|| Error::Parse("empty frame file".into()))?,
    )?;
    if header.tau != PARTNER {
        return Err(Error::Parse(format!(
            "unsupported tau '{}' (only the form's partner is supported)",
            header.tau
        )));
    }
    let grid = Grid::new(header.origin, header.h, header.counts)?;
    let form = builtin_form(&header.form, None, None)?;
    let tau = form
        .tau()
        .cloned()
        .ok_or_else(|| Error::Parse(format!("form '{}' has no partner", header.form)))?;
    let values = lines.map(loop_from_json).collect::<Result<Vec<_>>>()?;
    if values.len() != grid.len() {
        return Err(Error::Parse(format!(
            "frame file has {} loops for {} grid points",
            values.len(),
            grid.len()
        )));
    }
    if let Some(v) = values.iter().find(|v| v.size() != form.size()) {
        return Err(Error::SizeMismatch(form.size(), v.size()));
    }
    Ok(GridFrame {
        n: header.n,
        grid,
        values,
        form,
        tau,
    })
}

pub fn write_frame(path: &Path, frame: &GridFrame) -> Result<()> {
    write_atomic(path, frame_to_jsonl(frame).as_bytes())
}

pub fn read_frame(path: &Path) -> Result<GridFrame> {
    frame_from_jsonl(&fs::read_to_string(path)?)
}

// ---- factor diagnostics ----

#[derive(Serialize)]
pub struct FactorDiagnostics {
    pub residual: f64,
    pub smin: f64,
    pub winding: i64,
    pub indices: Vec<i64>,
    pub condition: f64,
    pub truncation: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub minus_form_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plus_form_residual: Option<f64>,
}

pub fn to_pretty_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

// ---- surface exports ----

/// `x1,...,xn,p1,...,pm` with one row per grid point.
pub fn surface_csv(sample: &SurfaceSample) -> Result<String> {
    let points = sample
        .sphere_points()
        .ok_or_else(|| Error::InvalidArgument("CSV export needs a sphere-path sample".into()))?;
    let dim = sample.grid.dim();
    let width = points.first().map(Vec::len).unwrap_or(0);
    let mut header: Vec<String> = (1..=dim).map(|i| format!("x{i}")).collect();
    header.extend((1..=width).map(|i| format!("p{i}")));
    let mut out = header.join(",");
    out.push('\n');
    for (p, pt) in points.iter().enumerate() {
        let row: Vec<String> = sample
            .grid
            .coords(p)
            .iter()
            .chain(pt)
            .map(|v| format!("{v:e}"))
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    Ok(out)
}

/// Point cloud in `R^3`: stereographic projection of the unit vectors from
/// the pole `-e_{pole+1}`, keeping the first three remaining coordinates.
pub fn surface_obj(sample: &SurfaceSample, pole: usize) -> Result<String> {
    let points = match &sample.immersion {
        Immersion::Sphere { points, .. } => points,
        _ => return Err(Error::InvalidArgument("OBJ export needs a sphere-path sample".into())),
    };
    let mut out = String::from("# stereographic point cloud\n");
    for pt in points {
        if pole >= pt.len() {
            return Err(Error::InvalidArgument(format!("pole {pole} out of range")));
        }
        let denom = 1.0 + pt[pole];
        let mut coords: Vec<f64> = pt
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != pole)
            .map(|(_, v)| v / denom)
            .collect();
        coords.resize(3, 0.0);
        out.push_str(&format!("v {:e} {:e} {:e}\n", coords[0], coords[1], coords[2]));
    }
    Ok(out)
}
