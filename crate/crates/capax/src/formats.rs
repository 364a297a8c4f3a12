//! JSON input descriptions and CSV files.
//!
//! * Kernel JSON: `{"kind":"riesz","alpha":1.0,"dim":3}`, `{"kind":"newtonian","dim":3}`,
//!   `{"kind":"log"}` or `{"kind":"matrix","entries":[[2,1],[1,2]]}`.
//! * Shape JSON: `{"kind":"sphere","center":[0,0,0],"r":1.0,"resolution":400}`; also
//!   `ball`, `box` (`lo`, `hi`), `annulus` (`r_in`, `r_out`) and `cloud` (`file` or `points`).
//! * Matrix JSON: `{"entries":[[...]]}` or a bare array of rows.
//! * Subsets: `all`, a node label (`outer_shell`), indices and ranges (`0,2,5-7`),
//!   or `@file.json` holding an index array.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use capax_core::{DiscreteMeasure, GramForm, Kernel, Matrix, NodeSet, PotentialVector, ShapeSpec, SubsetMask};
use serde::Deserialize;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum KernelSpec {
    Riesz { alpha: f64, dim: usize },
    Newtonian { dim: usize },
    #[serde(alias = "logarithmic")]
    Log,
    Matrix { entries: Vec<Vec<f64>> },
}

impl KernelSpec {
    pub fn to_kernel(&self) -> Result<Kernel> {
        Ok(match self {
            KernelSpec::Riesz { alpha, dim } => Kernel::riesz(*alpha, *dim)?,
            KernelSpec::Newtonian { dim } => Kernel::newtonian(*dim)?,
            KernelSpec::Log => Kernel::Logarithmic,
            KernelSpec::Matrix { entries } => Kernel::matrix(matrix_from_rows(entries)?)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ShapeFile {
    Ball { center: Vec<f64>, r: f64, resolution: Option<usize> },
    Sphere { center: Vec<f64>, r: f64, resolution: Option<usize> },
    Box { lo: Vec<f64>, hi: Vec<f64>, resolution: Option<usize> },
    Annulus { center: Vec<f64>, r_in: f64, r_out: f64, resolution: Option<usize> },
    Cloud { file: Option<PathBuf>, points: Option<Vec<Vec<f64>>>, dim: Option<usize>, cell_dim: Option<usize> },
}

/// Resolutions used when neither the shape file nor the command line sets one.
pub const DEFAULT_SPHERE_NODES: usize = 400;
pub const DEFAULT_BALL_SHELLS: usize = 4;
pub const DEFAULT_ANNULUS_LAYERS: usize = 3;
pub const DEFAULT_BOX_POINTS: usize = 8;

impl ShapeFile {
    /// Core shape and resolution; relative cloud paths resolve against `base`.
    pub fn to_shape(&self, base: &Path, resolution: Option<usize>) -> Result<(ShapeSpec, usize)> {
        let pick = |own: &Option<usize>, default| resolution.or(*own).unwrap_or(default);
        Ok(match self {
            ShapeFile::Ball { center, r, resolution: own } => {
                (ShapeSpec::Ball { center: center.clone(), radius: *r }, pick(own, DEFAULT_BALL_SHELLS))
            }
            ShapeFile::Sphere { center, r, resolution: own } => {
                (ShapeSpec::Sphere { center: center.clone(), radius: *r }, pick(own, DEFAULT_SPHERE_NODES))
            }
            ShapeFile::Box { lo, hi, resolution: own } => {
                (ShapeSpec::Box { lo: lo.clone(), hi: hi.clone() }, pick(own, DEFAULT_BOX_POINTS))
            }
            ShapeFile::Annulus { center, r_in, r_out, resolution: own } => (
                ShapeSpec::Annulus { center: center.clone(), r_in: *r_in, r_out: *r_out },
                pick(own, DEFAULT_ANNULUS_LAYERS),
            ),
            ShapeFile::Cloud { file, points, dim, cell_dim } => {
                let (points, cell_sizes) = match (file, points) {
                    (Some(f), None) => read_cloud_csv(&base.join(f), *dim)?,
                    (None, Some(p)) => (p.clone(), None),
                    _ => bail!("a cloud needs exactly one of \"file\" and \"points\""),
                };
                (ShapeSpec::Cloud { points, cell_sizes, cell_dim: *cell_dim }, 1)
            }
        })
    }
}

pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<Matrix> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        bail!("matrix must be square");
    }
    Ok(Matrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

pub fn read_kernel(path: &Path) -> Result<KernelSpec> {
    serde_json::from_str(&read_text(path)?).with_context(|| format!("parsing kernel spec {}", path.display()))
}

pub fn read_shape(path: &Path) -> Result<ShapeFile> {
    serde_json::from_str(&read_text(path)?).with_context(|| format!("parsing shape spec {}", path.display()))
}

#[derive(Deserialize)]
#[serde(untagged)]
enum MatrixFile {
    Wrapped { entries: Vec<Vec<f64>> },
    Bare(Vec<Vec<f64>>),
}

pub fn read_matrix(path: &Path) -> Result<Matrix> {
    let m: MatrixFile =
        serde_json::from_str(&read_text(path)?).with_context(|| format!("parsing matrix {}", path.display()))?;
    match m {
        MatrixFile::Wrapped { entries } | MatrixFile::Bare(entries) => matrix_from_rows(&entries),
    }
}

fn numeric_rows(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let mut rows = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parsed: Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(v) if !v.is_empty() => rows.push(v),
            // a leading header line is tolerated
            Err(_) if k == 0 => {}
            _ => bail!("{}: row {} is not numeric", path.display(), k + 1),
        }
    }
    Ok(rows)
}

/// One point per row; with `dim` given, an extra last column is the cell size.
pub fn read_cloud_csv(path: &Path, dim: Option<usize>) -> Result<(Vec<Vec<f64>>, Option<Vec<f64>>)> {
    let rows = numeric_rows(path)?;
    let Some(d) = dim.or_else(|| rows.first().map(Vec::len)) else { bail!("{}: empty point cloud", path.display()) };
    let mut points = Vec::with_capacity(rows.len());
    let mut sizes = Vec::new();
    for (k, r) in rows.into_iter().enumerate() {
        match r.len() {
            l if l == d => points.push(r),
            l if l == d + 1 => {
                sizes.push(r[d]);
                points.push(r[..d].to_vec());
            }
            l => bail!("{}: row {} has {l} columns, expected {d} or {}", path.display(), k + 1, d + 1),
        }
    }
    match sizes.len() {
        0 => Ok((points, None)),
        s if s == points.len() => Ok((points, Some(sizes))),
        _ => bail!("{}: cell sizes given on some rows only", path.display()),
    }
}

fn parse_indices(spec: &str, n: usize) -> Result<Vec<usize>> {
    let mut idx = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once('-') {
            let (a, b): (usize, usize) = (a.trim().parse()?, b.trim().parse()?);
            if a > b {
                bail!("empty range {part}");
            }
            idx.extend(a..=b);
        } else {
            idx.push(part.parse()?);
        }
    }
    if let Some(&i) = idx.iter().find(|&&i| i >= n) {
        bail!("index {i} out of range for {n} nodes");
    }
    Ok(idx)
}

pub fn parse_subset(spec: &str, nodes: &NodeSet) -> Result<SubsetMask> {
    let n = nodes.len();
    let spec = spec.trim();
    if spec == "all" {
        return Ok(nodes.all());
    }
    if let Some(file) = spec.strip_prefix('@') {
        let idx: Vec<usize> = serde_json::from_str(&read_text(Path::new(file))?)
            .with_context(|| format!("parsing subset file {file}"))?;
        return Ok(nodes.mask(idx)?);
    }
    if let Some(mask) = nodes.label(spec) {
        return Ok(mask.clone());
    }
    if spec.starts_with(|c: char| c.is_ascii_digit()) {
        let idx = parse_indices(spec, n).with_context(|| format!("parsing subset {spec:?}"))?;
        return Ok(nodes.mask(idx)?);
    }
    let labels: Vec<&String> = nodes.labels().keys().collect();
    Err(anyhow!("unknown subset {spec:?}; use all, indices or one of the labels {labels:?}"))
}

/// `dirac:I`, `uniform` (unit total mass) or a CSV file of `index,weight` rows.
pub fn parse_measure(spec: &str, gram: &GramForm) -> Result<DiscreteMeasure> {
    let n = gram.len();
    if let Some(i) = spec.strip_prefix("dirac:") {
        return Ok(DiscreteMeasure::dirac(gram.node_set_id(), n, i.trim().parse()?)?);
    }
    if spec == "uniform" {
        return Ok(DiscreteMeasure::on(gram, vec![1.0 / n as f64; n])?);
    }
    let mut w = vec![0.0; n];
    for r in numeric_rows(Path::new(spec))? {
        let [i, v] = r[..] else { bail!("{spec}: measure rows are index,weight") };
        if i < 0.0 || i.fract() != 0.0 || i as usize >= n {
            bail!("{spec}: bad node index {i}");
        }
        w[i as usize] += v;
    }
    Ok(DiscreteMeasure::on(gram, w)?)
}

fn write_rows(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn f17(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_measure_csv(path: &Path, m: &DiscreteMeasure) -> Result<()> {
    write_rows(path, &["index", "weight"], m.weights().iter().enumerate().map(|(i, w)| vec![i.to_string(), f17(*w)]))
}

pub fn write_potential_csv(path: &Path, p: &PotentialVector) -> Result<()> {
    write_rows(path, &["index", "value"], p.values().iter().enumerate().map(|(i, v)| vec![i.to_string(), f17(*v)]))
}

pub fn write_stages_csv(path: &Path, stages: &[capax_core::StageRecord]) -> Result<()> {
    write_rows(
        path,
        &["stage", "size", "capacity", "mass", "energy", "max_potential_violation", "distance_to_limit"],
        stages.iter().map(|s| {
            vec![
                s.stage.to_string(),
                s.size.to_string(),
                f17(s.capacity),
                f17(s.mass),
                f17(s.energy),
                f17(s.max_potential_violation),
                f17(s.distance_to_limit),
            ]
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_specs_parse() {
        let k: KernelSpec = serde_json::from_str(r#"{"kind":"riesz","alpha":1.0,"dim":3}"#).unwrap();
        assert_eq!(k, KernelSpec::Riesz { alpha: 1.0, dim: 3 });
        let k: KernelSpec = serde_json::from_str(r#"{"kind":"log"}"#).unwrap();
        assert_eq!(k.to_kernel().unwrap(), Kernel::Logarithmic);
        let k: KernelSpec = serde_json::from_str(r#"{"kind":"matrix","entries":[[2,1],[1,2]]}"#).unwrap();
        assert!(matches!(k.to_kernel().unwrap(), Kernel::Matrix(_)));
        assert!(serde_json::from_str::<KernelSpec>(r#"{"kind":"gauss"}"#).is_err());
    }

    #[test]
    fn shape_defaults_and_overrides() {
        let s: ShapeFile = serde_json::from_str(r#"{"kind":"sphere","center":[0,0,0],"r":1.0}"#).unwrap();
        assert_eq!(s.to_shape(Path::new("."), None).unwrap().1, DEFAULT_SPHERE_NODES);
        assert_eq!(s.to_shape(Path::new("."), Some(50)).unwrap().1, 50);
        let s: ShapeFile = serde_json::from_str(r#"{"kind":"ball","center":[0,0,0],"r":1.0,"resolution":2}"#).unwrap();
        assert_eq!(s.to_shape(Path::new("."), None).unwrap().1, 2);
    }

    #[test]
    fn cloud_csv_with_cell_sizes() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("pts.csv");
        fs::write(&p, "x,y,h\n0,0,0.1\n0.5,0,0.2\n").unwrap();
        let (pts, sizes) = read_cloud_csv(&p, Some(2)).unwrap();
        assert_eq!(pts, vec![vec![0.0, 0.0], vec![0.5, 0.0]]);
        assert_eq!(sizes, Some(vec![0.1, 0.2]));
        let (pts, sizes) = read_cloud_csv(&p, None).unwrap();
        assert_eq!(pts[0].len(), 3);
        assert!(sizes.is_none());
        fs::write(&p, "0,0,0.1\n0.5,0\n").unwrap();
        assert!(read_cloud_csv(&p, Some(2)).is_err());
    }

    #[test]
    fn subsets() {
        let ns = NodeSet::abstract_nodes(8);
        assert_eq!(parse_subset("all", &ns).unwrap().len(), 8);
        assert_eq!(parse_subset("0,2,5-7", &ns).unwrap().indices(), &[0, 2, 5, 6, 7]);
        assert!(parse_subset("9", &ns).is_err());
        assert!(parse_subset("nowhere", &ns).is_err());
        let ball = capax_core::discretize(&ShapeSpec::Ball { center: vec![0.0; 3], radius: 1.0 }, 2).unwrap();
        assert_eq!(parse_subset("outer_shell", &ball).unwrap(), ball.label("outer_shell").unwrap().clone());
    }

    #[test]
    fn measures() {
        let g = GramForm::from_matrix(Matrix::from_rows(&[[2.0, 1.0], [1.0, 2.0]]).unwrap()).unwrap();
        assert_eq!(parse_measure("dirac:1", &g).unwrap().weights(), &[0.0, 1.0]);
        assert_eq!(parse_measure("uniform", &g).unwrap().weights(), &[0.5, 0.5]);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("mu.csv");
        fs::write(&p, "index,weight\n0,0.25\n1,0.75\n").unwrap();
        assert_eq!(parse_measure(p.to_str().unwrap(), &g).unwrap().weights(), &[0.25, 0.75]);
        let out = dir.path().join("out.csv");
        write_measure_csv(&out, &parse_measure(p.to_str().unwrap(), &g).unwrap()).unwrap();
        assert_eq!(parse_measure(out.to_str().unwrap(), &g).unwrap().weights(), &[0.25, 0.75]);
    }
}
