//! Datasets: synthetic shifted-Gaussian benchmark, CSV feature files, and
//! the initial active-learning pools.

use std::f64::consts::PI;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::active::ActiveState;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainTag {
    Source,
    Target,
}

/// Labeled samples of one domain. Rows of `features` are samples.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainDataset {
    pub features: Array2<f64>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
    pub domain: DomainTag,
    pub name: String,
}

impl DomainDataset {
    pub fn new(
        features: Array2<f64>,
        labels: Vec<usize>,
        num_classes: usize,
        domain: DomainTag,
        name: impl Into<String>,
    ) -> Result<Self> {
        let ds = Self {
            features,
            labels,
            num_classes,
            domain,
            name: name.into(),
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.features.nrows() == 0 {
            return Err(Error::Input(format!("dataset `{}` is empty", self.name)));
        }
        if self.num_classes < 2 {
            return Err(Error::Input("need at least 2 classes".into()));
        }
        if self.labels.len() != self.features.nrows() {
            return Err(Error::Dimension {
                expected: self.features.nrows(),
                got: self.labels.len(),
                context: "labels per feature row",
            });
        }
        if let Some(i) = self.labels.iter().position(|&y| y >= self.num_classes) {
            return Err(Error::Input(format!(
                "sample {i} has label {} >= {} classes",
                self.labels[i], self.num_classes
            )));
        }
        if self.features.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input(format!("dataset `{}` has non-finite features", self.name)));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftKind {
    Rotation,
    Translation,
    Both,
}

/// Synthetic benchmark: C isotropic Gaussian clusters with means evenly
/// spaced on a circle in the first two dimensions. The target domain is the
/// same mixture rotated about the origin by `shift_magnitude` radians and/or
/// translated by `shift_magnitude` along the first axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShiftBenchmarkConfig {
    pub num_classes: usize,
    pub dim: usize,
    pub n_source: usize,
    pub n_target: usize,
    /// Radius of the circle of class means.
    pub class_separation: f64,
    pub shift_kind: ShiftKind,
    pub shift_magnitude: f64,
    pub noise_scale: f64,
    pub seed: u64,
}

impl Default for ShiftBenchmarkConfig {
    fn default() -> Self {
        Self {
            num_classes: 3,
            dim: 2,
            n_source: 1200,
            n_target: 1200,
            class_separation: 3.0,
            shift_kind: ShiftKind::Rotation,
            shift_magnitude: 0.9,
            noise_scale: 1.2,
            seed: 0,
        }
    }
}

impl ShiftBenchmarkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::config("num_classes", "must be >= 2"));
        }
        if self.dim < 2 {
            return Err(Error::config("dim", "must be >= 2"));
        }
        for (key, n) in [("n_source", self.n_source), ("n_target", self.n_target)] {
            if n < self.num_classes {
                return Err(Error::config(key, "must be at least the number of classes"));
            }
        }
        for (key, v) in [
            ("class_separation", self.class_separation),
            ("shift_magnitude", self.shift_magnitude),
            ("noise_scale", self.noise_scale),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(key, format!("must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }

    fn class_mean(&self, class: usize) -> (f64, f64) {
        let angle = 2.0 * PI * class as f64 / self.num_classes as f64;
        (
            self.class_separation * angle.cos(),
            self.class_separation * angle.sin(),
        )
    }

    fn draw(&self, n: usize, rng: &mut ChaCha8Rng) -> (Array2<f64>, Vec<usize>) {
        let mut labels: Vec<usize> = (0..n).map(|i| i % self.num_classes).collect();
        labels.shuffle(rng);
        let mut x = Array2::zeros((n, self.dim));
        for (mut row, &y) in x.outer_iter_mut().zip(&labels) {
            let (mx, my) = self.class_mean(y);
            for (j, v) in row.iter_mut().enumerate() {
                let mean = match j {
                    0 => mx,
                    1 => my,
                    _ => 0.0,
                };
                *v = mean + self.noise_scale * rng.sample::<f64, _>(StandardNormal);
            }
        }
        (x, labels)
    }
}

/// Source and target datasets for the configured shift; deterministic in
/// `cfg.seed`.
pub fn gen_shifted_gaussians(cfg: &ShiftBenchmarkConfig) -> Result<(DomainDataset, DomainDataset)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let (xs, ys) = cfg.draw(cfg.n_source, &mut rng);
    rng.set_stream(2);
    rng.set_word_pos(0);
    let (mut xt, yt) = cfg.draw(cfg.n_target, &mut rng);

    let (rotate, translate) = match cfg.shift_kind {
        ShiftKind::Rotation => (cfg.shift_magnitude, 0.0),
        ShiftKind::Translation => (0.0, cfg.shift_magnitude),
        ShiftKind::Both => (cfg.shift_magnitude, cfg.shift_magnitude),
    };
    let (sin, cos) = rotate.sin_cos();
    for mut row in xt.outer_iter_mut() {
        let (a, b) = (row[0], row[1]);
        row[0] = cos * a - sin * b + translate;
        row[1] = sin * a + cos * b;
    }
    let source = DomainDataset::new(xs, ys, cfg.num_classes, DomainTag::Source, "source")?;
    let target = DomainDataset::new(xt, yt, cfg.num_classes, DomainTag::Target, "target")?;
    Ok((source, target))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CsvOptions {
    pub has_header: bool,
}

/// Reads rows of `label,f1,…,fd`.
pub fn load_features_csv(
    path: &Path,
    num_classes: usize,
    domain: DomainTag,
    opts: CsvOptions,
) -> Result<DomainDataset> {
    let parse_err = |row: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        row,
        msg,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(opts.has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| parse_err(0, e.to_string()))?;
    let mut labels = Vec::new();
    let mut values = Vec::new();
    let mut width = None;
    for (i, record) in reader.records().enumerate() {
        let row = i + 1 + usize::from(opts.has_header);
        let record = record.map_err(|e| parse_err(row, e.to_string()))?;
        if record.len() < 2 {
            return Err(parse_err(row, "need a label and at least one feature".into()));
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(parse_err(
                    row,
                    format!("expected {w} fields, found {}", record.len()),
                ))
            }
            _ => {}
        }
        let label: usize = record[0]
            .parse()
            .map_err(|_| parse_err(row, format!("label `{}` is not a class index", &record[0])))?;
        if label >= num_classes {
            return Err(parse_err(
                row,
                format!("label {label} out of range for {num_classes} classes"),
            ));
        }
        labels.push(label);
        for cell in record.iter().skip(1) {
            let v: f64 = cell
                .parse()
                .map_err(|_| parse_err(row, format!("`{cell}` is not a number")))?;
            if !v.is_finite() {
                return Err(parse_err(row, format!("non-finite feature `{cell}`")));
            }
            values.push(v);
        }
    }
    let Some(width) = width else {
        return Err(parse_err(0, "no data rows".into()));
    };
    let features = Array2::from_shape_vec((labels.len(), width - 1), values)
        .expect("row widths checked");
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    DomainDataset::new(features, labels, num_classes, domain, name)
}

/// Writes `label,f1,…,fd` with a header line. Values use shortest
/// round-trip formatting, so reading the file back is lossless.
pub fn write_features_csv<W: Write>(ds: &DomainDataset, mut out: W) -> Result<()> {
    let header: Vec<String> = std::iter::once("label".to_string())
        .chain((1..=ds.dim()).map(|j| format!("f{j}")))
        .collect();
    writeln!(out, "{}", header.join(","))?;
    for (row, &y) in ds.features.outer_iter().zip(&ds.labels) {
        write!(out, "{y}")?;
        for v in row {
            write!(out, ",{v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn save_features_csv(ds: &DomainDataset, path: &Path) -> Result<()> {
    let mut w = std::io::BufWriter::new(File::create(path)?);
    write_features_csv(ds, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Holds the withheld target labels; the only way to read them.
#[derive(Debug, Clone)]
pub struct Oracle {
    labels: Vec<usize>,
}

impl Oracle {
    pub fn query(&self, index: usize) -> Result<usize> {
        self.labels
            .get(index)
            .copied()
            .ok_or_else(|| Error::Input(format!("oracle query for unknown target index {index}")))
    }

    pub fn query_many(&self, indices: &[usize]) -> Result<Vec<usize>> {
        indices.iter().map(|&i| self.query(i)).collect()
    }

    /// Full ground truth, for evaluation metrics only.
    pub fn evaluation_labels(&self) -> &[usize] {
        &self.labels
    }
}

/// Target features without labels.
#[derive(Debug, Clone)]
pub struct TargetPool {
    features: Array2<f64>,
    num_classes: usize,
}

impl TargetPool {
    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.nrows() == 0
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    /// Feature rows for the given target indices, in order.
    pub fn gather(&self, indices: &[usize]) -> Array2<f64> {
        self.features.select(Axis(0), indices)
    }
}

/// Source dataset, label-free target pool and the selection state.
#[derive(Debug, Clone)]
pub struct Pools {
    pub source: DomainDataset,
    pub target: TargetPool,
    pub state: ActiveState,
}

impl Pools {
    /// Features of the currently unlabeled target samples, aligned with
    /// `state.unlabeled()`.
    pub fn unlabeled_features(&self) -> Array2<f64> {
        self.target.gather(self.state.unlabeled())
    }
}

/// Initial pools: 𝒯ˡ = ∅, 𝒯ᵘ = every target index.
pub fn make_pools(source: DomainDataset, target: DomainDataset) -> Result<(Pools, Oracle)> {
    source.validate()?;
    target.validate()?;
    if source.num_classes != target.num_classes {
        return Err(Error::Input(format!(
            "source has {} classes, target {}",
            source.num_classes, target.num_classes
        )));
    }
    if source.dim() != target.dim() {
        return Err(Error::Dimension {
            expected: source.dim(),
            got: target.dim(),
            context: "target feature dimension",
        });
    }
    let state = ActiveState::new(target.len());
    let oracle = Oracle {
        labels: target.labels,
    };
    let pools = Pools {
        source,
        target: TargetPool {
            features: target.features,
            num_classes: target.num_classes,
        },
        state,
    };
    Ok((pools, oracle))
}
