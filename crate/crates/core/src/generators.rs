//! Synthetic stream generators, drift injection and CSV ingestion.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{rng_for, RngStream, SimRng};
use crate::window::{Class, StreamEvent};

/// Equal-frequency bins used for the mutual-information ranking.
pub const MI_BINS: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum StreamKind {
    /// Gaussian blobs around centroids drawn once per seed.
    Rbf {
        centroids_per_class: usize,
        /// Mean per-axis standard deviation of a blob.
        spread: f64,
    },
    Hyperplane,
    /// STAGGER concept 1, 2 or 3.
    Stagger { concept: u8 },
    Csv { path: String, label_column: String },
}

/// How corrupted feature values are replaced after the drift point.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Corruption {
    /// Label-independent uniform noise over the feature's pre-drift range.
    #[default]
    Noise,
    /// A value of the same feature taken from a uniformly random sample of
    /// the stream; keeps the marginal, destroys the feature/label link.
    Permute,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftSpec {
    /// Fraction of the stream after which corruption starts, in (0, 1).
    pub position: f64,
    /// Samples over which the corruption probability ramps from 0 to 1.
    pub width: usize,
    /// Number of most informative features to corrupt.
    pub n_features: usize,
    #[serde(default)]
    pub corruption: Corruption,
}

impl DriftSpec {
    pub fn new(position: f64, width: usize, n_features: usize) -> Self {
        Self {
            position,
            width,
            n_features,
            corruption: Corruption::default(),
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if !(self.position > 0.0 && self.position < 1.0) {
            return Err(Error::InvalidSpec(format!(
                "drift position {} must lie in (0, 1)",
                self.position
            )));
        }
        if self.width == 0 {
            return Err(Error::InvalidSpec("drift width must be at least 1".into()));
        }
        if self.n_features == 0 || self.n_features > d {
            return Err(Error::InvalidSpec(format!(
                "cannot corrupt {} of {} features",
                self.n_features, d
            )));
        }
        Ok(())
    }

    /// Zero-based index of the first corrupted sample in a stream of `n`.
    pub fn start_index(&self, n: usize) -> usize {
        (self.position * n as f64).floor() as usize
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamSpec {
    pub name: String,
    pub kind: StreamKind,
    pub n: usize,
    pub d: usize,
    pub n_classes: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub drift: Option<DriftSpec>,
}

/// Names accepted by [`StreamSpec::preset`].
pub const PRESETS: [&str; 4] = ["rbf_2_2", "rbf_10_4", "hyperplane", "stagger"];

impl StreamSpec {
    /// Benchmark presets: 4000 samples with an induced drift at half-stream.
    pub fn preset(name: &str) -> Result<Self> {
        let (kind, d, n_classes) = match name.to_ascii_lowercase().as_str() {
            "rbf_2_2" => (
                StreamKind::Rbf {
                    centroids_per_class: 2,
                    spread: 0.1,
                },
                2,
                2,
            ),
            "rbf_10_4" => (
                StreamKind::Rbf {
                    centroids_per_class: 2,
                    spread: 0.1,
                },
                10,
                4,
            ),
            "hyperplane" => (StreamKind::Hyperplane, 2, 2),
            "stagger" => (StreamKind::Stagger { concept: 1 }, 2, 2),
            other => {
                return Err(Error::InvalidSpec(format!(
                    "unknown stream preset '{other}' (expected one of {PRESETS:?})"
                )))
            }
        };
        Ok(Self {
            name: name.to_ascii_lowercase(),
            kind,
            n: 4000,
            d,
            n_classes,
            seed: 0,
            drift: Some(DriftSpec::new(0.5, 100, d.div_ceil(2))),
        })
    }

    pub fn csv(path: impl Into<String>, label_column: impl Into<String>) -> Self {
        let path = path.into();
        let name = Path::new(&path)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "csv".into());
        Self {
            name,
            kind: StreamKind::Csv {
                path,
                label_column: label_column.into(),
            },
            n: 0,
            d: 0,
            n_classes: 0,
            seed: 0,
            drift: None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_drift(mut self, drift: Option<DriftSpec>) -> Self {
        self.drift = drift;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if let StreamKind::Csv { .. } = self.kind {
            return Ok(());
        }
        if self.n == 0 {
            return Err(Error::InvalidSpec("stream length must be positive".into()));
        }
        if self.d == 0 {
            return Err(Error::InvalidSpec("feature dimension must be at least 1".into()));
        }
        if self.n_classes < 2 {
            return Err(Error::InvalidSpec("at least two classes are required".into()));
        }
        match self.kind {
            StreamKind::Rbf {
                centroids_per_class,
                spread,
            } => {
                if centroids_per_class == 0 || !(spread > 0.0) {
                    return Err(Error::InvalidSpec(
                        "rbf needs at least one centroid per class and a positive spread".into(),
                    ));
                }
            }
            StreamKind::Hyperplane => {
                if self.n_classes != 2 {
                    return Err(Error::InvalidSpec("hyperplane streams have two classes".into()));
                }
            }
            StreamKind::Stagger { concept } => {
                if self.d != 2 || self.n_classes != 2 {
                    return Err(Error::InvalidSpec(
                        "stagger streams are encoded with d=2 and two classes".into(),
                    ));
                }
                if !(1..=3).contains(&concept) {
                    return Err(Error::InvalidSpec(format!("unknown stagger concept {concept}")));
                }
            }
            StreamKind::Csv { .. } => unreachable!(),
        }
        if let Some(drift) = &self.drift {
            drift.validate(self.d)?;
        }
        Ok(())
    }

    /// Materializes the stream, applying drift injection if configured.
    pub fn build(&self) -> Result<Stream> {
        self.validate()?;
        let mut stream = match &self.kind {
            StreamKind::Rbf { .. } => gen_rbf(self)?,
            StreamKind::Hyperplane => gen_hyperplane(self)?,
            StreamKind::Stagger { .. } => gen_stagger(self)?,
            StreamKind::Csv { path, label_column } => {
                let mut s = load_csv_stream(path, label_column)?;
                s.name = self.name.clone();
                s
            }
        };
        if let Some(drift) = &self.drift {
            inject_gradual_drift(&mut stream, drift, self.seed)?;
        }
        Ok(stream)
    }
}

/// Where and how a drift was injected.
#[derive(Clone, Debug, PartialEq)]
pub struct InjectedDrift {
    /// Time step of the first corrupted sample.
    pub start_t: u64,
    pub width: usize,
    /// Corrupted features, most informative first.
    pub features: Vec<usize>,
}

/// A fully materialized stream.
#[derive(Clone, Debug, PartialEq)]
pub struct Stream {
    pub name: String,
    pub events: Vec<StreamEvent>,
    pub dim: usize,
    pub n_classes: usize,
    pub drift: Option<InjectedDrift>,
}

impl Stream {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    fn from_samples(name: &str, samples: Vec<(Vec<f64>, Class)>, dim: usize, n_classes: usize) -> Self {
        let events = samples
            .into_iter()
            .enumerate()
            .map(|(i, (x, y))| StreamEvent::new(i as u64 + 1, x, y))
            .collect();
        Self {
            name: name.to_string(),
            events,
            dim,
            n_classes,
            drift: None,
        }
    }
}

fn expect_kind(spec: &StreamSpec, ok: bool, what: &str) -> Result<()> {
    if !ok {
        return Err(Error::InvalidSpec(format!("stream '{}' is not {what}", spec.name)));
    }
    spec.validate()
}

/// Blob centroids for an RBF stream: `(class, centre, std)`.
fn rbf_centroids(spec: &StreamSpec, rng: &mut SimRng) -> Vec<(Class, Vec<f64>, f64)> {
    let StreamKind::Rbf {
        centroids_per_class,
        spread,
    } = spec.kind
    else {
        unreachable!()
    };
    let mut out = Vec::with_capacity(centroids_per_class * spec.n_classes);
    for class in 0..spec.n_classes {
        for _ in 0..centroids_per_class {
            let centre = (0..spec.d).map(|_| rng.random::<f64>()).collect();
            let std = spread * rng.random_range(0.5..1.5);
            out.push((class, centre, std));
        }
    }
    out
}

pub fn gen_rbf(spec: &StreamSpec) -> Result<Stream> {
    expect_kind(spec, matches!(spec.kind, StreamKind::Rbf { .. }), "an rbf stream")?;
    let mut rng = rng_for(spec.seed, RngStream::Generator);
    let centroids = rbf_centroids(spec, &mut rng);
    let per_class: Vec<Vec<&(Class, Vec<f64>, f64)>> = (0..spec.n_classes)
        .map(|c| centroids.iter().filter(|k| k.0 == c).collect())
        .collect();
    let samples = (0..spec.n)
        .map(|_| {
            let y = rng.random_range(0..spec.n_classes);
            let (_, centre, std) = *per_class[y].choose(&mut rng).expect("non-empty class");
            let x = centre
                .iter()
                .map(|c| c + std * rng.sample::<f64, _>(StandardNormal))
                .collect();
            (x, y)
        })
        .collect();
    Ok(Stream::from_samples(&spec.name, samples, spec.d, spec.n_classes))
}

/// Separating hyperplane `normal · x = offset` passing through the centre of
/// the unit cube.
#[derive(Clone, Debug, PartialEq)]
pub struct Hyperplane {
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl Hyperplane {
    pub fn random(d: usize, rng: &mut SimRng) -> Self {
        let normal: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let offset = normal.iter().map(|w| 0.5 * w).sum();
        Self { normal, offset }
    }

    /// Class 1 on the positive side, class 0 otherwise.
    pub fn classify(&self, x: &[f64]) -> Class {
        let s: f64 = self.normal.iter().zip(x).map(|(w, v)| w * v).sum();
        usize::from(s > self.offset)
    }
}

pub fn gen_hyperplane(spec: &StreamSpec) -> Result<Stream> {
    expect_kind(spec, matches!(spec.kind, StreamKind::Hyperplane), "a hyperplane stream")?;
    let mut rng = rng_for(spec.seed, RngStream::Generator);
    let plane = Hyperplane::random(spec.d, &mut rng);
    let samples = (0..spec.n)
        .map(|_| {
            let x: Vec<f64> = (0..spec.d).map(|_| rng.random::<f64>()).collect();
            let y = plane.classify(&x);
            (x, y)
        })
        .collect();
    Ok(Stream::from_samples(&spec.name, samples, spec.d, spec.n_classes))
}

/// STAGGER attributes: size, colour and shape, each with three values.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StaggerObject {
    pub size: u8,
    pub color: u8,
    pub shape: u8,
}

impl StaggerObject {
    pub const SMALL: u8 = 0;
    pub const RED: u8 = 0;
    pub const GREEN: u8 = 1;
    pub const CIRCLE: u8 = 0;

    /// Whether the object belongs to the positive class under `concept`.
    pub fn satisfies(&self, concept: u8) -> bool {
        match concept {
            1 => self.size == Self::SMALL && self.color == Self::RED,
            2 => self.color == Self::GREEN || self.shape == Self::CIRCLE,
            _ => self.size != Self::SMALL,
        }
    }

    /// Two-coordinate encoding: size and colour share the first axis on a
    /// 9-level grid, shape takes the second on a 3-level grid.
    pub fn encode(&self) -> Vec<f64> {
        vec![
            f64::from(self.size * 3 + self.color) / 8.0,
            f64::from(self.shape) / 2.0,
        ]
    }
}

pub fn gen_stagger(spec: &StreamSpec) -> Result<Stream> {
    let StreamKind::Stagger { concept } = spec.kind else {
        return Err(Error::InvalidSpec(format!("stream '{}' is not a stagger stream", spec.name)));
    };
    spec.validate()?;
    let mut rng = rng_for(spec.seed, RngStream::Generator);
    // Classes alternate in expectation: draw the wanted class first, then
    // rejection-sample an object of that class.
    let samples = (0..spec.n)
        .map(|_| {
            let want = rng.random_bool(0.5);
            loop {
                let obj = StaggerObject {
                    size: rng.random_range(0..3),
                    color: rng.random_range(0..3),
                    shape: rng.random_range(0..3),
                };
                if obj.satisfies(concept) == want {
                    return (obj.encode(), usize::from(want));
                }
            }
        })
        .collect();
    Ok(Stream::from_samples(&spec.name, samples, spec.d, spec.n_classes))
}

/// Equal-frequency bin index of every value.
fn quantile_bins(values: &[f64], bins: usize) -> Vec<usize> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let edges: Vec<f64> = (1..bins).map(|q| sorted[(q * n / bins).min(n - 1)]).collect();
    values
        .iter()
        .map(|v| edges.partition_point(|e| e <= v))
        .collect()
}

/// Histogram estimate of the mutual information (nats) between one feature
/// and the labels, using [`MI_BINS`] equal-frequency bins.
pub fn mutual_information(values: &[f64], labels: &[Class], n_classes: usize) -> f64 {
    assert_eq!(values.len(), labels.len());
    if values.is_empty() {
        return 0.0;
    }
    let bins = quantile_bins(values, MI_BINS);
    let mut joint = vec![vec![0.0f64; n_classes]; MI_BINS];
    for (&b, &y) in bins.iter().zip(labels) {
        joint[b][y] += 1.0;
    }
    let n = values.len() as f64;
    let pb: Vec<f64> = joint.iter().map(|r| r.iter().sum::<f64>() / n).collect();
    let py: Vec<f64> = (0..n_classes)
        .map(|c| joint.iter().map(|r| r[c]).sum::<f64>() / n)
        .collect();
    let mut mi = 0.0;
    for (b, row) in joint.iter().enumerate() {
        for (c, &count) in row.iter().enumerate() {
            if count > 0.0 {
                let p = count / n;
                mi += p * (p / (pb[b] * py[c])).ln();
            }
        }
    }
    mi.max(0.0)
}

/// Features ordered from most to least informative on `events`.
pub fn rank_features(events: &[StreamEvent], dim: usize, n_classes: usize) -> Vec<(usize, f64)> {
    let labels: Vec<Class> = events.iter().map(|e| e.y).collect();
    let mut ranked: Vec<(usize, f64)> = (0..dim)
        .map(|f| {
            let col: Vec<f64> = events.iter().map(|e| e.x[f]).collect();
            (f, mutual_information(&col, &labels, n_classes))
        })
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked
}

/// Corrupts the most informative features from `floor(position * n)` on.
///
/// The corruption probability of a sample ramps linearly from `1/width` at the
/// first corrupted sample to 1 after `width` samples. Earlier samples and the
/// remaining features are left untouched.
pub fn inject_gradual_drift(stream: &mut Stream, drift: &DriftSpec, seed: u64) -> Result<InjectedDrift> {
    drift.validate(stream.dim)?;
    let n = stream.len();
    let start = drift.start_index(n);
    if start == 0 || start >= n {
        return Err(Error::InvalidSpec(format!(
            "drift position {} leaves no samples on one side of a stream of {n}",
            drift.position
        )));
    }
    let ranked = rank_features(&stream.events[..start], stream.dim, stream.n_classes);
    let features: Vec<usize> = ranked.iter().take(drift.n_features).map(|r| r.0).collect();

    let columns: Vec<Vec<f64>> = features
        .iter()
        .map(|&f| stream.events[..start].iter().map(|e| e.x[f]).collect())
        .collect();
    let ranges: Vec<(f64, f64)> = columns
        .iter()
        .map(|col| {
            let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            (lo, hi)
        })
        .collect();
    let source: Vec<Vec<f64>> = features
        .iter()
        .map(|&f| stream.events.iter().map(|e| e.x[f]).collect())
        .collect();

    let mut rng = rng_for(seed, RngStream::Drift);
    for i in start..n {
        let strength = ((i - start + 1) as f64 / drift.width as f64).min(1.0);
        if strength < 1.0 && rng.random::<f64>() >= strength {
            continue;
        }
        let x = &mut stream.events[i].x;
        for (k, &f) in features.iter().enumerate() {
            x[f] = match drift.corruption {
                Corruption::Noise => {
                    let (lo, hi) = ranges[k];
                    lo + (hi - lo) * rng.random::<f64>()
                }
                Corruption::Permute => source[k][rng.random_range(0..n)],
            };
        }
    }
    let injected = InjectedDrift {
        start_t: stream.events[start].t,
        width: drift.width,
        features,
    };
    stream.drift = Some(injected.clone());
    Ok(injected)
}

/// Reads a labelled stream from a CSV file with a header row.
///
/// Every column except `label_column` must be numeric; features are z-scored
/// with statistics from a full pass over the file. Labels are mapped to class
/// indices in sorted order of their string values.
pub fn load_csv_stream(path: impl AsRef<Path>, label_column: &str) -> Result<Stream> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => match e.into_kind() {
                csv::ErrorKind::Io(io) => Error::io(path, io),
                _ => unreachable!(),
            },
            _ => Error::Csv(e),
        })?;
    let headers = reader.headers()?.clone();
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::InvalidSpec(format!("label column '{label_column}' not found in {}", path.display())))?;
    let feature_names: Vec<(usize, String)> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != label_idx)
        .map(|(i, h)| (i, h.to_string()))
        .collect();
    if feature_names.is_empty() {
        return Err(Error::InvalidSpec("csv stream needs at least one feature column".into()));
    }

    let mut rows: Vec<(Vec<f64>, String)> = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let row = r + 1;
        let x = feature_names
            .iter()
            .map(|(i, name)| {
                let cell = record.get(*i).unwrap_or("");
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::CsvCell {
                        row,
                        column: name.clone(),
                        message: format!("'{cell}' is not a number"),
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        let label = record.get(label_idx).unwrap_or("").to_string();
        rows.push((x, label));
    }
    if rows.is_empty() {
        return Err(Error::InvalidSpec(format!("{} has no data rows", path.display())));
    }

    let classes: BTreeMap<String, Class> = rows
        .iter()
        .map(|r| r.1.clone())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .enumerate()
        .map(|(i, l)| (l, i))
        .collect();
    let d = feature_names.len();
    let n = rows.len() as f64;
    let mut mean = vec![0.0; d];
    for (x, _) in &rows {
        for (m, v) in mean.iter_mut().zip(x) {
            *m += v / n;
        }
    }
    let mut std = vec![0.0; d];
    for (x, _) in &rows {
        for ((s, v), m) in std.iter_mut().zip(x).zip(&mean) {
            *s += (v - m).powi(2) / n;
        }
    }
    for s in std.iter_mut() {
        *s = if *s > 0.0 { s.sqrt() } else { 1.0 };
    }
    let samples = rows
        .into_iter()
        .map(|(x, label)| {
            let z = x
                .iter()
                .zip(&mean)
                .zip(&std)
                .map(|((v, m), s)| (v - m) / s)
                .collect();
            (z, classes[&label])
        })
        .collect();
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "csv".into());
    Ok(Stream::from_samples(&name, samples, d, classes.len().max(2)))
}

/// Writes a stream as CSV with columns `x0..x{d-1},label`.
pub fn write_csv_stream(stream: &Stream, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    crate::experiment::write_atomically(path, |file| {
        let mut w = csv::Writer::from_writer(file);
        let mut header: Vec<String> = (0..stream.dim).map(|i| format!("x{i}")).collect();
        header.push("label".into());
        w.write_record(&header)?;
        for e in &stream.events {
            let mut rec: Vec<String> = e.x.iter().map(|v| v.to_string()).collect();
            rec.push(e.y.to_string());
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn rbf_presets_have_table_shapes() {
        let s = StreamSpec::preset("rbf_2_2").unwrap().with_drift(None).build().unwrap();
        assert_eq!((s.len(), s.dim, s.n_classes), (4000, 2, 2));
        let s = StreamSpec::preset("RBF_10_4").unwrap().with_drift(None).build().unwrap();
        assert_eq!((s.len(), s.dim, s.n_classes), (4000, 10, 4));
        assert!(s.events.iter().all(|e| e.x.len() == 10 && e.y < 4));
    }

    #[test]
    fn rbf_labels_balanced() {
        for seed in 0..5 {
            let s = StreamSpec::preset("rbf_10_4").unwrap().with_seed(seed).build().unwrap();
            let mut counts = [0usize; 4];
            for e in &s.events {
                counts[e.y] += 1;
            }
            for c in counts {
                let rel = c as f64 / 1000.0;
                assert!((0.9..=1.1).contains(&rel), "class count {c}");
            }
        }
    }

    #[test]
    fn same_seed_same_stream() {
        for name in PRESETS {
            let a = StreamSpec::preset(name).unwrap().with_seed(11).build().unwrap();
            let b = StreamSpec::preset(name).unwrap().with_seed(11).build().unwrap();
            let c = StreamSpec::preset(name).unwrap().with_seed(12).build().unwrap();
            assert_eq!(a, b);
            assert_ne!(a.events, c.events);
        }
    }

    #[test]
    fn timestamps_consecutive_from_one() {
        let s = StreamSpec::preset("stagger").unwrap().build().unwrap();
        assert!(s.events.iter().enumerate().all(|(i, e)| e.t == i as u64 + 1));
    }

    #[test]
    fn hyperplane_preset_and_rule() {
        let s = StreamSpec::preset("hyperplane").unwrap().with_drift(None).build().unwrap();
        assert_eq!((s.len(), s.dim, s.n_classes), (4000, 2, 2));
        let plane = Hyperplane {
            normal: vec![1.0, 1.0],
            offset: 1.0,
        };
        assert_eq!(plane.classify(&[0.9, 0.8]), 1);
        assert_eq!(plane.classify(&[0.1, 0.2]), 0);
        // Labels agree with the generating plane.
        let mut rng = rng_for(0, RngStream::Generator);
        let plane = Hyperplane::random(2, &mut rng);
        let pre = StreamSpec::preset("hyperplane").unwrap().with_drift(None).build().unwrap();
        assert!(pre.events.iter().all(|e| plane.classify(&e.x) == e.y));
    }

    #[test]
    fn stagger_rules() {
        let small_red = StaggerObject { size: 0, color: 0, shape: 2 };
        assert!(small_red.satisfies(1));
        assert!(!StaggerObject { size: 1, color: 0, shape: 2 }.satisfies(1));
        assert!(StaggerObject { size: 1, color: 2, shape: 0 }.satisfies(2));
        assert!(StaggerObject { size: 2, color: 2, shape: 2 }.satisfies(3));
        let s = StreamSpec::preset("stagger").unwrap().with_drift(None).build().unwrap();
        assert_eq!((s.len(), s.dim, s.n_classes), (4000, 2, 2));
        for e in &s.events {
            let sc = (e.x[0] * 8.0).round() as u8;
            let obj = StaggerObject {
                size: sc / 3,
                color: sc % 3,
                shape: (e.x[1] * 2.0).round() as u8,
            };
            assert_eq!(usize::from(obj.satisfies(1)), e.y);
        }
    }

    #[test]
    fn invalid_dims_rejected() {
        let mut spec = StreamSpec::preset("rbf_2_2").unwrap();
        spec.d = 0;
        assert!(gen_rbf(&spec).is_err());
        let mut spec = StreamSpec::preset("stagger").unwrap();
        spec.d = 3;
        assert!(spec.build().is_err());
        let mut spec = StreamSpec::preset("hyperplane").unwrap();
        spec.n_classes = 3;
        assert!(gen_hyperplane(&spec).is_err());
        assert!(gen_rbf(&StreamSpec::preset("stagger").unwrap()).is_err());
    }

    #[test]
    fn drift_starts_at_half_stream() {
        let clean = StreamSpec::preset("rbf_2_2").unwrap().with_seed(3).with_drift(None).build().unwrap();
        let mut drifted = clean.clone();
        let drift = DriftSpec::new(0.5, 1, 1);
        let info = inject_gradual_drift(&mut drifted, &drift, 3).unwrap();
        assert_eq!(drift.start_index(4000), 2000);
        assert_eq!(info.start_t, 2001);
        assert_eq!(clean.events[..2000], drifted.events[..2000]);
        // width 1: every later sample is corrupted on the chosen feature
        let f = info.features[0];
        let changed = (2000..4000)
            .filter(|&i| clean.events[i].x[f] != drifted.events[i].x[f])
            .count();
        assert_eq!(changed, 2000);
        let other = 1 - f;
        assert!((0..4000).all(|i| clean.events[i].x[other] == drifted.events[i].x[other]));
    }

    #[test]
    fn gradual_ramp_corrupts_progressively() {
        let clean = StreamSpec::preset("rbf_2_2").unwrap().with_drift(None).build().unwrap();
        let mut drifted = clean.clone();
        let info = inject_gradual_drift(&mut drifted, &DriftSpec::new(0.5, 1000, 1), 0).unwrap();
        let f = info.features[0];
        let frac = |range: std::ops::Range<usize>| {
            let len = range.len() as f64;
            range.filter(|&i| clean.events[i].x[f] != drifted.events[i].x[f]).count() as f64 / len
        };
        let early = frac(2000..2200);
        let late = frac(2800..3000);
        assert!(early < 0.25 && late > 0.75, "early {early} late {late}");
        assert_eq!(frac(3000..4000), 1.0);
    }

    #[test]
    fn too_many_drift_features_rejected() {
        let mut s = StreamSpec::preset("rbf_2_2").unwrap().with_drift(None).build().unwrap();
        assert!(inject_gradual_drift(&mut s, &DriftSpec::new(0.5, 1, 3), 0).is_err());
    }

    #[test]
    fn corruption_removes_label_information() {
        for corruption in [Corruption::Noise, Corruption::Permute] {
            let mut s = StreamSpec::preset("rbf_2_2").unwrap().with_seed(5).with_drift(None).build().unwrap();
            let drift = DriftSpec {
                corruption,
                ..DriftSpec::new(0.5, 1, 1)
            };
            let info = inject_gradual_drift(&mut s, &drift, 5).unwrap();
            let f = info.features[0];
            let mi = |ev: &[StreamEvent]| {
                let col: Vec<f64> = ev.iter().map(|e| e.x[f]).collect();
                let y: Vec<Class> = ev.iter().map(|e| e.y).collect();
                mutual_information(&col, &y, 2)
            };
            let before = mi(&s.events[..2000]);
            let after = mi(&s.events[2000..]);
            // Bias of a 10x2 plug-in estimate at n=2000 is about 9/(2n).
            assert!(before > 0.1, "pre-drift MI {before}");
            assert!(after < 0.01, "post-drift MI {after} ({corruption:?})");
        }
    }

    fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
        let mut a = a.to_vec();
        let mut b = b.to_vec();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        let (mut i, mut j, mut d) = (0, 0, 0.0f64);
        while i < a.len() && j < b.len() {
            let v = a[i].min(b[j]);
            while i < a.len() && a[i] <= v {
                i += 1;
            }
            while j < b.len() && b[j] <= v {
                j += 1;
            }
            d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
        }
        d
    }

    #[test]
    fn permute_corruption_preserves_marginal() {
        for seed in 0..5 {
            let clean = StreamSpec::preset("rbf_2_2").unwrap().with_seed(seed).with_drift(None).build().unwrap();
            let mut s = clean.clone();
            let drift = DriftSpec {
                corruption: Corruption::Permute,
                ..DriftSpec::new(0.5, 1, 1)
            };
            let f = inject_gradual_drift(&mut s, &drift, seed).unwrap().features[0];
            let before: Vec<f64> = clean.events[2000..].iter().map(|e| e.x[f]).collect();
            let after: Vec<f64> = s.events[2000..].iter().map(|e| e.x[f]).collect();
            assert!(ks_statistic(&before, &after) < 0.1);
        }
    }

    #[test]
    fn mutual_information_basics() {
        let x: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        let y: Vec<Class> = (0..1000).map(|i| usize::from(i >= 500)).collect();
        assert!((mutual_information(&x, &y, 2) - std::f64::consts::LN_2).abs() < 1e-9);
        let y: Vec<Class> = (0..1000).map(|i| i % 2).collect();
        assert!(mutual_information(&x, &y, 2) < 1e-3);
    }

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn csv_three_rows() {
        let f = write_tmp("a,b,class\n1,2,x\n3,4,y\n5,6,x\n");
        let s = load_csv_stream(f.path(), "class").unwrap();
        assert_eq!(s.events.iter().map(|e| e.t).collect::<Vec<_>>(), vec![1, 2, 3]);
        assert_eq!(s.dim, 2);
        assert_eq!(s.events.iter().map(|e| e.y).collect::<Vec<_>>(), vec![0, 1, 0]);
        // z-scored columns
        let col: Vec<f64> = s.events.iter().map(|e| e.x[0]).collect();
        assert!(col.iter().sum::<f64>().abs() < 1e-12);
        assert!((col[2] - 1.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn csv_malformed_cell_names_row_and_column() {
        let f = write_tmp("a,b,class\n1,2,x\n3,oops,y\n");
        match load_csv_stream(f.path(), "class") {
            Err(Error::CsvCell { row, column, .. }) => assert_eq!((row, column.as_str()), (2, "b")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn csv_unknown_label_column_and_missing_file() {
        let f = write_tmp("a,b\n1,2\n");
        assert!(matches!(load_csv_stream(f.path(), "class"), Err(Error::InvalidSpec(_))));
        let err = load_csv_stream("/nonexistent/stream.csv", "class").unwrap_err();
        assert!(err.is_io());
    }

    #[test]
    fn csv_roundtrip_of_generated_stream() {
        let s = StreamSpec::preset("stagger").unwrap().with_seed(2).build().unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("stagger.csv");
        write_csv_stream(&s, &path).unwrap();
        let back = load_csv_stream(&path, "label").unwrap();
        assert_eq!(back.len(), s.len());
        assert!(back.events.iter().zip(&s.events).all(|(a, b)| a.y == b.y));
    }
}
