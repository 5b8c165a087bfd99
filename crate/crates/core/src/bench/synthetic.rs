//! Gaussian-mixture datasets with a known cluster per row, and label masking
//! that over-represents one cluster.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeded_rng;
use crate::tabdata::{partition, stratified_allocation, Dataset, FeatureSchema};

const STREAM_SAMPLE: u64 = 20;
const STREAM_BIASED_MASK: u64 = 21;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cluster {
    pub class: usize,
    /// Share of the class's rows drawn from this cluster.
    pub weight: f64,
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
}

impl Cluster {
    fn isotropic(class: usize, weight: f64, mean: Vec<f64>) -> Self {
        let d = mean.len();
        let cov = (0..d)
            .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Cluster {
            class,
            weight,
            mean,
            cov,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_samples: usize,
    pub class_names: Vec<String>,
    pub class_weights: Vec<f64>,
    pub clusters: Vec<Cluster>,
    /// Share of the biased cluster's class labels that must come from that
    /// cluster when masking.
    pub bias: f64,
    pub biased_cluster: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// A red class at the origin and a blue class split into a large cluster
    /// to the right and a smaller one above; labels lean toward the large
    /// blue cluster.
    Overlap,
    /// Two unit-variance blobs far enough apart that the Bayes rule is
    /// above 99% accurate.
    Separated,
}

impl SyntheticSpec {
    pub fn preset(p: Preset) -> Self {
        match p {
            Preset::Overlap => SyntheticSpec {
                n_samples: 2000,
                class_names: vec!["red".into(), "blue".into()],
                class_weights: vec![0.5, 0.5],
                clusters: vec![
                    Cluster::isotropic(0, 1.0, vec![0.0, 0.0]),
                    Cluster::isotropic(1, 0.6, vec![3.5, 0.0]),
                    Cluster::isotropic(1, 0.4, vec![0.5, 3.5]),
                ],
                bias: 0.5,
                biased_cluster: 1,
            },
            Preset::Separated => SyntheticSpec {
                n_samples: 1000,
                class_names: vec!["red".into(), "blue".into()],
                class_weights: vec![0.5, 0.5],
                clusters: vec![
                    Cluster::isotropic(0, 1.0, vec![-2.0, -2.0]),
                    Cluster::isotropic(1, 1.0, vec![2.0, 2.0]),
                ],
                bias: 0.0,
                biased_cluster: 0,
            },
        }
    }

    pub fn n_features(&self) -> usize {
        self.clusters.first().map_or(0, |c| c.mean.len())
    }

    pub fn biased_class(&self) -> usize {
        self.clusters[self.biased_cluster].class
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.class_names.len();
        if k < 2 {
            return Err(Error::argument("synthetic data needs at least two classes"));
        }
        if self.n_samples == 0 {
            return Err(Error::argument("n_samples must be positive"));
        }
        if self.class_weights.len() != k || self.class_weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::argument("need one positive weight per class"));
        }
        if !(0.0..=1.0).contains(&self.bias) {
            return Err(Error::argument(format!("bias must lie in [0, 1], got {}", self.bias)));
        }
        if self.biased_cluster >= self.clusters.len() {
            return Err(Error::argument("biased_cluster is out of range"));
        }
        let d = self.n_features();
        if d == 0 {
            return Err(Error::argument("clusters need at least one dimension"));
        }
        for (i, c) in self.clusters.iter().enumerate() {
            if c.class >= k || !(c.weight > 0.0) {
                return Err(Error::argument(format!("cluster {i} has a bad class or weight")));
            }
            if c.mean.len() != d || c.cov.len() != d || c.cov.iter().any(|r| r.len() != d) {
                return Err(Error::argument(format!("cluster {i} has inconsistent dimensions")));
            }
            cholesky(&c.cov).ok_or_else(|| {
                Error::argument(format!("covariance of cluster {i} is not positive-definite"))
            })?;
        }
        if let Some(c) = (0..k).find(|&c| !self.clusters.iter().any(|cl| cl.class == c)) {
            return Err(Error::argument(format!("class `{}` has no cluster", self.class_names[c])));
        }
        Ok(())
    }
}

/// Synthetic source as written in an experiment config: a preset with
/// overrides, or a fully explicit spec.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub preset: Option<Preset>,
    pub n_samples: Option<usize>,
    pub bias: Option<f64>,
    pub class_names: Option<Vec<String>>,
    pub class_weights: Option<Vec<f64>>,
    pub clusters: Option<Vec<Cluster>>,
    pub biased_cluster: Option<usize>,
    /// Seed of the generator; the experiment seed is used when absent.
    pub seed: Option<u64>,
}

impl SyntheticConfig {
    pub fn from_preset(p: Preset) -> Self {
        SyntheticConfig {
            preset: Some(p),
            ..Default::default()
        }
    }

    pub fn resolve(&self) -> Result<SyntheticSpec> {
        let mut spec = match (self.preset, &self.clusters) {
            (Some(p), _) => SyntheticSpec::preset(p),
            (None, Some(clusters)) => {
                let k = clusters.iter().map(|c| c.class + 1).max().unwrap_or(0);
                SyntheticSpec {
                    n_samples: 1000,
                    class_names: (0..k).map(|c| format!("class{c}")).collect(),
                    class_weights: vec![1.0; k],
                    clusters: clusters.clone(),
                    bias: 0.0,
                    biased_cluster: 0,
                }
            }
            (None, None) => {
                return Err(Error::Config("synthetic data needs a preset or clusters".into()))
            }
        };
        if let Some(c) = &self.clusters {
            spec.clusters = c.clone();
        }
        if let Some(n) = self.n_samples {
            spec.n_samples = n;
        }
        if let Some(b) = self.bias {
            spec.bias = b;
        }
        if let Some(names) = &self.class_names {
            spec.class_names = names.clone();
        }
        if let Some(w) = &self.class_weights {
            spec.class_weights = w.clone();
        }
        if let Some(b) = self.biased_cluster {
            spec.biased_cluster = b;
        }
        Ok(spec)
    }
}

/// Generated rows together with the cluster each row was drawn from.
/// `clusters[i]` belongs to the row with row id `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub spec: SyntheticSpec,
    pub dataset: Dataset,
    pub clusters: Vec<usize>,
}

/// Lower-triangular `L` with `L L^T = a`, or `None` if `a` is not
/// symmetric positive-definite.
pub fn cholesky(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            if (a[i][j] - a[j][i]).abs() > 1e-12 * (1.0 + a[i][j].abs()) {
                return None;
            }
            let s: f64 = (0..j).map(|p| l[i][p] * l[j][p]).sum();
            if i == j {
                let d = a[i][i] - s;
                if !(d > 0.0) {
                    return None;
                }
                l[i][j] = d.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    Some(l)
}

/// Splits `n` into integer parts proportional to `weights` (largest
/// remainder, earlier index wins ties).
fn apportion(weights: &[f64], n: usize) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| w / total * n as f64).collect();
    let mut parts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let short = n - parts.iter().sum::<usize>();
    for &i in order.iter().take(short) {
        parts[i] += 1;
    }
    parts
}

pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<SyntheticData> {
    spec.validate()?;
    let d = spec.n_features();
    let mut rng = seeded_rng(seed, STREAM_SAMPLE);
    let class_counts = apportion(&spec.class_weights, spec.n_samples);
    let mut rows: Vec<(Vec<f64>, usize, usize)> = Vec::with_capacity(spec.n_samples);
    for (class, &n_class) in class_counts.iter().enumerate() {
        let members: Vec<usize> = (0..spec.clusters.len())
            .filter(|&i| spec.clusters[i].class == class)
            .collect();
        let weights: Vec<f64> = members.iter().map(|&i| spec.clusters[i].weight).collect();
        for (&ci, n) in members.iter().zip(apportion(&weights, n_class)) {
            let cl = &spec.clusters[ci];
            let l = cholesky(&cl.cov).expect("validated");
            for _ in 0..n {
                let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                let x = (0..d)
                    .map(|i| cl.mean[i] + (0..=i).map(|j| l[i][j] * z[j]).sum::<f64>())
                    .collect();
                rows.push((x, class, ci));
            }
        }
    }
    rows.shuffle(&mut rng);
    let names: Vec<&str> = spec.class_names.iter().map(String::as_str).collect();
    let schema = FeatureSchema::continuous(d, "label", &names)?;
    let clusters = rows.iter().map(|r| r.2).collect();
    let labels = rows.iter().map(|r| Some(r.1)).collect();
    let x: Vec<Vec<f64>> = rows.into_iter().map(|r| r.0).collect();
    Ok(SyntheticData {
        spec: spec.clone(),
        dataset: Dataset::from_rows(schema, &x, labels)?,
        clusters,
    })
}

impl SyntheticData {
    pub fn cluster_of(&self, row_id: u64) -> usize {
        self.clusters[row_id as usize]
    }

    /// Like [`crate::tabdata::mask_labels`], except that `round(bias * n)` of
    /// the `n` labeled rows of the biased cluster's class are drawn from that
    /// cluster alone. `d` must be a subset of this dataset.
    pub fn mask_labels_biased(&self, d: &Dataset, keep: usize, seed: u64) -> Result<(Dataset, Dataset)> {
        let k = d.n_classes();
        let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); k];
        for i in 0..d.n_rows() {
            if let Some(y) = d.label(i) {
                by_class[y].push(i);
            }
        }
        let counts: Vec<usize> = by_class.iter().map(Vec::len).collect();
        let alloc = stratified_allocation(&counts, keep)?;
        let mut rng = seeded_rng(seed, STREAM_BIASED_MASK);
        let mut chosen = vec![false; d.n_rows()];
        let biased_class = self.spec.biased_class();
        for (c, (rows, &take)) in by_class.iter_mut().zip(&alloc).enumerate() {
            rows.shuffle(&mut rng);
            let mut taken = 0;
            if c == biased_class {
                let want = (self.spec.bias * take as f64).round() as usize;
                for &i in rows.iter() {
                    if taken == want {
                        break;
                    }
                    if self.cluster_of(d.row_ids()[i]) == self.spec.biased_cluster {
                        chosen[i] = true;
                        taken += 1;
                    }
                }
                if taken < want {
                    log::warn!("biased cluster has only {taken} rows, wanted {want}");
                }
            }
            for &i in rows.iter() {
                if taken == take {
                    break;
                }
                if !chosen[i] {
                    chosen[i] = true;
                    taken += 1;
                }
            }
        }
        Ok(partition(d, &chosen))
    }
}
