//! Seeded synthetic flow tables with the class proportions of the public datasets, and a
//! corruption pass that plants the hazards the cleaning stages remove.

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::dataset::{ClassId, ColumnKind, ColumnarTable, FeatureColumn};
use crate::error::{Error, Result};
use crate::ingest::{RawColumn, RawTable, CSE2018_CLASSES, CSE2018_COUNTS, LITNET2020_CLASSES, LITNET2020_COUNTS};

pub const SYNTH_LABEL: &str = "Label";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub n_rows: usize,
    pub class_names: Vec<String>,
    pub class_ratios: Vec<f64>,
    #[serde(default = "default_n_features")]
    pub n_features: usize,
    #[serde(default = "default_separation")]
    pub cluster_separation: f64,
    pub seed: u64,
}

fn default_n_features() -> usize {
    10
}

fn default_separation() -> f64 {
    8.0
}

fn ratios(counts: &[u64]) -> Vec<f64> {
    let total: u64 = counts.iter().sum();
    counts.iter().map(|&c| c as f64 / total as f64).collect()
}

impl SynthSpec {
    pub fn from_counts(n_rows: usize, names: &[&str], counts: &[u64], seed: u64) -> Self {
        Self {
            n_rows,
            class_names: names.iter().map(|s| s.to_string()).collect(),
            class_ratios: ratios(counts),
            n_features: default_n_features(),
            cluster_separation: default_separation(),
            seed,
        }
    }

    pub fn cse2018(n_rows: usize, seed: u64) -> Self {
        Self::from_counts(n_rows, &CSE2018_CLASSES, &CSE2018_COUNTS, seed)
    }

    pub fn litnet2020(n_rows: usize, seed: u64) -> Self {
        Self::from_counts(n_rows, &LITNET2020_CLASSES, &LITNET2020_COUNTS, seed)
    }

    /// `cse2018` or `litnet2020`, optionally prefixed with `synth-`.
    pub fn preset(name: &str, n_rows: usize, seed: u64) -> Result<Self> {
        match name.strip_prefix("synth-").unwrap_or(name) {
            "cse2018" => Ok(Self::cse2018(n_rows, seed)),
            "litnet2020" => Ok(Self::litnet2020(n_rows, seed)),
            _ => Err(Error::UnknownProfile(name.to_string())),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.class_names.len() != self.class_ratios.len() {
            return Err(Error::LengthMismatch {
                left: self.class_names.len(),
                right: self.class_ratios.len(),
            });
        }
        if self.class_ratios.is_empty() {
            return Err(Error::InvalidParameter("no classes".into()));
        }
        if self.class_ratios.iter().any(|&r| !(r >= 0.0 && r.is_finite())) {
            return Err(Error::InvalidParameter("class ratios must be finite and >= 0".into()));
        }
        let sum: f64 = self.class_ratios.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!("class ratios sum to {sum}, not 1")));
        }
        if self.n_features < 2 {
            return Err(Error::InvalidParameter("n_features must be at least 2".into()));
        }
        if !(self.cluster_separation >= 0.0 && self.cluster_separation.is_finite()) {
            return Err(Error::InvalidParameter(
                "cluster_separation must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }

    pub fn feature_names(&self) -> Vec<String> {
        (0..self.n_features).map(|j| format!("feat_{j:02}")).collect()
    }

    /// Cluster centre of class `c`: class `c` sits on axis `c mod d` at
    /// distance `separation * (1 + c div d)` from the origin.
    pub fn center(&self, c: usize) -> Vec<f64> {
        let d = self.n_features;
        let mut v = vec![0.0; d];
        v[c % d] = self.cluster_separation * (1 + c / d) as f64;
        v
    }
}

/// Largest-remainder apportionment of `n_rows` over `ratios`, with at least
/// one row for every class whose ratio is nonzero. Ties in remainder go to
/// the lower class index.
pub fn class_quotas(n_rows: usize, ratios: &[f64], class_names: &[String]) -> Result<Vec<usize>> {
    let exact: Vec<f64> = ratios.iter().map(|&r| r * n_rows as f64).collect();
    let mut quotas: Vec<usize> = exact.iter().map(|&x| x.floor() as usize).collect();
    let assigned: usize = quotas.iter().sum();
    let mut seats = n_rows.saturating_sub(assigned);

    let forced: Vec<usize> = (0..ratios.len())
        .filter(|&c| ratios[c] > 0.0 && quotas[c] == 0)
        .collect();
    if forced.len() > seats {
        // the smallest forced class is the first one that cannot be served
        let c = *forced
            .iter()
            .min_by(|&&a, &&b| ratios[a].total_cmp(&ratios[b]).then(a.cmp(&b)))
            .expect("forced is nonempty");
        return Err(Error::ZeroQuota {
            class: class_names.get(c).cloned().unwrap_or_else(|| c.to_string()),
            n_rows,
        });
    }
    for &c in &forced {
        quotas[c] = 1;
    }
    seats -= forced.len();

    let mut order: Vec<usize> = (0..ratios.len()).filter(|c| !forced.contains(c)).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (exact[a] - exact[a].floor(), exact[b] - exact[b].floor());
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &c in order.iter().take(seats) {
        quotas[c] += 1;
    }
    Ok(quotas)
}

/// Draws each class from a unit-variance isotropic Gaussian around its
/// centre, then shuffles the rows.
pub fn generate_flows(spec: &SynthSpec) -> Result<ColumnarTable> {
    spec.validate()?;
    let quotas = class_quotas(spec.n_rows, &spec.class_ratios, &spec.class_names)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let d = spec.n_features;

    let mut rows: Vec<(Vec<f64>, ClassId)> = Vec::with_capacity(spec.n_rows);
    for (c, &q) in quotas.iter().enumerate() {
        let center = spec.center(c);
        for _ in 0..q {
            let x = center
                .iter()
                .map(|&m| m + rng.sample::<f64, _>(StandardNormal))
                .collect();
            rows.push((x, c as ClassId));
        }
    }
    rows.shuffle(&mut rng);

    let features = spec
        .feature_names()
        .into_iter()
        .enumerate()
        .map(|(j, name)| FeatureColumn::numeric(name, rows.iter().map(|r| r.0[j]).collect::<Vec<_>>()))
        .collect::<Vec<_>>();
    debug_assert_eq!(features.len(), d);
    ColumnarTable::new(
        features,
        SYNTH_LABEL,
        rows.iter().map(|r| r.1).collect::<Vec<ClassId>>(),
        spec.class_names.clone(),
    )
}

/// Raw view of a table: numeric features, label as class-name tokens.
pub fn to_raw(table: &ColumnarTable) -> Result<RawTable> {
    let mut cols: Vec<(String, ColumnKind, RawColumn)> = table
        .feature_schema()
        .iter()
        .zip(table.features())
        .map(|(s, v)| (s.name.clone(), s.kind, RawColumn::Numeric(v.to_vec())))
        .collect();
    let names = table.class_names();
    cols.push((
        table.label_name().to_string(),
        ColumnKind::Label,
        RawColumn::Categorical(table.labels().iter().map(|&y| names[y as usize].clone()).collect()),
    ));
    RawTable::new(cols)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct CorruptionSpec {
    pub dup_rate: f64,
    pub nan_rate: f64,
    pub inf_rate: f64,
    pub n_constant_cols: usize,
    pub seed: u64,
}

impl Default for CorruptionSpec {
    fn default() -> Self {
        Self {
            dup_rate: 0.0,
            nan_rate: 0.0,
            inf_rate: 0.0,
            n_constant_cols: 0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DuplicateEntry {
    /// Original row that was copied.
    pub source: usize,
    /// Row index of the copy in the corrupted table.
    pub row: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PokedCell {
    pub row: usize,
    pub column: String,
    pub value: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorruptionLedger {
    pub duplicates: Vec<DuplicateEntry>,
    pub nan_cells: Vec<PokedCell>,
    pub inf_cells: Vec<PokedCell>,
    pub constant_columns: Vec<String>,
}

impl CorruptionLedger {
    pub fn is_empty(&self) -> bool {
        self.duplicates.is_empty()
            && self.nan_cells.is_empty()
            && self.inf_cells.is_empty()
            && self.constant_columns.is_empty()
    }

    /// Rows carrying a non-finite cell, ascending.
    pub fn invalid_rows(&self) -> Vec<usize> {
        let mut rows: Vec<usize> = self.nan_cells.iter().chain(&self.inf_cells).map(|c| c.row).collect();
        rows.sort_unstable();
        rows.dedup();
        rows
    }
}

/// Appends `floor(dup_rate * n)` copies of distinct rows, writes one NaN
/// into each of `floor(nan_rate * n)` distinct original rows and one
/// infinity into each of `floor(inf_rate * n)` further rows (never a row
/// that was copied), and appends constant columns `const_0, const_1, ...`.
pub fn corrupt(table: &ColumnarTable, spec: &CorruptionSpec) -> Result<(RawTable, CorruptionLedger)> {
    for (name, r) in [
        ("dup_rate", spec.dup_rate),
        ("nan_rate", spec.nan_rate),
        ("inf_rate", spec.inf_rate),
    ] {
        if !(0.0..1.0).contains(&r) {
            return Err(Error::InvalidParameter(format!("{name} must be in [0, 1), got {r}")));
        }
    }
    let n = table.n_rows();
    let d = table.n_features();
    let n_dup = (spec.dup_rate * n as f64).floor() as usize;
    let n_nan = (spec.nan_rate * n as f64).floor() as usize;
    let n_inf = (spec.inf_rate * n as f64).floor() as usize;
    if (n_nan + n_inf > 0) && d == 0 {
        return Err(Error::InvalidParameter("no feature columns to corrupt".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut ledger = CorruptionLedger::default();

    let mut sources = sample(&mut rng, n, n_dup).into_vec();
    sources.sort_unstable();
    let mut is_source = vec![false; n];
    for &s in &sources {
        is_source[s] = true;
    }
    let pool: Vec<usize> = (0..n).filter(|&i| !is_source[i]).collect();
    if n_nan + n_inf > pool.len() {
        return Err(Error::InvalidParameter(format!(
            "{} NaN/inf rows requested but only {} rows are not duplicated",
            n_nan + n_inf,
            pool.len()
        )));
    }
    let picks = sample(&mut rng, pool.len(), n_nan + n_inf).into_vec();
    let (nan_rows, inf_rows) = picks.split_at(n_nan);

    let mut columns: Vec<Vec<f64>> = table
        .features()
        .map(|c| {
            let mut v = c.to_vec();
            v.extend(sources.iter().map(|&s| c[s]));
            v
        })
        .collect();
    let names = table.feature_names();
    for (k, &s) in sources.iter().enumerate() {
        ledger.duplicates.push(DuplicateEntry { source: s, row: n + k });
    }
    let mut poke = |rows: &[usize], value: &dyn Fn(&mut ChaCha8Rng) -> f64, out: &mut Vec<PokedCell>| {
        let mut cells: Vec<PokedCell> = rows
            .iter()
            .map(|&p| {
                let row = pool[p];
                let j = rng.random_range(0..d);
                let v = value(&mut rng);
                columns[j][row] = v;
                PokedCell {
                    row,
                    column: names[j].to_string(),
                    value: v,
                }
            })
            .collect();
        cells.sort_by_key(|c| c.row);
        out.extend(cells);
    };
    poke(nan_rows, &|_| f64::NAN, &mut ledger.nan_cells);
    poke(
        inf_rows,
        &|r| {
            if r.random::<bool>() {
                f64::INFINITY
            } else {
                f64::NEG_INFINITY
            }
        },
        &mut ledger.inf_cells,
    );

    let total = n + n_dup;
    let mut raw: Vec<(String, ColumnKind, RawColumn)> = table
        .feature_schema()
        .iter()
        .zip(columns)
        .map(|(s, v)| (s.name.clone(), s.kind, RawColumn::Numeric(v)))
        .collect();
    for k in 0..spec.n_constant_cols {
        let mut name = format!("const_{k}");
        while raw.iter().any(|c| c.0 == name) || name == table.label_name() {
            name.push('_');
        }
        ledger.constant_columns.push(name.clone());
        raw.push((name, ColumnKind::Numeric, RawColumn::Numeric(vec![1.0; total])));
    }
    let class_names = table.class_names();
    let labels = table.labels();
    raw.push((
        table.label_name().to_string(),
        ColumnKind::Label,
        RawColumn::Categorical(
            (0..n)
                .chain(sources.iter().copied())
                .map(|i| class_names[labels[i] as usize].clone())
                .collect(),
        ),
    ));
    Ok((RawTable::new(raw)?, ledger))
}
