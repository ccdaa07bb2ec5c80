//! Low-rank adapter arithmetic and the per-specialty adapter fleet.
//!
//! A [`LayerDelta`] holds factors `B` (d×r) and `A` (r×k) plus a scale; merging
//! adds `scale · B·A` to a d×k base weight, unmerging subtracts it again, so
//! one resident base model can be re-specialized without a reload.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::Read;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CorpusError, SubSpecialty};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AdapterError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("rank {rank} invalid for a {d}x{k} layer")]
    InvalidRank { rank: usize, d: usize, k: usize },
    #[error("scale must be finite, got {0}")]
    NonFiniteScale(f64),
    #[error("layer `{0}` appears twice in one adapter")]
    DuplicateLayer(String),
    #[error("an adapter for {0} is already registered")]
    DuplicateSpecialty(SubSpecialty),
    #[error("no adapter registered for {0}")]
    UnknownSpecialty(SubSpecialty),
    #[error("model size is zero")]
    ZeroSizeModel,
    #[error("memory budget must be positive")]
    InvalidBudget,
    #[error("manifest: {0}")]
    Manifest(String),
}

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, AdapterError> {
        if data.len() != rows * cols {
            return Err(AdapterError::ShapeMismatch(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Panics on ragged rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Matrix {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        }
    }

    /// Entries drawn uniformly from `[-bound, bound]`.
    pub fn random(rows: usize, cols: usize, bound: f64, rng: &mut impl Rng) -> Self {
        let data = (0..rows * cols)
            .map(|_| rng.random_range(-bound..=bound))
            .collect();
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Low-rank update for one named layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerDelta {
    pub name: String,
    /// r×k
    pub a: Matrix,
    /// d×r
    pub b: Matrix,
    pub scale: f64,
}

impl LayerDelta {
    pub fn new(
        name: impl Into<String>,
        a: Matrix,
        b: Matrix,
        scale: f64,
    ) -> Result<Self, AdapterError> {
        let delta = LayerDelta {
            name: name.into(),
            a,
            b,
            scale,
        };
        delta.validate()?;
        Ok(delta)
    }

    pub fn validate(&self) -> Result<(), AdapterError> {
        let (r, k) = self.a.shape();
        let (d, rb) = self.b.shape();
        if r != rb {
            return Err(AdapterError::ShapeMismatch(format!(
                "A is {r}x{k} but B is {d}x{rb}"
            )));
        }
        if r == 0 || r > d.min(k) {
            return Err(AdapterError::InvalidRank { rank: r, d, k });
        }
        if !self.scale.is_finite() {
            return Err(AdapterError::NonFiniteScale(self.scale));
        }
        Ok(())
    }

    pub fn rank(&self) -> usize {
        self.a.rows()
    }

    /// (d, k) of the layer this delta updates.
    pub fn target_shape(&self) -> (usize, usize) {
        (self.b.rows(), self.a.cols())
    }

    pub fn param_count(&self) -> usize {
        let (d, k) = self.target_shape();
        d * self.rank() + self.rank() * k
    }

    pub fn with_scale(&self, scale: f64) -> Self {
        LayerDelta {
            scale,
            ..self.clone()
        }
    }

    fn check_target(&self, m: &Matrix) -> Result<(), AdapterError> {
        self.validate()?;
        if m.shape() != self.target_shape() {
            let (d, k) = self.target_shape();
            return Err(AdapterError::ShapeMismatch(format!(
                "layer `{}` expects {d}x{k}, got {}x{}",
                self.name,
                m.rows(),
                m.cols()
            )));
        }
        Ok(())
    }

    /// `weight += sign · scale · B·A` without materializing B·A.
    fn apply(&self, weight: &mut Matrix, sign: f64) -> Result<(), AdapterError> {
        self.check_target(weight)?;
        let (d, k) = self.target_shape();
        let r = self.rank();
        let factor = sign * self.scale;
        if factor == 0.0 {
            return Ok(());
        }
        for i in 0..d {
            let b_row = &self.b.data[i * r..(i + 1) * r];
            let w_row = &mut weight.data[i * k..(i + 1) * k];
            for (j, w) in w_row.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (t, b) in b_row.iter().enumerate() {
                    acc += b * self.a.data[t * k + j];
                }
                *w += factor * acc;
            }
        }
        Ok(())
    }

    pub fn merge_into(&self, weight: &mut Matrix) -> Result<(), AdapterError> {
        self.apply(weight, 1.0)
    }

    pub fn unmerge_from(&self, weight: &mut Matrix) -> Result<(), AdapterError> {
        self.apply(weight, -1.0)
    }
}

/// `base + scale · B·A`.
pub fn lora_merge(base: &Matrix, delta: &LayerDelta) -> Result<Matrix, AdapterError> {
    let mut out = base.clone();
    delta.merge_into(&mut out)?;
    Ok(out)
}

/// `merged − scale · B·A`.
pub fn lora_unmerge(merged: &Matrix, delta: &LayerDelta) -> Result<Matrix, AdapterError> {
    let mut out = merged.clone();
    delta.unmerge_from(&mut out)?;
    Ok(out)
}

/// One specialty's adapter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdapterSpec {
    pub specialty: SubSpecialty,
    pub deltas: Vec<LayerDelta>,
    pub bytes_per_param: f64,
}

impl AdapterSpec {
    pub fn new(
        specialty: SubSpecialty,
        deltas: Vec<LayerDelta>,
        bytes_per_param: f64,
    ) -> Result<Self, AdapterError> {
        let mut names = BTreeSet::new();
        for d in &deltas {
            d.validate()?;
            if !names.insert(d.name.as_str()) {
                return Err(AdapterError::DuplicateLayer(d.name.clone()));
            }
        }
        Ok(AdapterSpec {
            specialty,
            deltas,
            bytes_per_param,
        })
    }

    pub fn param_count(&self) -> usize {
        self.deltas.iter().map(LayerDelta::param_count).sum()
    }

    /// Σ (d·r + r·k) × bytes_per_param.
    pub fn weight_bytes(&self) -> f64 {
        self.param_count() as f64 * self.bytes_per_param
    }

    /// Size of the dense layers this adapter touches, at the same precision.
    pub fn dense_bytes(&self) -> f64 {
        self.deltas
            .iter()
            .map(|d| {
                let (rows, cols) = d.target_shape();
                (rows * cols) as f64
            })
            .sum::<f64>()
            * self.bytes_per_param
    }

    /// Merges every layer into `weights`; fails before touching anything if a
    /// layer is missing or misshapen.
    pub fn merge_into(&self, weights: &mut BTreeMap<String, Matrix>) -> Result<(), AdapterError> {
        self.check_weights(weights)?;
        for d in &self.deltas {
            d.merge_into(weights.get_mut(&d.name).expect("checked"))?;
        }
        Ok(())
    }

    pub fn unmerge_from(&self, weights: &mut BTreeMap<String, Matrix>) -> Result<(), AdapterError> {
        self.check_weights(weights)?;
        for d in &self.deltas {
            d.unmerge_from(weights.get_mut(&d.name).expect("checked"))?;
        }
        Ok(())
    }

    fn check_weights(&self, weights: &BTreeMap<String, Matrix>) -> Result<(), AdapterError> {
        for d in &self.deltas {
            let w = weights.get(&d.name).ok_or_else(|| {
                AdapterError::ShapeMismatch(format!("base has no layer `{}`", d.name))
            })?;
            d.check_target(w)?;
        }
        Ok(())
    }
}

/// Full model size description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub param_count: u64,
    pub bytes_per_param: f64,
    #[serde(default)]
    pub layers: BTreeMap<String, (usize, usize)>,
}

pub const DEFAULT_BYTES_PER_PARAM: f64 = 1.0;

impl ModelSpec {
    pub fn new(param_count: u64, bytes_per_param: f64) -> Self {
        ModelSpec {
            param_count,
            bytes_per_param,
            layers: BTreeMap::new(),
        }
    }

    pub fn with_layer(mut self, name: &str, d: usize, k: usize) -> Self {
        self.layers.insert(name.to_string(), (d, k));
        self
    }
}

pub fn estimate_memory(model: &ModelSpec) -> f64 {
    model.param_count as f64 * model.bytes_per_param
}

/// Whole models that fit in `budget_bytes`.
pub fn capacity(budget_bytes: f64, model: &ModelSpec) -> Result<u64, AdapterError> {
    if budget_bytes.is_nan() || budget_bytes <= 0.0 {
        return Err(AdapterError::InvalidBudget);
    }
    let size = estimate_memory(model);
    if size.is_nan() || size <= 0.0 {
        return Err(AdapterError::ZeroSizeModel);
    }
    Ok((budget_bytes / size).floor() as u64)
}

/// At most one adapter per specialty. Fill it, then share it read-only.
#[derive(Debug, Clone, Default)]
pub struct AdapterRegistry {
    slots: [Option<AdapterSpec>; SubSpecialty::COUNT],
}

impl AdapterRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, adapter: AdapterSpec) -> Result<(), AdapterError> {
        let slot = &mut self.slots[adapter.specialty.index()];
        if slot.is_some() {
            return Err(AdapterError::DuplicateSpecialty(adapter.specialty));
        }
        *slot = Some(adapter);
        Ok(())
    }

    pub fn lookup(&self, specialty: SubSpecialty) -> Result<&AdapterSpec, AdapterError> {
        self.slots[specialty.index()]
            .as_ref()
            .ok_or(AdapterError::UnknownSpecialty(specialty))
    }

    pub fn contains(&self, specialty: SubSpecialty) -> bool {
        self.slots[specialty.index()].is_some()
    }

    pub fn len(&self) -> usize {
        self.slots.iter().flatten().count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_full(&self) -> bool {
        self.len() == SubSpecialty::COUNT
    }

    pub fn adapters(&self) -> impl Iterator<Item = &AdapterSpec> {
        self.slots.iter().flatten()
    }

    pub fn specialties(&self) -> BTreeSet<SubSpecialty> {
        self.adapters().map(|a| a.specialty).collect()
    }
}

/// One manifest line: a single layer of one specialty's adapter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestLayer {
    pub specialty: SubSpecialty,
    pub layer: String,
    pub d: usize,
    pub k: usize,
    pub r: usize,
    pub scale: f64,
    #[serde(default = "default_bpp")]
    pub bytes_per_param: f64,
    /// A, r×k row-major
    pub a: Vec<f64>,
    /// B, d×r row-major
    pub b: Vec<f64>,
}

fn default_bpp() -> f64 {
    DEFAULT_BYTES_PER_PARAM
}

/// Flattens adapters into manifest lines (specialty order, then layer order).
pub fn to_manifest(adapters: &[AdapterSpec]) -> Vec<ManifestLayer> {
    adapters
        .iter()
        .flat_map(|ad| {
            ad.deltas.iter().map(move |delta| {
                let (d, k) = delta.target_shape();
                ManifestLayer {
                    specialty: ad.specialty,
                    layer: delta.name.clone(),
                    d,
                    k,
                    r: delta.rank(),
                    scale: delta.scale,
                    bytes_per_param: ad.bytes_per_param,
                    a: delta.a.as_slice().to_vec(),
                    b: delta.b.as_slice().to_vec(),
                }
            })
        })
        .collect()
}

/// Groups manifest lines back into adapters, validating every shape header.
pub fn from_manifest(lines: Vec<ManifestLayer>) -> Result<Vec<AdapterSpec>, AdapterError> {
    let mut grouped: BTreeMap<SubSpecialty, (f64, Vec<LayerDelta>)> = BTreeMap::new();
    for line in lines {
        let a = Matrix::from_vec(line.r, line.k, line.a).map_err(|e| {
            AdapterError::Manifest(format!("{} {}: A {e}", line.specialty, line.layer))
        })?;
        let b = Matrix::from_vec(line.d, line.r, line.b).map_err(|e| {
            AdapterError::Manifest(format!("{} {}: B {e}", line.specialty, line.layer))
        })?;
        let entry = grouped
            .entry(line.specialty)
            .or_insert((line.bytes_per_param, Vec::new()));
        entry.1.push(LayerDelta::new(line.layer, a, b, line.scale)?);
    }
    grouped
        .into_iter()
        .map(|(spec, (bpp, deltas))| AdapterSpec::new(spec, deltas, bpp))
        .collect()
}

pub fn read_manifest<R: Read>(source: R) -> Result<Vec<AdapterSpec>, AdapterError> {
    let lines = crate::corpus::read_jsonl::<ManifestLayer, _>(source)
        .map_err(|e: CorpusError| AdapterError::Manifest(e.to_string()))?;
    from_manifest(lines)
}

/// Random adapter over the given `(name, d, k)` layers, `scale = alpha / rank`.
pub fn synthetic_adapter(
    specialty: SubSpecialty,
    layers: &[(String, usize, usize)],
    rank: usize,
    alpha: f64,
    bytes_per_param: f64,
    seed: u64,
) -> Result<AdapterSpec, AdapterError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((specialty.index() as u64 + 1) << 32));
    let deltas = layers
        .iter()
        .map(|(name, d, k)| {
            let a = Matrix::random(rank, *k, 0.05, &mut rng);
            let b = Matrix::random(*d, rank, 0.05, &mut rng);
            LayerDelta::new(name.clone(), a, b, alpha / rank as f64)
        })
        .collect::<Result<Vec<_>, _>>()?;
    AdapterSpec::new(specialty, deltas, bytes_per_param)
}

/// One adapter per specialty over the model's layer map.
pub fn synthetic_fleet(
    model: &ModelSpec,
    rank: usize,
    seed: u64,
) -> Result<AdapterRegistry, AdapterError> {
    let layers: Vec<(String, usize, usize)> = model
        .layers
        .iter()
        .map(|(n, &(d, k))| (n.clone(), d, k))
        .collect();
    let mut registry = AdapterRegistry::new();
    for spec in SubSpecialty::ALL_CODES {
        registry.register(synthetic_adapter(
            spec,
            &layers,
            rank,
            2.0 * rank as f64,
            model.bytes_per_param,
            seed,
        )?)?;
    }
    Ok(registry)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FleetRow {
    pub specialty: SubSpecialty,
    pub layers: usize,
    pub max_rank: usize,
    pub adapter_bytes: f64,
    /// adapter bytes / full model bytes
    pub fraction_of_model: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FleetReport {
    pub model_bytes: f64,
    pub budget_bytes: f64,
    pub full_model_capacity: u64,
    /// Base model plus every adapter resident at once.
    pub base_plus_all_adapters_bytes: f64,
    pub rows: Vec<FleetRow>,
}

pub fn fleet_report(
    model: &ModelSpec,
    registry: &AdapterRegistry,
    budget_bytes: f64,
) -> Result<FleetReport, AdapterError> {
    let model_bytes = estimate_memory(model);
    let full_model_capacity = capacity(budget_bytes, model)?;
    let rows: Vec<FleetRow> = registry
        .adapters()
        .map(|a| FleetRow {
            specialty: a.specialty,
            layers: a.deltas.len(),
            max_rank: a.deltas.iter().map(LayerDelta::rank).max().unwrap_or(0),
            adapter_bytes: a.weight_bytes(),
            fraction_of_model: a.weight_bytes() / model_bytes,
        })
        .collect();
    Ok(FleetReport {
        model_bytes,
        budget_bytes,
        full_model_capacity,
        base_plus_all_adapters_bytes: model_bytes
            + rows.iter().map(|r| r.adapter_bytes).sum::<f64>(),
        rows,
    })
}

impl FleetReport {
    /// Plain-text table.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<9} {:>6} {:>5} {:>16} {:>14}",
            "specialty", "layers", "rank", "adapter_bytes", "of_model"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<9} {:>6} {:>5} {:>16.0} {:>13.6}%",
                r.specialty.code(),
                r.layers,
                r.max_rank,
                r.adapter_bytes,
                r.fraction_of_model * 100.0
            );
        }
        let _ = writeln!(
            s,
            "model_bytes={:.0} budget_bytes={:.0} full_model_capacity={}",
            self.model_bytes, self.budget_bytes, self.full_model_capacity
        );
        let _ = writeln!(
            s,
            "base_plus_all_adapters_bytes={:.0}",
            self.base_plus_all_adapters_bytes
        );
        s
    }
}
