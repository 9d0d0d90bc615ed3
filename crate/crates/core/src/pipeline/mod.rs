//! End-to-end run: abundance tables in, monoplexes, weights, correlation tables,
//! partitions and graph exports out.
//!
//! Every artifact is computed before anything is written, and files are written
//! in a fixed order, so identical inputs give byte-identical output directories.

mod export;
mod tables;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use export::{
    export_graph, format_float, read_matrix_csv, read_similarity_csv, render_edge_list,
    render_graph, render_graphml, render_matrix_csv, write_text, ExportFormat,
};
pub use tables::{
    align_tables, filter_entities, layer_name, load_abundance_tables, read_abundance_csv,
    AbundanceTable, FilterLog, PartialAbsence,
};

use crate::error::{Error, Result};
use crate::fusion::{FusionMethod, FusionResult};
use crate::matcore::SymMatrix;
use crate::netanalysis::{
    correlation_table, distance_correlation, louvain_communities, CorrelationTable, Partition,
};
use crate::simbuild::{default_sigma, rbf_similarity, FeatureTable, Multiplex, SimilarityLayer};
use crate::sma::{barycenter, layer_weights, BarycenterConfig, Metric, WeightVector, WeightsMode};
use crate::snf::{snf_fuse, Reweight, SnfConfig, StatusNormalization};

/// RBF bandwidth: `"auto"` (per-layer heuristic) or a fixed positive value.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Sigma {
    #[default]
    Auto,
    Fixed(f64),
}

impl std::str::FromStr for Sigma {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(Sigma::Auto);
        }
        s.parse::<f64>()
            .ok()
            .filter(|v| *v > 0.0 && v.is_finite())
            .map(Sigma::Fixed)
            .ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "sigma must be `auto` or a positive number, got `{s}`"
                ))
            })
    }
}

impl Serialize for Sigma {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Sigma::Auto => s.serialize_str("auto"),
            Sigma::Fixed(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for Sigma {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) if v > 0.0 && v.is_finite() => Ok(Sigma::Fixed(v)),
            Raw::Num(v) => Err(serde::de::Error::custom(format!(
                "sigma must be positive, got {v}"
            ))),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SnfSettings {
    /// Neighbourhood size; `None` picks `max(1, round(n / 3))`.
    pub k: Option<usize>,
    pub epsilon: f64,
    pub max_iter: usize,
    pub normalization: StatusNormalization,
    pub reweight: Reweight,
}

impl Default for SnfSettings {
    fn default() -> Self {
        SnfSettings {
            k: None,
            epsilon: 1e-6,
            max_iter: 100,
            normalization: StatusNormalization::Global,
            reweight: Reweight::MaxOffDiagonal,
        }
    }
}

impl SnfSettings {
    pub fn resolve(&self, n: usize) -> SnfConfig {
        let base = SnfConfig::for_size(n);
        SnfConfig {
            k: self.k.unwrap_or(base.k),
            epsilon: self.epsilon,
            max_iter: self.max_iter,
            normalization: self.normalization,
            reweight: self.reweight,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SmaSettings {
    pub tol: f64,
    pub max_iter: usize,
    pub riemannian_jitter: f64,
    pub wasserstein_jitter: f64,
}

impl Default for SmaSettings {
    fn default() -> Self {
        SmaSettings {
            tol: 1e-10,
            max_iter: 1000,
            riemannian_jitter: BarycenterConfig::new(Metric::Riemannian).jitter,
            wasserstein_jitter: BarycenterConfig::new(Metric::Wasserstein).jitter,
        }
    }
}

impl SmaSettings {
    pub fn config(&self, metric: Metric) -> BarycenterConfig {
        BarycenterConfig {
            metric,
            tol: self.tol,
            max_iter: self.max_iter,
            jitter: match metric {
                Metric::Riemannian => self.riemannian_jitter,
                Metric::Wasserstein => self.wasserstein_jitter,
                Metric::Frobenius => 0.0,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClusteringSettings {
    pub resolution: f64,
    pub seed: u64,
}

impl Default for ClusteringSettings {
    fn default() -> Self {
        ClusteringSettings {
            resolution: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExportSettings {
    pub formats: Vec<ExportFormat>,
    pub threshold: f64,
}

impl Default for ExportSettings {
    fn default() -> Self {
        ExportSettings {
            formats: vec![
                ExportFormat::CsvMatrix,
                ExportFormat::EdgeList,
                ExportFormat::Graphml,
            ],
            threshold: 0.0,
        }
    }
}

/// Full run description, usually read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// One abundance CSV per layer; relative paths resolve against the config file.
    pub inputs: Vec<PathBuf>,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub sigma: Sigma,
    #[serde(default = "all_methods")]
    pub methods: Vec<FusionMethod>,
    #[serde(default)]
    pub snf: SnfSettings,
    #[serde(default)]
    pub sma: SmaSettings,
    /// Overrides the per-metric default weights for every barycenter.
    #[serde(default)]
    pub weights: Option<WeightsMode>,
    #[serde(default)]
    pub clustering: ClusteringSettings,
    #[serde(default)]
    pub export: ExportSettings,
    /// Treat non-convergence as an error.
    #[serde(default)]
    pub strict: bool,
}

fn all_methods() -> Vec<FusionMethod> {
    FusionMethod::ALL.to_vec()
}

impl PipelineConfig {
    pub fn new(inputs: Vec<PathBuf>, output_dir: PathBuf) -> Self {
        PipelineConfig {
            inputs,
            output_dir,
            sigma: Sigma::Auto,
            methods: all_methods(),
            snf: SnfSettings::default(),
            sma: SmaSettings::default(),
            weights: None,
            clustering: ClusteringSettings::default(),
            export: ExportSettings::default(),
            strict: false,
        }
    }

    /// Reads a JSON config and resolves relative paths against its directory.
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: PipelineConfig = serde_json::from_str(&text)
            .map_err(|e| Error::parse(path, e.line() as u64, e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in cfg.inputs.iter_mut() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if cfg.output_dir.is_relative() {
            cfg.output_dir = base.join(&cfg.output_dir);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.inputs.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "at least 2 input layers are required, got {}",
                self.inputs.len()
            )));
        }
        if let Some(missing) = self.inputs.iter().find(|p| !p.is_file()) {
            return Err(Error::InvalidInput(format!(
                "input {} does not exist",
                missing.display()
            )));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidInput("no fusion methods requested".into()));
        }
        let mut seen = self.methods.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.methods.len() {
            return Err(Error::InvalidInput("fusion methods must not repeat".into()));
        }
        if !(self.clustering.resolution > 0.0) {
            return Err(Error::InvalidParameter(
                "clustering resolution must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Weights mode used for `metric`.
    pub fn weights_for(&self, metric: Metric) -> WeightsMode {
        self.weights
            .unwrap_or_else(|| WeightsMode::default_for(metric))
    }
}

/// RBF similarity layers from the site profiles of each table.
pub fn build_multiplex(tables: &[AbundanceTable], sigma: Sigma) -> Result<(Multiplex, Vec<f64>)> {
    let mut layers = Vec::with_capacity(tables.len());
    let mut sigmas = Vec::with_capacity(tables.len());
    for t in tables {
        let features = FeatureTable::new(t.entity_ids.clone(), t.values.clone())?;
        let s = match sigma {
            Sigma::Auto => default_sigma(&features),
            Sigma::Fixed(v) => v,
        };
        layers.push(rbf_similarity(&features, s)?);
        sigmas.push(s);
    }
    let names = tables.iter().map(|t| t.layer_name.clone()).collect();
    Ok((Multiplex::new(names, layers)?, sigmas))
}

/// Fuses `multiplex` with one method.
pub fn fuse(
    multiplex: &Multiplex,
    method: FusionMethod,
    snf: &SnfSettings,
    sma: &SmaSettings,
    weights: &WeightVector,
) -> Result<FusionResult> {
    let layers = multiplex.matrices();
    let metric = match method {
        FusionMethod::Snf => return snf_fuse(&layers, &snf.resolve(multiplex.n())),
        FusionMethod::SmaFrobenius => Metric::Frobenius,
        FusionMethod::SmaRiemannian => Metric::Riemannian,
        FusionMethod::SmaWasserstein => Metric::Wasserstein,
    };
    barycenter(&layers, weights, &sma.config(metric))
}

fn metric_of(method: FusionMethod) -> Option<Metric> {
    match method {
        FusionMethod::Snf => None,
        FusionMethod::SmaFrobenius => Some(Metric::Frobenius),
        FusionMethod::SmaRiemannian => Some(Metric::Riemannian),
        FusionMethod::SmaWasserstein => Some(Metric::Wasserstein),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodSummary {
    pub method: FusionMethod,
    pub iterations: usize,
    pub converged: bool,
    pub residual: f64,
    pub weights: Option<Vec<f64>>,
}

impl MethodSummary {
    pub fn from_result(r: &FusionResult) -> Self {
        MethodSummary {
            method: r.method,
            iterations: r.iterations,
            converged: r.converged,
            residual: r.residual,
            weights: r.weights.as_ref().map(|w| w.as_slice().to_vec()),
        }
    }
}

/// Layer weights under one rule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightTable {
    /// `frobenius` or `riemannian-wasserstein`.
    pub name: String,
    pub mode: WeightsMode,
    pub layers: Vec<String>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerCorrelation {
    pub layer: String,
    pub dcor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartitionSummary {
    pub method: FusionMethod,
    pub modularity: f64,
    pub communities: usize,
    pub labels: Vec<String>,
    pub community: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub layers: Vec<String>,
    pub filter: FilterLog,
    pub sigmas: Vec<f64>,
    pub methods: Vec<MethodSummary>,
    pub weights: Vec<WeightTable>,
    pub dcor_monoplex: CorrelationTable,
    /// Distance correlation of the SNF monoplex with each layer, when SNF ran.
    pub dcor_snf_layers: Option<Vec<LayerCorrelation>>,
    pub partitions: Vec<PartitionSummary>,
}

/// Everything a run computes, before anything is written.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    pub multiplex: Multiplex,
    pub monoplexes: Vec<(FusionMethod, SimilarityLayer)>,
    pub partitions: Vec<Partition>,
}

fn stage<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| e.in_stage(name))
}

/// Runs every stage in memory.
pub fn compute(cfg: &PipelineConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let tables = stage("load", load_abundance_tables(&cfg.inputs))?;
    let (tables, filter) = stage("filter", filter_entities(&tables))?;
    let (multiplex, sigmas) = stage("similarity", build_multiplex(&tables, cfg.sigma))?;
    let layers = multiplex.matrices();
    let labels = multiplex.labels().to_vec();

    let weights_f_mode = cfg.weights_for(Metric::Frobenius);
    let weights_rw_mode = cfg.weights_for(Metric::Riemannian);
    let weights_f = stage("weights", layer_weights(&layers, weights_f_mode))?;
    let weights_rw = stage("weights", layer_weights(&layers, weights_rw_mode))?;

    let mut results = Vec::with_capacity(cfg.methods.len());
    for &method in &cfg.methods {
        let w = match metric_of(method) {
            Some(Metric::Frobenius) => &weights_f,
            _ => &weights_rw,
        };
        let r = stage(
            method.as_str(),
            fuse(&multiplex, method, &cfg.snf, &cfg.sma, w),
        )?;
        if cfg.strict && !r.converged {
            return Err(Error::NotConverged {
                method: method.to_string(),
                iterations: r.iterations,
                residual: r.residual,
            }
            .in_stage(method.as_str()));
        }
        results.push(r);
    }

    let monoplexes = results
        .iter()
        .map(|r| {
            Ok((
                r.method,
                stage(r.method.as_str(), r.to_layer(labels.clone()))?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;

    let names: Vec<String> = monoplexes.iter().map(|(m, _)| m.to_string()).collect();
    let networks: Vec<SimilarityLayer> = monoplexes.iter().map(|(_, l)| l.clone()).collect();
    let dcor_monoplex = stage("dcor", correlation_table(&names, &networks))?;
    let dcor_snf_layers = match monoplexes.iter().find(|(m, _)| *m == FusionMethod::Snf) {
        Some((_, snf)) => Some(stage(
            "dcor",
            multiplex
                .names()
                .iter()
                .zip(multiplex.layers())
                .map(|(name, layer)| {
                    Ok(LayerCorrelation {
                        layer: name.clone(),
                        dcor: distance_correlation(snf, layer)?,
                    })
                })
                .collect::<Result<Vec<_>>>(),
        )?),
        None => None,
    };

    let partitions = monoplexes
        .iter()
        .map(|(_, l)| louvain_communities(l, cfg.clustering.resolution, cfg.clustering.seed))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.in_stage("cluster"))?;

    let weight_tables = vec![
        WeightTable {
            name: "frobenius".into(),
            mode: weights_f_mode,
            layers: multiplex.names().to_vec(),
            weights: weights_f.as_slice().to_vec(),
        },
        WeightTable {
            name: "riemannian-wasserstein".into(),
            mode: weights_rw_mode,
            layers: multiplex.names().to_vec(),
            weights: weights_rw.as_slice().to_vec(),
        },
    ];

    let report = RunReport {
        layers: multiplex.names().to_vec(),
        filter,
        sigmas,
        methods: results.iter().map(MethodSummary::from_result).collect(),
        weights: weight_tables,
        dcor_monoplex,
        dcor_snf_layers,
        partitions: monoplexes
            .iter()
            .zip(&partitions)
            .map(|((m, _), p)| PartitionSummary {
                method: *m,
                modularity: p.modularity(),
                communities: p.communities(),
                labels: p.labels().to_vec(),
                community: p.community().to_vec(),
            })
            .collect(),
    };
    Ok(RunOutput {
        report,
        multiplex,
        monoplexes,
        partitions,
    })
}

fn table_csv(header: &[String], rows: &[(String, Vec<f64>)]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for (name, values) in rows {
        out.push_str(name);
        for v in values {
            out.push(',');
            out.push_str(&format_float(*v));
        }
        out.push('\n');
    }
    out
}

/// Serializes the report as pretty JSON.
pub fn report_json(report: &RunReport) -> Result<String> {
    let mut text = serde_json::to_string_pretty(report)
        .map_err(|e| Error::InvalidInput(format!("report serialization failed: {e}")))?;
    text.push('\n');
    Ok(text)
}

/// Renders every artifact as `(file name, contents)` in write order.
pub fn render_artifacts(out: &RunOutput, export: &ExportSettings) -> Result<Vec<(String, String)>> {
    let report = &out.report;
    let mut files = Vec::new();
    files.push(("report.json".to_owned(), report_json(report)?));

    let mut filter = String::from("entity,status,absent_in\n");
    for id in &report.filter.retained {
        filter.push_str(&format!("{id},retained,\n"));
    }
    for id in &report.filter.absent_everywhere {
        filter.push_str(&format!("{id},absent-everywhere,\n"));
    }
    for p in &report.filter.absent_in_some_layer {
        filter.push_str(&format!(
            "{},absent-in-layer,{}\n",
            p.entity,
            p.absent_in.join(";")
        ));
    }
    files.push(("filter_log.csv".to_owned(), filter));

    let mut header = vec!["layer".to_owned()];
    header.extend(report.weights.iter().map(|w| w.name.clone()));
    let rows: Vec<(String, Vec<f64>)> = report
        .layers
        .iter()
        .enumerate()
        .map(|(l, name)| {
            (
                name.clone(),
                report.weights.iter().map(|w| w.weights[l]).collect(),
            )
        })
        .collect();
    files.push(("weights.csv".to_owned(), table_csv(&header, &rows)));

    let t = &report.dcor_monoplex;
    let mut header = vec!["network".to_owned()];
    header.extend(t.names.iter().cloned());
    let rows: Vec<(String, Vec<f64>)> = t
        .names
        .iter()
        .cloned()
        .zip(t.values.iter().cloned())
        .collect();
    files.push(("dcor_monoplex.csv".to_owned(), table_csv(&header, &rows)));

    if let Some(col) = &report.dcor_snf_layers {
        let rows: Vec<(String, Vec<f64>)> = col
            .iter()
            .map(|c| (c.layer.clone(), vec![c.dcor]))
            .collect();
        files.push((
            "dcor_snf_layers.csv".to_owned(),
            table_csv(&["layer".to_owned(), "dcor".to_owned()], &rows),
        ));
    }

    for ((method, layer), partition) in out.monoplexes.iter().zip(&out.partitions) {
        let mut text = String::from("node,community\n");
        for (l, c) in partition.labels().iter().zip(partition.community()) {
            text.push_str(&format!("{l},{c}\n"));
        }
        files.push((format!("{method}.partition.csv"), text));
        for &format in &export.formats {
            files.push((
                format!("{method}.{}", format.extension()),
                render_graph(layer, partition, format, export.threshold)?,
            ));
        }
    }
    Ok(files)
}

/// Computes everything, then writes all artifacts into `cfg.output_dir`.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunReport> {
    let out = compute(cfg)?;
    let files = render_artifacts(&out, &cfg.export)?;
    std::fs::create_dir_all(&cfg.output_dir).map_err(|e| Error::io(&cfg.output_dir, e))?;
    for (name, text) in &files {
        write_text(&cfg.output_dir.join(name), text)?;
    }
    Ok(out.report)
}

/// Writes a labeled matrix in the `csv-matrix` format.
pub fn write_matrix_csv(path: &Path, labels: &[String], m: &SymMatrix) -> Result<()> {
    write_text(path, &render_matrix_csv(labels, m))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigma_parsing() {
        assert_eq!("auto".parse::<Sigma>().unwrap(), Sigma::Auto);
        assert_eq!("2.5".parse::<Sigma>().unwrap(), Sigma::Fixed(2.5));
        assert!("-1".parse::<Sigma>().is_err());
        assert!("x".parse::<Sigma>().is_err());
        let s: Sigma = serde_json::from_str("0.5").unwrap();
        assert_eq!(s, Sigma::Fixed(0.5));
        let s: Sigma = serde_json::from_str("\"auto\"").unwrap();
        assert_eq!(s, Sigma::Auto);
        assert!(serde_json::from_str::<Sigma>("0").is_err());
    }

    #[test]
    fn config_defaults_and_validation() {
        let cfg: PipelineConfig =
            serde_json::from_str(r#"{"inputs": ["a.csv"], "output_dir": "out"}"#).unwrap();
        assert_eq!(cfg.methods, FusionMethod::ALL.to_vec());
        assert_eq!(cfg.sigma, Sigma::Auto);
        assert_eq!(cfg.clustering.seed, 0);
        assert!(matches!(cfg.validate(), Err(Error::InvalidInput(_))));
        assert!(serde_json::from_str::<PipelineConfig>(
            r#"{"inputs": [], "output_dir": "o", "bogus": 1}"#
        )
        .is_err());
        assert_eq!(
            cfg.weights_for(Metric::Frobenius),
            WeightsMode::RvLeadingEigenvector
        );
        assert_eq!(cfg.weights_for(Metric::Wasserstein), WeightsMode::RvRowsum);
    }

    #[test]
    fn snf_settings_resolve_default_k() {
        let s = SnfSettings::default();
        assert_eq!(s.resolve(16).k, 5);
        let s = SnfSettings {
            k: Some(3),
            ..SnfSettings::default()
        };
        assert_eq!(s.resolve(16).k, 3);
    }
}
