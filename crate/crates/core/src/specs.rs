//! Hardware, model, and workload descriptions plus loaders and a built-in
//! catalog.
//!
//! All quantities are held in base units: bytes, seconds, FLOPs, tokens.
//! Spec files are TOML; rates and sizes may be written either as raw
//! numbers in base units or as suffixed strings (`"312 TFLOP/s"`,
//! `"80 GB"`), normalized on load. Trace files are CSV with the header
//! `id,arrival_s,input_len,output_len`.
//!
//! Everything here is immutable after load and safe to share across
//! threads.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units;

/// Per-device hardware capacities for one deployment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardwareSpec {
    pub name: String,
    /// Memory bandwidth per device, bytes/s.
    #[serde(
        deserialize_with = "units::deserialize_quantity",
        serialize_with = "units::serialize_quantity"
    )]
    pub mem_bw: f64,
    /// Memory capacity per device, bytes.
    #[serde(
        deserialize_with = "units::deserialize_quantity",
        serialize_with = "units::serialize_quantity"
    )]
    pub mem_size: f64,
    /// Compute capacity per device for the serving datatype, FLOP/s.
    #[serde(
        deserialize_with = "units::deserialize_quantity",
        serialize_with = "units::serialize_quantity"
    )]
    pub compute: f64,
    /// Interconnect bandwidth per device (bidirectional), bytes/s.
    #[serde(
        deserialize_with = "units::deserialize_quantity",
        serialize_with = "units::serialize_quantity"
    )]
    pub net_bw: f64,
    /// One-way interconnect bandwidth per device, bytes/s. Defaults to
    /// `net_bw / 2`.
    #[serde(
        default,
        deserialize_with = "units::deserialize_quantity_opt",
        serialize_with = "units::serialize_quantity_opt",
        skip_serializing_if = "Option::is_none"
    )]
    pub net_bw_oneway: Option<f64>,
    /// Number of devices acting as one tensor-parallel group.
    pub n_devices: u32,
    /// Schedulable execution units per device (SMs on NVIDIA, CUs on AMD).
    pub n_units: u32,
    /// Aggregate host-offload bandwidth for the deployment (device-to-host
    /// path feeding CPU memory / SSDs), bytes/s.
    #[serde(
        deserialize_with = "units::deserialize_quantity",
        serialize_with = "units::serialize_quantity"
    )]
    pub host_link_bw: f64,
}

impl HardwareSpec {
    /// One-way network bandwidth per device, applying the default.
    pub fn net_bw_oneway(&self) -> f64 {
        self.net_bw_oneway.unwrap_or(self.net_bw / 2.0)
    }

    /// Aggregate compute over all devices, FLOP/s.
    pub fn total_compute(&self) -> f64 {
        self.compute * self.n_devices as f64
    }

    /// Aggregate memory bandwidth over all devices, bytes/s.
    pub fn total_mem_bw(&self) -> f64 {
        self.mem_bw * self.n_devices as f64
    }

    /// Aggregate memory capacity over all devices, bytes.
    pub fn total_mem_size(&self) -> f64 {
        self.mem_size * self.n_devices as f64
    }

    /// Returns a copy scaled out to `n` devices.
    pub fn with_devices(&self, n: u32) -> HardwareSpec {
        HardwareSpec {
            n_devices: n,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("mem_bw", self.mem_bw),
            ("mem_size", self.mem_size),
            ("compute", self.compute),
            ("net_bw", self.net_bw),
            ("host_link_bw", self.host_link_bw),
        ];
        for (field, v) in positive {
            if v <= 0.0 || !v.is_finite() {
                return Err(Error::Invariant(format!(
                    "hardware `{}`: {field} must be strictly positive, got {v}",
                    self.name
                )));
            }
        }
        if let Some(oneway) = self.net_bw_oneway {
            if oneway <= 0.0 {
                return Err(Error::Invariant(format!(
                    "hardware `{}`: net_bw_oneway must be strictly positive",
                    self.name
                )));
            }
            if oneway > self.net_bw {
                return Err(Error::Invariant(format!(
                    "hardware `{}`: net_bw_oneway ({oneway}) exceeds net_bw ({})",
                    self.name, self.net_bw
                )));
            }
        }
        if self.n_devices < 1 {
            return Err(Error::Invariant(format!(
                "hardware `{}`: n_devices must be >= 1",
                self.name
            )));
        }
        if self.n_units < 1 {
            return Err(Error::Invariant(format!(
                "hardware `{}`: n_units must be >= 1",
                self.name
            )));
        }
        Ok(())
    }
}

/// Transformer architecture parameters relevant to the cost model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub name: String,
    /// Hidden dimension.
    pub d_model: u64,
    /// Number of decoder layers.
    pub n_layers: u64,
    /// Total parameter count.
    #[serde(
        deserialize_with = "units::deserialize_quantity",
        serialize_with = "units::serialize_quantity"
    )]
    pub p_model: f64,
    /// Grouped-query attention ratio: query heads per KV head (1 = MHA).
    pub r_gqa: u64,
    /// Bytes per element of the serving datatype.
    pub dtype_bytes: u64,
    /// FFN inner dimension (up/gate output width).
    pub d_intermediate: u64,
    /// Combined output width of the fused K/Q/V projection. Defaults to
    /// `d_model + 2 * d_model / r_gqa`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kqv_out_dim: Option<u64>,
}

impl ModelConfig {
    pub fn kqv_out_dim(&self) -> u64 {
        self.kqv_out_dim
            .unwrap_or(self.d_model + 2 * self.d_model / self.r_gqa)
    }

    /// KV-cache elements stored per token: 2 * d_model * n_layers / r_gqa.
    pub fn kv_elems_per_token(&self) -> f64 {
        2.0 * self.d_model as f64 * self.n_layers as f64 / self.r_gqa as f64
    }

    /// KV-cache bytes stored per token.
    pub fn kv_bytes_per_token(&self) -> f64 {
        self.kv_elems_per_token() * self.dtype_bytes as f64
    }

    /// Bytes needed to hold the weights once across the deployment.
    pub fn weight_bytes(&self) -> f64 {
        self.p_model * self.dtype_bytes as f64
    }

    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("d_model", self.d_model),
            ("n_layers", self.n_layers),
            ("r_gqa", self.r_gqa),
            ("d_intermediate", self.d_intermediate),
        ] {
            if v < 1 {
                return Err(Error::Invariant(format!(
                    "model `{}`: {field} must be >= 1",
                    self.name
                )));
            }
        }
        if !self.d_model.is_multiple_of(self.r_gqa) {
            return Err(Error::Invariant(format!(
                "model `{}`: d_model ({}) must be divisible by r_gqa ({})",
                self.name, self.d_model, self.r_gqa
            )));
        }
        if !matches!(self.dtype_bytes, 1 | 2 | 4) {
            return Err(Error::Invariant(format!(
                "model `{}`: dtype_bytes must be 1, 2, or 4, got {}",
                self.name, self.dtype_bytes
            )));
        }
        if self.p_model <= 0.0 {
            return Err(Error::Invariant(format!(
                "model `{}`: p_model must be positive",
                self.name
            )));
        }
        Ok(())
    }
}

/// Average prompt/decode lengths (tokens) describing a request population.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkloadStats {
    /// Mean prefill (prompt) length, tokens.
    pub p_avg: f64,
    /// Mean decode (output) length, tokens.
    pub d_avg: f64,
    /// Prompt-length standard deviation, used only for trace generation.
    #[serde(default)]
    pub p_std: f64,
    /// Output-length standard deviation, used only for trace generation.
    #[serde(default)]
    pub d_std: f64,
}

impl WorkloadStats {
    pub fn new(p_avg: f64, d_avg: f64) -> Self {
        WorkloadStats {
            p_avg,
            d_avg,
            p_std: 0.0,
            d_std: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p_avg < 0.0 || self.d_avg < 0.0 {
            return Err(Error::Invariant(
                "workload: p_avg and d_avg must be nonnegative".to_string(),
            ));
        }
        if self.p_avg == 0.0 && self.d_avg == 0.0 {
            return Err(Error::Invariant(
                "workload: p_avg and d_avg must not both be zero".to_string(),
            ));
        }
        Ok(())
    }
}

/// One request in a trace. Offline traces use `arrival = 0` throughout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRequest {
    pub id: String,
    /// Arrival time in seconds from trace start.
    pub arrival: f64,
    pub input_len: u64,
    pub output_len: u64,
}

// ---------------------------------------------------------------------------
// Loaders
// ---------------------------------------------------------------------------

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))
}

fn toml_error_to_parse(path: &Path, err: toml::de::Error) -> Error {
    let msg = err.message().to_string();
    // Name the missing field explicitly; serde phrases it as "missing field `x`".
    if let Some(field) = msg
        .strip_prefix("missing field `")
        .and_then(|rest| rest.strip_suffix('`'))
    {
        return Error::MissingField {
            path: path.display().to_string(),
            field: field.to_string(),
        };
    }
    let msg = match err.span() {
        Some(span) => format!("{msg} (at byte offset {})", span.start),
        None => msg,
    };
    Error::parse(path.display().to_string(), msg)
}

/// Loads and validates a hardware spec from a TOML file.
pub fn load_hardware_spec(path: impl AsRef<Path>) -> Result<HardwareSpec> {
    let path = path.as_ref();
    let text = read_file(path)?;
    let hw: HardwareSpec = toml::from_str(&text).map_err(|e| toml_error_to_parse(path, e))?;
    hw.validate()?;
    Ok(hw)
}

/// Loads and validates a model config from a TOML file.
pub fn load_model_config(path: impl AsRef<Path>) -> Result<ModelConfig> {
    let path = path.as_ref();
    let text = read_file(path)?;
    let model: ModelConfig = toml::from_str(&text).map_err(|e| toml_error_to_parse(path, e))?;
    model.validate()?;
    Ok(model)
}

/// Loads and validates workload stats from a TOML file.
pub fn load_workload_stats(path: impl AsRef<Path>) -> Result<WorkloadStats> {
    let path = path.as_ref();
    let text = read_file(path)?;
    let stats: WorkloadStats = toml::from_str(&text).map_err(|e| toml_error_to_parse(path, e))?;
    stats.validate()?;
    Ok(stats)
}

/// Loads a trace CSV (`id,arrival_s,input_len,output_len`, header required).
/// Requests are returned sorted by arrival (stable), ids must be unique.
pub fn load_trace(path: impl AsRef<Path>) -> Result<Vec<TraceRequest>> {
    let path = path.as_ref();
    let text = read_file(path)?;
    parse_trace(&text, &path.display().to_string())
}

fn parse_trace(text: &str, origin: &str) -> Result<Vec<TraceRequest>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    {
        let headers = reader
            .headers()
            .map_err(|e| Error::parse(origin, e.to_string()))?;
        let expected = ["id", "arrival_s", "input_len", "output_len"];
        let got: Vec<&str> = headers.iter().collect();
        if got != expected {
            return Err(Error::parse(
                origin,
                format!("expected header `id,arrival_s,input_len,output_len`, got `{got:?}`"),
            ));
        }
    }
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::parse(origin, e.to_string()))?;
        let line = i + 2;
        let field = |idx: usize| -> Result<&str> {
            record
                .get(idx)
                .ok_or_else(|| Error::parse(origin, format!("line {line}: too few fields")))
        };
        let id = field(0)?.to_string();
        let arrival: f64 = field(1)?
            .parse()
            .map_err(|_| Error::parse(origin, format!("line {line}: bad arrival_s")))?;
        let input_len: i64 = field(2)?
            .parse()
            .map_err(|_| Error::parse(origin, format!("line {line}: bad input_len")))?;
        let output_len: i64 = field(3)?
            .parse()
            .map_err(|_| Error::parse(origin, format!("line {line}: bad output_len")))?;
        if input_len < 1 {
            return Err(Error::Invariant(format!(
                "{origin} line {line}: input_len must be >= 1, got {input_len}"
            )));
        }
        if output_len < 0 {
            return Err(Error::Invariant(format!(
                "{origin} line {line}: output_len must be >= 0, got {output_len}"
            )));
        }
        if arrival < 0.0 || !arrival.is_finite() {
            return Err(Error::Invariant(format!(
                "{origin} line {line}: arrival_s must be finite and >= 0"
            )));
        }
        if !seen.insert(id.clone()) {
            return Err(Error::Invariant(format!(
                "{origin} line {line}: duplicate id `{id}`"
            )));
        }
        out.push(TraceRequest {
            id,
            arrival,
            input_len: input_len as u64,
            output_len: output_len as u64,
        });
    }
    out.sort_by(|a, b| a.arrival.partial_cmp(&b.arrival).unwrap());
    Ok(out)
}

/// Writes a trace in the documented CSV format.
pub fn save_trace(path: impl AsRef<Path>, trace: &[TraceRequest]) -> Result<()> {
    let path = path.as_ref();
    let mut s = String::from("id,arrival_s,input_len,output_len\n");
    for r in trace {
        s.push_str(&format!(
            "{},{},{},{}\n",
            r.id, r.arrival, r.input_len, r.output_len
        ));
    }
    std::fs::write(path, s).map_err(|e| Error::io(path.display().to_string(), e))
}

// ---------------------------------------------------------------------------
// Built-in catalog
// ---------------------------------------------------------------------------

fn hw(
    name: &str,
    compute: f64,
    mem_bw: f64,
    mem_size: f64,
    net_bw: f64,
    n_units: u32,
) -> HardwareSpec {
    HardwareSpec {
        name: name.to_string(),
        mem_bw,
        mem_size,
        compute,
        net_bw,
        net_bw_oneway: None,
        n_devices: 1,
        n_units,
        // Roughly a two-NVMe offload sink; override per deployment.
        host_link_bw: 12e9,
    }
}

/// Built-in hardware entries. Values are public vendor datasheet numbers
/// (dense FP16 compute, HBM bandwidth, NVLink/Infinity interconnect);
/// entries are single-device, scale with [`HardwareSpec::with_devices`].
pub fn hardware_catalog() -> Vec<HardwareSpec> {
    vec![
        hw("V100", 125e12, 900e9, 32e9, 300e9, 80),
        hw("A100 - 40G", 312e12, 1555e9, 40e9, 600e9, 108),
        hw("A100 - 80G", 312e12, 2000e9, 80e9, 600e9, 108),
        hw("H100", 989e12, 3352e9, 80e9, 600e9, 132),
        hw("H200", 989e12, 4800e9, 141e9, 900e9, 132),
        hw("B100", 1800e12, 8000e9, 192e9, 1800e9, 132),
        hw("B200", 2250e12, 8000e9, 192e9, 1800e9, 148),
        hw("MI250", 362e12, 3352e9, 128e9, 800e9, 208),
        hw("MI300", 1307e12, 5300e9, 192e9, 1024e9, 304),
    ]
}

fn model(
    name: &str,
    d_model: u64,
    n_layers: u64,
    p_model: f64,
    r_gqa: u64,
    d_intermediate: u64,
) -> ModelConfig {
    ModelConfig {
        name: name.to_string(),
        d_model,
        n_layers,
        p_model,
        r_gqa,
        dtype_bytes: 2,
        d_intermediate,
        kqv_out_dim: None,
    }
}

/// Built-in model entries. Architecture constants come from the public
/// model configs on Hugging Face; `p_model` is the nominal parameter count.
///
/// * `llama-2-70b`: hidden 8192, 80 layers, 64 query / 8 KV heads,
///   FFN 28672. Nominal 70e9 parameters.
/// * `llama-2-7b`: multi-head attention (r_gqa = 1), FFN 11008.
/// * `llama-3-70b`: same shape as llama-2-70b with a larger vocab.
/// * `llama-3-8b`: hidden 4096, 32 layers, 32/8 heads, FFN 14336. Note the
///   128k vocabulary puts ~13% of parameters in embeddings, so dense-GEMM
///   FLOP totals sit below 2*B*p_model for this entry.
/// * `qwen2-72b`: hidden 8192, 80 layers, 64/8 heads, FFN 29568.
/// * `deepseek-67b`: hidden 8192, 95 layers, 64/8 heads, FFN 22016.
/// * `mixtral-8x7b`: MoE folded to its dense equivalent: all 8 experts'
///   FFN width (8 x 14336) so weight loading, capacity, and the throughput
///   bound treat the full parameter set.
/// * `mistral-7b`: hidden 4096, 32 layers, 32/8 heads, FFN 14336.
pub fn model_catalog() -> Vec<ModelConfig> {
    vec![
        model("llama-2-70b", 8192, 80, 70e9, 8, 28672),
        model("llama-2-7b", 4096, 32, 6.74e9, 1, 11008),
        model("llama-3-70b", 8192, 80, 70.6e9, 8, 28672),
        model("llama-3-8b", 4096, 32, 8.03e9, 4, 14336),
        model("qwen2-72b", 8192, 80, 72.7e9, 8, 29568),
        model("deepseek-67b", 8192, 95, 67e9, 8, 22016),
        model("mixtral-8x7b", 4096, 32, 46.7e9, 4, 8 * 14336),
        model("mistral-7b", 4096, 32, 7.24e9, 4, 14336),
    ]
}

/// Full catalog of (hardware, model) reference entries.
pub fn builtin_catalog() -> (Vec<HardwareSpec>, Vec<ModelConfig>) {
    (hardware_catalog(), model_catalog())
}

fn normalize_name(name: &str) -> String {
    name.chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .collect::<String>()
        .to_ascii_lowercase()
}

/// Case-, space-, and dash-insensitive catalog lookup ("a100-80g" finds
/// "A100 - 80G").
pub fn find_hardware(name: &str) -> Option<HardwareSpec> {
    let want = normalize_name(name);
    hardware_catalog()
        .into_iter()
        .find(|h| normalize_name(&h.name) == want)
}

/// Catalog lookup by normalized model name.
pub fn find_model(name: &str) -> Option<ModelConfig> {
    let want = normalize_name(name);
    model_catalog()
        .into_iter()
        .find(|m| normalize_name(&m.name) == want)
}

/// Named workload statistics for common request-length datasets
/// (mean and standard deviation of input/output token counts).
pub fn find_workload(name: &str) -> Option<WorkloadStats> {
    match normalize_name(name).as_str() {
        "splitwise" => Some(WorkloadStats {
            p_avg: 1155.0,
            d_avg: 211.0,
            p_std: 1109.0,
            d_std: 163.0,
        }),
        "lmsys" | "lmsyschat1m" => Some(WorkloadStats {
            p_avg: 102.0,
            d_avg: 222.0,
            p_std: 169.0,
            d_std: 210.0,
        }),
        "sharegpt" => Some(WorkloadStats {
            p_avg: 246.0,
            d_avg: 322.0,
            p_std: 547.0,
            d_std: 244.0,
        }),
        _ => None,
    }
}
