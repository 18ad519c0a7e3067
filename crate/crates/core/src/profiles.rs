//! Per-operation latency as a function of assigned execution units and
//! work size.
//!
//! Operations do not scale linearly with the number of units they hold: a
//! network kernel reaches ~92% of peak with a third of the device, memory
//! kernels saturate early, dense kernels later. That shape is captured by
//! a one-parameter saturation curve per resource class,
//!
//! ```text
//! efficiency(u) = (1 + alpha) * x / (x + alpha),   x = u / n_units
//! ```
//!
//! which is 0 at zero units, 1 at the full device, strictly increasing and
//! concave for all alpha > 0, and approaches linear as alpha grows.
//! Synthetic curves derive their full-budget base time from the cost
//! model's resource table; externally measured samples can be layered on
//! top and take precedence where they cover the query.

use std::collections::BTreeMap;
use std::path::Path;

use crate::cost::{OpResourceRow, ResourceClass, RowKind};
use crate::error::{Error, Result};
use crate::pipeline::OpKind;
use crate::specs::{HardwareSpec, ModelConfig};

/// Saturation parameters per resource class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaConfig {
    pub compute: f64,
    pub memory: f64,
    pub network: f64,
}

impl AlphaConfig {
    pub fn for_class(&self, class: ResourceClass) -> f64 {
        match class {
            ResourceClass::Compute => self.compute,
            ResourceClass::Memory => self.memory,
            ResourceClass::Network => self.network,
        }
    }
}

impl Default for AlphaConfig {
    fn default() -> Self {
        AlphaConfig {
            compute: 0.5,
            memory: 0.15,
            // Anchored so a network kernel on 35 of 108 units reaches 92%
            // of peak.
            network: alpha_for_anchor(35.0 / 108.0, 0.92),
        }
    }
}

/// Fraction of full-device performance achieved with `units` of `n_units`.
pub fn efficiency(units: u32, n_units: u32, alpha: f64) -> f64 {
    let x = units as f64 / n_units as f64;
    ((1.0 + alpha) * x) / (x + alpha)
}

/// Solves for the alpha that makes `efficiency(x) = eff` at unit fraction
/// `x`. Closed form: `alpha = x (1 - eff) / (eff - x)`, valid for
/// `x < eff < 1`.
pub fn alpha_for_anchor(x: f64, eff: f64) -> f64 {
    x * (1.0 - eff) / (eff - x)
}

/// One measured sample: latency of the operation at a given unit count and
/// work size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplePoint {
    pub units: u32,
    pub work: f64,
    pub latency: f64,
}

/// Latency model for one operation kind.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileCurve {
    pub op_kind: OpKind,
    pub resource_class: ResourceClass,
    pub alpha: f64,
    /// Synthetic full-budget base: latency scales linearly with work
    /// around (`ref_work`, `ref_secs`). Per-layer seconds.
    base: Option<LinearBase>,
    /// Measured samples, kept sorted by (work, units).
    points: Vec<SamplePoint>,
    n_units: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct LinearBase {
    ref_work: f64,
    ref_secs: f64,
    /// Constant launch overhead per op instance per layer.
    overhead: f64,
}

impl ProfileCurve {
    /// A synthetic curve: full-budget latency `ref_secs * work / ref_work`
    /// plus a constant launch overhead.
    pub fn synthetic(
        op_kind: OpKind,
        resource_class: ResourceClass,
        alpha: f64,
        ref_work: f64,
        ref_secs: f64,
        overhead: f64,
        n_units: u32,
    ) -> Self {
        ProfileCurve {
            op_kind,
            resource_class,
            alpha,
            base: Some(LinearBase {
                ref_work,
                ref_secs,
                overhead,
            }),
            points: Vec::new(),
            n_units,
        }
    }

    /// A curve backed only by measured samples.
    pub fn measured(
        op_kind: OpKind,
        resource_class: ResourceClass,
        alpha: f64,
        mut points: Vec<SamplePoint>,
        n_units: u32,
    ) -> Self {
        points.sort_by(|a, b| (a.work, a.units).partial_cmp(&(b.work, b.units)).unwrap());
        ProfileCurve {
            op_kind,
            resource_class,
            alpha,
            base: None,
            points,
            n_units,
        }
    }

    /// Attaches measured samples to this curve; they take precedence over
    /// the synthetic base wherever they cover the query.
    pub fn with_points(mut self, mut points: Vec<SamplePoint>) -> Self {
        points.sort_by(|a, b| (a.work, a.units).partial_cmp(&(b.work, b.units)).unwrap());
        self.points = points;
        self
    }

    pub fn n_units(&self) -> u32 {
        self.n_units
    }

    /// Full-budget latency for the given work.
    pub fn base_time(&self, work: f64) -> f64 {
        match self.base {
            Some(b) => {
                let lin = if b.ref_work > 0.0 {
                    b.ref_secs * work / b.ref_work
                } else {
                    0.0
                };
                lin + b.overhead
            }
            // Fall back to the measured surface at full units.
            None => self
                .interpolate(work, self.n_units)
                .unwrap_or(0.0),
        }
    }

    /// Latency of this operation at the given work size when holding
    /// `units` execution units.
    pub fn eval(&self, work: f64, units: u32) -> Result<f64> {
        if units < 1 || units > self.n_units {
            return Err(Error::Invariant(format!(
                "units {units} out of range 1..={} for {:?}",
                self.n_units, self.op_kind
            )));
        }
        if let Some(v) = self.interpolate(work, units) {
            return Ok(v);
        }
        match self.base {
            Some(_) => Ok(self.base_time(work) / efficiency(units, self.n_units, self.alpha)),
            None => {
                // Measured-only curve queried outside its sample coverage:
                // clamp to the nearest covered point.
                let (cw, cu) = self.clamp_to_coverage(work, units);
                Ok(self.interpolate(cw, cu).unwrap_or(0.0))
            }
        }
    }

    fn works(&self) -> Vec<f64> {
        let mut works: Vec<f64> = Vec::new();
        for p in &self.points {
            if works.last().is_none_or(|w| *w != p.work) {
                works.push(p.work);
            }
        }
        works
    }

    fn clamp_to_coverage(&self, work: f64, units: u32) -> (f64, u32) {
        let works = self.works();
        let w = work.clamp(works[0], *works.last().unwrap());
        let us: Vec<u32> = self.points.iter().map(|p| p.units).collect();
        let lo = *us.iter().min().unwrap();
        let hi = *us.iter().max().unwrap();
        (w, units.clamp(lo, hi))
    }

    /// Bilinear interpolation over the measured samples: piecewise-linear
    /// in units at fixed work, linear in work between sampled works.
    /// Returns None when the query is not covered.
    fn interpolate(&self, work: f64, units: u32) -> Option<f64> {
        if self.points.is_empty() {
            return None;
        }
        let works = self.works();
        let at_work = |w: f64| -> Option<f64> {
            let row: Vec<&SamplePoint> = self.points.iter().filter(|p| p.work == w).collect();
            let lo = row.first()?;
            let hi = row.last()?;
            if units < lo.units || units > hi.units {
                return None;
            }
            if let Some(p) = row.iter().find(|p| p.units == units) {
                return Some(p.latency);
            }
            let right = row.iter().position(|p| p.units > units)?;
            let (a, b) = (row[right - 1], row[right]);
            let t = (units - a.units) as f64 / (b.units - a.units) as f64;
            Some(a.latency + t * (b.latency - a.latency))
        };
        if let Some(&w) = works.iter().find(|w| **w == work) {
            return at_work(w);
        }
        if work < works[0] || work > *works.last().unwrap() {
            return None;
        }
        let right = works.iter().position(|w| *w > work)?;
        let (w0, w1) = (works[right - 1], works[right]);
        let (v0, v1) = (at_work(w0)?, at_work(w1)?);
        let t = (work - w0) / (w1 - w0);
        Some(v0 + t * (v1 - v0))
    }
}

/// Directional cross-class slowdowns applied to an operation while an
/// operation of another class co-runs. Diagonal and missing entries are 1.
#[derive(Debug, Clone, PartialEq)]
pub struct InterferenceMatrix {
    slowdown: BTreeMap<(ResourceClass, ResourceClass), f64>,
}

impl InterferenceMatrix {
    /// No cross-class interference: unit partitioning isolates kernels.
    pub fn identity() -> Self {
        InterferenceMatrix {
            slowdown: BTreeMap::new(),
        }
    }

    /// Unmanaged co-scheduling: compute kernels degrade 2.5x while a
    /// memory-bound kernel shares the device.
    pub fn unmanaged() -> Self {
        let mut m = InterferenceMatrix {
            slowdown: BTreeMap::new(),
        };
        m.set(ResourceClass::Memory, ResourceClass::Compute, 2.5);
        m
    }

    /// Sets the factor applied to `affected`-class ops while a
    /// `running`-class op co-runs.
    pub fn set(&mut self, running: ResourceClass, affected: ResourceClass, factor: f64) {
        assert!(factor >= 1.0, "interference factors must be >= 1");
        self.slowdown.insert((running, affected), factor);
    }

    pub fn factor(&self, running: ResourceClass, affected: ResourceClass) -> f64 {
        if running == affected {
            return 1.0;
        }
        *self.slowdown.get(&(running, affected)).unwrap_or(&1.0)
    }
}

impl Default for InterferenceMatrix {
    fn default() -> Self {
        Self::identity()
    }
}

/// The set of curves a scheduler run needs, keyed by operation kind.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSet {
    curves: BTreeMap<OpKind, ProfileCurve>,
    pub n_units: u32,
}

impl ProfileSet {
    pub fn new(curves: Vec<ProfileCurve>, n_units: u32) -> Self {
        ProfileSet {
            curves: curves.into_iter().map(|c| (c.op_kind, c)).collect(),
            n_units,
        }
    }

    pub fn get(&self, kind: OpKind) -> Result<&ProfileCurve> {
        self.curves
            .get(&kind)
            .ok_or_else(|| Error::Infeasible(format!("no profile curve for op kind {kind}")))
    }

    pub fn curves(&self) -> impl Iterator<Item = &ProfileCurve> {
        self.curves.values()
    }

    /// Overlays measured curves: kinds present in `measured` gain those
    /// sample points (keeping the synthetic base as fallback); kinds not
    /// present keep their synthetic curves.
    pub fn merge_measured(&mut self, measured: Vec<ProfileCurve>) {
        for m in measured {
            match self.curves.get_mut(&m.op_kind) {
                Some(existing) => {
                    existing.points = m.points;
                }
                None => {
                    self.curves.insert(m.op_kind, m);
                }
            }
        }
    }
}

fn row(rows: &[OpResourceRow], kind: RowKind) -> Result<&OpResourceRow> {
    rows.iter()
        .find(|r| r.op == kind)
        .ok_or_else(|| Error::Infeasible(format!("resource table is missing {}", kind.label())))
}

/// Builds synthetic per-layer curves for every pipeline op kind from the
/// iteration resource table.
///
/// Each curve's full-budget time is the row's binding-resource time,
/// divided across layers, scaling linearly with the nano-batch share of
/// the row's work. The communication row is split across the collectives
/// it aggregates: each all-gather carries a quarter of the traffic, the
/// all-reduce half.
pub fn synth_profiles(
    hw: &HardwareSpec,
    model: &ModelConfig,
    rows: &[OpResourceRow],
    alphas: &AlphaConfig,
    launch_overhead: f64,
) -> Result<ProfileSet> {
    let layers = model.n_layers as f64;
    let n_units = hw.n_units;
    let mut curves = Vec::new();
    let mut push = |kind: OpKind, class: ResourceClass, ref_work: f64, ref_secs: f64| {
        curves.push(ProfileCurve::synthetic(
            kind,
            class,
            alphas.for_class(class),
            ref_work,
            ref_secs / layers,
            launch_overhead,
            n_units,
        ));
    };

    let kqv = row(rows, RowKind::GemmKqv)?;
    push(OpKind::Kqv, kqv.bound_by, kqv.work, kqv.t_bound());

    let o = row(rows, RowKind::GemmO)?;
    push(OpKind::OCol, o.bound_by, o.work, o.t_bound());
    push(OpKind::ORow, o.bound_by, o.work, o.t_bound());

    let ug = row(rows, RowKind::GemmUg)?;
    let dn = row(rows, RowKind::GemmD)?;
    let ugd_class = crate::cost::OpResourceRow {
        op: RowKind::GemmUg,
        compute: ug.compute + dn.compute,
        mem_moved: ug.mem_moved + dn.mem_moved,
        net_moved: 0.0,
        t_compute: ug.t_compute + dn.t_compute,
        t_mem: ug.t_mem + dn.t_mem,
        t_net: 0.0,
        bound_by: ug.bound_by,
        work: ug.work,
    };
    let ugd_bound = if ugd_class.t_compute >= ugd_class.t_mem {
        ResourceClass::Compute
    } else {
        ResourceClass::Memory
    };
    push(
        OpKind::Ugd,
        ugd_bound,
        ug.work,
        ug.t_bound() + dn.t_bound(),
    );

    let da = row(rows, RowKind::DecodeAttention)?;
    push(OpKind::DecodeAttn, da.bound_by, da.work, da.t_bound());

    let pf = row(rows, RowKind::PrefillAttention)?;
    push(OpKind::PrefillAttn, pf.bound_by, pf.work, pf.t_bound());

    let comm = row(rows, RowKind::Communication)?;
    push(
        OpKind::AllGather,
        comm.bound_by,
        comm.work,
        comm.t_bound() / 4.0,
    );
    push(
        OpKind::AllReduce,
        comm.bound_by,
        comm.work,
        comm.t_bound() / 2.0,
    );

    Ok(ProfileSet::new(curves, n_units))
}

/// Result of loading a measured-profile CSV.
#[derive(Debug)]
pub struct ProfileLoad {
    pub curves: Vec<ProfileCurve>,
    /// Data-quality notes (e.g. non-monotone latencies); never fatal.
    pub warnings: Vec<String>,
}

/// Loads measured curves from a CSV with header
/// `op_kind,resource_class,units,work,latency_s`. Rows are grouped by op
/// kind; latencies that increase with more units at fixed work produce a
/// warning (real profiles can be noisy) rather than an error.
pub fn load_profiles(path: impl AsRef<Path>, n_units: u32) -> Result<ProfileLoad> {
    let path = path.as_ref();
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_profiles(&text, &path.display().to_string(), n_units)
}

fn parse_profiles(text: &str, origin: &str, n_units: u32) -> Result<ProfileLoad> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    {
        let headers = reader
            .headers()
            .map_err(|e| Error::parse(origin, e.to_string()))?;
        let got: Vec<&str> = headers.iter().collect();
        if got != ["op_kind", "resource_class", "units", "work", "latency_s"] {
            return Err(Error::parse(
                origin,
                format!(
                    "expected header `op_kind,resource_class,units,work,latency_s`, got `{got:?}`"
                ),
            ));
        }
    }
    let mut grouped: BTreeMap<OpKind, (ResourceClass, Vec<SamplePoint>)> = BTreeMap::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::parse(origin, e.to_string()))?;
        let line = i + 2;
        let kind: OpKind = record
            .get(0)
            .unwrap_or("")
            .parse()
            .map_err(|e: String| Error::parse(origin, format!("line {line}: {e}")))?;
        let class = match record.get(1).unwrap_or("") {
            "compute" => ResourceClass::Compute,
            "memory" => ResourceClass::Memory,
            "network" => ResourceClass::Network,
            other => {
                return Err(Error::parse(
                    origin,
                    format!("line {line}: unknown resource_class `{other}`"),
                ))
            }
        };
        let units: u32 = record
            .get(2)
            .unwrap_or("")
            .parse()
            .map_err(|_| Error::parse(origin, format!("line {line}: bad units")))?;
        let work: f64 = record
            .get(3)
            .unwrap_or("")
            .parse()
            .map_err(|_| Error::parse(origin, format!("line {line}: bad work")))?;
        let latency: f64 = record
            .get(4)
            .unwrap_or("")
            .parse()
            .map_err(|_| Error::parse(origin, format!("line {line}: bad latency_s")))?;
        grouped
            .entry(kind)
            .or_insert_with(|| (class, Vec::new()))
            .1
            .push(SamplePoint {
                units,
                work,
                latency,
            });
    }
    if grouped.is_empty() {
        return Err(Error::parse(origin, "no curves".to_string()));
    }
    let alphas = AlphaConfig::default();
    let mut warnings = Vec::new();
    let mut curves = Vec::new();
    for (kind, (class, points)) in grouped {
        let curve = ProfileCurve::measured(kind, class, alphas.for_class(class), points, n_units);
        for w in curve.works() {
            let row: Vec<&SamplePoint> = curve.points.iter().filter(|p| p.work == w).collect();
            for pair in row.windows(2) {
                if pair[1].latency > pair[0].latency {
                    warnings.push(format!(
                        "{kind}: latency rises from {} to {} units at work {w} \
                         ({:.3e}s -> {:.3e}s)",
                        pair[0].units, pair[1].units, pair[0].latency, pair[1].latency
                    ));
                }
            }
        }
        curves.push(curve);
    }
    Ok(ProfileLoad { curves, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::{op_resource_table, BatchComposition};
    use crate::specs::{find_hardware, find_model, WorkloadStats};

    fn reference_set() -> ProfileSet {
        let hw = find_hardware("A100 - 80G").unwrap().with_devices(8);
        let model = find_model("llama-2-70b").unwrap();
        let stats = WorkloadStats::new(512.0, 1024.0);
        let comp = BatchComposition::steady_state(&model, &stats, 2048.0);
        let rows = op_resource_table(&hw, &model, &comp, &stats);
        synth_profiles(&hw, &model, &rows, &AlphaConfig::default(), 0.0).unwrap()
    }

    #[test]
    fn efficiency_endpoints() {
        for alpha in [0.01, 0.15, 0.5, 3.0] {
            assert_eq!(efficiency(0, 108, alpha), 0.0);
            assert!((efficiency(108, 108, alpha) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn efficiency_monotone_and_concave() {
        for alpha in [0.043, 0.15, 0.5, 2.0] {
            let e: Vec<f64> = (0..=108).map(|u| efficiency(u, 108, alpha)).collect();
            for w in e.windows(2) {
                assert!(w[1] > w[0], "not strictly increasing at alpha {alpha}");
            }
            for w in e.windows(3) {
                let d1 = w[1] - w[0];
                let d2 = w[2] - w[1];
                assert!(d2 < d1 + 1e-12, "not concave at alpha {alpha}");
            }
        }
    }

    #[test]
    fn per_unit_throughput_peaks_early() {
        // efficiency(u)/u strictly decreasing on the grid.
        for alpha in [0.043, 0.15, 0.5] {
            let per_unit: Vec<f64> = (1..=108)
                .map(|u| efficiency(u, 108, alpha) / u as f64)
                .collect();
            for w in per_unit.windows(2) {
                assert!(w[1] < w[0]);
            }
        }
    }

    #[test]
    fn network_anchor() {
        let alpha = alpha_for_anchor(35.0 / 108.0, 0.92);
        assert!((alpha - 0.0435).abs() < 5e-4, "{alpha}");
        let eff = efficiency(35, 108, alpha);
        assert!((eff - 0.92).abs() < 1e-12);
    }

    #[test]
    fn full_units_returns_base_exactly() {
        let set = reference_set();
        let c = set.get(OpKind::Kqv).unwrap();
        let base = c.base_time(1000.0);
        assert!((c.eval(1000.0, 108).unwrap() - base).abs() < 1e-15);
    }

    #[test]
    fn anchored_network_latency() {
        let set = reference_set();
        let ag = set.get(OpKind::AllGather).unwrap();
        let base = ag.base_time(2048.0);
        let at_35 = ag.eval(2048.0, 35).unwrap();
        assert!((at_35 - base / 0.92).abs() / (base / 0.92) < 1e-9);
    }

    #[test]
    fn alpha_limit_is_linear() {
        let eff = efficiency(54, 108, 1e9);
        assert!((eff - 0.5).abs() < 1e-8);
    }

    #[test]
    fn synthetic_scales_linearly_with_work() {
        let set = reference_set();
        let o = set.get(OpKind::OCol).unwrap();
        let full = o.base_time(2048.0);
        let half = o.base_time(1024.0);
        assert!((half - 0.5 * full).abs() < 1e-15);
        // Full-iteration time at full batch matches the table row.
        assert!((full * 80.0 - 8.81e-3).abs() < 1e-5);
    }

    #[test]
    fn zero_work_is_overhead_only() {
        let hw = find_hardware("A100 - 80G").unwrap().with_devices(8);
        let model = find_model("llama-2-70b").unwrap();
        let stats = WorkloadStats::new(512.0, 1024.0);
        let comp = BatchComposition::steady_state(&model, &stats, 2048.0);
        let rows = op_resource_table(&hw, &model, &comp, &stats);
        let set = synth_profiles(&hw, &model, &rows, &AlphaConfig::default(), 5e-6).unwrap();
        let c = set.get(OpKind::Kqv).unwrap();
        assert_eq!(c.base_time(0.0), 5e-6);
    }

    #[test]
    fn eval_monotonicity() {
        let set = reference_set();
        for c in set.curves() {
            let mut prev = f64::INFINITY;
            for u in 1..=108 {
                let v = c.eval(2048.0, u).unwrap();
                assert!(v <= prev + 1e-15, "{:?} at {u} units", c.op_kind);
                prev = v;
            }
            let lo = c.eval(512.0, 50).unwrap();
            let hi = c.eval(2048.0, 50).unwrap();
            assert!(hi >= lo);
        }
    }

    #[test]
    fn units_out_of_range() {
        let set = reference_set();
        let c = set.get(OpKind::Kqv).unwrap();
        assert!(c.eval(100.0, 0).is_err());
        assert!(c.eval(100.0, 109).is_err());
    }

    #[test]
    fn measured_points_exact_and_interpolated() {
        let points = vec![
            SamplePoint { units: 10, work: 100.0, latency: 8.0 },
            SamplePoint { units: 20, work: 100.0, latency: 5.0 },
            SamplePoint { units: 40, work: 100.0, latency: 4.0 },
            SamplePoint { units: 10, work: 200.0, latency: 16.0 },
            SamplePoint { units: 20, work: 200.0, latency: 10.0 },
            SamplePoint { units: 40, work: 200.0, latency: 8.0 },
        ];
        let c = ProfileCurve::measured(
            OpKind::Kqv,
            ResourceClass::Compute,
            0.5,
            points,
            108,
        );
        assert_eq!(c.eval(100.0, 20).unwrap(), 5.0);
        assert_eq!(c.eval(100.0, 15).unwrap(), 6.5);
        assert_eq!(c.eval(150.0, 10).unwrap(), 12.0);
        // Outside coverage clamps to the nearest sample.
        assert_eq!(c.eval(100.0, 80).unwrap(), 4.0);
    }

    #[test]
    fn merged_points_override_synthetic() {
        let mut set = reference_set();
        let synthetic = set.get(OpKind::Kqv).unwrap().eval(2048.0, 54).unwrap();
        let measured = ProfileCurve::measured(
            OpKind::Kqv,
            ResourceClass::Compute,
            0.5,
            vec![
                SamplePoint { units: 1, work: 2048.0, latency: 1.0 },
                SamplePoint { units: 108, work: 2048.0, latency: 0.5 },
            ],
            108,
        );
        set.merge_measured(vec![measured]);
        let c = set.get(OpKind::Kqv).unwrap();
        let v = c.eval(2048.0, 54).unwrap();
        assert!(v > 0.5 && v < 1.0 && (v - synthetic).abs() > 1e-9);
        // Other kinds keep their synthetic curves.
        assert!(set.get(OpKind::Ugd).unwrap().eval(2048.0, 108).unwrap() > 0.0);
        // Off the measured work range, the synthetic base still answers.
        let off = c.eval(4096.0, 108).unwrap();
        assert!((off - c.base_time(4096.0)).abs() < 1e-15);
    }

    #[test]
    fn load_profiles_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("prof.csv");
        std::fs::write(
            &path,
            "op_kind,resource_class,units,work,latency_s\n\
             GEMM-KQV,compute,10,100,0.008\n\
             GEMM-KQV,compute,20,100,0.005\n\
             GEMM-KQV,compute,40,100,0.004\n",
        )
        .unwrap();
        let loaded = load_profiles(&path, 108).unwrap();
        assert_eq!(loaded.curves.len(), 1);
        assert_eq!(loaded.curves[0].op_kind, OpKind::Kqv);
        assert_eq!(loaded.curves[0].points.len(), 3);
        assert!(loaded.warnings.is_empty());
    }

    #[test]
    fn load_profiles_empty_is_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("prof.csv");
        std::fs::write(&path, "op_kind,resource_class,units,work,latency_s\n").unwrap();
        match load_profiles(&path, 108) {
            Err(Error::Parse { msg, .. }) => assert!(msg.contains("no curves")),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn load_profiles_warns_on_nonmonotone() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("prof.csv");
        std::fs::write(
            &path,
            "op_kind,resource_class,units,work,latency_s\n\
             AllGather,network,10,100,0.004\n\
             AllGather,network,20,100,0.006\n",
        )
        .unwrap();
        let loaded = load_profiles(&path, 108).unwrap();
        assert_eq!(loaded.warnings.len(), 1);
    }

    #[test]
    fn load_profiles_unknown_kind() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("prof.csv");
        std::fs::write(
            &path,
            "op_kind,resource_class,units,work,latency_s\nWarp,compute,1,1,1\n",
        )
        .unwrap();
        assert!(load_profiles(&path, 108).is_err());
    }

    #[test]
    fn interference_defaults_and_unmanaged() {
        let id = InterferenceMatrix::identity();
        assert_eq!(id.factor(ResourceClass::Memory, ResourceClass::Compute), 1.0);
        let un = InterferenceMatrix::unmanaged();
        assert_eq!(un.factor(ResourceClass::Memory, ResourceClass::Compute), 2.5);
        assert_eq!(un.factor(ResourceClass::Compute, ResourceClass::Memory), 1.0);
        assert_eq!(un.factor(ResourceClass::Compute, ResourceClass::Compute), 1.0);
    }
}
