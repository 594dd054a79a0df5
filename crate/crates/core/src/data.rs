//! Speed datasets: CSV ingestion, missing-value imputation, normalization,
//! sliding-window pairing, chronological splitting, and a synthetic
//! congestion-wave generator for desk-scale experiments.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::{Duration, NaiveDate, NaiveDateTime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{write_file, Edge, NodeSpeeds, TrafficGraph};
use crate::matrix::DenseMatrix;
use crate::scalar::Scalar;

const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

/// Normalization constants recorded at training time so predictions can be
/// mapped back to mph. Speeds are divided by the train-split maximum, which
/// keeps zero speed meaningful and puts the data in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormRecord<F> {
    pub max_speed: F,
}

impl<F: Scalar> NormRecord<F> {
    pub fn normalize_value(&self, mph: F) -> F {
        mph / self.max_speed
    }

    pub fn denormalize_value(&self, v: F) -> F {
        v * self.max_speed
    }

    pub fn denormalize(&self, values: &[F]) -> Vec<F> {
        values.iter().map(|&v| self.denormalize_value(v)).collect()
    }
}

/// Time-indexed speed matrix (rows = timestamps at a fixed interval,
/// columns = nodes in graph order). Missing measurements are NaN until
/// [`impute_missing`] runs.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedDataset<F> {
    speeds: DenseMatrix<F>,
    timestamps: Vec<NaiveDateTime>,
    step: Duration,
    node_ids: Vec<String>,
    norm: Option<NormRecord<F>>,
}

impl<F: Scalar> SpeedDataset<F> {
    fn new(
        speeds: DenseMatrix<F>,
        timestamps: Vec<NaiveDateTime>,
        step: Duration,
        node_ids: Vec<String>,
    ) -> Self {
        SpeedDataset {
            speeds,
            timestamps,
            step,
            node_ids,
            norm: None,
        }
    }

    pub fn rows(&self) -> usize {
        self.speeds.rows()
    }

    pub fn node_count(&self) -> usize {
        self.speeds.cols()
    }

    pub fn node_ids(&self) -> &[String] {
        &self.node_ids
    }

    pub fn timestamps(&self) -> &[NaiveDateTime] {
        &self.timestamps
    }

    pub fn step(&self) -> Duration {
        self.step
    }

    pub fn speeds(&self) -> &DenseMatrix<F> {
        &self.speeds
    }

    pub fn row(&self, t: usize) -> &[F] {
        self.speeds.row(t)
    }

    /// Normalization record, present once [`normalize`] has run.
    pub fn norm(&self) -> Option<&NormRecord<F>> {
        self.norm.as_ref()
    }

    pub fn missing_count(&self) -> usize {
        self.speeds.as_slice().iter().filter(|v| v.is_nan()).count()
    }

    /// Copies the `len` rows starting at `start` into a fresh window matrix.
    pub fn window_input(&self, start: usize, len: usize) -> DenseMatrix<F> {
        DenseMatrix::from_fn(len, self.node_count(), |t, j| self.speeds.get(start + t, j))
    }

    /// The row immediately after the window: the forecasting target.
    pub fn window_target(&self, start: usize, len: usize) -> &[F] {
        self.speeds.row(start + len)
    }
}

/// How missing measurements are filled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImputePolicy {
    /// Per node: carry the last observation forward, then fill any leading
    /// gap backward from the first observation.
    ForwardFillThenBackfill,
    /// Per node: replace every gap with the node's mean observed speed.
    NodeMean,
}

/// Loads the speed CSV (`timestamp,<id1>,<id2>,...` header, ISO-8601
/// timestamps, mph values, empty cell = missing) and remaps columns into
/// graph index order.
pub fn load_speed_csv<F: Scalar>(path: &Path, node_ids: &[String]) -> Result<SpeedDataset<F>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Data(format!("{}: empty file", path.display())))?;
    let header_fields: Vec<&str> = header.split(',').map(str::trim).collect();
    if header_fields.len() < 2 {
        return Err(Error::Data(format!("{}: header needs a timestamp column and node columns", path.display())));
    }
    let csv_ids = &header_fields[1..];

    let wanted: HashMap<&str, usize> = node_ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    // every CSV column must be a known node
    let mut column_to_node = Vec::with_capacity(csv_ids.len());
    for id in csv_ids {
        match wanted.get(id) {
            Some(&node) => column_to_node.push(node),
            None => {
                return Err(Error::Data(format!(
                    "{}: column '{id}' is absent from the node-id file",
                    path.display()
                )))
            }
        }
    }
    // and every node must have a column
    let mut node_to_column = vec![usize::MAX; node_ids.len()];
    for (col, &node) in column_to_node.iter().enumerate() {
        if node_to_column[node] != usize::MAX {
            return Err(Error::Data(format!(
                "{}: duplicate column for node id '{}'",
                path.display(),
                node_ids[node]
            )));
        }
        node_to_column[node] = col;
    }
    if let Some(node) = node_to_column.iter().position(|&c| c == usize::MAX) {
        return Err(Error::Data(format!(
            "{}: no column for node id '{}'",
            path.display(),
            node_ids[node]
        )));
    }

    let mut timestamps = Vec::new();
    let mut values: Vec<F> = Vec::new();
    for (lineno, line) in lines {
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != header_fields.len() {
            return Err(Error::Data(format!(
                "{}:{}: ragged row ({} fields, header has {})",
                path.display(),
                lineno + 1,
                fields.len(),
                header_fields.len()
            )));
        }
        let stamp = NaiveDateTime::parse_from_str(fields[0].trim(), TIMESTAMP_FORMAT).map_err(|_| {
            Error::Data(format!(
                "{}:{}: bad timestamp '{}'",
                path.display(),
                lineno + 1,
                fields[0].trim()
            ))
        })?;
        timestamps.push(stamp);
        for &node in node_to_column.iter() {
            let raw = fields[1 + node].trim();
            if raw.is_empty() {
                values.push(F::nan());
            } else {
                let v: f64 = raw.parse().map_err(|_| {
                    Error::Data(format!(
                        "{}:{}: non-numeric speed '{raw}'",
                        path.display(),
                        lineno + 1
                    ))
                })?;
                values.push(F::c(v));
            }
        }
    }
    if timestamps.len() < 2 {
        return Err(Error::Data(format!(
            "{}: need at least two data rows",
            path.display()
        )));
    }

    let step = validate_timestamps(&timestamps, path)?;
    let rows = timestamps.len();
    let cols = node_ids.len();
    let speeds = dense_from_raw(rows, cols, values);
    Ok(SpeedDataset::new(speeds, timestamps, step, node_ids.to_vec()))
}

/// Builds a matrix without the finite check (ingested data may hold NaN for
/// missing cells until imputation runs).
fn dense_from_raw<F: Scalar>(rows: usize, cols: usize, values: Vec<F>) -> DenseMatrix<F> {
    let mut m = DenseMatrix::zeros(rows, cols);
    m.as_mut_slice().copy_from_slice(&values);
    m
}

fn validate_timestamps(timestamps: &[NaiveDateTime], path: &Path) -> Result<Duration> {
    let step = timestamps[1] - timestamps[0];
    if step <= Duration::zero() {
        return Err(Error::Data(format!(
            "{}: timestamps must be strictly increasing",
            path.display()
        )));
    }
    let mut gaps = Vec::new();
    for w in timestamps.windows(2) {
        let d = w[1] - w[0];
        if d == step {
            continue;
        }
        if d <= Duration::zero() {
            return Err(Error::Data(format!(
                "{}: timestamps must be strictly increasing around {}",
                path.display(),
                w[1]
            )));
        }
        let millis = d.num_milliseconds();
        let step_millis = step.num_milliseconds();
        if millis % step_millis == 0 {
            gaps.push(format!(
                "{} .. {}",
                (w[0] + step).format(TIMESTAMP_FORMAT),
                (w[1] - step).format(TIMESTAMP_FORMAT)
            ));
        } else {
            return Err(Error::Data(format!(
                "{}: irregular timestamp interval between {} and {}",
                path.display(),
                w[0],
                w[1]
            )));
        }
    }
    if !gaps.is_empty() {
        return Err(Error::Data(format!(
            "{}: missing timestamp ranges: {}",
            path.display(),
            gaps.join(", ")
        )));
    }
    Ok(step)
}

/// Fills missing cells according to `policy`. Returns the imputed dataset
/// and how many cells were filled. A node with no observations at all is an
/// error.
pub fn impute_missing<F: Scalar>(
    dataset: &SpeedDataset<F>,
    policy: ImputePolicy,
) -> Result<(SpeedDataset<F>, usize)> {
    let rows = dataset.rows();
    let cols = dataset.node_count();
    let mut speeds = dataset.speeds.clone();
    let mut filled = 0;
    for j in 0..cols {
        let observed: Vec<F> = (0..rows)
            .map(|t| speeds.get(t, j))
            .filter(|v| !v.is_nan())
            .collect();
        if observed.is_empty() {
            return Err(Error::Data(format!(
                "node '{}' has no observed values to impute from",
                dataset.node_ids[j]
            )));
        }
        match policy {
            ImputePolicy::ForwardFillThenBackfill => {
                let mut last: Option<F> = None;
                for t in 0..rows {
                    let v = speeds.get(t, j);
                    if v.is_nan() {
                        if let Some(prev) = last {
                            speeds.set(t, j, prev);
                            filled += 1;
                        }
                    } else {
                        last = Some(v);
                    }
                }
                // leading gap: backfill from the first observation
                let mut next: Option<F> = None;
                for t in (0..rows).rev() {
                    let v = speeds.get(t, j);
                    if v.is_nan() {
                        let fill = next.expect("column has at least one observation");
                        speeds.set(t, j, fill);
                        filled += 1;
                    } else {
                        next = Some(v);
                    }
                }
            }
            ImputePolicy::NodeMean => {
                let count = F::from_usize(observed.len()).expect("count fits scalar");
                let mean = observed.iter().copied().sum::<F>() / count;
                for t in 0..rows {
                    if speeds.get(t, j).is_nan() {
                        speeds.set(t, j, mean);
                        filled += 1;
                    }
                }
            }
        }
    }
    let mut out = dataset.clone();
    out.speeds = speeds;
    Ok((out, filled))
}

/// Scales all speeds by the maximum over the first `train_rows` rows only,
/// so the held-out splits leak nothing into the constant. Fails on a
/// nonpositive maximum or remaining NaN cells.
pub fn normalize<F: Scalar>(
    dataset: &SpeedDataset<F>,
    train_rows: usize,
) -> Result<(SpeedDataset<F>, NormRecord<F>)> {
    if train_rows == 0 || train_rows > dataset.rows() {
        return Err(Error::InvalidArgument(format!(
            "train split of {train_rows} rows out of {}",
            dataset.rows()
        )));
    }
    if dataset.missing_count() > 0 {
        return Err(Error::Data("normalize requires an imputed dataset (NaN present)".into()));
    }
    let mut max = F::zero();
    for t in 0..train_rows {
        for &v in dataset.speeds.row(t) {
            max = max.max(v);
        }
    }
    if max <= F::zero() {
        return Err(Error::Data("train split maximum speed is zero".into()));
    }
    let record = NormRecord { max_speed: max };
    let normalized = apply_norm(dataset, &record);
    Ok((normalized, record))
}

/// Applies an existing normalization record (evaluation against a trained
/// checkpoint reuses the training-time constant).
pub fn apply_norm<F: Scalar>(dataset: &SpeedDataset<F>, record: &NormRecord<F>) -> SpeedDataset<F> {
    let mut out = dataset.clone();
    for v in out.speeds.as_mut_slice() {
        *v = record.normalize_value(*v);
    }
    out.norm = Some(*record);
    out
}

/// Chronological split row ranges plus the window start rows inside each
/// split. Windows never straddle a split boundary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitWindows {
    pub window_len: usize,
    pub train_rows: std::ops::Range<usize>,
    pub val_rows: std::ops::Range<usize>,
    pub test_rows: std::ops::Range<usize>,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Window start rows inside the half-open row range `[start, end)`: each
/// window takes `len` input rows plus one target row.
pub fn windows_in_range(start: usize, end: usize, len: usize) -> Vec<usize> {
    if end - start < len + 1 {
        return Vec::new();
    }
    (start..end - len).collect()
}

/// Splits the rows chronologically by `fractions` (train/validation/test,
/// nonnegative, summing to one) and enumerates the windows of each split.
/// A split with a positive fraction but fewer than `window_len + 1` rows is
/// an error.
pub fn make_windows<F: Scalar>(
    dataset: &SpeedDataset<F>,
    window_len: usize,
    fractions: [f64; 3],
) -> Result<SplitWindows> {
    if window_len == 0 {
        return Err(Error::InvalidArgument("window length must be >= 1".into()));
    }
    if fractions.iter().any(|&f| f < 0.0) || fractions[0] <= 0.0 {
        return Err(Error::InvalidArgument(
            "split fractions must be nonnegative with a positive train share".into(),
        ));
    }
    let sum: f64 = fractions.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("split fractions sum to {sum}, expected 1")));
    }
    let rows = dataset.rows();
    let r1 = (rows as f64 * fractions[0]).floor() as usize;
    let r2 = (rows as f64 * (fractions[0] + fractions[1])).floor() as usize;
    let ranges = [(0, r1), (r1, r2), (r2, rows)];
    let names = ["train", "validation", "test"];
    let mut windows = Vec::new();
    for (idx, &(a, b)) in ranges.iter().enumerate() {
        if fractions[idx] > 0.0 && b - a < window_len + 1 {
            return Err(Error::Data(format!(
                "{} split has {} rows, needs at least {} for windows of length {window_len}",
                names[idx],
                b - a,
                window_len + 1
            )));
        }
        windows.push(windows_in_range(a, b, window_len));
    }
    let mut it = windows.into_iter();
    Ok(SplitWindows {
        window_len,
        train_rows: ranges[0].0..ranges[0].1,
        val_rows: ranges[1].0..ranges[1].1,
        test_rows: ranges[2].0..ranges[2].1,
        train: it.next().unwrap(),
        val: it.next().unwrap(),
        test: it.next().unwrap(),
    })
}

/// Synthetic network shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Topology {
    Ring,
    Path,
    Grid,
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Topology::Ring => "ring",
            Topology::Path => "path",
            Topology::Grid => "grid",
        })
    }
}

impl FromStr for Topology {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ring" => Ok(Topology::Ring),
            "path" => Ok(Topology::Path),
            "grid" => Ok(Topology::Grid),
            other => Err(Error::InvalidArgument(format!(
                "unknown topology '{other}' (expected ring, path, or grid)"
            ))),
        }
    }
}

/// Synthetic generator settings. The defaults produce occasional congestion
/// events that propagate one hop upstream per time step and decay, plus a
/// bounded uniform observation noise.
#[derive(Debug, Clone)]
pub struct SyntheticConfig {
    pub nodes: usize,
    pub topology: Topology,
    pub steps: usize,
    pub seed: u64,
    /// Probability per time step of one new congestion event somewhere.
    pub event_rate: f64,
    /// Observation noise bound in mph (uniform in [-b, +b]).
    pub noise_mph: f64,
    /// Deterministic extra events `(step, node, severity in [0, 0.9])`;
    /// useful for tracing the propagation rule.
    pub scripted_events: Vec<(usize, usize, f64)>,
}

impl SyntheticConfig {
    pub fn new(nodes: usize, topology: Topology, steps: usize, seed: u64) -> Self {
        SyntheticConfig {
            nodes,
            topology,
            steps,
            seed,
            event_rate: 0.02,
            noise_mph: 1.0,
            scripted_events: Vec::new(),
        }
    }
}

const FREE_FLOW_MPH: f64 = 60.0;
const EDGE_MILES: f64 = 1.0;
const STEP_MINUTES: i64 = 5;
/// Congestion decays by this factor per step (partial recovery).
const RECOVERY: f64 = 0.6;
/// Fraction of a node's congestion that reaches its upstream neighbor on
/// the next step.
const PROPAGATION: f64 = 0.7;
const MAX_SEVERITY: f64 = 0.9;

fn grid_dims(nodes: usize) -> (usize, usize) {
    let rows = (nodes as f64).sqrt().floor() as usize;
    let rows = rows.max(1);
    let cols = nodes.div_ceil(rows);
    (rows, cols)
}

/// Builds the synthetic network: 1-mile edges, 60 mph free flow.
pub fn build_topology<F: Scalar>(nodes: usize, topology: Topology) -> Result<TrafficGraph<F>> {
    if nodes < 3 {
        return Err(Error::InvalidArgument("synthetic networks need at least 3 nodes".into()));
    }
    let mut edges = Vec::new();
    let mut push = |a: usize, b: usize| {
        edges.push(Edge {
            a,
            b,
            length_miles: F::c(EDGE_MILES),
        })
    };
    match topology {
        Topology::Ring => {
            for i in 0..nodes {
                push(i, (i + 1) % nodes);
            }
        }
        Topology::Path => {
            for i in 0..nodes - 1 {
                push(i, i + 1);
            }
        }
        Topology::Grid => {
            let (_, cols) = grid_dims(nodes);
            for i in 0..nodes {
                if (i + 1) % cols != 0 && i + 1 < nodes {
                    push(i, i + 1);
                }
                if i + cols < nodes {
                    push(i, i + cols);
                }
            }
        }
    }
    TrafficGraph::new(nodes, edges, NodeSpeeds::Uniform(F::c(FREE_FLOW_MPH)))
}

/// The node whose congestion flows into `v` one step later (its downstream
/// neighbor along the direction of travel), if that edge exists.
fn downstream_of(topology: Topology, v: usize, nodes: usize) -> Option<usize> {
    match topology {
        Topology::Ring => Some((v + 1) % nodes),
        Topology::Path => (v + 1 < nodes).then_some(v + 1),
        Topology::Grid => {
            let (_, cols) = grid_dims(nodes);
            (!(v + 1).is_multiple_of(cols) && v + 1 < nodes).then_some(v + 1)
        }
    }
}

/// Synthetic congestion-wave dataset with default event and noise settings.
pub fn generate_synthetic<F: Scalar>(
    nodes: usize,
    topology: Topology,
    steps: usize,
    seed: u64,
) -> Result<(TrafficGraph<F>, SpeedDataset<F>)> {
    generate_synthetic_with(&SyntheticConfig::new(nodes, topology, steps, seed))
}

/// Synthetic congestion-wave dataset with explicit settings.
///
/// Each node carries a congestion level in [0, 0.9]. Per step the level
/// decays by the recovery factor while picking up a fraction of the
/// downstream neighbor's previous level, so a slowdown at node j surfaces at
/// node j-1 one step later and travels one hop per step. Observed speed is
/// `60 * (1 - level)` plus bounded noise. Every node's dynamics depend only
/// on its own and its one-hop neighbor's past, so hop-limited receptive
/// fields can capture the process exactly.
pub fn generate_synthetic_with<F: Scalar>(
    cfg: &SyntheticConfig,
) -> Result<(TrafficGraph<F>, SpeedDataset<F>)> {
    if cfg.steps < 100 {
        return Err(Error::InvalidArgument("synthetic datasets need at least 100 steps".into()));
    }
    let graph = build_topology::<F>(cfg.nodes, cfg.topology)?;
    for &(step, node, severity) in &cfg.scripted_events {
        if step >= cfg.steps || node >= cfg.nodes || !(0.0..=MAX_SEVERITY).contains(&severity) {
            return Err(Error::InvalidArgument(format!(
                "scripted event ({step}, {node}, {severity}) out of range"
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.nodes;
    let mut level = vec![0.0f64; n];
    let mut values: Vec<F> = Vec::with_capacity(cfg.steps * n);
    let start = NaiveDate::from_ymd_opt(2015, 1, 1)
        .expect("valid date")
        .and_hms_opt(0, 0, 0)
        .expect("valid time");
    let step = Duration::minutes(STEP_MINUTES);
    let mut timestamps = Vec::with_capacity(cfg.steps);

    for t in 0..cfg.steps {
        if t > 0 {
            let prev = level.clone();
            for v in 0..n {
                let mut next = RECOVERY * prev[v];
                if let Some(down) = downstream_of(cfg.topology, v, n) {
                    next = next.max(PROPAGATION * prev[down]);
                }
                level[v] = next;
            }
        }
        if rng.random::<f64>() < cfg.event_rate {
            let node = rng.random_range(0..n);
            let severity = rng.random_range(0.5..MAX_SEVERITY);
            level[node] = level[node].max(severity);
        }
        for &(s, node, severity) in &cfg.scripted_events {
            if s == t {
                level[node] = level[node].max(severity);
            }
        }
        for &l in &level {
            let mut speed = FREE_FLOW_MPH * (1.0 - l);
            if cfg.noise_mph > 0.0 {
                speed += rng.random_range(-cfg.noise_mph..=cfg.noise_mph);
            }
            speed = speed.clamp(0.0, FREE_FLOW_MPH + cfg.noise_mph);
            values.push(F::c(speed));
        }
        timestamps.push(start + step * (t as i32));
    }

    let node_ids = (0..n).map(|i| format!("n{i:03}")).collect();
    let speeds = dense_from_raw(cfg.steps, n, values);
    Ok((graph, SpeedDataset::new(speeds, timestamps, step, node_ids)))
}

/// A dataset ready for training or evaluation: imputed, normalized, and
/// windowed into chronological splits.
#[derive(Debug, Clone)]
pub struct PreparedData<F> {
    pub dataset: SpeedDataset<F>,
    pub record: NormRecord<F>,
    pub splits: SplitWindows,
    pub imputed_cells: usize,
}

impl<F: Scalar> PreparedData<F> {
    pub fn window_len(&self) -> usize {
        self.splits.window_len
    }

    pub fn input(&self, start: usize) -> DenseMatrix<F> {
        self.dataset.window_input(start, self.splits.window_len)
    }

    pub fn target(&self, start: usize) -> &[F] {
        self.dataset.window_target(start, self.splits.window_len)
    }
}

/// Imputes, splits, and normalizes a raw dataset. The normalization
/// constant comes from the train rows only.
pub fn prepare<F: Scalar>(
    raw: &SpeedDataset<F>,
    window_len: usize,
    fractions: [f64; 3],
    policy: ImputePolicy,
) -> Result<PreparedData<F>> {
    let (imputed, imputed_cells) = impute_missing(raw, policy)?;
    let splits = make_windows(&imputed, window_len, fractions)?;
    let (dataset, record) = normalize(&imputed, splits.train_rows.end)?;
    Ok(PreparedData {
        dataset,
        record,
        splits,
        imputed_cells,
    })
}

/// Same pipeline but scaling with an existing normalization record, for
/// evaluating data against an already-trained model.
pub fn prepare_with_record<F: Scalar>(
    raw: &SpeedDataset<F>,
    window_len: usize,
    fractions: [f64; 3],
    policy: ImputePolicy,
    record: NormRecord<F>,
) -> Result<PreparedData<F>> {
    let (imputed, imputed_cells) = impute_missing(raw, policy)?;
    let splits = make_windows(&imputed, window_len, fractions)?;
    let dataset = apply_norm(&imputed, &record);
    Ok(PreparedData {
        dataset,
        record,
        splits,
        imputed_cells,
    })
}

/// Writes a dataset in the speed CSV format (missing cells stay empty).
pub fn export_speed_csv<F: Scalar>(path: &Path, dataset: &SpeedDataset<F>) -> Result<()> {
    let mut out = String::from("timestamp");
    for id in dataset.node_ids() {
        out.push(',');
        out.push_str(id);
    }
    out.push('\n');
    for t in 0..dataset.rows() {
        out.push_str(&dataset.timestamps[t].format(TIMESTAMP_FORMAT).to_string());
        for &v in dataset.row(t) {
            out.push(',');
            if !v.is_nan() {
                out.push_str(&format!("{v}"));
            }
        }
        out.push('\n');
    }
    write_file(path, out.as_bytes())
}
