//! Versioned binary checkpoints.
//!
//! A checkpoint is self-contained: model kind, dimensions, node identifiers,
//! the normalization record, every parameter's values and optimizer state,
//! the support masks, and (for the spectral baseline) the precomputed
//! Laplacian powers. Values are stored as little-endian f64 bits, so a
//! save/load round trip is bit-exact and loaded models predict identically.

use std::path::Path;
use std::sync::Arc;

use crate::baselines::{LsgcLayer, LsgcLstm, VanillaLstm};
use crate::data::NormRecord;
use crate::error::{Error, Result};
use crate::graph::{write_file, SupportMask};
use crate::lstm::{LstmCore, TgcLstm};
use crate::matrix::{BoolMatrix, DenseMatrix};
use crate::model::{Model, ModelKind};
use crate::param::Parameter;
use crate::scalar::Scalar;
use crate::tgc::TgcLayer;

const MAGIC: &[u8; 4] = b"TGCL";
const VERSION: u32 = 1;

/// A trained model plus everything needed to run it on new data.
#[derive(Debug, Clone)]
pub struct Checkpoint<F: Scalar> {
    pub model: Model<F>,
    pub node_ids: Vec<String>,
    pub norm: Option<NormRecord<F>>,
    pub window_len: usize,
}

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn new() -> Self {
        Writer { buf: Vec::new() }
    }

    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn i32(&mut self, v: i32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn string(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.buf.extend_from_slice(s.as_bytes());
    }

    fn dense<F: Scalar>(&mut self, m: &DenseMatrix<F>) {
        self.u32(m.rows() as u32);
        self.u32(m.cols() as u32);
        for &v in m.as_slice() {
            self.f64(v.to_f64_lossy());
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Checkpoint("truncated checkpoint file".into()));
        }
        let slice = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn i32(&mut self) -> Result<i32> {
        Ok(i32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec())
            .map_err(|_| Error::Checkpoint("invalid utf-8 string".into()))
    }

    fn dense<F: Scalar>(&mut self) -> Result<DenseMatrix<F>> {
        let rows = self.u32()? as usize;
        let cols = self.u32()? as usize;
        let mut out = DenseMatrix::zeros(rows, cols);
        for v in out.as_mut_slice() {
            *v = F::c(self.f64()?);
        }
        Ok(out)
    }

    fn finish(&self) -> Result<()> {
        if self.pos == self.buf.len() {
            Ok(())
        } else {
            Err(Error::Checkpoint(format!(
                "{} trailing bytes after checkpoint payload",
                self.buf.len() - self.pos
            )))
        }
    }
}

fn kind_tag(kind: ModelKind) -> u8 {
    match kind {
        ModelKind::TgcLstm => 0,
        ModelKind::Lstm => 1,
        ModelKind::LsgcLstm => 2,
    }
}

fn kind_from_tag(tag: u8) -> Result<ModelKind> {
    match tag {
        0 => Ok(ModelKind::TgcLstm),
        1 => Ok(ModelKind::Lstm),
        2 => Ok(ModelKind::LsgcLstm),
        other => Err(Error::Checkpoint(format!("unknown model tag {other}"))),
    }
}

/// Collects the distinct masks referenced by the parameters, in first-use
/// order, using pointer identity (shared masks serialize once).
fn mask_table<F: Scalar>(params: &[&Parameter<F>]) -> (Vec<Arc<SupportMask>>, Vec<i32>) {
    let mut table: Vec<Arc<SupportMask>> = Vec::new();
    let mut indices = Vec::with_capacity(params.len());
    for p in params {
        match &p.mask {
            None => indices.push(-1),
            Some(mask) => {
                let found = table.iter().position(|m| Arc::ptr_eq(m, mask));
                let idx = match found {
                    Some(i) => i,
                    None => {
                        table.push(Arc::clone(mask));
                        table.len() - 1
                    }
                };
                indices.push(idx as i32);
            }
        }
    }
    (table, indices)
}

/// Serializes a checkpoint to `path`.
pub fn save_checkpoint<F: Scalar>(path: &Path, checkpoint: &Checkpoint<F>) -> Result<()> {
    let model = &checkpoint.model;
    if checkpoint.node_ids.len() != model.node_count() {
        return Err(Error::shape(
            "save_checkpoint",
            format!("{} nodes", model.node_count()),
            format!("{} ids", checkpoint.node_ids.len()),
        ));
    }
    let mut w = Writer::new();
    w.buf.extend_from_slice(MAGIC);
    w.u32(VERSION);
    w.u8(kind_tag(model.kind()));
    w.u32(model.node_count() as u32);
    w.u32(model.order() as u32);
    w.u32(checkpoint.window_len as u32);
    match &checkpoint.norm {
        None => w.u8(0),
        Some(record) => {
            w.u8(1);
            w.f64(record.max_speed.to_f64_lossy());
        }
    }
    w.u32(checkpoint.node_ids.len() as u32);
    for id in &checkpoint.node_ids {
        w.string(id);
    }

    let params = model.params();
    let (masks, mask_indices) = mask_table(&params);
    w.u32(masks.len() as u32);
    for mask in &masks {
        w.u32(mask.order() as u32);
        w.u32(mask.values().rows() as u32);
        w.u32(mask.values().cols() as u32);
        for i in 0..mask.values().rows() {
            for j in 0..mask.values().cols() {
                w.u8(mask.values().get(i, j) as u8);
            }
        }
    }

    if let Model::LsgcLstm(m) = model {
        let powers = m.lsgc().powers();
        w.u32(powers.len() as u32);
        for power in powers {
            w.dense(power);
        }
    }

    w.u32(params.len() as u32);
    for (p, &mask_idx) in params.iter().zip(&mask_indices) {
        w.string(&p.name);
        w.i32(mask_idx);
        w.dense(&p.value);
        w.dense(&p.rms);
    }

    write_file(path, &w.buf)
}

fn read_param<F: Scalar>(r: &mut Reader, masks: &[Arc<SupportMask>]) -> Result<Parameter<F>> {
    let name = r.string()?;
    let mask_idx = r.i32()?;
    let mask = if mask_idx < 0 {
        None
    } else {
        Some(Arc::clone(masks.get(mask_idx as usize).ok_or_else(|| {
            Error::Checkpoint(format!("parameter {name} references missing mask {mask_idx}"))
        })?))
    };
    let value = r.dense()?;
    let rms = r.dense()?;
    if rms.shape() != value.shape() {
        return Err(Error::Checkpoint(format!(
            "parameter {name} has mismatched optimizer state shape"
        )));
    }
    if let Some(m) = &mask {
        if m.values().shape() != value.shape() {
            return Err(Error::Checkpoint(format!("parameter {name} mask shape mismatch")));
        }
    }
    let mut p = Parameter {
        name,
        grad: DenseMatrix::zeros(value.rows(), value.cols()),
        rms,
        value,
        mask,
    };
    p.apply_mask();
    Ok(p)
}

/// Loads and validates a checkpoint.
pub fn load_checkpoint<F: Scalar>(path: &Path) -> Result<Checkpoint<F>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut r = Reader::new(&bytes);
    if r.take(4)? != MAGIC {
        return Err(Error::Checkpoint(format!(
            "{} is not a checkpoint file (bad magic)",
            path.display()
        )));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint version {version} (expected {VERSION})"
        )));
    }
    let kind = kind_from_tag(r.u8()?)?;
    let n = r.u32()? as usize;
    let order = r.u32()? as usize;
    let window_len = r.u32()? as usize;
    let norm = match r.u8()? {
        0 => None,
        1 => Some(NormRecord {
            max_speed: F::c(r.f64()?),
        }),
        other => return Err(Error::Checkpoint(format!("bad normalization flag {other}"))),
    };
    let id_count = r.u32()? as usize;
    if id_count != n {
        return Err(Error::Checkpoint(format!(
            "checkpoint says {n} nodes but carries {id_count} ids"
        )));
    }
    let mut node_ids = Vec::with_capacity(id_count);
    for _ in 0..id_count {
        node_ids.push(r.string()?);
    }

    let mask_count = r.u32()? as usize;
    let mut masks = Vec::with_capacity(mask_count);
    for _ in 0..mask_count {
        let mask_order = r.u32()? as usize;
        let rows = r.u32()? as usize;
        let cols = r.u32()? as usize;
        let mut values = BoolMatrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                match r.u8()? {
                    0 => {}
                    1 => values.set(i, j, true),
                    other => {
                        return Err(Error::Checkpoint(format!("bad mask bit {other}")));
                    }
                }
            }
        }
        masks.push(Arc::new(SupportMask::from_values(mask_order, values)));
    }

    let powers = if kind == ModelKind::LsgcLstm {
        let count = r.u32()? as usize;
        let mut powers = Vec::with_capacity(count);
        for _ in 0..count {
            let m: DenseMatrix<F> = r.dense()?;
            if m.shape() != (n, n) {
                return Err(Error::Checkpoint("Laplacian power has wrong shape".into()));
            }
            powers.push(m);
        }
        powers
    } else {
        Vec::new()
    };

    let param_count = r.u32()? as usize;
    let mut params = Vec::with_capacity(param_count);
    for _ in 0..param_count {
        params.push(read_param::<F>(&mut r, &masks)?);
    }
    r.finish()?;

    let model = assemble_model(kind, n, order, params, powers)?;
    if model.node_count() != n {
        return Err(Error::shape(
            "load_checkpoint",
            format!("{n} nodes in header"),
            format!("{} in parameters", model.node_count()),
        ));
    }
    Ok(Checkpoint {
        model,
        node_ids,
        norm,
        window_len,
    })
}

fn assemble_model<F: Scalar>(
    kind: ModelKind,
    n: usize,
    order: usize,
    params: Vec<Parameter<F>>,
    powers: Vec<DenseMatrix<F>>,
) -> Result<Model<F>> {
    match kind {
        ModelKind::TgcLstm => {
            if params.len() != order + 13 {
                return Err(Error::Checkpoint(format!(
                    "expected {} parameters for a tgc-lstm of order {order}, found {}",
                    order + 13,
                    params.len()
                )));
            }
            let mut params = params;
            let core_params = params.split_off(order + 1);
            let w_n = params.pop().expect("cell gate parameter");
            if w_n.name != "w_n" {
                return Err(Error::Checkpoint(format!("expected parameter w_n, found {}", w_n.name)));
            }
            for (i, p) in params.iter().enumerate() {
                let expected = format!("w_gc_{}", i + 1);
                if p.name != expected {
                    return Err(Error::Checkpoint(format!(
                        "expected parameter {expected}, found {}",
                        p.name
                    )));
                }
                if p.value.shape() != (n, n) {
                    return Err(Error::Checkpoint(format!("{expected} has wrong shape")));
                }
            }
            let tgc = TgcLayer::from_weights(params)?;
            let core = LstmCore::from_params(core_params)?;
            Ok(Model::TgcLstm(TgcLstm::from_parts(tgc, w_n, core)?))
        }
        ModelKind::Lstm => {
            let core = LstmCore::from_params(params)?;
            Ok(Model::Lstm(VanillaLstm::from_core(core)?))
        }
        ModelKind::LsgcLstm => {
            if params.is_empty() {
                return Err(Error::Checkpoint("missing LSGC coefficients".into()));
            }
            let mut params = params;
            let core_params = params.split_off(1);
            let theta = params.pop().expect("theta parameter");
            if theta.name != "theta" {
                return Err(Error::Checkpoint(format!("expected parameter theta, found {}", theta.name)));
            }
            let lsgc = LsgcLayer::from_parts(theta, powers)?;
            let core = LstmCore::from_params(core_params)?;
            Ok(Model::LsgcLstm(LsgcLstm::from_parts(lsgc, core)?))
        }
    }
}
