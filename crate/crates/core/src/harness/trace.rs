//! JSON-lines trace files: a header line carrying the trace kind, schema
//! version and metadata, then one line per iteration row.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::api::certify::Collector;
use crate::api::{
    certify, discounted_bound, discounted_bound_rescaled, ApiTrace, CertificateSummary, DiscountedTrace,
};
use crate::error::{Error, Result};
use crate::rl::{rl_certificate, RlTrace};

pub const TRACE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceKind {
    Api,
    Rl,
    Discounted,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AnyTrace {
    Api(ApiTrace<f64>),
    Rl(RlTrace<f64>),
    Discounted(DiscountedTrace<f64>),
}

#[derive(Serialize, Deserialize)]
struct Header<M> {
    kind: TraceKind,
    schema_version: u32,
    meta: M,
}

#[derive(Deserialize)]
struct RawHeader {
    kind: TraceKind,
    schema_version: u32,
    meta: serde_json::Value,
}

fn lines<M: Serialize, R: Serialize>(kind: TraceKind, meta: &M, rows: &[R]) -> String {
    let header = Header { kind, schema_version: TRACE_SCHEMA_VERSION, meta };
    let mut out = serde_json::to_string(&header).expect("trace header serializes");
    out.push('\n');
    for r in rows {
        out.push_str(&serde_json::to_string(r).expect("trace row serializes"));
        out.push('\n');
    }
    out
}

impl AnyTrace {
    pub fn kind(&self) -> TraceKind {
        match self {
            AnyTrace::Api(_) => TraceKind::Api,
            AnyTrace::Rl(_) => TraceKind::Rl,
            AnyTrace::Discounted(_) => TraceKind::Discounted,
        }
    }

    pub fn to_jsonl(&self) -> String {
        match self {
            AnyTrace::Api(t) => lines(TraceKind::Api, &t.meta, &t.rows),
            AnyTrace::Rl(t) => lines(TraceKind::Rl, &t.meta, &t.rows),
            AnyTrace::Discounted(t) => lines(TraceKind::Discounted, &t.meta, &t.rows),
        }
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut it = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = it.next().ok_or_else(|| Error::InvalidModel("trace file is empty".into()))?;
        let header: RawHeader =
            serde_json::from_str(first).map_err(|e| Error::json("trace header (line 1)", e))?;
        if header.schema_version != TRACE_SCHEMA_VERSION {
            return Err(Error::InvalidModel(format!(
                "trace schema version {} is not supported (expected {TRACE_SCHEMA_VERSION})",
                header.schema_version
            )));
        }
        fn parse<M: DeserializeOwned, R: DeserializeOwned>(
            meta: serde_json::Value,
            rest: &mut dyn Iterator<Item = (usize, &str)>,
        ) -> Result<(M, Vec<R>)> {
            let meta = serde_json::from_value(meta).map_err(|e| Error::json("trace metadata", e))?;
            let rows = rest
                .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::json(format!("trace line {}", i + 1), e)))
                .collect::<Result<_>>()?;
            Ok((meta, rows))
        }
        Ok(match header.kind {
            TraceKind::Api => {
                let (meta, rows) = parse(header.meta, &mut it)?;
                AnyTrace::Api(ApiTrace { meta, rows })
            }
            TraceKind::Rl => {
                let (meta, rows) = parse(header.meta, &mut it)?;
                AnyTrace::Rl(RlTrace { meta, rows })
            }
            TraceKind::Discounted => {
                let (meta, rows) = parse(header.meta, &mut it)?;
                AnyTrace::Discounted(DiscountedTrace { meta, rows })
            }
        })
    }

    /// Writes the trace and returns the SHA-256 of the bytes written.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<String> {
        let path = path.as_ref();
        let text = self.to_jsonl();
        fs::write(path, &text).map_err(|e| Error::io(path, e))?;
        Ok(sha256_hex(text.as_bytes()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_jsonl(&text)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Replays every certificate that applies to the trace kind, with the γ
/// stored in its metadata.
pub fn verify_trace(trace: &AnyTrace, tol: f64) -> Result<CertificateSummary> {
    match trace {
        AnyTrace::Api(t) => certify(t, tol),
        AnyTrace::Rl(t) => rl_certificate(t, t.meta.gamma, tol),
        AnyTrace::Discounted(t) => Ok(verify_discounted(t, tol)),
    }
}

fn verify_discounted(t: &DiscountedTrace<f64>, tol: f64) -> CertificateSummary {
    let (eps, delta) = t.meta.injector.effective_budgets();
    let mut budgets = Collector::new("budgets", tol);
    let mut cols = Collector::new("columns", tol);
    for r in &t.rows {
        budgets.le(r.k, "eps_realized <= eps", r.eps_realized, eps);
        budgets.le(r.k, "delta_realized <= delta", r.delta_realized, delta);
        cols.same(r.k, "rescaled_error", r.rescaled_error, r.error * (1.0 - t.meta.alpha));
    }
    // the discounted bound is asymptotic, so only its stored value is checked
    let alpha = t.meta.alpha;
    match (discounted_bound(alpha, eps, delta), discounted_bound_rescaled(alpha, eps, delta)) {
        (Ok(b), Ok(rb)) => {
            cols.same(0, "bound", t.meta.bound, b);
            cols.same(0, "rescaled_bound", t.meta.rescaled_bound, rb);
        }
        _ => cols.le(0, "alpha lies in [0, 1)", alpha, 1.0 - f64::EPSILON),
    }
    CertificateSummary { families: vec![budgets.finish(), cols.finish()] }
}
