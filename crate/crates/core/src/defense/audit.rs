use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::Response;
use crate::error::{Error, Result};

pub type UserId = u64;

/// One row of the audit log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub user_id: UserId,
    /// Zero-based index of this query among the user's queries.
    pub query_index: u64,
    pub msp: f64,
    pub alpha: f64,
    pub flagged: bool,
}

#[derive(Debug, Default, Clone, Copy)]
struct Counts {
    total: u64,
    flagged: u64,
}

#[derive(Debug, Default)]
struct Inner {
    users: BTreeMap<UserId, Counts>,
    total: u64,
    log: Option<Vec<AuditRecord>>,
}

/// Per-user query counters. Each query updates them under one lock.
#[derive(Debug, Default)]
pub(super) struct AuditState {
    inner: Mutex<Inner>,
}

impl AuditState {
    fn lock(&self) -> std::sync::MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn record(&self, user: UserId, r: &Response) {
        let mut g = self.lock();
        g.total += 1;
        let c = g.users.entry(user).or_default();
        let query_index = c.total;
        c.total += 1;
        c.flagged += u64::from(r.flagged);
        if let Some(log) = g.log.as_mut() {
            log.push(AuditRecord { user_id: user, query_index, msp: r.msp, alpha: r.alpha, flagged: r.flagged });
        }
    }

    pub fn ood_fraction(&self, user: UserId) -> Result<f64> {
        let g = self.lock();
        match g.users.get(&user) {
            Some(c) if c.total > 0 => Ok(c.flagged as f64 / c.total as f64),
            _ => Err(Error::NotFound(format!("no queries recorded for user {user}"))),
        }
    }

    pub fn total(&self) -> u64 {
        self.lock().total
    }

    pub fn user_total(&self, user: UserId) -> u64 {
        self.lock().users.get(&user).map_or(0, |c| c.total)
    }

    pub fn enable_log(&mut self) {
        let g = self.inner.get_mut().unwrap_or_else(|p| p.into_inner());
        g.log.get_or_insert_with(Vec::new);
    }

    pub fn append_csv(&self, path: &Path) -> Result<usize> {
        let records = match self.lock().log.as_mut() {
            Some(log) => std::mem::take(log),
            None => return Err(Error::config("audit logging is not enabled")),
        };
        let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        let mut w = csv::WriterBuilder::new().has_headers(fresh).from_writer(file);
        for r in &records {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(records.len())
    }
}
