//! In-process message passing between virtual ranks.
//!
//! Every exchange opens with [`VirtualComm::begin`], performs all sends,
//! then all receives, and closes with [`VirtualComm::end`], which checks that
//! every mailbox was drained. Statistics are tallied per level and kind.

use std::collections::{BTreeMap, VecDeque};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{AmgError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExchangeKind {
    MakeConsistent,
    AddReduce,
    AggregateMap,
    Agglomerate,
    Gather,
    Scatter,
    Allreduce,
}

/// Rows of a matrix block keyed by global labels, shipped during agglomeration.
#[derive(Debug, Clone, PartialEq)]
pub struct RankBlock {
    /// Global labels of the sender's local entries in local order.
    pub labels: Vec<usize>,
    pub n_owned: usize,
    /// Owner rows as (global column label, value), in local order.
    pub rows: Vec<Vec<(usize, f64)>>,
    /// Owner rank of each copy entry, aligned with `labels[n_owned..]`.
    pub copy_owner: Vec<usize>,
    /// Per destination rank, the labels this rank sends there.
    pub sends: Vec<(usize, Vec<usize>)>,
}

impl RankBlock {
    fn entries(&self) -> usize {
        self.labels.len()
            + self.rows.iter().map(Vec::len).sum::<usize>()
            + self.copy_owner.len()
            + self.sends.iter().map(|s| s.1.len()).sum::<usize>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Reals(Vec<f64>),
    Labels(Vec<usize>),
    Block(Box<RankBlock>),
}

impl Payload {
    pub fn len(&self) -> usize {
        match self {
            Payload::Reals(v) => v.len(),
            Payload::Labels(v) => v.len(),
            Payload::Block(b) => b.entries(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn into_reals(self) -> Result<Vec<f64>> {
        match self {
            Payload::Reals(v) => Ok(v),
            other => Err(AmgError::Communication(format!("expected reals, got {other:?}"))),
        }
    }

    pub fn into_labels(self) -> Result<Vec<usize>> {
        match self {
            Payload::Labels(v) => Ok(v),
            other => Err(AmgError::Communication(format!("expected labels, got {other:?}"))),
        }
    }

    pub fn into_block(self) -> Result<RankBlock> {
        match self {
            Payload::Block(b) => Ok(*b),
            other => Err(AmgError::Communication(format!("expected a matrix block, got {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExchangeTally {
    pub exchanges: usize,
    pub messages: usize,
    pub entries: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommRecord {
    pub level: usize,
    pub kind: ExchangeKind,
    #[serde(flatten)]
    pub tally: ExchangeTally,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CommStats {
    tallies: BTreeMap<(usize, ExchangeKind), ExchangeTally>,
}

impl CommStats {
    pub fn get(&self, level: usize, kind: ExchangeKind) -> ExchangeTally {
        self.tallies.get(&(level, kind)).copied().unwrap_or_default()
    }

    /// Number of exchanges of `kind` over all levels.
    pub fn exchanges(&self, kind: ExchangeKind) -> usize {
        self.tallies
            .iter()
            .filter(|(k, _)| k.1 == kind)
            .map(|(_, t)| t.exchanges)
            .sum()
    }

    pub fn total_exchanges(&self) -> usize {
        self.tallies.values().map(|t| t.exchanges).sum()
    }

    pub fn records(&self) -> Vec<CommRecord> {
        self.tallies
            .iter()
            .map(|(&(level, kind), &tally)| CommRecord { level, kind, tally })
            .collect()
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, &self.records()).map_err(|e| AmgError::Io(e.to_string()))
    }
}

#[derive(Debug)]
struct OpenExchange {
    level: usize,
    kind: ExchangeKind,
    messages: usize,
    entries: usize,
}

#[derive(Debug)]
pub struct VirtualComm {
    rank_count: usize,
    mailboxes: Vec<VecDeque<Payload>>,
    open: Option<OpenExchange>,
    stats: CommStats,
}

impl VirtualComm {
    pub fn new(rank_count: usize) -> Self {
        VirtualComm {
            rank_count,
            mailboxes: (0..rank_count * rank_count).map(|_| VecDeque::new()).collect(),
            open: None,
            stats: CommStats::default(),
        }
    }

    pub fn rank_count(&self) -> usize {
        self.rank_count
    }

    pub fn stats(&self) -> &CommStats {
        &self.stats
    }

    pub fn reset_stats(&mut self) {
        self.stats = CommStats::default();
    }

    fn slot(&self, from: usize, to: usize) -> Result<usize> {
        if from >= self.rank_count || to >= self.rank_count {
            return Err(AmgError::Communication(format!(
                "rank pair ({from}, {to}) out of range for {} ranks",
                self.rank_count
            )));
        }
        Ok(from * self.rank_count + to)
    }

    pub fn begin(&mut self, level: usize, kind: ExchangeKind) -> Result<()> {
        if let Some(open) = &self.open {
            return Err(AmgError::Communication(format!(
                "exchange {:?} started while {:?} is still open",
                kind, open.kind
            )));
        }
        self.open = Some(OpenExchange {
            level,
            kind,
            messages: 0,
            entries: 0,
        });
        Ok(())
    }

    pub fn send(&mut self, from: usize, to: usize, payload: Payload) -> Result<()> {
        let slot = self.slot(from, to)?;
        let open = self
            .open
            .as_mut()
            .ok_or_else(|| AmgError::Communication("send outside an exchange".into()))?;
        open.messages += 1;
        open.entries += payload.len();
        self.mailboxes[slot].push_back(payload);
        Ok(())
    }

    pub fn recv(&mut self, from: usize, to: usize) -> Result<Payload> {
        let slot = self.slot(from, to)?;
        if self.open.is_none() {
            return Err(AmgError::Communication("receive outside an exchange".into()));
        }
        self.mailboxes[slot]
            .pop_front()
            .ok_or_else(|| AmgError::Communication(format!("no message from rank {from} to rank {to}")))
    }

    pub fn end(&mut self) -> Result<()> {
        let open = self
            .open
            .take()
            .ok_or_else(|| AmgError::Communication("no exchange to close".into()))?;
        if let Some(slot) = self.mailboxes.iter().position(|m| !m.is_empty()) {
            return Err(AmgError::Communication(format!(
                "undelivered message from rank {} to rank {} after {:?}",
                slot / self.rank_count,
                slot % self.rank_count,
                open.kind
            )));
        }
        let t = self.stats.tallies.entry((open.level, open.kind)).or_default();
        t.exchanges += 1;
        t.messages += open.messages;
        t.entries += open.entries;
        Ok(())
    }

    /// Sums one partial value per participating rank in ascending rank order.
    pub fn allreduce_sum(&mut self, level: usize, partials: &[(usize, f64)]) -> f64 {
        debug_assert!(partials.windows(2).all(|w| w[0].0 < w[1].0));
        let t = self.stats.tallies.entry((level, ExchangeKind::Allreduce)).or_default();
        t.exchanges += 1;
        t.messages += partials.len().saturating_sub(1) * 2;
        t.entries += partials.len();
        partials.iter().map(|p| p.1).sum()
    }

    /// Integer variant of [`allreduce_sum`](Self::allreduce_sum), used for global counts.
    pub fn allreduce_count(&mut self, level: usize, partials: &[(usize, usize)]) -> usize {
        debug_assert!(partials.windows(2).all(|w| w[0].0 < w[1].0));
        let t = self.stats.tallies.entry((level, ExchangeKind::Allreduce)).or_default();
        t.exchanges += 1;
        t.messages += partials.len().saturating_sub(1) * 2;
        t.entries += partials.len();
        partials.iter().map(|p| p.1).sum()
    }
}
