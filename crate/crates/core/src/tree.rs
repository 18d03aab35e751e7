//! The sample space: an infinitely wide and deep rose tree with an independent
//! uniform label at every node.
//!
//! Nothing is materialized. The label at a node is a pure function of the
//! run's 64-bit seed and the node's [`NodePath`] ([`base_value`]), optionally
//! replaced by an [`OverrideStore`] entry or by a proposal rule
//! ([`ProposalContext`]). Every read goes through a [`TreeHandle`] and is
//! recorded once in the run's [`AccessLog`], which is exactly the set of
//! nodes the run inspected.
//!
//! Splitting follows the `(first child, rest)` discipline: a handle is a path
//! prefix plus the offset of its first unconsumed child. `split` hands out the
//! child at the offset and keeps the rest, so the two halves never share a
//! descendant.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use parking_lot::Mutex;

use crate::error::{PplError, Result};

/// Address of one node of the tree: the sequence of child indices taken from
/// the root.
///
/// Ordering is lexicographic, with a proper prefix ordered before its
/// extensions.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodePath(Vec<u64>);

impl NodePath {
    pub fn root() -> Self {
        NodePath(Vec::new())
    }

    pub fn new(indices: Vec<u64>) -> Self {
        NodePath(indices)
    }

    pub fn indices(&self) -> &[u64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// This path extended by one more child index.
    pub fn child(&self, index: u64) -> NodePath {
        let mut v = Vec::with_capacity(self.0.len() + 1);
        v.extend_from_slice(&self.0);
        v.push(index);
        NodePath(v)
    }

    /// True if `self` is a (non-strict) prefix of `other`.
    pub fn is_prefix_of(&self, other: &NodePath) -> bool {
        other.0.len() >= self.0.len() && other.0[..self.0.len()] == self.0[..]
    }

    /// Injective byte encoding: varint length followed by varint indices.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(1 + self.0.len() * 2);
        push_varint(&mut out, self.0.len() as u64);
        for &i in &self.0 {
            push_varint(&mut out, i);
        }
        out
    }
}

impl fmt::Display for NodePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("/");
        }
        for (k, i) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str("/")?;
            }
            write!(f, "{i}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for NodePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "NodePath({self})")
    }
}

impl FromStr for NodePath {
    type Err = PplError;

    fn from_str(s: &str) -> Result<Self> {
        if s == "/" {
            return Ok(NodePath::root());
        }
        s.split('/')
            .map(|part| {
                part.parse::<u64>()
                    .map_err(|_| PplError::InvalidArgument(format!("bad node path `{s}`")))
            })
            .collect::<Result<Vec<_>>>()
            .map(NodePath)
    }
}

impl From<Vec<u64>> for NodePath {
    fn from(v: Vec<u64>) -> Self {
        NodePath(v)
    }
}

fn push_varint(out: &mut Vec<u8>, mut v: u64) {
    loop {
        let byte = (v & 0x7f) as u8;
        v >>= 7;
        if v == 0 {
            out.push(byte);
            return;
        }
        out.push(byte | 0x80);
    }
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer: a bijective 64-bit mixer.
#[inline]
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive an independent 64-bit key from `seed` and a stream tag.
#[inline]
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    mix64(mix64(seed ^ GOLDEN).wrapping_add(tag.wrapping_mul(GOLDEN) ^ 0x5851_f42d_4c95_7f2d))
}

/// Streaming absorber for the varint path encoding, eight bytes per round.
struct Absorber {
    state: u64,
    word: u64,
    fill: u32,
    total: u64,
}

impl Absorber {
    fn new(key: u64) -> Self {
        Absorber {
            state: mix64(key ^ GOLDEN),
            word: 0,
            fill: 0,
            total: 0,
        }
    }

    #[inline]
    fn byte(&mut self, b: u8) {
        self.word |= (b as u64) << (8 * self.fill);
        self.fill += 1;
        self.total += 1;
        if self.fill == 8 {
            self.round();
        }
    }

    #[inline]
    fn round(&mut self) {
        self.state = mix64((self.state ^ self.word).wrapping_add(GOLDEN));
        self.word = 0;
        self.fill = 0;
    }

    #[inline]
    fn varint(&mut self, mut v: u64) {
        loop {
            let byte = (v & 0x7f) as u8;
            v >>= 7;
            if v == 0 {
                self.byte(byte);
                return;
            }
            self.byte(byte | 0x80);
        }
    }

    fn finish(mut self) -> u64 {
        if self.fill > 0 {
            self.round();
        }
        mix64(self.state ^ self.total.wrapping_mul(GOLDEN))
    }
}

/// 64-bit pseudorandom function of `(key, path)`.
pub fn path_hash(key: u64, path: &NodePath) -> u64 {
    let mut a = Absorber::new(key);
    a.varint(path.0.len() as u64);
    for &i in &path.0 {
        a.varint(i);
    }
    a.finish()
}

/// 64-bit hash of an arbitrary byte string, used to turn canonical key
/// encodings into child indices.
pub fn bytes_hash(key: u64, bytes: &[u8]) -> u64 {
    let mut a = Absorber::new(key);
    a.varint(bytes.len() as u64);
    for &b in bytes {
        a.byte(b);
    }
    a.finish()
}

/// Map the top 53 bits of a 64-bit word onto `[0, 1)`.
#[inline]
pub fn unit_interval(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// The uniform label of node `path` in the tree with base seed `seed`.
///
/// Deterministic in `(seed, path)`; the value lies in `[0, 1)`.
pub fn base_value(seed: u64, path: &NodePath) -> f64 {
    unit_interval(path_hash(seed, path))
}

/// Replacement labels for selected nodes. Every stored value is in `[0, 1)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct OverrideStore {
    entries: HashMap<NodePath, f64>,
}

impl OverrideStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, path: NodePath, value: f64) -> Result<()> {
        if !(0.0..1.0).contains(&value) {
            return Err(PplError::OverrideOutOfRange { path, value });
        }
        self.entries.insert(path, value);
        Ok(())
    }

    /// Builder-style insert that panics on an out-of-range value.
    pub fn with(mut self, path: impl Into<NodePath>, value: f64) -> Self {
        self.insert(path.into(), value)
            .expect("override value must lie in [0, 1)");
        self
    }

    pub fn get(&self, path: &NodePath) -> Option<f64> {
        self.entries.get(path).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, path: &NodePath) -> bool {
        self.entries.contains_key(path)
    }

    /// Entries in lexicographic path order.
    pub fn sorted(&self) -> Vec<(NodePath, f64)> {
        let mut v: Vec<_> = self.entries.iter().map(|(p, x)| (p.clone(), *x)).collect();
        v.sort_by(|a, b| a.0.cmp(&b.0));
        v
    }

    /// The store holding exactly the values a run consumed.
    pub fn from_log(log: &AccessLog) -> Self {
        OverrideStore {
            entries: log.reads.iter().cloned().collect(),
        }
    }
}

/// Distinct nodes read by one run, in first-read order, with their values.
#[derive(Clone, Debug, Default)]
pub struct AccessLog {
    reads: Vec<(NodePath, f64)>,
    index: HashMap<NodePath, usize>,
}

impl AccessLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, path: &NodePath) -> Option<f64> {
        self.index.get(path).map(|&k| self.reads[k].1)
    }

    fn record(&mut self, path: NodePath, value: f64) {
        self.index.insert(path.clone(), self.reads.len());
        self.reads.push((path, value));
    }

    /// Number of distinct nodes read.
    pub fn len(&self) -> usize {
        self.reads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reads.is_empty()
    }

    pub fn contains(&self, path: &NodePath) -> bool {
        self.index.contains_key(path)
    }

    pub fn reads(&self) -> &[(NodePath, f64)] {
        &self.reads
    }

    pub fn paths(&self) -> impl Iterator<Item = &NodePath> {
        self.reads.iter().map(|(p, _)| p)
    }
}

/// How reads are resolved while a proposal is being evaluated.
///
/// Fresh values and coins are keyed by `(epoch, path)`, so a proposal is a
/// pure function of the chain state and its epoch.
#[derive(Clone, Debug, Default, PartialEq)]
pub enum ProposalContext {
    /// Plain execution: override if present, otherwise the base label.
    #[default]
    None,
    /// Every node is independently resampled with probability `p`.
    AllSites { p: f64, epoch: u64 },
    /// Only `target` is resampled.
    SingleSite { target: NodePath, epoch: u64 },
}

const COIN_TAG: u64 = 0xc0;
const FRESH_TAG: u64 = 0xf5;

impl ProposalContext {
    fn resolve(&self, path: &NodePath, overrides: &OverrideStore, seed: u64) -> f64 {
        let current = || {
            overrides
                .get(path)
                .unwrap_or_else(|| base_value(seed, path))
        };
        match self {
            ProposalContext::None => current(),
            ProposalContext::AllSites { p, epoch } => {
                let coin = base_value(derive_seed(*epoch, COIN_TAG), path);
                if coin < *p {
                    base_value(derive_seed(*epoch, FRESH_TAG), path)
                } else {
                    current()
                }
            }
            ProposalContext::SingleSite { target, epoch } => {
                if path == target {
                    base_value(derive_seed(*epoch, FRESH_TAG), path)
                } else {
                    current()
                }
            }
        }
    }
}

/// State shared by every handle of one run.
pub(crate) struct RunCtx {
    seed: u64,
    overrides: Arc<OverrideStore>,
    proposal: ProposalContext,
    log: Mutex<AccessLog>,
    psd_warnings: Mutex<u64>,
}

/// A view into the tree: a path prefix plus the index of the first unconsumed
/// child. Handles produced by splitting share the run's stores.
#[derive(Clone)]
pub struct TreeHandle {
    ctx: Arc<RunCtx>,
    path: NodePath,
    offset: u64,
}

impl TreeHandle {
    /// Root handle of a fresh run.
    pub fn new_run(seed: u64, overrides: Arc<OverrideStore>, proposal: ProposalContext) -> Self {
        TreeHandle {
            ctx: Arc::new(RunCtx {
                seed,
                overrides,
                proposal,
                log: Mutex::new(AccessLog::new()),
                psd_warnings: Mutex::new(0),
            }),
            path: NodePath::root(),
            offset: 0,
        }
    }

    /// Root handle with no overrides and no proposal rule.
    pub fn fresh(seed: u64) -> Self {
        Self::new_run(seed, Arc::new(OverrideStore::new()), ProposalContext::None)
    }

    pub fn seed(&self) -> u64 {
        self.ctx.seed
    }

    pub fn path(&self) -> &NodePath {
        &self.path
    }

    pub fn offset(&self) -> u64 {
        self.offset
    }

    /// The label at this handle's path. Repeated reads return the cached value
    /// and are logged once.
    pub fn read_root(&self) -> f64 {
        let mut log = self.ctx.log.lock();
        if let Some(v) = log.get(&self.path) {
            return v;
        }
        let v = self
            .ctx
            .proposal
            .resolve(&self.path, &self.ctx.overrides, self.ctx.seed);
        log.record(self.path.clone(), v);
        v
    }

    /// `(first child, rest)`: the child at the current offset, and this node
    /// with the offset advanced by one.
    pub fn split(&self) -> (TreeHandle, TreeHandle) {
        let first = self.child(0);
        let rest = TreeHandle {
            ctx: Arc::clone(&self.ctx),
            path: self.path.clone(),
            offset: self.offset + 1,
        };
        (first, rest)
    }

    /// Handle at `path · (offset + i)`; equal to the first component after
    /// splitting `i` times.
    pub fn child(&self, i: u64) -> TreeHandle {
        TreeHandle {
            ctx: Arc::clone(&self.ctx),
            path: self.path.child(self.offset.wrapping_add(i)),
            offset: 0,
        }
    }

    /// Number of distinct nodes read so far in this run.
    pub fn reads_so_far(&self) -> usize {
        self.ctx.log.lock().len()
    }

    /// Copy of the current access log.
    pub fn access_snapshot(&self) -> AccessLog {
        self.ctx.log.lock().clone()
    }

    /// Move the access log out, leaving an empty one behind. Later reads
    /// through surviving handles are recorded in the new log.
    pub(crate) fn take_log(&self) -> AccessLog {
        std::mem::take(&mut *self.ctx.log.lock())
    }

    pub(crate) fn warn_psd(&self) {
        *self.ctx.psd_warnings.lock() += 1;
    }

    pub(crate) fn psd_warnings(&self) -> u64 {
        *self.ctx.psd_warnings.lock()
    }

    /// True if both handles belong to the same run.
    pub fn same_run(&self, other: &TreeHandle) -> bool {
        Arc::ptr_eq(&self.ctx, &other.ctx)
    }
}

impl fmt::Debug for TreeHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TreeHandle")
            .field("seed", &self.ctx.seed)
            .field("path", &self.path)
            .field("offset", &self.offset)
            .finish()
    }
}
