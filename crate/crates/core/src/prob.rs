//! Probability computations: deterministic functions from a [`TreeHandle`] to
//! a value.
//!
//! Sequencing splits the tree: `m.bind(f)` runs `m` on the first split
//! component and the continuation on the second. Scalar primitives read the
//! handle's own label through an inverse CDF, so each consumes exactly one
//! node. Streams and memoized functions evaluate an element only when it is
//! demanded, each on its own child subtree, and cache it for the rest of the
//! run.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use parking_lot::Mutex;

use crate::dist::{beta_quantile, normal_quantile};
use crate::error::{PplError, Result};
use crate::tree::{bytes_hash, TreeHandle};

type ProbFn<A> = dyn Fn(&TreeHandle) -> Result<A> + Send + Sync;

/// A probability computation producing an `A`.
pub struct Prob<A>(Arc<ProbFn<A>>);

impl<A> Clone for Prob<A> {
    fn clone(&self) -> Self {
        Prob(Arc::clone(&self.0))
    }
}

impl<A> fmt::Debug for Prob<A> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Prob(..)")
    }
}

impl<A: 'static> Prob<A> {
    pub fn new(f: impl Fn(&TreeHandle) -> Result<A> + Send + Sync + 'static) -> Self {
        Prob(Arc::new(f))
    }

    /// A computation that always fails with `err`.
    pub fn fail(err: PplError) -> Self {
        Prob::new(move |_| Err(err.clone()))
    }

    pub fn run(&self, h: &TreeHandle) -> Result<A> {
        (self.0)(h)
    }

    /// Run once on a fresh tree with base seed `seed`.
    pub fn sample_seeded(&self, seed: u64) -> Result<A> {
        self.run(&TreeHandle::fresh(seed))
    }

    /// Monadic sequencing: `self` on the first split component, the
    /// continuation on the second.
    pub fn bind<B: 'static>(&self, f: impl Fn(A) -> Prob<B> + Send + Sync + 'static) -> Prob<B> {
        let m = self.clone();
        Prob::new(move |h| {
            let (first, rest) = h.split();
            let a = m.run(&first)?;
            f(a).run(&rest)
        })
    }

    /// Apply `f` to the result. Runs `self` on the same handle, without a
    /// split.
    pub fn map<B: 'static>(&self, f: impl Fn(A) -> B + Send + Sync + 'static) -> Prob<B> {
        let m = self.clone();
        Prob::new(move |h| m.run(h).map(&f))
    }

    /// Fallible [`map`](Self::map).
    pub fn try_map<B: 'static>(
        &self,
        f: impl Fn(A) -> Result<B> + Send + Sync + 'static,
    ) -> Prob<B> {
        let m = self.clone();
        Prob::new(move |h| m.run(h).and_then(&f))
    }

    /// Direct-style sequencing. Each [`ProbBlock::draw`] is one `bind` step,
    /// so a block is pointwise equal to the corresponding right-nested chain
    /// of binds ending in `pure`.
    pub fn block(f: impl Fn(&mut ProbBlock) -> Result<A> + Send + Sync + 'static) -> Self {
        Prob::new(move |h| {
            let mut block = ProbBlock { handle: h.clone() };
            f(&mut block)
        })
    }
}

impl<A: Clone + Send + Sync + 'static> Prob<A> {
    /// Bind a value that is computed only if forced. An unforced draw reads
    /// nothing from the tree.
    pub fn deferred(&self) -> Prob<Deferred<A>> {
        let m = self.clone();
        Prob::new(move |h| {
            Ok(Deferred(Arc::new(DeferredInner {
                handle: h.clone(),
                comp: m.clone(),
                value: Mutex::new(None),
            })))
        })
    }
}

/// Cursor for [`Prob::block`].
pub struct ProbBlock {
    handle: TreeHandle,
}

impl ProbBlock {
    pub fn draw<T: 'static>(&mut self, p: &Prob<T>) -> Result<T> {
        let (first, rest) = self.handle.split();
        self.handle = rest;
        p.run(&first)
    }

    /// The handle the remainder of the block runs on.
    pub fn handle(&self) -> &TreeHandle {
        &self.handle
    }
}

/// `return`: yields `x` without reading the tree.
pub fn pure<A: Clone + Send + Sync + 'static>(x: A) -> Prob<A> {
    Prob::new(move |_| Ok(x.clone()))
}

fn scalar(read: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Prob<f64> {
    Prob::new(move |h| Ok(read(h.read_root())))
}

/// The label of the handle's root.
pub fn uniform() -> Prob<f64> {
    scalar(|u| u)
}

/// Normal(`mu`, `sigma`) by inverse CDF.
pub fn normal(mu: f64, sigma: f64) -> Prob<f64> {
    if !(sigma >= 0.0) {
        return Prob::fail(PplError::param("sigma", sigma, "must be >= 0"));
    }
    scalar(move |u| {
        if sigma == 0.0 {
            mu
        } else {
            mu + sigma * normal_quantile(u)
        }
    })
}

/// Exponential with the given rate: `-ln(1 - u) / rate`.
pub fn exponential(rate: f64) -> Prob<f64> {
    if !(rate > 0.0) {
        return Prob::fail(PplError::param("rate", rate, "must be > 0"));
    }
    scalar(move |u| -(-u).ln_1p() / rate)
}

/// Beta(`a`, `b`) by inverse CDF.
pub fn beta(a: f64, b: f64) -> Prob<f64> {
    if !(a > 0.0) {
        return Prob::fail(PplError::param("a", a, "must be > 0"));
    }
    if !(b > 0.0) {
        return Prob::fail(PplError::param("b", b, "must be > 0"));
    }
    scalar(move |u| beta_quantile(a, b, u))
}

/// True with probability `p`.
pub fn bernoulli(p: f64) -> Prob<bool> {
    if !(0.0..=1.0).contains(&p) {
        return Prob::fail(PplError::param("p", p, "must lie in [0, 1]"));
    }
    Prob::new(move |h| Ok(h.read_root() < p))
}

/// Index `i` with probability `ws[i] / sum(ws)`.
pub fn categorical(ws: Vec<f64>) -> Prob<usize> {
    if ws.is_empty() {
        return Prob::fail(PplError::InvalidArgument(
            "categorical needs at least one weight".into(),
        ));
    }
    if let Some(&w) = ws.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Prob::fail(PplError::param("weight", w, "must be finite and >= 0"));
    }
    let cumulative: Vec<f64> = ws
        .iter()
        .scan(0.0, |acc, w| {
            *acc += w;
            Some(*acc)
        })
        .collect();
    let total = *cumulative.last().unwrap();
    if total <= 0.0 {
        return Prob::fail(PplError::param("weights sum", total, "must be > 0"));
    }
    Prob::new(move |h| {
        let target = h.read_root() * total;
        let i = cumulative.partition_point(|&c| c <= target);
        Ok(i.min(cumulative.len() - 1))
    })
}

/// A draw bound by [`Prob::deferred`]; evaluated on first [`force`](Self::force).
pub struct Deferred<A>(Arc<DeferredInner<A>>);

struct DeferredInner<A> {
    handle: TreeHandle,
    comp: Prob<A>,
    value: Mutex<Option<A>>,
}

impl<A> Clone for Deferred<A> {
    fn clone(&self) -> Self {
        Deferred(Arc::clone(&self.0))
    }
}

impl<A: Clone + 'static> Deferred<A> {
    pub fn force(&self) -> Result<A> {
        if let Some(v) = self.0.value.lock().as_ref() {
            return Ok(v.clone());
        }
        let v = self.0.comp.run(&self.0.handle)?;
        Ok(self.0.value.lock().get_or_insert(v).clone())
    }
}

trait StreamSource<A>: Send + Sync {
    fn get(&self, n: usize) -> Result<A>;
}

/// A lazy infinite stream, cached for the run that created it.
pub struct Stream<A>(Arc<dyn StreamSource<A>>);

impl<A> Clone for Stream<A> {
    fn clone(&self) -> Self {
        Stream(Arc::clone(&self.0))
    }
}

impl<A> fmt::Debug for Stream<A> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Stream(..)")
    }
}

struct Indexed<A> {
    f: Box<dyn Fn(usize) -> Result<A> + Send + Sync>,
    cache: Mutex<HashMap<usize, A>>,
}

impl<A: Clone + Send + Sync> StreamSource<A> for Indexed<A> {
    fn get(&self, n: usize) -> Result<A> {
        if let Some(v) = self.cache.lock().get(&n) {
            return Ok(v.clone());
        }
        let v = (self.f)(n)?;
        Ok(self.cache.lock().entry(n).or_insert(v).clone())
    }
}

type StepFn<S, A> = dyn Fn(&mut S, usize) -> Result<A> + Send + Sync;

struct Sequential<S, A> {
    step: Box<StepFn<S, A>>,
    state: Mutex<(Vec<A>, S)>,
}

impl<S: Send, A: Clone + Send + Sync> StreamSource<A> for Sequential<S, A> {
    fn get(&self, n: usize) -> Result<A> {
        let mut guard = self.state.lock();
        let (done, state) = &mut *guard;
        while done.len() <= n {
            let k = done.len();
            let next = (self.step)(state, k)?;
            done.push(next);
        }
        Ok(done[n].clone())
    }
}

impl<A: Clone + Send + Sync + 'static> Stream<A> {
    /// Stream whose elements are computed independently by index.
    pub fn from_fn(f: impl Fn(usize) -> Result<A> + Send + Sync + 'static) -> Self {
        Stream(Arc::new(Indexed {
            f: Box::new(f),
            cache: Mutex::new(HashMap::new()),
        }))
    }

    /// Stream produced by a state machine; element `n` forces `0..n` first.
    pub fn sequential<S: Send + 'static>(
        init: S,
        step: impl Fn(&mut S, usize) -> Result<A> + Send + Sync + 'static,
    ) -> Self {
        Stream(Arc::new(Sequential {
            step: Box::new(step),
            state: Mutex::new((Vec::new(), init)),
        }))
    }

    /// Element `n`, computed on first demand.
    pub fn get(&self, n: usize) -> Result<A> {
        self.0.get(n)
    }

    /// The first `k` elements.
    pub fn take(&self, k: usize) -> Result<Vec<A>> {
        (0..k).map(|n| self.get(n)).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = Result<A>> + '_ {
        (0..).map(move |n| self.get(n))
    }

    pub fn map<B: Clone + Send + Sync + 'static>(
        &self,
        f: impl Fn(A) -> B + Send + Sync + 'static,
    ) -> Stream<B> {
        let inner = self.clone();
        Stream::from_fn(move |n| inner.get(n).map(&f))
    }

    /// Haskell's `scanl`: `init, f(init, x0), f(f(init, x0), x1), ...`.
    pub fn scan<B: Clone + Send + Sync + 'static>(
        &self,
        init: B,
        f: impl Fn(&B, A) -> B + Send + Sync + 'static,
    ) -> Stream<B> {
        let inner = self.clone();
        Stream::sequential(init, move |acc: &mut B, k| {
            if k == 0 {
                return Ok(acc.clone());
            }
            let next = f(acc, inner.get(k - 1)?);
            *acc = next.clone();
            Ok(next)
        })
    }
}

/// Infinite stream of independent draws of `p`; element `n` lives on child
/// `n` of the handle.
pub fn iid<A: Clone + Send + Sync + 'static>(p: &Prob<A>) -> Prob<Stream<A>> {
    let p = p.clone();
    Prob::new(move |h| {
        let base = h.clone();
        let p = p.clone();
        Ok(Stream::from_fn(move |n| p.run(&base.child(n as u64))))
    })
}

/// Stream produced by iterating `f` from `y0`; iterate `n` runs on child `n`.
pub fn unfold<A, B>(f: impl Fn(B) -> Prob<(A, B)> + Send + Sync + 'static, y0: B) -> Prob<Stream<A>>
where
    A: Clone + Send + Sync + 'static,
    B: Clone + Send + Sync + 'static,
{
    let f = Arc::new(f);
    Prob::new(move |h| {
        let base = h.clone();
        let f = Arc::clone(&f);
        Ok(Stream::sequential(y0.clone(), move |y: &mut B, n| {
            let (x, next) = f(y.clone()).run(&base.child(n as u64))?;
            *y = next;
            Ok(x)
        }))
    })
}

/// A random function, fixed for the run that produced it.
pub struct RandFn<X, Y>(Arc<dyn Fn(X) -> Result<Y> + Send + Sync>);

/// Random real function.
pub type RealFn = RandFn<f64, f64>;

impl<X, Y> Clone for RandFn<X, Y> {
    fn clone(&self) -> Self {
        RandFn(Arc::clone(&self.0))
    }
}

impl<X, Y> fmt::Debug for RandFn<X, Y> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("RandFn(..)")
    }
}

impl<X: 'static, Y: 'static> RandFn<X, Y> {
    pub fn new(f: impl Fn(X) -> Result<Y> + Send + Sync + 'static) -> Self {
        RandFn(Arc::new(f))
    }

    /// Wrap a total deterministic function.
    pub fn total(f: impl Fn(X) -> Y + Send + Sync + 'static) -> Self {
        RandFn(Arc::new(move |x| Ok(f(x))))
    }

    pub fn call(&self, x: X) -> Result<Y> {
        (self.0)(x)
    }

    /// `x ↦ self(g(x))`.
    pub fn precompose<W: 'static>(
        &self,
        g: impl Fn(W) -> X + Send + Sync + 'static,
    ) -> RandFn<W, Y> {
        let f = self.clone();
        RandFn::new(move |w| f.call(g(w)))
    }
}

/// Stochastic memoization over the naturals: `g(n)` runs `f(n)` on child `n`
/// the first time it is called and returns the cached value afterwards.
pub fn memoize_nat<B: Clone + Send + Sync + 'static>(
    f: impl Fn(u64) -> Prob<B> + Send + Sync + 'static,
) -> Prob<RandFn<i64, B>> {
    let f = Arc::new(f);
    Prob::new(move |h| {
        let base = h.clone();
        let f = Arc::clone(&f);
        let cache: Mutex<HashMap<u64, B>> = Mutex::new(HashMap::new());
        Ok(RandFn::new(move |n: i64| {
            if n < 0 {
                return Err(PplError::InvalidArgument(format!(
                    "memoized function over the naturals called with {n}"
                )));
            }
            let n = n as u64;
            if let Some(v) = cache.lock().get(&n) {
                return Ok(v.clone());
            }
            let v = f(n).run(&base.child(n))?;
            Ok(cache.lock().entry(n).or_insert(v).clone())
        }))
    })
}

/// Types with an injective canonical byte encoding, usable as memoization
/// keys.
pub trait MemoKey: Send + Sync + 'static {
    fn write_key(&self, out: &mut Vec<u8>);

    fn key_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_key(&mut out);
        out
    }
}

macro_rules! int_key {
    ($($t:ty),*) => {$(
        impl MemoKey for $t {
            fn write_key(&self, out: &mut Vec<u8>) {
                out.extend_from_slice(&self.to_le_bytes());
            }
        }
    )*};
}

int_key!(u8, u16, u32, u64, usize, i8, i16, i32, i64);

impl MemoKey for bool {
    fn write_key(&self, out: &mut Vec<u8>) {
        out.push(*self as u8);
    }
}

/// `-0.0` encodes as `0.0` and all NaNs encode alike, matching `==` on the
/// non-NaN values.
impl MemoKey for f64 {
    fn write_key(&self, out: &mut Vec<u8>) {
        let x = if *self == 0.0 {
            0.0
        } else if self.is_nan() {
            f64::NAN
        } else {
            *self
        };
        out.extend_from_slice(&x.to_bits().to_le_bytes());
    }
}

impl MemoKey for String {
    fn write_key(&self, out: &mut Vec<u8>) {
        (self.len() as u64).write_key(out);
        out.extend_from_slice(self.as_bytes());
    }
}

impl<T: MemoKey> MemoKey for Vec<T> {
    fn write_key(&self, out: &mut Vec<u8>) {
        (self.len() as u64).write_key(out);
        for x in self {
            x.write_key(out);
        }
    }
}

impl<A: MemoKey, B: MemoKey> MemoKey for (A, B) {
    fn write_key(&self, out: &mut Vec<u8>) {
        self.0.write_key(out);
        self.1.write_key(out);
    }
}

const MEMO_KEY_TAG: u64 = 0x6d65_6d6f;

/// Child index used for a memoization key.
pub fn memo_child_index<K: MemoKey>(k: &K) -> u64 {
    bytes_hash(MEMO_KEY_TAG, &k.key_bytes())
}

/// Stochastic memoization over any [`MemoKey`]. `g(k)` runs `f(k)` on the
/// child indexed by a 64-bit hash of `k`'s encoding, so the value depends on
/// the argument and the tree but not on call order. The per-run cache is
/// keyed by the full encoding.
pub fn memoize_keyed<K: MemoKey, B: Clone + Send + Sync + 'static>(
    f: impl Fn(&K) -> Prob<B> + Send + Sync + 'static,
) -> Prob<RandFn<K, B>> {
    let f = Arc::new(f);
    Prob::new(move |h| {
        let base = h.clone();
        let f = Arc::clone(&f);
        let cache: Mutex<HashMap<Vec<u8>, B>> = Mutex::new(HashMap::new());
        Ok(RandFn::new(move |k: K| {
            let bytes = k.key_bytes();
            if let Some(v) = cache.lock().get(&bytes) {
                return Ok(v.clone());
            }
            let idx = bytes_hash(MEMO_KEY_TAG, &bytes);
            let v = f(&k).run(&base.child(idx))?;
            Ok(cache.lock().entry(bytes).or_insert(v).clone())
        }))
    })
}
