//! Exact continuous-time simulation of the exclusion process on a finite
//! window of `Z^d`.
//!
//! Every particle carries a rate-1 attempt clock (the jump law is a
//! probability kernel, so its total attempt rate is 1). The engine
//! aggregates: the next event time is exponential with rate equal to the
//! particle count plus the constant reservoir-injection rate, the acting
//! particle is chosen uniformly, and the displacement is drawn from the
//! kernel. Attempts whose target is occupied, or discarded by a closed
//! boundary, are null events: time advances, nothing moves.
//!
//! Reservoir boundaries are memoryless: every attempt that touches an
//! exterior site sees a fresh Bernoulli occupancy with the profile's
//! density there. Exterior sites also inject: each (exterior site y,
//! interior target x) pair within kernel range is a Poisson channel of
//! rate p(x-y), thinned by the exterior draw and by exclusion at x.

use crate::kernels::LatticeKernel;
use crate::measures::{DensityProfile, MeasureError};
use crate::stats::binomial_ci;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DynError {
    #[error("window corners malformed: {0}")]
    BadWindow(String),
    #[error("boundary treatments: {0}")]
    BadBoundary(String),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error("kernel dimension {kernel} does not match window dimension {window}")]
    DimMismatch { kernel: usize, window: usize },
}

/// Per-axis treatment of jumps leaving the window.
#[derive(Debug, Clone, PartialEq)]
pub enum Boundary {
    /// Wrap around the axis.
    Periodic,
    /// Discard the attempt.
    Closed,
    /// The exterior is an infinite memoryless particle bath with the given
    /// density profile. All reservoir axes must share one profile.
    Reservoir(DensityProfile),
}

/// A finite axis-aligned box in `Z^d` with inclusive corners and a
/// boundary treatment per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    lower: Vec<i64>,
    upper: Vec<i64>,
    boundary: Vec<Boundary>,
    sizes: Vec<i64>,
    strides: Vec<usize>,
}

/// Outcome of pushing a raw coordinate through the boundary rules.
#[derive(Debug, PartialEq)]
pub enum Resolved {
    Interior(usize),
    /// Outside through at least one reservoir axis; periodic axes already
    /// wrapped in place.
    Exterior,
    Discarded,
}

impl Window {
    pub fn new(
        lower: Vec<i64>,
        upper: Vec<i64>,
        boundary: Vec<Boundary>,
    ) -> Result<Window, DynError> {
        let d = lower.len();
        if d == 0 || upper.len() != d || boundary.len() != d {
            return Err(DynError::BadWindow(format!(
                "corner/boundary arities {} / {} / {} disagree or are zero",
                lower.len(),
                upper.len(),
                boundary.len()
            )));
        }
        let mut sizes = Vec::with_capacity(d);
        let mut total: usize = 1;
        for i in 0..d {
            if lower[i] > upper[i] {
                return Err(DynError::BadWindow(format!(
                    "axis {i}: lower {} above upper {}",
                    lower[i], upper[i]
                )));
            }
            let s = upper[i] - lower[i] + 1;
            sizes.push(s);
            total = total
                .checked_mul(s as usize)
                .ok_or_else(|| DynError::BadWindow("window too large".into()))?;
        }
        let mut reservoir_profile: Option<&DensityProfile> = None;
        for b in &boundary {
            if let Boundary::Reservoir(p) = b {
                p.validate()?;
                match reservoir_profile {
                    None => reservoir_profile = Some(p),
                    Some(q) if q == p => {}
                    Some(_) => {
                        return Err(DynError::BadBoundary(
                            "reservoir axes must share one profile".into(),
                        ))
                    }
                }
            }
        }
        let mut strides = vec![1usize; d];
        for i in (0..d.saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * sizes[i + 1] as usize;
        }
        Ok(Window { lower, upper, boundary, sizes, strides })
    }

    /// Convenience constructor: same treatment on every axis.
    pub fn boxed(lower: Vec<i64>, upper: Vec<i64>, b: Boundary) -> Result<Window, DynError> {
        let d = lower.len();
        Window::new(lower, upper, vec![b; d])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[i64] {
        &self.lower
    }

    pub fn upper(&self) -> &[i64] {
        &self.upper
    }

    pub fn boundary(&self) -> &[Boundary] {
        &self.boundary
    }

    /// Number of sites.
    pub fn len(&self) -> usize {
        self.strides[0] * self.sizes[0] as usize
    }

    pub fn is_empty(&self) -> bool {
        false // a valid window has at least one site
    }

    pub fn contains(&self, x: &[i64]) -> bool {
        x.iter()
            .zip(&self.lower)
            .zip(&self.upper)
            .all(|((c, lo), hi)| lo <= c && c <= hi)
    }

    pub fn index_of(&self, x: &[i64]) -> Option<usize> {
        if !self.contains(x) {
            return None;
        }
        Some(
            x.iter()
                .zip(&self.lower)
                .zip(&self.strides)
                .map(|((c, lo), st)| (c - lo) as usize * st)
                .sum(),
        )
    }

    pub fn site_at(&self, mut idx: usize) -> Vec<i64> {
        let mut out = Vec::with_capacity(self.dim());
        for i in 0..self.dim() {
            out.push(self.lower[i] + (idx / self.strides[i]) as i64);
            idx %= self.strides[i];
        }
        out
    }

    /// Apply the boundary rules to a raw coordinate, wrapping periodic
    /// axes in place.
    pub fn resolve(&self, x: &mut [i64]) -> Resolved {
        let mut exterior = false;
        for i in 0..self.dim() {
            if x[i] >= self.lower[i] && x[i] <= self.upper[i] {
                continue;
            }
            match &self.boundary[i] {
                Boundary::Periodic => {
                    let s = self.sizes[i];
                    x[i] = (x[i] - self.lower[i]).rem_euclid(s) + self.lower[i];
                }
                Boundary::Closed => return Resolved::Discarded,
                Boundary::Reservoir(_) => exterior = true,
            }
        }
        if exterior {
            Resolved::Exterior
        } else {
            Resolved::Interior(self.index_of(x).expect("in-range after wrapping"))
        }
    }

    /// The shared reservoir profile, when any axis has one.
    pub fn reservoir_profile(&self) -> Option<&DensityProfile> {
        self.boundary.iter().find_map(|b| match b {
            Boundary::Reservoir(p) => Some(p),
            _ => None,
        })
    }
}

/// Occupancy of a window, with the particle index maintained for O(1)
/// uniform particle selection.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    window: Window,
    occ: Vec<u64>,
    particles: Vec<u32>,
    site_slot: Vec<u32>,
}

const NO_SLOT: u32 = u32::MAX;

impl Configuration {
    pub fn empty(window: Window) -> Configuration {
        let n = window.len();
        assert!(n < NO_SLOT as usize, "window too large for u32 site indices");
        Configuration {
            window,
            occ: vec![0; n.div_ceil(64)],
            particles: Vec::new(),
            site_slot: vec![NO_SLOT; n],
        }
    }

    pub fn full(window: Window) -> Configuration {
        let n = window.len();
        let mut cfg = Configuration::empty(window);
        for idx in 0..n {
            cfg.insert(idx);
        }
        cfg
    }

    /// Deterministic construction from a site predicate.
    pub fn from_predicate(window: Window, mut f: impl FnMut(&[i64]) -> bool) -> Configuration {
        let n = window.len();
        let mut cfg = Configuration::empty(window);
        for idx in 0..n {
            if f(&cfg.window.site_at(idx)) {
                cfg.insert(idx);
            }
        }
        cfg
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn occupied(&self, idx: usize) -> bool {
        self.occ[idx / 64] >> (idx % 64) & 1 == 1
    }

    pub fn particle_count(&self) -> usize {
        self.particles.len()
    }

    /// Site indices of all particles, in internal (unsorted) order.
    pub fn particle_sites(&self) -> impl Iterator<Item = usize> + '_ {
        self.particles.iter().map(|&p| p as usize)
    }

    fn insert(&mut self, idx: usize) {
        debug_assert!(!self.occupied(idx));
        self.occ[idx / 64] |= 1 << (idx % 64);
        self.site_slot[idx] = self.particles.len() as u32;
        self.particles.push(idx as u32);
    }

    fn remove(&mut self, idx: usize) {
        debug_assert!(self.occupied(idx));
        self.occ[idx / 64] &= !(1 << (idx % 64));
        let slot = self.site_slot[idx];
        self.site_slot[idx] = NO_SLOT;
        let last = *self.particles.last().unwrap();
        self.particles.swap_remove(slot as usize);
        if last != idx as u32 {
            self.site_slot[last as usize] = slot;
        }
    }

    fn move_particle(&mut self, from: usize, to: usize) {
        debug_assert!(self.occupied(from) && !self.occupied(to));
        self.occ[from / 64] &= !(1 << (from % 64));
        self.occ[to / 64] |= 1 << (to % 64);
        let slot = self.site_slot[from];
        self.site_slot[from] = NO_SLOT;
        self.site_slot[to] = slot;
        self.particles[slot as usize] = to as u32;
    }

    /// Occupancies as 0/1 reals, site-index order.
    pub fn density_field(&self) -> Vec<f64> {
        (0..self.window.len()).map(|i| self.occupied(i) as u8 as f64).collect()
    }

    /// The full state as one machine word; windows above 64 sites have no
    /// such encoding and panic.
    pub fn state_bits(&self) -> u64 {
        assert!(self.window.len() <= 64, "state_bits needs at most 64 sites");
        self.occ[0]
    }

    /// Raw occupancy words, for snapshot serialization and bit-exact
    /// comparisons.
    pub fn occupancy_words(&self) -> &[u64] {
        &self.occ
    }
}

/// Simulation clock: current time plus the deterministic RNG stream for
/// one replicate. Identical (seed, replicate) reproduce a trajectory
/// bit for bit under the same sequence of calls.
#[derive(Debug, Clone)]
pub struct SimClock {
    pub(crate) t: f64,
    pub(crate) rng: ChaCha12Rng,
    seed: u64,
    replicate: u64,
    pub(crate) events: u64,
    pub(crate) nulls: u64,
}

impl SimClock {
    pub fn new(seed: u64, replicate: u64) -> SimClock {
        SimClock {
            t: 0.0,
            rng: ChaCha12Rng::from_seed(stream_seed(seed, replicate)),
            seed,
            replicate,
            events: 0,
            nulls: 0,
        }
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    /// State-changing events so far (null attempts excluded).
    pub fn events(&self) -> u64 {
        self.events
    }

    pub fn null_attempts(&self) -> u64 {
        self.nulls
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn replicate(&self) -> u64 {
        self.replicate
    }

    pub fn rng(&mut self) -> &mut ChaCha12Rng {
        &mut self.rng
    }
}

/// Expand one 64-bit seed and a replicate id into an independent 256-bit
/// stream key (splitmix64 chain over the mixed seed).
pub fn stream_seed(seed: u64, replicate: u64) -> [u8; 32] {
    let mut state = seed ^ replicate.wrapping_mul(0x9e3779b97f4a7c15);
    let mut out = [0u8; 32];
    for chunk in out.chunks_exact_mut(8) {
        state = state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^= z >> 31;
        chunk.copy_from_slice(&z.to_le_bytes());
    }
    out
}

/// Independent site draws with the profile's marginals.
pub fn sample_product(
    profile: &DensityProfile,
    window: &Window,
    rng: &mut impl RngCore,
) -> Result<Configuration, DynError> {
    profile.validate()?;
    let mut cfg = Configuration::empty(window.clone());
    for idx in 0..window.len() {
        let a = profile.alpha(&window.site_at(idx));
        if rng.gen::<f64>() < a {
            cfg.insert(idx);
        }
    }
    Ok(cfg)
}

/// One reservoir-injection channel: exterior site -> interior target.
pub(crate) struct Channel {
    pub(crate) target: usize,
    pub(crate) alpha: f64,
}

/// Precomputed per-(kernel, window) simulation tables.
pub(crate) struct Engine {
    /// Kernel displacements with cumulative probabilities for sampling.
    disp: Vec<Vec<i64>>,
    disp_cum: Vec<f64>,
    channels: Vec<Channel>,
    channel_cum: Vec<f64>,
    pub(crate) injection_rate: f64,
}

impl Engine {
    pub(crate) fn build(k: &LatticeKernel, window: &Window) -> Result<Engine, DynError> {
        if k.dim() != window.dim() {
            return Err(DynError::DimMismatch { kernel: k.dim(), window: window.dim() });
        }
        let mut disp = Vec::new();
        let mut disp_cum = Vec::new();
        let mut acc = 0.0;
        for (z, p) in k.entries() {
            disp.push(z.clone());
            acc += p;
            disp_cum.push(acc);
        }

        let mut channels = Vec::new();
        let mut channel_cum = Vec::new();
        let mut inj = 0.0;
        if let Some(profile) = window.reservoir_profile() {
            let range = k.range();
            for idx in 0..window.len() {
                let site = window.site_at(idx);
                // Only sites within kernel range of the boundary can be hit.
                let near = site.iter().zip(window.lower()).zip(window.upper()).any(
                    |((c, lo), hi)| c - lo < range || hi - c < range,
                );
                if !near {
                    continue;
                }
                for (z, p) in k.entries() {
                    if z.iter().all(|c| *c == 0) {
                        continue;
                    }
                    let mut src: Vec<i64> =
                        site.iter().zip(z).map(|(c, zc)| c - zc).collect();
                    if window.resolve(&mut src) == Resolved::Exterior {
                        inj += p;
                        channels.push(Channel { target: idx, alpha: profile.alpha(&src) });
                        channel_cum.push(inj);
                    }
                }
            }
        }
        Ok(Engine {
            disp,
            disp_cum,
            channels,
            channel_cum,
            injection_rate: inj,
        })
    }

    pub(crate) fn sample_displacement(&self, u: f64) -> &[i64] {
        let i = self.disp_cum.partition_point(|c| *c < u).min(self.disp.len() - 1);
        &self.disp[i]
    }

    pub(crate) fn sample_channel(&self, u: f64) -> &Channel {
        let i = self.channel_cum.partition_point(|c| *c < u).min(self.channels.len() - 1);
        &self.channels[i]
    }
}

/// Advance the configuration to absolute time `until` under the kernel's
/// exclusion dynamics. A horizon at or before the current clock time is a
/// no-op. The trajectory law is exact; see the module docs for the event
/// engine.
pub fn evolve(
    cfg: &mut Configuration,
    k: &LatticeKernel,
    until: f64,
    clock: &mut SimClock,
) -> Result<(), DynError> {
    evolve_inner(cfg, k, until, clock, |_, _| {})
}

/// A state-change record from [`evolve_traced`]: the event time and the
/// full configuration after the event, as a bit word.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEvent {
    pub t: f64,
    pub state: u64,
}

/// [`evolve`] on windows of at most 64 sites, recording every
/// state-changing event. Null attempts advance time but are not recorded.
pub fn evolve_traced(
    cfg: &mut Configuration,
    k: &LatticeKernel,
    until: f64,
    clock: &mut SimClock,
) -> Result<Vec<TraceEvent>, DynError> {
    assert!(cfg.window().len() <= 64, "tracing needs at most 64 sites");
    let mut trace = Vec::new();
    evolve_inner(cfg, k, until, clock, |t, c| {
        trace.push(TraceEvent { t, state: c.state_bits() })
    })?;
    Ok(trace)
}

fn evolve_inner(
    cfg: &mut Configuration,
    k: &LatticeKernel,
    until: f64,
    clock: &mut SimClock,
    mut on_event: impl FnMut(f64, &Configuration),
) -> Result<(), DynError> {
    if until <= clock.t {
        return Ok(());
    }
    let engine = Engine::build(k, cfg.window())?;
    let mut target = vec![0i64; cfg.window().dim()];
    loop {
        let total = cfg.particle_count() as f64 + engine.injection_rate;
        if total <= 0.0 {
            clock.t = until;
            return Ok(());
        }
        let u = clock.rng.gen::<f64>();
        let dt = -(1.0 - u).ln() / total;
        if clock.t + dt >= until {
            clock.t = until;
            return Ok(());
        }
        clock.t += dt;

        let pick_injection = engine.injection_rate > 0.0
            && clock.rng.gen::<f64>() * total < engine.injection_rate;
        if pick_injection {
            let u2 = clock.rng.gen::<f64>() * engine.injection_rate;
            let ch = engine.sample_channel(u2);
            let src_occupied = clock.rng.gen::<f64>() < ch.alpha;
            if src_occupied && !cfg.occupied(ch.target) {
                cfg.insert(ch.target);
                clock.events += 1;
                on_event(clock.t, cfg);
            } else {
                clock.nulls += 1;
            }
            continue;
        }

        let pi = clock.rng.gen_range(0..cfg.particle_count());
        let from = cfg.particles[pi] as usize;
        let u3 = clock.rng.gen::<f64>();
        let z = engine.sample_displacement(u3);
        let site = cfg.window().site_at(from);
        for (t, (s, zc)) in target.iter_mut().zip(site.iter().zip(z)) {
            *t = s + zc;
        }
        match cfg.window.resolve(&mut target) {
            Resolved::Discarded => clock.nulls += 1,
            Resolved::Interior(to) => {
                if to != from && !cfg.occupied(to) {
                    cfg.move_particle(from, to);
                    clock.events += 1;
                    on_event(clock.t, cfg);
                } else {
                    clock.nulls += 1;
                }
            }
            Resolved::Exterior => {
                let profile =
                    cfg.window().reservoir_profile().expect("exterior implies reservoir");
                let occupied_out = clock.rng.gen::<f64>() < profile.alpha(&target);
                if occupied_out {
                    clock.nulls += 1;
                } else {
                    cfg.remove(from);
                    clock.events += 1;
                    on_event(clock.t, cfg);
                }
            }
        }
    }
}

/// Per-site Monte Carlo occupation estimate with exact binomial 95%
/// confidence bounds.
#[derive(Debug, Clone)]
pub struct MarginalField {
    pub window: Window,
    pub counts: Vec<u64>,
    pub replicates: u64,
    pub mean: Vec<f64>,
    pub ci_lo: Vec<f64>,
    pub ci_hi: Vec<f64>,
}

impl MarginalField {
    pub fn half_width(&self, idx: usize) -> f64 {
        (self.ci_hi[idx] - self.ci_lo[idx]) / 2.0
    }

    pub fn covers(&self, idx: usize, alpha: f64) -> bool {
        self.ci_lo[idx] <= alpha && alpha <= self.ci_hi[idx]
    }
}

/// Run independent replicates (initial law = `profile`, horizon `t`) and
/// estimate per-site occupation probabilities at time `t`. Replicate `i`
/// uses the deterministic stream `(seed, i)`; aggregation is exact integer
/// summation, so results do not depend on scheduling.
pub fn estimate_marginals(
    profile: &DensityProfile,
    k: &LatticeKernel,
    window: &Window,
    t: f64,
    replicates: u64,
    seed: u64,
) -> Result<MarginalField, DynError> {
    assert!(replicates >= 1);
    profile.validate()?;
    Engine::build(k, window)?; // validate dimensions before spawning work
    let n = window.len();
    let counts = (0..replicates)
        .into_par_iter()
        .map(|rep| -> Result<Vec<u64>, DynError> {
            let mut clock = SimClock::new(seed, rep);
            let mut cfg = sample_product(profile, window, clock.rng())?;
            evolve(&mut cfg, k, t, &mut clock)?;
            Ok((0..n).map(|i| cfg.occupied(i) as u64).collect())
        })
        .try_reduce(
            || vec![0u64; n],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(&b) {
                    *x += y;
                }
                Ok(a)
            },
        )?;
    let mean: Vec<f64> = counts.iter().map(|c| *c as f64 / replicates as f64).collect();
    let mut ci_lo = Vec::with_capacity(n);
    let mut ci_hi = Vec::with_capacity(n);
    for &c in &counts {
        let (lo, hi) = binomial_ci(c, replicates, 0.95);
        ci_lo.push(lo);
        ci_hi.push(hi);
    }
    Ok(MarginalField { window: window.clone(), counts, replicates, mean, ci_lo, ci_hi })
}
