//! Basic coupling of several exclusion processes through one shared event
//! stream.
//!
//! All layers live on one window and are driven by per-site clocks: every
//! site occupied in at least one layer attempts at rate 1, drawing a single
//! shared displacement. Each layer then applies its own exclusion rule
//! locally (move iff source occupied and target vacant in that layer). This
//! realizes the standard coupled generator case by case: agreeing sites
//! move together; a discrepancy facing an agreeing site moves only in the
//! layer that differs; opposite discrepancies at `x` and `y` race through
//! their two site clocks, and whichever fires first annihilates the pair.
//!
//! Reservoir exteriors are drawn once per event and shared by all layers,
//! which couples the boundary maximally. Discrepancies can still be created
//! at a reservoir boundary (a shared injection fills a vacancy in one layer
//! only); the non-creation law is a Closed/Periodic statement.

use crate::dynamics::{Boundary, Configuration, Engine, Resolved, SimClock, Window};
use crate::kernels::LatticeKernel;
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CouplingError {
    #[error("coupled layers need matching windows")]
    WindowMismatch,
    #[error("need between 2 and {max} layers, got {got}")]
    LayerCount { got: usize, max: usize },
    #[error(transparent)]
    Dynamics(#[from] crate::dynamics::DynError),
}

const MAX_LAYERS: usize = 8;

/// Jointly evolving occupancy layers with per-pair discrepancy counts
/// maintained event by event.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledState {
    window: Window,
    layers: Vec<Vec<u64>>,
    /// Number of layers occupying each site.
    occ_count: Vec<u8>,
    /// Sites with occ_count >= 1, indexed for uniform selection.
    active: Vec<u32>,
    active_slot: Vec<u32>,
    /// (count of layer-i-only, count of layer-j-only) sites per pair i<j,
    /// pairs in lexicographic order.
    pair_counts: Vec<(u64, u64)>,
}

const NO_SLOT: u32 = u32::MAX;

fn pair_index(m: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < m);
    i * (2 * m - i - 1) / 2 + (j - i - 1)
}

impl CoupledState {
    /// Couple the given configurations. All must share one window
    /// (corners, boundary treatment included).
    pub fn new(layers: &[Configuration]) -> Result<CoupledState, CouplingError> {
        let m = layers.len();
        if !(2..=MAX_LAYERS).contains(&m) {
            return Err(CouplingError::LayerCount { got: m, max: MAX_LAYERS });
        }
        let window = layers[0].window().clone();
        if layers.iter().any(|l| l.window() != &window) {
            return Err(CouplingError::WindowMismatch);
        }
        let n = window.len();
        let mut state = CoupledState {
            window,
            layers: layers.iter().map(|l| l.occupancy_words().to_vec()).collect(),
            occ_count: vec![0; n],
            active: Vec::new(),
            active_slot: vec![NO_SLOT; n],
            pair_counts: vec![(0, 0); m * (m - 1) / 2],
        };
        for idx in 0..n {
            let c = (0..m).filter(|&l| state.occupied(l, idx)).count() as u8;
            state.occ_count[idx] = c;
            if c > 0 {
                state.active_slot[idx] = state.active.len() as u32;
                state.active.push(idx as u32);
            }
        }
        for i in 0..m {
            for j in (i + 1)..m {
                let mut c10 = 0;
                let mut c01 = 0;
                for idx in 0..n {
                    match (state.occupied(i, idx), state.occupied(j, idx)) {
                        (true, false) => c10 += 1,
                        (false, true) => c01 += 1,
                        _ => {}
                    }
                }
                state.pair_counts[pair_index(m, i, j)] = (c10, c01);
            }
        }
        Ok(state)
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    pub fn occupied(&self, layer: usize, idx: usize) -> bool {
        self.layers[layer][idx / 64] >> (idx % 64) & 1 == 1
    }

    pub fn layer_particle_count(&self, layer: usize) -> usize {
        self.layers[layer].iter().map(|w| w.count_ones() as usize).sum()
    }

    /// (sites where layer i is occupied and j vacant, the reverse), from
    /// the maintained index.
    pub fn discrepancy_counts(&self, i: usize, j: usize) -> (u64, u64) {
        let (a, b) = (i.min(j), i.max(j));
        let (c10, c01) = self.pair_counts[pair_index(self.layer_count(), a, b)];
        if i < j {
            (c10, c01)
        } else {
            (c01, c10)
        }
    }

    /// Explicit discrepancy site lists for a pair, recomputed on demand.
    pub fn discrepancy_sites(&self, i: usize, j: usize) -> (Vec<usize>, Vec<usize>) {
        let mut only_i = Vec::new();
        let mut only_j = Vec::new();
        for idx in 0..self.window.len() {
            match (self.occupied(i, idx), self.occupied(j, idx)) {
                (true, false) => only_i.push(idx),
                (false, true) => only_j.push(idx),
                _ => {}
            }
        }
        (only_i, only_j)
    }

    /// Does layer `i` sit below layer `j` sitewise?
    pub fn is_sitewise_ordered(&self, i: usize, j: usize) -> bool {
        self.layers[i]
            .iter()
            .zip(&self.layers[j])
            .all(|(a, b)| a & !b == 0)
    }

    /// Copy one layer out as a standalone configuration.
    pub fn extract_layer(&self, layer: usize) -> Configuration {
        let words = &self.layers[layer];
        Configuration::from_predicate(self.window.clone(), |x| {
            let idx = self.window.index_of(x).unwrap();
            words[idx / 64] >> (idx % 64) & 1 == 1
        })
    }

    pub fn occupancy_words(&self, layer: usize) -> &[u64] {
        &self.layers[layer]
    }

    fn set_site(&mut self, layer: usize, idx: usize, value: bool) {
        let w = &mut self.layers[layer][idx / 64];
        let mask = 1u64 << (idx % 64);
        let was = *w & mask != 0;
        debug_assert_ne!(was, value);
        *w ^= mask;
        if value {
            if self.occ_count[idx] == 0 {
                self.active_slot[idx] = self.active.len() as u32;
                self.active.push(idx as u32);
            }
            self.occ_count[idx] += 1;
        } else {
            self.occ_count[idx] -= 1;
            if self.occ_count[idx] == 0 {
                let slot = self.active_slot[idx];
                self.active_slot[idx] = NO_SLOT;
                let last = *self.active.last().unwrap();
                self.active.swap_remove(slot as usize);
                if last != idx as u32 {
                    self.active_slot[last as usize] = slot;
                }
            }
        }
    }

    /// Recompute a site's contribution to every pair count around a
    /// mutation. `old` holds per-layer occupancy before the change.
    fn repair_pair_counts(&mut self, idx: usize, old: &[bool]) {
        let m = self.layer_count();
        for i in 0..m {
            for j in (i + 1)..m {
                let now = (self.occupied(i, idx), self.occupied(j, idx));
                let pc = &mut self.pair_counts[pair_index(m, i, j)];
                match (old[i], old[j]) {
                    (true, false) => pc.0 -= 1,
                    (false, true) => pc.1 -= 1,
                    _ => {}
                }
                match now {
                    (true, false) => pc.0 += 1,
                    (false, true) => pc.1 += 1,
                    _ => {}
                }
            }
        }
    }
}

/// Advance the coupled layers to absolute time `until` under the shared
/// event stream. Exact in law; see module docs.
pub fn evolve_coupled(
    state: &mut CoupledState,
    k: &LatticeKernel,
    until: f64,
    clock: &mut SimClock,
) -> Result<(), CouplingError> {
    evolve_coupled_watched(state, k, until, clock, |_, _| {})
}

/// [`evolve_coupled`] invoking the watcher after every state-changing
/// event (null attempts excluded), with the event time.
pub fn evolve_coupled_watched(
    state: &mut CoupledState,
    k: &LatticeKernel,
    until: f64,
    clock: &mut SimClock,
    mut on_event: impl FnMut(f64, &CoupledState),
) -> Result<(), CouplingError> {
    if until <= clock.t {
        return Ok(());
    }
    let engine = Engine::build(k, &state.window)?;
    let m = state.layer_count();
    let mut target = vec![0i64; state.window.dim()];
    let mut old = vec![false; m];
    let mut old_to = vec![false; m];
    loop {
        let total = state.active.len() as f64 + engine.injection_rate;
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
            let mut changed = false;
            if src_occupied {
                for l in 0..m {
                    old[l] = state.occupied(l, ch.target);
                }
                for l in 0..m {
                    if !old[l] {
                        state.set_site(l, ch.target, true);
                        changed = true;
                    }
                }
                if changed {
                    state.repair_pair_counts(ch.target, &old);
                }
            }
            if changed {
                clock.events += 1;
                on_event(clock.t, state);
            } else {
                clock.nulls += 1;
            }
            continue;
        }

        let si = clock.rng.gen_range(0..state.active.len());
        let from = state.active[si] as usize;
        let u3 = clock.rng.gen::<f64>();
        let z = engine.sample_displacement(u3);
        let site = state.window.site_at(from);
        for (t, (s, zc)) in target.iter_mut().zip(site.iter().zip(z)) {
            *t = s + zc;
        }
        match state.window.resolve(&mut target) {
            Resolved::Discarded => clock.nulls += 1,
            Resolved::Interior(to) => {
                if to == from {
                    clock.nulls += 1;
                    continue;
                }
                for l in 0..m {
                    old[l] = state.occupied(l, from);
                    old_to[l] = state.occupied(l, to);
                }
                let mut changed = false;
                for l in 0..m {
                    if old[l] && !old_to[l] {
                        state.set_site(l, from, false);
                        state.set_site(l, to, true);
                        changed = true;
                    }
                }
                if changed {
                    state.repair_pair_counts(from, &old);
                    state.repair_pair_counts(to, &old_to);
                    clock.events += 1;
                    on_event(clock.t, state);
                } else {
                    clock.nulls += 1;
                }
            }
            Resolved::Exterior => {
                let profile = state
                    .window
                    .reservoir_profile()
                    .expect("exterior implies reservoir");
                let occupied_out = clock.rng.gen::<f64>() < profile.alpha(&target);
                if occupied_out {
                    clock.nulls += 1;
                    continue;
                }
                for l in 0..m {
                    old[l] = state.occupied(l, from);
                }
                for l in 0..m {
                    if old[l] {
                        state.set_site(l, from, false);
                    }
                }
                state.repair_pair_counts(from, &old);
                clock.events += 1;
                on_event(clock.t, state);
            }
        }
    }
}

/// All pairwise discrepancy counts: entries ((i, j), (count_i_only,
/// count_j_only)) for i < j.
pub fn discrepancy_counts(state: &CoupledState) -> Vec<((usize, usize), (u64, u64))> {
    let m = state.layer_count();
    let mut out = Vec::with_capacity(m * (m - 1) / 2);
    for i in 0..m {
        for j in (i + 1)..m {
            out.push(((i, j), state.discrepancy_counts(i, j)));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::sample_product;
    use crate::kernels::{asep_kernel, make_lattice_kernel, symmetric_nn_kernel};
    use crate::measures::{DensityProfile, Region};

    fn closed(side: i64, d: usize) -> Window {
        Window::boxed(vec![0; d], vec![side - 1; d], Boundary::Closed).unwrap()
    }

    #[test]
    fn equal_layers_never_split() {
        let w = closed(10, 1);
        let mut clock = SimClock::new(8, 0);
        let cfg = sample_product(&DensityProfile::Constant(0.5), &w, clock.rng()).unwrap();
        let mut state = CoupledState::new(&[cfg.clone(), cfg]).unwrap();
        evolve_coupled(&mut state, &asep_kernel(0.7), 30.0, &mut clock).unwrap();
        assert_eq!(state.discrepancy_counts(0, 1), (0, 0));
        assert_eq!(state.occupancy_words(0), state.occupancy_words(1));
    }

    #[test]
    fn ordered_layers_stay_ordered() {
        let w = closed(12, 2);
        let mut clock = SimClock::new(17, 0);
        let lo = sample_product(&DensityProfile::Constant(0.25), &w, clock.rng()).unwrap();
        // Add particles on top of the low layer for a sitewise-dominating one.
        let hi = {
            let lo = lo.clone();
            let extra =
                sample_product(&DensityProfile::Constant(0.4), &w, clock.rng()).unwrap();
            Configuration::from_predicate(w.clone(), |x| {
                let i = w.index_of(x).unwrap();
                lo.occupied(i) || extra.occupied(i)
            })
        };
        let mut state = CoupledState::new(&[lo, hi]).unwrap();
        assert!(state.is_sitewise_ordered(0, 1));
        for step in 1..=6 {
            evolve_coupled(&mut state, &symmetric_nn_kernel(2), step as f64, &mut clock)
                .unwrap();
            assert!(state.is_sitewise_ordered(0, 1), "order broken by t={step}");
        }
    }

    #[test]
    fn discrepancy_counts_match_symmetric_difference() {
        // Quadrant indicator vs diagonal half-plane indicator: the initial
        // discrepancy sets are the set differences, counted directly.
        let w = Window::boxed(vec![-4, -4], vec![4, 4], Boundary::Closed).unwrap();
        let quadrant = Region::Quadrant;
        let half = Region::HalfSpace { normal: vec![1, 1], min: 2 };
        let a = Configuration::from_predicate(w.clone(), |x| quadrant.contains(x));
        let b = Configuration::from_predicate(w.clone(), |x| half.contains(x));
        let state = CoupledState::new(&[a, b]).unwrap();
        let mut only_a = 0u64;
        let mut only_b = 0u64;
        for idx in 0..w.len() {
            let site = w.site_at(idx);
            match (quadrant.contains(&site), half.contains(&site)) {
                (true, false) => only_a += 1,
                (false, true) => only_b += 1,
                _ => {}
            }
        }
        assert_eq!(state.discrepancy_counts(0, 1), (only_a, only_b));
        let (sa, sb) = state.discrepancy_sites(0, 1);
        assert_eq!((sa.len() as u64, sb.len() as u64), (only_a, only_b));
    }

    #[test]
    fn non_creation_on_closed_window() {
        let w = closed(8, 1);
        let mut clock = SimClock::new(33, 0);
        let a = sample_product(&DensityProfile::Constant(0.5), &w, clock.rng()).unwrap();
        let b = sample_product(&DensityProfile::Constant(0.5), &w, clock.rng()).unwrap();
        let mut state = CoupledState::new(&[a, b]).unwrap();
        let (c10, c01) = state.discrepancy_counts(0, 1);
        let mut last_total = c10 + c01;
        evolve_coupled_watched(&mut state, &asep_kernel(0.6), 60.0, &mut clock, |_, s| {
            let (c10, c01) = s.discrepancy_counts(0, 1);
            let total = c10 + c01;
            assert!(total <= last_total, "discrepancies created: {last_total} -> {total}");
            assert!(
                last_total - total == 0 || last_total - total == 2,
                "decrease step {} not 0 or 2",
                last_total - total
            );
            last_total = total;
        })
        .unwrap();
    }

    #[test]
    fn opposite_pair_annihilates_eventually() {
        // Two discrepancies of opposite type on a 2-site closed window must
        // annihilate: the only possible coupled move resolves them.
        let w = closed(2, 1);
        let a = Configuration::from_predicate(w.clone(), |x| x[0] == 0);
        let b = Configuration::from_predicate(w.clone(), |x| x[0] == 1);
        let mut state = CoupledState::new(&[a, b]).unwrap();
        assert_eq!(state.discrepancy_counts(0, 1), (1, 1));
        let mut clock = SimClock::new(5, 0);
        evolve_coupled(&mut state, &asep_kernel(0.5), 200.0, &mut clock).unwrap();
        assert_eq!(state.discrepancy_counts(0, 1), (0, 0));
        assert_eq!(state.occupancy_words(0), state.occupancy_words(1));
    }

    #[test]
    fn incremental_counts_agree_with_recount() {
        let w = closed(6, 2);
        let mut clock = SimClock::new(71, 0);
        let layers: Vec<Configuration> = (0..3)
            .map(|_| {
                sample_product(&DensityProfile::Constant(0.4), &w, clock.rng()).unwrap()
            })
            .collect();
        let mut state = CoupledState::new(&layers).unwrap();
        let k = make_lattice_kernel(
            2,
            vec![(vec![1, 0], 0.5), (vec![0, 1], 0.3), (vec![-1, -1], 0.2)],
        )
        .unwrap();
        evolve_coupled_watched(&mut state, &k, 25.0, &mut clock, |_, s| {
            for i in 0..3 {
                for j in (i + 1)..3 {
                    let (a, b) = s.discrepancy_counts(i, j);
                    let (sa, sb) = s.discrepancy_sites(i, j);
                    assert_eq!((a, b), (sa.len() as u64, sb.len() as u64));
                }
            }
        })
        .unwrap();
    }

    #[test]
    fn coupled_determinism() {
        let run = || {
            let w = closed(10, 1);
            let mut clock = SimClock::new(12, 4);
            let a =
                sample_product(&DensityProfile::Constant(0.5), &w, clock.rng()).unwrap();
            let b =
                sample_product(&DensityProfile::Constant(0.3), &w, clock.rng()).unwrap();
            let mut state = CoupledState::new(&[a, b]).unwrap();
            evolve_coupled(&mut state, &asep_kernel(0.8), 15.0, &mut clock).unwrap();
            (state.occupancy_words(0).to_vec(), state.occupancy_words(1).to_vec())
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn reservoir_draws_shared_across_layers() {
        // Identical layers behind a reservoir stay identical: every
        // exterior draw is shared, so injections and exits coincide.
        let profile = DensityProfile::Constant(0.5);
        let w = Window::boxed(vec![0], vec![5], Boundary::Reservoir(profile.clone()))
            .unwrap();
        let mut clock = SimClock::new(3, 0);
        let cfg = sample_product(&profile, &w, clock.rng()).unwrap();
        let mut state = CoupledState::new(&[cfg.clone(), cfg]).unwrap();
        evolve_coupled(&mut state, &asep_kernel(0.6), 40.0, &mut clock).unwrap();
        assert_eq!(state.discrepancy_counts(0, 1), (0, 0));
    }

    #[test]
    fn layer_validation() {
        let w = closed(4, 1);
        let one = Configuration::empty(w.clone());
        assert!(matches!(
            CoupledState::new(&[one.clone()]),
            Err(CouplingError::LayerCount { .. })
        ));
        let other_window = closed(5, 1);
        let mismatched = Configuration::empty(other_window);
        assert!(matches!(
            CoupledState::new(&[one, mismatched]),
            Err(CouplingError::WindowMismatch)
        ));
    }
}
