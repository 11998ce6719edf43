//! Seeded random draws for query arrivals, clicks and integer-randomised
//! budgets or requirements.
//!
//! Every simulation owns a [`World`] made of independent ChaCha8 streams,
//! one per event family. Each time slot consumes exactly one arrival uniform
//! and `L` click uniforms whatever happens in it, so two runs that share a
//! seed see the same arrival and click sample path even when the algorithm
//! parameters differ.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stream ids. A stream is `(seed, id)`; distinct ids never overlap.
pub mod streams {
    pub const ARRIVALS: u64 = 0;
    pub const CLICKS: u64 = 1;
    pub const SETTLEMENT: u64 = 2;
    pub const POLICY: u64 = 3;
    pub const POPULATION: u64 = 4;
    pub const ESTIMATE: u64 = 5;
}

/// A reproducible random stream.
#[derive(Debug, Clone)]
pub struct RngStream {
    pub seed: u64,
    pub id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(id);
        RngStream { seed, id, rng }
    }

    /// Uniform in `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    /// Uniform in `[-1, 1]`.
    pub fn symmetric(&mut self) -> f64 {
        self.rng.gen_range(-1.0..=1.0)
    }
}

/// Keyword sampler: `None` with probability `1 - ν`, otherwise keyword `q`
/// with probability `ν·ϑ_q`.
#[derive(Debug, Clone)]
pub struct QuerySampler {
    cumulative: Vec<f64>,
}

impl QuerySampler {
    pub fn new(keyword_prob: &[f64]) -> Self {
        let mut acc = 0.0;
        let cumulative = keyword_prob
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        QuerySampler { cumulative }
    }

    /// Maps one uniform to a keyword. Rounding slack past the last
    /// cumulative entry falls on the last keyword with positive mass.
    #[inline]
    pub fn keyword_for(&self, u: f64, arrival_prob: f64) -> Option<usize> {
        if u >= arrival_prob {
            return None;
        }
        let x = u / arrival_prob;
        match self.cumulative.iter().position(|&c| x < c) {
            Some(q) => Some(q),
            None => {
                let mut q = self.cumulative.len() - 1;
                while q > 0 && self.cumulative[q] == self.cumulative[q - 1] {
                    q -= 1;
                }
                Some(q)
            }
        }
    }
}

/// Outcome of one time slot before any assignment is made.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SlotDraw {
    pub keyword: Option<usize>,
    /// One uniform per webpage slot; the ad placed in slot `s` is clicked iff
    /// `click_uniform[s] < ctr`.
    pub click_uniform: Vec<f64>,
}

impl SlotDraw {
    #[inline]
    pub fn clicked(&self, s: usize, ctr: f64) -> bool {
        self.click_uniform[s] < ctr
    }
}

/// The random environment of a simulation run.
#[derive(Debug, Clone)]
pub struct World {
    pub arrivals: RngStream,
    pub clicks: RngStream,
    pub settlement: RngStream,
    sampler: QuerySampler,
    num_slots: usize,
}

impl World {
    pub fn new(seed: u64, keyword_prob: &[f64], num_slots: usize) -> Self {
        World {
            arrivals: RngStream::new(seed, streams::ARRIVALS),
            clicks: RngStream::new(seed, streams::CLICKS),
            settlement: RngStream::new(seed, streams::SETTLEMENT),
            sampler: QuerySampler::new(keyword_prob),
            num_slots,
        }
    }

    /// Draws the next slot into `draw`, reusing its buffer.
    pub fn next_slot_into(&mut self, arrival_prob: f64, draw: &mut SlotDraw) {
        let u = self.arrivals.uniform();
        draw.keyword = self.sampler.keyword_for(u, arrival_prob);
        draw.click_uniform.clear();
        for _ in 0..self.num_slots {
            draw.click_uniform.push(self.clicks.uniform());
        }
    }

    pub fn sample_query(&mut self, arrival_prob: f64) -> SlotDraw {
        let mut draw = SlotDraw {
            keyword: None,
            click_uniform: Vec::with_capacity(self.num_slots),
        };
        self.next_slot_into(arrival_prob, &mut draw);
        draw
    }

    /// One integer-randomised draw per entry of `values`.
    pub fn integer_draws(&mut self, values: &[f64]) -> Vec<f64> {
        values
            .iter()
            .map(|&x| sample_integer_amount(&mut self.settlement, x))
            .collect()
    }
}

/// Bernoulli click with probability `ctr`.
pub fn sample_click(stream: &mut RngStream, ctr: f64) -> bool {
    stream.uniform() < ctr
}

/// `⌈x⌉` with probability `x - ⌊x⌋`, else `⌊x⌋`. Always consumes one draw.
pub fn sample_integer_amount(stream: &mut RngStream, x: f64) -> f64 {
    let u = stream.uniform();
    let lo = x.floor();
    if u < x - lo {
        lo + 1.0
    } else {
        lo
    }
}

/// Randomised budget for one budgeting cycle.
pub fn sample_integer_budget(stream: &mut RngStream, b: f64) -> f64 {
    sample_integer_amount(stream, b)
}

/// Randomised impression requirement for one requirement cycle.
pub fn sample_integer_requirement(stream: &mut RngStream, m: f64) -> f64 {
    sample_integer_amount(stream, m)
}

/// Batch arrivals: `sizes[j]` queries with probability `probs[j]`. Only the
/// unfairness demo uses this; the main model has at most one query per slot.
#[derive(Debug, Clone)]
pub struct BatchArrivals {
    pub sizes: Vec<u32>,
    pub probs: Vec<f64>,
}

impl BatchArrivals {
    pub fn sample(&self, stream: &mut RngStream) -> u32 {
        let u = stream.uniform();
        let mut acc = 0.0;
        for (&k, &p) in self.sizes.iter().zip(&self.probs) {
            acc += p;
            if u < acc {
                return k;
            }
        }
        *self.sizes.last().unwrap_or(&0)
    }
}
