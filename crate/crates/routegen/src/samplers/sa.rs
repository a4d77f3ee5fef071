//! Seeded single-flip Metropolis annealer with a geometric inverse
//! temperature schedule derived from the model's own coefficients.

use super::{Sampler, SampleSet, SamplerError, Subproblem};
use crate::model::Qubo;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Simulated annealing over a QUBO. Every read owns an independent RNG
/// stream derived from `(seed, read index)`, so results are identical
/// regardless of how reads are scheduled across worker threads.
#[derive(Debug, Clone)]
pub struct SimulatedAnnealing {
    /// Metropolis sweeps per read (one sweep = one proposed flip per variable).
    pub sweeps: usize,
    /// Fixed inverse temperature for every sweep. When set, the geometric
    /// schedule is bypassed and the chain samples at constant temperature.
    pub fixed_beta: Option<f64>,
}

impl Default for SimulatedAnnealing {
    fn default() -> Self {
        Self { sweeps: 1000, fixed_beta: None }
    }
}

impl SimulatedAnnealing {
    pub fn with_sweeps(sweeps: usize) -> Self {
        Self { sweeps, fixed_beta: None }
    }

    /// Geometric schedule between bounds read off the coefficients.
    ///
    /// A single flip of variable `i` changes the energy by at most
    /// `|d_i| + sum_j |q_ij|`; the hot end accepts the worst such move
    /// with probability 1/2. The smallest nonzero move is bounded below
    /// in scale by the smallest nonzero coefficient magnitude; the cold
    /// end accepts a move of that size with probability 1/100, so the
    /// final sweeps quench into local minima instead of staying warm on
    /// models whose couplings dwarf their smallest energy step.
    fn schedule(&self, qubo: &Qubo) -> Vec<f64> {
        if let Some(beta) = self.fixed_beta {
            return vec![beta; self.sweeps];
        }
        let mut bound = vec![0.0f64; qubo.n];
        for (i, &d) in qubo.diag.iter().enumerate() {
            bound[i] += d.abs();
        }
        for &(a, b, q) in &qubo.pairs {
            bound[a as usize] += q.abs();
            bound[b as usize] += q.abs();
        }
        let max = bound.iter().cloned().fold(0.0f64, f64::max);
        let min = qubo
            .diag
            .iter()
            .copied()
            .chain(qubo.pairs.iter().map(|&(_, _, q)| q))
            .map(f64::abs)
            .filter(|&c| c > 0.0)
            .fold(f64::INFINITY, f64::min);
        if max <= 0.0 || !min.is_finite() {
            return vec![1.0; self.sweeps];
        }
        let beta_hot = std::f64::consts::LN_2 / max;
        let beta_cold = (100.0f64.ln() / min).max(beta_hot);
        match self.sweeps {
            0 => Vec::new(),
            1 => vec![beta_cold],
            s => {
                let ratio = beta_cold / beta_hot;
                (0..s)
                    .map(|k| beta_hot * ratio.powf(k as f64 / (s - 1) as f64))
                    .collect()
            }
        }
    }

    /// Anneal a bare QUBO. The trait entry point delegates here.
    pub fn sample_qubo(&self, qubo: &Qubo, m: usize, seed: u64) -> Result<SampleSet, SamplerError> {
        if qubo.n == 0 {
            return Err(SamplerError::EmptyModel);
        }
        if m == 0 {
            return Err(SamplerError::NoReads);
        }
        let betas = self.schedule(qubo);
        let mut adj = vec![Vec::new(); qubo.n];
        for &(a, b, q) in &qubo.pairs {
            adj[a as usize].push((b as usize, q));
            adj[b as usize].push((a as usize, q));
        }
        let reads: Vec<(Vec<u8>, f64)> = (0..m)
            .into_par_iter()
            .map(|read| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(read as u64);
                let mut bits: Vec<u8> = (0..qubo.n).map(|_| rng.gen_range(0..2u8)).collect();
                // Local field of every variable under the current bits,
                // maintained incrementally: a proposal costs O(1) and only
                // an accepted flip walks its adjacency list.
                let mut field = qubo.diag.clone();
                for (i, f) in field.iter_mut().enumerate() {
                    for &(j, q) in &adj[i] {
                        if bits[j] == 1 {
                            *f += q;
                        }
                    }
                }
                for &beta in &betas {
                    for i in 0..qubo.n {
                        let delta = if bits[i] == 1 { -field[i] } else { field[i] };
                        if delta <= 0.0 || rng.gen::<f64>() < (-beta * delta).exp() {
                            bits[i] ^= 1;
                            let sign = if bits[i] == 1 { 1.0 } else { -1.0 };
                            for &(j, q) in &adj[i] {
                                field[j] += sign * q;
                            }
                        }
                    }
                }
                let energy = qubo.energy(&bits);
                (bits, energy)
            })
            .collect();
        let (assignments, energies) = reads.into_iter().unzip();
        Ok(SampleSet { assignments, energies, sweeps: self.sweeps, seed })
    }
}

impl Sampler for SimulatedAnnealing {
    fn sample(&self, problem: &Subproblem<'_>, m: usize, seed: u64) -> Result<SampleSet, SamplerError> {
        self.sample_qubo(problem.qubo, m, seed)
    }

    fn name(&self) -> &'static str {
        "sa"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::{build_constraints, compile_qubo, Penalties, Qubo};

    fn diag_only(diag: Vec<f64>) -> Qubo {
        Qubo { n: diag.len(), diag, pairs: Vec::new(), offset: 0.0, penalties: None }
    }

    #[test]
    fn empty_model_and_zero_reads_are_errors() {
        let sa = SimulatedAnnealing::default();
        assert!(matches!(sa.sample_qubo(&diag_only(vec![]), 5, 0), Err(SamplerError::EmptyModel)));
        assert!(matches!(sa.sample_qubo(&diag_only(vec![1.0]), 0, 0), Err(SamplerError::NoReads)));
    }

    #[test]
    fn separable_model_anneals_to_its_ground_state() {
        let qubo = diag_only(vec![4.0, -5.0, 6.0]);
        let sa = SimulatedAnnealing::with_sweeps(80);
        let ss = sa.sample_qubo(&qubo, 30, 11).unwrap();
        let best = ss.best();
        assert_eq!(ss.assignments[best], vec![0, 1, 0]);
        assert!((ss.energies[best] + 5.0).abs() < 1e-12);
        let ground = ss.energies.iter().filter(|&&e| (e + 5.0).abs() < 1e-12).count();
        assert!(ground * 3 >= ss.reads() * 2, "only {ground}/30 reads reached the ground state");
    }

    #[test]
    fn fixed_beta_matches_gibbs_ground_state_frequency() {
        // Frustrated triangle: three degenerate minima at energy -1.
        let qubo = Qubo {
            n: 3,
            diag: vec![-1.0, -1.0, -1.0],
            pairs: vec![(0, 1, 2.0), (0, 2, 2.0), (1, 2, 2.0)],
            offset: 0.0,
            penalties: None,
        };
        let beta = 1.0f64;
        let mut z = 0.0;
        let mut ground_mass = 0.0;
        for bits in 0..8u32 {
            let v: Vec<u8> = (0..3).map(|i| ((bits >> i) & 1) as u8).collect();
            let e = qubo.energy(&v);
            let w = (-beta * e).exp();
            z += w;
            if (e + 1.0).abs() < 1e-12 {
                ground_mass += w;
            }
        }
        let predicted = ground_mass / z;
        let sa = SimulatedAnnealing { sweeps: 60, fixed_beta: Some(beta) };
        let ss = sa.sample_qubo(&qubo, 3000, 5).unwrap();
        let hits = ss.energies.iter().filter(|&&e| (e + 1.0).abs() < 1e-12).count();
        let observed = hits as f64 / ss.reads() as f64;
        assert!(
            (observed - predicted).abs() < 0.05,
            "observed {observed:.3} vs Gibbs {predicted:.3}"
        );
    }

    #[test]
    fn mean_energy_does_not_rise_with_budget() {
        // Ferromagnetic chain with a weak field: domain walls cost energy
        // but move freely, so reaching the ground state takes a random
        // walk of roughly n^2 sweeps. That puts the three budgets below,
        // around, and above the relaxation time.
        let n = 24;
        let mut diag = vec![0.0; n];
        let mut pairs = Vec::new();
        for i in 0..n - 1 {
            pairs.push((i as u32, (i + 1) as u32, -4.0));
            diag[i] += 2.0;
            diag[i + 1] += 2.0;
        }
        for d in &mut diag {
            *d -= 0.1;
        }
        let qubo = Qubo { n, diag, pairs, offset: 0.0, penalties: None };
        let mean_for = |sweeps: usize| -> f64 {
            let sa = SimulatedAnnealing::with_sweeps(sweeps);
            let mut acc = 0.0;
            for seed in 0..30u64 {
                let ss = sa.sample_qubo(&qubo, 10, seed).unwrap();
                acc += ss.energies.iter().sum::<f64>() / ss.reads() as f64;
            }
            acc / 30.0
        };
        let (a, b, c) = (mean_for(10), mean_for(100), mean_for(1000));
        assert!(a >= b - 1e-9, "10 sweeps {a} vs 100 sweeps {b}");
        assert!(b >= c - 1e-9, "100 sweeps {b} vs 1000 sweeps {c}");
        assert!(a > c + 0.5, "budget must matter on this landscape: {a} vs {c}");
    }

    #[test]
    fn same_seed_reproduces_and_thread_count_is_irrelevant() {
        let (sub, _grid, vars) = fixtures::fig1();
        let cons = build_constraints(&vars, &sub);
        let (qubo, _dense) = compile_qubo(&cons, &vars, Penalties::for_fleet_bound(sub.n)).unwrap();
        let sa = SimulatedAnnealing::with_sweeps(50);
        let base = sa.sample_qubo(&qubo, 16, 42).unwrap();
        assert_eq!(base, sa.sample_qubo(&qubo, 16, 42).unwrap());
        for threads in [1usize, 4] {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            let alt = pool.install(|| sa.sample_qubo(&qubo, 16, 42).unwrap());
            assert_eq!(base.to_csv(), alt.to_csv());
        }
    }

    #[test]
    fn running_example_best_read_is_the_optimum_for_every_seed() {
        let (sub, _grid, vars) = fixtures::running_example();
        let cons = build_constraints(&vars, &sub);
        let (qubo, _dense) = compile_qubo(&cons, &vars, Penalties::for_fleet_bound(sub.n)).unwrap();
        let sa = SimulatedAnnealing::with_sweeps(200);
        for seed in 0..10u64 {
            let ss = sa.sample_qubo(&qubo, 100, seed).unwrap();
            let best = ss.energies[ss.best()];
            assert!((best - 2.0).abs() < 1e-9, "seed {seed} best energy {best}");
        }
    }
}
