//! Statevector simulation of the staircase Haar circuit.
//!
//! Qudit 1 is the most significant digit of the amplitude index, so the
//! cut after qudit `k` reshapes the state into a `d^k x d^{n-k}` row-major
//! matrix. Cut `k` lines up with component `k` of the model purity vector
//! for `2 <= k <= n-1`; the cut after qudit 1 has no slot there.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{iterate_trajectory, make_params, ArithMode};

/// Largest state dimension `d^n` the Monte Carlo accepts.
pub const MAX_STATE_DIM: u64 = 1 << 24;
pub const MIN_REALIZATIONS: usize = 100;
/// Words of the ChaCha keystream reserved for each gate.
const GATE_STRIDE_LOG2: u32 = 32;

#[derive(Clone, Debug, PartialEq)]
pub struct CircuitState {
    n: usize,
    d: usize,
    amplitudes: Vec<Complex64>,
}

fn state_dim(n: usize, d: usize) -> Option<u64> {
    (d as u64).checked_pow(n as u32)
}

impl CircuitState {
    /// `|0...0>`.
    pub fn product(n: usize, d: usize) -> Result<Self> {
        let dim = checked_dim(n, d)?;
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); dim];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Ok(CircuitState { n, d, amplitudes })
    }

    pub fn from_amplitudes(n: usize, d: usize, amplitudes: Vec<Complex64>) -> Result<Self> {
        let dim = checked_dim(n, d)?;
        if amplitudes.len() != dim {
            return Err(Error::InvalidParams(format!(
                "expected {dim} amplitudes for n={n}, d={d}, got {}",
                amplitudes.len()
            )));
        }
        Ok(CircuitState { n, d, amplitudes })
    }

    /// Normalized complex Gaussian vector, i.e. a Haar-random pure state.
    pub fn random<G: Rng + ?Sized>(n: usize, d: usize, rng: &mut G) -> Result<Self> {
        let dim = checked_dim(n, d)?;
        let mut amplitudes: Vec<Complex64> = (0..dim).map(|_| complex_normal(rng)).collect();
        let norm = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        amplitudes.iter_mut().for_each(|z| *z /= norm);
        Ok(CircuitState { n, d, amplitudes })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum()
    }
}

fn checked_dim(n: usize, d: usize) -> Result<usize> {
    if n < 1 || d < 2 {
        return Err(Error::InvalidParams(format!(
            "need n >= 1 and d >= 2 (got n={n}, d={d})"
        )));
    }
    match state_dim(n, d) {
        Some(dim) if dim <= usize::MAX as u64 => Ok(dim as usize),
        _ => Err(Error::Resource(format!(
            "state dimension {d}^{n} does not fit in memory"
        ))),
    }
}

fn complex_normal<G: Rng + ?Sized>(rng: &mut G) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im)
}

/// A two-qudit unitary, `d^2 x d^2`, row-major. Rows and columns are indexed
/// by `s_b d + s_{b+1}` for the pair of qudits it acts on.
#[derive(Clone, Debug, PartialEq)]
pub struct Gate {
    d: usize,
    m: Vec<Complex64>,
}

impl Gate {
    pub fn identity(d: usize) -> Self {
        let dd = d * d;
        let mut m = vec![Complex64::new(0.0, 0.0); dd * dd];
        for i in 0..dd {
            m[i * dd + i] = Complex64::new(1.0, 0.0);
        }
        Gate { d, m }
    }

    pub fn from_matrix(d: usize, m: Vec<Complex64>) -> Result<Self> {
        let dd = d * d;
        if m.len() != dd * dd {
            return Err(Error::InvalidParams(format!(
                "gate for d={d} needs {} entries, got {}",
                dd * dd,
                m.len()
            )));
        }
        Ok(Gate { d, m })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn dim(&self) -> usize {
        self.d * self.d
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.m[i * self.dim() + j]
    }

    pub fn matrix(&self) -> &[Complex64] {
        &self.m
    }

    /// `max |(U^dagger U - 1)_{ij}|`.
    pub fn unitarity_error(&self) -> f64 {
        let dd = self.dim();
        let mut worst = 0.0f64;
        for i in 0..dd {
            for j in 0..dd {
                let mut s = Complex64::new(0.0, 0.0);
                for r in 0..dd {
                    s += self.get(r, i).conj() * self.get(r, j);
                }
                if i == j {
                    s -= 1.0;
                }
                worst = worst.max(s.norm());
            }
        }
        worst
    }
}

/// Haar unitary on `C^{d^2}`: Gram-Schmidt on the columns of a complex
/// Ginibre matrix. Each column is orthogonalized twice and then normalized,
/// which leaves the diagonal of the triangular factor real and positive.
pub fn sample_haar_gate<G: Rng + ?Sized>(d: usize, rng: &mut G) -> Gate {
    let dd = d * d;
    let mut cols: Vec<Vec<Complex64>> = (0..dd)
        .map(|_| (0..dd).map(|_| complex_normal(rng)).collect())
        .collect();
    for j in 0..dd {
        for _pass in 0..2 {
            for i in 0..j {
                let (done, rest) = cols.split_at_mut(j);
                let qi = &done[i];
                let v = &mut rest[0];
                let proj: Complex64 = qi.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum();
                v.iter_mut().zip(qi).for_each(|(b, a)| *b -= proj * a);
            }
        }
        let norm = cols[j].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        cols[j].iter_mut().for_each(|z| *z /= norm);
    }
    let mut m = vec![Complex64::new(0.0, 0.0); dd * dd];
    for (c, col) in cols.iter().enumerate() {
        for (r, z) in col.iter().enumerate() {
            m[r * dd + c] = *z;
        }
    }
    Gate { d, m }
}

/// Applies `gate` to qudits `(bond, bond+1)`, 1-based.
pub fn apply_gate(state: &mut CircuitState, bond: usize, gate: &Gate) -> Result<()> {
    let (n, d) = (state.n, state.d);
    if gate.d != d {
        return Err(Error::InvalidParams(format!(
            "gate has d={}, state has d={d}",
            gate.d
        )));
    }
    if bond < 1 || bond + 1 > n {
        return Err(Error::OutOfRange(format!(
            "bond {bond} outside 1..={}",
            n.saturating_sub(1)
        )));
    }
    let dd = d * d;
    let right = d.pow((n - bond - 1) as u32);
    let block = dd * right;
    let mut v = vec![Complex64::new(0.0, 0.0); dd];
    for chunk in state.amplitudes.chunks_mut(block) {
        for r in 0..right {
            for (s, vs) in v.iter_mut().enumerate() {
                *vs = chunk[s * right + r];
            }
            for s in 0..dd {
                let row = &gate.m[s * dd..(s + 1) * dd];
                chunk[s * right + r] = row.iter().zip(&v).map(|(u, x)| u * x).sum();
            }
        }
    }
    Ok(())
}

/// One time step: `gates[b-1]` on bond `(b, b+1)` for `b = 1..n-1`, in
/// ascending order.
pub fn apply_staircase_layer(state: &mut CircuitState, gates: &[Gate]) -> Result<()> {
    if gates.len() + 1 != state.n {
        return Err(Error::InvalidParams(format!(
            "a layer on {} qudits needs {} gates, got {}",
            state.n,
            state.n - 1,
            gates.len()
        )));
    }
    for (b, g) in gates.iter().enumerate() {
        apply_gate(state, b + 1, g)?;
    }
    Ok(())
}

/// Which Gram matrix to form for a purity.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GramSide {
    /// `M M^dagger`, size `d^k`.
    Left,
    /// `M^dagger M`, size `d^{n-k}`.
    Right,
}

/// `tr rho_k^2` for the cut after qudit `k`, from the smaller Gram matrix.
pub fn purity_of_cut(state: &CircuitState, k: usize) -> Result<f64> {
    if k < 1 || k >= state.n {
        return Err(Error::OutOfRange(format!(
            "cut {k} outside 1..={}",
            state.n - 1
        )));
    }
    let side = if k <= state.n - k {
        GramSide::Left
    } else {
        GramSide::Right
    };
    Ok(purity_with(state, k, side))
}

/// `||G||_F^2` for the chosen Gram matrix of the `d^k x d^{n-k}` reshaping.
pub fn purity_with(state: &CircuitState, k: usize, side: GramSide) -> f64 {
    let rows = state.d.pow(k as u32);
    let cols = state.amplitudes.len() / rows;
    let a = &state.amplitudes;
    let (len, inner, at): (usize, usize, Box<dyn Fn(usize, usize) -> Complex64>) = match side {
        GramSide::Left => (rows, cols, Box::new(move |i, c| a[i * cols + c])),
        GramSide::Right => (cols, rows, Box::new(move |i, r| a[r * cols + i])),
    };
    let mut acc = 0.0;
    for i in 0..len {
        for j in i..len {
            let g: Complex64 = (0..inner).map(|c| at(i, c) * at(j, c).conj()).sum();
            acc += if i == j {
                g.re * g.re
            } else {
                2.0 * g.norm_sqr()
            };
        }
    }
    acc
}

/// Keystream for one gate. The stream is the realization; the position
/// block is `layer (n-1) + bond - 1`.
pub fn gate_rng(seed: u64, n: usize, realization: u64, layer: usize, bond: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(realization);
    let slot = (layer * (n - 1) + bond - 1) as u128;
    rng.set_word_pos(slot << GATE_STRIDE_LOG2);
    rng
}

/// Fresh gates for one layer.
pub fn sample_layer(seed: u64, n: usize, d: usize, realization: u64, layer: usize) -> Vec<Gate> {
    (1..n)
        .map(|b| sample_haar_gate(d, &mut gate_rng(seed, n, realization, layer, b)))
        .collect()
}

/// Purities of all cuts `k = 1..n-1` at `t = 0..=t_max` for one realization,
/// as `[t][k-1]`.
pub fn single_realization(
    n: usize,
    d: usize,
    t_max: usize,
    seed: u64,
    realization: u64,
) -> Result<Vec<Vec<f64>>> {
    let mut state = CircuitState::product(n, d)?;
    let cuts = |s: &CircuitState| {
        (1..n)
            .map(|k| purity_of_cut(s, k))
            .collect::<Result<Vec<f64>>>()
    };
    let mut out = Vec::with_capacity(t_max + 1);
    out.push(cuts(&state)?);
    for layer in 0..t_max {
        let gates = sample_layer(seed, n, d, realization, layer);
        apply_staircase_layer(&mut state, &gates)?;
        out.push(cuts(&state)?);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct McCell {
    pub k: usize,
    pub t: usize,
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MCResult {
    pub n: usize,
    pub d: usize,
    pub t_max: usize,
    pub realizations: usize,
    pub seed: u64,
    /// `[t][k-1]`
    pub mean: Vec<Vec<f64>>,
    pub stderr: Vec<Vec<f64>>,
}

impl MCResult {
    pub fn cell(&self, k: usize, t: usize) -> McCell {
        McCell {
            k,
            t,
            mean: self.mean[t][k - 1],
            stderr: self.stderr[t][k - 1],
        }
    }

    /// Cells ordered by `k`, then `t`.
    pub fn cells(&self) -> Vec<McCell> {
        (1..self.n)
            .flat_map(|k| (0..=self.t_max).map(move |t| (k, t)))
            .map(|(k, t)| self.cell(k, t))
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,t,mean,stderr,realizations\n");
        for c in self.cells() {
            s.push_str(&format!(
                "{},{},{:.16e},{:.16e},{}\n",
                c.k, c.t, c.mean, c.stderr, self.realizations
            ));
        }
        s
    }
}

/// Neumaier-compensated sum.
fn neumaier<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let (mut s, mut c) = (0.0f64, 0.0f64);
    for x in xs {
        let t = s + x;
        c += if s.abs() >= x.abs() {
            (s - t) + x
        } else {
            (x - t) + s
        };
        s = t;
    }
    s + c
}

/// Monte Carlo average over `realizations` independent circuits. Realizations
/// run in parallel; sums are taken in realization order, so the result does
/// not depend on the thread count.
pub fn mc_average(
    n: usize,
    d: usize,
    t_max: usize,
    realizations: usize,
    seed: u64,
) -> Result<MCResult> {
    if n < 2 || d < 2 {
        return Err(Error::InvalidParams(format!(
            "need n >= 2 and d >= 2 (got n={n}, d={d})"
        )));
    }
    match state_dim(n, d) {
        Some(dim) if dim <= MAX_STATE_DIM => {}
        other => {
            let bytes = other
                .map(|x| format!("{} bytes", x.saturating_mul(16)))
                .unwrap_or_else(|| "overflow".into());
            return Err(Error::Resource(format!(
                "d^n = {d}^{n} exceeds the limit 2^24 (state alone would need {bytes})"
            )));
        }
    }
    if realizations < MIN_REALIZATIONS {
        return Err(Error::InvalidParams(format!(
            "need at least {MIN_REALIZATIONS} realizations (got {realizations})"
        )));
    }
    let runs: Vec<Vec<Vec<f64>>> = (0..realizations as u64)
        .into_par_iter()
        .map(|r| single_realization(n, d, t_max, seed, r))
        .collect::<Result<_>>()?;
    let rf = realizations as f64;
    let mut mean = vec![vec![0.0; n - 1]; t_max + 1];
    let mut stderr = vec![vec![0.0; n - 1]; t_max + 1];
    for t in 0..=t_max {
        for c in 0..n - 1 {
            let m = neumaier(runs.iter().map(|run| run[t][c])) / rf;
            let ss = neumaier(runs.iter().map(|run| (run[t][c] - m).powi(2)));
            mean[t][c] = m;
            stderr[t][c] = (ss / (rf - 1.0)).sqrt() / rf.sqrt();
        }
    }
    Ok(MCResult {
        n,
        d,
        t_max,
        realizations,
        seed,
        mean,
        stderr,
    })
}

/// A Monte Carlo cell next to the model value.
#[derive(Clone, Debug, PartialEq)]
pub struct CellCheck {
    pub k: usize,
    pub t: usize,
    pub mean: f64,
    pub stderr: f64,
    pub model: f64,
    pub within: bool,
}

/// Compares cuts `2..=n-1` with the exact model trajectory. A cell agrees
/// when `|mean - model| <= sigmas * stderr`; zero-variance cells must agree
/// to `1e-12`.
pub fn compare_with_model(mc: &MCResult, sigmas: f64) -> Result<Vec<CellCheck>> {
    let params = make_params(mc.n, 2, mc.d as u32)?;
    let traj = iterate_trajectory(&params, mc.t_max, ArithMode::Rational)?;
    let mut out = Vec::new();
    for k in 2..mc.n {
        for t in 0..=mc.t_max {
            let c = mc.cell(k, t);
            let model = traj.component_f64(t, k);
            let tol = (sigmas * c.stderr).max(1e-12);
            out.push(CellCheck {
                k,
                t,
                mean: c.mean,
                stderr: c.stderr,
                model,
                within: (c.mean - model).abs() <= tol,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pseudospectrum::eigenvalues;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn gates_are_unitary() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        for d in [2usize, 3, 4] {
            for _ in 0..50 {
                assert!(sample_haar_gate(d, &mut rng).unitarity_error() < 1e-12);
            }
        }
    }

    #[test]
    fn second_moment_of_an_entry() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let xs: Vec<f64> = (0..100_000)
            .map(|_| sample_haar_gate(2, &mut rng).get(0, 0).norm_sqr())
            .collect();
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        let se = (var / xs.len() as f64).sqrt();
        assert!((m - 0.25).abs() < 4.0 * se, "mean {m}, se {se}");
    }

    #[test]
    fn eigen_angles_are_flat() {
        // the real 8x8 embedding [[A, -B], [B, A]] carries each eigenvalue
        // together with its conjugate, so bin |theta| on [0, pi]
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let bins = 16usize;
        let mut counts = vec![0usize; bins];
        let samples = 100_000;
        for _ in 0..samples {
            let g = sample_haar_gate(2, &mut rng);
            let mut a = vec![vec![0.0f64; 8]; 8];
            for i in 0..4 {
                for j in 0..4 {
                    let z = g.get(i, j);
                    a[i][j] = z.re;
                    a[i + 4][j + 4] = z.re;
                    a[i][j + 4] = -z.im;
                    a[i + 4][j] = z.im;
                }
            }
            for (re, im) in eigenvalues(a).unwrap() {
                let th = im.atan2(re).abs();
                counts[((th / std::f64::consts::PI * bins as f64) as usize).min(bins - 1)] += 1;
            }
        }
        let total: usize = counts.iter().sum();
        assert_eq!(total, 8 * samples);
        // each angle appears twice; chi^2 on the halved counts
        let expect = total as f64 / 2.0 / bins as f64;
        let chi2: f64 = counts
            .iter()
            .map(|&x| (x as f64 / 2.0 - expect).powi(2) / expect)
            .sum();
        // 15 degrees of freedom, p = 0.001
        assert!(chi2 < 37.7, "chi2 = {chi2}, counts {counts:?}");
    }

    #[test]
    fn identity_layer_changes_nothing() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let s0 = CircuitState::random(4, 3, &mut rng).unwrap();
        let mut s = s0.clone();
        apply_staircase_layer(&mut s, &vec![Gate::identity(3); 3]).unwrap();
        assert_eq!(s, s0);
    }

    #[test]
    fn two_qudits_is_a_matrix_vector_product() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let s0 = CircuitState::random(2, 3, &mut rng).unwrap();
        let g = sample_haar_gate(3, &mut rng);
        let mut s = s0.clone();
        apply_gate(&mut s, 1, &g).unwrap();
        for i in 0..9 {
            let want: Complex64 = (0..9).map(|j| g.get(i, j) * s0.amplitudes()[j]).sum();
            assert!((s.amplitudes()[i] - want).norm() < 1e-15);
        }
    }

    fn kron(a: &[Complex64], na: usize, b: &[Complex64], nb: usize) -> Vec<Complex64> {
        let n = na * nb;
        let mut out = vec![c(0.0, 0.0); n * n];
        for i in 0..na {
            for j in 0..na {
                for k in 0..nb {
                    for l in 0..nb {
                        out[(i * nb + k) * n + j * nb + l] = a[i * na + j] * b[k * nb + l];
                    }
                }
            }
        }
        out
    }

    fn matvec(m: &[Complex64], v: &[Complex64]) -> Vec<Complex64> {
        let n = v.len();
        (0..n)
            .map(|i| (0..n).map(|j| m[i * n + j] * v[j]).sum())
            .collect()
    }

    #[test]
    fn staircase_order_matters() {
        let mut rng = ChaCha20Rng::seed_from_u64(2024);
        let s0 = CircuitState::random(3, 2, &mut rng).unwrap();
        let gates = vec![sample_haar_gate(2, &mut rng), sample_haar_gate(2, &mut rng)];
        let id2 = [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)];
        // explicit 8x8 operators: U12 (x) 1 and 1 (x) U23
        let u12 = kron(gates[0].matrix(), 4, &id2, 2);
        let u23 = kron(&id2, 2, gates[1].matrix(), 4);
        let forward = matvec(&u23, &matvec(&u12, s0.amplitudes()));
        let backward = matvec(&u12, &matvec(&u23, s0.amplitudes()));

        let mut s = s0.clone();
        apply_staircase_layer(&mut s, &gates).unwrap();
        for (a, b) in s.amplitudes().iter().zip(&forward) {
            assert!((a - b).norm() < 1e-14);
        }
        let gap: f64 = s
            .amplitudes()
            .iter()
            .zip(&backward)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(
            gap > 1e-2,
            "reversed staircase gave the same state (gap {gap})"
        );
    }

    #[test]
    fn purity_of_simple_states() {
        let s = CircuitState::product(5, 3).unwrap();
        for k in 1..5 {
            assert_eq!(purity_of_cut(&s, k).unwrap(), 1.0);
        }
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let bell = CircuitState::from_amplitudes(
            2,
            2,
            vec![c(h, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(h, 0.0)],
        )
        .unwrap();
        assert!((purity_of_cut(&bell, 1).unwrap() - 0.5).abs() < 1e-15);
        assert!(purity_of_cut(&bell, 2).is_err());
    }

    #[test]
    fn both_gram_matrices_agree() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        for (n, d) in [(5usize, 2usize), (4, 3)] {
            let s = CircuitState::random(n, d, &mut rng).unwrap();
            for k in 1..n {
                let l = purity_with(&s, k, GramSide::Left);
                let r = purity_with(&s, k, GramSide::Right);
                assert!((l - r).abs() < 1e-12, "n={n} k={k}: {l} vs {r}");
            }
        }
    }

    #[test]
    fn random_state_purity_average() {
        let (n, d, k) = (4usize, 2usize, 2usize);
        let mut rng = ChaCha20Rng::seed_from_u64(13);
        let xs: Vec<f64> = (0..20_000)
            .map(|_| purity_of_cut(&CircuitState::random(n, d, &mut rng).unwrap(), k).unwrap())
            .collect();
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        let se = (var / xs.len() as f64).sqrt();
        let want = 8.0 / 17.0;
        assert!((m - want).abs() < 4.0 * se, "{m} vs {want} (se {se})");
    }

    #[test]
    fn norm_survives_many_layers() {
        let (n, d) = (6usize, 2usize);
        let mut s = CircuitState::product(n, d).unwrap();
        for layer in 0..100 {
            apply_staircase_layer(&mut s, &sample_layer(42, n, d, 0, layer)).unwrap();
        }
        assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gate_streams_are_isolated() {
        let a = sample_haar_gate(2, &mut gate_rng(5, 6, 3, 7, 2));
        let layer = sample_layer(5, 6, 2, 3, 7);
        assert_eq!(a, layer[1]);
        assert_ne!(layer[0], layer[1]);
        assert_ne!(sample_layer(5, 6, 2, 4, 7)[1], a);
    }

    #[test]
    fn first_layer_at_n4() {
        let mc = mc_average(4, 2, 1, 10_000, 2024).unwrap();
        let c = mc.cell(2, 1);
        assert!((c.mean - 0.72).abs() <= 3.0 * c.stderr, "{c:?}");
        for k in 1..4 {
            assert_eq!(mc.cell(k, 0).mean, 1.0);
            assert_eq!(mc.cell(k, 0).stderr, 0.0);
        }
    }

    #[test]
    fn guards() {
        assert!(matches!(
            mc_average(25, 2, 1, 100, 0),
            Err(Error::Resource(_))
        ));
        assert!(matches!(
            mc_average(4, 2, 1, 99, 0),
            Err(Error::InvalidParams(_))
        ));
    }

    #[test]
    fn thread_count_does_not_matter() {
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| mc_average(4, 2, 3, 300, 77).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn csv_layout() {
        let mc = mc_average(3, 2, 1, 100, 1).unwrap();
        let csv = mc.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("k,t,mean,stderr,realizations"));
        assert_eq!(lines.count(), 4);
    }
}
