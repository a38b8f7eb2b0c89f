//! Model parameters and instance samplers.
//!
//! Two observation models share the same latent structure (labels `v`,
//! covariate direction `u`): the sparse graph-plus-covariates instance and
//! its Gaussian surrogate where the adjacency matrix is replaced by a
//! rank-one-deformed symmetric noise matrix.

use crate::graph::Graph;
use crate::linalg::{axpy, dot};
use crate::rng::{
    stream_rng, COV_NOISE_BASE, STREAM_EDGES, STREAM_GAUSS_NOISE, STREAM_LABELS, STREAM_LATENT_U,
};
use crate::{Error, Result};
use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::Rng;
use rand_distr::{Distribution, Geometric, StandardNormal};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

/// Problem dimensions and signal strengths, plus derived quantities.
///
/// `gamma = n / p` is the finite-size aspect ratio; every closed-form
/// prediction in the crate consumes this exact value. Edge rates follow
/// `c_in = d + lambda * sqrt(d)`, `c_out = d - lambda * sqrt(d)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n: usize,
    pub p: usize,
    pub d: f64,
    pub lambda: f64,
    pub mu: f64,
    pub gamma: f64,
    pub c_in: f64,
    pub c_out: f64,
}

/// Validates inputs and computes the derived fields of [`ModelParams`].
pub fn derive_params(n: usize, p: usize, d: f64, lambda: f64, mu: f64) -> Result<ModelParams> {
    if n < 2 || p < 2 {
        return Err(Error::InvalidParams(format!("need n, p >= 2 (got n={n}, p={p})")));
    }
    if !(d >= 1.0) {
        return Err(Error::InvalidParams(format!("need mean degree d >= 1 (got {d})")));
    }
    if !(lambda >= 0.0) {
        return Err(Error::InvalidParams(format!("need lambda >= 0 (got {lambda})")));
    }
    if !(mu >= 0.0) {
        return Err(Error::InvalidParams(format!("need mu >= 0 (got {mu})")));
    }
    let sqrt_d = d.sqrt();
    if lambda > sqrt_d {
        return Err(Error::InvalidParams(format!(
            "lambda = {lambda} exceeds sqrt(d) = {sqrt_d}; c_out would be negative"
        )));
    }
    let c_in = d + lambda * sqrt_d;
    let c_out = d - lambda * sqrt_d;
    if c_in > n as f64 {
        return Err(Error::InvalidParams(format!(
            "c_in = {c_in} exceeds n = {n}; edge probability above one"
        )));
    }
    Ok(ModelParams {
        n,
        p,
        d,
        lambda,
        mu,
        gamma: n as f64 / p as f64,
        c_in,
        c_out,
    })
}

/// Ground-truth latent variables of one instance.
///
/// Labels are uniform in `{+1, -1}`; `u` has i.i.d. mean-zero coordinates of
/// variance `1/p` (so `E||u||^2 = 1`), not renormalized.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Latents {
    pub v: Vec<i8>,
    pub u: Vec<f64>,
}

/// Dense `p x n` covariate matrix, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovMatrix {
    pub p: usize,
    pub n: usize,
    /// Row-major entries, `data[q * n + i] = B[q][i]`.
    pub data: Vec<f64>,
}

impl CovMatrix {
    pub fn row(&self, q: usize) -> &[f64] {
        &self.data[q * self.n..(q + 1) * self.n]
    }

    /// `B * x` (length `p`), for `x` of length `n`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.n);
        (0..self.p).map(|q| dot(self.row(q), x)).collect()
    }

    /// `B^T * y` (length `n`), for `y` of length `p`.
    pub fn apply_t(&self, y: &[f64]) -> Vec<f64> {
        debug_assert_eq!(y.len(), self.p);
        let mut out = vec![0.0; self.n];
        for (q, &yq) in y.iter().enumerate() {
            if yq == 0.0 {
                continue;
            }
            axpy(&mut out, yq, self.row(q));
        }
        out
    }

    /// Per-row sums of squared entries, `s[q] = sum_i B[q][i]^2`.
    pub fn row_sq_sums(&self) -> Vec<f64> {
        (0..self.p).map(|q| dot(self.row(q), self.row(q))).collect()
    }

    /// `sum_q B[q][i]^2 * w[q]` for every column `i`.
    pub fn weighted_col_sq_sums(&self, w: &[f64]) -> Vec<f64> {
        debug_assert_eq!(w.len(), self.p);
        let mut out = vec![0.0; self.n];
        for (q, &wq) in w.iter().enumerate() {
            for (o, b) in out.iter_mut().zip(self.row(q)) {
                *o += wq * b * b;
            }
        }
        out
    }

    /// `sum_i B[q][i]^2 * w[i]` for every row `q`.
    pub fn row_sq_sums_weighted_cols(&self, w: &[f64]) -> Vec<f64> {
        debug_assert_eq!(w.len(), self.n);
        (0..self.p)
            .map(|q| self.row(q).iter().zip(w).map(|(b, wi)| b * b * wi).sum())
            .collect()
    }
}

/// Dense symmetric `n x n` matrix, stored row-major in full.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix {
    pub n: usize,
    pub data: Vec<f64>,
}

impl SymMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.n);
        (0..self.n).map(|i| dot(&self.data[i * self.n..(i + 1) * self.n], x)).collect()
    }
}

/// One sampled sparse instance: graph, covariates, and ground truth.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Instance {
    pub params: ModelParams,
    pub seed: u64,
    pub graph: Graph,
    pub covariates: CovMatrix,
    pub truth: Latents,
}

/// One sampled Gaussian-surrogate instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaussianInstance {
    pub params: ModelParams,
    pub seed: u64,
    pub matrix_a: SymMatrix,
    pub covariates: CovMatrix,
    pub truth: Latents,
}

fn sample_labels(n: usize, seed: u64) -> Vec<i8> {
    let mut rng = stream_rng(seed, STREAM_LABELS);
    (0..n).map(|_| if rng.gen::<bool>() { 1i8 } else { -1i8 }).collect()
}

fn sample_u(p: usize, seed: u64) -> Vec<f64> {
    let mut rng = stream_rng(seed, STREAM_LATENT_U);
    let scale = 1.0 / (p as f64).sqrt();
    (0..p).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Covariate matrix `B[q][i] = sqrt(mu/n) v_i u_q + Z[q][i] / sqrt(p)`.
///
/// Each row draws from its own RNG stream so rows can be (re)generated in
/// any order.
fn sample_covariates(params: &ModelParams, seed: u64, v: &[i8], u: &[f64]) -> CovMatrix {
    let (n, p) = (params.n, params.p);
    let signal = (params.mu / n as f64).sqrt();
    let noise = 1.0 / (p as f64).sqrt();
    let mut data = vec![0.0; p * n];
    for (q, row) in data.chunks_mut(n).enumerate() {
        let mut rng = stream_rng(seed, COV_NOISE_BASE + q as u64);
        let su = signal * u[q];
        for (i, cell) in row.iter_mut().enumerate() {
            *cell = su * v[i] as f64 + noise * rng.sample::<f64, _>(StandardNormal);
        }
    }
    CovMatrix { p, n, data }
}

/// Emits the `k`-th pair `(a, b)`, `a < b`, in the row-by-row enumeration of
/// unordered pairs of `0..m`.
fn unrank_pair(m: u64, k: u64) -> (u64, u64) {
    // Row `a` starts at offset a*(2m - a - 1)/2; invert by quadratic formula
    // and correct for float rounding.
    let off = |a: u64| a * (2 * m - a - 1) / 2;
    let fm = 2.0 * m as f64 - 1.0;
    let mut a = ((fm - (fm * fm - 8.0 * k as f64).max(0.0).sqrt()) / 2.0).floor() as u64;
    a = a.min(m - 2);
    while off(a) > k {
        a -= 1;
    }
    while a < m - 2 && off(a + 1) <= k {
        a += 1;
    }
    let b = a + 1 + (k - off(a));
    (a, b)
}

/// Bernoulli(p) subset of `0..total` by geometric skipping, O(hits) expected.
fn skip_sample(total: u64, prob: f64, rng: &mut impl Rng, mut emit: impl FnMut(u64)) {
    if total == 0 || prob <= 0.0 {
        return;
    }
    if prob >= 1.0 {
        for k in 0..total {
            emit(k);
        }
        return;
    }
    let geo = Geometric::new(prob).expect("probability in (0,1)");
    let mut pos: u64 = 0;
    loop {
        let skip = geo.sample(rng);
        pos = match pos.checked_add(skip) {
            Some(x) => x,
            None => return,
        };
        if pos >= total {
            return;
        }
        emit(pos);
        pos += 1;
    }
}

/// Samples the sparse instance: every unordered pair is connected
/// independently with probability `c_in/n` (equal labels) or `c_out/n`
/// (opposite labels), and covariates carry the label signal.
pub fn sample_contextual(params: &ModelParams, seed: u64) -> Instance {
    let n = params.n;
    let v = sample_labels(n, seed);
    let u = sample_u(params.p, seed);

    let plus: Vec<u32> = (0..n as u32).filter(|&i| v[i as usize] > 0).collect();
    let minus: Vec<u32> = (0..n as u32).filter(|&i| v[i as usize] < 0).collect();
    let p_in = params.c_in / n as f64;
    let p_out = params.c_out / n as f64;

    let mut rng = stream_rng(seed, STREAM_EDGES);
    let mut edges: Vec<(u32, u32)> = Vec::with_capacity((params.d * n as f64 / 2.0 * 1.3) as usize);
    for block in [&plus, &minus] {
        let m = block.len() as u64;
        if m >= 2 {
            skip_sample(m * (m - 1) / 2, p_in, &mut rng, |k| {
                let (a, b) = unrank_pair(m, k);
                let (x, y) = (block[a as usize], block[b as usize]);
                edges.push((x.min(y), x.max(y)));
            });
        }
    }
    let (mp, mm) = (plus.len() as u64, minus.len() as u64);
    if mp > 0 && mm > 0 {
        skip_sample(mp * mm, p_out, &mut rng, |k| {
            let (x, y) = (plus[(k / mm) as usize], minus[(k % mm) as usize]);
            edges.push((x.min(y), x.max(y)));
        });
    }
    edges.sort_unstable();
    edges.dedup();

    let covariates = sample_covariates(params, seed, &v, &u);
    Instance {
        params: *params,
        seed,
        graph: Graph::from_edges(n, edges),
        covariates,
        truth: Latents { v, u },
    }
}

/// Reference O(n^2) sampler used to cross-check the skip sampler.
#[doc(hidden)]
pub fn sample_contextual_naive(params: &ModelParams, seed: u64) -> Instance {
    let n = params.n;
    let v = sample_labels(n, seed);
    let u = sample_u(params.p, seed);
    let mut rng = stream_rng(seed, STREAM_EDGES);
    let mut edges = Vec::new();
    for i in 0..n as u32 {
        for j in (i + 1)..n as u32 {
            let prob = if v[i as usize] == v[j as usize] {
                params.c_in / n as f64
            } else {
                params.c_out / n as f64
            };
            if rng.gen::<f64>() < prob {
                edges.push((i, j));
            }
        }
    }
    let covariates = sample_covariates(params, seed, &v, &u);
    Instance {
        params: *params,
        seed,
        graph: Graph::from_edges(n, edges),
        covariates,
        truth: Latents { v, u },
    }
}

/// Samples the Gaussian surrogate: `A = lambda v v^T / n` plus symmetric
/// noise of variance `1/n` off the diagonal and `2/n` on it; covariates as
/// in the sparse model. `d` is ignored.
pub fn sample_gaussian(params: &ModelParams, seed: u64) -> GaussianInstance {
    let n = params.n;
    let v = sample_labels(n, seed);
    let u = sample_u(params.p, seed);

    let mut rng = stream_rng(seed, STREAM_GAUSS_NOISE);
    let sig = params.lambda / n as f64;
    let sd_off = (1.0 / n as f64).sqrt();
    let sd_diag = (2.0 / n as f64).sqrt();
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let mean = sig * (v[i] * v[j]) as f64;
            let sd = if i == j { sd_diag } else { sd_off };
            let a = mean + sd * rng.sample::<f64, _>(StandardNormal);
            data[i * n + j] = a;
            data[j * n + i] = a;
        }
    }

    let covariates = sample_covariates(params, seed, &v, &u);
    GaussianInstance {
        params: *params,
        seed,
        matrix_a: SymMatrix { n, data },
        covariates,
        truth: Latents { v, u },
    }
}

/// On-disk container format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Bin,
}

impl std::str::FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "bin" => Ok(Format::Bin),
            other => Err(Error::Config(format!("unknown format `{other}` (expected json|bin)"))),
        }
    }
}

const BIN_MAGIC: &[u8; 4] = b"CSBM";
const BIN_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    schema: String,
    kind: String,
    params: ModelParams,
    seed: u64,
    edges: Option<Vec<(u32, u32)>>,
    matrix_a: Option<Vec<f64>>,
    /// Row-major `p x n`.
    b: Vec<f64>,
    v: Vec<i8>,
    u: Vec<f64>,
}

fn write_common<W: Write>(
    w: &mut W,
    kind: u8,
    params: &ModelParams,
    seed: u64,
    truth: &Latents,
) -> Result<()> {
    w.write_all(BIN_MAGIC)?;
    w.write_u32::<LittleEndian>(BIN_VERSION)?;
    w.write_u8(kind)?;
    w.write_u64::<LittleEndian>(params.n as u64)?;
    w.write_u64::<LittleEndian>(params.p as u64)?;
    w.write_f64::<LittleEndian>(params.d)?;
    w.write_f64::<LittleEndian>(params.lambda)?;
    w.write_f64::<LittleEndian>(params.mu)?;
    w.write_u64::<LittleEndian>(seed)?;
    for &x in &truth.v {
        w.write_i8(x)?;
    }
    for &x in &truth.u {
        w.write_f64::<LittleEndian>(x)?;
    }
    Ok(())
}

struct CommonHeader {
    kind: u8,
    params: ModelParams,
    seed: u64,
    truth: Latents,
}

fn read_common<R: Read>(r: &mut R) -> Result<CommonHeader> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != BIN_MAGIC {
        return Err(Error::Schema("bad magic; not a csbm instance file".into()));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != BIN_VERSION {
        return Err(Error::Schema(format!("unsupported instance file version {version}")));
    }
    let kind = r.read_u8()?;
    let n = r.read_u64::<LittleEndian>()? as usize;
    let p = r.read_u64::<LittleEndian>()? as usize;
    let d = r.read_f64::<LittleEndian>()?;
    let lambda = r.read_f64::<LittleEndian>()?;
    let mu = r.read_f64::<LittleEndian>()?;
    let params = derive_params(n, p, d, lambda, mu)?;
    let seed = r.read_u64::<LittleEndian>()?;
    let mut v = vec![0i8; n];
    for x in &mut v {
        *x = r.read_i8()?;
    }
    let mut u = vec![0.0; p];
    for x in &mut u {
        *x = r.read_f64::<LittleEndian>()?;
    }
    Ok(CommonHeader { kind, params, seed, truth: Latents { v, u } })
}

impl Instance {
    pub fn save<W: Write>(&self, w: &mut W, format: Format) -> Result<()> {
        match format {
            Format::Json => {
                let file = InstanceFile {
                    schema: "csbm-instance v1".into(),
                    kind: "contextual".into(),
                    params: self.params,
                    seed: self.seed,
                    edges: Some(self.graph.edges().to_vec()),
                    matrix_a: None,
                    b: self.covariates.data.clone(),
                    v: self.truth.v.clone(),
                    u: self.truth.u.clone(),
                };
                serde_json::to_writer(w, &file)?;
            }
            Format::Bin => {
                write_common(w, 0, &self.params, self.seed, &self.truth)?;
                w.write_u64::<LittleEndian>(self.graph.num_edges() as u64)?;
                for &(a, b) in self.graph.edges() {
                    w.write_u32::<LittleEndian>(a)?;
                    w.write_u32::<LittleEndian>(b)?;
                }
                for &x in &self.covariates.data {
                    w.write_f64::<LittleEndian>(x)?;
                }
            }
        }
        Ok(())
    }

    pub fn load<R: Read>(r: &mut R, format: Format) -> Result<Self> {
        match format {
            Format::Json => {
                let file: InstanceFile = serde_json::from_reader(r)?;
                if file.kind != "contextual" {
                    return Err(Error::Schema(format!(
                        "expected a contextual instance, found kind `{}`",
                        file.kind
                    )));
                }
                let edges = file
                    .edges
                    .ok_or_else(|| Error::Schema("contextual instance lacks edge list".into()))?;
                Ok(Instance {
                    params: file.params,
                    seed: file.seed,
                    graph: Graph::from_edges(file.params.n, edges),
                    covariates: CovMatrix { p: file.params.p, n: file.params.n, data: file.b },
                    truth: Latents { v: file.v, u: file.u },
                })
            }
            Format::Bin => {
                let h = read_common(r)?;
                if h.kind != 0 {
                    return Err(Error::Schema("expected a contextual instance".into()));
                }
                let ne = r.read_u64::<LittleEndian>()? as usize;
                let mut edges = Vec::with_capacity(ne);
                for _ in 0..ne {
                    let a = r.read_u32::<LittleEndian>()?;
                    let b = r.read_u32::<LittleEndian>()?;
                    edges.push((a, b));
                }
                let mut data = vec![0.0; h.params.p * h.params.n];
                for x in &mut data {
                    *x = r.read_f64::<LittleEndian>()?;
                }
                Ok(Instance {
                    params: h.params,
                    seed: h.seed,
                    graph: Graph::from_edges(h.params.n, edges),
                    covariates: CovMatrix { p: h.params.p, n: h.params.n, data },
                    truth: h.truth,
                })
            }
        }
    }
}

impl GaussianInstance {
    pub fn save<W: Write>(&self, w: &mut W, format: Format) -> Result<()> {
        match format {
            Format::Json => {
                let file = InstanceFile {
                    schema: "csbm-instance v1".into(),
                    kind: "gaussian".into(),
                    params: self.params,
                    seed: self.seed,
                    edges: None,
                    matrix_a: Some(self.matrix_a.data.clone()),
                    b: self.covariates.data.clone(),
                    v: self.truth.v.clone(),
                    u: self.truth.u.clone(),
                };
                serde_json::to_writer(w, &file)?;
            }
            Format::Bin => {
                write_common(w, 1, &self.params, self.seed, &self.truth)?;
                for &x in &self.matrix_a.data {
                    w.write_f64::<LittleEndian>(x)?;
                }
                for &x in &self.covariates.data {
                    w.write_f64::<LittleEndian>(x)?;
                }
            }
        }
        Ok(())
    }

    pub fn load<R: Read>(r: &mut R, format: Format) -> Result<Self> {
        match format {
            Format::Json => {
                let file: InstanceFile = serde_json::from_reader(r)?;
                if file.kind != "gaussian" {
                    return Err(Error::Schema(format!(
                        "expected a gaussian instance, found kind `{}`",
                        file.kind
                    )));
                }
                let a = file
                    .matrix_a
                    .ok_or_else(|| Error::Schema("gaussian instance lacks matrix_a".into()))?;
                Ok(GaussianInstance {
                    params: file.params,
                    seed: file.seed,
                    matrix_a: SymMatrix { n: file.params.n, data: a },
                    covariates: CovMatrix { p: file.params.p, n: file.params.n, data: file.b },
                    truth: Latents { v: file.v, u: file.u },
                })
            }
            Format::Bin => {
                let h = read_common(r)?;
                if h.kind != 1 {
                    return Err(Error::Schema("expected a gaussian instance".into()));
                }
                let n = h.params.n;
                let mut a = vec![0.0; n * n];
                for x in &mut a {
                    *x = r.read_f64::<LittleEndian>()?;
                }
                let mut data = vec![0.0; h.params.p * n];
                for x in &mut data {
                    *x = r.read_f64::<LittleEndian>()?;
                }
                Ok(GaussianInstance {
                    params: h.params,
                    seed: h.seed,
                    matrix_a: SymMatrix { n, data: a },
                    covariates: CovMatrix { p: h.params.p, n, data },
                    truth: h.truth,
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derive_params_examples() {
        let p = derive_params(800, 1000, 5.0, 1.0, 1.0).unwrap();
        assert!((p.gamma - 0.8).abs() < 1e-15);
        assert!((p.c_in - 7.23607).abs() < 1e-5);
        assert!((p.c_out - 2.76393).abs() < 1e-5);

        let p = derive_params(100, 100, 4.0, 0.0, 0.0).unwrap();
        assert_eq!(p.c_in, 4.0);
        assert_eq!(p.c_out, 4.0);

        assert!(derive_params(100, 100, 4.0, 3.0, 0.0).is_err());
        assert!(derive_params(1, 100, 4.0, 1.0, 0.0).is_err());
        // c_in > n: d alone already too large for a tiny graph.
        assert!(derive_params(3, 100, 4.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn unrank_pair_enumerates_all() {
        let m = 7u64;
        let mut seen = Vec::new();
        for k in 0..m * (m - 1) / 2 {
            seen.push(unrank_pair(m, k));
        }
        let mut expect = Vec::new();
        for a in 0..m {
            for b in (a + 1)..m {
                expect.push((a, b));
            }
        }
        assert_eq!(seen, expect);
    }

    #[test]
    fn mean_degree_matches_erdos_renyi() {
        // lambda = 0, mu = 0: plain G(n, d/n); mean degree 5 +- 0.2 covers
        // three sigmas of the empirical mean at n = 10000.
        let params = derive_params(10_000, 10, 5.0, 0.0, 0.0).unwrap();
        let inst = sample_contextual(&params, 11);
        let mean_deg = 2.0 * inst.graph.num_edges() as f64 / params.n as f64;
        assert!((mean_deg - 5.0).abs() < 0.2, "mean degree {mean_deg}");
    }

    #[test]
    fn covariate_norms_pure_noise() {
        // mu = 0: column norms average E||Z_i||^2 / p = 1.
        let params = derive_params(400, 600, 5.0, 0.0, 0.0).unwrap();
        let inst = sample_contextual(&params, 3);
        let mut acc = 0.0;
        for i in 0..params.n {
            let mut s = 0.0;
            for q in 0..params.p {
                let b = inst.covariates.data[q * params.n + i];
                s += b * b;
            }
            acc += s;
        }
        let mean = acc / params.n as f64;
        assert!((mean - 1.0).abs() < 0.05, "mean column norm^2 {mean}");
    }

    #[test]
    fn deterministic_given_seed() {
        let params = derive_params(300, 200, 5.0, 0.8, 0.7).unwrap();
        let a = sample_contextual(&params, 99);
        let b = sample_contextual(&params, 99);
        assert_eq!(a.graph.edges(), b.graph.edges());
        assert_eq!(a.covariates.data, b.covariates.data);
        assert_eq!(a.truth.v, b.truth.v);
        assert_eq!(a.truth.u, b.truth.u);
        let c = sample_contextual(&params, 100);
        assert_ne!(a.graph.edges(), c.graph.edges());
    }

    #[test]
    fn edge_counts_match_blocks() {
        // Within- and across-community edge counts stay within 4 sigma of
        // their binomial expectations.
        let params = derive_params(5000, 10, 5.0, 1.5, 0.0).unwrap();
        let inst = sample_contextual(&params, 5);
        let v = &inst.truth.v;
        let (mut within, mut across) = (0u64, 0u64);
        for &(a, b) in inst.graph.edges() {
            if v[a as usize] == v[b as usize] {
                within += 1;
            } else {
                across += 1;
            }
        }
        let np = v.iter().filter(|&&x| x > 0).count() as f64;
        let nm = params.n as f64 - np;
        let pairs_within = np * (np - 1.0) / 2.0 + nm * (nm - 1.0) / 2.0;
        let pairs_across = np * nm;
        let (pi, po) = (params.c_in / params.n as f64, params.c_out / params.n as f64);
        let (mu_w, sd_w) = (pairs_within * pi, (pairs_within * pi * (1.0 - pi)).sqrt());
        let (mu_a, sd_a) = (pairs_across * po, (pairs_across * po * (1.0 - po)).sqrt());
        assert!((within as f64 - mu_w).abs() < 4.0 * sd_w, "within {within} vs {mu_w}");
        assert!((across as f64 - mu_a).abs() < 4.0 * sd_a, "across {across} vs {mu_a}");
    }

    #[test]
    fn covariate_signal_strength() {
        // mean_i v_i <b_i, u> / ||u||^2 estimates sqrt(mu/n).
        let params = derive_params(2000, 500, 5.0, 0.0, 1.0).unwrap();
        let inst = sample_contextual(&params, 17);
        let u = &inst.truth.u;
        let unorm2: f64 = u.iter().map(|x| x * x).sum();
        let mut vals = Vec::with_capacity(params.n);
        for i in 0..params.n {
            let mut dot = 0.0;
            for q in 0..params.p {
                dot += inst.covariates.data[q * params.n + i] * u[q];
            }
            vals.push(inst.truth.v[i] as f64 * dot / unorm2);
        }
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (vals.len() - 1) as f64;
        let se = (var / vals.len() as f64).sqrt();
        let expect = (params.mu / params.n as f64).sqrt();
        assert!((mean - expect).abs() < 4.0 * se, "signal {mean} vs {expect} (se {se})");
    }

    #[test]
    fn skip_sampler_agrees_with_naive_rates() {
        let params = derive_params(600, 10, 6.0, 1.2, 0.0).unwrap();
        let fast: f64 = (0..40)
            .map(|s| sample_contextual(&params, s).graph.num_edges() as f64)
            .sum::<f64>()
            / 40.0;
        let naive: f64 = (0..40)
            .map(|s| sample_contextual_naive(&params, 1000 + s).graph.num_edges() as f64)
            .sum::<f64>()
            / 40.0;
        // Both estimate the same expected edge count ~ n*d/2; binomial sd of
        // each 40-sample mean is about sqrt(1800/40) ~ 6.7.
        assert!((fast - naive).abs() < 40.0, "fast {fast} naive {naive}");
    }

    #[test]
    fn gaussian_noise_statistics() {
        let params = derive_params(2000, 2000, 5.0, 0.0, 0.0).unwrap();
        let inst = sample_gaussian(&params, 23);
        let n = params.n;
        // Off-diagonal mean: entries are N(0, 1/n); the mean over ~n^2/2
        // entries has sd = sqrt(1/n) / sqrt(n(n-1)/2); scaled by n below.
        let mut acc = 0.0;
        let mut count = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                acc += inst.matrix_a.get(i, j);
                count += 1.0;
            }
        }
        let mean_scaled = n as f64 * acc / count;
        let sd_scaled = n as f64 * (1.0 / n as f64).sqrt() / count.sqrt();
        assert!(mean_scaled.abs() < 3.0 * sd_scaled, "{mean_scaled} vs 3sd {sd_scaled}");
        assert!(mean_scaled.abs() < 0.07);

        // Diagonal variance ~ 2/n.
        let var_diag: f64 =
            (0..n).map(|i| inst.matrix_a.get(i, i).powi(2)).sum::<f64>() / n as f64;
        assert!((n as f64 * var_diag - 2.0).abs() < 0.3, "n*var {}", n as f64 * var_diag);

        // Exact symmetry by construction.
        for i in 0..50 {
            for j in 0..50 {
                assert_eq!(inst.matrix_a.get(i, j), inst.matrix_a.get(j, i));
            }
        }
    }

    #[test]
    fn roundtrip_serialization() {
        let params = derive_params(40, 30, 4.0, 1.0, 0.5).unwrap();
        let inst = sample_contextual(&params, 7);
        for format in [Format::Json, Format::Bin] {
            let mut buf = Vec::new();
            inst.save(&mut buf, format).unwrap();
            let back = Instance::load(&mut buf.as_slice(), format).unwrap();
            assert_eq!(back.graph.edges(), inst.graph.edges());
            assert_eq!(back.covariates.data, inst.covariates.data);
            assert_eq!(back.truth.v, inst.truth.v);
            assert_eq!(back.seed, inst.seed);
        }

        let ginst = sample_gaussian(&params, 8);
        for format in [Format::Json, Format::Bin] {
            let mut buf = Vec::new();
            ginst.save(&mut buf, format).unwrap();
            let back = GaussianInstance::load(&mut buf.as_slice(), format).unwrap();
            assert_eq!(back.matrix_a.data, ginst.matrix_a.data);
            assert_eq!(back.covariates.data, ginst.covariates.data);
        }
    }

    #[test]
    fn serialized_bytes_deterministic() {
        let params = derive_params(50, 40, 4.0, 0.5, 0.5).unwrap();
        let mut a = Vec::new();
        let mut b = Vec::new();
        sample_contextual(&params, 1).save(&mut a, Format::Bin).unwrap();
        sample_contextual(&params, 1).save(&mut b, Format::Bin).unwrap();
        assert_eq!(a, b);
    }
}
