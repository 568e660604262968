//! Per-prompt feed-forward baseline: a fresh one-hidden-layer ReLU network is
//! trained from scratch by full-batch Adam on the labeled prefix, then asked
//! to classify the query. Nothing is meta-learned; every prompt gets its own
//! randomly initialized network.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bits::BitVec;
use crate::nn::{Adam, Graph, ParamSet, Tensor};
use crate::{Error, Result};

/// Hidden widths explored when tuning the baseline.
pub const FFN_WIDTH_GRID: [usize; 3] = [100, 500, 1000];
/// Learning rates explored when tuning the baseline.
pub const FFN_LR_GRID: [f64; 3] = [1e-2, 1e-3, 1e-4];

#[derive(Clone, Debug)]
pub struct FfnConfig {
    pub width: usize,
    pub lr: f64,
    pub max_steps: usize,
    /// Stop early once the training cross-entropy falls below this.
    pub tol: f64,
}

impl Default for FfnConfig {
    fn default() -> Self {
        Self { width: 500, lr: 1e-2, max_steps: 1200, tol: 1e-4 }
    }
}

/// A trained per-prompt network. Inputs are presented in ±1 encoding.
pub struct FfnNet {
    n: usize,
    params: ParamSet<f32>,
}

/// Bits to a ±1-encoded row-major matrix `[count, n]`.
fn signed_matrix(xs: &[BitVec], n: usize) -> Result<Tensor<f32>> {
    let mut t = Tensor::zeros(&[xs.len(), n]);
    let data = t.data_mut();
    for (r, x) in xs.iter().enumerate() {
        if x.len() != n {
            return Err(Error::DimMismatch { expected: n, got: x.len() });
        }
        for (i, &bit) in x.bits().iter().enumerate() {
            data[r * n + i] = if bit == 1 { 1.0 } else { -1.0 };
        }
    }
    Ok(t)
}

/// Build the two-layer forward pass; returns the logits node plus the four
/// parameter leaves in `w1, b1, w2, b2` order for gradient collection.
fn logits_node(
    g: &mut Graph<f32>,
    params: &ParamSet<f32>,
    inputs: Tensor<f32>,
) -> Result<(crate::nn::NodeId, [crate::nn::NodeId; 4])> {
    let x = g.input(inputs);
    let w1 = g.param(params.get("w1")?);
    let b1 = g.param(params.get("b1")?);
    let w2 = g.param(params.get("w2")?);
    let b2 = g.param(params.get("b2")?);
    let h = g.matmul(x, w1)?;
    let h = g.add(h, b1)?;
    let h = g.relu(h);
    let y = g.matmul(h, w2)?;
    let logits = g.add(y, b2)?;
    Ok((logits, [w1, b1, w2, b2]))
}

impl FfnNet {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn predict(&self, query: &BitVec) -> u8 {
        self.predict_batch(std::slice::from_ref(query))[0]
    }

    pub fn predict_batch(&self, xs: &[BitVec]) -> Vec<u8> {
        let inputs = signed_matrix(xs, self.n).expect("query dimension matches training dimension");
        let mut g = Graph::new();
        let (logits, _) = logits_node(&mut g, &self.params, inputs).expect("parameter shapes fixed");
        let data = g.value(logits).data();
        (0..xs.len()).map(|r| u8::from(data[r * 2 + 1] > data[r * 2])).collect()
    }
}

/// Train a fresh network on the labeled prefix. Errors on an empty prefix.
pub fn ffn_gd_train(prefix: &[(BitVec, u8)], cfg: &FfnConfig, seed: u64) -> Result<FfnNet> {
    let first = prefix
        .first()
        .ok_or_else(|| Error::invalid("ffn baseline", "empty training prefix".to_string()))?;
    let n = first.0.len();
    let xs: Vec<BitVec> = prefix.iter().map(|(x, _)| x.clone()).collect();
    let ys: Vec<u8> = prefix.iter().map(|&(_, y)| y).collect();
    let inputs = signed_matrix(&xs, n)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params: ParamSet<f32> = ParamSet::new();
    params.xavier("w1", n, cfg.width, &mut rng)?;
    params.zeros("b1", &[cfg.width])?;
    params.xavier("w2", cfg.width, 2, &mut rng)?;
    params.zeros("b2", &[2])?;

    let mut opt = Adam::new(cfg.lr);
    for _ in 0..cfg.max_steps {
        let mut g = Graph::new();
        let (logits, ids) = logits_node(&mut g, &params, inputs.clone())?;
        let rows: Vec<usize> = (0..ys.len()).collect();
        let loss = g.cross_entropy(logits, rows, ys.clone())?;
        let value = f64::from(g.value(loss).item());
        if !value.is_finite() {
            return Err(Error::invalid("ffn baseline", "training loss diverged".to_string()));
        }
        if value < cfg.tol {
            break;
        }
        g.backward(loss)?;
        let mut grads = std::collections::HashMap::new();
        for (name, id) in ["w1", "b1", "w2", "b2"].iter().zip(&ids) {
            if let Some(grad) = g.grad(*id) {
                grads.insert((*name).to_string(), grad);
            }
        }
        opt.apply(&mut params, &grads)?;
    }
    Ok(FfnNet { n, params })
}

/// Train on the prefix, then classify one query. The empty prefix yields the
/// constant guess 0.
pub fn ffn_gd_baseline(prefix: &[(BitVec, u8)], query: &BitVec, cfg: &FfnConfig, seed: u64) -> u8 {
    if prefix.is_empty() {
        return 0;
    }
    let net = ffn_gd_train(prefix, cfg, seed).expect("nonempty prefix trains");
    net.predict(query)
}
