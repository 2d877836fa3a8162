//! Central finite-difference gradient checking.
//!
//! Test support shared by this crate and the learner crate. The oracle only
//! evaluates forward passes, so it stays independent of the backward rules
//! it is used to audit.

use rand::{Rng, SeedableRng};

use crate::graph::Graph;
use crate::params::{ParamId, ParamStore};
use crate::sparse::SparseRows;
use crate::tensor::Tensor;
use crate::NodeId;

/// Step used by [`finite_difference`] unless a caller picks its own.
pub const FD_STEP: f64 = 1e-3;

/// Numerical gradient of `loss` with respect to every entry of `ids`.
pub fn finite_difference<F>(store: &ParamStore<f64>, ids: &[ParamId], h: f64, loss: F) -> Vec<Tensor<f64>>
where
    F: Fn(&ParamStore<f64>) -> f64,
{
    let mut probe = store.clone();
    ids.iter()
        .map(|&id| {
            let n = probe.value(id).len();
            let mut grad = Tensor::zeros(probe.value(id).shape().to_vec());
            for i in 0..n {
                let orig = probe.value(id).data()[i];
                probe.value_mut(id).data_mut()[i] = orig + h;
                let plus = loss(&probe);
                probe.value_mut(id).data_mut()[i] = orig - h;
                let minus = loss(&probe);
                probe.value_mut(id).data_mut()[i] = orig;
                grad.data_mut()[i] = (plus - minus) / (2.0 * h);
            }
            grad
        })
        .collect()
}

/// `max |a - n| / max(1, max |n|)`: relative to the gradient scale, absolute
/// for gradients below unit magnitude.
pub fn relative_error(analytic: &Tensor<f64>, numeric: &Tensor<f64>) -> f64 {
    let scale = numeric
        .data()
        .iter()
        .fold(1.0f64, |m, x| m.max(x.abs()));
    analytic
        .data()
        .iter()
        .zip(numeric.data())
        .map(|(a, n)| (a - n).abs())
        .fold(0.0, f64::max)
        / scale
}

/// Compares backward-pass gradients against finite differences for every
/// parameter in `store`. Returns the worst relative error.
pub fn check<F>(store: &ParamStore<f64>, build: F) -> f64
where
    F: for<'p> Fn(&mut Graph<'p, f64>, &'p ParamStore<f64>) -> NodeId,
{
    let ids: Vec<ParamId> = store.ids().collect();
    let grads = {
        let mut g = Graph::new();
        let loss = build(&mut g, store);
        g.backward(loss).expect("scalar loss")
    };
    let numeric = finite_difference(store, &ids, FD_STEP, |s| {
        let mut g = Graph::new();
        let loss = build(&mut g, s);
        g.value(loss).data()[0]
    });
    ids.iter()
        .zip(&numeric)
        .map(|(&id, n)| relative_error(&grads.get_or_zeros(id, store), n))
        .fold(0.0, f64::max)
}

/// Dimensions and constants of one randomly generated graph.
#[derive(Clone, Debug)]
pub struct RandomGraph {
    pub store: ParamStore<f64>,
    softmax_axis: usize,
    slice_start: usize,
    slice_len: usize,
    gather_index: Vec<usize>,
    weights_sm: Tensor<f64>,
    weights_rs: Tensor<f64>,
    target: Tensor<f64>,
    scale: f64,
    sparse: SparseRows<f64>,
    sparse_start: usize,
}

fn rand_tensor(rng: &mut impl Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(lo..hi)).collect()).unwrap()
}

/// Values in `[-1, -0.1] U [0.1, 1]`, so a finite-difference step never
/// crosses the kink of ReLU or abs.
fn kink_safe(rng: &mut impl Rng, shape: &[usize]) -> Tensor<f64> {
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            let m = rng.gen_range(0.1..1.0);
            if rng.gen_bool(0.5) {
                m
            } else {
                -m
            }
        })
        .collect();
    Tensor::new(shape.to_vec(), data).unwrap()
}

impl RandomGraph {
    /// A small graph using every op kind, including products with a sparse
    /// constant, with sizes and values drawn from `seed`.
    pub fn generate(seed: u64) -> Self {
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        let b = rng.gen_range(1..=3);
        let m = rng.gen_range(1..=4);
        let n = rng.gen_range(2..=4);
        let k = rng.gen_range(1..=3);
        let mut store = ParamStore::new();
        store.add("x", rand_tensor(&mut rng, &[b, m], -1.0, 1.0)).unwrap();
        store.add("w", rand_tensor(&mut rng, &[m, n], -1.0, 1.0)).unwrap();
        store.add("bias", rand_tensor(&mut rng, &[n], -0.5, 0.5)).unwrap();
        store.add("kink", kink_safe(&mut rng, &[b, n])).unwrap();
        store.add("left", rand_tensor(&mut rng, &[b, m, n], -1.0, 1.0)).unwrap();
        store.add("right", rand_tensor(&mut rng, &[b, n, k], -1.0, 1.0)).unwrap();
        let slice_len = rng.gen_range(1..=2 * n);
        let slice_start = rng.gen_range(0..=2 * n - slice_len);
        let mut sparse_rows = Vec::with_capacity(b + 1);
        for _ in 0..=b {
            let mut row = Vec::new();
            for c in 0..m {
                if rng.gen_bool(0.5) {
                    row.push((c, rng.gen_range(-1.0..1.0)));
                }
            }
            sparse_rows.push(row);
        }
        Self {
            softmax_axis: rng.gen_range(0..2),
            slice_start,
            slice_len,
            gather_index: (0..b).map(|_| rng.gen_range(0..k)).collect(),
            weights_sm: rand_tensor(&mut rng, &[b, n], -1.0, 1.0),
            weights_rs: rand_tensor(&mut rng, &[b * slice_len], -1.0, 1.0),
            target: rand_tensor(&mut rng, &[b], -1.0, 1.0),
            scale: rng.gen_range(0.5..2.0),
            sparse_start: rng.gen_range(0..=1),
            sparse: SparseRows::from_rows(m, sparse_rows).unwrap(),
            store,
        }
    }

    /// Builds the loss on `g` with parameters read from `store` (same layout
    /// as `self.store`).
    pub fn build<'p>(&self, g: &mut Graph<'p, f64>, store: &'p ParamStore<f64>) -> NodeId {
        let p = |name: &str| store.find(name).unwrap();
        let x = g.param(store, p("x"));
        let w = g.param(store, p("w"));
        let bias = g.param(store, p("bias"));
        let kink = g.param(store, p("kink"));
        let left = g.param(store, p("left"));
        let right = g.param(store, p("right"));

        let h = g.matmul(x, w).unwrap();
        let h = g.add(h, bias).unwrap();
        let h = g.sub(h, kink).unwrap();
        let e = g.elu(h);
        let s = g.sigmoid(h);
        let t = g.tanh(h);
        let r = g.relu(kink);
        let a = g.abs(kink);
        let y = g.mul(e, s).unwrap();
        let y = g.add(y, t).unwrap();
        let y = g.mul(y, r).unwrap();
        let y = g.add(y, a).unwrap();

        let sm = g.softmax(y, self.softmax_axis).unwrap();
        let ls = g.log_softmax(y, 1 - self.softmax_axis).unwrap();
        let wsm = g.constant(self.weights_sm.clone());
        let weighted = g.mul(sm, wsm).unwrap();
        let cat = g.concat(&[weighted, ls], 1).unwrap();
        let sl = g.slice(cat, 1, self.slice_start, self.slice_len).unwrap();
        let flat = g.reshape(sl, [self.slice_len * self.store.value(p("x")).shape()[0]]).unwrap();
        let wrs = g.constant(self.weights_rs.clone());
        let flat = g.mul(flat, wrs).unwrap();
        let term1 = g.sum_all(flat);

        let bm = g.batch_matmul(left, right).unwrap();
        let summed = g.sum_axis(bm, 1).unwrap();
        let picked = g.gather(summed, self.gather_index.clone()).unwrap();
        let picked = g.scale(picked, self.scale);
        let target = g.constant(self.target.clone());
        let term2 = g.mse(picked, target).unwrap();

        // Row slice of a sparse constant times a parameter: the sparse path.
        let sp = g.sparse_constant(self.sparse.clone());
        let rows = g.slice(sp, 0, self.sparse_start, self.sparse.rows() - 1).unwrap();
        let projected = g.matmul(rows, w).unwrap();
        let projected = g.tanh(projected);
        let term3 = g.sum_all(projected);

        let total = g.add(term1, term2).unwrap();
        g.add(total, term3).unwrap()
    }

    /// Worst relative error between backward and finite differences.
    pub fn max_relative_error(&self) -> f64 {
        check(&self.store, |g, s| self.build(g, s))
    }
}
