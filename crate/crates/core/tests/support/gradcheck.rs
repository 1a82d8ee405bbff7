//! Central finite-difference gradient checks for every layer type.

use losnet_core::nn::{
    gru_cell_step, gru_cell_step_backward, lstm_cell_step, lstm_cell_step_backward, Activation, Conv1dLayer, DenseLayer,
    GruCell, Layer, LayerOp, LstmCell, Padding, RecurrentCell, RecurrentLayer, SelfAttention,
};
use losnet_core::tensor::rng_normal;
use losnet_core::{Rng, Tensor};

pub const STEP: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;
/// Below this magnitude both values are treated as zero and compared absolutely.
const FLOOR: f64 = 1e-7;

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub label: String,
    pub cases: usize,
    pub compared: usize,
    pub max_rel_err: f64,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.max_rel_err <= TOLERANCE && self.cases >= 60
    }
}

pub fn rel_err(a: f64, n: f64) -> f64 {
    let d = (a - n).abs();
    let m = a.abs().max(n.abs());
    if m < FLOOR {
        d / FLOOR
    } else {
        d / m
    }
}

fn randn(rng: &mut Rng, shape: &[usize]) -> Tensor {
    rng_normal(rng, shape, 0.0, 1.0).unwrap()
}

fn dot(a: &Tensor, b: &Tensor) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

type Fwd<'a> = dyn Fn(&[Tensor], &Tensor) -> Tensor + 'a;
type Bwd<'a> = dyn Fn(&[Tensor], &Tensor, &Tensor) -> (Tensor, Vec<Tensor>) + 'a;

/// Loss `Σ out ⊙ P` for a random projection `P`; compares analytic gradients
/// w.r.t. the input and every parameter against central differences.
pub fn check(params: &[Tensor], x: &Tensor, fwd: &Fwd, bwd: &Bwd, rng: &mut Rng) -> (usize, f64) {
    let out = fwd(params, x);
    let proj = randn(rng, out.shape());
    let (dx, grads) = bwd(params, x, &proj);
    assert_eq!(dx.shape(), x.shape(), "input gradient shape");
    assert_eq!(grads.len(), params.len(), "parameter gradient count");
    let loss = |p: &[Tensor], xx: &Tensor| dot(&fwd(p, xx), &proj);
    let mut worst = 0.0f64;
    let mut n = 0;
    for i in 0..x.len() {
        let mut xp = x.clone();
        xp.data_mut()[i] += STEP;
        let mut xm = x.clone();
        xm.data_mut()[i] -= STEP;
        let fd = (loss(params, &xp) - loss(params, &xm)) / (2.0 * STEP);
        worst = worst.max(rel_err(dx.data()[i], fd));
        n += 1;
    }
    for (k, g) in grads.iter().enumerate() {
        assert_eq!(g.shape(), params[k].shape(), "gradient {k} shape");
        for i in 0..g.len() {
            let mut pp = params.to_vec();
            pp[k].data_mut()[i] += STEP;
            let mut pm = params.to_vec();
            pm[k].data_mut()[i] -= STEP;
            let fd = (loss(&pp, x) - loss(&pm, x)) / (2.0 * STEP);
            worst = worst.max(rel_err(g.data()[i], fd));
            n += 1;
        }
    }
    (n, worst)
}

/// Runs `layer`'s own forward/backward with parameters replaced by `params`.
fn with_params(layer: &Layer, params: &[Tensor]) -> Layer {
    let mut l = layer.clone();
    for (dst, src) in l.params_mut().into_iter().zip(params) {
        *dst = src.clone();
    }
    l
}

fn check_layers(layers: &[Layer], x: &Tensor, rng: &mut Rng) -> (usize, f64) {
    let counts: Vec<usize> = layers.iter().map(|l| l.params().len()).collect();
    let params: Vec<Tensor> = layers.iter().flat_map(|l| l.params().into_iter().cloned()).collect();
    let rebuild = |p: &[Tensor]| -> Vec<Layer> {
        let mut off = 0;
        layers
            .iter()
            .zip(&counts)
            .map(|(l, &c)| {
                let r = with_params(l, &p[off..off + c]);
                off += c;
                r
            })
            .collect()
    };
    let fwd = |p: &[Tensor], xx: &Tensor| {
        let mut h = xx.clone();
        for l in rebuild(p) {
            h = l.infer(&h).unwrap();
        }
        h
    };
    let bwd = |p: &[Tensor], xx: &Tensor, up: &Tensor| {
        let ls = rebuild(p);
        let mut h = xx.clone();
        let mut caches = vec![];
        for l in &ls {
            let (y, c) = l.forward(&h).unwrap();
            caches.push(c);
            h = y;
        }
        let mut g = up.clone();
        let mut all = vec![];
        for (l, c) in ls.iter().zip(&caches).rev() {
            let (dx, gr) = l.backward(c, &g).unwrap();
            all.push(gr);
            g = dx;
        }
        all.reverse();
        (g, all.into_iter().flatten().collect())
    };
    check(&params, x, &fwd, &bwd, rng)
}

fn gru(i: usize, h: usize, rng: &mut Rng) -> GruCell {
    let mut c = GruCell::init(i, h, rng).unwrap();
    for p in c.params_mut() {
        *p = rng_normal(rng, p.shape(), 0.0, 0.5).unwrap();
    }
    c
}

fn lstm(i: usize, h: usize, rng: &mut Rng) -> LstmCell {
    let mut c = LstmCell::init(i, h, rng).unwrap();
    for p in c.params_mut() {
        *p = rng_normal(rng, p.shape(), 0.0, 0.5).unwrap();
    }
    c
}

fn randomize_biases(layer: &mut Layer, rng: &mut Rng) {
    for p in layer.params_mut() {
        if p.rank() == 1 {
            *p = rng_normal(rng, p.shape(), 0.0, 0.5).unwrap();
        }
    }
}

/// One case of the named layer type. `shape` selects one of three size sets.
fn case(kind: &str, shape: usize, rng: &mut Rng) -> (usize, f64) {
    let b = [1, 2, 3][shape];
    match kind {
        "dense" => {
            let (i, o) = [(1, 1), (3, 2), (5, 4)][shape];
            let mut l = Layer::new(LayerOp::Dense(DenseLayer::init(i, o, rng).unwrap()));
            randomize_biases(&mut l, rng);
            let x = randn(rng, &[b, i]);
            check_layers(&[l], &x, rng)
        }
        "conv1d-valid" | "conv1d-same" => {
            let pad = if kind.ends_with("valid") { Padding::Valid } else { Padding::Same };
            let (c, len, f, k) = [(1, 4, 1, 1), (2, 5, 3, 3), (3, 7, 2, 4)][shape];
            let mut l = Layer::new(LayerOp::Conv1d(Conv1dLayer::init(c, f, k, pad, rng).unwrap()));
            randomize_biases(&mut l, rng);
            let x = randn(rng, &[b, c, len]);
            check_layers(&[l], &x, rng)
        }
        "relu" | "sigmoid" | "tanh" | "linear" => {
            let act: Activation = serde_json::from_str(&format!("\"{kind}\"")).unwrap();
            let dims = [vec![b, 3], vec![b, 2, 4], vec![b, 6]][shape].clone();
            let x = randn(rng, &dims);
            check_layers(&[Layer::new(LayerOp::Activation(act))], &x, rng)
        }
        "gru-cell" => {
            let (i, h) = [(1, 1), (2, 3), (4, 2)][shape];
            let cell = gru(i, h, rng);
            let mut params: Vec<Tensor> = cell.params().into_iter().cloned().collect();
            params.push(randn(rng, &[b, h]));
            let x = randn(rng, &[b, i]);
            let build = |p: &[Tensor]| {
                let v = p[..9].to_vec();
                GruCell::new(
                    v[0].clone(),
                    v[1].clone(),
                    v[2].clone(),
                    v[3].clone(),
                    v[4].clone(),
                    v[5].clone(),
                    v[6].clone(),
                    v[7].clone(),
                    v[8].clone(),
                )
                .unwrap()
            };
            let fwd = |p: &[Tensor], xx: &Tensor| gru_cell_step(&build(p), xx, &p[9]).unwrap().0;
            let bwd = |p: &[Tensor], xx: &Tensor, up: &Tensor| {
                let c = build(p);
                let (_, cache) = gru_cell_step(&c, xx, &p[9]).unwrap();
                let (dx, dh, mut g) = gru_cell_step_backward(&c, &cache, up).unwrap();
                g.push(dh);
                (dx, g)
            };
            check(&params, &x, &fwd, &bwd, rng)
        }
        "lstm-cell" => {
            let (i, h) = [(1, 1), (2, 3), (4, 2)][shape];
            let cell = lstm(i, h, rng);
            let mut params: Vec<Tensor> = cell.params().into_iter().cloned().collect();
            params.push(randn(rng, &[b, h]));
            params.push(randn(rng, &[b, h]));
            let x = randn(rng, &[b, i]);
            let build = |p: &[Tensor]| LstmCell::from_params(p[..12].to_vec()).unwrap();
            // output is [h | c] so both state gradients are exercised
            let fwd = |p: &[Tensor], xx: &Tensor| {
                let (hh, cc, _) = lstm_cell_step(&build(p), xx, &p[12], &p[13]).unwrap();
                Tensor::new(&[2, b, h], [hh.data(), cc.data()].concat()).unwrap()
            };
            let bwd = |p: &[Tensor], xx: &Tensor, up: &Tensor| {
                let c = build(p);
                let (_, _, cache) = lstm_cell_step(&c, xx, &p[12], &p[13]).unwrap();
                let n = b * h;
                let dh = Tensor::new(&[b, h], up.data()[..n].to_vec()).unwrap();
                let dc = Tensor::new(&[b, h], up.data()[n..].to_vec()).unwrap();
                let (dx, dhp, dcp, mut g) = lstm_cell_step_backward(&c, &cache, &dh, &dc).unwrap();
                g.push(dhp);
                g.push(dcp);
                (dx, g)
            };
            check(&params, &x, &fwd, &bwd, rng)
        }
        "gru-seq" | "gru-stack" | "lstm-seq" | "bilstm" | "bigru" => {
            let (i, h, t) = [(1, 1, 1), (2, 3, 4), (3, 2, 5)][shape];
            let depth = if kind == "gru-stack" { 1 + shape.max(1) } else { 1 };
            // alternate sequence and final-state output across seeds
            let last_seq = rng.below(2) == 0;
            let mut layers = vec![];
            let mut input = i;
            for d in 0..depth {
                let mk = |rng: &mut Rng, inp: usize| match kind {
                    "lstm-seq" | "bilstm" => RecurrentCell::Lstm(lstm(inp, h, rng)),
                    _ => RecurrentCell::Gru(gru(inp, h, rng)),
                };
                let fwd_cell = mk(rng, input);
                let bwd_cell = matches!(kind, "bilstm" | "bigru").then(|| mk(rng, input));
                let seqs = d + 1 < depth || last_seq;
                let rl = RecurrentLayer::new(fwd_cell, bwd_cell, seqs).unwrap();
                input = rl.output_size();
                layers.push(Layer::new(LayerOp::Recurrent(rl)));
            }
            let x = randn(rng, &[b, t, i]);
            check_layers(&layers, &x, rng)
        }
        "attention" => {
            let (t, d) = [(1, 1), (3, 2), (4, 3)][shape];
            let att = SelfAttention::init(d, rng).unwrap();
            let x = randn(rng, &[b, t, d]);
            check_layers(&[Layer::new(LayerOp::Attention(att))], &x, rng)
        }
        other => panic!("unknown layer kind {other}"),
    }
}

pub const LAYER_KINDS: [&str; 15] = [
    "dense",
    "conv1d-valid",
    "conv1d-same",
    "relu",
    "sigmoid",
    "tanh",
    "linear",
    "gru-cell",
    "gru-seq",
    "gru-stack",
    "bigru",
    "lstm-cell",
    "lstm-seq",
    "bilstm",
    "attention",
];

/// `seeds` random draws for each of the three shape sets.
pub fn check_kind(kind: &str, seeds: u64) -> CheckOutcome {
    let mut compared = 0;
    let mut worst = 0.0f64;
    let mut cases = 0;
    for shape in 0..3 {
        for s in 0..seeds {
            let mut rng = Rng::derive(0x6772_6164, &[s, shape as u64, kind.len() as u64, kind.as_bytes()[0] as u64]);
            let (n, e) = case(kind, shape, &mut rng);
            compared += n;
            worst = worst.max(e);
            cases += 1;
        }
    }
    CheckOutcome {
        label: kind.to_string(),
        cases,
        compared,
        max_rel_err: worst,
    }
}
