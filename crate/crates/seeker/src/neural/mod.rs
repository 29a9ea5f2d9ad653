//! From-scratch Q-networks: dense, GRU, and LSTM variants with exact
//! reverse-mode gradients and an Adam optimizer.
//!
//! All three architectures share the same outline: an input affine layer with
//! a rectifier, two middle layers, and a linear output head producing one
//! unbounded Q-value per action. The dense variant uses two more rectified
//! affine layers in the middle; the recurrent variants replace exactly those
//! two layers with stacked GRU or LSTM cells of the same width.
//!
//! Gate algebra (row vectors, `x` the layer input, `h`/`c` the carried
//! state):
//!
//! GRU:  z = sigmoid(x Wz + h Uz + bz)
//!       r = sigmoid(x Wr + h Ur + br)
//!       n = tanh(x Wn + (r .* h) Un + bn)
//!       h' = z .* h + (1 - z) .* n
//!
//! LSTM: i, f, o = sigmoid(x W + h U + b)   (per gate)
//!       g = tanh(x Wg + h Ug + bg)
//!       c' = f .* c + i .* g
//!       h' = o .* tanh(c')
//!
//! Backward passes propagate through the full provided sequence, so training
//! on stored episode windows is ordinary backpropagation through time.

mod adam;
mod tensor;

pub use adam::{Adam, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use tensor::Tensor2;

use crate::error::{Result, SeekerError};
use crate::rng::Rng;

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Which Q-network variant to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArchKind {
    Dqn,
    DqnGru,
    DqnLstm,
}

impl ArchKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ArchKind::Dqn => "dqn",
            ArchKind::DqnGru => "dqn-gru",
            ArchKind::DqnLstm => "dqn-lstm",
        }
    }

    pub fn parse(s: &str) -> Result<ArchKind> {
        match s {
            "dqn" => Ok(ArchKind::Dqn),
            "dqn-gru" => Ok(ArchKind::DqnGru),
            "dqn-lstm" => Ok(ArchKind::DqnLstm),
            other => Err(SeekerError::Config(format!(
                "arch must be one of dqn, dqn-gru, dqn-lstm; got '{other}'"
            ))),
        }
    }

    pub fn is_recurrent(self) -> bool {
        !matches!(self, ArchKind::Dqn)
    }
}

/// Network shape: variant, input width, middle width, and action count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArchDescriptor {
    pub kind: ArchKind,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub n_actions: usize,
}

impl ArchDescriptor {
    pub fn new(kind: ArchKind, input_dim: usize, hidden_dim: usize, n_actions: usize) -> Self {
        ArchDescriptor {
            kind,
            input_dim,
            hidden_dim,
            n_actions,
        }
    }
}

/// Affine layer parameters: `y = x W + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Affine {
    pub w: Tensor2,
    pub b: Tensor2,
}

impl Affine {
    fn zeros(input: usize, output: usize) -> Affine {
        Affine {
            w: Tensor2::zeros(input, output),
            b: Tensor2::zeros(1, output),
        }
    }

    fn apply(&self, x: &Tensor2) -> Tensor2 {
        let mut y = x.matmul(&self.w);
        y.add_bias(&self.b);
        y
    }
}

/// One GRU layer: three gates, each with input and recurrent weights.
#[derive(Debug, Clone, PartialEq)]
pub struct GruCell {
    pub wz: Tensor2,
    pub uz: Tensor2,
    pub bz: Tensor2,
    pub wr: Tensor2,
    pub ur: Tensor2,
    pub br: Tensor2,
    pub wn: Tensor2,
    pub un: Tensor2,
    pub bn: Tensor2,
}

impl GruCell {
    fn zeros(input: usize, hidden: usize) -> GruCell {
        GruCell {
            wz: Tensor2::zeros(input, hidden),
            uz: Tensor2::zeros(hidden, hidden),
            bz: Tensor2::zeros(1, hidden),
            wr: Tensor2::zeros(input, hidden),
            ur: Tensor2::zeros(hidden, hidden),
            br: Tensor2::zeros(1, hidden),
            wn: Tensor2::zeros(input, hidden),
            un: Tensor2::zeros(hidden, hidden),
            bn: Tensor2::zeros(1, hidden),
        }
    }
}

/// One LSTM layer: input, forget, cell, and output gates.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCell {
    pub wi: Tensor2,
    pub ui: Tensor2,
    pub bi: Tensor2,
    pub wf: Tensor2,
    pub uf: Tensor2,
    pub bf: Tensor2,
    pub wg: Tensor2,
    pub ug: Tensor2,
    pub bg: Tensor2,
    pub wo: Tensor2,
    pub uo: Tensor2,
    pub bo: Tensor2,
}

impl LstmCell {
    fn zeros(input: usize, hidden: usize) -> LstmCell {
        LstmCell {
            wi: Tensor2::zeros(input, hidden),
            ui: Tensor2::zeros(hidden, hidden),
            bi: Tensor2::zeros(1, hidden),
            wf: Tensor2::zeros(input, hidden),
            uf: Tensor2::zeros(hidden, hidden),
            bf: Tensor2::zeros(1, hidden),
            wg: Tensor2::zeros(input, hidden),
            ug: Tensor2::zeros(hidden, hidden),
            bg: Tensor2::zeros(1, hidden),
            wo: Tensor2::zeros(input, hidden),
            uo: Tensor2::zeros(hidden, hidden),
            bo: Tensor2::zeros(1, hidden),
        }
    }
}

/// The two middle layers, per variant.
// Variant sizes differ by a few hundred stack bytes; the payload lives on
// the heap inside the tensors, so boxing would only add indirection.
#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone, PartialEq)]
pub enum Body {
    Dense(Affine, Affine),
    Gru(GruCell, GruCell),
    Lstm(LstmCell, LstmCell),
}

/// All weights of one Q-network plus its architecture descriptor.
/// `clone()` is the deep copy used for target-network synchronization.
#[derive(Debug, Clone, PartialEq)]
pub struct QNetParams {
    pub arch: ArchDescriptor,
    pub input: Affine,
    pub body: Body,
    pub output: Affine,
}

impl QNetParams {
    /// Same shapes, all values zero. Also the container for gradients.
    pub fn zeros(arch: ArchDescriptor) -> QNetParams {
        let h = arch.hidden_dim;
        QNetParams {
            arch,
            input: Affine::zeros(arch.input_dim, h),
            body: match arch.kind {
                ArchKind::Dqn => Body::Dense(Affine::zeros(h, h), Affine::zeros(h, h)),
                ArchKind::DqnGru => Body::Gru(GruCell::zeros(h, h), GruCell::zeros(h, h)),
                ArchKind::DqnLstm => Body::Lstm(LstmCell::zeros(h, h), LstmCell::zeros(h, h)),
            },
            output: Affine::zeros(h, arch.n_actions),
        }
    }

    pub fn zeros_like(&self) -> QNetParams {
        QNetParams::zeros(self.arch)
    }

    /// Tensors in a fixed order with stable names; the order defines the
    /// checkpoint layout and the optimizer slot pairing.
    pub fn named_tensors(&self) -> Vec<(String, &Tensor2)> {
        let mut out: Vec<(String, &Tensor2)> = vec![
            ("l1.w".into(), &self.input.w),
            ("l1.b".into(), &self.input.b),
        ];
        match &self.body {
            Body::Dense(l2, l3) => {
                for (i, a) in [(2, l2), (3, l3)] {
                    out.push((format!("l{i}.w"), &a.w));
                    out.push((format!("l{i}.b"), &a.b));
                }
            }
            Body::Gru(l2, l3) => {
                for (i, c) in [(2, l2), (3, l3)] {
                    for (suffix, t) in [
                        ("wz", &c.wz),
                        ("uz", &c.uz),
                        ("bz", &c.bz),
                        ("wr", &c.wr),
                        ("ur", &c.ur),
                        ("br", &c.br),
                        ("wn", &c.wn),
                        ("un", &c.un),
                        ("bn", &c.bn),
                    ] {
                        out.push((format!("l{i}.{suffix}"), t));
                    }
                }
            }
            Body::Lstm(l2, l3) => {
                for (i, c) in [(2, l2), (3, l3)] {
                    for (suffix, t) in [
                        ("wi", &c.wi),
                        ("ui", &c.ui),
                        ("bi", &c.bi),
                        ("wf", &c.wf),
                        ("uf", &c.uf),
                        ("bf", &c.bf),
                        ("wg", &c.wg),
                        ("ug", &c.ug),
                        ("bg", &c.bg),
                        ("wo", &c.wo),
                        ("uo", &c.uo),
                        ("bo", &c.bo),
                    ] {
                        out.push((format!("l{i}.{suffix}"), t));
                    }
                }
            }
        }
        out.push(("l4.w".into(), &self.output.w));
        out.push(("l4.b".into(), &self.output.b));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor2> {
        let mut out: Vec<&mut Tensor2> = vec![&mut self.input.w, &mut self.input.b];
        match &mut self.body {
            Body::Dense(l2, l3) => {
                for a in [l2, l3] {
                    out.push(&mut a.w);
                    out.push(&mut a.b);
                }
            }
            Body::Gru(l2, l3) => {
                for c in [l2, l3] {
                    out.extend([
                        &mut c.wz, &mut c.uz, &mut c.bz, &mut c.wr, &mut c.ur, &mut c.br,
                        &mut c.wn, &mut c.un, &mut c.bn,
                    ]);
                }
            }
            Body::Lstm(l2, l3) => {
                for c in [l2, l3] {
                    out.extend([
                        &mut c.wi, &mut c.ui, &mut c.bi, &mut c.wf, &mut c.uf, &mut c.bf,
                        &mut c.wg, &mut c.ug, &mut c.bg, &mut c.wo, &mut c.uo, &mut c.bo,
                    ]);
                }
            }
        }
        out.push(&mut self.output.w);
        out.push(&mut self.output.b);
        out
    }

    pub fn param_count(&self) -> usize {
        self.named_tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.named_tensors().iter().all(|(_, t)| t.all_finite())
    }

    /// Elementwise sum, used to merge gradients from sub-batches.
    pub fn accumulate(&mut self, other: &QNetParams) {
        let theirs = other.named_tensors();
        for (mine, (_, t)) in self.tensors_mut().into_iter().zip(theirs) {
            mine.add_assign(t);
        }
    }

    /// Scale every tensor in place.
    pub fn scale(&mut self, k: f64) {
        for t in self.tensors_mut() {
            for v in t.values_mut() {
                *v *= k;
            }
        }
    }
}

/// Glorot-uniform initialization: weights uniform in
/// +-sqrt(6 / (fan_in + fan_out)), biases zero. Tensors fill in named order,
/// row-major, so a seed pins every weight.
pub fn init_params(arch: ArchDescriptor, rng: &mut Rng) -> QNetParams {
    let mut params = QNetParams::zeros(arch);
    for t in params.tensors_mut() {
        if t.rows() == 1 {
            continue; // biases stay zero
        }
        let bound = (6.0 / (t.rows() + t.cols()) as f64).sqrt();
        for v in t.values_mut() {
            *v = rng.range_f64(-bound, bound);
        }
    }
    params
}

/// Carried recurrent state, one entry per middle layer. Zeroed at episode
/// start; absent for the dense variant.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerState {
    Gru { h: Tensor2 },
    Lstm { h: Tensor2, c: Tensor2 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct HiddenState {
    pub layers: Vec<LayerState>,
}

impl HiddenState {
    /// Zeroed state for a batch, or None for the dense variant.
    pub fn initial(arch: &ArchDescriptor, batch: usize) -> Option<HiddenState> {
        let h = arch.hidden_dim;
        match arch.kind {
            ArchKind::Dqn => None,
            ArchKind::DqnGru => Some(HiddenState {
                layers: (0..2)
                    .map(|_| LayerState::Gru {
                        h: Tensor2::zeros(batch, h),
                    })
                    .collect(),
            }),
            ArchKind::DqnLstm => Some(HiddenState {
                layers: (0..2)
                    .map(|_| LayerState::Lstm {
                        h: Tensor2::zeros(batch, h),
                        c: Tensor2::zeros(batch, h),
                    })
                    .collect(),
            }),
        }
    }
}

// Per-step caches holding everything the backward pass reuses.

struct AffineCache {
    x: Tensor2,
    /// Pre-activation, kept for the rectifier derivative.
    z: Tensor2,
}

struct GruCache {
    x: Tensor2,
    h_prev: Tensor2,
    z: Tensor2,
    r: Tensor2,
    n: Tensor2,
    rh: Tensor2,
}

struct LstmCache {
    x: Tensor2,
    h_prev: Tensor2,
    c_prev: Tensor2,
    i: Tensor2,
    f: Tensor2,
    g: Tensor2,
    o: Tensor2,
    tc: Tensor2,
}

enum BodyCache {
    Dense(AffineCache, AffineCache),
    Gru(GruCache, GruCache),
    Lstm(LstmCache, LstmCache),
}

struct StepCache {
    input: AffineCache,
    body: BodyCache,
    /// Input to the output head (the last middle layer's activation).
    head_x: Tensor2,
}

/// Cached activations of one [`forward_seq`] call, consumed by [`backward`].
pub struct ForwardTrace {
    steps: Vec<StepCache>,
}

fn gru_step(cell: &GruCell, x: &Tensor2, h_prev: &Tensor2) -> (Tensor2, GruCache) {
    let mut az = x.matmul(&cell.wz);
    az.add_assign(&h_prev.matmul(&cell.uz));
    az.add_bias(&cell.bz);
    let z = az.map(sigmoid);

    let mut ar = x.matmul(&cell.wr);
    ar.add_assign(&h_prev.matmul(&cell.ur));
    ar.add_bias(&cell.br);
    let r = ar.map(sigmoid);

    let rh = r.hadamard(h_prev);
    let mut an = x.matmul(&cell.wn);
    an.add_assign(&rh.matmul(&cell.un));
    an.add_bias(&cell.bn);
    let n = an.map(f64::tanh);

    let h_new = z
        .hadamard(h_prev)
        .zip_map(&z.zip_map(&n, |zv, nv| (1.0 - zv) * nv), |a, b| a + b);
    let cache = GruCache {
        x: x.clone(),
        h_prev: h_prev.clone(),
        z,
        r,
        n,
        rh,
    };
    (h_new, cache)
}

fn gru_backward(
    cell: &GruCell,
    grads: &mut GruCell,
    cache: &GruCache,
    dh_out: &Tensor2,
) -> (Tensor2, Tensor2) {
    let GruCache {
        x,
        h_prev,
        z,
        r,
        n,
        rh,
    } = cache;
    // h' = z.*h + (1-z).*n
    let dz = dh_out.hadamard(&h_prev.zip_map(n, |h, n| h - n));
    let daz = dz.zip_map(z, |d, z| d * z * (1.0 - z));
    let dn = dh_out.zip_map(z, |d, z| d * (1.0 - z));
    let dan = dn.zip_map(n, |d, n| d * (1.0 - n * n));
    let mut dh_prev = dh_out.hadamard(z);

    let drh = dan.matmul_bt(&cell.un);
    let dr = drh.hadamard(h_prev);
    dh_prev.add_assign(&drh.hadamard(r));
    let dar = dr.zip_map(r, |d, r| d * r * (1.0 - r));

    dh_prev.add_assign(&daz.matmul_bt(&cell.uz));
    dh_prev.add_assign(&dar.matmul_bt(&cell.ur));

    let mut dx = daz.matmul_bt(&cell.wz);
    dx.add_assign(&dar.matmul_bt(&cell.wr));
    dx.add_assign(&dan.matmul_bt(&cell.wn));

    grads.wz.add_assign(&x.matmul_at(&daz));
    grads.uz.add_assign(&h_prev.matmul_at(&daz));
    grads.bz.add_assign(&daz.col_sum());
    grads.wr.add_assign(&x.matmul_at(&dar));
    grads.ur.add_assign(&h_prev.matmul_at(&dar));
    grads.br.add_assign(&dar.col_sum());
    grads.wn.add_assign(&x.matmul_at(&dan));
    grads.un.add_assign(&rh.matmul_at(&dan));
    grads.bn.add_assign(&dan.col_sum());

    (dx, dh_prev)
}

fn lstm_step(
    cell: &LstmCell,
    x: &Tensor2,
    h_prev: &Tensor2,
    c_prev: &Tensor2,
) -> (Tensor2, Tensor2, LstmCache) {
    let gate = |w: &Tensor2, u: &Tensor2, b: &Tensor2| {
        let mut a = x.matmul(w);
        a.add_assign(&h_prev.matmul(u));
        a.add_bias(b);
        a
    };
    let i = gate(&cell.wi, &cell.ui, &cell.bi).map(sigmoid);
    let f = gate(&cell.wf, &cell.uf, &cell.bf).map(sigmoid);
    let g = gate(&cell.wg, &cell.ug, &cell.bg).map(f64::tanh);
    let o = gate(&cell.wo, &cell.uo, &cell.bo).map(sigmoid);

    let c_new = f.hadamard(c_prev).zip_map(&i.hadamard(&g), |a, b| a + b);
    let tc = c_new.map(f64::tanh);
    let h_new = o.hadamard(&tc);
    let cache = LstmCache {
        x: x.clone(),
        h_prev: h_prev.clone(),
        c_prev: c_prev.clone(),
        i,
        f,
        g,
        o,
        tc,
    };
    (h_new, c_new, cache)
}

fn lstm_backward(
    cell: &LstmCell,
    grads: &mut LstmCell,
    cache: &LstmCache,
    dh_out: &Tensor2,
    dc_out: &Tensor2,
) -> (Tensor2, Tensor2, Tensor2) {
    let LstmCache {
        x,
        h_prev,
        c_prev,
        i,
        f,
        g,
        o,
        tc,
    } = cache;
    let do_ = dh_out.hadamard(tc);
    let dao = do_.zip_map(o, |d, o| d * o * (1.0 - o));
    // Total cell gradient: carried dc plus the tanh branch of h'.
    let dc_total = dc_out.zip_map(
        &dh_out.hadamard(o).hadamard(&tc.map(|t| 1.0 - t * t)),
        |a, b| a + b,
    );
    let df = dc_total.hadamard(c_prev);
    let daf = df.zip_map(f, |d, f| d * f * (1.0 - f));
    let di = dc_total.hadamard(g);
    let dai = di.zip_map(i, |d, i| d * i * (1.0 - i));
    let dg = dc_total.hadamard(i);
    let dag = dg.zip_map(g, |d, g| d * (1.0 - g * g));
    let dc_prev = dc_total.hadamard(f);

    let mut dh_prev = dai.matmul_bt(&cell.ui);
    dh_prev.add_assign(&daf.matmul_bt(&cell.uf));
    dh_prev.add_assign(&dag.matmul_bt(&cell.ug));
    dh_prev.add_assign(&dao.matmul_bt(&cell.uo));

    let mut dx = dai.matmul_bt(&cell.wi);
    dx.add_assign(&daf.matmul_bt(&cell.wf));
    dx.add_assign(&dag.matmul_bt(&cell.wg));
    dx.add_assign(&dao.matmul_bt(&cell.wo));

    for (w, u, b, da) in [
        (&mut grads.wi, &mut grads.ui, &mut grads.bi, &dai),
        (&mut grads.wf, &mut grads.uf, &mut grads.bf, &daf),
        (&mut grads.wg, &mut grads.ug, &mut grads.bg, &dag),
        (&mut grads.wo, &mut grads.uo, &mut grads.bo, &dao),
    ] {
        w.add_assign(&x.matmul_at(da));
        u.add_assign(&h_prev.matmul_at(da));
        b.add_assign(&da.col_sum());
    }

    (dx, dh_prev, dc_prev)
}

fn check_input(params: &QNetParams, x: &Tensor2, hidden: Option<&HiddenState>) -> Result<()> {
    if x.cols() != params.arch.input_dim {
        return Err(SeekerError::ShapeMismatch {
            context: "forward input".into(),
            expected: format!("batch x {}", params.arch.input_dim),
            got: format!("{} x {}", x.rows(), x.cols()),
        });
    }
    match (params.arch.kind.is_recurrent(), hidden) {
        (true, None) => Err(SeekerError::ShapeMismatch {
            context: "forward hidden state".into(),
            expected: "hidden state for recurrent architecture".into(),
            got: "none".into(),
        }),
        (false, Some(_)) => Err(SeekerError::ShapeMismatch {
            context: "forward hidden state".into(),
            expected: "no hidden state for dense architecture".into(),
            got: "some".into(),
        }),
        _ => Ok(()),
    }
}

fn forward_step(
    params: &QNetParams,
    x: &Tensor2,
    hidden: Option<&HiddenState>,
) -> (Tensor2, Option<HiddenState>, StepCache) {
    let z1 = params.input.apply(x);
    let h1 = z1.map(|v| v.max(0.0));
    let input_cache = AffineCache {
        x: x.clone(),
        z: z1,
    };

    let (head_x, hidden_new, body_cache) = match (&params.body, hidden) {
        (Body::Dense(l2, l3), None) => {
            let z2 = l2.apply(&h1);
            let h2 = z2.map(|v| v.max(0.0));
            let c2 = AffineCache { x: h1, z: z2 };
            let z3 = l3.apply(&h2);
            let h3 = z3.map(|v| v.max(0.0));
            let c3 = AffineCache { x: h2, z: z3 };
            (h3, None, BodyCache::Dense(c2, c3))
        }
        (Body::Gru(l2, l3), Some(state)) => {
            let (h2_prev, h3_prev) = match (&state.layers[0], &state.layers[1]) {
                (LayerState::Gru { h: a }, LayerState::Gru { h: b }) => (a, b),
                _ => unreachable!("GRU body carries GRU state"),
            };
            let (h2, c2) = gru_step(l2, &h1, h2_prev);
            let (h3, c3) = gru_step(l3, &h2, h3_prev);
            let new_state = HiddenState {
                layers: vec![LayerState::Gru { h: h2 }, LayerState::Gru { h: h3.clone() }],
            };
            (h3, Some(new_state), BodyCache::Gru(c2, c3))
        }
        (Body::Lstm(l2, l3), Some(state)) => {
            let ((h2_prev, c2_prev), (h3_prev, c3_prev)) =
                match (&state.layers[0], &state.layers[1]) {
                    (LayerState::Lstm { h: h2, c: c2 }, LayerState::Lstm { h: h3, c: c3 }) => {
                        ((h2, c2), (h3, c3))
                    }
                    _ => unreachable!("LSTM body carries LSTM state"),
                };
            let (h2, c2_new, cache2) = lstm_step(l2, &h1, h2_prev, c2_prev);
            let (h3, c3_new, cache3) = lstm_step(l3, &h2, h3_prev, c3_prev);
            let new_state = HiddenState {
                layers: vec![
                    LayerState::Lstm { h: h2, c: c2_new },
                    LayerState::Lstm {
                        h: h3.clone(),
                        c: c3_new,
                    },
                ],
            };
            (h3, Some(new_state), BodyCache::Lstm(cache2, cache3))
        }
        _ => unreachable!("hidden presence validated against architecture"),
    };

    let q = params.output.apply(&head_x);
    let cache = StepCache {
        input: input_cache,
        body: body_cache,
        head_x,
    };
    (q, hidden_new, cache)
}

/// One-step forward pass: Q-values for a batch of observations, plus the
/// advanced hidden state for recurrent variants.
pub fn forward(
    params: &QNetParams,
    x: &Tensor2,
    hidden: Option<&HiddenState>,
) -> Result<(Tensor2, Option<HiddenState>)> {
    check_input(params, x, hidden)?;
    let (q, hidden_new, _) = forward_step(params, x, hidden);
    Ok((q, hidden_new))
}

/// Forward over a sequence of step batches, keeping the activation caches
/// needed for backpropagation through time. `h0 = None` starts recurrent
/// variants from the zero state.
pub fn forward_seq(
    params: &QNetParams,
    xs: &[Tensor2],
    h0: Option<HiddenState>,
) -> Result<(Vec<Tensor2>, ForwardTrace, Option<HiddenState>)> {
    assert!(!xs.is_empty(), "sequence must have at least one step");
    let batch = xs[0].rows();
    let mut hidden = if params.arch.kind.is_recurrent() {
        match h0 {
            Some(h) => Some(h),
            None => HiddenState::initial(&params.arch, batch),
        }
    } else {
        None
    };
    let mut qs = Vec::with_capacity(xs.len());
    let mut steps = Vec::with_capacity(xs.len());
    for x in xs {
        check_input(params, x, hidden.as_ref())?;
        let (q, hidden_new, cache) = forward_step(params, x, hidden.as_ref());
        qs.push(q);
        steps.push(cache);
        hidden = hidden_new;
    }
    Ok((qs, ForwardTrace { steps }, hidden))
}

/// Exact reverse-mode gradients of a scalar loss with respect to every
/// parameter, given dLoss/dQ for each step of the traced forward pass.
/// Returns the gradients in a params-shaped container.
pub fn backward(params: &QNetParams, trace: &ForwardTrace, dqs: &[Tensor2]) -> QNetParams {
    assert_eq!(trace.steps.len(), dqs.len(), "one dQ per traced step");
    let mut grads = params.zeros_like();

    // Gradients carried backward across time into each recurrent layer.
    let mut carry_h2: Option<Tensor2> = None;
    let mut carry_c2: Option<Tensor2> = None;
    let mut carry_h3: Option<Tensor2> = None;
    let mut carry_c3: Option<Tensor2> = None;

    for (step, dq) in trace.steps.iter().zip(dqs).rev() {
        // Output head: q = head_x W4 + b4.
        grads.output.w.add_assign(&step.head_x.matmul_at(dq));
        grads.output.b.add_assign(&dq.col_sum());
        let mut dhead = dq.matmul_bt(&params.output.w);

        let dh1 = match (&params.body, &step.body, &mut grads.body) {
            (Body::Dense(l2, l3), BodyCache::Dense(c2, c3), Body::Dense(g2, g3)) => {
                let dz3 = dhead.zip_map(&c3.z, |d, z| if z > 0.0 { d } else { 0.0 });
                g3.w.add_assign(&c3.x.matmul_at(&dz3));
                g3.b.add_assign(&dz3.col_sum());
                let dh2 = dz3.matmul_bt(&l3.w);
                let dz2 = dh2.zip_map(&c2.z, |d, z| if z > 0.0 { d } else { 0.0 });
                g2.w.add_assign(&c2.x.matmul_at(&dz2));
                g2.b.add_assign(&dz2.col_sum());
                dz2.matmul_bt(&l2.w)
            }
            (Body::Gru(l2, l3), BodyCache::Gru(c2, c3), Body::Gru(g2, g3)) => {
                if let Some(c) = carry_h3.take() {
                    dhead.add_assign(&c);
                }
                let (dh2_from_l3, dh3_prev) = gru_backward(l3, g3, c3, &dhead);
                carry_h3 = Some(dh3_prev);
                let mut dh2 = dh2_from_l3;
                if let Some(c) = carry_h2.take() {
                    dh2.add_assign(&c);
                }
                let (dh1, dh2_prev) = gru_backward(l2, g2, c2, &dh2);
                carry_h2 = Some(dh2_prev);
                dh1
            }
            (Body::Lstm(l2, l3), BodyCache::Lstm(c2, c3), Body::Lstm(g2, g3)) => {
                if let Some(c) = carry_h3.take() {
                    dhead.add_assign(&c);
                }
                let dc3 = carry_c3.take().unwrap_or_else(|| dhead.zeros_like());
                let (dh2_from_l3, dh3_prev, dc3_prev) = lstm_backward(l3, g3, c3, &dhead, &dc3);
                carry_h3 = Some(dh3_prev);
                carry_c3 = Some(dc3_prev);
                let mut dh2 = dh2_from_l3;
                if let Some(c) = carry_h2.take() {
                    dh2.add_assign(&c);
                }
                let dc2 = carry_c2.take().unwrap_or_else(|| dh2.zeros_like());
                let (dh1, dh2_prev, dc2_prev) = lstm_backward(l2, g2, c2, &dh2, &dc2);
                carry_h2 = Some(dh2_prev);
                carry_c2 = Some(dc2_prev);
                dh1
            }
            _ => unreachable!("body, cache, and gradient variants always match"),
        };

        // Input layer: h1 = relu(x W1 + b1).
        let dz1 = dh1.zip_map(&step.input.z, |d, z| if z > 0.0 { d } else { 0.0 });
        grads.input.w.add_assign(&step.input.x.matmul_at(&dz1));
        grads.input.b.add_assign(&dz1.col_sum());
    }
    grads
}
