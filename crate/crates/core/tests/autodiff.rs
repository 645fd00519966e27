use laf::baselines::FixedPoolKind;
use laf::laf::{preset_params, Preset};
use laf::ndcore::{adam_step, grad_check_graph, AdamConfig, ParamStore, Segments, Tape, Tensor, Var};
use proptest::prelude::*;

const TOL: f64 = 1e-5;
const H: f64 = 1e-5;

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Tensor> {
    prop::collection::vec(-1.0f64..1.0, rows * cols).prop_map(move |v| Tensor::new(vec![rows, cols], v).unwrap())
}

/// `x[n,k]`, `w[k,m]`, `b[m]` with small random shapes.
fn dense_case() -> impl Strategy<Value = (Tensor, Tensor, Tensor)> {
    (1usize..=4, 1usize..=4, 1usize..=3).prop_flat_map(|(n, k, m)| {
        (
            matrix(n, k),
            matrix(k, m),
            prop::collection::vec(-1.0f64..1.0, m).prop_map(Tensor::vector),
        )
    })
}

/// tanh(dense(x)) ⊙ sigmoid(dense(x)) + dense(x): `x` feeds several consumers.
fn mixed_graph(tape: &mut Tape, x: Var, w: Var, b: Var) -> laf::Result<Var> {
    let y = tape.dense(x, w, b)?;
    let t = tape.tanh(y)?;
    let s = tape.sigmoid(y)?;
    let p = tape.mul(t, s)?;
    let q = tape.add(p, y)?;
    tape.sum(q)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn composed_graph_gradient_wrt_input((x, w, b) in dense_case()) {
        let r = grad_check_graph(
            |tape, xv| {
                let wv = tape.constant(w.clone());
                let bv = tape.constant(b.clone());
                mixed_graph(tape, xv, wv, bv)
            },
            &x,
            H,
        ).unwrap();
        prop_assert!(r.max_rel_error < TOL, "{:?}", r);
    }

    #[test]
    fn composed_graph_gradient_wrt_weights((x, w, b) in dense_case()) {
        let r = grad_check_graph(
            |tape, wv| {
                let xv = tape.constant(x.clone());
                let bv = tape.constant(b.clone());
                mixed_graph(tape, xv, wv, bv)
            },
            &w,
            H,
        ).unwrap();
        prop_assert!(r.max_rel_error < TOL, "{:?}", r);
    }

    #[test]
    fn embedding_to_laf_layer_gradient(
        table in matrix(4, 2),
        indices in prop::collection::vec(0usize..4, 2..=6),
    ) {
        // Two sets: the first element alone, the rest together.
        let segments = Segments::from_lengths([1, indices.len() - 1]);
        let params = Tensor::from_rows(&[
            preset_params(Preset::Mean).unwrap().to_array().to_vec(),
            preset_params(Preset::Moment(2.0)).unwrap().to_array().to_vec(),
        ]).unwrap();
        let r = grad_check_graph(
            |tape, tv| {
                let e = tape.embedding(tv, &indices)?;
                let s = tape.sigmoid(e)?;
                let p = tape.constant(params.clone());
                let pooled = tape.laf_layer(s, p, &segments)?;
                let sq = tape.mul(pooled, pooled)?;
                tape.sum(sq)
            },
            &table,
            H,
        ).unwrap();
        prop_assert!(r.max_rel_error < TOL, "{:?}", r);
    }

    #[test]
    fn sum_and_mean_pool_gradient(x in matrix(5, 2)) {
        // deepsets9 without its max units keeps the graph smooth.
        let mask = {
            let mut m = vec![1.0; 18];
            m[..6].iter_mut().for_each(|v| *v = 0.0);
            Tensor::new(vec![1, 18], m).unwrap()
        };
        let r = grad_check_graph(
            |tape, xv| {
                let s = tape.sigmoid(xv)?;
                let pooled = tape.fixed_pool(s, &Segments::from_lengths([5]), FixedPoolKind::Deepsets9)?;
                let m = tape.constant(mask.clone());
                let kept = tape.mul(pooled, m)?;
                let sq = tape.mul(kept, kept)?;
                tape.sum(sq)
            },
            &x,
            H,
        ).unwrap();
        prop_assert!(r.max_rel_error < TOL, "{:?}", r);
    }

    #[test]
    fn shared_input_gradients_accumulate(x in matrix(2, 3)) {
        // x·x + x has gradient 2x + 1.
        let mut tape = Tape::new();
        let xv = tape.leaf(x.clone());
        let sq = tape.mul(xv, xv).unwrap();
        let y = tape.add(sq, xv).unwrap();
        let s = tape.sum(y).unwrap();
        let g = tape.backward(s).unwrap();
        for (gv, v) in g.get(xv).unwrap().values().iter().zip(x.values()) {
            prop_assert!((gv - (2.0 * v + 1.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn adam_with_zero_gradients_is_identity(
        a in matrix(2, 3),
        b in prop::collection::vec(-5.0f64..5.0, 4),
        lr in 1e-5f64..1.0,
        steps in 1usize..5,
    ) {
        let mut store = ParamStore::new();
        store.insert("a", a.clone());
        store.insert("b", Tensor::vector(b.clone()));
        let cfg = AdamConfig { lr, ..AdamConfig::default() };
        for _ in 0..steps {
            store.zero_grad();
            adam_step(&mut store, &cfg).unwrap();
        }
        prop_assert_eq!(store.value("a").unwrap(), &a);
        prop_assert_eq!(store.value("b").unwrap().values(), &b[..]);
    }
}

#[test]
fn forward_is_deterministic() {
    let x = Tensor::from_rows(&[vec![0.3, -0.2], vec![0.9, 0.1]]).unwrap();
    let w = Tensor::from_rows(&[vec![0.5], vec![-1.5]]).unwrap();
    let run = || {
        let mut tape = Tape::new();
        let (xv, wv) = (tape.leaf(x.clone()), tape.leaf(w.clone()));
        let bv = tape.constant(Tensor::vector(vec![0.25]));
        let y = mixed_graph(&mut tape, xv, wv, bv).unwrap();
        let g = tape.backward(y).unwrap();
        (tape.value(y).clone(), g.get(xv).unwrap().clone(), g.get(wv).unwrap().clone())
    };
    assert_eq!(run(), run());
}
