// diagnose which algebraic laws resist regularizer-only training
use lucid::logic::{regularizer, regularizer_loss, GateCtx, LogicConfig, LogicParams};
use lucid::nn::{clip_grad_norm, ParamGroup, Sgd};
use lucid::rng::stream;
use lucid::rssm::standard_normal_mat;
use lucid::tape::{Mat, Tape};

fn unit_rows(seed: u64, n: usize, d: usize) -> Mat {
    let mut m = standard_normal_mat(&mut stream(seed, "unit", 0), (n, d));
    for mut r in m.rows_mut() {
        let norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        r.mapv_inplace(|x| x / norm);
    }
    m
}

fn main() {
    let d = 64;
    let cfg = LogicConfig { d, latent: 8, action: 2, mlp_layers: 3, kappa: 10.0 };
    let mut params = LogicParams::new(&mut stream(5, "init", 0), cfg);
    let train = unit_rows(6, 512, d);
    let held = unit_rows(7, 256, d);
    let sgd = Sgd::new(1e-2);
    let batch = 64usize;
    for step in 0..1000usize {
        let mut rng = stream(8, "mb", step as u64);
        let mut mb = Mat::zeros((batch, d));
        for i in 0..batch {
            let r = rand::Rng::random_range(&mut rng, 0..512);
            mb.row_mut(i).assign(&train.row(r));
        }
        let mut tape = Tape::new();
        let (ids, bound) = params.bind(&mut tape, false);
        let w = tape.leaf(mb);
        let mut ctx = GateCtx::train(stream(9, "shuffle", step as u64));
        let reg = regularizer(&mut tape, &ids, w, &mut ctx);
        let grads = tape.backward(reg.total);
        let mut g = bound.grads(&tape, &grads);
        clip_grad_norm(&mut g, 100.0);
        sgd.step(&mut params, &g);
        if step % 200 == 0 {
            let (_, rules) = regularizer_loss(&params, &held).unwrap();
            let s: Vec<String> = rules.iter().enumerate().map(|(i, r)| format!("r{}={:.3}", i+1, r)).collect();
            println!("step {step}: {}", s.join(" "));
        }
    }
}
