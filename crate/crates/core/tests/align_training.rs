use conceptlink::align::{
    mla_forward, train, triplet_loss, AlignInput, AlignModel, BatchItem, BranchDims, MlaDims, ModelShape, TrainConfig,
};
use conceptlink::synth::{toy_alignment_task, ToyConfig};
use conceptlink::Sctid;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-5;

fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
}

struct Fixture {
    inputs: Vec<AlignInput>,
    targets: Vec<Vec<f64>>,
    gold: Vec<Sctid>,
}

impl Fixture {
    fn random(shape: &ModelShape, n: usize, rng: &mut ChaCha8Rng) -> Self {
        let inputs = (0..n)
            .map(|_| AlignInput {
                ft: random_vec(rng, shape.branch.map_or(0, |b| b.input), 1.0),
                stack: random_vec(rng, shape.mla.map_or(0, |m| m.layers * m.dim), 1.0),
                raw: random_vec(rng, shape.raw_dim, 1.0),
            })
            .collect();
        let targets = (0..n).map(|_| random_vec(rng, shape.out_dim, 1.0)).collect();
        // three concepts so some batches contain duplicate golds
        let gold = (0..n).map(|i| Sctid(1 + (i % 3) as u64)).collect();
        Fixture { inputs, targets, gold }
    }

    fn batch(&self) -> Vec<BatchItem<'_>> {
        (0..self.inputs.len())
            .map(|i| BatchItem {
                input: &self.inputs[i],
                target: &self.targets[i],
                gold: self.gold[i],
            })
            .collect()
    }
}

fn numeric_grad(model: &AlignModel, batch: &[BatchItem], alpha: f64) -> Vec<f64> {
    let mut m = model.clone();
    (0..model.params().len())
        .map(|k| {
            let orig = m.params()[k];
            m.params_mut()[k] = orig + STEP;
            let up = m.batch_loss(batch, alpha).unwrap();
            m.params_mut()[k] = orig - STEP;
            let down = m.batch_loss(batch, alpha).unwrap();
            m.params_mut()[k] = orig;
            (up - down) / (2.0 * STEP)
        })
        .collect()
}

fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt() + b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// Gradient check at `points` random parameter settings; returns the worst
/// relative error.
fn check_shape(shape: ModelShape, points: u64) -> f64 {
    let mut worst: f64 = 0.0;
    for point in 0..points {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + point);
        let mut model = AlignModel::init(shape.clone(), point).unwrap();
        for p in model.params_mut() {
            *p += rng.gen_range(-0.3..0.3);
        }
        let fx = Fixture::random(&shape, 6, &mut rng);
        let batch = fx.batch();
        let (loss, analytic) = model.loss_and_grad(&batch, 0.5).unwrap();
        assert!(loss > 0.0, "fixture has no active hinge");
        let numeric = numeric_grad(&model, &batch, 0.5);
        worst = worst.max(relative_error(&analytic, &numeric));
    }
    worst
}

#[test]
fn gradient_linear() {
    let shape = ModelShape {
        branch: None,
        mla: None,
        raw_dim: 5,
        out_dim: 4,
        use_relu: false,
    };
    let err = check_shape(shape, 12);
    assert!(err < 1e-4, "relative error {err}");
}

#[test]
fn gradient_rectified() {
    let shape = ModelShape {
        branch: None,
        mla: None,
        raw_dim: 5,
        out_dim: 6,
        use_relu: true,
    };
    let err = check_shape(shape, 12);
    assert!(err < 1e-4, "relative error {err}");
}

#[test]
fn gradient_branch_transform() {
    let shape = ModelShape {
        branch: Some(BranchDims { input: 4, output: 3 }),
        mla: None,
        raw_dim: 2,
        out_dim: 4,
        use_relu: true,
    };
    let err = check_shape(shape, 12);
    assert!(err < 1e-4, "relative error {err}");
}

#[test]
fn gradient_attention() {
    let shape = ModelShape {
        branch: None,
        mla: Some(MlaDims { layers: 3, dim: 4 }),
        raw_dim: 0,
        out_dim: 5,
        use_relu: false,
    };
    let err = check_shape(shape, 12);
    assert!(err < 1e-4, "relative error {err}");
}

#[test]
fn gradient_full_ensemble_stack() {
    let shape = ModelShape {
        branch: Some(BranchDims { input: 4, output: 4 }),
        mla: Some(MlaDims { layers: 3, dim: 3 }),
        raw_dim: 0,
        out_dim: 6,
        use_relu: false,
    };
    let err = check_shape(shape, 12);
    assert!(err < 1e-4, "relative error {err}");
}

#[test]
fn gradient_single_active_hinge_d2() {
    let shape = ModelShape {
        branch: None,
        mla: None,
        raw_dim: 2,
        out_dim: 2,
        use_relu: false,
    };
    let mut model = AlignModel::init(shape, 0).unwrap();
    model.params_mut().copy_from_slice(&[1.0, 0.2, -0.1, 0.9, 0.05, -0.02]);
    let inputs = [
        AlignInput {
            raw: vec![1.0, 0.3],
            ..Default::default()
        },
        AlignInput {
            raw: vec![0.0, 1.0],
            ..Default::default()
        },
    ];
    let targets = [vec![1.0, 0.0], vec![1.0, 1.0]];
    let batch: Vec<BatchItem> = (0..2)
        .map(|i| BatchItem {
            input: &inputs[i],
            target: &targets[i],
            gold: Sctid(i as u64 + 1),
        })
        .collect();
    let (loss, analytic) = model.loss_and_grad(&batch, 0.2).unwrap();
    let preds: Vec<Vec<f64>> = inputs.iter().map(|x| model.forward(x).0).collect();
    let refs: Vec<&[f64]> = preds.iter().map(Vec::as_slice).collect();
    let tl = triplet_loss(
        &refs,
        &[&targets[0], &targets[1]],
        &batch.iter().map(|b| b.gold).collect::<Vec<_>>(),
        0.2,
    )
    .unwrap();
    assert_eq!(tl.terms.iter().filter(|t| **t > 0.0).count(), 1);
    assert!(loss > 0.0);
    let err = relative_error(&analytic, &numeric_grad(&model, &batch, 0.2));
    assert!(err < 1e-4, "relative error {err}");
}

#[test]
fn gradient_memory_on_two_layer_example() {
    // B = [1, 3], A = [1]; two examples with scalar stacks
    let shape = ModelShape {
        branch: None,
        mla: Some(MlaDims { layers: 2, dim: 1 }),
        raw_dim: 0,
        out_dim: 2,
        use_relu: false,
    };
    let mut model = AlignModel::init(shape, 0).unwrap();
    // W (2x1), b (2), A (1)
    model.params_mut().copy_from_slice(&[1.0, -0.5, 0.1, 0.3, 1.0]);
    assert!((mla_forward(&[1.0, 3.0], 2, &[1.0]).fused[0] - 2.7616).abs() < 1e-4);
    let inputs = [
        AlignInput {
            stack: vec![1.0, 3.0],
            ..Default::default()
        },
        AlignInput {
            stack: vec![2.0, -1.0],
            ..Default::default()
        },
    ];
    let targets = [vec![0.0, 1.0], vec![1.0, 0.0]];
    let batch: Vec<BatchItem> = (0..2)
        .map(|i| BatchItem {
            input: &inputs[i],
            target: &targets[i],
            gold: Sctid(i as u64 + 1),
        })
        .collect();
    let (_, analytic) = model.loss_and_grad(&batch, 0.2).unwrap();
    let numeric = numeric_grad(&model, &batch, 0.2);
    assert!(analytic[4] != 0.0);
    assert!((analytic[4] - numeric[4]).abs() / analytic[4].abs() < 1e-4);
}

#[test]
fn zero_loss_batch_has_zero_gradient() {
    let shape = ModelShape {
        branch: None,
        mla: None,
        raw_dim: 2,
        out_dim: 2,
        use_relu: false,
    };
    let mut model = AlignModel::init(shape, 0).unwrap();
    model.params_mut().copy_from_slice(&[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
    let inputs = [
        AlignInput {
            raw: vec![1.0, 0.0],
            ..Default::default()
        },
        AlignInput {
            raw: vec![0.0, 1.0],
            ..Default::default()
        },
    ];
    let targets = [vec![1.0, 0.0], vec![0.0, 1.0]];
    let batch: Vec<BatchItem> = (0..2)
        .map(|i| BatchItem {
            input: &inputs[i],
            target: &targets[i],
            gold: Sctid(i as u64 + 1),
        })
        .collect();
    let (loss, grad) = model.loss_and_grad(&batch, 0.2).unwrap();
    assert_eq!(loss, 0.0);
    assert!(grad.iter().all(|g| *g == 0.0));
}

#[test]
fn loss_is_invariant_to_target_scale() {
    let shape = ModelShape {
        branch: None,
        mla: None,
        raw_dim: 6,
        out_dim: 5,
        use_relu: false,
    };
    let model = AlignModel::init(shape.clone(), 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let fx = Fixture::random(&shape, 8, &mut rng);
    let base = model.batch_loss(&fx.batch(), 0.2).unwrap();
    for c in [0.5, 2.0, 8.0, 1024.0] {
        let scaled = Fixture {
            inputs: fx.inputs.clone(),
            targets: fx.targets.iter().map(|t| t.iter().map(|x| x * c).collect()).collect(),
            gold: fx.gold.clone(),
        };
        assert_eq!(model.batch_loss(&scaled.batch(), 0.2).unwrap(), base);
    }
    // non-power-of-two factors only differ by rounding
    let scaled = Fixture {
        inputs: fx.inputs.clone(),
        targets: fx.targets.iter().map(|t| t.iter().map(|x| x * 3.7).collect()).collect(),
        gold: fx.gold.clone(),
    };
    assert!((model.batch_loss(&scaled.batch(), 0.2).unwrap() - base).abs() < 1e-12);
}

#[test]
fn loss_nonnegative_and_zero_iff_margins_cleared() {
    let shape = ModelShape {
        branch: None,
        mla: None,
        raw_dim: 3,
        out_dim: 3,
        use_relu: true,
    };
    for seed in 0..50 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = AlignModel::init(shape.clone(), seed).unwrap();
        let fx = Fixture::random(&shape, 5, &mut rng);
        let preds: Vec<Vec<f64>> = fx.inputs.iter().map(|x| model.forward(x).0).collect();
        let p: Vec<&[f64]> = preds.iter().map(Vec::as_slice).collect();
        let t: Vec<&[f64]> = fx.targets.iter().map(Vec::as_slice).collect();
        let l = triplet_loss(&p, &t, &fx.gold, 0.2).unwrap();
        assert!(l.loss >= 0.0);
        assert_eq!(l.loss == 0.0, l.terms.iter().all(|x| *x == 0.0));
    }
}

#[test]
fn zero_learning_rate_training_is_identity() {
    let task = toy_alignment_task(&ToyConfig {
        concepts: 10,
        dim: 8,
        seed: 5,
        ..Default::default()
    })
    .unwrap();
    let shape = ModelShape {
        branch: None,
        mla: None,
        raw_dim: 8,
        out_dim: 8,
        use_relu: true,
    };
    let model = AlignModel::init(shape, 1).unwrap();
    let cfg = TrainConfig {
        learning_rate: 0.0,
        batch_size: 8,
        epochs: 3,
        ..Default::default()
    };
    let out = train(model.clone(), &task.train, &task.dev, &task.index, &cfg).unwrap();
    assert_eq!(out.model.params(), model.params());
    assert_eq!(out.trace.len(), 3);
}

#[test]
fn training_is_deterministic_and_selects_best_epoch() {
    let task = toy_alignment_task(&ToyConfig {
        concepts: 12,
        dim: 16,
        seed: 8,
        ..Default::default()
    })
    .unwrap();
    let shape = ModelShape {
        branch: None,
        mla: None,
        raw_dim: 16,
        out_dim: 16,
        use_relu: false,
    };
    let cfg = TrainConfig {
        batch_size: 16,
        epochs: 6,
        learning_rate: 1e-3,
        ..Default::default()
    };
    let run = || {
        train(
            AlignModel::init(shape.clone(), 2).unwrap(),
            &task.train,
            &task.dev,
            &task.index,
            &cfg,
        )
        .unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a.model.render(), b.model.render());
    let best = a
        .trace
        .iter()
        .map(|e| e.dev_acc1.unwrap())
        .fold(f64::NEG_INFINITY, f64::max);
    let first_best = a.trace.iter().find(|e| e.dev_acc1 == Some(best)).unwrap().epoch;
    assert_eq!(a.best_epoch, first_best);
}

#[test]
fn too_few_examples_is_rejected() {
    let task = toy_alignment_task(&ToyConfig {
        concepts: 3,
        dim: 4,
        ..Default::default()
    })
    .unwrap();
    let shape = ModelShape {
        branch: None,
        mla: None,
        raw_dim: 4,
        out_dim: 4,
        use_relu: false,
    };
    let err = train(
        AlignModel::init(shape, 0).unwrap(),
        &task.train,
        &task.dev,
        &task.index,
        &TrainConfig::default(),
    );
    assert!(err.unwrap_err().is_validation());
}

#[test]
fn toy_task_is_learned() {
    let task = toy_alignment_task(&ToyConfig::default()).unwrap();
    let shape = ModelShape {
        branch: None,
        mla: None,
        raw_dim: 300,
        out_dim: 300,
        use_relu: false,
    };
    let out = train(
        AlignModel::init(shape, 42).unwrap(),
        &task.train,
        &task.dev,
        &task.index,
        &TrainConfig::default(),
    )
    .unwrap();
    let best = out.trace[out.best_epoch - 1].dev_acc1.unwrap();
    eprintln!(
        "toy dev Acc@1 per epoch: {:?}",
        out.trace.iter().map(|e| e.dev_acc1.unwrap()).collect::<Vec<_>>()
    );
    assert!(best >= 0.95, "best dev Acc@1 {best}");
}
