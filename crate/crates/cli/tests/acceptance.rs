//! Acceptance suite: one PASS/FAIL line per criterion. Statistical checks
//! that are recorded rather than enforced print FLAG instead of FAIL.

mod oracles;

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use olsr_core::affine::{decompose, recon_error_bound, OperatorNorm, BOUND_SLACK};
use olsr_core::data::rng::CounterRng;
use olsr_core::data::{split, synth_id, synth_ood, OodKind, SynthSpec};
use olsr_core::detector::{default_hidden_width, fit_gaussians, train};
use olsr_core::metrics::{aupr_in, auroc, detection_error, fpr_at_tpr};
use olsr_core::nn::{
    grad_check, Activation, DenseMatrix, DetectorObjective, FcLayer, LossOptions, ReconLoss,
};
use olsr_core::scoring::{combine, nl2, scores, Distance, FactorInputs, Framework, ScoringOptions};
use olsr_core::{Calibration, DetectorModel, FeatureSet, GaussianFit, TrainConfig};

const GRAD_TOL: f64 = 1e-6;
const GRAD_MODELS: usize = 24;
const AFFINE_TOL: f64 = 1e-9;
const AFFINE_INPUTS: usize = 100;
const METRIC_TOL: f64 = 1e-9;
const METRIC_INSTANCES: usize = 50;
const NL2_TOL: f64 = 1e-12;
const NL2_SAMPLES: usize = 10_000;
const MONOTONE_COMBOS: usize = 1_000;
const AUROC_BAR: f64 = 0.95;
const LAMBDAS: [f64; 4] = [0.01, 0.1, 1.0, 10.0];

enum Outcome {
    Pass,
    Fail,
    Flag,
}

struct Suite {
    failures: usize,
}

impl Suite {
    fn report(&mut self, name: &str, outcome: Outcome, detail: String, started: Instant) {
        let tag = match outcome {
            Outcome::Pass => "PASS",
            Outcome::Fail => {
                self.failures += 1;
                "FAIL"
            }
            Outcome::Flag => "FLAG",
        };
        println!(
            "{tag}  {name}: {detail} [{:.1}s]",
            started.elapsed().as_secs_f64()
        );
    }

    fn check(&mut self, name: &str, ok: bool, detail: String, started: Instant) {
        self.report(
            name,
            if ok { Outcome::Pass } else { Outcome::Fail },
            detail,
            started,
        );
    }
}

fn gradient_correctness(suite: &mut Suite) {
    let t0 = Instant::now();
    let mut rng = CounterRng::new(2024, 0);
    let mut worst: f64 = 0.0;
    let mut worst_resolved: f64 = 0.0;
    let mut excused = 0;
    let mut excused_max_grad: f64 = 0.0;
    let mut checked = 0;
    let mut skipped = 0;
    for m in 0..GRAD_MODELS {
        let dim = 2 + rng.below(15);
        let classes = 2 + rng.below(3);
        let temperature = [1.0, 5.0, 100.0][m % 3];
        let model = DetectorModel::init(
            dim,
            classes,
            default_hidden_width(dim, classes),
            temperature,
            m as u64,
            None,
        )
        .unwrap();
        let v: Vec<f64> = (0..dim).map(|_| rng.uniform_range(0.0, 2.0)).collect();
        let obj = DetectorObjective {
            model,
            sample: &v,
            label: rng.below(classes),
            options: LossOptions {
                lambda: rng.uniform_range(0.1, 2.0),
                recon: ReconLoss::Norm,
                detach_l2_target: false,
            },
        };
        let r = grad_check(&obj).unwrap();
        worst = worst.max(r.max_rel_error);
        worst_resolved = worst_resolved.max(r.max_resolved_rel_error);
        for c in r
            .coordinates
            .iter()
            .filter(|c| c.rel >= GRAD_TOL && c.within_roundoff())
        {
            excused += 1;
            excused_max_grad = excused_max_grad.max(c.analytic.abs());
        }
        checked += r.checked;
        skipped += r.skipped;
    }
    suite.check(
        "gradient correctness",
        worst_resolved < GRAD_TOL && checked > 0,
        format!(
            "{GRAD_MODELS} models (H<=16, C<=4), {checked} coordinates ({skipped} at ReLU kinks skipped), \
             max rel err {worst_resolved:.2e} (tol {GRAD_TOL:.0e}); raw max {worst:.2e}, \
             {excused} coordinate(s) over tol with |g| <= {excused_max_grad:.1e} and mismatch within the h=1e-5 round-off bound"
        ),
        t0,
    );
}

fn random_layer(rng: &mut CounterRng, inputs: usize, outputs: usize, act: Activation) -> FcLayer {
    let weight = DenseMatrix::from_fn(outputs, inputs, |_, _| {
        rng.normal() / (inputs as f64).sqrt()
    });
    let bias = (0..outputs).map(|_| 0.1 * rng.normal()).collect();
    FcLayer::new(weight, bias, act).unwrap()
}

fn affine_decomposition(suite: &mut Suite) {
    let t0 = Instant::now();
    let mut rng = CounterRng::new(77, 0);
    let h = 10;
    let layers = vec![
        random_layer(&mut rng, h, 16, Activation::Relu),
        random_layer(&mut rng, 16, 16, Activation::Relu),
        random_layer(&mut rng, 16, h, Activation::None),
    ];
    let plain: Vec<oracles::PlainLayer> = layers
        .iter()
        .map(|l| {
            let rows = (0..l.outputs()).map(|r| l.weight.row(r).to_vec()).collect();
            (rows, l.bias.clone(), l.activation == Activation::Relu)
        })
        .collect();
    let mut worst_eq: f64 = 0.0;
    let mut violations = 0;
    for _ in 0..AFFINE_INPUTS {
        let x: Vec<f64> = (0..h).map(|_| 2.0 * rng.normal()).collect();
        let fx = oracles::forward(&plain, &x);
        let d = decompose(&layers, &x).unwrap();
        let gx = d.apply(&x);
        let diff: Vec<f64> = fx.iter().zip(&gx).map(|(a, b)| a - b).collect();
        worst_eq = worst_eq.max(oracles::norm(&diff) / (1.0 + oracles::norm(&fx)));
        let b = recon_error_bound(&d, &x, OperatorNorm::Spectral).unwrap();
        if b.actual > b.bound + BOUND_SLACK {
            violations += 1;
        }
    }
    suite.check(
        "affine decomposition",
        worst_eq <= AFFINE_TOL && violations == 0,
        format!(
            "{AFFINE_INPUTS} inputs, max ||f(x)-(Gx+B)||/(1+||f(x)||) = {worst_eq:.1e} (tol {AFFINE_TOL:.0e}), bound violations {violations}"
        ),
        t0,
    );
}

fn metric_oracles(suite: &mut Suite) {
    let t0 = Instant::now();
    let mut rng = CounterRng::new(99, 0);
    let mut worst = [0.0f64; 4];
    for i in 0..METRIC_INSTANCES {
        let n = 1 + rng.below(1000);
        let m = 1 + rng.below(2000 - n);
        // Every other instance is quantized so ties are common.
        let q = if i % 2 == 0 { 0.0 } else { 20.0 };
        let draw = |rng: &mut CounterRng, shift: f64| {
            let s = rng.normal() + shift;
            if q > 0.0 {
                (s * q).round() / q
            } else {
                s
            }
        };
        let id: Vec<f64> = (0..n).map(|_| draw(&mut rng, 1.0)).collect();
        let ood: Vec<f64> = (0..m).map(|_| draw(&mut rng, 0.0)).collect();
        let pairs = [
            (
                auroc(&id, &ood).unwrap(),
                oracles::auroc_pairwise(&id, &ood),
            ),
            (
                aupr_in(&id, &ood).unwrap(),
                oracles::aupr_in_exhaustive(&id, &ood),
            ),
            (
                fpr_at_tpr(&id, &ood, 0.95).unwrap(),
                oracles::fpr_at_tpr_exhaustive(&id, &ood, 0.95),
            ),
            (
                detection_error(&id, &ood).unwrap(),
                oracles::detection_error_exhaustive(&id, &ood),
            ),
        ];
        for (w, (got, want)) in worst.iter_mut().zip(pairs) {
            *w = w.max((got - want).abs());
        }
    }
    let max = worst.iter().cloned().fold(0.0, f64::max);
    suite.check(
        "metric oracles",
        max <= METRIC_TOL,
        format!(
            "{METRIC_INSTANCES} instances (n+m<=2000), max |diff| AUROC {:.1e}, AUPR-in {:.1e}, FPR@95 {:.1e}, DetErr {:.1e} (tol {METRIC_TOL:.0e})",
            worst[0], worst[1], worst[2], worst[3]
        ),
        t0,
    );
}

fn nl2_properties(suite: &mut Suite) {
    let t0 = Instant::now();
    let mut rng = CounterRng::new(5, 0);
    let mut worst_scale: f64 = 0.0;
    let mut worst_fixed: f64 = 0.0;
    for _ in 0..NL2_SAMPLES {
        let d = 1 + rng.below(32);
        let f: Vec<f64> = (0..d).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
        let g: Vec<f64> = (0..d).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
        if oracles::norm(&f) < 1e-3 {
            continue;
        }
        let alpha = 10f64.powf(rng.uniform_range(-3.0, 3.0));
        let fa: Vec<f64> = f.iter().map(|x| alpha * x).collect();
        let ga: Vec<f64> = g.iter().map(|x| alpha * x).collect();
        worst_scale = worst_scale.max((nl2(&fa, &ga).unwrap() - nl2(&f, &g).unwrap()).abs());
        worst_fixed = worst_fixed
            .max(nl2(&f, &f).unwrap().abs())
            .max((nl2(&f, &vec![0.0; d]).unwrap() - 1.0).abs());
    }
    suite.check(
        "NL2 properties",
        worst_scale <= NL2_TOL && worst_fixed <= NL2_TOL,
        format!(
            "{NL2_SAMPLES} draws, max scale-invariance diff {worst_scale:.1e}, max |nl2(f,f)|, |nl2(f,0)-1| {worst_fixed:.1e} (tol {NL2_TOL:.0e})"
        ),
        t0,
    );
}

fn score_monotonicity(suite: &mut Suite) {
    let t0 = Instant::now();
    let mut rng = CounterRng::new(6, 0);
    let mut breaks = 0;
    let opts = ScoringOptions::default();
    for _ in 0..MONOTONE_COMBOS {
        let fit = |rng: &mut CounterRng| {
            let sigma = rng.uniform_range(0.0, 0.3);
            GaussianFit {
                mu: rng.uniform_range(0.0, 1.0),
                sigma,
                epsilon: rng.uniform_range(0.0, 10.0) * sigma,
            }
        };
        let cal = Calibration::from_fits([fit(&mut rng), fit(&mut rng), fit(&mut rng)]);
        let base = FactorInputs {
            conf: rng.uniform_range(0.0, 1.0),
            r1: rng.uniform_range(0.0, 2.0),
            r2: rng.uniform_range(0.0, 2.0),
            predicted: 0,
        };
        let s0 = combine(&base, &cal, &opts).score;
        let step = rng.uniform_range(1e-6, 0.5);
        let up = |f: fn(&mut FactorInputs, f64)| {
            let mut x = base;
            f(&mut x, step);
            combine(&x, &cal, &opts).score
        };
        if up(|x, s| x.conf += s) < s0 {
            breaks += 1;
        }
        if up(|x, s| x.r1 += s) > s0 {
            breaks += 1;
        }
        if up(|x, s| x.r2 += s) > s0 {
            breaks += 1;
        }
    }
    suite.check(
        "score monotonicity",
        breaks == 0,
        format!("{MONOTONE_COMBOS} fit/feature combinations x 3 coordinates, {breaks} violations"),
        t0,
    );
}

struct Benchmark {
    train: FeatureSet,
    val: FeatureSet,
    id_test: FeatureSet,
    scaled: FeatureSet,
    shifted: FeatureSet,
}

fn benchmark() -> Benchmark {
    let id_spec = SynthSpec {
        samples: 5500,
        cluster_seed: 1,
        seed: 2,
        ..SynthSpec::default()
    };
    let (train_set, val) = split(&synth_id(&id_spec).unwrap(), 500.0 / 5500.0, 3).unwrap();
    let id_test = synth_id(&SynthSpec {
        samples: 2000,
        seed: 4,
        ..id_spec.clone()
    })
    .unwrap();
    let ood = |kind, seed| {
        let spec = SynthSpec {
            samples: 2000,
            seed,
            ood_kind: kind,
            ..id_spec.clone()
        };
        synth_ood(&spec, &id_spec).unwrap()
    };
    Benchmark {
        train: train_set,
        val,
        scaled: ood(OodKind::ScaledNorm, 5),
        shifted: ood(OodKind::Shifted, 6),
        id_test,
    }
}

struct Trained {
    model: DetectorModel,
    calibration: Calibration,
}

fn fit_model(b: &Benchmark, lambda: f64) -> Trained {
    let cfg = TrainConfig {
        lambda,
        ..TrainConfig::default()
    };
    let (model, _) = train(&b.train, &cfg, None).unwrap();
    let calibration =
        fit_gaussians(&model, &b.val, cfg.epsilon_multipliers(), Distance::Nl2).unwrap();
    Trained { model, calibration }
}

fn auroc_of(
    t: &Trained,
    cal: &Calibration,
    b: &Benchmark,
    ood: &FeatureSet,
    opts: ScoringOptions,
) -> f64 {
    let id = scores(&t.model, cal, &b.id_test, &opts).unwrap();
    let o = scores(&t.model, cal, ood, &opts).unwrap();
    auroc(&id, &o).unwrap()
}

fn end_to_end(suite: &mut Suite, b: &Benchmark) -> Trained {
    let t0 = Instant::now();
    let t = fit_model(b, 1.0);
    let opts = ScoringOptions::default();
    let scaled = auroc_of(&t, &t.calibration, b, &b.scaled, opts);
    let shifted = auroc_of(&t, &t.calibration, b, &b.shifted, opts);
    suite.check(
        "synthetic end-to-end separation",
        scaled >= AUROC_BAR && shifted >= AUROC_BAR,
        format!(
            "default config, AUROC scaled-norm {scaled:.4}, shifted {shifted:.4} (bar {AUROC_BAR})"
        ),
        t0,
    );

    let t0 = Instant::now();
    let l2_cal = fit_gaussians(&t.model, &b.val, [10.0; 3], Distance::L2).unwrap();
    let l2_opts = ScoringOptions {
        distance: Distance::L2,
        ..opts
    };
    let l2 = auroc_of(&t, &l2_cal, b, &b.scaled, l2_opts);
    suite.check(
        "NL2 vs L2 ablation",
        scaled > l2,
        format!("scaled-norm AUROC NL2 {scaled:.4} > raw L2 {l2:.4}"),
        t0,
    );
    t
}

fn lambda_robustness(suite: &mut Suite, b: &Benchmark, at_one: Trained) {
    let t0 = Instant::now();
    let mut pooled = b.scaled.raw_features().to_vec();
    pooled.extend_from_slice(b.shifted.raw_features());
    let n = b.scaled.len() + b.shifted.len();
    let pooled = FeatureSet::new(b.scaled.dim(), b.scaled.classes(), pooled, vec![-1; n]).unwrap();
    let mut at_one = Some(at_one);
    let mut layerwise = Vec::new();
    let mut basic = Vec::new();
    for &lambda in &LAMBDAS {
        let t = if lambda == 1.0 {
            at_one.take().unwrap()
        } else {
            fit_model(b, lambda)
        };
        for (out, framework) in [
            (&mut layerwise, Framework::Layerwise),
            (&mut basic, Framework::Basic),
        ] {
            let opts = ScoringOptions {
                framework,
                ..ScoringOptions::default()
            };
            out.push(auroc_of(&t, &t.calibration, b, &pooled, opts));
        }
    }
    let range = |v: &[f64]| {
        v.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - v.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    let (lr, br) = (range(&layerwise), range(&basic));
    let fmt = |v: &[f64]| {
        v.iter()
            .map(|x| format!("{x:.4}"))
            .collect::<Vec<_>>()
            .join(", ")
    };
    suite.report(
        "lambda robustness",
        if lr <= br { Outcome::Pass } else { Outcome::Flag },
        format!(
            "pooled-OoD AUROC over lambda {LAMBDAS:?}: layerwise [{}] range {lr:.4}, basic [{}] range {br:.4}",
            fmt(&layerwise),
            fmt(&basic)
        ),
        t0,
    );
}

fn olsr(dir: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_olsr"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn cli_run(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let steps: [&[&str]; 5] = [
        &[
            "synth",
            "--out",
            "id.avf",
            "--samples",
            "1500",
            "--cluster-seed",
            "1",
            "--seed",
            "2",
        ],
        &[
            "synth",
            "--out",
            "ood.avf",
            "--kind",
            "scaled-norm",
            "--samples",
            "300",
            "--cluster-seed",
            "1",
            "--seed",
            "5",
        ],
        &[
            "train", "--train", "id.avf", "--model", "m.olsr", "--epochs", "20", "--seed", "3",
        ],
        &[
            "score",
            "--model",
            "m.olsr",
            "--features",
            "ood.avf",
            "--out",
            "ood.csv",
        ],
        &[
            "score",
            "--model",
            "m.olsr",
            "--features",
            "id.avf",
            "--out",
            "id.json",
            "--format",
            "json",
        ],
    ];
    for s in steps {
        let out = olsr(dir, s);
        assert!(
            out.status.success(),
            "{s:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    [
        "id.avf", "ood.avf", "m.olsr", "m.json", "ood.csv", "id.json",
    ]
    .iter()
    .map(|f| (f.to_string(), std::fs::read(dir.join(f)).unwrap()))
    .collect()
}

fn determinism(suite: &mut Suite) {
    let t0 = Instant::now();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let first = cli_run(a.path());
    let second = cli_run(b.path());
    let differing: Vec<&str> = first
        .iter()
        .zip(&second)
        .filter(|(x, y)| x.1 != y.1)
        .map(|(x, _)| x.0.as_str())
        .collect();
    suite.check(
        "CLI determinism",
        differing.is_empty(),
        format!(
            "synth+train+score twice: {} files compared, differing {:?}",
            first.len(),
            differing
        ),
        t0,
    );
}

fn main() {
    let mut suite = Suite { failures: 0 };
    gradient_correctness(&mut suite);
    affine_decomposition(&mut suite);
    metric_oracles(&mut suite);
    nl2_properties(&mut suite);
    score_monotonicity(&mut suite);
    let b = benchmark();
    let trained = end_to_end(&mut suite, &b);
    lambda_robustness(&mut suite, &b, trained);
    determinism(&mut suite);
    if suite.failures > 0 {
        println!("acceptance: {} criterion(s) failed", suite.failures);
        std::process::exit(1);
    }
    println!("acceptance: all criteria met");
}
