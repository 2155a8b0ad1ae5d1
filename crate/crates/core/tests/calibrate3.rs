use std::time::Instant;

use ltebm::config::RunConfig;
use ltebm::datasets::gen_25_gaussians;
use ltebm::evaluation::{high_quality_fraction, modes_captured, ModeSpec};
use ltebm::models::checkpoint::{vae_from_checkpoint, vae_to_checkpoint, Checkpoint};
use ltebm::models::{BaseGenerator, VaeModel};
use ltebm::rng::{streams, SeedRng};
use ltebm::training::{decode_prior_samples, sample_latent_ebm, train_latent_ebm, train_vae};

fn cached_vae(seed: u64) -> VaeModel {
    let path = std::env::temp_dir().join(format!("ltebm-cal-vae-{seed}.ckpt"));
    if let Ok(ckpt) = Checkpoint::load(&path) {
        if let Ok(vae) = vae_from_checkpoint(&ckpt) {
            return vae;
        }
    }
    let mut cfg = RunConfig::default();
    cfg.seed = seed;
    let data = gen_25_gaussians(cfg.data_n, cfg.data_sigma, seed).unwrap();
    let (vae, _) = train_vae(&data.points, &cfg.vae_train_config()).unwrap();
    vae_to_checkpoint(&vae, &[]).save(&path).unwrap();
    vae
}

#[test]
#[ignore]
fn sweep_ebm_lr() {
    let seed = 0u64;
    let vae = cached_vae(seed);
    let base = BaseGenerator::from_vae(&vae);
    let spec = ModeSpec::gaussians25(0.05).unwrap();
    let cfg0 = RunConfig::default();
    let data = gen_25_gaussians(cfg0.data_n, cfg0.data_sigma, seed).unwrap();

    let mut srng = SeedRng::stream(seed, streams::SAMPLER);
    let prior_pts = decode_prior_samples(&base, 10_000, &mut srng).unwrap().to_points().unwrap();
    let hqf_prior = high_quality_fraction(&prior_pts, &spec).unwrap();
    println!("prior hqf {hqf_prior:.4}");

    for lr in [3e-4, 1e-3, 3e-3] {
        let t = Instant::now();
        let mut cfg = RunConfig::default();
        cfg.seed = seed;
        cfg.ebm_lr = lr;
        let ebm_cfg = cfg.ebm_train_config();
        let mut erng = SeedRng::stream(seed, streams::MODEL_INIT);
        let energy = ltebm::models::EnergyNetwork::new(2, &cfg.arch_hidden, &mut erng).unwrap();
        let (energy, elog) = train_latent_ebm(energy, &base, &data.points, &ebm_cfg, &spec).unwrap();
        let mut s2 = SeedRng::stream(seed + 1000, streams::SAMPLER);
        let pts = sample_latent_ebm(&base, &energy, 10_000, &ebm_cfg.sample_langevin, &mut s2)
            .unwrap()
            .to_points()
            .unwrap();
        let hqf = high_quality_fraction(&pts, &spec).unwrap();
        let modes = modes_captured(&pts, &spec).unwrap();
        let evals = elog.evals();
        println!(
            "lr {lr:>6}: hqf {hqf:.4} modes {modes} improvement {:+.4} ({} steps, best {:?}, evals {}) {:.0}s",
            hqf - hqf_prior,
            elog.records.len(),
            elog.best_step,
            evals.iter().map(|(s, m)| format!("{s}:{m:.3}")).collect::<Vec<_>>().join(" "),
            t.elapsed().as_secs_f64()
        );
    }
}
