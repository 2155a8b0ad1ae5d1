use std::time::Instant;

use ltebm::config::RunConfig;
use ltebm::datasets::gen_25_gaussians;
use ltebm::evaluation::{high_quality_fraction, modes_captured, ModeSpec};
use ltebm::models::BaseGenerator;
use ltebm::rng::{streams, SeedRng};
use ltebm::training::{decode_prior_samples, sample_latent_ebm, train_latent_ebm, train_vae};

#[test]
#[ignore]
fn calibrate_gaussians_pipeline() {
    for seed in [0u64, 1] {
        let mut cfg = RunConfig::default();
        cfg.seed = seed;
        let t0 = Instant::now();
        let data = gen_25_gaussians(cfg.data_n, cfg.data_sigma, seed).unwrap();
        let spec = ModeSpec::gaussians25(0.05).unwrap();

        let (vae, vlog) = train_vae(&data.points, &cfg.vae_train_config()).unwrap();
        let t_vae = t0.elapsed().as_secs_f64();

        let base = BaseGenerator::from_vae(&vae);
        let mut srng = SeedRng::stream(seed, streams::SAMPLER);
        let prior_pts =
            decode_prior_samples(&base, 10_000, &mut srng).unwrap().to_points().unwrap();
        let hqf_prior = high_quality_fraction(&prior_pts, &spec).unwrap();
        let modes_prior = modes_captured(&prior_pts, &spec).unwrap();

        let t1 = Instant::now();
        let mut erng = SeedRng::stream(seed, streams::MODEL_INIT);
        let energy =
            ltebm::models::EnergyNetwork::new(2, &cfg.arch_hidden, &mut erng).unwrap();
        let ebm_cfg = cfg.ebm_train_config();
        let (energy, elog) =
            train_latent_ebm(energy, &base, &data.points, &ebm_cfg, &spec).unwrap();
        let t_ebm = t1.elapsed().as_secs_f64();

        let ebm_pts = sample_latent_ebm(&base, &energy, 10_000, &ebm_cfg.sample_langevin, &mut srng)
            .unwrap()
            .to_points()
            .unwrap();
        let hqf_ebm = high_quality_fraction(&ebm_pts, &spec).unwrap();
        let modes_ebm = modes_captured(&ebm_pts, &spec).unwrap();
        println!(
            "seed {seed}: vae {t_vae:.0}s loss {:.3}, prior hqf {hqf_prior:.4} modes {modes_prior} | ebm {t_ebm:.0}s ({} steps, best {:?}) hqf {hqf_ebm:.4} modes {modes_ebm} | improvement {:+.4} | total {:.0}s",
            vlog.records.last().unwrap().e_pos,
            elog.records.len(),
            elog.best_step,
            hqf_ebm - hqf_prior,
            t0.elapsed().as_secs_f64()
        );
    }
}
