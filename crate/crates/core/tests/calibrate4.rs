use ltebm::config::RunConfig;
use ltebm::datasets::gen_25_gaussians;
use ltebm::dynamics::LangevinConfig;
use ltebm::evaluation::{high_quality_fraction, ModeSpec};
use ltebm::models::checkpoint::{vae_from_checkpoint, Checkpoint};
use ltebm::models::{BaseGenerator, EnergyNetwork};
use ltebm::numerics::Tensor;
use ltebm::rng::{streams, SeedRng};
use ltebm::training::{sample_latent_ebm, train_latent_ebm};

#[test]
#[ignore]
fn diagnose_energy_vs_sampler() {
    let seed = 0u64;
    let path = std::env::temp_dir().join(format!("ltebm-cal-vae-{seed}.ckpt"));
    let vae = vae_from_checkpoint(&Checkpoint::load(&path).unwrap()).unwrap();
    let base = BaseGenerator::from_vae(&vae);
    let spec = ModeSpec::gaussians25(0.05).unwrap();
    let data = gen_25_gaussians(10_000, 0.05, seed).unwrap();

    for alpha in [0.1, 0.01] {
        let mut cfg = RunConfig::default();
        cfg.seed = seed;
        cfg.ebm_lr = 1e-3;
        cfg.ebm_alpha = alpha;
        let ebm_cfg = cfg.ebm_train_config();
        let mut erng = SeedRng::stream(seed, streams::ENERGY_INIT);
        let energy = EnergyNetwork::new(2, &cfg.arch_hidden, &mut erng).unwrap();
        let (energy, _) = train_latent_ebm(energy, &base, &data.points, &ebm_cfg, &spec).unwrap();

        // energy separation: data vs decoded prior
        let mut rng = SeedRng::stream(77, streams::SAMPLER);
        let z = base.sample_prior(10_000, &mut rng).unwrap();
        let decoded = base.decode(&z).unwrap();
        let e_prior = energy.energy(&decoded).unwrap();
        let data_t = Tensor::from_points(&data.points).unwrap();
        let e_data = energy.energy(&data_t).unwrap();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;

        // ideal-sampler bound: importance resampling of prior draws by exp(-E)
        let w: Vec<f64> = e_prior.iter().map(|e| (-e).exp()).collect();
        let wsum: f64 = w.iter().sum();
        let mut resampled = Vec::with_capacity(10_000);
        for _ in 0..10_000 {
            let mut u = rng.uniform() * wsum;
            let mut idx = 0;
            for (i, wi) in w.iter().enumerate() {
                u -= wi;
                if u <= 0.0 {
                    idx = i;
                    break;
                }
            }
            resampled.push([decoded.row(idx)[0], decoded.row(idx)[1]]);
        }
        let hqf_snis = high_quality_fraction(&resampled, &spec).unwrap();

        let prior_pts = decoded.to_points().unwrap();
        let hqf_prior = high_quality_fraction(&prior_pts, &spec).unwrap();

        for steps in [100usize, 300] {
            let ccfg = LangevinConfig { steps, ..ebm_cfg.sample_langevin };
            let mut s2 = SeedRng::stream(seed + 2000, streams::SAMPLER);
            let pts = sample_latent_ebm(&base, &energy, 10_000, &ccfg, &mut s2)
                .unwrap()
                .to_points()
                .unwrap();
            let hqf = high_quality_fraction(&pts, &spec).unwrap();
            println!("alpha {alpha}: chain {steps} steps -> hqf {hqf:.4}");
        }
        println!(
            "alpha {alpha}: E(data) {:.3}, E(prior decode) {:.3}, gap {:.3} | hqf prior {hqf_prior:.4}, SNIS-ideal {hqf_snis:.4}",
            mean(&e_data),
            mean(&e_prior),
            mean(&e_prior) - mean(&e_data)
        );
    }
}
