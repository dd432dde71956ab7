use mixfbm_cli::RunConfig;
use proptest::prelude::*;
use serde_json::json;

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn configs_survive_json_and_keep_their_digest(
        hurst in 0.51f64..0.99,
        slack in 0.01f64..0.99,
        horizon in 0.1f64..10.0,
        n_steps in 1usize..2048,
        epsilon in 0.01f64..1.0,
        ratio in 0.01f64..0.99,
        seed in any::<u64>(),
        level in -3.0f64..3.0,
    ) {
        // alpha strictly inside (1 - H, 1/2)
        let alpha = (1.0 - hurst) + slack * (hurst - 0.5);
        let text = json!({
            "system": "ou_sin",
            "hurst": hurst,
            "alpha": alpha,
            "horizon": horizon,
            "n_steps": n_steps,
            "seed": seed,
            "scales": {"epsilon": epsilon, "delta": ratio * epsilon},
            "rate": {"target": {"hit_endpoint": [level]}},
            "mc": {"event": {"sup_norm_exceeds": level.abs()}, "epsilon_schedule": [epsilon], "n_samples": [10]},
        })
        .to_string();
        let cfg = RunConfig::from_json(&text).unwrap();
        let back = RunConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap();
        prop_assert_eq!(back.digest(), cfg.digest());
        prop_assert_eq!(back, cfg);
    }
}
