//! Config schema properties: serialization round-trips exactly, unknown
//! keys are rejected, and the flag grammar agrees with the JSON forms.

use proptest::prelude::*;

#[path = "../src/config.rs"]
mod config;

use config::{
    parse_masses, MinimizeConfig, PotentialSpec, ResolutionSpec, TensionSpec, CONFIG_VERSION,
};

fn tension_strategy() -> impl Strategy<Value = TensionSpec> {
    prop_oneof![
        Just(TensionSpec::Euclidean),
        (0.1f64..5.0, 0.1f64..5.0, 0.1f64..5.0)
            .prop_map(|(a, b, c)| TensionSpec::Ellipsoidal { diag: [a, b, c] }),
        (1.5f64..8.0, 1e-6f64..0.1).prop_map(|(p, eps)| TensionSpec::SmoothLp { p, eps }),
    ]
}

fn potential_strategy() -> impl Strategy<Value = PotentialSpec> {
    prop_oneof![
        Just(PotentialSpec::Zero),
        prop_oneof![Just(1u32), Just(2u32), Just(4u32)]
            .prop_map(|power| PotentialSpec::RadialPower { power }),
        (0.01f64..10.0).prop_map(|rho| PotentialSpec::Gravity { rho }),
        (0.01f64..3.0).prop_map(|radius| PotentialSpec::FlatBottom { radius }),
        (-2.0f64..2.0, -2.0f64..2.0, -2.0f64..2.0)
            .prop_map(|(x, y, z)| PotentialSpec::DoubleWell { offset: [x, y, z] }),
    ]
}

proptest! {
    #[test]
    fn minimize_config_round_trips(
        tension in tension_strategy(),
        potential in potential_strategy(),
        mass in 0.01f64..100.0,
        n_theta in 8usize..64,
        n_phi in 16usize..128,
        max_iters in 1usize..5000,
        rng_seed in any::<u64>(),
    ) {
        let cfg = MinimizeConfig {
            version: CONFIG_VERSION,
            tension,
            potential,
            mass,
            resolution: ResolutionSpec { n_theta, n_phi, n_rays: 96 },
            max_iters,
            residual_tol: 0.02,
            starts: vec!["wulff".into(), "random:3".into()],
            rng_seed,
        };
        let text = serde_json::to_string(&cfg).unwrap();
        let back: MinimizeConfig = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(&back, &cfg);
        // Serializing the parsed value reproduces the same bytes.
        prop_assert_eq!(serde_json::to_string(&back).unwrap(), text);
    }

    #[test]
    fn tension_flag_matches_json(tension in tension_strategy()) {
        let flag = match &tension {
            TensionSpec::Euclidean => "euclidean".to_string(),
            TensionSpec::Ellipsoidal { diag } =>
                format!("ellipsoidal:{},{},{}", diag[0], diag[1], diag[2]),
            TensionSpec::SmoothLp { p, eps } => format!("smooth-lp:{p},{eps}"),
        };
        prop_assert_eq!(TensionSpec::parse_flag(&flag).unwrap(), tension);
    }
}

#[test]
fn unknown_keys_are_rejected() {
    let text = r#"{"version": 1, "tension": "euclidean", "mass": 1.0, "extra": 0}"#;
    assert!(serde_json::from_str::<config::WulffConfig>(text).is_err());
    let nested = r#"{"version": 1, "tension": {"smooth-lp": {"p": 2.0, "eps": 0.01, "q": 3}}, "mass": 1.0}"#;
    assert!(serde_json::from_str::<config::WulffConfig>(nested).is_err());
    let good = r#"{"version": 1, "tension": {"ellipsoidal": {"diag": [1.0, 1.5, 2.0]}}, "mass": 1.0}"#;
    assert!(serde_json::from_str::<config::WulffConfig>(good).is_ok());
}

#[test]
fn mass_grammar() {
    let grid = parse_masses("0.1:10:3").unwrap();
    assert_eq!(grid.len(), 3);
    assert!((grid[0] - 0.1).abs() < 1e-12);
    assert!((grid[1] - 1.0).abs() < 1e-12);
    assert!((grid[2] - 10.0).abs() < 1e-12);
    assert_eq!(parse_masses("1,2,4").unwrap(), vec![1.0, 2.0, 4.0]);
    assert!(parse_masses("0:-1:5").is_err());
    assert!(parse_masses("x").is_err());
}
