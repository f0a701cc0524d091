use num_complex::Complex64;
use proptest::prelude::*;
use std::path::PathBuf;

use equidyn::potential::MuMethod;
use equidyn::{RationalMap, SpherePoint};
use equidyn_cli::{ExperimentConfig, ExperimentKind, NRange, Target};

fn target() -> impl Strategy<Value = Target> {
    prop_oneof![
        Just(Target::Identity),
        Just(Target::L1),
        Just(Target::Point(SpherePoint::Infinity)),
        (-1e6f64..1e6, -1e6f64..1e6).prop_map(|(x, y)| Target::Point(SpherePoint::finite(x, y).unwrap())),
    ]
}

prop_compose! {
    fn config()(
        kind in prop::sample::select(ExperimentKind::ALL.to_vec()),
        lambda in (-3f64..3.0, -3f64..3.0),
        start in 1usize..10,
        len in 0usize..10,
        targets in prop::collection::vec(target(), 1..4),
        etas in prop::collection::vec(1.0001f64..3.0, 1..4),
        samples in 10_000u64..10_000_000,
        potential in any::<bool>(),
        seed in any::<u64>(),
        c_f in prop::option::of(0.1f64..10.0),
        radii in prop::collection::vec(0.1f64..10.0, 0..3),
        s in 0.01f64..1.0,
        center in prop::option::of((-2f64..2.0, -2f64..2.0)),
    ) -> ExperimentConfig {
        ExperimentConfig {
            map: RationalMap::unicritical(2, Complex64::new(lambda.0, lambda.1)).unwrap().to_spec(),
            n_range: NRange { start, end: start + len },
            targets,
            etas,
            samples,
            mu_samples: samples / 2 + 10_000,
            method: if potential { MuMethod::Potential } else { MuMethod::InverseIteration },
            c_f,
            seed,
            out: PathBuf::from(format!("runs/{seed}")),
            radii,
            s,
            center: center.map(|(x, y)| Complex64::new(x, y)),
            ..ExperimentConfig::new(kind)
        }
    }
}

proptest! {
    #[test]
    fn emit_then_parse_is_identity(c in config()) {
        let text = c.emit();
        let back = ExperimentConfig::parse(&text).unwrap();
        prop_assert_eq!(&back, &c, "{}", text);
        prop_assert_eq!(back.emit(), text);
    }
}
