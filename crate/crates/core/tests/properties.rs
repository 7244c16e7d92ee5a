use proptest::prelude::*;

use particle_field::encoding::{clip_position_gradients, interpolate_feature, EncodingGradients, ParticleCloud};
use particle_field::geom::{Mat3, Rigid, Vec3};
use particle_field::physics::{pbd_step, resolve_collisions, PhysicsConfig};

fn vec3() -> impl Strategy<Value = Vec3<f64>> {
    (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn point() -> impl Strategy<Value = Vec3<f64>> {
    (0.2f64..0.8, 0.2f64..0.8, 0.2f64..0.8).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn cloud(positions: Vec<Vec3<f64>>, features: Vec<f64>, s: f64) -> ParticleCloud<f64> {
    let m = features.len() / positions.len().max(1);
    ParticleCloud {
        velocities: vec![Vec3::zero(); positions.len()],
        positions,
        features,
        feature_dim: m.max(1),
        search_radius: s,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn encoding_commutes_with_rigid_motion(
        pts in prop::collection::vec((point(), prop::array::uniform3(-1.0f64..1.0)), 1..30),
        queries in prop::collection::vec(point(), 1..10),
        axis in vec3(),
        angle in -3.2f64..3.2,
        shift in vec3(),
    ) {
        prop_assume!(axis.norm() > 1e-3);
        let c = cloud(
            pts.iter().map(|p| p.0).collect(),
            pts.iter().flat_map(|p| p.1).collect(),
            0.15,
        );
        let index = c.build_index().unwrap();
        let t = Rigid { rotation: Mat3::from_axis_angle(axis.normalized(), angle), translation: shift * 0.3 };
        let moved = c.apply_rigid_transform(&t).unwrap();
        let moved_index = moved.build_index().unwrap();
        for q in queries {
            let a = interpolate_feature(&c, &index, q);
            let b = interpolate_feature(&moved, &moved_index, t.apply_point(q));
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn queries_beyond_every_particle_are_exactly_zero(
        pts in prop::collection::vec(point(), 1..30),
        q in (0f64..1.0, 0f64..1.0, 0f64..1.0),
    ) {
        let q = Vec3::new(q.0, q.1, q.2);
        let c = cloud(pts.clone(), vec![1.0; pts.len() * 2], 0.05);
        prop_assume!(pts.iter().all(|p| (*p - q).norm() >= 0.05));
        let index = c.build_index().unwrap();
        prop_assert!(interpolate_feature(&c, &index, q).iter().all(|v| v.to_bits() == 0));
    }

    #[test]
    fn clipping_caps_norm_and_keeps_direction(
        rows in prop::collection::vec((vec3(), -6.0f64..3.0), 1..50),
        s in 0.001f64..1.0,
    ) {
        let original: Vec<_> = rows.iter().map(|(v, e)| *v * 10f64.powf(*e)).collect();
        let mut g = EncodingGradients::<f64>::zeros(original.len(), 1);
        g.d_positions = original.clone();
        clip_position_gradients(&mut g, s);
        for (c, o) in g.d_positions.iter().zip(&original) {
            prop_assert!(c.norm() <= s * (1.0 + 1e-12));
            if o.norm() > s {
                prop_assert!((c.dot(*o) / (c.norm() * o.norm()) - 1.0).abs() <= 1e-9);
            } else {
                prop_assert_eq!(c, o);
            }
        }
    }

    #[test]
    fn isolated_pairs_end_at_min_distance(
        a in point(),
        dir in vec3(),
        l in 0.0f64..0.01,
    ) {
        prop_assume!(dir.norm() > 1e-3);
        let b = a + dir.normalized() * l;
        let mut c = cloud(vec![a, b], vec![0.0; 2], 0.05);
        let mut index = c.build_index().unwrap();
        pbd_step(&mut c, &[Vec3::zero(); 2], &PhysicsConfig::default(), &mut index).unwrap();
        prop_assert!(((c.positions[1] - c.positions[0]).norm() - 0.01).abs() <= 1e-9);
        prop_assert!(c.positions.iter().all(|p| p.to_array().iter().all(|v| v.is_finite())));
    }

    #[test]
    fn collision_displacements_cancel(
        pts in prop::collection::vec(point(), 2..40),
    ) {
        // Squeeze into a small box so many pairs collide.
        let mut x: Vec<_> = pts.iter().map(|p| Vec3::splat(0.5) + (*p - Vec3::splat(0.5)) * 0.03).collect();
        let before = x.iter().fold(Vec3::zero(), |acc, p| acc + *p);
        let mut pairs = Vec::new();
        for i in 0..x.len() {
            for j in i + 1..x.len() {
                pairs.push((i, j));
            }
        }
        resolve_collisions(&mut x, &pairs, 0.01);
        let after = x.iter().fold(Vec3::zero(), |acc, p| acc + *p);
        prop_assert!((after - before).max_abs() <= 1e-12);
    }
}
