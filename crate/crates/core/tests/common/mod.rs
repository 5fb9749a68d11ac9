#![allow(dead_code)]

pub mod checks;
pub mod oracle;

use rand::Rng;
use wbc_core::model::{
    BaseKind, Configuration, FrameSpec, JointGroup, JointSpec, LinkSpec, ModelSpec, RobotModel, RobotState, GRAVITY,
};

/// Fixed-base serial chain of uniform rods. Each rod lies along its local `+x`.
pub fn rod_chain(masses: &[f64], lengths: &[f64], gravity: f64) -> RobotModel {
    assert_eq!(masses.len(), lengths.len());
    let mut links = vec![LinkSpec::rod("mount", 1.0, 0.1, [1.0, 0.0])];
    let mut joints = Vec::new();
    for (i, (&m, &l)) in masses.iter().zip(lengths).enumerate() {
        links.push(LinkSpec::rod(&format!("rod{i}"), m, l, [1.0, 0.0]));
        let origin = if i == 0 { [0.0, 0.0] } else { [lengths[i - 1], 0.0] };
        joints.push(JointSpec {
            name: format!("j{i}"),
            parent: i,
            child: i + 1,
            origin,
            position_limits: [-10.0, 10.0],
            velocity_limit: 100.0,
            accel_limits: [-1e3, 1e3],
            torque_limits: [-1e3, 1e3],
            group: JointGroup::Arm,
        });
    }
    let tip = FrameSpec { link: masses.len(), offset: [*lengths.last().unwrap(), 0.0], angle: 0.0 };
    let spec = ModelSpec {
        name: "chain".into(),
        base: BaseKind::Fixed,
        links,
        joints,
        contacts: vec![],
        hand: tip.clone(),
        feet: [
            FrameSpec { link: 0, offset: [0.0, 0.0], angle: 0.0 },
            FrameSpec { link: 0, offset: [0.0, 0.0], angle: 0.0 },
        ],
        friction_mu: 1.0,
        gravity,
        nominal: Configuration { base_pose: [0.0, 0.0, 0.0], joint_pos: vec![0.0; masses.len()] },
    };
    RobotModel::new(spec).unwrap()
}

pub fn three_link_arm() -> RobotModel {
    rod_chain(&[2.0, 1.5, 0.5], &[0.3, 0.3, 0.1], GRAVITY)
}

/// Random state near the nominal posture.
pub fn random_state<R: Rng>(model: &RobotModel, rng: &mut R, spread: f64, speed: f64) -> RobotState {
    let nominal = model.nominal_state();
    let mut base = nominal.base_pose;
    if model.base() == BaseKind::Floating {
        for b in &mut base {
            *b += rng.gen_range(-spread..spread);
        }
    }
    let q = nominal.joint_pos.iter().map(|q| q + rng.gen_range(-spread..spread)).collect();
    let v = (0..model.n_v()).map(|_| rng.gen_range(-speed..speed)).collect();
    RobotState::new(model, base, q, v).unwrap()
}
