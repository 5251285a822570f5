//! Built-in benchmark scenes.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::Vector3;

use super::{Bounds, Effect, Task, TransitionRule};
use super::spec::{
    BaseSpec, ChainSpec, JointKindSpec, JointSpec, ManifoldKind, ManifoldSpec, ObstacleSpec,
    RobotSpec, SceneSpec,
};
use crate::kinematics;
use crate::manifold::{project, Configuration};
use crate::{Error, Result};

/// The four benchmark scenes.
pub const BENCHMARK_SCENES: [&str; 4] = [
    "point3d_free",
    "point3d_obstacles",
    "transport_a_mini",
    "transport_b_mini",
];

/// Every scene name accepted by [`builtin_spec`].
pub const SCENE_NAMES: [&str; 7] = [
    "point3d_free",
    "point3d_obstacles",
    "transport_a_mini",
    "transport_b_mini",
    "plane_cylinder_point",
    "corner_2d",
    "line_2d",
];

pub fn builtin_spec(name: &str) -> Result<SceneSpec> {
    match name {
        "point3d_free" => Ok(point3d(false)),
        "point3d_obstacles" => Ok(point3d(true)),
        "transport_a_mini" => transport_a(),
        "transport_b_mini" => transport_b(),
        "plane_cylinder_point" => Ok(plane_cylinder_point()),
        "corner_2d" => Ok(corner_2d()),
        "line_2d" => Ok(line_2d()),
        _ => Err(Error::UnknownScene {
            name: name.to_string(),
            available: SCENE_NAMES.iter().map(|s| s.to_string()).collect(),
        }),
    }
}

pub fn build_benchmark_scene(name: &str) -> Result<Task> {
    builtin_spec(name)?.build()
}

fn manifold(name: &str, kind: ManifoldKind) -> ManifoldSpec {
    ManifoldSpec {
        name: name.to_string(),
        kind,
    }
}

fn boxed(id: Option<&str>, center: [f64; 3], half: [f64; 3]) -> ObstacleSpec {
    ObstacleSpec {
        id: id.map(str::to_string),
        min: (0..3).map(|i| center[i] - half[i]).collect(),
        max: (0..3).map(|i| center[i] + half[i]).collect(),
    }
}

/// Half-width of the boxes in the obstacle variant of the 3D point scene.
const POINT_BOX_HALF: f64 = 0.75;

/// Box centers for the obstacle variant. On each intersection circle two
/// boxes cover the quarter the obstacle-free optimum crosses, forcing a
/// detour around either end.
const POINT_BOX_CENTERS: [[f64; 3]; 4] = [
    [2.0, 0.7, 2.5],
    [0.7, 2.0, 2.5],
    [-2.0, -0.7, -2.5],
    [-0.7, -2.0, -2.5],
];

fn point3d(obstacles: bool) -> SceneSpec {
    let goal = vec![-3.5, -3.5, -4.45];
    SceneSpec {
        name: if obstacles { "point3d_obstacles" } else { "point3d_free" }.into(),
        ambient_dim: 3,
        bounds: Bounds::cube(3, -6.0, 6.0),
        manifolds: vec![
            manifold(
                "upper_paraboloid",
                ManifoldKind::Paraboloid {
                    coeff: 0.1,
                    offset: 2.0,
                },
            ),
            manifold("cylinder", ManifoldKind::Cylinder { radius: 2.0 }),
            manifold(
                "lower_paraboloid",
                ManifoldKind::Paraboloid {
                    coeff: -0.1,
                    offset: -2.0,
                },
            ),
            manifold("goal", ManifoldKind::Point { target: goal }),
        ],
        start: vec![3.5, 3.5, 4.45],
        obstacles: if obstacles {
            POINT_BOX_CENTERS
                .iter()
                .map(|c| boxed(None, *c, [POINT_BOX_HALF; 3]))
                .collect()
        } else {
            Vec::new()
        },
        transitions: Vec::new(),
        robot: None,
        collision_step: super::DEFAULT_COLLISION_STEP,
    }
}

/// Plane `z = 0`, then the unit cylinder, then the point `(1, 0, 2)`.
fn plane_cylinder_point() -> SceneSpec {
    SceneSpec {
        name: "plane_cylinder_point".into(),
        ambient_dim: 3,
        bounds: Bounds::cube(3, -3.0, 3.0),
        manifolds: vec![
            manifold(
                "floor",
                ManifoldKind::Affine {
                    a: vec![vec![0.0, 0.0, 1.0]],
                    b: vec![0.0],
                },
            ),
            manifold("cylinder", ManifoldKind::Cylinder { radius: 1.0 }),
            manifold(
                "goal",
                ManifoldKind::Point {
                    target: vec![1.0, 0.0, 2.0],
                },
            ),
        ],
        start: vec![-2.0, 0.0, 0.0],
        obstacles: Vec::new(),
        transitions: Vec::new(),
        robot: None,
        collision_step: super::DEFAULT_COLLISION_STEP,
    }
}

/// The line `y = 0` in the plane ending at the point `(2, 0)`.
fn line_2d() -> SceneSpec {
    SceneSpec {
        name: "line_2d".into(),
        ambient_dim: 2,
        bounds: Bounds::cube(2, -1.0, 4.0),
        manifolds: vec![
            manifold(
                "x_axis",
                ManifoldKind::Affine {
                    a: vec![vec![0.0, 1.0]],
                    b: vec![0.0],
                },
            ),
            manifold("corner", ManifoldKind::Point { target: vec![2.0, 0.0] }),
        ],
        start: vec![0.0, 0.0],
        obstacles: Vec::new(),
        transitions: Vec::new(),
        robot: None,
        collision_step: super::DEFAULT_COLLISION_STEP,
    }
}

/// Along `y = 0` to the line `x = 2`, then up it to `(2, 3)`. The only
/// intersection is `(2, 0)`, so the optimal cost is exactly 5.
fn corner_2d() -> SceneSpec {
    SceneSpec {
        name: "corner_2d".into(),
        ambient_dim: 2,
        bounds: Bounds::cube(2, -1.0, 4.0),
        manifolds: vec![
            manifold(
                "x_axis",
                ManifoldKind::Affine {
                    a: vec![vec![0.0, 1.0]],
                    b: vec![0.0],
                },
            ),
            manifold(
                "wall",
                ManifoldKind::Affine {
                    a: vec![vec![1.0, 0.0]],
                    b: vec![2.0],
                },
            ),
            manifold("goal", ManifoldKind::Point { target: vec![2.0, 3.0] }),
        ],
        start: vec![0.0, 0.0],
        obstacles: Vec::new(),
        transitions: Vec::new(),
        robot: None,
        collision_step: super::DEFAULT_COLLISION_STEP,
    }
}

fn revolute(axis: [f64; 3], xyz: [f64; 3], limits: [f64; 2]) -> JointSpec {
    JointSpec {
        axis,
        kind: JointKindSpec::Revolute,
        origin: BaseSpec { xyz, rpy: [0.0; 3] },
        limits,
    }
}

fn prismatic(axis: [f64; 3], limits: [f64; 2]) -> JointSpec {
    JointSpec {
        axis,
        kind: JointKindSpec::Prismatic,
        origin: BaseSpec::default(),
        limits,
    }
}

fn bounds_of(robot: &RobotSpec) -> Bounds {
    let limits: Vec<[f64; 2]> = robot
        .chains
        .iter()
        .flat_map(|c| c.joints.iter().map(|j| j.limits))
        .collect();
    Bounds {
        lo: limits.iter().map(|l| l[0]).collect(),
        hi: limits.iter().map(|l| l[1]).collect(),
    }
}

const TABLE_TOP: f64 = 0.4;

/// One 4-DOF arm (yaw, then three pitch joints) on a table. It moves
/// upright to a cube, grasps it, carries it upright over a low wall and
/// reaches the place location.
fn transport_a() -> Result<SceneSpec> {
    let arm = ChainSpec {
        name: "arm".into(),
        base: BaseSpec {
            xyz: [0.0, 0.0, TABLE_TOP + 0.02],
            rpy: [0.0; 3],
        },
        joints: vec![
            revolute([0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [-PI, PI]),
            revolute([0.0, 1.0, 0.0], [0.0, 0.0, 0.3], [-2.0, 2.0]),
            revolute([0.0, 1.0, 0.0], [0.35, 0.0, 0.0], [-2.5, 2.5]),
            revolute([0.0, 1.0, 0.0], [0.3, 0.0, 0.0], [-2.5, 2.5]),
        ],
        tool: [0.0, 0.0, -0.1],
    };
    let robot = RobotSpec { chains: vec![arm] };
    let tool = robot.chains[0].tool;
    let cube_half = 0.04;
    let cube_center = [0.45, -0.3, TABLE_TOP + cube_half + 0.01];
    let grasp = [cube_center[0], cube_center[1], cube_center[2] + cube_half + 0.03];
    let place = [0.45, 0.3, grasp[2]];
    let upright = ManifoldKind::Orientation {
        chain: 0,
        axis: [0.0, 0.0, 1.0],
        up: [0.0, 0.0, 1.0],
    };
    Ok(SceneSpec {
        name: "transport_a_mini".into(),
        ambient_dim: 4,
        bounds: bounds_of(&robot),
        manifolds: vec![
            manifold("approach", upright.clone()),
            manifold(
                "pick",
                ManifoldKind::Pick {
                    chain: 0,
                    point: tool,
                    target: grasp,
                },
            ),
            manifold("transport", upright),
            manifold(
                "place",
                ManifoldKind::Pick {
                    chain: 0,
                    point: tool,
                    target: place,
                },
            ),
        ],
        start: vec![-1.5, -0.3, 0.9, -0.6],
        obstacles: vec![
            boxed(None, [0.0, 0.0, TABLE_TOP / 2.0], [1.0, 1.0, TABLE_TOP / 2.0]),
            boxed(Some("cube"), cube_center, [cube_half; 3]),
            boxed(None, [0.47, 0.0, TABLE_TOP + 0.1], [0.22, 0.03, 0.1]),
        ],
        transitions: vec![TransitionRule {
            trigger: 1,
            effect: Effect::Attach {
                object: "cube".into(),
                chain: 0,
                point: tool,
            },
        }],
        robot: Some(robot),
        collision_step: super::DEFAULT_COLLISION_STEP,
    })
}

fn three_dof_arm(name: &str, base: [f64; 3], yaw: f64) -> ChainSpec {
    ChainSpec {
        name: name.into(),
        base: BaseSpec {
            xyz: base,
            rpy: [0.0, 0.0, yaw],
        },
        joints: vec![
            revolute([0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [-PI, PI]),
            revolute([0.0, 1.0, 0.0], [0.0, 0.0, 0.25], [-2.0, 2.0]),
            revolute([0.0, 1.0, 0.0], [0.3, 0.0, 0.0], [-2.6, 2.6]),
        ],
        tool: [0.3, 0.0, 0.0],
    }
}

/// Two 3-DOF arms on opposite tables and a planar mobile base between them.
/// Stacked configuration: arm 1 (0..3), base (3..5), arm 2 (5..8).
///
/// Arm 1 grasps a cube while the base drives up to it, puts the cube on the
/// base's tray, the base carries it around a pillar to the second table and
/// arm 2 reaches the tray.
fn transport_b() -> Result<SceneSpec> {
    let arm1 = three_dof_arm("arm1", [-0.75, 0.0, TABLE_TOP + 0.02], 0.0);
    let arm2 = three_dof_arm("arm2", [0.75, 0.0, TABLE_TOP + 0.02], PI);
    // The slide joints sit below the floor so their frames never touch an
    // obstacle; only the mast and tray stand above it.
    let base = ChainSpec {
        name: "base".into(),
        base: BaseSpec {
            xyz: [0.0, 0.0, -0.5],
            rpy: [0.0; 3],
        },
        joints: vec![
            prismatic([1.0, 0.0, 0.0], [-1.0, 1.0]),
            prismatic([0.0, 1.0, 0.0], [-1.5, 1.5]),
        ],
        tool: [0.0, 0.0, 0.95],
    };
    let robot = RobotSpec {
        chains: vec![arm1, base, arm2],
    };
    let tool = robot.chains[0].tool;
    let tray = robot.chains[1].tool;

    let arm1_home = [0.0, -0.8, 1.6];
    let arm2_home = [0.0, -0.8, 1.6];
    let base_start = [0.0, -0.6];
    let dock_1 = [-0.3, 0.0];
    let dock_2 = [0.3, 0.0];

    let cube_half = 0.03;
    let cube_center = [-0.75, 0.3, TABLE_TOP + cube_half + 0.01];
    let grasp = [cube_center[0], cube_center[1], cube_center[2] + cube_half + 0.03];

    // Arm 1 pose that puts its tool on the tray with the base at dock 1.
    let sys = Arc::new(robot.build()?);
    let mut guess = vec![0.0, -0.3, 1.2];
    guess.extend_from_slice(&dock_1);
    guess.extend_from_slice(&arm2_home);
    let at_tray = kinematics::handover_constraint(
        "drop",
        sys.clone(),
        (0, Vector3::from(tool)),
        (1, Vector3::from(tray)),
    );
    let dropped = project(&Configuration::from(guess), &at_tray, 1e-12, 200).map_err(|e| {
        Error::InvalidScene(format!("no arm pose reaches the tray: {e}"))
    })?;
    let drop_pose = [dropped[0], dropped[1], dropped[2]];

    let lock = |indices: &[usize], values: &[f64]| ManifoldKind::JointLock {
        indices: indices.to_vec(),
        values: values.to_vec(),
    };
    let cat = |parts: &[&[f64]]| parts.iter().flat_map(|p| p.iter().copied()).collect::<Vec<_>>();

    let mut start = arm1_home.to_vec();
    start.extend_from_slice(&base_start);
    start.extend_from_slice(&arm2_home);

    Ok(SceneSpec {
        name: "transport_b_mini".into(),
        ambient_dim: 8,
        bounds: bounds_of(&robot),
        manifolds: vec![
            manifold("reach", lock(&[3, 4, 5, 6, 7], &cat(&[&base_start, &arm2_home]))),
            manifold(
                "grasp",
                ManifoldKind::Intersection {
                    parts: vec![
                        ManifoldKind::Pick {
                            chain: 0,
                            point: tool,
                            target: grasp,
                        },
                        lock(&[5, 6, 7], &arm2_home),
                    ],
                },
            ),
            manifold("load", lock(&[3, 4, 5, 6, 7], &cat(&[&dock_1, &arm2_home]))),
            manifold("drive", lock(&[0, 1, 2, 5, 6, 7], &cat(&[&drop_pose, &arm2_home]))),
            manifold("unload", lock(&[0, 1, 2, 3, 4], &cat(&[&drop_pose, &dock_2]))),
            manifold(
                "receive",
                ManifoldKind::Handover {
                    first: 2,
                    first_point: tool,
                    second: 1,
                    second_point: tray,
                },
            ),
        ],
        start,
        obstacles: vec![
            boxed(None, [-0.85, 0.0, TABLE_TOP / 2.0], [0.35, 0.6, TABLE_TOP / 2.0]),
            boxed(None, [0.85, 0.0, TABLE_TOP / 2.0], [0.35, 0.6, TABLE_TOP / 2.0]),
            boxed(None, [0.0, 0.0, 0.5], [0.08, 0.25, 0.5]),
            boxed(Some("cube"), cube_center, [cube_half; 3]),
        ],
        transitions: vec![
            TransitionRule {
                trigger: 0,
                effect: Effect::Attach {
                    object: "cube".into(),
                    chain: 0,
                    point: tool,
                },
            },
            TransitionRule {
                trigger: 2,
                effect: Effect::Detach {
                    object: "cube".into(),
                },
            },
            TransitionRule {
                trigger: 2,
                effect: Effect::Attach {
                    object: "cube".into(),
                    chain: 1,
                    point: tray,
                },
            },
        ],
        robot: Some(robot),
        collision_step: super::DEFAULT_COLLISION_STEP,
    })
}
