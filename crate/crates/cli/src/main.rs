//! `rig-annotate`: calibration, annotation, synchronization and rendering of
//! tracked-camera recordings.
//!
//! Exit status is 0 on success, 1 on a domain error (bad data, failed
//! estimation) and 2 on a usage error. Diagnostics go to stderr.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rig_annotate::annotate::{
    align_background, annotate_camera_trajectory, annotate_object, error_budget, tip_points, TipMeasurementSession,
};
use rig_annotate::calib::{handeye_closed_form, handeye_trajectory, pivot_calibrate, resample_onto_camera};
use rig_annotate::geom::Vec3;
use rig_annotate::io::pgm::{depth_to_pgm, mask_to_pgm, write_pgm};
use rig_annotate::io::ply::read_ply;
use rig_annotate::io::session::{read_camera, read_scene, write_session};
use rig_annotate::io::{
    read_hand_eye, read_json, read_points_input, read_trajectory, relative_ref, to_json_string, write_json,
    AnnotationFile, BackgroundResultFile, BudgetRecord, FramedPose, HandEyeObservationsFile, HandEyeResultFile,
    ObjectRecord, PivotResultFile, PointCloudFile, PointsInput, PoseListFile, StagesFile, SyncResultFile,
    TrajectoryFile,
};
use rig_annotate::pipeline::{verify_session, PipelineOptions};
use rig_annotate::registration::IcpParams;
use rig_annotate::render::{build_bvh, render_with};
use rig_annotate::sim::{simulate_session, SessionConfig};
use rig_annotate::sync::{brute_force_offset, motion_curve, synchronize_streams, CurveOptions, CurveSignal};
use rig_annotate::{Error, Result};

const THREADS_ENV: &str = "RIG_ANNOTATE_THREADS";

#[derive(Parser)]
#[command(name = "rig-annotate", version, about = "Dataset annotation for tracked RGB-D cameras")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tool-tip offset from poses pivoting about a fixed point.
    Pivot {
        #[arg(long)]
        poses: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Hand-eye calibration.
    #[command(subcommand)]
    Handeye(HandEye),
    /// Object pose from tip measurements, correspondences and ICP.
    Annotate(AnnotateArgs),
    /// Background pose from a partial scan and an initial guess.
    Background {
        #[arg(long)]
        scan: PathBuf,
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        init: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Time offset to add to stream B so it lines up with stream A.
    Sync(SyncArgs),
    /// Camera trajectory from a marker trajectory and a hand-eye transform.
    Camtraj {
        #[arg(long)]
        marker: PathBuf,
        #[arg(long)]
        handeye: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Depth (16-bit mm) and instance-mask (8-bit) PGMs of a scene.
    Render {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        camera: PathBuf,
        #[arg(long)]
        pose: PathBuf,
        #[arg(long)]
        depth: PathBuf,
        #[arg(long)]
        mask: PathBuf,
    },
    /// Writes a simulated session (ground truth and noisy observations).
    Sim {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Error-budget bounds from per-stage errors.
    Budget {
        #[arg(long)]
        stages: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Runs the full pipeline on a simulated session and reports errors
    /// against its ground truth.
    Verify {
        #[arg(long)]
        session: PathBuf,
    },
}

#[derive(Subcommand)]
enum HandEye {
    /// Averaged per-frame estimates from board observations.
    Closed {
        #[arg(long)]
        observations: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// From synchronized camera and marker trajectories.
    Traj {
        #[arg(long)]
        camera: PathBuf,
        #[arg(long)]
        marker: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct AnnotateArgs {
    /// Point cloud in the base frame, or a tip session (pose list).
    #[arg(long)]
    points: PathBuf,
    #[arg(long)]
    mesh: PathBuf,
    /// Mesh-frame points matching `--points` in order.
    #[arg(long)]
    correspondences: PathBuf,
    /// Pivot result supplying the tip offset of a tip session.
    #[arg(long)]
    pivot: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    icp_max_iter: usize,
    #[arg(long, default_value_t = 1e-8)]
    icp_tol: f64,
    /// Correspondence gate, millimeters.
    #[arg(long, default_value_t = 50.0)]
    gate: f64,
    #[arg(long, default_value_t = 0.1)]
    trim: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Signal {
    Translation,
    Rotation,
}

#[derive(Args)]
struct SyncArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    #[arg(long)]
    dt: f64,
    #[arg(long)]
    max_offset: f64,
    /// Also run the exhaustive search and report it.
    #[arg(long)]
    oracle: bool,
    #[arg(long, value_enum, default_value = "translation")]
    signal: Signal,
    /// Moving-average half-width, in grid samples.
    #[arg(long, default_value_t = 0)]
    smooth: usize,
    #[arg(long)]
    out: PathBuf,
}

fn pivot(poses: &Path, out: &Path) -> Result<()> {
    let doc: PoseListFile = read_json(poses)?;
    let res = pivot_calibrate(&doc.to_poses()?)?;
    let (marker, base) =
        (rig_annotate::geom::FrameId::new(&doc.child_frame)?, rig_annotate::geom::FrameId::new(&doc.parent_frame)?);
    write_json(out, &PivotResultFile::new(&res, &marker, &base))
}

fn handeye(cmd: &HandEye) -> Result<()> {
    match cmd {
        HandEye::Closed { observations, out } => {
            let doc: HandEyeObservationsFile = read_json(observations)?;
            let res = handeye_closed_form(&doc.to_observations()?)?;
            write_json(out, &HandEyeResultFile::from(&res))
        }
        HandEye::Traj { camera, marker, out } => {
            let (c, m) = resample_onto_camera(&read_trajectory(camera)?, &read_trajectory(marker)?)?;
            write_json(out, &HandEyeResultFile::from(&handeye_trajectory(&c, &m)?))
        }
    }
}

fn annotate(args: &AnnotateArgs) -> Result<()> {
    let params = IcpParams {
        max_iterations: args.icp_max_iter,
        rel_change_tol: args.icp_tol,
        max_corr_dist: args.gate * 1e-3,
        trim_fraction: args.trim,
    };
    params.validate()?;
    let points = match read_points_input(&args.points)? {
        PointsInput::Cloud(c) => c,
        PointsInput::Tips(doc) => {
            let tip_offset = match (&args.pivot, doc.tip_offset) {
                (Some(p), _) => Vec3::from(read_json::<PivotResultFile>(p)?.tip_offset),
                (None, Some(t)) => Vec3::from(t),
                (None, None) => {
                    return Err(Error::InvalidConfig(
                        "a tip session needs a tip offset: pass --pivot or include tip_offset".into(),
                    ))
                }
            };
            let session = TipMeasurementSession { marker_poses: doc.to_poses()?, tip_offset };
            if let Some(w) = session.quality_warning() {
                eprintln!("warning: {w}");
            }
            tip_points(&session)?
        }
    };
    let mesh = read_ply(&args.mesh)?;
    let corr = read_json::<PointCloudFile>(&args.correspondences)?.to_cloud()?;
    let ann = annotate_object(&points, &mesh, &corr, &params)?;
    let mut record = ObjectRecord::from(&ann);
    record.mesh_ref = relative_ref(&args.out, &args.mesh);
    let doc = AnnotationFile {
        base_frame: points.frame().to_string(),
        objects: vec![record],
        background: None,
        camera_trajectory_ref: None,
        error_budget: None,
    };
    write_json(&args.out, &doc)
}

fn background(scan: &Path, mesh: &Path, init: &Path, out: &Path) -> Result<()> {
    let scan = read_json::<PointCloudFile>(scan)?.to_cloud()?;
    let mesh = read_ply(mesh)?;
    let init = read_json::<FramedPose>(init)?.to_transform()?;
    let res = align_background(&scan, &mesh, &init, &PipelineOptions::default().background_icp)?;
    write_json(
        out,
        &BackgroundResultFile {
            pose: FramedPose::from(&res.pose),
            icp_rmse_mm: res.icp_rmse * 1e3,
            point_count: res.point_count,
        },
    )
}

fn sync(args: &SyncArgs) -> Result<()> {
    let a = read_trajectory(&args.a)?;
    let b = read_trajectory(&args.b)?;
    let opts = CurveOptions {
        signal: match args.signal {
            Signal::Translation => CurveSignal::Translation,
            Signal::Rotation => CurveSignal::Rotation,
        },
        smooth: args.smooth,
    };
    let res = synchronize_streams(&a, &b, args.dt, args.max_offset, &opts)?;
    let oracle = if args.oracle {
        Some(brute_force_offset(
            &motion_curve(&a, args.dt, &opts)?,
            &motion_curve(&b, args.dt, &opts)?,
            args.max_offset,
        )?)
    } else {
        None
    };
    write_json(&args.out, &SyncResultFile::new(&res, oracle.as_ref()))
}

fn camtraj(marker: &Path, handeye: &Path, out: &Path) -> Result<()> {
    let traj = annotate_camera_trajectory(&read_trajectory(marker)?, &read_hand_eye(handeye)?)?;
    write_json(out, &TrajectoryFile::from(&traj))
}

fn render(scene: &Path, camera: &Path, pose: &Path, depth: &Path, mask: &Path) -> Result<()> {
    let scene = read_scene(scene)?;
    let cam = read_camera(camera)?.to_camera()?;
    let pose = read_json::<FramedPose>(pose)?.to_transform()?;
    let (d, m) = render_with(&build_bvh(&scene)?, &cam, &pose)?;
    write_pgm(depth, &depth_to_pgm(&d))?;
    write_pgm(mask, &mask_to_pgm(&m))
}

fn sim(config: &Path, out: &Path) -> Result<()> {
    let cfg: SessionConfig = read_json(config)?;
    write_session(out, &simulate_session(&cfg)?)
}

fn budget(stages: &Path, out: &Path) -> Result<()> {
    let doc: StagesFile = read_json(stages)?;
    let stages: Vec<_> = doc.stages.iter().map(|s| s.to_stage()).collect();
    write_json(out, &BudgetRecord::from(&error_budget(&stages)?))
}

fn verify(dir: &Path) -> Result<()> {
    let report = verify_session(dir, &PipelineOptions::default())?;
    print!("{}", to_json_string(&report));
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Pivot { poses, out } => pivot(poses, out),
        Command::Handeye(cmd) => handeye(cmd),
        Command::Annotate(args) => annotate(args),
        Command::Background { scan, mesh, init, out } => background(scan, mesh, init, out),
        Command::Sync(args) => sync(args),
        Command::Camtraj { marker, handeye, out } => camtraj(marker, handeye, out),
        Command::Render { scene, camera, pose, depth, mask } => render(scene, camera, pose, depth, mask),
        Command::Sim { config, out } => sim(config, out),
        Command::Budget { stages, out } => budget(stages, out),
        Command::Verify { session } => verify(session),
    }
}

/// Sizes the global thread pool from the environment; 0 or unset means one
/// thread per core.
fn configure_threads() -> std::result::Result<(), String> {
    let n = match std::env::var(THREADS_ENV) {
        Ok(v) => {
            v.trim().parse::<usize>().map_err(|_| format!("{THREADS_ENV} must be a non-negative integer, got `{v}`"))?
        }
        Err(_) => 0,
    };
    if n > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { 2 } else { 0 });
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
