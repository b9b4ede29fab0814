mod commands;
mod error;
mod scene;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use mlocond::objrep::MotionConfig;
use mlocond::pipeline::WindowMode;
use mlocond::raster::DEFAULT_RESOLUTION;

use crate::commands::{ObjrepArgs, PackArgs};
use crate::error::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "mlocond", version, about = "Conditioning tensors for hand-object video synthesis")]
struct Cli {
    /// seed for every stochastic step
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = DEFAULT_RESOLUTION)]
    width: usize,
    #[arg(long, global = true, default_value_t = DEFAULT_RESOLUTION)]
    height: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Strict,
    Tail,
}

#[derive(Subcommand)]
enum Command {
    /// Render per-frame multi-layer occlusion stacks for a scene file.
    RenderMlo {
        #[arg(long)]
        scene: PathBuf,
    },
    /// Reference views, point cloud, motion and motion normals for a mesh.
    BuildObjrep {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long, default_value_t = 24)]
        frames: usize,
        /// resolution of the six reference views
        #[arg(long, default_value_t = DEFAULT_RESOLUTION)]
        view_resolution: usize,
    },
    /// Random smooth object trajectory.
    SimulateMotion {
        #[arg(long, default_value_t = 24)]
        frames: usize,
        /// maximum per-frame rotation in radians
        #[arg(long)]
        rot_rate: Option<f64>,
        /// half-extent of the cubic translation box
        #[arg(long)]
        trans_bound: Option<f64>,
    },
    /// Assemble a condition pack for one dataset kind.
    Pack {
        /// hoi, object or human
        #[arg(long)]
        kind: String,
        /// render-mlo output directory
        #[arg(long)]
        mlo: Option<PathBuf>,
        /// build-objrep output directory
        #[arg(long)]
        objrep: Option<PathBuf>,
        /// background reference image (PPM)
        #[arg(long)]
        background: Option<PathBuf>,
        #[arg(long, default_value = "background")]
        background_role: String,
        /// first-frame object image (PPM)
        #[arg(long)]
        first_frame: Option<PathBuf>,
        /// per-frame 2D skeleton keypoints (JSON)
        #[arg(long)]
        skeleton: Option<PathBuf>,
        /// clip length when no per-frame input is given
        #[arg(long)]
        frames: Option<usize>,
    },
    /// Print the sliding-window plan for a clip.
    PlanWindows {
        #[arg(long)]
        frames: usize,
        #[arg(long, default_value_t = 16)]
        window: usize,
        #[arg(long, default_value_t = 8)]
        stride: usize,
        #[arg(long, value_enum, default_value_t = Mode::Strict)]
        mode: Mode,
    },
    /// Rigid per-frame poses from marker tracks.
    SolvePose {
        #[arg(long)]
        markers: PathBuf,
        /// object mesh; enables surface-offset refinement
        #[arg(long)]
        mesh: Option<PathBuf>,
        /// initial marker offsets (JSON), defaults to the first frame
        #[arg(long, requires = "mesh")]
        init_offsets: Option<PathBuf>,
    },
    /// Numerical self-check of the conditioning embeddings.
    EmbedCheck,
}

fn run(cli: Cli) -> CliResult<()> {
    let out = cli.out.as_deref();
    match &cli.command {
        Command::RenderMlo { scene } => commands::render_mlo(scene, require_out(out)?, cli.width, cli.height),
        Command::BuildObjrep { mesh, frames, view_resolution } => commands::build_objrep(&ObjrepArgs {
            mesh,
            frames: *frames,
            seed: cli.seed,
            out: require_out(out)?,
            width: cli.width,
            height: cli.height,
            view_resolution: *view_resolution,
        }),
        Command::SimulateMotion { frames, rot_rate, trans_bound } => {
            let mut config = MotionConfig::default();
            if let Some(r) = rot_rate {
                config.rot_rate_max = *r;
            }
            if let Some(b) = trans_bound {
                config.trans_min = [-b; 3];
                config.trans_max = [*b; 3];
            }
            commands::simulate(*frames, cli.seed, config, require_out(out)?)
        }
        Command::Pack { kind, mlo, objrep, background, background_role, first_frame, skeleton, frames } => {
            commands::pack(&PackArgs {
                kind,
                mlo: mlo.as_deref(),
                objrep: objrep.as_deref(),
                background: background.as_deref(),
                background_role,
                first_frame: first_frame.as_deref(),
                skeleton: skeleton.as_deref(),
                frames: *frames,
                width: cli.width,
                height: cli.height,
                out: require_out(out)?,
            })
        }
        Command::PlanWindows { frames, window, stride, mode } => {
            let mode = match mode {
                Mode::Strict => WindowMode::Strict,
                Mode::Tail => WindowMode::Tail,
            };
            print!("{}", commands::windows(*frames, *window, *stride, mode, out)?);
            Ok(())
        }
        Command::SolvePose { markers, mesh, init_offsets } => {
            commands::solve_pose(markers, mesh.as_deref(), init_offsets.as_deref(), require_out(out)?)
        }
        Command::EmbedCheck => {
            let (text, passed) = commands::embed_check(cli.seed, out)?;
            print!("{text}");
            if passed {
                Ok(())
            } else {
                Err(CliError::Check("embedding invariants violated".into()))
            }
        }
    }
}

fn require_out(out: Option<&std::path::Path>) -> CliResult<&std::path::Path> {
    out.ok_or_else(|| CliError::Validation("--out is required for this command".into()))
}

fn main() -> ExitCode {
    // clap reports usage errors with exit code 2, matching validation failures
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mlocond: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
