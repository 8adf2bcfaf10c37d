use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use lodaudit_connectors::NetworkMode;
use lodaudit_core::evaluation::{import_annotations, krippendorff_alpha, merge_annotations};
use lodaudit_report::{load_config, Pipeline};

const EXIT_CONFIG: u8 = 2;
const EXIT_STAGE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "lodaudit",
    version,
    about = "Audit contentious terms in linked open data vocabularies"
)]
struct Cli {
    /// Pipeline configuration (TOML).
    #[arg(long, global = true, default_value = "lodaudit.toml")]
    config: PathBuf,
    /// Serve every request from the HTTP cache; a miss is an error.
    #[arg(long, global = true)]
    offline: bool,
    /// Overrides the configured sampling seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overriding `out_dir` in the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Query the sources and store the retrieved literals.
    Harvest,
    /// Count term hits in all retrieved literals (Set 2).
    Match,
    /// Count term hits in the curated related resources (Set 1).
    Set1,
    /// Score Set 2 resources against the term backgrounds (Set 3).
    Disambiguate,
    /// Detect implicit and explicit contentiousness markers.
    Markers,
    /// Draw the stratified annotation sample.
    Sample,
    /// Krippendorff's alpha over completed annotation files.
    Alpha {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Produce the hit matrix, top-term tables, plot data and manifest.
    Report,
    /// Run every stage.
    Run,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();

    if let Command::Alpha { files } = &cli.command {
        let batches = match files
            .iter()
            .map(|f| import_annotations(f))
            .collect::<Result<Vec<_>, _>>()
        {
            Ok(b) => b,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(EXIT_CONFIG);
            }
        };
        return match merge_annotations(batches).and_then(|r| krippendorff_alpha(&r)) {
            Ok(report) => {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&report).expect("report serializes")
                );
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(EXIT_STAGE)
            }
        };
    }

    let cfg = match load_config(&cli.config, cli.seed, cli.out.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let mode = if cli.offline {
        NetworkMode::Offline
    } else {
        NetworkMode::Online
    };
    let mut p = Pipeline::new(cfg, mode);
    let result = match cli.command {
        Command::Harvest => p.harvest(),
        Command::Match => p.match_set2(),
        Command::Set1 => p.set1(),
        Command::Disambiguate => p.disambiguate(),
        Command::Markers => p.markers(),
        Command::Sample => p.sample(),
        Command::Report | Command::Run => p.report().map(|b| {
            println!(
                "run {} wrote {} files to {}",
                b.run_id,
                b.files.len(),
                b.out_dir.display()
            );
        }),
        Command::Alpha { .. } => unreachable!(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_STAGE)
        }
    }
}
