//! The `annocamp` command line.
//!
//! Every subcommand is a thin adapter over the library. By default it
//! works on a local state file (embedded mode); with `--server` the admin
//! subcommands go through the HTTP API instead.
//!
//! Exit codes: 0 success, 1 runtime or I/O failure, 2 usage or validation
//! error.

mod backend;

use std::fs;
use std::io::{self, BufReader, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

pub use backend::{Backend, Embedded, Remote};

use crate::analytics::{run_report, Format, ReportName, ReportOptions};
use crate::config::CampaignConfig;
use crate::dataset::{import_release, manifest_entries, sidecar, ExportRecord};
use crate::error::Error;
use crate::i18n::MessageCatalogs;
use crate::model::{CampaignId, CampaignStatus};
use crate::service::{parse_id_list, SubjectRow};
use crate::sim::{simulate, SimConfig};
use crate::store::IssuedCredential;

pub const DEFAULT_STATE_FILE: &str = "annocamp-state.json";
pub const ADMIN_TOKEN_ENV: &str = "ANNOCAMP_ADMIN_TOKEN";

#[derive(Debug)]
pub struct CliError {
    pub message: String,
    pub code: u8,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            message: message.into(),
            code: 2,
        }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        CliError {
            message: message.into(),
            code: 1,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = if e.is_usage() { 2 } else { 1 };
        CliError {
            message: e.to_string(),
            code,
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::runtime(e.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(name = "annocamp", version, about = "Run image annotation campaigns")]
pub struct Cli {
    /// State file used in embedded mode.
    #[arg(long, global = true, default_value = DEFAULT_STATE_FILE)]
    pub state: PathBuf,
    /// Work on the local state file (the default).
    #[arg(long, global = true, conflicts_with = "server")]
    pub embedded: bool,
    /// Base URL of a running service; admin commands then go over HTTP.
    #[arg(long, global = true)]
    pub server: Option<String>,
    /// Admin bearer token. Falls back to $ANNOCAMP_ADMIN_TOKEN.
    #[arg(long, global = true)]
    pub admin_token: Option<String>,
    /// Directory of extra `<lang>.catalog` files.
    #[arg(long, global = true)]
    pub catalogs: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Create a campaign from a setup file, add images and annotators.
    Setup(SetupArgs),
    /// Register images from a manifest (one path or URL per line).
    Images {
        #[arg(long)]
        campaign: CampaignId,
        manifest: PathBuf,
    },
    /// Attach feature vectors from a CSV file (image_id,f0,f1,...).
    Features {
        #[arg(long)]
        campaign: CampaignId,
        file: PathBuf,
    },
    /// Generate annotator credentials.
    Annotators {
        #[arg(long)]
        campaign: CampaignId,
        #[arg(long)]
        count: i64,
        #[arg(long)]
        language: Option<String>,
        /// Write credentials here instead of standard output.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Show a campaign, or change its status.
    Status {
        #[arg(long)]
        campaign: CampaignId,
        /// draft, active or closed.
        #[arg(long)]
        set: Option<CampaignStatus>,
    },
    /// Apply subject labels from a CSV file of image_id,subject rows.
    LabelSubjects {
        #[arg(long)]
        campaign: CampaignId,
        file: PathBuf,
    },
    /// Print an analytics report.
    Report(ReportArgs),
    /// Write the anonymized release.
    Export {
        #[arg(long)]
        campaign: CampaignId,
        /// Seed for the annotator pseudonyms.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Also write the feature vectors as a binary matrix.
        #[arg(long)]
        features_out: Option<PathBuf>,
    },
    /// Drive synthetic annotators through an active campaign.
    Simulate(SimulateArgs),
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        listen: SocketAddr,
        /// Seconds between state checkpoints.
        #[arg(long, default_value_t = 30)]
        checkpoint_secs: u64,
        #[arg(long, default_value_t = crate::service::DEFAULT_SESSION_TTL_HOURS)]
        session_hours: i64,
    },
}

#[derive(Args, Debug)]
pub struct SetupArgs {
    pub config: PathBuf,
    /// Credentials file; standard output when omitted.
    #[arg(long)]
    pub credentials_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// judgment-depth, trigger-distribution, subject-trigger,
    /// subject-verdict, alpha or chi2.
    pub name: String,
    #[arg(long, required_unless_present = "release", conflicts_with = "release")]
    pub campaign: Option<CampaignId>,
    /// Compute from a release file instead of a campaign.
    #[arg(long)]
    pub release: Option<PathBuf>,
    /// Trigger categories of the release, comma separated.
    #[arg(long, requires = "release")]
    pub categories: Option<String>,
    /// Leave one trigger category out (alpha).
    #[arg(long)]
    pub exclude: Option<String>,
    /// File of uncommented image ids for the subject-verdict comparison.
    #[arg(long)]
    pub no_sample: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    pub format: Format,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long)]
    pub campaign: CampaignId,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.06)]
    pub yes_rate: f64,
    #[arg(long, default_value_t = 10)]
    pub annotators: usize,
    /// Total submission budget; runs to exhaustion when omitted.
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub parallelism: usize,
    /// text or json.
    #[arg(long, default_value = "text")]
    pub output_format: String,
}

/// The setup file: a `[campaign]` table with the campaign configuration
/// and an optional `[setup]` table.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetupFile {
    pub campaign: CampaignConfig,
    #[serde(default)]
    pub setup: SetupSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetupSection {
    #[serde(default)]
    pub users: i64,
    pub user_language: Option<String>,
    /// Manifest path, relative to the setup file.
    pub manifest: Option<PathBuf>,
    #[serde(default)]
    pub images: Vec<String>,
    /// Feature CSV path, relative to the setup file.
    pub features: Option<PathBuf>,
    /// Activate the campaign when done (default true).
    pub activate: Option<bool>,
}

pub fn parse_setup_file(text: &str) -> Result<SetupFile, CliError> {
    toml::from_str(text)
        .map_err(|e| CliError::usage(format!("invalid setup file: {}", e.message())))
}

fn admin_token(cli: &Cli) -> Option<String> {
    cli.admin_token
        .clone()
        .or_else(|| std::env::var(ADMIN_TOKEN_ENV).ok())
}

fn catalogs(cli: &Cli) -> Result<MessageCatalogs, CliError> {
    let shipped = MessageCatalogs::shipped();
    Ok(match &cli.catalogs {
        Some(dir) => shipped.load_dir(dir)?,
        None => shipped,
    })
}

fn backend(cli: &Cli) -> Result<Box<dyn Backend>, CliError> {
    match &cli.server {
        Some(url) => {
            let token = admin_token(cli).ok_or_else(|| {
                CliError::usage(format!(
                    "client mode needs --admin-token or ${ADMIN_TOKEN_ENV}"
                ))
            })?;
            Ok(Box::new(Remote::new(url, token)))
        }
        None => Ok(Box::new(Embedded::open(cli.state.clone(), catalogs(cli)?)?)),
    }
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => {
            Box::new(io::BufWriter::new(fs::File::create(p).map_err(|e| {
                CliError::runtime(format!("{}: {e}", p.display()))
            })?))
        }
        None => Box::new(io::stdout().lock()),
    })
}

fn manifest_sources(path: &Path) -> Result<Vec<String>, CliError> {
    let file =
        fs::File::open(path).map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?;
    Ok(manifest_entries(BufReader::new(file)).collect::<io::Result<_>>()?)
}

fn write_credentials(out: &mut dyn Write, creds: &[IssuedCredential]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["annotator", "username", "password"])
        .map_err(Error::from)?;
    for c in creds {
        w.write_record([
            c.annotator.to_string(),
            c.username.clone(),
            c.password.clone(),
        ])
        .map_err(Error::from)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `image_id,subject` rows; a first row of `image_id,subject` is a
/// header and skipped.
pub fn read_subject_rows(text: &[u8]) -> Result<Vec<SubjectRow>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text);
    let mut rows = Vec::new();
    for (n, record) in reader.records().enumerate() {
        let record = record.map_err(Error::from)?;
        if record.len() != 2 {
            return Err(CliError::usage(format!(
                "labels row {}: expected image_id,subject",
                n + 1
            )));
        }
        if n == 0 && &record[0] == "image_id" {
            continue;
        }
        rows.push(SubjectRow {
            image_id: record[0].to_owned(),
            subject: record[1].to_owned(),
        });
    }
    Ok(rows)
}

fn setup(cli: &Cli, args: &SetupArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.config)
        .map_err(|e| CliError::runtime(format!("{}: {e}", args.config.display())))?;
    let file = parse_setup_file(&text)?;
    let base = args.config.parent().unwrap_or(Path::new("."));
    // read inputs before touching the store
    let mut sources = file.setup.images.clone();
    if let Some(m) = &file.setup.manifest {
        sources.extend(manifest_sources(&base.join(m))?);
    }
    let features = file
        .setup
        .features
        .as_ref()
        .map(|f| read(&base.join(f)))
        .transpose()?;

    let backend = backend(cli)?;
    let campaign = backend.create_campaign(&file.campaign)?;
    let result = (|| {
        if !sources.is_empty() {
            let r = backend.add_images(campaign.id, &sources)?;
            for (entry, source) in &r.duplicates {
                eprintln!("manifest entry {entry}: duplicate source {source}");
            }
        }
        if let Some(csv) = features {
            backend.attach_features(campaign.id, csv)?;
        }
        let creds = if file.setup.users > 0 {
            backend.generate_annotators(
                campaign.id,
                file.setup.users,
                file.setup.user_language.as_deref(),
            )?
        } else {
            Vec::new()
        };
        if file.setup.activate.unwrap_or(true) {
            backend.set_status(campaign.id, CampaignStatus::Active)?;
        }
        Ok::<_, CliError>(creds)
    })();
    backend.finish()?;
    let creds = result.map_err(|e| CliError {
        message: format!(
            "campaign {} was created but setup stopped: {}",
            campaign.id, e.message
        ),
        code: e.code,
    })?;
    let mut stdout = io::stdout().lock();
    writeln!(stdout, "{}", campaign.id)?;
    match &args.credentials_out {
        Some(path) => write_credentials(&mut *open_output(Some(path))?, &creds)?,
        None => write_credentials(&mut stdout, &creds)?,
    }
    Ok(())
}

fn report(cli: &Cli, args: &ReportArgs) -> Result<(), CliError> {
    let name: ReportName = args.name.parse()?;
    let no_sample = args
        .no_sample
        .as_ref()
        .map(|p| read(p).map(|b| parse_id_list(&String::from_utf8_lossy(&b))))
        .transpose()?;
    let options = ReportOptions {
        exclude: args.exclude.clone(),
        no_sample,
    };
    let text = match (&args.release, args.campaign) {
        (Some(path), _) => {
            let file = fs::File::open(path)
                .map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?;
            let categories = args
                .categories
                .as_ref()
                .map(|c| c.split(',').map(|s| s.trim().to_owned()).collect());
            let snapshot = import_release(BufReader::new(file), categories)?;
            run_report(&snapshot, name, &options)?.render(args.format)
        }
        (None, Some(id)) => backend(cli)?.report(id, name, &options, args.format)?,
        (None, None) => return Err(CliError::usage("report needs --campaign or --release")),
    };
    let mut out = open_output(args.output.as_deref())?;
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(())
}

fn export(
    cli: &Cli,
    campaign: CampaignId,
    seed: u64,
    output: Option<&Path>,
    features_out: Option<&Path>,
) -> Result<(), CliError> {
    let bytes = backend(cli)?.export(campaign, seed)?;
    if let Some(path) = features_out {
        let mut rows = Vec::new();
        for line in bytes.split(|&b| b == b'\n').filter(|l| !l.is_empty()) {
            let record: ExportRecord = serde_json::from_slice(line).map_err(Error::from)?;
            rows.extend(record.feature);
        }
        let dim = rows.first().map_or(0, Vec::len);
        let refs: Vec<&[f32]> = rows.iter().map(Vec::as_slice).collect();
        let mut out = open_output(Some(path))?;
        sidecar::write_matrix(&mut out, dim, &refs)?;
    }
    let mut out = open_output(output)?;
    out.write_all(&bytes)?;
    out.flush()?;
    Ok(())
}

fn embedded_only(cli: &Cli, what: &str) -> Result<Embedded, CliError> {
    if cli.server.is_some() {
        return Err(CliError::usage(format!(
            "{what} runs in embedded mode only"
        )));
    }
    Embedded::open(cli.state.clone(), catalogs(cli)?)
}

fn run_simulation(cli: &Cli, args: &SimulateArgs) -> Result<(), CliError> {
    let embedded = embedded_only(cli, "simulate")?;
    let config = SimConfig {
        seed: args.seed,
        yes_rate: args.yes_rate,
        annotators: args.annotators,
        steps: args.steps,
        parallelism: args.parallelism,
    };
    let summary = simulate(&embedded.service, args.campaign, &config)?;
    embedded.finish()?;
    let mut out = io::stdout().lock();
    match args.output_format.as_str() {
        "json" => writeln!(
            out,
            "{}",
            serde_json::to_string_pretty(&summary).map_err(Error::from)?
        )?,
        _ => writeln!(out, "{summary}")?,
    }
    if summary.checks.violations() > 0 {
        return Err(CliError::runtime("simulation found invariant violations"));
    }
    Ok(())
}

fn serve(
    cli: &Cli,
    listen: SocketAddr,
    checkpoint_secs: u64,
    session_hours: i64,
) -> Result<(), CliError> {
    let embedded = embedded_only(cli, "serve")?;
    let token = admin_token(cli).ok_or_else(|| {
        CliError::usage(format!("serve needs --admin-token or ${ADMIN_TOKEN_ENV}"))
    })?;
    let (service, _) = embedded.into_service();
    let service = Arc::new(
        service
            .with_admin_token(token)
            .with_session_ttl(chrono::Duration::hours(session_hours)),
    );
    let runtime = tokio::runtime::Runtime::new()?;
    let every = (checkpoint_secs > 0).then(|| std::time::Duration::from_secs(checkpoint_secs));
    runtime.block_on(crate::service::http::serve(service, listen, every))?;
    Ok(())
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Setup(args) => setup(cli, args),
        Command::Images { campaign, manifest } => {
            let sources = manifest_sources(manifest)?;
            let backend = backend(cli)?;
            let r = backend.add_images(*campaign, &sources)?;
            backend.finish()?;
            for (entry, source) in &r.duplicates {
                eprintln!("manifest entry {entry}: duplicate source {source}");
            }
            println!("registered {}", r.registered);
            Ok(())
        }
        Command::Features { campaign, file } => {
            let csv = read(file)?;
            let backend = backend(cli)?;
            let n = backend.attach_features(*campaign, csv)?;
            backend.finish()?;
            println!("attached {n}");
            Ok(())
        }
        Command::Annotators {
            campaign,
            count,
            language,
            output,
        } => {
            let backend = backend(cli)?;
            let creds = backend.generate_annotators(*campaign, *count, language.as_deref())?;
            backend.finish()?;
            write_credentials(&mut *open_output(output.as_deref())?, &creds)
        }
        Command::Status { campaign, set } => {
            let backend = backend(cli)?;
            if let Some(status) = set {
                backend.set_status(*campaign, *status)?;
                backend.finish()?;
            }
            let summary = backend.summary(*campaign)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&summary).map_err(Error::from)?
            );
            Ok(())
        }
        Command::LabelSubjects { campaign, file } => {
            let rows = read_subject_rows(&read(file)?)?;
            let backend = backend(cli)?;
            let r = backend.label_subjects(*campaign, &rows)?;
            backend.finish()?;
            for rejected in &r.rejected {
                eprintln!(
                    "row {} ({}): {}",
                    rejected.row, rejected.image_id, rejected.message
                );
            }
            println!("{}", r.labeled);
            if r.rejected.is_empty() {
                Ok(())
            } else {
                Err(CliError::usage(format!(
                    "{} rows rejected",
                    r.rejected.len()
                )))
            }
        }
        Command::Report(args) => report(cli, args),
        Command::Export {
            campaign,
            seed,
            output,
            features_out,
        } => export(
            cli,
            *campaign,
            *seed,
            output.as_deref(),
            features_out.as_deref(),
        ),
        Command::Simulate(args) => run_simulation(cli, args),
        Command::Serve {
            listen,
            checkpoint_secs,
            session_hours,
        } => serve(cli, *listen, *checkpoint_secs, *session_hours),
    }
}

/// Entry point for the binary.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn setup_file_schema() {
        let f = parse_setup_file(
            r#"
            [campaign]
            name = "class"
            quota = 2
            languages = ["en", "it"]

            [setup]
            users = 2
            images = ["a.jpg", "b.jpg"]
            "#,
        )
        .unwrap();
        assert_eq!(f.campaign.quota, 2);
        assert_eq!(f.setup.users, 2);
        let err = parse_setup_file("[campaign]\nname = \"x\"\nquota = 2\nqouta = 3\n").unwrap_err();
        assert_eq!(err.code, 2);
        assert!(err.message.contains("qouta"), "{}", err.message);
    }

    #[test]
    fn subject_rows_skip_header_and_comments() {
        let rows =
            read_subject_rows(b"image_id,subject\n# note\nimg_0, Females\nimg_1,Nobody\n").unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].subject, "Females");
        assert!(read_subject_rows(b"img_0\n").is_err());
    }
}
