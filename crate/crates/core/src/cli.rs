//! The `encfm` command-line driver.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use thiserror::Error;

use crate::alphabet::AlphabetError;
use crate::block_store::{serialize_index, BlockStoreError, StoreParams};
use crate::bwt::BwtError;
use crate::corpus::{self, CorpusSpec};
use crate::crypto::{key_file_is_private, CryptoError, IndexKey};
use crate::fasta::{
    parse_fasta, write_fasta, write_record, FastaError, SequenceCollection, SequenceRecord,
};
use crate::pipeline::{
    build_collection_index, verify_index, BuildError, BuildOptions, VerifyOutcome,
};
use crate::search::{SearchError, Searcher};

const FASTA_LINE_WIDTH: usize = 60;

#[derive(Debug, Parser)]
#[command(
    name = "encfm",
    version,
    about = "Encrypted compressed FM-index for genomic FASTA collections"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a fresh random 64-byte key file.
    Keygen {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Index a FASTA file and print a key=value build report.
    Build {
        fasta: PathBuf,
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Bases per super-character.
        #[arg(long, default_value_t = 4)]
        k: u32,
        /// Rows per block, a power of two; 16Ki gives good compression.
        #[arg(long, default_value_t = 16 * 1024)]
        bs: u32,
        /// Percentage of text positions with a stored row sample.
        #[arg(long, default_value_t = 2)]
        sample_rate: u32,
        #[arg(long, default_value_t = default_threads())]
        threads: usize,
        /// Code-space ranges for the parallel sort (default 16 per thread).
        #[arg(long)]
        ranges: Option<usize>,
        #[arg(long)]
        force: bool,
    },
    /// Print occurrence counts. With several patterns, lines are `pattern<TAB>count`.
    Count(QueryArgs),
    /// Print sorted `item<TAB>offset` lines. With several patterns, each line
    /// is prefixed by `pattern<TAB>`.
    Locate(QueryArgs),
    /// Print a subsequence of one item as FASTA.
    Extract {
        index: PathBuf,
        #[arg(long)]
        key: PathBuf,
        item: usize,
        #[arg(default_value_t = 0)]
        start: u64,
        /// Defaults to the rest of the item.
        length: Option<u64>,
    },
    /// Check an index against its source FASTA with random queries.
    Verify {
        index: PathBuf,
        fasta: PathBuf,
        #[arg(long)]
        key: PathBuf,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = default_threads())]
        threads: usize,
    },
    /// Write a synthetic collection of mutated copies of a random reference.
    GenCorpus {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 500_000)]
        reference_length: usize,
        #[arg(long, default_value_t = 100)]
        individuals: usize,
        #[arg(long, default_value_t = 0.001)]
        mutation_rate: f64,
        #[arg(long, default_value_t = 0.00013)]
        indel_rate: f64,
        #[arg(long, default_value_t = 1)]
        indel_min: usize,
        #[arg(long, default_value_t = 16)]
        indel_max: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        force: bool,
    },
}

#[derive(Debug, clap::Args)]
pub struct QueryArgs {
    pub index: PathBuf,
    #[arg(long)]
    pub key: PathBuf,
    pub patterns: Vec<String>,
    /// One pattern per line; blank lines are skipped.
    #[arg(long)]
    pub patterns_file: Option<PathBuf>,
    #[arg(long, default_value_t = default_threads())]
    pub threads: usize,
}

fn default_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Format(String),
    #[error("{0}")]
    Key(String),
    #[error("{0}")]
    VerifyFailed(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
            CliError::Format(_) => 4,
            CliError::Key(_) => 5,
            CliError::VerifyFailed(_) => 6,
            CliError::Other(_) => 7,
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<CryptoError> for CliError {
    fn from(e: CryptoError) -> Self {
        match e {
            CryptoError::Io { .. } => CliError::Io(e.to_string()),
            CryptoError::KeyLength(_) => CliError::Key(e.to_string()),
            _ => CliError::Other(e.to_string()),
        }
    }
}

impl From<FastaError> for CliError {
    fn from(e: FastaError) -> Self {
        match e {
            FastaError::Io(_) => CliError::Io(e.to_string()),
            _ => CliError::Format(e.to_string()),
        }
    }
}

impl From<BlockStoreError> for CliError {
    fn from(e: BlockStoreError) -> Self {
        match e {
            BlockStoreError::Io(_) => CliError::Io(e.to_string()),
            BlockStoreError::Format { .. } | BlockStoreError::UnsupportedVersion(_) => {
                CliError::Format(e.to_string())
            }
            BlockStoreError::DecryptionFailed => CliError::Key(e.to_string()),
            BlockStoreError::InvalidParameter(_) | BlockStoreError::OutOfBounds(_) => {
                CliError::Usage(e.to_string())
            }
        }
    }
}

impl From<AlphabetError> for CliError {
    fn from(e: AlphabetError) -> Self {
        match e {
            AlphabetError::InvalidK(_) | AlphabetError::CodeSpaceOverflow { .. } => {
                CliError::Usage(e.to_string())
            }
            AlphabetError::EmptyCollection | AlphabetError::ReservedSymbol { .. } => {
                CliError::Format(e.to_string())
            }
            AlphabetError::TextTooLong(_) => CliError::Other(e.to_string()),
            // stored codes that the scrambled table cannot decode point at the key
            AlphabetError::UnknownSymbol(_) | AlphabetError::CodeOutOfRange { .. } => {
                CliError::Key(e.to_string())
            }
        }
    }
}

impl From<BuildError> for CliError {
    fn from(e: BuildError) -> Self {
        match e {
            BuildError::Alphabet(e) => e.into(),
            BuildError::Store(e) => e.into(),
            BuildError::Bwt(e @ BwtError::InvalidParameter(_)) => CliError::Usage(e.to_string()),
            BuildError::Bwt(e) => CliError::Other(e.to_string()),
        }
    }
}

impl From<SearchError> for CliError {
    fn from(e: SearchError) -> Self {
        match e {
            SearchError::Store(e) => e.into(),
            SearchError::Alphabet(e) => e.into(),
            SearchError::PatternTooShort { .. } | SearchError::OutOfBounds(_) => {
                CliError::Usage(e.to_string())
            }
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Output goes to `out`, diagnostics to stderr.
pub fn run_with_args<I, T>(args: I, out: &mut dyn Write) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli.command, out).and_then(|()| out.flush().map_err(CliError::from)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

pub fn run(command: Command, out: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Keygen { out: path, force } => {
            refuse_overwrite(&path, force)?;
            IndexKey::generate()?.write_file(&path, force)?;
            writeln!(out, "key written to {}", path.display())?;
        }
        Command::Build {
            fasta,
            key,
            out: path,
            k,
            bs,
            sample_rate,
            threads,
            ranges,
            force,
        } => {
            let key = read_key(&key)?;
            refuse_overwrite(&path, force)?;
            let started = Instant::now();
            let input_bytes = fs::metadata(&fasta)
                .map_err(|e| io_context(&fasta, e))?
                .len();
            let collection = read_fasta(&fasta)?;
            let options = BuildOptions {
                k,
                store: StoreParams {
                    block_size: bs,
                    sample_rate,
                    threads: threads.max(1),
                },
                ranges,
            };
            let bytes = serialize_index(&build_collection_index(&collection, &key, &options)?);
            fs::write(&path, &bytes).map_err(|e| io_context(&path, e))?;
            let seconds = started.elapsed().as_secs_f64();
            writeln!(
                out,
                "# ratio = index_bytes / input_bytes, input_bytes being the FASTA file size"
            )?;
            writeln!(out, "input_bytes={input_bytes}")?;
            writeln!(out, "index_bytes={}", bytes.len())?;
            writeln!(
                out,
                "ratio={:.6}",
                bytes.len() as f64 / input_bytes.max(1) as f64
            )?;
            writeln!(out, "seconds={seconds:.3}")?;
            writeln!(out, "threads={}", options.store.threads)?;
            writeln!(out, "items={}", collection.len())?;
            writeln!(out, "bases={}", collection.total_bases())?;
            writeln!(out, "k={k}")?;
            writeln!(out, "bs={bs}")?;
            writeln!(out, "sample_rate={sample_rate}")?;
        }
        Command::Count(args) => {
            let (searcher, patterns) = open_query(&args)?;
            for p in &patterns {
                let n = searcher.count(p.as_bytes())?;
                if patterns.len() == 1 {
                    writeln!(out, "{n}")?;
                } else {
                    writeln!(out, "{p}\t{n}")?;
                }
            }
        }
        Command::Locate(args) => {
            let (searcher, patterns) = open_query(&args)?;
            for p in &patterns {
                for m in searcher.locate(p.as_bytes())? {
                    if patterns.len() > 1 {
                        write!(out, "{p}\t")?;
                    }
                    writeln!(out, "{}\t{}", m.item, m.offset)?;
                }
            }
        }
        Command::Extract {
            index,
            key,
            item,
            start,
            length,
        } => {
            let searcher = open_searcher(&index, &key)?;
            let item_len = searcher.item_len(item).ok_or_else(|| {
                CliError::Usage(format!(
                    "item {item} does not exist ({} items)",
                    searcher.item_count()
                ))
            })?;
            let len = length.unwrap_or(item_len.saturating_sub(start));
            let bases = searcher.extract(item, start, len)?;
            let description = searcher.description(item).unwrap_or_default();
            write_record(
                &mut &mut *out,
                &SequenceRecord::new(description, bases),
                FASTA_LINE_WIDTH,
            )?;
        }
        Command::Verify {
            index,
            fasta,
            key,
            trials,
            seed,
            threads,
        } => {
            let searcher = open_searcher(&index, &key)?.with_threads(threads.max(1));
            let collection = read_fasta(&fasta)?;
            match verify_index(&searcher, &collection, trials, seed)? {
                VerifyOutcome::Pass { trials } => {
                    writeln!(out, "verify=pass trials={trials} seed={seed}")?
                }
                failure => {
                    let cause = match failure {
                        VerifyOutcome::Undecodable(why) => why,
                        VerifyOutcome::RecordMismatch { item } => format!("item {item} does not match the FASTA record"),
                        VerifyOutcome::PatternMismatch { seed, trial, pattern, expected, got } => format!(
                            "pattern {} (seed {seed}, trial {trial}): expected {expected} hits, index gave {got}",
                            String::from_utf8_lossy(&pattern)
                        ),
                        VerifyOutcome::Pass { .. } => unreachable!(),
                    };
                    writeln!(out, "verify=fail seed={seed}")?;
                    return Err(CliError::VerifyFailed(format!(
                        "verification failed: {cause}"
                    )));
                }
            }
        }
        Command::GenCorpus {
            out: path,
            reference_length,
            individuals,
            mutation_rate,
            indel_rate,
            indel_min,
            indel_max,
            seed,
            force,
        } => {
            let spec = CorpusSpec {
                reference_length,
                individuals,
                mutation_rate,
                indel_rate,
                indel_lengths: (indel_min, indel_max),
                seed,
            };
            spec.validate().map_err(CliError::Usage)?;
            refuse_overwrite(&path, force)?;
            let (collection, stats) = corpus::generate(&spec);
            write_fasta_file(&path, &collection)?;
            writeln!(out, "items={}", collection.len())?;
            writeln!(out, "bases={}", collection.total_bases())?;
            writeln!(out, "substitutions={}", stats.substitutions)?;
            writeln!(out, "insertions={}", stats.insertions)?;
            writeln!(out, "deletions={}", stats.deletions)?;
        }
    }
    Ok(())
}

fn io_context(path: &Path, e: io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn refuse_overwrite(path: &Path, force: bool) -> Result<(), CliError> {
    if !force && path.exists() {
        return Err(CliError::Usage(format!(
            "{} exists; pass --force to overwrite",
            path.display()
        )));
    }
    Ok(())
}

fn read_fasta(path: &Path) -> Result<SequenceCollection, CliError> {
    let file = File::open(path).map_err(|e| io_context(path, e))?;
    parse_fasta(BufReader::new(file)).map_err(|e| match e {
        FastaError::Io(e) => io_context(path, e),
        e => CliError::Format(format!("{}: {e}", path.display())),
    })
}

fn write_fasta_file(path: &Path, collection: &SequenceCollection) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| io_context(path, e))?;
    let mut w = BufWriter::new(file);
    write_fasta(&mut w, collection, FASTA_LINE_WIDTH)
        .and_then(|()| w.flush())
        .map_err(|e| io_context(path, e))
}

fn read_key(path: &Path) -> Result<IndexKey, CliError> {
    let key = IndexKey::read_file(path)?;
    if !key_file_is_private(path) {
        eprintln!(
            "warning: key file {} is accessible to other users",
            path.display()
        );
    }
    Ok(key)
}

fn open_searcher(index: &Path, key: &Path) -> Result<Searcher, CliError> {
    let key = read_key(key)?;
    match Searcher::open(index, &key) {
        Err(SearchError::Store(BlockStoreError::Io(e))) => Err(io_context(index, e)),
        other => Ok(other?),
    }
}

fn open_query(args: &QueryArgs) -> Result<(Searcher, Vec<String>), CliError> {
    let mut patterns = args.patterns.clone();
    if let Some(path) = &args.patterns_file {
        let file = File::open(path).map_err(|e| io_context(path, e))?;
        for line in BufReader::new(file).lines() {
            let line = line.map_err(|e| io_context(path, e))?;
            let line = line.trim();
            if !line.is_empty() {
                patterns.push(line.to_string());
            }
        }
    }
    if patterns.is_empty() {
        return Err(CliError::Usage("no patterns given".into()));
    }
    let searcher = open_searcher(&args.index, &args.key)?.with_threads(args.threads.max(1));
    Ok((searcher, patterns))
}
