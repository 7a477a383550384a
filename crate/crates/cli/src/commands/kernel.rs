use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Subcommand, ValueEnum};
use phylokern::bioio::{parse_fasta, parse_newick, parse_otu_table, ParseMode};
use phylokern::samplekernel::{
    linear_kernel, rbf_median_kernel, stringphylo_kernel, transform, unifrac_kernel, CenteringOptions, KernelMatrix,
    Transform, UnifracMode,
};
use phylokern::seqkernel::{build_similarity_matrix, KmerConfig, SimilarityMatrix};
use phylokern::Error;

use super::MatrixFormat;
use crate::io::write_atomic;
use crate::{CliError, CliResult, Reporter};

#[derive(Subcommand)]
pub enum KernelCommand {
    /// OTU similarity matrix S from representative sequences.
    Seq(SeqArgs),
    /// Sample kernel matrix K from an OTU count table.
    Sample(SampleArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Variant {
    Spectrum,
    Mismatch,
    Gappy,
}

#[derive(Args)]
pub struct SeqArgs {
    /// Representative sequences in FASTA format.
    #[arg(long)]
    pub fasta: PathBuf,
    /// String kernel variant.
    #[arg(long, value_enum, default_value_t = Variant::Spectrum)]
    pub variant: Variant,
    /// k-mer length.
    #[arg(long)]
    pub k: usize,
    /// Allowed mismatches (mismatch variant only, required there).
    #[arg(long)]
    pub m: Option<usize>,
    /// Maximum gap between the two k-mers (gappy variant only, required there).
    #[arg(long)]
    pub g: Option<usize>,
    /// Accept IUPAC ambiguity codes; k-mers touching them match nothing.
    #[arg(long)]
    pub lenient: bool,
    /// Cosine-normalize S so its diagonal is 1.
    #[arg(long)]
    pub normalize: bool,
    #[arg(long, value_enum, default_value_t = MatrixFormat::Tsv)]
    pub format: MatrixFormat,
    /// Output matrix file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SampleKind {
    Linear,
    Rbf,
    UnifracU,
    UnifracW,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TransformArg {
    Raw,
    Clr,
    Log1p,
    Relative,
}

impl From<TransformArg> for Transform {
    fn from(t: TransformArg) -> Self {
        match t {
            TransformArg::Raw => Transform::Raw,
            TransformArg::Clr => Transform::Clr,
            TransformArg::Log1p => Transform::Log1p,
            TransformArg::Relative => Transform::Relative,
        }
    }
}

#[derive(Args)]
pub struct SampleArgs {
    /// OTU count table (TSV, samples in rows).
    #[arg(long)]
    pub counts: PathBuf,
    /// OTU similarity matrix from `kernel seq`; gives the StringPhylo kernel A S Aᵀ.
    #[arg(long, conflicts_with = "kind", required_unless_present = "kind")]
    pub s_matrix: Option<PathBuf>,
    /// Non-string kernel to build instead of the StringPhylo kernel.
    #[arg(long, value_enum)]
    pub kind: Option<SampleKind>,
    /// Newick tree, required by the UniFrac kernels.
    #[arg(long)]
    pub tree: Option<PathBuf>,
    /// Count transform [default: clr for string, linear and rbf; log1p for
    /// unifrac-u; relative for unifrac-w]
    #[arg(long, value_enum)]
    pub transform: Option<TransformArg>,
    /// Pseudocount added before the CLR transform.
    #[arg(long, default_value_t = 1.0)]
    pub pseudocount: f64,
    /// Double-center raw rather than squared UniFrac distances.
    #[arg(long)]
    pub raw_distances: bool,
    /// Skip the PSD projection of the centred UniFrac matrix.
    #[arg(long)]
    pub no_psd_clip: bool,
    #[arg(long, value_enum, default_value_t = MatrixFormat::Tsv)]
    pub format: MatrixFormat,
    /// Output matrix file.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(cmd: KernelCommand, rep: &Reporter) -> CliResult<()> {
    match cmd {
        KernelCommand::Seq(a) => run_seq(a, rep),
        KernelCommand::Sample(a) => run_sample(a, rep),
    }
}

fn kmer_config(a: &SeqArgs) -> CliResult<KmerConfig> {
    let cfg = match (a.variant, a.m, a.g) {
        (Variant::Spectrum, None, None) => KmerConfig::spectrum(a.k),
        (Variant::Mismatch, Some(m), None) => KmerConfig::mismatch(a.k, m),
        (Variant::Gappy, None, Some(g)) => KmerConfig::gappy_pair(a.k, g),
        (Variant::Mismatch, None, _) => return Err(CliError::Usage("--variant mismatch requires --m".into())),
        (Variant::Gappy, _, None) => return Err(CliError::Usage("--variant gappy requires --g".into())),
        _ => {
            return Err(CliError::Usage(
                "--m applies only to the mismatch variant and --g only to the gappy variant".into(),
            ))
        }
    };
    cfg.validate()?;
    Ok(cfg)
}

fn write_matrix(
    out: &std::path::Path,
    format: MatrixFormat,
    f_tsv: impl FnOnce(&mut dyn std::io::Write) -> phylokern::Result<()>,
    f_bin: impl FnOnce(&mut dyn std::io::Write) -> phylokern::Result<()>,
) -> CliResult<()> {
    match format {
        MatrixFormat::Tsv => write_atomic(out, f_tsv),
        MatrixFormat::Binary => write_atomic(out, f_bin),
    }
}

fn run_seq(a: SeqArgs, rep: &Reporter) -> CliResult<()> {
    let cfg = kmer_config(&a)?;
    let mode = if a.lenient { ParseMode::Lenient } else { ParseMode::Strict };
    let seqs = parse_fasta(crate::io::open(&a.fasta)?, mode)?;
    let start = Instant::now();
    let mut s = build_similarity_matrix(&seqs, &cfg)?;
    if a.normalize {
        s = s.cosine_normalized();
    }
    let secs = start.elapsed().as_secs_f64();
    let entries = seqs.len() * (seqs.len() + 1) / 2;
    write_matrix(&a.out, a.format, |w| s.write_tsv(w), |w| s.write_binary(w))?;
    rep.say(format!(
        "kernel seq: {} sequences, {cfg}, {entries} entries in {secs:.3} s ({:.0} entries/s)",
        seqs.len(),
        entries as f64 / secs.max(1e-9)
    ));
    Ok(())
}

fn run_sample(a: SampleArgs, rep: &Reporter) -> CliResult<()> {
    let needs_tree = matches!(a.kind, Some(SampleKind::UnifracU | SampleKind::UnifracW));
    if needs_tree && a.tree.is_none() {
        return Err(CliError::Usage("UniFrac kernels require --tree".into()));
    }
    if !needs_tree && (a.raw_distances || a.no_psd_clip) {
        return Err(CliError::Usage("--raw-distances and --no-psd-clip apply only to UniFrac kernels".into()));
    }
    let table = parse_otu_table(crate::io::open(&a.counts)?)?;
    let default_tr = match a.kind {
        None | Some(SampleKind::Linear | SampleKind::Rbf) => Transform::Clr,
        Some(SampleKind::UnifracU) => Transform::Log1p,
        Some(SampleKind::UnifracW) => Transform::Relative,
    };
    let tr = a.transform.map_or(default_tr, Transform::from);
    let start = Instant::now();
    let k: KernelMatrix = match (&a.s_matrix, a.kind) {
        (Some(path), _) => {
            let s = SimilarityMatrix::read_file(path)?;
            // put the table columns in the order of S
            let cols = s
                .otu_ids
                .iter()
                .map(|id| {
                    table.otu_ids().iter().position(|t| t == id).ok_or_else(|| Error::MissingId {
                        id: id.clone(),
                        component: "count table",
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            if cols.len() != table.n_otus() {
                let extra = table.otu_ids().iter().find(|t| !s.otu_ids.contains(t)).cloned().unwrap_or_default();
                return Err(Error::MissingId { id: extra, component: "similarity matrix" }.into());
            }
            let ab = transform(&table.select_otus(&cols), tr, a.pseudocount)?;
            stringphylo_kernel(&ab, &s)?
        }
        (None, Some(kind)) => {
            let ab = transform(&table, tr, a.pseudocount)?;
            match kind {
                SampleKind::Linear => linear_kernel(&ab),
                SampleKind::Rbf => rbf_median_kernel(&ab)?,
                SampleKind::UnifracU | SampleKind::UnifracW => {
                    let tree_path = a.tree.as_ref().expect("checked above");
                    let tree = parse_newick(&crate::io::read_text(tree_path)?)?;
                    let lengths = tree.root_path_lengths(&ab.otu_ids)?;
                    let mode = if kind == SampleKind::UnifracU { UnifracMode::Unweighted } else { UnifracMode::Weighted };
                    let opts = CenteringOptions { square_entries: !a.raw_distances, psd_clip: !a.no_psd_clip };
                    unifrac_kernel(&ab, &lengths, mode, opts)?
                }
            }
        }
        (None, None) => unreachable!("clap requires --s-matrix or --kind"),
    };
    let secs = start.elapsed().as_secs_f64();
    write_matrix(&a.out, a.format, |w| k.write_tsv(w), |w| k.write_binary(w))?;
    rep.say(format!("kernel sample: {} samples, {} kernel, {tr} transform, {secs:.3} s", k.len(), k.kind));
    Ok(())
}
