//! `relred`: batch frontend over relation files, formula files and certificate bundles.

use anyhow::{anyhow, bail, Context, Result};
use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use relred::analysis::{self, Evidence};
use relred::caps::{self, Caps};
use relred::dependencies::{self, DependencyReport, Partition};
use relred::diagrams::{self, BondGraph, BondingDiagram, ProjoinGraph};
use relred::formula::{evaluate, Var};
use relred::{
    io, par, reducers, Attr, Domain, Environment, ErrorCategory, Exec, Formula, ReductionCertificate, Relation, Scheme,
};
use serde_json::json;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "relred", version, about = "Reductions of finite relations")]
struct Cli {
    /// Output format; `census` defaults to csv, everything else to text.
    #[arg(long, global = true)]
    format: Option<Format>,
    /// Worker threads for the parallel sweeps.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file, or directory for commands that write certificate bundles.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a formula file against relation files.
    Eval {
        formula: PathBuf,
        #[arg(long, num_args = 1.., required = true)]
        env: Vec<PathBuf>,
        /// Free variables in output order, comma separated; canonical order by default.
        #[arg(long)]
        free: Option<String>,
    },
    /// Functional, key and multivalued dependencies.
    Deps(DepsArgs),
    /// Build a reduction certificate.
    Reduce(ReduceArgs),
    /// Explicate a certificate into a bond with teridentities.
    Explicate { cert: PathBuf },
    /// Merge the factors of a subternaric bond certificate.
    Merge { cert: PathBuf },
    /// Projoin graph, bonding diagram or bond graph of a formula file or certificate.
    Diagram {
        input: PathBuf,
        #[arg(long, value_enum, default_value = "bonding")]
        kind: DiagramKind,
        /// Write Graphviz DOT here.
        #[arg(long)]
        dot: Option<PathBuf>,
    },
    /// Lower and upper ternarity bounds.
    Ternarity {
        relation: PathBuf,
        #[arg(long, num_args = 1..)]
        certs: Vec<PathBuf>,
    },
    /// Exhaustive deciders.
    Analyze(AnalyzeArgs),
    /// Count degenerate and join reducible relations.
    Census {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        n: usize,
        /// Sample this many relations instead of enumerating all of them.
        #[arg(long)]
        sample: Option<u64>,
        #[arg(long, default_value_t = analysis::DEFAULT_SEED)]
        seed: u64,
    },
    /// Check a certificate bundle by evaluation.
    Verify { cert: PathBuf },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DiagramKind {
    Projoin,
    Bonding,
    Bond,
}

#[derive(Args)]
#[command(group = ArgGroup::new("dependency").required(true).multiple(false))]
struct DepsArgs {
    relation: PathBuf,
    /// `L:M`, e.g. `1,2:3`.
    #[arg(long, group = "dependency")]
    fd: Option<String>,
    /// All keys of this size.
    #[arg(long, group = "dependency")]
    keys: Option<usize>,
    /// `M:BLOCKS`, e.g. `1:2|3`.
    #[arg(long, group = "dependency")]
    mvd: Option<String>,
    /// Whether some key of this size exists.
    #[arg(long, group = "dependency")]
    admits: Option<usize>,
}

#[derive(Args)]
struct ReduceArgs {
    relation: Option<PathBuf>,
    #[arg(long, conflicts_with_all = ["fagin", "hypostatic", "neg_join", "identity_chain"])]
    key: Option<String>,
    #[arg(long, conflicts_with_all = ["hypostatic", "neg_join", "identity_chain"])]
    fagin: Option<String>,
    #[arg(long, conflicts_with_all = ["neg_join", "identity_chain"])]
    hypostatic: Option<usize>,
    /// Join certificate and parameter count.
    #[arg(long, num_args = 2, value_names = ["CERT", "K"], conflicts_with = "identity_chain")]
    neg_join: Option<Vec<String>>,
    #[arg(long)]
    identity_chain: Option<usize>,
    /// Domain size for `--identity-chain` without a relation file.
    #[arg(long)]
    d: Option<usize>,
}

#[derive(Args)]
#[command(group = ArgGroup::new("test").required(true).multiple(false))]
struct AnalyzeArgs {
    relation: PathBuf,
    #[arg(long, group = "test")]
    degenerate: bool,
    #[arg(long, group = "test")]
    join_reducible: bool,
    /// Left block of a bipartition, e.g. `1,2`.
    #[arg(long, group = "test")]
    relprod2: Option<String>,
    #[arg(long, group = "test")]
    one_param: bool,
    #[arg(long, group = "test")]
    irreducibility: bool,
    #[arg(long, group = "test")]
    oracle: bool,
}

struct Output {
    format: Format,
    out: Option<PathBuf>,
}

impl Output {
    fn emit(&self, text: &str) -> Result<()> {
        match &self.out {
            Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }

    fn json(&self, value: &impl serde::Serialize) -> Result<()> {
        self.emit(&(serde_json::to_string_pretty(value)? + "\n"))
    }

    /// JSON when asked for, otherwise the given text.
    fn report(&self, value: &impl serde::Serialize, text: impl FnOnce() -> String) -> Result<()> {
        match self.format {
            Format::Json => self.json(value),
            _ => self.emit(&text()),
        }
    }
}

fn read_relation(p: &Path) -> Result<Relation> {
    Ok(io::read(p).with_context(|| format!("reading {}", p.display()))?.relation)
}

fn read_certificate(p: &Path) -> Result<ReductionCertificate> {
    ReductionCertificate::read_bundle(p).with_context(|| format!("reading bundle {}", p.display()))
}

fn read_formula(p: &Path) -> Result<Formula> {
    let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
    Formula::parse(text.trim()).with_context(|| format!("parsing {}", p.display()))
}

fn split_pair<'a>(s: &'a str, what: &str) -> Result<(&'a str, &'a str)> {
    s.split_once(':').ok_or_else(|| {
        anyhow!(relred::Error::Syntax {
            line: 1,
            column: 1,
            message: format!("{what} expects `LEFT:RIGHT`, got `{s}`"),
        })
    })
}

fn evidence_text(evidence: &[Evidence]) -> String {
    evidence.iter().map(|e| format!("{}: {}\n", e.test, e.outcome)).collect()
}

fn certificate_summary(c: &ReductionCertificate) -> serde_json::Value {
    let v = c.check();
    json!({
        "formula": c.formula.to_string(),
        "valid": v.valid,
        "reducible": v.reducible,
        "class": v.class,
    })
}

fn certificate_text(c: &ReductionCertificate) -> String {
    let v = c.check();
    let arities: Vec<String> = v.class.factor_arities.iter().map(|a| a.to_string()).collect();
    format!(
        "formula: {}\nkind: {}\nfactor arities: {}\nternaries: {}\nvalid: {}\n",
        c.formula,
        v.class.kind,
        arities.join(" "),
        v.class.ternaries,
        v.valid
    )
}

/// Writes the bundle when `--out` is given and prints a summary to stdout.
fn emit_certificate(c: &ReductionCertificate, out: &Output, extra: Option<&str>) -> Result<()> {
    if let Some(dir) = &out.out {
        c.write_bundle(dir).with_context(|| format!("writing bundle {}", dir.display()))?;
    }
    let stdout = Output { format: out.format, out: None };
    let mut text = certificate_text(c);
    if let Some(note) = extra {
        text.push_str(&format!("note: {note}\n"));
    }
    let mut summary = certificate_summary(c);
    if let Some(note) = extra {
        summary["note"] = json!(note);
    }
    stdout.report(&summary, || text)
}

fn dependency(args: &DepsArgs, out: &Output) -> Result<()> {
    let r = read_relation(&args.relation)?;
    let reports: Vec<DependencyReport> = if let Some(fd) = &args.fd {
        let (l, m) = split_pair(fd, "--fd")?;
        vec![dependencies::functional_dep(&r, &Scheme::parse_list(l), &Scheme::parse_list(m))?]
    } else if let Some(k) = args.keys {
        dependencies::find_keys(&r, k)
            .iter()
            .map(|key| dependencies::key_report(&r, key))
            .collect::<relred::Result<_>>()?
    } else if let Some(mvd) = &args.mvd {
        let (m, blocks) = split_pair(mvd, "--mvd")?;
        vec![dependencies::mvd_holds(&r, &Scheme::parse_list(m), &Partition::parse(blocks))?]
    } else {
        vec![dependencies::admits_key_report(&r, args.admits.unwrap())]
    };
    out.report(&reports, || reports.iter().map(|d| d.to_line() + "\n").collect())
}

fn reduce(args: &ReduceArgs, out: &Output) -> Result<()> {
    let relation = || -> Result<Relation> {
        read_relation(args.relation.as_deref().ok_or_else(|| anyhow!("this reduction needs a relation file"))?)
    };
    let c = if let Some(key) = &args.key {
        reducers::key_reduction(&relation()?, &Scheme::parse_list(key))?
    } else if let Some(spec) = &args.fagin {
        let (m, blocks) = split_pair(spec, "--fagin")?;
        reducers::fagin_decompose(&relation()?, &Scheme::parse_list(m), &Partition::parse(blocks))?
    } else if let Some(k) = args.hypostatic {
        reducers::hypostatic_abstraction(&relation()?, k)?
    } else if let Some(nj) = &args.neg_join {
        let k: usize = nj[1].parse().with_context(|| format!("parameter count `{}`", nj[1]))?;
        reducers::neg_join_projoin(&read_certificate(Path::new(&nj[0]))?, k)?
    } else if let Some(n) = args.identity_chain {
        let domain = match (&args.relation, args.d) {
            (Some(p), _) => read_relation(p)?.domain().clone(),
            (None, Some(d)) => Domain::letters(d)?,
            (None, None) => bail!("--identity-chain needs a relation file or --d"),
        };
        reducers::identity_chain(&domain, n)?
    } else {
        bail!("choose one of --key, --fagin, --hypostatic, --neg-join, --identity-chain");
    };
    emit_certificate(&c, out, None)
}

fn diagram(input: &Path, kind: DiagramKind, dot: Option<&Path>, out: &Output) -> Result<()> {
    let formula = if input.is_dir() { read_certificate(input)?.formula } else { read_formula(input)? };
    let (dot_text, report) = match kind {
        DiagramKind::Projoin => {
            let g = ProjoinGraph::of_formula(&formula);
            (g.to_dot(), serde_json::to_value(&g)?)
        }
        DiagramKind::Bonding => {
            let d = BondingDiagram::of_formula(&formula);
            let mut v = serde_json::to_value(&d)?;
            v["is_bond_diagram"] = json!(d.is_bond_diagram());
            (d.to_dot(), v)
        }
        DiagramKind::Bond => {
            let g = BondGraph::of_formula(&formula);
            let stats = g.stats();
            (g.to_dot(), json!({ "graph": g, "stats": stats }))
        }
    };
    if let Some(p) = dot {
        std::fs::write(p, &dot_text).with_context(|| format!("writing {}", p.display()))?;
    }
    match out.format {
        Format::Json => out.json(&report),
        _ if dot.is_some() => {
            let stats = BondGraph::of_formula(&formula).stats();
            out.emit(&format!(
                "V={} E={} C={} K={} I={} II={} III={}\n",
                stats.v, stats.e, stats.c, stats.k, stats.i, stats.ii, stats.iii
            ))
        }
        _ => out.emit(&dot_text),
    }
}

fn ternarity(relation: &Path, certs: &[PathBuf], out: &Output) -> Result<()> {
    let r = read_relation(relation)?;
    let certs: Vec<ReductionCertificate> = certs.iter().map(|p| read_certificate(p)).collect::<Result<_>>()?;
    let report = diagrams::ternarity_bounds(&r, &certs)?;
    out.report(&report, || {
        let upper = report.upper.map_or("unknown".to_string(), |u| u.to_string());
        let parity = report.parity.map_or("unknown".to_string(), |p| format!("{p:?}").to_lowercase());
        format!(
            "arity: {}\nlower: {}\nupper: {upper}\nparity: {parity}\n{}",
            report.arity,
            report.lower,
            evidence_text(&report.evidence)
        )
    })
}

fn analyze(args: &AnalyzeArgs, out: &Output) -> Result<()> {
    let r = read_relation(&args.relation)?;
    let found = |test: &str, c: Option<ReductionCertificate>| -> Result<()> {
        let answer = if c.is_some() { "yes" } else { "no" };
        let mut value = json!({ "test": test, "answer": answer });
        if let Some(c) = &c {
            value["certificate"] = certificate_summary(c);
            if let Some(dir) = &out.out {
                c.write_bundle(dir)?;
            }
        }
        let stdout = Output { format: out.format, out: None };
        stdout.report(&value, || {
            let mut t = format!("{test}: {answer}\n");
            if let Some(c) = &c {
                t.push_str(&certificate_text(c));
            }
            t
        })
    };
    if args.degenerate {
        let p = analysis::is_degenerate(&r)?;
        let value =
            json!({ "test": "degenerate", "answer": p.is_some(), "partition": p.as_ref().map(|p| p.to_string()) });
        out.report(&value, || match &p {
            Some(p) => format!("degenerate: yes, Cartesian over {p}\n"),
            None => "degenerate: no\n".into(),
        })
    } else if args.join_reducible {
        found("join-reducible", analysis::is_join_reducible(&r)?)
    } else if let Some(left) = &args.relprod2 {
        found("relative-product-of-two", analysis::rel_prod_reducible2(&r, &Scheme::parse_list(left))?)
    } else if args.one_param {
        found("one-parameter-ternary-projoin", analysis::one_param_ternary_projoin(&r)?)
    } else if args.irreducibility {
        let rep = analysis::irreducibility_tests(&r)?;
        out.report(&rep, || {
            format!(
                "proper projections universal: {}\nproper complement projections: {}\njoin reducible: {}\nconsistent: {}\n",
                rep.universal_projections, rep.proper_complement_projections, rep.join_reducible, rep.consistent
            )
        })
    } else {
        let rep = analysis::ternary_oracle_suite(&r)?;
        out.report(&rep, || {
            let upper = rep.ter_i3_upper.map_or("unknown".into(), |u: usize| u.to_string());
            format!(
                "degenerate: {}\nter: {}\nteridentities: >= {}, <= {upper}\n{}",
                rep.degenerate,
                rep.ter,
                rep.ter_i3_lower,
                evidence_text(&rep.evidence)
            )
        })
    }
}

fn census(d: usize, n: usize, sample: Option<u64>, seed: u64, out: &Output) -> Result<()> {
    let row = match sample {
        Some(s) => analysis::census_sampled(d, n, s, seed, Exec::default())?,
        None => analysis::census(d, n, Exec::default())?,
    };
    match out.format {
        Format::Json => out.json(&row),
        _ => out.emit(&format!("{}\n{}\n", row.csv_header(), row.to_csv())),
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let caps = Caps::from_env()?;
    caps::install(caps);
    if let Some(t) = cli.threads {
        par::set_threads(t);
    }
    let default = if matches!(cli.command, Command::Census { .. }) { Format::Csv } else { Format::Text };
    let out = Output { format: cli.format.unwrap_or(default), out: cli.out };
    match &cli.command {
        Command::Eval { formula, env, free } => {
            let f = read_formula(formula)?;
            let files: Vec<io::RelationFile> = env
                .iter()
                .map(|p| io::read(p).with_context(|| format!("reading {}", p.display())))
                .collect::<Result<_>>()?;
            let domain = files
                .first()
                .ok_or_else(|| anyhow!("--env needs at least one relation file"))?
                .relation
                .domain()
                .clone();
            let mut environment = Environment::new(domain);
            for file in files {
                environment.insert(file.name, file.relation)?;
            }
            let order: Vec<Var> = match free {
                Some(list) => list.split(',').map(str::trim).filter(|s| !s.is_empty()).map(Attr::new).collect(),
                None => f.free_vars().into_iter().collect(),
            };
            let r = evaluate(&f, &environment, &order)?;
            out.report(&json!({ "scheme": r.scheme().to_string(), "tuples": r.tuples().iter().map(|t| r.describe(t)).collect::<Vec<_>>() }), || {
                io::render("value", &r)
            })?;
        }
        Command::Deps(args) => dependency(args, &out)?,
        Command::Reduce(args) => reduce(args, &out)?,
        Command::Explicate { cert } => {
            let c = diagrams::explicate_certificate(&read_certificate(cert)?)?;
            emit_certificate(&c, &out, None)?;
        }
        Command::Merge { cert } => {
            let m = diagrams::merge_complete(&read_certificate(cert)?)?;
            emit_certificate(&m.certificate, &out, m.note.as_deref())?;
        }
        Command::Diagram { input, kind, dot } => diagram(input, *kind, dot.as_deref(), &out)?,
        Command::Ternarity { relation, certs } => ternarity(relation, certs, &out)?,
        Command::Analyze(args) => analyze(args, &out)?,
        Command::Census { d, n, sample, seed } => census(*d, *n, *sample, *seed, &out)?,
        Command::Verify { cert } => {
            let c = read_certificate(cert)?;
            let v = c.check();
            out.report(&v, || {
                let mut t = format!("valid: {}\nkind: {}\nreducible: {}\n", v.valid, v.class.kind, v.reducible);
                for line in v.note.iter().chain(&v.error) {
                    t.push_str(&format!("note: {line}\n"));
                }
                t
            })?;
            if !v.valid {
                return Ok(ExitCode::from(5));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<relred::Error>().map(relred::Error::category) {
        Some(ErrorCategory::Parse) => 2,
        Some(ErrorCategory::Precondition) => 3,
        Some(ErrorCategory::CapExceeded) => 4,
        Some(ErrorCategory::Verification) => 5,
        Some(ErrorCategory::Io) | None => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let json = cli.format == Some(Format::Json);
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            if let (true, Some(relred::Error::Refused(r))) = (json, e.downcast_ref::<relred::Error>()) {
                eprintln!("{}", serde_json::to_string_pretty(&json!({ "refused": r })).unwrap());
            } else {
                eprintln!("error: {e:#}");
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
