use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

use floyd_core::automaton::AutomatonError;
use floyd_core::convert::{automaton_to_grammar, grammar_to_automaton, ConvertError};
use floyd_core::grammar::{ShapeIssue, Witness};
use floyd_core::omega::{default_budget, omega_accepts, LassoWord, OmegaError, OmegaVerdict};
use floyd_core::opm::OpmError;
use floyd_core::oracle::{language_agree, AgreementReport};
use floyd_core::{determinize, FloydAutomaton, Grammar, GrammarError};

#[derive(Parser)]
#[command(name = "floyd", version, about = "Operator-precedence grammars and Floyd automata")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the precedence matrix of a grammar
    Opm { grammar: PathBuf },
    /// Run an automaton on a word given as space-separated tokens
    Run {
        automaton: PathBuf,
        word: String,
        /// Print the configurations of the accepting run
        #[arg(long)]
        trace: bool,
    },
    /// Subset construction
    Determinize {
        automaton: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Automaton recognizing the language of a grammar
    G2a {
        grammar: PathBuf,
        /// Bring the grammar into the required shape first
        #[arg(long)]
        normalize: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Grammar generating the language of an automaton
    A2g {
        automaton: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Decide acceptance of the infinite word prefix·loop^ω
    Omega {
        automaton: PathBuf,
        #[arg(long, default_value = "")]
        prefix: String,
        #[arg(long = "loop")]
        period: String,
        /// Positions to scan before giving up
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Compare two languages on all words up to a length
    Equiv {
        left: PathBuf,
        right: PathBuf,
        #[arg(long, default_value_t = 6)]
        max_len: usize,
    },
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Invalid(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Io { .. } | CliError::Input(_) => 1,
            CliError::Invalid(_) => 2,
        }
    }
}

impl From<GrammarError> for CliError {
    fn from(e: GrammarError) -> Self {
        match e {
            GrammarError::Conflict(_) | GrammarError::NotReduced(_) => CliError::Invalid(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<OpmError> for CliError {
    fn from(e: OpmError) -> Self {
        match e {
            OpmError::Conflict(_) => CliError::Invalid(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<AutomatonError> for CliError {
    fn from(e: AutomatonError) -> Self {
        match e {
            AutomatonError::Opm(e) => e.into(),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<OmegaError> for CliError {
    fn from(e: OmegaError) -> Self {
        match e {
            OmegaError::Opm(e) => e.into(),
            OmegaError::EmptyPeriod => CliError::Input(e.to_string()),
            OmegaError::EqCycle(_) => CliError::Invalid(e.to_string()),
        }
    }
}

impl From<floyd_core::automaton::RunError> for CliError {
    fn from(e: floyd_core::automaton::RunError) -> Self {
        use floyd_core::automaton::RunError;
        match e {
            RunError::Opm(e) => e.into(),
            RunError::EqCycle(_) => CliError::Invalid(e.to_string()),
        }
    }
}

/// Successful outcomes other than plain success carry their own exit code.
enum Verdict {
    Ok,
    Reject,
    Undetermined,
    Disagree,
}

impl Verdict {
    fn code(self) -> u8 {
        match self {
            Verdict::Ok => 0,
            Verdict::Reject => 3,
            Verdict::Undetermined => 4,
            Verdict::Disagree => 5,
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn load_grammar(path: &Path) -> Result<Grammar, CliError> {
    Ok(Grammar::parse(&read(path)?)?)
}

fn load_automaton(path: &Path) -> Result<FloydAutomaton, CliError> {
    Ok(FloydAutomaton::parse(&read(path)?)?)
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, text).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn require_acyclic(a: &FloydAutomaton) -> Result<(), CliError> {
    match a.eq_check() {
        floyd_core::opm::EqCheck::Cycle(c) => Err(CliError::Invalid(format!(
            "the ≐ relation has a cycle: {}",
            c.join(" = ")
        ))),
        _ => Ok(()),
    }
}

fn shape_issue(g: &Grammar, issue: &ShapeIssue) -> String {
    let what = match issue {
        ShapeIssue::AxiomInRhs { .. } => "axiom occurs in a right-hand side",
        ShapeIssue::EmptyRule { .. } => "empty rule for a non-axiom",
        ShapeIssue::AxiomRuleNotRenaming { .. } => "axiom rule is not a renaming",
        ShapeIssue::NonAxiomRenaming { .. } => "renaming rule for a non-axiom",
    };
    format!(
        "rule {}: {}: {what}",
        issue.rule() + 1,
        g.rule_text(&g.rules()[issue.rule()])
    )
}

fn cmd_opm(path: &Path) -> Result<Verdict, CliError> {
    let g = load_grammar(path)?;
    match g.compute_opm() {
        Ok(m) => {
            print!("{}", m.to_text());
            Ok(Verdict::Ok)
        }
        Err(GrammarError::Conflict(conflicts)) => {
            for c in &conflicts {
                let rels: Vec<String> = c
                    .witnesses
                    .iter()
                    .map(|(r, w)| match w {
                        Witness::Rule(i) => format!("{r} by rule {}: {}", i + 1, g.rule_text(&g.rules()[*i])),
                        Witness::Border => format!("{r} by # extension"),
                    })
                    .collect();
                println!("conflict {} {}: {}", c.left, c.right, rels.join("; "));
            }
            Err(CliError::Invalid(format!("{} precedence conflict(s)", conflicts.len())))
        }
        Err(e) => Err(e.into()),
    }
}

fn cmd_run(path: &Path, word: &str, trace: bool) -> Result<Verdict, CliError> {
    let a = load_automaton(path)?;
    let w: Vec<&str> = word.split_whitespace().collect();
    let accepted = if trace {
        match a.trace(&w)? {
            Ok(t) => {
                print!("{}", t.render(&a));
                true
            }
            Err(none) => {
                eprintln!(
                    "no accepting run; longest prefix read: {}",
                    none.longest_prefix.join(" ")
                );
                false
            }
        }
    } else {
        a.accepts_subsets(&w)?
    };
    if accepted {
        println!("accept");
        Ok(Verdict::Ok)
    } else {
        println!("reject");
        Ok(Verdict::Reject)
    }
}

fn cmd_g2a(path: &Path, normalize: bool, out: Option<&Path>) -> Result<Verdict, CliError> {
    let mut g = load_grammar(path)?;
    if normalize {
        g = g.normalize()?;
    }
    let a = match grammar_to_automaton(&g) {
        Ok(a) => a,
        Err(ConvertError::Shape(issues)) => {
            for issue in &issues {
                eprintln!("{}", shape_issue(&g, issue));
            }
            return Err(CliError::Invalid(
                "grammar is not in the required shape; rerun with --normalize".into(),
            ));
        }
        Err(ConvertError::Grammar(e)) => return Err(e.into()),
        Err(e) => return Err(CliError::Invalid(e.to_string())),
    };
    emit(&a.to_text(), out)?;
    Ok(Verdict::Ok)
}

fn cmd_a2g(path: &Path, out: Option<&Path>) -> Result<Verdict, CliError> {
    let a = load_automaton(path)?;
    let g = automaton_to_grammar(&a).map_err(|e| match e {
        ConvertError::Grammar(e) => e.into(),
        e => CliError::Invalid(e.to_string()),
    })?;
    emit(&g.to_text(), out)?;
    Ok(Verdict::Ok)
}

fn cmd_omega(path: &Path, prefix: &str, period: &str, budget: Option<usize>) -> Result<Verdict, CliError> {
    let a = load_automaton(path)?;
    let prefix: Vec<&str> = prefix.split_whitespace().collect();
    let period: Vec<&str> = period.split_whitespace().collect();
    let lasso = LassoWord::parse(a.alphabet(), &prefix, &period)?;
    let budget = budget.unwrap_or_else(|| default_budget(&a, &lasso));
    match omega_accepts(&a, &lasso, budget)? {
        OmegaVerdict::Accepted(w) => {
            println!("Accepted");
            println!("witness: {}", w.render(&a));
            Ok(Verdict::Ok)
        }
        OmegaVerdict::Rejected(reason) => {
            println!("Rejected");
            println!("reason: {reason}");
            Ok(Verdict::Reject)
        }
        OmegaVerdict::Undetermined { budget } => {
            println!("Undetermined");
            println!("budget: {budget}");
            Ok(Verdict::Undetermined)
        }
    }
}

enum Language {
    Grammar(Grammar),
    Automaton(Box<FloydAutomaton>),
}

impl Language {
    fn load(path: &Path) -> Result<Self, CliError> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("g") => Ok(Language::Grammar(load_grammar(path)?)),
            Some("fa") => {
                let a = load_automaton(path)?;
                require_acyclic(&a)?;
                Ok(Language::Automaton(Box::new(a)))
            }
            _ => Err(CliError::Input(format!(
                "{}: expected a .g or .fa file",
                path.display()
            ))),
        }
    }

    fn terminals(&self) -> &[String] {
        match self {
            Language::Grammar(g) => g.terminals(),
            Language::Automaton(a) => a.alphabet().terminals(),
        }
    }

    fn contains(&self, w: &[&str]) -> bool {
        match self {
            Language::Grammar(g) => g.cf_membership(w),
            // tokens outside the alphabet are simply not accepted
            Language::Automaton(a) => a.accepts_subsets(w).unwrap_or(false),
        }
    }
}

fn cmd_equiv(left: &Path, right: &Path, max_len: usize) -> Result<Verdict, CliError> {
    let l = Language::load(left)?;
    let r = Language::load(right)?;
    let mut terminals: Vec<String> = l.terminals().to_vec();
    for t in r.terminals() {
        if !terminals.contains(t) {
            terminals.push(t.clone());
        }
    }
    let report: AgreementReport = language_agree(|w| l.contains(w), |w| r.contains(w), &terminals, max_len, false);
    print!("{report}");
    eprintln!(
        "{} words up to length {max_len}, {} disagreement(s)",
        report.tested,
        report.disagreements.len()
    );
    Ok(if report.agrees() {
        Verdict::Ok
    } else {
        Verdict::Disagree
    })
}

fn run(cli: Cli) -> Result<Verdict, CliError> {
    match cli.command {
        Command::Opm { grammar } => cmd_opm(&grammar),
        Command::Run { automaton, word, trace } => cmd_run(&automaton, &word, trace),
        Command::Determinize { automaton, out } => {
            let a = load_automaton(&automaton)?;
            require_acyclic(&a)?;
            emit(&determinize(&a).to_text(), out.as_deref())?;
            Ok(Verdict::Ok)
        }
        Command::G2a {
            grammar,
            normalize,
            out,
        } => cmd_g2a(&grammar, normalize, out.as_deref()),
        Command::A2g { automaton, out } => cmd_a2g(&automaton, out.as_deref()),
        Command::Omega {
            automaton,
            prefix,
            period,
            budget,
        } => cmd_omega(&automaton, &prefix, &period, budget),
        Command::Equiv { left, right, max_len } => cmd_equiv(&left, &right, max_len),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let code = match run(cli) {
        Ok(v) => v.code(),
        Err(e) => {
            eprintln!("error: {e}");
            e.code()
        }
    };
    let _ = io::stdout().flush();
    ExitCode::from(code)
}
