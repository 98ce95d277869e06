use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use lispqa::assist::DecodingState;
use lispqa::gradcheck::{grad_check, GradCheckConfig, Objective};
use lispqa::kb::{load_kb, EntitySet, KnowledgeBase, Value};
use lispqa::program::{execute_program, parse_program, tokens_to_text};
use lispqa::programmer::{beam_search, load_checkpoint, save_checkpoint, QAItem};
use lispqa::taskgen::{default_templates, gen_dataset, gen_kb, load_dataset, write_dataset, KbSpec};
use lispqa::trainer::{evaluate, train, TrainConfig};

#[derive(Parser)]
#[command(name = "lispqa", version, about = "Weakly supervised question answering over a knowledge base")]
#[command(arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random knowledge base.
    GenKb {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        entities: usize,
        #[arg(long, default_value_t = 10)]
        properties: usize,
        #[arg(long, default_value_t = 0.2)]
        density: f64,
        /// Output file; standard output if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate train/dev/test question sets for a knowledge base.
    GenData {
        #[arg(long)]
        kb: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 300)]
        train: usize,
        #[arg(long, default_value_t = 100)]
        dev: usize,
        #[arg(long, default_value_t = 100)]
        test: usize,
        /// Receives train.jsonl, dev.jsonl and test.jsonl.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Execute a program and print its denotation, one value per line.
    Exec {
        #[arg(long)]
        kb: PathBuf,
        #[arg(long)]
        program: String,
        /// Initial variable binding `R<k>=<entity id>`; repeat for R0, R1, ...
        #[arg(long = "entity", value_name = "R<k>=ID")]
        entities: Vec<String>,
    },
    /// Print the valid next tokens after a program prefix.
    Assist {
        #[arg(long)]
        kb: PathBuf,
        #[arg(long, default_value = "")]
        prefix: String,
        /// Initial variable binding `R<k>=<entity id>`; repeatable.
        #[arg(long = "entity", value_name = "R<k>=ID")]
        entities: Vec<String>,
        #[arg(long, default_value_t = 3)]
        max_expressions: usize,
    },
    /// Decode a question with a trained model.
    Parse {
        #[arg(long)]
        kb: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        question: String,
        #[arg(long, default_value_t = 1)]
        beam: usize,
    },
    /// Train with iterative maximum likelihood then augmented REINFORCE.
    Train {
        #[arg(long)]
        kb: PathBuf,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        dev: PathBuf,
        /// `key = value` file; defaults apply to missing keys.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out_checkpoint: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// JSON-lines log destination; standard output if omitted.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Greedy-decode a dataset and print metrics as JSON.
    Eval {
        #[arg(long)]
        kb: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Compare analytic and finite-difference gradients on a miniature model.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum)]
        objective: Option<ObjectiveArg>,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    Likelihood,
    PolicyGradient,
}

fn kb_from(path: &Path) -> Result<KnowledgeBase> {
    load_kb(path).with_context(|| format!("loading {}", path.display()))
}

/// Parses `R<k>=<id>` bindings; the indices must cover `0..n` exactly once.
fn entity_sets(kb: &KnowledgeBase, bindings: &[String]) -> Result<Vec<EntitySet>> {
    let mut slots: Vec<Option<EntitySet>> = vec![None; bindings.len()];
    for b in bindings {
        let (var, id) = b.split_once('=').ok_or_else(|| anyhow!("expected R<k>=<id>, got {b:?}"))?;
        let k: usize = var
            .strip_prefix('R')
            .and_then(|k| k.parse().ok())
            .ok_or_else(|| anyhow!("bad variable {var:?} in {b:?}"))?;
        let e = kb.entity(id).ok_or_else(|| anyhow!("unknown entity {id:?}"))?;
        match slots.get_mut(k) {
            Some(slot @ None) => *slot = Some(EntitySet::singleton(Value::Entity(e))),
            Some(Some(_)) => bail!("R{k} bound twice"),
            None => bail!("R{k} leaves a gap; bind R0..R{} in full", bindings.len() - 1),
        }
    }
    Ok(slots.into_iter().map(|s| s.expect("every slot filled")).collect())
}

fn print_set(out: &mut impl Write, kb: &KnowledgeBase, set: &EntitySet) -> Result<()> {
    for v in set.iter() {
        writeln!(out, "{}", kb.display_value(v))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::GenKb { seed, entities, properties, density, out: path } => {
            let kb = gen_kb(seed, &KbSpec { n_entities: entities, n_properties: properties, edge_density: density })?;
            match path {
                Some(p) => fs::write(&p, kb.to_text()).with_context(|| format!("writing {}", p.display()))?,
                None => out.write_all(kb.to_text().as_bytes())?,
            }
        }
        Command::GenData { kb, seed, train, dev, test, out_dir } => {
            let kb = kb_from(&kb)?;
            let splits = gen_dataset(&kb, &default_templates(), seed, train, dev, test)?;
            fs::create_dir_all(&out_dir)?;
            for (name, items) in [("train", &splits.train), ("dev", &splits.dev), ("test", &splits.test)] {
                let path = out_dir.join(format!("{name}.jsonl"));
                fs::write(&path, write_dataset(items.iter().map(|g| &g.record)))
                    .with_context(|| format!("writing {}", path.display()))?;
                eprintln!("wrote {} items to {}", items.len(), path.display());
            }
        }
        Command::Exec { kb, program, entities } => {
            let kb = kb_from(&kb)?;
            let initial = entity_sets(&kb, &entities)?;
            let program = parse_program(&program, &kb, initial.len()).map_err(|e| anyhow!("{e}"))?;
            let value = execute_program(&kb, &program, &initial)?;
            print_set(&mut out, &kb, &value)?;
        }
        Command::Assist { kb, prefix, entities, max_expressions } => {
            let kb = kb_from(&kb)?;
            let mut state = DecodingState::new(&kb, entity_sets(&kb, &entities)?, max_expressions);
            for word in prefix.split_whitespace() {
                let valid = state.valid_tokens()?;
                let tok = valid
                    .iter()
                    .find(|t| t.text(&kb) == word)
                    .copied()
                    .ok_or_else(|| anyhow!("{word:?} is not valid here; valid: {}", tokens_to_text(&valid, &kb)))?;
                state.push(tok)?;
            }
            if !state.is_terminated() {
                for t in state.valid_tokens()? {
                    writeln!(out, "{}", t.text(&kb))?;
                }
            }
        }
        Command::Parse { kb, checkpoint, question, beam } => {
            let kb = kb_from(&kb)?;
            let model = load_checkpoint(&checkpoint).with_context(|| format!("loading {}", checkpoint.display()))?;
            model.check_kb(&kb)?;
            let item = QAItem::from_question(&kb, "question", &question)?;
            let best =
                beam_search(&model, &kb, &item, beam)?.into_iter().next().ok_or_else(|| anyhow!("no program found"))?;
            writeln!(out, "{}", best.program().to_text(&kb))?;
            print_set(&mut out, &kb, &best.denotation())?;
        }
        Command::Train { kb, train: train_path, dev, config, out_checkpoint, seed, log } => {
            let kb = kb_from(&kb)?;
            let mut cfg = match config {
                Some(p) => {
                    TrainConfig::parse(&fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?)?
                }
                None => TrainConfig::default(),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            cfg.validate()?;
            let train_set =
                load_dataset(&train_path, &kb).with_context(|| format!("loading {}", train_path.display()))?;
            let dev_set = load_dataset(&dev, &kb).with_context(|| format!("loading {}", dev.display()))?;
            let mut sink: Box<dyn Write + Send> = match &log {
                Some(p) => Box::new(fs::File::create(p).with_context(|| format!("creating {}", p.display()))?),
                None => Box::new(std::io::stdout()),
            };
            writeln!(sink, "{}", serde_json::json!({ "config": cfg }))?;
            let mut failed = None;
            let outcome = train(&kb, &train_set, &dev_set, &cfg, &mut |rec| {
                if let Err(e) = serde_json::to_writer(&mut sink, rec).map_err(anyhow::Error::from).and_then(|_| {
                    writeln!(sink)?;
                    sink.flush()?;
                    Ok(())
                }) {
                    failed.get_or_insert(e);
                }
            })?;
            if let Some(e) = failed {
                return Err(e.context("writing the training log"));
            }
            save_checkpoint(&outcome.model, &out_checkpoint)
                .with_context(|| format!("writing {}", out_checkpoint.display()))?;
            eprintln!(
                "dev f1 {:.4} after iterative ML, {:.4} final; checkpoint {}",
                outcome.ml_dev.f1,
                outcome.final_dev.f1,
                out_checkpoint.display()
            );
        }
        Command::Eval { kb, test, checkpoint } => {
            let kb = kb_from(&kb)?;
            let model = load_checkpoint(&checkpoint).with_context(|| format!("loading {}", checkpoint.display()))?;
            model.check_kb(&kb)?;
            let data = load_dataset(&test, &kb).with_context(|| format!("loading {}", test.display()))?;
            let metrics = evaluate(&model, &kb, &data)?;
            writeln!(out, "{}", serde_json::to_string(&metrics)?)?;
        }
        Command::Gradcheck { seed, objective, tolerance } => {
            let objectives = match objective {
                Some(ObjectiveArg::Likelihood) => vec![Objective::Likelihood],
                Some(ObjectiveArg::PolicyGradient) => vec![Objective::PolicyGradient],
                None => vec![Objective::Likelihood, Objective::PolicyGradient],
            };
            let mut worst: f64 = 0.0;
            for objective in objectives {
                let r = grad_check(&GradCheckConfig { objective, ..Default::default() }, seed)?;
                eprintln!("{objective:?}: {} coordinates, worst at {}[{}]", r.n_checked, r.worst.0, r.worst.1);
                worst = worst.max(r.max_rel_error);
            }
            writeln!(out, "max relative error {worst:.3e}")?;
            if worst > tolerance {
                bail!("max relative error {worst:.3e} exceeds {tolerance:.1e}");
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
