mod config;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use pufshift::attacks::{eavesdrop_linear, modeling_experiment, ModelingSetup};
use pufshift::block_modes::{cbc_decrypt, cbc_encrypt, CbcMessage, IvSource};
use pufshift::stats::{
    battery, battery_csv, delay_response, flip_rate_sweep, pairwise_hamming, BatteryConfig,
};
use pufshift::{
    generate_chip, run_session, Block, DelayMatrix, Direction, EnvCondition, Party, ResponseConfig,
    Role, ShiftKey, Transcript, Variant,
};

use config::ExperimentConfig;

/// Barrel-shifter PUF simulator: chips, protocol sessions, attacks and statistics.
#[derive(Debug, Parser)]
#[command(name = "pufshift", version)]
struct Cli {
    /// Flat TOML experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; falls back to the config file, then PUFSHIFT_SEED, then 0.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate or query simulated chips.
    #[command(subcommand)]
    Chip(ChipCmd),
    /// Run the two-party protocol.
    #[command(subcommand)]
    Protocol(ProtocolCmd),
    /// CBC encryption with one party's PUF.
    #[command(subcommand)]
    Cbc(CbcCmd),
    /// Eavesdropping and modeling attacks.
    #[command(subcommand)]
    Attack(AttackCmd),
    /// Randomness, uniqueness and reproducibility statistics.
    #[command(subcommand)]
    Stats(StatsCmd),
}

#[derive(Debug, Subcommand)]
enum ChipCmd {
    /// Write a chip's delay matrix as JSON.
    Gen {
        #[arg(long)]
        stages: Option<usize>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Print the response to one plaintext block as hex.
    Respond {
        #[command(flatten)]
        puf: PufArgs,
        /// Plaintext block as hex (width from the chip).
        #[arg(long)]
        plaintext: String,
        /// Apply the inverse response.
        #[arg(long)]
        reverse: bool,
    },
}

#[derive(Debug, Subcommand)]
enum ProtocolCmd {
    /// Run one session and print the wire messages.
    Run {
        #[arg(long, value_parser = parse_variant)]
        variant: Variant,
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..=3))]
        m: Option<u32>,
        #[arg(long)]
        stages: Option<usize>,
        /// Plaintext as hex; random from the seed when omitted.
        #[arg(long)]
        plaintext: Option<String>,
        #[arg(long)]
        bob_key: Option<String>,
        /// Ignored for shared-key sessions.
        #[arg(long)]
        alice_key: Option<String>,
        /// Transcript JSON.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
enum CbcCmd {
    /// Encrypt hex blocks, one per line, into a JSON ciphertext file.
    Encrypt {
        #[command(flatten)]
        puf: PufArgs,
        #[arg(short, long)]
        input: PathBuf,
        /// IV as hex; drawn from the seed when omitted.
        #[arg(long)]
        iv: Option<String>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Decrypt a JSON ciphertext file into hex blocks, one per line.
    Decrypt {
        #[command(flatten)]
        puf: PufArgs,
        #[arg(short, long)]
        input: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
enum AttackCmd {
    /// Passive linear eavesdropper.
    Eavesdrop {
        /// Attack a saved transcript instead of fresh sessions.
        #[arg(long, conflicts_with = "variant")]
        transcript: Option<PathBuf>,
        #[arg(long, value_parser = parse_variant, required_unless_present = "transcript")]
        variant: Option<Variant>,
        #[arg(long)]
        sessions: Option<usize>,
        /// Per-session success rates as CSV.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Logistic-regression modeling attack on a 2^stages-bit sub-chip.
    Model {
        /// Delay bits to attack.
        #[arg(long, value_delimiter = ',', default_values_t = [1, 2])]
        m: Vec<u32>,
        #[arg(long)]
        stages: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        #[arg(long)]
        n_keys: Option<usize>,
        #[arg(long)]
        holdout: Option<usize>,
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
enum StatsCmd {
    /// NIST subset over the zero-plaintext responses of many chips.
    Nist {
        #[command(flatten)]
        pop: PopulationArgs,
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..=3))]
        m: Option<u32>,
    },
    /// Pairwise inter-chip Hamming distance.
    Hd {
        #[command(flatten)]
        pop: PopulationArgs,
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..=3))]
        m: Option<u32>,
    },
    /// Bit-flip rates over the temperature and supply sweeps.
    Flip {
        #[command(flatten)]
        pop: PopulationArgs,
        #[arg(long, value_delimiter = ',', default_values_t = [1, 2])]
        m: Vec<u32>,
    },
}

#[derive(Debug, Args)]
struct PufArgs {
    /// Chip JSON; generated from the seed when omitted.
    #[arg(long)]
    chip: Option<PathBuf>,
    /// Key as a stage-ordered bit string or `s=N`.
    #[arg(long, default_value = "s=0")]
    key: String,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=3))]
    m: Option<u32>,
}

#[derive(Debug, Args)]
struct PopulationArgs {
    /// Chip seeds run from the master seed upwards.
    #[arg(long)]
    chips: Option<usize>,
    #[arg(long)]
    stages: Option<usize>,
    #[arg(long, default_value = "s=0")]
    key: String,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn parse_variant(s: &str) -> std::result::Result<Variant, String> {
    s.parse().map_err(|e: pufshift::PufError| e.to_string())
}

/// Everything a command produces: files are written only after the whole
/// command has succeeded.
#[derive(Default)]
struct Output {
    stdout: String,
    files: Vec<(PathBuf, String)>,
}

impl Output {
    fn emit(&mut self, target: Option<&Path>, ctx: &Ctx, body: String) {
        match target {
            Some(p) => self.files.push((ctx.cfg.output_path(p), body)),
            None => self.stdout.push_str(&body),
        }
    }

    fn flush(self) -> Result<()> {
        for (path, body) in &self.files {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)
                    .with_context(|| format!("creating {}", dir.display()))?;
            }
            std::fs::write(path, body).with_context(|| format!("writing {}", path.display()))?;
        }
        print!("{}", self.stdout);
        Ok(())
    }
}

struct Ctx {
    cfg: ExperimentConfig,
    seed: u64,
}

impl Ctx {
    fn chip(&self, path: Option<&Path>, stages: Option<usize>) -> Result<DelayMatrix> {
        match path {
            Some(p) => Ok(
                DelayMatrix::load(p).with_context(|| format!("loading chip {}", p.display()))?
            ),
            None => Ok(generate_chip(self.seed, self.cfg.foundry(stages)?)?),
        }
    }

    fn population(&self, pop: &PopulationArgs) -> Result<(Vec<DelayMatrix>, ShiftKey)> {
        let params = self.cfg.foundry(pop.stages)?;
        let n = self.cfg.chips(pop.chips);
        if n < 2 {
            bail!("need at least 2 chips, got {n}");
        }
        let key = ShiftKey::parse(&pop.key, params.stages)?;
        let chips = (0..n as u64)
            .map(|i| generate_chip(self.seed.wrapping_add(i), params))
            .collect::<pufshift::Result<Vec<_>>>()?;
        Ok((chips, key))
    }

    fn response_config(&self, m: Option<u32>) -> Result<ResponseConfig> {
        Ok(ResponseConfig::forward(self.cfg.delay_bit(m))?)
    }
}

#[derive(Serialize, Deserialize)]
struct CbcFile {
    width: usize,
    iv: String,
    blocks: Vec<String>,
}

fn read_hex_lines(path: &Path, width: usize) -> Result<Vec<Block>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .enumerate()
        .map(|(i, l)| {
            Block::from_hex(l, width).with_context(|| format!("{} block {}", path.display(), i + 1))
        })
        .collect()
}

fn run(cli: Cli) -> Result<Output> {
    let cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let seed = cfg.resolve_seed(cli.seed)?;
    log::info!("master seed {seed}");
    let ctx = Ctx { cfg, seed };
    let mut out = Output::default();

    match cli.command {
        Command::Chip(ChipCmd::Gen { stages, output }) => {
            let chip = ctx.chip(None, stages)?;
            out.emit(output.as_deref(), &ctx, chip.to_json()? + "\n");
        }
        Command::Chip(ChipCmd::Respond {
            puf,
            plaintext,
            reverse,
        }) => {
            let chip = ctx.chip(puf.chip.as_deref(), None)?;
            let key = ShiftKey::parse(&puf.key, chip.stages())?;
            let x = Block::from_hex(&plaintext, chip.width())?;
            let mut rc = ctx.response_config(puf.m)?;
            if reverse {
                rc = rc.with_direction(Direction::Reverse);
            }
            out.stdout = format!("{}\n", chip.respond(&x, &key, rc)?.to_hex());
        }
        Command::Protocol(ProtocolCmd::Run {
            variant,
            m,
            stages,
            plaintext,
            bob_key,
            alice_key,
            output,
        }) => {
            let rc = ctx.response_config(m)?;
            let params = ctx.cfg.foundry(stages)?;
            let mut rng = ChaCha20Rng::seed_from_u64(ctx.seed);
            let bob_chip = generate_chip(rng.random(), params)?;
            let alice_chip = generate_chip(rng.random(), params)?;
            let kb = match bob_key {
                Some(k) => ShiftKey::parse(&k, params.stages)?,
                None => ShiftKey::random(params.stages, &mut rng),
            };
            let ka = match (variant, alice_key) {
                (Variant::SharedKey, _) => kb.clone(),
                (_, Some(k)) => ShiftKey::parse(&k, params.stages)?,
                (_, None) => ShiftKey::random(params.stages, &mut rng),
            };
            let x = match plaintext {
                Some(h) => Block::from_hex(&h, params.width)?,
                None => Block::random(params.width, &mut rng),
            };
            let bob = Party::new(Role::Bob, bob_chip, kb.clone())?;
            let alice = Party::new(Role::Alice, alice_chip, ka.clone())?;
            let t = run_session(&bob, &alice, &x, variant, rc)?;
            let mut s = String::new();
            writeln!(s, "variant: {variant}")?;
            writeln!(
                s,
                "width: {}, m: {}, bob key s={}, alice key s={}",
                t.width(),
                rc.delay_bit,
                kb.amount(),
                ka.amount()
            )?;
            writeln!(s, "plaintext: {}", t.plaintext.to_hex())?;
            for msg in t.messages() {
                writeln!(
                    s,
                    "step {} {}: {}",
                    msg.step,
                    msg.label(),
                    msg.payload.to_hex()
                )?;
            }
            writeln!(s, "final: {}", t.final_block.to_hex())?;
            writeln!(s, "final == plaintext: {}", t.succeeded())?;
            out.stdout = s;
            if let Some(p) = output {
                out.emit(Some(&p), &ctx, t.to_json()? + "\n");
            }
        }
        Command::Cbc(CbcCmd::Encrypt {
            puf,
            input,
            iv,
            output,
        }) => {
            let chip = ctx.chip(puf.chip.as_deref(), None)?;
            let key = ShiftKey::parse(&puf.key, chip.stages())?;
            let blocks = read_hex_lines(&input, chip.width())?;
            let iv = match iv {
                Some(h) => Block::from_hex(&h, chip.width())?,
                None => IvSource::from_seed(ctx.seed).generate_iv(chip.width()),
            };
            let msg = CbcMessage { blocks, iv };
            let c = cbc_encrypt(&chip, &key, ctx.response_config(puf.m)?, &msg)?;
            let file = CbcFile {
                width: chip.width(),
                iv: msg.iv.to_hex(),
                blocks: c.iter().map(Block::to_hex).collect(),
            };
            out.emit(
                output.as_deref(),
                &ctx,
                serde_json::to_string_pretty(&file)? + "\n",
            );
        }
        Command::Cbc(CbcCmd::Decrypt { puf, input, output }) => {
            let chip = ctx.chip(puf.chip.as_deref(), None)?;
            let key = ShiftKey::parse(&puf.key, chip.stages())?;
            let text = std::fs::read_to_string(&input)
                .with_context(|| format!("reading {}", input.display()))?;
            let file: CbcFile = serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", input.display()))?;
            if file.width != chip.width() {
                bail!(
                    "ciphertext width {} does not match chip width {}",
                    file.width,
                    chip.width()
                );
            }
            let iv = Block::from_hex(&file.iv, file.width)?;
            let blocks = file
                .blocks
                .iter()
                .map(|h| Block::from_hex(h, file.width))
                .collect::<pufshift::Result<Vec<_>>>()?;
            let plain = cbc_decrypt(&chip, &key, ctx.response_config(puf.m)?, &blocks, &iv)?;
            let body: String = plain.iter().map(|b| b.to_hex() + "\n").collect();
            out.emit(output.as_deref(), &ctx, body);
        }
        Command::Attack(AttackCmd::Eavesdrop {
            transcript,
            variant,
            sessions,
            output,
        }) => {
            let transcripts = match transcript {
                Some(p) => {
                    let text = std::fs::read_to_string(&p)
                        .with_context(|| format!("reading {}", p.display()))?;
                    vec![Transcript::from_json(&text)?]
                }
                None => {
                    let variant = variant.expect("clap requires a variant without a transcript");
                    let rc = ctx.response_config(None)?;
                    let params = ctx.cfg.foundry(None)?;
                    let mut rng = ChaCha20Rng::seed_from_u64(ctx.seed);
                    (0..ctx.cfg.sessions(sessions))
                        .map(|_| {
                            let kb = ShiftKey::random(params.stages, &mut rng);
                            let ka = match variant {
                                Variant::SharedKey => kb.clone(),
                                _ => ShiftKey::random(params.stages, &mut rng),
                            };
                            let bob =
                                Party::new(Role::Bob, generate_chip(rng.random(), params)?, kb)?;
                            let alice =
                                Party::new(Role::Alice, generate_chip(rng.random(), params)?, ka)?;
                            let x = Block::random(params.width, &mut rng);
                            run_session(&bob, &alice, &x, variant, rc)
                        })
                        .collect::<pufshift::Result<Vec<_>>>()?
                }
            };
            if transcripts.is_empty() {
                bail!("no sessions to attack");
            }
            let mut csv = String::from("session,variant,success_rate\n");
            let mut total = 0.0;
            for (i, t) in transcripts.iter().enumerate() {
                let r = eavesdrop_linear(t, t.variant).success_rate;
                total += r;
                writeln!(csv, "{i},{},{r}", t.variant)?;
            }
            let mean = total / transcripts.len() as f64;
            out.stdout = format!(
                "variant: {}\nsessions: {}\nmean success rate: {mean:.4}\n",
                transcripts[0].variant,
                transcripts.len()
            );
            if let Some(p) = output {
                out.emit(Some(&p), &ctx, csv);
            }
        }
        Command::Attack(AttackCmd::Model {
            m,
            stages,
            sizes,
            n_keys,
            holdout,
            iterations,
            output,
        }) => {
            let d = ModelingSetup::default();
            let mut setup = ModelingSetup {
                stages: stages.unwrap_or(d.stages),
                n_keys: n_keys.or(ctx.cfg.n_keys).unwrap_or(d.n_keys),
                training_sizes: sizes
                    .or_else(|| ctx.cfg.training_sizes.clone())
                    .unwrap_or(d.training_sizes),
                holdout_size: holdout.or(ctx.cfg.holdout).unwrap_or(d.holdout_size),
                seed: ctx.seed,
                ..d
            };
            if let Some(it) = iterations {
                setup.hyper.iterations = it;
            }
            for &bit in &m {
                ResponseConfig::forward(bit)?;
            }
            let chip = ctx.chip(None, None)?;
            let mut csv =
                String::from("delay_bit,training_size,holdout,mean_accuracy,exact_match\n");
            let mut s = String::new();
            for &bit in &m {
                for row in modeling_experiment(&chip, &setup, bit)? {
                    let ks = &row.key_shared;
                    writeln!(
                        csv,
                        "{bit},{},key-shared,{},{}",
                        row.training_size, ks.mean, ks.exact_match
                    )?;
                    write!(
                        s,
                        "m={bit} n={:>6} key-shared {:.4}",
                        row.training_size, ks.mean
                    )?;
                    if let Some(kd) = &row.key_disjoint {
                        writeln!(
                            csv,
                            "{bit},{},key-disjoint,{},{}",
                            row.training_size, kd.mean, kd.exact_match
                        )?;
                        write!(s, " key-disjoint {:.4}", kd.mean)?;
                    }
                    s.push('\n');
                }
            }
            out.stdout = s;
            if let Some(p) = output {
                out.emit(Some(&p), &ctx, csv);
            }
        }
        Command::Stats(StatsCmd::Nist { pop, m }) => {
            let (chips, key) = ctx.population(&pop)?;
            let bit = ctx.cfg.delay_bit(m);
            ResponseConfig::forward(bit)?;
            let seqs: Vec<_> = chips
                .iter()
                .map(|c| delay_response(c, &key, bit).into())
                .collect();
            let reports = battery(&seqs, BatteryConfig::default())?;
            let mut s = String::new();
            for r in &reports {
                let verdict = if r.proportion_ok() { "pass" } else { "FAIL" };
                writeln!(
                    s,
                    "{:<16} {:>3}/{} uniformity p={:.6} {verdict}",
                    r.name, r.pass_count, r.total, r.uniformity_p
                )?;
            }
            out.stdout = s;
            if let Some(p) = &pop.output {
                out.emit(Some(p), &ctx, battery_csv(&reports));
            }
        }
        Command::Stats(StatsCmd::Hd { pop, m }) => {
            let (chips, key) = ctx.population(&pop)?;
            let bit = ctx.cfg.delay_bit(m);
            ResponseConfig::forward(bit)?;
            let responses: Vec<Block> =
                chips.iter().map(|c| delay_response(c, &key, bit)).collect();
            let hd = pairwise_hamming(&responses)?;
            let mut csv = String::from("statistic,lo,hi,value\n");
            writeln!(csv, "pairs,,,{}", hd.pairs)?;
            writeln!(csv, "mean,,,{}", hd.mean)?;
            writeln!(csv, "sd,,,{}", hd.sd)?;
            for b in &hd.histogram {
                writeln!(csv, "bin,{},{},{}", b.lo, b.hi, b.count)?;
            }
            out.stdout = format!(
                "pairs: {}\nmean HD: {:.2}\nsd: {:.2}\n",
                hd.pairs, hd.mean, hd.sd
            );
            out.emit(pop.output.as_deref(), &ctx, csv);
        }
        Command::Stats(StatsCmd::Flip { pop, m }) => {
            let (chips, key) = ctx.population(&pop)?;
            let rows = flip_rate_sweep(
                &chips,
                &EnvCondition::sweep(),
                &key,
                &m,
                ctx.cfg.noise()?,
                ctx.seed,
            )?;
            let mut csv = String::from("temperature_c,vdd_v,delay_bit,flip_rate\n");
            for r in &rows {
                writeln!(
                    csv,
                    "{},{},{},{}",
                    r.temperature, r.vdd, r.delay_bit, r.rate
                )?;
            }
            out.emit(pop.output.as_deref(), &ctx, csv);
        }
    }
    Ok(out)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match run(cli).and_then(Output::flush) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
