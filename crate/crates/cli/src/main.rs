use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use vinn::data::{
    load_demoset, load_embeddings, normalize_actions, save_demoset, save_embeddings,
    subsample_demos, synth_demoset,
};
use vinn::encoder::{
    embed_demoset, fit_encoder, load_encoder, save_encoder, train_encoder, TrainConfig,
};
use vinn::eval::{
    dataset_size_sweep, eval_policy, format_cells, format_curves, format_reports, latency_report,
    sweep_k, Cell, EvalPolicy, PolicyKind, SweepOptions,
};
use vinn::policy::{
    bc_rep_fit, build_index, load_index, open_loop_fit, random_policy, save_index, scale_action,
    BcConfig, BcRep, Prediction, Vinn,
};
use vinn::serve::{Client, Server};
use vinn::sim::{
    format_trace, rates, trial_rollouts, Controller, EnvConfig, ExpertController, OcclusionLevel,
};
use vinn::{Action, DemoSet, Encoder, EncoderKind, EncoderSpec, NeighborIndex, PolicyConfig};

#[derive(Parser)]
#[command(
    name = "vinn",
    version,
    about = "k-NN visual imitation: data, encoders, policies, evaluation and serving"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic demonstration set.
    Collect {
        #[arg(long, default_value = "expert")]
        generator: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rescale every action translation to unit norm.
    Normalize {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Keep `n` demonstrations chosen uniformly without replacement.
    Subsample {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit or train an encoder and write its checkpoint.
    TrainEncoder {
        #[arg(long = "in")]
        input: PathBuf,
        /// identity | random_projection | whitening | byol_mlp
        #[arg(long, default_value = "byol_mlp")]
        kind: EncoderKind,
        /// Embedding width (default: the observation width for identity, else 32).
        #[arg(long)]
        dim: Option<usize>,
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Encode every frame of a demonstration set.
    Embed {
        #[arg(long)]
        enc: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a neighbor index from an embedding file.
    BuildIndex {
        #[arg(long)]
        emb: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict actions for observations read from a JSON file.
    Predict {
        #[arg(long)]
        idx: PathBuf,
        #[arg(long)]
        enc: PathBuf,
        /// A JSON array of numbers, or an array of such arrays.
        #[arg(long)]
        obs: PathBuf,
        #[command(flatten)]
        policy: PolicyArgs,
    },
    /// Closed-loop trials in the simulator.
    Rollout {
        /// vinn | expert | random | open-loop | bc-rep
        #[arg(long, default_value = "vinn")]
        policy: String,
        #[arg(long)]
        idx: Option<PathBuf>,
        #[arg(long)]
        enc: Option<PathBuf>,
        /// Training demonstrations (open-loop, bc-rep).
        #[arg(long)]
        demos: Option<PathBuf>,
        #[arg(long, default_value_t = 30)]
        trials: usize,
        /// 0 none, 1 partial, 2 heavy, 3 full.
        #[arg(long, default_value_t = 0)]
        occlusion: u8,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long, default_value_t = 2000)]
        bc_epochs: usize,
        /// Write every trial's step trace here.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Test MSE of one or more policies.
    Eval {
        #[arg(long)]
        test: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "vinn")]
        policies: Vec<PolicyKind>,
        #[arg(long)]
        idx: Option<PathBuf>,
        #[arg(long)]
        enc: Option<PathBuf>,
        /// Training demonstrations (open-loop, bc-rep).
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long, default_value_t = 2000)]
        bc_epochs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// VINN test MSE as a function of k.
    SweepK {
        #[arg(long)]
        idx: PathBuf,
        #[arg(long)]
        enc: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,10,16,20,32")]
        ks: Vec<usize>,
    },
    /// Test MSE against training-set size, averaged over seeds.
    SubsampleEval {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "5,10,20,40,71")]
        sizes: Vec<usize>,
        /// Number of seeds (0..n).
        #[arg(long, default_value_t = 3)]
        seeds: u64,
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "vinn,bc-rep,open-loop,random"
        )]
        policies: Vec<PolicyKind>,
        #[arg(long, default_value = "identity")]
        kind: EncoderKind,
        #[arg(long)]
        dim: Option<usize>,
        #[command(flatten)]
        train_args: TrainArgs,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long, default_value_t = 8000)]
        bc_epochs: usize,
    },
    /// Serve predictions over TCP until killed.
    Serve {
        #[arg(long)]
        idx: PathBuf,
        #[arg(long)]
        enc: PathBuf,
        #[command(flatten)]
        policy: PolicyArgs,
        #[arg(long, default_value = "127.0.0.1:7788")]
        bind: String,
    },
    /// Query a running server.
    Query {
        #[arg(long)]
        addr: String,
        #[arg(long)]
        obs: PathBuf,
        #[arg(long, default_value_t = 1000)]
        timeout_ms: u64,
    },
    /// Mean encode and neighbor-search time per call.
    Latency {
        #[arg(long)]
        idx: PathBuf,
        #[arg(long)]
        enc: PathBuf,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long, default_value_t = 1000)]
        queries: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(clap::Args)]
struct TrainArgs {
    /// Hidden widths of the MLP encoder.
    #[arg(long, value_delimiter = ',', default_value = "64")]
    hidden: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 3e-4)]
    lr: f64,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    /// Initialize the first layer from a whitening fit.
    #[arg(long)]
    warm_start: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl TrainArgs {
    fn config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            lr: self.lr,
            batch_size: self.batch_size,
            warm_start: self.warm_start,
            seed: self.seed,
            ..TrainConfig::default()
        }
    }

    fn spec(&self, kind: EncoderKind, obs_dim: usize, dim: Option<usize>) -> EncoderSpec {
        let default_dim = if kind == EncoderKind::Identity {
            obs_dim
        } else {
            32
        };
        EncoderSpec {
            kind,
            obs_dim,
            embed_dim: dim.unwrap_or(default_dim),
            hidden_dims: self.hidden.clone(),
            seed: self.seed,
        }
    }
}

#[derive(clap::Args)]
struct PolicyArgs {
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Componentwise action attenuation c.
    #[arg(long, default_value = "0.5,0.5,0.5", value_parser = parse_scale)]
    scale: [f64; 3],
    /// Rescale the averaged translation to unit norm.
    #[arg(long)]
    renormalize: bool,
}

impl PolicyArgs {
    fn config(&self) -> PolicyConfig {
        PolicyConfig {
            k: self.k,
            action_scale: self.scale,
            renormalize_translation: self.renormalize,
            ..PolicyConfig::default()
        }
    }
}

fn parse_scale(s: &str) -> Result<[f64; 3], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    <[f64; 3]>::try_from(v).map_err(|v| format!("expected 3 values, got {}", v.len()))
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Collect {
            generator,
            n,
            seed,
            out,
        } => write_demos(&synth_demoset(&generator, n, seed)?, &out),
        Command::Normalize { input, out } => {
            write_demos(&normalize_actions(&read_demos(&input)?)?, &out)
        }
        Command::Subsample {
            input,
            n,
            seed,
            out,
        } => write_demos(&subsample_demos(&read_demos(&input)?, n, seed)?, &out),
        Command::TrainEncoder {
            input,
            kind,
            dim,
            train,
            out,
        } => {
            let set = read_demos(&input)?;
            let spec = train.spec(kind, set.obs_dim(), dim);
            let enc = if kind == EncoderKind::ByolMlp {
                let trained = train_encoder(&set, &spec, &train.config())?;
                for (epoch, loss) in trained.loss_curve.iter().enumerate() {
                    eprintln!("epoch {epoch}\tloss {loss:.6}");
                }
                trained.encoder
            } else {
                fit_encoder(&set, &spec, &train.config())?
            };
            save_encoder(&enc, &out).with_context(|| format!("writing {}", out.display()))?;
            println!(
                "wrote {} encoder {} -> {} to {}",
                enc.kind(),
                enc.obs_dim(),
                enc.embed_dim(),
                out.display()
            );
            Ok(())
        }
        Command::Embed { enc, input, out } => {
            let emb = embed_demoset(&read_encoder(&enc)?, &read_demos(&input)?)?;
            save_embeddings(&emb, &out).with_context(|| format!("writing {}", out.display()))?;
            println!(
                "wrote {} embeddings of width {} to {}",
                emb.len(),
                emb.dim(),
                out.display()
            );
            Ok(())
        }
        Command::BuildIndex { emb, out } => {
            let emb =
                load_embeddings(&emb).with_context(|| format!("reading {}", emb.display()))?;
            let index = build_index(&emb)?;
            save_index(&index, &out).with_context(|| format!("writing {}", out.display()))?;
            println!("wrote index of {} rows to {}", index.len(), out.display());
            Ok(())
        }
        Command::Predict {
            idx,
            enc,
            obs,
            policy,
        } => {
            let vinn = Vinn::new(read_index(&idx)?, read_encoder(&enc)?, policy.config())?;
            let (batch, observations) = read_observations(&obs)?;
            let out = observations
                .iter()
                .map(|o| {
                    let p = vinn.predict(o)?;
                    let scaled = scale_action(&p.action, &vinn.cfg.action_scale)?;
                    Ok(prediction_json(&p, &scaled))
                })
                .collect::<Result<Vec<_>>>()?;
            print_json(batch, out)
        }
        Command::Rollout {
            policy,
            idx,
            enc,
            demos,
            trials,
            occlusion,
            seed,
            k,
            bc_epochs,
            trace,
        } => {
            let level = OcclusionLevel::from_level(occlusion)
                .ok_or_else(|| anyhow!("occlusion must be 0..=3, got {occlusion}"))?;
            let cfg = EnvConfig::default().with_occlusion(level);
            let mut controller: Box<dyn Controller> = match policy.as_str() {
                "vinn" => Box::new(Vinn::new(
                    read_index(need(&idx, "--idx")?)?,
                    read_encoder(need(&enc, "--enc")?)?,
                    PolicyConfig::closed_loop(k),
                )?),
                "expert" => Box::new(ExpertController { cfg: cfg.clone() }),
                "random" => Box::new(random_policy(seed)),
                "open-loop" => Box::new(open_loop_fit(
                    &read_demos(need(&demos, "--demos")?)?,
                    PolicyConfig::default().gripper_thresholds,
                )),
                "bc-rep" => Box::new(fit_bc(
                    read_encoder(need(&enc, "--enc")?)?,
                    &read_demos(need(&demos, "--demos")?)?,
                    bc_epochs,
                    seed,
                )?),
                other => bail!("unknown policy {other:?}"),
            };
            let results = trial_rollouts(controller.as_mut(), &cfg, trials, seed)?;
            let r = rates(&results);
            println!("policy\tocclusion\ttrials\tgrasp_rate\topen_rate");
            println!(
                "{policy}\t{occlusion}\t{}\t{:.4}\t{:.4}",
                r.trials, r.grasp_rate, r.open_rate
            );
            if let Some(path) = trace {
                let text: String = results
                    .iter()
                    .map(|(s, res)| format_trace(res, *s))
                    .collect();
                fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
            }
            Ok(())
        }
        Command::Eval {
            test,
            policies,
            idx,
            enc,
            train,
            k,
            bc_epochs,
            seed,
        } => {
            let test = read_demos(&test)?;
            let encoder = enc.as_deref().map(read_encoder).transpose()?;
            let train = train.as_deref().map(read_demos).transpose()?;
            let mut reports = Vec::new();
            for kind in policies {
                let report = match kind {
                    PolicyKind::Vinn => {
                        let index = read_index(need(&idx, "--idx")?)?;
                        let cfg = PolicyConfig {
                            k,
                            ..PolicyConfig::default()
                        };
                        let encoder = encoder
                            .as_ref()
                            .ok_or_else(|| anyhow!("vinn needs --enc"))?;
                        eval_policy(
                            &EvalPolicy::Vinn {
                                index: &index,
                                encoder,
                                cfg,
                            },
                            &test,
                        )?
                    }
                    PolicyKind::BcRep => {
                        let encoder = encoder
                            .clone()
                            .ok_or_else(|| anyhow!("bc-rep needs --enc"))?;
                        let train = train
                            .as_ref()
                            .ok_or_else(|| anyhow!("bc-rep needs --train"))?;
                        let bc = fit_bc(encoder, train, bc_epochs, seed)?;
                        eval_policy(&EvalPolicy::BcRep(&bc), &test)?
                    }
                    PolicyKind::OpenLoop => {
                        let train = train
                            .as_ref()
                            .ok_or_else(|| anyhow!("open-loop needs --train"))?;
                        let p = open_loop_fit(train, PolicyConfig::default().gripper_thresholds);
                        eval_policy(&EvalPolicy::OpenLoop(&p), &test)?
                    }
                    PolicyKind::Random => eval_policy(&EvalPolicy::Random { seed }, &test)?,
                };
                reports.push(report);
            }
            print!("{}", format_reports(&reports));
            Ok(())
        }
        Command::SweepK { idx, enc, test, ks } => {
            let curve = sweep_k(
                &read_index(&idx)?,
                &read_encoder(&enc)?,
                &read_demos(&test)?,
                &ks,
                &[0],
            )?;
            let cells: Vec<Cell> = curve
                .points
                .iter()
                .map(|p| Cell {
                    policy: PolicyKind::Vinn,
                    x: p.x,
                    seed: 0,
                    mse: p.mse,
                })
                .collect();
            print!("{}", format_cells("k", &cells));
            print!("{}", format_curves("k", &[(PolicyKind::Vinn, curve)]));
            Ok(())
        }
        Command::SubsampleEval {
            train,
            test,
            sizes,
            seeds,
            policies,
            kind,
            dim,
            train_args,
            k,
            bc_epochs,
        } => {
            let train = read_demos(&train)?;
            let test = read_demos(&test)?;
            let opts = SweepOptions {
                encoder: train_args.spec(kind, train.obs_dim(), dim),
                train: train_args.config(),
                policy: PolicyConfig {
                    k,
                    ..PolicyConfig::default()
                },
                bc: BcConfig {
                    epochs: bc_epochs,
                    ..BcConfig::default()
                },
            };
            let seeds: Vec<u64> = (0..seeds).collect();
            let sweep = dataset_size_sweep(&train, &test, &sizes, &seeds, &policies, &opts)?;
            print!("{}", format_cells("size", &sweep.cells));
            print!("{}", format_curves("size", &sweep.curves));
            Ok(())
        }
        Command::Serve {
            idx,
            enc,
            policy,
            bind,
        } => {
            let vinn = Vinn::new(read_index(&idx)?, read_encoder(&enc)?, policy.config())?;
            let server = Server::bind(vinn, &bind).with_context(|| format!("binding {bind}"))?;
            println!("listening on {}", server.local_addr()?);
            std::io::stdout().flush()?;
            server.run();
            Ok(())
        }
        Command::Query {
            addr,
            obs,
            timeout_ms,
        } => {
            let (batch, observations) = read_observations(&obs)?;
            let mut client = Client::connect(&addr, Duration::from_millis(timeout_ms))
                .with_context(|| format!("connecting to {addr}"))?;
            let out = observations
                .iter()
                .map(|o| Ok(action_json(&client.query(o)?)))
                .collect::<Result<Vec<_>>>()?;
            print_json(batch, out)
        }
        Command::Latency {
            idx,
            enc,
            k,
            queries,
            seed,
        } => {
            let r = latency_report(&read_index(&idx)?, &read_encoder(&enc)?, k, queries, seed)?;
            println!("rows\tembed_dim\tobs_dim\tk\tqueries\tencode_us\tquery_us");
            println!(
                "{}\t{}\t{}\t{}\t{}\t{:.3}\t{:.3}",
                r.index_rows,
                r.embed_dim,
                r.obs_dim,
                r.k,
                r.queries,
                r.encode_time.as_secs_f64() * 1e6,
                r.query_time.as_secs_f64() * 1e6
            );
            Ok(())
        }
    }
}

fn need<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    p.as_deref().ok_or_else(|| anyhow!("{flag} is required"))
}

fn read_demos(path: &Path) -> Result<DemoSet> {
    load_demoset(path).with_context(|| format!("reading {}", path.display()))
}

fn write_demos(set: &DemoSet, path: &Path) -> Result<()> {
    save_demoset(set, path).with_context(|| format!("writing {}", path.display()))?;
    println!(
        "wrote {} demos ({} frames, obs_dim {}) to {}",
        set.num_demos(),
        set.num_frames(),
        set.obs_dim(),
        path.display()
    );
    Ok(())
}

fn read_encoder(path: &Path) -> Result<Encoder> {
    load_encoder(path).with_context(|| format!("reading {}", path.display()))
}

fn read_index(path: &Path) -> Result<NeighborIndex> {
    load_index(path).with_context(|| format!("reading {}", path.display()))
}

fn fit_bc(encoder: Encoder, demos: &DemoSet, epochs: usize, seed: u64) -> Result<BcRep> {
    let emb = embed_demoset(&encoder, demos)?;
    let cfg = BcConfig {
        epochs,
        seed,
        ..BcConfig::default()
    };
    let head = bc_rep_fit(&emb, &cfg)?;
    Ok(BcRep::new(encoder, head)?)
}

/// Returns whether the file held a batch, and the observations.
fn read_observations(path: &Path) -> Result<(bool, Vec<Vec<f64>>)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: Value =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let numbers = |v: &Value| -> Result<Vec<f64>> {
        v.as_array()
            .ok_or_else(|| anyhow!("expected an array of numbers"))?
            .iter()
            .map(|x| {
                x.as_f64()
                    .ok_or_else(|| anyhow!("expected a number, got {x}"))
            })
            .collect()
    };
    match value.as_array() {
        Some(items) if items.iter().all(Value::is_array) && !items.is_empty() => {
            Ok((true, items.iter().map(numbers).collect::<Result<_>>()?))
        }
        _ => Ok((false, vec![numbers(&value)?])),
    }
}

fn action_json(a: &Action) -> Value {
    json!({
        "translation": a.translation,
        "gripper": a.gripper.to_string(),
    })
}

/// The policy action plus what the server would send (`scaled_translation`).
fn prediction_json(p: &Prediction, scaled: &Action) -> Value {
    let mut v = action_json(&p.action);
    v["scaled_translation"] = json!(scaled.translation);
    v["raw_translation"] = json!(p.raw_translation);
    v["gripper_float"] = json!(p.gripper_float);
    v["nearest_distance"] = json!(p.nearest_distance);
    v
}

fn print_json(batch: bool, mut out: Vec<Value>) -> Result<()> {
    let v = if batch {
        Value::Array(out)
    } else {
        out.remove(0)
    };
    println!("{}", serde_json::to_string_pretty(&v)?);
    Ok(())
}
