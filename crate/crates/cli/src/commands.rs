//! Subcommand implementations.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use smdma::channel::{ks_critical_001, ks_statistic, sr_sample, SrCdf, SrParams};
use smdma::codecs::{build_channel_codec, build_semantic_codec, train_semantic, ChannelCodec};
use smdma::config::{parse_grid, parse_normalizations, parse_sortings, ExperimentConfig};
use smdma::media::{gen_pair, save_pnm, PairSpec};
use smdma::pipeline::{
    evaluate_sweep, records_to_csv, train_channel, training_vectors, Models, Sorting, SweepGrid,
};
use smdma::ranking::{calibrate_ranking, CropSpec, read_ranking_file, write_ranking_file, RankingMode};
use smdma::rng::{derive_seed, label};
use smdma::{Error, Result};

use crate::manifest::{read_manifest, sha256_file, Manifest};
use crate::plot::{render_svg, series_from_csv};
use crate::workspace::*;
use crate::{
    CalibrateArgs, Cli, Command, ConfigArgs, GenDataArgs, PlotArgs, ReplayArgs, SampleChannelArgs, Stage, SweepArgs,
    TrainArgs,
};

/// How a command is being run. During replay the recorded config snapshot
/// replaces the config file and overrides, and no new manifest is written.
#[derive(Debug, Default, Clone)]
pub struct Context {
    pub snapshot: Option<String>,
    pub replay: bool,
}

pub fn run(cli: &Cli, argv: &[String], ctx: &Context) -> Result<()> {
    match &cli.command {
        Command::GenData(a) => gen_data(a, argv, ctx),
        Command::Train(a) => match a.stage {
            Stage::Semantic => train_semantic_stage(a, argv, ctx),
            Stage::Channel => train_channel_stage(a, argv, ctx),
        },
        Command::Calibrate(a) => calibrate(a, argv, ctx),
        Command::Sweep(a) => sweep(a, argv, ctx),
        Command::Plot(a) => plot(a, argv, ctx),
        Command::SampleChannel(a) => sample_channel(a, argv, ctx),
        Command::Replay(a) => replay(a),
    }
}

fn load_config(args: &ConfigArgs, ctx: &Context) -> Result<ExperimentConfig> {
    if let Some(text) = &ctx.snapshot {
        return ExperimentConfig::from_text(text);
    }
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    for o in &args.overrides {
        cfg.apply_override(o)?;
    }
    Ok(cfg)
}

fn finish(manifest: Manifest, path: PathBuf, ctx: &Context) -> Result<()> {
    if ctx.replay {
        return Ok(());
    }
    manifest.finish(&path)
}

fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn gen_data(a: &GenDataArgs, argv: &[String], ctx: &Context) -> Result<()> {
    if a.count == 0 {
        return Err(Error::Usage("--count must be >= 1".into()));
    }
    let spec = PairSpec { size: a.size, channels: a.channels, edit_fraction: a.edit_fraction, ..PairSpec::default() };
    // validate before touching the filesystem
    gen_pair(&spec, a.seed)?;
    let index = a.out.join(INDEX_FILE);
    if index.exists() && !a.force && !ctx.replay {
        return Err(Error::Usage(format!("{} already exists (pass --force to overwrite)", index.display())));
    }
    ensure_dir(&a.out)?;
    let ext = if a.channels == 1 { "pgm" } else { "ppm" };
    let mut manifest = Manifest::begin("gen-data", argv);
    manifest.seed("seed", a.seed);
    let mut listing = format!(
        "# size={} channels={} edit_fraction={} seed={} count={}\n",
        a.size, a.channels, a.edit_fraction, a.seed, a.count
    );
    for i in 0..a.count {
        let (s1, s2) = gen_pair(&spec, derive_seed(a.seed, &[i as u64]))?;
        let names = [format!("pair_{i:04}_a.{ext}"), format!("pair_{i:04}_b.{ext}")];
        for (img, name) in [&s1, &s2].into_iter().zip(&names) {
            let path = a.out.join(name);
            save_pnm(img, &path)?;
            manifest.output(path);
        }
        writeln!(listing, "{} {}", names[0], names[1]).unwrap();
    }
    write_text(&index, &listing)?;
    manifest.output(index);
    println!("wrote {} pairs of {}x{} images to {}", a.count, a.size, a.size, a.out.display());
    finish(manifest, a.out.join("manifest-gen-data.json"), ctx)
}

fn train_semantic_stage(a: &TrainArgs, argv: &[String], ctx: &Context) -> Result<()> {
    let cfg = load_config(&a.config, ctx)?;
    let ws = &a.out;
    ensure_dir(ws)?;
    let data_dir = resolve(ws, &cfg.data_dir);
    let pairs = load_pairs(&data_dir)?;
    let images = flatten_pairs(&pairs);
    let (h, w, c) = images[0].shape();
    let scfg = cfg.semantic_config(h, w, c)?;
    let init_seed = derive_seed(cfg.seed, &[label("semantic-init")]);
    let train_seed = derive_seed(cfg.seed, &[label("semantic-train")]);

    let mut codec = build_semantic_codec(&scfg, init_seed)?;
    let curve = train_semantic(&mut codec, &images, &cfg.semantic_train, train_seed)?;
    if cfg.semantic_standardize {
        codec.standardize_features(&images)?;
    }

    let mut manifest = Manifest::begin("train", argv);
    manifest.config(cfg.to_text());
    manifest.seed("run.seed", cfg.seed);
    manifest.seed("semantic-init", init_seed);
    manifest.seed("semantic-train", train_seed);
    manifest.inputs([data_dir.join(INDEX_FILE)]);
    manifest.outputs(save_semantic(ws, &codec)?);
    let loss_path = ws.join("semantic_loss.csv");
    let mut csv = String::from("epoch,mse\n");
    for (e, l) in curve.iter().enumerate() {
        writeln!(csv, "{},{l:.10}", e + 1).unwrap();
    }
    write_text(&loss_path, &csv)?;
    manifest.output(loss_path);
    match (curve.first(), curve.last()) {
        (Some(first), Some(last)) => println!(
            "semantic codec trained on {} images: loss {first:.6} -> {last:.6} over {} epochs",
            images.len(),
            curve.len()
        ),
        _ => println!("semantic codec initialized ({} images, 0 epochs)", images.len()),
    }
    finish(manifest, ws.join("manifest-train-semantic.json"), ctx)
}

fn train_channel_stage(a: &TrainArgs, argv: &[String], ctx: &Context) -> Result<()> {
    let cfg = load_config(&a.config, ctx)?;
    let ws = &a.out;
    let semantic = load_semantic(ws)?;
    let data_dir = resolve(ws, &cfg.data_dir);
    let pairs = load_pairs(&data_dir)?;
    let images = flatten_pairs(&pairs);
    let calibration = calibrate_ranking(&images, &semantic, &semantic, cfg.pipeline.epsilon)?;
    let models = Models { semantic, channel: ChannelCodec::Identity, calibrated: Some(calibration.perm) };
    let pcfg = smdma::pipeline::PipelineConfig { sorting: Sorting::Sensitivity, ..cfg.pipeline.clone() };
    let z = training_vectors(&pairs, &pcfg, &models)?;

    let init_seed = derive_seed(cfg.seed, &[label("channel-init")]);
    let train_seed = derive_seed(cfg.seed, &[label("channel-train")]);
    let mut codec = build_channel_codec(&cfg.channel_codec, init_seed)?;
    let mut manifest = Manifest::begin("train", argv);
    manifest.config(cfg.to_text());
    manifest.seed("run.seed", cfg.seed);
    manifest.seed("channel-init", init_seed);
    manifest.seed("channel-train", train_seed);
    manifest.inputs(semantic_files(ws));
    manifest.inputs([data_dir.join(INDEX_FILE)]);
    manifest.outputs(save_channel(ws, &codec, &cfg.channel_codec, true)?);

    let curve = train_channel(&mut codec, &z, &pcfg, train_seed)?;
    manifest.outputs(save_channel(ws, &codec, &cfg.channel_codec, false)?);
    let loss_path = ws.join("channel_loss.csv");
    let mut csv = String::from("epoch,combined,user1,user2\n");
    for (e, ep) in curve.iter().enumerate() {
        writeln!(csv, "{},{:.10},{:.10},{:.10}", e + 1, ep.combined, ep.users[0], ep.users[1]).unwrap();
    }
    write_text(&loss_path, &csv)?;
    manifest.output(loss_path);
    match (curve.first(), curve.last()) {
        (Some(first), Some(last)) => println!(
            "channel codec trained on {} pairs ({} combiner): loss {:.6} -> {:.6} over {} epochs",
            z.len(),
            pcfg.combiner,
            first.combined,
            last.combined,
            curve.len()
        ),
        _ => println!("channel codec initialized ({} pairs, 0 epochs)", z.len()),
    }
    finish(manifest, ws.join("manifest-train-channel.json"), ctx)
}

fn calibrate(a: &CalibrateArgs, argv: &[String], ctx: &Context) -> Result<()> {
    let cfg = load_config(&a.config, ctx)?;
    let ws = parent_dir(&a.out);
    let semantic = load_semantic(&ws)?;
    let data_dir = resolve(&ws, &cfg.data_dir);
    let images = flatten_pairs(&load_pairs(&data_dir)?);
    let ranking = calibrate_ranking(&images, &semantic, &semantic, cfg.pipeline.epsilon)?;
    write_ranking_file(&a.out, &ranking.perm, ranking.epsilon)?;

    let mut manifest = Manifest::begin("calibrate", argv);
    manifest.config(cfg.to_text());
    manifest.seed("run.seed", cfg.seed);
    manifest.inputs(semantic_files(&ws));
    manifest.inputs([data_dir.join(INDEX_FILE)]);
    manifest.output(a.out.clone());
    let top: Vec<String> = ranking.perm.as_slice().iter().take(8).map(|i| i.to_string()).collect();
    println!(
        "ranking over {} images (d={}, epsilon={}) written to {}; most sensitive: {}",
        images.len(),
        ranking.perm.len(),
        ranking.epsilon,
        a.out.display(),
        top.join(" ")
    );
    finish(manifest, ws.join("manifest-calibrate.json"), ctx)
}

fn sweep(a: &SweepArgs, argv: &[String], ctx: &Context) -> Result<()> {
    let mut cfg = load_config(&a.config, ctx)?;
    if !ctx.replay {
        for (key, value) in [
            ("sweep.snr", a.snr.clone()),
            ("sweep.ratio", a.ratio.clone()),
            ("sweep.sorting", a.sorting.clone()),
            ("sweep.normalization", a.normalization.clone()),
            ("sweep.seeds", a.seeds.map(|s| s.to_string())),
        ] {
            if let Some(v) = value {
                cfg.set(key, &v)?;
            }
        }
        if cfg.sweep.seeds == 0 {
            return Err(Error::Usage("--seeds must be >= 1".into()));
        }
        cfg.validate()?;
    }
    let grid = SweepGrid {
        snr_db: parse_grid(&cfg.sweep.snr, true)?,
        ratios: parse_grid(&cfg.sweep.ratio, false)?,
        seeds: cfg.sweep.seeds,
        sortings: parse_sortings(&cfg.sweep.sorting)?,
        normalizations: parse_normalizations(&cfg.sweep.normalization)?,
        base_seed: derive_seed(cfg.seed, &[label("sweep")]),
    };
    if let Some(r) = grid.ratios.iter().find(|r| !(**r > 0.0 && **r <= 1.0)) {
        return Err(Error::Usage(format!("ratio {r} outside (0, 1]")));
    }

    let ws = a.models.clone().unwrap_or_else(|| a.out.clone());
    let semantic = load_semantic(&ws)?;
    let (channel, channel_files) = load_channel(&ws)?;
    let mut inputs = semantic_files(&ws);
    inputs.extend(channel_files);
    let calibrated = if cfg.pipeline.ranking_mode == RankingMode::Calibrated {
        let path = resolve(&ws, &cfg.ranking_file);
        let (perm, _) = read_ranking_file(&path)?;
        if perm.len() != semantic.config.dim {
            return Err(Error::Data(format!(
                "{} ranks {} features, the semantic codec has {}",
                path.display(),
                perm.len(),
                semantic.config.dim
            )));
        }
        inputs.push(path);
        Some(perm)
    } else {
        None
    };
    let q = cfg.pipeline.basis.q();
    let mut budget = Vec::new();
    for &r in &grid.ratios {
        let k = CropSpec::new(r, semantic.config.dim)?.kept;
        budget.push(format!("r={r}: K={k}, {} channel uses", q * k));
    }
    let eval_dir = resolve(&ws, &cfg.eval_dir);
    let pairs = load_pairs(&eval_dir)?;
    inputs.push(eval_dir.join(INDEX_FILE));
    let models = Models { semantic, channel: ChannelCodec::Learned(channel), calibrated };

    let records = evaluate_sweep(&cfg.pipeline, &models, &pairs, &grid)?;
    ensure_dir(&a.out)?;
    let out = a.out.join("sweep.csv");
    write_text(&out, &records_to_csv(&records))?;

    let mut manifest = Manifest::begin("sweep", argv);
    manifest.config(cfg.to_text());
    manifest.seed("run.seed", cfg.seed);
    manifest.seed("sweep", grid.base_seed);
    manifest.inputs(inputs);
    manifest.output(out.clone());
    println!(
        "{} rows ({} SNRs x {} ratios x {} seeds x {} sortings x {} normalizations x 2 users, {} pairs each) written to {}",
        records.len(),
        grid.snr_db.len(),
        grid.ratios.len(),
        grid.seeds,
        grid.sortings.len(),
        grid.normalizations.len(),
        pairs.len(),
        out.display()
    );
    println!(
        "frame size q*K for two K-dim streams ({}x the 2K of separate transmission): {}",
        q as f64 / 2.0,
        budget.join("; ")
    );
    finish(manifest, a.out.join("manifest-sweep.json"), ctx)
}

fn plot(a: &PlotArgs, argv: &[String], ctx: &Context) -> Result<()> {
    let text = std::fs::read_to_string(&a.input).map_err(|e| Error::io(&a.input, e))?;
    let series = series_from_csv(&text, &a.x, &a.y, &a.group)?;
    let svg = render_svg(&series, &a.x, &a.y, &a.group);
    write_text(&a.out, &svg)?;
    let mut manifest = Manifest::begin("plot", argv);
    manifest.inputs([a.input.clone()]);
    manifest.output(a.out.clone());
    println!("{} series plotted to {}", series.len(), a.out.display());
    finish(manifest, parent_dir(&a.out).join("manifest-plot.json"), ctx)
}

fn parse_params(text: &str) -> Result<SrParams> {
    let v: Vec<f64> = text
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Usage(format!("--params must be b0,m,omega, got {text:?}")))?;
    match v.as_slice() {
        [b0, m, omega] => SrParams::new(*b0, *m, *omega),
        _ => Err(Error::Usage(format!("--params must be b0,m,omega, got {text:?}"))),
    }
}

fn sample_channel(a: &SampleChannelArgs, argv: &[String], ctx: &Context) -> Result<()> {
    if a.n == 0 {
        return Err(Error::Usage("--n must be >= 1".into()));
    }
    let params = parse_params(&a.params)?;
    let gains = sr_sample(a.n, &params, a.seed)?;
    let cdf = SrCdf::new(params)?;
    let ks = ks_statistic(&gains, |r| cdf.eval(r))?;
    let mean = gains.iter().sum::<f64>() / gains.len() as f64;
    let mut csv = String::with_capacity(24 * (a.n + 2));
    csv.push_str("index,gain\n");
    for (i, g) in gains.iter().enumerate() {
        writeln!(csv, "{i},{g:.10}").unwrap();
    }
    writeln!(
        csv,
        "# mean={mean:.6} expected_mean={:.6} ks={ks:.6} ks_critical_0.01={:.6}",
        params.mean_power(),
        ks_critical_001(a.n)
    )
    .unwrap();
    write_text(&a.out, &csv)?;
    let mut manifest = Manifest::begin("sample-channel", argv);
    manifest.seed("seed", a.seed);
    manifest.output(a.out.clone());
    println!(
        "{} gains: mean {mean:.6} (expected {:.6}), KS {ks:.6} (critical {:.6} at 0.01)",
        a.n,
        params.mean_power(),
        ks_critical_001(a.n)
    );
    finish(manifest, parent_dir(&a.out).join("manifest-sample-channel.json"), ctx)
}

fn replay(a: &ReplayArgs) -> Result<()> {
    use clap::Parser;
    let rec = read_manifest(&a.manifest)?;
    std::env::set_current_dir(&rec.cwd).map_err(|e| Error::io(&rec.cwd, e))?;
    let cli = Cli::try_parse_from(&rec.argv)
        .map_err(|e| Error::Data(format!("recorded argv no longer parses: {}", e.to_string().lines().next().unwrap_or(""))))?;
    if matches!(cli.command, Command::Replay(_)) {
        return Err(Error::Data("a manifest cannot record a replay".into()));
    }
    let ctx = Context { snapshot: rec.config.clone(), replay: true };
    run(&cli, &rec.argv, &ctx)?;
    let mut differing = Vec::new();
    for (path, hash) in &rec.outputs {
        if sha256_file(path)? != *hash {
            differing.push(path.display().to_string());
        }
    }
    if !differing.is_empty() {
        return Err(Error::Data(format!("replay outputs differ: {}", differing.join(", "))));
    }
    println!("replay verified: {} outputs identical", rec.outputs.len());
    Ok(())
}
