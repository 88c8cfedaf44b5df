//! Implementations of the `pattern`, `conceal`, and `bench` subcommands,
//! plus the trace/report/curve writers they share.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use freqfill::conceal::{
    conceal_image, conceal_sequential, saturation_iterations, ConcealmentReport, GrayImage,
    LossPattern,
};
use freqfill::grid::{ExtrapolationConfig, Method};
use freqfill::synth;

use crate::io;
use crate::manifest::{MaskSource, OutputPaths, RunManifest};
use crate::{usage_error, BenchArgs, ConcealArgs, PatternArgs};

/// Saturation is reached within this many dB of the final-iteration PSNR.
const SATURATION_DELTA: f64 = 0.25;

/// The (τ, N_BF) family used by `bench --sweep`.
const SWEEP: [(f64, usize); 5] = [(0.75, 5), (0.9, 3), (0.9, 5), (0.9, 7), (0.95, 5)];

/// Floats in CSV output carry 9 significant digits.
fn fmt_float(v: f64) -> String {
    format!("{v:.8e}")
}

// ===== pattern =====

pub fn cmd_pattern(args: &PatternArgs) -> Result<()> {
    if args.width == 0 || args.height == 0 {
        return Err(usage_error("image dimensions must be positive"));
    }
    let pattern = LossPattern::new(args.block_size, args.spacing, args.offset)?;
    if !args.allow_contiguous && !pattern.is_isolated() {
        return Err(usage_error(format!(
            "blocks are not isolated: spacing {} leaves a {}-sample gap but the support \
             frame needs {} (pass --allow-contiguous to override)",
            args.spacing,
            args.spacing.saturating_sub(args.block_size),
            pattern.frame
        )));
    }
    let blocks = pattern.blocks(args.width, args.height).len();
    let mask = pattern.mask(args.width, args.height);
    io::write_mask(&args.out, args.width, args.height, &mask)?;
    println!(
        "wrote {} ({}x{}, {} loss block{})",
        args.out.display(),
        args.width,
        args.height,
        blocks,
        if blocks == 1 { "" } else { "s" }
    );
    Ok(())
}

// ===== conceal =====

pub fn cmd_conceal(args: &ConcealArgs) -> Result<()> {
    let manifest = effective_manifest(args)?;
    if let Some(path) = &args.emit_manifest {
        manifest.save(path)?;
    }
    let method = manifest.parsed_method()?;
    let config: ExtrapolationConfig = manifest.config.clone().into();
    if config.iterations == 0 {
        return Err(usage_error("iterations must be at least 1"));
    }
    let input = io::read_image(&manifest.input, manifest.seed)?;
    let reference = manifest
        .reference
        .as_deref()
        .map(|p| io::read_image(p, manifest.seed))
        .transpose()?;
    if let Some(r) = &reference {
        if (r.width(), r.height()) != (input.width(), input.height()) {
            bail!(
                "reference is {}x{} but input is {}x{}",
                r.width(),
                r.height(),
                input.width(),
                input.height()
            );
        }
    }

    let started = Instant::now();
    let (concealed, report) = match &manifest.mask {
        MaskSource::Pattern {
            block_size,
            spacing,
            offset,
        } => {
            let pattern = LossPattern::new(*block_size, *spacing, *offset)?;
            conceal_image(
                &input,
                &pattern,
                method,
                &config,
                reference.as_ref(),
                manifest.allow_contiguous,
            )?
        }
        MaskSource::Image { path, tile } => {
            let (mw, mh, mask) = io::read_mask(path)?;
            if (mw, mh) != (input.width(), input.height()) {
                bail!(
                    "mask is {mw}x{mh} but input is {}x{}",
                    input.width(),
                    input.height()
                );
            }
            conceal_sequential(
                &input,
                &mask,
                *tile,
                method,
                &config,
                manifest.concealed_weight,
                reference.as_ref(),
            )?
        }
    };
    let wall = started.elapsed();

    io::write_image(Path::new(&manifest.output.image), &concealed)?;
    let trace_path = manifest.trace_path();
    fs::write(&trace_path, render_trace(&report))
        .with_context(|| format!("writing {}", trace_path.display()))?;
    let report_path = manifest.report_path();
    fs::write(&report_path, render_report(&manifest, &report, wall.as_secs_f64()))
        .with_context(|| format!("writing {}", report_path.display()))?;

    let lost: usize = report.blocks.iter().map(|b| b.lost_count).sum();
    print!(
        "concealed {} block{} ({lost} samples) with {} in {:.2}s",
        report.blocks.len(),
        if report.blocks.len() == 1 { "" } else { "s" },
        method.name(),
        wall.as_secs_f64()
    );
    match report.aggregate_psnr_db {
        Some(psnr) => println!(", PSNR {psnr:.2} dB -> {}", manifest.output.image),
        None => println!(" -> {}", manifest.output.image),
    }
    Ok(())
}

/// Merges `--manifest` (if given) with direct flags; flags win.
fn effective_manifest(args: &ConcealArgs) -> Result<RunManifest> {
    let mut m = match &args.manifest {
        Some(path) => RunManifest::load(path)?,
        None => RunManifest {
            input: String::new(),
            reference: None,
            mask: MaskSource::Pattern {
                block_size: 16,
                spacing: 64,
                offset: (24, 24),
            },
            method: "fse".into(),
            config: ExtrapolationConfig::default().into(),
            concealed_weight: 1.0,
            seed: None,
            allow_contiguous: false,
            output: OutputPaths {
                image: String::new(),
                trace: None,
                report: None,
            },
        },
    };
    if let Some(v) = &args.input {
        m.input = v.clone();
    }
    if m.input.is_empty() {
        return Err(usage_error("an input image is required (--input or --manifest)"));
    }
    if let Some(v) = &args.reference {
        m.reference = Some(v.clone());
    }
    if let Some(path) = &args.mask {
        let tile = args.tile.unwrap_or(16);
        m.mask = MaskSource::Image {
            path: path.clone(),
            tile,
        };
    } else if args.block_size.is_some() || args.spacing.is_some() || args.offset.is_some() {
        let (mut bs, mut sp, mut off) = match m.mask {
            MaskSource::Pattern {
                block_size,
                spacing,
                offset,
            } => (block_size, spacing, offset),
            MaskSource::Image { .. } => (16, 64, (24, 24)),
        };
        if let Some(v) = args.block_size {
            bs = v;
        }
        if let Some(v) = args.spacing {
            sp = v;
        }
        if let Some(v) = args.offset {
            off = v;
        }
        m.mask = MaskSource::Pattern {
            block_size: bs,
            spacing: sp,
            offset: off,
        };
    } else if let (MaskSource::Image { tile, .. }, Some(v)) = (&mut m.mask, args.tile) {
        *tile = v;
    }
    if let Some(v) = &args.method {
        m.method = v.clone();
    }
    if let Some(v) = args.iterations {
        m.config.iterations = v;
    }
    if let Some(v) = args.gamma {
        m.config.gamma = v;
    }
    if let Some(v) = args.rho_hat {
        m.config.rho_hat = v;
    }
    if let Some(v) = args.tau {
        m.config.tau = v;
    }
    if let Some(v) = args.n_bf {
        m.config.n_bf = v;
    }
    if let Some(v) = args.concealed_weight {
        m.concealed_weight = v;
    }
    if let Some(v) = args.seed {
        m.seed = Some(v);
    }
    if args.allow_contiguous {
        m.allow_contiguous = true;
    }
    if let Some(v) = &args.out_image {
        m.output.image = v.clone();
    }
    if m.output.image.is_empty() {
        return Err(usage_error(
            "an output image path is required (--out-image or --manifest)",
        ));
    }
    if let Some(v) = &args.out_trace {
        m.output.trace = Some(v.clone());
    }
    if let Some(v) = &args.out_report {
        m.output.report = Some(v.clone());
    }
    Ok(m)
}

// ===== trace / report rendering =====

pub fn render_trace(report: &ConcealmentReport) -> String {
    let mut out = String::from("# freqfill-trace v1\n");
    out.push_str("block_id,iteration,selected_count,residual_energy,psnr_db\n");
    for block in &report.blocks {
        for rec in block.trace.records() {
            let psnr = rec.psnr_db.map(fmt_float).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                block.block_id,
                rec.iteration,
                rec.selected.len(),
                fmt_float(rec.residual_energy),
                psnr
            );
        }
    }
    out
}

fn render_report(manifest: &RunManifest, report: &ConcealmentReport, wall_s: f64) -> String {
    let mut out = String::from("freqfill concealment report\n");
    let _ = writeln!(out, "input: {}", manifest.input);
    let _ = writeln!(out, "method: {}", manifest.method);
    match &manifest.mask {
        MaskSource::Pattern {
            block_size,
            spacing,
            offset,
        } => {
            let _ = writeln!(
                out,
                "mask: pattern block_size={block_size} spacing={spacing} offset={},{}",
                offset.0, offset.1
            );
        }
        MaskSource::Image { path, tile } => {
            let _ = writeln!(
                out,
                "mask: image {path} tile={tile} concealed_weight={}",
                manifest.concealed_weight
            );
        }
    }
    let c = &manifest.config;
    let _ = writeln!(
        out,
        "config: iterations={} gamma={} rho_hat={} tau={} n_bf={}",
        c.iterations, c.gamma, c.rho_hat, c.tau, c.n_bf
    );
    let lost: usize = report.blocks.iter().map(|b| b.lost_count).sum();
    let _ = writeln!(out, "blocks: {}", report.blocks.len());
    let _ = writeln!(out, "lost_pixels: {lost}");
    let _ = writeln!(out, "wall_time_s: {wall_s:.3}");
    match report.aggregate_psnr_db {
        Some(v) => {
            let _ = writeln!(out, "aggregate_psnr_db: {}", fmt_float(v));
        }
        None => {
            let _ = writeln!(out, "aggregate_psnr_db: n/a (no reference)");
        }
    }
    // per-block quality and saturation, available only with a reference
    if report.blocks.iter().all(|b| {
        !b.trace.is_empty() && b.trace.records().iter().all(|r| r.psnr_db.is_some())
    }) && !report.blocks.is_empty()
    {
        out.push('\n');
        let _ = writeln!(
            out,
            "block_id,origin_row,origin_col,lost_pixels,psnr_db,saturation_iterations"
        );
        for block in &report.blocks {
            let curve: Vec<f64> = block
                .trace
                .records()
                .iter()
                .map(|r| r.psnr_db.expect("checked above"))
                .collect();
            let sat = saturation_iterations(&curve, SATURATION_DELTA).expect("non-empty curve");
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                block.block_id,
                block.origin.0,
                block.origin.1,
                block.lost_count,
                block.psnr_db.map(fmt_float).unwrap_or_default(),
                sat
            );
        }
    }
    out
}

// ===== bench =====

struct BenchRow {
    image: String,
    method: Method,
    tau: Option<f64>,
    n_bf: Option<usize>,
    saturation: u32,
    saturation_psnr: f64,
    final_psnr: f64,
    ratio: Option<f64>,
}

pub fn cmd_bench(args: &BenchArgs) -> Result<()> {
    if args.iterations == 0 {
        return Err(usage_error("iterations must be at least 1"));
    }
    fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;
    let corpus = load_corpus(args)?;
    if corpus.is_empty() {
        bail!("empty corpus: no .pgm or .png images found");
    }
    let pattern = LossPattern::new(
        args.block_size,
        args.spacing,
        args.offset,
    )?;
    if !pattern.is_isolated() {
        return Err(usage_error(
            "bench requires an isolated loss pattern (increase --spacing)",
        ));
    }
    let base = ExtrapolationConfig {
        iterations: args.iterations,
        gamma: args.gamma.unwrap_or_else(|| ExtrapolationConfig::default().gamma),
        rho_hat: args
            .rho_hat
            .unwrap_or_else(|| ExtrapolationConfig::default().rho_hat),
        ..ExtrapolationConfig::default()
    };
    let combos: Vec<(f64, usize)> = if args.sweep {
        SWEEP.to_vec()
    } else {
        vec![(
            args.tau.unwrap_or(base.tau),
            args.n_bf.unwrap_or(base.n_bf),
        )]
    };

    let mut rows = Vec::new();
    for (name, image) in &corpus {
        let (fse_sat, fse_sat_psnr, fse_final) =
            bench_one(args, name, image, &pattern, Method::Fse, &base)?;
        rows.push(BenchRow {
            image: name.clone(),
            method: Method::Fse,
            tau: None,
            n_bf: None,
            saturation: fse_sat,
            saturation_psnr: fse_sat_psnr,
            final_psnr: fse_final,
            ratio: None,
        });
        for &(tau, n_bf) in &combos {
            let config = ExtrapolationConfig { tau, n_bf, ..base };
            let (sat, sat_psnr, final_psnr) =
                bench_one(args, name, image, &pattern, Method::Muse, &config)?;
            rows.push(BenchRow {
                image: name.clone(),
                method: Method::Muse,
                tau: Some(tau),
                n_bf: Some(n_bf),
                saturation: sat,
                saturation_psnr: sat_psnr,
                final_psnr,
                ratio: Some(fse_sat as f64 / sat as f64),
            });
        }
    }

    let table_path = args.out_dir.join("bench.csv");
    fs::write(&table_path, render_bench_table(&rows))
        .with_context(|| format!("writing {}", table_path.display()))?;

    println!(
        "{:<10} {:<6} {:>5} {:>5} {:>4} {:>9} {:>10} {:>6}",
        "image", "method", "tau", "n_bf", "sat", "sat_psnr", "final_psnr", "ratio"
    );
    for row in &rows {
        println!(
            "{:<10} {:<6} {:>5} {:>5} {:>4} {:>9.3} {:>10.3} {:>6}",
            row.image,
            row.method.name(),
            row.tau.map(|v| v.to_string()).unwrap_or_default(),
            row.n_bf.map(|v| v.to_string()).unwrap_or_default(),
            row.saturation,
            row.saturation_psnr,
            row.final_psnr,
            row.ratio.map(|v| format!("{v:.2}")).unwrap_or_default(),
        );
    }
    println!("wrote {}", table_path.display());
    Ok(())
}

/// Runs one (image, method, config) benchmark: conceals with the image as
/// its own reference, writes the per-iteration curve file, and returns
/// (saturation iterations, saturation PSNR, final PSNR).
fn bench_one(
    args: &BenchArgs,
    name: &str,
    image: &GrayImage,
    pattern: &LossPattern,
    method: Method,
    config: &ExtrapolationConfig,
) -> Result<(u32, f64, f64)> {
    let (_, report) = conceal_image(image, pattern, method, config, Some(image), false)
        .with_context(|| format!("benchmarking {name} with {}", method.name()))?;
    let curve = report
        .pooled_iteration_curve()
        .ok_or_else(|| anyhow::anyhow!("no per-iteration data for {name}"))?;
    let saturation = saturation_iterations(&curve, SATURATION_DELTA)?;
    let file = match method {
        Method::Fse => format!("{name}-fse.csv"),
        Method::Muse => format!("{name}-muse-tau{}-nbf{}.csv", config.tau, config.n_bf),
    };
    let path = args.out_dir.join(file);
    write_curve(&path, &curve)?;
    Ok((
        saturation,
        curve[saturation as usize - 1],
        *curve.last().expect("non-empty curve"),
    ))
}

fn write_curve(path: &Path, curve: &[f64]) -> Result<()> {
    let mut out = String::from("# freqfill-curve v1\niteration,psnr_db\n");
    for (i, v) in curve.iter().enumerate() {
        let _ = writeln!(out, "{},{}", i + 1, fmt_float(*v));
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

fn render_bench_table(rows: &[BenchRow]) -> String {
    let mut out = String::from("# freqfill-bench v1\n");
    out.push_str(
        "image,method,tau,n_bf,saturation_iterations,saturation_psnr_db,final_psnr_db,\
         ratio_fse_over_muse\n",
    );
    for row in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            row.image,
            row.method.name(),
            row.tau.map(fmt_float).unwrap_or_default(),
            row.n_bf.map(|v| v.to_string()).unwrap_or_default(),
            row.saturation,
            fmt_float(row.saturation_psnr),
            fmt_float(row.final_psnr),
            row.ratio.map(fmt_float).unwrap_or_default(),
        );
    }
    out
}

/// Loads the corpus images: either every `.pgm`/`.png` in `--corpus`
/// (sorted by name), or the built-in synthetic corpus, which is also
/// written to the output directory for inspection.
fn load_corpus(args: &BenchArgs) -> Result<Vec<(String, GrayImage)>> {
    if args.synthetic {
        let seed = args.seed.unwrap_or(synth::BASE_SEED);
        let mut out = Vec::new();
        for recipe in synth::Recipe::ALL {
            let image = synth::generate_seeded(recipe, 512, 512, seed);
            let path = args.out_dir.join(format!("{}.pgm", recipe.name()));
            io::write_image(&path, &image)?;
            out.push((recipe.name().to_string(), image));
        }
        return Ok(out);
    }
    let dir = args
        .corpus
        .as_ref()
        .ok_or_else(|| usage_error("either --corpus or --synthetic is required"))?;
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            matches!(
                p.extension().and_then(|e| e.to_str()),
                Some("pgm") | Some("png")
            )
        })
        .collect();
    paths.sort();
    let mut out = Vec::new();
    for path in paths {
        let name = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("image")
            .to_string();
        let image = io::read_image(path.to_str().expect("listed path is valid UTF-8"), None)?;
        out.push((name, image));
    }
    Ok(out)
}
