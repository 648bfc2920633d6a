//! Subcommand bodies. Every output file gets a `<file>.json` sidecar with the
//! resolved parameters and tool version; nothing time-dependent goes into
//! either unless asked for.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use mclc::adaptive::AdaptiveConfig;
use mclc::annealer::{AnnealConfig, Schedule};
use mclc::baselines::{ecsq_curve, step_ladder, BlahutArimotoOptions, RDCurve};
use mclc::bench::{
    compare, comparison_table, default_depth, oracle_reference, reference_curves, render_svg, run_sweep,
    ReferenceOptions, SweepPlan,
};
use mclc::codec::{assess, decode_symbols, encode, EncodedStream, EncoderConfig};
use mclc::grid::SymbolAlphabet;
use mclc::sources::{generate, ingest, write_samples, SourceSpec};

use crate::{
    AlgoArg, CliError, Cmd, DecodeArgs, EncodeArgs, GenerateArgs, RdArgs, ReportArgs, SweepArgs,
};

type Result<T> = std::result::Result<T, CliError>;

pub fn run(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Generate(a) => generate_cmd(a),
        Cmd::Encode(a) => encode_cmd(a),
        Cmd::Decode(a) => decode_cmd(a),
        Cmd::Sweep(a) => sweep_cmd(a),
        Cmd::Rd(a) => rd_cmd(a),
        Cmd::Report(a) => report_cmd(a),
    }
}

fn log_params(command: &str, params: &Value) {
    eprintln!("mclc {command}: {params}");
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(".json");
    PathBuf::from(s)
}

fn write_sidecar(path: &Path, command: &str, params: &Value, results: Value) -> Result<()> {
    let doc = json!({
        "tool": "mclc",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "params": params,
        "results": results,
    });
    let mut text = serde_json::to_string_pretty(&doc).expect("JSON values serialize");
    text.push('\n');
    fs::write(sidecar_path(path), text)?;
    Ok(())
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("plain data serializes")
}

fn path_value(p: &Path) -> Value {
    Value::String(p.display().to_string())
}

fn generate_cmd(a: GenerateArgs) -> Result<()> {
    let spec = SourceSpec::new(a.source.kind(), a.n, a.seed);
    let format: mclc::sources::SampleFormat = a.format.into();
    let params = json!({
        "source": to_value(&spec),
        "format": to_value(&format),
        "out": path_value(&a.out),
    });
    log_params("generate", &params);
    let x = generate(&spec)?;
    write_samples(&a.out, x.samples(), format)?;
    let results = json!({
        "samples": x.len(),
        "empirical_mean": x.empirical_mean(),
        "empirical_variance": x.empirical_variance(),
    });
    write_sidecar(&a.out, "generate", &params, results)
}

fn encode_cmd(a: EncodeArgs) -> Result<()> {
    let format: mclc::sources::SampleFormat = a.format.into();
    let x = ingest(&a.input, format)?;
    let alphabet = match a.algo {
        AlgoArg::Adaptive => a.alphabet,
        AlgoArg::Fixed => SymbolAlphabet::for_length(x.len())?.size(),
    };
    let k = a.k.unwrap_or_else(|| default_depth(x.len(), alphabet));
    let mut anneal = AnnealConfig::new(a.beta, a.c, a.r, k, a.seed);
    if a.schedule_offset != 0.0 {
        anneal.schedule = Schedule::Shifted(a.schedule_offset);
    }
    let config = match a.algo {
        AlgoArg::Fixed => EncoderConfig::Fixed(anneal),
        AlgoArg::Adaptive => {
            let mut c = AdaptiveConfig::new(anneal, a.alphabet);
            c.mu = a.mu;
            c.include_alphabet_penalty = a.alphabet_penalty;
            EncoderConfig::Adaptive(c)
        }
    };
    let params = json!({
        "in": path_value(&a.input),
        "format": to_value(&format),
        "out": path_value(&a.out),
        "encoder": to_value(&config),
    });
    log_params("encode", &params);
    let encoding = encode(&x, &config)?;
    fs::write(&a.out, encoding.stream.to_bytes())?;
    let results = json!({
        "header": to_value(&encoding.stream.header),
        "report": to_value(&encoding.report),
        "energy": encoding.energy,
    });
    println!("{}", serde_json::to_string_pretty(&results).expect("JSON values serialize"));
    write_sidecar(&a.out, "encode", &params, results)
}

fn read_stream(path: &Path) -> Result<EncodedStream> {
    let bytes = fs::read(path)?;
    Ok(EncodedStream::from_bytes(&bytes)?)
}

fn decode_cmd(a: DecodeArgs) -> Result<()> {
    let format: mclc::sources::SampleFormat = a.format.into();
    let params = json!({
        "in": path_value(&a.input),
        "out": path_value(&a.out),
        "format": to_value(&format),
    });
    log_params("decode", &params);
    let stream = read_stream(&a.input)?;
    let decoded = decode_symbols(&stream)?;
    write_samples(&a.out, &decoded.reconstruction, format)?;
    let results = json!({
        "header": to_value(&stream.header),
        "samples": decoded.reconstruction.len(),
    });
    write_sidecar(&a.out, "decode", &params, results)
}

fn resolve_plan(a: &SweepArgs) -> Result<SweepPlan> {
    let mut plan = SweepPlan::preset(&a.preset).map_err(|e| CliError::Usage(e.to_string()))?;
    if let Some(n) = a.n {
        plan.n = n;
    }
    if let Some(r) = a.r {
        plan.r = r;
    }
    if a.k.is_some() {
        plan.k = a.k;
    }
    if let Some(s) = &a.seeds {
        plan.seeds = s.clone();
    }
    if let Some(b) = &a.betas {
        plan.betas = b.clone();
    }
    if let Some(m) = &a.alphabets {
        plan.alphabets = m.clone();
    }
    if let Some(c) = &a.c_ladder {
        plan.c_ladder = c.clone();
    }
    if let Some(o) = a.schedule_offset {
        plan.schedule_offset = o;
    }
    if let Some(mu) = a.mu {
        plan.mu = mu;
    }
    if a.alphabet_penalty {
        plan.include_alphabet_penalty = true;
    }
    plan.validate()?;
    Ok(plan)
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn sweep_cmd(a: SweepArgs) -> Result<()> {
    let plan = resolve_plan(&a)?;
    let jobs = a.jobs.unwrap_or_else(default_jobs);
    let params = json!({
        "plan": to_value(&plan),
        "out_dir": path_value(&a.out_dir),
        "timing": a.timing,
        "references": !a.no_references,
    });
    log_params("sweep", &params);
    eprintln!("mclc sweep: {jobs} worker thread(s)");
    fs::create_dir_all(&a.out_dir)?;

    let result = run_sweep(&plan, jobs)?;
    let mut curves: Vec<RDCurve> = plan
        .alphabets
        .iter()
        .map(|&m| result.curve(m))
        .filter(|c| !c.points.is_empty())
        .collect();
    let references = if a.no_references {
        Vec::new()
    } else {
        reference_curves(&plan, &ReferenceOptions::default())?
    };

    let mut table = String::new();
    for curve in &curves {
        table.push_str(&comparison_table(&compare(curve, &references)));
        table.push('\n');
    }
    let csv_path = a.out_dir.join(format!("{}.csv", plan.name));
    let svg_path = a.out_dir.join(format!("{}.svg", plan.name));
    let table_path = a.out_dir.join(format!("{}.txt", plan.name));
    let mut csv = Vec::new();
    result.write_csv(&mut csv, a.timing)?;
    fs::write(&csv_path, csv)?;
    curves.extend(references.iter().cloned());
    let title = format!("{} ({}, n = {})", plan.name, plan.source.name(), plan.n);
    fs::write(&svg_path, render_svg(&title, &curves))?;
    fs::write(&table_path, &table)?;
    print!("{table}");

    let results = json!({
        "csv": path_value(&csv_path),
        "svg": path_value(&svg_path),
        "table": path_value(&table_path),
        "aggregates": to_value(&result.aggregates()),
        "references": references.iter().map(|c| json!({"label": c.label, "provenance": c.provenance})).collect::<Vec<_>>(),
        "failures": result.failures,
    });
    write_sidecar(&csv_path, "sweep", &params, results)?;
    for f in &result.failures {
        eprintln!("warning: {f}");
    }
    if result.failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Runtime(mclc::Error::Format(format!(
            "{} sweep point(s) failed; partial results written",
            result.failures.len()
        ))))
    }
}

fn curve_csv(curves: &[RDCurve]) -> String {
    let mut out = String::from("curve,rate_bps,mse,snr_db\n");
    for c in curves {
        for p in &c.points {
            let _ = writeln!(out, "{},{:?},{:?},{:?}", c.label, p.rate, p.distortion, p.snr_db);
        }
    }
    out
}

fn rd_cmd(a: RdArgs) -> Result<()> {
    let source = a.source.kind();
    let betas = a.betas.clone().unwrap_or_else(|| SweepPlan::fig1().betas);
    let defaults = ReferenceOptions::default();
    let options = ReferenceOptions {
        laplace_grid: a.grid,
        blahut_arimoto: BlahutArimotoOptions {
            tol: a.tol,
            ..defaults.blahut_arimoto
        },
        ..defaults
    };
    let format: mclc::sources::SampleFormat = a.format.into();
    let params = json!({
        "source": to_value(&source),
        "betas": betas,
        "grid": a.grid,
        "tol": a.tol,
        "in": a.input.as_deref().map(path_value),
        "format": to_value(&format),
        "out": a.out.as_deref().map(path_value),
    });
    log_params("rd", &params);
    SourceSpec::new(source, 1, 0).validate()?;
    let mut curves = vec![oracle_reference(source, &betas, &options)?];
    if let Some(input) = &a.input {
        let x = ingest(input, format)?;
        curves.push(ecsq_curve(&x, &step_ladder(0.02, 40.0, 400))?);
    }
    let text = curve_csv(&curves);
    match &a.out {
        Some(out) => {
            fs::write(out, &text)?;
            let results = json!({
                "curves": curves.iter().map(|c| json!({"label": c.label, "provenance": c.provenance, "points": c.points.len()})).collect::<Vec<_>>(),
            });
            write_sidecar(out, "rd", &params, results)
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn report_cmd(a: ReportArgs) -> Result<()> {
    let format: mclc::sources::SampleFormat = a.format.into();
    let params = json!({
        "in": path_value(&a.input),
        "original": a.original.as_deref().map(path_value),
        "format": to_value(&format),
    });
    log_params("report", &params);
    let stream = read_stream(&a.input)?;
    let n = stream.header.n as f64;
    let mut report = json!({
        "header": to_value(&stream.header),
        "payload_bytes": stream.payload.bytes().len(),
        "net_bits": stream.net_bits(),
        "gross_bits": stream.gross_bits(),
        "net_rate_bps": stream.net_bits() as f64 / n,
        "gross_rate_bps": stream.gross_bits() as f64 / n,
    });
    if let Some(original) = &a.original {
        let x = ingest(original, format)?;
        report["assessment"] = to_value(&assess(&x, &stream)?);
    }
    println!("{}", serde_json::to_string_pretty(&report).expect("JSON values serialize"));
    Ok(())
}
