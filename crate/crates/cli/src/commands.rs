use std::io::{BufRead, BufReader, Write};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use lfsgg_core::codec::{self, DecodeReport, TokenSequence, TokenSpace};
use lfsgg_core::io::{self as cio, GraphRecord, MappingRecord, VocabularyFile};
use lfsgg_core::matcher::{exhaustive_match_with, EXHAUSTIVE_LIMIT};
use lfsgg_core::metrics::{evaluate_dataset, EvalOptions, EvalReport};
use lfsgg_core::retrieval::{benchmark, Gallery, RetrievalQuery, RetrievalSummary};
use lfsgg_core::synth::{generate, image_seed, SynthConfig};
use lfsgg_core::{hts_match, Error, MatchConfig, SceneGraph};
use serde::{Deserialize, Serialize};

use crate::{open_out, read_records, resolve, thread_pool, vocabulary, write_pretty};
use crate::{CodecCommand, EvaluateArgs, MatchArgs, RetrieveArgs, SweepArgs, SynthArgs};

fn load_pair(gt: &std::path::Path, pred: &std::path::Path, vocab: Option<&str>) -> Result<(Vec<SceneGraph>, Vec<SceneGraph>)> {
    let gt_records = read_records(gt)?;
    let pred_records = read_records(pred)?;
    let vocab = vocabulary(vocab, &[&gt_records, &pred_records])?;
    Ok((resolve(gt, &gt_records, &vocab)?, resolve(pred, &pred_records, &vocab)?))
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<EvalReport> {
    let (gt, pred) = load_pair(&args.gt, &args.pred, args.vocab.as_deref())?;
    let opts = EvalOptions {
        ks: args.k.clone(),
        cfg: args.matching.config(),
        with_precision: args.with_precision,
        record_timings: args.timings,
    };
    let report = thread_pool(args.jobs)?.install(|| evaluate_dataset(&gt, &pred, &opts))?;
    write_pretty(args.out.as_deref(), &report)?;
    Ok(report)
}

pub fn cmd_match(args: &MatchArgs, out: &mut dyn Write) -> Result<()> {
    let gt_records = read_records(&args.gt)?;
    let pred_records = read_records(&args.pred)?;
    let vocab = vocabulary(args.vocab.as_deref(), &[&gt_records, &pred_records])?;
    let pick = |records: &[(usize, GraphRecord)], path: &std::path::Path| -> Result<SceneGraph> {
        let Some((line, r)) = records.iter().find(|(_, r)| r.image_id == args.image_id) else {
            return Err(Error::UnknownImageId(args.image_id.clone())).with_context(|| path.display().to_string());
        };
        r.resolve(&vocab)
            .map_err(|e| Error::AtLine {
                line: *line,
                source: Box::new(e),
            })
            .with_context(|| path.display().to_string())
    };
    let gt = pick(&gt_records, &args.gt)?;
    let pred = pick(&pred_records, &args.pred)?;

    let cfg = args.matching.config();
    let m = if args.exhaustive {
        exhaustive_match_with(&gt, &pred, cfg.dedup_gt, EXHAUSTIVE_LIMIT)?
    } else {
        hts_match(&gt, &pred, &cfg)?
    };

    if args.json {
        cio::write_json_line(&mut *out, &MappingRecord::new(&args.image_id, &m, &vocab)?)?;
        return Ok(());
    }
    let name = |n: &lfsgg_core::EntityInstance| -> Result<String> { Ok(format!("{}#{}", vocab.class_label(n.cls)?, n.idx)) };
    let matcher = if args.exhaustive {
        "exhaustive".to_owned()
    } else {
        format!("hts B={}", cfg.branching_factor)
    };
    writeln!(out, "image {} ({matcher})", args.image_id)?;
    for (g, p) in &m.pairs {
        writeln!(out, "  {} -> {}", name(g)?, name(p)?)?;
    }
    for g in &m.unmatched_gt {
        writeln!(out, "  {} -> none", name(g)?)?;
    }
    writeln!(out, "recall {:.6} ({}/{})", m.recall, m.matched, m.gt_total)?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub branching_factor: usize,
    pub k: usize,
    pub recall: f64,
    pub wall_ms: f64,
}

pub fn cmd_sweep_b(args: &SweepArgs, table: &mut dyn Write) -> Result<Vec<SweepRow>> {
    let (gt, pred) = load_pair(&args.gt, &args.pred, args.vocab.as_deref())?;
    let pool = thread_pool(args.jobs)?;
    let mut rows = Vec::new();
    writeln!(table, "{:>4} {:>10} {:>12}", "B", format!("R@{}", args.k), "wall_ms")?;
    for &b in &args.b_list {
        let opts = EvalOptions {
            ks: vec![args.k],
            cfg: MatchConfig {
                directed_neighborhood: args.directed_neighborhood,
                dedup_gt: args.dedup_gt,
                ..MatchConfig::with_branching_factor(b)
            },
            ..EvalOptions::default()
        };
        let start = Instant::now();
        let report = pool.install(|| evaluate_dataset(&gt, &pred, &opts))?;
        let row = SweepRow {
            branching_factor: b,
            k: args.k,
            recall: report.aggregate.recall[&args.k],
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        };
        writeln!(table, "{:>4} {:>10.6} {:>12.2}", row.branching_factor, row.recall, row.wall_ms)?;
        rows.push(row);
    }
    if let Some(path) = &args.out {
        write_pretty(Some(path), &rows)?;
    }
    Ok(rows)
}

pub fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let mut cfg: SynthConfig = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| path.display().to_string())?;
            serde_json::from_str(&text)
                .map_err(|e| Error::Parse {
                    line: e.line(),
                    message: e.to_string(),
                })
                .with_context(|| path.display().to_string())?
        }
        None => SynthConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let vocab = cfg.vocabulary()?;
    let pairs = generate(&cfg)?;

    let mut gt_out = open_out(Some(&args.out_gt))?;
    let mut pred_out = open_out(Some(&args.out_pred))?;
    for p in &pairs {
        cio::write_json_line(&mut gt_out, &GraphRecord::from_graph(&p.gt, &vocab)?)?;
        cio::write_json_line(&mut pred_out, &GraphRecord::from_graph(&p.pred, &vocab)?)?;
    }
    gt_out.flush()?;
    pred_out.flush()?;
    if let Some(path) = &args.out_mapping {
        let mut out = open_out(Some(path))?;
        for p in &pairs {
            cio::write_json_line(&mut out, &MappingRecord::new(&p.gt.image_id, &p.planted, &vocab)?)?;
        }
        out.flush()?;
    }
    if let Some(path) = &args.out_vocab {
        write_pretty(Some(path), &VocabularyFile::from_vocabulary(&vocab))?;
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
struct DecodeTotals {
    sequences: usize,
    decoded: usize,
    malformed: usize,
    truncated: usize,
    stopped: usize,
}

pub fn cmd_codec(cmd: &CodecCommand, diagnostics: &mut dyn Write) -> Result<()> {
    match cmd {
        CodecCommand::Encode { input, vocab, seed, out } => {
            let vocab = cio::load_vocabulary(vocab)?;
            let graphs = resolve(input, &read_records(input)?, &vocab)?;
            let mut w = open_out(out.as_deref())?;
            for (i, g) in graphs.iter().enumerate() {
                let seq = codec::encode(g, &vocab, seed.map(|s| image_seed(s, i as u64)))
                    .with_context(|| format!("image {}", g.image_id))?;
                writeln!(w, "{}\t{seq}", g.image_id)?;
            }
            w.flush()?;
        }
        CodecCommand::Decode {
            input,
            vocab,
            max_quintuples,
            out,
        } => {
            if *max_quintuples == 0 {
                bail!(Error::InvalidConfig("--max-quintuples must be positive".into()));
            }
            let vocab = cio::load_vocabulary(vocab)?;
            let space = TokenSpace::new(&vocab);
            let reader = BufReader::new(std::fs::File::open(input).with_context(|| input.display().to_string())?);
            let mut w = open_out(out.as_deref())?;
            let mut totals = DecodeTotals::default();
            for (i, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let (id, text) = match line.split_once('\t') {
                    Some((id, text)) => (id.to_owned(), text),
                    None => ((i + 1).to_string(), line.as_str()),
                };
                let seq = TokenSequence::parse(text, &space, i + 1).with_context(|| input.display().to_string())?;
                let (mut g, report) = codec::decode(&seq, &space, *max_quintuples);
                g.image_id = id;
                add(&mut totals, &report);
                if report.malformed + report.truncated > 0 {
                    writeln!(
                        diagnostics,
                        "line {}: image {}: {} malformed, {} truncated",
                        i + 1,
                        g.image_id,
                        report.malformed,
                        report.truncated
                    )?;
                }
                cio::write_json_line(&mut w, &GraphRecord::from_graph(&g, &vocab)?)?;
            }
            w.flush()?;
            writeln!(diagnostics, "{}", serde_json::to_string(&totals)?)?;
        }
    }
    Ok(())
}

fn add(totals: &mut DecodeTotals, r: &DecodeReport) {
    totals.sequences += 1;
    totals.decoded += r.decoded;
    totals.malformed += r.malformed;
    totals.truncated += r.truncated;
    totals.stopped += usize::from(r.stopped);
}

pub fn cmd_retrieve(args: &RetrieveArgs) -> Result<RetrievalSummary> {
    let (queries, gallery) = load_pair(&args.queries, &args.gallery, args.vocab.as_deref())?;
    let gallery = Gallery::from_graphs(gallery).with_context(|| args.gallery.display().to_string())?;
    let queries: Vec<RetrievalQuery> = queries
        .into_iter()
        .map(|g| RetrievalQuery {
            query_id: g.image_id.clone(),
            target_id: g.image_id.clone(),
            graph: g,
        })
        .collect();
    let cfg = MatchConfig::with_branching_factor(args.branching_factor);
    cfg.validate()?;
    let summary = thread_pool(args.jobs)?.install(|| benchmark(&queries, &gallery, &cfg, &args.k, args.top_n))?;
    write_pretty(args.out.as_deref(), &summary)?;
    Ok(summary)
}
