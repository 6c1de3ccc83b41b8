use super::args::*;
use crate::data::{
    gen_prompt_manifest, gen_synthetic_dataset, generation_spec_count, read_dataset, read_lines,
    split_dataset, split_manifest, write_dataset, write_manifest, Dataset, EmbeddingRecord,
    LabelKind, LabelTable, SyntheticConfig,
};
use crate::error::{Error, Result};
use crate::metrics::{distance_correlation_report, evaluate_probe, retrieve_topk, train_probe};
use crate::model::GoyaModel;
use crate::tensor::{load_checkpoint, save_checkpoint, Matrix};
use crate::train::{train_model, EpochLog, RunConfig, TrainData};
use serde_json::json;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

pub const TRAIN_LOG: &str = "train_log.jsonl";
pub const BEST_CHECKPOINT: &str = "best.gckp";
pub const FINAL_CHECKPOINT: &str = "final.gckp";
pub const RESOLVED_CONFIG: &str = "config.json";

struct Globals {
    rng_seed: u64,
    config: RunConfig,
}

pub(super) fn dispatch(cli: Cli) -> Result<()> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| Error::State(format!("thread pool: {e}")))?;
    }
    let mut config = match &cli.config {
        Some(p) => RunConfig::from_json(&std::fs::read_to_string(p)?)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.rng_seed {
        config.rng_seed = seed;
    }
    let g = Globals {
        rng_seed: config.rng_seed,
        config,
    };
    match cli.command {
        Command::GenPrompts(a) => gen_prompts(&g, a),
        Command::GenSynthetic(a) => gen_synthetic(&g, a),
        Command::Split(a) => split(&g, a),
        Command::Train(a) => train(g, a),
        Command::Export(a) => export(a),
        Command::EvalDc(a) => eval_dc(&g, a),
        Command::EvalProbe(a) => eval_probe(g, a),
        Command::Retrieve(a) => retrieve(a),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })?))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })?))
}

fn load(path: &Path) -> Result<Dataset> {
    read_dataset(path).map_err(|e| match e {
        Error::Format { offset, msg } => Error::Format {
            offset,
            msg: format!("{}: {msg}", path.display()),
        },
        Error::Io(io) => Error::Io(std::io::Error::new(io.kind(), format!("{}: {io}", path.display()))),
        other => other,
    })
}

fn print_json(value: &serde_json::Value, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    ignore_broken_pipe(writeln!(std::io::stdout().lock(), "{text}"))?;
    if let Some(p) = out {
        let mut w = create(p)?;
        writeln!(w, "{text}")?;
        w.flush()?;
    }
    Ok(())
}

fn ignore_broken_pipe(r: std::io::Result<()>) -> std::io::Result<()> {
    match r {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => other,
    }
}

fn gen_prompts(g: &Globals, a: GenPromptsArgs) -> Result<()> {
    let contents = match (&a.contents, a.placeholder_contents) {
        (Some(p), _) => read_lines(open(p)?)?,
        (None, Some(n)) => (0..n).map(|i| format!("content {i}")).collect(),
        (None, None) => return Err(Error::InvalidArgument("--contents or --placeholder-contents is required".into())),
    };
    let styles = match &a.styles {
        Some(p) => LabelTable::read_csv(open(p)?)?,
        None => LabelTable::default_styles(),
    };
    let manifest = gen_prompt_manifest(&contents, &styles.names, a.per_content, a.seeds, g.rng_seed)?;
    if let Some(p) = &a.out {
        write_manifest(&manifest, create(p)?)?;
    }
    let mut report = json!({
        "contents": contents.len(),
        "styles": styles.len(),
        "prompts": manifest.len(),
        "generation_specs": generation_spec_count(&manifest),
    });
    if let Some(f) = a.train_fraction {
        let (tr, va) = split_manifest(&manifest, f, g.rng_seed)?;
        if let Some(p) = &a.train_out {
            write_manifest(&tr, create(p)?)?;
        }
        if let Some(p) = &a.val_out {
            write_manifest(&va, create(p)?)?;
        }
        report["train_prompts"] = json!(tr.len());
        report["val_prompts"] = json!(va.len());
        report["train_specs"] = json!(generation_spec_count(&tr));
        report["val_specs"] = json!(generation_spec_count(&va));
    }
    print_json(&report, None)
}

fn gen_synthetic(g: &Globals, a: GenSyntheticArgs) -> Result<()> {
    let cfg = SyntheticConfig {
        n: a.n,
        content_clusters: a.clusters,
        styles: a.styles,
        d_img: a.d_img,
        d_txt: a.d_txt,
        latent_dim: a.latent_dim,
        noise: a.noise,
        text_noise: a.text_noise,
        rng_seed: g.rng_seed,
    };
    let ds = gen_synthetic_dataset(&cfg)?;
    write_dataset(&ds, &a.out)?;
    print_json(&json!({ "records": ds.len(), "config": cfg }), None)
}

fn split(g: &Globals, a: SplitArgs) -> Result<()> {
    let ds = load(&a.input)?;
    let (tr, va) = split_dataset(&ds, a.train_fraction, g.rng_seed)?;
    write_dataset(&tr, &a.train_out)?;
    write_dataset(&va, &a.val_out)?;
    print_json(&json!({ "train": tr.len(), "val": va.len() }), None)
}

fn resolve_train_config(mut cfg: RunConfig, a: &TrainArgs, train: &Dataset) -> Result<RunConfig> {
    let o = &mut cfg.optimizer;
    o.epochs = a.epochs.unwrap_or(o.epochs);
    o.batch_size = a.batch_size.unwrap_or(o.batch_size);
    o.lr = a.lr.unwrap_or(o.lr);
    o.lr_decay = a.lr_decay.unwrap_or(o.lr_decay);
    let l = &mut cfg.loss;
    l.eps_t = a.eps_t.unwrap_or(l.eps_t);
    l.eps_c = a.eps_c.unwrap_or(l.eps_c);
    l.eps_s = a.eps_s.unwrap_or(l.eps_s);
    l.lambda_c = a.lambda_c.unwrap_or(l.lambda_c);
    l.lambda_s = a.lambda_s.unwrap_or(l.lambda_s);
    l.lambda_sc = a.lambda_sc.unwrap_or(l.lambda_sc);
    l.ablation = a.ablation.unwrap_or(l.ablation);
    if a.no_classifier {
        l.use_classifier = false;
    }
    let ar = &mut cfg.arch;
    ar.embed_dim = a.embed_dim.unwrap_or(ar.embed_dim);
    ar.content_hidden = a.content_hidden.unwrap_or(ar.content_hidden);
    ar.projector_hidden = a.projector_hidden.unwrap_or(ar.projector_hidden);
    ar.single_layer |= a.single_layer;
    ar.input_dim = train.d_img;
    ar.n_styles = train.n_styles as usize;
    if let Some(d) = &a.out_dir {
        cfg.paths.out_dir = Some(d.display().to_string());
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Output paths are left out so that artifacts do not depend on where they are written.
fn checkpoint_meta(cfg: &RunConfig, log: &EpochLog, kind: &str) -> serde_json::Value {
    let portable = RunConfig {
        paths: Default::default(),
        ..cfg.clone()
    };
    json!({ "kind": kind, "epoch": log.epoch, "train": log.train, "val": log.val, "config": portable })
}

fn train(g: Globals, a: TrainArgs) -> Result<()> {
    let train_ds = load(&a.train)?;
    let val_ds = a.val.as_deref().map(load).transpose()?;
    if let Some(v) = &val_ds {
        if v.d_img != train_ds.d_img || v.d_txt != train_ds.d_txt {
            return Err(Error::shape(
                "train",
                format!("validation dims {}/{}", train_ds.d_img, train_ds.d_txt),
                format!("{}/{}", v.d_img, v.d_txt),
            ));
        }
    }
    let cfg = resolve_train_config(g.config, &a, &train_ds)?;
    let out_dir = PathBuf::from(
        cfg.paths
            .out_dir
            .clone()
            .ok_or_else(|| Error::InvalidArgument("--out-dir is required".into()))?,
    );
    std::fs::create_dir_all(&out_dir)?;
    std::fs::write(out_dir.join(RESOLVED_CONFIG), serde_json::to_string_pretty(&cfg)? + "\n")?;

    let train_data = TrainData::<f64>::from_dataset(&train_ds)?;
    let val_data = val_ds.as_ref().map(TrainData::<f64>::from_dataset).transpose()?;
    let mut log = create(&out_dir.join(TRAIN_LOG))?;
    let best_path = out_dir.join(BEST_CHECKPOINT);
    let mut sink = |entry: &EpochLog, model: &GoyaModel<f64>, is_best: bool| -> Result<()> {
        serde_json::to_writer(&mut log, entry)?;
        log.write_all(b"\n")?;
        log.flush()?;
        if is_best {
            save_checkpoint(&model.to_checkpoint(checkpoint_meta(&cfg, entry, "best"))?, &best_path)?;
        }
        Ok(())
    };
    let outcome = train_model(&cfg, &train_data, val_data.as_ref(), &mut sink)?;
    let last = outcome.history.last().expect("at least one epoch");
    save_checkpoint(
        &outcome.model.to_checkpoint(checkpoint_meta(&cfg, last, "final"))?,
        out_dir.join(FINAL_CHECKPOINT),
    )?;
    print_json(
        &json!({
            "epochs": outcome.history.len(),
            "best_epoch": outcome.best_epoch,
            "final": last,
            "out_dir": out_dir.display().to_string(),
        }),
        None,
    )
}

fn embedding_dataset(src: &Dataset, emb: &Matrix<f64>) -> Result<Dataset> {
    let records = src
        .records
        .iter()
        .zip(emb.row_iter())
        .map(|(r, row)| EmbeddingRecord {
            record_id: r.record_id,
            image_embedding: row.iter().map(|&v| v as f32).collect(),
            text_embedding: None,
            style_id: r.style_id,
            content_id: r.content_id,
            genre_id: r.genre_id,
            content_cluster: r.content_cluster,
        })
        .collect();
    Dataset::new(src.n_styles, emb.cols(), 0, records)
}

fn export(a: ExportArgs) -> Result<()> {
    let model = GoyaModel::<f64>::from_checkpoint(&load_checkpoint(&a.checkpoint)?)?;
    let ds = load(&a.input)?;
    if ds.d_img != model.arch().input_dim {
        return Err(Error::shape("export", format!("{}-d inputs", model.arch().input_dim), ds.d_img));
    }
    let x = ds.image_matrix::<f64>();
    let content = embedding_dataset(&ds, &model.content_forward(&x)?)?;
    let style = embedding_dataset(&ds, &model.style_forward(&x)?)?;
    write_dataset(&content, &a.content_out)?;
    write_dataset(&style, &a.style_out)?;
    print_json(
        &json!({ "records": ds.len(), "content_dim": content.d_img, "style_dim": style.d_img }),
        None,
    )
}

fn eval_dc(g: &Globals, a: EvalDcArgs) -> Result<()> {
    let c = load(&a.content)?;
    let s = load(&a.style)?;
    if c.len() != s.len() || c.records.iter().zip(&s.records).any(|(x, y)| x.record_id != y.record_id) {
        return Err(Error::InvalidArgument(
            "record ids of the two embedding files are not aligned".into(),
        ));
    }
    let report = distance_correlation_report(
        &c.image_matrix::<f64>(),
        &s.image_matrix::<f64>(),
        a.max_rows,
        g.rng_seed,
    )?;
    print_json(&serde_json::to_value(&report)?, a.out.as_deref())
}

fn class_count(kind: LabelKind, sets: [&Dataset; 2], labels: [&[usize]; 2]) -> usize {
    let max_seen = labels.iter().flat_map(|l| l.iter()).max().map_or(0, |&m| m + 1);
    match kind {
        LabelKind::Style => max_seen.max(sets[0].n_styles.max(sets[1].n_styles) as usize),
        _ => max_seen,
    }
}

fn eval_probe(g: Globals, a: EvalProbeArgs) -> Result<()> {
    let tr = load(&a.train)?;
    let te = load(&a.test)?;
    if tr.d_img != te.d_img {
        return Err(Error::shape("eval-probe", format!("{}-d test embeddings", tr.d_img), te.d_img));
    }
    let ytr = tr.labels(a.label)?;
    let yte = te.labels(a.label)?;
    let k = class_count(a.label, [&tr, &te], [&ytr, &yte]);
    let mut pc = g.config.probe.clone();
    pc.lr = a.probe_lr.unwrap_or(pc.lr);
    pc.epochs = a.probe_epochs.unwrap_or(pc.epochs);
    pc.batch_size = a.probe_batch_size.unwrap_or(pc.batch_size);
    let probe = train_probe(&tr.image_matrix::<f64>(), &ytr, k, &pc, g.rng_seed)?;
    let ev = evaluate_probe(&probe, &te.image_matrix::<f64>(), &yte)?;
    if let Some(p) = &a.confusion_out {
        let names = a.names.as_deref().map(|n| LabelTable::read_csv(open(n)?)).transpose()?;
        if let Some(t) = &names {
            if t.len() != k {
                return Err(Error::InvalidArgument(format!(
                    "name table has {} entries for {k} classes",
                    t.len()
                )));
            }
        }
        ev.confusion.write_csv(create(p)?, names.as_ref().map(|t| t.names.as_slice()))?;
    }
    print_json(
        &json!({
            "label": a.label,
            "classes": k,
            "n_train": tr.len(),
            "n_test": te.len(),
            "accuracy": ev.accuracy,
            "per_class_accuracy": ev.per_class_accuracy(),
        }),
        a.out.as_deref(),
    )
}

fn retrieve(a: RetrieveArgs) -> Result<()> {
    if a.k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let db = load(&a.db)?;
    let qi = db
        .records
        .iter()
        .position(|r| r.record_id == a.query_id)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown query id {}", a.query_id)))?;
    if a.k > db.len() {
        return Err(Error::InvalidArgument(format!("k = {} exceeds the {} records", a.k, db.len())));
    }
    let m = db.image_matrix::<f64>();
    let hits = retrieve_topk(m.row(qi), &m, a.k)?;
    let sink: Box<dyn Write> = match &a.out {
        Some(p) => Box::new(create(p)?),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    let rows = std::iter::once(["query_id", "rank", "result_id", "similarity"].map(String::from)).chain(
        hits.iter().enumerate().map(|(rank, (row, sim))| {
            [
                a.query_id.to_string(),
                (rank + 1).to_string(),
                db.records[*row].record_id.to_string(),
                format!("{sim:.9}"),
            ]
        }),
    );
    for row in rows {
        if let Err(e) = w.write_record(&row) {
            return match e.kind() {
                csv::ErrorKind::Io(io) if io.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
                _ => Err(e.into()),
            };
        }
    }
    Ok(ignore_broken_pipe(w.flush())?)
}
