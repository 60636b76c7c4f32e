//! `univperturb analyze`: the evaluation and geometry suite, one artifact
//! family per `which`.

use std::path::Path;

use serde_json::Value;

use univperturb_core::analysis::{
    baseline_perturbation, build_label_graph, build_normals_matrix, norm_sweep,
    random_norm_scaling_check, singular_spectrum_comparison, subspace_probe, top_energy_fraction,
    transfer_matrix, BaselineKind,
};
use univperturb_core::models::{Model, SampleSet};
use univperturb_core::numerics::{lp_norm, sample_sphere, NormOrder, RngStream, Tensor};
use univperturb_core::universal::{fooling_rate, load_perturbation};
use univperturb_core::{Error, Result};

use crate::commands::{load_model_named, model_id, require_val, resolve_data, x_subset};
use crate::config::{echo_config, AnalyzeCommandConfig};
use crate::report::{num, write_csv};

pub fn run(cfg: AnalyzeCommandConfig, merged: Value) -> Result<()> {
    if cfg.models.is_empty() {
        return Err(Error::Config("analyze needs at least one model".into()));
    }
    let data = resolve_data(&cfg.dataset, &cfg.split)?;

    std::fs::create_dir_all(&cfg.out_dir)?;
    echo_config(&cfg.out_dir, &merged)?;

    match cfg.which.as_str() {
        "baselines" => baselines(&cfg, &data.train),
        "sweep" => sweep(&cfg, &data.train, require_val(data.val)?),
        "transfer" => transfer(&cfg, &data.train, require_val(data.val)?),
        "normals" => normals(&cfg, &data.train),
        "subspace" => subspace(&cfg, &data.train, data.eval),
        "graph" => graph(&cfg, require_val(data.val)?),
        "sqrtd" => sqrtd(&cfg, &data.train),
        other => Err(Error::Config(format!(
            "unknown analysis {other:?} (expected baselines|sweep|transfer|normals|subspace|graph|sqrtd)"
        ))),
    }
}

fn first_model(cfg: &AnalyzeCommandConfig) -> Result<Model> {
    load_model_named(&cfg.models[0])
}

fn load_required_perturbation(cfg: &AnalyzeCommandConfig) -> Result<Tensor> {
    let path = cfg.perturbation.as_ref().ok_or_else(|| {
        Error::Config("this analysis needs a \"perturbation\" file".into())
    })?;
    if !path.exists() {
        return Err(Error::Config(format!(
            "missing perturbation file {}",
            path.display()
        )));
    }
    Ok(load_perturbation(path)?.v)
}

fn compute_baselines(
    cfg: &AnalyzeCommandConfig,
    model: &Model,
    x_set: &SampleSet,
) -> Result<Vec<(BaselineKind, Tensor)>> {
    let rng = RngStream::new(cfg.seed);
    BaselineKind::ALL
        .into_iter()
        .map(|kind| {
            let v = baseline_perturbation(
                model,
                x_set,
                kind,
                cfg.attack_max_iter,
                cfg.overshoot,
                &mut rng.child(kind as u64),
            )?;
            Ok((kind, v))
        })
        .collect()
}

fn baselines(cfg: &AnalyzeCommandConfig, train: &SampleSet) -> Result<()> {
    let model = first_model(cfg)?;
    let x_set = x_subset(train, cfg.x_size)?;
    let computed = compute_baselines(cfg, &model, &x_set)?;
    let mut rows = Vec::new();
    for (kind, v) in &computed {
        let norm = lp_norm(v, NormOrder::L2)?;
        rows.push(vec![kind.as_str().to_string(), num(norm)]);
        write_baseline_vector(&cfg.out_dir, kind.as_str(), v)?;
        println!("baseline {}: unscaled l2 norm {}", kind.as_str(), num(norm));
    }
    write_csv(&cfg.out_dir.join("baselines.csv"), &["kind", "l2_norm"], &rows)
}

fn write_baseline_vector(out_dir: &Path, kind: &str, v: &Tensor) -> Result<()> {
    #[derive(serde::Serialize)]
    struct BaselineFile<'a> {
        kind: &'a str,
        dim: usize,
        data: &'a [f64],
    }
    let file = BaselineFile {
        kind,
        dim: v.len(),
        data: v.data(),
    };
    std::fs::write(
        out_dir.join(format!("baseline_{kind}.json")),
        serde_json::to_string_pretty(&file)?,
    )?;
    Ok(())
}

fn sweep(cfg: &AnalyzeCommandConfig, train: &SampleSet, valset: SampleSet) -> Result<()> {
    if cfg.norms.is_empty() {
        return Err(Error::Config("sweep needs a nonempty \"norms\" list".into()));
    }
    let model = first_model(cfg)?;
    let universal = load_required_perturbation(cfg)?;
    let x_set = x_subset(train, cfg.x_size)?;
    let baselines = compute_baselines(cfg, &model, &x_set)?;

    let mut curves = vec![(
        "universal".to_string(),
        norm_sweep(&model, &valset, &universal, &cfg.norms)?,
    )];
    for (kind, v) in &baselines {
        curves.push((
            kind.as_str().to_string(),
            norm_sweep(&model, &valset, v, &cfg.norms)?,
        ));
    }

    let mut header = vec!["norm".to_string()];
    header.extend(curves.iter().map(|(name, _)| name.clone()));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = cfg
        .norms
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let mut row = vec![num(n)];
            row.extend(curves.iter().map(|(_, c)| num(c[i].rate)));
            row
        })
        .collect();
    write_csv(&cfg.out_dir.join("sweep.csv"), &header_refs, &rows)?;
    println!(
        "sweep over {} norms x {} perturbations written to {}",
        cfg.norms.len(),
        curves.len(),
        cfg.out_dir.join("sweep.csv").display()
    );
    Ok(())
}

fn transfer(cfg: &AnalyzeCommandConfig, train: &SampleSet, valset: SampleSet) -> Result<()> {
    let params = cfg.universal.as_ref().ok_or_else(|| {
        Error::Config("transfer needs a \"universal\" parameter block".into())
    })?;
    let mut models = Vec::with_capacity(cfg.models.len());
    for path in &cfg.models {
        models.push((model_id(path), load_model_named(path)?));
    }
    let x_set = x_subset(train, cfg.x_size)?;
    let ucfg = params.to_core("transfer")?;
    let tm = transfer_matrix(&models, &x_set, &valset, &ucfg)?;

    let mut header = vec!["model_id".to_string()];
    header.extend(tm.model_ids.iter().cloned());
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = tm
        .model_ids
        .iter()
        .zip(&tm.rates)
        .map(|(id, row)| {
            let mut cells = vec![id.clone()];
            cells.extend(row.iter().map(|&r| num(r)));
            cells
        })
        .collect();
    write_csv(&cfg.out_dir.join("transfer.csv"), &header_refs, &rows)?;
    for (id, row) in tm.model_ids.iter().zip(&tm.rates) {
        println!(
            "transfer from {id}: {}",
            row.iter().map(|&r| format!("{r:.3}")).collect::<Vec<_>>().join(" ")
        );
    }
    Ok(())
}

fn normals_samples(cfg: &AnalyzeCommandConfig, train: &SampleSet) -> Result<SampleSet> {
    let n = cfg.n_samples.unwrap_or(100).min(train.len());
    let idx: Vec<usize> = (0..n).collect();
    train.subset(&idx, "normals")
}

fn normals(cfg: &AnalyzeCommandConfig, train: &SampleSet) -> Result<()> {
    let model = first_model(cfg)?;
    let samples = normals_samples(cfg, train)?;
    let matrix = build_normals_matrix(&model, &samples, cfg.attack_max_iter, cfg.overshoot)?;
    let mut rng = RngStream::new(cfg.seed);
    let cmp = singular_spectrum_comparison(&matrix, &mut rng)?;

    let rows: Vec<Vec<String>> = cmp
        .sigma_normals
        .iter()
        .zip(&cmp.sigma_random)
        .enumerate()
        .map(|(i, (&a, &b))| vec![i.to_string(), num(a), num(b)])
        .collect();
    write_csv(
        &cfg.out_dir.join("spectra.csv"),
        &["index", "sigma_normals", "sigma_random"],
        &rows,
    )?;
    let ratio = cmp.sigma_normals[1] / cmp.sigma_normals[0];
    println!(
        "normals: {} columns, sigma2/sigma1 = {}, top-10 energy {} vs random {}",
        matrix.matrix.cols(),
        num(ratio),
        num(top_energy_fraction(&cmp.sigma_normals, 10)),
        num(top_energy_fraction(&cmp.sigma_random, 10)),
    );
    Ok(())
}

fn subspace(cfg: &AnalyzeCommandConfig, train: &SampleSet, eval: Option<SampleSet>) -> Result<()> {
    let evalset = eval.ok_or_else(|| {
        Error::Config("subspace probe needs a nonempty eval split (disjoint from the samples behind the SVD)".into())
    })?;
    let model = first_model(cfg)?;
    let xi = cfg
        .probe_xi
        .ok_or_else(|| Error::Config("subspace probe needs \"probe_xi\"".into()))?;
    let k = cfg.subspace_k.unwrap_or(10);
    let seeds = cfg.probe_seeds.unwrap_or(5);

    let samples = normals_samples(cfg, train)?;
    let matrix = build_normals_matrix(&model, &samples, cfg.attack_max_iter, cfg.overshoot)?;

    let base = RngStream::new(cfg.seed);
    let mut rows = Vec::new();
    let (mut sub_sum, mut amb_sum) = (0.0, 0.0);
    for s in 0..seeds {
        let mut sub_rng = base.child(2 * s as u64);
        let probe = subspace_probe(&matrix, k, xi, &evalset, &model, &mut sub_rng)?;
        let mut amb_rng = base.child(2 * s as u64 + 1);
        let ambient = sample_sphere(train.dim(), xi, &mut amb_rng)?;
        let ambient_rate = fooling_rate(&model, &evalset, &ambient)?.rate;
        sub_sum += probe.rate;
        amb_sum += ambient_rate;
        rows.push(vec![s.to_string(), num(probe.rate), num(ambient_rate)]);
    }
    write_csv(
        &cfg.out_dir.join("subspace.csv"),
        &["seed", "subspace_rate", "ambient_rate"],
        &rows,
    )?;
    println!(
        "subspace probe (k = {k}, xi = {}): mean rate {} vs ambient {}",
        num(xi),
        num(sub_sum / seeds as f64),
        num(amb_sum / seeds as f64)
    );
    Ok(())
}

fn graph(cfg: &AnalyzeCommandConfig, valset: SampleSet) -> Result<()> {
    let model = first_model(cfg)?;
    let v = load_required_perturbation(cfg)?;
    let graph = build_label_graph(&model, &valset, &v)?;
    std::fs::write(cfg.out_dir.join("graph.dot"), graph.to_dot())?;
    println!(
        "label graph: {} edges, {} components{}",
        graph.edges.len(),
        graph.components.len(),
        graph
            .components
            .iter()
            .map(|c| format!("; dominant label {}", c.dominant_label))
            .collect::<String>()
    );
    Ok(())
}

fn sqrtd(cfg: &AnalyzeCommandConfig, train: &SampleSet) -> Result<()> {
    let model = first_model(cfg)?;
    let n = cfg.n_samples.unwrap_or(30).min(train.len());
    let idx: Vec<usize> = (0..n).collect();
    let samples = train.subset(&idx, "sqrtd")?;
    let mut rng = RngStream::new(cfg.seed);
    let check =
        random_norm_scaling_check(&model, &samples, cfg.attack_max_iter, cfg.overshoot, &mut rng)?;

    let rows: Vec<Vec<String>> = check
        .samples
        .iter()
        .map(|s| {
            vec![
                s.sample_id.to_string(),
                s.radius.map(num).unwrap_or_default(),
                num(s.minimal_norm),
                s.ratio.map(num).unwrap_or_default(),
            ]
        })
        .collect();
    write_csv(
        &cfg.out_dir.join("sqrtd.csv"),
        &["sample", "fooling_radius", "minimal_norm", "ratio"],
        &rows,
    )?;
    println!(
        "sqrt-d scaling: median ratio {} over {} samples ({} censored)",
        num(check.median_ratio),
        check.samples.len(),
        check.censored
    );
    Ok(())
}
