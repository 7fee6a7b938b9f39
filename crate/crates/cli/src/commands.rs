use std::path::PathBuf;

use anyhow::{bail, Context as _, Result};
use ledstripe_core::defense::{evaluate_defense, Destriper};
use ledstripe_core::harness::{
    bootstrap_rates, generate_fixture_set, report, run_protocol, run_sweep, OptimizeConfig, Preset,
    SweepAxis, SweepValue,
};
use ledstripe_core::optimizer::{
    fitness, write_history_csv, Checkpoint, FitnessConfig, ParamKind, ParamVector, Search,
};
use ledstripe_core::sensor::render_stripe_field;
use ledstripe_core::trigger::inject_trigger;
use ledstripe_core::waveform::predicted_stripe_widths;
use ledstripe_core::{ImageBuffer, Mask, Orientation, TriggerSpec};

use crate::context::{Context, BEST_FILE, CALIBRATION_FILE, FIXTURE_DIR, OPTIMIZE_DIR};

pub fn simulate(
    ctx: &Context,
    image: Option<PathBuf>,
    mask: Option<PathBuf>,
    phase: f64,
) -> Result<()> {
    let w = match ctx.waveform() {
        Ok(w) => w,
        Err(_)
            if ctx.cfg.waveform.is_none()
                && ctx.cfg.preset.is_none()
                && ctx.cfg.optimize.is_none() =>
        {
            log::info!("no trigger configured; using paper-mono");
            Preset::PaperMono
                .params()
                .to_waveform(ctx.cfg.ambient_ratio)?
        }
        Err(e) => return Err(e),
    };
    let phase_s = phase * w.red_period_s();
    let field = render_stripe_field(&w, &ctx.cfg.sensor, phase_s)?;
    let rel = "simulate/stripe_field.csv";
    field.write_csv(ctx.create(rel)?)?;
    let path = ctx.out(rel)?;
    for (name, ch) in ["red", "green", "blue"].iter().zip(w.channels()) {
        let (bright, dark) = predicted_stripe_widths(ch, &ctx.cfg.sensor);
        println!(
            "{name:<5} {:>8.2} Hz  duty {:.4}  bright {bright:.2}  dark {dark:.2} scanlines",
            ch.frequency_hz, ch.duty_cycle
        );
    }
    println!("contrast {:.4}  -> {}", field.contrast(), path.display());
    if let Some(image) = image {
        let img = ImageBuffer::read_png(&image)?;
        let mut spec = TriggerSpec::new(w, ctx.cfg.sensor, phase_s);
        if let Some(m) = mask {
            spec = spec.with_mask(Mask::read_png(m)?);
        }
        let out = ctx.out("simulate/injected.png")?;
        inject_trigger(&img, &spec)?.write_png(&out)?;
        println!("injected -> {}", out.display());
    }
    Ok(())
}

pub fn fixtures(ctx: &Context, count: usize) -> Result<()> {
    let dir = ctx.out(FIXTURE_DIR)?;
    let set = generate_fixture_set(&dir, ctx.cfg.seed, count)?;
    println!(
        "{count} identities, {} genuine and {} impostor pairs -> {}",
        set.genuine_pairs.len(),
        set.impostor_pairs.len(),
        dir.join("pairs.csv").display()
    );
    Ok(())
}

pub fn calibrate(ctx: &Context, far: Option<f64>) -> Result<()> {
    let far = far.unwrap_or(ctx.cfg.oracle.far_target);
    let data = ctx.dataset()?;
    let threshold = ctx.calibrate(&data, far)?;
    let mut w = csv::Writer::from_writer(ctx.create(CALIBRATION_FILE)?);
    w.write_record(["metric", "value"])?;
    w.write_record(["threshold".to_string(), threshold.to_string()])?;
    w.write_record(["far_target".to_string(), far.to_string()])?;
    w.write_record([
        "impostor_pairs".to_string(),
        data.impostor.len().to_string(),
    ])?;
    w.flush()?;
    println!(
        "threshold {threshold} at far {far} over {} impostor pairs",
        data.impostor.len()
    );
    Ok(())
}

pub fn optimize(
    ctx: &Context,
    kind: Option<ParamKind>,
    budget: Option<usize>,
    max_pairs: Option<usize>,
    resume: bool,
) -> Result<()> {
    let default_kind = ctx.cfg.preset.map_or(ParamKind::Mono2, |p| p.kind());
    let mut opt = ctx
        .cfg
        .optimize
        .clone()
        .unwrap_or_else(|| OptimizeConfig::new(default_kind));
    if let Some(k) = kind {
        opt.kind = k;
    }
    if let Some(b) = budget {
        opt.budget = b;
    }
    if max_pairs.is_some() {
        opt.max_pairs = max_pairs;
    }

    let data = ctx.dataset()?;
    let oracle = ctx.oracle(&data)?;
    let pairs: Vec<(usize, usize)> = data
        .impostor
        .iter()
        .take(opt.max_pairs.unwrap_or(usize::MAX))
        .copied()
        .collect();
    let mut fcfg = FitnessConfig::new(data.images.clone(), pairs);
    fcfg.sensor = ctx.cfg.sensor;
    fcfg.attempts = ctx.cfg.attempts;
    fcfg.ambient_ratio = ctx.cfg.ambient_ratio;
    fcfg.min_frequency_hz = opt.min_frequency_hz;

    let checkpoint = ctx.out(format!("{OPTIMIZE_DIR}/checkpoint.json"))?;
    let mut search = if resume {
        let cp = Checkpoint::load(&checkpoint)?;
        if cp.space != opt.space() {
            bail!(
                "{} was written for a different search space",
                checkpoint.display()
            );
        }
        Search::resume(&cp)?
    } else {
        Search::new(opt.space(), ctx.cfg.seed)?
    };
    let lambda = search.population_size();
    if opt.budget < lambda {
        bail!(
            "budget {} is smaller than one generation ({lambda})",
            opt.budget
        );
    }
    let mut objective = |p: &ParamVector| Ok(fitness(p, &fcfg, &oracle)?.objective());
    while search.evaluations() + lambda <= opt.budget && !search.converged() {
        search.step(&mut objective)?;
        search.checkpoint().save(&checkpoint)?;
        let best = search.best().map_or(f64::NAN, |b| b.score);
        log::info!("evaluations {:>5}  best {best:.4}", search.evaluations());
    }
    let best = search.best().context("search evaluated no candidate")?;
    write_history_csv(
        search.history(),
        ctx.create(format!("{OPTIMIZE_DIR}/history.csv"))?,
    )?;
    let best_path = ctx.out(format!("{OPTIMIZE_DIR}/{BEST_FILE}"))?;
    std::fs::write(&best_path, serde_json::to_string_pretty(best)?)?;
    println!(
        "best {:?} {:?} objective {:.4} after {} evaluations -> {}",
        best.params.kind,
        best.params.values,
        best.score,
        search.evaluations(),
        best_path.display()
    );
    Ok(())
}

pub fn attack(ctx: &Context) -> Result<()> {
    let data = ctx.dataset()?;
    let oracle = ctx.oracle(&data)?;
    let report = run_protocol(&data, &ctx.protocol()?, &oracle, None)?;
    report.write_summary_csv(ctx.create("attack/summary.csv")?)?;
    report.write_pairs_csv(ctx.create("attack/pairs.csv")?)?;
    let pct =
        |r: Option<f64>| r.map_or_else(|| "n/a".to_string(), |r| format!("{:.2}%", 100.0 * r));
    println!(
        "face detection rate  {}",
        pct(Some(report.face_detection_rate))
    );
    println!("victim success rate  {}", pct(report.victim_success_rate));
    println!("attack success rate  {}", pct(report.attack_success_rate));
    if ctx.cfg.repeats > 1 {
        let rows = bootstrap_rates(&report, ctx.cfg.repeats, ctx.cfg.seed)?;
        let mut w = csv::Writer::from_writer(ctx.create("attack/repeats.csv")?);
        w.write_record(["metric", "mean", "std", "repeats"])?;
        for r in &rows {
            w.write_record([
                r.metric.clone(),
                r.mean.to_string(),
                r.std.to_string(),
                r.repeats.to_string(),
            ])?;
            println!(
                "{:<20} {:.4} +- {:.4} ({} repeats)",
                r.metric, r.mean, r.std, r.repeats
            );
        }
        w.flush()?;
    }
    Ok(())
}

fn parse_value(s: &str) -> Result<SweepValue> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once(';') {
        return Ok(SweepValue::Pair([a.trim().parse()?, b.trim().parse()?]));
    }
    if let Ok(v) = s.parse::<f64>() {
        return Ok(SweepValue::Scalar(v));
    }
    Ok(SweepValue::Orientation(s.parse::<Orientation>()?))
}

pub fn sweep(ctx: &Context, axis: Option<SweepAxis>, values: Option<String>) -> Result<()> {
    let configured = ctx.cfg.sweep.as_ref();
    let axis = axis
        .or(configured.map(|s| s.axis))
        .context("no sweep axis (pass --axis or set [sweep] in the config)")?;
    let values: Vec<SweepValue> = match values {
        Some(v) => v.split(',').map(parse_value).collect::<Result<_>>()?,
        None => match configured {
            Some(s) if s.axis == axis => s.values(),
            _ => axis.default_values(),
        },
    };
    let data = ctx.dataset()?;
    let binding = ctx.binding(&data)?;
    let table = run_sweep(
        &data,
        &ctx.protocol()?,
        axis,
        &values,
        ctx.cfg.workers,
        || binding.build(),
    )?;
    let rel = format!("sweep/{}.csv", axis.as_str());
    table.write_csv(ctx.create(&rel)?)?;
    let path = ctx.out(&rel)?;
    println!("{} points -> {}", values.len(), path.display());
    Ok(())
}

pub fn defend(ctx: &Context, disabled: bool) -> Result<()> {
    let data = ctx.dataset()?;
    let oracle = ctx.oracle(&data)?;
    let destriper = if disabled {
        Destriper::Disabled
    } else {
        Destriper::Spectral
    };
    let eval = evaluate_defense(&data, &ctx.protocol()?, &oracle, destriper)?;
    eval.report.write_csv(ctx.create("defense/defense.csv")?)?;
    eval.before
        .write_summary_csv(ctx.create("defense/before.csv")?)?;
    eval.after
        .write_summary_csv(ctx.create("defense/after.csv")?)?;
    println!("{}", eval.report);
    Ok(())
}

pub fn report(ctx: &Context) -> Result<()> {
    for p in report::write_report(&ctx.cfg.out)? {
        println!("{}", p.display());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_values_parse_by_shape() {
        assert_eq!(parse_value(" 0.25").unwrap(), SweepValue::Scalar(0.25));
        assert_eq!(
            parse_value("0.2;0.75").unwrap(),
            SweepValue::Pair([0.2, 0.75])
        );
        assert_eq!(
            parse_value("row").unwrap(),
            SweepValue::Orientation(Orientation::RowWise)
        );
        assert!(parse_value("diagonal").is_err());
        assert!(parse_value("0.2;x").is_err());
    }
}
