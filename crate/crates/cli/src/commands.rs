use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::BufReader;

use collrec_core::dataset::{read_dataset, write_dataset, LabeledDataset};
use collrec_core::embedding::EmbeddingStore;
use collrec_core::eval::{EvalReport, ScoreTable, Scorer};
use collrec_core::marketplace::{read_events, write_events, Marketplace, SessionEvent};
use collrec_core::pipeline::*;
use collrec_gbdt::GbdtModel;
use serde::Serialize;

use crate::artifacts::*;
use crate::error::CliError;

pub struct Ctx {
    pub cfg: PipelineConfig,
    pub art: Artifacts,
    pub quiet: bool,
}

impl Ctx {
    fn say(&self, line: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", line.as_ref());
        }
    }

    fn seed(&self) -> u64 {
        self.cfg.seed
    }
}

#[derive(Serialize)]
struct EvalArtifact<'a> {
    variants: &'a [EvalReport],
    oracle: &'a EvalReport,
}

fn to_json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text.into_bytes())
}

fn events_bytes(events: &[SessionEvent]) -> Result<Vec<u8>, CliError> {
    let mut out = Vec::new();
    write_events(&mut out, events)?;
    Ok(out)
}

fn model_path(name: &str) -> String {
    format!("{MODELS_DIR}/{name}.gbdt")
}

fn load_world(ctx: &Ctx) -> Result<World, CliError> {
    let market = ctx.art.read(MARKET, Stage::Generate)?;
    let market = Marketplace::from_json(
        std::str::from_utf8(&market).map_err(|e| CliError::Runtime(format!("{MARKET}: {e}")))?,
    )?;
    let store = EmbeddingStore::from_bytes(&ctx.art.read(EMBEDDINGS, Stage::Generate)?)?;
    Ok(World::from_parts(&ctx.cfg, market, store)?)
}

fn load_logs(ctx: &Ctx) -> Result<Logs, CliError> {
    let read = |rel: &str| -> Result<Vec<SessionEvent>, CliError> {
        Ok(read_events(BufReader::new(&ctx.art.read(rel, Stage::Generate)?[..]))?)
    };
    Ok(Logs {
        cards: read(SESSIONS)?,
        carousel: read(CAROUSEL_SESSIONS)?,
    })
}

fn load_dataset(ctx: &Ctx, rel: &str) -> Result<LabeledDataset, CliError> {
    let dir = ctx.art.path(rel);
    if !dir.is_dir() {
        return Err(CliError::MissingArtifact {
            path: dir,
            producer: Stage::BuildDataset.command(),
        });
    }
    Ok(read_dataset(&dir)?)
}

/// Models in ladder order; `None` for the popularity rung.
fn load_models(ctx: &Ctx) -> Result<Vec<Option<GbdtModel>>, CliError> {
    ctx.cfg
        .eval
        .ladder
        .iter()
        .map(|v| match v {
            VariantSpec::Popularity { .. } => Ok(None),
            VariantSpec::Model { name, .. } => {
                Ok(Some(GbdtModel::from_bytes(&ctx.art.read(&model_path(name), Stage::Train)?)?))
            }
        })
        .collect()
}

pub fn generate(ctx: &Ctx) -> Result<(), CliError> {
    ctx.art.check_overwrite(Stage::Generate)?;
    let world = World::generate(&ctx.cfg, ctx.seed())?;
    let logs = log_sessions(&world, &ctx.cfg, ctx.seed())?;
    let outputs = vec![
        ctx.art.write(MARKET, world.market.to_json().as_bytes())?,
        ctx.art.write(EMBEDDINGS, &world.store.to_bytes())?,
        ctx.art.write(SESSIONS, &events_bytes(&logs.cards)?)?,
        ctx.art.write(CAROUSEL_SESSIONS, &events_bytes(&logs.carousel)?)?,
    ];
    ctx.art.commit(Stage::Generate, BTreeMap::new(), &outputs)?;
    let purchases = logs.cards.iter().filter(|e| e.purchased_collection_id.is_some()).count();
    let explored = logs.cards.iter().filter(|e| e.exploration_flag).count();
    ctx.say(format!(
        "generated {} users, {} collections; logged {} card sessions ({} exploration, CCR {:.4}) and {} carousel sessions",
        world.market.users.len(),
        world.market.collections.len(),
        logs.cards.len(),
        explored,
        purchases as f64 / logs.cards.len().max(1) as f64,
        logs.carousel.len()
    ));
    Ok(())
}

pub fn build_dataset(ctx: &Ctx) -> Result<(), CliError> {
    let inputs = ctx.art.require_upstream(Stage::BuildDataset)?;
    ctx.art.check_overwrite(Stage::BuildDataset)?;
    let world = load_world(ctx)?;
    let logs = load_logs(ctx)?;
    let data = build_datasets(&world, &logs, &ctx.cfg, ctx.seed())?;
    let mut outputs = Vec::new();
    for (rel, ds) in [(TRAIN_DIR, &data.train), (TEST_DIR, &data.test)] {
        let dir = ctx.art.path(rel);
        std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        for path in write_dataset(&dir, ds)? {
            outputs.push(ctx.art.relative(&path));
        }
    }
    ctx.art.commit(Stage::BuildDataset, inputs, &outputs)?;
    ctx.say(format!(
        "built {} training and {} test pairs ({} features)",
        data.train.n_pairs(),
        data.test.n_pairs(),
        data.train.schema.features.len()
    ));
    Ok(())
}

pub fn train(ctx: &Ctx) -> Result<(), CliError> {
    let inputs = ctx.art.require_upstream(Stage::Train)?;
    ctx.art.check_overwrite(Stage::Train)?;
    let train_set = load_dataset(ctx, TRAIN_DIR)?;
    let models = train_ladder(&ctx.cfg, &train_set, ctx.seed())?;
    let mut outputs = Vec::new();
    for (v, m) in ctx.cfg.eval.ladder.iter().zip(&models) {
        if let Some(m) = m {
            outputs.push(ctx.art.write(&model_path(v.name()), &m.to_bytes())?);
            ctx.say(format!("trained {} ({} trees on {} features)", v.name(), m.trees.len(), m.n_features()));
        }
    }
    ctx.art.commit(Stage::Train, inputs, &outputs)?;
    Ok(())
}

pub fn eval(ctx: &Ctx) -> Result<(), CliError> {
    let inputs = ctx.art.require_upstream(Stage::Eval)?;
    ctx.art.check_overwrite(Stage::Eval)?;
    let world = load_world(ctx)?;
    let test = load_dataset(ctx, TEST_DIR)?;
    let models = load_models(ctx)?;
    let scorers = ladder_scorers(&world, &ctx.cfg, &models)?;
    let variants = evaluate_ladder(&ctx.cfg, &scorers, &test)?;
    let oracle = evaluate_oracle(&world, &test)?;
    let out = ctx.art.write(
        EVAL_REPORT,
        &to_json_bytes(&EvalArtifact {
            variants: &variants,
            oracle: &oracle,
        })?,
    )?;
    ctx.art.commit(Stage::Eval, inputs, &[out])?;
    ctx.say(format!("pairwise accuracy on {} test pairs:", test.n_pairs()));
    for r in variants.iter().chain([&oracle]) {
        ctx.say(format!("  {:<14} {:.4}", r.model_id, r.pairwise_accuracy));
    }
    Ok(())
}

pub fn abtest(ctx: &Ctx) -> Result<(), CliError> {
    let inputs = ctx.art.require_upstream(Stage::AbTest)?;
    ctx.art.check_overwrite(Stage::AbTest)?;
    let world = load_world(ctx)?;
    let logs = load_logs(ctx)?;
    let models = load_models(ctx)?;
    let scorers = ladder_scorers(&world, &ctx.cfg, &models)?;
    let e = &ctx.cfg.eval;
    let pick = |name: &str| -> Result<&dyn Scorer, CliError> {
        let i = e
            .ladder
            .iter()
            .position(|v| v.name() == name)
            .ok_or_else(|| CliError::Config(format!("A/B variant {name:?} is not in eval.ladder")))?;
        Ok(scorers[i].as_ref())
    };
    let chosen = [pick(&e.ab_control)?, pick(&e.ab_variant)?];
    let mut tables = ScoreTable::build_many(&chosen, &world.market, &world.extractor)?;
    tables[0].name = e.ab_control.clone();
    tables[1].name = e.ab_variant.clone();
    let covariate = ab_covariate(&world, &ctx.cfg, &logs);
    let report = ab_test(&world, &ctx.cfg, &tables[0], &tables[1], covariate.as_deref(), ctx.seed())?;
    let out = ctx.art.write(AB_REPORT, &to_json_bytes(&report)?)?;
    ctx.art.commit(Stage::AbTest, inputs, &[out])?;
    ctx.say(format!(
        "{} vs {}: CCR {:.4} vs {:.4}, lift {:+.2}%, z {:.2}, p {:.3e} ({} sessions per arm)",
        report.control_id,
        report.variant_id,
        report.ccr_control,
        report.ccr_variant,
        100.0 * report.ccr_lift,
        report.z,
        report.p_value,
        report.n_sessions
    ));
    Ok(())
}

/// Scatter data: one row per seed and step, then the seed averages.
fn ladder_points(report: &LadderReport) -> String {
    let mut out = String::from("seed\tcontrol\tvariant\toffline_diff_points\tccr_lift\n");
    let rows = report
        .seeds
        .iter()
        .map(|s| (s.seed.to_string(), &s.correlation))
        .chain([("mean".to_string(), &report.averaged)]);
    for (seed, corr) in rows {
        for st in &corr.steps {
            let _ = writeln!(
                out,
                "{seed}\t{}\t{}\t{}\t{}",
                st.control, st.variant, st.offline_diff_points, st.ccr_lift
            );
        }
    }
    out
}

pub fn ladder(ctx: &Ctx) -> Result<(), CliError> {
    ctx.art.check_overwrite(Stage::Ladder)?;
    let report = run_ladder_with(&ctx.cfg, |run| {
        let accs: Vec<String> = run
            .evals
            .iter()
            .map(|e| format!("{}={:.4}", e.model_id, e.pairwise_accuracy))
            .collect();
        let lifts: Vec<String> = run.ab.iter().map(|r| format!("{:+.2}%", 100.0 * r.ccr_lift)).collect();
        ctx.say(format!(
            "seed {}: {} oracle={:.4}; lifts {}",
            run.seed,
            accs.join(" "),
            run.oracle.pairwise_accuracy,
            lifts.join(" ")
        ));
    })?;
    let outputs = vec![
        ctx.art.write(LADDER_REPORT, &to_json_bytes(&report)?)?,
        ctx.art.write(LADDER_POINTS, ladder_points(&report).as_bytes())?,
    ];
    ctx.art.commit(Stage::Ladder, BTreeMap::new(), &outputs)?;
    let avg = &report.averaged;
    ctx.say(format!("averaged over {} seeds:", report.seeds.len()));
    for st in &avg.steps {
        ctx.say(format!(
            "  {:<12} -> {:<12} offline {:+6.2} pts   CCR lift {:+7.2}%",
            st.control,
            st.variant,
            st.offline_diff_points,
            100.0 * st.ccr_lift
        ));
    }
    ctx.say(format!(
        "rank correlation {}; signs agree: {}",
        avg.rank_correlation.map_or("undefined".to_string(), |r| format!("{r:.3}")),
        avg.signs_agree
    ));
    Ok(())
}
