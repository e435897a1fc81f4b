use std::path::{Path, PathBuf};

use tagspot::analysis::curves::RocCurve;
use tagspot::analysis::sweep::sweep_pd_mc;
use tagspot::analysis::{
    closed_form_roc, expected_offset_leak, family_roc_mc, leakage::leak_at, leakage_block, optimal_q,
    overhead, pm_mc, range_gain, sweep_active_carriers, AnalysisModel, CodeFamily, FrameAccounting,
};
use tagspot::channel::{ChannelSpec, Fading, InterferenceKind, InterferenceSpec};
use tagspot::codebook::verify_min_distance;
use tagspot::fft::energy;
use tagspot::detector::{Detector, DetectorConfig};
use tagspot::iq::{read_iq, write_iq};
use tagspot::trials::{trial_rng, Execution, TrialPlan};
use tagspot::waveform::{build_tag_spectrum, papr, synthesize_tag, synthesize_tag_papr_limited};
use tagspot::{codeword_to_mask, IqFrame};

use crate::config::{
    CurvesSection, DetectorSection, ExperimentConfig, FamilyKind, LeakageSection,
    OverheadSection, RangeSection, SweepSection,
};
use crate::error::CliError;
use crate::output::{emit, Cell, Format, Report, Table};
use crate::Command;

const DEFAULT_GAMMA: f64 = 0.62;

pub fn run(command: &Command, base: ExperimentConfig, format: Format, sequential: bool) -> Result<(), CliError> {
    let execution = if sequential { Execution::Sequential } else { Execution::Parallel };
    let ctx = Context { base, format, execution };
    match command {
        Command::Modulate(a) => ctx.modulate(a),
        Command::Impair(a) => ctx.impair(a),
        Command::Spot(a) => ctx.spot(a),
        Command::Curves(a) => ctx.curves(a),
        Command::Leakage(a) => ctx.leakage(a),
        Command::Sweep(a) => ctx.sweep(a),
        Command::Range(a) => ctx.range(a),
        Command::Overhead(a) => ctx.overhead(a),
        Command::CodebookVerify(a) => ctx.codebook_verify(a),
    }
}

struct Context {
    base: ExperimentConfig,
    format: Format,
    execution: Execution,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn required<'a>(path: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, CliError> {
    path.as_deref()
        .ok_or_else(|| CliError::invalid(format!("missing {flag}")))
}

impl Context {
    /// A fresh document holding only the shared fields a command uses.
    fn scoped(&self, fields: &[&str]) -> ExperimentConfig {
        let b = &self.base;
        let keep = |name: &str| fields.contains(&name);
        ExperimentConfig {
            version: b.version,
            seed: b.seed.filter(|_| keep("seed")),
            trials: b.trials.filter(|_| keep("trials")),
            gamma: b.gamma.filter(|_| keep("gamma")),
            snr_db: b.snr_db.filter(|_| keep("snr_db")),
            codebook: b.codebook.clone().filter(|_| keep("codebook")),
            input: b.input.clone().filter(|_| keep("input")),
            out: b.out.clone().filter(|_| keep("out")),
            layout: b.layout.clone().filter(|_| keep("layout")),
            ..Default::default()
        }
    }

    fn plan(&self, config: &ExperimentConfig, what: &str) -> Result<TrialPlan, CliError> {
        let seed = config.require_seed(what)?;
        Ok(TrialPlan::new(config.trials(), seed).with_execution(self.execution))
    }

    fn report(&self, command: &str, config: &ExperimentConfig, tables: Vec<Table>, notes: Vec<String>) -> Result<Report, CliError> {
        Ok(Report {
            command: command.to_string(),
            config: serde_json::to_value(config)?,
            config_toml: config.to_toml()?,
            tables,
            notes,
        })
    }

    fn finish(&self, report: Report, out: Option<&Path>) -> Result<(), CliError> {
        emit(&report.render(self.format)?, out)
    }

    fn modulate(&self, args: &crate::ModulateArgs) -> Result<(), CliError> {
        let mut config = self.scoped(&["seed", "codebook", "out", "layout"]);
        let mut section = self.base.modulate.clone().unwrap_or_default();
        if args.index.is_some() {
            section.index = args.index;
        }
        set(&mut section.power, args.power);
        if args.papr_cap.is_some() {
            section.papr_cap_db = args.papr_cap;
        }
        set(&mut section.max_attempts, args.max_attempts);
        config.modulate = Some(section.clone());

        let out = required(&config.out, "--out (IQ file to write)")?.to_path_buf();
        let seed = config.require_seed("modulate (tag phases)")?;
        let layout = config.layout()?;
        let codebook = config.codebook()?;
        let mut rng = trial_rng(seed, 0);
        let index = match section.index {
            Some(i) if i >= codebook.len() => {
                return Err(CliError::invalid(format!(
                    "index {i} out of range: codebook has {} words",
                    codebook.len()
                )))
            }
            Some(i) => i,
            None => codebook.random_index(&mut rng),
        };
        let word = codebook.words()[index];
        let mask = codeword_to_mask(&word, &layout)?;
        let (frame, within_cap, attempts) = match section.papr_cap_db {
            Some(cap) => {
                let t = synthesize_tag_papr_limited(&mask, &layout, section.power, cap, &mut rng, section.max_attempts)?;
                (t.frame, Some(t.within_cap), t.attempts)
            }
            None => {
                let spectrum = build_tag_spectrum(&mask, &layout, section.power, &mut rng)?;
                (synthesize_tag(&spectrum, &layout)?, None, 1)
            }
        };
        write_iq(&out, &frame, &layout).map_err(CliError::at(&out))?;

        let mut table = Table::new(
            "tag",
            &["index", "codeword", "samples", "papr_db", "mean_power", "body_energy", "within_cap", "attempts"],
        );
        let papr_db = if section.power > 0.0 { papr(&frame)? } else { 0.0 };
        table.push(vec![
            index.into(),
            word.to_string().into(),
            frame.len().into(),
            papr_db.into(),
            frame.mean_power().into(),
            energy(&frame.samples()[layout.cp_len()..]).into(),
            within_cap.map_or(Cell::from("n/a"), Cell::from),
            attempts.into(),
        ]);
        let mut notes = Vec::new();
        if within_cap == Some(false) {
            notes.push(format!("PAPR cap not met after {attempts} attempts; best draw written"));
        }
        let report = self.report("modulate", &config, vec![table], notes)?;
        self.finish(report, None)
    }

    fn impair(&self, args: &crate::ImpairArgs) -> Result<(), CliError> {
        let mut config = self.scoped(&["seed", "codebook", "input", "out"]);
        let mut channel = self.base.channel.clone().unwrap_or_default();
        if self.base.snr_db.is_some() {
            channel.snr_db = self.base.snr_db;
        }
        set(&mut channel.cfo, args.cfo);
        set(&mut channel.max_cfo, args.max_cfo);
        set(&mut channel.fading, args.fading);
        if let Some(kind) = args.interference {
            let previous = channel.interference.take();
            channel.interference = Some(InterferenceSpec {
                kind,
                sir_db: args.sir.or(previous.as_ref().map(|p| p.sir_db)).unwrap_or(0.0),
                offset: args
                    .interference_offset
                    .or(previous.as_ref().map(|p| p.offset))
                    .unwrap_or(0),
            });
        }
        channel.validate()?;
        config.channel = Some(channel.clone());
        if args.input.is_some() {
            config.input = args.input.clone();
        }

        let input = required(&config.input, "--input")?.to_path_buf();
        let out = required(&config.out, "--out (IQ file to write)")?.to_path_buf();
        let (frame, meta) = read_iq(&input).map_err(CliError::at(&input))?;
        let layout = meta.layout.clone();
        let impaired = if channel.is_identity() {
            frame.clone()
        } else {
            if is_random(&channel) {
                config.require_seed("impair (noise, fading or interference)")?;
            }
            let codebook = match &channel.interference {
                Some(spec) if spec.kind == InterferenceKind::Tag => Some(config.codebook()?),
                _ => None,
            };
            let mut rng = trial_rng(config.seed.unwrap_or(0), 0);
            channel.apply(&frame, &layout, codebook.as_ref(), &mut rng)?
        };
        write_iq(&out, &impaired, &layout).map_err(CliError::at(&out))?;

        let mut table = Table::new(
            "power",
            &["samples", "input_mean_power", "output_mean_power", "output_over_input_db"],
        );
        let ratio_db = power_ratio_db(&frame, &impaired);
        table.push(vec![
            frame.len().into(),
            frame.mean_power().into(),
            impaired.mean_power().into(),
            ratio_db.into(),
        ]);
        let report = self.report("impair", &config, vec![table], Vec::new())?;
        self.finish(report, None)
    }

    fn spot(&self, args: &crate::SpotArgs) -> Result<(), CliError> {
        let mut config = self.scoped(&["gamma", "codebook", "input", "out", "layout"]);
        let mut section: DetectorSection = self.base.detector.clone().unwrap_or_default();
        if let Some(db) = args.carrier_sense {
            section.carrier_sense = true;
            section.carrier_sense_db = db;
        }
        if args.no_carrier_sense {
            section.carrier_sense = false;
        }
        set(&mut section.denominator, args.denominator);
        set(&mut section.noise_smoothing, args.noise_smoothing);
        if args.initial_noise.is_some() {
            section.initial_noise = args.initial_noise;
        }
        config.detector = Some(section.clone());
        config.gamma = Some(config.gamma.unwrap_or(DEFAULT_GAMMA));
        if args.input.is_some() {
            config.input = args.input.clone();
        }

        let input = required(&config.input, "--input")?.to_path_buf();
        let codebook = config.codebook()?;
        let (frame, meta) = read_iq(&input).map_err(CliError::at(&input))?;
        let layout = match &config.layout {
            Some(l) if *l != meta.layout => {
                return Err(CliError::invalid("configured layout differs from the IQ file's layout"))
            }
            _ => meta.layout.clone(),
        };
        let mut det = DetectorConfig::new(config.gamma.unwrap_or(DEFAULT_GAMMA), layout, codebook.clone());
        det.carrier_sense_db = section.carrier_sense.then_some(section.carrier_sense_db);
        det.denominator = section.denominator;
        det.noise_smoothing = section.noise_smoothing;
        det.initial_noise = section.initial_noise;
        if let Some(limit) = section.com_limit {
            det.com_limit = limit;
        }
        let report = Detector::new(det)?.spot(&frame)?;

        let mut events = Table::new(
            "events",
            &["interval_start", "time_s", "codeword_index", "codeword", "strength", "com_position", "com_valid", "snr_estimate_db"],
        );
        for e in &report.events {
            events.push(vec![
                e.interval_start.into(),
                (e.interval_start as f64 / frame.sample_rate()).into(),
                e.codeword_index.into(),
                codebook.words()[e.codeword_index].to_string().into(),
                e.strength.into(),
                e.com_position.into(),
                e.com_valid.into(),
                e.snr_estimate_db.into(),
            ]);
        }
        let s = &report.summary;
        let mut summary = Table::new(
            "summary",
            &["samples", "duration_s", "windows_total", "windows_analyzed", "windows_gated", "candidates", "detections"],
        );
        summary.push(vec![
            frame.len().into(),
            (frame.len() as f64 / frame.sample_rate()).into(),
            s.windows_total.into(),
            s.windows_analyzed.into(),
            s.windows_gated.into(),
            s.candidates.into(),
            s.detections.into(),
        ]);
        let out = config.out.clone();
        let report = self.report("spot", &config, vec![events, summary], Vec::new())?;
        self.finish(report, out.as_deref())
    }

    fn curves(&self, args: &crate::CurvesArgs) -> Result<(), CliError> {
        let mut config = self.scoped(&["seed", "trials", "codebook", "out", "layout"]);
        let mut section: CurvesSection = self.base.curves.clone().unwrap_or_default();
        if let Some(g) = self.base.gamma {
            section.gammas = vec![g];
        }
        if let Some(s) = self.base.snr_db {
            section.snr_grid = vec![s];
        }
        set(&mut section.gammas, args.gammas.clone());
        set(&mut section.snr_grid, args.snr_grid.clone());
        set(&mut section.fading, args.fading.clone());
        set(&mut section.families, args.families.clone());
        set(&mut section.denominator, args.denominator);
        if section.snr_grid.is_empty() || section.fading.is_empty() || section.families.is_empty() {
            return Err(CliError::invalid("snr grid, fading list and family list must be nonempty"));
        }
        let monte_carlo = section.families.iter().any(|f| *f != FamilyKind::Single);
        if monte_carlo {
            config.trials = Some(config.trials());
        } else {
            config.trials = None;
            config.seed = None;
        }
        config.curves = Some(section.clone());

        let layout = config.layout()?;
        let plan = if monte_carlo { Some(self.plan(&config, "curves with Monte Carlo families")?) } else { None };
        let code = if section.families.contains(&FamilyKind::Code) {
            Some(CodeFamily::Explicit(config.codebook()?))
        } else {
            None
        };

        let mut roc = Table::new(
            "roc",
            &["fading", "family", "snr_db", "gamma", "pd", "pd_ci95", "pf", "pf_ci95", "imprecise"],
        );
        let mut pm = Table::new("misclassification", &["fading", "family", "snr_db", "pm", "pm_ci95"]);
        for &fading in &section.fading {
            let fading_name = serde_name(&fading)?;
            for &snr in &section.snr_grid {
                for &kind in &section.families {
                    let (name, curve) = match kind {
                        FamilyKind::Single => {
                            let mut model = AnalysisModel::new(snr, fading, DEFAULT_GAMMA).with_denominator(section.denominator);
                            model.layout = layout.clone();
                            ("single".to_string(), closed_form_roc(&model, &section.gammas)?)
                        }
                        FamilyKind::Code | FamilyKind::Unencoded => {
                            let family = match kind {
                                FamilyKind::Code => code.clone().expect("loaded above"),
                                _ => CodeFamily::Unencoded,
                            };
                            let plan = plan.expect("seeded above");
                            let curve = family_roc_mc(&family, &layout, snr, fading, section.denominator, &section.gammas, &plan)?;
                            let miss = pm_mc(snr, &family, &layout, fading, &plan)?;
                            pm.push(vec![
                                fading_name.clone().into(),
                                family.name().into(),
                                snr.into(),
                                miss.estimate().into(),
                                miss.ci95().into(),
                            ]);
                            (family.name(), curve)
                        }
                    };
                    push_curve(&mut roc, &fading_name, &name, snr, &curve);
                }
            }
        }
        let mut tables = vec![roc];
        if !pm.rows.is_empty() {
            tables.push(pm);
        }
        let out = config.out.clone();
        let report = self.report("curves", &config, tables, Vec::new())?;
        self.finish(report, out.as_deref())
    }

    fn leakage(&self, args: &crate::LeakageArgs) -> Result<(), CliError> {
        let mut config = self.scoped(&["out", "layout"]);
        let mut section: LeakageSection = self.base.leakage.clone().unwrap_or_default();
        set(&mut section.max_offset, args.max_offset);
        set(&mut section.points, args.points);
        set(&mut section.blocks, args.blocks);
        if section.max_offset.is_nan() || section.max_offset < 0.0 || section.points < 2 {
            return Err(CliError::invalid("max_offset must be nonnegative and points at least 2"));
        }
        config.leakage = Some(section.clone());
        let layout = config.layout()?;

        let mut offsets = Table::new("offset", &["offset", "leaked_fraction"]);
        for i in 0..section.points {
            let delta = section.max_offset * i as f64 / (section.points - 1) as f64;
            offsets.push(vec![delta.into(), leak_at(delta, &layout).into()]);
        }
        let mut blocks = Table::new("block_bound", &["distance", "bound"]);
        for k in 1..=section.blocks {
            blocks.push(vec![k.into(), leakage_block(k).into()]);
        }
        let mut expected = Table::new("expected", &["max_offset", "expected_leak", "expected_leak_percent"]);
        let leak = expected_offset_leak(section.max_offset, &layout);
        expected.push(vec![section.max_offset.into(), leak.into(), (100.0 * leak).into()]);
        let out = config.out.clone();
        let report = self.report("leakage", &config, vec![expected, offsets, blocks], Vec::new())?;
        self.finish(report, out.as_deref())
    }

    fn sweep(&self, args: &crate::SweepArgs) -> Result<(), CliError> {
        let mut config = self.scoped(&["seed", "trials", "out"]);
        let mut section: SweepSection = self.base.sweep.clone().unwrap_or_default();
        set(&mut section.carriers, args.carriers);
        set(&mut section.alpha, args.alpha);
        section.verify |= args.verify;
        let snr = self.base.snr_db.unwrap_or(0.0);
        config.snr_db = Some(snr);
        if section.verify {
            config.trials = Some(config.trials());
        } else {
            config.trials = None;
            config.seed = None;
        }
        config.sweep = Some(section.clone());

        let points = sweep_active_carriers(section.carriers, snr, section.alpha)?;
        let plan = if section.verify { Some(self.plan(&config, "sweep --verify")?) } else { None };
        let mut columns = vec!["q", "gamma0", "pf"];
        if plan.is_some() {
            columns.extend(["pd_mc", "pd_mc_ci95"]);
        }
        let mut table = Table::new("sweep", &columns);
        for p in &points {
            let mut row: Vec<Cell> = vec![p.q.into(), p.gamma0.into(), p.pf.into()];
            if let Some(plan) = &plan {
                let pd = sweep_pd_mc(p, section.carriers, snr, section.alpha, plan);
                row.extend([pd.estimate().into(), pd.ci95().into()]);
            }
            table.push(row);
        }
        let mut best = Table::new("optimum", &["carriers", "q", "q_over_carriers"]);
        if let Some(q) = optimal_q(&points) {
            best.push(vec![section.carriers.into(), q.into(), (q as f64 / section.carriers as f64).into()]);
        }
        let out = config.out.clone();
        let report = self.report("sweep", &config, vec![best, table], Vec::new())?;
        self.finish(report, out.as_deref())
    }

    fn range(&self, args: &crate::RangeArgs) -> Result<(), CliError> {
        let mut config = self.scoped(&["out"]);
        let mut section: RangeSection = self.base.range.clone().unwrap_or_default();
        set(&mut section.gap_db, args.gap.clone());
        set(&mut section.exponents, args.exponent.clone());
        config.range = Some(section.clone());
        let mut table = Table::new("range", &["gap_db", "exponent", "range_gain"]);
        for &gap in &section.gap_db {
            for &d in &section.exponents {
                table.push(vec![gap.into(), d.into(), range_gain(gap, d)?.into()]);
            }
        }
        let out = config.out.clone();
        let report = self.report("range", &config, vec![table], Vec::new())?;
        self.finish(report, out.as_deref())
    }

    fn overhead(&self, args: &crate::OverheadArgs) -> Result<(), CliError> {
        let mut config = self.scoped(&["out"]);
        let mut section: OverheadSection = self.base.overhead.clone().unwrap_or_default();
        set(&mut section.bytes, args.bytes.clone());
        set(&mut section.bytes_per_frame, args.bytes_per_frame);
        set(&mut section.sync_frames, args.sync_frames);
        set(&mut section.tag_frames, args.tag_frames);
        config.overhead = Some(section.clone());
        let accounting = FrameAccounting {
            bytes_per_frame: section.bytes_per_frame,
            sync_frames: section.sync_frames,
            tag_frames: section.tag_frames,
        };
        let mut table = Table::new("overhead", &["bytes", "payload_frames", "packet_frames", "overhead", "overhead_percent"]);
        for &bytes in &section.bytes {
            let fraction = overhead(bytes, &accounting)?;
            let payload = accounting.payload_frames(bytes);
            table.push(vec![
                bytes.into(),
                payload.into(),
                (payload + accounting.sync_frames).into(),
                fraction.into(),
                (100.0 * fraction).into(),
            ]);
        }
        let out = config.out.clone();
        let report = self.report("overhead", &config, vec![table], Vec::new())?;
        self.finish(report, out.as_deref())
    }

    fn codebook_verify(&self, args: &crate::CodebookVerifyArgs) -> Result<(), CliError> {
        let mut config = self.scoped(&["codebook", "out", "layout"]);
        if args.path.is_some() {
            config.codebook = args.path.clone();
        }
        let codebook = config.codebook()?;
        let layout = config.layout()?;
        let measured = verify_min_distance(codebook.words())?;
        let fits_layout = codebook.masks(&layout).is_ok();

        let mut table = Table::new(
            "codebook",
            &["name", "word_length", "words", "declared_min_distance", "measured_min_distance", "fits_layout"],
        );
        table.push(vec![
            codebook.name().into(),
            codebook.word_length().into(),
            codebook.len().into(),
            codebook.declared_min_distance().into(),
            measured.into(),
            fits_layout.into(),
        ]);
        let mut weights = vec![0usize; codebook.word_length() + 1];
        for w in codebook.words() {
            weights[w.bits().count_ones() as usize] += 1;
        }
        let mut spectrum = Table::new("weights", &["weight", "count"]);
        for (weight, &count) in weights.iter().enumerate().filter(|(_, c)| **c > 0) {
            spectrum.push(vec![weight.into(), count.into()]);
        }
        let out = config.out.clone();
        let report = self.report("codebook-verify", &config, vec![table, spectrum], Vec::new())?;
        self.finish(report, out.as_deref())?;
        if !fits_layout {
            return Err(CliError::invalid(format!(
                "codebook words have length {}, layout has {} groups",
                codebook.word_length(),
                layout.groups
            )));
        }
        Ok(())
    }
}

fn is_random(channel: &ChannelSpec) -> bool {
    channel.snr_db.is_some() || channel.fading != Fading::None || channel.interference.is_some()
}

fn power_ratio_db(input: &IqFrame, output: &IqFrame) -> f64 {
    let (a, b) = (input.mean_power(), output.mean_power());
    if a > 0.0 && b > 0.0 {
        10.0 * (b / a).log10()
    } else {
        f64::NAN
    }
}

fn serde_name<T: serde::Serialize>(value: &T) -> Result<String, CliError> {
    match serde_json::to_value(value)? {
        serde_json::Value::String(s) => Ok(s),
        other => Ok(other.to_string()),
    }
}

fn push_curve(table: &mut Table, fading: &str, family: &str, snr: f64, curve: &RocCurve) {
    for p in &curve.points {
        table.push(vec![
            fading.into(),
            family.into(),
            snr.into(),
            p.gamma.into(),
            p.pd.into(),
            p.pd_ci95.into(),
            p.pf.into(),
            p.pf_ci95.into(),
            p.imprecise.into(),
        ]);
    }
}
