use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use serde::Serialize;

use super::config::{to_toml, BeatMode, RunConfig, TomoSource};
use super::{CliError, Command, Format};
use crate::analysis::{local_minima, SinusoidFit};
use crate::detection::{CoincidenceHistogram, DetectionConfig};
use crate::error::{Error, Result};
use crate::experiments::{calibrate_beat_background, envelope_histograms, scan_angles, BeatSetup, PolarizationSetup};
use crate::fixtures::{reference_density_matrix, singlet, singlet_density};
use crate::optics::{catalog_all, Branch, Pol, PolarizerState, SourceParams};
use crate::plot::{Chart, Series};
use crate::qalgebra::{fidelity, fidelity_pure, PolDensityMatrix};
use crate::rng::GENERATOR;
use crate::tomography::{
    canonical_settings, chsh_optimize, mle_reconstruct, read_records_csv, sample_records, tomo_error_bars,
    write_records_csv, BootstrapSummary, ChshResult, DensityMatrixFile, TomoRecord,
};

/// Destination directory and the formats to write there.
pub struct Outputs {
    pub dir: PathBuf,
    pub formats: Vec<Format>,
}

impl Outputs {
    pub fn new(dir: PathBuf, formats: Vec<Format>) -> Self {
        Outputs { dir, formats }
    }

    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }

    fn write(&self, name: &str, contents: &str) -> Result<()> {
        fs::create_dir_all(&self.dir)?;
        let path = self.dir.join(name);
        fs::write(&path, contents)?;
        println!("wrote {}", path.display());
        Ok(())
    }

    fn histogram(&self, stem: &str, h: &CoincidenceHistogram) -> Result<()> {
        if self.wants(Format::Csv) {
            self.write(&format!("{stem}.csv"), &h.to_csv_string())?;
        }
        if self.wants(Format::Json) {
            self.write(&format!("{stem}.json"), &h.to_json_string()?)?;
        }
        Ok(())
    }

    fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        if self.wants(Format::Json) {
            let mut s = serde_json::to_string_pretty(value)?;
            s.push('\n');
            self.write(name, &s)?;
        }
        Ok(())
    }

    fn svg(&self, name: &str, chart: &Chart) -> Result<()> {
        if self.wants(Format::Svg) {
            self.write(name, &chart.render())?;
        }
        Ok(())
    }
}

fn warn(msg: &str) {
    eprintln!("warning: {msg}");
}

pub fn dispatch(command: &Command, cfg: &RunConfig, out: &Outputs) -> std::result::Result<(), CliError> {
    match command {
        Command::Envelope => envelope(cfg, out)?,
        Command::Beating => beating(cfg, out)?,
        Command::Polarization => polarization(cfg, out)?,
        Command::Tomography => tomography(cfg, out)?,
        Command::Chsh { rho } => chsh(cfg, rho.as_ref(), out)?,
        Command::States => states(out)?,
    }
    if !matches!(command, Command::States) {
        out.write("run_config.toml", &to_toml(cfg))?;
    }
    Ok(())
}

fn envelope(cfg: &RunConfig, out: &Outputs) -> Result<()> {
    let env = cfg.two_sided()?;
    let det = cfg.detection()?;
    let (expected, sampled) = envelope_histograms(&env, &det, cfg.detection.tau_max_ns)?;
    out.histogram("envelope_expected", &expected)?;
    out.histogram("envelope_sampled", &sampled)?;
    out.svg(
        "envelope.svg",
        &Chart::new("Coincidences without beam splitter", "tau (ns)", "counts per bin")
            .with(Series::scatter(
                "sampled",
                sampled.tau_centers.clone(),
                sampled.counts.clone(),
                None,
            ))
            .with(Series::line(
                "expected",
                expected.tau_centers.clone(),
                expected.counts.clone(),
            )),
    )?;
    let peak = expected.counts.iter().copied().fold(0.0, f64::max);
    println!(
        "envelope: {} bins, expected peak {:.1} counts/bin, sampled total {}",
        sampled.len(),
        peak,
        sampled.total()
    );
    Ok(())
}

#[derive(Serialize)]
struct FreeFit {
    frequency_mhz: f64,
    frequency_std_mhz: f64,
    fit: SinusoidFit,
}

#[derive(Serialize)]
struct BeatReport {
    generator: &'static str,
    seed: u64,
    mode: BeatMode,
    delta_rad_per_ns: f64,
    theta_set: f64,
    background_per_bin: f64,
    background_calibrated: bool,
    visibility: f64,
    visibility_std: f64,
    theta: f64,
    theta_std: f64,
    fit: SinusoidFit,
    free_period: Option<FreeFit>,
    minima_ns: Vec<f64>,
}

fn beating(cfg: &RunConfig, out: &Outputs) -> Result<()> {
    let det = cfg.detection()?;
    let base = BeatSetup::new(cfg.two_sided()?, cfg.beating_params(), det, cfg.detection.tau_max_ns)?;
    let (bg, calibrated) = match cfg.detection.background_per_bin {
        Some(bg) => (bg, false),
        None => (
            calibrate_beat_background(&base.with_background(0.0), cfg.beating.target())?,
            true,
        ),
    };
    let setup = base.with_background(bg);
    let run = setup.run(det.seed)?;

    let free_period = match run.free_period_fit() {
        Ok(fit) => Some(FreeFit {
            frequency_mhz: 1e3 / fit.period,
            frequency_std_mhz: 1e3 * fit.period_std / (fit.period * fit.period),
            fit,
        }),
        Err(e) => {
            warn(&format!("free-period fit failed: {e}"));
            None
        }
    };
    let fit = run.phase.fit;
    let fitted: Vec<f64> = run.normalized.tau.iter().map(|&t| fit.eval(t)).collect();
    let minima_ns = local_minima(&run.normalized.tau, &fitted, 2);

    let report = BeatReport {
        generator: GENERATOR,
        seed: det.seed,
        mode: cfg.beating.mode,
        delta_rad_per_ns: cfg.delta(),
        theta_set: setup.params.theta,
        background_per_bin: bg,
        background_calibrated: calibrated,
        visibility: run.phase.visibility,
        visibility_std: run.phase.visibility_std,
        theta: run.phase.theta,
        theta_std: run.phase.theta_std,
        fit,
        free_period,
        minima_ns,
    };

    out.histogram("beat_expected", &run.expected_signal)?;
    out.histogram("beat_sampled", &run.signal)?;
    out.histogram("beat_envelope", &run.envelope)?;
    if out.wants(Format::Csv) {
        let mut s = String::from("tau_ns,ratio,ratio_std,envelope\n");
        let n = &run.normalized;
        for i in 0..n.tau.len() {
            let _ = writeln!(s, "{},{},{},{}", n.tau[i], n.ratio[i], n.ratio_std[i], n.envelope[i]);
        }
        out.write("beat_normalized.csv", &s)?;
    }
    out.json("beat_report.json", &report)?;
    out.svg(
        "beat.svg",
        &Chart::new("Two-photon beating", "tau (ns)", "counts per bin")
            .with(Series::scatter(
                "sampled",
                run.signal.tau_centers.clone(),
                run.signal.counts.clone(),
                None,
            ))
            .with(Series::line(
                "expected",
                run.expected_signal.tau_centers.clone(),
                run.expected_signal.counts.clone(),
            )),
    )?;
    out.svg(
        "beat_normalized.svg",
        &Chart::new("Normalized beat", "tau (ns)", "beat / envelope")
            .with(Series::scatter(
                "normalized",
                run.normalized.tau.clone(),
                run.normalized.ratio.clone(),
                Some(run.normalized.ratio_std.clone()),
            ))
            .with(Series::line("fit", run.normalized.tau.clone(), fitted)),
    )?;
    println!(
        "beating: background {:.4}/bin, V = {:.4} ± {:.4}, theta = {:.4} ± {:.4} rad",
        bg, report.visibility, report.visibility_std, report.theta, report.theta_std
    );
    if let Some(f) = &report.free_period {
        println!(
            "beating: free-period frequency {:.3} ± {:.3} MHz",
            f.frequency_mhz, f.frequency_std_mhz
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct CurveReport {
    p3_deg: f64,
    background_per_point: f64,
    fit: SinusoidFit,
}

#[derive(Serialize)]
struct PolarizationReport {
    generator: &'static str,
    seed: u64,
    delta_rad_per_ns: f64,
    exposure_s: f64,
    curves: Vec<CurveReport>,
}

fn polarization(cfg: &RunConfig, out: &Outputs) -> Result<()> {
    let p = &cfg.polarization;
    let delta = 2.0 * PI * p.delta_mhz * 1e-3;
    if delta != 0.0 {
        warn(&format!(
            "polarization scan with a {} MHz frequency shift: polarization and frequency are coupled, \
             curves will not show the decoupled correlations",
            p.delta_mhz
        ));
    }
    let det = DetectionConfig {
        duration_s: p.exposure_s,
        background_per_bin: 0.0,
        ..cfg.detection()?
    };
    let p3_angles: Vec<f64> = p.p3_angles_deg.iter().map(|a| a.to_radians()).collect();
    let decoupled = PolarizationSetup {
        source: SourceParams::new(
            0.0,
            PolarizerState::linear(cfg.source.p1_deg.to_radians()),
            PolarizerState::linear(cfg.source.p2_deg.to_radians()),
        )?,
        envelope: cfg.envelope()?,
        detection: det,
        window_ns: p.window_ns,
        p3_angles,
        p4_angles: scan_angles(p.scan_step_deg)?,
        background_per_point: vec![0.0; p.p3_angles_deg.len()],
    };
    // Floors are a property of the detectors, so they come from the decoupled
    // source even when the scan itself runs with a shift.
    let floors = decoupled.calibrate_backgrounds(&p.target_visibilities)?;
    let setup = PolarizationSetup {
        source: SourceParams {
            delta,
            ..decoupled.source.clone()
        },
        background_per_point: floors.clone(),
        ..decoupled
    };
    let curves = setup.run(det.seed)?;

    if out.wants(Format::Csv) {
        let mut s = String::from("p3_deg,p4_deg,expected,counts\n");
        for c in &curves {
            for j in 0..c.p4_angles.len() {
                let _ = writeln!(
                    s,
                    "{},{},{},{}",
                    c.p3_angle.to_degrees(),
                    c.p4_angles[j].to_degrees(),
                    c.expected[j],
                    c.counts[j]
                );
            }
        }
        out.write("polarization.csv", &s)?;
    }
    let report = PolarizationReport {
        generator: GENERATOR,
        seed: det.seed,
        delta_rad_per_ns: delta,
        exposure_s: p.exposure_s,
        curves: curves
            .iter()
            .zip(&floors)
            .map(|(c, &bg)| CurveReport {
                p3_deg: c.p3_angle.to_degrees(),
                background_per_point: bg,
                fit: c.fit,
            })
            .collect(),
    };
    out.json("polarization_report.json", &report)?;
    let mut chart = Chart::new("Polarization correlation", "P4 (deg)", "coincidences");
    for c in &curves {
        let x: Vec<f64> = c.p4_angles.iter().map(|a| a.to_degrees()).collect();
        let err: Vec<f64> = c.counts.iter().map(|n| n.max(1.0).sqrt()).collect();
        let fine: Vec<f64> = (0..=360).map(f64::from).collect();
        let fitted: Vec<f64> = fine.iter().map(|&a| c.fit.eval(a)).collect();
        let label = format!("P3 = {} deg", c.p3_angle.to_degrees());
        chart = chart
            .with(Series::scatter(&label, x, c.counts.clone(), Some(err)))
            .with(Series::line(&format!("{label} fit"), fine, fitted));
    }
    out.svg("polarization.svg", &chart)?;
    for r in &report.curves {
        println!(
            "polarization: P3 = {} deg, V = {:.4} ± {:.4}",
            r.p3_deg, r.fit.visibility, r.fit.visibility_std
        );
    }
    Ok(())
}

fn source_state(cfg: &RunConfig) -> Result<PolDensityMatrix> {
    match cfg.tomography.source {
        TomoSource::Singlet => Ok(singlet_density()),
        TomoSource::Reference => Ok(reference_density_matrix()),
        TomoSource::MaximallyMixed => Ok(PolDensityMatrix::maximally_mixed()),
        TomoSource::Werner => PolDensityMatrix::werner(&singlet(), cfg.tomography.werner_p),
    }
}

#[derive(Serialize)]
struct TomographyReport {
    generator: &'static str,
    seed: u64,
    records_from: String,
    converged: bool,
    iterations: usize,
    evaluations: usize,
    n0_fit: f64,
    log_likelihood: f64,
    purity: f64,
    fidelity_singlet: f64,
    fidelity_source: Option<f64>,
    chsh: ChshResult,
    bootstrap: Option<BootstrapSummary>,
}

fn tomography(cfg: &RunConfig, out: &Outputs) -> Result<()> {
    let t = &cfg.tomography;
    let seed = cfg.detection.seed;
    let (records, truth, origin): (Vec<TomoRecord>, Option<PolDensityMatrix>, String) = match &t.records {
        Some(path) => {
            let f = fs::File::open(path)?;
            (read_records_csv(f)?, None, path.display().to_string())
        }
        None => {
            let rho = source_state(cfg)?;
            let recs = sample_records(&rho, t.n0, t.exposure_s, &canonical_settings(), seed)?;
            (recs, Some(rho), "simulated".to_string())
        }
    };
    let fit = match mle_reconstruct(&records) {
        Ok(f) => f,
        Err(Error::NotConverged { evaluations, best }) => {
            warn(&format!(
                "reconstruction hit the budget after {evaluations} evaluations; using the best iterate"
            ));
            *best
        }
        Err(e) => return Err(e),
    };
    let bootstrap = if t.bootstrap >= 2 {
        Some(tomo_error_bars(&records, t.bootstrap, seed)?)
    } else {
        None
    };
    let report = TomographyReport {
        generator: GENERATOR,
        seed,
        records_from: origin,
        converged: fit.converged,
        iterations: fit.iterations,
        evaluations: fit.evaluations,
        n0_fit: fit.n0,
        log_likelihood: fit.log_likelihood,
        purity: fit.rho.purity(),
        fidelity_singlet: fidelity_pure(&fit.rho, &singlet())?,
        fidelity_source: truth.as_ref().map(|r| fidelity(&fit.rho, r)),
        chsh: chsh_optimize(&fit.rho),
        bootstrap,
    };

    if out.wants(Format::Csv) {
        let mut buf = Vec::new();
        write_records_csv(&records, &mut buf)?;
        out.write("tomography_records.csv", &String::from_utf8_lossy(&buf))?;
    }
    out.json("rho.json", &DensityMatrixFile::from_density(&fit.rho))?;
    out.json("tomography_report.json", &report)?;
    let idx: Vec<f64> = (0..16).map(f64::from).collect();
    let re: Vec<f64> = (0..16).map(|k| fit.rho.get(k / 4, k % 4).re).collect();
    let im: Vec<f64> = (0..16).map(|k| fit.rho.get(k / 4, k % 4).im).collect();
    let (err_re, err_im) = match &report.bootstrap {
        Some(b) => (
            Some((0..16).map(|k| b.rho_std_re[k / 4][k % 4]).collect()),
            Some((0..16).map(|k| b.rho_std_im[k / 4][k % 4]).collect()),
        ),
        None => (None, None),
    };
    out.svg(
        "rho.svg",
        &Chart::new("Reconstructed density matrix, row-major", "element 4i + j", "value")
            .with(Series::scatter("Re rho", idx.clone(), re, err_re))
            .with(Series::scatter("Im rho", idx, im, err_im)),
    )?;
    println!(
        "tomography: F(singlet) = {:.4}, S_max = {:.4}{}",
        report.fidelity_singlet,
        report.chsh.s_max,
        report
            .bootstrap
            .as_ref()
            .map(|b| format!(" ± {:.4} ({} resamples)", b.s_std, b.resamples))
            .unwrap_or_default()
    );
    Ok(())
}

#[derive(Serialize)]
struct ChshReport {
    rho_from: String,
    violates_local_bound: bool,
    agreement: f64,
    result: ChshResult,
}

fn chsh(cfg: &RunConfig, rho_path: Option<&PathBuf>, out: &Outputs) -> Result<()> {
    let (rho, origin) = match rho_path {
        Some(p) => {
            let text = fs::read_to_string(p)?;
            let file: DensityMatrixFile = serde_json::from_str(&text)?;
            (file.to_density()?, p.display().to_string())
        }
        None => (source_state(cfg)?, format!("{:?}", cfg.tomography.source)),
    };
    let result = chsh_optimize(&rho);
    let report = ChshReport {
        rho_from: origin,
        violates_local_bound: result.violates_local_bound(),
        agreement: result.agreement(),
        result,
    };
    out.json("chsh_report.json", &report)?;
    println!(
        "chsh: S_max = {:.4} (direct search {:.4}), local bound {}",
        result.s_max,
        result.s_direct,
        if report.violates_local_bound {
            "violated"
        } else {
            "respected"
        }
    );
    Ok(())
}

fn ket_label(p3: Pol, p4: Pol, b: Branch) -> String {
    let (s3, s4) = match b {
        Branch::Port3Shifted => (",+d", ""),
        Branch::Port4Shifted => ("", ",+d"),
    };
    format!("|{p3:?}{s3}>3 |{p4:?}{s4}>4")
}

#[derive(Serialize)]
struct StateEntry {
    label: String,
    terms: Vec<(String, [f64; 2])>,
}

fn states(out: &Outputs) -> Result<()> {
    let mut entries = Vec::new();
    for (label, state) in catalog_all() {
        let terms: Vec<(String, [f64; 2])> = state
            .terms()
            .into_iter()
            .map(|(p3, p4, b, a)| (ket_label(p3, p4, b), [a.re, a.im]))
            .collect();
        let text: Vec<String> = terms.iter().map(|(k, a)| format!("{:+.4} {k}", a[0])).collect();
        println!("{label:<18} {}", text.join("  "));
        entries.push(StateEntry {
            label: label.to_string(),
            terms,
        });
    }
    if out.wants(Format::Json) {
        out.json("states.json", &entries)?;
    }
    Ok(())
}
