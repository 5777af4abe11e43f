use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use twinbeam_core::config::{Config, FilterKind, FilterSection, SpectrumSource};
use twinbeam_core::fit::fit_overlap;
use twinbeam_core::jsa::{self, spectral_summary, DEFAULT_SUPERGAUSSIAN_ORDER};
use twinbeam_core::montecarlo::{extrapolate_klyshko, simulate, SimConfig};
use twinbeam_core::schmidt::{default_delay_range, DEFAULT_RESIDUAL_WEIGHT};
use twinbeam_core::twinstats::{cross_correlation, klyshko, mean_n_from_cross, visibility_full, visibility_approx};
use twinbeam_core::{
    apply_filter, build_jsa, decompose, delay_compensated_overlap, efficiency_sweep, io, jsi_linewidth, spectral_overlap,
    units, validation, Cut, CountRecord, DeviceSpec, JointAmplitude, Result,
};

use crate::output::Artifact;

/// What a command produced: files to publish and text for standard output.
#[derive(Default)]
pub struct Outcome {
    pub artifacts: Vec<Artifact>,
    pub stdout: String,
    /// Set when the command ran but its verdict is negative.
    pub failed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum FilterPreset {
    /// The `[filter]` section of the configuration.
    Custom,
    /// No filter.
    None,
    /// 12 nm Gaussian on both arms.
    G12,
    /// 40 nm super-Gaussian on both arms.
    Sg40,
}

impl FilterPreset {
    pub fn apply(self, cfg: &mut Config) {
        let preset = |shape, width| FilterSection { shape, width_nm: Some(width), ..FilterSection::default() };
        match self {
            FilterPreset::Custom => {}
            FilterPreset::None => cfg.filter = FilterSection::default(),
            FilterPreset::G12 => cfg.filter = preset(FilterKind::Gaussian, 12.0),
            FilterPreset::Sg40 => {
                cfg.filter = FilterSection { order: DEFAULT_SUPERGAUSSIAN_ORDER, ..preset(FilterKind::Supergaussian, 40.0) }
            }
        }
    }
}

pub fn header(cfg: &Config, command: &str) -> Vec<String> {
    vec![
        format!("twinbeam {} {command}", env!("CARGO_PKG_VERSION")),
        "effective configuration:".into(),
        cfg.to_toml(),
    ]
}

fn render<F>(f: F) -> Result<Vec<u8>>
where
    F: FnOnce(&mut Vec<u8>) -> Result<()>,
{
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

struct Spectral {
    spec: DeviceSpec,
    jsa: JointAmplitude,
    transmitted: Option<f64>,
}

fn spectral(cfg: &Config, grid: jsa::FrequencyGrid) -> Result<Spectral> {
    let spec = cfg.device_spec()?;
    let raw = build_jsa(&spec, &cfg.pump_spec()?, grid, cfg.approximation())?;
    match cfg.filter_spec()? {
        Some(filter) => {
            let f = apply_filter(&raw, &filter)?;
            Ok(Spectral { spec, jsa: f.jsa, transmitted: Some(f.transmitted_fraction) })
        }
        None => Ok(Spectral { spec, jsa: raw, transmitted: None }),
    }
}

fn filter_line(cfg: &Config, transmitted: Option<f64>) -> String {
    match (cfg.filter.shape, transmitted) {
        (FilterKind::None, _) | (_, None) => "filter: none\n".into(),
        (shape, Some(t)) => format!(
            "filter: {shape:?} {:.3} nm, transmitted fraction {t:.6}\n",
            cfg.filter.width_nm.unwrap_or(f64::NAN)
        ),
    }
}

pub fn jsa(cfg: &Config, out_dir: &Path, dump: bool) -> Result<Outcome> {
    let wide = spectral(cfg, cfg.grid()?)?;
    let fine = spectral(cfg, cfg.cut_grid()?)?;
    let center_thz = units::rad_per_ps_to_thz(wide.spec.signal_center);
    let linewidth = jsi_linewidth(&fine.jsa, Cut::AntiDiagonal)?;
    let summary = spectral_summary(&wide.jsa, &wide.spec)?;
    let tilt = wide.spec.pm_tilt_deviation()?;
    let head = header(cfg, "jsa");

    let mut artifacts = vec![
        Artifact::new(out_dir.join("jsa_marginals.csv"), render(|b| io::write_marginals_csv(b, &wide.jsa, &head))?),
        Artifact::new(
            out_dir.join("jsa_cut.csv"),
            render(|b| {
                let (t, y) = jsa::jsi_cut(&fine.jsa, Cut::AntiDiagonal);
                io::write_cut_csv(b, &t, &y, &head)
            })?,
        ),
    ];
    if dump {
        artifacts.push(Artifact::new(out_dir.join("jsa_grid.txt"), render(|b| io::write_grid_dump(b, &wide.jsa, &head))?));
    }

    let mut s = filter_line(cfg, wide.transmitted);
    let _ = writeln!(s, "anti-diagonal JSI linewidth: {:.4} nm", units::angular_width_to_nm(linewidth, center_thz));
    let _ = writeln!(s, "signal: center {:.2} nm, FWHM {:.2} nm", summary.signal_center_nm, summary.signal_fwhm_nm);
    let _ = writeln!(s, "idler: center {:.2} nm, FWHM {:.2} nm", summary.idler_center_nm, summary.idler_fwhm_nm);
    let _ = writeln!(s, "phase-matching tilt from -45 deg: {tilt:.4} deg");
    for a in &artifacts {
        let _ = writeln!(s, "wrote {}", a.path.display());
    }
    Ok(Outcome { artifacts, stdout: s, failed: false })
}

pub fn overlap(cfg: &Config, compensate: bool) -> Result<Outcome> {
    let sp = spectral(cfg, cfg.grid()?)?;
    let o = spectral_overlap(&sp.jsa)?;
    let compensated = if compensate {
        Some(delay_compensated_overlap(&sp.jsa, default_delay_range(&sp.spec))?)
    } else {
        None
    };
    let mut s = filter_line(cfg, sp.transmitted);
    let _ = writeln!(s, "|O| = {:.6}", o.norm());
    let _ = writeln!(s, "arg O = {:.6} rad", o.arg());
    if let Some(c) = compensated {
        let _ = writeln!(s, "delay-compensated |O| = {:.6} at tau = {:.6} ps", c.overlap, c.tau);
    }
    Ok(Outcome { stdout: s, ..Outcome::default() })
}

pub fn schmidt(cfg: &Config, out_dir: &Path, modes: usize, residual: Option<f64>) -> Result<Outcome> {
    let sp = spectral(cfg, cfg.grid()?)?;
    let data = decompose(&sp.jsa, residual.unwrap_or(DEFAULT_RESIDUAL_WEIGHT))?;
    let direct = spectral_overlap(&sp.jsa)?;
    let via_modes = data.overlap()?;
    let density = data.density_overlap()?;
    let head = header(cfg, "schmidt");

    let mut artifacts = vec![Artifact::new(
        out_dir.join("schmidt_spectrum.csv"),
        render(|b| io::write_schmidt_csv(b, data.coefficients(), &head))?,
    )];
    let g = *data.grid();
    for k in 0..modes.min(data.rank()) {
        artifacts.push(Artifact::new(
            out_dir.join(format!("schmidt_mode_{k}_signal.csv")),
            render(|b| io::write_mode_csv(b, &g.axis_s(), data.signal_mode(k), &head))?,
        ));
        artifacts.push(Artifact::new(
            out_dir.join(format!("schmidt_mode_{k}_idler.csv")),
            render(|b| io::write_mode_csv(b, &g.axis_i(), data.idler_mode(k), &head))?,
        ));
    }

    let mut s = filter_line(cfg, sp.transmitted);
    let _ = writeln!(s, "rank kept: {}", data.rank());
    let _ = writeln!(s, "effective mode number K = {:.4}", data.k_eff());
    let _ = writeln!(s, "purity 1/K = {:.6}", data.purity());
    let _ = writeln!(s, "discarded weight: {:.3e}", data.truncation_residual());
    let _ = writeln!(s, "|O| from modes = {:.6}, from grid = {:.6}", via_modes.norm(), direct.norm());
    let _ = writeln!(s, "density overlap A = {density:.6}");
    for a in &artifacts {
        let _ = writeln!(s, "wrote {}", a.path.display());
    }
    Ok(Outcome { artifacts, stdout: s, failed: false })
}

pub fn visibility(cfg: &Config, overlap: f64, mean_ns: &[f64], output: Option<&Path>) -> Result<Outcome> {
    let (eta1, eta2) = (cfg.detection.eta1, cfg.detection.eta2);
    let rows = mean_ns
        .iter()
        .map(|&n| Ok((n, visibility_approx(overlap, n), visibility_full(overlap, n, eta1, eta2)?)))
        .collect::<Result<Vec<_>>>()?;
    let mut head = header(cfg, "visibility");
    head.push(format!("overlap O = {overlap}, eta1 = {eta1}, eta2 = {eta2}"));
    head.push("V_approx = (1 + O) / (3 - O + 4 n)".into());
    head.push("V_full = ((1 + O) + n (1 - c)) / ((3 - O) + 3 n + n c), c = (eta1/eta2 + eta2/eta1) / 2".into());
    let text = render(|b| {
        io::write_header(b, &head)?;
        writeln!(b, "mean_n,V_approx,V_full")?;
        for (n, a, f) in &rows {
            writeln!(b, "{n:.10},{a:.12},{f:.12}")?;
        }
        Ok(())
    })?;
    Ok(to_file_or_stdout(text, output))
}

fn to_file_or_stdout(text: Vec<u8>, output: Option<&Path>) -> Outcome {
    match output {
        Some(path) => Outcome {
            stdout: format!("wrote {}\n", path.display()),
            artifacts: vec![Artifact::new(path, text)],
            failed: false,
        },
        None => Outcome { stdout: String::from_utf8_lossy(&text).into_owned(), ..Outcome::default() },
    }
}

fn sim_config(cfg: &Config) -> Result<SimConfig> {
    match cfg.sim.spectrum {
        SpectrumSource::Uniform => cfg.sim_config(None),
        SpectrumSource::Schmidt => {
            let sp = spectral(cfg, cfg.grid()?)?;
            let data = decompose(&sp.jsa, DEFAULT_RESIDUAL_WEIGHT)?;
            cfg.sim_config(Some(data.coefficients()))
        }
    }
}

fn estimator_lines(s: &mut String, rec: &CountRecord) {
    match klyshko(rec) {
        Ok(k) => {
            let _ = writeln!(
                s,
                "Klyshko eta_s = {:.5} +/- {:.5}, eta_i = {:.5} +/- {:.5}",
                k.signal.value, k.signal.stderr, k.idler.value, k.idler.stderr
            );
        }
        Err(e) => {
            let _ = writeln!(s, "Klyshko efficiencies unavailable: {e}");
        }
    }
    match cross_correlation(rec) {
        Ok(g) => {
            let _ = writeln!(s, "C/A = {:.4} +/- {:.4}", g.value, g.stderr);
        }
        Err(e) => {
            let _ = writeln!(s, "C/A unavailable: {e}");
        }
    }
    match mean_n_from_cross(rec) {
        Ok(n) => {
            let _ = writeln!(s, "<n> from C/A = {:.5} +/- {:.5}", n.value, n.stderr);
        }
        Err(e) => {
            let _ = writeln!(s, "<n> from C/A unavailable: {e}");
        }
    }
}

pub fn montecarlo(cfg: &Config, output: Option<&Path>) -> Result<Outcome> {
    let sim = sim_config(cfg)?;
    let mut head = header(cfg, "montecarlo");
    let mut s = String::new();
    let records: Vec<CountRecord> = if cfg.sim.powers.is_empty() {
        let out = simulate(&sim)?;
        for w in &out.warnings {
            log::warn!("{w}");
        }
        let _ = writeln!(
            s,
            "strategy {:?}, {} modes, <n> = {:.5}, K = {:.3}",
            out.strategy, out.modes, out.mean_n, out.k_eff
        );
        let r = out.record;
        let _ = writeln!(
            s,
            "gates {}, singles {} / {}, coincidences {}, accidentals {:.2}",
            r.gates,
            r.singles_s,
            r.singles_i,
            r.coincidences,
            r.accidentals()
        );
        estimator_lines(&mut s, &r);
        vec![r]
    } else {
        let points = efficiency_sweep(&sim, &cfg.sim.powers, cfg.sim.gain_sq_per_power)?;
        let _ = writeln!(s, "power,mean_n,eta_s,eta_s_err,eta_i,eta_i_err");
        for p in &points {
            let _ = writeln!(
                s,
                "{},{:.5},{:.6},{:.6},{:.6},{:.6}",
                p.power, p.mean_n, p.klyshko.signal.value, p.klyshko.signal.stderr, p.klyshko.idler.value, p.klyshko.idler.stderr
            );
        }
        let ex = extrapolate_klyshko(&points)?;
        let _ = writeln!(
            s,
            "zero-power eta_s = {:.5} +/- {:.5}, eta_i = {:.5} +/- {:.5}",
            ex.signal.intercept, ex.signal.intercept_se, ex.idler.intercept, ex.idler.intercept_se
        );
        head.push(format!("powers: {:?}", cfg.sim.powers));
        points.iter().map(|p| p.record).collect()
    };
    if let Some(path) = output {
        let text = render(|b| io::write_count_records(b, &records, &head))?;
        let _ = writeln!(s, "wrote {}", path.display());
        return Ok(Outcome { artifacts: vec![Artifact::new(path, text)], stdout: s, failed: false });
    }
    Ok(Outcome { stdout: s, ..Outcome::default() })
}

pub fn fit(cfg: &Config, input: &Path, output: Option<&PathBuf>) -> Result<Outcome> {
    let points = io::read_visibility_points(std::fs::File::open(input)?)?;
    let report = fit_overlap(&points, cfg.fit_model())?;
    let mut s = report.summary();
    s.push('\n');
    if let Some(path) = output {
        let mut head = header(cfg, "fit");
        head.push(format!("input: {}", input.display()));
        let text = render(|b| io::write_fit_report(b, &report, &points, &head))?;
        let _ = writeln!(s, "wrote {}", path.display());
        return Ok(Outcome { artifacts: vec![Artifact::new(path, text)], stdout: s, failed: false });
    }
    Ok(Outcome { stdout: s, ..Outcome::default() })
}

pub fn report(cfg: &Config, seed: u64) -> Result<Outcome> {
    let criteria = validation::run_all(cfg, seed)?;
    let mut s = String::new();
    for c in &criteria {
        let _ = writeln!(s, "{c}");
    }
    let failed = criteria.iter().filter(|c| !c.passed).count();
    let _ = writeln!(s, "{} of {} criteria passed", criteria.len() - failed, criteria.len());
    Ok(Outcome { stdout: s, failed: failed > 0, ..Outcome::default() })
}
