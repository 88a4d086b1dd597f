//! Experiment subcommands.

use std::io::Write;

use p2dyn::greenfn::{green_value, potential_grid, GreenFunction, GridBox, PotentialGrid, DEFAULT_MAX_ITER};
use p2dyn::invbranch::{
    backward_orbit_walk, contraction_profile, decay_diagnostics_with, floor_fraction, write_profiles_csv,
    BAND_LIMIT, BAND_WINDOW, EPSILON, MAX_ORBIT_LEN, MIN_PROFILES,
};
use p2dyn::localmodel::{
    self, g0, lemma_coupe_check, pair_mu0, pair_t11, pair_t22, psi_identity_defect, standard_test_functions, Verdict,
    STANDARD_SLICES,
};
use p2dyn::lyapunov::{
    point_exponents, summarize_exponents, write_point_exponents_csv, CocycleOptions, DEFAULT_CLOUD_SIZE,
    DEFAULT_ORBIT_LEN, MIN_ORBIT_LEN,
};
use p2dyn::measures::{sample_equilibrium, slice_pairing, trace_pairing, Direction, MIN_COUNT, MIN_DEPTH};
use p2dyn::record::{
    CloudRecord, GreenRecord, LyapunovRecord, OrbitRecord, PairingRecord, Record, VerdictRecord,
};
use p2dyn::{rng, HomPoint, HomPolyMap, PointCloudMeasure, TestFn, C64};
use serde_json::json;

use crate::config::{check_range, parse_point, parse_reals, parse_vector, Settings};
use crate::{
    op_err, CliError, CliResult, GreenArgs, LocalArgs, LocalCheck, LyapunovArgs, OrbitArgs, Output, PotentialKind,
    SampleArgs, SliceArgs, SliceDirection,
};

pub const DEFAULT_DEPTH: usize = 25;
pub const MAX_DEPTH: usize = 200;
pub const MAX_COUNT: usize = 10_000_000;
pub const MAX_LYAPUNOV_N: usize = 1000;
pub const DEFAULT_ORBITS: usize = 100;
pub const MAX_ORBITS: usize = 1_000_000;
pub const DEFAULT_SLICE_RES: usize = 32;
pub const MAX_SLICE_RES: usize = 96;
pub const MAX_LOCAL_RES: usize = 256;

/// Start of the backward walks unless `--start` is given: a generic point
/// off every exceptional set of the bundled maps.
pub fn default_start() -> HomPoint {
    HomPoint::new(C64::new(0.37, -0.21), C64::new(-0.52, 0.64), C64::new(1.0, 0.0)).expect("valid point")
}

fn depth(s: &Settings, flag: Option<usize>) -> CliResult<usize> {
    check_range("depth", flag.or(s.file.depth).unwrap_or(DEFAULT_DEPTH), MIN_DEPTH, MAX_DEPTH)
}

fn count(s: &Settings, flag: Option<usize>, default: usize) -> CliResult<usize> {
    check_range("count", flag.or(s.file.count).unwrap_or(default), MIN_COUNT, MAX_COUNT)
}

fn fibered(map: &HomPolyMap, command: &str) -> CliResult<()> {
    if map.is_fibered() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{command} samples by backward iteration and needs a fibered map")))
    }
}

pub fn green(s: &Settings, a: &GreenArgs, out: &Output) -> CliResult<()> {
    let m = s.require_map("green")?;
    let points: Vec<[C64; 3]> = a
        .points
        .iter()
        .map(|p| parse_vector(p, "--point"))
        .collect::<CliResult<_>>()?;
    let mut records = Vec::with_capacity(points.len());
    for x in &points {
        let g = green_value(&m.map, x, s.tol, DEFAULT_MAX_ITER).map_err(op_err("green_value"))?;
        records.push(Record::Green(GreenRecord {
            map: m.label.clone(),
            point: [x[0].re, x[0].im, x[1].re, x[1].im, x[2].re, x[2].im],
            value: g.value,
            iterations: g.iterations,
            residual: g.residual,
            tol: s.tol,
        }));
    }
    out.records(&format!("green-{}.jsonl", m.label), &records)
}

fn cloud(map: &HomPolyMap, depth: usize, count: usize, seed: u64, start: &HomPoint) -> CliResult<PointCloudMeasure> {
    sample_equilibrium(map, start, depth, count, seed).map_err(op_err("sample_equilibrium"))
}

pub fn sample_mu(s: &Settings, a: &SampleArgs, out: &Output) -> CliResult<()> {
    let m = s.require_map("sample-mu")?;
    let seed = s.require_seed("sample-mu")?;
    let depth = depth(s, a.depth)?;
    let count = count(s, a.count, DEFAULT_CLOUD_SIZE)?;
    let start = match &a.start {
        Some(t) => parse_point(t, "--start")?,
        None => default_start(),
    };
    fibered(&m.map, "sample-mu")?;
    let c = cloud(&m.map, depth, count, seed, &start)?.labeled(&m.label);
    let csv_name = format!("cloud-{}.csv", m.label);
    let csv = out.artifact(&csv_name, |w| c.write_csv(w))?;
    out.artifact(&format!("cloud-{}.meta.json", m.label), |w| writeln!(w, "{}", c.meta_json()))?;
    out.records(
        &format!("sample-mu-{}.jsonl", m.label),
        &[Record::Cloud(CloudRecord {
            map: m.label.clone(),
            depth,
            count: c.len(),
            seed,
            dropped: c.meta.dropped,
            csv: csv.unwrap_or_default(),
        })],
    )
}

pub fn lyapunov(s: &Settings, a: &LyapunovArgs, out: &Output) -> CliResult<()> {
    let m = s.require_map("lyapunov")?;
    let seed = s.require_seed("lyapunov")?;
    let depth = depth(s, a.depth)?;
    let count = count(s, a.count, DEFAULT_CLOUD_SIZE)?;
    let n = check_range("n", a.n.or(s.file.n).unwrap_or(DEFAULT_ORBIT_LEN), MIN_ORBIT_LEN, MAX_LYAPUNOV_N)?;
    fibered(&m.map, "lyapunov")?;
    let c = cloud(&m.map, depth, count, seed, &default_start())?;
    let opts = CocycleOptions::new(seed);
    let pts = point_exponents(&m.map, &c, n, &opts).map_err(op_err("point_exponents"))?;
    let e = summarize_exponents(&m.map, &c, n, &pts, &opts).map_err(op_err("exponent_pair"))?;
    out.artifact(&format!("lyapunov-{}-points.csv", m.label), |w| write_point_exponents_csv(&pts, w))?;
    out.records(
        &format!("lyapunov-{}.jsonl", m.label),
        &[Record::Lyapunov(LyapunovRecord {
            map: m.label.clone(),
            lambda1: e.lambda1,
            lambda2: e.lambda2,
            se1: e.se1,
            se2: e.se2,
            sum_via_det: e.sum_via_det,
            n,
            count: e.sample_count,
            seed,
        })],
    )
}

pub fn orbit(s: &Settings, a: &OrbitArgs, out: &Output) -> CliResult<()> {
    let m = s.require_map("orbit")?;
    let seed = s.require_seed("orbit")?;
    let depth = depth(s, a.depth)?;
    let orbits = check_range("orbits", a.orbits.or(s.file.orbits).unwrap_or(DEFAULT_ORBITS), MIN_PROFILES, MAX_ORBITS)?;
    let n = check_range("n", a.n.or(s.file.n).unwrap_or(BAND_WINDOW[1]), BAND_WINDOW[0] + 10, MAX_ORBIT_LEN)?;
    fibered(&m.map, "orbit")?;
    let c = cloud(&m.map, depth, orbits.max(MIN_COUNT), seed, &default_start())?;
    let walk_seed = rng::derive_seed(seed, 0x4F52);
    let mut profiles = Vec::with_capacity(orbits);
    let mut resampled = 0;
    for (i, x0) in c.points.iter().take(orbits).enumerate() {
        let o = backward_orbit_walk(&m.map, x0, n, walk_seed, i as u64).map_err(op_err("backward_orbit"))?;
        resampled += o.resampled;
        profiles.push(contraction_profile(&o).map_err(op_err("contraction_profile"))?);
    }
    let decay = decay_diagnostics_with(&profiles, m.map.degree(), [BAND_WINDOW[0], n.min(BAND_WINDOW[1])], BAND_LIMIT)
        .map_err(op_err("decay_diagnostics"))?;
    let floor = floor_fraction(&profiles, decay.lambda2, EPSILON);
    out.artifact(&format!("orbit-{}-profiles.csv", m.label), |w| write_profiles_csv(&profiles, w))?;
    out.records(
        &format!("orbit-{}.jsonl", m.label),
        &[Record::Orbit(OrbitRecord {
            map: m.label.clone(),
            orbits,
            n,
            seed,
            decay,
            floor_fraction: floor,
            resampled,
        })],
    )
}

fn bump_from(a: &SliceArgs) -> CliResult<TestFn> {
    let c = parse_reals(&a.center, "--center", 4)?;
    let r = match parse_reals(&a.radius, "--radius", 1) {
        Ok(v) => [v[0]; 4],
        Err(_) => {
            let v = parse_reals(&a.radius, "--radius", 4)?;
            [v[0], v[1], v[2], v[3]]
        }
    };
    if r.iter().any(|x| *x <= 0.0) {
        return Err(CliError::Usage("--radius must be positive".into()));
    }
    Ok(TestFn::Bump {
        center: [c[0], c[1], c[2], c[3]],
        radius: r,
    })
}

pub fn slice(s: &Settings, a: &SliceArgs, out: &Output) -> CliResult<()> {
    let res = check_range("res", a.res.or(s.file.res).unwrap_or(DEFAULT_SLICE_RES), 16, MAX_SLICE_RES)?;
    let b = parse_reals(&a.bbox, "--box", 2)?;
    if b[0] >= b[1] {
        return Err(CliError::Usage("--box needs lo < hi".into()));
    }
    if a.chart > 2 {
        return Err(CliError::Usage("--chart must be 0, 1 or 2".into()));
    }
    let bbox = GridBox::cube(b[0], b[1]);
    let phi = bump_from(a)?;
    let (label, grid) = match a.potential {
        PotentialKind::Green => {
            let m = s.require_map("slice")?;
            let gf = GreenFunction::new(&m.map);
            let grid = potential_grid(&gf, a.chart, bbox, [res; 4], s.tol).map_err(op_err("potential_grid"))?;
            (m.label, grid)
        }
        PotentialKind::Local => (
            "local".to_owned(),
            PotentialGrid::tabulate(a.chart, bbox, [res; 4], |z, w| g0(z, w).max(0.0)),
        ),
    };
    let (name, value) = match a.direction {
        SliceDirection::Z => ("slice_z", slice_pairing(&grid, &phi, Direction::Z)),
        SliceDirection::W => ("slice_w", slice_pairing(&grid, &phi, Direction::W)),
        SliceDirection::Trace => ("trace", trace_pairing(&grid, &phi)),
    };
    let value = value.map_err(op_err(name))?;
    out.artifact(&format!("slice-{label}.grid"), |w| grid.write_binary(w))?;
    let TestFn::Bump { center, radius } = &phi else {
        unreachable!("bump_from returns a bump")
    };
    out.records(
        &format!("slice-{label}.jsonl"),
        &[Record::Pairing(PairingRecord {
            name: name.to_owned(),
            value: value.value,
            error_estimate: value.error,
            parameters: json!({
                "potential": label,
                "chart": a.chart,
                "res": res,
                "box": [b[0], b[1]],
                "center": center,
                "radius": radius,
                "tol": s.tol,
            }),
        })],
    )
}

fn verdict_record(operation: String, test_function: &str, verdict: Verdict) -> Record {
    Record::Verdict(VerdictRecord {
        operation,
        test_function: test_function.to_owned(),
        verdict,
    })
}

/// `(1/8 + s/2)/(1 + 4s) − 1/8` at 1001 points of `[0, 1]`, as a verdict
/// against zero.
pub fn psi_identity_verdict() -> Verdict {
    let worst = (0..=1000)
        .map(|k| psi_identity_defect(k as f64 / 1000.0).abs())
        .fold(0.0, f64::max);
    Verdict {
        lhs: worst,
        rhs: 0.0,
        lhs_error: 0.0,
        rhs_error: 0.0,
        pass: worst <= 4.0 * f64::EPSILON,
    }
}

pub fn localmodel(s: &Settings, a: &LocalArgs, out: &Output) -> CliResult<()> {
    let res = check_range("res", a.res.or(s.file.res).unwrap_or(localmodel::DEFAULT_RES_4D), 8, MAX_LOCAL_RES)?;
    let want = |c: LocalCheck| a.which == LocalCheck::All || a.which == c;
    let fns = standard_test_functions();
    let mut records = Vec::new();
    for (name, phi) in &fns {
        if want(LocalCheck::T11) {
            records.push(verdict_record("pair_T11".into(), name, pair_t11(phi, res).map_err(op_err("pair_T11"))?));
        }
        if want(LocalCheck::T22) {
            records.push(verdict_record("pair_T22".into(), name, pair_t22(phi, res).map_err(op_err("pair_T22"))?));
        }
        if want(LocalCheck::Mu0) {
            let m = pair_mu0(phi, res).map_err(op_err("pair_mu0"))?;
            records.push(verdict_record("pair_mu0".into(), name, m.measure));
            records.push(verdict_record("psi0_density".into(), name, m.psi));
        }
    }
    if want(LocalCheck::Psi) {
        records.push(verdict_record("psi0_identity".into(), "-", psi_identity_verdict()));
    }
    if want(LocalCheck::Coupe) {
        for &(u, v) in &STANDARD_SLICES {
            for (name, phi) in &fns[..3] {
                let r = lemma_coupe_check(u, v, phi, 2 * res).map_err(op_err("lemma_coupe_check"))?;
                records.push(verdict_record(format!("lemma_coupe({u},{v})"), name, r));
            }
        }
    }
    out.records("localmodel.jsonl", &records)?;
    let failed: Vec<String> = records
        .iter()
        .filter_map(|r| match r {
            Record::Verdict(v) if !v.verdict.pass => Some(format!("{}[{}]", v.operation, v.test_function)),
            _ => None,
        })
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Failed(failed))
    }
}
