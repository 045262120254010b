//! `lrl`: the LRL vector of each state by the perihelion route, the W route or both.

use std::io::Write;

use serde::Serialize;

use lrl_core::lrl::{
    lrl_vector_via_perihelion, micz_result, w_route_at, w_route_from_state, PerihelionOptions,
    WRouteSeries,
};
use lrl_core::{CentralModel, LrlNote, LrlResult, ModelSpec, PhaseState, Vec3};

use crate::config::{Route, RunConfig, SCHEMA_VERSION};
use crate::output::{emit_json, write_atomic};
use crate::CliError;

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_PERIODS: usize = 3;
pub const SERIES_CSV_HEADER: &str = "t,theta,wx,wy,wz,Kx,Ky,Kz";

#[derive(Debug, Serialize)]
pub struct WRouteReport {
    /// W-route value at the input state.
    #[serde(rename = "K_vec")]
    pub k_vec: Vec3,
    /// Constancy over the following radial periods, from the next perihelion.
    pub radial_periods: usize,
    pub max_defect: f64,
    pub rel_defect: f64,
}

#[derive(Debug, Serialize)]
pub struct Agreement {
    pub abs: f64,
    /// `abs / |K|`; `abs` alone when `K = 0`.
    pub rel: f64,
}

#[derive(Debug, Serialize)]
pub struct LrlEntry {
    pub state: [f64; 6],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perihelion: Option<LrlResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w_route: Option<WRouteReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub agreement: Option<Agreement>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct LrlDocument {
    pub schema: u32,
    pub command: &'static str,
    pub model: ModelSpec,
    pub route: Route,
    pub tol: f64,
    pub results: Vec<LrlEntry>,
}

struct Computed {
    perihelion: Option<LrlResult>,
    w: Option<(WRouteReport, WRouteSeries)>,
}

fn compute(
    model: &CentralModel,
    s: &PhaseState,
    route: Route,
    tol: f64,
    periods: usize,
) -> Result<Computed, CliError> {
    if let CentralModel::Micz { .. } = model {
        return Ok(Computed {
            perihelion: Some(micz_result(model, s)?),
            w: None,
        });
    }
    let opts = PerihelionOptions {
        tol,
        ..PerihelionOptions::default()
    };
    let peri = lrl_vector_via_perihelion(model, s, &opts)?.result;
    if peri.notes.contains(&LrlNote::CircularDegenerate) {
        // no perihelion to anchor the W route; K = 0 is the answer for both
        return Ok(Computed {
            perihelion: Some(peri),
            w: None,
        });
    }
    let w = match route {
        Route::Perihelion => None,
        Route::W | Route::Both => {
            let k_vec = w_route_at(model, s, tol)?;
            let (series, _) = w_route_from_state(model, s, periods, tol)?;
            let report = WRouteReport {
                k_vec,
                radial_periods: periods,
                max_defect: series.max_defect,
                rel_defect: series.rel_defect,
            };
            Some((report, series))
        }
    };
    let keep_peri = route != Route::W;
    Ok(Computed {
        perihelion: keep_peri.then_some(peri),
        w,
    })
}

fn entry(
    state: [f64; 6],
    computed: Result<Computed, CliError>,
) -> (LrlEntry, Option<WRouteSeries>) {
    match computed {
        Ok(c) => {
            let agreement = match (&c.perihelion, &c.w) {
                (Some(p), Some((w, _))) => {
                    let abs = (p.k_vec - w.k_vec).norm();
                    Some(Agreement {
                        abs,
                        rel: if p.k_mag > 0.0 { abs / p.k_mag } else { abs },
                    })
                }
                _ => None,
            };
            let (w_route, series) = match c.w {
                Some((r, s)) => (Some(r), Some(s)),
                None => (None, None),
            };
            (
                LrlEntry {
                    state,
                    perihelion: c.perihelion,
                    w_route,
                    agreement,
                    error: None,
                },
                series,
            )
        }
        Err(e) => (
            LrlEntry {
                state,
                perihelion: None,
                w_route: None,
                agreement: None,
                error: Some(e.to_string()),
            },
            None,
        ),
    }
}

fn write_series(series: &WRouteSeries, w: &mut dyn Write) -> std::io::Result<()> {
    writeln!(w, "{SERIES_CSV_HEADER}")?;
    for s in &series.samples {
        let row = [
            s.t, s.theta, s.w.x, s.w.y, s.w.z, s.k_vec.x, s.k_vec.y, s.k_vec.z,
        ];
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

pub fn run(cfg: &RunConfig) -> Result<(), CliError> {
    let (spec, model) = cfg.model()?;
    let states = cfg.phase_states()?;
    if states.is_empty() {
        return Err(CliError::invalid(
            "no initial state given (use --state or --sweep)",
        ));
    }
    let route = cfg.route.unwrap_or(Route::Perihelion);
    let tol = cfg.tol(DEFAULT_TOL)?;
    let periods = cfg.periods.unwrap_or(DEFAULT_PERIODS);
    if periods == 0 {
        return Err(CliError::invalid("--periods must be at least 1"));
    }
    if cfg.series.is_some() && (route == Route::Perihelion || states.len() != 1) {
        return Err(CliError::invalid(
            "--series needs a single state and --route w or both",
        ));
    }
    if let (CentralModel::Micz { .. }, Route::W | Route::Both) = (&model, route) {
        return Err(CliError::invalid(
            "the W route is not available for the MICZ model",
        ));
    }

    if states.len() == 1 {
        // a single state reports its error directly through the exit code
        let c = compute(&model, &states[0], route, tol, periods)?;
        let (e, series) = entry(cfg.states[0], Ok(c));
        if let (Some(path), Some(series)) = (&cfg.series, &series) {
            write_atomic(path, |w| write_series(series, w))?;
        }
        let doc = LrlDocument {
            schema: SCHEMA_VERSION,
            command: "lrl",
            model: spec,
            route,
            tol,
            results: vec![e],
        };
        return emit_json(cfg.out.as_deref(), &doc);
    }

    let computed = cfg.fan_out(&states, |s| compute(&model, s, route, tol, periods))?;
    let results: Vec<LrlEntry> = cfg
        .states
        .iter()
        .zip(computed)
        .map(|(st, c)| entry(*st, c).0)
        .collect();
    let failed = results.iter().filter(|e| e.error.is_some()).count();
    let doc = LrlDocument {
        schema: SCHEMA_VERSION,
        command: "lrl",
        model: spec,
        route,
        tol,
        results,
    };
    emit_json(cfg.out.as_deref(), &doc)?;
    if failed > 0 {
        return Err(CliError::Numerical(format!(
            "{failed} of {} states failed",
            doc.results.len()
        )));
    }
    Ok(())
}
