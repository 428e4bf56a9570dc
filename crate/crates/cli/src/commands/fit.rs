use crate::bundle::Run;
use crate::config::{require_file, FitModel, RunConfig};
use crate::error::CliError;
use metalens::fit::{fit_bias_lifetime, fit_erf, fit_exponential, linear_fit, FitError, FitResult};
use metalens::io::{open, read_columns};
use serde::Serialize;
use std::path::Path;

#[derive(Debug, Serialize)]
struct FitPayload {
    model: FitModel,
    data: String,
    points: usize,
    result: FitResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    optimal_bias_t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    extrapolated: Option<bool>,
}

pub fn fit(config: RunConfig, out: &Path) -> Result<(), CliError> {
    let run = Run::new("fit", config);
    let cfg = &run.config.fit;
    let path = cfg
        .data
        .as_deref()
        .ok_or_else(|| CliError::Config("fit.data is required".into()))?;
    require_file(path, "fit.data")?;
    let (x, y) = read_columns(open(path)?, [cfg.columns[0].as_str(), cfg.columns[1].as_str()])?;
    let (fitted, optimal_bias_t, extrapolated) = match cfg.model {
        FitModel::Exponential => (fit_exponential(&x, &y), None, None),
        FitModel::Erf => (fit_erf(&x, &y), None, None),
        FitModel::Linear => (linear_fit(&x, &y).map(|l| l.to_fit_result()), None, None),
        FitModel::BiasLifetime => match fit_bias_lifetime(&x, &y) {
            Ok(f) => (Ok(f.result.clone()), Some(f.optimal_bias()), Some(f.extrapolated)),
            Err(e) => (Err(e), None, None),
        },
    };
    // a fit that hit the iteration cap is still written, then reported as a failure
    let (result, failure) = match fitted {
        Ok(r) => (r, None),
        Err(FitError::NoConvergence(partial)) => {
            let e = CliError::Numerical(format!("{:?} fit did not converge in {} iterations", cfg.model, partial.iterations));
            (*partial, Some(e))
        }
        Err(e) => return Err(e.into()),
    };
    run.finish(
        out,
        FitPayload {
            model: cfg.model,
            data: path.display().to_string(),
            points: x.len(),
            result,
            optimal_bias_t,
            extrapolated,
        },
    )?;
    failure.map_or(Ok(()), Err)
}
