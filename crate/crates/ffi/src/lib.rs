//! C interface to the fair-logloss classifier.
//!
//! Every fallible function returns an [`FllStatus`]; on failure a message is
//! available from [`fll_last_error`] on the same thread. Models and datasets
//! are opaque heap handles released with their `_free` function.
//!
//! Feature arrays are row-major, `n_rows * n_features` doubles, already
//! encoded (no bias column; the bias is added internally).

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use fair_logloss::inference::predict_batch;
use fair_logloss::lambda_solver::{solve_lambda, GroupProbs};
use fair_logloss::model_core::{approximator_probability, predictor_probability, sigmoid};
use fair_logloss::{model_file, ConstraintSide, CriterionKind, Dataset, Error, GroupRates, Model, TrainConfig};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FllStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DataError = 3,
    ZeroGroupRate = 4,
    DegenerateDenominator = 5,
    CriterionMismatch = 6,
    Numerical = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FllCriterion {
    None = 0,
    DemographicParity = 1,
    EqualizedOpportunity = 2,
    EqualizedOdds = 3,
}

impl From<FllCriterion> for CriterionKind {
    fn from(c: FllCriterion) -> Self {
        match c {
            FllCriterion::None => CriterionKind::Unconstrained,
            FllCriterion::DemographicParity => CriterionKind::DemographicParity,
            FllCriterion::EqualizedOpportunity => CriterionKind::EqualizedOpportunity,
            FllCriterion::EqualizedOdds => CriterionKind::EqualizedOdds,
        }
    }
}

impl From<CriterionKind> for FllCriterion {
    fn from(c: CriterionKind) -> Self {
        match c {
            CriterionKind::Unconstrained => FllCriterion::None,
            CriterionKind::DemographicParity => FllCriterion::DemographicParity,
            CriterionKind::EqualizedOpportunity => FllCriterion::EqualizedOpportunity,
            CriterionKind::EqualizedOdds => FllCriterion::EqualizedOdds,
        }
    }
}

/// Which side of a constraint an example falls on.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FllSide {
    Gamma1 = 0,
    Gamma0 = 1,
    Neither = 2,
}

impl From<FllSide> for ConstraintSide {
    fn from(s: FllSide) -> Self {
        match s {
            FllSide::Gamma1 => ConstraintSide::Gamma1,
            FllSide::Gamma0 => ConstraintSide::Gamma0,
            FllSide::Neither => ConstraintSide::Neither,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FllTrainOptions {
    pub reg_c: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub objective_tol: f64,
}

impl From<FllTrainOptions> for TrainConfig {
    fn from(o: FllTrainOptions) -> Self {
        TrainConfig {
            reg_c: o.reg_c,
            max_iters: o.max_iters,
            grad_tol: o.grad_tol,
            objective_tol: o.objective_tol,
            ..TrainConfig::default()
        }
    }
}

/// Opaque trained model.
pub struct FllModel {
    inner: Model,
}

/// Opaque encoded dataset.
pub struct FllDataset {
    inner: Dataset,
}

enum Failure {
    Lib(Error),
    Null(&'static str),
    Arg(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> FllStatus {
    match e {
        Error::ZeroGroupRate { .. } => FllStatus::ZeroGroupRate,
        Error::DegenerateDenominator(_) => FllStatus::DegenerateDenominator,
        Error::CriterionMismatch { .. } => FllStatus::CriterionMismatch,
        Error::NonFinite(_) | Error::NonFiniteObjective { .. } | Error::EmptyGroup => FllStatus::Numerical,
        e if e.is_data_error() => FllStatus::DataError,
        _ => FllStatus::InvalidArgument,
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> FllStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FllStatus::Ok,
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer passed for `{what}`"));
            FllStatus::NullPointer
        }
        Ok(Err(Failure::Arg(msg))) => {
            set_error(msg);
            FllStatus::InvalidArgument
        }
        Err(_) => {
            set_error("internal panic".into());
            FllStatus::Panic
        }
    }
}

/// # Safety
/// `p` must be null or valid for `n` reads.
unsafe fn slice<'a, T>(p: *const T, n: usize, what: &'static str) -> Result<&'a [T], Failure> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

/// # Safety
/// `p` must be null or point to a live value of type `T`.
unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(what))
}

unsafe fn path_arg(p: *const c_char) -> Result<String, Failure> {
    if p.is_null() {
        return Err(Failure::Null("path"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| Failure::Arg("path is not valid UTF-8".into()))
}

fn rows_len(n_rows: usize, n_features: usize) -> Result<usize, Failure> {
    n_rows
        .checked_mul(n_features)
        .ok_or_else(|| Failure::Arg("n_rows * n_features overflows".into()))
}

fn with_bias(x: &[f64]) -> Vec<f64> {
    let mut v = Vec::with_capacity(x.len() + 1);
    v.extend_from_slice(x);
    v.push(1.0);
    v
}

fn check_width(model: &Model, n_features: usize) -> Result<(), Failure> {
    let expected = model.theta.len() - 1;
    if n_features != expected {
        return Err(Failure::Lib(Error::DimensionMismatch {
            expected,
            actual: n_features,
        }));
    }
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fll_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn fll_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

#[no_mangle]
pub extern "C" fn fll_train_options_default() -> FllTrainOptions {
    let c = TrainConfig::default();
    FllTrainOptions {
        reg_c: c.reg_c,
        max_iters: c.max_iters,
        grad_tol: c.grad_tol,
        objective_tol: c.objective_tol,
    }
}

/// Copies an encoded dataset into a new handle.
///
/// # Safety
/// Array arguments must be valid for the stated lengths and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fll_dataset_new(
    features: *const f64,
    n_rows: usize,
    n_features: usize,
    groups: *const u8,
    labels: *const u8,
    out: *mut *mut FllDataset,
) -> FllStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let x = slice(features, rows_len(n_rows, n_features)?, "features")?;
        let a = slice(groups, n_rows, "groups")?;
        let y = slice(labels, n_rows, "labels")?;
        let names = (0..n_features).map(|j| format!("x{j}")).collect();
        let d = Dataset::from_flat(x.to_vec(), n_features, a.to_vec(), y.to_vec(), names)?;
        *out = Box::into_raw(Box::new(FllDataset { inner: d }));
        Ok(())
    })
}

/// # Safety
/// `dataset` must be null or a handle from [`fll_dataset_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fll_dataset_free(dataset: *mut FllDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// # Safety
/// `dataset` must be a live handle, `options` null (defaults) or readable,
/// and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fll_train(
    dataset: *const FllDataset,
    criterion: FllCriterion,
    options: *const FllTrainOptions,
    out: *mut *mut FllModel,
) -> FllStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let d = deref(dataset, "dataset")?;
        let cfg = match options.as_ref() {
            Some(o) => TrainConfig::from(*o),
            None => TrainConfig::default(),
        };
        let model = fair_logloss::train(&d.inner, criterion.into(), &cfg)?;
        *out = Box::into_raw(Box::new(FllModel { inner: model }));
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fll_model_load(path: *const c_char, out: *mut *mut FllModel) -> FllStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let model = model_file::load(path_arg(path)?)?;
        *out = Box::into_raw(Box::new(FllModel { inner: model }));
        Ok(())
    })
}

/// # Safety
/// `model` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn fll_model_save(model: *const FllModel, path: *const c_char) -> FllStatus {
    guard(|| {
        let m = deref(model, "model")?;
        model_file::save(&m.inner, path_arg(path)?)?;
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fll_model_free(model: *mut FllModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of encoded features the model expects, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fll_model_n_features(model: *const FllModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.theta.len() - 1)
}

/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fll_model_criterion(model: *const FllModel, out: *mut FllCriterion) -> FllStatus {
    guard(|| {
        *out_ptr(out, "out")? = deref(model, "model")?.inner.kind().into();
        Ok(())
    })
}

/// Writes up to `capacity` multipliers into `out` and the total count into
/// `count`.
///
/// # Safety
/// `model` must be a live handle, `out` valid for `capacity` writes and
/// `count` writable.
#[no_mangle]
pub unsafe extern "C" fn fll_model_lambdas(
    model: *const FllModel,
    out: *mut f64,
    capacity: usize,
    count: *mut usize,
) -> FllStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let count = out_ptr(count, "count")?;
        let lambdas = m.inner.lambdas.as_slice();
        *count = lambdas.len();
        let n = lambdas.len().min(capacity);
        if n > 0 {
            if out.is_null() {
                return Err(Failure::Null("out"));
            }
            std::slice::from_raw_parts_mut(out, n).copy_from_slice(&lambdas[..n]);
        }
        Ok(())
    })
}

/// Probability of a positive decision and the thresholded label for one row.
///
/// # Safety
/// `x` must be valid for `n_features` reads; outputs may be null to skip.
#[no_mangle]
pub unsafe extern "C" fn fll_predict(
    model: *const FllModel,
    x: *const f64,
    n_features: usize,
    group: u8,
    prob_out: *mut f64,
    label_out: *mut u8,
) -> FllStatus {
    guard(|| {
        let m = deref(model, "model")?;
        check_width(&m.inner, n_features)?;
        let x = with_bias(slice(x, n_features, "x")?);
        let p = fair_logloss::predict(&m.inner, &x, group)?;
        if let Some(o) = prob_out.as_mut() {
            *o = p.prob_positive;
        }
        if let Some(o) = label_out.as_mut() {
            *o = p.hard_label;
        }
        Ok(())
    })
}

/// Probabilities for `n_rows` rows. Label-dependent models marginalize over
/// the unknown label.
///
/// # Safety
/// Arrays must be valid for the stated lengths; `probs_out` for `n_rows`
/// writes.
#[no_mangle]
pub unsafe extern "C" fn fll_predict_batch(
    model: *const FllModel,
    features: *const f64,
    n_rows: usize,
    n_features: usize,
    groups: *const u8,
    probs_out: *mut f64,
) -> FllStatus {
    guard(|| {
        let m = deref(model, "model")?;
        check_width(&m.inner, n_features)?;
        let x = slice(features, rows_len(n_rows, n_features)?, "features")?;
        let a = slice(groups, n_rows, "groups")?;
        if n_rows > 0 && probs_out.is_null() {
            return Err(Failure::Null("probs_out"));
        }
        let names = (0..n_features).map(|j| format!("x{j}")).collect();
        let d = Dataset::from_flat(x.to_vec(), n_features, a.to_vec(), vec![0; n_rows], names)?;
        let preds = predict_batch(&m.inner, &d)?;
        if n_rows > 0 {
            let out = std::slice::from_raw_parts_mut(probs_out, n_rows);
            for (o, p) in out.iter_mut().zip(preds) {
                *o = p.prob_positive;
            }
        }
        Ok(())
    })
}

/// Logistic function of a score.
#[no_mangle]
pub extern "C" fn fll_base_probability(score: f64) -> f64 {
    sigmoid(score)
}

/// Clamped probability of a positive decision for one side of a constraint.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fll_predictor_probability(
    rho: f64,
    side: FllSide,
    lambda: f64,
    p_gamma1: f64,
    p_gamma0: f64,
    out: *mut f64,
) -> FllStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let rates = GroupRates::new(p_gamma1, p_gamma0)?;
        *out = predictor_probability(rho, side.into(), lambda, rates);
        Ok(())
    })
}

/// Approximator probability for a clamped predictor probability `p`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fll_approximator_probability(
    p: f64,
    side: FllSide,
    lambda: f64,
    p_gamma1: f64,
    p_gamma0: f64,
    out: *mut f64,
) -> FllStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let rates = GroupRates::new(p_gamma1, p_gamma0)?;
        *out = approximator_probability(p, side.into(), lambda, rates);
        Ok(())
    })
}

/// Multiplier equalizing the clamped means of two groups of probabilities.
///
/// # Safety
/// `e1` and `e0` must be valid for `n1` and `n0` reads; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fll_solve_lambda(
    e1: *const f64,
    n1: usize,
    e0: *const f64,
    n0: usize,
    p_gamma1: f64,
    p_gamma0: f64,
    out: *mut f64,
) -> FllStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let probs = GroupProbs::new(slice(e1, n1, "e1")?.to_vec(), slice(e0, n0, "e0")?.to_vec())?;
        *out = solve_lambda(&probs, GroupRates::new(p_gamma1, p_gamma0)?)?;
        Ok(())
    })
}
