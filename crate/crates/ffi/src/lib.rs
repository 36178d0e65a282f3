//! C ABI for the persuade workbench.
//!
//! Games and policies are opaque handles created from JSON documents and
//! released with the matching `_free` function. Every fallible call returns a
//! [`PersuadeStatus`]; on failure `persuade_last_error` describes the problem
//! until the next call on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use persuade::equilibria::{
    best_response_exact, best_response_fixed_interpretation, full_revelation_profile,
    local_ne_verify, verify_nash, FixedResponse, Verdict, DEFAULT_NASH_TOL,
};
use persuade::game::ex_ante_utilities_any;
use persuade::io::{game_from_str, policy_from_str, policy_to_string};
use persuade::{Error, GameInstance, JointPolicy, Matrix, SignalingPolicy, TieRule};

/// Result codes shared by every function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PersuadeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Contract = 3,
    SizeLimit = 4,
    Precondition = 5,
    Solver = 6,
    Numerical = 7,
    Io = 8,
    Parse = 9,
    Internal = 10,
    Panic = 11,
    BufferTooSmall = 12,
}

/// Receiver tie-breaking selector.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PersuadeTie {
    /// The rule stored in the game document, else lexicographic.
    Stored = 0,
    Lexicographic = 1,
    SenderFavoring = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PersuadeVerdict {
    Exact = 0,
    EpsilonLocal = 1,
    Refuted = 2,
}

/// Opaque game handle.
pub struct PersuadeGame {
    game: GameInstance,
    tie: Option<TieRule>,
}

/// Opaque joint-policy handle.
pub struct PersuadePolicy {
    policy: JointPolicy,
}

impl PersuadePolicy {
    /// Copy of the wrapped profile, for Rust callers linking the rlib.
    pub fn clone_policy(&self) -> JointPolicy {
        self.policy.clone()
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> PersuadeStatus {
    match e {
        Error::Argument(_) => PersuadeStatus::InvalidArgument,
        Error::Contract(_) => PersuadeStatus::Contract,
        Error::Size { .. } => PersuadeStatus::SizeLimit,
        Error::Precondition(_) => PersuadeStatus::Precondition,
        Error::Solver(_) => PersuadeStatus::Solver,
        Error::Numerical(_) => PersuadeStatus::Numerical,
        Error::Io { .. } => PersuadeStatus::Io,
        Error::Parse { .. } => PersuadeStatus::Parse,
        Error::Internal(_) => PersuadeStatus::Internal,
    }
}

enum Failure {
    Status(PersuadeStatus, String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn null(what: &str) -> Failure {
    Failure::Status(PersuadeStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PersuadeStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PersuadeStatus::Ok,
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Status(s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("internal panic".into());
            PersuadeStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        Failure::Status(
            PersuadeStatus::InvalidArgument,
            format!("{what} is not UTF-8"),
        )
    })
}

unsafe fn game_ref<'a>(p: *const PersuadeGame) -> Result<&'a PersuadeGame, Failure> {
    p.as_ref().ok_or_else(|| null("game"))
}

unsafe fn policy_ref<'a>(p: *const PersuadePolicy) -> Result<&'a PersuadePolicy, Failure> {
    p.as_ref().ok_or_else(|| null("policy"))
}

fn tie_rule(g: &PersuadeGame, tie: PersuadeTie) -> TieRule {
    match tie {
        PersuadeTie::Stored => g.tie.clone().unwrap_or(TieRule::Lexicographic),
        PersuadeTie::Lexicographic => TieRule::Lexicographic,
        PersuadeTie::SenderFavoring => TieRule::sender_favoring(g.game.n_senders()),
    }
}

unsafe fn out_slice<'a>(p: *mut f64, len: usize, needed: usize) -> Result<&'a mut [f64], Failure> {
    if p.is_null() {
        return Err(null("output buffer"));
    }
    if len < needed {
        return Err(Failure::Status(
            PersuadeStatus::BufferTooSmall,
            format!("output buffer holds {len} values, {needed} needed"),
        ));
    }
    Ok(std::slice::from_raw_parts_mut(p, needed))
}

/// Message describing the last failure on this thread, or NULL. The pointer
/// stays valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn persuade_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn persuade_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a game document (`persuade-game/1` JSON).
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn persuade_game_from_json(
    json: *const c_char,
    out: *mut *mut PersuadeGame,
) -> PersuadeStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let (game, tie) = game_from_str(str_arg(json, "json")?)?;
        *out = Box::into_raw(Box::new(PersuadeGame { game, tie }));
        Ok(())
    })
}

/// # Safety
/// `game` must come from `persuade_game_from_json` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn persuade_game_free(game: *mut PersuadeGame) {
    if !game.is_null() {
        drop(Box::from_raw(game));
    }
}

/// Writes the game dimensions; any output pointer may be NULL.
///
/// # Safety
/// `game` must be a live handle; non-NULL outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn persuade_game_dims(
    game: *const PersuadeGame,
    senders: *mut usize,
    states: *mut usize,
    signals: *mut usize,
    actions: *mut usize,
) -> PersuadeStatus {
    guard(|| {
        let g = &game_ref(game)?.game;
        for (p, v) in [
            (senders, g.n_senders()),
            (states, g.states()),
            (signals, g.signals()),
            (actions, g.actions()),
        ] {
            if !p.is_null() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// Parses a policy document (`persuade-policy/1` JSON).
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn persuade_policy_from_json(
    json: *const c_char,
    out: *mut *mut PersuadePolicy,
) -> PersuadeStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let policy = policy_from_str(str_arg(json, "json")?)?;
        *out = Box::into_raw(Box::new(PersuadePolicy { policy }));
        Ok(())
    })
}

/// Builds a joint policy from `n · |Ω| · |S|` probabilities laid out sender
/// by sender, each sender's matrix row-major.
///
/// # Safety
/// `data` must point to `len` readable doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn persuade_policy_from_array(
    game: *const PersuadeGame,
    data: *const f64,
    len: usize,
    out: *mut *mut PersuadePolicy,
) -> PersuadeStatus {
    guard(|| {
        let g = &game_ref(game)?.game;
        if data.is_null() {
            return Err(null("data"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let block = g.states() * g.signals();
        if len != block * g.n_senders() {
            return Err(Error::Argument(format!(
                "expected {} values, got {len}",
                block * g.n_senders()
            ))
            .into());
        }
        let values = std::slice::from_raw_parts(data, len);
        let policies = values
            .chunks(block)
            .map(|c| {
                SignalingPolicy::new(Matrix::from_row_major(g.states(), g.signals(), c.to_vec())?)
            })
            .collect::<persuade::Result<Vec<_>>>()?;
        *out = Box::into_raw(Box::new(PersuadePolicy {
            policy: JointPolicy::new(policies),
        }));
        Ok(())
    })
}

/// # Safety
/// `policy` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn persuade_policy_free(policy: *mut PersuadePolicy) {
    if !policy.is_null() {
        drop(Box::from_raw(policy));
    }
}

/// Serializes a policy to JSON. Free the result with `persuade_string_free`.
///
/// # Safety
/// `policy` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn persuade_policy_to_json(
    policy: *const PersuadePolicy,
    out: *mut *mut c_char,
) -> PersuadeStatus {
    guard(|| {
        let p = policy_ref(policy)?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = CString::new(policy_to_string(&p.policy))
            .map_err(|e| Error::Internal(e.to_string()))?
            .into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn persuade_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Exact ex-ante utilities: `out[j]` for each sender, then the receiver.
/// `out_len` must be at least `n + 1`.
///
/// # Safety
/// Handles must be live; `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn persuade_ex_ante(
    game: *const PersuadeGame,
    policy: *const PersuadePolicy,
    tie: PersuadeTie,
    out: *mut f64,
    out_len: usize,
) -> PersuadeStatus {
    guard(|| {
        let g = game_ref(game)?;
        let p = policy_ref(policy)?;
        let u = ex_ante_utilities_any(&g.game, &p.policy, &tie_rule(g, tie))?;
        let buf = out_slice(out, out_len, u.senders.len() + 1)?;
        buf[..u.senders.len()].copy_from_slice(&u.senders);
        buf[u.senders.len()] = u.receiver;
        Ok(())
    })
}

/// Exact Nash check. Writes the verdict and the largest improvement.
///
/// # Safety
/// Handles must be live; outputs must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn persuade_verify_nash(
    game: *const PersuadeGame,
    policy: *const PersuadePolicy,
    tie: PersuadeTie,
    verdict: *mut PersuadeVerdict,
    max_improvement: *mut f64,
) -> PersuadeStatus {
    guard(|| {
        let g = game_ref(game)?;
        let p = policy_ref(policy)?;
        if verdict.is_null() || max_improvement.is_null() {
            return Err(null("output"));
        }
        let r = verify_nash(&g.game, &p.policy, &tie_rule(g, tie), DEFAULT_NASH_TOL)?;
        *verdict = map_verdict(r.verdict);
        *max_improvement = r.max_improvement;
        Ok(())
    })
}

/// Sampled ε-local check with the default sample count.
///
/// # Safety
/// Handles must be live; outputs must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn persuade_local_verify(
    game: *const PersuadeGame,
    policy: *const PersuadePolicy,
    tie: PersuadeTie,
    eps: f64,
    seed: u64,
    verdict: *mut PersuadeVerdict,
    max_improvement: *mut f64,
) -> PersuadeStatus {
    guard(|| {
        let g = game_ref(game)?;
        let p = policy_ref(policy)?;
        if verdict.is_null() || max_improvement.is_null() {
            return Err(null("output"));
        }
        let r = local_ne_verify(&g.game, &p.policy, &tie_rule(g, tie), eps, seed)?;
        *verdict = map_verdict(r.verdict);
        *max_improvement = r.max_improvement;
        Ok(())
    })
}

fn map_verdict(v: Verdict) -> PersuadeVerdict {
    match v {
        Verdict::Exact => PersuadeVerdict::Exact,
        Verdict::EpsilonLocal => PersuadeVerdict::EpsilonLocal,
        Verdict::Refuted => PersuadeVerdict::Refuted,
    }
}

/// Best response of `sender`. Writes the supremum utility and, when
/// `policy_out` is non-NULL, a realizing `|Ω|×|S|` policy (row-major).
///
/// # Safety
/// Handles must be live; `policy_out` must hold `policy_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn persuade_best_response(
    game: *const PersuadeGame,
    policy: *const PersuadePolicy,
    sender: usize,
    tie: PersuadeTie,
    utility: *mut f64,
    policy_out: *mut f64,
    policy_len: usize,
) -> PersuadeStatus {
    guard(|| {
        let g = game_ref(game)?;
        let p = policy_ref(policy)?;
        if utility.is_null() {
            return Err(null("utility"));
        }
        if sender >= g.game.n_senders() {
            return Err(Error::Argument(format!("sender {sender} out of range")).into());
        }
        let rule = tie_rule(g, tie);
        let br = match &rule {
            TieRule::FixedMap(map) => {
                match best_response_fixed_interpretation(&g.game, sender, &p.policy, map)? {
                    FixedResponse::Optimal(br) => br,
                    FixedResponse::Infeasible => {
                        return Err(Error::Precondition(
                            "fixed interpretation is infeasible for this sender".into(),
                        )
                        .into())
                    }
                }
            }
            _ => best_response_exact(&g.game, sender, &p.policy, &rule)?,
        };
        *utility = br.utility;
        if !policy_out.is_null() {
            let m = br.realized_policy.matrix().as_slice();
            out_slice(policy_out, policy_len, m.len())?.copy_from_slice(m);
        }
        Ok(())
    })
}

/// Full-revelation equilibrium profile as a new policy handle.
///
/// # Safety
/// `game` must be live and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn persuade_full_revelation(
    game: *const PersuadeGame,
    out: *mut *mut PersuadePolicy,
) -> PersuadeStatus {
    guard(|| {
        let g = game_ref(game)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let (policy, _) = full_revelation_profile(&g.game)?;
        *out = Box::into_raw(Box::new(PersuadePolicy { policy }));
        Ok(())
    })
}
