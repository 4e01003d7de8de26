//! The six service-enrollment state machines.
//!
//! Each machine is a deterministic finite automaton over the shared event
//! alphabet: every (state, event) pair has exactly one successor, with
//! inapplicable events acting as self-transitions. Auth codes are six
//! digits from the seeded RNG, single-use, and expire after ten virtual
//! minutes.

use crate::netsim::Millis;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Auth codes become useless this long after issue.
pub const AUTH_CODE_TTL_MS: Millis = 10 * 60 * 1000;

/// Fixed confirmation tokens accepted by the simple-reply machines.
pub const FIXED_REPLY_TOKENS: [&str; 3] = ["YES", "Y", "GO"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EnrollmentKind {
    OneStep,
    TwoStep,
    ThreeStepSimple,
    FourStepSimple,
    FourStepAuthCode,
    AlwaysOn,
}

/// Enrollment progress for one (provider, phone) pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EnrollState {
    Idle,
    /// A web session asked to attach this phone and awaits its trigger text.
    WebPending,
    /// A confirmation text went out; a fixed reply completes enrollment.
    PendingConfirmReply,
    /// A one-time code was texted to the phone; the web session must echo it.
    PendingAuthCode { code: String, expires_at: Millis },
    Subscribed,
}

/// Inputs the machines understand. Text events arrive over SMS and are
/// therefore spoofable; web events require control of the account session.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EnrollEvent {
    /// Public web form signup (no account login).
    WebSignup,
    /// Signup from inside a logged-in account session.
    WebLoginSignup,
    /// Subscription keyword texted to the short code.
    TextJoin,
    /// Fixed confirmation token texted back.
    TextFixedReply(String),
    /// Designated trigger text that makes the provider issue an auth code.
    TextTrigger,
    /// Code typed into the waiting web session.
    WebCodeEntry(String),
}

/// Result of advancing a machine: the successor state plus any text the
/// provider sends back to the phone.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnrollOutcome {
    pub state: EnrollState,
    pub reply: Option<String>,
}

fn fresh_code(rng: &mut ChaCha8Rng) -> String {
    format!("{:06}", rng.random_range(0..1_000_000u32))
}

fn is_fixed_reply(token: &str) -> bool {
    FIXED_REPLY_TOKENS
        .iter()
        .any(|t| t.eq_ignore_ascii_case(token.trim()))
}

/// Advances the machine for `kind` from `state` under `event`.
///
/// Total over (state, event): anything not named below is a self-transition
/// with no reply.
pub fn enrollment_advance(
    kind: EnrollmentKind,
    state: &EnrollState,
    event: &EnrollEvent,
    now: Millis,
    rng: &mut ChaCha8Rng,
) -> EnrollOutcome {
    use EnrollEvent as E;
    use EnrollState as S;

    let stay = |reply: Option<String>| EnrollOutcome { state: state.clone(), reply };
    let go = |state: S, reply: Option<String>| EnrollOutcome { state, reply };

    match kind {
        EnrollmentKind::AlwaysOn => {
            // Enrolled by the carrier on behalf of every subscriber; no
            // stored state, nothing to advance.
            EnrollOutcome { state: S::Subscribed, reply: None }
        }
        EnrollmentKind::OneStep => match (state, event) {
            (S::Idle, E::WebSignup) | (S::Idle, E::TextJoin) => {
                go(S::Subscribed, Some("You are subscribed.".into()))
            }
            _ => stay(None),
        },
        EnrollmentKind::TwoStep => match (state, event) {
            (S::Idle, E::WebLoginSignup) => go(S::Subscribed, Some("You are subscribed.".into())),
            _ => stay(None),
        },
        EnrollmentKind::ThreeStepSimple => match (state, event) {
            (S::Idle, E::TextJoin) | (S::Idle, E::WebSignup) => go(
                S::PendingConfirmReply,
                Some("Reply YES to confirm your subscription.".into()),
            ),
            (S::PendingConfirmReply, E::TextJoin) => {
                stay(Some("Reply YES to confirm your subscription.".into()))
            }
            // Acceptance of the fixed reply does not require the
            // confirmation text to have reached the replier.
            (S::PendingConfirmReply, E::TextFixedReply(t)) if is_fixed_reply(t) => {
                go(S::Subscribed, Some("You are subscribed.".into()))
            }
            _ => stay(None),
        },
        EnrollmentKind::FourStepSimple => match (state, event) {
            (S::Idle, E::WebLoginSignup) => go(
                S::PendingConfirmReply,
                Some("Reply YES to confirm your subscription.".into()),
            ),
            (S::PendingConfirmReply, E::TextFixedReply(t)) if is_fixed_reply(t) => {
                go(S::Subscribed, Some("You are subscribed.".into()))
            }
            _ => stay(None),
        },
        EnrollmentKind::FourStepAuthCode => match (state, event) {
            (S::Idle, E::WebLoginSignup) | (S::Idle, E::TextTrigger) => {
                let code = fresh_code(rng);
                let reply = format!("Your confirmation code is {code}");
                go(S::PendingAuthCode { code, expires_at: now + AUTH_CODE_TTL_MS }, Some(reply))
            }
            // A repeated trigger re-issues a fresh code; the old one dies.
            (S::PendingAuthCode { .. }, E::WebLoginSignup)
            | (S::PendingAuthCode { .. }, E::TextTrigger) => {
                let code = fresh_code(rng);
                let reply = format!("Your confirmation code is {code}");
                go(S::PendingAuthCode { code, expires_at: now + AUTH_CODE_TTL_MS }, Some(reply))
            }
            (S::PendingAuthCode { code, expires_at }, E::WebCodeEntry(entered)) => {
                if entered == code && now < *expires_at {
                    go(S::Subscribed, None)
                } else {
                    stay(None)
                }
            }
            _ => stay(None),
        },
    }
}

/// All states a machine can occupy, for exhaustive transition-table tests.
pub fn all_states(now: Millis) -> Vec<EnrollState> {
    vec![
        EnrollState::Idle,
        EnrollState::WebPending,
        EnrollState::PendingConfirmReply,
        EnrollState::PendingAuthCode { code: "123456".into(), expires_at: now + AUTH_CODE_TTL_MS },
        EnrollState::Subscribed,
    ]
}

/// A representative event alphabet, for exhaustive tests.
pub fn event_alphabet() -> Vec<EnrollEvent> {
    vec![
        EnrollEvent::WebSignup,
        EnrollEvent::WebLoginSignup,
        EnrollEvent::TextJoin,
        EnrollEvent::TextFixedReply("YES".into()),
        EnrollEvent::TextFixedReply("y".into()),
        EnrollEvent::TextFixedReply("GO".into()),
        EnrollEvent::TextFixedReply("NO".into()),
        EnrollEvent::TextTrigger,
        EnrollEvent::WebCodeEntry("123456".into()),
        EnrollEvent::WebCodeEntry("000000".into()),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(11)
    }

    const ALL_KINDS: [EnrollmentKind; 6] = [
        EnrollmentKind::OneStep,
        EnrollmentKind::TwoStep,
        EnrollmentKind::ThreeStepSimple,
        EnrollmentKind::FourStepSimple,
        EnrollmentKind::FourStepAuthCode,
        EnrollmentKind::AlwaysOn,
    ];

    #[test]
    fn machines_are_total_and_deterministic() {
        for kind in ALL_KINDS {
            for state in all_states(0) {
                for event in event_alphabet() {
                    let mut r1 = rng();
                    let mut r2 = rng();
                    let a = enrollment_advance(kind, &state, &event, 0, &mut r1);
                    let b = enrollment_advance(kind, &state, &event, 0, &mut r2);
                    assert_eq!(a, b, "{kind:?} {state:?} {event:?}");
                }
            }
        }
    }

    #[test]
    fn one_step_subscribes_on_text_join() {
        let mut r = rng();
        let out = enrollment_advance(EnrollmentKind::OneStep, &EnrollState::Idle, &EnrollEvent::TextJoin, 0, &mut r);
        assert_eq!(out.state, EnrollState::Subscribed);
    }

    #[test]
    fn three_step_attacker_flow_without_inbox() {
        // Join, wait, fixed reply. Nothing requires seeing the provider's
        // confirmation text.
        let mut r = rng();
        let s1 = enrollment_advance(
            EnrollmentKind::ThreeStepSimple,
            &EnrollState::Idle,
            &EnrollEvent::TextJoin,
            0,
            &mut r,
        );
        assert_eq!(s1.state, EnrollState::PendingConfirmReply);
        assert!(s1.reply.is_some());
        let s2 = enrollment_advance(
            EnrollmentKind::ThreeStepSimple,
            &s1.state,
            &EnrollEvent::TextFixedReply("yes".into()),
            5_000,
            &mut r,
        );
        assert_eq!(s2.state, EnrollState::Subscribed);
    }

    #[test]
    fn fixed_reply_tokens_case_insensitive_go_included() {
        for token in ["YES", "yes", "Y", "y", "GO", "go"] {
            let mut r = rng();
            let out = enrollment_advance(
                EnrollmentKind::ThreeStepSimple,
                &EnrollState::PendingConfirmReply,
                &EnrollEvent::TextFixedReply(token.into()),
                0,
                &mut r,
            );
            assert_eq!(out.state, EnrollState::Subscribed, "token {token}");
        }
        let mut r = rng();
        let out = enrollment_advance(
            EnrollmentKind::ThreeStepSimple,
            &EnrollState::PendingConfirmReply,
            &EnrollEvent::TextFixedReply("OK".into()),
            0,
            &mut r,
        );
        assert_eq!(out.state, EnrollState::PendingConfirmReply);
    }

    #[test]
    fn fixed_reply_while_idle_is_ignored() {
        let mut r = rng();
        let out = enrollment_advance(
            EnrollmentKind::ThreeStepSimple,
            &EnrollState::Idle,
            &EnrollEvent::TextFixedReply("YES".into()),
            0,
            &mut r,
        );
        assert_eq!(out.state, EnrollState::Idle);
        assert_eq!(out.reply, None);
    }

    #[test]
    fn auth_code_wrong_entry_stays_pending() {
        let mut r = rng();
        let issued = enrollment_advance(
            EnrollmentKind::FourStepAuthCode,
            &EnrollState::Idle,
            &EnrollEvent::WebLoginSignup,
            0,
            &mut r,
        );
        let EnrollState::PendingAuthCode { code, .. } = issued.state.clone() else {
            panic!("expected pending code")
        };
        let wrong = format!("{:06}", (code.parse::<u32>().unwrap() + 1) % 1_000_000);
        let out = enrollment_advance(
            EnrollmentKind::FourStepAuthCode,
            &issued.state,
            &EnrollEvent::WebCodeEntry(wrong),
            1,
            &mut r,
        );
        assert_eq!(out.state, issued.state);

        let right = enrollment_advance(
            EnrollmentKind::FourStepAuthCode,
            &issued.state,
            &EnrollEvent::WebCodeEntry(code),
            1,
            &mut r,
        );
        assert_eq!(right.state, EnrollState::Subscribed);
    }

    #[test]
    fn auth_code_expires() {
        let mut r = rng();
        let issued = enrollment_advance(
            EnrollmentKind::FourStepAuthCode,
            &EnrollState::Idle,
            &EnrollEvent::TextTrigger,
            0,
            &mut r,
        );
        let EnrollState::PendingAuthCode { code, .. } = issued.state.clone() else {
            panic!("expected pending code")
        };
        let out = enrollment_advance(
            EnrollmentKind::FourStepAuthCode,
            &issued.state,
            &EnrollEvent::WebCodeEntry(code),
            AUTH_CODE_TTL_MS,
            &mut r,
        );
        assert_eq!(out.state, issued.state, "entry at the TTL boundary is late");
    }

    #[test]
    fn always_on_treats_everyone_as_subscribed() {
        let mut r = rng();
        for event in event_alphabet() {
            let out = enrollment_advance(EnrollmentKind::AlwaysOn, &EnrollState::Idle, &event, 0, &mut r);
            assert_eq!(out.state, EnrollState::Subscribed);
            assert_eq!(out.reply, None);
        }
    }

    #[test]
    fn two_step_requires_login_session() {
        let mut r = rng();
        for event in [EnrollEvent::WebSignup, EnrollEvent::TextJoin, EnrollEvent::TextFixedReply("YES".into())] {
            let out = enrollment_advance(EnrollmentKind::TwoStep, &EnrollState::Idle, &event, 0, &mut r);
            assert_eq!(out.state, EnrollState::Idle, "{event:?}");
        }
        let out = enrollment_advance(EnrollmentKind::TwoStep, &EnrollState::Idle, &EnrollEvent::WebLoginSignup, 0, &mut r);
        assert_eq!(out.state, EnrollState::Subscribed);
    }
}
