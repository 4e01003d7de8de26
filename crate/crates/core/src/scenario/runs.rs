//! The eleven named scenarios.
//!
//! Each builds a topology, drives the attack or defense under test, runs
//! the fabric, and turns the resulting state into counters and verdicts.

use super::world::{CarrierSpec, DeviceSpec, World, START_MS};
use super::{
    apply_carrier_overrides, mac_config_from, ScenarioConfig, ScenarioError,
};
use crate::defenses::{provision_secret, MacConfig, ProvisionChannel};
use crate::ims_core::{CarrierPolicy, OriginCheck, RateLimit, SecurityMode};
use crate::netsim::Millis;
use crate::providers::{
    audit_catalog, default_catalog, load_catalog, HubMac, ProviderRecord, RuntimeAuth, ServiceKind,
    SocialService,
};
use crate::report::SimReport;
use crate::ue::{ApprovalPolicy, AttackScript, DeviceAction};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::VecDeque;

const CARRIER_A: &str = "op-one";
const CARRIER_B: &str = "op-two";
const ATTACKER: &str = "3105552501";
const VICTIM: &str = "3105554347";
const RECIPIENT: &str = "3105557777";
const SOCIAL_CODE: &str = "32665";
const DONATION_CODE: &str = "90999";
/// Attacker per-message service time; calibrated so an unthrottled
/// 30-minute run lands within one percent of the reference 2459 messages.
const SERVICE_TIME_MS: Millis = 730;
const THIRTY_MIN_MS: Millis = 30 * 60 * 1000;

fn record(name: &str) -> ProviderRecord {
    default_catalog()
        .into_iter()
        .find(|r| r.name == name)
        .unwrap_or_else(|| panic!("no catalog row named {name}"))
}

fn victim_numbers(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("310555{:04}", 1000 + i)).collect()
}

fn permissive_policy() -> CarrierPolicy {
    CarrierPolicy::new(CARRIER_A)
}

fn merge_world(report: &mut SimReport, world: &World, devices: &[(&str, &str)]) {
    for carrier_id in world.carrier_ids.keys() {
        report.merge_counters(&format!("carrier.{carrier_id}"), &world.carrier(carrier_id).counters);
    }
    for (label, number) in devices {
        report.merge_counters(&format!("device.{label}"), &world.device(number).counters);
    }
    report.merge_counters("hub", &world.hub().counters);
    report.set("net.sent", world.sim.net.sent());
    report.set("net.delivered", world.sim.net.delivered());
    report.set("net.dropped", world.sim.net.dropped());
}

fn take_log(report: &mut SimReport, world: &World, section: &str) {
    report.event_log.push(format!("=== {section} ==="));
    report.event_log.extend(world.sim.net.log.iter().cloned());
}

/// Wires the social provider and its accounts into a world: the attacker
/// and every victim get a bound account, plus an unbound "Bob" account.
fn setup_social(world: &mut World, carrier_id: &str, victims: &[String], runtime_auth: RuntimeAuth) {
    world
        .carrier_mut(carrier_id)
        .short_codes
        .insert(SOCIAL_CODE, "agg-one", "Facebook");
    let hub = world.hub_mut();
    hub.add_aggregator("agg-one", true);
    let mut rec = record("Facebook");
    rec.runtime_auth = runtime_auth;
    hub.add_provider(rec, ServiceKind::Social, &[]);
    let mut social = SocialService::new("FaceText", SOCIAL_CODE);
    social.create_account("acct-attacker", "Harvester");
    social.bind_direct("acct-attacker", ATTACKER);
    social.create_account("acct-bob", "Bob");
    for (i, v) in victims.iter().enumerate() {
        let id = format!("acct-v{i:04}");
        social.create_account(&id, &format!("Victim {i:04}"));
        social.bind_direct(&id, v);
    }
    hub.social = Some(social);
}

fn setup_donation(world: &mut World, carrier_id: &str, runtime_auth: RuntimeAuth) {
    world
        .carrier_mut(carrier_id)
        .short_codes
        .insert(DONATION_CODE, "agg-one", "Red Cross");
    let hub = world.hub_mut();
    hub.add_aggregator("agg-one", true);
    let mut rec = record("Red Cross");
    rec.runtime_auth = runtime_auth;
    hub.add_provider(rec, ServiceKind::Donation, &["REDCROSS"]);
    hub.donation.add_keyword("REDCROSS", "American Red Cross");
}

/// The three-command account-abuse attack against one victim.
pub fn facebook_individual(cfg: &ScenarioConfig) -> Result<SimReport, ScenarioError> {
    let mut report = SimReport::new(&cfg.scenario, cfg.seed);
    let mut policy = permissive_policy();
    apply_carrier_overrides(&mut policy, cfg)?;

    let victims = cfg.honest_numbers(vec![VICTIM.to_string()]);
    let victim = victims[0].clone();
    let attacker = cfg.attacker_number(ATTACKER);
    let mut world = World::build(
        cfg.seed,
        vec![CarrierSpec { policy, extra_numbers: cfg.carrier_numbers(CARRIER_A) }],
        vec![DeviceSpec::honest(&victim, CARRIER_A), DeviceSpec::attacker(&attacker, CARRIER_A)],
    );
    setup_social(&mut world, CARRIER_A, &victims, RuntimeAuth::None);
    world.register_all();

    for (i, text) in ["Hi...", "Add Bob", "Like Lakers Nation"].iter().enumerate() {
        world.schedule_device(
            &attacker,
            START_MS + i as Millis * SERVICE_TIME_MS,
            DeviceAction::RawSend {
                from: victim.clone(),
                recipient: SOCIAL_CODE.into(),
                text: text.to_string(),
            },
        );
    }
    world.sim.run_to_idle();

    let social = world.hub().social.as_ref().unwrap();
    let victim_acct = social.account("acct-v0000").unwrap();
    let actions: Vec<(&str, &str)> = victim_acct
        .activity_log
        .iter()
        .map(|e| (e.action.as_str(), e.detail.as_str()))
        .collect();
    let expected = [
        ("status", "Hi..."),
        ("add-friend", "acct-bob"),
        ("like", "Lakers Nation"),
    ];
    let origin_ok = victim_acct.activity_log.iter().all(|e| e.origin_phone == victim);
    let commands_ok = actions == expected && origin_ok;
    report.set("scenario.victim_activity_entries", victim_acct.activity_log.len() as u64);
    report.set("scenario.page_likes", social.page_like_count("Lakers Nation") as u64);
    report.set(
        "scenario.bob_pending_requests",
        social.account("acct-bob").unwrap().pending_friend_requests.len() as u64,
    );
    report.verdict(
        "victim_account_ran_all_three_commands",
        commands_ok,
        format!("activity: {actions:?}, origin ok: {origin_ok}"),
    );
    let victim_sent = world.device(&victim).messages_sent();
    report.verdict("victim_device_sent_zero", victim_sent == 0, format!("sent {victim_sent}"));
    let accepted = world.device(&attacker).counter("accepted_200");
    report.verdict(
        "spoofed_commands_accepted_by_network",
        accepted == 3,
        format!("200 responses: {accepted} of 3"),
    );

    merge_world(&mut report, &world, &[("attacker", &attacker), ("victim", &victim)]);
    take_log(&mut report, &world, "facebook_individual");
    Ok(report)
}

/// Many victims, one page, one like per real account.
pub fn like_farm(cfg: &ScenarioConfig) -> Result<SimReport, ScenarioError> {
    let mut report = SimReport::new(&cfg.scenario, cfg.seed);
    let victims = cfg.honest_numbers(victim_numbers(50));
    let n = victims.len();
    let attacker = cfg.attacker_number(ATTACKER);
    let mut policy = permissive_policy();
    apply_carrier_overrides(&mut policy, cfg)?;

    let mut extra = victims.clone();
    extra.extend(cfg.carrier_numbers(CARRIER_A));
    let mut world = World::build(
        cfg.seed,
        vec![CarrierSpec { policy, extra_numbers: extra }],
        vec![DeviceSpec::attacker(&attacker, CARRIER_A)],
    );
    setup_social(&mut world, CARRIER_A, &victims, RuntimeAuth::None);
    world.register_all();

    world.run_attack_script(
        &attacker,
        &AttackScript {
            victim_numbers: victims.clone(),
            target_code: SOCIAL_CODE.into(),
            message_template: "Like Promoted Page".into(),
            inter_message_delay_ms: SERVICE_TIME_MS,
            second_message: None,
        },
    );
    world.sim.run_to_idle();

    let likes = world.hub().social.as_ref().unwrap().page_like_count("Promoted Page");
    report.set("scenario.victims", n as u64);
    report.set("scenario.page_likes", likes as u64);
    report.verdict(
        "one_like_per_distinct_victim_account",
        likes == n,
        format!("{likes} of {n}"),
    );
    let accepted = world.device(&attacker).counter("accepted_200");
    report.verdict("all_spoofs_accepted", accepted == n as u64, format!("{accepted} of {n}"));

    merge_world(&mut report, &world, &[("attacker", &attacker)]);
    take_log(&mut report, &world, "like_farm");
    Ok(report)
}

/// Add-a-friend plus the phone-number status trick, then harvest.
pub fn privacy_leak(cfg: &ScenarioConfig) -> Result<SimReport, ScenarioError> {
    let mut report = SimReport::new(&cfg.scenario, cfg.seed);
    let victims = cfg.honest_numbers(victim_numbers(20));
    let n = victims.len();
    let attacker = cfg.attacker_number(ATTACKER);
    let mut policy = permissive_policy();
    apply_carrier_overrides(&mut policy, cfg)?;

    let mut extra = victims.clone();
    extra.extend(cfg.carrier_numbers(CARRIER_A));
    let mut world = World::build(
        cfg.seed,
        vec![CarrierSpec { policy, extra_numbers: extra }],
        vec![DeviceSpec::attacker(&attacker, CARRIER_A)],
    );
    setup_social(&mut world, CARRIER_A, &victims, RuntimeAuth::None);
    world.register_all();

    world.run_attack_script(
        &attacker,
        &AttackScript {
            victim_numbers: victims.clone(),
            target_code: SOCIAL_CODE.into(),
            message_template: "Add Harvester".into(),
            inter_message_delay_ms: SERVICE_TIME_MS,
            second_message: Some(("my number is {victim}".into(), SERVICE_TIME_MS / 2)),
        },
    );
    world.sim.run_to_idle();

    // The attacker approves every request from their own web session, then
    // reads numbers out of the new friends' status updates.
    let social = world.hub_mut().social.as_mut().unwrap();
    let pending: Vec<String> = social
        .account("acct-attacker")
        .unwrap()
        .pending_friend_requests
        .iter()
        .cloned()
        .collect();
    for requester in &pending {
        social.web_accept_friend("acct-attacker", requester);
    }
    let mut harvested = 0u64;
    for (i, v) in victims.iter().enumerate() {
        let acct = social.account(&format!("acct-v{i:04}")).unwrap();
        let friended = acct.friends.contains("acct-attacker");
        let leaked = acct.status_log.iter().any(|(_, text, _)| text.contains(v.as_str()));
        if friended && leaked {
            harvested += 1;
        }
    }
    report.set("scenario.victims", n as u64);
    report.set("scenario.friend_requests_approved", pending.len() as u64);
    report.set("scenario.numbers_harvested", harvested);
    report.verdict(
        "number_harvested_from_every_victim",
        harvested == n as u64,
        format!("{harvested} of {n}"),
    );

    merge_world(&mut report, &world, &[("attacker", &attacker)]);
    take_log(&mut report, &world, "privacy_leak");
    Ok(report)
}

/// Pipelined two-message donation charges against spoofed numbers.
pub fn donation(cfg: &ScenarioConfig) -> Result<SimReport, ScenarioError> {
    let mut report = SimReport::new(&cfg.scenario, cfg.seed);
    let victims = cfg.honest_numbers(victim_numbers(100));
    let n = victims.len();
    let attacker = cfg.attacker_number(ATTACKER);
    let mut policy = permissive_policy();
    apply_carrier_overrides(&mut policy, cfg)?;

    let mut devices = vec![DeviceSpec::attacker(&attacker, CARRIER_A)];
    devices.extend(victims.iter().map(|v| DeviceSpec::honest(v, CARRIER_A)));
    let mut world = World::build(
        cfg.seed,
        vec![CarrierSpec { policy, extra_numbers: cfg.carrier_numbers(CARRIER_A) }],
        devices,
    );
    setup_donation(&mut world, CARRIER_A, RuntimeAuth::WeakConfirm);
    world.register_all();

    world.run_attack_script(
        &attacker,
        &AttackScript {
            victim_numbers: victims.clone(),
            target_code: DONATION_CODE.into(),
            message_template: "REDCROSS".into(),
            inter_message_delay_ms: SERVICE_TIME_MS,
            second_message: Some(("YES".into(), 5_000)),
        },
    );
    world.sim.run_to_idle();

    let hub = world.hub();
    let charges = hub.donation.charge_count();
    let total = hub.donation.total_charged();
    let routed = hub.counter("relay_in");
    report.set("scenario.victims", n as u64);
    report.set("donation.charges", charges);
    report.set("donation.total_units", total);
    report.set("donation.charges_from_spoofed", hub.counter("charges_from_spoofed"));
    report.verdict("one_charge_per_victim", charges == n as u64, format!("{charges} of {n}"));
    report.verdict(
        "ledger_total_is_ten_units_per_victim",
        total == 10 * n as u64,
        format!("{total} units"),
    );
    report.verdict(
        "two_messages_routed_per_victim",
        routed == 2 * n as u64,
        format!("{routed} of {}", 2 * n),
    );

    merge_world(&mut report, &world, &[("attacker", &attacker)]);
    take_log(&mut report, &world, "donation");
    Ok(report)
}

/// Spoofed enrollments into notification services, then scheduled pushes.
pub fn spam_subscribe(cfg: &ScenarioConfig) -> Result<SimReport, ScenarioError> {
    let mut report = SimReport::new(&cfg.scenario, cfg.seed);
    let victims = cfg.honest_numbers(victim_numbers(10));
    let n = victims.len();
    let attacker = cfg.attacker_number(ATTACKER);
    let mut policy = permissive_policy();
    apply_carrier_overrides(&mut policy, cfg)?;

    let mut devices = vec![DeviceSpec::attacker(&attacker, CARRIER_A)];
    devices.extend(victims.iter().enumerate().map(|(i, v)| {
        // The first victim's inbox is disabled: enrollment must succeed
        // without the confirmation text ever being readable.
        DeviceSpec::honest(v, CARRIER_A).with_inbox(i != 0)
    }));
    let mut world = World::build(
        cfg.seed,
        vec![CarrierSpec { policy, extra_numbers: cfg.carrier_numbers(CARRIER_A) }],
        devices,
    );
    {
        let carrier = world.carrier_mut(CARRIER_A);
        carrier.short_codes.insert("63257", "agg-one", "Walmart");
        carrier.short_codes.insert("71034", "agg-one", "Costco");
        let hub = world.hub_mut();
        hub.add_aggregator("agg-one", true);
        hub.add_provider(record("Walmart"), ServiceKind::Notification, &["JOIN"]);
        hub.add_provider(record("Costco"), ServiceKind::Notification, &["COSTCO"]);
    }
    world.register_all();

    world.run_attack_script(
        &attacker,
        &AttackScript {
            victim_numbers: victims.clone(),
            target_code: "63257".into(),
            message_template: "JOIN".into(),
            inter_message_delay_ms: SERVICE_TIME_MS,
            second_message: None,
        },
    );
    world.run_attack_script(
        &attacker,
        &AttackScript {
            victim_numbers: victims.clone(),
            target_code: "71034".into(),
            message_template: "COSTCO".into(),
            inter_message_delay_ms: SERVICE_TIME_MS,
            second_message: Some(("YES".into(), 5_000)),
        },
    );

    let period = crate::providers::NOTIFICATION_PERIOD_MS;
    {
        let hub_id = world.hub_id;
        let (node, net) = world.sim.node_and_net(hub_id);
        let super::world::NodeKind::Hub(h) = node else { unreachable!() };
        h.start_notification_ticks(net, START_MS + period);
    }
    let ticks = 3;
    world.sim.run_until(START_MS + ticks * period + 3_600_000);

    let hub = world.hub();
    let walmart = hub.provider(0);
    let costco = hub.provider(1);
    let subs_spoofed = hub.counter("subscriptions_spoofed");
    let notif = hub.counter("notifications_sent");
    let unsolicited = hub.counter("unsolicited_texts");
    report.set("scenario.victims", n as u64);
    report.set("hub.walmart_subscribers", walmart.subscriber_count() as u64);
    report.set("hub.costco_subscribers", costco.subscriber_count() as u64);
    report.verdict(
        "every_victim_spoof_enrolled_twice",
        subs_spoofed == 2 * n as u64,
        format!("{subs_spoofed} of {}", 2 * n),
    );
    report.verdict(
        "three_step_enrolls_with_inbox_disabled",
        costco.is_subscribed(&victims[0]) && world.device(&victims[0]).inbox.is_empty(),
        format!(
            "subscribed: {}, inbox entries: {}",
            costco.is_subscribed(&victims[0]),
            world.device(&victims[0]).inbox.len()
        ),
    );
    report.verdict(
        "notification_ticks_reach_all_subscribers",
        notif == ticks * 2 * n as u64,
        format!("{notif} of {}", ticks * 2 * n as u64),
    );
    report.verdict(
        "unsolicited_counter_tracks_spoofed_subscriptions",
        unsolicited == notif,
        format!("{unsolicited} unsolicited of {notif} sent"),
    );

    merge_world(&mut report, &world, &[("attacker", &attacker)]);
    take_log(&mut report, &world, "spam_subscribe");
    Ok(report)
}

/// Throughput comparison over 30 virtual minutes: app path under the OS
/// cap, raw path unthrottled, raw path under a network rate limit.
pub fn rate_measure(cfg: &ScenarioConfig) -> Result<SimReport, ScenarioError> {
    let mut report = SimReport::new(&cfg.scenario, cfg.seed);
    let window = cfg.duration_ms.unwrap_or(THIRTY_MIN_MS);
    let until = START_MS + window;

    // Sub-run 1: honest messaging app, deny every rate prompt.
    let mut app_world = World::build(
        cfg.seed,
        vec![CarrierSpec { policy: permissive_policy(), extra_numbers: vec![] }],
        vec![
            DeviceSpec::honest(VICTIM, CARRIER_A).with_approval(ApprovalPolicy::AutoDeny),
            DeviceSpec::honest(RECIPIENT, CARRIER_A),
        ],
    );
    app_world.register_all();
    app_world.schedule_device(
        VICTIM,
        START_MS,
        DeviceAction::AppLoop {
            recipient: RECIPIENT.into(),
            text: "ping".into(),
            interval: SERVICE_TIME_MS,
            until,
        },
    );
    app_world.sim.run_until(until);
    app_world.sim.run_to_idle();
    let app_sent = app_world.device(VICTIM).counter("app_sent");

    // Sub-run 2: raw path, no network limit.
    let raw_world_run = |rate_limit: Option<RateLimit>, seed: u64| {
        let mut policy = permissive_policy();
        policy.rate_limit = rate_limit;
        let mut world = World::build(
            seed,
            vec![CarrierSpec { policy, extra_numbers: vec![] }],
            vec![
                DeviceSpec::attacker(ATTACKER, CARRIER_A),
                DeviceSpec::honest(RECIPIENT, CARRIER_A),
            ],
        );
        world.register_all();
        world.schedule_device(
            ATTACKER,
            START_MS,
            DeviceAction::RawLoop {
                from: ATTACKER.into(),
                recipient: RECIPIENT.into(),
                text: "ping".into(),
                interval: SERVICE_TIME_MS,
                until,
            },
        );
        world.sim.run_until(until);
        world.sim.run_to_idle();
        world
    };

    let unthrottled = raw_world_run(None, cfg.seed);
    let raw_sent = unthrottled.device(ATTACKER).counter("raw_sent");
    let raw_accepted = unthrottled.device(ATTACKER).counter("accepted_200");

    // Sub-run 3: raw path behind the observed network rate limit.
    let throttled = raw_world_run(
        Some(RateLimit { max_msgs: 1002, window_ms: THIRTY_MIN_MS }),
        cfg.seed,
    );
    let throttled_accepted = throttled.device(ATTACKER).counter("accepted_200");
    let throttled_rejected = throttled.device(ATTACKER).counter("rejected_429");

    report.set("app_path.sent", app_sent);
    report.set("app_path.blocked", app_world.device(VICTIM).counter("app_blocked_rate"));
    report.set("raw_unthrottled.sent", raw_sent);
    report.set("raw_unthrottled.accepted", raw_accepted);
    report.set("raw_throttled.accepted", throttled_accepted);
    report.set("raw_throttled.rejected_429", throttled_rejected);
    let ratio_x100 = (throttled_accepted * 100).checked_div(app_sent).unwrap_or(0);
    report.set("scenario.raw_to_app_ratio_x100", ratio_x100);

    report.verdict("app_path_capped_at_30", app_sent == 30, format!("sent {app_sent}"));
    let lo = 2459 * 98;
    let hi = 2459 * 102;
    report.verdict(
        "raw_unthrottled_within_2pct_of_2459",
        (lo..=hi).contains(&(raw_accepted * 100)),
        format!("accepted {raw_accepted}"),
    );
    report.verdict(
        "raw_throttled_exactly_1002",
        throttled_accepted == 1002,
        format!("accepted {throttled_accepted}"),
    );
    report.verdict(
        "throttled_raw_at_least_33x_app",
        ratio_x100 >= 3300,
        format!("ratio x100 = {ratio_x100}"),
    );

    report.merge_counters("device.app", &app_world.device(VICTIM).counters);
    report.merge_counters("device.raw", &unthrottled.device(ATTACKER).counters);
    report.merge_counters("device.raw_throttled", &throttled.device(ATTACKER).counters);
    report.merge_counters(
        "carrier.throttled",
        &throttled.carrier(CARRIER_A).counters,
    );
    take_log(&mut report, &app_world, "app_path");
    take_log(&mut report, &unthrottled, "raw_unthrottled");
    take_log(&mut report, &throttled, "raw_throttled");
    Ok(report)
}

/// Strict origin checking against the account-abuse attack.
pub fn defense_strict_origin(cfg: &ScenarioConfig) -> Result<SimReport, ScenarioError> {
    let mut report = SimReport::new(&cfg.scenario, cfg.seed);
    let mut policy = permissive_policy();
    policy.origin_check = OriginCheck::Strict;
    apply_carrier_overrides(&mut policy, cfg)?;

    let victims = vec![VICTIM.to_string()];
    let mut world = World::build(
        cfg.seed,
        vec![CarrierSpec { policy, extra_numbers: vec![] }],
        vec![DeviceSpec::honest(VICTIM, CARRIER_A), DeviceSpec::attacker(ATTACKER, CARRIER_A)],
    );
    setup_social(&mut world, CARRIER_A, &victims, RuntimeAuth::None);
    world.register_all();

    for (i, text) in ["Hi...", "Add Bob", "Like Lakers Nation"].iter().enumerate() {
        world.schedule_device(
            ATTACKER,
            START_MS + i as Millis * SERVICE_TIME_MS,
            DeviceAction::RawSend {
                from: VICTIM.into(),
                recipient: SOCIAL_CODE.into(),
                text: text.to_string(),
            },
        );
    }
    // Traffic under the attacker's own identity still flows.
    world.schedule_device(
        ATTACKER,
        START_MS + 3 * SERVICE_TIME_MS,
        DeviceAction::RawSend {
            from: ATTACKER.into(),
            recipient: SOCIAL_CODE.into(),
            text: "Hello from my own number".into(),
        },
    );
    world.sim.run_to_idle();

    let social = world.hub().social.as_ref().unwrap();
    let victim_actions = social.account("acct-v0000").unwrap().activity_log.len();
    let own_status_ok = social
        .account("acct-attacker")
        .unwrap()
        .status_log
        .iter()
        .any(|(_, text, _)| text == "Hello from my own number");
    let rejected = world.device(ATTACKER).counter("rejected_403");
    let origin_rejects = world.carrier(CARRIER_A).counter("rejected_origin");
    report.set("scenario.victim_actions", victim_actions as u64);
    report.verdict("zero_victim_account_actions", victim_actions == 0, format!("{victim_actions}"));
    report.verdict(
        "all_spoofs_rejected_by_origin_check",
        rejected == 3 && origin_rejects == 3,
        format!("{rejected} rejections, {origin_rejects} policy rejects"),
    );
    report.verdict("own_identity_traffic_unaffected", own_status_ok, format!("{own_status_ok}"));

    merge_world(&mut report, &world, &[("attacker", ATTACKER), ("victim", VICTIM)]);
    take_log(&mut report, &world, "defense_strict_origin");
    Ok(report)
}

/// User-approval challenges on the premium donation code, combined with
/// strict origin checking, against the donation attack.
pub fn defense_440(cfg: &ScenarioConfig) -> Result<SimReport, ScenarioError> {
    let mut report = SimReport::new(&cfg.scenario, cfg.seed);
    let deny_victim = VICTIM;
    let approve_victim = "3105556001";

    let mut policy = permissive_policy();
    policy.origin_check = OriginCheck::Strict;
    policy.approval.premium_codes.insert(DONATION_CODE.to_string());
    apply_carrier_overrides(&mut policy, cfg)?;

    let mut world = World::build(
        cfg.seed,
        vec![CarrierSpec { policy, extra_numbers: vec![] }],
        vec![
            // Approves the handset's short-code dialog but denies the
            // network's approval challenge.
            DeviceSpec::honest(deny_victim, CARRIER_A)
                .with_approval(ApprovalPolicy::Script(VecDeque::from([true, false]))),
            DeviceSpec::honest(approve_victim, CARRIER_A)
                .with_approval(ApprovalPolicy::AutoApprove),
            DeviceSpec::attacker(ATTACKER, CARRIER_A),
        ],
    );
    setup_donation(&mut world, CARRIER_A, RuntimeAuth::WeakConfirm);
    world.register_all();

    // Spoofed pipeline against both victims: strict origin kills it.
    world.run_attack_script(
        ATTACKER,
        &AttackScript {
            victim_numbers: vec![deny_victim.to_string(), approve_victim.to_string()],
            target_code: DONATION_CODE.into(),
            message_template: "REDCROSS".into(),
            inter_message_delay_ms: SERVICE_TIME_MS,
            second_message: Some(("YES".into(), 5_000)),
        },
    );
    // The denying victim tries a donation of their own and refuses the
    // network challenge.
    world.schedule_device(
        deny_victim,
        START_MS + 10_000,
        DeviceAction::AppSend { recipient: DONATION_CODE.into(), text: "REDCROSS".into() },
    );
    // The approving victim completes a legitimate donation through both
    // challenges.
    world.schedule_device(
        approve_victim,
        START_MS + 20_000,
        DeviceAction::AppSend { recipient: DONATION_CODE.into(), text: "REDCROSS".into() },
    );
    world.schedule_device(
        approve_victim,
        START_MS + 25_000,
        DeviceAction::AppSend { recipient: DONATION_CODE.into(), text: "YES".into() },
    );
    // The attacker donates from their own number, answering their own
    // challenges from the raw path: approval alone cannot stop a willing
    // subscriber, it only confines charges to the attacker's own bill.
    world.schedule_device(
        ATTACKER,
        START_MS + 30_000,
        DeviceAction::RawSend {
            from: ATTACKER.into(),
            recipient: DONATION_CODE.into(),
            text: "REDCROSS".into(),
        },
    );
    world.schedule_device(
        ATTACKER,
        START_MS + 35_000,
        DeviceAction::RawSend {
            from: ATTACKER.into(),
            recipient: DONATION_CODE.into(),
            text: "YES".into(),
        },
    );
    world.sim.run_to_idle();

    let hub = world.hub();
    let spoofed_charges = hub.counter("charges_from_spoofed");
    let deny_charges = hub.donation.charges_for(deny_victim).len();
    let approve_charges = hub.donation.charges_for(approve_victim).len();
    let attacker_charges = hub.donation.charges_for(ATTACKER).len();
    let held = world.carrier(CARRIER_A).counter("held_440");
    let released = world.carrier(CARRIER_A).counter("released_440");

    report.set("donation.charges_from_spoofed", spoofed_charges);
    report.set("donation.deny_victim_charges", deny_charges as u64);
    report.set("donation.approve_victim_charges", approve_charges as u64);
    report.set("donation.attacker_self_charges", attacker_charges as u64);
    report.set("carrier.held_440_total", held);
    report.set("carrier.released_440_total", released);

    report.verdict(
        "zero_charges_from_spoofed_traffic",
        spoofed_charges == 0 && deny_charges == 0,
        format!("spoofed {spoofed_charges}, denying victim {deny_charges}"),
    );
    report.verdict(
        "denied_challenge_abandons_message",
        world.device(deny_victim).counter("abandoned_440") == 1,
        format!("abandoned {}", world.device(deny_victim).counter("abandoned_440")),
    );
    report.verdict(
        "legitimate_donation_survives_challenges",
        approve_charges == 1,
        format!("{approve_charges}"),
    );
    report.verdict(
        "attacker_self_approval_confined_to_own_bill",
        attacker_charges == 1 && spoofed_charges == 0,
        format!("attacker charges {attacker_charges}"),
    );

    merge_world(
        &mut report,
        &world,
        &[("attacker", ATTACKER), ("deny_victim", deny_victim), ("approve_victim", approve_victim)],
    );
    take_log(&mut report, &world, "defense_440");
    Ok(report)
}

/// Per-message MAC runtime authentication at the providers, re-running the
/// account-abuse and donation attacks plus a man-in-the-aggregator run.
pub fn defense_mac(cfg: &ScenarioConfig) -> Result<SimReport, ScenarioError> {
    let mut report = SimReport::new(&cfg.scenario, cfg.seed);
    let unprovisioned_victim = "3105556002";
    let mut policy = permissive_policy();
    apply_carrier_overrides(&mut policy, cfg)?;

    // Secrets shared by the handsets and the providers, provisioned over
    // the secure web channel before the run.
    let mut mac_cfg = mac_config_from(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5ec2e7);
    for (phone, code) in [
        (VICTIM, SOCIAL_CODE),
        (VICTIM, DONATION_CODE),
        (ATTACKER, SOCIAL_CODE),
        (ATTACKER, DONATION_CODE),
    ] {
        provision_secret(&mut mac_cfg, phone, code, ProvisionChannel::SecureWeb, &mut rng)?;
    }

    let build_world = |mac_cfg: &MacConfig, seed: u64| -> Result<World, ScenarioError> {
        let mut policy = permissive_policy();
        apply_carrier_overrides(&mut policy, cfg)?;
        let victims = vec![VICTIM.to_string(), unprovisioned_victim.to_string()];
        let mut world = World::build(
            seed,
            vec![CarrierSpec { policy, extra_numbers: vec![] }],
            vec![
                DeviceSpec::honest(VICTIM, CARRIER_A)
                    .with_approval(ApprovalPolicy::AutoApprove)
                    .with_mac(mac_cfg.clone()),
                DeviceSpec::honest(unprovisioned_victim, CARRIER_A),
                DeviceSpec::attacker(ATTACKER, CARRIER_A).with_mac(mac_cfg.clone()),
            ],
        );
        setup_social(&mut world, CARRIER_A, &victims, RuntimeAuth::Mac);
        setup_donation(&mut world, CARRIER_A, RuntimeAuth::Mac);
        world.hub_mut().mac = Some(HubMac::new(mac_cfg.clone()));
        world.register_all();
        Ok(world)
    };

    let mut world = build_world(&mac_cfg, cfg.seed)?;

    // Spoofed attack suite: three account commands against the provisioned
    // victim, a two-message donation against them, and one command against
    // a victim who never provisioned a secret.
    for (i, text) in ["Hi...", "Add Bob", "Like Lakers Nation"].iter().enumerate() {
        world.schedule_device(
            ATTACKER,
            START_MS + i as Millis * SERVICE_TIME_MS,
            DeviceAction::RawSend {
                from: VICTIM.into(),
                recipient: SOCIAL_CODE.into(),
                text: text.to_string(),
            },
        );
    }
    world.schedule_device(
        ATTACKER,
        START_MS + 3 * SERVICE_TIME_MS,
        DeviceAction::RawSend {
            from: VICTIM.into(),
            recipient: DONATION_CODE.into(),
            text: "REDCROSS".into(),
        },
    );
    world.schedule_device(
        ATTACKER,
        START_MS + 3 * SERVICE_TIME_MS + 5_000,
        DeviceAction::RawSend {
            from: VICTIM.into(),
            recipient: DONATION_CODE.into(),
            text: "YES".into(),
        },
    );
    world.schedule_device(
        ATTACKER,
        START_MS + 4 * SERVICE_TIME_MS + 5_000,
        DeviceAction::RawSend {
            from: unprovisioned_victim.into(),
            recipient: SOCIAL_CODE.into(),
            text: "Hi...".into(),
        },
    );
    // Legitimate traffic from the provisioned victim: one status update and
    // a full donation, all MAC-tagged by the handset.
    world.schedule_device(
        VICTIM,
        START_MS + 10_000,
        DeviceAction::AppSend { recipient: SOCIAL_CODE.into(), text: "Hi legit".into() },
    );
    world.schedule_device(
        VICTIM,
        START_MS + 11_000,
        DeviceAction::AppSend { recipient: DONATION_CODE.into(), text: "REDCROSS".into() },
    );
    world.schedule_device(
        VICTIM,
        START_MS + 16_000,
        DeviceAction::AppSend { recipient: DONATION_CODE.into(), text: "YES".into() },
    );
    world.sim.run_to_idle();

    let hub = world.hub();
    let social = hub.social.as_ref().unwrap();
    let victim_acct = social.account("acct-v0000").unwrap();
    let spoofed_actions = victim_acct
        .activity_log
        .iter()
        .filter(|e| e.detail != "Hi legit")
        .count();
    let legit_status_ok = victim_acct.status_log.iter().any(|(_, t, _)| t == "Hi legit");
    let unprovisioned_actions =
        social.account("acct-v0001").unwrap().activity_log.len();
    let invalid = hub.counter("mac_invalid");
    let unauth = hub.counter("mac_unauthenticated");
    let verified = hub.counter("mac_verified");
    let victim_charges = hub.donation.charges_for(VICTIM).len();
    let overhead_permille = (mac_cfg.tag_length as u64 * 1000) / 140;

    report.set("mac.invalid", invalid);
    report.set("mac.unauthenticated", unauth);
    report.set("mac.verified", verified);
    report.set("mac.overhead_permille", overhead_permille);
    report.set("donation.victim_charges", victim_charges as u64);

    report.verdict(
        "spoofed_traffic_yields_zero_provider_actions",
        spoofed_actions == 0 && unprovisioned_actions == 0 && victim_charges == 1,
        format!(
            "victim spoof actions {spoofed_actions}, unprovisioned actions {unprovisioned_actions}, victim charges {victim_charges} (their own donation)"
        ),
    );
    report.verdict(
        "spoofed_messages_flagged_invalid_or_unauthenticated",
        invalid == 5 && unauth == 1,
        format!("{invalid} invalid, {unauth} unauthenticated"),
    );
    report.verdict(
        "legitimate_traffic_fully_verified",
        verified == 3 && legit_status_ok,
        format!("{verified} verified, status visible: {legit_status_ok}"),
    );
    report.verdict(
        "tag_overhead_within_bound",
        overhead_permille <= 143,
        format!("{overhead_permille} permille of a full message"),
    );

    // Man-in-the-aggregator sub-run: every relayed payload gets one bit
    // flipped; each flip must be detected.
    let mut mitm = build_world(&mac_cfg, cfg.seed ^ 1)?;
    mitm.hub_mut().enable_tamper(cfg.seed);
    let tamper_sends = 64u64;
    for i in 0..tamper_sends {
        mitm.schedule_device(
            VICTIM,
            START_MS + i * SERVICE_TIME_MS,
            DeviceAction::AppSend {
                recipient: SOCIAL_CODE.into(),
                text: format!("update {i}"),
            },
        );
    }
    mitm.sim.run_to_idle();
    let mitm_hub = mitm.hub();
    let flips = mitm_hub.tamper_flips();
    let detected = mitm_hub.counter("mac_invalid");
    let slipped = mitm_hub.counter("mac_verified");
    report.set("tamper.flips", flips);
    report.set("tamper.detected_invalid", detected);
    report.verdict(
        "every_tampered_message_detected",
        flips == tamper_sends && detected == tamper_sends && slipped == 0,
        format!("{detected} of {flips} flips detected, {slipped} slipped through"),
    );

    merge_world(&mut report, &world, &[("attacker", ATTACKER), ("victim", VICTIM)]);
    take_log(&mut report, &world, "defense_mac");
    take_log(&mut report, &mitm, "defense_mac_tamper");
    Ok(report)
}

/// Classifier audit over the shipped (or configured) catalog.
pub fn table1_audit(cfg: &ScenarioConfig) -> Result<SimReport, ScenarioError> {
    let mut report = SimReport::new(&cfg.scenario, cfg.seed);
    let catalog = match cfg.providers.as_ref().and_then(|p| p.catalog_path.as_ref()) {
        Some(path) => load_catalog(&std::fs::read_to_string(path)?)?,
        None => default_catalog(),
    };
    let audit = audit_catalog(&catalog);

    report.set("catalog.rows", audit.total as u64);
    report.set("catalog.ground_truth_vulnerable", audit.ground_truth_vulnerable as u64);
    report.set("catalog.predicted_vulnerable", audit.predicted_vulnerable as u64);
    report.set("catalog.matches", audit.matches as u64);

    report.verdict(
        "headline_53_of_64_vulnerable",
        audit.total == 64 && audit.ground_truth_vulnerable == 53,
        format!("{} of {}", audit.ground_truth_vulnerable, audit.total),
    );
    report.verdict(
        "classifier_matches_at_least_61_rows",
        audit.matches >= 61,
        format!("{} of {}", audit.matches, audit.total),
    );
    let exceptions: Vec<String> = audit
        .rows
        .iter()
        .filter(|r| r.exception)
        .map(|r| r.name.clone())
        .collect();
    let mismatch_ok = audit
        .mismatched_names
        .iter()
        .all(|n| exceptions.contains(n));
    report.verdict(
        "mismatches_only_on_exception_rows",
        mismatch_ok,
        format!("mismatches: {:?}", audit.mismatched_names),
    );
    report.threat_matrix = Some(audit);
    Ok(report)
}

/// Circuit-switched baseline: no originating address exists in the
/// submission protocol, so the carrier behaves as if strictly checked.
pub fn legacy_baseline(cfg: &ScenarioConfig) -> Result<SimReport, ScenarioError> {
    let mut report = SimReport::new(&cfg.scenario, cfg.seed);
    let mut policy = permissive_policy();
    policy.origin_check = OriginCheck::None;
    policy.legacy_cs = true;
    apply_carrier_overrides(&mut policy, cfg)?;
    policy.legacy_cs = true;

    let victims = vec![VICTIM.to_string()];
    let mut world = World::build(
        cfg.seed,
        vec![CarrierSpec { policy, extra_numbers: vec![] }],
        vec![DeviceSpec::honest(VICTIM, CARRIER_A), DeviceSpec::attacker(ATTACKER, CARRIER_A)],
    );
    setup_social(&mut world, CARRIER_A, &victims, RuntimeAuth::None);
    world.register_all();

    for (i, text) in ["Hi...", "Add Bob", "Like Lakers Nation"].iter().enumerate() {
        world.schedule_device(
            ATTACKER,
            START_MS + i as Millis * SERVICE_TIME_MS,
            DeviceAction::RawSend {
                from: VICTIM.into(),
                recipient: SOCIAL_CODE.into(),
                text: text.to_string(),
            },
        );
    }
    world.schedule_device(
        ATTACKER,
        START_MS + 3 * SERVICE_TIME_MS,
        DeviceAction::RawSend {
            from: ATTACKER.into(),
            recipient: SOCIAL_CODE.into(),
            text: "legacy status".into(),
        },
    );
    world.sim.run_to_idle();

    let social = world.hub().social.as_ref().unwrap();
    let victim_actions = social.account("acct-v0000").unwrap().activity_log.len();
    let own_ok = social
        .account("acct-attacker")
        .unwrap()
        .status_log
        .iter()
        .any(|(_, t, _)| t == "legacy status");
    let origin_rejects = world.carrier(CARRIER_A).counter("rejected_origin");
    report.set("scenario.victim_actions", victim_actions as u64);
    report.verdict(
        "all_spoofing_fails_on_legacy_stack",
        victim_actions == 0 && origin_rejects == 3,
        format!("victim actions {victim_actions}, rejects {origin_rejects}"),
    );
    report.verdict("honest_traffic_still_flows", own_ok, format!("{own_ok}"));

    merge_world(&mut report, &world, &[("attacker", ATTACKER)]);
    take_log(&mut report, &world, "legacy_baseline");
    Ok(report)
}

/// Spoofing matrix support: runs one (origin_check, from, recipient) case
/// on a two-carrier topology and reports whether the spoof was delivered.
/// Used by the acceptance suite and exposed for ad-hoc experiments.
pub fn spoof_case(
    seed: u64,
    origin: OriginCheck,
    security: SecurityMode,
    from_carrier_a: bool,
    recipient_on_a: bool,
) -> bool {
    let spoofed_from = if from_carrier_a { VICTIM } else { "4255550001" };
    let recipient = if recipient_on_a { RECIPIENT } else { "4255557777" };

    let mut policy_a = CarrierPolicy::new(CARRIER_A);
    policy_a.origin_check = origin;
    policy_a.security_mode = security;
    let policy_b = CarrierPolicy::new(CARRIER_B);

    let mut world = World::build(
        seed,
        vec![
            CarrierSpec { policy: policy_a, extra_numbers: vec![VICTIM.into()] },
            CarrierSpec { policy: policy_b, extra_numbers: vec!["4255550001".into()] },
        ],
        vec![
            DeviceSpec::attacker(ATTACKER, CARRIER_A),
            DeviceSpec::honest(RECIPIENT, CARRIER_A),
            DeviceSpec::honest("4255557777", CARRIER_B),
        ],
    );
    world.register_all();
    world.schedule_device(
        ATTACKER,
        START_MS,
        DeviceAction::RawSend {
            from: spoofed_from.into(),
            recipient: recipient.into(),
            text: "spoof probe".into(),
        },
    );
    world.sim.run_to_idle();

    let inbox = &world.device(recipient).inbox;
    inbox.iter().any(|e| e.orig == spoofed_from && e.text == "spoof probe")
}
