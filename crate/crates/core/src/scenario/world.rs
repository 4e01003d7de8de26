//! Topology assembly: carriers, devices, and the provider hub wired onto
//! one fabric instance.

use crate::defenses::MacConfig;
use crate::ims_core::{Carrier, CarrierPolicy, SIP_PORT};
use crate::netsim::{render_routing_table, Datagram, Millis, Net, NetConfig, Node, NodeId, RouteEntry, Sim};
use crate::providers::ProviderHub;
use crate::sip_codec::DeviceProfile;
use crate::ue::{ApprovalPolicy, Device, DeviceAction, DeviceMac};
use std::collections::BTreeMap;

/// All node flavours living on one fabric.
#[allow(clippy::large_enum_variant)]
pub enum NodeKind {
    Device(Device),
    Carrier(Carrier),
    Hub(ProviderHub),
}

impl Node for NodeKind {
    fn on_datagram(&mut self, net: &mut Net, dgram: &Datagram) {
        match self {
            NodeKind::Device(d) => d.on_datagram(net, dgram),
            NodeKind::Carrier(c) => c.on_datagram(net, dgram),
            NodeKind::Hub(h) => h.on_datagram(net, dgram),
        }
    }

    fn on_timer(&mut self, net: &mut Net, token: u64) {
        match self {
            NodeKind::Device(d) => d.on_timer(net, token),
            NodeKind::Carrier(c) => c.on_timer(net, token),
            NodeKind::Hub(h) => h.on_timer(net, token),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Honest,
    Attacker,
}

pub struct CarrierSpec {
    pub policy: CarrierPolicy,
    /// Subscriber numbers with no device in the simulation (spoof targets).
    pub extra_numbers: Vec<String>,
}

pub struct DeviceSpec {
    pub number: String,
    pub carrier_id: String,
    pub role: Role,
    pub approval: ApprovalPolicy,
    pub inbox_enabled: bool,
    pub mac: Option<MacConfig>,
}

impl DeviceSpec {
    pub fn honest(number: &str, carrier_id: &str) -> Self {
        DeviceSpec {
            number: number.to_string(),
            carrier_id: carrier_id.to_string(),
            role: Role::Honest,
            approval: ApprovalPolicy::AutoDeny,
            inbox_enabled: true,
            mac: None,
        }
    }

    pub fn attacker(number: &str, carrier_id: &str) -> Self {
        DeviceSpec {
            number: number.to_string(),
            carrier_id: carrier_id.to_string(),
            role: Role::Attacker,
            approval: ApprovalPolicy::AutoApprove,
            inbox_enabled: true,
            mac: None,
        }
    }

    pub fn with_approval(mut self, approval: ApprovalPolicy) -> Self {
        self.approval = approval;
        self
    }

    pub fn with_inbox(mut self, enabled: bool) -> Self {
        self.inbox_enabled = enabled;
        self
    }

    pub fn with_mac(mut self, cfg: MacConfig) -> Self {
        self.mac = Some(cfg);
        self
    }
}

pub const HUB_ADDR: &str = "2001:db8:99::1";
/// Attacks start here; registration happens before.
pub const START_MS: Millis = 1_000;

/// Deterministic SIM-key stand-in for a subscriber.
pub fn auth_key_for(carrier_id: &str, number: &str) -> Vec<u8> {
    crate::hashlabel::HashLabel::Sha256
        .digest(format!("{carrier_id}:{number}").as_bytes())
}

pub fn carrier_addr(index: usize) -> String {
    format!("2001:db8:c{index}::1")
}

pub struct World {
    pub sim: Sim<NodeKind>,
    pub hub_id: NodeId,
    pub carrier_ids: BTreeMap<String, NodeId>,
    pub device_ids: BTreeMap<String, NodeId>,
}

impl World {
    /// Builds the fabric: one hub, the carriers, one device per spec, and a
    /// complete cross-carrier number directory.
    pub fn build(seed: u64, carriers: Vec<CarrierSpec>, devices: Vec<DeviceSpec>) -> World {
        let cfg = NetConfig { latency_ms: 50, jitter_ms: None, seed };
        let mut sim: Sim<NodeKind> = Sim::new(&cfg);

        let hub = ProviderHub::new(HUB_ADDR, seed);
        let hub_id = sim.register_endpoint(HUB_ADDR, SIP_PORT, NodeKind::Hub(hub)).unwrap();
        if let NodeKind::Hub(h) = sim.node_mut(hub_id) {
            h.set_node_id(hub_id);
        }

        // Directory of every number in the world, shared by all parties.
        let mut directory: BTreeMap<String, (String, String)> = BTreeMap::new();
        for (ci, spec) in carriers.iter().enumerate() {
            let addr = carrier_addr(ci);
            for n in &spec.extra_numbers {
                directory.insert(n.clone(), (spec.policy.carrier_id.clone(), addr.clone()));
            }
            for d in devices.iter().filter(|d| d.carrier_id == spec.policy.carrier_id) {
                directory.insert(d.number.clone(), (spec.policy.carrier_id.clone(), addr.clone()));
            }
        }

        let mut carrier_ids = BTreeMap::new();
        let mut carrier_addrs = BTreeMap::new();
        for (ci, spec) in carriers.into_iter().enumerate() {
            let addr = carrier_addr(ci);
            let carrier_id = spec.policy.carrier_id.clone();
            let mut carrier = Carrier::new(
                spec.policy,
                &addr,
                HUB_ADDR,
                seed.wrapping_add(ci as u64),
            );
            for (number, (owner, _)) in &directory {
                if *owner == carrier_id {
                    carrier.add_subscriber(number, auth_key_for(&carrier_id, number));
                }
            }
            carrier.directory.numbers = directory.clone();
            let id = sim.register_endpoint(&addr, SIP_PORT, NodeKind::Carrier(carrier)).unwrap();
            if let NodeKind::Carrier(c) = sim.node_mut(id) {
                c.set_node_id(id);
            }
            carrier_ids.insert(carrier_id.clone(), id);
            carrier_addrs.insert(carrier_id, addr);
        }

        let mut device_ids = BTreeMap::new();
        for (di, spec) in devices.into_iter().enumerate() {
            let carrier_address = carrier_addrs
                .get(&spec.carrier_id)
                .unwrap_or_else(|| panic!("device {} names unknown carrier {}", spec.number, spec.carrier_id))
                .clone();
            let device_address = format!("2001:db8:d::{}", di + 1);
            let key = auth_key_for(&spec.carrier_id, &spec.number);
            let profile = DeviceProfile::new(&spec.number, &device_address, key);
            let mut device = Device::new(profile, spec.approval);
            device.inbox_enabled = spec.inbox_enabled;
            device.mac = spec.mac.map(DeviceMac::new);

            // Each handset finds its IMS core through the routing table.
            let table = render_routing_table(&[
                RouteEntry {
                    prefix: "default".into(),
                    via: "fe80::1".into(),
                    dev: "rmnet0".into(),
                    metric: Some(1024),
                },
                RouteEntry {
                    prefix: carrier_address.clone(),
                    via: "fe80::2".into(),
                    dev: "rmnet1".into(),
                    metric: None,
                },
            ]);
            device.discover(&table).expect("generated routing table is discoverable");

            let id = sim
                .register_endpoint(&device_address, SIP_PORT, NodeKind::Device(device))
                .unwrap();
            if let NodeKind::Device(d) = sim.node_mut(id) {
                d.set_node_id(id);
            }
            device_ids.insert(spec.number, id);
        }

        // The hub routes provider-originated texts by recipient number.
        if let NodeKind::Hub(h) = sim.node_mut(hub_id) {
            h.directory = directory
                .iter()
                .map(|(n, (_, addr))| (n.clone(), addr.clone()))
                .collect();
        }

        World { sim, hub_id, carrier_ids, device_ids }
    }

    pub fn hub(&self) -> &ProviderHub {
        match self.sim.node(self.hub_id) {
            NodeKind::Hub(h) => h,
            _ => unreachable!(),
        }
    }

    pub fn hub_mut(&mut self) -> &mut ProviderHub {
        match self.sim.node_mut(self.hub_id) {
            NodeKind::Hub(h) => h,
            _ => unreachable!(),
        }
    }

    pub fn carrier(&self, carrier_id: &str) -> &Carrier {
        match self.sim.node(self.carrier_ids[carrier_id]) {
            NodeKind::Carrier(c) => c,
            _ => unreachable!(),
        }
    }

    pub fn carrier_mut(&mut self, carrier_id: &str) -> &mut Carrier {
        match self.sim.node_mut(self.carrier_ids[carrier_id]) {
            NodeKind::Carrier(c) => c,
            _ => unreachable!(),
        }
    }

    pub fn device(&self, number: &str) -> &Device {
        match self.sim.node(self.device_ids[number]) {
            NodeKind::Device(d) => d,
            _ => unreachable!(),
        }
    }

    pub fn device_mut(&mut self, number: &str) -> &mut Device {
        match self.sim.node_mut(self.device_ids[number]) {
            NodeKind::Device(d) => d,
            _ => unreachable!(),
        }
    }

    /// Registers every device, staggered one virtual millisecond apart, and
    /// runs the fabric up to the attack start time.
    pub fn register_all(&mut self) {
        let ids: Vec<NodeId> = self.device_ids.values().copied().collect();
        for (i, id) in ids.into_iter().enumerate() {
            let (node, net) = self.sim.node_and_net(id);
            let NodeKind::Device(d) = node else { unreachable!() };
            d.schedule(net, i as Millis, DeviceAction::Register);
        }
        self.sim.run_until(START_MS);
    }

    /// Schedules a device action at an absolute time.
    pub fn schedule_device(&mut self, number: &str, at: Millis, action: DeviceAction) {
        let id = self.device_ids[number];
        let (node, net) = self.sim.node_and_net(id);
        let NodeKind::Device(d) = node else { unreachable!() };
        d.schedule(net, at, action);
    }

    /// Runs a device attack script starting at the current virtual time.
    pub fn run_attack_script(&mut self, number: &str, script: &crate::ue::AttackScript) {
        let id = self.device_ids[number];
        let (node, net) = self.sim.node_and_net(id);
        let NodeKind::Device(d) = node else { unreachable!() };
        d.run_attack_script(net, script);
    }
}
