/* Copyright 2026-present netdx contributors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or
 * implied. See the License for the specific language governing
 * permissions and limitations under the License.
 */

#include "netdx/faults.hpp"

#include <algorithm>

#include "json.hpp"
#include "netdx/simkernel.hpp"

namespace netdx {

using nlohmann::json;

namespace {

/** Protocols fault hooks may touch. Routing, management, and marker
 * traffic models reliable channels that retransmit through lossy or
 * corrupting elements, so per-packet hooks leave them alone; only the
 * structural faults (session blocking) break control traffic. */
bool data_protocol(Protocol p) {
  return p == Protocol::kIcmp || p == Protocol::kTcp || p == Protocol::kUdp;
}

/** splitmix64 finalizer: cheap, bijective, and never the identity. */
std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

/** Moves the prefix by flipping its lowest network bit: same length,
 * always canonical, never equal to the original. */
Prefix displaced_prefix(const Prefix& p) {
  const std::uint32_t bit = p.len == 0 ? 0x80000000u : (1u << (32 - p.len));
  return Prefix::of(Ipv4Addr{p.addr.v ^ bit}, p.len);
}

struct TypeRow {
  FaultType type;
  const char* name;
  FaultLocation::Kind kind;
};

constexpr TypeRow kTypeTable[] = {
    {FaultType::kSilentDropInSwitch, "SilentDropInSwitch",
     FaultLocation::Kind::kSwitch},
    {FaultType::kSilentDropOnLink, "SilentDropOnLink",
     FaultLocation::Kind::kLink},
    {FaultType::kCorruptionOnLinkIp, "CorruptionOnLinkIP",
     FaultLocation::Kind::kLink},
    {FaultType::kIncorrectDecrementTtl, "IncorrectDecrementTTL",
     FaultLocation::Kind::kSwitch},
    {FaultType::kPacketPayloadCorruptionInSwitch,
     "PacketPayloadCorruptionInSwitch", FaultLocation::Kind::kSwitch},
    {FaultType::kIncorrectForwardingDrop, "IncorrectForwardingDrop",
     FaultLocation::Kind::kSwitch},
    {FaultType::kFibDiscrepancy, "FIBDiscrepancy",
     FaultLocation::Kind::kSwitch},
    {FaultType::kIngressBgpUpdateModification, "IngressBgpUpdateModification",
     FaultLocation::Kind::kSession},
    {FaultType::kBgpNeighborMissing, "BgpNeighborMissing",
     FaultLocation::Kind::kSession},
    {FaultType::kEgressBgpUpdateModification, "EgressBgpUpdateModification",
     FaultLocation::Kind::kSession},
};

FaultLocation::Kind location_kind_for(FaultType t) {
  for (const auto& row : kTypeTable)
    if (row.type == t) return row.kind;
  throw FaultError("unknown fault type value");
}

}  // namespace

const char* fault_type_name(FaultType t) {
  for (const auto& row : kTypeTable)
    if (row.type == t) return row.name;
  return "?";
}

std::optional<FaultType> fault_type_from_name(const std::string& name) {
  for (const auto& row : kTypeTable)
    if (name == row.name) return row.type;
  return std::nullopt;
}

std::vector<FaultType> all_fault_types() {
  std::vector<FaultType> out;
  for (const auto& row : kTypeTable) out.push_back(row.type);
  return out;
}

const char* fault_category_name(FaultCategory c) {
  switch (c) {
    case FaultCategory::kPacketForwarding: return "packet-forwarding";
    case FaultCategory::kPacketTransformation: return "packet-transformation";
    case FaultCategory::kDataPlaneTableGeneration:
      return "data-plane-table-generation";
    case FaultCategory::kRouteTableGeneration: return "route-table-generation";
    case FaultCategory::kRouteAdvertisementReception:
      return "route-advertisement-reception";
    case FaultCategory::kRouteAdvertisementGeneration:
      return "route-advertisement-generation";
    case FaultCategory::kExternalInteraction: return "external-interaction";
  }
  return "?";
}

std::vector<FaultCategory> fault_categories_of(FaultType t) {
  switch (t) {
    case FaultType::kSilentDropInSwitch:
    case FaultType::kSilentDropOnLink:
    case FaultType::kIncorrectForwardingDrop:
      return {FaultCategory::kPacketForwarding};
    case FaultType::kIncorrectDecrementTtl:
    case FaultType::kPacketPayloadCorruptionInSwitch:
    case FaultType::kCorruptionOnLinkIp:
      return {FaultCategory::kPacketTransformation};
    case FaultType::kFibDiscrepancy:
      return {FaultCategory::kDataPlaneTableGeneration};
    case FaultType::kIngressBgpUpdateModification:
      return {FaultCategory::kRouteTableGeneration,
              FaultCategory::kRouteAdvertisementReception};
    case FaultType::kEgressBgpUpdateModification:
      return {FaultCategory::kRouteAdvertisementGeneration};
    case FaultType::kBgpNeighborMissing:
      return {FaultCategory::kExternalInteraction};
  }
  return {};
}

// ---------------------------------------------------------------------
// FaultLocation
// ---------------------------------------------------------------------

FaultLocation FaultLocation::at_switch(SwitchId id) {
  FaultLocation l;
  l.kind = Kind::kSwitch;
  l.switch_id = std::move(id);
  return l;
}

FaultLocation FaultLocation::on_link(LinkId id) {
  FaultLocation l;
  l.kind = Kind::kLink;
  l.link_id = std::move(id);
  return l;
}

FaultLocation FaultLocation::on_session(SwitchId owner, SwitchId session_peer) {
  FaultLocation l;
  l.kind = Kind::kSession;
  l.switch_id = std::move(owner);
  l.peer = std::move(session_peer);
  return l;
}

std::string FaultLocation::str() const {
  switch (kind) {
    case Kind::kSwitch: return switch_id;
    case Kind::kLink: return link_id;
    case Kind::kSession: return switch_id + ":" + peer;
  }
  return "?";
}

std::optional<FaultLocation> FaultLocation::parse(const std::string& text) {
  if (text.empty()) return std::nullopt;
  if (auto colon = text.find(':'); colon != std::string::npos) {
    SwitchId owner = text.substr(0, colon);
    SwitchId peer = text.substr(colon + 1);
    if (owner.empty() || peer.empty()) return std::nullopt;
    return on_session(std::move(owner), std::move(peer));
  }
  if (text.find('~') != std::string::npos) return on_link(text);
  return at_switch(text);
}

// ---------------------------------------------------------------------
// FaultSpec
// ---------------------------------------------------------------------

std::string FaultSpec::to_json() const {
  json j{{"type", fault_type_name(type)}, {"at", where.str()}};
  j["probability"] = probability;
  if (flow) j["flow"] = flow->str();
  if (prefix) j["prefix"] = prefix->str();
  if (rewrite_as_path) j["rewriteAsPath"] = true;
  j["ttlDelta"] = ttl_delta;
  j["seed"] = seed;
  return j.dump();
}

FaultSpec FaultSpec::from_json(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object())
    throw FaultError("fault spec is not a JSON object");
  FaultSpec spec;
  auto type = fault_type_from_name(j.value("type", ""));
  if (!type) throw FaultError("unknown fault type: " + j.value("type", ""));
  spec.type = *type;
  auto loc = FaultLocation::parse(j.value("at", ""));
  if (!loc) throw FaultError("unparseable fault location: " + j.value("at", ""));
  spec.where = *loc;
  spec.probability = j.value("probability", 0.3);
  if (j.contains("flow")) {
    auto f = FlowSpec::parse(j["flow"].get<std::string>());
    if (!f) throw FaultError("unparseable flow: " + j["flow"].get<std::string>());
    spec.flow = *f;
  }
  if (j.contains("prefix")) {
    auto p = Prefix::parse(j["prefix"].get<std::string>());
    if (!p)
      throw FaultError("unparseable prefix: " + j["prefix"].get<std::string>());
    spec.prefix = *p;
  }
  spec.rewrite_as_path = j.value("rewriteAsPath", false);
  spec.ttl_delta = j.value("ttlDelta", 64);
  spec.seed = j.value("seed", std::uint64_t{0});
  return spec;
}

std::string FaultSpec::str() const {
  std::string out = fault_type_name(type);
  out += " at ";
  out += where.str();
  if (flow) out += " flow=" + flow->str();
  if (prefix) out += " prefix=" + prefix->str();
  if (rewrite_as_path) out += " aspath";
  return out;
}

// ---------------------------------------------------------------------
// FaultInjector
// ---------------------------------------------------------------------

namespace {

class FaultHooks;

}  // namespace

struct FaultInjector::Record {
  FaultHandle handle = 0;
  FaultSpec spec;
  Simulation* sim = nullptr;
  Rng rng{0};
  bool armed = false;
  bool reverted = false;  // revert requested (location freed)
  bool disarmed = false;  // hooks actually removed
  std::uint64_t affected = 0;
  std::uint64_t muted_baseline = 0;
  std::uint64_t salt = 0;
  std::unique_ptr<PipelineHooks> hooks;
};

namespace {

/** One per faulted switch; dispatches on the record's type so every
 * virtual stays healthy except the armed one. */
class FaultHooks final : public PipelineHooks {
 public:
  explicit FaultHooks(FaultInjector::Record* rec) : rec_(rec) {}

  bool silent_drop(const Packet& p, int) override {
    if (rec_->spec.type != FaultType::kSilentDropInSwitch) return false;
    if (!data_protocol(p.protocol)) return false;
    if (rec_->rng.uniform() >= rec_->spec.probability) return false;
    ++rec_->affected;
    return true;
  }

  bool forced_table_miss(const Packet& p, int) override {
    if (rec_->spec.type != FaultType::kIncorrectForwardingDrop) return false;
    if (!data_protocol(p.protocol)) return false;
    if (rec_->spec.flow && !flow_matches(*rec_->spec.flow, p)) return false;
    ++rec_->affected;
    return true;
  }

  int ttl_decrement(const Packet& p) override {
    if (rec_->spec.type != FaultType::kIncorrectDecrementTtl) return 1;
    if (!data_protocol(p.protocol)) return 1;
    ++rec_->affected;
    return rec_->spec.ttl_delta;
  }

  std::uint64_t transform_digest(const Packet& p,
                                 std::uint64_t digest) override {
    if (rec_->spec.type != FaultType::kPacketPayloadCorruptionInSwitch)
      return digest;
    if (!data_protocol(p.protocol)) return digest;
    ++rec_->affected;
    return mix64(digest ^ rec_->salt);
  }

 private:
  FaultInjector::Record* rec_;
};

/** Rewrites announce/withdraw/snapshot content for the target prefix. */
void tamper_message(FaultInjector::Record& rec, AsNumber poison,
                    BgpMessage& msg) {
  const Prefix target = *rec.spec.prefix;
  bool hit = false;
  auto tamper_route = [&](Prefix& prefix, std::vector<AsNumber>& path) {
    if (prefix != target) return;
    hit = true;
    if (rec.spec.rewrite_as_path)
      path.insert(path.begin(), poison);
    else
      prefix = displaced_prefix(prefix);
  };
  switch (msg.kind) {
    case BgpMessage::Kind::kAnnounce:
      tamper_route(msg.prefix, msg.as_path);
      break;
    case BgpMessage::Kind::kWithdraw:
      // Keep withdrawals consistent with what the tampered announcements
      // actually installed, so retractions still retract.
      if (!rec.spec.rewrite_as_path && msg.prefix == target) {
        msg.prefix = displaced_prefix(msg.prefix);
        hit = true;
      }
      break;
    case BgpMessage::Kind::kSnapshot:
      for (auto& r : msg.routes) tamper_route(r.prefix, r.as_path);
      break;
    default:
      break;
  }
  if (hit) ++rec.affected;
}

}  // namespace

FaultInjector::FaultInjector(Simulation& sim) : sim_(sim) {}

FaultInjector::~FaultInjector() {
  // Tear down directly: queued events that still reference a record keep
  // it alive through their shared_ptr and no-op on the flags.
  for (auto& [h, rec] : records_) {
    if (rec->armed && !rec->disarmed) disarm(*rec);
    rec->reverted = true;
  }
}

void FaultInjector::validate(const FaultSpec& spec) const {
  const Topology& topo = sim_.topology();
  if (location_kind_for(spec.type) != spec.where.kind)
    throw FaultError(std::string(fault_type_name(spec.type)) +
                     " cannot sit at location " + spec.where.str());
  switch (spec.where.kind) {
    case FaultLocation::Kind::kSwitch:
      if (!topo.switch_config(spec.where.switch_id))
        throw FaultError("no such switch: " + spec.where.switch_id);
      break;
    case FaultLocation::Kind::kLink: {
      const LinkConfig* lc = topo.link(spec.where.link_id);
      if (!lc) throw FaultError("no such link: " + spec.where.link_id);
      if (!topo.switch_config(lc->a_node) || !topo.switch_config(lc->b_node))
        throw FaultError("link faults need a switch-to-switch link: " +
                         spec.where.link_id);
      break;
    }
    case FaultLocation::Kind::kSession: {
      const SwitchConfig* sc = topo.switch_config(spec.where.switch_id);
      if (!sc) throw FaultError("no such switch: " + spec.where.switch_id);
      if (!sc->session(spec.where.peer))
        throw FaultError(spec.where.switch_id + " has no session with " +
                         spec.where.peer);
      break;
    }
  }
  if (spec.probability < 0.0 || spec.probability > 1.0)
    throw FaultError("probability out of [0,1]");
  if (spec.type == FaultType::kIncorrectDecrementTtl) {
    if (spec.ttl_delta == 1)
      throw FaultError("a TTL delta of 1 is the healthy decrement");
    if (spec.ttl_delta < 0 || spec.ttl_delta > 255)
      throw FaultError("ttl delta out of [0,255]");
  }
  if ((spec.type == FaultType::kFibDiscrepancy ||
       spec.type == FaultType::kIngressBgpUpdateModification ||
       spec.type == FaultType::kEgressBgpUpdateModification) &&
      !spec.prefix)
    throw FaultError(std::string(fault_type_name(spec.type)) +
                     " needs a prefix selector");
}

FaultHandle FaultInjector::inject(const FaultSpec& spec) {
  validate(spec);
  const std::string key = spec.where.str();
  if (auto it = occupied_.find(key); it != occupied_.end())
    throw FaultError("location " + key + " already holds " +
                     fault_type_name(records_.at(it->second)->spec.type));

  auto rec = std::make_shared<Record>();
  rec->handle = ++next_handle_;
  rec->spec = spec;
  rec->sim = &sim_;
  rec->rng = Rng::stream(spec.seed, "fault:" + std::string(fault_type_name(
                                        spec.type)) + ":" + key);
  rec->salt = mix64(spec.seed ^ 0x5eedfau);
  records_[rec->handle] = rec;
  occupied_[key] = rec->handle;

  sim_.schedule(0, "fault-arm " + key, [this, rec] {
    if (rec->reverted) return;  // reverted before the arm event ran
    arm(*rec);
  });
  return rec->handle;
}

void FaultInjector::revert(FaultHandle h) {
  auto it = records_.find(h);
  if (it == records_.end())
    throw FaultError("unknown fault handle: " + std::to_string(h));
  auto rec = it->second;
  if (rec->reverted)
    throw FaultError("fault already reverted: " + rec->spec.str());
  rec->reverted = true;
  occupied_.erase(rec->spec.where.str());
  sim_.schedule(0, "fault-revert " + rec->spec.where.str(), [this, rec] {
    if (rec->armed && !rec->disarmed) disarm(*rec);
  });
}

void FaultInjector::revert_all() {
  for (auto& [h, rec] : records_)
    if (!rec->reverted) revert(h);
}

bool FaultInjector::active(FaultHandle h) const {
  auto it = records_.find(h);
  return it != records_.end() && !it->second->reverted;
}

const FaultInjector::Record& FaultInjector::checked(FaultHandle h) const {
  auto it = records_.find(h);
  if (it == records_.end())
    throw FaultError("unknown fault handle: " + std::to_string(h));
  return *it->second;
}

const FaultSpec& FaultInjector::spec(FaultHandle h) const {
  return checked(h).spec;
}

std::uint64_t FaultInjector::affected_count(FaultHandle h) const {
  const Record& rec = checked(h);
  if (rec.spec.type == FaultType::kBgpNeighborMissing && rec.armed &&
      !rec.disarmed) {
    const auto& tap =
        sim_.session_tap(rec.spec.where.switch_id, rec.spec.where.peer);
    return tap.muted_count - rec.muted_baseline;
  }
  return rec.affected;
}

std::vector<FaultHandle> FaultInjector::active_handles() const {
  std::vector<FaultHandle> out;
  for (const auto& [h, rec] : records_)
    if (!rec->reverted) out.push_back(h);
  return out;
}

void FaultInjector::arm(Record& rec) {
  const FaultSpec& spec = rec.spec;
  switch (spec.type) {
    case FaultType::kSilentDropInSwitch:
    case FaultType::kIncorrectDecrementTtl:
    case FaultType::kPacketPayloadCorruptionInSwitch:
    case FaultType::kIncorrectForwardingDrop:
      rec.hooks = std::make_unique<FaultHooks>(&rec);
      sim_.dataplane(spec.where.switch_id).set_hooks(rec.hooks.get());
      break;
    case FaultType::kFibDiscrepancy: {
      const Prefix target = *spec.prefix;
      Record* rp = &rec;
      sim_.set_fib_filter(spec.where.switch_id,
                          [rp, target](const FibEntry& e) {
                            if (e.prefix != target) return false;
                            ++rp->affected;
                            return true;
                          });
      sim_.force_fib_sync(spec.where.switch_id);
      break;
    }
    case FaultType::kSilentDropOnLink: {
      Record* rp = &rec;
      sim_.link_runtime(spec.where.link_id).transit = [rp](Packet& p) {
        if (!data_protocol(p.protocol)) return false;
        if (rp->rng.uniform() >= rp->spec.probability) return false;
        ++rp->affected;
        return true;
      };
      break;
    }
    case FaultType::kCorruptionOnLinkIp: {
      Record* rp = &rec;
      sim_.link_runtime(spec.where.link_id).transit = [rp](Packet& p) {
        if (!data_protocol(p.protocol)) return false;
        if (rp->rng.uniform() >= rp->spec.probability) return false;
        // Header damage the receiving pipeline's checksum verify exposes;
        // the packet is not resealed.
        p.dst_ip.v ^= 1u;
        ++rp->affected;
        return false;
      };
      break;
    }
    case FaultType::kIngressBgpUpdateModification: {
      Record* rp = &rec;
      const AsNumber own_asn =
          sim_.topology().switch_config(spec.where.switch_id)->asn;
      sim_.session_tap(spec.where.switch_id, spec.where.peer).mutate_ingress =
          [rp, own_asn](BgpMessage& m) { tamper_message(*rp, own_asn, m); };
      break;
    }
    case FaultType::kEgressBgpUpdateModification: {
      Record* rp = &rec;
      const AsNumber peer_asn =
          sim_.topology().switch_config(spec.where.peer)->asn;
      sim_.session_tap(spec.where.switch_id, spec.where.peer).mutate_egress =
          [rp, peer_asn](BgpMessage& m) { tamper_message(*rp, peer_asn, m); };
      break;
    }
    case FaultType::kBgpNeighborMissing: {
      auto& tap = sim_.session_tap(spec.where.switch_id, spec.where.peer);
      rec.muted_baseline = tap.muted_count;
      tap.mute_egress = true;
      break;
    }
  }
  rec.armed = true;
}

void FaultInjector::disarm(Record& rec) {
  const FaultSpec& spec = rec.spec;
  switch (spec.type) {
    case FaultType::kSilentDropInSwitch:
    case FaultType::kIncorrectDecrementTtl:
    case FaultType::kPacketPayloadCorruptionInSwitch:
    case FaultType::kIncorrectForwardingDrop:
      sim_.dataplane(spec.where.switch_id).set_hooks(nullptr);
      rec.hooks.reset();
      break;
    case FaultType::kFibDiscrepancy:
      sim_.set_fib_filter(spec.where.switch_id, nullptr);
      sim_.force_fib_sync(spec.where.switch_id);
      break;
    case FaultType::kSilentDropOnLink:
    case FaultType::kCorruptionOnLinkIp:
      sim_.link_runtime(spec.where.link_id).transit = nullptr;
      break;
    case FaultType::kIngressBgpUpdateModification: {
      sim_.session_tap(spec.where.switch_id, spec.where.peer).mutate_ingress =
          nullptr;
      // Pull the peer's true table again; the snapshot replaces the
      // session RIB-in, washing out every tampered route.
      if (!sim_.daemon_down(spec.where.switch_id)) {
        auto& cp = sim_.controlplane(spec.where.switch_id);
        for (auto& o : cp.resync_exchange())
          sim_.send_bgp(spec.where.switch_id, o.peer, o.msg);
      }
      break;
    }
    case FaultType::kEgressBgpUpdateModification: {
      sim_.session_tap(spec.where.switch_id, spec.where.peer).mutate_egress =
          nullptr;
      // Push the true table; receivers replace this session's RIB-in.
      if (!sim_.daemon_down(spec.where.switch_id)) {
        auto& cp = sim_.controlplane(spec.where.switch_id);
        for (auto& o : cp.resync_exchange())
          sim_.send_bgp(spec.where.switch_id, o.peer, o.msg);
      }
      break;
    }
    case FaultType::kBgpNeighborMissing: {
      auto& tap = sim_.session_tap(spec.where.switch_id, spec.where.peer);
      rec.affected = tap.muted_count - rec.muted_baseline;
      tap.mute_egress = false;
      // Sessions that held on (or re-open) resynchronize explicitly so
      // updates lost while muted are replayed even without a flap.
      if (!sim_.daemon_down(spec.where.switch_id)) {
        auto& cp = sim_.controlplane(spec.where.switch_id);
        for (auto& o : cp.resync_exchange())
          sim_.send_bgp(spec.where.switch_id, o.peer, o.msg);
      }
      break;
    }
  }
  rec.disarmed = true;
}

}  // namespace netdx
