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

#include "netdx/simkernel.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <set>

#include "netdx/agent.hpp"
#include "netdx/checksum.hpp"

namespace netdx {

// ---------------------------------------------------------------------
// Rng / hashing
// ---------------------------------------------------------------------

static std::uint64_t splitmix64(std::uint64_t& s) {
  s += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = s;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t Rng::next() { return splitmix64(state_); }

std::uint64_t Rng::below(std::uint64_t bound) {
  if (bound < 2) return 0;
  const std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    std::uint64_t r = next();
    if (r >= threshold) return r % bound;
  }
}

double Rng::uniform() {
  return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

Rng Rng::stream(std::uint64_t seed, const std::string& purpose) {
  std::uint64_t h = fnv1a(kFnvBasis, &seed, sizeof seed);
  h = fnv1a(h, purpose.data(), purpose.size());
  Rng r(h);
  r.next();  // decorrelate from the raw hash
  return r;
}

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

// ---------------------------------------------------------------------
// Management framing
// ---------------------------------------------------------------------

std::string mgmt_encode(const std::string& json) {
  std::string out;
  out.reserve(json.size() + 4);
  const std::uint32_t n = static_cast<std::uint32_t>(json.size());
  out.push_back(static_cast<char>((n >> 24) & 0xff));
  out.push_back(static_cast<char>((n >> 16) & 0xff));
  out.push_back(static_cast<char>((n >> 8) & 0xff));
  out.push_back(static_cast<char>(n & 0xff));
  out += json;
  return out;
}

std::optional<std::string> mgmt_decode(const std::string& wire) {
  if (wire.size() < 4) return std::nullopt;
  const auto b = [&](std::size_t i) {
    return static_cast<std::uint32_t>(static_cast<unsigned char>(wire[i]));
  };
  const std::uint32_t n = (b(0) << 24) | (b(1) << 16) | (b(2) << 8) | b(3);
  if (wire.size() != n + 4u) return std::nullopt;
  return wire.substr(4);
}

// ---------------------------------------------------------------------
// Construction
// ---------------------------------------------------------------------

Simulation::Simulation(Topology topo, std::uint64_t seed, SimConfig cfg)
    : topo_(std::move(topo)), seed_(seed), cfg_(cfg) {
  topo_.validate();

  for (const auto& sc : topo_.switches) switch_ids_.push_back(sc.id);
  std::sort(switch_ids_.begin(), switch_ids_.end());

  for (const auto& sc : topo_.switches) {
    SwitchRuntime rt;
    rt.cfg = &sc;
    rt.dp = std::make_unique<DataPlane>(sc, cfg_.trigger,
                                        cfg_.header_log_capacity);
    rt.dp->set_acl(sc.acl_rules);
    rt.cp = std::make_unique<ControlPlane>(topo_, sc.id, cfg_.timers);
    rt.agent = std::make_unique<Agent>(*this, sc.id);
    switches_.emplace(sc.id, std::move(rt));
  }
  for (const auto& hc : topo_.hosts) {
    HostRuntime hr;
    hr.cfg = &hc;
    hosts_.emplace(hc.id, std::move(hr));
  }
  for (const auto& lc : topo_.links) {
    LinkRuntime lr;
    lr.cfg = &lc;
    links_.emplace(lc.id, std::move(lr));
    if (hosts_.count(lc.a_node)) host_port_[lc.a_node] = lc.a_if;
    if (hosts_.count(lc.b_node)) host_port_[lc.b_node] = lc.b_if;
  }

  install_intra_as_statics();
  for (auto& [id, rt] : switches_) {
    rt.cp->start(0);
    sync_fib(rt);
  }
  schedule(0, "tick", [this] { control_tick(); });
}

Simulation::~Simulation() = default;

/**
 * Synthesizes the intra-AS routing that a real deployment's IGP would
 * provide: for every same-AS pair (S, T), S gets a static /32 to T's
 * loopback out its interface toward the first hop of a shortest path.
 * Ties break toward the lowest-id neighbor, so the chosen paths are a
 * pure function of the topology.
 */
void Simulation::install_intra_as_statics() {
  std::map<AsNumber, std::vector<SwitchId>> by_as;
  for (const auto& sc : topo_.switches) by_as[sc.asn].push_back(sc.id);
  for (auto& [asn, members] : by_as) std::sort(members.begin(), members.end());

  // Same-AS switch adjacency and the interface used toward each neighbor.
  std::map<SwitchId, std::set<SwitchId>> adj;
  std::map<std::pair<SwitchId, SwitchId>, int> iface_toward;
  for (const auto& lc : topo_.links) {
    const SwitchConfig* a = topo_.switch_config(lc.a_node);
    const SwitchConfig* b = topo_.switch_config(lc.b_node);
    if (!a || !b || a->asn != b->asn) continue;
    adj[a->id].insert(b->id);
    adj[b->id].insert(a->id);
    auto note = [&](const SwitchId& s, const SwitchId& n, int own_if) {
      auto key = std::make_pair(s, n);
      auto it = iface_toward.find(key);
      if (it == iface_toward.end() || own_if < it->second)
        iface_toward[key] = own_if;
    };
    note(a->id, b->id, lc.a_if);
    note(b->id, a->id, lc.b_if);
  }

  for (const auto& [asn, members] : by_as) {
    (void)asn;
    for (const SwitchId& target : members) {
      // BFS distances from the target within the AS.
      std::map<SwitchId, int> dist;
      dist[target] = 0;
      std::vector<SwitchId> frontier{target};
      while (!frontier.empty()) {
        std::vector<SwitchId> next;
        for (const auto& u : frontier) {
          auto it = adj.find(u);
          if (it == adj.end()) continue;
          for (const auto& v : it->second) {
            if (dist.count(v)) continue;
            dist[v] = dist[u] + 1;
            next.push_back(v);
          }
        }
        std::sort(next.begin(), next.end());
        frontier = std::move(next);
      }
      const Ipv4Addr lb = topo_.switch_config(target)->loopback;
      for (const SwitchId& s : members) {
        if (s == target || !dist.count(s)) continue;
        auto it = adj.find(s);
        if (it == adj.end()) continue;
        for (const SwitchId& n : it->second) {  // ordered: lowest id wins
          auto dn = dist.find(n);
          if (dn == dist.end() || dn->second != dist[s] - 1) continue;
          switches_.at(s).cp->add_runtime_static(
              {Prefix::host_route(lb), iface_toward.at({s, n})});
          break;
        }
      }
    }
  }
}

// ---------------------------------------------------------------------
// Run loop
// ---------------------------------------------------------------------

void Simulation::schedule(SimTime delay, std::string tag,
                          std::function<void()> fn) {
  if (delay < 0) delay = 0;
  queue_.push(Ev{now_ + delay, ++seq_, std::move(tag), std::move(fn)});
}

void Simulation::log_event(SimTime t, std::uint64_t seq,
                           const std::string& tag) {
  char buf[160];
  int n = std::snprintf(buf, sizeof buf, "%" PRId64 "|%" PRIu64 "|%s", t, seq,
                        tag.c_str());
  if (n < 0) return;
  if (n > static_cast<int>(sizeof buf) - 1) n = sizeof buf - 1;
  log_hash_ = fnv1a(log_hash_, buf, static_cast<std::size_t>(n));
  if (cfg_.record_event_log) log_lines_.emplace_back(buf, buf + n);
}

EventStats Simulation::run_until(SimTime deadline) {
  EventStats st;
  const std::uint64_t start_events = events_;
  while (!queue_.empty() && queue_.top().t <= deadline) {
    Ev ev = queue_.top();
    queue_.pop();
    now_ = ev.t;
    ++events_;
    if (events_ - start_events > cfg_.livelock_cap)
      throw SimError("livelock guard tripped: over " +
                     std::to_string(cfg_.livelock_cap) +
                     " events in one run call");
    log_event(ev.t, ev.seq, ev.tag);
    ev.fn();
  }
  if (deadline > now_) now_ = deadline;
  st.events = events_ - start_events;
  st.end_time = now_;
  st.converged_at = last_table_change();
  st.quiescent = switches_.empty() ||
                 now_ - st.converged_at >= quiescence_settle();
  return st;
}

EventStats Simulation::run_until_quiescent(SimTime deadline, SimTime settle) {
  if (settle <= 0) settle = quiescence_settle();
  EventStats agg;
  agg.end_time = now_;
  if (switches_.empty()) {
    agg.quiescent = true;
    return agg;
  }
  bool first = true;
  while (now_ < deadline) {
    SimTime target = std::min(deadline, last_table_change() + settle);
    // Always run at least one control tick so state changed just before
    // the call (a revived process, a new fault) gets a chance to act.
    if (first) target = std::min(deadline, std::max(target, now_ + cfg_.control_tick_us));
    first = false;
    if (target <= now_) break;
    EventStats st = run_until(target);
    agg.events += st.events;
  }
  agg.end_time = now_;
  agg.converged_at = last_table_change();
  agg.quiescent = now_ - agg.converged_at >= settle;
  return agg;
}

SimTime Simulation::quiescence_settle() const {
  return cfg_.quiescence_settle_us > 0 ? cfg_.quiescence_settle_us
                                       : 2 * cfg_.timers.hold_us;
}

SimTime Simulation::last_table_change() const {
  SimTime t = 0;
  for (const auto& [id, rt] : switches_)
    t = std::max(t, rt.cp->last_table_change());
  return t;
}

void Simulation::control_tick() {
  for (const auto& id : switch_ids_) {
    auto& rt = switches_.at(id);
    if (rt.node_down) continue;
    if (!rt.daemon_down) {
      for (auto& o : rt.cp->tick(now_)) send_bgp(id, o.peer, o.msg);
      sync_fib_if_stale(rt);
    }
    if (!rt.agent_down) rt.agent->tick(now_);
  }
  schedule(cfg_.control_tick_us, "tick", [this] { control_tick(); });
}

// ---------------------------------------------------------------------
// FIB synchronization
// ---------------------------------------------------------------------

void Simulation::sync_fib(SwitchRuntime& rt) {
  std::vector<FibEntry> fib = rt.cp->compute_fib();
  for (auto& e : fib) {
    if (e.egress_interface != FibEntry::kCpuPort)
      e.next_hop_mac = resolve_next_hop_mac(rt.cfg->id, e.egress_interface);
  }
  if (rt.fib_filter) {
    fib.erase(std::remove_if(fib.begin(), fib.end(),
                             [&](const FibEntry& e) { return rt.fib_filter(e); }),
              fib.end());
  }
  rt.dp->set_fib(std::move(fib));
  rt.fib_synced_at = now_;
  rt.fib_synced_epoch = rt.cp->rib_change_count();
}

void Simulation::sync_fib_if_stale(SwitchRuntime& rt) {
  if (rt.cp->rib_change_count() != rt.fib_synced_epoch) sync_fib(rt);
}

void Simulation::force_fib_sync(const SwitchId& id) { sync_fib(sw(id)); }

void Simulation::set_fib_filter(const SwitchId& id,
                                std::function<bool(const FibEntry&)> hide) {
  auto& rt = sw(id);
  rt.fib_filter = std::move(hide);
  sync_fib(rt);
}

// ---------------------------------------------------------------------
// Node/fault accessors
// ---------------------------------------------------------------------

Simulation::SwitchRuntime& Simulation::sw(const SwitchId& id) {
  auto it = switches_.find(id);
  if (it == switches_.end()) throw SimError("unknown switch: " + id);
  return it->second;
}

const Simulation::SwitchRuntime& Simulation::sw(const SwitchId& id) const {
  auto it = switches_.find(id);
  if (it == switches_.end()) throw SimError("unknown switch: " + id);
  return it->second;
}

Simulation::HostRuntime& Simulation::host_rt(const HostId& id) {
  auto it = hosts_.find(id);
  if (it == hosts_.end()) throw SimError("unknown host: " + id);
  return it->second;
}

DataPlane& Simulation::dataplane(const SwitchId& id) { return *sw(id).dp; }
ControlPlane& Simulation::controlplane(const SwitchId& id) {
  return *sw(id).cp;
}
Agent& Simulation::agent(const SwitchId& id) { return *sw(id).agent; }

LinkRuntime& Simulation::link_runtime(const LinkId& id) {
  auto it = links_.find(id);
  if (it == links_.end()) throw SimError("unknown link: " + id);
  return it->second;
}

SessionTap& Simulation::session_tap(const SwitchId& sw_id,
                                    const SwitchId& peer) {
  return taps_[{sw_id, peer}];
}

void Simulation::set_daemon_down(const SwitchId& id, bool down) {
  sw(id).daemon_down = down;
}
bool Simulation::daemon_down(const SwitchId& id) const {
  return sw(id).daemon_down;
}
void Simulation::set_agent_down(const SwitchId& id, bool down) {
  sw(id).agent_down = down;
}
bool Simulation::agent_down(const SwitchId& id) const {
  return sw(id).agent_down;
}
void Simulation::set_node_down(const SwitchId& id, bool down) {
  sw(id).node_down = down;
}
bool Simulation::node_down(const SwitchId& id) const {
  return sw(id).node_down;
}

Ipv4Addr Simulation::diagnosis_host_addr() const {
  const HostConfig* hc = topo_.host_config(topo_.diagnosis_host);
  return hc ? hc->ip : Ipv4Addr{};
}

const LinkConfig* Simulation::link_between(const NodeId& a,
                                           const NodeId& b) const {
  for (const auto& lc : topo_.links) {
    if ((lc.a_node == a && lc.b_node == b) ||
        (lc.a_node == b && lc.b_node == a))
      return &lc;
  }
  return nullptr;
}

MacAddr Simulation::resolve_next_hop_mac(const SwitchId& id,
                                         int egress_if) const {
  const LinkConfig* lc = topo_.link_at(id, egress_if);
  if (!lc) return {};
  const NodeId peer = lc->peer_of(id);
  if (const SwitchConfig* pc = topo_.switch_config(peer)) {
    const InterfaceConfig* ic = pc->interface(lc->if_of(peer));
    return ic ? ic->mac : MacAddr{};
  }
  if (const HostConfig* hc = topo_.host_config(peer)) return hc->mac;
  return {};
}

// ---------------------------------------------------------------------
// Packet movement
// ---------------------------------------------------------------------

void Simulation::transmit(const NodeId& from, int if_index, Packet pkt) {
  if (auto it = switches_.find(from);
      it != switches_.end() && it->second.node_down)
    return;
  const LinkConfig* lc = topo_.link_at(from, if_index);
  if (!lc) return;
  LinkRuntime& lr = links_.at(lc->id);
  if (!lr.up) return;
  if (lr.transit) {
    const bool swallow = lr.transit(pkt);
    if (swallow && pkt.protocol != Protocol::kMarker) return;
  }
  const NodeId peer = lc->peer_of(from);
  const int peer_if = lc->if_of(peer);
  const bool to_switch = switches_.count(peer) > 0;
  schedule(lc->latency_us, "rx " + peer,
           [this, peer, peer_if, to_switch, pkt = std::move(pkt)] {
             if (to_switch)
               switch_ingress(peer, peer_if, pkt);
             else
               host_deliver(peer, pkt);
           });
}

void Simulation::switch_ingress(const SwitchId& id, int if_index, Packet pkt) {
  auto& rt = sw(id);
  if (rt.node_down) return;
  if (rt.agent->trace_filter() &&
      flow_matches(*rt.agent->trace_filter(), pkt))
    pkt.trace_bit = true;

  MacAddr nh{};
  if (const FibEntry* fe = rt.dp->fib_lookup(pkt.dst_ip);
      fe && fe->egress_interface != FibEntry::kCpuPort)
    nh = fe->next_hop_mac;

  PipelineResult res = rt.dp->process(pkt, if_index, now_, nh);
  if (res.mirror_ingress && !rt.agent_down)
    rt.agent->on_checksum_mirror(pkt, false, now_);
  if (res.mirror_egress && !rt.agent_down)
    rt.agent->on_checksum_mirror(res.out, true, now_);
  if (res.fault_trigger && !rt.agent_down)
    rt.agent->on_fault_trigger(if_index, now_);

  switch (res.decision.outcome) {
    case ForwardingDecision::Outcome::kForward:
      rt.dp->record_egress(res.out, res.decision.egress_interface);
      transmit(id, res.decision.egress_interface, std::move(res.out));
      break;
    case ForwardingDecision::Outcome::kToCpu:
      rt.dp->record_egress(res.out, FibEntry::kCpuPort);
      cpu_receive(id, std::move(res.out), if_index);
      break;
    case ForwardingDecision::Outcome::kDrop:
      break;
  }
}

void Simulation::cpu_receive(const SwitchId& id, Packet pkt, int ingress_if) {
  auto& rt = sw(id);
  switch (pkt.protocol) {
    case Protocol::kBgp: {
      auto blob = std::dynamic_pointer_cast<const BgpBlob>(pkt.control);
      if (!blob) return;
      BgpMessage msg = blob->msg;
      if (!rt.agent_down) rt.agent->on_control_ingress(msg.sender, msg, now_);
      if (auto it = taps_.find({id, msg.sender});
          it != taps_.end() && it->second.mutate_ingress)
        it->second.mutate_ingress(msg);
      if (rt.daemon_down) return;
      for (auto& o : rt.cp->handle_message(msg, now_))
        send_bgp(id, o.peer, o.msg);
      sync_fib_if_stale(rt);
      break;
    }
    case Protocol::kMgmt:
      if (!rt.agent_down) rt.agent->on_mgmt(pkt, ingress_if);
      break;
    case Protocol::kMarker:
      if (!rt.agent_down) rt.agent->on_marker(pkt, ingress_if);
      break;
    default:
      break;  // other protocols addressed to the CPU are ignored
  }
}

void Simulation::host_deliver(const HostId& id, Packet pkt) {
  auto& hr = host_rt(id);
  hr.inbox.push_back({pkt, now_});
  const bool echo_request =
      pkt.protocol == Protocol::kIcmp && pkt.src_port == 8 &&
      (pkt.dst_ip == hr.cfg->ip || pkt.dst_ip == hr.cfg->secondary_ip);
  if (!echo_request) return;
  Packet rep;
  rep.id = next_packet_id();
  rep.src_ip = pkt.dst_ip;
  rep.dst_ip = pkt.src_ip;
  rep.src_port = 0;  // echo reply
  rep.dst_port = pkt.dst_port;
  rep.protocol = Protocol::kIcmp;
  rep.ttl = 64;
  rep.dscp = pkt.dscp;
  rep.payload_digest = pkt.payload_digest;
  rep.src_mac = hr.cfg->mac;
  seal_header(rep);
  transmit(id, host_port_.at(id), std::move(rep));
}

void Simulation::host_send(const HostId& id, Packet pkt) {
  auto& hr = host_rt(id);
  pkt.id = next_packet_id();
  if (pkt.ttl == 0) pkt.ttl = 64;
  pkt.src_mac = hr.cfg->mac;
  seal_header(pkt);
  transmit(id, host_port_.at(id), std::move(pkt));
}

std::vector<Delivered> Simulation::take_host_inbox(const HostId& id) {
  auto& hr = host_rt(id);
  std::vector<Delivered> out;
  out.swap(hr.inbox);
  return out;
}

const std::vector<Delivered>& Simulation::host_inbox(const HostId& id) const {
  auto it = hosts_.find(id);
  if (it == hosts_.end()) throw SimError("unknown host: " + id);
  return it->second.inbox;
}

void Simulation::send_from_cpu(const SwitchId& id, Packet pkt) {
  auto& rt = sw(id);
  if (rt.node_down) return;
  const FibEntry* fe = rt.dp->fib_lookup(pkt.dst_ip);
  if (!fe || fe->egress_interface == FibEntry::kCpuPort) return;
  if (const InterfaceConfig* ic = rt.cfg->interface(fe->egress_interface))
    pkt.src_mac = ic->mac;
  pkt.dst_mac = fe->next_hop_mac;
  transmit(id, fe->egress_interface, std::move(pkt));
}

void Simulation::send_mgmt(const SwitchId& from, Ipv4Addr dst,
                           const std::string& json) {
  auto& rt = sw(from);
  if (rt.node_down) return;
  Packet p;
  p.id = next_packet_id();
  p.src_ip = rt.cfg->loopback;
  p.dst_ip = dst;
  p.protocol = Protocol::kMgmt;
  p.ttl = 64;
  p.control = std::make_shared<MgmtBlob>(mgmt_encode(json));
  seal_header(p);
  send_from_cpu(from, std::move(p));
}

void Simulation::send_raw(const NodeId& from, int if_index, Packet pkt) {
  if (pkt.id == 0) pkt.id = next_packet_id();
  transmit(from, if_index, std::move(pkt));
}

void Simulation::send_bgp(const SwitchId& from, const SwitchId& peer,
                          BgpMessage msg) {
  auto& rt = sw(from);
  if (rt.node_down) return;
  if (auto it = taps_.find({from, peer}); it != taps_.end()) {
    if (it->second.mute_egress) {
      ++it->second.muted_count;
      return;
    }
    if (it->second.mutate_egress) it->second.mutate_egress(msg);
  }
  if (!rt.agent_down) rt.agent->on_control_egress(peer, msg, now_);

  const SessionConfig* sc = rt.cfg->session(peer);
  const SwitchConfig* pc = topo_.switch_config(peer);
  if (!sc || !pc) return;
  Packet p;
  p.id = next_packet_id();
  p.protocol = Protocol::kBgp;
  p.src_port = 179;
  p.dst_port = 179;
  p.ttl = 64;
  if (sc->ibgp) {
    p.src_ip = rt.cfg->loopback;
    p.dst_ip = pc->loopback;
  } else {
    const LinkConfig* lc = link_between(from, peer);
    if (!lc) return;
    const InterfaceConfig* oi = rt.cfg->interface(lc->if_of(from));
    const InterfaceConfig* pi = pc->interface(lc->if_of(peer));
    if (!oi || !pi) return;
    p.src_ip = oi->addr;
    p.dst_ip = pi->addr;
  }
  p.control = std::make_shared<BgpBlob>(std::move(msg));
  seal_header(p);
  send_from_cpu(from, std::move(p));
}

void Simulation::inject_packets(const SwitchId& at, const FlowSpec& flow,
                                int count, std::uint8_t dscp,
                                std::uint8_t ttl) {
  sw(at);  // validate early
  for (int i = 0; i < count; ++i) {
    schedule(static_cast<SimTime>(i) * cfg_.inject_spacing_us, "inj " + at,
             [this, at, flow, dscp, ttl] {
               auto& rt = sw(at);
               if (rt.node_down) return;
               Packet p;
               p.id = next_packet_id();
               p.src_ip = flow.src ? flow.src->addr : Ipv4Addr{0x0ac80001};
               p.dst_ip = flow.dst ? flow.dst->addr : Ipv4Addr{};
               p.src_port = flow.src_port.value_or(40000);
               p.dst_port = flow.dst_port.value_or(40001);
               p.protocol = flow.protocol.value_or(Protocol::kUdp);
               p.ttl = ttl;
               p.dscp = dscp;
               Rng digest_rng(seed_ ^ (p.id * 0x9e3779b97f4a7c15ULL));
               p.payload_digest = digest_rng.next();
               seal_header(p);
               int ingress = 0;
               if (const FibEntry* fe = rt.dp->fib_lookup(p.src_ip);
                   fe && fe->egress_interface != FibEntry::kCpuPort)
                 ingress = fe->egress_interface;
               switch_ingress(at, ingress, std::move(p));
             });
  }
}

// ---------------------------------------------------------------------
// Fingerprints
// ---------------------------------------------------------------------

std::uint64_t Simulation::state_hash() const {
  std::uint64_t h = kFnvBasis;
  auto mix_str = [&h](const std::string& s) {
    h = fnv1a(h, s.data(), s.size());
    h = fnv1a(h, "|", 1);
  };
  auto mix_u64 = [&h](std::uint64_t v) { h = fnv1a(h, &v, sizeof v); };
  for (const auto& id : switch_ids_) {
    const auto& rt = switches_.at(id);
    mix_str(id);
    for (const auto& e : rt.dp->fib()) {
      mix_str(e.prefix.str());
      mix_u64(static_cast<std::uint64_t>(e.egress_interface));
      mix_u64(static_cast<std::uint64_t>(e.source));
      mix_u64(e.next_hop_mac.v);
    }
    for (const auto& [p, r] : rt.cp->rib()) {
      mix_str(p.str());
      mix_str(r.next_hop_switch);
      for (AsNumber a : r.as_path) mix_u64(a);
      mix_u64(r.local_pref);
      mix_str(r.source_session);
    }
    for (const auto& s : rt.cp->runtime_statics()) {
      mix_str(s.prefix.str());
      mix_u64(static_cast<std::uint64_t>(s.egress_interface));
    }
    for (const auto& sv : rt.cp->sessions()) {
      mix_str(sv.peer);
      mix_u64(static_cast<std::uint64_t>(sv.state));
      mix_u64(sv.ibgp ? 1 : 0);
    }
    mix_u64(rt.dp->suppress_flag() ? 1 : 0);
    mix_str(rt.agent->trace_filter() ? rt.agent->trace_filter()->str() : "-");
  }
  return h;
}

}  // namespace netdx
