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

#include "netdx/dataplane.hpp"

#include <algorithm>

#include "netdx/checksum.hpp"

namespace netdx {

const char* drop_reason_name(DropReason r) {
  switch (r) {
    case DropReason::kNoFibEntry: return "no_fib_entry";
    case DropReason::kAclDeny: return "acl_deny";
    case DropReason::kZeroTtl: return "zero_ttl";
    case DropReason::kBadHeaderChecksum: return "bad_checksum";
    case DropReason::kCongestion: return "congestion";
    case DropReason::kSilentInjected: return "silent_injected";
  }
  return "?";
}

void HeaderLog::push(HeaderLogEntry e) {
  if (entries_.size() == capacity_) entries_.pop_front();
  entries_.push_back(std::move(e));
}

const FibEntry* lpm_lookup(const std::vector<FibEntry>& fib, Ipv4Addr dst) {
  const FibEntry* best = nullptr;
  for (const auto& e : fib) {
    if (!e.prefix.contains(dst)) continue;
    if (!best || e.prefix.len > best->prefix.len) best = &e;
  }
  return best;
}

AclRule::Action acl_eval(const std::vector<AclRule>& rules, const Packet& p) {
  for (const auto& r : rules)
    if (flow_matches(r.match, p)) return r.action;
  return AclRule::Action::kPermit;
}

namespace {

HeaderLogEntry log_entry(const Packet& p, SimTime stamp) {
  HeaderLogEntry e;
  e.packet_id = p.id;
  e.src_ip = p.src_ip;
  e.dst_ip = p.dst_ip;
  e.src_port = p.src_port;
  e.dst_port = p.dst_port;
  e.protocol = p.protocol;
  e.ttl = p.ttl;
  e.dscp = p.dscp;
  e.header_checksum = p.header_checksum;
  e.payload_digest = p.payload_digest;
  e.stamp = stamp;
  return e;
}

constexpr std::uint8_t kMirrorDscp = 0x14;

}  // namespace

DataPlane::DataPlane(const SwitchConfig& cfg, TriggerConfig trigger,
                     std::size_t log_capacity)
    : cfg_(cfg), trigger_(trigger), log_capacity_(log_capacity) {}

void DataPlane::set_fib(std::vector<FibEntry> fib) { fib_ = std::move(fib); }

bool DataPlane::remove_fib_route(const Prefix& prefix) {
  auto it = std::find_if(fib_.begin(), fib_.end(),
                         [&](const FibEntry& e) { return e.prefix == prefix; });
  if (it == fib_.end()) return false;
  fib_.erase(it);
  return true;
}

DataPlane::PortState& DataPlane::port(int index) {
  auto it = ports_.find(index);
  if (it == ports_.end())
    it = ports_.emplace(index, PortState(log_capacity_)).first;
  return it->second;
}

const DataPlane::PortState* DataPlane::port_if_exists(int index) const {
  auto it = ports_.find(index);
  return it == ports_.end() ? nullptr : &it->second;
}

bool DataPlane::is_local_address(Ipv4Addr dst) const {
  if (dst == cfg_.loopback || dst == cfg_.secondary_loopback) return true;
  for (const auto& i : cfg_.interfaces)
    if (i.addr == dst) return true;
  return false;
}

std::int64_t DataPlane::last_closed_window(SimTime now) const {
  return window_of(now) - 1;
}

IngressWindow DataPlane::ingress_window(int ingress_if,
                                        std::int64_t window_index) const {
  const auto* ps = port_if_exists(ingress_if);
  if (!ps) return {};
  auto it = ps->ingress.find(window_index);
  return it == ps->ingress.end() ? IngressWindow{} : it->second;
}

IngressWindow DataPlane::ingress_window_total(std::int64_t window_index) const {
  IngressWindow total;
  for (const auto& [idx, ps] : ports_) {
    (void)idx;
    auto it = ps.ingress.find(window_index);
    if (it == ps.ingress.end()) continue;
    total.traced_arrived += it->second.traced_arrived;
    total.no_fib += it->second.no_fib;
    total.acl_deny += it->second.acl_deny;
    total.zero_ttl += it->second.zero_ttl;
    total.bad_checksum += it->second.bad_checksum;
  }
  return total;
}

std::uint64_t DataPlane::cumulative_ingress_traced(int p) const {
  const auto* ps = port_if_exists(p);
  return ps ? ps->cumulative_ingress : 0;
}

std::uint64_t DataPlane::cumulative_egress_traced(int p) const {
  const auto* ps = port_if_exists(p);
  return ps ? ps->cumulative_egress : 0;
}

const PortLogs* DataPlane::logs(int p) const {
  const auto* ps = port_if_exists(p);
  return ps ? &ps->logs : nullptr;
}

bool DataPlane::trigger_fires(const PortState& ps, SimTime now) const {
  if (suppress_) return false;
  std::int64_t closed = last_closed_window(now);
  auto it = ps.ingress.find(closed);
  if (it == ps.ingress.end()) return false;
  const IngressWindow& w = it->second;
  if (w.traced_arrived < trigger_.min_traced_per_window) return false;
  return double(w.dropped()) >=
         trigger_.drop_ratio_threshold * double(w.traced_arrived);
}

void DataPlane::record_drop(PortState& ps, const Packet& p, DropReason reason,
                            SimTime now, PipelineResult& result) {
  result.decision.outcome = ForwardingDecision::Outcome::kDrop;
  result.decision.reason = reason;
  if (!p.trace_bit) return;
  auto& w = ps.ingress[window_of(now)];
  switch (reason) {
    case DropReason::kNoFibEntry: w.no_fib += 1; break;
    case DropReason::kAclDeny: w.acl_deny += 1; break;
    case DropReason::kZeroTtl: w.zero_ttl += 1; break;
    case DropReason::kBadHeaderChecksum: w.bad_checksum += 1; break;
    default: return;  // silent/reserved reasons are never recorded
  }
  auto e = log_entry(p, now);
  e.reason = reason;
  ps.logs.ingress_dropped.push(e);
  result.fault_trigger = trigger_fires(ps, now);
}

PipelineResult DataPlane::process(const Packet& in, int ingress_if, SimTime now,
                                  MacAddr next_hop_mac) {
  PipelineResult result;
  result.out = in;
  result.out.ingress_timestamp = now;  // stamp attached at ingress
  const Packet& pkt = result.out;

  PortState& ps = port(ingress_if);
  if (pkt.trace_bit) {
    ps.cumulative_ingress += 1;
    ps.ingress[window_of(now)].traced_arrived += 1;
    ps.logs.ingress_recent.push(log_entry(pkt, now));
  }
  result.mirror_ingress = pkt.dscp == kMirrorDscp;

  if (hooks_ && hooks_->silent_drop(pkt, ingress_if)) {
    // Vanishes: no drop counter, no log, no trigger — only the ingress
    // count above ever saw it.
    result.decision.outcome = ForwardingDecision::Outcome::kDrop;
    result.decision.reason = DropReason::kSilentInjected;
    return result;
  }

  if (!verify_header_checksum(pkt)) {
    record_drop(ps, pkt, DropReason::kBadHeaderChecksum, now, result);
    return result;
  }
  if (acl_eval(acl_, pkt) == AclRule::Action::kDeny) {
    record_drop(ps, pkt, DropReason::kAclDeny, now, result);
    return result;
  }
  bool local = is_local_address(pkt.dst_ip);
  if (pkt.ttl == 0 && !local) {
    record_drop(ps, pkt, DropReason::kZeroTtl, now, result);
    return result;
  }
  const FibEntry* entry = nullptr;
  if (hooks_ && hooks_->forced_table_miss(pkt, ingress_if)) {
    entry = nullptr;  // dropped exactly as a genuine lookup miss
  } else {
    entry = lpm_lookup(fib_, pkt.dst_ip);
  }
  if (!entry) {
    record_drop(ps, pkt, DropReason::kNoFibEntry, now, result);
    return result;
  }
  if (entry->egress_interface == FibEntry::kCpuPort || local) {
    result.decision.outcome = ForwardingDecision::Outcome::kToCpu;
    result.decision.egress_interface = FibEntry::kCpuPort;
    if (pkt.trace_bit) inflight_[window_of(now)] += 1;
    return result;
  }

  // Forward: rewrite MACs, decrement TTL, re-seal the checksum.
  result.decision.outcome = ForwardingDecision::Outcome::kForward;
  result.decision.egress_interface = entry->egress_interface;
  if (const auto* egress = cfg_.interface(entry->egress_interface))
    result.out.src_mac = egress->mac;
  result.out.dst_mac =
      next_hop_mac.v ? next_hop_mac : entry->next_hop_mac;
  int delta = hooks_ ? hooks_->ttl_decrement(pkt) : 1;
  result.out.ttl = static_cast<std::uint8_t>(
      std::max(0, int(result.out.ttl) - std::max(0, delta)));
  if (hooks_)
    result.out.payload_digest =
        hooks_->transform_digest(pkt, result.out.payload_digest);
  seal_header(result.out);
  result.mirror_egress = result.out.dscp == kMirrorDscp;
  if (pkt.trace_bit) inflight_[window_of(now)] += 1;
  return result;
}

void DataPlane::record_egress(const Packet& p, int egress_if) {
  if (!p.trace_bit) return;
  std::int64_t w = window_of(p.ingress_timestamp);
  PortState& ps = port(egress_if);
  ps.egress[w] += 1;
  ps.cumulative_egress += 1;
  ps.logs.egress_recent.push(log_entry(p, p.ingress_timestamp));
  auto it = inflight_.find(w);
  if (it != inflight_.end() && it->second > 0) {
    if (--it->second == 0) inflight_.erase(it);
  }
}

std::optional<ConservationReport> DataPlane::silent_drop_check(
    std::int64_t window_index, SimTime now) const {
  if (window_index > last_closed_window(now)) return std::nullopt;
  auto inflight = inflight_.find(window_index);
  if (inflight != inflight_.end() && inflight->second > 0) return std::nullopt;

  ConservationReport r;
  r.window_index = window_index;
  for (const auto& [idx, ps] : ports_) {
    (void)idx;
    if (auto it = ps.ingress.find(window_index); it != ps.ingress.end()) {
      r.ingress_traced += it->second.traced_arrived;
      r.deliberate_drops += it->second.dropped();
    }
    if (auto it = ps.egress.find(window_index); it != ps.egress.end())
      r.egress_traced += it->second;
  }
  r.deficit = std::int64_t(r.ingress_traced) - std::int64_t(r.egress_traced) -
              std::int64_t(r.deliberate_drops);
  return r;
}

}  // namespace netdx
