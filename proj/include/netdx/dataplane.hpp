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

#ifndef NETDX_DATAPLANE_HPP_
#define NETDX_DATAPLANE_HPP_

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <vector>

#include "netdx/netmodel.hpp"

namespace netdx {

enum class DropReason : std::uint8_t {
  kNoFibEntry,
  kAclDeny,
  kZeroTtl,
  kBadHeaderChecksum,
  kCongestion,      // reserved; never produced
  kSilentInjected,  // produced only by an active fault; never counted
};

const char* drop_reason_name(DropReason r);

struct ForwardingDecision {
  enum class Outcome { kForward, kToCpu, kDrop };
  Outcome outcome = Outcome::kDrop;
  int egress_interface = FibEntry::kCpuPort;  // valid when kForward
  DropReason reason = DropReason::kNoFibEntry;

  bool forwards() const { return outcome == Outcome::kForward; }
  bool to_cpu() const { return outcome == Outcome::kToCpu; }
  bool drops() const { return outcome == Outcome::kDrop; }
};

/**
 * Per-packet fault injection points inside the pipeline. The default
 * implementation is the fault-free switch. Implementations must be
 * deterministic given the packet sequence (any randomness must come
 * from their own seeded streams).
 */
class PipelineHooks {
 public:
  virtual ~PipelineHooks() = default;
  /** Packet vanishes after ingress accounting; nothing else recorded. */
  virtual bool silent_drop(const Packet&, int /*ingress_if*/) { return false; }
  /** Packet is dropped exactly as if its FIB lookup had missed. */
  virtual bool forced_table_miss(const Packet&, int /*ingress_if*/) {
    return false;
  }
  /** TTL decrement applied on egress (normally 1). */
  virtual int ttl_decrement(const Packet&) { return 1; }
  /** Payload digest rewrite applied on egress (normally identity). */
  virtual std::uint64_t transform_digest(const Packet&, std::uint64_t digest) {
    return digest;
  }
};

struct TriggerConfig {
  SimTime window_us = 200'000;       // 200 ms simulated
  double drop_ratio_threshold = 0.5;
  std::uint32_t min_traced_per_window = 5;
};

/** Windowed counts for one ingress interface (traced packets only). */
struct IngressWindow {
  std::uint64_t traced_arrived = 0;
  std::uint64_t no_fib = 0;
  std::uint64_t acl_deny = 0;
  std::uint64_t zero_ttl = 0;
  std::uint64_t bad_checksum = 0;

  std::uint64_t dropped() const {
    return no_fib + acl_deny + zero_ttl + bad_checksum;
  }
};

/** One logged traced-packet header (payload summarized by its digest). */
struct HeaderLogEntry {
  std::uint64_t packet_id = 0;
  Ipv4Addr src_ip;
  Ipv4Addr dst_ip;
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
  Protocol protocol = Protocol::kUdp;
  std::uint8_t ttl = 0;
  std::uint8_t dscp = 0;
  std::uint16_t header_checksum = 0;
  std::uint64_t payload_digest = 0;
  SimTime stamp = 0;
  DropReason reason = DropReason::kNoFibEntry;  // meaningful in dropped ring
};

/** Bounded FIFO of recent traced headers. */
class HeaderLog {
 public:
  explicit HeaderLog(std::size_t capacity = 16) : capacity_(capacity) {}
  void push(HeaderLogEntry e);
  const std::deque<HeaderLogEntry>& entries() const { return entries_; }

 private:
  std::size_t capacity_;
  std::deque<HeaderLogEntry> entries_;
};

/** Rings kept for one port. */
struct PortLogs {
  HeaderLog ingress_recent;
  HeaderLog ingress_dropped;
  HeaderLog egress_recent;

  PortLogs(std::size_t k) : ingress_recent(k), ingress_dropped(k), egress_recent(k) {}
};

/** Conservation summary over one closed window (whole switch). */
struct ConservationReport {
  std::int64_t window_index = 0;
  std::uint64_t ingress_traced = 0;
  std::uint64_t egress_traced = 0;   // virtual clock, CPU deliveries included
  std::uint64_t deliberate_drops = 0;
  std::int64_t deficit = 0;          // ingress - egress - deliberate
};

/** Outcome of pushing one packet through the pipeline. */
struct PipelineResult {
  ForwardingDecision decision;
  Packet out;                  // transformed copy when decision forwards
  bool mirror_ingress = false; // deliver a pre-transform copy to the agent
  bool mirror_egress = false;  // deliver a post-transform copy to the agent
  bool fault_trigger = false;  // drop-ratio trigger fired at this packet
};

/** Longest-prefix-match over an arbitrary entry list. */
const FibEntry* lpm_lookup(const std::vector<FibEntry>& fib, Ipv4Addr dst);

/** First-match ACL evaluation; default permit. */
AclRule::Action acl_eval(const std::vector<AclRule>& rules, const Packet& p);

/**
 * One switch's forwarding pipeline plus its diagnosis instrumentation:
 * per-window traced/drop counters, egress counters on a virtual clock
 * keyed by ingress timestamps, bounded header logs, the DSCP-0x14
 * mirror, and the windowed drop-ratio trigger.
 */
class DataPlane {
 public:
  DataPlane(const SwitchConfig& cfg, TriggerConfig trigger = {},
            std::size_t log_capacity = 16);

  /** Replaces the forwarding table. */
  void set_fib(std::vector<FibEntry> fib);
  const std::vector<FibEntry>& fib() const { return fib_; }
  /** Removes one entry; returns false if absent. */
  bool remove_fib_route(const Prefix& prefix);
  const FibEntry* fib_lookup(Ipv4Addr dst) const { return lpm_lookup(fib_, dst); }

  void set_acl(std::vector<AclRule> rules) { acl_ = std::move(rules); }
  const std::vector<AclRule>& acl() const { return acl_; }

  void set_hooks(PipelineHooks* hooks) { hooks_ = hooks; }

  bool suppress_flag() const { return suppress_; }
  void set_suppress_flag(bool v) { suppress_ = v; }

  /**
   * Runs the full pipeline for a packet arriving on `ingress_if` at
   * `now`. Checks apply in fixed order: header checksum, ACL, TTL
   * (exempting local deliveries), FIB lookup, local delivery, forward.
   * All counter/log/mirror/trigger side effects happen exactly once.
   * `next_hop_mac` is the MAC to write when the packet is forwarded.
   */
  PipelineResult process(const Packet& in, int ingress_if, SimTime now,
                         MacAddr next_hop_mac = {});

  /**
   * Records the packet leaving through `egress_if` (use kCpuPort for
   * local deliveries). Counted in the window of the packet's ingress
   * timestamp, regardless of the real clock.
   */
  void record_egress(const Packet& p, int egress_if);

  /** True when `dst` is one of this switch's own addresses. */
  bool is_local_address(Ipv4Addr dst) const;

  /**
   * Conservation check over one window. Fails (nullopt) unless the
   * window is closed on the real clock and no forwarded packet with an
   * in-window ingress stamp is still awaiting its egress record.
   */
  std::optional<ConservationReport> silent_drop_check(std::int64_t window_index,
                                                      SimTime now) const;

  /** Last fully closed window index at `now` (may be negative). */
  std::int64_t last_closed_window(SimTime now) const;
  std::int64_t window_of(SimTime t) const { return t / trigger_.window_us; }
  const TriggerConfig& trigger_config() const { return trigger_; }

  /** Windowed ingress counters (zero struct when nothing recorded). */
  IngressWindow ingress_window(int ingress_if, std::int64_t window_index) const;
  /** Sum of the four drop counters across ports for a window. */
  IngressWindow ingress_window_total(std::int64_t window_index) const;

  /** Cumulative traced counts per port (markers compare these). */
  std::uint64_t cumulative_ingress_traced(int port) const;
  std::uint64_t cumulative_egress_traced(int port) const;

  const PortLogs* logs(int port) const;

 private:
  struct PortState {
    std::map<std::int64_t, IngressWindow> ingress;   // by window index
    std::map<std::int64_t, std::uint64_t> egress;    // by ingress window
    std::uint64_t cumulative_ingress = 0;
    std::uint64_t cumulative_egress = 0;
    PortLogs logs;
    PortState(std::size_t k) : logs(k) {}
  };

  PortState& port(int index);
  const PortState* port_if_exists(int index) const;
  void record_drop(PortState& ps, const Packet& p, DropReason reason,
                   SimTime now, PipelineResult& result);
  bool trigger_fires(const PortState& ps, SimTime now) const;

  const SwitchConfig& cfg_;
  TriggerConfig trigger_;
  std::size_t log_capacity_;
  std::vector<FibEntry> fib_;
  std::vector<AclRule> acl_;
  PipelineHooks* hooks_ = nullptr;
  bool suppress_ = false;
  std::map<int, PortState> ports_;
  // Forwarded traced packets not yet seen by record_egress, by window.
  std::map<std::int64_t, std::uint64_t> inflight_;
};

}  // namespace netdx

#endif  // NETDX_DATAPLANE_HPP_
