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

#ifndef NETDX_SIMKERNEL_HPP_
#define NETDX_SIMKERNEL_HPP_

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

#include "netdx/controlplane.hpp"
#include "netdx/dataplane.hpp"
#include "netdx/netmodel.hpp"

namespace netdx {

class Agent;

/** Counter-based splittable PRNG; one instance per randomness consumer. */
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next();
  /** Uniform in [0, bound). */
  std::uint64_t below(std::uint64_t bound);
  /** Uniform in [0, 1). */
  double uniform();
  /** Derives an independent stream from a seed and a purpose label. */
  static Rng stream(std::uint64_t seed, const std::string& purpose);

 private:
  std::uint64_t state_;
};

/** 64-bit FNV-1a, used for state and event-log fingerprints. */
std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t len);
constexpr std::uint64_t kFnvBasis = 1469598103934665603ULL;

struct SimConfig {
  TimerConfig timers{};
  TriggerConfig trigger{};
  std::size_t header_log_capacity = 16;
  SimTime control_tick_us = 100'000;
  SimTime anomaly_tick_us = 1'000'000;
  SimTime inject_spacing_us = 1'000;
  /** Tables stable for this long = converged (default 2x hold). */
  SimTime quiescence_settle_us = 0;
  /** Events per run call before the livelock guard trips. */
  std::uint64_t livelock_cap = 50'000'000;
  /** Keep the event log lines in memory (hash is always maintained). */
  bool record_event_log = false;
};

struct EventStats {
  std::uint64_t events = 0;
  SimTime end_time = 0;
  bool quiescent = false;
  SimTime converged_at = 0;  // last table change when quiescent
};

struct Delivered {
  Packet pkt;
  SimTime at = 0;
};

class SimError : public std::runtime_error {
 public:
  explicit SimError(const std::string& what) : std::runtime_error(what) {}
};

/** Management payload riding a simulated packet. On a real wire this
 * is framed as length-prefixed JSON; see encode/decode below. */
struct MgmtBlob : ControlBlob {
  std::string json;
  explicit MgmtBlob(std::string j) : json(std::move(j)) {}
};

/** Frames a JSON document as 4-byte big-endian length + bytes. */
std::string mgmt_encode(const std::string& json);
/** Reverse of mgmt_encode; nullopt on malformed framing. */
std::optional<std::string> mgmt_decode(const std::string& wire);

/** Link accounting probe carrying cumulative traced counts. */
struct MarkerBlob : ControlBlob {
  LinkId link;
  std::uint64_t request_id = 0;
  std::uint64_t sender_egress_traced = 0;    // filled by the requester
  std::uint64_t responder_ingress_traced = 0;  // filled by the responder
  bool is_reply = false;
};

/**
 * Per-link runtime state. `transit` is the fault surface: called for
 * every packet entering the link; it may mutate the packet and returns
 * true to make the link swallow it. Marker packets are exempt from
 * swallowing so that accounting probes always survive.
 */
struct LinkRuntime {
  const LinkConfig* cfg = nullptr;
  bool up = true;
  std::function<bool(Packet&)> transit;  // nullable
};

/** Control-message taps at one directed switch boundary. */
struct SessionTap {
  bool mute_egress = false;
  std::uint64_t muted_count = 0;
  std::function<void(BgpMessage&)> mutate_egress;   // nullable
  std::function<void(BgpMessage&)> mutate_ingress;  // nullable
};

/**
 * Deterministic discrete-event simulation of the whole network: per-
 * switch pipelines and routing processes, links with latency, hosts
 * with echo responders, management-channel delivery, and the fault
 * hook surface. All handlers run in (time, sequence) order; identical
 * seeds and call sequences give identical event logs.
 */
class Simulation {
 public:
  Simulation(Topology topo, std::uint64_t seed, SimConfig cfg = {});
  ~Simulation();
  Simulation(const Simulation&) = delete;
  Simulation& operator=(const Simulation&) = delete;

  const Topology& topology() const { return topo_; }
  const SimConfig& config() const { return cfg_; }
  std::uint64_t seed() const { return seed_; }
  SimTime now() const { return now_; }

  // -- run loop ------------------------------------------------------
  EventStats run_for(SimTime duration) { return run_until(now_ + duration); }
  EventStats run_until(SimTime deadline);
  /**
   * Runs until every switch's tables have been stable for the settle
   * interval, or until the deadline. settle 0 = config default.
   */
  EventStats run_until_quiescent(SimTime deadline, SimTime settle = 0);
  void schedule(SimTime delay, std::string tag, std::function<void()> fn);

  // -- node access ---------------------------------------------------
  DataPlane& dataplane(const SwitchId& id);
  ControlPlane& controlplane(const SwitchId& id);
  Agent& agent(const SwitchId& id);
  const std::vector<SwitchId>& switch_ids() const { return switch_ids_; }

  // -- hosts ---------------------------------------------------------
  /** Sends from a host NIC: assigns id, stamps, seals, transmits. */
  void host_send(const HostId& id, Packet pkt);
  /** Drains and returns everything delivered to the host so far. */
  std::vector<Delivered> take_host_inbox(const HostId& id);
  /** Peeks without draining. */
  const std::vector<Delivered>& host_inbox(const HostId& id) const;

  // -- services used by agents, faults, and the manager --------------
  std::uint64_t next_packet_id() { return ++packet_id_; }
  /** Routed management send from a switch CPU. */
  void send_mgmt(const SwitchId& from, Ipv4Addr dst, const std::string& json);
  /** Direct link transmission from a node interface, bypassing the FIB. */
  void send_raw(const NodeId& from, int if_index, Packet pkt);
  /** Control-message send (egress taps and capture apply). */
  void send_bgp(const SwitchId& from, const SwitchId& peer, BgpMessage msg);
  /**
   * Emits `count` synthetic packets of the flow at the switch, paced
   * by the configured spacing, entering ingress as if from upstream.
   */
  void inject_packets(const SwitchId& at, const FlowSpec& flow, int count,
                      std::uint8_t dscp = 0, std::uint8_t ttl = 64);
  /** The address of the diagnosis host (primary). */
  Ipv4Addr diagnosis_host_addr() const;

  // -- fault surface ---------------------------------------------------
  LinkRuntime& link_runtime(const LinkId& id);
  SessionTap& session_tap(const SwitchId& sw, const SwitchId& peer);
  /** Entries the filter returns true for are hidden from the FIB. */
  void set_fib_filter(const SwitchId& id,
                      std::function<bool(const FibEntry&)> hide);
  /** Recomputes and reinstalls the switch's FIB immediately. */
  void force_fib_sync(const SwitchId& id);
  /** Routing process frozen: no ticks, inbound control dropped. */
  void set_daemon_down(const SwitchId& id, bool down);
  bool daemon_down(const SwitchId& id) const;
  /** Agent unresponsive: management and marker traffic ignored. */
  void set_agent_down(const SwitchId& id, bool down);
  bool agent_down(const SwitchId& id) const;
  /** Whole node dead: nothing is received or emitted. */
  void set_node_down(const SwitchId& id, bool down);
  bool node_down(const SwitchId& id) const;

  // -- observability --------------------------------------------------
  /** Fingerprint of tables and session states (not counters). */
  std::uint64_t state_hash() const;
  std::uint64_t event_log_hash() const { return log_hash_; }
  const std::vector<std::string>& event_log() const { return log_lines_; }
  std::uint64_t events_processed() const { return events_; }
  /** Most recent table/session change across all switches. */
  SimTime last_table_change() const;
  SimTime quiescence_settle() const;

 private:
  struct SwitchRuntime {
    const SwitchConfig* cfg = nullptr;
    std::unique_ptr<DataPlane> dp;
    std::unique_ptr<ControlPlane> cp;
    std::unique_ptr<Agent> agent;
    SimTime fib_synced_at = -1;
    std::uint64_t fib_synced_epoch = ~0ULL;
    bool daemon_down = false;
    bool agent_down = false;
    bool node_down = false;
    std::function<bool(const FibEntry&)> fib_filter;  // nullable
  };
  struct HostRuntime {
    const HostConfig* cfg = nullptr;
    std::vector<Delivered> inbox;
  };
  struct Ev {
    SimTime t = 0;
    std::uint64_t seq = 0;
    std::string tag;
    std::function<void()> fn;
    bool operator>(const Ev& o) const {
      return t != o.t ? t > o.t : seq > o.seq;
    }
  };

  SwitchRuntime& sw(const SwitchId& id);
  const SwitchRuntime& sw(const SwitchId& id) const;
  HostRuntime& host_rt(const HostId& id);

  void install_intra_as_statics();
  void sync_fib(SwitchRuntime& rt);
  void sync_fib_if_stale(SwitchRuntime& rt);
  void control_tick();
  /** Transmits out a node interface onto its link. */
  void transmit(const NodeId& from, int if_index, Packet pkt);
  void switch_ingress(const SwitchId& id, int if_index, Packet pkt);
  void cpu_receive(const SwitchId& id, Packet pkt, int ingress_if);
  void host_deliver(const HostId& id, Packet pkt);
  void send_from_cpu(const SwitchId& id, Packet pkt);
  MacAddr resolve_next_hop_mac(const SwitchId& id, int egress_if) const;
  const LinkConfig* link_between(const NodeId& a, const NodeId& b) const;
  void log_event(SimTime t, std::uint64_t seq, const std::string& tag);

  Topology topo_;
  std::uint64_t seed_;
  SimConfig cfg_;
  std::vector<SwitchId> switch_ids_;
  std::map<SwitchId, SwitchRuntime> switches_;
  std::map<HostId, HostRuntime> hosts_;
  std::map<HostId, int> host_port_;  // the host's own interface index
  std::map<LinkId, LinkRuntime> links_;
  std::map<std::pair<SwitchId, SwitchId>, SessionTap> taps_;

  std::priority_queue<Ev, std::vector<Ev>, std::greater<Ev>> queue_;
  SimTime now_ = 0;
  std::uint64_t seq_ = 0;
  std::uint64_t events_ = 0;
  std::uint64_t packet_id_ = 0;
  std::uint64_t log_hash_ = kFnvBasis;
  std::vector<std::string> log_lines_;
};

}  // namespace netdx

#endif  // NETDX_SIMKERNEL_HPP_
