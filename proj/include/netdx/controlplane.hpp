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

#ifndef NETDX_CONTROLPLANE_HPP_
#define NETDX_CONTROLPLANE_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "netdx/netmodel.hpp"

namespace netdx {

/** Session timer defaults (scaled down for fast simulation). */
struct TimerConfig {
  SimTime hold_us = 900'000;        // session dead after this silence
  SimTime keepalive_us = 300'000;   // hold / 3
  SimTime open_retry_us = 1'000'000;
};

enum class SessionState : std::uint8_t { kIdle, kConnecting, kEstablished, kDown };

const char* session_state_name(SessionState s);

/** One route as carried in a snapshot (full-table) message. */
struct BgpRoute {
  Prefix prefix;
  std::vector<AsNumber> as_path;
  std::uint32_t local_pref_hint = 100;  // meaningful on intra-AS sessions

  auto operator<=>(const BgpRoute&) const = default;
};

/** Structured routing-protocol message (not a byte-exact encoding). */
struct BgpMessage {
  enum class Kind : std::uint8_t {
    kOpen,
    kKeepalive,
    kAnnounce,
    kWithdraw,
    kRefreshRequest,
    kSnapshot,  // full table; receiver replaces the session's RIB-in
  };
  Kind kind = Kind::kKeepalive;
  SwitchId sender;
  Prefix prefix;                        // announce / withdraw
  std::vector<AsNumber> as_path;        // announce
  std::uint32_t local_pref_hint = 100;  // announce on intra-AS sessions
  std::vector<BgpRoute> routes;         // snapshot

  auto operator<=>(const BgpMessage&) const = default;
};

const char* bgp_message_kind_name(BgpMessage::Kind k);

/** Message addressed to a session peer, to be carried by the network. */
struct BgpOutgoing {
  SwitchId peer;
  BgpMessage msg;
};

/** Wrapper so routing messages can ride simulated packets. */
struct BgpBlob : ControlBlob {
  BgpMessage msg;
  explicit BgpBlob(BgpMessage m) : msg(std::move(m)) {}
};

/** Snapshot of one session for agent replies. */
struct SessionView {
  SwitchId peer;
  bool ibgp = false;
  SessionState state = SessionState::kIdle;
  SimTime last_rx = 0;
  SimTime established_at = 0;
  std::uint64_t flap_count = 0;
};

/**
 * The per-switch routing process. Messages are exchanged through the
 * caller (the simulation kernel or a test pump): `tick` and
 * `handle_message` return the messages to transmit. All iteration is
 * over ordered containers, so identical input sequences produce
 * identical output sequences.
 */
class ControlPlane {
 public:
  ControlPlane(const Topology& topo, const SwitchId& self,
               TimerConfig timers = {});

  /** Arms all sessions (they begin opening on the first tick). */
  void start(SimTime now);

  /** Drives timers: opens, keepalives, hold expiry. */
  std::vector<BgpOutgoing> tick(SimTime now);

  /** Processes one inbound message from a session peer. */
  std::vector<BgpOutgoing> handle_message(const BgpMessage& m, SimTime now);

  /**
   * Solicits a fresh exchange on every established session: sends a
   * refresh request (pulling the peer's table) and an unsolicited
   * snapshot (pushing ours). Steady-state tables are unchanged; the
   * point is to make advertisements observable on demand.
   */
  std::vector<BgpOutgoing> resync_exchange();

  const SwitchId& self() const { return self_; }
  const SwitchConfig& config() const { return cfg_; }

  /** Best routes (locally originated entries included). */
  const std::map<Prefix, RibEntry>& rib() const { return rib_; }
  /** Per-session accepted routes. */
  std::map<Prefix, RibEntry> rib_in(const SwitchId& peer) const;
  /** What this switch last advertised to `peer`. */
  std::vector<BgpRoute> rib_out(const SwitchId& peer) const;

  SessionState session_state(const SwitchId& peer) const;
  std::vector<SessionView> sessions() const;

  /**
   * Routes installed outside the routing protocol at runtime (the
   * intra-AS loopback paths synthesized at startup, and diagnostic
   * overrides). Replaces an existing runtime static for the prefix.
   */
  void add_runtime_static(const StaticRoute& r);
  bool remove_runtime_static(const Prefix& p);
  const std::vector<StaticRoute>& runtime_statics() const {
    return runtime_statics_;
  }

  /**
   * Derives the forwarding table: local addresses to the CPU port,
   * connected subnets, static routes, then protocol best routes with
   * next hops resolved to egress interfaces (adjacent peers directly,
   * same-AS peers recursively through the static loopback routes).
   * Unresolvable next hops are skipped and counted as anomalies.
   * Entries are sorted by prefix; one entry per prefix.
   */
  std::vector<FibEntry> compute_fib() const;

  std::uint64_t rib_change_count() const { return rib_changes_; }
  std::uint64_t protocol_error_count() const { return protocol_errors_; }
  std::uint64_t unresolved_next_hop_count() const { return unresolved_; }
  /** Last time the RIB or a session state changed (for quiescence). */
  SimTime last_table_change() const { return last_change_; }

 private:
  struct Session {
    SessionConfig cfg;
    AsNumber peer_asn = 0;
    SessionState state = SessionState::kIdle;
    SimTime last_rx = 0;
    SimTime last_keepalive_tx = 0;
    SimTime last_open_tx = -1;
    SimTime established_at = 0;
    std::uint64_t flaps = 0;
    std::map<Prefix, RibEntry> rib_in;
    std::map<Prefix, BgpRoute> rib_out;
  };

  Session* session(const SwitchId& peer);
  const Session* session(const SwitchId& peer) const;

  /** Applies the inbound policy; nullopt = rejected. */
  std::optional<RibEntry> import_route(const Session& s, const Prefix& prefix,
                                       const std::vector<AsNumber>& path,
                                       std::uint32_t pref_hint) const;
  /** Applies outbound policy/scope/split-horizon; nullopt = filtered. */
  std::optional<BgpRoute> export_route(const Session& s,
                                       const RibEntry& best) const;

  void establish(Session& s, SimTime now, std::vector<BgpOutgoing>& out);
  void take_down(Session& s, SimTime now, std::vector<BgpOutgoing>& out);
  /** Recomputes best routes for `prefixes`; pushes resulting updates. */
  void reselect(const std::vector<Prefix>& prefixes, SimTime now,
                std::vector<BgpOutgoing>& out);
  /** Full advertisable table for one session (snapshot contents). */
  std::vector<BgpRoute> full_export(const Session& s) const;
  std::optional<int> interface_toward(const SwitchId& adjacent_peer) const;
  void touch(SimTime now) { last_change_ = now; }

  const Topology& topo_;
  SwitchId self_;
  const SwitchConfig& cfg_;
  TimerConfig timers_;
  std::map<SwitchId, Session> sessions_;
  std::map<Prefix, RibEntry> rib_;
  std::vector<StaticRoute> runtime_statics_;
  std::uint64_t rib_changes_ = 0;
  std::uint64_t protocol_errors_ = 0;
  mutable std::uint64_t unresolved_ = 0;
  SimTime last_change_ = 0;
  bool started_ = false;
};

/**
 * Deterministic best-path selection: highest localPref, then shortest
 * AS path, then lowest source session id. Returns nullopt on empty
 * input.
 */
std::optional<RibEntry> best_path_select(const std::vector<RibEntry>& candidates);

}  // namespace netdx

#endif  // NETDX_CONTROLPLANE_HPP_
