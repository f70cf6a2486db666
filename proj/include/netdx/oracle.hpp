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

#ifndef NETDX_ORACLE_HPP_
#define NETDX_ORACLE_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "netdx/controlplane.hpp"
#include "netdx/netmodel.hpp"

namespace netdx {

/** Everything a healthy switch is expected to hold once routing settles. */
struct ExpectedSwitchState {
  std::map<SwitchId, std::map<Prefix, RibEntry>> rib_in;   // keyed by peer
  std::map<Prefix, RibEntry> rib;                          // post-selection
  std::map<SwitchId, std::map<Prefix, BgpRoute>> rib_out;  // keyed by peer
  std::vector<StaticRoute> derived_statics;  // same-AS /32 reachability
  std::vector<FibEntry> fib;                 // MAC fields left zero
};

/** What one switch does with one packet, in isolation. */
struct HopDecision {
  enum class Kind {
    kForward,      // out an inter-switch port
    kDeliverHost,  // out a host-facing port
    kLocal,        // addressed to this switch's own control processor
    kAclDeny,
    kTtlExpired,
    kNoRoute,   // longest-prefix-match came up empty
    kDeadEnd,   // a route points at a port with nothing attached
  };
  Kind kind = Kind::kNoRoute;
  int egress_interface = -1;  // valid for kForward / kDeliverHost
  std::string next_node;      // switch or host id for kForward / kDeliverHost
};

/** End-to-end walk of a packet across the expected forwarding state. */
struct PathResult {
  enum class Outcome {
    kDelivered,   // handed to a host port
    kLocal,       // consumed by a switch control processor
    kAclDeny,
    kTtlExpired,
    kNoRoute,
    kDeadEnd,
    kLoop,        // revisited a switch
  };
  struct Step {
    SwitchId node;
    int ingress_interface = -1;  // -1 when the entry point is unknown
    int egress_interface = -1;   // -1 when the packet stops here
  };
  Outcome outcome = Outcome::kNoRoute;
  std::vector<Step> hops;     // switches traversed, in order
  HostId destination_host;    // set for kDelivered
  SwitchId stopped_at;        // switch where a non-delivery outcome occurred

  bool delivered() const { return outcome == Outcome::kDelivered; }
  /** Switch ids along the walk, convenient for comparisons. */
  std::vector<SwitchId> switches() const;
};

const char* path_outcome_name(PathResult::Outcome o);

/**
 * Reference model of the network's converged routing and forwarding state,
 * computed declaratively from the topology alone.
 *
 * Nothing here runs protocol machinery: per-switch tables are obtained by
 * iterating import -> selection -> export over the session graph until a
 * fixpoint, and forwarding questions are answered by walking the derived
 * tables. The simulator must land on exactly this state once it goes
 * quiescent, which makes the two implementations checks on each other.
 */
class Oracle {
 public:
  explicit Oracle(const Topology& topo);

  const Topology& topology() const { return topo_; }
  const ExpectedSwitchState& at(const SwitchId& id) const;
  const std::map<SwitchId, ExpectedSwitchState>& expected() const {
    return state_;
  }

  /** Single-switch verdict for a packet arriving with the given header. */
  HopDecision decide(const SwitchId& sw, const Packet& probe) const;

  /** Walks a probe from its source host's attachment point. */
  PathResult trace(const Packet& probe) const;
  /** Walks a probe beginning at an arbitrary switch. */
  PathResult trace_from(const SwitchId& start, const Packet& probe) const;

  /** True when `from` is expected to pass this packet directly to `to`. */
  bool should_forward(const SwitchId& from, const std::string& to,
                      const Packet& probe) const;
  /** Expected egress port at `sw` for the packet, if it forwards at all. */
  std::optional<int> expected_egress(const SwitchId& sw,
                                     const Packet& probe) const;

  /** Peers that should be announcing exactly this prefix to `at`. */
  std::vector<SwitchId> expected_advertisers(const SwitchId& at,
                                             const Prefix& p) const;
  /** Switches that originate exactly this prefix. */
  std::vector<SwitchId> origin_switches(const Prefix& p) const;

  /** The switch a host hangs off, with its port. */
  const HostConfig* host(const HostId& id) const;

  /** Stable digest over every derived table; equal inputs, equal digest. */
  std::uint64_t fingerprint() const { return fingerprint_; }
  /** Work-queue steps the fixpoint took; exposed for sanity checks. */
  int rounds() const { return rounds_; }

 private:
  void derive_statics();
  void derive_routes();
  void derive_fibs();
  std::uint64_t digest_state() const;

  const Topology topo_;  // private copy: the model must not drift under us
  std::map<SwitchId, ExpectedSwitchState> state_;
  std::uint64_t fingerprint_ = 0;
  int rounds_ = 0;
};

}  // namespace netdx

#endif  // NETDX_ORACLE_HPP_
