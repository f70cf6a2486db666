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

#ifndef NETDX_MANAGER_HPP_
#define NETDX_MANAGER_HPP_

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "netdx/faults.hpp"
#include "netdx/oracle.hpp"
#include "netdx/simkernel.hpp"

namespace netdx {

/** What the detection layer observed about a failing host pair. */
enum class Symptom { kUnreachable, kIntermittent, kCorruption };

const char* symptom_name(Symptom s);

/** A complaint handed to the manager: this pair of hosts is unhappy. */
struct FailureReport {
  HostId src_host;
  HostId dst_host;
  std::optional<FlowSpec> flow;  // refinement; defaults to the host pair
  Symptom symptom = Symptom::kUnreachable;

  std::string str() const;
};

/** The manager's conclusion about where the root cause lives. */
struct Verdict {
  enum class Kind {
    kFaultySwitch,    // one switch misbehaves
    kFaultyLink,      // one link damages or loses packets
    kFaultAt,         // a switch, its neighbor, or the link between them
    kNoFaultFound,    // nothing wrong observed
    kConfigNotFault,  // behavior matches configuration; not a defect
    kInconclusive,    // repeated runs kept disagreeing
  };

  Kind kind = Kind::kNoFaultFound;
  SwitchId switch_id;  // kFaultySwitch / kFaultAt
  SwitchId neighbor;   // kFaultAt: the reachable neighbor used for relay
  LinkId link_id;      // kFaultyLink / kFaultAt

  static Verdict faulty_switch(SwitchId id);
  static Verdict faulty_link(LinkId id);
  static Verdict fault_at(SwitchId sw, SwitchId neighbor);
  static Verdict no_fault();
  static Verdict config_not_fault();
  static Verdict inconclusive();

  std::string str() const;
  auto operator<=>(const Verdict&) const = default;
};

/** One executed step: an agent command or an oracle consultation. */
struct EvidenceEntry {
  std::string script;     // which procedure appended this step
  std::string primitive;  // agent op name, or "oracle:<query>"
  std::string target;     // switch/link/host the step examined
  std::string summary;    // what it showed
};

struct Diagnosis {
  Verdict verdict;
  std::optional<FaultCategory> category;
  std::vector<EvidenceEntry> evidence;
  int runs_to_consensus = 1;
  bool used_fault_report = false;   // drop located via a proactive report
  bool used_disconnected = false;   // the disconnected-switch procedure ran

  int primitive_count() const { return static_cast<int>(evidence.size()); }
  /** Ordered, duplicate-collapsed list of scripts the evidence walked. */
  std::vector<std::string> script_sequence() const;
  std::string to_json() const;
  std::string format() const;  // human-readable evidence trail
};

struct ManagerConfig {
  SimTime rpc_timeout_us = 4'000'000;      // per attempt
  int rpc_attempts = 3;
  SimTime contact_timeout_us = 1'500'000;  // reachability probes
  int contact_attempts = 2;
  /** Probe traffic: bursts of traced packets injected at the source edge.
   * Bursts span several trigger windows so a full window of losses is
   * always followed by drops that evaluate it. */
  int probe_burst = 250;
  int probe_bursts = 5;
  SimTime burst_gap_us = 120'000;
  SimTime report_wait_us = 1'800'000;  // proactive fault-report wait
  int drop_test_windows = 3;
  SimTime capture_us = 2'000'000;
  int corruption_probes = 8;  // stays under the per-episode mirror cap
  SimTime inter_run_delay_us = 2'000'000;
  int max_runs = 5;
};

/**
 * The diagnosis manager. It lives on the diagnosis host: commands go out
 * as management packets over the simulated network, replies and proactive
 * reports come back to the host's inbox, and the manager drains that
 * inbox while it advances the simulation clock.
 *
 * diagnose() runs the top-level procedure at least twice and only returns
 * once two consecutive runs agree (the network may still be converging
 * around the fault when the first run executes).
 */
class Manager {
 public:
  Manager(Simulation& sim, const Oracle& oracle, ManagerConfig cfg = {});

  /** Full diagnosis with run-twice consensus. */
  Diagnosis diagnose(const FailureReport& report);
  /** One diagnosis pass, no consensus loop (exposed for tests). */
  Diagnosis diagnose_once(const FailureReport& report);

  /** Advances the simulation while draining the diagnosis host's inbox. */
  void pump(SimTime duration);

  /** Echo traffic that arrived at the diagnosis host (for the pingmesh). */
  std::vector<Packet> take_icmp();
  /** Proactive fault reports seen since construction. */
  std::uint64_t fault_reports_seen() const { return fault_reports_seen_; }

  const ManagerConfig& config() const { return cfg_; }

 private:
  struct DropSite {
    SwitchId at;
    LinkId link;              // set when the loss is on a link
    DropReason reason = DropReason::kNoFibEntry;  // for deliberate drops
    bool silent = false;      // conservation/marker deficit, no counter
    bool unreachable = false; // the switch itself stopped answering
    bool via_report = false;
  };

  struct RunState {
    std::vector<EvidenceEntry> evidence;
    std::set<std::pair<SwitchId, std::string>> visited;  // cycle guard
    std::vector<std::pair<SwitchId, Prefix>> srp_statics;
    std::set<SwitchId> touched;  // filters/suppress flags to restore
    bool used_fault_report = false;
    bool used_disconnected = false;
  };

  /** Outcome of one management command. */
  struct CallResult {
    bool reached = false;  // some reply came back
    bool ok = false;       // ... and it was a success reply
    std::string error;     // agent-reported error when !ok
    std::string payload;   // JSON text of the success payload
  };

  // --- RPC plumbing ------------------------------------------------
  std::string call_raw(Ipv4Addr dst, const std::string& op,
                       std::string params_json, SimTime timeout_us,
                       int attempts, bool from_secondary);
  CallResult call(const SwitchId& target, const std::string& op,
                  const std::string& params_json = "{}",
                  SimTime timeout_us = 0, int attempts = 0);
  CallResult relay_call(const SwitchId& via, const SwitchId& target,
                        const std::string& op,
                        const std::string& params_json = "{}");
  bool contact(const SwitchId& target);
  void drain_inbox();
  Ipv4Addr agent_addr(const SwitchId& target) const;
  void note(const std::string& primitive, const std::string& target,
            const std::string& summary);
  /** Oldest undelivered proactive report as JSON text, if any. */
  std::optional<std::string> fetch_fault_report();

  // --- script library ----------------------------------------------
  Diagnosis run_once(const FailureReport& report, RunState& rs);
  std::optional<DropSite> locate_drop(const FlowSpec& flow,
                                      const std::vector<SwitchId>& path,
                                      RunState& rs);
  Diagnosis dispatch_drop(const DropSite& site, const FlowSpec& flow,
                          const Packet& probe, RunState& rs);
  Diagnosis diagnose_no_forwarding(SwitchId sut, const FlowSpec& flow,
                                   const Packet& probe, RunState& rs);
  Diagnosis diagnose_route_adv_missing(SwitchId advertiser, Prefix prefix,
                                       SwitchId downstream, RunState& rs);
  Diagnosis diagnose_neighbor_down(SwitchId a, SwitchId b, RunState& rs);
  Diagnosis diagnose_disconnected(SwitchId ds, RunState& rs, int depth = 0);
  Diagnosis diagnose_corruption(const FlowSpec& flow, const Packet& probe,
                                RunState& rs);
  Diagnosis diagnose_ttl(const std::vector<SwitchId>& path,
                         const FlowSpec& flow, RunState& rs);
  Diagnosis diagnose_link_corruption(SwitchId receiver, const FlowSpec& flow,
                                     RunState& rs);

  void start_probes(const SwitchId& edge, const FlowSpec& flow, RunState& rs);
  void cleanup_run(const FailureReport& report, RunState& rs);
  /** Builds the concrete probe flow for a complaint (optionally reversed). */
  FlowSpec probe_flow(const FailureReport& report, bool reverse) const;
  Packet probe_packet(const FlowSpec& flow) const;
  Diagnosis finish(RunState& rs, Verdict v,
                   std::optional<FaultCategory> cat);

  Simulation& sim_;
  const Oracle& oracle_;
  ManagerConfig cfg_;
  HostId dh_;
  Ipv4Addr dh_ip_;
  Ipv4Addr dh_secondary_;
  std::map<SwitchId, Ipv4Addr> addr_override_;  // secondary-address contact
  std::string current_script_;  // evidence attribution while scripts run

  std::uint64_t next_rid_ = 100'000;
  std::map<std::uint64_t, std::string> replies_;
  std::deque<std::string> fault_reports_;
  std::vector<std::string> checksum_reports_;
  std::vector<Packet> icmp_;
  std::uint64_t fault_reports_seen_ = 0;
  RunState* active_ = nullptr;  // evidence sink while a run executes
};

}  // namespace netdx

#endif  // NETDX_MANAGER_HPP_
