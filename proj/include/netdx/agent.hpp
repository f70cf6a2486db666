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

#ifndef NETDX_AGENT_HPP_
#define NETDX_AGENT_HPP_

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "netdx/controlplane.hpp"
#include "netdx/netmodel.hpp"

namespace netdx {

class Simulation;

/** One control message seen at a switch boundary while capturing. */
struct CapturedMessage {
  SwitchId peer;       // session peer at the far side
  bool ingress = false;  // true: received; false: emitted
  BgpMessage msg;
  SimTime at = 0;
};

/**
 * The on-switch management agent. It answers remote commands carried
 * over the management protocol, emits fault and checksum reports to
 * the diagnosis host, and runs local anomaly detection. Read commands
 * never change switch state. Command envelope (JSON):
 *   request:  {"op": <name>, "requestId": <n>, ...params}
 *   reply:    {"requestId": <n>, "ok": true, "payload": ...}
 *           | {"requestId": <n>, "ok": false, "error": <text>}
 * Recently answered requestIds are cached so a retried command is
 * answered again without re-executing its side effects.
 */
class Agent {
 public:
  Agent(Simulation& sim, SwitchId self);

  const SwitchId& id() const { return self_; }

  // ---- kernel entry points ----------------------------------------
  /** A management packet reached this switch's CPU. */
  void on_mgmt(const Packet& pkt, int ingress_if);
  /** A link accounting probe reached this switch's CPU. */
  void on_marker(const Packet& pkt, int ingress_if);
  /** The pipeline's drop-ratio trigger fired for this ingress port. */
  void on_fault_trigger(int ingress_if, SimTime now);
  /** The pipeline mirrored a marked-DSCP packet to the agent. */
  void on_checksum_mirror(const Packet& pkt, bool egress_stage, SimTime now);
  /** Control message crossing this switch's boundary (wire truth). */
  void on_control_ingress(const SwitchId& peer, const BgpMessage& msg,
                          SimTime now);
  void on_control_egress(const SwitchId& peer, const BgpMessage& msg,
                         SimTime now);
  /** Periodic upkeep; anomaly scan runs on its own internal cadence. */
  void tick(SimTime now);

  // ---- state read by the kernel -------------------------------------
  /** Packets matching this are trace-marked at ingress. */
  const std::optional<FlowSpec>& trace_filter() const { return trace_filter_; }
  /** Local (console) equivalent of the SetTraceFilter command. */
  void set_trace_filter(std::optional<FlowSpec> f) {
    trace_filter_ = std::move(f);
  }

  // ---- introspection (tests and local tooling) ----------------------
  const std::vector<std::string>& anomaly_log() const { return anomalies_; }
  std::uint64_t fault_reports_sent() const { return fault_reports_; }
  std::uint64_t checksum_reports_sent() const { return checksum_reports_; }
  std::uint64_t commands_served() const { return commands_served_; }

 private:
  struct MarkerPending {
    Ipv4Addr reply_to;
    bool raw_reply = false;
    int raw_reply_if = 0;
    LinkId link;
    int own_port = 0;
    std::uint64_t sent_egress = 0;
    bool done = false;
  };
  struct RelayPending {
    std::uint64_t outer_id = 0;
    Ipv4Addr reply_to;
    bool raw_reply = false;
    int raw_reply_if = 0;
    bool done = false;
  };
  struct CaptureState {
    bool armed = false;
    SimTime until = 0;
    std::uint64_t request_id = 0;
    Ipv4Addr reply_to;
    bool raw_reply = false;
    int raw_reply_if = 0;
    std::vector<CapturedMessage> messages;
  };

  /** Routes a reply back to the requester (routed or raw). */
  void send_reply(const std::string& json, Ipv4Addr to, bool raw, int raw_if);
  void cache_and_send(std::uint64_t request_id, const std::string& json,
                      Ipv4Addr to, bool raw, int raw_if);
  void note_anomaly(SimTime now, const std::string& text);

  Simulation& sim_;
  SwitchId self_;

  std::optional<FlowSpec> trace_filter_;

  // Retry cache: requestId -> serialized reply, FIFO-evicted.
  std::map<std::uint64_t, std::string> reply_cache_;
  std::deque<std::uint64_t> reply_order_;

  std::map<std::uint64_t, MarkerPending> pending_markers_;
  std::map<std::uint64_t, RelayPending> pending_relays_;
  CaptureState capture_;

  std::vector<std::string> anomalies_;
  SimTime last_anomaly_scan_ = -1;
  std::uint64_t scan_rib_changes_ = 0;
  std::uint64_t scan_flap_sum_ = 0;

  std::uint64_t fault_reports_ = 0;
  std::uint64_t checksum_reports_ = 0;
  std::uint64_t checksum_episode_ = 0;  // mirrors reported this episode
  std::uint64_t commands_served_ = 0;
};

}  // namespace netdx

#endif  // NETDX_AGENT_HPP_
