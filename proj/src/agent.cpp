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

#include "netdx/agent.hpp"

#include <algorithm>

#include "json.hpp"
#include "netdx/checksum.hpp"
#include "netdx/dataplane.hpp"
#include "netdx/simkernel.hpp"

namespace netdx {

using nlohmann::json;

namespace {

constexpr std::size_t kReplyCacheCapacity = 64;
constexpr std::size_t kAnomalyLogCapacity = 100;
constexpr SimTime kMarkerTimeoutUs = 1'000'000;
constexpr SimTime kRelayTimeoutUs = 2'000'000;
constexpr SimTime kDefaultCaptureUs = 2'000'000;
constexpr int kChecksumReportsPerEpisode = 10;
constexpr std::uint64_t kRibChurnThreshold = 50;
constexpr std::uint64_t kFlapThreshold = 3;
constexpr std::size_t kTableCapacity = 1000;  // modeled table size
constexpr double kResourceAlarmRatio = 0.95;

const char* fib_source_name(FibEntry::Source s) {
  switch (s) {
    case FibEntry::Source::kConnected: return "connected";
    case FibEntry::Source::kStatic: return "static";
    case FibEntry::Source::kBgp: return "bgp";
  }
  return "?";
}

json j_rib_entry(const Prefix& p, const RibEntry& r) {
  return json{{"prefix", p.str()},
              {"next_hop", r.next_hop_switch},
              {"as_path", r.as_path},
              {"local_pref", r.local_pref},
              {"source", r.source_session}};
}

json j_bgp_route(const BgpRoute& r) {
  return json{{"prefix", r.prefix.str()},
              {"as_path", r.as_path},
              {"local_pref", r.local_pref_hint}};
}

json j_fib_entry(const FibEntry& e) {
  return json{{"prefix", e.prefix.str()},
              {"egress", e.egress_interface},
              {"source", fib_source_name(e.source)},
              {"next_hop_mac", e.next_hop_mac.str()}};
}

json j_header(const HeaderLogEntry& e) {
  return json{{"id", e.packet_id},
              {"src", e.src_ip.str()},
              {"dst", e.dst_ip.str()},
              {"src_port", e.src_port},
              {"dst_port", e.dst_port},
              {"protocol", protocol_name(e.protocol)},
              {"ttl", e.ttl},
              {"dscp", e.dscp},
              {"checksum", e.header_checksum},
              {"digest", e.payload_digest},
              {"at", e.stamp},
              {"reason", drop_reason_name(e.reason)}};
}

json j_window(int port, std::int64_t w, const IngressWindow& win) {
  return json{{"port", port},
              {"window", w},
              {"traced_arrived", win.traced_arrived},
              {"no_fib", win.no_fib},
              {"acl_deny", win.acl_deny},
              {"zero_ttl", win.zero_ttl},
              {"bad_checksum", win.bad_checksum},
              {"dropped", win.dropped()}};
}

json j_captured(const CapturedMessage& c) {
  json out{{"at", c.at},
           {"dir", c.ingress ? "in" : "out"},
           {"peer", c.peer},
           {"kind", bgp_message_kind_name(c.msg.kind)}};
  if (c.msg.kind == BgpMessage::Kind::kAnnounce ||
      c.msg.kind == BgpMessage::Kind::kWithdraw) {
    out["prefix"] = c.msg.prefix.str();
    out["as_path"] = c.msg.as_path;
    out["local_pref"] = c.msg.local_pref_hint;
  }
  if (c.msg.kind == BgpMessage::Kind::kSnapshot) {
    json routes = json::array();
    for (const auto& r : c.msg.routes) routes.push_back(j_bgp_route(r));
    out["routes"] = std::move(routes);
  }
  return out;
}

json ok_reply(std::uint64_t rid, json payload) {
  return json{{"requestId", rid}, {"ok", true}, {"payload", std::move(payload)}};
}

json err_reply(std::uint64_t rid, const std::string& text) {
  return json{{"requestId", rid}, {"ok", false}, {"error", text}};
}

}  // namespace

Agent::Agent(Simulation& sim, SwitchId self)
    : sim_(sim), self_(std::move(self)) {}

// ---------------------------------------------------------------------
// Reply plumbing
// ---------------------------------------------------------------------

void Agent::send_reply(const std::string& json_text, Ipv4Addr to, bool raw,
                       int raw_if) {
  if (sim_.agent_down(self_)) return;
  if (!raw) {
    sim_.send_mgmt(self_, to, json_text);
    return;
  }
  const SwitchConfig* cfg = sim_.topology().switch_config(self_);
  const InterfaceConfig* ic = cfg ? cfg->interface(raw_if) : nullptr;
  if (!ic) return;
  Packet p;
  p.id = sim_.next_packet_id();
  p.src_ip = ic->addr;
  p.dst_ip = to;
  p.protocol = Protocol::kMgmt;
  p.ttl = 64;
  p.src_mac = ic->mac;
  p.control = std::make_shared<MgmtBlob>(mgmt_encode(json_text));
  seal_header(p);
  sim_.send_raw(self_, raw_if, std::move(p));
}

void Agent::cache_and_send(std::uint64_t request_id, const std::string& text,
                           Ipv4Addr to, bool raw, int raw_if) {
  if (!reply_cache_.count(request_id)) {
    reply_cache_[request_id] = text;
    reply_order_.push_back(request_id);
    while (reply_order_.size() > kReplyCacheCapacity) {
      reply_cache_.erase(reply_order_.front());
      reply_order_.pop_front();
    }
  }
  send_reply(text, to, raw, raw_if);
}

// ---------------------------------------------------------------------
// Command handling
// ---------------------------------------------------------------------

void Agent::on_mgmt(const Packet& pkt, int ingress_if) {
  auto blob = std::dynamic_pointer_cast<const MgmtBlob>(pkt.control);
  if (!blob) return;
  auto text = mgmt_decode(blob->json);
  if (!text) return;
  json j = json::parse(*text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return;

  // A reply (no "op") only matters when we relayed the request.
  if (!j.contains("op")) {
    if (!j.contains("requestId") || !j["requestId"].is_number_unsigned())
      return;
    const std::uint64_t inner_id = j["requestId"].get<std::uint64_t>();
    auto it = pending_relays_.find(inner_id);
    if (it == pending_relays_.end()) return;
    RelayPending pr = it->second;
    pending_relays_.erase(it);
    json wrapped = ok_reply(pr.outer_id, json{{"inner", std::move(j)}});
    cache_and_send(pr.outer_id, wrapped.dump(), pr.reply_to, pr.raw_reply,
                   pr.raw_reply_if);
    return;
  }

  if (!j.contains("requestId") || !j["requestId"].is_number_unsigned()) return;
  const std::uint64_t rid = j["requestId"].get<std::uint64_t>();
  const Ipv4Addr reply_to = pkt.src_ip;
  const bool raw = j.value("_raw_reply", false);
  const int raw_if = ingress_if;

  // Retransmitted request: answer from the cache without re-executing.
  if (auto it = reply_cache_.find(rid); it != reply_cache_.end()) {
    send_reply(it->second, reply_to, raw, raw_if);
    return;
  }
  // Still being worked on (deferred op): drop the duplicate.
  if (pending_markers_.count(rid) || (capture_.armed && capture_.request_id == rid))
    return;
  for (const auto& [iid, pr] : pending_relays_)
    if (pr.outer_id == rid) return;

  ++commands_served_;
  const std::string op = j.value("op", "");
  DataPlane& dp = sim_.dataplane(self_);
  ControlPlane& cp = sim_.controlplane(self_);
  const SwitchConfig* cfg = sim_.topology().switch_config(self_);
  const SimTime now = sim_.now();

  auto finish = [&](json reply) {
    cache_and_send(rid, reply.dump(), reply_to, raw, raw_if);
  };

  try {
    if (op == "GetCounters") {
      json ports = json::object();
      for (const auto& ic : cfg->interfaces) {
        ports[std::to_string(ic.index)] =
            json{{"ingress_traced", dp.cumulative_ingress_traced(ic.index)},
                 {"egress_traced", dp.cumulative_egress_traced(ic.index)}};
      }
      ports["-1"] = json{
          {"ingress_traced", dp.cumulative_ingress_traced(FibEntry::kCpuPort)},
          {"egress_traced", dp.cumulative_egress_traced(FibEntry::kCpuPort)}};
      json sessions = json::array();
      for (const auto& sv : cp.sessions()) {
        sessions.push_back(json{{"peer", sv.peer},
                                {"ibgp", sv.ibgp},
                                {"state", session_state_name(sv.state)},
                                {"last_rx", sv.last_rx},
                                {"established_at", sv.established_at},
                                {"flaps", sv.flap_count}});
      }
      finish(ok_reply(rid, json{{"ports", std::move(ports)},
                                {"sessions", std::move(sessions)},
                                {"rib_changes", cp.rib_change_count()},
                                {"protocol_errors", cp.protocol_error_count()},
                                {"unresolved_next_hops",
                                 cp.unresolved_next_hop_count()},
                                {"rib_size", cp.rib().size()},
                                {"fib_size", dp.fib().size()},
                                {"suppress", dp.suppress_flag()},
                                {"anomalies", anomalies_}}));
    } else if (op == "GetDropCounters") {
      const std::int64_t w = j.contains("window")
                                 ? j["window"].get<std::int64_t>()
                                 : dp.last_closed_window(now);
      json out = json::array();
      auto add_port = [&](int port) {
        json row = j_window(port, w, dp.ingress_window(port, w));
        row["cumulative_ingress"] = dp.cumulative_ingress_traced(port);
        row["cumulative_egress"] = dp.cumulative_egress_traced(port);
        out.push_back(std::move(row));
      };
      if (j.contains("port")) {
        add_port(j["port"].get<int>());
      } else {
        for (const auto& ic : cfg->interfaces) add_port(ic.index);
      }
      finish(ok_reply(rid, json{{"window", w}, {"ports", std::move(out)}}));
    } else if (op == "GetFib") {
      json entries = json::array();
      for (const auto& e : dp.fib()) entries.push_back(j_fib_entry(e));
      finish(ok_reply(rid, json{{"entries", std::move(entries)}}));
    } else if (op == "GetRib") {
      json routes = json::array();
      for (const auto& [p, r] : cp.rib()) routes.push_back(j_rib_entry(p, r));
      finish(ok_reply(rid, json{{"routes", std::move(routes)}}));
    } else if (op == "GetRibIn") {
      const std::string peer = j.value("peer", "");
      json routes = json::array();
      for (const auto& [p, r] : cp.rib_in(peer))
        routes.push_back(j_rib_entry(p, r));
      finish(ok_reply(rid, json{{"peer", peer}, {"routes", std::move(routes)}}));
    } else if (op == "GetRibOut") {
      const std::string peer = j.value("peer", "");
      json routes = json::array();
      for (const auto& r : cp.rib_out(peer)) routes.push_back(j_bgp_route(r));
      finish(ok_reply(rid, json{{"peer", peer}, {"routes", std::move(routes)}}));
    } else if (op == "GetAcl") {
      json rules = json::array();
      for (const auto& r : dp.acl()) {
        rules.push_back(json{
            {"action", r.action == AclRule::Action::kDeny ? "deny" : "permit"},
            {"match", r.match.str()}});
      }
      finish(ok_reply(rid, json{{"rules", std::move(rules)}}));
    } else if (op == "GetHeaderLogs") {
      const int port = j.value("port", 0);
      json in_recent = json::array();
      json in_dropped = json::array();
      json out_recent = json::array();
      if (const PortLogs* logs = dp.logs(port)) {
        for (const auto& e : logs->ingress_recent.entries())
          in_recent.push_back(j_header(e));
        for (const auto& e : logs->ingress_dropped.entries())
          in_dropped.push_back(j_header(e));
        for (const auto& e : logs->egress_recent.entries())
          out_recent.push_back(j_header(e));
      }
      finish(ok_reply(rid, json{{"port", port},
                                {"ingress_recent", std::move(in_recent)},
                                {"ingress_dropped", std::move(in_dropped)},
                                {"egress_recent", std::move(out_recent)}}));
    } else if (op == "SetTraceFilter") {
      auto spec = FlowSpec::parse(j.value("flow", ""));
      if (!spec) {
        finish(err_reply(rid, "unparseable flow spec"));
        return;
      }
      trace_filter_ = *spec;
      finish(ok_reply(rid, json{{"filter", spec->str()}}));
    } else if (op == "ClearTraceFilter") {
      trace_filter_.reset();
      finish(ok_reply(rid, json::object()));
    } else if (op == "ResetSuppressFlag") {
      dp.set_suppress_flag(false);
      checksum_episode_ = 0;
      finish(ok_reply(rid, json::object()));
    } else if (op == "RunSwitchDropTest") {
      const int span = std::clamp(j.value("windows", 3), 1, 32);
      const std::int64_t last = dp.last_closed_window(now);
      json reports = json::array();
      std::int64_t deficit = 0;
      for (std::int64_t w = std::max<std::int64_t>(0, last - span + 1);
           w <= last; ++w) {
        auto r = dp.silent_drop_check(w, now);
        if (!r) continue;
        deficit += r->deficit;
        reports.push_back(json{{"window", r->window_index},
                               {"ingress_traced", r->ingress_traced},
                               {"egress_traced", r->egress_traced},
                               {"deliberate_drops", r->deliberate_drops},
                               {"deficit", r->deficit}});
      }
      finish(ok_reply(rid, json{{"reports", std::move(reports)},
                                {"deficit", deficit}}));
    } else if (op == "InjectFlow") {
      auto spec = FlowSpec::parse(j.value("flow", ""));
      if (!spec) {
        finish(err_reply(rid, "unparseable flow spec"));
        return;
      }
      const int count = j.value("count", 10);
      if (count < 1 || count > 100000) {
        finish(err_reply(rid, "count out of range"));
        return;
      }
      const int dscp = j.value("dscp", 0);
      const int ttl = j.value("ttl", 64);
      sim_.inject_packets(self_, *spec, count,
                          static_cast<std::uint8_t>(dscp),
                          static_cast<std::uint8_t>(ttl));
      finish(ok_reply(rid, json{{"injected", count}}));
    } else if (op == "InstallStaticRoute") {
      auto prefix = Prefix::parse(j.value("prefix", ""));
      if (!prefix) {
        finish(err_reply(rid, "unparseable prefix"));
        return;
      }
      if (j.value("remove", false)) {
        const bool removed = cp.remove_runtime_static(*prefix);
        if (removed) sim_.force_fib_sync(self_);
        finish(ok_reply(rid, json{{"removed", removed}}));
        return;
      }
      int egress = -1;
      if (j.contains("interface")) {
        egress = j["interface"].get<int>();
      } else if (j.contains("via")) {
        const std::string via = j["via"].get<std::string>();
        for (const auto& lc : sim_.topology().links) {
          if ((lc.a_node == self_ && lc.b_node == via) ||
              (lc.b_node == self_ && lc.a_node == via)) {
            egress = lc.if_of(self_);
            break;
          }
        }
        if (egress < 0) {
          finish(err_reply(rid, "no direct link to " + via));
          return;
        }
      }
      if (!cfg->interface(egress)) {
        finish(err_reply(rid, "no such interface"));
        return;
      }
      cp.add_runtime_static({*prefix, egress});
      sim_.force_fib_sync(self_);
      finish(ok_reply(rid, json{{"prefix", prefix->str()},
                                {"interface", egress}}));
    } else if (op == "RunLinkMarkerTest") {
      LinkId link_id = j.value("link", "");
      if (link_id.empty() && j.contains("peer"))
        link_id = make_link_id(self_, j["peer"].get<std::string>());
      const LinkConfig* lc = sim_.topology().link(link_id);
      if (!lc || (lc->a_node != self_ && lc->b_node != self_)) {
        finish(err_reply(rid, "not an endpoint of link " + link_id));
        return;
      }
      const NodeId peer = lc->peer_of(self_);
      if (!sim_.topology().switch_config(peer)) {
        finish(err_reply(rid, "marker peer is not a switch"));
        return;
      }
      const int own_port = lc->if_of(self_);
      MarkerPending mp;
      mp.reply_to = reply_to;
      mp.raw_reply = raw;
      mp.raw_reply_if = raw_if;
      mp.link = lc->id;
      mp.own_port = own_port;
      mp.sent_egress = dp.cumulative_egress_traced(own_port);
      pending_markers_[rid] = mp;

      auto mb = std::make_shared<MarkerBlob>();
      mb->link = lc->id;
      mb->request_id = rid;
      mb->sender_egress_traced = mp.sent_egress;
      Packet probe;
      probe.id = sim_.next_packet_id();
      probe.src_ip = cfg->interface(own_port)->addr;
      probe.dst_ip = sim_.topology()
                         .switch_config(peer)
                         ->interface(lc->if_of(peer))
                         ->addr;
      probe.protocol = Protocol::kMarker;
      probe.ttl = 64;
      probe.control = mb;
      seal_header(probe);
      sim_.send_raw(self_, own_port, std::move(probe));
      sim_.schedule(kMarkerTimeoutUs, "marker-to " + self_, [this, rid] {
        auto it = pending_markers_.find(rid);
        if (it == pending_markers_.end()) return;
        MarkerPending mp2 = it->second;
        pending_markers_.erase(it);
        cache_and_send(rid, err_reply(rid, "marker timeout").dump(),
                       mp2.reply_to, mp2.raw_reply, mp2.raw_reply_if);
      });
    } else if (op == "CaptureControlPackets") {
      if (capture_.armed) {
        finish(err_reply(rid, "capture already in progress"));
        return;
      }
      const SimTime dur = j.value("duration_us", kDefaultCaptureUs);
      capture_ = CaptureState{};
      capture_.armed = true;
      capture_.until = now + dur;
      capture_.request_id = rid;
      capture_.reply_to = reply_to;
      capture_.raw_reply = raw;
      capture_.raw_reply_if = raw_if;
      // Solicit a fresh exchange so steady-state peers become visible.
      if (!sim_.daemon_down(self_)) {
        for (auto& o : cp.resync_exchange()) sim_.send_bgp(self_, o.peer, o.msg);
      }
      sim_.schedule(dur, "cap-done " + self_, [this, rid] {
        if (!capture_.armed || capture_.request_id != rid) return;
        json msgs = json::array();
        for (const auto& c : capture_.messages) msgs.push_back(j_captured(c));
        CaptureState done = std::move(capture_);
        capture_ = CaptureState{};
        cache_and_send(rid,
                       ok_reply(rid, json{{"messages", std::move(msgs)}}).dump(),
                       done.reply_to, done.raw_reply, done.raw_reply_if);
      });
    } else if (op == "Relay") {
      const std::string neighbor = j.value("neighbor", "");
      if (!j.contains("inner") || !j["inner"].is_object() ||
          !j["inner"].contains("requestId")) {
        finish(err_reply(rid, "relay needs an inner command"));
        return;
      }
      const LinkConfig* lc = nullptr;
      for (const auto& cand : sim_.topology().links) {
        if ((cand.a_node == self_ && cand.b_node == neighbor) ||
            (cand.b_node == self_ && cand.a_node == neighbor)) {
          lc = &cand;
          break;
        }
      }
      if (!lc || !sim_.topology().switch_config(neighbor)) {
        finish(err_reply(rid, "no adjacent switch " + neighbor));
        return;
      }
      json inner = j["inner"];
      inner["_raw_reply"] = true;
      const std::uint64_t inner_id = inner["requestId"].get<std::uint64_t>();
      RelayPending pr;
      pr.outer_id = rid;
      pr.reply_to = reply_to;
      pr.raw_reply = raw;
      pr.raw_reply_if = raw_if;
      pending_relays_[inner_id] = pr;

      const int own_port = lc->if_of(self_);
      Packet p;
      p.id = sim_.next_packet_id();
      p.src_ip = cfg->interface(own_port)->addr;
      p.dst_ip = sim_.topology()
                     .switch_config(neighbor)
                     ->interface(lc->if_of(neighbor))
                     ->addr;
      p.protocol = Protocol::kMgmt;
      p.ttl = 64;
      p.control = std::make_shared<MgmtBlob>(mgmt_encode(inner.dump()));
      seal_header(p);
      sim_.send_raw(self_, own_port, std::move(p));
      sim_.schedule(kRelayTimeoutUs, "relay-to " + self_, [this, inner_id] {
        auto it = pending_relays_.find(inner_id);
        if (it == pending_relays_.end()) return;
        RelayPending pr2 = it->second;
        pending_relays_.erase(it);
        cache_and_send(pr2.outer_id,
                       err_reply(pr2.outer_id, "relay timeout").dump(),
                       pr2.reply_to, pr2.raw_reply, pr2.raw_reply_if);
      });
    } else {
      finish(err_reply(rid, "unknown op: " + op));
    }
  } catch (const std::exception& e) {
    finish(err_reply(rid, std::string("bad request: ") + e.what()));
  }
}

// ---------------------------------------------------------------------
// Marker handling
// ---------------------------------------------------------------------

void Agent::on_marker(const Packet& pkt, int ingress_if) {
  auto blob = std::dynamic_pointer_cast<const MarkerBlob>(pkt.control);
  if (!blob) return;
  DataPlane& dp = sim_.dataplane(self_);
  if (!blob->is_reply) {
    auto rep = std::make_shared<MarkerBlob>(*blob);
    rep->is_reply = true;
    rep->responder_ingress_traced = dp.cumulative_ingress_traced(ingress_if);
    Packet p;
    p.id = sim_.next_packet_id();
    p.src_ip = pkt.dst_ip;
    p.dst_ip = pkt.src_ip;
    p.protocol = Protocol::kMarker;
    p.ttl = 64;
    p.control = rep;
    seal_header(p);
    sim_.send_raw(self_, ingress_if, std::move(p));
    return;
  }
  auto it = pending_markers_.find(blob->request_id);
  if (it == pending_markers_.end()) return;
  MarkerPending mp = it->second;
  pending_markers_.erase(it);
  const auto sent = blob->sender_egress_traced;
  const auto received = blob->responder_ingress_traced;
  const std::int64_t deficit =
      static_cast<std::int64_t>(sent) - static_cast<std::int64_t>(received);
  json payload{{"link", mp.link},
               {"sent", sent},
               {"received", received},
               {"deficit", deficit}};
  cache_and_send(blob->request_id,
                 ok_reply(blob->request_id, std::move(payload)).dump(),
                 mp.reply_to, mp.raw_reply, mp.raw_reply_if);
}

// ---------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------

void Agent::on_fault_trigger(int ingress_if, SimTime now) {
  DataPlane& dp = sim_.dataplane(self_);
  if (dp.suppress_flag()) return;
  const std::int64_t w = dp.last_closed_window(now);
  const IngressWindow win = dp.ingress_window(ingress_if, w);
  const char* dominant = "no_fib_entry";
  std::uint64_t top = win.no_fib;
  if (win.acl_deny > top) { dominant = "acl_deny"; top = win.acl_deny; }
  if (win.zero_ttl > top) { dominant = "zero_ttl"; top = win.zero_ttl; }
  if (win.bad_checksum > top) { dominant = "bad_checksum"; top = win.bad_checksum; }
  json report{{"type", "fault_report"},
              {"switch", self_},
              {"ingress_if", ingress_if},
              {"dominant", dominant},
              {"counters", j_window(ingress_if, w, win)},
              {"at", now}};
  dp.set_suppress_flag(true);
  ++fault_reports_;
  sim_.send_mgmt(self_, sim_.diagnosis_host_addr(), report.dump());
}

void Agent::on_checksum_mirror(const Packet& pkt, bool egress_stage,
                               SimTime now) {
  if (checksum_episode_ >= kChecksumReportsPerEpisode) return;
  ++checksum_episode_;
  ++checksum_reports_;
  json report{{"type", "checksum_report"},
              {"switch", self_},
              {"stage", egress_stage ? "egress" : "ingress"},
              {"packet_id", pkt.id},
              {"src", pkt.src_ip.str()},
              {"dst", pkt.dst_ip.str()},
              {"ttl", pkt.ttl},
              {"digest", pkt.payload_digest},
              {"checksum", pkt.header_checksum},
              {"at", now}};
  sim_.send_mgmt(self_, sim_.diagnosis_host_addr(), report.dump());
}

// ---------------------------------------------------------------------
// Control-plane capture
// ---------------------------------------------------------------------

void Agent::on_control_ingress(const SwitchId& peer, const BgpMessage& msg,
                               SimTime now) {
  if (!capture_.armed || now > capture_.until) return;
  capture_.messages.push_back(CapturedMessage{peer, true, msg, now});
}

void Agent::on_control_egress(const SwitchId& peer, const BgpMessage& msg,
                              SimTime now) {
  if (!capture_.armed || now > capture_.until) return;
  capture_.messages.push_back(CapturedMessage{peer, false, msg, now});
}

// ---------------------------------------------------------------------
// Anomaly scan
// ---------------------------------------------------------------------

void Agent::note_anomaly(SimTime now, const std::string& text) {
  anomalies_.push_back("t=" + std::to_string(now) + " " + text);
  if (anomalies_.size() > kAnomalyLogCapacity)
    anomalies_.erase(anomalies_.begin());
}

void Agent::tick(SimTime now) {
  ControlPlane& cp = sim_.controlplane(self_);
  std::uint64_t flaps = 0;
  for (const auto& sv : cp.sessions()) flaps += sv.flap_count;
  if (last_anomaly_scan_ < 0) {
    last_anomaly_scan_ = now;
    scan_rib_changes_ = cp.rib_change_count();
    scan_flap_sum_ = flaps;
    return;
  }
  if (now - last_anomaly_scan_ < sim_.config().anomaly_tick_us) return;
  const std::uint64_t churn = cp.rib_change_count() - scan_rib_changes_;
  if (churn > kRibChurnThreshold)
    note_anomaly(now, "rib churn: " + std::to_string(churn) + " changes");
  const std::uint64_t new_flaps = flaps - scan_flap_sum_;
  if (new_flaps >= kFlapThreshold)
    note_anomaly(now, "session flapping: " + std::to_string(new_flaps));
  const DataPlane& dp = sim_.dataplane(self_);
  const auto limit = static_cast<std::size_t>(
      static_cast<double>(kTableCapacity) * kResourceAlarmRatio);
  if (cp.rib().size() >= limit)
    note_anomaly(now, "rib near capacity: " + std::to_string(cp.rib().size()));
  if (dp.fib().size() >= limit)
    note_anomaly(now, "fib near capacity: " + std::to_string(dp.fib().size()));
  last_anomaly_scan_ = now;
  scan_rib_changes_ = cp.rib_change_count();
  scan_flap_sum_ = flaps;
}

}  // namespace netdx
