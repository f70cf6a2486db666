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

#include "netdx/manager.hpp"

#include <algorithm>
#include <sstream>

#include "json.hpp"
#include "netdx/checksum.hpp"

namespace netdx {

namespace {

using json = nlohmann::json;

/** DSCP value the forwarding pipeline mirrors per hop for traced packets. */
constexpr std::uint8_t kDigestProbeDscp = 0x14;

json jload(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) return json::object();
  return j;
}

/** Sets the active script name for evidence entries; restores on exit. */
class ScriptScope {
 public:
  ScriptScope(std::string& slot, std::string name)
      : slot_(slot), prev_(slot) {
    slot_ = std::move(name);
  }
  ~ScriptScope() { slot_ = prev_; }
  ScriptScope(const ScriptScope&) = delete;
  ScriptScope& operator=(const ScriptScope&) = delete;

 private:
  std::string& slot_;
  std::string prev_;
};

std::optional<DropReason> reason_from_name(const std::string& n) {
  if (n == "no_fib_entry") return DropReason::kNoFibEntry;
  if (n == "acl_deny") return DropReason::kAclDeny;
  if (n == "zero_ttl") return DropReason::kZeroTtl;
  if (n == "bad_checksum") return DropReason::kBadHeaderChecksum;
  return std::nullopt;
}

/** True when the routes array of a GetRib-style reply contains `p`. */
bool routes_contain(const json& payload, const Prefix& p) {
  if (!payload.contains("routes")) return false;
  for (const auto& r : payload["routes"])
    if (r.value("prefix", "") == p.str()) return true;
  return false;
}

const json* find_route(const json& payload, const Prefix& p) {
  if (!payload.contains("routes")) return nullptr;
  for (const auto& r : payload["routes"])
    if (r.value("prefix", "") == p.str()) return &r;
  return nullptr;
}

/** Longest-prefix match over a GetFib reply; null when nothing covers. */
const json* fib_lpm(const json& payload, Ipv4Addr dst) {
  const json* best = nullptr;
  int best_len = -1;
  if (!payload.contains("entries")) return nullptr;
  for (const auto& e : payload["entries"]) {
    auto p = Prefix::parse(e.value("prefix", ""));
    if (!p || !p->contains(dst)) continue;
    if (int(p->len) > best_len) {
      best_len = p->len;
      best = &e;
    }
  }
  return best;
}

std::string join_path(const std::vector<SwitchId>& path) {
  std::string out;
  for (const auto& s : path) {
    if (!out.empty()) out += ">";
    out += s;
  }
  return out;
}

/** Probe-flow match that tolerates a damaged destination address. */
bool entry_matches_flow(const json& e, const FlowSpec& f) {
  if (f.protocol &&
      e.value("protocol", 0) != static_cast<int>(*f.protocol))
    return false;
  if (f.src_port && e.value("src_port", 0) != *f.src_port) return false;
  if (f.dst_port && e.value("dst_port", 0) != *f.dst_port) return false;
  if (f.src) {
    auto a = Ipv4Addr::parse(e.value("src", ""));
    if (!a || !f.src->contains(*a)) return false;
  }
  return true;
}

/** Rebuilds the checksum-relevant header fields from a log entry. */
Packet packet_from_log(const json& e) {
  Packet p;
  if (auto a = Ipv4Addr::parse(e.value("src", ""))) p.src_ip = *a;
  if (auto a = Ipv4Addr::parse(e.value("dst", ""))) p.dst_ip = *a;
  p.id = e.value("id", std::uint16_t{0});
  p.ttl = static_cast<std::uint8_t>(e.value("ttl", 0));
  p.dscp = static_cast<std::uint8_t>(e.value("dscp", 0));
  p.protocol = static_cast<Protocol>(e.value("protocol", 17));
  p.header_checksum = e.value("checksum", std::uint16_t{0});
  return p;
}

/** True when the logged checksum matches a recompute over logged fields. */
bool log_entry_checksum_ok(const json& e) {
  Packet p = packet_from_log(e);
  return ipv4_header_checksum(p) == p.header_checksum;
}

const char* category_name_or(const std::optional<FaultCategory>& c) {
  return c ? fault_category_name(*c) : "none";
}

}  // namespace

// ---------------------------------------------------------------------
// Symptom / FailureReport / Verdict / Diagnosis
// ---------------------------------------------------------------------

const char* symptom_name(Symptom s) {
  switch (s) {
    case Symptom::kUnreachable: return "unreachable";
    case Symptom::kIntermittent: return "intermittent";
    case Symptom::kCorruption: return "corruption";
  }
  return "?";
}

std::string FailureReport::str() const {
  std::string out = src_host + "->" + dst_host + " " + symptom_name(symptom);
  if (flow) out += " [" + flow->str() + "]";
  return out;
}

Verdict Verdict::faulty_switch(SwitchId id) {
  Verdict v;
  v.kind = Kind::kFaultySwitch;
  v.switch_id = std::move(id);
  return v;
}

Verdict Verdict::faulty_link(LinkId id) {
  Verdict v;
  v.kind = Kind::kFaultyLink;
  v.link_id = std::move(id);
  return v;
}

Verdict Verdict::fault_at(SwitchId sw, SwitchId neighbor) {
  Verdict v;
  v.kind = Kind::kFaultAt;
  v.switch_id = std::move(sw);
  v.neighbor = std::move(neighbor);
  v.link_id = make_link_id(v.switch_id, v.neighbor);
  return v;
}

Verdict Verdict::no_fault() { return Verdict{}; }

Verdict Verdict::config_not_fault() {
  Verdict v;
  v.kind = Kind::kConfigNotFault;
  return v;
}

Verdict Verdict::inconclusive() {
  Verdict v;
  v.kind = Kind::kInconclusive;
  return v;
}

std::string Verdict::str() const {
  switch (kind) {
    case Kind::kFaultySwitch: return "FaultySwitch(" + switch_id + ")";
    case Kind::kFaultyLink: return "FaultyLink(" + link_id + ")";
    case Kind::kFaultAt:
      return "FaultAt(" + switch_id + ", neighbor " + neighbor +
             ", or link " + link_id + ")";
    case Kind::kNoFaultFound: return "NoFaultFound";
    case Kind::kConfigNotFault: return "ConfigNotFault";
    case Kind::kInconclusive: return "Inconclusive";
  }
  return "?";
}

std::vector<std::string> Diagnosis::script_sequence() const {
  std::vector<std::string> out;
  for (const auto& e : evidence)
    if (out.empty() || out.back() != e.script) out.push_back(e.script);
  return out;
}

std::string Diagnosis::to_json() const {
  json ev = json::array();
  for (const auto& e : evidence)
    ev.push_back(json{{"script", e.script},
                      {"primitive", e.primitive},
                      {"target", e.target},
                      {"summary", e.summary}});
  json j{{"verdict", verdict.str()},
         {"category", category_name_or(category)},
         {"primitives", primitive_count()},
         {"runs_to_consensus", runs_to_consensus},
         {"used_fault_report", used_fault_report},
         {"used_disconnected", used_disconnected},
         {"evidence", std::move(ev)}};
  return j.dump(2);
}

std::string Diagnosis::format() const {
  std::ostringstream out;
  out << "verdict: " << verdict.str() << "\n";
  out << "category: " << category_name_or(category) << "\n";
  out << "runs to consensus: " << runs_to_consensus << "\n";
  out << "primitives: " << primitive_count() << "\n";
  std::string script;
  for (const auto& e : evidence) {
    if (e.script != script) {
      script = e.script;
      out << "[" << script << "]\n";
    }
    out << "  " << e.primitive << " @" << e.target << ": " << e.summary
        << "\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------
// Manager: construction and plumbing
// ---------------------------------------------------------------------

Manager::Manager(Simulation& sim, const Oracle& oracle, ManagerConfig cfg)
    : sim_(sim), oracle_(oracle), cfg_(cfg) {
  dh_ = sim_.topology().diagnosis_host;
  const HostConfig* hc = sim_.topology().host_config(dh_);
  if (!hc) throw std::runtime_error("topology has no diagnosis host");
  dh_ip_ = hc->ip;
  dh_secondary_ = hc->secondary_ip;
}

void Manager::pump(SimTime duration) {
  const SimTime deadline = sim_.now() + duration;
  while (sim_.now() < deadline) {
    sim_.run_for(std::min<SimTime>(10'000, deadline - sim_.now()));
    drain_inbox();
  }
}

void Manager::drain_inbox() {
  for (auto& d : sim_.take_host_inbox(dh_)) {
    if (d.pkt.protocol == Protocol::kIcmp) {
      icmp_.push_back(d.pkt);
      continue;
    }
    auto mb = std::dynamic_pointer_cast<const MgmtBlob>(d.pkt.control);
    if (!mb) continue;
    auto txt = mgmt_decode(mb->json);
    if (!txt) continue;
    json j = json::parse(*txt, nullptr, false);
    if (j.is_discarded() || !j.is_object()) continue;
    const std::string type = j.value("type", "");
    if (type == "fault_report") {
      ++fault_reports_seen_;
      fault_reports_.push_back(*txt);
    } else if (type == "checksum_report") {
      checksum_reports_.push_back(*txt);
    } else if (!j.contains("op") && j.contains("requestId")) {
      replies_[j["requestId"].get<std::uint64_t>()] = *txt;
    }
  }
}

std::vector<Packet> Manager::take_icmp() {
  drain_inbox();
  return std::exchange(icmp_, {});
}

Ipv4Addr Manager::agent_addr(const SwitchId& target) const {
  if (auto it = addr_override_.find(target); it != addr_override_.end())
    return it->second;
  const SwitchConfig* sc = sim_.topology().switch_config(target);
  return sc ? sc->loopback : Ipv4Addr{};
}

void Manager::note(const std::string& primitive, const std::string& target,
                   const std::string& summary) {
  if (active_)
    active_->evidence.push_back(
        EvidenceEntry{current_script_, primitive, target, summary});
}

std::string Manager::call_raw(Ipv4Addr dst, const std::string& op,
                              std::string params_json, SimTime timeout_us,
                              int attempts, bool from_secondary) {
  json req = jload(params_json);
  req["op"] = op;
  const std::uint64_t rid = ++next_rid_;
  req["requestId"] = rid;
  const std::string wire = req.dump();
  for (int attempt = 0; attempt < attempts; ++attempt) {
    Packet p;
    p.src_ip = from_secondary ? dh_secondary_ : dh_ip_;
    p.dst_ip = dst;
    p.protocol = Protocol::kMgmt;
    p.ttl = 64;
    p.control = std::make_shared<MgmtBlob>(mgmt_encode(wire));
    sim_.host_send(dh_, p);
    const SimTime deadline = sim_.now() + timeout_us;
    while (sim_.now() < deadline) {
      pump(5'000);
      if (auto it = replies_.find(rid); it != replies_.end()) {
        std::string text = std::move(it->second);
        replies_.erase(it);
        return text;
      }
    }
  }
  return "";
}

Manager::CallResult Manager::call(const SwitchId& target,
                                  const std::string& op,
                                  const std::string& params_json,
                                  SimTime timeout_us, int attempts) {
  if (timeout_us == 0) timeout_us = cfg_.rpc_timeout_us;
  if (attempts == 0) attempts = cfg_.rpc_attempts;
  const bool via_secondary = addr_override_.count(target) > 0;
  const std::string text = call_raw(agent_addr(target), op, params_json,
                                    timeout_us, attempts, via_secondary);
  CallResult r;
  if (text.empty()) {
    note(op, target, "no reply");
    return r;
  }
  r.reached = true;
  json j = jload(text);
  r.ok = j.value("ok", false);
  if (r.ok) {
    r.payload = j.contains("payload") ? j["payload"].dump() : "{}";
    note(op, target, "ok");
  } else {
    r.error = j.value("error", "error");
    note(op, target, r.error);
  }
  return r;
}

Manager::CallResult Manager::relay_call(const SwitchId& via,
                                        const SwitchId& target,
                                        const std::string& op,
                                        const std::string& params_json) {
  json inner = jload(params_json);
  inner["op"] = op;
  inner["requestId"] = ++next_rid_;
  json params{{"neighbor", target}, {"inner", std::move(inner)}};
  // The relayed command is a primitive of its own.
  note(op, target, "relayed via " + via);
  CallResult outer =
      call(via, "Relay", params.dump(),
           cfg_.rpc_timeout_us + cfg_.contact_timeout_us, 1);
  CallResult r;
  if (!outer.reached || !outer.ok) {
    r.reached = outer.reached;
    r.error = outer.error.empty() ? "relay failed" : outer.error;
    return r;
  }
  json payload = jload(outer.payload);
  if (!payload.contains("inner")) {
    r.error = "relay reply missing inner";
    return r;
  }
  const json& in = payload["inner"];
  r.reached = true;
  r.ok = in.value("ok", false);
  if (r.ok)
    r.payload = in.contains("payload") ? in["payload"].dump() : "{}";
  else
    r.error = in.value("error", "error");
  return r;
}

bool Manager::contact(const SwitchId& target) {
  CallResult r = call(target, "GetCounters", "{}", cfg_.contact_timeout_us,
                      cfg_.contact_attempts);
  return r.reached;
}

// ---------------------------------------------------------------------
// Probe construction
// ---------------------------------------------------------------------

FlowSpec Manager::probe_flow(const FailureReport& report,
                             bool reverse) const {
  const HostConfig* src = sim_.topology().host_config(report.src_host);
  const HostConfig* dst = sim_.topology().host_config(report.dst_host);
  FlowSpec f;
  if (report.flow) f = *report.flow;
  if (src && dst) {
    f.src = Prefix::host_route(reverse ? dst->ip : src->ip);
    f.dst = Prefix::host_route(reverse ? src->ip : dst->ip);
  }
  if (!f.protocol) f.protocol = Protocol::kUdp;
  if (!f.src_port) f.src_port = 4444;
  if (!f.dst_port) f.dst_port = 7;
  return f;
}

Packet Manager::probe_packet(const FlowSpec& flow) const {
  Packet p;
  if (flow.src) p.src_ip = flow.src->addr;
  if (flow.dst) p.dst_ip = flow.dst->addr;
  p.protocol = flow.protocol.value_or(Protocol::kUdp);
  p.src_port = flow.src_port.value_or(4444);
  p.dst_port = flow.dst_port.value_or(7);
  p.ttl = 64;
  seal_header(p);
  return p;
}

// ---------------------------------------------------------------------
// Drop localization
// ---------------------------------------------------------------------

void Manager::start_probes(const SwitchId& edge, const FlowSpec& flow,
                           RunState& rs) {
  (void)rs;
  call(edge, "SetTraceFilter",
       json{{"flow", flow.str()}}.dump());
  // Bursts are paced so every trigger window that swallowed probes is
  // followed by more probe drops that evaluate it once it closes.
  for (int b = 0; b < cfg_.probe_bursts; ++b) {
    call(edge, "InjectFlow",
         json{{"flow", flow.str()}, {"count", cfg_.probe_burst}}.dump());
    pump(cfg_.burst_gap_us);
  }
}

std::optional<std::string> Manager::fetch_fault_report() {
  drain_inbox();
  if (fault_reports_.empty()) return std::nullopt;
  std::string text = std::move(fault_reports_.front());
  fault_reports_.pop_front();
  return text;
}

std::optional<Manager::DropSite> Manager::locate_drop(
    const FlowSpec& flow, const std::vector<SwitchId>& path, RunState& rs) {
  ScriptScope scope(current_script_, "locate-drop");
  if (path.empty()) return std::nullopt;
  const SwitchId& edge = path.front();
  rs.touched.insert(edge);

  const SimTime probes_begin = sim_.now();
  start_probes(edge, flow, rs);

  // Give the proactive path a chance first.
  const SimTime report_deadline = sim_.now() + cfg_.report_wait_us;
  while (sim_.now() < report_deadline) {
    if (auto text = fetch_fault_report()) {
      json rep = jload(*text);
      const std::string at = rep.value("switch", "");
      const std::string dom = rep.value("dominant", "");
      note("FaultReport", at, "proactive report, dominant " + dom);
      rs.used_fault_report = true;
      rs.touched.insert(at);
      DropSite site;
      site.at = at;
      site.via_report = true;
      if (auto r = reason_from_name(dom)) site.reason = *r;
      return site;
    }
    pump(20'000);
  }
  note("FaultReport", edge, "no proactive report arrived");

  // Window span covering everything since the probes started.
  const auto span_windows = static_cast<int>(
      std::clamp<SimTime>((sim_.now() - probes_begin) / 200'000 + 2, 3, 32));

  for (std::size_t i = 0; i < path.size(); ++i) {
    const SwitchId& sw = path[i];
    CallResult r = call(sw, "RunSwitchDropTest",
                        json{{"windows", span_windows}}.dump());
    if (!r.reached) {
      DropSite site;
      site.at = sw;
      site.unreachable = true;
      return site;
    }
    if (r.ok) {
      json payload = jload(r.payload);
      const std::int64_t deficit = payload.value("deficit", std::int64_t{0});
      std::int64_t deliberate = 0;
      for (const auto& row : payload.value("reports", json::array()))
        deliberate += row.value("deliberate_drops", std::int64_t{0});
      if (deficit > 0) {
        note("oracle:conservation", sw,
             "in-switch deficit " + std::to_string(deficit));
        DropSite site;
        site.at = sw;
        site.silent = true;
        return site;
      }
      if (deliberate > 0) {
        // The counters say the drop was deliberate; the header log on the
        // flow's ingress port names the reason.
        rs.touched.insert(sw);
        int ingress_if = -1;
        if (auto probe = probe_packet(flow); true) {
          PathResult pr = oracle_.trace(probe);
          for (const auto& st : pr.hops)
            if (st.node == sw) ingress_if = st.ingress_interface;
        }
        CallResult logs = call(sw, "GetHeaderLogs",
                               json{{"port", ingress_if}}.dump());
        if (logs.ok) {
          json lp = jload(logs.payload);
          for (const auto& e : lp.value("ingress_dropped", json::array())) {
            if (!entry_matches_flow(e, flow)) continue;
            if (auto reason = reason_from_name(e.value("reason", ""))) {
              DropSite site;
              site.at = sw;
              site.reason = *reason;
              return site;
            }
          }
        }
        DropSite site;
        site.at = sw;
        site.reason = DropReason::kNoFibEntry;
        return site;
      }
    }
    if (i + 1 < path.size()) {
      const SwitchId& next = path[i + 1];
      CallResult m = call(sw, "RunLinkMarkerTest",
                          json{{"peer", next}}.dump(),
                          cfg_.rpc_timeout_us, 1);
      if (m.ok) {
        json payload = jload(m.payload);
        if (payload.value("deficit", std::int64_t{0}) > 0) {
          DropSite site;
          site.at = sw;
          site.link = make_link_id(sw, next);
          site.silent = true;
          return site;
        }
      } else if (m.reached) {
        // Marker timed out: the far side never answered. Let the contact
        // check decide whether the neighbor itself is gone.
        if (!contact(next)) {
          DropSite site;
          site.at = next;
          site.unreachable = true;
          return site;
        }
        DropSite site;
        site.at = sw;
        site.link = make_link_id(sw, next);
        site.silent = true;
        return site;
      }
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------
// Top-level dispatch
// ---------------------------------------------------------------------

Diagnosis Manager::finish(RunState& rs, Verdict v,
                          std::optional<FaultCategory> cat) {
  Diagnosis d;
  d.verdict = std::move(v);
  d.category = cat;
  d.evidence = rs.evidence;
  d.used_fault_report = rs.used_fault_report;
  d.used_disconnected = rs.used_disconnected;
  return d;
}

Diagnosis Manager::run_once(const FailureReport& report, RunState& rs) {
  ScriptScope scope(current_script_, "locate-drop");

  const FlowSpec fwd = probe_flow(report, false);
  const Packet fwd_probe = probe_packet(fwd);
  PathResult fwd_path = oracle_.trace(fwd_probe);
  note("oracle:trace", report.src_host + ">" + report.dst_host,
       "expected " + join_path(fwd_path.switches()) + " outcome " +
           path_outcome_name(fwd_path.outcome));

  if (fwd_path.outcome == PathResult::Outcome::kAclDeny ||
      fwd_path.outcome == PathResult::Outcome::kNoRoute) {
    note("oracle:trace", report.dst_host,
         "flow is expected to fail by configuration");
    return finish(rs, Verdict::config_not_fault(), std::nullopt);
  }

  if (report.symptom == Symptom::kCorruption)
    return diagnose_corruption(fwd, fwd_probe, rs);

  if (auto site = locate_drop(fwd, fwd_path.switches(), rs))
    return dispatch_drop(*site, fwd, fwd_probe, rs);

  // The forward leg is clean; the complaint may be about lost replies.
  const FlowSpec rev = probe_flow(report, true);
  const Packet rev_probe = probe_packet(rev);
  PathResult rev_path = oracle_.trace(rev_probe);
  note("oracle:trace", report.dst_host + ">" + report.src_host,
       "reverse expected " + join_path(rev_path.switches()) + " outcome " +
           path_outcome_name(rev_path.outcome));
  if (auto site = locate_drop(rev, rev_path.switches(), rs))
    return dispatch_drop(*site, rev, rev_probe, rs);

  return finish(rs, Verdict::no_fault(), std::nullopt);
}

Diagnosis Manager::dispatch_drop(const DropSite& site, const FlowSpec& flow,
                                 const Packet& probe, RunState& rs) {
  if (site.unreachable) return diagnose_disconnected(site.at, rs);

  if (site.silent && !site.link.empty())
    return finish(rs, Verdict::faulty_link(site.link),
                  FaultCategory::kPacketForwarding);
  if (site.silent)
    return finish(rs, Verdict::faulty_switch(site.at),
                  FaultCategory::kPacketForwarding);

  switch (site.reason) {
    case DropReason::kNoFibEntry:
      return diagnose_no_forwarding(site.at, flow, probe, rs);
    case DropReason::kZeroTtl: {
      PathResult pr = oracle_.trace(probe);
      return diagnose_ttl(pr.switches(), flow, rs);
    }
    case DropReason::kBadHeaderChecksum:
      return diagnose_link_corruption(site.at, flow, rs);
    case DropReason::kAclDeny: {
      HopDecision hd = oracle_.decide(site.at, probe);
      note("oracle:decide", site.at,
           hd.kind == HopDecision::Kind::kAclDeny
               ? "the configured policy denies this flow"
               : "policy should permit this flow");
      if (hd.kind == HopDecision::Kind::kAclDeny)
        return finish(rs, Verdict::config_not_fault(), std::nullopt);
      return finish(rs, Verdict::faulty_switch(site.at),
                    FaultCategory::kPacketForwarding);
    }
    default:
      return finish(rs, Verdict::faulty_switch(site.at),
                    FaultCategory::kPacketForwarding);
  }
}

// ---------------------------------------------------------------------
// Script: no-forwarding
// ---------------------------------------------------------------------

Diagnosis Manager::diagnose_no_forwarding(SwitchId sut, const FlowSpec& flow,
                                          const Packet& probe, RunState& rs) {
  (void)flow;
  ScriptScope scope(current_script_, "no-forwarding");
  if (!rs.visited.insert({sut, "no-forwarding"}).second)
    return finish(rs, Verdict::inconclusive(), std::nullopt);
  rs.touched.insert(sut);

  const Ipv4Addr dst = probe.dst_ip;
  PathResult expected = oracle_.trace(probe);
  const auto path = expected.switches();

  if (std::find(path.begin(), path.end(), sut) == path.end()) {
    // Traffic drifted off the expected path before dying; find the first
    // switch whose table disagrees with the reference and blame it.
    note("oracle:trace", sut, "drop site is off the expected path");
    for (const auto& sw : path) {
      CallResult fr = call(sw, "GetFib");
      if (!fr.reached) return diagnose_disconnected(sw, rs);
      if (!fr.ok) continue;
      const json payload = jload(fr.payload);
      const json* entry = fib_lpm(payload, dst);
      auto want = oracle_.expected_egress(sw, probe);
      const int got = entry ? entry->value("egress", -2) : -2;
      if (!want || got != *want) {
        note("oracle:expected-egress", sw,
             "forwarding diverges from the reference here");
        return finish(rs, Verdict::faulty_switch(sw),
                      FaultCategory::kDataPlaneTableGeneration);
      }
    }
    return finish(rs, Verdict::inconclusive(), std::nullopt);
  }

  CallResult fr = call(sut, "GetFib");
  if (!fr.reached) return diagnose_disconnected(sut, rs);
  const json fib = jload(fr.payload);
  if (const json* entry = fib_lpm(fib, dst)) {
    note("GetFib", sut,
         "covering entry " + entry->value("prefix", std::string{}) +
             " present, yet the flow is dropped as unroutable");
    return finish(rs, Verdict::faulty_switch(sut),
                  FaultCategory::kPacketForwarding);
  }
  note("GetFib", sut, "no entry covers " + dst.str());

  // What prefix should cover the destination here, and who supplies it?
  const ExpectedSwitchState& ref = oracle_.at(sut);
  const Prefix* want = nullptr;
  for (const auto& [p, r] : ref.rib) {
    (void)r;
    if (!p.contains(dst)) continue;
    if (!want || p.len > want->len) want = &p;
  }
  if (!want) {
    note("oracle:rib", sut, "the reference has no route either");
    return finish(rs, Verdict::config_not_fault(), std::nullopt);
  }
  const Prefix target = *want;
  note("oracle:rib", sut, "reference expects " + target.str() + " here");

  CallResult rr = call(sut, "GetRib");
  if (!rr.reached) return diagnose_disconnected(sut, rs);
  if (routes_contain(jload(rr.payload), target)) {
    note("GetRib", sut,
         target.str() + " is in the routing table but not the FIB");
    return finish(rs, Verdict::faulty_switch(sut),
                  FaultCategory::kDataPlaneTableGeneration);
  }
  note("GetRib", sut, target.str() + " missing from the routing table");

  const std::string source = ref.rib.at(target).source_session;
  if (source.empty()) {
    note("oracle:rib", sut, "this switch should originate " + target.str());
    return finish(rs, Verdict::faulty_switch(sut),
                  FaultCategory::kRouteTableGeneration);
  }

  CallResult ri = call(sut, "GetRibIn", json{{"peer", source}}.dump());
  if (!ri.reached) return diagnose_disconnected(sut, rs);
  if (routes_contain(jload(ri.payload), target)) {
    note("GetRibIn", sut,
         target.str() + " was learned from " + source +
             " but never selected");
    return finish(rs, Verdict::faulty_switch(sut),
                  FaultCategory::kRouteTableGeneration);
  }
  note("GetRibIn", sut, target.str() + " never arrived from " + source);
  return diagnose_route_adv_missing(source, target, sut, rs);
}

// ---------------------------------------------------------------------
// Script: route-adv-missing
// ---------------------------------------------------------------------

Diagnosis Manager::diagnose_route_adv_missing(SwitchId advertiser,
                                              Prefix prefix,
                                              SwitchId downstream,
                                              RunState& rs) {
  ScriptScope scope(current_script_, "route-adv-missing");
  if (!rs.visited.insert({advertiser, "adv:" + prefix.str()}).second)
    return finish(rs, Verdict::inconclusive(), std::nullopt);
  rs.touched.insert(advertiser);

  // Session health first: a dead adjacency explains a missing route
  // without any table inspection.
  CallResult down_c = call(downstream, "GetCounters");
  if (down_c.reached && down_c.ok) {
    for (const auto& s : jload(down_c.payload).value("sessions",
                                                     json::array())) {
      if (s.value("peer", "") != advertiser) continue;
      if (s.value("state", "") != "established") {
        note("GetCounters", downstream,
             "session to " + advertiser + " is " + s.value("state", "?"));
        return diagnose_neighbor_down(downstream, advertiser, rs);
      }
    }
  }

  CallResult adv_c = call(advertiser, "GetCounters");
  if (!adv_c.reached) return diagnose_disconnected(advertiser, rs);
  if (adv_c.ok) {
    const json sessions = jload(adv_c.payload).value("sessions",
                                                     json::array());
    int established = 0;
    bool down_toward = false;
    for (const auto& s : sessions) {
      if (s.value("state", "") == "established") ++established;
      if (s.value("peer", "") == downstream &&
          s.value("state", "") != "established")
        down_toward = true;
    }
    // With a single adjacency, "everything is down" is indistinguishable
    // from a muted peer, so the shortcut needs at least two sessions.
    if (sessions.size() >= 2 && established == 0) {
      note("GetCounters", advertiser, "every session here is down");
      return finish(rs, Verdict::faulty_switch(advertiser),
                    FaultCategory::kExternalInteraction);
    }
    if (down_toward) {
      note("GetCounters", advertiser,
           "session to " + downstream + " is not established");
      return diagnose_neighbor_down(downstream, advertiser, rs);
    }
  }

  CallResult rr = call(advertiser, "GetRib");
  if (!rr.reached) return diagnose_disconnected(advertiser, rs);
  if (!routes_contain(jload(rr.payload), prefix)) {
    note("GetRib", advertiser,
         prefix.str() + " is missing here as well; walking upstream");
    const ExpectedSwitchState& ref = oracle_.at(advertiser);
    auto it = ref.rib.find(prefix);
    if (it == ref.rib.end() || it->second.source_session.empty()) {
      note("oracle:rib", advertiser,
           "this switch should originate " + prefix.str());
      return finish(rs, Verdict::faulty_switch(advertiser),
                    FaultCategory::kRouteTableGeneration);
    }
    return diagnose_route_adv_missing(it->second.source_session, prefix,
                                      advertiser, rs);
  }

  // The advertiser holds the route. Did it intend to export it?
  CallResult ro = call(advertiser, "GetRibOut",
                       json{{"peer", downstream}}.dump());
  std::vector<std::uint32_t> intent_path;
  if (ro.reached && ro.ok) {
    const json payload = jload(ro.payload);
    const json* r = find_route(payload, prefix);
    if (!r) {
      const auto& ref_out = oracle_.at(advertiser).rib_out;
      auto oit = ref_out.find(downstream);
      const bool should_export =
          oit != ref_out.end() && oit->second.count(prefix) > 0;
      note("GetRibOut", advertiser,
           prefix.str() + (should_export
                               ? " should be exported but is not queued"
                               : " is filtered by policy"));
      if (should_export)
        return finish(rs, Verdict::faulty_switch(advertiser),
                      FaultCategory::kRouteAdvertisementGeneration);
      return finish(rs, Verdict::config_not_fault(), std::nullopt);
    }
    intent_path = r->value("as_path", std::vector<std::uint32_t>{});
    note("GetRibOut", advertiser, prefix.str() + " is queued for export");
  }

  // Intent is fine; check the wire. Each capture solicits a session
  // refresh, so the snapshot crosses the taps inside the window.
  CallResult cap_a = call(advertiser, "CaptureControlPackets",
                          json{{"duration_us", cfg_.capture_us}}.dump(),
                          cfg_.capture_us + cfg_.rpc_timeout_us, 1);
  CallResult cap_d = call(downstream, "CaptureControlPackets",
                          json{{"duration_us", cfg_.capture_us}}.dump(),
                          cfg_.capture_us + cfg_.rpc_timeout_us, 1);

  auto scan = [&](const CallResult& cap, const std::string& dir,
                  const std::string& peer, bool* saw_any,
                  std::vector<std::uint32_t>* path_out) -> bool {
    if (!cap.reached || !cap.ok) return false;
    bool found = false;
    for (const auto& m : jload(cap.payload).value("messages",
                                                  json::array())) {
      if (m.value("dir", "") != dir || m.value("peer", "") != peer)
        continue;
      if (saw_any) *saw_any = true;
      const std::string kind = m.value("kind", "");
      if (kind == "announce" && m.value("prefix", "") == prefix.str()) {
        found = true;
        if (path_out)
          *path_out = m.value("as_path", std::vector<std::uint32_t>{});
      } else if (kind == "snapshot") {
        for (const auto& r : m.value("routes", json::array()))
          if (r.value("prefix", "") == prefix.str()) {
            found = true;
            if (path_out)
              *path_out = r.value("as_path", std::vector<std::uint32_t>{});
          }
      }
    }
    return found;
  };

  bool adv_emitted_any = false;
  bool down_heard_any = false;
  std::vector<std::uint32_t> wire_out_path, wire_in_path;
  const bool on_wire_out =
      scan(cap_a, "out", downstream, &adv_emitted_any, &wire_out_path);
  const bool heard_in =
      scan(cap_d, "in", advertiser, &down_heard_any, &wire_in_path);

  if (!on_wire_out || (!intent_path.empty() && !wire_out_path.empty() &&
                       wire_out_path != intent_path)) {
    note("CaptureControlPackets", advertiser,
         on_wire_out ? prefix.str() + " leaves with a rewritten path"
                     : prefix.str() + " never leaves this switch");
    if (!adv_emitted_any && !down_heard_any)
      return diagnose_neighbor_down(downstream, advertiser, rs);
    return finish(rs, Verdict::faulty_switch(advertiser),
                  FaultCategory::kRouteAdvertisementGeneration);
  }

  if (heard_in) {
    note("CaptureControlPackets", downstream,
         prefix.str() + " arrives intact on the wire but never reaches "
                        "the routing table");
    return finish(rs, Verdict::faulty_switch(downstream),
                  FaultCategory::kRouteAdvertisementReception);
  }

  if (!down_heard_any) {
    note("CaptureControlPackets", downstream,
         "nothing from " + advertiser + " is heard here");
    return diagnose_neighbor_down(downstream, advertiser, rs);
  }

  note("CaptureControlPackets", downstream,
       "updates flow but " + prefix.str() + " is absent on arrival");
  return finish(rs, Verdict::faulty_switch(downstream),
                FaultCategory::kRouteAdvertisementReception);
}

// ---------------------------------------------------------------------
// Script: neighbor-down
// ---------------------------------------------------------------------

Diagnosis Manager::diagnose_neighbor_down(SwitchId a, SwitchId b,
                                          RunState& rs) {
  ScriptScope scope(current_script_, "neighbor-down");
  if (!rs.visited.insert({a, "nbr:" + b}).second)
    return finish(rs, Verdict::inconclusive(), std::nullopt);
  rs.touched.insert(a);
  rs.touched.insert(b);

  CallResult bc = call(b, "GetCounters", "{}", cfg_.contact_timeout_us,
                       cfg_.contact_attempts);
  if (!bc.reached) {
    note("GetCounters", b, "unreachable over the management path");
    return diagnose_disconnected(b, rs);
  }
  if (bc.ok) {
    const json sessions = jload(bc.payload).value("sessions", json::array());
    int established = 0;
    for (const auto& s : sessions)
      if (s.value("state", "") == "established") ++established;
    // A lone dead session could equally be the peer's fault; only a wider
    // blackout pins the blame here without looking at the wire.
    if (sessions.size() >= 2 && established == 0) {
      note("GetCounters", b, "every session on this switch is down");
      return finish(rs, Verdict::faulty_switch(b),
                    FaultCategory::kExternalInteraction);
    }
  }

  CallResult cap_a = call(a, "CaptureControlPackets",
                          json{{"duration_us", cfg_.capture_us}}.dump(),
                          cfg_.capture_us + cfg_.rpc_timeout_us, 1);
  CallResult cap_b = call(b, "CaptureControlPackets",
                          json{{"duration_us", cfg_.capture_us}}.dump(),
                          cfg_.capture_us + cfg_.rpc_timeout_us, 1);

  auto traffic = [&](const CallResult& cap, const std::string& dir,
                     const std::string& peer) {
    if (!cap.reached || !cap.ok) return false;
    for (const auto& m : jload(cap.payload).value("messages",
                                                  json::array()))
      if (m.value("dir", "") == dir && m.value("peer", "") == peer)
        return true;
    return false;
  };

  const bool a_sends = traffic(cap_a, "out", b);
  const bool b_sends = traffic(cap_b, "out", a);
  const bool a_hears = traffic(cap_a, "in", b);
  const bool b_hears = traffic(cap_b, "in", a);

  // Whoever stays silent on the wire owns the fault; if both talk and
  // neither hears, the wire between them is eating the messages.
  if (!b_sends && (a_sends || a_hears || !b_hears)) {
    note("CaptureControlPackets", b,
         "emits nothing toward " + a + " while the peer keeps trying");
    return finish(rs, Verdict::faulty_switch(b),
                  FaultCategory::kExternalInteraction);
  }
  if (!a_sends && (b_sends || b_hears)) {
    note("CaptureControlPackets", a, "emits nothing toward " + b);
    return finish(rs, Verdict::faulty_switch(a),
                  FaultCategory::kExternalInteraction);
  }
  if (a_sends && b_sends && !a_hears && !b_hears) {
    CallResult m = call(a, "RunLinkMarkerTest", json{{"peer", b}}.dump(),
                        cfg_.rpc_timeout_us, 1);
    note("RunLinkMarkerTest", make_link_id(a, b),
         m.ok ? "wire loss confirmed between live endpoints"
              : "marker exchange failed");
    return finish(rs, Verdict::faulty_link(make_link_id(a, b)),
                  FaultCategory::kExternalInteraction);
  }

  // Messages flow both ways yet the session will not come up.
  note("CaptureControlPackets", make_link_id(a, b),
       "control traffic flows both ways; blaming the side that "
       "reports protocol errors");
  std::uint64_t a_err = 0, b_err = 0;
  CallResult ac = call(a, "GetCounters");
  if (ac.ok) a_err = jload(ac.payload).value("protocol_errors",
                                             std::uint64_t{0});
  CallResult bc2 = call(b, "GetCounters");
  if (bc2.ok) b_err = jload(bc2.payload).value("protocol_errors",
                                               std::uint64_t{0});
  return finish(rs,
                Verdict::faulty_switch(a_err > b_err ? a : b),
                FaultCategory::kExternalInteraction);
}

// ---------------------------------------------------------------------
// Script: disconnected-switch
// ---------------------------------------------------------------------

Diagnosis Manager::diagnose_disconnected(SwitchId ds, RunState& rs,
                                         int depth) {
  ScriptScope scope(current_script_, "disconnected-switch");
  rs.used_disconnected = true;
  if (depth > 3 || !rs.visited.insert({ds, "disc"}).second)
    return finish(rs, Verdict::inconclusive(), std::nullopt);
  rs.touched.insert(ds);

  const SwitchConfig* dsc = sim_.topology().switch_config(ds);
  if (!dsc) return finish(rs, Verdict::inconclusive(), std::nullopt);

  // Walk the expected management path to ds and find where reachability
  // actually ends.
  Packet mgmt_probe;
  mgmt_probe.src_ip = dh_ip_;
  mgmt_probe.dst_ip = dsc->loopback;
  mgmt_probe.protocol = Protocol::kMgmt;
  mgmt_probe.ttl = 64;
  seal_header(mgmt_probe);
  PathResult pr = oracle_.trace(mgmt_probe);
  const auto path = pr.switches();
  note("oracle:trace", ds,
       "management path " + join_path(path) + " outcome " +
           path_outcome_name(pr.outcome));

  SwitchId last_ok;
  SwitchId first_dead;
  for (const auto& hop : path) {
    if (hop == ds) break;
    if (contact(hop)) {
      last_ok = hop;
      continue;
    }
    first_dead = hop;
    break;
  }
  if (!first_dead.empty() && first_dead != ds) {
    note("GetCounters", first_dead,
         "an intermediate hop is unreachable; chasing it instead");
    return diagnose_disconnected(first_dead, rs, depth + 1);
  }
  if (last_ok.empty()) {
    // Not even the first hop answers; the diagnosis host is cut off.
    return finish(rs, Verdict::inconclusive(), std::nullopt);
  }
  const SwitchId n = last_ok;

  // The primary address died with the routing state, but the secondary
  // address is never advertised, so host routes stitched hop by hop can
  // reach it even now.
  const Prefix sip = Prefix::host_route(dsc->secondary_loopback);
  auto install = [&](const SwitchId& at, const Prefix& p,
                     const SwitchId& via) {
    CallResult r =
        call(at, "InstallStaticRoute",
             json{{"prefix", p.str()}, {"via", via}}.dump());
    if (r.ok) rs.srp_statics.push_back({at, p});
    return r.ok;
  };
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (path[i] == ds) break;
    const SwitchId& next = (i + 1 < path.size()) ? path[i + 1] : ds;
    install(path[i], sip, next);
    if (path[i] == n) break;
  }

  addr_override_[ds] = dsc->secondary_loopback;
  CallResult via_sip = call(ds, "GetCounters", "{}",
                            cfg_.contact_timeout_us, cfg_.contact_attempts);
  if (!via_sip.reached) {
    // The stitched path reaches the neighbor; ask it to talk to ds over
    // the raw adjacent wire.
    CallResult relayed = relay_call(n, ds, "GetCounters");
    if (relayed.reached && relayed.ok) {
      note("Relay", ds, "answers over the direct wire from " + n);
      // Restore a return path so direct secondary-address contact works.
      json params{{"prefix", Prefix::host_route(dh_secondary_).str()},
                  {"via", n}};
      relay_call(n, ds, "InstallStaticRoute", params.dump());
      rs.srp_statics.push_back({ds, Prefix::host_route(dh_secondary_)});
      via_sip = call(ds, "GetCounters", "{}", cfg_.contact_timeout_us,
                     cfg_.contact_attempts);
    } else {
      // Try every other live neighbor before blaming anything.
      int attempts = 1;
      for (const auto& lc : sim_.topology().links) {
        if (lc.a_node != ds && lc.b_node != ds) continue;
        const SwitchId peer = lc.peer_of(ds);
        if (peer == n) continue;
        if (!sim_.topology().switch_config(peer)) continue;
        if (!contact(peer)) continue;
        ++attempts;
        CallResult r = relay_call(peer, ds, "GetCounters");
        if (r.reached && r.ok) {
          note("Relay", ds, "only the path through " + n + " fails");
          addr_override_.erase(ds);
          return finish(rs, Verdict::faulty_link(make_link_id(n, ds)),
                        FaultCategory::kExternalInteraction);
        }
        if (attempts >= 3) break;
      }
      addr_override_.erase(ds);
      if (attempts >= 2) {
        note("Relay", ds,
             "silent toward " + std::to_string(attempts) +
                 " independent neighbors");
        return finish(rs, Verdict::faulty_switch(ds),
                      FaultCategory::kExternalInteraction);
      }
      note("Relay", ds,
           "one adjacency only; the switch, its neighbor, or the wire "
           "between them is at fault");
      return finish(rs, Verdict::fault_at(ds, n),
                    FaultCategory::kExternalInteraction);
    }
  }

  if (via_sip.reached && via_sip.ok) {
    const json sessions = jload(via_sip.payload).value("sessions",
                                                       json::array());
    int established = 0;
    for (const auto& s : sessions)
      if (s.value("state", "") == "established") ++established;
    addr_override_.erase(ds);
    if (!sessions.empty() && established == 0) {
      note("GetCounters", ds,
           "alive on the secondary address with every session down");
      return finish(rs, Verdict::faulty_switch(ds),
                    FaultCategory::kExternalInteraction);
    }
    note("GetCounters", ds,
         "alive on the secondary address; the primary route decayed "
         "while sessions persist");
    return finish(rs, Verdict::faulty_switch(ds),
                  FaultCategory::kRouteTableGeneration);
  }

  addr_override_.erase(ds);
  return finish(rs, Verdict::fault_at(ds, n),
                FaultCategory::kExternalInteraction);
}

// ---------------------------------------------------------------------
// Script: corruption (payload digests, TTL arithmetic, wire damage)
// ---------------------------------------------------------------------

Diagnosis Manager::diagnose_corruption(const FlowSpec& flow,
                                       const Packet& probe, RunState& rs) {
  ScriptScope scope(current_script_, "corruption");
  PathResult pr = oracle_.trace(probe);
  const auto path = pr.switches();
  if (path.empty())
    return finish(rs, Verdict::inconclusive(), std::nullopt);
  const SwitchId& edge = path.front();
  rs.touched.insert(edge);

  call(edge, "SetTraceFilter", json{{"flow", flow.str()}}.dump());

  // Mirrored digest reports are capped per episode at each hop, so probe
  // in small waves and reset the episodes in between.
  const int waves = 5;
  for (int wave = 0; wave < waves; ++wave) {
    checksum_reports_.clear();
    call(edge, "InjectFlow",
         json{{"flow", flow.str()},
              {"count", cfg_.corruption_probes},
              {"dscp", kDigestProbeDscp}}.dump());
    pump(400'000);
    drain_inbox();

    // packet id -> ordered (switch, stage, digest) observations.
    struct Obs {
      SimTime at;
      std::string sw;
      bool egress;
      std::uint64_t digest;
    };
    std::map<std::uint64_t, std::vector<Obs>> by_packet;
    for (const auto& text : checksum_reports_) {
      json j = jload(text);
      by_packet[j.value("packet_id", std::uint64_t{0})].push_back(
          Obs{j.value("at", SimTime{0}), j.value("switch", ""),
              j.value("stage", "") == "egress",
              j.value("digest", std::uint64_t{0})});
    }
    std::map<std::string, int> switch_blame;
    std::map<std::string, int> link_blame;
    for (auto& [id, obs] : by_packet) {
      (void)id;
      std::sort(obs.begin(), obs.end(),
                [](const Obs& x, const Obs& y) { return x.at < y.at; });
      for (std::size_t i = 0; i < obs.size(); ++i) {
        if (i + 1 < obs.size() && obs[i].sw == obs[i + 1].sw &&
            !obs[i].egress && obs[i + 1].egress) {
          if (obs[i].digest != obs[i + 1].digest)
            ++switch_blame[obs[i].sw];
        }
        if (i + 1 < obs.size() && obs[i].sw != obs[i + 1].sw &&
            obs[i].egress && !obs[i + 1].egress) {
          if (obs[i].digest != obs[i + 1].digest)
            ++link_blame[make_link_id(obs[i].sw, obs[i + 1].sw)];
        }
      }
    }
    note("oracle:digest-walk", join_path(path),
         "wave " + std::to_string(wave + 1) + ": " +
             std::to_string(by_packet.size()) + " probes mirrored");

    auto best = [](const std::map<std::string, int>& m) {
      std::pair<std::string, int> top{"", 0};
      for (const auto& [k, v] : m)
        if (v > top.second) top = {k, v};
      return top;
    };
    auto [sw, sw_hits] = best(switch_blame);
    auto [lk, lk_hits] = best(link_blame);
    if (sw_hits > 0 && sw_hits >= lk_hits) {
      note("oracle:digest-walk", sw,
           "payload digest changes inside this switch on " +
               std::to_string(sw_hits) + " probes");
      return finish(rs, Verdict::faulty_switch(sw),
                    FaultCategory::kPacketTransformation);
    }
    if (lk_hits > 0) {
      note("oracle:digest-walk", lk,
           "payload digest changes crossing this link on " +
               std::to_string(lk_hits) + " probes");
      return finish(rs, Verdict::faulty_link(lk),
                    FaultCategory::kPacketTransformation);
    }

    for (const auto& sw2 : path) call(sw2, "ResetSuppressFlag");
  }

  // Digests never changed in flight; fall back to the TTL arithmetic.
  return diagnose_ttl(path, flow, rs);
}

Diagnosis Manager::diagnose_ttl(const std::vector<SwitchId>& path,
                                const FlowSpec& flow, RunState& rs) {
  ScriptScope scope(current_script_, "ttl-decrement");
  if (path.empty())
    return finish(rs, Verdict::inconclusive(), std::nullopt);
  const SwitchId& edge = path.front();
  rs.touched.insert(edge);

  call(edge, "SetTraceFilter", json{{"flow", flow.str()}}.dump());
  call(edge, "InjectFlow",
       json{{"flow", flow.str()}, {"count", 30}}.dump());
  pump(300'000);

  PathResult pr = oracle_.trace(probe_packet(flow));
  for (const auto& step : pr.hops) {
    if (step.ingress_interface < 0 || step.egress_interface < 0) continue;
    CallResult in_logs = call(step.node, "GetHeaderLogs",
                              json{{"port", step.ingress_interface}}.dump());
    CallResult out_logs = call(step.node, "GetHeaderLogs",
                               json{{"port", step.egress_interface}}.dump());
    if (!in_logs.ok || !out_logs.ok) continue;
    std::map<std::uint64_t, int> in_ttl;
    for (const auto& e :
         jload(in_logs.payload).value("ingress_recent", json::array()))
      if (entry_matches_flow(e, flow))
        in_ttl[e.value("id", std::uint64_t{0})] = e.value("ttl", 0);
    for (const auto& e :
         jload(out_logs.payload).value("egress_recent", json::array())) {
      if (!entry_matches_flow(e, flow)) continue;
      auto it = in_ttl.find(e.value("id", std::uint64_t{0}));
      if (it == in_ttl.end()) continue;
      const int delta = it->second - e.value("ttl", 0);
      if (delta != 1) {
        note("GetHeaderLogs", step.node,
             "TTL drops by " + std::to_string(delta) +
                 " across this switch instead of 1");
        return finish(rs, Verdict::faulty_switch(step.node),
                      FaultCategory::kPacketTransformation);
      }
    }
    note("GetHeaderLogs", step.node, "TTL arithmetic is clean here");
  }
  return finish(rs, Verdict::no_fault(), std::nullopt);
}

Diagnosis Manager::diagnose_link_corruption(SwitchId receiver,
                                            const FlowSpec& flow,
                                            RunState& rs) {
  ScriptScope scope(current_script_, "link-corruption");
  rs.touched.insert(receiver);

  PathResult pr = oracle_.trace(probe_packet(flow));
  int ingress_if = -1;
  for (const auto& step : pr.hops)
    if (step.node == receiver) ingress_if = step.ingress_interface;
  if (ingress_if < 0) {
    // Fall back to scanning every port for matching rejected headers.
    const SwitchConfig* sc = sim_.topology().switch_config(receiver);
    if (!sc) return finish(rs, Verdict::inconclusive(), std::nullopt);
    for (const auto& ic : sc->interfaces) {
      CallResult logs = call(receiver, "GetHeaderLogs",
                             json{{"port", ic.index}}.dump());
      if (!logs.ok) continue;
      for (const auto& e :
           jload(logs.payload).value("ingress_dropped", json::array()))
        if (e.value("reason", "") == "bad_checksum" &&
            entry_matches_flow(e, flow))
          ingress_if = ic.index;
    }
  }
  if (ingress_if < 0)
    return finish(rs, Verdict::inconclusive(), std::nullopt);

  const LinkConfig* lc = sim_.topology().link_at(receiver, ingress_if);
  if (!lc) return finish(rs, Verdict::inconclusive(), std::nullopt);
  const SwitchId upstream = lc->peer_of(receiver);
  rs.touched.insert(upstream);

  // Fresh traced traffic so both ends hold matching log entries.
  if (!pr.hops.empty()) {
    const SwitchId& edge = pr.hops.front().node;
    call(edge, "SetTraceFilter", json{{"flow", flow.str()}}.dump());
    call(edge, "InjectFlow",
         json{{"flow", flow.str()}, {"count", 30}}.dump());
    pump(300'000);
  }

  CallResult rx_logs = call(receiver, "GetHeaderLogs",
                            json{{"port", ingress_if}}.dump());
  if (!rx_logs.ok) return finish(rs, Verdict::inconclusive(), std::nullopt);
  std::set<std::uint64_t> damaged_ids;
  int damaged = 0;
  for (const auto& e :
       jload(rx_logs.payload).value("ingress_dropped", json::array())) {
    if (e.value("reason", "") != "bad_checksum") continue;
    if (!entry_matches_flow(e, flow)) continue;
    if (!log_entry_checksum_ok(e)) {
      ++damaged;
      damaged_ids.insert(e.value("id", std::uint64_t{0}));
    }
  }
  note("GetHeaderLogs", receiver,
       std::to_string(damaged) + " arrivals fail a header recompute");
  if (damaged == 0)
    return finish(rs, Verdict::faulty_switch(receiver),
                  FaultCategory::kPacketForwarding);

  CallResult tx_logs = call(upstream, "GetHeaderLogs",
                            json{{"port", lc->if_of(upstream)}}.dump());
  if (tx_logs.ok) {
    int sent_clean = 0, sent_damaged = 0;
    for (const auto& e :
         jload(tx_logs.payload).value("egress_recent", json::array())) {
      if (!entry_matches_flow(e, flow)) continue;
      if (!damaged_ids.count(e.value("id", std::uint64_t{0}))) continue;
      if (log_entry_checksum_ok(e))
        ++sent_clean;
      else
        ++sent_damaged;
    }
    note("GetHeaderLogs", upstream,
         std::to_string(sent_clean) + " of those left upstream intact, " +
             std::to_string(sent_damaged) + " already damaged");
    if (sent_damaged > sent_clean)
      return finish(rs, Verdict::faulty_switch(upstream),
                    FaultCategory::kPacketTransformation);
  }
  return finish(rs, Verdict::faulty_link(make_link_id(upstream, receiver)),
                FaultCategory::kPacketTransformation);
}

// ---------------------------------------------------------------------
// Consensus loop
// ---------------------------------------------------------------------

void Manager::cleanup_run(const FailureReport& report, RunState& rs) {
  ScriptScope scope(current_script_, "cleanup");
  // Remove stitched host routes in reverse installation order.
  for (auto it = rs.srp_statics.rbegin(); it != rs.srp_statics.rend();
       ++it) {
    call(it->first, "InstallStaticRoute",
         json{{"prefix", it->second.str()}, {"remove", true}}.dump(),
         cfg_.contact_timeout_us, 1);
  }
  rs.srp_statics.clear();
  addr_override_.clear();

  const HostConfig* src = sim_.topology().host_config(report.src_host);
  const HostConfig* dst = sim_.topology().host_config(report.dst_host);
  if (src) rs.touched.insert(src->attached_switch);
  if (dst) rs.touched.insert(dst->attached_switch);
  for (const auto& sw : rs.touched) {
    call(sw, "ClearTraceFilter", "{}", cfg_.contact_timeout_us, 1);
    call(sw, "ResetSuppressFlag", "{}", cfg_.contact_timeout_us, 1);
  }
  drain_inbox();
  fault_reports_.clear();
  checksum_reports_.clear();
}

Diagnosis Manager::diagnose_once(const FailureReport& report) {
  RunState rs;
  active_ = &rs;
  Diagnosis d = run_once(report, rs);
  cleanup_run(report, rs);
  active_ = nullptr;
  return d;
}

Diagnosis Manager::diagnose(const FailureReport& report) {
  std::optional<Diagnosis> prev;
  Diagnosis last;
  for (int run = 1; run <= cfg_.max_runs; ++run) {
    Diagnosis d = diagnose_once(report);
    d.runs_to_consensus = run;
    if (prev && prev->verdict == d.verdict &&
        prev->category == d.category) {
      d.used_fault_report |= prev->used_fault_report;
      d.used_disconnected |= prev->used_disconnected;
      return d;
    }
    prev = std::move(d);
    last = *prev;
    pump(cfg_.inter_run_delay_us);
  }
  Diagnosis d = last;
  d.verdict = Verdict::inconclusive();
  d.category = std::nullopt;
  d.runs_to_consensus = cfg_.max_runs;
  return d;
}

}  // namespace netdx
