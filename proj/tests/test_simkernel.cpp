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

#include <memory>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "netdx/agent.hpp"
#include "netdx/simkernel.hpp"
#include "netdx/topology_io.hpp"

using namespace netdx;
using nlohmann::json;

namespace {

Topology reference_topology() {
  return load_topology_file(std::string(NETDX_SOURCE_DIR) +
                            "/topologies/reference.topo");
}

std::unique_ptr<Simulation> converged(std::uint64_t seed = 1,
                                      SimConfig cfg = {}) {
  auto sim = std::make_unique<Simulation>(reference_topology(), seed, cfg);
  EventStats st = sim->run_until_quiescent(30'000'000);
  REQUIRE(st.quiescent);
  return sim;
}

const HostConfig& host_cfg(const Simulation& sim, const HostId& id) {
  const HostConfig* hc = sim.topology().host_config(id);
  REQUIRE(hc != nullptr);
  return *hc;
}

/** Minimal management-RPC client living on a host. */
struct Rpc {
  Simulation& sim;
  HostId host;
  std::uint64_t next_rid = 5000;
  std::vector<json> stray;  // unsolicited messages seen while waiting

  Rpc(Simulation& s, HostId h) : sim(s), host(std::move(h)) {}

  json call_addr(Ipv4Addr dst, json req, SimTime timeout_us = 5'000'000) {
    if (!req.contains("requestId")) req["requestId"] = ++next_rid;
    const std::uint64_t rid = req["requestId"].get<std::uint64_t>();
    Packet p;
    p.src_ip = host_cfg(sim, host).ip;
    p.dst_ip = dst;
    p.protocol = Protocol::kMgmt;
    p.ttl = 64;
    p.control = std::make_shared<MgmtBlob>(mgmt_encode(req.dump()));
    sim.host_send(host, p);
    const SimTime deadline = sim.now() + timeout_us;
    while (sim.now() < deadline) {
      sim.run_for(10'000);
      for (auto& d : sim.take_host_inbox(host)) {
        auto mb = std::dynamic_pointer_cast<const MgmtBlob>(d.pkt.control);
        if (!mb) continue;
        auto txt = mgmt_decode(mb->json);
        if (!txt) continue;
        json r = json::parse(*txt, nullptr, false);
        if (r.is_discarded() || !r.is_object()) continue;
        if (!r.contains("op") && r.value("requestId", std::uint64_t{0}) == rid)
          return r;
        stray.push_back(std::move(r));
      }
    }
    return json();  // null: timed out
  }

  json call(const SwitchId& target, const std::string& op,
            json params = json::object(), SimTime timeout_us = 5'000'000) {
    params["op"] = op;
    const SwitchConfig* sc = sim.topology().switch_config(target);
    REQUIRE(sc != nullptr);
    return call_addr(sc->loopback, std::move(params), timeout_us);
  }
};

void send_echo(Simulation& sim, const HostId& from, const HostId& to,
               std::uint16_t seq, std::uint64_t digest = 0x5151515151515151ULL) {
  Packet p;
  p.src_ip = host_cfg(sim, from).ip;
  p.dst_ip = host_cfg(sim, to).ip;
  p.src_port = 8;  // echo request
  p.dst_port = seq;
  p.protocol = Protocol::kIcmp;
  p.payload_digest = digest + seq;
  sim.host_send(from, p);
}

/** Runs until an echo reply for `seq` lands at `from`; nullopt on timeout. */
std::optional<Packet> await_reply(Simulation& sim, const HostId& from,
                                  std::uint16_t seq,
                                  SimTime timeout_us = 2'000'000) {
  const SimTime deadline = sim.now() + timeout_us;
  while (sim.now() < deadline) {
    sim.run_for(5'000);
    for (auto& d : sim.take_host_inbox(from)) {
      if (d.pkt.protocol == Protocol::kIcmp && d.pkt.src_port == 0 &&
          d.pkt.dst_port == seq)
        return d.pkt;
    }
  }
  return std::nullopt;
}

FlowSpec udp_flow(Ipv4Addr src, Ipv4Addr dst, std::uint16_t dport) {
  FlowSpec f;
  f.src = Prefix::host_route(src);
  f.dst = Prefix::host_route(dst);
  f.dst_port = dport;
  f.protocol = Protocol::kUdp;
  return f;
}

}  // namespace

TEST_CASE("reference topology cold start converges and quiesces") {
  auto sim = std::make_unique<Simulation>(reference_topology(), 42);
  EventStats st = sim->run_until_quiescent(30'000'000);
  CHECK(st.quiescent);
  CHECK(st.converged_at < 5'000'000);  // tables settle within simulated 5s
  CHECK(st.events > 0);

  std::set<Prefix> host_subnets;
  for (const auto& hc : sim->topology().hosts)
    host_subnets.insert(Prefix::of(hc.ip, hc.prefix_len));
  REQUIRE(host_subnets.size() == 9);

  for (const auto& id : sim->switch_ids()) {
    ControlPlane& cp = sim->controlplane(id);
    CHECK(cp.protocol_error_count() == 0);
    CHECK(cp.unresolved_next_hop_count() == 0);
    for (const auto& sv : cp.sessions())
      CHECK(sv.state == SessionState::kEstablished);
    // Every switch can forward to every host subnet and every loopback.
    DataPlane& dp = sim->dataplane(id);
    for (const auto& p : host_subnets) {
      const FibEntry* fe = dp.fib_lookup(p.addr);
      REQUIRE_MESSAGE(fe != nullptr, id, " lacks route to ", p.str());
      CHECK(fe->prefix.len >= 24);
    }
    for (const auto& sc : sim->topology().switches) {
      const FibEntry* fe = dp.fib_lookup(sc.loopback);
      REQUIRE_MESSAGE(fe != nullptr, id, " lacks route to ", sc.id);
      CHECK(fe->prefix == Prefix::host_route(sc.loopback));
    }
  }
}

TEST_CASE("end-to-end echo between hosts") {
  auto sim = converged();
  send_echo(*sim, "h1", "h2", 77);
  auto rep = await_reply(*sim, "h1", 77);
  REQUIRE(rep.has_value());
  CHECK(rep->src_ip == host_cfg(*sim, "h2").ip);
  CHECK(rep->dst_ip == host_cfg(*sim, "h1").ip);
  CHECK(rep->payload_digest == 0x5151515151515151ULL + 77);
  // h1-s1-s2-h2 and back: two switch hops each way.
  CHECK(rep->ttl == 62);

  // A distant pair crosses several ASes and still completes.
  send_echo(*sim, "h1", "h7", 78);
  auto far = await_reply(*sim, "h1", 78);
  REQUIRE(far.has_value());
  CHECK(far->ttl > 50);
  CHECK(far->ttl < 64);
}

TEST_CASE("full pingmesh: every host pair exchanges echoes") {
  auto sim = converged();
  std::vector<HostId> hosts;
  for (const auto& hc : sim->topology().hosts) hosts.push_back(hc.id);
  REQUIRE(hosts.size() == 9);

  std::uint16_t seq = 1000;
  std::map<HostId, std::set<std::uint16_t>> expected;
  for (const auto& a : hosts)
    for (const auto& b : hosts) {
      if (a == b) continue;
      send_echo(*sim, a, b, ++seq);
      expected[a].insert(seq);
    }
  sim->run_for(2'000'000);
  for (const auto& a : hosts) {
    std::set<std::uint16_t> got;
    for (const auto& d : sim->take_host_inbox(a)) {
      if (d.pkt.protocol == Protocol::kIcmp && d.pkt.src_port == 0)
        got.insert(d.pkt.dst_port);
    }
    // Every request this host sent was answered.
    for (std::uint16_t s : expected[a]) CHECK_MESSAGE(got.count(s), a, " missing reply ", s);
    CHECK(got.size() == 8);
  }
}

TEST_CASE("fault-free traced flow conserves exactly across the path") {
  auto sim = converged();
  const Ipv4Addr h1 = host_cfg(*sim, "h1").ip;
  const Ipv4Addr h2 = host_cfg(*sim, "h2").ip;
  FlowSpec flow = udp_flow(h1, h2, 7777);
  for (const auto& id : sim->switch_ids())
    sim->agent(id).set_trace_filter(flow);

  const int kCount = 2000;
  sim->inject_packets("s1", flow, kCount);
  sim->run_for(static_cast<SimTime>(kCount) * 1'000 + 500'000);

  DataPlane& s1 = sim->dataplane("s1");
  DataPlane& s2 = sim->dataplane("s2");
  // h1 faces s1 port 2; s1-s2 ride ports 1/0; h2 hangs off s2 port 3.
  CHECK(s1.cumulative_ingress_traced(2) == kCount);
  CHECK(s1.cumulative_egress_traced(1) == kCount);
  CHECK(s2.cumulative_ingress_traced(0) == kCount);
  CHECK(s2.cumulative_egress_traced(3) == kCount);

  for (DataPlane* dp : {&s1, &s2}) {
    std::int64_t deficit = 0;
    std::uint64_t seen = 0;
    for (std::int64_t w = 0; w <= dp->last_closed_window(sim->now()); ++w) {
      auto r = dp->silent_drop_check(w, sim->now());
      REQUIRE(r.has_value());
      deficit += r->deficit;
      seen += r->ingress_traced;
      CHECK(r->deliberate_drops == 0);
    }
    CHECK(deficit == 0);
    CHECK(seen == static_cast<std::uint64_t>(kCount));
  }

  int delivered = 0;
  for (const auto& d : sim->take_host_inbox("h2"))
    if (d.pkt.protocol == Protocol::kUdp && d.pkt.dst_port == 7777) ++delivered;
  CHECK(delivered == kCount);
}

TEST_CASE("identical seeds give identical event logs and state") {
  auto script = [](Simulation& sim) {
    sim.run_until_quiescent(30'000'000);
    send_echo(sim, "h1", "h7", 9);
    sim.run_for(1'000'000);
    FlowSpec flow = udp_flow(host_cfg(sim, "h3").ip, host_cfg(sim, "h5").ip, 8888);
    for (const auto& id : sim.switch_ids()) sim.agent(id).set_trace_filter(flow);
    sim.inject_packets("s8", flow, 300);
    sim.run_until(sim.now() + 1'000'000);
  };
  Simulation a(reference_topology(), 7);
  Simulation b(reference_topology(), 7);
  script(a);
  script(b);
  CHECK(a.now() == b.now());
  CHECK(a.events_processed() == b.events_processed());
  CHECK(a.event_log_hash() == b.event_log_hash());
  CHECK(a.state_hash() == b.state_hash());
}

TEST_CASE("single-switch topology quiesces immediately") {
  const char* doc =
      "[switches]\n"
      "x0 1 10.255.0.1/32 10.254.0.1/32\n"
      "[hosts]\n"
      "hx 10.1.0.10/24 dh\n"
      "[links]\n"
      "x0:0 10.1.0.1/24 hx:0 10.1.0.10/24 50\n"
      "[bgp]\n"
      "[acl]\n"
      "[originate]\n"
      "x0 10.1.0.0/24\n"
      "[static]\n";
  Simulation sim(load_topology(doc), 3);
  EventStats st = sim.run_until_quiescent(10'000'000);
  CHECK(st.quiescent);
  CHECK(st.converged_at == 0);
  CHECK(sim.now() <= 2'000'000);
  const FibEntry* fe = sim.dataplane("x0").fib_lookup(Ipv4Addr::parse("10.1.0.10").value());
  REQUIRE(fe != nullptr);
  CHECK(fe->egress_interface == 0);
}

TEST_CASE("livelock guard trips on a tiny event budget") {
  SimConfig cfg;
  cfg.livelock_cap = 500;
  Simulation sim(reference_topology(), 11, cfg);
  CHECK_THROWS_AS(sim.run_until(10'000'000), SimError);
}

TEST_CASE("management rpc round-trip and error reporting") {
  auto sim = converged();
  Rpc rpc{*sim, "h9"};

  json r = rpc.call("s3", "GetCounters");
  REQUIRE(r.is_object());
  REQUIRE(r.value("ok", false));
  const json& pay = r["payload"];
  CHECK(pay["sessions"].size() == 5);  // s2, s16 eBGP + s4, s5, s6 iBGP
  for (const auto& s : pay["sessions"])
    CHECK(s["state"] == "established");
  CHECK(pay["protocol_errors"] == 0);

  // Replies agree with direct inspection.
  json fib = rpc.call("s3", "GetFib");
  REQUIRE(fib.value("ok", false));
  CHECK(fib["payload"]["entries"].size() == sim->dataplane("s3").fib().size());

  json rib = rpc.call("s3", "GetRib");
  REQUIRE(rib.value("ok", false));
  CHECK(rib["payload"]["routes"].size() == sim->controlplane("s3").rib().size());

  json acl = rpc.call("s5", "GetAcl");
  REQUIRE(acl.value("ok", false));
  REQUIRE(acl["payload"]["rules"].size() == 1);
  CHECK(acl["payload"]["rules"][0]["action"] == "deny");

  json bad = rpc.call("s3", "NoSuchOp");
  REQUIRE(bad.is_object());
  CHECK_FALSE(bad.value("ok", true));
  CHECK(bad["error"].get<std::string>().find("unknown op") != std::string::npos);
}

TEST_CASE("retried command is answered from the cache, not re-executed") {
  auto sim = converged();
  Rpc rpc{*sim, "h9"};
  const Ipv4Addr h1 = host_cfg(*sim, "h1").ip;
  const Ipv4Addr h2 = host_cfg(*sim, "h2").ip;
  FlowSpec flow = udp_flow(h1, h2, 7070);
  sim->agent("s1").set_trace_filter(flow);

  json params{{"flow", flow.str()}, {"count", 5}, {"requestId", 999001}};
  json first = rpc.call("s1", "InjectFlow", params);
  REQUIRE(first.value("ok", false));
  sim->run_for(300'000);
  CHECK(sim->dataplane("s1").cumulative_ingress_traced(2) == 5);

  json again = rpc.call("s1", "InjectFlow", params);
  REQUIRE(again.value("ok", false));
  CHECK(again["payload"]["injected"] == 5);
  sim->run_for(300'000);
  // The duplicate was served from the reply cache: still 5 packets.
  CHECK(sim->dataplane("s1").cumulative_ingress_traced(2) == 5);
}

TEST_CASE("link marker test reports zero deficit on a clean link") {
  auto sim = converged();
  Rpc rpc{*sim, "h9"};
  const Ipv4Addr h1 = host_cfg(*sim, "h1").ip;
  const Ipv4Addr h2 = host_cfg(*sim, "h2").ip;
  FlowSpec flow = udp_flow(h1, h2, 7777);
  for (const auto& id : sim->switch_ids()) sim->agent(id).set_trace_filter(flow);
  sim->inject_packets("s1", flow, 400);
  sim->run_for(900'000);

  json r = rpc.call("s1", "RunLinkMarkerTest", json{{"peer", "s2"}});
  REQUIRE(r.is_object());
  REQUIRE_MESSAGE(r.value("ok", false), r.dump());
  CHECK(r["payload"]["sent"] == 400);
  CHECK(r["payload"]["received"] == 400);
  CHECK(r["payload"]["deficit"] == 0);

  // A link this switch does not terminate is rejected.
  json bad = rpc.call("s1", "RunLinkMarkerTest", json{{"peer", "s9"}});
  CHECK_FALSE(bad.value("ok", true));
}

TEST_CASE("relay executes a command on an adjacent switch") {
  auto sim = converged();
  Rpc rpc{*sim, "h9"};
  json inner{{"op", "GetCounters"}, {"requestId", 424242}};
  json r = rpc.call("s1", "Relay", json{{"neighbor", "s2"}, {"inner", inner}});
  REQUIRE(r.is_object());
  REQUIRE_MESSAGE(r.value("ok", false), r.dump());
  const json& wrapped = r["payload"]["inner"];
  REQUIRE(wrapped.value("ok", false));
  CHECK(wrapped["requestId"] == 424242);
  CHECK(wrapped["payload"]["sessions"].size() > 0);

  json bad = rpc.call("s1", "Relay",
                      json{{"neighbor", "s9"},
                           {"inner", json{{"op", "GetCounters"},
                                          {"requestId", 424243}}}});
  CHECK_FALSE(bad.value("ok", true));
}

TEST_CASE("control-packet capture sees solicited advertisements") {
  auto sim = converged();
  Rpc rpc{*sim, "h9"};
  json r = rpc.call("s2", "CaptureControlPackets",
                    json{{"duration_us", 1'000'000}}, 3'000'000);
  REQUIRE(r.is_object());
  REQUIRE_MESSAGE(r.value("ok", false), r.dump());
  const json& msgs = r["payload"]["messages"];
  REQUIRE(msgs.size() > 0);
  bool out_refresh = false, out_snapshot = false, in_snapshot = false;
  std::set<std::string> peers;
  for (const auto& m : msgs) {
    peers.insert(m["peer"].get<std::string>());
    if (m["dir"] == "out" && m["kind"] == "refresh_request") out_refresh = true;
    if (m["dir"] == "out" && m["kind"] == "snapshot") out_snapshot = true;
    if (m["dir"] == "in" && m["kind"] == "snapshot") in_snapshot = true;
  }
  CHECK(out_refresh);
  CHECK(out_snapshot);
  CHECK(in_snapshot);   // peers answer the refresh request
  CHECK(peers.count("s3"));  // the eBGP neighbor is visible
  CHECK(peers.count("s1"));  // and the iBGP mesh
}

TEST_CASE("read commands leave the network state fingerprint unchanged") {
  auto sim = converged();
  Rpc rpc{*sim, "h9"};
  const std::uint64_t before = sim->state_hash();

  CHECK(rpc.call("s3", "GetCounters").value("ok", false));
  CHECK(rpc.call("s3", "GetDropCounters").value("ok", false));
  CHECK(rpc.call("s3", "GetFib").value("ok", false));
  CHECK(rpc.call("s3", "GetRib").value("ok", false));
  CHECK(rpc.call("s3", "GetRibIn", json{{"peer", "s2"}}).value("ok", false));
  CHECK(rpc.call("s3", "GetRibOut", json{{"peer", "s2"}}).value("ok", false));
  CHECK(rpc.call("s3", "GetAcl").value("ok", false));
  CHECK(rpc.call("s3", "GetHeaderLogs", json{{"port", 0}}).value("ok", false));
  CHECK(rpc.call("s3", "RunSwitchDropTest").value("ok", false));
  CHECK(rpc.call("s3", "RunLinkMarkerTest", json{{"peer", "s2"}})
            .value("ok", false));
  CHECK(rpc.call("s3", "CaptureControlPackets", json{{"duration_us", 400'000}},
                 2'000'000)
            .value("ok", false));
  json inner{{"op", "GetFib"}, {"requestId", 31337}};
  CHECK(rpc.call("s2", "Relay", json{{"neighbor", "s3"}, {"inner", inner}})
            .value("ok", false));
  sim->run_for(3'000'000);

  CHECK(sim->state_hash() == before);
}

TEST_CASE("frozen routing process: sessions expire but the agent answers") {
  auto sim = converged();
  Rpc rpc{*sim, "h9"};
  sim->set_daemon_down("s3", true);
  sim->run_for(3'000'000);

  // Peers lost the session and withdrew what s3 was providing.
  CHECK(sim->controlplane("s2").session_state("s3") !=
        SessionState::kEstablished);
  CHECK(sim->controlplane("s2").rib_in("s3").empty());

  // The agent is alive and reachable over a direct link via relay.
  json inner{{"op", "GetCounters"}, {"requestId", 515151}};
  json r = rpc.call("s2", "Relay", json{{"neighbor", "s3"}, {"inner", inner}});
  REQUIRE(r.is_object());
  REQUIRE_MESSAGE(r.value("ok", false), r.dump());
  CHECK(r["payload"]["inner"].value("ok", false));

  // Recovery: the process thaws and the network re-converges.
  sim->set_daemon_down("s3", false);
  sim->run_for(5'000'000);  // let the revived process flush its stale state
  EventStats st = sim->run_until_quiescent(sim->now() + 40'000'000);
  CHECK(st.quiescent);
  CHECK(sim->controlplane("s2").session_state("s3") ==
        SessionState::kEstablished);
  send_echo(*sim, "h2", "h8", 21);
  CHECK(await_reply(*sim, "h2", 21).has_value());
}

TEST_CASE("node and agent kill switches behave differently") {
  auto sim = converged();
  Rpc rpc{*sim, "h9"};

  // Dead agent: management times out, forwarding is untouched.
  sim->set_agent_down("s5", true);
  json r = rpc.call("s5", "GetCounters", json::object(), 1'000'000);
  CHECK(r.is_null());
  send_echo(*sim, "h1", "h8", 31);  // h8 hangs off s5
  CHECK(await_reply(*sim, "h1", 31).has_value());
  sim->set_agent_down("s5", false);

  // Dead node off the path: no effect on this pair.
  sim->set_node_down("s9", true);
  send_echo(*sim, "h1", "h3", 32);
  CHECK(await_reply(*sim, "h1", 32).has_value());

  // Dead node on the path: traffic blackholes.
  sim->set_node_down("s8", true);
  send_echo(*sim, "h1", "h3", 33);
  CHECK_FALSE(await_reply(*sim, "h1", 33, 1'000'000).has_value());
}
