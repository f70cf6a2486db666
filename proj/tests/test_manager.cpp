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
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "netdx/faults.hpp"
#include "netdx/oracle.hpp"
#include "netdx/simkernel.hpp"
#include "netdx/topology.hpp"

using namespace netdx;
using json = nlohmann::json;

namespace {

const char* kMiniDoc = R"(
[switches]
a1 1 10.255.0.1/32 10.254.0.1/32
a2 1 10.255.0.2/32 10.254.0.2/32
b1 2 10.255.0.3/32 10.254.0.3/32
[hosts]
h1 10.1.0.10/24
h2 10.2.0.10/24 dh
[links]
a1:0 10.0.1.1/30 a2:0 10.0.1.2/30 50
a2:1 10.0.2.1/30 b1:0 10.0.2.2/30 50
a1:1 10.1.0.1/24 h1:0 10.1.0.10/24 50
b1:1 10.2.0.1/24 h2:0 10.2.0.10/24 50
[bgp]
a2 b1 in=accept out=all
b1 a2 in=accept out=all
[acl]
[originate]
a1 10.255.0.1/32
a1 10.1.0.0/24
a2 10.255.0.2/32
b1 10.255.0.3/32
b1 10.2.0.0/24
[static]
)";

Topology mini_topology() {
  auto topo = load_topology(kMiniDoc);
  REQUIRE(topo.has_value());
  return *topo;
}

Topology reference_topology() {
  std::ifstream in(std::string(NETDX_SOURCE_DIR) +
                   "/topologies/reference.topo");
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  auto topo = load_topology(ss.str());
  REQUIRE(topo.has_value());
  return *topo;
}

/** A converged network with a fault injector and a manager on the
 * diagnosis host. */
struct DiagNet {
  Topology topo;
  Simulation sim;
  FaultInjector faults;
  Oracle oracle;
  Manager mgr;

  explicit DiagNet(Topology t, std::uint64_t seed = 21)
      : topo(std::move(t)),
        sim(topo, seed),
        faults(sim),
        oracle(topo),
        mgr(sim, oracle) {
    EventStats st = sim.run_until_quiescent(60'000'000);
    REQUIRE(st.quiescent);
  }
};

FailureReport complaint(const std::string& src, const std::string& dst,
                        Symptom s = Symptom::kUnreachable) {
  FailureReport r;
  r.src_host = src;
  r.dst_host = dst;
  r.symptom = s;
  return r;
}

bool has_subsequence(const std::vector<std::string>& seq,
                     const std::vector<std::string>& want) {
  std::size_t i = 0;
  for (const auto& s : seq)
    if (i < want.size() && s == want[i]) ++i;
  return i == want.size();
}

}  // namespace

TEST_CASE("verdicts compare and print by their identity") {
  const Verdict vs = Verdict::faulty_switch("s3");
  const Verdict vl = Verdict::faulty_link(make_link_id("s4", "s3"));
  const Verdict va = Verdict::fault_at("s7", "s4");

  CHECK(vs.str() == "FaultySwitch(s3)");
  CHECK(vl.str() == "FaultyLink(s3~s4)");
  CHECK(va.link_id == make_link_id("s4", "s7"));
  CHECK(vs == Verdict::faulty_switch("s3"));
  CHECK(vs != Verdict::faulty_switch("s4"));
  CHECK(Verdict::no_fault().str() == "NoFaultFound");
  CHECK(Verdict::config_not_fault().str() == "ConfigNotFault");
  CHECK(Verdict::inconclusive().str() == "Inconclusive");
}

TEST_CASE("diagnosis reports collapse scripts and serialize") {
  Diagnosis d;
  d.verdict = Verdict::faulty_switch("s10");
  d.category = FaultCategory::kExternalInteraction;
  d.evidence = {
      {"locate-drop", "SetTraceFilter", "s0", "ok"},
      {"locate-drop", "InjectFlow", "s0", "ok"},
      {"no-forwarding", "GetFib", "s0", "no entry"},
      {"route-adv-missing", "GetRib", "s15", "missing"},
      {"route-adv-missing", "GetRib", "s17", "missing"},
      {"neighbor-down", "GetCounters", "s10", "no reply"},
      {"disconnected-switch", "Relay", "s10", "silent"},
  };
  CHECK(d.primitive_count() == 7);
  CHECK(d.script_sequence() ==
        std::vector<std::string>{"locate-drop", "no-forwarding",
                                 "route-adv-missing", "neighbor-down",
                                 "disconnected-switch"});
  const json j = json::parse(d.to_json());
  CHECK(j["verdict"] == "FaultySwitch(s10)");
  CHECK(j["category"] == "external-interaction");
  CHECK(j["evidence"].size() == 7);
  CHECK(d.format().find("disconnected-switch") != std::string::npos);
}

TEST_CASE("silent in-switch loss is pinned by conservation") {
  DiagNet net(mini_topology());
  FaultSpec spec;
  spec.type = FaultType::kSilentDropInSwitch;
  spec.where = FaultLocation::at_switch("a2");
  spec.probability = 0.3;
  spec.seed = 5;
  net.faults.inject(spec);
  net.sim.run_for(200'000);

  Diagnosis d = net.mgr.diagnose(complaint("h1", "h2"));
  CHECK(d.verdict == Verdict::faulty_switch("a2"));
  CHECK(d.category == FaultCategory::kPacketForwarding);
  CHECK(d.runs_to_consensus == 2);
  CHECK(!d.used_fault_report);
  CHECK(net.mgr.fault_reports_seen() == 0);
}

TEST_CASE("silent on-link loss is pinned by the marker exchange") {
  DiagNet net(mini_topology());
  FaultSpec spec;
  spec.type = FaultType::kSilentDropOnLink;
  spec.where = FaultLocation::on_link(make_link_id("a2", "b1"));
  spec.probability = 0.3;
  spec.seed = 6;
  net.faults.inject(spec);
  net.sim.run_for(200'000);

  Diagnosis d = net.mgr.diagnose(complaint("h1", "h2"));
  CHECK(d.verdict == Verdict::faulty_link(make_link_id("a2", "b1")));
  CHECK(d.category == FaultCategory::kPacketForwarding);
  CHECK(!d.used_fault_report);
}

TEST_CASE("deliberate flow drops surface through a proactive report") {
  DiagNet net(mini_topology());
  FaultSpec spec;
  spec.type = FaultType::kIncorrectForwardingDrop;
  spec.where = FaultLocation::at_switch("a2");
  spec.flow = FlowSpec::parse("dst=10.2.0.0/24,proto=udp");
  net.faults.inject(spec);
  net.sim.run_for(200'000);

  Diagnosis d = net.mgr.diagnose(complaint("h1", "h2"));
  CHECK(d.verdict == Verdict::faulty_switch("a2"));
  CHECK(d.category == FaultCategory::kPacketForwarding);
  CHECK(d.used_fault_report);
  CHECK(net.mgr.fault_reports_seen() > 0);
}

TEST_CASE("a hidden table entry reads as data-plane table generation") {
  DiagNet net(mini_topology());
  FaultSpec spec;
  spec.type = FaultType::kFibDiscrepancy;
  spec.where = FaultLocation::at_switch("a2");
  spec.prefix = Prefix::parse("10.2.0.0/24");
  net.faults.inject(spec);
  net.sim.run_for(1'000'000);

  Diagnosis d = net.mgr.diagnose(complaint("h1", "h2"));
  CHECK(d.verdict == Verdict::faulty_switch("a2"));
  CHECK(d.category == FaultCategory::kDataPlaneTableGeneration);
  CHECK(d.used_fault_report);
}

TEST_CASE("a wrong TTL decrement is pinned by per-hop header logs") {
  DiagNet net(mini_topology());
  FaultSpec spec;
  spec.type = FaultType::kIncorrectDecrementTtl;
  spec.where = FaultLocation::at_switch("a2");
  net.faults.inject(spec);
  net.sim.run_for(200'000);

  Diagnosis d = net.mgr.diagnose(complaint("h1", "h2"));
  CHECK(d.verdict == Verdict::faulty_switch("a2"));
  CHECK(d.category == FaultCategory::kPacketTransformation);
  CHECK(d.used_fault_report);
  const auto seq = d.script_sequence();
  CHECK(std::find(seq.begin(), seq.end(), "ttl-decrement") != seq.end());
}

TEST_CASE("wire-damaged headers blame the link, not its endpoints") {
  DiagNet net(mini_topology());
  FaultSpec spec;
  spec.type = FaultType::kCorruptionOnLinkIp;
  spec.where = FaultLocation::on_link(make_link_id("a2", "b1"));
  spec.probability = 1.0;
  spec.seed = 7;
  net.faults.inject(spec);
  net.sim.run_for(200'000);

  Diagnosis d = net.mgr.diagnose(complaint("h1", "h2"));
  CHECK(d.verdict == Verdict::faulty_link(make_link_id("a2", "b1")));
  CHECK(d.category == FaultCategory::kPacketTransformation);
  CHECK(d.used_fault_report);
}

TEST_CASE("payload corruption is pinned by the per-hop digest walk") {
  DiagNet net(mini_topology());
  FaultSpec spec;
  spec.type = FaultType::kPacketPayloadCorruptionInSwitch;
  spec.where = FaultLocation::at_switch("a2");
  spec.probability = 0.9;
  spec.seed = 8;
  net.faults.inject(spec);
  net.sim.run_for(200'000);

  Diagnosis d = net.mgr.diagnose(complaint("h1", "h2", Symptom::kCorruption));
  CHECK(d.verdict == Verdict::faulty_switch("a2"));
  CHECK(d.category == FaultCategory::kPacketTransformation);
  CHECK(net.mgr.fault_reports_seen() == 0);
}

TEST_CASE("tampered inbound updates blame the receiving switch") {
  DiagNet net(mini_topology());
  FaultSpec spec;
  spec.type = FaultType::kIngressBgpUpdateModification;
  spec.where = FaultLocation::on_session("a2", "b1");
  spec.prefix = Prefix::parse("10.2.0.0/24");
  net.faults.inject(spec);
  net.sim.run_for(4'000'000);

  Diagnosis d = net.mgr.diagnose(complaint("h1", "h2"));
  CHECK(d.verdict == Verdict::faulty_switch("a2"));
  CHECK(d.category == FaultCategory::kRouteAdvertisementReception);
  CHECK(d.used_fault_report);
}

TEST_CASE("tampered outbound updates blame the advertising switch") {
  DiagNet net(mini_topology());
  FaultSpec spec;
  spec.type = FaultType::kEgressBgpUpdateModification;
  spec.where = FaultLocation::on_session("b1", "a2");
  spec.prefix = Prefix::parse("10.2.0.0/24");
  net.faults.inject(spec);
  net.sim.run_for(4'000'000);

  Diagnosis d = net.mgr.diagnose(complaint("h1", "h2"));
  CHECK(d.verdict == Verdict::faulty_switch("b1"));
  CHECK(d.category == FaultCategory::kRouteAdvertisementGeneration);
}

TEST_CASE("a muted session blames the silent side of the wire") {
  DiagNet net(mini_topology());
  FaultSpec spec;
  spec.type = FaultType::kBgpNeighborMissing;
  spec.where = FaultLocation::on_session("a2", "b1");
  net.faults.inject(spec);
  net.sim.run_for(4'000'000);

  Diagnosis d = net.mgr.diagnose(complaint("h1", "h2"));
  CHECK(d.verdict == Verdict::faulty_switch("a2"));
  CHECK(d.category == FaultCategory::kExternalInteraction);
  const auto seq = d.script_sequence();
  CHECK(std::find(seq.begin(), seq.end(), "neighbor-down") != seq.end());
}

TEST_CASE("a healthy network yields no-fault-found") {
  DiagNet net(mini_topology());
  Diagnosis d = net.mgr.diagnose(complaint("h1", "h2"));
  CHECK(d.verdict == Verdict::no_fault());
  CHECK(!d.category.has_value());
  CHECK(d.runs_to_consensus == 2);
}

TEST_CASE("single-pass diagnosis skips the consensus loop") {
  DiagNet net(mini_topology());
  FaultSpec spec;
  spec.type = FaultType::kIncorrectForwardingDrop;
  spec.where = FaultLocation::at_switch("a2");
  spec.flow = FlowSpec::parse("dst=10.2.0.0/24,proto=udp");
  net.faults.inject(spec);
  net.sim.run_for(200'000);

  Diagnosis d = net.mgr.diagnose_once(complaint("h1", "h2"));
  CHECK(d.verdict == Verdict::faulty_switch("a2"));
  CHECK(d.runs_to_consensus == 1);
  CHECK(d.primitive_count() > 0);
}

TEST_CASE("a configured deny is reported as not-a-fault") {
  DiagNet net(reference_topology());
  FailureReport r = complaint("h1", "h8");
  r.flow = FlowSpec::parse("proto=udp,dport=9999");
  Diagnosis d = net.mgr.diagnose(r);
  CHECK(d.verdict == Verdict::config_not_fault());
  CHECK(d.runs_to_consensus == 2);
}

TEST_CASE("a fully dead switch walks the whole script chain") {
  DiagNet net(reference_topology());
  net.sim.set_daemon_down("s10", true);
  net.sim.set_agent_down("s10", true);
  net.sim.run_for(8'000'000);  // holds expire, withdrawals propagate

  Diagnosis d = net.mgr.diagnose(complaint("h9", "h3"));
  CHECK(d.verdict == Verdict::faulty_switch("s10"));
  CHECK(d.category == FaultCategory::kExternalInteraction);
  CHECK(d.used_disconnected);
  CHECK(has_subsequence(
      d.script_sequence(),
      {"no-forwarding", "route-adv-missing", "neighbor-down",
       "disconnected-switch"}));
  // The walk must really have gone through the stitched secondary path.
  bool saw_relay = false;
  for (const auto& e : d.evidence)
    if (e.primitive == "Relay" || e.primitive == "InstallStaticRoute")
      saw_relay = true;
  CHECK(saw_relay);
}
