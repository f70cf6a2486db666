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

#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "netdx/topology_io.hpp"

using namespace netdx;

namespace {

// Small two-AS fixture in canonical form (used by several suites).
const char* kMiniTopo =
    "[switches]\n"
    "a1 1 10.255.0.1/32 10.254.0.1/32\n"
    "a2 1 10.255.0.2/32 10.254.0.2/32\n"
    "b1 2 10.255.0.3/32 10.254.0.3/32\n"
    "[hosts]\n"
    "hx 10.1.0.10/24 dh\n"
    "hy 10.2.0.10/24\n"
    "[links]\n"
    "a1:0 10.0.0.1/30 a2:0 10.0.0.2/30 50\n"
    "a2:1 10.0.0.5/30 b1:0 10.0.0.6/30 50\n"
    "a1:1 10.1.0.1/24 hx:0 10.1.0.10/24 50\n"
    "b1:1 10.2.0.1/24 hy:0 10.2.0.10/24 50\n"
    "[bgp]\n"
    "a2 b1 in=accept out=all\n"
    "b1 a2 in=accept out=all\n"
    "[acl]\n"
    "[originate]\n"
    "a1 10.1.0.0/24\n"
    "b1 10.2.0.0/24\n"
    "[static]\n";

}  // namespace

TEST_CASE("mini fixture parses into the expected structure") {
  Topology t = load_topology(kMiniTopo);

  REQUIRE(t.switches.size() == 3);
  REQUIRE(t.hosts.size() == 2);
  REQUIRE(t.links.size() == 4);

  const auto* a1 = t.switch_config("a1");
  REQUIRE(a1 != nullptr);
  CHECK(a1->asn == 1);
  CHECK(a1->loopback.str() == "10.255.0.1");
  CHECK(a1->secondary_loopback.str() == "10.254.0.1");
  REQUIRE(a1->interfaces.size() == 2);
  CHECK(a1->interface(0)->addr.str() == "10.0.0.1");
  CHECK(a1->interface(0)->prefix_len == 30);
  CHECK(a1->interface(1)->addr.str() == "10.1.0.1");
  CHECK(a1->interface(1)->prefix_len == 24);
  REQUIRE(a1->originated_prefixes.size() == 1);
  CHECK(a1->originated_prefixes[0].str() == "10.1.0.0/24");

  const auto* hx = t.host_config("hx");
  REQUIRE(hx != nullptr);
  CHECK(hx->attached_switch == "a1");
  CHECK(hx->ip.str() == "10.1.0.10");
  CHECK(hx->secondary_ip.str() == "10.1.0.11");
  CHECK(hx->diagnosis_host);
  CHECK(t.diagnosis_host == "hx");
  CHECK_FALSE(t.host_config("hy")->diagnosis_host);

  const auto* l = t.link(make_link_id("a2", "b1"));
  REQUIRE(l != nullptr);
  CHECK(l->latency_us == 50);
  CHECK(l->if_of("a2") == 1);
  CHECK(l->if_of("b1") == 0);
  CHECK(l->peer_of("a2") == "b1");

  CHECK(t.switch_links().size() == 2);
  CHECK(t.link_at("a1", 1) != nullptr);
  CHECK(t.link_at("a1", 7) == nullptr);
}

TEST_CASE("intra-AS sessions are synthesized as a full mesh") {
  Topology t = load_topology(kMiniTopo);

  const auto* a1 = t.switch_config("a1");
  const auto* a2 = t.switch_config("a2");
  const auto* b1 = t.switch_config("b1");

  const auto* s = a1->session("a2");
  REQUIRE(s != nullptr);
  CHECK(s->ibgp);
  REQUIRE(a2->session("a1") != nullptr);
  CHECK(a2->session("a1")->ibgp);

  const auto* e = a2->session("b1");
  REQUIRE(e != nullptr);
  CHECK_FALSE(e->ibgp);
  CHECK(e->policy_out.scope == FilterPolicy::Scope::kAll);

  CHECK(a1->session("b1") == nullptr);   // no eBGP declared, different AS
  CHECK(b1->session("a1") == nullptr);
  CHECK(a1->sessions.size() == 1);       // iBGP only
  CHECK(a2->sessions.size() == 2);       // eBGP + iBGP
  CHECK(b1->sessions.size() == 1);       // eBGP only (sole AS-2 switch)
}

TEST_CASE("canonical documents round-trip byte-exactly") {
  Topology t = load_topology(kMiniTopo);
  std::string emitted = serialize_topology(t);
  CHECK(emitted == kMiniTopo);

  // Serialization is idempotent across another load.
  Topology t2 = load_topology(emitted);
  CHECK(serialize_topology(t2) == emitted);
}

TEST_CASE("comments and blank lines are ignored") {
  std::string noisy = std::string("# document header\n\n") + kMiniTopo +
                      "# trailing note\n\n";
  Topology t = load_topology(noisy);
  CHECK(serialize_topology(t) == kMiniTopo);
}

TEST_CASE("policy grammar parses and re-emits canonically") {
  std::string text = kMiniTopo;
  auto pos = text.find("a2 b1 in=accept out=all");
  REQUIRE(pos != std::string::npos);
  text.replace(pos, std::string("a2 b1 in=accept out=all").size(),
               "a2 b1 in=reject:192.168.0.0/16,lp200:via2,accept "
               "out=own,reject:10.2.0.0/24+via2");

  Topology t = load_topology(text);
  const auto* sess = t.switch_config("a2")->session("b1");
  REQUIRE(sess != nullptr);

  const auto& in = sess->policy_in;
  REQUIRE(in.clauses.size() == 3);
  CHECK(in.clauses[0].action == PolicyClause::Action::kReject);
  CHECK(in.clauses[0].prefix_pattern->str() == "192.168.0.0/16");
  CHECK_FALSE(in.clauses[0].as_pattern.has_value());
  CHECK(in.clauses[1].action == PolicyClause::Action::kSetLocalPref);
  CHECK(in.clauses[1].local_pref == 200);
  CHECK(in.clauses[1].as_pattern == AsNumber{2});
  CHECK_FALSE(in.clauses[1].prefix_pattern.has_value());
  CHECK(in.clauses[2].action == PolicyClause::Action::kAccept);

  const auto& out = sess->policy_out;
  CHECK(out.scope == FilterPolicy::Scope::kOwnAsOnly);
  REQUIRE(out.clauses.size() == 1);
  CHECK(out.clauses[0].prefix_pattern->str() == "10.2.0.0/24");
  CHECK(out.clauses[0].as_pattern == AsNumber{2});

  CHECK(serialize_topology(t) == text);  // already canonical
}

TEST_CASE("malformed documents are rejected with line numbers") {
  auto rejects = [](const std::string& text, const std::string& needle) {
    try {
      load_topology(text);
      FAIL_CHECK("expected rejection for: " << needle);
    } catch (const TopologyError& e) {
      CHECK(std::string(e.what()).find(needle) != std::string::npos);
    }
  };

  rejects("x 1 10.0.0.1/32 10.0.1.1/32\n", "content before first section");
  rejects("[bogus]\n", "unknown section");
  rejects("[hosts]\n[switches]\n", "out of order");
  rejects("[switches]\na1 1 10.255.0.1/32\n", "expected: id asn");
  rejects("[switches]\na1 1 10.255.0.1/24 10.254.0.1/32\n", "must be /32");
  rejects("[switches]\na1 0 10.255.0.1/32 10.254.0.1/32\n", "nonzero");
  rejects(
      "[switches]\na1 1 10.255.0.1/32 10.254.0.1/32\n"
      "a1 1 10.255.0.9/32 10.254.0.9/32\n",
      "duplicate switch");
  rejects("[hosts]\nhx 10.1.0.10/24 dh\nhy 10.2.0.10/24 dh\n",
          "second diagnosis host");

  std::string base = kMiniTopo;

  // Host-side link address must repeat the host declaration.
  std::string wrong_host_addr = base;
  auto p = wrong_host_addr.find("hx:0 10.1.0.10/24");
  wrong_host_addr.replace(p, std::string("hx:0 10.1.0.10/24").size(),
                          "hx:0 10.1.0.99/24");
  rejects(wrong_host_addr, "differs from host declaration");

  // One-sided eBGP session.
  std::string one_sided = base;
  p = one_sided.find("b1 a2 in=accept out=all\n");
  one_sided.erase(p, std::string("b1 a2 in=accept out=all\n").size());
  rejects(one_sided, "no reverse session");

  // eBGP between non-adjacent switches.
  std::string non_adjacent = base;
  p = non_adjacent.find("[bgp]\n");
  non_adjacent.replace(p, std::string("[bgp]\n").size(),
                       "[bgp]\na1 b1 in=accept out=all\n"
                       "b1 a1 in=accept out=all\n");
  rejects(non_adjacent, "non-adjacent");

  // Link referencing an unknown node.
  std::string ghost = base;
  p = ghost.find("a2:1 10.0.0.5/30 b1:0");
  ghost.replace(p, std::string("a2:1 10.0.0.5/30 b1:0").size(),
                "a2:1 10.0.0.5/30 zz:0");
  rejects(ghost, "missing node");

  // Reusing an interface on two links.
  std::string reuse = base;
  p = reuse.find("a1:1 10.1.0.1/24 hx:0");
  reuse.replace(p, std::string("a1:1").size(), "a1:0");
  rejects(reuse, "");  // duplicate port or address, either message is fine

  // Removing a link disconnects the graph (hy becomes unreachable).
  std::string split = base;
  p = split.find("b1:1 10.2.0.1/24 hy:0 10.2.0.10/24 50\n");
  split.erase(p, std::string("b1:1 10.2.0.1/24 hy:0 10.2.0.10/24 50\n").size());
  rejects(split, "");  // unlinked interface / no link / not connected

  // Duplicate address: hy's primary collides with hx's secondary.
  std::string dup_addr = base;
  p = dup_addr.find("hy 10.2.0.10/24");
  dup_addr.replace(p, std::string("hy 10.2.0.10/24").size(),
                   "hy 10.1.0.11/24");
  p = dup_addr.find("hy:0 10.2.0.10/24");
  dup_addr.replace(p, std::string("hy:0 10.2.0.10/24").size(),
                   "hy:0 10.1.0.11/24");
  rejects(dup_addr, "duplicate address");

  rejects(
      "[switches]\na1 1 10.255.0.1/32 10.254.0.1/32\n"
      "[hosts]\nhx 10.1.0.10/24 dh\n[links]\n",
      "attached to missing switch");

  // A lone switch with no interfaces is structurally fine.
  CHECK_NOTHROW(
      load_topology("[switches]\na1 1 10.255.0.1/32 10.254.0.1/32\n"));
}

TEST_CASE("bundled reference topology loads and round-trips") {
  std::string path = std::string(NETDX_SOURCE_DIR) + "/topologies/reference.topo";
  Topology t = load_topology_file(path);

  CHECK(t.switches.size() == 20);
  CHECK(t.hosts.size() == 9);
  CHECK(t.links.size() == 36);
  CHECK(t.diagnosis_host == "h9");
  CHECK(t.host_config("h9")->attached_switch == "s0");

  // Five ASes, ring-connected, with seven inter-AS adjacencies.
  int ebgp = 0, ibgp = 0;
  for (const auto& s : t.switches)
    for (const auto& sess : s.sessions) (sess.ibgp ? ibgp : ebgp) += 1;
  CHECK(ebgp == 14);  // 7 adjacencies, both directions
  // Full meshes: AS-1 has 3 switches, AS-2/3/4 have 4, AS-5 has 5.
  CHECK(ibgp == 3 * 2 + 4 * 3 + 4 * 3 + 4 * 3 + 5 * 4);

  // Scoped exports guard the AS-5 shortcut paths.
  CHECK(t.switch_config("s0")->session("s15")->policy_out.scope ==
        FilterPolicy::Scope::kOwnAsOnly);
  CHECK(t.switch_config("s3")->session("s16")->policy_out.scope ==
        FilterPolicy::Scope::kOwnAsOnly);
  CHECK(t.switch_config("s15")->session("s0")->policy_out.scope ==
        FilterPolicy::Scope::kAll);

  // One deny rule guards h8's subnet against a specific UDP port.
  const auto* s5 = t.switch_config("s5");
  REQUIRE(s5->acl_rules.size() == 1);
  CHECK(s5->acl_rules[0].action == AclRule::Action::kDeny);
  CHECK(s5->acl_rules[0].match.dst_port == 9999);

  // Canonical on disk: serialize must reproduce the file byte-exactly.
  std::ifstream f(path, std::ios::binary);
  std::ostringstream buf;
  buf << f.rdbuf();
  CHECK(serialize_topology(t) == buf.str());
}
