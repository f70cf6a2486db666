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

#include "netdx/controlplane.hpp"

#include <algorithm>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "doctest.h"
#include "netdx/topology_io.hpp"
#include "oracle_helpers.hpp"

namespace {

using namespace netdx;

// Two-AS fixture: a1--a2 (intra-AS, meshed automatically) and a2--b1
// across the AS boundary. hx hangs off a1, hy off b1.
const char* kMiniTopo = R"(
[switches]
a1 1 10.255.0.1/32 10.254.0.1/32
a2 1 10.255.0.2/32 10.254.0.2/32
b1 2 10.255.0.3/32 10.254.0.3/32
[hosts]
hx 10.1.0.10/24 dh
hy 10.2.0.10/24
[links]
a1:0 10.0.1.1/30 a2:0 10.0.1.2/30 50
a2:1 10.0.2.1/30 b1:0 10.0.2.2/30 50
a1:1 10.1.0.1/24 hx:0 10.1.0.10/24 50
b1:1 10.2.0.1/24 hy:0 10.2.0.10/24 50
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

// Three switches in one AS strung in a line, with an external neighbor
// off c1. c3 learns external routes from c1 over a session that does
// not follow a physical adjacency.
const char* kLineTopo = R"(
[switches]
c1 1 10.255.0.1/32 10.254.0.1/32
c2 1 10.255.0.2/32 10.254.0.2/32
c3 1 10.255.0.3/32 10.254.0.3/32
d1 2 10.255.0.4/32 10.254.0.4/32
[hosts]
hd 10.9.0.10/24 dh
[links]
c1:0 10.0.1.1/30 c2:0 10.0.1.2/30 50
c2:1 10.0.2.1/30 c3:0 10.0.2.2/30 50
c1:1 10.0.3.1/30 d1:0 10.0.3.2/30 50
d1:1 10.9.0.1/24 hd:0 10.9.0.10/24 50
[bgp]
c1 d1 in=accept out=all
d1 c1 in=accept out=all
[acl]
[originate]
d1 10.9.0.0/24
[static]
)";

// Three ASes in a line with policies on the middle and right switches.
const char* kPolicyTopo = R"(
[switches]
e1 1 10.255.0.1/32 10.254.0.1/32
e2 2 10.255.0.2/32 10.254.0.2/32
e3 3 10.255.0.3/32 10.254.0.3/32
[hosts]
he 10.1.0.10/24 dh
[links]
e1:0 10.0.1.1/30 e2:0 10.0.1.2/30 50
e2:1 10.0.2.1/30 e3:0 10.0.2.2/30 50
e1:1 10.1.0.1/24 he:0 10.1.0.10/24 50
[bgp]
e1 e2 in=accept out=all
e2 e1 in=reject:10.5.0.0/16,accept out=all
e2 e3 in=accept out=own
e3 e2 in=lp200:via2,accept out=all
[acl]
[originate]
e1 10.1.0.0/24
e1 10.5.1.0/24
e2 10.255.0.2/32
e3 10.255.0.3/32
[static]
)";

// Triangle of three ASes; f3 prefers the long way around so that the
// resulting advertisement back to f1 carries f1's own AS.
const char* kTriangleTopo = R"(
[switches]
f1 1 10.255.0.1/32 10.254.0.1/32
f2 2 10.255.0.2/32 10.254.0.2/32
f3 3 10.255.0.3/32 10.254.0.3/32
[hosts]
hf 10.1.0.10/24 dh
[links]
f1:0 10.0.1.1/30 f2:0 10.0.1.2/30 50
f2:1 10.0.2.1/30 f3:0 10.0.2.2/30 50
f3:1 10.0.3.1/30 f1:1 10.0.3.2/30 50
f1:2 10.1.0.1/24 hf:0 10.1.0.10/24 50
[bgp]
f1 f2 in=accept out=all
f2 f1 in=accept out=all
f2 f3 in=accept out=all
f3 f2 in=lp200:via2,accept out=all
f3 f1 in=accept out=all
f1 f3 in=accept out=all
[acl]
[originate]
f1 10.1.0.0/24
[static]
)";

/**
 * Deterministic message pump: delivers each emitted message to its peer
 * after a fixed latency and ticks every node on a 100 ms cadence, with
 * all iteration in sorted order. Directional blocking models a switch
 * whose transmissions are lost.
 */
class Pump {
 public:
  explicit Pump(const Topology& topo, TimerConfig timers = {})
      : topo_(topo), timers_(timers) {
    for (const auto& sw : topo.switches)
      nodes_.emplace(sw.id, std::make_unique<ControlPlane>(topo, sw.id, timers));
    for (auto& [id, n] : nodes_) {
      (void)id;
      n->start(0);
    }
  }

  ControlPlane& node(const std::string& id) { return *nodes_.at(id); }

  void block(const std::string& from, const std::string& to) {
    blocked_.insert({from, to});
  }
  void unblock(const std::string& from, const std::string& to) {
    blocked_.erase({from, to});
  }

  void replace_node(const std::string& id) {
    nodes_[id] = std::make_unique<ControlPlane>(topo_, id, timers_);
    nodes_[id]->start(now_);
    // Drop traffic still in flight toward the old incarnation.
    for (auto it = queue_.begin(); it != queue_.end();)
      it = it->to == id ? queue_.erase(it) : std::next(it);
  }

  void inject(const std::string& from, const std::string& to, BgpMessage m) {
    m.sender = from;
    queue_.insert({now_ + kLatency, seq_++, to, std::move(m)});
  }

  void run_until(SimTime end) {
    while (next_tick_ <= end) {
      drain(next_tick_);
      for (auto& [id, n] : nodes_) emit(id, n->tick(next_tick_));
      next_tick_ += kTickEvery;
    }
    drain(end);
    now_ = end;
  }

  const std::vector<std::string>& transcript() const { return transcript_; }
  SimTime now() const { return now_; }

 private:
  static constexpr SimTime kLatency = 100;
  static constexpr SimTime kTickEvery = 100'000;

  struct InFlight {
    SimTime at;
    std::uint64_t seq;
    std::string to;
    BgpMessage m;
    bool operator<(const InFlight& o) const {
      return at != o.at ? at < o.at : seq < o.seq;
    }
  };

  void emit(const std::string& from, std::vector<BgpOutgoing> out) {
    for (auto& o : out) {
      std::ostringstream line;
      line << now_ << " " << from << ">" << o.peer << " "
           << bgp_message_kind_name(o.msg.kind);
      if (o.msg.kind == BgpMessage::Kind::kAnnounce ||
          o.msg.kind == BgpMessage::Kind::kWithdraw)
        line << " " << o.msg.prefix.str();
      transcript_.push_back(line.str());
      if (blocked_.count({from, o.peer})) continue;
      queue_.insert({now_ + kLatency, seq_++, o.peer, std::move(o.msg)});
    }
  }

  void drain(SimTime until) {
    while (!queue_.empty() && queue_.begin()->at <= until) {
      InFlight f = *queue_.begin();
      queue_.erase(queue_.begin());
      now_ = f.at;
      auto out = nodes_.at(f.to)->handle_message(f.m, f.at);
      emit(f.to, std::move(out));
    }
    now_ = until;
  }

  const Topology& topo_;
  TimerConfig timers_;
  std::map<std::string, std::unique_ptr<ControlPlane>> nodes_;
  std::multiset<InFlight> queue_;
  std::set<std::pair<std::string, std::string>> blocked_;
  std::vector<std::string> transcript_;
  std::uint64_t seq_ = 0;
  SimTime now_ = 0;
  SimTime next_tick_ = 0;
};

std::string rib_str(const ControlPlane& cp) {
  std::ostringstream os;
  for (const auto& [p, e] : cp.rib()) {
    os << p.str() << " via=" << (e.source_session == "local" ? std::string("-")
                                                             : e.next_hop_switch)
       << " path=[";
    for (std::size_t i = 0; i < e.as_path.size(); ++i)
      os << (i ? "," : "") << e.as_path[i];
    os << "] lp=" << e.local_pref << " src=" << e.source_session << "\n";
  }
  return os.str();
}

std::string fib_str(const ControlPlane& cp) {
  std::ostringstream os;
  for (const auto& e : cp.compute_fib())
    os << e.prefix.str() << " -> " << e.egress_interface << "\n";
  return os.str();
}

RibEntry cand(std::uint32_t lp, std::vector<AsNumber> path, std::string src) {
  RibEntry e;
  e.prefix = *Prefix::parse("10.0.0.0/8");
  e.local_pref = lp;
  e.as_path = std::move(path);
  e.source_session = std::move(src);
  if (e.source_session != "local") e.next_hop_switch = e.source_session;
  return e;
}

bool established(const ControlPlane& cp, const std::string& peer) {
  return cp.session_state(peer) == SessionState::kEstablished;
}

}  // namespace

TEST_CASE("best path selection follows preference, length, then source") {
  // Higher preference wins regardless of path length.
  auto b1 = best_path_select(
      {cand(100, {2}, "p1"), cand(200, {3, 4, 5}, "p2")});
  REQUIRE(b1.has_value());
  CHECK(b1->source_session == "p2");

  // Same preference: shorter path wins.
  auto b2 = best_path_select({cand(100, {2, 3}, "p1"), cand(100, {4}, "p2")});
  CHECK(b2->source_session == "p2");

  // Full tie: lowest session id wins.
  auto b3 = best_path_select({cand(100, {7}, "p9"), cand(100, {8}, "p2")});
  CHECK(b3->source_session == "p2");

  // Locally originated routes beat any session on an otherwise full tie,
  // even session ids that sort before the word itself.
  auto b4 = best_path_select({cand(100, {}, "a1"), cand(100, {}, "local")});
  CHECK(b4->source_session == "local");

  CHECK(!best_path_select({}).has_value());

  // Randomized agreement with an exhaustive reference comparator.
  netdx::testing::TestRng rng(0xbe57);
  auto rank = [](const std::string& s) {
    return s == "local" ? std::string() : s;
  };
  auto better = [&](const RibEntry& x, const RibEntry& y) {
    if (x.local_pref != y.local_pref) return x.local_pref > y.local_pref;
    if (x.as_path.size() != y.as_path.size())
      return x.as_path.size() < y.as_path.size();
    return rank(x.source_session) < rank(y.source_session);
  };
  const std::vector<std::string> pool = {"local", "p1", "p2", "p3", "p4",
                                         "p5",    "p6", "p7", "p8", "p9"};
  const std::vector<std::uint32_t> prefs = {50, 100, 100, 200};
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<std::string> ids = pool;
    for (std::size_t i = ids.size(); i > 1; --i)
      std::swap(ids[i - 1], ids[rng.below(static_cast<std::uint32_t>(i))]);
    std::size_t n = 1 + rng.below(8);
    std::vector<RibEntry> cands;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<AsNumber> path;
      std::size_t plen = rng.below(5);
      for (std::size_t j = 0; j < plen; ++j) path.push_back(2 + rng.below(30));
      cands.push_back(cand(prefs[rng.below(4)], path, ids[i]));
    }
    const RibEntry* want = &cands[0];
    for (const auto& c : cands)
      if (better(c, *want)) want = &c;
    auto got = best_path_select(cands);
    REQUIRE(got.has_value());
    CHECK(got->source_session == want->source_session);
    CHECK(got->local_pref == want->local_pref);
    CHECK(got->as_path == want->as_path);
  }
}

TEST_CASE("peers establish sessions and exchange full tables") {
  Topology topo = load_topology(kMiniTopo);
  Pump pump(topo);
  pump.run_until(1'000'000);

  auto& a1 = pump.node("a1");
  auto& a2 = pump.node("a2");
  auto& b1 = pump.node("b1");
  CHECK(established(a1, "a2"));
  CHECK(established(a2, "a1"));
  CHECK(established(a2, "b1"));
  CHECK(established(b1, "a2"));

  // Everyone ends with a route for every originated prefix.
  const std::vector<std::string> prefixes = {
      "10.255.0.1/32", "10.1.0.0/24", "10.255.0.2/32", "10.255.0.3/32",
      "10.2.0.0/24"};
  for (const auto* cp : {&a1, &a2, &b1})
    for (const auto& p : prefixes)
      CHECK(cp->rib().count(*Prefix::parse(p)) == 1);

  // Intra-AS announcements carry no AS prepend; external ones do.
  const auto& a2_hx = a2.rib().at(*Prefix::parse("10.1.0.0/24"));
  CHECK(a2_hx.next_hop_switch == "a1");
  CHECK(a2_hx.as_path.empty());
  const auto& a2_hy = a2.rib().at(*Prefix::parse("10.2.0.0/24"));
  CHECK(a2_hy.next_hop_switch == "b1");
  CHECK(a2_hy.as_path == std::vector<AsNumber>{2});
  const auto& b1_hx = b1.rib().at(*Prefix::parse("10.1.0.0/24"));
  CHECK(b1_hx.as_path == std::vector<AsNumber>{1});
  const auto& a1_hy = a1.rib().at(*Prefix::parse("10.2.0.0/24"));
  CHECK(a1_hy.next_hop_switch == "a2");
  CHECK(a1_hy.as_path == std::vector<AsNumber>{2});

  // Session bookkeeping: what a2 says it sent b1 matches b1's view.
  auto sent = a2.rib_out("b1");
  auto got = b1.rib_in("a2");
  REQUIRE(sent.size() == got.size());
  for (const auto& r : sent) {
    auto it = got.find(r.prefix);
    REQUIRE(it != got.end());
    CHECK(it->second.as_path == r.as_path);
  }

  // No protocol errors or unresolved next hops in a clean run.
  for (const auto* cp : {&a1, &a2, &b1}) {
    CHECK(cp->protocol_error_count() == 0);
    CHECK(cp->unresolved_next_hop_count() == 0);
  }
}

TEST_CASE("forwarding tables derive from converged routing state") {
  Topology topo = load_topology(kMiniTopo);
  Pump pump(topo);
  pump.run_until(1'000'000);

  auto fib_of = [&](const std::string& id) {
    std::map<std::string, int> m;
    for (const auto& e : pump.node(id).compute_fib())
      m[e.prefix.str()] = e.egress_interface;
    return m;
  };

  auto a2 = fib_of("a2");
  // Own addresses head to the CPU port.
  CHECK(a2.at("10.255.0.2/32") == FibEntry::kCpuPort);
  CHECK(a2.at("10.254.0.2/32") == FibEntry::kCpuPort);
  CHECK(a2.at("10.0.1.2/32") == FibEntry::kCpuPort);
  CHECK(a2.at("10.0.2.1/32") == FibEntry::kCpuPort);
  // Connected subnets out their interfaces.
  CHECK(a2.at("10.0.1.0/30") == 0);
  CHECK(a2.at("10.0.2.0/30") == 1);
  // Learned routes resolve to the interface facing the next hop.
  CHECK(a2.at("10.1.0.0/24") == 0);
  CHECK(a2.at("10.255.0.1/32") == 0);
  CHECK(a2.at("10.2.0.0/24") == 1);
  CHECK(a2.at("10.255.0.3/32") == 1);

  auto a1 = fib_of("a1");
  CHECK(a1.at("10.2.0.0/24") == 0);    // toward a2
  CHECK(a1.at("10.255.0.3/32") == 0);  // toward a2
  CHECK(a1.at("10.1.0.0/24") == 1);    // connected beats the learned copy
  CHECK(a1.at("10.255.0.1/32") == FibEntry::kCpuPort);

  auto b1 = fib_of("b1");
  CHECK(b1.at("10.1.0.0/24") == 0);
  CHECK(b1.at("10.255.0.1/32") == 0);
  CHECK(b1.at("10.255.0.2/32") == 0);
  CHECK(b1.at("10.2.0.0/24") == 1);

  // One entry per prefix, sorted ascending.
  auto entries = pump.node("a2").compute_fib();
  for (std::size_t i = 1; i < entries.size(); ++i)
    CHECK(entries[i - 1].prefix < entries[i].prefix);
}

TEST_CASE("recursive next hops resolve through static loopback routes") {
  Topology topo = load_topology(kLineTopo);
  Pump pump(topo);
  pump.run_until(1'500'000);

  auto& c3 = pump.node("c3");
  // c3 learned the external prefix from c1, which is two hops away.
  const auto& e = c3.rib().at(*Prefix::parse("10.9.0.0/24"));
  CHECK(e.next_hop_switch == "c1");

  // Without a path to c1's loopback the route cannot be installed.
  auto before = c3.compute_fib();
  bool found = false;
  for (const auto& f : before)
    if (f.prefix == *Prefix::parse("10.9.0.0/24")) found = true;
  CHECK(!found);
  CHECK(c3.unresolved_next_hop_count() > 0);

  // A static route for the loopback (interface 0 faces c2) fixes it.
  c3.add_runtime_static({*Prefix::parse("10.255.0.1/32"), 0});
  auto after = c3.compute_fib();
  std::optional<int> egress;
  for (const auto& f : after)
    if (f.prefix == *Prefix::parse("10.9.0.0/24")) egress = f.egress_interface;
  REQUIRE(egress.has_value());
  CHECK(*egress == 0);

  // Removing it reverts the resolution.
  CHECK(c3.remove_runtime_static(*Prefix::parse("10.255.0.1/32")));
  CHECK(!c3.remove_runtime_static(*Prefix::parse("10.255.0.1/32")));
  auto reverted = c3.compute_fib();
  for (const auto& f : reverted)
    CHECK(f.prefix != *Prefix::parse("10.9.0.0/24"));

  // c1 reaches the same prefix through its direct adjacency.
  std::map<std::string, int> c1;
  for (const auto& f : pump.node("c1").compute_fib())
    c1[f.prefix.str()] = f.egress_interface;
  CHECK(c1.at("10.9.0.0/24") == 1);
}

TEST_CASE("import and export policies filter and tag routes") {
  Topology topo = load_topology(kPolicyTopo);
  Pump pump(topo);
  pump.run_until(1'500'000);

  auto& e1 = pump.node("e1");
  auto& e2 = pump.node("e2");
  auto& e3 = pump.node("e3");

  // First matching clause wins: the covering reject beats the later
  // accept, while unrelated prefixes fall through to it.
  CHECK(e2.rib().count(*Prefix::parse("10.5.1.0/24")) == 0);
  CHECK(e2.rib_in("e1").count(*Prefix::parse("10.5.1.0/24")) == 0);
  CHECK(e2.rib().count(*Prefix::parse("10.1.0.0/24")) == 1);

  // Own-AS export scope: e3 sees e2's loopback but nothing e2 learned.
  CHECK(e3.rib().count(*Prefix::parse("10.255.0.2/32")) == 1);
  CHECK(e3.rib().count(*Prefix::parse("10.1.0.0/24")) == 0);
  CHECK(e3.rib().count(*Prefix::parse("10.5.1.0/24")) == 0);

  // Preference tagging by on-path AS.
  const auto& tagged = e3.rib().at(*Prefix::parse("10.255.0.2/32"));
  CHECK(tagged.local_pref == 200);
  CHECK(tagged.as_path == std::vector<AsNumber>{2});

  // Transit across e2 prepends each hop.
  const auto& via = e1.rib().at(*Prefix::parse("10.255.0.3/32"));
  CHECK(via.as_path == std::vector<AsNumber>{2, 3});
}

TEST_CASE("paths that revisit an autonomous system are rejected") {
  Topology topo = load_topology(kTriangleTopo);
  Pump pump(topo);
  pump.run_until(2'000'000);

  auto& f1 = pump.node("f1");
  auto& f3 = pump.node("f3");
  Prefix p = *Prefix::parse("10.1.0.0/24");

  // f3 prefers the long path around the triangle...
  const auto& at_f3 = f3.rib().at(p);
  CHECK(at_f3.next_hop_switch == "f2");
  CHECK(at_f3.as_path == (std::vector<AsNumber>{2, 1}));
  CHECK(at_f3.local_pref == 200);

  // ...so its advertisement to f1 would loop; f1 must discard it and
  // keep its own route.
  CHECK(f1.rib_in("f3").count(p) == 0);
  const auto& at_f1 = f1.rib().at(p);
  CHECK(at_f1.source_session == "local");
  CHECK(f1.protocol_error_count() == 0);
}

TEST_CASE("session loss purges learned routes and propagates withdrawals") {
  Topology topo = load_topology(kMiniTopo);
  Pump pump(topo);
  pump.run_until(1'000'000);

  std::string a1_before = rib_str(pump.node("a1"));
  std::string a2_before = rib_str(pump.node("a2"));
  Prefix hy = *Prefix::parse("10.2.0.0/24");
  Prefix b1_lb = *Prefix::parse("10.255.0.3/32");

  // Sever the inter-AS pair in both directions; holds expire.
  pump.block("a2", "b1");
  pump.block("b1", "a2");
  pump.run_until(3'000'000);

  auto& a1 = pump.node("a1");
  auto& a2 = pump.node("a2");
  CHECK(!established(a2, "b1"));
  CHECK(a2.rib().count(hy) == 0);
  CHECK(a2.rib().count(b1_lb) == 0);
  CHECK(a2.rib_in("b1").empty());
  // The withdrawal reached a1 over the still-healthy intra-AS session.
  CHECK(a1.rib().count(hy) == 0);
  CHECK(a1.rib().count(b1_lb) == 0);
  CHECK(established(a1, "a2"));

  bool flapped = false;
  for (const auto& v : a2.sessions())
    if (v.peer == "b1" && v.flap_count >= 1) flapped = true;
  CHECK(flapped);

  // Healing the link re-establishes and restores the exact tables.
  pump.unblock("a2", "b1");
  pump.unblock("b1", "a2");
  pump.run_until(7'000'000);
  CHECK(established(pump.node("a2"), "b1"));
  CHECK(rib_str(pump.node("a1")) == a1_before);
  CHECK(rib_str(pump.node("a2")) == a2_before);
}

TEST_CASE("a restarted peer is resynchronized with a snapshot") {
  Topology topo = load_topology(kMiniTopo);
  Pump pump(topo);
  pump.run_until(1'000'000);
  std::string b1_before = rib_str(pump.node("b1"));
  std::string a2_before = rib_str(pump.node("a2"));

  // b1 restarts with empty state and re-opens promptly, well inside
  // a2's hold time.
  pump.replace_node("b1");
  pump.run_until(2'500'000);

  auto& a2 = pump.node("a2");
  auto& b1 = pump.node("b1");
  CHECK(established(a2, "b1"));
  CHECK(established(b1, "a2"));
  CHECK(rib_str(b1) == b1_before);
  CHECK(rib_str(a2) == a2_before);

  // a2 never saw the session lapse, only the restart.
  for (const auto& v : a2.sessions())
    if (v.peer == "b1") CHECK(v.flap_count == 0);
}

TEST_CASE("updates on a session that is not established are errors") {
  Topology topo = load_topology(kMiniTopo);
  ControlPlane a2(topo, "a2");
  a2.start(0);

  BgpMessage ann;
  ann.kind = BgpMessage::Kind::kAnnounce;
  ann.sender = "b1";
  ann.prefix = *Prefix::parse("10.2.0.0/24");
  ann.as_path = {2};
  CHECK(a2.handle_message(ann, 1000).empty());
  CHECK(a2.protocol_error_count() == 1);
  CHECK(a2.rib_in("b1").empty());

  BgpMessage wd;
  wd.kind = BgpMessage::Kind::kWithdraw;
  wd.sender = "b1";
  wd.prefix = ann.prefix;
  a2.handle_message(wd, 2000);
  CHECK(a2.protocol_error_count() == 2);

  BgpMessage snap;
  snap.kind = BgpMessage::Kind::kSnapshot;
  snap.sender = "b1";
  snap.routes = {{ann.prefix, {2}, 100}};
  a2.handle_message(snap, 3000);
  CHECK(a2.protocol_error_count() == 3);

  BgpMessage refresh;
  refresh.kind = BgpMessage::Kind::kRefreshRequest;
  refresh.sender = "b1";
  CHECK(a2.handle_message(refresh, 4000).empty());
  CHECK(a2.protocol_error_count() == 4);

  // A sender with no configured session is also an error.
  BgpMessage stray;
  stray.kind = BgpMessage::Kind::kKeepalive;
  stray.sender = "zz";
  a2.handle_message(stray, 5000);
  CHECK(a2.protocol_error_count() == 5);

  // Nothing leaked into the table.
  for (const auto& [p, e] : a2.rib()) {
    (void)p;
    CHECK(e.source_session == "local");
  }
}

TEST_CASE("a snapshot replaces the whole session table") {
  Topology topo = load_topology(kMiniTopo);
  Pump pump(topo);
  pump.run_until(1'000'000);

  auto& a2 = pump.node("a2");
  REQUIRE(a2.rib_in("b1").size() == 2);

  // A fresh snapshot from b1 now lists only one of its two prefixes.
  BgpMessage snap;
  snap.kind = BgpMessage::Kind::kSnapshot;
  snap.routes = {{*Prefix::parse("10.2.0.0/24"), {2}, 100}};
  pump.inject("b1", "a2", std::move(snap));
  pump.run_until(1'200'000);

  CHECK(a2.rib_in("b1").size() == 1);
  CHECK(a2.rib().count(*Prefix::parse("10.255.0.3/32")) == 0);
  CHECK(a2.rib().count(*Prefix::parse("10.2.0.0/24")) == 1);
  // The implied withdrawal propagated to a1.
  CHECK(pump.node("a1").rib().count(*Prefix::parse("10.255.0.3/32")) == 0);
}

TEST_CASE("refresh requests are answered with a snapshot") {
  Topology topo = load_topology(kMiniTopo);
  Pump pump(topo);
  pump.run_until(1'000'000);

  auto& a2 = pump.node("a2");
  BgpMessage refresh;
  refresh.kind = BgpMessage::Kind::kRefreshRequest;
  refresh.sender = "b1";
  auto out = a2.handle_message(refresh, pump.now() + 100);
  REQUIRE(out.size() == 1);
  CHECK(out[0].peer == "b1");
  CHECK(out[0].msg.kind == BgpMessage::Kind::kSnapshot);

  auto advertised = a2.rib_out("b1");
  REQUIRE(out[0].msg.routes.size() == advertised.size());
  for (std::size_t i = 0; i < advertised.size(); ++i) {
    CHECK(out[0].msg.routes[i].prefix == advertised[i].prefix);
    CHECK(out[0].msg.routes[i].as_path == advertised[i].as_path);
  }
  // The snapshot covers a1's two prefixes and a2's own loopback;
  // routes learned from b1 itself are withheld.
  CHECK(out[0].msg.routes.size() == 3);
}

TEST_CASE("one side going silent leaves an asymmetric view") {
  Topology topo = load_topology(kMiniTopo);
  Pump pump(topo);
  pump.run_until(1'000'000);
  REQUIRE(established(pump.node("a2"), "b1"));
  REQUIRE(established(pump.node("b1"), "a2"));

  // b1 keeps receiving but its own transmissions vanish.
  pump.block("b1", "a2");
  pump.run_until(6'000'000);

  auto& a2 = pump.node("a2");
  auto& b1 = pump.node("b1");
  // a2's side is dead and stays dead (it keeps retrying opens).
  CHECK(!established(a2, "b1"));
  CHECK(a2.rib().count(*Prefix::parse("10.2.0.0/24")) == 0);
  // b1 still hears opens from a2, so its side flaps or lingers rather
  // than settling into an established exchange with routes.
  CHECK(b1.rib().count(*Prefix::parse("10.1.0.0/24")) == 0);
  bool b1_flapped = false;
  for (const auto& v : b1.sessions())
    if (v.peer == "a2" && v.flap_count >= 1) b1_flapped = true;
  CHECK(b1_flapped);
}

TEST_CASE("keepalives hold an idle session open indefinitely") {
  Topology topo = load_topology(kMiniTopo);
  Pump pump(topo);
  pump.run_until(1'000'000);

  auto changes = pump.node("a2").rib_change_count();
  SimTime settled = pump.node("a2").last_table_change();
  pump.run_until(11'000'000);

  auto& a2 = pump.node("a2");
  CHECK(established(a2, "b1"));
  CHECK(established(a2, "a1"));
  CHECK(a2.rib_change_count() == changes);
  CHECK(a2.last_table_change() == settled);
  CHECK(a2.last_table_change() < 1'000'000);
  for (const auto& v : a2.sessions()) CHECK(v.flap_count == 0);
}

TEST_CASE("a resync exchange is observable but changes nothing") {
  Topology topo = load_topology(kMiniTopo);
  Pump pump(topo);
  pump.run_until(1'000'000);

  auto& a2 = pump.node("a2");
  std::string before_a1 = rib_str(pump.node("a1"));
  std::string before_a2 = rib_str(a2);
  std::string before_b1 = rib_str(pump.node("b1"));
  auto churn_a1 = pump.node("a1").rib_change_count();
  auto churn_b1 = pump.node("b1").rib_change_count();

  // One refresh-request plus one snapshot per established session.
  auto out = a2.resync_exchange();
  REQUIRE(out.size() == 4);
  int refreshes = 0, snapshots = 0;
  for (auto& o : out) {
    if (o.msg.kind == BgpMessage::Kind::kRefreshRequest) ++refreshes;
    if (o.msg.kind == BgpMessage::Kind::kSnapshot) ++snapshots;
    pump.inject("a2", o.peer, o.msg);
  }
  CHECK(refreshes == 2);
  CHECK(snapshots == 2);

  pump.run_until(1'500'000);
  CHECK(rib_str(pump.node("a1")) == before_a1);
  CHECK(rib_str(a2) == before_a2);
  CHECK(rib_str(pump.node("b1")) == before_b1);
  CHECK(pump.node("a1").rib_change_count() == churn_a1);
  CHECK(pump.node("b1").rib_change_count() == churn_b1);
}

TEST_CASE("identical runs produce identical transcripts") {
  Topology topo = load_topology(kPolicyTopo);
  Pump one(topo);
  Pump two(topo);
  one.run_until(2'000'000);
  two.run_until(2'000'000);
  REQUIRE(one.transcript().size() == two.transcript().size());
  CHECK(one.transcript() == two.transcript());
  for (const auto* id : {"e1", "e2", "e3"}) {
    CHECK(rib_str(one.node(id)) == rib_str(two.node(id)));
    CHECK(fib_str(one.node(id)) == fib_str(two.node(id)));
  }
}
