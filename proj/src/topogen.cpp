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

#include "netdx/topogen.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <utility>
#include <vector>

#include "netdx/simkernel.hpp"
#include "netdx/topology_io.hpp"

namespace netdx {

namespace {

struct LinkDraft {
  int a;
  int a_port;
  int b;
  int b_port;
};

}  // namespace

std::string generate_topology_text(std::uint64_t seed,
                                   const TopogenParams& p) {
  Rng rng = Rng::stream(seed, "topogen");

  const int as_count =
      p.min_as + static_cast<int>(rng.below(p.max_as - p.min_as + 1));
  const int sw_floor = std::max(p.min_switches, 2 * as_count);
  const int sw_count =
      sw_floor + static_cast<int>(rng.below(p.max_switches - sw_floor + 1));

  // Two switches per AS, remainder sprinkled.
  std::vector<int> as_size(as_count, 2);
  for (int extra = sw_count - 2 * as_count; extra > 0; --extra)
    as_size[rng.below(as_count)] += 1;
  std::vector<int> as_of(sw_count);
  std::vector<std::vector<int>> members(as_count);
  for (int a = 0, next = 0; a < as_count; ++a)
    for (int k = 0; k < as_size[a]; ++k, ++next) {
      as_of[next] = a;
      members[a].push_back(next);
    }

  std::vector<int> port_count(sw_count, 0);
  std::vector<LinkDraft> links;
  std::set<std::pair<int, int>> linked;
  auto add_link = [&](int x, int y) -> bool {
    auto key = std::minmax(x, y);
    if (x == y || !linked.insert(key).second) return false;
    links.push_back({x, port_count[x]++, y, port_count[y]++});
    return true;
  };

  // A spanning tree inside each AS, then a few shortcuts.
  for (int a = 0; a < as_count; ++a) {
    const auto& m = members[a];
    for (std::size_t i = 1; i < m.size(); ++i)
      add_link(m[i], m[rng.below(i)]);
    if (m.size() >= 3)
      for (std::uint64_t e = rng.below(m.size() - 1); e > 0; --e)
        add_link(m[rng.below(m.size())], m[rng.below(m.size())]);
  }

  // An AS-level tree with one border pair per adjacency. Acyclic at the
  // AS level means each prefix enters an AS at exactly one switch, so no
  // member ever faces an equal-preference choice; selection under this
  // comparator can livelock when perfectly synchronized borders keep
  // trading equal candidates, and tree-shaped inter-AS wiring rules that
  // out by construction.
  std::vector<std::pair<int, int>> ebgp;  // switch index pairs
  auto connect_as = [&](int a, int b) {
    int sa = members[a][rng.below(members[a].size())];
    int sb = members[b][rng.below(members[b].size())];
    if (add_link(sa, sb)) ebgp.emplace_back(sa, sb);
  };
  for (int a = 1; a < as_count; ++a) connect_as(a, rng.below(a));

  // Hosts on distinct switches; the last one is the management host.
  const int host_count = p.hosts + 1;
  std::vector<int> host_at;
  std::set<int> taken;
  while (static_cast<int>(host_at.size()) < host_count) {
    int s = static_cast<int>(rng.below(sw_count));
    if (taken.insert(s).second) host_at.push_back(s);
  }

  std::ostringstream out;
  out << "[switches]\n";
  for (int i = 0; i < sw_count; ++i)
    out << "s" << i << " " << (as_of[i] + 1) << " 10.255.0." << (i + 1)
        << "/32 10.254.0." << (i + 1) << "/32\n";

  out << "[hosts]\n";
  for (int k = 1; k <= host_count; ++k) {
    out << "h" << k << " 10." << k << ".0.10/24";
    if (k == host_count) out << " dh";
    out << "\n";
  }

  out << "[links]\n";
  int subnet = 1;
  for (const auto& l : links) {
    out << "s" << l.a << ":" << l.a_port << " 10.0." << subnet << ".1/30 s"
        << l.b << ":" << l.b_port << " 10.0." << subnet << ".2/30 50\n";
    ++subnet;
  }
  for (int k = 1; k <= host_count; ++k) {
    int s = host_at[k - 1];
    out << "s" << s << ":" << port_count[s]++ << " 10." << k << ".0.1/24 h"
        << k << ":0 10." << k << ".0.10/24 50\n";
  }

  // Random policies stay pure filters (reject / scope): preference
  // boosts chosen blind can build gadgets whose routing never settles.
  auto in_policy = [&]() -> std::string {
    if (!p.policies) return "accept";
    if (rng.below(10) < 2)
      return "reject:10." + std::to_string(1 + rng.below(host_count)) +
             ".0.0/24";
    return "accept";
  };
  auto out_policy = [&]() -> std::string {
    return p.policies && rng.below(4) == 0 ? "own" : "all";
  };

  out << "[bgp]\n";
  for (const auto& [sa, sb] : ebgp) {
    out << "s" << sa << " s" << sb << " in=" << in_policy()
        << " out=" << out_policy() << "\n";
    out << "s" << sb << " s" << sa << " in=" << in_policy()
        << " out=" << out_policy() << "\n";
  }

  out << "[acl]\n";
  out << "[originate]\n";
  for (int i = 0; i < sw_count; ++i)
    out << "s" << i << " 10.255.0." << (i + 1) << "/32\n";
  for (int k = 1; k <= host_count; ++k)
    out << "s" << host_at[k - 1] << " 10." << k << ".0.0/24\n";
  out << "[static]\n";
  return out.str();
}

Topology generate_topology(std::uint64_t seed, const TopogenParams& p) {
  return load_topology(generate_topology_text(seed, p));
}

}  // namespace netdx
