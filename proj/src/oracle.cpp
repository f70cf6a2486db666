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

#include "netdx/oracle.hpp"

#include <algorithm>
#include <deque>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string_view>

#include "netdx/simkernel.hpp"

namespace netdx {

namespace {

constexpr const char* kLocal = "local";
constexpr int kMaxSteps = 200000;

bool clause_covers(const PolicyClause& c, const Prefix& p,
                   const std::vector<AsNumber>& path) {
  if (c.prefix_pattern &&
      (c.prefix_pattern->len > p.len || !c.prefix_pattern->contains(p.addr)))
    return false;
  if (c.as_pattern &&
      std::find(path.begin(), path.end(), *c.as_pattern) == path.end())
    return false;
  return true;
}

/** First matching clause decides; absent a match the route passes as-is. */
std::optional<std::uint32_t> run_policy(const FilterPolicy& pol,
                                        const Prefix& p,
                                        const std::vector<AsNumber>& path,
                                        std::uint32_t fallthrough_pref) {
  for (const auto& c : pol.clauses) {
    if (!clause_covers(c, p, path)) continue;
    if (c.action == PolicyClause::Action::kReject) return std::nullopt;
    if (c.action == PolicyClause::Action::kSetLocalPref) return c.local_pref;
    return fallthrough_pref;
  }
  return fallthrough_pref;
}

/** Source-session ordering where the switch's own routes come first. */
std::string_view source_rank(const std::string& s) {
  return s == kLocal ? std::string_view{} : std::string_view{s};
}

bool better_than(const RibEntry& a, const RibEntry& b) {
  if (a.local_pref != b.local_pref) return a.local_pref > b.local_pref;
  if (a.as_path.size() != b.as_path.size())
    return a.as_path.size() < b.as_path.size();
  return source_rank(a.source_session) < source_rank(b.source_session);
}

AclRule::Action first_match_acl(const std::vector<AclRule>& rules,
                                const Packet& p) {
  for (const auto& r : rules)
    if (flow_matches(r.match, p)) return r.action;
  return AclRule::Action::kPermit;
}

}  // namespace

std::vector<SwitchId> PathResult::switches() const {
  std::vector<SwitchId> out;
  out.reserve(hops.size());
  for (const auto& h : hops) out.push_back(h.node);
  return out;
}

const char* path_outcome_name(PathResult::Outcome o) {
  switch (o) {
    case PathResult::Outcome::kDelivered: return "delivered";
    case PathResult::Outcome::kLocal: return "local";
    case PathResult::Outcome::kAclDeny: return "acl_deny";
    case PathResult::Outcome::kTtlExpired: return "ttl_expired";
    case PathResult::Outcome::kNoRoute: return "no_route";
    case PathResult::Outcome::kDeadEnd: return "dead_end";
    case PathResult::Outcome::kLoop: return "loop";
  }
  return "?";
}

Oracle::Oracle(const Topology& topo) : topo_(topo) {
  topo_.validate();
  for (const auto& sc : topo_.switches) state_[sc.id];  // materialize keys
  derive_statics();
  derive_routes();
  derive_fibs();
  fingerprint_ = digest_state();
}

const ExpectedSwitchState& Oracle::at(const SwitchId& id) const {
  auto it = state_.find(id);
  if (it == state_.end())
    throw std::out_of_range("oracle: unknown switch " + id);
  return it->second;
}

const HostConfig* Oracle::host(const HostId& id) const {
  return topo_.host_config(id);
}

/**
 * Shortest-path /32 reachability inside each AS, the stand-in for an
 * interior routing protocol. For every same-AS pair (S, T), S points a
 * host route for T's loopback at its lowest-id neighbor on a shortest
 * path, using the lowest-numbered port when parallel links exist.
 */
void Oracle::derive_statics() {
  std::map<AsNumber, std::vector<SwitchId>> members_of;
  for (const auto& sc : topo_.switches) members_of[sc.asn].push_back(sc.id);
  for (auto& [asn, ids] : members_of) std::sort(ids.begin(), ids.end());

  std::map<SwitchId, std::set<SwitchId>> neighbors;
  std::map<std::pair<SwitchId, SwitchId>, int> port_toward;
  for (const auto& lc : topo_.links) {
    const SwitchConfig* a = topo_.switch_config(lc.a_node);
    const SwitchConfig* b = topo_.switch_config(lc.b_node);
    if (!a || !b || a->asn != b->asn) continue;
    neighbors[a->id].insert(b->id);
    neighbors[b->id].insert(a->id);
    auto keep_min = [&](const SwitchId& s, const SwitchId& n, int port) {
      auto [it, fresh] = port_toward.try_emplace({s, n}, port);
      if (!fresh && port < it->second) it->second = port;
    };
    keep_min(a->id, b->id, lc.a_if);
    keep_min(b->id, a->id, lc.b_if);
  }

  for (const auto& [asn, ids] : members_of) {
    (void)asn;
    for (const SwitchId& target : ids) {
      std::map<SwitchId, int> dist{{target, 0}};
      std::vector<SwitchId> layer{target};
      while (!layer.empty()) {
        std::vector<SwitchId> next;
        for (const auto& u : layer) {
          auto it = neighbors.find(u);
          if (it == neighbors.end()) continue;
          for (const auto& v : it->second)
            if (dist.try_emplace(v, dist[u] + 1).second) next.push_back(v);
        }
        std::sort(next.begin(), next.end());
        layer = std::move(next);
      }
      const Ipv4Addr lb = topo_.switch_config(target)->loopback;
      for (const SwitchId& s : ids) {
        if (s == target || !dist.count(s)) continue;
        for (const SwitchId& n : neighbors[s]) {  // ascending: lowest id wins
          auto dn = dist.find(n);
          if (dn == dist.end() || dn->second != dist[s] - 1) continue;
          state_[s].derived_statics.push_back(
              {Prefix::host_route(lb), port_toward.at({s, n})});
          break;
        }
      }
    }
  }
}

/**
 * Routing as a fixpoint: take one switch at a time off a work queue,
 * rebuild its selection and its per-session announcements, push the
 * import-filtered result into each neighbor, and requeue neighbors whose
 * view moved. This is the protocol's own propagation order flattened to
 * table exchanges, so it settles exactly where message passing settles.
 */
void Oracle::derive_routes() {
  struct SessRef {
    const SwitchConfig* owner;
    const SessionConfig* cfg;
  };
  // (owner, peer) -> session config, for the reverse-direction lookups.
  std::map<std::pair<SwitchId, SwitchId>, SessRef> sess;
  for (const auto& sc : topo_.switches)
    for (const auto& s : sc.sessions) sess[{sc.id, s.peer}] = {&sc, &s};

  auto is_ibgp_session = [&](const SwitchId& owner, const std::string& peer) {
    auto it = sess.find({owner, peer});
    return it != sess.end() && it->second.cfg->ibgp;
  };

  std::deque<SwitchId> work;
  std::set<SwitchId> queued;
  for (const auto& sc : topo_.switches) {
    work.push_back(sc.id);
    queued.insert(sc.id);
  }

  for (rounds_ = 0; !work.empty(); ++rounds_) {
    if (rounds_ >= kMaxSteps)
      throw std::runtime_error("oracle: route derivation did not settle");
    const SwitchId id = work.front();
    work.pop_front();
    queued.erase(id);
    const SwitchConfig& me = *topo_.switch_config(id);
    auto& st = state_[id];

    // Selection over local originations plus everything peers offered.
    std::map<Prefix, RibEntry> rib;
    auto offer = [&](const RibEntry& e) {
      auto [it, fresh] = rib.try_emplace(e.prefix, e);
      if (!fresh && better_than(e, it->second)) it->second = e;
    };
    for (const auto& p : me.originated_prefixes) offer({p, "", {}, 100, kLocal});
    for (const auto& [peer, routes] : st.rib_in) {
      (void)peer;
      for (const auto& [p, e] : routes) {
        (void)p;
        offer(e);
      }
    }
    st.rib = std::move(rib);

    // Announce to every peer; deliver through the peer's import filter.
    for (const auto& out : me.sessions) {
      std::map<Prefix, BgpRoute> adv;
      for (const auto& [p, best] : st.rib) {
        if (best.source_session == out.peer) continue;  // split horizon
        if (out.ibgp && best.source_session != kLocal &&
            is_ibgp_session(id, best.source_session))
          continue;  // the full mesh already delivered it
        if (out.policy_out.scope == FilterPolicy::Scope::kOwnAsOnly &&
            !best.as_path.empty())
          continue;
        if (!run_policy(out.policy_out, p, best.as_path, 100)) continue;
        BgpRoute r;
        r.prefix = p;
        if (out.ibgp) {
          r.as_path = best.as_path;
          r.local_pref_hint = best.local_pref;
        } else {
          r.as_path.push_back(me.asn);
          r.as_path.insert(r.as_path.end(), best.as_path.begin(),
                           best.as_path.end());
        }
        adv.emplace(p, std::move(r));
      }
      auto& sent = st.rib_out[out.peer];
      if (sent == adv) continue;
      sent = std::move(adv);

      const SwitchConfig& rc = *topo_.switch_config(out.peer);
      const SessionConfig& in = *sess.at({out.peer, id}).cfg;
      std::map<Prefix, RibEntry> got;
      for (const auto& [p, r] : sent) {
        if (std::find(r.as_path.begin(), r.as_path.end(), rc.asn) !=
            r.as_path.end())
          continue;  // own AS in the path
        std::uint32_t fallthrough = in.ibgp ? r.local_pref_hint : 100;
        auto pref = run_policy(in.policy_in, p, r.as_path, fallthrough);
        if (!pref) continue;
        got.emplace(p, RibEntry{p, id, r.as_path, *pref, id});
      }
      auto& slot = state_[out.peer].rib_in[id];
      if (slot != got) {
        slot = std::move(got);
        if (queued.insert(out.peer).second) work.push_back(out.peer);
      }
    }
  }
}

/**
 * Table build mirrors the switch software's precedence: control-processor
 * host routes, connected subnets, configured statics, derived statics,
 * then protocol routes with recursive next-hop resolution.
 */
void Oracle::derive_fibs() {
  for (const auto& sc : topo_.switches) {
    auto& st = state_[sc.id];
    std::map<Prefix, FibEntry> table;
    auto put = [&](Prefix p, int port, FibEntry::Source src) {
      table.try_emplace(p, FibEntry{p, port, MacAddr{}, src});
    };
    put(Prefix::host_route(sc.loopback), FibEntry::kCpuPort,
        FibEntry::Source::kConnected);
    put(Prefix::host_route(sc.secondary_loopback), FibEntry::kCpuPort,
        FibEntry::Source::kConnected);
    for (const auto& i : sc.interfaces)
      put(Prefix::host_route(i.addr), FibEntry::kCpuPort,
          FibEntry::Source::kConnected);
    for (const auto& i : sc.interfaces)
      put(Prefix::of(i.addr, i.prefix_len), i.index,
          FibEntry::Source::kConnected);
    for (const auto& r : sc.static_routes)
      put(r.prefix, r.egress_interface, FibEntry::Source::kStatic);
    for (const auto& r : st.derived_statics)
      put(r.prefix, r.egress_interface, FibEntry::Source::kStatic);

    auto resolve = [&](Ipv4Addr a) -> std::optional<int> {
      const FibEntry* best = nullptr;
      for (const auto& [p, e] : table) {
        (void)p;
        if (e.source == FibEntry::Source::kBgp || !e.prefix.contains(a))
          continue;
        if (!best || e.prefix.len > best->prefix.len) best = &e;
      }
      if (!best || best->egress_interface == FibEntry::kCpuPort)
        return std::nullopt;
      return best->egress_interface;
    };

    for (const auto& [p, e] : st.rib) {
      if (e.source_session == kLocal || table.count(p)) continue;
      std::optional<int> port;
      if (const LinkConfig* l = topo_.link(make_link_id(sc.id, e.next_hop_switch)))
        port = l->if_of(sc.id);
      else if (const SwitchConfig* peer = topo_.switch_config(e.next_hop_switch))
        port = resolve(peer->loopback);
      if (!port) continue;  // next hop unreachable: leave no entry
      put(p, *port, FibEntry::Source::kBgp);
    }

    st.fib.clear();
    st.fib.reserve(table.size());
    for (auto& [p, e] : table) {
      (void)p;
      st.fib.push_back(std::move(e));
    }
  }
}

HopDecision Oracle::decide(const SwitchId& sw, const Packet& probe) const {
  const SwitchConfig* sc = topo_.switch_config(sw);
  if (!sc) throw std::out_of_range("oracle: unknown switch " + sw);
  const auto& st = at(sw);
  HopDecision d;
  if (first_match_acl(sc->acl_rules, probe) == AclRule::Action::kDeny) {
    d.kind = HopDecision::Kind::kAclDeny;
    return d;
  }
  bool local = probe.dst_ip == sc->loopback ||
               probe.dst_ip == sc->secondary_loopback;
  for (const auto& i : sc->interfaces) local = local || probe.dst_ip == i.addr;
  if (probe.ttl == 0 && !local) {
    d.kind = HopDecision::Kind::kTtlExpired;
    return d;
  }
  const FibEntry* hit = nullptr;
  for (const auto& e : st.fib) {
    if (!e.prefix.contains(probe.dst_ip)) continue;
    if (!hit || e.prefix.len > hit->prefix.len) hit = &e;
  }
  if (!hit) {
    d.kind = HopDecision::Kind::kNoRoute;
    return d;
  }
  if (hit->egress_interface == FibEntry::kCpuPort || local) {
    d.kind = HopDecision::Kind::kLocal;
    return d;
  }
  d.egress_interface = hit->egress_interface;
  const LinkConfig* l = nullptr;
  for (const auto& lc : topo_.links) {
    if ((lc.a_node == sw && lc.a_if == hit->egress_interface) ||
        (lc.b_node == sw && lc.b_if == hit->egress_interface)) {
      l = &lc;
      break;
    }
  }
  if (!l) {
    d.kind = HopDecision::Kind::kDeadEnd;
    return d;
  }
  d.next_node = l->peer_of(sw);
  d.kind = topo_.switch_config(d.next_node)
               ? HopDecision::Kind::kForward
               : HopDecision::Kind::kDeliverHost;
  return d;
}

PathResult Oracle::trace(const Packet& probe) const {
  for (const auto& h : topo_.hosts)
    if (h.ip == probe.src_ip || h.secondary_ip == probe.src_ip) {
      PathResult r = trace_from(h.attached_switch, probe);
      const LinkConfig* l = topo_.link(make_link_id(h.id, h.attached_switch));
      if (l && !r.hops.empty())
        r.hops.front().ingress_interface = l->if_of(h.attached_switch);
      return r;
    }
  throw std::invalid_argument("oracle: no host owns source address " +
                              probe.src_ip.str());
}

PathResult Oracle::trace_from(const SwitchId& start,
                              const Packet& probe) const {
  PathResult r;
  Packet walk = probe;
  std::set<SwitchId> seen;
  SwitchId cur = start;
  int came_in = -1;
  while (true) {
    if (!seen.insert(cur).second) {
      r.outcome = PathResult::Outcome::kLoop;
      r.stopped_at = cur;
      return r;
    }
    HopDecision d = decide(cur, walk);
    r.hops.push_back({cur, came_in, d.egress_interface});
    switch (d.kind) {
      case HopDecision::Kind::kLocal:
        r.outcome = PathResult::Outcome::kLocal;
        r.stopped_at = cur;
        return r;
      case HopDecision::Kind::kAclDeny:
        r.outcome = PathResult::Outcome::kAclDeny;
        r.stopped_at = cur;
        return r;
      case HopDecision::Kind::kTtlExpired:
        r.outcome = PathResult::Outcome::kTtlExpired;
        r.stopped_at = cur;
        return r;
      case HopDecision::Kind::kNoRoute:
        r.outcome = PathResult::Outcome::kNoRoute;
        r.stopped_at = cur;
        return r;
      case HopDecision::Kind::kDeadEnd:
        r.outcome = PathResult::Outcome::kDeadEnd;
        r.stopped_at = cur;
        return r;
      case HopDecision::Kind::kDeliverHost:
        r.outcome = PathResult::Outcome::kDelivered;
        r.destination_host = d.next_node;
        return r;
      case HopDecision::Kind::kForward: {
        walk.ttl = static_cast<std::uint8_t>(walk.ttl ? walk.ttl - 1 : 0);
        const LinkConfig* l = topo_.link(make_link_id(cur, d.next_node));
        came_in = l ? l->if_of(d.next_node) : -1;
        cur = d.next_node;
        break;
      }
    }
  }
}

bool Oracle::should_forward(const SwitchId& from, const std::string& to,
                            const Packet& probe) const {
  HopDecision d = decide(from, probe);
  return (d.kind == HopDecision::Kind::kForward ||
          d.kind == HopDecision::Kind::kDeliverHost) &&
         d.next_node == to;
}

std::optional<int> Oracle::expected_egress(const SwitchId& sw,
                                           const Packet& probe) const {
  HopDecision d = decide(sw, probe);
  if (d.kind == HopDecision::Kind::kForward ||
      d.kind == HopDecision::Kind::kDeliverHost ||
      d.kind == HopDecision::Kind::kDeadEnd)
    return d.egress_interface;
  return std::nullopt;
}

std::vector<SwitchId> Oracle::expected_advertisers(const SwitchId& at_sw,
                                                   const Prefix& p) const {
  std::vector<SwitchId> out;
  for (const auto& [peer, routes] : at(at_sw).rib_in)
    if (routes.count(p)) out.push_back(peer);
  return out;
}

std::vector<SwitchId> Oracle::origin_switches(const Prefix& p) const {
  std::vector<SwitchId> out;
  for (const auto& sc : topo_.switches)
    for (const auto& o : sc.originated_prefixes)
      if (o == p) {
        out.push_back(sc.id);
        break;
      }
  return out;
}

std::uint64_t Oracle::digest_state() const {
  std::ostringstream s;
  for (const auto& [id, st] : state_) {
    s << id << '{';
    for (const auto& [peer, routes] : st.rib_in) {
      s << peer << ':';
      for (const auto& [p, e] : routes) {
        s << p.str() << '<' << e.local_pref;
        for (auto a : e.as_path) s << ',' << a;
        s << '>';
      }
    }
    s << '|';
    for (const auto& [p, e] : st.rib) {
      s << p.str() << '=' << e.source_session << '/' << e.local_pref;
      for (auto a : e.as_path) s << ',' << a;
      s << ';';
    }
    s << '|';
    for (const auto& [peer, adv] : st.rib_out) {
      s << peer << ':';
      for (const auto& [p, r] : adv) {
        s << p.str() << '<' << r.local_pref_hint;
        for (auto a : r.as_path) s << ',' << a;
        s << '>';
      }
    }
    s << '|';
    for (const auto& e : st.fib)
      s << e.prefix.str() << '@' << e.egress_interface << '#'
        << int(e.source) << ';';
    s << '}';
  }
  const std::string text = s.str();
  return fnv1a(kFnvBasis, text.data(), text.size());
}

}  // namespace netdx
