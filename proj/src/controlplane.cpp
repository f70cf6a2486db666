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
#include <set>
#include <string_view>

namespace netdx {

namespace {

constexpr const char* kLocalSource = "local";

bool clause_matches(const PolicyClause& c, const Prefix& prefix,
                    const std::vector<AsNumber>& path) {
  if (c.prefix_pattern) {
    if (c.prefix_pattern->len > prefix.len) return false;
    if (!c.prefix_pattern->contains(prefix.addr)) return false;
  }
  if (c.as_pattern) {
    if (std::find(path.begin(), path.end(), *c.as_pattern) == path.end())
      return false;
  }
  return true;
}

/** First-match policy walk; returns resulting local-pref, nullopt = reject. */
std::optional<std::uint32_t> apply_policy(const FilterPolicy& pol,
                                          const Prefix& prefix,
                                          const std::vector<AsNumber>& path,
                                          std::uint32_t default_pref) {
  for (const auto& c : pol.clauses) {
    if (!clause_matches(c, prefix, path)) continue;
    switch (c.action) {
      case PolicyClause::Action::kAccept: return default_pref;
      case PolicyClause::Action::kReject: return std::nullopt;
      case PolicyClause::Action::kSetLocalPref: return c.local_pref;
    }
  }
  return default_pref;
}

}  // namespace

const char* session_state_name(SessionState s) {
  switch (s) {
    case SessionState::kIdle: return "idle";
    case SessionState::kConnecting: return "connecting";
    case SessionState::kEstablished: return "established";
    case SessionState::kDown: return "down";
  }
  return "?";
}

const char* bgp_message_kind_name(BgpMessage::Kind k) {
  switch (k) {
    case BgpMessage::Kind::kOpen: return "open";
    case BgpMessage::Kind::kKeepalive: return "keepalive";
    case BgpMessage::Kind::kAnnounce: return "announce";
    case BgpMessage::Kind::kWithdraw: return "withdraw";
    case BgpMessage::Kind::kRefreshRequest: return "refresh_request";
    case BgpMessage::Kind::kSnapshot: return "snapshot";
  }
  return "?";
}

std::optional<RibEntry> best_path_select(
    const std::vector<RibEntry>& candidates) {
  // Locally originated routes sort before any session id on ties.
  auto src_rank = [](const std::string& s) -> std::string_view {
    return s == kLocalSource ? std::string_view{} : std::string_view{s};
  };
  const RibEntry* best = nullptr;
  for (const auto& c : candidates) {
    if (!best) {
      best = &c;
      continue;
    }
    if (c.local_pref != best->local_pref) {
      if (c.local_pref > best->local_pref) best = &c;
      continue;
    }
    if (c.as_path.size() != best->as_path.size()) {
      if (c.as_path.size() < best->as_path.size()) best = &c;
      continue;
    }
    if (src_rank(c.source_session) < src_rank(best->source_session)) best = &c;
  }
  if (!best) return std::nullopt;
  return *best;
}

ControlPlane::ControlPlane(const Topology& topo, const SwitchId& self,
                           TimerConfig timers)
    : topo_(topo), self_(self), cfg_(*topo.switch_config(self)),
      timers_(timers) {
  for (const auto& sc : cfg_.sessions) {
    Session s;
    s.cfg = sc;
    s.peer_asn = topo_.switch_config(sc.peer)->asn;
    sessions_.emplace(sc.peer, std::move(s));
  }
}

void ControlPlane::start(SimTime now) {
  started_ = true;
  for (const auto& p : cfg_.originated_prefixes) {
    RibEntry e;
    e.prefix = p;
    e.source_session = kLocalSource;
    rib_.emplace(p, std::move(e));
  }
  touch(now);
}

ControlPlane::Session* ControlPlane::session(const SwitchId& peer) {
  auto it = sessions_.find(peer);
  return it == sessions_.end() ? nullptr : &it->second;
}

const ControlPlane::Session* ControlPlane::session(const SwitchId& peer) const {
  auto it = sessions_.find(peer);
  return it == sessions_.end() ? nullptr : &it->second;
}

std::optional<RibEntry> ControlPlane::import_route(
    const Session& s, const Prefix& prefix, const std::vector<AsNumber>& path,
    std::uint32_t pref_hint) const {
  // Loop prevention: a path already containing this AS is discarded.
  if (std::find(path.begin(), path.end(), cfg_.asn) != path.end())
    return std::nullopt;
  std::uint32_t default_pref = s.cfg.ibgp ? pref_hint : 100;
  auto pref = apply_policy(s.cfg.policy_in, prefix, path, default_pref);
  if (!pref) return std::nullopt;
  RibEntry e;
  e.prefix = prefix;
  e.next_hop_switch = s.cfg.peer;
  e.as_path = path;
  e.local_pref = *pref;
  e.source_session = s.cfg.peer;
  return e;
}

std::optional<BgpRoute> ControlPlane::export_route(const Session& s,
                                                   const RibEntry& best) const {
  // Never back to where it came from.
  if (best.source_session == s.cfg.peer) return std::nullopt;
  // Routes learned on one intra-AS session are not relayed to another;
  // the full mesh distributes them directly.
  if (s.cfg.ibgp && best.source_session != kLocalSource) {
    const Session* src = session(best.source_session);
    if (src && src->cfg.ibgp) return std::nullopt;
  }
  if (s.cfg.policy_out.scope == FilterPolicy::Scope::kOwnAsOnly &&
      !best.as_path.empty())
    return std::nullopt;
  if (!apply_policy(s.cfg.policy_out, best.prefix, best.as_path, 100))
    return std::nullopt;
  BgpRoute r;
  r.prefix = best.prefix;
  if (s.cfg.ibgp) {
    r.as_path = best.as_path;
    r.local_pref_hint = best.local_pref;
  } else {
    r.as_path.reserve(best.as_path.size() + 1);
    r.as_path.push_back(cfg_.asn);
    r.as_path.insert(r.as_path.end(), best.as_path.begin(),
                     best.as_path.end());
  }
  return r;
}

std::vector<BgpRoute> ControlPlane::full_export(const Session& s) const {
  std::vector<BgpRoute> out;
  for (const auto& [p, e] : rib_) {
    (void)p;
    if (auto r = export_route(s, e)) out.push_back(std::move(*r));
  }
  return out;
}

void ControlPlane::establish(Session& s, SimTime now,
                             std::vector<BgpOutgoing>& out) {
  s.state = SessionState::kEstablished;
  s.established_at = now;
  s.last_rx = now;
  s.last_keepalive_tx = now;
  touch(now);
  BgpMessage snap;
  snap.kind = BgpMessage::Kind::kSnapshot;
  snap.sender = self_;
  snap.routes = full_export(s);
  s.rib_out.clear();
  for (const auto& r : snap.routes) s.rib_out.emplace(r.prefix, r);
  out.push_back({s.cfg.peer, std::move(snap)});
}

void ControlPlane::take_down(Session& s, SimTime now,
                             std::vector<BgpOutgoing>& out) {
  s.state = SessionState::kDown;
  s.flaps += 1;
  s.rib_out.clear();
  std::vector<Prefix> affected;
  for (const auto& [p, e] : s.rib_in) {
    (void)e;
    affected.push_back(p);
  }
  s.rib_in.clear();
  touch(now);
  reselect(affected, now, out);
}

void ControlPlane::reselect(const std::vector<Prefix>& prefixes, SimTime now,
                            std::vector<BgpOutgoing>& out) {
  std::set<Prefix> todo(prefixes.begin(), prefixes.end());
  for (const Prefix& p : todo) {
    std::vector<RibEntry> candidates;
    if (std::find(cfg_.originated_prefixes.begin(),
                  cfg_.originated_prefixes.end(),
                  p) != cfg_.originated_prefixes.end()) {
      RibEntry local;
      local.prefix = p;
      local.source_session = kLocalSource;
      candidates.push_back(std::move(local));
    }
    for (const auto& [peer, s] : sessions_) {
      (void)peer;
      auto it = s.rib_in.find(p);
      if (it != s.rib_in.end()) candidates.push_back(it->second);
    }
    auto best = best_path_select(candidates);

    auto cur = rib_.find(p);
    bool changed;
    if (best) {
      changed = cur == rib_.end() || !(cur->second == *best);
      if (changed) rib_[p] = *best;
    } else {
      changed = cur != rib_.end();
      if (changed) rib_.erase(cur);
    }
    if (!changed) continue;
    rib_changes_ += 1;
    touch(now);

    for (auto& [peer, s] : sessions_) {
      if (s.state != SessionState::kEstablished) continue;
      std::optional<BgpRoute> adv =
          best ? export_route(s, *best) : std::nullopt;
      auto prev = s.rib_out.find(p);
      if (adv) {
        if (prev != s.rib_out.end() && prev->second == *adv) continue;
        s.rib_out[p] = *adv;
        BgpMessage m;
        m.kind = BgpMessage::Kind::kAnnounce;
        m.sender = self_;
        m.prefix = p;
        m.as_path = adv->as_path;
        m.local_pref_hint = adv->local_pref_hint;
        out.push_back({peer, std::move(m)});
      } else if (prev != s.rib_out.end()) {
        s.rib_out.erase(prev);
        BgpMessage m;
        m.kind = BgpMessage::Kind::kWithdraw;
        m.sender = self_;
        m.prefix = p;
        out.push_back({peer, std::move(m)});
      }
    }
  }
}

std::vector<BgpOutgoing> ControlPlane::tick(SimTime now) {
  std::vector<BgpOutgoing> out;
  if (!started_) return out;
  for (auto& [peer, s] : sessions_) {
    (void)peer;
    switch (s.state) {
      case SessionState::kIdle:
      case SessionState::kDown: {
        if (s.last_open_tx < 0 ||
            now - s.last_open_tx >= timers_.open_retry_us) {
          s.state = SessionState::kConnecting;
          touch(now);
          s.last_open_tx = now;
          BgpMessage m;
          m.kind = BgpMessage::Kind::kOpen;
          m.sender = self_;
          out.push_back({s.cfg.peer, std::move(m)});
        }
        break;
      }
      case SessionState::kConnecting: {
        if (now - s.last_open_tx >= timers_.open_retry_us) {
          s.last_open_tx = now;
          BgpMessage m;
          m.kind = BgpMessage::Kind::kOpen;
          m.sender = self_;
          out.push_back({s.cfg.peer, std::move(m)});
        }
        break;
      }
      case SessionState::kEstablished: {
        if (now - s.last_rx > timers_.hold_us) {
          take_down(s, now, out);
          break;
        }
        if (now - s.last_keepalive_tx >= timers_.keepalive_us) {
          s.last_keepalive_tx = now;
          BgpMessage m;
          m.kind = BgpMessage::Kind::kKeepalive;
          m.sender = self_;
          out.push_back({s.cfg.peer, std::move(m)});
        }
        break;
      }
    }
  }
  return out;
}

std::vector<BgpOutgoing> ControlPlane::handle_message(const BgpMessage& m,
                                                      SimTime now) {
  std::vector<BgpOutgoing> out;
  Session* s = session(m.sender);
  if (!s) {
    protocol_errors_ += 1;
    return out;
  }
  s->last_rx = now;

  auto require_established = [&]() {
    if (s->state == SessionState::kEstablished) return true;
    protocol_errors_ += 1;
    return false;
  };

  switch (m.kind) {
    case BgpMessage::Kind::kOpen: {
      // The peer restarts its side; answer with a paced open so it can
      // establish, then (re)establish ours with a fresh snapshot.
      bool need_open = s->last_open_tx < 0 ||
                       now - s->last_open_tx >= timers_.open_retry_us;
      if (need_open) {
        s->last_open_tx = now;
        BgpMessage open;
        open.kind = BgpMessage::Kind::kOpen;
        open.sender = self_;
        out.push_back({s->cfg.peer, std::move(open)});
      }
      establish(*s, now, out);
      break;
    }
    case BgpMessage::Kind::kKeepalive:
      break;  // last_rx refresh is the whole effect
    case BgpMessage::Kind::kAnnounce: {
      if (!require_established()) break;
      auto imported =
          import_route(*s, m.prefix, m.as_path, m.local_pref_hint);
      if (imported)
        s->rib_in[m.prefix] = *imported;
      else
        s->rib_in.erase(m.prefix);  // replaced by a route we do not accept
      reselect({m.prefix}, now, out);
      break;
    }
    case BgpMessage::Kind::kWithdraw: {
      if (!require_established()) break;
      s->rib_in.erase(m.prefix);
      reselect({m.prefix}, now, out);
      break;
    }
    case BgpMessage::Kind::kSnapshot: {
      if (!require_established()) break;
      std::vector<Prefix> affected;
      for (const auto& [p, e] : s->rib_in) {
        (void)e;
        affected.push_back(p);
      }
      s->rib_in.clear();
      for (const auto& r : m.routes) {
        if (auto imported =
                import_route(*s, r.prefix, r.as_path, r.local_pref_hint)) {
          s->rib_in[r.prefix] = *imported;
          affected.push_back(r.prefix);
        }
      }
      reselect(affected, now, out);
      break;
    }
    case BgpMessage::Kind::kRefreshRequest: {
      if (!require_established()) break;
      BgpMessage snap;
      snap.kind = BgpMessage::Kind::kSnapshot;
      snap.sender = self_;
      snap.routes = full_export(*s);
      s->rib_out.clear();
      for (const auto& r : snap.routes) s->rib_out.emplace(r.prefix, r);
      out.push_back({s->cfg.peer, std::move(snap)});
      break;
    }
  }
  return out;
}

std::vector<BgpOutgoing> ControlPlane::resync_exchange() {
  std::vector<BgpOutgoing> out;
  for (auto& [peer, s] : sessions_) {
    if (s.state != SessionState::kEstablished) continue;
    BgpMessage refresh;
    refresh.kind = BgpMessage::Kind::kRefreshRequest;
    refresh.sender = self_;
    out.push_back({peer, std::move(refresh)});
    BgpMessage snap;
    snap.kind = BgpMessage::Kind::kSnapshot;
    snap.sender = self_;
    snap.routes = full_export(s);
    s.rib_out.clear();
    for (const auto& r : snap.routes) s.rib_out.emplace(r.prefix, r);
    out.push_back({peer, std::move(snap)});
  }
  return out;
}

std::map<Prefix, RibEntry> ControlPlane::rib_in(const SwitchId& peer) const {
  const Session* s = session(peer);
  return s ? s->rib_in : std::map<Prefix, RibEntry>{};
}

std::vector<BgpRoute> ControlPlane::rib_out(const SwitchId& peer) const {
  std::vector<BgpRoute> out;
  if (const Session* s = session(peer))
    for (const auto& [p, r] : s->rib_out) {
      (void)p;
      out.push_back(r);
    }
  return out;
}

SessionState ControlPlane::session_state(const SwitchId& peer) const {
  const Session* s = session(peer);
  return s ? s->state : SessionState::kIdle;
}

std::vector<SessionView> ControlPlane::sessions() const {
  std::vector<SessionView> out;
  for (const auto& [peer, s] : sessions_) {
    SessionView v;
    v.peer = peer;
    v.ibgp = s.cfg.ibgp;
    v.state = s.state;
    v.last_rx = s.last_rx;
    v.established_at = s.established_at;
    v.flap_count = s.flaps;
    out.push_back(std::move(v));
  }
  return out;
}

void ControlPlane::add_runtime_static(const StaticRoute& r) {
  for (auto& existing : runtime_statics_)
    if (existing.prefix == r.prefix) {
      existing = r;
      return;
    }
  runtime_statics_.push_back(r);
}

bool ControlPlane::remove_runtime_static(const Prefix& p) {
  auto it = std::find_if(runtime_statics_.begin(), runtime_statics_.end(),
                         [&](const StaticRoute& r) { return r.prefix == p; });
  if (it == runtime_statics_.end()) return false;
  runtime_statics_.erase(it);
  return true;
}

std::optional<int> ControlPlane::interface_toward(
    const SwitchId& adjacent_peer) const {
  const LinkConfig* l = topo_.link(make_link_id(self_, adjacent_peer));
  if (!l) return std::nullopt;
  return l->if_of(self_);
}

std::vector<FibEntry> ControlPlane::compute_fib() const {
  std::map<Prefix, FibEntry> table;
  auto put = [&](Prefix p, int egress, FibEntry::Source src) {
    table.emplace(p, FibEntry{p, egress, MacAddr{}, src});
  };

  put(Prefix::host_route(cfg_.loopback), FibEntry::kCpuPort,
      FibEntry::Source::kConnected);
  put(Prefix::host_route(cfg_.secondary_loopback), FibEntry::kCpuPort,
      FibEntry::Source::kConnected);
  for (const auto& i : cfg_.interfaces)
    put(Prefix::host_route(i.addr), FibEntry::kCpuPort,
        FibEntry::Source::kConnected);
  for (const auto& i : cfg_.interfaces)
    put(Prefix::of(i.addr, i.prefix_len), i.index, FibEntry::Source::kConnected);
  for (const auto& r : cfg_.static_routes)
    put(r.prefix, r.egress_interface, FibEntry::Source::kStatic);
  for (const auto& r : runtime_statics_)
    put(r.prefix, r.egress_interface, FibEntry::Source::kStatic);

  // Resolves an address through the non-protocol entries installed
  // above (used for the recursive same-AS next hops).
  auto resolve = [&](Ipv4Addr a) -> std::optional<int> {
    const FibEntry* best = nullptr;
    for (const auto& [p, e] : table) {
      (void)p;
      if (e.source == FibEntry::Source::kBgp) continue;
      if (!e.prefix.contains(a)) continue;
      if (!best || e.prefix.len > best->prefix.len) best = &e;
    }
    if (!best || best->egress_interface == FibEntry::kCpuPort)
      return std::nullopt;
    return best->egress_interface;
  };

  for (const auto& [p, e] : rib_) {
    if (e.source_session == kLocalSource) continue;  // covered above
    if (table.count(p)) continue;  // connected/static take precedence
    std::optional<int> egress = interface_toward(e.next_hop_switch);
    if (!egress) {
      const SwitchConfig* peer = topo_.switch_config(e.next_hop_switch);
      if (peer) egress = resolve(peer->loopback);
    }
    if (!egress) {
      unresolved_ += 1;
      continue;
    }
    put(p, *egress, FibEntry::Source::kBgp);
  }

  std::vector<FibEntry> out;
  out.reserve(table.size());
  for (auto& [p, e] : table) {
    (void)p;
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace netdx
