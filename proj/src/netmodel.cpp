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

#include "netdx/netmodel.hpp"

#include <algorithm>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace netdx {

std::optional<Ipv4Addr> Ipv4Addr::parse(const std::string& text) {
  unsigned a, b, c, d;
  char tail;
  if (std::sscanf(text.c_str(), "%u.%u.%u.%u%c", &a, &b, &c, &d, &tail) != 4)
    return std::nullopt;
  if (a > 255 || b > 255 || c > 255 || d > 255) return std::nullopt;
  return Ipv4Addr{(a << 24) | (b << 16) | (c << 8) | d};
}

std::string Ipv4Addr::str() const {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%u.%u.%u.%u", (v >> 24) & 0xff,
                (v >> 16) & 0xff, (v >> 8) & 0xff, v & 0xff);
  return buf;
}

static std::uint32_t mask_bits(std::uint8_t len) {
  return len == 0 ? 0u : (0xffffffffu << (32 - len));
}

Prefix Prefix::of(Ipv4Addr a, std::uint8_t l) {
  return Prefix{Ipv4Addr{a.v & mask_bits(l)}, l};
}

std::optional<Prefix> Prefix::parse(const std::string& text) {
  auto slash = text.find('/');
  if (slash == std::string::npos) return std::nullopt;
  auto addr = Ipv4Addr::parse(text.substr(0, slash));
  if (!addr) return std::nullopt;
  char tail;
  unsigned len;
  if (std::sscanf(text.c_str() + slash + 1, "%u%c", &len, &tail) != 1)
    return std::nullopt;
  if (len > 32) return std::nullopt;
  return of(*addr, static_cast<std::uint8_t>(len));
}

bool Prefix::contains(Ipv4Addr a) const {
  return (a.v & mask_bits(len)) == addr.v;
}

std::string Prefix::str() const {
  return addr.str() + "/" + std::to_string(len);
}

std::string MacAddr::str() const {
  char buf[18];
  std::snprintf(buf, sizeof buf, "%02x:%02x:%02x:%02x:%02x:%02x",
                unsigned(v >> 40) & 0xff, unsigned(v >> 32) & 0xff,
                unsigned(v >> 24) & 0xff, unsigned(v >> 16) & 0xff,
                unsigned(v >> 8) & 0xff, unsigned(v) & 0xff);
  return buf;
}

const char* protocol_name(Protocol p) {
  switch (p) {
    case Protocol::kIcmp: return "icmp";
    case Protocol::kTcp: return "tcp";
    case Protocol::kUdp: return "udp";
    case Protocol::kBgp: return "bgp";
    case Protocol::kMgmt: return "mgmt";
    case Protocol::kMarker: return "marker";
  }
  return "?";
}

std::optional<Protocol> protocol_from_name(const std::string& name) {
  for (Protocol p : {Protocol::kIcmp, Protocol::kTcp, Protocol::kUdp,
                     Protocol::kBgp, Protocol::kMgmt, Protocol::kMarker})
    if (name == protocol_name(p)) return p;
  return std::nullopt;
}

LinkId make_link_id(const NodeId& a, const NodeId& b) {
  return a < b ? a + "~" + b : b + "~" + a;
}

std::string FlowSpec::str() const {
  std::ostringstream out;
  bool first = true;
  auto field = [&](const std::string& k, const std::string& v) {
    if (!first) out << ",";
    out << k << "=" << v;
    first = false;
  };
  if (src) field("src", src->str());
  if (dst) field("dst", dst->str());
  if (protocol) field("proto", protocol_name(*protocol));
  if (src_port) field("sport", std::to_string(*src_port));
  if (dst_port) field("dport", std::to_string(*dst_port));
  if (first) out << "any";
  return out.str();
}

std::optional<FlowSpec> FlowSpec::parse(const std::string& text) {
  FlowSpec spec;
  if (text == "any" || text.empty()) return spec;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto eq = item.find('=');
    if (eq == std::string::npos) return std::nullopt;
    std::string key = item.substr(0, eq), val = item.substr(eq + 1);
    // Bare addresses are accepted as host routes.
    auto as_prefix = [](const std::string& s) -> std::optional<Prefix> {
      if (s.find('/') != std::string::npos) return Prefix::parse(s);
      auto a = Ipv4Addr::parse(s);
      if (!a) return std::nullopt;
      return Prefix::host_route(*a);
    };
    if (key == "src") {
      if (!(spec.src = as_prefix(val))) return std::nullopt;
    } else if (key == "dst") {
      if (!(spec.dst = as_prefix(val))) return std::nullopt;
    } else if (key == "proto") {
      if (!(spec.protocol = protocol_from_name(val))) return std::nullopt;
    } else if (key == "sport") {
      spec.src_port = static_cast<std::uint16_t>(std::stoul(val));
    } else if (key == "dport") {
      spec.dst_port = static_cast<std::uint16_t>(std::stoul(val));
    } else {
      return std::nullopt;
    }
  }
  return spec;
}

bool flow_matches(const FlowSpec& spec, const Packet& p) {
  if (spec.src && !spec.src->contains(p.src_ip)) return false;
  if (spec.dst && !spec.dst->contains(p.dst_ip)) return false;
  if (spec.src_port && *spec.src_port != p.src_port) return false;
  if (spec.dst_port && *spec.dst_port != p.dst_port) return false;
  if (spec.protocol && *spec.protocol != p.protocol) return false;
  return true;
}

const InterfaceConfig* SwitchConfig::interface(int index) const {
  for (const auto& i : interfaces)
    if (i.index == index) return &i;
  return nullptr;
}

const SessionConfig* SwitchConfig::session(const SwitchId& p) const {
  for (const auto& s : sessions)
    if (s.peer == p) return &s;
  return nullptr;
}

const SwitchConfig* Topology::switch_config(const SwitchId& id) const {
  for (const auto& s : switches)
    if (s.id == id) return &s;
  return nullptr;
}

const HostConfig* Topology::host_config(const HostId& id) const {
  for (const auto& h : hosts)
    if (h.id == id) return &h;
  return nullptr;
}

const LinkConfig* Topology::link(const LinkId& id) const {
  for (const auto& l : links)
    if (l.id == id) return &l;
  return nullptr;
}

const LinkConfig* Topology::link_at(const NodeId& node, int if_index) const {
  for (const auto& l : links) {
    if (l.a_node == node && l.a_if == if_index) return &l;
    if (l.b_node == node && l.b_if == if_index) return &l;
  }
  return nullptr;
}

bool Topology::has_node(const NodeId& id) const {
  return switch_config(id) != nullptr || host_config(id) != nullptr;
}

std::vector<const LinkConfig*> Topology::switch_links() const {
  std::vector<const LinkConfig*> out;
  for (const auto& l : links)
    if (switch_config(l.a_node) && switch_config(l.b_node)) out.push_back(&l);
  return out;
}

void Topology::validate() const {
  auto fail = [](const std::string& msg) { throw TopologyError(msg); };

  std::unordered_set<std::string> ids;
  std::set<Ipv4Addr> addrs;
  auto claim_addr = [&](Ipv4Addr a, const std::string& what) {
    if (!addrs.insert(a).second)
      fail("duplicate address " + a.str() + " (" + what + ")");
  };

  for (const auto& s : switches) {
    if (!ids.insert(s.id).second) fail("duplicate node id " + s.id);
    if (s.asn == 0) fail("switch " + s.id + ": AS number must be nonzero");
    claim_addr(s.loopback, "loopback of " + s.id);
    claim_addr(s.secondary_loopback, "secondary loopback of " + s.id);
    std::unordered_set<int> if_idx;
    for (const auto& i : s.interfaces) {
      if (!if_idx.insert(i.index).second)
        fail("switch " + s.id + ": duplicate interface index " +
             std::to_string(i.index));
      claim_addr(i.addr, s.id + ":" + std::to_string(i.index));
    }
    std::set<Prefix> orig(s.originated_prefixes.begin(),
                          s.originated_prefixes.end());
    if (orig.size() != s.originated_prefixes.size())
      fail("switch " + s.id + ": duplicate originated prefix");
  }
  for (const auto& h : hosts) {
    if (!ids.insert(h.id).second) fail("duplicate node id " + h.id);
    claim_addr(h.ip, "host " + h.id);
    claim_addr(h.secondary_ip, "secondary of host " + h.id);
    if (!switch_config(h.attached_switch))
      fail("host " + h.id + " attached to missing switch " + h.attached_switch);
  }

  std::unordered_set<std::string> used_ports;
  std::unordered_set<std::string> link_ids;
  for (const auto& l : links) {
    if (!has_node(l.a_node)) fail("link references missing node " + l.a_node);
    if (!has_node(l.b_node)) fail("link references missing node " + l.b_node);
    if (!link_ids.insert(l.id).second) fail("duplicate link " + l.id);
    for (const auto& [node, ifx] : {std::pair{l.a_node, l.a_if},
                                    std::pair{l.b_node, l.b_if}}) {
      std::string port = node + ":" + std::to_string(ifx);
      if (!used_ports.insert(port).second)
        fail("interface " + port + " used by more than one link");
      if (const auto* sw = switch_config(node)) {
        if (!sw->interface(ifx))
          fail("link references undeclared interface " + port);
      }
    }
    if (l.latency_us <= 0) fail("link " + l.id + ": latency must be positive");
  }

  // Every switch interface must be attached to exactly one link.
  for (const auto& s : switches)
    for (const auto& i : s.interfaces)
      if (!link_at(s.id, i.index))
        fail("interface " + s.id + ":" + std::to_string(i.index) +
             " has no link");
  for (const auto& h : hosts) {
    const auto* l = link_at(h.id, 0);
    if (!l) fail("host " + h.id + " has no link");
    if (l->peer_of(h.id) != h.attached_switch)
      fail("host " + h.id + " link does not reach its attached switch");
  }

  // BGP sessions: peer exists, symmetric, distinct AS, physically adjacent.
  for (const auto& s : switches) {
    std::unordered_set<std::string> peers;
    for (const auto& sess : s.sessions) {
      if (!peers.insert(sess.peer).second)
        fail("switch " + s.id + ": duplicate session with " + sess.peer);
      const auto* peer = switch_config(sess.peer);
      if (!peer) fail("switch " + s.id + ": session with missing " + sess.peer);
      if (!peer->session(s.id))
        fail("session " + s.id + "-" + sess.peer + " has no reverse session");
      if (sess.ibgp) {
        if (peer->asn != s.asn)
          fail("iBGP session " + s.id + "-" + sess.peer + " crosses ASes");
      } else {
        if (peer->asn == s.asn)
          fail("eBGP session " + s.id + "-" + sess.peer + " within one AS");
        if (!link(make_link_id(s.id, sess.peer)))
          fail("eBGP session " + s.id + "-" + sess.peer +
               " between non-adjacent switches");
      }
    }
  }

  if (hosts.empty()) {
    if (!diagnosis_host.empty()) fail("diagnosis host set but no hosts exist");
  } else {
    if (diagnosis_host.empty()) fail("no diagnosis host designated");
    const auto* dh = host_config(diagnosis_host);
    if (!dh || !dh->diagnosis_host) fail("diagnosis host not found");
  }

  // The link graph must be connected.
  if (!switches.empty()) {
    std::unordered_set<NodeId> seen;
    std::vector<NodeId> queue{switches.front().id};
    seen.insert(queue.front());
    while (!queue.empty()) {
      NodeId n = queue.back();
      queue.pop_back();
      for (const auto& l : links) {
        if (l.a_node != n && l.b_node != n) continue;
        NodeId peer = l.peer_of(n);
        if (seen.insert(peer).second) queue.push_back(peer);
      }
    }
    if (seen.size() != switches.size() + hosts.size())
      fail("link graph is not connected");
  }
}

}  // namespace netdx
