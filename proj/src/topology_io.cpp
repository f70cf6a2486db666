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

#include "netdx/topology_io.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace netdx {

namespace {

std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

[[noreturn]] void fail_at(int line_no, const std::string& msg) {
  throw TopologyError("line " + std::to_string(line_no) + ": " + msg);
}

Prefix parse_prefix_or_fail(const std::string& text, int line_no) {
  auto p = Prefix::parse(text);
  if (!p) fail_at(line_no, "bad prefix '" + text + "'");
  return *p;
}

// addr/len where the address keeps its host bits (interface addressing).
struct IfAddr {
  Ipv4Addr addr;
  std::uint8_t len;
};

IfAddr parse_ifaddr(const std::string& text, int line_no) {
  auto slash = text.find('/');
  if (slash == std::string::npos) fail_at(line_no, "expected addr/len, got '" + text + "'");
  auto addr = Ipv4Addr::parse(text.substr(0, slash));
  unsigned len = 0;
  try {
    len = std::stoul(text.substr(slash + 1));
  } catch (...) {
    fail_at(line_no, "bad prefix length in '" + text + "'");
  }
  if (!addr || len > 32) fail_at(line_no, "bad address '" + text + "'");
  return {*addr, static_cast<std::uint8_t>(len)};
}

PolicyClause parse_clause(const std::string& text, int line_no) {
  PolicyClause c;
  std::string action = text;
  std::string filter;
  if (auto colon = text.find(':'); colon != std::string::npos) {
    action = text.substr(0, colon);
    filter = text.substr(colon + 1);
  }
  if (action == "accept") {
    c.action = PolicyClause::Action::kAccept;
  } else if (action == "reject") {
    c.action = PolicyClause::Action::kReject;
  } else if (action.rfind("lp", 0) == 0) {
    c.action = PolicyClause::Action::kSetLocalPref;
    try {
      c.local_pref = std::stoul(action.substr(2));
    } catch (...) {
      fail_at(line_no, "bad local-pref clause '" + text + "'");
    }
  } else {
    fail_at(line_no, "bad policy clause '" + text + "'");
  }
  if (!filter.empty()) {
    std::string prefix_part = filter;
    if (auto plus = filter.find("+via"); plus != std::string::npos) {
      prefix_part = filter.substr(0, plus);
      c.as_pattern = std::stoul(filter.substr(plus + 4));
    } else if (filter.rfind("via", 0) == 0) {
      prefix_part.clear();
      c.as_pattern = std::stoul(filter.substr(3));
    }
    if (!prefix_part.empty())
      c.prefix_pattern = parse_prefix_or_fail(prefix_part, line_no);
  }
  return c;
}

FilterPolicy parse_policy(const std::string& text, bool outbound, int line_no) {
  FilterPolicy pol;
  std::stringstream ss(text);
  std::string item;
  bool first = true;
  while (std::getline(ss, item, ',')) {
    if (first && outbound && (item == "own" || item == "all")) {
      pol.scope = item == "own" ? FilterPolicy::Scope::kOwnAsOnly
                                : FilterPolicy::Scope::kAll;
      first = false;
      continue;
    }
    first = false;
    pol.clauses.push_back(parse_clause(item, line_no));
  }
  return pol;
}

std::string clause_str(const PolicyClause& c) {
  std::string s;
  switch (c.action) {
    case PolicyClause::Action::kAccept: s = "accept"; break;
    case PolicyClause::Action::kReject: s = "reject"; break;
    case PolicyClause::Action::kSetLocalPref:
      s = "lp" + std::to_string(c.local_pref);
      break;
  }
  if (c.prefix_pattern || c.as_pattern) {
    s += ":";
    if (c.prefix_pattern) s += c.prefix_pattern->str();
    if (c.as_pattern)
      s += (c.prefix_pattern ? "+via" : "via") + std::to_string(*c.as_pattern);
  }
  return s;
}

std::string policy_str(const FilterPolicy& pol, bool outbound) {
  std::vector<std::string> parts;
  if (outbound)
    parts.push_back(pol.scope == FilterPolicy::Scope::kOwnAsOnly ? "own" : "all");
  for (const auto& c : pol.clauses) parts.push_back(clause_str(c));
  if (parts.empty()) parts.push_back("accept");
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i)
    out += (i ? "," : "") + parts[i];
  return out;
}

MacAddr switch_mac(std::size_t switch_index, int if_index) {
  return MacAddr{0x020000000000ull | ((switch_index & 0xffff) << 8) |
                 (static_cast<std::uint64_t>(if_index) & 0xff)};
}

MacAddr host_mac(std::size_t host_index) {
  return MacAddr{0x020001000000ull | ((host_index & 0xffff) << 8)};
}

}  // namespace

Topology load_topology(const std::string& text) {
  Topology t;
  enum Section { kNone, kSwitches, kHosts, kLinks, kBgp, kAcl, kOriginate, kStatic };
  static const std::vector<std::pair<std::string, Section>> kSections = {
      {"[switches]", kSwitches}, {"[hosts]", kHosts},       {"[links]", kLinks},
      {"[bgp]", kBgp},           {"[acl]", kAcl},           {"[originate]", kOriginate},
      {"[static]", kStatic}};
  Section section = kNone;
  int last_section_rank = -1;

  std::unordered_map<std::string, std::size_t> switch_index;
  std::unordered_map<std::string, std::size_t> host_index;

  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw;
    if (auto hash = line.find('#'); hash != std::string::npos)
      line = line.substr(0, hash);
    auto toks = tokenize(line);
    if (toks.empty()) continue;

    if (toks[0].front() == '[') {
      auto it = std::find_if(kSections.begin(), kSections.end(),
                             [&](const auto& s) { return s.first == toks[0]; });
      if (it == kSections.end()) fail_at(line_no, "unknown section " + toks[0]);
      int rank = int(it - kSections.begin());
      if (rank <= last_section_rank)
        fail_at(line_no, "section " + toks[0] + " out of order");
      last_section_rank = rank;
      section = it->second;
      continue;
    }

    switch (section) {
      case kNone:
        fail_at(line_no, "content before first section");
      case kSwitches: {
        if (toks.size() != 4) fail_at(line_no, "expected: id asn loopback/32 secondary/32");
        SwitchConfig sw;
        sw.id = toks[0];
        try {
          sw.asn = std::stoul(toks[1]);
        } catch (...) {
          fail_at(line_no, "bad AS number '" + toks[1] + "'");
        }
        Prefix lb = parse_prefix_or_fail(toks[2], line_no);
        Prefix sec = parse_prefix_or_fail(toks[3], line_no);
        if (lb.len != 32 || sec.len != 32)
          fail_at(line_no, "loopback addresses must be /32");
        sw.loopback = lb.addr;
        sw.secondary_loopback = sec.addr;
        if (switch_index.count(sw.id)) fail_at(line_no, "duplicate switch " + sw.id);
        switch_index[sw.id] = t.switches.size();
        t.switches.push_back(std::move(sw));
        break;
      }
      case kHosts: {
        if (toks.size() != 2 && toks.size() != 3)
          fail_at(line_no, "expected: id ip/len [dh]");
        HostConfig h;
        h.id = toks[0];
        IfAddr a = parse_ifaddr(toks[1], line_no);
        h.ip = a.addr;
        h.secondary_ip = Ipv4Addr{a.addr.v + 1};
        h.prefix_len = a.len;
        if (toks.size() == 3) {
          if (toks[2] != "dh") fail_at(line_no, "unknown host flag '" + toks[2] + "'");
          if (!t.diagnosis_host.empty())
            fail_at(line_no, "second diagnosis host " + h.id);
          h.diagnosis_host = true;
          t.diagnosis_host = h.id;
        }
        if (host_index.count(h.id) || switch_index.count(h.id))
          fail_at(line_no, "duplicate node " + h.id);
        h.mac = host_mac(t.hosts.size());
        host_index[h.id] = t.hosts.size();
        t.hosts.push_back(std::move(h));
        break;
      }
      case kLinks: {
        if (toks.size() != 5)
          fail_at(line_no, "expected: a:if addr/len b:if addr/len latency_us");
        auto parse_end = [&](const std::string& tok) -> std::pair<NodeId, int> {
          auto colon = tok.find(':');
          if (colon == std::string::npos)
            fail_at(line_no, "expected node:if, got '" + tok + "'");
          try {
            return {tok.substr(0, colon), std::stoi(tok.substr(colon + 1))};
          } catch (...) {
            fail_at(line_no, "bad interface index in '" + tok + "'");
          }
        };
        auto [a_node, a_if] = parse_end(toks[0]);
        IfAddr a_addr = parse_ifaddr(toks[1], line_no);
        auto [b_node, b_if] = parse_end(toks[2]);
        IfAddr b_addr = parse_ifaddr(toks[3], line_no);
        LinkConfig l;
        l.a_node = a_node;
        l.a_if = a_if;
        l.b_node = b_node;
        l.b_if = b_if;
        try {
          l.latency_us = std::stoll(toks[4]);
        } catch (...) {
          fail_at(line_no, "bad latency '" + toks[4] + "'");
        }
        l.id = make_link_id(a_node, b_node);
        auto attach = [&](const NodeId& node, int ifx, IfAddr addr,
                          const NodeId& peer) {
          if (auto it = switch_index.find(node); it != switch_index.end()) {
            auto& sw = t.switches[it->second];
            sw.interfaces.push_back(InterfaceConfig{
                ifx, addr.addr, addr.len, switch_mac(it->second, ifx)});
          } else if (auto ht = host_index.find(node); ht != host_index.end()) {
            auto& h = t.hosts[ht->second];
            if (ifx != 0) fail_at(line_no, "host interface index must be 0");
            if (addr.addr != h.ip || addr.len != h.prefix_len)
              fail_at(line_no, "host-side address differs from host declaration");
            h.attached_switch = peer;
            h.attached_interface = 0;
          } else {
            fail_at(line_no, "link references missing node " + node);
          }
        };
        attach(a_node, a_if, a_addr, b_node);
        attach(b_node, b_if, b_addr, a_node);
        t.links.push_back(std::move(l));
        break;
      }
      case kBgp: {
        if (toks.size() < 2 || toks.size() > 4)
          fail_at(line_no, "expected: switch peer [in=POLICY] [out=POLICY]");
        auto it = switch_index.find(toks[0]);
        if (it == switch_index.end())
          fail_at(line_no, "bgp line for missing switch " + toks[0]);
        SessionConfig sess;
        sess.peer = toks[1];
        for (std::size_t i = 2; i < toks.size(); ++i) {
          if (toks[i].rfind("in=", 0) == 0)
            sess.policy_in = parse_policy(toks[i].substr(3), false, line_no);
          else if (toks[i].rfind("out=", 0) == 0)
            sess.policy_out = parse_policy(toks[i].substr(4), true, line_no);
          else
            fail_at(line_no, "unknown attribute '" + toks[i] + "'");
        }
        t.switches[it->second].sessions.push_back(std::move(sess));
        break;
      }
      case kAcl: {
        if (toks.size() < 2) fail_at(line_no, "expected: switch permit|deny ...");
        auto it = switch_index.find(toks[0]);
        if (it == switch_index.end())
          fail_at(line_no, "acl line for missing switch " + toks[0]);
        AclRule rule;
        if (toks[1] == "permit")
          rule.action = AclRule::Action::kPermit;
        else if (toks[1] == "deny")
          rule.action = AclRule::Action::kDeny;
        else
          fail_at(line_no, "acl action must be permit or deny");
        std::string spec_text;
        for (std::size_t i = 2; i < toks.size(); ++i)
          spec_text += (spec_text.empty() ? "" : ",") + toks[i];
        auto spec = FlowSpec::parse(spec_text);
        if (!spec) fail_at(line_no, "bad acl match '" + spec_text + "'");
        rule.match = *spec;
        t.switches[it->second].acl_rules.push_back(std::move(rule));
        break;
      }
      case kOriginate: {
        if (toks.size() != 2) fail_at(line_no, "expected: switch prefix");
        auto it = switch_index.find(toks[0]);
        if (it == switch_index.end())
          fail_at(line_no, "originate line for missing switch " + toks[0]);
        t.switches[it->second].originated_prefixes.push_back(
            parse_prefix_or_fail(toks[1], line_no));
        break;
      }
      case kStatic: {
        if (toks.size() != 3) fail_at(line_no, "expected: switch prefix ifindex");
        auto it = switch_index.find(toks[0]);
        if (it == switch_index.end())
          fail_at(line_no, "static line for missing switch " + toks[0]);
        StaticRoute r;
        r.prefix = parse_prefix_or_fail(toks[1], line_no);
        try {
          r.egress_interface = std::stoi(toks[2]);
        } catch (...) {
          fail_at(line_no, "bad interface index '" + toks[2] + "'");
        }
        t.switches[it->second].static_routes.push_back(r);
        break;
      }
    }
  }

  // Synthesize the intra-AS iBGP full mesh (accept-all policies).
  for (auto& sw : t.switches) {
    for (const auto& other : t.switches) {
      if (other.id == sw.id || other.asn != sw.asn) continue;
      SessionConfig sess;
      sess.peer = other.id;
      sess.ibgp = true;
      sw.sessions.push_back(std::move(sess));
    }
  }

  t.validate();
  return t;
}

Topology load_topology_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw TopologyError("cannot open topology file " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return load_topology(buf.str());
}

std::string serialize_topology(const Topology& t) {
  std::ostringstream out;
  out << "[switches]\n";
  for (const auto& s : t.switches)
    out << s.id << " " << s.asn << " " << s.loopback.str() << "/32 "
        << s.secondary_loopback.str() << "/32\n";
  out << "[hosts]\n";
  for (const auto& h : t.hosts)
    out << h.id << " " << h.ip.str() << "/" << int(h.prefix_len)
        << (h.diagnosis_host ? " dh" : "") << "\n";
  out << "[links]\n";
  for (const auto& l : t.links) {
    auto end_str = [&](const NodeId& node, int ifx) {
      std::string addr;
      if (const auto* sw = t.switch_config(node)) {
        const auto* i = sw->interface(ifx);
        addr = i->addr.str() + "/" + std::to_string(i->prefix_len);
      } else {
        const auto* h = t.host_config(node);
        addr = h->ip.str() + "/" + std::to_string(h->prefix_len);
      }
      return node + ":" + std::to_string(ifx) + " " + addr;
    };
    out << end_str(l.a_node, l.a_if) << " " << end_str(l.b_node, l.b_if) << " "
        << l.latency_us << "\n";
  }
  out << "[bgp]\n";
  for (const auto& s : t.switches)
    for (const auto& sess : s.sessions) {
      if (sess.ibgp) continue;  // synthesized, not part of the document
      out << s.id << " " << sess.peer << " in="
          << policy_str(sess.policy_in, false) << " out="
          << policy_str(sess.policy_out, true) << "\n";
    }
  out << "[acl]\n";
  for (const auto& s : t.switches)
    for (const auto& r : s.acl_rules) {
      out << s.id << " "
          << (r.action == AclRule::Action::kPermit ? "permit" : "deny");
      const auto& m = r.match;
      if (m.src) out << " src=" << m.src->str();
      if (m.dst) out << " dst=" << m.dst->str();
      if (m.protocol) out << " proto=" << protocol_name(*m.protocol);
      if (m.src_port) out << " sport=" << *m.src_port;
      if (m.dst_port) out << " dport=" << *m.dst_port;
      out << "\n";
    }
  out << "[originate]\n";
  for (const auto& s : t.switches)
    for (const auto& p : s.originated_prefixes)
      out << s.id << " " << p.str() << "\n";
  out << "[static]\n";
  for (const auto& s : t.switches)
    for (const auto& r : s.static_routes)
      out << s.id << " " << r.prefix.str() << " " << r.egress_interface << "\n";
  return out.str();
}

}  // namespace netdx
