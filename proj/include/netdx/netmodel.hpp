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

#ifndef NETDX_NETMODEL_HPP_
#define NETDX_NETMODEL_HPP_

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "netdx/types.hpp"

namespace netdx {

/** Base for structured payloads riding the data plane (BGP, MGMT, markers). */
struct ControlBlob {
  virtual ~ControlBlob() = default;
};

/**
 * A modeled IPv4 packet. Header fields are explicit; the payload is
 * summarized by a 64-bit digest. `control` carries the structured
 * content of BGP/MGMT/MARKER packets (opaque to the forwarding path).
 */
struct Packet {
  std::uint64_t id = 0;  // identification; low 16 bits enter the checksum
  Ipv4Addr src_ip;
  Ipv4Addr dst_ip;
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
  Protocol protocol = Protocol::kUdp;
  std::uint8_t ttl = 64;
  std::uint8_t dscp = 0;
  bool trace_bit = false;  // dedicated metadata bit; not part of the checksum
  std::uint64_t payload_digest = 0;
  std::uint16_t header_checksum = 0;
  std::shared_ptr<const ControlBlob> control;

  // Per-hop metadata (not part of the wire header).
  SimTime ingress_timestamp = 0;
  MacAddr src_mac;
  MacAddr dst_mac;
};

/** True for protocols that model reliable/low-level control channels. */
inline bool is_control_protocol(Protocol p) {
  return p == Protocol::kBgp || p == Protocol::kMgmt || p == Protocol::kMarker;
}

/**
 * 5-tuple pattern: absent fields are wildcards, IP fields match by
 * prefix containment.
 */
struct FlowSpec {
  std::optional<Prefix> src;
  std::optional<Prefix> dst;
  std::optional<std::uint16_t> src_port;
  std::optional<std::uint16_t> dst_port;
  std::optional<Protocol> protocol;

  std::string str() const;
  static std::optional<FlowSpec> parse(const std::string& text);

  auto operator<=>(const FlowSpec&) const = default;
};

bool flow_matches(const FlowSpec& spec, const Packet& p);

struct AclRule {
  enum class Action { kPermit, kDeny };
  FlowSpec match;
  Action action = Action::kPermit;

  auto operator<=>(const AclRule&) const = default;
};

/** Forwarding table entry. Egress -1 denotes delivery to the local CPU. */
struct FibEntry {
  enum class Source { kConnected, kStatic, kBgp };
  static constexpr int kCpuPort = -1;

  Prefix prefix;
  int egress_interface = kCpuPort;
  MacAddr next_hop_mac;
  Source source = Source::kBgp;

  auto operator<=>(const FibEntry&) const = default;
};

/** A BGP-learned (or locally originated) route candidate. */
struct RibEntry {
  Prefix prefix;
  SwitchId next_hop_switch;          // empty for locally originated routes
  std::vector<AsNumber> as_path;     // nearest AS first; empty when local
  std::uint32_t local_pref = 100;
  std::string source_session;        // peer switch id, or "local"

  auto operator<=>(const RibEntry&) const = default;
};

/** One import/export policy clause; first match wins, default accept. */
struct PolicyClause {
  enum class Action { kAccept, kReject, kSetLocalPref };
  std::optional<Prefix> prefix_pattern;   // matches routes inside this prefix
  std::optional<AsNumber> as_pattern;     // matches routes whose path contains it
  Action action = Action::kAccept;
  std::uint32_t local_pref = 100;         // used by kSetLocalPref

  auto operator<=>(const PolicyClause&) const = default;
};

struct FilterPolicy {
  enum class Scope { kAll, kOwnAsOnly };
  std::vector<PolicyClause> clauses;
  Scope scope = Scope::kAll;  // outbound advertise scope; ignored inbound

  auto operator<=>(const FilterPolicy&) const = default;
};

struct SessionConfig {
  SwitchId peer;
  FilterPolicy policy_in;
  FilterPolicy policy_out;
  bool ibgp = false;  // synthesized intra-AS session

  auto operator<=>(const SessionConfig&) const = default;
};

struct InterfaceConfig {
  int index = 0;
  Ipv4Addr addr;
  std::uint8_t prefix_len = 30;
  MacAddr mac;

  auto operator<=>(const InterfaceConfig&) const = default;
};

struct StaticRoute {
  Prefix prefix;
  int egress_interface = 0;

  auto operator<=>(const StaticRoute&) const = default;
};

struct SwitchConfig {
  SwitchId id;
  AsNumber asn = 0;
  Ipv4Addr loopback;            // primary management address, /32
  Ipv4Addr secondary_loopback;  // secondary address, /32, never advertised
  std::vector<InterfaceConfig> interfaces;
  std::vector<SessionConfig> sessions;        // explicit eBGP + synthesized iBGP
  std::vector<AclRule> acl_rules;
  std::vector<Prefix> originated_prefixes;    // announced into BGP
  std::vector<StaticRoute> static_routes;     // from the topology document

  const InterfaceConfig* interface(int index) const;
  const SessionConfig* session(const SwitchId& peer) const;
};

struct HostConfig {
  HostId id;
  Ipv4Addr ip;                  // primary address
  Ipv4Addr secondary_ip;        // secondary address (same subnet)
  std::uint8_t prefix_len = 24;
  MacAddr mac;
  SwitchId attached_switch;
  int attached_interface = 0;
  bool diagnosis_host = false;
};

struct LinkConfig {
  LinkId id;
  NodeId a_node;
  int a_if = 0;
  NodeId b_node;
  int b_if = 0;
  SimTime latency_us = 50;

  NodeId peer_of(const NodeId& n) const { return n == a_node ? b_node : a_node; }
  int if_of(const NodeId& n) const { return n == a_node ? a_if : b_if; }
};

/**
 * Immutable description of the network: switches, hosts, links, and
 * per-switch configuration. Declaration order is preserved so the
 * document serializer can round-trip byte-exactly.
 */
struct Topology {
  std::vector<SwitchConfig> switches;
  std::vector<HostConfig> hosts;
  std::vector<LinkConfig> links;
  HostId diagnosis_host;

  const SwitchConfig* switch_config(const SwitchId& id) const;
  const HostConfig* host_config(const HostId& id) const;
  const LinkConfig* link(const LinkId& id) const;
  /** The link attached to (node, interface), or nullptr. */
  const LinkConfig* link_at(const NodeId& node, int if_index) const;
  bool has_node(const NodeId& id) const;

  /** All switch interfaces that face another switch (not a host). */
  std::vector<const LinkConfig*> switch_links() const;

  /**
   * Validates structural invariants: unique ids and addresses, links
   * reference existing endpoints/interfaces at most once, BGP sessions
   * are symmetric and between physically adjacent switches of different
   * ASes, originated prefixes are unique per switch, the link graph is
   * connected, and the diagnosis host exists.
   * Throws std::runtime_error describing the first violation.
   */
  void validate() const;
};

/** Error raised by topology parsing/validation. */
class TopologyError : public std::runtime_error {
 public:
  explicit TopologyError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace netdx

#endif  // NETDX_NETMODEL_HPP_
