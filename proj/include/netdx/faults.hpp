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

#ifndef NETDX_FAULTS_HPP_
#define NETDX_FAULTS_HPP_

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "netdx/netmodel.hpp"

namespace netdx {

class Simulation;

/** Injectable misbehaviors. Each is invertible: arming installs a hook,
 * disarming removes it and (for routing faults) resolicits a clean
 * exchange, so a reconverged network is indistinguishable from one that
 * was never faulted. */
enum class FaultType : std::uint8_t {
  kSilentDropInSwitch,             // pipeline swallows packets, no accounting
  kSilentDropOnLink,               // link swallows packets in transit
  kCorruptionOnLinkIp,             // link flips a header field, checksum stale
  kIncorrectDecrementTtl,          // forwarding decrements TTL by != 1
  kPacketPayloadCorruptionInSwitch,  // forwarding rewrites the payload digest
  kIncorrectForwardingDrop,        // matching flow dropped as if FIB missed
  kFibDiscrepancy,                 // FIB entry hidden; RIB untouched
  kIngressBgpUpdateModification,   // received updates tampered after the wire
  kBgpNeighborMissing,             // all routing messages to one peer blocked
  kEgressBgpUpdateModification,    // sent updates tampered before the wire
};

constexpr int kFaultTypeCount = 10;

const char* fault_type_name(FaultType t);
std::optional<FaultType> fault_type_from_name(const std::string& name);
std::vector<FaultType> all_fault_types();

/** Faulty-behavior families a diagnosis verdict assigns. */
enum class FaultCategory : std::uint8_t {
  kPacketForwarding,
  kPacketTransformation,
  kDataPlaneTableGeneration,
  kRouteTableGeneration,
  kRouteAdvertisementReception,
  kRouteAdvertisementGeneration,
  kExternalInteraction,
};

constexpr int kFaultCategoryCount = 7;

const char* fault_category_name(FaultCategory c);
/** The categories a fault type can surface as (every type maps to >= 1;
 * every category is covered by >= 1 type). */
std::vector<FaultCategory> fault_categories_of(FaultType t);

/** Where a fault sits: a switch, a link, or one switch's side of a
 * routing session (directional). */
struct FaultLocation {
  enum class Kind : std::uint8_t { kSwitch, kLink, kSession };

  Kind kind = Kind::kSwitch;
  SwitchId switch_id;  // kSwitch; kSession: the misbehaving switch
  LinkId link_id;      // kLink
  SwitchId peer;       // kSession: the far end

  static FaultLocation at_switch(SwitchId id);
  static FaultLocation on_link(LinkId id);
  static FaultLocation on_session(SwitchId owner, SwitchId session_peer);

  /** "s3" | "s3~s4" | "s3:s4" (owner:peer). */
  std::string str() const;
  /** Parses by shape: '~' = link, ':' = session, else switch. */
  static std::optional<FaultLocation> parse(const std::string& text);

  auto operator<=>(const FaultLocation&) const = default;
};

/** Full description of one fault to inject. Serializes to JSON. */
struct FaultSpec {
  FaultType type = FaultType::kSilentDropInSwitch;
  FaultLocation where;
  /** Chance a passing data packet is hit (stochastic types). */
  double probability = 0.3;
  /** Packets to deliberately drop; absent = all data traffic. */
  std::optional<FlowSpec> flow;
  /** Route selector for table hiding and update tampering. */
  std::optional<Prefix> prefix;
  /** Update tampering poisons the AS path instead of moving the prefix. */
  bool rewrite_as_path = false;
  /** Mis-decrement amount; any value except the correct 1. The default
   * floors a full default TTL so the next hop's expiry check trips. */
  int ttl_delta = 64;
  /** Private randomness stream id for this fault instance. */
  std::uint64_t seed = 0;

  std::string to_json() const;
  /** Throws FaultError on malformed or incomplete documents. */
  static FaultSpec from_json(const std::string& text);
  /** "IncorrectForwardingDrop at s3 flow=dst=10.3.0.0/24". */
  std::string str() const;
};

class FaultError : public std::runtime_error {
 public:
  explicit FaultError(const std::string& what) : std::runtime_error(what) {}
};

using FaultHandle = std::uint64_t;

/**
 * Arms and disarms faults on a running simulation. Injection and
 * reversion are applied as queued simulation events, so a fault never
 * changes behavior halfway through a packet's pipeline walk. Validation
 * (unknown locations, a second fault at an occupied location, repeated
 * reverts) fails synchronously by throwing FaultError. Stochastic
 * faults draw only from their spec's private stream, so identical
 * specs against identical traffic kill identical packets. The injector
 * must not outlive the simulation it was built on.
 */
class FaultInjector {
 public:
  struct Record;  // opaque; defined by the implementation

  explicit FaultInjector(Simulation& sim);
  ~FaultInjector();
  FaultInjector(const FaultInjector&) = delete;
  FaultInjector& operator=(const FaultInjector&) = delete;

  /** Validates, reserves the location, and queues arming. */
  FaultHandle inject(const FaultSpec& spec);
  /** Frees the location and queues disarming (with the resync needed
   * to wash tampered routes out of neighbors' tables). */
  void revert(FaultHandle h);
  void revert_all();

  bool active(FaultHandle h) const;
  const FaultSpec& spec(FaultHandle h) const;
  /** Packets or routing messages this fault has hit so far. */
  std::uint64_t affected_count(FaultHandle h) const;
  std::vector<FaultHandle> active_handles() const;

 private:
  void validate(const FaultSpec& spec) const;
  void arm(Record& rec);
  void disarm(Record& rec);
  const Record& checked(FaultHandle h) const;

  Simulation& sim_;
  std::map<FaultHandle, std::shared_ptr<Record>> records_;
  std::map<std::string, FaultHandle> occupied_;  // location str -> handle
  FaultHandle next_handle_ = 0;
};

}  // namespace netdx

#endif  // NETDX_FAULTS_HPP_
