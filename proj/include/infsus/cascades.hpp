#pragma once

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "infsus/common.hpp"

namespace infsus {

using Timestamp = std::int64_t;

/// One forwarding record: `child` forwarded the message at `time` after
/// seeing it from `parent`. Roots have no parent.
struct CascadeEvent {
  std::optional<NodeId> parent;
  NodeId child = 0;
  Timestamp time = 0;

  bool operator==(const CascadeEvent&) const = default;
};

struct Message {
  std::string id;
  std::vector<CascadeEvent> events;  // sorted by time, stable

  bool operator==(const Message&) const = default;
};

/// Messages in input order. After `deduplicate` (the parse default) each
/// child occurs at most once per message.
struct CascadeLog {
  std::vector<Message> messages;

  std::size_t event_count() const;
  bool operator==(const CascadeLog&) const = default;
};

/// Counts of records dropped or skipped during ingestion and extraction.
struct Diagnostics {
  Count duplicate_events = 0;
  Count skipped_events = 0;     // parent not an in-neighbor of child in the network
  Count overflow_messages = 0;  // outside every time window

  Diagnostics& operator+=(const Diagnostics& other);
};

struct ParseOptions {
  bool deduplicate = true;
};

/// Reads the one-message-per-line JSON format. Throws DataError naming the
/// line on malformed input, negative times, or parent == child.
CascadeLog parse_cascades(std::istream& in, NodeNames& names, Diagnostics* diag = nullptr,
                          const ParseOptions& options = {});
void write_cascades(std::ostream& out, const CascadeLog& log, const NodeNames& names);

/// Keeps the first event of every (message, child); later ones are counted
/// as duplicates.
CascadeLog deduplicate(const CascadeLog& log, Diagnostics* diag = nullptr);

inline constexpr Count kUnlimited = std::numeric_limits<Count>::max();

/// Drops events of (parent, child) pairs that occur more than
/// `max_pair_per_message` times inside one message, then events of pairs
/// occurring fewer than `min_pair_total` times in what remains. Roots are
/// never dropped. Run it before `deduplicate` so repeated forwards count.
CascadeLog prune(const CascadeLog& log, Count min_pair_total = 50,
                 Count max_pair_per_message = 50);

struct TimeSplit {
  std::vector<CascadeLog> windows;
  CascadeLog overflow;
};

/// Windows are [b_i, b_{i+1}); a message belongs where its earliest event falls.
TimeSplit split_by_time(const CascadeLog& log, std::span<const Timestamp> boundaries);

struct Edge {
  NodeId from = 0;
  NodeId to = 0;
  auto operator<=>(const Edge&) const = default;
};

class DiffusionNetwork {
 public:
  DiffusionNetwork() = default;
  /// Edges are deduplicated; nodes are the endpoints plus `extra_nodes`.
  DiffusionNetwork(std::vector<Edge> edges, std::span<const NodeId> extra_nodes = {});

  const std::vector<NodeId>& nodes() const { return nodes_; }
  const std::vector<Edge>& edges() const { return edges_; }
  std::span<const NodeId> in_neighbors(NodeId v) const;
  std::span<const NodeId> out_neighbors(NodeId u) const;
  bool has_edge(NodeId from, NodeId to) const;
  bool contains(NodeId v) const;
  /// One past the largest node id.
  std::size_t id_bound() const { return in_.size(); }

  bool operator==(const DiffusionNetwork& other) const {
    return nodes_ == other.nodes_ && edges_ == other.edges_;
  }

 private:
  std::vector<NodeId> nodes_;
  std::vector<Edge> edges_;
  std::vector<std::vector<NodeId>> in_;
  std::vector<std::vector<NodeId>> out_;
  std::vector<bool> member_;
};

DiffusionNetwork build_diffusion_network(const CascadeLog& log);

void write_network_json(std::ostream& out, const DiffusionNetwork& net, const NodeNames& names);
DiffusionNetwork read_network_json(std::istream& in, NodeNames& names);

/// Canonically sorted, duplicate-free set of influencers.
struct AssembleMode {
  std::vector<NodeId> members;

  static AssembleMode of(std::vector<NodeId> ids);
  std::size_t size() const { return members.size(); }
  bool empty() const { return members.empty(); }
  bool contains(NodeId u) const;
  /// Position of `u` in `members`, or size() if absent.
  std::size_t index_of(NodeId u) const;

  auto operator<=>(const AssembleMode&) const = default;
};

/// Aggregated statistics of one (target, assemble mode) pair: forwards,
/// refusals, and forwards attributed to each mode member.
struct ExposureGroup {
  NodeId target = 0;
  AssembleMode mode;
  Count successes = 0;
  Count failures = 0;
  std::vector<Count> choices;  // aligned with mode.members

  bool operator==(const ExposureGroup&) const = default;
};

class ExposureTable {
 public:
  ExposureTable() = default;
  /// Groups are merged by key and sorted by (target, mode).
  explicit ExposureTable(std::vector<ExposureGroup> groups);

  const std::vector<ExposureGroup>& groups() const { return groups_; }
  std::size_t size() const { return groups_.size(); }
  bool empty() const { return groups_.empty(); }
  const ExposureGroup* find(NodeId target, const AssembleMode& mode) const;
  /// One past the largest node id mentioned.
  std::size_t id_bound() const;

  bool operator==(const ExposureTable&) const = default;

 private:
  std::vector<ExposureGroup> groups_;
};

/// Per message: every parented forward is a success for the child under the
/// in-neighbors active strictly earlier plus the recorded parent; every
/// non-forwarding node with an active in-neighbor is one failure under its
/// end-of-cascade active in-neighbors. Roots contribute nothing.
ExposureTable extract_exposures(const CascadeLog& log, const DiffusionNetwork& net,
                                Diagnostics* diag = nullptr);

}  // namespace infsus
