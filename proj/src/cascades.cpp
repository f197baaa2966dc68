#include "infsus/cascades.hpp"

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace infsus {

using nlohmann::json;

std::size_t CascadeLog::event_count() const {
  std::size_t total = 0;
  for (const auto& m : messages) total += m.events.size();
  return total;
}

Diagnostics& Diagnostics::operator+=(const Diagnostics& other) {
  duplicate_events += other.duplicate_events;
  skipped_events += other.skipped_events;
  overflow_messages += other.overflow_messages;
  return *this;
}

namespace {

void sort_events(std::vector<CascadeEvent>& events) {
  std::stable_sort(events.begin(), events.end(),
                   [](const CascadeEvent& a, const CascadeEvent& b) { return a.time < b.time; });
}

[[noreturn]] void fail_line(std::size_t line_no, const std::string& what) {
  throw DataError("cascade line " + std::to_string(line_no) + ": " + what);
}

}  // namespace

CascadeLog parse_cascades(std::istream& in, NodeNames& names, Diagnostics* diag,
                          const ParseOptions& options) {
  CascadeLog log;
  std::unordered_set<std::string> seen_ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      fail_line(line_no, std::string("malformed JSON: ") + e.what());
    }
    if (!record.is_object() || !record.contains("mid") || !record["mid"].is_string())
      fail_line(line_no, "missing string field \"mid\"");
    if (!record.contains("events") || !record["events"].is_array())
      fail_line(line_no, "missing array field \"events\"");

    Message msg;
    msg.id = record["mid"].get<std::string>();
    if (!seen_ids.insert(msg.id).second) fail_line(line_no, "duplicate message id " + msg.id);

    for (const auto& ev : record["events"]) {
      if (!ev.is_object()) fail_line(line_no, "event is not an object");
      if (!ev.contains("child") || !ev["child"].is_string())
        fail_line(line_no, "event without string \"child\"");
      if (!ev.contains("t") || !ev["t"].is_number_integer())
        fail_line(line_no, "event without integer \"t\"");
      CascadeEvent out;
      const auto child = ev["child"].get<std::string>();
      out.time = ev["t"].get<Timestamp>();
      if (out.time < 0) fail_line(line_no, "negative timestamp");
      if (ev.contains("parent") && !ev["parent"].is_null()) {
        if (!ev["parent"].is_string()) fail_line(line_no, "parent must be a string or null");
        const auto parent = ev["parent"].get<std::string>();
        if (parent == child) fail_line(line_no, "rejected record: parent equals child " + child);
        out.parent = names.intern(parent);
      }
      out.child = names.intern(child);
      msg.events.push_back(out);
    }
    sort_events(msg.events);
    log.messages.push_back(std::move(msg));
  }
  if (options.deduplicate) return deduplicate(log, diag);
  return log;
}

void write_cascades(std::ostream& out, const CascadeLog& log, const NodeNames& names) {
  for (const auto& msg : log.messages) {
    json events = json::array();
    for (const auto& ev : msg.events) {
      json e;
      e["parent"] = ev.parent ? json(names.name(*ev.parent)) : json(nullptr);
      e["child"] = names.name(ev.child);
      e["t"] = ev.time;
      events.push_back(std::move(e));
    }
    json record;
    record["mid"] = msg.id;
    record["events"] = std::move(events);
    out << record.dump() << '\n';
  }
}

CascadeLog deduplicate(const CascadeLog& log, Diagnostics* diag) {
  CascadeLog out;
  out.messages.reserve(log.messages.size());
  for (const auto& msg : log.messages) {
    Message kept{msg.id, {}};
    std::unordered_set<NodeId> seen;
    for (const auto& ev : msg.events) {
      if (seen.insert(ev.child).second) {
        kept.events.push_back(ev);
      } else if (diag) {
        ++diag->duplicate_events;
      }
    }
    out.messages.push_back(std::move(kept));
  }
  return out;
}

CascadeLog prune(const CascadeLog& log, Count min_pair_total, Count max_pair_per_message) {
  // Pairs repeated abnormally often inside one message go first.
  CascadeLog stage;
  for (const auto& msg : log.messages) {
    std::map<Edge, Count> local;
    for (const auto& ev : msg.events)
      if (ev.parent) ++local[{*ev.parent, ev.child}];
    Message kept{msg.id, {}};
    for (const auto& ev : msg.events) {
      if (ev.parent && local[{*ev.parent, ev.child}] > max_pair_per_message) continue;
      kept.events.push_back(ev);
    }
    stage.messages.push_back(std::move(kept));
  }

  std::map<Edge, Count> totals;
  for (const auto& msg : stage.messages)
    for (const auto& ev : msg.events)
      if (ev.parent) ++totals[{*ev.parent, ev.child}];
  for (auto& msg : stage.messages) {
    std::erase_if(msg.events, [&](const CascadeEvent& ev) {
      return ev.parent && totals[{*ev.parent, ev.child}] < min_pair_total;
    });
  }
  return stage;
}

TimeSplit split_by_time(const CascadeLog& log, std::span<const Timestamp> boundaries) {
  for (std::size_t i = 1; i < boundaries.size(); ++i)
    if (boundaries[i] <= boundaries[i - 1])
      throw ConfigError("time window boundaries must be strictly increasing");
  TimeSplit split;
  split.windows.resize(boundaries.empty() ? 0 : boundaries.size() - 1);
  for (const auto& msg : log.messages) {
    if (msg.events.empty() || boundaries.size() < 2) {
      split.overflow.messages.push_back(msg);
      continue;
    }
    const Timestamp start = msg.events.front().time;
    auto it = std::upper_bound(boundaries.begin(), boundaries.end(), start);
    if (it == boundaries.begin() || it == boundaries.end()) {
      split.overflow.messages.push_back(msg);
      continue;
    }
    const auto window = static_cast<std::size_t>(it - boundaries.begin()) - 1;
    split.windows[window].messages.push_back(msg);
  }
  return split;
}

// ---------------------------------------------------------------------------

DiffusionNetwork::DiffusionNetwork(std::vector<Edge> edges, std::span<const NodeId> extra_nodes)
    : edges_(std::move(edges)) {
  std::sort(edges_.begin(), edges_.end());
  edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());

  NodeId bound = 0;
  for (const auto& e : edges_) bound = std::max({bound, e.from + 1, e.to + 1});
  for (NodeId v : extra_nodes) bound = std::max(bound, v + 1);
  in_.resize(bound);
  out_.resize(bound);
  member_.assign(bound, false);

  for (const auto& e : edges_) {
    in_[e.to].push_back(e.from);
    out_[e.from].push_back(e.to);
    member_[e.from] = member_[e.to] = true;
  }
  for (NodeId v : extra_nodes) member_[v] = true;
  for (auto& list : in_) std::sort(list.begin(), list.end());
  for (NodeId v = 0; v < bound; ++v)
    if (member_[v]) nodes_.push_back(v);
}

std::span<const NodeId> DiffusionNetwork::in_neighbors(NodeId v) const {
  if (v >= in_.size()) return {};
  return in_[v];
}

std::span<const NodeId> DiffusionNetwork::out_neighbors(NodeId u) const {
  if (u >= out_.size()) return {};
  return out_[u];
}

bool DiffusionNetwork::has_edge(NodeId from, NodeId to) const {
  const auto in = in_neighbors(to);
  return std::binary_search(in.begin(), in.end(), from);
}

bool DiffusionNetwork::contains(NodeId v) const { return v < member_.size() && member_[v]; }

DiffusionNetwork build_diffusion_network(const CascadeLog& log) {
  std::vector<Edge> edges;
  std::vector<NodeId> nodes;
  for (const auto& msg : log.messages) {
    for (const auto& ev : msg.events) {
      nodes.push_back(ev.child);
      if (ev.parent) edges.push_back({*ev.parent, ev.child});
    }
  }
  return DiffusionNetwork(std::move(edges), nodes);
}

void write_network_json(std::ostream& out, const DiffusionNetwork& net, const NodeNames& names) {
  json doc;
  doc["nodes"] = json::array();
  for (NodeId v : net.nodes()) doc["nodes"].push_back(names.name(v));
  doc["edges"] = json::array();
  for (const auto& e : net.edges())
    doc["edges"].push_back(json::array({names.name(e.from), names.name(e.to)}));
  out << doc.dump() << '\n';
}

DiffusionNetwork read_network_json(std::istream& in, NodeNames& names) {
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("network JSON: ") + e.what());
  }
  if (!doc.contains("nodes") || !doc.contains("edges"))
    throw DataError("network JSON needs \"nodes\" and \"edges\"");
  std::vector<NodeId> nodes;
  for (const auto& n : doc["nodes"]) nodes.push_back(names.intern(n.get<std::string>()));
  std::vector<Edge> edges;
  for (const auto& e : doc["edges"]) {
    if (!e.is_array() || e.size() != 2) throw DataError("network JSON: edge must be [u, v]");
    edges.push_back({names.intern(e[0].get<std::string>()), names.intern(e[1].get<std::string>())});
  }
  return DiffusionNetwork(std::move(edges), nodes);
}

// ---------------------------------------------------------------------------

AssembleMode AssembleMode::of(std::vector<NodeId> ids) {
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return AssembleMode{std::move(ids)};
}

bool AssembleMode::contains(NodeId u) const {
  return std::binary_search(members.begin(), members.end(), u);
}

std::size_t AssembleMode::index_of(NodeId u) const {
  auto it = std::lower_bound(members.begin(), members.end(), u);
  if (it == members.end() || *it != u) return members.size();
  return static_cast<std::size_t>(it - members.begin());
}

namespace {

struct GroupKey {
  NodeId target;
  AssembleMode mode;
  auto operator<=>(const GroupKey&) const = default;
};

struct GroupAcc {
  Count successes = 0;
  Count failures = 0;
  std::map<NodeId, Count> choices;
};

using GroupMap = std::map<GroupKey, GroupAcc>;

void merge_into(GroupMap& dst, GroupMap&& src) {
  for (auto& [key, acc] : src) {
    auto& d = dst[key];
    d.successes += acc.successes;
    d.failures += acc.failures;
    for (const auto& [u, c] : acc.choices) d.choices[u] += c;
  }
}

void extract_message(const Message& msg, const DiffusionNetwork& net, GroupMap& groups,
                     Diagnostics& diag) {
  // Activation time of everyone involved; a node seen only as a parent is
  // active from the first time it was credited.
  std::unordered_map<NodeId, Timestamp> active;
  auto note = [&](NodeId v, Timestamp t) {
    auto [it, inserted] = active.try_emplace(v, t);
    if (!inserted) it->second = std::min(it->second, t);
  };
  for (const auto& ev : msg.events) {
    note(ev.child, ev.time);
    if (ev.parent) note(*ev.parent, ev.time);
  }

  for (const auto& ev : msg.events) {
    if (!ev.parent) continue;
    const NodeId v = ev.child;
    const NodeId u = *ev.parent;
    if (!net.has_edge(u, v)) {
      ++diag.skipped_events;
      continue;
    }
    std::vector<NodeId> members{u};
    for (NodeId w : net.in_neighbors(v)) {
      auto it = active.find(w);
      if (it != active.end() && it->second < ev.time) members.push_back(w);
    }
    auto& acc = groups[GroupKey{v, AssembleMode::of(std::move(members))}];
    ++acc.successes;
    ++acc.choices[u];
  }

  std::vector<NodeId> refusers;
  for (const auto& [u, t] : active)
    for (NodeId v : net.out_neighbors(u))
      if (!active.contains(v)) refusers.push_back(v);
  std::sort(refusers.begin(), refusers.end());
  refusers.erase(std::unique(refusers.begin(), refusers.end()), refusers.end());
  for (NodeId v : refusers) {
    std::vector<NodeId> members;
    for (NodeId w : net.in_neighbors(v))
      if (active.contains(w)) members.push_back(w);
    ++groups[GroupKey{v, AssembleMode::of(std::move(members))}].failures;
  }
}

}  // namespace

ExposureTable::ExposureTable(std::vector<ExposureGroup> groups) {
  std::map<GroupKey, ExposureGroup> merged;
  for (auto& g : groups) {
    if (g.mode.empty()) throw DataError("exposure group with empty assemble mode");
    if (g.choices.empty()) g.choices.assign(g.mode.size(), 0);
    if (g.choices.size() != g.mode.size())
      throw DataError("exposure group choices not aligned with its mode");
    auto [it, inserted] = merged.try_emplace(GroupKey{g.target, g.mode}, g);
    if (!inserted) {
      it->second.successes += g.successes;
      it->second.failures += g.failures;
      for (std::size_t j = 0; j < g.choices.size(); ++j) it->second.choices[j] += g.choices[j];
    }
  }
  groups_.reserve(merged.size());
  for (auto& [key, g] : merged) groups_.push_back(std::move(g));
}

const ExposureGroup* ExposureTable::find(NodeId target, const AssembleMode& mode) const {
  auto it = std::lower_bound(groups_.begin(), groups_.end(), std::tie(target, mode),
                             [](const ExposureGroup& g, const auto& key) {
                               return std::tie(g.target, g.mode) < key;
                             });
  if (it == groups_.end() || it->target != target || it->mode != mode) return nullptr;
  return &*it;
}

std::size_t ExposureTable::id_bound() const {
  std::size_t bound = 0;
  for (const auto& g : groups_) {
    bound = std::max<std::size_t>(bound, g.target + 1);
    for (NodeId u : g.mode.members) bound = std::max<std::size_t>(bound, u + 1);
  }
  return bound;
}

ExposureTable extract_exposures(const CascadeLog& log, const DiffusionNetwork& net,
                                Diagnostics* diag) {
  GroupMap merged;
  Diagnostics total;
  const auto n_messages = static_cast<std::int64_t>(log.messages.size());

#pragma omp parallel
  {
    GroupMap local;
    Diagnostics local_diag;
#pragma omp for schedule(static)
    for (std::int64_t i = 0; i < n_messages; ++i)
      extract_message(log.messages[static_cast<std::size_t>(i)], net, local, local_diag);
#pragma omp critical(infsus_extract_merge)
    {
      merge_into(merged, std::move(local));
      total += local_diag;
    }
  }

  if (diag) *diag += total;
  std::vector<ExposureGroup> groups;
  groups.reserve(merged.size());
  for (auto& [key, acc] : merged) {
    ExposureGroup g;
    g.target = key.target;
    g.mode = key.mode;
    g.successes = acc.successes;
    g.failures = acc.failures;
    g.choices.assign(g.mode.size(), 0);
    for (const auto& [u, c] : acc.choices) g.choices[g.mode.index_of(u)] = c;
    groups.push_back(std::move(g));
  }
  return ExposureTable(std::move(groups));
}

}  // namespace infsus
