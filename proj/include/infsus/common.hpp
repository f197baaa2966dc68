#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace infsus {

/// Dense index of an individual. String identifiers from input files are
/// interned into a NodeNames table shared by every log of one experiment.
using NodeId = std::uint32_t;

using Count = std::uint64_t;

// Error categories map onto CLI exit codes (2, 3, 4).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NodeNames {
 public:
  NodeId intern(std::string_view name);
  std::optional<NodeId> find(std::string_view name) const;
  const std::string& name(NodeId id) const { return names_.at(id); }
  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

  // Names "0", "1", ..., "n-1" in id order.
  static NodeNames numbered(std::size_t n);

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, NodeId> index_;
};

/// Stream seed for a named component. Mixing the component name into the
/// global seed keeps each component's random stream independent of which
/// other components run.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view component,
                          std::uint64_t index = 0);

}  // namespace infsus
