#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace clp {

// Row-major so that one row is one node's embedding.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;
using RowVec = Eigen::RowVectorXd;

using NodeIndex = std::int32_t;
using NodePair = std::pair<NodeIndex, NodeIndex>;

inline NodePair normalized(NodeIndex a, NodeIndex b) {
  return a <= b ? NodePair{a, b} : NodePair{b, a};
}

// Set of unordered node pairs.
class LinkSet {
 public:
  static std::uint64_t key(NodeIndex a, NodeIndex b) {
    const auto [lo, hi] = normalized(a, b);
    return (static_cast<std::uint64_t>(lo) << 32) | static_cast<std::uint32_t>(hi);
  }
  bool insert(NodeIndex a, NodeIndex b) { return keys_.insert(key(a, b)).second; }
  bool contains(NodeIndex a, NodeIndex b) const { return keys_.contains(key(a, b)); }
  std::size_t size() const { return keys_.size(); }

 private:
  std::unordered_set<std::uint64_t> keys_;
};

// Error categories map one-to-one onto CLI exit codes.
enum class ErrorKind { kUsage = 1, kData = 2, kNumeric = 3 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string tag, const std::string& what)
      : std::runtime_error(what), kind_(kind), tag_(std::move(tag)) {}

  ErrorKind kind() const { return kind_; }
  // Short machine-readable reason, e.g. "parse_error".
  const std::string& tag() const { return tag_; }

 private:
  ErrorKind kind_;
  std::string tag_;
};

#define CLP_DEFINE_ERROR(Name, kind, tag)                     \
  class Name : public Error {                                 \
   public:                                                    \
    explicit Name(const std::string& what)                    \
        : Error(ErrorKind::kind, tag, what) {}                \
  };

CLP_DEFINE_ERROR(UsageError, kUsage, "usage_error")
CLP_DEFINE_ERROR(ConfigError, kUsage, "config_error")
CLP_DEFINE_ERROR(ParseError, kData, "parse_error")
CLP_DEFINE_ERROR(SchemaConflictError, kData, "schema_conflict")
CLP_DEFINE_ERROR(InsufficientSpanError, kData, "insufficient_temporal_span")
CLP_DEFINE_ERROR(NegativeExhaustionError, kData, "negative_exhaustion")
CLP_DEFINE_ERROR(LookupError, kData, "lookup_error")
CLP_DEFINE_ERROR(IntegrityError, kData, "integrity_error")
CLP_DEFINE_ERROR(UnsupportedVersionError, kData, "unsupported_version")
CLP_DEFINE_ERROR(IoError, kData, "io_error")
CLP_DEFINE_ERROR(ParameterError, kUsage, "parameter_error")
CLP_DEFINE_ERROR(UndefinedMetricError, kData, "undefined_metric")
CLP_DEFINE_ERROR(NumericError, kNumeric, "numeric_error")

#undef CLP_DEFINE_ERROR

// Seeded generator with portable draws. The distributions are spelled out
// here rather than taken from <random> because the standard leaves their
// algorithms unspecified, and checkpoints must match across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform on [0, n), unbiased.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t v;
    do {
      v = engine_();
    } while (v >= limit);
    return v % n;
  }

  bool bernoulli(double p) { return uniform() < p; }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[below(i)]);
    }
  }

  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log(1 + exp(x)) without overflow.
inline double softplus(double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

}  // namespace clp
