#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>

#include "mwafm/config.hpp"
#include "mwafm/head.hpp"
#include "mwafm/mwam.hpp"
#include "mwafm/tape.hpp"

namespace mwafm {

/// Every learnable tensor of the model keyed by a stable dotted path.
using ParamStore = std::map<std::string, Tensor>;
using Gradients = std::map<std::string, Tensor>;

/// Registry paths and shapes implied by a configuration.
std::map<std::string, Shape> param_shapes(const ModelConfig& config, std::size_t num_classes);

/// Closed-form count of scalar parameters.
std::size_t expected_param_count(const ModelConfig& config, std::size_t num_classes);
std::size_t param_count(const ParamStore& params);

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases, unit
/// gamma, zero beta.
ParamStore init_params(const ModelConfig& config, std::size_t num_classes, std::uint64_t seed);

/// Binds store entries to one tape on first use.
class ParamBinder {
 public:
  /// With `track_gradients` the parameters become tape variables.
  ParamBinder(const ParamStore& store, Tape& tape, bool track_gradients)
      : store_(store), tape_(tape), track_(track_gradients) {}

  Var operator()(const std::string& path);
  Tape& tape() noexcept { return tape_; }

  MhaParams mha(const std::string& prefix, std::size_t num_heads);
  LinearParams linear(const std::string& prefix);
  MwamParams mwam(const ModelConfig& config);
  AnswerHeadParams head();

  /// Gradient of every bound path; call after `Tape::backward`.
  Gradients gradients() const;
  const std::map<std::string, Var>& bound() const noexcept { return bound_; }

 private:
  const ParamStore& store_;
  Tape& tape_;
  bool track_;
  std::map<std::string, Var> bound_;
};

}  // namespace mwafm
