#include "mwafm/params.hpp"

#include <cmath>
#include <random>

#include "mwafm/error.hpp"

namespace mwafm {

namespace {

std::string scale_prefix(std::size_t i) { return "mwam.scale" + std::to_string(i); }

std::size_t parameter_sets(const ModelConfig& config) {
  return config.share_scale_params ? 1 : config.mwam.windows.size();
}

}  // namespace

std::map<std::string, Shape> param_shapes(const ModelConfig& config, std::size_t num_classes) {
  const std::size_t d = config.d;
  std::map<std::string, Shape> shapes{
      {"audio_in.w", {config.audio_dim, d}},
      {"audio_in.b", {d}},
      {"question_in.w", {config.question_dim, d}},
      {"question_in.b", {d}},
      {"head.w", {d, num_classes}},
      {"head.b", {num_classes}},
  };
  if (config.uses_mwam()) {
    for (std::size_t i = 0; i < parameter_sets(config); ++i) {
      const auto p = scale_prefix(i);
      for (const char* block : {".self.", ".readout."}) {
        for (const char* w : {"wq", "wk", "wv", "wo"}) shapes[p + block + w] = {d, d};
      }
      shapes[p + ".proj.w"] = {d, d};
      shapes[p + ".proj.b"] = {d};
    }
    shapes["mwam.audio_proj.w"] = {d, d};
    shapes["mwam.audio_proj.b"] = {d};
    shapes["mwam.norm.gamma"] = {d};
    shapes["mwam.norm.beta"] = {d};
  }
  return shapes;
}

std::size_t expected_param_count(const ModelConfig& config, std::size_t num_classes) {
  const std::size_t d = config.d;
  std::size_t n = (config.audio_dim + 1) * d + (config.question_dim + 1) * d + (d + 1) * num_classes;
  if (config.uses_mwam()) n += parameter_sets(config) * (8 * d * d + d * d + d) + (d * d + d) + 2 * d;
  return n;
}

std::size_t param_count(const ParamStore& params) {
  std::size_t n = 0;
  for (const auto& [path, t] : params) n += t.numel();
  return n;
}

ParamStore init_params(const ModelConfig& config, std::size_t num_classes, std::uint64_t seed) {
  config.validate();
  if (num_classes < 2) throw ValidationError("answer head needs at least 2 classes");
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x1417u};
  std::mt19937_64 rng(seq);
  ParamStore store;
  // Map order makes the draw sequence a function of the paths alone.
  for (const auto& [path, shape] : param_shapes(config, num_classes)) {
    Tensor t(shape, 0.0);
    if (path.ends_with(".gamma")) {
      for (double& v : t.data()) v = 1.0;
    } else if (shape.size() == 2) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(shape[0]));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (double& v : t.data()) v = dist(rng);
    }
    store.emplace(path, std::move(t));
  }
  return store;
}

Var ParamBinder::operator()(const std::string& path) {
  if (auto it = bound_.find(path); it != bound_.end()) return it->second;
  auto it = store_.find(path);
  if (it == store_.end()) throw Error("parameter '" + path + "' is not in the registry");
  Var v = track_ ? tape_.variable(it->second) : tape_.constant(it->second);
  bound_.emplace(path, v);
  return v;
}

MhaParams ParamBinder::mha(const std::string& prefix, std::size_t num_heads) {
  return {(*this)(prefix + ".wq"), (*this)(prefix + ".wk"), (*this)(prefix + ".wv"), (*this)(prefix + ".wo"),
          num_heads};
}

LinearParams ParamBinder::linear(const std::string& prefix) { return {(*this)(prefix + ".w"), (*this)(prefix + ".b")}; }

MwamParams ParamBinder::mwam(const ModelConfig& config) {
  MwamParams p;
  for (std::size_t i = 0; i < config.mwam.windows.size(); ++i) {
    const auto prefix = scale_prefix(config.share_scale_params ? 0 : i);
    p.scales.push_back({mha(prefix + ".self", config.heads), mha(prefix + ".readout", config.heads),
                        linear(prefix + ".proj")});
  }
  p.audio_projection = linear("mwam.audio_proj");
  p.norm_gamma = (*this)("mwam.norm.gamma");
  p.norm_beta = (*this)("mwam.norm.beta");
  return p;
}

AnswerHeadParams ParamBinder::head() { return {(*this)("head.w"), (*this)("head.b")}; }

Gradients ParamBinder::gradients() const {
  Gradients g;
  for (const auto& [path, v] : bound_) g.emplace(path, tape_.grad(v));
  return g;
}

}  // namespace mwafm
