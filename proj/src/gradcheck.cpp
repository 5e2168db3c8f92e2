#include "mwafm/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "mwafm/error.hpp"
#include "mwafm/model.hpp"

namespace mwafm {

double gradient_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

Batch random_probe_batch(const ModelConfig& config, std::size_t batch, std::size_t classes, std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x9c4eu};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal(0.0, 1.0);
  Batch b;
  b.audio = Tensor({batch, config.audio_len, config.audio_dim});
  b.question = Tensor({batch, config.question_len, config.question_dim}, 0.0);
  b.audio_valid.assign(batch, ValidMask(config.audio_len, true));
  for (double& v : b.audio.data()) v = normal(rng);
  for (std::size_t i = 0; i < batch; ++i) {
    const std::size_t valid = std::max<std::size_t>(1, config.question_len - std::min(i, config.question_len - 1));
    ValidMask mask(config.question_len, false);
    for (std::size_t t = 0; t < valid; ++t) {
      mask[t] = true;
      for (std::size_t c = 0; c < config.question_dim; ++c) {
        b.question[(i * config.question_len + t) * config.question_dim + c] = normal(rng);
      }
    }
    b.question_valid.push_back(std::move(mask));
    b.labels.push_back(std::uniform_int_distribution<std::size_t>(0, classes - 1)(rng));
  }
  return b;
}

GradCheckReport grad_check(const ModelConfig& config, const GradCheckConfig& options, std::uint64_t seed) {
  ParamStore params = init_params(config, options.classes, seed);
  // Move biases and norm affines off their trivial initial values.
  {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), 0x51u};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> jitter(0.0, 0.1);
    for (auto& [path, t] : params) {
      if (t.rank() == 1) {
        for (double& v : t.data()) v += jitter(rng);
      }
    }
  }
  const Batch batch = random_probe_batch(config, options.batch, options.classes, seed);
  Rng unused(0);

  auto loss_at = [&](const ParamStore& store) {
    Tape tape;
    ParamBinder binder(store, tape, false);
    return cross_entropy_mean(model_forward(config, binder, batch, false, unused), batch.labels).value().item();
  };

  Gradients analytic;
  {
    Tape tape;
    ParamBinder binder(params, tape, true);
    const Var loss = cross_entropy_mean(model_forward(config, binder, batch, false, unused), batch.labels);
    tape.backward(loss);
    analytic = binder.gradients();
  }

  std::seed_seq seq{static_cast<std::uint32_t>(seed), 0xc0u};
  std::mt19937_64 pick(seq);
  GradCheckReport report;
  auto selected = [&](const std::string& path) {
    if (options.paths.empty()) return true;
    return std::any_of(options.paths.begin(), options.paths.end(),
                       [&](const std::string& prefix) { return path.rfind(prefix, 0) == 0; });
  };
  for (auto& [path, tensor] : params) {
    if (!selected(path)) continue;
    auto g = analytic.find(path);
    if (g == analytic.end()) throw Error("grad_check: no gradient reached '" + path + "'");
    std::vector<std::size_t> coords(tensor.numel());
    for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
    std::shuffle(coords.begin(), coords.end(), pick);
    coords.resize(std::min(coords.size(), options.coords));

    PathCheck check{path, coords.size(), 0.0, 0.0};
    for (std::size_t idx : coords) {
      const double original = tensor[idx];
      tensor[idx] = original + options.eps;
      const double up = loss_at(params);
      tensor[idx] = original - options.eps;
      const double down = loss_at(params);
      tensor[idx] = original;
      const double numeric = (up - down) / (2.0 * options.eps);
      const double a = g->second[idx];
      check.max_abs = std::max(check.max_abs, std::abs(a - numeric));
      check.max_error = std::max(check.max_error, gradient_error(a, numeric, options.floor));
    }
    if (check.max_error >= report.max_error) {
      report.max_error = check.max_error;
      report.worst_path = path;
    }
    report.paths.push_back(std::move(check));
  }
  if (report.paths.empty()) throw ValidationError("grad_check: no parameter path matches gradcheck.paths");
  return report;
}

}  // namespace mwafm
