#include "luxsched/policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <numeric>
#include <random>

namespace luxsched {

using nlohmann::json;

std::vector<double> FeatureVector::flatten() const {
  std::vector<double> out;
  out.reserve(stats.size() + histogram.size() + prev_action.size());
  out.insert(out.end(), stats.begin(), stats.end());
  out.insert(out.end(), histogram.begin(), histogram.end());
  out.insert(out.end(), prev_action.begin(), prev_action.end());
  return out;
}

FeatureVector extract_features(const LinearImage& frame, std::size_t prev_index, std::size_t levels) {
  if (prev_index >= levels) throw ValidationError("previous level index out of range");
  const LuminanceStats st = luminance_stats(frame);
  FeatureVector f;
  f.stats = {st.mean_luminance, st.saturated_fraction, st.dark_fraction, st.gradient_energy};
  f.histogram = luminance_histogram<kHistogramBins>(frame);
  f.prev_action.assign(levels, 0.0);
  f.prev_action[prev_index] = 1.0;
  return f;
}

void SupervisionSet::append(const SupervisionSet& other) {
  if (levels == 0) levels = other.levels;
  if (other.levels != levels) throw ValidationError("supervision sets use different grids");
  samples.insert(samples.end(), other.samples.begin(), other.samples.end());
}

SupervisionSet build_supervision(const FrameSource& frames, std::span<const std::size_t> oracle,
                                 std::span<const std::size_t> strides, std::size_t levels,
                                 FrameProvenance provenance, std::size_t sequence_id) {
  const std::size_t length = oracle.size();
  if (strides.empty()) throw ValidationError("at least one stride is required");
  for (std::size_t s : strides) {
    if (s == 0) throw ValidationError("strides must be >= 1");
    if (s >= length) throw ValidationError("stride must be smaller than the sequence length");
  }
  for (std::size_t k : oracle) {
    if (k >= levels) throw ValidationError("oracle schedule index out of range");
  }
  SupervisionSet set;
  set.levels = levels;
  for (std::size_t s : strides) {
    for (std::size_t t = s; t < length; ++t) {
      SupervisionSample sample;
      sample.sequence = sequence_id;
      sample.frame = t;
      sample.stride = s;
      sample.prev_action = oracle[t - s];
      sample.action = oracle[t];
      const std::size_t shown = provenance == FrameProvenance::HoldOver ? oracle[t - s] : oracle[t];
      sample.features = extract_features(frames(t, shown), sample.prev_action, levels).flatten();
      set.samples.push_back(std::move(sample));
    }
  }
  return set;
}

std::size_t NetworkShape::parameter_count() const {
  if (hidden == 0) return (inputs + 1) * outputs;
  return (inputs + 1) * hidden + (hidden + 1) * outputs;
}

namespace {

// Affine layer: out[j] = bias[j] + sum_i in[i] * w[i][j].
void affine(std::span<const double> w, std::size_t n_in, std::size_t n_out, std::span<const double> in,
            std::span<double> out) {
  const double* bias = w.data() + n_in * n_out;
  for (std::size_t j = 0; j < n_out; ++j) out[j] = bias[j];
  for (std::size_t i = 0; i < n_in; ++i) {
    const double x = in[i];
    const double* row = w.data() + i * n_out;
    for (std::size_t j = 0; j < n_out; ++j) out[j] += x * row[j];
  }
}

double log_sum_exp(std::span<const double> v) {
  const double m = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

}  // namespace

void network_logits(const NetworkShape& shape, std::span<const double> params, std::span<const double> input,
                    std::span<double> logits) {
  if (shape.hidden == 0) {
    affine(params, shape.inputs, shape.outputs, input, logits);
    return;
  }
  std::vector<double> h(shape.hidden);
  affine(params.first((shape.inputs + 1) * shape.hidden), shape.inputs, shape.hidden, input, h);
  for (double& v : h) v = std::tanh(v);
  affine(params.subspan((shape.inputs + 1) * shape.hidden), shape.hidden, shape.outputs, h, logits);
}

double cross_entropy(const NetworkShape& shape, std::span<const double> params, std::span<const double> inputs,
                     std::span<const std::size_t> labels, std::span<double> gradient) {
  const std::size_t n = labels.size();
  if (n == 0) throw ValidationError("cross_entropy needs at least one sample");
  if (params.size() != shape.parameter_count()) throw DimensionMismatchError("parameter count mismatch");
  if (inputs.size() != n * shape.inputs) throw DimensionMismatchError("input matrix shape mismatch");
  const bool want_grad = !gradient.empty();
  if (want_grad) {
    if (gradient.size() != params.size()) throw DimensionMismatchError("gradient buffer shape mismatch");
    std::fill(gradient.begin(), gradient.end(), 0.0);
  }

  const std::size_t d = shape.inputs;
  const std::size_t hdim = shape.hidden;
  const std::size_t k = shape.outputs;
  const std::size_t w1_size = hdim == 0 ? 0 : (d + 1) * hdim;
  const auto w1 = params.first(w1_size);
  const auto w2 = params.subspan(w1_size);

  std::vector<double> h(hdim), logits(k), dlogit(k), dh(hdim);
  double total = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    const auto x = inputs.subspan(s * d, d);
    const std::size_t y = labels[s];
    if (y >= k) throw ValidationError("label outside the action set");
    std::span<const double> last = x;
    std::size_t last_dim = d;
    if (hdim > 0) {
      affine(w1, d, hdim, x, h);
      for (double& v : h) v = std::tanh(v);
      last = h;
      last_dim = hdim;
    }
    affine(w2, last_dim, k, last, logits);
    const double lse = log_sum_exp(logits);
    total += lse - logits[y];
    if (!want_grad) continue;

    for (std::size_t j = 0; j < k; ++j) dlogit[j] = std::exp(logits[j] - lse);
    dlogit[y] -= 1.0;
    double* g2 = gradient.data() + w1_size;
    for (std::size_t i = 0; i < last_dim; ++i) {
      for (std::size_t j = 0; j < k; ++j) g2[i * k + j] += last[i] * dlogit[j];
    }
    for (std::size_t j = 0; j < k; ++j) g2[last_dim * k + j] += dlogit[j];

    if (hdim > 0) {
      for (std::size_t m = 0; m < hdim; ++m) {
        double acc = 0.0;
        for (std::size_t j = 0; j < k; ++j) acc += w2[m * k + j] * dlogit[j];
        dh[m] = acc * (1.0 - h[m] * h[m]);
      }
      double* g1 = gradient.data();
      for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t m = 0; m < hdim; ++m) g1[i * hdim + m] += x[i] * dh[m];
      }
      for (std::size_t m = 0; m < hdim; ++m) g1[d * hdim + m] += dh[m];
    }
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  if (want_grad) {
    for (double& g : gradient) g *= inv_n;
  }
  return total * inv_n;
}

namespace {

NetworkShape shape_of(const PolicyModel& m) { return {m.inputs(), m.hidden, m.outputs()}; }

std::vector<double> normalize(const PolicyModel& m, std::span<const double> raw) {
  std::vector<double> x(m.inputs());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const std::size_t src = m.feature_index[i];
    if (src >= raw.size()) throw DimensionMismatchError("feature vector shorter than the model expects");
    x[i] = (raw[src] - m.feature_mean[i]) / m.feature_std[i];
  }
  return x;
}

// Uniform double in [0, 1) from the top 53 bits; portable across standard libraries.
double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::size_t argmax_lowest(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < v.size(); ++j) {
    if (v[j] > v[best]) best = j;
  }
  return best;
}

}  // namespace

TrainResult train(const SupervisionSet& supervision, const IntensityGrid& grid, const TrainConfig& config) {
  const auto& samples = supervision.samples;
  if (samples.empty()) throw ValidationError("cannot train on empty supervision");
  if (config.batch == 0) throw ValidationError("batch size must be >= 1");
  if (!(config.learning_rate > 0.0) || !std::isfinite(config.learning_rate)) {
    throw ValidationError("learning rate must be positive");
  }
  const std::size_t raw_dim = samples.front().features.size();
  const std::size_t n = samples.size();
  for (const auto& s : samples) {
    if (s.features.size() != raw_dim) throw DimensionMismatchError("supervision features differ in length");
    if (s.action >= grid.size()) throw ValidationError("supervision label outside the grid");
  }

  TrainResult result;
  PolicyModel& model = result.model;
  model.grid = grid;
  model.hidden = config.hidden;
  model.seed = config.seed;
  model.epochs = config.epochs;

  for (std::size_t i = 0; i < raw_dim; ++i) {
    double mean = 0.0;
    for (const auto& s : samples) mean += s.features[i];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (const auto& s : samples) var += (s.features[i] - mean) * (s.features[i] - mean);
    const double sd = std::sqrt(var / static_cast<double>(n));
    if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) {
      result.dropped_features.push_back(i);
      continue;
    }
    model.feature_index.push_back(i);
    model.feature_mean.push_back(mean);
    model.feature_std.push_back(sd);
  }

  const NetworkShape shape = shape_of(model);
  const std::size_t d = shape.inputs;
  std::vector<double> inputs(n * d);
  std::vector<std::size_t> labels(n);
  for (std::size_t s = 0; s < n; ++s) {
    const auto x = normalize(model, samples[s].features);
    std::copy(x.begin(), x.end(), inputs.begin() + static_cast<std::ptrdiff_t>(s * d));
    labels[s] = samples[s].action;
  }

  std::mt19937_64 rng(config.seed);
  model.weights.assign(shape.parameter_count(), 0.0);
  if (shape.hidden > 0) {
    // Glorot-uniform init for both layers; biases stay zero
    auto init = [&](std::size_t offset, std::size_t fan_in, std::size_t fan_out) {
      const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
      for (std::size_t i = 0; i < fan_in * fan_out; ++i) model.weights[offset + i] = a * (2.0 * unit_uniform(rng) - 1.0);
    };
    init(0, d, shape.hidden);
    init((d + 1) * shape.hidden, shape.hidden, shape.outputs);
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> grad(model.weights.size());
  std::vector<double> batch_x;
  std::vector<std::size_t> batch_y;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    // Fisher-Yates with our own index draw so the permutation is library-independent
    for (std::size_t i = n; i > 1; --i) {
      const auto j = static_cast<std::size_t>(unit_uniform(rng) * static_cast<double>(i));
      std::swap(order[i - 1], order[std::min(j, i - 1)]);
    }
    for (std::size_t start = 0; start < n; start += config.batch) {
      const std::size_t end = std::min(n, start + config.batch);
      batch_x.resize((end - start) * d);
      batch_y.resize(end - start);
      for (std::size_t b = start; b < end; ++b) {
        std::copy_n(inputs.begin() + static_cast<std::ptrdiff_t>(order[b] * d), d,
                    batch_x.begin() + static_cast<std::ptrdiff_t>((b - start) * d));
        batch_y[b - start] = labels[order[b]];
      }
      cross_entropy(shape, model.weights, batch_x, batch_y, grad);
      for (std::size_t i = 0; i < grad.size(); ++i) model.weights[i] -= config.learning_rate * grad[i];
    }
    result.loss_history.push_back(cross_entropy(shape, model.weights, inputs, labels, {}));
  }

  result.loss = config.epochs > 0 ? result.loss_history.back() : cross_entropy(shape, model.weights, inputs, labels, {});
  model.loss = result.loss;
  std::size_t correct = 0;
  std::vector<double> logits(shape.outputs);
  for (std::size_t s = 0; s < n; ++s) {
    network_logits(shape, model.weights, std::span<const double>(inputs).subspan(s * d, d), logits);
    if (argmax_lowest(logits) == labels[s]) ++correct;
  }
  result.accuracy = static_cast<double>(correct) / static_cast<double>(n);
  return result;
}

std::vector<double> policy_logits(const PolicyModel& model, std::span<const double> raw_features) {
  const auto x = normalize(model, raw_features);
  std::vector<double> logits(model.outputs());
  network_logits(shape_of(model), model.weights, x, logits);
  return logits;
}

std::vector<double> policy_probabilities(const PolicyModel& model, std::span<const double> raw_features) {
  auto p = policy_logits(model, raw_features);
  const double lse = log_sum_exp(p);
  for (double& v : p) v = std::exp(v - lse);
  return p;
}

std::size_t predict_features(const PolicyModel& model, std::span<const double> raw_features) {
  return argmax_lowest(policy_logits(model, raw_features));
}

std::size_t predict(const PolicyModel& model, const LinearImage& frame, std::size_t prev_index) {
  return predict_features(model, extract_features(frame, prev_index, model.grid.size()).flatten());
}

PolicyModel zero_policy(const IntensityGrid& grid) {
  PolicyModel m;
  m.grid = grid;
  const std::size_t dim = feature_dimension(grid.size());
  for (std::size_t i = 0; i < dim; ++i) {
    m.feature_index.push_back(i);
    m.feature_mean.push_back(0.0);
    m.feature_std.push_back(1.0);
  }
  m.weights.assign(NetworkShape{dim, 0, grid.size()}.parameter_count(), 0.0);
  return m;
}

namespace policy_io {

void save(const std::filesystem::path& path, const PolicyModel& m) {
  json j = {{"grid", m.grid.levels()},
            {"feature_index", m.feature_index},
            {"feature_mean", m.feature_mean},
            {"feature_std", m.feature_std},
            {"weights", m.weights},
            {"metadata", {{"seed", m.seed}, {"epochs", m.epochs}, {"loss", m.loss}}}};
  if (m.hidden > 0) j["hidden"] = m.hidden;
  std::ofstream out(path);
  if (!out) throw IoError("cannot create " + path.string());
  out << j.dump() << '\n';
}

PolicyModel load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  PolicyModel m;
  try {
    const json j = json::parse(in);
    m.grid = IntensityGrid(j.at("grid").get<std::vector<double>>());
    m.feature_index = j.at("feature_index").get<std::vector<std::size_t>>();
    m.feature_mean = j.at("feature_mean").get<std::vector<double>>();
    m.feature_std = j.at("feature_std").get<std::vector<double>>();
    m.weights = j.at("weights").get<std::vector<double>>();
    m.hidden = j.value("hidden", std::size_t{0});
    if (j.contains("metadata")) {
      const auto& meta = j.at("metadata");
      m.seed = meta.value("seed", std::uint64_t{0});
      m.epochs = meta.value("epochs", std::size_t{0});
      m.loss = meta.value("loss", 0.0);
    }
  } catch (const json::exception& e) {
    throw IoError("malformed policy model " + path.string() + ": " + e.what());
  }
  if (m.feature_mean.size() != m.feature_index.size() || m.feature_std.size() != m.feature_index.size()) {
    throw ValidationError("policy normalization arrays disagree in length");
  }
  for (double sd : m.feature_std) {
    if (!(sd > 0.0)) throw ValidationError("policy feature_std must be positive");
  }
  if (m.weights.size() != shape_of(m).parameter_count()) {
    throw ValidationError("policy weight count does not match its shape");
  }
  return m;
}

}  // namespace policy_io

}  // namespace luxsched
