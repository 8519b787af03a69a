#pragma once
//
// Small fully connected Q-network: ReLU hidden layers, linear output,
// squared-error loss on the taken action only, Adam updates.
//

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "error.hpp"

namespace reconplan {

inline constexpr std::string_view kCheckpointFormat = "reconplan-mlp";
inline constexpr int kCheckpointVersion = 1;

struct Layer {
  Eigen::MatrixXd weights;  // out x in
  Eigen::VectorXd bias;     // out
};

// One optimisation batch. Column b of `inputs` is sample b; only output
// `actions[b]` enters the loss, against `targets[b]`.
struct TrainBatch {
  Eigen::MatrixXd inputs;
  Eigen::VectorXd targets;
  std::vector<int> actions;
};

class Mlp {
public:
  Mlp() = default;

  // He-style uniform initialisation, U(-sqrt(6/fan_in), sqrt(6/fan_in)), zero biases.
  Mlp(std::vector<int> widths, std::uint64_t seed) : widths_(std::move(widths)) {
    if (widths_.size() < 2) throw ValidationError("network needs at least an input and an output width");
    for (int w : widths_)
      if (w <= 0) throw ValidationError("layer widths must be positive");
    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
      const int in = widths_[l], out = widths_[l + 1];
      const double bound = std::sqrt(6.0 / in);
      std::uniform_real_distribution<double> dist(-bound, bound);
      Layer layer{Eigen::MatrixXd(out, in), Eigen::VectorXd::Zero(out)};
      for (int r = 0; r < out; ++r)
        for (int c = 0; c < in; ++c) layer.weights(r, c) = dist(rng);
      layers_.push_back(std::move(layer));
    }
  }

  static Mlp zeros(std::vector<int> widths) {
    Mlp net(widths, 0);
    for (auto& l : net.layers_) {
      l.weights.setZero();
      l.bias.setZero();
    }
    return net;
  }

  const std::vector<int>& widths() const noexcept { return widths_; }
  int input_size() const { return widths_.front(); }
  int output_size() const { return widths_.back(); }
  std::vector<Layer>& layers() noexcept { return layers_; }
  const std::vector<Layer>& layers() const noexcept { return layers_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
    return n;
  }

  bool same_architecture(const Mlp& o) const { return widths_ == o.widths_; }

  bool finite() const {
    for (const auto& l : layers_)
      if (!l.weights.allFinite() || !l.bias.allFinite()) return false;
    return true;
  }

  // Q-values for a batch (columns are samples).
  Eigen::MatrixXd forward(const Eigen::MatrixXd& inputs) const {
    if (inputs.rows() != input_size())
      throw ValidationError("input has " + std::to_string(inputs.rows()) + " features, network expects " +
                            std::to_string(input_size()));
    Eigen::MatrixXd a = inputs;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      Eigen::MatrixXd z = (layers_[l].weights * a).colwise() + layers_[l].bias;
      a = (l + 1 < layers_.size()) ? Eigen::MatrixXd(z.cwiseMax(0.0)) : z;
    }
    return a;
  }

  Eigen::VectorXd forward(std::span<const double> input) const {
    Eigen::Map<const Eigen::VectorXd> x(input.data(), static_cast<Eigen::Index>(input.size()));
    return forward(Eigen::MatrixXd(x)).col(0);
  }

  // Mean squared error on the taken actions and its gradient (same layout as layers()).
  double loss_and_gradient(const TrainBatch& batch, std::vector<Layer>& grad) const {
    const auto n = batch.inputs.cols();
    if (n < 1) throw ValidationError("empty batch");
    if (batch.targets.size() != n || static_cast<Eigen::Index>(batch.actions.size()) != n)
      throw ValidationError("batch inputs, targets and actions disagree in size");
    if (!batch.inputs.allFinite() || !batch.targets.allFinite()) throw ValidationError("non-finite values in batch");
    for (int a : batch.actions)
      if (a < 0 || a >= output_size()) throw ValidationError("action index outside the output layer");
    if (batch.inputs.rows() != input_size()) throw ValidationError("batch feature count does not match the network");

    std::vector<Eigen::MatrixXd> acts{batch.inputs};
    std::vector<Eigen::MatrixXd> pre;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      pre.push_back((layers_[l].weights * acts.back()).colwise() + layers_[l].bias);
      acts.push_back(l + 1 < layers_.size() ? Eigen::MatrixXd(pre.back().cwiseMax(0.0)) : pre.back());
    }

    const Eigen::MatrixXd& q = acts.back();
    Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(q.rows(), n);
    double loss = 0.0;
    for (Eigen::Index b = 0; b < n; ++b) {
      const double err = q(batch.actions[b], b) - batch.targets[b];
      loss += err * err;
      delta(batch.actions[b], b) = 2.0 * err / static_cast<double>(n);
    }
    loss /= static_cast<double>(n);

    grad.resize(layers_.size());
    for (std::size_t l = layers_.size(); l-- > 0;) {
      grad[l].weights = delta * acts[l].transpose();
      grad[l].bias = delta.rowwise().sum();
      if (l > 0) {
        Eigen::MatrixXd back = layers_[l].weights.transpose() * delta;
        delta = back.cwiseProduct((pre[l - 1].array() > 0.0).cast<double>().matrix());
      }
    }
    return loss;
  }

private:
  std::vector<int> widths_;
  std::vector<Layer> layers_;
};

struct AdamState {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  long step = 0;
  std::vector<Layer> first;
  std::vector<Layer> second;
};

// One Adam step on the batch; returns the pre-update loss.
inline double train_step(Mlp& net, AdamState& opt, const TrainBatch& batch) {
  std::vector<Layer> grad;
  const double loss = net.loss_and_gradient(batch, grad);
  if (!std::isfinite(loss)) throw Error("training diverged: non-finite loss");

  auto& layers = net.layers();
  if (opt.first.size() != layers.size()) {
    opt.first.clear();
    opt.second.clear();
    for (const auto& l : layers) {
      opt.first.push_back({Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()), Eigen::VectorXd::Zero(l.bias.size())});
      opt.second.push_back(opt.first.back());
    }
  }
  ++opt.step;
  const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step));
  const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step));
  const double b1 = opt.beta1, b2 = opt.beta2, lr = opt.learning_rate, eps = opt.epsilon;
  auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  };
  for (std::size_t l = 0; l < layers.size(); ++l) {
    update(layers[l].weights, opt.first[l].weights, opt.second[l].weights, grad[l].weights);
    update(layers[l].bias, opt.first[l].bias, opt.second[l].bias, grad[l].bias);
  }
  return loss;
}

inline void copy_parameters(const Mlp& source, Mlp& dest) {
  if (!source.same_architecture(dest)) throw ValidationError("cannot copy parameters between different architectures");
  dest.layers() = source.layers();
}

// Checkpoint layout: {"format","version","widths":[...],"layers":[{"weights": row-major rows, "bias": [...]}]}
inline nlohmann::json checkpoint_to_json(const Mlp& net) {
  nlohmann::json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  j["widths"] = net.widths();
  j["layers"] = nlohmann::json::array();
  for (const auto& l : net.layers()) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
      std::vector<double> row(static_cast<std::size_t>(l.weights.cols()));
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) row[static_cast<std::size_t>(c)] = l.weights(r, c);
      rows.push_back(row);
    }
    j["layers"].push_back({{"weights", rows}, {"bias", std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size())}});
  }
  return j;
}

inline Mlp checkpoint_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != kCheckpointFormat || j.value("version", 0) != kCheckpointVersion)
    throw ValidationError("not a version-1 network checkpoint");
  auto net = Mlp::zeros(j.at("widths").get<std::vector<int>>());
  const auto& layers = j.at("layers");
  if (layers.size() != net.layers().size()) throw ValidationError("checkpoint layer count mismatch");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    auto& dst = net.layers()[l];
    const auto& rows = layers[l].at("weights");
    if (static_cast<Eigen::Index>(rows.size()) != dst.weights.rows()) throw ValidationError("checkpoint weight shape mismatch");
    for (Eigen::Index r = 0; r < dst.weights.rows(); ++r) {
      auto row = rows[static_cast<std::size_t>(r)].get<std::vector<double>>();
      if (static_cast<Eigen::Index>(row.size()) != dst.weights.cols()) throw ValidationError("checkpoint weight shape mismatch");
      for (Eigen::Index c = 0; c < dst.weights.cols(); ++c) dst.weights(r, c) = row[static_cast<std::size_t>(c)];
    }
    auto bias = layers[l].at("bias").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(bias.size()) != dst.bias.size()) throw ValidationError("checkpoint bias shape mismatch");
    for (std::size_t i = 0; i < bias.size(); ++i) dst.bias[static_cast<Eigen::Index>(i)] = bias[i];
  }
  if (!net.finite()) throw ValidationError("checkpoint holds non-finite parameters");
  return net;
}

inline void save_checkpoint(const Mlp& net, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write checkpoint '" + path.string() + "'");
  out << checkpoint_to_json(net).dump() << '\n';
}

inline Mlp load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open checkpoint '" + path.string() + "'");
  return checkpoint_from_json(nlohmann::json::parse(in));
}

}  // namespace reconplan
