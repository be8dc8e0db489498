#include "warfarin/net.hpp"

#include <cmath>

#include "warfarin/common.hpp"

namespace warfarin {

namespace {

Eigen::MatrixXd apply_activation(const Eigen::MatrixXd& z, Activation act) {
  if (act == Activation::kRelu) return z.cwiseMax(0.0);
  return z;
}

const char* activation_name(Activation a) { return a == Activation::kRelu ? "relu" : "linear"; }

Activation activation_from_name(const std::string& s) {
  if (s == "relu") return Activation::kRelu;
  if (s == "linear") return Activation::kLinear;
  throw DomainError("unknown activation: " + s);
}

}  // namespace

void Gradients::add_scaled(const Gradients& other, double scale) {
  for (std::size_t i = 0; i < weights.size(); ++i) {
    weights[i] += scale * other.weights[i];
    bias[i] += scale * other.bias[i];
  }
}

void Gradients::scale(double s) {
  for (std::size_t i = 0; i < weights.size(); ++i) {
    weights[i] *= s;
    bias[i] *= s;
  }
}

DenseNet DenseNet::mlp(int input_dim, const std::vector<int>& hidden_dims, int output_dim) {
  if (input_dim < 1 || output_dim < 1) throw DomainError("mlp: dimensions must be positive");
  DenseNet net;
  int in = input_dim;
  for (int h : hidden_dims) {
    if (h < 1) throw DomainError("mlp: hidden dimension must be positive");
    DenseLayer layer;
    layer.weights = Eigen::MatrixXd::Zero(h, in);
    layer.bias = Eigen::VectorXd::Zero(h);
    layer.activation = Activation::kRelu;
    net.layers_.push_back(std::move(layer));
    in = h;
  }
  DenseLayer out;
  out.weights = Eigen::MatrixXd::Zero(output_dim, in);
  out.bias = Eigen::VectorXd::Zero(output_dim);
  out.activation = Activation::kLinear;
  net.layers_.push_back(std::move(out));
  return net;
}

void DenseNet::init_weights(RandomStream& rng, double output_scale) {
  for (DenseLayer& layer : layers_) {
    const int fan_in = static_cast<int>(layer.weights.cols());
    if (layer.activation == Activation::kRelu) {
      const double sd = std::sqrt(2.0 / fan_in);
      for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
        for (Eigen::Index c = 0; c < layer.weights.cols(); ++c)
          layer.weights(r, c) = rng.normal(0.0, sd);
    } else {
      for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
        for (Eigen::Index c = 0; c < layer.weights.cols(); ++c)
          layer.weights(r, c) = rng.uniform(-output_scale, output_scale);
    }
    layer.bias.setZero();
  }
}

int DenseNet::input_dim() const {
  if (layers_.empty()) throw DomainError("net: empty network");
  return static_cast<int>(layers_.front().weights.cols());
}

int DenseNet::output_dim() const {
  if (layers_.empty()) throw DomainError("net: empty network");
  return static_cast<int>(layers_.back().weights.rows());
}

Eigen::MatrixXd DenseNet::forward(const Eigen::MatrixXd& x) const {
  Eigen::MatrixXd a = x;
  for (const DenseLayer& layer : layers_) {
    Eigen::MatrixXd z = (a * layer.weights.transpose()).rowwise() + layer.bias.transpose();
    a = apply_activation(z, layer.activation);
  }
  return a;
}

Eigen::MatrixXd DenseNet::forward(const Eigen::MatrixXd& x, ForwardCache& cache) const {
  cache.input = x;
  cache.pre.resize(layers_.size());
  cache.post.resize(layers_.size());
  const Eigen::MatrixXd* a = &cache.input;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const DenseLayer& layer = layers_[i];
    cache.pre[i] = (*a * layer.weights.transpose()).rowwise() + layer.bias.transpose();
    cache.post[i] = apply_activation(cache.pre[i], layer.activation);
    a = &cache.post[i];
  }
  return cache.post.back();
}

Gradients DenseNet::backward(const ForwardCache& cache, const Eigen::MatrixXd& grad_output) const {
  if (cache.pre.size() != layers_.size())
    throw DomainError("backward: cache does not match network");
  Gradients g = zeros_like(*this);
  Eigen::MatrixXd delta = grad_output;
  for (int i = static_cast<int>(layers_.size()) - 1; i >= 0; --i) {
    const DenseLayer& layer = layers_[static_cast<std::size_t>(i)];
    if (layer.activation == Activation::kRelu)
      delta = delta.cwiseProduct((cache.pre[i].array() > 0.0).cast<double>().matrix());
    const Eigen::MatrixXd& below = i == 0 ? cache.input : cache.post[i - 1];
    g.weights[i] = delta.transpose() * below;
    g.bias[i] = delta.colwise().sum().transpose();
    if (i > 0) delta = delta * layer.weights;
  }
  return g;
}

std::size_t DenseNet::parameter_count() const {
  std::size_t n = 0;
  for (const DenseLayer& layer : layers_)
    n += static_cast<std::size_t>(layer.weights.size()) + static_cast<std::size_t>(layer.bias.size());
  return n;
}

double DenseNet::get_parameter(std::size_t flat_index) const {
  for (const DenseLayer& layer : layers_) {
    std::size_t w = static_cast<std::size_t>(layer.weights.size());
    if (flat_index < w) return layer.weights.data()[flat_index];
    flat_index -= w;
    std::size_t b = static_cast<std::size_t>(layer.bias.size());
    if (flat_index < b) return layer.bias[static_cast<Eigen::Index>(flat_index)];
    flat_index -= b;
  }
  throw DomainError("get_parameter: index out of range");
}

void DenseNet::set_parameter(std::size_t flat_index, double value) {
  for (DenseLayer& layer : layers_) {
    std::size_t w = static_cast<std::size_t>(layer.weights.size());
    if (flat_index < w) {
      layer.weights.data()[flat_index] = value;
      return;
    }
    flat_index -= w;
    std::size_t b = static_cast<std::size_t>(layer.bias.size());
    if (flat_index < b) {
      layer.bias[static_cast<Eigen::Index>(flat_index)] = value;
      return;
    }
    flat_index -= b;
  }
  throw DomainError("set_parameter: index out of range");
}

Gradients zeros_like(const DenseNet& net) {
  Gradients g;
  for (const DenseLayer& layer : net.layers()) {
    g.weights.push_back(Eigen::MatrixXd::Zero(layer.weights.rows(), layer.weights.cols()));
    g.bias.push_back(Eigen::VectorXd::Zero(layer.bias.size()));
  }
  return g;
}

AdamOptimizer::AdamOptimizer(const DenseNet& net, double beta1, double beta2, double epsilon)
    : beta1_(beta1), beta2_(beta2), epsilon_(epsilon), m_(zeros_like(net)), v_(zeros_like(net)) {}

void AdamOptimizer::step(DenseNet& net, const Gradients& g, double learning_rate) {
  if (g.weights.size() != net.layers().size())
    throw DomainError("adam: gradient does not match network");
  ++step_count_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_count_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_count_));
  for (std::size_t i = 0; i < net.layers().size(); ++i) {
    DenseLayer& layer = net.layers()[i];
    m_.weights[i] = beta1_ * m_.weights[i] + (1.0 - beta1_) * g.weights[i];
    v_.weights[i] = beta2_ * v_.weights[i].array().matrix() +
                    (1.0 - beta2_) * g.weights[i].array().square().matrix();
    layer.weights.array() -= learning_rate * (m_.weights[i].array() / bc1) /
                             ((v_.weights[i].array() / bc2).sqrt() + epsilon_);
    m_.bias[i] = beta1_ * m_.bias[i] + (1.0 - beta1_) * g.bias[i];
    v_.bias[i] =
        beta2_ * v_.bias[i].array().matrix() + (1.0 - beta2_) * g.bias[i].array().square().matrix();
    layer.bias.array() -= learning_rate * (m_.bias[i].array() / bc1) /
                          ((v_.bias[i].array() / bc2).sqrt() + epsilon_);
  }
}

double lr_at(const LrSchedule& schedule, std::int64_t optimizer_step) {
  if (optimizer_step < 0) throw DomainError("lr_at: negative step");
  std::int64_t stage = optimizer_step / schedule.step_size;
  return schedule.initial * std::pow(schedule.decay, static_cast<double>(stage));
}

nlohmann::json network_architecture_json(const DenseNet& net) {
  nlohmann::json j;
  j["input_dim"] = net.input_dim();
  nlohmann::json layers = nlohmann::json::array();
  for (const DenseLayer& layer : net.layers()) {
    nlohmann::json l;
    l["out"] = layer.weights.rows();
    l["in"] = layer.weights.cols();
    l["activation"] = activation_name(layer.activation);
    layers.push_back(l);
  }
  j["layers"] = layers;
  return j;
}

DenseNet network_from_architecture_json(const nlohmann::json& j) {
  DenseNet net;
  int expected_in = j.at("input_dim").get<int>();
  for (const auto& l : j.at("layers")) {
    DenseLayer layer;
    int out = l.at("out").get<int>();
    int in = l.at("in").get<int>();
    if (in != expected_in) throw DomainError("checkpoint: layer dimensions do not chain");
    layer.weights = Eigen::MatrixXd::Zero(out, in);
    layer.bias = Eigen::VectorXd::Zero(out);
    layer.activation = activation_from_name(l.at("activation").get<std::string>());
    net.layers().push_back(std::move(layer));
    expected_in = out;
  }
  if (net.layers().empty()) throw DomainError("checkpoint: empty architecture");
  return net;
}

void append_parameters(const DenseNet& net, std::vector<double>& blob) {
  for (const DenseLayer& layer : net.layers()) {
    blob.insert(blob.end(), layer.weights.data(), layer.weights.data() + layer.weights.size());
    blob.insert(blob.end(), layer.bias.data(), layer.bias.data() + layer.bias.size());
  }
}

std::size_t read_parameters(DenseNet& net, const std::vector<double>& blob, std::size_t offset) {
  for (DenseLayer& layer : net.layers()) {
    std::size_t w = static_cast<std::size_t>(layer.weights.size());
    if (offset + w > blob.size()) throw DomainError("checkpoint: parameter blob too short");
    std::copy(blob.begin() + offset, blob.begin() + offset + w, layer.weights.data());
    offset += w;
    std::size_t b = static_cast<std::size_t>(layer.bias.size());
    if (offset + b > blob.size()) throw DomainError("checkpoint: parameter blob too short");
    std::copy(blob.begin() + offset, blob.begin() + offset + b, layer.bias.data());
    offset += b;
  }
  return offset;
}

}  // namespace warfarin
