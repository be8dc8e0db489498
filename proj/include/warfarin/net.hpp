#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include <json.hpp>

#include "warfarin/random.hpp"

namespace warfarin {

enum class Activation { kRelu = 0, kLinear = 1 };

struct DenseLayer {
  Eigen::MatrixXd weights;  // rows = outputs, cols = inputs
  Eigen::VectorXd bias;
  Activation activation = Activation::kLinear;
};

struct Gradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> bias;

  void add_scaled(const Gradients& other, double scale);
  void scale(double s);
};

// Activations cached by a forward pass for the matching backward pass.
// input is the batch (rows = samples); pre[i]/post[i] are layer i's
// pre-activation and activated output.
struct ForwardCache {
  Eigen::MatrixXd input;
  std::vector<Eigen::MatrixXd> pre;
  std::vector<Eigen::MatrixXd> post;
};

// Fully connected network with explicit forward/backward passes. Gradients
// are computed analytically layer by layer; there is no external ML
// dependency, Eigen only supplies the matrix kernels.
class DenseNet {
 public:
  DenseNet() = default;
  // ReLU hidden layers, linear output.
  static DenseNet mlp(int input_dim, const std::vector<int>& hidden_dims, int output_dim);

  // He-normal for ReLU layers; linear layers get small uniform weights in
  // [-output_scale, output_scale]. All biases start at zero.
  void init_weights(RandomStream& rng, double output_scale = 0.01);

  int input_dim() const;
  int output_dim() const;
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, ForwardCache& cache) const;
  // grad_output is dL/d(output), one row per sample; returns parameter
  // gradients summed over the batch (scale grad_output by 1/N upstream for a
  // mean-reduced loss).
  Gradients backward(const ForwardCache& cache, const Eigen::MatrixXd& grad_output) const;

  std::size_t parameter_count() const;
  double get_parameter(std::size_t flat_index) const;
  void set_parameter(std::size_t flat_index, double value);

 private:
  std::vector<DenseLayer> layers_;
};

Gradients zeros_like(const DenseNet& net);

class AdamOptimizer {
 public:
  explicit AdamOptimizer(const DenseNet& net, double beta1 = 0.9, double beta2 = 0.999,
                         double epsilon = 1e-8);
  void step(DenseNet& net, const Gradients& g, double learning_rate);
  std::int64_t step_count() const { return step_count_; }
  void set_step_count(std::int64_t n) { step_count_ = n; }

 private:
  double beta1_, beta2_, epsilon_;
  std::int64_t step_count_ = 0;
  Gradients m_, v_;
};

// Staircase decay: initial * decay^floor(step / step_size).
struct LrSchedule {
  double initial = 1e-4;
  double decay = 0.8;
  std::int64_t step_size = 1000;
};

double lr_at(const LrSchedule& schedule, std::int64_t optimizer_step);

// Architecture/parameter serialization used by the checkpoint format.
nlohmann::json network_architecture_json(const DenseNet& net);
DenseNet network_from_architecture_json(const nlohmann::json& j);
void append_parameters(const DenseNet& net, std::vector<double>& blob);
std::size_t read_parameters(DenseNet& net, const std::vector<double>& blob, std::size_t offset);

}  // namespace warfarin
