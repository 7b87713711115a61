#ifndef AC2MPC_RL_MLP_HPP
#define AC2MPC_RL_MLP_HPP

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

namespace ac2mpc::rl {

/// Fully connected network, ReLU on hidden layers and identity on the output.
/// All weights and biases live in one flat vector; layer l stores its
/// out x in weight block (column-major) followed by its bias.
template <typename Scalar>
class Mlp {
 public:
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  /// Intermediate activations kept for backpropagation; column j is sample j.
  struct Tape {
    std::vector<Mat> inputs;  // input to each layer (post-activation of the previous one)
    std::vector<Mat> pre;     // pre-activation of each layer
  };

  Mlp() = default;

  explicit Mlp(std::vector<int> sizes) : sizes_(std::move(sizes)) {
    if (sizes_.size() < 2) throw std::invalid_argument("Mlp: need at least input and output sizes");
    int count = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      if (sizes_[l] < 1 || sizes_[l + 1] < 1) throw std::invalid_argument("Mlp: layer sizes must be >= 1");
      offsets_.push_back(count);
      count += sizes_[l + 1] * sizes_[l] + sizes_[l + 1];
    }
    params_ = Vec::Zero(count);
  }

  const std::vector<int>& sizes() const { return sizes_; }
  int layers() const { return static_cast<int>(sizes_.size()) - 1; }
  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  int parameter_count() const { return static_cast<int>(params_.size()); }

  Vec& parameters() { return params_; }
  const Vec& parameters() const { return params_; }

  Eigen::Map<const Mat> weight(int l) const {
    return {params_.data() + offsets_[l], sizes_[l + 1], sizes_[l]};
  }
  Eigen::Map<Mat> weight(int l) { return {params_.data() + offsets_[l], sizes_[l + 1], sizes_[l]}; }
  Eigen::Map<const Vec> bias(int l) const {
    return {params_.data() + offsets_[l] + sizes_[l + 1] * sizes_[l], sizes_[l + 1]};
  }
  Eigen::Map<Vec> bias(int l) { return {params_.data() + offsets_[l] + sizes_[l + 1] * sizes_[l], sizes_[l + 1]}; }

  /// He-uniform weights, Uniform(-sqrt(6/fan_in), sqrt(6/fan_in)), so signal
  /// variance survives the ReLU stack; zero biases. The output layer is
  /// further multiplied by `output_scale`.
  template <typename Rng>
  void initialize(Rng& rng, Scalar output_scale = Scalar(1)) {
    for (int l = 0; l < layers(); ++l) {
      const double bound = std::sqrt(6.0 / static_cast<double>(sizes_[l]));
      std::uniform_real_distribution<double> dist(-bound, bound);
      const Scalar scale = l + 1 == layers() ? output_scale : Scalar(1);
      auto W = weight(l);
      for (Eigen::Index j = 0; j < W.cols(); ++j)
        for (Eigen::Index i = 0; i < W.rows(); ++i) W(i, j) = scale * Scalar(dist(rng));
      bias(l).setZero();
    }
  }

  Mat forward(const Mat& X) const {
    Mat h = X;
    for (int l = 0; l < layers(); ++l) {
      Mat z = (weight(l) * h).colwise() + bias(l);
      h = l + 1 < layers() ? Mat(z.cwiseMax(Scalar(0))) : z;
    }
    return h;
  }

  Mat forward(const Mat& X, Tape& tape) const {
    tape.inputs.clear();
    tape.pre.clear();
    Mat h = X;
    for (int l = 0; l < layers(); ++l) {
      tape.inputs.push_back(h);
      tape.pre.push_back((weight(l) * h).colwise() + bias(l));
      h = l + 1 < layers() ? Mat(tape.pre.back().cwiseMax(Scalar(0))) : tape.pre.back();
    }
    return h;
  }

  Vec forward_one(const Vec& x) const { return forward(Mat(x)).col(0); }

  /// Gradient of sum_j <d_out.col(j), f(x_j)> with respect to the flat parameters.
  Vec backward(const Tape& tape, const Mat& d_out) const {
    Vec grad = Vec::Zero(parameter_count());
    Mat delta = d_out;
    for (int l = layers() - 1; l >= 0; --l) {
      if (l + 1 < layers()) delta = delta.cwiseProduct((tape.pre[l].array() > Scalar(0)).template cast<Scalar>().matrix());
      Eigen::Map<Mat>(grad.data() + offsets_[l], sizes_[l + 1], sizes_[l]) = delta * tape.inputs[l].transpose();
      Eigen::Map<Vec>(grad.data() + offsets_[l] + sizes_[l + 1] * sizes_[l], sizes_[l + 1]) = delta.rowwise().sum();
      if (l > 0) delta = weight(l).transpose() * delta;
    }
    return grad;
  }

 private:
  std::vector<int> sizes_;
  std::vector<int> offsets_;
  Vec params_;
};

}  // namespace ac2mpc::rl

#endif  // AC2MPC_RL_MLP_HPP
