#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "specklediff/image.hpp"

namespace specklediff {

/// Architecture of the noise predictor. The network is a small U-Net:
/// a stem convolution, `depth` encoder levels of two 3x3 convolutions each
/// (channels base * 2^level, 2x2 average pooling between levels), a mirrored
/// decoder with nearest-neighbour upsampling and skip concatenation, and a 3x3
/// output convolution. The step embedding goes through one dense + SiLU layer
/// and is added, via a per-block projection, after each block's first convolution.
struct NetworkConfig {
  int base_channels = 32;
  int depth = 3;
  int time_embed_dim = 64;
  /// Number of diffusion steps the network is conditioned on.
  int T = 100;
  // Recorded in checkpoints; only these values are implemented.
  std::string activation = "silu";
  std::string normalization = "none";

  void validate() const;
  /// Throws ContractError unless both sides are divisible by 2^(depth-1).
  void check_input(int height, int width) const;
  int channels(int level) const { return base_channels << level; }

  static NetworkConfig desk() { return {}; }
  static NetworkConfig large() { return {64, 5, 128, 100}; }
  static NetworkConfig tiny() { return {4, 2, 8, 100}; }

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

/// Storage aligned for the widest SIMD width, so vectorized kernels take the same
/// code path on every call and results are bit-reproducible.
template <typename S>
using AlignedVector = std::vector<S, Eigen::aligned_allocator<S>>;

template <typename S>
struct ParamArray {
  std::string name;
  std::vector<int> shape;
  AlignedVector<S> value;
  AlignedVector<S> grad;

  std::size_t size() const { return value.size(); }
};

/// Indices into the parameter list for one network's layers.
struct ConvSlot {
  int weight = -1;
  int bias = -1;
  int cin = 0;
  int cout = 0;
};

struct BlockSlot {
  ConvSlot conv1;
  ConvSlot conv2;
  int temb_proj = -1;
};

struct NetLayout {
  int temb_weight = -1;
  int temb_bias = -1;
  ConvSlot stem;
  std::vector<BlockSlot> enc;
  std::vector<BlockSlot> dec;
  ConvSlot head;
};

template <typename S>
struct NetTape;

/// Time-conditioned eps predictor, templated on the scalar type so gradients
/// can be checked in double precision. Training and inference use float.
template <typename S>
class EpsNet {
 public:
  /// Returns the loss and writes dLoss/dOutput into `d_out`.
  using LossGradFn = std::function<S(std::span<const S> out, std::span<S> d_out)>;

  EpsNet() = default;
  EpsNet(NetworkConfig config, std::uint64_t init_seed);

  const NetworkConfig& config() const { return config_; }
  std::vector<ParamArray<S>>& params() { return params_; }
  const std::vector<ParamArray<S>>& params() const { return params_; }
  std::size_t parameter_count() const;

  ParamArray<S>& param(const std::string& name);

  std::vector<S> forward(std::span<const S> x, int height, int width, int t) const;
  Image predict(const Image& xt, int t) const;

  /// Forward + backward for one sample; parameter gradients are accumulated.
  /// When `d_input` is non-null it receives dLoss/dx.
  S accumulate_gradients(std::span<const S> x, int height, int width, int t,
                         const LossGradFn& loss_grad, std::vector<S>* d_input = nullptr);

  void zero_grad();

  template <typename U>
  EpsNet<U> cast() const {
    EpsNet<U> out;
    out.config_ = config_;
    out.layout_ = layout_;
    for (const auto& p : params_) {
      ParamArray<U> q{p.name, p.shape, AlignedVector<U>(p.value.begin(), p.value.end()),
                      AlignedVector<U>(p.value.size(), U(0))};
      out.params_.push_back(std::move(q));
    }
    return out;
  }

  using Conv = ConvSlot;
  using Block = BlockSlot;
  using Layout = NetLayout;

 private:
  template <typename U>
  friend class EpsNet;

  int add_param(std::string name, std::vector<int> shape);
  Conv add_conv(const std::string& prefix, int cin, int cout);
  Block add_block(const std::string& prefix, int cin, int cout);

  AlignedVector<S> run(std::span<const S> x, int height, int width, int t, NetTape<S>* tape) const;

  NetworkConfig config_;
  Layout layout_;
  std::vector<ParamArray<S>> params_;
};

extern template class EpsNet<float>;
extern template class EpsNet<double>;

using EpsilonPredictor = EpsNet<float>;

}  // namespace specklediff
