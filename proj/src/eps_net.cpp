#include "specklediff/eps_net.hpp"

#include <Eigen/Core>
#include <cmath>
#include <cstring>
#include <random>
#include <string>

#include "specklediff/errors.hpp"
#include "specklediff/time_embedding.hpp"

namespace specklediff {

void NetworkConfig::validate() const {
  if (base_channels < 1 || depth < 1 || time_embed_dim < 2 || T < 1)
    throw ConfigError("network dimensions must be positive");
  if (time_embed_dim % 2 != 0) throw ConfigError("time_embed_dim must be even");
  if (depth > 8) throw ConfigError("network depth above 8 is not supported");
  if (activation != "silu") throw ConfigError("unsupported activation '" + activation + "'");
  if (normalization != "none") throw ConfigError("unsupported normalization '" + normalization + "'");
}

void NetworkConfig::check_input(int height, int width) const {
  const int m = 1 << (depth - 1);
  if (height <= 0 || width <= 0 || height % m != 0 || width % m != 0)
    throw ContractError("input " + std::to_string(height) + "x" + std::to_string(width) +
                        " must have sides divisible by " + std::to_string(m));
}

namespace {

template <typename S>
using RowMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using Map = Eigen::Map<RowMat<S>>;
template <typename S>
using CMap = Eigen::Map<const RowMat<S>>;

template <typename S>
struct Tensor {
  int c = 0, h = 0, w = 0;
  AlignedVector<S> v;

  Tensor() = default;
  Tensor(int c_, int h_, int w_) : c(c_), h(h_), w(w_), v(static_cast<std::size_t>(c_) * h_ * w_, S(0)) {}
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  S* ch(int k) { return v.data() + k * plane(); }
  const S* ch(int k) const { return v.data() + k * plane(); }
};

template <typename S>
using ColBuf = RowMat<S>;

template <typename S>
void im2col(const Tensor<S>& x, ColBuf<S>& col) {
  const int h = x.h, w = x.w;
  const std::size_t hw = x.plane();
  col.resize(static_cast<Eigen::Index>(x.c) * 9, static_cast<Eigen::Index>(hw));
  for (int ci = 0; ci < x.c; ++ci) {
    const S* src = x.ch(ci);
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        S* dst = col.data() + ((ci * 3 + ky) * 3 + kx) * hw;
        const int dy = ky - 1, dx = kx - 1;
        const int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
        for (int y = 0; y < h; ++y) {
          S* row = dst + y * w;
          const int sy = y + dy;
          if (sy < 0 || sy >= h) {
            std::fill(row, row + w, S(0));
            continue;
          }
          if (x0 > 0) row[0] = S(0);
          if (x1 < w) row[w - 1] = S(0);
          std::memcpy(row + x0, src + sy * w + x0 + dx, sizeof(S) * static_cast<std::size_t>(x1 - x0));
        }
      }
    }
  }
}

template <typename S>
void col2im(const ColBuf<S>& col, Tensor<S>& dx) {
  const int h = dx.h, w = dx.w;
  const std::size_t hw = dx.plane();
  std::fill(dx.v.begin(), dx.v.end(), S(0));
  for (int ci = 0; ci < dx.c; ++ci) {
    S* dst = dx.ch(ci);
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const S* src = col.data() + ((ci * 3 + ky) * 3 + kx) * hw;
        const int dy = ky - 1, ddx = kx - 1;
        const int x0 = std::max(0, -ddx), x1 = std::min(w, w - ddx);
        for (int y = 0; y < h; ++y) {
          const int sy = y + dy;
          if (sy < 0 || sy >= h) continue;
          S* d = dst + sy * w + ddx;
          const S* s = src + y * w;
          for (int xx = x0; xx < x1; ++xx) d[xx] += s[xx];
        }
      }
    }
  }
}

template <typename S>
Tensor<S> conv_forward(const Tensor<S>& x, const ParamArray<S>& wt, const ParamArray<S>& bias, int cout,
                       ColBuf<S>& col) {
  im2col(x, col);
  const auto hw = static_cast<Eigen::Index>(x.plane());
  const auto k = static_cast<Eigen::Index>(x.c) * 9;
  Tensor<S> out(cout, x.h, x.w);
  Map<S> om(out.v.data(), cout, hw);
  om.noalias() = CMap<S>(wt.value.data(), cout, k) * col;
  for (int o = 0; o < cout; ++o) om.row(o).array() += bias.value[static_cast<std::size_t>(o)];
  return out;
}

// Accumulates weight/bias gradients; writes the input gradient when `dx` is given.
template <typename S>
void conv_backward(const ColBuf<S>& col, ParamArray<S>& wt, ParamArray<S>& bias, int cin, int cout,
                   const Tensor<S>& dout, Tensor<S>* dx) {
  const auto hw = static_cast<Eigen::Index>(dout.plane());
  const auto k = static_cast<Eigen::Index>(cin) * 9;
  CMap<S> dom(dout.v.data(), cout, hw);
  Map<S>(wt.grad.data(), cout, k).noalias() += dom * col.transpose();
  for (int o = 0; o < cout; ++o) bias.grad[static_cast<std::size_t>(o)] += dom.row(o).sum();
  if (dx) {
    ColBuf<S> dcol(k, hw);
    dcol.noalias() = CMap<S>(wt.value.data(), cout, k).transpose() * dom;
    *dx = Tensor<S>(cin, dout.h, dout.w);
    col2im(dcol, *dx);
  }
}

template <typename S>
using Arr = Eigen::Array<S, Eigen::Dynamic, 1>;
template <typename S>
using ArrMap = Eigen::Map<Arr<S>>;
template <typename S>
using CArrMap = Eigen::Map<const Arr<S>>;

template <typename S>
void silu_inplace(const AlignedVector<S>& pre, AlignedVector<S>& out) {
  out.resize(pre.size());
  const auto n = static_cast<Eigen::Index>(pre.size());
  CArrMap<S> a(pre.data(), n);
  ArrMap<S>(out.data(), n) = a / (S(1) + (-a).exp());
}

// d <- d * silu'(pre)
template <typename S>
void silu_backward(const AlignedVector<S>& pre, AlignedVector<S>& d) {
  const auto n = static_cast<Eigen::Index>(pre.size());
  CArrMap<S> a(pre.data(), n);
  const Arr<S> s = S(1) / (S(1) + (-a).exp());
  ArrMap<S>(d.data(), n) *= s * (S(1) + a * (S(1) - s));
}

template <typename S>
Tensor<S> avgpool2(const Tensor<S>& x) {
  Tensor<S> out(x.c, x.h / 2, x.w / 2);
  for (int c = 0; c < x.c; ++c) {
    const S* s = x.ch(c);
    S* d = out.ch(c);
    for (int y = 0; y < out.h; ++y)
      for (int xx = 0; xx < out.w; ++xx) {
        const S* p = s + (2 * y) * x.w + 2 * xx;
        d[y * out.w + xx] = S(0.25) * (p[0] + p[1] + p[x.w] + p[x.w + 1]);
      }
  }
  return out;
}

template <typename S>
Tensor<S> avgpool2_backward(const Tensor<S>& d) {
  Tensor<S> out(d.c, d.h * 2, d.w * 2);
  for (int c = 0; c < d.c; ++c) {
    const S* s = d.ch(c);
    S* o = out.ch(c);
    for (int y = 0; y < out.h; ++y)
      for (int xx = 0; xx < out.w; ++xx) o[y * out.w + xx] = S(0.25) * s[(y / 2) * d.w + xx / 2];
  }
  return out;
}

template <typename S>
Tensor<S> upsample2(const Tensor<S>& x) {
  Tensor<S> out(x.c, x.h * 2, x.w * 2);
  for (int c = 0; c < x.c; ++c) {
    const S* s = x.ch(c);
    S* o = out.ch(c);
    for (int y = 0; y < out.h; ++y)
      for (int xx = 0; xx < out.w; ++xx) o[y * out.w + xx] = s[(y / 2) * x.w + xx / 2];
  }
  return out;
}

template <typename S>
Tensor<S> upsample2_backward(const Tensor<S>& d, int c_begin, int c_count) {
  Tensor<S> out(c_count, d.h / 2, d.w / 2);
  for (int c = 0; c < c_count; ++c) {
    const S* s = d.ch(c_begin + c);
    S* o = out.ch(c);
    for (int y = 0; y < d.h; ++y)
      for (int xx = 0; xx < d.w; ++xx) o[(y / 2) * out.w + xx / 2] += s[y * d.w + xx];
  }
  return out;
}

template <typename S>
Tensor<S> concat(const Tensor<S>& a, const Tensor<S>& b) {
  Tensor<S> out(a.c + b.c, a.h, a.w);
  std::copy(a.v.begin(), a.v.end(), out.v.begin());
  std::copy(b.v.begin(), b.v.end(), out.v.begin() + static_cast<std::ptrdiff_t>(a.v.size()));
  return out;
}

}  // namespace

template <typename S>
struct BlockTape {
  ColBuf<S> col1, col2;
  AlignedVector<S> a1, a2, h1;
  int cin = 0, h = 0, w = 0;
};

template <typename S>
struct NetTape {
  AlignedVector<S> emb, temb_pre, temb;
  ColBuf<S> col_stem, col_head;
  std::vector<BlockTape<S>> enc, dec;
};

namespace {

template <typename S>
Tensor<S> block_forward(const typename EpsNet<S>::Block& b, const std::vector<ParamArray<S>>& P,
                        const Tensor<S>& in, const AlignedVector<S>& temb, BlockTape<S>* tape) {
  ColBuf<S> col_local;
  ColBuf<S>& col1 = tape ? tape->col1 : col_local;
  Tensor<S> a1 = conv_forward(in, P[b.conv1.weight], P[b.conv1.bias], b.conv1.cout, col1);
  const auto& proj = P[b.temb_proj];
  const auto d = static_cast<Eigen::Index>(temb.size());
  Eigen::Matrix<S, Eigen::Dynamic, 1> shift =
      CMap<S>(proj.value.data(), b.conv1.cout, d) * Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, 1>>(temb.data(), d);
  for (int c = 0; c < a1.c; ++c) {
    S* p = a1.ch(c);
    for (std::size_t i = 0; i < a1.plane(); ++i) p[i] += shift[c];
  }
  Tensor<S> h1(a1.c, a1.h, a1.w);
  silu_inplace(a1.v, h1.v);
  ColBuf<S>& col2 = tape ? tape->col2 : col_local;
  Tensor<S> a2 = conv_forward(h1, P[b.conv2.weight], P[b.conv2.bias], b.conv2.cout, col2);
  Tensor<S> out(a2.c, a2.h, a2.w);
  silu_inplace(a2.v, out.v);
  if (tape) {
    tape->a1 = std::move(a1.v);
    tape->a2 = std::move(a2.v);
    tape->h1 = std::move(h1.v);
    tape->cin = in.c;
    tape->h = in.h;
    tape->w = in.w;
  }
  return out;
}

template <typename S>
Tensor<S> block_backward(const typename EpsNet<S>::Block& b, std::vector<ParamArray<S>>& P,
                         const BlockTape<S>& tape, Tensor<S> dout, const AlignedVector<S>& temb,
                         AlignedVector<S>& dtemb) {
  silu_backward(tape.a2, dout.v);
  Tensor<S> dh1;
  conv_backward(tape.col2, P[b.conv2.weight], P[b.conv2.bias], b.conv2.cin, b.conv2.cout, dout, &dh1);
  silu_backward(tape.a1, dh1.v);
  const int cout = b.conv1.cout;
  const auto d = static_cast<Eigen::Index>(temb.size());
  Eigen::Matrix<S, Eigen::Dynamic, 1> dshift(cout);
  for (int c = 0; c < cout; ++c) {
    const S* p = dh1.ch(c);
    S s(0);
    for (std::size_t i = 0; i < dh1.plane(); ++i) s += p[i];
    dshift[c] = s;
  }
  auto& proj = P[b.temb_proj];
  Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, 1>> tv(temb.data(), d);
  Map<S>(proj.grad.data(), cout, d).noalias() += dshift * tv.transpose();
  Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, 1>>(dtemb.data(), d).noalias() +=
      CMap<S>(proj.value.data(), cout, d).transpose() * dshift;
  Tensor<S> din;
  conv_backward(tape.col1, P[b.conv1.weight], P[b.conv1.bias], b.conv1.cin, cout, dh1, &din);
  return din;
}

}  // namespace

template <typename S>
EpsNet<S>::EpsNet(NetworkConfig config, std::uint64_t init_seed) : config_(std::move(config)) {
  config_.validate();
  const int D = config_.time_embed_dim;
  layout_.temb_weight = add_param("temb.dense.weight", {D, D});
  layout_.temb_bias = add_param("temb.dense.bias", {D});
  layout_.stem = add_conv("stem", 1, config_.channels(0));
  for (int l = 0; l < config_.depth; ++l) {
    const int cin = l == 0 ? config_.channels(0) : config_.channels(l - 1);
    layout_.enc.push_back(add_block("enc" + std::to_string(l), cin, config_.channels(l)));
  }
  layout_.dec.resize(static_cast<std::size_t>(std::max(0, config_.depth - 1)));
  for (int l = config_.depth - 2; l >= 0; --l)
    layout_.dec[static_cast<std::size_t>(l)] =
        add_block("dec" + std::to_string(l), config_.channels(l + 1) + config_.channels(l), config_.channels(l));
  layout_.head = add_conv("head", config_.channels(0), 1);

  std::mt19937_64 rng(init_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& p : params_) {
    if (p.shape.size() == 1) continue;  // biases start at zero
    int fan_in = 1;
    for (std::size_t i = 1; i < p.shape.size(); ++i) fan_in *= p.shape[i];
    double gain = 2.0;  // followed by SiLU
    if (p.name.rfind("head.", 0) == 0 || p.name.find("temb") != std::string::npos) gain = 1.0;
    const double std = std::sqrt(gain / fan_in);
    for (auto& v : p.value) v = static_cast<S>(std * normal(rng));
  }
}

template <typename S>
int EpsNet<S>::add_param(std::string name, std::vector<int> shape) {
  std::size_t n = 1;
  for (int s : shape) n *= static_cast<std::size_t>(s);
  params_.push_back({std::move(name), std::move(shape), AlignedVector<S>(n, S(0)), AlignedVector<S>(n, S(0))});
  return static_cast<int>(params_.size() - 1);
}

template <typename S>
typename EpsNet<S>::Conv EpsNet<S>::add_conv(const std::string& prefix, int cin, int cout) {
  Conv c;
  c.weight = add_param(prefix + ".weight", {cout, cin, 3, 3});
  c.bias = add_param(prefix + ".bias", {cout});
  c.cin = cin;
  c.cout = cout;
  return c;
}

template <typename S>
typename EpsNet<S>::Block EpsNet<S>::add_block(const std::string& prefix, int cin, int cout) {
  Block b;
  b.conv1 = add_conv(prefix + ".conv1", cin, cout);
  b.temb_proj = add_param(prefix + ".temb_proj.weight", {cout, config_.time_embed_dim});
  b.conv2 = add_conv(prefix + ".conv2", cout, cout);
  return b;
}

template <typename S>
std::size_t EpsNet<S>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.size();
  return n;
}

template <typename S>
ParamArray<S>& EpsNet<S>::param(const std::string& name) {
  for (auto& p : params_)
    if (p.name == name) return p;
  throw ContractError("no parameter named '" + name + "'");
}

template <typename S>
void EpsNet<S>::zero_grad() {
  for (auto& p : params_) std::fill(p.grad.begin(), p.grad.end(), S(0));
}

template <typename S>
AlignedVector<S> EpsNet<S>::run(std::span<const S> x, int height, int width, int t, NetTape<S>* tape) const {
  config_.check_input(height, width);
  if (t < 1 || t > config_.T)
    throw IndexError("step " + std::to_string(t) + " outside 1.." + std::to_string(config_.T));
  if (x.size() != static_cast<std::size_t>(height) * width)
    throw ContractError("input buffer does not match its declared shape");

  const auto& P = params_;
  const int D = config_.time_embed_dim;
  const auto emb_d = time_embedding(t, D);
  AlignedVector<S> emb(emb_d.begin(), emb_d.end());
  AlignedVector<S> temb_pre(static_cast<std::size_t>(D));
  {
    Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, 1>> out(temb_pre.data(), D);
    out.noalias() = CMap<S>(P[layout_.temb_weight].value.data(), D, D) *
                    Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, 1>>(emb.data(), D);
    for (int i = 0; i < D; ++i) out[i] += P[layout_.temb_bias].value[static_cast<std::size_t>(i)];
  }
  AlignedVector<S> temb;
  silu_inplace(temb_pre, temb);

  Tensor<S> input(1, height, width);
  std::copy(x.begin(), x.end(), input.v.begin());
  ColBuf<S> col_local;
  Tensor<S> cur = conv_forward(input, P[layout_.stem.weight], P[layout_.stem.bias], layout_.stem.cout,
                               tape ? tape->col_stem : col_local);

  const int depth = config_.depth;
  if (tape) {
    tape->enc.assign(static_cast<std::size_t>(depth), {});
    tape->dec.assign(static_cast<std::size_t>(std::max(0, depth - 1)), {});
  }
  std::vector<Tensor<S>> skips(static_cast<std::size_t>(depth));
  for (int l = 0; l < depth; ++l) {
    if (l > 0) cur = avgpool2(cur);
    cur = block_forward<S>(layout_.enc[static_cast<std::size_t>(l)], P, cur, temb,
                           tape ? &tape->enc[static_cast<std::size_t>(l)] : nullptr);
    if (l < depth - 1) skips[static_cast<std::size_t>(l)] = cur;
  }
  for (int l = depth - 2; l >= 0; --l) {
    const Tensor<S> cat = concat(upsample2(cur), skips[static_cast<std::size_t>(l)]);
    cur = block_forward<S>(layout_.dec[static_cast<std::size_t>(l)], P, cat, temb,
                           tape ? &tape->dec[static_cast<std::size_t>(l)] : nullptr);
  }
  Tensor<S> out = conv_forward(cur, P[layout_.head.weight], P[layout_.head.bias], 1, tape ? tape->col_head : col_local);

  if (tape) {
    tape->emb = std::move(emb);
    tape->temb_pre = std::move(temb_pre);
    tape->temb = std::move(temb);
  }
  return std::move(out.v);
}

template <typename S>
std::vector<S> EpsNet<S>::forward(std::span<const S> x, int height, int width, int t) const {
  const auto out = run(x, height, width, t, nullptr);
  return std::vector<S>(out.begin(), out.end());
}

template <typename S>
Image EpsNet<S>::predict(const Image& xt, int t) const {
  AlignedVector<S> in(xt.pixels().begin(), xt.pixels().end());
  const auto out = run(in, xt.height(), xt.width(), t, nullptr);
  return Image(xt.height(), xt.width(), std::vector<float>(out.begin(), out.end()));
}

template <typename S>
S EpsNet<S>::accumulate_gradients(std::span<const S> x, int height, int width, int t,
                                  const LossGradFn& loss_grad, std::vector<S>* d_input) {
  NetTape<S> tape;
  const AlignedVector<S> out = run(x, height, width, t, &tape);
  Tensor<S> dout(1, height, width);
  const S loss = loss_grad(out, dout.v);

  auto& P = params_;
  const int depth = config_.depth;
  const int D = config_.time_embed_dim;
  AlignedVector<S> dtemb(static_cast<std::size_t>(D), S(0));

  Tensor<S> dcur;
  conv_backward(tape.col_head, P[layout_.head.weight], P[layout_.head.bias], layout_.head.cin, 1, dout, &dcur);

  std::vector<Tensor<S>> dskip(static_cast<std::size_t>(depth));
  for (int l = 0; l <= depth - 2; ++l) {
    const auto& blk = layout_.dec[static_cast<std::size_t>(l)];
    Tensor<S> dcat = block_backward<S>(blk, P, tape.dec[static_cast<std::size_t>(l)], std::move(dcur), tape.temb, dtemb);
    const int c_up = config_.channels(l + 1);
    const int c_skip = config_.channels(l);
    Tensor<S> ds(c_skip, dcat.h, dcat.w);
    std::copy(dcat.ch(c_up), dcat.ch(c_up) + ds.v.size(), ds.v.begin());
    dskip[static_cast<std::size_t>(l)] = std::move(ds);
    dcur = upsample2_backward(dcat, 0, c_up);
  }
  Tensor<S> dstem;
  for (int l = depth - 1; l >= 0; --l) {
    if (l < depth - 1) {
      const auto& ds = dskip[static_cast<std::size_t>(l)];
      for (std::size_t i = 0; i < ds.v.size(); ++i) dcur.v[i] += ds.v[i];
    }
    Tensor<S> din = block_backward<S>(layout_.enc[static_cast<std::size_t>(l)], P, tape.enc[static_cast<std::size_t>(l)],
                                      std::move(dcur), tape.temb, dtemb);
    if (l > 0)
      dcur = avgpool2_backward(din);
    else
      dstem = std::move(din);
  }
  Tensor<S> dx;
  conv_backward(tape.col_stem, P[layout_.stem.weight], P[layout_.stem.bias], 1, layout_.stem.cout, dstem,
                d_input ? &dx : nullptr);
  if (d_input) d_input->assign(dx.v.begin(), dx.v.end());

  silu_backward(tape.temb_pre, dtemb);
  Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, 1>> dpre(dtemb.data(), D);
  Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, 1>> emb(tape.emb.data(), D);
  Map<S>(P[layout_.temb_weight].grad.data(), D, D).noalias() += dpre * emb.transpose();
  for (int i = 0; i < D; ++i) P[layout_.temb_bias].grad[static_cast<std::size_t>(i)] += dtemb[static_cast<std::size_t>(i)];
  return loss;
}

template class EpsNet<float>;
template class EpsNet<double>;

}  // namespace specklediff
