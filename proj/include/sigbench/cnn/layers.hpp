#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "sigbench/cnn/batch.hpp"
#include "sigbench/rng.hpp"

namespace sigbench::cnn {

// Parameter tensor exposed to the optimizer and the artifact writer.
// `decay` marks weights that take weight decay (conv/dense kernels);
// `trainable` is false for running statistics.
template <typename T>
struct TensorRef {
  std::string name;
  std::vector<T>* value = nullptr;
  std::vector<T>* grad = nullptr;
  bool trainable = true;
  bool decay = false;
};

// Thread-count-independent parallel reductions are the rule everywhere in
// this file: loops parallelize over disjoint output slots (items, channels,
// output rows) and every floating-point accumulation inside a slot runs in
// a fixed order.
template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual std::string describe() const = 0;
  virtual Shape output_shape(const Shape& in) const = 0;
  virtual void init_params(Rng&) {}
  virtual void collect(std::vector<TensorRef<T>>& out) { (void)out; }
  virtual void forward(const Batch<T>& in, Batch<T>& out, bool train) = 0;
  // Consumes the cached forward state; fills d_in and the param grads.
  virtual void backward(const Batch<T>& in, const Batch<T>& out, const Batch<T>& d_out,
                        Batch<T>& d_in) = 0;

  std::size_t param_count() {
    std::vector<TensorRef<T>> refs;
    collect(refs);
    std::size_t total = 0;
    for (const auto& r : refs)
      if (r.trainable) total += r.value->size();
    return total;
  }
};

namespace detail {

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace detail

// 2-D convolution, stride 1, zero padding k/2 ("same"). Bias is optional
// because a following batch-norm absorbs it.
template <typename T>
class Conv2d final : public Layer<T> {
 public:
  Conv2d(int in_c, int out_c, int k, bool use_bias)
      : in_c_(in_c), out_c_(out_c), k_(k), pad_(k / 2), use_bias_(use_bias) {
    w_.assign(std::size_t(out_c_) * in_c_ * k_ * k_, T(0));
    dw_.assign(w_.size(), T(0));
    b_.assign(use_bias_ ? out_c_ : 0, T(0));
    db_.assign(b_.size(), T(0));
  }

  std::string describe() const override {
    return "conv2d " + std::to_string(k_) + "x" + std::to_string(k_) + ", " +
           std::to_string(in_c_) + "->" + std::to_string(out_c_);
  }

  Shape output_shape(const Shape& in) const override {
    detail::require(in.size() == 3 && in[0] == in_c_,
                    describe() + ": expected input [" + std::to_string(in_c_) + ",H,W], got " +
                        shape_str(in));
    detail::require(in[1] >= k_ - pad_ && in[2] >= k_ - pad_, describe() + ": input too small");
    return {out_c_, in[1], in[2]};
  }

  void init_params(Rng& rng) override {
    const double fan_in = double(in_c_) * k_ * k_;
    const double s = std::sqrt(2.0 / fan_in);
    for (T& v : w_) v = static_cast<T>(s * rng.gaussian());
  }

  void collect(std::vector<TensorRef<T>>& out) override {
    out.push_back({"conv2d.w", &w_, &dw_, true, true});
    if (use_bias_) out.push_back({"conv2d.b", &b_, &db_, true, false});
  }

  void forward(const Batch<T>& in, Batch<T>& out, bool train) override {
    const int H = in.dims[1], W = in.dims[2];
    out.resize(in.n, {out_c_, H, W});
    pad_input(in, train);
    const int PW = W + 2 * pad_;
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < in.n; ++i) {
      const T* src = padded_.item(i);
      T* dst = out.item(i);
      for (int oc = 0; oc < out_c_; ++oc) {
        T* plane = dst + std::size_t(oc) * H * W;
        const T bias = use_bias_ ? b_[oc] : T(0);
        std::fill(plane, plane + std::size_t(H) * W, bias);
        for (int ic = 0; ic < in_c_; ++ic) {
          const T* chan = src + std::size_t(ic) * (H + 2 * pad_) * PW;
          const T* wk = w_.data() + ((std::size_t(oc) * in_c_ + ic) * k_) * k_;
          for (int ky = 0; ky < k_; ++ky) {
            for (int y = 0; y < H; ++y) {
              const T* row = chan + std::size_t(y + ky) * PW;
              T* orow = plane + std::size_t(y) * W;
              if (k_ == 3) {
                const T w0 = wk[ky * 3], w1 = wk[ky * 3 + 1], w2 = wk[ky * 3 + 2];
                for (int x = 0; x < W; ++x)
                  orow[x] += w0 * row[x] + w1 * row[x + 1] + w2 * row[x + 2];
              } else {
                for (int kx = 0; kx < k_; ++kx) {
                  const T w = wk[ky * k_ + kx];
                  for (int x = 0; x < W; ++x) orow[x] += w * row[x + kx];
                }
              }
            }
          }
        }
      }
    }
  }

  void backward(const Batch<T>& in, const Batch<T>& out, const Batch<T>& d_out,
                Batch<T>& d_in) override {
    const int H = in.dims[1], W = in.dims[2];
    const int PH = H + 2 * pad_, PW = W + 2 * pad_;

    // Weight gradients: each (oc, ic) pair owns disjoint output slots, so
    // the reduction over items and pixels stays in a fixed order.
    std::fill(dw_.begin(), dw_.end(), T(0));
    std::fill(db_.begin(), db_.end(), T(0));
#pragma omp parallel for schedule(static) collapse(2)
    for (int oc = 0; oc < out_c_; ++oc) {
      for (int ic = 0; ic < in_c_; ++ic) {
        T* wk = dw_.data() + ((std::size_t(oc) * in_c_ + ic) * k_) * k_;
        for (std::size_t i = 0; i < in.n; ++i) {
          const T* chan = padded_.item(i) + std::size_t(ic) * PH * PW;
          const T* g = d_out.item(i) + std::size_t(oc) * H * W;
          for (int ky = 0; ky < k_; ++ky) {
            for (int kx = 0; kx < k_; ++kx) {
              T acc = T(0);
              for (int y = 0; y < H; ++y) {
                const T* row = chan + std::size_t(y + ky) * PW + kx;
                const T* grow = g + std::size_t(y) * W;
                for (int x = 0; x < W; ++x) acc += grow[x] * row[x];
              }
              wk[ky * k_ + kx] += acc;
            }
          }
        }
      }
    }
    if (use_bias_) {
#pragma omp parallel for schedule(static)
      for (int oc = 0; oc < out_c_; ++oc) {
        T acc = T(0);
        for (std::size_t i = 0; i < in.n; ++i) {
          const T* g = d_out.item(i) + std::size_t(oc) * H * W;
          for (std::size_t p = 0; p < std::size_t(H) * W; ++p) acc += g[p];
        }
        db_[oc] = acc;
      }
    }

    // Input gradients via the transposed stencil, one padded scratch plane
    // per item.
    d_in.resize(in.n, in.dims);
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < in.n; ++i) {
      std::vector<T> gpad(std::size_t(in_c_) * PH * PW, T(0));
      const T* g = d_out.item(i);
      for (int oc = 0; oc < out_c_; ++oc) {
        const T* gplane = g + std::size_t(oc) * H * W;
        for (int ic = 0; ic < in_c_; ++ic) {
          T* gchan = gpad.data() + std::size_t(ic) * PH * PW;
          const T* wk = w_.data() + ((std::size_t(oc) * in_c_ + ic) * k_) * k_;
          for (int ky = 0; ky < k_; ++ky) {
            for (int kx = 0; kx < k_; ++kx) {
              const T w = wk[ky * k_ + kx];
              for (int y = 0; y < H; ++y) {
                T* row = gchan + std::size_t(y + ky) * PW + kx;
                const T* grow = gplane + std::size_t(y) * W;
                for (int x = 0; x < W; ++x) row[x] += w * grow[x];
              }
            }
          }
        }
      }
      T* di = d_in.item(i);
      for (int ic = 0; ic < in_c_; ++ic)
        for (int y = 0; y < H; ++y)
          std::copy(gpad.begin() + (std::size_t(ic) * PH + y + pad_) * PW + pad_,
                    gpad.begin() + (std::size_t(ic) * PH + y + pad_) * PW + pad_ + W,
                    di + (std::size_t(ic) * H + y) * W);
    }
  }

 private:
  void pad_input(const Batch<T>& in, bool /*train*/) {
    const int H = in.dims[1], W = in.dims[2];
    const int PH = H + 2 * pad_, PW = W + 2 * pad_;
    padded_.resize(in.n, {in_c_, PH, PW});
    if (pad_ > 0) padded_.zero();
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < in.n; ++i) {
      const T* src = in.item(i);
      T* dst = padded_.item(i);
      for (int ic = 0; ic < in_c_; ++ic)
        for (int y = 0; y < H; ++y)
          std::copy(src + (std::size_t(ic) * H + y) * W, src + (std::size_t(ic) * H + y) * W + W,
                    dst + (std::size_t(ic) * PH + y + pad_) * PW + pad_);
    }
  }

  int in_c_, out_c_, k_, pad_;
  bool use_bias_;
  std::vector<T> w_, dw_, b_, db_;
  Batch<T> padded_;  // cached padded input for backward
};

// 1-D convolution, stride 1, no padding (valid).
template <typename T>
class Conv1d final : public Layer<T> {
 public:
  Conv1d(int in_c, int out_c, int k) : in_c_(in_c), out_c_(out_c), k_(k) {
    w_.assign(std::size_t(out_c_) * in_c_ * k_, T(0));
    dw_.assign(w_.size(), T(0));
    b_.assign(out_c_, T(0));
    db_.assign(out_c_, T(0));
  }

  std::string describe() const override {
    return "conv1d k=" + std::to_string(k_) + ", " + std::to_string(in_c_) + "->" +
           std::to_string(out_c_);
  }

  Shape output_shape(const Shape& in) const override {
    detail::require(in.size() == 2 && in[0] == in_c_,
                    describe() + ": expected input [" + std::to_string(in_c_) + ",L], got " +
                        shape_str(in));
    detail::require(in[1] >= k_, describe() + ": input shorter than the kernel");
    return {out_c_, in[1] - k_ + 1};
  }

  void init_params(Rng& rng) override {
    const double s = std::sqrt(2.0 / (double(in_c_) * k_));
    for (T& v : w_) v = static_cast<T>(s * rng.gaussian());
  }

  void collect(std::vector<TensorRef<T>>& out) override {
    out.push_back({"conv1d.w", &w_, &dw_, true, true});
    out.push_back({"conv1d.b", &b_, &db_, true, false});
  }

  void forward(const Batch<T>& in, Batch<T>& out, bool) override {
    const int L = in.dims[1];
    const int M = L - k_ + 1;
    out.resize(in.n, {out_c_, M});
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < in.n; ++i) {
      const T* src = in.item(i);
      T* dst = out.item(i);
      for (int oc = 0; oc < out_c_; ++oc) {
        T* orow = dst + std::size_t(oc) * M;
        std::fill(orow, orow + M, b_[oc]);
        for (int ic = 0; ic < in_c_; ++ic) {
          const T* irow = src + std::size_t(ic) * L;
          const T* wk = w_.data() + (std::size_t(oc) * in_c_ + ic) * k_;
          for (int dk = 0; dk < k_; ++dk) {
            const T w = wk[dk];
            for (int t = 0; t < M; ++t) orow[t] += w * irow[t + dk];
          }
        }
      }
    }
  }

  void backward(const Batch<T>& in, const Batch<T>&, const Batch<T>& d_out,
                Batch<T>& d_in) override {
    const int L = in.dims[1];
    const int M = L - k_ + 1;
    std::fill(dw_.begin(), dw_.end(), T(0));
#pragma omp parallel for schedule(static) collapse(2)
    for (int oc = 0; oc < out_c_; ++oc) {
      for (int ic = 0; ic < in_c_; ++ic) {
        T* wk = dw_.data() + (std::size_t(oc) * in_c_ + ic) * k_;
        for (std::size_t i = 0; i < in.n; ++i) {
          const T* irow = in.item(i) + std::size_t(ic) * L;
          const T* g = d_out.item(i) + std::size_t(oc) * M;
          for (int dk = 0; dk < k_; ++dk) {
            T acc = T(0);
            for (int t = 0; t < M; ++t) acc += g[t] * irow[t + dk];
            wk[dk] += acc;
          }
        }
      }
    }
#pragma omp parallel for schedule(static)
    for (int oc = 0; oc < out_c_; ++oc) {
      T acc = T(0);
      for (std::size_t i = 0; i < in.n; ++i) {
        const T* g = d_out.item(i) + std::size_t(oc) * M;
        for (int t = 0; t < M; ++t) acc += g[t];
      }
      db_[oc] = acc;
    }

    d_in.resize(in.n, in.dims);
    d_in.zero();
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < in.n; ++i) {
      T* di = d_in.item(i);
      const T* g = d_out.item(i);
      for (int oc = 0; oc < out_c_; ++oc) {
        const T* grow = g + std::size_t(oc) * M;
        for (int ic = 0; ic < in_c_; ++ic) {
          T* drow = di + std::size_t(ic) * L;
          const T* wk = w_.data() + (std::size_t(oc) * in_c_ + ic) * k_;
          for (int dk = 0; dk < k_; ++dk) {
            const T w = wk[dk];
            for (int t = 0; t < M; ++t) drow[t + dk] += w * grow[t];
          }
        }
      }
    }
  }

 private:
  int in_c_, out_c_, k_;
  std::vector<T> w_, dw_, b_, db_;
};

// First text layer: consumes a row of symbol ids (stored as T) and applies
// a 1-D convolution over their one-hot encoding without materializing it.
// As an input layer it produces no input gradient.
template <typename T>
class CharConv1d final : public Layer<T> {
 public:
  CharConv1d(int vocab, int out_c, int k) : vocab_(vocab), out_c_(out_c), k_(k) {
    w_.assign(std::size_t(out_c_) * vocab_ * k_, T(0));
    dw_.assign(w_.size(), T(0));
    b_.assign(out_c_, T(0));
    db_.assign(out_c_, T(0));
  }

  std::string describe() const override {
    return "conv1d k=" + std::to_string(k_) + " over " + std::to_string(vocab_) +
           "-symbol one-hot, ->" + std::to_string(out_c_);
  }

  Shape output_shape(const Shape& in) const override {
    detail::require(in.size() == 1 && in[0] >= k_,
                    describe() + ": expected a symbol row of length >= k, got " + shape_str(in));
    return {out_c_, in[0] - k_ + 1};
  }

  void init_params(Rng& rng) override {
    // One active symbol per tap: fan-in is k, not vocab*k.
    const double s = std::sqrt(2.0 / double(k_));
    for (T& v : w_) v = static_cast<T>(s * rng.gaussian());
  }

  void collect(std::vector<TensorRef<T>>& out) override {
    out.push_back({"char_conv.w", &w_, &dw_, true, true});
    out.push_back({"char_conv.b", &b_, &db_, true, false});
  }

  void forward(const Batch<T>& in, Batch<T>& out, bool) override {
    const int L = in.dims[0];
    const int M = L - k_ + 1;
    out.resize(in.n, {out_c_, M});
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < in.n; ++i) {
      const T* sym = in.item(i);
      T* dst = out.item(i);
      for (int oc = 0; oc < out_c_; ++oc) {
        T* orow = dst + std::size_t(oc) * M;
        const T* wk = w_.data() + std::size_t(oc) * vocab_ * k_;
        for (int t = 0; t < M; ++t) {
          T s = b_[oc];
          for (int dk = 0; dk < k_; ++dk)
            s += wk[std::size_t(static_cast<int>(sym[t + dk])) * k_ + dk];
          orow[t] = s;
        }
      }
    }
  }

  void backward(const Batch<T>& in, const Batch<T>&, const Batch<T>& d_out,
                Batch<T>& d_in) override {
    const int L = in.dims[0];
    const int M = L - k_ + 1;
    std::fill(dw_.begin(), dw_.end(), T(0));
#pragma omp parallel for schedule(static)
    for (int oc = 0; oc < out_c_; ++oc) {
      T* wk = dw_.data() + std::size_t(oc) * vocab_ * k_;
      T acc_b = T(0);
      for (std::size_t i = 0; i < in.n; ++i) {
        const T* sym = in.item(i);
        const T* g = d_out.item(i) + std::size_t(oc) * M;
        for (int t = 0; t < M; ++t) {
          const T gv = g[t];
          acc_b += gv;
          for (int dk = 0; dk < k_; ++dk)
            wk[std::size_t(static_cast<int>(sym[t + dk])) * k_ + dk] += gv;
        }
      }
      db_[oc] = acc_b;
    }
    d_in.resize(in.n, in.dims);
    d_in.zero();  // symbols carry no gradient
  }

 private:
  int vocab_, out_c_, k_;
  std::vector<T> w_, dw_, b_, db_;
};

template <typename T>
class Relu final : public Layer<T> {
 public:
  std::string describe() const override { return "relu"; }
  Shape output_shape(const Shape& in) const override { return in; }

  void forward(const Batch<T>& in, Batch<T>& out, bool) override {
    out.resize(in.n, in.dims);
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < in.n; ++i) {
      const T* src = in.item(i);
      T* dst = out.item(i);
      for (std::size_t p = 0; p < in.item_size(); ++p) dst[p] = src[p] > T(0) ? src[p] : T(0);
    }
  }

  void backward(const Batch<T>& in, const Batch<T>&, const Batch<T>& d_out,
                Batch<T>& d_in) override {
    d_in.resize(in.n, in.dims);
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < in.n; ++i) {
      const T* src = in.item(i);
      const T* g = d_out.item(i);
      T* di = d_in.item(i);
      for (std::size_t p = 0; p < in.item_size(); ++p) di[p] = src[p] > T(0) ? g[p] : T(0);
    }
  }
};

// Non-overlapping 2-D max pooling. The argmax index per output element is
// cached for the backward scatter; ties go to the first element in scan
// order.
template <typename T>
class MaxPool2d final : public Layer<T> {
 public:
  explicit MaxPool2d(int size) : size_(size) {}

  std::string describe() const override { return "maxpool " + std::to_string(size_); }

  Shape output_shape(const Shape& in) const override {
    detail::require(in.size() == 3 && in[1] % size_ == 0 && in[2] % size_ == 0,
                    describe() + ": spatial dims must divide the pool size, got " + shape_str(in));
    return {in[0], in[1] / size_, in[2] / size_};
  }

  void forward(const Batch<T>& in, Batch<T>& out, bool) override {
    const int C = in.dims[0], H = in.dims[1], W = in.dims[2];
    const int OH = H / size_, OW = W / size_;
    out.resize(in.n, {C, OH, OW});
    argmax_.resize(out.data.size());
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < in.n; ++i) {
      const T* src = in.item(i);
      T* dst = out.item(i);
      std::uint32_t* am = argmax_.data() + i * out.item_size();
      for (int c = 0; c < C; ++c) {
        for (int oy = 0; oy < OH; ++oy) {
          for (int ox = 0; ox < OW; ++ox) {
            std::uint32_t best_idx = (std::uint32_t(c) * H + oy * size_) * W + ox * size_;
            T best = src[best_idx];
            for (int dy = 0; dy < size_; ++dy) {
              for (int dx = 0; dx < size_; ++dx) {
                const std::uint32_t idx =
                    (std::uint32_t(c) * H + oy * size_ + dy) * W + ox * size_ + dx;
                if (src[idx] > best) {
                  best = src[idx];
                  best_idx = idx;
                }
              }
            }
            dst[(std::size_t(c) * OH + oy) * OW + ox] = best;
            am[(std::size_t(c) * OH + oy) * OW + ox] = best_idx;
          }
        }
      }
    }
  }

  void backward(const Batch<T>& in, const Batch<T>& out, const Batch<T>& d_out,
                Batch<T>& d_in) override {
    d_in.resize(in.n, in.dims);
    d_in.zero();
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < in.n; ++i) {
      const T* g = d_out.item(i);
      T* di = d_in.item(i);
      const std::uint32_t* am = argmax_.data() + i * out.item_size();
      for (std::size_t p = 0; p < out.item_size(); ++p) di[am[p]] += g[p];
    }
  }

 private:
  int size_;
  std::vector<std::uint32_t> argmax_;
};

// Non-overlapping 1-D max pooling; trailing remainder positions are dropped
// (1014 -> 338 at size 3 keeps 336*3 of them when the length divides, which
// the builders arrange).
template <typename T>
class MaxPool1d final : public Layer<T> {
 public:
  explicit MaxPool1d(int size) : size_(size) {}

  std::string describe() const override { return "maxpool1d " + std::to_string(size_); }

  Shape output_shape(const Shape& in) const override {
    detail::require(in.size() == 2 && in[1] >= size_, describe() + ": bad input " + shape_str(in));
    return {in[0], in[1] / size_};
  }

  void forward(const Batch<T>& in, Batch<T>& out, bool) override {
    const int C = in.dims[0], L = in.dims[1], M = L / size_;
    out.resize(in.n, {C, M});
    argmax_.resize(out.data.size());
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < in.n; ++i) {
      const T* src = in.item(i);
      T* dst = out.item(i);
      std::uint32_t* am = argmax_.data() + i * out.item_size();
      for (int c = 0; c < C; ++c) {
        for (int t = 0; t < M; ++t) {
          std::uint32_t best_idx = std::uint32_t(c) * L + t * size_;
          T best = src[best_idx];
          for (int d = 1; d < size_; ++d) {
            const std::uint32_t idx = std::uint32_t(c) * L + t * size_ + d;
            if (src[idx] > best) {
              best = src[idx];
              best_idx = idx;
            }
          }
          dst[std::size_t(c) * M + t] = best;
          am[std::size_t(c) * M + t] = best_idx;
        }
      }
    }
  }

  void backward(const Batch<T>& in, const Batch<T>& out, const Batch<T>& d_out,
                Batch<T>& d_in) override {
    d_in.resize(in.n, in.dims);
    d_in.zero();
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < in.n; ++i) {
      const T* g = d_out.item(i);
      T* di = d_in.item(i);
      const std::uint32_t* am = argmax_.data() + i * out.item_size();
      for (std::size_t p = 0; p < out.item_size(); ++p) di[am[p]] += g[p];
    }
  }

 private:
  int size_;
  std::vector<std::uint32_t> argmax_;
};

// Max over the full temporal extent: {C, L} -> {C}.
template <typename T>
class GlobalMaxPool1d final : public Layer<T> {
 public:
  std::string describe() const override { return "global maxpool"; }

  Shape output_shape(const Shape& in) const override {
    detail::require(in.size() == 2, describe() + ": bad input " + shape_str(in));
    return {in[0]};
  }

  void forward(const Batch<T>& in, Batch<T>& out, bool) override {
    const int C = in.dims[0], L = in.dims[1];
    out.resize(in.n, {C});
    argmax_.resize(out.data.size());
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < in.n; ++i) {
      const T* src = in.item(i);
      T* dst = out.item(i);
      std::uint32_t* am = argmax_.data() + i * C;
      for (int c = 0; c < C; ++c) {
        std::uint32_t best_idx = std::uint32_t(c) * L;
        T best = src[best_idx];
        for (int t = 1; t < L; ++t) {
          if (src[std::uint32_t(c) * L + t] > best) {
            best = src[std::uint32_t(c) * L + t];
            best_idx = std::uint32_t(c) * L + t;
          }
        }
        dst[c] = best;
        am[c] = best_idx;
      }
    }
  }

  void backward(const Batch<T>& in, const Batch<T>&, const Batch<T>& d_out,
                Batch<T>& d_in) override {
    const int C = in.dims[0];
    d_in.resize(in.n, in.dims);
    d_in.zero();
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < in.n; ++i) {
      const T* g = d_out.item(i);
      T* di = d_in.item(i);
      const std::uint32_t* am = argmax_.data() + i * C;
      for (int c = 0; c < C; ++c) di[am[c]] += g[c];
    }
  }

 private:
  std::vector<std::uint32_t> argmax_;
};

// Per-channel normalization with running mean/var and learned scale/shift.
// Training mode normalizes by batch statistics (exact coupled backward);
// eval mode uses the running estimates.
template <typename T>
class BatchNormLite final : public Layer<T> {
 public:
  explicit BatchNormLite(int channels, double momentum = 0.1, double eps = 1e-5)
      : c_(channels), momentum_(momentum), eps_(eps) {
    gamma_.assign(c_, T(1));
    beta_.assign(c_, T(0));
    dgamma_.assign(c_, T(0));
    dbeta_.assign(c_, T(0));
    running_mean_.assign(c_, T(0));
    running_var_.assign(c_, T(1));
    mean_.assign(c_, T(0));
    inv_std_.assign(c_, T(1));
    sums_g_.assign(c_, T(0));
    sums_gx_.assign(c_, T(0));
  }

  std::string describe() const override { return "batch_norm_lite " + std::to_string(c_); }

  Shape output_shape(const Shape& in) const override {
    detail::require(!in.empty() && in[0] == c_,
                    describe() + ": channel mismatch, got " + shape_str(in));
    return in;
  }

  void collect(std::vector<TensorRef<T>>& out) override {
    out.push_back({"bn.gamma", &gamma_, &dgamma_, true, false});
    out.push_back({"bn.beta", &beta_, &dbeta_, true, false});
    out.push_back({"bn.running_mean", &running_mean_, nullptr, false, false});
    out.push_back({"bn.running_var", &running_var_, nullptr, false, false});
  }

  void forward(const Batch<T>& in, Batch<T>& out, bool train) override {
    const std::size_t spatial = in.item_size() / c_;
    out.resize(in.n, in.dims);
    if (train) {
      const double m = double(in.n) * double(spatial);
#pragma omp parallel for schedule(static)
      for (int c = 0; c < c_; ++c) {
        double sum = 0.0, sumsq = 0.0;
        for (std::size_t i = 0; i < in.n; ++i) {
          const T* row = in.item(i) + std::size_t(c) * spatial;
          for (std::size_t p = 0; p < spatial; ++p) {
            sum += double(row[p]);
            sumsq += double(row[p]) * double(row[p]);
          }
        }
        const double mean = sum / m;
        const double var = std::max(0.0, sumsq / m - mean * mean);
        mean_[c] = static_cast<T>(mean);
        inv_std_[c] = static_cast<T>(1.0 / std::sqrt(var + eps_));
        running_mean_[c] =
            static_cast<T>((1.0 - momentum_) * double(running_mean_[c]) + momentum_ * mean);
        running_var_[c] =
            static_cast<T>((1.0 - momentum_) * double(running_var_[c]) + momentum_ * var);
      }
    } else {
      for (int c = 0; c < c_; ++c) {
        mean_[c] = running_mean_[c];
        inv_std_[c] = static_cast<T>(1.0 / std::sqrt(double(running_var_[c]) + eps_));
      }
    }
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < in.n; ++i) {
      const T* src = in.item(i);
      T* dst = out.item(i);
      for (int c = 0; c < c_; ++c) {
        const T mu = mean_[c], is = inv_std_[c], g = gamma_[c], b = beta_[c];
        const T* s = src + std::size_t(c) * spatial;
        T* d = dst + std::size_t(c) * spatial;
        for (std::size_t p = 0; p < spatial; ++p) d[p] = g * (s[p] - mu) * is + b;
      }
    }
  }

  void backward(const Batch<T>& in, const Batch<T>&, const Batch<T>& d_out,
                Batch<T>& d_in) override {
    const std::size_t spatial = in.item_size() / c_;
    const double m = double(in.n) * double(spatial);
    d_in.resize(in.n, in.dims);

    // Per-channel sums of g and g*xhat, each accumulated over items in
    // index order.
#pragma omp parallel for schedule(static)
    for (int c = 0; c < c_; ++c) {
      double sum_g = 0.0, sum_gx = 0.0;
      const T mu = mean_[c], is = inv_std_[c];
      for (std::size_t i = 0; i < in.n; ++i) {
        const T* x = in.item(i) + std::size_t(c) * spatial;
        const T* g = d_out.item(i) + std::size_t(c) * spatial;
        for (std::size_t p = 0; p < spatial; ++p) {
          sum_g += double(g[p]);
          sum_gx += double(g[p]) * double((x[p] - mu) * is);
        }
      }
      dbeta_[c] = static_cast<T>(sum_g);
      dgamma_[c] = static_cast<T>(sum_gx);
      sums_g_[c] = static_cast<T>(sum_g / m);
      sums_gx_[c] = static_cast<T>(sum_gx / m);
    }

#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < in.n; ++i) {
      const T* x = in.item(i);
      const T* g = d_out.item(i);
      T* di = d_in.item(i);
      for (int c = 0; c < c_; ++c) {
        const T mu = mean_[c], is = inv_std_[c], gm = gamma_[c];
        const T mg = sums_g_[c], mgx = sums_gx_[c];
        const T* xs = x + std::size_t(c) * spatial;
        const T* gs = g + std::size_t(c) * spatial;
        T* ds = di + std::size_t(c) * spatial;
        for (std::size_t p = 0; p < spatial; ++p) {
          const T xhat = (xs[p] - mu) * is;
          ds[p] = gm * is * (gs[p] - mg - xhat * mgx);
        }
      }
    }
  }

 private:
  int c_;
  double momentum_, eps_;
  std::vector<T> gamma_, beta_, dgamma_, dbeta_;
  std::vector<T> running_mean_, running_var_;
  std::vector<T> mean_, inv_std_;  // saved batch stats
  std::vector<T> sums_g_, sums_gx_;
};

template <typename T>
class Flatten final : public Layer<T> {
 public:
  std::string describe() const override { return "flatten"; }
  Shape output_shape(const Shape& in) const override {
    return {static_cast<int>(shape_size(in))};
  }
  void forward(const Batch<T>& in, Batch<T>& out, bool) override {
    out.resize(in.n, {static_cast<int>(in.item_size())});
    std::copy(in.data.begin(), in.data.end(), out.data.begin());
  }
  void backward(const Batch<T>& in, const Batch<T>&, const Batch<T>& d_out,
                Batch<T>& d_in) override {
    d_in.resize(in.n, in.dims);
    std::copy(d_out.data.begin(), d_out.data.end(), d_in.data.begin());
  }
};

template <typename T>
class Dense final : public Layer<T> {
 public:
  Dense(int in_dim, int units) : in_dim_(in_dim), units_(units) {
    w_.assign(std::size_t(units_) * in_dim_, T(0));
    dw_.assign(w_.size(), T(0));
    b_.assign(units_, T(0));
    db_.assign(units_, T(0));
  }

  std::string describe() const override {
    return "dense " + std::to_string(in_dim_) + "->" + std::to_string(units_);
  }

  Shape output_shape(const Shape& in) const override {
    detail::require(in.size() == 1 && in[0] == in_dim_,
                    describe() + ": expected input [" + std::to_string(in_dim_) + "], got " +
                        shape_str(in));
    return {units_};
  }

  void init_params(Rng& rng) override {
    const double s = std::sqrt(2.0 / double(in_dim_));
    for (T& v : w_) v = static_cast<T>(s * rng.gaussian());
  }

  void collect(std::vector<TensorRef<T>>& out) override {
    out.push_back({"dense.w", &w_, &dw_, true, true});
    out.push_back({"dense.b", &b_, &db_, true, false});
  }

  void forward(const Batch<T>& in, Batch<T>& out, bool) override {
    out.resize(in.n, {units_});
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < in.n; ++i) {
      const T* x = in.item(i);
      T* y = out.item(i);
      for (int u = 0; u < units_; ++u) {
        const T* wk = w_.data() + std::size_t(u) * in_dim_;
        T s = b_[u];
        for (int j = 0; j < in_dim_; ++j) s += wk[j] * x[j];
        y[u] = s;
      }
    }
  }

  void backward(const Batch<T>& in, const Batch<T>&, const Batch<T>& d_out,
                Batch<T>& d_in) override {
#pragma omp parallel for schedule(static)
    for (int u = 0; u < units_; ++u) {
      T* dwk = dw_.data() + std::size_t(u) * in_dim_;
      std::fill(dwk, dwk + in_dim_, T(0));
      T gb = T(0);
      for (std::size_t i = 0; i < in.n; ++i) {
        const T g = d_out.item(i)[u];
        gb += g;
        const T* x = in.item(i);
        for (int j = 0; j < in_dim_; ++j) dwk[j] += g * x[j];
      }
      db_[u] = gb;
    }
    d_in.resize(in.n, in.dims);
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < in.n; ++i) {
      const T* g = d_out.item(i);
      T* di = d_in.item(i);
      for (int j = 0; j < in_dim_; ++j) {
        T s = T(0);
        for (int u = 0; u < units_; ++u) s += w_[std::size_t(u) * in_dim_ + j] * g[u];
        di[j] = s;
      }
    }
  }

 private:
  int in_dim_, units_;
  std::vector<T> w_, dw_, b_, db_;
};

// n_convs x (conv3x3 -> batch-norm) with ReLU between, identity shortcut
// added before the final ReLU: out = relu(F(in) + in). The plain variant
// drops only the shortcut, keeping the parameter count identical.
template <typename T>
class ResidualBlock final : public Layer<T> {
 public:
  ResidualBlock(int channels, int n_convs, bool use_shortcut)
      : channels_(channels), use_shortcut_(use_shortcut) {
    for (int i = 0; i < n_convs; ++i) {
      convs_.push_back(std::make_unique<Conv2d<T>>(channels, channels, 3, false));
      bns_.push_back(std::make_unique<BatchNormLite<T>>(channels));
    }
    conv_out_.resize(n_convs);
    bn_out_.resize(n_convs);
    relu_out_.resize(n_convs);
  }

  std::string describe() const override {
    return std::string(use_shortcut_ ? "residual" : "plain") + " block " +
           std::to_string(channels_) + "ch x" + std::to_string(convs_.size());
  }

  Shape output_shape(const Shape& in) const override {
    detail::require(in.size() == 3 && in[0] == channels_,
                    describe() + ": channel mismatch, got " + shape_str(in));
    Shape s = in;
    for (std::size_t i = 0; i < convs_.size(); ++i) s = bns_[i]->output_shape(convs_[i]->output_shape(s));
    detail::require(s == in, describe() + ": branch must preserve shape");
    return in;
  }

  void init_params(Rng& rng) override {
    for (std::size_t i = 0; i < convs_.size(); ++i) {
      convs_[i]->init_params(rng);
      bns_[i]->init_params(rng);
    }
  }

  void collect(std::vector<TensorRef<T>>& out) override {
    for (std::size_t i = 0; i < convs_.size(); ++i) {
      convs_[i]->collect(out);
      bns_[i]->collect(out);
    }
  }

  void forward(const Batch<T>& in, Batch<T>& out, bool train) override {
    const Batch<T>* cur = &in;
    for (std::size_t i = 0; i < convs_.size(); ++i) {
      convs_[i]->forward(*cur, conv_out_[i], train);
      bns_[i]->forward(conv_out_[i], bn_out_[i], train);
      if (i + 1 < convs_.size()) {
        relu_mid_.forward(bn_out_[i], relu_out_[i], train);
        cur = &relu_out_[i];
      }
    }
    const Batch<T>& branch = bn_out_.back();
    out.resize(in.n, in.dims);
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < in.n; ++i) {
      const T* f = branch.item(i);
      const T* x = in.item(i);
      T* y = out.item(i);
      for (std::size_t p = 0; p < in.item_size(); ++p) {
        const T pre = use_shortcut_ ? f[p] + x[p] : f[p];
        y[p] = pre > T(0) ? pre : T(0);
      }
    }
  }

  void backward(const Batch<T>& in, const Batch<T>& out, const Batch<T>& d_out,
                Batch<T>& d_in) override {
    // Through the final ReLU (mask from the produced output).
    d_pre_.resize(in.n, in.dims);
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < in.n; ++i) {
      const T* y = out.item(i);
      const T* g = d_out.item(i);
      T* dp = d_pre_.item(i);
      for (std::size_t p = 0; p < in.item_size(); ++p) dp[p] = y[p] > T(0) ? g[p] : T(0);
    }

    // Branch chain in reverse.
    const Batch<T>* grad = &d_pre_;
    for (std::size_t i = convs_.size(); i-- > 0;) {
      const Batch<T>& conv_in = i == 0 ? in : relu_out_[i - 1];
      bns_[i]->backward(conv_out_[i], bn_out_[i], *grad, d_bn_);
      convs_[i]->backward(conv_in, conv_out_[i], d_bn_, d_conv_);
      if (i > 0) {
        relu_mid_.backward(bn_out_[i - 1], relu_out_[i - 1], d_conv_, d_relu_);
        d_relu_.data.swap(d_conv_.data);
        std::swap(d_relu_.dims, d_conv_.dims);
        std::swap(d_relu_.n, d_conv_.n);
      }
      grad = &d_conv_;
    }

    d_in.resize(in.n, in.dims);
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < in.n; ++i) {
      const T* chain = d_conv_.item(i);
      const T* skip = d_pre_.item(i);
      T* di = d_in.item(i);
      for (std::size_t p = 0; p < in.item_size(); ++p)
        di[p] = use_shortcut_ ? chain[p] + skip[p] : chain[p];
    }
  }

 private:
  int channels_;
  bool use_shortcut_;
  std::vector<std::unique_ptr<Conv2d<T>>> convs_;
  std::vector<std::unique_ptr<BatchNormLite<T>>> bns_;
  Relu<T> relu_mid_;
  std::vector<Batch<T>> conv_out_, bn_out_, relu_out_;
  Batch<T> d_pre_, d_bn_, d_conv_, d_relu_;
};

}  // namespace sigbench::cnn
